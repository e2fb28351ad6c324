//! Layers of latent patches joined by invertible affine gluing maps.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::bootstrap::{poincare_compose, BootstrapConfig, IterationTrace, TargetMap};
use crate::error::{MaiError, Result};
use crate::kernel::Kernel;
use crate::memory::{TransitionEntry, TransitionMemory};
use crate::point::{check_dim, euclidean, ContextPoint, LatentPoint};
use crate::retrieval::MemoryRetriever;
use crate::topology::CycleRepresentative;

/// x ↦ Ax + t with A stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    dim: usize,
    linear: Vec<f64>,
    translation: Vec<f64>,
}

const SINGULAR_PIVOT: f64 = 1e-12;

impl AffineMap {
    pub fn new(linear: Vec<f64>, translation: Vec<f64>) -> Result<Self> {
        let dim = translation.len();
        if dim == 0 || linear.len() != dim * dim {
            return Err(MaiError::config(format!(
                "affine map needs a {dim}x{dim} matrix, got {} entries",
                linear.len()
            )));
        }
        if linear.iter().chain(&translation).any(|v| !v.is_finite()) {
            return Err(MaiError::config("affine map coefficients must be finite"));
        }
        let map = Self {
            dim,
            linear,
            translation,
        };
        map.inverse()?;
        Ok(map)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut linear = vec![0.0; dim * dim];
        for i in 0..dim {
            linear[i * dim + i] = 1.0;
        }
        Self::new(linear, vec![0.0; dim])
    }

    pub fn translation(t: Vec<f64>) -> Result<Self> {
        let mut m = Self::identity(t.len())?;
        m.translation = t;
        Ok(m)
    }

    /// Planar similarity: scale·Rot(angle)·x + t.
    pub fn similarity2(scale: f64, angle: f64, t: [f64; 2]) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        Self::new(vec![scale * c, -scale * s, scale * s, scale * c], t.to_vec())
    }

    pub fn rotation2(angle: f64) -> Result<Self> {
        Self::similarity2(1.0, angle, [0.0, 0.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn translation_part(&self) -> &[f64] {
        &self.translation
    }

    /// Shifts the translation by `delta`.
    pub fn perturbed(&self, delta: &[f64]) -> Result<Self> {
        check_dim("perturbation", self.dim, delta.len())?;
        Self::new(
            self.linear.clone(),
            self.translation.iter().zip(delta).map(|(t, d)| t + d).collect(),
        )
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("affine map input", self.dim, x.len())?;
        Ok((0..self.dim)
            .map(|r| {
                self.translation[r]
                    + self.linear[r * self.dim..(r + 1) * self.dim]
                        .iter()
                        .zip(x)
                        .map(|(a, v)| a * v)
                        .sum::<f64>()
            })
            .collect())
    }

    pub fn apply_point(&self, p: &LatentPoint) -> Result<LatentPoint> {
        LatentPoint::new(self.apply(p.coords())?)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineMap) -> Result<AffineMap> {
        check_dim("composed map", self.dim, inner.dim)?;
        let d = self.dim;
        let mut linear = vec![0.0; d * d];
        for r in 0..d {
            for c in 0..d {
                linear[r * d + c] = (0..d).map(|k| self.linear[r * d + k] * inner.linear[k * d + c]).sum();
            }
        }
        let translation = self.apply(&inner.translation)?;
        Ok(AffineMap {
            dim: d,
            linear,
            translation,
        })
    }

    /// Inverse by Gauss–Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<AffineMap> {
        let d = self.dim;
        let mut a = self.linear.clone();
        let mut inv = vec![0.0; d * d];
        for i in 0..d {
            inv[i * d + i] = 1.0;
        }
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&x, &y| a[x * d + col].abs().total_cmp(&a[y * d + col].abs()))
                .expect("non-empty range");
            if a[pivot * d + col].abs() < SINGULAR_PIVOT {
                return Err(MaiError::config("gluing map is not invertible"));
            }
            if pivot != col {
                for k in 0..d {
                    a.swap(pivot * d + k, col * d + k);
                    inv.swap(pivot * d + k, col * d + k);
                }
            }
            let p = a[col * d + col];
            for k in 0..d {
                a[col * d + k] /= p;
                inv[col * d + k] /= p;
            }
            for r in 0..d {
                if r == col {
                    continue;
                }
                let f = a[r * d + col];
                if f == 0.0 {
                    continue;
                }
                for k in 0..d {
                    a[r * d + k] -= f * a[col * d + k];
                    inv[r * d + k] -= f * inv[col * d + k];
                }
            }
        }
        let translation = (0..d)
            .map(|r| -(0..d).map(|k| inv[r * d + k] * self.translation[k]).sum::<f64>())
            .collect();
        Ok(AffineMap {
            dim: d,
            linear: inv,
            translation,
        })
    }

    /// |det A|^(1/d): the uniform scale factor for similarities.
    pub fn scale_factor(&self) -> f64 {
        let d = self.dim;
        let mut a = self.linear.clone();
        let mut det = 1.0;
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&x, &y| a[x * d + col].abs().total_cmp(&a[y * d + col].abs()))
                .expect("non-empty range");
            if a[pivot * d + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for k in 0..d {
                    a.swap(pivot * d + k, col * d + k);
                }
            }
            let p = a[col * d + col];
            det *= p;
            for r in col + 1..d {
                let f = a[r * d + col] / p;
                for k in col..d {
                    a[r * d + k] -= f * a[col * d + k];
                }
            }
        }
        det.abs().powf(1.0 / d as f64)
    }
}

/// L layers glued by `up[ℓ]` from layer ℓ to ℓ+1, and a map `down` from the
/// top layer back to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchStack {
    pub up: Vec<AffineMap>,
    pub down: AffineMap,
    pub pulls: Vec<f64>,
}

impl PatchStack {
    pub fn new(up: Vec<AffineMap>, down: AffineMap, pulls: Vec<f64>) -> Result<Self> {
        if up.is_empty() {
            return Err(MaiError::config("a stack needs at least 2 layers"));
        }
        if pulls.len() != up.len() + 1 {
            return Err(MaiError::config(format!(
                "one pull per layer: {} layers, {} pulls",
                up.len() + 1,
                pulls.len()
            )));
        }
        let dim = down.dim();
        for m in &up {
            check_dim("gluing map", dim, m.dim())?;
        }
        Ok(Self { up, down, pulls })
    }

    /// Stack whose return map is the exact inverse of the composed gluing maps.
    pub fn closed(up: Vec<AffineMap>, pull: f64) -> Result<Self> {
        let first = up
            .first()
            .ok_or_else(|| MaiError::config("a stack needs at least 2 layers"))?;
        let mut total = AffineMap::identity(first.dim())?;
        for m in &up {
            total = m.compose(&total)?;
        }
        let layers = up.len() + 1;
        Self::new(up, total.inverse()?, vec![pull; layers])
    }

    pub fn layers(&self) -> usize {
        self.up.len() + 1
    }

    /// G_down ∘ G_{L−1,L} ∘ … ∘ G_{1,2}.
    pub fn loop_map(&self) -> Result<AffineMap> {
        let mut total = AffineMap::identity(self.down.dim())?;
        for m in &self.up {
            total = m.compose(&total)?;
        }
        self.down.compose(&total)
    }
}

#[derive(Debug, Clone)]
pub struct StackRun {
    pub traces: Vec<IterationTrace>,
    /// Fixed orbit reached on each layer.
    pub orbits: Vec<CycleRepresentative>,
    /// Top-layer orbit mapped back to the first layer.
    pub round_trip: CycleRepresentative,
    pub closure_defect: f64,
}

/// Phase context of vertex `k` of an `n`-vertex cycle.
fn phase_context(k: usize, n: usize) -> ContextPoint {
    let a = TAU * k as f64 / n as f64;
    ContextPoint::new(vec![a.cos(), a.sin()]).expect("finite")
}

/// Runs MAI on one layer: memory of the cycle's transitions keyed by phase,
/// nearest-match retrieval, and a target that looks the phase up on the cycle.
fn layer_orbit(
    cycle: &CycleRepresentative,
    pull: f64,
    rounds: usize,
    tol: f64,
) -> Result<(IterationTrace, CycleRepresentative)> {
    let n = cycle.len();
    let contexts: Vec<ContextPoint> = (0..n).map(|k| phase_context(k, n)).collect();
    let mut store = TransitionMemory::new(2, cycle.dim())?;
    for (k, context) in contexts.iter().enumerate() {
        store.insert(TransitionEntry::new(
            context.clone(),
            cycle.vertices()[k].clone(),
            cycle.vertices()[(k + 1) % n].clone(),
            k as u64,
        ))?;
    }
    let kernel = Kernel::hard_nearest();
    let config = BootstrapConfig::new(pull, TargetMap::cycle_lookup(contexts.clone(), cycle.clone())?)?;
    let retriever = MemoryRetriever::new(&store, &kernel);
    let res = poincare_compose(&retriever, &config, &contexts, &cycle.vertices()[n - 1], rounds, tol)?;
    let orbit = CycleRepresentative::new(
        res.orbit.contents().cloned().collect(),
        cycle.birth(),
        cycle.persistence(),
    )?;
    Ok((res.trace, orbit))
}

fn map_cycle(map: &AffineMap, cycle: &CycleRepresentative, scale: f64) -> Result<CycleRepresentative> {
    let vertices = cycle
        .vertices()
        .iter()
        .map(|v| map.apply_point(v))
        .collect::<Result<Vec<_>>>()?;
    CycleRepresentative::new(vertices, cycle.birth() * scale, cycle.persistence() * scale)
}

/// Lifts the cycle layer by layer, settling each layer on its MAI orbit, then
/// maps the top orbit back down. The closure defect is the largest distance
/// between a base vertex and its round-trip image.
pub fn stack_run(stack: &PatchStack, base: &CycleRepresentative, rounds: usize, tol: f64) -> Result<StackRun> {
    check_dim("base cycle", stack.down.dim(), base.dim())?;
    let mut traces = Vec::with_capacity(stack.layers());
    let mut orbits = Vec::with_capacity(stack.layers());
    let mut current = base.clone();
    for layer in 0..stack.layers() {
        let (trace, orbit) = layer_orbit(&current, stack.pulls[layer], rounds, tol)?;
        if !trace.converged {
            return Err(MaiError::invariant(
                "layer orbit converges",
                format!("layer {layer} did not settle within {rounds} rounds"),
            ));
        }
        traces.push(trace);
        if let Some(map) = stack.up.get(layer) {
            current = map_cycle(map, &orbit, map.scale_factor())?;
        }
        orbits.push(orbit);
    }
    let top = orbits.last().expect("at least two layers");
    let round_trip = map_cycle(&stack.down, top, stack.down.scale_factor())?;
    let closure_defect = base
        .vertices()
        .iter()
        .zip(round_trip.vertices())
        .map(|(a, b)| a.distance(b))
        .fold(0.0, f64::max);
    Ok(StackRun {
        traces,
        orbits,
        round_trip,
        closure_defect,
    })
}

/// Pairwise gluing maps G_ij between `patches` overlapping patches.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GluingAtlas {
    pub patches: usize,
    pub maps: BTreeMap<(usize, usize), AffineMap>,
}

impl GluingAtlas {
    pub fn new(patches: usize) -> Self {
        Self {
            patches,
            maps: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, i: usize, j: usize, map: AffineMap) {
        self.maps.insert((i, j), map);
    }

    fn get(&self, i: usize, j: usize) -> Result<&AffineMap> {
        self.maps
            .get(&(i, j))
            .ok_or_else(|| MaiError::config(format!("gluing map ({i}, {j}) is missing")))
    }
}

/// max over i < j < k and sample points of ‖G_jk(G_ij(x)) − G_ik(x)‖.
pub fn cocycle_defect(atlas: &GluingAtlas, points: &[Vec<f64>]) -> Result<f64> {
    if points.is_empty() {
        return Err(MaiError::input("cocycle check needs at least one sample point"));
    }
    let mut worst: f64 = 0.0;
    for i in 0..atlas.patches {
        for j in i + 1..atlas.patches {
            for k in j + 1..atlas.patches {
                let (gij, gjk, gik) = (atlas.get(i, j)?, atlas.get(j, k)?, atlas.get(i, k)?);
                for x in points {
                    let two_step = gjk.apply(&gij.apply(x)?)?;
                    let direct = gik.apply(x)?;
                    worst = worst.max(euclidean(&two_step, &direct));
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let m = AffineMap::similarity2(2.0, 0.7, [1.0, -3.0]).unwrap();
        let x = [0.3, 0.9];
        let y = m.inverse().unwrap().apply(&m.apply(&x).unwrap()).unwrap();
        assert!(euclidean(&x, &y) < 1e-14);
        assert!((m.scale_factor() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_map_rejected() {
        let err = AffineMap::new(vec![1.0, 2.0, 2.0, 4.0], vec![0.0, 0.0]).unwrap_err();
        assert!(matches!(err, MaiError::Config(_)));
    }

    #[test]
    fn composition_order() {
        let a = AffineMap::translation(vec![1.0, 0.0]).unwrap();
        let r = AffineMap::rotation2(std::f64::consts::FRAC_PI_2).unwrap();
        // rotate after translating: (0,0) -> (1,0) -> (0,1)
        let y = r.compose(&a).unwrap().apply(&[0.0, 0.0]).unwrap();
        assert!(euclidean(&y, &[0.0, 1.0]) < 1e-15);
    }

    #[test]
    fn missing_pair_is_config_error() {
        let mut atlas = GluingAtlas::new(3);
        atlas.insert(0, 1, AffineMap::identity(2).unwrap());
        atlas.insert(1, 2, AffineMap::identity(2).unwrap());
        assert!(matches!(
            cocycle_defect(&atlas, &[vec![0.0, 0.0]]),
            Err(MaiError::Config(_))
        ));
    }
}
