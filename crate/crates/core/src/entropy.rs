//! Plug-in histogram entropies in bits, the path-versus-pointwise entropy
//! comparison on the ring, and the reversibility bound check.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::ring::RingEnv;
use crate::error::{MaiError, Result};
use crate::kernel::Kernel;
use crate::memory::TransitionMemory;
use crate::point::{check_dim, euclidean};
use crate::retrieval::soft_retrieve;
use crate::topology::CycleRepresentative;

/// Uniform grid over a box. Samples outside the box are clamped into the edge
/// bins and counted as overflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    lower: Vec<f64>,
    upper: Vec<f64>,
    bins_per_dim: usize,
}

impl Binning {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, bins_per_dim: usize) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(MaiError::config(
                "binning bounds must be non-empty and of equal dimension",
            ));
        }
        if bins_per_dim < 2 {
            return Err(MaiError::config(format!(
                "need at least 2 bins per dimension, got {bins_per_dim}"
            )));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite())
        {
            return Err(MaiError::config(
                "binning needs finite lower < upper in every dimension",
            ));
        }
        if (bins_per_dim as f64).powi(lower.len() as i32) > u64::MAX as f64 {
            return Err(MaiError::config("too many bins"));
        }
        Ok(Self {
            lower,
            upper,
            bins_per_dim,
        })
    }

    /// The same grid in every dimension.
    pub fn cube(dim: usize, lower: f64, upper: f64, bins_per_dim: usize) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim], bins_per_dim)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn bins_per_dim(&self) -> usize {
        self.bins_per_dim
    }

    pub fn total_bins(&self) -> f64 {
        (self.bins_per_dim as f64).powi(self.dim() as i32)
    }

    pub fn edges(&self, dim: usize) -> Vec<f64> {
        let w = (self.upper[dim] - self.lower[dim]) / self.bins_per_dim as f64;
        (0..=self.bins_per_dim)
            .map(|k| self.lower[dim] + k as f64 * w)
            .collect()
    }

    /// Flat bin index and whether the sample had to be clamped.
    pub fn bin(&self, x: &[f64]) -> Result<(u64, bool)> {
        check_dim("binned sample", self.dim(), x.len())?;
        let mut index = 0u64;
        let mut clamped = false;
        for (d, &v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(MaiError::input("binned samples must be finite"));
            }
            let w = (self.upper[d] - self.lower[d]) / self.bins_per_dim as f64;
            let raw = ((v - self.lower[d]) / w).floor();
            let k = if raw < 0.0 {
                clamped = true;
                0
            } else if raw >= self.bins_per_dim as f64 {
                // the upper edge itself belongs to the last bin
                clamped |= v > self.upper[d];
                self.bins_per_dim - 1
            } else {
                raw as usize
            };
            index = index * self.bins_per_dim as u64 + k as u64;
        }
        Ok((index, clamped))
    }

    /// Bin symbols of all samples and the overflow count.
    pub fn symbols(&self, samples: &[Vec<f64>]) -> Result<(Vec<u64>, usize)> {
        let mut out = Vec::with_capacity(samples.len());
        let mut overflow = 0;
        for s in samples {
            let (b, c) = self.bin(s)?;
            out.push(b);
            overflow += usize::from(c);
        }
        Ok((out, overflow))
    }
}

/// Plug-in entropy of a discrete sample, in bits.
pub fn symbol_entropy<T: Ord>(symbols: impl IntoIterator<Item = T>) -> f64 {
    let mut counts: BTreeMap<T, u64> = BTreeMap::new();
    let mut n = 0u64;
    for s in symbols {
        *counts.entry(s).or_default() += 1;
        n += 1;
    }
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let h = -counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>();
    h.max(0.0)
}

/// Entropy of a probability vector in bits; zero entries are skipped.
pub fn distribution_entropy(probabilities: impl IntoIterator<Item = f64>) -> f64 {
    let h = -probabilities
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>();
    h.max(0.0)
}

pub fn hist_entropy(samples: &[Vec<f64>], binning: &Binning) -> Result<f64> {
    if samples.is_empty() {
        return Err(MaiError::input("entropy needs at least one sample"));
    }
    Ok(symbol_entropy(binning.symbols(samples)?.0))
}

fn joint_symbols(x: &[Vec<f64>], y: &[Vec<f64>], bx: &Binning, by: &Binning) -> Result<(Vec<u64>, Vec<u64>)> {
    if x.len() != y.len() {
        return Err(MaiError::input(format!(
            "sample lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(MaiError::input("entropy needs at least one sample"));
    }
    Ok((bx.symbols(x)?.0, by.symbols(y)?.0))
}

/// H(X | Y) = H(X, Y) − H(Y).
pub fn conditional_entropy(x: &[Vec<f64>], y: &[Vec<f64>], bx: &Binning, by: &Binning) -> Result<f64> {
    let (sx, sy) = joint_symbols(x, y, bx, by)?;
    let joint = symbol_entropy(sx.iter().zip(&sy));
    Ok((joint - symbol_entropy(sy)).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub h_joint: f64,
    pub h_phi: f64,
    pub h_psi: f64,
    pub h_phi_given_psi: f64,
    pub mutual_info: f64,
    pub sample_count: usize,
    pub overflow: usize,
}

pub fn entropy_report(phi: &[Vec<f64>], psi: &[Vec<f64>], b_phi: &Binning, b_psi: &Binning) -> Result<EntropyReport> {
    let (sp, ss) = joint_symbols(phi, psi, b_phi, b_psi)?;
    let overflow = b_phi.symbols(phi)?.1 + b_psi.symbols(psi)?.1;
    let h_joint = symbol_entropy(sp.iter().zip(&ss));
    let h_phi = symbol_entropy(sp.iter());
    let h_psi = symbol_entropy(ss.iter());
    Ok(EntropyReport {
        h_joint,
        h_phi,
        h_psi,
        h_phi_given_psi: (h_joint - h_psi).max(0.0),
        mutual_info: h_phi + h_psi - h_joint,
        sample_count: phi.len(),
        overflow,
    })
}

/// 0.05 bits at 1000 samples, scaled as 1/√n.
pub fn estimator_tolerance(samples: usize) -> f64 {
    0.05 * (1000.0 / samples.max(1) as f64).sqrt()
}

/// Settings of the path-conditioned estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSettings {
    pub episodes: usize,
    pub horizon: usize,
    /// Width of the arc-length prior around the predicted position.
    pub arc_bandwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyComparison {
    pub h_path: f64,
    pub h_pointwise: f64,
    pub queries: usize,
}

fn posterior_entropy(weights: &[(usize, f64)], entry_bins: &[u64]) -> f64 {
    let mut mass: BTreeMap<u64, f64> = BTreeMap::new();
    for &(i, w) in weights {
        *mass.entry(entry_bins[i]).or_default() += w;
    }
    distribution_entropy(mass.into_values())
}

/// Compares the entropy of the latent posterior under stateless retrieval
/// with a retrieval that also conditions on the position along `cycle`.
///
/// Each episode starts at a random anchor with its position known and moves
/// one anchor per step, observing noisy contexts. The path estimator weights
/// each entry by its context match times a Gaussian in geodesic distance
/// between the entry's position on the cycle and the predicted position, then
/// retracts its estimate onto the cycle to update the position. Both returned
/// values average the posterior entropy over latent bins across all queries.
pub fn contextual_entropy_compare<R: Rng + ?Sized>(
    env: &RingEnv,
    store: &TransitionMemory,
    kernel: &Kernel,
    cycle: &CycleRepresentative,
    settings: &PathSettings,
    binning: &Binning,
    rng: &mut R,
) -> Result<EntropyComparison> {
    if settings.episodes == 0 || settings.horizon == 0 {
        return Err(MaiError::input("need at least one episode of at least one step"));
    }
    if !(settings.arc_bandwidth > 0.0) {
        return Err(MaiError::input("arc bandwidth must be > 0"));
    }
    let entry_bins: Vec<u64> = store
        .entries()
        .iter()
        .map(|e| binning.bin(e.content.coords()).map(|b| b.0))
        .collect::<Result<_>>()?;
    let entry_arcs: Vec<f64> = store
        .entries()
        .iter()
        .map(|e| cycle.project(&e.content).map(|p| p.arc_length))
        .collect::<Result<_>>()?;
    let advance = cycle.perimeter() / env.n_anchor as f64;
    let two_var = 2.0 * settings.arc_bandwidth * settings.arc_bandwidth;
    let (mut h_path, mut h_point) = (0.0, 0.0);
    let mut queries = 0;
    for _ in 0..settings.episodes {
        let start = rng.random_range(0..env.n_anchor);
        let mut position = cycle.project(&env.content(env.anchor_angle(start)))?.arc_length - advance;
        for t in 0..settings.horizon {
            let context = env.observe(env.anchor_angle(start + t), rng);
            let pointwise = soft_retrieve(store, &context, kernel)?;
            let pw: Vec<(usize, f64)> = pointwise
                .matched_indices
                .iter()
                .copied()
                .zip(pointwise.weights.iter().copied())
                .collect();
            h_point += posterior_entropy(&pw, &entry_bins);

            let predicted = position + advance;
            let raw: Vec<f64> = store
                .entries()
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let d = euclidean(e.context.coords(), context.coords());
                    let g = cycle.geodesic_distance(entry_arcs[i], predicted);
                    kernel.weight(d).map(|w| w * (-g * g / two_var).exp())
                })
                .collect::<Result<_>>()?;
            let total: f64 = raw.iter().sum();
            let path_weights: Vec<(usize, f64)> = if total > 0.0 && total.is_finite() {
                raw.iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(i, &w)| (i, w / total))
                    .collect()
            } else {
                pw.clone()
            };
            h_path += posterior_entropy(&path_weights, &entry_bins);
            let mut estimate = vec![0.0; store.latent_dim()];
            for &(i, w) in &path_weights {
                for (e, c) in estimate.iter_mut().zip(store.entries()[i].content.coords()) {
                    *e += w * c;
                }
            }
            position = cycle.project(&crate::point::LatentPoint::new(estimate)?)?.arc_length;
            queries += 1;
        }
    }
    Ok(EntropyComparison {
        h_path: h_path / queries as f64,
        h_pointwise: h_point / queries as f64,
        queries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReversibilityReport {
    /// H(forward states) − H(Φ)
    pub delta_h: f64,
    /// I(Φ; Ψ)
    pub amortized_info: f64,
    pub epsilon_recon: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Checks ΔH ≤ A + tolerance with ΔH = H(s_{t+1}) − H(Φ_{t−1}) and
/// A = I(Φ_{t−1}; Ψ), samples aligned by index. Forward states and Φ share
/// `latent_binning`. `residuals` are cycle-consistency residuals whose mean
/// is reported as the reconstruction error (0 when none are given).
pub fn reversibility_bound_check(
    forward: &[Vec<f64>],
    phi: &[Vec<f64>],
    psi: &[Vec<f64>],
    residuals: &[f64],
    latent_binning: &Binning,
    context_binning: &Binning,
) -> Result<ReversibilityReport> {
    if forward.len() != phi.len() {
        return Err(MaiError::input("forward states and Φ samples must be aligned"));
    }
    let report = entropy_report(phi, psi, latent_binning, context_binning)?;
    let h_forward = hist_entropy(forward, latent_binning)?;
    let delta_h = h_forward - report.h_phi;
    let tolerance = estimator_tolerance(phi.len());
    let epsilon_recon = if residuals.is_empty() {
        0.0
    } else {
        residuals.iter().sum::<f64>() / residuals.len() as f64
    };
    Ok(ReversibilityReport {
        delta_h,
        amortized_info: report.mutual_info,
        epsilon_recon,
        tolerance,
        holds: delta_h <= report.mutual_info + tolerance,
    })
}
