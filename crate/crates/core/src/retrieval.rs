//! Kernel retrieval over a transition memory and retraction onto cycles.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MaiError, Result};
use crate::kernel::{pair_distance, Kernel, KernelKind};
use crate::memory::TransitionMemory;
use crate::point::{check_dim, euclidean, ContextPoint, LatentPoint};
use crate::topology::CycleRepresentative;

/// Raw weights below this everywhere trigger the hard-nearest fallback.
pub const UNDERFLOW_THRESHOLD: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub estimate: LatentPoint,
    /// Normalized weights, aligned with `matched_indices`.
    pub weights: Vec<f64>,
    pub matched_indices: Vec<usize>,
    /// Inverse participation ratio 1 / Σ w².
    pub effective_support: f64,
}

/// Normalized weights from a batch of match distances.
fn weights_from_distances(kernel: &Kernel, distances: &[f64]) -> Result<(Vec<usize>, Vec<f64>)> {
    let nearest = || {
        let mut best = 0;
        for (i, &d) in distances.iter().enumerate() {
            if d < distances[best] {
                best = i;
            }
        }
        (vec![best], vec![1.0])
    };
    if kernel.kind() == KernelKind::HardNearest {
        for &d in distances {
            kernel.weight(d)?;
        }
        return Ok(nearest());
    }
    let raw = distances
        .iter()
        .map(|&d| kernel.weight(d))
        .collect::<Result<Vec<_>>>()?;
    if raw.iter().all(|&w| w < UNDERFLOW_THRESHOLD) {
        return Ok(nearest());
    }
    let total: f64 = raw.iter().sum();
    let mut indices = Vec::new();
    let mut weights = Vec::new();
    for (i, w) in raw.into_iter().enumerate() {
        if w > 0.0 {
            indices.push(i);
            weights.push(w / total);
        }
    }
    Ok((indices, weights))
}

fn blend(store: &TransitionMemory, indices: Vec<usize>, weights: Vec<f64>) -> Result<RetrievalResult> {
    let mut estimate = vec![0.0; store.latent_dim()];
    for (&i, &w) in indices.iter().zip(&weights) {
        for (e, c) in estimate.iter_mut().zip(store.entries()[i].content.coords()) {
            *e += w * c;
        }
    }
    let effective_support = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    Ok(RetrievalResult {
        estimate: LatentPoint::new(estimate)?,
        weights,
        matched_indices: indices,
        effective_support,
    })
}

/// Stateless retrieval Φ̂ = Σ wᵢ Φᵢ with weights from context distance alone.
pub fn soft_retrieve(store: &TransitionMemory, query: &ContextPoint, kernel: &Kernel) -> Result<RetrievalResult> {
    store.require_non_empty()?;
    check_dim("query context", store.context_dim(), query.dim())?;
    let distances: Vec<f64> = store
        .entries()
        .iter()
        .map(|e| euclidean(e.context.coords(), query.coords()))
        .collect();
    let (indices, weights) = weights_from_distances(kernel, &distances)?;
    blend(store, indices, weights)
}

/// Backward retrieval R(Φ_{t+1}, Ψ_t): reconstructs the predecessor content
/// of transitions matching both the context and the given successor.
pub fn retrieve_adapt(
    store: &TransitionMemory,
    successor: &LatentPoint,
    context: &ContextPoint,
    kernel: &Kernel,
) -> Result<RetrievalResult> {
    store.require_non_empty()?;
    check_dim("query context", store.context_dim(), context.dim())?;
    check_dim("query successor", store.latent_dim(), successor.dim())?;
    let beta = kernel.successor_weight();
    let distances = store
        .entries()
        .iter()
        .map(|e| pair_distance((context, successor), (&e.context, &e.successor), beta))
        .collect::<Result<Vec<_>>>()?;
    let (indices, weights) = weights_from_distances(kernel, &distances)?;
    blend(store, indices, weights)
}

/// Closest point on the polygonal cycle; ties go to the lowest edge index.
pub fn retract_to_cycle(point: &LatentPoint, cycle: &CycleRepresentative) -> Result<LatentPoint> {
    Ok(cycle.project(point)?.point)
}

/// The retrieval half of the composite map, abstracted so that analytic
/// retrievals can stand in for a memory.
pub trait Retriever {
    fn retrieve(&self, successor: &LatentPoint, context: &ContextPoint) -> Result<LatentPoint>;
}

/// `retrieve_adapt` over a store, optionally retracted onto a cycle.
#[derive(Debug, Clone, Copy)]
pub struct MemoryRetriever<'a> {
    pub store: &'a TransitionMemory,
    pub kernel: &'a Kernel,
    pub cycle: Option<&'a CycleRepresentative>,
}

impl<'a> MemoryRetriever<'a> {
    pub fn new(store: &'a TransitionMemory, kernel: &'a Kernel) -> Self {
        Self {
            store,
            kernel,
            cycle: None,
        }
    }

    pub fn on_cycle(mut self, cycle: &'a CycleRepresentative) -> Self {
        self.cycle = Some(cycle);
        self
    }
}

impl Retriever for MemoryRetriever<'_> {
    fn retrieve(&self, successor: &LatentPoint, context: &ContextPoint) -> Result<LatentPoint> {
        let estimate = retrieve_adapt(self.store, successor, context, self.kernel)?.estimate;
        match self.cycle {
            Some(cycle) => retract_to_cycle(&estimate, cycle),
            None => Ok(estimate),
        }
    }
}

/// Returns the query successor unchanged (Lipschitz constant exactly 1).
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactRetriever;

impl Retriever for ExactRetriever {
    fn retrieve(&self, successor: &LatentPoint, _context: &ContextPoint) -> Result<LatentPoint> {
        Ok(successor.clone())
    }
}

/// x ↦ anchor + gain·(x − anchor). A gain above 1 extrapolates away from the
/// anchor, which models an expansive retrieval.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineRetriever {
    pub anchor: LatentPoint,
    pub gain: f64,
}

impl Retriever for AffineRetriever {
    fn retrieve(&self, successor: &LatentPoint, _context: &ContextPoint) -> Result<LatentPoint> {
        check_dim("successor", self.anchor.dim(), successor.dim())?;
        LatentPoint::new(
            self.anchor
                .coords()
                .iter()
                .zip(successor.coords())
                .map(|(a, x)| a + self.gain * (x - a))
                .collect(),
        )
    }
}

/// Largest observed ‖R(x₁) − R(x₂)‖ / ‖x₁ − x₂‖ over `pairs` random pairs
/// drawn uniformly from the box `center ± radius`.
pub fn empirical_lipschitz<R: Rng + ?Sized>(
    retriever: &dyn Retriever,
    context: &ContextPoint,
    center: &LatentPoint,
    radius: f64,
    pairs: usize,
    rng: &mut R,
) -> Result<f64> {
    if !(radius > 0.0) || pairs == 0 {
        return Err(MaiError::input(
            "lipschitz sampling needs radius > 0 and at least one pair",
        ));
    }
    let sample = |rng: &mut R| {
        LatentPoint::new(
            center
                .coords()
                .iter()
                .map(|c| c + rng.random_range(-radius..radius))
                .collect(),
        )
    };
    let mut best: f64 = 0.0;
    for _ in 0..pairs {
        let a = sample(rng)?;
        let b = sample(rng)?;
        let dx = a.distance(&b);
        if dx == 0.0 {
            continue;
        }
        let dy = retriever
            .retrieve(&a, context)?
            .distance(&retriever.retrieve(&b, context)?);
        best = best.max(dy / dx);
    }
    Ok(best)
}
