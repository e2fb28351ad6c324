//! Similarity kernels and the combined context/successor match metric.

use serde::{Deserialize, Serialize};

use crate::error::{MaiError, Result};
use crate::point::{check_dim, squared_euclidean, ContextPoint, LatentPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// exp(−d²/2σ²)
    Gaussian,
    /// 1/(d+σ)
    InverseDistance,
    /// All mass on the closest entry, lowest index on ties.
    HardNearest,
}

/// Retrieval kernel with bandwidth σ and successor weight β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    kind: KernelKind,
    bandwidth: f64,
    successor_weight: f64,
}

impl Kernel {
    pub fn new(kind: KernelKind, bandwidth: f64, successor_weight: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(MaiError::config(format!(
                "kernel bandwidth must be > 0, got {bandwidth}"
            )));
        }
        if !(successor_weight.is_finite() && successor_weight >= 0.0) {
            return Err(MaiError::config(format!(
                "successor weight must be >= 0, got {successor_weight}"
            )));
        }
        Ok(Self {
            kind,
            bandwidth,
            successor_weight,
        })
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelKind::Gaussian, bandwidth, 0.0)
    }

    pub fn hard_nearest() -> Self {
        Self {
            kind: KernelKind::HardNearest,
            bandwidth: 1.0,
            successor_weight: 0.0,
        }
    }

    pub fn with_successor_weight(self, beta: f64) -> Result<Self> {
        Self::new(self.kind, self.bandwidth, beta)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn successor_weight(&self) -> f64 {
        self.successor_weight
    }

    /// Unnormalized weight of a match at distance `dist`.
    ///
    /// The hard-nearest kernel returns 1 for every distance here; selecting the
    /// minimum of a batch happens in the retrieval layer.
    pub fn weight(&self, dist: f64) -> Result<f64> {
        if !dist.is_finite() || dist < 0.0 {
            return Err(MaiError::input(format!(
                "kernel distance must be finite and >= 0, got {dist}"
            )));
        }
        Ok(match self.kind {
            KernelKind::Gaussian => (-dist * dist / (2.0 * self.bandwidth * self.bandwidth)).exp(),
            KernelKind::InverseDistance => 1.0 / (dist + self.bandwidth),
            KernelKind::HardNearest => 1.0,
        })
    }
}

pub fn kernel_weight(kernel: &Kernel, dist: f64) -> Result<f64> {
    kernel.weight(dist)
}

/// sqrt(‖ψ_a − ψ_b‖² + β‖φ_a − φ_b‖²)
pub fn pair_distance(a: (&ContextPoint, &LatentPoint), b: (&ContextPoint, &LatentPoint), beta: f64) -> Result<f64> {
    check_dim("context", a.0.dim(), b.0.dim())?;
    check_dim("latent", a.1.dim(), b.1.dim())?;
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(MaiError::input(format!("beta must be >= 0, got {beta}")));
    }
    let ctx = squared_euclidean(a.0.coords(), b.0.coords());
    if beta == 0.0 {
        return Ok(ctx.sqrt());
    }
    Ok((ctx + beta * squared_euclidean(a.1.coords(), b.1.coords())).sqrt())
}
