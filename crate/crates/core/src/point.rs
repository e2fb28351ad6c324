//! Context and latent coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{MaiError, Result};

macro_rules! real_point {
    ($(#[$doc:meta])* $name:ident, $what:literal) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
        pub struct $name(Vec<f64>);

        impl $name {
            /// Builds a point, rejecting empty or non-finite coordinates.
            pub fn new(coords: Vec<f64>) -> Result<Self> {
                if coords.is_empty() {
                    return Err(MaiError::input(concat!($what, " must have dimension > 0")));
                }
                if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
                    return Err(MaiError::input(format!(
                        concat!($what, " coordinate {} is not finite ({})"),
                        i, coords[i]
                    )));
                }
                Ok(Self(coords))
            }

            pub fn from_slice(coords: &[f64]) -> Result<Self> {
                Self::new(coords.to_vec())
            }

            pub fn zeros(dim: usize) -> Result<Self> {
                Self::new(vec![0.0; dim])
            }

            pub fn coords(&self) -> &[f64] {
                &self.0
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            /// Euclidean distance; both points must share a dimension.
            pub fn distance(&self, other: &Self) -> f64 {
                debug_assert_eq!(self.dim(), other.dim());
                euclidean(&self.0, &other.0)
            }
        }

        impl TryFrom<Vec<f64>> for $name {
            type Error = MaiError;

            fn try_from(coords: Vec<f64>) -> Result<Self> {
                Self::new(coords)
            }
        }

        impl From<$name> for Vec<f64> {
            fn from(p: $name) -> Vec<f64> {
                p.0
            }
        }

        impl AsRef<[f64]> for $name {
            fn as_ref(&self) -> &[f64] {
                &self.0
            }
        }
    };
}

real_point!(
    /// Observable context Ψ ∈ ℝᵏ.
    ContextPoint,
    "context"
);

real_point!(
    /// Latent content Φ ∈ ℝᵈ.
    LatentPoint,
    "latent"
);

pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

pub(crate) fn check_dim(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(MaiError::input(format!(
            "{what} dimension mismatch: expected {expected}, got {got}"
        )));
    }
    Ok(())
}
