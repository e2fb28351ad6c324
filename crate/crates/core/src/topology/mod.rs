//! Persistent homology over trajectory point clouds.

pub mod bottleneck;
pub mod cloud;
pub mod complex;
pub mod cycle;
pub mod persistence;

pub use bottleneck::{bottleneck_distance, bottleneck_intervals};
pub use cloud::PointCloud;
pub use complex::{build_rips, FilteredComplex, Simplex};
pub use cycle::{CycleProjection, CycleRepresentative};
pub use persistence::{persistence_pairing, persistence_z2, Barcode, Interval, Pairing};

use crate::error::{MaiError, Result};
use crate::point::LatentPoint;
use crate::trajectory::Trajectory;

/// Representative loop of the `rank`-th most persistent H₁ interval, with
/// vertex indices resolved against `cloud`.
pub fn extract_cycle(barcode: &Barcode, cloud: &PointCloud, rank: usize) -> Result<CycleRepresentative> {
    let order = barcode.h1_by_persistence();
    let &idx = order.get(rank).ok_or_else(|| {
        MaiError::input(format!(
            "rank {rank} out of range: barcode has {} H1 intervals",
            order.len()
        ))
    })?;
    let interval = barcode.h1[idx];
    let vertices = barcode.h1_representatives[idx]
        .iter()
        .map(|&v| {
            if v >= cloud.len() {
                return Err(MaiError::input(format!(
                    "vertex {v} not in a cloud of {} points",
                    cloud.len()
                )));
            }
            LatentPoint::from_slice(cloud.point(v))
        })
        .collect::<Result<Vec<_>>>()?;
    CycleRepresentative::new(vertices, interval.birth, interval.persistence())
}

/// Outcome of a nontriviality test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopTest {
    pub nontrivial: bool,
    /// Largest H₁ persistence found (0 when there is none).
    pub persistence: f64,
    pub noise_floor: f64,
}

/// Barcode of the trajectory's content coordinates, filtered up to the cloud diameter.
pub fn trajectory_barcode(trajectory: &Trajectory) -> Result<(PointCloud, Option<Barcode>)> {
    let cloud = PointCloud::from_trajectory(trajectory)?;
    let diameter = cloud.diameter();
    if diameter <= 0.0 {
        return Ok((cloud, None));
    }
    let complex = build_rips(&cloud, diameter)?;
    let barcode = persistence_z2(&complex)?;
    Ok((cloud, Some(barcode)))
}

/// Whether the trajectory traces a loop that persists above `noise_floor`.
///
/// Without an explicit floor, uses three times the median nearest-neighbour
/// distance of the cloud.
pub fn is_nontrivial(trajectory: &Trajectory, noise_floor: Option<f64>) -> Result<LoopTest> {
    if trajectory.len() < 4 {
        return Err(MaiError::input(format!(
            "loop test needs at least 4 trajectory points, got {}",
            trajectory.len()
        )));
    }
    if let Some(f) = noise_floor {
        if !(f >= 0.0) || !f.is_finite() {
            return Err(MaiError::input(format!("noise floor must be finite and >= 0, got {f}")));
        }
    }
    let (cloud, barcode) = trajectory_barcode(trajectory)?;
    let floor = noise_floor.unwrap_or_else(|| cloud.default_noise_floor());
    let persistence = barcode.map_or(0.0, |b| b.max_h1_persistence());
    Ok(LoopTest {
        nontrivial: persistence > floor,
        persistence,
        noise_floor: floor,
    })
}
