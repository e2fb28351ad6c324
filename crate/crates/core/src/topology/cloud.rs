use serde::{Deserialize, Serialize};

use crate::error::{MaiError, Result};
use crate::point::euclidean;
use crate::trajectory::Trajectory;

/// Finite point cloud with a cached pairwise Euclidean distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
    distances: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = points.first() {
            let dim = first.len();
            if dim == 0 {
                return Err(MaiError::input("cloud points must have dimension > 0"));
            }
            for (i, p) in points.iter().enumerate() {
                if p.len() != dim {
                    return Err(MaiError::input(format!(
                        "point {i} has dimension {}, expected {dim}",
                        p.len()
                    )));
                }
                if p.iter().any(|c| !c.is_finite()) {
                    return Err(MaiError::input(format!("point {i} has a non-finite coordinate")));
                }
            }
        }
        let n = points.len();
        let mut distances = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = euclidean(&points[i], &points[j]);
                distances[i * n + j] = d;
                distances[j * n + i] = d;
            }
        }
        Ok(Self { points, distances })
    }

    pub fn from_trajectory(trajectory: &Trajectory) -> Result<Self> {
        Self::new(trajectory.contents().map(|p| p.coords().to_vec()).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i * self.points.len() + j]
    }

    pub fn diameter(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }

    /// Median over points of the distance to the nearest other point.
    pub fn median_nearest_neighbor_distance(&self) -> f64 {
        let n = self.points.len();
        if n < 2 {
            return 0.0;
        }
        let mut nn: Vec<f64> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| self.distance(i, j))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        nn.sort_by(f64::total_cmp);
        if n % 2 == 1 {
            nn[n / 2]
        } else {
            0.5 * (nn[n / 2 - 1] + nn[n / 2])
        }
    }

    /// Default noise floor for H₁ detection: 3× the median nearest-neighbor distance.
    pub fn default_noise_floor(&self) -> f64 {
        3.0 * self.median_nearest_neighbor_distance()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_matrix_is_symmetric_with_zero_diagonal() {
        let cloud = PointCloud::new(vec![vec![0.0, 0.0], vec![3.0, 4.0], vec![1.0, 1.0]]).unwrap();
        for i in 0..3 {
            assert_eq!(cloud.distance(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(cloud.distance(i, j), cloud.distance(j, i));
            }
        }
        assert_eq!(cloud.distance(0, 1), 5.0);
        assert_eq!(cloud.diameter(), 5.0);
    }

    #[test]
    fn ragged_cloud_rejected() {
        assert!(PointCloud::new(vec![vec![0.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn median_nn() {
        let cloud = PointCloud::new(vec![vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(cloud.median_nearest_neighbor_distance(), 1.0);
        assert_eq!(cloud.default_noise_floor(), 3.0);
    }
}
