//! Closed polygonal cycles in latent space and projection onto them.

use serde::{Deserialize, Serialize};

use crate::error::{MaiError, Result};
use crate::point::{check_dim, euclidean, LatentPoint};

/// A closed polygonal loop γ. The closing edge from the last vertex back to
/// the first is implied, not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CycleRecord", into = "CycleRecord")]
pub struct CycleRepresentative {
    vertices: Vec<LatentPoint>,
    birth: f64,
    persistence: f64,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CycleRecord {
    vertices: Vec<LatentPoint>,
    birth: f64,
    persistence: f64,
}

impl TryFrom<CycleRecord> for CycleRepresentative {
    type Error = MaiError;

    fn try_from(r: CycleRecord) -> Result<Self> {
        Self::new(r.vertices, r.birth, r.persistence)
    }
}

impl From<CycleRepresentative> for CycleRecord {
    fn from(c: CycleRepresentative) -> Self {
        Self {
            vertices: c.vertices,
            birth: c.birth,
            persistence: c.persistence,
        }
    }
}

/// Where a point lands when projected onto a cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleProjection {
    pub point: LatentPoint,
    /// Edge `i` runs from vertex `i` to vertex `(i + 1) % n`.
    pub edge: usize,
    /// Position along the edge in [0, 1].
    pub t: f64,
    /// Arc-length coordinate measured from vertex 0.
    pub arc_length: f64,
    pub distance: f64,
}

impl CycleRepresentative {
    pub fn new(vertices: Vec<LatentPoint>, birth: f64, persistence: f64) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(MaiError::input(format!(
                "a cycle needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let dim = vertices[0].dim();
        for v in &vertices {
            check_dim("cycle vertex", dim, v.dim())?;
        }
        let mut distinct: Vec<&[f64]> = vertices.iter().map(|v| v.coords()).collect();
        distinct.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        distinct.dedup();
        if distinct.len() < 3 {
            return Err(MaiError::input("a cycle needs at least 3 distinct vertices"));
        }
        let n = vertices.len();
        let mut cumulative = Vec::with_capacity(n + 1);
        cumulative.push(0.0);
        for i in 0..n {
            let len = vertices[i].distance(&vertices[(i + 1) % n]);
            cumulative.push(cumulative[i] + len);
        }
        Ok(Self {
            vertices,
            birth,
            persistence,
            cumulative,
        })
    }

    /// Cycle from raw coordinates, with no persistence information attached.
    pub fn from_coords(coords: Vec<Vec<f64>>) -> Result<Self> {
        let vertices = coords.into_iter().map(LatentPoint::new).collect::<Result<Vec<_>>>()?;
        Self::new(vertices, 0.0, 0.0)
    }

    pub fn vertices(&self) -> &[LatentPoint] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].dim()
    }

    pub fn birth(&self) -> f64 {
        self.birth
    }

    pub fn persistence(&self) -> f64 {
        self.persistence
    }

    pub fn perimeter(&self) -> f64 {
        self.cumulative[self.vertices.len()]
    }

    /// Arc-length coordinate of vertex `i`.
    pub fn vertex_arc_length(&self, i: usize) -> f64 {
        self.cumulative[i]
    }

    /// Geodesic distance d_γ between two arc-length coordinates.
    pub fn geodesic_distance(&self, s1: f64, s2: f64) -> f64 {
        let p = self.perimeter();
        let d = (s1 - s2).rem_euclid(p);
        d.min(p - d)
    }

    /// Point at arc-length `s` (taken modulo the perimeter).
    pub fn point_at(&self, s: f64) -> LatentPoint {
        let n = self.vertices.len();
        let s = s.rem_euclid(self.perimeter());
        let edge = match self.cumulative[1..].iter().position(|&c| s < c) {
            Some(e) => e,
            None => n - 1,
        };
        let len = self.cumulative[edge + 1] - self.cumulative[edge];
        let t = if len > 0.0 {
            ((s - self.cumulative[edge]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let a = self.vertices[edge].coords();
        let b = self.vertices[(edge + 1) % n].coords();
        let coords = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
        LatentPoint::new(coords).expect("interpolated vertex is finite")
    }

    /// Nearest point on the polygon. Ties go to the lowest edge index.
    pub fn project(&self, point: &LatentPoint) -> Result<CycleProjection> {
        check_dim("projected point", self.dim(), point.dim())?;
        let n = self.vertices.len();
        let p = point.coords();
        let mut best: Option<(usize, f64, Vec<f64>, f64)> = None;
        for i in 0..n {
            let a = self.vertices[i].coords();
            let b = self.vertices[(i + 1) % n].coords();
            let ab2: f64 = a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum();
            let t = if ab2 > 0.0 {
                let dot: f64 = p.iter().zip(a).zip(b).map(|((pi, ai), bi)| (pi - ai) * (bi - ai)).sum();
                (dot / ab2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
            let d = euclidean(p, &q);
            if best.as_ref().is_none_or(|(_, _, _, bd)| d < *bd) {
                best = Some((i, t, q, d));
            }
        }
        let (edge, t, q, distance) = best.expect("cycle has edges");
        let len = self.cumulative[edge + 1] - self.cumulative[edge];
        Ok(CycleProjection {
            point: LatentPoint::new(q)?,
            edge,
            t,
            arc_length: self.cumulative[edge] + t * len,
            distance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> CycleRepresentative {
        CycleRepresentative::from_coords(vec![vec![1.0, 1.0], vec![-1.0, 1.0], vec![-1.0, -1.0], vec![1.0, -1.0]])
            .unwrap()
    }

    #[test]
    fn needs_three_distinct_vertices() {
        assert!(CycleRepresentative::from_coords(vec![vec![0.0], vec![1.0]]).is_err());
        assert!(CycleRepresentative::from_coords(vec![vec![0.0], vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn perimeter_and_geodesics() {
        let sq = square();
        assert_eq!(sq.perimeter(), 8.0);
        assert_eq!(sq.geodesic_distance(1.0, 7.0), 2.0);
        assert_eq!(sq.geodesic_distance(0.0, 4.0), 4.0);
        assert_eq!(sq.point_at(9.0).coords(), &[0.0, 1.0]);
    }

    #[test]
    fn center_ties_break_to_lowest_edge() {
        let proj = square().project(&LatentPoint::new(vec![0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(proj.edge, 0);
        assert_eq!(proj.point.coords(), &[0.0, 1.0]);
        assert_eq!(proj.arc_length, 1.0);
    }
}
