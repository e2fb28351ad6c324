//! Vietoris–Rips filtration truncated at dimension 2.

use std::cmp::Ordering;

use crate::error::{MaiError, Result};
use crate::topology::cloud::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simplex {
    verts: [usize; 3],
    dim: usize,
    pub filtration: f64,
}

impl Simplex {
    pub fn vertices(&self) -> &[usize] {
        &self.verts[..=self.dim]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Simplices of dimension ≤ 2 with diameter filtration values, sorted by
/// (filtration, dimension, lexicographic vertex order).
#[derive(Debug, Clone)]
pub struct FilteredComplex {
    simplices: Vec<Simplex>,
    n_vertices: usize,
    max_filtration: f64,
    // position of edge (i, j), i < j, in `simplices`
    edge_index: Vec<u32>,
}

const NO_EDGE: u32 = u32::MAX;

fn simplex_order(a: &Simplex, b: &Simplex) -> Ordering {
    a.filtration
        .total_cmp(&b.filtration)
        .then(a.dim.cmp(&b.dim))
        .then_with(|| a.vertices().cmp(b.vertices()))
}

pub fn build_rips(cloud: &PointCloud, max_filtration: f64) -> Result<FilteredComplex> {
    if cloud.is_empty() {
        return Err(MaiError::input("cannot build a complex on an empty cloud"));
    }
    if !(max_filtration > 0.0) || max_filtration.is_nan() {
        return Err(MaiError::input(format!(
            "max_filtration must be > 0, got {max_filtration}"
        )));
    }
    let n = cloud.len();
    if n * (n - 1) / 2 >= NO_EDGE as usize {
        return Err(MaiError::input(format!("cloud of {n} points is too large")));
    }
    let mut simplices: Vec<Simplex> = (0..n)
        .map(|v| Simplex {
            verts: [v, 0, 0],
            dim: 0,
            filtration: 0.0,
        })
        .collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = cloud.distance(i, j);
            if d <= max_filtration {
                simplices.push(Simplex {
                    verts: [i, j, 0],
                    dim: 1,
                    filtration: d,
                });
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let dij = cloud.distance(i, j);
            if dij > max_filtration {
                continue;
            }
            for k in (j + 1)..n {
                let diam = dij.max(cloud.distance(i, k)).max(cloud.distance(j, k));
                if diam <= max_filtration {
                    simplices.push(Simplex {
                        verts: [i, j, k],
                        dim: 2,
                        filtration: diam,
                    });
                }
            }
        }
    }
    simplices.sort_by(simplex_order);
    let mut edge_index = vec![NO_EDGE; n * n];
    for (pos, s) in simplices.iter().enumerate() {
        if s.dim == 1 {
            edge_index[s.verts[0] * n + s.verts[1]] = pos as u32;
        }
    }
    Ok(FilteredComplex {
        simplices,
        n_vertices: n,
        max_filtration,
        edge_index,
    })
}

impl FilteredComplex {
    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn max_filtration(&self) -> f64 {
        self.max_filtration
    }

    pub fn count_dim(&self, dim: usize) -> usize {
        self.simplices.iter().filter(|s| s.dim == dim).count()
    }

    /// Position of vertex `v` in the filtration order.
    pub fn vertex_position(&self, v: usize) -> usize {
        // vertices all sit at filtration 0 with dimension 0, sorted by index,
        // and precede every edge
        v
    }

    /// Position of the edge {a, b}, if it is in the complex.
    pub fn edge_position(&self, a: usize, b: usize) -> Option<usize> {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        match self.edge_index[i * self.n_vertices + j] {
            NO_EDGE => None,
            pos => Some(pos as usize),
        }
    }

    /// Boundary of the simplex at `pos` as ascending filtration positions.
    pub fn boundary(&self, pos: usize) -> Vec<usize> {
        let s = &self.simplices[pos];
        let mut faces = match s.dim {
            0 => Vec::new(),
            1 => vec![self.vertex_position(s.verts[0]), self.vertex_position(s.verts[1])],
            _ => {
                let [a, b, c] = s.verts;
                [(a, b), (a, c), (b, c)]
                    .iter()
                    .map(|&(x, y)| self.edge_position(x, y).expect("faces of a triangle are present"))
                    .collect()
            }
        };
        faces.sort_unstable();
        faces
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> PointCloud {
        PointCloud::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn single_point() {
        let k = build_rips(&PointCloud::new(vec![vec![0.5, 0.5]]).unwrap(), 1.0).unwrap();
        assert_eq!(k.len(), 1);
        assert_eq!(k.count_dim(1), 0);
    }

    #[test]
    fn unit_square_counts() {
        let k = build_rips(&unit_square(), 2.0).unwrap();
        assert_eq!(k.count_dim(0), 4);
        assert_eq!(k.count_dim(1), 6);
        assert_eq!(k.count_dim(2), 4);
        let edges: Vec<f64> = k
            .simplices()
            .iter()
            .filter(|s| s.dim() == 1)
            .map(|s| s.filtration)
            .collect();
        assert_eq!(edges.iter().filter(|&&f| f == 1.0).count(), 4);
        assert_eq!(edges.iter().filter(|&&f| (f - 2f64.sqrt()).abs() < 1e-15).count(), 2);
        for t in k.simplices().iter().filter(|s| s.dim() == 2) {
            assert!((t.filtration - 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn below_min_distance_gives_vertices_only() {
        let k = build_rips(&unit_square(), 0.5).unwrap();
        assert_eq!(k.len(), 4);
    }

    #[test]
    fn faces_precede_cofaces() {
        let k = build_rips(&unit_square(), 2.0).unwrap();
        for (pos, s) in k.simplices().iter().enumerate() {
            for f in k.boundary(pos) {
                assert!(f < pos);
                assert!(k.simplices()[f].filtration <= s.filtration);
            }
        }
    }

    #[test]
    fn rejects_empty_and_bad_filtration() {
        assert!(build_rips(&PointCloud::new(vec![]).unwrap(), 1.0).is_err());
        assert!(build_rips(&unit_square(), 0.0).is_err());
    }
}
