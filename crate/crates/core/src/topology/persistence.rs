//! Z₂ persistent homology by standard boundary-matrix column reduction.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{MaiError, Result};
use crate::topology::complex::FilteredComplex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub birth: f64,
    /// `f64::INFINITY` for classes that survive to the end of the filtration.
    pub death: f64,
}

impl Interval {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    pub fn is_finite(&self) -> bool {
        self.death.is_finite()
    }

    pub fn is_alive_at(&self, value: f64) -> bool {
        self.birth <= value && value < self.death
    }
}

/// Raw persistence pairing in filtration positions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Pairing {
    /// (birth simplex, death simplex)
    pub pairs: Vec<(usize, usize)>,
    /// Positive simplices never killed.
    pub essential: Vec<usize>,
}

/// Persistence intervals in dimensions 0 and 1.
///
/// Every H₁ interval carries a closed edge loop (vertex indices into the
/// cloud) whose edges all enter the filtration no later than its birth.
/// H₁ pairs with zero persistence are not reported.
#[derive(Debug, Clone)]
pub struct Barcode {
    pub h0: Vec<Interval>,
    pub h1: Vec<Interval>,
    pub h1_representatives: Vec<Vec<usize>>,
    /// Birth values of 2-cycles; the complex has no tetrahedra, so these never die.
    pub h2_births: Vec<f64>,
    pub pairing: Pairing,
    pub max_filtration: f64,
}

impl Barcode {
    pub fn intervals(&self, dim: usize) -> Result<&[Interval]> {
        match dim {
            0 => Ok(&self.h0),
            1 => Ok(&self.h1),
            _ => Err(MaiError::input(format!(
                "barcodes are computed in dimensions 0 and 1, not {dim}"
            ))),
        }
    }

    /// Betti numbers (β₀, β₁, β₂) of the complex at filtration value `value`.
    pub fn betti_at(&self, value: f64) -> [usize; 3] {
        [
            self.h0.iter().filter(|i| i.is_alive_at(value)).count(),
            self.h1.iter().filter(|i| i.is_alive_at(value)).count(),
            self.h2_births.iter().filter(|&&b| b <= value).count(),
        ]
    }

    /// Largest H₁ persistence, or 0 when H₁ is empty.
    pub fn max_h1_persistence(&self) -> f64 {
        self.h1.iter().map(Interval::persistence).fold(0.0, f64::max)
    }

    /// Indices into `h1` ordered by persistence, most persistent first.
    /// Ties keep birth order.
    pub fn h1_by_persistence(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.h1.len()).collect();
        order.sort_by(|&a, &b| self.h1[b].persistence().total_cmp(&self.h1[a].persistence()));
        order
    }
}

const UNPAIRED: usize = usize::MAX;

/// Symmetric difference of two ascending index lists.
fn add_columns(target: &mut Vec<usize>, other: &[usize], scratch: &mut Vec<usize>) {
    scratch.clear();
    let (mut i, mut j) = (0, 0);
    while i < target.len() && j < other.len() {
        match target[i].cmp(&other[j]) {
            std::cmp::Ordering::Less => {
                scratch.push(target[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                scratch.push(other[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    scratch.extend_from_slice(&target[i..]);
    scratch.extend_from_slice(&other[j..]);
    std::mem::swap(target, scratch);
}

struct Reduction {
    columns: Vec<Vec<usize>>,
    owner: Vec<usize>,
    // V columns, kept for edges only
    edge_cycles: Vec<Vec<usize>>,
}

fn reduce(complex: &FilteredComplex) -> Reduction {
    let m = complex.len();
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(m);
    let mut owner = vec![UNPAIRED; m];
    let mut edge_cycles: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut scratch = Vec::new();
    let mut v_scratch = Vec::new();
    for j in 0..m {
        let is_edge = complex.simplices()[j].dim() == 1;
        let mut col = complex.boundary(j);
        let mut v = if is_edge { vec![j] } else { Vec::new() };
        while let Some(&low) = col.last() {
            let k = owner[low];
            if k == UNPAIRED {
                break;
            }
            add_columns(&mut col, &columns[k], &mut scratch);
            if is_edge {
                add_columns(&mut v, &edge_cycles[k], &mut v_scratch);
            }
        }
        if let Some(&low) = col.last() {
            owner[low] = j;
        }
        if is_edge {
            edge_cycles[j] = v;
        }
        columns.push(col);
    }
    Reduction {
        columns,
        owner,
        edge_cycles,
    }
}

/// Raw pairing only; exposed for cross-checking against other reductions.
pub fn persistence_pairing(complex: &FilteredComplex) -> Pairing {
    pairing_of(&reduce(complex))
}

fn pairing_of(red: &Reduction) -> Pairing {
    let mut pairing = Pairing::default();
    for (j, col) in red.columns.iter().enumerate() {
        if let Some(&low) = col.last() {
            pairing.pairs.push((low, j));
        } else if red.owner[j] == UNPAIRED {
            pairing.essential.push(j);
        }
    }
    pairing.pairs.sort_unstable();
    pairing
}

pub fn persistence_z2(complex: &FilteredComplex) -> Result<Barcode> {
    let red = reduce(complex);
    let simplices = complex.simplices();
    let mut h0 = Vec::new();
    let mut h1 = Vec::new();
    let mut reps = Vec::new();
    let mut h2_births = Vec::new();
    for (pos, s) in simplices.iter().enumerate() {
        if !red.columns[pos].is_empty() {
            continue;
        }
        let birth = s.filtration;
        let killer = red.owner[pos];
        let death = if killer == UNPAIRED {
            f64::INFINITY
        } else {
            simplices[killer].filtration
        };
        match s.dim() {
            0 => h0.push(Interval { birth, death }),
            1 => {
                if death <= birth {
                    continue;
                }
                let chain = if killer == UNPAIRED {
                    &red.edge_cycles[pos]
                } else {
                    &red.columns[killer]
                };
                reps.push(loop_from_chain(complex, chain, pos, birth)?);
                h1.push(Interval { birth, death });
            }
            _ => h2_births.push(birth),
        }
    }
    for iv in h0.iter().chain(h1.iter()) {
        if !(iv.birth <= iv.death) {
            return Err(MaiError::invariant("birth <= death", format!("{iv:?}")));
        }
    }
    Ok(Barcode {
        h0,
        h1,
        h1_representatives: reps,
        h2_births,
        pairing: pairing_of(&red),
        max_filtration: complex.max_filtration(),
    })
}

/// Turns a Z₂ 1-cycle into a simple closed vertex loop.
///
/// Keeps the simple cycle through `pivot` (the youngest edge of the chain);
/// the remaining edges form a cycle made only of older edges. The loop is then
/// shortened by replacing a-b-c with a-c wherever edge {a, c} is already
/// present at `birth`, which adds the boundary of a triangle present at that
/// scale and leaves the homology class there unchanged.
fn loop_from_chain(complex: &FilteredComplex, chain: &[usize], pivot: usize, birth: f64) -> Result<Vec<usize>> {
    let simplices = complex.simplices();
    let mut adjacency: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &e in chain {
        if e == pivot {
            continue;
        }
        let v = simplices[e].vertices();
        adjacency.entry(v[0]).or_default().push(v[1]);
        adjacency.entry(v[1]).or_default().push(v[0]);
    }
    for nbrs in adjacency.values_mut() {
        nbrs.sort_unstable();
    }
    let pv = simplices[pivot].vertices();
    let (start, goal) = (pv[1], pv[0]);
    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
    let mut queue = VecDeque::from([start]);
    parent.insert(start, start);
    while let Some(x) = queue.pop_front() {
        if x == goal {
            break;
        }
        for &y in adjacency.get(&x).map(Vec::as_slice).unwrap_or(&[]) {
            if let std::collections::btree_map::Entry::Vacant(slot) = parent.entry(y) {
                slot.insert(x);
                queue.push_back(y);
            }
        }
    }
    if !parent.contains_key(&goal) {
        return Err(MaiError::invariant(
            "representative is a cycle",
            format!("pivot edge {pivot} does not close a loop in its chain"),
        ));
    }
    // walk goal -> start, giving the loop goal, ..., start with the pivot closing it
    let mut path = vec![goal];
    let mut x = goal;
    while x != start {
        x = parent[&x];
        path.push(x);
    }
    let mut vertices = path;
    loop {
        let n = vertices.len();
        if n <= 3 {
            break;
        }
        let shortcut = (0..n).find(|&i| {
            let a = vertices[(i + n - 1) % n];
            let c = vertices[(i + 1) % n];
            complex
                .edge_position(a, c)
                .is_some_and(|e| simplices[e].filtration <= birth)
        });
        match shortcut {
            Some(i) => {
                vertices.remove(i);
            }
            None => break,
        }
    }
    Ok(vertices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::cloud::PointCloud;
    use crate::topology::complex::build_rips;

    fn barcode(points: Vec<Vec<f64>>, max_f: f64) -> Barcode {
        persistence_z2(&build_rips(&PointCloud::new(points).unwrap(), max_f).unwrap()).unwrap()
    }

    #[test]
    fn unit_square_golden() {
        let bc = barcode(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]],
            2.0,
        );
        assert_eq!(bc.h1.len(), 1);
        assert_eq!(bc.h1[0].birth, 1.0);
        assert!((bc.h1[0].death - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(bc.h0.len(), 4);
        assert_eq!(bc.h0.iter().filter(|i| i.death == 1.0).count(), 3);
        assert_eq!(bc.h0.iter().filter(|i| i.death.is_infinite()).count(), 1);
        let mut rep = bc.h1_representatives[0].clone();
        rep.sort_unstable();
        assert_eq!(rep, vec![0, 1, 2, 3]);
    }

    #[test]
    fn collinear_points_have_no_loop() {
        let bc = barcode(vec![vec![0.0], vec![1.0], vec![2.0]], 5.0);
        assert!(bc.h1.is_empty());
        assert_eq!(bc.h0.len(), 3);
    }

    #[test]
    fn loop_survives_when_filtration_stops_early() {
        let bc = barcode(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]],
            1.2,
        );
        assert_eq!(bc.h1.len(), 1);
        assert!(bc.h1[0].death.is_infinite());
        assert_eq!(bc.h1_representatives[0].len(), 4);
    }

    #[test]
    fn column_addition_is_symmetric_difference() {
        let mut a = vec![1, 3, 5];
        let mut s = Vec::new();
        add_columns(&mut a, &[2, 3, 6], &mut s);
        assert_eq!(a, vec![1, 2, 5, 6]);
    }
}
