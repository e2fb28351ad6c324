use std::collections::HashMap;
use std::f64::consts::TAU;

use mai_core::topology::{
    bottleneck_intervals, build_rips, extract_cycle, is_nontrivial, persistence_pairing, persistence_z2, Barcode,
    FilteredComplex, Interval, PointCloud,
};
use mai_core::{ContextPoint, LatentPoint, RngState, Trajectory};
use proptest::prelude::*;
use rand::Rng;

/// Textbook reduction on a dense Z₂ matrix, with faces looked up by vertex set.
fn dense_pairs(complex: &FilteredComplex) -> (Vec<(usize, usize)>, Vec<usize>) {
    let simplices = complex.simplices();
    let m = simplices.len();
    let index: HashMap<Vec<usize>, usize> = simplices
        .iter()
        .enumerate()
        .map(|(i, s)| (s.vertices().to_vec(), i))
        .collect();
    let mut matrix = vec![vec![false; m]; m];
    for (j, s) in simplices.iter().enumerate() {
        let v = s.vertices();
        if v.len() < 2 {
            continue;
        }
        for skip in 0..v.len() {
            let face: Vec<usize> = v
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != skip)
                .map(|(_, &x)| x)
                .collect();
            matrix[index[&face]][j] = true;
        }
    }
    let low = |matrix: &Vec<Vec<bool>>, j: usize| (0..m).rev().find(|&i| matrix[i][j]);
    for j in 0..m {
        while let Some(l) = low(&matrix, j) {
            let Some(k) = (0..j).find(|&k| low(&matrix, k) == Some(l)) else {
                break;
            };
            for row in matrix.iter_mut() {
                row[j] ^= row[k];
            }
        }
    }
    let mut pairs = Vec::new();
    let mut paired = vec![false; m];
    for j in 0..m {
        if let Some(l) = low(&matrix, j) {
            pairs.push((l, j));
            paired[l] = true;
            paired[j] = true;
        }
    }
    pairs.sort_unstable();
    let essential = (0..m).filter(|&j| !paired[j]).collect();
    (pairs, essential)
}

fn random_cloud(rng: &mut impl Rng, n: usize, lattice: bool) -> Vec<Vec<f64>> {
    let dim = rng.random_range(1..=3);
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    if lattice {
                        rng.random_range(0..4) as f64
                    } else {
                        rng.random_range(-1.0..1.0)
                    }
                })
                .collect()
        })
        .collect()
}

fn barcode_of(points: Vec<Vec<f64>>, max_f: f64) -> (PointCloud, FilteredComplex, Barcode) {
    let cloud = PointCloud::new(points).unwrap();
    let complex = build_rips(&cloud, max_f).unwrap();
    let barcode = persistence_z2(&complex).unwrap();
    (cloud, complex, barcode)
}

fn circle(n: usize, radius: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let a = TAU * i as f64 / n as f64;
            vec![radius * a.cos(), radius * a.sin()]
        })
        .collect()
}

#[test]
fn reduction_matches_dense_oracle_on_random_clouds() {
    let mut rng = RngState::new(2024).rng();
    for trial in 0..200 {
        let n = rng.random_range(1..=12);
        let points = random_cloud(&mut rng, n, trial % 4 == 0);
        let max_f = rng.random_range(0.3..3.5);
        let cloud = PointCloud::new(points).unwrap();
        let complex = build_rips(&cloud, max_f).unwrap();
        let fast = persistence_pairing(&complex);
        let (pairs, essential) = dense_pairs(&complex);
        assert_eq!(fast.pairs, pairs, "trial {trial}");
        assert_eq!(fast.essential, essential, "trial {trial}");
    }
}

#[test]
fn square_golden_case() {
    let (_, _, bc) = barcode_of(
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]],
        2.0,
    );
    assert_eq!(bc.h1.len(), 1);
    assert!((bc.h1[0].birth - 1.0).abs() < 1e-12);
    assert!((bc.h1[0].death - 2f64.sqrt()).abs() < 1e-12);
    let deaths: Vec<f64> = bc.h0.iter().map(|i| i.death).collect();
    assert_eq!(deaths.iter().filter(|&&d| d == 1.0).count(), 3);
    assert_eq!(deaths.iter().filter(|d| d.is_infinite()).count(), 1);
}

#[test]
fn square_cycle_extraction() {
    let (cloud, _, bc) = barcode_of(
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]],
        2.0,
    );
    let cycle = extract_cycle(&bc, &cloud, 0).unwrap();
    assert_eq!(cycle.len(), 4);
    assert!((cycle.perimeter() - 4.0).abs() < 1e-12);
    assert!(extract_cycle(&bc, &cloud, 1).is_err());
}

#[test]
fn empty_h1_has_no_cycle() {
    let (cloud, _, bc) = barcode_of(vec![vec![0.0], vec![1.0], vec![2.0]], 5.0);
    assert!(bc.h1.is_empty());
    assert!(extract_cycle(&bc, &cloud, 0).is_err());
}

#[test]
fn circle_has_one_long_bar_and_an_ordered_loop() {
    let (cloud, _, bc) = barcode_of(circle(64, 1.0), 2.5);
    let long: Vec<&Interval> = bc.h1.iter().filter(|i| i.persistence() > 0.1).collect();
    assert_eq!(bc.h1.len(), 1);
    assert!(long[0].persistence() >= 1.5);
    // regular n-gon: born at the side length, filled once chords spanning a third of the polygon appear
    let side = 2.0 * (std::f64::consts::PI / 64.0).sin();
    let fill = 2.0 * (std::f64::consts::PI * 22.0 / 64.0).sin();
    assert!((long[0].birth - side).abs() < 1e-12);
    assert!((long[0].death - fill).abs() < 1e-12);

    let rep = &bc.h1_representatives[0];
    assert_eq!(rep.len(), 64);
    let step = (rep[1] + 64 - rep[0]) % 64;
    assert!(step == 1 || step == 63);
    for k in 0..64 {
        assert_eq!((rep[(k + 1) % 64] + 64 - rep[k]) % 64, step);
    }
    let cycle = extract_cycle(&bc, &cloud, 0).unwrap();
    for k in 0..64 {
        let d = cycle.vertices()[k].distance(&cycle.vertices()[(k + 1) % 64]);
        assert!(d <= cycle.birth() + 1e-12);
    }
}

#[test]
fn h0_counts_points_and_components() {
    let points = vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![5.0, 0.0], vec![5.0, 0.1]];
    let (_, _, bc) = barcode_of(points, 1.0);
    assert_eq!(bc.h0.len(), 4);
    assert_eq!(bc.h0.iter().filter(|i| i.death.is_infinite()).count(), 2);
}

fn loop_trajectory(points: &[Vec<f64>]) -> Trajectory {
    Trajectory::from_pairs(points.iter().map(|p| {
        (
            ContextPoint::new(vec![0.0]).unwrap(),
            LatentPoint::new(p.clone()).unwrap(),
        )
    }))
    .unwrap()
}

#[test]
fn loop_tests() {
    let full = is_nontrivial(&loop_trajectory(&circle(32, 2.0)), None).unwrap();
    assert!(full.nontrivial);
    let quarter: Vec<Vec<f64>> = circle(128, 2.0).into_iter().take(32).collect();
    assert!(!is_nontrivial(&loop_trajectory(&quarter), None).unwrap().nontrivial);
    let still = vec![vec![1.0, 1.0]; 10];
    let t = is_nontrivial(&loop_trajectory(&still), None).unwrap();
    assert!(!t.nontrivial);
    assert_eq!(t.persistence, 0.0);
    let line: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.3, 0.0]).collect();
    assert!(!is_nontrivial(&loop_trajectory(&line), None).unwrap().nontrivial);
    assert!(is_nontrivial(&loop_trajectory(&line[..3]), None).is_err());
}

#[test]
fn heavy_noise_hides_the_loop() {
    // sweep noise upwards; the loop must be lost well before the noise dwarfs the radius
    let mut rng = RngState::new(5).rng();
    let mut flipped_at = None;
    for (k, amp) in [0.0, 0.1, 0.3, 0.6, 1.0, 2.0, 4.0].into_iter().enumerate() {
        let pts: Vec<Vec<f64>> = circle(32, 1.0)
            .into_iter()
            .map(|p| p.iter().map(|c| c + amp * rng.random_range(-1.0..1.0)).collect())
            .collect();
        let test = is_nontrivial(&loop_trajectory(&pts), None).unwrap();
        if k == 0 {
            assert!(test.nontrivial);
        }
        if !test.nontrivial && flipped_at.is_none() {
            flipped_at = Some(amp);
        }
    }
    assert!(flipped_at.is_some());
}

#[test]
fn bottleneck_examples() {
    let iv = |b, d| Interval { birth: b, death: d };
    assert_eq!(bottleneck_intervals(&[iv(0.0, 1.0)], &[iv(0.0, 1.0)]), 0.0);
    assert!((bottleneck_intervals(&[iv(0.0, 1.0)], &[iv(0.0, 1.2)]) - 0.2).abs() < 1e-15);
}

#[test]
fn circle_perturbation_stays_within_stability_bound() {
    let (_, _, base) = barcode_of(circle(64, 1.0), 2.5);
    let delta = 0.05;
    let mut rng = RngState::new(77).rng();
    for _ in 0..20 {
        let pts: Vec<Vec<f64>> = circle(64, 1.0)
            .into_iter()
            .map(|p| p.iter().map(|c| c + rng.random_range(-delta..=delta)).collect())
            .collect();
        let (_, _, moved) = barcode_of(pts, 2.5);
        let d = bottleneck_intervals(&base.h1, &moved.h1);
        assert!(d <= 2.0 * delta * 2f64.sqrt(), "{d}");
    }
}

fn max_distance_change(a: &PointCloud, b: &PointCloud) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            worst = worst.max((a.distance(i, j) - b.distance(i, j)).abs());
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn euler_characteristic_matches_betti_numbers(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = RngState::new(seed).rng();
        let (_, complex, bc) = barcode_of(random_cloud(&mut rng, n, seed % 3 == 0), 3.0);
        let mut values: Vec<f64> = complex.simplices().iter().map(|s| s.filtration).collect();
        values.dedup();
        for f in values {
            let count = |d| complex.simplices().iter().filter(|s| s.dim() == d && s.filtration <= f).count() as i64;
            let euler = count(0) - count(1) + count(2);
            let [b0, b1, b2] = bc.betti_at(f);
            prop_assert_eq!(euler, b0 as i64 - b1 as i64 + b2 as i64);
        }
        prop_assert_eq!(bc.h0.len(), n);
    }

    #[test]
    fn representatives_are_closed_loops_below_birth(seed in any::<u64>(), n in 4usize..12) {
        let mut rng = RngState::new(seed).rng();
        let (cloud, _, bc) = barcode_of(random_cloud(&mut rng, n, false), 3.0);
        for (iv, rep) in bc.h1.iter().zip(&bc.h1_representatives) {
            prop_assert!(iv.birth <= iv.death);
            prop_assert!(rep.len() >= 3);
            let mut degree = vec![0usize; n];
            for k in 0..rep.len() {
                let (a, b) = (rep[k], rep[(k + 1) % rep.len()]);
                prop_assert!(cloud.distance(a, b) <= iv.birth + 1e-12);
                degree[a] += 1;
                degree[b] += 1;
            }
            // every vertex meets an even number of loop edges: the Z₂ boundary vanishes
            prop_assert!(degree.iter().all(|d| d % 2 == 0));
        }
    }

    #[test]
    fn bottleneck_is_bounded_by_distance_distortion(seed in any::<u64>(), n in 3usize..10) {
        let mut rng = RngState::new(seed).rng();
        let points = random_cloud(&mut rng, n, false);
        let moved: Vec<Vec<f64>> =
            points.iter().map(|p| p.iter().map(|c| c + rng.random_range(-0.05..0.05)).collect()).collect();
        let (ca, _, a) = barcode_of(points, 10.0);
        let (cb, _, b) = barcode_of(moved, 10.0);
        let bound = max_distance_change(&ca, &cb);
        for dim in 0..2 {
            let d = bottleneck_intervals(a.intervals(dim).unwrap(), b.intervals(dim).unwrap());
            prop_assert!(d <= bound + 1e-12, "dim {} d {} bound {}", dim, d, bound);
        }
    }

    #[test]
    fn bottleneck_is_symmetric(seed in any::<u64>()) {
        let mut rng = RngState::new(seed).rng();
        let a: Vec<Interval> = (0..rng.random_range(0..6)).map(|_| {
            let b: f64 = rng.random_range(0.0..1.0);
            Interval { birth: b, death: b + rng.random_range(0.0..1.0) }
        }).collect();
        let b: Vec<Interval> = (0..rng.random_range(0..6)).map(|_| {
            let x: f64 = rng.random_range(0.0..1.0);
            Interval { birth: x, death: x + rng.random_range(0.0..1.0) }
        }).collect();
        prop_assert_eq!(bottleneck_intervals(&a, &b), bottleneck_intervals(&b, &a));
        prop_assert_eq!(bottleneck_intervals(&a, &a), 0.0);
    }
}
