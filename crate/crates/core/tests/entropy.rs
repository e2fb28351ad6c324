use std::collections::BTreeMap;

use mai_core::entropy::{
    conditional_entropy, contextual_entropy_compare, entropy_report, estimator_tolerance, hist_entropy,
    reversibility_bound_check, Binning, PathSettings,
};
use mai_core::envs::{Aliasing, RingEnv};
use mai_core::{Kernel, RngState};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// I(X;Y) = Σ p(x,y) log₂ p(x,y) / (p(x) p(y)) straight from the joint counts.
fn direct_mutual_information(x: &[Vec<f64>], y: &[Vec<f64>], bx: &Binning, by: &Binning) -> f64 {
    let n = x.len() as f64;
    let mut joint: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    let mut px: BTreeMap<u64, f64> = BTreeMap::new();
    let mut py: BTreeMap<u64, f64> = BTreeMap::new();
    for (a, b) in x.iter().zip(y) {
        let (sa, sb) = (bx.bin(a).unwrap().0, by.bin(b).unwrap().0);
        *joint.entry((sa, sb)).or_default() += 1.0 / n;
        *px.entry(sa).or_default() += 1.0 / n;
        *py.entry(sb).or_default() += 1.0 / n;
    }
    joint
        .iter()
        .map(|(&(a, b), &p)| p * (p / (px[&a] * py[&b])).log2())
        .sum()
}

fn unit(b: usize) -> Binning {
    Binning::cube(1, 0.0, 1.0, b).unwrap()
}

#[test]
fn independent_fair_coin_has_one_bit_given_anything() {
    let mut rng = RngState::new(21).rng();
    let x: Vec<Vec<f64>> = (0..1000)
        .map(|_| vec![if rng.random_bool(0.5) { 0.25 } else { 0.75 }])
        .collect();
    let y: Vec<Vec<f64>> = (0..1000).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
    let h = conditional_entropy(&x, &y, &unit(2), &unit(2)).unwrap();
    assert!((h - 1.0).abs() <= 0.05, "{h}");
}

#[test]
fn functional_dependence_has_zero_conditional_entropy() {
    let mut rng = RngState::new(22).rng();
    let y: Vec<Vec<f64>> = (0..1000).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
    let x: Vec<Vec<f64>> = y.iter().map(|v| vec![if v[0] < 0.5 { 0.1 } else { 0.9 }]).collect();
    let h = conditional_entropy(&x, &y, &unit(2), &unit(4)).unwrap();
    assert!(h <= estimator_tolerance(1000));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn three_entropy_identity_matches_direct_mi(seed in any::<u64>(), n in 1usize..400, coupling in 0.0f64..1.0) {
        let mut rng = RngState::new(seed).rng();
        let y: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
        let x: Vec<Vec<f64>> = y
            .iter()
            .map(|v| vec![coupling * v[0] + (1.0 - coupling) * rng.random_range(0.0..1.0)])
            .collect();
        let (bx, by) = (unit(5), Binning::cube(2, 0.0, 1.0, 3).unwrap());
        let rep = entropy_report(&x, &y, &bx, &by).unwrap();
        prop_assert!((rep.mutual_info - direct_mutual_information(&x, &y, &bx, &by)).abs() <= 1e-9);
        prop_assert!((rep.mutual_info - (rep.h_phi + rep.h_psi - rep.h_joint)).abs() <= 1e-9);
        prop_assert!(rep.h_phi_given_psi >= 0.0 && rep.h_phi_given_psi <= rep.h_phi + 1e-9);
        for (h, bins) in [(rep.h_phi, bx.total_bins()), (rep.h_psi, by.total_bins()), (rep.h_joint, bx.total_bins() * by.total_bins())] {
            prop_assert!(h >= 0.0 && h <= bins.log2() + 1e-12);
        }
    }

    #[test]
    fn extra_conditioning_never_adds_entropy(seed in any::<u64>(), n in 10usize..500) {
        let mut rng = RngState::new(seed).rng();
        let psi: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
        let extra: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let phi: Vec<Vec<f64>> = psi.iter().zip(&extra).map(|(p, e)| vec![(p[0] + e) / 2.0]).collect();
        let both: Vec<Vec<f64>> = psi.iter().zip(&extra).map(|(p, e)| vec![p[0], *e]).collect();
        let coarse = conditional_entropy(&phi, &psi, &unit(4), &unit(4)).unwrap();
        let fine = conditional_entropy(&phi, &both, &unit(4), &Binning::cube(2, 0.0, 1.0, 4).unwrap()).unwrap();
        prop_assert!(fine <= coarse + estimator_tolerance(n));
    }
}

fn aliased_ring() -> RingEnv {
    RingEnv::new(1.0, 64, 0.05, Aliasing::Antipodal).unwrap()
}

fn latent_bins() -> Binning {
    Binning::cube(2, -1.2, 1.2, 8).unwrap()
}

#[test]
fn path_conditioning_removes_the_alias() {
    let env = aliased_ring();
    let store = env.consolidated_memory().unwrap();
    let cycle = env.anchor_cycle().unwrap();
    let kernel = Kernel::gaussian(0.15).unwrap();
    let settings = PathSettings {
        episodes: 200,
        horizon: 10,
        arc_bandwidth: 0.1,
    };
    for seed in 0..5 {
        let mut rng = RngState::new(seed).rng();
        let r = contextual_entropy_compare(&env, &store, &kernel, &cycle, &settings, &latent_bins(), &mut rng).unwrap();
        assert!(r.h_path + 0.5 <= r.h_pointwise, "{r:?}");
        assert_eq!(r.queries, 2000);
    }
}

#[test]
fn unambiguous_ring_is_near_deterministic_both_ways() {
    let env = RingEnv::new(1.0, 64, 0.0, Aliasing::None).unwrap();
    let store = env.consolidated_memory().unwrap();
    let cycle = env.anchor_cycle().unwrap();
    let settings = PathSettings {
        episodes: 100,
        horizon: 8,
        arc_bandwidth: 0.1,
    };
    let mut rng = RngState::new(1).rng();
    let r = contextual_entropy_compare(
        &env,
        &store,
        &Kernel::gaussian(0.02).unwrap(),
        &cycle,
        &settings,
        &latent_bins(),
        &mut rng,
    )
    .unwrap();
    assert!(r.h_path < 0.01 && r.h_pointwise < 0.01, "{r:?}");
    assert!(r.h_path <= r.h_pointwise + 1e-12);
}

#[test]
fn deterministic_coupling_satisfies_the_bound() {
    let mut rng = RngState::new(2).rng();
    let psi: Vec<Vec<f64>> = (0..1000)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let phi: Vec<Vec<f64>> = psi.iter().map(|p| vec![p[0], p[1]]).collect();
    let b = Binning::cube(2, -1.0, 1.0, 4).unwrap();
    let rep = reversibility_bound_check(&phi, &phi, &psi, &[], &b, &b).unwrap();
    assert_eq!(rep.delta_h, 0.0);
    assert!(rep.holds);
    assert!(rep.amortized_info > 3.0);
}

#[test]
fn independent_content_breaks_the_bound() {
    let mut rng = RngState::new(3).rng();
    let normal = Normal::new(0.0, 0.5).unwrap();
    let phi: Vec<Vec<f64>> = (0..2000)
        .map(|_| vec![if rng.random_bool(0.5) { -0.5 } else { 0.5 }, 0.0])
        .collect();
    let psi: Vec<Vec<f64>> = (0..2000)
        .map(|_| {
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            vec![a.cos(), a.sin()]
        })
        .collect();
    let forward: Vec<Vec<f64>> = phi
        .iter()
        .map(|p| vec![p[0] + normal.sample(&mut rng), p[1] + normal.sample(&mut rng)])
        .collect();
    let lb = Binning::cube(2, -1.5, 1.5, 8).unwrap();
    let cb = Binning::cube(2, -1.1, 1.1, 8).unwrap();
    let rep = reversibility_bound_check(&forward, &phi, &psi, &[], &lb, &cb).unwrap();
    assert!(!rep.holds, "{rep:?}");
    assert!(rep.amortized_info < 0.2);
}

#[test]
fn hist_entropy_bounds_and_determinism() {
    let mut rng = RngState::new(4).rng();
    let s: Vec<Vec<f64>> = (0..300)
        .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
        .collect();
    let b = Binning::cube(2, -1.0, 1.0, 5).unwrap();
    let h = hist_entropy(&s, &b).unwrap();
    assert!(h >= 0.0 && h <= 25f64.log2());
    assert_eq!(h, hist_entropy(&s, &b).unwrap());
    let (_, overflow) = b.symbols(&s).unwrap();
    assert!(overflow > 0);
}
