use mai_core::bootstrap::{cycle_consistency_residual, BootstrapConfig, TargetMap};
use mai_core::envs::{Aliasing, RingEnv};
use mai_core::retrieval::empirical_lipschitz;
use mai_core::{
    retract_to_cycle, retrieve_adapt, soft_retrieve, ContextPoint, CycleRepresentative, Kernel, KernelKind,
    LatentPoint, MemoryRetriever, RngState, TransitionEntry, TransitionMemory,
};
use proptest::prelude::*;
use rand::Rng;

fn c(v: &[f64]) -> ContextPoint {
    ContextPoint::from_slice(v).unwrap()
}

fn l(v: &[f64]) -> LatentPoint {
    LatentPoint::from_slice(v).unwrap()
}

fn random_store(seed: u64, n: usize, k: usize, d: usize) -> TransitionMemory {
    let mut rng = RngState::new(seed).rng();
    let mut m = TransitionMemory::new(k, d).unwrap();
    for t in 0..n {
        let mut v = |dim| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();
        let (ctx, content, succ) = (v(k), v(d), v(d));
        m.insert(TransitionEntry::new(c(&ctx), l(&content), l(&succ), t as u64))
            .unwrap();
    }
    m
}

fn bounding_box(m: &TransitionMemory) -> Vec<(f64, f64)> {
    (0..m.latent_dim())
        .map(|i| {
            m.entries()
                .iter()
                .map(|e| e.content.coords()[i])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        })
        .collect()
}

fn ring() -> RingEnv {
    RingEnv::new(1.0, 64, 0.0, Aliasing::None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn estimates_stay_in_the_hull(seed in any::<u64>(), n in 1usize..12, d in 1usize..3, sigma in 0.05f64..3.0, beta in 0.0f64..2.0) {
        let m = random_store(seed, n, 2, d);
        let mut rng = RngState::new(seed ^ 1).rng();
        let q = c(&[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]);
        let succ = l(&(0..d).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<_>>());
        for kind in [KernelKind::Gaussian, KernelKind::InverseDistance, KernelKind::HardNearest] {
            let k = Kernel::new(kind, sigma, beta).unwrap();
            for est in [soft_retrieve(&m, &q, &k).unwrap(), retrieve_adapt(&m, &succ, &q, &k).unwrap()] {
                prop_assert!((est.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                prop_assert_eq!(est.estimate.dim(), d);
                for (x, (lo, hi)) in est.estimate.coords().iter().zip(bounding_box(&m)) {
                    prop_assert!(*x >= lo - 1e-12 && *x <= hi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn retraction_is_idempotent(seed in any::<u64>(), n in 3usize..12) {
        let mut rng = RngState::new(seed).rng();
        let coords: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let Ok(cycle) = CycleRepresentative::from_coords(coords) else { return Ok(()) };
        let p = l(&[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]);
        let once = retract_to_cycle(&p, &cycle).unwrap();
        let twice = retract_to_cycle(&once, &cycle).unwrap();
        prop_assert!(once.distance(&twice) <= 1e-12);
    }
}

#[test]
fn sharp_gaussian_agrees_with_hard_nearest_on_exact_matches() {
    let m = random_store(9, 10, 2, 2);
    let sharp = Kernel::new(KernelKind::Gaussian, 1e-3, 1.0).unwrap();
    let hard = Kernel::new(KernelKind::HardNearest, 1.0, 1.0).unwrap();
    for e in m.entries() {
        let a = retrieve_adapt(&m, &e.successor, &e.context, &sharp).unwrap();
        let b = retrieve_adapt(&m, &e.successor, &e.context, &hard).unwrap();
        assert!(a.estimate.distance(&b.estimate) < 1e-9);
        assert!(a.estimate.distance(&e.content) < 1e-9);
    }
}

#[test]
fn ring_backward_query_recovers_predecessor() {
    let env = ring();
    let store = env.consolidated_memory().unwrap();
    let kernel = Kernel::new(KernelKind::Gaussian, 0.1, 1.0).unwrap();
    let mut rng = RngState::new(3).rng();
    for e in store.entries() {
        let noisy = l(&[
            e.successor.coords()[0] + rng.random_range(-0.01..0.01),
            e.successor.coords()[1],
        ]);
        let r = retrieve_adapt(&store, &noisy, &e.context, &kernel).unwrap();
        assert!(r.estimate.distance(&e.content) <= kernel.bandwidth());
        assert!(r.effective_support >= 1.0);
    }
}

#[test]
fn retraction_examples() {
    let env = ring();
    let cycle = env.anchor_cycle().unwrap();
    let p = retract_to_cycle(&l(&[2.0, 0.0]), &cycle).unwrap();
    assert!(p.distance(&l(&[1.0, 0.0])) <= std::f64::consts::TAU / 64.0);
    let on = cycle.vertices()[5].clone();
    assert_eq!(retract_to_cycle(&on, &cycle).unwrap(), on);
    let square =
        CycleRepresentative::from_coords(vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![2.0, 2.0], vec![0.0, 2.0]]).unwrap();
    assert_eq!(retract_to_cycle(&l(&[1.0, 1.0]), &square).unwrap(), l(&[1.0, 0.0]));
    assert!(CycleRepresentative::from_coords(vec![vec![0.0], vec![1.0]]).is_err());
}

#[test]
fn lipschitz_estimate_is_finite() {
    let env = ring();
    let store = env.consolidated_memory().unwrap();
    let kernel = Kernel::new(KernelKind::Gaussian, 0.2, 1.0).unwrap();
    let retriever = MemoryRetriever::new(&store, &kernel);
    let mut rng = RngState::new(4).rng();
    let lr = empirical_lipschitz(
        &retriever,
        &env.clean_context(0.3),
        &env.content(0.3),
        0.2,
        500,
        &mut rng,
    )
    .unwrap();
    assert!(lr.is_finite() && lr >= 0.0);
}

#[test]
fn cycle_consistency_examples() {
    let psi = c(&[0.5]);
    let phi = l(&[1.0, 2.0]);
    let cfg = BootstrapConfig::new(0.5, TargetMap::constant(&l(&[3.0, 0.0]), 1).unwrap()).unwrap();
    let forward = mai_core::bootstrap_step(&phi, &psi, &cfg).unwrap();
    let mut m = TransitionMemory::new(1, 2).unwrap();
    m.insert(TransitionEntry::new(psi.clone(), phi.clone(), forward, 0))
        .unwrap();
    m.insert(TransitionEntry::new(c(&[4.0]), l(&[-1.0, 0.0]), l(&[0.0, 0.0]), 1))
        .unwrap();
    let hard = Kernel::new(KernelKind::HardNearest, 1.0, 1.0).unwrap();
    assert_eq!(cycle_consistency_residual(&m, &hard, &cfg, &phi, &psi).unwrap(), 0.0);

    // far from all entries: both the estimate and the queried content lie in the hull
    let soft = Kernel::new(KernelKind::Gaussian, 0.5, 1.0).unwrap();
    let inside = l(&[0.0, 1.0]);
    let r = cycle_consistency_residual(&m, &soft, &cfg, &inside, &c(&[50.0])).unwrap();
    let diameter = l(&[1.0, 2.0]).distance(&l(&[-1.0, 0.0]));
    assert!(r <= diameter);
}

#[test]
fn ring_loop_is_cycle_consistent() {
    let env = ring();
    let store = env.consolidated_memory().unwrap();
    let kernel = Kernel::new(KernelKind::Gaussian, 0.1, 1.0).unwrap();
    let successors: Vec<LatentPoint> = (0..64).map(|i| env.content(env.anchor_angle(i + 1))).collect();
    let ahead = CycleRepresentative::new(successors, 0.0, 0.0).unwrap();
    let cfg = BootstrapConfig::new(0.1, TargetMap::cycle_lookup(env.anchor_contexts(), ahead).unwrap()).unwrap();
    for e in store.entries() {
        let r = cycle_consistency_residual(&store, &kernel, &cfg, &e.content, &e.context).unwrap();
        assert!(r < 0.1 * env.radius, "{r}");
    }
}
