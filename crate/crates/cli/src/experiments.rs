//! One function per experiment kind. Each maps (config, seed) to scalar
//! metrics in a fixed column order plus optional per-seed tables.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{SQRT_2, TAU};

use mai_core::duality::DualitySettings;
use mai_core::entropy::{contextual_entropy_compare, reversibility_bound_check, Binning, PathSettings};
use mai_core::envs::{cocycle_defect, stack_run, AffineMap, GluingAtlas, GridWorld, PatchStack, RingEnv};
use mai_core::topology::bottleneck_intervals;
use mai_core::{
    build_rips, cycle_consistency_residual, duality_experiment, fixed_point_iterate, is_nontrivial, persistence_z2,
    poincare_compose, AffineRetriever, Barcode, BootstrapConfig, ContextPoint, CycleRepresentative, ExactRetriever,
    Kernel, LatentPoint, MemoryRetriever, PointCloud, Retriever, RngState, TargetMap, Trajectory,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{
    AffineParams, AtlasParams, CircleParams, Coupling, Environment, ExperimentConfig, ExperimentKind, GridParams,
    RingParams,
};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Bool(bool),
    Count(u64),
    Real(f64),
}

impl Metric {
    pub fn to_json(self) -> serde_json::Value {
        match self {
            Self::Bool(b) => b.into(),
            Self::Count(n) => n.into(),
            Self::Real(x) if x.is_finite() => x.into(),
            Self::Real(x) => x.to_string().into(),
        }
    }

    pub fn to_csv(self) -> String {
        match self {
            Self::Bool(b) => b.to_string(),
            Self::Count(n) => n.to_string(),
            Self::Real(x) => real(x),
        }
    }

    pub fn as_f64(self) -> Option<f64> {
        match self {
            Self::Bool(_) => None,
            Self::Count(n) => Some(n as f64),
            Self::Real(x) => Some(x),
        }
    }
}

/// Shortest round-trip text of `x`, in exponent form outside [1e-4, 1e15).
pub fn real(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&x.abs()) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// Rows destined for one CSV file; the first column is always the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: &'static str,
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct SeedOutput {
    pub seed: u64,
    pub metrics: Vec<(&'static str, Metric)>,
    /// Non-scalar per-seed values echoed into report.json only.
    pub extra: serde_json::Map<String, serde_json::Value>,
    pub tables: Vec<Table>,
}

impl SeedOutput {
    fn new(seed: u64) -> Self {
        Self {
            seed,
            metrics: Vec::new(),
            extra: serde_json::Map::new(),
            tables: Vec::new(),
        }
    }

    fn put(&mut self, name: &'static str, value: Metric) {
        self.metrics.push((name, value));
    }

    pub fn metric(&self, name: &str) -> Option<Metric> {
        self.metrics.iter().find(|(n, _)| *n == name).map(|(_, m)| *m)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn kernel(config: &ExperimentConfig) -> Result<Kernel> {
    let op = &config.operator;
    Ok(Kernel::new(op.kernel, op.bandwidth, op.successor_weight)?)
}

fn ring(p: &RingParams) -> Result<RingEnv> {
    Ok(RingEnv::new(p.radius, p.n_anchor, p.obs_noise, p.aliasing)?)
}

fn grid(p: &GridParams) -> Result<GridWorld> {
    let walls: BTreeSet<(usize, usize)> = p.walls.iter().map(|w| (w[0], w[1])).collect();
    let rewards = BTreeMap::from([((p.goal[0], p.goal[1]), p.reward)]);
    Ok(GridWorld::new(
        p.width,
        p.height,
        walls,
        rewards,
        (p.start[0], p.start[1]),
    )?)
}

fn circle_cycle(p: &CircleParams) -> Result<CycleRepresentative> {
    let coords = (0..p.points)
        .map(|k| {
            let a = TAU * k as f64 / p.points as f64;
            vec![p.radius * a.cos(), p.radius * a.sin()]
        })
        .collect();
    Ok(CycleRepresentative::from_coords(coords)?)
}

fn layer_maps(config: &ExperimentConfig) -> Result<Vec<AffineMap>> {
    config
        .protocol
        .layers
        .iter()
        .map(|l| Ok(AffineMap::similarity2(l.scale, l.angle, l.translation)?))
        .collect()
}

fn unit_direction<R: Rng + ?Sized>(rng: &mut R) -> [f64; 2] {
    let a: f64 = rng.random_range(0.0..TAU);
    [a.cos(), a.sin()]
}

/// Builds every environment object the run needs without running anything.
pub fn preflight(config: &ExperimentConfig) -> Result<()> {
    kernel(config)?;
    BootstrapConfig::new(config.operator.pull, TargetMap::identity(1)?)?;
    match &config.environment {
        Environment::Ring(p) => {
            ring(p)?;
        }
        Environment::Grid(p) => {
            grid(p)?;
        }
        Environment::Circle(p) => {
            circle_cycle(p)?;
            if config.experiment == ExperimentKind::Stack {
                PatchStack::closed(layer_maps(config)?, config.operator.pull)?;
            }
        }
        Environment::Affine(_) | Environment::Atlas(_) => {}
    }
    Ok(())
}

pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedOutput> {
    let mut out = SeedOutput::new(seed);
    match (&config.experiment, &config.environment) {
        (ExperimentKind::FixedPoint, Environment::Affine(p)) => fixed_point(config, p, &mut out)?,
        (ExperimentKind::Closure, Environment::Ring(p)) => closure(config, p, &mut out)?,
        (ExperimentKind::EntropyCompare, Environment::Ring(p)) => entropy_compare(config, p, &mut out)?,
        (ExperimentKind::Reversibility, Environment::Ring(p)) => reversibility(config, p, &mut out)?,
        (ExperimentKind::Duality, Environment::Grid(p)) => duality(config, p, &mut out)?,
        (ExperimentKind::Stack, Environment::Circle(p)) => stack(config, p, &mut out)?,
        (ExperimentKind::Cocycle, Environment::Atlas(p)) => cocycle(config, p, &mut out)?,
        (ExperimentKind::Persistence, Environment::Circle(p)) => persistence(config, p, &mut out)?,
        (kind, _) => {
            return Err(CliError::Validation(format!(
                "environment does not fit experiment `{}`",
                kind.name()
            )));
        }
    }
    Ok(out)
}

fn fixed_point(config: &ExperimentConfig, p: &AffineParams, out: &mut SeedOutput) -> Result<()> {
    let (op, proto) = (&config.operator, &config.protocol);
    let mut rng = RngState::new(out.seed).rng();
    let context = ContextPoint::new((0..p.dim).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let bootstrap = BootstrapConfig::new(op.pull, TargetMap::identity(p.dim)?)?;
    let retriever: Box<dyn Retriever> = if p.gain == 1.0 {
        Box::new(ExactRetriever)
    } else {
        Box::new(AffineRetriever {
            anchor: LatentPoint::zeros(p.dim)?,
            gain: p.gain,
        })
    };
    // x = (1 − λ)ψ / (1 − λ·gain) solves x = ψ + λ(gain·x − ψ)
    let denom = 1.0 - op.pull * p.gain;
    let analytic: Option<Vec<f64>> =
        (denom != 0.0).then(|| context.coords().iter().map(|c| (1.0 - op.pull) * c / denom).collect());

    let mut rows = Vec::new();
    let (mut all_converged, mut max_steps, mut worst_residual, mut max_ratio, mut worst_error) =
        (true, 0usize, 0.0f64, 0.0f64, 0.0f64);
    let mut finals: Vec<LatentPoint> = Vec::new();
    for start in 0..proto.starts {
        let x0 = LatentPoint::new(
            (0..p.dim)
                .map(|_| rng.random_range(-proto.init_radius..=proto.init_radius))
                .collect(),
        )?;
        let trace = fixed_point_iterate(retriever.as_ref(), &bootstrap, &x0, &context, op.tol, op.max_iter)?;
        if start == 0 {
            out.extra
                .insert("residual_curve".into(), trace.residuals.clone().into());
        }
        for (i, r) in trace.residuals.iter().enumerate() {
            rows.push(vec![
                out.seed.to_string(),
                start.to_string(),
                (i + 1).to_string(),
                real(*r),
            ]);
        }
        all_converged &= trace.converged;
        max_steps = max_steps.max(trace.steps());
        worst_residual = worst_residual.max(trace.final_residual().unwrap_or(0.0));
        max_ratio = trace.measured_ratios(op.tol).into_iter().fold(max_ratio, f64::max);
        if let Some(x) = &analytic {
            let d = trace
                .final_point()
                .coords()
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            worst_error = worst_error.max(d);
        }
        finals.push(trace.final_point().clone());
    }
    let spread = finals.iter().map(|f| f.distance(&finals[0])).fold(0.0, f64::max);
    out.put("converged", Metric::Bool(all_converged));
    out.put("max_steps", Metric::Count(max_steps as u64));
    out.put("max_final_residual", Metric::Real(worst_residual));
    out.put("max_residual_ratio", Metric::Real(max_ratio));
    out.put("lipschitz_product", Metric::Real(op.pull * p.gain.abs()));
    out.put("endpoint_spread", Metric::Real(spread));
    out.put(
        "fixed_point_error",
        Metric::Real(if analytic.is_some() { worst_error } else { f64::NAN }),
    );
    out.tables.push(Table {
        file: "residuals.csv",
        header: &["seed", "start", "iteration", "residual"],
        rows,
    });
    Ok(())
}

fn polyline_length(points: &[LatentPoint], closed: bool) -> f64 {
    let open: f64 = points.windows(2).map(|w| w[0].distance(&w[1])).sum();
    match (closed, points.first(), points.last()) {
        (true, Some(a), Some(b)) => open + a.distance(b),
        _ => open,
    }
}

fn closure(config: &ExperimentConfig, p: &RingParams, out: &mut SeedOutput) -> Result<()> {
    let op = &config.operator;
    let env = ring(p)?;
    let store = env.consolidated_memory()?;
    let kernel = kernel(config)?;
    let bootstrap = BootstrapConfig::new(op.pull, env.anchor_target()?)?;
    let mut rng = RngState::new(out.seed).rng();
    let theta: f64 = rng.random_range(0.0..TAU);
    let scale = p.radius * rng.random_range(0.8..1.2);
    let start = LatentPoint::new(vec![scale * theta.cos(), scale * theta.sin()])?;
    let retriever = MemoryRetriever::new(&store, &kernel);
    let res = poincare_compose(
        &retriever,
        &bootstrap,
        &env.anchor_contexts(),
        &start,
        op.max_iter,
        op.tol,
    )?;
    let loop_test = is_nontrivial(&res.orbit, config.protocol.noise_floor)?;

    let orbit: Vec<LatentPoint> = res.orbit.contents().cloned().collect();
    let length = polyline_length(&orbit, true);
    let n = orbit.len();
    let context = ContextPoint::zeros(2)?;
    let line = Trajectory::from_pairs((0..n).map(|i| {
        let x = length * i as f64 / (n - 1) as f64;
        (context.clone(), LatentPoint::new(vec![x, 0.0]).expect("finite"))
    }))?;
    let line_test = is_nontrivial(&line, config.protocol.noise_floor)?;

    out.put("converged", Metric::Bool(res.trace.converged));
    out.put("rounds", Metric::Count(res.trace.steps() as u64));
    out.put(
        "final_residual",
        Metric::Real(res.trace.final_residual().unwrap_or(0.0)),
    );
    out.put("h1_persistence", Metric::Real(loop_test.persistence));
    out.put("noise_floor", Metric::Real(loop_test.noise_floor));
    out.put("nontrivial", Metric::Bool(loop_test.nontrivial));
    out.put("line_persistence", Metric::Real(line_test.persistence));
    out.put("line_nontrivial", Metric::Bool(line_test.nontrivial));
    out.tables.push(Table {
        file: "orbit.csv",
        header: &["seed", "index", "x", "y"],
        rows: point_rows(out.seed, &orbit),
    });
    Ok(())
}

fn point_rows(seed: u64, points: &[LatentPoint]) -> Vec<Vec<String>> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut row = vec![seed.to_string(), i.to_string()];
            row.extend(p.coords().iter().map(|&c| real(c)));
            row
        })
        .collect()
}

fn entropy_compare(config: &ExperimentConfig, p: &RingParams, out: &mut SeedOutput) -> Result<()> {
    let proto = &config.protocol;
    let env = ring(p)?;
    let store = env.consolidated_memory()?;
    let cycle = env.anchor_cycle()?;
    let settings = PathSettings {
        episodes: proto.episodes,
        horizon: proto.horizon,
        arc_bandwidth: proto.arc_bandwidth,
    };
    let binning = Binning::cube(2, -proto.latent_range, proto.latent_range, proto.bins)?;
    let mut rng = RngState::new(out.seed).rng();
    let r = contextual_entropy_compare(&env, &store, &kernel(config)?, &cycle, &settings, &binning, &mut rng)?;
    out.put("h_path", Metric::Real(r.h_path));
    out.put("h_pointwise", Metric::Real(r.h_pointwise));
    out.put("entropy_gap", Metric::Real(r.h_pointwise - r.h_path));
    out.put("queries", Metric::Count(r.queries as u64));
    Ok(())
}

fn reversibility(config: &ExperimentConfig, p: &RingParams, out: &mut SeedOutput) -> Result<()> {
    let proto = &config.protocol;
    let mut rng = RngState::new(out.seed).rng();
    let latent_bins = Binning::cube(2, -proto.latent_range, proto.latent_range, proto.bins)?;
    let context_bins = Binning::cube(2, -proto.context_range, proto.context_range, proto.bins)?;
    let (mut forward, mut phi, mut psi, mut residuals) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    match proto.coupling {
        Coupling::Ring => {
            let env = ring(p)?;
            let store = env.consolidated_memory()?;
            let kernel = kernel(config)?;
            let bootstrap = BootstrapConfig::new(config.operator.pull, env.anchor_target()?)?;
            for _ in 0..proto.samples {
                let a = rng.random_range(0..env.n_anchor);
                let theta = env.anchor_angle(a);
                let content = env.content(theta);
                let context = env.observe(theta, &mut rng);
                residuals.push(cycle_consistency_residual(
                    &store, &kernel, &bootstrap, &content, &context,
                )?);
                forward.push(env.content(env.anchor_angle(a + 2)).into_inner());
                phi.push(content.into_inner());
                psi.push(context.into_inner());
            }
        }
        Coupling::Independent => {
            let noise = Normal::new(0.0, proto.forward_noise).map_err(|e| CliError::Validation(e.to_string()))?;
            for _ in 0..proto.samples {
                let x = if rng.random_bool(0.5) { -0.5 } else { 0.5 };
                let a: f64 = rng.random_range(0.0..TAU);
                psi.push(vec![a.cos(), a.sin()]);
                forward.push(vec![x + noise.sample(&mut rng), noise.sample(&mut rng)]);
                phi.push(vec![x, 0.0]);
            }
        }
    }
    let r = reversibility_bound_check(&forward, &phi, &psi, &residuals, &latent_bins, &context_bins)?;
    out.put("delta_h", Metric::Real(r.delta_h));
    out.put("amortized_info", Metric::Real(r.amortized_info));
    out.put("epsilon_recon", Metric::Real(r.epsilon_recon));
    out.put("tolerance", Metric::Real(r.tolerance));
    out.put("holds", Metric::Bool(r.holds));
    Ok(())
}

fn duality(config: &ExperimentConfig, p: &GridParams, out: &mut SeedOutput) -> Result<()> {
    let proto = &config.protocol;
    let env = grid(p)?;
    let settings = DualitySettings {
        discount: proto.discount,
        alpha: proto.alpha,
        max_episode_steps: proto.max_episode_steps,
        holdout_suffixes: proto.holdout_suffixes,
        suffix_len: proto.suffix_len,
    };
    let state = RngState::new(out.seed);
    let (mut rng, mut hold) = (state.derive(0).rng(), state.derive(1).rng());
    let reports = duality_experiment(
        &env,
        &kernel(config)?,
        &proto.checkpoints,
        &settings,
        &mut rng,
        &mut hold,
    )?;
    let first = reports.first().expect("checkpoints are non-empty");
    let last = reports.last().expect("checkpoints are non-empty");
    out.put("initial_value_error", Metric::Real(first.forward_value_error));
    out.put("final_value_error", Metric::Real(last.forward_value_error));
    out.put(
        "final_recon_error",
        Metric::Real(last.backward_recon_error.unwrap_or(f64::NAN)),
    );
    out.put("memory_size", Metric::Count(last.memory_size as u64));
    out.tables.push(Table {
        file: "duality.csv",
        header: &[
            "seed",
            "episodes",
            "memory_size",
            "forward_value_error",
            "backward_recon_error",
            "iterations_forward",
            "iterations_backward",
        ],
        rows: reports
            .iter()
            .map(|r| {
                vec![
                    out.seed.to_string(),
                    r.episodes.to_string(),
                    r.memory_size.to_string(),
                    real(r.forward_value_error),
                    r.backward_recon_error.map_or_else(String::new, real),
                    r.iterations_forward.to_string(),
                    r.iterations_backward.to_string(),
                ]
            })
            .collect(),
    });
    Ok(())
}

fn barcode(points: Vec<Vec<f64>>, max_filtration: Option<f64>) -> Result<Barcode> {
    let cloud = PointCloud::new(points)?;
    let cut = max_filtration.unwrap_or_else(|| cloud.diameter());
    Ok(persistence_z2(&build_rips(&cloud, cut)?)?)
}

fn coords(cycle: &CycleRepresentative) -> Vec<Vec<f64>> {
    cycle.vertices().iter().map(|v| v.coords().to_vec()).collect()
}

fn stack(config: &ExperimentConfig, p: &CircleParams, out: &mut SeedOutput) -> Result<()> {
    let (op, proto) = (&config.operator, &config.protocol);
    let base = circle_cycle(p)?;
    let up = layer_maps(config)?;
    let mut stack = PatchStack::closed(up, op.pull)?;
    if proto.delta > 0.0 {
        let u = unit_direction(&mut RngState::new(out.seed).rng());
        stack.down = stack.down.perturbed(&[proto.delta * u[0], proto.delta * u[1]])?;
    }
    let run = stack_run(&stack, &base, op.max_iter, op.tol)?;
    let base_bars = barcode(coords(&base), None)?;
    let trip_bars = barcode(coords(&run.round_trip), None)?;
    let mut nontrivial = 0;
    for orbit in &run.orbits {
        let context = ContextPoint::zeros(1)?;
        let traj = Trajectory::from_pairs(orbit.vertices().iter().map(|v| (context.clone(), v.clone())))?;
        nontrivial += u64::from(is_nontrivial(&traj, proto.noise_floor)?.nontrivial);
    }
    out.put("closure_defect", Metric::Real(run.closure_defect));
    out.put(
        "bottleneck",
        Metric::Real(bottleneck_intervals(&base_bars.h1, &trip_bars.h1)),
    );
    out.put("base_persistence", Metric::Real(base_bars.max_h1_persistence()));
    out.put("round_trip_persistence", Metric::Real(trip_bars.max_h1_persistence()));
    out.put("nontrivial_layers", Metric::Count(nontrivial));
    out.put("layers", Metric::Count(run.orbits.len() as u64));
    out.tables.push(Table {
        file: "round_trip.csv",
        header: &["seed", "index", "x", "y"],
        rows: point_rows(out.seed, run.round_trip.vertices()),
    });
    Ok(())
}

fn cocycle(config: &ExperimentConfig, p: &AtlasParams, out: &mut SeedOutput) -> Result<()> {
    let delta = config.protocol.delta;
    let mut rng = RngState::new(out.seed).rng();
    // G_ij = F_j ∘ F_i⁻¹ for rigid patch frames F_i
    let frames = (0..p.patches)
        .map(|_| {
            let t = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            AffineMap::similarity2(1.0, rng.random_range(0.0..TAU), t)
        })
        .collect::<mai_core::Result<Vec<_>>>()?;
    let mut atlas = GluingAtlas::new(p.patches);
    for i in 0..p.patches {
        for j in i + 1..p.patches {
            atlas.insert(i, j, frames[j].compose(&frames[i].inverse()?)?);
        }
    }
    if delta > 0.0 {
        let u = unit_direction(&mut rng);
        let bent = atlas.maps[&(0, 2)].perturbed(&[delta * u[0], delta * u[1]])?;
        atlas.insert(0, 2, bent);
    }
    let points: Vec<Vec<f64>> = (0..config.protocol.samples)
        .map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
        .collect();
    let defect = cocycle_defect(&atlas, &points)?;
    out.put("defect", Metric::Real(defect));
    out.put("delta", Metric::Real(delta));
    out.put("deviation", Metric::Real((defect - delta).abs()));
    Ok(())
}

fn persistence(config: &ExperimentConfig, p: &CircleParams, out: &mut SeedOutput) -> Result<()> {
    let delta = config.protocol.delta;
    let base = coords(&circle_cycle(p)?);
    let mut rng = RngState::new(out.seed).rng();
    let moved: Vec<Vec<f64>> = base
        .iter()
        .map(|x| {
            x.iter()
                .map(|c| {
                    if delta > 0.0 {
                        c + rng.random_range(-delta..=delta)
                    } else {
                        *c
                    }
                })
                .collect()
        })
        .collect();
    let a = barcode(base, config.protocol.max_filtration)?;
    let b = barcode(moved, config.protocol.max_filtration)?;
    let d = bottleneck_intervals(&a.h1, &b.h1);
    let bound = 2.0 * SQRT_2 * delta;
    out.put("h1_persistence", Metric::Real(a.max_h1_persistence()));
    out.put("perturbed_h1_persistence", Metric::Real(b.max_h1_persistence()));
    out.put("bottleneck", Metric::Real(d));
    out.put("stability_bound", Metric::Real(bound));
    out.put("within_bound", Metric::Bool(d <= bound));
    let mut rows = Vec::new();
    for (name, bars) in [("original", &a), ("perturbed", &b)] {
        for (dim, intervals) in [(0, &bars.h0), (1, &bars.h1)] {
            for iv in intervals {
                rows.push(vec![
                    out.seed.to_string(),
                    name.to_string(),
                    dim.to_string(),
                    real(iv.birth),
                    real(iv.death),
                ]);
            }
        }
    }
    out.tables.push(Table {
        file: "barcode.csv",
        header: &["seed", "cloud", "dim", "birth", "death"],
        rows,
    });
    Ok(())
}
