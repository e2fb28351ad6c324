//! The bootstrapping operator F, the composite map T = F∘R, fixed-point
//! iteration, the K-step return map and the amortization gap.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{MaiError, Result};
use crate::kernel::Kernel;
use crate::memory::TransitionMemory;
use crate::point::{check_dim, euclidean, ContextPoint, LatentPoint};
use crate::retrieval::{retract_to_cycle, retrieve_adapt, Retriever};
use crate::topology::CycleRepresentative;
use crate::trajectory::Trajectory;

pub type TargetFn = dyn Fn(&ContextPoint) -> Result<LatentPoint> + Send + Sync;

/// Context-conditioned target g(ψ) that F pulls towards.
#[derive(Clone)]
pub enum TargetMap {
    /// g(ψ) = Aψ + b with A stored row-major, `rows` = latent dimension.
    Linear {
        matrix: Vec<f64>,
        rows: usize,
        cols: usize,
        offset: Vec<f64>,
    },
    /// g(ψ) = vertex `i` of the cycle, where key `i` is the nearest key to ψ
    /// (lowest index on ties).
    CycleLookup {
        keys: Vec<ContextPoint>,
        cycle: CycleRepresentative,
    },
    /// Environment-provided target.
    Oracle(Arc<TargetFn>),
}

impl fmt::Debug for TargetMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetMap::Linear { rows, cols, .. } => write!(f, "Linear({rows}x{cols})"),
            TargetMap::CycleLookup { keys, .. } => write!(f, "CycleLookup({} keys)", keys.len()),
            TargetMap::Oracle(_) => f.write_str("Oracle"),
        }
    }
}

impl TargetMap {
    pub fn linear(matrix: Vec<f64>, rows: usize, cols: usize, offset: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || matrix.len() != rows * cols || offset.len() != rows {
            return Err(MaiError::config(format!(
                "linear target needs a {rows}x{cols} matrix and {rows} offsets, got {} and {}",
                matrix.len(),
                offset.len()
            )));
        }
        if matrix.iter().chain(&offset).any(|v| !v.is_finite()) {
            return Err(MaiError::config("linear target coefficients must be finite"));
        }
        Ok(TargetMap::Linear {
            matrix,
            rows,
            cols,
            offset,
        })
    }

    /// g(ψ) = value for every ψ of dimension `context_dim`.
    pub fn constant(value: &LatentPoint, context_dim: usize) -> Result<Self> {
        Self::linear(
            vec![0.0; value.dim() * context_dim],
            value.dim(),
            context_dim,
            value.coords().to_vec(),
        )
    }

    /// g(ψ) = ψ.
    pub fn identity(dim: usize) -> Result<Self> {
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = 1.0;
        }
        Self::linear(matrix, dim, dim, vec![0.0; dim])
    }

    pub fn cycle_lookup(keys: Vec<ContextPoint>, cycle: CycleRepresentative) -> Result<Self> {
        if keys.len() != cycle.len() {
            return Err(MaiError::config(format!(
                "cycle lookup needs one key per vertex: {} keys, {} vertices",
                keys.len(),
                cycle.len()
            )));
        }
        let dim = keys[0].dim();
        for k in &keys {
            check_dim("lookup key", dim, k.dim())?;
        }
        Ok(TargetMap::CycleLookup { keys, cycle })
    }

    pub fn oracle(f: impl Fn(&ContextPoint) -> Result<LatentPoint> + Send + Sync + 'static) -> Self {
        TargetMap::Oracle(Arc::new(f))
    }

    pub fn evaluate(&self, context: &ContextPoint) -> Result<LatentPoint> {
        match self {
            TargetMap::Linear {
                matrix,
                rows,
                cols,
                offset,
            } => {
                check_dim("context", *cols, context.dim())?;
                let psi = context.coords();
                LatentPoint::new(
                    (0..*rows)
                        .map(|r| {
                            offset[r]
                                + matrix[r * cols..(r + 1) * cols]
                                    .iter()
                                    .zip(psi)
                                    .map(|(a, x)| a * x)
                                    .sum::<f64>()
                        })
                        .collect(),
                )
            }
            TargetMap::CycleLookup { keys, cycle } => {
                check_dim("context", keys[0].dim(), context.dim())?;
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (i, k) in keys.iter().enumerate() {
                    let d = k.distance(context);
                    if d < best_d {
                        best = i;
                        best_d = d;
                    }
                }
                Ok(cycle.vertices()[best].clone())
            }
            TargetMap::Oracle(f) => f(context),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    pull: f64,
    pub target: TargetMap,
}

impl BootstrapConfig {
    pub fn new(pull: f64, target: TargetMap) -> Result<Self> {
        if !(pull > 0.0 && pull < 1.0) {
            return Err(MaiError::config(format!(
                "pull must lie in the open interval (0, 1), got {pull}"
            )));
        }
        Ok(Self { pull, target })
    }

    /// The contraction factor λ of F in its content argument.
    pub fn pull(&self) -> f64 {
        self.pull
    }
}

/// F(φ, ψ) = λφ + (1 − λ)g(ψ), evaluated as g + λ(φ − g) so that g is an
/// exact fixed point in floating point.
pub fn bootstrap_step(phi: &LatentPoint, context: &ContextPoint, config: &BootstrapConfig) -> Result<LatentPoint> {
    let g = config.target.evaluate(context)?;
    check_dim("content", g.dim(), phi.dim())?;
    let lambda = config.pull;
    LatentPoint::new(
        g.coords()
            .iter()
            .zip(phi.coords())
            .map(|(g, x)| g + lambda * (x - g))
            .collect(),
    )
}

/// T(φ, ψ) = F(R(φ, ψ), ψ).
pub fn composite_step(
    retriever: &dyn Retriever,
    config: &BootstrapConfig,
    phi: &LatentPoint,
    context: &ContextPoint,
) -> Result<LatentPoint> {
    bootstrap_step(&retriever.retrieve(phi, context)?, context, config)
}

/// ‖R(F(φ, ψ), ψ) − φ‖ against a memory.
pub fn cycle_consistency_residual(
    store: &TransitionMemory,
    kernel: &Kernel,
    config: &BootstrapConfig,
    phi: &LatentPoint,
    context: &ContextPoint,
) -> Result<f64> {
    let forward = bootstrap_step(phi, context, config)?;
    Ok(retrieve_adapt(store, &forward, context, kernel)?.estimate.distance(phi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iterates: Vec<LatentPoint>,
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Largest ratio of consecutive residuals above the noise floor; 0 when
    /// fewer than two such residuals exist.
    pub contraction_estimate: f64,
}

impl IterationTrace {
    pub fn final_point(&self) -> &LatentPoint {
        self.iterates.last().expect("trace always holds the initial point")
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.residuals.last().copied()
    }

    /// Number of map applications performed.
    pub fn steps(&self) -> usize {
        self.residuals.len()
    }

    /// Consecutive residual ratios that enter the contraction estimate.
    pub fn measured_ratios(&self, tol: f64) -> Vec<f64> {
        let floors: Vec<f64> = self.iterates.iter().map(|x| residual_floor(tol, x)).collect();
        self.residuals
            .windows(2)
            .enumerate()
            .filter(|(n, w)| w[0] > floors[*n] && w[1] > floors[n + 1])
            .map(|(_, w)| w[1] / w[0])
            .collect()
    }
}

/// Relative size below which a residual is dominated by rounding in the
/// iterates themselves.
pub const RESIDUAL_NOISE_RELATIVE: f64 = 1e-6;

/// Residuals at or below this value are excluded from ratio measurements:
/// ten times the tolerance, raised to a relative rounding floor for large iterates.
pub fn residual_floor(tol: f64, iterate: &LatentPoint) -> f64 {
    let scale = iterate.coords().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    (10.0 * tol).max(RESIDUAL_NOISE_RELATIVE * scale)
}

fn check_iteration_args(tol: f64, max_iter: usize) -> Result<()> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(MaiError::input(format!("tolerance must be finite and > 0, got {tol}")));
    }
    if max_iter == 0 {
        return Err(MaiError::input("max_iter must be >= 1"));
    }
    Ok(())
}

fn finish_trace(iterates: Vec<LatentPoint>, residuals: Vec<f64>, converged: bool, tol: f64) -> IterationTrace {
    let mut trace = IterationTrace {
        iterates,
        residuals,
        converged,
        contraction_estimate: 0.0,
    };
    trace.contraction_estimate = trace.measured_ratios(tol).into_iter().fold(0.0, f64::max);
    trace
}

/// Iterates an arbitrary self-map until the residual drops to `tol`.
/// A non-finite iterate ends the run unconverged.
pub fn iterate_map(
    mut map: impl FnMut(&LatentPoint) -> Result<LatentPoint>,
    start: &LatentPoint,
    tol: f64,
    max_iter: usize,
) -> Result<IterationTrace> {
    check_iteration_args(tol, max_iter)?;
    let mut iterates = vec![start.clone()];
    let mut residuals = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let current = iterates.last().expect("non-empty");
        let next = match map(current) {
            Ok(p) => p,
            Err(MaiError::Input(msg)) if msg.contains("finite") => break,
            Err(e) => return Err(e),
        };
        let r = euclidean(current.coords(), next.coords());
        if !r.is_finite() {
            break;
        }
        iterates.push(next);
        residuals.push(r);
        if r <= tol {
            converged = true;
            break;
        }
    }
    Ok(finish_trace(iterates, residuals, converged, tol))
}

/// Φ_{n+1} = T(Φ_n, ψ) at a fixed context.
pub fn fixed_point_iterate(
    retriever: &dyn Retriever,
    config: &BootstrapConfig,
    start: &LatentPoint,
    context: &ContextPoint,
    tol: f64,
    max_iter: usize,
) -> Result<IterationTrace> {
    iterate_map(|x| composite_step(retriever, config, x, context), start, tol, max_iter)
}

#[derive(Debug, Clone)]
pub struct PoincareResult {
    /// Round-start iterates of the K-step return map.
    pub trace: IterationTrace,
    /// The K within-round iterates of the last round, paired with their contexts.
    pub orbit: Trajectory,
}

/// Applies T over the context cycle once per round and iterates the
/// resulting return map.
pub fn poincare_compose(
    retriever: &dyn Retriever,
    config: &BootstrapConfig,
    contexts: &[ContextPoint],
    start: &LatentPoint,
    rounds: usize,
    tol: f64,
) -> Result<PoincareResult> {
    if contexts.is_empty() {
        return Err(MaiError::input("context cycle must have at least one context"));
    }
    let mut last_round: Vec<LatentPoint> = Vec::new();
    let trace = iterate_map(
        |x| {
            let mut round = Vec::with_capacity(contexts.len());
            let mut current = x.clone();
            for ctx in contexts {
                current = composite_step(retriever, config, &current, ctx)?;
                round.push(current.clone());
            }
            last_round = round;
            Ok(current)
        },
        start,
        tol,
        rounds,
    )?;
    let orbit = Trajectory::from_pairs(contexts.iter().cloned().zip(last_round))?;
    Ok(PoincareResult { trace, orbit })
}

/// Box-constrained multi-start coordinate search used as the reference optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSearch {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Total loss evaluations allowed.
    pub budget: usize,
}

impl OracleSearch {
    fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(MaiError::input(
                "oracle box bounds must be non-empty and of equal dimension",
            ));
        }
        if self
            .lower
            .iter()
            .zip(&self.upper)
            .any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite())
        {
            return Err(MaiError::input(
                "oracle box needs finite lower < upper in every coordinate",
            ));
        }
        if self.budget == 0 {
            return Err(MaiError::input("oracle budget must be >= 1"));
        }
        Ok(())
    }

    /// Minimizes `loss`; returns (best point, best loss, evaluations used).
    pub fn minimize(&self, loss: &dyn Fn(&[f64]) -> f64) -> Result<(Vec<f64>, f64, usize)> {
        self.validate()?;
        let dim = self.lower.len();
        let mut evals = 0usize;
        let eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = loss(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        // coarse lattice over a quarter of the budget
        let lattice_budget = (self.budget / 4).max(1);
        let per_axis = ((lattice_budget as f64).powf(1.0 / dim as f64).floor() as usize).max(1);
        let cell: Vec<f64> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) / per_axis as f64)
            .collect();
        let mut scored: Vec<(f64, Vec<f64>)> = Vec::new();
        let total = per_axis.pow(dim as u32);
        for flat in 0..total {
            let mut rem = flat;
            let x: Vec<f64> = (0..dim)
                .map(|i| {
                    let k = rem % per_axis;
                    rem /= per_axis;
                    self.lower[i] + (k as f64 + 0.5) * cell[i]
                })
                .collect();
            let v = eval(&x, &mut evals);
            scored.push((v, x));
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        let starts: Vec<(f64, Vec<f64>)> = scored.into_iter().take(4).collect();
        let mut best = starts[0].clone();
        let remaining = self.budget.saturating_sub(evals);
        let per_start = remaining / starts.len();
        for (mut fx, mut x) in starts {
            let stop_at = evals + per_start;
            let mut step: Vec<f64> = cell.iter().map(|c| c * 0.5).collect();
            while evals + 2 <= stop_at && step.iter().any(|&s| s > 1e-15) {
                let mut improved = false;
                for i in 0..dim {
                    for sign in [-1.0, 1.0] {
                        if evals >= stop_at {
                            break;
                        }
                        let mut y = x.clone();
                        y[i] = (y[i] + sign * step[i]).clamp(self.lower[i], self.upper[i]);
                        let fy = eval(&y, &mut evals);
                        if fy < fx {
                            fx = fy;
                            x = y;
                            improved = true;
                            break;
                        }
                    }
                }
                if !improved {
                    step.iter_mut().for_each(|s| *s *= 0.5);
                }
            }
            if fx < best.0 {
                best = (fx, x);
            }
        }
        Ok((best.1, best.0, evals))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmortizationReport {
    pub mai_loss: f64,
    pub oracle_loss: f64,
    /// mai_loss − oracle_loss.
    pub gap: f64,
    pub mai_iterations: usize,
    pub oracle_iterations: usize,
    pub mai_converged: bool,
}

/// Loss of the MAI fixed point (retracted onto `cycle` after every step when
/// given) against a brute-force optimum of the same loss.
#[allow(clippy::too_many_arguments)]
pub fn amortization_gap(
    retriever: &dyn Retriever,
    config: &BootstrapConfig,
    context: &ContextPoint,
    start: &LatentPoint,
    cycle: Option<&CycleRepresentative>,
    loss: &dyn Fn(&ContextPoint, &[f64]) -> f64,
    oracle: &OracleSearch,
    tol: f64,
    max_iter: usize,
) -> Result<AmortizationReport> {
    check_dim("oracle box", start.dim(), oracle.lower.len())?;
    let trace = iterate_map(
        |x| {
            let y = composite_step(retriever, config, x, context)?;
            match cycle {
                Some(c) => retract_to_cycle(&y, c),
                None => Ok(y),
            }
        },
        start,
        tol,
        max_iter,
    )?;
    let mai_loss = loss(context, trace.final_point().coords());
    let (_, oracle_loss, oracle_iterations) = oracle.minimize(&|x| loss(context, x))?;
    Ok(AmortizationReport {
        mai_loss,
        oracle_loss,
        gap: mai_loss - oracle_loss,
        mai_iterations: trace.steps(),
        oracle_iterations,
        mai_converged: trace.converged,
    })
}
