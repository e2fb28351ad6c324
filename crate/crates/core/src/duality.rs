//! Forward tabular RL (TD(0), Q-learning) and its backward counterpart:
//! latent reconstruction by chained retrieval from memory.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::grid::{grid_rollout, Action, Cell, GridPolicy, GridWorld};
use crate::error::{MaiError, Result};
use crate::kernel::Kernel;
use crate::memory::TransitionMemory;
use crate::point::{ContextPoint, LatentPoint};
use crate::retrieval::{retrieve_adapt, soft_retrieve};
use crate::trajectory::Trajectory;

fn check_rates(alpha: f64, discount: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(MaiError::config(format!(
            "learning rate must lie in (0, 1], got {alpha}"
        )));
    }
    if !(0.0..1.0).contains(&discount) {
        return Err(MaiError::config(format!("discount must lie in [0, 1), got {discount}")));
    }
    Ok(())
}

fn check_index(what: &str, i: usize, n: usize) -> Result<()> {
    if i >= n {
        return Err(MaiError::input(format!("{what} index {i} out of range for {n}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularValue {
    pub values: Vec<f64>,
    pub alpha: f64,
    pub discount: f64,
}

impl TabularValue {
    pub fn new(states: usize, alpha: f64, discount: f64) -> Result<Self> {
        check_rates(alpha, discount)?;
        Ok(Self {
            values: vec![0.0; states],
            alpha,
            discount,
        })
    }

    pub fn set_alpha(&mut self, alpha: f64) -> Result<()> {
        check_rates(alpha, self.discount)?;
        self.alpha = alpha;
        Ok(())
    }

    /// V(s) ← V(s) + α(r + γV(s′) − V(s)); returns the TD error.
    /// `next = None` marks a terminal transition (V(s′) = 0).
    pub fn td0_update(&mut self, s: usize, r: f64, next: Option<usize>) -> Result<f64> {
        let n = self.values.len();
        check_index("state", s, n)?;
        let bootstrap = match next {
            Some(s2) => {
                check_index("next state", s2, n)?;
                self.values[s2]
            }
            None => 0.0,
        };
        let delta = r + self.discount * bootstrap - self.values[s];
        self.values[s] += self.alpha * delta;
        Ok(delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularQ {
    pub q: Vec<f64>,
    pub states: usize,
    pub actions: usize,
    pub alpha: f64,
    pub discount: f64,
}

impl TabularQ {
    pub fn new(states: usize, actions: usize, alpha: f64, discount: f64) -> Result<Self> {
        check_rates(alpha, discount)?;
        if actions == 0 {
            return Err(MaiError::config("Q table needs at least one action"));
        }
        Ok(Self {
            q: vec![0.0; states * actions],
            states,
            actions,
            alpha,
            discount,
        })
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.actions + a]
    }

    pub fn max_value(&self, s: usize) -> f64 {
        self.q[s * self.actions..(s + 1) * self.actions]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action; ties go to the lowest index.
    pub fn greedy(&self, s: usize) -> usize {
        let row = &self.q[s * self.actions..(s + 1) * self.actions];
        let mut best = 0;
        for (a, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    /// Q(s,a) ← (1−α)Q(s,a) + α(r + γ max_a′ Q(s′,a′)). At α = 1 this is the
    /// plain assignment Q(s,a) ← r + γ max_a′ Q(s′,a′).
    pub fn q_update(&mut self, s: usize, a: usize, r: f64, next: Option<usize>) -> Result<()> {
        check_index("state", s, self.states)?;
        check_index("action", a, self.actions)?;
        let bootstrap = match next {
            Some(s2) => {
                check_index("next state", s2, self.states)?;
                self.max_value(s2)
            }
            None => 0.0,
        };
        let target = r + self.discount * bootstrap;
        let i = s * self.actions + a;
        self.q[i] = if self.alpha == 1.0 {
            target
        } else {
            (1.0 - self.alpha) * self.q[i] + self.alpha * target
        };
        Ok(())
    }
}

/// Deterministic finite MDP. Terminal states have value 0 and no outgoing
/// reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    pub states: usize,
    pub actions: usize,
    /// next[s·A + a]
    pub next: Vec<usize>,
    /// reward[s·A + a], paid on taking `a` in `s`
    pub reward: Vec<f64>,
    pub terminal: Vec<bool>,
}

impl TabularMdp {
    pub fn new(states: usize, actions: usize, next: Vec<usize>, reward: Vec<f64>, terminal: Vec<bool>) -> Result<Self> {
        if next.len() != states * actions || reward.len() != states * actions || terminal.len() != states {
            return Err(MaiError::config("MDP tables have inconsistent sizes"));
        }
        if next.iter().any(|&s| s >= states) {
            return Err(MaiError::config("MDP transition leaves the state space"));
        }
        Ok(Self {
            states,
            actions,
            next,
            reward,
            terminal,
        })
    }

    /// Successor for TD targets: `None` when it is terminal.
    pub fn bootstrap_state(&self, s: usize, a: usize) -> Option<usize> {
        let n = self.next[s * self.actions + a];
        (!self.terminal[n]).then_some(n)
    }

    pub fn step(&self, s: usize, a: usize) -> (f64, usize) {
        (self.reward[s * self.actions + a], self.next[s * self.actions + a])
    }
}

/// Optimal state values by synchronous value iteration; returns (V*, sweeps).
pub fn value_iteration(mdp: &TabularMdp, discount: f64, tol: f64) -> Result<(Vec<f64>, usize)> {
    check_rates(1.0, discount)?;
    let mut v = vec![0.0; mdp.states];
    for sweep in 1..=100_000 {
        let mut change: f64 = 0.0;
        let mut next_v = v.clone();
        for s in 0..mdp.states {
            if mdp.terminal[s] {
                continue;
            }
            let best = (0..mdp.actions)
                .map(|a| {
                    let (r, n) = mdp.step(s, a);
                    r + discount * v[n]
                })
                .fold(f64::NEG_INFINITY, f64::max);
            change = change.max((best - v[s]).abs());
            next_v[s] = best;
        }
        v = next_v;
        if change <= tol {
            return Ok((v, sweep));
        }
    }
    Err(MaiError::invariant(
        "value iteration converges",
        "no convergence after 100000 sweeps",
    ))
}

/// Greedy policy with respect to `values`, ties to the lowest action.
pub fn greedy_policy(mdp: &TabularMdp, values: &[f64], discount: f64) -> Vec<usize> {
    (0..mdp.states)
        .map(|s| {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for a in 0..mdp.actions {
                let (r, n) = mdp.step(s, a);
                let q = r + discount * values[n];
                if q > best_v {
                    best = a;
                    best_v = q;
                }
            }
            best
        })
        .collect()
}

/// TD(0) evaluation of a fixed policy with exploring starts and per-state
/// learning rates α = visits^(−decay).
pub fn td0_evaluate<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &[usize],
    discount: f64,
    episodes: usize,
    max_steps: usize,
    decay: f64,
    rng: &mut R,
) -> Result<(TabularValue, usize)> {
    let mut table = TabularValue::new(mdp.states, 1.0, discount)?;
    let mut visits = vec![0u64; mdp.states];
    let mut updates = 0;
    let live: Vec<usize> = (0..mdp.states).filter(|&s| !mdp.terminal[s]).collect();
    if live.is_empty() {
        return Ok((table, 0));
    }
    for _ in 0..episodes {
        let mut s = live[rng.random_range(0..live.len())];
        for _ in 0..max_steps {
            let a = policy[s];
            let (r, n) = mdp.step(s, a);
            visits[s] += 1;
            table.set_alpha((visits[s] as f64).powf(-decay))?;
            table.td0_update(s, r, mdp.bootstrap_state(s, a))?;
            updates += 1;
            if mdp.terminal[n] {
                break;
            }
            s = n;
        }
    }
    Ok((table, updates))
}

/// Walks the suffix backwards from `last_successor` (the content following
/// its final step), chaining each reconstruction into the next query.
/// Returns estimates newest to oldest.
pub fn backward_reconstruct(
    store: &TransitionMemory,
    kernel: &Kernel,
    suffix: &Trajectory,
    last_successor: &LatentPoint,
) -> Result<Vec<LatentPoint>> {
    if suffix.is_empty() {
        return Err(MaiError::input("suffix must contain at least one step"));
    }
    let mut estimates = Vec::with_capacity(suffix.len());
    let mut successor = last_successor.clone();
    for step in suffix.steps().iter().rev() {
        successor = retrieve_adapt(store, &successor, &step.context, kernel)?.estimate;
        estimates.push(successor.clone());
    }
    Ok(estimates)
}

/// Mean distance between reconstructions and the suffix's true contents.
pub fn reconstruction_error(suffix: &Trajectory, estimates_newest_first: &[LatentPoint]) -> Result<f64> {
    if suffix.len() != estimates_newest_first.len() || suffix.is_empty() {
        return Err(MaiError::input("one estimate per suffix step is required"));
    }
    let total: f64 = suffix
        .steps()
        .iter()
        .rev()
        .zip(estimates_newest_first)
        .map(|(s, e)| s.content.distance(e))
        .sum();
    Ok(total / suffix.len() as f64)
}

/// E_Ψ[Σᵢ wᵢ(Ψ) rᵢ]: the mean over sampled contexts of the retrieval-weighted reward.
pub fn contextual_expected_reward(store: &TransitionMemory, kernel: &Kernel, contexts: &[ContextPoint]) -> Result<f64> {
    if contexts.is_empty() {
        return Err(MaiError::input("need at least one context sample"));
    }
    let mut outer = 0.0;
    for ctx in contexts {
        let res = soft_retrieve(store, ctx, kernel)?;
        let mut inner = 0.0;
        for (&i, &w) in res.matched_indices.iter().zip(&res.weights) {
            match store.entries()[i].reward {
                Some(r) => inner += w * r,
                None if w > 1e-12 => {
                    return Err(MaiError::Data(format!("entry {i} has no reward but weight {w}")));
                }
                None => {}
            }
        }
        outer += inner;
    }
    Ok(outer / contexts.len() as f64)
}

/// One checkpoint of the forward/backward comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub episodes: usize,
    /// max_s |max_a Q(s,a) − V*(s)|
    pub forward_value_error: f64,
    /// Mean reconstruction error over held-out suffixes; absent with an empty memory.
    pub backward_recon_error: Option<f64>,
    pub memory_size: usize,
    pub iterations_forward: usize,
    pub iterations_backward: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualitySettings {
    pub discount: f64,
    pub alpha: f64,
    pub max_episode_steps: usize,
    pub holdout_suffixes: usize,
    pub suffix_len: usize,
}

impl Default for DualitySettings {
    fn default() -> Self {
        Self {
            discount: 0.9,
            alpha: 0.5,
            max_episode_steps: 100,
            holdout_suffixes: 20,
            suffix_len: 5,
        }
    }
}

fn random_episode<R: Rng + ?Sized>(env: &GridWorld, max_steps: usize, rng: &mut R) -> Vec<(Cell, Action, Cell, f64)> {
    let mut out = Vec::new();
    let mut c = env.start();
    for _ in 0..max_steps {
        let a = Action::ALL[rng.random_range(0..4)];
        let n = env.step(c, a);
        let r = env.reward_on_entering(n);
        out.push((c, a, n, r));
        if env.is_terminal(n) {
            break;
        }
        c = n;
    }
    out
}

/// Random-behaviour Q-learning forward, logging every transition into a
/// memory that is then used to reconstruct held-out suffixes backward.
/// Reports one row per checkpoint (episode counts, ascending).
pub fn duality_experiment<R: Rng + ?Sized>(
    env: &GridWorld,
    kernel: &Kernel,
    checkpoints: &[usize],
    settings: &DualitySettings,
    rng: &mut R,
    holdout_rng: &mut R,
) -> Result<Vec<DualityReport>> {
    if checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(MaiError::input("checkpoints must be ascending"));
    }
    let mdp = env.mdp();
    let states = env.states();
    let (v_star, _) = value_iteration(&mdp, settings.discount, 1e-12)?;
    let mut q = TabularQ::new(mdp.states, 4, settings.alpha, settings.discount)?;
    let mut memory = TransitionMemory::new(env.context_dim(), 2)?;
    let holdout = (0..settings.holdout_suffixes)
        .map(|_| grid_rollout(env, GridPolicy::Random, settings.suffix_len + 1, holdout_rng))
        .collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::with_capacity(checkpoints.len());
    let mut episodes_done = 0;
    let mut updates = 0;
    let mut time = 0u64;
    for &target in checkpoints {
        while episodes_done < target {
            for (c, a, n, r) in random_episode(env, settings.max_episode_steps, rng) {
                let s = env.state_index(c).expect("open cell");
                let s2 = env.state_index(n).expect("open cell");
                q.q_update(s, a.index(), r, (!mdp.terminal[s2]).then_some(s2))?;
                updates += 1;
                memory.insert(
                    crate::memory::TransitionEntry::new(env.context(c, a), env.center(c), env.center(n), time)
                        .with_reward(r),
                )?;
                time += 1;
            }
            episodes_done += 1;
        }
        let forward_value_error = (0..states.len())
            .filter(|&s| !mdp.terminal[s])
            .map(|s| (q.max_value(s) - v_star[s]).abs())
            .fold(0.0, f64::max);
        let (backward_recon_error, iterations_backward) = if memory.is_empty() {
            (None, 0)
        } else {
            let mut total = 0.0;
            let mut calls = 0;
            for h in &holdout {
                let steps = &h.trajectory.steps()[..settings.suffix_len];
                let suffix = Trajectory::new(steps.to_vec())?;
                let last = &h.memory.entries()[settings.suffix_len - 1].successor;
                let est = backward_reconstruct(&memory, kernel, &suffix, last)?;
                calls += est.len();
                total += reconstruction_error(&suffix, &est)?;
            }
            (Some(total / holdout.len() as f64), calls)
        };
        reports.push(DualityReport {
            episodes: target,
            forward_value_error,
            backward_recon_error,
            memory_size: memory.len(),
            iterations_forward: updates,
            iterations_backward,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn td_examples() {
        let mut v = TabularValue::new(2, 1.0, 0.0).unwrap();
        v.td0_update(0, 1.0, Some(1)).unwrap();
        assert_eq!(v.values[0], 1.0);
        let mut v = TabularValue::new(2, 0.5, 0.9).unwrap();
        v.td0_update(0, 1.0, Some(1)).unwrap();
        assert_eq!(v.values[0], 0.5);
        let mut v = TabularValue::new(2, 0.5, 0.9).unwrap();
        v.values = vec![0.9 * 2.0, 2.0];
        v.td0_update(0, 0.0, Some(1)).unwrap();
        assert_eq!(v.values[0], 1.8);
        assert!(v.td0_update(2, 0.0, None).is_err());
    }

    #[test]
    fn q_examples() {
        let mut q = TabularQ::new(2, 2, 1.0, 0.5).unwrap();
        q.q_update(0, 1, 3.0, None).unwrap();
        assert_eq!(q.get(0, 1), 3.0);
        q.q[2] = 2.0;
        q.q_update(0, 0, 0.0, Some(1)).unwrap();
        assert_eq!(q.get(0, 0), 1.0);
        assert!(q.q_update(0, 2, 0.0, None).is_err());
    }

    #[test]
    fn greedy_ties_to_lowest() {
        let q = TabularQ::new(1, 3, 1.0, 0.5).unwrap();
        assert_eq!(q.greedy(0), 0);
    }

    #[test]
    fn rate_validation() {
        assert!(TabularValue::new(1, 0.0, 0.5).is_err());
        assert!(TabularValue::new(1, 0.5, 1.0).is_err());
    }
}
