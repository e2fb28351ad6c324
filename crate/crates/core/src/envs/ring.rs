//! Points on a circle observed through a (possibly aliased) context encoding.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bootstrap::TargetMap;
use crate::error::{MaiError, Result};
use crate::memory::{TransitionEntry, TransitionMemory};
use crate::point::{ContextPoint, LatentPoint};
use crate::topology::CycleRepresentative;
use crate::trajectory::{Trajectory, TrajectoryStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aliasing {
    None,
    /// θ and θ + π share a context.
    Antipodal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingEnv {
    pub radius: f64,
    pub n_anchor: usize,
    pub obs_noise: f64,
    pub aliasing: Aliasing,
}

impl RingEnv {
    pub fn new(radius: f64, n_anchor: usize, obs_noise: f64, aliasing: Aliasing) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(MaiError::config(format!("ring radius must be > 0, got {radius}")));
        }
        if n_anchor < 8 {
            return Err(MaiError::config(format!(
                "ring needs at least 8 anchors, got {n_anchor}"
            )));
        }
        if !(obs_noise >= 0.0) || !obs_noise.is_finite() {
            return Err(MaiError::config(format!(
                "observation noise must be >= 0, got {obs_noise}"
            )));
        }
        Ok(Self {
            radius,
            n_anchor,
            obs_noise,
            aliasing,
        })
    }

    /// radius·(cos θ, sin θ)
    pub fn content(&self, theta: f64) -> LatentPoint {
        LatentPoint::new(vec![self.radius * theta.cos(), self.radius * theta.sin()]).expect("finite angle")
    }

    pub fn clean_context(&self, theta: f64) -> ContextPoint {
        let folded = match self.aliasing {
            Aliasing::None => theta,
            Aliasing::Antipodal => 2.0 * theta,
        };
        ContextPoint::new(vec![folded.cos(), folded.sin()]).expect("finite angle")
    }

    pub fn observe<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> ContextPoint {
        let clean = self.clean_context(theta);
        if self.obs_noise == 0.0 {
            return clean;
        }
        let normal = Normal::new(0.0, self.obs_noise).expect("validated noise");
        ContextPoint::new(clean.coords().iter().map(|c| c + normal.sample(rng)).collect()).expect("finite noise")
    }

    pub fn anchor_step(&self) -> f64 {
        TAU / self.n_anchor as f64
    }

    pub fn anchor_angle(&self, i: usize) -> f64 {
        self.anchor_step() * (i % self.n_anchor) as f64
    }

    pub fn anchor_contexts(&self) -> Vec<ContextPoint> {
        (0..self.n_anchor)
            .map(|i| self.clean_context(self.anchor_angle(i)))
            .collect()
    }

    /// The anchors as a closed polygon.
    pub fn anchor_cycle(&self) -> Result<CycleRepresentative> {
        CycleRepresentative::new(
            (0..self.n_anchor).map(|i| self.content(self.anchor_angle(i))).collect(),
            0.0,
            0.0,
        )
    }

    /// One noise-free lap over the anchors.
    pub fn consolidated_memory(&self) -> Result<TransitionMemory> {
        let mut store = TransitionMemory::new(2, 2)?;
        for i in 0..self.n_anchor {
            store.insert(TransitionEntry::new(
                self.clean_context(self.anchor_angle(i)),
                self.content(self.anchor_angle(i)),
                self.content(self.anchor_angle(i + 1)),
                i as u64,
            ))?;
        }
        Ok(store)
    }

    /// Target that sends an anchor context to its anchor content.
    pub fn anchor_target(&self) -> Result<TargetMap> {
        TargetMap::cycle_lookup(self.anchor_contexts(), self.anchor_cycle()?)
    }
}

/// Walks θ_t = θ₀ + t·angular_step for `steps` steps, observing contexts with
/// noise, and stores each transition (Ψ_t, Φ_t, Φ_{t+1}).
pub fn ring_rollout<R: Rng + ?Sized>(
    env: &RingEnv,
    steps: usize,
    start_angle: f64,
    angular_step: f64,
    rng: &mut R,
) -> Result<(Trajectory, TransitionMemory)> {
    if steps == 0 {
        return Err(MaiError::input("ring rollout needs at least one step"));
    }
    if !start_angle.is_finite() || !angular_step.is_finite() {
        return Err(MaiError::input("ring angles must be finite"));
    }
    let mut store = TransitionMemory::new(2, 2)?;
    let mut steps_out = Vec::with_capacity(steps);
    for t in 0..steps {
        let theta = start_angle + t as f64 * angular_step;
        let context = env.observe(theta, rng);
        let content = env.content(theta);
        store.insert(TransitionEntry::new(
            context.clone(),
            content.clone(),
            env.content(theta + angular_step),
            t as u64,
        ))?;
        steps_out.push(TrajectoryStep {
            time: t as u64,
            context,
            content,
        });
    }
    Ok((Trajectory::new(steps_out)?, store))
}
