use serde::{Deserialize, Serialize};

use crate::error::{MaiError, Result};
use crate::point::{check_dim, ContextPoint, LatentPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub time: u64,
    pub context: ContextPoint,
    pub content: LatentPoint,
}

/// Time-indexed sequence of (Ψ_t, Φ_t) pairs with strictly increasing times.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn new(steps: Vec<TrajectoryStep>) -> Result<Self> {
        let mut trajectory = Trajectory::default();
        for step in steps {
            trajectory.push(step)?;
        }
        Ok(trajectory)
    }

    pub fn push(&mut self, step: TrajectoryStep) -> Result<()> {
        if let Some(last) = self.steps.last() {
            if step.time <= last.time {
                return Err(MaiError::input(format!(
                    "trajectory times must strictly increase ({} after {})",
                    step.time, last.time
                )));
            }
            check_dim("trajectory context", last.context.dim(), step.context.dim())?;
            check_dim("trajectory content", last.content.dim(), step.content.dim())?;
        }
        self.steps.push(step);
        Ok(())
    }

    /// Builds a trajectory with times 0, 1, 2, ...
    pub fn from_pairs(pairs: impl IntoIterator<Item = (ContextPoint, LatentPoint)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .enumerate()
                .map(|(t, (context, content))| TrajectoryStep {
                    time: t as u64,
                    context,
                    content,
                })
                .collect(),
        )
    }

    pub fn steps(&self) -> &[TrajectoryStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn contents(&self) -> impl Iterator<Item = &LatentPoint> {
        self.steps.iter().map(|s| &s.content)
    }

    pub fn contexts(&self) -> impl Iterator<Item = &ContextPoint> {
        self.steps.iter().map(|s| &s.context)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(t: u64, x: f64) -> TrajectoryStep {
        TrajectoryStep {
            time: t,
            context: ContextPoint::new(vec![x]).unwrap(),
            content: LatentPoint::new(vec![x, x]).unwrap(),
        }
    }

    #[test]
    fn times_must_increase() {
        assert!(Trajectory::new(vec![step(0, 0.0), step(2, 1.0)]).is_ok());
        assert!(Trajectory::new(vec![step(1, 0.0), step(1, 1.0)]).is_err());
        assert!(Trajectory::new(vec![step(3, 0.0), step(2, 1.0)]).is_err());
    }

    #[test]
    fn dimensions_must_agree() {
        let mut t = Trajectory::new(vec![step(0, 0.0)]).unwrap();
        let bad = TrajectoryStep {
            time: 1,
            context: ContextPoint::new(vec![0.0, 1.0]).unwrap(),
            content: LatentPoint::new(vec![0.0, 0.0]).unwrap(),
        };
        assert!(t.push(bad).is_err());
    }
}
