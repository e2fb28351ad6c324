//! Fixtures shared by the benchmarks.

use std::f64::consts::TAU;

use mai_core::envs::{Aliasing, RingEnv};
use mai_core::{PointCloud, TransitionMemory};

/// `n` evenly spaced points on a circle of the given radius.
pub fn circle_cloud(n: usize, radius: f64) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|i| {
                let a = TAU * i as f64 / n as f64;
                vec![radius * a.cos(), radius * a.sin()]
            })
            .collect(),
    )
    .expect("finite points")
}

/// Noise-free ring with `anchors` anchors and its one-lap memory.
pub fn ring_memory(anchors: usize) -> (RingEnv, TransitionMemory) {
    let env = RingEnv::new(1.0, anchors, 0.0, Aliasing::None).expect("valid ring");
    let memory = env.consolidated_memory().expect("ring memory");
    (env, memory)
}
