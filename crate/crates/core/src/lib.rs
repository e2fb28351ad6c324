//! Memory-amortized inference: kernel retrieval over a transition memory,
//! contractive bootstrapping and its fixed points, persistent homology of the
//! resulting trajectories, entropy estimators, tabular RL baselines and
//! synthetic environments.

pub mod bootstrap;
pub mod duality;
pub mod entropy;
pub mod envs;
pub mod error;
pub mod kernel;
pub mod memory;
pub mod point;
pub mod retrieval;
pub mod rng;
pub mod topology;
pub mod trajectory;

pub use bootstrap::{
    amortization_gap, bootstrap_step, composite_step, cycle_consistency_residual, fixed_point_iterate,
    poincare_compose, AmortizationReport, BootstrapConfig, IterationTrace, OracleSearch, PoincareResult, TargetMap,
};
pub use duality::{
    backward_reconstruct, contextual_expected_reward, duality_experiment, value_iteration, DualityReport, TabularMdp,
    TabularQ, TabularValue,
};
pub use entropy::{
    conditional_entropy, contextual_entropy_compare, entropy_report, hist_entropy, reversibility_bound_check, Binning,
    EntropyReport,
};
pub use error::{MaiError, Result};
pub use kernel::{kernel_weight, pair_distance, Kernel, KernelKind};
pub use memory::{TransitionEntry, TransitionMemory};
pub use point::{ContextPoint, LatentPoint};
pub use retrieval::{
    retract_to_cycle, retrieve_adapt, soft_retrieve, AffineRetriever, ExactRetriever, MemoryRetriever, RetrievalResult,
    Retriever,
};
pub use rng::{EngineRng, RngState};
pub use topology::{
    bottleneck_distance, build_rips, extract_cycle, is_nontrivial, persistence_z2, Barcode, CycleRepresentative,
    FilteredComplex, Interval, LoopTest, PointCloud,
};
pub use trajectory::{Trajectory, TrajectoryStep};
