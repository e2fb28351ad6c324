//! Synthetic environments: a noisy ring, gridworlds and a stack of glued patches.

pub mod grid;
pub mod ring;
pub mod stack;

pub use grid::{grid_rollout, Action, Cell, GridPolicy, GridRollout, GridWorld, LoopRect};
pub use ring::{ring_rollout, Aliasing, RingEnv};
pub use stack::{cocycle_defect, stack_run, AffineMap, GluingAtlas, PatchStack, StackRun};
