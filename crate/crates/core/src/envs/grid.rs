//! Deterministic gridworlds with walls and terminal reward cells.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::duality::TabularMdp;
use crate::error::{MaiError, Result};
use crate::memory::{TransitionEntry, TransitionMemory};
use crate::point::{ContextPoint, LatentPoint};
use crate::trajectory::{Trajectory, TrajectoryStep};

/// (x, y), with y growing upwards.
pub type Cell = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Up,
    Right,
    Down,
    Left,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Right, Action::Down, Action::Left];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }
}

/// A rectangle given by inclusive corners; its perimeter is walked
/// counter-clockwise starting at (x0, y0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl LoopRect {
    pub fn perimeter(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for x in self.x0..self.x1 {
            cells.push((x, self.y0));
        }
        for y in self.y0..self.y1 {
            cells.push((self.x1, y));
        }
        for x in (self.x0 + 1..=self.x1).rev() {
            cells.push((x, self.y1));
        }
        for y in (self.y0 + 1..=self.y1).rev() {
            cells.push((self.x0, y));
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridPolicy {
    Random,
    LoopFollowing(LoopRect),
}

/// Reward cells are terminal: entering one pays its reward and ends the episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridWorld {
    width: usize,
    height: usize,
    walls: BTreeSet<Cell>,
    rewards: BTreeMap<Cell, f64>,
    start: Cell,
}

impl GridWorld {
    pub fn new(
        width: usize,
        height: usize,
        walls: BTreeSet<Cell>,
        rewards: BTreeMap<Cell, f64>,
        start: Cell,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(MaiError::config("grid dimensions must be positive"));
        }
        let inside = |c: &Cell| c.0 < width && c.1 < height;
        if let Some(c) = walls.iter().chain(rewards.keys()).find(|c| !inside(c)) {
            return Err(MaiError::config(format!(
                "cell {c:?} lies outside the {width}x{height} grid"
            )));
        }
        if !inside(&start) || walls.contains(&start) {
            return Err(MaiError::config(format!(
                "start {start:?} must be an open cell inside the grid"
            )));
        }
        if let Some(c) = rewards.keys().find(|c| walls.contains(c)) {
            return Err(MaiError::config(format!("reward cell {c:?} is a wall")));
        }
        if rewards.values().any(|r| !r.is_finite()) {
            return Err(MaiError::config("rewards must be finite"));
        }
        let env = Self {
            width,
            height,
            walls,
            rewards,
            start,
        };
        let reachable = env.reachable_from(start);
        if !env.rewards.iter().any(|(c, &r)| r != 0.0 && reachable.contains(c)) {
            return Err(MaiError::config("no reward-bearing cell is reachable from the start"));
        }
        Ok(env)
    }

    /// Open grid with a single goal.
    pub fn open(width: usize, height: usize, goal: Cell, reward: f64, start: Cell) -> Result<Self> {
        Self::new(width, height, BTreeSet::new(), BTreeMap::from([(goal, reward)]), start)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn walls(&self) -> &BTreeSet<Cell> {
        &self.walls
    }

    pub fn rewards(&self) -> &BTreeMap<Cell, f64> {
        &self.rewards
    }

    pub fn is_open(&self, c: Cell) -> bool {
        c.0 < self.width && c.1 < self.height && !self.walls.contains(&c)
    }

    pub fn is_terminal(&self, c: Cell) -> bool {
        self.rewards.contains_key(&c)
    }

    /// Moving into a wall or off the grid leaves the agent in place.
    pub fn step(&self, c: Cell, action: Action) -> Cell {
        let next = match action {
            Action::Up => (c.0, c.1 + 1),
            Action::Right => (c.0 + 1, c.1),
            Action::Down if c.1 > 0 => (c.0, c.1 - 1),
            Action::Left if c.0 > 0 => (c.0 - 1, c.1),
            _ => c,
        };
        if self.is_open(next) {
            next
        } else {
            c
        }
    }

    pub fn reward_on_entering(&self, c: Cell) -> f64 {
        self.rewards.get(&c).copied().unwrap_or(0.0)
    }

    pub fn center(&self, c: Cell) -> LatentPoint {
        LatentPoint::new(vec![c.0 as f64 + 0.5, c.1 as f64 + 0.5]).expect("finite")
    }

    pub fn context_dim(&self) -> usize {
        self.width * self.height + 1
    }

    /// One-hot cell code followed by the action index.
    pub fn context(&self, c: Cell, action: Action) -> ContextPoint {
        let mut v = vec![0.0; self.context_dim()];
        v[c.1 * self.width + c.0] = 1.0;
        v[self.width * self.height] = action.index() as f64;
        ContextPoint::new(v).expect("finite")
    }

    /// Open cells in row-major order; these are the MDP states.
    pub fn states(&self) -> Vec<Cell> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .filter(|&c| self.is_open(c))
            .collect()
    }

    pub fn state_index(&self, c: Cell) -> Option<usize> {
        self.states().iter().position(|&s| s == c)
    }

    fn reachable_from(&self, from: Cell) -> BTreeSet<Cell> {
        let mut seen = BTreeSet::from([from]);
        let mut queue = VecDeque::from([from]);
        while let Some(c) = queue.pop_front() {
            if self.is_terminal(c) && c != from {
                continue;
            }
            for a in Action::ALL {
                let n = self.step(c, a);
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    pub fn mdp(&self) -> TabularMdp {
        let states = self.states();
        let index: BTreeMap<Cell, usize> = states.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut next = Vec::with_capacity(states.len() * 4);
        let mut reward = Vec::with_capacity(states.len() * 4);
        let mut terminal = Vec::with_capacity(states.len());
        for &c in &states {
            terminal.push(self.is_terminal(c));
            for a in Action::ALL {
                let n = self.step(c, a);
                next.push(index[&n]);
                reward.push(if self.is_terminal(c) {
                    0.0
                } else {
                    self.reward_on_entering(n)
                });
            }
        }
        TabularMdp::new(states.len(), 4, next, reward, terminal).expect("grid yields a consistent table")
    }

    fn check_loop(&self, rect: &LoopRect) -> Result<()> {
        if rect.x0 >= rect.x1 || rect.y0 >= rect.y1 {
            return Err(MaiError::config(format!("loop rectangle {rect:?} is degenerate")));
        }
        if let Some(c) = rect.perimeter().into_iter().find(|&c| !self.is_open(c)) {
            return Err(MaiError::config(format!(
                "loop cell {c:?} is blocked or outside the grid"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GridRollout {
    pub trajectory: Trajectory,
    pub memory: TransitionMemory,
    pub rewards: Vec<f64>,
    pub cells: Vec<Cell>,
    pub actions: Vec<Action>,
}

fn loop_action(rect: &LoopRect, c: Cell) -> Action {
    if c.1 == rect.y0 && c.0 < rect.x1 {
        Action::Right
    } else if c.0 == rect.x1 && c.1 < rect.y1 {
        Action::Up
    } else if c.1 == rect.y1 && c.0 > rect.x0 {
        Action::Left
    } else {
        Action::Down
    }
}

/// Rolls out `steps` transitions. Under the random policy, reaching a
/// terminal cell restarts the agent at the start cell; the loop policy
/// starts at the rectangle's first corner and ignores terminal cells.
pub fn grid_rollout<R: Rng + ?Sized>(
    env: &GridWorld,
    policy: GridPolicy,
    steps: usize,
    rng: &mut R,
) -> Result<GridRollout> {
    if steps == 0 {
        return Err(MaiError::input("grid rollout needs at least one step"));
    }
    let mut cell = match policy {
        GridPolicy::Random => env.start,
        GridPolicy::LoopFollowing(rect) => {
            env.check_loop(&rect)?;
            (rect.x0, rect.y0)
        }
    };
    let mut memory = TransitionMemory::new(env.context_dim(), 2)?;
    let mut traj = Vec::with_capacity(steps);
    let mut rewards = Vec::with_capacity(steps);
    let mut cells = Vec::with_capacity(steps);
    let mut actions = Vec::with_capacity(steps);
    for t in 0..steps {
        let action = match policy {
            GridPolicy::Random => Action::ALL[rng.random_range(0..4)],
            GridPolicy::LoopFollowing(rect) => loop_action(&rect, cell),
        };
        let next = env.step(cell, action);
        let moved = cell.0.abs_diff(next.0) + cell.1.abs_diff(next.1);
        if !env.is_open(next) || moved > 1 {
            return Err(MaiError::invariant("legal grid move", format!("{cell:?} -> {next:?}")));
        }
        let reward = env.reward_on_entering(next);
        let context = env.context(cell, action);
        memory.insert(
            TransitionEntry::new(context.clone(), env.center(cell), env.center(next), t as u64).with_reward(reward),
        )?;
        traj.push(TrajectoryStep {
            time: t as u64,
            context,
            content: env.center(cell),
        });
        rewards.push(reward);
        cells.push(cell);
        actions.push(action);
        cell = match policy {
            GridPolicy::Random if env.is_terminal(next) => env.start,
            _ => next,
        };
    }
    Ok(GridRollout {
        trajectory: Trajectory::new(traj)?,
        memory,
        rewards,
        cells,
        actions,
    })
}
