//! The append-only transition store.

use serde::{Deserialize, Serialize};

use crate::error::{MaiError, Result};
use crate::point::{check_dim, ContextPoint, LatentPoint};

/// One stored transition: context Ψᵢ, content Φᵢ, the successor Φᵢ₊₁ produced
/// by the bootstrapping update, an optional reward and the step index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub context: ContextPoint,
    pub content: LatentPoint,
    pub successor: LatentPoint,
    pub reward: Option<f64>,
    pub time: u64,
}

impl TransitionEntry {
    pub fn new(context: ContextPoint, content: LatentPoint, successor: LatentPoint, time: u64) -> Self {
        Self {
            context,
            content,
            successor,
            reward: None,
            time,
        }
    }

    pub fn with_reward(mut self, reward: f64) -> Self {
        self.reward = Some(reward);
        self
    }
}

/// Memory M of prior transitions with fixed context dimension `k` and latent
/// dimension `d`. Entries are never modified once inserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMemory {
    context_dim: usize,
    latent_dim: usize,
    entries: Vec<TransitionEntry>,
}

impl TransitionMemory {
    pub fn new(context_dim: usize, latent_dim: usize) -> Result<Self> {
        if context_dim == 0 || latent_dim == 0 {
            return Err(MaiError::input("memory dimensions must be > 0"));
        }
        Ok(Self {
            context_dim,
            latent_dim,
            entries: Vec::new(),
        })
    }

    /// Appends an entry after checking its dimensions and reward.
    pub fn insert(&mut self, entry: TransitionEntry) -> Result<()> {
        check_dim("context", self.context_dim, entry.context.dim())?;
        check_dim("content", self.latent_dim, entry.content.dim())?;
        check_dim("successor", self.latent_dim, entry.successor.dim())?;
        if let Some(r) = entry.reward {
            if !r.is_finite() {
                return Err(MaiError::input(format!("reward {r} is not finite")));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Value-style insert: consumes the store and returns the grown one.
    pub fn with_entry(mut self, entry: TransitionEntry) -> Result<Self> {
        self.insert(entry)?;
        Ok(self)
    }

    pub fn context_dim(&self) -> usize {
        self.context_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TransitionEntry] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> Option<&TransitionEntry> {
        self.entries.get(index)
    }

    /// First `n` entries as a new store (used for memory-size sweeps).
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            context_dim: self.context_dim,
            latent_dim: self.latent_dim,
            entries: self.entries[..n.min(self.entries.len())].to_vec(),
        }
    }

    pub(crate) fn require_non_empty(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(MaiError::state("retrieval requires a non-empty memory"));
        }
        Ok(())
    }
}
