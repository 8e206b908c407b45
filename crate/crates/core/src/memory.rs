//! Replay memory and strategy parameters.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::sample::{Batch, Sample, SampleId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Classification,
    Regression,
}

/// Parameters shared by every selection strategy.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyConfig {
    pub capacity: usize,
    pub batch_size: usize,
    pub bandwidth: f64,
    pub temperature: f64,
    pub threshold: f64,
    pub seed: u64,
    pub k_pred: usize,
    pub k_out: usize,
    pub task: Task,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            capacity: 20_000,
            batch_size: 256,
            bandwidth: 0.1,
            temperature: 0.01,
            threshold: 0.1,
            seed: 0,
            k_pred: 21,
            k_out: 21,
            task: Task::Regression,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.capacity == 0 {
            return bad("capacity must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.batch_size > self.capacity {
            return Err(Error::CapacityTooSmallForOneBatch {
                capacity: self.capacity,
                batch: self.batch_size,
            });
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::NonPositiveBandwidth(self.bandwidth));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::NegativeTemperature(self.temperature));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} outside [0, 1]", self.threshold));
        }
        if self.k_pred == 0 || self.k_out == 0 {
            return bad("bin counts must be positive".into());
        }
        Ok(())
    }
}

/// Capacity-bounded sample store plus the batch set of the last training.
#[derive(Clone, Debug, Default)]
pub struct ReplayMemory {
    capacity: usize,
    samples: BTreeMap<SampleId, Sample>,
    pub(crate) batches: Vec<Batch>,
    pub(crate) last_train_batches: Vec<Batch>,
    /// Samples offered to the memory so far, including rejected ones.
    pub(crate) seen: u64,
    /// Value of `seen` when the memory first reached capacity.
    pub(crate) filled_at: Option<u64>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            ..Self::default()
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, id: SampleId) -> Option<&Sample> {
        self.samples.get(&id)
    }

    /// Samples in arrival order.
    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.samples.values()
    }

    pub fn batches(&self) -> &[Batch] {
        &self.batches
    }

    pub fn last_train_batches(&self) -> &[Batch] {
        &self.last_train_batches
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    /// Records the current batches as the reference set for the next RCI.
    pub fn remember_training(&mut self) {
        self.last_train_batches = self.batches.clone();
    }

    pub(crate) fn take_samples(&mut self) -> Vec<Sample> {
        std::mem::take(&mut self.samples).into_values().collect()
    }

    pub(crate) fn replace_contents(&mut self, samples: Vec<Sample>, batches: Vec<Batch>) {
        debug_assert!(samples.len() <= self.capacity);
        self.samples = samples.into_iter().map(|s| (s.arrival_index, s)).collect();
        self.batches = batches;
        if self.filled_at.is_none() && self.samples.len() >= self.capacity {
            self.filled_at = Some(self.seen);
        }
    }

    /// Checks the capacity bound and that every batch member is stored.
    pub fn check_invariants(&self) -> Result<()> {
        if self.samples.len() > self.capacity {
            return Err(Error::InvalidConfig(format!(
                "memory holds {} samples, capacity {}",
                self.samples.len(),
                self.capacity
            )));
        }
        let in_batches: usize = self.batches.iter().map(Batch::len).sum();
        if in_batches > self.capacity {
            return Err(Error::InvalidConfig(format!(
                "batches hold {in_batches} samples, capacity {}",
                self.capacity
            )));
        }
        for id in self.batches.iter().flat_map(|b| &b.sample_ids) {
            if !self.samples.contains_key(id) {
                return Err(Error::InvalidConfig(format!(
                    "batch member {id} missing from the store"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        StrategyConfig::default().validate().unwrap();
    }

    #[test]
    fn batch_larger_than_capacity_is_rejected() {
        let cfg = StrategyConfig {
            capacity: 10,
            batch_size: 11,
            ..StrategyConfig::default()
        };
        assert_eq!(
            cfg.validate(),
            Err(Error::CapacityTooSmallForOneBatch {
                capacity: 10,
                batch: 11
            })
        );
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let base = StrategyConfig::default();
        assert!(StrategyConfig { bandwidth: 0.0, ..base.clone() }.validate().is_err());
        assert!(StrategyConfig { temperature: -1.0, ..base.clone() }.validate().is_err());
        assert!(StrategyConfig { threshold: 1.5, ..base.clone() }.validate().is_err());
        assert!(StrategyConfig { capacity: 0, ..base }.validate().is_err());
    }
}
