//! Description of a multi-stage two-arm design and of the numerical settings
//! used to analyse it.

use serde::{Deserialize, Serialize};

use crate::edgeworth::ExpansionOrder;
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::policy::{clamped_binomial, CountLaw, Policy};
use crate::{lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSettings {
    pub order: ExpansionOrder,
    /// Drop the correction terms carrying `μ₅` and `μ₆`.
    pub reduced: bool,
}

impl Default for ExpansionSettings {
    fn default() -> Self {
        Self {
            order: ExpansionOrder::First,
            reduced: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsSettings<T> {
    pub draws: usize,
    /// Proposal covariance inflation `p > 1`.
    pub scale_p: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSettings {
    pub reps: usize,
}

/// A batched two-arm design under the null of no arm difference.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignConfig<T> {
    /// Batch size of each stage; the number of stages is `batch_sizes.len()`.
    pub batch_sizes: Vec<usize>,
    pub stage1_probs: [T; 2],
    /// Policy used at every stage after the first.
    pub later_policy: Policy<T>,
    /// Noise law per stage.
    pub noise: Vec<NoiseModel<T>>,
    pub min_arm_count: usize,
    pub expansion: ExpansionSettings,
    pub is: IsSettings<T>,
    pub mc: McSettings,
    pub seed: u64,
}

impl<T: Scalar> DesignConfig<T> {
    /// Two stages of `n` subjects with the given noise for both stages and
    /// default numerical settings.
    pub fn two_stage(n: usize, noise: NoiseModel<T>, stage1_probs: [T; 2], later_policy: Policy<T>) -> Self {
        Self {
            batch_sizes: vec![n, n],
            stage1_probs,
            later_policy,
            noise: vec![noise, noise],
            min_arm_count: 5,
            expansion: ExpansionSettings::default(),
            is: IsSettings {
                draws: 200_000,
                scale_p: lit(2.0),
            },
            mc: McSettings { reps: 500_000 },
            seed: 20_240_411,
        }
    }

    pub fn stages(&self) -> usize {
        self.batch_sizes.len()
    }

    /// Stage-1 behaves as a fixed policy.
    pub fn policy(&self, stage: usize) -> Policy<T> {
        if stage == 0 {
            Policy::Fixed {
                probs: self.stage1_probs,
            }
        } else {
            self.later_policy
        }
    }

    pub fn noise_for(&self, stage: usize) -> &NoiseModel<T> {
        &self.noise[stage.min(self.noise.len() - 1)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_sizes.is_empty() {
            return Err(Error::InvalidConfig("at least one stage is required".into()));
        }
        if self.noise.is_empty() || (self.noise.len() != 1 && self.noise.len() != self.stages()) {
            return Err(Error::InvalidConfig(format!(
                "noise must give one model or one per stage ({} stages, {} models)",
                self.stages(),
                self.noise.len()
            )));
        }
        for n in &self.batch_sizes {
            if *n < 2 * self.min_arm_count || *n < 3 {
                return Err(Error::InfeasibleDesign {
                    n: *n,
                    n_min: self.min_arm_count,
                });
            }
        }
        if self.min_arm_count == 0 {
            return Err(Error::InvalidConfig("min_arm_count must be at least 1".into()));
        }
        for (s, _) in self.batch_sizes.iter().enumerate() {
            self.policy(s).validate()?;
        }
        for m in &self.noise {
            m.validate()?;
        }
        if !(self.is.scale_p > T::one()) {
            return Err(Error::InvalidConfig(format!(
                "is.scale_p must exceed 1, got {}",
                self.is.scale_p
            )));
        }
        if self.is.draws == 0 {
            return Err(Error::InvalidConfig("is.draws must be positive".into()));
        }
        Ok(())
    }

    /// Count laws of stage `stage`, one per strategy label of its policy.
    pub fn count_laws(&self, stage: usize) -> Result<Vec<CountLaw<T>>> {
        let n = self.batch_sizes[stage];
        self.policy(stage)
            .strategies()
            .iter()
            .map(|s| clamped_binomial(n, s.probs[0], self.min_arm_count))
            .collect()
    }
}
