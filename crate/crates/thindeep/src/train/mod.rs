//! Gradient-based optimization: parameter flattening with softplus transforms
//! for positive quantities, Adam, and the three-phase schedule.

mod adam;
mod fit;

pub use adam::{adam_step, AdamState};
pub use fit::{fit, Abort, EpochRecord, FitOutcome, Objective, ObjectiveEval};

use std::ops::Range;

use crate::error::{Error, Result};

/// `softplus(u) = ln(1 + e^u)`, numerically stable for large |u|.
pub fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

/// Inverse of [`softplus`]: `v + ln(1 - e^{-v})` for `v > 0`.
pub fn softplus_inv(v: f64) -> f64 {
    debug_assert!(v > 0.0);
    if v > 30.0 {
        v
    } else {
        v + (-(-v).exp()).ln_1p()
    }
}

/// Derivative of [`softplus`], the logistic sigmoid.
pub fn softplus_grad(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Flattened view of all unconstrained trainable parameters with a name
/// registry. Groups are contiguous index ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    groups: Vec<(String, Range<usize>)>,
}

impl ParamVector {
    pub fn new() -> Self {
        ParamVector {
            values: Vec::new(),
            groups: Vec::new(),
        }
    }

    /// Append a named group of unconstrained values.
    pub fn push_group(&mut self, name: &str, values: &[f64]) {
        let start = self.values.len();
        self.values.extend_from_slice(values);
        self.groups
            .push((name.to_string(), start..self.values.len()));
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn set_values(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::shape("ParamVector: value length changed"));
        }
        self.values = values;
        Ok(())
    }

    pub fn group(&self, name: &str) -> Option<&[f64]> {
        self.groups
            .iter()
            .find(|(g, _)| g == name)
            .map(|(_, r)| &self.values[r.clone()])
    }

    pub fn group_range(&self, name: &str) -> Option<Range<usize>> {
        self.groups
            .iter()
            .find(|(g, _)| g == name)
            .map(|(_, r)| r.clone())
    }

    pub fn group_names(&self) -> impl Iterator<Item = &str> {
        self.groups.iter().map(|(g, _)| g.as_str())
    }

    /// Name of the group owning a flat index (for error messages).
    pub fn name_of(&self, idx: usize) -> String {
        for (name, range) in &self.groups {
            if range.contains(&idx) {
                return format!("{name}[{}]", idx - range.start);
            }
        }
        format!("<unregistered:{idx}>")
    }

    /// Boolean mask marking every index of any group in `frozen`.
    pub fn freeze_mask(&self, frozen: &[String]) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.values.len()];
        for name in frozen {
            let range = self
                .group_range(name)
                .ok_or_else(|| Error::Config(format!("unknown frozen parameter `{name}`")))?;
            for b in &mut mask[range] {
                *b = true;
            }
        }
        Ok(mask)
    }
}

impl Default for ParamVector {
    fn default() -> Self {
        Self::new()
    }
}

/// One training phase: epoch count, Adam step size, and parameter groups to
/// hold fixed.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Phase {
    pub epochs: usize,
    pub step_size: f64,
    pub frozen: Vec<String>,
}

/// An ordered list of phases.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Schedule {
    pub phases: Vec<Phase>,
}

impl Schedule {
    pub fn new(phases: Vec<Phase>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::Config("schedule needs at least one phase".into()));
        }
        for (i, p) in phases.iter().enumerate() {
            if !(p.step_size > 0.0) || !p.step_size.is_finite() {
                return Err(Error::Config(format!(
                    "phase {i}: step size must be positive"
                )));
            }
        }
        Ok(Schedule { phases })
    }

    /// The default three-phase schedule: 500 epochs at 0.1 and 1500 at 0.01
    /// with the likelihood variance held at its initial value, then 5000 at
    /// 0.001 with the likelihood variance trainable.
    pub fn default_three_phase() -> Self {
        let noise = vec!["noise_sq".to_string()];
        Schedule {
            phases: vec![
                Phase {
                    epochs: 500,
                    step_size: 0.1,
                    frozen: noise.clone(),
                },
                Phase {
                    epochs: 1500,
                    step_size: 0.01,
                    frozen: noise,
                },
                Phase {
                    epochs: 5000,
                    step_size: 0.001,
                    frozen: vec![],
                },
            ],
        }
    }

    pub fn total_epochs(&self) -> usize {
        self.phases.iter().map(|p| p.epochs).sum()
    }
}

#[cfg(test)]
mod tests;
