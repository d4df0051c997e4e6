use log::info;

use super::adam::{adam_step, AdamState};
use super::{ParamVector, Schedule};
use crate::error::Result;

/// Value, gradient, and reportable terms of one objective evaluation.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    /// The quantity being *maximized* (the ELBO for GP models).
    pub value: f64,
    /// Gradient of `value` w.r.t. the unconstrained parameters.
    pub grad: Vec<f64>,
    /// Named diagnostic terms carried into the loss trace.
    pub terms: Vec<(&'static str, f64)>,
}

/// A differentiable training objective over a flat unconstrained vector.
pub trait Objective {
    fn eval(&self, params: &ParamVector) -> Result<ObjectiveEval>;
}

/// Per-epoch record of the loss trace.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: usize,
    pub step_size: f64,
    /// Objective value (ELBO) at the start of the epoch.
    pub value: f64,
    pub terms: Vec<(&'static str, f64)>,
}

/// Why a fit stopped before completing its schedule.
#[derive(Debug, Clone)]
pub enum Abort {
    NonFiniteLoss { epoch: usize },
    NonFiniteGradient { epoch: usize, detail: String },
}

/// Result of [`fit`]: final (or last good) parameters, the per-epoch trace,
/// and whether the run aborted early.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: ParamVector,
    pub trace: Vec<EpochRecord>,
    pub aborted: Option<Abort>,
}

/// Full-batch gradient ascent on `objective` under `schedule`. One epoch is
/// one full-batch Adam step. Adam moments are reset at phase boundaries;
/// frozen groups keep their values bit-identical across a phase. On a
/// non-finite loss or gradient the fit stops and returns the last parameters
/// that produced a finite loss.
pub fn fit(objective: &dyn Objective, init: ParamVector, schedule: &Schedule) -> Result<FitOutcome> {
    let mut params = init;
    let mut trace = Vec::with_capacity(schedule.total_epochs());
    let mut epoch = 0usize;
    for (phase_idx, phase) in schedule.phases.iter().enumerate() {
        let frozen = params.freeze_mask(&phase.frozen)?;
        let mut state = AdamState::new(params.len());
        info!(
            "phase {}: {} epochs at step size {} ({} frozen groups)",
            phase_idx + 1,
            phase.epochs,
            phase.step_size,
            phase.frozen.len()
        );
        let mut last_good = params.clone();
        for _ in 0..phase.epochs {
            let eval = objective.eval(&params)?;
            if !eval.value.is_finite() {
                return Ok(FitOutcome {
                    params: last_good,
                    trace,
                    aborted: Some(Abort::NonFiniteLoss { epoch }),
                });
            }
            trace.push(EpochRecord {
                epoch,
                phase: phase_idx,
                step_size: phase.step_size,
                value: eval.value,
                terms: eval.terms,
            });
            last_good = params.clone();
            // Ascent: Adam descends, so feed it the negated gradient.
            let neg_grad: Vec<f64> = eval.grad.iter().map(|g| -g).collect();
            if let Err(e) = adam_step(&mut params, &neg_grad, &mut state, phase.step_size, &frozen)
            {
                return Ok(FitOutcome {
                    params: last_good,
                    trace,
                    aborted: Some(Abort::NonFiniteGradient {
                        epoch,
                        detail: e.to_string(),
                    }),
                });
            }
            epoch += 1;
        }
    }
    Ok(FitOutcome {
        params,
        trace,
        aborted: None,
    })
}
