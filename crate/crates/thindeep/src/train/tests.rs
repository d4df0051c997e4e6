use approx::assert_relative_eq;

use super::*;
use crate::error::Result;

#[test]
fn softplus_roundtrips() {
    for v in [1e-6, 0.01, 0.5, 1.0, 7.3, 42.0] {
        assert_relative_eq!(softplus(softplus_inv(v)), v, max_relative = 1e-12);
    }
    assert_relative_eq!(softplus_grad(0.0), 0.5, epsilon = 1e-14);
}

#[test]
fn param_vector_registry_roundtrips() {
    let mut pv = ParamVector::new();
    pv.push_group("alpha", &[1.0, 2.0]);
    pv.push_group("beta", &[3.0]);
    assert_eq!(pv.len(), 3);
    assert_eq!(pv.group("alpha").unwrap(), &[1.0, 2.0]);
    assert_eq!(pv.group("beta").unwrap(), &[3.0]);
    assert_eq!(pv.name_of(1), "alpha[1]");
    assert_eq!(pv.name_of(2), "beta[0]");
    let mask = pv.freeze_mask(&["beta".to_string()]).unwrap();
    assert_eq!(mask, vec![false, false, true]);
    assert!(pv.freeze_mask(&["gamma".to_string()]).is_err());

    let values = pv.values().to_vec();
    let mut pv2 = pv.clone();
    pv2.set_values(values.clone()).unwrap();
    assert_eq!(pv2.values(), &values[..]);
    assert!(pv2.set_values(vec![0.0]).is_err());
}

#[test]
fn adam_zero_gradient_keeps_parameters() {
    let mut pv = ParamVector::new();
    pv.push_group("w", &[1.0, -2.0]);
    let before = pv.values().to_vec();
    let mut state = AdamState::new(2);
    for _ in 0..10 {
        adam_step(&mut pv, &[0.0, 0.0], &mut state, 0.1, &[false, false]).unwrap();
    }
    assert_eq!(pv.values(), &before[..]);
}

#[test]
fn adam_constant_gradient_approaches_signed_step() {
    let mut pv = ParamVector::new();
    pv.push_group("w", &[0.0]);
    let mut state = AdamState::new(1);
    let mut prev = 0.0;
    let mut last_step = 0.0;
    for _ in 0..200 {
        adam_step(&mut pv, &[3.5], &mut state, 0.01, &[false]).unwrap();
        last_step = pv.values()[0] - prev;
        prev = pv.values()[0];
    }
    // |step| -> step_size * sign(g) asymptotically
    assert_relative_eq!(last_step, -0.01, max_relative = 1e-3);
}

#[test]
fn adam_rejects_non_finite_gradient_with_name() {
    let mut pv = ParamVector::new();
    pv.push_group("scale", &[1.0]);
    pv.push_group("shift", &[2.0]);
    let mut state = AdamState::new(2);
    let err = adam_step(&mut pv, &[0.0, f64::NAN], &mut state, 0.1, &[false, false]).unwrap_err();
    assert!(err.to_string().contains("shift[0]"), "{err}");
}

/// Quadratic bowl objective `-(x - c)^T A (x - c)` (maximized at `c`).
struct Bowl {
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl Objective for Bowl {
    fn eval(&self, params: &ParamVector) -> Result<ObjectiveEval> {
        let x = params.values();
        let mut value = 0.0;
        let mut grad = vec![0.0; x.len()];
        for i in 0..x.len() {
            let d = x[i] - self.center[i];
            value -= self.scale[i] * d * d;
            grad[i] = -2.0 * self.scale[i] * d;
        }
        Ok(ObjectiveEval {
            value,
            grad,
            terms: vec![],
        })
    }
}

#[test]
fn adam_converges_on_quadratic_bowl() {
    let bowl = Bowl {
        center: vec![1.5, -2.0, 0.25],
        scale: vec![1.0, 0.5, 2.0],
    };
    let mut init = ParamVector::new();
    init.push_group("x", &[0.0, 0.0, 0.0]);
    let schedule = Schedule::new(vec![Phase {
        epochs: 5000,
        step_size: 0.01,
        frozen: vec![],
    }])
    .unwrap();
    let out = fit(&bowl, init, &schedule).unwrap();
    assert!(out.aborted.is_none());
    for (got, want) in out.params.values().iter().zip(bowl.center.iter()) {
        assert!((got - want).abs() <= 1e-6, "{got} vs {want}");
    }
    // trace is finite everywhere and improves overall
    assert!(out.trace.iter().all(|r| r.value.is_finite()));
    assert!(out.trace.last().unwrap().value > out.trace[0].value);
}

#[test]
fn fit_zero_epochs_returns_initial_parameters() {
    let bowl = Bowl {
        center: vec![3.0],
        scale: vec![1.0],
    };
    let mut init = ParamVector::new();
    init.push_group("x", &[0.7]);
    let schedule = Schedule::new(vec![Phase {
        epochs: 0,
        step_size: 0.1,
        frozen: vec![],
    }])
    .unwrap();
    let out = fit(&bowl, init.clone(), &schedule).unwrap();
    assert_eq!(out.params.values(), init.values());
    assert!(out.trace.is_empty());
}

#[test]
fn fit_keeps_frozen_groups_bit_identical() {
    let bowl = Bowl {
        center: vec![1.0, -1.0],
        scale: vec![1.0, 1.0],
    };
    let mut init = ParamVector::new();
    init.push_group("x", &[0.2]);
    init.push_group("frozen_x", &[0.9]);
    let schedule = Schedule::new(vec![
        Phase {
            epochs: 200,
            step_size: 0.05,
            frozen: vec!["frozen_x".to_string()],
        },
        Phase {
            epochs: 200,
            step_size: 0.05,
            frozen: vec![],
        },
    ])
    .unwrap();
    let out = fit(&bowl, init, &schedule).unwrap();
    // frozen through phase 1, trained in phase 2: final close to -1
    assert!((out.params.values()[1] - -1.0).abs() <= 1e-3);
    // determinism: identical rerun
    let mut init2 = ParamVector::new();
    init2.push_group("x", &[0.2]);
    init2.push_group("frozen_x", &[0.9]);
    let out2 = fit(&bowl, init2, &schedule).unwrap();
    assert_eq!(out.params.values(), out2.params.values());
    let trace1: Vec<f64> = out.trace.iter().map(|r| r.value).collect();
    let trace2: Vec<f64> = out2.trace.iter().map(|r| r.value).collect();
    assert_eq!(trace1, trace2);
}

struct FrozenProbe;

impl Objective for FrozenProbe {
    fn eval(&self, params: &ParamVector) -> Result<ObjectiveEval> {
        let x = params.values();
        Ok(ObjectiveEval {
            value: -(x[0] * x[0]) - x[1] * x[1],
            grad: vec![-2.0 * x[0], -2.0 * x[1]],
            terms: vec![],
        })
    }
}

#[test]
fn frozen_values_do_not_move_within_phase() {
    let mut init = ParamVector::new();
    init.push_group("a", &[0.5]);
    init.push_group("b", &[0.25]);
    let schedule = Schedule::new(vec![Phase {
        epochs: 50,
        step_size: 0.1,
        frozen: vec!["b".to_string()],
    }])
    .unwrap();
    let out = fit(&FrozenProbe, init, &schedule).unwrap();
    assert_eq!(out.params.values()[1].to_bits(), 0.25f64.to_bits());
    assert!(out.params.values()[0].abs() < 0.5);
}

/// Objective that turns non-finite once the parameter crosses a threshold.
struct Cliff;

impl Objective for Cliff {
    fn eval(&self, params: &ParamVector) -> Result<ObjectiveEval> {
        let x = params.values()[0];
        let value = if x > 0.3 { f64::NAN } else { x };
        Ok(ObjectiveEval {
            value,
            grad: vec![1.0],
            terms: vec![],
        })
    }
}

#[test]
fn fit_aborts_on_non_finite_loss_with_last_good_parameters() {
    let mut init = ParamVector::new();
    init.push_group("x", &[0.0]);
    let schedule = Schedule::new(vec![Phase {
        epochs: 100,
        step_size: 0.05,
        frozen: vec![],
    }])
    .unwrap();
    let out = fit(&Cliff, init, &schedule).unwrap();
    match out.aborted {
        Some(Abort::NonFiniteLoss { .. }) => {}
        other => panic!("expected non-finite-loss abort, got {other:?}"),
    }
    // the returned parameters still evaluate finite
    let check = Cliff.eval(&out.params).unwrap();
    assert!(check.value.is_finite());
}

#[test]
fn default_schedule_matches_protocol() {
    let s = Schedule::default_three_phase();
    assert_eq!(s.total_epochs(), 7000);
    assert_eq!(s.phases[0].epochs, 500);
    assert_relative_eq!(s.phases[0].step_size, 0.1);
    assert!(s.phases[0].frozen.contains(&"noise_sq".to_string()));
    assert_eq!(s.phases[1].epochs, 1500);
    assert_relative_eq!(s.phases[1].step_size, 0.01);
    assert_eq!(s.phases[2].epochs, 5000);
    assert_relative_eq!(s.phases[2].step_size, 0.001);
    assert!(s.phases[2].frozen.is_empty());
}
