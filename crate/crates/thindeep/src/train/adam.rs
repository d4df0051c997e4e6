use super::ParamVector;
use crate::error::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// First/second moment estimates and the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        AdamState {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }
}

/// One Adam update (beta1 = 0.9, beta2 = 0.999, eps = 1e-8) on the
/// unconstrained parameters, descending along `grad`. Indices marked in
/// `frozen` keep both their value and their moments untouched. A non-finite
/// gradient entry aborts with the offending parameter's name.
pub fn adam_step(
    params: &mut ParamVector,
    grad: &[f64],
    state: &mut AdamState,
    step_size: f64,
    frozen: &[bool],
) -> Result<()> {
    let n = params.len();
    if grad.len() != n || state.m.len() != n || frozen.len() != n {
        return Err(Error::shape("adam_step: dimension mismatch"));
    }
    for (i, &g) in grad.iter().enumerate() {
        if !frozen[i] && !g.is_finite() {
            return Err(Error::NonFinite {
                what: "gradient",
                param: params.name_of(i),
            });
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);
    let values = params.values_mut();
    for i in 0..n {
        if frozen[i] {
            continue;
        }
        let g = grad[i];
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * g;
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        values[i] -= step_size * m_hat / (v_hat.sqrt() + EPS);
    }
    Ok(())
}
