//! Gradient-variance identities for one-dimensional kernels with a scalar
//! lengthscale function `l(x)`. For a zero-mean GP `f` the variance of
//! `df/dx` at `x` equals the mixed second derivative of the kernel on the
//! diagonal, `d^2 k(a, b) / da db |_{a=b=x}`, which has a closed form for
//! each kernel family.

use crate::error::{Error, Result};

/// Kernel family for [`derivative_variance_1d`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeKernelKind {
    /// Stationary SE with constant lengthscale `l(x)`.
    StationarySe,
    /// Lengthscale-mixture kernel with field `l(x)^2`.
    LengthscaleMixture,
    /// Locally linear deformation kernel with `W(x) = 1 / l(x)`.
    Tdgp,
}

/// Variance of the GP gradient at `x` for a unit-variance kernel of the given
/// kind:
///
/// - stationary: `1 / l^2`
/// - lengthscale mixture: `(2 + l'(x)^2) / (2 l(x)^2)`
/// - deformation: `(l(x) - x l'(x))^2 / l(x)^4`
///
/// All three coincide with `1 / l(x)^2` when `l'(x) = 0`.
pub fn derivative_variance_1d(
    kind: DerivativeKernelKind,
    x: f64,
    l: &dyn Fn(f64) -> f64,
    l_prime: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    let lx = l(x);
    if !(lx > 0.0) || !lx.is_finite() {
        return Err(Error::invalid(format!(
            "lengthscale must be positive at x = {x}, got {lx}"
        )));
    }
    let lp = l_prime(x);
    Ok(match kind {
        DerivativeKernelKind::StationarySe => 1.0 / (lx * lx),
        DerivativeKernelKind::LengthscaleMixture => (2.0 + lp * lp) / (2.0 * lx * lx),
        DerivativeKernelKind::Tdgp => {
            let num = lx - x * lp;
            num * num / (lx * lx * lx * lx)
        }
    })
}

/// Evaluate the 1D kernel of the given kind at `(a, b)` for a scalar
/// lengthscale function. Used by the finite-difference checks of the
/// closed-form derivative variances.
pub fn kernel_1d(
    kind: DerivativeKernelKind,
    a: f64,
    b: f64,
    l: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    let la = l(a);
    let lb = l(b);
    if !(la > 0.0 && lb > 0.0) {
        return Err(Error::invalid("lengthscale must be positive"));
    }
    Ok(match kind {
        DerivativeKernelKind::StationarySe => {
            let d = a - b;
            (-0.5 * d * d / (la * la)).exp()
        }
        DerivativeKernelKind::LengthscaleMixture => {
            let la2 = la * la;
            let lb2 = lb * lb;
            let g = 0.5 * (la2 + lb2);
            let d = a - b;
            (la2.powf(0.25) * lb2.powf(0.25) / g.sqrt()) * (-0.5 * d * d / g).exp()
        }
        DerivativeKernelKind::Tdgp => {
            let d = a / la - b / lb;
            (-0.5 * d * d).exp()
        }
    })
}
