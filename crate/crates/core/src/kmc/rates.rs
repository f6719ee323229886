//! Davies weak-coupling rates for an Ohmic bath.

use crate::error::{Error, Result};
use crate::real::Real;

/// `γ(ω) = ω / (1 − e^{−βω})`, with `ω > 0` meaning energy released to the
/// bath. Evaluated through `expm1` so that both tails stay accurate: `γ → ω`
/// for `βω ≫ 1` and `γ → |ω| e^{−β|ω|}` for `βω ≪ −1`. At `ω = 0` the limit
/// `1/β` is returned.
pub fn davies_rate<T: Real>(omega: T, beta: T) -> Result<T> {
    if !(beta > T::zero()) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "inverse temperature must be positive and finite, got {beta}"
        )));
    }
    Ok(davies_rate_unchecked(omega, beta))
}

#[inline]
pub(crate) fn davies_rate_unchecked<T: Real>(omega: T, beta: T) -> T {
    let x = beta * omega;
    if x == T::zero() {
        beta.recip()
    } else if x > T::zero() {
        omega / -(-x).exp_m1()
    } else {
        omega * x.exp() / x.exp_m1()
    }
}
