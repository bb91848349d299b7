//! Scalar root solves for the per-atom first-order condition
//! `F(v) = Σ_k w_k ψ'(v + a_k) = 1`.

use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp_weighted, Real};

const MAX_DOUBLINGS: usize = 200;
const MAX_NEWTON: usize = 200;

/// `(F(v), F'(v))`.
#[inline]
pub(crate) fn eval<T: Real>(div: &Divergence<T>, a: &[T], w: &[T], v: T) -> (T, T) {
    let mut f = T::zero();
    let mut df = T::zero();
    for (&ak, &wk) in a.iter().zip(w) {
        let y = v + ak;
        f += wk * div.psi_prime(y);
        df += wk * div.psi_second(y);
    }
    (f, df)
}

#[inline]
pub(crate) fn eval_value<T: Real>(div: &Divergence<T>, a: &[T], w: &[T], v: T) -> T {
    a.iter()
        .zip(w)
        .map(|(&ak, &wk)| wk * div.psi_prime(v + ak))
        .sum()
}

/// Closed-form root for the entropic kind: `v = 1 − log Σ_k w_k e^{a_k}`.
pub fn entropic_root<T: Real>(a: &[T], w: &[T]) -> T {
    T::one() - log_sum_exp_weighted(a, w)
}

/// Safeguarded root of `F(v) = 1`: geometric bracket expansion from `warm`,
/// then Newton steps kept inside the bracket, with bisection whenever Newton
/// leaves it or `F'` vanishes.
pub fn bracketed_root<T: Real>(
    div: &Divergence<T>,
    a: &[T],
    w: &[T],
    warm: T,
    root_tol: T,
) -> Result<T> {
    let one = T::one();
    let start = if warm.is_finite() {
        warm
    } else {
        let amax = a.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
        div.x0() - amax
    };
    let f0 = eval_value(div, a, w, start);
    if (f0 - one).abs() <= root_tol {
        return Ok(start);
    }
    let (mut lo, mut hi);
    let mut step = T::one();
    if f0 < one {
        lo = start;
        hi = start + step;
        let mut k = 0;
        while eval_value(div, a, w, hi) < one {
            lo = hi;
            step = step + step;
            hi = start + step;
            k += 1;
            if k > MAX_DOUBLINGS || !hi.is_finite() {
                return Err(Error::Numeric(
                    "root bracket expansion diverged upwards".into(),
                ));
            }
        }
    } else {
        hi = start;
        lo = start - step;
        let mut k = 0;
        while eval_value(div, a, w, lo) >= one {
            hi = lo;
            step = step + step;
            lo = start - step;
            k += 1;
            if k > MAX_DOUBLINGS || !lo.is_finite() {
                return Err(Error::Numeric(
                    "root bracket expansion diverged downwards".into(),
                ));
            }
        }
    }

    // F is nondecreasing with F(lo) < 1 <= F(hi). Start Newton from the upper
    // end: for convex ψ' the iterates then decrease monotonically to the root.
    let mut v = hi;
    let mut best = hi;
    let mut best_err = T::infinity();
    for _ in 0..MAX_NEWTON {
        let (f, df) = eval(div, a, w, v);
        let err = (f - one).abs();
        if err < best_err {
            best_err = err;
            best = v;
        }
        if err <= root_tol {
            return Ok(v);
        }
        if f > one {
            hi = v;
        } else {
            lo = v;
        }
        let width_floor = T::epsilon() * T::lit(4.0) * (T::one() + v.abs());
        if hi - lo <= width_floor {
            return Ok(best);
        }
        let mut next = if df > T::zero() {
            v - (f - one) / df
        } else {
            T::nan()
        };
        if !(next > lo && next < hi) {
            next = lo + (hi - lo) / T::lit(2.0);
        }
        if next == v {
            return Ok(best);
        }
        v = next;
    }
    Ok(best)
}
