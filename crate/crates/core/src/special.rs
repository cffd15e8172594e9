//! Upper incomplete gamma values `Γ(b, α)` for integer orders `b >= -1`.
//!
//! Every evaluator in this crate that integrates against `e^{-v}` on
//! `[α, ∞)` goes through [`ScaledTailTable`], which stores `e^{α} Γ(b, α)`
//! in double-double precision together with an absolute error bound for each
//! entry. The scaling removes the `e^{α}` prefactor that would otherwise
//! overflow or cancel in the binomial sums.

use crate::dd::DoubleDouble;
use crate::error::{Error, Result};

/// Unit roundoff of double-double arithmetic (2^-104).
pub(crate) const DD_EPS: f64 = 4.93e-32;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `e^{x} E₁(x)` together with a bound on its relative error.
///
/// For `x >= 1` the classical continued fraction
/// `1 / (x + 1 - 1² / (x + 3 - 2² / (x + 5 - ...)))` is evaluated backward in
/// double-double, doubling the depth until two successive depths agree. For
/// `x < 1` the convergent power series is summed in `f64`; in that regime the
/// downstream binomial sums do not cancel, so `f64` accuracy is sufficient.
pub(crate) fn scaled_e1(x: f64) -> (DoubleDouble, f64) {
    debug_assert!(x > 0.0);
    if x >= 1.0 {
        let xd = DoubleDouble::from_f64(x);
        let eval = |depth: u32| {
            let mut t = DoubleDouble::ZERO;
            for k in (1..=depth).rev() {
                let kk = f64::from(k);
                let denom = xd + DoubleDouble::from_f64(2.0 * kk + 1.0) - t;
                t = DoubleDouble::from_f64(kk * kk) / denom;
            }
            DoubleDouble::ONE / (xd + DoubleDouble::ONE - t)
        };
        let mut depth = 64;
        let mut prev = eval(depth);
        loop {
            depth *= 2;
            let next = eval(depth);
            let diff = (next - prev).abs().to_f64() / next.to_f64();
            if diff < 1e-31 || depth >= 1 << 16 {
                return (next, diff.max(4.0 * DD_EPS));
            }
            prev = next;
        }
    } else {
        let mut term = 1.0;
        let mut sum = 0.0;
        let mut k = 1.0;
        loop {
            term *= -x / k;
            let add = -term / k;
            sum += add;
            if add.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
            k += 1.0;
        }
        let e1 = -EULER_GAMMA - x.ln() + sum;
        (DoubleDouble::from_f64(e1 * x.exp()), 8.0 * f64::EPSILON)
    }
}

/// Table of `e^{α} Γ(b, α)` for `b = -1, 0, 1, ..., b_max`.
#[derive(Clone, Debug)]
pub(crate) struct ScaledTailTable {
    alpha: f64,
    values: Vec<DoubleDouble>,
    errors: Vec<f64>,
}

impl ScaledTailTable {
    pub(crate) fn new(alpha: f64, b_max: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::domain(
                "tail_integral",
                format!("alpha must be finite and > 0, got {alpha}"),
            ));
        }
        let b_max = b_max.max(1);
        let (g, g_rel) = scaled_e1(alpha);
        let ad = DoubleDouble::from_f64(alpha);
        let g_abs = g.to_f64().abs() * g_rel;

        let mut values = Vec::with_capacity(b_max + 2);
        let mut errors = Vec::with_capacity(b_max + 2);
        // b = -1 from Γ(0, α) = -Γ(-1, α) + e^{-α}/α.
        values.push(DoubleDouble::ONE / ad - g);
        errors.push(g_abs + DD_EPS / alpha);
        // b = 0 is E₁.
        values.push(g);
        errors.push(g_abs);
        // b >= 1 by the upward recurrence Γ(b+1, α) = b Γ(b, α) + α^b e^{-α},
        // seeded at e^{α} Γ(1, α) = 1. All terms are positive.
        let mut current = DoubleDouble::ONE;
        let mut power = DoubleDouble::ONE;
        values.push(current);
        errors.push(0.0);
        for b in 1..b_max {
            power = power * ad;
            current = current * (b as f64) + power;
            values.push(current);
            errors.push(current.to_f64().abs() * DD_EPS * (b as f64 + 1.0));
        }
        Ok(Self {
            alpha,
            values,
            errors,
        })
    }

    #[inline]
    fn index(b: i32) -> usize {
        (b + 1) as usize
    }

    /// `e^{α} Γ(b, α)`.
    pub(crate) fn get(&self, b: i32) -> DoubleDouble {
        self.values[Self::index(b)]
    }

    /// Absolute error bound on [`Self::get`].
    pub(crate) fn error(&self, b: i32) -> f64 {
        self.errors[Self::index(b)]
    }

    pub(crate) fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// `∫_α^∞ v^{b-1} e^{-v} dv = Γ(b, α)` for integer `b >= -1`.
///
/// `b = 0` is the exponential integral `E₁(α)` and `b = -1` uses
/// `Γ(-1, α) = e^{-α}/α - E₁(α)`.
pub fn tail_integral(b: i32, alpha: f64) -> Result<f64> {
    if b < -1 {
        return Err(Error::Unsupported {
            op: "tail_integral",
            reason: format!("order b = {b} is below -1"),
        });
    }
    let table = ScaledTailTable::new(alpha, b.max(1) as usize)?;
    Ok(table.get(b).to_f64() * (-alpha).exp())
}

/// Exponential integral `E₁(x)` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    tail_integral(0, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn b_one_is_plain_exponential() {
        for &a in &[0.01, 0.5, 1.0, 7.5, 40.0] {
            assert_relative_eq!(tail_integral(1, a).unwrap(), (-a).exp(), max_relative = 1e-15);
        }
    }

    #[test]
    fn e1_at_one() {
        // mpmath: E1(1) = 0.219383934395520273677...
        assert_relative_eq!(exp_integral_e1(1.0).unwrap(), 0.219_383_934_395_520_27, max_relative = 1e-15);
    }

    #[test]
    fn negative_and_zero_orders() {
        // mpmath.gammainc references.
        assert_relative_eq!(tail_integral(-1, 0.3).unwrap(), 1.563_717_417_263_213, max_relative = 1e-14);
        assert_relative_eq!(tail_integral(-1, 2.5).unwrap(), 0.007_919_081_579_289_782_6, max_relative = 1e-14);
        assert_relative_eq!(tail_integral(0, 5.0).unwrap(), 0.001_148_295_591_275_325_8, max_relative = 1e-14);
    }

    #[test]
    fn positive_orders_follow_recurrence() {
        assert_relative_eq!(tail_integral(3, 0.5).unwrap(), 1.971_224_644_066_058_6, max_relative = 1e-15);
        assert_relative_eq!(tail_integral(7, 4.0).unwrap(), 640.314_735_550_146_9, max_relative = 1e-14);
    }

    #[test]
    fn series_and_fraction_agree_at_the_split() {
        let below = scaled_e1(1.0 - 1e-12).0.to_f64();
        let above = scaled_e1(1.0).0.to_f64();
        assert_relative_eq!(below, above, max_relative = 1e-11);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(tail_integral(1, 0.0), Err(Error::Domain { .. })));
        assert!(matches!(tail_integral(1, -2.0), Err(Error::Domain { .. })));
        assert!(matches!(tail_integral(-2, 1.0), Err(Error::Unsupported { .. })));
    }
}
