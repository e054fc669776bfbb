//! The integral function
//!
//! ```text
//! I_L(z; a, b) = ∫_a^∞ t^{-L} exp(-(z/t + t/b)) dt
//! ```
//!
//! together with the special functions that describe its limits, series
//! and bounds. All evaluations are carried in log form: for the pole
//! orders and energies met in detection (L in the hundreds, z in the
//! thousands) the linear value is far outside `f64` range.

mod bessel;
mod expint;
mod gamma;

pub use bessel::{bessel_k, bessel_k01_scaled, log_bessel_k};
pub use expint::{gen_exp_integral, log_gen_exp_integral};
pub use gamma::{
    gamma_p, gamma_q, incomplete_gamma, ln_gamma, log_incomplete_gamma, GammaKind,
};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate_log, Peak};

/// Largest tolerance accepted by [`eval_log_il`].
pub const MAX_TOL: f64 = 1e-2;

/// Arguments of `I_L(z; a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ILArgs {
    pub z: f64,
    pub a: f64,
    pub b: f64,
    pub l: u32,
}

impl ILArgs {
    pub fn new(z: f64, a: f64, b: f64, l: u32) -> Result<Self> {
        let args = Self { z, a, b, l };
        args.validate()?;
        Ok(args)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z >= 0.0) {
            return Err(invalid(format!("I_L needs z >= 0, got {}", self.z)));
        }
        if !(self.a >= 0.0) || !self.a.is_finite() {
            return Err(invalid(format!("I_L needs finite a >= 0, got {}", self.a)));
        }
        if !(self.b > 0.0) {
            return Err(invalid(format!("I_L needs b > 0, got {}", self.b)));
        }
        if self.l < 1 {
            return Err(invalid("I_L needs L >= 1"));
        }
        if self.a == 0.0 && self.z == 0.0 {
            // ∫_0 t^{-L} dt diverges for every L >= 1.
            return Err(invalid("I_L(0; 0, b) diverges"));
        }
        Ok(())
    }
}

/// Log-domain value of `I_L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ILResult {
    /// ln I_L; `-inf` encodes the value 0.
    pub log_value: f64,
    /// Error estimate on the linear-scale value.
    pub est_abs_err: f64,
}

impl ILResult {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

/// Evaluate `ln I_L(z; a, b)` by adaptive quadrature over `s = ln t`.
///
/// In `s` the log-integrand `(1-L)s - z e^{-s} - e^{s}/b` is strictly
/// concave with a closed-form maximum, so the rule starts on the peak.
pub fn eval_log_il(args: ILArgs, tol: f64) -> Result<ILResult> {
    args.validate()?;
    if !(tol > 0.0 && tol <= MAX_TOL) {
        return Err(invalid(format!("tolerance {tol} outside (0, {MAX_TOL}]")));
    }
    if args.z == f64::INFINITY {
        return Ok(ILResult {
            log_value: f64::NEG_INFINITY,
            est_abs_err: 0.0,
        });
    }
    let q = log_il_quad(args.z, args.a, args.b, args.l, tol)?;
    Ok(ILResult {
        log_value: q.log_value,
        est_abs_err: q.abs_err(),
    })
}

/// Unchecked fast path used by the likelihood kernels.
pub(crate) fn log_il_quad(
    z: f64,
    a: f64,
    b: f64,
    l: u32,
    tol: f64,
) -> Result<crate::quadrature::LogQuad> {
    let lm1 = l as f64 - 1.0;
    let inv_b = 1.0 / b;
    let t_peak = 2.0 * z / (lm1 + (lm1 * lm1 + 4.0 * z * inv_b).sqrt());
    if a == 0.0 {
        let s_peak = if t_peak > 0.0 { t_peak.ln() } else { f64::NEG_INFINITY };
        return integrate_log(
            |s: f64| -lm1 * s - z * (-s).exp() - s.exp() * inv_b,
            f64::NEG_INFINITY,
            f64::INFINITY,
            Peak::Exact(s_peak),
            tol,
        );
    }
    // Measure s from ln a and write each exponential term relative to its
    // value at the peak. The constants come out of the integral exactly, so
    // a huge z/a or a/b does not drown the shape of the integrand in
    // rounding noise.
    let ln_a = a.ln();
    let x_peak = (t_peak / a).ln().max(0.0);
    let zp = z / a * (-x_peak).exp();
    let bp = a * inv_b * x_peak.exp();
    let mut q = integrate_log(
        |x: f64| {
            let d = x - x_peak;
            -lm1 * x - zp * (-d).exp_m1() - bp * d.exp_m1()
        },
        0.0,
        f64::INFINITY,
        Peak::Exact(x_peak),
        tol,
    )?;
    q.log_value += -lm1 * ln_a - zp - bp;
    Ok(q)
}

/// `ln I_L(0; a, b) = ln E_L(a/b) - (L-1) ln a`.
pub fn log_il_at_zero(a: f64, b: f64, l: u32) -> Result<f64> {
    if !(a > 0.0) {
        return Err(invalid("I_L(0; a, b) needs a > 0"));
    }
    Ok(log_gen_exp_integral(l, a / b)? - (l as f64 - 1.0) * a.ln())
}

/// `ln` of the closed form `2 (bz)^{-(L-1)/2} K_{L-1}(2 sqrt(z/b))`, which
/// is both the `a → 0` limit of `I_L` and an upper bound for every `a`.
pub fn log_il_bessel_form(z: f64, b: f64, l: u32) -> Result<f64> {
    if z == 0.0 {
        return Ok(f64::INFINITY);
    }
    let nu = l - 1;
    let x = 2.0 * (z / b).sqrt();
    Ok(2f64.ln() - 0.5 * nu as f64 * (b * z).ln() + log_bessel_k(nu, x)?)
}

/// `ln` of `γ(L-1, z/a) / z^{L-1}`, the `b → ∞` limit of `I_L` (L ≥ 2).
pub fn log_il_gamma_form(z: f64, a: f64, l: u32) -> Result<f64> {
    if l < 2 {
        return Ok(f64::INFINITY);
    }
    let s = l as f64 - 1.0;
    if z == 0.0 {
        // γ(s, x) ~ x^s / s
        return Ok(-s * a.ln() - s.ln());
    }
    Ok(log_incomplete_gamma(s, z / a, GammaKind::Lower)? - s * z.ln())
}

/// The three closed-form bounds on `I_L`, in log form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ILBounds {
    /// `e^{-z/a} E_L(a/b) / a^{L-1}`; `None` when `a = 0`.
    pub log_lower: Option<f64>,
    /// `e^{-a/b} γ(L-1, z/a) / z^{L-1}`; `+inf` for `L = 1`, `None` when `a = 0`.
    pub log_upper: Option<f64>,
    /// The Bessel-form bound; `+inf` at `z = 0`.
    pub log_bessel_upper: f64,
}

impl ILBounds {
    pub fn lower(&self) -> Option<f64> {
        self.log_lower.map(f64::exp)
    }

    pub fn upper(&self) -> Option<f64> {
        self.log_upper.map(f64::exp)
    }

    pub fn bessel_upper(&self) -> f64 {
        self.log_bessel_upper.exp()
    }

    /// The tighter of the two upper bounds, in log form.
    pub fn log_best_upper(&self) -> f64 {
        self.log_upper
            .map_or(self.log_bessel_upper, |u| u.min(self.log_bessel_upper))
    }
}

pub fn il_bounds(args: ILArgs) -> Result<ILBounds> {
    args.validate()?;
    let ILArgs { z, a, b, l } = args;
    let log_bessel_upper = log_il_bessel_form(z, b, l)?;
    if a == 0.0 {
        return Ok(ILBounds {
            log_lower: None,
            log_upper: None,
            log_bessel_upper,
        });
    }
    let log_lower = -z / a + log_il_at_zero(a, b, l)?;
    let log_upper = if l == 1 {
        f64::INFINITY
    } else {
        -a / b + log_il_gamma_form(z, a, l)?
    };
    Ok(ILBounds {
        log_lower: Some(log_lower),
        log_upper: Some(log_upper),
        log_bessel_upper,
    })
}

/// Partial sum of the Maclaurin series of `I_L` in `z`, without any
/// convergence check.
pub fn il_taylor_partial_sum(args: ILArgs, terms: u32) -> Result<f64> {
    Ok(taylor_terms(args, terms + 1)?.0)
}

/// Sum of the first `terms` terms of
/// `Σ (-1)^n E_{L+n}(a/b) z^n / (a^{L+n-1} n!)`.
///
/// Fails with [`Error::SeriesDivergence`] unless the first omitted term is
/// below `1e-12` of the partial sum (the alternating-series remainder).
pub fn il_taylor(args: ILArgs, terms: u32) -> Result<f64> {
    let (sum, next) = taylor_terms(args, terms + 1)?;
    if next.abs() >= 1e-12 * sum.abs() {
        return Err(Error::SeriesDivergence {
            last_term: next,
            partial_sum: sum,
        });
    }
    Ok(sum)
}

/// Returns (sum of the first `count - 1` terms, term number `count - 1`).
fn taylor_terms(args: ILArgs, count: u32) -> Result<(f64, f64)> {
    args.validate()?;
    if count < 2 {
        return Err(invalid("Taylor series needs at least one term"));
    }
    let ILArgs { z, a, b, l } = args;
    if a == 0.0 {
        return Err(invalid("Taylor series of I_L needs a > 0"));
    }
    let x = a / b;
    let mut sum = 0.0;
    let mut last = 0.0;
    for n in 0..count {
        let term = if n > 0 && z == 0.0 {
            0.0
        } else {
            let ln_mag = log_gen_exp_integral(l + n, x)? - (l + n - 1) as f64 * a.ln()
                + if n > 0 { n as f64 * z.ln() } else { 0.0 }
                - ln_gamma(n as f64 + 1.0);
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sign * ln_mag.exp()
        };
        if n + 1 == count {
            last = term;
        } else {
            sum += term;
        }
    }
    Ok((sum, last))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_at_zero_is_exponential_integral() {
        let r = eval_log_il(ILArgs::new(0.0, 1.0, 1.0, 1).unwrap(), 1e-10).unwrap();
        assert!((r.value() - 0.219_383_934_395_520_3).abs() < 1e-11);
    }

    #[test]
    fn infinite_energy_gives_zero() {
        let r = eval_log_il(ILArgs::new(f64::INFINITY, 1.0, 2.0, 3).unwrap(), 1e-8).unwrap();
        assert_eq!(r.log_value, f64::NEG_INFINITY);
    }

    #[test]
    fn invalid_arguments() {
        assert!(ILArgs::new(-1.0, 1.0, 1.0, 1).is_err());
        assert!(ILArgs::new(1.0, -1.0, 1.0, 1).is_err());
        assert!(ILArgs::new(1.0, 1.0, 0.0, 1).is_err());
        assert!(ILArgs::new(1.0, 1.0, 1.0, 0).is_err());
        assert!(ILArgs::new(0.0, 0.0, 1.0, 2).is_err());
        let ok = ILArgs::new(1.0, 1.0, 1.0, 1).unwrap();
        assert!(eval_log_il(ok, 0.0).is_err());
        assert!(eval_log_il(ok, 0.1).is_err());
    }

    #[test]
    fn upper_bound_infinite_for_unit_order() {
        let b = il_bounds(ILArgs::new(3.0, 1.0, 1.0, 1).unwrap()).unwrap();
        assert_eq!(b.log_upper, Some(f64::INFINITY));
    }

    #[test]
    fn lower_bound_exact_at_zero() {
        let args = ILArgs::new(0.0, 0.7, 2.5, 4).unwrap();
        let b = il_bounds(args).unwrap();
        let v = eval_log_il(args, 1e-12).unwrap();
        assert!((b.log_lower.unwrap() - v.log_value).abs() < 1e-11);
    }

    #[test]
    fn zero_lower_limit_only_has_bessel_bound() {
        let b = il_bounds(ILArgs::new(2.0, 0.0, 1.0, 3).unwrap()).unwrap();
        assert!(b.log_lower.is_none() && b.log_upper.is_none());
        assert!(b.log_bessel_upper.is_finite());
    }

    #[test]
    fn taylor_first_term_is_value_at_zero() {
        for z in [0.0, 0.3, 5.0] {
            let args = ILArgs::new(z, 1.3, 0.8, 2).unwrap();
            let s = il_taylor_partial_sum(args, 1).unwrap();
            let exact = log_il_at_zero(1.3, 0.8, 2).unwrap().exp();
            assert!((s - exact).abs() < 1e-14 * exact);
        }
        let at_zero = ILArgs::new(0.0, 1.3, 0.8, 2).unwrap();
        assert!(il_taylor(at_zero, 1).is_ok());
    }

    #[test]
    fn taylor_divergence_is_flagged() {
        let args = ILArgs::new(30.0, 1.0, 1.0, 2).unwrap();
        assert!(matches!(il_taylor(args, 4), Err(Error::SeriesDivergence { .. })));
    }
}
