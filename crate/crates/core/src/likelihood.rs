//! Log-densities of the channel gains and of the received vector.
//!
//! Every density of `y` depends on the observation only through its energy
//! `z = ‖y‖²`, so the functions here take `z` directly.
//!
//! The outer integrals over `u = vσ_s² + σ_w²` are taken in the variable
//! `r = ln(u - σ_w²)`, which moves the lower limit to `-∞` and removes the
//! logarithmic singularity of the K₀ kernel at `u = σ_w²`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::channel::SystemParams;
use crate::error::{invalid, Result};
use crate::lut::{self, Fallback, Kernel, LookupTable};
use crate::quadrature::{integrate_log, Peak};
use crate::special_fn::{self, log_bessel_k};

/// Tag hypothesis b ∈ {0, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    Absent,
    Present,
}

impl Hypothesis {
    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Self::Absent
        } else {
            Self::Present
        }
    }
}

/// Parameters plus the derived log-constants of both densities.
///
/// Immutable after construction and cheap to share across threads.
#[derive(Debug, Clone)]
pub struct LikelihoodContext {
    params: SystemParams,
    quad_tol: f64,
    inner_lut: Option<Arc<LookupTable>>,
    /// α² σ_st² σ_tr²
    product_gain: f64,
    log_k0: f64,
    log_k1: f64,
}

impl LikelihoodContext {
    pub fn new(params: SystemParams, quad_tol: f64) -> Result<Self> {
        params.validate_for_detection()?;
        if !(quad_tol > 0.0 && quad_tol <= special_fn::MAX_TOL) {
            return Err(invalid(format!(
                "quad_tol {quad_tol} outside (0, {}]",
                special_fn::MAX_TOL
            )));
        }
        let c = params.product_gain();
        let n = params.n();
        let interference = params.sigma_sr2 * params.sigma_s2;
        Ok(Self {
            params,
            quad_tol,
            inner_lut: None,
            product_gain: c,
            log_k0: params.sigma_w2 / interference - n * PI.ln() - interference.ln(),
            log_k1: params.sigma_sr2 / c - n * PI.ln() - (c * params.sigma_s2).ln(),
        })
    }

    /// Serve the inner `ln I_1(v; σ_sr², α²σ_st²σ_tr²)` from a prebuilt table.
    pub fn with_inner_lut(mut self, table: Arc<LookupTable>) -> Result<Self> {
        let expected = self.inner_kernel();
        if !table.kernel().same_definition(&expected) {
            return Err(invalid(format!(
                "inner table kernel {} does not match {}",
                table.kernel().id(),
                expected.id()
            )));
        }
        self.inner_lut = Some(table);
        Ok(self)
    }

    /// Build the table [`with_inner_lut`](Self::with_inner_lut) expects.
    ///
    /// The grid step is `σ_sr² / steps_per_sr2`. The grid extends until the
    /// Bessel-form bound, used as the fallback past the end, agrees with
    /// the quadrature value to a relative `1e-9`.
    pub fn build_inner_lut(&self, steps_per_sr2: f64) -> Result<LookupTable> {
        let a = self.params.sigma_sr2;
        let b = self.product_gain;
        let mut v_max = a;
        loop {
            let exact = special_fn::log_il_quad(v_max, a, b, 1, 1e-12)?.log_value;
            let bound = special_fn::log_il_bessel_form(v_max, b, 1)?;
            if bound - exact < 1e-9 || v_max > 1e7 * a {
                break;
            }
            v_max *= 1.5;
        }
        let delta = a / steps_per_sr2;
        lut::build_table(self.inner_kernel(), delta, v_max.max(2.0 * delta), Fallback::BesselBound)
    }

    /// The kernel an inner lookup table must wrap for this context.
    pub fn inner_kernel(&self) -> Kernel {
        Kernel::LogIl {
            a: self.params.sigma_sr2,
            b: self.product_gain,
            l: 1,
            tol: self.inner_tol(),
        }
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    pub fn inner_lut(&self) -> Option<&Arc<LookupTable>> {
        self.inner_lut.as_ref()
    }

    pub fn product_gain(&self) -> f64 {
        self.product_gain
    }

    /// ln K₀ of the b = 0 density.
    pub fn log_k0(&self) -> f64 {
        self.log_k0
    }

    /// ln K₁ of the b = 1 density.
    pub fn log_k1(&self) -> f64 {
        self.log_k1
    }

    fn inner_tol(&self) -> f64 {
        self.quad_tol / 10.0
    }

    /// `ln I_1(v; σ_sr², α²σ_st²σ_tr²)`, the kernel of the v₁ density.
    pub fn log_inner_i1(&self, v: f64) -> Result<f64> {
        if let Some(table) = &self.inner_lut {
            return table.lookup(v);
        }
        Ok(special_fn::log_il_quad(v, self.params.sigma_sr2, self.product_gain, 1, self.inner_tol())?
            .log_value)
    }

    /// `ln I_N(z; σ_w², σ_sr²σ_s²)`, the z-dependent part of the b = 0 density.
    pub fn log_il_b0(&self, z: f64) -> Result<f64> {
        check_energy(z)?;
        let p = &self.params;
        Ok(special_fn::log_il_quad(
            z,
            p.sigma_w2,
            p.sigma_sr2 * p.sigma_s2,
            p.n_samples as u32,
            self.quad_tol,
        )?
        .log_value)
    }

    /// `ln ∫_{σ_w²}^∞ u^{-N} e^{-z/u} I_1((u-σ_w²)/σ_s²; σ_sr², α²σ_st²σ_tr²) du`.
    pub fn log_outer_b1(&self, z: f64) -> Result<f64> {
        check_energy(z)?;
        let p = self.params;
        let n = p.n();
        let inv_s2 = 1.0 / p.sigma_s2;
        let integrand = |r: f64| {
            let w = r.exp();
            let u = p.sigma_w2 + w;
            match self.log_inner_i1(w * inv_s2) {
                Ok(inner) => r - n * u.ln() - z / u + inner,
                Err(_) => f64::NAN,
            }
        };
        let q = integrate_log(
            integrand,
            f64::NEG_INFINITY,
            f64::INFINITY,
            Peak::Near(self.outer_peak_hint(z)),
            self.quad_tol,
        )?;
        Ok(q.log_value)
    }

    /// `ln ∫_{σ_w²}^∞ u^{-N} e^{-z/u} K₀(2 sqrt((u-σ_w²)/(α²σ_st²σ_tr²σ_s²))) du`.
    pub fn log_outer_sic(&self, z: f64) -> Result<f64> {
        check_energy(z)?;
        let p = self.params;
        let n = p.n();
        let scale = 1.0 / (self.product_gain * p.sigma_s2);
        let integrand = |r: f64| {
            let w = r.exp();
            let u = p.sigma_w2 + w;
            let x = 2.0 * (w * scale).sqrt();
            // K₀(x) ~ -ln(x/2) - γ for tiny x; x = 0 only when w underflows.
            let k0 = if x > 0.0 {
                log_bessel_k(0, x).unwrap_or(f64::NAN)
            } else {
                f64::NEG_INFINITY
            };
            r - n * u.ln() - z / u + k0
        };
        let q = integrate_log(
            integrand,
            f64::NEG_INFINITY,
            f64::INFINITY,
            Peak::Near(self.outer_peak_hint(z)),
            self.quad_tol,
        )?;
        Ok(q.log_value)
    }

    /// Location (in `r`) of the maximum of `u^{-N} e^{-z/u}`.
    fn outer_peak_hint(&self, z: f64) -> f64 {
        let p = &self.params;
        let u = z / p.n();
        let w = (u - p.sigma_w2).max(0.1 * p.sigma_w2);
        w.ln()
    }
}

fn check_energy(z: f64) -> Result<()> {
    if !(z >= 0.0) {
        return Err(invalid(format!("energy must be >= 0, got {z}")));
    }
    Ok(())
}

/// Log-density of the channel gain v under each hypothesis.
pub fn log_pdf_v(v: f64, hypothesis: Hypothesis, ctx: &LikelihoodContext) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(invalid(format!("channel gain must be >= 0, got {v}")));
    }
    let s2 = ctx.params.sigma_sr2;
    match hypothesis {
        Hypothesis::Absent => Ok(-v / s2 - s2.ln()),
        Hypothesis::Present => {
            let c = ctx.product_gain;
            Ok(-c.ln() + s2 / c + ctx.log_inner_i1(v)?)
        }
    }
}

/// `ln p(y | b = 0) = ln K₀ + ln I_N(z; σ_w², σ_sr²σ_s²)`.
pub fn log_pdf_y_b0(z: f64, ctx: &LikelihoodContext) -> Result<f64> {
    Ok(ctx.log_k0 + ctx.log_il_b0(z)?)
}

/// `ln p(y | b = 1) = ln K₁ + ln ∫ u^{-N} e^{-z/u} I_1(·) du`.
pub fn log_pdf_y_b1(z: f64, ctx: &LikelihoodContext) -> Result<f64> {
    Ok(ctx.log_k1 + ctx.log_outer_b1(z)?)
}

pub fn log_pdf_y(z: f64, hypothesis: Hypothesis, ctx: &LikelihoodContext) -> Result<f64> {
    match hypothesis {
        Hypothesis::Absent => log_pdf_y_b0(z, ctx),
        Hypothesis::Present => log_pdf_y_b1(z, ctx),
    }
}

/// Densities once the direct path has been cancelled (σ_sr² → 0).
pub fn log_pdf_y_sic(z: f64, hypothesis: Hypothesis, ctx: &LikelihoodContext) -> Result<f64> {
    check_energy(z)?;
    let p = &ctx.params;
    let n = p.n();
    match hypothesis {
        Hypothesis::Absent => Ok(-z / p.sigma_w2 - n * (PI * p.sigma_w2).ln()),
        Hypothesis::Present => Ok(2f64.ln() - n * PI.ln() - (ctx.product_gain * p.sigma_s2).ln()
            + ctx.log_outer_sic(z)?),
    }
}

/// Converts a density of `y` to the density of `z = ‖y‖²`:
/// `ln p_Z(z) = ln p_Y + N ln π + (N-1) ln z - ln Γ(N)`.
pub fn log_density_of_energy(log_pdf_y: f64, z: f64, n_samples: usize) -> f64 {
    let n = n_samples as f64;
    let log_z_term = if n_samples == 1 {
        0.0
    } else if z == 0.0 {
        f64::NEG_INFINITY
    } else {
        (n - 1.0) * z.ln()
    };
    log_pdf_y + n * PI.ln() + log_z_term - special_fn::ln_gamma(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> LikelihoodContext {
        LikelihoodContext::new(SystemParams::default(), 1e-8).unwrap()
    }

    #[test]
    fn exponential_density_at_origin() {
        let p = SystemParams {
            sigma_sr2: 2.5,
            ..SystemParams::default()
        };
        let c = LikelihoodContext::new(p, 1e-8).unwrap();
        let v = log_pdf_v(0.0, Hypothesis::Absent, &c).unwrap();
        assert!((v + 2.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn sic_noise_only_peak() {
        let c = ctx();
        let v = log_pdf_y_sic(0.0, Hypothesis::Absent, &c).unwrap();
        assert!((v + 10.0 * PI.ln()).abs() < 1e-12);
    }

    #[test]
    fn densities_vanish_at_large_energy() {
        let c = ctx();
        let a = log_pdf_y_b0(1e6, &c).unwrap();
        let b = log_pdf_y_b1(1e6, &c).unwrap();
        assert!(a < -100.0 && b < -100.0);
        let far = log_pdf_y_b1(1e12, &c).unwrap();
        assert!(far.is_finite() && far < b);
    }

    #[test]
    fn zero_energy_is_finite() {
        let c = ctx();
        assert!(log_pdf_y_b0(0.0, &c).unwrap().is_finite());
        assert!(log_pdf_y_b1(0.0, &c).unwrap().is_finite());
        assert!(log_pdf_y_sic(0.0, Hypothesis::Present, &c).unwrap().is_finite());
        assert_eq!(log_density_of_energy(0.0, 0.0, 4), f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_negative_inputs() {
        let c = ctx();
        assert!(log_pdf_y_b0(-1.0, &c).is_err());
        assert!(log_pdf_v(-1.0, Hypothesis::Present, &c).is_err());
        assert!(LikelihoodContext::new(SystemParams::default(), 0.5).is_err());
        let p = SystemParams {
            alpha: 0.0,
            ..SystemParams::default()
        };
        assert!(LikelihoodContext::new(p, 1e-6).is_err());
    }
}
