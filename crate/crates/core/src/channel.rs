//! System parameters and synthesis of received symbols.
//!
//! The reader sees `y[n] = (h_sr + α b h_st h_tr) s[n] + w[n]` where every
//! channel coefficient is Rayleigh (CSCG) and `s`, `w` are white CSCG. One
//! fresh channel realization is drawn per symbol.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};

/// Deterministic per-trial random stream.
pub type TrialRng = ChaCha8Rng;

/// Stream for trial `index` under `master_seed`.
///
/// Each trial owns a distinct ChaCha stream, so the draws of trial `i` do
/// not depend on how trials are split across workers.
pub fn trial_rng(master_seed: u64, index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Channel and signal statistics. Variances are linear-scale powers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Ambient RF signal power σ_s².
    pub sigma_s2: f64,
    /// Source → tag channel variance σ_st².
    pub sigma_st2: f64,
    /// Tag → reader channel variance σ_tr².
    pub sigma_tr2: f64,
    /// Source → reader channel variance σ_sr².
    pub sigma_sr2: f64,
    /// Noise power σ_w².
    pub sigma_w2: f64,
    /// Scattering efficiency α. Zero models a tag that never reflects;
    /// the detectors need α > 0.
    pub alpha: f64,
    /// Samples per symbol N.
    pub n_samples: usize,
}

impl Default for SystemParams {
    /// All variances 1, α = 1, N = 10.
    fn default() -> Self {
        Self {
            sigma_s2: 1.0,
            sigma_st2: 1.0,
            sigma_tr2: 1.0,
            sigma_sr2: 1.0,
            sigma_w2: 1.0,
            alpha: 1.0,
            n_samples: 10,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let vars = [
            ("sigma_s2", self.sigma_s2),
            ("sigma_st2", self.sigma_st2),
            ("sigma_tr2", self.sigma_tr2),
            ("sigma_sr2", self.sigma_sr2),
            ("sigma_w2", self.sigma_w2),
        ];
        for (name, v) in vars {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.n_samples < 1 {
            return Err(invalid("n_samples must be at least 1"));
        }
        Ok(())
    }

    /// Like [`validate`](Self::validate) but also requires α > 0, which every
    /// likelihood and threshold needs.
    pub fn validate_for_detection(&self) -> Result<()> {
        self.validate()?;
        if !(self.alpha > 0.0) {
            return Err(invalid("detectors need alpha > 0"));
        }
        Ok(())
    }

    /// Variance of the backscatter product path, α² σ_st² σ_tr².
    pub fn product_gain(&self) -> f64 {
        self.alpha * self.alpha * self.sigma_st2 * self.sigma_tr2
    }

    pub fn n(&self) -> f64 {
        self.n_samples as f64
    }
}

/// SIR η₁, INR η₂ and SINR η.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkRatios {
    pub sir: f64,
    pub inr: f64,
    pub sinr: f64,
}

pub fn derive_ratios(params: &SystemParams) -> LinkRatios {
    let sir = params.product_gain() / params.sigma_sr2;
    let inr = params.sigma_sr2 * params.sigma_s2 / params.sigma_w2;
    LinkRatios {
        sir,
        inr,
        sinr: sir / (1.0 + 1.0 / inr),
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// One coherence-interval realization of the three channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDraw {
    pub h_st: Complex64,
    pub h_tr: Complex64,
    pub h_sr: Complex64,
    /// |h_sr|²
    pub v0: f64,
    /// |h_sr + α h_st h_tr|²
    pub v1: f64,
}

impl ChannelDraw {
    /// Effective channel for the given tag bit.
    pub fn effective(&self, alpha: f64, bit: u8) -> Complex64 {
        if bit == 0 {
            self.h_sr
        } else {
            self.h_sr + self.backscatter(alpha)
        }
    }

    /// The product path α h_st h_tr alone.
    pub fn backscatter(&self, alpha: f64) -> Complex64 {
        self.h_st * self.h_tr * alpha
    }
}

/// CN(0, σ²): independent real and imaginary parts of variance σ²/2.
pub fn sample_cscg<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

pub fn sample_channels<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> ChannelDraw {
    let h_st = sample_cscg(rng, params.sigma_st2);
    let h_tr = sample_cscg(rng, params.sigma_tr2);
    let h_sr = sample_cscg(rng, params.sigma_sr2);
    let h1 = h_sr + h_st * h_tr * params.alpha;
    ChannelDraw {
        h_st,
        h_tr,
        h_sr,
        v0: h_sr.norm_sqr(),
        v1: h1.norm_sqr(),
    }
}

/// Received vector for one tag symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolObservation {
    pub y: Vec<Complex64>,
    /// ‖y‖²
    pub z: f64,
    /// Energy of the same symbol with the direct source → reader path
    /// removed (ideal interference cancellation); what the SIC detector sees.
    pub z_cancelled: f64,
    pub truth_bit: u8,
}

/// Energies of a symbol without materializing `y`.
///
/// Consumes exactly the same random draws as [`synthesize_symbol`].
pub fn synthesize_energy<R: Rng + ?Sized>(
    params: &SystemParams,
    draw: &ChannelDraw,
    bit: u8,
    rng: &mut R,
) -> (f64, f64) {
    let mut z = 0.0;
    let mut z_c = 0.0;
    for_each_sample(params, draw, bit, rng, |y, y_c| {
        z += y.norm_sqr();
        z_c += y_c.norm_sqr();
    });
    (z, z_c)
}

/// One whole trial: an equiprobable bit, a fresh channel draw, then the
/// energies `(z, z_cancelled)`, consumed from `rng` in that order.
pub fn draw_symbol<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> (u8, f64, f64) {
    let bit = u8::from(rng.gen::<bool>());
    let draw = sample_channels(params, rng);
    let (z, z_c) = synthesize_energy(params, &draw, bit, rng);
    (bit, z, z_c)
}

pub fn synthesize_symbol<R: Rng + ?Sized>(
    params: &SystemParams,
    draw: &ChannelDraw,
    bit: u8,
    rng: &mut R,
) -> SymbolObservation {
    let mut y = Vec::with_capacity(params.n_samples);
    let mut z = 0.0;
    let mut z_c = 0.0;
    for_each_sample(params, draw, bit, rng, |sample, cancelled| {
        z += sample.norm_sqr();
        z_c += cancelled.norm_sqr();
        y.push(sample);
    });
    SymbolObservation {
        y,
        z,
        z_cancelled: z_c,
        truth_bit: bit,
    }
}

fn for_each_sample<R: Rng + ?Sized>(
    params: &SystemParams,
    draw: &ChannelDraw,
    bit: u8,
    rng: &mut R,
    mut sink: impl FnMut(Complex64, Complex64),
) {
    let h = draw.effective(params.alpha, bit);
    let g = if bit == 0 {
        Complex64::new(0.0, 0.0)
    } else {
        draw.backscatter(params.alpha)
    };
    for _ in 0..params.n_samples {
        let s = sample_cscg(rng, params.sigma_s2);
        let w = sample_cscg(rng, params.sigma_w2);
        sink(h * s + w, g * s + w);
    }
}
