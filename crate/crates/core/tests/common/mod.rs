//! Reference values computed independently of the library.
//!
//! Everything here is plain double-exponential quadrature over the
//! defining integrals: no series, no recurrences, no shared code with
//! `ambient_detect`. Integrands are passed in log form so that densities
//! far below `f64::MIN_POSITIVE` still sum correctly.

#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

const T_SPAN: f64 = 4.5;

fn log_sum(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Halve the step until two successive sums agree to `rel`.
fn refine(rule: impl Fn(f64) -> f64, rel: f64) -> f64 {
    let mut h = 0.25;
    let mut prev = rule(h);
    for _ in 0..9 {
        h /= 2.0;
        let cur = rule(h);
        if (cur - prev).abs() <= rel.max(1e-15) {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// `ln ∫_a^∞ e^{log_f(x)} dx` by the exp-sinh rule `x = a + e^{π/2 sinh t}`.
pub fn log_integral_to_inf(log_f: impl Fn(f64) -> f64, a: f64, rel: f64) -> f64 {
    refine(
        |h| {
            let n = (T_SPAN / h) as i64;
            let terms: Vec<f64> = (-n..=n)
                .map(|k| {
                    let t = k as f64 * h;
                    let e = FRAC_PI_2 * t.sinh();
                    let x = a + e.exp();
                    let lf = log_f(x);
                    if lf.is_nan() {
                        f64::NEG_INFINITY
                    } else {
                        lf + e + (FRAC_PI_2 * t.cosh()).ln() + h.ln()
                    }
                })
                .collect();
            log_sum(&terms)
        },
        rel,
    )
}

/// `ln ∫_a^b e^{log_f(x)} dx` by the tanh-sinh rule.
pub fn log_integral_finite(log_f: impl Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    refine(
        |h| {
            let n = (4.2 / h) as i64;
            let terms: Vec<f64> = (-n..=n)
                .map(|k| {
                    let t = k as f64 * h;
                    let u = FRAC_PI_2 * t.sinh();
                    // Distance to the nearer end, kept accurate near ±1.
                    let gap = 1.0 / (u.abs().exp() * u.cosh());
                    let x = if t < 0.0 { a + half * gap } else { b - half * gap };
                    let x = if t == 0.0 { mid } else { x };
                    let w = FRAC_PI_2 * t.cosh() / (u.cosh() * u.cosh());
                    if x <= a || x >= b {
                        return f64::NEG_INFINITY;
                    }
                    let lf = log_f(x);
                    if lf.is_nan() {
                        f64::NEG_INFINITY
                    } else {
                        lf + (half * w * h).ln()
                    }
                })
                .collect();
            log_sum(&terms)
        },
        rel,
    )
}

/// `E_n(x) = ∫_1^∞ e^{-xs} s^{-n} ds`.
pub fn expint(n: u32, x: f64) -> f64 {
    log_integral_to_inf(|s| -x * s - n as f64 * s.ln(), 1.0, 1e-14).exp()
}

/// `K_ν(x) = ∫_0^∞ e^{-x cosh t} cosh(νt) dt`.
pub fn bessel_k(nu: u32, x: f64) -> f64 {
    log_integral_to_inf(
        |t| -x * t.cosh() + log_cosh(nu as f64 * t),
        0.0,
        1e-14,
    )
    .exp()
}

fn log_cosh(y: f64) -> f64 {
    let y = y.abs();
    y + (-2.0 * y).exp().ln_1p() - std::f64::consts::LN_2
}

/// `γ(s, x) = ∫_0^x t^{s-1} e^{-t} dt`.
pub fn lower_gamma(s: f64, x: f64) -> f64 {
    log_integral_finite(|t| (s - 1.0) * t.ln() - t, 0.0, x, 1e-14).exp()
}

/// `Γ(s, x) = ∫_x^∞ t^{s-1} e^{-t} dt`.
pub fn upper_gamma(s: f64, x: f64) -> f64 {
    log_integral_to_inf(|t| (s - 1.0) * t.ln() - t, x, 1e-14).exp()
}

/// `ln I_L(z; a, b) = ln ∫_a^∞ t^{-L} e^{-(z/t + t/b)} dt`.
pub fn log_il(z: f64, a: f64, b: f64, l: u32) -> f64 {
    log_integral_to_inf(|t| -(l as f64) * t.ln() - z / t - t / b, a, 1e-13)
}

pub fn il(z: f64, a: f64, b: f64, l: u32) -> f64 {
    log_il(z, a, b, l).exp()
}

/// Channel and signal variances for the mixture oracles.
#[derive(Debug, Clone, Copy)]
pub struct Link {
    pub s2: f64,
    pub st2: f64,
    pub tr2: f64,
    pub sr2: f64,
    pub w2: f64,
    pub alpha: f64,
    pub n: u32,
}

impl Link {
    pub fn from_params(p: &ambient_detect::channel::SystemParams) -> Self {
        Self {
            s2: p.sigma_s2,
            st2: p.sigma_st2,
            tr2: p.sigma_tr2,
            sr2: p.sigma_sr2,
            w2: p.sigma_w2,
            alpha: p.alpha,
            n: p.n_samples as u32,
        }
    }

    /// Variance of `h_sr + α h_st h_tr` given `|h_st|² = x`.
    fn conditional_var(&self, x: f64) -> f64 {
        self.sr2 + self.alpha * self.alpha * self.tr2 * x
    }

    /// `ln p(v | b=1)`: given `|h_st|² = x` the effective channel is CSCG,
    /// so `v` is exponential with mean `σ_sr² + α²σ_tr² x`; average over
    /// the exponential law of `x`.
    pub fn log_pdf_v1(&self, v: f64) -> f64 {
        log_integral_to_inf(
            |x| {
                let m = self.conditional_var(x);
                -x / self.st2 - self.st2.ln() - v / m - m.ln()
            },
            0.0,
            1e-13,
        )
    }

    /// `ln p(y | v)` for a vector of energy `z`: `(π u)^{-N} e^{-z/u}`.
    fn log_pdf_y_given_v(&self, z: f64, v: f64) -> f64 {
        let u = v * self.s2 + self.w2;
        -(self.n as f64) * (PI * u).ln() - z / u
    }

    /// `ln p(y | b=0) = ln ∫ p_V0(v) p(y | v) dv`.
    pub fn log_pdf_y0(&self, z: f64) -> f64 {
        log_integral_to_inf(
            |v| -v / self.sr2 - self.sr2.ln() + self.log_pdf_y_given_v(z, v),
            0.0,
            1e-13,
        )
    }

    /// `ln p(y | b=1)`, integrating over `x = |h_st|²` and then `v`.
    pub fn log_pdf_y1(&self, z: f64) -> f64 {
        log_integral_to_inf(
            |x| {
                let m = self.conditional_var(x);
                let inner = log_integral_to_inf(
                    |v| -v / m - m.ln() + self.log_pdf_y_given_v(z, v),
                    0.0,
                    1e-12,
                );
                -x / self.st2 - self.st2.ln() + inner
            },
            0.0,
            1e-12,
        )
    }

    /// `ln p(y | b=1)` with the direct path removed: `h = α h_st h_tr`.
    pub fn log_pdf_y1_sic(&self, z: f64) -> f64 {
        log_integral_to_inf(
            |x| {
                let m = self.alpha * self.alpha * self.tr2 * x;
                let inner = log_integral_to_inf(
                    |v| -v / m - m.ln() + self.log_pdf_y_given_v(z, v),
                    0.0,
                    1e-12,
                );
                -x / self.st2 - self.st2.ln() + inner
            },
            0.0,
            1e-12,
        )
    }

    /// BER of the energy detector that decides 1 iff `z > tau`.
    ///
    /// Given `v`, `z` is Gamma(N, u) so `P(z > τ | v) = e^{-τ/u} Σ_{k<N} (τ/u)^k/k!`.
    pub fn energy_detector_ber(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.5;
        }
        let tail = |v: f64| {
            let y = tau / (v * self.s2 + self.w2);
            let mut term = 1.0;
            let mut sum = 1.0;
            for k in 1..self.n {
                term *= y / k as f64;
                sum += term;
            }
            (-y).exp() * sum
        };
        let p01 = log_integral_to_inf(
            |v| -v / self.sr2 - self.sr2.ln() + tail(v).ln(),
            0.0,
            1e-12,
        )
        .exp();
        let p10 = log_integral_to_inf(
            |x| {
                let m = self.conditional_var(x);
                let miss = log_integral_to_inf(
                    |v| -v / m - m.ln() + (-tail(v)).ln_1p(),
                    0.0,
                    1e-12,
                );
                -x / self.st2 - self.st2.ln() + miss
            },
            0.0,
            1e-12,
        )
        .exp();
        0.5 * (p01 + p10)
    }
}

/// Largest |F_n − F| over sorted samples, given the model CDF at each.
pub fn ks_distance(cdf_at_sorted: &[f64]) -> f64 {
    let n = cdf_at_sorted.len() as f64;
    cdf_at_sorted
        .iter()
        .enumerate()
        .map(|(i, &f)| (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs()))
        .fold(0.0, f64::max)
}

/// Asymptotic one-sample KS critical value at level `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (n as f64).sqrt()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}
