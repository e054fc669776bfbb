//! Log-domain adaptive Gauss-Kronrod quadrature.
//!
//! Every integral in this crate has a strictly positive integrand whose
//! magnitude can span hundreds of decades, so callers hand in the natural
//! log of the integrand (already including any change-of-variables
//! Jacobian) and get back the log of the integral. Panels are evaluated
//! as `exp(g(x) - g_max)`, which is log-sum-exp accumulation with a
//! single shared shift.

use crate::error::{Error, Result};

/// Drop the integrand once it falls this many nats below its peak
/// (e^-46 is about 1e-20).
const TAIL_CUT: f64 = 46.0;
const MAX_PANELS: usize = 600;
const MAX_STEPS: usize = 256;
/// A log-integrand near `g` carries rounding noise of order `ε|g|`, which
/// bounds the relative accuracy any rule can reach.
const ROUNDING_FLOOR: f64 = 64.0 * f64::EPSILON;

#[rustfmt::skip]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[rustfmt::skip]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[rustfmt::skip]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of [`integrate_log`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogQuad {
    /// Natural log of the integral; `-inf` when the integral underflows to 0.
    pub log_value: f64,
    /// Estimated relative error of `exp(log_value)`.
    pub rel_err: f64,
    /// Number of integrand evaluations spent.
    pub evals: usize,
}

impl LogQuad {
    /// Absolute error estimate on the linear-scale value.
    pub fn abs_err(&self) -> f64 {
        self.rel_err * self.log_value.exp()
    }
}

/// Where the integrand peaks, if the caller knows.
#[derive(Debug, Clone, Copy)]
pub enum Peak {
    /// Exact location of the maximum of the log-integrand.
    Exact(f64),
    /// A starting guess; the peak is located by bracketing plus golden section.
    Near(f64),
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: Fn(f64) -> f64> Counted<F> {
    fn call(&mut self, x: f64) -> Result<f64> {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "log-integrand returned NaN at x = {x}"
            )));
        }
        Ok(v)
    }
}

/// Integrate `exp(log_f(x))` over `[lo, hi]`. Either limit may be infinite.
///
/// `log_f` must be unimodal (or at least have all its mass in one hump
/// reachable from `peak`). The tails are truncated where the integrand has
/// fallen `e^-46` below the peak.
pub fn integrate_log<F>(log_f: F, lo: f64, hi: f64, peak: Peak, tol: f64) -> Result<LogQuad>
where
    F: Fn(f64) -> f64,
{
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "empty integration range [{lo}, {hi}]"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let mut f = Counted { f: log_f, evals: 0 };

    let (xp, mut fp) = match peak {
        Peak::Exact(x) => {
            let x = x.clamp(lo, hi);
            (x, f.call(x)?)
        }
        Peak::Near(x) => locate_peak(&mut f, lo, hi, x.clamp(lo, hi))?,
    };
    if fp == f64::NEG_INFINITY {
        return Ok(LogQuad {
            log_value: f64::NEG_INFINITY,
            rel_err: 0.0,
            evals: f.evals,
        });
    }
    if fp == f64::INFINITY {
        return Err(Error::InvalidArgument(format!(
            "log-integrand is +inf at x = {xp}"
        )));
    }

    let step = initial_step(&mut f, lo, hi, xp, fp)?;
    let right = find_cutoff(&mut f, xp, hi, step, &mut fp)?;
    let left = find_cutoff(&mut f, xp, lo, -step, &mut fp)?;

    let mut panels: Vec<Panel> = Vec::with_capacity(32);
    for (a, b) in [(left, xp), (xp, right)] {
        if b > a {
            panels.push(gk15(&mut f, a, b, fp)?);
        }
    }
    if panels.is_empty() {
        // Degenerate: all the mass sits at one point of measure zero.
        return Ok(LogQuad {
            log_value: f64::NEG_INFINITY,
            rel_err: 0.0,
            evals: f.evals,
        });
    }

    let reachable = tol.max(ROUNDING_FLOOR * fp.abs());
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.err).sum();
        let target = reachable * total.abs();
        if err <= target || total == 0.0 {
            let rel = if total > 0.0 { err / total } else { 0.0 };
            return Ok(LogQuad {
                log_value: fp + total.ln(),
                rel_err: rel,
                evals: f.evals,
            });
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::QuadratureNonConvergence {
                log_estimate: fp + total.ln(),
                rel_err: err / total,
                tol,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, p)| if p.err > acc.1 { (i, p.err) } else { acc });
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            // Interval can no longer be split in floating point.
            return Err(Error::QuadratureNonConvergence {
                log_estimate: fp + total.ln(),
                rel_err: err / total,
                tol,
            });
        }
        panels.push(gk15(&mut f, p.a, mid, fp)?);
        panels.push(gk15(&mut f, mid, p.b, fp)?);
    }
}

/// One fixed 15-point Kronrod panel: `∫_a^b exp(log_f(x) - shift) dx`.
///
/// No adaptivity and no error control; meant for integrating a smooth
/// density between closely spaced knots.
pub fn kronrod15<F: Fn(f64) -> f64>(log_f: F, a: f64, b: f64, shift: f64) -> Result<f64> {
    let mut f = Counted { f: log_f, evals: 0 };
    Ok(gk15(&mut f, a, b, shift)?.value)
}

fn gk15<F: Fn(f64) -> f64>(f: &mut Counted<F>, a: f64, b: f64, shift: f64) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = (f.call(center)? - shift).exp();
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = (f.call(center - dx)? - shift).exp();
        let f2 = (f.call(center + dx)? - shift).exp();
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    if !value.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "integrand overflowed on [{a}, {b}]"
        )));
    }
    Ok(Panel { a, b, value, err })
}

/// Bracket the maximum by marching uphill, then refine with golden section.
fn locate_peak<F: Fn(f64) -> f64>(
    f: &mut Counted<F>,
    lo: f64,
    hi: f64,
    x0: f64,
) -> Result<(f64, f64)> {
    let mut x0 = x0;
    let mut f0 = f.call(x0)?;
    let mut h = 0.5;
    // Climb out of a region where the integrand underflows entirely.
    if f0 == f64::NEG_INFINITY {
        let mut found = false;
        for k in 0..64 {
            let d = h * 2f64.powi(k);
            for x in [x0 + d, x0 - d] {
                if x > lo && x < hi {
                    let v = f.call(x)?;
                    if v > f64::NEG_INFINITY {
                        x0 = x;
                        f0 = v;
                        found = true;
                        break;
                    }
                }
            }
            if found {
                break;
            }
        }
        if !found {
            return Ok((x0, f0));
        }
    }

    let xr = (x0 + h).min(hi);
    let xl = (x0 - h).max(lo);
    let fr = if xr > x0 { f.call(xr)? } else { f64::NEG_INFINITY };
    let fl = if xl < x0 { f.call(xl)? } else { f64::NEG_INFINITY };

    let (mut a, mut b, mut c) = (xl, x0, xr);
    let mut fb = f0;
    if fr > f0 && fr >= fl {
        a = x0;
        b = xr;
        fb = fr;
        loop {
            if b >= hi {
                return golden(f, a, hi, hi, fb);
            }
            h *= 2.0;
            c = (b + h).min(hi);
            let fc = f.call(c)?;
            if fc <= fb {
                break;
            }
            a = b;
            b = c;
            fb = fc;
        }
    } else if fl > f0 {
        c = x0;
        b = xl;
        fb = fl;
        loop {
            if b <= lo {
                return golden(f, lo, c, lo, fb);
            }
            h *= 2.0;
            a = (b - h).max(lo);
            let fa = f.call(a)?;
            if fa <= fb {
                break;
            }
            c = b;
            b = a;
            fb = fa;
        }
    }
    golden(f, a, c, b, fb)
}

fn golden<F: Fn(f64) -> f64>(
    f: &mut Counted<F>,
    mut a: f64,
    mut c: f64,
    best_x: f64,
    best_f: f64,
) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut bx, mut bf) = (best_x, best_f);
    let mut x1 = c - INV_PHI * (c - a);
    let mut x2 = a + INV_PHI * (c - a);
    let mut f1 = f.call(x1)?;
    let mut f2 = f.call(x2)?;
    for _ in 0..60 {
        if (c - a) <= 1e-5 * (1.0 + bx.abs()) {
            break;
        }
        if f1 >= f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - INV_PHI * (c - a);
            f1 = f.call(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (c - a);
            f2 = f.call(x2)?;
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > bf {
            bx = x;
            bf = v;
        }
    }
    Ok((bx, bf))
}

/// A step comparable to the width of the hump around the peak.
fn initial_step<F: Fn(f64) -> f64>(
    f: &mut Counted<F>,
    lo: f64,
    hi: f64,
    xp: f64,
    fp: f64,
) -> Result<f64> {
    let d = 1e-3 * (1.0 + xp.abs());
    let xr = xp + d;
    let xl = xp - d;
    let width = if xl > lo && xr < hi {
        let curv = (f.call(xr)? - 2.0 * fp + f.call(xl)?) / (d * d);
        if curv < 0.0 {
            (-curv).sqrt().recip()
        } else {
            1.0
        }
    } else {
        let x = if xr < hi { xr } else { xl };
        let slope = ((f.call(x)? - fp) / d).abs();
        if slope > 0.0 {
            slope.recip()
        } else {
            1.0
        }
    };
    Ok(width.clamp(1e-7, 1.0))
}

/// Walk from the peak towards `limit` with doubling steps until the
/// integrand drops below the tail cut. Raises `peak_f` if a higher value
/// turns up on the way.
fn find_cutoff<F: Fn(f64) -> f64>(
    f: &mut Counted<F>,
    xp: f64,
    limit: f64,
    step: f64,
    peak_f: &mut f64,
) -> Result<f64> {
    if xp == limit {
        return Ok(limit);
    }
    let forward = step > 0.0;
    let mut h = step;
    for _ in 0..MAX_STEPS {
        let mut x = xp + h;
        let at_limit = if forward { x >= limit } else { x <= limit };
        if at_limit {
            x = limit;
            if limit.is_infinite() {
                // Stepped to infinity without decay.
                return Err(Error::InvalidArgument(
                    "integrand does not decay towards an infinite limit".into(),
                ));
            }
        }
        let v = f.call(x)?;
        if v > *peak_f {
            *peak_f = v;
        }
        if v < *peak_f - TAIL_CUT || at_limit {
            return Ok(x);
        }
        h *= 2.0;
    }
    Err(Error::InvalidArgument(
        "integrand does not decay towards an infinite limit".into(),
    ))
}
