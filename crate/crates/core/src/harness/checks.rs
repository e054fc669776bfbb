//! Self-consistency checks behind the `pdfcheck` and `selftest` commands.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use super::sweep::{prepare_bank, tally_trials, BerEstimate};
use super::config::{LutSettings, SweepVariable};
use crate::channel::{derive_ratios, sample_channels, synthesize_energy, trial_rng, SystemParams};
use crate::detectors::{decide, thresholds, DetectorBank, DetectorId};
use crate::error::Result;
use crate::likelihood::{
    log_density_of_energy, log_pdf_v, log_pdf_y, log_pdf_y_sic, Hypothesis, LikelihoodContext,
};
use crate::quadrature::{integrate_log, kronrod15, Peak};
use crate::special_fn::{self, il_bounds, ILArgs};

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(name: impl Into<String>, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

fn mean_gain(params: &SystemParams, hypothesis: Hypothesis) -> f64 {
    match hypothesis {
        Hypothesis::Absent => params.sigma_sr2,
        Hypothesis::Present => params.sigma_sr2 + params.product_gain(),
    }
}

/// `∫ p_V1(v) dv`.
pub fn mass_of_v1(ctx: &LikelihoodContext) -> Result<f64> {
    let hint = mean_gain(ctx.params(), Hypothesis::Present).ln();
    let q = integrate_log(
        |s| log_pdf_v(s.exp(), Hypothesis::Present, ctx).map_or(f64::NAN, |l| l + s),
        f64::NEG_INFINITY,
        f64::INFINITY,
        Peak::Near(hint),
        ctx.quad_tol(),
    )?;
    Ok(q.log_value.exp())
}

/// `ln p_Z(z)` for the plain or the interference-free model.
pub fn log_energy_density(ctx: &LikelihoodContext, hypothesis: Hypothesis, sic: bool, z: f64) -> Result<f64> {
    let log_y = if sic {
        log_pdf_y_sic(z, hypothesis, ctx)?
    } else {
        log_pdf_y(z, hypothesis, ctx)?
    };
    Ok(log_density_of_energy(log_y, z, ctx.params().n_samples))
}

fn energy_hint(params: &SystemParams, hypothesis: Hypothesis, sic: bool) -> f64 {
    let gain = match (sic, hypothesis) {
        (true, Hypothesis::Absent) => 0.0,
        (true, Hypothesis::Present) => params.product_gain(),
        (false, h) => mean_gain(params, h),
    };
    (params.n() * (gain * params.sigma_s2 + params.sigma_w2)).ln()
}

/// `∫_0^hi p_Z(z) dz`, `hi` possibly infinite.
pub fn energy_mass(ctx: &LikelihoodContext, hypothesis: Hypothesis, sic: bool, hi: f64) -> Result<f64> {
    if hi <= 0.0 {
        return Ok(0.0);
    }
    let hint = energy_hint(ctx.params(), hypothesis, sic);
    let q = integrate_log(
        |s| log_energy_density(ctx, hypothesis, sic, s.exp()).map_or(f64::NAN, |l| l + s),
        f64::NEG_INFINITY,
        hi.ln(),
        Peak::Near(hint),
        ctx.quad_tol(),
    )?;
    Ok(q.log_value.exp())
}

/// `F_Z` at every point of the sorted slice `points`.
///
/// The CDF is integrated exactly at every `stride`-th point and linearly
/// interpolated in between.
pub fn energy_cdf(
    ctx: &LikelihoodContext,
    hypothesis: Hypothesis,
    sic: bool,
    points: &[f64],
    stride: usize,
) -> Result<Vec<f64>> {
    let stride = stride.max(1);
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let mut knots: Vec<usize> = (0..points.len()).step_by(stride).collect();
    if *knots.last().unwrap() != points.len() - 1 {
        knots.push(points.len() - 1);
    }
    let mut knot_cdf = Vec::with_capacity(knots.len());
    let mut cdf = energy_mass(ctx, hypothesis, sic, points[knots[0]])?;
    knot_cdf.push(cdf);
    for w in knots.windows(2) {
        let (a, b) = (points[w[0]], points[w[1]]);
        if b > a {
            cdf += kronrod15(
                |z| log_energy_density(ctx, hypothesis, sic, z).unwrap_or(f64::NAN),
                a,
                b,
                0.0,
            )?;
        }
        knot_cdf.push(cdf);
    }
    let mut out = Vec::with_capacity(points.len());
    for (k, w) in knots.windows(2).enumerate() {
        let (i0, i1) = (w[0], w[1]);
        let (x0, x1) = (points[i0], points[i1]);
        let (f0, f1) = (knot_cdf[k], knot_cdf[k + 1]);
        for &x in &points[i0..i1] {
            let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
            out.push(f0 + t * (f1 - f0));
        }
    }
    out.push(*knot_cdf.last().unwrap());
    Ok(out)
}

/// Two-sided Kolmogorov-Smirnov distance between sorted samples and their
/// model CDF values.
pub fn ks_statistic(cdf_at_sorted: &[f64]) -> f64 {
    let n = cdf_at_sorted.len() as f64;
    cdf_at_sorted
        .iter()
        .enumerate()
        .map(|(i, &f)| (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs()))
        .fold(0.0, f64::max)
}

/// Asymptotic critical distance for `n` samples at significance `level`.
pub fn ks_critical(n: usize, level: f64) -> f64 {
    let c = (-0.5 * (level / 2.0).ln()).sqrt();
    let sn = (n as f64).sqrt();
    c / (sn + 0.12 + 0.11 / sn)
}

/// Energies of `count` symbols with the bit forced to `hypothesis`.
/// Returns `(z, z_cancelled)` pairs.
pub fn simulate_energies(params: &SystemParams, hypothesis: Hypothesis, count: usize, seed: u64) -> Vec<(f64, f64)> {
    let bit = match hypothesis {
        Hypothesis::Absent => 0,
        Hypothesis::Present => 1,
    };
    (0..count as u64)
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let draw = sample_channels(params, &mut rng);
            synthesize_energy(params, &draw, bit, &mut rng)
        })
        .collect()
}

/// Exact BER of the energy detector, by integrating the conditional Gamma
/// tail of `z | v` against the channel-gain densities.
pub fn energy_detector_ber(ctx: &LikelihoodContext) -> Result<f64> {
    let p = *ctx.params();
    let tau = thresholds(&p)?.theta2 * p.n() * p.sigma_sr2 * p.sigma_s2;
    if tau <= 0.0 {
        // Every symbol is declared 1.
        return Ok(0.5);
    }
    let log_tail = |v: f64, upper: bool| {
        let x = tau / (v * p.sigma_s2 + p.sigma_w2);
        let kind = if upper {
            special_fn::GammaKind::Upper
        } else {
            special_fn::GammaKind::Lower
        };
        special_fn::log_incomplete_gamma(p.n(), x, kind).map(|l| l - special_fn::ln_gamma(p.n()))
    };
    let mut total = 0.0;
    for (hyp, upper) in [(Hypothesis::Absent, true), (Hypothesis::Present, false)] {
        let q = integrate_log(
            |s| {
                let v = s.exp();
                match (log_pdf_v(v, hyp, ctx), log_tail(v, upper)) {
                    (Ok(a), Ok(b)) => a + b + s,
                    _ => f64::NAN,
                }
            },
            f64::NEG_INFINITY,
            f64::INFINITY,
            Peak::Near(mean_gain(&p, hyp).ln()),
            ctx.quad_tol(),
        )?;
        total += 0.5 * q.log_value.exp();
    }
    Ok(total)
}

/// Normalization and goodness-of-fit checks of the energy densities.
///
/// `ks_samples = 0` skips the KS tests.
pub fn pdfcheck(params: &SystemParams, ks_samples: usize, seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let exact = match LikelihoodContext::new(*params, 1e-8) {
        Ok(c) => c,
        Err(e) => return vec![CheckResult::new("context", false, e.to_string())],
    };
    out.push(CheckResult::from_result(
        "p_V1 integrates to 1",
        mass_of_v1(&exact).map(|m| ((m - 1.0).abs() <= 1e-6, format!("mass = {m:.12}"))),
    ));
    for n in [1usize, 4, 16] {
        let pn = SystemParams { n_samples: n, ..*params };
        let ctx = match LikelihoodContext::new(pn, 1e-8) {
            Ok(c) => c,
            Err(e) => {
                out.push(CheckResult::new(format!("context N={n}"), false, e.to_string()));
                continue;
            }
        };
        for (sic, label) in [(false, "p_Z"), (true, "p_Z (SIC)")] {
            for hyp in [Hypothesis::Absent, Hypothesis::Present] {
                let b = hyp as u8;
                out.push(CheckResult::from_result(
                    format!("{label} integrates to 1, N={n}, b={b}"),
                    energy_mass(&ctx, hyp, sic, f64::INFINITY)
                        .map(|m| ((m - 1.0).abs() <= 1e-5, format!("mass = {m:.10}"))),
                ));
            }
        }
    }
    if ks_samples == 0 {
        return out;
    }
    for n in [4usize, 16] {
        let pn = SystemParams { n_samples: n, ..*params };
        for hyp in [Hypothesis::Absent, Hypothesis::Present] {
            let b = hyp as u8;
            let name = format!("KS of {ks_samples} simulated energies, N={n}, b={b}");
            let r = (|| -> Result<(bool, String)> {
                let ctx = LikelihoodContext::new(pn, 1e-7)?;
                let inner = ctx.build_inner_lut(200.0)?;
                let ctx = ctx.with_inner_lut(Arc::new(inner))?;
                let stream = seed ^ (n as u64) << 8 ^ b as u64;
                let mut z: Vec<f64> = simulate_energies(&pn, hyp, ks_samples, stream)
                    .into_iter()
                    .map(|(z, _)| z)
                    .collect();
                z.sort_by(f64::total_cmp);
                let cdf = energy_cdf(&ctx, hyp, false, &z, (ks_samples / 2000).max(1))?;
                let d = ks_statistic(&cdf);
                let crit = ks_critical(ks_samples, 0.01);
                Ok((d < crit, format!("D = {d:.5}, 1% critical = {crit:.5}")))
            })();
            out.push(CheckResult::from_result(name, r));
        }
    }
    out
}

/// Every check `selftest` runs. `trials` scales the Monte Carlo parts.
pub fn selftest(trials: u64, seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    out.extend(special_function_checks(seed));
    out.extend(threshold_checks());
    out.extend(pdfcheck(&SystemParams::default(), trials as usize, seed));
    out.extend(decision_checks(seed));
    out.extend(monte_carlo_checks(trials, seed));
    out
}

fn special_function_checks(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    let mut failure = None;
    for &(a, b, l) in &[(0.5, 2.0, 1u32), (1.0, 1.0, 2), (2.0, 0.5, 3), (0.1, 10.0, 5), (3.0, 30.0, 10)] {
        match (ILArgs::new(0.0, a, b, l).and_then(|x| special_fn::eval_log_il(x, 1e-10)), special_fn::log_il_at_zero(a, b, l)) {
            (Ok(q), Ok(c)) => worst = worst.max(((q.log_value - c).exp() - 1.0).abs()),
            (Err(e), _) | (_, Err(e)) => failure = Some(e.to_string()),
        }
    }
    out.push(match failure {
        Some(e) => CheckResult::new("I_L(0) closed form", false, e),
        None => CheckResult::new("I_L(0) closed form", worst < 1e-8, format!("max rel err {worst:.2e}")),
    });

    let mut rng = trial_rng(seed, u64::MAX);
    let mut violations = 0;
    let mut errors = 0;
    let tuples = 200;
    for _ in 0..tuples {
        let z = 10f64.powf(rng.gen_range(-2.0..2.0));
        let a = 10f64.powf(rng.gen_range(-2.0..1.0));
        let b = 10f64.powf(rng.gen_range(-1.0..2.0));
        let l = rng.gen_range(1..=8);
        let r = ILArgs::new(z, a, b, l).and_then(|args| {
            let v = special_fn::eval_log_il(args, 1e-10)?.log_value;
            let bounds = il_bounds(args)?;
            Ok((v, bounds))
        });
        match r {
            Ok((v, bounds)) => {
                let slack = 1e-9;
                let below = bounds.log_lower.map_or(true, |lo| lo <= v + slack);
                let above = v <= bounds.log_best_upper() + slack;
                if !(below && above) {
                    violations += 1;
                }
            }
            Err(_) => errors += 1,
        }
    }
    out.push(CheckResult::new(
        "I_L bound sandwich",
        violations == 0 && errors == 0,
        format!("{tuples} tuples, {violations} violations, {errors} errors"),
    ));

    let mut worst = 0.0f64;
    let mut ok = true;
    for &z in &[0.01, 0.5, 3.0, 20.0, 50.0] {
        let h = 1e-4 * z;
        let f = |x: f64| ILArgs::new(x, 1.0, 2.0, 2).and_then(|a| special_fn::eval_log_il(a, 1e-13)).map(|r| r.value());
        match (f(z + h), f(z - h), ILArgs::new(z, 1.0, 2.0, 3).and_then(|a| special_fn::eval_log_il(a, 1e-13))) {
            (Ok(p), Ok(m), Ok(next)) => {
                let fd = (p - m) / (2.0 * h);
                worst = worst.max((fd / -next.value() - 1.0).abs());
            }
            _ => ok = false,
        }
    }
    out.push(CheckResult::new(
        "dI_L/dz = -I_{L+1}",
        ok && worst < 1e-6,
        format!("max rel err {worst:.2e}"),
    ));
    out
}

fn threshold_checks() -> Vec<CheckResult> {
    let mut worst = 0.0f64;
    for inr_db in [-10.0, 0.0, 10.0, 30.0] {
        let p = SystemParams {
            sigma_s2: 10f64.powf(inr_db / 10.0),
            ..SystemParams::default()
        };
        let t = thresholds(&p).expect("default params are valid");
        let gap = t.theta1 - t.theta2;
        worst = worst.max((gap * derive_ratios(&p).inr - 1.0).abs());
    }
    vec![CheckResult::new(
        "theta1 - theta2 = 1/INR",
        worst < 1e-12,
        format!("max rel err {worst:.2e}"),
    )]
}

fn decision_checks(seed: u64) -> Vec<CheckResult> {
    let r = (|| -> Result<(bool, String)> {
        let p = SystemParams::default();
        let ctx = Arc::new(LikelihoodContext::new(p, 1e-8)?);
        let bank = DetectorBank::new(Arc::clone(&ctx))?;
        let t = bank.thresholds();
        let mut rng = trial_rng(seed, u64::MAX - 1);
        let mut mismatches = 0;
        let count = 40;
        for _ in 0..count {
            let z = rng.gen_range(0.0..60.0);
            let raw_direct = log_pdf_y(z, Hypothesis::Present, &ctx)? - log_pdf_y(z, Hypothesis::Absent, &ctx)?;
            let raw_sic = log_pdf_y_sic(z, Hypothesis::Present, &ctx)? - log_pdf_y_sic(z, Hypothesis::Absent, &ctx)?;
            let v = crate::detectors::ml_channel_gain(z, &p);
            let raw_indirect = log_pdf_v(v, Hypothesis::Present, &ctx)? - log_pdf_v(v, Hypothesis::Absent, &ctx)?;
            let pairs = [
                (bank.statistic(DetectorId::Direct, z, z)?, t.theta1, raw_direct),
                (bank.statistic(DetectorId::Indirect, z, z)?, t.theta2, raw_indirect),
                (bank.statistic(DetectorId::DirectSic, z, z)?, t.theta3, raw_sic),
            ];
            for (stat, thr, raw) in pairs {
                // Skip statistics numerically on the threshold.
                if (stat - thr).abs() < 1e-9 {
                    continue;
                }
                if decide(stat, thr)? != u8::from(raw > 0.0) {
                    mismatches += 1;
                }
            }
        }
        Ok((mismatches == 0, format!("{count} energies x 3 detectors, {mismatches} mismatches")))
    })();
    vec![CheckResult::from_result("threshold form equals LRT sign", r)]
}

fn monte_carlo_checks(trials: u64, seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let r = (|| -> Result<(bool, String)> {
        let p = SystemParams {
            sigma_s2: 4.0,
            sigma_tr2: 10.0,
            ..SystemParams::default()
        };
        let ctx = LikelihoodContext::new(p, 1e-8)?;
        let oracle = energy_detector_ber(&ctx)?;
        let bank = prepare_bank(p, &[DetectorId::Energy], 1e-6, &LutSettings::default())?;
        let tally = tally_trials(&p, &[DetectorId::Energy], &bank, trials, seed)[0];
        let est = BerEstimate::from_tally(DetectorId::Energy, SweepVariable::Alpha, p.alpha, &tally);
        let dev = if est.ber == oracle { 0.0 } else { (est.ber - oracle).abs() / est.std_err };
        Ok((dev < 3.0, format!("MC {:.5} vs oracle {oracle:.5} ({dev:.2} std errs)", est.ber)))
    })();
    out.push(CheckResult::from_result("energy detector BER matches oracle", r));

    let r = (|| -> Result<(bool, String)> {
        let detect_params = SystemParams::default();
        let silent = SystemParams {
            alpha: 0.0,
            ..detect_params
        };
        let dets = [DetectorId::Indirect, DetectorId::Energy];
        let bank = prepare_bank(detect_params, &dets, 1e-6, &LutSettings::default())?;
        let tallies = tally_trials(&silent, &dets, &bank, trials, seed);
        let mut worst: f64 = 0.0;
        for (id, t) in dets.iter().zip(&tallies) {
            let est = BerEstimate::from_tally(*id, SweepVariable::Alpha, 0.0, t);
            worst = worst.max((est.ber - 0.5).abs() / est.std_err);
        }
        Ok((worst < 3.0, format!("max deviation from 0.5: {worst:.2} std errs")))
    })();
    out.push(CheckResult::from_result("alpha = 0 gives chance-level BER", r));

    let r = (|| -> Result<(bool, String)> {
        let p = SystemParams::default();
        let dets = [DetectorId::Energy];
        let bank = prepare_bank(p, &dets, 1e-6, &LutSettings::default())?;
        let n = trials.min(20_000);
        let a = tally_trials(&p, &dets, &bank, n, seed);
        let b = tally_trials(&p, &dets, &bank, n, seed);
        Ok((a == b, format!("{n} trials run twice")))
    })();
    out.push(CheckResult::from_result("same seed, same counts", r));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_distance_of_perfect_fit_is_one_over_n() {
        let n = 100;
        let cdf: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert!((ks_statistic(&cdf) - 0.5 / n as f64).abs() < 1e-15);
        assert!((ks_critical(100_000, 0.01) - 1.6276 / 316.4) .abs() < 1e-5);
    }

    #[test]
    fn cdf_matches_direct_integral() {
        // The last knot's CDF must agree with one direct integral.
        let ctx = LikelihoodContext::new(SystemParams { n_samples: 1, ..SystemParams::default() }, 1e-8).unwrap();
        let pts: Vec<f64> = (1..=400).map(|i| i as f64 * 0.05).collect();
        let cdf = energy_cdf(&ctx, Hypothesis::Absent, false, &pts, 7).unwrap();
        let direct = energy_mass(&ctx, Hypothesis::Absent, false, 20.0).unwrap();
        assert!((cdf[399] - direct).abs() < 1e-9, "{} vs {direct}", cdf[399]);
        assert!(cdf.windows(2).all(|w| w[1] >= w[0]));
    }
}
