//! Monte Carlo BER estimation over a sweep.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use super::config::{LutSettings, SweepConfig, SweepVariable};
use crate::channel::{draw_symbol, trial_rng, SystemParams, TrialRng};
use crate::detectors::{DetectorBank, DetectorId, DetectorVerdict};
use crate::error::{invalid, Result};
use crate::likelihood::LikelihoodContext;
use crate::lut::{build_table, Fallback, Kernel, LookupTable};

/// Erased fraction above which a run is flagged.
pub const ERASURE_FLAG_FRACTION: f64 = 1e-4;

/// One symbol: the transmitted bit and each detector's verdict, `None`
/// where the detector could not produce a finite statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub truth_bit: u8,
    pub verdicts: Vec<(DetectorId, Option<DetectorVerdict>)>,
}

/// Simulate one symbol under `params` and run every detector on its energy.
///
/// `params` may differ from the parameters the bank was built for; with
/// α = 0 both hypotheses produce the same observation.
pub fn run_trial(
    params: &SystemParams,
    detectors: &[DetectorId],
    bank: &DetectorBank,
    rng: &mut TrialRng,
) -> TrialOutcome {
    let (truth_bit, z, z_cancelled) = draw_symbol(params, rng);
    let verdicts = detectors
        .iter()
        .map(|&id| (id, bank.evaluate(id, z, z_cancelled).ok()))
        .collect();
    TrialOutcome { truth_bit, verdicts }
}

/// Per-detector counts, indexed by the true bit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub trials: [u64; 2],
    pub errors: [u64; 2],
    pub erased: [u64; 2],
}

impl Tally {
    fn record(&mut self, truth_bit: u8, verdict: Option<&DetectorVerdict>) {
        let b = truth_bit as usize;
        self.trials[b] += 1;
        match verdict {
            None => self.erased[b] += 1,
            Some(v) if v.decided_bit != truth_bit => self.errors[b] += 1,
            Some(_) => {}
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for b in 0..2 {
            self.trials[b] += other.trials[b];
            self.errors[b] += other.errors[b];
            self.erased[b] += other.erased[b];
        }
        self
    }

    /// Non-erased trials with true bit `b`.
    pub fn counted(&self, b: usize) -> u64 {
        self.trials[b] - self.erased[b]
    }
}

/// The BER of one detector at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct BerEstimate {
    pub detector: DetectorId,
    pub sweep_variable: SweepVariable,
    pub sweep_value: f64,
    pub trials: u64,
    /// Decided 1 when 0 was sent.
    pub errors_0to1: u64,
    /// Decided 0 when 1 was sent.
    pub errors_1to0: u64,
    pub erased: u64,
    /// Non-erased trials with true bit 0 and 1.
    pub counted_0: u64,
    pub counted_1: u64,
    pub ber: f64,
    pub std_err: f64,
}

/// `½[e10/n1 + e01/n0]` over non-erased trials, written exactly as the CSV
/// consumer should recompute it. NaN when either bit never occurred.
pub fn conditional_ber(errors_0to1: u64, errors_1to0: u64, counted_0: u64, counted_1: u64) -> f64 {
    0.5 * (errors_1to0 as f64 / counted_1 as f64 + errors_0to1 as f64 / counted_0 as f64)
}

/// Standard error of [`conditional_ber`] from the two binomial proportions.
pub fn conditional_std_err(errors_0to1: u64, errors_1to0: u64, counted_0: u64, counted_1: u64) -> f64 {
    let p0 = errors_0to1 as f64 / counted_0 as f64;
    let p1 = errors_1to0 as f64 / counted_1 as f64;
    0.5 * (p0 * (1.0 - p0) / counted_0 as f64 + p1 * (1.0 - p1) / counted_1 as f64).sqrt()
}

impl BerEstimate {
    pub fn from_tally(detector: DetectorId, sweep_variable: SweepVariable, sweep_value: f64, t: &Tally) -> Self {
        let (n0, n1) = (t.counted(0), t.counted(1));
        Self {
            detector,
            sweep_variable,
            sweep_value,
            trials: t.trials[0] + t.trials[1],
            errors_0to1: t.errors[0],
            errors_1to0: t.errors[1],
            erased: t.erased[0] + t.erased[1],
            counted_0: n0,
            counted_1: n1,
            ber: conditional_ber(t.errors[0], t.errors[1], n0, n1),
            std_err: conditional_std_err(t.errors[0], t.errors[1], n0, n1),
        }
    }

    pub fn erased_fraction(&self) -> f64 {
        self.erased as f64 / self.trials as f64
    }

    pub fn flagged(&self) -> bool {
        self.erased_fraction() > ERASURE_FLAG_FRACTION
    }
}

/// Build the likelihood context, tables and detector bank for one point.
pub fn prepare_bank(
    params: SystemParams,
    detectors: &[DetectorId],
    quad_tol: f64,
    lut: &LutSettings,
) -> Result<DetectorBank> {
    let mut ctx = LikelihoodContext::new(params, quad_tol)?;
    let nested = detectors
        .iter()
        .any(|d| matches!(d, DetectorId::Direct | DetectorId::DirectSic));
    if lut.enabled && nested {
        let inner = ctx.build_inner_lut(lut.inner_steps)?;
        ctx = ctx.with_inner_lut(Arc::new(inner))?;
    }
    let ctx = Arc::new(ctx);
    let mut bank = DetectorBank::new(Arc::clone(&ctx))?;
    if !lut.enabled {
        return Ok(bank);
    }
    let z_max = lut.z_max_for(params.n_samples);
    for &id in detectors {
        let (kernel, default_fallback) = match id {
            DetectorId::Direct => (Kernel::DirectStatistic(Arc::clone(&ctx)), Fallback::DirectQuadrature),
            DetectorId::Indirect => (Kernel::IndirectLogI1(Arc::clone(&ctx)), Fallback::BesselBound),
            DetectorId::DirectSic => (Kernel::SicStatistic(Arc::clone(&ctx)), Fallback::DirectQuadrature),
            DetectorId::Energy => continue,
        };
        let fallback = lut.fallback.unwrap_or(default_fallback);
        let table = match &lut.cache_dir {
            Some(dir) => cached_table(dir, kernel, lut.delta, z_max, fallback)?,
            None => build_table(kernel, lut.delta, z_max, fallback)?,
        };
        bank = bank.with_table(id, Arc::new(table))?;
    }
    Ok(bank)
}

/// File name a table is cached under: kernel id plus a checksum of
/// everything that defines the table.
pub fn table_file_name(kernel: &Kernel, delta: f64, z_max: f64, fallback: Fallback) -> String {
    let mut hasher = crc32fast::Hasher::new();
    for v in kernel.param_block().into_iter().chain([delta, z_max]) {
        hasher.update(&v.to_le_bytes());
    }
    hasher.update(fallback.to_string().as_bytes());
    format!("{}-{:08x}.ablut", kernel.id(), hasher.finalize())
}

/// Load the table from `dir` if a matching one is saved there, otherwise
/// build it and save it.
pub fn cached_table(dir: &Path, kernel: Kernel, delta: f64, z_max: f64, fallback: Fallback) -> Result<LookupTable> {
    let path = dir.join(table_file_name(&kernel, delta, z_max, fallback));
    if path.exists() {
        if let Ok(t) = LookupTable::load(&path, kernel.clone()) {
            if t.delta() == delta && t.z_max() == z_max && t.fallback() == fallback {
                return Ok(t);
            }
        }
    }
    let table = build_table(kernel, delta, z_max, fallback)?;
    std::fs::create_dir_all(dir)?;
    table.save(&path)?;
    Ok(table)
}

/// Tally `trials` symbols simulated under `params` and decided by `bank`.
///
/// Trial `i` always uses stream `i` of `master_seed`, so the counts do not
/// depend on the number of worker threads.
pub fn tally_trials(
    params: &SystemParams,
    detectors: &[DetectorId],
    bank: &DetectorBank,
    trials: u64,
    master_seed: u64,
) -> Vec<Tally> {
    let empty = || vec![Tally::default(); detectors.len()];
    (0..trials)
        .into_par_iter()
        .fold(empty, |mut acc, i| {
            let mut rng = trial_rng(master_seed, i);
            let outcome = run_trial(params, detectors, bank, &mut rng);
            for (slot, (_, verdict)) in acc.iter_mut().zip(&outcome.verdicts) {
                slot.record(outcome.truth_bit, verdict.as_ref());
            }
            acc
        })
        .reduce(empty, |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect())
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))
}

/// Run the whole sweep. `on_point` sees each point's estimates as soon as
/// they are ready.
pub fn estimate_ber_with<F>(config: &SweepConfig, mut on_point: F) -> Result<Vec<BerEstimate>>
where
    F: FnMut(&[BerEstimate]),
{
    config.validate()?;
    let points = config
        .sweep_values
        .iter()
        .map(|&v| config.params_at(v).map(|p| (v, p)))
        .collect::<Result<Vec<_>>>()?;
    let pool = thread_pool(config.workers)?;
    let mut out = Vec::with_capacity(points.len() * config.detectors.len());
    for (value, params) in points {
        let estimates = pool.install(|| -> Result<Vec<BerEstimate>> {
            let bank = prepare_bank(params, &config.detectors, config.quad_tol, &config.lut)?;
            let tallies = tally_trials(&params, &config.detectors, &bank, config.trials, config.master_seed);
            Ok(config
                .detectors
                .iter()
                .zip(&tallies)
                .map(|(&id, t)| BerEstimate::from_tally(id, config.sweep_variable, value, t))
                .collect())
        })?;
        on_point(&estimates);
        out.extend(estimates);
    }
    Ok(out)
}

pub fn estimate_ber(config: &SweepConfig) -> Result<Vec<BerEstimate>> {
    estimate_ber_with(config, |_| {})
}

pub const CSV_HEADER: &str =
    "detector,sweep_variable,sweep_value,trials,errors_0to1,errors_1to0,erased,ber,std_err,counted_0,counted_1";

/// One header row, then one row per estimate. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_csv<W: Write>(mut out: W, estimates: &[BerEstimate]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for e in estimates {
        writeln!(
            out,
            "{},{},{:?},{},{},{},{},{:?},{:?},{},{}",
            e.detector,
            e.sweep_variable,
            e.sweep_value,
            e.trials,
            e.errors_0to1,
            e.errors_1to0,
            e.erased,
            e.ber,
            e.std_err,
            e.counted_0,
            e.counted_1
        )?;
    }
    Ok(())
}
