//! C ABI over `ambient-detect`.
//!
//! Every function returns an [`AbStatus`]; results come back through out
//! pointers. After a failure, `ab_last_error` copies a message describing
//! it. Objects are opaque handles created by `*_new` and released by the
//! matching `*_free`; a handle may be shared across threads for reading.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use ambient_detect::channel::{draw_symbol, trial_rng, SystemParams};
use ambient_detect::detectors::{self, DetectorBank, DetectorId};
use ambient_detect::harness::{self, LutSettings, SweepConfig};
use ambient_detect::likelihood::{self, Hypothesis, LikelihoodContext};
use ambient_detect::lut::Fallback;
use ambient_detect::special_fn::{self, ILArgs};
use ambient_detect::Error;

/// Outcome of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbStatus {
    Ok = 0,
    InvalidArgument = 1,
    QuadratureNonConvergence = 2,
    SeriesDivergence = 3,
    DetectionFailure = 4,
    TableError = 5,
    ConfigError = 6,
    IoError = 7,
    NullPointer = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Detector selector; functions take it as a `uint32_t` code.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbDetector {
    Direct = 0,
    Indirect = 1,
    Energy = 2,
    DirectSic = 3,
}

fn detector_from_code(code: u32) -> Result<DetectorId, (AbStatus, String)> {
    match code {
        0 => Ok(DetectorId::Direct),
        1 => Ok(DetectorId::Indirect),
        2 => Ok(DetectorId::Energy),
        3 => Ok(DetectorId::DirectSic),
        other => Err((AbStatus::InvalidArgument, format!("unknown detector code {other}"))),
    }
}

impl From<DetectorId> for AbDetector {
    fn from(d: DetectorId) -> Self {
        match d {
            DetectorId::Direct => AbDetector::Direct,
            DetectorId::Indirect => AbDetector::Indirect,
            DetectorId::Energy => AbDetector::Energy,
            DetectorId::DirectSic => AbDetector::DirectSic,
        }
    }
}

/// Channel and signal statistics, all variances linear.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AbParams {
    pub sigma_s2: f64,
    pub sigma_st2: f64,
    pub sigma_tr2: f64,
    pub sigma_sr2: f64,
    pub sigma_w2: f64,
    pub alpha: f64,
    pub n_samples: u32,
}

impl From<AbParams> for SystemParams {
    fn from(p: AbParams) -> Self {
        SystemParams {
            sigma_s2: p.sigma_s2,
            sigma_st2: p.sigma_st2,
            sigma_tr2: p.sigma_tr2,
            sigma_sr2: p.sigma_sr2,
            sigma_w2: p.sigma_w2,
            alpha: p.alpha,
            n_samples: p.n_samples as usize,
        }
    }
}

impl From<SystemParams> for AbParams {
    fn from(p: SystemParams) -> Self {
        AbParams {
            sigma_s2: p.sigma_s2,
            sigma_st2: p.sigma_st2,
            sigma_tr2: p.sigma_tr2,
            sigma_sr2: p.sigma_sr2,
            sigma_w2: p.sigma_w2,
            alpha: p.alpha,
            n_samples: p.n_samples as u32,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AbThresholds {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AbVerdict {
    pub statistic: f64,
    pub threshold: f64,
    pub decided_bit: u8,
}

/// Table settings for [`ab_bank_new`]. `fallback` is 0 for the per-detector
/// default, 1 for direct quadrature, 2 for the Bessel form.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AbLutSettings {
    pub delta: f64,
    pub z_max: f64,
    pub fallback: u32,
    pub inner_steps: f64,
}

/// One row of a sweep result.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AbBerEstimate {
    pub detector: AbDetector,
    pub sweep_value: f64,
    pub trials: u64,
    pub errors_0to1: u64,
    pub errors_1to0: u64,
    pub erased: u64,
    pub counted_0: u64,
    pub counted_1: u64,
    pub ber: f64,
    pub std_err: f64,
}

/// Detector bank: likelihood context, thresholds and tables for one
/// parameter set.
pub struct AbDetectorBank {
    bank: DetectorBank,
}

/// Parsed sweep configuration.
pub struct AbSweepConfig {
    config: SweepConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> AbStatus {
    match err {
        Error::InvalidArgument(_) => AbStatus::InvalidArgument,
        Error::QuadratureNonConvergence { .. } => AbStatus::QuadratureNonConvergence,
        Error::SeriesDivergence { .. } => AbStatus::SeriesDivergence,
        Error::DetectionFailure { .. } => AbStatus::DetectionFailure,
        Error::TableBuild { .. } | Error::TableFormat { .. } => AbStatus::TableError,
        Error::Config { .. } => AbStatus::ConfigError,
        Error::Io(_) => AbStatus::IoError,
    }
}

/// Run `f`, turning errors and panics into a status plus a stored message.
fn guard<F>(f: F) -> AbStatus
where
    F: FnOnce() -> Result<(), (AbStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            AbStatus::Panic
        }
    }
}

fn lift<T>(r: ambient_detect::Result<T>) -> Result<T, (AbStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (AbStatus, String) {
    (AbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), (AbStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Copy the message of the last failure on this thread into `buf`,
/// NUL-terminated. Returns the length the message needs, excluding the
/// terminator; when that is `>= len` the copy is truncated.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ab_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Fill `out` with the default parameters (all variances 1, α = 1, N = 10).
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ab_params_default(out: *mut AbParams) -> AbStatus {
    guard(|| write_out(out, SystemParams::default().into(), "out"))
}

/// `ln I_L(z; a, b)` and its estimated absolute error.
///
/// # Safety
/// `out_log` must be valid for writes; `out_abs_err` may be null.
#[no_mangle]
pub unsafe extern "C" fn ab_log_il(
    z: f64,
    a: f64,
    b: f64,
    l: u32,
    tol: f64,
    out_log: *mut f64,
    out_abs_err: *mut f64,
) -> AbStatus {
    guard(|| {
        let r = lift(ILArgs::new(z, a, b, l).and_then(|args| special_fn::eval_log_il(args, tol)))?;
        write_out(out_log, r.log_value, "out_log")?;
        if !out_abs_err.is_null() {
            out_abs_err.write(r.est_abs_err);
        }
        Ok(())
    })
}

/// `K_n(x)`, the modified Bessel function of the second kind.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ab_bessel_k(order: u32, x: f64, out: *mut f64) -> AbStatus {
    guard(|| {
        let v = lift(special_fn::bessel_k(order, x))?;
        write_out(out, v, "out")
    })
}

/// `E_n(x)`, the generalized exponential integral.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ab_gen_exp_integral(n: u32, x: f64, out: *mut f64) -> AbStatus {
    guard(|| {
        let v = lift(special_fn::gen_exp_integral(n, x))?;
        write_out(out, v, "out")
    })
}

/// θ₁*, θ₂*, θ₃* for `params`.
///
/// # Safety
/// `params` must be valid for reads and `out` for writes.
#[no_mangle]
pub unsafe extern "C" fn ab_thresholds(params: *const AbParams, out: *mut AbThresholds) -> AbStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let t = lift(detectors::thresholds(&SystemParams::from(*p)))?;
        write_out(
            out,
            AbThresholds {
                theta1: t.theta1,
                theta2: t.theta2,
                theta3: t.theta3,
            },
            "out",
        )
    })
}

/// Simulate trial `index` of stream `master_seed`: a random bit, one
/// channel draw and the received energy with and without the direct path.
///
/// # Safety
/// `params` must be valid for reads; the out pointers for writes.
#[no_mangle]
pub unsafe extern "C" fn ab_simulate_trial(
    params: *const AbParams,
    master_seed: u64,
    index: u64,
    out_bit: *mut u8,
    out_z: *mut f64,
    out_z_cancelled: *mut f64,
) -> AbStatus {
    guard(|| {
        let p = SystemParams::from(*params.as_ref().ok_or_else(|| null("params"))?);
        lift(p.validate())?;
        if out_bit.is_null() || out_z.is_null() || out_z_cancelled.is_null() {
            return Err(null("an output pointer"));
        }
        let (bit, z, zc) = draw_symbol(&p, &mut trial_rng(master_seed, index));
        out_bit.write(bit);
        out_z.write(z);
        out_z_cancelled.write(zc);
        Ok(())
    })
}

/// Build a detector bank. `lut` may be null for plain quadrature.
///
/// # Safety
/// `params` must be valid for reads, `lut` null or valid, `out` valid for
/// writes. Release the bank with [`ab_bank_free`].
#[no_mangle]
pub unsafe extern "C" fn ab_bank_new(
    params: *const AbParams,
    quad_tol: f64,
    lut: *const AbLutSettings,
    out: *mut *mut AbDetectorBank,
) -> AbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = SystemParams::from(*params.as_ref().ok_or_else(|| null("params"))?);
        let bank = match lut.as_ref() {
            None => {
                let ctx = lift(LikelihoodContext::new(p, quad_tol))?;
                lift(DetectorBank::new(Arc::new(ctx)))?
            }
            Some(l) => {
                let fallback = match l.fallback {
                    0 => None,
                    1 => Some(Fallback::DirectQuadrature),
                    2 => Some(Fallback::BesselBound),
                    other => {
                        return Err((AbStatus::InvalidArgument, format!("unknown fallback code {other}")))
                    }
                };
                let settings = LutSettings {
                    enabled: true,
                    delta: l.delta,
                    z_max: l.z_max,
                    z_max_per_sample: None,
                    fallback,
                    inner_steps: l.inner_steps,
                    cache_dir: None,
                };
                lift(harness::prepare_bank(p, &DetectorId::ALL, quad_tol, &settings))?
            }
        };
        out.write(Box::into_raw(Box::new(AbDetectorBank { bank })));
        Ok(())
    })
}

/// Release a bank. Null is ignored.
///
/// # Safety
/// `bank` must come from [`ab_bank_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ab_bank_free(bank: *mut AbDetectorBank) {
    if !bank.is_null() {
        drop(Box::from_raw(bank));
    }
}

/// The bank's thresholds.
///
/// # Safety
/// `bank` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ab_bank_thresholds(bank: *const AbDetectorBank, out: *mut AbThresholds) -> AbStatus {
    guard(|| {
        let b = bank.as_ref().ok_or_else(|| null("bank"))?;
        let t = b.bank.thresholds();
        write_out(
            out,
            AbThresholds {
                theta1: t.theta1,
                theta2: t.theta2,
                theta3: t.theta3,
            },
            "out",
        )
    })
}

/// Statistic and decision of `detector` for energy `z`. `z_cancelled` is
/// only read by the interference-free detector.
///
/// # Safety
/// `bank` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ab_bank_evaluate(
    bank: *const AbDetectorBank,
    detector: u32,
    z: f64,
    z_cancelled: f64,
    out: *mut AbVerdict,
) -> AbStatus {
    guard(|| {
        let b = bank.as_ref().ok_or_else(|| null("bank"))?;
        let v = lift(b.bank.evaluate(detector_from_code(detector)?, z, z_cancelled))?;
        write_out(
            out,
            AbVerdict {
                statistic: v.statistic,
                threshold: v.threshold,
                decided_bit: v.decided_bit,
            },
            "out",
        )
    })
}

/// `ln p(y | b)` for a received vector of energy `z`; `hypothesis` is the
/// bit, `sic` selects the model with the direct path removed.
///
/// # Safety
/// `bank` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ab_bank_log_pdf_y(
    bank: *const AbDetectorBank,
    hypothesis: u8,
    sic: bool,
    z: f64,
    out: *mut f64,
) -> AbStatus {
    guard(|| {
        let b = bank.as_ref().ok_or_else(|| null("bank"))?;
        let ctx = b.bank.context();
        let h = Hypothesis::from_bit(hypothesis);
        let v = if sic {
            lift(likelihood::log_pdf_y_sic(z, h, ctx))?
        } else {
            lift(likelihood::log_pdf_y(z, h, ctx))?
        };
        write_out(out, v, "out")
    })
}

/// Parse a `key = value` sweep configuration.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for writes.
/// Release the result with [`ab_config_free`].
#[no_mangle]
pub unsafe extern "C" fn ab_config_parse(text: *const c_char, out: *mut *mut AbSweepConfig) -> AbStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| (AbStatus::InvalidArgument, "config is not UTF-8".to_string()))?;
        let config = lift(SweepConfig::parse(text))?;
        out.write(Box::into_raw(Box::new(AbSweepConfig { config })));
        Ok(())
    })
}

/// Release a configuration. Null is ignored.
///
/// # Safety
/// `config` must come from [`ab_config_parse`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ab_config_free(config: *mut AbSweepConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Number of rows [`ab_estimate_ber`] produces: sweep points times detectors.
///
/// # Safety
/// `config` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ab_config_rows(config: *const AbSweepConfig, out: *mut usize) -> AbStatus {
    guard(|| {
        let c = &config.as_ref().ok_or_else(|| null("config"))?.config;
        write_out(out, c.sweep_values.len() * c.detectors.len(), "out")
    })
}

/// Run the sweep, writing up to `capacity` rows to `rows` and the row
/// count to `written`. Fails with `BufferTooSmall` before simulating when
/// `capacity` is short.
///
/// # Safety
/// `config` must be a live handle, `rows` valid for `capacity` writes and
/// `written` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ab_estimate_ber(
    config: *const AbSweepConfig,
    rows: *mut AbBerEstimate,
    capacity: usize,
    written: *mut usize,
) -> AbStatus {
    guard(|| {
        let c = &config.as_ref().ok_or_else(|| null("config"))?.config;
        if written.is_null() {
            return Err(null("written"));
        }
        let needed = c.sweep_values.len() * c.detectors.len();
        if capacity < needed {
            written.write(needed);
            return Err((
                AbStatus::BufferTooSmall,
                format!("{needed} rows needed, capacity is {capacity}"),
            ));
        }
        if rows.is_null() {
            return Err(null("rows"));
        }
        let estimates = lift(harness::estimate_ber(c))?;
        for (i, e) in estimates.iter().enumerate() {
            rows.add(i).write(AbBerEstimate {
                detector: e.detector.into(),
                sweep_value: e.sweep_value,
                trials: e.trials,
                errors_0to1: e.errors_0to1,
                errors_1to0: e.errors_1to0,
                erased: e.erased,
                counted_0: e.counted_0,
                counted_1: e.counted_1,
                ber: e.ber,
                std_err: e.std_err,
            });
        }
        written.write(estimates.len());
        Ok(())
    })
}
