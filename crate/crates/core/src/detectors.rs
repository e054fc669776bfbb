//! The four test statistics and their constant thresholds.
//!
//! | detector     | statistic                                  | threshold |
//! |--------------|--------------------------------------------|-----------|
//! | `direct`     | ln ∫ u^{-N}e^{-z/u} I_1(·) du − ln I_N(z)  | θ₁*       |
//! | `indirect`   | v*/σ_sr² + ln I_1(v*)                      | θ₂*       |
//! | `energy`     | z / (N σ_sr² σ_s²)                         | θ₂*       |
//! | `direct_sic` | z/σ_w² + ln ∫ u^{-N}e^{-z/u} K₀(·) du      | θ₃*       |
//!
//! A detector decides 1 iff its statistic exceeds the threshold; ties go to 0.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::channel::SystemParams;
use crate::error::{invalid, Error, Result};
use crate::likelihood::LikelihoodContext;
use crate::lut::LookupTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorId {
    Direct,
    Indirect,
    Energy,
    DirectSic,
}

impl DetectorId {
    pub const ALL: [DetectorId; 4] = [
        DetectorId::Direct,
        DetectorId::Indirect,
        DetectorId::Energy,
        DetectorId::DirectSic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorId::Direct => "direct",
            DetectorId::Indirect => "indirect",
            DetectorId::Energy => "energy",
            DetectorId::DirectSic => "direct_sic",
        }
    }

    /// Legend label used in figures.
    pub fn label(self) -> &'static str {
        match self {
            DetectorId::Direct => "Direct",
            DetectorId::Indirect => "Indirect",
            DetectorId::Energy => "ED",
            DetectorId::DirectSic => "Direct SIC",
        }
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorId::ALL
            .into_iter()
            .find(|d| d.name() == s.trim())
            .ok_or_else(|| invalid(format!("unknown detector {s:?}")))
    }
}

/// θ₁*, θ₂*, θ₃*.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl Thresholds {
    pub fn for_detector(&self, id: DetectorId) -> f64 {
        match id {
            DetectorId::Direct => self.theta1,
            DetectorId::Indirect | DetectorId::Energy => self.theta2,
            DetectorId::DirectSic => self.theta3,
        }
    }
}

/// Thresholds from the channel variances.
pub fn thresholds(params: &SystemParams) -> Result<Thresholds> {
    params.validate_for_detection()?;
    let c = params.product_gain();
    let sr = params.sigma_sr2;
    let theta2 = (c / sr).ln() - sr / c;
    Ok(Thresholds {
        theta1: params.sigma_w2 / (sr * params.sigma_s2) + theta2,
        theta2,
        theta3: (c * params.sigma_s2 / (2.0 * params.sigma_w2)).ln()
            - (params.n() - 1.0) * params.sigma_w2.ln(),
    })
}

/// The same thresholds written in terms of SIR η₁ and INR η₂.
pub fn thresholds_from_ratios(sir: f64, inr: f64, sigma_w2: f64, n_samples: usize) -> Thresholds {
    Thresholds {
        theta1: 1.0 / inr - 1.0 / sir + sir.ln(),
        theta2: sir.ln() - 1.0 / sir,
        theta3: (sir * inr / 2.0).ln() - (n_samples as f64 - 1.0) * sigma_w2.ln(),
    }
}

/// One detector's output for one symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorVerdict {
    pub detector: DetectorId,
    pub statistic: f64,
    pub threshold: f64,
    pub decided_bit: u8,
}

/// 1 iff `statistic > threshold`. Non-finite inputs are a detection failure.
pub fn decide(statistic: f64, threshold: f64) -> Result<u8> {
    if !statistic.is_finite() {
        return Err(Error::DetectionFailure { statistic });
    }
    if !threshold.is_finite() {
        return Err(invalid(format!("threshold {threshold} is not finite")));
    }
    Ok(u8::from(statistic > threshold))
}

/// ML estimate of the channel gain, `(z/(Nσ_s²) − σ_w²/σ_s²)₊`.
pub fn ml_channel_gain(z: f64, params: &SystemParams) -> f64 {
    (z / (params.n() * params.sigma_s2) - params.sigma_w2 / params.sigma_s2).max(0.0)
}

/// Λ₁. With a table, `lut` must wrap [`Kernel::DirectStatistic`](crate::lut::Kernel).
pub fn stat_direct(z: f64, ctx: &LikelihoodContext, lut: Option<&LookupTable>) -> Result<f64> {
    if let Some(t) = lut {
        return t.lookup(z);
    }
    Ok(ctx.log_outer_b1(z)? - ctx.log_il_b0(z)?)
}

/// Λ₂. With a table, `lut` must wrap [`Kernel::IndirectLogI1`](crate::lut::Kernel).
pub fn stat_indirect(z: f64, ctx: &LikelihoodContext, lut: Option<&LookupTable>) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(invalid(format!("energy must be >= 0, got {z}")));
    }
    let v = ml_channel_gain(z, ctx.params());
    let log_i1 = match lut {
        Some(t) => t.lookup(z)?,
        None => ctx.log_inner_i1(v)?,
    };
    Ok(v / ctx.params().sigma_sr2 + log_i1)
}

/// Energy-detector statistic `z / (N σ_sr² σ_s²)`, compared against θ₂*.
pub fn stat_energy(z: f64, params: &SystemParams) -> f64 {
    z / (params.n() * params.sigma_sr2 * params.sigma_s2)
}

/// Λ₃, for an observation with the direct path already cancelled.
pub fn stat_direct_sic(z: f64, ctx: &LikelihoodContext, lut: Option<&LookupTable>) -> Result<f64> {
    if let Some(t) = lut {
        return t.lookup(z);
    }
    Ok(z / ctx.params().sigma_w2 + ctx.log_outer_sic(z)?)
}

/// A context, its thresholds, and optional per-detector tables.
#[derive(Debug, Clone)]
pub struct DetectorBank {
    ctx: Arc<LikelihoodContext>,
    thresholds: Thresholds,
    direct_lut: Option<Arc<LookupTable>>,
    indirect_lut: Option<Arc<LookupTable>>,
    sic_lut: Option<Arc<LookupTable>>,
}

impl DetectorBank {
    pub fn new(ctx: Arc<LikelihoodContext>) -> Result<Self> {
        let thresholds = thresholds(ctx.params())?;
        Ok(Self {
            ctx,
            thresholds,
            direct_lut: None,
            indirect_lut: None,
            sic_lut: None,
        })
    }

    pub fn with_table(mut self, id: DetectorId, table: Arc<LookupTable>) -> Result<Self> {
        let expected = match id {
            DetectorId::Direct => "direct_statistic",
            DetectorId::Indirect => "indirect_log_i1",
            DetectorId::DirectSic => "sic_statistic",
            DetectorId::Energy => return Err(invalid("the energy detector takes no table")),
        };
        if table.kernel().id() != expected {
            return Err(invalid(format!(
                "{id} needs a {expected} table, got {}",
                table.kernel().id()
            )));
        }
        match id {
            DetectorId::Direct => self.direct_lut = Some(table),
            DetectorId::Indirect => self.indirect_lut = Some(table),
            DetectorId::DirectSic => self.sic_lut = Some(table),
            DetectorId::Energy => unreachable!(),
        }
        Ok(self)
    }

    pub fn context(&self) -> &Arc<LikelihoodContext> {
        &self.ctx
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds
    }

    pub fn table(&self, id: DetectorId) -> Option<&Arc<LookupTable>> {
        match id {
            DetectorId::Direct => self.direct_lut.as_ref(),
            DetectorId::Indirect => self.indirect_lut.as_ref(),
            DetectorId::DirectSic => self.sic_lut.as_ref(),
            DetectorId::Energy => None,
        }
    }

    pub fn statistic(&self, id: DetectorId, z: f64, z_cancelled: f64) -> Result<f64> {
        match id {
            DetectorId::Direct => stat_direct(z, &self.ctx, self.direct_lut.as_deref()),
            DetectorId::Indirect => stat_indirect(z, &self.ctx, self.indirect_lut.as_deref()),
            DetectorId::Energy => Ok(stat_energy(z, self.ctx.params())),
            DetectorId::DirectSic => stat_direct_sic(z_cancelled, &self.ctx, self.sic_lut.as_deref()),
        }
    }

    /// Statistic and decision. `z_cancelled` is only read by `direct_sic`.
    pub fn evaluate(&self, id: DetectorId, z: f64, z_cancelled: f64) -> Result<DetectorVerdict> {
        let statistic = match self.statistic(id, z, z_cancelled) {
            Ok(s) => s,
            Err(Error::QuadratureNonConvergence { .. }) => f64::NAN,
            Err(e) => return Err(e),
        };
        let threshold = self.thresholds.for_detector(id);
        Ok(DetectorVerdict {
            detector: id,
            statistic,
            threshold,
            decided_bit: decide(statistic, threshold)?,
        })
    }
}
