//! Uniform-grid lookup tables for the expensive detector kernels.
//!
//! A table stores a kernel at `z = 0, Δ, 2Δ, …` and answers queries by
//! linear interpolation. Past the last grid point it falls back either to
//! the kernel itself or to the Bessel-form upper bound on `I_L`.
//!
//! Pdf kernels are tabulated in log form; interpolating `ln I` rather than
//! `I` keeps the relative error small for these log-convex decaying curves.
//!
//! # File format
//!
//! ```text
//! "ABLUT1"                       6 bytes magic
//! u32  kernel id length          little-endian
//! [u8] kernel id                 UTF-8
//! f64  Δ
//! f64  z_max
//! u32  parameter count
//! [f64] frozen kernel parameters
//! u8   fallback (0 = bessel_bound, 1 = direct_quadrature)
//! [f64] values                   floor(z_max/Δ) + 1 entries
//! u32  CRC-32 of every preceding byte
//! ```

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::detectors;
use crate::error::{invalid, Error, Result};
use crate::likelihood::LikelihoodContext;
use crate::special_fn;

const MAGIC: &[u8; 6] = b"ABLUT1";

/// The function a table wraps, with every parameter frozen.
#[derive(Debug, Clone)]
pub enum Kernel {
    /// `z ↦ z`; handy for exercising the table itself.
    Identity,
    /// `z ↦ ln I_L(z; a, b)`.
    LogIl { a: f64, b: f64, l: u32, tol: f64 },
    /// `z ↦ Λ₁(z)`, the direct-detector statistic.
    DirectStatistic(Arc<LikelihoodContext>),
    /// `z ↦ ln I_1(v*(z); σ_sr², α²σ_st²σ_tr²)`, the non-trivial part of Λ₂.
    IndirectLogI1(Arc<LikelihoodContext>),
    /// `z ↦ Λ₃(z)`, the interference-free statistic.
    SicStatistic(Arc<LikelihoodContext>),
}

impl Kernel {
    pub fn id(&self) -> &'static str {
        match self {
            Kernel::Identity => "identity",
            Kernel::LogIl { .. } => "log_il",
            Kernel::DirectStatistic(_) => "direct_statistic",
            Kernel::IndirectLogI1(_) => "indirect_log_i1",
            Kernel::SicStatistic(_) => "sic_statistic",
        }
    }

    /// The frozen parameters, as written to the file header.
    pub fn param_block(&self) -> Vec<f64> {
        match self {
            Kernel::Identity => Vec::new(),
            Kernel::LogIl { a, b, l, tol } => vec![*a, *b, *l as f64, *tol],
            Kernel::DirectStatistic(ctx)
            | Kernel::IndirectLogI1(ctx)
            | Kernel::SicStatistic(ctx) => context_block(ctx),
        }
    }

    /// Same id and bit-identical parameters.
    pub fn same_definition(&self, other: &Kernel) -> bool {
        self.id() == other.id()
            && self
                .param_block()
                .iter()
                .map(|v| v.to_bits())
                .eq(other.param_block().iter().map(|v| v.to_bits()))
    }

    /// Evaluate the kernel without any table.
    pub fn eval(&self, z: f64) -> Result<f64> {
        match self {
            Kernel::Identity => Ok(z),
            Kernel::LogIl { a, b, l, tol } => {
                Ok(special_fn::log_il_quad(z, *a, *b, *l, *tol)?.log_value)
            }
            Kernel::DirectStatistic(ctx) => detectors::stat_direct(z, ctx, None),
            Kernel::IndirectLogI1(ctx) => {
                ctx.log_inner_i1(detectors::ml_channel_gain(z, ctx.params()))
            }
            Kernel::SicStatistic(ctx) => detectors::stat_direct_sic(z, ctx, None),
        }
    }

    /// The Bessel-form approximation of the kernel, where one exists.
    pub fn bessel_bound(&self, z: f64) -> Option<Result<f64>> {
        match self {
            Kernel::LogIl { b, l, .. } => Some(special_fn::log_il_bessel_form(z, *b, *l)),
            Kernel::IndirectLogI1(ctx) => {
                let v = detectors::ml_channel_gain(z, ctx.params());
                Some(special_fn::log_il_bessel_form(v, ctx.product_gain(), 1))
            }
            _ => None,
        }
    }
}

fn context_block(ctx: &LikelihoodContext) -> Vec<f64> {
    let p = ctx.params();
    let mut block = vec![
        p.sigma_s2,
        p.sigma_st2,
        p.sigma_tr2,
        p.sigma_sr2,
        p.sigma_w2,
        p.alpha,
        p.n_samples as f64,
        ctx.quad_tol(),
    ];
    match ctx.inner_lut() {
        Some(t) => block.extend([1.0, t.delta(), t.z_max()]),
        None => block.extend([0.0, 0.0, 0.0]),
    }
    block
}

/// What answers queries beyond the last grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    BesselBound,
    DirectQuadrature,
}

impl Fallback {
    fn code(self) -> u8 {
        match self {
            Fallback::BesselBound => 0,
            Fallback::DirectQuadrature => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Fallback::BesselBound),
            1 => Some(Fallback::DirectQuadrature),
            _ => None,
        }
    }
}

impl fmt::Display for Fallback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fallback::BesselBound => "bessel_bound",
            Fallback::DirectQuadrature => "direct_quadrature",
        })
    }
}

impl std::str::FromStr for Fallback {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bessel_bound" => Ok(Fallback::BesselBound),
            "direct_quadrature" => Ok(Fallback::DirectQuadrature),
            other => Err(invalid(format!("unknown fallback {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LookupTable {
    delta: f64,
    z_max: f64,
    values: Vec<f64>,
    kernel: Kernel,
    fallback: Fallback,
    seam_gap: f64,
}

fn grid_len(delta: f64, z_max: f64) -> usize {
    // Guard against z_max/Δ landing a hair below an integer.
    ((z_max / delta) * (1.0 + 1e-12)).floor() as usize + 1
}

fn check_grid(delta: f64, z_max: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid(format!("table step must be positive, got {delta}")));
    }
    if !(z_max > delta) || !z_max.is_finite() {
        return Err(invalid(format!("z_max {z_max} must exceed the step {delta}")));
    }
    Ok(())
}

/// Evaluate `kernel` on the grid `0, Δ, …, z_max` (in parallel).
pub fn build_table(kernel: Kernel, delta: f64, z_max: f64, fallback: Fallback) -> Result<LookupTable> {
    check_grid(delta, z_max)?;
    if fallback == Fallback::BesselBound && kernel.bessel_bound(1.0).is_none() {
        return Err(invalid(format!(
            "kernel {} has no Bessel-form fallback",
            kernel.id()
        )));
    }
    let len = grid_len(delta, z_max);
    let values = (0..len)
        .into_par_iter()
        .map(|i| {
            let z = i as f64 * delta;
            match kernel.eval(z) {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(v) => Err(Error::TableBuild {
                    z,
                    source: Box::new(invalid(format!("kernel value {v} is not finite"))),
                }),
                Err(e) => Err(Error::TableBuild {
                    z,
                    source: Box::new(e),
                }),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut table = LookupTable {
        delta,
        z_max,
        values,
        kernel,
        fallback,
        seam_gap: 0.0,
    };
    table.seam_gap = table.measure_seam_gap()?;
    Ok(table)
}

impl LookupTable {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn fallback(&self) -> Fallback {
        self.fallback
    }

    /// Last grid abscissa; queries beyond it use the fallback.
    pub fn grid_end(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.delta
    }

    /// `|table(grid_end) - fallback(grid_end)|`, measured at build time.
    pub fn seam_gap(&self) -> f64 {
        self.seam_gap
    }

    fn measure_seam_gap(&self) -> Result<f64> {
        let end = self.grid_end();
        let last = self.values[self.values.len() - 1];
        Ok((last - self.eval_fallback(end)?).abs())
    }

    fn eval_fallback(&self, z: f64) -> Result<f64> {
        match self.fallback {
            Fallback::DirectQuadrature => self.kernel.eval(z),
            Fallback::BesselBound => self
                .kernel
                .bessel_bound(z)
                .unwrap_or_else(|| Err(invalid("kernel has no Bessel-form fallback"))),
        }
    }

    /// Interpolated kernel value at `z`.
    pub fn lookup(&self, z: f64) -> Result<f64> {
        if !(z >= 0.0) {
            return Err(invalid(format!("lookup needs z >= 0, got {z}")));
        }
        let mut pos = z / self.delta;
        let nearest = pos.round();
        if (pos - nearest).abs() < 1e-9 {
            pos = nearest;
        }
        let last = (self.values.len() - 1) as f64;
        if pos > last {
            return self.eval_fallback(z);
        }
        let i = pos.floor();
        let frac = pos - i;
        let i = i as usize;
        if frac == 0.0 {
            return Ok(self.values[i]);
        }
        let (lo, hi) = (self.values[i], self.values[i + 1]);
        Ok(lo + frac * (hi - lo))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let id = self.kernel.id().as_bytes();
        let params = self.kernel.param_block();
        let mut buf = Vec::with_capacity(64 + 8 * (params.len() + self.values.len()));
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
        buf.extend_from_slice(id);
        buf.extend_from_slice(&self.delta.to_le_bytes());
        buf.extend_from_slice(&self.z_max.to_le_bytes());
        buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
        for p in &params {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        buf.push(self.fallback.code());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Read a cached table, insisting that it was built for `kernel`.
    pub fn load(path: impl AsRef<Path>, kernel: Kernel) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes, kernel).map_err(|reason| Error::TableFormat {
            path: path.to_path_buf(),
            reason,
        })
    }

    pub fn from_bytes(bytes: &[u8], kernel: Kernel) -> Result<Self, String> {
        if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
            return Err("bad magic".into());
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err("checksum mismatch".into());
        }
        let mut r = Reader { buf: body, pos: MAGIC.len() };
        let id_len = r.u32()? as usize;
        let id = std::str::from_utf8(r.take(id_len)?)
            .map_err(|_| "kernel id is not UTF-8".to_string())?
            .to_owned();
        let delta = r.f64()?;
        let z_max = r.f64()?;
        let n_params = r.u32()? as usize;
        let params = (0..n_params).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        let fallback = Fallback::from_code(r.u8()?).ok_or("unknown fallback code")?;
        check_grid(delta, z_max).map_err(|e| e.to_string())?;
        let len = grid_len(delta, z_max);
        let values = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        if r.pos != body.len() {
            return Err("trailing bytes after value array".into());
        }
        if id != kernel.id() {
            return Err(format!("table holds kernel {id}, expected {}", kernel.id()));
        }
        let expected = kernel.param_block();
        if params.len() != expected.len()
            || params.iter().zip(&expected).any(|(a, b)| a.to_bits() != b.to_bits())
        {
            return Err("frozen kernel parameters differ from the requested ones".into());
        }
        let mut table = LookupTable {
            delta,
            z_max,
            values,
            kernel,
            fallback,
            seam_gap: 0.0,
        };
        table.seam_gap = table.measure_seam_gap().map_err(|e| e.to_string())?;
        Ok(table)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| "truncated file".to_string())?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
