//! Generalized exponential integral E_n(x).

use crate::error::{invalid, Result};

const EULER: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

/// E_n(x) = x^{n-1} ∫_x^∞ t^{-n} e^{-t} dt for n ≥ 1, x > 0.
pub fn gen_exp_integral(n: u32, x: f64) -> Result<f64> {
    Ok(log_gen_exp_integral(n, x)?.exp())
}

/// Natural log of E_n(x); stays finite where E_n itself underflows.
pub fn log_gen_exp_integral(n: u32, x: f64) -> Result<f64> {
    if n < 1 {
        return Err(invalid(format!("E_n needs n >= 1, got {n}")));
    }
    if !(x > 0.0) {
        return Err(invalid(format!("E_n needs x > 0, got {x}")));
    }
    if x == f64::INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let nm1 = n - 1;
    if x > 1.0 {
        // Continued fraction, modified Lentz.
        const TINY: f64 = 1e-300;
        let mut b = x + n as f64;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let a = -(i as f64) * (nm1 as f64 + i as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        Ok(h.ln() - x)
    } else {
        let mut ans = if nm1 != 0 {
            1.0 / nm1 as f64
        } else {
            -x.ln() - EULER
        };
        let mut fact = 1.0;
        for i in 1..MAX_ITER as u32 {
            fact *= -x / i as f64;
            let del = if i != nm1 {
                -fact / (i as f64 - nm1 as f64)
            } else {
                let psi = -EULER + (1..=nm1).map(|k| 1.0 / k as f64).sum::<f64>();
                fact * (-x.ln() + psi)
            };
            ans += del;
            if del.abs() < ans.abs() * EPS {
                break;
            }
        }
        Ok(ans.ln())
    }
}
