//! Modified Bessel functions of the second kind, integer order.
//!
//! K_0 and K_1 come from Temme's series below x = 2 and Steed's continued
//! fraction above; higher orders use the upward recurrence, which is
//! stable for K.

use crate::error::{invalid, Result};

const EULER: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;
const MAX_ITER: usize = 100_000;

/// (e^x K_0(x), e^x K_1(x)) for x > 0.
pub fn bessel_k01_scaled(x: f64) -> (f64, f64) {
    if x < 2.0 {
        let x2 = 0.5 * x;
        let d = -x2.ln();
        let mut ff = d - EULER;
        let mut sum = ff;
        let mut p = 0.5;
        let mut q = 0.5;
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        for i in 1..MAX_ITER {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi);
            c *= dd / fi;
            p /= fi;
            q /= fi;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        let scale = x.exp();
        (sum * scale, sum1 * (2.0 / x) * scale)
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut h = d;
        let mut delh = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 1..MAX_ITER {
            let fi = i as f64;
            a -= 2.0 * fi;
            c = -a * c / (fi + 1.0);
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                break;
            }
        }
        h *= a1;
        let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() / s;
        let k1 = k0 * (x + 0.5 - h) / x;
        (k0, k1)
    }
}

/// K_order(x) for x > 0.
pub fn bessel_k(order: u32, x: f64) -> Result<f64> {
    Ok(log_bessel_k(order, x)?.exp())
}

/// Natural log of K_order(x); finite where K itself would over- or underflow.
pub fn log_bessel_k(order: u32, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(invalid(format!("K_n needs x > 0, got {x}")));
    }
    if x == f64::INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let (k0, k1) = bessel_k01_scaled(x);
    if order == 0 {
        return Ok(k0.ln() - x);
    }
    let mut prev = k0;
    let mut cur = k1;
    let mut log_scale = 0.0;
    for n in 1..order {
        let next = prev + (2.0 * n as f64 / x) * cur;
        prev = cur;
        cur = next;
        if cur > 1e250 {
            prev /= cur;
            log_scale += cur.ln();
            cur = 1.0;
        }
    }
    Ok(cur.ln() + log_scale - x)
}
