mod common;

use ambient_detect::channel::{sample_channels, trial_rng, SystemParams};
use ambient_detect::harness::checks::{energy_mass, mass_of_v1};
use ambient_detect::likelihood::{
    log_density_of_energy, log_pdf_v, log_pdf_y, log_pdf_y_b0, log_pdf_y_b1, log_pdf_y_sic, Hypothesis,
    LikelihoodContext,
};
use common::{ks_critical, ks_distance, Link};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params() -> SystemParams {
    SystemParams {
        sigma_s2: 2.0,
        sigma_st2: 0.5,
        sigma_tr2: 3.0,
        sigma_sr2: 1.5,
        sigma_w2: 0.7,
        alpha: 0.8,
        n_samples: 4,
    }
}

fn ctx(p: SystemParams) -> LikelihoodContext {
    LikelihoodContext::new(p, 1e-9).unwrap()
}

/// Five energies spread over the bulk of both hypotheses.
fn random_energies(p: &SystemParams, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = p.n() * ((p.sigma_sr2 + p.product_gain()) * p.sigma_s2 + p.sigma_w2);
    (0..5).map(|_| rng.gen_range(0.05..3.0) * mean).collect()
}

#[test]
fn direct_gain_density() {
    let c = ctx(params());
    assert!((log_pdf_v(0.0, Hypothesis::Absent, &c).unwrap() + 1.5f64.ln()).abs() < 1e-15);
    assert!(log_pdf_v(-1.0, Hypothesis::Absent, &c).is_err());
}

#[test]
fn v1_density_against_mixture_oracle() {
    let p = params();
    let c = ctx(p);
    let link = Link::from_params(&p);
    for v in [0.0, 0.01, 0.4, 2.0, 9.0, 40.0] {
        let got = log_pdf_v(v, Hypothesis::Present, &c).unwrap();
        let want = link.log_pdf_v1(v);
        assert!((got - want).abs() < 1e-8, "v={v}: {got} vs {want}");
    }
}

#[test]
fn v1_density_is_normalized() {
    for p in [params(), SystemParams::default(), SystemParams { sigma_tr2: 1000.0, ..SystemParams::default() }] {
        let mass = mass_of_v1(&ctx(p)).unwrap();
        assert!((mass - 1.0).abs() < 1e-6, "{p:?}: {mass}");
    }
}

#[test]
fn v1_density_fits_simulation() {
    let p = params();
    let c = LikelihoodContext::new(p, 1e-8).unwrap();
    let mut rng = trial_rng(21, 0);
    let mut v: Vec<f64> = (0..20_000).map(|_| sample_channels(&p, &mut rng).v1).collect();
    v.sort_by(f64::total_cmp);
    // CDF by accumulating the density between consecutive samples.
    let mut cdf = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    let density = |x: f64| log_pdf_v(x, Hypothesis::Present, &c).unwrap().exp();
    for &x in &v {
        let mid = 0.5 * (prev + x);
        acc += (x - prev) / 6.0 * (density(prev) + 4.0 * density(mid) + density(x));
        cdf.push(acc);
        prev = x;
    }
    assert!(ks_distance(&cdf) < ks_critical(v.len(), 0.01));
}

#[test]
fn b0_matches_mixture_oracle() {
    for p in [params(), SystemParams { n_samples: 16, ..params() }] {
        let c = ctx(p);
        let link = Link::from_params(&p);
        for z in random_energies(&p, 1) {
            let got = log_pdf_y_b0(z, &c).unwrap();
            let want = link.log_pdf_y0(z);
            assert!((got - want).abs() < 1e-6, "z={z}: {got} vs {want}");
        }
    }
}

#[test]
fn b1_matches_mixture_oracle() {
    for p in [params(), SystemParams { n_samples: 16, ..params() }] {
        let c = ctx(p);
        let link = Link::from_params(&p);
        for z in random_energies(&p, 2) {
            let got = log_pdf_y_b1(z, &c).unwrap();
            let want = link.log_pdf_y1(z);
            assert!((got - want).abs() < 1e-5, "z={z}: {got} vs {want}");
        }
    }
}

#[test]
fn sic_matches_mixture_oracle() {
    let p = params();
    let c = ctx(p);
    let link = Link::from_params(&p);
    for z in random_energies(&p, 3) {
        let got = log_pdf_y_sic(z, Hypothesis::Present, &c).unwrap();
        let want = link.log_pdf_y1_sic(z);
        assert!((got - want).abs() < 1e-5, "z={z}: {got} vs {want}");
    }
    let n = p.n();
    let peak = log_pdf_y_sic(0.0, Hypothesis::Absent, &c).unwrap();
    assert!((peak + n * (std::f64::consts::PI * p.sigma_w2).ln()).abs() < 1e-12);
}

#[test]
fn sic_is_the_vanishing_direct_path_limit() {
    let p = SystemParams { sigma_sr2: 1e-8, ..params() };
    let c = ctx(p);
    for z in [0.5, 3.0, 12.0, 40.0] {
        let b1 = log_pdf_y_b1(z, &c).unwrap();
        let sic = log_pdf_y_sic(z, Hypothesis::Present, &c).unwrap();
        assert!((b1 - sic).abs() < 1e-4, "z={z}: {b1} vs {sic}");
    }
}

#[test]
fn silent_tag_limit() {
    let p = SystemParams { alpha: 1e-4, ..params() };
    let c = ctx(p);
    for z in [1.0, 5.0, 15.0, 30.0] {
        let gap = log_pdf_y_b1(z, &c).unwrap() - log_pdf_y_b0(z, &c).unwrap();
        assert!(gap.abs() < 1e-3, "z={z}: {gap}");
    }
}

#[test]
fn energy_densities_are_normalized() {
    for n in [1, 4, 16, 64] {
        let p = SystemParams { n_samples: n, ..params() };
        let c = ctx(p);
        for (hyp, sic) in [
            (Hypothesis::Absent, false),
            (Hypothesis::Present, false),
            (Hypothesis::Absent, true),
            (Hypothesis::Present, true),
        ] {
            let mass = energy_mass(&c, hyp, sic, f64::INFINITY).unwrap();
            assert!((mass - 1.0).abs() < 1e-5, "N={n} {hyp:?} sic={sic}: {mass}");
        }
    }
}

#[test]
fn densities_finite_and_decreasing_past_the_mode() {
    let p = params();
    let c = ctx(p);
    let z_max = 400.0;
    for hyp in [Hypothesis::Absent, Hypothesis::Present] {
        for sic in [false, true] {
            let f = |z: f64| {
                let y = if sic { log_pdf_y_sic(z, hyp, &c) } else { log_pdf_y(z, hyp, &c) };
                log_density_of_energy(y.unwrap(), z, p.n_samples)
            };
            let grid: Vec<f64> = (1..=400).map(|k| k as f64 * z_max / 400.0).collect();
            let vals: Vec<f64> = grid.iter().map(|&z| f(z)).collect();
            assert!(vals.iter().all(|v| v.is_finite()));
            let mode = vals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert!(vals[mode..].windows(2).all(|w| w[1] < w[0]), "{hyp:?} sic={sic}");
            // The density of y itself never increases.
            let y0 = if sic { log_pdf_y_sic(1.0, hyp, &c) } else { log_pdf_y(1.0, hyp, &c) };
            let y1 = if sic { log_pdf_y_sic(2.0, hyp, &c) } else { log_pdf_y(2.0, hyp, &c) };
            assert!(y1.unwrap() < y0.unwrap());
        }
    }
}

#[test]
fn negative_energy_is_rejected() {
    let c = ctx(params());
    assert!(log_pdf_y_b0(-1.0, &c).is_err());
    assert!(log_pdf_y_b1(-1.0, &c).is_err());
    assert!(log_pdf_y_sic(-1.0, Hypothesis::Present, &c).is_err());
    assert!(LikelihoodContext::new(SystemParams { alpha: 0.0, ..params() }, 1e-6).is_err());
}
