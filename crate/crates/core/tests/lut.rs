mod common;

use std::sync::Arc;

use ambient_detect::channel::SystemParams;
use ambient_detect::likelihood::LikelihoodContext;
use ambient_detect::lut::{build_table, Fallback, Kernel, LookupTable};
use ambient_detect::special_fn::log_il_bessel_form;
use ambient_detect::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `ln I_N(z; σ_w², σ_sr²σ_s²)` at default parameters.
fn log_in_kernel() -> Kernel {
    Kernel::LogIl { a: 1.0, b: 1.0, l: 10, tol: 1e-10 }
}

#[test]
fn identity_table_layout() {
    let t = build_table(Kernel::Identity, 0.1, 2000.0, Fallback::DirectQuadrature).unwrap();
    assert_eq!(t.values().len(), 20001);
    for (i, &v) in t.values().iter().enumerate() {
        assert_eq!(v, i as f64 * 0.1);
    }
    assert_eq!(t.seam_gap(), 0.0);
}

#[test]
fn grid_points_and_midpoints() {
    let t = build_table(log_in_kernel(), 0.5, 50.0, Fallback::BesselBound).unwrap();
    let v = t.values();
    for i in [0usize, 1, 17, 99, 100] {
        assert_eq!(t.lookup(i as f64 * 0.5).unwrap(), v[i]);
    }
    for i in [0usize, 10, 98] {
        let mid = t.lookup((i as f64 + 0.5) * 0.5).unwrap();
        assert!((mid - 0.5 * (v[i] + v[i + 1])).abs() < 1e-12 * mid.abs().max(1.0));
    }
}

#[test]
fn stored_values_match_fresh_quadrature() {
    let kernel = log_in_kernel();
    let t = build_table(kernel.clone(), 0.1, 2000.0, Fallback::BesselBound).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..20 {
        let i = rng.gen_range(0..t.values().len());
        let z = i as f64 * 0.1;
        assert_eq!(t.values()[i], kernel.eval(z).unwrap());
        let oracle = common::log_il(z, 1.0, 1.0, 10);
        assert!((t.values()[i] - oracle).abs() < 1e-9, "z={z}");
    }
}

#[test]
fn interpolation_error_is_small() {
    let kernel = log_in_kernel();
    let t = build_table(kernel.clone(), 0.1, 2000.0, Fallback::BesselBound).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let z = rng.gen_range(0.0..2000.0);
        let rel = (t.lookup(z).unwrap() - kernel.eval(z).unwrap()).exp_m1().abs();
        worst = worst.max(rel);
    }
    assert!(worst < 1e-3, "worst relative error {worst}");
}

#[test]
fn interpolation_preserves_monotonicity() {
    let t = build_table(log_in_kernel(), 0.5, 100.0, Fallback::BesselBound).unwrap();
    let mut prev = f64::INFINITY;
    for k in 0..=4000 {
        let v = t.lookup(k as f64 * 0.025).unwrap();
        assert!(v <= prev);
        prev = v;
    }
}

#[test]
fn fallbacks_past_the_grid() {
    let kernel = log_in_kernel();
    let bessel = build_table(kernel.clone(), 0.5, 100.0, Fallback::BesselBound).unwrap();
    let quad = build_table(kernel.clone(), 0.5, 100.0, Fallback::DirectQuadrature).unwrap();
    for z in [100.3, 150.0, 1e4] {
        assert_eq!(bessel.lookup(z).unwrap(), log_il_bessel_form(z, 1.0, 10).unwrap());
        assert_eq!(quad.lookup(z).unwrap(), kernel.eval(z).unwrap());
    }
    // The bound sits above the integral, and the recorded seam gap says by how much.
    let end = bessel.grid_end();
    let gap = log_il_bessel_form(end, 1.0, 10).unwrap() - kernel.eval(end).unwrap();
    assert!(gap >= -1e-12);
    assert!((bessel.seam_gap() - gap).abs() < 1e-12);
    assert!(quad.seam_gap() < 1e-12);
}

#[test]
fn build_is_deterministic_and_round_trips() {
    let ctx = Arc::new(LikelihoodContext::new(SystemParams::default(), 1e-6).unwrap());
    let kernel = Kernel::IndirectLogI1(Arc::clone(&ctx));
    let a = build_table(kernel.clone(), 0.1, 200.0, Fallback::BesselBound).unwrap();
    let b = build_table(kernel.clone(), 0.1, 200.0, Fallback::BesselBound).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.ablut");
    a.save(&path).unwrap();
    let loaded = LookupTable::load(&path, kernel.clone()).unwrap();
    assert_eq!(loaded.to_bytes(), a.to_bytes());
    assert_eq!(loaded.lookup(123.45).unwrap(), a.lookup(123.45).unwrap());

    let other = Kernel::IndirectLogI1(Arc::new(
        LikelihoodContext::new(SystemParams { alpha: 0.5, ..SystemParams::default() }, 1e-6).unwrap(),
    ));
    assert!(LookupTable::load(&path, other).is_err());

    let mut bytes = a.to_bytes();
    let k = bytes.len() / 2;
    bytes[k] ^= 0x40;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(LookupTable::load(&path, kernel), Err(Error::TableFormat { .. })));
}

#[test]
fn bad_grids_and_queries() {
    assert!(build_table(Kernel::Identity, 0.0, 10.0, Fallback::DirectQuadrature).is_err());
    assert!(build_table(Kernel::Identity, 1.0, 0.5, Fallback::DirectQuadrature).is_err());
    assert!(build_table(Kernel::Identity, 0.1, 10.0, Fallback::BesselBound).is_err());
    let t = build_table(Kernel::Identity, 0.1, 10.0, Fallback::DirectQuadrature).unwrap();
    assert!(t.lookup(-0.1).is_err());
    let failing = Kernel::LogIl { a: 1.0, b: 1.0, l: 2, tol: 0.0 };
    match build_table(failing, 0.1, 1.0, Fallback::DirectQuadrature) {
        Err(Error::TableBuild { z, .. }) => assert!((0.0..=1.0).contains(&z)),
        other => panic!("expected a build failure, got {other:?}"),
    }
}
