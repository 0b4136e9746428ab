use levloop::gaussian::{evolve_schedule, GaussianState1, NoiseParams, Schedule, Segment};
use levloop::oracle::{
    build_operators, default_dim, evolve_master, evolve_master_checked, fidelity_pure, fock_state, gaussianity_gap,
    moments_from_rho, purity_fock, trace_distance, FockDensity, DEFAULT_DT,
};
use levloop::protocol::{build_loop, LoopSpec};
use std::f64::consts::PI;

/// Largest discrepancy with means scaled by the standard deviations and
/// covariances by `√(Σᵢᵢ Σⱼⱼ)`.
fn discrepancy(a: &GaussianState1, b: &GaussianState1) -> f64 {
    let sx = b.var_x.sqrt();
    let sp = b.var_p.sqrt();
    [
        (a.mean_x - b.mean_x).abs() / sx,
        (a.mean_p - b.mean_p).abs() / sp,
        (a.var_x - b.var_x).abs() / b.var_x,
        (a.var_p - b.var_p).abs() / b.var_p,
        (a.cov_xp - b.cov_xp).abs() / (sx * sp),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

fn compare(schedule: &Schedule, noise: &NoiseParams, dim: usize) -> f64 {
    let rho = evolve_master(&FockDensity::vacuum(dim).unwrap(), schedule, noise, DEFAULT_DT).unwrap();
    rho.validate().unwrap();
    let ops = build_operators(dim).unwrap();
    let oracle = moments_from_rho(&rho, &ops).unwrap();
    let gauss = evolve_schedule(&GaussianState1::vacuum(), schedule, noise).unwrap();
    discrepancy(&oracle, &gauss)
}

#[test]
fn harmonic_frequency_noise_moments() {
    let s: Schedule = [Segment::harmonic(PI)].into_iter().collect();
    let noise = NoiseParams::new(0.0, 1e-3, 0.0).unwrap();
    assert!(compare(&s, &noise, 60) < 1e-4);
}

#[test]
fn loop_with_all_channels_matches_moments() {
    let spec = LoopSpec::new(1.0, 0).unwrap();
    let noise = NoiseParams::new(1e-3, 1e-4, 0.05).unwrap();
    let d = compare(&build_loop(&spec), &noise, default_dim(1.0));
    assert!(d < 1e-4, "discrepancy {d:e}");
}

#[test]
fn inverted_and_free_segments_match_moments() {
    let s: Schedule = [Segment::inverted(0.7), Segment::free(0.5), Segment::harmonic(0.4)]
        .into_iter()
        .collect();
    for noise in [
        NoiseParams::new(2e-3, 0.0, -0.1).unwrap(),
        NoiseParams::new(0.0, 5e-4, 0.0).unwrap(),
        NoiseParams::new(0.0, 0.0, 0.2).unwrap(),
    ] {
        let d = compare(&s, &noise, 80);
        assert!(d < 1e-4, "{noise:?}: {d:e}");
    }
}

#[test]
fn loop_identity_vacuum_and_thermal() {
    let spec = LoopSpec::new(1.0, 0).unwrap();
    let s = build_loop(&spec);
    let none = NoiseParams::none();
    let vac = evolve_master(&FockDensity::vacuum(60).unwrap(), &s, &none, DEFAULT_DT).unwrap();
    assert!(fidelity_pure(&fock_state(60, 0).unwrap(), &vac).unwrap() >= 1.0 - 1e-6);

    // dim 60 leaks past the limit for this input; use the default dimension.
    let th0 = FockDensity::thermal(default_dim(1.0), 0.5).unwrap();
    let th = evolve_master(&th0, &s, &none, DEFAULT_DT).unwrap();
    assert!(trace_distance(&th, &th0).unwrap() <= 1e-6);
}

#[test]
fn gaussianity_gaps() {
    let spec = LoopSpec::new(0.5, 0).unwrap();
    let s = build_loop(&spec);
    let dim = default_dim(0.5);
    let ops = build_operators(dim).unwrap();
    let vac = FockDensity::vacuum(dim).unwrap();

    let clean = evolve_master(&vac, &s, &NoiseParams::none(), DEFAULT_DT).unwrap();
    assert!(gaussianity_gap(&clean, &ops).unwrap() <= 1e-8);

    let displaced = evolve_master(&vac, &s, &NoiseParams::new(1e-3, 0.0, 0.0).unwrap(), DEFAULT_DT).unwrap();
    assert!(gaussianity_gap(&displaced, &ops).unwrap() <= 1e-6);
    assert!(purity_fock(&displaced) < 1.0);

    let freq = evolve_master(&vac, &s, &NoiseParams::new(0.0, 1e-3, 0.0).unwrap(), DEFAULT_DT).unwrap();
    assert!(gaussianity_gap(&freq, &ops).unwrap() > 0.0);
}

#[test]
fn richardson_estimate_is_small() {
    let s: Schedule = [Segment::inverted(0.5)].into_iter().collect();
    let out = evolve_master_checked(
        &FockDensity::vacuum(40).unwrap(),
        &s,
        &NoiseParams::new(1e-3, 1e-3, 0.0).unwrap(),
        DEFAULT_DT,
    )
    .unwrap();
    assert!(out.richardson_error < 1e-10);
    out.rho.validate().unwrap();
}
