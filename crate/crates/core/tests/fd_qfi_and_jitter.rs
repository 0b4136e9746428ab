use levloop::gaussian::{evolve_schedule, thermal_state, GaussianState1, NoiseParams, ThermalSpec};
use levloop::metrology::{qfi_from_moments, strategy_qfi, QfiConvention, StrategyKind};
use levloop::physcal::{jitter_averaged_moments, jitter_quadrature_moments, jitter_to_gamma2};
use levloop::protocol::{build_loop, LoopSpec};
use nalgebra::Vector2;

/// QFI from central differences of the propagated moments in f.
fn fd_qfi(kind: StrategyKind, total: f64, noise: &NoiseParams, nbar: f64, h: f64) -> f64 {
    let sched = kind.schedule(total).unwrap();
    let s0 = thermal_state(ThermalSpec { nbar }).unwrap();
    let run = |f: f64| {
        let n = NoiseParams::new(noise.gamma1, noise.gamma2, f).unwrap();
        evolve_schedule(&s0, &sched, &n).unwrap()
    };
    let (lo, hi, mid) = (run(noise.force_f - h), run(noise.force_f + h), run(noise.force_f));
    let d = |a: f64, b: f64| (b - a) / (2.0 * h);
    let dcov = GaussianState1 {
        mean_x: 0.0,
        mean_p: 0.0,
        var_x: d(lo.var_x, hi.var_x),
        var_p: d(lo.var_p, hi.var_p),
        cov_xp: d(lo.cov_xp, hi.cov_xp),
    }
    .covariance();
    let dmean = Vector2::new(d(lo.mean_x, hi.mean_x), d(lo.mean_p, hi.mean_p));
    qfi_from_moments(&mid.covariance(), &dcov, &dmean).unwrap()
}

#[test]
fn sensitivity_equations_match_finite_differences() {
    let noises = [
        NoiseParams::none(),
        NoiseParams::new(1e-4, 0.0, 0.3).unwrap(),
        NoiseParams::new(0.0, 1e-4, 0.3).unwrap(),
        NoiseParams::new(2e-4, 5e-5, -0.2).unwrap(),
    ];
    for kind in [StrategyKind::Loop, StrategyKind::Inverted, StrategyKind::Free] {
        for total in [2.0, 4.0, 6.0] {
            for noise in &noises {
                for nbar in [0.0, 1.0] {
                    let ode = strategy_qfi(kind, total, noise, nbar, QfiConvention::Sld).unwrap();
                    let fd = fd_qfi(kind, total, noise, nbar, 1e-5);
                    assert!(
                        (ode - fd).abs() <= 1e-4 * ode,
                        "{kind:?} T={total} {noise:?} nbar={nbar}: {ode} vs {fd}"
                    );
                }
            }
        }
    }
}

#[test]
fn jitter_average_matches_frequency_noise() {
    for sigma in [1e-4, 1e-3] {
        for t1 in [3.0, 5.0] {
            let spec = LoopSpec::new(t1, 0).unwrap();
            let g2 = jitter_to_gamma2(sigma, 1.0).unwrap();
            let s = evolve_schedule(
                &GaussianState1::vacuum(),
                &build_loop(&spec),
                &NoiseParams::new(0.0, g2, 0.0).unwrap(),
            )
            .unwrap();
            let (x2, p2, xp) = jitter_averaged_moments(sigma, t1);
            let quad = jitter_quadrature_moments(sigma, &spec, 20).unwrap();
            for (got, want, q) in [(s.var_x, x2, quad.0), (s.var_p, p2, quad.1), (s.cov_xp, xp, quad.2)] {
                assert!((got - want).abs() <= 0.01 * want.abs(), "σ={sigma} t1={t1}: {got} vs {want}");
                assert!((q - want).abs() <= 1e-6 * want.abs(), "quadrature σ={sigma} t1={t1}: {q} vs {want}");
            }
        }
    }
}
