use levloop::oracle::{two_mode_pure, DEFAULT_DT};
use levloop::protocol::{build_loop, LoopSpec};
use levloop::twobody::{reduced_purity, run_two_loop, sm_moment_rhs, GaussianState2};
use levloop::gaussian::NoiseParams;

fn rk4_moments(y0: [f64; 10], spec: &LoopSpec, g: f64, steps_per_unit: usize) -> [f64; 10] {
    let mut y = y0;
    for seg in build_loop(spec).segments() {
        let a = seg.curvature();
        let n = ((seg.duration_tau * steps_per_unit as f64).ceil() as usize).max(1);
        let h = seg.duration_tau / n as f64;
        let add = |y: &[f64; 10], k: &[f64; 10], s: f64| std::array::from_fn::<f64, 10, _>(|i| y[i] + s * k[i]);
        for _ in 0..n {
            let k1 = sm_moment_rhs(&y, a, g);
            let k2 = sm_moment_rhs(&add(&y, &k1, h / 2.0), a, g);
            let k3 = sm_moment_rhs(&add(&y, &k2, h / 2.0), a, g);
            let k4 = sm_moment_rhs(&add(&y, &k3, h), a, g);
            for i in 0..10 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    y
}

#[test]
fn moment_equations_match_propagator() {
    for (t1, g) in [(0.5, 0.05), (2.0, 1e-3), (3.0, -2e-3)] {
        let spec = LoopSpec::new(t1, 0).unwrap();
        let start = GaussianState2::thermal(0.5, 1.5).unwrap();
        let prop = run_two_loop(&start, &spec, g, &NoiseParams::none()).unwrap();
        let rk = rk4_moments(start.sm_moments(), &spec, g, 4000);
        let want = prop.sm_moments();
        let scale = want.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 0..10 {
            assert!((rk[i] - want[i]).abs() <= 1e-8 * scale, "t1={t1} g={g} moment {i}: {} vs {}", rk[i], want[i]);
        }
    }
}

#[test]
fn fock_two_mode_reduced_purity() {
    for (t1, g) in [(0.3, 0.05), (0.5, 0.02), (0.0, 0.1)] {
        let spec = LoopSpec::new(t1, 0).unwrap();
        let oracle = two_mode_pure(24, &build_loop(&spec), g, DEFAULT_DT).unwrap();
        let gauss = run_two_loop(&GaussianState2::vacuum(), &spec, g, &NoiseParams::none()).unwrap();
        let mu = reduced_purity(&gauss, 1).unwrap();
        assert!(mu < 1.0);
        assert!((oracle.reduced_purity - mu).abs() < 1e-6, "t1={t1}: {} vs {mu}", oracle.reduced_purity);
        let b = gauss.block(1).unwrap();
        assert!((oracle.moments1.var_x - b[(0, 0)]).abs() < 1e-6 * b[(0, 0)]);
        assert!((oracle.moments1.cov_xp - b[(0, 1)]).abs() < 1e-6 * b[(0, 0)]);
    }
}
