use levloop::gaussian::{evolve_schedule, evolve_segment, thermal_state, GaussianState1, NoiseParams, Potential, Schedule, Segment, ThermalSpec};
use levloop::metrology::qfi_from_moments;
use levloop::protocol::{build_loop, loop_eta, loop_purity, LoopSpec, NoiseChannel};
use levloop::twobody::{global_purity, reduced_purity, run_two_loop, GaussianState2};
use nalgebra::{Matrix2, Vector2};
use proptest::prelude::*;

fn potential() -> impl Strategy<Value = Potential> {
    prop_oneof![Just(Potential::Harmonic), Just(Potential::Inverted), Just(Potential::Free)]
}

fn segment() -> impl Strategy<Value = Segment> {
    (potential(), 0.3..=1.0f64, 0.0..2.0f64).prop_map(|(sign, k, d)| Segment {
        sign,
        stiffness_scale: k,
        duration_tau: d,
    })
}

fn state() -> impl Strategy<Value = GaussianState1> {
    (-2.0..2.0f64, -2.0..2.0f64, 0.0..3.0f64, -1.0..1.0f64, 0.0..2.0f64).prop_map(|(mx, mp, nbar, r, th)| {
        // Squeezed, rotated thermal state.
        let v = 2.0 * nbar + 1.0;
        let (a, b) = (v * r.exp(), v * (-r).exp());
        let (s, c) = th.sin_cos();
        GaussianState1::new(mx, mp, a * c * c + b * s * s, a * s * s + b * c * c, (a - b) * s * c).unwrap()
    })
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn same(a: &GaussianState1, b: &GaussianState1, rel: f64) -> bool {
    close(a.mean_x, b.mean_x, rel)
        && close(a.mean_p, b.mean_p, rel)
        && close(a.var_x, b.var_x, rel)
        && close(a.var_p, b.var_p, rel)
        && close(a.cov_xp, b.cov_xp, rel)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn segments_compose(s0 in state(), seg in segment(), split in 0.0..1.0f64, g1 in 0.0..1e-2f64, g2 in 0.0..1e-3f64, f in -0.5..0.5f64) {
        for noise in [NoiseParams::new(0.0, 0.0, f).unwrap(), NoiseParams::new(g1, g2, f).unwrap()] {
            let whole = evolve_segment(&s0, &seg, &noise).unwrap();
            let first = evolve_segment(&s0, &seg.with_duration(seg.duration_tau * split), &noise).unwrap();
            let both = evolve_segment(&first, &seg.with_duration(seg.duration_tau * (1.0 - split)), &noise).unwrap();
            prop_assert!(same(&whole, &both, 1e-8), "{whole:?} vs {both:?}");
        }
    }

    #[test]
    fn force_sign_mirrors_means(seg in proptest::collection::vec(segment(), 1..4), g1 in 0.0..1e-2f64, g2 in 0.0..1e-3f64, f in -0.5..0.5f64) {
        let sched = Schedule::new(seg).unwrap();
        let plus = evolve_schedule(&GaussianState1::vacuum(), &sched, &NoiseParams::new(g1, g2, f).unwrap()).unwrap();
        let minus = evolve_schedule(&GaussianState1::vacuum(), &sched, &NoiseParams::new(g1, g2, -f).unwrap()).unwrap();
        prop_assert!(close(plus.mean_x, -minus.mean_x, 1e-8) && close(plus.mean_p, -minus.mean_p, 1e-8));
        prop_assert!(close(plus.var_x, minus.var_x, 1e-8) && close(plus.var_p, minus.var_p, 1e-8));
        prop_assert!(close(plus.cov_xp, minus.cov_xp, 1e-8));
    }

    #[test]
    fn noise_free_evolution_keeps_determinant(s0 in state(), seg in proptest::collection::vec(segment(), 1..5), f in -1.0..1.0f64) {
        let out = evolve_schedule(&s0, &Schedule::new(seg).unwrap(), &NoiseParams::new(0.0, 0.0, f).unwrap()).unwrap();
        prop_assert!((out.det() - s0.det()).abs() <= 1e-9 * s0.det() * out.var_x.max(out.var_p));
    }

    #[test]
    fn displacement_noise_grows_determinant(s0 in state(), seg in segment(), g1 in 1e-5..1e-2f64) {
        let noise = NoiseParams::new(g1, 0.0, 0.0).unwrap();
        let mut prev = s0.det();
        let mut cur = s0;
        for _ in 0..4 {
            cur = evolve_segment(&cur, &seg.with_duration(seg.duration_tau / 4.0), &noise).unwrap();
            prop_assert!(cur.det() >= prev * (1.0 - 1e-12));
            prev = cur.det();
        }
    }

    #[test]
    fn qfi_is_symplectic_invariant(th in 0.0..6.3f64, r in -1.0..1.0f64, nbar in 0.0..2.0f64, d in -1.0..1.0f64, u in -2.0..2.0f64, v in -2.0..2.0f64) {
        let sigma = Matrix2::new(2.0 * nbar + 1.0 + 0.1, 0.2, 0.2, 2.0 * nbar + 1.0);
        let dsigma = Matrix2::new(d, 0.3 * d, 0.3 * d, -0.5 * d);
        let du = Vector2::new(u, v);
        let (s, c) = th.sin_cos();
        let rot = Matrix2::new(c, -s, s, c);
        let sq = Matrix2::new(r.exp(), 0.0, 0.0, (-r).exp());
        let m = sq * rot;
        let a = qfi_from_moments(&sigma, &dsigma, &du).unwrap();
        let b = qfi_from_moments(&(m * sigma * m.transpose()), &(m * dsigma * m.transpose()), &(m * du)).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn loop_returns_thermal_states(t1 in 0.0..6.0f64, l in 0u32..3, nbar in 0.0..5.0f64) {
        let s0 = thermal_state(ThermalSpec { nbar }).unwrap();
        let spec = LoopSpec::new(t1, l).unwrap();
        let out = evolve_schedule(&s0, &build_loop(&spec), &NoiseParams::none()).unwrap();
        prop_assert!(same(&out, &s0, 1e-8), "{out:?}");
        // At mid-protocol an odd-l loop has rotated the long axis onto p̃.
        let want = if l % 2 == 0 { t1.exp() } else { (-t1).exp() };
        let eta = loop_eta(&s0, &spec).unwrap();
        prop_assert!((eta - want).abs() <= 1e-9 * want, "{eta} vs {want}");
    }

    #[test]
    fn purity_decreases_with_rate_and_time(t1 in 0.5..5.0f64, rate in 1e-9..1e-5f64) {
        let init = ThermalSpec { nbar: 0.0 };
        let spec = LoopSpec::new(t1, 0).unwrap();
        let longer = LoopSpec::new(t1 + 0.25, 0).unwrap();
        for ch in [NoiseChannel::Displacement, NoiseChannel::Frequency] {
            let p = loop_purity(&spec, init, ch, rate).unwrap();
            prop_assert!(p <= 1.0 + 1e-12);
            prop_assert!(loop_purity(&spec, init, ch, rate * 2.0).unwrap() < p);
            prop_assert!(loop_purity(&longer, init, ch, rate).unwrap() < p);
        }
    }

    #[test]
    fn two_body_loop_properties(t1 in 0.0..5.0f64, g in 1e-6..1e-3f64) {
        // Beyond η²g ~ 1 the final covariance entries grow and the 4×4
        // determinant loses the digits needed for a 1e-9 purity check.
        prop_assume!((2.0 * t1).exp() * g <= 2.0);
        let spec = LoopSpec::new(t1, 0).unwrap();
        let out = run_two_loop(&GaussianState2::vacuum(), &spec, g, &NoiseParams::none()).unwrap();
        let mirrored = run_two_loop(&GaussianState2::vacuum(), &spec, -g, &NoiseParams::none()).unwrap();
        prop_assert!((global_purity(&out).unwrap() - 1.0).abs() <= 1e-9);
        let mu1 = reduced_purity(&out, 1).unwrap();
        prop_assert!((mu1 - reduced_purity(&out, 2).unwrap()).abs() <= 1e-9);
        prop_assert!((mu1 - reduced_purity(&mirrored, 1).unwrap()).abs() <= 1e-9);
        let stronger = run_two_loop(&GaussianState2::vacuum(), &spec, 1.5 * g, &NoiseParams::none()).unwrap();
        prop_assert!(reduced_purity(&stronger, 1).unwrap() <= mu1);
    }
}
