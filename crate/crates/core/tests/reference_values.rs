//! Values frozen from an independent high-precision implementation
//! (120-digit arithmetic for the force curves, DOP853 at rtol 1e-12 for the
//! purity contours).

use levloop::metrology::{strategy_qfi, QfiConvention, StrategyKind};
use levloop::protocol::{loop_purity, purity_crossing, LoopSpec, NoiseChannel};
use levloop::{NoiseParams, ThermalSpec};

fn fmin(t: f64, noise: NoiseParams) -> f64 {
    1.0 / strategy_qfi(StrategyKind::Loop, t, &noise, 0.0, QfiConvention::ClosedForm)
        .unwrap()
        .sqrt()
}

#[test]
fn displacement_noise_force_curve() {
    let noise = NoiseParams::new(1e-6, 0.0, 0.0).unwrap();
    for (t, want) in [
        (10.0, 3.841831396e-3),
        (15.0, 9.92907491e-4),
        (20.0, 9.452024829e-4),
        (30.0, 9.448278726e-4),
        (50.0, 9.448275407e-4),
        (200.0, 9.448275407e-4),
    ] {
        let got = fmin(t, noise);
        assert!((got / want - 1.0).abs() < 1e-6, "T = {t}: {got} vs {want}");
    }
}

#[test]
fn purity_contours_at_eta_100() {
    let spec = LoopSpec::new(100f64.ln(), 0).unwrap();
    let vac = ThermalSpec { nbar: 0.0 };
    let p = loop_purity(&spec, vac, NoiseChannel::Displacement, 1e-7).unwrap();
    assert!((p - 0.992934008718).abs() < 1e-10, "{p}");
    let p = loop_purity(&spec, vac, NoiseChannel::Frequency, 1e-11).unwrap();
    assert!((p - 0.981123482608).abs() < 1e-9, "{p}");

    for (channel, target, want) in [
        (NoiseChannel::Displacement, 0.5, 2.1002e-5),
        (NoiseChannel::Displacement, 0.9, 1.6423e-6),
        (NoiseChannel::Displacement, 0.99, 1.4215e-7),
        (NoiseChannel::Frequency, 0.5, 7.7221e-10),
        (NoiseChannel::Frequency, 0.9, 6.0378e-11),
        (NoiseChannel::Frequency, 0.99, 5.2262e-12),
    ] {
        let got = purity_crossing(&spec, vac, channel, target, 1e-14, 1e-2).unwrap();
        assert!((got / want - 1.0).abs() < 1e-4, "{channel:?} {target}: {got:e} vs {want:e}");
    }
}

