//! Quantum Fisher information for static-force sensing.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::FramedState;
use crate::gaussian::{thermal_state, GaussianState1, NoiseParams, Schedule, Segment, ThermalSpec};
use crate::protocol::{build_loop, LoopSpec};

/// Below this `ν − 1` the pure-state limit of the covariance term is used.
pub const PURE_LIMIT: f64 = 1e-6;

/// A state together with `∂/∂f` of each of its five moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityState {
    pub state: GaussianState1,
    /// Component-wise derivatives; not itself a physical state.
    pub dstate: GaussianState1,
}

impl SensitivityState {
    /// Initial condition independent of f.
    pub fn new(state: GaussianState1) -> Self {
        Self {
            state,
            dstate: GaussianState1 {
                mean_x: 0.0,
                mean_p: 0.0,
                var_x: 0.0,
                var_p: 0.0,
                cov_xp: 0.0,
            },
        }
    }
}

/// Sensing strategy of total duration T.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    /// l = 0 loop with t₁ = (T − π/2)/2.
    Loop,
    /// One inverted segment of length T.
    Inverted,
    /// Free evolution for T.
    Free,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Loop => "loop",
            StrategyKind::Inverted => "inverted",
            StrategyKind::Free => "free",
        }
    }

    pub fn schedule(self, total_tau: f64) -> Result<Schedule> {
        if !(total_tau.is_finite() && total_tau >= 0.0) {
            return Err(Error::domain(format!("total time must be ≥ 0, got {total_tau}")));
        }
        Ok(match self {
            StrategyKind::Loop => build_loop(&LoopSpec::from_total_time(total_tau)?),
            StrategyKind::Inverted => [Segment::inverted(total_tau)].into_iter().collect(),
            StrategyKind::Free => [Segment::free(total_tau)].into_iter().collect(),
        })
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loop" => Ok(StrategyKind::Loop),
            "inverted" => Ok(StrategyKind::Inverted),
            "free" => Ok(StrategyKind::Free),
            _ => Err(Error::domain(format!("unknown strategy '{s}' (expected loop, inverted or free)"))),
        }
    }
}

/// Normalization of the reported Fisher information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QfiConvention {
    /// The Gaussian formula evaluated as written for vacuum covariance = I.
    Sld,
    /// Half of [`QfiConvention::Sld`]; the normalization of the published
    /// closed forms for I_loop, I_inv and I_free.
    #[default]
    ClosedForm,
}

impl QfiConvention {
    pub fn scale(self) -> f64 {
        match self {
            QfiConvention::Sld => 1.0,
            QfiConvention::ClosedForm => 0.5,
        }
    }
}

/// Advance state and f-derivatives through one segment.
pub fn sensitivity_evolve(ss: &SensitivityState, seg: &Segment, noise: &NoiseParams) -> Result<SensitivityState> {
    ss.state.validate()?;
    seg.validate()?;
    noise.validate()?;
    let mut fs = FramedState::with_sensitivity(&ss.state, &ss.dstate);
    fs.evolve(seg, noise)?;
    Ok(SensitivityState {
        state: fs.state(),
        dstate: fs.dstate().expect("sensitivity tracked"),
    })
}

/// Fisher information of a Gaussian family with covariance `cov`, its
/// derivative `dcov` and mean derivative `dmean` (SLD normalization).
///
/// `I = tr[ν⁴(Σ̇Σ⁻¹)² − (Σ̇Ω)²] / (2(ν⁴ − 1)) + u̇ᵀΣ⁻¹u̇`, `ν = √det Σ`. For
/// `ν − 1 < 1e-6` the first term is replaced by its pure-state limit
/// `½ tr[(Σ⁻¹Σ̇)²] ν²/(ν² + 1)`.
pub fn qfi_from_moments(cov: &Matrix2<f64>, dcov: &Matrix2<f64>, dmean: &Vector2<f64>) -> Result<f64> {
    let det = cov.determinant();
    if !det.is_finite() || det < 1.0 - 1e-9 || cov[(0, 0)] <= 0.0 || cov[(1, 1)] <= 0.0 {
        return Err(Error::invalid(format!("covariance with det {det} is not a physical state")));
    }
    let det = det.max(1.0);
    let inv = Matrix2::new(cov[(1, 1)], -cov[(0, 1)], -cov[(1, 0)], cov[(0, 0)]) / det;
    let mean_term = dmean.dot(&(inv * dmean));

    let nu2 = det;
    let nu = nu2.sqrt();
    let a = dcov * inv;
    let tr_a2 = (a * a).trace();
    let cov_term = if nu - 1.0 < PURE_LIMIT {
        0.5 * tr_a2 * nu2 / (nu2 + 1.0)
    } else {
        let omega = Matrix2::new(0.0, 1.0, -1.0, 0.0);
        let b = dcov * omega;
        // Divided through by ν⁴ so that strongly mixed states do not overflow.
        let inv_nu4 = (1.0 / nu2).powi(2);
        (tr_a2 - (b * b).trace() * inv_nu4) / (2.0 * (1.0 - inv_nu4))
    };
    let total = cov_term + mean_term;
    if !total.is_finite() {
        return Err(Error::domain(format!(
            "Fisher information is not representable in double precision (det Σ = {det:e})"
        )));
    }
    Ok(total.max(0.0))
}

/// Fisher information of a sensitivity state (SLD normalization).
pub fn qfi_gaussian(ss: &SensitivityState) -> Result<f64> {
    let d = &ss.dstate;
    qfi_from_moments(
        &ss.state.covariance(),
        &Matrix2::new(d.var_x, d.cov_xp, d.cov_xp, d.var_p),
        &Vector2::new(d.mean_x, d.mean_p),
    )
}

/// Fisher information evaluated on frame quantities, which is exact because
/// the information is invariant under the symplectic frame map.
pub(crate) fn qfi_framed(fs: &FramedState) -> Result<f64> {
    let s = fs
        .sensitivity()
        .ok_or_else(|| Error::invalid("state carries no f-derivatives"))?;
    qfi_from_moments(fs.inner(), &s.dinner, &s.dmean)
}

/// Published closed forms (noise-free, thermal start).
pub fn closed_form_qfi(kind: StrategyKind, total_tau: f64, nbar: f64) -> Result<f64> {
    if !(nbar.is_finite() && nbar >= 0.0) {
        return Err(Error::domain(format!("nbar must be ≥ 0, got {nbar}")));
    }
    if !(total_tau.is_finite() && total_tau >= 0.0) {
        return Err(Error::domain(format!("total time must be ≥ 0, got {total_tau}")));
    }
    let t = total_tau;
    let th = 2.0 * nbar + 1.0;
    Ok(match kind {
        StrategyKind::Loop => {
            if t < FRAC_PI_2 * (1.0 - 1e-12) {
                return Err(Error::domain(format!("loop needs T ≥ π/2, got {t}")));
            }
            let k = 1.0 - 2.0 * (t / 2.0 - FRAC_PI_2 / 2.0).exp();
            4.0 * k * k / th
        }
        StrategyKind::Inverted => {
            let s = (t / 2.0).sinh();
            8.0 * s * s * t.cosh() / th
        }
        StrategyKind::Free => t * t * (t * t + 4.0) / (4.0 * nbar + 2.0),
    })
}

/// Fisher information of one strategy at total time `total_tau`.
pub fn strategy_qfi(
    kind: StrategyKind,
    total_tau: f64,
    noise: &NoiseParams,
    nbar: f64,
    convention: QfiConvention,
) -> Result<f64> {
    noise.validate()?;
    let sched = kind.schedule(total_tau)?;
    let s0 = thermal_state(ThermalSpec { nbar })?;
    let mut fs = FramedState::with_sensitivity(&s0, &SensitivityState::new(s0).dstate);
    for seg in sched.segments() {
        fs.evolve(seg, noise)?;
    }
    Ok(qfi_framed(&fs)? * convention.scale())
}

/// One row of a force-sensitivity curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FminRow {
    pub total_tau: f64,
    pub qfi: f64,
    /// `1/√I_F`.
    pub f_min: f64,
}

/// `f_min(T) = 1/√I_F` over a grid of total times, in grid order.
pub fn fmin_curve(
    kind: StrategyKind,
    t_grid: &[f64],
    noise: &NoiseParams,
    nbar: f64,
    convention: QfiConvention,
) -> Result<Vec<FminRow>> {
    t_grid
        .par_iter()
        .map(|&t| {
            let qfi = strategy_qfi(kind, t, noise, nbar, convention)?;
            Ok(FminRow {
                total_tau: t,
                qfi,
                f_min: 1.0 / qfi.sqrt(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn mean_term_only() {
        let i = qfi_from_moments(&Matrix2::identity(), &Matrix2::zeros(), &Vector2::new(2.0, 0.0)).unwrap();
        assert_relative_eq!(i, 4.0);
        let th = 2.0 * 3.0 + 1.0;
        let i = qfi_from_moments(&(Matrix2::identity() * th), &Matrix2::zeros(), &Vector2::new(2.0, 0.0)).unwrap();
        assert_relative_eq!(i, 4.0 / th, max_relative = 1e-15);
    }

    #[test]
    fn invalid_covariance_rejected() {
        let c = Matrix2::new(0.5, 0.0, 0.0, 0.5);
        assert!(qfi_from_moments(&c, &Matrix2::zeros(), &Vector2::zeros()).is_err());
    }

    #[test]
    fn free_sensitivity() {
        let tau = 1.7;
        let ss = sensitivity_evolve(
            &SensitivityState::new(GaussianState1::vacuum()),
            &Segment::free(tau),
            &NoiseParams::none(),
        )
        .unwrap();
        assert_relative_eq!(ss.dstate.mean_x, -tau * tau, max_relative = 1e-14);
        assert_relative_eq!(ss.dstate.mean_p, -2.0 * tau, max_relative = 1e-14);
        assert_eq!(ss.dstate.var_x, 0.0);
    }

    #[test]
    fn harmonic_period_returns_derivative() {
        let ss = sensitivity_evolve(
            &SensitivityState::new(GaussianState1::vacuum()),
            &Segment::harmonic(2.0 * PI),
            &NoiseParams::none(),
        )
        .unwrap();
        assert!(ss.dstate.mean_x.abs() < 1e-14);
        assert!(ss.dstate.mean_p.abs() < 1e-14);
    }

    #[test]
    fn closed_form_examples() {
        assert_relative_eq!(closed_form_qfi(StrategyKind::Free, 2.0, 0.0).unwrap(), 16.0);
        assert_relative_eq!(
            closed_form_qfi(StrategyKind::Inverted, 1.0, 0.0).unwrap(),
            8.0 * 0.5f64.sinh().powi(2) * 1f64.cosh(),
            max_relative = 1e-15
        );
        assert_relative_eq!(closed_form_qfi(StrategyKind::Loop, FRAC_PI_2, 0.0).unwrap(), 4.0);
        assert!(closed_form_qfi(StrategyKind::Loop, 1.0, 0.0).is_err());
    }

    #[test]
    fn sld_is_twice_closed_form_normalization() {
        for kind in [StrategyKind::Loop, StrategyKind::Inverted, StrategyKind::Free] {
            let sld = strategy_qfi(kind, 3.0, &NoiseParams::none(), 0.0, QfiConvention::Sld).unwrap();
            let cf = closed_form_qfi(kind, 3.0, 0.0).unwrap();
            assert_relative_eq!(sld, 2.0 * cf, max_relative = 1e-12);
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for kind in [StrategyKind::Loop, StrategyKind::Inverted, StrategyKind::Free] {
            assert_eq!(kind.name().parse::<StrategyKind>().unwrap(), kind);
        }
        assert!("spiral".parse::<StrategyKind>().is_err());
    }
}
