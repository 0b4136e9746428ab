//! Exact segment kinematics and frame-tracked moment propagation.
//!
//! Covariances are stored as `Σ = S Σ_r Sᵀ`, where `S` is the accumulated
//! noise-free symplectic propagator and `Σ_r` only changes through noise.
//! All 2×2 quantities live in the basis `q = Q (x̃, p̃)` with
//! `Q = [[1, 1], [-1, 1]] / √2`, in which the full-stiffness inverted map is
//! `diag(e^τ, e^{-τ})`. Products of inverted and quarter-period harmonic maps
//! then never subtract large numbers, so loops with expansions far beyond
//! 1/√ε stay accurate.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use nalgebra::{Matrix2, Vector2};

use crate::error::Result;
use crate::gaussian::{GaussianState1, NoiseParams, Segment};
use crate::ode::{self, Tolerance};

/// Noise-free dynamics `x'' = -a x` of one segment, `a = sign·κ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Kinematics {
    Inverted(f64),
    Harmonic(f64),
    Free,
}

/// Lab `x̃` direction expressed in the q-basis.
pub(crate) fn ex_q() -> Vector2<f64> {
    Vector2::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2)
}

/// Lab `p̃` direction expressed in the q-basis.
pub(crate) fn ep_q() -> Vector2<f64> {
    Vector2::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2)
}

/// Lab → q rotation.
pub(crate) fn q_matrix() -> Matrix2<f64> {
    Matrix2::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, FRAC_1_SQRT_2)
}

/// Inverse of a unit-determinant 2×2 matrix without division.
pub(crate) fn symplectic_inverse(s: &Matrix2<f64>) -> Matrix2<f64> {
    Matrix2::new(s[(1, 1)], -s[(0, 1)], -s[(1, 0)], s[(0, 0)])
}

/// `cos` and `sin` with exact values on multiples of π/2.
fn cos_sin(theta: f64) -> (f64, f64) {
    let quarters = theta / FRAC_PI_2;
    let n = quarters.round();
    if (quarters - n).abs() <= 1e-13 * quarters.abs().max(1.0) {
        match (n as i64).rem_euclid(4) {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    } else {
        (theta.cos(), theta.sin())
    }
}

impl Kinematics {
    pub(crate) fn from_curvature(a: f64) -> Self {
        if a > 0.0 {
            Kinematics::Harmonic(a.sqrt())
        } else if a < 0.0 {
            Kinematics::Inverted((-a).sqrt())
        } else {
            Kinematics::Free
        }
    }

    /// Coefficients `(p, r)` of the generator `K = [[0, p], [r, 0]]`.
    fn generator(&self) -> (f64, f64) {
        match *self {
            Kinematics::Inverted(k) => (1.0 / k, k),
            Kinematics::Harmonic(k) => (1.0 / k, -k),
            Kinematics::Free => (1.0, 0.0),
        }
    }

    /// `α I + β K` in the q-basis, with the diagonal supplied separately so
    /// that hyperbolic cancellations can be avoided.
    fn to_q(diag_plus: f64, diag_minus: f64, beta: f64, p: f64, r: f64) -> Matrix2<f64> {
        let off = 0.5 * beta * (p - r);
        Matrix2::new(diag_plus, off, -off, diag_minus)
    }

    /// Propagator `S(u)` (lab `(x̃, p̃)` → lab) expressed in the q-basis.
    pub(crate) fn propagator_q(&self, u: f64) -> Matrix2<f64> {
        let (p, r) = self.generator();
        let c = 0.5 * (p + r);
        match *self {
            Kinematics::Inverted(k) => {
                let ep = (k * u).exp();
                let em = (-k * u).exp();
                let dp = 0.5 * ((1.0 + c) * ep + (1.0 - c) * em);
                let dm = 0.5 * ((1.0 - c) * ep + (1.0 + c) * em);
                Self::to_q(dp, dm, (k * u).sinh(), p, r)
            }
            Kinematics::Harmonic(k) => {
                let (cs, sn) = cos_sin(k * u);
                Self::to_q(cs + c * sn, cs - c * sn, sn, p, r)
            }
            Kinematics::Free => Self::to_q(1.0 + c * u, 1.0 - c * u, u, p, r),
        }
    }

    /// `∫₀ᵘ S(s)⁻¹ ds` in the q-basis.
    pub(crate) fn inverse_integral_q(&self, u: f64) -> Matrix2<f64> {
        let (p, r) = self.generator();
        let c = 0.5 * (p + r);
        // S⁻¹ = α I − β K, so the integral is A I − B K.
        match *self {
            Kinematics::Inverted(k) => {
                let e = (k * u).exp_m1();
                let f = (-k * u).exp_m1();
                let b = (e + f) / (2.0 * k);
                let dp = (e * (1.0 - c) - f * (1.0 + c)) / (2.0 * k);
                let dm = (e * (1.0 + c) - f * (1.0 - c)) / (2.0 * k);
                Self::to_q(dp, dm, -b, p, r)
            }
            Kinematics::Harmonic(k) => {
                let (_, sn) = cos_sin(k * u);
                let half = (0.5 * k * u).sin();
                let a = sn / k;
                let b = 2.0 * half * half / k;
                Self::to_q(a - c * b, a + c * b, -b, p, r)
            }
            Kinematics::Free => {
                let a = u;
                let b = 0.5 * u * u;
                Self::to_q(a - c * b, a + c * b, -b, p, r)
            }
        }
    }
}

/// Sensitivity block carried along with a [`FramedState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FrameSensitivity {
    /// `∂m̃/∂f` in the frame.
    pub dmean: Vector2<f64>,
    /// `∂Σ_r/∂f`.
    pub dinner: Matrix2<f64>,
}

/// A single-mode Gaussian state stored relative to its accumulated
/// noise-free propagator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramedState {
    frame: Matrix2<f64>,
    inner: Matrix2<f64>,
    mean: Vector2<f64>,
    sens: Option<FrameSensitivity>,
}

fn sym_from(v: &[f64]) -> Matrix2<f64> {
    Matrix2::new(v[0], v[1], v[1], v[2])
}

impl FramedState {
    /// Start tracking from a lab-frame state.
    pub fn new(state: &GaussianState1) -> Self {
        let q = q_matrix();
        Self {
            frame: Matrix2::identity(),
            inner: q * state.covariance() * q.transpose(),
            mean: q * state.means(),
            sens: None,
        }
    }

    /// Start tracking together with the derivative of every moment in `f`.
    pub(crate) fn with_sensitivity(state: &GaussianState1, dstate: &GaussianState1) -> Self {
        let q = q_matrix();
        let mut s = Self::new(state);
        s.sens = Some(FrameSensitivity {
            dmean: q * dstate.means(),
            dinner: q * dstate.covariance() * q.transpose(),
        });
        s
    }

    pub(crate) fn sensitivity(&self) -> Option<&FrameSensitivity> {
        self.sens.as_ref()
    }

    /// Frame covariance `Σ_r` (q-basis).
    pub(crate) fn inner(&self) -> &Matrix2<f64> {
        &self.inner
    }

    /// `det Σ`, evaluated through the frame so that large squeezing does not
    /// cancel it away.
    pub fn det(&self) -> f64 {
        self.inner.determinant()
    }

    /// `1/√det Σ`.
    pub fn purity(&self) -> f64 {
        1.0 / self.det().sqrt()
    }

    fn lab_means(&self, mean: &Vector2<f64>) -> Vector2<f64> {
        q_matrix().transpose() * (self.frame * mean)
    }

    fn lab_cov(&self, inner: &Matrix2<f64>) -> Matrix2<f64> {
        let q = q_matrix();
        let s = q.transpose() * self.frame;
        let mut c = s * inner * s.transpose();
        let off = 0.5 * (c[(0, 1)] + c[(1, 0)]);
        c[(0, 1)] = off;
        c[(1, 0)] = off;
        c
    }

    /// Lab-frame moments. No validation is applied: at extreme squeezing the
    /// lab determinant is not resolvable in double precision.
    pub fn state(&self) -> GaussianState1 {
        GaussianState1::from_parts(&self.lab_means(&self.mean), &self.lab_cov(&self.inner))
    }

    /// Lab-frame derivative of every moment with respect to `f`.
    pub(crate) fn dstate(&self) -> Option<GaussianState1> {
        self.sens
            .as_ref()
            .map(|s| GaussianState1::from_parts(&self.lab_means(&s.dmean), &self.lab_cov(&s.dinner)))
    }

    /// Advance by one segment.
    pub fn evolve(&mut self, seg: &Segment, noise: &NoiseParams) -> Result<()> {
        let d = seg.duration_tau;
        if d == 0.0 {
            return Ok(());
        }
        let kin = Kinematics::from_curvature(seg.curvature());
        let f = noise.force_f;
        let frame_inv = symplectic_inverse(&self.frame);
        // b = (0, -2) in the lab.
        let b_q = -2.0 * ep_q();
        let drift = |u: f64| frame_inv * kin.inverse_integral_q(u) * b_q;

        if noise.gamma1 > 0.0 || noise.gamma2 > 0.0 {
            self.integrate_noise(&kin, d, noise, &drift)?;
        }

        let shift = drift(d);
        self.mean += shift * f;
        if let Some(s) = self.sens.as_mut() {
            s.dmean += shift;
        }
        self.frame = kin.propagator_q(d) * self.frame;
        Ok(())
    }

    fn integrate_noise(
        &mut self,
        kin: &Kinematics,
        d: f64,
        noise: &NoiseParams,
        drift: &dyn Fn(f64) -> Vector2<f64>,
    ) -> Result<()> {
        let (g1, g2, f) = (noise.gamma1, noise.gamma2, noise.force_f);
        let frame = self.frame;
        let mean0 = self.mean;
        let ex = ex_q();
        let ep = ep_q();
        let tol = Tolerance::default();

        // Everything the right-hand side needs at local time u.
        let geometry = move |u: f64| {
            let s = kin.propagator_q(u) * frame;
            let w = symplectic_inverse(&s) * ep;
            let r = s.transpose() * ex;
            (s, w, r)
        };

        match self.sens {
            None => {
                let rhs = |u: f64, y: &[f64; 3]| {
                    let (s, w, r) = geometry(u);
                    let inner = sym_from(y);
                    let m = mean0 + drift(u) * f;
                    let mx = ex.dot(&(s * m));
                    let vx = r.dot(&(inner * r));
                    let diff = 8.0 * g1 + 32.0 * g2 * (vx + mx * mx);
                    [diff * w[0] * w[0], diff * w[0] * w[1], diff * w[1] * w[1]]
                };
                let y0 = [self.inner[(0, 0)], self.inner[(0, 1)], self.inner[(1, 1)]];
                let (y, _) = ode::integrate(rhs, 0.0, d, y0, tol)?;
                self.inner = sym_from(&y);
            }
            Some(sens) => {
                let dmean0 = sens.dmean;
                let rhs = |u: f64, y: &[f64; 6]| {
                    let (s, w, r) = geometry(u);
                    let inner = sym_from(&y[0..3]);
                    let dinner = sym_from(&y[3..6]);
                    let shift = drift(u);
                    let m = mean0 + shift * f;
                    let dm = dmean0 + shift;
                    let mx = ex.dot(&(s * m));
                    let dmx = ex.dot(&(s * dm));
                    let vx = r.dot(&(inner * r));
                    let dvx = r.dot(&(dinner * r));
                    let diff = 8.0 * g1 + 32.0 * g2 * (vx + mx * mx);
                    let ddiff = 32.0 * g2 * (dvx + 2.0 * mx * dmx);
                    let (w00, w01, w11) = (w[0] * w[0], w[0] * w[1], w[1] * w[1]);
                    [
                        diff * w00,
                        diff * w01,
                        diff * w11,
                        ddiff * w00,
                        ddiff * w01,
                        ddiff * w11,
                    ]
                };
                let y0 = [
                    self.inner[(0, 0)],
                    self.inner[(0, 1)],
                    self.inner[(1, 1)],
                    sens.dinner[(0, 0)],
                    sens.dinner[(0, 1)],
                    sens.dinner[(1, 1)],
                ];
                let (y, _) = ode::integrate(rhs, 0.0, d, y0, tol)?;
                self.inner = sym_from(&y[0..3]);
                if let Some(s) = self.sens.as_mut() {
                    s.dinner = sym_from(&y[3..6]);
                }
            }
        }
        Ok(())
    }
}
