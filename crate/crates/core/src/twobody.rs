//! Two trapped particles coupled through a weak central potential.
//!
//! `H/ħΩ = ¼ Σⱼ (p̃ⱼ² + a x̃ⱼ²) + (g/Ω) x̃₁x̃₂` with time `τ = Ωt`. The normal
//! modes `(x̃₁ ± x̃₂)/√2` decouple with curvatures `a ± 2g/Ω`, so noise-free
//! evolution is an exact product of single-mode maps.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Matrix2, Matrix4, Vector4};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{q_matrix, Kinematics};
use crate::gaussian::{NoiseParams, Schedule, Segment};
use crate::physcal::constants::{C, EPSILON_0, G, HBAR};
use crate::physcal::sphere_mass;
use crate::protocol::{build_loop, LoopSpec};

/// Means and covariance of two modes, ordered `(x̃₁, p̃₁, x̃₂, p̃₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState2 {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl GaussianState2 {
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>) -> Result<Self> {
        let s = Self { mean, cov };
        s.validate()?;
        Ok(s)
    }

    /// `|0⟩ ⊗ |0⟩`.
    pub fn vacuum() -> Self {
        Self {
            mean: Vector4::zeros(),
            cov: Matrix4::identity(),
        }
    }

    /// Product of two thermal states.
    pub fn thermal(nbar1: f64, nbar2: f64) -> Result<Self> {
        if !(nbar1 >= 0.0 && nbar2 >= 0.0) {
            return Err(Error::domain("thermal occupations must be ≥ 0"));
        }
        let (v1, v2) = (2.0 * nbar1 + 1.0, 2.0 * nbar2 + 1.0);
        Ok(Self {
            mean: Vector4::zeros(),
            cov: Matrix4::from_diagonal(&Vector4::new(v1, v1, v2, v2)),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.cov.iter().chain(self.mean.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite two-mode moments"));
        }
        let scale = self.cov.abs().max().max(1.0);
        if (self.cov - self.cov.transpose()).abs().max() > 1e-12 * scale {
            return Err(Error::invalid("two-mode covariance is not symmetric"));
        }
        // Relative to the largest entry: after long expansions the entries
        // dwarf the smallest eigenvalue and roundoff alone breaks Cholesky.
        let min_eig = self.cov.symmetric_eigenvalues().min();
        if min_eig <= -1e-12 * scale {
            return Err(Error::invalid(format!("two-mode covariance has eigenvalue {min_eig}")));
        }
        let det = self.cov.determinant();
        if det < 1.0 - 1e-9 * scale.powi(4) {
            return Err(Error::invalid(format!("two-mode det {det} violates the uncertainty bound")));
        }
        Ok(())
    }

    /// 2×2 covariance of particle `which` (1 or 2).
    pub fn block(&self, which: u8) -> Result<Matrix2<f64>> {
        let o = match which {
            1 => 0,
            2 => 2,
            _ => return Err(Error::domain(format!("particle index must be 1 or 2, got {which}"))),
        };
        Ok(self.cov.fixed_view::<2, 2>(o, o).into_owned())
    }

    /// Exchange the two particles.
    pub fn swapped(&self) -> Self {
        let p = swap_matrix();
        Self {
            mean: p * self.mean,
            cov: p * self.cov * p.transpose(),
        }
    }

    /// The ten zero-mean second moments in the order
    /// `[x₁², p₁², (xp)₁, x₂², p₂², (xp)₂, p₁x₂, p₂x₁, x₁x₂, p₁p₂]`.
    pub fn sm_moments(&self) -> [f64; 10] {
        let c = &self.cov;
        [
            c[(0, 0)],
            c[(1, 1)],
            c[(0, 1)],
            c[(2, 2)],
            c[(3, 3)],
            c[(2, 3)],
            c[(1, 2)],
            c[(3, 0)],
            c[(0, 2)],
            c[(1, 3)],
        ]
    }

    /// Zero-mean state from the ten moments of [`GaussianState2::sm_moments`].
    pub fn from_sm_moments(m: &[f64; 10]) -> Self {
        let [x1, p1, xp1, x2, p2, xp2, p1x2, p2x1, x1x2, p1p2] = *m;
        let cov = Matrix4::new(
            x1, xp1, x1x2, p2x1, //
            xp1, p1, p1x2, p1p2, //
            x1x2, p1x2, x2, xp2, //
            p2x1, p1p2, xp2, p2,
        );
        Self {
            mean: Vector4::zeros(),
            cov,
        }
    }
}

fn swap_matrix() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0,
    )
}

/// `(x̃₁, p̃₁, x̃₂, p̃₂) → (x̃₊, p̃₊, x̃₋, p̃₋)`.
fn mode_matrix() -> Matrix4<f64> {
    let h = FRAC_1_SQRT_2;
    Matrix4::new(
        h, 0.0, h, 0.0, //
        0.0, h, 0.0, h, //
        h, 0.0, -h, 0.0, //
        0.0, h, 0.0, -h,
    )
}

fn check_coherent(noise: &NoiseParams, g_over_omega: f64) -> Result<()> {
    if *noise != NoiseParams::none() {
        return Err(Error::Unsupported(
            "two-particle evolution is coherent only; noise and force must be zero".into(),
        ));
    }
    if !g_over_omega.is_finite() {
        return Err(Error::domain("coupling must be finite"));
    }
    Ok(())
}

/// Lab-frame 4×4 symplectic map of a schedule.
pub fn two_mode_propagator(schedule: &Schedule, g_over_omega: f64) -> Result<Matrix4<f64>> {
    let mut plus = Matrix2::identity();
    let mut minus = Matrix2::identity();
    for seg in schedule.segments() {
        seg.validate()?;
        let a = seg.curvature();
        plus = Kinematics::from_curvature(a + 2.0 * g_over_omega).propagator_q(seg.duration_tau) * plus;
        minus = Kinematics::from_curvature(a - 2.0 * g_over_omega).propagator_q(seg.duration_tau) * minus;
    }
    let q = q_matrix();
    let plus = q.transpose() * plus * q;
    let minus = q.transpose() * minus * q;
    let mut block = Matrix4::zeros();
    block.fixed_view_mut::<2, 2>(0, 0).copy_from(&plus);
    block.fixed_view_mut::<2, 2>(2, 2).copy_from(&minus);
    let t = mode_matrix();
    Ok(t.transpose() * block * t)
}

fn apply(state: &GaussianState2, m: &Matrix4<f64>) -> GaussianState2 {
    let cov = m * state.cov * m.transpose();
    GaussianState2 {
        mean: m * state.mean,
        cov: (cov + cov.transpose()) * 0.5,
    }
}

/// Advance both particles through one synchronous segment.
pub fn evolve_two(state: &GaussianState2, seg: &Segment, g_over_omega: f64, noise: &NoiseParams) -> Result<GaussianState2> {
    evolve_two_schedule(state, &[*seg].into_iter().collect(), g_over_omega, noise)
}

/// Advance through a whole schedule; the per-mode maps are composed before
/// being applied, which keeps large expansions exact.
pub fn evolve_two_schedule(
    state: &GaussianState2,
    schedule: &Schedule,
    g_over_omega: f64,
    noise: &NoiseParams,
) -> Result<GaussianState2> {
    state.validate()?;
    check_coherent(noise, g_over_omega)?;
    Ok(apply(state, &two_mode_propagator(schedule, g_over_omega)?))
}

/// Both particles run the same loop.
pub fn run_two_loop(state: &GaussianState2, spec: &LoopSpec, g_over_omega: f64, noise: &NoiseParams) -> Result<GaussianState2> {
    spec.validate()?;
    evolve_two_schedule(state, &build_loop(spec), g_over_omega, noise)
}

/// Purity of one particle's marginal, `1/√det Σⱼ`.
pub fn reduced_purity(state: &GaussianState2, which: u8) -> Result<f64> {
    state.validate()?;
    let det = state.block(which)?.determinant();
    if det < 1.0 - 1e-9 {
        return Err(Error::invalid(format!("marginal det {det} violates the uncertainty bound")));
    }
    Ok(1.0 / det.sqrt())
}

/// `1/√det Σ` of the joint state.
pub fn global_purity(state: &GaussianState2) -> Result<f64> {
    state.validate()?;
    Ok(1.0 / state.cov.determinant().sqrt())
}

/// `η² (g/Ω) t₂Ω > 1`.
pub fn entangling_condition(eta: f64, g_over_omega: f64, t2_tau: f64) -> bool {
    eta * eta * g_over_omega * t2_tau > 1.0
}

/// Right-hand side of the ten coupled second-moment equations (zero means),
/// in the order of [`GaussianState2::sm_moments`]; `a = sign·κ²`.
pub fn sm_moment_rhs(y: &[f64; 10], a: f64, g: f64) -> [f64; 10] {
    let [x1, p1, xp1, x2, p2, xp2, p1x2, p2x1, x1x2, p1p2] = *y;
    [
        2.0 * xp1,
        -2.0 * a * xp1 - 4.0 * g * p1x2,
        p1 - a * x1 - 2.0 * g * x1x2,
        2.0 * xp2,
        -2.0 * a * xp2 - 4.0 * g * p2x1,
        p2 - a * x2 - 2.0 * g * x1x2,
        -a * x1x2 + p1p2 - 2.0 * g * x2,
        -a * x1x2 + p1p2 - 2.0 * g * x1,
        p1x2 + p2x1,
        -a * (p2x1 + p1x2) - 2.0 * g * (xp1 + xp2),
    ]
}

/// Whether the quadratic expansion of the interaction holds:
/// `d² ≥ 100 ⟨(x₁ − x₂)²⟩` with positions in metres.
pub fn taylor_valid(state: &GaussianState2, x_zpf: f64, d: f64) -> bool {
    let c = &state.cov;
    let dm = state.mean[0] - state.mean[2];
    let rel = c[(0, 0)] + c[(2, 2)] - 2.0 * c[(0, 2)] + dm * dm;
    d * d >= 100.0 * rel * x_zpf * x_zpf
}

/// `V = 𝒢 / [(x₁ − x₂)² + d²]^{a/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralPotential {
    /// 𝒢, J·mᵃ.
    pub g0: f64,
    pub a: u32,
    /// m.
    pub d: f64,
}

impl CentralPotential {
    pub fn gravity(mass: f64, d: f64) -> Self {
        Self {
            g0: -G * mass * mass,
            a: 1,
            d,
        }
    }

    pub fn coulomb(q1: f64, q2: f64, d: f64) -> Self {
        Self {
            g0: q1 * q2 / (4.0 * std::f64::consts::PI * EPSILON_0),
            a: 1,
            d,
        }
    }

    /// Retarded Casimir–Polder interaction of two dielectric spheres.
    pub fn casimir(radius: f64, eps_r: f64, d: f64) -> Self {
        let k = (eps_r - 1.0) / (eps_r + 2.0);
        Self {
            g0: -HBAR * C / std::f64::consts::PI * 23.0 / 4.0 * k * k * radius.powi(6),
            a: 7,
            d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingResult {
    /// Shifted trap frequency Ω, rad/s.
    pub omega_shifted: f64,
    /// g, rad/s.
    pub g: f64,
    pub g_over_omega: f64,
}

/// `Ω² = ω² + 𝒢a/(d^{a+2} m)`, `g = 𝒢a/(d^{a+2} 2mΩ)`.
pub fn coupling_from_potential(p: &CentralPotential, mass: f64, omega: f64) -> Result<CouplingResult> {
    if p.a < 1 || !(p.d > 0.0) || !(mass > 0.0) || !(omega > 0.0) || !p.g0.is_finite() {
        return Err(Error::domain(format!(
            "invalid coupling inputs (a = {}, d = {}, m = {mass}, ω = {omega})",
            p.a, p.d
        )));
    }
    let k = p.g0 * p.a as f64 / p.d.powi(p.a as i32 + 2);
    let omega_sq = omega * omega + k / mass;
    if !(omega_sq > 0.0) {
        return Err(Error::Unstable { omega_sq });
    }
    let big = omega_sq.sqrt();
    let g = k / (2.0 * mass * big);
    Ok(CouplingResult {
        omega_shifted: big,
        g,
        g_over_omega: g / big,
    })
}

fn check_positive(pairs: &[(&str, f64)]) -> Result<()> {
    for (name, v) in pairs {
        if !(v.is_finite() && *v > 0.0) {
            return Err(Error::domain(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// `g_G = −G m / (2Ω d³)`, rad/s.
pub fn coupling_gravity(mass: f64, omega_shifted: f64, d: f64) -> Result<f64> {
    check_positive(&[("mass", mass), ("Ω", omega_shifted), ("d", d)])?;
    Ok(-G * mass / (2.0 * omega_shifted * d.powi(3)))
}

/// `g_C = q₁q₂ / (8π ε₀ m Ω d³)`, rad/s.
pub fn coupling_coulomb(q1: f64, q2: f64, mass: f64, omega_shifted: f64, d: f64) -> Result<f64> {
    check_positive(&[("mass", mass), ("Ω", omega_shifted), ("d", d)])?;
    if !(q1.is_finite() && q2.is_finite()) {
        return Err(Error::domain("charges must be finite"));
    }
    Ok(q1 * q2 / (8.0 * std::f64::consts::PI * EPSILON_0 * mass * omega_shifted * d.powi(3)))
}

/// `g_Ca = −(1449/128)(ħc/π³) m/(ρ² Ω d⁹) ((ε_r − 1)/(ε_r + 2))²`, rad/s.
pub fn coupling_casimir(mass: f64, density: f64, eps_r: f64, omega_shifted: f64, d: f64) -> Result<f64> {
    check_positive(&[("mass", mass), ("density", density), ("Ω", omega_shifted), ("d", d)])?;
    if !(eps_r.is_finite() && eps_r >= 1.0) {
        return Err(Error::domain(format!("relative permittivity must be ≥ 1, got {eps_r}")));
    }
    let radius = (3.0 * mass / (4.0 * std::f64::consts::PI * density)).cbrt();
    if d <= 2.0 * radius {
        return Err(Error::domain(format!("spheres overlap: d = {d:e} m ≤ 2R = {:e} m", 2.0 * radius)));
    }
    let k = (eps_r - 1.0) / (eps_r + 2.0);
    let pi3 = std::f64::consts::PI.powi(3);
    Ok(-1449.0 / 128.0 * HBAR * C / pi3 * mass / (density * density * omega_shifted * d.powi(9)) * k * k)
}

/// One row of a reduced-purity surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntangleRow {
    pub total_tau: f64,
    pub g_over_omega: f64,
    pub reduced_purity: f64,
    /// `None` when the covariance is too ill-conditioned for its determinant
    /// to be resolved to 1e-9.
    pub global_purity: Option<f64>,
}

/// `global_purity` when `cond(Σ)·ε·4 ≤ 1e-9`, else `None`.
pub fn resolvable_global_purity(state: &GaussianState2) -> Result<Option<f64>> {
    state.validate()?;
    let eig = state.cov.symmetric_eigenvalues();
    let cond = eig.max() / eig.min();
    if !(cond > 0.0 && 4.0 * cond * f64::EPSILON <= 1e-9) {
        return Ok(None);
    }
    global_purity(state).map(Some)
}

/// Final reduced purity of particle 1 over (T × g/Ω), vacuum start, l = 0
/// loops; outer axis is T.
pub fn entangle_sweep(totals: &[f64], couplings: &[f64]) -> Result<Vec<EntangleRow>> {
    let specs: Vec<LoopSpec> = totals.iter().map(|&t| LoopSpec::from_total_time(t)).collect::<Result<_>>()?;
    let n = couplings.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    (0..specs.len() * n)
        .into_par_iter()
        .map(|idx| {
            let g = couplings[idx % n];
            let s = run_two_loop(&GaussianState2::vacuum(), &specs[idx / n], g, &NoiseParams::none())?;
            Ok(EntangleRow {
                total_tau: totals[idx / n],
                g_over_omega: g,
                reduced_purity: reduced_purity(&s, 1)?,
                global_purity: resolvable_global_purity(&s)?,
            })
        })
        .collect()
}

/// Particle and trap parameters for a coupling table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSetup {
    pub radius: f64,
    pub density: f64,
    /// Ω, rad/s.
    pub omega_shifted: f64,
    pub eps_r: f64,
    pub q1: f64,
    pub q2: f64,
}

/// One row of a coupling table; all couplings are g/Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingRow {
    pub d_over_r: f64,
    pub d: f64,
    pub gravity: f64,
    pub coulomb: f64,
    /// `None` when the spheres would overlap.
    pub casimir: Option<f64>,
}

/// Gravity, Coulomb and Casimir g/Ω as functions of d/R.
pub fn coupling_table(setup: &CouplingSetup, d_over_r: &[f64]) -> Result<Vec<CouplingRow>> {
    let mass = sphere_mass(setup.radius, setup.density);
    let om = setup.omega_shifted;
    d_over_r
        .iter()
        .map(|&x| {
            let d = x * setup.radius;
            Ok(CouplingRow {
                d_over_r: x,
                d,
                gravity: coupling_gravity(mass, om, d)? / om,
                coulomb: coupling_coulomb(setup.q1, setup.q2, mass, om, d)? / om,
                casimir: if x > 2.0 {
                    Some(coupling_casimir(mass, setup.density, setup.eps_r, om, d)? / om)
                } else {
                    None
                },
            })
        })
        .collect()
}
