//! Laboratory units: particle and trap scenarios, noise spectra, gas
//! collisions and switching-time jitter.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::gaussian::{evolve_schedule, GaussianState1, NoiseParams, Potential, Segment};
use crate::protocol::LoopSpec;

/// CODATA 2018 values, 9 significant digits.
pub mod constants {
    /// Newtonian constant of gravitation, m³ kg⁻¹ s⁻².
    pub const G: f64 = 6.67430e-11;
    /// Vacuum permittivity, F/m.
    pub const EPSILON_0: f64 = 8.85418781e-12;
    /// Reduced Planck constant, J s.
    pub const HBAR: f64 = 1.05457182e-34;
    /// Speed of light, m/s.
    pub const C: f64 = 299_792_458.0;
    /// Elementary charge, C.
    pub const E_CHARGE: f64 = 1.602176634e-19;
    /// Boltzmann constant, J/K.
    pub const K_B: f64 = 1.380649e-23;
    /// Pascal per millibar.
    pub const PA_PER_MBAR: f64 = 100.0;
    /// Mass of an N₂ molecule, kg.
    pub const N2_MASS: f64 = 4.65e-26;
    /// Density of fused silica, kg/m³.
    pub const SILICA_DENSITY: f64 = 2201.0;
}

use constants::*;

/// Mean thermal speed `√(8 k_B T / (π m̄))`.
pub fn mean_thermal_speed(gas_mass: f64, temperature: f64) -> f64 {
    (8.0 * K_B * temperature / (PI * gas_mass)).sqrt()
}

/// Sphere mass `ρ (4/3) π R³`.
pub fn sphere_mass(radius: f64, density: f64) -> f64 {
    density * 4.0 / 3.0 * PI * radius.powi(3)
}

/// A particle in a trap plus its gas environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    /// m.
    pub radius: f64,
    /// kg/m³.
    pub density: f64,
    /// Trap frequency, rad/s.
    pub omega: f64,
    /// kg.
    pub mass: f64,
    /// Pa.
    pub pressure: f64,
    /// kg.
    pub gas_mass: f64,
    /// m/s.
    pub gas_velocity: f64,
}

impl Scenario {
    /// Silica sphere with N₂ background gas at 300 K and zero pressure.
    pub fn silica(radius: f64, omega: f64) -> Result<Self> {
        Self::new(radius, SILICA_DENSITY, omega, None, 0.0, N2_MASS, None)
    }

    /// Mass defaults to the sphere mass and the gas speed to the mean thermal
    /// speed at 300 K. A supplied mass must agree with radius and density to
    /// 1e-6 relative.
    pub fn new(
        radius: f64,
        density: f64,
        omega: f64,
        mass: Option<f64>,
        pressure: f64,
        gas_mass: f64,
        gas_velocity: Option<f64>,
    ) -> Result<Self> {
        let derived = sphere_mass(radius, density);
        let s = Self {
            radius,
            density,
            omega,
            mass: mass.unwrap_or(derived),
            pressure,
            gas_mass,
            gas_velocity: gas_velocity.unwrap_or_else(|| mean_thermal_speed(gas_mass, 300.0)),
        };
        s.validate()?;
        if (s.mass / derived - 1.0).abs() > 1e-6 {
            return Err(Error::domain(format!(
                "mass {:e} kg disagrees with radius and density ({derived:e} kg)",
                s.mass
            )));
        }
        Ok(s)
    }

    pub fn with_pressure(self, pressure: f64) -> Result<Self> {
        let s = Self { pressure, ..self };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("radius", self.radius),
            ("density", self.density),
            ("omega", self.omega),
            ("mass", self.mass),
            ("gas mass", self.gas_mass),
            ("gas velocity", self.gas_velocity),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.pressure.is_finite() && self.pressure >= 0.0) {
            return Err(Error::domain(format!("pressure must be ≥ 0, got {}", self.pressure)));
        }
        Ok(())
    }

    /// Zero-point motion `√(ħ/(2mω))`, m.
    pub fn x_zpf(&self) -> f64 {
        (HBAR / (2.0 * self.mass * self.omega)).sqrt()
    }
}

/// PSD of the dimensionless drive ξ_ν at νω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    /// 1/Hz.
    pub s_value: f64,
    /// 1 (displacement) or 2 (frequency).
    pub nu_index: u8,
}

fn check_nu(nu: u8) -> Result<f64> {
    match nu {
        1 => Ok(4.0),
        2 => Ok(16.0),
        _ => Err(Error::domain(format!("noise index must be 1 or 2, got {nu}"))),
    }
}

/// `Γ_ν/ω = π ω S_ν(νω) / 4^ν`.
pub fn gamma_from_spectrum(sp: &SpectrumPoint, omega: f64) -> Result<f64> {
    let div = check_nu(sp.nu_index)?;
    if !(sp.s_value.is_finite() && sp.s_value >= 0.0) {
        return Err(Error::domain(format!("spectral density must be ≥ 0, got {}", sp.s_value)));
    }
    Ok(PI * omega * sp.s_value / div)
}

/// Inverse of [`gamma_from_spectrum`].
pub fn spectrum_from_gamma(gamma_over_omega: f64, nu_index: u8, omega: f64) -> Result<SpectrumPoint> {
    let div = check_nu(nu_index)?;
    if !(gamma_over_omega.is_finite() && gamma_over_omega >= 0.0) {
        return Err(Error::domain(format!("rate must be ≥ 0, got {gamma_over_omega}")));
    }
    Ok(SpectrumPoint {
        s_value: div * gamma_over_omega / (PI * omega),
        nu_index,
    })
}

/// Trap-position noise density `x₀√S₁`, m/√Hz.
pub fn displacement_noise_axis(gamma1_over_omega: f64, scenario: &Scenario) -> Result<f64> {
    let sp = spectrum_from_gamma(gamma1_over_omega, 1, scenario.omega)?;
    Ok(scenario.x_zpf() * sp.s_value.sqrt())
}

/// Relative stiffness noise density `√S₂`, 1/√Hz.
pub fn frequency_noise_axis(gamma2_over_omega: f64, scenario: &Scenario) -> Result<f64> {
    Ok(spectrum_from_gamma(gamma2_over_omega, 2, scenario.omega)?.s_value.sqrt())
}

/// Gas scattering rate `16π√(2π) P R² / (√3 m̄ v̄)`, 1/s.
pub fn gas_rate(scenario: &Scenario) -> f64 {
    16.0 * PI * (2.0 * PI).sqrt() * scenario.pressure * scenario.radius.powi(2)
        / (3f64.sqrt() * scenario.gas_mass * scenario.gas_velocity)
}

/// Expected number of gas collisions `γ T` during a protocol of `T_tau`.
pub fn gas_budget(scenario: &Scenario, t_tau: f64) -> f64 {
    gas_rate(scenario) * t_tau / scenario.omega
}

/// `Γ₂/ω = σ² ω² / (20 + 6π)` for switching-time jitter of standard deviation σ (s).
pub fn jitter_to_gamma2(sigma_eps: f64, omega: f64) -> Result<f64> {
    if !(sigma_eps.is_finite() && sigma_eps >= 0.0) {
        return Err(Error::domain(format!("jitter must be ≥ 0, got {sigma_eps}")));
    }
    Ok((sigma_eps * omega).powi(2) / (20.0 + 6.0 * PI))
}

/// `F = f ħ ω / x₀`, N.
pub fn force_to_newtons(f: f64, scenario: &Scenario) -> f64 {
    f * HBAR * scenario.omega / scenario.x_zpf()
}

/// `f = F x₀ / (ħ ω)`.
pub fn newtons_to_f(force: f64, scenario: &Scenario) -> f64 {
    force * scenario.x_zpf() / (HBAR * scenario.omega)
}

/// Vacuum loop moments `(⟨x̃²⟩, ⟨p̃²⟩, ⟨x̃p̃⟩ₛ)` when the harmonic stage lasts
/// `t₂ + ε`, with `eps_tau = εω`.
pub fn jitter_moments_single(eps_tau: f64, t1_tau: f64) -> (f64, f64, f64) {
    let c2 = (2.0 * t1_tau).cosh();
    let s2 = (2.0 * t1_tau).sinh();
    let (se, ce) = (2.0 * eps_tau).sin_cos();
    let x2 = c2 * c2 - s2 * (s2 * ce + se);
    let p2 = c2 * c2 - s2 * (s2 * ce - se);
    let xp = (4.0 * t1_tau).sinh() * eps_tau.sin().powi(2);
    (x2, p2, xp)
}

/// Jitter-averaged vacuum loop moments for `sigma_tau = σω`.
pub fn jitter_averaged_moments(sigma_tau: f64, t1_tau: f64) -> (f64, f64, f64) {
    let damp = (-2.0 * sigma_tau * sigma_tau).exp();
    let x2 = 0.5 * (1.0 - 2.0 * damp * (2.0 * t1_tau).sinh().powi(2) + (4.0 * t1_tau).cosh());
    let xp = 0.5 * (1.0 - damp) * (4.0 * t1_tau).sinh();
    (x2, x2, xp)
}

/// Nodes and weights of `n`-point Gauss–Hermite quadrature for the weight
/// `e^{-x²}` (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(Error::domain("quadrature needs at least one node"));
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = (i as f64 / 2.0).sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut out: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], PI.sqrt() * v0 * v0)
        })
        .collect();
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(out)
}

/// Average of noise-free vacuum loop runs with harmonic stage `t₂ + ε`,
/// `ε ~ N(0, σ²)`, by `n`-point Gauss–Hermite quadrature.
pub fn jitter_quadrature_moments(sigma_tau: f64, spec: &LoopSpec, n: usize) -> Result<(f64, f64, f64)> {
    spec.validate()?;
    let inv = Segment {
        sign: Potential::Inverted,
        stiffness_scale: spec.kappa_inverted,
        duration_tau: spec.t1_tau,
    };
    let mut acc = (0.0, 0.0, 0.0);
    for (x, w) in gauss_hermite(n)? {
        let eps = 2f64.sqrt() * sigma_tau * x;
        let sched = [inv, Segment::harmonic(spec.t2_tau() + eps), inv].into_iter().collect();
        let s = evolve_schedule(&GaussianState1::vacuum(), &sched, &NoiseParams::none())?;
        let w = w / PI.sqrt();
        acc.0 += w * s.var_x;
        acc.1 += w * s.var_p;
        acc.2 += w * s.cov_xp;
    }
    Ok(acc)
}
