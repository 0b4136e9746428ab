//! JSON run configuration. Every physical key carries its unit in the name;
//! `_tau` marks dimensionless time ωt.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use levloop::physcal::constants::{E_CHARGE, N2_MASS, PA_PER_MBAR, SILICA_DENSITY};
use levloop::physcal::Scenario;
use levloop::protocol::LoopSpec;
use levloop::{NoiseParams, ThermalSpec};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<ScenarioConfig>,
    pub protocol: Option<ProtocolConfig>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub axes: BTreeMap<String, AxisConfig>,
    pub samples: Option<usize>,
    /// `force` only: subset of "loop", "inverted", "free".
    pub strategies: Option<Vec<String>>,
    /// `force` only: "closed_form" (default) or "sld".
    pub qfi_convention: Option<String>,
    pub oracle: Option<OracleConfig>,
    pub couplings: Option<CouplingConfig>,
    pub convert: Option<ConvertConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub radius_m: f64,
    #[serde(default = "default_density")]
    pub density_kg_per_m3: f64,
    pub omega_rad_per_s: f64,
    pub mass_kg: Option<f64>,
    pub pressure_pa: Option<f64>,
    pub pressure_mbar: Option<f64>,
    #[serde(default = "default_gas_mass")]
    pub gas_mass_kg: f64,
    pub gas_velocity_m_per_s: Option<f64>,
}

fn default_density() -> f64 {
    SILICA_DENSITY
}

fn default_gas_mass() -> f64 {
    N2_MASS
}

impl ScenarioConfig {
    pub fn build(&self) -> Result<Scenario> {
        let pressure = match (self.pressure_pa, self.pressure_mbar) {
            (Some(_), Some(_)) => bail!("give either scenario.pressure_pa or scenario.pressure_mbar, not both"),
            (Some(p), None) => p,
            (None, Some(p)) => p * PA_PER_MBAR,
            (None, None) => 0.0,
        };
        Ok(Scenario::new(
            self.radius_m,
            self.density_kg_per_m3,
            self.omega_rad_per_s,
            self.mass_kg,
            pressure,
            self.gas_mass_kg,
            self.gas_velocity_m_per_s,
        )?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub t1_tau: Option<f64>,
    pub total_tau: Option<f64>,
    #[serde(default)]
    pub l: u32,
    #[serde(default = "one")]
    pub kappa_inverted: f64,
}

fn one() -> f64 {
    1.0
}

impl ProtocolConfig {
    pub fn build(&self) -> Result<LoopSpec> {
        match (self.t1_tau, self.total_tau) {
            (Some(t1), None) => Ok(LoopSpec::with_kappa(t1, self.l, self.kappa_inverted)?),
            (None, Some(t)) => {
                ensure!(
                    self.l == 0 && self.kappa_inverted == 1.0,
                    "protocol.total_tau implies l = 0 and kappa_inverted = 1; give t1_tau instead"
                );
                Ok(LoopSpec::from_total_time(t)?)
            }
            _ => bail!("protocol needs exactly one of t1_tau or total_tau"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub gamma1_over_omega: f64,
    #[serde(default)]
    pub gamma2_over_omega: f64,
    #[serde(default)]
    pub force_f: f64,
}

impl NoiseConfig {
    pub fn build(&self) -> Result<NoiseParams> {
        Ok(NoiseParams::new(self.gamma1_over_omega, self.gamma2_over_omega, self.force_f)?)
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub nbar: f64,
}

impl InitialConfig {
    pub fn thermal(&self) -> Result<ThermalSpec> {
        ensure!(self.nbar.is_finite() && self.nbar >= 0.0, "initial.nbar must be ≥ 0");
        Ok(ThermalSpec { nbar: self.nbar })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

/// Either an explicit list or `count` points from `from` to `to`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub values: Option<Vec<f64>>,
    pub scale: Option<Scale>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub count: Option<usize>,
}

impl AxisConfig {
    pub fn points(&self, name: &str) -> Result<Vec<f64>> {
        let pts = match (&self.values, self.from, self.to, self.count) {
            (Some(v), None, None, None) if self.scale.is_none() => v.clone(),
            (None, Some(a), Some(b), Some(n)) => {
                ensure!(n >= 1, "axis {name}: count must be ≥ 1");
                ensure!(a.is_finite() && b.is_finite(), "axis {name}: endpoints must be finite");
                if n == 1 {
                    ensure!(a == b, "axis {name}: a single point needs from == to");
                    vec![a]
                } else {
                    let step = |i: usize| i as f64 / (n - 1) as f64;
                    match self.scale.unwrap_or(Scale::Linear) {
                        Scale::Linear => (0..n).map(|i| a + (b - a) * step(i)).collect(),
                        Scale::Log => {
                            ensure!(a > 0.0 && b > 0.0, "axis {name}: log axes need positive endpoints");
                            let (la, lb) = (a.ln(), b.ln());
                            (0..n).map(|i| (la + (lb - la) * step(i)).exp()).collect()
                        }
                    }
                }
            }
            _ => bail!("axis {name}: give either `values` or all of `from`, `to`, `count` (with optional `scale`)"),
        };
        ensure!(!pts.is_empty(), "axis {name} is empty");
        ensure!(pts.iter().all(|v| v.is_finite()), "axis {name} has non-finite values");
        Ok(pts)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "one")]
    pub t1_tau: f64,
    #[serde(default)]
    pub l: u32,
    pub dim: Option<usize>,
    #[serde(default = "default_dt")]
    pub dt_tau: f64,
    #[serde(default = "default_oracle_noise")]
    pub noise: NoiseConfig,
    #[serde(default = "default_thermal_nbar")]
    pub thermal_nbar: f64,
    #[serde(default = "yes")]
    pub richardson: bool,
}

fn default_dt() -> f64 {
    levloop::oracle::DEFAULT_DT
}

fn default_oracle_noise() -> NoiseConfig {
    NoiseConfig {
        gamma1_over_omega: 1e-3,
        gamma2_over_omega: 1e-4,
        force_f: 0.05,
    }
}

fn default_thermal_nbar() -> f64 {
    0.5
}

fn yes() -> bool {
    true
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            t1_tau: 1.0,
            l: 0,
            dim: None,
            dt_tau: default_dt(),
            noise: default_oracle_noise(),
            thermal_nbar: default_thermal_nbar(),
            richardson: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    #[serde(default = "default_eps_r")]
    pub eps_r: f64,
    #[serde(default = "elementary")]
    pub q1_c: f64,
    #[serde(default = "elementary")]
    pub q2_c: f64,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            eps_r: default_eps_r(),
            q1_c: E_CHARGE,
            q2_c: E_CHARGE,
        }
    }
}

fn default_eps_r() -> f64 {
    2.1
}

fn elementary() -> f64 {
    E_CHARGE
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvertConfig {
    #[serde(default)]
    pub force_f: Vec<f64>,
    #[serde(default)]
    pub force_n: Vec<f64>,
    #[serde(default)]
    pub gamma1_over_omega: Vec<f64>,
    #[serde(default)]
    pub gamma2_over_omega: Vec<f64>,
    #[serde(default)]
    pub sigma_eps_s: Vec<f64>,
    #[serde(default)]
    pub tau: Vec<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Rejects axes and sections the command does not use.
    pub fn check_keys(&self, command: &str, axes: &[&str], sections: &[&str]) -> Result<()> {
        for name in self.axes.keys() {
            ensure!(axes.contains(&name.as_str()), "axis `{name}` does not belong to `{command}` (allowed: {axes:?})");
        }
        let present = [
            ("protocol", self.protocol.is_some()),
            ("samples", self.samples.is_some()),
            ("strategies", self.strategies.is_some()),
            ("qfi_convention", self.qfi_convention.is_some()),
            ("oracle", self.oracle.is_some()),
            ("couplings", self.couplings.is_some()),
            ("convert", self.convert.is_some()),
        ];
        for (name, is_set) in present {
            ensure!(!is_set || sections.contains(&name), "`{name}` is not used by `{command}`");
        }
        Ok(())
    }

    pub fn axis(&self, name: &str) -> Result<Option<Vec<f64>>> {
        self.axes.get(name).map(|a| a.points(name)).transpose()
    }

    pub fn scenario(&self) -> Result<Option<Scenario>> {
        self.scenario.as_ref().map(ScenarioConfig::build).transpose()
    }
}
