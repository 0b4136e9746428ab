use std::f64::consts::{FRAC_PI_2, PI};
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use levloop::gaussian::{evolve_schedule, thermal_state, GaussianState1};
use levloop::metrology::{closed_form_qfi, fmin_curve, QfiConvention, StrategyKind};
use levloop::oracle::{
    build_operators, default_dim, evolve_master, evolve_master_checked, fidelity_pure, fock_state, gaussianity_gap,
    moments_from_rho, trace_distance, FockDensity,
};
use levloop::physcal::{
    displacement_noise_axis, force_to_newtons, frequency_noise_axis, gas_budget, gas_rate, jitter_to_gamma2,
    newtons_to_f, spectrum_from_gamma, Scenario,
};
use levloop::protocol::{build_loop, purity_sweep, run_loop, LoopSpec, DEFAULT_SAMPLES};
use levloop::twobody::{coupling_table, entangle_sweep, CouplingSetup};
use levloop::NoiseParams;
use serde::Serialize;

use crate::config::{OracleConfig, RunConfig};
use crate::plot::{self, PlotSpec};
use crate::table::{output_path, Cell, Table};

/// Largest t₁ω accepted by the oracle command.
pub const ORACLE_MAX_T1: f64 = 1.5;

#[derive(Debug, Clone)]
pub struct Options {
    pub out: String,
    pub samples: Option<usize>,
    pub emit_plot: bool,
}

/// Raised when the oracle ran but a check missed its threshold.
#[derive(Debug)]
pub struct OracleFailed(pub Vec<String>);

impl std::fmt::Display for OracleFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "oracle checks failed: {}", self.0.join(", "))
    }
}

impl std::error::Error for OracleFailed {}

fn finish(table: &Table, opts: &Options, name: &str, plot_spec: Option<PlotSpec>) -> Result<PathBuf> {
    let path = output_path(&opts.out, name, "csv");
    table.write(&path)?;
    if let (true, Some(spec)) = (opts.emit_plot, plot_spec) {
        plot::emit(&path, &spec)?;
    }
    Ok(path)
}

pub fn cmd_loop(cfg: &RunConfig, opts: &Options) -> Result<Vec<PathBuf>> {
    cfg.check_keys("loop", &[], &["protocol", "samples"])?;
    let spec = cfg.protocol.as_ref().context("`loop` needs a protocol section")?.build()?;
    let noise = cfg.noise.build()?;
    let state0 = thermal_state(cfg.initial.thermal()?)?;
    let samples = opts.samples.or(cfg.samples).unwrap_or(DEFAULT_SAMPLES);
    let scenario = cfg.scenario()?;

    let traj = run_loop(&state0, &spec, &noise, samples)?;
    let mut header = vec![
        "tau[omega*t]",
        "omega_sq_ratio[1]",
        "mean_x[x0]",
        "mean_p[p0]",
        "var_x[x0^2]",
        "var_p[p0^2]",
        "cov_xp[x0*p0]",
        "purity[1]",
    ];
    if scenario.is_some() {
        header.extend(["t[s]", "sigma_x[m]"]);
    }
    let mut t = Table::new(&header);
    for s in &traj.samples {
        let st = &s.state;
        let mut row: Vec<Cell> = vec![
            s.tau.into(),
            s.omega_sq_ratio.into(),
            st.mean_x.into(),
            st.mean_p.into(),
            st.var_x.into(),
            st.var_p.into(),
            st.cov_xp.into(),
            s.purity.into(),
        ];
        if let Some(sc) = &scenario {
            row.push((s.tau / sc.omega).into());
            row.push((st.var_x.sqrt() * sc.x_zpf()).into());
        }
        t.push(row);
    }
    let plot_spec = PlotSpec {
        x: "tau[omega*t]",
        y: &["var_x[x0^2]", "purity[1]"],
        group: None,
        log_x: false,
        log_y: true,
    };
    Ok(vec![finish(&t, opts, "loop", Some(plot_spec))?])
}

/// `T = 2 ln η + π/2` for an l = 0 loop.
fn total_from_eta(eta: f64) -> Result<f64> {
    ensure!(eta >= 1.0, "eta must be ≥ 1, got {eta}");
    Ok(2.0 * eta.ln() + FRAC_PI_2)
}

fn totals_axis(cfg: &RunConfig, allow_eta: bool) -> Result<Vec<f64>> {
    match (cfg.axis("total_tau")?, if allow_eta { cfg.axis("eta")? } else { None }) {
        (Some(t), None) => Ok(t),
        (None, Some(e)) => e.into_iter().map(total_from_eta).collect(),
        (Some(_), Some(_)) => bail!("give either the total_tau or the eta axis, not both"),
        (None, None) if allow_eta => bail!("a total_tau or eta axis is required"),
        (None, None) => bail!("a total_tau axis is required"),
    }
}

pub fn cmd_sweep_purity(cfg: &RunConfig, opts: &Options) -> Result<Vec<PathBuf>> {
    cfg.check_keys(
        "sweep-purity",
        &["total_tau", "eta", "gamma1_over_omega", "gamma2_over_omega"],
        &[],
    )?;
    let totals = totals_axis(cfg, true)?;
    let base = cfg.noise.build()?;
    let noise_axis: Vec<NoiseParams> = match (cfg.axis("gamma1_over_omega")?, cfg.axis("gamma2_over_omega")?) {
        (Some(_), Some(_)) => bail!("sweep one noise channel at a time"),
        (Some(g), None) => g
            .into_iter()
            .map(|v| NoiseParams::new(v, base.gamma2, base.force_f))
            .collect::<levloop::Result<_>>()?,
        (None, Some(g)) => g
            .into_iter()
            .map(|v| NoiseParams::new(base.gamma1, v, base.force_f))
            .collect::<levloop::Result<_>>()?,
        (None, None) => vec![base],
    };
    let init = cfg.initial.thermal()?;
    let scenario = cfg.scenario()?;
    let rows = purity_sweep(&totals, &noise_axis, init)?;

    let mut header = vec![
        "T[omega*t]",
        "eta[1]",
        "gamma1_over_omega[1]",
        "gamma2_over_omega[1]",
        "purity[1]",
    ];
    if scenario.is_some() {
        header.extend(["T[s]", "x0_sqrt_S1[m/sqrt(Hz)]", "sqrt_S2[1/sqrt(Hz)]", "gas_budget[1]"]);
    }
    let mut t = Table::new(&header);
    for r in &rows {
        let eta = ((r.total_tau - FRAC_PI_2) / 2.0).exp();
        let mut row: Vec<Cell> = vec![
            r.total_tau.into(),
            eta.into(),
            r.noise.gamma1.into(),
            r.noise.gamma2.into(),
            r.purity.into(),
        ];
        if let Some(sc) = &scenario {
            row.push((r.total_tau / sc.omega).into());
            row.push(displacement_noise_axis(r.noise.gamma1, sc)?.into());
            row.push(frequency_noise_axis(r.noise.gamma2, sc)?.into());
            row.push(gas_budget(sc, r.total_tau).into());
        }
        t.push(row);
    }
    let swept = if cfg.axes.contains_key("gamma2_over_omega") {
        "gamma2_over_omega[1]"
    } else {
        "gamma1_over_omega[1]"
    };
    let plot_spec = PlotSpec {
        x: "eta[1]",
        y: &["purity[1]"],
        group: Some(swept),
        log_x: true,
        log_y: false,
    };
    Ok(vec![finish(&t, opts, "purity", Some(plot_spec))?])
}

fn parse_convention(s: Option<&str>) -> Result<QfiConvention> {
    Ok(match s {
        None | Some("closed_form") => QfiConvention::ClosedForm,
        Some("sld") => QfiConvention::Sld,
        Some(other) => bail!("unknown qfi_convention `{other}` (expected closed_form or sld)"),
    })
}

pub fn cmd_force(cfg: &RunConfig, opts: &Options) -> Result<Vec<PathBuf>> {
    cfg.check_keys("force", &["total_tau"], &["strategies", "qfi_convention"])?;
    let totals = totals_axis(cfg, false)?;
    let noise = cfg.noise.build()?;
    let nbar = cfg.initial.thermal()?.nbar;
    let conv = parse_convention(cfg.qfi_convention.as_deref())?;
    let kinds: Vec<StrategyKind> = match &cfg.strategies {
        Some(names) => {
            ensure!(!names.is_empty(), "strategies must not be empty");
            names.iter().map(|n| n.parse()).collect::<levloop::Result<_>>()?
        }
        None => vec![StrategyKind::Loop, StrategyKind::Inverted, StrategyKind::Free],
    };
    let scenario = cfg.scenario()?;
    let ratio = conv.scale() / QfiConvention::ClosedForm.scale();

    let mut header = vec![
        "strategy",
        "T[omega*t]",
        "qfi[1]",
        "f_min[1]",
        "f_min_noise_free_closed_form[1]",
    ];
    if scenario.is_some() {
        header.extend(["T[s]", "F_min[N]"]);
    }
    let mut t = Table::new(&header);
    for kind in kinds {
        for r in fmin_curve(kind, &totals, &noise, nbar, conv)? {
            let closed = closed_form_qfi(kind, r.total_tau, nbar)
                .map(|q| 1.0 / (q * ratio).sqrt())
                .ok();
            let mut row: Vec<Cell> = vec![
                kind.name().into(),
                r.total_tau.into(),
                r.qfi.into(),
                r.f_min.into(),
                closed.into(),
            ];
            if let Some(sc) = &scenario {
                row.push((r.total_tau / sc.omega).into());
                row.push(force_to_newtons(r.f_min, sc).into());
            }
            t.push(row);
        }
    }
    let plot_spec = PlotSpec {
        x: "T[omega*t]",
        y: &["f_min[1]"],
        group: Some("strategy"),
        log_x: true,
        log_y: true,
    };
    Ok(vec![finish(&t, opts, "force", Some(plot_spec))?])
}

pub fn cmd_entangle(cfg: &RunConfig, opts: &Options) -> Result<Vec<PathBuf>> {
    cfg.check_keys("entangle", &["total_tau", "eta", "g_over_omega", "d_over_r"], &["couplings"])?;
    let scenario = cfg.scenario()?;
    let mut written = Vec::new();
    let has_surface = ["total_tau", "eta", "g_over_omega"].iter().any(|k| cfg.axes.contains_key(*k));
    let d_axis = cfg.axis("d_over_r")?;
    ensure!(
        has_surface || d_axis.is_some(),
        "`entangle` needs total_tau (or eta) and g_over_omega axes, a d_over_r axis, or both"
    );

    if has_surface {
        let totals = totals_axis(cfg, true)?;
        let gs = cfg.axis("g_over_omega")?.context("a g_over_omega axis is required")?;
        ensure!(
            cfg.noise.build()?.is_noiseless(),
            "two-body loops are noise-free; remove the noise section"
        );
        let rows = entangle_sweep(&totals, &gs)?;
        let mut header = vec![
            "T[omega*t]",
            "eta[1]",
            "g_over_Omega[1]",
            "eta2_g_t2[1]",
            "reduced_purity[1]",
            "global_purity[1]",
        ];
        if scenario.is_some() {
            header.extend(["T[s]", "g_over_2pi[Hz]"]);
        }
        let mut t = Table::new(&header);
        for r in &rows {
            let t1 = (r.total_tau - FRAC_PI_2) / 2.0;
            let eta = t1.exp();
            let mut row: Vec<Cell> = vec![
                r.total_tau.into(),
                eta.into(),
                r.g_over_omega.into(),
                (eta * eta * r.g_over_omega * FRAC_PI_2).into(),
                r.reduced_purity.into(),
                r.global_purity.into(),
            ];
            if let Some(sc) = &scenario {
                row.push((r.total_tau / sc.omega).into());
                row.push((r.g_over_omega * sc.omega / (2.0 * PI)).into());
            }
            t.push(row);
        }
        let plot_spec = PlotSpec {
            x: "T[omega*t]",
            y: &["reduced_purity[1]"],
            group: Some("g_over_Omega[1]"),
            log_x: false,
            log_y: false,
        };
        written.push(finish(&t, opts, "entangle", Some(plot_spec))?);
    }

    if let Some(ds) = d_axis {
        let sc = scenario.context("a d_over_r axis needs a scenario section")?;
        let cc = cfg.couplings.clone().unwrap_or_default();
        let setup = CouplingSetup {
            radius: sc.radius,
            density: sc.density,
            omega_shifted: sc.omega,
            eps_r: cc.eps_r,
            q1: cc.q1_c,
            q2: cc.q2_c,
        };
        let rows = coupling_table(&setup, &ds)?;
        let mut t = Table::new(&[
            "d_over_R[1]",
            "d[m]",
            "gravity_g_over_Omega[1]",
            "coulomb_g_over_Omega[1]",
            "casimir_g_over_Omega[1]",
            "gravity_g_over_2pi[Hz]",
            "coulomb_g_over_2pi[Hz]",
            "casimir_g_over_2pi[Hz]",
        ]);
        let hz = sc.omega / (2.0 * PI);
        for r in &rows {
            t.push(vec![
                r.d_over_r.into(),
                r.d.into(),
                r.gravity.into(),
                r.coulomb.into(),
                r.casimir.into(),
                (r.gravity * hz).into(),
                (r.coulomb * hz).into(),
                r.casimir.map(|c| c * hz).into(),
            ]);
        }
        let plot_spec = PlotSpec {
            x: "d_over_R[1]",
            y: &["gravity_g_over_Omega[1]", "coulomb_g_over_Omega[1]", "casimir_g_over_Omega[1]"],
            group: None,
            log_x: true,
            log_y: true,
        };
        written.push(finish(&t, opts, "couplings", Some(plot_spec))?);
    }
    Ok(written)
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    /// `None` for quantities that are only reported.
    pub threshold: Option<f64>,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            value,
            threshold: Some(threshold),
            passed: value <= threshold,
        }
    }

    fn report(name: &'static str, value: f64) -> Self {
        Self {
            name,
            value,
            threshold: None,
            passed: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub t1_tau: f64,
    pub l: u32,
    pub dim: usize,
    pub dt_tau: f64,
    pub gamma1_over_omega: f64,
    pub gamma2_over_omega: f64,
    pub force_f: f64,
    pub thermal_nbar: f64,
    pub max_leakage: f64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Largest moment discrepancy: means over their standard deviation,
/// variances relative, covariance over `√(var_x var_p)`.
pub fn moment_discrepancy(oracle: &GaussianState1, gauss: &GaussianState1) -> f64 {
    let (sx, sp) = (gauss.var_x.sqrt(), gauss.var_p.sqrt());
    [
        (oracle.mean_x - gauss.mean_x).abs() / sx,
        (oracle.mean_p - gauss.mean_p).abs() / sp,
        (oracle.var_x - gauss.var_x).abs() / gauss.var_x,
        (oracle.var_p - gauss.var_p).abs() / gauss.var_p,
        (oracle.cov_xp - gauss.cov_xp).abs() / (sx * sp),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

pub fn run_oracle(oc: &OracleConfig) -> Result<OracleReport> {
    ensure!(
        oc.t1_tau.is_finite() && (0.0..=ORACLE_MAX_T1).contains(&oc.t1_tau),
        "oracle.t1_tau must lie in [0, {ORACLE_MAX_T1}], got {}",
        oc.t1_tau
    );
    let spec = LoopSpec::new(oc.t1_tau, oc.l)?;
    let sched = build_loop(&spec);
    let dim = oc.dim.unwrap_or_else(|| default_dim(oc.t1_tau));
    let ops = build_operators(dim)?;
    let noise = oc.noise.build()?;
    let displacement = NoiseParams::new(noise.gamma1, 0.0, 0.0)?;
    let none = NoiseParams::none();
    let vac = FockDensity::vacuum(dim)?;
    let thermal = FockDensity::thermal(dim, oc.thermal_nbar)?;

    let ((clean, warm), (disp, full)) = rayon::join(
        || {
            rayon::join(
                || evolve_master(&vac, &sched, &none, oc.dt_tau),
                || evolve_master(&thermal, &sched, &none, oc.dt_tau),
            )
        },
        || {
            rayon::join(
                || evolve_master(&vac, &sched, &displacement, oc.dt_tau),
                || -> levloop::Result<(FockDensity, Option<f64>)> {
                    if oc.richardson {
                        let c = evolve_master_checked(&vac, &sched, &noise, oc.dt_tau)?;
                        Ok((c.rho, Some(c.richardson_error)))
                    } else {
                        Ok((evolve_master(&vac, &sched, &noise, oc.dt_tau)?, None))
                    }
                },
            )
        },
    );
    let (clean, warm, disp, (full, richardson)) = (clean?, warm?, disp?, full?);

    let gauss = evolve_schedule(&GaussianState1::vacuum(), &sched, &noise)?;
    let oracle_moments = moments_from_rho(&full, &ops)?;
    let mut checks = vec![
        Check::at_most(
            "loop_identity_vacuum_infidelity",
            1.0 - fidelity_pure(&fock_state(dim, 0)?, &clean)?,
            1e-6,
        ),
        Check::at_most("loop_identity_thermal_trace_distance", trace_distance(&warm, &thermal)?, 1e-5),
        Check::at_most("moment_discrepancy_max", moment_discrepancy(&oracle_moments, &gauss), 1e-3),
        Check::at_most("gaussianity_gap_noise_free", gaussianity_gap(&clean, &ops)?, 1e-8),
        Check::at_most("gaussianity_gap_displacement_noise", gaussianity_gap(&disp, &ops)?, 1e-6),
        Check::report("gaussianity_gap_full_noise", gaussianity_gap(&full, &ops)?),
    ];
    if let Some(r) = richardson {
        checks.push(Check::report("richardson_error_estimate", r));
    }
    for (name, rho) in [
        ("state_valid_noise_free", &clean),
        ("state_valid_thermal", &warm),
        ("state_valid_full_noise", &full),
    ] {
        let ok = rho.validate().is_ok();
        checks.push(Check {
            name,
            value: if ok { 1.0 } else { 0.0 },
            threshold: None,
            passed: ok,
        });
    }
    let max_leakage = [&clean, &warm, &disp, &full].iter().map(|r| r.leakage).fold(0.0, f64::max);
    Ok(OracleReport {
        t1_tau: oc.t1_tau,
        l: oc.l,
        dim,
        dt_tau: oc.dt_tau,
        gamma1_over_omega: noise.gamma1,
        gamma2_over_omega: noise.gamma2,
        force_f: noise.force_f,
        thermal_nbar: oc.thermal_nbar,
        max_leakage,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

pub fn cmd_oracle(cfg: &RunConfig, opts: &Options) -> Result<Vec<PathBuf>> {
    cfg.check_keys("oracle", &[], &["oracle"])?;
    let oc = cfg.oracle.clone().unwrap_or_default();
    let report = run_oracle(&oc)?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    let path = output_path(&opts.out, "oracle", "json");
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&path, &json).with_context(|| format!("writing {}", path.display()))?;
    print!("{json}");
    if !report.passed {
        let failed = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.to_string()).collect();
        return Err(OracleFailed(failed).into());
    }
    Ok(vec![path])
}

fn unit_rows(t: &mut Table, quantity: &str, inputs: &[f64], in_unit: &str, out_unit: &str, f: impl Fn(f64) -> Result<f64>) -> Result<()> {
    for &v in inputs {
        t.push(vec![quantity.into(), v.into(), in_unit.into(), f(v)?.into(), out_unit.into()]);
    }
    Ok(())
}

pub fn cmd_convert(cfg: &RunConfig, opts: &Options) -> Result<Vec<PathBuf>> {
    cfg.check_keys("convert", &[], &["convert"])?;
    let sc: Scenario = cfg.scenario()?.context("`convert` needs a scenario section")?;
    let conv = cfg.convert.clone().unwrap_or_default();
    let mut t = Table::new(&["quantity", "input", "input_unit", "output", "output_unit"]);
    t.push(vec!["zero_point_motion".into(), Cell::Empty, "".into(), sc.x_zpf().into(), "m".into()]);
    t.push(vec!["mass".into(), Cell::Empty, "".into(), sc.mass.into(), "kg".into()]);
    t.push(vec!["gas_rate".into(), sc.pressure.into(), "Pa".into(), gas_rate(&sc).into(), "1/s".into()]);
    unit_rows(&mut t, "force", &conv.force_f, "1", "N", |f| Ok(force_to_newtons(f, &sc)))?;
    unit_rows(&mut t, "force", &conv.force_n, "N", "1", |f| Ok(newtons_to_f(f, &sc)))?;
    unit_rows(&mut t, "displacement_noise", &conv.gamma1_over_omega, "Gamma1/omega", "m/sqrt(Hz)", |g| {
        Ok(displacement_noise_axis(g, &sc)?)
    })?;
    unit_rows(&mut t, "displacement_spectrum", &conv.gamma1_over_omega, "Gamma1/omega", "1/Hz", |g| {
        Ok(spectrum_from_gamma(g, 1, sc.omega)?.s_value)
    })?;
    unit_rows(&mut t, "frequency_noise", &conv.gamma2_over_omega, "Gamma2/omega", "1/sqrt(Hz)", |g| {
        Ok(frequency_noise_axis(g, &sc)?)
    })?;
    unit_rows(&mut t, "switching_jitter", &conv.sigma_eps_s, "s", "Gamma2/omega", |s| {
        Ok(jitter_to_gamma2(s, sc.omega)?)
    })?;
    unit_rows(&mut t, "time", &conv.tau, "omega*t", "s", |tau| Ok(tau / sc.omega))?;
    unit_rows(&mut t, "gas_budget", &conv.tau, "omega*t", "1", |tau| Ok(gas_budget(&sc, tau)))?;
    Ok(vec![finish(&t, opts, "convert", None)?])
}
