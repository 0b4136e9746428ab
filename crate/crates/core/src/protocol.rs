//! The inverted–harmonic–inverted expansion loop.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::FramedState;
use crate::gaussian::{
    evolve_schedule_framed, thermal_state, GaussianState1, NoiseParams, Potential, Schedule, Segment, ThermalSpec,
};

/// Default number of trajectory samples.
pub const DEFAULT_SAMPLES: usize = 512;

/// Parameters of one loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSpec {
    /// t₁ω, duration of each inverted segment.
    pub t1_tau: f64,
    /// Selects t₂ω = π(2l+1)/2.
    pub l: u32,
    /// κ of the inverted segments.
    pub kappa_inverted: f64,
}

impl LoopSpec {
    pub fn new(t1_tau: f64, l: u32) -> Result<Self> {
        Self::with_kappa(t1_tau, l, 1.0)
    }

    pub fn with_kappa(t1_tau: f64, l: u32, kappa_inverted: f64) -> Result<Self> {
        let s = Self {
            t1_tau,
            l,
            kappa_inverted,
        };
        s.validate()?;
        Ok(s)
    }

    /// l = 0 loop of total duration `total_tau`, t₁ = (T − π/2)/2.
    pub fn from_total_time(total_tau: f64) -> Result<Self> {
        if !(total_tau.is_finite() && total_tau >= FRAC_PI_2 * (1.0 - 1e-12)) {
            return Err(Error::domain(format!(
                "total time {total_tau} is shorter than the harmonic quarter period π/2"
            )));
        }
        Self::new(((total_tau - FRAC_PI_2) / 2.0).max(0.0), 0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1_tau.is_finite() && self.t1_tau >= 0.0) {
            return Err(Error::domain(format!("t1 must be finite and ≥ 0, got {}", self.t1_tau)));
        }
        if !(self.kappa_inverted > 0.0 && self.kappa_inverted <= 1.0) {
            return Err(Error::domain(format!(
                "inverted stiffness scale must lie in (0, 1], got {}",
                self.kappa_inverted
            )));
        }
        Ok(())
    }

    /// t₂ω = π(2l+1)/2.
    pub fn t2_tau(&self) -> f64 {
        PI * (2 * self.l + 1) as f64 / 2.0
    }

    pub fn total_tau(&self) -> f64 {
        2.0 * self.t1_tau + self.t2_tau()
    }

    /// Expansion coefficient e^{t₁ω} (κ = 1).
    pub fn eta(&self) -> f64 {
        self.t1_tau.exp()
    }
}

/// `[inverted(t₁, κ), harmonic(π(2l+1)/2), inverted(t₁, κ)]`.
pub fn build_loop(spec: &LoopSpec) -> Schedule {
    let inv = Segment {
        sign: Potential::Inverted,
        stiffness_scale: spec.kappa_inverted,
        duration_tau: spec.t1_tau,
    };
    [inv, Segment::harmonic(spec.t2_tau()), inv].into_iter().collect()
}

/// One point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub tau: f64,
    pub state: GaussianState1,
    /// Purity evaluated in the propagation frame.
    pub purity: f64,
    /// `sign·κ²` of the segment active from this sample onward (the last
    /// sample reports the final segment).
    pub omega_sq_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub schedule: Schedule,
}

impl Trajectory {
    pub fn final_state(&self) -> &GaussianState1 {
        &self.samples.last().expect("trajectory has samples").state
    }
}

/// Sample times: every segment boundary, plus the remaining points spread
/// over the segments in proportion to their duration and uniform inside each.
pub fn sample_times(schedule: &Schedule, n_samples: usize) -> Result<Vec<f64>> {
    if n_samples < 2 {
        return Err(Error::domain(format!("n_samples must be ≥ 2, got {n_samples}")));
    }
    let total = schedule.total_duration();
    if total <= 0.0 {
        return Err(Error::domain("schedule has zero total duration"));
    }
    let durations: Vec<f64> = schedule
        .segments()
        .iter()
        .map(|s| s.duration_tau)
        .filter(|&d| d > 0.0)
        .collect();
    let k = durations.len();
    if n_samples < k + 1 {
        return Ok((0..n_samples)
            .map(|i| total * i as f64 / (n_samples - 1) as f64)
            .collect());
    }

    // Largest-remainder apportionment of interior points.
    let interior = n_samples - (k + 1);
    let quotas: Vec<f64> = durations.iter().map(|d| interior as f64 * d / total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = interior - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }

    let mut times = Vec::with_capacity(n_samples);
    let mut start = 0.0;
    times.push(0.0);
    for (d, c) in durations.iter().zip(&counts) {
        for j in 1..=*c {
            times.push(start + d * j as f64 / (*c + 1) as f64);
        }
        start += d;
        times.push(start);
    }
    // Pin the final point to the exact total.
    *times.last_mut().unwrap() = total;
    Ok(times)
}

/// Propagate through an arbitrary schedule, recording samples.
pub fn run_schedule(
    state0: &GaussianState1,
    schedule: &Schedule,
    noise: &NoiseParams,
    n_samples: usize,
) -> Result<Trajectory> {
    state0.validate()?;
    noise.validate()?;
    let times = sample_times(schedule, n_samples)?;
    let segs: Vec<Segment> = schedule
        .segments()
        .iter()
        .copied()
        .filter(|s| s.duration_tau > 0.0)
        .collect();

    let mut fs = FramedState::new(state0);
    let mut samples = Vec::with_capacity(times.len());
    let mut seg_idx = 0usize;
    let mut seg_start = 0.0;
    let mut tau = 0.0;
    let active = |idx: usize| segs[idx.min(segs.len() - 1)].curvature();

    for (i, &t) in times.iter().enumerate() {
        // Walk from `tau` to `t`, splitting at segment ends.
        while tau < t {
            let seg = segs[seg_idx];
            let seg_end = seg_start + seg.duration_tau;
            let last_seg = seg_idx + 1 == segs.len();
            let stop = if last_seg { t } else { t.min(seg_end) };
            fs.evolve(&seg.with_duration(stop - tau), noise)?;
            tau = stop;
            if !last_seg && tau >= seg_end {
                seg_idx += 1;
                seg_start = seg_end;
                // Snap to the exact boundary so later pieces start cleanly.
                tau = seg_end;
            }
        }
        let is_last = i + 1 == times.len();
        samples.push(Sample {
            tau: t,
            state: fs.state(),
            purity: fs.purity(),
            omega_sq_ratio: if is_last { active(segs.len() - 1) } else { active(seg_idx) },
        });
    }
    Ok(Trajectory {
        samples,
        schedule: schedule.clone(),
    })
}

/// Sampled loop trajectory.
pub fn run_loop(state0: &GaussianState1, spec: &LoopSpec, noise: &NoiseParams, n_samples: usize) -> Result<Trajectory> {
    spec.validate()?;
    run_schedule(state0, &build_loop(spec), noise, n_samples)
}

/// Frame-tracked state at the end of the loop.
pub fn run_loop_final(state0: &GaussianState1, spec: &LoopSpec, noise: &NoiseParams) -> Result<FramedState> {
    spec.validate()?;
    evolve_schedule_framed(state0, &build_loop(spec), noise)
}

/// State at the loop midpoint τ = t₁ + t₂/2.
pub fn midpoint_state(state0: &GaussianState1, spec: &LoopSpec, noise: &NoiseParams) -> Result<GaussianState1> {
    spec.validate()?;
    let sched = build_loop(spec).truncated(spec.total_tau() / 2.0);
    Ok(evolve_schedule_framed(state0, &sched, noise)?.state())
}

/// Measured expansion σ_x(T/2)/σ_x(0) of a noise-free loop.
pub fn loop_eta(state0: &GaussianState1, spec: &LoopSpec) -> Result<f64> {
    let mid = midpoint_state(state0, spec, &NoiseParams::none())?;
    crate::gaussian::expansion_eta(&mid, state0)
}

fn require_full_stiffness(spec: &LoopSpec) -> Result<()> {
    spec.validate()?;
    if spec.kappa_inverted != 1.0 {
        return Err(Error::Unsupported(format!(
            "force displacement prediction requires κ = 1, got {}",
            spec.kappa_inverted
        )));
    }
    Ok(())
}

/// Final `(⟨x̃⟩, ⟨p̃⟩)` of a noise-free loop started from zero means.
///
/// Even l: `2f(1 − 2e^{t₁})(1, 1)`; odd l: `2f(1 − 2e^{−t₁})(1, −1)`.
pub fn predicted_final_displacement(f: f64, spec: &LoopSpec) -> Result<(f64, f64)> {
    require_full_stiffness(spec)?;
    let t1 = spec.t1_tau;
    Ok(if spec.l.is_multiple_of(2) {
        let a = 2.0 * f * (1.0 - 2.0 * t1.exp());
        (a, a)
    } else {
        let a = 2.0 * f * (1.0 - 2.0 * (-t1).exp());
        (a, -a)
    })
}

/// Final means for arbitrary initial means: the loop acts as the harmonic
/// rotation by t₂ followed by the force displacement.
pub fn predicted_final_means(f: f64, spec: &LoopSpec, mean_x0: f64, mean_p0: f64) -> Result<(f64, f64)> {
    let (dx, dp) = predicted_final_displacement(f, spec)?;
    let s = if spec.l.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok((s * mean_p0 + dx, -s * mean_x0 + dp))
}

/// One row of a purity sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurityRow {
    pub total_tau: f64,
    pub noise: NoiseParams,
    pub purity: f64,
}

/// Final purity over a (total time × noise) grid, l = 0, outer axis = time.
/// An empty noise axis is treated as the single noise-free point.
pub fn purity_sweep(totals: &[f64], noise_axis: &[NoiseParams], init: ThermalSpec) -> Result<Vec<PurityRow>> {
    let state0 = thermal_state(init)?;
    let none = [NoiseParams::none()];
    let noises: &[NoiseParams] = if noise_axis.is_empty() { &none } else { noise_axis };
    let specs: Vec<LoopSpec> = totals.iter().map(|&t| LoopSpec::from_total_time(t)).collect::<Result<_>>()?;
    let n = noises.len();
    (0..specs.len() * n)
        .into_par_iter()
        .map(|idx| {
            let (spec, noise) = (&specs[idx / n], &noises[idx % n]);
            let fs = run_loop_final(&state0, spec, noise)?;
            Ok(PurityRow {
                total_tau: totals[idx / n],
                noise: *noise,
                purity: fs.purity(),
            })
        })
        .collect()
}

/// Which dissipator a purity crossing is searched along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseChannel {
    Displacement,
    Frequency,
}

impl NoiseChannel {
    pub fn params(self, rate: f64) -> NoiseParams {
        match self {
            NoiseChannel::Displacement => NoiseParams {
                gamma1: rate,
                ..NoiseParams::default()
            },
            NoiseChannel::Frequency => NoiseParams {
                gamma2: rate,
                ..NoiseParams::default()
            },
        }
    }
}

/// Final loop purity for a single noise channel at the given rate.
pub fn loop_purity(spec: &LoopSpec, init: ThermalSpec, channel: NoiseChannel, rate: f64) -> Result<f64> {
    Ok(run_loop_final(&thermal_state(init)?, spec, &channel.params(rate))?.purity())
}

/// Rate at which the final purity equals `target`, by bisection in log-rate
/// over `[lo, hi]`. Returns a domain error when the bracket does not contain
/// the crossing.
pub fn purity_crossing(
    spec: &LoopSpec,
    init: ThermalSpec,
    channel: NoiseChannel,
    target: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::domain(format!("invalid bracket [{lo}, {hi}]")));
    }
    let g = |r: f64| loop_purity(spec, init, channel, r).map(|p| p - target);
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let (fa, fb) = (g(lo)?, g(hi)?);
    if fa < 0.0 || fb > 0.0 {
        return Err(Error::domain(format!(
            "purity {target} is not crossed in [{lo:e}, {hi:e}] (purity − target: {fa:e}, {fb:e})"
        )));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a < 1e-12 {
            break;
        }
        if g(m.exp())? > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn loop_segments() {
        let s = build_loop(&LoopSpec::new(1.0, 0).unwrap());
        let d: Vec<f64> = s.segments().iter().map(|x| x.duration_tau).collect();
        assert_eq!(d, vec![1.0, FRAC_PI_2, 1.0]);
        let s = build_loop(&LoopSpec::new(1.0, 1).unwrap());
        assert_relative_eq!(s.segments()[1].duration_tau, 3.0 * FRAC_PI_2, max_relative = 1e-15);
    }

    #[test]
    fn sample_grid_includes_boundaries() {
        let spec = LoopSpec::new(1.0, 0).unwrap();
        let t = sample_times(&build_loop(&spec), 512).unwrap();
        assert_eq!(t.len(), 512);
        assert_eq!(t[0], 0.0);
        assert_eq!(*t.last().unwrap(), spec.total_tau());
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!(t.contains(&1.0));
        assert!(t.contains(&(1.0 + FRAC_PI_2)));
        let t = sample_times(&build_loop(&spec), 3).unwrap();
        assert_eq!(t.len(), 3);
        assert!(sample_times(&build_loop(&spec), 1).is_err());
    }

    #[test]
    fn thermal_loop_returns() {
        let s0 = thermal_state(ThermalSpec { nbar: 2.0 }).unwrap();
        for l in 0..3 {
            let tr = run_loop(&s0, &LoopSpec::new(3.0, l).unwrap(), &NoiseParams::none(), 64).unwrap();
            let f = tr.final_state();
            assert!((f.var_x - 5.0).abs() < 1e-9 && (f.var_p - 5.0).abs() < 1e-9 && f.cov_xp.abs() < 1e-9);
        }
    }

    #[test]
    fn force_prediction_matches_propagation() {
        let f = 0.1;
        for l in 0..2 {
            let spec = LoopSpec::new(1.0, l).unwrap();
            let noise = NoiseParams::new(0.0, 0.0, f).unwrap();
            let fin = run_loop_final(&GaussianState1::vacuum(), &spec, &noise).unwrap().state();
            let (x, p) = predicted_final_displacement(f, &spec).unwrap();
            assert_relative_eq!(fin.mean_x, x, max_relative = 1e-12);
            assert_relative_eq!(fin.mean_p, p, max_relative = 1e-12);
        }
        let k = LoopSpec::with_kappa(1.0, 0, 0.5).unwrap();
        assert!(matches!(predicted_final_displacement(0.1, &k), Err(Error::Unsupported(_))));
    }

    #[test]
    fn total_time_too_short() {
        assert!(LoopSpec::from_total_time(1.0).is_err());
        assert_eq!(LoopSpec::from_total_time(FRAC_PI_2).unwrap().t1_tau, 0.0);
    }
}
