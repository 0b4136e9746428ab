//! Adaptive Dormand–Prince 5(4) integration for small fixed-size systems.
//!
//! The moment and sensitivity systems in this crate have at most a few dozen
//! components, so the state is a plain `[f64; N]` and the right-hand side is
//! any closure `Fn(t, &y) -> dy`.

use crate::error::{Error, Result};

/// Absolute/relative tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
}

impl Tolerance {
    pub const fn new(atol: f64, rtol: f64) -> Self {
        Self {
            atol,
            rtol,
            max_steps: 1_000_000,
        }
    }
}

impl Default for Tolerance {
    /// 1e-10 absolute and relative.
    fn default() -> Self {
        Self::new(1e-10, 1e-10)
    }
}

/// Bookkeeping returned alongside the solution.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

// Dormand & Prince (1980) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Fifth-order weights minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// Integrate `dy/dt = rhs(t, y)` from `t0` to `t1` with adaptive step control.
///
/// The error norm is the RMS over components of `err_i / (atol + rtol * max(|y_i|, |y_new_i|))`.
pub fn integrate<const N: usize, F>(
    rhs: F,
    t0: f64,
    t1: f64,
    y0: [f64; N],
    tol: Tolerance,
) -> Result<([f64; N], Stats)>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut stats = Stats::default();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((y0, stats));
    }
    if !span.is_finite() || span < 0.0 {
        return Err(Error::domain(format!("integration span {span} must be finite and nonnegative")));
    }

    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y);
    stats.evaluations += 1;

    let scale = |y: &[f64; N], i: usize| tol.atol + tol.rtol * y[i].abs();
    let norm = |v: &[f64; N], y: &[f64; N]| -> f64 {
        let s: f64 = (0..N).map(|i| (v[i] / scale(y, i)).powi(2)).sum();
        (s / N as f64).sqrt()
    };

    // Hairer–Wanner starting step.
    let d0 = norm(&y, &y);
    let d1 = norm(&k1, &y);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    // The trial Euler step feeds the curvature estimate; over long spans of
    // exponential growth an uncapped trial wildly overestimates it.
    h = h.min(0.01 * span);
    {
        let y1 = combine(&y, h, &[(1.0, &k1)]);
        let k = rhs(t + h, &y1);
        stats.evaluations += 1;
        let diff: [f64; N] = std::array::from_fn(|i| (k[i] - k1[i]) / h);
        let d2 = norm(&diff, &y);
        let h1 = if d1.max(d2) <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        h = (100.0 * h).min(h1).min(span);
    }

    let mut steps = 0usize;
    while t < t1 {
        if steps >= tol.max_steps {
            return Err(Error::Integrator {
                tau: t,
                steps,
                step: h,
                reason: "maximum number of steps exceeded".into(),
            });
        }
        steps += 1;

        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }

        let k2 = rhs(t + C2 * h, &combine(&y, h, &[(A21, &k1)]));
        let k3 = rhs(t + C3 * h, &combine(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(t + C4 * h, &combine(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = rhs(
            t + C5 * h,
            &combine(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = rhs(
            t + h,
            &combine(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = combine(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = rhs(t + h, &y_new);
        stats.evaluations += 6;

        let err: [f64; N] = std::array::from_fn(|i| {
            h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        });
        let err_norm = {
            let s: f64 = (0..N)
                .map(|i| {
                    let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
                    (err[i] / sc).powi(2)
                })
                .sum();
            (s / N as f64).sqrt()
        };

        if !err_norm.is_finite() {
            return Err(Error::Integrator {
                tau: t,
                steps,
                step: h,
                reason: "non-finite error estimate".into(),
            });
        }

        if err_norm <= 1.0 {
            stats.accepted += 1;
            t = if last { t1 } else { t + h };
            y = y_new;
            k1 = k7;
            let fac = if err_norm == 0.0 { 5.0 } else { (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err_norm.powf(-0.2)).clamp(0.1, 1.0);
        }

        if t < t1 && h.abs() < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::Integrator {
                tau: t,
                steps,
                step: h,
                reason: "step size underflow".into(),
            });
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sliver_final_step_is_not_an_underflow() {
        // The accepted steps land a rounding error short of the end point.
        let (y, _) = integrate(|_, y: &[f64; 1]| [y[0]], 0.0, 0.1 + 0.2, [1.0], Tolerance::default()).unwrap();
        assert!((y[0] - 0.3f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let (y, _) = integrate(|_, y: &[f64; 1]| [-y[0]], 0.0, 5.0, [1.0], Tolerance::default()).unwrap();
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_over_many_periods() {
        let tau = 20.0 * std::f64::consts::PI;
        let (y, stats) = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            tau,
            [1.0, 0.0],
            Tolerance::default(),
        )
        .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-8, "{y:?}");
        assert!(y[1].abs() < 1e-8);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn zero_span_is_identity() {
        let (y, stats) = integrate(|_, _: &[f64; 3]| [1.0; 3], 2.0, 2.0, [1.0, 2.0, 3.0], Tolerance::default()).unwrap();
        assert_eq!(y, [1.0, 2.0, 3.0]);
        assert_eq!(stats.evaluations, 0);
    }

    #[test]
    fn step_budget_is_reported() {
        let tol = Tolerance {
            max_steps: 3,
            ..Tolerance::default()
        };
        let err = integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, 100.0, [1.0, 0.0], tol).unwrap_err();
        assert!(err.is_numerical());
    }
}
