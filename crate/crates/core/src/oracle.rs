//! Truncated Fock-space master-equation integration, used as ground truth
//! for the moment equations.
//!
//! `dρ/dτ = −i[H, ρ] − Γ₁/ω [x̃, [x̃, ρ]] − Γ₂/ω [x̃², [x̃², ρ]]` with
//! `H = (p̃² + a x̃²)/4 + f x̃` in units of ħω.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState1, NoiseParams, Schedule};

/// Trace tolerance of a valid density matrix.
pub const TRACE_TOL: f64 = 1e-8;
/// Hermiticity tolerance.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Most negative eigenvalue tolerated.
pub const POSITIVITY_TOL: f64 = 1e-8;
/// Largest population allowed in the top tenth of the levels.
pub const LEAKAGE_LIMIT: f64 = 1e-6;
/// Default fixed step.
pub const DEFAULT_DT: f64 = 1e-3;
/// Largest dimension chosen automatically.
pub const MAX_AUTO_DIM: usize = 400;
/// Largest per-mode dimension of the two-mode oracle.
pub const MAX_TWO_MODE_DIM: usize = 30;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `⌈40 cosh(2 t₁)⌉`, capped at 400.
pub fn default_dim(t1_tau: f64) -> usize {
    let d = (40.0 * (2.0 * t1_tau).cosh()).ceil();
    if d.is_finite() {
        (d as usize).clamp(2, MAX_AUTO_DIM)
    } else {
        MAX_AUTO_DIM
    }
}

/// Real symmetric banded matrix stored by diagonals `d_o[i] = B[i, i+o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Banded {
    n: usize,
    /// Offsets 0..=bw, upper diagonals only (the matrix is symmetric).
    diags: Vec<Vec<f64>>,
}

impl Banded {
    fn new(n: usize, bw: usize) -> Self {
        Self {
            n,
            diags: (0..=bw).map(|o| vec![0.0; n.saturating_sub(o)]).collect(),
        }
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.diags[j - i][i] = v;
    }

    fn add_scaled(&self, other: &Banded, s: f64) -> Banded {
        let bw = self.diags.len().max(other.diags.len()) - 1;
        let mut out = Banded::new(self.n, bw);
        for (o, d) in self.diags.iter().enumerate() {
            for (i, v) in d.iter().enumerate() {
                out.diags[o][i] += v;
            }
        }
        for (o, d) in other.diags.iter().enumerate() {
            for (i, v) in d.iter().enumerate() {
                out.diags[o][i] += s * v;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (o, d) in self.diags.iter().enumerate() {
            for (i, v) in d.iter().enumerate() {
                m[(i, i + o)] = *v;
                m[(i + o, i)] = *v;
            }
        }
        m
    }

    /// `out += s · B ρ`.
    fn left_mul_acc(&self, rho: &[Complex64], s: Complex64, out: &mut [Complex64]) {
        let n = self.n;
        for j in 0..n {
            let col = &rho[j * n..(j + 1) * n];
            let dst = &mut out[j * n..(j + 1) * n];
            for (o, d) in self.diags.iter().enumerate() {
                // Upper: B[i, i+o] ρ[i+o, j].
                for (i, &b) in d.iter().enumerate() {
                    dst[i] += s * (b * col[i + o]);
                }
                if o > 0 {
                    // Lower: B[i+o, i] ρ[i, j].
                    for (i, &b) in d.iter().enumerate() {
                        dst[i + o] += s * (b * col[i]);
                    }
                }
            }
        }
    }

    /// `out += s · ρ B`.
    fn right_mul_acc(&self, rho: &[Complex64], s: Complex64, out: &mut [Complex64]) {
        let n = self.n;
        for (o, d) in self.diags.iter().enumerate() {
            for (k, &b) in d.iter().enumerate() {
                // B[k, k+o]: column k+o gets ρ[:, k] b; column k gets ρ[:, k+o] b.
                let sb = s * b;
                {
                    let (src, dst) = (k, k + o);
                    for i in 0..n {
                        out[dst * n + i] += sb * rho[src * n + i];
                    }
                }
                if o > 0 {
                    let (src, dst) = (k + o, k);
                    for i in 0..n {
                        out[dst * n + i] += sb * rho[src * n + i];
                    }
                }
            }
        }
    }

    /// `[B, ρ]`.
    fn commutator(&self, rho: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); rho.len()];
        self.left_mul_acc(rho, Complex64::new(1.0, 0.0), &mut out);
        self.right_mul_acc(rho, Complex64::new(-1.0, 0.0), &mut out);
        out
    }
}

/// Dimensionless quadrature operators on a truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperators {
    pub dim: usize,
    /// `x̃ = a + a†`.
    pub x_op: DMatrix<f64>,
    /// `p̃ = i(a† − a)`.
    pub p_op: DMatrix<Complex64>,
    x: Banded,
    /// Exact matrix elements of `x̃²` (not the truncated product).
    x2: Banded,
    p2: Banded,
    /// `½(x̃p̃ + p̃x̃) = i(a†² − a²)`, Hermitian.
    sym_xp: DMatrix<Complex64>,
}

/// Build `x̃`, `p̃` and the quadratic operators for dimension `dim ≥ 2`.
pub fn build_operators(dim: usize) -> Result<FockOperators> {
    if dim < 2 {
        return Err(Error::domain(format!("Fock dimension must be ≥ 2, got {dim}")));
    }
    let sq = |n: usize| (n as f64).sqrt();
    let mut x = Banded::new(dim, 1);
    let mut x2 = Banded::new(dim, 2);
    let mut p2 = Banded::new(dim, 2);
    let mut p_op = DMatrix::zeros(dim, dim);
    let mut sym_xp = DMatrix::zeros(dim, dim);
    for n in 0..dim {
        x2.set(n, n, 2.0 * n as f64 + 1.0);
        p2.set(n, n, 2.0 * n as f64 + 1.0);
        if n + 1 < dim {
            // ⟨n|a|n+1⟩ = √(n+1).
            x.set(n, n + 1, sq(n + 1));
            p_op[(n + 1, n)] = I * sq(n + 1);
            p_op[(n, n + 1)] = -I * sq(n + 1);
        }
        if n + 2 < dim {
            let a2 = sq(n + 1) * sq(n + 2);
            x2.set(n, n + 2, a2);
            p2.set(n, n + 2, -a2);
            // i(a†² − a²): ⟨n+2|·|n⟩ = i a2, ⟨n|·|n+2⟩ = −i a2.
            sym_xp[(n + 2, n)] = I * a2;
            sym_xp[(n, n + 2)] = -I * a2;
        }
    }
    Ok(FockOperators {
        dim,
        x_op: x.to_dense(),
        p_op,
        x,
        x2,
        p2,
        sym_xp,
    })
}

impl FockOperators {
    /// `(p̃² + a x̃²)/4 + f x̃`.
    fn hamiltonian(&self, curvature: f64, f: f64) -> Banded {
        let mut h = self.p2.add_scaled(&self.x2, curvature);
        for d in h.diags.iter_mut() {
            for v in d.iter_mut() {
                *v *= 0.25;
            }
        }
        h.add_scaled(&self.x, f)
    }
}

/// Truncated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensity {
    pub dim: usize,
    pub rho: DMatrix<Complex64>,
    /// Population in the top tenth of the levels.
    pub leakage: f64,
}

fn top_band(dim: usize) -> usize {
    dim - dim.div_ceil(10)
}

fn leakage_of(rho: &DMatrix<Complex64>) -> f64 {
    let n = rho.nrows();
    (top_band(n)..n).map(|k| rho[(k, k)].re).sum::<f64>().max(0.0)
}

impl FockDensity {
    pub fn from_matrix(rho: DMatrix<Complex64>) -> Result<Self> {
        if rho.nrows() != rho.ncols() || rho.nrows() < 2 {
            return Err(Error::domain("density matrix must be square with dimension ≥ 2"));
        }
        let s = Self {
            dim: rho.nrows(),
            leakage: leakage_of(&rho),
            rho,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        let mut p = vec![0.0; dim];
        if dim > 0 {
            p[0] = 1.0;
        }
        Self::diagonal(&p)
    }

    /// Diagonal state with the given populations (not renormalized).
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let dim = populations.len();
        let rho = DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                Complex64::new(populations[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self::from_matrix(rho)
    }

    /// Thermal state `P(n) = n̄ⁿ/(1+n̄)^{n+1}`, truncated and renormalized.
    pub fn thermal(dim: usize, nbar: f64) -> Result<Self> {
        if !(nbar.is_finite() && nbar >= 0.0) {
            return Err(Error::domain(format!("nbar must be ≥ 0, got {nbar}")));
        }
        let r = nbar / (1.0 + nbar);
        let mut p: Vec<f64> = (0..dim).map(|n| r.powi(n as i32) / (1.0 + nbar)).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        Self::diagonal(&p)
    }

    /// `|ψ⟩⟨ψ|` for a normalized vector.
    pub fn pure(psi: &DVector<Complex64>) -> Result<Self> {
        Self::from_matrix(psi * psi.adjoint())
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    /// Trace, Hermiticity and positivity.
    pub fn validate(&self) -> Result<()> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::invalid(format!("trace {tr} differs from 1")));
        }
        let herm = (&self.rho - self.rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > HERMITIAN_TOL {
            return Err(Error::invalid(format!("density matrix is not Hermitian ({herm:e})")));
        }
        let min = SymmetricEigen::new(self.rho.clone()).eigenvalues.min();
        if min < -POSITIVITY_TOL {
            return Err(Error::invalid(format!("density matrix has eigenvalue {min:e}")));
        }
        Ok(())
    }

    fn hermitize(&mut self) {
        let h = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        self.rho = h;
    }
}

fn check_leakage(rho: &DMatrix<Complex64>, tau: f64) -> Result<f64> {
    let leak = leakage_of(rho);
    if !leak.is_finite() || leak > LEAKAGE_LIMIT {
        return Err(Error::Truncation {
            dim: rho.nrows(),
            tau,
            leakage: leak,
            limit: LEAKAGE_LIMIT,
        });
    }
    Ok(leak)
}

fn lindblad(h: &Banded, ops: &FockOperators, noise: &NoiseParams, rho: &[Complex64]) -> Vec<Complex64> {
    let mut out = h.commutator(rho);
    out.iter_mut().for_each(|z| *z *= -I);
    for (rate, op) in [(noise.gamma1, &ops.x), (noise.gamma2, &ops.x2)] {
        if rate > 0.0 {
            let inner = op.commutator(rho);
            let outer = op.commutator(&inner);
            for (o, v) in out.iter_mut().zip(outer) {
                *o -= rate * v;
            }
        }
    }
    out
}

fn axpy(y: &[Complex64], a: f64, k: &[Complex64]) -> Vec<Complex64> {
    y.iter().zip(k).map(|(y, k)| y + a * k).collect()
}

/// Integrate the master equation through a schedule.
///
/// Noisy segments use classical RK4 with step `dt_tau` (shortened to land on
/// segment ends); noise-free segments use the exact propagator from the
/// eigen-decomposition of `H`. Leakage is checked after every step.
pub fn evolve_master(rho: &FockDensity, schedule: &Schedule, noise: &NoiseParams, dt_tau: f64) -> Result<FockDensity> {
    noise.validate()?;
    if !(dt_tau.is_finite() && dt_tau > 0.0) {
        return Err(Error::domain(format!("step must be positive, got {dt_tau}")));
    }
    let ops = build_operators(rho.dim)?;
    let n = rho.dim;
    let mut state = rho.rho.clone();
    let mut tau0 = 0.0;
    let mut leak = check_leakage(&state, 0.0)?;

    for seg in schedule.segments() {
        seg.validate()?;
        let d = seg.duration_tau;
        if d == 0.0 {
            continue;
        }
        let h = ops.hamiltonian(seg.curvature(), noise.force_f);
        if noise.is_noiseless() {
            // Apply U(δ) repeatedly so leakage is observed inside the segment.
            let pieces = ((d / 0.05).ceil() as usize).max(8);
            let delta = d / pieces as f64;
            let eig = SymmetricEigen::new(h.to_dense());
            let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
            let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| (-I * e * delta).exp()));
            let u = &v * phases * v.transpose();
            let ud = u.adjoint();
            for k in 1..=pieces {
                state = &u * &state * &ud;
                leak = check_leakage(&state, tau0 + k as f64 * delta)?;
            }
        } else {
            let steps = (d / dt_tau).ceil() as usize;
            let h_step = d / steps as f64;
            let mut y: Vec<Complex64> = state.as_slice().to_vec();
            for k in 0..steps {
                let k1 = lindblad(&h, &ops, noise, &y);
                let k2 = lindblad(&h, &ops, noise, &axpy(&y, 0.5 * h_step, &k1));
                let k3 = lindblad(&h, &ops, noise, &axpy(&y, 0.5 * h_step, &k2));
                let k4 = lindblad(&h, &ops, noise, &axpy(&y, h_step, &k3));
                for i in 0..y.len() {
                    y[i] += h_step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                let pop: f64 = (top_band(n)..n).map(|j| y[j * n + j].re).sum();
                if !(pop <= LEAKAGE_LIMIT) {
                    return Err(Error::Truncation {
                        dim: n,
                        tau: tau0 + (k + 1) as f64 * h_step,
                        leakage: pop,
                        limit: LEAKAGE_LIMIT,
                    });
                }
            }
            state = DMatrix::from_vec(n, n, y);
            leak = check_leakage(&state, tau0 + d)?;
        }
        tau0 += d;
    }
    let mut out = FockDensity {
        dim: n,
        rho: state,
        leakage: leak,
    };
    out.hermitize();
    Ok(out)
}

/// Result of [`evolve_master_checked`].
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedEvolution {
    /// Solution at step `dt/2`.
    pub rho: FockDensity,
    /// Richardson estimate of the remaining error, `max|ρ_dt − ρ_{dt/2}| / 15`.
    pub richardson_error: f64,
}

/// Run at `dt` and `dt/2` and estimate the step error.
pub fn evolve_master_checked(
    rho: &FockDensity,
    schedule: &Schedule,
    noise: &NoiseParams,
    dt_tau: f64,
) -> Result<CheckedEvolution> {
    let coarse = evolve_master(rho, schedule, noise, dt_tau)?;
    let fine = evolve_master(rho, schedule, noise, dt_tau / 2.0)?;
    let diff = (&coarse.rho - &fine.rho).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(CheckedEvolution {
        rho: fine,
        richardson_error: diff / 15.0,
    })
}

/// `⟨x̃⟩, ⟨p̃⟩` and the central second moments as traces.
pub fn moments_from_rho(rho: &FockDensity, ops: &FockOperators) -> Result<GaussianState1> {
    if rho.dim != ops.dim {
        return Err(Error::domain("operator and state dimensions differ"));
    }
    let r = &rho.rho;
    let tr = |m: &DMatrix<Complex64>| (m * r).trace().re;
    let x = ops.x_op.map(|v| Complex64::new(v, 0.0));
    let mx = tr(&x);
    let mp = tr(&ops.p_op);
    let x2 = tr(&ops.x2.to_dense().map(|v| Complex64::new(v, 0.0)));
    let p2 = tr(&ops.p2.to_dense().map(|v| Complex64::new(v, 0.0)));
    let xp = tr(&ops.sym_xp);
    Ok(GaussianState1 {
        mean_x: mx,
        mean_p: mp,
        var_x: x2 - mx * mx,
        var_p: p2 - mp * mp,
        cov_xp: xp - mx * mp,
    })
}

/// `tr ρ²`.
pub fn purity_fock(rho: &FockDensity) -> f64 {
    rho.rho.iter().map(|z| z.norm_sqr()).sum()
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn fidelity_pure(psi: &DVector<Complex64>, rho: &FockDensity) -> Result<f64> {
    if psi.len() != rho.dim {
        return Err(Error::domain("state vector and density matrix dimensions differ"));
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::domain(format!("reference state is not normalized (|ψ| = {norm})")));
    }
    Ok((psi.adjoint() * &rho.rho * psi)[(0, 0)].re)
}

/// `|tr ρ² − 1/√det Σ|` with Σ from the state's own moments.
pub fn gaussianity_gap(rho: &FockDensity, ops: &FockOperators) -> Result<f64> {
    let m = moments_from_rho(rho, ops)?;
    Ok((purity_fock(rho) - 1.0 / m.det().sqrt()).abs())
}

/// `‖A‖₁` of a Hermitian matrix.
pub fn trace_norm(a: &DMatrix<Complex64>) -> f64 {
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.iter().map(|e| e.abs()).sum()
}

/// `‖ρ − σ‖₁`.
pub fn trace_distance(a: &FockDensity, b: &FockDensity) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::domain("dimensions differ"));
    }
    Ok(trace_norm(&(&a.rho - &b.rho)))
}

/// Fock basis vector `|n⟩`.
pub fn fock_state(dim: usize, n: usize) -> Result<DVector<Complex64>> {
    if n >= dim {
        return Err(Error::domain(format!("level {n} outside dimension {dim}")));
    }
    let mut v = DVector::zeros(dim);
    v[n] = Complex64::new(1.0, 0.0);
    Ok(v)
}

/// `D(α)|0⟩ = exp(α a† − α* a)|0⟩` by exact exponentiation of the truncated
/// generator.
pub fn displaced_vacuum(dim: usize, alpha: Complex64) -> Result<DVector<Complex64>> {
    if dim < 2 {
        return Err(Error::domain("dimension must be ≥ 2"));
    }
    // G = α a† − α* a is anti-Hermitian; K = iG is Hermitian and D = e^{−iK}.
    let mut k = DMatrix::<Complex64>::zeros(dim, dim);
    for n in 0..dim - 1 {
        let s = ((n + 1) as f64).sqrt();
        k[(n + 1, n)] = I * alpha * s;
        k[(n, n + 1)] = -I * alpha.conj() * s;
    }
    let eig = SymmetricEigen::new(k);
    let v = &eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| (-I * e).exp()));
    let d = v * phases * v.adjoint();
    Ok(d.column(0).into_owned())
}

/// Result of the two-mode pure-state oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeResult {
    pub dim: usize,
    /// Reduced purity of particle 1.
    pub reduced_purity: f64,
    /// Particle-1 moments.
    pub moments1: GaussianState1,
    /// Population on levels of either mode in its top tenth.
    pub leakage: f64,
}

/// Vacuum ⊗ vacuum evolved under `H = h ⊗ 1 + 1 ⊗ h + (g/Ω) x̃ ⊗ x̃` with RK4.
pub fn two_mode_pure(dim: usize, schedule: &Schedule, g_over_omega: f64, dt_tau: f64) -> Result<TwoModeResult> {
    if !(2..=MAX_TWO_MODE_DIM).contains(&dim) {
        return Err(Error::domain(format!(
            "two-mode oracle supports 2 ≤ dim ≤ {MAX_TWO_MODE_DIM}, got {dim}"
        )));
    }
    if !(dt_tau > 0.0) {
        return Err(Error::domain("step must be positive"));
    }
    let ops = build_operators(dim)?;
    let n = dim;
    let mut psi = vec![Complex64::new(0.0, 0.0); n * n];
    psi[0] = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);

    // Ψ[i + j n] = ψ_{i j}, i for particle 1.
    let apply_h = |h: &Banded, psi: &[Complex64]| -> Vec<Complex64> {
        let mut out = vec![zero; psi.len()];
        let one = Complex64::new(1.0, 0.0);
        h.left_mul_acc(psi, one, &mut out);
        h.right_mul_acc(psi, one, &mut out);
        if g_over_omega != 0.0 {
            let mut tmp = vec![zero; psi.len()];
            ops.x.left_mul_acc(psi, one, &mut tmp);
            ops.x.right_mul_acc(&tmp, Complex64::new(g_over_omega, 0.0), &mut out);
        }
        out.iter_mut().for_each(|z| *z *= -I);
        out
    };

    let mut tau = 0.0;
    let mut leak = 0.0f64;
    for seg in schedule.segments() {
        seg.validate()?;
        if seg.duration_tau == 0.0 {
            continue;
        }
        let h = ops.hamiltonian(seg.curvature(), 0.0);
        let steps = (seg.duration_tau / dt_tau).ceil() as usize;
        let dt = seg.duration_tau / steps as f64;
        for _ in 0..steps {
            let k1 = apply_h(&h, &psi);
            let k2 = apply_h(&h, &axpy(&psi, 0.5 * dt, &k1));
            let k3 = apply_h(&h, &axpy(&psi, 0.5 * dt, &k2));
            let k4 = apply_h(&h, &axpy(&psi, dt, &k3));
            for i in 0..psi.len() {
                psi[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            tau += dt;
            let top = top_band(n);
            let mut pop = 0.0;
            for j in 0..n {
                for i in 0..n {
                    if i >= top || j >= top {
                        pop += psi[i + j * n].norm_sqr();
                    }
                }
            }
            leak = leak.max(pop);
            if pop > LEAKAGE_LIMIT {
                return Err(Error::Truncation {
                    dim: n,
                    tau,
                    leakage: pop,
                    limit: LEAKAGE_LIMIT,
                });
            }
        }
    }
    let m = DMatrix::from_vec(n, n, psi);
    let rho1 = &m * m.adjoint();
    let rho1 = FockDensity {
        dim: n,
        leakage: leakage_of(&rho1),
        rho: rho1,
    };
    Ok(TwoModeResult {
        dim: n,
        reduced_purity: purity_fock(&rho1),
        moments1: moments_from_rho(&rho1, &ops)?,
        leakage: leak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Segment;
    use std::f64::consts::PI;

    #[test]
    fn operators_small() {
        let ops = build_operators(2).unwrap();
        assert_eq!(ops.x_op, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert!(build_operators(1).is_err());
    }

    #[test]
    fn canonical_commutator_on_lower_block() {
        let ops = build_operators(12).unwrap();
        let x = ops.x_op.map(|v| Complex64::new(v, 0.0));
        let c = &x * &ops.p_op - &ops.p_op * &x;
        for i in 0..11 {
            assert!((c[(i, i)] - 2.0 * I).norm() < 1e-14);
            for j in 0..11 {
                if i != j {
                    assert!(c[(i, j)].norm() < 1e-14);
                }
            }
        }
        assert_eq!(ops.x2.to_dense()[(0, 0)], 1.0);
    }

    #[test]
    fn banded_products_match_dense() {
        let ops = build_operators(7).unwrap();
        let rho = DMatrix::from_fn(7, 7, |i, j| Complex64::new((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.05));
        let b = ops.hamiltonian(-0.7, 0.3);
        let dense = b.to_dense().map(|v| Complex64::new(v, 0.0));
        let want = &dense * &rho - &rho * &dense;
        let got = DMatrix::from_vec(7, 7, b.commutator(rho.as_slice()));
        assert!((want - got).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-13);
    }

    #[test]
    fn thermal_purity() {
        let rho = FockDensity::thermal(60, 1.0).unwrap();
        assert!((purity_fock(&rho) - 1.0 / 3.0).abs() < 1e-6);
        let ops = build_operators(60).unwrap();
        let m = moments_from_rho(&rho, &ops).unwrap();
        assert!((m.var_x - 3.0).abs() < 1e-6);
    }

    #[test]
    fn maximally_mixed_block() {
        let rho = FockDensity::diagonal(&[0.25; 4]).unwrap();
        assert!((purity_fock(&rho) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn harmonic_period_returns_vacuum() {
        let rho = FockDensity::vacuum(20).unwrap();
        let s: Schedule = [Segment::harmonic(2.0 * PI)].into_iter().collect();
        let out = evolve_master(&rho, &s, &NoiseParams::none(), DEFAULT_DT).unwrap();
        let f = fidelity_pure(&fock_state(20, 0).unwrap(), &out).unwrap();
        assert!(f >= 1.0 - 1e-8);
    }

    #[test]
    fn displaced_vacuum_means() {
        let alpha = Complex64::new(0.4, -0.3);
        let psi = displaced_vacuum(40, alpha).unwrap();
        let rho = FockDensity::pure(&psi).unwrap();
        let m = moments_from_rho(&rho, &build_operators(40).unwrap()).unwrap();
        assert!((m.mean_x - 0.8).abs() < 1e-10);
        assert!((m.mean_p + 0.6).abs() < 1e-10);
        assert!((m.var_x - 1.0).abs() < 1e-10);
    }

    #[test]
    fn too_small_dimension_leaks() {
        // A squeezed vacuum only populates even levels, so the top band needs two.
        let rho = FockDensity::vacuum(20).unwrap();
        let s: Schedule = [Segment::inverted(3.0)].into_iter().collect();
        let err = evolve_master(&rho, &s, &NoiseParams::none(), DEFAULT_DT).unwrap_err();
        assert!(matches!(err, Error::Truncation { dim: 20, .. }));
    }

    #[test]
    fn default_dimension() {
        assert_eq!(default_dim(0.0), 40);
        assert_eq!(default_dim(1.0), (40.0 * 2f64.cosh()).ceil() as usize);
        assert_eq!(default_dim(10.0), MAX_AUTO_DIM);
    }
}
