//! Exact quantum machinery of the driven Λ-system.
//!
//! Basis ordering is {|0⟩, |1⟩, |2⟩} with |2⟩ the decaying excited state.
//! The probe laser couples |0⟩↔|2⟩ with detuning δ, the coupling laser
//! |1⟩↔|2⟩ on resonance, both with Rabi frequency Ω:
//!
//! ```text
//! H = δ|0⟩⟨0| + (Ω/2)(|2⟩⟨0| + |0⟩⟨2|) + (Ω/2)(|2⟩⟨1| + |1⟩⟨2|)
//! ```
//!
//! Spontaneous decay at rate Γ feeds both ground states equally through
//! ĉ₀ = √(Γ/2)|0⟩⟨2| and ĉ₁ = √(Γ/2)|1⟩⟨2|. All quantities are expressed
//! in units of Γ = 1 unless a different `gamma` is supplied.

use ndarray::prelude::*;
use ndarray_linalg::{c64, Eig, Inverse, LeastSquaresSvd, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Degeneracy threshold on the second-smallest singular value of the
/// Liouvillian when solving for the steady state.
pub const NULLSPACE_DEGENERACY_TOL: f64 = 1e-8;

/// Condition-number threshold beyond which the eigendecomposition of the
/// effective Hamiltonian is treated as numerically defective.
pub const DEFECTIVE_COND: f64 = 1e8;

#[derive(Debug, Error)]
pub enum QuantumError {
    /// The Liouvillian nullspace is (numerically) more than one-dimensional,
    /// so no unique steady state exists. The absorbing dark-state projector
    /// is reported as the physically relevant candidate.
    #[error("degenerate steady state: second singular value {second_singular_value:.3e} below threshold")]
    DegenerateSteadyState {
        second_singular_value: f64,
        dark_projector: DensityMatrix,
    },
    /// The restricted Liouvillian solve is rank-deficient; the detuning is
    /// too close to the dark resonance for the scan model.
    #[error("singular Liouvillian solve at detuning {delta}")]
    SingularLiouvillian { delta: f64 },
    /// H_eff is non-diagonalizable at working precision.
    #[error("effective Hamiltonian numerically defective (cond {cond:.3e})")]
    DefectiveMatrix { cond: f64 },
    #[error("linear algebra backend: {0}")]
    Backend(String),
}

impl From<ndarray_linalg::error::LinalgError> for QuantumError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        QuantumError::Backend(e.to_string())
    }
}

/// Physical parameters of the driven Λ-system.
///
/// `rabi` and `detuning` are in units of `gamma`; `gamma` sets the time unit
/// and defaults to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaParams {
    pub rabi: f64,
    pub gamma: f64,
    pub detuning: f64,
}

impl LambdaParams {
    pub fn new(rabi: f64, detuning: f64) -> Self {
        Self { rabi, gamma: 1.0, detuning }
    }

    /// The paper's reference drive strength Ω = 0.1Γ/√2.
    pub fn reference(detuning: f64) -> Self {
        Self::new(0.1 / std::f64::consts::SQRT_2, detuning)
    }

    pub fn with_detuning(self, detuning: f64) -> Self {
        Self { detuning, ..self }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0) {
            return Err(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.rabi > 0.0) {
            return Err(format!("rabi must be positive, got {}", self.rabi));
        }
        Ok(())
    }
}

/// A pure state of the three-level system; possibly unnormalized during
/// non-unitary evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState(pub Array1<c64>);

impl PureState {
    pub fn basis(n: usize) -> Self {
        let mut a = Array1::zeros(3);
        a[n] = c64::new(1.0, 0.0);
        PureState(a)
    }

    /// Dark superposition (|0⟩ - |1⟩)/√2.
    pub fn dark() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PureState(array![c64::new(s, 0.0), c64::new(-s, 0.0), c64::new(0.0, 0.0)])
    }

    /// Bright superposition (|0⟩ + |1⟩)/√2.
    pub fn bright() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PureState(array![c64::new(s, 0.0), c64::new(s, 0.0), c64::new(0.0, 0.0)])
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sq().sqrt();
        PureState(self.0.mapv(|z| z / n))
    }
}

/// A 3×3 density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(pub Array2<c64>);

impl DensityMatrix {
    pub fn pure(state: &PureState) -> Self {
        let mut m = Array2::zeros((3, 3));
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = state.0[i] * state.0[j].conj();
            }
        }
        DensityMatrix(m)
    }

    pub fn trace(&self) -> c64 {
        self.0[(0, 0)] + self.0[(1, 1)] + self.0[(2, 2)]
    }

    pub fn population(&self, n: usize) -> f64 {
        self.0[(n, n)].re
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let mut r = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                r = r.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        r
    }
}

/// H = δ|0⟩⟨0| + (Ω/2)(|2⟩⟨0| + |0⟩⟨2| + |2⟩⟨1| + |1⟩⟨2|).
pub fn hamiltonian(p: &LambdaParams) -> Array2<c64> {
    let mut h = Array2::zeros((3, 3));
    let half = c64::new(0.5 * p.rabi, 0.0);
    h[(0, 0)] = c64::new(p.detuning, 0.0);
    h[(0, 2)] = half;
    h[(2, 0)] = half;
    h[(1, 2)] = half;
    h[(2, 1)] = half;
    h
}

/// Relaxation operators ĉ₀ = √(Γ/2)|0⟩⟨2| and ĉ₁ = √(Γ/2)|1⟩⟨2|.
pub fn jump_operators(gamma: f64) -> (Array2<c64>, Array2<c64>) {
    let amp = c64::new((gamma / 2.0).sqrt(), 0.0);
    let mut c0 = Array2::zeros((3, 3));
    let mut c1 = Array2::zeros((3, 3));
    c0[(0, 2)] = amp;
    c1[(1, 2)] = amp;
    (c0, c1)
}

/// H_eff = H - (i/2) Σᵢ ĉᵢ†ĉᵢ = H - (iΓ/2)|2⟩⟨2|.
pub fn effective_hamiltonian(p: &LambdaParams) -> Array2<c64> {
    let mut h = hamiltonian(p);
    h[(2, 2)] -= c64::new(0.0, 0.5 * p.gamma);
    h
}

// Column-stacking vectorization: vec(ρ)[i + 3j] = ρ[i,j], so that
// vec(AXB) = (Bᵀ ⊗ A) vec(X). This fixes the 9×9 Liouvillian matrix
// bit-for-bit given the basis ordering.
pub(crate) fn vec_col(m: &Array2<c64>) -> Array1<c64> {
    let mut v = Array1::zeros(9);
    for j in 0..3 {
        for i in 0..3 {
            v[i + 3 * j] = m[(i, j)];
        }
    }
    v
}

pub(crate) fn unvec_col(v: &ArrayView1<c64>) -> Array2<c64> {
    let mut m = Array2::zeros((3, 3));
    for j in 0..3 {
        for i in 0..3 {
            m[(i, j)] = v[i + 3 * j];
        }
    }
    m
}

fn kron3(a: &Array2<c64>, b: &Array2<c64>) -> Array2<c64> {
    ndarray::linalg::kron(a, b)
}

/// Matrix representation of L[ρ] = -i[H,ρ] + Σᵢ(ĉᵢρĉᵢ† - ½{ĉᵢ†ĉᵢ, ρ}) on
/// column-stacked ρ.
pub fn liouvillian(p: &LambdaParams) -> Array2<c64> {
    let h = hamiltonian(p);
    let id: Array2<c64> = Array2::eye(3);
    let i = c64::new(0.0, 1.0);
    let mut l = kron3(&id, &h.mapv(|z| -i * z)) + kron3(&h.t().to_owned(), &id.mapv(|z| i * z));
    let (c0, c1) = jump_operators(p.gamma);
    for c in [&c0, &c1] {
        let cdag = c.t().mapv(|z| z.conj());
        let n = cdag.dot(c);
        let half = c64::new(0.5, 0.0);
        l = l + kron3(&c.mapv(|z| z.conj()), c)
            - kron3(&id, &n.mapv(|z| half * z))
            - kron3(&n.t().to_owned(), &id.mapv(|z| half * z));
    }
    l
}

/// Apply the Liouvillian to a density matrix directly (used by tests and by
/// residual checks; avoids building the 9×9 matrix).
pub fn apply_liouvillian(p: &LambdaParams, rho: &DensityMatrix) -> DensityMatrix {
    let l = liouvillian(p);
    let v = l.dot(&vec_col(&rho.0));
    DensityMatrix(unvec_col(&v.view()))
}

/// Steady state from the nullspace of the 9×9 Liouvillian with the trace
/// constraint appended as an extra row (least-squares solve).
///
/// If the second-smallest singular value of L is below
/// [`NULLSPACE_DEGENERACY_TOL`] the nullspace is not one-dimensional at
/// working precision and [`QuantumError::DegenerateSteadyState`] is returned
/// carrying the dark-state projector.
pub fn steady_state(p: &LambdaParams) -> Result<DensityMatrix, QuantumError> {
    let l = liouvillian(p);
    let (_, s, _) = l.svd(false, false)?;
    let second_smallest = s[s.len() - 2];
    if second_smallest < NULLSPACE_DEGENERACY_TOL * p.gamma {
        return Err(QuantumError::DegenerateSteadyState {
            second_singular_value: second_smallest,
            dark_projector: DensityMatrix::pure(&PureState::dark()),
        });
    }
    let mut a: Array2<c64> = Array2::zeros((10, 9));
    a.slice_mut(s![..9, ..]).assign(&l);
    for d in 0..3 {
        a[(9, d + 3 * d)] = c64::new(1.0, 0.0);
    }
    let mut b: Array1<c64> = Array1::zeros(10);
    b[9] = c64::new(1.0, 0.0);
    let sol = a.least_squares(&b)?;
    let rho = unvec_col(&sol.solution.view());
    // symmetrize away the least-squares rounding
    let herm = (&rho + &rho.t().mapv(|z| z.conj())).mapv(|z| 0.5 * z);
    Ok(DensityMatrix(herm))
}

/// Average fluorescence rate R̃(δ) = Σᵢ Tr{ĉᵢ†ĉᵢ ρ_st} = Γ⟨2|ρ_st|2⟩.
pub fn mean_fluorescence_rate(p: &LambdaParams) -> Result<f64, QuantumError> {
    let rho = steady_state(p)?;
    Ok(p.gamma * rho.population(2))
}

/// Glauber correlation machinery for one detection channel, with the
/// spectral decomposition of the Liouvillian cached so that G⁽²⁾ can be
/// evaluated at many delays.
pub struct G2Evaluator {
    eigvals: Array1<c64>,
    vecs: Array2<c64>,
    coeffs: Array1<c64>,
    measure: Array1<c64>,
    channel_rate: f64,
}

impl G2Evaluator {
    pub fn new(p: &LambdaParams, channel: u8) -> Result<Self, QuantumError> {
        let rho = steady_state(p)?;
        let (c0, c1) = jump_operators(p.gamma);
        let c = if channel == 0 { c0 } else { c1 };
        let cdag = c.t().mapv(|z| z.conj());
        let n = cdag.dot(&c);
        let channel_rate = (n.dot(&rho.0)).diag().iter().map(|z| z.re).sum::<f64>();
        let x0 = c.dot(&rho.0).dot(&cdag);
        let l = liouvillian(p);
        let (eigvals, vecs) = l.eig()?;
        let inv = vecs.inv()?;
        let coeffs = inv.dot(&vec_col(&x0));
        // Tr{N Y} = vec(Nᵀ) · vec(Y) with the plain (bilinear) dot product
        let measure = vec_col(&n.t().to_owned());
        Ok(Self { eigvals, vecs, coeffs, measure, channel_rate })
    }

    /// Gᵢ⁽²⁾(τ) = Tr{ĉᵢ†ĉᵢ e^{Lτ}[ĉᵢ ρ_st ĉᵢ†]}.
    pub fn g2(&self, tau: f64) -> f64 {
        let evolved: Array1<c64> = Array1::from_iter(
            self.eigvals
                .iter()
                .zip(self.coeffs.iter())
                .map(|(l, a)| a * (l * tau).exp()),
        );
        let y = self.vecs.dot(&evolved);
        self.measure
            .iter()
            .zip(y.iter())
            .map(|(m, v)| (m * v).re)
            .sum()
    }

    /// Stationary channel rate Tr{ĉᵢ†ĉᵢ ρ_st}; G⁽²⁾ decorrelates to its square.
    pub fn channel_rate(&self) -> f64 {
        self.channel_rate
    }
}

/// One-shot Gᵢ⁽²⁾(τ).
pub fn g2_correlation(p: &LambdaParams, channel: u8, tau: f64) -> Result<f64, QuantumError> {
    Ok(G2Evaluator::new(p, channel)?.g2(tau))
}

/// ∫₀^∞ G̃ᵢ⁽²⁾(τ) dτ with G̃ᵢ⁽²⁾ = Gᵢ⁽²⁾ - Tr{ĉᵢ†ĉᵢρ_st}², evaluated by a
/// linear solve on the traceless subspace: L·vec(Y) = -vec(X̃) with
/// X̃ = ĉρ_stĉ† - Tr{ĉ†ĉρ_st}ρ_st, then the integral is Tr{ĉ†ĉ Y}.
pub fn g2_residual_integral(p: &LambdaParams, channel: u8) -> Result<f64, QuantumError> {
    let rho = steady_state(p)?;
    let (c0, c1) = jump_operators(p.gamma);
    let c = if channel == 0 { c0 } else { c1 };
    let cdag = c.t().mapv(|z| z.conj());
    let n = cdag.dot(&c);
    let rate: f64 = (n.dot(&rho.0)).diag().iter().map(|z| z.re).sum();
    let x = c.dot(&rho.0).dot(&cdag) - rho.0.mapv(|z| c64::new(rate, 0.0) * z);

    let l = liouvillian(p);
    let mut a: Array2<c64> = Array2::zeros((10, 9));
    a.slice_mut(s![..9, ..]).assign(&l);
    for d in 0..3 {
        a[(9, d + 3 * d)] = c64::new(1.0, 0.0);
    }
    let mut b: Array1<c64> = Array1::zeros(10);
    let xv = vec_col(&x);
    for i in 0..9 {
        b[i] = -xv[i];
    }
    let sol = a.least_squares(&b)?;
    let resid = (&a.dot(&sol.solution) - &b)
        .iter()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let scale = xv.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if resid > 1e-8 * scale.max(1e-300) {
        return Err(QuantumError::SingularLiouvillian { delta: p.detuning });
    }
    let y = unvec_col(&sol.solution.view());
    Ok((n.dot(&y)).diag().iter().map(|z| z.re).sum())
}

/// Cached eigendecomposition of H_eff for repeated non-unitary propagation
/// at a fixed detuning. Falls back to a scaled Taylor/squaring matrix
/// exponential when the eigenbasis is numerically defective.
pub struct EffectivePropagator {
    h_eff: Array2<c64>,
    repr: PropagatorRepr,
    /// Smallest decay rate -2 Im λ among the eigenmodes, clamped to ≥ 0.
    pub slowest_rate: f64,
}

enum PropagatorRepr {
    Eigen {
        vals: Array1<c64>,
        vecs: Array2<c64>,
        inv: Array2<c64>,
    },
    Defective,
}

impl EffectivePropagator {
    pub fn new(p: &LambdaParams) -> Result<Self, QuantumError> {
        let h_eff = effective_hamiltonian(p);
        let (vals, vecs) = h_eff.eig()?;
        let inv = vecs.inv()?;
        let cond = one_norm(&vecs) * one_norm(&inv);
        let slowest_rate = vals
            .iter()
            .map(|l| (-2.0 * l.im).max(0.0))
            .fold(f64::INFINITY, f64::min);
        let repr = if cond > DEFECTIVE_COND {
            PropagatorRepr::Defective
        } else {
            PropagatorRepr::Eigen { vals, vecs, inv }
        };
        Ok(Self { h_eff, repr, slowest_rate })
    }

    pub fn is_defective(&self) -> bool {
        matches!(self.repr, PropagatorRepr::Defective)
    }

    /// |ψ̃(t)⟩ = e^{-iH_eff t}|ψ(0)⟩, unnormalized.
    pub fn propagate(&self, state: &PureState, t: f64) -> PureState {
        match &self.repr {
            PropagatorRepr::Eigen { vals, vecs, inv } => {
                let a = inv.dot(&state.0);
                let phased = Array1::from_iter(
                    vals.iter()
                        .zip(a.iter())
                        .map(|(l, a)| a * (c64::new(0.0, -1.0) * l * t).exp()),
                );
                PureState(vecs.dot(&phased))
            }
            PropagatorRepr::Defective => {
                let u = expm3(&self.h_eff.mapv(|z| c64::new(0.0, -t) * z));
                PureState(u.dot(&state.0))
            }
        }
    }

    /// Squared norm of the propagated state; decomposition coefficients are
    /// reused across the bisection of the waiting-time equation.
    pub fn norm_sq_at(&self, state: &PureState, t: f64) -> f64 {
        self.propagate(state, t).norm_sq()
    }
}

fn one_norm(m: &Array2<c64>) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Scaled Taylor/squaring exponential for small complex matrices.
pub(crate) fn expm3(a: &Array2<c64>) -> Array2<c64> {
    let norm = one_norm(a);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a.mapv(|z| z / c64::new(2f64.powi(squarings as i32), 0.0));
    let mut result: Array2<c64> = Array2::eye(a.nrows());
    let mut term: Array2<c64> = Array2::eye(a.nrows());
    for k in 1..40 {
        term = term.dot(&scaled).mapv(|z| z / c64::new(k as f64, 0.0));
        result = result + &term;
        if one_norm(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// |ψ̃(t)⟩ = e^{-iH_eff t}|ψ(0)⟩ via the cached eigendecomposition of H_eff.
pub fn propagate_nonunitary(state: &PureState, p: &LambdaParams, t: f64) -> PureState {
    EffectivePropagator::new(p)
        .expect("3x3 eigendecomposition")
        .propagate(state, t)
}
