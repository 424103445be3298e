//! Lévy/renewal statistics of the random search: closed-form predictions and
//! the estimators that confront them with simulated ensembles.
//!
//! Entries into the pseudo-dark window |δ| ≤ δ_PDS produce trapping times
//! with the heavy tail P_t(τ) ≃ μτ_b^μ/τ^{1+μ} (μ = 1/2 for the quadratic
//! dip), while recycling excursions have the finite mean ⟨τ_r⟩ = τ₀δ_max/δ_PDS.
//! The competition yields the trapped fraction f_E(T), the shrinking
//! detuning scale δ_T = δ_Q(τ₀/T)^μ and the self-similar detuning
//! distribution P(δ,T) = h(T)·G(δ/δ_T).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::quadrature::adaptive_simpson;
use crate::rates::RateModel;
use crate::special::dawson;

#[derive(Debug, Error)]
pub enum LevyError {
    #[error("asymptotic tail requested at tau = {tau} below the scale tau_b = {tau_b}")]
    AsymptoticDomain { tau: f64, tau_b: f64 },
    #[error("trapped-fraction correction {correction} >= 1; horizon outside the formula's validity")]
    FormulaDomain { correction: f64 },
    #[error("tail exponent mu = {mu} outside (0, 1)")]
    InvalidExponent { mu: f64 },
    #[error("empty ensemble")]
    EmptyEnsemble,
}

/// Tail and scale parameters of the trapping/recycling renewal process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyParams {
    /// Tail exponent; 1/2 for the quadratic dip.
    pub mu: f64,
    /// Trapping-tail scale τ_b = τ₀·π·(δ_Q/δ_PDS)²/16.
    pub tau_b: f64,
    /// Mean recycling time ⟨τ_r⟩ = τ₀·δ_max/δ_PDS.
    pub mean_recycle: f64,
    /// Pseudo-dark window half-width.
    pub delta_pds: f64,
    /// Waiting time at the window edge, 1/R(δ_PDS) with the quadratic dip
    /// law extended across the window (the trapping analysis never sees the
    /// plateau).
    pub tau_pds: f64,
}

/// Tail parameters of Eq.-style trapping statistics for a pseudo-dark window
/// of half-width `delta_pds` searched over ±`delta_max`.
pub fn trapping_tail_params(m: &RateModel, delta_pds: f64, delta_max: f64) -> LevyParams {
    LevyParams {
        mu: 0.5,
        tau_b: m.tau0 * std::f64::consts::PI * (m.delta_q / delta_pds).powi(2) / 16.0,
        mean_recycle: mean_recycling_time(m.tau0, delta_max, delta_pds),
        delta_pds,
        tau_pds: m.quadratic_waiting_time(delta_pds),
    }
}

/// Asymptotic trapping-time density μτ_b^μ/τ^{1+μ}, valid for τ ≥ τ_b.
pub fn trapping_pdf_tail(tau: f64, lp: &LevyParams) -> Result<f64, LevyError> {
    if tau < lp.tau_b {
        return Err(LevyError::AsymptoticDomain { tau, tau_b: lp.tau_b });
    }
    Ok(lp.mu * lp.tau_b.powf(lp.mu) / tau.powf(1.0 + lp.mu))
}

/// ⟨τ_r⟩ = τ₀·δ_max/δ_PDS: geometric number of plateau steps until the
/// uniform redraw lands in the window.
pub fn mean_recycling_time(tau0: f64, delta_max: f64, delta_pds: f64) -> f64 {
    tau0 * delta_max / delta_pds
}

/// Discrete-Laplace transform of the first-return distribution,
/// L_d P₁(s) = L_d P_trap(s)/(1 + L_d P_trap(s)) with constant trapping
/// probability per click.
pub fn first_return_transform(p_trap: f64, s: f64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    let es = (-s).exp();
    let lp_trap = p_trap * es / (1.0 - es);
    lp_trap / (1.0 + lp_trap)
}

/// Complex-argument version used by transform-inversion oracles.
pub fn first_return_transform_z(p_trap: f64, s: num_complex::Complex64) -> num_complex::Complex64 {
    if s.norm() < 1e-14 {
        // Σ_n P₁(n) = 1
        return num_complex::Complex64::new(1.0, 0.0);
    }
    let es = (-s).exp();
    let lp_trap = es * p_trap / (num_complex::Complex64::new(1.0, 0.0) - es);
    lp_trap / (num_complex::Complex64::new(1.0, 0.0) + lp_trap)
}

/// Ensemble-averaged trapped fraction
/// f_E(T) = 1 - (sin(πμ)/π)·⟨τ_r⟩/(τ_b^μ·T^{1-μ}).
pub fn ensemble_trapped_fraction(horizon: f64, lp: &LevyParams) -> Result<f64, LevyError> {
    let correction = (std::f64::consts::PI * lp.mu).sin() / std::f64::consts::PI
        * lp.mean_recycle
        / (lp.tau_b.powf(lp.mu) * horizon.powf(1.0 - lp.mu));
    if correction >= 1.0 {
        return Err(LevyError::FormulaDomain { correction });
    }
    if horizon < 10.0 * lp.tau_b.max(lp.mean_recycle) {
        log::warn!(
            "trapped-fraction formula evaluated at horizon {horizon} close to its scales \
             (tau_b = {}, mean_recycle = {})",
            lp.tau_b,
            lp.mean_recycle
        );
    }
    Ok(1.0 - correction)
}

/// One sample of the time-averaged trapped fraction, clamped to [0, 1].
#[derive(Debug, Clone, Copy)]
pub struct TimeAvgSample {
    pub value: f64,
    pub clamped: bool,
}

/// f_T(T) = 1 - ξ·(⟨τ_r⟩/τ_b^μ)·T^{μ-1} with ξ drawn from the completely
/// asymmetric stable law; the Lévy increment keeps the time average
/// fluctuating at arbitrarily late times.
pub fn sample_time_avg_trapped_fraction<R: Rng + ?Sized>(
    horizon: f64,
    lp: &LevyParams,
    rng: &mut R,
) -> TimeAvgSample {
    let xi = if (lp.mu - 0.5).abs() < 1e-12 {
        sample_levy_half(rng)
    } else {
        sample_stable_one_sided(lp.mu, rng).expect("mu validated on construction")
    };
    let raw = 1.0 - xi * lp.mean_recycle / lp.tau_b.powf(lp.mu) * horizon.powf(lp.mu - 1.0);
    let value = raw.clamp(0.0, 1.0);
    TimeAvgSample { value, clamped: value != raw }
}

/// ξ for μ = 1/2 in closed form: ξ = (π/2)/Z², Z standard normal.
///
/// The scale π/2 makes the Laplace transform E[e^{-uξ}] = e^{-Γ(1/2)·u^{1/2}},
/// matching the small-s expansion L P_t(s) ≃ 1 - Γ(1-μ)(sτ_b)^μ of the
/// trapping sum; the CLT oracle in the test suite pins this convention.
pub fn sample_levy_half<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    std::f64::consts::FRAC_PI_2 / (z * z)
}

/// One-sided stable increment for general μ ∈ (0,1) via the
/// Chambers–Mallows–Stuck/Kanter construction, normalized to the same
/// transform convention as [`sample_levy_half`].
pub fn sample_stable_one_sided<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> Result<f64, LevyError> {
    if !(0.0 < mu && mu < 1.0) {
        return Err(LevyError::InvalidExponent { mu });
    }
    let u: f64 = rng.random::<f64>() * std::f64::consts::PI;
    let e: f64 = -(1.0 - rng.random::<f64>()).ln();
    // X with E[e^{-sX}] = e^{-s^mu}
    let a = ((mu * u).sin().powf(mu) * ((1.0 - mu) * u).sin().powf(1.0 - mu) / u.sin())
        .powf(1.0 / (1.0 - mu));
    let x = (a / e).powf((1.0 - mu) / mu);
    Ok(gamma(1.0 - mu).powf(1.0 / mu) * x)
}

/// Pareto trapping-time sampler with survival (τ_b/t)^μ for t ≥ τ_b.
pub fn sample_pareto<R: Rng + ?Sized>(mu: f64, tau_b: f64, rng: &mut R) -> f64 {
    tau_b * (1.0 - rng.random::<f64>()).powf(-1.0 / mu)
}

/// Least-squares fit of log(median T_N) against log N.
#[derive(Debug, Clone, Serialize)]
pub struct CltFit {
    pub slope: f64,
    pub stderr: f64,
    pub medians: Vec<(usize, f64)>,
}

/// Generalized-CLT scaling check: medians of Pareto sums T_N over `reps`
/// repetitions, fitted on a log-log grid of N. Slope 1/μ for μ < 1, slope 1
/// for μ > 1 (finite mean).
pub fn generalized_clt_check<R: Rng + ?Sized>(
    mu: f64,
    tau_b: f64,
    ns: &[usize],
    reps: usize,
    rng: &mut R,
) -> CltFit {
    let mut medians = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut sums: Vec<f64> = (0..reps)
            .map(|_| (0..n).map(|_| sample_pareto(mu, tau_b, rng)).sum())
            .collect();
        sums.sort_by(|a, b| a.partial_cmp(b).unwrap());
        medians.push((n, sums[reps / 2]));
    }
    let pts: Vec<(f64, f64)> = medians
        .iter()
        .map(|&(n, m)| ((n as f64).ln(), m.ln()))
        .collect();
    let (slope, stderr) = ols_slope(&pts);
    CltFit { slope, stderr, medians }
}

/// OLS slope with its standard error.
pub(crate) fn ols_slope(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    let dof = (pts.len() as f64 - 2.0).max(1.0);
    (slope, (sse / dof / sxx).sqrt())
}

/// Log-log OLS slope of `(x, y)` points; width-scaling fits use this.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    ols_slope(&pts).0
}

/// Characteristic detuning scale δ_T = δ_Q(τ₀/T)^μ, equivalently the
/// detuning where R(δ_T)·T = 1 on the quadratic branch.
pub fn characteristic_width(m: &RateModel, horizon: f64, mu: f64) -> f64 {
    m.delta_q * (m.tau0 / horizon).powf(mu)
}

/// Closed-form height h(T) = (τ_PDS/τ_b)^μ·sin(πμ)/(πμ·δ_T) of the trapped
/// detuning distribution.
///
/// This is the published closed form; its δ-integral overshoots the trapped
/// mass by a constant factor (4 at μ = 1/2), so overlays that must integrate
/// to f_E use [`normalized_height`] instead.
pub fn distribution_height(lp: &LevyParams, delta_t: f64) -> f64 {
    (lp.tau_pds / lp.tau_b).powf(lp.mu) * (std::f64::consts::PI * lp.mu).sin()
        / (std::f64::consts::PI * lp.mu * delta_t)
}

/// Height normalized so that ∫ h·G(δ/δ_T) dδ over the trapped window equals
/// the trapped fraction: h = f_E/(δ_T·∫G).
pub fn normalized_height(trapped_fraction: f64, delta_t: f64, mu: f64) -> f64 {
    trapped_fraction / (delta_t * form_factor_area(mu))
}

/// Form factor G(q) = μ∫₀¹ du·u^{μ-1}·e^{-(1-u)|q|^{1/μ}}; the printed
/// integrand's (1-μ) exponent is a misprint for (1-u) — only the latter
/// reproduces the μ = 1/2 closed form G = D(q)/q and the 1/(2q²) tail, both
/// enforced by the acceptance suite.
pub fn form_factor(q: f64, mu: f64) -> f64 {
    let q = q.abs();
    if (mu - 0.5).abs() < 1e-12 {
        if q < 1e-8 {
            // D(q)/q = 1 - 2q²/3 + O(q⁴)
            return 1.0 - 2.0 * q * q / 3.0;
        }
        return dawson(q) / q;
    }
    form_factor_quadrature(q, mu)
}

/// General-μ evaluation: substituting u = v^{1/μ} removes the endpoint
/// singularity, leaving a smooth integrand for adaptive Simpson.
fn form_factor_quadrature(q: f64, mu: f64) -> f64 {
    let qp = q.powf(1.0 / mu);
    let f = |v: f64| (-(1.0 - v.powf(1.0 / mu)) * qp).exp();
    adaptive_simpson(&f, 0.0, 1.0, 1e-10, 48).map(|v| v.max(0.0)).unwrap_or(0.0)
}

/// Area ∫G(q)dq over the full line; π^{3/2}/2 at μ = 1/2.
pub fn form_factor_area(mu: f64) -> f64 {
    if (mu - 0.5).abs() < 1e-12 {
        return std::f64::consts::PI.powf(1.5) / 2.0;
    }
    // numeric body plus the analytic tail ∫_Q^∞ μ q^{-1/μ} dq
    let big_q = 1e3;
    let body = adaptive_simpson(&|q: f64| form_factor(q, mu), 0.0, big_q, 1e-9, 44)
        .expect("form factor area");
    let tail = mu * big_q.powf(1.0 - 1.0 / mu) / (1.0 / mu - 1.0);
    2.0 * (body + tail)
}

/// Fraction of the trapped distribution within |δ| ≤ δ_T:
/// f_peak = ∫_{-1}^{1} G / ∫ G, T-independent by the scale cancellation.
pub fn peak_fraction(mu: f64) -> Result<f64, LevyError> {
    if !(0.0 < mu && mu < 1.0) {
        return Err(LevyError::InvalidExponent { mu });
    }
    let head =
        adaptive_simpson(&|q: f64| form_factor(q, mu), 0.0, 1.0, 1e-10, 44).expect("peak integral");
    Ok(2.0 * head / form_factor_area(mu))
}

/// Full width at half maximum of G in units of δ_T (bisection on
/// G(q) = G(0)/2 to 1e-8).
pub fn form_factor_fwhm(mu: f64) -> Result<f64, LevyError> {
    if !(0.0 < mu && mu < 1.0) {
        return Err(LevyError::InvalidExponent { mu });
    }
    let target = 0.5 * form_factor(0.0, mu);
    let (mut lo, mut hi) = (1e-6f64, 1e3f64);
    while hi - lo > 1e-8 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if form_factor(mid, mu) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + hi)
}

/// Tabulated form factor of the asymptotic detuning distribution.
#[derive(Debug, Clone, Serialize)]
pub struct FrequencyDistribution {
    pub horizon: f64,
    /// Closed-form height h(T) per unit detuning.
    pub height: f64,
    /// Characteristic width δ_T.
    pub width: f64,
    /// Geometric q-grid over [1e-3, 1e3] with the tabulated G values.
    pub q_grid: Vec<f64>,
    pub g_values: Vec<f64>,
    mu: f64,
}

impl FrequencyDistribution {
    pub fn new(lp: &LevyParams, m: &RateModel, horizon: f64) -> Self {
        let width = characteristic_width(m, horizon, lp.mu);
        let n = 25 * 6 + 1; // 25 nodes per decade over six decades
        let (lo, hi) = (1e-3f64, 1e3f64);
        let step = (hi / lo).powf(1.0 / (n - 1) as f64);
        let mut q_grid = Vec::with_capacity(n);
        let mut g_values = Vec::with_capacity(n);
        let mut q = lo;
        for _ in 0..n {
            q_grid.push(q);
            g_values.push(form_factor(q, lp.mu));
            q *= step;
        }
        FrequencyDistribution {
            horizon,
            height: distribution_height(lp, width),
            width,
            q_grid,
            g_values,
            mu: lp.mu,
        }
    }

    /// G(|q|) by monotone cubic interpolation on the tabulated grid, with the
    /// analytic limits outside it.
    pub fn g(&self, q: f64) -> f64 {
        let q = q.abs();
        let lo = self.q_grid[0];
        let hi = *self.q_grid.last().unwrap();
        if q <= lo {
            return form_factor(q, self.mu);
        }
        if q >= hi {
            return self.mu * q.powf(-1.0 / self.mu);
        }
        // geometric grid: index from log position; Catmull-Rom in
        // (log q, log G) so the power-law tail interpolates near-exactly
        let step = (self.q_grid[1] / self.q_grid[0]).ln();
        let pos = (q / lo).ln() / step;
        let i = (pos.floor() as usize).min(self.q_grid.len() - 2);
        let t = pos - i as f64;
        let p0 = self.g_values[i.saturating_sub(1)].ln();
        let p1 = self.g_values[i].ln();
        let p2 = self.g_values[i + 1].ln();
        let p3 = self.g_values[(i + 2).min(self.g_values.len() - 1)].ln();
        let a = 2.0 * p1;
        let b = p2 - p0;
        let c = 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3;
        let d = -p0 + 3.0 * p1 - 3.0 * p2 + p3;
        (0.5 * (a + b * t + c * t * t + d * t * t * t)).exp()
    }
}

/// Statistics of an ensemble of final detunings at one horizon.
///
/// Serialized as the analysis-interface JSON:
/// `{horizon, f_E_analytic, f_E_simulated ± err, delta_T_analytic,
///   delta_T_fitted, f_peak, histogram}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnsembleSummary {
    pub horizon: f64,
    pub n_trajectories: usize,
    /// f_E(T) from the renewal formula; `None` outside its validity domain.
    pub f_e_analytic: Option<f64>,
    pub f_e_simulated: f64,
    /// Wilson 95% half-width of the simulated trapped fraction.
    pub f_e_err: f64,
    pub delta_t_analytic: f64,
    /// Quantile estimate: the |δ| below which the theoretical peak fraction
    /// of the trapped mass lies.
    pub delta_t_fitted: f64,
    /// Simulated fraction of trapped finals with |δ| ≤ δ_T.
    pub f_peak: f64,
    /// (bin_lo, bin_hi, density) with log-spaced bins mirrored to δ < 0;
    /// integrates to 1 over all finals.
    pub histogram: Vec<(f64, f64, f64)>,
}

/// Wilson 95% interval half-width for `k` successes out of `n`.
fn wilson_half_width(k: usize, n: usize) -> f64 {
    let z = 1.959963984540054f64;
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

/// Summarize final detunings against the Lévy predictions.
///
/// `delta_max` bounds the histogram support; `bins_per_decade` defaults to
/// 25 in the callers.
pub fn summarize_finals(
    finals: &[f64],
    horizon: f64,
    lp: &LevyParams,
    m: &RateModel,
    delta_max: f64,
    bins_per_decade: usize,
) -> Result<EnsembleSummary, LevyError> {
    if finals.is_empty() {
        return Err(LevyError::EmptyEnsemble);
    }
    let n = finals.len();
    let delta_t = characteristic_width(m, horizon, lp.mu);
    let mut trapped: Vec<f64> = finals
        .iter()
        .map(|d| d.abs())
        .filter(|d| *d <= lp.delta_pds)
        .collect();
    trapped.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = trapped.len();
    let f_e_simulated = k as f64 / n as f64;
    let f_peak_theory = peak_fraction(lp.mu)?;
    let delta_t_fitted = if k == 0 {
        0.0
    } else {
        trapped[((f_peak_theory * k as f64) as usize).min(k - 1)]
    };
    let f_peak = if k == 0 {
        0.0
    } else {
        trapped.iter().filter(|d| **d <= delta_t).count() as f64 / k as f64
    };

    // log-spaced |δ| bins mirrored to negative detunings, plus a central bin
    let lo = (delta_t * 1e-2).max(1e-300);
    let hi = delta_max;
    let n_bins = ((hi / lo).log10() * bins_per_decade as f64).ceil().max(1.0) as usize;
    let ratio = (hi / lo).powf(1.0 / n_bins as f64);
    let mut edges = Vec::with_capacity(2 * n_bins + 2);
    for i in (1..=n_bins).rev() {
        edges.push(-lo * ratio.powi(i as i32));
    }
    edges.push(-lo);
    edges.push(lo);
    for i in 1..=n_bins {
        edges.push(lo * ratio.powi(i as i32));
    }
    let mut counts = vec![0usize; edges.len() - 1];
    for d in finals {
        let mut idx = match edges.binary_search_by(|e| e.partial_cmp(d).unwrap()) {
            Ok(i) => i,
            Err(i) => i.wrapping_sub(1),
        };
        if *d <= edges[0] {
            idx = 0;
        }
        if idx >= counts.len() {
            idx = counts.len() - 1;
        }
        counts[idx] += 1;
    }
    let histogram: Vec<(f64, f64, f64)> = counts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (a, b) = (edges[i], edges[i + 1]);
            (a, b, *c as f64 / (n as f64 * (b - a)))
        })
        .collect();

    Ok(EnsembleSummary {
        horizon,
        n_trajectories: n,
        f_e_analytic: ensemble_trapped_fraction(horizon, lp).ok(),
        f_e_simulated,
        f_e_err: wilson_half_width(k, n),
        delta_t_analytic: delta_t,
        delta_t_fitted,
        f_peak,
        histogram,
    })
}

/// [`summarize_finals`] over full trajectory records sharing one config.
pub fn summarize_ensemble(
    records: &[crate::trajectory::TrajectoryRecord],
    lp: &LevyParams,
    m: &RateModel,
    bins_per_decade: usize,
) -> Result<EnsembleSummary, LevyError> {
    let first = records.first().ok_or(LevyError::EmptyEnsemble)?;
    let finals: Vec<f64> = records.iter().map(|r| r.final_detuning).collect();
    summarize_finals(
        &finals,
        first.config.horizon,
        lp,
        m,
        first.config.delta_max,
        bins_per_decade,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_model() -> RateModel {
        RateModel::characteristic_params(0.1 / std::f64::consts::SQRT_2, 1.0)
    }

    fn reference_levy() -> LevyParams {
        trapping_tail_params(&reference_model(), 0.01, 0.1)
    }

    #[test]
    fn tail_params_reference_values() {
        let lp = reference_levy();
        assert!((lp.tau_b - 6.25 * std::f64::consts::PI).abs() < 1e-9);
        assert!((lp.mean_recycle - 2000.0).abs() < 1e-9);
        assert!((lp.tau_pds - 100.0).abs() < 1e-9);
        assert_eq!(lp.mu, 0.5);
    }

    #[test]
    fn tail_params_scaling_in_window_width() {
        let m = reference_model();
        let a = trapping_tail_params(&m, 0.01, 0.1);
        let b = trapping_tail_params(&m, 0.005, 0.1);
        assert!((b.tau_b / a.tau_b - 4.0).abs() < 1e-12);
    }

    #[test]
    fn tail_density_and_survival() {
        let lp = reference_levy();
        let at_scale = trapping_pdf_tail(lp.tau_b, &lp).unwrap();
        assert!((at_scale - lp.mu / lp.tau_b).abs() < 1e-12);
        assert!(matches!(
            trapping_pdf_tail(0.5 * lp.tau_b, &lp),
            Err(LevyError::AsymptoticDomain { .. })
        ));
        // survival integral of the tail: ∫_τ^∞ = (τ_b/τ)^μ
        let tau = 37.0 * lp.tau_b;
        let quad = adaptive_simpson(
            &|t: f64| trapping_pdf_tail(t, &lp).unwrap(),
            tau,
            1e9 * lp.tau_b,
            1e-9,
            60,
        )
        .unwrap();
        assert!((quad - (lp.tau_b / tau).powf(lp.mu)).abs() < 1e-4);
    }

    #[test]
    fn recycling_time_limits() {
        assert!((mean_recycling_time(200.0, 0.1, 0.01) - 2000.0).abs() < 1e-12);
        assert!((mean_recycling_time(200.0, 0.01, 0.01) - 200.0).abs() < 1e-12);
    }

    #[test]
    fn first_return_transform_limits() {
        let p = 0.1;
        // small-s slope -> -1/p
        let h = 1e-7;
        let slope = (first_return_transform(p, h) - 1.0) / h;
        assert!((slope + 1.0 / p).abs() < 1e-3, "slope = {slope}");
        // s large: first return at n=1 dominates with weight p
        let s = 40.0;
        let val = first_return_transform(p, s);
        assert!((val / (p * (-s).exp()) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn first_return_inverts_to_geometric_pmf() {
        // trapezoid inversion of the generating function on the unit circle
        let p = 0.1;
        let m = 512usize;
        for n in 1..=20usize {
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            for k in 0..m {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                let s = num_complex::Complex64::new(0.0, theta);
                let val = first_return_transform_z(p, s);
                acc += val * num_complex::Complex64::from_polar(1.0, -(n as f64) * theta);
            }
            let pmf = acc.re / m as f64;
            let expect = (1.0 - p).powi(n as i32 - 1) * p;
            assert!((pmf - expect).abs() < 1e-10, "n={n}: {pmf} vs {expect}");
        }
    }

    #[test]
    fn trapped_fraction_reference_and_limits() {
        let lp = reference_levy();
        let f = ensemble_trapped_fraction(6e6, &lp).unwrap();
        assert!((f - 0.9413).abs() < 5e-4, "f_E = {f}");
        let huge = ensemble_trapped_fraction(1e18, &lp).unwrap();
        assert!(huge > 0.999999);
        assert!(matches!(
            ensemble_trapped_fraction(1e4, &lp),
            Err(LevyError::FormulaDomain { .. })
        ));
    }

    #[test]
    fn characteristic_width_values() {
        let m = reference_model();
        let w = characteristic_width(&m, 6e6, 0.5);
        assert!((w - 4.0825e-5).abs() < 1e-8, "delta_T = {w}");
        assert!((characteristic_width(&m, m.tau0, 0.5) - m.delta_q).abs() < 1e-15);
        // R(delta_T) * T = 1 on the quadratic branch
        let t = 3.7e5;
        let dt = characteristic_width(&m, t, 0.5);
        assert!((m.rate(dt) * t - 1.0).abs() < 1e-10);
        // scale laws at mu = 1/2
        assert!((characteristic_width(&m, 4.0 * t, 0.5) - dt / 2.0).abs() < 1e-15);
    }

    #[test]
    fn height_reference_and_scaling() {
        let lp = reference_levy();
        let m = reference_model();
        let dt = characteristic_width(&m, 6e6, 0.5);
        let h = distribution_height(&lp, dt);
        assert!((h / 3.52e4 - 1.0).abs() < 2e-3, "h = {h}");
        let h2 = distribution_height(&lp, characteristic_width(&m, 2.0 * 6e6, 0.5));
        assert!((h2 / h - std::f64::consts::SQRT_2).abs() < 1e-9);
        let h4 = distribution_height(&lp, characteristic_width(&m, 4.0 * 6e6, 0.5));
        assert!((h4 / h - 2.0).abs() < 1e-9);
    }

    #[test]
    fn normalized_height_carries_the_trapped_mass() {
        // ∫ h·G over the window = f_E × (share of G inside |q| ≤ δ_PDS/δ_T)
        let lp = reference_levy();
        let m = reference_model();
        let horizon = 6e6;
        let dt = characteristic_width(&m, horizon, 0.5);
        let fe = ensemble_trapped_fraction(horizon, &lp).unwrap();
        let h = normalized_height(fe, dt, 0.5);
        let big_q = lp.delta_pds / dt;
        let body = adaptive_simpson(&|q: f64| form_factor(q, 0.5), 0.0, big_q, 1e-9, 52).unwrap();
        let mass = h * dt * 2.0 * body;
        let share = 2.0 * body / form_factor_area(0.5);
        assert!(mass <= 1.0);
        assert!((mass - fe * share).abs() < 1e-6, "mass = {mass}");
    }

    #[test]
    fn form_factor_identity_and_tails() {
        // dawson route vs the general-μ quadrature route
        let mut q = 1e-3;
        while q <= 50.0 {
            let d = form_factor(q, 0.5);
            let quad = form_factor_quadrature(q, 0.5);
            assert!((d - quad).abs() < 1e-8, "q={q}: {d} vs {quad}");
            q *= 1.6;
        }
        assert!((form_factor(0.0, 0.5) - 1.0).abs() < 1e-12);
        assert!((form_factor(50.0, 0.5) * 2500.0 - 0.5).abs() < 0.01 * 0.5);
        assert!((form_factor(1.0, 0.5) - 0.538079).abs() < 1e-6);
        assert_eq!(form_factor(0.3, 0.5), form_factor(-0.3, 0.5));
    }

    #[test]
    fn form_factor_area_matches_closed_form() {
        let a = form_factor_area(0.5);
        assert!((a - std::f64::consts::PI.powf(1.5) / 2.0).abs() < 1e-12);
        // quadrature route consistency
        let body = adaptive_simpson(&|q: f64| form_factor(q, 0.5), 0.0, 1e3, 1e-9, 48).unwrap();
        let tail = 0.5 * 1e3f64.powf(-1.0) / 1.0;
        assert!((2.0 * (body + tail) - a).abs() < 1e-4 * a);
    }

    #[test]
    fn peak_fraction_reference() {
        let f = peak_fraction(0.5).unwrap();
        assert!((f - 0.59).abs() < 0.01, "f_peak = {f}");
        // known to four digits from the scratch quadrature
        assert!((f - 0.5904).abs() < 5e-4);
    }

    #[test]
    fn fwhm_reference() {
        let w = form_factor_fwhm(0.5).unwrap();
        assert!((w - 2.13).abs() < 0.01, "q_w = {w}");
        let g_half = form_factor(w / 2.0, 0.5);
        assert!((g_half - 0.5).abs() < 1e-7);
    }

    #[test]
    fn frequency_distribution_table() {
        let lp = reference_levy();
        let m = reference_model();
        let fd = FrequencyDistribution::new(&lp, &m, 6e6);
        assert!(fd.g_values.iter().all(|g| *g > 0.0));
        // interpolation against direct evaluation, including even extension
        for q in [2.3e-3, 0.7, 1.0, 13.0, 740.0] {
            let direct = form_factor(q, 0.5);
            assert!((fd.g(q) - direct).abs() < 1e-5 * direct.max(1e-6), "q={q}");
            assert_eq!(fd.g(-q), fd.g(q));
        }
        // outside the table: analytic limits
        assert!((fd.g(1e-4) - 1.0).abs() < 1e-7);
        assert!((fd.g(5e3) - 0.5 / (5e3f64 * 5e3)).abs() < 1e-12);
    }

    #[test]
    fn summary_of_degenerate_ensemble() {
        let lp = reference_levy();
        let m = reference_model();
        let finals = vec![0.0; 128];
        let s = summarize_finals(&finals, 6e6, &lp, &m, 0.1, 25).unwrap();
        assert_eq!(s.f_e_simulated, 1.0);
        assert_eq!(s.delta_t_fitted, 0.0);
        let mass: f64 = s.histogram.iter().map(|(a, b, d)| d * (b - a)).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(matches!(
            summarize_finals(&[], 6e6, &lp, &m, 0.1, 25),
            Err(LevyError::EmptyEnsemble)
        ));
    }

    #[test]
    fn histogram_integrates_to_one() {
        let lp = reference_levy();
        let m = reference_model();
        let mut rng_state = 88172645463325252u64;
        let mut xorshift = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            rng_state as f64 / u64::MAX as f64
        };
        let finals: Vec<f64> = (0..5000).map(|_| (xorshift() - 0.5) * 0.2).collect();
        let s = summarize_finals(&finals, 1e6, &lp, &m, 0.1, 25).unwrap();
        let mass: f64 = s.histogram.iter().map(|(a, b, d)| d * (b - a)).sum();
        assert!((mass - 1.0).abs() < 1e-9, "mass = {mass}");
    }
}
