//! Stochastic simulation of the random-search protocol.
//!
//! A run alternates waiting times between photodetections with uniform
//! redraws of the probe detuning. Two engines are provided:
//!
//! * `ExactWavefunction` — full quantum-jump unraveling: non-unitary
//!   evolution under H_eff, detection when the squared norm reaches a
//!   uniform random target, collapse to the ground state of the firing
//!   channel;
//! * `RateModel` — statistical engine drawing exponential waits from the
//!   piecewise rate model. Below the dip edge δ_Q the wait branches with
//!   probability ½ between the dark rate R(δ) and the bright companion
//!   rate, mirroring the ≃½ ground-state weights of the exact dynamics
//!   (without the branch the simulated trapped fraction misses the
//!   renewal prediction by ~0.03 at the reference parameters).
//!
//! All randomness flows through a counter-based ChaCha stream keyed by
//! (seed, trajectory index), so ensembles are reproducible regardless of
//! scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::quantum::{EffectivePropagator, LambdaParams, PureState};
use crate::rates::RateModel;

/// Simulation engine selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[serde(rename = "exact")]
    ExactWavefunction,
    #[serde(rename = "rate")]
    RateModel,
}

/// Configuration of a single protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Search half-width δ_max.
    pub delta_max: f64,
    /// Total duration T in units of 1/Γ.
    pub horizon: f64,
    pub mode: Mode,
    pub seed: u64,
    /// Detuning of the first dwell; drawn uniformly when absent.
    #[serde(default)]
    pub initial_detuning: Option<f64>,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.delta_max > 0.0) {
            return Err(format!("delta_max must be positive, got {}", self.delta_max));
        }
        if !(self.horizon > 0.0) {
            return Err(format!("horizon must be positive, got {}", self.horizon));
        }
        if let Some(d0) = self.initial_detuning {
            if d0.abs() > self.delta_max {
                return Err(format!(
                    "initial detuning {d0} outside the search interval ±{}",
                    self.delta_max
                ));
            }
        }
        Ok(())
    }

    fn warn_outside_regime(&self, m: &RateModel) {
        if self.delta_max <= 10.0 * m.delta_q || self.delta_max >= m.delta_l {
            log::warn!(
                "delta_max = {} outside the validated regime delta_q << delta_max < delta_l \
                 ({:.3e}, {:.3e})",
                self.delta_max,
                m.delta_q,
                m.delta_l
            );
        }
    }
}

/// One photodetection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEvent {
    pub time: f64,
    pub channel: u8,
    /// Detuning that was active while waiting for this click.
    pub detuning_before: f64,
}

/// Complete record of one run; the piecewise-constant δ(t) staircase is
/// reconstructible exactly from the events and the final dwell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub config: ProtocolConfig,
    pub params: LambdaParams,
    pub events: Vec<TrajectoryEvent>,
    /// Detuning active at the horizon — the protocol's estimate of the
    /// resonance.
    pub final_detuning: f64,
    /// Number of logical RNG draws consumed (diagnostic).
    pub rng_draws: u64,
}

/// RNG wrapper counting logical draws.
pub struct TrajRng {
    rng: ChaCha8Rng,
    pub draws: u64,
}

impl TrajRng {
    pub fn from_seed_and_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        TrajRng { rng, draws: 0 }
    }

    pub fn unit(&mut self) -> f64 {
        self.draws += 1;
        self.rng.random::<f64>()
    }

    pub fn uniform_symmetric(&mut self, half_width: f64) -> f64 {
        self.draws += 1;
        self.rng.random_range(-half_width..=half_width)
    }

    pub fn coin(&mut self) -> bool {
        self.draws += 1;
        self.rng.random::<bool>()
    }

    /// Exponential wait with the given rate; +∞ when the rate vanishes.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        let u = self.unit();
        if rate <= 0.0 {
            return f64::INFINITY;
        }
        -(1.0 - u).ln() / rate
    }
}

/// Uniform draw on [-δ_max, δ_max].
pub fn draw_detuning(rng: &mut TrajRng, delta_max: f64) -> f64 {
    rng.uniform_symmetric(delta_max)
}

/// Outcome of one waiting-time sample in the exact engine.
#[derive(Debug, Clone)]
pub enum WaitOutcome {
    Click {
        tau: f64,
        channel: u8,
        post_state: PureState,
    },
    /// The squared norm did not reach the detection target before `cap`:
    /// the state is (pseudo-)dark and the dwell is censored at the horizon.
    DarkStateStall { cap: f64 },
}

/// Root of norm²(t) = target by bisection on [0, cap]; `None` when the norm
/// stays above the target over the whole bracket.
///
/// The squared norm is a sum of decaying exponentials, monotone in t, so
/// bisection is unconditionally safe. Relative time tolerance 1e-10.
pub fn solve_wait(
    prop: &EffectivePropagator,
    state: &PureState,
    target: f64,
    cap: f64,
) -> Option<f64> {
    if prop.norm_sq_at(state, cap) > target {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, cap);
    for _ in 0..200 {
        if hi - lo <= 1e-10 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if prop.norm_sq_at(state, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn wait_cap(prop: &EffectivePropagator, gamma: f64) -> f64 {
    1e3 / prop.slowest_rate.max(1e-12 * gamma)
}

/// Exact quantum-jump waiting time from `state`: solves ‖ψ̃(τ)‖² = r for
/// r ~ U(0,1), picks the channel in proportion to ⟨ψ̃|ĉᵢ†ĉᵢ|ψ̃⟩ and collapses
/// to the corresponding ground state.
pub fn sample_waiting_time_exact(
    state: &PureState,
    p: &LambdaParams,
    rng: &mut TrajRng,
) -> WaitOutcome {
    let prop = EffectivePropagator::new(p).expect("3x3 eigendecomposition");
    sample_wait_with_propagator(state, &prop, p.gamma, rng)
}

/// Same as [`sample_waiting_time_exact`] but reusing a cached propagator.
pub fn sample_wait_with_propagator(
    state: &PureState,
    prop: &EffectivePropagator,
    gamma: f64,
    rng: &mut TrajRng,
) -> WaitOutcome {
    let cap = wait_cap(prop, gamma);
    let r = rng.unit();
    match solve_wait(prop, state, r, cap) {
        None => WaitOutcome::DarkStateStall { cap },
        Some(tau) => {
            // both channels measure (Γ/2)|ψ̃₂|² at the click, so the branch
            // ratio is exactly 1/2; ĉᵢ|ψ̃⟩ collapses onto |i⟩
            let channel = rng.coin() as u8;
            WaitOutcome::Click {
                tau,
                channel,
                post_state: PureState::basis(channel as usize),
            }
        }
    }
}

/// Exponential waiting time of the rate model at fixed detuning; +∞ (a
/// censored dwell) where the model rate vanishes.
pub fn sample_waiting_time_rate_model(delta: f64, m: &RateModel, rng: &mut TrajRng) -> f64 {
    rng.exponential(m.rate(delta))
}

/// Result of one run with intermediate checkpoints.
#[derive(Debug, Clone)]
pub struct CheckpointRun {
    /// Detuning active at each requested checkpoint time.
    pub finals: Vec<f64>,
    pub final_detuning: f64,
    pub n_events: u64,
    pub rng_draws: u64,
    /// Longest dwell, truncated at the horizon.
    pub longest_dwell: f64,
    pub events: Option<Vec<TrajectoryEvent>>,
}

/// Run one trajectory, recording the detuning at each checkpoint time.
///
/// `checkpoints` must be sorted ascending and lie in (0, horizon]. The RNG
/// substream is keyed by (config seed, `stream`), so ensemble members are
/// independent and reproducible.
pub fn run_with_checkpoints(
    cfg: &ProtocolConfig,
    p: &LambdaParams,
    checkpoints: &[f64],
    stream: u64,
    record_events: bool,
) -> CheckpointRun {
    debug_assert!(checkpoints.windows(2).all(|w| w[0] <= w[1]));
    let m = RateModel::for_params(p);
    if stream == 0 {
        cfg.warn_outside_regime(&m);
    }
    let mut rng = TrajRng::from_seed_and_stream(cfg.seed, stream);
    let mut delta = match cfg.initial_detuning {
        Some(d0) => d0,
        None => draw_detuning(&mut rng, cfg.delta_max),
    };
    let mut t = 0.0f64;
    let mut finals = vec![f64::NAN; checkpoints.len()];
    let mut ck = 0usize;
    let mut events = record_events.then(Vec::new);
    let mut n_events = 0u64;
    let mut longest = 0.0f64;

    // exact engine state between clicks
    let mut state = PureState::basis(0);

    loop {
        let (tau, channel, post_state) = match cfg.mode {
            Mode::RateModel => {
                // branch between the ground-state decay modes inside the dip
                let rate = if delta.abs() < m.delta_q {
                    if rng.coin() {
                        m.rate(delta)
                    } else {
                        m.bright_rate(delta)
                    }
                } else {
                    m.rate(delta)
                };
                let tau = rng.exponential(rate);
                let channel = rng.coin() as u8;
                (tau, channel, None)
            }
            Mode::ExactWavefunction => {
                let prop = EffectivePropagator::new(&p.with_detuning(delta))
                    .expect("3x3 eigendecomposition");
                match sample_wait_with_propagator(&state, &prop, p.gamma, &mut rng) {
                    WaitOutcome::Click { tau, channel, post_state } => {
                        (tau, channel, Some(post_state))
                    }
                    WaitOutcome::DarkStateStall { .. } => (f64::INFINITY, 0, None),
                }
            }
        };

        let t_next = t + tau;
        while ck < checkpoints.len() && checkpoints[ck] <= t_next {
            finals[ck] = delta;
            ck += 1;
        }
        if t_next >= cfg.horizon || !t_next.is_finite() {
            longest = longest.max(cfg.horizon - t);
            while ck < checkpoints.len() {
                finals[ck] = delta;
                ck += 1;
            }
            return CheckpointRun {
                finals,
                final_detuning: delta,
                n_events,
                rng_draws: rng.draws,
                longest_dwell: longest,
                events,
            };
        }

        longest = longest.max(tau);
        n_events += 1;
        if let Some(ev) = events.as_mut() {
            ev.push(TrajectoryEvent { time: t_next, channel, detuning_before: delta });
        }
        t = t_next;
        delta = draw_detuning(&mut rng, cfg.delta_max);
        if let Some(s) = post_state {
            state = s;
        }
    }
}

/// Run one trajectory to the horizon, keeping the full event record.
pub fn run_trajectory(cfg: &ProtocolConfig, p: &LambdaParams) -> TrajectoryRecord {
    run_trajectory_indexed(cfg, p, 0)
}

/// Same as [`run_trajectory`] for ensemble member `index` (RNG substream).
pub fn run_trajectory_indexed(cfg: &ProtocolConfig, p: &LambdaParams, index: u64) -> TrajectoryRecord {
    let run = run_with_checkpoints(cfg, p, &[], index, true);
    TrajectoryRecord {
        config: *cfg,
        params: *p,
        events: run.events.unwrap_or_default(),
        final_detuning: run.final_detuning,
        rng_draws: run.rng_draws,
    }
}

impl TrajectoryRecord {
    /// Line-oriented serialization: a one-line JSON header with the config
    /// and parameters, one CSV line `time,channel,detuning_before` per
    /// event, and a trailing `final,<T>,<delta_final>` line.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        let header = serde_json::json!({ "config": self.config, "params": self.params });
        out.push_str(&header.to_string());
        out.push('\n');
        for ev in &self.events {
            out.push_str(&format!("{},{},{}\n", ev.time, ev.channel, ev.detuning_before));
        }
        out.push_str(&format!("final,{},{}\n", self.config.horizon, self.final_detuning));
        out
    }

    pub fn from_lines(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let header: serde_json::Value = serde_json::from_str(lines.next().ok_or("empty record")?)
            .map_err(|e| format!("bad header: {e}"))?;
        let config: ProtocolConfig = serde_json::from_value(header["config"].clone())
            .map_err(|e| format!("bad config: {e}"))?;
        let params: LambdaParams = serde_json::from_value(header["params"].clone())
            .map_err(|e| format!("bad params: {e}"))?;
        let mut events = Vec::new();
        let mut final_detuning = f64::NAN;
        for line in lines {
            let mut parts = line.split(',');
            let first = parts.next().ok_or("empty line")?;
            if first == "final" {
                let _t: f64 = parts.next().ok_or("missing T")?.parse().map_err(|e| format!("{e}"))?;
                final_detuning = parts.next().ok_or("missing final delta")?.parse().map_err(|e| format!("{e}"))?;
            } else {
                let time: f64 = first.parse().map_err(|e| format!("{e}"))?;
                let channel: u8 = parts.next().ok_or("missing channel")?.parse().map_err(|e| format!("{e}"))?;
                let detuning_before: f64 =
                    parts.next().ok_or("missing detuning")?.parse().map_err(|e| format!("{e}"))?;
                events.push(TrajectoryEvent { time, channel, detuning_before });
            }
        }
        Ok(TrajectoryRecord { config, params, events, final_detuning, rng_draws: 0 })
    }

    /// Longest dwell between consecutive detections, truncated at the horizon.
    pub fn longest_dwell(&self) -> f64 {
        let mut longest = 0.0f64;
        let mut prev = 0.0f64;
        for ev in &self.events {
            longest = longest.max(ev.time - prev);
            prev = ev.time;
        }
        longest.max(self.config.horizon - prev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_cfg(mode: Mode) -> ProtocolConfig {
        ProtocolConfig {
            delta_max: 0.1,
            horizon: 1e5,
            mode,
            seed: 7,
            initial_detuning: None,
        }
    }

    #[test]
    fn detuning_draws_are_uniform_and_deterministic() {
        let mut rng = TrajRng::from_seed_and_stream(1, 0);
        let n = 1_000_000usize;
        let dmax = 0.1;
        let mut sum = 0.0;
        let mut draws = Vec::with_capacity(n);
        for _ in 0..n {
            let d = draw_detuning(&mut rng, dmax);
            assert!(d.abs() <= dmax);
            sum += d;
            draws.push(d);
        }
        let sigma = dmax / (3.0 * n as f64).sqrt();
        assert!(sum.abs() / n as f64 <= 4.0 * sigma, "mean off: {}", sum / n as f64);

        // KS against the uniform CDF at the 1% level
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks = 0.0f64;
        for (i, d) in draws.iter().enumerate() {
            let cdf = (d + dmax) / (2.0 * dmax);
            let emp_hi = (i + 1) as f64 / n as f64;
            let emp_lo = i as f64 / n as f64;
            ks = ks.max((cdf - emp_lo).abs()).max((cdf - emp_hi).abs());
        }
        assert!(ks < 1.628 / (n as f64).sqrt(), "KS = {ks}");

        // identical sequence under the same seed
        let mut a = TrajRng::from_seed_and_stream(42, 3);
        let mut b = TrajRng::from_seed_and_stream(42, 3);
        for _ in 0..1000 {
            assert_eq!(a.unit().to_bits(), b.unit().to_bits());
        }
    }

    #[test]
    fn rate_model_wait_at_zero_detuning_is_censored() {
        let m = RateModel::characteristic_params(0.1 / std::f64::consts::SQRT_2, 1.0);
        let mut rng = TrajRng::from_seed_and_stream(3, 0);
        assert!(sample_waiting_time_rate_model(0.0, &m, &mut rng).is_infinite());
    }

    #[test]
    fn rate_model_wait_moments() {
        let m = RateModel::characteristic_params(0.1 / std::f64::consts::SQRT_2, 1.0);
        let mut rng = TrajRng::from_seed_and_stream(11, 0);
        let n = 100_000;
        let mut taus: Vec<f64> = (0..n)
            .map(|_| sample_waiting_time_rate_model(m.delta_q, &m, &mut rng))
            .collect();
        let mean = taus.iter().sum::<f64>() / n as f64;
        assert!((mean / m.tau0 - 1.0).abs() < 0.02, "mean = {mean}");
        taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = taus[n / 2];
        assert!((median / mean - std::f64::consts::LN_2).abs() < 0.02 * std::f64::consts::LN_2);
    }

    #[test]
    fn exact_wait_dark_state_stalls() {
        let p = LambdaParams::reference(0.0);
        let mut rng = TrajRng::from_seed_and_stream(5, 0);
        for _ in 0..20 {
            match sample_waiting_time_exact(&PureState::dark(), &p, &mut rng) {
                WaitOutcome::DarkStateStall { .. } => {}
                WaitOutcome::Click { .. } => panic!("dark state must never click at resonance"),
            }
        }
    }

    #[test]
    fn exact_wait_bare_decay_is_unit_exponential() {
        // Ω→0 from |2>: τ ~ Exp(Γ); KS at the 1% level on 1e5 samples
        let p = LambdaParams { rabi: 1e-300, gamma: 1.0, detuning: 0.0 };
        let mut rng = TrajRng::from_seed_and_stream(17, 0);
        let n = 100_000;
        let mut taus: Vec<f64> = (0..n)
            .map(|_| match sample_waiting_time_exact(&PureState::basis(2), &p, &mut rng) {
                WaitOutcome::Click { tau, .. } => tau,
                WaitOutcome::DarkStateStall { .. } => panic!("bare decay cannot stall"),
            })
            .collect();
        taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks = 0.0f64;
        for (i, t) in taus.iter().enumerate() {
            let cdf = 1.0 - (-t).exp();
            ks = ks
                .max((cdf - i as f64 / n as f64).abs())
                .max((cdf - (i + 1) as f64 / n as f64).abs());
        }
        assert!(ks < 1.628 / (n as f64).sqrt(), "KS = {ks}");
    }

    #[test]
    fn exact_wait_from_dark_state_matches_ground_rate() {
        // pseudo-dark dwell at δ = 0.05: mean within 5% of 1/Γ₋
        let p = LambdaParams::reference(0.05);
        let g = crate::rates::exact_ground_rates(&p).unwrap();
        let mut rng = TrajRng::from_seed_and_stream(23, 0);
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|_| match sample_waiting_time_exact(&PureState::dark(), &p, &mut rng) {
                WaitOutcome::Click { tau, .. } => tau,
                WaitOutcome::DarkStateStall { cap } => cap,
            })
            .sum::<f64>()
            / n as f64;
        let expect = 1.0 / g.gamma_minus;
        assert!((mean / expect - 1.0).abs() < 0.05, "mean = {mean}, 1/Γ₋ = {expect}");
    }

    #[test]
    fn degenerate_search_interval() {
        let mut cfg = reference_cfg(Mode::RateModel);
        cfg.delta_max = 1e-9;
        cfg.horizon = 1e6;
        let p = LambdaParams::reference(0.0);
        let rec = run_trajectory(&cfg, &p);
        assert!(rec.final_detuning.abs() <= 1e-9);
        // the bright branch clicks a geometric handful of times before a
        // dark draw censors the run; compare thousands in a normal run
        assert!(rec.events.len() < 32, "events: {}", rec.events.len());
    }

    #[test]
    fn determinism_and_time_accounting() {
        for mode in [Mode::RateModel, Mode::ExactWavefunction] {
            let mut cfg = reference_cfg(mode);
            cfg.horizon = 2e4;
            let p = LambdaParams::reference(0.0);
            let a = run_trajectory(&cfg, &p);
            let b = run_trajectory(&cfg, &p);
            assert_eq!(a, b, "bit-identical records under a fixed seed");

            // gaps + final partial dwell telescope exactly to the horizon
            let mut prev = 0.0;
            let mut total = 0.0;
            for ev in &a.events {
                assert!(ev.time > prev);
                assert!(ev.detuning_before.abs() <= cfg.delta_max);
                total += ev.time - prev;
                prev = ev.time;
            }
            total += cfg.horizon - prev;
            assert_eq!(total.to_bits(), cfg.horizon.to_bits());
        }
    }

    #[test]
    fn record_round_trips_through_lines() {
        let mut cfg = reference_cfg(Mode::RateModel);
        cfg.horizon = 5e3;
        let p = LambdaParams::reference(0.0);
        let rec = run_trajectory(&cfg, &p);
        let text = rec.to_lines();
        let back = TrajectoryRecord::from_lines(&text).unwrap();
        assert_eq!(back.config, rec.config);
        assert_eq!(back.events, rec.events);
        assert_eq!(back.final_detuning.to_bits(), rec.final_detuning.to_bits());
    }

    #[test]
    fn checkpoints_capture_the_staircase() {
        let mut cfg = reference_cfg(Mode::RateModel);
        cfg.horizon = 1e5;
        let p = LambdaParams::reference(0.0);
        let cks = [1e3, 1e4, 5e4, 1e5];
        let run = run_with_checkpoints(&cfg, &p, &cks, 0, true);
        assert_eq!(run.finals.len(), cks.len());
        // the last checkpoint coincides with the horizon
        assert_eq!(run.finals[3].to_bits(), run.final_detuning.to_bits());
        // each checkpointed detuning matches the staircase rebuilt from events
        let events = run.events.unwrap();
        for (ck, &d) in cks.iter().zip(&run.finals) {
            let mut active = events
                .iter()
                .find(|ev| ev.time >= *ck)
                .map(|ev| ev.detuning_before);
            if active.is_none() {
                active = Some(run.final_detuning);
            }
            assert_eq!(active.unwrap().to_bits(), d.to_bits(), "checkpoint {ck}");
        }
    }
}
