//! Reproducible batches of independent trajectories.
//!
//! Each ensemble member runs on its own ChaCha substream keyed by
//! (seed, trajectory index), so the results are identical whether the batch
//! runs sequentially or on a rayon pool of any width. The default build is
//! parallel; `--no-default-features` selects the sequential fallback.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::quantum::LambdaParams;
use crate::trajectory::{run_with_checkpoints, CheckpointRun, ProtocolConfig};

/// Per-checkpoint final detunings plus run-level diagnostics for a whole
/// ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub checkpoints: Vec<f64>,
    /// `finals[c][i]` — detuning of trajectory `i` at checkpoint `c`.
    pub finals: Vec<Vec<f64>>,
    /// Longest dwell per trajectory, truncated at the horizon.
    pub longest_dwell: Vec<f64>,
    pub total_events: u64,
    pub total_rng_draws: u64,
}

impl EnsembleResult {
    fn assemble(checkpoints: &[f64], runs: Vec<CheckpointRun>) -> Self {
        let n = runs.len();
        let mut finals = vec![vec![0.0f64; n]; checkpoints.len()];
        let mut longest_dwell = Vec::with_capacity(n);
        let mut total_events = 0u64;
        let mut total_rng_draws = 0u64;
        for (i, run) in runs.into_iter().enumerate() {
            for (c, v) in run.finals.iter().enumerate() {
                finals[c][i] = *v;
            }
            longest_dwell.push(run.longest_dwell);
            total_events += run.n_events;
            total_rng_draws += run.rng_draws;
        }
        EnsembleResult {
            checkpoints: checkpoints.to_vec(),
            finals,
            longest_dwell,
            total_events,
            total_rng_draws,
        }
    }

    /// Final detunings at the horizon (last checkpoint).
    pub fn horizon_finals(&self) -> &[f64] {
        self.finals.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

/// Run `n` trajectories with the default engine for this build
/// (rayon-parallel unless the `parallel` feature is disabled).
pub fn run_ensemble(
    cfg: &ProtocolConfig,
    p: &LambdaParams,
    n: usize,
    checkpoints: &[f64],
) -> EnsembleResult {
    #[cfg(feature = "parallel")]
    {
        run_ensemble_parallel(cfg, p, n, checkpoints)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_ensemble_sequential(cfg, p, n, checkpoints)
    }
}

/// Sequential reference implementation; always available, used by the bench
/// suite as the baseline.
pub fn run_ensemble_sequential(
    cfg: &ProtocolConfig,
    p: &LambdaParams,
    n: usize,
    checkpoints: &[f64],
) -> EnsembleResult {
    let runs: Vec<CheckpointRun> = (0..n as u64)
        .map(|i| run_with_checkpoints(cfg, p, checkpoints, i, false))
        .collect();
    EnsembleResult::assemble(checkpoints, runs)
}

/// Work-stealing parallel runner; results are indexed by trajectory, not by
/// worker, so the output is independent of the pool width.
#[cfg(feature = "parallel")]
pub fn run_ensemble_parallel(
    cfg: &ProtocolConfig,
    p: &LambdaParams,
    n: usize,
    checkpoints: &[f64],
) -> EnsembleResult {
    let runs: Vec<CheckpointRun> = (0..n as u64)
        .into_par_iter()
        .map(|i| run_with_checkpoints(cfg, p, checkpoints, i, false))
        .collect();
    EnsembleResult::assemble(checkpoints, runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Mode;

    fn cfg() -> ProtocolConfig {
        ProtocolConfig {
            delta_max: 0.1,
            horizon: 1e5,
            mode: Mode::RateModel,
            seed: 99,
            initial_detuning: None,
        }
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let p = LambdaParams::reference(0.0);
        let cks = [5e4, 1e5];
        let seq = run_ensemble_sequential(&cfg(), &p, 64, &cks);
        let par = run_ensemble(&cfg(), &p, 64, &cks);
        assert_eq!(seq.total_events, par.total_events);
        for (a, b) in seq.finals.iter().zip(&par.finals) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn pool_width_does_not_change_results() {
        let p = LambdaParams::reference(0.0);
        let cks = [1e5];
        let wide = run_ensemble(&cfg(), &p, 48, &cks);
        let narrow = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_ensemble(&cfg(), &p, 48, &cks));
        for (x, y) in wide.finals[0].iter().zip(&narrow.finals[0]) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
