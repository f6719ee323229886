//! Coherence-time sweeps over inverse temperature and lattice size.
//!
//! Every trial starts in the vacuum and evolves under the full Davies
//! dynamics. At geometric checkpoints `t₀ rⁱ` the current syndrome is decoded
//! without touching the trajectory, so `p(t)` is measured on one evolving
//! ensemble. `τ` is the first time `p` drops below the threshold,
//! interpolated linearly in `ln t` between the bracketing checkpoints.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{quantile_sorted, wilson_interval};
use super::LatticeFamily;
use crate::decoder::HdrgDecoder;
use crate::energy::MassVector;
use crate::error::{Error, Result};
use crate::kmc::{splitmix, trial_rng, Checkpoint, Dynamics, Mode, Trajectory};
use crate::lattice::{ErrorState, Lattice};

/// Normal quantile used for Wilson intervals.
pub const WILSON_Z: f64 = 1.96;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceConfig {
    pub family: LatticeFamily,
    pub masses: Vec<f64>,
    pub betas: Vec<f64>,
    pub sizes: Vec<usize>,
    pub trials: usize,
    /// Recovery threshold `p*`.
    pub threshold: f64,
    /// First checkpoint time.
    pub t0: f64,
    /// Checkpoint growth ratio.
    pub ratio: f64,
    pub max_time: f64,
    /// Bootstrap resamples for the `τ` interval.
    pub bootstrap: usize,
    /// Stop a sweep point once `p` is this many binomial standard errors
    /// below the threshold.
    pub stop_margin: f64,
    pub seed: u64,
    pub decoder: HdrgDecoder,
}

impl CoherenceConfig {
    pub fn new(family: LatticeFamily, masses: Vec<f64>, betas: Vec<f64>, sizes: Vec<usize>) -> Self {
        Self {
            family,
            masses,
            betas,
            sizes,
            trials: 40_000,
            threshold: 0.99,
            t0: 1.0,
            ratio: 1.3,
            max_time: 1e6,
            bootstrap: 1000,
            stop_margin: 5.0,
            seed: 1,
            decoder: HdrgDecoder::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} must lie in (0, 1)", self.threshold));
        }
        if self.trials < 100 {
            return bad(format!("trials = {} must be at least 100", self.trials));
        }
        if !(self.ratio > 1.0) || !self.ratio.is_finite() {
            return bad(format!("checkpoint ratio {} must exceed 1", self.ratio));
        }
        if !(self.t0 > 0.0) || !(self.max_time >= self.t0) || !self.max_time.is_finite() {
            return bad(format!(
                "need 0 < t0 <= max_time, got t0 = {}, max_time = {}",
                self.t0, self.max_time
            ));
        }
        if self.betas.is_empty() || self.sizes.is_empty() {
            return bad("beta and size lists must be nonempty".into());
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b > 0.0) || !b.is_finite()) {
            return bad(format!("beta = {b} must be positive"));
        }
        if !(self.stop_margin >= 0.0) {
            return bad(format!("stop margin {} must be nonnegative", self.stop_margin));
        }
        if self.decoder.cutoff_divisor == 0 {
            return bad("decoder cutoff divisor must be positive".into());
        }
        MassVector::new(&self.masses)?.check_modulus(self.family.n)?;
        for &l in &self.sizes {
            Lattice::build(self.family.spec(l))?;
        }
        Ok(())
    }

    pub fn checkpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut i = 0;
        loop {
            let t = self.t0 * self.ratio.powi(i);
            if t > self.max_time * (1.0 + 1e-12) {
                break;
            }
            out.push(t);
            i += 1;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub successes: usize,
    pub n_trials: usize,
    pub p: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

/// Coherence time, or the reason it could not be bracketed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TauBound {
    Estimate { tau: f64 },
    /// `p` was already below the threshold at the first checkpoint.
    BelowFirstCheckpoint { t0: f64 },
    /// `p` never dropped below the threshold.
    AboveMaxTime { t_max: f64 },
}

impl TauBound {
    pub fn value(self) -> Option<f64> {
        match self {
            TauBound::Estimate { tau } => Some(tau),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceEstimate {
    pub tau: TauBound,
    /// 95% percentile bootstrap interval.
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Bootstrap standard deviation of `τ`.
    pub std_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherencePoint {
    pub beta: f64,
    pub l: usize,
    pub curve: Vec<CurvePoint>,
    pub estimate: CoherenceEstimate,
    /// Checkpoints where `p` rose by more than three Wilson half-widths.
    pub monotonicity_flags: Vec<f64>,
}

/// First threshold crossing of a sampled `p(t)` curve.
pub fn first_crossing(times: &[f64], p: &[f64], threshold: f64) -> TauBound {
    match p.iter().position(|&v| v < threshold) {
        None => TauBound::AboveMaxTime {
            t_max: times.last().copied().unwrap_or(0.0),
        },
        Some(0) => TauBound::BelowFirstCheckpoint { t0: times[0] },
        Some(j) => {
            let (p0, p1) = (p[j - 1], p[j]);
            let frac = (p0 - threshold) / (p0 - p1);
            let (l0, l1) = (times[j - 1].ln(), times[j].ln());
            TauBound::Estimate {
                tau: (l0 + frac * (l1 - l0)).exp().clamp(times[j - 1], times[j]),
            }
        }
    }
}

fn point_key(beta: f64, l: usize) -> u64 {
    splitmix(beta.to_bits() ^ splitmix(l as u64))
}

/// Run one sweep point.
pub fn coherence_point(cfg: &CoherenceConfig, beta: f64, l: usize) -> Result<CoherencePoint> {
    let lat = Lattice::build(cfg.family.spec(l))?;
    let masses = MassVector::new(&cfg.masses)?;
    let dynamics = Dynamics::new(&lat, masses, beta, Mode::Full)?;
    let key = point_key(beta, l);
    let times = cfg.checkpoints();
    let n = cfg.trials;
    let p_stop = cfg.threshold
        - cfg.stop_margin * (cfg.threshold * (1.0 - cfg.threshold) / n as f64).sqrt();

    let mut trials: Vec<Option<Checkpoint<f64>>> = (0..n)
        .map(|i| {
            Some(Checkpoint {
                state: ErrorState::vacuum(&lat),
                time: 0.0,
                events: 0,
                creations: 0,
                rng: trial_rng(cfg.seed, key, i as u64),
            })
        })
        .collect();
    // outcomes[j][i]: trial i recovered at checkpoint j
    let mut outcomes: Vec<Vec<bool>> = Vec::new();
    let mut curve = Vec::new();
    for &t in &times {
        let row: Vec<bool> = trials
            .par_iter_mut()
            .map(|slot| {
                let cp = slot.take().expect("trial checkpoint present");
                let mut traj = Trajectory::resume(&dynamics, cp);
                traj.run_until(t, |_, _| {});
                let ok = cfg.decoder.attempt_recovery(&lat, traj.state()).is_success();
                *slot = Some(traj.checkpoint());
                ok
            })
            .collect();
        let successes = row.iter().filter(|&&b| b).count();
        let p = successes as f64 / n as f64;
        let (wilson_lo, wilson_hi) = wilson_interval(successes, n, WILSON_Z);
        curve.push(CurvePoint {
            t,
            successes,
            n_trials: n,
            p,
            wilson_lo,
            wilson_hi,
        });
        outcomes.push(row);
        if p < p_stop {
            break;
        }
    }

    let used: Vec<f64> = curve.iter().map(|c| c.t).collect();
    let p: Vec<f64> = curve.iter().map(|c| c.p).collect();
    let tau = first_crossing(&used, &p, cfg.threshold);
    let estimate = bootstrap_tau(cfg, key, &used, &outcomes, tau);

    let monotonicity_flags = curve
        .windows(2)
        .filter(|w| w[1].p - w[0].p > 3.0 * 0.5 * (w[1].wilson_hi - w[1].wilson_lo))
        .map(|w| w[1].t)
        .collect::<Vec<_>>();
    for t in &monotonicity_flags {
        log::warn!("p(t) increased beyond 3 Wilson half-widths at t = {t} (beta = {beta}, L = {l})");
    }

    Ok(CoherencePoint {
        beta,
        l,
        curve,
        estimate,
        monotonicity_flags,
    })
}

/// Percentile bootstrap over trials. Resamples that never cross are
/// censored at the last checkpoint, those already below at the first one.
fn bootstrap_tau(
    cfg: &CoherenceConfig,
    key: u64,
    times: &[f64],
    outcomes: &[Vec<bool>],
    tau: TauBound,
) -> CoherenceEstimate {
    let n = cfg.trials;
    if tau.value().is_none() || cfg.bootstrap == 0 {
        return CoherenceEstimate {
            tau,
            ci_lo: f64::NAN,
            ci_hi: f64::NAN,
            std_err: f64::NAN,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(cfg.seed ^ splitmix(key ^ 0xB007)));
    let mut weights = vec![0u32; n];
    let mut samples = Vec::with_capacity(cfg.bootstrap);
    let mut p = vec![0.0; times.len()];
    for _ in 0..cfg.bootstrap {
        weights.iter_mut().for_each(|w| *w = 0);
        for _ in 0..n {
            weights[rng.random_range(0..n)] += 1;
        }
        for (pj, row) in p.iter_mut().zip(outcomes) {
            let s: u64 = row
                .iter()
                .zip(&weights)
                .filter(|(ok, _)| **ok)
                .map(|(_, &w)| w as u64)
                .sum();
            *pj = s as f64 / n as f64;
        }
        let t = match first_crossing(times, &p, cfg.threshold) {
            TauBound::Estimate { tau } => tau,
            TauBound::BelowFirstCheckpoint { t0 } => t0,
            TauBound::AboveMaxTime { t_max } => t_max,
        };
        samples.push(t);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (samples.len().max(2) - 1) as f64;
    samples.sort_by(f64::total_cmp);
    CoherenceEstimate {
        tau,
        ci_lo: quantile_sorted(&samples, 0.025),
        ci_hi: quantile_sorted(&samples, 0.975),
        std_err: var.sqrt(),
    }
}

/// Full sweep over `betas × sizes`, in that order.
pub fn coherence_time(cfg: &CoherenceConfig) -> Result<Vec<CoherencePoint>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for &beta in &cfg.betas {
        for &l in &cfg.sizes {
            out.push(coherence_point(cfg, beta, l)?);
        }
    }
    Ok(out)
}
