//! Seeded Monte Carlo evaluation of support recovery.
//!
//! A grid point fixes the sparsity, bit depth, total bit-rate `b * M`,
//! dithering and decoder. Every trial draws a fresh profile, sampling plan
//! and dither from seeds derived from the master seed, so a single trial can
//! be replayed on its own. Seeds depend only on the fields each draw needs:
//! the profile on `(N, K, trial)`, the plan on `(N, M, trial)` and the dither
//! on `(N, K, b, M, trial)`. Decoders and dithering modes sharing those
//! fields therefore see identical scenes.
//!
//! Aggregation keeps integer sums (true positives, and the l2 error in
//! fixed point), so results are bit-identical whatever the worker count or
//! scheduling.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantization::{draw_dither, dynamic_range_for, BitDepth, QuantizerConfig, Sensor};
use crate::recovery::{Algorithm, Decoder, RecoveryConfig};
use crate::seed::{purpose_seed, rng_from_seed, Purpose};
use crate::signal_model::{make_sampling_plan, random_profile, PartialFourier};

pub const MIN_MEAS: usize = 1 << 3;
pub const MAX_MEAS: usize = 1 << 13;

/// Accepts either a single value or a list in configuration files.
#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(deserializer: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(match OneOrMany::deserialize(deserializer)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

fn default_n_bins() -> usize {
    256
}
fn default_bit_depths() -> Vec<BitDepth> {
    vec![BitDepth::Bits(1)]
}
fn default_bitrates() -> Vec<u64> {
    (3..=13).map(|e| 1u64 << e).collect()
}
fn default_dithered() -> Vec<bool> {
    vec![true]
}
fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Pbp]
}
fn default_trials() -> usize {
    2000
}
fn default_mu() -> f64 {
    RecoveryConfig::DEFAULT_STEP
}
fn default_target() -> f64 {
    RecoveryConfig::DEFAULT_TARGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_n_bins")]
    pub n_bins: usize,
    pub sparsities: Vec<usize>,
    #[serde(default = "default_bit_depths")]
    pub bit_depths: Vec<BitDepth>,
    /// Total bits `b * M`.
    #[serde(default = "default_bitrates")]
    pub bitrates: Vec<u64>,
    #[serde(default = "default_dithered", deserialize_with = "one_or_many")]
    pub dithered: Vec<bool>,
    #[serde(default = "default_algorithms", deserialize_with = "one_or_many")]
    pub algorithm: Vec<Algorithm>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_target")]
    pub consistency_target: f64,
    /// Overrides the `max(20, 100 K)` iteration budget.
    #[serde(default)]
    pub max_iters: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(sparsities: Vec<usize>) -> Self {
        Self {
            n_bins: default_n_bins(),
            sparsities,
            bit_depths: default_bit_depths(),
            bitrates: default_bitrates(),
            dithered: default_dithered(),
            algorithm: default_algorithms(),
            trials: default_trials(),
            master_seed: 0,
            mu: default_mu(),
            consistency_target: default_target(),
            max_iters: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_bins == 0 {
            return fail("n_bins: must be at least 1".into());
        }
        if self.sparsities.is_empty() {
            return fail("sparsities: at least one value required".into());
        }
        if let Some(k) = self.sparsities.iter().find(|&&k| k == 0 || k > self.n_bins) {
            return fail(format!("sparsities: {k} outside 1..={}", self.n_bins));
        }
        for (field, empty) in [
            ("bit_depths", self.bit_depths.is_empty()),
            ("bitrates", self.bitrates.is_empty()),
            ("dithered", self.dithered.is_empty()),
            ("algorithm", self.algorithm.is_empty()),
        ] {
            if empty {
                return fail(format!("{field}: at least one value required"));
            }
        }
        if self.trials == 0 {
            return fail("trials: must be at least 1".into());
        }
        let rc = self.recovery_config(1);
        rc.validate()
            .map_err(|e| Error::Config(format!("recovery settings: {e}")))?;
        // A bit depth must reach at least one admissible measurement count.
        for &b in &self.bit_depths {
            let reasons: Vec<String> = self
                .bitrates
                .iter()
                .map(|&rate| measurement_count(b, rate))
                .filter_map(|m| m.err())
                .collect();
            if reasons.len() == self.bitrates.len() {
                return fail(format!(
                    "bit depth {b} has no valid bit-rate: {}",
                    reasons.join("; ")
                ));
            }
        }
        Ok(())
    }

    pub fn recovery_config(&self, sparsity: usize) -> RecoveryConfig {
        RecoveryConfig {
            sparsity,
            step_size: self.mu,
            max_iters: self
                .max_iters
                .unwrap_or_else(|| RecoveryConfig::default_budget(sparsity)),
            consistency_target: self.consistency_target,
        }
    }

    /// Admissible grid points, plus the skipped `(b, bit-rate)` combinations
    /// with the reason. Unquantized points ignore the dithering flag and are
    /// emitted once, undithered.
    pub fn grid(&self) -> (Vec<GridPoint>, Vec<String>) {
        let mut points = BTreeSet::new();
        let mut skipped = BTreeSet::new();
        for &algorithm in &self.algorithm {
            for &dithered in &self.dithered {
                for &bit_depth in &self.bit_depths {
                    for &sparsity in &self.sparsities {
                        for &bitrate in &self.bitrates {
                            match measurement_count(bit_depth, bitrate) {
                                Ok(n_meas) => {
                                    points.insert(GridPoint {
                                        algorithm,
                                        dithered: dithered && bit_depth.is_quantized(),
                                        bit_depth,
                                        sparsity,
                                        bitrate,
                                        n_meas,
                                    });
                                }
                                Err(reason) => {
                                    skipped.insert(reason);
                                }
                            }
                        }
                    }
                }
            }
        }
        (points.into_iter().collect(), skipped.into_iter().collect())
    }
}

/// `M = bit-rate / b`, required to be an integer within `[2^3, 2^13]`.
pub fn measurement_count(bit_depth: BitDepth, bitrate: u64) -> std::result::Result<usize, String> {
    let b = bit_depth.bits_per_component() as u64;
    if bitrate == 0 || !bitrate.is_multiple_of(b) {
        return Err(format!(
            "bit-rate {bitrate}/{b} is not an integer measurement count"
        ));
    }
    let m = (bitrate / b) as usize;
    if !(MIN_MEAS..=MAX_MEAS).contains(&m) {
        return Err(format!(
            "bit-rate {bitrate} at {b} bits gives M={m}, outside {MIN_MEAS}..={MAX_MEAS}"
        ));
    }
    Ok(m)
}

/// One cell of the experiment grid. The derived ordering is the output order:
/// algorithm, dithering, bit depth, sparsity, bit-rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPoint {
    pub algorithm: Algorithm,
    pub dithered: bool,
    pub bit_depth: BitDepth,
    pub sparsity: usize,
    pub bitrate: u64,
    pub n_meas: usize,
}

impl GridPoint {
    /// Builds a point from `(K, b, M)`.
    pub fn new(
        sparsity: usize,
        bit_depth: BitDepth,
        n_meas: usize,
        dithered: bool,
        algorithm: Algorithm,
    ) -> Self {
        Self {
            algorithm,
            dithered: dithered && bit_depth.is_quantized(),
            bit_depth,
            sparsity,
            bitrate: bit_depth.bits_per_component() as u64 * n_meas as u64,
            n_meas,
        }
    }

    pub fn log2_bitrate(&self) -> f64 {
        (self.bitrate as f64).log2()
    }
}

/// Shared settings for every trial of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSettings {
    pub n_bins: usize,
    pub master_seed: u64,
    pub mu: f64,
    pub consistency_target: f64,
    pub max_iters: Option<usize>,
}

impl TrialSettings {
    pub fn new(n_bins: usize, master_seed: u64) -> Self {
        Self {
            n_bins,
            master_seed,
            mu: RecoveryConfig::DEFAULT_STEP,
            consistency_target: RecoveryConfig::DEFAULT_TARGET,
            max_iters: None,
        }
    }

    fn recovery_config(&self, sparsity: usize) -> RecoveryConfig {
        RecoveryConfig {
            sparsity,
            step_size: self.mu,
            max_iters: self
                .max_iters
                .unwrap_or_else(|| RecoveryConfig::default_budget(sparsity)),
            consistency_target: self.consistency_target,
        }
    }
}

impl From<&ExperimentConfig> for TrialSettings {
    fn from(cfg: &ExperimentConfig) -> Self {
        Self {
            n_bins: cfg.n_bins,
            master_seed: cfg.master_seed,
            mu: cfg.mu,
            consistency_target: cfg.consistency_target,
            max_iters: cfg.max_iters,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub profile: u64,
    pub plan: u64,
    pub dither: u64,
}

impl TrialSeeds {
    pub fn derive(settings: &TrialSettings, point: &GridPoint, trial_index: u64) -> Self {
        let n = settings.n_bins as u64;
        let k = point.sparsity as u64;
        let m = point.n_meas as u64;
        let b = match point.bit_depth {
            BitDepth::Bits(b) => b as u64,
            BitDepth::Unquantized => 0,
        };
        let master = settings.master_seed;
        Self {
            profile: purpose_seed(master, &[n, k, trial_index], Purpose::Profile),
            plan: purpose_seed(master, &[n, m, trial_index], Purpose::Plan),
            dither: purpose_seed(master, &[n, k, b, m, trial_index], Purpose::Dither),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub point: GridPoint,
    pub tp: usize,
    pub tpr: f64,
    pub l2_error: f64,
    pub iterations: usize,
    pub seeds: TrialSeeds,
}

/// True positive rate `|S_true ∩ S_est| / K`.
pub fn tpr(true_support: &[usize], est_support: &[usize], sparsity: usize) -> Result<f64> {
    if true_support.is_empty() || sparsity == 0 {
        return Err(Error::InvalidParameter("true support is empty".into()));
    }
    Ok(true_positives(true_support, est_support) as f64 / sparsity as f64)
}

fn true_positives(true_support: &[usize], est_support: &[usize]) -> usize {
    let truth: BTreeSet<usize> = true_support.iter().copied().collect();
    est_support
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .filter(|i| truth.contains(i))
        .count()
}

/// Runs one seeded trial: draw, acquire, recover, score.
pub fn run_trial(
    settings: &TrialSettings,
    point: &GridPoint,
    trial_index: u64,
) -> Result<TrialRecord> {
    let seeds = TrialSeeds::derive(settings, point, trial_index);
    let n = settings.n_bins;

    let truth = random_profile(n, point.sparsity, &mut rng_from_seed(seeds.profile))?;
    let plan = make_sampling_plan(n, point.n_meas, seeds.plan)?;
    let op = PartialFourier::new(&plan);
    let r = op.forward(truth.amplitudes())?;

    let (cfg, dither) = match point.bit_depth {
        BitDepth::Unquantized => (QuantizerConfig::unquantized(), None),
        bits => {
            let range = dynamic_range_for(&r, bits, point.dithered)?;
            let cfg = QuantizerConfig::new(bits, range)?;
            let dither = if point.dithered {
                Some(draw_dither(&cfg, point.n_meas, seeds.dither)?)
            } else {
                None
            };
            (cfg, dither)
        }
    };
    let sensor = Sensor::with_operator(op, cfg, dither)?;
    let y = sensor.quantize(r)?;
    let result = Decoder::new(sensor).recover(
        point.algorithm,
        &y,
        &settings.recovery_config(point.sparsity),
    )?;

    let tp = true_positives(&truth.support(), &result.estimate.support());
    Ok(TrialRecord {
        trial_index,
        point: *point,
        tp,
        tpr: tp as f64 / point.sparsity as f64,
        l2_error: result.estimate.l2_distance(&truth)?,
        iterations: result.iterations_run,
        seeds,
    })
}

/// Fixed-point scale for the order-independent l2 error sum.
const L2_SCALE: f64 = (1u64 << 40) as f64;

/// Largest per-trial l2 error kept in fixed point; 2^64 trials of it still
/// fit the sum.
const L2_FIXED_MAX: f64 = (1u128 << 63) as f64;

/// Streaming, associative per-point accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Accumulator {
    trials: u64,
    tp_sum: u64,
    tp_sq_sum: u64,
    l2_fixed: u128,
    /// Trials whose estimate diverged (l2 error infinite, NaN or beyond the
    /// fixed-point range).
    l2_diverged: u64,
}

impl Accumulator {
    pub fn push(&mut self, record: &TrialRecord) {
        self.trials += 1;
        self.tp_sum += record.tp as u64;
        self.tp_sq_sum += (record.tp * record.tp) as u64;
        let scaled = (record.l2_error * L2_SCALE).round();
        if (0.0..L2_FIXED_MAX).contains(&scaled) {
            self.l2_fixed += scaled as u128;
        } else {
            self.l2_diverged += 1;
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.trials += other.trials;
        self.tp_sum += other.tp_sum;
        self.tp_sq_sum += other.tp_sq_sum;
        self.l2_fixed += other.l2_fixed;
        self.l2_diverged += other.l2_diverged;
        self
    }

    pub fn finish(&self, point: GridPoint) -> AggregateResult {
        let n = self.trials as f64;
        let k = point.sparsity as f64;
        let mean = self.tp_sum as f64 / n;
        let var = if self.trials > 1 {
            ((self.tp_sq_sum as f64 - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        AggregateResult {
            point,
            trials: self.trials as usize,
            mean_tpr: 100.0 * mean / k,
            stderr: 100.0 * (var / n).sqrt() / k,
            mean_l2_error: if self.l2_diverged > 0 {
                f64::INFINITY
            } else {
                self.l2_fixed as f64 / L2_SCALE / n
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub point: GridPoint,
    pub trials: usize,
    /// Mean TPR in percent.
    pub mean_tpr: f64,
    /// Standard error of the mean TPR, in percent.
    pub stderr: f64,
    pub mean_l2_error: f64,
}

/// Runs `trials` trials of one point on the current rayon pool.
pub fn run_point(
    settings: &TrialSettings,
    point: &GridPoint,
    trials: usize,
) -> Result<AggregateResult> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let acc = (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(settings, point, t))
        .try_fold(Accumulator::default, |mut acc, rec| {
            acc.push(&rec?);
            Ok::<_, Error>(acc)
        })
        .try_reduce(Accumulator::default, |a, b| Ok(a.merge(b)))?;
    Ok(acc.finish(*point))
}

/// Worker pool sized by `QCS_THREADS` when set, else rayon's default.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("QCS_THREADS") {
        let threads: usize = raw
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("QCS_THREADS: `{raw}` is not a thread count")))?;
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs every admissible point of the grid; skipped combinations are logged.
/// Results come back in output order and `sink` sees each one as it
/// completes.
pub fn run_grid_with<F>(cfg: &ExperimentConfig, mut sink: F) -> Result<Vec<AggregateResult>>
where
    F: FnMut(&AggregateResult),
{
    cfg.validate()?;
    let (points, skipped) = cfg.grid();
    for reason in &skipped {
        log::warn!("skipping grid point: {reason}");
    }
    let settings = TrialSettings::from(cfg);
    let pool = worker_pool()?;
    let mut out = Vec::with_capacity(points.len());
    for point in &points {
        let agg = pool.install(|| run_point(&settings, point, cfg.trials))?;
        sink(&agg);
        out.push(agg);
    }
    Ok(out)
}

pub fn run_grid(cfg: &ExperimentConfig) -> Result<Vec<AggregateResult>> {
    run_grid_with(cfg, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tpr_cases() {
        assert_eq!(tpr(&[3, 9], &[3, 7], 2).unwrap(), 0.5);
        assert_eq!(tpr(&[3, 9], &[9, 3], 2).unwrap(), 1.0);
        assert_eq!(tpr(&[3, 9], &[1, 2], 2).unwrap(), 0.0);
        assert!(tpr(&[], &[1], 1).is_err());
    }

    #[test]
    fn measurement_counts() {
        assert_eq!(measurement_count(BitDepth::Bits(1), 8192), Ok(8192));
        assert_eq!(measurement_count(BitDepth::Bits(2), 512), Ok(256));
        assert_eq!(measurement_count(BitDepth::Unquantized, 512), Ok(16));
        assert!(measurement_count(BitDepth::Bits(3), 10).is_err());
        assert!(measurement_count(BitDepth::Bits(1), 4).is_err());
        assert!(measurement_count(BitDepth::Bits(1), 16384).is_err());
        assert!(measurement_count(BitDepth::Unquantized, 8).is_err());
    }

    #[test]
    fn trial_is_reproducible() {
        let settings = TrialSettings::new(64, 42);
        let point = GridPoint::new(2, BitDepth::Bits(1), 256, true, Algorithm::Qiht);
        let a = run_trial(&settings, &point, 3).unwrap();
        assert_eq!(a, run_trial(&settings, &point, 3).unwrap());
        assert!(a.tp <= 2);
        assert_eq!(a.tpr, a.tp as f64 / 2.0);
    }

    #[test]
    fn unquantized_full_sampling_is_exact() {
        let settings = TrialSettings::new(16, 1);
        let point = GridPoint::new(3, BitDepth::Unquantized, 16, false, Algorithm::Pbp);
        for t in 0..50 {
            let rec = run_trial(&settings, &point, t).unwrap();
            assert_eq!(rec.tpr, 1.0);
            assert!(rec.l2_error < 1e-12);
        }
    }

    #[test]
    fn paired_scenes_across_decoders() {
        let settings = TrialSettings::new(64, 9);
        let pbp = GridPoint::new(2, BitDepth::Bits(1), 128, true, Algorithm::Pbp);
        let qiht = GridPoint::new(2, BitDepth::Bits(1), 128, false, Algorithm::Qiht);
        assert_eq!(
            TrialSeeds::derive(&settings, &pbp, 5).profile,
            TrialSeeds::derive(&settings, &qiht, 5).profile
        );
    }

    #[test]
    fn accumulator_is_order_independent() {
        let settings = TrialSettings::new(32, 0);
        let point = GridPoint::new(2, BitDepth::Bits(1), 64, true, Algorithm::Pbp);
        let recs: Vec<_> = (0..40)
            .map(|t| run_trial(&settings, &point, t).unwrap())
            .collect();
        let mut forward = Accumulator::default();
        recs.iter().for_each(|r| forward.push(r));
        let mut left = Accumulator::default();
        let mut right = Accumulator::default();
        recs.iter().rev().take(13).for_each(|r| right.push(r));
        recs.iter().rev().skip(13).for_each(|r| left.push(r));
        assert_eq!(forward, right.merge(left));
        let agg = forward.finish(point);
        let direct = recs.iter().map(|r| r.tpr).sum::<f64>() / 40.0 * 100.0;
        assert!((agg.mean_tpr - direct).abs() < 1e-9);
    }

    #[test]
    fn diverged_estimates_give_infinite_mean_error() {
        let settings = TrialSettings::new(32, 0);
        let point = GridPoint::new(2, BitDepth::Bits(1), 64, true, Algorithm::Pbp);
        let mut rec = run_trial(&settings, &point, 0).unwrap();
        let mut acc = Accumulator::default();
        acc.push(&rec);
        for bad in [f64::INFINITY, f64::NAN, 1e300] {
            rec.l2_error = bad;
            acc.push(&rec);
        }
        let agg = acc.merge(acc).finish(point);
        assert_eq!(agg.trials, 8);
        assert_eq!(agg.mean_l2_error, f64::INFINITY);
        assert_eq!(agg.mean_tpr, 100.0 * rec.tpr);
    }

    #[test]
    fn grid_skips_bad_pairs_and_orders_points() {
        let mut cfg = ExperimentConfig::new(vec![4, 2]);
        cfg.bit_depths = vec![BitDepth::Bits(3), BitDepth::Bits(1)];
        cfg.bitrates = vec![24, 10, 48];
        cfg.dithered = vec![true, false];
        cfg.algorithm = vec![Algorithm::Qiht, Algorithm::Pbp];
        let (points, skipped) = cfg.grid();
        assert!(skipped.iter().any(|s| s.contains("10/3")));
        let mut sorted = points.clone();
        sorted.sort();
        assert_eq!(points, sorted);
        assert_eq!(points[0].algorithm, Algorithm::Pbp);
        assert!(!points[0].dithered);
        assert_eq!(points[0].bit_depth, BitDepth::Bits(1));
        assert_eq!(points[0].sparsity, 2);
    }

    #[test]
    fn unquantized_points_are_not_duplicated() {
        let mut cfg = ExperimentConfig::new(vec![2]);
        cfg.bit_depths = vec![BitDepth::Unquantized];
        cfg.bitrates = vec![512];
        cfg.dithered = vec![true, false];
        let (points, _) = cfg.grid();
        assert_eq!(points.len(), 1);
        assert!(!points[0].dithered);
    }

    #[test]
    fn single_point_single_trial() {
        let mut cfg = ExperimentConfig::new(vec![2]);
        cfg.n_bins = 32;
        cfg.bitrates = vec![64];
        cfg.trials = 1;
        let out = run_grid(&cfg).unwrap();
        assert_eq!(out.len(), 1);
        let rec = run_trial(&TrialSettings::from(&cfg), &out[0].point, 0).unwrap();
        assert_eq!(out[0].mean_tpr, rec.tpr * 100.0);
        assert_eq!(out[0].trials, 1);
        assert_eq!(out[0].stderr, 0.0);
    }
}
