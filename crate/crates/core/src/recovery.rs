//! Sparse range-profile estimation from quantized measurements.
//!
//! [`pbp`] back-projects the measurements and keeps the `K` strongest bins.
//! [`qiht`] starts from that estimate and iterates
//!
//! ```text
//! a <- H_K( a + (mu / M) Phi* (y - A(a)) )
//! ```
//!
//! where `A` re-applies the acquisition chain, dither included, to the
//! current estimate. Iteration stops once the estimate reproduces enough of
//! the observed samples, when that agreement drops, or when the budget runs
//! out.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::quantization::{Dither, QuantizerConfig, Sensor};
use crate::signal_model::{Complex, PartialFourier, RangeProfile, SamplingPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pbp,
    Qiht,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Pbp => "pbp",
            Algorithm::Qiht => "qiht",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pbp" => Ok(Algorithm::Pbp),
            "qiht" => Ok(Algorithm::Qiht),
            other => Err(Error::InvalidParameter(format!(
                "unknown algorithm `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub sparsity: usize,
    pub step_size: f64,
    pub max_iters: usize,
    pub consistency_target: f64,
}

impl RecoveryConfig {
    pub const DEFAULT_STEP: f64 = 1.0;
    /// Full agreement; QIHT then runs until agreement drops or the budget
    /// is spent. A looser target such as 0.95 often stops at the PBP start.
    pub const DEFAULT_TARGET: f64 = 1.0;

    /// Iteration budget `max(20, 100 K)`.
    pub fn default_budget(sparsity: usize) -> usize {
        (100 * sparsity).max(20)
    }

    pub fn new(sparsity: usize) -> Self {
        Self {
            sparsity,
            step_size: Self::DEFAULT_STEP,
            max_iters: Self::default_budget(sparsity),
            consistency_target: Self::DEFAULT_TARGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sparsity == 0 {
            return Err(Error::InvalidParameter(
                "sparsity must be at least 1".into(),
            ));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "max_iters must be at least 1".into(),
            ));
        }
        if !(self.consistency_target > 0.0 && self.consistency_target <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "consistency target must be in (0, 1], got {}",
                self.consistency_target
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// One-shot estimator, no iterations.
    SinglePass,
    Budget,
    ConsistencyTarget,
    ConsistencyDrop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub estimate: RangeProfile,
    pub iterations_run: usize,
    pub final_consistency: f64,
    pub stop_reason: StopReason,
}

fn by_modulus_then_index(v: &[Complex]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    |&i, &j| v[j].norm_sqr().total_cmp(&v[i].norm_sqr()).then(i.cmp(&j))
}

/// Keeps the `K` largest-modulus entries; ties go to the lower index.
pub fn hard_threshold(v: &[Complex], sparsity: usize) -> Result<Vec<Complex>> {
    if sparsity == 0 || sparsity > v.len() {
        return Err(Error::InvalidParameter(format!(
            "hard threshold needs 1 <= K <= N (K={sparsity}, N={})",
            v.len()
        )));
    }
    let mut out = vec![Complex::new(0.0, 0.0); v.len()];
    let mut order: Vec<usize> = (0..v.len()).collect();
    if sparsity < v.len() {
        order.select_nth_unstable_by(sparsity - 1, by_modulus_then_index(v));
    }
    for &i in &order[..sparsity] {
        out[i] = v[i];
    }
    Ok(out)
}

fn back_project(op: &PartialFourier, y: &[Complex], sparsity: usize) -> Result<Vec<Complex>> {
    let scale = 1.0 / op.n_meas() as f64;
    let mut proxy = op.adjoint(y)?;
    for v in &mut proxy {
        *v *= scale;
    }
    hard_threshold(&proxy, sparsity)
}

/// Projected back projection `H_K(Phi* y / M)`.
pub fn pbp(plan: &SamplingPlan, y: &[Complex], sparsity: usize) -> Result<RangeProfile> {
    RangeProfile::new(back_project(&PartialFourier::new(plan), y, sparsity)?)
}

/// Tolerance for declaring two full-resolution samples equal.
const UNQUANTIZED_MATCH_TOL: f64 = 1e-9;

fn agreement(sensor: &Sensor, predicted: &[Complex], observed: &[Complex]) -> f64 {
    let hits = if sensor.config().is_quantized() {
        predicted
            .iter()
            .zip(observed)
            .filter(|(p, o)| p == o)
            .count()
    } else {
        let scale = observed.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let tol = UNQUANTIZED_MATCH_TOL * scale;
        predicted
            .iter()
            .zip(observed)
            .filter(|(p, o)| (*p - *o).norm() <= tol)
            .count()
    };
    hits as f64 / observed.len() as f64
}

/// Fraction of samples where re-acquiring `estimate` reproduces `y` exactly,
/// both quadrature bins included. Without quantization, samples agreeing to
/// a relative `1e-9` count as equal.
pub fn consistency(
    plan: &SamplingPlan,
    cfg: &QuantizerConfig,
    dither: Option<&Dither>,
    y: &[Complex],
    estimate: &RangeProfile,
) -> Result<f64> {
    check_len("measurement vector", plan.n_meas(), y.len())?;
    let sensor = Sensor::new(plan, *cfg, dither.cloned())?;
    let predicted = sensor.sense(estimate.amplitudes())?;
    Ok(agreement(&sensor, &predicted, y))
}

/// Recovery engine bound to one acquisition chain.
#[derive(Debug, Clone)]
pub struct Decoder {
    sensor: Sensor,
}

impl Decoder {
    pub fn new(sensor: Sensor) -> Self {
        Self { sensor }
    }

    pub fn sensor(&self) -> &Sensor {
        &self.sensor
    }

    pub fn pbp(&self, y: &[Complex], sparsity: usize) -> Result<RecoveryResult> {
        check_len(
            "measurement vector",
            self.sensor.operator().n_meas(),
            y.len(),
        )?;
        let estimate = back_project(self.sensor.operator(), y, sparsity)?;
        let predicted = self.sensor.sense(&estimate)?;
        Ok(RecoveryResult {
            final_consistency: agreement(&self.sensor, &predicted, y),
            estimate: RangeProfile::new(estimate)?,
            iterations_run: 0,
            stop_reason: StopReason::SinglePass,
        })
    }

    pub fn qiht(&self, y: &[Complex], rc: &RecoveryConfig) -> Result<RecoveryResult> {
        rc.validate()?;
        let op = self.sensor.operator();
        check_len("measurement vector", op.n_meas(), y.len())?;
        let gain = rc.step_size / op.n_meas() as f64;

        let mut current = back_project(op, y, rc.sparsity)?;
        let mut predicted = self.sensor.sense(&current)?;
        let mut score = agreement(&self.sensor, &predicted, y);
        let finish = |estimate: Vec<Complex>, iterations_run, final_consistency, stop_reason| {
            Ok(RecoveryResult {
                estimate: RangeProfile::new(estimate)?,
                iterations_run,
                final_consistency,
                stop_reason,
            })
        };
        if score >= rc.consistency_target {
            return finish(current, 0, score, StopReason::ConsistencyTarget);
        }

        for iteration in 1..=rc.max_iters {
            let residual: Vec<Complex> = y.iter().zip(&predicted).map(|(o, p)| o - p).collect();
            let correction = op.adjoint(&residual)?;
            let stepped: Vec<Complex> = current
                .iter()
                .zip(&correction)
                .map(|(a, g)| a + g * gain)
                .collect();
            let next = hard_threshold(&stepped, rc.sparsity)?;
            let next_predicted = self.sensor.sense(&next)?;
            let next_score = agreement(&self.sensor, &next_predicted, y);

            if next_score >= rc.consistency_target {
                return finish(next, iteration, next_score, StopReason::ConsistencyTarget);
            }
            if next_score < score {
                // Scores never decreased before this step, so `current` is the best iterate.
                return finish(current, iteration, score, StopReason::ConsistencyDrop);
            }
            current = next;
            predicted = next_predicted;
            score = next_score;
        }
        finish(current, rc.max_iters, score, StopReason::Budget)
    }

    pub fn recover(
        &self,
        algorithm: Algorithm,
        y: &[Complex],
        rc: &RecoveryConfig,
    ) -> Result<RecoveryResult> {
        match algorithm {
            Algorithm::Pbp => self.pbp(y, rc.sparsity),
            Algorithm::Qiht => self.qiht(y, rc),
        }
    }
}

/// Quantized iterative hard thresholding. `dither` must be the exact vector
/// used when `y` was acquired.
pub fn qiht(
    plan: &SamplingPlan,
    cfg: &QuantizerConfig,
    dither: Option<&Dither>,
    y: &[Complex],
    rc: &RecoveryConfig,
) -> Result<RecoveryResult> {
    Decoder::new(Sensor::new(plan, *cfg, dither.cloned())?).qiht(y, rc)
}
