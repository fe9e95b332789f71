//! Quantization ambiguity of undithered 1-bit Fourier measurements.
//!
//! A unit target `a0` at bin `n0` and the same scene with an extra target of
//! amplitude `gamma` (`a1`) have measurements `r0`, `r1` with
//! `|r1[m] - r0[m]| = gamma` for every `m`. Under 1-bit quantization both map
//! to the same bits whenever every `r0[m]` sits farther than `gamma` from
//! both axes. Adding a dither moves the cell boundaries independently per
//! sample, so such pairs become distinguishable with high probability.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::quantization::{
    component_inf_norm, draw_dither, dynamic_range_for, BitDepth, Dither, QuantizerConfig, Sensor,
};
use crate::seed::derive_seed;
use crate::signal_model::{
    make_sampling_plan, Complex, PartialFourier, RangeProfile, SamplingPlan,
};

#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguousPair {
    pub a0: RangeProfile,
    pub a1: RangeProfile,
    pub gamma: f64,
    pub n0: usize,
    pub n1: usize,
    pub psi0: f64,
    pub psi1: f64,
}

fn check_phase(name: &str, psi: f64) -> Result<()> {
    if (-PI..PI).contains(&psi) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} = {psi} outside [-pi, pi)"
        )))
    }
}

/// `a0 = e^{-i psi0} b_{n0}`, `a1 = a0 + gamma e^{-i psi1} b_{n1}`, with range
/// bins `n0, n1` in `1..=N` (bin `N` is vector index 0).
pub fn build_pair(
    n_bins: usize,
    n0: usize,
    n1: usize,
    psi0: f64,
    psi1: f64,
    gamma: f64,
) -> Result<AmbiguousPair> {
    let in_range = |n: usize| (1..=n_bins).contains(&n);
    if !in_range(n0) || !in_range(n1) || n0 == n1 {
        return Err(Error::InvalidParameter(format!(
            "need distinct bins in 1..={n_bins}, got n0={n0}, n1={n1}"
        )));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma = {gamma} outside (0, 1)"
        )));
    }
    check_phase("psi0", psi0)?;
    check_phase("psi1", psi1)?;
    let first = Complex::from_polar(1.0, -psi0);
    let second = Complex::from_polar(gamma, -psi1);
    let a0 = RangeProfile::from_targets(n_bins, &[(n0 % n_bins, first)])?;
    let a1 = RangeProfile::from_targets(n_bins, &[(n0 % n_bins, first), (n1 % n_bins, second)])?;
    Ok(AmbiguousPair {
        a0,
        a1,
        gamma,
        n0,
        n1,
        psi0,
        psi1,
    })
}

/// `min_m min(|Re r0[m]|, |Im r0[m]|)` over the plan's measurements.
pub fn margin(plan: &SamplingPlan, a0: &RangeProfile) -> Result<f64> {
    check_len("range profile", plan.n_bins(), a0.n_bins())?;
    let r0 = PartialFourier::new(plan).forward(a0.amplitudes())?;
    Ok(r0
        .iter()
        .map(|z| z.re.abs().min(z.im.abs()))
        .fold(f64::INFINITY, f64::min))
}

/// Sufficient condition for 1-bit ambiguity of every pair built on `a0` with
/// amplitude `gamma`.
pub fn check_margin(plan: &SamplingPlan, a0: &RangeProfile, gamma: f64) -> Result<bool> {
    Ok(margin(plan, a0)? > gamma)
}

/// True when both profiles of the pair produce exactly the same quantized
/// measurements. Only `b = 1` without dither carries a guarantee.
pub fn verify_ac(
    plan: &SamplingPlan,
    cfg: &QuantizerConfig,
    pair: &AmbiguousPair,
    dither: Option<&Dither>,
) -> Result<bool> {
    let sensor = Sensor::new(plan, *cfg, dither.cloned())?;
    pair_collides(&sensor, pair)
}

fn pair_collides(sensor: &Sensor, pair: &AmbiguousPair) -> Result<bool> {
    Ok(sensor.sense(pair.a0.amplitudes())? == sensor.sense(pair.a1.amplitudes())?)
}

/// 1-bit quantizer whose range covers both measurement vectors of the pair.
pub fn one_bit_config(
    plan: &SamplingPlan,
    pair: &AmbiguousPair,
    dithered: bool,
) -> Result<QuantizerConfig> {
    let op = PartialFourier::new(plan);
    let mut r = op.forward(pair.a0.amplitudes())?;
    r.extend(op.forward(pair.a1.amplitudes())?);
    debug_assert!(component_inf_norm(&r) > 0.0);
    QuantizerConfig::new(
        BitDepth::Bits(1),
        dynamic_range_for(&r, BitDepth::Bits(1), dithered)?,
    )
}

/// First phase on a uniform grid over `[-pi, pi)` for the second target at
/// which the pair stops colliding, if any.
pub fn find_separating_phase(
    plan: &SamplingPlan,
    cfg: &QuantizerConfig,
    n0: usize,
    n1: usize,
    psi0: f64,
    gamma: f64,
    grid: usize,
) -> Result<Option<f64>> {
    let sensor = Sensor::new(plan, *cfg, None)?;
    for k in 0..grid {
        let psi1 = -PI + 2.0 * PI * k as f64 / grid as f64;
        let pair = build_pair(plan.n_bins(), n0, n1, psi0, psi1, gamma)?;
        if !pair_collides(&sensor, &pair)? {
            return Ok(Some(psi1));
        }
    }
    Ok(None)
}

/// Fraction of `(n1, psi1)` pairs that collide under `cfg` without dither.
pub fn undithered_collision_rate(
    plan: &SamplingPlan,
    cfg: &QuantizerConfig,
    n0: usize,
    psi0: f64,
    gamma: f64,
    second_targets: &[(usize, f64)],
) -> Result<f64> {
    if second_targets.is_empty() {
        return Err(Error::InvalidParameter("no second targets to test".into()));
    }
    let sensor = Sensor::new(plan, *cfg, None)?;
    let a0 = RangeProfile::from_targets(
        plan.n_bins(),
        &[(n0 % plan.n_bins(), Complex::from_polar(1.0, -psi0))],
    )?;
    let base = sensor.sense(a0.amplitudes())?;
    let hits = second_targets
        .par_iter()
        .map(|&(n1, psi1)| -> Result<bool> {
            let pair = build_pair(plan.n_bins(), n0, n1, psi0, psi1, gamma)?;
            Ok(sensor.sense(pair.a1.amplitudes())? == base)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
}

/// Fraction of dither draws under which the pair still collides.
pub fn dithered_collision_rate(
    plan: &SamplingPlan,
    pair: &AmbiguousPair,
    n_seeds: usize,
    seed: u64,
) -> Result<f64> {
    if n_seeds == 0 {
        return Err(Error::InvalidParameter(
            "need at least one dither seed".into(),
        ));
    }
    let cfg = one_bit_config(plan, pair, true)?;
    let op = PartialFourier::new(plan);
    let hits = (0..n_seeds as u64)
        .into_par_iter()
        .map(|s| -> Result<bool> {
            let dither = draw_dither(&cfg, plan.n_meas(), derive_seed(seed, &[s]))?;
            let sensor = Sensor::with_operator(op.clone(), cfg, Some(dither))?;
            pair_collides(&sensor, pair)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / n_seeds as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityParams {
    pub n_bins: usize,
    pub n0: usize,
    pub n1: usize,
    pub psi0: f64,
    pub psi1: f64,
    pub gamma: f64,
    pub n_meas: usize,
    pub n_seeds: usize,
    pub seed: u64,
}

impl Default for AmbiguityParams {
    fn default() -> Self {
        Self {
            n_bins: 256,
            n0: 64,
            n1: 10,
            psi0: PI / 4.0,
            psi1: 0.0,
            gamma: 0.5,
            n_meas: 1024,
            n_seeds: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityReport {
    pub margin: f64,
    pub condition_holds: bool,
    #[serde(rename = "undithered_AC")]
    pub undithered_ac: bool,
    #[serde(rename = "dithered_AC_rate")]
    pub dithered_ac_rate: f64,
    pub n_seeds: usize,
}

pub fn ambiguity_report(params: &AmbiguityParams) -> Result<AmbiguityReport> {
    let pair = build_pair(
        params.n_bins,
        params.n0,
        params.n1,
        params.psi0,
        params.psi1,
        params.gamma,
    )?;
    let plan = make_sampling_plan(params.n_bins, params.n_meas, params.seed)?;
    let margin = margin(&plan, &pair.a0)?;
    let undithered = one_bit_config(&plan, &pair, false)?;
    Ok(AmbiguityReport {
        margin,
        condition_holds: margin > params.gamma,
        undithered_ac: verify_ac(&plan, &undithered, &pair, None)?,
        dithered_ac_rate: dithered_collision_rate(&plan, &pair, params.n_seeds, params.seed)?,
        n_seeds: params.n_seeds,
    })
}
