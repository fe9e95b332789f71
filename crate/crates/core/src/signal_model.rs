//! Discrete FMCW range-domain sensing model.
//!
//! A range profile is a complex vector over `N` range bins. After coherent
//! demodulation, the sample taken at ramp position `m` probes the `m`-th
//! frequency of the discrete Fourier transform of the profile, so the
//! pre-quantization measurements are rows of the DFT matrix picked by a
//! (multi)set of frequency indices:
//!
//! ```text
//! r[j] = sum_n a[n] * exp(-i 2 pi omega[j] n / N)
//! ```
//!
//! [`PartialFourier`] evaluates this operator and its adjoint through one
//! size-`N` FFT each, independent of the number of measurements.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::seed::rng_from_seed;

pub type Complex = Complex64;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// FMCW ramp parameters. Only used to convert range bins to meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarParams {
    /// Carrier frequency at the start of the ramp (Hz).
    pub f0: f64,
    /// Swept bandwidth (Hz).
    pub bandwidth: f64,
    /// Duration of one ramp (s).
    pub ramp_duration: f64,
    /// Number of range bins, equal to the samples per ramp.
    pub n_bins: usize,
}

impl Default for RadarParams {
    /// K-band radar swept over 150 MHz, giving 1 m bins.
    fn default() -> Self {
        Self {
            f0: 24.0e9,
            bandwidth: 150.0e6,
            ramp_duration: 1.0e-3,
            n_bins: 256,
        }
    }
}

impl RadarParams {
    pub fn new(f0: f64, bandwidth: f64, ramp_duration: f64, n_bins: usize) -> Result<Self> {
        let params = Self {
            f0,
            bandwidth,
            ramp_duration,
            n_bins,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.f0) && positive(self.bandwidth) && positive(self.ramp_duration)) {
            return Err(Error::InvalidParameter(format!(
                "radar parameters must be strictly positive (f0={}, bandwidth={}, ramp_duration={})",
                self.f0, self.bandwidth, self.ramp_duration
            )));
        }
        if self.n_bins == 0 {
            return Err(Error::InvalidParameter("n_bins must be at least 1".into()));
        }
        Ok(())
    }

    /// Range resolution `c / 2B` in meters.
    pub fn resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth)
    }

    /// Maximum unambiguous range `c N / 2B` in meters.
    pub fn max_range(&self) -> f64 {
        self.resolution() * self.n_bins as f64
    }
}

/// Range in meters of bin `n`, with bins numbered `1..=N` over `(0, R_max]`.
pub fn bin_to_range(params: &RadarParams, n: usize) -> Result<f64> {
    if n == 0 || n > params.n_bins {
        return Err(Error::InvalidParameter(format!(
            "range bin {n} outside 1..={}",
            params.n_bins
        )));
    }
    Ok(n as f64 * params.resolution())
}

/// Maps a 0-based vector index to its range bin. The DFT is `N`-periodic in
/// the bin index, so index 0 carries bin `N`.
pub fn index_to_bin(index: usize, n_bins: usize) -> usize {
    if index == 0 {
        n_bins
    } else {
        index
    }
}

/// Sparse complex range profile indexed by DFT bin `0..N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeProfile {
    amplitudes: Vec<Complex>,
}

impl RangeProfile {
    pub fn new(amplitudes: Vec<Complex>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidParameter(
                "range profile needs at least one bin".into(),
            ));
        }
        Ok(Self { amplitudes })
    }

    pub fn zeros(n_bins: usize) -> Self {
        Self {
            amplitudes: vec![Complex::new(0.0, 0.0); n_bins.max(1)],
        }
    }

    /// Profile with the given `(index, amplitude)` targets.
    pub fn from_targets(n_bins: usize, targets: &[(usize, Complex)]) -> Result<Self> {
        let mut profile = Self::zeros(n_bins);
        for &(idx, amp) in targets {
            if idx >= n_bins {
                return Err(Error::InvalidParameter(format!(
                    "target index {idx} outside 0..{n_bins}"
                )));
            }
            profile.amplitudes[idx] += amp;
        }
        Ok(profile)
    }

    pub fn n_bins(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex> {
        self.amplitudes
    }

    /// Sorted indices of the nonzero entries.
    pub fn support(&self) -> Vec<usize> {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn sparsity(&self) -> usize {
        self.amplitudes
            .iter()
            .filter(|a| a.norm_sqr() > 0.0)
            .count()
    }

    pub fn max_modulus(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn l2_distance(&self, other: &RangeProfile) -> Result<f64> {
        check_len("range profile", self.n_bins(), other.n_bins())?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }
}

/// Draws a `K`-sparse profile: uniform support, amplitudes `C e^{i psi}` with
/// `C ~ U[0,1]` and `psi ~ U[0, 2 pi)`, then rescaled to unit peak modulus.
pub fn random_profile<R: Rng + ?Sized>(
    n_bins: usize,
    sparsity: usize,
    rng: &mut R,
) -> Result<RangeProfile> {
    if n_bins == 0 || sparsity == 0 || sparsity > n_bins {
        return Err(Error::InvalidParameter(format!(
            "sparsity must satisfy 1 <= K <= N (K={sparsity}, N={n_bins})"
        )));
    }
    let support = index::sample(rng, n_bins, sparsity);
    let mut amplitudes = vec![Complex::new(0.0, 0.0); n_bins];
    for idx in support.iter() {
        // C = 0 would silently drop a target.
        let modulus = loop {
            let c: f64 = rng.gen();
            if c > 0.0 {
                break c;
            }
        };
        let phase = rng.gen::<f64>() * TAU;
        amplitudes[idx] = Complex::from_polar(modulus, phase);
    }
    let peak = amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max);
    for a in &mut amplitudes {
        *a /= peak;
    }
    Ok(RangeProfile { amplitudes })
}

/// Ordered multiset of DFT row indices selecting the measured frequencies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPlan")]
pub struct SamplingPlan {
    n_bins: usize,
    n_meas: usize,
    seed: u64,
    omega: Vec<usize>,
}

#[derive(Deserialize)]
struct RawPlan {
    n_bins: usize,
    n_meas: usize,
    #[serde(default)]
    seed: u64,
    omega: Vec<usize>,
}

impl TryFrom<RawPlan> for SamplingPlan {
    type Error = Error;

    fn try_from(raw: RawPlan) -> Result<Self> {
        let plan = SamplingPlan::from_omega(raw.n_bins, raw.omega, raw.seed)?;
        check_len("sampling plan omega", raw.n_meas, plan.n_meas)?;
        Ok(plan)
    }
}

impl SamplingPlan {
    /// Plan with an explicit frequency list, e.g. read back from a capture.
    pub fn from_omega(n_bins: usize, omega: Vec<usize>, seed: u64) -> Result<Self> {
        if n_bins == 0 || omega.is_empty() {
            return Err(Error::InvalidParameter(
                "sampling plan needs N >= 1 and M >= 1".into(),
            ));
        }
        if let Some(&bad) = omega.iter().find(|&&w| w >= n_bins) {
            return Err(Error::InvalidParameter(format!(
                "frequency index {bad} outside 0..{n_bins}"
            )));
        }
        Ok(Self {
            n_bins,
            n_meas: omega.len(),
            seed,
            omega,
        })
    }

    /// All `N` frequencies once, in natural order.
    pub fn full(n_bins: usize) -> Result<Self> {
        Self::from_omega(n_bins, (0..n_bins).collect(), 0)
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_meas(&self) -> usize {
        self.n_meas
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }
}

/// Time-sampling scheme over consecutive ramps: with `M = qN + r`, the first
/// `q` ramps are fully sampled and `r` distinct positions of the next ramp are
/// drawn uniformly at random.
pub fn make_sampling_plan(n_bins: usize, n_meas: usize, seed: u64) -> Result<SamplingPlan> {
    if n_bins == 0 || n_meas == 0 {
        return Err(Error::InvalidParameter(format!(
            "sampling plan needs N >= 1 and M >= 1 (N={n_bins}, M={n_meas})"
        )));
    }
    let full_ramps = n_meas / n_bins;
    let remainder = n_meas % n_bins;
    let mut omega = Vec::with_capacity(n_meas);
    for _ in 0..full_ramps {
        omega.extend(0..n_bins);
    }
    if remainder > 0 {
        let mut rng = rng_from_seed(seed);
        omega.extend(index::sample(&mut rng, n_bins, remainder).iter());
    }
    Ok(SamplingPlan {
        n_bins,
        n_meas,
        seed,
        omega,
    })
}

/// Partial Fourier operator `Phi = F*_Omega` and its adjoint for one plan.
#[derive(Clone)]
pub struct PartialFourier {
    n_bins: usize,
    omega: Arc<[usize]>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PartialFourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PartialFourier")
            .field("n_bins", &self.n_bins)
            .field("n_meas", &self.omega.len())
            .finish()
    }
}

impl PartialFourier {
    pub fn new(plan: &SamplingPlan) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n_bins: plan.n_bins,
            omega: plan.omega.clone().into(),
            fft: planner.plan_fft_forward(plan.n_bins),
            ifft: planner.plan_fft_inverse(plan.n_bins),
        }
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_meas(&self) -> usize {
        self.omega.len()
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    /// `r = Phi a`: one forward FFT of the profile, then a gather over omega.
    pub fn forward(&self, a: &[Complex]) -> Result<Vec<Complex>> {
        check_len("range profile", self.n_bins, a.len())?;
        let mut spectrum = a.to_vec();
        self.fft.process(&mut spectrum);
        Ok(self.omega.iter().map(|&w| spectrum[w]).collect())
    }

    /// `Phi* y`: measurements are accumulated into their frequency bins
    /// (repeated indices add up), followed by one unnormalized inverse FFT.
    pub fn adjoint(&self, y: &[Complex]) -> Result<Vec<Complex>> {
        check_len("measurement vector", self.omega.len(), y.len())?;
        let mut spectrum = vec![Complex::new(0.0, 0.0); self.n_bins];
        for (&w, &v) in self.omega.iter().zip(y) {
            spectrum[w] += v;
        }
        self.ifft.process(&mut spectrum);
        Ok(spectrum)
    }
}

pub fn forward(plan: &SamplingPlan, a: &RangeProfile) -> Result<Vec<Complex>> {
    check_len("range profile", plan.n_bins, a.n_bins())?;
    PartialFourier::new(plan).forward(a.amplitudes())
}

pub fn adjoint(plan: &SamplingPlan, y: &[Complex]) -> Result<Vec<Complex>> {
    PartialFourier::new(plan).adjoint(y)
}
