//! Uniform mid-rise quantization of complex baseband samples, with optional
//! (non-subtractive) uniform dither.
//!
//! The scalar quantizer is `Q(x) = d * floor(x / d) + d / 2` with step
//! `d = 2^(1-b) * range`. It has no zero output level and no saturation:
//! values beyond the dynamic range follow the same formula, so callers pick
//! the range with [`dynamic_range_for`] instead. The one exception is the
//! upper end of the closed range `[-range, range]`, which belongs to the top
//! cell rather than opening a new one.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_len, Error, Result};
use crate::seed::rng_from_seed;
use crate::signal_model::{Complex, PartialFourier, RangeProfile, SamplingPlan};

/// Bits per real component, or full-resolution samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BitDepth {
    Bits(u8),
    Unquantized,
}

impl BitDepth {
    pub const MAX_BITS: u8 = 32;

    /// Bits charged per real component when unquantized samples are counted
    /// against a bit budget (single-precision floats).
    pub const UNQUANTIZED_BITS: u32 = 32;

    pub fn bits(b: u32) -> Result<Self> {
        if (1..=Self::MAX_BITS as u32).contains(&b) {
            Ok(BitDepth::Bits(b as u8))
        } else {
            Err(Error::InvalidParameter(format!(
                "bit depth must be in 1..=32, got {b}"
            )))
        }
    }

    pub fn is_quantized(self) -> bool {
        matches!(self, BitDepth::Bits(_))
    }

    /// `alpha_b = 2^(1-b)`, the step as a fraction of the dynamic range.
    pub fn alpha(self) -> Option<f64> {
        match self {
            BitDepth::Bits(b) => Some(2f64.powi(1 - b as i32)),
            BitDepth::Unquantized => None,
        }
    }

    /// Bits spent per measurement component in bit-rate accounting.
    pub fn bits_per_component(self) -> u32 {
        match self {
            BitDepth::Bits(b) => b as u32,
            BitDepth::Unquantized => Self::UNQUANTIZED_BITS,
        }
    }
}

impl fmt::Display for BitDepth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BitDepth::Bits(b) => write!(f, "{b}"),
            BitDepth::Unquantized => f.write_str("unquantized"),
        }
    }
}

impl std::str::FromStr for BitDepth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "unquantized" | "none" | "inf" => Ok(BitDepth::Unquantized),
            other => other
                .parse::<u32>()
                .map_err(|_| Error::InvalidParameter(format!("bad bit depth `{other}`")))
                .and_then(BitDepth::bits),
        }
    }
}

impl Serialize for BitDepth {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BitDepth::Bits(b) => serializer.serialize_u8(*b),
            BitDepth::Unquantized => serializer.serialize_str("unquantized"),
        }
    }
}

impl<'de> Deserialize<'de> for BitDepth {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Bits(u32),
            Named(String),
        }
        let parsed = match Raw::deserialize(deserializer)? {
            Raw::Bits(b) => BitDepth::bits(b),
            Raw::Named(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Bit depth plus dynamic range `[-range, range]` of the converter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    pub bit_depth: BitDepth,
    pub dynamic_range: f64,
}

impl QuantizerConfig {
    pub fn new(bit_depth: BitDepth, dynamic_range: f64) -> Result<Self> {
        if !(dynamic_range.is_finite() && dynamic_range > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dynamic range must be positive and finite, got {dynamic_range}"
            )));
        }
        Ok(Self {
            bit_depth,
            dynamic_range,
        })
    }

    pub fn unquantized() -> Self {
        Self {
            bit_depth: BitDepth::Unquantized,
            dynamic_range: 1.0,
        }
    }

    pub fn is_quantized(&self) -> bool {
        self.bit_depth.is_quantized()
    }

    /// Quantization step `alpha_b * range`; `None` when unquantized.
    pub fn step(&self) -> Option<f64> {
        self.bit_depth
            .alpha()
            .map(|alpha| alpha * self.dynamic_range)
    }

    pub(crate) fn require_step(&self) -> Result<f64> {
        self.step().ok_or(Error::NotQuantized)
    }

    pub(crate) fn grid(&self) -> Option<Grid> {
        self.step().map(|step| Grid {
            step,
            top: self.dynamic_range,
        })
    }

    pub(crate) fn require_grid(&self) -> Result<Grid> {
        self.grid().ok_or(Error::NotQuantized)
    }
}

/// Step and upper range edge of a quantized configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Grid {
    pub step: f64,
    pub top: f64,
}

impl Grid {
    #[inline]
    pub fn level(&self, x: f64) -> f64 {
        let mut cell = (x / self.step).floor();
        // The range edge `top` closes the highest cell. Every value in a cell
        // must map to the same level bit for bit, so the edge reuses the formula.
        let top_cell = (self.top / self.step).round() - 1.0;
        if x <= self.top && cell > top_cell {
            cell = top_cell;
        }
        self.step * cell + self.step / 2.0
    }

    #[inline]
    pub fn level_complex(&self, z: Complex) -> Complex {
        Complex::new(self.level(z.re), self.level(z.im))
    }

    /// Nearest output level.
    #[inline]
    pub fn snap(&self, x: f64) -> f64 {
        self.step * ((x - self.step / 2.0) / self.step).round() + self.step / 2.0
    }
}

pub fn quantize_scalar(cfg: &QuantizerConfig, x: f64) -> Result<f64> {
    Ok(cfg.require_grid()?.level(x))
}

/// Quantizes real and imaginary parts independently.
pub fn quantize_complex(cfg: &QuantizerConfig, v: &[Complex]) -> Result<Vec<Complex>> {
    let grid = cfg.require_grid()?;
    Ok(v.iter().map(|&z| grid.level_complex(z)).collect())
}

/// Largest real or imaginary magnitude, the span the quantizer actually sees.
pub fn component_inf_norm(v: &[Complex]) -> f64 {
    v.iter()
        .map(|z| z.re.abs().max(z.im.abs()))
        .fold(0.0, f64::max)
}

/// Smallest dynamic range covering `r`. With dither, the range also absorbs
/// the `step / 2` excursion, `range - step / 2 = ||r||_inf`, which solves to
/// `range = ||r||_inf / (1 - 2^-b)`.
pub fn dynamic_range_for(r: &[Complex], bit_depth: BitDepth, dithered: bool) -> Result<f64> {
    let peak = component_inf_norm(r);
    if peak <= 0.0 || !peak.is_finite() {
        return Err(Error::InvalidParameter(
            "cannot fit a dynamic range to an all-zero signal".into(),
        ));
    }
    Ok(match bit_depth {
        BitDepth::Bits(b) if dithered => peak / (1.0 - 2f64.powi(-(b as i32))),
        _ => peak,
    })
}

/// Complex dither vector, paired with the seed that produced it when synthetic.
#[derive(Debug, Clone, PartialEq)]
pub struct Dither {
    values: Vec<Complex>,
    seed: Option<u64>,
    step: f64,
}

/// JSON form of a dither: regenerable from a seed, or recorded verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DitherSpec {
    Seeded { seed: u64, delta: f64 },
    Recorded { values: Vec<[f64; 2]> },
}

impl Dither {
    /// Wraps dither values recorded on hardware.
    pub fn recorded(values: Vec<Complex>, step: f64) -> Result<Self> {
        let half = step / 2.0;
        if let Some(v) = values
            .iter()
            .find(|v| !(v.re.abs() < half && v.im.abs() < half))
        {
            return Err(Error::InvalidParameter(format!(
                "dither value {v} outside the open cell (-{half}, {half})"
            )));
        }
        Ok(Self {
            values,
            seed: None,
            step,
        })
    }

    pub fn values(&self) -> &[Complex] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn to_spec(&self) -> DitherSpec {
        match self.seed {
            Some(seed) => DitherSpec::Seeded {
                seed,
                delta: self.step,
            },
            None => DitherSpec::Recorded {
                values: self.values.iter().map(|v| [v.re, v.im]).collect(),
            },
        }
    }

    pub fn from_spec(spec: &DitherSpec, cfg: &QuantizerConfig, n_meas: usize) -> Result<Self> {
        let step = cfg.require_step()?;
        match spec {
            DitherSpec::Seeded { seed, delta } => {
                if (delta - step).abs() > 1e-12 * step {
                    return Err(Error::InvalidParameter(format!(
                        "dither step {delta} does not match quantizer step {step}"
                    )));
                }
                draw_dither(cfg, n_meas, *seed)
            }
            DitherSpec::Recorded { values } => {
                check_len("dither", n_meas, values.len())?;
                Dither::recorded(
                    values
                        .iter()
                        .map(|&[re, im]| Complex::new(re, im))
                        .collect(),
                    step,
                )
            }
        }
    }
}

fn open_uniform<R: Rng + ?Sized>(rng: &mut R, step: f64) -> f64 {
    // u in (0, 1) keeps the value strictly inside the cell.
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return (u - 0.5) * step;
        }
    }
}

/// `M` complex dither values with i.i.d. `U(-step/2, step/2)` components.
pub fn draw_dither(cfg: &QuantizerConfig, n_meas: usize, seed: u64) -> Result<Dither> {
    let step = cfg.require_step()?;
    let mut rng = rng_from_seed(seed);
    let values = (0..n_meas)
        .map(|_| {
            let re = open_uniform(&mut rng, step);
            let im = open_uniform(&mut rng, step);
            Complex::new(re, im)
        })
        .collect();
    Ok(Dither {
        values,
        seed: Some(seed),
        step,
    })
}

/// The acquisition map `a -> Q(Phi a + xi)` for a fixed plan, quantizer and
/// dither. In unquantized mode it is `Phi` itself.
#[derive(Debug, Clone)]
pub struct Sensor {
    op: PartialFourier,
    cfg: QuantizerConfig,
    dither: Option<Dither>,
}

impl Sensor {
    pub fn new(plan: &SamplingPlan, cfg: QuantizerConfig, dither: Option<Dither>) -> Result<Self> {
        Self::with_operator(PartialFourier::new(plan), cfg, dither)
    }

    pub fn with_operator(
        op: PartialFourier,
        cfg: QuantizerConfig,
        dither: Option<Dither>,
    ) -> Result<Self> {
        if let Some(d) = &dither {
            if !cfg.is_quantized() {
                return Err(Error::InvalidParameter(
                    "a dither only applies to quantized sensing".into(),
                ));
            }
            check_len("dither", op.n_meas(), d.len())?;
        }
        Ok(Self { op, cfg, dither })
    }

    pub fn operator(&self) -> &PartialFourier {
        &self.op
    }

    pub fn config(&self) -> &QuantizerConfig {
        &self.cfg
    }

    pub fn dither(&self) -> Option<&Dither> {
        self.dither.as_ref()
    }

    pub fn is_dithered(&self) -> bool {
        self.dither.is_some()
    }

    /// Quantizes already-computed pre-quantization samples `r`.
    pub fn quantize(&self, mut r: Vec<Complex>) -> Result<Vec<Complex>> {
        check_len("measurement vector", self.op.n_meas(), r.len())?;
        let Some(grid) = self.cfg.grid() else {
            return Ok(r);
        };
        match &self.dither {
            Some(d) => {
                for (z, xi) in r.iter_mut().zip(d.values()) {
                    *z = grid.level_complex(*z + xi);
                }
            }
            None => {
                for z in r.iter_mut() {
                    *z = grid.level_complex(*z);
                }
            }
        }
        Ok(r)
    }

    pub fn sense(&self, a: &[Complex]) -> Result<Vec<Complex>> {
        self.quantize(self.op.forward(a)?)
    }
}

/// One-shot `y = Q(Phi a + xi)`.
pub fn sense(
    plan: &SamplingPlan,
    cfg: &QuantizerConfig,
    dither: Option<&Dither>,
    a: &RangeProfile,
) -> Result<Vec<Complex>> {
    check_len("range profile", plan.n_bins(), a.n_bins())?;
    Sensor::new(plan, *cfg, dither.cloned())?.sense(a.amplitudes())
}
