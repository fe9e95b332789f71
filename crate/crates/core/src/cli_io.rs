//! Configuration files, result tables and baseband capture files.
//!
//! A capture is a JSON sidecar plus a binary payload of little-endian `f32`
//! samples, interleaved `I, Q`. The sidecar carries everything needed to
//! rebuild the acquisition chain:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "n_bins": 256, "n_meas": 8192,
//!   "plan_seed": 17,
//!   "bit_depth": 1, "dynamic_range": 2.31,
//!   "dither": {"seed": 99, "delta": 2.31},
//!   "radar": {"f0": 24e9, "bandwidth": 1.5e8, "ramp_duration": 1e-3, "n_bins": 256},
//!   "payload": "scene.iq"
//! }
//! ```
//!
//! `omega` may replace `plan_seed`, and `dither` may hold recorded `values`
//! or be `null` for undithered captures.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{tpr, AggregateResult, ExperimentConfig};
use crate::quantization::{
    draw_dither, dynamic_range_for, BitDepth, Dither, DitherSpec, QuantizerConfig, Sensor,
};
use crate::recovery::{Algorithm, Decoder, RecoveryConfig, StopReason};
use crate::seed::{purpose_seed, rng_from_seed, Purpose};
use crate::signal_model::{
    bin_to_range, index_to_bin, make_sampling_plan, random_profile, Complex, PartialFourier,
    RadarParams, RangeProfile, SamplingPlan,
};

pub const CAPTURE_SCHEMA_VERSION: u32 = 1;

/// Off-grid tolerance for quantized payload samples, in steps.
const GRID_TOLERANCE: f64 = 1e-3;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and validates an experiment config, filling defaults.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    parse_config_str(&read_text(path)?).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub const RESULTS_HEADER: [&str; 10] = [
    "K",
    "b",
    "log2_bitrate",
    "M",
    "dithered",
    "algorithm",
    "trials",
    "mean_tpr_pct",
    "stderr_pct",
    "mean_l2_error",
];

/// Writes aggregates as CSV, sorted by algorithm, dithering, bit depth,
/// sparsity and bit-rate.
pub fn write_results_to<W: Write>(records: &[AggregateResult], out: W) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("no results to write".into()));
    }
    let mut sorted: Vec<&AggregateResult> = records.iter().collect();
    sorted.sort_by_key(|r| r.point);
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(RESULTS_HEADER)?;
    for r in sorted {
        let p = &r.point;
        writer.write_record([
            p.sparsity.to_string(),
            p.bit_depth.to_string(),
            p.log2_bitrate().to_string(),
            p.n_meas.to_string(),
            p.dithered.to_string(),
            p.algorithm.to_string(),
            r.trials.to_string(),
            r.mean_tpr.to_string(),
            r.stderr.to_string(),
            r.mean_l2_error.to_string(),
        ])?;
    }
    writer.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_results(records: &[AggregateResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_results_to(records, std::io::BufWriter::new(file)).map_err(|e| match e {
        Error::Csv(inner) => Error::Capture(format!("{}: {inner}", path.display())),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaptureHeader {
    schema_version: u32,
    n_bins: usize,
    n_meas: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    plan_seed: Option<u64>,
    bit_depth: BitDepth,
    dynamic_range: f64,
    dither: Option<DitherSpec>,
    radar: RadarParams,
    payload: String,
    /// Vector indices of the targets programmed into the scene, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    programmed_support: Option<Vec<usize>>,
}

/// A recorded (or synthesized) acquisition ready for replay.
#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub plan: SamplingPlan,
    pub quantizer: QuantizerConfig,
    pub dither: Option<Dither>,
    pub samples: Vec<Complex>,
    pub radar: RadarParams,
    pub programmed_support: Option<Vec<usize>>,
    /// Store the sampling plan as an explicit index list instead of its seed.
    pub inline_omega: bool,
}

fn payload_path(sidecar: &Path) -> PathBuf {
    sidecar.with_extension("iq")
}

/// Writes `<path>` (JSON sidecar) and the payload next to it with an `.iq`
/// extension. Output is byte-identical for identical captures.
pub fn write_capture(path: impl AsRef<Path>, capture: &Capture) -> Result<()> {
    let path = path.as_ref();
    let payload = payload_path(path);
    if payload == path {
        return Err(Error::Capture(format!(
            "{}: sidecar must not use the .iq extension",
            path.display()
        )));
    }
    let header = CaptureHeader {
        schema_version: CAPTURE_SCHEMA_VERSION,
        n_bins: capture.plan.n_bins(),
        n_meas: capture.plan.n_meas(),
        omega: capture.inline_omega.then(|| capture.plan.omega().to_vec()),
        plan_seed: Some(capture.plan.seed()),
        bit_depth: capture.quantizer.bit_depth,
        dynamic_range: capture.quantizer.dynamic_range,
        dither: capture.dither.as_ref().map(Dither::to_spec),
        radar: capture.radar,
        payload: payload
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Capture(format!("{}: bad file name", path.display())))?
            .to_string(),
        programmed_support: capture.programmed_support.clone(),
    };
    let mut bytes = Vec::with_capacity(capture.samples.len() * 8);
    for z in &capture.samples {
        bytes.extend_from_slice(&(z.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    fs::write(&payload, bytes).map_err(|e| Error::io(&payload, e))?;
    let text = serde_json::to_string_pretty(&header)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_capture(path: impl AsRef<Path>) -> Result<Capture> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let raw: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Capture(format!("{}: {e}", path.display())))?;
    match raw.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == CAPTURE_SCHEMA_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::Capture(format!(
                "{}: unknown schema version {v}",
                path.display()
            )))
        }
        None => {
            return Err(Error::Capture(format!(
                "{}: missing schema_version",
                path.display()
            )))
        }
    }
    let header: CaptureHeader = serde_json::from_value(raw)
        .map_err(|e| Error::Capture(format!("{}: {e}", path.display())))?;
    header.radar.validate()?;

    let plan = match (&header.omega, header.plan_seed) {
        (Some(omega), _) => {
            SamplingPlan::from_omega(header.n_bins, omega.clone(), header.plan_seed.unwrap_or(0))?
        }
        (None, Some(seed)) => make_sampling_plan(header.n_bins, header.n_meas, seed)?,
        (None, None) => {
            return Err(Error::Capture(format!(
                "{}: need either omega or plan_seed",
                path.display()
            )))
        }
    };
    if plan.n_meas() != header.n_meas {
        return Err(Error::Capture(format!(
            "{}: omega has {} entries, n_meas is {}",
            path.display(),
            plan.n_meas(),
            header.n_meas
        )));
    }
    let quantizer = match header.bit_depth {
        BitDepth::Unquantized => QuantizerConfig::unquantized(),
        bits => QuantizerConfig::new(bits, header.dynamic_range)?,
    };
    let dither = header
        .dither
        .as_ref()
        .map(|spec| Dither::from_spec(spec, &quantizer, header.n_meas))
        .transpose()?;

    let payload = path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&header.payload);
    let bytes = fs::read(&payload).map_err(|e| Error::io(&payload, e))?;
    let expected = header.n_meas * 8;
    if bytes.len() != expected {
        return Err(Error::Capture(format!(
            "{}: payload length mismatch, expected {} f32 values, found {} bytes",
            payload.display(),
            2 * header.n_meas,
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let mut samples: Vec<Complex> = values
        .chunks_exact(2)
        .map(|iq| Complex::new(iq[0], iq[1]))
        .collect();

    // Quantized samples are stored in single precision; put them back on the
    // exact f64 grid so re-quantized estimates compare equal.
    if let Some(grid) = quantizer.grid() {
        let mut off_grid = 0usize;
        for z in &mut samples {
            let snapped = Complex::new(grid.snap(z.re), grid.snap(z.im));
            if (snapped.re - z.re).abs() > GRID_TOLERANCE * grid.step
                || (snapped.im - z.im).abs() > GRID_TOLERANCE * grid.step
            {
                off_grid += 1;
            }
            *z = snapped;
        }
        if off_grid > 0 {
            log::warn!(
                "{}: {off_grid} of {} samples are off the quantizer grid; snapped to nearest level",
                payload.display(),
                samples.len()
            );
        }
    }

    Ok(Capture {
        plan,
        quantizer,
        dither,
        samples,
        radar: header.radar,
        programmed_support: header.programmed_support,
        inline_omega: header.omega.is_some(),
    })
}

/// Parameters of a synthetic capture.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureSpec {
    pub radar: RadarParams,
    pub sparsity: usize,
    pub bit_depth: BitDepth,
    pub n_meas: usize,
    pub dithered: bool,
    /// Store dither values instead of the dither seed.
    pub record_dither_values: bool,
    pub inline_omega: bool,
    pub seed: u64,
}

impl Default for CaptureSpec {
    fn default() -> Self {
        Self {
            radar: RadarParams::default(),
            sparsity: 2,
            bit_depth: BitDepth::Bits(1),
            n_meas: 8192,
            dithered: true,
            record_dither_values: false,
            inline_omega: false,
            seed: 0,
        }
    }
}

/// Simulates one acquisition of a random `K`-target scene. Returns the
/// capture and the programmed profile.
pub fn generate_capture(spec: &CaptureSpec) -> Result<(Capture, RangeProfile)> {
    spec.radar.validate()?;
    let n = spec.radar.n_bins;
    let profile = random_profile(
        n,
        spec.sparsity,
        &mut rng_from_seed(purpose_seed(spec.seed, &[], Purpose::Scene)),
    )?;
    let plan = make_sampling_plan(n, spec.n_meas, purpose_seed(spec.seed, &[], Purpose::Plan))?;
    let op = PartialFourier::new(&plan);
    let r = op.forward(profile.amplitudes())?;
    let quantizer = match spec.bit_depth {
        BitDepth::Unquantized => QuantizerConfig::unquantized(),
        bits => QuantizerConfig::new(bits, dynamic_range_for(&r, bits, spec.dithered)?)?,
    };
    let dither = if spec.dithered && quantizer.is_quantized() {
        let drawn = draw_dither(
            &quantizer,
            spec.n_meas,
            purpose_seed(spec.seed, &[], Purpose::Dither),
        )?;
        Some(if spec.record_dither_values {
            Dither::recorded(drawn.values().to_vec(), drawn.step())?
        } else {
            drawn
        })
    } else {
        None
    };
    let sensor = Sensor::with_operator(op, quantizer, dither.clone())?;
    let samples = sensor.quantize(r)?;
    Ok((
        Capture {
            plan,
            quantizer,
            dither,
            samples,
            radar: spec.radar,
            programmed_support: Some(profile.support()),
            inline_omega: spec.inline_omega,
        },
        profile,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedTarget {
    /// Range bin in `1..=N`.
    pub bin: usize,
    pub range_m: f64,
    pub amplitude: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub algorithm: Algorithm,
    pub sparsity: usize,
    pub targets: Vec<DetectedTarget>,
    pub iterations: usize,
    pub final_consistency: f64,
    pub stop_reason: StopReason,
    /// Present when the capture records its programmed support.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tpr: Option<f64>,
}

/// Runs a decoder on a capture and reports the detected targets by range.
pub fn recover_capture(
    capture: &Capture,
    algorithm: Algorithm,
    rc: &RecoveryConfig,
) -> Result<RecoveryReport> {
    let sensor = Sensor::new(&capture.plan, capture.quantizer, capture.dither.clone())?;
    let result = Decoder::new(sensor).recover(algorithm, &capture.samples, rc)?;
    let n = capture.plan.n_bins();
    let mut targets = result
        .estimate
        .support()
        .into_iter()
        .map(|idx| {
            let bin = index_to_bin(idx, n);
            let a = result.estimate.amplitudes()[idx];
            Ok(DetectedTarget {
                bin,
                range_m: bin_to_range(&capture.radar, bin)?,
                amplitude: [a.re, a.im],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    targets.sort_by_key(|t| t.bin);
    let tpr = match &capture.programmed_support {
        Some(truth) if !truth.is_empty() => {
            Some(tpr(truth, &result.estimate.support(), truth.len())?)
        }
        _ => None,
    };
    Ok(RecoveryReport {
        algorithm,
        sparsity: rc.sparsity,
        targets,
        iterations: result.iterations_run,
        final_consistency: result.final_consistency,
        stop_reason: result.stop_reason,
        tpr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::GridPoint;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config_str(r#"{"sparsities":[2]}"#).unwrap();
        assert_eq!(cfg, ExperimentConfig::new(vec![2]));
        assert_eq!(cfg.n_bins, 256);
        assert_eq!(cfg.trials, 2000);
        assert_eq!(cfg.mu, 1.0);
        assert_eq!(cfg.consistency_target, 1.0);
    }

    #[test]
    fn config_round_trip() {
        let cfg = ExperimentConfig::new(vec![2, 10]);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_config_str(&text).unwrap(), cfg);
    }

    #[test]
    fn config_errors_name_the_field() {
        let err = parse_config_str(r#"{"bit_depths":[3], "bitrates":[10], "sparsities":[2]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("10/3"), "{err}");
        let err = parse_config_str(r#"{"sparsities":[2], "trails": 5}"#).unwrap_err();
        assert!(err.to_string().contains("trails"), "{err}");
        let err = parse_config_str(r#"{"sparsities":[0]}"#).unwrap_err();
        assert!(err.to_string().contains("sparsities"), "{err}");
        assert!(parse_config_str(r#"{}"#)
            .unwrap_err()
            .to_string()
            .contains("sparsities"));
    }

    #[test]
    fn scalar_or_list_fields() {
        let cfg = parse_config_str(r#"{"sparsities":[2], "dithered": false, "algorithm": "qiht"}"#)
            .unwrap();
        assert_eq!(cfg.dithered, vec![false]);
        assert_eq!(cfg.algorithm, vec![Algorithm::Qiht]);
        let cfg =
            parse_config_str(r#"{"sparsities":[2], "bit_depths":[1, "unquantized"]}"#).unwrap();
        assert_eq!(
            cfg.bit_depths,
            vec![BitDepth::Bits(1), BitDepth::Unquantized]
        );
    }

    #[test]
    fn missing_config_file() {
        let err = parse_config("/definitely/not/here.json").unwrap_err();
        assert_eq!(err.kind(), "io");
    }

    fn agg(k: usize, algorithm: Algorithm) -> AggregateResult {
        AggregateResult {
            point: GridPoint::new(k, BitDepth::Bits(1), 256, true, algorithm),
            trials: 10,
            mean_tpr: 95.0,
            stderr: 1.5,
            mean_l2_error: 0.25,
        }
    }

    #[test]
    fn csv_single_row() {
        let mut out = Vec::new();
        write_results_to(&[agg(2, Algorithm::Pbp)], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "K,b,log2_bitrate,M,dithered,algorithm,trials,mean_tpr_pct,stderr_pct,mean_l2_error\n\
             2,1,8,256,true,pbp,10,95,1.5,0.25\n"
        );
        assert!(write_results_to(&[], Vec::new()).is_err());
    }

    #[test]
    fn csv_rows_sorted() {
        let mut out = Vec::new();
        let rows = [
            agg(10, Algorithm::Qiht),
            agg(10, Algorithm::Pbp),
            agg(2, Algorithm::Pbp),
        ];
        write_results_to(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let keys: Vec<(String, String)> = text
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (f[5].to_string(), f[0].to_string())
            })
            .collect();
        assert_eq!(
            keys,
            vec![
                ("pbp".into(), "2".into()),
                ("pbp".into(), "10".into()),
                ("qiht".into(), "10".into())
            ]
        );
    }

    #[test]
    fn capture_round_trip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        for (record, inline) in [(false, false), (true, true)] {
            let spec = CaptureSpec {
                radar: RadarParams {
                    n_bins: 64,
                    ..RadarParams::default()
                },
                n_meas: 300,
                record_dither_values: record,
                inline_omega: inline,
                seed: 4,
                ..CaptureSpec::default()
            };
            let (capture, _) = generate_capture(&spec).unwrap();
            let path = dir.path().join("scene.json");
            write_capture(&path, &capture).unwrap();
            assert_eq!(read_capture(&path).unwrap(), capture);
            let first = fs::read(dir.path().join("scene.iq")).unwrap();
            write_capture(&path, &capture).unwrap();
            assert_eq!(fs::read(dir.path().join("scene.iq")).unwrap(), first);

            let mut short = first.clone();
            short.truncate(first.len() - 4);
            fs::write(dir.path().join("scene.iq"), short).unwrap();
            let err = read_capture(&path).unwrap_err();
            assert!(err.to_string().contains("length mismatch"), "{err}");
        }
    }

    #[test]
    fn unknown_schema_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CaptureSpec {
            radar: RadarParams {
                n_bins: 32,
                ..RadarParams::default()
            },
            n_meas: 64,
            ..CaptureSpec::default()
        };
        let (capture, _) = generate_capture(&spec).unwrap();
        let path = dir.path().join("c.json");
        write_capture(&path, &capture).unwrap();
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"schema_version\": 1", "\"schema_version\": 7");
        fs::write(&path, text).unwrap();
        assert!(read_capture(&path)
            .unwrap_err()
            .to_string()
            .contains("schema version 7"));
    }

    #[test]
    fn off_grid_samples_are_snapped() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CaptureSpec {
            radar: RadarParams {
                n_bins: 32,
                ..RadarParams::default()
            },
            n_meas: 64,
            dithered: false,
            ..CaptureSpec::default()
        };
        let (mut capture, _) = generate_capture(&spec).unwrap();
        let clean = capture.samples.clone();
        capture.samples[0] *= 1.01;
        let path = dir.path().join("c.json");
        write_capture(&path, &capture).unwrap();
        let back = read_capture(&path).unwrap().samples;
        for (i, (a, b)) in back.iter().zip(&clean).enumerate() {
            assert_eq!(a, b, "sample {i}");
        }
    }

    #[test]
    fn unquantized_capture_keeps_f32_samples() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CaptureSpec {
            radar: RadarParams {
                n_bins: 32,
                ..RadarParams::default()
            },
            bit_depth: BitDepth::Unquantized,
            n_meas: 20,
            ..CaptureSpec::default()
        };
        let (capture, _) = generate_capture(&spec).unwrap();
        assert!(capture.dither.is_none());
        let path = dir.path().join("c.json");
        write_capture(&path, &capture).unwrap();
        let back = read_capture(&path).unwrap();
        for (a, b) in capture.samples.iter().zip(&back.samples) {
            assert_eq!(a.re as f32, b.re as f32);
            assert_eq!(a.im as f32, b.im as f32);
        }
    }

    #[test]
    fn synthetic_scene_recovered() {
        let spec = CaptureSpec {
            seed: 11,
            ..CaptureSpec::default()
        };
        let (capture, truth) = generate_capture(&spec).unwrap();
        let report = recover_capture(&capture, Algorithm::Qiht, &RecoveryConfig::new(2)).unwrap();
        assert_eq!(report.tpr, Some(1.0));
        let bins: Vec<usize> = truth
            .support()
            .iter()
            .map(|&i| index_to_bin(i, 256))
            .collect();
        let mut found: Vec<usize> = report.targets.iter().map(|t| t.bin).collect();
        found.sort();
        let mut expected = bins.clone();
        expected.sort();
        assert_eq!(found, expected);
        for t in &report.targets {
            assert!((t.range_m - t.bin as f64 * capture.radar.resolution()).abs() < 1e-9);
        }
    }
}
