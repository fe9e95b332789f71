// Recover a two-target scene from 1-bit dithered measurements with PBP and
// QIHT.

use qcs_radar::quantization::{draw_dither, dynamic_range_for};
use qcs_radar::signal_model::make_sampling_plan;
use qcs_radar::{
    Algorithm, BitDepth, Complex, Decoder, QuantizerConfig, RangeProfile, RecoveryConfig, Result,
    Sensor,
};

pub fn run_example() -> Result<()> {
    let n = 256;
    let truth = RangeProfile::from_targets(
        n,
        &[
            (40, Complex::from_polar(1.0, 0.3)),
            (97, Complex::from_polar(1.0, -2.0)),
        ],
    )?;
    let plan = make_sampling_plan(n, 2048, 3)?;

    let clean =
        Sensor::new(&plan, QuantizerConfig::unquantized(), None)?.sense(truth.amplitudes())?;
    let cfg = QuantizerConfig::new(
        BitDepth::Bits(1),
        dynamic_range_for(&clean, BitDepth::Bits(1), true)?,
    )?;
    let sensor = Sensor::new(&plan, cfg, Some(draw_dither(&cfg, plan.n_meas(), 9)?))?;
    let y = sensor.quantize(clean)?;

    let decoder = Decoder::new(sensor);
    let rc = RecoveryConfig::new(2);
    for alg in [Algorithm::Pbp, Algorithm::Qiht] {
        let out = decoder.recover(alg, &y, &rc)?;
        println!(
            "{alg}: support {:?}, l2 error {:.4}, consistency {:.4}, {} iterations ({:?})",
            out.estimate.support(),
            out.estimate.l2_distance(&truth)?,
            out.final_consistency,
            out.iterations_run,
            out.stop_reason
        );
        assert_eq!(out.estimate.support(), truth.support());
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
