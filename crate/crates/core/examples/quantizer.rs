// Quantize a ramp of values at several bit depths and show that dithering
// makes the average of many 1-bit readings track the input.

use qcs_radar::quantization::{draw_dither, quantize_scalar};
use qcs_radar::{BitDepth, QuantizerConfig, Result};

pub fn run_example() -> Result<()> {
    for bits in [1, 2, 3] {
        let cfg = QuantizerConfig::new(BitDepth::bits(bits)?, 1.0)?;
        let levels: Vec<String> = [-0.9, -0.3, 0.0, 0.3, 0.9]
            .iter()
            .map(|&x| quantize_scalar(&cfg, x).map(|q| format!("{q:+.3}")))
            .collect::<Result<_>>()?;
        println!(
            "b={bits} step={:.3}: {}",
            cfg.step().unwrap_or(0.0),
            levels.join(" ")
        );
    }

    let cfg = QuantizerConfig::new(BitDepth::Bits(1), 1.0)?;
    let draws = 20_000;
    let dither = draw_dither(&cfg, draws, 5)?;
    for x in [-0.7, -0.2, 0.1, 0.6] {
        let mean = dither
            .values()
            .iter()
            .map(|d| quantize_scalar(&cfg, x + d.re))
            .sum::<Result<f64>>()?
            / draws as f64;
        println!("input {x:+.2} -> dithered 1-bit mean {mean:+.4}");
        assert!((mean - x).abs() < 0.05);
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
