// Write a synthetic capture to disk, read it back and recover the programmed
// targets.

use qcs_radar::cli_io::{
    generate_capture, read_capture, recover_capture, write_capture, CaptureSpec,
};
use qcs_radar::{Algorithm, RecoveryConfig, Result};

pub fn run_example() -> Result<()> {
    let path =
        std::env::temp_dir().join(format!("qcs-capture-example-{}.json", std::process::id()));
    let spec = CaptureSpec {
        record_dither_values: true,
        seed: 21,
        ..CaptureSpec::default()
    };
    let (capture, truth) = generate_capture(&spec)?;
    write_capture(&path, &capture)?;

    let loaded = read_capture(&path)?;
    let report = recover_capture(
        &loaded,
        Algorithm::Qiht,
        &RecoveryConfig::new(spec.sparsity),
    )?;
    println!("programmed support {:?}", truth.support());
    for t in &report.targets {
        println!(
            "bin {:3} at {:7.2} m, |a| = {:.3}",
            t.bin,
            t.range_m,
            t.amplitude[0].hypot(t.amplitude[1])
        );
    }
    println!("TPR {:?}", report.tpr);

    let _ = std::fs::remove_file(&path);
    let _ = std::fs::remove_file(path.with_extension("iq"));
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
