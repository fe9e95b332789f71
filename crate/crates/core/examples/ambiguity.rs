// Two scenes that differ by a weaker second target produce identical 1-bit
// measurements without dither. A random dither tells them apart.

use qcs_radar::ambiguity::{
    build_pair, check_margin, dithered_collision_rate, margin, one_bit_config, verify_ac,
};
use qcs_radar::signal_model::make_sampling_plan;
use qcs_radar::Result;

pub fn run_example() -> Result<()> {
    let plan = make_sampling_plan(256, 1024, 0)?;
    let pair = build_pair(256, 64, 10, std::f64::consts::FRAC_PI_4, 0.0, 0.5)?;

    println!(
        "margin {:.4}, gamma {}",
        margin(&plan, &pair.a0)?,
        pair.gamma
    );
    assert!(check_margin(&plan, &pair.a0, pair.gamma)?);

    let cfg = one_bit_config(&plan, &pair, false)?;
    let same = verify_ac(&plan, &cfg, &pair, None)?;
    println!("undithered 1-bit measurements identical: {same}");
    assert!(same);

    let rate = dithered_collision_rate(&plan, &pair, 100, 1)?;
    println!(
        "dithered collision rate over 100 seeds: {:.2}%",
        100.0 * rate
    );
    assert!(rate < 0.05);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
