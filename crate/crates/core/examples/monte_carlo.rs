// A small Monte Carlo grid comparing dithered and undithered 1-bit PBP
// across bit-rates, written as CSV to stdout.

use qcs_radar::cli_io::write_results_to;
use qcs_radar::evaluation::{run_grid, ExperimentConfig};
use qcs_radar::Result;

pub fn run_example() -> Result<()> {
    let mut cfg = ExperimentConfig::new(vec![2]);
    cfg.bitrates = vec![1 << 8, 1 << 10, 1 << 12];
    cfg.dithered = vec![false, true];
    cfg.trials = 100;
    let results = run_grid(&cfg)?;
    write_results_to(&results, std::io::stdout().lock())?;
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
