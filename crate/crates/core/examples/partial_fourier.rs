// Sample a sparse range profile through a random partial Fourier plan and
// check the adjoint against the forward operator.

use qcs_radar::seed::rng_from_seed;
use qcs_radar::signal_model::{bin_to_range, index_to_bin, make_sampling_plan, random_profile};
use qcs_radar::{Complex, PartialFourier, RadarParams, Result};

pub fn run_example() -> Result<()> {
    let radar = RadarParams::default();
    let plan = make_sampling_plan(radar.n_bins, 64, 7)?;
    let op = PartialFourier::new(&plan);

    let profile = random_profile(radar.n_bins, 3, &mut rng_from_seed(11))?;
    for idx in profile.support() {
        let bin = index_to_bin(idx, radar.n_bins);
        println!(
            "target at bin {bin:3} ({:.2} m)",
            bin_to_range(&radar, bin)?
        );
    }

    let r = op.forward(profile.amplitudes())?;
    println!("{} measurements from {} bins", r.len(), op.n_bins());

    // <A a, r> must equal <a, A* r>.
    let back = op.adjoint(&r)?;
    let lhs: Complex = r.iter().map(|z| z.norm_sqr()).sum::<f64>().into();
    let rhs: Complex = profile
        .amplitudes()
        .iter()
        .zip(&back)
        .map(|(a, b)| a.conj() * b)
        .sum();
    println!("adjoint mismatch {:.3e}", (lhs - rhs).norm() / lhs.norm());
    assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm());
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
