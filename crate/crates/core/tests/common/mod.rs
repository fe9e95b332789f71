// Brute-force reference implementations shared by the integration tests.
// Nothing here calls into the library's numerics.

#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64 as C;

/// `r[j] = sum_n a[n] exp(-i 2 pi omega[j] n / N)` by double loop.
pub fn forward(omega: &[usize], a: &[C]) -> Vec<C> {
    let n = a.len() as f64;
    omega
        .iter()
        .map(|&w| {
            a.iter()
                .enumerate()
                .map(|(k, &ak)| ak * C::from_polar(1.0, -2.0 * PI * ((w * k) % a.len()) as f64 / n))
                .sum()
        })
        .collect()
}

/// `x[n] = sum_j y[j] exp(+i 2 pi omega[j] n / N)` by double loop.
pub fn adjoint(omega: &[usize], y: &[C], n_bins: usize) -> Vec<C> {
    let n = n_bins as f64;
    (0..n_bins)
        .map(|k| {
            omega
                .iter()
                .zip(y)
                .map(|(&w, &yj)| yj * C::from_polar(1.0, 2.0 * PI * ((w * k) % n_bins) as f64 / n))
                .sum()
        })
        .collect()
}

/// Keeps the `k` largest moduli after a full stable sort; equal moduli keep
/// index order.
pub fn threshold(v: &[C], k: usize) -> Vec<C> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[j].norm_sqr().partial_cmp(&v[i].norm_sqr()).unwrap());
    let mut out = vec![C::new(0.0, 0.0); v.len()];
    for &i in &idx[..k] {
        out[i] = v[i];
    }
    out
}

/// Cell index of the mid-rise quantizer found by scanning cell boundaries
/// `j * step`. The top edge `x == range` belongs to the cell below it.
pub fn cell(x: f64, step: f64, range: f64) -> i64 {
    if x == range {
        return (range / step).round() as i64 - 1;
    }
    let mut j = (x / step) as i64 - 2;
    while (j + 1) as f64 * step <= x {
        j += 1;
    }
    while j as f64 * step > x {
        j -= 1;
    }
    j
}

/// Reconstruction level nearest to `x` among `{(j + 1/2) step}`.
pub fn level(x: f64, step: f64, range: f64) -> f64 {
    (cell(x, step, range) as f64 + 0.5) * step
}

/// Cell index of a value already on the level grid.
pub fn cell_of_level(q: f64, step: f64) -> i64 {
    (q / step - 0.5).round() as i64
}

/// Matching samples, both components compared by cell index.
pub fn consistent_count(predicted: &[C], observed: &[C], step: f64, range: f64) -> usize {
    predicted
        .iter()
        .zip(observed)
        .filter(|(p, o)| {
            cell(p.re, step, range) == cell_of_level(o.re, step)
                && cell(p.im, step, range) == cell_of_level(o.im, step)
        })
        .count()
}

/// Length of the overlap of `[a0, a1)` and `[b0, b1)`.
pub fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// For 1-bit quantization with step `d` and dither uniform on
/// `(-d/2, d/2)`: probability that the zero input and input `r` fall into
/// the same cell.
pub fn one_bit_zero_match(r: f64, d: f64) -> f64 {
    let low = overlap(-d / 2.0, 0.0, -d - r, -r);
    let high = overlap(0.0, d / 2.0, -r, d - r);
    (low + high) / d
}

pub fn max_abs_diff(a: &[C], b: &[C]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Median of a sample, averaging the two middle values for even lengths.
pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Worst discrepancies between the library and the brute-force oracles over
/// random small instances.
#[derive(Debug, Default)]
pub struct OracleReport {
    pub instances: usize,
    pub forward_err: f64,
    pub adjoint_err: f64,
    pub threshold_mismatches: usize,
    pub consistency_mismatches: usize,
}

/// Random instances with `N <= 16`: arbitrary frequency lists (repeats
/// allowed), bit depths 1..=4, with and without dither.
pub fn oracle_equivalence(instances: usize, seed: u64) -> OracleReport {
    use qcs_radar::quantization::{draw_dither, dynamic_range_for};
    use qcs_radar::recovery::{consistency, hard_threshold};
    use qcs_radar::signal_model::{adjoint as lib_adjoint, forward as lib_forward};
    use qcs_radar::{BitDepth, QuantizerConfig, RangeProfile, SamplingPlan, Sensor};
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport {
        instances,
        ..OracleReport::default()
    };
    let rc = |rng: &mut rand_chacha::ChaCha8Rng| {
        C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    };

    for t in 0..instances {
        let n = rng.gen_range(1..=16usize);
        let m = rng.gen_range(1..=48usize);
        let omega: Vec<usize> = (0..m).map(|_| rng.gen_range(0..n)).collect();
        let plan = SamplingPlan::from_omega(n, omega.clone(), t as u64).unwrap();

        let a: Vec<C> = (0..n).map(|_| rc(&mut rng)).collect();
        let y: Vec<C> = (0..m).map(|_| rc(&mut rng)).collect();
        let profile = RangeProfile::new(a.clone()).unwrap();
        report.forward_err = report.forward_err.max(max_abs_diff(
            &lib_forward(&plan, &profile).unwrap(),
            &forward(&omega, &a),
        ));
        report.adjoint_err = report.adjoint_err.max(max_abs_diff(
            &lib_adjoint(&plan, &y).unwrap(),
            &adjoint(&omega, &y, n),
        ));

        // Coarse values make ties in modulus common.
        let coarse: Vec<C> = a
            .iter()
            .map(|z| C::new((z.re * 2.0).round() / 2.0, (z.im * 2.0).round() / 2.0))
            .collect();
        let k = rng.gen_range(1..=n);
        for v in [&a, &coarse] {
            if hard_threshold(v, k).unwrap() != threshold(v, k) {
                report.threshold_mismatches += 1;
            }
        }

        let bits = rng.gen_range(1..=4u32);
        let depth = BitDepth::bits(bits).unwrap();
        let dithered = rng.gen_bool(0.5);
        let truth_k = rng.gen_range(1..=n);
        let truth = threshold(&a, truth_k);
        let clean = forward(&omega, &truth);
        if clean.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
            continue;
        }
        let range = dynamic_range_for(&clean, depth, dithered).unwrap();
        let cfg = QuantizerConfig::new(depth, range).unwrap();
        let step = cfg.step().unwrap();
        let dither = dithered.then(|| draw_dither(&cfg, m, t as u64).unwrap());
        let sensor = Sensor::new(&plan, cfg, dither.clone()).unwrap();
        let observed = sensor.sense(&truth).unwrap();

        let estimate: Vec<C> = truth
            .iter()
            .map(|z| {
                if *z == C::new(0.0, 0.0) {
                    *z
                } else {
                    z + rc(&mut rng) * 0.2
                }
            })
            .collect();
        let lib = consistency(
            &plan,
            &cfg,
            dither.as_ref(),
            &observed,
            &RangeProfile::new(estimate.clone()).unwrap(),
        )
        .unwrap();
        let mut predicted = forward(&omega, &estimate);
        if let Some(d) = &dither {
            for (p, x) in predicted.iter_mut().zip(d.values()) {
                *p += x;
            }
        }
        let count = consistent_count(&predicted, &observed, step, range);
        if lib != count as f64 / m as f64 {
            report.consistency_mismatches += 1;
        }
    }
    report
}
