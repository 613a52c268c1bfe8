//! Noiseless samples on a Nyquist grid: the GP posterior is sinc
//! interpolation and its variance vanishes on the grid.

use blgp::gp::{GPModel, TimeSeries};
use blgp::kernels::KernelSpec;
use blgp::nyquist::{concentration, nyquist_variance, oracle_match, whittaker_mean, NyquistGrid};

fn main() -> blgp::Result<()> {
    let delta = 1.0;
    let grid = NyquistGrid::new(0.0, 32, delta)?;
    let t = grid.times();
    let y: Vec<f64> = t
        .iter()
        .map(|x| (0.3 * x).sin() + 0.5 * (0.11 * x).cos())
        .collect();
    let obs = TimeSeries::new(t.clone(), y)?;

    for q in [10.0, 10.25, 10.5] {
        println!(
            "t = {q:<5} mean {:+.5}  variance {:.5}",
            whittaker_mean(&obs, delta, q)?,
            nyquist_variance(&t, delta, 1.0, q)?
        );
    }
    let model = GPModel::new(KernelSpec::centred_sinc(1.0, delta)?, 0.0)?;
    let query: Vec<f64> = (0..124).map(|i| 0.25 * i as f64 + 0.1).collect();
    let report = oracle_match(&model, &obs, &query)?;
    println!(
        "Cholesky vs closed form: mean {:.1e}, variance {:.1e}",
        report.max_mean_deviation, report.max_variance_deviation
    );
    for n in [25, 100, 400] {
        let c = concentration(&NyquistGrid::new(0.0, n, delta)?, 16)?;
        println!("n = {n:<4} zero-frequency share {:.4}", c.dc_fraction);
    }
    Ok(())
}
