//! Extract one tone from a noisy two-tone signal with the band-pass
//! posterior and compare with the brick-wall estimate.

use blgp::bandpass::{bandpass_posterior, brick_wall, Band};
use blgp::gp::TimeSeries;
use blgp::kernels::KernelSpec;
use blgp::synthetic::{
    corrupt, make_synthetic, Sampling, Sinusoid, SyntheticKind, SyntheticRecipe,
};
use std::f64::consts::TAU;

fn main() -> blgp::Result<()> {
    let tone = |f: f64| Sinusoid {
        frequency: f,
        amplitude: 1.0,
        phase: 0.0,
    };
    let recipe = SyntheticRecipe {
        kind: SyntheticKind::SinusoidMixture {
            components: vec![tone(0.1), tone(0.4)],
        },
        length: 500,
        span: 100.0,
        sampling: Sampling::Uniform,
    };
    let clean = make_synthetic(&recipe, 0)?.series;
    let obs = corrupt(&clean, 0.1, 250, 0)?;

    let source = KernelSpec::sum(vec![
        KernelSpec::sinc(0.5, 0.1, 0.01)?,
        KernelSpec::sinc(0.5, 0.4, 0.01)?,
    ])?;
    let band = Band::new(0.3, 0.5)?;
    let times = clean.times();
    let post = bandpass_posterior(&obs, &source, band, 0.01, times)?;
    let brick = brick_wall(&obs, band, times);
    let tone: Vec<f64> = times.iter().map(|t| (TAU * 0.4 * t).cos()).collect();
    let rmse = (post
        .mean
        .iter()
        .zip(&tone)
        .map(|(e, x)| (e - x).powi(2))
        .sum::<f64>()
        / times.len() as f64)
        .sqrt();
    // The brick-wall estimate is not scaled for the sampling density, so
    // compare shapes only.
    let corr = |est: &[f64]| {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        dot(est, &tone) / (dot(est, est) * dot(&tone, &tone)).sqrt()
    };
    println!(
        "posterior: RMSE to the 0.4 tone {rmse:.4}, correlation {:.4}",
        corr(&post.mean)
    );
    println!("brick wall: correlation {:.4}", corr(&brick));
    let filtered = TimeSeries::new(times.to_vec(), post.mean)?;
    println!(
        "filtered variance {:.3} (tone alone: 0.5)",
        filtered.variance()
    );
    Ok(())
}
