//! Periodogram of unevenly sampled data, Welch estimate of uniform data,
//! and the estimated spectral support.

use blgp::bandpass::Band;
use blgp::spectral::{default_frequency_grid, periodogram, support_estimate, welch_uniform};
use blgp::synthetic::{corrupt, make_synthetic, Sampling, SyntheticKind, SyntheticRecipe};

fn main() -> blgp::Result<()> {
    let band = Band::new(0.1, 0.2)?;
    let recipe = SyntheticRecipe {
        kind: SyntheticKind::BandLimitedNoise { band, std: 1.0 },
        length: 2048,
        span: 1024.0,
        sampling: Sampling::Uniform,
    };
    let clean = make_synthetic(&recipe, 4)?.series;

    let welch = welch_uniform(clean.values(), 0.5, 128)?;
    println!(
        "welch: total power {:.3}, outside [0.1, 0.2] {:.4}",
        welch.total_power(),
        welch.fraction_outside(&[band], 1.0 / 64.0)
    );

    let uneven = corrupt(&clean, 0.0, 400, 4)?;
    let psd = periodogram(&uneven, &default_frequency_grid(&uneven)?)?;
    println!(
        "periodogram of 400 random samples: peak at {:.3}, total power {:.3}",
        psd.peak_frequency().unwrap_or(f64::NAN),
        psd.total_power()
    );
    for b in support_estimate(&welch, 0.2)? {
        println!("support band [{:.3}, {:.3}]", b.a(), b.b());
    }
    Ok(())
}
