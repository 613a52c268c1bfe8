//! Recover two channels carried on quadrature carriers from noisy
//! subsamples of their sum.

use blgp::demod::{default_margin, demodulate, interior_rmse, CarrierConfig};
use blgp::synthetic::{corrupt, make_synthetic, Sampling, SyntheticKind, SyntheticRecipe};

fn main() -> blgp::Result<()> {
    let (carrier, delta) = (2.0, 1.0);
    let recipe = SyntheticRecipe {
        kind: SyntheticKind::ModulatedStereo {
            carrier,
            sigma2: 1.0,
            delta,
        },
        length: 400,
        span: 40.0,
        sampling: Sampling::Uniform,
    };
    let data = make_synthetic(&recipe, 1)?;
    let channels = data.channels.expect("stereo recipe");
    let config = CarrierConfig::new(carrier, 1.0, delta)?;
    let times = data.series.times();
    let margin = default_margin(delta);
    for keep in [60, 200, 400] {
        let obs = corrupt(&data.series, 0.2, keep, 1)?;
        let noise = (0.2 * data.series.std()).powi(2);
        let (c1, c2) = demodulate(&obs, &config, noise, times)?;
        println!(
            "{keep:>3} samples: channel RMSE {:.3} / {:.3}",
            interior_rmse(times, channels.x1().values(), &c1.mean, margin)?,
            interior_rmse(times, channels.x2().values(), &c2.mean, margin)?
        );
    }
    Ok(())
}
