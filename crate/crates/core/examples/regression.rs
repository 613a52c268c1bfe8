//! Train a sinc kernel on noisy band-limited data and predict between the
//! samples and beyond them.

use blgp::gp::{posterior, GPModel};
use blgp::kernels::KernelSpec;
use blgp::synthetic::{corrupt, make_synthetic, Sampling, SyntheticKind, SyntheticRecipe};
use blgp::train::{fit, TrainingConfig};

fn main() -> blgp::Result<()> {
    let truth = KernelSpec::centred_sinc(1.0, 0.5)?;
    let recipe = SyntheticRecipe {
        kind: SyntheticKind::GpSincDraw { kernel: truth },
        length: 300,
        span: 100.0,
        sampling: Sampling::UniformRandom,
    };
    let clean = make_synthetic(&recipe, 7)?.series;
    let obs = corrupt(&clean, 0.1, 150, 7)?.filter(|t| t < 80.0);

    let initial = GPModel::new(KernelSpec::centred_sinc(1.0, 1.0)?, 0.1)?;
    let result = fit(&obs, &initial, &TrainingConfig::default())?;
    let (sigma2, _, delta) = result.model.kernel().summary();
    println!(
        "fitted sigma2 {sigma2:.3}, delta {delta:.3} (true 0.5), noise {:.4}, log lik {:.2}",
        result.model.noise_var(),
        result.log_likelihood
    );

    let query: Vec<f64> = (0..11).map(|i| 70.0 + 2.0 * i as f64).collect();
    let post = posterior(&result.model, &obs, &query)?;
    println!("t      mean     sd");
    for ((t, m), v) in query.iter().zip(&post.mean).zip(&post.variance) {
        println!("{:<6} {:+.3}   {:.3}", t, m, v.sqrt());
    }
    Ok(())
}
