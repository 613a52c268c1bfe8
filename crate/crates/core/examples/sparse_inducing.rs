//! Inducing points at the Nyquist rate of the kernel support, against the
//! exact GP on 600 observations.

use blgp::experiment::tapered_lowpass_kernel;
use blgp::gp::GPModel;
use blgp::sparse::{compare_with_exact, nyquist_inducing, support_width};
use blgp::synthetic::{corrupt, make_synthetic, Sampling, SyntheticKind, SyntheticRecipe};

fn main() -> blgp::Result<()> {
    let kernel = tapered_lowpass_kernel();
    let recipe = SyntheticRecipe {
        kind: SyntheticKind::GpSincDraw {
            kernel: kernel.clone(),
        },
        length: 600,
        span: 50.0,
        sampling: Sampling::UniformRandom,
    };
    let clean = make_synthetic(&recipe, 2)?.series;
    let obs = corrupt(&clean, 0.1, 600, 2)?;
    let (lo, hi) = obs.span().expect("non-empty");
    let inducing = nyquist_inducing(&kernel, lo, hi)?;
    println!(
        "support width {:.2}, span {:.2}: {} inducing points for {} observations",
        support_width(&kernel)?,
        hi - lo,
        inducing.len(),
        obs.len()
    );
    let model = GPModel::new(kernel, (0.1 * clean.std()).powi(2))?;
    let (_, _, report) = compare_with_exact(&model, &obs, &inducing, obs.times())?;
    println!(
        "mean RMSE vs exact {:.2}% of signal std; exact {:.3}s, sparse {:.3}s",
        100.0 * report.rmse_vs_exact / clean.std(),
        report.runtime_exact,
        report.runtime_sparse
    );
    Ok(())
}
