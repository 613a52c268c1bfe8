//! Run the built-in experiments and a small demodulation sweep, writing
//! artifacts under `target/experiments`.

use blgp::experiment::{
    demod_sweep, plateau_change, run_experiment, ExperimentConfig, ExperimentKind,
};

fn main() -> blgp::Result<()> {
    let root = std::path::Path::new("target/experiments");
    for kind in [
        ExperimentKind::Reconstruct,
        ExperimentKind::Demodulate,
        ExperimentKind::Filter,
        ExperimentKind::Sparse,
    ] {
        let mut config = ExperimentConfig::preset(kind);
        config.out_dir = root.join(kind.name());
        let metrics = run_experiment(&config)?;
        println!("{kind}: {metrics}");
    }

    let config = ExperimentConfig::preset(ExperimentKind::Demodulate);
    let recipe = config.recipe.expect("preset has a recipe");
    let points = demod_sweep(&recipe, 0.2, &[40, 80, 160, 240, 320, 400], 5, 0)?;
    println!("rate  p10    p50    p90");
    for p in &points {
        println!("{:<5} {:.3}  {:.3}  {:.3}", p.rate, p.p10, p.p50, p.p90);
    }
    if let Some(c) = plateau_change(&points) {
        println!("relative change over the upper half of the rates: {c:.3}");
    }
    Ok(())
}
