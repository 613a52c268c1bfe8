//! End-to-end runs of the experiment presets on small synthetic data.

use blgp::experiment::{run_experiment, validate_metrics, ExperimentConfig, ExperimentKind};
use blgp::gp::GPModel;
use blgp::io::load_csv;
use blgp::kernels::KernelSpec;
use blgp::synthetic::{Sampling, SyntheticKind, SyntheticRecipe};

#[test]
fn true_kernel_interpolates_within_noise() {
    let dir = tempfile::tempdir().unwrap();
    let kernel = KernelSpec::centred_sinc(1.0, 1.0).unwrap();
    let mut cfg = ExperimentConfig::preset(ExperimentKind::Reconstruct);
    cfg.recipe = Some(SyntheticRecipe {
        kind: SyntheticKind::GpSincDraw {
            kernel: kernel.clone(),
        },
        length: 1000,
        span: 100.0,
        sampling: Sampling::Uniform,
    });
    cfg.forecast_fraction = 0.0;
    cfg.subsample = Some(400);
    cfg.train = false;
    cfg.model = Some(GPModel::new(kernel, 0.01).unwrap());
    cfg.out_dir = dir.path().to_path_buf();
    let m = run_experiment(&cfg).unwrap();
    let reference = load_csv(dir.path().join("reference.csv")).unwrap();
    let noise_std = cfg.noise_fraction * reference.std();
    let rmse = m["rmse_interpolation"].as_f64().unwrap();
    assert!(rmse <= noise_std, "{rmse} > {noise_std}");
    assert!(m["rmse_forecast"].is_null());
}

#[test]
fn filter_preset_keeps_leakage_small() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::preset(ExperimentKind::Filter);
    cfg.out_dir = dir.path().to_path_buf();
    let m = run_experiment(&cfg).unwrap();
    let ratio = m["leakage_ratio"].as_f64().unwrap();
    assert!(ratio <= 0.05, "{ratio}");
    for f in [
        "filtered.csv",
        "brick_wall.csv",
        "psd_filtered.csv",
        "metrics.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn written_metrics_match_their_schema() {
    for kind in [ExperimentKind::Demodulate, ExperimentKind::Sparse] {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::preset(kind);
        cfg.out_dir = dir.path().to_path_buf();
        run_experiment(&cfg).unwrap();
        let text = std::fs::read_to_string(dir.path().join("metrics.json")).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        validate_metrics(kind, &value).unwrap();
        assert_eq!(value["experiment"], kind.name());

        let mut broken = value.clone();
        broken.as_object_mut().unwrap().remove("seed");
        assert!(validate_metrics(kind, &broken).is_err());
        broken["seed"] = serde_json::json!("zero");
        assert!(validate_metrics(kind, &broken).is_err());
    }
}
