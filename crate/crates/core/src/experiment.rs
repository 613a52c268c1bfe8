//! End-to-end experiments. Each run loads or generates a series, thins and
//! corrupts it, runs one of the analyses and writes CSV artifacts plus a
//! `metrics.json` into the output directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bandpass::{bandpass_posterior, brick_wall, Band};
use crate::demod::{default_margin, demodulate, interior_rmse, CarrierConfig, StereoChannels};
use crate::error::{Error, Result};
use crate::gp::{posterior, GPModel, PosteriorSummary, TimeSeries};
use crate::io;
use crate::kernels::{KernelSpec, SincParams, SpectralEnvelope};
use crate::sparse::{compare_with_exact, nyquist_inducing};
use crate::spectral::{default_frequency_grid, periodogram, support_estimate, PsdEstimate};
use crate::synthetic::{
    corrupt, labelled_rng, make_synthetic, Sampling, Sinusoid, SyntheticKind, SyntheticRecipe,
};
use crate::train::{fit, FitResult, InitStrategy, TrainingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Reconstruct,
    Demodulate,
    Filter,
    Sparse,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Reconstruct => "reconstruct",
            ExperimentKind::Demodulate => "demodulate",
            ExperimentKind::Filter => "filter",
            ExperimentKind::Sparse => "sparse",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reconstruct" => Ok(ExperimentKind::Reconstruct),
            "demodulate" => Ok(ExperimentKind::Demodulate),
            "filter" => Ok(ExperimentKind::Filter),
            "sparse" => Ok(ExperimentKind::Sparse),
            other => Err(Error::InvalidParameter(format!(
                "unknown experiment '{other}'"
            ))),
        }
    }
}

/// Sampling-rate sweep for the demodulation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub subsamples: Vec<usize>,
    pub seeds: usize,
}

fn default_true() -> bool {
    true
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// `time,value` CSV; takes precedence over `recipe`.
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub recipe: Option<SyntheticRecipe>,
    /// Number of points kept; all when absent.
    #[serde(default)]
    pub subsample: Option<usize>,
    #[serde(default)]
    pub noise_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    /// Initial (or, with `train = false`, final) model.
    #[serde(default)]
    pub model: Option<GPModel>,
    #[serde(default = "default_true")]
    pub train: bool,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub band: Option<Band>,
    #[serde(default)]
    pub carrier: Option<f64>,
    #[serde(default)]
    pub bandwidth: Option<f64>,
    /// Trailing fraction of the span withheld from training (reconstruct).
    #[serde(default)]
    pub forecast_fraction: f64,
    /// Also fit a spectral-mixture model and report its leakage (reconstruct).
    #[serde(default)]
    pub baseline: bool,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

/// Kernel of the default sparse dataset: a centred band of width 1.06 whose
/// spectrum falls linearly to zero at the band edges.
pub fn tapered_lowpass_kernel() -> KernelSpec {
    KernelSpec::generalised_sinc(
        SincParams::new(1.0, 0.0, 1.06).expect("valid"),
        SpectralEnvelope::triangular(2.0, 0.0, 0.53).expect("valid"),
        32,
    )
    .expect("valid")
}

impl ExperimentConfig {
    /// Default setup for each experiment on a synthetic dataset.
    pub fn preset(kind: ExperimentKind) -> Self {
        let (recipe, subsample, noise_fraction, band, forecast_fraction) = match kind {
            ExperimentKind::Reconstruct => (
                SyntheticRecipe {
                    kind: SyntheticKind::BandLimitedNoise {
                        band: Band::low_pass(0.5).expect("valid"),
                        std: 1.0,
                    },
                    length: 1000,
                    span: 100.0,
                    sampling: Sampling::Uniform,
                },
                Some(200),
                0.1,
                Some(Band::low_pass(0.5).expect("valid")),
                0.2,
            ),
            ExperimentKind::Demodulate => (
                SyntheticRecipe {
                    kind: SyntheticKind::ModulatedStereo {
                        carrier: 2.0,
                        sigma2: 1.0,
                        delta: 1.0,
                    },
                    length: 400,
                    span: 40.0,
                    sampling: Sampling::Uniform,
                },
                Some(200),
                0.2,
                None,
                0.0,
            ),
            ExperimentKind::Filter => (
                SyntheticRecipe {
                    kind: SyntheticKind::SinusoidMixture {
                        components: vec![
                            Sinusoid {
                                frequency: 0.1,
                                amplitude: 1.0,
                                phase: 0.0,
                            },
                            Sinusoid {
                                frequency: 0.4,
                                amplitude: 1.0,
                                phase: 0.0,
                            },
                        ],
                    },
                    length: 500,
                    span: 100.0,
                    sampling: Sampling::Uniform,
                },
                Some(200),
                0.1,
                Some(Band::new(0.3, 0.5).expect("valid")),
                0.0,
            ),
            ExperimentKind::Sparse => (
                SyntheticRecipe {
                    kind: SyntheticKind::GpSincDraw {
                        kernel: tapered_lowpass_kernel(),
                    },
                    length: 600,
                    span: 50.0,
                    sampling: Sampling::UniformRandom,
                },
                None,
                0.1,
                None,
                0.0,
            ),
        };
        // The sparse preset compares against the exact GP under the kernel
        // that generated the data.
        let model = match &recipe.kind {
            SyntheticKind::GpSincDraw { kernel } if kind == ExperimentKind::Sparse => Some(
                GPModel::new(
                    kernel.clone(),
                    (noise_fraction * noise_fraction) * kernel.variance(),
                )
                .expect("valid"),
            ),
            _ => None,
        };
        ExperimentConfig {
            experiment: kind,
            data: None,
            recipe: Some(recipe),
            subsample,
            noise_fraction,
            seed: 0,
            train: model.is_none(),
            model,
            training: TrainingConfig::default(),
            band,
            carrier: None,
            bandwidth: None,
            forecast_fraction,
            baseline: false,
            sweep: None,
            out_dir: default_out_dir(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_fraction.is_finite() && self.noise_fraction >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise fraction must be >= 0, got {}",
                self.noise_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.forecast_fraction) {
            return Err(Error::InvalidParameter(format!(
                "forecast fraction must be in [0, 1), got {}",
                self.forecast_fraction
            )));
        }
        if self.data.is_none() && self.recipe.is_none() {
            return Err(Error::InvalidParameter(
                "experiment needs a data file or a synthetic recipe".into(),
            ));
        }
        if let Some(r) = &self.recipe {
            r.validate()?;
        }
        if let Some(m) = &self.model {
            m.kernel().validate()?;
        }
        self.training.validate()?;
        if self.experiment == ExperimentKind::Filter && self.band.is_none() {
            return Err(Error::InvalidParameter("filter needs a band".into()));
        }
        if let Some(s) = &self.sweep {
            if s.seeds == 0 || s.subsamples.is_empty() {
                return Err(Error::InvalidParameter(
                    "sweep needs at least one seed and one subsample count".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Median, 10th and 90th percentile of the demodulation error at one
/// subsample count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub subsample: usize,
    /// Mean number of samples per unit time.
    pub rate: f64,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (pos - i as f64) * (sorted[j] - sorted[i])
}

/// Normalised interior error of both channels, averaged.
fn demod_error(
    truth: &StereoChannels,
    p1: &PosteriorSummary,
    p2: &PosteriorSummary,
    margin: f64,
) -> Result<f64> {
    let t = truth.times();
    let r1 = interior_rmse(t, truth.x1().values(), &p1.mean, margin)? / truth.x1().std();
    let r2 = interior_rmse(t, truth.x2().values(), &p2.mean, margin)? / truth.x2().std();
    Ok(0.5 * (r1 + r2))
}

/// Demodulation error against subsample count over `seeds` datasets drawn
/// from a modulated-stereo recipe, seeds `base_seed..base_seed + seeds`.
pub fn demod_sweep(
    recipe: &SyntheticRecipe,
    noise_fraction: f64,
    subsamples: &[usize],
    seeds: usize,
    base_seed: u64,
) -> Result<Vec<SweepPoint>> {
    let SyntheticKind::ModulatedStereo {
        carrier,
        sigma2,
        delta,
    } = recipe.kind
    else {
        return Err(Error::InvalidParameter(
            "demodulation sweep needs a modulated-stereo recipe".into(),
        ));
    };
    if seeds == 0 {
        return Err(Error::InvalidParameter(
            "sweep needs at least one seed".into(),
        ));
    }
    let config = CarrierConfig::new(carrier, sigma2, delta)?;
    let margin = default_margin(delta);
    let data: Vec<_> = (0..seeds as u64)
        .map(|s| make_synthetic(recipe, base_seed + s))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = subsamples
        .iter()
        .flat_map(|&m| (0..seeds).map(move |s| (m, s)))
        .collect();
    let errors: Vec<f64> = jobs
        .par_iter()
        .map(|&(m, s)| {
            let d = &data[s];
            let truth = d.channels.as_ref().expect("stereo recipe has channels");
            let sd = d.series.std();
            let obs = corrupt(&d.series, noise_fraction, m, base_seed + s as u64)?;
            let (p1, p2) = demodulate(
                &obs,
                &config,
                (noise_fraction * sd).powi(2),
                d.series.times(),
            )?;
            demod_error(truth, &p1, &p2, margin)
        })
        .collect::<Result<_>>()?;
    Ok(subsamples
        .iter()
        .zip(errors.chunks(seeds))
        .map(|(&m, e)| {
            let mut e = e.to_vec();
            e.sort_by(f64::total_cmp);
            SweepPoint {
                subsample: m,
                rate: m as f64 / recipe.span,
                p10: quantile(&e, 0.1),
                p50: quantile(&e, 0.5),
                p90: quantile(&e, 0.9),
            }
        })
        .collect())
}

/// `(max - min) / max` of the median error over the upper half of the rate
/// range. `None` with fewer than two points there.
pub fn plateau_change(points: &[SweepPoint]) -> Option<f64> {
    let lo = points.iter().map(|p| p.rate).fold(f64::INFINITY, f64::min);
    let hi = points
        .iter()
        .map(|p| p.rate)
        .fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    let upper: Vec<f64> = points
        .iter()
        .filter(|p| p.rate >= mid)
        .map(|p| p.p50)
        .collect();
    if upper.len() < 2 {
        return None;
    }
    let max = upper.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = upper.iter().copied().fold(f64::INFINITY, f64::min);
    Some((max - min) / max)
}

/// Frequencies `k / span` from one bin up to half the median sampling rate.
pub fn audit_grid(times: &[f64]) -> Result<Vec<f64>> {
    if times.len() < 4 {
        return Err(Error::InvalidSeries(
            "spectral audit needs at least 4 samples".into(),
        ));
    }
    let span = times[times.len() - 1] - times[0];
    let mut dt: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    dt.sort_by(f64::total_cmp);
    let nyquist = 0.5 / dt[dt.len() / 2];
    let count = (nyquist * span).floor() as usize;
    Ok((1..=count.max(1)).map(|k| k as f64 / span).collect())
}

/// Fraction of the power of `values` at `times` that lies outside `band`
/// (widened by one frequency bin), and its periodogram.
pub fn leakage(times: &[f64], values: &[f64], band: Band) -> Result<(f64, PsdEstimate)> {
    let grid = audit_grid(times)?;
    let margin = grid[0];
    let psd = periodogram(&TimeSeries::new(times.to_vec(), values.to_vec())?, &grid)?;
    Ok((psd.fraction_outside(&[band], margin), psd))
}

fn rmse_where(times: &[f64], a: &[f64], b: &[f64], keep: impl Fn(f64) -> bool) -> Option<f64> {
    let (sum, n) = times
        .iter()
        .zip(a.iter().zip(b))
        .filter(|(t, _)| keep(**t))
        .fold((0.0, 0usize), |(s, n), (_, (x, y))| {
            (s + (x - y).powi(2), n + 1)
        });
    (n > 0).then(|| (sum / n as f64).sqrt())
}

/// Sum of one Sinc per band of the estimated spectral support, with the
/// sample variance shared in proportion to the periodogram power.
pub fn support_init(obs: &TimeSeries, threshold: f64) -> Result<GPModel> {
    let psd = periodogram(obs, &default_frequency_grid(obs)?)?;
    let bands = support_estimate(&psd, threshold)?;
    let var = obs.variance();
    if bands.is_empty() || var <= 0.0 {
        return Err(Error::InvalidSeries(
            "no spectral support found in the observations".into(),
        ));
    }
    let widths = psd.bin_widths();
    let power: Vec<f64> = bands
        .iter()
        .map(|b| {
            psd.frequencies
                .iter()
                .zip(psd.power.iter().zip(&widths))
                .filter(|(f, _)| **f >= b.a() && **f <= b.b())
                .map(|(_, (p, w))| p * w)
                .sum::<f64>()
        })
        .collect();
    let total: f64 = power.iter().sum();
    let parts = bands
        .iter()
        .zip(&power)
        .map(|(b, p)| KernelSpec::sinc((var * p / total).max(1e-12 * var), b.xi0(), b.delta()))
        .collect::<Result<Vec<_>>>()?;
    let kernel = if parts.len() == 1 {
        parts.into_iter().next().expect("one part")
    } else {
        KernelSpec::sum(parts)?
    };
    GPModel::new(kernel, 0.1 * var)
}

fn default_template(obs: &TimeSeries) -> Result<GPModel> {
    let var = if obs.variance() > 0.0 {
        obs.variance()
    } else {
        1.0
    };
    GPModel::new(KernelSpec::centred_sinc(var, 1.0)?, 0.1 * var)
}

/// Trains `initial` unless training is disabled; writes the model and trace.
fn train_model(
    config: &ExperimentConfig,
    obs: &TimeSeries,
    initial: GPModel,
    out: &Path,
    name: &str,
) -> Result<(GPModel, Option<FitResult>)> {
    let (model, result) = if config.train {
        let result = fit(obs, &initial, &config.training)?;
        if let Some(w) = &result.warning {
            log::warn!("{name}: {w}");
        }
        io::write_trace(out.join(format!("trace_{name}.csv")), &result.trace)?;
        (result.model.clone(), Some(result))
    } else {
        (initial, None)
    };
    io::write_json(out.join(format!("model_{name}.json")), &model)?;
    Ok((model, result))
}

#[derive(Debug, Clone, Copy)]
enum Field {
    Number,
    NullableNumber,
    Integer,
    Str,
    Bool,
}

const COMMON: &[(&str, Field)] = &[
    ("experiment", Field::Str),
    ("seed", Field::Integer),
    ("n_observations", Field::Integer),
    ("noise_fraction", Field::Number),
];

fn schema(kind: ExperimentKind) -> Vec<(&'static str, Field)> {
    use Field::*;
    let specific: &[(&str, Field)] = match kind {
        ExperimentKind::Reconstruct => &[
            ("log_likelihood", NullableNumber),
            ("converged", Bool),
            ("rmse_interpolation", Number),
            ("rmse_forecast", NullableNumber),
            ("leakage", NullableNumber),
            ("leakage_baseline", NullableNumber),
        ],
        ExperimentKind::Demodulate => &[
            ("rmse_ch1", NullableNumber),
            ("rmse_ch2", NullableNumber),
            ("margin", Number),
            ("plateau_change", NullableNumber),
        ],
        ExperimentKind::Filter => &[
            ("log_likelihood", NullableNumber),
            ("converged", Bool),
            ("leakage_ratio", Number),
            ("brick_wall_leakage_ratio", Number),
        ],
        ExperimentKind::Sparse => &[
            ("M", Integer),
            ("n", Integer),
            ("delta_total", Number),
            ("rmse_vs_exact", Number),
            ("rmse_relative", Number),
            ("runtime_exact", Number),
            ("runtime_sparse", Number),
        ],
    };
    COMMON.iter().chain(specific).copied().collect()
}

/// Checks that `metrics` has exactly the keys of the experiment's schema
/// with values of the right type.
pub fn validate_metrics(kind: ExperimentKind, metrics: &Value) -> Result<()> {
    let obj = metrics
        .as_object()
        .ok_or_else(|| Error::Schema("metrics must be an object".into()))?;
    let fields = schema(kind);
    for (key, field) in &fields {
        let v = obj
            .get(*key)
            .ok_or_else(|| Error::Schema(format!("missing key '{key}'")))?;
        let ok = match field {
            Field::Number => v.as_f64().is_some_and(f64::is_finite),
            Field::NullableNumber => v.is_null() || v.as_f64().is_some_and(f64::is_finite),
            Field::Integer => v.is_u64(),
            Field::Str => v.is_string(),
            Field::Bool => v.is_boolean(),
        };
        if !ok {
            return Err(Error::Schema(format!("key '{key}' has wrong type: {v}")));
        }
    }
    if let Some(extra) = obj.keys().find(|k| !fields.iter().any(|(f, _)| f == k)) {
        return Err(Error::Schema(format!("unexpected key '{extra}'")));
    }
    Ok(())
}

fn finite_or_null(x: Option<f64>) -> Value {
    match x {
        Some(v) if v.is_finite() => json!(v),
        _ => Value::Null,
    }
}

struct Dataset {
    reference: TimeSeries,
    channels: Option<StereoChannels>,
    obs: TimeSeries,
}

fn load_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    let (reference, channels) = match (&config.data, &config.recipe) {
        (Some(path), _) => (io::load_csv(path)?, None),
        (None, Some(recipe)) => {
            let s = make_synthetic(recipe, config.seed)?;
            (s.series, s.channels)
        }
        (None, None) => unreachable!("validated"),
    };
    let keep = config.subsample.unwrap_or(reference.len());
    let obs = corrupt(&reference, config.noise_fraction, keep, config.seed)?;
    Ok(Dataset {
        reference,
        channels,
        obs,
    })
}

/// Runs the experiment, writes its artifacts to `config.out_dir` and returns
/// the metrics that were written to `metrics.json`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Value> {
    let kind = config.experiment;
    let ctx = |e: Error| e.context(format!("{kind} experiment"));
    config.validate().map_err(ctx)?;
    let out = config.out_dir.as_path();
    io::write_json(out.join("config.json"), config).map_err(ctx)?;
    let data = load_dataset(config).map_err(ctx)?;
    io::write_series(out.join("observations.csv"), &data.obs).map_err(ctx)?;
    io::write_series(out.join("reference.csv"), &data.reference).map_err(ctx)?;
    let mut metrics = match kind {
        ExperimentKind::Reconstruct => reconstruct(config, &data, out),
        ExperimentKind::Demodulate => demodulation(config, &data, out),
        ExperimentKind::Filter => filter(config, &data, out),
        ExperimentKind::Sparse => sparse(config, &data, out),
    }
    .map_err(ctx)?;
    let obj = metrics.as_object_mut().expect("metrics object");
    obj.insert("experiment".into(), json!(kind.name()));
    obj.insert("seed".into(), json!(config.seed));
    obj.insert("n_observations".into(), json!(data.obs.len()));
    obj.insert("noise_fraction".into(), json!(config.noise_fraction));
    validate_metrics(kind, &metrics).map_err(ctx)?;
    io::write_json(out.join("metrics.json"), &metrics).map_err(ctx)?;
    Ok(metrics)
}

fn reconstruct(config: &ExperimentConfig, data: &Dataset, out: &Path) -> Result<Value> {
    let reference = &data.reference;
    let times = reference.times();
    let (t0, t1) = reference
        .span()
        .ok_or_else(|| Error::InvalidSeries("empty dataset".into()))?;
    let split = t1 - config.forecast_fraction * (t1 - t0);
    let train = data.obs.filter(|t| t <= split);
    let initial = match &config.model {
        Some(m) => m.clone(),
        None => default_template(&train)?,
    };
    let (model, result) = train_model(config, &train, initial, out, "sinc")?;

    let post = posterior(&model, &train, times)?;
    io::write_posterior(out.join("posterior.csv"), &post)?;
    let draws = post.draws(
        3,
        model.jitter(),
        &mut labelled_rng(config.seed, "experiment/draws"),
    )?;
    let rows: Vec<Vec<f64>> = (0..times.len())
        .map(|j| {
            std::iter::once(times[j])
                .chain((0..draws.nrows()).map(|i| draws[(i, j)]))
                .collect()
        })
        .collect();
    io::write_table(out.join("samples.csv"), &["t", "s1", "s2", "s3"], &rows)?;

    let truth = reference.values();
    let rmse_interpolation = rmse_where(times, truth, &post.mean, |t| t <= split)
        .ok_or_else(|| Error::InvalidSeries("no samples in the interpolation span".into()))?;
    let rmse_forecast = rmse_where(times, truth, &post.mean, |t| t > split);

    let grid = audit_grid(times)?;
    io::write_psd(
        out.join("psd_observations.csv"),
        &periodogram(&train, &grid)?,
    )?;
    let kernel_psd = PsdEstimate {
        frequencies: grid.clone(),
        power: grid.iter().map(|&f| 2.0 * model.kernel().psd(f)).collect(),
        method: crate::spectral::PsdMethod::LombScargle,
    };
    io::write_psd(out.join("psd_kernel.csv"), &kernel_psd)?;
    let mean_psd = periodogram(&TimeSeries::new(times.to_vec(), post.mean.clone())?, &grid)?;
    io::write_psd(out.join("psd_posterior.csv"), &mean_psd)?;
    let leak = config
        .band
        .map(|b| leakage(times, &post.mean, b).map(|r| r.0))
        .transpose()?;

    let leakage_baseline = if config.baseline {
        let var = if train.variance() > 0.0 {
            train.variance()
        } else {
            1.0
        };
        let sm = GPModel::new(KernelSpec::spectral_mixture(var, 0.1, 0.01)?, 0.1 * var)?;
        let (sm, _) = train_model(config, &train, sm, out, "baseline")?;
        let post_sm = posterior(&sm, &train, times)?;
        io::write_posterior(out.join("posterior_baseline.csv"), &post_sm)?;
        config
            .band
            .map(|b| leakage(times, &post_sm.mean, b).map(|r| r.0))
            .transpose()?
    } else {
        None
    };

    Ok(json!({
        "log_likelihood": finite_or_null(result.as_ref().map(|r| r.log_likelihood)),
        "converged": result.as_ref().is_none_or(|r| r.converged),
        "rmse_interpolation": rmse_interpolation,
        "rmse_forecast": finite_or_null(rmse_forecast),
        "leakage": finite_or_null(leak),
        "leakage_baseline": finite_or_null(leakage_baseline),
    }))
}

fn carrier_config(config: &ExperimentConfig, obs: &TimeSeries) -> Result<CarrierConfig> {
    let from_recipe = match config.recipe.as_ref().map(|r| &r.kind) {
        Some(SyntheticKind::ModulatedStereo {
            carrier,
            sigma2,
            delta,
        }) if config.data.is_none() => Some((*carrier, *sigma2, *delta)),
        _ => None,
    };
    let carrier = config.carrier.or(from_recipe.map(|r| r.0));
    let delta = config.bandwidth.or(from_recipe.map(|r| r.2));
    let (Some(carrier), Some(delta)) = (carrier, delta) else {
        return Err(Error::InvalidParameter(
            "demodulation needs a carrier and a bandwidth".into(),
        ));
    };
    let sigma2 = match from_recipe {
        Some(r) => r.1,
        None if obs.variance() > 0.0 => obs.variance(),
        None => 1.0,
    };
    CarrierConfig::new(carrier, sigma2, delta)
}

fn demodulation(config: &ExperimentConfig, data: &Dataset, out: &Path) -> Result<Value> {
    let carrier = carrier_config(config, &data.obs)?;
    let noise_var = match &config.model {
        Some(m) => m.noise_var(),
        None => (config.noise_fraction * data.reference.std()).powi(2),
    };
    let times = data.reference.times();
    let (p1, p2) = demodulate(&data.obs, &carrier, noise_var, times)?;
    io::write_posterior(out.join("channel1.csv"), &p1)?;
    io::write_posterior(out.join("channel2.csv"), &p2)?;
    let margin = default_margin(carrier.delta());
    let (mut r1, mut r2) = (None, None);
    if let Some(ch) = &data.channels {
        let rows: Vec<Vec<f64>> = (0..times.len())
            .map(|i| vec![times[i], ch.x1().values()[i], ch.x2().values()[i]])
            .collect();
        io::write_table(out.join("truth_channels.csv"), &["t", "x1", "x2"], &rows)?;
        r1 = Some(interior_rmse(times, ch.x1().values(), &p1.mean, margin)?);
        r2 = Some(interior_rmse(times, ch.x2().values(), &p2.mean, margin)?);
    }
    let mut change = None;
    if let (Some(sweep), Some(recipe)) = (&config.sweep, &config.recipe) {
        let points = demod_sweep(
            recipe,
            config.noise_fraction,
            &sweep.subsamples,
            sweep.seeds,
            config.seed,
        )?;
        let rows: Vec<Vec<f64>> = points
            .iter()
            .map(|p| vec![p.subsample as f64, p.rate, p.p10, p.p50, p.p90])
            .collect();
        io::write_table(
            out.join("sweep.csv"),
            &["subsample", "rate", "p10", "p50", "p90"],
            &rows,
        )?;
        change = plateau_change(&points);
    }
    Ok(json!({
        "rmse_ch1": finite_or_null(r1),
        "rmse_ch2": finite_or_null(r2),
        "margin": margin,
        "plateau_change": finite_or_null(change),
    }))
}

/// Power outside the band over power inside it.
fn leakage_ratio(times: &[f64], values: &[f64], band: Band) -> Result<(f64, PsdEstimate)> {
    let (f, psd) = leakage(times, values, band)?;
    Ok((
        if f < 1.0 {
            f / (1.0 - f)
        } else {
            f64::INFINITY
        },
        psd,
    ))
}

fn filter(config: &ExperimentConfig, data: &Dataset, out: &Path) -> Result<Value> {
    let band = config.band.expect("validated");
    let (initial, training) = match &config.model {
        Some(m) => (m.clone(), config.training.clone()),
        None => (
            support_init(&data.obs, 0.1)?,
            TrainingConfig {
                init: InitStrategy::Manual,
                ..config.training.clone()
            },
        ),
    };
    let config = ExperimentConfig {
        training,
        ..config.clone()
    };
    let (model, result) = train_model(&config, &data.obs, initial, out, "source")?;
    let times = data.reference.times();
    let filtered = bandpass_posterior(&data.obs, model.kernel(), band, model.noise_var(), times)?;
    io::write_posterior(out.join("filtered.csv"), &filtered)?;
    let brick = brick_wall(&data.obs, band, times);
    io::write_series(
        out.join("brick_wall.csv"),
        &TimeSeries::new(times.to_vec(), brick.clone())?,
    )?;
    let (ratio, psd) = leakage_ratio(times, &filtered.mean, band)?;
    io::write_psd(out.join("psd_filtered.csv"), &psd)?;
    io::write_psd(
        out.join("psd_observations.csv"),
        &periodogram(&data.obs, &audit_grid(times)?)?,
    )?;
    let (brick_ratio, _) = leakage_ratio(times, &brick, band)?;
    Ok(json!({
        "log_likelihood": finite_or_null(result.as_ref().map(|r| r.log_likelihood)),
        "converged": result.as_ref().is_none_or(|r| r.converged),
        "leakage_ratio": ratio,
        "brick_wall_leakage_ratio": brick_ratio,
    }))
}

fn sparse(config: &ExperimentConfig, data: &Dataset, out: &Path) -> Result<Value> {
    let initial = match &config.model {
        Some(m) => m.clone(),
        None => default_template(&data.obs)?,
    };
    let (model, _) = train_model(config, &data.obs, initial, out, "sinc")?;
    let (lo, hi) = data
        .obs
        .span()
        .ok_or_else(|| Error::InvalidSeries("no observations".into()))?;
    let inducing = nyquist_inducing(model.kernel(), lo, hi)?;
    io::write_inducing(out.join("inducing.csv"), inducing.locations())?;
    let times = data.reference.times();
    let (exact, approx, report) = compare_with_exact(&model, &data.obs, &inducing, times)?;
    io::write_posterior(out.join("posterior_exact.csv"), &exact)?;
    io::write_posterior(out.join("posterior_sparse.csv"), &approx)?;
    io::write_json(out.join("sparse_report.json"), &report)?;
    Ok(json!({
        "M": report.m,
        "n": report.n,
        "delta_total": inducing.delta_total(),
        "rmse_vs_exact": report.rmse_vs_exact,
        "rmse_relative": report.rmse_vs_exact / data.reference.std(),
        "runtime_exact": report.runtime_exact,
        "runtime_sparse": report.runtime_sparse,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert!((quantile(&v, 0.1) - 1.4).abs() < 1e-12);
    }

    #[test]
    fn plateau_uses_upper_half() {
        let p = |m: usize, e: f64| SweepPoint {
            subsample: m,
            rate: m as f64,
            p10: e,
            p50: e,
            p90: e,
        };
        let flat = [p(1, 1.0), p(2, 0.5), p(3, 0.2), p(4, 0.2), p(5, 0.19)];
        assert!((plateau_change(&flat).unwrap() - 0.05).abs() < 1e-12);
        assert!(plateau_change(&[p(1, 1.0)]).is_none());
    }

    #[test]
    fn schema_rejects_missing_extra_and_mistyped() {
        let good = json!({
            "experiment": "demodulate", "seed": 1, "n_observations": 10,
            "noise_fraction": 0.1, "rmse_ch1": null, "rmse_ch2": 0.2,
            "margin": 2.0, "plateau_change": null,
        });
        validate_metrics(ExperimentKind::Demodulate, &good).unwrap();
        let mut extra = good.clone();
        extra["other"] = json!(1);
        assert!(validate_metrics(ExperimentKind::Demodulate, &extra).is_err());
        let mut missing = good.clone();
        missing.as_object_mut().unwrap().remove("margin");
        assert!(validate_metrics(ExperimentKind::Demodulate, &missing).is_err());
        let mut typed = good;
        typed["seed"] = json!("one");
        assert!(matches!(
            validate_metrics(ExperimentKind::Demodulate, &typed),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn config_round_trips_and_validates() {
        for kind in [
            ExperimentKind::Reconstruct,
            ExperimentKind::Demodulate,
            ExperimentKind::Filter,
            ExperimentKind::Sparse,
        ] {
            let c = ExperimentConfig::preset(kind);
            c.validate().unwrap();
            let text = serde_json::to_string(&c).unwrap();
            assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), c);
            assert_eq!(kind.name().parse::<ExperimentKind>().unwrap(), kind);
        }
        let minimal: ExperimentConfig = serde_json::from_str(
            r#"{"experiment":"filter","data":"x.csv","band":[0.1,0.2],"training":{"restarts":2}}"#,
        )
        .unwrap();
        assert_eq!(minimal.training.restarts, 2);
        assert_eq!(minimal.training.max_iters, 500);
        let mut bad = ExperimentConfig::preset(ExperimentKind::Filter);
        bad.band = None;
        assert!(bad.validate().is_err());
        bad = ExperimentConfig::preset(ExperimentKind::Reconstruct);
        bad.noise_fraction = -0.1;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn subsample_larger_than_data_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = ExperimentConfig::preset(ExperimentKind::Demodulate);
        c.subsample = Some(401);
        c.out_dir = dir.path().to_path_buf();
        let err = run_experiment(&c).unwrap_err();
        assert!(!err.is_numerical());
        assert!(err.to_string().starts_with("demodulate experiment"));
    }

    #[test]
    fn support_init_finds_both_tones() {
        let t: Vec<f64> = (0..400).map(|i| 0.25 * i as f64).collect();
        let v = t
            .iter()
            .map(|x| {
                (0.2 * std::f64::consts::TAU * x).cos()
                    + 0.5 * (0.35 * std::f64::consts::TAU * x).sin()
            })
            .collect();
        let m = support_init(&TimeSeries::new(t, v).unwrap(), 0.1).unwrap();
        let rects = m.kernel().support_rectangles().unwrap();
        assert!(rects.iter().any(|(a, b)| *a <= 0.2 && 0.2 <= *b));
        assert!(rects.iter().any(|(a, b)| *a <= 0.35 && 0.35 <= *b));
    }
}
