//! Maximum-likelihood training of kernel and noise hyperparameters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{log_marginal_likelihood, GPModel, TimeSeries};
use crate::kernels::{KernelSpec, ParamKind, SincParams};
use crate::optim::{bfgs, powell, Minimum, Options};
use crate::spectral::{default_frequency_grid, periodogram, PsdEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    QuasiNewton,
    DirectionSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    Periodogram,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub optimizer: Optimizer,
    pub max_iters: usize,
    pub restarts: usize,
    pub init: InitStrategy,
    /// Box on every log-scale coordinate (including log noise variance).
    pub log_bounds: (f64, f64),
    pub rel_tol: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            optimizer: Optimizer::DirectionSet,
            max_iters: 500,
            restarts: 1,
            init: InitStrategy::Periodogram,
            log_bounds: (-25.0, 15.0),
            rel_tol: 1e-8,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.restarts == 0 {
            return Err(Error::InvalidParameter(
                "max_iters and restarts must be >= 1".into(),
            ));
        }
        let (lo, hi) = self.log_bounds;
        if !(lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "empty log bounds [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    /// Log marginal likelihood.
    pub objective: f64,
    pub sigma2: f64,
    pub xi0: f64,
    pub delta: f64,
    pub noise_var: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: GPModel,
    pub log_likelihood: f64,
    /// Iterates of the winning restart; objective is non-decreasing.
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    /// Set when no restart produced a finite objective; `model` is then the
    /// initial model.
    pub warning: Option<String>,
}

fn pack(model: &GPModel) -> (Vec<f64>, Vec<ParamKind>) {
    let params = model.kernel().parameters();
    let mut x: Vec<f64> = params.iter().map(|p| p.value).collect();
    let mut kinds: Vec<ParamKind> = params.iter().map(|p| p.kind).collect();
    x.push(model.noise_var().max(f64::MIN_POSITIVE).ln());
    kinds.push(ParamKind::Log);
    (x, kinds)
}

fn unpack(template: &GPModel, x: &[f64]) -> Result<GPModel> {
    let (k, noise) = x.split_at(x.len() - 1);
    Ok(
        GPModel::new(template.kernel().with_parameters(k)?, noise[0].exp())?
            .with_jitter(template.jitter()),
    )
}

/// Candidate starting models derived from the periodogram: one per peak
/// among the three largest.
pub fn periodogram_init(obs: &TimeSeries, template: &GPModel) -> Result<Vec<GPModel>> {
    let psd = periodogram(obs, &default_frequency_grid(obs)?)?;
    let var = obs.variance();
    if var <= 0.0 {
        log::warn!("flat data: keeping the initial model");
        return Ok(vec![template.clone()]);
    }
    let noise = 0.1 * var;
    let mut out = Vec::new();
    for peak in psd.peaks().into_iter().take(3) {
        let (lo, hi) = peak_region(&psd, peak, 0.1);
        let xi0 = psd.frequencies[peak];
        let width = hi - lo;
        let kernel = match template.kernel() {
            KernelSpec::CentredSinc(_) => KernelSpec::centred_sinc(var, 2.0 * hi)?,
            KernelSpec::Sinc(_) => KernelSpec::sinc(var, xi0, width)?,
            KernelSpec::GeneralisedSinc {
                envelope, order, ..
            } => KernelSpec::generalised_sinc(
                SincParams::new(var, xi0, width)?,
                envelope.clone(),
                *order,
            )?,
            KernelSpec::SpectralMixture { .. } => {
                KernelSpec::spectral_mixture(var, xi0, (0.25 * width).powi(2))?
            }
            other => {
                log::warn!(
                    "no periodogram initialisation for {}; keeping the initial model",
                    other.variant_name()
                );
                return Ok(vec![template.clone()]);
            }
        };
        out.push(GPModel::new(kernel, noise)?.with_jitter(template.jitter()));
    }
    if out.is_empty() {
        out.push(template.clone());
    }
    Ok(out)
}

/// Edges of the contiguous run around `peak` where power stays at or above
/// `level` times the peak power, widened by half a bin on each side.
fn peak_region(psd: &PsdEstimate, peak: usize, level: f64) -> (f64, f64) {
    let p = &psd.power;
    let cut = level * p[peak];
    let mut lo = peak;
    while lo > 0 && p[lo - 1] >= cut {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < p.len() && p[hi + 1] >= cut {
        hi += 1;
    }
    let w = psd.bin_widths();
    (
        (psd.frequencies[lo] - 0.5 * w[lo]).max(0.0),
        psd.frequencies[hi] + 0.5 * w[hi],
    )
}

/// Replaces the first centre frequency of the kernel, if it has one.
fn with_centre(model: &GPModel, xi0: f64) -> Result<GPModel> {
    let (mut x, kinds) = pack(model);
    match kinds.iter().position(|k| *k == ParamKind::Frequency) {
        Some(i) => {
            x[i] = xi0;
            unpack(model, &x)
        }
        None => Ok(model.clone()),
    }
}

fn starts(obs: &TimeSeries, initial: &GPModel, config: &TrainingConfig) -> Result<Vec<GPModel>> {
    let candidates = match config.init {
        InitStrategy::Periodogram => periodogram_init(obs, initial)?,
        InitStrategy::Manual => {
            let mut c = vec![initial.clone()];
            if config.restarts > 1 && obs.variance() > 0.0 {
                let psd = periodogram(obs, &default_frequency_grid(obs)?)?;
                for peak in psd.peaks().into_iter().take(3) {
                    c.push(with_centre(initial, psd.frequencies[peak])?);
                }
            }
            c
        }
    };
    Ok((0..config.restarts)
        .map(|r| candidates[r % candidates.len()].clone())
        .collect())
}

/// Maximises the log marginal likelihood over the kernel parameters and the
/// noise variance. Restarts run concurrently; the best finite run wins.
pub fn fit(obs: &TimeSeries, initial: &GPModel, config: &TrainingConfig) -> Result<FitResult> {
    config.validate()?;
    if obs.len() < 4 {
        return Err(Error::InvalidSeries(format!(
            "training needs at least 4 observations, got {}",
            obs.len()
        )));
    }
    let starts = starts(obs, initial, config)?;
    let opts = Options {
        max_iters: config.max_iters,
        rel_tol: config.rel_tol,
        ..Options::default()
    };
    let runs: Vec<(GPModel, Minimum, Vec<ParamKind>)> = starts
        .par_iter()
        .map(|start| {
            let (x0, kinds) = pack(start);
            let (lo, hi) = config.log_bounds;
            let objective = |x: &[f64]| {
                let out_of_box = x
                    .iter()
                    .zip(&kinds)
                    .any(|(v, k)| *k == ParamKind::Log && (*v < lo || *v > hi));
                if out_of_box {
                    return f64::INFINITY;
                }
                unpack(start, x)
                    .and_then(|m| log_marginal_likelihood(&m, obs))
                    .map_or(f64::INFINITY, |l| -l)
            };
            let min = match config.optimizer {
                Optimizer::DirectionSet => powell(objective, &x0, &opts),
                Optimizer::QuasiNewton => bfgs(objective, &x0, &opts),
            };
            (start.clone(), min, kinds)
        })
        .collect();

    let best = runs
        .iter()
        .filter(|(_, m, _)| m.f.is_finite())
        .min_by(|a, b| a.1.f.total_cmp(&b.1.f));
    let Some((start, min, _)) = best else {
        let (x, _) = pack(&starts[0]);
        let err = Error::NonFiniteObjective { params: x };
        log::warn!("all restarts failed: {err}");
        return Ok(FitResult {
            model: initial.clone(),
            log_likelihood: f64::NEG_INFINITY,
            trace: vec![],
            converged: false,
            warning: Some(err.to_string()),
        });
    };
    let model = unpack(start, &min.x)?;
    let trace = min
        .path
        .iter()
        .zip(&min.history)
        .enumerate()
        .map(|(iter, (x, f))| {
            let m = unpack(start, x)?;
            let (sigma2, xi0, delta) = m.kernel().summary();
            Ok(TraceRow {
                iter,
                objective: -f,
                sigma2,
                xi0,
                delta,
                noise_var: m.noise_var(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    log::info!(
        "fit: log likelihood {:.6} after {} iterations ({} evaluations)",
        -min.f,
        min.iters,
        min.evals
    );
    Ok(FitResult {
        model,
        log_likelihood: -min.f,
        trace,
        converged: min.converged,
        warning: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::sample;
    use std::f64::consts::PI;

    #[test]
    fn config_validation() {
        let mut c = TrainingConfig::default();
        assert!(c.validate().is_ok());
        c.restarts = 0;
        assert!(c.validate().is_err());
        let json = serde_json::to_string(&TrainingConfig::default()).unwrap();
        assert!(json.contains("direction-set") && json.contains("periodogram"));
    }

    #[test]
    fn pack_round_trip() {
        let m = GPModel::new(KernelSpec::sinc(2.0, 0.3, 0.5).unwrap(), 0.01).unwrap();
        let (x, kinds) = pack(&m);
        assert_eq!(kinds.len(), 4);
        let back = unpack(&m, &x).unwrap();
        assert!((back.noise_var() - 0.01).abs() < 1e-15);
        let (s, c, d) = back.kernel().summary();
        assert!((s - 2.0).abs() < 1e-12 && (c - 0.3).abs() < 1e-15 && (d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn periodogram_init_finds_sinusoid() {
        let t: Vec<f64> = (0..200).map(|i| 0.05 * i as f64).collect();
        let y: Vec<f64> = t.iter().map(|x| (2.0 * PI * 2.0 * x).sin()).collect();
        let obs = TimeSeries::new(t, y).unwrap();
        let tmpl = GPModel::new(KernelSpec::sinc(1.0, 1.0, 1.0).unwrap(), 0.1).unwrap();
        let inits = periodogram_init(&obs, &tmpl).unwrap();
        let grid = default_frequency_grid(&obs).unwrap();
        let bin = grid[1] - grid[0];
        let (_, xi0, _) = inits[0].kernel().summary();
        assert!((xi0 - 2.0).abs() <= bin, "{xi0}");
    }

    #[test]
    fn flat_data_terminates() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let obs = TimeSeries::new(t, vec![1.5; 10]).unwrap();
        let init = GPModel::new(KernelSpec::centred_sinc(1.0, 0.5).unwrap(), 0.1).unwrap();
        let cfg = TrainingConfig {
            max_iters: 50,
            ..TrainingConfig::default()
        };
        let r = fit(&obs, &init, &cfg).unwrap();
        assert!((r.model.noise_var() + r.model.kernel().variance()).is_finite());
    }

    #[test]
    fn too_few_points() {
        let obs = TimeSeries::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0]).unwrap();
        let init = GPModel::new(KernelSpec::centred_sinc(1.0, 0.5).unwrap(), 0.1).unwrap();
        assert!(fit(&obs, &init, &TrainingConfig::default()).is_err());
    }

    #[test]
    fn recovers_bandwidth_and_trace_is_monotone() {
        let truth = GPModel::new(KernelSpec::centred_sinc(1.0, 0.5).unwrap(), 0.0).unwrap();
        let t: Vec<f64> = (0..150).map(|i| 0.25 * i as f64).collect();
        let f = sample(&truth, &t, 5, 1).unwrap();
        let y: Vec<f64> = f
            .row(0)
            .iter()
            .enumerate()
            .map(|(i, v)| v + 0.1 * ((i * 7919 % 13) as f64 / 6.0 - 1.0))
            .collect();
        let obs = TimeSeries::new(t, y).unwrap();
        let init = GPModel::new(KernelSpec::centred_sinc(1.0, 1.0).unwrap(), 0.1).unwrap();
        for optimizer in [Optimizer::DirectionSet, Optimizer::QuasiNewton] {
            let cfg = TrainingConfig {
                optimizer,
                ..TrainingConfig::default()
            };
            let r = fit(&obs, &init, &cfg).unwrap();
            let (_, _, delta) = r.model.kernel().summary();
            assert!((delta - 0.5).abs() < 0.1, "{optimizer:?}: {delta}");
            assert!(r.trace.windows(2).all(|w| w[1].objective >= w[0].objective));
            assert_eq!(r.trace.last().unwrap().objective, r.log_likelihood);
        }
    }
}
