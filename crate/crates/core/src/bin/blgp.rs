use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use blgp::bandpass::{bandpass_posterior, brick_wall, Band};
use blgp::demod::{default_margin, demodulate, interior_rmse, CarrierConfig, DemodMetrics};
use blgp::experiment::{run_experiment, support_init, ExperimentConfig, ExperimentKind};
use blgp::gp::{posterior, GPModel, TimeSeries};
use blgp::io;
use blgp::kernels::KernelSpec;
use blgp::nyquist::{check_grid, nyquist_variance, oracle_match, whittaker_mean};
use blgp::sparse::{compare_with_exact, nyquist_inducing};
use blgp::spectral::{default_frequency_grid, periodogram, support_estimate, welch_uniform};
use blgp::train::{fit, InitStrategy, Optimizer, TrainingConfig};
use blgp::{Error, Result};

#[derive(Parser)]
#[command(
    name = "blgp",
    version,
    about = "Band-limited Gaussian processes with the sinc kernel"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `time,value` CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    QuasiNewton,
    DirectionSet,
}

#[derive(Clone, Copy, ValueEnum)]
enum PsdArg {
    LombScargle,
    WelchUniform,
}

#[derive(Subcommand)]
enum Command {
    /// Train kernel and noise parameters by maximum likelihood.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Initial model JSON; a centred sinc by default.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "direction-set")]
        optimizer: OptimizerArg,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
        /// Start from the given model instead of periodogram peaks.
        #[arg(long)]
        manual_init: bool,
    },
    /// Posterior mean and variance on a uniform grid over the data span.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 500)]
        points: usize,
    },
    /// Recover the two channels of a stereo amplitude-modulated signal.
    Demodulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        carrier: f64,
        #[arg(long)]
        bandwidth: f64,
        /// Channel power; the sample variance by default.
        #[arg(long)]
        sigma2: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        noise_var: f64,
        /// `time,x1,x2` CSV of true channels at the input times.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Posterior of the in-band component, plus the brick-wall estimate.
    Filter {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        band: Band,
        /// Source model JSON; fitted from the spectral support by default.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Power spectral density estimate and its support.
    Psd {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "lomb-scargle")]
        method: PsdArg,
        /// Segment length for the Welch estimate.
        #[arg(long, default_value_t = 64)]
        segment: usize,
        /// Relative power level for the support bands.
        #[arg(long)]
        support_threshold: Option<f64>,
    },
    /// Sinc interpolation of samples on a Nyquist grid.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bandwidth: f64,
        /// Output points per grid spacing.
        #[arg(long, default_value_t = 8)]
        per_spacing: usize,
    },
    /// Sparse predictive with inducing points at the Nyquist rate of the model.
    SparseFit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 500)]
        points: usize,
    },
    /// Run an experiment end to end.
    Experiment {
        #[arg(value_parser = parse_kind)]
        kind: ExperimentKind,
        /// Experiment config JSON; the built-in preset by default.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        band: Option<Band>,
        #[arg(long)]
        carrier: Option<f64>,
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long)]
        noise_frac: Option<f64>,
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> std::result::Result<ExperimentKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn uniform_grid(obs: &TimeSeries, points: usize) -> Result<Vec<f64>> {
    let (lo, hi) = obs
        .span()
        .ok_or_else(|| Error::InvalidSeries("input has no rows".into()))?;
    if points < 2 {
        return Err(Error::InvalidParameter("need at least 2 points".into()));
    }
    Ok((0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect())
}

fn read_truth(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let (mut t, mut x1, mut x2) = (vec![], vec![], vec![]);
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let parse = |k: usize| -> Result<f64> {
            row.get(k)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Parse {
                    path: path.display().to_string(),
                    line: i + 2,
                    message: "expected time,x1,x2".into(),
                })
        };
        t.push(parse(0)?);
        x1.push(parse(1)?);
        x2.push(parse(2)?);
    }
    Ok((t, x1, x2))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit {
            common,
            model,
            optimizer,
            restarts,
            manual_init,
        } => {
            let obs = io::load_csv(&common.input)?;
            let initial = match model {
                Some(p) => io::load_model(p)?,
                None => GPModel::new(
                    KernelSpec::centred_sinc(obs.variance().max(1e-12), 1.0)?,
                    0.1 * obs.variance(),
                )?,
            };
            let config = TrainingConfig {
                optimizer: match optimizer {
                    OptimizerArg::QuasiNewton => Optimizer::QuasiNewton,
                    OptimizerArg::DirectionSet => Optimizer::DirectionSet,
                },
                restarts,
                init: if manual_init {
                    InitStrategy::Manual
                } else {
                    InitStrategy::Periodogram
                },
                ..TrainingConfig::default()
            };
            let result = fit(&obs, &initial, &config)?;
            if let Some(w) = &result.warning {
                log::warn!("{w}");
            }
            io::write_json(common.out_dir.join("model.json"), &result.model)?;
            io::write_trace(common.out_dir.join("trace.csv"), &result.trace)?;
            io::write_json(
                common.out_dir.join("fit.json"),
                &json!({
                    "log_likelihood": result.log_likelihood.is_finite().then_some(result.log_likelihood),
                    "converged": result.converged,
                    "warning": result.warning,
                }),
            )?;
        }
        Command::Predict {
            common,
            model,
            points,
        } => {
            let obs = io::load_csv(&common.input)?;
            let model = io::load_model(model)?;
            let post = posterior(&model, &obs, &uniform_grid(&obs, points)?)?;
            io::write_posterior(common.out_dir.join("posterior.csv"), &post)?;
        }
        Command::Demodulate {
            common,
            carrier,
            bandwidth,
            sigma2,
            noise_var,
            truth,
        } => {
            let obs = io::load_csv(&common.input)?;
            let sigma2 = sigma2.unwrap_or(if obs.variance() > 0.0 {
                obs.variance()
            } else {
                1.0
            });
            let config = CarrierConfig::new(carrier, sigma2, bandwidth)?;
            let (p1, p2) = demodulate(&obs, &config, noise_var, obs.times())?;
            io::write_posterior(common.out_dir.join("channel1.csv"), &p1)?;
            io::write_posterior(common.out_dir.join("channel2.csv"), &p2)?;
            if let Some(path) = truth {
                let (t, x1, x2) = read_truth(&path)?;
                if t != obs.times() {
                    return Err(Error::InvalidSeries(
                        "truth times differ from input times".into(),
                    ));
                }
                let margin = default_margin(bandwidth);
                let metrics = DemodMetrics {
                    rmse_ch1: interior_rmse(&t, &x1, &p1.mean, margin)?,
                    rmse_ch2: interior_rmse(&t, &x2, &p2.mean, margin)?,
                    margin,
                };
                io::write_json(common.out_dir.join("metrics.json"), &metrics)?;
            }
        }
        Command::Filter {
            common,
            band,
            model,
        } => {
            let obs = io::load_csv(&common.input)?;
            let source = match model {
                Some(p) => io::load_model(p)?,
                None => {
                    let initial = support_init(&obs, 0.1)?;
                    let config = TrainingConfig {
                        init: InitStrategy::Manual,
                        ..TrainingConfig::default()
                    };
                    let model = fit(&obs, &initial, &config)?.model;
                    io::write_json(common.out_dir.join("model.json"), &model)?;
                    model
                }
            };
            let query = obs.times();
            let post = bandpass_posterior(&obs, source.kernel(), band, source.noise_var(), query)?;
            io::write_posterior(common.out_dir.join("filtered.csv"), &post)?;
            io::write_series(
                common.out_dir.join("brick_wall.csv"),
                &TimeSeries::new(query.to_vec(), brick_wall(&obs, band, query))?,
            )?;
        }
        Command::Psd {
            common,
            method,
            segment,
            support_threshold,
        } => {
            let obs = io::load_csv(&common.input)?;
            let psd = match method {
                PsdArg::LombScargle => periodogram(&obs, &default_frequency_grid(&obs)?)?,
                PsdArg::WelchUniform => {
                    let t = obs.times();
                    if t.len() < 2 {
                        return Err(Error::InvalidSeries("need at least 2 samples".into()));
                    }
                    let dt = t[1] - t[0];
                    if t.windows(2)
                        .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs())
                    {
                        return Err(Error::InvalidSeries(
                            "welch estimate needs uniformly spaced times".into(),
                        ));
                    }
                    welch_uniform(obs.values(), dt, segment)?
                }
            };
            io::write_psd(common.out_dir.join("psd.csv"), &psd)?;
            if let Some(th) = support_threshold {
                let bands = support_estimate(&psd, th)?;
                io::write_json(common.out_dir.join("support.json"), &bands)?;
            }
        }
        Command::Reconstruct {
            common,
            bandwidth,
            per_spacing,
        } => {
            let obs = io::load_csv(&common.input)?;
            check_grid(obs.times(), bandwidth)?;
            if per_spacing == 0 {
                return Err(Error::InvalidParameter("per-spacing must be >= 1".into()));
            }
            let (lo, hi) = obs
                .span()
                .ok_or_else(|| Error::InvalidSeries("input has no rows".into()))?;
            let step = 1.0 / (bandwidth * per_spacing as f64);
            let count = ((hi - lo) / step).round() as usize + 1;
            let sigma2 = if obs.variance() > 0.0 {
                obs.variance()
            } else {
                1.0
            };
            let rows = (0..count)
                .map(|i| {
                    let t = lo + i as f64 * step;
                    Ok(vec![
                        t,
                        whittaker_mean(&obs, bandwidth, t)?,
                        nyquist_variance(obs.times(), bandwidth, sigma2, t)?,
                    ])
                })
                .collect::<Result<Vec<_>>>()?;
            io::write_table(
                common.out_dir.join("reconstruction.csv"),
                &["t", "mean", "variance"],
                &rows,
            )?;
            let model = GPModel::new(KernelSpec::centred_sinc(sigma2, bandwidth)?, 0.0)?;
            let query: Vec<f64> = rows.iter().map(|r| r[0]).collect();
            if obs.len() <= 2000 {
                let report = oracle_match(&model, &obs, &query)?;
                io::write_json(common.out_dir.join("oracle.json"), &report)?;
            }
        }
        Command::SparseFit {
            common,
            model,
            points,
        } => {
            let obs = io::load_csv(&common.input)?;
            let model = io::load_model(model)?;
            let (lo, hi) = obs
                .span()
                .ok_or_else(|| Error::InvalidSeries("input has no rows".into()))?;
            let inducing = nyquist_inducing(model.kernel(), lo, hi)?;
            io::write_inducing(common.out_dir.join("inducing.csv"), inducing.locations())?;
            let query = uniform_grid(&obs, points)?;
            let (_, sparse, report) = compare_with_exact(&model, &obs, &inducing, &query)?;
            io::write_posterior(common.out_dir.join("posterior_sparse.csv"), &sparse)?;
            io::write_json(common.out_dir.join("sparse_report.json"), &report)?;
        }
        Command::Experiment {
            kind,
            config,
            input,
            model,
            band,
            carrier,
            bandwidth,
            noise_frac,
            subsample,
            seed,
            out_dir,
        } => {
            let mut c = match config {
                Some(p) => io::read_json::<ExperimentConfig>(p)?,
                None => ExperimentConfig::preset(kind),
            };
            if c.experiment != kind {
                return Err(Error::InvalidParameter(format!(
                    "config is for '{}', not '{kind}'",
                    c.experiment
                )));
            }
            if let Some(p) = input {
                c.data = Some(p);
            }
            if let Some(p) = model {
                c.model = Some(io::load_model(p)?);
            }
            c.band = band.or(c.band);
            c.carrier = carrier.or(c.carrier);
            c.bandwidth = bandwidth.or(c.bandwidth);
            c.noise_fraction = noise_frac.unwrap_or(c.noise_fraction);
            c.subsample = subsample.or(c.subsample);
            c.seed = seed.unwrap_or(c.seed);
            c.out_dir = out_dir.unwrap_or(c.out_dir);
            let metrics = run_experiment(&c)?;
            println!("{}", serde_json::to_string_pretty(&metrics)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BLGP_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
