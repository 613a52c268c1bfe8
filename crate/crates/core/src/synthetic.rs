//! Synthetic datasets and corruption (subsampling plus additive noise).
//!
//! Every random stream is derived from one run seed and a fixed label, so
//! components drawn in different modules never share or shift each other's
//! random numbers.

use std::f64::consts::PI;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::bandpass::Band;
use crate::demod::{modulate, CarrierConfig, StereoChannels};
use crate::error::{Error, Result};
use crate::gp::{sample_with_rng, TimeSeries};
use crate::kernels::KernelSpec;
use crate::linalg::DEFAULT_JITTER;

/// Generator for the stream named `label` under run seed `seed`.
pub fn labelled_rng(seed: u64, label: &str) -> ChaCha20Rng {
    // FNV-1a: stable across platforms and compiler versions.
    let stream = label.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    });
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    #[default]
    Uniform,
    /// Uniform grid with each time moved by up to a quarter step.
    JitteredUniform,
    /// Sorted uniform draws over the span.
    UniformRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub frequency: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Sinusoid {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (2.0 * PI * self.frequency * t + self.phase).cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SyntheticKind {
    GpSincDraw {
        kernel: KernelSpec,
    },
    /// White noise restricted to a band by zeroing FFT bins, scaled to `std`.
    BandLimitedNoise {
        band: Band,
        std: f64,
    },
    SinusoidMixture {
        components: Vec<Sinusoid>,
    },
    ModulatedStereo {
        carrier: f64,
        sigma2: f64,
        delta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRecipe {
    #[serde(flatten)]
    pub kind: SyntheticKind,
    pub length: usize,
    pub span: f64,
    #[serde(default)]
    pub sampling: Sampling,
}

impl SyntheticRecipe {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 || !(self.span.is_finite() && self.span > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "recipe needs length >= 1 and span > 0, got {} and {}",
                self.length, self.span
            )));
        }
        match &self.kind {
            SyntheticKind::GpSincDraw { kernel } => kernel.validate(),
            SyntheticKind::BandLimitedNoise { band, std } => {
                if self.sampling != Sampling::Uniform {
                    return Err(Error::InvalidParameter(
                        "band-limited noise is generated on a uniform grid only".into(),
                    ));
                }
                if !(std.is_finite() && *std >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "std must be >= 0, got {std}"
                    )));
                }
                let nyquist = 0.5 * self.length as f64 / self.span;
                if band.a() >= nyquist {
                    return Err(Error::InvalidParameter(format!(
                        "band starts above the grid Nyquist frequency {nyquist}"
                    )));
                }
                Ok(())
            }
            SyntheticKind::SinusoidMixture { components } => {
                if components.iter().any(|c| {
                    !(c.frequency.is_finite() && c.amplitude.is_finite() && c.phase.is_finite())
                }) {
                    return Err(Error::InvalidParameter("non-finite sinusoid".into()));
                }
                Ok(())
            }
            SyntheticKind::ModulatedStereo {
                carrier,
                sigma2,
                delta,
            } => CarrierConfig::new(*carrier, *sigma2, *delta).map(|_| ()),
        }
    }

    /// Time grid before any randomness other than the sampling jitter.
    fn times(&self, rng: &mut ChaCha20Rng) -> Vec<f64> {
        let n = self.length;
        let dt = self.span / n as f64;
        match self.sampling {
            Sampling::Uniform => (0..n).map(|i| i as f64 * dt).collect(),
            Sampling::JitteredUniform => (0..n)
                .map(|i| (i as f64 + 0.5 * (rng.random::<f64>() - 0.5)) * dt)
                .collect(),
            Sampling::UniformRandom => {
                let mut t: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * self.span).collect();
                t.sort_by(f64::total_cmp);
                t.dedup();
                t
            }
        }
    }
}

/// A generated series plus ground truth where the recipe has one.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub series: TimeSeries,
    pub channels: Option<StereoChannels>,
}

pub fn make_synthetic(recipe: &SyntheticRecipe, seed: u64) -> Result<Synthetic> {
    recipe.validate()?;
    let times = recipe.times(&mut labelled_rng(seed, "synthetic/times"));
    let mut rng = labelled_rng(seed, "synthetic/values");
    match &recipe.kind {
        SyntheticKind::GpSincDraw { kernel } => {
            let draw = sample_with_rng(kernel, DEFAULT_JITTER, &times, 1, &mut rng)?;
            Ok(Synthetic {
                series: TimeSeries::new(times, draw.row(0).iter().copied().collect())?,
                channels: None,
            })
        }
        SyntheticKind::BandLimitedNoise { band, std } => {
            let dt = recipe.span / recipe.length as f64;
            let values = band_limited_noise(recipe.length, dt, *band, *std, &mut rng);
            Ok(Synthetic {
                series: TimeSeries::new(times, values)?,
                channels: None,
            })
        }
        SyntheticKind::SinusoidMixture { components } => {
            let values = times
                .iter()
                .map(|&t| components.iter().map(|c| c.eval(t)).sum())
                .collect();
            Ok(Synthetic {
                series: TimeSeries::new(times, values)?,
                channels: None,
            })
        }
        SyntheticKind::ModulatedStereo {
            carrier,
            sigma2,
            delta,
        } => {
            let config = CarrierConfig::new(*carrier, *sigma2, *delta)?;
            let draws = sample_with_rng(
                &config.channel_kernel(),
                DEFAULT_JITTER,
                &times,
                2,
                &mut rng,
            )?;
            let x1 = TimeSeries::new(times.clone(), draws.row(0).iter().copied().collect())?;
            let x2 = TimeSeries::new(times.clone(), draws.row(1).iter().copied().collect())?;
            let channels = StereoChannels::new(x1, x2)?;
            Ok(Synthetic {
                series: modulate(&channels, *carrier, &times)?,
                channels: Some(channels),
            })
        }
    }
}

/// Gaussian white noise with every FFT bin outside `±band` zeroed, rescaled
/// to sample standard deviation `std`.
fn band_limited_noise(n: usize, dt: f64, band: Band, std: f64, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(StandardNormal.sample(rng), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 / (n as f64 * dt);
        if !band.contains(f) {
            *z = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let values: Vec<f64> = buf.iter().map(|z| z.re / n as f64).collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let scale = if sd > 0.0 { std / sd } else { 0.0 };
    values.iter().map(|v| (v - mean) * scale).collect()
}

/// Uniform-random subsample of `subsample` points (without replacement)
/// plus Gaussian noise of standard deviation `noise_fraction * std(values)`.
pub fn corrupt(
    ts: &TimeSeries,
    noise_fraction: f64,
    subsample: usize,
    seed: u64,
) -> Result<TimeSeries> {
    if !(noise_fraction.is_finite() && noise_fraction >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise fraction must be >= 0, got {noise_fraction}"
        )));
    }
    if subsample > ts.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot keep {subsample} of {} samples",
            ts.len()
        )));
    }
    let mut keep = sample_indices(
        &mut labelled_rng(seed, "corrupt/subsample"),
        ts.len(),
        subsample,
    )
    .into_vec();
    keep.sort_unstable();
    let noise_std = noise_fraction * ts.std();
    let mut rng = labelled_rng(seed, "corrupt/noise");
    let times = keep.iter().map(|&i| ts.times()[i]).collect();
    let values = keep
        .iter()
        .map(|&i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            ts.values()[i] + noise_std * z
        })
        .collect();
    let out = TimeSeries::new(times, values)?;
    if noise_std > 0.0 {
        out.with_noise_std(noise_std)
    } else {
        Ok(out)
    }
}
