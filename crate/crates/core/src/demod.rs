//! Stereo amplitude modulation and Bayesian demodulation.
//!
//! Two independent centred sinc processes ride on quadrature carriers:
//! `x(t) = x1(t) cos(2 pi c t) + x2(t) sin(2 pi c t)`. The sum is itself a
//! GP with the (non-centred) sinc kernel, and each channel is jointly
//! Gaussian with it, which gives closed-form channel posteriors.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{condition, GPModel, PosteriorSummary, TimeSeries};
use crate::kernels::{centred_sinc_kernel, gram_symmetric, KernelSpec, SincParams};

/// Two channels sampled on one shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoChannels {
    x1: TimeSeries,
    x2: TimeSeries,
}

impl StereoChannels {
    pub fn new(x1: TimeSeries, x2: TimeSeries) -> Result<Self> {
        if x1.times() != x2.times() {
            return Err(Error::InvalidSeries(
                "stereo channels must share a time grid".into(),
            ));
        }
        Ok(StereoChannels { x1, x2 })
    }

    pub fn x1(&self) -> &TimeSeries {
        &self.x1
    }

    pub fn x2(&self) -> &TimeSeries {
        &self.x2
    }

    pub fn times(&self) -> &[f64] {
        self.x1.times()
    }
}

/// Carrier frequency plus the centred prior shared by both channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierConfig {
    xi0: f64,
    sigma2: f64,
    delta: f64,
}

impl CarrierConfig {
    pub fn new(xi0: f64, sigma2: f64, delta: f64) -> Result<Self> {
        SincParams::centred(sigma2, delta)?;
        if !(xi0.is_finite() && xi0 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "carrier must be >= 0, got {xi0}"
            )));
        }
        if xi0 > 0.0 && xi0 <= 0.5 * delta {
            log::warn!(
                "carrier {xi0} is below half the channel bandwidth {delta}; channel spectra overlap at zero"
            );
        }
        Ok(CarrierConfig { xi0, sigma2, delta })
    }

    pub fn xi0(&self) -> f64 {
        self.xi0
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Channel prior.
    pub fn channel_kernel(&self) -> KernelSpec {
        KernelSpec::centred_sinc(self.sigma2, self.delta).expect("validated at construction")
    }

    /// Kernel of the modulated signal.
    pub fn signal_kernel(&self) -> KernelSpec {
        KernelSpec::sinc(self.sigma2, self.xi0, self.delta).expect("validated at construction")
    }
}

/// Which quadrature channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Cos,
    Sin,
}

impl Channel {
    fn carrier(self, xi0: f64, t: f64) -> f64 {
        let phase = 2.0 * PI * xi0 * t;
        match self {
            Channel::Cos => phase.cos(),
            Channel::Sin => phase.sin(),
        }
    }
}

/// `x1(t) cos(2 pi c t) + x2(t) sin(2 pi c t)` at each of `times`, which must
/// all lie on the channel grid.
pub fn modulate(channels: &StereoChannels, xi0: f64, times: &[f64]) -> Result<TimeSeries> {
    let grid = channels.times();
    let values = times
        .iter()
        .map(|&t| {
            let i = grid.binary_search_by(|g| g.total_cmp(&t)).map_err(|_| {
                Error::InvalidSeries(format!("time {t} is not on the channel grid"))
            })?;
            Ok(channels.x1.values()[i] * Channel::Cos.carrier(xi0, t)
                + channels.x2.values()[i] * Channel::Sin.carrier(xi0, t))
        })
        .collect::<Result<Vec<f64>>>()?;
    TimeSeries::new(times.to_vec(), values)
}

/// Covariance between one channel at `t` and the modulated signal at each
/// observation time.
pub fn channel_obs_cov(
    channel: Channel,
    config: &CarrierConfig,
    t: f64,
    obs_times: &[f64],
) -> Vec<f64> {
    obs_times
        .iter()
        .map(|&ti| {
            centred_sinc_kernel(config.sigma2, config.delta, t - ti)
                * channel.carrier(config.xi0, ti)
        })
        .collect()
}

/// Posterior over both channels given noisy observations of the sum.
pub fn demodulate(
    obs: &TimeSeries,
    config: &CarrierConfig,
    noise_var: f64,
    query: &[f64],
) -> Result<(PosteriorSummary, PosteriorSummary)> {
    let prior = gram_symmetric(&config.channel_kernel(), query);
    if obs.is_empty() {
        return Ok((
            PosteriorSummary::prior(query, prior.clone())?,
            PosteriorSummary::prior(query, prior)?,
        ));
    }
    let factor = GPModel::new(config.signal_kernel(), noise_var)?.factor(obs.times())?;
    let y = obs.values_vector();
    let mut out = [Channel::Cos, Channel::Sin].into_iter().map(|ch| {
        let rows: Vec<Vec<f64>> = query
            .iter()
            .map(|&t| channel_obs_cov(ch, config, t, obs.times()))
            .collect();
        let cross = DMatrix::from_fn(query.len(), obs.len(), |i, j| rows[i][j]);
        condition(query, prior.clone(), &cross, &factor, &y)
    });
    let first = out.next().expect("two channels")?;
    let second = out.next().expect("two channels")?;
    Ok((first, second))
}

/// `|K_sinc(t - t') - [cos, sin] diag(Kc, Kc) [cos', sin']^T|`.
pub fn mogp_cov_check(config: &CarrierConfig, t: f64, s: f64) -> f64 {
    let full = config.signal_kernel().eval(t - s);
    let kc = centred_sinc_kernel(config.sigma2, config.delta, t - s);
    let decomposed = kc
        * (Channel::Cos.carrier(config.xi0, t) * Channel::Cos.carrier(config.xi0, s)
            + Channel::Sin.carrier(config.xi0, t) * Channel::Sin.carrier(config.xi0, s));
    (full - decomposed).abs()
}

/// Default edge margin: two reciprocal bandwidths.
pub fn default_margin(delta: f64) -> f64 {
    2.0 / delta
}

/// RMSE over the samples at least `margin` away from both ends of `times`.
pub fn interior_rmse(times: &[f64], truth: &[f64], estimate: &[f64], margin: f64) -> Result<f64> {
    if truth.len() != times.len() || estimate.len() != times.len() {
        return Err(Error::InvalidSeries("rmse inputs differ in length".into()));
    }
    let (Some(&lo), Some(&hi)) = (times.first(), times.last()) else {
        return Err(Error::InvalidSeries("rmse of an empty series".into()));
    };
    let (sum, n) = times
        .iter()
        .zip(truth.iter().zip(estimate))
        .filter(|(t, _)| **t >= lo + margin && **t <= hi - margin)
        .fold((0.0, 0usize), |(s, n), (_, (a, b))| {
            (s + (a - b).powi(2), n + 1)
        });
    if n == 0 {
        return Err(Error::InvalidParameter(format!(
            "margin {margin} leaves no interior samples"
        )));
    }
    Ok((sum / n as f64).sqrt())
}

/// Per-channel interior errors reported by the demodulation command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemodMetrics {
    pub rmse_ch1: f64,
    pub rmse_ch2: f64,
    pub margin: f64,
}
