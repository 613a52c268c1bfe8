//! Spectral diagnostics for unevenly sampled series.
//!
//! The main estimator is the Lomb-Scargle periodogram. Its output is scaled
//! to a one-sided density: the power summed against the frequency bin
//! widths equals the sample variance of the input. A Welch estimator for
//! uniformly sampled data is provided for smoother, lower-variance audits.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::bandpass::Band;
use crate::error::{Error, Result};
use crate::gp::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsdMethod {
    LombScargle,
    WelchUniform,
}

/// Power on a strictly increasing frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    pub method: PsdMethod,
}

impl PsdEstimate {
    /// Width attributed to each bin (mid-point partition of the grid).
    pub fn bin_widths(&self) -> Vec<f64> {
        bin_widths(&self.frequencies)
    }

    /// Frequency of the largest power value.
    pub fn peak_frequency(&self) -> Option<f64> {
        let i = argmax(&self.power)?;
        Some(self.frequencies[i])
    }

    /// Local maxima sorted by decreasing power.
    pub fn peaks(&self) -> Vec<usize> {
        let p = &self.power;
        let n = p.len();
        let mut idx: Vec<usize> = (0..n)
            .filter(|&i| {
                let left = i == 0 || p[i] > p[i - 1];
                let right = i + 1 == n || p[i] >= p[i + 1];
                left && right && p[i] > 0.0
            })
            .collect();
        idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
        idx
    }

    pub fn total_power(&self) -> f64 {
        self.power
            .iter()
            .zip(self.bin_widths())
            .map(|(p, w)| p * w)
            .sum()
    }

    /// Fraction of total power at frequencies outside every band widened by `margin`.
    pub fn fraction_outside(&self, bands: &[Band], margin: f64) -> f64 {
        let total = self.total_power();
        if total <= 0.0 {
            return 0.0;
        }
        let outside: f64 = self
            .frequencies
            .iter()
            .zip(&self.power)
            .zip(self.bin_widths())
            .filter(|((f, _), _)| {
                !bands
                    .iter()
                    .any(|b| **f >= b.a() - margin && **f <= b.b() + margin)
            })
            .map(|((_, p), w)| p * w)
            .sum();
        outside / total
    }
}

fn argmax(v: &[f64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
}

fn bin_widths(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    match n {
        0 => vec![],
        1 => vec![1.0],
        _ => (0..n)
            .map(|i| {
                let lo = if i == 0 {
                    f[0] - 0.5 * (f[1] - f[0])
                } else {
                    0.5 * (f[i - 1] + f[i])
                };
                let hi = if i + 1 == n {
                    f[n - 1] + 0.5 * (f[n - 1] - f[n - 2])
                } else {
                    0.5 * (f[i] + f[i + 1])
                };
                hi - lo
            })
            .collect(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Default grid: spacing `1 / (4 span)` from one step above zero up to the
/// pseudo-Nyquist frequency `0.5 / median spacing`.
pub fn default_frequency_grid(ts: &TimeSeries) -> Result<Vec<f64>> {
    let (t0, t1) = ts
        .span()
        .ok_or_else(|| Error::InvalidSeries("empty series has no frequency grid".into()))?;
    if ts.len() < 2 {
        return Err(Error::InvalidSeries(
            "need at least two samples for a frequency grid".into(),
        ));
    }
    let span = t1 - t0;
    let dt = median(ts.times().windows(2).map(|w| w[1] - w[0]).collect());
    let df = 1.0 / (4.0 * span);
    let fmax = 0.5 / dt;
    let count = (fmax / df).floor() as usize;
    Ok((1..=count.max(1)).map(|k| k as f64 * df).collect())
}

/// Lomb-Scargle periodogram of the mean-centred series on `freq_grid`.
///
/// A constant series yields zero power everywhere (with a warning).
pub fn periodogram(ts: &TimeSeries, freq_grid: &[f64]) -> Result<PsdEstimate> {
    if ts.len() < 4 {
        return Err(Error::InvalidSeries(format!(
            "periodogram needs at least 4 samples, got {}",
            ts.len()
        )));
    }
    if freq_grid.is_empty()
        || freq_grid[0] <= 0.0
        || freq_grid.windows(2).any(|w| !(w[1] > w[0]))
        || freq_grid.iter().any(|f| !f.is_finite())
    {
        return Err(Error::InvalidParameter(
            "frequency grid must be positive, finite and strictly increasing".into(),
        ));
    }
    let mean = ts.mean();
    let y: Vec<f64> = ts.values().iter().map(|v| v - mean).collect();
    let var = ts.variance();
    if var == 0.0 {
        log::warn!("periodogram of a constant series: returning zero power");
        return Ok(PsdEstimate {
            frequencies: freq_grid.to_vec(),
            power: vec![0.0; freq_grid.len()],
            method: PsdMethod::LombScargle,
        });
    }
    let t = ts.times();
    let n = t.len() as f64;
    let raw: Vec<f64> = freq_grid
        .iter()
        .map(|&f| {
            let w = 2.0 * PI * f;
            let (s2, c2) = t.iter().fold((0.0, 0.0), |(s, c), &ti| {
                let a = 2.0 * w * ti;
                (s + a.sin(), c + a.cos())
            });
            let tau = s2.atan2(c2) / (2.0 * w);
            let mut yc = 0.0;
            let mut ys = 0.0;
            let mut cc = 0.0;
            let mut ss = 0.0;
            for (&ti, &yi) in t.iter().zip(&y) {
                let a = w * (ti - tau);
                let (s, c) = a.sin_cos();
                yc += yi * c;
                ys += yi * s;
                cc += c * c;
                ss += s * s;
            }
            let mut p = 0.0;
            if cc > 1e-12 * n {
                p += yc * yc / cc;
            }
            if ss > 1e-12 * n {
                p += ys * ys / ss;
            }
            0.5 * p
        })
        .collect();
    let widths = bin_widths(freq_grid);
    let integral: f64 = raw.iter().zip(&widths).map(|(p, w)| p * w).sum();
    let scale = if integral > 0.0 { var / integral } else { 0.0 };
    Ok(PsdEstimate {
        frequencies: freq_grid.to_vec(),
        power: raw.iter().map(|p| p * scale).collect(),
        method: PsdMethod::LombScargle,
    })
}

/// Welch estimate for uniformly sampled values: Hann-windowed segments of
/// `segment_len` samples with 50% overlap, one-sided density.
pub fn welch_uniform(values: &[f64], dt: f64, segment_len: usize) -> Result<PsdEstimate> {
    if segment_len < 4 || segment_len > values.len() {
        return Err(Error::InvalidParameter(format!(
            "segment length must be in [4, {}], got {segment_len}",
            values.len()
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    let window: Vec<f64> = (0..segment_len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / segment_len as f64).cos())
        .collect();
    let u: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(segment_len);
    let hop = segment_len / 2;
    let half = segment_len / 2 + 1;
    let mut acc = vec![0.0; half];
    let mut segments = 0;
    let mut start = 0;
    while start + segment_len <= values.len() {
        let seg = &values[start..start + segment_len];
        let m = seg.iter().sum::<f64>() / segment_len as f64;
        let mut buf: Vec<Complex<f64>> = seg
            .iter()
            .zip(&window)
            .map(|(v, w)| Complex::new((v - m) * w, 0.0))
            .collect();
        fft.process(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let scale = dt / (u * segments as f64);
    let power = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || (segment_len.is_multiple_of(2) && k == half - 1) {
                1.0
            } else {
                2.0
            };
            a * scale * one_sided
        })
        .collect();
    Ok(PsdEstimate {
        frequencies: (0..half)
            .map(|k| k as f64 / (segment_len as f64 * dt))
            .collect(),
        power,
        method: PsdMethod::WelchUniform,
    })
}

/// Maximal frequency intervals where power is at least `threshold * max`.
///
/// Each interval is widened by half a bin on both sides (clamped at zero),
/// so a single qualifying bin still yields a band of positive width.
pub fn support_estimate(psd: &PsdEstimate, threshold: f64) -> Result<Vec<Band>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be in (0, 1], got {threshold}"
        )));
    }
    let f = &psd.frequencies;
    let p = &psd.power;
    let Some(imax) = argmax(p) else {
        return Ok(vec![]);
    };
    let level = threshold * p[imax];
    if level <= 0.0 {
        return Ok(vec![]);
    }
    let widths = bin_widths(f);
    let mut bands = Vec::new();
    let mut i = 0;
    while i < p.len() {
        if p[i] >= level {
            let start = i;
            while i + 1 < p.len() && p[i + 1] >= level {
                i += 1;
            }
            let a = (f[start] - 0.5 * widths[start]).max(0.0);
            let b = f[i] + 0.5 * widths[i];
            bands.push(Band::new(a, b)?);
        }
        i += 1;
    }
    Ok(bands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn uniform_series(n: usize, dt: f64, f: impl Fn(f64) -> f64) -> TimeSeries {
        let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let v = t.iter().map(|&x| f(x)).collect();
        TimeSeries::new(t, v).unwrap()
    }

    #[test]
    fn sinusoid_peak_within_one_bin() {
        let ts = uniform_series(400, 0.05, |t| (2.0 * PI * 2.0 * t).sin());
        let grid = default_frequency_grid(&ts).unwrap();
        let psd = periodogram(&ts, &grid).unwrap();
        let bin = grid[1] - grid[0];
        assert!((psd.peak_frequency().unwrap() - 2.0).abs() <= bin);
        assert!((psd.total_power() - ts.variance()).abs() < 1e-9);
    }

    #[test]
    fn uneven_sampling_peak() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut t: Vec<f64> = (0..300)
            .map(|_| rand::Rng::random::<f64>(&mut rng) * 60.0)
            .collect();
        t.sort_by(f64::total_cmp);
        let v = t.iter().map(|x| (2.0 * PI * 0.7 * x + 0.3).cos()).collect();
        let ts = TimeSeries::new(t, v).unwrap();
        let grid: Vec<f64> = (1..800).map(|k| k as f64 * 0.0025).collect();
        let psd = periodogram(&ts, &grid).unwrap();
        assert!((psd.peak_frequency().unwrap() - 0.7).abs() <= 0.0025);
    }

    #[test]
    fn constant_series_has_zero_power() {
        let ts = uniform_series(20, 1.0, |_| 0.0);
        let psd = periodogram(&ts, &[0.1, 0.2, 0.3]).unwrap();
        assert!(psd.power.iter().all(|p| *p == 0.0));
        let ts = uniform_series(20, 1.0, |_| 3.5);
        let psd = periodogram(&ts, &[0.1, 0.2, 0.3]).unwrap();
        assert!(psd.power.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn periodogram_preconditions() {
        let ts = uniform_series(3, 1.0, |t| t);
        assert!(periodogram(&ts, &[0.1]).is_err());
        let ts = uniform_series(10, 1.0, |t| t.sin());
        assert!(periodogram(&ts, &[0.0, 0.1]).is_err());
        assert!(periodogram(&ts, &[0.2, 0.1]).is_err());
    }

    /// A single-look periodogram bin of white noise is exponential, so the
    /// chance that one bin exceeds five times the median is 2^-5. Check the
    /// pooled exceedance rate against that law, and the "no bin exceeds"
    /// statement on the averaged Welch estimate.
    #[test]
    fn white_noise_statistics() {
        let mut exceed = 0usize;
        let mut bins = 0usize;
        let mut welch_clean = 0usize;
        for seed in 0..100u64 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..512).map(|_| StandardNormal.sample(&mut rng)).collect();
            let t: Vec<f64> = (0..512).map(|i| i as f64).collect();
            let ts = TimeSeries::new(t, v.clone()).unwrap();
            let grid: Vec<f64> = (1..256).map(|k| k as f64 / 512.0).collect();
            let psd = periodogram(&ts, &grid).unwrap();
            let med = median(psd.power.clone());
            exceed += psd.power.iter().filter(|p| **p > 5.0 * med).count();
            bins += psd.power.len();

            let w = welch_uniform(&v, 1.0, 32).unwrap();
            let inner = &w.power[1..w.power.len() - 1];
            let med = median(inner.to_vec());
            if inner.iter().all(|p| *p <= 5.0 * med) {
                welch_clean += 1;
            }
        }
        let rate = exceed as f64 / bins as f64;
        assert!((0.02..0.045).contains(&rate), "exceedance rate {rate}");
        assert!(welch_clean >= 95, "welch clean in {welch_clean}/100");
    }

    #[test]
    fn welch_integrates_to_variance() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let v: Vec<f64> = (0..4096)
            .map(|_| 2.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let w = welch_uniform(&v, 0.5, 256).unwrap();
        let total = w.total_power();
        assert!((total - 4.0).abs() < 0.3, "total {total}");
        assert_eq!(w.method, PsdMethod::WelchUniform);
    }

    #[test]
    fn support_single_and_double_peaks() {
        let ts = uniform_series(500, 0.1, |t| (2.0 * PI * 1.0 * t).sin());
        let grid = default_frequency_grid(&ts).unwrap();
        let psd = periodogram(&ts, &grid).unwrap();
        let bands = support_estimate(&psd, 0.5).unwrap();
        assert_eq!(bands.len(), 1);
        assert!(bands[0].a() <= 1.0 && bands[0].b() >= 1.0);

        let ts = uniform_series(500, 0.1, |t| {
            (2.0 * PI * 0.5 * t).sin() + (2.0 * PI * 2.0 * t).cos()
        });
        let grid = default_frequency_grid(&ts).unwrap();
        let psd = periodogram(&ts, &grid).unwrap();
        let bands = support_estimate(&psd, 0.2).unwrap();
        assert_eq!(bands.len(), 2, "{bands:?}");
        assert!(bands[0].b() < bands[1].a());
        assert!(bands[0].a() <= 0.5 && 0.5 <= bands[0].b());
        assert!(bands[1].a() <= 2.0 && 2.0 <= bands[1].b());

        let top = support_estimate(&psd, 1.0).unwrap();
        let imax = argmax(&psd.power).unwrap();
        assert_eq!(top.len(), 1);
        assert!(top[0].a() <= psd.frequencies[imax] && psd.frequencies[imax] <= top[0].b());
        assert!(top[0].delta() <= 1.0001 * psd.bin_widths()[imax]);
        assert!(support_estimate(&psd, 0.0).is_err());
    }
}
