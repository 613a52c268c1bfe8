//! Band-pass filtering with Gaussian processes.
//!
//! The observed process is split into an in-band part and a remainder. The
//! in-band covariance is the source covariance with its spectrum restricted
//! to `±[a, b]`, evaluated by quadrature in the frequency domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{condition, GPModel, PosteriorSummary, TimeSeries};
use crate::kernels::{gram_symmetric_with, gram_with, normalized_sinc, KernelSpec};

/// Default number of quadrature cells across a band.
pub const DEFAULT_ORDER: usize = 512;

/// Frequency interval `[a, b]` with `0 <= a < b`, mirrored onto `[-b, -a]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct Band {
    a: f64,
    b: f64,
}

impl Band {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && b > a) {
            return Err(Error::InvalidParameter(format!(
                "band needs 0 <= a < b, got [{a}, {b}]"
            )));
        }
        Ok(Band { a, b })
    }

    /// Band `[xi0 - delta/2, xi0 + delta/2]`.
    pub fn centred_on(xi0: f64, delta: f64) -> Result<Self> {
        Band::new(xi0 - 0.5 * delta, xi0 + 0.5 * delta)
    }

    pub fn low_pass(b: f64) -> Result<Self> {
        Band::new(0.0, b)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn xi0(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn delta(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, xi: f64) -> bool {
        let x = xi.abs();
        x >= self.a && x <= self.b
    }
}

impl TryFrom<(f64, f64)> for Band {
    type Error = Error;

    fn try_from((a, b): (f64, f64)) -> Result<Self> {
        Band::new(a, b)
    }
}

impl From<Band> for (f64, f64) {
    fn from(band: Band) -> Self {
        (band.a, band.b)
    }
}

impl std::str::FromStr for Band {
    type Err = Error;

    /// Parses `"a,b"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [a, b] = parts.as_slice() else {
            return Err(Error::InvalidParameter(format!(
                "band must look like 'a,b', got '{s}'"
            )));
        };
        let parse = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad band edge '{v}'")))
        };
        Band::new(parse(a)?, parse(b)?)
    }
}

/// Source covariance restricted to a band.
///
/// The band is cut into `order` equal cells. Each cell contributes the
/// exact covariance of a flat spectrum carrying the source power inside the
/// cell, so sources that are flat across the band are reproduced up to
/// roundoff and spectral lines narrower than a cell are not lost.
#[derive(Debug, Clone)]
pub struct BandKernel {
    source: KernelSpec,
    band: Band,
    order: usize,
    cell: f64,
    first_node: f64,
    weights: Vec<f64>,
    /// `(centre, width, power)` of flat pieces of cells that straddle a
    /// jump in the source PSD. Their cells carry zero weight.
    pieces: Vec<(f64, f64, f64)>,
    table: Option<LagTable>,
}

#[derive(Debug, Clone)]
struct LagTable {
    pitch: f64,
    values: Vec<f64>,
}

impl BandKernel {
    pub fn new(source: KernelSpec, band: Band, order: usize) -> Result<Self> {
        if order < 8 {
            return Err(Error::InvalidParameter(format!(
                "quadrature order must be >= 8, got {order}"
            )));
        }
        source.validate()?;
        let cell = band.delta() / order as f64;
        let first_node = band.a() + 0.5 * cell;
        let edges = psd_breakpoints(&source);
        let mut weights = Vec::with_capacity(order);
        let mut pieces = Vec::new();
        for i in 0..order {
            let lo = band.a() + i as f64 * cell;
            let split = cell_pieces(&source, lo, lo + cell, &edges);
            if let Some((c, w, p)) = split.iter().find(|(_, _, p)| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "source PSD is undefined near {c} (width {w}, power {p})"
                )));
            }
            if split.len() == 1 {
                weights.push(split[0].2);
            } else {
                weights.push(0.0);
                pieces.extend(split.into_iter().filter(|p| p.2 > 0.0));
            }
        }
        Ok(BandKernel {
            source,
            band,
            order,
            cell,
            first_node,
            weights,
            pieces,
            table: None,
        })
    }

    /// Adds a lookup table on `[0, max_lag]` with pitch `1 / (20 b)`,
    /// interpolated linearly. Lags beyond the table fall back to quadrature.
    ///
    /// Interpolation error is of order `(pitch * b)^2` relative, so this only
    /// pays off when many repeated evaluations tolerate that accuracy.
    pub fn with_table(mut self, max_lag: f64) -> Self {
        let pitch = 1.0 / (20.0 * self.band.b());
        let count = (max_lag.abs() / pitch).ceil() as usize + 2;
        let values = (0..count)
            .map(|i| self.eval_direct(i as f64 * pitch))
            .collect();
        self.table = Some(LagTable { pitch, values });
        self
    }

    pub fn source(&self) -> &KernelSpec {
        &self.source
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn eval(&self, tau: f64) -> f64 {
        let tau = tau.abs();
        if let Some(t) = &self.table {
            let x = tau / t.pitch;
            let i = x.floor() as usize;
            if i + 1 < t.values.len() {
                let w = x - i as f64;
                return (1.0 - w) * t.values[i] + w * t.values[i + 1];
            }
        }
        self.eval_direct(tau)
    }

    fn eval_direct(&self, tau: f64) -> f64 {
        let step = 2.0 * std::f64::consts::PI * self.cell * tau;
        let (ds, dc) = step.sin_cos();
        let (mut s, mut c) = (2.0 * std::f64::consts::PI * self.first_node * tau).sin_cos();
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w * c;
            let c_next = c * dc - s * ds;
            s = s * dc + c * ds;
            c = c_next;
        }
        let extra: f64 = self
            .pieces
            .iter()
            .map(|(c, w, p)| {
                p * normalized_sinc(w * tau) * (2.0 * std::f64::consts::PI * c * tau).cos()
            })
            .sum();
        normalized_sinc(self.cell * tau) * acc + extra
    }

    /// In-band power, `K_band(0)`.
    pub fn power(&self) -> f64 {
        self.weights.iter().sum::<f64>() + self.pieces.iter().map(|p| p.2).sum::<f64>()
    }
}

/// Sorted frequencies where the source PSD may jump.
fn psd_breakpoints(spec: &KernelSpec) -> Vec<f64> {
    let mut out: Vec<f64> = spec
        .support_rectangles()
        .unwrap_or_else(|| match spec {
            KernelSpec::Sum(parts) => parts
                .iter()
                .filter_map(|p| p.support_rectangles())
                .flatten()
                .collect(),
            _ => vec![],
        })
        .into_iter()
        .flat_map(|(lo, hi)| [lo, hi, -lo, -hi])
        .filter(|x| *x >= 0.0)
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// `[lo, hi]` cut at the breakpoints, as `(centre, width, power)` with the
/// power counting both signs of frequency. PSD values are taken at the
/// centre of each piece.
fn cell_pieces(spec: &KernelSpec, lo: f64, hi: f64, edges: &[f64]) -> Vec<(f64, f64, f64)> {
    let start = edges.partition_point(|&x| x <= lo);
    let mut a = lo;
    let mut out = Vec::with_capacity(1);
    for &b in edges[start..].iter().take_while(|&&x| x < hi).chain([&hi]) {
        if b > a {
            let c = 0.5 * (a + b);
            out.push((c, b - a, 2.0 * spec.psd(c) * (b - a)));
        }
        a = b;
    }
    out
}

/// `K_band(tau)` for a one-off evaluation.
pub fn band_kernel(source: &KernelSpec, band: Band, order: usize, tau: f64) -> Result<f64> {
    Ok(BandKernel::new(source.clone(), band, order)?.eval(tau))
}

/// Posterior of the in-band component given noisy observations of the full
/// process. The observation covariance uses the full source kernel; the
/// cross and prior terms use the band kernel.
pub fn bandpass_posterior(
    obs: &TimeSeries,
    source: &KernelSpec,
    band: Band,
    noise_var: f64,
    query: &[f64],
) -> Result<PosteriorSummary> {
    let kb = BandKernel::new(source.clone(), band, DEFAULT_ORDER)?;
    bandpass_posterior_with(obs, &kb, noise_var, query)
}

pub fn bandpass_posterior_with(
    obs: &TimeSeries,
    kb: &BandKernel,
    noise_var: f64,
    query: &[f64],
) -> Result<PosteriorSummary> {
    let model = GPModel::new(kb.source().clone(), noise_var)?;
    let prior_qq = gram_symmetric_with(|t| kb.eval(t), query);
    if obs.is_empty() {
        return PosteriorSummary::prior(query, prior_qq);
    }
    let factor = model.factor(obs.times())?;
    let cross = gram_with(|t| kb.eval(t), query, obs.times());
    condition(query, prior_qq, &cross, &factor, &obs.values_vector())
}

/// Posterior mean of the in-band component only.
///
/// Unlike [`bandpass_posterior`] this never forms the posterior covariance,
/// so it also serves sources whose restricted kernel is not a consistent
/// prior for the given observation times (a discrete white-noise source
/// sampled faster than the band's Nyquist rate, for instance).
pub fn bandpass_mean(
    obs: &TimeSeries,
    kb: &BandKernel,
    noise_var: f64,
    query: &[f64],
) -> Result<Vec<f64>> {
    if obs.is_empty() {
        return Ok(vec![0.0; query.len()]);
    }
    let model = GPModel::new(kb.source().clone(), noise_var)?;
    let alpha = model.factor(obs.times())?.solve(&obs.values_vector());
    let cross = gram_with(|t| kb.eval(t), query, obs.times());
    Ok((cross * alpha).iter().copied().collect())
}

/// Classical ideal band-pass estimate `sum_i sinc(D (t - t_i)) cos(2 pi c (t - t_i)) y_i`.
pub fn brick_wall(obs: &TimeSeries, band: Band, query: &[f64]) -> Vec<f64> {
    let (d, c) = (band.delta(), band.xi0());
    query
        .iter()
        .map(|&t| {
            obs.times()
                .iter()
                .zip(obs.values())
                .map(|(&ti, &yi)| {
                    let tau = t - ti;
                    normalized_sinc(d * tau) * (2.0 * std::f64::consts::PI * c * tau).cos() * yi
                })
                .sum()
        })
        .collect()
}
