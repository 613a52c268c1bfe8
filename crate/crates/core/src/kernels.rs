//! Spectral densities and their covariance kernels.
//!
//! Every kernel here is stationary and is built from its power spectral
//! density (PSD): a symmetric pair of rectangles gives the sinc kernel, a
//! rectangle weighted by an envelope gives the generalised sinc kernel. The
//! module also carries two contrast kernels (a single-component spectral
//! mixture and discrete white noise) and sums of any of these.
//!
//! Frequencies are in cycles per time unit throughout.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sin(pi x)` with the argument reduced first so that integers map to an
/// exact zero and large arguments keep their accuracy.
fn sin_pi(x: f64) -> f64 {
    let mut r = x % 2.0;
    if r > 1.0 {
        r -= 2.0;
    } else if r < -1.0 {
        r += 2.0;
    }
    if r > 0.5 {
        r = 1.0 - r;
    } else if r < -0.5 {
        r = -1.0 - r;
    }
    (PI * r).sin()
}

/// The normalised sinc function `sin(pi x) / (pi x)`, equal to 1 at 0.
pub fn normalized_sinc(x: f64) -> f64 {
    let px = PI * x;
    if px.abs() < 1e-4 {
        let p2 = px * px;
        1.0 - p2 / 6.0 + p2 * p2 / 120.0
    } else {
        sin_pi(x) / px
    }
}

/// Rectangle function with the half-height convention at its edges.
fn rect(x: f64) -> f64 {
    let a = x.abs();
    if a < 0.5 {
        1.0
    } else if a == 0.5 {
        0.5
    } else {
        0.0
    }
}

/// Power, centre frequency and bandwidth of a symmetric-rectangle PSD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SincParams {
    sigma2: f64,
    xi0: f64,
    delta: f64,
}

impl SincParams {
    /// Overlapping rectangles (`delta > 2 xi0`) are allowed.
    pub fn new(sigma2: f64, xi0: f64, delta: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma2 must be finite and >= 0, got {sigma2}"
            )));
        }
        if !(xi0.is_finite() && xi0 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "xi0 must be finite and >= 0, got {xi0}"
            )));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must be finite and > 0, got {delta}"
            )));
        }
        Ok(Self { sigma2, xi0, delta })
    }

    pub fn centred(sigma2: f64, delta: f64) -> Result<Self> {
        Self::new(sigma2, 0.0, delta)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn xi0(&self) -> f64 {
        self.xi0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn validated(self) -> Result<Self> {
        Self::new(self.sigma2, self.xi0, self.delta)
    }
}

/// `sigma2 / (2 delta) * (rect((xi - xi0)/delta) + rect((xi + xi0)/delta))`.
///
/// Integrates to `sigma2` over the real line; overlapping rectangles add.
pub fn symmetric_rect_psd(p: &SincParams, xi: f64) -> f64 {
    p.sigma2 / (2.0 * p.delta) * (rect((xi - p.xi0) / p.delta) + rect((xi + p.xi0) / p.delta))
}

/// `sigma2 * sinc(delta tau) * cos(2 pi xi0 tau)`.
pub fn sinc_kernel(p: &SincParams, tau: f64) -> f64 {
    p.sigma2 * normalized_sinc(p.delta * tau) * (2.0 * PI * p.xi0 * tau).cos()
}

/// `sigma2 * sinc(delta tau)`; agrees bit for bit with [`sinc_kernel`] at `xi0 = 0`.
pub fn centred_sinc_kernel(sigma2: f64, delta: f64, tau: f64) -> f64 {
    sigma2 * normalized_sinc(delta * tau)
}

/// Frequency weighting applied on top of a symmetric rectangle.
///
/// Envelopes are even functions of frequency: they are evaluated at `|xi|`,
/// so symmetry holds by construction. They must be non-negative and
/// continuous almost everywhere; constructors enforce the first, and the
/// three shapes offered satisfy the second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralEnvelope {
    /// Flat weight.
    Constant { value: f64 },
    /// Tent of height `peak` centred at `|xi| = centre`, reaching zero at
    /// `centre +- half_width`.
    Triangular {
        peak: f64,
        centre: f64,
        half_width: f64,
    },
    /// Piecewise-constant weight: `values[k]` on `edges[k] <= |xi| < edges[k+1]`,
    /// zero outside `[edges[0], edges[last])`.
    Table { edges: Vec<f64>, values: Vec<f64> },
}

impl SpectralEnvelope {
    pub fn constant(value: f64) -> Result<Self> {
        let env = SpectralEnvelope::Constant { value };
        env.validate()?;
        Ok(env)
    }

    pub fn triangular(peak: f64, centre: f64, half_width: f64) -> Result<Self> {
        let env = SpectralEnvelope::Triangular {
            peak,
            centre,
            half_width,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn table(edges: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let env = SpectralEnvelope::Table { edges, values };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralEnvelope::Constant { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "constant envelope must be finite and >= 0, got {value}"
                    )));
                }
            }
            SpectralEnvelope::Triangular {
                peak,
                centre,
                half_width,
            } => {
                if !(peak.is_finite() && *peak >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "triangular envelope peak must be >= 0, got {peak}"
                    )));
                }
                if !(centre.is_finite() && *centre >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "triangular envelope centre must be >= 0, got {centre}"
                    )));
                }
                if !(half_width.is_finite() && *half_width > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "triangular envelope half width must be > 0, got {half_width}"
                    )));
                }
            }
            SpectralEnvelope::Table { edges, values } => {
                if edges.len() != values.len() + 1 || values.is_empty() {
                    return Err(Error::InvalidParameter(format!(
                        "table envelope needs len(edges) = len(values) + 1 >= 2, got {} and {}",
                        edges.len(),
                        values.len()
                    )));
                }
                if edges[0] < 0.0 || edges.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidParameter(
                        "table envelope edges must be non-negative and strictly increasing".into(),
                    ));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::InvalidParameter(
                        "table envelope values must be finite and >= 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, xi: f64) -> f64 {
        let a = xi.abs();
        match self {
            SpectralEnvelope::Constant { value } => *value,
            SpectralEnvelope::Triangular {
                peak,
                centre,
                half_width,
            } => peak * (1.0 - (a - centre).abs() / half_width).max(0.0),
            SpectralEnvelope::Table { edges, values } => {
                if a < edges[0] || a >= edges[edges.len() - 1] {
                    return 0.0;
                }
                // last edge <= a
                let k = edges.partition_point(|&e| e <= a) - 1;
                values[k]
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SpectralEnvelope::Constant { value } => format!("constant({value})"),
            SpectralEnvelope::Triangular {
                peak,
                centre,
                half_width,
            } => format!("triangular(peak={peak}, centre={centre}, half_width={half_width})"),
            SpectralEnvelope::Table { values, .. } => format!("table({} bins)", values.len()),
        }
    }
}

/// Order-`n` mid-point approximation of the generalised sinc kernel.
///
/// The band `[xi0 - delta/2, xi0 + delta/2]` is split into `n` sub-bands of
/// width `delta/n` with centres `xi0 - delta (n + 1 - 2i) / (2n)`; each
/// contributes a narrow sinc kernel of power `sigma2 / n` weighted by the
/// envelope at its centre. With a constant unit envelope the sum collapses
/// to [`sinc_kernel`] exactly.
pub fn gsk_approx(p: &SincParams, gamma: &SpectralEnvelope, n: usize, tau: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "generalised sinc order must be >= 1".into(),
        ));
    }
    Ok(gsk_sum(p, gamma, n, tau))
}

fn gsk_sum(p: &SincParams, gamma: &SpectralEnvelope, n: usize, tau: f64) -> f64 {
    let nf = n as f64;
    let mut acc = 0.0;
    for i in 1..=n {
        let xi = p.xi0 - p.delta * (nf + 1.0 - 2.0 * i as f64) / (2.0 * nf);
        let w = gamma.eval(xi);
        if w != 0.0 {
            acc += w * (2.0 * PI * xi * tau).cos();
        }
    }
    normalized_sinc(p.delta * tau / nf) * (p.sigma2 / nf) * acc
}

/// Density of a zero-mean Gaussian with variance `var`.
fn gaussian_density(x: f64, var: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (2.0 * PI * var).sqrt()
}

/// A stationary covariance, evaluable in time and frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelJson", into = "KernelJson")]
pub enum KernelSpec {
    /// `sigma2 sinc(delta tau)`; the stored parameters always have `xi0 = 0`.
    CentredSinc(SincParams),
    Sinc(SincParams),
    GeneralisedSinc {
        params: SincParams,
        envelope: SpectralEnvelope,
        order: usize,
    },
    /// Single-component spectral mixture `sigma2 exp(-2 pi^2 gamma tau^2) cos(2 pi xi0 tau)`;
    /// `gamma` is the variance of each Gaussian bump in frequency.
    SpectralMixture {
        sigma2: f64,
        xi0: f64,
        gamma: f64,
    },
    /// Discrete white noise: `sigma2` at lag zero, zero elsewhere; flat PSD `sigma2`.
    WhiteNoise {
        sigma2: f64,
    },
    Sum(Vec<KernelSpec>),
}

impl KernelSpec {
    pub fn centred_sinc(sigma2: f64, delta: f64) -> Result<Self> {
        Ok(KernelSpec::CentredSinc(SincParams::centred(sigma2, delta)?))
    }

    pub fn sinc(sigma2: f64, xi0: f64, delta: f64) -> Result<Self> {
        Ok(KernelSpec::Sinc(SincParams::new(sigma2, xi0, delta)?))
    }

    pub fn generalised_sinc(
        params: SincParams,
        envelope: SpectralEnvelope,
        order: usize,
    ) -> Result<Self> {
        let k = KernelSpec::GeneralisedSinc {
            params,
            envelope,
            order,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn spectral_mixture(sigma2: f64, xi0: f64, gamma: f64) -> Result<Self> {
        let k = KernelSpec::SpectralMixture { sigma2, xi0, gamma };
        k.validate()?;
        Ok(k)
    }

    pub fn white_noise(sigma2: f64) -> Result<Self> {
        let k = KernelSpec::WhiteNoise { sigma2 };
        k.validate()?;
        Ok(k)
    }

    pub fn sum(components: Vec<KernelSpec>) -> Result<Self> {
        let k = KernelSpec::Sum(components);
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::CentredSinc(p) => {
                p.validated()?;
                if p.xi0 != 0.0 {
                    return Err(Error::InvalidParameter(
                        "centred sinc kernel must have xi0 = 0".into(),
                    ));
                }
            }
            KernelSpec::Sinc(p) => {
                p.validated()?;
            }
            KernelSpec::GeneralisedSinc {
                params,
                envelope,
                order,
            } => {
                params.validated()?;
                envelope.validate()?;
                if *order == 0 {
                    return Err(Error::InvalidParameter(
                        "generalised sinc order must be >= 1".into(),
                    ));
                }
            }
            KernelSpec::SpectralMixture { sigma2, xi0, gamma } => {
                if !(sigma2.is_finite() && *sigma2 >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "sigma2 must be >= 0, got {sigma2}"
                    )));
                }
                if !(xi0.is_finite() && *xi0 >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "xi0 must be >= 0, got {xi0}"
                    )));
                }
                if !(gamma.is_finite() && *gamma > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "spectral mixture gamma must be > 0, got {gamma}"
                    )));
                }
            }
            KernelSpec::WhiteNoise { sigma2 } => {
                if !(sigma2.is_finite() && *sigma2 >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "sigma2 must be >= 0, got {sigma2}"
                    )));
                }
            }
            KernelSpec::Sum(parts) => {
                if parts.is_empty() {
                    return Err(Error::InvalidParameter("empty kernel sum".into()));
                }
                for p in parts {
                    p.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Covariance at lag `tau`.
    pub fn eval(&self, tau: f64) -> f64 {
        match self {
            KernelSpec::CentredSinc(p) => centred_sinc_kernel(p.sigma2, p.delta, tau),
            KernelSpec::Sinc(p) => sinc_kernel(p, tau),
            KernelSpec::GeneralisedSinc {
                params,
                envelope,
                order,
            } => gsk_sum(params, envelope, *order, tau),
            KernelSpec::SpectralMixture { sigma2, xi0, gamma } => {
                sigma2 * (-2.0 * PI * PI * gamma * tau * tau).exp() * (2.0 * PI * xi0 * tau).cos()
            }
            KernelSpec::WhiteNoise { sigma2 } => {
                if tau == 0.0 {
                    *sigma2
                } else {
                    0.0
                }
            }
            KernelSpec::Sum(parts) => parts.iter().map(|k| k.eval(tau)).sum(),
        }
    }

    /// Power spectral density at frequency `xi`.
    pub fn psd(&self, xi: f64) -> f64 {
        match self {
            KernelSpec::CentredSinc(p) | KernelSpec::Sinc(p) => symmetric_rect_psd(p, xi),
            KernelSpec::GeneralisedSinc {
                params, envelope, ..
            } => symmetric_rect_psd(params, xi) * envelope.eval(xi),
            KernelSpec::SpectralMixture { sigma2, xi0, gamma } => {
                0.5 * sigma2
                    * (gaussian_density(xi - xi0, *gamma) + gaussian_density(xi + xi0, *gamma))
            }
            KernelSpec::WhiteNoise { sigma2 } => *sigma2,
            KernelSpec::Sum(parts) => parts.iter().map(|k| k.psd(xi)).sum(),
        }
    }

    /// Prior variance `K(0)`.
    pub fn variance(&self) -> f64 {
        self.eval(0.0)
    }

    /// Total variance carried by white-noise components.
    pub fn white_variance(&self) -> f64 {
        match self {
            KernelSpec::WhiteNoise { sigma2 } => *sigma2,
            KernelSpec::Sum(parts) => parts.iter().map(|k| k.white_variance()).sum(),
            _ => 0.0,
        }
    }

    /// Rectangles `[xi0 - delta/2, xi0 + delta/2]` of every band-limited
    /// component, or `None` when some component has unbounded support.
    pub fn support_rectangles(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            KernelSpec::CentredSinc(p)
            | KernelSpec::Sinc(p)
            | KernelSpec::GeneralisedSinc { params: p, .. } => {
                Some(vec![(p.xi0 - p.delta / 2.0, p.xi0 + p.delta / 2.0)])
            }
            KernelSpec::SpectralMixture { .. } | KernelSpec::WhiteNoise { .. } => None,
            KernelSpec::Sum(parts) => {
                let mut out = Vec::new();
                for p in parts {
                    out.extend(p.support_rectangles()?);
                }
                Some(out)
            }
        }
    }

    /// Short name used in messages and JSON.
    pub fn variant_name(&self) -> &'static str {
        match self {
            KernelSpec::CentredSinc(_) => "centred_sinc",
            KernelSpec::Sinc(_) => "sinc",
            KernelSpec::GeneralisedSinc { .. } => "gsk",
            KernelSpec::SpectralMixture { .. } => "sm",
            KernelSpec::WhiteNoise { .. } => "white",
            KernelSpec::Sum(_) => "sum",
        }
    }

    /// `(sigma2, xi0, delta)` summary used in training traces. Sums report
    /// total power, the first component's centre and the summed widths;
    /// the spectral mixture reports `sqrt(gamma)` as its width.
    pub fn summary(&self) -> (f64, f64, f64) {
        match self {
            KernelSpec::CentredSinc(p)
            | KernelSpec::Sinc(p)
            | KernelSpec::GeneralisedSinc { params: p, .. } => (p.sigma2, p.xi0, p.delta),
            KernelSpec::SpectralMixture { sigma2, xi0, gamma } => (*sigma2, *xi0, gamma.sqrt()),
            KernelSpec::WhiteNoise { sigma2 } => (*sigma2, 0.0, f64::NAN),
            KernelSpec::Sum(parts) => {
                let s: Vec<_> = parts.iter().map(|k| k.summary()).collect();
                (
                    s.iter().map(|v| v.0).sum(),
                    s.first().map_or(0.0, |v| v.1),
                    s.iter().map(|v| v.2).sum(),
                )
            }
        }
    }

    /// Trainable parameters in optimiser coordinates: log for positive
    /// quantities, linear for centre frequencies.
    pub fn parameters(&self) -> Vec<Param> {
        let mut out = Vec::new();
        self.push_parameters(&mut out);
        out
    }

    fn push_parameters(&self, out: &mut Vec<Param>) {
        match self {
            KernelSpec::CentredSinc(p) => {
                out.push(Param::log(p.sigma2));
                out.push(Param::log(p.delta));
            }
            KernelSpec::Sinc(p) | KernelSpec::GeneralisedSinc { params: p, .. } => {
                out.push(Param::log(p.sigma2));
                out.push(Param::frequency(p.xi0));
                out.push(Param::log(p.delta));
            }
            KernelSpec::SpectralMixture { sigma2, xi0, gamma } => {
                out.push(Param::log(*sigma2));
                out.push(Param::frequency(*xi0));
                out.push(Param::log(*gamma));
            }
            KernelSpec::WhiteNoise { sigma2 } => out.push(Param::log(*sigma2)),
            KernelSpec::Sum(parts) => {
                for k in parts {
                    k.push_parameters(out);
                }
            }
        }
    }

    /// Rebuilds the kernel from optimiser coordinates (inverse of [`parameters`](Self::parameters)).
    pub fn with_parameters(&self, x: &[f64]) -> Result<Self> {
        let mut it = x.iter().copied();
        let k = self.rebuild(&mut it)?;
        if it.next().is_some() {
            return Err(Error::InvalidParameter("too many kernel parameters".into()));
        }
        Ok(k)
    }

    fn rebuild(&self, it: &mut impl Iterator<Item = f64>) -> Result<Self> {
        let mut next = || {
            it.next()
                .ok_or_else(|| Error::InvalidParameter("too few kernel parameters".into()))
        };
        Ok(match self {
            KernelSpec::CentredSinc(_) => {
                let s = next()?.exp();
                let d = next()?.exp();
                KernelSpec::CentredSinc(SincParams::centred(s, d)?)
            }
            KernelSpec::Sinc(_) => {
                let s = next()?.exp();
                let x = next()?.max(0.0);
                let d = next()?.exp();
                KernelSpec::Sinc(SincParams::new(s, x, d)?)
            }
            KernelSpec::GeneralisedSinc {
                envelope, order, ..
            } => {
                let s = next()?.exp();
                let x = next()?.max(0.0);
                let d = next()?.exp();
                KernelSpec::GeneralisedSinc {
                    params: SincParams::new(s, x, d)?,
                    envelope: envelope.clone(),
                    order: *order,
                }
            }
            KernelSpec::SpectralMixture { .. } => {
                let s = next()?.exp();
                let x = next()?.max(0.0);
                let g = next()?.exp();
                KernelSpec::spectral_mixture(s, x, g)?
            }
            KernelSpec::WhiteNoise { .. } => KernelSpec::white_noise(next()?.exp())?,
            KernelSpec::Sum(parts) => KernelSpec::Sum(
                parts
                    .iter()
                    .map(|k| k.rebuild(it))
                    .collect::<Result<Vec<_>>>()?,
            ),
        })
    }
}

/// One trainable coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Param {
    pub value: f64,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Natural log of a positive quantity.
    Log,
    /// A centre frequency, clamped at zero.
    Frequency,
}

impl Param {
    fn log(v: f64) -> Self {
        Param {
            value: v.max(f64::MIN_POSITIVE).ln(),
            kind: ParamKind::Log,
        }
    }

    fn frequency(v: f64) -> Self {
        Param {
            value: v,
            kind: ParamKind::Frequency,
        }
    }
}

/// Free-function form of [`KernelSpec::eval`].
pub fn kernel_eval(spec: &KernelSpec, tau: f64) -> f64 {
    spec.eval(tau)
}

/// Free-function form of [`KernelSpec::psd`].
pub fn kernel_psd(spec: &KernelSpec, xi: f64) -> f64 {
    spec.psd(xi)
}

const PARALLEL_GRAM_MIN: usize = 128 * 128;

/// `K[i, j] = k(a[i] - b[j])`. Rows are filled independently, so the result
/// does not depend on the thread schedule.
pub fn gram_matrix(spec: &KernelSpec, times_a: &[f64], times_b: &[f64]) -> DMatrix<f64> {
    gram_with(|tau| spec.eval(tau), times_a, times_b)
}

/// Square Gram matrix with exactly symmetric storage.
pub fn gram_symmetric(spec: &KernelSpec, times: &[f64]) -> DMatrix<f64> {
    gram_symmetric_with(|tau| spec.eval(tau), times)
}

pub(crate) fn gram_with<F>(k: F, times_a: &[f64], times_b: &[f64]) -> DMatrix<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    let (n, m) = (times_a.len(), times_b.len());
    // nalgebra is column-major; build row-major then transpose the view.
    let mut data = vec![0.0; n * m];
    let fill = |(i, row): (usize, &mut [f64])| {
        let ti = times_a[i];
        for (j, v) in row.iter_mut().enumerate() {
            *v = k(ti - times_b[j]);
        }
    };
    if n * m >= PARALLEL_GRAM_MIN && m > 0 {
        data.par_chunks_mut(m).enumerate().for_each(fill);
    } else if m > 0 {
        data.chunks_mut(m).enumerate().for_each(fill);
    }
    DMatrix::from_row_slice(n, m, &data)
}

pub(crate) fn gram_symmetric_with<F>(k: F, times: &[f64]) -> DMatrix<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    let mut g = gram_with(k, times, times);
    let n = times.len();
    for i in 0..n {
        for j in (i + 1)..n {
            g[(j, i)] = g[(i, j)];
        }
    }
    g
}

// JSON wire format: a flat object tagged by "variant".
#[derive(Debug, Clone, Serialize, Deserialize)]
struct KernelJson {
    variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    xi0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<SpectralEnvelope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lengthscale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    components: Option<Vec<KernelJson>>,
}

impl KernelJson {
    fn bare(variant: &str) -> Self {
        KernelJson {
            variant: variant.to_string(),
            sigma2: None,
            xi0: None,
            delta: None,
            gamma: None,
            order: None,
            lengthscale: None,
            components: None,
        }
    }
}

fn required(v: Option<f64>, key: &str, variant: &str) -> Result<f64> {
    v.ok_or_else(|| Error::InvalidParameter(format!("kernel `{variant}` requires `{key}`")))
}

impl TryFrom<KernelJson> for KernelSpec {
    type Error = Error;

    fn try_from(j: KernelJson) -> Result<Self> {
        let v = j.variant.as_str();
        let spec = match v {
            "centred_sinc" => KernelSpec::centred_sinc(
                required(j.sigma2, "sigma2", v)?,
                required(j.delta, "delta", v)?,
            )?,
            "sinc" => KernelSpec::sinc(
                required(j.sigma2, "sigma2", v)?,
                required(j.xi0, "xi0", v)?,
                required(j.delta, "delta", v)?,
            )?,
            "gsk" => KernelSpec::generalised_sinc(
                SincParams::new(
                    required(j.sigma2, "sigma2", v)?,
                    required(j.xi0, "xi0", v)?,
                    required(j.delta, "delta", v)?,
                )?,
                j.gamma.ok_or_else(|| {
                    Error::InvalidParameter("kernel `gsk` requires `gamma`".into())
                })?,
                j.order.ok_or_else(|| {
                    Error::InvalidParameter("kernel `gsk` requires `order`".into())
                })?,
            )?,
            "sm" => KernelSpec::spectral_mixture(
                required(j.sigma2, "sigma2", v)?,
                required(j.xi0, "xi0", v)?,
                required(j.lengthscale, "lengthscale", v)?,
            )?,
            "white" => KernelSpec::white_noise(required(j.sigma2, "sigma2", v)?)?,
            "sum" => KernelSpec::sum(
                j.components
                    .ok_or_else(|| {
                        Error::InvalidParameter("kernel `sum` requires `components`".into())
                    })?
                    .into_iter()
                    .map(KernelSpec::try_from)
                    .collect::<Result<Vec<_>>>()?,
            )?,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown kernel variant `{other}`"
                )))
            }
        };
        Ok(spec)
    }
}

impl From<KernelSpec> for KernelJson {
    fn from(k: KernelSpec) -> Self {
        let mut j = KernelJson::bare(k.variant_name());
        match k {
            KernelSpec::CentredSinc(p) => {
                j.sigma2 = Some(p.sigma2);
                j.delta = Some(p.delta);
            }
            KernelSpec::Sinc(p) => {
                j.sigma2 = Some(p.sigma2);
                j.xi0 = Some(p.xi0);
                j.delta = Some(p.delta);
            }
            KernelSpec::GeneralisedSinc {
                params,
                envelope,
                order,
            } => {
                j.sigma2 = Some(params.sigma2);
                j.xi0 = Some(params.xi0);
                j.delta = Some(params.delta);
                j.gamma = Some(envelope);
                j.order = Some(order);
            }
            KernelSpec::SpectralMixture { sigma2, xi0, gamma } => {
                j.sigma2 = Some(sigma2);
                j.xi0 = Some(xi0);
                j.lengthscale = Some(gamma);
            }
            KernelSpec::WhiteNoise { sigma2 } => j.sigma2 = Some(sigma2),
            KernelSpec::Sum(parts) => {
                j.components = Some(parts.into_iter().map(KernelJson::from).collect())
            }
        }
        j
    }
}
