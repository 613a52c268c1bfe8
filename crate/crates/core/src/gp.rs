//! Exact Gaussian process inference.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, gram_symmetric, KernelSpec};
use crate::linalg::{Factor, DEFAULT_JITTER};

/// Observations at strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    noise_std: Option<f64>,
}

impl TimeSeries {
    /// Validates finiteness, equal lengths and strictly increasing times.
    ///
    /// An empty series is accepted: it stands for "no observations" and
    /// conditions to the prior.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidSeries(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "non-finite time at index {i}"
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "non-finite value at index {i}"
            )));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSeries(format!(
                "times not strictly increasing at index {} ({} then {})",
                i + 1,
                times[i],
                times[i + 1]
            )));
        }
        Ok(Self {
            times,
            values,
            noise_std: None,
        })
    }

    pub fn empty() -> Self {
        Self {
            times: Vec::new(),
            values: Vec::new(),
            noise_std: None,
        }
    }

    pub fn with_noise_std(mut self, noise_std: f64) -> Result<Self> {
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise std must be >= 0, got {noise_std}"
            )));
        }
        self.noise_std = Some(noise_std);
        Ok(self)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn noise_std(&self) -> Option<f64> {
        self.noise_std
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `(first time, last time)`, or `None` when empty.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((*self.times.first()?, *self.times.last()?))
    }

    pub fn mean(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Population variance of the values.
    pub fn variance(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let m = self.mean();
        self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.len() as f64
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Keeps the points whose time satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(f64) -> bool) -> Self {
        let (times, values) = self
            .times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| keep(**t))
            .map(|(t, v)| (*t, *v))
            .unzip();
        Self {
            times,
            values,
            noise_std: self.noise_std,
        }
    }

    pub(crate) fn values_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }
}

/// A kernel plus Gaussian observation noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GPModel {
    #[serde(flatten)]
    kernel: KernelSpec,
    noise_var: f64,
    /// Relative Cholesky jitter.
    #[serde(default = "default_jitter", skip_serializing)]
    jitter: f64,
}

fn default_jitter() -> f64 {
    DEFAULT_JITTER
}

impl GPModel {
    pub fn new(kernel: KernelSpec, noise_var: f64) -> Result<Self> {
        kernel.validate()?;
        if !(noise_var.is_finite() && noise_var >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be >= 0, got {noise_var}"
            )));
        }
        Ok(Self {
            kernel,
            noise_var,
            jitter: DEFAULT_JITTER,
        })
    }

    /// Overrides the relative jitter (default `1e-8 * max(diag)`).
    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Factor of `K(t, t) + noise_var I` (plus jitter).
    pub fn factor(&self, times: &[f64]) -> Result<Factor> {
        let mut lambda = gram_symmetric(&self.kernel, times);
        for i in 0..times.len() {
            lambda[(i, i)] += self.noise_var;
        }
        Factor::new(
            lambda,
            self.jitter,
            self.noise_var + self.kernel.white_variance(),
        )
    }
}

/// Posterior mean, marginal variance and covariance over a query grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub query_times: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

impl PosteriorSummary {
    /// Prior (zero-mean) summary with the given covariance.
    pub(crate) fn prior(query: &[f64], covariance: DMatrix<f64>) -> Result<Self> {
        finish(query, DVector::zeros(query.len()), covariance)
    }

    /// `count` joint draws from the posterior, one per row.
    pub fn draws<R: rand::Rng + ?Sized>(
        &self,
        count: usize,
        jitter: f64,
        rng: &mut R,
    ) -> Result<DMatrix<f64>> {
        let n = self.mean.len();
        let mut out = DMatrix::from_fn(count, n, |_, j| self.mean[j]);
        if self.covariance.iter().all(|v| *v == 0.0) {
            return Ok(out);
        }
        let l = Factor::new(self.covariance.clone(), jitter, 0.0)?.l();
        let z = DMatrix::from_fn(n, count, |_, _| StandardNormal.sample(rng));
        out += (l * z).transpose();
        Ok(out)
    }
}

/// Conditions on observations given the pieces of a joint Gaussian.
///
/// `prior_qq` is the prior covariance of the target at the query times,
/// `cross` the covariance between target (rows) and observations (columns),
/// and `factor` the factorised observation covariance.
pub(crate) fn condition(
    query: &[f64],
    prior_qq: DMatrix<f64>,
    cross: &DMatrix<f64>,
    factor: &Factor,
    y: &DVector<f64>,
) -> Result<PosteriorSummary> {
    let alpha = factor.solve(y);
    let mean = cross * &alpha;
    let v = factor.solve_lower(&cross.transpose());
    let cov = prior_qq - v.transpose() * v;
    finish(query, mean, cov)
}

/// Symmetrises the covariance and clamps roundoff-level negative variances.
pub(crate) fn finish(
    query: &[f64],
    mean: DVector<f64>,
    cov: DMatrix<f64>,
) -> Result<PosteriorSummary> {
    finish_with_scale(query, mean, cov, None)
}

pub(crate) fn finish_with_scale(
    query: &[f64],
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    prior_diag: Option<&[f64]>,
) -> Result<PosteriorSummary> {
    let mut cov = (&cov + cov.transpose()) * 0.5;
    let m = query.len();
    let mut variance = Vec::with_capacity(m);
    for i in 0..m {
        let v = cov[(i, i)];
        if v < 0.0 {
            let scale = prior_diag.map_or(1.0, |d| d[i].abs().max(f64::MIN_POSITIVE));
            if v < -1e-9 * scale {
                return Err(Error::NegativeVariance { index: i, value: v });
            }
            cov[(i, i)] = 0.0;
            variance.push(0.0);
        } else {
            variance.push(v);
        }
    }
    Ok(PosteriorSummary {
        query_times: query.to_vec(),
        mean: mean.iter().copied().collect(),
        variance,
        covariance: cov,
    })
}

/// Exact GP posterior of the latent function at `query`.
///
/// `Lambda = K(t, t) + noise_var I` is only ever applied through Cholesky
/// solves. An empty `obs` returns the prior.
pub fn posterior(model: &GPModel, obs: &TimeSeries, query: &[f64]) -> Result<PosteriorSummary> {
    let prior_qq = gram_symmetric(&model.kernel, query);
    let prior_diag: Vec<f64> = (0..query.len()).map(|i| prior_qq[(i, i)]).collect();
    if obs.is_empty() {
        return PosteriorSummary::prior(query, prior_qq);
    }
    let factor = model.factor(obs.times())?;
    let cross = gram_matrix(&model.kernel, query, obs.times());
    let y = obs.values_vector();
    let alpha = factor.solve(&y);
    let mean = &cross * &alpha;
    let v = factor.solve_lower(&cross.transpose());
    let cov = prior_qq - v.transpose() * v;
    finish_with_scale(query, mean, cov, Some(&prior_diag))
}

/// `-1/2 y' Lambda^{-1} y - 1/2 log|Lambda| - n/2 log(2 pi)`.
pub fn log_marginal_likelihood(model: &GPModel, obs: &TimeSeries) -> Result<f64> {
    if obs.is_empty() {
        return Ok(0.0);
    }
    let factor = model.factor(obs.times())?;
    let y = obs.values_vector();
    let alpha = factor.solve(&y);
    let n = obs.len() as f64;
    Ok(-0.5 * y.dot(&alpha) - 0.5 * factor.log_det() - 0.5 * n * (2.0 * PI).ln())
}

/// `count` zero-mean draws of the latent process (kernel covariance, no
/// observation noise) at `times`, one per row. Deterministic in `seed`.
pub fn sample(model: &GPModel, times: &[f64], seed: u64, count: usize) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    sample_with_rng(model.kernel(), model.jitter(), times, count, &mut rng)
}

pub(crate) fn sample_with_rng<R: rand::Rng + ?Sized>(
    kernel: &KernelSpec,
    jitter: f64,
    times: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let n = times.len();
    let k = gram_symmetric(kernel, times);
    if k.iter().all(|v| *v == 0.0) {
        return Ok(DMatrix::zeros(count, n));
    }
    let factor = Factor::new(k, jitter, kernel.white_variance())?;
    let l = factor.l();
    let z = DMatrix::from_fn(n, count, |_, _| StandardNormal.sample(rng));
    Ok((l * z).transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn centred(s: f64, d: f64) -> KernelSpec {
        KernelSpec::centred_sinc(s, d).unwrap()
    }

    #[test]
    fn series_validation() {
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(TimeSeries::new(vec![1.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(vec![1.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(vec![0.0, f64::NAN], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![1.0, f64::INFINITY]).is_err());
        assert!(TimeSeries::new(vec![], vec![]).unwrap().is_empty());
    }

    #[test]
    fn single_noiseless_observation_is_interpolated() {
        let model = GPModel::new(KernelSpec::sinc(1.0, 0.3, 0.5).unwrap(), 0.0).unwrap();
        let obs = TimeSeries::new(vec![0.0], vec![2.0]).unwrap();
        let post = posterior(&model, &obs, &[0.0]).unwrap();
        assert_abs_diff_eq!(post.mean[0], 2.0, epsilon = 1e-7);
        assert_abs_diff_eq!(post.variance[0], 0.0, epsilon = 1e-7);
    }

    #[test]
    fn empty_observations_give_prior() {
        let model = GPModel::new(centred(1.7, 0.5), 0.1).unwrap();
        let q = [0.0, 0.3, 5.0];
        let post = posterior(&model, &TimeSeries::empty(), &q).unwrap();
        assert!(post.mean.iter().all(|m| *m == 0.0));
        assert!(post.variance.iter().all(|v| *v == 1.7));
    }

    #[test]
    fn integer_grid_interpolates_exactly() {
        let model = GPModel::new(centred(1.0, 1.0), 0.0).unwrap();
        let times: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let values = vec![0.3, -1.2, 0.8, 2.0, -0.4, 0.0, 1.1, -0.7];
        let obs = TimeSeries::new(times.clone(), values.clone()).unwrap();
        let post = posterior(&model, &obs, &times).unwrap();
        for ((m, v), y) in post.mean.iter().zip(&post.variance).zip(&values) {
            assert_abs_diff_eq!(*m, *y, epsilon = 1e-7);
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-7);
        }
        let c = &post.covariance;
        assert_eq!(c, &c.transpose());
    }

    #[test]
    fn lml_closed_forms() {
        let white = GPModel::new(KernelSpec::white_noise(1.0).unwrap(), 0.0).unwrap();
        let obs = TimeSeries::new(vec![0.0], vec![0.0]).unwrap();
        assert_abs_diff_eq!(
            log_marginal_likelihood(&white, &obs).unwrap(),
            -0.5 * (2.0 * PI).ln(),
            epsilon = 1e-12
        );
        let obs = TimeSeries::new(vec![0.0], vec![1.0]).unwrap();
        assert_abs_diff_eq!(
            log_marginal_likelihood(&white, &obs).unwrap(),
            -0.5 - 0.5 * (2.0 * PI).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn lml_two_point_sinc_matches_dense() {
        let model = GPModel::new(centred(1.0, 1.0), 0.0).unwrap();
        let obs = TimeSeries::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let got = log_marginal_likelihood(&model, &obs).unwrap();
        // direct 2x2: Lambda = (1 + jitter) I
        let l: f64 = 1.0 + 1e-8;
        let dense = -0.5 * 2.0 / l - 0.5 * (l * l).ln() - (2.0 * PI).ln();
        assert_abs_diff_eq!(got, dense, epsilon = 1e-12);
        assert_abs_diff_eq!(got, -1.0 - (2.0 * PI).ln(), epsilon = 1e-6);
    }

    #[test]
    fn sampling_basics() {
        let zero = GPModel::new(centred(0.0, 1.0), 0.0).unwrap();
        let s = sample(&zero, &[0.0, 0.5, 1.0], 3, 4).unwrap();
        assert_eq!(s.shape(), (4, 3));
        assert!(s.iter().all(|v| *v == 0.0));

        let model = GPModel::new(centred(1.0, 0.5), 0.0).unwrap();
        let t = [0.0, 0.7, 1.9];
        assert_eq!(
            sample(&model, &t, 11, 5).unwrap(),
            sample(&model, &t, 11, 5).unwrap()
        );
        assert_ne!(
            sample(&model, &t, 11, 5).unwrap(),
            sample(&model, &t, 12, 5).unwrap()
        );
    }

    #[test]
    fn white_noise_posterior_mean_is_cross_times_y() {
        let model = GPModel::new(KernelSpec::white_noise(1.0).unwrap(), 0.0).unwrap();
        let obs = TimeSeries::new(vec![0.0, 1.0, 2.0], vec![1.0, -2.0, 3.0]).unwrap();
        let q = [1.0, 1.5, 2.0];
        let post = posterior(&model, &obs, &q).unwrap();
        assert_eq!(post.mean, vec![-2.0, 0.0, 3.0]);
    }

    #[test]
    fn model_json() {
        let m = GPModel::new(centred(1.0, 0.5), 0.01).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"noise_var\":0.01"));
        assert!(s.contains("\"variant\":\"centred_sinc\""));
        let back: GPModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
