//! Sparse prediction with inducing points placed at the Nyquist rate of the
//! kernel's spectral support.
//!
//! The predictive is the deterministic training conditional (projected
//! process) approximation, computed in whitened form so that it also works
//! without observation noise.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{finish_with_scale, posterior, GPModel, PosteriorSummary, TimeSeries};
use crate::kernels::{gram_matrix, gram_symmetric, KernelSpec};
use crate::linalg::Factor;

/// Slack on `span * delta_total` before rounding up, so exact products do
/// not gain a point from roundoff.
const COUNT_TOL: f64 = 1e-9;

/// Uniform inducing grid anchored at the start of the observation span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducingSet {
    locations: Vec<f64>,
    delta_total: f64,
}

impl InducingSet {
    /// Arbitrary locations (for example the observation times). `delta_total`
    /// is reported as the reciprocal of the mean spacing.
    pub fn from_locations(mut locations: Vec<f64>) -> Result<Self> {
        if locations.is_empty() || locations.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter(
                "inducing locations must be finite and non-empty".into(),
            ));
        }
        locations.sort_by(f64::total_cmp);
        let n = locations.len();
        let delta_total = if n > 1 {
            (n - 1) as f64 / (locations[n - 1] - locations[0])
        } else {
            f64::INFINITY
        };
        Ok(InducingSet {
            locations,
            delta_total,
        })
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn delta_total(&self) -> f64 {
        self.delta_total
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.delta_total
    }
}

/// Measure of the union of the kernel's positive-centred support intervals.
pub fn support_width(spec: &KernelSpec) -> Result<f64> {
    let mut rects = spec.support_rectangles().ok_or_else(|| {
        Error::UnboundedSupport(format!(
            "{} kernel has no compact spectral support",
            spec.variant_name()
        ))
    })?;
    rects.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for (lo, hi) in rects {
        current = match current {
            Some((a, b)) if lo <= b => Some((a, b.max(hi))),
            Some((a, b)) => {
                total += b - a;
                Some((lo, hi))
            }
            None => Some((lo, hi)),
        };
    }
    if let Some((a, b)) = current {
        total += b - a;
    }
    Ok(total)
}

/// Grid over `[t_min, t_max]` at spacing `1 / delta_total` with
/// `ceil(span * delta_total) + 1` points.
pub fn nyquist_inducing(spec: &KernelSpec, t_min: f64, t_max: f64) -> Result<InducingSet> {
    if !(t_min.is_finite() && t_max.is_finite() && t_max >= t_min) {
        return Err(Error::InvalidParameter(format!(
            "bad span [{t_min}, {t_max}]"
        )));
    }
    let delta_total = support_width(spec)?;
    let m = ((t_max - t_min) * delta_total - COUNT_TOL).ceil().max(0.0) as usize + 1;
    let locations = (0..m).map(|i| t_min + i as f64 / delta_total).collect();
    Ok(InducingSet {
        locations,
        delta_total,
    })
}

/// Deterministic training conditional predictive.
///
/// With `V = L_uu^{-1} K_uf`, `W = L_uu^{-1} K_u*` and
/// `B = V V' + noise I`: mean `W' B^{-1} V y` and covariance
/// `K_** - W'W + noise W' B^{-1} W`.
pub fn sparse_posterior(
    model: &GPModel,
    obs: &TimeSeries,
    inducing: &InducingSet,
    query: &[f64],
) -> Result<PosteriorSummary> {
    let kernel = model.kernel();
    let z = inducing.locations();
    if z.len() > obs.len() && !obs.is_empty() {
        log::warn!(
            "{} inducing points for {} observations; no saving over the exact GP",
            z.len(),
            obs.len()
        );
    }
    let prior_qq = gram_symmetric(kernel, query);
    let prior_diag: Vec<f64> = (0..query.len()).map(|i| prior_qq[(i, i)]).collect();
    if obs.is_empty() {
        return PosteriorSummary::prior(query, prior_qq);
    }
    let white = kernel.white_variance();
    let luu = Factor::new(gram_symmetric(kernel, z), model.jitter(), white)?;
    let v = luu.solve_lower(&gram_matrix(kernel, z, obs.times()));
    let w = luu.solve_lower(&gram_matrix(kernel, z, query));
    let noise = model.noise_var();
    let mut b = &v * v.transpose();
    for i in 0..b.nrows() {
        b[(i, i)] += noise;
    }
    let bf = Factor::new(b, model.jitter(), noise)?;
    let vy = &v * obs.values_vector();
    let mean = w.transpose() * bf.solve(&vy);
    let cov = prior_qq - w.transpose() * &w + (w.transpose() * bf.solve_mat(&w)) * noise;
    finish_with_scale(query, mean, cov, Some(&prior_diag))
}

/// Timing and accuracy of the sparse predictive against the exact GP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseReport {
    #[serde(rename = "M")]
    pub m: usize,
    pub n: usize,
    pub rmse_vs_exact: f64,
    pub runtime_exact: f64,
    pub runtime_sparse: f64,
}

/// Runs both predictives on `query` and reports the mean RMSE between them.
pub fn compare_with_exact(
    model: &GPModel,
    obs: &TimeSeries,
    inducing: &InducingSet,
    query: &[f64],
) -> Result<(PosteriorSummary, PosteriorSummary, SparseReport)> {
    let clock = Instant::now();
    let exact = posterior(model, obs, query)?;
    let runtime_exact = clock.elapsed().as_secs_f64();
    let clock = Instant::now();
    let sparse = sparse_posterior(model, obs, inducing, query)?;
    let runtime_sparse = clock.elapsed().as_secs_f64();
    let rmse = if query.is_empty() {
        0.0
    } else {
        (exact
            .mean
            .iter()
            .zip(&sparse.mean)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / query.len() as f64)
            .sqrt()
    };
    let report = SparseReport {
        m: inducing.len(),
        n: obs.len(),
        rmse_vs_exact: rmse,
        runtime_exact,
        runtime_sparse,
    };
    Ok((exact, sparse, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::sample;

    #[test]
    fn inducing_counts() {
        let k = KernelSpec::centred_sinc(1.0, 1.0).unwrap();
        let s = nyquist_inducing(&k, 0.0, 10.0).unwrap();
        assert_eq!(s.len(), 11);
        assert_eq!(s.spacing(), 1.0);
        assert_eq!(s.locations()[10], 10.0);

        let two = KernelSpec::sum(vec![
            KernelSpec::sinc(1.0, 1.0, 0.3).unwrap(),
            KernelSpec::sinc(1.0, 2.0, 0.2).unwrap(),
        ])
        .unwrap();
        let s = nyquist_inducing(&two, 0.0, 4.0).unwrap();
        assert!((s.delta_total() - 0.5).abs() < 1e-15);
        assert!((s.spacing() - 2.0).abs() < 1e-12);
        assert_eq!(s.len(), 3);

        let nested = KernelSpec::sum(vec![
            KernelSpec::centred_sinc(0.7, 0.5).unwrap(),
            KernelSpec::centred_sinc(0.3, 1.06).unwrap(),
        ])
        .unwrap();
        assert_eq!(nyquist_inducing(&nested, 0.0, 50.0).unwrap().len(), 54);
    }

    #[test]
    fn unbounded_support_is_rejected() {
        let sm = KernelSpec::spectral_mixture(1.0, 0.5, 0.01).unwrap();
        assert!(matches!(
            nyquist_inducing(&sm, 0.0, 1.0),
            Err(Error::UnboundedSupport(_))
        ));
        let w = KernelSpec::white_noise(1.0).unwrap();
        assert!(nyquist_inducing(&w, 0.0, 1.0).is_err());
    }

    #[test]
    fn full_rank_limit_is_exact() {
        let model = GPModel::new(KernelSpec::centred_sinc(1.0, 0.4).unwrap(), 0.0).unwrap();
        let t: Vec<f64> = (0..15)
            .map(|i| 1.9 * i as f64 + 0.1 * (i % 3) as f64)
            .collect();
        let y: Vec<f64> = t.iter().map(|x| (0.2 * x).sin()).collect();
        let obs = TimeSeries::new(t.clone(), y).unwrap();
        let q: Vec<f64> = (0..40).map(|i| 0.7 * i as f64).collect();
        let z = InducingSet::from_locations(t).unwrap();
        let (exact, sparse, report) = compare_with_exact(&model, &obs, &z, &q).unwrap();
        for i in 0..q.len() {
            assert!((exact.mean[i] - sparse.mean[i]).abs() <= 1e-6);
            assert!((exact.variance[i] - sparse.variance[i]).abs() <= 1e-6);
        }
        assert_eq!((report.m, report.n), (15, 15));
    }

    #[test]
    fn nyquist_grid_inducing_is_exact() {
        let k = KernelSpec::centred_sinc(1.0, 1.0).unwrap();
        let model = GPModel::new(k.clone(), 0.01).unwrap().with_jitter(1e-13);
        let t: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let draws = sample(&model, &t, 3, 1).unwrap();
        let obs = TimeSeries::new(t, draws.row(0).iter().copied().collect()).unwrap();
        let z = nyquist_inducing(&k, 0.0, 29.0).unwrap();
        assert_eq!(z.len(), 30);
        let q: Vec<f64> = (0..60).map(|i| 0.49 * i as f64).collect();
        let exact = posterior(&model, &obs, &q).unwrap();
        let sparse = sparse_posterior(&model, &obs, &z, &q).unwrap();
        for i in 0..q.len() {
            assert!((exact.mean[i] - sparse.mean[i]).abs() <= 1e-8);
        }
    }

    #[test]
    fn empty_observations_give_prior() {
        let k = KernelSpec::centred_sinc(2.0, 1.0).unwrap();
        let model = GPModel::new(k.clone(), 0.1).unwrap();
        let z = nyquist_inducing(&k, 0.0, 3.0).unwrap();
        let p = sparse_posterior(&model, &TimeSeries::empty(), &z, &[0.5]).unwrap();
        assert_eq!((p.mean[0], p.variance[0]), (0.0, 2.0));
    }

    #[test]
    fn report_json_uses_upper_case_m() {
        let r = SparseReport {
            m: 3,
            n: 9,
            rmse_vs_exact: 0.0,
            runtime_exact: 0.0,
            runtime_sparse: 0.0,
        };
        assert!(serde_json::to_string(&r).unwrap().contains("\"M\":3"));
    }
}
