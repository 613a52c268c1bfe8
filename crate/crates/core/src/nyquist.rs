//! Whittaker-Shannon reconstruction on Nyquist-spaced grids.
//!
//! With a centred sinc prior and samples spaced `1 / delta` apart the Gram
//! matrix is diagonal, so the GP posterior reduces to sums of sinc terms.
//! These closed forms are exposed both as a fast path and as an oracle for
//! the general Cholesky route.

use crate::error::{Error, Result};
use crate::gp::{posterior, GPModel, TimeSeries};
use crate::kernels::{normalized_sinc, KernelSpec};

/// Relative tolerance on grid alignment.
const GRID_TOL: f64 = 1e-12;

/// Relative jitter used by the Cholesky side of [`oracle_match`].
const ORACLE_JITTER: f64 = 1e-13;

/// `count` points from `start` spaced exactly `1 / delta` apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NyquistGrid {
    start: f64,
    count: usize,
    delta: f64,
}

impl NyquistGrid {
    pub fn new(start: f64, count: usize, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be > 0, got {delta}"
            )));
        }
        if !start.is_finite() {
            return Err(Error::InvalidParameter("grid start must be finite".into()));
        }
        Ok(NyquistGrid {
            start,
            count,
            delta,
        })
    }

    /// Grid of `count` points centred on `centre`.
    pub fn centred(centre: f64, count: usize, delta: f64) -> Result<Self> {
        let half = (count.saturating_sub(1)) as f64 / (2.0 * delta);
        NyquistGrid::new(centre - half, count, delta)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.delta
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.count)
            .map(|i| self.start + i as f64 / self.delta)
            .collect()
    }
}

/// Checks that all pairwise gaps are integer multiples of `1 / delta`.
///
/// Missing grid points are allowed; the Gram matrix stays diagonal.
pub fn check_grid(times: &[f64], delta: f64) -> Result<()> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be > 0, got {delta}"
        )));
    }
    let Some(&t0) = times.first() else {
        return Ok(());
    };
    for &t in &times[1..] {
        let k = (t - t0) * delta;
        let off = (k - k.round()).abs();
        if off > GRID_TOL * k.abs().max(1.0) {
            return Err(Error::GridMismatch {
                delta,
                detail: format!("time {t} is {off:e} grid steps off the grid through {t0}"),
            });
        }
    }
    Ok(())
}

/// `sum_i y_i sinc(delta (t - t_i))`.
pub fn whittaker_mean(obs: &TimeSeries, delta: f64, t: f64) -> Result<f64> {
    check_grid(obs.times(), delta)?;
    Ok(whittaker_sum(obs, delta, t))
}

fn whittaker_sum(obs: &TimeSeries, delta: f64, t: f64) -> f64 {
    obs.times()
        .iter()
        .zip(obs.values())
        .map(|(&ti, &yi)| yi * normalized_sinc(delta * (t - ti)))
        .sum()
}

/// `sum_i sinc^2(delta (t - t_i))`.
pub fn sinc_square_sum(times: &[f64], delta: f64, t: f64) -> f64 {
    times
        .iter()
        .map(|&ti| normalized_sinc(delta * (t - ti)).powi(2))
        .sum()
}

/// `sigma2 (1 - sum_i sinc^2(delta (t - t_i)))`, clamped at zero.
pub fn nyquist_variance(times: &[f64], delta: f64, sigma2: f64, t: f64) -> Result<f64> {
    check_grid(times, delta)?;
    Ok(variance_from_sum(sigma2, sinc_square_sum(times, delta, t)))
}

fn variance_from_sum(sigma2: f64, s: f64) -> f64 {
    let v = sigma2 * (1.0 - s);
    if v < 0.0 && v > -1e-12 * sigma2.max(1.0) {
        0.0
    } else {
        v.max(0.0)
    }
}

/// Largest absolute gaps between the Cholesky posterior and the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OracleReport {
    pub max_mean_deviation: f64,
    pub max_variance_deviation: f64,
}

/// Runs the general posterior for a noiseless centred sinc model and
/// compares it with the closed forms at each query time.
pub fn oracle_match(model: &GPModel, obs: &TimeSeries, query: &[f64]) -> Result<OracleReport> {
    let KernelSpec::CentredSinc(p) = model.kernel() else {
        return Err(Error::InvalidParameter(format!(
            "closed forms need a centred_sinc kernel, got {}",
            model.kernel().variant_name()
        )));
    };
    if model.noise_var() != 0.0 {
        return Err(Error::InvalidParameter(
            "closed forms need a noiseless model".into(),
        ));
    }
    let (sigma2, delta) = (p.sigma2(), p.delta());
    check_grid(obs.times(), delta)?;
    // On a Nyquist grid the Gram matrix is diagonal, so a tiny jitter keeps
    // the Cholesky path within roundoff of the closed forms.
    let gp = model.clone().with_jitter(ORACLE_JITTER);
    let post = posterior(&gp, obs, query)?;
    let mut report = OracleReport {
        max_mean_deviation: 0.0,
        max_variance_deviation: 0.0,
    };
    for (i, &t) in query.iter().enumerate() {
        let m = whittaker_sum(obs, delta, t);
        let v = variance_from_sum(sigma2, sinc_square_sum(obs.times(), delta, t));
        report.max_mean_deviation = report.max_mean_deviation.max((post.mean[i] - m).abs());
        report.max_variance_deviation = report
            .max_variance_deviation
            .max((post.variance[i] - v).abs());
    }
    Ok(report)
}

/// How strongly `g(t) = sum_i sinc^2(delta (t - t_i))` concentrates at zero
/// frequency over the grid span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Concentration {
    /// Zero-frequency DFT coefficient of the dense samples divided by their count.
    pub zero_bin: f64,
    /// Share of the signal energy held by the zero-frequency bin.
    pub dc_fraction: f64,
}

/// Samples `g` at `per_spacing` points per grid step across the grid span.
pub fn concentration(grid: &NyquistGrid, per_spacing: usize) -> Result<Concentration> {
    if grid.len() < 2 || per_spacing == 0 {
        return Err(Error::InvalidParameter(
            "need at least two grid points and one sample per spacing".into(),
        ));
    }
    let times = grid.times();
    let m = (grid.len() - 1) * per_spacing;
    let step = grid.spacing() / per_spacing as f64;
    let g: Vec<f64> = (0..m)
        .map(|k| sinc_square_sum(&times, grid.delta(), grid.start() + (k as f64 + 0.5) * step))
        .collect();
    let sum: f64 = g.iter().sum();
    let energy: f64 = g.iter().map(|v| v * v).sum();
    Ok(Concentration {
        zero_bin: sum / m as f64,
        dc_fraction: sum * sum / (m as f64 * energy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::gram_symmetric;

    fn obs(times: Vec<f64>, values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(times, values).unwrap()
    }

    #[test]
    fn grid_spacing_is_exact() {
        let g = NyquistGrid::new(0.0, 5, 4.0).unwrap();
        assert_eq!(g.spacing() * g.delta(), 1.0);
        assert_eq!(g.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let c = NyquistGrid::centred(0.0, 201, 1.0).unwrap();
        assert_eq!(c.times()[100], 0.0);
        assert!(NyquistGrid::new(0.0, 3, 0.0).is_err());
    }

    #[test]
    fn mean_interpolates_and_two_point_value() {
        let o = obs(vec![0.0, 1.0], vec![1.0, 1.0]);
        let m = whittaker_mean(&o, 1.0, 0.5).unwrap();
        assert!((m - 4.0 / std::f64::consts::PI).abs() < 1e-12);
        assert!((m - 1.273240).abs() < 1e-6);
        let o = obs(vec![-1.0, 0.0, 1.0, 2.0], vec![3.0, -1.0, 0.5, 2.0]);
        for (t, y) in o.times().iter().zip(o.values()) {
            assert_eq!(whittaker_mean(&o, 1.0, *t).unwrap(), *y);
        }
        let z = obs(vec![0.0, 1.0, 2.0], vec![0.0; 3]);
        assert_eq!(whittaker_mean(&z, 1.0, 0.77).unwrap(), 0.0);
    }

    #[test]
    fn variance_values() {
        let v = nyquist_variance(&[0.0, 1.0], 1.0, 1.0, 0.5).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((v - (1.0 - 8.0 / pi2)).abs() < 1e-12);
        assert!((v - 0.189431).abs() < 1e-6);
        assert_eq!(
            nyquist_variance(&[0.0, 1.0, 2.0], 1.0, 2.0, 1.0).unwrap(),
            0.0
        );

        let g = NyquistGrid::centred(0.0, 201, 1.0).unwrap();
        let v = nyquist_variance(&g.times(), 1.0, 1.0, 0.5).unwrap();
        assert!(v < 0.01, "{v}");
    }

    #[test]
    fn variance_decays_with_symmetric_growth() {
        let mut last = f64::INFINITY;
        for n in (1..60).step_by(2) {
            let g = NyquistGrid::centred(0.0, n, 1.0).unwrap();
            let v = nyquist_variance(&g.times(), 1.0, 1.0, 0.3).unwrap();
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn mismatched_grid_is_rejected() {
        let o = obs(vec![0.0, 1.1], vec![1.0, 1.0]);
        assert!(matches!(
            whittaker_mean(&o, 1.0, 0.5),
            Err(Error::GridMismatch { .. })
        ));
        assert!(nyquist_variance(&[0.0, 0.5], 1.0, 1.0, 0.1).is_err());
        // Missing grid points are fine.
        assert!(check_grid(&[0.0, 0.5, 2.0], 2.0).is_ok());
    }

    #[test]
    fn gram_on_grid_is_diagonal() {
        let g = NyquistGrid::new(-3.3, 40, 2.5).unwrap();
        let k = KernelSpec::centred_sinc(1.7, 2.5).unwrap();
        let m = gram_symmetric(&k, &g.times());
        for i in 0..40 {
            for j in 0..40 {
                let want = if i == j { 1.7 } else { 0.0 };
                assert!((m[(i, j)] - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn oracle_on_small_grids() {
        let model = GPModel::new(KernelSpec::centred_sinc(1.0, 1.0).unwrap(), 0.0).unwrap();
        let one = obs(vec![0.0], vec![0.7]);
        let q: Vec<f64> = (0..50).map(|i| -5.0 + 0.2 * i as f64).collect();
        let r = oracle_match(&model, &one, &q).unwrap();
        assert!(
            r.max_mean_deviation <= 1e-12 && r.max_variance_deviation <= 1e-12,
            "{r:?}"
        );

        let bad = obs(vec![0.0, 0.3], vec![1.0, 2.0]);
        assert!(matches!(
            oracle_match(&model, &bad, &q),
            Err(Error::GridMismatch { .. })
        ));
        let noisy = GPModel::new(KernelSpec::centred_sinc(1.0, 1.0).unwrap(), 0.1).unwrap();
        assert!(oracle_match(&noisy, &one, &q).is_err());
    }

    #[test]
    fn concentration_increases_with_n() {
        let mut last = 0.0;
        for n in [25, 100, 400] {
            let g = NyquistGrid::centred(0.0, n, 1.0).unwrap();
            let c = concentration(&g, 8).unwrap();
            assert!(c.zero_bin > last && c.zero_bin < 1.0);
            assert!(c.dc_fraction <= 1.0);
            last = c.zero_bin;
        }
        assert!(last > 0.99);
    }
}
