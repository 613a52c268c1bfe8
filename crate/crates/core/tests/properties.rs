use blgp::bandpass::{Band, BandKernel};
use blgp::gp::{posterior, GPModel, TimeSeries};
use blgp::kernels::{gram_symmetric, KernelSpec, SincParams, SpectralEnvelope};
use blgp::linalg::{Factor, DEFAULT_JITTER};
use blgp::nyquist::{nyquist_variance, NyquistGrid};
use proptest::prelude::*;

fn sinc_params() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.1f64..5.0, 0.0f64..3.0, 0.05f64..2.0)
}

fn any_kernel() -> impl Strategy<Value = KernelSpec> {
    let sinc = sinc_params().prop_map(|(s, x, d)| KernelSpec::sinc(s, x, d).unwrap());
    let centred =
        (0.1f64..5.0, 0.05f64..2.0).prop_map(|(s, d)| KernelSpec::centred_sinc(s, d).unwrap());
    let gsk = (sinc_params(), 1usize..40).prop_map(|((s, x, d), n)| {
        KernelSpec::generalised_sinc(
            SincParams::new(s, x, d).unwrap(),
            SpectralEnvelope::triangular(1.5, x, 0.5 * d).unwrap(),
            n,
        )
        .unwrap()
    });
    let sm = (0.1f64..5.0, 0.0f64..3.0, 0.001f64..1.0)
        .prop_map(|(s, x, g)| KernelSpec::spectral_mixture(s, x, g).unwrap());
    let leaf = prop_oneof![sinc, centred, gsk, sm];
    prop_oneof![
        3 => leaf.clone(),
        1 => prop::collection::vec(leaf, 1..4).prop_map(|v| KernelSpec::sum(v).unwrap()),
    ]
}

fn distinct_times(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 2..max).prop_map(|mut t| {
        t.sort_by(f64::total_cmp);
        t.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        t
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_are_even_and_peak_at_zero(k in any_kernel(), tau in -30.0f64..30.0) {
        prop_assert_eq!(k.eval(tau), k.eval(-tau));
        prop_assert!(k.eval(tau).abs() <= k.eval(0.0) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn sinc_variance_is_sigma2((s, x, d) in sinc_params()) {
        prop_assert_eq!(KernelSpec::sinc(s, x, d).unwrap().eval(0.0), s);
        prop_assert_eq!(KernelSpec::centred_sinc(s, d).unwrap().eval(0.0), s);
    }

    #[test]
    fn jittered_gram_factorises(k in any_kernel(), t in distinct_times(50)) {
        prop_assert!(Factor::new(gram_symmetric(&k, &t), DEFAULT_JITTER, 0.0).is_ok());
    }

    #[test]
    fn posterior_variance_below_prior(
        k in any_kernel(),
        t in distinct_times(30),
        noise in 0.0f64..0.5,
        q in prop::collection::vec(-60.0f64..60.0, 1..20),
    ) {
        let y: Vec<f64> = t.iter().map(|x| (0.37 * x).sin()).collect();
        let obs = TimeSeries::new(t, y).unwrap();
        let model = GPModel::new(k.clone(), noise).unwrap();
        let post = posterior(&model, &obs, &q).unwrap();
        for v in &post.variance {
            prop_assert!(*v <= k.eval(0.0) + 1e-9);
        }
    }

    #[test]
    fn extra_observation_never_adds_variance(
        (s, x, d) in sinc_params(),
        t in distinct_times(25),
        extra in -50.0f64..50.0,
        noise in 0.01f64..0.5,
    ) {
        prop_assume!(t.iter().all(|v| (v - extra).abs() > 1e-3));
        let model = GPModel::new(KernelSpec::sinc(s, x, d).unwrap(), noise).unwrap();
        let q: Vec<f64> = (0..40).map(|i| -55.0 + 2.75 * i as f64).collect();
        let y = |t: &[f64]| t.iter().map(|v| v.cos()).collect::<Vec<_>>();
        let base = posterior(&model, &TimeSeries::new(t.clone(), y(&t)).unwrap(), &q).unwrap();
        let mut more = t.clone();
        more.push(extra);
        more.sort_by(f64::total_cmp);
        let after = posterior(&model, &TimeSeries::new(more.clone(), y(&more)).unwrap(), &q).unwrap();
        for (a, b) in after.variance.iter().zip(&base.variance) {
            prop_assert!(*a <= *b + 1e-9 * s);
        }
    }

    #[test]
    fn nyquist_gram_is_diagonal(
        start in -100.0f64..100.0,
        n in 2usize..40,
        delta in 0.05f64..5.0,
        s in 0.1f64..10.0,
    ) {
        let grid = NyquistGrid::new(start, n, delta).unwrap();
        let g = gram_symmetric(&KernelSpec::centred_sinc(s, delta).unwrap(), &grid.times());
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { s } else { 0.0 };
                prop_assert!((g[(i, j)] - want).abs() <= 1e-12 * s.max(1.0));
            }
        }
    }

    #[test]
    fn nyquist_variance_decays_with_symmetric_growth(
        delta in 0.1f64..3.0,
        offset in -0.5f64..0.5,
    ) {
        let mut last = f64::INFINITY;
        for half in 1..20 {
            let grid = NyquistGrid::centred(0.0, 2 * half + 1, delta).unwrap();
            let v = nyquist_variance(&grid.times(), delta, 1.0, offset / delta).unwrap();
            prop_assert!(v <= last + 1e-15);
            last = v;
        }
    }

    #[test]
    fn band_kernels_add_over_partitions(
        (s, x, d) in sinc_params(),
        cuts in prop::collection::vec(0.0f64..1.0, 1..4),
        tau in 0.0f64..40.0,
    ) {
        let source = KernelSpec::sinc(s, x.max(0.5 * d), d).unwrap();
        let (lo, hi) = (x.max(0.5 * d) - 0.6 * d, x.max(0.5 * d) + 0.6 * d);
        let lo = lo.max(0.0);
        let mut edges: Vec<f64> = cuts.iter().map(|c| lo + c * (hi - lo)).collect();
        edges.extend([lo, hi]);
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let whole = BandKernel::new(source.clone(), Band::new(lo, hi).unwrap(), 512).unwrap();
        let parts: f64 = edges
            .windows(2)
            .map(|w| BandKernel::new(source.clone(), Band::new(w[0], w[1]).unwrap(), 64).unwrap().eval(tau))
            .sum();
        prop_assert!((parts - whole.eval(tau)).abs() <= 1e-6 * s.max(1.0));
        prop_assert!((whole.power() - s).abs() <= 1e-9 * s);
    }

    #[test]
    fn nested_band_power_is_monotone(
        k in any_kernel(),
        centre in 0.2f64..3.0,
        widths in prop::collection::vec(0.01f64..0.4, 2..6),
    ) {
        let mut w = widths;
        w.sort_by(f64::total_cmp);
        let mut last = 0.0;
        for half in w {
            let band = Band::new((centre - half).max(0.0), centre + half).unwrap();
            let p = BandKernel::new(k.clone(), band, 64).unwrap().power();
            prop_assert!(p >= last - 1e-12);
            last = p;
        }
    }
}
