//! Randomized invariants across the library: algebraic identities of the
//! diagonal semigroup kernels, reversibility of the killed and free
//! transition densities, bilinearity and positivity of the carré du champ,
//! interval-estimator sanity, and bitwise determinism of seeded simulations.

use harnack_lab::coupling::{meet_probability, simulate_coupling, wilson_interval, zeta};
use harnack_lab::field::{CubicPoly, ExpField, ScalarField, VectorFieldSet};
use harnack_lab::gamma;
use harnack_lab::killed::KilledCoordinate;
use harnack_lab::spectral::SpectralModel;
use harnack_lab::{CouplingConfig, Jet};
use proptest::prelude::*;
use rand::SeedableRng;
use std::sync::Arc;

fn log_uniform(lo_exp: f64, hi_exp: f64) -> impl Strategy<Value = f64> {
    (lo_exp..hi_exp).prop_map(|e| 10f64.powf(e))
}

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        // Tests live outside src/, so the default regression-file location
        // does not exist; shrunk inputs are printed instead.
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cases(256))]

    #[test]
    fn variance_kernel_is_bounded_monotone_and_composes(
        a in log_uniform(-3.0, 3.0),
        t in log_uniform(-3.0, 1.0),
        s in log_uniform(-3.0, 1.0),
    ) {
        let qt = SpectralModel::qt_eigenvalue(a, t);
        prop_assert!(qt > 0.0);
        prop_assert!(qt <= 0.5 / a + 1e-300);
        // Increasing in t; strictly so while the exponential tail is still
        // numerically visible against the saturation value 1/(2a).
        let qt_later = SpectralModel::qt_eigenvalue(a, t * 1.5);
        prop_assert!(qt_later >= qt);
        let visible = (-2.0 * a * t).exp() * (1.0 - (-a * t).exp());
        if visible > 1e-12 {
            prop_assert!(qt_later > qt);
        }
        // One-parameter composition law.
        let composed = (-2.0 * a * s).exp() * qt + SpectralModel::qt_eigenvalue(a, s);
        let direct = SpectralModel::qt_eigenvalue(a, t + s);
        prop_assert!(
            (composed - direct).abs() <= 1e-12 * direct.abs().max(1e-300),
            "composed {composed} vs direct {direct}"
        );
    }

    #[test]
    fn gradient_factor_respects_the_universal_bound(
        a in log_uniform(-3.0, 3.0),
        t in log_uniform(-3.0, 1.0),
    ) {
        let lambda = SpectralModel::lambda_factor(a, t);
        // The factor underflows to zero once e^{2at} overflows; it is still
        // finite, nonnegative, and inside the universal 1/sqrt(t) envelope.
        prop_assert!(lambda >= 0.0 && lambda.is_finite());
        prop_assert!(lambda <= 1.0 / t.sqrt() * (1.0 + 1e-12));
        // Decreasing in t (the ratio lambda(2t)/lambda(t) is at most 1/sqrt(2),
        // so the comparison is strict whenever the later value is nonzero).
        let later = SpectralModel::lambda_factor(a, 2.0 * t);
        if later > 0.0 {
            prop_assert!(later < lambda);
        } else {
            prop_assert!(later <= lambda);
        }
    }

    #[test]
    fn free_transition_density_is_reversible(
        a in log_uniform(-2.0, 2.0),
        t in log_uniform(-2.0, 0.5),
        x in -2.0..2.0f64,
        y in -2.0..2.0f64,
    ) {
        // The stationary density N(0, 1/(2a)) balances the transition kernel.
        let pi = |v: f64| (-a * v * v).exp() * (a / std::f64::consts::PI).sqrt();
        let forward = pi(x) * SpectralModel::transition_density_1d(a, t, x, y);
        let backward = pi(y) * SpectralModel::transition_density_1d(a, t, y, x);
        let scale = forward.abs().max(backward.abs()).max(1e-300);
        prop_assert!(
            (forward - backward).abs() <= 1e-11 * scale,
            "forward {forward} vs backward {backward}"
        );
    }

    #[test]
    fn semigroup_averaging_is_a_contraction_with_fixed_constants(
        a1 in log_uniform(-1.0, 1.5),
        a2 in log_uniform(-1.0, 1.5),
        t in log_uniform(-2.0, 0.5),
        x1 in -1.5..1.5f64,
        x2 in -1.5..1.5f64,
    ) {
        let model = SpectralModel::new(vec![a1, a2]).unwrap();
        // Constants are fixed points of the averaging.
        let ones = model.mehler_apply(t, &[x1, x2], 24, |_| 1.0).unwrap();
        prop_assert!((ones - 1.0).abs() <= 1e-10, "P_t 1 = {ones}");
        // Bounded payoffs stay inside their sup bound.
        let clipped = model
            .mehler_apply(t, &[x1, x2], 24, |z| z[0].sin() * z[1].cos())
            .unwrap();
        prop_assert!(clipped.abs() <= 1.0 + 1e-10);
    }

    #[test]
    fn meet_probability_is_a_probability_and_orders_correctly(
        a in log_uniform(-2.0, 2.0),
        dt in log_uniform(-5.0, -1.0),
        z0 in -3.0..3.0f64,
        z1 in -3.0..3.0f64,
    ) {
        let p = meet_probability(a, dt, z0, z1);
        prop_assert!((0.0..=1.0).contains(&p));
        if z0 * z1 <= 0.0 {
            prop_assert_eq!(p, 1.0);
        } else {
            // Pushing the endpoints further from the interface on the same
            // side can only make a bridge crossing less likely.
            let further = meet_probability(a, dt, 1.5 * z0, z1);
            prop_assert!(further <= p + 1e-15);
        }
    }

    #[test]
    fn confidence_interval_contains_the_point_estimate(
        successes in 0u64..500,
        extra in 0u64..500,
    ) {
        let trials = successes + extra.max(1);
        let (lo, hi) = wilson_interval(successes, trials);
        let p_hat = successes as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p_hat && p_hat <= hi && hi <= 1.0);
        if successes == 0 {
            prop_assert_eq!(lo, 0.0);
        }
        if successes == trials {
            prop_assert_eq!(hi, 1.0);
        }
    }

    #[test]
    fn zeta_is_decreasing_toward_one(s in 1.05..8.0f64, bump in 0.05..2.0f64) {
        let z1 = zeta(s).unwrap();
        let z2 = zeta(s + bump).unwrap();
        prop_assert!(z1 > z2);
        prop_assert!(z2 > 1.0);
        prop_assert!(zeta(20.0).unwrap() - 1.0 < 1e-5);
    }
}

proptest! {
    #![proptest_config(cases(96))]

    #[test]
    fn killed_density_satisfies_detailed_balance(
        a in log_uniform(-1.0, 0.5),
        t in 0.05..0.8f64,
        x in -2.0..2.0f64,
        y in -2.0..2.0f64,
    ) {
        let coord = KilledCoordinate::new(a, 6.0, 400, 60).unwrap();
        let forward = coord.density(t, x, y).unwrap() * (2.0 * a * y).exp();
        let backward = coord.density(t, y, x).unwrap() * (2.0 * a * x).exp();
        let scale = forward.abs().max(backward.abs());
        // The weighted kernel is a sum of 60 modes whose individual sizes can
        // exceed the (cancelling) total by many orders when x and y are far
        // apart, so the comparison needs an absolute term at roundoff times
        // the mode-sum magnitude (each |phi| <= ~e^{a|z|}/sqrt(R)).
        let mode_sum_scale = 60.0 * (4.0 * a).exp() / 6.0;
        prop_assert!(
            (forward - backward).abs() <= 1e-13 * (scale + mode_sum_scale),
            "forward {forward} vs backward {backward}"
        );
        // Survival is a probability and shrinks with time. Checked away from
        // t = 0 so the truncated mode tail (e^{-beta_modes t}) is negligible.
        // The trapezoid over linearly interpolated e^{a y}-weighted modes
        // overshoots 1 by O((a h)^2 like) terms, so the tolerance is 1e-3 for
        // drifts up to ~3 on this grid (measured overshoot <= ~1e-4 there).
        let ts = t.max(0.3);
        let s1 = coord.survival(ts, x.clamp(-5.0, 5.0)).unwrap();
        let s2 = coord.survival(1.5 * ts, x.clamp(-5.0, 5.0)).unwrap();
        prop_assert!((0.0..=1.0 + 1e-3).contains(&s1));
        prop_assert!(s2 <= s1 + 1e-3);
    }

    #[test]
    fn dirichlet_rates_increase_with_the_mode_index(
        a in log_uniform(-2.0, 0.7),
        i in 0usize..30,
    ) {
        let coord = KilledCoordinate::new(a, 6.0, 300, 40).unwrap();
        prop_assert!(coord.beta(i) < coord.beta(i + 1));
        prop_assert!(coord.beta(0) > 0.0);
    }

    #[test]
    fn carre_du_champ_is_bilinear_symmetric_nonnegative(
        seed in 0u64..10_000,
        alpha in -2.0..2.0f64,
        beta in -2.0..2.0f64,
    ) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dim = 1 + (seed % 3) as usize;
        let comps: Vec<Arc<dyn ScalarField>> = (0..dim)
            .map(|_| Arc::new(ExpField(CubicPoly::random(dim, 0.4, &mut rng))) as Arc<dyn ScalarField>)
            .collect();
        let fields = VectorFieldSet::from_fields(dim, comps).unwrap();
        let f = CubicPoly::random(dim, 0.8, &mut rng);
        let g = CubicPoly::random(dim, 0.8, &mut rng);
        let h = CubicPoly::random(dim, 0.8, &mut rng);
        let x: Vec<f64> = (0..dim).map(|i| 0.25 * (i as f64) - 0.3).collect();

        struct Combo<'a>(&'a CubicPoly, &'a CubicPoly, f64, f64);
        impl ScalarField for Combo<'_> {
            fn dim(&self) -> usize {
                self.0.dim
            }
            fn jet(&self, x: &[f64]) -> harnack_lab::Result<Jet> {
                Ok(&self.0.jet(x)?.scale(self.2) + &self.1.jet(x)?.scale(self.3))
            }
        }
        let combo = Combo(&f, &g, alpha, beta);
        let lhs = gamma::gamma(&combo, &h, &fields, &x).unwrap().direct;
        let rhs = alpha * gamma::gamma(&f, &h, &fields, &x).unwrap().direct
            + beta * gamma::gamma(&g, &h, &fields, &x).unwrap().direct;
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale, "bilinearity: {lhs} vs {rhs}");

        let fg = gamma::gamma(&f, &g, &fields, &x).unwrap().direct;
        let gf = gamma::gamma(&g, &f, &fields, &x).unwrap().direct;
        prop_assert!((fg - gf).abs() <= 1e-11 * fg.abs().max(1.0));

        let ff = gamma::gamma(&f, &f, &fields, &x).unwrap().direct;
        prop_assert!(ff >= 0.0);
    }

    #[test]
    fn curvature_dimension_slack_is_nonnegative_on_valid_classes(
        seed in 0u64..10_000,
    ) {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(77));
        // Alternate between one smooth field set and several constant ones.
        let (fields, dim) = if seed % 2 == 0 {
            let dim = 1 + (seed % 3) as usize;
            let comps: Vec<Arc<dyn ScalarField>> = (0..dim)
                .map(|_| {
                    Arc::new(ExpField(CubicPoly::random(dim, 0.4, &mut rng)))
                        as Arc<dyn ScalarField>
                })
                .collect();
            (VectorFieldSet::from_fields(dim, comps).unwrap(), dim)
        } else {
            let dim = 2;
            let m = 2 + (seed % 2) as usize;
            let rows: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..dim).map(|_| rng.gen_range(0.2..2.0)).collect())
                .collect();
            (VectorFieldSet::constant(dim, &rows).unwrap(), dim)
        };
        let f = CubicPoly::random(dim, 1.0, &mut rng);
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.7..0.7)).collect();
        let cd = gamma::cd_inequality_check(&f, &fields, &x).unwrap();
        prop_assert!(
            cd.slack >= -1e-6 * (cd.scale + 1.0),
            "slack {} at scale {}",
            cd.slack,
            cd.scale
        );
    }

    #[test]
    fn jet_products_and_transcendentals_are_consistent(
        x in -1.2..1.2f64,
        y in -1.2..1.2f64,
    ) {
        let vx = Jet::variable(2, 0, x);
        let vy = Jet::variable(2, 1, y);
        let product = &vx * &vy;
        prop_assert!((product.v - x * y).abs() <= 1e-15 * (x * y).abs().max(1.0));
        // Product rule at the gradient band.
        prop_assert!((product.g[0] - y).abs() <= 1e-15 * y.abs().max(1.0));
        prop_assert!((product.g[1] - x).abs() <= 1e-15 * x.abs().max(1.0));
        // exp(ln(w)) round-trips on positive values.
        let w = &(&vx * &vx) + 1.5;
        let round = w.ln().exp();
        prop_assert!((round.v - w.v).abs() <= 1e-13 * w.v);
        prop_assert!((round.g[0] - w.g[0]).abs() <= 1e-12 * w.g[0].abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn seeded_coupling_trials_are_bitwise_reproducible(
        trial in 0u64..64,
        seed in 0u64..1_000,
    ) {
        let model = SpectralModel::new(vec![1.0, 3.0]).unwrap();
        let config = CouplingConfig {
            model,
            x0: vec![0.4, 0.0],
            y0: vec![-0.4, 0.0],
            dt: 1e-2,
            t_horizon: 0.05,
            exit_radius: 2.0,
            seed,
            trials: 1,
            driver: harnack_lab::coupling::Driver::Reflection,
        };
        let a = simulate_coupling(&config, trial).unwrap();
        let b = simulate_coupling(&config, trial).unwrap();
        prop_assert_eq!(a, b);
    }
}
