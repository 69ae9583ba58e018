//! Randomized properties of the urn step, the plug-in estimators and the
//! interval construction.

use hrru_core::estimators::PlugInEstimates;
use hrru_core::{
    confidence_interval, increment_identity_check, run_trajectory, variance_estimates,
    DrawSizePolicy, IntervalBasis, ReinforcementPolicy, StreamSeed, UrnConfig,
};
use proptest::prelude::*;

fn draw_policy(k: u64) -> impl Strategy<Value = DrawSizePolicy> {
    let mut options = vec![
        Just(DrawSizePolicy::ConstantOne).boxed(),
        (1..=k).prop_map(|h| DrawSizePolicy::IidUniform { h }).boxed(),
        prop::collection::vec(1..=k, 1..5)
            .prop_map(|sequence| DrawSizePolicy::Deterministic { sequence })
            .boxed(),
    ];
    if k >= 3 {
        options.push(
            (3..=k)
                .prop_flat_map(|h| (2..h, Just(h)))
                .prop_map(|(start, h)| DrawSizePolicy::AbsorbingRandomWalk { start, h })
                .boxed(),
        );
    }
    prop::strategy::Union::new(options)
}

fn reinforcement_policy(k: u64) -> impl Strategy<Value = ReinforcementPolicy> {
    prop_oneof![
        (1..=k).prop_map(|value| ReinforcementPolicy::Constant { value }),
        (1..=k)
            .prop_flat_map(move |lo| (Just(lo), lo..=k))
            .prop_map(|(lo, hi)| ReinforcementPolicy::UniformRange { lo, hi }),
    ]
}

fn urn_config() -> impl Strategy<Value = UrnConfig> {
    (1u64..60, 1u64..60)
        .prop_flat_map(|(a, b)| (Just(a), Just(b), 1..=(a + b).min(8)))
        .prop_flat_map(|(a, b, k)| (Just(a), Just(b), Just(k), draw_policy(k), reinforcement_policy(k)))
        .prop_map(|(a, b, k, draw, reinforcement)| UrnConfig { a, b, k, draw, reinforcement })
}

proptest! {
    #[test]
    fn every_step_satisfies_the_increment_identity(config in urn_config(), seed in any::<u64>()) {
        let t = run_trajectory(&config, 60, StreamSeed::new(seed)).unwrap();
        let (mut h, mut s) = (config.a, config.a + config.b);
        for r in &t.records {
            prop_assert!(increment_identity_check(r, h, s));
            prop_assert!(r.drawn_a <= r.draws && r.draws <= s);
            prop_assert_eq!(r.s_after, s + r.reinforcement * r.draws);
            h = r.h_after;
            s = r.s_after;
        }
    }

    #[test]
    fn variance_estimates_are_nonnegative(config in urn_config(), seed in any::<u64>(), n in 1usize..80) {
        let t = run_trajectory(&config, 80, StreamSeed::new(seed)).unwrap();
        let s = t.snapshot(n).unwrap();
        let v = variance_estimates(s.z, s.m, &s.estimates);
        prop_assert!(v.v >= 0.0 && v.w >= 0.0 && v.u >= 0.0, "{v:?}");
        prop_assert!(v.v.is_finite() && v.w.is_finite() && v.u.is_finite());
    }

    #[test]
    fn intervals_are_symmetric_and_nested(
        point in 0.0f64..1.0,
        variance in 0.0f64..2.0,
        n in 1u64..100_000,
        alpha in 0.001f64..0.5,
        shrink in 0.1f64..0.9,
    ) {
        let wide = confidence_interval(IntervalBasis::FromZn, point, variance, n, alpha).unwrap();
        prop_assert!((point - wide.lower() - (wide.upper() - point)).abs() <= 1e-12);
        // A larger alpha (lower level) never gives a wider interval.
        let higher_alpha = (alpha + (1.0 - alpha) * shrink).min(0.999);
        let smaller = confidence_interval(IntervalBasis::FromZn, point, variance, n, higher_alpha).unwrap();
        prop_assert!(smaller.half_width <= wide.half_width);
        let more_data = confidence_interval(IntervalBasis::FromZn, point, variance, n * 4, alpha).unwrap();
        prop_assert!(more_data.half_width <= wide.half_width);
        let clipped = wide.clipped();
        prop_assert!(0.0 <= clipped.lower && clipped.upper <= 1.0);
    }

    #[test]
    fn unit_draws_and_constant_reinforcement_degenerate_the_kernel(
        c in 1u64..8,
        steps in 1u64..1000,
        z in 0.01f64..0.99,
        m in 0.01f64..0.99,
    ) {
        let c = c as f64;
        let est = PlugInEstimates { n: steps, m: c, q: c * c, mu: 1.0, eta: 1.0 };
        prop_assert_eq!(variance_estimates(z, m, &est).u, 0.0);
    }
}
