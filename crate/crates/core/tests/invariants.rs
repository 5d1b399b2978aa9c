use proptest::prelude::*;
use scosep::distributions::{make_dataset, read_dataset, write_dataset, DistSpec, GeneralLb, Sample, SampleB};
use scosep::losses::LossSpec;
use scosep::population::{PopOptions, PopSpec};
use scosep::relunet::{pwl_to_relu, PiecewiseLinear};
use scosep::vecspace::norm;
use scosep::BitMask;

fn convex_specs() -> Vec<(usize, PopSpec)> {
    vec![
        (3, PopSpec::Fb { delta: 0.2, v: 1 }),
        (3, PopSpec::GeneralLb { which: GeneralLb::D1, c_n: 0.25, j_tilde: 2 }),
        (1, PopSpec::Kink { n: 16 }),
        (1, PopSpec::Drift { n: 9 }),
        (4, PopSpec::Fa { delta: 0.1, p: 0.5, a: 1 }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn population_losses_are_midpoint_convex(
        which in 0usize..5,
        a in prop::collection::vec(-3.0f64..3.0, 4),
        b in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let (dim, spec) = convex_specs().swap_remove(which);
        let o = PopOptions::default();
        let (a, b) = (&a[..dim], &b[..dim]);
        let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
        let fa = spec.value(a, &o).unwrap().mean;
        let fb = spec.value(b, &o).unwrap().mean;
        let fm = spec.value(&mid, &o).unwrap().mean;
        prop_assert!(fm <= 0.5 * (fa + fb) + 1e-12 * (1.0 + fa.abs() + fb.abs()));
    }

    #[test]
    fn quartic_step_stays_in_ball(
        w in prop::collection::vec(-1.5f64..1.5, 1..6),
        bits in prop::collection::vec(any::<bool>(), 6),
        alpha in 0usize..6,
        c_n in 0.0f64..=0.25,
    ) {
        let d = w.len();
        let r = norm(&w);
        let w: Vec<f64> = if r > 2.5 { w.iter().map(|x| x * 2.5 / r).collect() } else { w };
        let z = Sample::B(SampleB { x: BitMask::from_bits(&bits[..d]), alpha: alpha.min(d) });
        let g = LossSpec::Fb { d, c_n }.eval(&w, &z).unwrap().subgrad;
        prop_assert!(norm(&g) <= 70.0);
        let next: Vec<f64> = w.iter().zip(&g).map(|(w, g)| w - 0.01 * g).collect();
        prop_assert!(norm(&next) <= 2.5 + 1e-12);
    }

    #[test]
    fn relu_compilation_is_exact(
        mut knots in prop::collection::vec(-5.0f64..5.0, 1..8),
        slopes in prop::collection::vec(-3.0f64..3.0, 9),
        v0 in -2.0f64..2.0,
        xs in prop::collection::vec(-8.0f64..8.0, 20),
    ) {
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        let k = knots.len();
        let f = PiecewiseLinear::new(knots, v0, slopes[..k + 1].to_vec()).unwrap();
        let combo = pwl_to_relu(&f).unwrap();
        prop_assert_eq!(combo.terms.len(), k + 2);
        for x in xs {
            prop_assert!((combo.eval(x) - f.eval(x)).abs() <= 1e-9 * (1.0 + f.eval(x).abs()));
        }
    }

    #[test]
    fn datasets_are_reproducible_and_round_trip(seed in any::<u64>(), n in 1usize..40) {
        let spec = DistSpec::Product(vec![
            DistSpec::D { delta: 0.1, p: 0.3, a: 2, d: 70 },
            DistSpec::Kink { n: 16 },
            DistSpec::NN { d: 5 },
        ]);
        let a = make_dataset(&spec, n, seed).unwrap();
        prop_assert_eq!(&a, &make_dataset(&spec, n, seed).unwrap());
        let mut buf = Vec::new();
        write_dataset(&a, &mut buf).unwrap();
        prop_assert_eq!(&a, &read_dataset(&mut buf.as_slice()).unwrap());
    }
}
