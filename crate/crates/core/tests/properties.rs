mod common;

use lpvq::pmean::{gradient_condition, m_p_value, solve_pmean};
use lpvq::quantizer::{certify, lloyd, QuantizerConfig};
use lpvq::{MeasureSpace, Norm, QuantizeReport};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn norm_spec() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("euclidean".to_string()),
        (1.2f64..6.0).prop_map(|q| format!("q:{q}")),
        Just("weighted:1,2.5,0.5".to_string()),
    ]
}

/// `(space, cell, norm, p)` with `d = 3` so the weighted norm always fits.
fn instance() -> impl Strategy<Value = (MeasureSpace, Vec<usize>, Norm, f64)> {
    instance_with(1.0..4.0)
}

fn instance_with(p: std::ops::Range<f64>) -> impl Strategy<Value = (MeasureSpace, Vec<usize>, Norm, f64)> {
    (prop::collection::vec((0.1f64..3.0, prop::collection::vec(-5.0f64..5.0, 3)), 1..10), norm_spec(), p, any::<u64>())
        .prop_map(|(pairs, spec, p, seed)| {
            let s = MeasureSpace::from_pairs(pairs, false).unwrap();
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let cell = common::random_cell(&mut r, s.len());
            (s, cell, Norm::parse(&spec, 3).unwrap(), p)
        })
}

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-8.0f64..8.0, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn m_p_is_convex((s, cell, n, p) in instance(), x in vec3(), y in vec3(), t in 0.0f64..1.0) {
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let lhs = m_p_value(&s, &cell, &n, p, &mid).unwrap();
        let rhs = t * m_p_value(&s, &cell, &n, p, &x).unwrap() + (1.0 - t) * m_p_value(&s, &cell, &n, p, &y).unwrap();
        prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs), "{lhs} > {rhs}");
    }

    #[test]
    fn coercivity_witness((s, cell, n, p) in instance(), x in vec3()) {
        let mass: f64 = cell.iter().map(|&a| s.weight(a)).sum();
        let f_norm: f64 = cell.iter().map(|&a| s.weight(a) * n.length(s.value(a)).powf(p)).sum::<f64>().powf(1.0 / p);
        let lhs = n.length(&x) * mass.powf(1.0 / p);
        let rhs = m_p_value(&s, &cell, &n, p, &x).unwrap().powf(1.0 / p) + f_norm;
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences((s, cell, n, p) in instance_with(1.05..4.0), x in vec3(), v in vec3()) {
        let g = gradient_condition(&s, &cell, &n, p, &x, &v).unwrap();
        let h = 1e-6;
        let at = |t: f64| {
            let y: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + t * b).collect();
            m_p_value(&s, &cell, &n, p, &y).unwrap()
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        prop_assert!((fd - g).abs() <= 1e-4 * g.abs().max(1.0), "fd {fd} vs {g}");
    }

    #[test]
    fn solver_output_is_certified((s, cell, n, p) in instance(), probe in vec3()) {
        let r = solve_pmean(&s, &cell, &n, p, 1e-9, 10_000).unwrap();
        prop_assert!(r.eps_certificate <= 1e-9 * (1.0 + r.value));
        let other = m_p_value(&s, &cell, &n, p, &probe).unwrap();
        prop_assert!(r.value <= other + r.eps_certificate + 1e-12 * (1.0 + other));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn lloyd_reports_are_consistent(
        pairs in prop::collection::vec((0.1f64..3.0, prop::collection::vec(-5.0f64..5.0, 2)), 1..14),
        spec in prop_oneof![Just("euclidean"), Just("q:3")],
        p in prop_oneof![Just(1.0), Just(2.0), Just(3.0), Just(f64::INFINITY)],
        k in 1usize..4,
        seed in any::<u64>(),
        infinite in any::<bool>(),
    ) {
        let s = MeasureSpace::from_pairs(pairs, infinite).unwrap();
        let n = Norm::parse(spec, 2).unwrap();
        let cfg = QuantizerConfig { restarts: 3, seed, ..QuantizerConfig::new(p, k) };
        let report = lloyd(&s, &n, &cfg).unwrap();

        for t in &report.trace {
            for w in t.costs.windows(2) {
                prop_assert!(w[1].1 <= w[0].1 + 1e-12 * (1.0 + w[0].1));
            }
        }
        prop_assert!(report.best.is_reduced(&s));
        prop_assert!(report.best.degree(&s) <= k);
        prop_assert_eq!(report.best.cost(&s, &n, p).unwrap(), report.cost);
        prop_assert_eq!(&certify(&s, &n, &cfg, &report.best).unwrap(), &report.certificate);
        if infinite {
            let b = report.best.background.unwrap();
            prop_assert!(report.best.centers[b].iter().all(|&x| x == 0.0));
        }

        let json = serde_json::to_string(&report).unwrap();
        let back: QuantizeReport = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, report);
    }
}
