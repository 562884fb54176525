mod common;

use lpvq::oracle::brute_force;
use lpvq::pmean::{chebyshev_center, solve_pmean};
use lpvq::{MeasureSpace, Norm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum over all `k^n` labelings, each group solved independently.
fn naive(s: &MeasureSpace, n: &Norm, p: f64, k: usize) -> f64 {
    let atoms = s.len();
    let mut best = f64::INFINITY;
    for code in 0..k.pow(atoms as u32) {
        let mut groups = vec![Vec::new(); k];
        let mut c = code;
        for a in 0..atoms {
            groups[c % k].push(a);
            c /= k;
        }
        let mut total = 0.0f64;
        for g in groups.iter().filter(|g| !g.is_empty()) {
            if p.is_infinite() {
                total = total.max(chebyshev_center(s, g, n, 1e-12).unwrap().value);
            } else {
                total += solve_pmean(s, g, n, p, 1e-12, 10_000).unwrap().value;
            }
        }
        let cost = if p.is_infinite() { total } else { total.powf(1.0 / p) };
        best = best.min(cost);
    }
    best
}

#[test]
fn pruned_search_matches_full_enumeration() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    for case in 0..40 {
        let atoms = r.gen_range(1..=6);
        let d = r.gen_range(1..=2);
        let s = common::space(&mut r, atoms, d, 3.0);
        let n = if case % 2 == 0 { Norm::euclidean(d) } else { Norm::parse("q:3", d).unwrap() };
        let p = [1.0, 1.5, 2.0, 3.0, f64::INFINITY][case % 5];
        let k = r.gen_range(1..=3);
        let exact = brute_force(&s, &n, p, k).unwrap();
        let reference = naive(&s, &n, p, k);
        assert!(
            (exact.cost - reference).abs() <= 1e-9 * (1.0 + reference),
            "case {case}: pruned {} vs full {reference}",
            exact.cost
        );
        let g = exact.function(&s);
        assert!((g.cost(&s, &n, p).unwrap() - exact.cost).abs() <= 1e-12 * (1.0 + exact.cost));
    }
}
