#![allow(dead_code)]

use lpvq::{MeasureSpace, Norm, SimpleFunction};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn point(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn space(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> MeasureSpace {
    let pairs: Vec<(f64, Vec<f64>)> = (0..n).map(|_| (rng.gen_range(0.2..2.0), point(rng, d, scale))).collect();
    MeasureSpace::from_pairs(pairs, false).unwrap()
}

/// Weights summing to one.
pub fn probability_space(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> MeasureSpace {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
    let total: f64 = raw.iter().sum();
    let pairs: Vec<(f64, Vec<f64>)> = raw.iter().map(|w| (w / total, point(rng, d, scale))).collect();
    MeasureSpace::from_pairs(pairs, false).unwrap()
}

/// Well-separated clusters: `k` centers on a coarse lattice, atoms within `spread` of each.
pub fn clustered_space(rng: &mut ChaCha8Rng, k: usize, per: usize, d: usize, spread: f64) -> MeasureSpace {
    let mut pairs = Vec::new();
    for c in 0..k {
        let base: Vec<f64> = (0..d).map(|i| if i == 0 { 10.0 * c as f64 } else { rng.gen_range(-1.0..1.0) }).collect();
        for _ in 0..per {
            let f = base.iter().map(|b| b + rng.gen_range(-spread..spread)).collect();
            pairs.push((rng.gen_range(0.5..1.5), f));
        }
    }
    MeasureSpace::from_pairs(pairs, false).unwrap()
}

pub fn smooth_norm(rng: &mut ChaCha8Rng, d: usize) -> Norm {
    match rng.gen_range(0..3) {
        0 => Norm::euclidean(d),
        1 => Norm::parse(&format!("q:{}", rng.gen_range(1.3..5.0)), d).unwrap(),
        _ => {
            let w: Vec<String> = (0..d).map(|_| format!("{}", rng.gen_range(0.3..3.0))).collect();
            Norm::parse(&format!("weighted:{}", w.join(",")), d).unwrap()
        }
    }
}

pub fn random_function(rng: &mut ChaCha8Rng, s: &MeasureSpace, k: usize, scale: f64) -> SimpleFunction {
    let centers: Vec<Vec<f64>> = (0..k).map(|_| point(rng, s.dim(), scale)).collect();
    let assignment = (0..s.len()).map(|_| rng.gen_range(0..k)).collect();
    SimpleFunction::new(centers, assignment, None)
}

pub fn random_cell(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let cell: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
    if cell.is_empty() {
        vec![rng.gen_range(0..n)]
    } else {
        cell
    }
}

pub fn weighted_average(s: &MeasureSpace, cell: &[usize]) -> Vec<f64> {
    let mass: f64 = cell.iter().map(|&a| s.weight(a)).sum();
    let mut avg = vec![0.0; s.dim()];
    for &a in cell {
        for (m, f) in avg.iter_mut().zip(s.value(a)) {
            *m += s.weight(a) * f;
        }
    }
    avg.iter_mut().for_each(|m| *m /= mass);
    avg
}

/// `||f - g||_p` recomputed from the definition.
pub fn direct_cost(s: &MeasureSpace, norm: &Norm, p: f64, g: &SimpleFunction) -> f64 {
    let d = |a: usize| {
        let z: Vec<f64> = s.value(a).iter().zip(&g.centers[g.assignment[a]]).map(|(x, c)| x - c).collect();
        norm.length(&z)
    };
    if p.is_infinite() {
        (0..s.len()).map(d).fold(0.0, f64::max)
    } else {
        (0..s.len()).map(|a| s.weight(a) * d(a).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}
