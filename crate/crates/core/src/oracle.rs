//! Exact reference answers for small instances.
//!
//! [`brute_force`] enumerates every partition of the atoms into at most `k`
//! groups and solves each group's p-th mean; [`grid_lower_bound`] bounds
//! `inf M_p` from below by evaluating on a grid plus a Lipschitz slack.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::Norm;
use crate::pmean::{self, PMeanResult};
use crate::simplefn::SimpleFunction;
use crate::space::{check_exponent, check_norm, MeasureSpace};

/// Default cap on `k^n`.
pub const DEFAULT_LIMIT: u128 = 1 << 24;

const GROUP_TOL: f64 = 1e-11;
const GRID_LIMIT: u128 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub cost: f64,
    pub assignment: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    /// Number of complete partitions evaluated.
    pub enumerated: u64,
}

impl OracleResult {
    pub fn function(&self, space: &MeasureSpace) -> SimpleFunction {
        let background = space.infinite_mass().then_some(0);
        SimpleFunction::new(self.centers.clone(), self.assignment.clone(), background).reduce(space)
    }
}

pub fn brute_force(space: &MeasureSpace, norm: &Norm, p: f64, k: usize) -> Result<OracleResult> {
    brute_force_with_limit(space, norm, p, k, DEFAULT_LIMIT)
}

/// Optimal k-valued approximation by exhaustive search.
///
/// On infinite-mass spaces group 0 is pinned to the origin.
pub fn brute_force_with_limit(
    space: &MeasureSpace,
    norm: &Norm,
    p: f64,
    k: usize,
    limit: u128,
) -> Result<OracleResult> {
    check_exponent(p)?;
    check_norm(space, norm)?;
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    let n = space.len();
    let assignments = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if assignments > limit || n > 64 {
        return Err(Error::TooLarge { assignments, limit });
    }
    let mut search = Search {
        space,
        norm,
        p,
        k,
        pinned: space.infinite_mass(),
        memo: HashMap::new(),
        labels: vec![0; n],
        best: None,
        enumerated: 0,
    };
    search.dfs(0, 0, &mut vec![0u64; k]);
    let (cost_pth, assignment) = search.best.take().ok_or(Error::NoAtoms)?;

    let mut masks = vec![0u64; k];
    for (a, &g) in assignment.iter().enumerate() {
        masks[g] |= 1 << a;
    }
    // labels are restricted growth, so used groups are contiguous
    let first = usize::from(search.pinned);
    let used = first + masks[first..].iter().filter(|&&m| m != 0).count();
    let centers = (0..used).map(|g| search.group(g, masks[g]).1).collect();
    let cost = if p.is_infinite() { cost_pth } else { cost_pth.powf(1.0 / p) };
    Ok(OracleResult { cost, assignment, centers, enumerated: search.enumerated })
}

struct Search<'a> {
    space: &'a MeasureSpace,
    norm: &'a Norm,
    p: f64,
    k: usize,
    pinned: bool,
    memo: HashMap<(bool, u64), (f64, Vec<f64>)>,
    labels: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    enumerated: u64,
}

impl Search<'_> {
    /// `(min M_p, minimizer)` of one group; the pinned group sits at the origin.
    fn group(&mut self, g: usize, mask: u64) -> (f64, Vec<f64>) {
        let origin = self.pinned && g == 0;
        if mask == 0 {
            return (0.0, vec![0.0; self.space.dim()]);
        }
        if let Some(hit) = self.memo.get(&(origin, mask)) {
            return hit.clone();
        }
        let cell: Vec<usize> = (0..self.space.len()).filter(|a| mask >> a & 1 == 1).collect();
        let result = if origin {
            let zero = vec![0.0; self.space.dim()];
            let v = pmean::m_p_value(self.space, &cell, self.norm, self.p, &zero).expect("valid cell");
            (v, zero)
        } else {
            let solved = if self.p.is_infinite() {
                pmean::chebyshev_center(self.space, &cell, self.norm, GROUP_TOL)
            } else {
                pmean::solve_pmean(self.space, &cell, self.norm, self.p, GROUP_TOL, pmean::DEFAULT_MAX_ITER)
            };
            let r: PMeanResult = match solved {
                Ok(r) => r,
                Err(Error::NonConvergence(r)) => *r,
                Err(e) => panic!("group solve failed: {e}"),
            };
            (r.value, r.point)
        };
        self.memo.insert((origin, mask), result.clone());
        result
    }

    fn total(&mut self, masks: &[u64]) -> f64 {
        let mut acc = 0.0;
        for (g, &m) in masks.iter().enumerate() {
            let v = self.group(g, m).0;
            acc = if self.p.is_infinite() { f64::max(acc, v) } else { acc + v };
        }
        acc
    }

    // restricted growth labels: free groups open in order, so each partition is visited once
    fn dfs(&mut self, a: usize, open: usize, masks: &mut Vec<u64>) {
        let partial = self.total(masks);
        if self.best.as_ref().is_some_and(|(b, _)| partial > *b) {
            return;
        }
        if a == self.space.len() {
            self.enumerated += 1;
            if self.best.as_ref().is_none_or(|(b, _)| partial < *b) {
                self.best = Some((partial, self.labels.clone()));
            }
            return;
        }
        let first = usize::from(self.pinned);
        let mut options: Vec<usize> = Vec::new();
        if self.pinned {
            options.push(0);
        }
        let top = (first + open).min(self.k - 1);
        options.extend(first..=top);
        options.dedup();
        for g in options {
            if g >= self.k {
                continue;
            }
            let opens = usize::from(g >= first && g == first + open);
            masks[g] |= 1 << a;
            self.labels[a] = g;
            self.dfs(a + 1, open + opens, masks);
            masks[g] &= !(1 << a);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBound {
    /// Certified `<= inf M_p` over the cell.
    pub lower: f64,
    /// Smallest grid value, an upper bound.
    pub upper: f64,
    pub argmin: Vec<f64>,
}

/// Lower bound on `inf_x M_p(x)` over a cell.
///
/// The minimizer lies within `2 (M_p(avg) / m)^{1/p}` of the weighted average
/// (`2 F(avg)` for `p = inf`); the axis box around that ball is sampled with
/// `resolution` points per axis and each sample is discounted by the
/// Lipschitz constant of `M_p` on the box times the half cell diagonal.
pub fn grid_lower_bound(
    space: &MeasureSpace,
    cell: &[usize],
    norm: &Norm,
    p: f64,
    resolution: usize,
) -> Result<GridBound> {
    check_exponent(p)?;
    check_norm(space, norm)?;
    if cell.is_empty() {
        return Err(Error::EmptyCell);
    }
    if let Some(&a) = cell.iter().find(|&&a| a >= space.len()) {
        return Err(Error::AtomOutOfRange(a));
    }
    if resolution < 2 {
        return Err(Error::InvalidConfig("grid resolution must be >= 2".into()));
    }
    let d = space.dim();
    let points = (resolution as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if points > GRID_LIMIT {
        return Err(Error::TooLarge { assignments: points, limit: GRID_LIMIT });
    }
    let value = |x: &[f64]| pmean::m_p_value(space, cell, norm, p, x).expect("valid cell");

    let mass: f64 = cell.iter().map(|&a| space.weight(a)).sum();
    let mut avg = vec![0.0; d];
    for &a in cell {
        for (s, f) in avg.iter_mut().zip(space.value(a)) {
            *s += space.weight(a) * f / mass;
        }
    }
    let radius = if p.is_infinite() { 2.0 * value(&avg) } else { 2.0 * (value(&avg) / mass).powf(1.0 / p) };
    let half: Vec<f64> = (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            radius * norm.dual(&e)
        })
        .collect();
    let step: Vec<f64> = half.iter().map(|h| 2.0 * h / (resolution - 1) as f64).collect();
    let rho = norm.length(&step.iter().map(|s| s / 2.0).collect::<Vec<_>>());
    let box_half_diag = norm.length(&half);
    let lipschitz = if p.is_infinite() {
        1.0
    } else {
        cell.iter()
            .map(|&a| {
                let reach = norm.dist(space.value(a), &avg) + box_half_diag;
                space.weight(a) * p * reach.powf(p - 1.0)
            })
            .sum()
    };

    let mut index = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut upper = f64::INFINITY;
    let mut argmin = avg.clone();
    loop {
        for i in 0..d {
            x[i] = avg[i] - half[i] + step[i] * index[i] as f64;
        }
        let v = value(&x);
        if v < upper {
            upper = v;
            argmin.clone_from(&x);
        }
        let Some(i) = index.iter().position(|&t| t + 1 < resolution) else { break };
        index[i] += 1;
        index[..i].fill(0);
    }
    Ok(GridBound { lower: (upper - lipschitz * rho).max(0.0), upper, argmin })
}
