//! Lloyd-style alternation between Voronoi projection and p-th mean updates.
//!
//! Each restart seeds centers by distance-weighted sampling, then repeats
//!
//! 1. mean step: every free center moves to a p-th mean of its cell,
//! 2. projection: every atom moves to its (lowest-index) nearest center,
//!
//! until the assignment no longer changes, the relative cost decrease drops
//! below `tol`, or `max_iter` is reached. Neither half-step increases the
//! cost. Empty cells are refilled with the atom contributing most to the
//! cost, which strictly improves it. On infinite-mass spaces (or with
//! `pinned_zero`) center 0 stays at the origin for the whole run.
//!
//! The result carries a [`Certificate`]: Voronoi residual, per-cell p-mean
//! suboptimality, boundary mass and degree. Minimizers have zero residual,
//! zero p-mean suboptimality, full degree when the cost is positive and,
//! for smooth norms with `1 < p < inf`, zero boundary mass.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::Norm;
use crate::pmean::{self, DEFAULT_MAX_ITER};
use crate::simplefn::SimpleFunction;
use crate::space::{check_norm, MeasureSpace};
use crate::voronoi::{project_with, VoronoiDiagram, DEFAULT_TIE_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    #[serde(with = "crate::exponent")]
    pub p: f64,
    pub k: usize,
    pub restarts: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub tie_tol: f64,
    #[serde(default)]
    pub pinned_zero: bool,
    #[serde(default = "one")]
    pub jobs: usize,
}

fn one() -> usize {
    1
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        QuantizerConfig {
            p: 2.0,
            k: 2,
            restarts: 10,
            seed: 0,
            tol: pmean::DEFAULT_TOL,
            max_iter: 1000,
            tie_tol: DEFAULT_TIE_TOL,
            pinned_zero: false,
            jobs: 1,
        }
    }
}

impl QuantizerConfig {
    pub fn new(p: f64, k: usize) -> Self {
        QuantizerConfig { p, k, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.p >= 1.0) {
            return Err(Error::InvalidExponent(self.p));
        }
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if self.restarts == 0 {
            return bad("restarts must be positive".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        if !(self.tie_tol >= 0.0) {
            return bad(format!("tie_tol must be >= 0, got {}", self.tie_tol));
        }
        if self.jobs == 0 {
            return bad("jobs must be positive".into());
        }
        Ok(())
    }

    fn pinned(&self, space: &MeasureSpace) -> bool {
        self.pinned_zero || space.infinite_mass()
    }

    // per-cell solves run an order of magnitude tighter than the reported tolerance
    fn inner_tol(&self) -> f64 {
        0.1 * self.tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Mass-weighted excess distance of atoms sitting outside their own Voronoi cell.
    pub voronoi_residual: f64,
    /// Certified p-mean suboptimality of each center over its cell.
    pub pmean_eps: Vec<f64>,
    /// Mass of atoms on a cell boundary; omitted for `p = inf`.
    pub boundary_mass: Option<f64>,
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub restart: usize,
    pub seed: u64,
    pub converged: bool,
    /// `(iteration, cost)`; iteration 0 is the seeded configuration.
    pub costs: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizeReport {
    pub best: SimpleFunction,
    pub cost: f64,
    pub certificate: Certificate,
    pub trace: Vec<RestartTrace>,
    pub best_restart: usize,
    pub seed_used: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    pub centers: Vec<Vec<f64>>,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizingTrace {
    pub steps: Vec<TraceStep>,
    /// Max center displacement between consecutive steps.
    pub displacements: Vec<f64>,
    /// Max displacement over the last [`TAIL_WINDOW`] steps.
    pub tail_displacement: f64,
    pub oscillating: bool,
    pub seed_used: u64,
}

/// Number of trailing steps inspected by [`minimizing_trace`]; also the
/// number of extra alternation steps run after convergence.
pub const TAIL_WINDOW: usize = 10;

/// Runs all restarts and returns the best one.
pub fn lloyd(space: &MeasureSpace, norm: &Norm, config: &QuantizerConfig) -> Result<QuantizeReport> {
    config.validate()?;
    check_norm(space, norm)?;
    let outcomes = run_restarts(space, norm, config, false)?;
    let best_restart = select_best(&outcomes);
    let best_run = &outcomes[best_restart];
    let best = best_run.function.reduce(space);
    let cost = best.cost_unchecked(space, norm, config.p);
    let certificate = certify(space, norm, config, &best)?;
    let trace = outcomes.iter().map(|o| o.trace.clone()).collect();
    Ok(QuantizeReport { best, cost, certificate, trace, best_restart, seed_used: best_run.trace.seed })
}

/// Center sequence of the best restart, extended by [`TAIL_WINDOW`] extra
/// alternation steps, with its displacement profile.
pub fn minimizing_trace(space: &MeasureSpace, norm: &Norm, config: &QuantizerConfig) -> Result<MinimizingTrace> {
    config.validate()?;
    check_norm(space, norm)?;
    if !(config.p > 1.0 && config.p.is_finite()) {
        return Err(Error::InvalidConfig(format!("minimizing trace needs 1 < p < inf, got {}", config.p)));
    }
    if !norm.gateaux_smooth() {
        return Err(Error::InvalidConfig("minimizing trace needs a smooth norm".into()));
    }
    let mut outcomes = run_restarts(space, norm, config, true)?;
    let best = select_best(&outcomes);
    let outcome = outcomes.swap_remove(best);
    let mut steps = outcome.history;
    let mut run = outcome.run;
    let last = steps.last().map_or(0, |s| s.iteration);
    for extra in 1..=TAIL_WINDOW {
        run.mean_step();
        steps.push(TraceStep { iteration: last + extra, centers: run.centers.clone(), cost: run.cost() });
        run.reassign();
    }

    let displacements: Vec<f64> = steps
        .windows(2)
        .map(|w| w[0].centers.iter().zip(&w[1].centers).map(|(a, b)| norm.dist(a, b)).fold(0.0, f64::max))
        .collect();
    let tail_displacement = displacements.iter().rev().take(TAIL_WINDOW).copied().fold(0.0, f64::max);
    let radius = steps.last().map(|s| s.centers.iter().map(|c| norm.length(c)).fold(0.0, f64::max)).unwrap_or(0.0);
    let oscillating = tail_displacement > 100.0 * config.tol * (1.0 + radius);
    Ok(MinimizingTrace { steps, displacements, tail_displacement, oscillating, seed_used: outcome.trace.seed })
}

/// Value of the atom that contributes most to the cost, `argmax w_a ||f_a - x_{c(a)}||^p`.
///
/// Adding it as a new center strictly lowers the cost. Fails with
/// [`Error::NoSplit`] when every atom already equals its center.
pub fn reseed_split(space: &MeasureSpace, norm: &Norm, p: f64, current: &SimpleFunction) -> Result<Vec<f64>> {
    if !(p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    check_norm(space, norm)?;
    current.validate(space)?;
    split_candidate(space, norm, p, &current.centers, &current.assignment).ok_or(Error::NoSplit)
}

fn split_candidate(
    space: &MeasureSpace,
    norm: &Norm,
    p: f64,
    centers: &[Vec<f64>],
    assignment: &[usize],
) -> Option<Vec<f64>> {
    let mut best: Option<(usize, f64)> = None;
    for (a, &c) in assignment.iter().enumerate() {
        let d = norm.dist(space.value(a), &centers[c]);
        let contribution = if p.is_infinite() { d } else { space.weight(a) * d.powf(p) };
        if contribution > 0.0 && best.is_none_or(|(_, b)| contribution > b) {
            best = Some((a, contribution));
        }
    }
    best.map(|(a, _)| space.value(a).to_vec())
}

/// Structure certificate of `g` (expected to be reduced).
pub fn certify(space: &MeasureSpace, norm: &Norm, config: &QuantizerConfig, g: &SimpleFunction) -> Result<Certificate> {
    config.validate()?;
    check_norm(space, norm)?;
    g.validate(space)?;
    let p = config.p;
    let diagram = VoronoiDiagram::new(g.centers.clone(), config.tie_tol)?;
    let threshold = diagram.threshold(norm);

    let mut voronoi_residual = 0.0;
    for (a, &c) in g.assignment.iter().enumerate() {
        let d = diagram.distances(space.value(a), norm);
        let min = d.iter().copied().fold(f64::INFINITY, f64::min);
        voronoi_residual += space.weight(a) * (d[c] - min - threshold).max(0.0);
    }

    let cells = g.cells();
    let mut pmean_eps = Vec::with_capacity(g.k());
    for (j, cell) in cells.iter().enumerate() {
        // the background cell has infinite mass; only the origin has finite M_p there
        let background = space.infinite_mass() && g.background == Some(j);
        if background || cell.is_empty() {
            pmean_eps.push(0.0);
        } else {
            let (_, eps) = pmean::certificate(space, cell, norm, p, &g.centers[j])?;
            pmean_eps.push(eps);
        }
    }

    let boundary_mass = p.is_finite().then(|| diagram.boundary_mass(space, norm, config.tie_tol));
    Ok(Certificate { voronoi_residual, pmean_eps, boundary_mass, degree: g.degree(space) })
}

struct Outcome<'a> {
    run: Run<'a>,
    function: SimpleFunction,
    cost: f64,
    trace: RestartTrace,
    history: Vec<TraceStep>,
}

fn run_restarts<'a>(
    space: &'a MeasureSpace,
    norm: &'a Norm,
    config: &'a QuantizerConfig,
    record: bool,
) -> Result<Vec<Outcome<'a>>> {
    let job = |r: usize| run_restart(space, norm, config, r, record);
    if config.jobs <= 1 {
        return Ok((0..config.restarts).map(job).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(pool.install(|| (0..config.restarts).into_par_iter().map(job).collect()))
}

// lowest cost, ties to the lowest restart index
fn select_best(outcomes: &[Outcome<'_>]) -> usize {
    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.cost < outcomes[best].cost {
            best = i;
        }
    }
    best
}

fn run_restart<'a>(
    space: &'a MeasureSpace,
    norm: &'a Norm,
    config: &'a QuantizerConfig,
    restart: usize,
    record: bool,
) -> Outcome<'a> {
    let seed = config.seed.wrapping_add(restart as u64);
    let mut run = Run::seeded(space, norm, config, seed);
    let mut costs = vec![(0, run.cost())];
    let mut history = Vec::new();
    if record {
        history.push(TraceStep { iteration: 0, centers: run.centers.clone(), cost: costs[0].1 });
    }
    let mut converged = false;
    for it in 1..=config.max_iter {
        run.mean_step();
        let cost = run.cost();
        let prev = costs[costs.len() - 1].1;
        costs.push((it, cost));
        if record {
            history.push(TraceStep { iteration: it, centers: run.centers.clone(), cost });
        }
        if !run.reassign() {
            converged = true;
            break;
        }
        if cost == 0.0 || prev - cost < config.tol * prev {
            break;
        }
    }
    let function = run.function();
    let cost = function.cost_unchecked(space, norm, config.p);
    Outcome { run, function, cost, trace: RestartTrace { restart, seed, converged, costs }, history }
}

struct Run<'a> {
    space: &'a MeasureSpace,
    norm: &'a Norm,
    config: &'a QuantizerConfig,
    pinned: bool,
    centers: Vec<Vec<f64>>,
    assignment: Vec<usize>,
}

impl<'a> Run<'a> {
    fn seeded(space: &'a MeasureSpace, norm: &'a Norm, config: &'a QuantizerConfig, seed: u64) -> Self {
        let pinned = config.pinned(space);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(config.k);
        if pinned {
            centers.push(vec![0.0; space.dim()]);
        }
        let exponent = if config.p.is_finite() { config.p } else { 2.0 };
        while centers.len() < config.k {
            let weights: Vec<f64> = space
                .atoms()
                .iter()
                .map(|a| {
                    let d = centers.iter().map(|c| norm.dist(&a.f, c)).fold(f64::INFINITY, f64::min);
                    if d.is_infinite() {
                        a.w
                    } else {
                        a.w * d.powf(exponent)
                    }
                })
                .collect();
            // every atom already sits on a center
            let Ok(dist) = WeightedIndex::new(&weights) else { break };
            centers.push(space.value(dist.sample(&mut rng)).to_vec());
        }
        let mut run = Run { space, norm, config, pinned, centers, assignment: Vec::new() };
        run.assignment = run.project();
        run.fill_empty();
        run
    }

    fn diagram(&self) -> VoronoiDiagram {
        VoronoiDiagram::unchecked(self.centers.clone(), self.config.tie_tol)
    }

    fn project(&self) -> Vec<usize> {
        let h = SimpleFunction::new(self.centers.clone(), Vec::new(), None);
        project_with(self.space, self.norm, &h, &self.diagram()).assignment
    }

    /// Refills empty free cells; returns whether the centers changed.
    fn fill_empty(&mut self) -> bool {
        let mut changed = false;
        for _ in 0..2 * self.centers.len() + 2 {
            let mut counts = vec![0usize; self.centers.len()];
            for &c in &self.assignment {
                counts[c] += 1;
            }
            let first_free = usize::from(self.pinned);
            let Some(j) = (first_free..self.centers.len()).find(|&j| counts[j] == 0) else {
                break;
            };
            changed = true;
            match split_candidate(self.space, self.norm, self.config.p, &self.centers, &self.assignment) {
                Some(v) => self.centers[j] = v,
                None => {
                    // f is already constant on every cell; drop the unused centers
                    let keep: Vec<usize> =
                        (0..self.centers.len()).filter(|&i| i < first_free || counts[i] > 0).collect();
                    self.centers = keep.iter().map(|&i| self.centers[i].clone()).collect();
                }
            }
            self.assignment = self.project();
        }
        changed
    }

    /// Projects and refills; returns whether anything changed.
    fn reassign(&mut self) -> bool {
        let new = self.project();
        let moved = new != self.assignment;
        self.assignment = new;
        let refilled = self.fill_empty();
        moved || refilled
    }

    fn mean_step(&mut self) {
        let cells = {
            let mut cells = vec![Vec::new(); self.centers.len()];
            for (a, &c) in self.assignment.iter().enumerate() {
                cells[c].push(a);
            }
            cells
        };
        let first_free = usize::from(self.pinned);
        for (j, cell) in cells.iter().enumerate().skip(first_free) {
            if cell.is_empty() {
                continue;
            }
            let start = Some(self.centers[j].as_slice());
            let solved = if self.config.p.is_infinite() {
                pmean::chebyshev_center_from(
                    self.space,
                    cell,
                    self.norm,
                    self.config.inner_tol(),
                    DEFAULT_MAX_ITER,
                    start,
                )
            } else {
                pmean::solve_pmean_from(
                    self.space,
                    cell,
                    self.norm,
                    self.config.p,
                    self.config.inner_tol(),
                    DEFAULT_MAX_ITER,
                    start,
                )
            };
            match solved {
                Ok(r) => self.centers[j] = r.point,
                Err(Error::NonConvergence(r)) => self.centers[j] = r.point,
                Err(_) => {}
            }
        }
    }

    fn function(&self) -> SimpleFunction {
        let background = self.pinned.then_some(0);
        SimpleFunction::new(self.centers.clone(), self.assignment.clone(), background)
    }

    fn cost(&self) -> f64 {
        self.function().cost_unchecked(self.space, self.norm, self.config.p)
    }
}
