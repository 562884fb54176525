//! p-th means: minimizers of `M_p(x) = sum_{a in A} w_a ||f_a - x||^p`.
//!
//! `M_p` is convex, coercive and continuous on a finite-mass cell, so any
//! stationary point is a global minimizer. Solvers return a point together
//! with a computable `eps_certificate`, an upper bound on
//! `M_p(x) - inf M_p`.
//!
//! The certificate comes from one linearization step. For a subgradient `g`
//! at `x` and any `y` with `M_p(y) <= M_p(x)`,
//!
//! ```text
//! ||y - x|| m^(1/p) <= M_p(y)^(1/p) + M_p(x)^(1/p) <= 2 M_p(x)^(1/p),
//! M_p(y) >= M_p(x) - ||g||_* ||y - x||,
//! ```
//!
//! where `m` is the cell mass and `||.||_*` the dual norm, so
//! `eps = ||g||_* * 2 (M_p(x) / m)^(1/p)`. For `p = 1` the minimal-dual-norm
//! subgradient is used at points that coincide with atoms. Near a heavy atom
//! a second bound, which keeps that atom's term exact and linearizes the
//! rest, is tighter and the smaller of the two is reported. For `p = inf` the
//! bound uses a convex combination of gradients of nearly active atoms and the
//! diameter bound `max ||f_a - f_b|| / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{dot, Norm, NormKind};
use crate::space::{check_norm, MeasureSpace};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PMeanResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub eps_certificate: f64,
    pub iterations: usize,
}

fn validate_cell(space: &MeasureSpace, norm: &Norm, cell: &[usize]) -> Result<()> {
    check_norm(space, norm)?;
    if cell.is_empty() {
        return Err(Error::EmptyCell);
    }
    if let Some(&a) = cell.iter().find(|&&a| a >= space.len()) {
        return Err(Error::AtomOutOfRange(a));
    }
    Ok(())
}

fn check_point(space: &MeasureSpace, x: &[f64]) -> Result<()> {
    if x.len() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: x.len() });
    }
    Ok(())
}

/// `M_p(f, cell)(x)`; for `p = inf`, `max_{a in cell} ||f_a - x||`.
pub fn m_p_value(space: &MeasureSpace, cell: &[usize], norm: &Norm, p: f64, x: &[f64]) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    validate_cell(space, norm, cell)?;
    check_point(space, x)?;
    Ok(Objective::new(space, cell, norm, p).value(x))
}

/// Directional derivative of `M_p` at `x` in direction `v`.
///
/// At a p-th mean this vanishes for every `v`.
pub fn gradient_condition(
    space: &MeasureSpace,
    cell: &[usize],
    norm: &Norm,
    p: f64,
    x: &[f64],
    v: &[f64],
) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    validate_cell(space, norm, cell)?;
    check_point(space, x)?;
    check_point(space, v)?;
    let minus_v: Vec<f64> = v.iter().map(|t| -t).collect();
    let mut total = 0.0;
    for &a in cell {
        let z: Vec<f64> = space.value(a).iter().zip(x).map(|(f, x)| f - x).collect();
        total += space.weight(a) * norm.grad_pth_power(&z, &minus_v, p)?;
    }
    Ok(total)
}

/// Certified suboptimality of `x` as a p-th mean of the cell: returns
/// `(grad_norm, eps)` with `M_p(x) <= inf M_p + eps`.
pub fn certificate(space: &MeasureSpace, cell: &[usize], norm: &Norm, p: f64, x: &[f64]) -> Result<(f64, f64)> {
    if !(p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    validate_cell(space, norm, cell)?;
    check_point(space, x)?;
    let obj = Objective::new(space, cell, norm, p);
    if p.is_infinite() {
        let lb_pair = pair_lower_bound(&obj);
        let c = obj.minimax_certificate(x, lb_pair);
        Ok((c.grad_norm, c.eps))
    } else {
        let c = obj.certificate(x, obj.value(x));
        Ok((c.grad_norm, c.eps))
    }
}

/// Computes a p-th mean of `f` on `cell` for `1 <= p < inf`.
pub fn solve_pmean(
    space: &MeasureSpace,
    cell: &[usize],
    norm: &Norm,
    p: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PMeanResult> {
    solve_pmean_from(space, cell, norm, p, tol, max_iter, None)
}

/// [`solve_pmean`] with an optional warm start. The descent path never
/// returns a point worse than the best of the warm start and the weighted
/// average.
pub fn solve_pmean_from(
    space: &MeasureSpace,
    cell: &[usize],
    norm: &Norm,
    p: f64,
    tol: f64,
    max_iter: usize,
    start: Option<&[f64]>,
) -> Result<PMeanResult> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    validate_cell(space, norm, cell)?;
    if let Some(s) = start {
        check_point(space, s)?;
    }
    let obj = Objective::new(space, cell, norm, p);

    if let Some(x) = obj.common_value() {
        return Ok(obj.exact(x.to_vec()));
    }
    let inner_product = matches!(norm.kind(), NormKind::Euclidean | NormKind::WeightedEuclidean(_));
    if p == 2.0 && (inner_product || space.dim() == 1) {
        return Ok(obj.exact(obj.weighted_average()));
    }
    if p == 1.0 && space.dim() == 1 {
        return Ok(obj.exact(obj.weighted_median()));
    }

    let mut candidates = vec![obj.weighted_average()];
    if let Some(s) = start {
        candidates.push(s.to_vec());
    }
    if p == 1.0 && cell.len() <= ATOM_SCAN_LIMIT {
        candidates.extend(cell.iter().map(|&a| space.value(a).to_vec()));
    }
    let x0 = candidates
        .into_iter()
        .map(|x| (obj.value(&x), x))
        .fold(None::<(f64, Vec<f64>)>, |best, (v, x)| match best {
            Some((bv, _)) if bv <= v => best,
            _ => Some((v, x)),
        })
        .map(|(_, x)| x)
        .expect("at least one candidate");

    let (result, converged) = obj.descend(x0, tol, max_iter);
    if converged {
        Ok(result)
    } else {
        Err(Error::NonConvergence(Box::new(result)))
    }
}

/// The p = inf mean: minimizes `max_{a in cell} ||f_a - x||`.
pub fn chebyshev_center(space: &MeasureSpace, cell: &[usize], norm: &Norm, tol: f64) -> Result<PMeanResult> {
    chebyshev_center_from(space, cell, norm, tol, DEFAULT_MAX_ITER, None)
}

pub fn chebyshev_center_from(
    space: &MeasureSpace,
    cell: &[usize],
    norm: &Norm,
    tol: f64,
    max_iter: usize,
    start: Option<&[f64]>,
) -> Result<PMeanResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    validate_cell(space, norm, cell)?;
    if let Some(s) = start {
        check_point(space, s)?;
    }
    let obj = Objective::new(space, cell, norm, f64::INFINITY);
    if let Some(x) = obj.common_value() {
        return Ok(obj.exact(x.to_vec()));
    }
    let lb_pair = pair_lower_bound(&obj);
    if space.dim() == 1 {
        let (lo, hi) = cell
            .iter()
            .map(|&a| space.value(a)[0])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let x = vec![lo + 0.5 * (hi - lo)];
        let value = obj.value(&x);
        return Ok(PMeanResult {
            point: x,
            value,
            grad_norm: 0.0,
            eps_certificate: (value - lb_pair).max(0.0),
            iterations: 0,
        });
    }
    let (result, converged) = obj.minimax_descend(start, lb_pair, tol, max_iter);
    if converged {
        Ok(result)
    } else {
        Err(Error::NonConvergence(Box::new(result)))
    }
}

const ATOM_SCAN_LIMIT: usize = 1024;
const ARMIJO: f64 = 1e-4;
const NEWTON_MAX_DIM: usize = 32;
const ESCAPE_RADIUS: f64 = 1e-3;
const BUNDLE_OFFSETS: [f64; 4] = [1e-13, 1e-11, 1e-9, 1e-7];

struct Cert {
    grad_norm: f64,
    eps: f64,
}

struct Objective<'a> {
    space: &'a MeasureSpace,
    cell: &'a [usize],
    norm: &'a Norm,
    p: f64,
    mass: f64,
}

impl<'a> Objective<'a> {
    fn new(space: &'a MeasureSpace, cell: &'a [usize], norm: &'a Norm, p: f64) -> Self {
        let mass = cell.iter().map(|&a| space.weight(a)).sum();
        Objective { space, cell, norm, p, mass }
    }

    fn dim(&self) -> usize {
        self.space.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let dists = self.cell.iter().map(|&a| (a, self.norm.dist(self.space.value(a), x)));
        if self.p.is_infinite() {
            dists.map(|(_, d)| d).fold(0.0, f64::max)
        } else if self.p == 1.0 {
            dists.map(|(a, d)| self.space.weight(a) * d).sum()
        } else {
            dists.map(|(a, d)| self.space.weight(a) * d.powf(self.p)).sum()
        }
    }

    /// Gradient for finite `p`; atoms coinciding with `x` contribute zero.
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        let mut z = vec![0.0; self.dim()];
        for &a in self.cell {
            for ((zi, fi), xi) in z.iter_mut().zip(self.space.value(a)).zip(x) {
                *zi = fi - xi;
            }
            let gz = self.norm.pth_power_gradient(&z, self.p);
            let w = self.space.weight(a);
            for (gi, t) in g.iter_mut().zip(&gz) {
                *gi -= w * t;
            }
        }
        g
    }

    /// Total weight of atoms sitting exactly at `x`.
    fn mass_at(&self, x: &[f64]) -> f64 {
        self.cell.iter().filter(|&&a| self.space.value(a) == x).map(|&a| self.space.weight(a)).sum()
    }

    fn radius(&self, value: f64) -> f64 {
        2.0 * (value / self.mass).powf(1.0 / self.p)
    }

    /// Gradient-based bound only; small values also mean the gradient is small.
    fn linear_certificate(&self, x: &[f64], value: f64) -> Cert {
        let g = self.gradient(x);
        let mut grad_norm = self.norm.dual(&g);
        if self.p == 1.0 {
            grad_norm = (grad_norm - self.mass_at(x)).max(0.0);
        }
        let eps = if grad_norm == 0.0 { 0.0 } else { grad_norm * self.radius(value) };
        Cert { grad_norm, eps }
    }

    fn certificate(&self, x: &[f64], value: f64) -> Cert {
        let mut cert = self.linear_certificate(x, value);
        if cert.eps > 0.0 {
            if let Some(bound) = self.nearest_atom_bound(x) {
                cert.eps = cert.eps.min(bound);
            }
        }
        if cert.eps > 0.0 && self.has_cusps() {
            if let Some(bound) = self.bundle_bound(x, value) {
                cert.eps = cert.eps.min(bound);
            }
        }
        cert
    }

    /// Bound from gradients sampled on both sides of `x` along each axis. By
    /// convexity `M_p(y) >= sum_j l_j (M_p(x_j) + <g_j, x - x_j>) + <g, y - x>`
    /// with `g = sum_j l_j g_j`, and every minimizer lies within
    /// `radius(value)` of `x`.
    fn bundle_bound(&self, x: &[f64], value: f64) -> Option<f64> {
        let d = self.dim();
        let reach = self.radius(value);
        let scale = x.iter().fold((value / self.mass).powf(1.0 / self.p), |m, t| m.max(t.abs()));
        let mut best: Option<f64> = None;
        for h in BUNDLE_OFFSETS {
            let mut grads = vec![self.gradient(x)];
            let mut lins = vec![value];
            for i in 0..d {
                for sign in [-1.0, 1.0] {
                    let mut y = x.to_vec();
                    y[i] += sign * h * scale;
                    let g = self.gradient(&y);
                    let back: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                    lins.push(self.value(&y) + dot(&g, &back));
                    grads.push(g);
                }
            }
            if !grads.iter().flatten().all(|t| t.is_finite()) {
                continue;
            }
            let (g, weights) = min_norm_point(&grads);
            let lower: f64 = weights.iter().zip(&lins).map(|(l, v)| l * v).sum::<f64>() - self.norm.dual(&g) * reach;
            let eps = (value - lower).max(0.0);
            if eps.is_finite() && best.is_none_or(|b| eps < b) {
                best = Some(eps);
            }
        }
        best
    }

    /// Suboptimality bound that linearizes every term except those of the
    /// atoms at the value nearest to `x`, which are kept exactly:
    /// `inf_u <g, u> + w ||u||^p = -(1 - 1/p) G (G / (w p))^{1/(p-1)}`
    /// with `G = ||g||_*`. Sharp near a heavy atom, where the curvature of
    /// `M_p` blows up.
    fn nearest_atom_bound(&self, x: &[f64]) -> Option<f64> {
        let p = self.p;
        let nearest = self.nearest_value(x)?;
        let (w, g) = self.rest_gradient(x, nearest);
        let big_g = self.norm.dual(&g);
        let inner = if p == 1.0 {
            if big_g > w {
                return None;
            }
            0.0
        } else {
            (1.0 - 1.0 / p) * big_g * (big_g / (w * p)).powf(1.0 / (p - 1.0))
        };
        let offset: Vec<f64> = nearest.iter().zip(x).map(|(f, x)| f - x).collect();
        let own = w * self.norm.length(&offset).powf(p);
        let bound = own - dot(&g, &offset) + inner;
        bound.is_finite().then_some(bound.max(0.0))
    }

    fn nearest_value(&self, x: &[f64]) -> Option<&'a [f64]> {
        self.cell
            .iter()
            .map(|&a| self.space.value(a))
            .min_by(|a, b| self.norm.dist(a, x).total_cmp(&self.norm.dist(b, x)))
    }

    /// Weight at `at` and the gradient at `x` of the terms of all other atoms.
    fn rest_gradient(&self, x: &[f64], at: &[f64]) -> (f64, Vec<f64>) {
        let p = self.p;
        let nearest = at;
        let mut w = 0.0;
        let mut g = vec![0.0; self.dim()];
        let mut z = vec![0.0; self.dim()];
        for &a in self.cell {
            let f = self.space.value(a);
            if f == nearest {
                w += self.space.weight(a);
                continue;
            }
            for ((zi, fi), xi) in z.iter_mut().zip(f).zip(x) {
                *zi = fi - xi;
            }
            let gz = self.norm.pth_power_gradient(&z, p);
            for (gi, t) in g.iter_mut().zip(&gz) {
                *gi -= self.space.weight(a) * t;
            }
        }
        (w, g)
    }

    /// Near an atom with p close to 1 descent can creep into the cusp. Restart
    /// from the atom along the dual direction of the remaining gradient.
    fn escape_atom(&self, x: &[f64], fx: f64) -> Option<(Vec<f64>, f64)> {
        let typical = (fx / self.mass).powf(1.0 / self.p);
        let atom = self.nearest_value(x)?;
        let r = self.norm.dist(atom, x);
        if !(r <= ESCAPE_RADIUS * typical) {
            return None;
        }
        // moving out is downhill while the atom's own slope is below the rest
        let (w, g) = self.rest_gradient(atom, atom);
        let slope = if self.p == 1.0 { w } else { w * self.p * r.powf(self.p - 1.0) };
        if !(self.norm.dual(&g) > slope) {
            return None;
        }
        let v = self.norm.dual_direction(&g)?;
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut t = typical;
        for _ in 0..60 {
            let xn: Vec<f64> = atom.iter().zip(&v).map(|(a, d)| a - t * d).collect();
            let f = self.value(&xn);
            if f < best.as_ref().map_or(fx, |b| b.1) {
                best = Some((xn, f));
            } else if best.is_some() {
                break;
            }
            t *= 0.5;
        }
        best
    }

    fn common_value(&self) -> Option<&'a [f64]> {
        let first = self.space.value(self.cell[0]);
        self.cell.iter().all(|&a| self.space.value(a) == first).then_some(first)
    }

    fn exact(&self, x: Vec<f64>) -> PMeanResult {
        let value = self.value(&x);
        let (grad_norm, eps) = if self.p.is_infinite() {
            (0.0, 0.0)
        } else {
            let c = self.certificate(&x, value);
            (c.grad_norm, c.eps)
        };
        PMeanResult { point: x, value, grad_norm, eps_certificate: eps, iterations: 0 }
    }

    fn weighted_average(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for &a in self.cell {
            let w = self.space.weight(a);
            for (xi, fi) in x.iter_mut().zip(self.space.value(a)) {
                *xi += w * fi;
            }
        }
        x.iter_mut().for_each(|xi| *xi /= self.mass);
        x
    }

    /// Lowest point whose cumulative weight reaches half the mass (d = 1).
    fn weighted_median(&self) -> Vec<f64> {
        let mut pts: Vec<(f64, f64)> =
            self.cell.iter().map(|&a| (self.space.value(a)[0], self.space.weight(a))).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let half = 0.5 * self.mass;
        let mut acc = 0.0;
        for &(v, w) in &pts {
            acc += w;
            if acc >= half {
                return vec![v];
            }
        }
        vec![pts[pts.len() - 1].0]
    }

    /// Backtracking first-order descent with Barzilai-Borwein trial steps.
    fn descend(&self, mut x: Vec<f64>, tol: f64, max_iter: usize) -> (PMeanResult, bool) {
        let mut fx = self.value(&x);
        let mut g = self.gradient(&x);
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut last_step = None::<f64>;
        let mut iterations = 0;
        let mut cooldown = 0usize;

        for it in 0..max_iter {
            iterations = it;
            let cert = self.linear_certificate(&x, fx);
            if cert.eps <= tol * (1.0 + fx) {
                return (self.finish(x, fx, cert, it), true);
            }
            if it % 10 == 9 {
                let cert = self.certificate(&x, fx);
                if cert.eps <= tol * (1.0 + fx) {
                    return (self.finish(x, fx, cert, it), true);
                }
            }

            let escaped = if cooldown == 0 { self.escape_atom(&x, fx) } else { None };
            cooldown = if escaped.is_none() && cooldown == 0 { 20 } else { cooldown.saturating_sub(1) };
            if let Some((xn, fn_)) = escaped {
                g = self.gradient(&xn);
                x = xn;
                fx = fn_;
                prev = None;
                last_step = None;
                iterations = it + 1;
                continue;
            }

            let kink = self.p == 1.0 && self.mass_at(&x) > 0.0;
            let (dir, slope) = if kink {
                // minimal-dual-norm subgradient: move along the dual direction of the
                // remaining gradient
                let Some(v) = self.norm.dual_direction(&g) else { break };
                let slope = -self.norm.dual(&g) + self.mass_at(&x);
                (v.iter().map(|t| -t).collect::<Vec<_>>(), slope)
            } else {
                (g.iter().map(|t| -t).collect::<Vec<_>>(), -dot(&g, &g))
            };
            if !(slope < 0.0) {
                break;
            }

            let mut newton = if kink { None } else { self.newton_direction(&x, &g, false) };
            if let Some(n) = &newton {
                // a rejected full step means the quadratic model overshoots a cusp
                let xn: Vec<f64> = x.iter().zip(n).map(|(a, d)| a + d).collect();
                if !(self.value(&xn) <= fx + ARMIJO * dot(&g, n)) && self.has_cusps() {
                    newton = self.newton_direction(&x, &g, true).or(newton);
                }
            }
            let used_newton = newton.is_some();
            let (dir, slope) = match newton {
                Some(n) => {
                    let slope = dot(&g, &n);
                    (n, slope)
                }
                None => (dir, slope),
            };
            let dir_len = dot(&dir, &dir).sqrt();
            let typical = (fx / self.mass).powf(1.0 / self.p);
            let mut alpha = match (&prev, kink) {
                _ if used_newton => 1.0,
                (Some((px, pg)), false) => {
                    let s: Vec<f64> = x.iter().zip(px).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = g.iter().zip(pg).map(|(a, b)| a - b).collect();
                    let sy = dot(&s, &y);
                    if sy > 0.0 {
                        dot(&s, &s) / sy
                    } else {
                        last_step.unwrap_or(typical / dir_len) * 2.0
                    }
                }
                _ => typical / dir_len,
            };

            let mut accepted = None;
            for trial in 0..80 {
                let xn: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
                let fn_ = self.value(&xn);
                if fn_ <= fx + ARMIJO * alpha * slope {
                    let (mut xn, mut fn_) = (xn, fn_);
                    // the first trial step may be far too short near a heavy atom
                    if trial == 0 {
                        for _ in 0..60 {
                            let x2: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + 2.0 * alpha * d).collect();
                            let f2 = self.value(&x2);
                            if !(f2 < fn_) {
                                break;
                            }
                            alpha *= 2.0;
                            xn = x2;
                            fn_ = f2;
                        }
                    }
                    accepted = Some((xn, fn_, None));
                    break;
                }
                // below the rounding floor of the objective the gradient decides
                if fn_ <= fx + 4.0 * f64::EPSILON * fx.abs() {
                    let gn = self.gradient(&xn);
                    if self.norm.dual(&gn) < self.norm.dual(&g) {
                        accepted = Some((xn, fn_, Some(gn)));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some((xn, fn_, gn)) = accepted else { break };
            last_step = Some(alpha);
            let gn = gn.unwrap_or_else(|| self.gradient(&xn));
            let old_x = std::mem::replace(&mut x, xn);
            let old_g = std::mem::replace(&mut g, gn);
            prev = (!kink).then_some((old_x, old_g));
            fx = fn_;
            iterations = it + 1;
        }
        let cert = self.certificate(&x, fx);
        let ok = cert.eps <= tol * (1.0 + fx);
        (self.finish(x, fx, cert, iterations), ok)
    }

    /// Solves `H d = -g` with the Hessian of `M_p`; `None` if `H` is not
    /// numerically positive definite or the dimension is large.
    fn newton_direction(&self, x: &[f64], g: &[f64], majorize: bool) -> Option<Vec<f64>> {
        let d = self.dim();
        if d > NEWTON_MAX_DIM {
            return None;
        }
        let mut h = vec![vec![0.0; d]; d];
        let mut z = vec![0.0; d];
        for &a in self.cell {
            for ((zi, fi), xi) in z.iter_mut().zip(self.space.value(a)).zip(x) {
                *zi = fi - xi;
            }
            let ha = if majorize {
                self.norm.pth_power_majorizer(&z, self.p)
            } else {
                self.norm.pth_power_hessian(&z, self.p)
            };
            let Some(ha) = ha else { continue };
            let w = self.space.weight(a);
            for (row, ra) in h.iter_mut().zip(&ha) {
                for (e, ea) in row.iter_mut().zip(ra) {
                    *e += w * ea;
                }
            }
        }
        let rhs: Vec<f64> = g.iter().map(|t| -t).collect();
        let step = cholesky_solve(h, rhs)?;
        (step.iter().all(|t| t.is_finite()) && dot(&step, g) < 0.0).then_some(step)
    }

    fn has_cusps(&self) -> bool {
        self.p < 2.0 || matches!(self.norm.kind(), NormKind::Q(q) if *q < 2.0)
    }

    fn finish(&self, point: Vec<f64>, value: f64, cert: Cert, iterations: usize) -> PMeanResult {
        PMeanResult { point, value, grad_norm: cert.grad_norm, eps_certificate: cert.eps, iterations }
    }

    /// Atoms within `delta` of the max, with their distances and the
    /// gradients of `x -> ||f_a - x||`.
    fn active(&self, x: &[f64], fx: f64, delta: f64) -> (Vec<usize>, Vec<f64>, Vec<Vec<f64>>) {
        let (mut idx, mut dists, mut grads) = (Vec::new(), Vec::new(), Vec::new());
        let mut z = vec![0.0; self.dim()];
        for &a in self.cell {
            for ((zi, fi), xi) in z.iter_mut().zip(self.space.value(a)).zip(x) {
                *zi = fi - xi;
            }
            let d = self.norm.length(&z);
            if d >= fx - delta {
                idx.push(a);
                dists.push(d);
                grads.push(match self.norm.unit_gradient(&z) {
                    Some(u) => u.into_iter().map(|t| -t).collect(),
                    None => vec![0.0; self.dim()],
                });
            }
        }
        (idx, dists, grads)
    }

    /// Lagrangian lower bound `sum l_a d_a - ||g||_* 2F(x)` with `l` the
    /// min-norm convex weights of the delta-active gradients and `g` their
    /// combination.
    fn minimax_bound(&self, x: &[f64], fx: f64, delta: f64) -> (f64, Vec<f64>) {
        let (_, dists, grads) = self.active(x, fx, delta);
        let (g, lam) = min_norm_point(&grads);
        let h: f64 = lam.iter().zip(&dists).map(|(l, d)| l * d).sum();
        let lb = h - self.norm.dual(&g) * 2.0 * fx;
        (lb, g)
    }

    /// Newton polish on the optimality system of each distinct delta-active set.
    fn minimax_newton(&self, x: &[f64], fx: f64) -> Option<(Vec<f64>, f64)> {
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut tried: Vec<Vec<usize>> = Vec::new();
        for k in 1..=10 {
            let (idx, _, grads) = self.active(x, fx, fx * 10f64.powi(-k));
            if idx.len() < 2 || idx.len() > self.dim() + 1 || tried.contains(&idx) {
                continue;
            }
            let (_, lam) = min_norm_point(&grads);
            let candidate = self.kkt_newton(&idx, x, fx, lam);
            tried.push(idx);
            if let Some(xn) = candidate {
                let fnew = self.value(&xn);
                if fnew < best.as_ref().map_or(fx, |b| b.1) {
                    best = Some((xn, fnew));
                }
            }
        }
        best
    }

    /// Solves `d_a(x) = t`, `sum l_a grad d_a(x) = 0`, `sum l_a = 1` over the
    /// active atoms; Hessians by central differences of the gradients.
    fn kkt_newton(&self, idx: &[usize], x0: &[f64], t0: f64, lam0: Vec<f64>) -> Option<Vec<f64>> {
        let d = self.dim();
        let m = idx.len();
        let n = d + 1 + m;
        let grad_at = |x: &[f64], a: usize| -> Option<Vec<f64>> {
            let z: Vec<f64> = self.space.value(a).iter().zip(x).map(|(f, x)| f - x).collect();
            Some(self.norm.unit_gradient(&z)?.into_iter().map(|t| -t).collect())
        };
        let (mut x, mut t, mut lam) = (x0.to_vec(), t0, lam0);
        let h = 1e-6 * t0.max(f64::MIN_POSITIVE);
        for _ in 0..50 {
            let us: Vec<Vec<f64>> = idx.iter().map(|&a| grad_at(&x, a)).collect::<Option<_>>()?;
            let mut r = vec![0.0; n];
            for (i, &a) in idx.iter().enumerate() {
                r[i] = self.norm.dist(self.space.value(a), &x) - t;
                for j in 0..d {
                    r[m + j] += lam[i] * us[i][j];
                }
            }
            r[m + d] = lam.iter().sum::<f64>() - 1.0;
            if r.iter().all(|v| v.abs() <= 4.0 * f64::EPSILON * (1.0 + t)) {
                break;
            }
            let mut jac = vec![vec![0.0; n]; n];
            for i in 0..m {
                jac[i][..d].copy_from_slice(&us[i]);
                jac[i][d] = -1.0;
                jac[m + d][d + 1 + i] = 1.0;
                for j in 0..d {
                    jac[m + j][d + 1 + i] = us[i][j];
                }
            }
            for c in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[c] += h;
                xm[c] -= h;
                for (i, &a) in idx.iter().enumerate() {
                    let (up, um) = (grad_at(&xp, a)?, grad_at(&xm, a)?);
                    for j in 0..d {
                        jac[m + j][c] += lam[i] * (up[j] - um[j]) / (2.0 * h);
                    }
                }
            }
            let step = solve_linear(jac, r.iter().map(|v| -v).collect())?;
            for j in 0..d {
                x[j] += step[j];
            }
            t += step[d];
            for i in 0..m {
                lam[i] += step[d + 1 + i];
            }
            if step.iter().all(|s| s.is_finite() && s.abs() <= 1e-16 * (1.0 + t.abs())) {
                break;
            }
        }
        (x.iter().all(|v| v.is_finite()) && lam.iter().all(|&l| l >= -1e-9)).then_some(x)
    }

    fn minimax_certificate(&self, x: &[f64], lb_pair: f64) -> Cert {
        let fx = self.value(x);
        let mut best = (lb_pair, f64::INFINITY);
        for k in 0..10 {
            let delta = fx * 10f64.powi(-k - 3);
            let (lb, g) = self.minimax_bound(x, fx, delta);
            let gn = self.norm.dual(&g);
            if lb > best.0 || (best.1.is_infinite() && lb >= best.0) {
                best = (lb, gn);
            }
        }
        let grad_norm = if best.1.is_finite() { best.1 } else { 0.0 };
        Cert { grad_norm, eps: (fx - best.0).max(0.0) }
    }

    /// Descent on the max-function along min-norm delta-subgradients, with
    /// `delta` shrinking whenever no sufficient decrease is found.
    fn minimax_descend(&self, start: Option<&[f64]>, lb_pair: f64, tol: f64, max_iter: usize) -> (PMeanResult, bool) {
        let mut x = self.bbox_center();
        let mut fx = self.value(&x);
        if let Some(s) = start {
            let fs = self.value(s);
            if fs < fx {
                x = s.to_vec();
                fx = fs;
            }
        }
        let mut lower = lb_pair;
        let mut delta = 0.1 * fx;
        let mut grad_norm = f64::INFINITY;
        let mut iterations = 0;
        for it in 0..max_iter {
            iterations = it;
            let (lb, g) = self.minimax_bound(&x, fx, delta);
            if lb > lower {
                lower = lb;
                grad_norm = self.norm.dual(&g);
            }
            if fx - lower <= tol * (1.0 + fx) {
                break;
            }
            if delta <= 1e-16 * fx.max(f64::MIN_POSITIVE) {
                break;
            }
            if it % 20 == 19 {
                if let Some((xn, fnew)) = self.minimax_newton(&x, fx) {
                    x = xn;
                    fx = fnew;
                    let cert = self.minimax_certificate(&x, lower);
                    lower = lower.max(fx - cert.eps);
                    grad_norm = cert.grad_norm;
                    delta = delta.min(0.1 * fx);
                    continue;
                }
            }
            let gg = dot(&g, &g);
            if gg <= 1e-30 {
                delta *= 0.25;
                continue;
            }
            let mut alpha = fx / gg.sqrt();
            let mut moved = false;
            while alpha * gg.sqrt() > 1e-4 * delta {
                let xn: Vec<f64> = x.iter().zip(&g).map(|(a, d)| a - alpha * d).collect();
                let fnew = self.value(&xn);
                if fnew <= fx - 0.1 * alpha * gg {
                    x = xn;
                    fx = fnew;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                delta *= 0.25;
            }
            iterations = it + 1;
        }
        let cert = self.minimax_certificate(&x, lower);
        let eps = cert.eps.min((fx - lower).max(0.0));
        let grad_norm = if grad_norm.is_finite() { grad_norm.min(cert.grad_norm) } else { cert.grad_norm };
        let ok = eps <= tol * (1.0 + fx);
        (PMeanResult { point: x, value: fx, grad_norm, eps_certificate: eps, iterations }, ok)
    }

    fn bbox_center(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let (lo, hi) = self
                    .cell
                    .iter()
                    .map(|&a| self.space.value(a)[i])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                lo + 0.5 * (hi - lo)
            })
            .collect()
    }
}

/// `max_{a,b} ||f_a - f_b|| / 2`, a lower bound on the minimax value.
fn pair_lower_bound(obj: &Objective<'_>) -> f64 {
    if obj.cell.len() > ATOM_SCAN_LIMIT {
        return 0.0;
    }
    let mut best = 0.0f64;
    for (i, &a) in obj.cell.iter().enumerate() {
        for &b in &obj.cell[..i] {
            best = best.max(obj.norm.dist(obj.space.value(a), obj.space.value(b)));
        }
    }
    0.5 * best
}

/// Minimum-Euclidean-norm point of the convex hull of `points` (Wolfe's
/// method), with its convex weights.
fn min_norm_point(points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let (set, w, x) = wolfe(points);
    let mut lam = vec![0.0; points.len()];
    for (&i, wi) in set.iter().zip(w) {
        lam[i] = wi;
    }
    (x, lam)
}

fn wolfe(points: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let d = points[0].len();
    let sq = |v: &[f64]| dot(v, v);
    let combine = |set: &[usize], w: &[f64]| {
        let mut x = vec![0.0; d];
        for (&i, &wi) in set.iter().zip(w) {
            for (xj, pj) in x.iter_mut().zip(&points[i]) {
                *xj += wi * pj;
            }
        }
        x
    };
    let max_sq = points.iter().map(|p| sq(p)).fold(0.0, f64::max);
    let j0 = (0..points.len()).min_by(|&a, &b| sq(&points[a]).total_cmp(&sq(&points[b]))).expect("nonempty");
    let mut set = vec![j0];
    let mut w = vec![1.0];
    let mut x = points[j0].clone();

    for _ in 0..(50 * points.len() + 50) {
        let xx = sq(&x);
        let j =
            (0..points.len()).min_by(|&a, &b| dot(&x, &points[a]).total_cmp(&dot(&x, &points[b]))).expect("nonempty");
        if xx - dot(&x, &points[j]) <= 1e-12 * max_sq || set.contains(&j) {
            break;
        }
        set.push(j);
        w.push(0.0);
        loop {
            let Some(alpha) = affine_min_norm(points, &set) else {
                set.pop();
                w.pop();
                return (set, w, x);
            };
            if alpha.iter().all(|&a| a > 1e-14) {
                w = alpha;
                x = combine(&set, &w);
                break;
            }
            let theta = set
                .iter()
                .enumerate()
                .filter(|&(i, _)| alpha[i] <= 1e-14)
                .map(|(i, _)| w[i] / (w[i] - alpha[i]))
                .fold(1.0f64, f64::min);
            for (wi, ai) in w.iter_mut().zip(&alpha) {
                *wi = (1.0 - theta) * *wi + theta * ai;
            }
            let keep: Vec<usize> = (0..set.len()).filter(|&i| w[i] > 1e-14).collect();
            set = keep.iter().map(|&i| set[i]).collect();
            w = keep.iter().map(|&i| w[i]).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|t| *t /= s);
            x = combine(&set, &w);
            if set.len() == 1 {
                break;
            }
        }
    }
    (set, w, x)
}

/// Solves `a x = b` for symmetric positive definite `a`; each pivot must keep
/// a fixed fraction of its diagonal entry.
fn cholesky_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let diag = a[j][j];
        let s = diag - (0..j).map(|k| a[j][k] * a[j][k]).sum::<f64>();
        if !(s > 1e-14 * diag.abs()) || !s.is_finite() {
            return None;
        }
        let l = s.sqrt();
        a[j][j] = l;
        for i in j + 1..n {
            let t = a[i][j] - (0..j).map(|k| a[i][k] * a[j][k]).sum::<f64>();
            a[i][j] = t / l;
        }
    }
    for i in 0..n {
        b[i] = (b[i] - (0..i).map(|k| a[i][k] * b[k]).sum::<f64>()) / a[i][i];
    }
    for i in (0..n).rev() {
        b[i] = (b[i] - (i + 1..n).map(|k| a[k][i] * b[k]).sum::<f64>()) / a[i][i];
    }
    Some(b)
}

/// Weights `alpha` (summing to one) minimizing `||sum alpha_i p_i||` over the affine hull.
fn affine_min_norm(points: &[Vec<f64>], set: &[usize]) -> Option<Vec<f64>> {
    let s = set.len();
    let mut a = vec![vec![0.0; s + 1]; s + 1];
    for i in 0..s {
        for j in 0..s {
            a[i][j] = dot(&points[set[i]], &points[set[j]]);
        }
        a[i][s] = 1.0;
        a[s][i] = 1.0;
    }
    let mut b = vec![0.0; s + 1];
    b[s] = 1.0;
    let sol = solve_linear(a, b)?;
    Some(sol[..s].to_vec())
}

fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(pairs: &[(f64, f64)]) -> MeasureSpace {
        MeasureSpace::from_pairs(pairs.iter().map(|&(w, x)| (w, vec![x])), false).unwrap()
    }

    fn plane(points: &[[f64; 2]]) -> MeasureSpace {
        MeasureSpace::from_pairs(points.iter().map(|p| (1.0, p.to_vec())), false).unwrap()
    }

    // golden-section search on a unimodal 1-D function
    fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - r * (hi - lo);
            let b = lo + r * (hi - lo);
            if f(a) < f(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn m_p_value_examples() {
        let n = Norm::euclidean(1);
        let s = line(&[(2.0, 1.0), (1.0, 3.0)]);
        assert_eq!(m_p_value(&s, &[0, 1], &n, 2.0, &[0.0]).unwrap(), 11.0);
        assert_eq!(m_p_value(&s, &[1], &n, 3.0, &[3.0]).unwrap(), 0.0);
        let s = line(&[(1.0, 0.0), (1.0, 2.0)]);
        assert_eq!(m_p_value(&s, &[0, 1], &n, f64::INFINITY, &[1.0]).unwrap(), 1.0);
        assert!(matches!(m_p_value(&s, &[], &n, 2.0, &[1.0]), Err(Error::EmptyCell)));
        assert!(matches!(m_p_value(&s, &[7], &n, 2.0, &[1.0]), Err(Error::AtomOutOfRange(7))));
    }

    #[test]
    fn solve_examples() {
        let n = Norm::euclidean(1);
        let s = line(&[(1.0, 0.0), (1.0, 2.0)]);
        let r = solve_pmean(&s, &[0, 1], &n, 2.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.point, vec![1.0]);
        assert_eq!(r.value, 2.0);

        let s = line(&[(1.0, 0.0), (1.0, 1.0), (1.0, 3.0)]);
        let r = solve_pmean(&s, &[0, 1, 2], &n, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.point, vec![1.0]);
        assert_eq!(r.value, 3.0);
        assert_eq!(r.eps_certificate, 0.0);

        let s = line(&[(1.0, 0.0), (1.0, 1.0)]);
        let oracle = golden(|x| x.abs().powi(3) + (x - 1.0).abs().powi(3), -1.0, 2.0);
        assert!((oracle - 0.5).abs() < 1e-8);
        let q = Norm::parse("q:3", 1).unwrap();
        let r = solve_pmean(&s, &[0, 1], &q, 3.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((r.point[0] - 0.5).abs() < 1e-8, "{:?}", r);
        assert!((r.value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn p1_in_plane_finds_geometric_median() {
        // three points of a triangle with all angles < 120 degrees plus a far
        // heavy point: the heavy point is the median
        let s = MeasureSpace::from_pairs(
            vec![(1.0, vec![0.0, 0.0]), (1.0, vec![1.0, 0.0]), (1.0, vec![0.0, 1.0]), (5.0, vec![3.0, 3.0])],
            false,
        )
        .unwrap();
        let n = Norm::euclidean(2);
        let r = solve_pmean(&s, &[0, 1, 2, 3], &n, 1.0, 1e-10, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.point, vec![3.0, 3.0]);
        assert_eq!(r.eps_certificate, 0.0);

        // equilateral triangle: Fermat point is the centroid
        let h = 3f64.sqrt() / 2.0;
        let s = plane(&[[0.0, 0.0], [1.0, 0.0], [0.5, h]]);
        let r = solve_pmean(&s, &[0, 1, 2], &n, 1.0, 1e-12, DEFAULT_MAX_ITER).unwrap();
        assert!((r.point[0] - 0.5).abs() < 1e-7 && (r.point[1] - h / 3.0).abs() < 1e-7, "{:?}", r);
    }

    #[test]
    fn gradient_condition_examples() {
        let n = Norm::euclidean(1);
        let s = line(&[(1.0, 0.0), (1.0, 2.0)]);
        // finite-difference oracle of M(a) = a^2 + (a - 2)^2 at 0
        let m = |a: f64| m_p_value(&s, &[0, 1], &n, 2.0, &[a]).unwrap();
        let fd = (m(1e-6) - m(-1e-6)) / 2e-6;
        assert!((fd + 4.0).abs() < 1e-6);
        let g = gradient_condition(&s, &[0, 1], &n, 2.0, &[0.0], &[1.0]).unwrap();
        assert!((g + 4.0).abs() < 1e-12);
        assert_eq!(gradient_condition(&s, &[0, 1], &n, 2.0, &[1.0], &[1.0]).unwrap(), 0.0);
        assert_eq!(gradient_condition(&s, &[1], &n, 3.0, &[2.0], &[-1.0]).unwrap(), 0.0);
        assert!(gradient_condition(&s, &[0, 1], &n, 1.0, &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn chebyshev_examples() {
        let n = Norm::euclidean(1);
        let s = line(&[(1.0, 0.0), (3.0, 2.0)]);
        let r = chebyshev_center(&s, &[0, 1], &n, DEFAULT_TOL).unwrap();
        assert_eq!(r.point, vec![1.0]);
        assert_eq!(r.value, 1.0);
        let r = chebyshev_center(&s, &[1], &n, DEFAULT_TOL).unwrap();
        assert_eq!((r.point.clone(), r.value), (vec![2.0], 0.0));

        let s = plane(&[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]);
        let n2 = Norm::euclidean(2);
        // oracle: minimax over a fine grid
        let mut best = f64::INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let x = [i as f64 / 200.0, j as f64 / 200.0];
                best = best.min(m_p_value(&s, &[0, 1, 2], &n2, f64::INFINITY, &x).unwrap());
            }
        }
        assert!((best - 2f64.sqrt()).abs() < 1e-9);
        let r = chebyshev_center(&s, &[0, 1, 2], &n2, DEFAULT_TOL).unwrap();
        assert!((r.point[0] - 1.0).abs() < 1e-6 && (r.point[1] - 1.0).abs() < 1e-6, "{:?}", r);
        assert!((r.value - 2f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn chebyshev_equilateral_and_q_norm() {
        let h = 3f64.sqrt() / 2.0;
        let s = plane(&[[0.0, 0.0], [1.0, 0.0], [0.5, h], [0.4, 0.3]]);
        let n = Norm::euclidean(2);
        let r = chebyshev_center(&s, &[0, 1, 2, 3], &n, 1e-10).unwrap();
        assert!((r.value - 1.0 / 3f64.sqrt()).abs() < 1e-9, "{:?}", r);

        let q = Norm::parse("q:3", 2).unwrap();
        let r = chebyshev_center(&s, &[0, 1, 2, 3], &q, 1e-10).unwrap();
        let (lb, _) = certificate(&s, &[0, 1, 2, 3], &q, f64::INFINITY, &r.point).unwrap();
        assert!(lb.is_finite());
        assert!(r.eps_certificate <= 1e-10 * (1.0 + r.value));
    }

    #[test]
    fn min_norm_point_examples() {
        let (g, lam) = min_norm_point(&[vec![1.0, 0.0], vec![-1.0, 0.0]]);
        assert!(dot(&g, &g) < 1e-28);
        assert!((lam[0] - 0.5).abs() < 1e-14 && (lam[1] - 0.5).abs() < 1e-14);
        let (g, _) = min_norm_point(&[vec![1.0, 1.0], vec![1.0, -1.0]]);
        assert!((g[0] - 1.0).abs() < 1e-14 && g[1].abs() < 1e-14);
        let (g, lam) = min_norm_point(&[vec![2.0, 1.0], vec![3.0, 5.0]]);
        assert_eq!(g, vec![2.0, 1.0]);
        assert_eq!(lam, vec![1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        let n = Norm::euclidean(1);
        let s = line(&[(1.0, 0.0), (1.0, 2.0)]);
        assert!(matches!(solve_pmean(&s, &[], &n, 2.0, 1e-9, 10), Err(Error::EmptyCell)));
        assert!(solve_pmean(&s, &[0], &n, f64::INFINITY, 1e-9, 10).is_err());
        assert!(solve_pmean(&s, &[0], &n, 0.5, 1e-9, 10).is_err());
    }

    #[test]
    fn nonconvergence_reports_best_iterate() {
        let s = plane(&[[0.0, 0.0], [1.0, 0.3], [0.2, 1.0], [2.0, 2.0]]);
        let q = Norm::parse("q:1.5", 2).unwrap();
        match solve_pmean(&s, &[0, 1, 2, 3], &q, 1.2, 1e-12, 1) {
            Err(Error::NonConvergence(r)) => {
                assert!(r.value.is_finite() && r.eps_certificate > 0.0);
            }
            other => panic!("expected nonconvergence, got {other:?}"),
        }
    }
}
