//! Norms on `R^d`.
//!
//! Every geometric quantity in the crate (distances, Voronoi ties, p-th power
//! gradients, dual norms used by the optimality certificates) goes through
//! [`Norm`]. Three kinds are supported, all strictly convex and Gateaux
//! differentiable away from the origin:
//!
//! * `euclidean`
//! * `q:<q>`, the `l_q` norm for `1 < q < inf`
//! * `weighted:<w_1>,...,<w_d>`, `sqrt(sum_i w_i z_i^2)` with positive weights
//!
//! Non-smooth norms (`l_1`, `l_inf`) are rejected when parsed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NormKind {
    Euclidean,
    Q(f64),
    WeightedEuclidean(Vec<f64>),
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::Euclidean => write!(f, "euclidean"),
            NormKind::Q(q) => write!(f, "q:{q}"),
            NormKind::WeightedEuclidean(w) => {
                let parts: Vec<String> = w.iter().map(|x| x.to_string()).collect();
                write!(f, "weighted:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "euclidean" | "l2" => return Ok(NormKind::Euclidean),
            "linf" | "max" | "chebyshev" | "l1" | "manhattan" | "taxicab" => {
                return Err(Error::InvalidNorm(format!("`{s}` is not Gateaux differentiable off the origin")))
            }
            _ => {}
        }
        if let Some(rest) = lower.strip_prefix("q:") {
            let q: f64 = rest.trim().parse().map_err(|_| Error::InvalidNorm(format!("bad exponent in `{s}`")))?;
            if !(q > 1.0 && q.is_finite()) {
                return Err(Error::InvalidNorm(format!("q-norm exponent must satisfy 1 < q < inf, got {q}")));
            }
            return Ok(NormKind::Q(q));
        }
        if let Some(rest) = lower.strip_prefix("weighted:") {
            let weights = rest
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::InvalidNorm(format!("bad weight list in `{s}`")))?;
            if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                return Err(Error::InvalidNorm("weights must be positive and finite".to_string()));
            }
            return Ok(NormKind::WeightedEuclidean(weights));
        }
        Err(Error::InvalidNorm(format!("unknown norm spec `{s}`")))
    }
}

impl TryFrom<String> for NormKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<NormKind> for String {
    fn from(k: NormKind) -> String {
        k.to_string()
    }
}

/// A norm on `R^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Norm {
    kind: NormKind,
    dim: usize,
}

impl Norm {
    pub fn new(kind: NormKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidNorm("dimension must be positive".to_string()));
        }
        match &kind {
            NormKind::Euclidean => {}
            NormKind::Q(q) => {
                if !(*q > 1.0 && q.is_finite()) {
                    return Err(Error::InvalidNorm(format!("q-norm exponent must satisfy 1 < q < inf, got {q}")));
                }
            }
            NormKind::WeightedEuclidean(w) => {
                if w.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: w.len() });
                }
                if w.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    return Err(Error::InvalidNorm("weights must be positive and finite".to_string()));
                }
            }
        }
        Ok(Norm { kind, dim })
    }

    pub fn euclidean(dim: usize) -> Self {
        Norm { kind: NormKind::Euclidean, dim: dim.max(1) }
    }

    /// Parses `euclidean`, `q:<float>` or `weighted:<floats>`.
    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        Norm::new(spec.parse()?, dim)
    }

    pub fn kind(&self) -> &NormKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, NormKind::Euclidean)
    }

    pub fn strictly_convex(&self) -> bool {
        true
    }

    pub fn gateaux_smooth(&self) -> bool {
        true
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: z.len() });
        }
        Ok(())
    }

    /// `||z||`, with the dimension checked.
    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        self.check(z)?;
        Ok(self.length(z))
    }

    /// `||z||` without the dimension check. Callers guarantee `z.len() == dim`.
    pub fn length(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.dim);
        match &self.kind {
            NormKind::Euclidean => scaled_q_norm(z.iter().copied(), 2.0),
            NormKind::Q(q) => scaled_q_norm(z.iter().copied(), *q),
            NormKind::WeightedEuclidean(w) => scaled_q_norm(z.iter().zip(w).map(|(x, w)| x * w.sqrt()), 2.0),
        }
    }

    /// `||a - b||`.
    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match &self.kind {
            NormKind::Euclidean => scaled_q_norm(a.iter().zip(b).map(|(x, y)| x - y), 2.0),
            NormKind::Q(q) => scaled_q_norm(a.iter().zip(b).map(|(x, y)| x - y), *q),
            NormKind::WeightedEuclidean(w) => {
                scaled_q_norm(a.iter().zip(b).zip(w).map(|((x, y), w)| (x - y) * w.sqrt()), 2.0)
            }
        }
    }

    /// Gradient of `||.||` at `z`, or `None` at the origin.
    pub fn unit_gradient(&self, z: &[f64]) -> Option<Vec<f64>> {
        let n = self.length(z);
        if n == 0.0 {
            return None;
        }
        let g = match &self.kind {
            NormKind::Euclidean => z.iter().map(|x| x / n).collect(),
            NormKind::Q(q) => z
                .iter()
                .map(|x| x.signum() * (x.abs() / n).powf(q - 1.0))
                .map(|x| if x.is_nan() { 0.0 } else { x })
                .collect(),
            NormKind::WeightedEuclidean(w) => z.iter().zip(w).map(|(x, w)| w * x / n).collect(),
        };
        Some(g)
    }

    /// Gateaux derivative of the norm at `z != 0` in direction `v`.
    pub fn dir_deriv(&self, z: &[f64], v: &[f64]) -> Result<f64> {
        self.check(z)?;
        self.check(v)?;
        let g = self.unit_gradient(z).ok_or(Error::ZeroVector)?;
        Ok(dot(&g, v))
    }

    /// Directional derivative of `||z||^p` in direction `v`; zero at `z = 0`.
    pub fn grad_pth_power(&self, z: &[f64], v: &[f64], p: f64) -> Result<f64> {
        if !(p > 1.0) || p.is_nan() {
            return Err(Error::InvalidExponent(p));
        }
        self.check(z)?;
        self.check(v)?;
        match self.unit_gradient(z) {
            None => Ok(0.0),
            Some(g) => {
                let n = self.length(z);
                Ok(p * n.powf(p - 1.0) * dot(&g, v))
            }
        }
    }

    /// Full gradient of `||z||^p`; the zero vector at the origin.
    pub(crate) fn pth_power_gradient(&self, z: &[f64], p: f64) -> Vec<f64> {
        match self.unit_gradient(z) {
            None => vec![0.0; z.len()],
            Some(mut g) => {
                let s = p * self.length(z).powf(p - 1.0);
                g.iter_mut().for_each(|x| *x *= s);
                g
            }
        }
    }

    /// Hessian of `||z||^p`, or `None` at `z = 0`. For `q < 2` the curvature
    /// across a coordinate hyperplane is unbounded; it is capped there.
    pub(crate) fn pth_power_hessian(&self, z: &[f64], p: f64) -> Option<Vec<Vec<f64>>> {
        self.power_curvature(z, p, false)
    }

    /// Upper model of the Hessian: every `|t|^s` piece with `s < 2` gets the
    /// curvature `s |t|^{s-2}` of its Weiszfeld majorizer instead of
    /// `s (s-1) |t|^{s-2}`.
    pub(crate) fn pth_power_majorizer(&self, z: &[f64], p: f64) -> Option<Vec<Vec<f64>>> {
        self.power_curvature(z, p, true)
    }

    fn power_curvature(&self, z: &[f64], p: f64, majorize: bool) -> Option<Vec<Vec<f64>>> {
        let bend = |s: f64| if majorize { (s - 1.0).max(1.0) } else { s - 1.0 };
        let n = self.length(z);
        if !(n > 0.0 && n.is_finite()) {
            return None;
        }
        let d = z.len();
        let g = self.unit_gradient(z)?;
        // Hessian of the norm itself, degree -1 homogeneous
        let mut h = vec![vec![0.0; d]; d];
        match &self.kind {
            NormKind::Euclidean => {
                for i in 0..d {
                    h[i][i] = 1.0 / n;
                }
            }
            NormKind::WeightedEuclidean(w) => {
                for i in 0..d {
                    h[i][i] = w[i] / n;
                }
            }
            NormKind::Q(q) => {
                for i in 0..d {
                    let u = (z[i].abs() / n).max(1e-12);
                    h[i][i] = bend(*q) * u.powf(q - 2.0) / n;
                }
            }
        }
        let c = match &self.kind {
            NormKind::Q(q) => q - 1.0,
            _ => 1.0,
        };
        let outer = p * bend(p) * n.powf(p - 2.0);
        let scale = p * n.powf(p - 1.0);
        for i in 0..d {
            for j in 0..d {
                h[i][j] = scale * (h[i][j] - c * g[i] * g[j] / n) + outer * g[i] * g[j];
            }
        }
        Some(h)
    }

    /// Dual norm `sup { <g, v> : ||v|| <= 1 }`.
    pub fn dual(&self, g: &[f64]) -> f64 {
        match &self.kind {
            NormKind::Euclidean => scaled_q_norm(g.iter().copied(), 2.0),
            NormKind::Q(q) => scaled_q_norm(g.iter().copied(), q / (q - 1.0)),
            NormKind::WeightedEuclidean(w) => scaled_q_norm(g.iter().zip(w).map(|(x, w)| x / w.sqrt()), 2.0),
        }
    }

    /// A unit vector `v` with `<g, v> = dual(g)`, or `None` for `g = 0`.
    pub fn dual_direction(&self, g: &[f64]) -> Option<Vec<f64>> {
        let n = self.dual(g);
        if n == 0.0 {
            return None;
        }
        let v = match &self.kind {
            NormKind::Euclidean => g.iter().map(|x| x / n).collect(),
            NormKind::Q(q) => {
                let qs = q / (q - 1.0);
                g.iter().map(|x| x.signum() * (x.abs() / n).powf(qs - 1.0)).collect()
            }
            NormKind::WeightedEuclidean(w) => g.iter().zip(w).map(|(x, w)| x / w / n).collect(),
        };
        Some(v)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// (sum |x_i|^q)^(1/q), scaled by the largest entry to avoid overflow.
fn scaled_q_norm<I>(xs: I, q: f64) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    let m = xs.clone().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    if q == 2.0 {
        let s: f64 = xs.map(|x| (x / m) * (x / m)).sum();
        m * s.sqrt()
    } else {
        let s: f64 = xs.map(|x| (x.abs() / m).powf(q)).sum();
        m * s.powf(1.0 / q)
    }
}
