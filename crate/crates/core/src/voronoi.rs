//! Voronoi cells of a finite center set under a [`Norm`].
//!
//! Cells are never built geometrically; only point queries and atom
//! memberships exist. Ties are resolved to the lowest index, which realizes
//! the disjoint refinement `D_1 = V_1`, `D_j = V_j \ (D_1 u ... u D_{j-1})`.
//!
//! Distances closer than `tie_tol * scale` are treated as equal, where
//! `scale` is the largest pairwise distance between centers.

use crate::error::{Error, Result};
use crate::norms::Norm;
use crate::simplefn::SimpleFunction;
use crate::space::{check_exponent, check_norm, MeasureSpace};

pub const DEFAULT_TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct VoronoiDiagram {
    centers: Vec<Vec<f64>>,
    tie_tol: f64,
}

impl VoronoiDiagram {
    pub fn new(centers: Vec<Vec<f64>>, tie_tol: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::NoCenters);
        }
        if !(tie_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("tie tolerance must be >= 0, got {tie_tol}")));
        }
        let d = centers[0].len();
        for (i, c) in centers.iter().enumerate() {
            if c.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: c.len() });
            }
            if let Some(j) = (0..i).find(|&j| centers[j] == *c) {
                return Err(Error::DuplicateCenters(j, i));
            }
        }
        Ok(VoronoiDiagram { centers, tie_tol })
    }

    // duplicate centers allowed; the lower index wins every tie
    pub(crate) fn unchecked(centers: Vec<Vec<f64>>, tie_tol: f64) -> Self {
        VoronoiDiagram { centers, tie_tol }
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn tie_tol(&self) -> f64 {
        self.tie_tol
    }

    /// Largest pairwise center distance; 1 for a single center.
    pub fn scale(&self, norm: &Norm) -> f64 {
        let mut s = 0.0f64;
        for i in 0..self.centers.len() {
            for j in 0..i {
                s = s.max(norm.dist(&self.centers[i], &self.centers[j]));
            }
        }
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    /// Absolute tie threshold `tie_tol * scale`.
    pub fn threshold(&self, norm: &Norm) -> f64 {
        self.tie_tol * self.scale(norm)
    }

    pub fn distances(&self, point: &[f64], norm: &Norm) -> Vec<f64> {
        self.centers.iter().map(|c| norm.dist(point, c)).collect()
    }

    fn assign_within(&self, point: &[f64], norm: &Norm, threshold: f64) -> usize {
        let d = self.distances(point, norm);
        let min = d.iter().copied().fold(f64::INFINITY, f64::min);
        d.iter().position(|&x| x <= min + threshold).unwrap_or(0)
    }

    /// Lowest index among the (near-)closest centers.
    pub fn assign(&self, point: &[f64], norm: &Norm) -> usize {
        self.assign_within(point, norm, self.threshold(norm))
    }

    /// Total weight of atoms whose two smallest center distances differ by at
    /// most `tol * scale`.
    pub fn boundary_mass(&self, space: &MeasureSpace, norm: &Norm, tol: f64) -> f64 {
        if self.centers.len() < 2 {
            return 0.0;
        }
        let threshold = tol * self.scale(norm);
        space
            .atoms()
            .iter()
            .filter(|a| {
                let (first, second) = two_smallest(&self.distances(&a.f, norm));
                second - first <= threshold
            })
            .fold(0.0, |m, a| m + a.w)
    }
}

fn two_smallest(d: &[f64]) -> (f64, f64) {
    let mut first = f64::INFINITY;
    let mut second = f64::INFINITY;
    for &x in d {
        if x < first {
            second = first;
            first = x;
        } else if x < second {
            second = x;
        }
    }
    (first, second)
}

/// Reassigns every atom to its Voronoi cell, keeping the centers of `h`.
/// Never increases `||f - h||_p`.
pub fn project(space: &MeasureSpace, norm: &Norm, p: f64, h: &SimpleFunction, tie_tol: f64) -> Result<SimpleFunction> {
    check_exponent(p)?;
    check_norm(space, norm)?;
    h.validate(space)?;
    let diagram = VoronoiDiagram::new(h.centers.clone(), tie_tol)?;
    Ok(project_with(space, norm, h, &diagram))
}

pub(crate) fn project_with(
    space: &MeasureSpace,
    norm: &Norm,
    h: &SimpleFunction,
    diagram: &VoronoiDiagram,
) -> SimpleFunction {
    let threshold = diagram.threshold(norm);
    let assignment = space.atoms().iter().map(|a| diagram.assign_within(&a.f, norm, threshold)).collect();
    SimpleFunction::new(h.centers.clone(), assignment, h.background)
}

/// Moves the atoms of `zone` (all on the boundary of the first cell) into
/// the first cell and refines the rest with
/// `D_1(Z) = Z u int(V_1)`, `D_i(Z) = V_i \ (D_1(Z) u ... u D_{i-1}(Z))`.
///
/// Every zone atom must be tied between the first cell and its current cell.
pub fn boundary_reassign(
    space: &MeasureSpace,
    norm: &Norm,
    p: f64,
    h: &SimpleFunction,
    zone: &[usize],
    tie_tol: f64,
) -> Result<SimpleFunction> {
    check_exponent(p)?;
    check_norm(space, norm)?;
    h.validate(space)?;
    let diagram = VoronoiDiagram::new(h.centers.clone(), tie_tol)?;
    let threshold = diagram.threshold(norm);
    let mut in_zone = vec![false; space.len()];
    for &a in zone {
        if a >= space.len() {
            return Err(Error::AtomOutOfRange(a));
        }
        in_zone[a] = true;
    }
    let mut assignment = Vec::with_capacity(space.len());
    for (a, atom) in space.atoms().iter().enumerate() {
        let d = diagram.distances(&atom.f, norm);
        let min = d.iter().copied().fold(f64::INFINITY, f64::min);
        let in_cell: Vec<bool> = d.iter().map(|&x| x <= min + threshold).collect();
        let on_first_boundary = in_cell[0] && in_cell[1..].iter().any(|&b| b);
        if in_zone[a] {
            let current = h.assignment[a];
            if !on_first_boundary || !in_cell[current] {
                return Err(Error::NotTied(a));
            }
            assignment.push(0);
        } else if in_cell[0] && !on_first_boundary {
            assignment.push(0);
        } else {
            let i = (1..d.len()).find(|&i| in_cell[i]).unwrap_or(0);
            assignment.push(i);
        }
    }
    Ok(SimpleFunction::new(h.centers.clone(), assignment, h.background))
}
