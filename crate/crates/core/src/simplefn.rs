//! Simple functions `h = sum_i x_i 1_{A_i}` on a discrete space.
//!
//! Cells are represented by an atom-to-center assignment. On an
//! infinite-mass space the background (where `f = 0`) belongs to the cell of
//! `background`, whose center must be the zero vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::Norm;
use crate::space::{check_exponent, check_norm, MeasureSpace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimpleFunction {
    pub centers: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    #[serde(default)]
    pub background: Option<usize>,
}

impl SimpleFunction {
    pub fn new(centers: Vec<Vec<f64>>, assignment: Vec<usize>, background: Option<usize>) -> Self {
        SimpleFunction { centers, assignment, background }
    }

    /// The constant function `x` (background included when the space has infinite mass).
    pub fn constant(space: &MeasureSpace, x: Vec<f64>) -> Self {
        let background = space.infinite_mass().then_some(0);
        SimpleFunction::new(vec![x], vec![0; space.len()], background)
    }

    pub fn zero(space: &MeasureSpace) -> Self {
        SimpleFunction::constant(space, vec![0.0; space.dim()])
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// Checks that every atom is assigned and the background rule holds.
    pub fn validate(&self, space: &MeasureSpace) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::NoCenters);
        }
        for c in &self.centers {
            if c.len() != space.dim() {
                return Err(Error::DimensionMismatch { expected: space.dim(), found: c.len() });
            }
        }
        if self.assignment.len() != space.len() {
            return Err(Error::UnassignedAtom(self.assignment.len().min(space.len())));
        }
        if let Some(i) = self.assignment.iter().position(|&c| c >= self.centers.len()) {
            return Err(Error::UnassignedAtom(i));
        }
        if let Some(b) = self.background {
            if b >= self.centers.len() {
                return Err(Error::BackgroundNotZero);
            }
        }
        if space.infinite_mass() {
            match self.background {
                Some(b) if self.centers[b].iter().all(|&x| x == 0.0) => {}
                _ => return Err(Error::BackgroundNotZero),
            }
        }
        Ok(())
    }

    /// Atom indices of each cell.
    pub fn cells(&self) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.centers.len()];
        for (a, &c) in self.assignment.iter().enumerate() {
            cells[c].push(a);
        }
        cells
    }

    /// `sum_a w_a ||f_a - x_{c(a)}||^p` for finite `p`.
    pub(crate) fn cost_pth_unchecked(&self, space: &MeasureSpace, norm: &Norm, p: f64) -> f64 {
        self.assignment
            .iter()
            .enumerate()
            .map(|(a, &c)| space.weight(a) * norm.dist(space.value(a), &self.centers[c]).powf(p))
            .sum()
    }

    pub(crate) fn cost_unchecked(&self, space: &MeasureSpace, norm: &Norm, p: f64) -> f64 {
        if p.is_infinite() {
            self.assignment
                .iter()
                .enumerate()
                .map(|(a, &c)| norm.dist(space.value(a), &self.centers[c]))
                .fold(0.0, f64::max)
        } else {
            self.cost_pth_unchecked(space, norm, p).powf(1.0 / p)
        }
    }

    /// `||f - h||_p`.
    pub fn cost(&self, space: &MeasureSpace, norm: &Norm, p: f64) -> Result<f64> {
        check_exponent(p)?;
        check_norm(space, norm)?;
        self.validate(space)?;
        Ok(self.cost_unchecked(space, norm, p))
    }

    /// Reduced form: equal centers merged into the lowest index, empty cells
    /// dropped. The background cell is kept on infinite-mass spaces.
    pub fn reduce(&self, space: &MeasureSpace) -> SimpleFunction {
        let k = self.centers.len();
        let canonical: Vec<usize> =
            (0..k).map(|i| (0..i).find(|&j| self.centers[j] == self.centers[i]).unwrap_or(i)).collect();
        let mut used = vec![false; k];
        for &c in &self.assignment {
            used[canonical[c]] = true;
        }
        let background = self.background.map(|b| canonical[b]);
        if space.infinite_mass() {
            if let Some(b) = background {
                used[b] = true;
            }
        }
        let mut new_index = vec![usize::MAX; k];
        let mut centers = Vec::new();
        for i in (0..k).filter(|&i| used[i]) {
            new_index[i] = centers.len();
            centers.push(self.centers[i].clone());
        }
        let assignment = self.assignment.iter().map(|&c| new_index[canonical[c]]).collect();
        let background = background.filter(|&b| used[b]).map(|b| new_index[b]);
        SimpleFunction { centers, assignment, background }
    }

    pub fn is_reduced(&self, space: &MeasureSpace) -> bool {
        self.reduce(space) == *self
    }

    /// Number of values of the reduced form.
    pub fn degree(&self, space: &MeasureSpace) -> usize {
        self.reduce(space).centers.len()
    }

    /// Replaces every center with `||x_i|| > threshold` by zero and merges
    /// the affected cells into the zero cell.
    pub fn bounded_reduction(
        &self,
        space: &MeasureSpace,
        norm: &Norm,
        p: f64,
        threshold: f64,
    ) -> Result<SimpleFunction> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidExponent(p));
        }
        if !(threshold > 0.0) {
            return Err(Error::InvalidThreshold(threshold));
        }
        check_norm(space, norm)?;
        self.validate(space)?;
        let far: Vec<usize> = (0..self.k()).filter(|&i| norm.length(&self.centers[i]) > threshold).collect();
        if far.is_empty() {
            return Ok(self.clone());
        }
        let mut g = self.clone();
        for i in far {
            g.centers[i].iter_mut().for_each(|x| *x = 0.0);
        }
        Ok(g.reduce(space))
    }
}
