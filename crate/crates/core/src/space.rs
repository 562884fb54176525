//! Discrete weighted measure spaces carrying a vector-valued function.
//!
//! A [`MeasureSpace`] is a list of atoms `(w_a, f_a)` with `w_a > 0` and
//! `f_a in R^d`. When `infinite_mass` is set, the space additionally carries
//! a background of infinite measure on which `f = 0`; the background never
//! enters any sum numerically; quantizers instead pin one center to zero.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::Norm;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub w: f64,
    pub f: Vec<f64>,
}

impl Atom {
    pub fn new(w: f64, f: Vec<f64>) -> Self {
        Atom { w, f }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureSpace {
    dim: usize,
    infinite_mass: bool,
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct RawSpace {
    dim: usize,
    #[serde(default)]
    infinite_mass: bool,
    atoms: Vec<Atom>,
}

impl<'de> Deserialize<'de> for MeasureSpace {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let raw = RawSpace::deserialize(deserializer)?;
        MeasureSpace::load(raw.atoms, raw.dim, raw.infinite_mass).map_err(serde::de::Error::custom)
    }
}

impl MeasureSpace {
    /// Validates and builds a space.
    pub fn load(atoms: Vec<Atom>, dim: usize, infinite_mass: bool) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::NoAtoms);
        }
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".to_string()));
        }
        for (index, a) in atoms.iter().enumerate() {
            if !(a.w > 0.0 && a.w.is_finite()) {
                return Err(Error::InvalidWeight { index, weight: a.w });
            }
            if a.f.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: a.f.len() });
            }
            if a.f.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteValue { index });
            }
        }
        Ok(MeasureSpace { dim, infinite_mass, atoms })
    }

    /// Builds a space from `(weight, value)` pairs; the dimension is taken from the first value.
    pub fn from_pairs<I>(pairs: I, infinite_mass: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, Vec<f64>)>,
    {
        let atoms: Vec<Atom> = pairs.into_iter().map(|(w, f)| Atom::new(w, f)).collect();
        let dim = atoms.first().map(|a| a.f.len()).ok_or(Error::NoAtoms)?;
        MeasureSpace::load(atoms, dim, infinite_mass)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn infinite_mass(&self) -> bool {
        self.infinite_mass
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.atoms[i].w
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.atoms[i].f
    }

    /// Total mass of the atoms (the background, if any, is not counted).
    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    pub fn with_infinite_mass(mut self, infinite_mass: bool) -> Self {
        self.infinite_mass = infinite_mass;
        self
    }

    /// `||f||_p`; the zero background contributes nothing.
    pub fn lp_norm(&self, norm: &Norm, p: f64) -> Result<f64> {
        check_exponent(p)?;
        check_norm(self, norm)?;
        if p.is_infinite() {
            return Ok(self.atoms.iter().map(|a| norm.length(&a.f)).fold(0.0, f64::max));
        }
        let s: f64 = self.atoms.iter().map(|a| a.w * norm.length(&a.f).powf(p)).sum();
        Ok(s.powf(1.0 / p))
    }

    /// Indices of atoms with `||f_a|| >= eps`.
    pub fn tail_indices(&self, norm: &Norm, eps: f64) -> Result<Vec<usize>> {
        if !(eps > 0.0) {
            return Err(Error::InvalidEps(eps));
        }
        check_norm(self, norm)?;
        Ok((0..self.atoms.len()).filter(|&i| norm.length(&self.atoms[i].f) >= eps).collect())
    }

    /// The sub-space `{ ||f|| >= eps }`, always of finite mass, or `None`
    /// when no atom reaches the threshold.
    pub fn tail_truncate(&self, norm: &Norm, eps: f64) -> Result<Option<MeasureSpace>> {
        let keep = self.tail_indices(norm, eps)?;
        if keep.is_empty() {
            return Ok(None);
        }
        let atoms = keep.into_iter().map(|i| self.atoms[i].clone()).collect();
        Ok(Some(MeasureSpace { dim: self.dim, infinite_mass: false, atoms }))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Reads CSV rows `weight, x_1, ..., x_d`. Lines starting with `#` are skipped.
    pub fn from_csv_reader<R: std::io::Read>(reader: R, infinite_mass: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut atoms = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let nums = record
                .iter()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", row + 1)))?;
            if nums.len() < 2 {
                return Err(Error::Parse(format!("row {}: need a weight and at least one coordinate", row + 1)));
            }
            atoms.push(Atom::new(nums[0], nums[1..].to_vec()));
        }
        let dim = atoms.first().map(|a| a.f.len()).ok_or(Error::NoAtoms)?;
        MeasureSpace::load(atoms, dim, infinite_mass)
    }

    /// Loads a `.csv` or JSON file, chosen by extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        let is_csv = path.extension().map(|e| e.eq_ignore_ascii_case("csv")).unwrap_or(false);
        if is_csv {
            MeasureSpace::from_csv_reader(std::fs::File::open(path)?, false)
        } else {
            MeasureSpace::from_json_str(&std::fs::read_to_string(path)?)
        }
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

pub(crate) fn check_norm(space: &MeasureSpace, norm: &Norm) -> Result<()> {
    if space.dim() != norm.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: norm.dim() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(pairs: &[(f64, f64)]) -> MeasureSpace {
        MeasureSpace::from_pairs(pairs.iter().map(|&(w, x)| (w, vec![x])), false).unwrap()
    }

    #[test]
    fn load_examples() {
        let s = line(&[(1.0, 0.0), (1.0, 2.0)]);
        assert_eq!(s.mass(), 2.0);
        assert!(matches!(
            MeasureSpace::from_pairs(vec![(0.0, vec![1.0])], false),
            Err(Error::InvalidWeight { index: 0, .. })
        ));
        assert!(matches!(MeasureSpace::load(vec![], 1, false), Err(Error::NoAtoms)));
        assert!(matches!(
            MeasureSpace::from_pairs(vec![(1.0, vec![1.0]), (1.0, vec![1.0, 2.0])], false),
            Err(Error::DimensionMismatch { .. })
        ));
        let inf = MeasureSpace::from_pairs(vec![(1.0, vec![3.0])], true).unwrap();
        assert!(inf.infinite_mass());
    }

    #[test]
    fn lp_norm_examples() {
        let n = Norm::euclidean(1);
        let s = line(&[(2.0, 1.0), (1.0, 3.0)]);
        assert!((s.lp_norm(&n, 2.0).unwrap() - 11f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.lp_norm(&n, f64::INFINITY).unwrap(), 3.0);
        assert_eq!(line(&[(1.0, 0.0), (4.0, 0.0)]).lp_norm(&n, 3.0).unwrap(), 0.0);
        assert!(s.lp_norm(&n, 0.5).is_err());
    }

    #[test]
    fn tail_truncate_examples() {
        let n = Norm::euclidean(1);
        let s = line(&[(1.0, 0.05), (1.0, 1.0)]);
        let t = s.tail_truncate(&n, 0.1).unwrap().unwrap();
        assert_eq!(t.atoms(), &s.atoms()[1..]);
        assert_eq!(s.tail_truncate(&n, 0.01).unwrap().unwrap().atoms(), s.atoms());
        assert!(s.tail_truncate(&n, 0.0).is_err());
        assert!(s.tail_truncate(&n, 5.0).unwrap().is_none());

        let s = line(&[(1.0, 1.0), (1.0, 2.0)]);
        let g = s.tail_truncate(&n, 1.0).unwrap().unwrap();
        assert_eq!(g.mass(), 2.0);
        assert!(g.mass() <= s.lp_norm(&n, 2.0).unwrap().powi(2));
    }

    #[test]
    fn tail_truncate_clears_infinite_mass() {
        let n = Norm::euclidean(1);
        let s = line(&[(1.0, 0.05), (1.0, 1.0)]).with_infinite_mass(true);
        assert!(!s.tail_truncate(&n, 0.5).unwrap().unwrap().infinite_mass());
    }

    #[test]
    fn json_and_csv_ingestion() {
        let js = r#"{"dim": 2, "infinite_mass": true, "atoms": [{"w": 1.5, "f": [0.1, -2]}, {"w": 1, "f": [3, 4]}]}"#;
        let s = MeasureSpace::from_json_str(js).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.infinite_mass());
        assert_eq!(s.value(0), &[0.1, -2.0]);

        let csv = "# weight, x, y\n1.5, 0.1, -2\n1, 3, 4\n";
        let c = MeasureSpace::from_csv_reader(csv.as_bytes(), true).unwrap();
        assert_eq!(c, s);

        assert!(MeasureSpace::from_json_str(r#"{"dim": 1, "atoms": [{"w": -1, "f": [0]}]}"#).is_err());
        assert!(MeasureSpace::from_csv_reader("1, x\n".as_bytes(), false).is_err());
    }

    fn space_strategy() -> impl Strategy<Value = MeasureSpace> {
        (1usize..4).prop_flat_map(|d| {
            prop::collection::vec((1e-3f64..10.0, prop::collection::vec(-1e3f64..1e3, d)), 1..20)
                .prop_map(|pairs| MeasureSpace::from_pairs(pairs, false).unwrap())
        })
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bit_exact(s in space_strategy()) {
            let back = MeasureSpace::from_json_str(&s.to_json_string().unwrap()).unwrap();
            for (a, b) in s.atoms().iter().zip(back.atoms()) {
                prop_assert_eq!(a.w.to_bits(), b.w.to_bits());
                for (x, y) in a.f.iter().zip(&b.f) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }

        #[test]
        fn markov_bound(s in space_strategy(), eps in 1e-3f64..1e3, p in 1.0f64..4.0) {
            let n = Norm::euclidean(s.dim());
            let mass = s.tail_truncate(&n, eps).unwrap().map_or(0.0, |t| t.mass());
            let lp = s.lp_norm(&n, p).unwrap().powf(p);
            prop_assert!(eps.powf(p) * mass <= lp * (1.0 + 1e-12));
        }

        #[test]
        fn tail_truncate_idempotent_and_monotone(s in space_strategy(), e1 in 1e-2f64..500.0, e2 in 1e-2f64..500.0) {
            let n = Norm::euclidean(s.dim());
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            if let Some(t) = s.tail_truncate(&n, lo).unwrap() {
                prop_assert_eq!(&t.tail_truncate(&n, lo).unwrap().unwrap(), &t);
                let big = s.tail_indices(&n, hi).unwrap();
                let small = s.tail_indices(&n, lo).unwrap();
                prop_assert!(big.iter().all(|i| small.contains(i)));
            } else {
                prop_assert!(s.tail_truncate(&n, hi).unwrap().is_none());
            }
        }
    }
}
