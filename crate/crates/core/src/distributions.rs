//! Exact representation, validation and marginalization of finite joint
//! distributions of `(T, X, Y)`.
//!
//! Distributions are dense `f64` tensors indexed `(t, x, y)`. Validation
//! checks nonnegativity and normalization but never renormalizes: a tensor
//! that does not sum to one is rejected, not repaired.

use ndarray::{Array2, Array3, Axis};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

/// Normalization slack accepted on input tensors.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Inverse of `ln 2`, used to express natural-log entropies in bits.
const LOG2_E: f64 = std::f64::consts::LOG2_E;

#[derive(Debug, Error, PartialEq)]
pub enum DistError {
    #[error("negative entry {value:e} at atom (t={},x={},y={})", index.0, index.1, index.2)]
    NegativeEntry { index: (usize, usize, usize), value: f64 },
    #[error("tensor sums to {0}, expected 1")]
    NotNormalized(f64),
    #[error("tensor shape {found:?} does not match alphabets {expected:?}")]
    ShapeMismatch { expected: [usize; 3], found: [usize; 3] },
    #[error("alphabet must have at least one state")]
    EmptyAlphabet,
    #[error("labels must be distinct and match the alphabet size")]
    BadLabels,
}

/// A finite state space with optional human-readable state names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    size: usize,
    labels: Option<Vec<String>>,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self, DistError> {
        if size == 0 {
            return Err(DistError::EmptyAlphabet);
        }
        Ok(Alphabet { size, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self, DistError> {
        if labels.is_empty() {
            return Err(DistError::EmptyAlphabet);
        }
        let mut seen = labels.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != labels.len() {
            return Err(DistError::BadLabels);
        }
        Ok(Alphabet { size: labels.len(), labels: Some(labels) })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// State name: the stored label, or the state index as decimal text.
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => i.to_string(),
        }
    }
}

/// Which pair marginal of a joint distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarginalPair {
    TX,
    TY,
    XY,
}

/// A pair marginal: a nonnegative matrix with unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal2 {
    pub pair: MarginalPair,
    pub m: Array2<f64>,
}

impl Serialize for Marginal2 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = self.m.outer_iter().map(|r| r.to_vec()).collect();
        let mut st = serializer.serialize_struct("Marginal2", 2)?;
        st.serialize_field("pair", &self.pair)?;
        st.serialize_field("m", &rows)?;
        st.end()
    }
}

impl Marginal2 {
    pub fn max_abs_diff(&self, other: &Marginal2) -> f64 {
        debug_assert_eq!(self.pair, other.pair);
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// A validated joint distribution of `(T, X, Y)`.
///
/// Immutable after construction; all operations are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist3 {
    alphabets: [Alphabet; 3],
    p: Array3<f64>,
}

impl Serialize for JointDist3 {
    /// Serializes to the distribution file container: shape, optional
    /// labels, and the flat probability array in `t`-major order.
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let (nt, nx, ny) = self.dims();
        let has_labels = self.alphabets.iter().any(|a| a.labels.is_some());
        let mut st = serializer.serialize_struct("JointDist3", if has_labels { 3 } else { 2 })?;
        st.serialize_field("shape", &[nt, nx, ny])?;
        if has_labels {
            let all: Vec<Vec<String>> = self
                .alphabets
                .iter()
                .map(|a| (0..a.size).map(|i| a.label(i)).collect())
                .collect();
            st.serialize_field("labels", &all)?;
        }
        let flat: Vec<f64> = self.p.iter().copied().collect();
        st.serialize_field("p", &flat)?;
        st.end()
    }
}

/// Conditional distributions `Q(t | x, y)` with an explicit definedness mask.
///
/// Cells with `Q(x,y) = 0` are flagged undefined instead of carrying NaN.
#[derive(Debug, Clone)]
pub struct CondTGivenXY {
    /// `q[(t, x, y)]` is `Q(t|x,y)` where defined, `0.0` elsewhere.
    pub q: Array3<f64>,
    /// `defined[(x, y)]` is true iff the pair `(x, y)` has positive mass.
    pub defined: Array2<bool>,
}

/// The Shannon quantities used throughout, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfoSuite {
    pub h_t: f64,
    pub h_t_given_y: f64,
    pub h_t_given_x: f64,
    pub mi_tx: f64,
    pub mi_ty: f64,
    pub mi_txy: f64,
}

/// `p log2 p` with the `0 log 0 = 0` convention.
#[inline]
fn plog2p(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln() * LOG2_E
    } else {
        0.0
    }
}

/// Shannon entropy in bits of an iterator of probabilities.
pub fn entropy_bits<I: IntoIterator<Item = f64>>(probs: I) -> f64 {
    -probs.into_iter().map(plog2p).sum::<f64>()
}

impl JointDist3 {
    /// Validates a raw tensor as a joint distribution.
    ///
    /// Rejects negative entries and tensors whose sum deviates from one by
    /// more than [`NORMALIZATION_TOL`]. Never renormalizes.
    pub fn validate(p: Array3<f64>) -> Result<Self, DistError> {
        let (nt, nx, ny) = p.dim();
        let alphabets = [Alphabet::new(nt)?, Alphabet::new(nx)?, Alphabet::new(ny)?];
        Self::validate_with(alphabets, p)
    }

    pub fn validate_with(alphabets: [Alphabet; 3], p: Array3<f64>) -> Result<Self, DistError> {
        let (nt, nx, ny) = p.dim();
        let expected = [alphabets[0].size, alphabets[1].size, alphabets[2].size];
        if expected != [nt, nx, ny] {
            return Err(DistError::ShapeMismatch { expected, found: [nt, nx, ny] });
        }
        for ((t, x, y), &v) in p.indexed_iter() {
            if v < 0.0 {
                return Err(DistError::NegativeEntry { index: (t, x, y), value: v });
            }
        }
        let sum: f64 = p.sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(DistError::NotNormalized(sum));
        }
        Ok(JointDist3 { alphabets, p })
    }

    /// Construction for internally generated tensors (marginal-preserving
    /// moves, closed-form optimizers). Checks the same invariants with a
    /// tolerance for accumulated rounding, clamping parasitic `-0.0`-scale
    /// values to zero.
    pub(crate) fn from_computed(mut p: Array3<f64>) -> Self {
        for v in p.iter_mut() {
            debug_assert!(*v > -1e-9, "computed tensor has negative entry {v}");
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        debug_assert!((p.sum() - 1.0).abs() < 1e-9, "computed tensor sum {}", p.sum());
        let (nt, nx, ny) = p.dim();
        JointDist3 {
            alphabets: [
                Alphabet { size: nt, labels: None },
                Alphabet { size: nx, labels: None },
                Alphabet { size: ny, labels: None },
            ],
            p,
        }
    }

    pub fn alphabets(&self) -> &[Alphabet; 3] {
        &self.alphabets
    }

    /// `(|T|, |X|, |Y|)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        self.p.dim()
    }

    pub fn tensor(&self) -> &Array3<f64> {
        &self.p
    }

    #[inline]
    pub fn p(&self, t: usize, x: usize, y: usize) -> f64 {
        self.p[(t, x, y)]
    }

    /// The requested pair marginal, by exact summation over the third axis.
    pub fn marginal(&self, pair: MarginalPair) -> Marginal2 {
        let m = match pair {
            MarginalPair::TX => self.p.sum_axis(Axis(2)),
            MarginalPair::TY => self.p.sum_axis(Axis(1)),
            MarginalPair::XY => self.p.sum_axis(Axis(0)),
        };
        Marginal2 { pair, m }
    }

    pub fn t_marginal(&self) -> Vec<f64> {
        self.p.sum_axis(Axis(2)).sum_axis(Axis(1)).to_vec()
    }

    pub fn x_marginal(&self) -> Vec<f64> {
        self.p.sum_axis(Axis(2)).sum_axis(Axis(0)).to_vec()
    }

    pub fn y_marginal(&self) -> Vec<f64> {
        self.p.sum_axis(Axis(1)).sum_axis(Axis(0)).to_vec()
    }

    /// `Q(t|x,y)` with a definedness mask for zero-mass `(x,y)` pairs.
    pub fn conditional_t_given_xy(&self) -> CondTGivenXY {
        let (nt, nx, ny) = self.dims();
        let mxy = self.p.sum_axis(Axis(0));
        let mut q = Array3::zeros((nt, nx, ny));
        let mut defined = Array2::from_elem((nx, ny), false);
        for x in 0..nx {
            for y in 0..ny {
                let m = mxy[(x, y)];
                if m > 0.0 {
                    defined[(x, y)] = true;
                    for t in 0..nt {
                        q[(t, x, y)] = self.p[(t, x, y)] / m;
                    }
                }
            }
        }
        CondTGivenXY { q, defined }
    }

    /// Entropies and mutual informations of the distribution, in bits.
    pub fn entropy_and_mi_suite(&self) -> InfoSuite {
        let h_t = entropy_bits(self.t_marginal());
        let h_x = entropy_bits(self.x_marginal());
        let h_y = entropy_bits(self.y_marginal());
        let h_tx = entropy_bits(self.marginal(MarginalPair::TX).m.iter().copied());
        let h_ty = entropy_bits(self.marginal(MarginalPair::TY).m.iter().copied());
        let h_xy = entropy_bits(self.marginal(MarginalPair::XY).m.iter().copied());
        let h_txy = entropy_bits(self.p.iter().copied());
        InfoSuite {
            h_t,
            h_t_given_y: h_ty - h_y,
            h_t_given_x: h_tx - h_x,
            mi_tx: h_t + h_x - h_tx,
            mi_ty: h_t + h_y - h_ty,
            mi_txy: h_t + h_xy - h_txy,
        }
    }

    /// The same distribution with the roles of `X` and `Y` exchanged.
    pub fn swap_xy(&self) -> JointDist3 {
        let mut p = self.p.clone();
        p.swap_axes(1, 2);
        JointDist3 {
            alphabets: [
                self.alphabets[0].clone(),
                self.alphabets[2].clone(),
                self.alphabets[1].clone(),
            ],
            p: p.as_standard_layout().to_owned(),
        }
    }

    /// Max-norm distance between tensors.
    pub fn max_abs_diff(&self, other: &JointDist3) -> f64 {
        self.p
            .iter()
            .zip(other.p.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{uniform222, xor};
    use ndarray::arr3;

    #[test]
    fn uniform_is_valid() {
        let d = uniform222();
        assert_eq!(d.dims(), (2, 2, 2));
    }

    #[test]
    fn unnormalized_rejected() {
        let p = Array3::from_elem((2, 2, 2), 0.1125); // sums to 0.9
        match JointDist3::validate(p) {
            Err(DistError::NotNormalized(s)) => assert!((s - 0.9).abs() < 1e-12),
            other => panic!("expected NotNormalized, got {other:?}"),
        }
    }

    #[test]
    fn negative_entry_rejected_with_index() {
        let mut p = Array3::from_elem((2, 2, 2), 0.125);
        p[(1, 0, 1)] = -0.125;
        p[(1, 1, 1)] = 0.375;
        match JointDist3::validate(p) {
            Err(DistError::NegativeEntry { index, .. }) => assert_eq!(index, (1, 0, 1)),
            other => panic!("expected NegativeEntry, got {other:?}"),
        }
    }

    #[test]
    fn all_binary_parameterization_uniform_point() {
        // a=b=c=d=e=1/2 with zero kernel coefficients is the uniform tensor.
        let (a, b, c, d, e) = (0.5, 0.5, 0.5, 0.5, 0.5);
        let p = arr3(&[
            [[a * b * d, a * b * (1.0 - d)], [a * (1.0 - b) * d, a * (1.0 - b) * (1.0 - d)]],
            [
                [(1.0 - a) * c * e, (1.0 - a) * c * (1.0 - e)],
                [(1.0 - a) * (1.0 - c) * e, (1.0 - a) * (1.0 - c) * (1.0 - e)],
            ],
        ]);
        let d = JointDist3::validate(p).unwrap();
        assert_eq!(d.max_abs_diff(&uniform222()), 0.0);
    }

    #[test]
    fn marginal_uniform() {
        let d = uniform222();
        let m = d.marginal(MarginalPair::TX);
        for v in m.m.iter() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn marginal_line_example() {
        // The 2x2x2 distribution with e=0, a=b=c=d=1/2: slice t=0 uniform at
        // 1/8, slice t=1 supported on y=1 only.
        let d = crate::testutil::supp_line_example();
        let m = d.marginal(MarginalPair::TY);
        assert_eq!(m.m[(0, 0)], 0.25);
        assert_eq!(m.m[(0, 1)], 0.25);
        assert_eq!(m.m[(1, 0)], 0.0);
        assert_eq!(m.m[(1, 1)], 0.5);
    }

    #[test]
    fn marginal_singleton_example() {
        let d = crate::testutil::binary_singleton_example();
        let m = d.marginal(MarginalPair::TX);
        assert_eq!(m.m[(0, 0)], 0.5);
        assert_eq!(m.m[(0, 1)], 0.0);
        assert_eq!(m.m[(1, 0)], 0.25);
        assert_eq!(m.m[(1, 1)], 0.25);
    }

    #[test]
    fn conditional_uniform() {
        let d = uniform222();
        let c = d.conditional_t_given_xy();
        assert!(c.defined.iter().all(|&b| b));
        for v in c.q.iter() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn conditional_undefined_cell_flagged() {
        let mut p = Array3::zeros((2, 2, 2));
        p[(0, 0, 0)] = 0.5;
        p[(1, 1, 0)] = 0.5;
        let d = JointDist3::validate(p).unwrap();
        let c = d.conditional_t_given_xy();
        assert!(c.defined[(0, 0)]);
        assert!(!c.defined[(1, 1)]);
        assert_eq!(c.q[(0, 1, 1)], 0.0);
    }

    #[test]
    fn conditional_rows_sum_to_one_on_defined_cells() {
        let d = xor();
        let c = d.conditional_t_given_xy();
        for x in 0..2 {
            for y in 0..2 {
                if c.defined[(x, y)] {
                    let s: f64 = (0..2).map(|t| c.q[(t, x, y)]).sum();
                    assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn entropy_suite_uniform() {
        let s = uniform222().entropy_and_mi_suite();
        assert!((s.h_t - 1.0).abs() < 1e-12);
        assert!(s.mi_tx.abs() < 1e-12);
        assert!(s.mi_txy.abs() < 1e-12);
    }

    #[test]
    fn entropy_suite_xor() {
        // Direct summation over the 8 atoms: T is uniform, independent of
        // each input alone, determined by the pair.
        let s = xor().entropy_and_mi_suite();
        assert!((s.h_t - 1.0).abs() < 1e-12);
        assert!(s.mi_tx.abs() < 1e-12);
        assert!(s.mi_ty.abs() < 1e-12);
        assert!((s.mi_txy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swap_xy_round_trip() {
        let d = crate::testutil::supp_line_example();
        assert_eq!(d.swap_xy().swap_xy().max_abs_diff(&d), 0.0);
        assert_eq!(d.swap_xy().p(1, 0, 1), d.p(1, 1, 0));
    }
}
