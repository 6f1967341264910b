//! Geometry of the optimization domain.
//!
//! For a fixed joint distribution `P`, the domain is the polytope of joint
//! distributions sharing `P`'s `(T,X)` and `(T,Y)` pair marginals. It factors
//! as a product over the support states of `T`: the factor at `t` is the
//! transportation polytope of `(X,Y)` couplings with marginals `P(X|t)` and
//! `P(Y|t)`, supported on the product of those marginals' supports.
//!
//! Points are addressed in kernel coordinates relative to the anchor
//! distribution `Q0(t,x,y) = P(t) P(x|t) P(y|t)` (the unique member of the
//! domain in which X and Y are conditionally independent given T, and the
//! member of maximal support). The coordinate basis consists of the
//! 2x2-swap tensors
//!
//! ```text
//! gamma(t; x,x'; y,y') = +1 at (t,x,y) and (t,x',y'),
//!                        -1 at (t,x,y') and (t,x',y)
//! ```
//!
//! anchored at the first support states of each slice; every such tensor has
//! vanishing (T,X) and (T,Y) marginals. A coordinate value `g` moves the
//! tensor by `P(t) * g * gamma`, so coordinates are on the scale of the
//! conditional distribution `Q(x,y|t)`.

use crate::distributions::{JointDist3, Marginal2, MarginalPair};
use ndarray::Array3;
use serde::Serialize;
use thiserror::Error;

/// Atom probabilities above this are treated as interior.
pub const INTERIOR_TOL: f64 = 1e-9;
/// Atom probabilities below the negative of this are outside the domain.
pub const OUTSIDE_TOL: f64 = 1e-12;
/// Max-norm slack on pair-marginal equality for domain membership.
pub const MARGINAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DeltaPError {
    #[error("tensor is not in the domain: pair marginals deviate by {max_dev:e}")]
    NotInDeltaP { max_dev: f64 },
    #[error("state index out of range")]
    IndexOutOfRange,
    #[error("operation requires all alphabets binary with both T states supported")]
    NotAllBinary,
    #[error("distribution has no supported T state")]
    EmptyTSupport,
}

/// One kernel coordinate: slice `t`, non-anchor states `x`, `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoordIndex {
    pub t: usize,
    pub x: usize,
    pub y: usize,
}

/// Coordinates of a domain point relative to the anchor `Q0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaCoords {
    pub values: Vec<f64>,
}

impl GammaCoords {
    pub fn zeros(dim: usize) -> Self {
        GammaCoords { values: vec![0.0; dim] }
    }
}

/// Coordinate bounds of the all-binary rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxBounds222 {
    pub g1_min: f64,
    pub g1_max: f64,
    pub g2_min: f64,
    pub g2_max: f64,
}

/// Location of a point relative to the domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Membership {
    Interior,
    /// Atoms of the domain support within [`INTERIOR_TOL`] of zero.
    Boundary(Vec<(usize, usize, usize)>),
    Outside,
}

/// The optimization domain of a fixed distribution: frozen pair marginals,
/// per-slice supports, anchor point and kernel coordinate system.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaPSpec {
    pub m_tx: Marginal2,
    pub m_ty: Marginal2,
    /// States of `T` with positive probability.
    pub t_support: Vec<usize>,
    /// Per-`t` support of `P(X|t)`; empty for unsupported `t`.
    pub x_support: Vec<Vec<usize>>,
    /// Per-`t` support of `P(Y|t)`; empty for unsupported `t`.
    pub y_support: Vec<Vec<usize>>,
    /// Marginal distribution of `T`.
    pub p_t: Vec<f64>,
    /// The anchor point `Q0`.
    pub q0: JointDist3,
    /// Per-slice anchor states `(x0, y0)`; `None` for unsupported `t`.
    pub anchors: Vec<Option<(usize, usize)>>,
    /// Enumeration of the kernel coordinates.
    pub coords: Vec<CoordIndex>,
    /// Dimension of the domain.
    pub dim: usize,
    /// Atoms `(t,x,y)` carried by some member of the domain.
    pub support: Vec<(usize, usize, usize)>,
}

/// The 2x2-swap kernel tensor for the given slice and state pairs.
///
/// All of its `(T,X)` and `(T,Y)` marginals vanish, so adding a multiple to
/// any domain member stays inside the affine hull of the domain.
pub fn gamma_vector(
    dims: (usize, usize, usize),
    t: usize,
    x: usize,
    x2: usize,
    y: usize,
    y2: usize,
) -> Result<Array3<f64>, DeltaPError> {
    let (nt, nx, ny) = dims;
    if t >= nt || x >= nx || x2 >= nx || y >= ny || y2 >= ny || x == x2 || y == y2 {
        return Err(DeltaPError::IndexOutOfRange);
    }
    let mut g = Array3::zeros(dims);
    g[(t, x, y)] = 1.0;
    g[(t, x2, y2)] = 1.0;
    g[(t, x, y2)] = -1.0;
    g[(t, x2, y)] = -1.0;
    Ok(g)
}

/// Builds the domain description of a distribution.
pub fn build_spec(p: &JointDist3) -> DeltaPSpec {
    let (nt, nx, ny) = p.dims();
    let m_tx = p.marginal(MarginalPair::TX);
    let m_ty = p.marginal(MarginalPair::TY);
    let p_t = p.t_marginal();

    let mut t_support = Vec::new();
    let mut x_support = vec![Vec::new(); nt];
    let mut y_support = vec![Vec::new(); nt];
    let mut anchors = vec![None; nt];
    for t in 0..nt {
        if p_t[t] > 0.0 {
            t_support.push(t);
            x_support[t] = (0..nx).filter(|&x| m_tx.m[(t, x)] > 0.0).collect();
            y_support[t] = (0..ny).filter(|&y| m_ty.m[(t, y)] > 0.0).collect();
            anchors[t] = Some((x_support[t][0], y_support[t][0]));
        }
    }

    // Q0(t,x,y) = P(t,x) P(t,y) / P(t).
    let mut q0 = Array3::zeros((nt, nx, ny));
    for &t in &t_support {
        for x in 0..nx {
            for y in 0..ny {
                q0[(t, x, y)] = m_tx.m[(t, x)] * m_ty.m[(t, y)] / p_t[t];
            }
        }
    }
    let q0 = JointDist3::from_computed(q0);

    let mut coords = Vec::new();
    let mut support = Vec::new();
    for &t in &t_support {
        let (x0, y0) = anchors[t].unwrap();
        for &x in &x_support[t] {
            for &y in &y_support[t] {
                support.push((t, x, y));
                if x != x0 && y != y0 {
                    coords.push(CoordIndex { t, x, y });
                }
            }
        }
    }
    let dim = coords.len();

    DeltaPSpec {
        m_tx,
        m_ty,
        t_support,
        x_support,
        y_support,
        p_t,
        q0,
        anchors,
        coords,
        dim,
        support,
    }
}

impl DeltaPSpec {
    pub fn dims(&self) -> (usize, usize, usize) {
        self.q0.dims()
    }

    /// Coordinates of a domain member relative to the anchor.
    ///
    /// Fails if the tensor's pair marginals deviate from the frozen ones by
    /// more than [`MARGINAL_TOL`] in max norm.
    pub fn to_gamma(&self, q: &JointDist3) -> Result<GammaCoords, DeltaPError> {
        let dev_tx = q.marginal(MarginalPair::TX).max_abs_diff(&self.m_tx);
        let dev_ty = q.marginal(MarginalPair::TY).max_abs_diff(&self.m_ty);
        let max_dev = dev_tx.max(dev_ty);
        if max_dev > MARGINAL_TOL {
            return Err(DeltaPError::NotInDeltaP { max_dev });
        }
        let q0 = self.q0.tensor();
        let values = self
            .coords
            .iter()
            .map(|c| (q.p(c.t, c.x, c.y) - q0[(c.t, c.x, c.y)]) / self.p_t[c.t])
            .collect();
        Ok(GammaCoords { values })
    }

    /// The tensor at the given coordinates. May carry negative entries when
    /// the point lies outside the domain; callers check membership.
    pub fn from_gamma(&self, g: &GammaCoords) -> Array3<f64> {
        assert_eq!(g.values.len(), self.dim);
        let mut q = self.q0.tensor().clone();
        for (c, &v) in self.coords.iter().zip(&g.values) {
            let (x0, y0) = self.anchors[c.t].unwrap();
            let step = self.p_t[c.t] * v;
            q[(c.t, c.x, c.y)] += step;
            q[(c.t, x0, y0)] += step;
            q[(c.t, c.x, y0)] -= step;
            q[(c.t, x0, c.y)] -= step;
        }
        q
    }

    /// Classifies the point at coordinates `g` relative to the domain.
    pub fn membership(&self, g: &GammaCoords) -> Membership {
        self.membership_of_tensor(&self.from_gamma(g))
    }

    /// Classifies a tensor assumed to satisfy the marginal constraints.
    pub fn membership_of_tensor(&self, q: &Array3<f64>) -> Membership {
        let mut near_zero = Vec::new();
        for &(t, x, y) in &self.support {
            let v = q[(t, x, y)];
            if v < -OUTSIDE_TOL {
                return Membership::Outside;
            }
            if v <= INTERIOR_TOL {
                near_zero.push((t, x, y));
            }
        }
        if near_zero.is_empty() {
            Membership::Interior
        } else {
            Membership::Boundary(near_zero)
        }
    }

    /// Atoms within `band` of zero but above the interior threshold:
    /// near-threshold cases whose classification is sensitive to the
    /// interior tolerance.
    pub fn marginal_atoms(&self, q: &Array3<f64>, band: f64) -> Vec<(usize, usize, usize)> {
        self.support
            .iter()
            .copied()
            .filter(|&(t, x, y)| {
                let v = q[(t, x, y)];
                v > INTERIOR_TOL && v <= band
            })
            .collect()
    }

    /// Coordinate bounds of the all-binary rectangle.
    ///
    /// Requires `|T|=|X|=|Y|=2` with both `T` states supported. With
    /// `b = P(x=0|t=0)`, `c = P(x=0|t=1)`, `d = P(y=0|t=0)`, `e = P(y=0|t=1)`:
    ///
    /// ```text
    /// -min(bd, (1-b)(1-d)) <= g1 <= min(b(1-d), (1-b)d)
    /// -min(ce, (1-c)(1-e)) <= g2 <= min(c(1-e), (1-c)e)
    /// ```
    pub fn bounds_222(&self) -> Result<BoxBounds222, DeltaPError> {
        if self.dims() != (2, 2, 2) || self.t_support.len() != 2 {
            return Err(DeltaPError::NotAllBinary);
        }
        let b = self.m_tx.m[(0, 0)] / self.p_t[0];
        let c = self.m_tx.m[(1, 0)] / self.p_t[1];
        let d = self.m_ty.m[(0, 0)] / self.p_t[0];
        let e = self.m_ty.m[(1, 0)] / self.p_t[1];
        Ok(BoxBounds222 {
            g1_min: -(b * d).min((1.0 - b) * (1.0 - d)),
            g1_max: (b * (1.0 - d)).min((1.0 - b) * d),
            g2_min: -(c * e).min((1.0 - c) * (1.0 - e)),
            g2_max: (c * (1.0 - e)).min((1.0 - c) * e),
        })
    }

    /// Largest nonnegative step along `dir` (a kernel tensor) keeping
    /// `q + step * dir` nonnegative. Returns `f64::INFINITY` when nothing
    /// decreases.
    pub fn max_feasible_step(&self, q: &Array3<f64>, dir: &Array3<f64>) -> f64 {
        let mut step = f64::INFINITY;
        for (qv, dv) in q.iter().zip(dir.iter()) {
            if *dv < 0.0 {
                step = step.min(-qv / dv);
            }
        }
        step.max(0.0)
    }
}

/// Atoms `(t,x,y)` that vanish throughout the domain of `p`: those with
/// `P(t,x) * P(t,y) = 0` for supported `t`, plus every atom of unsupported
/// `t`. Empty iff the domain has full support.
pub fn face_analysis(p: &JointDist3) -> Vec<(usize, usize, usize)> {
    let (nt, nx, ny) = p.dims();
    let m_tx = p.marginal(MarginalPair::TX);
    let m_ty = p.marginal(MarginalPair::TY);
    let p_t = p.t_marginal();
    let mut atoms = Vec::new();
    for t in 0..nt {
        for x in 0..nx {
            for y in 0..ny {
                if p_t[t] <= 0.0 || m_tx.m[(t, x)] * m_ty.m[(t, y)] == 0.0 {
                    atoms.push((t, x, y));
                }
            }
        }
    }
    atoms
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{
        all_binary_tensor, binary_singleton_example, blockwise_example, supp_line_example,
        uniform222,
    };
    use ndarray::Array3;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_independent_spec() {
        let p = uniform222();
        let spec = build_spec(&p);
        assert_eq!(spec.dim, 2);
        assert_eq!(spec.q0.max_abs_diff(&p), 0.0);
        assert_eq!(spec.t_support, vec![0, 1]);
    }

    #[test]
    fn singleton_example_dim_zero() {
        let spec = build_spec(&binary_singleton_example());
        assert_eq!(spec.dim, 0);
        assert_eq!(spec.x_support[0], vec![0]);
        assert_eq!(spec.y_support[1], vec![0]);
    }

    #[test]
    fn line_example_dim_one() {
        let spec = build_spec(&supp_line_example());
        assert_eq!(spec.dim, 1);
        assert_eq!(spec.y_support[1], vec![1]);
    }

    #[test]
    fn gamma_vector_binary() {
        let g = gamma_vector((2, 2, 2), 0, 0, 1, 0, 1).unwrap();
        assert_eq!(g[(0, 0, 0)], 1.0);
        assert_eq!(g[(0, 1, 1)], 1.0);
        assert_eq!(g[(0, 0, 1)], -1.0);
        assert_eq!(g[(0, 1, 0)], -1.0);
        assert!(g.index_axis(ndarray::Axis(0), 1).iter().all(|&v| v == 0.0));
        assert_eq!(g.sum(), 0.0);
    }

    #[test]
    fn gamma_vector_marginals_vanish() {
        let g = gamma_vector((3, 4, 5), 2, 1, 3, 0, 4).unwrap();
        let tx = g.sum_axis(ndarray::Axis(2));
        let ty = g.sum_axis(ndarray::Axis(1));
        assert!(tx.iter().all(|&v| v == 0.0));
        assert!(ty.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gamma_vector_rejects_bad_indices() {
        assert_eq!(
            gamma_vector((2, 2, 2), 0, 0, 0, 0, 1).unwrap_err(),
            DeltaPError::IndexOutOfRange
        );
        assert_eq!(
            gamma_vector((2, 2, 2), 2, 0, 1, 0, 1).unwrap_err(),
            DeltaPError::IndexOutOfRange
        );
    }

    #[test]
    fn to_gamma_of_anchor_is_zero() {
        let spec = build_spec(&uniform222());
        let g = spec.to_gamma(&spec.q0.clone()).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn to_gamma_recovers_table_coefficients() {
        let p = JointDist3::validate(all_binary_tensor(0.5, 0.5, 0.5, 0.5, 0.5, 0.1, -0.05))
            .unwrap();
        let spec = build_spec(&p);
        let base =
            JointDist3::validate(all_binary_tensor(0.5, 0.5, 0.5, 0.5, 0.5, 0.0, 0.0)).unwrap();
        let spec0 = build_spec(&base);
        assert_eq!(spec0.q0.max_abs_diff(&spec.q0), 0.0);
        let g = spec.to_gamma(&p).unwrap();
        assert_eq!(spec.coords.len(), 2);
        assert!((g.values[0] - 0.1).abs() < 1e-12);
        assert!((g.values[1] + 0.05).abs() < 1e-12);
    }

    #[test]
    fn round_trip_random_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = build_spec(&uniform222());
        for _ in 0..50 {
            let g = GammaCoords {
                values: (0..spec.dim).map(|_| rng.gen_range(-0.2..0.2)).collect(),
            };
            let q = spec.from_gamma(&g);
            if q.iter().all(|&v| v >= 0.0) {
                let d = JointDist3::validate(q).unwrap();
                let back = spec.to_gamma(&d).unwrap();
                for (a, b) in g.values.iter().zip(&back.values) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn from_gamma_preserves_marginals() {
        let p = crate::testutil::ternary_rank_one_example();
        let spec = build_spec(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g = GammaCoords {
                values: (0..spec.dim).map(|_| rng.gen_range(-0.05..0.05)).collect(),
            };
            let q = spec.from_gamma(&g);
            let tx = q.sum_axis(ndarray::Axis(2));
            let ty = q.sum_axis(ndarray::Axis(1));
            let dev = tx
                .iter()
                .zip(spec.m_tx.m.iter())
                .chain(ty.iter().zip(spec.m_ty.m.iter()))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(dev < 1e-12);
        }
    }

    #[test]
    fn to_gamma_rejects_foreign_distribution() {
        let spec = build_spec(&supp_line_example());
        match spec.to_gamma(&uniform222()) {
            Err(DeltaPError::NotInDeltaP { max_dev }) => assert!(max_dev > 0.1),
            other => panic!("expected NotInDeltaP, got {other:?}"),
        }
    }

    #[test]
    fn membership_interior_boundary_outside() {
        let spec = build_spec(&uniform222());
        assert_eq!(spec.membership(&GammaCoords::zeros(2)), Membership::Interior);

        let bounds = spec.bounds_222().unwrap();
        let at_max = GammaCoords { values: vec![bounds.g1_max, 0.0] };
        match spec.membership(&at_max) {
            Membership::Boundary(atoms) => {
                assert!(atoms.contains(&(0, 0, 1)) && atoms.contains(&(0, 1, 0)));
            }
            other => panic!("expected Boundary, got {other:?}"),
        }

        let beyond = GammaCoords { values: vec![bounds.g1_max + 0.1, 0.0] };
        assert_eq!(spec.membership(&beyond), Membership::Outside);
    }

    #[test]
    fn bounds_uniform() {
        let spec = build_spec(&uniform222());
        let b = spec.bounds_222().unwrap();
        assert_eq!((b.g1_min, b.g1_max), (-0.25, 0.25));
        assert_eq!((b.g2_min, b.g2_max), (-0.25, 0.25));
    }

    #[test]
    fn bounds_degenerate_and_generic() {
        // b=0 forces the first coordinate to zero width.
        let p = JointDist3::validate(all_binary_tensor(0.5, 0.0, 0.5, 0.5, 0.5, 0.0, 0.0))
            .unwrap();
        let b = build_spec(&p).bounds_222().unwrap();
        assert_eq!((b.g1_min, b.g1_max), (0.0, 0.0));

        // b=.6, d=.7: upper bound is min(.18, .28).
        let p = JointDist3::validate(all_binary_tensor(0.5, 0.6, 0.5, 0.7, 0.5, 0.0, 0.0))
            .unwrap();
        let b = build_spec(&p).bounds_222().unwrap();
        assert!((b.g1_max - 0.18).abs() < 1e-12);
    }

    #[test]
    fn bounds_rejects_non_binary() {
        let spec = build_spec(&blockwise_example());
        assert_eq!(spec.bounds_222().unwrap_err(), DeltaPError::NotAllBinary);
    }

    #[test]
    fn face_analysis_full_support_empty() {
        assert!(face_analysis(&uniform222()).is_empty());
        // The blockwise example has restricted support itself, but its
        // domain support is full.
        assert!(face_analysis(&blockwise_example()).is_empty());
    }

    #[test]
    fn face_analysis_line_example() {
        let atoms = face_analysis(&supp_line_example());
        assert_eq!(atoms, vec![(1, 0, 0), (1, 1, 0)]);
    }

    #[test]
    fn face_analysis_agrees_with_random_membership_probes() {
        let p = supp_line_example();
        let spec = build_spec(&p);
        let face: std::collections::HashSet<_> = face_analysis(&p).into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (nt, nx, ny) = p.dims();
        let mut max_seen = Array3::<f64>::zeros((nt, nx, ny));
        for _ in 0..1000 {
            let g = GammaCoords {
                values: (0..spec.dim).map(|_| rng.gen_range(-0.25..0.25)).collect(),
            };
            let q = spec.from_gamma(&g);
            if q.iter().all(|&v| v >= 0.0) {
                for ((idx, &v), m) in q.indexed_iter().zip(max_seen.iter_mut()) {
                    let _ = idx;
                    *m = m.max(v);
                }
            }
        }
        for ((t, x, y), &m) in max_seen.indexed_iter() {
            assert_eq!(face.contains(&(t, x, y)), m < 1e-12, "atom ({t},{x},{y})");
        }
    }

    /// Per-slice supports match the supports seen across random members.
    #[test]
    fn slice_support_is_product_of_marginal_supports() {
        let p = supp_line_example();
        let spec = build_spec(&p);
        for &t in &spec.t_support {
            for &x in &spec.x_support[t] {
                for &y in &spec.y_support[t] {
                    assert!(spec.support.contains(&(t, x, y)));
                    assert!(spec.q0.p(t, x, y) > 0.0);
                }
            }
        }
    }
}
