//! The objective `I_Q(T:X|Y)` and its local analysis.
//!
//! The derivative of the objective along a kernel tensor
//! `gamma(t; x,x'; y,y')` is
//!
//! ```text
//! log2 [ Q(t|x,y) Q(t|x',y') / ( Q(t|x,y') Q(t|x',y) ) ]
//! ```
//!
//! where a conditional with zero pair mass contributes a factor of one (the
//! limit along the move, which creates the pair together with the atom).
//! With a zero atom over positive pair mass the derivative diverges: the
//! value is a signed infinity, not an error, and a minus-infinity value
//! means a strictly improving feasible move exists.
//!
//! All directional derivatives vanish at once iff for every supported `t`
//! the conditional matrix `Q(t|x,y)` has rank one on its defined cells.

use crate::distributions::JointDist3;
use ndarray::{Array2, Array3, Axis};
use serde::Serialize;

/// Largest 2x2 minor of a conditional matrix tolerated as "rank one".
pub const RANK_TOL: f64 = 1e-8;

const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Conditional mutual information `I_Q(T:X|Y)` in bits.
pub fn cmi(q: &JointDist3) -> f64 {
    cmi_tensor(q.tensor())
}

/// `I(T:X|Y)` of a raw nonnegative tensor with unit sum.
///
/// Entries that are exactly zero (or negative within rounding slack)
/// contribute nothing.
pub fn cmi_tensor(q: &Array3<f64>) -> f64 {
    let m_ty = q.sum_axis(Axis(1));
    let m_xy = q.sum_axis(Axis(0));
    let p_y = m_xy.sum_axis(Axis(0));
    let (nt, nx, ny) = q.dim();
    let mut acc = 0.0;
    for t in 0..nt {
        for x in 0..nx {
            for y in 0..ny {
                let v = q[(t, x, y)];
                if v > 0.0 {
                    acc += v * (v * p_y[y] / (m_ty[(t, y)] * m_xy[(x, y)])).ln();
                }
            }
        }
    }
    // Clamp parasitic negative rounding residue: the quantity is nonnegative.
    (acc * LOG2_E).max(0.0)
}

/// A one-sided directional derivative of the objective.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DirectionalDerivative {
    /// Derivative in bits per unit step; may be `+inf`, `-inf`, or NaN when
    /// both the numerator and denominator of the limit vanish.
    pub value: f64,
    pub finite: bool,
    /// `(t, x, x', y, y')` of the kernel tensor.
    pub direction: (usize, usize, usize, usize, usize),
}

/// Conditional factor `Q(t|x,y)` with the convention `0/0 = 1`: along the
/// move the atom and its pair mass vanish together, and their ratio tends
/// to one.
#[inline]
fn cond_factor(atom: f64, pair: f64) -> f64 {
    if pair <= 0.0 {
        1.0
    } else {
        (atom / pair).max(0.0)
    }
}

/// Derivative of `cmi` at `q` along `gamma(t; x,x2; y,y2)`, with the limit
/// rules for vanishing probabilities.
pub fn directional_derivative(
    q: &JointDist3,
    t: usize,
    x: usize,
    x2: usize,
    y: usize,
    y2: usize,
) -> DirectionalDerivative {
    let m_xy = q.tensor().sum_axis(Axis(0));
    directional_derivative_raw(q.tensor(), &m_xy, t, x, x2, y, y2)
}

/// Same as [`directional_derivative`] with the pair marginal precomputed.
pub fn directional_derivative_raw(
    q: &Array3<f64>,
    m_xy: &Array2<f64>,
    t: usize,
    x: usize,
    x2: usize,
    y: usize,
    y2: usize,
) -> DirectionalDerivative {
    let num = cond_factor(q[(t, x, y)], m_xy[(x, y)])
        * cond_factor(q[(t, x2, y2)], m_xy[(x2, y2)]);
    let den = cond_factor(q[(t, x, y2)], m_xy[(x, y2)])
        * cond_factor(q[(t, x2, y)], m_xy[(x2, y)]);
    let value = if num > 0.0 && den > 0.0 {
        (num / den).ln() * LOG2_E
    } else if num == 0.0 && den > 0.0 {
        f64::NEG_INFINITY
    } else if num > 0.0 && den == 0.0 {
        f64::INFINITY
    } else {
        f64::NAN
    };
    DirectionalDerivative { value, finite: value.is_finite(), direction: (t, x, x2, y, y2) }
}

/// Stationarity analysis of a point: per-slice conditional matrices, their
/// numerical ranks, and the worst 2x2 minor over defined cells.
#[derive(Debug, Clone)]
pub struct StationarityReport {
    /// `Q(t|x,y)` per supported `t`, as |X| x |Y| matrices.
    pub conditionals: Vec<(usize, Array2<f64>)>,
    /// Cells `(x,y)` with positive pair mass.
    pub defined: Array2<bool>,
    /// Numerical rank of each conditional matrix restricted to defined cells.
    pub ranks: Vec<usize>,
    pub stationary: bool,
    /// Largest magnitude of a fully-defined 2x2 minor across slices.
    pub worst_residual: f64,
    /// Rank-one factors `(v_t, w_t)` with `Q(t|x,y) = v_t(x) w_t(y)`;
    /// present only when stationary and every cell is defined.
    pub factors: Option<Vec<(Vec<f64>, Vec<f64>)>>,
}

/// Tests whether all directional derivatives vanish, i.e. whether every
/// per-slice conditional matrix has rank one on defined cells.
pub fn stationarity_test(q: &JointDist3) -> StationarityReport {
    let (nt, nx, ny) = q.dims();
    let cond = q.conditional_t_given_xy();
    let p_t = q.t_marginal();

    let mut conditionals = Vec::new();
    let mut ranks = Vec::new();
    let mut worst: f64 = 0.0;
    for t in 0..nt {
        if p_t[t] <= 0.0 {
            continue;
        }
        let m = cond.q.index_axis(Axis(0), t).to_owned();
        for x in 0..nx {
            for x2 in x + 1..nx {
                for y in 0..ny {
                    for y2 in y + 1..ny {
                        if cond.defined[(x, y)]
                            && cond.defined[(x, y2)]
                            && cond.defined[(x2, y)]
                            && cond.defined[(x2, y2)]
                        {
                            let minor = m[(x, y)] * m[(x2, y2)] - m[(x, y2)] * m[(x2, y)];
                            worst = worst.max(minor.abs());
                        }
                    }
                }
            }
        }
        ranks.push(masked_rank(&m, &cond.defined));
        conditionals.push((t, m));
    }
    let stationary = worst <= RANK_TOL;

    let all_defined = cond.defined.iter().all(|&b| b);
    let factors = if stationary && all_defined {
        Some(
            conditionals
                .iter()
                .map(|(_, m)| rank_one_factors(m))
                .collect(),
        )
    } else {
        None
    };

    StationarityReport {
        conditionals,
        defined: cond.defined,
        ranks,
        stationary,
        worst_residual: worst,
        factors,
    }
}

/// Numerical rank of a matrix restricted to a definedness mask, by Gaussian
/// elimination over the defined rows with undefined cells treated as free
/// (they impose no constraint, so they are zeroed).
fn masked_rank(m: &Array2<f64>, defined: &Array2<bool>) -> usize {
    let (nx, ny) = m.dim();
    let mut rows: Vec<Vec<f64>> = (0..nx)
        .map(|x| (0..ny).map(|y| if defined[(x, y)] { m[(x, y)] } else { 0.0 }).collect())
        .collect();
    let mut rank = 0;
    let mut col = 0;
    while rank < nx && col < ny {
        let pivot = (rank..nx).max_by(|&a, &b| {
            rows[a][col].abs().partial_cmp(&rows[b][col].abs()).unwrap()
        });
        let pivot = match pivot {
            Some(p) if rows[p][col].abs() > RANK_TOL => p,
            _ => {
                col += 1;
                continue;
            }
        };
        rows.swap(rank, pivot);
        for r in rank + 1..nx {
            let f = rows[r][col] / rows[rank][col];
            for c in col..ny {
                rows[r][c] -= f * rows[rank][c];
            }
        }
        rank += 1;
        col += 1;
    }
    rank
}

/// Nonnegative rank-one factors of a (numerically) rank-one matrix:
/// `m = v w^T` with `sum(w) = 1` scaling.
fn rank_one_factors(m: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let total: f64 = m.sum();
    let v: Vec<f64> = m.sum_axis(Axis(1)).to_vec();
    let w: Vec<f64> = if total > 0.0 {
        m.sum_axis(Axis(0)).iter().map(|c| c / total).collect()
    } else {
        vec![0.0; m.dim().1]
    };
    (v, w)
}

/// A direction `v0 w0^T` on the pair distribution along which the
/// conditionals `Q(T|XY)` are preserved, so the objective is affine.
#[derive(Debug, Clone, Serialize)]
pub struct FlatDirection {
    pub v0: Vec<f64>,
    pub w0: Vec<f64>,
}

/// Kernel directions along which the objective is affine at a stationary
/// full-support point: all products of an orthonormal basis of the
/// orthogonal complement of `span{v_t}` with one of `span{w_t}`.
///
/// Empty when the point is not stationary or not fully supported.
pub fn flat_directions(q: &JointDist3) -> Vec<FlatDirection> {
    let report = stationarity_test(q);
    flat_directions_of(&report)
}

/// [`flat_directions`] from a precomputed stationarity report.
pub fn flat_directions_of(report: &StationarityReport) -> Vec<FlatDirection> {
    let factors = match &report.factors {
        Some(f) => f,
        None => return Vec::new(),
    };
    let vs: Vec<&Vec<f64>> = factors.iter().map(|(v, _)| v).collect();
    let ws: Vec<&Vec<f64>> = factors.iter().map(|(_, w)| w).collect();
    let v_perp = orthogonal_complement(&vs);
    let w_perp = orthogonal_complement(&ws);
    let mut out = Vec::new();
    for v0 in &v_perp {
        for w0 in &w_perp {
            out.push(FlatDirection { v0: v0.clone(), w0: w0.clone() });
        }
    }
    out
}

/// Orthonormal basis of the orthogonal complement of the span of `vecs`,
/// by modified Gram-Schmidt against the coordinate basis.
fn orthogonal_complement(vecs: &[&Vec<f64>]) -> Vec<Vec<f64>> {
    let n = match vecs.first() {
        Some(v) => v.len(),
        None => return Vec::new(),
    };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vecs {
        if let Some(u) = orthonormalize((*v).clone(), &basis) {
            basis.push(u);
        }
    }
    let span_dim = basis.len();
    let mut complement = Vec::new();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        if let Some(u) = orthonormalize(e, &basis) {
            basis.push(u.clone());
            complement.push(u);
        }
    }
    debug_assert_eq!(span_dim + complement.len(), n);
    complement
}

fn orthonormalize(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..2 {
        for b in basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
    }
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm < 1e-10 {
        None
    } else {
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        Some(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deltap::{build_spec, GammaCoords};
    use crate::testutil::{ternary_rank_one_example, uniform222, xor};
    use ndarray::Array3;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cmi_uniform_zero() {
        assert_eq!(cmi(&uniform222()), 0.0);
    }

    #[test]
    fn cmi_xor_one() {
        assert!((cmi(&xor()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cmi_equals_conditional_entropy_difference() {
        let d = ternary_rank_one_example();
        let s = d.entropy_and_mi_suite();
        // I(T:X|Y) = I(T:XY) - I(T:Y)
        assert!((cmi(&d) - (s.mi_txy - s.mi_ty)).abs() < 1e-12);
    }

    #[test]
    fn derivative_zero_for_constant_conditionals() {
        let d = uniform222();
        let dd = directional_derivative(&d, 0, 0, 1, 0, 1);
        assert!(dd.finite);
        assert_eq!(dd.value, 0.0);
    }

    #[test]
    fn derivative_zero_at_rank_one_example() {
        let d = ternary_rank_one_example();
        for t in 0..3 {
            let dd = directional_derivative(&d, t, 0, 1, 0, 1);
            assert!(dd.finite);
            assert!(dd.value.abs() < 1e-12, "t={t}: {}", dd.value);
        }
    }

    #[test]
    fn derivative_minus_infinity_on_zero_atom_with_positive_pair() {
        // Atom (0,0,0) is zero while the pair (0,0) keeps positive mass from
        // the other slice, and the decreasing atoms are positive.
        let mut p = Array3::zeros((2, 2, 2));
        p[(1, 0, 0)] = 0.25;
        p[(0, 0, 1)] = 0.25;
        p[(0, 1, 0)] = 0.25;
        p[(1, 1, 1)] = 0.125;
        p[(0, 1, 1)] = 0.125;
        let d = JointDist3::validate(p).unwrap();
        let dd = directional_derivative(&d, 0, 0, 1, 0, 1);
        assert!(!dd.finite);
        assert_eq!(dd.value, f64::NEG_INFINITY);
    }

    #[test]
    fn derivative_antisymmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = build_spec(&uniform222());
        for _ in 0..20 {
            let g = GammaCoords {
                values: (0..spec.dim).map(|_| rng.gen_range(-0.2..0.2)).collect(),
            };
            let q = spec.from_gamma(&g);
            if q.iter().all(|&v| v > 0.0) {
                let d = JointDist3::validate(q).unwrap();
                let fwd = directional_derivative(&d, 0, 0, 1, 0, 1).value;
                let swapped_x = directional_derivative(&d, 0, 1, 0, 0, 1).value;
                let swapped_y = directional_derivative(&d, 0, 0, 1, 1, 0).value;
                assert!((fwd + swapped_x).abs() < 1e-12);
                assert!((fwd + swapped_y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = ternary_rank_one_example();
        let spec = build_spec(&p);
        let mut checked = 0;
        while checked < 100 {
            let g = GammaCoords {
                values: (0..spec.dim).map(|_| rng.gen_range(-0.04..0.04)).collect(),
            };
            let q = spec.from_gamma(&g);
            if q.iter().any(|&v| v < 1e-3) {
                continue;
            }
            let t = rng.gen_range(0..3);
            let h = 1e-5;
            let gamma = crate::deltap::gamma_vector(q.dim(), t, 0, 1, 0, 1).unwrap();
            let fp = cmi_tensor(&(&q + &(&gamma * h)));
            let fm = cmi_tensor(&(&q - &(&gamma * h)));
            let numeric = (fp - fm) / (2.0 * h);
            let d = JointDist3::validate(q).unwrap();
            let analytic = directional_derivative(&d, t, 0, 1, 0, 1).value;
            assert!(
                (numeric - analytic).abs() <= 1e-5,
                "analytic {analytic} vs central difference {numeric}"
            );
            checked += 1;
        }
    }

    #[test]
    fn stationarity_at_anchor_of_independent_distribution() {
        let spec = build_spec(&uniform222());
        let report = stationarity_test(&spec.q0);
        assert!(report.stationary);
        assert_eq!(report.ranks, vec![1, 1]);
    }

    #[test]
    fn stationarity_rank_one_example() {
        let report = stationarity_test(&ternary_rank_one_example());
        assert!(report.stationary);
        assert!(report.worst_residual <= 1e-12);
        let factors = report.factors.as_ref().unwrap();
        assert_eq!(factors.len(), 3);
        for ((_, m), (v, w)) in report.conditionals.iter().zip(factors) {
            for x in 0..2 {
                for y in 0..2 {
                    assert!((m[(x, y)] - v[x] * w[y]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn generic_point_not_stationary() {
        let spec = build_spec(&uniform222());
        let g = GammaCoords { values: vec![0.1, -0.07] };
        let q = JointDist3::validate(spec.from_gamma(&g)).unwrap();
        let report = stationarity_test(&q);
        assert!(!report.stationary);
        assert!(report.worst_residual > 1e-6);
        // Cross-check against a directional derivative.
        let dd = directional_derivative(&q, 0, 0, 1, 0, 1);
        assert!(dd.value.abs() > 1e-6);
    }

    #[test]
    fn flat_directions_ternary_example_empty() {
        // The three row factors span the plane, so no flat direction exists:
        // the optimizer is rigid.
        assert!(flat_directions(&ternary_rank_one_example()).is_empty());
    }

    #[test]
    fn flat_directions_exist_when_t_small() {
        // Binary T over 3x3 inputs: a full-support stationary point leaves
        // room orthogonal to both factor families.
        let mut p = Array3::zeros((2, 3, 3));
        for x in 0..3 {
            for y in 0..3 {
                p[(0, x, y)] = 1.0 / 18.0;
                p[(1, x, y)] = 1.0 / 18.0;
            }
        }
        let d = JointDist3::validate(p).unwrap();
        let dirs = flat_directions(&d);
        assert!(!dirs.is_empty());
        // Each direction is orthogonal to the factors.
        let report = stationarity_test(&d);
        let factors = report.factors.unwrap();
        for dir in &dirs {
            for (v, w) in &factors {
                let dv: f64 = dir.v0.iter().zip(v).map(|(a, b)| a * b).sum();
                let dw: f64 = dir.w0.iter().zip(w).map(|(a, b)| a * b).sum();
                assert!(dv.abs() < 1e-9 && dw.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn flat_directions_constant_t() {
        // T constant: every kernel direction preserves Q(T|XY).
        let mut p = Array3::zeros((1, 2, 2));
        p.fill(0.25);
        let d = JointDist3::validate(p).unwrap();
        let dirs = flat_directions(&d);
        assert_eq!(dirs.len(), 1);
    }
}
