//! Closed-form solver for all-binary instances.
//!
//! With `T`, `X`, `Y` binary and both `T` states supported, the domain is a
//! rectangle in the two kernel coordinates `(g1, g2)` (possibly degenerate
//! to a segment or a point). Writing
//!
//! ```text
//! a = P(t=0), b = P(x=0|t=0), c = P(x=0|t=1), d = P(y=0|t=0), e = P(y=0|t=1)
//! ```
//!
//! there are five cases:
//!
//! 1. `b = c` and `d = e`: the optimizer set is the whole diagonal of the
//!    rectangle; the anchor is reported as the canonical optimizer.
//! 2. the interior stationary point with `T` independent of `X` given `Y`,
//!    `g1 = d(1-d)(b-c)/(d-e)`, `g2 = e(1-e)(b-c)/(d-e)`, when it falls
//!    inside the rectangle;
//! 3. mirror image with the roles of the `X` and `Y` parameters swapped:
//!    `g1 = b(1-b)(d-e)/(b-c)`, `g2 = c(1-c)(d-e)/(b-c)`;
//! 4./5. otherwise the optimum sits at the rectangle corner `(min,min)` or
//!    `(max,max)`; both are evaluated and the better one returned.
//!
//! When exactly one slice degenerates the domain is a segment; the interior
//! condition reduces to equating the two surviving conditionals of the
//! frozen slice's support cells, which is linear in the free coordinate.
//! The case precedence is 1, 2, 3, then the corner comparison.

use super::{
    finalize_report, SolveError, SolvePath, SolveReport, Uniqueness, WITNESS_OBJ_TOL,
    WITNESS_SEP_TOL,
};
use crate::deltap::{build_spec, BoxBounds222, DeltaPSpec, GammaCoords};
use crate::distributions::JointDist3;
use crate::objective::cmi_tensor;
use serde::Serialize;

/// Parameters treated as equal below this difference.
const PARAM_TOL: f64 = 1e-12;
/// Slack on rectangle membership of a closed-form candidate.
const BOX_TOL: f64 = 1e-12;

/// The five-parameter description of an all-binary distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AllBinaryParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

impl AllBinaryParams {
    /// Extracts the parameters; fails unless all alphabets are binary and
    /// both `T` states carry mass.
    pub fn from_dist(p: &JointDist3) -> Result<Self, SolveError> {
        if p.dims() != (2, 2, 2) {
            return Err(SolveError::NotAllBinary);
        }
        let pt = p.t_marginal();
        if pt[0] <= 0.0 || pt[1] <= 0.0 {
            return Err(SolveError::NotAllBinary);
        }
        let tx = p.marginal(crate::distributions::MarginalPair::TX);
        let ty = p.marginal(crate::distributions::MarginalPair::TY);
        Ok(AllBinaryParams {
            a: pt[0],
            b: tx.m[(0, 0)] / pt[0],
            c: tx.m[(1, 0)] / pt[1],
            d: ty.m[(0, 0)] / pt[0],
            e: ty.m[(1, 0)] / pt[1],
        })
    }
}

/// Which of the five structural cases an instance falls into; `None` when
/// the domain is a single point and the case split does not apply.
pub fn classify_all_binary(p: &JointDist3) -> Result<Option<u8>, SolveError> {
    Ok(solve_impl(p)?.1)
}

/// Closed-form solution of an all-binary instance.
pub fn solve_all_binary(p: &JointDist3) -> Result<SolveReport, SolveError> {
    Ok(solve_impl(p)?.0)
}

fn in_box(g1: f64, g2: f64, b: &BoxBounds222) -> bool {
    g1 >= b.g1_min - BOX_TOL
        && g1 <= b.g1_max + BOX_TOL
        && g2 >= b.g2_min - BOX_TOL
        && g2 <= b.g2_max + BOX_TOL
}

fn clamp(v: f64, lo: f64, hi: f64) -> f64 {
    v.max(lo).min(hi)
}

fn solve_impl(p: &JointDist3) -> Result<(SolveReport, Option<u8>), SolveError> {
    let params = AllBinaryParams::from_dist(p)?;
    let spec = build_spec(p);
    let bounds = spec.bounds_222().expect("all-binary instance");
    let AllBinaryParams { a: _, b, c, d, e } = params;

    if spec.dim == 0 {
        let report =
            finalize_report(&spec, p.clone(), SolvePath::SingletonDomain, Uniqueness::Unique, 0);
        return Ok((report, None));
    }

    let w1 = bounds.g1_max - bounds.g1_min;
    let w2 = bounds.g2_max - bounds.g2_min;
    let b_eq_c = (b - c).abs() <= PARAM_TOL;
    let d_eq_e = (d - e).abs() <= PARAM_TOL;

    if w1 > 0.0 && w2 > 0.0 {
        // The rectangle. Case 1: matching conditionals make the whole
        // diagonal optimal.
        if b_eq_c && d_eq_e {
            let report = diagonal_report(&spec, &bounds);
            return Ok((report, Some(1)));
        }
        if !d_eq_e {
            let g1 = d * (1.0 - d) * (b - c) / (d - e);
            let g2 = e * (1.0 - e) * (b - c) / (d - e);
            if in_box(g1, g2, &bounds) {
                let report = candidate_report(&spec, &bounds, g1, g2);
                return Ok((report, Some(2)));
            }
        }
        if !b_eq_c {
            let g1 = b * (1.0 - b) * (d - e) / (b - c);
            let g2 = c * (1.0 - c) * (d - e) / (b - c);
            if in_box(g1, g2, &bounds) {
                let report = candidate_report(&spec, &bounds, g1, g2);
                return Ok((report, Some(3)));
            }
        }
        return Ok(corner_report(&spec, &bounds));
    }

    // Exactly one slice is free: the domain is a segment. An interior
    // optimizer must equate the conditionals of T on the two support cells
    // of the frozen slice, which is linear in the free coordinate.
    let free_t = if w1 > 0.0 { 0 } else { 1 };
    let frozen_t = 1 - free_t;
    let cells: Vec<(usize, usize)> = spec.x_support[frozen_t]
        .iter()
        .flat_map(|&x| spec.y_support[frozen_t].iter().map(move |&y| (x, y)))
        .collect();
    if cells.len() == 2 {
        let q0 = spec.q0.tensor();
        let sign = |(x, y): (usize, usize)| if x == y { 1.0 } else { -1.0 };
        let (c1, c2) = (cells[0], cells[1]);
        let (f1, f2) = (q0[(frozen_t, c1.0, c1.1)], q0[(frozen_t, c2.0, c2.1)]);
        let (a1, a2) = (q0[(free_t, c1.0, c1.1)], q0[(free_t, c2.0, c2.1)]);
        let pt = spec.p_t[free_t];
        // Solve (a1 + pt*s1*g) f2 = (a2 + pt*s2*g) f1 for g.
        let denom = pt * (sign(c1) * f2 - sign(c2) * f1);
        debug_assert!(denom != 0.0);
        let g = (a2 * f1 - a1 * f2) / denom;
        let (lo, hi) = if free_t == 0 {
            (bounds.g1_min, bounds.g1_max)
        } else {
            (bounds.g2_min, bounds.g2_max)
        };
        if g >= lo - BOX_TOL && g <= hi + BOX_TOL {
            let (g1, g2) = if free_t == 0 { (clamp(g, lo, hi), 0.0) } else { (0.0, clamp(g, lo, hi)) };
            let report = candidate_report(&spec, &bounds, g1, g2);
            // The frozen support cells share a column when X is pinned
            // there, forcing T independent of Y given X, and vice versa.
            let case = if c1.0 == c2.0 { 3 } else { 2 };
            return Ok((report, Some(case)));
        }
    }
    Ok(corner_report(&spec, &bounds))
}

/// Kernel coordinates of the slice pair `(g1, g2)`: degenerate slices
/// contribute no coordinate, so the vector is assembled per enumerated
/// coordinate.
fn coords_for(spec: &DeltaPSpec, g1: f64, g2: f64) -> GammaCoords {
    GammaCoords {
        values: spec.coords.iter().map(|c| if c.t == 0 { g1 } else { g2 }).collect(),
    }
}

/// Case 1: anchor as canonical optimizer, corner pair as witnesses.
fn diagonal_report(spec: &DeltaPSpec, bounds: &BoxBounds222) -> SolveReport {
    let q_lo = spec.from_gamma(&coords_for(spec, bounds.g1_min, bounds.g2_min));
    let q_hi = spec.from_gamma(&coords_for(spec, bounds.g1_max, bounds.g2_max));
    let lo = JointDist3::from_computed(q_lo);
    let hi = JointDist3::from_computed(q_hi);
    let anchor = spec.q0.clone();
    let separated = lo.max_abs_diff(&hi) >= WITNESS_SEP_TOL;
    let equal_obj =
        (cmi_tensor(lo.tensor()) - cmi_tensor(hi.tensor())).abs() <= WITNESS_OBJ_TOL;
    let uniqueness = if separated && equal_obj {
        Uniqueness::NonUnique { witnesses: Box::new((lo, hi)) }
    } else {
        Uniqueness::Undetermined
    };
    finalize_report(spec, anchor, SolvePath::ClosedForm222, uniqueness, 0)
}

/// Cases 2/3: an accepted stationary candidate, unique by the case split.
fn candidate_report(spec: &DeltaPSpec, bounds: &BoxBounds222, g1: f64, g2: f64) -> SolveReport {
    let g = coords_for(
        spec,
        clamp(g1, bounds.g1_min, bounds.g1_max),
        clamp(g2, bounds.g2_min, bounds.g2_max),
    );
    let q = JointDist3::from_computed(spec.from_gamma(&g));
    finalize_report(spec, q, SolvePath::ClosedForm222, Uniqueness::Unique, 0)
}

/// Cases 4/5: compare the two admissible corners.
fn corner_report(spec: &DeltaPSpec, bounds: &BoxBounds222) -> (SolveReport, Option<u8>) {
    let q_lo = spec.from_gamma(&coords_for(spec, bounds.g1_min, bounds.g2_min));
    let q_hi = spec.from_gamma(&coords_for(spec, bounds.g1_max, bounds.g2_max));
    let (v_lo, v_hi) = (cmi_tensor(&q_lo), cmi_tensor(&q_hi));
    let (q, case) = if v_lo <= v_hi { (q_lo, 4) } else { (q_hi, 5) };
    let report = finalize_report(
        spec,
        JointDist3::from_computed(q),
        SolvePath::ClosedForm222,
        Uniqueness::Unique,
        0,
    );
    (report, Some(case))
}

// Degenerate-domain corner coordinates coincide in the frozen slice, so the
// corner comparison also covers segments whose interior condition has no
// admissible solution.

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deltap::Membership;
    use crate::objective::cmi;
    use crate::solver::{CiFlags, SolvePath};
    use crate::testutil::{all_binary_tensor, supp_line_example, uniform222};

    fn solve_params(a: f64, b: f64, c: f64, d: f64, e: f64) -> (SolveReport, Option<u8>) {
        let p = JointDist3::validate(all_binary_tensor(a, b, c, d, e, 0.0, 0.0)).unwrap();
        solve_impl(&p).unwrap()
    }

    #[test]
    fn interior_ci_candidate_case2() {
        let (report, case) = solve_params(0.5, 0.6, 0.4, 0.7, 0.3);
        assert_eq!(case, Some(2));
        assert_eq!(report.path, SolvePath::ClosedForm222);
        // Candidate evaluates to (0.105, 0.105) and sits inside the box.
        assert!((report.g_coords.values[0] - 0.105).abs() < 1e-12);
        assert!((report.g_coords.values[1] - 0.105).abs() < 1e-12);
        assert!(matches!(report.location, Membership::Interior));
        assert!(report.ui_bits.abs() < 1e-10);
        let CiFlags { x_given_y, .. } = report.ci_flags;
        assert!(x_given_y);
        assert!(matches!(report.uniqueness, Uniqueness::Unique));
    }

    #[test]
    fn matching_conditionals_give_diagonal_case1() {
        let (report, case) = solve_params(0.5, 0.5, 0.5, 0.5, 0.5);
        assert_eq!(case, Some(1));
        assert!(report.ui_bits.abs() < 1e-12);
        match &report.uniqueness {
            Uniqueness::NonUnique { witnesses } => {
                let (lo, hi) = witnesses.as_ref();
                assert!(lo.max_abs_diff(hi) > 0.1);
                assert!((cmi(lo) - cmi(hi)).abs() < 1e-10);
            }
            other => panic!("expected NonUnique, got {other:?}"),
        }
        // The canonical optimizer is the anchor itself.
        assert!(report.optimizer.max_abs_diff(&uniform222()) < 1e-15);
    }

    #[test]
    fn line_example_stationary_at_zero() {
        let p = supp_line_example();
        let (report, case) = solve_impl(&p).unwrap();
        assert_eq!(case, Some(2));
        assert!(report.g_coords.values[0].abs() < 1e-14);
        assert!(report.optimizer.max_abs_diff(&p) < 1e-14);
        assert!(report.ui_bits.abs() < 1e-12);
        assert!(report.ci_flags.x_given_y);
        assert!(matches!(report.uniqueness, Uniqueness::Unique));
    }

    #[test]
    fn singleton_instance_reports_none() {
        let p = crate::testutil::binary_singleton_example();
        let (report, case) = solve_impl(&p).unwrap();
        assert_eq!(case, None);
        assert_eq!(report.path, SolvePath::SingletonDomain);
    }

    #[test]
    fn corner_case_when_no_candidate_admissible() {
        // Near-singleton parameters push both stationary candidates out of
        // the narrow rectangle; the optimum sits at a corner with positive
        // objective.
        let (report, case) = solve_params(0.5, 0.999, 0.5, 0.5, 0.999);
        assert!(case == Some(4) || case == Some(5), "case {case:?}");
        assert!(matches!(report.location, Membership::Boundary(_)));
        assert!(report.ui_bits > 0.01);
        assert!(matches!(report.uniqueness, Uniqueness::Unique));
    }
}
