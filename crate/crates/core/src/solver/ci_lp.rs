//! Feasibility LP for conditional independence inside the domain.
//!
//! A domain member `Q` with `T` independent of `X` given `Y` has the form
//! `Q(t,x,y) = P(t,y) v(x|y)` for conditionals `v(x|y) >= 0`,
//! `sum_x v(x|y) = 1`, constrained linearly by the frozen `(T,X)` marginal:
//! `sum_y P(t,y) v(x|y) = P(t,x)`. Such a member makes the objective zero,
//! so feasibility decides `UI(T:X \ Y) = 0` for any alphabet sizes.
//!
//! Among all solutions the LP picks one maximizing the smallest conditional
//! over cells that matter for the domain support, so the witness is an
//! interior point of the domain whenever the solution set contains one.

use crate::distributions::{JointDist3, MarginalPair};
use microlp::{ComparisonOp, OptimizationDirection, Problem};
use ndarray::Array3;

/// Which conditional independence to search for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiDirection {
    /// `T` independent of `X` given `Y`.
    XGivenY,
    /// `T` independent of `Y` given `X`.
    YGivenX,
}

/// Searches the domain of `p` for a member with the requested conditional
/// independence. Returns a witness distribution, or `None` when infeasible
/// (a valid outcome, meaning the corresponding unique information is
/// positive).
pub fn ci_feasibility_lp(p: &JointDist3, direction: CiDirection) -> Option<JointDist3> {
    match direction {
        CiDirection::XGivenY => ci_lp_x_given_y(p),
        CiDirection::YGivenX => ci_lp_x_given_y(&p.swap_xy()).map(|q| q.swap_xy()),
    }
}

fn ci_lp_x_given_y(p: &JointDist3) -> Option<JointDist3> {
    let (nt, nx, ny) = p.dims();
    let m_ty = p.marginal(MarginalPair::TY);
    let m_tx = p.marginal(MarginalPair::TX);
    let p_y = p.y_marginal();
    let p_t = p.t_marginal();

    let supported_y: Vec<usize> = (0..ny).filter(|&y| p_y[y] > 0.0).collect();
    if supported_y.is_empty() {
        return None;
    }

    // A cell (x,y) feeds a domain-support atom iff some t has both
    // P(t,x) > 0 and P(t,y) > 0; only those cells count for interiority.
    let mut relevant = vec![vec![false; ny]; nx];
    for x in 0..nx {
        for y in 0..ny {
            relevant[x][y] = (0..nt)
                .any(|t| p_t[t] > 0.0 && m_tx.m[(t, x)] > 0.0 && m_ty.m[(t, y)] > 0.0);
        }
    }

    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let tau = problem.add_var(1.0, (0.0, 1.0));
    let mut vars = vec![vec![None; ny]; nx];
    for &y in &supported_y {
        for x in 0..nx {
            vars[x][y] = Some(problem.add_var(0.0, (0.0, 1.0)));
        }
    }

    // Conditionals per supported y form a simplex.
    for &y in &supported_y {
        let row: Vec<_> = (0..nx).map(|x| (vars[x][y].unwrap(), 1.0)).collect();
        problem.add_constraint(&row, ComparisonOp::Eq, 1.0);
    }
    // Frozen (T,X) marginal.
    for t in 0..nt {
        for x in 0..nx {
            let row: Vec<_> = supported_y
                .iter()
                .filter(|&&y| m_ty.m[(t, y)] > 0.0)
                .map(|&y| (vars[x][y].unwrap(), m_ty.m[(t, y)]))
                .collect();
            problem.add_constraint(&row, ComparisonOp::Eq, m_tx.m[(t, x)]);
        }
    }
    // Interior-seeking: tau below every relevant conditional.
    for &y in &supported_y {
        for x in 0..nx {
            if relevant[x][y] {
                problem.add_constraint(
                    &[(vars[x][y].unwrap(), 1.0), (tau, -1.0)],
                    ComparisonOp::Ge,
                    0.0,
                );
            }
        }
    }

    let solution = problem.solve().ok()?;
    let mut q = Array3::zeros((nt, nx, ny));
    for &y in &supported_y {
        for x in 0..nx {
            let v = solution[vars[x][y].unwrap()].max(0.0);
            for t in 0..nt {
                q[(t, x, y)] = m_ty.m[(t, y)] * v;
            }
        }
    }
    // The construction pins the (T,Y) marginal exactly; the (T,X) marginal
    // holds to LP accuracy. Guard against a solver accepting a sloppy
    // solution.
    let dev = q
        .sum_axis(ndarray::Axis(2))
        .iter()
        .zip(m_tx.m.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if dev > 1e-8 {
        return None;
    }
    Some(JointDist3::from_computed(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{ci_residual_x_given_y, ci_residual_y_given_x};
    use crate::objective::cmi;
    use crate::testutil::{blockwise_example, uniform222, xor};

    #[test]
    fn already_independent_input_is_feasible() {
        // Uniform product: both directions hold at the input itself.
        let p = uniform222();
        for dir in [CiDirection::XGivenY, CiDirection::YGivenX] {
            let w = ci_feasibility_lp(&p, dir).expect("feasible");
            assert!(cmi(&w) < 1e-10);
        }
    }

    #[test]
    fn blockwise_feasible_both_directions() {
        let p = blockwise_example();
        let wx = ci_feasibility_lp(&p, CiDirection::XGivenY).expect("X direction");
        let wy = ci_feasibility_lp(&p, CiDirection::YGivenX).expect("Y direction");
        assert!(ci_residual_x_given_y(&wx) < 1e-9);
        assert!(ci_residual_y_given_x(&wy) < 1e-9);
        assert!(cmi(&wx) < 1e-9);
    }

    #[test]
    fn xor_feasible_via_uniform_member() {
        // The domain of xor contains the uniform distribution, which makes T
        // independent of everything: feasible in both directions, UI = 0.
        let p = xor();
        for dir in [CiDirection::XGivenY, CiDirection::YGivenX] {
            let w = ci_feasibility_lp(&p, dir).expect("feasible");
            assert!(cmi(&w) < 1e-9);
        }
    }

    #[test]
    fn positive_ui_instances_are_infeasible() {
        // The pinned-domain example carries conditional dependence that no
        // domain member can remove.
        let p = crate::testutil::binary_singleton_example();
        assert!(ci_feasibility_lp(&p, CiDirection::XGivenY).is_none());
        assert!(ci_feasibility_lp(&p, CiDirection::YGivenX).is_none());
        // Same for a near-singleton instance whose narrow rectangle cannot
        // reach independence.
        let p = JointDist3::validate(crate::testutil::all_binary_tensor(
            0.5, 0.999, 0.5, 0.5, 0.999, 0.0, 0.0,
        ))
        .unwrap();
        assert!(ci_feasibility_lp(&p, CiDirection::XGivenY).is_none());
        assert!(ci_feasibility_lp(&p, CiDirection::YGivenX).is_none());
    }

    #[test]
    fn witness_stays_in_domain() {
        let p = blockwise_example();
        let spec = crate::deltap::build_spec(&p);
        let w = ci_feasibility_lp(&p, CiDirection::XGivenY).unwrap();
        assert!(spec.to_gamma(&w).is_ok());
    }

    #[test]
    fn witness_prefers_interior() {
        // A full-support instance where independence is feasible: the
        // witness should put mass on every domain-support atom.
        let p = uniform222();
        let spec = crate::deltap::build_spec(&p);
        let w = ci_feasibility_lp(&p, CiDirection::XGivenY).unwrap();
        assert!(matches!(
            spec.membership_of_tensor(w.tensor()),
            crate::deltap::Membership::Interior
        ));
    }
}
