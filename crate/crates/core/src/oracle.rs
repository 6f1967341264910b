//! Independent brute-force minimizers used to validate the solvers at desk
//! scale.
//!
//! The grid oracle exhaustively evaluates the objective on a coordinate grid
//! over (a bounding box of) the domain, then repeatedly shrinks the grid
//! around the incumbent. Convexity of the objective makes coarse-to-fine
//! refinement sound: the result upper-bounds the true minimum by a gap that
//! shrinks with the final cell size. The oracle shares nothing with the
//! solver paths it checks beyond the objective definition itself.

use crate::deltap::{build_spec, DeltaPSpec, GammaCoords, OUTSIDE_TOL};
use crate::distributions::JointDist3;
use crate::objective::cmi_tensor;
use crate::solver::{self, SolveOptions, SolvePath};
use thiserror::Error;

/// Cap on evaluated nodes per refinement round.
const NODE_GUARD: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("domain dimension {0} exceeds the grid oracle limit of 4")]
    DimensionTooLarge(usize),
    #[error("grid of {0} nodes exceeds the node guard")]
    TooManyNodes(usize),
    #[error("solver paths disagree: {0}")]
    InconsistencyDetected(String),
}

/// Grid resolution and refinement schedule.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    /// Nodes per coordinate; at least 3, odd keeps the incumbent on-grid.
    pub resolution: usize,
    /// Rounds of shrinking around the incumbent after the initial pass.
    pub refinements: usize,
    /// Window shrink factor per round.
    pub shrink: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { resolution: 21, refinements: 3, shrink: 5.0 }
    }
}

/// Conservative per-coordinate bounds containing the domain.
///
/// The lower bound of a coordinate comes from its private atom; the upper
/// bound from the anchor row and column atoms, relaxed by the other
/// coordinates' lower bounds.
fn bounding_box(spec: &DeltaPSpec) -> Vec<(f64, f64)> {
    let q0 = spec.q0.tensor();
    let lows: Vec<f64> = spec
        .coords
        .iter()
        .map(|c| -q0[(c.t, c.x, c.y)] / spec.p_t[c.t])
        .collect();
    spec.coords
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (x0, y0) = spec.anchors[c.t].unwrap();
            let mut row_slack = q0[(c.t, c.x, y0)] / spec.p_t[c.t];
            let mut col_slack = q0[(c.t, x0, c.y)] / spec.p_t[c.t];
            for (j, cj) in spec.coords.iter().enumerate() {
                if j == i || cj.t != c.t {
                    continue;
                }
                if cj.x == c.x {
                    row_slack -= lows[j];
                }
                if cj.y == c.y {
                    col_slack -= lows[j];
                }
            }
            (lows[i], row_slack.min(col_slack).max(lows[i]))
        })
        .collect()
}

/// Exhaustive grid minimization of the objective over the domain of `p`.
///
/// Only applicable to domains of dimension at most 4. Returns the best
/// objective value found and its coordinates.
pub fn grid_min(p: &JointDist3, grid: &GridSpec) -> Result<(f64, GammaCoords), OracleError> {
    let spec = build_spec(p);
    grid_min_spec(&spec, grid)
}

pub fn grid_min_spec(
    spec: &DeltaPSpec,
    grid: &GridSpec,
) -> Result<(f64, GammaCoords), OracleError> {
    let dim = spec.dim;
    if dim > 4 {
        return Err(OracleError::DimensionTooLarge(dim));
    }
    assert!(grid.resolution >= 3, "grid resolution must be at least 3");
    if dim == 0 {
        return Ok((cmi_tensor(spec.q0.tensor()), GammaCoords::zeros(0)));
    }
    let nodes = grid.resolution.pow(dim as u32);
    if nodes > NODE_GUARD {
        return Err(OracleError::TooManyNodes(nodes));
    }

    let outer = bounding_box(spec);
    let mut window = outer.clone();
    let mut best_g = GammaCoords::zeros(dim);
    let mut q = spec.from_gamma(&best_g);
    let mut best_val = cmi_tensor(&q);

    let mut idx = vec![0usize; dim];
    for round in 0..=grid.refinements {
        let steps: Vec<f64> = window
            .iter()
            .map(|(lo, hi)| (hi - lo) / (grid.resolution - 1) as f64)
            .collect();
        idx.iter_mut().for_each(|i| *i = 0);
        let mut g = GammaCoords::zeros(dim);
        'nodes: loop {
            for k in 0..dim {
                g.values[k] = window[k].0 + steps[k] * idx[k] as f64;
            }
            q = spec.from_gamma(&g);
            let feasible = spec
                .support
                .iter()
                .all(|&(t, x, y)| q[(t, x, y)] >= -OUTSIDE_TOL);
            if feasible {
                let val = cmi_tensor(&q);
                if val < best_val {
                    best_val = val;
                    best_g = g.clone();
                }
            }
            // odometer over the product grid
            for k in 0..dim {
                idx[k] += 1;
                if idx[k] < grid.resolution {
                    continue 'nodes;
                }
                idx[k] = 0;
            }
            break;
        }
        if round < grid.refinements {
            for k in 0..dim {
                let width = (window[k].1 - window[k].0) / grid.shrink;
                let lo = (best_g.values[k] - width / 2.0).max(outer[k].0);
                let hi = (best_g.values[k] + width / 2.0).min(outer[k].1);
                window[k] = (lo, hi.max(lo));
            }
        }
    }
    Ok((best_val, best_g))
}

/// Report of a consistency sweep over every applicable solver path.
#[derive(Debug, Clone)]
pub struct CrossCheckReport {
    /// `(path name, objective value)` per route that ran.
    pub values: Vec<(String, f64)>,
    pub max_spread: f64,
}

/// Runs every applicable solver route plus the grid oracle on `p` and
/// requires the objective values to agree within `1e-6` and the optimizers
/// to share conditionals `Q(T|XY)` on commonly defined cells.
pub fn pairwise_cross_check(p: &JointDist3) -> Result<CrossCheckReport, OracleError> {
    let spec = build_spec(p);
    if spec.dim > 4 {
        return Err(OracleError::DimensionTooLarge(spec.dim));
    }
    let opts = SolveOptions::default();
    let mut values: Vec<(String, f64)> = Vec::new();
    let mut optimizers: Vec<(String, JointDist3)> = Vec::new();

    let report = solver::solve_with(p, &opts).map_err(|e| {
        OracleError::InconsistencyDetected(format!("dispatcher failed: {e}"))
    })?;
    values.push((format!("dispatch:{:?}", report.path), report.ui_bits));
    optimizers.push(("dispatch".into(), report.optimizer.clone()));

    if report.path != SolvePath::SingletonDomain {
        let generic = solver::solve_generic(p, &opts).map_err(|e| {
            OracleError::InconsistencyDetected(format!("generic descent failed: {e}"))
        })?;
        values.push(("generic".into(), generic.ui_bits));
        optimizers.push(("generic".into(), generic.optimizer.clone()));

        if let Ok(closed) = solver::solve_all_binary(p) {
            values.push(("all-binary".into(), closed.ui_bits));
            optimizers.push(("all-binary".into(), closed.optimizer.clone()));
        }
    }

    let deep = GridSpec { resolution: 21, refinements: 8, shrink: 4.0 };
    let (grid_val, _) = grid_min_spec(&spec, &deep)?;
    values.push(("grid".into(), grid_val));

    let lo = values.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    let hi = values.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    let max_spread = hi - lo;
    if max_spread > 1e-6 {
        return Err(OracleError::InconsistencyDetected(format!(
            "objective spread {max_spread:e}: {values:?}"
        )));
    }

    // Any two optimizers must agree on the conditional of T given (X,Y)
    // wherever both define it.
    for i in 0..optimizers.len() {
        for j in i + 1..optimizers.len() {
            let a = optimizers[i].1.conditional_t_given_xy();
            let b = optimizers[j].1.conditional_t_given_xy();
            let (nt, nx, ny) = optimizers[i].1.dims();
            for x in 0..nx {
                for y in 0..ny {
                    if a.defined[(x, y)] && b.defined[(x, y)] {
                        for t in 0..nt {
                            let diff = (a.q[(t, x, y)] - b.q[(t, x, y)]).abs();
                            if diff > 1e-6 {
                                return Err(OracleError::InconsistencyDetected(format!(
                                    "{} and {} disagree on Q({t}|{x},{y}) by {diff:e}",
                                    optimizers[i].0, optimizers[j].0
                                )));
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(CrossCheckReport { values, max_spread })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{supp_line_example, uniform222, xor};

    #[test]
    fn grid_min_uniform_is_zero() {
        let (val, _) = grid_min(&uniform222(), &GridSpec::default()).unwrap();
        assert!(val < 1e-6, "{val}");
    }

    #[test]
    fn grid_min_xor_is_zero() {
        // The anchor of the xor instance is the uniform distribution, which
        // already has zero conditional mutual information.
        let (val, _) = grid_min(&xor(), &GridSpec::default()).unwrap();
        assert!(val < 1e-9, "{val}");
    }

    #[test]
    fn grid_min_matches_closed_form_on_boundary_instance() {
        let p = JointDist3::validate(crate::testutil::all_binary_tensor(
            0.5, 0.999, 0.5, 0.5, 0.999, 0.0, 0.0,
        ))
        .unwrap();
        let closed = crate::solver::solve_all_binary(&p).unwrap();
        let deep = GridSpec { resolution: 21, refinements: 6, shrink: 4.0 };
        let (val, _) = grid_min(&p, &deep).unwrap();
        assert!(closed.ui_bits > 0.01);
        assert!((val - closed.ui_bits).abs() < 1e-6, "grid {val} vs closed {}", closed.ui_bits);
    }

    #[test]
    fn grid_min_monotone_under_refinement() {
        let p = supp_line_example();
        let mut prev = f64::INFINITY;
        for r in 0..4 {
            let spec = GridSpec { resolution: 21, refinements: r, shrink: 5.0 };
            let (val, _) = grid_min(&p, &spec).unwrap();
            assert!(val <= prev + 1e-12);
            prev = val;
        }
    }

    #[test]
    fn grid_min_line_example_at_center() {
        let (val, g) = grid_min(&supp_line_example(), &GridSpec::default()).unwrap();
        // The optimizer sits at the midpoint of the line, which is the
        // starting incumbent; the value is I(T:X|Y) = 0 there.
        assert!(val < 1e-9);
        assert!(g.values[0].abs() < 1e-9);
    }

    #[test]
    fn dimension_guard() {
        let mut p = ndarray::Array3::zeros((2, 4, 4));
        p.fill(1.0 / 32.0);
        let d = JointDist3::validate(p).unwrap();
        match grid_min(&d, &GridSpec::default()) {
            Err(OracleError::DimensionTooLarge(18)) => {}
            other => panic!("expected DimensionTooLarge(18), got {other:?}"),
        }
    }
}
