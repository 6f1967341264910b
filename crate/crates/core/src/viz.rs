//! Plot data for the 2x2x3 case.
//!
//! The domain of a 2x2x3 instance is a product of two planar factors, one
//! per `T` state, each living in the kernel-coordinate plane of its slice
//! (free states `x=1`, `y in {1,2}` against the anchor). The payload
//! carries both factor polygons as counterclockwise vertex lists plus the
//! projection of the optimizer set: a single point when the optimizer is
//! unique (interior or boundary), or a maximal optimal segment otherwise.
//! Rendering is left to external tooling.

use crate::deltap::{build_spec, CoordIndex, DeltaPSpec, GammaCoords};
use crate::distributions::JointDist3;
use crate::objective::cmi;
use crate::solver::{solve_with, SolveOptions, SolveReport, Uniqueness};
use ndarray::Array3;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VizError {
    #[error("shape {0:?} is not (2, 2, 3)")]
    WrongShape((usize, usize, usize)),
    #[error("solver failed: {0}")]
    Solve(#[from] crate::solver::SolveError),
}

/// One factor polytope in its kernel plane.
#[derive(Debug, Clone, Serialize)]
pub struct FactorPolygon {
    pub t: usize,
    /// Coordinate labels of the two plane axes.
    pub axes: [CoordIndex; 2],
    /// Extreme points in counterclockwise order.
    pub vertices: Vec<[f64; 2]>,
}

/// Projection of the optimizer set onto the two factor planes.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind")]
pub enum ArgmaxProjection {
    /// A single optimizer; one point per factor.
    Point { factors: [[f64; 2]; 2] },
    /// A maximal optimal segment; `factors[i]` holds its two endpoint
    /// projections in factor `i`.
    Segment { factors: [[[f64; 2]; 2]; 2] },
}

#[derive(Debug, Clone, Serialize)]
pub struct VizMetadata {
    pub case_label: String,
    pub ui_bits: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VizPayload223 {
    pub polygons: [FactorPolygon; 2],
    pub argmax_projection: ArgmaxProjection,
    pub metadata: VizMetadata,
}

/// Produces the factor polygons and optimizer projection of a 2x2x3
/// instance.
pub fn viz_223(p: &JointDist3, opts: &SolveOptions) -> Result<VizPayload223, VizError> {
    if p.dims() != (2, 2, 3) {
        return Err(VizError::WrongShape(p.dims()));
    }
    let spec = build_spec(p);
    let report = solve_with(p, opts)?;

    let polygons = [factor_polygon(&spec, 0), factor_polygon(&spec, 1)];

    let (argmax_projection, case_label) = match &report.uniqueness {
        Uniqueness::NonUnique { witnesses } => {
            let (w1, w2) = witnesses.as_ref();
            let (a, b) = maximal_optimal_segment(&report, w1, w2);
            (
                ArgmaxProjection::Segment {
                    factors: [
                        [project(&spec, &a, 0), project(&spec, &b, 0)],
                        [project(&spec, &a, 1), project(&spec, &b, 1)],
                    ],
                },
                "non-unique-segment".to_string(),
            )
        }
        verdict => {
            let g = &report.g_coords;
            let label = match (verdict, &report.location) {
                (Uniqueness::Unique, crate::deltap::Membership::Interior) => "unique-interior",
                (Uniqueness::Unique, _) => "unique-boundary",
                _ => "undetermined-point",
            };
            (
                ArgmaxProjection::Point {
                    factors: [project_coords(&spec, g, 0), project_coords(&spec, g, 1)],
                },
                label.to_string(),
            )
        }
    };

    Ok(VizPayload223 {
        polygons,
        argmax_projection,
        metadata: VizMetadata { case_label, ui_bits: report.ui_bits },
    })
}

/// Plane frame of a slice: its kernel coordinates in enumeration order.
fn slice_axes(spec: &DeltaPSpec, t: usize) -> Vec<(usize, CoordIndex)> {
    spec.coords
        .iter()
        .enumerate()
        .filter(|(_, c)| c.t == t)
        .map(|(i, c)| (i, *c))
        .collect()
}

fn project(spec: &DeltaPSpec, q: &JointDist3, t: usize) -> [f64; 2] {
    let g = spec.to_gamma(q).expect("optimal point stays in the domain");
    project_coords(spec, &g, t)
}

fn project_coords(spec: &DeltaPSpec, g: &GammaCoords, t: usize) -> [f64; 2] {
    let axes = slice_axes(spec, t);
    let mut out = [0.0; 2];
    for (k, (i, _)) in axes.iter().take(2).enumerate() {
        out[k] = g.values[*i];
    }
    out
}

/// The factor polytope of slice `t` as halfplane constraints
/// `base + n . g >= 0`, one per support atom of the slice.
fn slice_constraints(spec: &DeltaPSpec, t: usize) -> Vec<(f64, [f64; 2])> {
    let axes = slice_axes(spec, t);
    let q0 = spec.q0.tensor();
    let p_t = spec.p_t[t];
    let (x0, y0) = spec.anchors[t].expect("supported slice");
    let mut rows = Vec::new();
    for &x in &spec.x_support[t] {
        for &y in &spec.y_support[t] {
            let base = q0[(t, x, y)] / p_t;
            let mut normal = [0.0; 2];
            for (k, (_, c)) in axes.iter().take(2).enumerate() {
                // Coefficient of coordinate (c.x, c.y) on atom (x, y).
                let coef = if x == c.x && y == c.y {
                    1.0
                } else if x == x0 && y == y0 {
                    1.0
                } else if x == c.x && y == y0 {
                    -1.0
                } else if x == x0 && y == c.y {
                    -1.0
                } else {
                    0.0
                };
                normal[k] = coef;
            }
            rows.push((base, normal));
        }
    }
    rows
}

/// Vertices of the slice polytope: pairwise line intersections of the
/// constraint boundaries filtered by feasibility, in counterclockwise
/// order. Degenerate (segment or point) factors come out with 2 or 1
/// vertices.
fn factor_polygon(spec: &DeltaPSpec, t: usize) -> FactorPolygon {
    let axes = slice_axes(spec, t);
    let dim = axes.len().min(2);
    let constraints = slice_constraints(spec, t);
    let feasible =
        |pt: [f64; 2]| constraints.iter().all(|(b, n)| b + n[0] * pt[0] + n[1] * pt[1] >= -1e-10);

    let mut vertices: Vec<[f64; 2]> = Vec::new();
    match dim {
        0 => vertices.push([0.0, 0.0]),
        1 => {
            // One free coordinate: clip the line to the constraints.
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for (b, n) in &constraints {
                if n[0] > 0.0 {
                    lo = lo.max(-b / n[0]);
                } else if n[0] < 0.0 {
                    hi = hi.min(-b / n[0]);
                }
            }
            vertices.push([lo, 0.0]);
            if hi > lo {
                vertices.push([hi, 0.0]);
            }
        }
        _ => {
            for i in 0..constraints.len() {
                for j in i + 1..constraints.len() {
                    let (b1, n1) = constraints[i];
                    let (b2, n2) = constraints[j];
                    let det = n1[0] * n2[1] - n1[1] * n2[0];
                    if det.abs() < 1e-12 {
                        continue;
                    }
                    let u = (-b1 * n2[1] + b2 * n1[1]) / det;
                    let v = (-n1[0] * b2 + n2[0] * b1) / det;
                    let pt = [u, v];
                    if feasible(pt)
                        && !vertices.iter().any(|w| {
                            (w[0] - pt[0]).abs() < 1e-9 && (w[1] - pt[1]).abs() < 1e-9
                        })
                    {
                        vertices.push(pt);
                    }
                }
            }
            let cx = vertices.iter().map(|v| v[0]).sum::<f64>() / vertices.len().max(1) as f64;
            let cy = vertices.iter().map(|v| v[1]).sum::<f64>() / vertices.len().max(1) as f64;
            vertices.sort_by(|a, b| {
                let aa = (a[1] - cy).atan2(a[0] - cx);
                let bb = (b[1] - cy).atan2(b[0] - cx);
                aa.partial_cmp(&bb).unwrap()
            });
        }
    }
    FactorPolygon { t, axes: [axes[0].1, axes.get(1).map(|a| a.1).unwrap_or(axes[0].1)], vertices }
}

/// Extends the segment through two optimal witnesses to the feasible
/// extremes; by analyticity of the objective along the line, the whole
/// clipped segment is optimal (verified, with fallback to the witnesses).
fn maximal_optimal_segment(
    report: &SolveReport,
    w1: &JointDist3,
    w2: &JointDist3,
) -> (JointDist3, JointDist3) {
    let q1 = w1.tensor();
    let dir: Array3<f64> = w2.tensor() - q1;
    // Feasible parameter interval of q1 + s * dir.
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (q, d) in q1.iter().zip(dir.iter()) {
        if *d > 1e-15 {
            lo = lo.max(-q / d);
        } else if *d < -1e-15 {
            hi = hi.min(-q / d);
        }
    }
    let endpoint = |s: f64| JointDist3::from_computed(q1 + &(&dir * s));
    let (a, b) = (endpoint(lo), endpoint(hi));
    if (cmi(&a) - report.ui_bits).abs() <= 1e-8 && (cmi(&b) - report.ui_bits).abs() <= 1e-8 {
        (a, b)
    } else {
        (w1.clone(), w2.clone())
    }
}
