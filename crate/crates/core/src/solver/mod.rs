//! Solvers for the unique-information optimization problem and the
//! resulting bivariate decomposition.
//!
//! The dispatcher picks the cheapest sound route:
//!
//! 1. a zero-dimensional domain is a singleton, the input is its own
//!    optimizer;
//! 2. all-binary instances have a closed form;
//! 3. if some domain member makes `T` conditionally independent of `X`
//!    given `Y` (or of `Y` given `X`), that member minimizes the common
//!    inner objective and is found by a feasibility LP;
//! 4. otherwise, projected descent in kernel coordinates.
//!
//! Every returned optimizer satisfies the same contract: it lies in the
//! domain, its objective value is the reported one, and the report records
//! the route, the location relative to the boundary, a uniqueness verdict
//! with witnesses when non-uniqueness is certified, and the conditional
//! independence flags at the optimizer.

mod all_binary;
mod ci_lp;
mod descent;

pub use all_binary::{classify_all_binary, solve_all_binary, AllBinaryParams};
pub use ci_lp::{ci_feasibility_lp, CiDirection};
pub use descent::solve_generic;

use crate::deltap::{build_spec, DeltaPSpec, GammaCoords, Membership};
use crate::diagnostics::{ci_residual_x_given_y, ci_residual_y_given_x};
use crate::distributions::JointDist3;
use crate::objective::{
    cmi, cmi_tensor, directional_derivative_raw, flat_directions_of, stationarity_test,
};
use ndarray::{Array3, Axis};
use serde::Serialize;
use thiserror::Error;

/// CI residual threshold at solver outputs.
pub const CI_SOLVER_TOL: f64 = 1e-7;
/// Two optimizers certifying non-uniqueness must agree in objective to this.
pub const WITNESS_OBJ_TOL: f64 = 1e-8;
/// ... and differ at least this much in max norm.
pub const WITNESS_SEP_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("not an all-binary instance with both T states supported")]
    NotAllBinary,
    #[error("descent exceeded {iterations} iterations (KKT residual {residual:e})")]
    MaxIterationsExceeded {
        iterations: usize,
        residual: f64,
        /// Best solution found before giving up.
        report: Box<SolveReport>,
    },
}

/// Which route produced the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolvePath {
    ClosedForm222,
    CiLpX,
    CiLpY,
    GenericDescent,
    SingletonDomain,
}

/// Uniqueness verdict for the optimizer.
///
/// `Unique` is only reported on the strength of a structural certificate:
/// the all-binary non-degeneracy condition, or an interior optimizer with
/// no affine directions. `NonUnique` always carries a verified pair of
/// optimizers. Anything else is `Undetermined`.
#[derive(Debug, Clone, Serialize)]
pub enum Uniqueness {
    Unique,
    NonUnique { witnesses: Box<(JointDist3, JointDist3)> },
    Undetermined,
}

/// Conditional independence at the optimizer, within [`CI_SOLVER_TOL`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CiFlags {
    /// `T` independent of `X` given `Y`.
    pub x_given_y: bool,
    /// `T` independent of `Y` given `X`.
    pub y_given_x: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    /// Minimum of `I_Q(T:X|Y)` over the domain, in bits.
    pub ui_bits: f64,
    pub optimizer: JointDist3,
    pub g_coords: GammaCoords,
    pub path: SolvePath,
    pub location: Membership,
    pub uniqueness: Uniqueness,
    pub ci_flags: CiFlags,
    pub iterations: usize,
    /// KKT residual at the optimizer: the largest one-sided descent rate
    /// still available over the generating directions (0 when stationary).
    pub final_grad_norm: f64,
}

/// Tunables shared by the solver routes.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Master seed for restart generation.
    pub seed: u64,
    /// Random feasible starts for generic descent, besides the anchor.
    pub restarts: usize,
    pub max_iter: usize,
    /// Convergence threshold on directional derivatives.
    pub grad_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { seed: 0, restarts: 8, max_iter: 10_000, grad_tol: 1e-8 }
    }
}

/// The bivariate information decomposition induced by the unique
/// information measure.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PidDecomposition {
    /// Unique information of `X` about `T` with respect to `Y`.
    pub ui_x: f64,
    /// Unique information of `Y` about `T` with respect to `X`.
    pub ui_y: f64,
    pub shared: f64,
    pub synergy: f64,
    pub mi_tx: f64,
    pub mi_ty: f64,
    pub mi_txy: f64,
}

/// Enumerates the generating directions `(t, x, x', y, y')` of the domain
/// kernel, with `x < x'` and `y < y'` over each slice's support.
pub(crate) fn generating_directions(spec: &DeltaPSpec) -> Vec<(usize, usize, usize, usize, usize)> {
    let mut dirs = Vec::new();
    for &t in &spec.t_support {
        let xs = &spec.x_support[t];
        let ys = &spec.y_support[t];
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                for k in 0..ys.len() {
                    for l in k + 1..ys.len() {
                        dirs.push((t, xs[i], xs[j], ys[k], ys[l]));
                    }
                }
            }
        }
    }
    dirs
}

/// KKT residual of a point: the most negative feasible one-sided
/// directional derivative, sign-flipped; zero at a constrained minimizer.
///
/// A one-sided move is feasible when both atoms it decreases are positive.
pub(crate) fn kkt_residual(spec: &DeltaPSpec, q: &Array3<f64>) -> f64 {
    let m_xy = q.sum_axis(Axis(0));
    let mut worst = 0.0f64;
    for &(t, x, x2, y, y2) in &generating_directions(spec) {
        // +gamma decreases (t,x,y') and (t,x',y); -gamma the other pair.
        if q[(t, x, y2)] > 0.0 && q[(t, x2, y)] > 0.0 {
            let dd = directional_derivative_raw(q, &m_xy, t, x, x2, y, y2);
            if dd.value < 0.0 {
                worst = worst.max(-dd.value);
            }
        }
        if q[(t, x, y)] > 0.0 && q[(t, x2, y2)] > 0.0 {
            let dd = directional_derivative_raw(q, &m_xy, t, x, x2, y2, y);
            if dd.value < 0.0 {
                worst = worst.max(-dd.value);
            }
        }
    }
    worst
}

/// Assembles a report for an optimizer tensor produced by any route.
pub(crate) fn finalize_report(
    spec: &DeltaPSpec,
    optimizer: JointDist3,
    path: SolvePath,
    uniqueness: Uniqueness,
    iterations: usize,
) -> SolveReport {
    let ui_bits = cmi(&optimizer);
    let g_coords = spec
        .to_gamma(&optimizer)
        .expect("optimizer drifted out of the domain");
    let location = spec.membership_of_tensor(optimizer.tensor());
    debug_assert!(
        !matches!(location, Membership::Outside),
        "optimizer classified outside the domain"
    );
    let ci_flags = CiFlags {
        x_given_y: ci_residual_x_given_y(&optimizer) <= CI_SOLVER_TOL,
        y_given_x: ci_residual_y_given_x(&optimizer) <= CI_SOLVER_TOL,
    };
    let final_grad_norm = kkt_residual(spec, optimizer.tensor());
    SolveReport {
        ui_bits,
        optimizer,
        g_coords,
        path,
        location,
        uniqueness,
        ci_flags,
        iterations,
        final_grad_norm,
    }
}

/// Uniqueness verdict for an optimizer without an all-binary certificate:
/// an interior stationary point with no affine direction is unique; an
/// interior point with affine directions yields a constructed second
/// optimizer; everything else is undetermined.
pub(crate) fn assess_uniqueness(spec: &DeltaPSpec, optimizer: &JointDist3, ui: f64) -> Uniqueness {
    if !matches!(spec.membership_of_tensor(optimizer.tensor()), Membership::Interior) {
        return Uniqueness::Undetermined;
    }
    let report = stationarity_test(optimizer);
    if !report.stationary {
        return Uniqueness::Undetermined;
    }
    let flats = flat_directions_of(&report);
    if flats.is_empty() {
        return Uniqueness::Unique;
    }
    for dir in &flats {
        if let Some(witness) = flat_move_witness(optimizer, &dir.v0, &dir.w0) {
            if witness.max_abs_diff(optimizer) >= WITNESS_SEP_TOL
                && (cmi(&witness) - ui).abs() <= WITNESS_OBJ_TOL
            {
                return Uniqueness::NonUnique {
                    witnesses: Box::new((optimizer.clone(), witness)),
                };
            }
        }
    }
    Uniqueness::Undetermined
}

/// Second optimizer obtained by perturbing the pair distribution along
/// `v0 w0^T` while keeping the conditionals of `T`:
/// `Q'(t,x,y) = Q(t|x,y) (Q(x,y) + eps v0(x) w0(y))`.
///
/// Requires every pair cell defined (full-support interior optimizer);
/// picks the largest feasible `eps` with a safety margin.
pub(crate) fn flat_move_witness(q: &JointDist3, v0: &[f64], w0: &[f64]) -> Option<JointDist3> {
    let (nt, nx, ny) = q.dims();
    let cond = q.conditional_t_given_xy();
    if !cond.defined.iter().all(|&b| b) {
        return None;
    }
    let m_xy = q.tensor().sum_axis(Axis(0));
    let mut eps = f64::INFINITY;
    for x in 0..nx {
        for y in 0..ny {
            let u = v0[x] * w0[y];
            if u < 0.0 {
                eps = eps.min(-m_xy[(x, y)] / u);
            }
        }
    }
    if !eps.is_finite() || eps <= 0.0 {
        return None;
    }
    let eps = 0.9 * eps;
    let mut out = Array3::zeros((nt, nx, ny));
    for x in 0..nx {
        for y in 0..ny {
            let pair = m_xy[(x, y)] + eps * v0[x] * w0[y];
            for t in 0..nt {
                out[(t, x, y)] = cond.q[(t, x, y)] * pair;
            }
        }
    }
    Some(JointDist3::from_computed(out))
}

/// Computes the unique information `UI(T:X \ Y)` with default options.
pub fn solve(p: &JointDist3) -> Result<SolveReport, SolveError> {
    solve_with(p, &SolveOptions::default())
}

/// Dispatcher over the solver routes; see the module docs.
pub fn solve_with(p: &JointDist3, opts: &SolveOptions) -> Result<SolveReport, SolveError> {
    let spec = build_spec(p);
    if spec.dim == 0 {
        return Ok(finalize_report(
            &spec,
            p.clone(),
            SolvePath::SingletonDomain,
            Uniqueness::Unique,
            0,
        ));
    }
    if p.dims() == (2, 2, 2) && spec.t_support.len() == 2 {
        return solve_all_binary(p);
    }
    if let Some(witness) = ci_feasibility_lp(p, CiDirection::XGivenY) {
        let uniq = assess_uniqueness(&spec, &witness, cmi(&witness));
        return Ok(finalize_report(&spec, witness, SolvePath::CiLpX, uniq, 0));
    }
    if let Some(witness) = ci_feasibility_lp(p, CiDirection::YGivenX) {
        let uniq = assess_uniqueness(&spec, &witness, cmi(&witness));
        return Ok(finalize_report(&spec, witness, SolvePath::CiLpY, uniq, 0));
    }
    solve_generic(p, opts)
}

/// The bivariate decomposition: both unique informations, the shared part
/// and the synergy, tied to the mutual informations by
///
/// ```text
/// UI_x + shared = I(T:X)    UI_y + shared = I(T:Y)
/// UI_x + UI_y + shared + synergy = I(T:XY)
/// ```
pub fn decompose(p: &JointDist3) -> Result<PidDecomposition, SolveError> {
    decompose_with(p, &SolveOptions::default())
}

pub fn decompose_with(p: &JointDist3, opts: &SolveOptions) -> Result<PidDecomposition, SolveError> {
    let suite = p.entropy_and_mi_suite();
    let ui_x = solve_with(p, opts)?.ui_bits;
    let ui_y = solve_with(&p.swap_xy(), opts)?.ui_bits;
    Ok(PidDecomposition {
        ui_x,
        ui_y,
        shared: suite.mi_tx - ui_x,
        synergy: suite.mi_txy - suite.mi_ty - ui_x,
        mi_tx: suite.mi_tx,
        mi_ty: suite.mi_ty,
        mi_txy: suite.mi_txy,
    })
}

/// `I(T:X|Y)` of a raw tensor; re-exported for the oracle and tests.
pub fn objective_of_tensor(q: &Array3<f64>) -> f64 {
    cmi_tensor(q)
}
