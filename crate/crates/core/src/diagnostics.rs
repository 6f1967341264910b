//! Uniqueness and support diagnostics: the structural non-uniqueness
//! conditions as checkable predicates, each raised flag backed by a
//! machine-verified witness, plus the support-pattern expectations for
//! binary `T` and post-hoc verification of solver reports.

use crate::deltap::{build_spec, face_analysis, Membership};
use crate::distributions::{entropy_bits, JointDist3, MarginalPair};
use crate::objective::{cmi, stationarity_test};
use crate::solver::{
    flat_move_witness, solve_with, SolveOptions, SolveReport, Uniqueness, WITNESS_OBJ_TOL,
    WITNESS_SEP_TOL,
};
use ndarray::Axis;
use serde::Serialize;
use thiserror::Error;

/// CI residual tolerance at exact inputs.
pub const CI_EXACT_TOL: f64 = 1e-10;
/// CI residual tolerance at converged solver outputs.
pub const CI_SOLVER_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("hypothesis holds but witness construction failed: {0}")]
    WitnessConstructionFailed(String),
    #[error("operation requires exactly two supported T states")]
    NotBinaryT,
}

/// Residual of `T` independent of `X` given `Y`:
/// `max |Q(t|x,y) - Q(t|y)|` over defined cells.
pub fn ci_residual_x_given_y(q: &JointDist3) -> f64 {
    let (nt, nx, ny) = q.dims();
    let m_ty = q.marginal(MarginalPair::TY).m;
    let m_xy = q.marginal(MarginalPair::XY).m;
    let p_y = q.y_marginal();
    let mut worst = 0.0f64;
    for x in 0..nx {
        for y in 0..ny {
            if m_xy[(x, y)] > 0.0 {
                for t in 0..nt {
                    let lhs = q.p(t, x, y) / m_xy[(x, y)];
                    let rhs = m_ty[(t, y)] / p_y[y];
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
    }
    worst
}

/// Residual of `T` independent of `Y` given `X`.
pub fn ci_residual_y_given_x(q: &JointDist3) -> f64 {
    ci_residual_x_given_y(&q.swap_xy())
}

/// A verified pair of equally good optimizers.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessPair {
    pub first: JointDist3,
    pub second: JointDist3,
    /// Objective difference between the two (bits).
    pub objective_gap: f64,
    /// Max-norm separation of the tensors.
    pub separation: f64,
}

impl WitnessPair {
    fn checked(first: JointDist3, second: JointDist3) -> Option<Self> {
        let objective_gap = (cmi(&first) - cmi(&second)).abs();
        let separation = first.max_abs_diff(&second);
        if objective_gap <= WITNESS_OBJ_TOL && separation >= WITNESS_SEP_TOL {
            Some(WitnessPair { first, second, objective_gap, separation })
        } else {
            None
        }
    }
}

/// A raised non-uniqueness flag with its trigger values.
#[derive(Debug, Clone, Serialize)]
pub struct CardinalityFinding {
    pub reason: String,
    pub witnesses: WitnessPair,
}

/// If the supported `T` states number fewer than both input alphabets and
/// the found optimizer has full support, the optimizer cannot be unique; a
/// second optimizer is constructed from a direction preserving `Q(T|XY)`
/// and verified.
pub fn check_cardinality_rule(
    p: &JointDist3,
    report: &SolveReport,
) -> Result<Option<CardinalityFinding>, DiagnosticsError> {
    let (_, nx, ny) = p.dims();
    let t_supp = p.t_marginal().iter().filter(|&&v| v > 0.0).count();
    if t_supp >= nx.min(ny) || !has_full_support(&report.optimizer) {
        return Ok(None);
    }
    let stat = stationarity_test(&report.optimizer);
    let factors = stat.factors.as_ref().ok_or_else(|| {
        DiagnosticsError::WitnessConstructionFailed(
            "optimizer is not a stationary full-support point".into(),
        )
    })?;
    let vs: Vec<&Vec<f64>> = factors.iter().map(|(v, _)| v).collect();
    let ws: Vec<&Vec<f64>> = factors.iter().map(|(_, w)| w).collect();
    let witnesses = build_flat_witness(&report.optimizer, &vs, &ws)?;
    Ok(Some(CardinalityFinding {
        reason: format!(
            "|T'| = {t_supp} < min(|X|,|Y|) = {} with a full-support optimizer",
            nx.min(ny)
        ),
        witnesses,
    }))
}

/// Variant for `UI = 0`: when the optimizer satisfies `T` independent of
/// `X` given `Y`, its conditional factors along `X` are constant, so only
/// `|T'| < |Y|` (plus `|X| >= 2`) is needed for a second optimizer.
pub fn check_ci_cardinality_rule(
    p: &JointDist3,
    report: &SolveReport,
) -> Result<Option<CardinalityFinding>, DiagnosticsError> {
    let (nt, nx, ny) = p.dims();
    let t_supp = p.t_marginal().iter().filter(|&&v| v > 0.0).count();
    let ci_holds = ci_residual_x_given_y(&report.optimizer) <= CI_SOLVER_TOL;
    if t_supp >= ny || nx < 2 || !ci_holds || !has_full_support(&report.optimizer) {
        return Ok(None);
    }
    // Factors with the independence built in: v_t = 1, w_t(y) = Q(t|y).
    let q = &report.optimizer;
    let m_ty = q.marginal(MarginalPair::TY).m;
    let p_y = q.y_marginal();
    let p_t = q.t_marginal();
    let ones = vec![1.0; nx];
    let mut ws_data: Vec<Vec<f64>> = Vec::new();
    for t in 0..nt {
        if p_t[t] > 0.0 {
            ws_data.push((0..ny).map(|y| m_ty[(t, y)] / p_y[y]).collect());
        }
    }
    let vs: Vec<&Vec<f64>> = (0..ws_data.len()).map(|_| &ones).collect();
    let ws: Vec<&Vec<f64>> = ws_data.iter().collect();
    let witnesses = build_flat_witness(q, &vs, &ws)?;
    Ok(Some(CardinalityFinding {
        reason: format!("UI = 0 at a full-support optimizer with |T'| = {t_supp} < |Y| = {ny}"),
        witnesses,
    }))
}

fn has_full_support(q: &JointDist3) -> bool {
    q.tensor().iter().all(|&v| v > crate::deltap::INTERIOR_TOL)
}

/// Orthogonal directions to the factor families, turned into a verified
/// second optimizer via the conditional-preserving move.
fn build_flat_witness(
    q: &JointDist3,
    vs: &[&Vec<f64>],
    ws: &[&Vec<f64>],
) -> Result<WitnessPair, DiagnosticsError> {
    let v_perp = orthogonal_complement(vs);
    let w_perp = orthogonal_complement(ws);
    for v0 in &v_perp {
        for w0 in &w_perp {
            if let Some(witness) = flat_move_witness(q, v0, w0) {
                if let Some(pair) = WitnessPair::checked(q.clone(), witness) {
                    return Ok(pair);
                }
            }
        }
    }
    Err(DiagnosticsError::WitnessConstructionFailed(
        "no feasible step along any conditional-preserving direction".into(),
    ))
}

fn orthogonal_complement(vecs: &[&Vec<f64>]) -> Vec<Vec<f64>> {
    let n = match vecs.first() {
        Some(v) => v.len(),
        None => return Vec::new(),
    };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vecs {
        if let Some(u) = gram_schmidt((*v).clone(), &basis) {
            basis.push(u);
        }
    }
    let mut complement = Vec::new();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        if let Some(u) = gram_schmidt(e, &basis) {
            basis.push(u.clone());
            complement.push(u);
        }
    }
    complement
}

fn gram_schmidt(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
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
        v.iter_mut().for_each(|x| *x /= norm);
        Some(v)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DoubleIndependenceFinding {
    /// Chosen states `(x0, x1, y0, y1)` of the perturbation family.
    pub states: (usize, usize, usize, usize),
    /// Verified feasible range of the family parameter.
    pub delta_range: (f64, f64),
    pub witnesses: WitnessPair,
}

/// If `T` is independent of `X` and of `Y` marginally (and both inputs are
/// non-constant), the anchor maximizes the conditional entropy, and a whole
/// segment through it does too.
pub fn check_double_independence(p: &JointDist3) -> Option<DoubleIndependenceFinding> {
    let (nt, nx, ny) = p.dims();
    let p_t = p.t_marginal();
    let p_x = p.x_marginal();
    let p_y = p.y_marginal();
    if entropy_bits(p_x.iter().copied()) <= 0.0 || entropy_bits(p_y.iter().copied()) <= 0.0 {
        return None;
    }
    let m_tx = p.marginal(MarginalPair::TX).m;
    let m_ty = p.marginal(MarginalPair::TY).m;
    let mut dev = 0.0f64;
    for t in 0..nt {
        for x in 0..nx {
            dev = dev.max((m_tx[(t, x)] - p_t[t] * p_x[x]).abs());
        }
        for y in 0..ny {
            dev = dev.max((m_ty[(t, y)] - p_t[t] * p_y[y]).abs());
        }
    }
    if dev > CI_EXACT_TOL {
        return None;
    }

    let xs: Vec<usize> = (0..nx).filter(|&x| p_x[x] > 0.0).collect();
    let ys: Vec<usize> = (0..ny).filter(|&y| p_y[y] > 0.0).collect();
    let (x0, x1, y0, y1) = (xs[0], xs[1], ys[0], ys[1]);

    // Family around the anchor: each slice moves with weight P(t), so the
    // conditional of (X,Y) given T stays t-independent.
    let spec = build_spec(p);
    let q0 = spec.q0.tensor();
    let delta_plus = (p_x[x0] * p_y[y1]).min(p_x[x1] * p_y[y0]);
    let delta_minus = -(p_x[x0] * p_y[y0]).min(p_x[x1] * p_y[y1]);
    let member = |delta: f64| -> JointDist3 {
        let mut q = q0.clone();
        for t in 0..nt {
            if p_t[t] > 0.0 {
                q[(t, x0, y0)] += delta * p_t[t];
                q[(t, x1, y1)] += delta * p_t[t];
                q[(t, x0, y1)] -= delta * p_t[t];
                q[(t, x1, y0)] -= delta * p_t[t];
            }
        }
        JointDist3::from_computed(q)
    };
    let witnesses = WitnessPair::checked(member(delta_minus), member(delta_plus))?;
    Some(DoubleIndependenceFinding {
        states: (x0, x1, y0, y1),
        delta_range: (delta_minus, delta_plus),
        witnesses,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockwiseFinding {
    /// Blocks of the support partition, as `(x states, y states)`.
    pub partition: Vec<(Vec<usize>, Vec<usize>)>,
    pub witnesses: WitnessPair,
}

/// If both conditional independences hold at the input, its support
/// decomposes into blocks on which `T` is independent of the pair, with a
/// fixed conditional profile per block. Mass can be transported between two
/// disjoint support edges of a block without changing any marginal or
/// conditional, so any block with two such edges certifies non-uniqueness.
pub fn check_blockwise(p: &JointDist3) -> Option<BlockwiseFinding> {
    if ci_residual_x_given_y(p) > CI_EXACT_TOL || ci_residual_y_given_x(p) > CI_EXACT_TOL {
        return None;
    }
    let (nt, nx, ny) = p.dims();
    let m_xy = p.marginal(MarginalPair::XY).m;

    // Connected components of the bipartite support graph of P(X,Y).
    let mut comp_of_x = vec![usize::MAX; nx];
    let mut comp_of_y = vec![usize::MAX; ny];
    let mut n_comp = 0;
    for x_start in 0..nx {
        if comp_of_x[x_start] != usize::MAX || (0..ny).all(|y| m_xy[(x_start, y)] <= 0.0) {
            continue;
        }
        let comp = n_comp;
        n_comp += 1;
        let mut stack = vec![(true, x_start)];
        comp_of_x[x_start] = comp;
        while let Some((is_x, s)) = stack.pop() {
            if is_x {
                for y in 0..ny {
                    if m_xy[(s, y)] > 0.0 && comp_of_y[y] == usize::MAX {
                        comp_of_y[y] = comp;
                        stack.push((false, y));
                    }
                }
            } else {
                for x in 0..nx {
                    if m_xy[(x, s)] > 0.0 && comp_of_x[x] == usize::MAX {
                        comp_of_x[x] = comp;
                        stack.push((true, x));
                    }
                }
            }
        }
    }

    // Conditional profile of T per component; constant inside a component
    // because both independences hold.
    let mut profiles: Vec<Vec<f64>> = Vec::with_capacity(n_comp);
    for comp in 0..n_comp {
        let mut mass = 0.0;
        let mut prof = vec![0.0; nt];
        for x in 0..nx {
            for y in 0..ny {
                if comp_of_x[x] == comp && comp_of_y[y] == comp && m_xy[(x, y)] > 0.0 {
                    mass += m_xy[(x, y)];
                    for t in 0..nt {
                        prof[t] += p.p(t, x, y);
                    }
                }
            }
        }
        prof.iter_mut().for_each(|v| *v /= mass);
        profiles.push(prof);
    }

    // Merge components with matching profiles: transport between them also
    // preserves both independences.
    let mut merged_of = (0..n_comp).collect::<Vec<usize>>();
    for i in 0..n_comp {
        for j in 0..i {
            let close = profiles[i]
                .iter()
                .zip(&profiles[j])
                .all(|(a, b)| (a - b).abs() <= CI_EXACT_TOL);
            if close && merged_of[i] == i {
                merged_of[i] = merged_of[j];
                break;
            }
        }
    }

    let mut partition: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut swap: Option<((usize, usize), (usize, usize), usize)> = None;
    for root in 0..n_comp {
        if merged_of[root] != root {
            continue;
        }
        let xs: Vec<usize> = (0..nx)
            .filter(|&x| comp_of_x[x] != usize::MAX && merged_of[comp_of_x[x]] == root)
            .collect();
        let ys: Vec<usize> = (0..ny)
            .filter(|&y| comp_of_y[y] != usize::MAX && merged_of[comp_of_y[y]] == root)
            .collect();
        // Two disjoint support edges inside the merged block allow the swap.
        if swap.is_none() {
            'search: for &xa in &xs {
                for &ya in &ys {
                    if m_xy[(xa, ya)] <= 0.0 {
                        continue;
                    }
                    for &xb in &xs {
                        for &yb in &ys {
                            if xb != xa && yb != ya && m_xy[(xb, yb)] > 0.0 {
                                swap = Some(((xa, ya), (xb, yb), root));
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        partition.push((xs, ys));
    }

    let ((xa, ya), (xb, yb), root) = swap?;
    let delta = m_xy[(xa, ya)].min(m_xy[(xb, yb)]);
    let prof = &profiles[root];
    let mut q = p.tensor().clone();
    for t in 0..nt {
        q[(t, xa, ya)] -= delta * prof[t];
        q[(t, xb, yb)] -= delta * prof[t];
        q[(t, xa, yb)] += delta * prof[t];
        q[(t, xb, ya)] += delta * prof[t];
    }
    let witness = JointDist3::from_computed(q);
    let witnesses = WitnessPair::checked(p.clone(), witness)?;
    Some(BlockwiseFinding { partition, witnesses })
}

/// What the support pattern of a binary-`T` instance forces at an interior
/// optimizer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum BinaryTExpectation {
    /// `T` independent of `Y` given `X` holds at every domain member.
    CiYEverywhere,
    /// `T` independent of `X` given `Y` holds at every domain member.
    CiXEverywhere,
    /// The optimizer set cannot touch the interior.
    NoInteriorOptimizer,
    /// Full/equal supports: one of the two independences must hold at any
    /// interior optimizer.
    CiXOrCiY,
    /// Equal `X` supports, differing `Y` supports: `T` independent of `X`
    /// given `Y` at any interior optimizer.
    CiX,
    /// Mirror image.
    CiY,
    /// Restricted-conditioning statements, one per one-sided surplus.
    Restricted(Vec<RestrictedCi>),
}

/// `T` independent of the named variable given the other, with the named
/// variable restricted to `subset`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RestrictedCi {
    /// `'X'` or `'Y'`: which variable `T` is independent of.
    pub independent_of: char,
    /// States of that variable over which the statement is asserted.
    pub subset: Vec<usize>,
}

/// Expected conditional independences at interior optimizers, from the
/// support pattern alone. Requires exactly two supported `T` states.
pub fn binary_t_interior_expectations(
    p: &JointDist3,
) -> Result<BinaryTExpectation, DiagnosticsError> {
    let spec = build_spec(p);
    if spec.t_support.len() != 2 {
        return Err(DiagnosticsError::NotBinaryT);
    }
    let (t0, t1) = (spec.t_support[0], spec.t_support[1]);
    let xs0 = &spec.x_support[t0];
    let xs1 = &spec.x_support[t1];
    let ys0 = &spec.y_support[t0];
    let ys1 = &spec.y_support[t1];
    let inter = |a: &Vec<usize>, b: &Vec<usize>| a.iter().any(|v| b.contains(v));
    let minus = |a: &Vec<usize>, b: &Vec<usize>| -> Vec<usize> {
        a.iter().copied().filter(|v| !b.contains(v)).collect()
    };
    if !inter(xs0, xs1) {
        return Ok(BinaryTExpectation::CiYEverywhere);
    }
    if !inter(ys0, ys1) {
        return Ok(BinaryTExpectation::CiXEverywhere);
    }
    let x_extra = [minus(xs0, xs1), minus(xs1, xs0)];
    let y_extra = [minus(ys0, ys1), minus(ys1, ys0)];
    if (0..2).any(|i| !x_extra[i].is_empty() && !y_extra[i].is_empty()) {
        return Ok(BinaryTExpectation::NoInteriorOptimizer);
    }
    let x_equal = x_extra.iter().all(|v| v.is_empty());
    let y_equal = y_extra.iter().all(|v| v.is_empty());
    match (x_equal, y_equal) {
        (true, true) => Ok(BinaryTExpectation::CiXOrCiY),
        (true, false) => Ok(BinaryTExpectation::CiX),
        (false, true) => Ok(BinaryTExpectation::CiY),
        (false, false) => {
            let mut statements = Vec::new();
            for (i, &t) in [t0, t1].iter().enumerate() {
                if !x_extra[i].is_empty() {
                    statements.push(RestrictedCi {
                        independent_of: 'Y',
                        subset: spec.y_support[t].clone(),
                    });
                }
                if !y_extra[i].is_empty() {
                    statements.push(RestrictedCi {
                        independent_of: 'X',
                        subset: spec.x_support[t].clone(),
                    });
                }
            }
            Ok(BinaryTExpectation::Restricted(statements))
        }
    }
}

/// One itemized verification outcome.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Post-hoc verification of a solve report: the boundary support law at the
/// optimizer, the expected independences at binary-`T` interior optimizers,
/// and the shared conditionals across non-uniqueness witnesses.
pub fn verify_report(p: &JointDist3, report: &SolveReport) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let spec = build_spec(p);

    // Any vanished optimizer atom inside the domain support must take its
    // whole (x,y) pair down with it.
    let q = report.optimizer.tensor();
    let m_xy = q.sum_axis(Axis(0));
    let mut violations = Vec::new();
    for &(t, x, y) in &spec.support {
        if q[(t, x, y)] < 1e-9 && m_xy[(x, y)] >= 1e-8 {
            violations.push((t, x, y));
        }
    }
    out.push(CheckResult {
        name: "boundary-support".into(),
        passed: violations.is_empty(),
        detail: if violations.is_empty() {
            "every vanished atom has vanished pair mass".into()
        } else {
            format!("atoms with positive pair mass: {violations:?}")
        },
    });

    // CI expectations at binary-T interior optimizers.
    if spec.t_support.len() == 2 && matches!(report.location, Membership::Interior) {
        let expectation = binary_t_interior_expectations(p).expect("binary T");
        let (passed, detail) = check_expectation(&expectation, &report.optimizer);
        out.push(CheckResult { name: "interior-ci".into(), passed, detail });
    } else {
        out.push(CheckResult {
            name: "interior-ci".into(),
            passed: true,
            detail: "vacuous: not a binary-T interior optimizer".into(),
        });
    }

    // Non-uniqueness witnesses must share the conditional of T.
    if let Uniqueness::NonUnique { witnesses } = &report.uniqueness {
        let (a, b) = witnesses.as_ref();
        let ca = a.conditional_t_given_xy();
        let cb = b.conditional_t_given_xy();
        let (nt, nx, ny) = a.dims();
        let mut worst = 0.0f64;
        for x in 0..nx {
            for y in 0..ny {
                if ca.defined[(x, y)] && cb.defined[(x, y)] {
                    for t in 0..nt {
                        worst = worst.max((ca.q[(t, x, y)] - cb.q[(t, x, y)]).abs());
                    }
                }
            }
        }
        out.push(CheckResult {
            name: "witness-conditionals".into(),
            passed: worst <= 1e-6,
            detail: format!("max conditional gap {worst:e}"),
        });
    } else {
        out.push(CheckResult {
            name: "witness-conditionals".into(),
            passed: true,
            detail: "vacuous: no witness pair".into(),
        });
    }
    out
}

fn check_expectation(expectation: &BinaryTExpectation, q: &JointDist3) -> (bool, String) {
    let rx = ci_residual_x_given_y(q);
    let ry = ci_residual_y_given_x(q);
    match expectation {
        BinaryTExpectation::CiXEverywhere | BinaryTExpectation::CiX => {
            (rx <= CI_SOLVER_TOL, format!("T_indep_X|Y residual {rx:e}"))
        }
        BinaryTExpectation::CiYEverywhere | BinaryTExpectation::CiY => {
            (ry <= CI_SOLVER_TOL, format!("T_indep_Y|X residual {ry:e}"))
        }
        BinaryTExpectation::CiXOrCiY => (
            rx <= CI_SOLVER_TOL || ry <= CI_SOLVER_TOL,
            format!("residuals: X|Y {rx:e}, Y|X {ry:e}"),
        ),
        BinaryTExpectation::NoInteriorOptimizer => {
            (false, "interior optimizer found where none can exist".into())
        }
        BinaryTExpectation::Restricted(statements) => {
            let mut worst = 0.0f64;
            for st in statements {
                worst = worst.max(restricted_ci_residual(q, st));
            }
            (worst <= CI_SOLVER_TOL, format!("restricted residual {worst:e}"))
        }
    }
}

/// Residual of a restricted statement: conditionals of `T` constant along
/// the named variable while it ranges over `subset`, for each value of the
/// other variable.
fn restricted_ci_residual(q: &JointDist3, st: &RestrictedCi) -> f64 {
    // Reduce to the case "T independent of Y given X, with Y restricted".
    let base = if st.independent_of == 'Y' { q.clone() } else { q.swap_xy() };
    let (nt, nx, ny) = base.dims();
    let m_xy = base.marginal(MarginalPair::XY).m;
    let mut worst = 0.0f64;
    for x in 0..nx {
        let cells: Vec<usize> = (0..ny)
            .filter(|y| st.subset.contains(y) && m_xy[(x, *y)] > 0.0)
            .collect();
        for t in 0..nt {
            let vals: Vec<f64> = cells.iter().map(|&y| base.p(t, x, y) / m_xy[(x, y)]).collect();
            for w in vals.windows(2) {
                worst = worst.max((w[0] - w[1]).abs());
            }
        }
    }
    worst
}

/// Everything at once, for the command-line report.
#[derive(Debug, Serialize)]
pub struct DiagnosticReport {
    pub cardinality_non_unique: Option<CardinalityFinding>,
    pub cardinality_error: Option<String>,
    pub ci_cardinality_non_unique: Option<CardinalityFinding>,
    pub ci_cardinality_error: Option<String>,
    pub double_independence_non_unique: Option<DoubleIndependenceFinding>,
    pub blockwise_non_unique: Option<BlockwiseFinding>,
    /// Expected CI structure for binary `T`; `None` otherwise.
    pub binary_t_interior_ci: Option<BinaryTExpectation>,
    /// Non-uniqueness forced by `UI = 0` with a wide enough alphabet at an
    /// interior optimizer.
    pub inner_uniqueness_veto: bool,
    /// The structural case of an all-binary instance.
    pub all_binary_case: Option<u8>,
    /// Atoms vanishing across the whole domain.
    pub zero_face_atoms: Vec<(usize, usize, usize)>,
    pub verification: Vec<CheckResult>,
}

/// Runs a solve plus every diagnostic against it.
pub fn diagnose(p: &JointDist3, opts: &SolveOptions) -> (SolveReport, DiagnosticReport) {
    let report = solve_with(p, opts).expect("solver failure during diagnosis");
    let (card, card_err) = split(check_cardinality_rule(p, &report));
    let (ci_card, ci_card_err) = split(check_ci_cardinality_rule(p, &report));
    let (_, nx, ny) = p.dims();
    let interior = matches!(report.location, Membership::Interior);
    let inner_uniqueness_veto = interior
        && ((report.ci_flags.x_given_y && ny > 2) || (report.ci_flags.y_given_x && nx > 2));
    let diag = DiagnosticReport {
        cardinality_non_unique: card,
        cardinality_error: card_err,
        ci_cardinality_non_unique: ci_card,
        ci_cardinality_error: ci_card_err,
        double_independence_non_unique: check_double_independence(p),
        blockwise_non_unique: check_blockwise(p),
        binary_t_interior_ci: binary_t_interior_expectations(p).ok(),
        inner_uniqueness_veto,
        all_binary_case: crate::solver::classify_all_binary(p).ok().flatten(),
        zero_face_atoms: face_analysis(p),
        verification: verify_report(p, &report),
    };
    (report, diag)
}

fn split<T>(r: Result<Option<T>, DiagnosticsError>) -> (Option<T>, Option<String>) {
    match r {
        Ok(v) => (v, None),
        Err(e) => (None, Some(e.to_string())),
    }
}
