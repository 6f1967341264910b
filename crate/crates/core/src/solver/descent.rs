//! Projected first-order descent over the domain in kernel coordinates.
//!
//! Each sweep first attempts a projected-gradient move: the gradient is
//! assembled from the directional derivatives over the coordinate basis,
//! the step is clipped to the feasible segment along the line and accepted
//! under an Armijo condition, with the step length warm-started across
//! sweeps. The sweep then minimizes exactly along every generating
//! direction in turn: the 1-d derivative is monotone by convexity, so a
//! sign bisection finds the minimizer, and moves that reach the feasible
//! limit land on the boundary exactly.
//!
//! Convergence is declared when no feasible one-sided generating direction
//! descends faster than the tolerance; this covers interior stationarity
//! and the boundary first-order conditions with the signed-infinity rules.

use super::{
    assess_uniqueness, finalize_report, generating_directions, SolveError, SolveOptions,
    SolvePath, SolveReport, Uniqueness,
};
use crate::deltap::{build_spec, DeltaPSpec};
use crate::distributions::JointDist3;
use crate::objective::cmi_tensor;
use ndarray::{Array2, Array3, Axis};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Atoms at or below this are treated as boundary-pinned in feasibility
/// checks.
const FEAS_TOL: f64 = 1e-15;
/// Armijo sufficient-decrease constant.
const ARMIJO: f64 = 1e-4;
/// Initial projected-gradient step length.
const INIT_STEP: f64 = 0.1;

const LOG2_E: f64 = std::f64::consts::LOG2_E;

#[inline]
fn cond_factor(atom: f64, pair: f64) -> f64 {
    if pair <= 0.0 {
        1.0
    } else {
        (atom / pair).max(0.0)
    }
}

/// A generating move in a fixed orientation: a step `sigma > 0` raises
/// `(xa,ya)` and `(xb,yb)` and lowers `(xa,yb)` and `(xb,ya)` in slice `t`;
/// negative steps go the other way.
#[derive(Debug, Clone, Copy)]
struct Move {
    t: usize,
    xa: usize,
    xb: usize,
    ya: usize,
    yb: usize,
}

struct Descender<'a> {
    spec: &'a DeltaPSpec,
    dirs: Vec<Move>,
    q: Array3<f64>,
    m_xy: Array2<f64>,
    /// Warm-started projected-gradient step length.
    pg_step: f64,
    iterations: usize,
}

impl<'a> Descender<'a> {
    fn new(spec: &'a DeltaPSpec, start: Array3<f64>) -> Self {
        let m_xy = start.sum_axis(Axis(0));
        let dirs = generating_directions(spec)
            .into_iter()
            .map(|(t, xa, xb, ya, yb)| Move { t, xa, xb, ya, yb })
            .collect();
        Descender { spec, dirs, q: start, m_xy, pg_step: INIT_STEP, iterations: 0 }
    }

    /// Derivative of the objective along `mv` at signed offset `sigma`.
    fn derivative_at(&self, mv: Move, sigma: f64) -> f64 {
        let Move { t, xa, xb, ya, yb } = mv;
        let num = cond_factor(self.q[(t, xa, ya)] + sigma, self.m_xy[(xa, ya)] + sigma)
            * cond_factor(self.q[(t, xb, yb)] + sigma, self.m_xy[(xb, yb)] + sigma);
        let den = cond_factor(self.q[(t, xa, yb)] - sigma, self.m_xy[(xa, yb)] - sigma)
            * cond_factor(self.q[(t, xb, ya)] - sigma, self.m_xy[(xb, ya)] - sigma);
        if num > 0.0 && den > 0.0 {
            (num / den).ln() * LOG2_E
        } else if num == 0.0 && den > 0.0 {
            f64::NEG_INFINITY
        } else if num > 0.0 && den == 0.0 {
            f64::INFINITY
        } else {
            f64::NAN
        }
    }

    /// Most negative feasible one-sided derivative over the generating set.
    fn steepest_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for &mv in &self.dirs {
            if self.q[(mv.t, mv.xa, mv.yb)] > FEAS_TOL && self.q[(mv.t, mv.xb, mv.ya)] > FEAS_TOL
            {
                worst = worst.min(self.derivative_at(mv, 0.0));
            }
            if self.q[(mv.t, mv.xa, mv.ya)] > FEAS_TOL && self.q[(mv.t, mv.xb, mv.yb)] > FEAS_TOL
            {
                // The reverse orientation negates a finite derivative, but
                // the limit rules are not symmetric around zero atoms.
                let rev = Move { ya: mv.yb, yb: mv.ya, ..mv };
                worst = worst.min(self.derivative_at(rev, 0.0));
            }
        }
        worst
    }

    /// Exact minimization along `mv` over its two-sided feasible interval.
    fn line_minimize(&mut self, mv: Move) {
        self.iterations += 1;
        let Move { t, xa, xb, ya, yb } = mv;
        let room_right = self.q[(t, xa, yb)].min(self.q[(t, xb, ya)]);
        let room_left = self.q[(t, xa, ya)].min(self.q[(t, xb, yb)]);
        let d0 = self.derivative_at(mv, 0.0);
        let sigma = if d0 < 0.0 && room_right > FEAS_TOL {
            if self.derivative_at(mv, room_right) <= 0.0 {
                room_right
            } else {
                bisect(|s| self.derivative_at(mv, s), 0.0, room_right)
            }
        } else if d0 > 0.0 && room_left > FEAS_TOL {
            if self.derivative_at(mv, -room_left) >= 0.0 {
                -room_left
            } else {
                -bisect(|s| -self.derivative_at(mv, -s), 0.0, room_left)
            }
        } else {
            return;
        };
        if sigma == 0.0 {
            return;
        }
        self.q[(t, xa, ya)] += sigma;
        self.q[(t, xb, yb)] += sigma;
        self.q[(t, xa, yb)] -= sigma;
        self.q[(t, xb, ya)] -= sigma;
        if sigma == room_right {
            if self.q[(t, xa, yb)] <= FEAS_TOL {
                self.q[(t, xa, yb)] = 0.0;
            }
            if self.q[(t, xb, ya)] <= FEAS_TOL {
                self.q[(t, xb, ya)] = 0.0;
            }
        } else if sigma == -room_left {
            if self.q[(t, xa, ya)] <= FEAS_TOL {
                self.q[(t, xa, ya)] = 0.0;
            }
            if self.q[(t, xb, yb)] <= FEAS_TOL {
                self.q[(t, xb, yb)] = 0.0;
            }
        }
        self.refresh_pairs(&[(xa, ya), (xb, yb), (xa, yb), (xb, ya)]);
    }

    fn refresh_pairs(&mut self, cells: &[(usize, usize)]) {
        let nt = self.q.dim().0;
        for &(x, y) in cells {
            self.m_xy[(x, y)] = (0..nt).map(|t| self.q[(t, x, y)]).sum();
        }
    }

    /// Composite move scaling the whole pair cell `(x, y)` toward zero: each
    /// slice sheds its atom along its own kernel move. At a boundary
    /// optimizer a vanished atom forces the whole pair to vanish, which no
    /// single-direction move can reach exactly; this one can.
    fn pair_close_step(&mut self, x: usize, y: usize) {
        let nt = self.q.dim().0;
        // Per-slice shed weight and receiving partner cell.
        let mut parts: Vec<(usize, f64, usize, usize)> = Vec::new();
        for &t in &self.spec.t_support {
            let w = self.q[(t, x, y)];
            if w <= 0.0 {
                continue;
            }
            let mut partner: Option<(usize, usize, f64)> = None;
            for &x2 in &self.spec.x_support[t] {
                for &y2 in &self.spec.y_support[t] {
                    if x2 != x && y2 != y {
                        let room = self.q[(t, x2, y2)];
                        if partner.map_or(true, |(_, _, r)| room > r) {
                            partner = Some((x2, y2, room));
                        }
                    }
                }
            }
            match partner {
                Some((x2, y2, room)) if room > 0.0 => parts.push((t, w, x2, y2)),
                _ => return,
            }
        }
        if parts.is_empty() {
            return;
        }
        self.iterations += 1;
        let mut s_max = 1.0f64;
        for &(t, w, x2, y2) in &parts {
            s_max = s_max.min(self.q[(t, x2, y2)] / w);
        }
        if s_max <= 0.0 {
            return;
        }

        // Pair-mass rates of change per affected cell.
        let mut pair_delta: Vec<((usize, usize), f64)> =
            vec![((x, y), -parts.iter().map(|p| p.1).sum::<f64>())];
        let mut add = |cell: (usize, usize), v: f64| {
            if let Some(e) = pair_delta.iter_mut().find(|(c, _)| *c == cell) {
                e.1 += v;
            } else {
                pair_delta.push((cell, v));
            }
        };
        for &(_, w, x2, y2) in &parts {
            add((x2, y2), -w);
            add((x, y2), w);
            add((x2, y), w);
        }

        let deriv = |s: f64| -> f64 {
            let pair_at = |cell: (usize, usize)| {
                let base = self.m_xy[cell];
                let rate = pair_delta.iter().find(|(c, _)| *c == cell).map_or(0.0, |(_, v)| *v);
                base + s * rate
            };
            let mut total = 0.0;
            for &(t, w, x2, y2) in &parts {
                let num = cond_factor(self.q[(t, x, y2)] + s * w, pair_at((x, y2)))
                    * cond_factor(self.q[(t, x2, y)] + s * w, pair_at((x2, y)));
                let den = cond_factor(self.q[(t, x, y)] - s * w, pair_at((x, y)))
                    * cond_factor(self.q[(t, x2, y2)] - s * w, pair_at((x2, y2)));
                let d = if num > 0.0 && den > 0.0 {
                    (num / den).ln() * LOG2_E
                } else if num == 0.0 && den > 0.0 {
                    f64::NEG_INFINITY
                } else if num > 0.0 && den == 0.0 {
                    f64::INFINITY
                } else {
                    return f64::NAN;
                };
                total += w * d;
                if !total.is_finite() {
                    return total;
                }
            }
            total
        };
        let d0 = deriv(0.0);
        if !(d0 < 0.0) {
            return;
        }
        let s = if deriv(s_max) <= 0.0 { s_max } else { bisect(deriv, 0.0, s_max) };
        if s <= 0.0 {
            return;
        }
        let mut touched = vec![(x, y)];
        for &(t, w, x2, y2) in &parts {
            self.q[(t, x, y)] -= s * w;
            self.q[(t, x2, y2)] -= s * w;
            self.q[(t, x, y2)] += s * w;
            self.q[(t, x2, y)] += s * w;
            if s == s_max {
                if self.q[(t, x, y)] <= FEAS_TOL {
                    self.q[(t, x, y)] = 0.0;
                }
                if self.q[(t, x2, y2)] <= FEAS_TOL {
                    self.q[(t, x2, y2)] = 0.0;
                }
            }
            touched.push((x2, y2));
            touched.push((x, y2));
            touched.push((x2, y));
        }
        touched.sort_unstable();
        touched.dedup();
        self.refresh_pairs(&touched);
    }

    /// One projected-gradient attempt with Armijo backtracking from the
    /// warm-started step. Returns false when the gradient is unusable here
    /// or no step was accepted.
    fn projected_gradient_step(&mut self) -> bool {
        self.iterations += 1;
        let mut grad = vec![0.0; self.spec.dim];
        let mut norm_sq = 0.0;
        for (i, c) in self.spec.coords.iter().enumerate() {
            let (x0, y0) = self.spec.anchors[c.t].unwrap();
            let mv = Move { t: c.t, xa: c.x, xb: x0, ya: c.y, yb: y0 };
            let dd = self.derivative_at(mv, 0.0);
            if !dd.is_finite() {
                return false;
            }
            grad[i] = self.spec.p_t[c.t] * dd;
            norm_sq += grad[i] * grad[i];
        }
        if norm_sq == 0.0 {
            return false;
        }

        let mut delta = Array3::zeros(self.q.dim());
        for (i, c) in self.spec.coords.iter().enumerate() {
            let (x0, y0) = self.spec.anchors[c.t].unwrap();
            let step = -self.spec.p_t[c.t] * grad[i];
            delta[(c.t, c.x, c.y)] += step;
            delta[(c.t, x0, y0)] += step;
            delta[(c.t, c.x, y0)] -= step;
            delta[(c.t, x0, c.y)] -= step;
        }
        let sigma_max = self.spec.max_feasible_step(&self.q, &delta);
        if sigma_max <= 0.0 {
            return false;
        }

        let f0 = cmi_tensor(&self.q);
        let mut sigma = sigma_max.min(self.pg_step);
        for _ in 0..40 {
            if sigma <= 1e-16 {
                break;
            }
            let candidate = &self.q + &(&delta * sigma);
            let f1 = cmi_tensor(&candidate);
            if f1 <= f0 - ARMIJO * sigma * norm_sq {
                self.q = candidate;
                for v in self.q.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                self.m_xy = self.q.sum_axis(Axis(0));
                self.pg_step = (sigma * 2.0).min(1e3);
                return true;
            }
            sigma *= 0.5;
        }
        self.pg_step = (self.pg_step * 0.5).max(1e-12);
        false
    }
}

/// Sign bisection of a monotone nondecreasing derivative with `f(lo) < 0`.
fn bisect(f: impl Fn(f64) -> f64, lo0: f64, hi0: f64) -> f64 {
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-18 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Strictly interior random start: a bounded random walk along generating
/// moves from the anchor.
fn random_interior_start(spec: &DeltaPSpec, rng: &mut ChaCha8Rng) -> Array3<f64> {
    let dirs = generating_directions(spec);
    let mut q = spec.q0.tensor().clone();
    if dirs.is_empty() {
        return q;
    }
    for _ in 0..(2 * spec.dim + 4) {
        let &(t, x, x2, y, y2) = &dirs[rng.gen_range(0..dirs.len())];
        let up = q[(t, x, y2)].min(q[(t, x2, y)]);
        let down = q[(t, x, y)].min(q[(t, x2, y2)]);
        let u: f64 = rng.gen_range(-0.45..0.45);
        let step = if u >= 0.0 { u * up } else { u * down };
        q[(t, x, y)] += step;
        q[(t, x2, y2)] += step;
        q[(t, x, y2)] -= step;
        q[(t, x2, y)] -= step;
    }
    q
}

/// Minimizes the objective over the domain of `p` by multi-start projected
/// descent. The anchor plus `opts.restarts` random interior points seed the
/// runs; the best converged point is reported.
pub fn solve_generic(p: &JointDist3, opts: &SolveOptions) -> Result<SolveReport, SolveError> {
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

    let mut best: Option<(f64, Array3<f64>)> = None;
    let mut total_iters = 0;
    let mut exhausted = false;

    for restart in 0..=opts.restarts {
        let start = if restart == 0 {
            spec.q0.tensor().clone()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(restart as u64);
            random_interior_start(&spec, &mut rng)
        };
        let mut state = Descender::new(&spec, start);
        let mut converged = false;
        let pair_cells: Vec<(usize, usize)> = {
            let mut cells: Vec<(usize, usize)> =
                spec.support.iter().map(|&(_, x, y)| (x, y)).collect();
            cells.sort_unstable();
            cells.dedup();
            cells
        };
        while state.iterations < opts.max_iter {
            state.projected_gradient_step();
            let dirs = state.dirs.clone();
            for mv in dirs {
                state.line_minimize(mv);
            }
            for &(x, y) in &pair_cells {
                state.pair_close_step(x, y);
            }
            if state.steepest_violation() >= -opts.grad_tol {
                converged = true;
                break;
            }
        }
        total_iters += state.iterations;
        if !converged {
            exhausted = true;
        }
        let value = cmi_tensor(&state.q);
        if best.as_ref().map_or(true, |(v, _)| value < *v) {
            best = Some((value, state.q));
        }
    }

    let (best_val, best_q) = best.expect("at least one descent run");
    let optimizer = JointDist3::from_computed(best_q);
    let uniqueness = assess_uniqueness(&spec, &optimizer, best_val);
    let report =
        finalize_report(&spec, optimizer, SolvePath::GenericDescent, uniqueness, total_iters);
    if exhausted && report.final_grad_norm > opts.grad_tol {
        return Err(SolveError::MaxIterationsExceeded {
            iterations: total_iters,
            residual: report.final_grad_norm,
            report: Box::new(report),
        });
    }
    Ok(report)
}
