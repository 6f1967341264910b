//! Unique information and bivariate information decomposition for finite
//! three-variable distributions.
//!
//! Given a joint distribution `P` of `(T, X, Y)`, the unique information of
//! `X` about `T` with respect to `Y` is the minimum of the conditional mutual
//! information `I_Q(T:X|Y)` over the polytope of joint distributions `Q` that
//! share `P`'s `(T,X)` and `(T,Y)` pair marginals. This crate provides
//!
//! * exact dense representations of joint distributions ([`distributions`]),
//! * the geometry of the optimization domain: product structure, kernel
//!   basis, anchor point and supports ([`deltap`]),
//! * the objective, its directional derivatives and stationarity analysis
//!   ([`objective`]),
//! * solvers: a closed form for all-binary instances, a conditional
//!   independence feasibility LP, and a projected-descent fallback
//!   ([`solver`]),
//! * uniqueness/support diagnostics with machine-checkable witnesses
//!   ([`diagnostics`]),
//! * a Monte Carlo harness over uniformly sampled distributions
//!   ([`sampling`]),
//! * brute-force grid minimizers used as an independent test oracle
//!   ([`oracle`]),
//! * plot data for the 2x2x3 factor polytopes ([`viz`]).
//!
//! All information quantities are in bits (base-2 logarithms) with the
//! `0 log 0 = 0` convention.

pub mod deltap;
pub mod diagnostics;
pub mod distributions;
pub mod io;
pub mod objective;
pub mod oracle;
pub mod sampling;
pub mod solver;
pub mod viz;

#[cfg(test)]
pub(crate) mod testutil;

pub use distributions::{Alphabet, JointDist3, Marginal2, MarginalPair};
pub use solver::{solve, solve_with, PidDecomposition, SolveOptions, SolveReport};
