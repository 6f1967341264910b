//! Shared fixtures for unit tests: the named example distributions used
//! across modules.

use crate::distributions::JointDist3;
use ndarray::Array3;

/// All eight atoms at 1/8: three independent uniform bits.
pub fn uniform222() -> JointDist3 {
    JointDist3::validate(Array3::from_elem((2, 2, 2), 0.125)).unwrap()
}

/// T = X xor Y with X, Y uniform independent bits.
pub fn xor() -> JointDist3 {
    let mut p = Array3::zeros((2, 2, 2));
    for x in 0..2usize {
        for y in 0..2usize {
            p[(x ^ y, x, y)] = 0.25;
        }
    }
    JointDist3::validate(p).unwrap()
}

/// The 2x2x2 tensor of the five-parameter family with kernel coefficients
/// `(g1, g2)`.
pub fn all_binary_tensor(a: f64, b: f64, c: f64, d: f64, e: f64, g1: f64, g2: f64) -> Array3<f64> {
    let mut p = Array3::zeros((2, 2, 2));
    p[(0, 0, 0)] = a * (b * d + g1);
    p[(0, 0, 1)] = a * (b * (1.0 - d) - g1);
    p[(0, 1, 0)] = a * ((1.0 - b) * d - g1);
    p[(0, 1, 1)] = a * ((1.0 - b) * (1.0 - d) + g1);
    p[(1, 0, 0)] = (1.0 - a) * (c * e + g2);
    p[(1, 0, 1)] = (1.0 - a) * (c * (1.0 - e) - g2);
    p[(1, 1, 0)] = (1.0 - a) * ((1.0 - c) * e - g2);
    p[(1, 1, 1)] = (1.0 - a) * ((1.0 - c) * (1.0 - e) + g2);
    p
}

/// The all-binary instance with e=0 and a=b=c=d=1/2, whose optimization
/// domain degenerates to a line.
pub fn supp_line_example() -> JointDist3 {
    JointDist3::validate(all_binary_tensor(0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0)).unwrap()
}

/// The all-binary instance with b=e=1 and a=c=d=1/2, whose optimization
/// domain is a single point.
pub fn binary_singleton_example() -> JointDist3 {
    JointDist3::validate(all_binary_tensor(0.5, 1.0, 0.5, 0.5, 1.0, 0.0, 0.0)).unwrap()
}

/// Ternary T over binary (X, Y) with uniform P(X,Y): every conditional
/// matrix P(T=k|X,Y) has rank one, but no conditional independence holds.
pub fn ternary_rank_one_example() -> JointDist3 {
    let rows = [
        [[1.0 / 3.0, 1.0 / 2.0], [1.0 / 12.0, 1.0 / 8.0]],
        [[1.0 / 3.0, 1.0 / 8.0], [5.0 / 24.0, 5.0 / 64.0]],
        [[1.0 / 3.0, 3.0 / 8.0], [17.0 / 24.0, 51.0 / 64.0]],
    ];
    let mut p = Array3::zeros((3, 2, 2));
    for t in 0..3 {
        for x in 0..2 {
            for y in 0..2 {
                p[(t, x, y)] = rows[t][x][y] * 0.25;
            }
        }
    }
    JointDist3::validate(p).unwrap()
}

/// Two size-matched blocks on the diagonal of a ternary (X, Y) square with
/// T independent of (X, Y) inside each block; both conditional
/// independences hold but the optimizer is a whole segment.
pub fn blockwise_example() -> JointDist3 {
    let mut p = Array3::zeros((2, 3, 3));
    p[(0, 0, 0)] = 1.0 / 6.0;
    p[(1, 0, 0)] = 1.0 / 6.0;
    p[(0, 1, 1)] = 1.0 / 6.0;
    p[(1, 1, 1)] = 1.0 / 6.0;
    p[(0, 2, 2)] = 1.0 / 9.0;
    p[(1, 2, 2)] = 2.0 / 9.0;
    JointDist3::validate(p).unwrap()
}

/// The swapped-block companion of [`blockwise_example`]: same pair
/// marginals, support moved to the off-diagonal of the first block.
pub fn blockwise_companion() -> JointDist3 {
    let mut p = Array3::zeros((2, 3, 3));
    p[(0, 0, 1)] = 1.0 / 6.0;
    p[(1, 0, 1)] = 1.0 / 6.0;
    p[(0, 1, 0)] = 1.0 / 6.0;
    p[(1, 1, 0)] = 1.0 / 6.0;
    p[(0, 2, 2)] = 1.0 / 9.0;
    p[(1, 2, 2)] = 2.0 / 9.0;
    JointDist3::validate(p).unwrap()
}
