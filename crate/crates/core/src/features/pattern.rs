//! Fixed 256-pair binary test pattern for the rotated BRIEF descriptor.
//!
//! Each row is `(x1, y1, x2, y2)` relative to the keypoint, inside a 27×27 box.
//! Generated once from an isotropic Gaussian (σ = 5.2 px) with a fixed seed.

#[rustfmt::skip]
pub(crate) const PATTERN: [[i8; 4]; 256] = [
    [10, 2, 4, -2], [-1, 7, -5, -2], [-3, 10, -5, -3], [0, -6, -7, -8],
    [-3, 10, 12, 4], [0, -12, 8, -5], [3, 0, 5, 2], [5, 3, 7, 3],
    [2, 1, 2, 3], [-5, -1, 0, 3], [-3, -1, 4, -4], [5, 0, -2, -1],
    [-1, 1, 10, 0], [-5, 5, -5, 3], [11, 2, -4, -5], [-3, -11, -4, 0],
    [-6, 2, 4, 4], [-6, -6, -4, -1], [-9, 6, 2, -6], [5, -11, 0, -3],
    [2, 0, 7, -4], [-7, 1, -3, 6], [-7, -1, 6, -7], [-3, -5, 4, 1],
    [-6, 4, 4, -3], [-10, 0, 4, -7], [-4, -7, 10, -2], [-3, 3, -1, 8],
    [-1, 5, 0, 3], [9, 7, -7, -2], [5, 2, -3, -9], [3, 0, -7, 7],
    [0, 3, 10, -4], [3, -3, -1, -7], [-1, 3, 0, 0], [4, -10, 4, 4],
    [7, 1, 1, -2], [-7, -1, 4, -1], [-6, 13, -7, 6], [4, 1, -5, -1],
    [5, -1, -3, 6], [3, 6, 9, 4], [-8, -8, 7, 4], [-3, -4, 3, -7],
    [-10, -4, -4, 2], [-1, -4, 1, -6], [-4, 0, 2, 10], [-5, -2, -1, -6],
    [0, -5, 2, -4], [8, -5, -2, -12], [5, 12, -3, 5], [-11, 2, 1, 3],
    [0, -9, -6, -2], [-4, 3, -1, -2], [-5, 3, -4, 0], [-4, 4, -4, 2],
    [6, -2, -12, -5], [0, 2, -2, 0], [3, -2, -3, 1], [4, -5, -11, 1],
    [1, -8, 6, -6], [0, 5, -5, -4], [0, 2, -3, 1], [2, 0, -10, 0],
    [-11, 10, 5, 12], [1, 3, 3, -6], [-2, -5, 4, -8], [-6, -1, 2, -2],
    [6, 4, -12, 6], [-2, 0, -2, -4], [3, 6, 12, -6], [3, 4, 0, -1],
    [7, -12, 2, 2], [3, 0, 4, 7], [9, -3, -1, -1], [8, 2, 0, -6],
    [2, 3, 6, -11], [2, 13, -2, 0], [-4, -2, 6, -1], [0, 0, -1, -3],
    [-2, 5, -1, 2], [-3, 1, 0, 1], [-6, 0, 5, 0], [4, -6, -1, 7],
    [-3, -6, -5, 4], [-10, -4, -5, 6], [-8, -3, 7, -4], [0, 4, 2, -4],
    [-5, -7, 2, -2], [0, -4, -4, 1], [2, 3, 4, -4], [-5, -5, 12, -3],
    [3, 3, 0, 5], [-4, -5, 7, -8], [1, 11, 2, -5], [8, 1, 0, 0],
    [1, -5, -1, -3], [4, 1, 3, -12], [-9, -10, -7, 5], [3, -4, 3, -6],
    [8, -10, 6, 3], [-3, 2, 6, 0], [-3, 1, -2, 5], [-5, 5, 10, -4],
    [-5, -4, -3, -7], [11, 2, -5, -3], [-2, 2, -5, 0], [6, 2, -9, -5],
    [-3, -2, -5, -4], [5, -1, -2, 0], [-1, 10, 7, 12], [0, -1, -8, -2],
    [3, -1, 2, 3], [-5, -1, 7, 0], [2, 9, 1, 0], [-6, 2, 11, 3],
    [4, 0, -2, 7], [4, 5, -6, 2], [-6, 12, 2, 3], [3, 0, 8, -3],
    [0, -11, -2, -7], [9, 2, 3, -3], [5, 10, -2, 4], [2, -4, -3, -5],
    [1, -2, -2, -2], [-7, 0, -10, 1], [-6, 5, -7, 2], [-6, 4, 5, -6],
    [-4, -8, -5, -3], [-1, -1, 6, 12], [-10, 3, 5, -7], [-12, 4, -6, 9],
    [7, -9, 2, 0], [1, -8, -1, 2], [-1, -3, 6, 12], [-6, 1, 7, 2],
    [1, 3, 5, -2], [-1, 7, 1, 3], [-3, -3, 3, -2], [3, 3, -2, -6],
    [-1, 4, -4, 1], [-2, -3, -5, 2], [6, 10, 4, 2], [-9, -2, 9, -1],
    [4, 1, 7, -6], [-9, -2, -2, 6], [-5, -6, 2, -4], [1, -5, -7, -1],
    [-1, 2, 1, -6], [2, 6, -5, -10], [-6, 11, -11, 3], [11, 2, 9, -5],
    [-6, 0, -1, -1], [-6, -4, 8, -1], [-1, 6, 0, 10], [0, 1, 7, -10],
    [9, -5, 3, 0], [1, 1, -4, 2], [0, -1, 6, -3], [8, -1, 3, -2],
    [3, -4, -7, -2], [-2, 8, -4, 6], [5, -1, -6, 5], [-3, 1, -1, -8],
    [3, 4, 0, -6], [1, -1, 0, 7], [4, 5, -5, 1], [12, -2, 13, 6],
    [2, -10, 12, -1], [-3, 3, -1, 0], [-10, -10, -7, 3], [2, 0, -1, -11],
    [6, 0, 7, 1], [-10, 0, -10, -1], [12, -3, -2, 1], [10, -1, 2, 7],
    [1, 1, 0, 3], [1, -3, 4, 3], [-5, -1, -4, 0], [-3, -1, -4, -7],
    [2, 3, 0, -3], [3, -2, 5, -2], [0, -3, 9, -2], [2, 0, 5, 2],
    [5, 3, -6, 1], [-7, 6, 7, 0], [2, 2, 8, 1], [-2, 2, 4, -2],
    [8, -4, 4, 6], [1, 7, 5, 5], [-3, 4, 0, 7], [-6, -6, 0, 2],
    [2, 1, 5, 3], [-1, 3, -6, -7], [-2, -4, 1, -4], [-1, 5, 0, 5],
    [2, -9, 6, 3], [-7, -4, -5, -5], [7, 12, 3, 0], [0, 5, 2, 3],
    [3, 2, 11, 0], [10, -4, -2, 3], [-1, 5, 4, 4], [-3, 9, 8, 7],
    [-1, 0, 10, 8], [3, 2, 4, 2], [13, 5, 1, 8], [-4, 2, -4, 3],
    [2, -1, -10, 10], [-1, -6, 6, 6], [-12, 6, 8, 3], [-1, -13, -4, -2],
    [-5, -3, 4, -5], [7, -3, -2, -9], [3, -3, -9, -1], [1, 2, 7, 0],
    [-5, -2, 1, -4], [-2, -4, -1, 2], [-7, 0, 3, 7], [-5, 7, -4, -2],
    [7, 1, -9, 1], [5, 9, 3, -6], [1, 6, -11, 3], [-4, 1, -2, 6],
    [-1, 12, -1, -3], [-1, -1, -4, 2], [1, 3, -6, -3], [-2, 4, -5, -1],
    [6, -6, 1, -8], [4, -6, 1, -1], [-5, -2, -10, -1], [-4, -10, 4, 0],
    [-1, 2, -3, -3], [6, 9, -2, -11], [3, 7, -3, -4], [8, -2, 0, -7],
    [-2, -2, 1, 2], [3, -5, 0, -4], [-4, 1, -6, 1], [-6, 4, -3, -1],
    [-3, -6, 4, 4], [8, 0, 1, -4], [-9, 10, 0, -3], [-1, -4, -2, 0],
    [13, 5, 3, -7], [3, -2, 0, -5], [2, -5, -3, 5], [0, 0, -2, -2],
    [9, -10, 7, -1], [5, 3, 3, -2], [1, 3, 2, -1], [-2, 1, -6, -4],
    [-10, -5, 8, 7], [9, -5, -6, 2], [8, 1, 5, 1], [-3, 1, -5, 2],
];
