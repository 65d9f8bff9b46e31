//! Haar transforms in the averaging convention.
//!
//! A parent scale coefficient is the mean of its children. In 1D a pair
//! `(x0, x1)` lifts to `scale = (x0 + x1) / 2` and `detail = (x1 - x0) / 2`,
//! so `x0 = scale - detail` and `x1 = scale + detail`. The 3D transform is the
//! separable product of three 1D steps over a 2x2x2 block of children.
//!
//! Octants and detail slots share one indexing scheme: bit `k` of an index
//! refers to axis `k`. For a child index, a set bit selects the `+` half along
//! that axis. For a detail index `o` in `1..8`, the set bits name the axes the
//! coefficient differentiates along. Detail `o` is stored at `details[o - 1]`.

use thiserror::Error;

/// Number of children of an octree node.
pub const NUM_CHILDREN: usize = 8;
/// Number of detail coefficients per 3D node.
pub const NUM_DETAILS: usize = 7;

/// The seven detail coefficients of one 3D node.
pub type DetailBlock = [f64; NUM_DETAILS];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransformError {
    #[error("signal length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("requested {requested} levels but a signal of length {len} supports at most {max}")]
    TooManyLevels {
        requested: usize,
        len: usize,
        max: usize,
    },
    #[error("detail level {level} has length {actual}, expected {expected}")]
    DetailLength {
        level: usize,
        actual: usize,
        expected: usize,
    },
}

/// Sign of child `child` in the basis function of detail slot `detail`
/// (a nonzero octant mask).
#[inline]
pub fn detail_sign(detail: usize, child: usize) -> f64 {
    // Product over the axes in `detail` of (+1 on the + half, -1 on the - half).
    if (detail & !child).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Forward lift of eight children (ordered by octant) into a parent scale
/// coefficient and its detail block.
pub fn lift_forward_3d(children: &[f64; NUM_CHILDREN]) -> (f64, DetailBlock) {
    let mut c = *children;
    for axis in 0..3 {
        let bit = 1 << axis;
        for lo in 0..NUM_CHILDREN {
            if lo & bit == 0 {
                let hi = lo | bit;
                let (a, b) = (c[lo], c[hi]);
                c[lo] = 0.5 * (a + b);
                c[hi] = 0.5 * (b - a);
            }
        }
    }
    let mut details = [0.0; NUM_DETAILS];
    details.copy_from_slice(&c[1..]);
    (c[0], details)
}

/// Inverse of [`lift_forward_3d`].
pub fn lift_backward_3d(parent: f64, details: &DetailBlock) -> [f64; NUM_CHILDREN] {
    let mut c = [0.0; NUM_CHILDREN];
    c[0] = parent;
    c[1..].copy_from_slice(details);
    for axis in (0..3).rev() {
        let bit = 1 << axis;
        for lo in 0..NUM_CHILDREN {
            if lo & bit == 0 {
                let hi = lo | bit;
                let (s, d) = (c[lo], c[hi]);
                c[lo] = s - d;
                c[hi] = s + d;
            }
        }
    }
    c
}

/// Reconstructs a single child of a node without materializing its siblings.
#[inline]
pub fn reconstruct_child(parent: f64, details: &DetailBlock, child: usize) -> f64 {
    let mut value = parent;
    for (slot, d) in details.iter().enumerate() {
        value += detail_sign(slot + 1, child) * d;
    }
    value
}

/// Result of a multi-level 1D transform. `details[0]` is the finest level.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition1D {
    pub coarse: Vec<f64>,
    pub details: Vec<Vec<f64>>,
}

fn checked_log2(len: usize) -> Result<usize, TransformError> {
    if len == 0 || !len.is_power_of_two() {
        return Err(TransformError::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros() as usize)
}

/// Fast wavelet transform of a power-of-two signal over `levels` levels.
pub fn fwt_1d(signal: &[f64], levels: usize) -> Result<Decomposition1D, TransformError> {
    let max = checked_log2(signal.len())?;
    if levels > max {
        return Err(TransformError::TooManyLevels {
            requested: levels,
            len: signal.len(),
            max,
        });
    }
    let mut coarse = signal.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let half = coarse.len() / 2;
        let mut next = Vec::with_capacity(half);
        let mut detail = Vec::with_capacity(half);
        for pair in coarse.chunks_exact(2) {
            next.push(0.5 * (pair[0] + pair[1]));
            detail.push(0.5 * (pair[1] - pair[0]));
        }
        details.push(detail);
        coarse = next;
    }
    Ok(Decomposition1D { coarse, details })
}

/// Inverse fast wavelet transform.
pub fn ifwt_1d(decomposition: &Decomposition1D) -> Result<Vec<f64>, TransformError> {
    let levels = decomposition.details.len();
    let coarse_len = decomposition.coarse.len();
    checked_log2(coarse_len)?;
    let mut signal = decomposition.coarse.clone();
    for level in (0..levels).rev() {
        let detail = &decomposition.details[level];
        if detail.len() != signal.len() {
            return Err(TransformError::DetailLength {
                level,
                actual: detail.len(),
                expected: signal.len(),
            });
        }
        let mut finer = Vec::with_capacity(2 * signal.len());
        for (s, d) in signal.iter().zip(detail) {
            finer.push(s - d);
            finer.push(s + d);
        }
        signal = finer;
    }
    Ok(signal)
}
