//! Fixed-size complex linear algebra for 4x4 spinor kernels and 2x2 band
//! problems. Dimensions are known at compile time, so everything is plain
//! arrays on the stack.

use num_complex::Complex64;
// Float supplies the math methods the std prelude would; only the
// no_std build resolves through it.
#[cfg(not(test))]
use num_traits::Float;

pub type C64 = Complex64;
/// 4x4 complex matrix, row major.
pub type Mat4 = [[C64; 4]; 4];
/// Length-4 complex column vector.
pub type Vec4 = [C64; 4];
/// 2x2 complex matrix, row major.
pub type Mat2 = [[C64; 2]; 2];

pub const C_ZERO: C64 = C64::new(0.0, 0.0);
pub const C_ONE: C64 = C64::new(1.0, 0.0);
pub const C_I: C64 = C64::new(0.0, 1.0);

pub fn mat4_zero() -> Mat4 {
    [[C_ZERO; 4]; 4]
}

pub fn mat4_identity() -> Mat4 {
    let mut m = mat4_zero();
    for i in 0..4 {
        m[i][i] = C_ONE;
    }
    m
}

pub fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = mat4_zero();
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            if aik == C_ZERO {
                continue;
            }
            for j in 0..4 {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn mat4_add(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = *a;
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] += b[i][j];
        }
    }
    out
}

pub fn mat4_sub(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = *a;
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] -= b[i][j];
        }
    }
    out
}

pub fn mat4_scale(a: &Mat4, s: C64) -> Mat4 {
    let mut out = *a;
    for row in out.iter_mut() {
        for x in row.iter_mut() {
            *x *= s;
        }
    }
    out
}

pub fn mat4_adjoint(a: &Mat4) -> Mat4 {
    let mut out = mat4_zero();
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i].conj();
        }
    }
    out
}

pub fn mat4_vec(a: &Mat4, v: &Vec4) -> Vec4 {
    let mut out = [C_ZERO; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i] += a[i][j] * v[j];
        }
    }
    out
}

/// Largest entry magnitude, used as a residual norm.
pub fn mat4_max_abs(a: &Mat4) -> f64 {
    let mut m = 0.0f64;
    for row in a.iter() {
        for x in row.iter() {
            m = m.max(x.norm());
        }
    }
    m
}

/// Outer product u v^dagger.
pub fn vec4_outer(u: &Vec4, v: &Vec4) -> Mat4 {
    let mut out = mat4_zero();
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = u[i] * v[j].conj();
        }
    }
    out
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C_ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat2_vec(a: &Mat2, v: &[C64; 2]) -> [C64; 2] {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

pub fn mat2_adjoint(a: &Mat2) -> Mat2 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

pub fn mat2_max_abs(a: &Mat2) -> f64 {
    let mut m = 0.0f64;
    for row in a.iter() {
        for x in row.iter() {
            m = m.max(x.norm());
        }
    }
    m
}

/// Eigen-decomposition of a Hermitian 2x2 matrix.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns. The phase of each eigenvector is fixed by making
/// its first component with magnitude above `1e-12` real and non-negative,
/// which keeps the decomposition deterministic across platforms.
pub fn herm2_eigen(h: &Mat2) -> ([f64; 2], [[C64; 2]; 2]) {
    let a = h[0][0].re;
    let b = h[1][1].re;
    let c = h[0][1];
    let half_tr = 0.5 * (a + b);
    let half_diff = 0.5 * (a - b);
    let u = c.norm();
    let disc = half_diff.hypot(u);
    let lo = half_tr - disc;
    let hi = half_tr + disc;

    if u <= f64::EPSILON * (a.abs() + b.abs() + 1.0) {
        // Diagonal to rounding (degenerate included): pick the axes, ordered.
        let cols = if a <= b {
            [[C_ONE, C_ZERO], [C_ZERO, C_ONE]]
        } else {
            [[C_ZERO, C_ONE], [C_ONE, C_ZERO]]
        };
        return ([lo, hi], cols);
    }

    // Upper eigenvector (u, q e^{-i arg c}) with q = disc - half_diff written
    // without cancellation; the lower one is its exact orthogonal partner,
    // (q, -u e^{-i arg c}). Both first components are real non-negative,
    // which is the deterministic gauge.
    let q = if half_diff > 0.0 {
        u * u / (disc + half_diff)
    } else {
        disc - half_diff
    };
    let n = u.hypot(q);
    let phase = c.conj() / u;
    let (un, qn) = (u / n, q / n);
    let v_lo = [C64::new(qn, 0.0), phase * -un];
    let v_hi = [C64::new(un, 0.0), phase * qn];
    ([lo, hi], [[v_lo[0], v_hi[0]], [v_lo[1], v_hi[1]]])
}

/// Inverse square root of a Hermitian positive-definite 2x2 matrix.
pub fn herm2_inv_sqrt(h: &Mat2) -> Mat2 {
    let (vals, vecs) = herm2_eigen(h);
    debug_assert!(vals[0] > 0.0);
    let w = [1.0 / vals[0].sqrt(), 1.0 / vals[1].sqrt()];
    // V diag(w) V^dagger with eigenvector columns in `vecs`.
    let mut out = [[C_ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut s = C_ZERO;
            for (k, wk) in w.iter().enumerate() {
                s += vecs[i][k] * wk * vecs[j][k].conj();
            }
            out[i][j] = s;
        }
    }
    out
}

/// Cascade summation over a fixed slice order. Deterministic for a given
/// slice regardless of how the slice was produced, so parallel drivers that
/// collect into index order reduce bit-identically across thread counts.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        let mut acc = 0.0;
        for x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Complex counterpart of [`pairwise_sum`].
pub fn pairwise_sum_c(xs: &[C64]) -> C64 {
    if xs.len() <= 8 {
        let mut acc = C_ZERO;
        for x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum_c(&xs[..mid]) + pairwise_sum_c(&xs[mid..])
}
