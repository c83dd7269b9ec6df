//! Gamma-matrix algebra and on-shell Dirac spinors.
//!
//! Momenta are measured in units of the probe particle mass (m = 1), so the
//! mass shell is `e = sqrt(1 + |k|^2)` and the covariant normalization reads
//! `ubar(k,s) u(k,s') = 2 delta_{ss'}`. The metric signature is (+,-,-,-)
//! and the matrices use the Dirac (standard) representation.

use crate::linalg::{
    mat4_adjoint, mat4_identity, mat4_max_abs, mat4_mul, mat4_scale, mat4_sub, mat4_vec, mat4_zero,
    Mat4, Vec4, C64, C_ONE, C_ZERO,
};
use num_traits::Float;

/// Relative tolerance for the mass-shell check.
pub const ON_SHELL_TOL: f64 = 1e-12;
/// Smallest momentum-transfer magnitude accepted by the polarization kernel.
pub const MIN_TRANSFER_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum DiracError {
    /// Energy component inconsistent with the unit mass shell.
    OffShell { e: f64, expected: f64 },
    /// Momentum transfer too small for the direction-dependent kernel.
    ZeroTransfer { norm: f64 },
}

impl core::fmt::Display for DiracError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DiracError::OffShell { e, expected } => write!(
                f,
                "four-momentum off the unit mass shell: e = {e:e}, shell requires {expected:e}"
            ),
            DiracError::ZeroTransfer { norm } => write!(
                f,
                "momentum transfer norm {norm:e} below {MIN_TRANSFER_NORM:e}; direction undefined"
            ),
        }
    }
}

/// Contravariant four-vector (e, kx, ky, kz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourVector {
    pub e: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FourVector {
    /// On-shell four-momentum for unit mass: e = sqrt(1 + |k|^2).
    pub fn on_shell(kx: f64, ky: f64, kz: f64) -> Self {
        let e = (1.0 + kx * kx + ky * ky + kz * kz).sqrt();
        FourVector {
            e,
            x: kx,
            y: ky,
            z: kz,
        }
    }

    /// Validating constructor; rejects energies off the unit mass shell.
    pub fn try_new(e: f64, kx: f64, ky: f64, kz: f64) -> Result<Self, DiracError> {
        let expected = (1.0 + kx * kx + ky * ky + kz * kz).sqrt();
        if (e - expected).abs() > ON_SHELL_TOL * expected {
            return Err(DiracError::OffShell { e, expected });
        }
        Ok(FourVector {
            e,
            x: kx,
            y: ky,
            z: kz,
        })
    }

    /// Contravariant component k^mu, mu in 0..4.
    pub fn component(&self, mu: usize) -> f64 {
        match mu {
            0 => self.e,
            1 => self.x,
            2 => self.y,
            3 => self.z,
            _ => panic!("four-vector index {mu} out of range"),
        }
    }

    /// Minkowski product a.b with signature (+,-,-,-).
    pub fn dot(&self, other: &FourVector) -> f64 {
        self.e * other.e - self.x * other.x - self.y * other.y - self.z * other.z
    }

    pub fn spatial_norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// The four gamma matrices in the Dirac representation plus the metric.
pub struct GammaSet {
    gammas: [Mat4; 4],
    metric: [f64; 4],
}

impl GammaSet {
    pub fn new() -> Self {
        let i = C64::new(0.0, 1.0);
        let mut g0 = mat4_zero();
        g0[0][0] = C_ONE;
        g0[1][1] = C_ONE;
        g0[2][2] = -C_ONE;
        g0[3][3] = -C_ONE;

        let mut g1 = mat4_zero();
        g1[0][3] = C_ONE;
        g1[1][2] = C_ONE;
        g1[2][1] = -C_ONE;
        g1[3][0] = -C_ONE;

        let mut g2 = mat4_zero();
        g2[0][3] = -i;
        g2[1][2] = i;
        g2[2][1] = i;
        g2[3][0] = -i;

        let mut g3 = mat4_zero();
        g3[0][2] = C_ONE;
        g3[1][3] = -C_ONE;
        g3[2][0] = -C_ONE;
        g3[3][1] = C_ONE;

        GammaSet {
            gammas: [g0, g1, g2, g3],
            metric: [1.0, -1.0, -1.0, -1.0],
        }
    }

    pub fn gamma(&self, mu: usize) -> &Mat4 {
        &self.gammas[mu]
    }

    /// Diagonal of the metric tensor g^{mu mu}.
    pub fn metric_diag(&self) -> [f64; 4] {
        self.metric
    }

    /// Feynman slash: gamma^mu k_mu = gamma^0 e - gamma.k.
    pub fn slash(&self, k: &FourVector) -> Mat4 {
        let mut out = mat4_zero();
        for mu in 0..4 {
            let coeff = C64::new(self.metric[mu] * k.component(mu), 0.0);
            let g = &self.gammas[mu];
            for r in 0..4 {
                for c in 0..4 {
                    out[r][c] += coeff * g[r][c];
                }
            }
        }
        out
    }

    /// Largest entry of {gamma^mu, gamma^nu} - 2 g^{mu nu} I over all pairs.
    pub fn anticommutation_residual(&self) -> f64 {
        let id = mat4_identity();
        let mut worst = 0.0f64;
        for mu in 0..4 {
            for nu in 0..4 {
                let ab = mat4_mul(&self.gammas[mu], &self.gammas[nu]);
                let ba = mat4_mul(&self.gammas[nu], &self.gammas[mu]);
                let mut anti = mat4_zero();
                for r in 0..4 {
                    for c in 0..4 {
                        anti[r][c] = ab[r][c] + ba[r][c];
                    }
                }
                let target = if mu == nu {
                    mat4_scale(&id, C64::new(2.0 * self.metric[mu], 0.0))
                } else {
                    mat4_zero()
                };
                worst = worst.max(mat4_max_abs(&mat4_sub(&anti, &target)));
            }
        }
        worst
    }

    /// Largest deviation from (gamma^0)^dag = gamma^0 and (gamma^i)^dag = -gamma^i.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst = mat4_max_abs(&mat4_sub(&mat4_adjoint(&self.gammas[0]), &self.gammas[0]));
        for i in 1..4 {
            let target = mat4_scale(&self.gammas[i], -C_ONE);
            worst = worst.max(mat4_max_abs(&mat4_sub(
                &mat4_adjoint(&self.gammas[i]),
                &target,
            )));
        }
        worst
    }
}

impl Default for GammaSet {
    fn default() -> Self {
        GammaSet::new()
    }
}

/// Spin projection along z in the particle rest frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Up,
    Down,
}

pub const SPINS: [Spin; 2] = [Spin::Up, Spin::Down];

/// Four-component spinor with covariant normalization ubar u = 2m.
#[derive(Debug, Clone, Copy)]
pub struct DiracSpinor {
    pub components: Vec4,
}

/// On-shell spinor u(k, s): rest-frame Pauli spinor boosted along k.
pub fn dirac_spinor(k: &FourVector, spin: Spin) -> Result<DiracSpinor, DiracError> {
    let expected = (1.0 + k.x * k.x + k.y * k.y + k.z * k.z).sqrt();
    if (k.e - expected).abs() > ON_SHELL_TOL * expected {
        return Err(DiracError::OffShell { e: k.e, expected });
    }
    let chi: [C64; 2] = match spin {
        Spin::Up => [C_ONE, C_ZERO],
        Spin::Down => [C_ZERO, C_ONE],
    };
    // sigma.k acting on the rest-frame spinor.
    let sk = [
        [C64::new(k.z, 0.0), C64::new(k.x, -k.y)],
        [C64::new(k.x, k.y), C64::new(-k.z, 0.0)],
    ];
    let sk_chi = [
        sk[0][0] * chi[0] + sk[0][1] * chi[1],
        sk[1][0] * chi[0] + sk[1][1] * chi[1],
    ];
    let n = (k.e + 1.0).sqrt();
    Ok(DiracSpinor {
        components: [chi[0] * n, chi[1] * n, sk_chi[0] / n, sk_chi[1] / n],
    })
}

/// Dirac adjoint row vector ubar = u^dagger gamma^0.
pub fn adjoint_row(gs: &GammaSet, u: &DiracSpinor) -> Vec4 {
    let g0 = gs.gamma(0);
    let mut row = [C_ZERO; 4];
    for j in 0..4 {
        for i in 0..4 {
            row[j] += u.components[i].conj() * g0[i][j];
        }
    }
    row
}

fn row_mat_vec(row: &Vec4, m: &Mat4, v: &Vec4) -> C64 {
    let mv = mat4_vec(m, v);
    let mut s = C_ZERO;
    for i in 0..4 {
        s += row[i] * mv[i];
    }
    s
}

/// Spinor sandwich ubar(k2,s2) gamma^nu u(k1,s1).
///
/// For k2 = k1 this is the conserved-current form 2 k^nu delta_{s2 s1}.
pub fn spinor_bilinear(
    gs: &GammaSet,
    k2: &FourVector,
    s2: Spin,
    nu: usize,
    k1: &FourVector,
    s1: Spin,
) -> Result<C64, DiracError> {
    let u2 = dirac_spinor(k2, s2)?;
    let u1 = dirac_spinor(k1, s1)?;
    let row = adjoint_row(gs, &u2);
    Ok(row_mat_vec(&row, gs.gamma(nu), &u1.components))
}

/// Completeness sum over spins: sum_s u(k,s) ubar(k,s) = slash(k) + I.
pub fn spin_sum_projector(gs: &GammaSet, k: &FourVector) -> Result<Mat4, DiracError> {
    let mut acc = mat4_zero();
    for s in SPINS {
        let u = dirac_spinor(k, s)?;
        let row = adjoint_row(gs, &u);
        for i in 0..4 {
            for j in 0..4 {
                acc[i][j] += u.components[i] * row[j];
            }
        }
    }
    Ok(acc)
}

/// Intermediate-spin sum
/// sum_{ss} [ubar(k_in,s2) gamma^nu u(k_s,ss)] [ubar(k_s,ss) gamma^alpha u(k_in,s1)].
///
/// For k_s -> k_in this collapses to 4 k_in^nu k_in^alpha delta_{s2 s1}; the
/// deviation grows linearly in |k_s - k_in| / |k_in|.
pub fn contraction_sum(
    gs: &GammaSet,
    k_in: &FourVector,
    s1: Spin,
    s2: Spin,
    k_s: &FourVector,
    nu: usize,
    alpha: usize,
) -> Result<C64, DiracError> {
    let u_in1 = dirac_spinor(k_in, s1)?;
    let u_in2 = dirac_spinor(k_in, s2)?;
    let row2 = adjoint_row(gs, &u_in2);
    let mut acc = C_ZERO;
    for ss in SPINS {
        let u_mid = dirac_spinor(k_s, ss)?;
        let row_mid = adjoint_row(gs, &u_mid);
        let left = row_mat_vec(&row2, gs.gamma(nu), &u_mid.components);
        let right = row_mat_vec(&row_mid, gs.gamma(alpha), &u_in1.components);
        acc += left * right;
    }
    Ok(acc)
}

/// Leading small-transfer value of [`contraction_sum`]: 4 k^nu k^alpha delta_{s2 s1}.
pub fn contraction_small_q_limit(
    k_in: &FourVector,
    s1: Spin,
    s2: Spin,
    nu: usize,
    alpha: usize,
) -> C64 {
    if s1 != s2 {
        return C_ZERO;
    }
    C64::new(4.0 * k_in.component(nu) * k_in.component(alpha), 0.0)
}

/// Polarization kernel of the momentum transfer: selects the density
/// component untouched and projects spatial currents onto the plane
/// transverse to s.
///
/// Entries: D[0][0] = 1, D[i][j] = s_i s_j / |s|^2 - delta_ij for spatial
/// i, j, and zero on the mixed time-space blocks.
#[derive(Debug, Clone)]
pub struct DTildeKernel {
    pub s: [f64; 3],
    pub entries: [[f64; 4]; 4],
}

impl DTildeKernel {
    /// Contraction sum_nu D[mu][nu] v^nu for a contravariant four-vector.
    pub fn contract(&self, v: &[f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for mu in 0..4 {
            for nu in 0..4 {
                out[mu] += self.entries[mu][nu] * v[nu];
            }
        }
        out
    }
}

/// Build the polarization kernel for spatial momentum transfer s.
pub fn dtilde(s: [f64; 3]) -> Result<DTildeKernel, DiracError> {
    let norm_sq = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
    let norm = norm_sq.sqrt();
    if norm < MIN_TRANSFER_NORM {
        return Err(DiracError::ZeroTransfer { norm });
    }
    let mut entries = [[0.0; 4]; 4];
    entries[0][0] = 1.0;
    for i in 0..3 {
        for j in 0..3 {
            entries[i + 1][j + 1] = s[i] * s[j] / norm_sq - if i == j { 1.0 } else { 0.0 };
        }
    }
    Ok(DTildeKernel { s, entries })
}
