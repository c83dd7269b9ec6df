//! Two-band honeycomb tight-binding model.
//!
//! Carries the lattice geometry (nearest-neighbor bond along +x), the Bloch
//! eigensystem and interband coupling, real-space density/current matrix
//! elements over one unit cell, and their Fourier transforms at Bragg
//! vectors. Band quantities drive the pump dynamics; the Fourier tables are
//! what the diffraction layer contracts against.
//!
//! Real-space orbitals are a pluggable radial profile (Gaussian by default).
//! Two evaluation paths exist for the Bragg-vector transforms: honest cell
//! quadrature on a [`CellGrid`], and a closed-form lattice-sum kernel for
//! Gaussian orbitals that is exact for reciprocal-lattice vectors and cheap
//! enough to call once per momentum per time sample. Tests pin the two paths
//! against each other.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

// Float supplies the math methods the std prelude would; only the
// no_std build resolves through it.
#[cfg(not(test))]
use num_traits::Float;

use crate::linalg::{herm2_eigen, herm2_inv_sqrt, mat2_vec, Mat2, C64, C_I, C_ONE, C_ZERO};

/// In-plane 2-vector (atomic units).
pub type Vec2 = [f64; 2];

pub(crate) fn dot2(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn norm2(a: Vec2) -> f64 {
    dot2(a, a).sqrt()
}

pub(crate) fn add2(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

/// Errors from lattice geometry, couplings, and matrix-element assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrapheneError {
    /// Bragg indices (0, 0) give the zero vector.
    ZeroBraggIndex,
    /// Momentum too close to a band degeneracy for a stable coupling.
    NearDegeneracy { distance: f64 },
    /// Finite-difference step must be positive.
    NonPositiveStep,
    /// Orbital width must be positive.
    NonPositiveWidth,
    /// Cell grid spacing cannot resolve the orbital profile.
    GridTooCoarse { spacing: f64, width: f64 },
    /// Cell grid needs at least the derivative-stencil footprint per axis.
    GridTooSmall { n: usize },
    /// Bragg vector advances the phase by >= pi per grid step.
    Aliased { phase_step: f64 },
    /// Field length does not match the grid.
    FieldShape { expected: usize, got: usize },
}

impl fmt::Display for GrapheneError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrapheneError::ZeroBraggIndex => write!(f, "Bragg indices (0, 0) are excluded"),
            GrapheneError::NearDegeneracy { distance } => write!(
                f,
                "momentum is {:.3e} a.u. from a band degeneracy; coupling is singular there",
                distance
            ),
            GrapheneError::NonPositiveStep => write!(f, "finite-difference step must be positive"),
            GrapheneError::NonPositiveWidth => write!(f, "orbital width must be positive"),
            GrapheneError::GridTooCoarse { spacing, width } => write!(
                f,
                "cell grid spacing {:.3e} cannot resolve orbital width {:.3e}",
                spacing, width
            ),
            GrapheneError::GridTooSmall { n } => {
                write!(f, "cell grid needs at least 5 points per axis, got {}", n)
            }
            GrapheneError::Aliased { phase_step } => write!(
                f,
                "Bragg vector aliases on the cell grid (phase step {:.3} rad >= pi)",
                phase_step
            ),
            GrapheneError::FieldShape { expected, got } => {
                write!(f, "field has {} values but the grid has {}", got, expected)
            }
        }
    }
}

/// Honeycomb lattice with the nearest-neighbor bond along +x.
///
/// With this orientation the [1,1] Bragg vector b1+b2 lies along +x and
/// [1,-1] along +y, the geometry the diffraction layer assumes. b2 is the
/// exact y-mirror of b1 so those alignments hold bit-exactly.
#[derive(Debug, Clone, Copy)]
pub struct Lattice {
    /// Lattice constant |a1| = |a2|.
    pub a: f64,
    /// Nearest-neighbor bond length, a/sqrt(3).
    pub bond: f64,
    pub a1: Vec2,
    pub a2: Vec2,
    pub b1: Vec2,
    pub b2: Vec2,
    /// Sublattice site positions inside the cell.
    pub r_a: Vec2,
    pub r_b: Vec2,
    /// Vectors from an A site to its three B neighbors; delta[0] is the bond.
    pub delta: [Vec2; 3],
}

impl Lattice {
    pub fn honeycomb(a: f64) -> Self {
        let s3 = 3.0f64.sqrt();
        let d = a / s3;
        let g = 2.0 * PI / (3.0 * d);
        let b1 = [g, s3 * g];
        Lattice {
            a,
            bond: d,
            a1: [1.5 * d, 0.5 * s3 * d],
            a2: [1.5 * d, -0.5 * s3 * d],
            b1,
            b2: [b1[0], -b1[1]],
            r_a: [0.0, 0.0],
            r_b: [d, 0.0],
            delta: [
                [d, 0.0],
                [-0.5 * d, 0.5 * s3 * d],
                [-0.5 * d, -0.5 * s3 * d],
            ],
        }
    }

    /// Same lattice with both site positions moved by `u` (cell origin choice).
    pub fn with_origin_shift(mut self, u: Vec2) -> Self {
        self.r_a = add2(self.r_a, u);
        self.r_b = add2(self.r_b, u);
        self
    }

    pub fn cell_area(&self) -> f64 {
        (self.a1[0] * self.a2[1] - self.a1[1] * self.a2[0]).abs()
    }

    /// S = h b1 + k b2.
    pub fn bragg_vector(&self, h: i32, k: i32) -> Result<Vec2, GrapheneError> {
        if h == 0 && k == 0 {
            return Err(GrapheneError::ZeroBraggIndex);
        }
        let (hf, kf) = (h as f64, k as f64);
        Ok([
            hf * self.b1[0] + kf * self.b2[0],
            hf * self.b1[1] + kf * self.b2[1],
        ])
    }

    /// A zone corner where the two bands touch (fractional (2/3, 1/3)).
    pub fn dirac_point(&self) -> Vec2 {
        let g = 2.0 * PI / (3.0 * self.bond);
        [g, g / 3.0f64.sqrt()]
    }
}

/// Nearest-neighbor phase sum f(p) = sum_i exp(i p.delta_i).
pub fn structure_factor(lat: &Lattice, p: Vec2) -> C64 {
    let mut f = C_ZERO;
    for d in lat.delta.iter() {
        f += C64::from_polar(1.0, dot2(p, *d));
    }
    f
}

/// Momentum gradient of the phase sum, df/dp.
pub fn structure_factor_gradient(lat: &Lattice, p: Vec2) -> [C64; 2] {
    let mut g = [C_ZERO; 2];
    for d in lat.delta.iter() {
        let e = C_I * C64::from_polar(1.0, dot2(p, *d));
        g[0] += e * d[0];
        g[1] += e * d[1];
    }
    g
}

/// Bloch Hamiltonian: zero diagonal, t_hop * f(p) off-diagonal.
pub fn hamiltonian_k(lat: &Lattice, t_hop: f64, p: Vec2) -> Mat2 {
    let f = structure_factor(lat, p) * t_hop;
    [[C_ZERO, f], [f.conj(), C_ZERO]]
}

/// Band label; valence sorts below conduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Valence,
    Conduction,
}

pub const BANDS: [Band; 2] = [Band::Valence, Band::Conduction];

impl Band {
    pub fn index(self) -> usize {
        match self {
            Band::Valence => 0,
            Band::Conduction => 1,
        }
    }
}

/// Eigensystem of the Bloch Hamiltonian at one crystal momentum.
#[derive(Debug, Clone, Copy)]
pub struct BandState {
    pub p: Vec2,
    pub eps_v: f64,
    pub eps_c: f64,
    /// Sublattice amplitudes, gauge-fixed: first component real non-negative.
    pub evec_v: [C64; 2],
    pub evec_c: [C64; 2],
}

impl BandState {
    pub fn eps(&self, b: Band) -> f64 {
        match b {
            Band::Valence => self.eps_v,
            Band::Conduction => self.eps_c,
        }
    }

    pub fn evec(&self, b: Band) -> [C64; 2] {
        match b {
            Band::Valence => self.evec_v,
            Band::Conduction => self.evec_c,
        }
    }
}

/// Ordered, gauge-fixed eigensystem of a 2x2 Bloch Hamiltonian.
pub fn eigensystem(h: &Mat2, p: Vec2) -> BandState {
    let (vals, vecs) = herm2_eigen(h);
    BandState {
        p,
        eps_v: vals[0],
        eps_c: vals[1],
        evec_v: [vecs[0][0], vecs[1][0]],
        evec_c: [vecs[0][1], vecs[1][1]],
    }
}

/// Distance from `p` to the nearest band degeneracy, inferred from |f(p)|.
/// The linearization |f| ~ (3 bond/2) |p - K| is tight near the cones, which
/// is the only place the estimate is used as a guard.
pub fn degeneracy_distance(lat: &Lattice, p: Vec2) -> f64 {
    2.0 * structure_factor(lat, p).norm() / (3.0 * lat.bond)
}

fn phase_aligned(v: [C64; 2], anchor: [C64; 2]) -> [C64; 2] {
    let z = anchor[0].conj() * v[0] + anchor[1].conj() * v[1];
    let ph = z.conj() / z.norm();
    [v[0] * ph, v[1] * ph]
}

/// Interband coupling i <u_c(p) | grad_p u_v(p)> by central differences.
///
/// Neighbor eigenvectors are phase-aligned to the central ones before
/// differencing, so arbitrary eigensolver phases drop out; because
/// <u_c|u_v> = 0 the result is gauge-twist free and lands in the central
/// point's fixed gauge. Error is O(dp^2).
pub fn interband_coupling(
    lat: &Lattice,
    t_hop: f64,
    p: Vec2,
    dp: f64,
) -> Result<[C64; 2], GrapheneError> {
    if dp <= 0.0 || dp.is_nan() {
        return Err(GrapheneError::NonPositiveStep);
    }
    let distance = degeneracy_distance(lat, p);
    if distance < 8.0 * dp {
        return Err(GrapheneError::NearDegeneracy { distance });
    }
    let state_at = |q: Vec2| eigensystem(&hamiltonian_k(lat, t_hop, q), q);
    let center = state_at(p);
    let mut out = [C_ZERO; 2];
    for axis in 0..2 {
        let mut plus = p;
        plus[axis] += dp;
        let mut minus = p;
        minus[axis] -= dp;
        let vp = phase_aligned(state_at(plus).evec_v, center.evec_v);
        let vm = phase_aligned(state_at(minus).evec_v, center.evec_v);
        let dv = [(vp[0] - vm[0]) / (2.0 * dp), (vp[1] - vm[1]) / (2.0 * dp)];
        out[axis] = C_I * (center.evec_c[0].conj() * dv[0] + center.evec_c[1].conj() * dv[1]);
    }
    Ok(out)
}

/// Closed form of the interband coupling, -grad(arg f)/2.
///
/// In the fixed gauge both components are real; valid for any positive
/// hopping. Agrees with the finite-difference construction as dp -> 0.
pub fn interband_coupling_closed_form(lat: &Lattice, p: Vec2) -> Result<[f64; 2], GrapheneError> {
    let f = structure_factor(lat, p);
    let distance = 2.0 * f.norm() / (3.0 * lat.bond);
    if distance < 1e-9 {
        return Err(GrapheneError::NearDegeneracy { distance });
    }
    let grad = structure_factor_gradient(lat, p);
    let n2 = f.norm_sqr();
    Ok([
        -0.5 * (f.conj() * grad[0]).im / n2,
        -0.5 * (f.conj() * grad[1]).im / n2,
    ])
}

/// Radial atomic orbital profile for real-space Bloch orbitals, normalized
/// to unit planar density: int |phi|^2 d^2 r = 1.
pub trait OrbitalProfile {
    /// Amplitude at displacement (dx, dy) from the center.
    fn value(&self, dx: f64, dy: f64) -> f64;
    /// Cartesian gradient of the amplitude.
    fn gradient(&self, dx: f64, dy: f64) -> [f64; 2];
    /// Length scale the cell grid must resolve.
    fn width(&self) -> f64;
    /// Radius beyond which the amplitude is negligible.
    fn tail_radius(&self) -> f64;
}

/// Isotropic Gaussian, exp(-r^2 / 2 sigma^2) / (sqrt(pi) sigma).
#[derive(Debug, Clone, Copy)]
pub struct GaussianOrbital {
    pub sigma: f64,
}

impl GaussianOrbital {
    pub fn new(sigma: f64) -> Result<Self, GrapheneError> {
        if sigma <= 0.0 || sigma.is_nan() {
            return Err(GrapheneError::NonPositiveWidth);
        }
        Ok(GaussianOrbital { sigma })
    }
}

impl OrbitalProfile for GaussianOrbital {
    fn value(&self, dx: f64, dy: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        (-(dx * dx + dy * dy) / (2.0 * s2)).exp() / (PI.sqrt() * self.sigma)
    }

    fn gradient(&self, dx: f64, dy: f64) -> [f64; 2] {
        let s2 = self.sigma * self.sigma;
        let v = self.value(dx, dy);
        [-dx / s2 * v, -dy / s2 * v]
    }

    fn width(&self) -> f64 {
        self.sigma
    }

    fn tail_radius(&self) -> f64 {
        8.0 * self.sigma
    }
}

/// Uniform quadrature grid over one unit cell.
///
/// Points sit at fractional coordinates (i/n, j/n) of (a1, a2), anchored at
/// the A site. Integrands assembled from Bloch-orbital pairs are exactly
/// cell-periodic, so the equal-weight rule is spectrally accurate.
/// `halo` is the number of neighbor-cell shells whose atoms contribute to
/// orbital sums evaluated on this grid.
#[derive(Debug, Clone, Copy)]
pub struct CellGrid {
    pub n: usize,
    pub halo: usize,
    pub origin: Vec2,
    pub step1: Vec2,
    pub step2: Vec2,
    /// Quadrature weight per point, cell_area / n^2.
    pub weight: f64,
}

impl CellGrid {
    pub fn new(lat: &Lattice, n: usize, halo: usize) -> Result<Self, GrapheneError> {
        // The 5-point derivative stencil must not wrap twice.
        if n < 5 {
            return Err(GrapheneError::GridTooSmall { n });
        }
        let nf = n as f64;
        Ok(CellGrid {
            n,
            halo,
            origin: lat.r_a,
            step1: [lat.a1[0] / nf, lat.a1[1] / nf],
            step2: [lat.a2[0] / nf, lat.a2[1] / nf],
            weight: lat.cell_area() / (nf * nf),
        })
    }

    pub fn num_points(&self) -> usize {
        self.n * self.n
    }

    /// Point position; index runs fastest along a1.
    pub fn position(&self, idx: usize) -> Vec2 {
        let i = (idx % self.n) as f64;
        let j = (idx / self.n) as f64;
        [
            self.origin[0] + i * self.step1[0] + j * self.step2[0],
            self.origin[1] + i * self.step1[1] + j * self.step2[1],
        ]
    }
}

/// Bloch orbital of one sublattice, chi_s(p, r) = sum_R e^{i p.(R + r_s)}
/// phi(r - R - r_s), with R running over the halo shells around the cell.
pub fn bloch_orbital(
    lat: &Lattice,
    orb: &impl OrbitalProfile,
    p: Vec2,
    site: Vec2,
    r: Vec2,
    halo: usize,
) -> C64 {
    let m = halo as i32;
    let mut acc = C_ZERO;
    for m1 in -m..=m {
        for m2 in -m..=m {
            let center = [
                site[0] + m1 as f64 * lat.a1[0] + m2 as f64 * lat.a2[0],
                site[1] + m1 as f64 * lat.a1[1] + m2 as f64 * lat.a2[1],
            ];
            let amp = orb.value(r[0] - center[0], r[1] - center[1]);
            if amp != 0.0 {
                acc += C64::from_polar(amp, dot2(p, center));
            }
        }
    }
    acc
}

/// Scale linking raw orbital-pair currents to the hopping model's
/// band velocities.
///
/// The literal two-center current of localized orbitals is proportional to
/// the nearest-neighbor velocity matrix element, but its overall scale (and
/// sign) is set by the orbital shape, which is a model input independent of
/// the hopping energy. Current fields are divided by this factor so that
/// band-diagonal currents integrate to d(eps)/dp for every band, restoring
/// the velocity sum rule of the two-band model.
///
/// Computed from the whole-plane pair-current integral at one bond:
/// kappa = -J_bond / (2 bond t_hop), with
/// J_bond = int [phi(r) d_x phi(r - bond x) - d_x phi(r) phi(r - bond x)].
pub fn current_calibration(lat: &Lattice, t_hop: f64, orb: &impl OrbitalProfile) -> f64 {
    let d = lat.bond;
    let l = orb.tail_radius();
    let h = orb.width() / 8.0;
    let nx = ((2.0 * l + d) / h).ceil() as usize + 1;
    let ny = (2.0 * l / h).ceil() as usize + 1;
    let mut j_bond = 0.0f64;
    for iy in 0..ny {
        let y = -l + iy as f64 * h;
        for ix in 0..nx {
            let x = -l + ix as f64 * h;
            let p0 = orb.value(x, y);
            let pd = orb.value(x - d, y);
            let g0 = orb.gradient(x, y)[0];
            let gd = orb.gradient(x - d, y)[0];
            j_bond += p0 * gd - g0 * pd;
        }
    }
    j_bond *= h * h;
    -j_bond / (2.0 * d * t_hop)
}

/// Real-space density and current matrix-element fields over one cell,
/// indexed pairs\[f\]\[n\] with 0 = valence, 1 = conduction.
pub struct CellFields {
    pub q: [[Vec<C64>; 2]; 2],
    pub jx: [[Vec<C64>; 2]; 2],
    pub jy: [[Vec<C64>; 2]; 2],
}

/// Density and x/y current fields of the band pair states at one momentum.
///
/// Q_{f,n}(r) = psi_f^* psi_n and J_{f,n}(r) = [psi_f^* D psi_n -
/// (D psi_f)^* psi_n] / 2i, with D the phase-twisted periodic 5-point
/// stencil along the grid axes mapped to cartesian components. Sublattice
/// orbitals are Lowdin-orthonormalized first, so the band states integrate
/// to exact delta_fn; current fields carry the bond-current calibration
/// (see [`current_calibration`]).
pub fn cell_matrix_elements(
    lat: &Lattice,
    t_hop: f64,
    orb: &impl OrbitalProfile,
    state: &BandState,
    grid: &CellGrid,
) -> Result<CellFields, GrapheneError> {
    let spacing = norm2(grid.step1).max(norm2(grid.step2));
    if spacing > 0.5 * orb.width() {
        return Err(GrapheneError::GridTooCoarse {
            spacing,
            width: orb.width(),
        });
    }
    let npts = grid.num_points();
    let p = state.p;

    let mut chi = [vec![C_ZERO; npts], vec![C_ZERO; npts]];
    for idx in 0..npts {
        let r = grid.position(idx);
        chi[0][idx] = bloch_orbital(lat, orb, p, lat.r_a, r, grid.halo);
        chi[1][idx] = bloch_orbital(lat, orb, p, lat.r_b, r, grid.halo);
    }

    // Lowdin step against the quadrature overlap: with amps = O^{-1/2} c the
    // band states are orthonormal under this exact grid sum.
    let mut ov = [[C_ZERO; 2]; 2];
    for s in 0..2 {
        for sp in 0..2 {
            let mut acc = C_ZERO;
            for idx in 0..npts {
                acc += chi[s][idx].conj() * chi[sp][idx];
            }
            ov[s][sp] = acc * grid.weight;
        }
    }
    let half = herm2_inv_sqrt(&ov);
    let amps = [
        mat2_vec(&half, &state.evec_v),
        mat2_vec(&half, &state.evec_c),
    ];

    let mut psi = [vec![C_ZERO; npts], vec![C_ZERO; npts]];
    for band in 0..2 {
        for idx in 0..npts {
            psi[band][idx] = amps[band][0] * chi[0][idx] + amps[band][1] * chi[1][idx];
        }
    }

    let (dx0, dy0) = twisted_gradient(lat, grid, p, &psi[0]);
    let (dx1, dy1) = twisted_gradient(lat, grid, p, &psi[1]);
    let dx = [dx0, dx1];
    let dy = [dy0, dy1];

    let kappa = current_calibration(lat, t_hop, orb);
    let half_i = C64::new(0.0, -0.5);

    let field = |f: usize, n: usize, kind: usize| -> Vec<C64> {
        let mut out = vec![C_ZERO; npts];
        match kind {
            0 => {
                for idx in 0..npts {
                    out[idx] = psi[f][idx].conj() * psi[n][idx];
                }
            }
            1 => {
                for idx in 0..npts {
                    out[idx] = (psi[f][idx].conj() * dx[n][idx] - dx[f][idx].conj() * psi[n][idx])
                        * half_i
                        / kappa;
                }
            }
            _ => {
                for idx in 0..npts {
                    out[idx] = (psi[f][idx].conj() * dy[n][idx] - dy[f][idx].conj() * psi[n][idx])
                        * half_i
                        / kappa;
                }
            }
        }
        out
    };

    Ok(CellFields {
        q: [
            [field(0, 0, 0), field(0, 1, 0)],
            [field(1, 0, 0), field(1, 1, 0)],
        ],
        jx: [
            [field(0, 0, 1), field(0, 1, 1)],
            [field(1, 0, 1), field(1, 1, 1)],
        ],
        jy: [
            [field(0, 0, 2), field(0, 1, 2)],
            [field(1, 0, 2), field(1, 1, 2)],
        ],
    })
}

/// Cartesian gradient of a Bloch field sampled on the cell grid, using
/// 4th-order central stencils along the grid axes with the Bloch phase
/// twist applied at the wrap.
fn twisted_gradient(
    lat: &Lattice,
    grid: &CellGrid,
    p: Vec2,
    field: &[C64],
) -> (Vec<C64>, Vec<C64>) {
    let n = grid.n as i64;
    let t1 = C64::from_polar(1.0, dot2(p, lat.a1));
    let t2 = C64::from_polar(1.0, dot2(p, lat.a2));
    let at = |fi: i64, fj: i64| -> C64 {
        let mut ph = C_ONE;
        let mut i = fi;
        let mut j = fj;
        if i >= n {
            i -= n;
            ph *= t1;
        } else if i < 0 {
            i += n;
            ph *= t1.conj();
        }
        if j >= n {
            j -= n;
            ph *= t2;
        } else if j < 0 {
            j += n;
            ph *= t2.conj();
        }
        field[(j * n + i) as usize] * ph
    };
    let scale = n as f64 / 12.0;
    let npts = grid.num_points();
    let mut out_x = vec![C_ZERO; npts];
    let mut out_y = vec![C_ZERO; npts];
    let inv_2pi = 1.0 / (2.0 * PI);
    for j in 0..n {
        for i in 0..n {
            let d1 =
                (at(i - 2, j) - at(i - 1, j) * 8.0 + at(i + 1, j) * 8.0 - at(i + 2, j)) * scale;
            let d2 =
                (at(i, j - 2) - at(i, j - 1) * 8.0 + at(i, j + 1) * 8.0 - at(i, j + 2)) * scale;
            let idx = (j * n + i) as usize;
            out_x[idx] = (d1 * lat.b1[0] + d2 * lat.b2[0]) * inv_2pi;
            out_y[idx] = (d1 * lat.b1[1] + d2 * lat.b2[1]) * inv_2pi;
        }
    }
    (out_x, out_y)
}

/// Quadrature Fourier transform of a cell field at scattering vector `s`,
/// convention F_S[g] = int g(r) e^{-i S.r} d^2 r.
pub fn fourier_at_bragg(grid: &CellGrid, field: &[C64], s: Vec2) -> Result<C64, GrapheneError> {
    if field.len() != grid.num_points() {
        return Err(GrapheneError::FieldShape {
            expected: grid.num_points(),
            got: field.len(),
        });
    }
    for step in [grid.step1, grid.step2] {
        let phase_step = dot2(s, step).abs();
        if phase_step >= PI {
            return Err(GrapheneError::Aliased { phase_step });
        }
    }
    let mut acc = C_ZERO;
    for idx in 0..grid.num_points() {
        acc += field[idx] * C64::from_polar(1.0, -dot2(s, grid.position(idx)));
    }
    Ok(acc * grid.weight)
}

/// Fourier amplitudes of the band-pair density and current fields at one
/// Bragg vector and momentum; matrices are indexed \[f\]\[n\].
#[derive(Debug, Clone, Copy)]
pub struct SpotAmplitudes {
    pub q: Mat2,
    pub jx: Mat2,
    pub jy: Mat2,
}

/// Closed-form lattice-sum kernel for Gaussian orbitals.
///
/// For S on the reciprocal lattice, the cell quadrature of Bloch-orbital
/// pair fields collapses to whole-plane two-center Gaussian integrals summed
/// over lattice separations:
///   A^Q_{s s'}(p, S)  = e^{-sigma^2 |S|^2/4} e^{-i S.r_s}
///                       sum_v w(v) e^{i (p - S/2).v},
///   A^J has the extra per-term factor -i v_{x,y} / (2 sigma^2),
/// where v runs over separations r_s' + R - r_s and w = e^{-|v|^2/(4 sigma^2)}.
/// Terms are precomputed once with a 1e-18 weight cutoff, so one entry costs
/// a few dozen complex exponentials. Band matrices use the same Lowdin step
/// and current calibration as the quadrature path.
#[derive(Debug, Clone)]
pub struct ClosedFormKernel {
    lat: Lattice,
    t_hop: f64,
    sigma: f64,
    kappa: f64,
    sites: [Vec2; 2],
    /// terms[2*s + s'] = (separation, weight) list.
    terms: [Vec<(Vec2, f64)>; 4],
}

impl ClosedFormKernel {
    pub fn new(lat: &Lattice, t_hop: f64, orb: &GaussianOrbital) -> Self {
        let sigma = orb.sigma;
        let sites = [lat.r_a, lat.r_b];
        let mut terms: [Vec<(Vec2, f64)>; 4] = Default::default();
        let rings = 3i32;
        for s in 0..2 {
            for sp in 0..2 {
                let base = [sites[sp][0] - sites[s][0], sites[sp][1] - sites[s][1]];
                let list = &mut terms[2 * s + sp];
                for m1 in -rings..=rings {
                    for m2 in -rings..=rings {
                        let v = [
                            base[0] + m1 as f64 * lat.a1[0] + m2 as f64 * lat.a2[0],
                            base[1] + m1 as f64 * lat.a1[1] + m2 as f64 * lat.a2[1],
                        ];
                        let w = (-dot2(v, v) / (4.0 * sigma * sigma)).exp();
                        if w > 1e-18 {
                            list.push((v, w));
                        }
                    }
                }
            }
        }
        let g = (-lat.bond * lat.bond / (4.0 * sigma * sigma)).exp() / (2.0 * sigma * sigma);
        ClosedFormKernel {
            lat: *lat,
            t_hop,
            sigma,
            kappa: -g / t_hop,
            sites,
            terms,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lat
    }

    /// Q/Jx/Jy amplitude matrices at momentum p and Bragg vector s.
    pub fn entry(&self, p: Vec2, s: Vec2) -> SpotAmplitudes {
        let s2 = self.sigma * self.sigma;
        let envelope = (-s2 * dot2(s, s) / 4.0).exp();
        let pm = [p[0] - 0.5 * s[0], p[1] - 0.5 * s[1]];
        let cur = C64::new(0.0, -0.5 / s2);

        let mut aq = [[C_ZERO; 2]; 2];
        let mut ajx = [[C_ZERO; 2]; 2];
        let mut ajy = [[C_ZERO; 2]; 2];
        let mut ov = [[C_ZERO; 2]; 2];
        for si in 0..2 {
            let site_phase = C64::from_polar(envelope, -dot2(s, self.sites[si]));
            for sj in 0..2 {
                let mut q = C_ZERO;
                let mut jx = C_ZERO;
                let mut jy = C_ZERO;
                let mut o = C_ZERO;
                for (v, w) in self.terms[2 * si + sj].iter() {
                    let ph = C64::from_polar(*w, dot2(pm, *v));
                    q += ph;
                    let c = ph * cur;
                    jx += c * v[0];
                    jy += c * v[1];
                    o += C64::from_polar(*w, dot2(p, *v));
                }
                aq[si][sj] = q * site_phase;
                ajx[si][sj] = jx * site_phase / self.kappa;
                ajy[si][sj] = jy * site_phase / self.kappa;
                ov[si][sj] = o;
            }
        }

        let st = eigensystem(&hamiltonian_k(&self.lat, self.t_hop, p), p);
        let half = herm2_inv_sqrt(&ov);
        let amps = [mat2_vec(&half, &st.evec_v), mat2_vec(&half, &st.evec_c)];
        let project = |a: &Mat2| -> Mat2 {
            let mut m = [[C_ZERO; 2]; 2];
            for f in 0..2 {
                for nb in 0..2 {
                    let mut acc = C_ZERO;
                    for i in 0..2 {
                        for jn in 0..2 {
                            acc += amps[f][i].conj() * a[i][jn] * amps[nb][jn];
                        }
                    }
                    m[f][nb] = acc;
                }
            }
            m
        };
        SpotAmplitudes {
            q: project(&aq),
            jx: project(&ajx),
            jy: project(&ajy),
        }
    }
}

/// Fourier-amplitude table over (spot, band pair, momentum).
pub struct FormFactorTable {
    /// Bragg vectors, one per requested spot.
    pub spots: Vec<Vec2>,
    /// Evaluation momenta (grid momenta plus the requested shift).
    pub momenta: Vec<Vec2>,
    /// entries\[spot\]\[k\].
    pub entries: Vec<Vec<SpotAmplitudes>>,
}

/// Builds the amplitude table for every requested spot and grid momentum,
/// optionally shifted (the moving-frame momentum at one pump time).
///
/// The cell grid fixes the resolution contract: the orbital must be
/// resolvable and no spot may alias on it. Entries come from the
/// closed-form kernel, which for these reciprocal vectors equals the grid
/// quadrature to stencil accuracy at a fraction of the cost.
pub fn build_form_factor_table(
    lat: &Lattice,
    t_hop: f64,
    orb: &GaussianOrbital,
    kgrid: &[Vec2],
    spots: &[[i32; 2]],
    grid: &CellGrid,
    shift: Vec2,
) -> Result<FormFactorTable, GrapheneError> {
    let spacing = norm2(grid.step1).max(norm2(grid.step2));
    if spacing > 0.5 * orb.width() {
        return Err(GrapheneError::GridTooCoarse {
            spacing,
            width: orb.width(),
        });
    }
    let mut bragg = Vec::with_capacity(spots.len());
    for hk in spots {
        let s = lat.bragg_vector(hk[0], hk[1])?;
        for step in [grid.step1, grid.step2] {
            let phase_step = dot2(s, step).abs();
            if phase_step >= PI {
                return Err(GrapheneError::Aliased { phase_step });
            }
        }
        bragg.push(s);
    }
    let kernel = ClosedFormKernel::new(lat, t_hop, orb);
    let momenta: Vec<Vec2> = kgrid.iter().map(|p| add2(*p, shift)).collect();
    let entries = bragg
        .iter()
        .map(|s| momenta.iter().map(|p| kernel.entry(*p, *s)).collect())
        .collect();
    Ok(FormFactorTable {
        spots: bragg,
        momenta,
        entries,
    })
}

/// Uniform n x n zone grid with equal weights 1/n^2.
///
/// Fractional coordinates ((i + 1/2)/n, j/n) of (b1, b2): the half shift
/// along b1 keeps every grid row a fixed fraction of the row spacing away
/// in y from the band degeneracies for any n, so couplings stay bounded
/// while the pump sweeps momenta along x. The set is closed under inversion
/// modulo reciprocal vectors.
pub fn bz_grid(lat: &Lattice, n: usize) -> Vec<Vec2> {
    let nf = n as f64;
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        let f1 = (i as f64 + 0.5) / nf;
        for j in 0..n {
            let f2 = j as f64 / nf;
            pts.push([
                f1 * lat.b1[0] + f2 * lat.b2[0],
                f1 * lat.b1[1] + f2 * lat.b2[1],
            ]);
        }
    }
    pts
}
