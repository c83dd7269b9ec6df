//! Stationary differential cross sections for x-ray (Thomson) and electron
//! (Rutherford) probes, plus form factors of sampled charge densities.
//!
//! All quantities are in Hartree atomic units. Cross sections come out in
//! units of squared Bohr radii per steradian; the target enters only through
//! the elastic form factor `F(s) = integral rho(r) exp(i s.r) dV`.

use alloc::vec::Vec;
use num_complex::Complex64;
// Float supplies the math methods the std prelude would; only the
// no_std build resolves through it.
#[cfg(not(test))]
use num_traits::Float;

use crate::FINE_STRUCTURE;

/// Forward angles below this are rejected: the Rutherford limit diverges.
pub const MIN_SCATTERING_ANGLE: f64 = 1e-8;
const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum XsecError {
    /// Direction or polarization vector not normalized.
    NotUnit { name: &'static str, norm: f64 },
    /// Polarization must be transverse to the propagation direction.
    NotTransverse { dot: f64 },
    /// Non-positive probe energy or momentum.
    NonPositive { name: &'static str, value: f64 },
    /// Scattering angle outside (MIN_SCATTERING_ANGLE, pi].
    ForwardDivergence { theta: f64 },
    /// Grid geometry inconsistent with the sample count.
    GridShape { expected: usize, got: usize },
    /// Grid values must be finite.
    NonFiniteSample { index: usize },
    /// Degenerate step vectors span no volume.
    DegenerateCell,
    /// Phase advance per grid step exceeds pi along an axis.
    Aliased {
        axis: usize,
        advance: f64,
        max_s: f64,
    },
    /// Fluence must be positive to convert probabilities to cross sections.
    NonPositiveFluence { value: f64 },
}

impl core::fmt::Display for XsecError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            XsecError::NotUnit { name, norm } => {
                write!(f, "{name} must be a unit vector, |v| = {norm:e}")
            }
            XsecError::NotTransverse { dot } => {
                write!(f, "polarization not transverse: pol.k = {dot:e}")
            }
            XsecError::NonPositive { name, value } => {
                write!(f, "{name} must be positive, got {value:e}")
            }
            XsecError::ForwardDivergence { theta } => write!(
                f,
                "scattering angle {theta:e} rad below {MIN_SCATTERING_ANGLE:e}; forward limit diverges"
            ),
            XsecError::GridShape { expected, got } => {
                write!(f, "grid expects {expected} samples, got {got}")
            }
            XsecError::NonFiniteSample { index } => {
                write!(f, "grid sample {index} is not finite")
            }
            XsecError::DegenerateCell => write!(f, "grid step vectors are coplanar"),
            XsecError::Aliased { axis, advance, max_s } => write!(
                f,
                "transfer aliases on axis {axis}: phase advance {advance:e} per step exceeds pi, \
                 resolvable |s.h| < {max_s:e}"
            ),
            XsecError::NonPositiveFluence { value } => {
                write!(f, "time-integrated flux must be positive, got {value:e}")
            }
        }
    }
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

/// Elastic scattering geometry: incoming/outgoing directions, shared
/// momentum magnitude, and the incoming linear polarization (x-ray probes).
#[derive(Debug, Clone)]
pub struct ProbeGeometry {
    pub k_in_dir: [f64; 3],
    pub k_s_dir: [f64; 3],
    pub k_mag: f64,
    pub pol_in: [f64; 3],
}

impl ProbeGeometry {
    pub fn new(
        k_in_dir: [f64; 3],
        k_s_dir: [f64; 3],
        k_mag: f64,
        pol_in: [f64; 3],
    ) -> Result<Self, XsecError> {
        for (name, v) in [
            ("k_in_dir", &k_in_dir),
            ("k_s_dir", &k_s_dir),
            ("pol_in", &pol_in),
        ] {
            let n = norm3(v);
            if (n - 1.0).abs() > UNIT_TOL {
                return Err(XsecError::NotUnit { name, norm: n });
            }
        }
        if k_mag <= 0.0 {
            return Err(XsecError::NonPositive {
                name: "k_mag",
                value: k_mag,
            });
        }
        let t = dot3(&pol_in, &k_in_dir);
        if t.abs() > UNIT_TOL {
            return Err(XsecError::NotTransverse { dot: t });
        }
        Ok(ProbeGeometry {
            k_in_dir,
            k_s_dir,
            k_mag,
            pol_in,
        })
    }

    /// Momentum transfer k_in - k_s.
    pub fn transfer(&self) -> [f64; 3] {
        [
            self.k_mag * (self.k_in_dir[0] - self.k_s_dir[0]),
            self.k_mag * (self.k_in_dir[1] - self.k_s_dir[1]),
            self.k_mag * (self.k_in_dir[2] - self.k_s_dir[2]),
        ]
    }

    /// Scattering angle between the two directions.
    pub fn theta(&self) -> f64 {
        dot3(&self.k_in_dir, &self.k_s_dir).clamp(-1.0, 1.0).acos()
    }
}

/// Orthonormal polarization basis transverse to a direction.
fn transverse_basis(dir: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    // Seed with whichever axis is least aligned to dir.
    let seed = if dir[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let mut e1 = cross3(dir, &seed);
    let n1 = norm3(&e1);
    e1 = [e1[0] / n1, e1[1] / n1, e1[2] / n1];
    let e2 = cross3(dir, &e1);
    (e1, e2)
}

/// Thomson angular prefactor alpha^4 sum_pol |eps_s . eps_in|^2, summing the
/// two orthonormal scattered polarizations transverse to k_s. Equal to
/// alpha^4 (1 - (k_s_dir . eps_in)^2) independent of the basis choice.
pub fn thomson_prefactor(geom: &ProbeGeometry) -> f64 {
    let (e1, e2) = transverse_basis(&geom.k_s_dir);
    let a = dot3(&e1, &geom.pol_in);
    let b = dot3(&e2, &geom.pol_in);
    FINE_STRUCTURE.powi(4) * (a * a + b * b)
}

/// Rutherford angular prefactor 1 / (16 E^2 sin^4(theta/2)) for kinetic
/// energy E = |k|^2 / 2. Identical to 4 / |k_in - k_s|^4 on the elastic shell.
pub fn rutherford_prefactor(energy: f64, theta: f64) -> Result<f64, XsecError> {
    if energy <= 0.0 {
        return Err(XsecError::NonPositive {
            name: "energy",
            value: energy,
        });
    }
    if !(MIN_SCATTERING_ANGLE..=core::f64::consts::PI).contains(&theta) {
        return Err(XsecError::ForwardDivergence { theta });
    }
    let s = (0.5 * theta).sin();
    Ok(1.0 / (16.0 * energy * energy * s.powi(4)))
}

/// Real-valued density samples on a uniform 3D grid.
///
/// `steps` are the three step vectors advancing one index along each axis;
/// samples are stored x-fastest (axis 0 fastest, axis 2 slowest).
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub dims: [usize; 3],
    pub steps: [[f64; 3]; 3],
    pub origin: [f64; 3],
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(
        dims: [usize; 3],
        steps: [[f64; 3]; 3],
        origin: [f64; 3],
        values: Vec<f64>,
    ) -> Result<Self, XsecError> {
        let expected = dims[0] * dims[1] * dims[2];
        if expected == 0 || values.len() != expected {
            return Err(XsecError::GridShape {
                expected,
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(XsecError::NonFiniteSample { index: bad });
        }
        let det = dot3(&steps[0], &cross3(&steps[1], &steps[2]));
        if det.abs() < 1e-300 {
            return Err(XsecError::DegenerateCell);
        }
        Ok(DensityGrid {
            dims,
            steps,
            origin,
            values,
        })
    }

    /// Volume element spanned by the three step vectors.
    pub fn volume_element(&self) -> f64 {
        dot3(&self.steps[0], &cross3(&self.steps[1], &self.steps[2])).abs()
    }

    /// Total charge: Riemann sum of the samples.
    pub fn total_charge(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.volume_element()
    }
}

/// Elastic form factor F(s) = sum rho(r) exp(i s.r) dV by direct Riemann
/// quadrature over the grid.
///
/// Rejects transfers whose phase advances more than pi per grid step along
/// any axis (Nyquist limit of the sampled density).
pub fn form_factor(grid: &DensityGrid, s: [f64; 3]) -> Result<Complex64, XsecError> {
    for axis in 0..3 {
        let advance = dot3(&s, &grid.steps[axis]).abs();
        if advance >= core::f64::consts::PI {
            return Err(XsecError::Aliased {
                axis,
                advance,
                max_s: core::f64::consts::PI,
            });
        }
    }
    // Separable phases: exp(i s.r) factors over the three index axes.
    let phase_axis = |axis: usize, n: usize| -> Vec<Complex64> {
        let step = dot3(&s, &grid.steps[axis]);
        (0..n)
            .map(|i| Complex64::from_polar(1.0, step * i as f64))
            .collect()
    };
    let px = phase_axis(0, grid.dims[0]);
    let py = phase_axis(1, grid.dims[1]);
    let pz = phase_axis(2, grid.dims[2]);
    let p0 = Complex64::from_polar(1.0, dot3(&s, &grid.origin));

    let (nx, ny) = (grid.dims[0], grid.dims[1]);
    let mut acc = Complex64::new(0.0, 0.0);
    for (iz, pz_i) in pz.iter().enumerate() {
        for (iy, py_i) in py.iter().enumerate() {
            let base = (iz * ny + iy) * nx;
            let mut row = Complex64::new(0.0, 0.0);
            for (ix, px_i) in px.iter().enumerate() {
                row += grid.values[base + ix] * px_i;
            }
            acc += row * py_i * pz_i;
        }
    }
    Ok(acc * p0 * grid.volume_element())
}

/// Probe species for the stationary cross sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    Xray,
    Electron,
}

/// Elastic differential cross section dsigma/dOmega = prefactor x |F(q)|^2
/// with q = k_in - k_s taken from the geometry.
pub fn elastic_dsigma(
    probe: Probe,
    geom: &ProbeGeometry,
    rho: &DensityGrid,
) -> Result<f64, XsecError> {
    let q = geom.transfer();
    let ff = form_factor(rho, q)?;
    let prefactor = match probe {
        Probe::Xray => thomson_prefactor(geom),
        Probe::Electron => {
            let energy = 0.5 * geom.k_mag * geom.k_mag;
            rutherford_prefactor(energy, geom.theta())?
        }
    };
    Ok(prefactor * ff.norm_sqr())
}

/// Number flux of an x-ray pulse with n photons in quantization volume V:
/// (1/alpha) (n/V), the photon velocity being c = 1/alpha.
pub fn xray_flux(n_photons: f64, volume: f64) -> f64 {
    n_photons / (FINE_STRUCTURE * volume)
}

/// Number flux of a monoenergetic electron beam: |k| / V.
pub fn electron_flux(k_mag: f64, volume: f64) -> f64 {
    k_mag / volume
}

/// Convert a differential scattering probability to a cross section:
/// dsigma/dOmega = (dP/dOmega) N_in / integral F dt.
pub fn probability_to_dsigma(
    dp_domega: f64,
    n_incident: f64,
    fluence: f64,
) -> Result<f64, XsecError> {
    if fluence <= 0.0 {
        return Err(XsecError::NonPositiveFluence { value: fluence });
    }
    if n_incident <= 0.0 {
        return Err(XsecError::NonPositive {
            name: "n_incident",
            value: n_incident,
        });
    }
    Ok(dp_domega * n_incident / fluence)
}
