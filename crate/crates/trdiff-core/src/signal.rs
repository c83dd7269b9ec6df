//! Time-resolved Bragg-spot intensities of the pump-driven target.
//!
//! For each stored trajectory sample the scattering amplitude at a Bragg
//! vector S is B = sum_mu c^mu A_mu(p_t) with A_0 the density form factor,
//! A_{x,y} the current form factors, and c^mu the beam four-momentum
//! contracted through the transfer-polarization kernel. The intensity
//! tr(rho B^dagger B), normalized per free electron (cell area, momentum
//! count, spin 2), splits by mu-index into density-density (dd),
//! density-current (dj), and current-current (jj) channels, with
//! I_total = I_dd + I_dj + I_jj as an exact assembly identity.
//!
//! Axis-aligned spots admit short closed forms (the x-aligned spot carries
//! no current channels at all for a beam in the xz-plane; the y-aligned
//! spot couples only Jx with coefficients -(sqrt2/2) beta alpha and
//! beta^2 alpha^2 / 2 at 45 degree incidence); the general evaluator and
//! the specializations must agree, which the tests exploit.

use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;
use core::fmt;

// Float supplies the math methods the std prelude would; only the
// no_std build resolves through it.
#[cfg(not(test))]
use num_traits::Float;

use crate::dirac::{dtilde, DiracError};
use crate::graphene::{add2, ClosedFormKernel, GrapheneError, Lattice, SpotAmplitudes, Vec2};
use crate::linalg::{pairwise_sum_c, Mat2, C64, C_ZERO};
use crate::sbe::DensityMatrixTrajectory;
use crate::FINE_STRUCTURE;

/// Electron rest energy in eV.
pub const ELECTRON_REST_EV: f64 = 510998.95;

#[derive(Debug, Clone, PartialEq)]
pub enum SignalError {
    /// Kinetic energy must be non-negative.
    NegativeKineticEnergy,
    /// Speed fraction must lie in [0, 1).
    InvalidBeta,
    /// Incidence direction must be a unit vector.
    NonUnitIncidence { norm: f64 },
    /// Bragg vector not aligned with the required axis.
    SpotOffAxis { angle: f64 },
    /// Beam must lie in the xz-plane for the axis-aligned evaluators.
    BeamOffPlane { ky: f64 },
    /// The y-spot closed form holds at 45 degree incidence with the
    /// in-plane projection along +x.
    BeamNotDiagonal { x: f64, z: f64 },
    /// The amplitude source lacks a current component the beam needs.
    MissingComponent { component: &'static str },
    /// Lattice-level failure (zero Bragg index and friends).
    Lattice(GrapheneError),
    /// Transfer-kernel failure.
    Kernel(DiracError),
    /// Mismatched array lengths.
    ShapeMismatch { expected: usize, got: usize },
    /// Spectral analysis needs at least four carrier periods of data.
    TraceTooShort { span: f64, needed: f64 },
    /// Carrier frequency must be positive.
    NonPositiveFrequency,
    /// Probe envelope width must be non-negative.
    NegativeWidth,
    /// Convolution requires uniformly spaced samples.
    NonUniformSampling { gap: f64, expected: f64 },
    /// Hermitian pairing left a channel with a non-negligible imaginary
    /// part; the assembly is numerically inconsistent.
    ImaginaryResidue { residue: f64, scale: f64 },
}

impl fmt::Display for SignalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalError::NegativeKineticEnergy => {
                write!(f, "kinetic energy must be non-negative")
            }
            SignalError::InvalidBeta => write!(f, "beta must lie in [0, 1)"),
            SignalError::NonUnitIncidence { norm } => {
                write!(f, "incidence must be a unit vector, got norm {norm:.6}")
            }
            SignalError::SpotOffAxis { angle } => {
                write!(f, "Bragg vector off the required axis by {angle:.3e} rad")
            }
            SignalError::BeamOffPlane { ky } => {
                write!(f, "beam leaves the xz-plane (k_y component {ky:.3e})")
            }
            SignalError::BeamNotDiagonal { x, z } => write!(
                f,
                "beam must hit at 45 degrees with +x projection, got (x, z) = ({x:.6}, {z:.6})"
            ),
            SignalError::MissingComponent { component } => {
                write!(f, "amplitude source lacks the {component} component")
            }
            SignalError::Lattice(e) => write!(f, "lattice: {e}"),
            SignalError::Kernel(e) => write!(f, "transfer kernel: {e}"),
            SignalError::ShapeMismatch { expected, got } => {
                write!(f, "expected {expected} samples, got {got}")
            }
            SignalError::TraceTooShort { span, needed } => write!(
                f,
                "trace spans {span:.3e} a.u. but spectral analysis needs {needed:.3e}"
            ),
            SignalError::NonPositiveFrequency => write!(f, "carrier frequency must be positive"),
            SignalError::NegativeWidth => write!(f, "envelope width must be non-negative"),
            SignalError::NonUniformSampling { gap, expected } => write!(
                f,
                "sample gap {gap:.6e} differs from the leading gap {expected:.6e}"
            ),
            SignalError::ImaginaryResidue { residue, scale } => write!(
                f,
                "channel imaginary residue {residue:.3e} exceeds 1e-10 of the trace scale {scale:.3e}"
            ),
        }
    }
}

impl From<GrapheneError> for SignalError {
    fn from(e: GrapheneError) -> Self {
        SignalError::Lattice(e)
    }
}

impl From<DiracError> for SignalError {
    fn from(e: DiracError) -> Self {
        SignalError::Kernel(e)
    }
}

/// Relativistic beam parameters derived from the kinetic energy.
#[derive(Debug, Clone, Copy)]
pub struct BeamKinematics {
    pub gamma: f64,
    pub beta: f64,
    /// |k| in a.u.
    pub momentum: f64,
    /// Beam energy in a.u.
    pub energy: f64,
}

/// gamma = 1 + T / (m c^2), beta = sqrt(1 - 1/gamma^2), |k| = gamma beta /
/// alpha, E = gamma / alpha^2 (all a.u.).
pub fn beam_kinematics(kinetic_ev: f64) -> Result<BeamKinematics, SignalError> {
    if kinetic_ev < 0.0 || !kinetic_ev.is_finite() {
        return Err(SignalError::NegativeKineticEnergy);
    }
    let gamma = 1.0 + kinetic_ev / ELECTRON_REST_EV;
    let beta = (1.0 - 1.0 / (gamma * gamma)).max(0.0).sqrt();
    Ok(BeamKinematics {
        gamma,
        beta,
        momentum: gamma * beta / FINE_STRUCTURE,
        energy: gamma / (FINE_STRUCTURE * FINE_STRUCTURE),
    })
}

/// Kinetic energy (eV) of an electron moving at speed fraction `beta`.
pub fn kinetic_for_beta(beta: f64) -> Result<f64, SignalError> {
    if !(0.0..1.0).contains(&beta) {
        return Err(SignalError::InvalidBeta);
    }
    let gamma = 1.0 / (1.0 - beta * beta).sqrt();
    Ok((gamma - 1.0) * ELECTRON_REST_EV)
}

/// Probe kind; only the relativistic electron couples to the target
/// currents, an x-ray (and a non-relativistic electron) sees the density
/// channel alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    Xray,
    ElectronNonrel,
    ElectronRel,
}

#[derive(Debug, Clone, Copy)]
pub struct BeamConfig {
    pub kinetic_ev: f64,
    /// Unit direction of the incoming beam.
    pub incidence: [f64; 3],
    pub probe: Probe,
}

impl BeamConfig {
    /// Relativistic electron at 45 degrees in the xz-plane (the in-plane
    /// projection points along +x).
    pub fn electron_rel_45(kinetic_ev: f64) -> Self {
        BeamConfig {
            kinetic_ev,
            incidence: [FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2],
            probe: Probe::ElectronRel,
        }
    }

    pub fn kinematics(&self) -> Result<BeamKinematics, SignalError> {
        let n = self.incidence;
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        let unit = (norm - 1.0).abs() < 1e-9;
        if !unit {
            return Err(SignalError::NonUnitIncidence { norm });
        }
        beam_kinematics(self.kinetic_ev)
    }

    pub fn currents_active(&self) -> bool {
        self.probe == Probe::ElectronRel
    }
}

/// Bragg-spot matrix-element source with an explicit component inventory,
/// wrapping the closed-form lattice-sum kernel.
#[derive(Debug, Clone, Copy)]
pub struct SpotSource<'a> {
    kernel: &'a ClosedFormKernel,
    has_currents: bool,
    zero_currents: bool,
}

impl<'a> SpotSource<'a> {
    /// Density and both current components available.
    pub fn full(kernel: &'a ClosedFormKernel) -> Self {
        SpotSource {
            kernel,
            has_currents: true,
            zero_currents: false,
        }
    }

    /// Only the density component; evaluators that need currents reject it.
    pub fn density_only(kernel: &'a ClosedFormKernel) -> Self {
        SpotSource {
            kernel,
            has_currents: false,
            zero_currents: false,
        }
    }

    /// Currents present but forced to zero (a hypothetical target without
    /// transport; the intensity then reduces to the density channel).
    pub fn with_zeroed_currents(kernel: &'a ClosedFormKernel) -> Self {
        SpotSource {
            kernel,
            has_currents: true,
            zero_currents: true,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        self.kernel.lattice()
    }

    fn amplitudes(&self, p: Vec2, s: Vec2) -> SpotAmplitudes {
        let mut a = self.kernel.entry(p, s);
        if self.zero_currents {
            a.jx = [[C_ZERO; 2]; 2];
            a.jy = [[C_ZERO; 2]; 2];
        }
        a
    }
}

/// One time sample of the three channels, before the k-mean normalization
/// is undone; `imag` is the largest imaginary residue discarded.
#[derive(Debug, Clone, Copy)]
pub struct ChannelSample {
    pub dd: f64,
    pub dj: f64,
    pub jj: f64,
    pub imag: f64,
}

/// Channel-decomposed intensity trace at one Bragg spot, in units of
/// scattering from a single free electron.
#[derive(Debug, Clone)]
pub struct DiffractionTrace {
    pub times: Vec<f64>,
    pub spot: [i32; 2],
    pub i_dd: Vec<f64>,
    pub i_dj: Vec<f64>,
    pub i_jj: Vec<f64>,
    pub i_total: Vec<f64>,
    /// Largest imaginary residue discarded while forming the channels.
    pub max_imag: f64,
}

impl DiffractionTrace {
    /// Assembles per-sample channel values, forming I_total = dd + dj + jj
    /// exactly and rejecting traces whose imaginary residue exceeds 1e-10
    /// of the trace scale.
    pub fn from_samples(
        times: &[f64],
        spot: [i32; 2],
        samples: &[ChannelSample],
    ) -> Result<Self, SignalError> {
        if times.len() != samples.len() {
            return Err(SignalError::ShapeMismatch {
                expected: times.len(),
                got: samples.len(),
            });
        }
        let mut trace = DiffractionTrace {
            times: times.to_vec(),
            spot,
            i_dd: Vec::with_capacity(samples.len()),
            i_dj: Vec::with_capacity(samples.len()),
            i_jj: Vec::with_capacity(samples.len()),
            i_total: Vec::with_capacity(samples.len()),
            max_imag: 0.0,
        };
        let mut scale = 0.0f64;
        for s in samples {
            let total = s.dd + s.dj + s.jj;
            trace.i_dd.push(s.dd);
            trace.i_dj.push(s.dj);
            trace.i_jj.push(s.jj);
            trace.i_total.push(total);
            trace.max_imag = trace.max_imag.max(s.imag);
            scale = scale.max(total.abs());
        }
        if trace.max_imag > 1e-10 * scale {
            return Err(SignalError::ImaginaryResidue {
                residue: trace.max_imag,
                scale,
            });
        }
        Ok(trace)
    }

    /// Peak-to-peak swing of one channel column.
    pub fn peak_to_peak(values: &[f64]) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }
}

/// sum_{f,n,m} rho_{nm} conj(a2_{fm}) a1_{fn}; the (mu2, mu1) channel
/// bilinear of one momentum.
fn pair_trace(a2: &Mat2, a1: &Mat2, rho: &Mat2) -> C64 {
    let mut acc = C_ZERO;
    for f in 0..2 {
        for n in 0..2 {
            for m in 0..2 {
                acc += rho[n][m] * a2[f][m].conj() * a1[f][n];
            }
        }
    }
    acc
}

/// A Bragg spot bound to its beam contraction coefficients. `u` holds
/// (c^0/E, c^x/E, c^y/E); the z current vanishes identically for the
/// two-dimensional target and never enters.
#[derive(Debug, Clone, Copy)]
pub struct SpotEvaluator<'a> {
    source: SpotSource<'a>,
    pub spot: [i32; 2],
    s_vec: Vec2,
    u: [f64; 3],
}

fn require_components(source: &SpotSource, u: &[f64; 3]) -> Result<(), SignalError> {
    if u[1] != 0.0 && !source.has_currents {
        return Err(SignalError::MissingComponent { component: "jx" });
    }
    if u[2] != 0.0 && !source.has_currents {
        return Err(SignalError::MissingComponent { component: "jy" });
    }
    Ok(())
}

impl<'a> SpotEvaluator<'a> {
    /// Full contraction for an arbitrary spot and beam direction: the
    /// transfer-polarization kernel maps the beam four-momentum (E, k) to
    /// c^mu, and the channel coefficients are c^mu / E (the scattered
    /// energy is frozen to the incident one in the instantaneous
    /// elastic limit).
    pub fn general(
        source: SpotSource<'a>,
        beam: &BeamConfig,
        spot: [i32; 2],
    ) -> Result<Self, SignalError> {
        let kin = beam.kinematics()?;
        let s_vec = source.lattice().bragg_vector(spot[0], spot[1])?;
        let kernel = dtilde([s_vec[0], s_vec[1], 0.0])?;
        let k4 = [
            kin.energy,
            kin.momentum * beam.incidence[0],
            kin.momentum * beam.incidence[1],
            kin.momentum * beam.incidence[2],
        ];
        let c = kernel.contract(&k4);
        let mut u = [c[0] / kin.energy, c[1] / kin.energy, c[2] / kin.energy];
        if !beam.currents_active() {
            u[1] = 0.0;
            u[2] = 0.0;
        }
        require_components(&source, &u)?;
        Ok(SpotEvaluator {
            source,
            spot,
            s_vec,
            u,
        })
    }

    /// Spot aligned with x: only the density channel survives for any beam
    /// in the xz-plane, so the evaluator carries no current coefficients.
    pub fn x_axis(
        source: SpotSource<'a>,
        beam: &BeamConfig,
        spot: [i32; 2],
    ) -> Result<Self, SignalError> {
        beam.kinematics()?;
        if beam.incidence[1].abs() > 1e-9 {
            return Err(SignalError::BeamOffPlane {
                ky: beam.incidence[1],
            });
        }
        let s_vec = source.lattice().bragg_vector(spot[0], spot[1])?;
        let angle = s_vec[1].abs().atan2(s_vec[0].abs());
        if angle > 1e-9 {
            return Err(SignalError::SpotOffAxis { angle });
        }
        Ok(SpotEvaluator {
            source,
            spot,
            s_vec,
            u: [1.0, 0.0, 0.0],
        })
    }

    /// Spot aligned with y at 45 degree incidence in the xz-plane: the
    /// current enters only through Jx, with coefficient -(sqrt2/2) beta
    /// alpha per ordering and beta^2 alpha^2 / 2 on the Jx-Jx term.
    pub fn y_axis(
        source: SpotSource<'a>,
        beam: &BeamConfig,
        spot: [i32; 2],
    ) -> Result<Self, SignalError> {
        let kin = beam.kinematics()?;
        if beam.incidence[1].abs() > 1e-9 {
            return Err(SignalError::BeamOffPlane {
                ky: beam.incidence[1],
            });
        }
        if (beam.incidence[0] - beam.incidence[2]).abs() > 1e-9 || beam.incidence[0] <= 0.0 {
            return Err(SignalError::BeamNotDiagonal {
                x: beam.incidence[0],
                z: beam.incidence[2],
            });
        }
        let s_vec = source.lattice().bragg_vector(spot[0], spot[1])?;
        let angle = s_vec[0].abs().atan2(s_vec[1].abs());
        if angle > 1e-9 {
            return Err(SignalError::SpotOffAxis { angle });
        }
        let ux = if beam.currents_active() {
            -FRAC_1_SQRT_2 * kin.beta * FINE_STRUCTURE
        } else {
            0.0
        };
        let u = [1.0, ux, 0.0];
        require_components(&source, &u)?;
        Ok(SpotEvaluator {
            source,
            spot,
            s_vec,
            u,
        })
    }

    pub fn coefficients(&self) -> [f64; 3] {
        self.u
    }

    /// Channel values of one stored sample: a mean over the momentum grid
    /// of the bilinears at p_t = p + A(t), divided by twice the cell area
    /// (spin) so the result counts scattering per free electron. The sums
    /// run in cascade order over the momentum index, giving bit-identical
    /// results however samples are scheduled.
    pub fn sample(
        &self,
        traj: &DensityMatrixTrajectory,
        sample: usize,
    ) -> Result<ChannelSample, SignalError> {
        let nk = traj.num_momenta();
        if sample >= traj.num_samples() {
            return Err(SignalError::ShapeMismatch {
                expected: traj.num_samples(),
                got: sample,
            });
        }
        let shift = traj.potential[sample];
        let [u0, ux, uy] = self.u;
        let with_currents = ux != 0.0 || uy != 0.0;
        let mut dd = Vec::with_capacity(nk);
        let mut dj = Vec::with_capacity(nk);
        let mut jj = Vec::with_capacity(nk);
        for (k, &p) in traj.momenta.iter().enumerate() {
            let amps = self.source.amplitudes(add2(p, shift), self.s_vec);
            let rho = traj.density_matrix(sample, k);
            dd.push(pair_trace(&amps.q, &amps.q, &rho) * (u0 * u0));
            if with_currents {
                let qx = pair_trace(&amps.q, &amps.jx, &rho) + pair_trace(&amps.jx, &amps.q, &rho);
                let qy = pair_trace(&amps.q, &amps.jy, &rho) + pair_trace(&amps.jy, &amps.q, &rho);
                dj.push(qx * (u0 * ux) + qy * (u0 * uy));
                let xy =
                    pair_trace(&amps.jx, &amps.jy, &rho) + pair_trace(&amps.jy, &amps.jx, &rho);
                jj.push(
                    pair_trace(&amps.jx, &amps.jx, &rho) * (ux * ux)
                        + xy * (ux * uy)
                        + pair_trace(&amps.jy, &amps.jy, &rho) * (uy * uy),
                );
            }
        }
        let norm = 1.0 / (2.0 * self.source.lattice().cell_area() * nk as f64);
        let zdd = pairwise_sum_c(&dd) * norm;
        let (zdj, zjj) = if with_currents {
            (pairwise_sum_c(&dj) * norm, pairwise_sum_c(&jj) * norm)
        } else {
            (C_ZERO, C_ZERO)
        };
        Ok(ChannelSample {
            dd: zdd.re,
            dj: zdj.re,
            jj: zjj.re,
            imag: zdd.im.abs().max(zdj.im.abs()).max(zjj.im.abs()),
        })
    }

    /// Full trace over every stored sample.
    pub fn trace(&self, traj: &DensityMatrixTrajectory) -> Result<DiffractionTrace, SignalError> {
        let mut samples = Vec::with_capacity(traj.num_samples());
        for s in 0..traj.num_samples() {
            samples.push(self.sample(traj, s)?);
        }
        DiffractionTrace::from_samples(&traj.times, self.spot, &samples)
    }
}

/// General-kernel intensity trace at an arbitrary spot.
pub fn general_kernel(
    traj: &DensityMatrixTrajectory,
    source: SpotSource,
    beam: &BeamConfig,
    spot: [i32; 2],
) -> Result<DiffractionTrace, SignalError> {
    SpotEvaluator::general(source, beam, spot)?.trace(traj)
}

/// Specialized trace for a spot whose Bragg vector lies along x.
pub fn intensity_x_spot(
    traj: &DensityMatrixTrajectory,
    source: SpotSource,
    beam: &BeamConfig,
    spot: [i32; 2],
) -> Result<DiffractionTrace, SignalError> {
    SpotEvaluator::x_axis(source, beam, spot)?.trace(traj)
}

/// Specialized trace for a spot whose Bragg vector lies along y.
pub fn intensity_y_spot(
    traj: &DensityMatrixTrajectory,
    source: SpotSource,
    beam: &BeamConfig,
    spot: [i32; 2],
) -> Result<DiffractionTrace, SignalError> {
    SpotEvaluator::y_axis(source, beam, spot)?.trace(traj)
}

/// Windowed Fourier amplitudes of a trace at the carrier and its second
/// harmonic.
#[derive(Debug, Clone, Copy)]
pub struct SpectralContent {
    pub amp_fundamental: f64,
    pub amp_second: f64,
    /// amp_fundamental / amp_second.
    pub ratio: f64,
}

/// Hann-windowed discrete Fourier amplitudes over the central half of the
/// sampled span, mean-subtracted so the dc term cannot leak. Requires at
/// least four carrier periods of data.
pub fn spectral_content(
    times: &[f64],
    values: &[f64],
    omega: f64,
) -> Result<SpectralContent, SignalError> {
    if times.len() != values.len() {
        return Err(SignalError::ShapeMismatch {
            expected: times.len(),
            got: values.len(),
        });
    }
    if omega <= 0.0 || !omega.is_finite() {
        return Err(SignalError::NonPositiveFrequency);
    }
    if times.len() < 8 {
        return Err(SignalError::TraceTooShort {
            span: 0.0,
            needed: 4.0 * 2.0 * core::f64::consts::PI / omega,
        });
    }
    let t_first = times[0];
    let span = times[times.len() - 1] - t_first;
    let needed = 4.0 * 2.0 * core::f64::consts::PI / omega;
    if span < needed - 1e-9 {
        return Err(SignalError::TraceTooShort { span, needed });
    }
    let w_start = t_first + 0.25 * span;
    let w_len = 0.5 * span;

    let window = |t: f64| -> f64 {
        let x = (t - w_start) / w_len;
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let s = (core::f64::consts::PI * x).sin();
        s * s
    };
    let mut mass = 0.0;
    let mut mean = 0.0;
    for (&t, &v) in times.iter().zip(values) {
        let w = window(t);
        mass += w;
        mean += w * v;
    }
    if mass <= 0.0 {
        return Err(SignalError::TraceTooShort { span, needed });
    }
    mean /= mass;

    let amp_at = |freq: f64| -> f64 {
        let mut acc = C_ZERO;
        for (&t, &v) in times.iter().zip(values) {
            let w = window(t);
            if w > 0.0 {
                let phase = C64::from_polar(1.0, -freq * (t - w_start));
                acc += phase * (w * (v - mean));
            }
        }
        acc.norm() / mass
    };
    let amp_fundamental = amp_at(omega);
    let amp_second = amp_at(2.0 * omega);
    Ok(SpectralContent {
        amp_fundamental,
        amp_second,
        ratio: amp_fundamental / amp_second,
    })
}

/// Gaussian temporal smoothing with reflective ends, modeling a probe of
/// finite duration. `fwhm` is in the same units as `times`; zero returns
/// the input unchanged.
pub fn convolve_probe_envelope(
    times: &[f64],
    values: &[f64],
    fwhm: f64,
) -> Result<Vec<f64>, SignalError> {
    if times.len() != values.len() {
        return Err(SignalError::ShapeMismatch {
            expected: times.len(),
            got: values.len(),
        });
    }
    if fwhm < 0.0 || !fwhm.is_finite() {
        return Err(SignalError::NegativeWidth);
    }
    if fwhm == 0.0 || values.len() < 2 {
        return Ok(values.to_vec());
    }
    let dt = times[1] - times[0];
    if dt <= 0.0 {
        return Err(SignalError::NonUniformSampling {
            gap: dt,
            expected: dt,
        });
    }
    for w in times.windows(2) {
        let gap = w[1] - w[0];
        if (gap - dt).abs() > 1e-9 * dt {
            return Err(SignalError::NonUniformSampling { gap, expected: dt });
        }
    }
    let sigma = fwhm / (8.0 * core::f64::consts::LN_2).sqrt();
    let half = ((4.0 * sigma / dt).ceil() as usize).max(1);
    let mut kernel = Vec::with_capacity(2 * half + 1);
    let mut mass = 0.0;
    for q in -(half as isize)..=(half as isize) {
        let x = q as f64 * dt / sigma;
        let g = (-0.5 * x * x).exp();
        kernel.push(g);
        mass += g;
    }
    for g in &mut kernel {
        *g /= mass;
    }

    let n = values.len() as isize;
    // Reflect indices about both ends (period 2(n-1)).
    let fold = |m: isize| -> usize {
        let period = 2 * (n - 1);
        let mut r = m.rem_euclid(period);
        if r >= n {
            r = period - r;
        }
        r as usize
    };
    let mut out = Vec::with_capacity(values.len());
    for i in 0..n {
        let mut acc = 0.0;
        for (j, g) in kernel.iter().enumerate() {
            let off = j as isize - half as isize;
            acc += g * values[fold(i + off)];
        }
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphene::{bz_grid, GaussianOrbital};
    use crate::sbe::{propagate, LaserPulse, PropagatorConfig};
    use core::f64::consts::PI;

    const A_CC: f64 = 4.6487;
    const T_HOP: f64 = 0.09922;
    const E0: f64 = 4.8617e-3;
    const OMEGA: f64 = 0.0569613;

    fn lattice() -> Lattice {
        Lattice::honeycomb(A_CC)
    }

    fn kernel(lat: &Lattice) -> ClosedFormKernel {
        ClosedFormKernel::new(lat, T_HOP, &GaussianOrbital::new(0.5).unwrap())
    }

    /// Short driven run with live coherences on a small momentum grid.
    fn driven_trajectory(lat: &Lattice) -> DensityMatrixTrajectory {
        let tau = 5.0 * 2.0 * PI / OMEGA;
        let pulse = LaserPulse::new(3.0 * E0, OMEGA, tau, [1.0, 0.0]).unwrap();
        let mut cfg = PropagatorConfig::new(0.2, 413.4, tau);
        cfg.sample_stride = 250;
        propagate(lat, T_HOP, &bz_grid(lat, 5), &pulse, &cfg).unwrap()
    }

    #[test]
    fn kinematics_match_closed_forms() {
        let rest = beam_kinematics(0.0).unwrap();
        assert_eq!(rest.beta, 0.0);
        assert_eq!(rest.gamma, 1.0);
        assert!((rest.energy - 1.0 / (FINE_STRUCTURE * FINE_STRUCTURE)).abs() < 1e-9);

        let mc2 = beam_kinematics(ELECTRON_REST_EV).unwrap();
        assert!((mc2.gamma - 2.0).abs() < 1e-12);
        assert!((mc2.beta - 3.0f64.sqrt() / 2.0).abs() < 1e-12);

        let mev = beam_kinematics(1.0e6).unwrap();
        assert!((mev.gamma - 2.956_951).abs() < 1e-5);
        assert!((mev.beta - 0.941_079).abs() < 1e-5);

        assert!(matches!(
            beam_kinematics(-5.0),
            Err(SignalError::NegativeKineticEnergy)
        ));

        let t = kinetic_for_beta(0.5).unwrap();
        assert!((beam_kinematics(t).unwrap().beta - 0.5).abs() < 1e-12);
        assert!(matches!(
            kinetic_for_beta(1.0),
            Err(SignalError::InvalidBeta)
        ));
    }

    #[test]
    fn beam_config_requires_unit_incidence() {
        let mut beam = BeamConfig::electron_rel_45(1.0e6);
        assert!(beam.kinematics().is_ok());
        beam.incidence = [1.0, 0.0, 1.0];
        assert!(matches!(
            beam.kinematics(),
            Err(SignalError::NonUnitIncidence { .. })
        ));
    }

    #[test]
    fn x_spot_has_no_current_channels_on_either_path() {
        let lat = lattice();
        let kern = kernel(&lat);
        let traj = driven_trajectory(&lat);
        let beam = BeamConfig::electron_rel_45(1.0e6);

        let special = intensity_x_spot(&traj, SpotSource::full(&kern), &beam, [1, 1]).unwrap();
        let general = general_kernel(&traj, SpotSource::full(&kern), &beam, [1, 1]).unwrap();

        let dd_max = special.i_dd.iter().cloned().fold(0.0, f64::max);
        assert!(dd_max > 0.0);
        for s in 0..special.times.len() {
            assert_eq!(special.i_dj[s], 0.0);
            assert_eq!(special.i_jj[s], 0.0);
            assert!(general.i_dj[s].abs() < 1e-12 * dd_max);
            assert!(general.i_jj[s].abs() < 1e-12 * dd_max);
            let rel = (special.i_dd[s] - general.i_dd[s]).abs() / dd_max;
            assert!(rel < 1e-10, "dd mismatch {rel:.3e} at sample {s}");
        }
    }

    #[test]
    fn y_spot_specialization_matches_general_contraction() {
        let lat = lattice();
        let kern = kernel(&lat);
        let traj = driven_trajectory(&lat);
        let beam = BeamConfig::electron_rel_45(1.0e6);

        let special = intensity_y_spot(&traj, SpotSource::full(&kern), &beam, [1, -1]).unwrap();
        let general = general_kernel(&traj, SpotSource::full(&kern), &beam, [1, -1]).unwrap();

        let scale = special.i_total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(scale > 0.0);
        let mut dj_seen = 0.0f64;
        for s in 0..special.times.len() {
            for (a, b) in [
                (special.i_dd[s], general.i_dd[s]),
                (special.i_dj[s], general.i_dj[s]),
                (special.i_jj[s], general.i_jj[s]),
            ] {
                assert!((a - b).abs() < 1e-10 * scale, "{a:.6e} vs {b:.6e}");
            }
            assert_eq!(
                special.i_total[s],
                special.i_dd[s] + special.i_dj[s] + special.i_jj[s]
            );
            dj_seen = dj_seen.max(special.i_dj[s].abs());
        }
        assert!(dj_seen > 0.0, "driven coherences should light up dj");

        // A resting probe sees the density channel alone.
        let still = intensity_y_spot(
            &traj,
            SpotSource::full(&kern),
            &BeamConfig::electron_rel_45(0.0),
            [1, -1],
        )
        .unwrap();
        for s in 0..still.times.len() {
            assert_eq!(still.i_dj[s], 0.0);
            assert_eq!(still.i_jj[s], 0.0);
            assert_eq!(still.i_total[s], still.i_dd[s]);
        }
    }

    #[test]
    fn channel_scaling_in_beta_has_unit_and_double_slopes() {
        let lat = lattice();
        let kern = kernel(&lat);
        let traj = driven_trajectory(&lat);

        let betas = [0.1, 0.2, 0.4, 0.8];
        let mut dj = Vec::new();
        let mut jj = Vec::new();
        for &b in &betas {
            let beam = BeamConfig::electron_rel_45(kinetic_for_beta(b).unwrap());
            let tr = intensity_y_spot(&traj, SpotSource::full(&kern), &beam, [1, -1]).unwrap();
            // Freeze rho and the tables: only the beta prefactors vary, so
            // one sample suffices.
            dj.push(tr.i_dj[3].abs());
            jj.push(tr.i_jj[3].abs());
        }
        for i in 1..betas.len() {
            let slope_dj = (dj[i] / dj[i - 1]).ln() / (betas[i] / betas[i - 1]).ln();
            let slope_jj = (jj[i] / jj[i - 1]).ln() / (betas[i] / betas[i - 1]).ln();
            assert!((slope_dj - 1.0).abs() < 1e-6, "dj slope {slope_dj}");
            assert!((slope_jj - 2.0).abs() < 1e-6, "jj slope {slope_jj}");
        }
    }

    #[test]
    fn geometry_and_component_violations_are_rejected() {
        let lat = lattice();
        let kern = kernel(&lat);
        let traj = driven_trajectory(&lat);
        let beam = BeamConfig::electron_rel_45(1.0e6);

        assert!(matches!(
            intensity_x_spot(&traj, SpotSource::full(&kern), &beam, [1, -1]),
            Err(SignalError::SpotOffAxis { .. })
        ));
        assert!(matches!(
            intensity_y_spot(&traj, SpotSource::full(&kern), &beam, [1, 1]),
            Err(SignalError::SpotOffAxis { .. })
        ));
        assert!(matches!(
            general_kernel(&traj, SpotSource::full(&kern), &beam, [0, 0]),
            Err(SignalError::Lattice(GrapheneError::ZeroBraggIndex))
        ));

        let mut tilted = beam;
        tilted.incidence = [0.0, 0.0, 1.0];
        assert!(matches!(
            intensity_y_spot(&traj, SpotSource::full(&kern), &tilted, [1, -1]),
            Err(SignalError::BeamNotDiagonal { .. })
        ));
        let mut off_plane = beam;
        off_plane.incidence = [0.0, FRAC_1_SQRT_2, FRAC_1_SQRT_2];
        assert!(matches!(
            intensity_y_spot(&traj, SpotSource::full(&kern), &off_plane, [1, -1]),
            Err(SignalError::BeamOffPlane { .. })
        ));

        assert!(matches!(
            general_kernel(&traj, SpotSource::density_only(&kern), &beam, [1, -1]),
            Err(SignalError::MissingComponent { .. })
        ));
        // An x-ray never asks for the currents, so the same source is fine.
        let mut xray = beam;
        xray.probe = Probe::Xray;
        let tr = general_kernel(&traj, SpotSource::density_only(&kern), &xray, [1, -1]).unwrap();
        assert!(tr.i_dj.iter().all(|&v| v == 0.0));
        assert!(tr.i_jj.iter().all(|&v| v == 0.0));

        // Currents present but zeroed: the full electron kernel reduces to
        // the density channel.
        let zeroed = general_kernel(
            &traj,
            SpotSource::with_zeroed_currents(&kern),
            &beam,
            [1, -1],
        )
        .unwrap();
        let full = general_kernel(&traj, SpotSource::full(&kern), &beam, [1, -1]).unwrap();
        for s in 0..zeroed.times.len() {
            assert_eq!(zeroed.i_dj[s], 0.0);
            assert_eq!(zeroed.i_jj[s], 0.0);
            assert!((zeroed.i_dd[s] - full.i_dd[s]).abs() < 1e-15 * full.i_dd[s].abs());
        }
    }

    #[test]
    fn static_target_gives_constant_traces() {
        let lat = lattice();
        let kern = kernel(&lat);
        let quiet = LaserPulse::new(0.0, OMEGA, 400.0, [1.0, 0.0]).unwrap();
        let mut cfg = PropagatorConfig::new(0.5, f64::INFINITY, 400.0);
        cfg.sample_stride = 200;
        let traj = propagate(&lat, T_HOP, &bz_grid(&lat, 5), &quiet, &cfg).unwrap();
        let beam = BeamConfig::electron_rel_45(1.0e6);

        for spot in [[1, 1], [1, -1], [2, 1]] {
            let tr = general_kernel(&traj, SpotSource::full(&kern), &beam, spot).unwrap();
            assert!(tr.times.len() > 2);
            for s in 1..tr.times.len() {
                assert!((tr.i_total[s] - tr.i_total[0]).abs() <= 1e-12 * tr.i_total[0].abs());
                assert!((tr.i_dd[s] - tr.i_dd[0]).abs() <= 1e-12 * tr.i_dd[0].abs().max(1e-30));
            }
        }
    }

    #[test]
    fn origin_shift_leaves_channels_unchanged() {
        let lat = lattice();
        let shifted_lat = lat.with_origin_shift([0.7, -0.3]);
        let kern = kernel(&lat);
        let kern_shifted = kernel(&shifted_lat);
        let traj = driven_trajectory(&lat);
        let beam = BeamConfig::electron_rel_45(1.0e6);

        for spot in [[1, 1], [1, -1]] {
            let a = general_kernel(&traj, SpotSource::full(&kern), &beam, spot).unwrap();
            let b = general_kernel(&traj, SpotSource::full(&kern_shifted), &beam, spot).unwrap();
            let scale = a.i_total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for s in 0..a.times.len() {
                assert!((a.i_dd[s] - b.i_dd[s]).abs() < 1e-10 * scale);
                assert!((a.i_dj[s] - b.i_dj[s]).abs() < 1e-10 * scale);
                assert!((a.i_jj[s] - b.i_jj[s]).abs() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn pure_second_harmonic_has_tiny_fundamental_ratio() {
        let period = 2.0 * PI / OMEGA;
        let n = 512;
        let span = 8.0 * period;
        let times: Vec<f64> = (0..n).map(|i| span * i as f64 / (n - 1) as f64).collect();
        let values: Vec<f64> = times.iter().map(|&t| (2.0 * OMEGA * t).cos()).collect();
        let sc = spectral_content(&times, &values, OMEGA).unwrap();
        assert!(sc.ratio < 0.05, "ratio {:.3e}", sc.ratio);
        assert!(sc.amp_second > 0.1);

        let short_times: Vec<f64> = times.iter().map(|t| t / 4.0).collect();
        assert!(matches!(
            spectral_content(&short_times, &values, OMEGA),
            Err(SignalError::TraceTooShort { .. })
        ));
    }

    #[test]
    fn probe_envelope_smoothing_behaves() {
        let period = 2.0 * PI / OMEGA;
        // Whole number of periods with cosine phase even about both ends,
        // so the reflective extension continues the tone exactly.
        let n = 481;
        let dt = period / 40.0;
        let times: Vec<f64> = (0..n).map(|i| dt * i as f64).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|&t| 1.0 + 0.5 * (OMEGA * t).cos())
            .collect();

        let same = convolve_probe_envelope(&times, &values, 0.0).unwrap();
        assert_eq!(same, values);

        let flat = vec![0.7; n];
        let still_flat = convolve_probe_envelope(&times, &flat, 3.0 * period).unwrap();
        for v in &still_flat {
            assert!((v - 0.7).abs() < 1e-12);
        }

        let smooth = convolve_probe_envelope(&times, &values, 4.0 * period).unwrap();
        let pp_in = DiffractionTrace::peak_to_peak(&values);
        let pp_out = DiffractionTrace::peak_to_peak(&smooth);
        assert!(pp_out * 10.0 < pp_in, "pp {pp_in:.3e} -> {pp_out:.3e}");
        // The filter has unit dc gain; the integral mean (trapezoid, so the
        // tone quadratures away exactly) must survive.
        let trap = |v: &[f64]| -> f64 {
            let inner: f64 = v[1..v.len() - 1].iter().sum();
            (inner + 0.5 * (v[0] + v[v.len() - 1])) / (v.len() - 1) as f64
        };
        assert!((trap(&values) - trap(&smooth)).abs() < 1e-6);

        assert!(matches!(
            convolve_probe_envelope(&times, &values, -1.0),
            Err(SignalError::NegativeWidth)
        ));
        let mut bad_times = times.clone();
        bad_times[5] += 0.5 * dt;
        assert!(matches!(
            convolve_probe_envelope(&bad_times, &values, period),
            Err(SignalError::NonUniformSampling { .. })
        ));
    }
}
