//! Pump-driven two-band dynamics over the Brillouin zone.
//!
//! A linearly polarized sin^4 pump accelerates every crystal momentum along
//! p_t = p + A(t); at each momentum an independent 2x2 density matrix in the
//! instantaneous band basis obeys i d(rho)/dt = [H(p_t), rho] - i Gamma(rho),
//! where H couples the bands through E(t) . d_cv(p_t) and Gamma damps only
//! the coherences at rate 1/T2. A fixed-step classical 4th-order integrator
//! keeps every stage time on the cached vector-potential table, so a run is
//! reproducible bit for bit for a given momentum order.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

// Float supplies the math methods the std prelude would; only the
// no_std build resolves through it.
#[cfg(not(test))]
use num_traits::Float;

use crate::graphene::{
    add2, cell_matrix_elements, dot2, eigensystem, hamiltonian_k, interband_coupling_closed_form,
    norm2, structure_factor, CellGrid, GrapheneError, Lattice, OrbitalProfile, Vec2,
};
use crate::linalg::{herm2_eigen, pairwise_sum, Mat2, C64, C_ONE, C_ZERO};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SbeError {
    /// Polarization must be a unit vector.
    NonUnitPolarization { norm: f64 },
    /// Peak field must be finite and non-negative.
    InvalidAmplitude,
    /// Carrier frequency must be positive and finite.
    NonPositiveFrequency,
    /// Pulse duration must be positive and finite.
    NonPositiveDuration,
    /// Steps and table spacings must be positive.
    NonPositiveStep,
    /// The step must resolve the carrier, dt <= 2 pi / (40 omega).
    StepTooCoarse { dt: f64, limit: f64 },
    /// Dephasing time must be positive; infinity disables dephasing.
    NonPositiveDephasing,
    /// Only the classical 4th-order integrator is implemented.
    UnsupportedOrder { order: u32 },
    /// Propagation horizon must be positive and finite.
    NonPositiveHorizon,
    /// Sample stride must be at least 1.
    ZeroStride,
    /// A density-matrix entry left the finite range during propagation.
    NonFinite { index: usize, step: usize },
    /// Band-structure evaluation failed at a swept momentum.
    Model { index: usize, source: GrapheneError },
    /// Requested time lies outside the stored trajectory.
    TimeOutOfRange { t: f64 },
    /// Per-momentum results do not match the grid or sample count.
    PartShape { expected: usize, got: usize },
}

impl fmt::Display for SbeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SbeError::NonUnitPolarization { norm } => {
                write!(
                    f,
                    "polarization must be a unit vector, got |pol| = {norm:.6}"
                )
            }
            SbeError::InvalidAmplitude => write!(f, "peak field must be finite and >= 0"),
            SbeError::NonPositiveFrequency => write!(f, "carrier frequency must be positive"),
            SbeError::NonPositiveDuration => write!(f, "pulse duration must be positive"),
            SbeError::NonPositiveStep => write!(f, "step must be positive"),
            SbeError::StepTooCoarse { dt, limit } => write!(
                f,
                "dt = {dt:.6e} does not resolve the carrier; need dt <= {limit:.6e}"
            ),
            SbeError::NonPositiveDephasing => {
                write!(f, "dephasing time must be positive (infinity allowed)")
            }
            SbeError::UnsupportedOrder { order } => {
                write!(f, "integrator order {order} not supported; only order 4")
            }
            SbeError::NonPositiveHorizon => write!(f, "propagation horizon must be positive"),
            SbeError::ZeroStride => write!(f, "sample stride must be >= 1"),
            SbeError::NonFinite { index, step } => write!(
                f,
                "non-finite density matrix at momentum index {index}, step {step}"
            ),
            SbeError::Model { index, source } => {
                write!(f, "band model failed at momentum index {index}: {source}")
            }
            SbeError::TimeOutOfRange { t } => {
                write!(f, "time {t:.6e} lies outside the stored trajectory")
            }
            SbeError::PartShape { expected, got } => {
                write!(f, "expected {expected} per-momentum parts, got {got}")
            }
        }
    }
}

/// Linearly polarized pump with a sin^4 envelope:
/// E(t) = pol E0 sin^4(pi t / tau) cos(omega t) on [0, tau], zero outside.
#[derive(Debug, Clone, Copy)]
pub struct LaserPulse {
    pub e0: f64,
    pub omega: f64,
    pub tau: f64,
    pub pol: Vec2,
}

impl LaserPulse {
    pub fn new(e0: f64, omega: f64, tau: f64, pol: Vec2) -> Result<Self, SbeError> {
        if e0 < 0.0 || !e0.is_finite() {
            return Err(SbeError::InvalidAmplitude);
        }
        if omega <= 0.0 || !omega.is_finite() {
            return Err(SbeError::NonPositiveFrequency);
        }
        if tau <= 0.0 || !tau.is_finite() {
            return Err(SbeError::NonPositiveDuration);
        }
        let norm = norm2(pol);
        let unit = (norm - 1.0).abs() < 1e-9;
        if !unit {
            return Err(SbeError::NonUnitPolarization { norm });
        }
        Ok(LaserPulse {
            e0,
            omega,
            tau,
            pol,
        })
    }

    /// Scalar field along the polarization axis at time `t`.
    pub fn amplitude(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= self.tau {
            return 0.0;
        }
        let s = (PI * t / self.tau).sin();
        self.e0 * s * s * s * s * (self.omega * t).cos()
    }

    /// Field vector at time `t`.
    pub fn field(&self, t: f64) -> Vec2 {
        let a = self.amplitude(t);
        [self.pol[0] * a, self.pol[1] * a]
    }

    /// Carrier period 2 pi / omega.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// Coarsest propagation step that still resolves the carrier.
    pub fn max_step(&self) -> f64 {
        self.period() / 40.0
    }
}

/// Cached vector potential A(t) = -int_0^t E dt' on an equidistant node
/// table, accumulated with per-interval Simpson quadrature (midpoint
/// refinement). A(0) = 0 exactly; past the table the last node is held.
#[derive(Debug, Clone)]
pub struct VectorPotential {
    pol: Vec2,
    node_step: f64,
    nodes: Vec<f64>,
}

impl VectorPotential {
    pub fn new(pulse: &LaserPulse, node_step: f64, t_end: f64) -> Result<Self, SbeError> {
        if node_step <= 0.0 || node_step.is_nan() {
            return Err(SbeError::NonPositiveStep);
        }
        if t_end <= 0.0 || !t_end.is_finite() {
            return Err(SbeError::NonPositiveHorizon);
        }
        let count = ((t_end / node_step - 1e-9).ceil() as usize).max(1);
        let mut nodes = Vec::with_capacity(count + 1);
        nodes.push(0.0);
        let mut acc = 0.0;
        for j in 0..count {
            let t0 = j as f64 * node_step;
            let tm = t0 + 0.5 * node_step;
            let t1 = t0 + node_step;
            acc -= node_step / 6.0
                * (pulse.amplitude(t0) + 4.0 * pulse.amplitude(tm) + pulse.amplitude(t1));
            nodes.push(acc);
        }
        Ok(VectorPotential {
            pol: pulse.pol,
            node_step,
            nodes,
        })
    }

    /// Scalar potential at node `j`, clamped to the last node.
    pub fn node(&self, j: usize) -> Vec2 {
        let s = self.nodes[j.min(self.nodes.len() - 1)];
        [self.pol[0] * s, self.pol[1] * s]
    }

    fn scalar_at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let x = t / self.node_step;
        let last = self.nodes.len() - 1;
        if x >= last as f64 {
            return self.nodes[last];
        }
        let r = x.round();
        if (x - r).abs() <= 1e-9 * x.max(1.0) {
            return self.nodes[r as usize];
        }
        let j = x.floor() as usize;
        let frac = x - j as f64;
        self.nodes[j] * (1.0 - frac) + self.nodes[j + 1] * frac
    }

    /// A(t); nodes are returned exactly, interior times linearly interpolated.
    pub fn at(&self, t: f64) -> Vec2 {
        let s = self.scalar_at(t);
        [self.pol[0] * s, self.pol[1] * s]
    }

    /// Largest |A| over the table.
    pub fn peak(&self) -> f64 {
        let mut m = 0.0f64;
        for s in &self.nodes {
            m = m.max(s.abs());
        }
        m
    }

    /// |A| left at the end of the table (net impulse of the stored window).
    pub fn tail(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].abs()
    }
}

/// One-shot A(t) for diagnostics; tabulates to max(t, tau) with 160 nodes
/// per carrier period.
pub fn vector_potential(pulse: &LaserPulse, t: f64) -> Vec2 {
    let step = pulse.period() / 160.0;
    let t_end = pulse.tau.max(t).max(step);
    let table = VectorPotential::new(pulse, step, t_end).expect("positive step and horizon");
    table.at(t)
}

/// Fixed-step propagation parameters.
#[derive(Debug, Clone, Copy)]
pub struct PropagatorConfig {
    /// Step in a.u.; must satisfy dt <= 2 pi / (40 omega).
    pub dt: f64,
    /// Coherence decay time in a.u.; `f64::INFINITY` disables dephasing.
    pub t2: f64,
    /// Integrator order; only the classical 4th-order scheme exists.
    pub order: u32,
    /// Propagation horizon in a.u.; the run covers at least this long and
    /// ends on a sample-stride boundary.
    pub t_end: f64,
    /// Keep every stride-th step in the trajectory, so the stored samples
    /// form a uniform time grid of spacing stride * dt.
    pub sample_stride: usize,
}

impl PropagatorConfig {
    pub fn new(dt: f64, t2: f64, t_end: f64) -> Self {
        PropagatorConfig {
            dt,
            t2,
            order: 4,
            t_end,
            sample_stride: 1,
        }
    }

    pub fn validate(&self, pulse: &LaserPulse) -> Result<(), SbeError> {
        if self.dt <= 0.0 || self.dt.is_nan() {
            return Err(SbeError::NonPositiveStep);
        }
        let limit = pulse.max_step();
        if self.dt > limit {
            return Err(SbeError::StepTooCoarse { dt: self.dt, limit });
        }
        if self.t2 <= 0.0 || self.t2.is_nan() {
            return Err(SbeError::NonPositiveDephasing);
        }
        if self.order != 4 {
            return Err(SbeError::UnsupportedOrder { order: self.order });
        }
        if self.t_end <= 0.0 || !self.t_end.is_finite() {
            return Err(SbeError::NonPositiveHorizon);
        }
        if self.sample_stride == 0 {
            return Err(SbeError::ZeroStride);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Stage {
    a: Vec2,
    amp: f64,
}

/// Pump data at every integrator stage time, shared across momenta. The
/// vector-potential node spacing is dt/4, so the stages at t, t + dt/2, and
/// t + dt all read table nodes instead of interpolating.
#[derive(Debug, Clone)]
pub struct StageTable {
    pulse: LaserPulse,
    cfg: PropagatorConfig,
    n_steps: usize,
    head: Vec<Stage>,
    mid: Vec<Stage>,
    sample_steps: Vec<usize>,
    sample_times: Vec<f64>,
    sample_potential: Vec<Vec2>,
}

impl StageTable {
    pub fn new(pulse: &LaserPulse, cfg: &PropagatorConfig) -> Result<Self, SbeError> {
        cfg.validate(pulse)?;
        let dt = cfg.dt;
        // Rounded up to a stride multiple so the stored samples are an
        // exactly uniform time grid (the horizon is a lower bound).
        let wanted = ((cfg.t_end / dt - 1e-9).ceil() as usize).max(1);
        let n_steps = wanted.div_ceil(cfg.sample_stride) * cfg.sample_stride;
        let table = VectorPotential::new(pulse, 0.25 * dt, n_steps as f64 * dt)?;
        let mut head = Vec::with_capacity(n_steps + 1);
        let mut mid = Vec::with_capacity(n_steps);
        for i in 0..=n_steps {
            head.push(Stage {
                a: table.node(4 * i),
                amp: pulse.amplitude(i as f64 * dt),
            });
            if i < n_steps {
                mid.push(Stage {
                    a: table.node(4 * i + 2),
                    amp: pulse.amplitude((i as f64 + 0.5) * dt),
                });
            }
        }
        let mut sample_steps = Vec::new();
        for i in (0..=n_steps).step_by(cfg.sample_stride) {
            sample_steps.push(i);
        }
        let sample_times = sample_steps.iter().map(|&i| i as f64 * dt).collect();
        let sample_potential = sample_steps.iter().map(|&i| head[i].a).collect();
        Ok(StageTable {
            pulse: *pulse,
            cfg: *cfg,
            n_steps,
            head,
            mid,
            sample_steps,
            sample_times,
            sample_potential,
        })
    }

    pub fn pulse(&self) -> &LaserPulse {
        &self.pulse
    }

    pub fn config(&self) -> &PropagatorConfig {
        &self.cfg
    }

    pub fn num_steps(&self) -> usize {
        self.n_steps
    }

    pub fn num_samples(&self) -> usize {
        self.sample_steps.len()
    }

    pub fn sample_times(&self) -> &[f64] {
        &self.sample_times
    }

    pub fn sample_potential(&self) -> &[Vec2] {
        &self.sample_potential
    }
}

/// Stored samples of one momentum plus its step-wise conservation record.
#[derive(Debug, Clone)]
pub struct SingleTrajectory {
    pub rho_vv: Vec<f64>,
    pub rho_cc: Vec<f64>,
    /// rho[conduction][valence]; the other coherence is its conjugate.
    pub rho_cv: Vec<C64>,
    pub max_trace_dev: f64,
    pub max_herm_dev: f64,
}

struct BandHam {
    /// Half band gap t |f|; the band energies are -eps and +eps.
    eps: f64,
    /// Dipole coupling E(t) . d_cv(p_t).
    h: f64,
}

fn band_hamiltonian(
    lat: &Lattice,
    t_hop: f64,
    index: usize,
    p: Vec2,
    stage: &Stage,
    pol: Vec2,
) -> Result<BandHam, SbeError> {
    let pt = add2(p, stage.a);
    let eps = t_hop.abs() * structure_factor(lat, pt).norm();
    let d = interband_coupling_closed_form(lat, pt)
        .map_err(|source| SbeError::Model { index, source })?;
    Ok(BandHam {
        eps,
        h: stage.amp * dot2(pol, d),
    })
}

/// d(rho)/dt = -i [H, rho] - gamma on the coherences, with
/// H = [[-eps, h], [h, eps]] in the (valence, conduction) basis.
fn rhs(eps: f64, h: f64, gamma: f64, r: &Mat2) -> Mat2 {
    let c00 = (r[1][0] - r[0][1]) * h;
    let c11 = (r[0][1] - r[1][0]) * h;
    let c01 = r[0][1] * (-2.0 * eps) + (r[1][1] - r[0][0]) * h;
    let c10 = r[1][0] * (2.0 * eps) + (r[0][0] - r[1][1]) * h;
    let mi = C64::new(0.0, -1.0);
    [
        [mi * c00, mi * c01 - r[0][1] * gamma],
        [mi * c10 - r[1][0] * gamma, mi * c11],
    ]
}

fn axpy(r: &Mat2, k: &Mat2, s: f64) -> Mat2 {
    let mut out = *r;
    for a in 0..2 {
        for b in 0..2 {
            out[a][b] += k[a][b] * s;
        }
    }
    out
}

/// Propagates one momentum from the filled-valence state through the pump.
pub fn propagate_momentum(
    lat: &Lattice,
    t_hop: f64,
    index: usize,
    p: Vec2,
    stages: &StageTable,
) -> Result<SingleTrajectory, SbeError> {
    let cfg = &stages.cfg;
    let dt = cfg.dt;
    let gamma = if cfg.t2.is_infinite() {
        0.0
    } else {
        1.0 / cfg.t2
    };
    let pol = stages.pulse.pol;
    let ns = stages.sample_steps.len();
    let mut out = SingleTrajectory {
        rho_vv: Vec::with_capacity(ns),
        rho_cc: Vec::with_capacity(ns),
        rho_cv: Vec::with_capacity(ns),
        max_trace_dev: 0.0,
        max_herm_dev: 0.0,
    };
    let mut rho: Mat2 = [[C_ONE, C_ZERO], [C_ZERO, C_ZERO]];
    out.rho_vv.push(rho[0][0].re);
    out.rho_cc.push(rho[1][1].re);
    out.rho_cv.push(rho[1][0]);
    let mut next_sample = 1;

    let mut cur = band_hamiltonian(lat, t_hop, index, p, &stages.head[0], pol)?;
    for i in 0..stages.n_steps {
        let mid = band_hamiltonian(lat, t_hop, index, p, &stages.mid[i], pol)?;
        let nxt = band_hamiltonian(lat, t_hop, index, p, &stages.head[i + 1], pol)?;

        let k1 = rhs(cur.eps, cur.h, gamma, &rho);
        let k2 = rhs(mid.eps, mid.h, gamma, &axpy(&rho, &k1, 0.5 * dt));
        let k3 = rhs(mid.eps, mid.h, gamma, &axpy(&rho, &k2, 0.5 * dt));
        let k4 = rhs(nxt.eps, nxt.h, gamma, &axpy(&rho, &k3, dt));
        for a in 0..2 {
            for b in 0..2 {
                rho[a][b] += (k1[a][b] + (k2[a][b] + k3[a][b]) * 2.0 + k4[a][b]) * (dt / 6.0);
            }
        }
        cur = nxt;

        let mut finite = true;
        for row in &rho {
            for z in row {
                finite &= z.re.is_finite() && z.im.is_finite();
            }
        }
        if !finite {
            return Err(SbeError::NonFinite { index, step: i + 1 });
        }
        let trace_dev = (rho[0][0] + rho[1][1] - C_ONE).norm();
        let herm_dev = (rho[0][1] - rho[1][0].conj())
            .norm()
            .max(rho[0][0].im.abs())
            .max(rho[1][1].im.abs());
        out.max_trace_dev = out.max_trace_dev.max(trace_dev);
        out.max_herm_dev = out.max_herm_dev.max(herm_dev);

        if next_sample < ns && stages.sample_steps[next_sample] == i + 1 {
            out.rho_vv.push(rho[0][0].re);
            out.rho_cc.push(rho[1][1].re);
            out.rho_cv.push(rho[1][0]);
            next_sample += 1;
        }
    }
    Ok(out)
}

/// Strided density-matrix history over a momentum grid. Per sample `s` and
/// momentum `k` the entries rho_vv, rho_cc (real) and rho_cv (complex) live
/// at flat index `s * num_momenta + k`.
#[derive(Debug, Clone)]
pub struct DensityMatrixTrajectory {
    pub times: Vec<f64>,
    /// Pump vector potential at the sample times; fixes p_t = p + A.
    pub potential: Vec<Vec2>,
    pub momenta: Vec<Vec2>,
    pub rho_vv: Vec<f64>,
    pub rho_cc: Vec<f64>,
    pub rho_cv: Vec<C64>,
    /// Worst |trace - 1| seen at any step of any momentum.
    pub max_trace_dev: f64,
    /// Worst Hermiticity defect seen at any step of any momentum.
    pub max_herm_dev: f64,
}

impl DensityMatrixTrajectory {
    pub fn num_samples(&self) -> usize {
        self.times.len()
    }

    pub fn num_momenta(&self) -> usize {
        self.momenta.len()
    }

    pub fn density_matrix(&self, sample: usize, k: usize) -> Mat2 {
        let i = sample * self.momenta.len() + k;
        let cv = self.rho_cv[i];
        [
            [C64::new(self.rho_vv[i], 0.0), cv.conj()],
            [cv, C64::new(self.rho_cc[i], 0.0)],
        ]
    }

    /// Mean conduction-band occupation per sample, cascade-summed over the
    /// grid so the result does not depend on how the work was scheduled.
    pub fn conduction_population(&self) -> Vec<f64> {
        let nk = self.momenta.len();
        let scale = 1.0 / nk as f64;
        (0..self.times.len())
            .map(|s| pairwise_sum(&self.rho_cc[s * nk..(s + 1) * nk]) * scale)
            .collect()
    }

    /// Extreme occupation eigenvalues over all samples and momenta.
    pub fn eigenvalue_bounds(&self) -> [f64; 2] {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..self.num_samples() {
            for k in 0..self.num_momenta() {
                let (vals, _) = herm2_eigen(&self.density_matrix(s, k));
                lo = lo.min(vals[0]);
                hi = hi.max(vals[1]);
            }
        }
        [lo, hi]
    }

    /// Largest drift of the occupation eigenvalues away from the initial
    /// pair {0, 1}; zero for exactly unitary per-momentum evolution.
    pub fn max_spectral_drift(&self) -> f64 {
        let mut drift = 0.0f64;
        for s in 0..self.num_samples() {
            for k in 0..self.num_momenta() {
                let (vals, _) = herm2_eigen(&self.density_matrix(s, k));
                drift = drift.max(vals[0].abs()).max((vals[1] - 1.0).abs());
            }
        }
        drift
    }

    /// Index of the stored sample closest to time `t`.
    pub fn sample_nearest(&self, t: f64) -> Result<usize, SbeError> {
        let last = match self.times.last() {
            Some(&v) => v,
            None => return Err(SbeError::TimeOutOfRange { t }),
        };
        if !t.is_finite() || t < -1e-9 || t > last + 1e-9 {
            return Err(SbeError::TimeOutOfRange { t });
        }
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (i, &ti) in self.times.iter().enumerate() {
            if (ti - t).abs() < dist {
                dist = (ti - t).abs();
                best = i;
            }
        }
        Ok(best)
    }
}

/// Stitches per-momentum results (in momentum order) into one trajectory.
pub fn assemble_trajectory(
    stages: &StageTable,
    momenta: &[Vec2],
    parts: &[SingleTrajectory],
) -> Result<DensityMatrixTrajectory, SbeError> {
    if parts.len() != momenta.len() {
        return Err(SbeError::PartShape {
            expected: momenta.len(),
            got: parts.len(),
        });
    }
    let ns = stages.num_samples();
    let nk = momenta.len();
    for part in parts {
        if part.rho_vv.len() != ns || part.rho_cc.len() != ns || part.rho_cv.len() != ns {
            return Err(SbeError::PartShape {
                expected: ns,
                got: part.rho_vv.len(),
            });
        }
    }
    let mut traj = DensityMatrixTrajectory {
        times: stages.sample_times.clone(),
        potential: stages.sample_potential.clone(),
        momenta: momenta.to_vec(),
        rho_vv: Vec::with_capacity(ns * nk),
        rho_cc: Vec::with_capacity(ns * nk),
        rho_cv: Vec::with_capacity(ns * nk),
        max_trace_dev: 0.0,
        max_herm_dev: 0.0,
    };
    for s in 0..ns {
        for part in parts {
            traj.rho_vv.push(part.rho_vv[s]);
            traj.rho_cc.push(part.rho_cc[s]);
            traj.rho_cv.push(part.rho_cv[s]);
        }
    }
    for part in parts {
        traj.max_trace_dev = traj.max_trace_dev.max(part.max_trace_dev);
        traj.max_herm_dev = traj.max_herm_dev.max(part.max_herm_dev);
    }
    Ok(traj)
}

/// Propagates every momentum serially and assembles the trajectory. Parallel
/// drivers can instead map [`propagate_momentum`] over the grid and feed the
/// parts to [`assemble_trajectory`] in momentum order.
pub fn propagate(
    lat: &Lattice,
    t_hop: f64,
    momenta: &[Vec2],
    pulse: &LaserPulse,
    cfg: &PropagatorConfig,
) -> Result<DensityMatrixTrajectory, SbeError> {
    let stages = StageTable::new(pulse, cfg)?;
    let mut parts = Vec::with_capacity(momenta.len());
    for (i, &p) in momenta.iter().enumerate() {
        parts.push(propagate_momentum(lat, t_hop, i, p, &stages)?);
    }
    assemble_trajectory(&stages, momenta, &parts)
}

/// Unit-cell maps of the pump-induced density change and the current at one
/// stored sample: d_rho(r) = mean_k tr[rho(t) Q(p_t, r)] minus the same
/// contraction at the first sample; jx, jy likewise from the current fields
/// (no subtraction).
#[derive(Debug, Clone)]
pub struct RealspaceSnapshot {
    pub time: f64,
    pub grid: CellGrid,
    pub d_rho: Vec<f64>,
    pub jx: Vec<f64>,
    pub jy: Vec<f64>,
}

impl RealspaceSnapshot {
    /// Cell integral of the density change.
    pub fn net_charge(&self) -> f64 {
        self.grid.weight * pairwise_sum(&self.d_rho)
    }

    /// Cell-integrated current vector.
    pub fn net_current(&self) -> [f64; 2] {
        [
            self.grid.weight * pairwise_sum(&self.jx),
            self.grid.weight * pairwise_sum(&self.jy),
        ]
    }
}

/// tr(rho F) per grid point, accumulated into `dst` with weight `w`.
fn accumulate_trace(
    dst: &mut [f64],
    w: f64,
    fields: &[[Vec<C64>; 2]; 2],
    rvv: f64,
    rcc: f64,
    rcv: C64,
) {
    let rvc = rcv.conj();
    for i in 0..dst.len() {
        let z = fields[0][0][i] * rvv
            + fields[1][1][i] * rcc
            + fields[1][0][i] * rvc
            + fields[0][1][i] * rcv;
        dst[i] += w * z.re;
    }
}

pub fn realspace_snapshot(
    traj: &DensityMatrixTrajectory,
    t: f64,
    lat: &Lattice,
    t_hop: f64,
    orb: &impl OrbitalProfile,
    grid: &CellGrid,
) -> Result<RealspaceSnapshot, SbeError> {
    let s = traj.sample_nearest(t)?;
    let nk = traj.num_momenta();
    let npts = grid.num_points();
    let mut d_rho = vec![0.0; npts];
    let mut jx = vec![0.0; npts];
    let mut jy = vec![0.0; npts];
    let wk = 1.0 / nk as f64;
    for k in 0..nk {
        let p = traj.momenta[k];
        let pt = add2(p, traj.potential[s]);
        let state = eigensystem(&hamiltonian_k(lat, t_hop, pt), pt);
        let fields = cell_matrix_elements(lat, t_hop, orb, &state, grid)
            .map_err(|source| SbeError::Model { index: k, source })?;
        let i = s * nk + k;
        accumulate_trace(
            &mut d_rho,
            wk,
            &fields.q,
            traj.rho_vv[i],
            traj.rho_cc[i],
            traj.rho_cv[i],
        );
        accumulate_trace(
            &mut jx,
            wk,
            &fields.jx,
            traj.rho_vv[i],
            traj.rho_cc[i],
            traj.rho_cv[i],
        );
        accumulate_trace(
            &mut jy,
            wk,
            &fields.jy,
            traj.rho_vv[i],
            traj.rho_cc[i],
            traj.rho_cv[i],
        );

        // Reference density of the first stored sample, same contraction.
        let p0 = add2(p, traj.potential[0]);
        let state0 = eigensystem(&hamiltonian_k(lat, t_hop, p0), p0);
        let fields0 = cell_matrix_elements(lat, t_hop, orb, &state0, grid)
            .map_err(|source| SbeError::Model { index: k, source })?;
        accumulate_trace(
            &mut d_rho,
            -wk,
            &fields0.q,
            traj.rho_vv[k],
            traj.rho_cc[k],
            traj.rho_cv[k],
        );
    }
    Ok(RealspaceSnapshot {
        time: traj.times[s],
        grid: *grid,
        d_rho,
        jx,
        jy,
    })
}
