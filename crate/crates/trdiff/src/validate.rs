//! Invariant suite behind the `validate` subcommand: one fast check per
//! contract of every module, each reporting pass/fail with a measured
//! residual.

use trdiff_core::dirac::{
    contraction_small_q_limit, contraction_sum, dtilde, spin_sum_projector, spinor_bilinear,
    FourVector, GammaSet, SPINS,
};
use trdiff_core::fock::{
    anticommutator_check, commutator_check, xray_transition_element, ModeBasis, Statistics,
};
use trdiff_core::graphene::{
    bz_grid, eigensystem, hamiltonian_k, structure_factor, ClosedFormKernel,
};
use trdiff_core::linalg::C64;
use trdiff_core::sbe::{propagate, LaserPulse, PropagatorConfig};
use trdiff_core::signal::{
    beam_kinematics, convolve_probe_envelope, general_kernel, intensity_x_spot, intensity_y_spot,
    spectral_content, SpotSource,
};
use trdiff_core::xsec::{
    form_factor, rutherford_prefactor, thomson_prefactor, DensityGrid, ProbeGeometry,
};
use trdiff_core::FINE_STRUCTURE;

use crate::config::{CliError, Resolved};
use crate::units;

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

fn residual_check(name: &'static str, residual: f64, tol: f64) -> CheckResult {
    check(
        name,
        residual <= tol,
        format!("residual {residual:.3e} (tolerance {tol:.1e})"),
    )
}

/// Runs every check; failures never abort the suite.
pub fn run_suite(r: &Resolved) -> Vec<CheckResult> {
    let mut out = Vec::new();

    out.push(residual_check(
        "unit conversions round-trip",
        units::round_trip_residual(),
        1e-12,
    ));

    let gs = GammaSet::new();
    out.push(residual_check(
        "gamma anticommutation {g^mu, g^nu} = 2 eta",
        gs.anticommutation_residual(),
        1e-12,
    ));
    out.push(residual_check(
        "gamma hermiticity g0 g^mu+ g0 = g^mu",
        gs.hermiticity_residual(),
        1e-12,
    ));

    out.push(spinor_current_check(&gs));
    out.push(completeness_check(&gs));
    out.push(contraction_limit_check(&gs));
    out.push(transfer_kernel_check());

    out.push(fock_boson_check());
    out.push(fock_fermion_check());
    out.push(photon_element_check());

    out.push(rutherford_check());
    out.push(thomson_check());
    out.push(form_factor_check());

    out.push(lattice_duality_check(r));
    out.push(band_gauge_check(r));

    let short = short_pulse(r);
    out.push(dynamics_conservation_check(r, &short));
    out.push(dynamics_unitarity_check(r, &short));

    let quiet_traces = diffraction_checks(r, &short, &mut out);
    if let Err(e) = quiet_traces {
        out.push(check("diffraction evaluators", false, format!("{e}")));
    }

    out.push(spectral_tone_check());
    out.push(convolution_check());
    out.push(kinematics_check());

    out
}

/// Prints one line per check; `Err(Validation)` if any failed.
pub fn cmd_validate(r: &Resolved) -> Result<(), CliError> {
    let results = run_suite(r);
    let mut failed = 0usize;
    for c in &results {
        if c.passed {
            println!("PASS {} - {}", c.name, c.detail);
        } else {
            failed += 1;
            println!("FAIL {} - {}", c.name, c.detail);
        }
    }
    println!(
        "{} of {} checks passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        Err(CliError::Validation { failed })
    } else {
        Ok(())
    }
}

fn spinor_current_check(gs: &GammaSet) -> CheckResult {
    let mut worst = 0.0f64;
    for k in sample_momenta() {
        for s2 in SPINS {
            for s1 in SPINS {
                for nu in 0..4 {
                    let val = spinor_bilinear(gs, &k, s2, nu, &k, s1).unwrap();
                    let want = if s1 == s2 {
                        C64::new(2.0 * k.component(nu), 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    };
                    worst = worst.max((val - want).norm());
                }
            }
        }
    }
    residual_check("spinor current ubar g^nu u = 2 k^nu delta", worst, 1e-12)
}

fn completeness_check(gs: &GammaSet) -> CheckResult {
    let mut worst = 0.0f64;
    for k in sample_momenta() {
        let proj = spin_sum_projector(gs, &k).unwrap();
        let slash = gs.slash(&k);
        for i in 0..4 {
            for j in 0..4 {
                let want = slash[i][j]
                    + if i == j {
                        C64::new(1.0, 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    };
                worst = worst.max((proj[i][j] - want).norm());
            }
        }
    }
    residual_check("spin completeness sum u ubar = kslash + 1", worst, 1e-12)
}

fn contraction_limit_check(gs: &GammaSet) -> CheckResult {
    let k = FourVector::on_shell(0.3, -0.2, 0.5);
    let mut worst = 0.0f64;
    for s2 in SPINS {
        for s1 in SPINS {
            for nu in 0..4 {
                for alpha in 0..4 {
                    let val = contraction_sum(gs, &k, s1, s2, &k, nu, alpha).unwrap();
                    let want = contraction_small_q_limit(&k, s1, s2, nu, alpha);
                    worst = worst.max((val - want).norm());
                }
            }
        }
    }
    residual_check("spin-summed contraction at zero transfer", worst, 1e-12)
}

fn transfer_kernel_check() -> CheckResult {
    let kern = match dtilde([0.0, 0.0, 2.5]) {
        Ok(k) => k,
        Err(e) => return check("transfer-polarization kernel", false, format!("{e}")),
    };
    let mut worst = (kern.entries[0][0] - 1.0).abs();
    // s along z: spatial block diag(-1, -1, 0), mixed blocks zero.
    let want = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]];
    for (i, row) in want.iter().enumerate() {
        worst = worst.max(kern.entries[0][i + 1].abs());
        worst = worst.max(kern.entries[i + 1][0].abs());
        for (j, w) in row.iter().enumerate() {
            worst = worst.max((kern.entries[i + 1][j + 1] - w).abs());
        }
    }
    let c = kern.contract(&[7.0, 0.4, -0.3, 0.9]);
    worst = worst.max((c[0] - 7.0).abs());
    if dtilde([0.0, 0.0, 0.0]).is_ok() {
        return check(
            "transfer-polarization kernel",
            false,
            "zero transfer accepted".into(),
        );
    }
    residual_check("transfer-polarization kernel", worst, 1e-12)
}

fn fock_boson_check() -> CheckResult {
    let basis = ModeBasis::new(3, 4, Statistics::Boson).unwrap();
    match commutator_check(&basis) {
        Ok(res) => residual_check("bosonic [a, a+] = delta off boundary", res.interior, 1e-12),
        Err(e) => check(
            "bosonic [a, a+] = delta off boundary",
            false,
            format!("{e}"),
        ),
    }
}

fn fock_fermion_check() -> CheckResult {
    let basis = ModeBasis::new(5, 1, Statistics::Fermion).unwrap();
    match anticommutator_check(&basis) {
        Ok(res) => residual_check(
            "fermionic {b, b+} = delta with chain signs",
            res.mixed.max(res.pair),
            1e-12,
        ),
        Err(e) => check(
            "fermionic {b, b+} = delta with chain signs",
            false,
            format!("{e}"),
        ),
    }
}

fn photon_element_check() -> CheckResult {
    let basis = ModeBasis::new(2, 6, Statistics::Boson).unwrap();
    let mut worst = 0.0f64;
    for n in 1..=5 {
        match xray_transition_element(&basis, n) {
            Ok(v) => worst = worst.max((v - 2.0 * (n as f64).sqrt()).abs()),
            Err(e) => return check("photon counting element 2 sqrt(n)", false, format!("{e}")),
        }
    }
    residual_check("photon counting element 2 sqrt(n)", worst, 1e-12)
}

fn rutherford_check() -> CheckResult {
    let mut worst = 0.0f64;
    for i in 0..10 {
        let energy = 10.0_f64.powf(-1.0 + 0.5 * i as f64);
        for j in 1..=18 {
            let theta = std::f64::consts::PI * j as f64 / 18.0;
            let got = match rutherford_prefactor(energy, theta) {
                Ok(v) => v,
                Err(e) => return check("Rutherford closed form 4/|dk|^4", false, format!("{e}")),
            };
            let k = (2.0 * energy).sqrt();
            let dk = 2.0 * k * (0.5 * theta).sin();
            let want = 4.0 / dk.powi(4);
            worst = worst.max((got - want).abs() / want);
        }
    }
    residual_check("Rutherford closed form 4/|dk|^4", worst, 1e-12)
}

fn thomson_check() -> CheckResult {
    // Scattered direction parallel to the incident polarization: blocked.
    let zero_geom =
        ProbeGeometry::new([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], 1.0, [1.0, 0.0, 0.0]).unwrap();
    let max_geom =
        ProbeGeometry::new([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], 1.0, [0.0, 1.0, 0.0]).unwrap();
    let a4 = FINE_STRUCTURE.powi(4);
    let worst = thomson_prefactor(&zero_geom)
        .abs()
        .max((thomson_prefactor(&max_geom) - a4).abs() / a4);
    residual_check("Thomson polarization zeros and maxima", worst, 1e-12)
}

fn form_factor_check() -> CheckResult {
    let sigma = 0.8;
    let n = 41usize;
    let half = 5.0 * sigma;
    let step = 2.0 * half / (n - 1) as f64;
    let mut values = Vec::with_capacity(n * n * n);
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                let x = -half + ix as f64 * step;
                let y = -half + iy as f64 * step;
                let z = -half + iz as f64 * step;
                let r2 = x * x + y * y + z * z;
                values.push((-0.5 * r2 / (sigma * sigma)).exp());
            }
        }
    }
    let grid = DensityGrid::new(
        [n, n, n],
        [[step, 0.0, 0.0], [0.0, step, 0.0], [0.0, 0.0, step]],
        [-half, -half, -half],
        values,
    )
    .unwrap();
    let q0 = grid.total_charge();
    let mut worst = 0.0f64;
    for s in [[0.5, 0.0, 0.0], [0.3, -0.4, 0.2], [0.0, 0.9, 0.9]] {
        let got = match form_factor(&grid, s) {
            Ok(v) => v,
            Err(e) => return check("Gaussian form factor", false, format!("{e}")),
        };
        let s2 = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
        let want = q0 * (-0.5 * sigma * sigma * s2).exp();
        worst = worst
            .max((got.re - want).abs() / want)
            .max(got.im.abs() / want);
    }
    residual_check("Gaussian form factor", worst, 1e-4)
}

fn lattice_duality_check(r: &Resolved) -> CheckResult {
    let lat = &r.lat;
    let two_pi = 2.0 * std::f64::consts::PI;
    let pairs = [
        (lat.b1, lat.a1, two_pi),
        (lat.b1, lat.a2, 0.0),
        (lat.b2, lat.a1, 0.0),
        (lat.b2, lat.a2, two_pi),
    ];
    let mut worst = 0.0f64;
    for (b, a, want) in pairs {
        worst = worst.max((b[0] * a[0] + b[1] * a[1] - want).abs());
    }
    let cone = structure_factor(lat, lat.dirac_point()).norm();
    let passed = worst <= 1e-12 && cone <= 1e-9 && lat.bragg_vector(0, 0).is_err();
    check(
        "reciprocal lattice duality and cone location",
        passed,
        format!("duality residual {worst:.3e}, |f(K)| = {cone:.3e}"),
    )
}

fn band_gauge_check(r: &Resolved) -> CheckResult {
    let mut worst = 0.0f64;
    let mut ordered = true;
    for p in bz_grid(&r.lat, 7) {
        let state = eigensystem(&hamiltonian_k(&r.lat, r.t_hop, p), p);
        ordered &= state.eps(trdiff_core::graphene::Band::Valence)
            <= state.eps(trdiff_core::graphene::Band::Conduction);
        for b in [
            trdiff_core::graphene::Band::Valence,
            trdiff_core::graphene::Band::Conduction,
        ] {
            let v = state.evec(b);
            worst = worst.max(v[0].im.abs());
            if v[0].re < 0.0 {
                ordered = false;
            }
        }
    }
    check(
        "band ordering and eigenvector gauge",
        ordered && worst <= 1e-12,
        format!("gauge imaginary residue {worst:.3e}"),
    )
}

/// Shortened copy of the configured pump (a few carrier periods) for the
/// dynamical checks.
fn short_pulse(r: &Resolved) -> LaserPulse {
    let tau = (4.0 * r.pulse.period()).min(r.pulse.tau);
    LaserPulse::new(r.pulse.e0, r.pulse.omega, tau, r.pulse.pol).unwrap()
}

fn dynamics_conservation_check(r: &Resolved, pulse: &LaserPulse) -> CheckResult {
    let cfg = PropagatorConfig::new(r.prop.dt, r.prop.t2, pulse.tau);
    match propagate(&r.lat, r.t_hop, &bz_grid(&r.lat, 6), pulse, &cfg) {
        Ok(traj) => residual_check(
            "density matrix trace and hermiticity",
            traj.max_trace_dev.max(traj.max_herm_dev),
            1e-10,
        ),
        Err(e) => check(
            "density matrix trace and hermiticity",
            false,
            format!("{e}"),
        ),
    }
}

fn dynamics_unitarity_check(r: &Resolved, pulse: &LaserPulse) -> CheckResult {
    let cfg = PropagatorConfig::new(r.prop.dt.min(0.05), f64::INFINITY, pulse.tau);
    match propagate(&r.lat, r.t_hop, &bz_grid(&r.lat, 6), pulse, &cfg) {
        Ok(traj) => residual_check(
            "undamped spectrum pinned at {0, 1}",
            traj.max_spectral_drift(),
            1e-8,
        ),
        Err(e) => check("undamped spectrum pinned at {0, 1}", false, format!("{e}")),
    }
}

fn diffraction_checks(
    r: &Resolved,
    pulse: &LaserPulse,
    out: &mut Vec<CheckResult>,
) -> Result<(), CliError> {
    let to_num = |e: &dyn std::fmt::Display| CliError::Numerical(format!("validate: {e}"));
    let mut cfg = PropagatorConfig::new(r.prop.dt, r.prop.t2, pulse.tau);
    cfg.sample_stride = ((pulse.period() / 8.0 / cfg.dt).round() as usize).max(1);
    let momenta = bz_grid(&r.lat, 6);
    let traj = propagate(&r.lat, r.t_hop, &momenta, pulse, &cfg).map_err(|e| to_num(&e))?;
    let kern = ClosedFormKernel::new(&r.lat, r.t_hop, &r.orbital);
    let beam = &r.beam;

    // Axis-aligned selection rule, dual path.
    let special =
        intensity_x_spot(&traj, SpotSource::full(&kern), beam, [1, 1]).map_err(|e| to_num(&e))?;
    let general =
        general_kernel(&traj, SpotSource::full(&kern), beam, [1, 1]).map_err(|e| to_num(&e))?;
    let dd_max = special.i_dd.iter().cloned().fold(0.0, f64::max);
    let mut worst = 0.0f64;
    let mut exact_zero = true;
    for s in 0..special.times.len() {
        exact_zero &= special.i_dj[s] == 0.0 && special.i_jj[s] == 0.0;
        worst = worst
            .max(general.i_dj[s].abs() / dd_max)
            .max(general.i_jj[s].abs() / dd_max);
    }
    out.push(check(
        "x-aligned spot carries no current channels",
        exact_zero && worst < 1e-12,
        format!("general-path leakage {worst:.3e} of peak dd"),
    ));
    let mut dd_dev = 0.0f64;
    for s in 0..special.times.len() {
        dd_dev = dd_dev.max((special.i_dd[s] - general.i_dd[s]).abs() / dd_max);
    }
    out.push(residual_check(
        "dual-path dd agreement at x spot",
        dd_dev,
        1e-10,
    ));

    // Closure identity on the y-aligned spot.
    let ytr =
        intensity_y_spot(&traj, SpotSource::full(&kern), beam, [1, -1]).map_err(|e| to_num(&e))?;
    let closed =
        (0..ytr.times.len()).all(|s| ytr.i_total[s] == ytr.i_dd[s] + ytr.i_dj[s] + ytr.i_jj[s]);
    out.push(check(
        "channel closure I_total = I_dd + I_dj + I_jj",
        closed,
        format!("checked {} samples", ytr.times.len()),
    ));

    // Static target: no pump, constant traces.
    let quiet = LaserPulse::new(0.0, pulse.omega, pulse.tau, pulse.pol).unwrap();
    let still = propagate(&r.lat, r.t_hop, &momenta, &quiet, &cfg).map_err(|e| to_num(&e))?;
    let tr =
        general_kernel(&still, SpotSource::full(&kern), beam, [1, -1]).map_err(|e| to_num(&e))?;
    let mut drift = 0.0f64;
    for s in 1..tr.times.len() {
        drift = drift.max((tr.i_total[s] - tr.i_total[0]).abs() / tr.i_total[0].abs());
    }
    out.push(residual_check(
        "static target leaves traces constant",
        drift,
        1e-12,
    ));
    Ok(())
}

fn spectral_tone_check() -> CheckResult {
    let omega = 0.0569613;
    let span = 6.0 * 2.0 * std::f64::consts::PI / omega;
    let times: Vec<f64> = (0..400).map(|i| span * i as f64 / 399.0).collect();
    let values: Vec<f64> = times.iter().map(|&t| (2.0 * omega * t).cos()).collect();
    match spectral_content(&times, &values, omega) {
        Ok(sc) => check(
            "pure second harmonic isolated",
            sc.ratio < 0.05,
            format!("amp(w)/amp(2w) = {:.3e}", sc.ratio),
        ),
        Err(e) => check("pure second harmonic isolated", false, format!("{e}")),
    }
}

fn convolution_check() -> CheckResult {
    let times: Vec<f64> = (0..200).map(|i| 0.5 * i as f64).collect();
    let values: Vec<f64> = times.iter().map(|&t| 0.3 + (0.11 * t).sin()).collect();
    let same = match convolve_probe_envelope(&times, &values, 0.0) {
        Ok(v) => v,
        Err(e) => return check("probe envelope identity and dc gain", false, format!("{e}")),
    };
    let flat = vec![1.25; times.len()];
    let smoothed = match convolve_probe_envelope(&times, &flat, 30.0) {
        Ok(v) => v,
        Err(e) => return check("probe envelope identity and dc gain", false, format!("{e}")),
    };
    let mut worst = 0.0f64;
    for i in 0..times.len() {
        worst = worst.max((same[i] - values[i]).abs());
        worst = worst.max((smoothed[i] - 1.25).abs());
    }
    residual_check("probe envelope identity and dc gain", worst, 1e-12)
}

fn kinematics_check() -> CheckResult {
    let mev = match beam_kinematics(1.0e6) {
        Ok(k) => k,
        Err(e) => return check("beam kinematics", false, format!("{e}")),
    };
    let rest = beam_kinematics(0.0).unwrap();
    let worst = (mev.beta - 0.9411_f64).abs().max(rest.beta);
    residual_check("beam kinematics beta(1 MeV)", worst, 1e-4)
}

fn sample_momenta() -> [FourVector; 3] {
    [
        FourVector::on_shell(0.0, 0.0, 0.0),
        FourVector::on_shell(0.4, -0.1, 0.7),
        FourVector::on_shell(-2.0, 1.5, 0.3),
    ]
}
