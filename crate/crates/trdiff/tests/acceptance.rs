//! Exit-gate suite: each test certifies one user-facing guarantee of the
//! stack, from the algebra kernels up through the CLI, and prints a single
//! summary line. The driven-lattice tests share one desk-scale trajectory
//! (48x48 momentum grid, dt = 0.1 au, full 21 fs pump).

use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use trdiff::config::{Resolved, RunConfig};
use trdiff::drivers;
use trdiff_core::dirac::{
    contraction_small_q_limit, contraction_sum, dirac_spinor, spin_sum_projector, spinor_bilinear,
    FourVector, GammaSet, SPINS,
};
use trdiff_core::fock::{
    anticommutator_check, commutator_check, xray_transition_element, ModeBasis, Statistics,
};
use trdiff_core::graphene::{bz_grid, ClosedFormKernel};
use trdiff_core::sbe::{propagate, DensityMatrixTrajectory};
use trdiff_core::signal::{
    beam_kinematics, general_kernel, intensity_x_spot, intensity_y_spot, kinetic_for_beta,
    spectral_content, BeamConfig, DiffractionTrace, SpotSource,
};
use trdiff_core::xsec::{
    form_factor, rutherford_prefactor, thomson_prefactor, DensityGrid, ProbeGeometry,
};
use trdiff_core::{Complex64, FINE_STRUCTURE};

fn report(what: &str, detail: String) {
    println!("PASS {what} - {detail}");
}

fn default_resolved() -> Resolved {
    Resolved::new(RunConfig::from_json("{}").unwrap()).unwrap()
}

/// One full-pulse propagation at desk scale, shared by the diffraction
/// tests. Built on first use.
fn desk() -> &'static (Resolved, DensityMatrixTrajectory) {
    static CELL: OnceLock<(Resolved, DensityMatrixTrajectory)> = OnceLock::new();
    CELL.get_or_init(|| {
        let r = default_resolved();
        let traj = drivers::propagate_trajectory(&r).expect("desk-scale propagation");
        (r, traj)
    })
}

fn desk_trace(spot: [i32; 2]) -> DiffractionTrace {
    let (r, traj) = desk();
    let kern = ClosedFormKernel::new(&r.lat, r.t_hop, &r.orbital);
    general_kernel(traj, SpotSource::full(&kern), &r.beam, spot).unwrap()
}

/// Trace at the spot whose Bragg vector lies along y, shared by the
/// harmonic-content and channel-ordering tests.
fn antisymmetric_trace() -> &'static DiffractionTrace {
    static CELL: OnceLock<DiffractionTrace> = OnceLock::new();
    CELL.get_or_init(|| desk_trace([1, -1]))
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Least-squares slope of ln(y) against ln(x).
fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

#[test]
fn algebra_identities_hold_within_a_second() {
    let t0 = Instant::now();
    let gs = GammaSet::new();
    let mut worst = gs.anticommutation_residual().max(gs.hermiticity_residual());

    let momenta = [
        FourVector::on_shell(0.3, -0.7, 1.1),
        FourVector::on_shell(-1.2, 0.4, 0.9),
        FourVector::on_shell(2.0, 1.5, -0.6),
    ];
    for k in &momenta {
        // ubar_(s2) g^nu u_(s1) = 2 k^nu delta_(s2 s1), and the spin sum
        // closes onto kslash + identity.
        for nu in 0..4 {
            for s2 in SPINS {
                for s1 in SPINS {
                    let got = spinor_bilinear(&gs, k, s2, nu, k, s1).unwrap();
                    let want = if s1 == s2 { 2.0 * k.component(nu) } else { 0.0 };
                    worst = worst.max((got.re - want).abs()).max(got.im.abs());
                }
            }
        }
        let proj = spin_sum_projector(&gs, k).unwrap();
        let slash = gs.slash(k);
        for i in 0..4 {
            for j in 0..4 {
                let eye = if i == j { 1.0 } else { 0.0 };
                let want = slash[i][j] + Complex64::new(eye, 0.0);
                worst = worst.max((proj[i][j] - want).norm());
            }
        }
        // Spinor normalization u+ u = 2 E.
        for s in SPINS {
            let u = dirac_spinor(k, s).unwrap();
            let norm: f64 = u.components.iter().map(|c| c.norm_sqr()).sum();
            worst = worst.max((norm - 2.0 * k.component(0)).abs());
        }
    }
    assert!(worst <= 1e-12, "identity residual {worst:.3e}");

    // Zero momentum transfer collapses the spin-summed contraction onto
    // 4 k^nu k^alpha delta; the deviation must then grow linearly in |Q|.
    let k_in = FourVector::on_shell(0.9, -0.4, 1.3);
    let mut q0_worst = 0.0f64;
    for nu in 0..4 {
        for alpha in 0..4 {
            for s1 in SPINS {
                for s2 in SPINS {
                    let got = contraction_sum(&gs, &k_in, s1, s2, &k_in, nu, alpha).unwrap();
                    let want = contraction_small_q_limit(&k_in, s1, s2, nu, alpha);
                    q0_worst = q0_worst.max((got - want).norm());
                }
            }
        }
    }
    let scale = 4.0 * k_in.component(0) * k_in.component(0);
    assert!(
        q0_worst <= 1e-12 * scale,
        "zero-transfer residual {q0_worst:.3e}"
    );

    let (kx, ky, kz) = (0.9, -0.4, 1.3);
    let angles: [f64; 3] = [1e-2, 1e-3, 1e-4];
    let deviations: Vec<f64> = angles
        .iter()
        .map(|&phi| {
            // Rotate the spatial momentum so the energy is untouched and
            // |Q| is proportional to the angle.
            let k_s = FourVector::on_shell(
                kx * phi.cos() - ky * phi.sin(),
                kx * phi.sin() + ky * phi.cos(),
                kz,
            );
            let mut dev = 0.0f64;
            for nu in 0..4 {
                for alpha in 0..4 {
                    let got =
                        contraction_sum(&gs, &k_in, SPINS[0], SPINS[0], &k_s, nu, alpha).unwrap();
                    let want = contraction_small_q_limit(&k_in, SPINS[0], SPINS[0], nu, alpha);
                    dev = dev.max((got - want).norm());
                }
            }
            dev
        })
        .collect();
    let slope = log_log_slope(&angles, &deviations);
    assert!(
        (slope - 1.0).abs() <= 0.1,
        "deviation slope {slope:.4} not linear in |Q|"
    );

    let elapsed = t0.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    report(
        "gamma and spinor identities",
        format!("residual {worst:.3e}, small-transfer slope {slope:.4}, {elapsed:?}"),
    );
}

#[test]
fn ladder_operator_identities_hold_within_a_second() {
    let t0 = Instant::now();

    let bosons = ModeBasis::new(3, 4, Statistics::Boson).unwrap();
    let comm = commutator_check(&bosons).unwrap();
    assert!(
        comm.interior <= 1e-12,
        "bosonic commutator residual {:.3e}",
        comm.interior
    );

    let fermions = ModeBasis::new(5, 1, Statistics::Fermion).unwrap();
    let anti = anticommutator_check(&fermions).unwrap();
    assert!(anti.mixed <= 1e-12, "mixed residual {:.3e}", anti.mixed);
    assert!(anti.pair <= 1e-12, "pair residual {:.3e}", anti.pair);

    // Counting element <n-1, 1_s| a a+_s + a+_s a |n> = 2 sqrt(n).
    let photons = ModeBasis::new(2, 6, Statistics::Boson).unwrap();
    let mut worst = 0.0f64;
    for n in 1..=5 {
        let got = xray_transition_element(&photons, n).unwrap();
        worst = worst.max((got - 2.0 * (n as f64).sqrt()).abs());
    }
    assert!(worst <= 1e-12, "counting element residual {worst:.3e}");

    let elapsed = t0.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    report(
        "ladder operator identities",
        format!(
            "commutators {:.3e}/{:.3e}, counting {worst:.3e}, {elapsed:?}",
            comm.interior, anti.mixed
        ),
    );
}

#[test]
fn stationary_cross_sections_match_closed_forms() {
    // 1000 random energy/angle pairs against 4/|dk|^4.
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let energy = 10f64.powf(rng.gen_range(-1.0..2.0));
        let theta = rng.gen_range(1e-3..std::f64::consts::PI - 1e-3);
        let k = (2.0 * energy).sqrt();
        let dk = 2.0 * k * (0.5 * theta).sin();
        let want = 4.0 / dk.powi(4);
        let got = rutherford_prefactor(energy, theta).unwrap();
        worst = worst.max((got - want).abs() / want);
    }
    assert!(worst <= 1e-12, "Rutherford residual {worst:.3e}");

    // Scattering along the incident polarization is blocked; transverse
    // polarization gives the full alpha^4 strength.
    let blocked =
        ProbeGeometry::new([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], 1.0, [1.0, 0.0, 0.0]).unwrap();
    let open = ProbeGeometry::new([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], 1.0, [0.0, 1.0, 0.0]).unwrap();
    let a4 = FINE_STRUCTURE.powi(4);
    let thomson_res = thomson_prefactor(&blocked)
        .abs()
        .max((thomson_prefactor(&open) - a4).abs() / a4);
    assert!(thomson_res <= 1e-12, "Thomson residual {thomson_res:.3e}");

    // Sampled Gaussian cloud against its analytic transform.
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
                values.push((-0.5 * (x * x + y * y + z * z) / (sigma * sigma)).exp());
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
    let mut ff_res = 0.0f64;
    for s in [[0.5, 0.0, 0.0], [0.3, -0.4, 0.2], [0.0, 0.9, 0.9]] {
        let got = form_factor(&grid, s).unwrap();
        let s2 = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
        let want = q0 * (-0.5 * sigma * sigma * s2).exp();
        ff_res = ff_res
            .max((got.re - want).abs() / want)
            .max(got.im.abs() / want);
    }
    assert!(ff_res <= 1e-4, "form-factor residual {ff_res:.3e}");

    report(
        "stationary cross sections",
        format!("Rutherford {worst:.3e}, Thomson {thomson_res:.3e}, form factor {ff_res:.3e}"),
    );
}

#[test]
fn driven_density_matrix_conserves_its_invariants() {
    let r = default_resolved();

    // Full-strength pump over the whole pulse.
    let traj = propagate(&r.lat, r.t_hop, &bz_grid(&r.lat, 12), &r.pulse, &r.prop).unwrap();
    assert!(
        traj.max_trace_dev <= 1e-10 && traj.max_herm_dev <= 1e-10,
        "trace {:.3e}, hermiticity {:.3e}",
        traj.max_trace_dev,
        traj.max_herm_dev
    );

    // Undamped evolution is unitary per momentum: occupation eigenvalues
    // stay pinned at {0, 1}.
    let mut undamped = r.prop;
    undamped.dt = 0.05;
    undamped.t2 = f64::INFINITY;
    let free = propagate(&r.lat, r.t_hop, &bz_grid(&r.lat, 6), &r.pulse, &undamped).unwrap();
    let drift = free.max_spectral_drift();
    assert!(drift <= 1e-8, "eigenvalue drift {drift:.3e}");

    // Weak pumps populate the conduction band in proportion to E0^2.
    // Fields must sit deep in the perturbative regime (around E0/50);
    // at E0/10 the next Rabi order already skews the ratio by ~15%.
    let momenta = bz_grid(&r.lat, 6);
    let final_population = |scale: f64| -> f64 {
        let mut pulse = r.pulse;
        pulse.e0 = scale * r.pulse.e0;
        let t = propagate(&r.lat, r.t_hop, &momenta, &pulse, &r.prop).unwrap();
        *t.conduction_population().last().unwrap()
    };
    let ratio = final_population(0.02) / final_population(0.01);
    assert!(
        (ratio / 4.0 - 1.0).abs() <= 0.1,
        "population ratio {ratio:.4} for a field ratio of 2"
    );

    report(
        "driven density matrix invariants",
        format!(
            "trace {:.3e}, hermiticity {:.3e}, eigenvalue drift {drift:.3e}, E0^2 ratio {ratio:.4}",
            traj.max_trace_dev, traj.max_herm_dev
        ),
    );
}

#[test]
fn aligned_spot_rejects_current_channels_on_both_paths() {
    let (r, traj) = desk();
    let kern = ClosedFormKernel::new(&r.lat, r.t_hop, &r.orbital);

    let fast = intensity_x_spot(traj, SpotSource::full(&kern), &r.beam, [1, 1]).unwrap();
    let full = general_kernel(traj, SpotSource::full(&kern), &r.beam, [1, 1]).unwrap();

    let dd_max = max_abs(&fast.i_dd).max(max_abs(&full.i_dd));
    let leak = max_abs(&fast.i_dj)
        .max(max_abs(&fast.i_jj))
        .max(max_abs(&full.i_dj))
        .max(max_abs(&full.i_jj));
    assert!(
        leak < 1e-12 * dd_max,
        "current leakage {leak:.3e} against peak dd {dd_max:.3e}"
    );

    let mut agree = 0.0f64;
    for (a, b) in fast.i_dd.iter().zip(&full.i_dd) {
        agree = agree.max((a - b).abs());
    }
    for (a, b) in fast.i_total.iter().zip(&full.i_total) {
        agree = agree.max((a - b).abs());
    }
    let rel = agree / dd_max;
    assert!(rel <= 1e-10, "evaluator disagreement {rel:.3e}");

    report(
        "aligned spot selection rule",
        format!("leakage {leak:.3e} of dd peak {dd_max:.3e}, dual-path agreement {rel:.3e}"),
    );
}

#[test]
fn antisymmetric_spot_oscillates_at_the_expected_harmonics() {
    let (r, _) = desk();
    let trace = antisymmetric_trace();

    let dd = spectral_content(&trace.times, &trace.i_dd, r.pulse.omega).unwrap();
    let dj = spectral_content(&trace.times, &trace.i_dj, r.pulse.omega).unwrap();

    let dd_ratio = dd.amp_second / dd.amp_fundamental;
    assert!(
        dd_ratio > 3.0,
        "dd second/fundamental = {dd_ratio:.3} (amps {:.3e}/{:.3e})",
        dd.amp_second,
        dd.amp_fundamental
    );
    assert!(
        dj.ratio > 3.0,
        "dj fundamental/second = {:.3} (amps {:.3e}/{:.3e})",
        dj.ratio,
        dj.amp_fundamental,
        dj.amp_second
    );

    report(
        "harmonic content at the antisymmetric spot",
        format!("dd at 2w by {dd_ratio:.2}x, dj at w by {:.2}x", dj.ratio),
    );
}

/// Peak-to-peak of the residual once a centered one-period moving average
/// is removed, separating carrier-frequency oscillation from any slow drift.
fn oscillation_swing(times: &[f64], values: &[f64], period: f64) -> f64 {
    let dt = times[1] - times[0];
    let half = ((period / dt / 2.0).round() as usize).max(1);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in half..values.len().saturating_sub(half) {
        let window = &values[i - half..=i + half];
        let avg = window.iter().sum::<f64>() / window.len() as f64;
        lo = lo.min(values[i] - avg);
        hi = hi.max(values[i] - avg);
    }
    hi - lo
}

#[test]
fn current_coupling_dominates_the_time_variation() {
    let (r, _) = desk();
    let trace = antisymmetric_trace();
    let dd = DiffractionTrace::peak_to_peak(&trace.i_dd);
    let dj = DiffractionTrace::peak_to_peak(&trace.i_dj);
    let jj = DiffractionTrace::peak_to_peak(&trace.i_jj);

    // Diagnostics for the failure message: the dd trace mixes a one-way
    // step from net valence-to-conduction transfer (its size tracks the
    // bond-charge contrast, hence the orbital width) with a carrier-locked
    // oscillation. The step and the residual oscillation are reported
    // separately so the two effects can be told apart.
    let step = trace.i_dd.last().unwrap() - trace.i_dd.first().unwrap();
    let dd_osc = oscillation_swing(&trace.times, &trace.i_dd, r.pulse.period());
    let dj_osc = oscillation_swing(&trace.times, &trace.i_dj, r.pulse.period());

    assert!(
        dj > dd,
        "dj swing {dj:.3e} should exceed dd swing {dd:.3e} \
         (dd carries a one-way population step of {step:+.3e}; \
         residual oscillations order dj {dj_osc:.3e} over dd {dd_osc:.3e})"
    );
    assert!(jj < dd && jj < dj, "jj swing {jj:.3e} should be smallest");

    report(
        "channel ordering at the antisymmetric spot",
        format!("swings dj {dj:.3e} > dd {dd:.3e} > jj {jj:.3e}"),
    );
}

#[test]
fn channel_strengths_scale_with_probe_velocity() {
    let (r, traj) = desk();
    let kern = ClosedFormKernel::new(&r.lat, r.t_hop, &r.orbital);

    // Same frozen density-matrix table, swept over probe speed.
    let betas = [0.1, 0.2, 0.4, 0.8];
    let mut dj = Vec::new();
    let mut jj = Vec::new();
    for &beta in &betas {
        let beam = BeamConfig::electron_rel_45(kinetic_for_beta(beta).unwrap());
        let t = intensity_y_spot(traj, SpotSource::full(&kern), &beam, [1, -1]).unwrap();
        dj.push(DiffractionTrace::peak_to_peak(&t.i_dj));
        jj.push(DiffractionTrace::peak_to_peak(&t.i_jj));
    }
    let dj_slope = log_log_slope(&betas, &dj);
    let jj_slope = log_log_slope(&betas, &jj);
    assert!(
        (dj_slope - 1.0).abs() <= 1e-6,
        "dj slope {dj_slope:.9} should be 1"
    );
    assert!(
        (jj_slope - 2.0).abs() <= 1e-6,
        "jj slope {jj_slope:.9} should be 2"
    );

    let beta_mev = beam_kinematics(1e6).unwrap().beta;
    assert!(
        (beta_mev - 0.9411).abs() <= 1e-4,
        "beta(1 MeV) = {beta_mev:.6}"
    );

    report(
        "probe velocity scaling",
        format!("dj slope {dj_slope:.9}, jj slope {jj_slope:.9}, beta(1 MeV) {beta_mev:.6}"),
    );
}

#[test]
fn runs_are_deterministic_and_converged() {
    // Byte-level determinism of the CLI across worker counts.
    let body = r#"{
        "pump": {"tau_fs": 8.0},
        "grid": {"nk": 12, "cell_grid_n": 20},
        "propagation": {"dt_au": 0.2},
        "snapshot_times_fs": [4.0],
        "output_dir": "out"
    }"#;
    let dirs: Vec<_> = ["1", "3"]
        .iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            fs::write(dir.path().join("run.json"), body).unwrap();
            for cmd in ["propagate", "diffract"] {
                let out = Command::new(env!("CARGO_BIN_EXE_trdiff"))
                    .args([cmd, "--config", "run.json", "--threads", threads])
                    .current_dir(dir.path())
                    .env_remove("TRDIFF_THREADS")
                    .output()
                    .unwrap();
                assert!(
                    out.status.success(),
                    "{cmd}: {}",
                    String::from_utf8_lossy(&out.stderr)
                );
            }
            dir
        })
        .collect();
    let read_all = |dir: &Path| -> Vec<(String, Vec<u8>)> {
        let mut entries: Vec<_> = fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().into_string().unwrap(),
                    fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        entries.sort();
        entries
    };
    let one = read_all(&dirs[0].path().join("out"));
    let three = read_all(&dirs[1].path().join("out"));
    assert!(one.len() >= 4, "expected population, snapshot, and traces");
    assert_eq!(one, three, "outputs differ between 1 and 3 workers");

    // Halving the time step leaves the final conduction population
    // unchanged at the integrator's convergence floor.
    let r = default_resolved();
    let momenta = bz_grid(&r.lat, 12);
    let coarse = propagate(&r.lat, r.t_hop, &momenta, &r.pulse, &r.prop).unwrap();
    let mut halved = r.prop;
    halved.dt = 0.5 * r.prop.dt;
    halved.sample_stride = 2 * r.prop.sample_stride;
    let fine = propagate(&r.lat, r.t_hop, &momenta, &r.pulse, &halved).unwrap();
    let nc_coarse = *coarse.conduction_population().last().unwrap();
    let nc_fine = *fine.conduction_population().last().unwrap();
    let dt_shift = (nc_coarse - nc_fine).abs() / nc_fine;
    assert!(dt_shift < 1e-6, "dt halving moved N_c by {dt_shift:.3e}");

    // Doubling the momentum grid moves the same observable by little.
    let (_, desk_traj) = desk();
    let nc_48 = *desk_traj.conduction_population().last().unwrap();
    let dense = Resolved::new(RunConfig::from_json(r#"{"grid": {"nk": 96}}"#).unwrap()).unwrap();
    let traj_96 = drivers::propagate_trajectory(&dense).unwrap();
    let nc_96 = *traj_96.conduction_population().last().unwrap();
    let grid_shift = (nc_96 - nc_48).abs() / nc_48;
    assert!(
        grid_shift < 0.02,
        "grid refinement moved N_c by {grid_shift:.3e}"
    );

    report(
        "determinism and convergence",
        format!(
            "{} files byte-identical, dt shift {dt_shift:.3e}, grid shift {grid_shift:.3e}",
            one.len()
        ),
    );
}
