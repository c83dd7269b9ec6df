//! Pipeline stages behind the CLI subcommands. Parallel maps collect into
//! index order and reduce pairwise downstream, so outputs are byte-identical
//! for any thread count.

use std::path::Path;

use rayon::prelude::*;

use trdiff_core::graphene::{
    bz_grid, eigensystem, hamiltonian_k, structure_factor, CellGrid, ClosedFormKernel, Vec2,
};
use trdiff_core::sbe::{
    assemble_trajectory, propagate_momentum, realspace_snapshot, DensityMatrixTrajectory,
    StageTable,
};
use trdiff_core::signal::{spectral_content, DiffractionTrace, SpotEvaluator, SpotSource};

use crate::config::{CliError, Resolved};
use crate::output;
use crate::units;

fn num_err(module: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(format!("{module}: {e}"))
}

/// Thread pool honoring `--threads` / `TRDIFF_THREADS`; 0 picks the rayon
/// default.
pub fn build_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))
}

/// Propagates the density matrix over the configured Brillouin-zone grid,
/// parallel over momenta.
pub fn propagate_trajectory(r: &Resolved) -> Result<DensityMatrixTrajectory, CliError> {
    let stages = StageTable::new(&r.pulse, &r.prop).map_err(|e| num_err("propagation", e))?;
    let momenta = bz_grid(&r.lat, r.config.grid.nk);
    let parts = momenta
        .par_iter()
        .enumerate()
        .map(|(i, &p)| propagate_momentum(&r.lat, r.t_hop, i, p, &stages))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| num_err("propagation", e))?;
    assemble_trajectory(&stages, &momenta, &parts).map_err(|e| num_err("propagation", e))
}

/// Channel-decomposed trace at one spot, parallel over stored samples.
pub fn diffraction_trace(
    r: &Resolved,
    kern: &ClosedFormKernel,
    traj: &DensityMatrixTrajectory,
    spot: [i32; 2],
) -> Result<DiffractionTrace, CliError> {
    let ev = SpotEvaluator::general(SpotSource::full(kern), &r.beam, spot)
        .map_err(|e| num_err("diffraction", e))?;
    let samples = (0..traj.num_samples())
        .into_par_iter()
        .map(|s| ev.sample(traj, s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| num_err("diffraction", e))?;
    DiffractionTrace::from_samples(&traj.times, spot, &samples)
        .map_err(|e| num_err("diffraction", e))
}

pub fn diffraction_traces(
    r: &Resolved,
    traj: &DensityMatrixTrajectory,
) -> Result<Vec<DiffractionTrace>, CliError> {
    let kern = ClosedFormKernel::new(&r.lat, r.t_hop, &r.orbital);
    r.spots
        .iter()
        .map(|&spot| diffraction_trace(r, &kern, traj, spot))
        .collect()
}

/// Rows (s, kx, ky, e_valence_eV, e_conduction_eV) along Gamma-K-M-Gamma.
pub fn band_rows(r: &Resolved, per_leg: usize) -> Vec<Vec<f64>> {
    let lat = &r.lat;
    let gamma = [0.0, 0.0];
    let kpt = lat.dirac_point();
    // The M point adjacent to K is the half reciprocal vector nearest it.
    let mut mpt = [0.5 * lat.b1[0], 0.5 * lat.b1[1]];
    for cand in [
        [0.5 * lat.b2[0], 0.5 * lat.b2[1]],
        [0.5 * (lat.b1[0] + lat.b2[0]), 0.5 * (lat.b1[1] + lat.b2[1])],
    ] {
        if dist(cand, kpt) < dist(mpt, kpt) {
            mpt = cand;
        }
    }

    let mut rows = Vec::new();
    let mut s_acc = 0.0;
    let legs = [(gamma, kpt), (kpt, mpt), (mpt, gamma)];
    for (leg_idx, &(from, to)) in legs.iter().enumerate() {
        let len = dist(from, to);
        // Skip the duplicate joint point on every leg after the first.
        let start = if leg_idx == 0 { 0 } else { 1 };
        for i in start..=per_leg {
            let f = i as f64 / per_leg as f64;
            let k = [
                from[0] + f * (to[0] - from[0]),
                from[1] + f * (to[1] - from[1]),
            ];
            let eps = r.t_hop.abs() * structure_factor(lat, k).norm();
            rows.push(vec![
                s_acc + f * len,
                k[0],
                k[1],
                units::au_to_ev(-eps),
                units::au_to_ev(eps),
            ]);
        }
        s_acc += len;
    }
    rows
}

fn dist(a: Vec2, b: Vec2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn cmd_bands(r: &Resolved, dir: &Path) -> Result<(), CliError> {
    let rows = band_rows(r, 120);
    output::write_table(
        &dir.join("bands.csv"),
        &r.config_hash,
        &["s_au", "kx_au", "ky_au", "e_valence_eV", "e_conduction_eV"],
        &rows,
    )
}

pub fn cmd_propagate(r: &Resolved, dir: &Path) -> Result<(), CliError> {
    let traj = propagate_trajectory(r)?;
    let population = traj.conduction_population();
    let rows: Vec<Vec<f64>> = traj
        .times
        .iter()
        .zip(&population)
        .map(|(&t, &n)| vec![units::au_to_fs(t), n])
        .collect();
    output::write_table(
        &dir.join("population.csv"),
        &r.config_hash,
        &["t_fs", "N_c"],
        &rows,
    )?;

    let grid = CellGrid::new(&r.lat, r.config.grid.cell_grid_n, r.config.grid.halo)
        .map_err(|e| num_err("snapshot", e))?;
    for &t in &r.snapshot_times_au {
        let snap = realspace_snapshot(&traj, t, &r.lat, r.t_hop, &r.orbital, &grid)
            .map_err(|e| num_err("snapshot", e))?;
        let rows: Vec<Vec<f64>> = (0..grid.num_points())
            .map(|i| {
                let p = grid.position(i);
                vec![p[0], p[1], snap.d_rho[i], snap.jx[i], snap.jy[i]]
            })
            .collect();
        let label = format!("{:.3}", units::au_to_fs(snap.time));
        output::write_table(
            &dir.join(format!("snapshot_{label}fs.csv")),
            &r.config_hash,
            &["x_au", "y_au", "d_rho", "jx", "jy"],
            &rows,
        )?;
    }
    Ok(())
}

pub fn cmd_diffract(r: &Resolved, dir: &Path) -> Result<Vec<DiffractionTrace>, CliError> {
    let traj = propagate_trajectory(r)?;
    let traces = diffraction_traces(r, &traj)?;
    for trace in &traces {
        let rows: Vec<Vec<f64>> = (0..trace.times.len())
            .map(|s| {
                vec![
                    units::au_to_fs(trace.times[s]),
                    trace.i_dd[s],
                    trace.i_dj[s],
                    trace.i_jj[s],
                    trace.i_total[s],
                ]
            })
            .collect();
        output::write_table(
            &dir.join(format!(
                "diffraction_{}.csv",
                output::spot_label(trace.spot)
            )),
            &r.config_hash,
            &["t_fs", "I_dd", "I_dj", "I_jj", "I_total"],
            &rows,
        )?;
    }
    Ok(traces)
}

pub fn cmd_spectrum(r: &Resolved, dir: &Path) -> Result<(), CliError> {
    let traj = propagate_trajectory(r)?;
    let traces = diffraction_traces(r, &traj)?;
    for trace in &traces {
        let channels: [(&str, &Vec<f64>); 4] = [
            ("I_dd", &trace.i_dd),
            ("I_dj", &trace.i_dj),
            ("I_jj", &trace.i_jj),
            ("I_total", &trace.i_total),
        ];
        let mut rows = Vec::new();
        for (name, values) in channels {
            let sc = spectral_content(&trace.times, values, r.pulse.omega)
                .map_err(|e| num_err("spectrum", e))?;
            rows.push((
                name.to_string(),
                vec![sc.amp_fundamental, sc.amp_second, sc.ratio],
            ));
        }
        output::write_labeled_table(
            &dir.join(format!("spectrum_{}.csv", output::spot_label(trace.spot))),
            &r.config_hash,
            &["channel", "amp_omega", "amp_2omega", "ratio"],
            &rows,
        )?;
    }
    Ok(())
}

/// Valence and conduction energies at one momentum; used by the validation
/// suite's gauge checks.
pub fn band_energies(r: &Resolved, k: Vec2) -> [f64; 2] {
    let state = eigensystem(&hamiltonian_k(&r.lat, r.t_hop, k), k);
    [
        state.eps(trdiff_core::graphene::Band::Valence),
        state.eps(trdiff_core::graphene::Band::Conduction),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn small_resolved() -> Resolved {
        let cfg = RunConfig::from_json(
            r#"{
                "grid": {"nk": 6, "cell_grid_n": 8},
                "pump": {"tau_fs": 4.0},
                "propagation": {"dt_au": 0.4}
            }"#,
        )
        .unwrap();
        Resolved::new(cfg).unwrap()
    }

    #[test]
    fn band_path_touches_the_cone_and_saddle() {
        let r = small_resolved();
        let rows = band_rows(&r, 60);
        // Dirac point: gap closes at the end of the first leg.
        let joint = &rows[60];
        assert!(
            joint[4] - joint[3] < 1e-9,
            "gap at K {}",
            joint[4] - joint[3]
        );
        // Gamma: full bandwidth 2 * 3t on both ends.
        let t_ev = units::au_to_ev(r.t_hop);
        assert!((rows[0][4] - 3.0 * t_ev).abs() < 1e-9);
        assert!((rows.last().unwrap()[4] - 3.0 * t_ev).abs() < 1e-9);
        // Saddle point M: energy t.
        let m = &rows[120];
        assert!((m[4] - t_ev).abs() < 1e-9, "M energy {}", m[4]);
        // Arc length increases monotonically.
        for w in rows.windows(2) {
            assert!(w[1][0] > w[0][0]);
        }
    }

    #[test]
    fn trajectory_is_thread_count_invariant() {
        let r = small_resolved();
        let t1 = build_pool(1)
            .unwrap()
            .install(|| propagate_trajectory(&r))
            .unwrap();
        let t4 = build_pool(4)
            .unwrap()
            .install(|| propagate_trajectory(&r))
            .unwrap();
        let p1 = t1.conduction_population();
        let p4 = t4.conduction_population();
        assert_eq!(p1.len(), p4.len());
        for (a, b) in p1.iter().zip(&p4) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(*p1.last().unwrap() > 0.0);
    }
}
