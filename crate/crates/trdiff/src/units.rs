//! Conversions between Hartree atomic units and the lab units used in
//! configuration files and output columns (CODATA 2018 values).

/// eV per Hartree.
pub const HARTREE_EV: f64 = 27.211386245988;
/// Femtoseconds per atomic time unit.
pub const AU_TIME_FS: f64 = 0.024188843265857;
/// V/nm per atomic field unit.
pub const AU_FIELD_V_PER_NM: f64 = 514.220674763;
/// Angstrom per Bohr radius.
pub const BOHR_ANGSTROM: f64 = 0.529177210903;

pub fn ev_to_au(e: f64) -> f64 {
    e / HARTREE_EV
}

pub fn au_to_ev(e: f64) -> f64 {
    e * HARTREE_EV
}

pub fn fs_to_au(t: f64) -> f64 {
    t / AU_TIME_FS
}

pub fn au_to_fs(t: f64) -> f64 {
    t * AU_TIME_FS
}

pub fn v_per_nm_to_au(f: f64) -> f64 {
    f / AU_FIELD_V_PER_NM
}

pub fn au_to_v_per_nm(f: f64) -> f64 {
    f * AU_FIELD_V_PER_NM
}

pub fn angstrom_to_au(l: f64) -> f64 {
    l / BOHR_ANGSTROM
}

pub fn au_to_angstrom(l: f64) -> f64 {
    l * BOHR_ANGSTROM
}

/// Largest relative round-trip deviation over the four conversion pairs at
/// a probe value; used by the validation suite.
pub fn round_trip_residual() -> f64 {
    let probes = [1.0, 2.5, 21.0, 1.55e6, 4.6487e-3];
    let mut worst = 0.0f64;
    for &x in &probes {
        for (fwd, back) in [
            (ev_to_au as fn(f64) -> f64, au_to_ev as fn(f64) -> f64),
            (fs_to_au, au_to_fs),
            (v_per_nm_to_au, au_to_v_per_nm),
            (angstrom_to_au, au_to_angstrom),
        ] {
            worst = worst.max((back(fwd(x)) - x).abs() / x.abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_are_tight() {
        assert!(round_trip_residual() < 1e-12);
    }

    #[test]
    fn headline_parameter_conversions() {
        assert!((v_per_nm_to_au(2.5) - 4.8617e-3).abs() < 1e-7);
        assert!((ev_to_au(1.55) - 0.0569613).abs() < 1e-6);
        assert!((fs_to_au(21.0) - 868.17).abs() < 0.01);
        assert!((angstrom_to_au(2.46) - 4.6487).abs() < 1e-4);
        assert!((ev_to_au(2.7) - 0.09922).abs() < 1e-5);
    }
}
