//! Run configuration: JSON schema, defaults, validation, and resolution
//! into core model objects.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use trdiff_core::graphene::{GaussianOrbital, Lattice};
use trdiff_core::sbe::{LaserPulse, PropagatorConfig};
use trdiff_core::signal::{BeamConfig, Probe};

use crate::units;

/// Errors carry an exit-code class: configuration problems (1), numerical
/// failures during a run (2), validation-suite failures (3).
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Validation { failed: usize },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            CliError::Validation { failed } => {
                write!(f, "validation failed: {failed} check(s) did not pass")
            }
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Validation { .. } => 3,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    pub a_angstrom: f64,
    #[serde(rename = "t_hop_eV")]
    pub t_hop_ev: f64,
    pub orbital_width_au: f64,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection {
            a_angstrom: 2.46,
            t_hop_ev: 2.7,
            orbital_width_au: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpSection {
    #[serde(rename = "E0_V_per_nm")]
    pub e0_v_per_nm: f64,
    #[serde(rename = "photon_eV")]
    pub photon_ev: f64,
    pub tau_fs: f64,
    /// In-plane polarization unit vector.
    pub pol: [f64; 2],
}

impl Default for PumpSection {
    fn default() -> Self {
        PumpSection {
            e0_v_per_nm: 2.5,
            photon_ev: 1.55,
            tau_fs: 21.0,
            pol: [1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Brillouin-zone sampling is nk x nk.
    pub nk: usize,
    /// Real-space snapshot grid is cell_grid_n x cell_grid_n per cell.
    pub cell_grid_n: usize,
    /// Rings of neighbor cells summed into snapshot orbitals.
    pub halo: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            nk: 48,
            cell_grid_n: 48,
            halo: 2,
        }
    }
}

/// Dephasing time: a number in fs, or the string "inf" for none.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Dephasing {
    FiniteFs(f64),
    Named(String),
}

impl Dephasing {
    pub fn to_au(&self) -> Result<f64, CliError> {
        match self {
            Dephasing::FiniteFs(v) => {
                if *v > 0.0 && v.is_finite() {
                    Ok(units::fs_to_au(*v))
                } else {
                    Err(config_err(format!(
                        "propagation.T2_fs must be positive or \"inf\" (got {v})"
                    )))
                }
            }
            Dephasing::Named(s) if s == "inf" => Ok(f64::INFINITY),
            Dephasing::Named(s) => Err(config_err(format!(
                "propagation.T2_fs must be a number or \"inf\" (got \"{s}\")"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationSection {
    pub dt_au: f64,
    #[serde(rename = "T2_fs")]
    pub t2_fs: Dephasing,
}

impl Default for PropagationSection {
    fn default() -> Self {
        PropagationSection {
            dt_au: 0.1,
            t2_fs: Dephasing::FiniteFs(10.0),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Xray,
    ElectronNonrel,
    ElectronRel,
}

impl From<ProbeKind> for Probe {
    fn from(value: ProbeKind) -> Self {
        match value {
            ProbeKind::Xray => Probe::Xray,
            ProbeKind::ElectronNonrel => Probe::ElectronNonrel,
            ProbeKind::ElectronRel => Probe::ElectronRel,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamSection {
    #[serde(rename = "kinetic_eV")]
    pub kinetic_ev: f64,
    /// Polar angle from the target normal; the beam lies in the xz-plane
    /// with its in-plane projection along +x.
    pub incidence_deg: f64,
    pub probe: ProbeKind,
}

impl Default for BeamSection {
    fn default() -> Self {
        BeamSection {
            kinetic_ev: 1.0e6,
            incidence_deg: 45.0,
            probe: ProbeKind::ElectronRel,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub lattice: LatticeSection,
    pub pump: PumpSection,
    pub grid: GridSection,
    pub propagation: PropagationSection,
    pub beam: BeamSection,
    /// Bragg indices of the spots to evaluate.
    pub spots: Vec<[i32; 2]>,
    /// Snapshot times in fs; defaults to the pulse peak and end.
    pub snapshot_times_fs: Option<Vec<f64>>,
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lattice: LatticeSection::default(),
            pump: PumpSection::default(),
            grid: GridSection::default(),
            propagation: PropagationSection::default(),
            beam: BeamSection::default(),
            spots: vec![[1, 1], [1, -1]],
            snapshot_times_fs: None,
            output_dir: "trdiff_out".into(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                config_err(format!("{}", e.into_inner()))
            } else {
                config_err(format!("at key `{path}`: {}", e.into_inner()))
            }
        })?;
        cfg.check_invariants()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn check_invariants(&self) -> Result<(), CliError> {
        let positive: [(&str, f64); 7] = [
            ("lattice.a_angstrom", self.lattice.a_angstrom),
            ("lattice.t_hop_eV", self.lattice.t_hop_ev),
            ("lattice.orbital_width_au", self.lattice.orbital_width_au),
            ("pump.photon_eV", self.pump.photon_ev),
            ("pump.tau_fs", self.pump.tau_fs),
            ("propagation.dt_au", self.propagation.dt_au),
            ("beam.incidence_deg", self.beam.incidence_deg),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(format!("{key} must be positive (got {v})")));
            }
        }
        if !(self.pump.e0_v_per_nm >= 0.0 && self.pump.e0_v_per_nm.is_finite()) {
            return Err(config_err(format!(
                "pump.E0_V_per_nm must be non-negative (got {})",
                self.pump.e0_v_per_nm
            )));
        }
        let pn = (self.pump.pol[0] * self.pump.pol[0] + self.pump.pol[1] * self.pump.pol[1]).sqrt();
        if (pn - 1.0).abs() > 1e-9 {
            return Err(config_err(format!(
                "pump.pol must be a unit vector (norm {pn:.6})"
            )));
        }
        if self.grid.nk == 0 || !self.grid.nk.is_multiple_of(2) {
            return Err(config_err(format!(
                "grid.nk must be positive and even (got {})",
                self.grid.nk
            )));
        }
        if self.grid.cell_grid_n == 0 {
            return Err(config_err("grid.cell_grid_n must be positive (got 0)"));
        }
        if self.grid.halo == 0 {
            return Err(config_err("grid.halo must be at least 1 (got 0)"));
        }
        self.propagation.t2_fs.to_au()?;
        if !(self.beam.kinetic_ev >= 0.0 && self.beam.kinetic_ev.is_finite()) {
            return Err(config_err(format!(
                "beam.kinetic_eV must be non-negative (got {})",
                self.beam.kinetic_ev
            )));
        }
        if self.beam.incidence_deg > 90.0 {
            return Err(config_err(format!(
                "beam.incidence_deg must lie in (0, 90] (got {})",
                self.beam.incidence_deg
            )));
        }
        if self.spots.is_empty() {
            return Err(config_err("spots must list at least one [h, k] pair"));
        }
        for (i, s) in self.spots.iter().enumerate() {
            if *s == [0, 0] {
                return Err(config_err(format!("spots[{i}] must not be [0, 0]")));
            }
        }
        if let Some(times) = &self.snapshot_times_fs {
            for (i, &t) in times.iter().enumerate() {
                if !(t >= 0.0 && t <= self.pump.tau_fs && t.is_finite()) {
                    return Err(config_err(format!(
                        "snapshot_times_fs[{i}] must lie within [0, tau_fs] (got {t})"
                    )));
                }
            }
        }
        if self.output_dir.is_empty() {
            return Err(config_err("output_dir must not be empty"));
        }
        Ok(())
    }

    /// Canonical serialized form: pretty JSON plus trailing newline. The
    /// config hash and the echo file are both derived from these bytes.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        text.into_bytes()
    }

    pub fn sha256_hex(&self) -> String {
        let digest = Sha256::digest(self.canonical_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            use std::fmt::Write;
            write!(hex, "{byte:02x}").unwrap();
        }
        hex
    }
}

/// Core model objects produced from a validated config, plus bookkeeping
/// for output files.
pub struct Resolved {
    pub config: RunConfig,
    pub config_hash: String,
    pub lat: Lattice,
    pub t_hop: f64,
    pub orbital: GaussianOrbital,
    pub pulse: LaserPulse,
    pub prop: PropagatorConfig,
    pub beam: BeamConfig,
    pub spots: Vec<[i32; 2]>,
    pub snapshot_times_au: Vec<f64>,
}

impl Resolved {
    pub fn new(config: RunConfig) -> Result<Self, CliError> {
        let lat = Lattice::honeycomb(units::angstrom_to_au(config.lattice.a_angstrom));
        let t_hop = units::ev_to_au(config.lattice.t_hop_ev);
        let orbital = GaussianOrbital::new(config.lattice.orbital_width_au)
            .map_err(|e| config_err(format!("lattice.orbital_width_au: {e}")))?;
        let pulse = LaserPulse::new(
            units::v_per_nm_to_au(config.pump.e0_v_per_nm),
            units::ev_to_au(config.pump.photon_ev),
            units::fs_to_au(config.pump.tau_fs),
            config.pump.pol,
        )
        .map_err(|e| config_err(format!("pump: {e}")))?;

        let mut prop = PropagatorConfig::new(
            config.propagation.dt_au,
            config.propagation.t2_fs.to_au()?,
            pulse.tau,
        );
        // Record roughly 16 samples per carrier period; enough for the
        // harmonic analysis while keeping trace files small.
        let spacing = pulse.period() / 16.0;
        prop.sample_stride = ((spacing / prop.dt).round() as usize).max(1);
        prop.validate(&pulse)
            .map_err(|e| config_err(format!("propagation: {e}")))?;

        let theta = config.beam.incidence_deg.to_radians();
        let beam = BeamConfig {
            kinetic_ev: config.beam.kinetic_ev,
            incidence: [theta.sin(), 0.0, theta.cos()],
            probe: config.beam.probe.into(),
        };
        beam.kinematics()
            .map_err(|e| config_err(format!("beam: {e}")))?;

        let snapshot_times_au = match &config.snapshot_times_fs {
            Some(times) => times.iter().map(|&t| units::fs_to_au(t)).collect(),
            None => vec![0.5 * pulse.tau, pulse.tau],
        };

        let config_hash = config.sha256_hex();
        let spots = config.spots.clone();
        Ok(Resolved {
            config,
            config_hash,
            lat,
            t_hop,
            orbital,
            pulse,
            prop,
            beam,
            spots,
            snapshot_times_au,
        })
    }

    /// Creates the output directory and writes the resolved-config echo.
    pub fn write_echo(&self) -> Result<std::path::PathBuf, CliError> {
        let dir = std::path::PathBuf::from(&self.config.output_dir);
        fs::create_dir_all(&dir)
            .map_err(|e| config_err(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join("resolved_config.json");
        fs::write(&path, self.config.canonical_bytes())
            .map_err(|e| config_err(format!("cannot write {}: {e}", path.display())))?;
        Ok(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_resolves_to_builtin_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        let r = Resolved::new(cfg).unwrap();
        assert!((r.pulse.e0 - 4.8617e-3).abs() < 1e-7);
        assert!((r.pulse.omega - 0.0569613).abs() < 1e-6);
        assert!((r.pulse.tau - 868.17).abs() < 0.01);
        assert!((r.lat.a - 4.6487).abs() < 1e-4);
        assert!((r.t_hop - 0.09922).abs() < 1e-5);
        assert_eq!(r.spots, vec![[1, 1], [1, -1]]);
        assert_eq!(r.snapshot_times_au.len(), 2);
        let inc = r.beam.incidence;
        assert!((inc[0] - inc[2]).abs() < 1e-12 && inc[1] == 0.0);
    }

    #[test]
    fn unknown_keys_and_bad_types_name_the_key() {
        let err = RunConfig::from_json(r#"{"pump": {"e0": 1.0}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("pump") && msg.contains("e0"), "{msg}");

        let err = RunConfig::from_json(r#"{"pump": {"photon_eV": "fast"}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("pump.photon_eV"), "{msg}");
    }

    #[test]
    fn invariant_violations_name_the_key() {
        let err = RunConfig::from_json(r#"{"grid": {"nk": 7}}"#).unwrap_err();
        assert!(err.to_string().contains("grid.nk"));
        let err = RunConfig::from_json(r#"{"spots": [[0, 0]]}"#).unwrap_err();
        assert!(err.to_string().contains("spots[0]"));
        let err = RunConfig::from_json(r#"{"pump": {"tau_fs": -3.0}}"#).unwrap_err();
        assert!(err.to_string().contains("pump.tau_fs"));
        assert!(matches!(err, CliError::Config(_)));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn dephasing_accepts_numbers_and_inf() {
        let cfg = RunConfig::from_json(r#"{"propagation": {"T2_fs": "inf"}}"#).unwrap();
        assert_eq!(cfg.propagation.t2_fs.to_au().unwrap(), f64::INFINITY);
        let cfg = RunConfig::from_json(r#"{"propagation": {"T2_fs": 10.0}}"#).unwrap();
        assert!((cfg.propagation.t2_fs.to_au().unwrap() - 413.41).abs() < 0.01);
        let err = RunConfig::from_json(r#"{"propagation": {"T2_fs": "soon"}}"#).unwrap_err();
        assert!(err.to_string().contains("T2_fs"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::from_json("{}").unwrap();
        let b = RunConfig::from_json(r#"{"grid": {"nk": 12}}"#).unwrap();
        assert_eq!(a.sha256_hex().len(), 64);
        assert_ne!(a.sha256_hex(), b.sha256_hex());
        assert_eq!(a.sha256_hex(), RunConfig::default().sha256_hex());
    }
}
