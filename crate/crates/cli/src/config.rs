//! Run configuration, read from TOML.
//!
//! Every field has a default, so a config file only lists what differs.
//! Unknown keys are rejected to catch typos.

use std::path::{Path, PathBuf};

use doublewell::fock::fock_dimension;
use doublewell::propagate::Integrator;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Largest pair basis diagonalized densely.
pub const MAX_DENSE_PAIRS: usize = 12_000;
/// Largest Fock space the lattice route will allocate.
pub const MAX_FOCK_DIM: u128 = 4_000_000;
/// Largest `n_cut` for which the interaction tensor is built.
pub const MAX_TENSOR_N_CUT: usize = 160;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Fourier grid one-body basis with the exact pair Hamiltonian.
    Fgh,
    /// Bose-Hubbard lattice in occupation-number space.
    Bh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    /// Ground state without barrier.
    Ground,
    /// Both particles in the right-well orbital built from levels `2n`, `2n+1`.
    Localized(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    AMax,
    Lambda,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Eigenpair residual.
    pub eig: f64,
    /// Local error per unit time of the ramp integrator.
    pub ramp: f64,
    /// Error per unit time of each Krylov exponential.
    pub krylov: f64,
    pub integrator: Integrator,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { eig: 1e-10, ramp: 1e-8, krylov: 1e-11, integrator: Integrator::Midpoint }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub n_particles: usize,
    pub x_max: f64,
    /// Grid points of the Fourier grid (odd).
    pub n_grid: usize,
    /// Lattice sites (odd).
    pub n_sites: usize,
    pub n_cut: usize,
    /// Contact strength; the lattice uses `U = lambda`.
    pub lambda: f64,
    pub a_max: f64,
    pub t_ramp: f64,
    pub t_end: f64,
    pub dt_sample: f64,
    pub initial: InitialState,
    /// Levels reported per sweep point.
    pub n_levels: usize,
    pub sweep: Option<Sweep>,
    /// Ramp durations for entropy maps.
    pub t_ramps: Vec<f64>,
    /// Times at which pair densities are written.
    pub snapshots: Vec<f64>,
    pub output_dir: PathBuf,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::Fgh,
            n_particles: 2,
            x_max: 20.0,
            n_grid: 511,
            n_sites: 121,
            n_cut: 60,
            lambda: 1.0,
            a_max: 10.0,
            t_ramp: 0.0,
            t_end: 100.0,
            dt_sample: 0.5,
            initial: InitialState::Ground,
            n_levels: 10,
            sweep: None,
            t_ramps: Vec::new(),
            snapshots: Vec::new(),
            output_dir: PathBuf::from("out"),
            tolerances: Tolerances::default(),
        }
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Config(msg.into()))
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        config_err(msg)
    }
}

fn nonneg(x: f64) -> bool {
    x >= 0.0 && x.is_finite()
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form. The output directory is left
    /// out, so identical runs written to different places share a digest.
    pub fn digest(&self) -> String {
        let canonical = RunConfig { output_dir: PathBuf::new(), ..self.clone() };
        hex(&Sha256::digest(canonical.to_toml().as_bytes()))
    }

    /// Checks everything the solvers would otherwise reject part way
    /// through a run, including memory budgets.
    pub fn validate(&self) -> Result<()> {
        check(self.x_max > 0.0 && self.x_max.is_finite(), "x_max must be positive")?;
        check(nonneg(self.lambda), "lambda must be >= 0")?;
        check(nonneg(self.a_max), "a_max must be >= 0")?;
        check(nonneg(self.t_ramp), "t_ramp must be >= 0")?;
        check(nonneg(self.t_end), "t_end must be >= 0")?;
        check(self.dt_sample > 0.0 && self.dt_sample.is_finite(), "dt_sample must be positive")?;
        check(self.n_levels >= 1, "n_levels must be at least 1")?;
        check(self.t_ramps.iter().all(|&t| nonneg(t)), "t_ramps must be >= 0")?;
        check(
            self.snapshots.iter().all(|&t| nonneg(t) && t <= self.t_end),
            "snapshot times must lie in [0, t_end]",
        )?;
        let tol = &self.tolerances;
        check([tol.eig, tol.ramp, tol.krylov].iter().all(|&x| x > 0.0 && x < 1.0), "tolerances must lie in (0, 1)")?;
        if let Some(s) = &self.sweep {
            let ok = s.values.iter().all(|&v| nonneg(v));
            check(ok, "sweep values must be >= 0")?;
        }
        match self.method {
            Method::Fgh => {
                check((1..=2).contains(&self.n_particles), "the fgh method handles one or two particles")?;
                check(self.n_grid >= 3 && self.n_grid % 2 == 1, "n_grid must be odd and >= 3")?;
                check(self.n_cut >= 1 && self.n_cut <= self.n_grid, "n_cut must lie in [1, n_grid]")?;
                if let InitialState::Localized(n) = self.initial {
                    check(2 * n + 1 < self.n_cut, "localized level needs n_cut > 2n + 1")?;
                }
                if self.n_particles == 2 {
                    if self.n_cut > MAX_TENSOR_N_CUT {
                        return Err(CliError::Capacity(format!(
                            "interaction tensor for n_cut {} exceeds the limit {MAX_TENSOR_N_CUT}",
                            self.n_cut
                        )));
                    }
                    let pairs = self.n_cut * (self.n_cut + 1) / 2;
                    if pairs > MAX_DENSE_PAIRS {
                        return Err(CliError::Capacity(format!(
                            "pair basis of dimension {pairs} exceeds the dense limit {MAX_DENSE_PAIRS}"
                        )));
                    }
                }
            }
            Method::Bh => {
                check((1..=3).contains(&self.n_particles), "the bh method handles one to three particles")?;
                check(self.n_sites >= 5 && self.n_sites % 2 == 1, "n_sites must be odd and >= 5")?;
                check(self.initial == InitialState::Ground, "the bh method starts from the ground state")?;
                let dim = fock_dimension(self.n_particles, self.n_sites);
                if dim > MAX_FOCK_DIM {
                    return Err(CliError::Capacity(format!("Fock space of dimension {dim} exceeds {MAX_FOCK_DIM}")));
                }
            }
        }
        Ok(())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Shipped starting points, one per kind of run.
pub const PRESETS: &[(&str, &str)] = &[
    ("one-body-spectrum", include_str!("../presets/one-body-spectrum.toml")),
    ("pair-spectrum", include_str!("../presets/pair-spectrum.toml")),
    ("three-body-spectrum", include_str!("../presets/three-body-spectrum.toml")),
    ("josephson", include_str!("../presets/josephson.toml")),
    ("saddle-point", include_str!("../presets/saddle-point.toml")),
    ("quench", include_str!("../presets/quench.toml")),
    ("ramp", include_str!("../presets/ramp.toml")),
    ("entropy-map-2", include_str!("../presets/entropy-map-2.toml")),
    ("entropy-map-3", include_str!("../presets/entropy-map-3.toml")),
];

pub fn preset(name: &str) -> Result<RunConfig> {
    match PRESETS.iter().find(|(n, _)| *n == name) {
        Some((_, text)) => RunConfig::from_toml(text),
        None => {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            config_err(format!("unknown preset {name}; available: {}", names.join(", ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for (name, _) in PRESETS {
            let c = preset(name).unwrap();
            c.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("n_particle = 2").is_err());
    }

    #[test]
    fn localized_initial_state_syntax() {
        let c = RunConfig::from_toml("initial = { localized = 3 }").unwrap();
        assert_eq!(c.initial, InitialState::Localized(3));
        let g = RunConfig::from_toml("initial = \"ground\"").unwrap();
        assert_eq!(g.initial, InitialState::Ground);
    }

    #[test]
    fn oversized_runs_are_capacity_errors() {
        let c = RunConfig { method: Method::Bh, n_particles: 3, n_sites: 401, ..RunConfig::default() };
        assert_eq!(c.validate().unwrap_err().exit_code(), 4);
        let d = RunConfig { n_cut: 200, ..RunConfig::default() };
        assert_eq!(d.validate().unwrap_err().exit_code(), 4);
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::default();
        let b = RunConfig { lambda: 0.5, ..a.clone() };
        assert_eq!(a.digest(), RunConfig::default().digest());
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), RunConfig { output_dir: "elsewhere".into(), ..a.clone() }.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
