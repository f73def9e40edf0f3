//! The `spectrum`, `evolve` and `entropy-map` subcommands.

use doublewell::eigs::{lowest_eigs_with, EigOptions};
use doublewell::fock::{
    assemble_bh, cluster_sizes, enumerate_fock, spectrum_vs_u, u_from_lambda, BHParams, FockBasis, LatticeSpec,
    SparseHamiltonian, SweepWindow,
};
use doublewell::grid::{solve_1p, Grid1D, PotentialSpec, SingleParticleBasis};
use doublewell::linalg::{to_complex, C64};
use doublewell::observables::*;
use doublewell::propagate::{energy_expectation, evolve_ramp_observed, ground_state_with, RampJob, RampOptions};
use doublewell::twobody::*;

use crate::config::{InitialState, Method, RunConfig, SweepAxis};
use crate::error::{CliError, Result};
use crate::output::{OutputDir, Snapshot, Table};

/// What a command reports besides its files.
#[derive(Default)]
pub struct Outcome {
    pub diagnostics: Vec<String>,
    /// Set when some sweep points failed but the rest were written.
    pub partial: Option<String>,
}

const CLUSTER_TOL: f64 = 1e-6;

fn eig_options(cfg: &RunConfig) -> EigOptions {
    EigOptions { tol: cfg.tolerances.eig, ..EigOptions::default() }
}

fn ramp_options(cfg: &RunConfig) -> RampOptions {
    RampOptions {
        tol: cfg.tolerances.ramp,
        krylov_tol: cfg.tolerances.krylov,
        integrator: cfg.tolerances.integrator,
        keep_states: false,
        ..RampOptions::default()
    }
}

fn one_body(cfg: &RunConfig, a: f64) -> Result<SingleParticleBasis> {
    let grid = Grid1D::new(cfg.x_max, cfg.n_grid)?;
    Ok(solve_1p(&grid, &PotentialSpec::fixed(a)?, cfg.n_cut, 0.0)?)
}

fn lattice(cfg: &RunConfig) -> Result<(LatticeSpec, FockBasis, SparseHamiltonian)> {
    let lat = LatticeSpec::new(cfg.x_max, cfg.n_sites)?;
    let basis = enumerate_fock(cfg.n_particles, cfg.n_sites)?;
    let params = BHParams { potential: PotentialSpec::fixed(cfg.a_max)?, u: u_from_lambda(cfg.lambda)? };
    let h = assemble_bh(&basis, &lat, &params, 0.0)?;
    Ok((lat, basis, h))
}

/// `(a_max, lambda)` at each sweep point, with the swept value.
fn sweep_points(cfg: &RunConfig) -> (SweepAxis, Vec<(f64, f64, f64)>) {
    match &cfg.sweep {
        None => (SweepAxis::AMax, vec![(cfg.a_max, cfg.a_max, cfg.lambda)]),
        Some(s) => {
            let pts = s
                .values
                .iter()
                .map(|&v| match s.axis {
                    SweepAxis::AMax => (v, v, cfg.lambda),
                    SweepAxis::Lambda => (v, cfg.a_max, v),
                })
                .collect();
            (s.axis, pts)
        }
    }
}

pub fn spectrum(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    let (axis, points) = sweep_points(cfg);
    let digest = cfg.digest();
    let table = match (cfg.method, cfg.n_particles) {
        (Method::Fgh, 1) => {
            let mut t = Table::new("spectrum", &["value", "n", "energy", "parity"]);
            for &(v, a, _) in &points {
                let b = one_body(cfg, a)?;
                if b.confinement_warning() {
                    outcome.diagnostics.push(format!("value {v}: {} levels feel the box edge", b.unconfined()));
                }
                for n in 0..cfg.n_levels.min(cfg.n_cut) {
                    t.push(vec![v, n as f64, b.energies()[n], b.parities()[n].sign()]);
                }
            }
            t
        }
        (Method::Fgh, _) => {
            let mut t = Table::new("spectrum", &["value", "n", "energy", "parity"]);
            let shared = match axis {
                SweepAxis::Lambda if !points.is_empty() => {
                    let b = one_body(cfg, cfg.a_max)?;
                    let w = InteractionTensor::unit(&b, cfg.n_cut)?;
                    Some((b, w))
                }
                _ => None,
            };
            for &(v, a, lambda) in &points {
                let s = match &shared {
                    Some((b, w)) => diagonalize_2p(&assemble_h2p(b, &w.with_lambda(lambda)?)?)?,
                    None => {
                        let b = one_body(cfg, a)?;
                        diagonalize_2p(&assemble_h2p(&b, &interaction_tensor(&b, lambda, cfg.n_cut)?)?)?
                    }
                };
                for n in 0..cfg.n_levels.min(s.len()) {
                    t.push(vec![v, n as f64, s.energies()[n], s.parities()[n].sign()]);
                }
            }
            t
        }
        (Method::Bh, _) => {
            let mut t = Table::new("spectrum", &["value", "n", "energy", "branch", "degeneracy"]);
            let (_, basis, h) = lattice(cfg)?;
            let k = cfg.n_levels.min(basis.dim());
            if axis == SweepAxis::Lambda && !points.is_empty() {
                let us: Vec<f64> = points.iter().map(|p| p.2).collect();
                let sweep = spectrum_vs_u(&h, &us, SweepWindow::Lowest(k), CLUSTER_TOL, &eig_options(cfg))?;
                for r in &sweep.rows {
                    t.push(vec![r.u, r.n as f64, r.energy, r.branch as f64, r.degeneracy as f64]);
                }
                outcome.diagnostics.extend(sweep.diagnostics);
            } else {
                for &(v, a, _) in &points {
                    let e = lowest_eigs_with(&h.with_amplitude(a), k, &eig_options(cfg))?.values;
                    let sizes = cluster_sizes(&e, CLUSTER_TOL);
                    for (n, (&en, &d)) in e.iter().zip(&sizes).enumerate() {
                        t.push(vec![v, n as f64, en, n as f64, d as f64]);
                    }
                }
            }
            t
        }
    };
    out.write("spectrum.tsv", &table.render(&digest))?;
    Ok(outcome)
}

/// Regular sample grid on `[0, t_end]`, with `t_end` and any extra times
/// merged in.
pub fn sample_times(t_end: f64, dt: f64, extra: &[f64]) -> Vec<f64> {
    let n = (t_end / dt + 1e-9).floor() as usize;
    let mut t: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
    t.push(t_end);
    t.extend_from_slice(extra);
    t.sort_by(f64::total_cmp);
    t.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
    t
}

struct Sample {
    t: f64,
    p: DomainProbabilities,
    outflow: f64,
    /// Set when the integrated current is known in closed form.
    current: Option<f64>,
    entropy: f64,
    energy: f64,
}

/// Hamiltonian and observables for one method.
trait Model {
    fn hamiltonian(&self) -> &dyn doublewell::ops::BarrierHamiltonian;
    fn observe(&self, t: f64, amplitude: f64, psi: &[C64]) -> Result<Sample>;
    fn density(&self, t: f64, psi: &[C64]) -> Result<Snapshot>;
}

struct PairModel {
    b1: SingleParticleBasis,
    basis: PairBasis,
    op: PairOperator,
}

impl Model for PairModel {
    fn hamiltonian(&self) -> &dyn doublewell::ops::BarrierHamiltonian {
        &self.op
    }
    fn observe(&self, t: f64, amplitude: f64, psi: &[C64]) -> Result<Sample> {
        Ok(Sample {
            t,
            p: pair_detection_probabilities(psi, &self.basis, &self.b1)?,
            outflow: pair_outflow(psi, &self.basis, &self.b1)?,
            current: None,
            entropy: entropy(&rdm1_pair(psi, &self.basis))?,
            energy: energy_expectation(&self.op, amplitude, psi),
        })
    }
    fn density(&self, t: f64, psi: &[C64]) -> Result<Snapshot> {
        let d = grid_density(&TwoBodyState::pair(psi.to_vec(), t), &self.basis, &self.b1)?;
        let g = self.b1.grid();
        Ok(snapshot(t, g.x_min(), g.dx(), d.nrows(), |i, j| d[(i, j)]))
    }
}

struct LatticeModel {
    lat: LatticeSpec,
    basis: FockBasis,
    h: SparseHamiltonian,
    right: Vec<f64>,
}

impl Model for LatticeModel {
    fn hamiltonian(&self) -> &dyn doublewell::ops::BarrierHamiltonian {
        &self.h
    }
    fn observe(&self, t: f64, amplitude: f64, psi: &[C64]) -> Result<Sample> {
        let outflow = if self.basis.n_particles() == 2 {
            lattice_outflow(&fock_pair_amplitudes(psi, &self.basis, &self.lat)?, &self.lat)?
        } else {
            f64::NAN
        };
        Ok(Sample {
            t,
            p: domain_split(&rdm2_diag_fock(psi, &self.basis)?, &self.right)?,
            outflow,
            current: None,
            entropy: entropy(&rdm1_fock(psi, &self.basis)?)?,
            energy: energy_expectation(&self.h, amplitude, psi),
        })
    }
    fn density(&self, t: f64, psi: &[C64]) -> Result<Snapshot> {
        let d = rdm2_diag_fock(psi, &self.basis)?;
        let dx = self.lat.dx();
        Ok(snapshot(t, self.lat.points()[0], dx, d.nrows(), |i, j| d[(i, j)] / (dx * dx)))
    }
}

fn snapshot(t: f64, x_min: f64, dx: f64, n: usize, f: impl Fn(usize, usize) -> f64) -> Snapshot {
    let values = (0..n * n).map(|k| f(k / n, k % n)).collect();
    Snapshot { t, x_min, dx, values, n }
}

fn pair_model(cfg: &RunConfig) -> Result<(PairModel, Vec<C64>)> {
    let b1 = one_body(cfg, cfg.a_max)?;
    let basis = PairBasis::new(cfg.n_cut)?;
    let op = PairOperator::new(&b1, cfg.n_cut, cfg.lambda)?;
    let initial = match cfg.initial {
        InitialState::Localized(n) => localized_initial_state(&basis, n)?.pair_coefficients()?.to_vec(),
        InitialState::Ground => to_complex(&ground_state_with(&op, 0.0, &eig_options(cfg))?.state),
    };
    Ok((PairModel { b1, basis, op }, initial))
}

fn lattice_model(cfg: &RunConfig) -> Result<(LatticeModel, Vec<C64>)> {
    let (lat, basis, h) = lattice(cfg)?;
    let initial = to_complex(&ground_state_with(&h, 0.0, &eig_options(cfg))?.state);
    let right = lattice_right_weights(&lat);
    Ok((LatticeModel { lat, basis, h, right }, initial))
}

fn is_snapshot(cfg: &RunConfig, t: f64) -> bool {
    cfg.snapshots.iter().any(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
}

pub fn evolve(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    if cfg.n_particles < 2 {
        return Err(CliError::Config("evolve needs at least two particles".into()));
    }
    let mut outcome = Outcome::default();
    let times = sample_times(cfg.t_end, cfg.dt_sample, &cfg.snapshots);
    let mut samples = Vec::with_capacity(times.len());
    let mut snaps = Vec::new();
    match cfg.method {
        Method::Fgh if cfg.t_ramp == 0.0 => {
            let (m, initial) = pair_model(cfg)?;
            let w = interaction_tensor(&m.b1, cfg.lambda, cfg.n_cut)?;
            let s = diagonalize_2p(&assemble_h2p(&m.b1, &w)?)?;
            let start = TwoBodyState::pair(initial, 0.0);
            let series = ModalSeries::new(&s, &m.b1, &start.to_eigen(&s), 1e-12)?;
            outcome.diagnostics.push(format!(
                "{} eigenstates carry weight {:.12}",
                series.n_modes(),
                series.captured_weight()
            ));
            for &t in &times {
                let c = evolve_spectral(&start, &s, t).to_pair(&s);
                let mut sample = m.observe(t, cfg.a_max, &c)?;
                sample.current = Some(series.integrated_current_exact(t));
                samples.push(sample);
                if is_snapshot(cfg, t) {
                    snaps.push(m.density(t, &c)?);
                }
            }
        }
        Method::Fgh => {
            let (m, initial) = pair_model(cfg)?;
            run_ramp(cfg, &m, initial, &times, &mut samples, &mut snaps, &mut outcome)?;
        }
        Method::Bh => {
            let (m, initial) = lattice_model(cfg)?;
            run_ramp(cfg, &m, initial, &times, &mut samples, &mut snaps, &mut outcome)?;
        }
    }

    let currents: Vec<f64> = if samples.iter().all(|s| s.current.is_some()) {
        samples.iter().map(|s| s.current.unwrap()).collect()
    } else if samples.iter().any(|s| s.outflow.is_nan()) {
        vec![f64::NAN; samples.len()]
    } else {
        let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
        let f: Vec<f64> = samples.iter().map(|s| s.outflow).collect();
        integrated_current(&t, &f)?
    };
    let digest = cfg.digest();
    let mut table = Table::new("series", &["t", "P_LL", "P_RR", "P_LR", "J", "S", "E"]);
    for (s, j) in samples.iter().zip(currents) {
        table.push(vec![s.t, s.p.p_ll, s.p.p_rr, s.p.p_lr, j, s.entropy, s.energy]);
    }
    out.write("series.tsv", &table.render(&digest))?;
    for (k, s) in snaps.iter().enumerate() {
        out.write(&format!("density_{k:03}.txt"), &s.render(&digest))?;
    }
    Ok(outcome)
}

fn run_ramp(
    cfg: &RunConfig,
    model: &dyn Model,
    initial: Vec<C64>,
    times: &[f64],
    samples: &mut Vec<Sample>,
    snaps: &mut Vec<Snapshot>,
    outcome: &mut Outcome,
) -> Result<()> {
    let mut observe = |t: f64, a: f64, psi: &[C64]| -> doublewell::Result<()> {
        let s = model.observe(t, a, psi).map_err(to_core)?;
        samples.push(s);
        if is_snapshot(cfg, t) {
            snaps.push(model.density(t, psi).map_err(to_core)?);
        }
        Ok(())
    };
    let spec = PotentialSpec::new(cfg.a_max, cfg.t_ramp)?;
    if cfg.t_end == 0.0 {
        observe(0.0, spec.amplitude(0.0)?, &initial)?;
        return Ok(());
    }
    let job = RampJob {
        hamiltonian: model.hamiltonian(),
        initial_state: initial,
        spec,
        t_start: 0.0,
        t_end: cfg.t_end,
        sample_times: times.to_vec(),
    };
    let traj = evolve_ramp_observed(&job, &ramp_options(cfg), &mut observe)?;
    let st = &traj.stats;
    outcome.diagnostics.push(format!(
        "steps accepted {}, rejected {}, exponentials {}, dt in [{:e}, {:e}], largest Krylov space {}",
        st.accepted, st.rejected, st.exponentials, st.min_dt, st.max_dt, st.max_krylov_dim
    ));
    outcome.diagnostics.push(format!("largest norm drift {:e}", traj.max_norm_drift()));
    Ok(())
}

fn to_core(e: CliError) -> doublewell::Error {
    match e {
        CliError::Io(io) => doublewell::Error::Io(io),
        other => doublewell::Error::Format(other.to_string()),
    }
}

pub fn entropy_map_cmd(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    if cfg.n_particles < 2 {
        return Err(CliError::Config("entropy maps need at least two particles".into()));
    }
    let times = sample_times(cfg.t_end, cfg.dt_sample, &[]);
    let opts = ramp_options(cfg);
    let map = match cfg.method {
        Method::Fgh => {
            let (m, initial) = pair_model(cfg)?;
            let rdm = |psi: &[C64]| Ok(rdm1_pair(psi, &m.basis));
            entropy_map(&m.op, &initial, cfg.a_max, &cfg.t_ramps, &times, &rdm, &opts)
        }
        Method::Bh => {
            let (m, initial) = lattice_model(cfg)?;
            let rdm = |psi: &[C64]| rdm1_fock(psi, &m.basis);
            entropy_map(&m.h, &initial, cfg.a_max, &cfg.t_ramps, &times, &rdm, &opts)
        }
    };
    let mut table = Table::new("entropy-map", &["T_ramp", "t", "S"]);
    for (tr, t, s) in map.triples() {
        table.push(vec![tr, t, s]);
    }
    let digest = cfg.digest();
    out.write("entropy_map.tsv", &table.render(&digest))?;
    let mut outcome = Outcome::default();
    if !map.failures.is_empty() {
        let lines: Vec<String> = map.failures.iter().map(|(tr, e)| format!("{tr}\t{e}")).collect();
        out.write("failures.txt", &(lines.join("\n") + "\n"))?;
        outcome.partial = Some(format!("{} of {} ramp durations failed", map.failures.len(), cfg.t_ramps.len()));
    }
    Ok(outcome)
}
