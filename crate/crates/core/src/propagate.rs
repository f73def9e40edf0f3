//! Time evolution under static and ramped barrier Hamiltonians.
//!
//! Static evolution is either spectral (when an eigendecomposition is at
//! hand) or a sequence of Krylov exponentials. Ramps use a frozen
//! Hamiltonian per step, evaluated at the step midpoint, with step-doubling
//! error control. A fourth-order commutator-free Magnus scheme is available
//! for long ramps; it relies on `H(A)` being affine in `A`, which holds for
//! every [`BarrierHamiltonian`] in this crate.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::eigs::{lowest_eigs_with, EigOptions, Eigenpairs};
use crate::error::{argument, Error, Result};
use crate::grid::PotentialSpec;
use crate::linalg::{self, caxpy, cdot, cnorm, C64};
use crate::ops::{BarrierHamiltonian, Frozen};
use crate::twobody::TwoBodySpectrum;

/// Outcome of one Krylov exponential.
#[derive(Clone, Copy, Debug, Default)]
pub struct KrylovInfo {
    /// Time actually covered (may be shorter than requested).
    pub tau: f64,
    pub dim: usize,
    /// A posteriori error estimate of the step.
    pub error: f64,
}

/// Builds a Lanczos basis for `H` starting from `v` and returns
/// `exp(-i tau H) v` for the largest `tau <= dt` whose error estimate stays
/// below `tol_rate * |tau|`.
pub fn krylov_expm(
    apply: &dyn Fn(&[C64], &mut [C64]),
    v: &[C64],
    dt: f64,
    tol_rate: f64,
    max_dim: usize,
) -> Result<(Vec<C64>, KrylovInfo)> {
    let n = v.len();
    let beta0 = cnorm(v);
    if beta0 == 0.0 || dt == 0.0 {
        return Ok((v.to_vec(), KrylovInfo { tau: dt, dim: 0, error: 0.0 }));
    }
    let max_dim = max_dim.clamp(2, n.max(2));
    let mut basis: Vec<Vec<C64>> = vec![v.iter().map(|z| z / beta0).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); n];
    loop {
        let j = alpha.len();
        apply(&basis[j], &mut w);
        let a = cdot(&basis[j], &w).re;
        caxpy(C64::new(-a, 0.0), &basis[j], &mut w);
        if j > 0 {
            caxpy(C64::new(-beta[j - 1], 0.0), &basis[j - 1], &mut w);
        }
        for q in &basis {
            let c = cdot(q, &w);
            caxpy(-c, q, &mut w);
        }
        alpha.push(a);
        let b = cnorm(&w);
        let m = alpha.len();
        let (theta, q) = tridiagonal_eigen(&alpha, &beta)?;
        let scale = alpha.iter().map(|x| x.abs()).fold(1.0, f64::max);
        let breakdown = b <= 1e-13 * scale || m == n;
        let err_at = |tau: f64| -> f64 {
            if breakdown {
                return 0.0;
            }
            let z: C64 = (0..m)
                .map(|k| C64::from_polar(q[(m - 1, k)] * q[(0, k)], -theta[k] * tau))
                .sum();
            b * z.norm() * beta0
        };
        // the estimate cannot drop below roundoff in the eigenvector sum
        let floor = 16.0 * f64::EPSILON * beta0;
        let ok = |tau: f64| err_at(tau) <= tol_rate * tau.abs() + floor;
        let done = breakdown || ok(dt);
        if done || m >= max_dim {
            let mut tau = dt;
            let mut halvings = 0;
            while !ok(tau) {
                tau *= 0.5;
                halvings += 1;
                if halvings > 60 {
                    return Err(Error::Convergence {
                        message: "Krylov step cannot reach the requested accuracy".into(),
                        residuals: vec![err_at(tau)],
                    });
                }
            }
            let coeffs: Vec<C64> = (0..m)
                .map(|r| {
                    (0..m)
                        .map(|k| C64::from_polar(q[(r, k)] * q[(0, k)], -theta[k] * tau))
                        .sum::<C64>()
                        * beta0
                })
                .collect();
            let mut out = vec![C64::new(0.0, 0.0); n];
            for (c, vec) in coeffs.iter().zip(&basis) {
                caxpy(*c, vec, &mut out);
            }
            return Ok((out, KrylovInfo { tau, dim: m, error: err_at(tau) }));
        }
        beta.push(b);
        basis.push(w.iter().map(|z| z / b).collect());
    }
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> Result<(Vec<f64>, Mat<f64>)> {
    let m = alpha.len();
    let t = Mat::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    linalg::eigh(&t)
}

/// Accumulated step statistics.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub exponentials: usize,
    pub min_dt: f64,
    pub max_dt: f64,
    pub max_krylov_dim: usize,
}

impl StepStats {
    fn record_dt(&mut self, dt: f64) {
        if self.accepted == 0 || dt < self.min_dt {
            self.min_dt = dt;
        }
        self.max_dt = self.max_dt.max(dt);
        self.accepted += 1;
    }
    fn record_krylov(&mut self, info: &KrylovInfo) {
        self.exponentials += 1;
        self.max_krylov_dim = self.max_krylov_dim.max(info.dim);
    }
}

/// `exp(-i t H(amplitude)) psi`, split into as many Krylov steps as needed.
/// Negative `t` runs backwards.
pub fn expm_frozen(
    hamiltonian: &dyn BarrierHamiltonian,
    amplitude: f64,
    psi: &[C64],
    t: f64,
    tol_rate: f64,
    max_dim: usize,
    stats: &mut StepStats,
) -> Result<Vec<C64>> {
    let apply = |x: &[C64], y: &mut [C64]| hamiltonian.apply(amplitude, x, y);
    let mut state = psi.to_vec();
    let mut left = t;
    while left != 0.0 {
        let (next, info) = krylov_expm(&apply, &state, left, tol_rate, max_dim)?;
        stats.record_krylov(&info);
        state = next;
        if (left - info.tau).abs() <= 1e-14 * t.abs() {
            break;
        }
        left -= info.tau;
    }
    Ok(state)
}

/// Ground state of `H(amplitude)`.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    /// Distance to the next level.
    pub gap: f64,
    pub state: Vec<f64>,
}

/// Fails when the two lowest levels are closer than `1e-10`: the ground
/// state is then not unique and a symmetry sector must be chosen.
pub fn ground_state_at(hamiltonian: &dyn BarrierHamiltonian, amplitude: f64) -> Result<GroundState> {
    ground_state_with(hamiltonian, amplitude, &EigOptions::default())
}

pub fn ground_state_with(hamiltonian: &dyn BarrierHamiltonian, amplitude: f64, opts: &EigOptions) -> Result<GroundState> {
    let op = Frozen { hamiltonian, amplitude };
    let pairs = lowest_eigs_with(&op, 2.min(hamiltonian.dim()), opts)?;
    let gap = if pairs.len() > 1 { pairs.values[1] - pairs.values[0] } else { f64::INFINITY };
    if gap < 1e-10 {
        return Err(Error::Domain(format!(
            "ground state at amplitude {amplitude} is degenerate (gap {gap:e}); pick a symmetry sector"
        )));
    }
    Ok(GroundState { energy: pairs.values[0], gap, state: pairs.vector(0).to_vec() })
}

/// `<psi|H(amplitude)|psi>`.
pub fn energy_expectation(hamiltonian: &dyn BarrierHamiltonian, amplitude: f64, psi: &[C64]) -> f64 {
    let mut y = vec![C64::new(0.0, 0.0); psi.len()];
    hamiltonian.apply(amplitude, psi, &mut y);
    cdot(psi, &y).re
}

/// Exact propagator in a (truncated) eigenbasis.
#[derive(Clone, Debug)]
pub struct SpectralPropagator {
    energies: Vec<f64>,
    vectors: Mat<f64>,
}

impl SpectralPropagator {
    pub fn new(energies: Vec<f64>, vectors: Mat<f64>) -> Result<Self> {
        if energies.len() != vectors.ncols() {
            return argument(format!("{} energies for {} vectors", energies.len(), vectors.ncols()));
        }
        Ok(Self { energies, vectors })
    }

    pub fn from_eigenpairs(pairs: &Eigenpairs) -> Self {
        Self { energies: pairs.values.clone(), vectors: pairs.vectors.clone() }
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// `c_n = <n|psi>`.
    pub fn coefficients(&self, psi: &[C64]) -> Vec<C64> {
        (0..self.vectors.ncols())
            .map(|n| {
                let v = linalg::col(&self.vectors, n);
                v.iter().zip(psi).map(|(a, b)| b * a).sum()
            })
            .collect()
    }

    pub fn state_at(&self, coefficients: &[C64], t: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.vectors.nrows()];
        for (n, c) in coefficients.iter().enumerate() {
            let phase = c * C64::from_polar(1.0, -self.energies[n] * t);
            for (o, v) in out.iter_mut().zip(linalg::col(&self.vectors, n)) {
                *o += phase * v;
            }
        }
        out
    }
}

/// Source of a time-independent evolution.
pub enum StaticGenerator<'a> {
    /// Complete two-body eigendecomposition; states are pair coefficients.
    Spectrum(&'a TwoBodySpectrum),
    Eigenbasis(&'a SpectralPropagator),
    Operator {
        hamiltonian: &'a dyn BarrierHamiltonian,
        amplitude: f64,
        tol_rate: f64,
        max_dim: usize,
    },
}

pub fn evolve_static(state: &[C64], generator: &StaticGenerator<'_>, t: f64) -> Result<Vec<C64>> {
    match generator {
        StaticGenerator::Spectrum(s) => {
            let c = s.project(state);
            let phased: Vec<C64> = c
                .iter()
                .zip(s.energies())
                .map(|(c, e)| c * C64::from_polar(1.0, -e * t))
                .collect();
            Ok(s.expand(&phased))
        }
        StaticGenerator::Eigenbasis(p) => Ok(p.state_at(&p.coefficients(state), t)),
        StaticGenerator::Operator { hamiltonian, amplitude, tol_rate, max_dim } => {
            expm_frozen(*hamiltonian, *amplitude, state, t, *tol_rate, *max_dim, &mut StepStats::default())
        }
    }
}

const ROUNDOFF_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Frozen Hamiltonian at the step midpoint, second order.
    Midpoint,
    /// Two-exponential commutator-free Magnus scheme, fourth order.
    Magnus4,
}

impl Integrator {
    fn order(self) -> i32 {
        match self {
            Integrator::Midpoint => 2,
            Integrator::Magnus4 => 4,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RampOptions {
    /// Local error allowed per unit time.
    pub tol: f64,
    pub integrator: Integrator,
    /// Error allowed per unit time inside each Krylov exponential.
    pub krylov_tol: f64,
    pub max_krylov_dim: usize,
    pub dt_initial: f64,
    pub dt_min: f64,
    pub keep_states: bool,
}

impl Default for RampOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            integrator: Integrator::Midpoint,
            krylov_tol: 1e-11,
            max_krylov_dim: 40,
            dt_initial: 1e-2,
            dt_min: 1e-10,
            keep_states: true,
        }
    }
}

pub struct RampJob<'a> {
    pub hamiltonian: &'a dyn BarrierHamiltonian,
    pub initial_state: Vec<C64>,
    pub spec: PotentialSpec,
    /// Time of `initial_state` (non-zero when resuming).
    pub t_start: f64,
    pub t_end: f64,
    pub sample_times: Vec<f64>,
}

impl RampJob<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.initial_state.len() != self.hamiltonian.dim() {
            return argument(format!(
                "state has {} entries, Hamiltonian dimension is {}",
                self.initial_state.len(),
                self.hamiltonian.dim()
            ));
        }
        let norm = cnorm(&self.initial_state);
        if (norm - 1.0).abs() > 1e-9 {
            return argument(format!("initial state is not normalised (norm {norm})"));
        }
        if !(self.t_start >= 0.0 && self.t_end >= self.t_start) {
            return argument(format!("need 0 <= t_start <= t_end, got {} and {}", self.t_start, self.t_end));
        }
        let mut prev = self.t_start;
        for &t in &self.sample_times {
            if !(t >= prev && t <= self.t_end) {
                return argument(format!("sample times must ascend within [{}, {}]", self.t_start, self.t_end));
            }
            prev = t;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub sample_times: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Empty unless [`RampOptions::keep_states`] is set.
    pub states: Vec<Vec<C64>>,
    pub norms: Vec<f64>,
    pub energies: Vec<f64>,
    pub integrator: Option<Integrator>,
    pub stats: StepStats,
    /// State at `t_end`.
    pub final_state: Vec<C64>,
}

impl Trajectory {
    pub fn max_norm_drift(&self) -> f64 {
        self.norms.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Evolves along the ramp and records every sample.
pub fn evolve_ramp(job: &RampJob<'_>, opts: &RampOptions) -> Result<Trajectory> {
    evolve_ramp_observed(job, opts, &mut |_, _, _| Ok(()))
}

/// Like [`evolve_ramp`], calling `observer(t, amplitude, psi)` at every
/// sample time.
pub fn evolve_ramp_observed(
    job: &RampJob<'_>,
    opts: &RampOptions,
    observer: &mut dyn FnMut(f64, f64, &[C64]) -> Result<()>,
) -> Result<Trajectory> {
    job.validate()?;
    if !(opts.tol > 0.0 && opts.krylov_tol > 0.0 && opts.dt_initial > 0.0) {
        return argument("tolerances and initial step must be positive");
    }
    let h = job.hamiltonian;
    let spec = &job.spec;
    let mut traj = Trajectory { integrator: Some(opts.integrator), ..Trajectory::default() };
    let mut psi = job.initial_state.clone();
    let mut t = job.t_start;
    let mut dt = opts.dt_initial;

    let mut record = |t: f64, psi: &[C64], traj: &mut Trajectory| -> Result<()> {
        let a = spec.amplitude(t)?;
        traj.sample_times.push(t);
        traj.amplitudes.push(a);
        traj.norms.push(cnorm(psi));
        traj.energies.push(energy_expectation(h, a, psi));
        if opts.keep_states {
            traj.states.push(psi.to_vec());
        }
        observer(t, a, psi)
    };

    let mut targets: Vec<(f64, bool)> = job.sample_times.iter().map(|&s| (s, true)).collect();
    if spec.t_ramp > job.t_start && spec.t_ramp < job.t_end {
        targets.push((spec.t_ramp, false));
    }
    targets.push((job.t_end, false));
    targets.sort_by(|a, b| a.0.total_cmp(&b.0));

    for (target, is_sample) in targets {
        while t < target {
            let ramping = spec.t_ramp > 0.0 && t < spec.t_ramp;
            if !ramping {
                psi = expm_frozen(h, spec.a_max, &psi, target - t, opts.krylov_tol, opts.max_krylov_dim, &mut traj.stats)?;
                t = target;
                break;
            }
            let step = dt.min(target - t);
            let full = ramp_step(h, spec, opts, &psi, t, step, &mut traj.stats)?;
            let half = ramp_step(h, spec, opts, &psi, t, 0.5 * step, &mut traj.stats)?;
            let half = ramp_step(h, spec, opts, &half, t + 0.5 * step, 0.5 * step, &mut traj.stats)?;
            let diff: f64 = full.iter().zip(&half).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            // differences at roundoff level carry no information about the step
            let rate = (diff - ROUNDOFF_FLOOR).max(0.0) / step;
            let exponent = 1.0 / opts.integrator.order() as f64;
            let factor = if rate == 0.0 { 2.0 } else { (0.9 * (opts.tol / rate).powf(exponent)).clamp(0.2, 2.0) };
            if rate <= opts.tol {
                psi = half;
                traj.stats.record_dt(step);
                t = if target - (t + step) <= 1e-12 * target.abs().max(1.0) { target } else { t + step };
                if step == dt || factor < 1.0 {
                    dt = step * factor;
                }
            } else {
                traj.stats.rejected += 1;
                dt = step * factor;
                if dt < opts.dt_min {
                    return Err(Error::Convergence {
                        message: format!("step size underflow at t = {t} (dt = {dt:e}, error rate {rate:e})"),
                        residuals: vec![rate],
                    });
                }
            }
        }
        if is_sample {
            record(t, &psi, &mut traj)?;
        }
    }
    traj.final_state = psi;
    Ok(traj)
}

fn ramp_step(
    h: &dyn BarrierHamiltonian,
    spec: &PotentialSpec,
    opts: &RampOptions,
    psi: &[C64],
    t: f64,
    dt: f64,
    stats: &mut StepStats,
) -> Result<Vec<C64>> {
    match opts.integrator {
        Integrator::Midpoint => {
            let a = spec.amplitude(t + 0.5 * dt)?;
            expm_frozen(h, a, psi, dt, opts.krylov_tol, opts.max_krylov_dim, stats)
        }
        Integrator::Magnus4 => {
            let s3 = 3f64.sqrt();
            let (c1, c2) = (0.5 - s3 / 6.0, 0.5 + s3 / 6.0);
            let (w1, w2) = ((3.0 - 2.0 * s3) / 12.0, (3.0 + 2.0 * s3) / 12.0);
            let a1 = spec.amplitude(t + c1 * dt)?;
            let a2 = spec.amplitude(t + c2 * dt)?;
            // w1 H(a1) + w2 H(a2) = H(2 (w1 a1 + w2 a2)) / 2 for affine H(A)
            let first = 2.0 * (w2 * a1 + w1 * a2);
            let second = 2.0 * (w1 * a1 + w2 * a2);
            let mid = expm_frozen(h, first, psi, 0.5 * dt, opts.krylov_tol, opts.max_krylov_dim, stats)?;
            expm_frozen(h, second, &mid, 0.5 * dt, opts.krylov_tol, opts.max_krylov_dim, stats)
        }
    }
}

/// `E(T_ramp) = <psi(t0)|H(a_max)|psi(t0)>` for each ramp duration, starting
/// from `initial_state` at `t = 0`.
pub fn energy_vs_ramp(
    hamiltonian: &dyn BarrierHamiltonian,
    initial_state: &[C64],
    a_max: f64,
    t_ramps: &[f64],
    t0: f64,
    opts: &RampOptions,
) -> Result<Vec<(f64, f64)>> {
    use rayon::prelude::*;
    if let Some(&t) = t_ramps.iter().find(|&&t| t > t0) {
        return argument(format!("t0 = {t0} must not be shorter than the ramp ({t})"));
    }
    let opts = RampOptions { keep_states: false, ..*opts };
    t_ramps
        .par_iter()
        .map(|&t_ramp| {
            let job = RampJob {
                hamiltonian,
                initial_state: initial_state.to_vec(),
                spec: PotentialSpec::new(a_max, t_ramp)?,
                t_start: 0.0,
                t_end: t0,
                sample_times: vec![],
            };
            let traj = evolve_ramp(&job, &opts)?;
            Ok((t_ramp, energy_expectation(hamiltonian, a_max, &traj.final_state)))
        })
        .collect()
}

/// State snapshot for resuming a long run. Text format: four header lines
/// `# doublewell checkpoint`, `# time <t>`, `# digest <config digest>`,
/// `# dim <n>`, then `n` lines `<re> <im>`. Numbers are written in
/// shortest round-trip form, so reading restores the state bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub time: f64,
    pub digest: String,
    pub state: Vec<C64>,
}

impl Checkpoint {
    pub fn write_to(&self, mut out: impl std::io::Write) -> Result<()> {
        writeln!(out, "# doublewell checkpoint")?;
        writeln!(out, "# time {}", self.time)?;
        writeln!(out, "# digest {}", self.digest)?;
        writeln!(out, "# dim {}", self.state.len())?;
        for z in &self.state {
            writeln!(out, "{} {}", z.re, z.im)?;
        }
        Ok(())
    }

    pub fn read_from(input: impl std::io::BufRead) -> Result<Self> {
        let bad = |what: &str| Error::Format(format!("checkpoint: {what}"));
        let mut lines = input.lines();
        let mut header = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))??;
            line.strip_prefix(&format!("# {key}"))
                .map(|v| v.trim().to_string())
                .ok_or_else(|| bad(&format!("expected '{key}' line, found '{line}'")))
        };
        header("doublewell checkpoint")?;
        let time: f64 = header("time")?.parse().map_err(|_| bad("time"))?;
        let digest = header("digest")?;
        let dim: usize = header("dim")?.parse().map_err(|_| bad("dim"))?;
        let mut state = Vec::with_capacity(dim);
        for line in lines.take(dim) {
            let line = line?;
            let mut it = line.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next()) {
                (Some(Ok(re)), Some(Ok(im))) => state.push(C64::new(re, im)),
                _ => return Err(bad(&format!("bad amplitude line '{line}'"))),
            }
        }
        if state.len() != dim {
            return Err(bad("fewer amplitudes than announced"));
        }
        Ok(Self { time, digest, state })
    }
}
