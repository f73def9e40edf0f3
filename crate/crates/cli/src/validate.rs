//! Self-check run by `doublewell validate`.
//!
//! The quick variant uses smaller bases for the cross-method comparison and
//! reports against a correspondingly looser bound.

use doublewell::eigs::{lowest_eigs_with, EigOptions};
use doublewell::fock::{assemble_bh, enumerate_fock, BHParams, LatticeSpec};
use doublewell::grid::{solve_1p, Grid1D, PotentialSpec, SingleParticleBasis};
use doublewell::linalg::{to_complex, C64};
use doublewell::observables::*;
use doublewell::propagate::{evolve_ramp_observed, evolve_static, ground_state_at, RampJob, RampOptions, StaticGenerator};
use doublewell::twobody::*;

use crate::error::Result;

pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub bound: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.measured <= self.bound
    }

    pub fn line(&self) -> String {
        format!(
            "{}  {:<40} measured {:.3e}  bound {:.1e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.bound
        )
    }
}

fn basis(a: f64, n_cut: usize) -> Result<SingleParticleBasis> {
    let g = Grid1D::new(20.0, 511)?;
    Ok(solve_1p(&g, &PotentialSpec::fixed(a)?, n_cut, 0.0)?)
}

fn pair_spectrum(b: &SingleParticleBasis, lambda: f64) -> Result<TwoBodySpectrum> {
    let w = interaction_tensor(b, lambda, b.n_cut())?;
    Ok(diagonalize_2p(&assemble_h2p(b, &w)?)?)
}

/// Geometric extrapolation over a doubling sequence of basis sizes.
pub fn extrapolate(e: &[f64]) -> f64 {
    let k = e.len();
    if k < 3 {
        return e[k - 1];
    }
    let (d1, d2) = (e[k - 2] - e[k - 3], e[k - 1] - e[k - 2]);
    if d1.abs() < 1e-12 || d2.abs() < 1e-12 {
        return e[k - 1];
    }
    let r = d2 / d1;
    if !(0.0..0.95).contains(&r) {
        return e[k - 1];
    }
    e[k - 1] + d2 * r / (1.0 - r)
}

pub fn run(quick: bool) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    let h0 = basis(0.0, 40)?;
    let one = h0.energies().iter().enumerate().map(|(n, e)| (e - (n as f64 + 0.5)).abs()).fold(0.0, f64::max);
    checks.push(Check { name: "harmonic one-body levels", measured: one, bound: 1e-9 });

    let free = pair_spectrum(&h0, 0.0)?;
    let mut k = 0;
    let mut two = 0.0f64;
    for n in 0..=10usize {
        for _ in 0..n / 2 + 1 {
            two = two.max((free.energies()[k] - (n as f64 + 1.0)).abs());
            k += 1;
        }
    }
    checks.push(Check { name: "harmonic pair levels and degeneracies", measured: two, bound: 1e-9 });

    let b = basis(10.0, 30)?;
    let s = pair_spectrum(&b, 0.5)?;
    let start = localized_initial_state(s.basis(), 0)?;
    let series = ModalSeries::new(&s, &b, &start.to_eigen(&s), 0.0)?;
    let mut closure = 0.0f64;
    let mut continuity = 0.0f64;
    for i in 0..20 {
        let t = 1.0 + 7.3 * i as f64;
        let c = evolve_spectral(&start, &s, t).to_pair(&s);
        closure = closure.max((pair_detection_probabilities(&c, s.basis(), &b)?.sum() - 1.0).abs());
        let h = 1e-3;
        let dp = (series.probabilities(t + h).p_rr - series.probabilities(t - h).p_rr) / (2.0 * h);
        continuity = continuity.max((dp + pair_outflow(&c, s.basis(), &b)?).abs());
    }
    checks.push(Check { name: "probability closure", measured: closure, bound: 1e-9 });
    checks.push(Check { name: "continuity of the RR population", measured: continuity, bound: 1e-3 });

    let op = PairOperator::new(&b, 30, 0.5)?;
    let psi0 = start.pair_coefficients()?.to_vec();
    let exact = evolve_static(&psi0, &StaticGenerator::Spectrum(&s), 25.0)?;
    let krylov = evolve_static(
        &psi0,
        &StaticGenerator::Operator { hamiltonian: &op, amplitude: 10.0, tol_rate: 1e-11, max_dim: 40 },
        25.0,
    )?;
    let gap = exact.iter().zip(&krylov).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    checks.push(Check { name: "Krylov against eigenbasis propagation", measured: gap, bound: 1e-8 });

    let l = 41;
    let fb = enumerate_fock(2, l)?;
    let lat = LatticeSpec::new(10.0, l)?;
    let h = assemble_bh(&fb, &lat, &BHParams { potential: PotentialSpec::fixed(10.0)?, u: 1.0 }, 0.0)?;
    let job = RampJob {
        hamiltonian: &h,
        initial_state: to_complex(&ground_state_at(&h, 0.0)?.state),
        spec: PotentialSpec::new(10.0, 5.0)?,
        t_start: 0.0,
        t_end: 10.0,
        sample_times: (0..=20).map(|k| k as f64 * 0.5).collect(),
    };
    let mut bound_violation = 0.0f64;
    let upper = (l as f64).ln();
    let traj = evolve_ramp_observed(&job, &RampOptions { keep_states: false, ..RampOptions::default() }, &mut |_, _, psi: &[C64]| {
        let r = rdm1_fock(psi, &fb)?;
        let ev = r.eigenvalues()?;
        let s = entropy(&r)?;
        bound_violation = bound_violation.max(-ev[0]).max(-s).max(s - upper);
        Ok(())
    })?;
    checks.push(Check { name: "norm drift along a ramp", measured: traj.max_norm_drift(), bound: 1e-9 });
    checks.push(Check { name: "entropy bounds and RDM positivity", measured: bound_violation.max(0.0), bound: 1e-10 });

    let (cuts, sites, bound): (&[usize], usize, f64) = if quick { (&[20, 40], 121, 5e-2) } else { (&[30, 60, 120], 461, 5e-3) };
    let mut ladders = Vec::new();
    for &n in cuts {
        ladders.push(pair_spectrum(&basis(10.0, n)?, 1.0)?.energies()[..6].to_vec());
    }
    let fbl = enumerate_fock(2, sites)?;
    let latl = LatticeSpec::new(10.0, sites)?;
    let hl = assemble_bh(&fbl, &latl, &BHParams { potential: PotentialSpec::fixed(10.0)?, u: 1.0 }, 0.0)?;
    let lattice = lowest_eigs_with(&hl, 6, &EigOptions { tol: 1e-11, ..EigOptions::default() })?.values;
    let mut dev = 0.0f64;
    for k in 0..6 {
        let seq: Vec<f64> = ladders.iter().map(|l| l[k]).collect();
        dev = dev.max((extrapolate(&seq) - lattice[k]).abs());
    }
    checks.push(Check { name: "pair basis against lattice, 6 levels", measured: dev, bound });
    Ok(checks)
}
