//! Acceptance gate. Every test prints one line
//! `criterion NN: PASS|FAIL | measured values` and then asserts the
//! criterion, so `cargo test --test acceptance` doubles as a report.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use doublewell::eigs::{lowest_eigs_with, EigOptions};
use doublewell::fock::{assemble_bh, enumerate_fock, BHParams, LatticeSpec, SparseHamiltonian};
use doublewell::grid::{solve_1p, Grid1D, PotentialSpec, SingleParticleBasis};
use doublewell::linalg::{to_complex, C64};
use doublewell::observables::*;
use doublewell::propagate::*;
use doublewell::twobody::*;

/// Writes past the test harness's output capture so the line shows up in a
/// plain `cargo test` run as well.
fn report(id: u32, pass: bool, detail: &str) {
    let line = format!("criterion {id:>2}: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
}

/// Grid used for every two-body run below unless stated otherwise.
fn desk_grid() -> Grid1D {
    Grid1D::new(20.0, 511).unwrap()
}

fn basis_at(a: f64, n_cut: usize) -> SingleParticleBasis {
    solve_1p(&desk_grid(), &PotentialSpec::fixed(a).unwrap(), n_cut, 0.0).unwrap()
}

fn spectrum(b1: &SingleParticleBasis, lambda: f64, n_cut: usize) -> TwoBodySpectrum {
    let w = interaction_tensor(b1, lambda, n_cut).unwrap();
    diagonalize_2p(&assemble_h2p(b1, &w).unwrap()).unwrap()
}

fn lattice_h(n: usize, l: usize, a: f64, u: f64) -> SparseHamiltonian {
    let lat = LatticeSpec::new(10.0, l).unwrap();
    let b = enumerate_fock(n, l).unwrap();
    assemble_bh(&b, &lat, &BHParams { potential: PotentialSpec::fixed(a).unwrap(), u }, 0.0).unwrap()
}

fn lattice_levels(n: usize, l: usize, a: f64, u: f64, k: usize) -> Vec<f64> {
    let h = lattice_h(n, l, a, u);
    lowest_eigs_with(&h, k, &EigOptions { tol: 1e-11, ..EigOptions::default() }).unwrap().values
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    ((x - target) / target).abs() <= rel
}

#[test]
fn criterion_01_harmonic_limit() {
    let start = Instant::now();
    let grid = Grid1D::new(40.0, 2047).unwrap();
    let b1 = solve_1p(&grid, &PotentialSpec::fixed(0.0).unwrap(), 330, 0.0).unwrap();
    let err1 = b1.energies().iter().enumerate().map(|(n, e)| (e - (n as f64 + 0.5)).abs()).fold(0.0, f64::max);
    // levels with n <= 20 only involve orbitals below 21
    let s = spectrum(&b1, 0.0, 40);
    let mut degeneracies_ok = true;
    let mut worst2 = 0.0f64;
    for n in 0..=20usize {
        let target = n as f64 + 1.0;
        let hits: Vec<f64> = s.energies().iter().copied().filter(|e| (e - target).abs() < 0.25).collect();
        worst2 = hits.iter().map(|e| (e - target).abs()).fold(worst2, f64::max);
        degeneracies_ok &= hits.len() == n / 2 + 1;
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = err1 < 1e-9 && worst2 < 1e-9 && degeneracies_ok && secs < 120.0;
    report(1, pass, &format!(
        "max|E_n - (n+1/2)| = {err1:.2e} (n < 330); 2P levels n+1, n <= 20: max error {worst2:.2e}, degeneracies {}; {secs:.1} s",
        if degeneracies_ok { "ok" } else { "WRONG" }
    ));
    assert!(pass);
}

#[test]
fn criterion_02_deep_well_degeneracy() {
    let start = Instant::now();
    let b1 = basis_at(30.0, 120);
    let free = spectrum(&b1, 0.0, 120);
    let e0 = &free.energies()[..3];
    let unit = InteractionTensor::unit(&b1, 120).unwrap();
    let h = assemble_h2p(&b1, &unit.with_lambda(1.0).unwrap()).unwrap();
    let inter = diagonalize_2p(&h).unwrap();
    let e1 = &inter.energies()[..3];
    let secs = start.elapsed().as_secs_f64();
    // n_cut doubling check 60 -> 120
    let half = spectrum(&basis_at(30.0, 60), 1.0, 60);
    let shift0 = (half.energies()[0] - e1[0]).abs();
    let shift1 = (half.energies()[1] - e1[1]).abs();
    let free_ok = e0.iter().all(|e| (e - 11.34).abs() < 0.02);
    let ground_ok = (e1[0] - 11.34).abs() < 0.02;
    let gap = e1[1] - e1[0];
    let splitting = e1[2] - e1[1];
    let resolved = gap > 0.1 && splitting < 1e-2 * gap;
    let pass = free_ok && ground_ok && resolved && shift0 < 0.02 && secs < 600.0;
    report(2, pass, &format!(
        "lambda=0: E0..2 = {:.5} {:.5} {:.5}; lambda=1: E0 = {:.5}, gap {gap:.4}, doublet splitting {splitting:.2e}; \
         n_cut 60->120 shifts E0 by {shift0:.1e}, E1 by {shift1:.1e}; {secs:.1} s at n_cut 120",
        e0[0], e0[1], e0[2], e1[0]
    ));
    assert!(pass);
}

/// Periods `(T10, T21)` from the three lowest levels.
fn gap_periods(e: &[f64]) -> (f64, f64) {
    (2.0 * PI / (e[1] - e[0]), 2.0 * PI / (e[2] - e[1]))
}

#[test]
fn criterion_03_rabi_and_josephson_periods() {
    let n_cut = 60;
    let b1 = basis_at(10.0, n_cut);
    let unit = InteractionTensor::unit(&b1, n_cut).unwrap();
    let solve = |lambda: f64| diagonalize_2p(&assemble_h2p(&b1, &unit.with_lambda(lambda).unwrap()).unwrap()).unwrap();
    let free = solve(0.0);
    let t0 = 2.0 * PI / (free.energies()[1] - free.energies()[0]);
    let weak = solve(0.005);
    let (t10, t21) = gap_periods(weak.energies());
    let strong = solve(50.0);
    let (t10_strong, _) = gap_periods(strong.energies());

    // DFT of the simulated P_RR(t) from the localised n=0 start
    let basis = weak.basis().clone();
    let s0 = localized_initial_state(&basis, 0).unwrap();
    let series = ModalSeries::new(&weak, &b1, &s0.to_eigen(&weak), 1e-12).unwrap();
    let dt = 20.0;
    let samples = (4.5 * t21 / dt) as usize;
    let p_rr: Vec<f64> = (0..samples).map(|k| series.probabilities(k as f64 * dt).p_rr).collect();
    let est = extract_periods(&p_rr, dt, 8).unwrap();
    let near = |t: f64| est.angular_frequencies.iter().any(|w| (w - 2.0 * PI / t).abs() <= est.resolution);
    let dft_ok = near(t21) && near(t10);

    // self-trapping point on the largest desk basis, with the lattice value for reference
    let big = basis_at(10.0, 120);
    let st = spectrum(&big, 0.5, 120);
    let ratio = (2.0 * PI / (st.energies()[2] - st.energies()[1])) / t0;
    let lat0 = lattice_levels(2, 231, 10.0, 0.0, 2);
    let lat = lattice_levels(2, 231, 10.0, 0.5, 3);
    let lattice_ratio = (lat0[1] - lat0[0]) / (lat[2] - lat[1]);

    let checks = [
        within(t0, 12e3, 0.02),
        within(t21, 65e3, 0.10),
        within(t10, 2e3, 0.10),
        dft_ok,
        within(ratio, 1750.0, 0.25),
        within(t10_strong, 3.0, 0.20),
    ];
    let pass = checks.iter().all(|&c| c);
    report(3, pass, &format!(
        "T(0) = {t0:.0}; lambda=0.005: T21 = {t21:.0}, T10 = {t10:.0}, DFT peaks {} (bin {:.1e}); \
         lambda=0.5: T21/T(0) = {ratio:.0} at n_cut 120 [{}] (lattice L=231: {lattice_ratio:.0}); lambda=50: T10 = {t10_strong:.2}",
        if dft_ok { "match" } else { "MISS" },
        est.resolution,
        if checks[4] { "ok" } else { "target 1750 +-25%" }
    ));
    assert!(pass);
}

#[test]
fn criterion_04_saddle_point_dynamics() {
    let n_cut = 60;
    let b1 = basis_at(10.0, n_cut);
    let unit = InteractionTensor::unit(&b1, n_cut).unwrap();
    let run = |lambda: f64, dt: f64, window: f64| {
        let s = diagonalize_2p(&assemble_h2p(&b1, &unit.with_lambda(lambda).unwrap()).unwrap()).unwrap();
        let s0 = localized_initial_state(s.basis(), 3).unwrap();
        let weights = expansion_coefficients(&s0, &s);
        let series = ModalSeries::new(&s, &b1, &s0.to_eigen(&s), 1e-8).unwrap();
        let n = (window / dt) as usize;
        let p: Vec<f64> = (0..n).map(|k| series.probabilities(k as f64 * dt).p_rr).collect();
        (extract_periods(&p, dt, 12).unwrap(), weights)
    };
    let (free, _) = run(0.0, 0.25, 800.0);
    let t_free = free.dominant_period().unwrap();
    let (weak, weights) = run(0.1, 0.5, 8000.0);
    let dominant = weights.iter().filter(|(_, w)| *w > 0.05).count();
    // the extra state splits the Josephson line; the envelope beats at the splitting
    let w = &weak.angular_frequencies;
    let modulation = 2.0 * PI / (w[0] - w[1]).abs();
    let pass = within(t_free, 19.5, 0.02) && within(modulation, 394.0, 0.15) && dominant == 4;
    report(4, pass, &format!(
        "lambda=0 period {t_free:.2}; lambda=0.1 lines at {:.4} and {:.4} give modulation period {modulation:.0}, states with weight > 5%: {dominant}",
        w[0], w[1]
    ));
    assert!(pass);
}

#[test]
fn criterion_05_second_order_tunnelling() {
    let n_cut = 60;
    let b1 = basis_at(10.0, n_cut);
    let s = spectrum(&b1, 0.005, n_cut);
    let (_, t21) = gap_periods(s.energies());
    let s0 = localized_initial_state(s.basis(), 0).unwrap();
    let series = ModalSeries::new(&s, &b1, &s0.to_eigen(&s), 1e-10).unwrap();
    let dt = 2.0;
    let n = (t21 / dt) as usize + 1;
    let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    let rates: Vec<f64> = times.iter().map(|&t| series.outflow(t)).collect();
    let j = integrated_current(&times, &rates).unwrap();
    let mut worst = 0.0f64;
    let mut exact_gap = 0.0f64;
    for (k, &t) in times.iter().enumerate() {
        worst = worst.max((j[k] - series.probabilities(t).p_ll).abs());
        exact_gap = exact_gap.max((j[k] - series.integrated_current_exact(t)).abs());
    }
    let pass = worst < 0.1;
    report(5, pass, &format!(
        "max |J_(RR->LR) - P_LL| = {worst:.3} over T21 = {t21:.0}; trapezoid vs closed form {exact_gap:.1e}; {} modes carry weight {:.10}",
        series.n_modes(),
        series.captured_weight()
    ));
    assert!(pass);
}

/// One-body density `rho(x) = int dx2 |psi(x, x2)|^2`.
fn one_body_density(psi: &faer::Mat<C64>, dx: f64) -> Vec<f64> {
    (0..psi.nrows()).map(|i| (0..psi.ncols()).map(|j| psi[(i, j)].norm_sqr()).sum::<f64>() * dx).collect()
}

/// Largest `max(|x1|, |x2|)` among local maxima of `|psi|^2` that carry at
/// least 5% of the peak.
fn outermost_pair_maximum(psi: &faer::Mat<C64>, x: &[f64]) -> f64 {
    let n = x.len();
    let d = |i: usize, j: usize| psi[(i, j)].norm_sqr();
    let peak = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| d(i, j)).fold(0.0, f64::max);
    let mut best = f64::NAN;
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let v = d(i, j);
            if v > 0.05 * peak && (i - 1..=i + 1).all(|a| (j - 1..=j + 1).all(|b| d(a, b) <= v)) {
                let r = x[i].abs().max(x[j].abs());
                if !(r <= best) {
                    best = r;
                }
            }
        }
    }
    best
}

/// Same for the one-body density.
fn outermost_maximum(rho: &[f64], x: &[f64]) -> f64 {
    let peak = rho.iter().cloned().fold(0.0, f64::max);
    (1..x.len() - 1)
        .rev()
        .find(|&i| x[i] > 0.0 && rho[i] > 0.05 * peak && rho[i] >= rho[i - 1] && rho[i] >= rho[i + 1])
        .map(|i| x[i])
        .unwrap_or(f64::NAN)
}

#[test]
fn criterion_06_quench_kinematics() {
    let n_cut = 80;
    let b1 = basis_at(30.0, n_cut);
    let grid = desk_grid();
    let op = PairOperator::new(&b1, n_cut, 1.0).unwrap();
    let ground = ground_state_at(&op, 0.0).unwrap();
    let s = spectrum(&b1, 1.0, n_cut);
    let s0 = TwoBodyState::pair(to_complex(&ground.state), 0.0);
    let amplitudes_at = |t: f64| {
        let st = evolve_spectral(&s0, &s, t);
        grid_amplitudes(&TwoBodyState::pair(st.to_pair(&s), t), s.basis(), &b1).unwrap()
    };
    let x = grid.points();
    let psi = amplitudes_at(1.9);
    let turn = outermost_pair_maximum(&psi, x);
    let turn_1p = outermost_maximum(&one_body_density(&psi, grid.dx()), x);
    // pair density at the saddle point over the second half period
    let c = grid.center();
    let times: Vec<f64> = (0..=60).map(|k| 2.6 + k as f64 * 0.03).collect();
    let centre: Vec<f64> = times.iter().map(|&t| amplitudes_at(t)[(c, c)].norm_sqr()).collect();
    let k_max = (0..centre.len()).max_by(|&a, &b| centre[a].total_cmp(&centre[b])).unwrap();
    let recurrence = times[k_max];
    let interior = k_max > 0 && k_max + 1 < centre.len();
    let pass = (turn - 7.75).abs() <= 0.3 && interior && (recurrence - 3.6).abs() <= 0.3;
    report(6, pass, &format!(
        "outermost pair-density maximum at t=1.9: |x| = {turn:.2} (one-body density: {turn_1p:.2}; classical V(x)=30 at {:.2}); \
         saddle-point density recurs at t = {recurrence:.2}; initial energy {:.4}",
        classical_turning_point(30.0),
        ground.energy
    ));
    assert!(pass);
}

/// Outer root of `V(x) = a` by bisection.
fn classical_turning_point(a: f64) -> f64 {
    let (mut lo, mut hi) = (1.0, 2.0 * a.sqrt() + 2.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if doublewell::grid::potential_at_amplitude(mid, a) < a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Kendall rank correlation of `y` against its index.
fn kendall_tau(y: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut pairs = 0.0;
    for i in 0..y.len() {
        for j in i + 1..y.len() {
            s += (y[j] - y[i]).signum();
            pairs += 1.0;
        }
    }
    s / pairs
}

fn ramp_options() -> RampOptions {
    RampOptions { integrator: Integrator::Magnus4, keep_states: false, ..RampOptions::default() }
}

/// Runs one ramp and returns the entropy samples taken at or after the end
/// of the ramp together with the final state.
fn ramp_with_entropy(
    h: &SparseHamiltonian,
    basis: &doublewell::fock::FockBasis,
    initial: &[C64],
    a_max: f64,
    t_ramp: f64,
    t_end: f64,
    dt: f64,
) -> (Vec<f64>, Vec<C64>) {
    let first = (t_ramp / dt).ceil() as usize;
    let last = (t_end / dt).floor() as usize;
    let sample_times: Vec<f64> = (first..=last).map(|k| k as f64 * dt).collect();
    let job = RampJob {
        hamiltonian: h,
        initial_state: initial.to_vec(),
        spec: PotentialSpec::new(a_max, t_ramp).unwrap(),
        t_start: 0.0,
        t_end,
        sample_times,
    };
    let mut s = Vec::new();
    let traj = evolve_ramp_observed(&job, &ramp_options(), &mut |_, _, psi| {
        s.push(entropy(&rdm1_fock(psi, basis)?)?);
        Ok(())
    })
    .unwrap();
    (s, traj.final_state)
}

// The pair basis at n_cut 30 underestimates the leak (0.054 at T=19 against
// 0.133 at n_cut 40); the lattice gives 0.14 and is used here.
#[test]
fn criterion_07_ramp_adiabaticity() {
    let start = Instant::now();
    let (a_max, t0, dt) = (30.0, 200.0, 0.25);
    let basis = enumerate_fock(2, 121).unwrap();
    let h = lattice_h(2, 121, a_max, 1.0);
    let initial = to_complex(&ground_state_at(&h, 0.0).unwrap().state);
    let target = lowest_eigs_with(&h, 6, &EigOptions { tol: 1e-11, ..EigOptions::default() }).unwrap();
    let (e0, e1) = (target.values[0], target.values[1]);
    let omega = 2.0 * (e1 - e0);
    let t_ramps = [0.001, 1.0, 2.0, 4.0, 7.0, 10.0, 15.0, 19.0, 25.0, 30.0];
    let mut energies = Vec::new();
    let mut leak_ok = true;
    let mut freq_ok = true;
    let mut notes = Vec::new();
    for &tr in &t_ramps {
        let (s, psi) = ramp_with_entropy(&h, &basis, &initial, a_max, tr, t0, dt);
        energies.push(energy_expectation(&h, a_max, &psi));
        if tr >= 19.0 {
            let kept: f64 = (0..3)
                .map(|n| target.vector(n).iter().zip(&psi).map(|(v, z)| z * v).sum::<C64>().norm_sqr())
                .sum();
            let leak = 1.0 - kept;
            let est = extract_periods(&s, dt, 4).unwrap();
            let w = est.angular_frequencies.first().copied().unwrap_or(0.0);
            let hit = (w - omega).abs() <= est.resolution;
            leak_ok &= leak < 0.02;
            freq_ok &= hit;
            notes.push(format!("T={tr}: leak {leak:.1e}, entropy line {w:.4} (bin {:.3})", est.resolution));
        }
    }
    let tau = kendall_tau(&energies);
    let trend_ok = tau <= -0.5 && energies[energies.len() - 1] < energies[0];
    let secs = start.elapsed().as_secs_f64();
    let pass = trend_ok && leak_ok && freq_ok;
    let e_list: Vec<String> = energies.iter().map(|e| format!("{e:.4}")).collect();
    report(7, pass, &format!(
        "E0 {e0:.4}; E(t0) over T_ramp {t_ramps:?} = [{}], Kendall tau {tau:.2}; 2(E1-E0) = {omega:.4}; {}; {secs:.0} s",
        e_list.join(", "),
        notes.join("; ")
    ));
    assert!(pass);
}

/// Probability that every particle sits on the same side of the barrier.
fn all_in_one_well(v: &[f64], basis: &doublewell::fock::FockBasis, centre: usize) -> f64 {
    (0..basis.dim())
        .filter(|&r| {
            let sites = basis.sites_of(r);
            sites.iter().all(|&s| (s as usize) < centre) || sites.iter().all(|&s| (s as usize) > centre)
        })
        .map(|r| v[r] * v[r])
        .sum()
}

#[test]
fn criterion_08_three_particle_structure() {
    let start = Instant::now();
    let l = 121;
    let dim_ok = doublewell::fock::fock_dimension(3, 231) == 2_081_156
        && (1..40usize).all(|l| doublewell::fock::fock_dimension(3, l) == (l * (l + 1) * (l + 2) / 6) as u128);
    let basis = enumerate_fock(3, l).unwrap();
    let centre = LatticeSpec::new(10.0, l).unwrap().center().unwrap();
    let opts = EigOptions { tol: 1e-10, ..EigOptions::default() };
    let h0 = lattice_h(3, l, 30.0, 0.0);
    let free = lowest_eigs_with(&h0, 6, &opts).unwrap().values;
    let fourfold = free[3] - free[0] < 1e-3 * (free[4] - free[3]);

    let h1 = h0.with_u(1.0);
    let pairs = lowest_eigs_with(&h1, 10, &opts).unwrap();
    let e = &pairs.values;
    let twofold = e[1] - e[0] < 1e-3 * (e[2] - e[1]);
    let p_all: Vec<f64> = (0..10).map(|n| all_in_one_well(pairs.vector(n), &basis, centre)).collect();
    // the doublet with all particles on one side lies above the ground doublet
    let noon = (2..9).find(|&n| p_all[n] > 0.5 && p_all[n + 1] > 0.5 && e[n + 1] - e[n] < 1e-3 * (e[n] - e[0]));
    let noon_ok = p_all[0] < 0.5 && p_all[1] < 0.5 && noon.is_some();

    // Hellmann-Feynman: dE/dU = <interaction> against a central difference
    let du = 1e-4;
    let up = lowest_eigs_with(&h0.with_u(1.0 + du), 10, &opts).unwrap().values;
    let down = lowest_eigs_with(&h0.with_u(1.0 - du), 10, &opts).unwrap().values;
    let inter = h1.structure().interaction_diagonal();
    let mut worst = 0.0f64;
    for n in 0..10 {
        let v = pairs.vector(n);
        let hf: f64 = v.iter().zip(inter).map(|(x, w)| x * x * w).sum();
        let fd = (up[n] - down[n]) / (2.0 * du);
        worst = worst.max(((hf - fd) / hf).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = dim_ok && fourfold && twofold && noon_ok && worst < 1e-4 && secs < 1800.0;
    report(8, pass, &format!(
        "dim(N=3, L=231) = {}; U=0 lowest four spread {:.1e} vs next gap {:.3}; U=1 ground splitting {:.1e} vs gap {:.3}, \
         one-well doublet at levels {:?} (P = {:.2}); Hellmann-Feynman max rel. error {worst:.1e}; {secs:.0} s",
        doublewell::fock::fock_dimension(3, 231),
        free[3] - free[0],
        free[4] - free[3],
        e[1] - e[0],
        e[2] - e[1],
        noon.map(|n| (n, n + 1)),
        noon.map(|n| p_all[n]).unwrap_or(0.0)
    ));
    assert!(pass);
}

struct MapSummary {
    plateau_variation: f64,
    diabatic_flatness: f64,
    adiabatic_flatness: f64,
    adiabatic_line: f64,
    max_abs_free: f64,
    bounds_ok: bool,
}

fn map_summary(n: usize, l: usize, a_max: f64, t_end: f64, dt: f64) -> (MapSummary, f64) {
    let basis = enumerate_fock(n, l).unwrap();
    let t_ramps = [0.001, 30.0];
    let samples: Vec<f64> = (0..=(t_end / dt) as usize).map(|k| k as f64 * dt).collect();
    let rdm = |psi: &[C64]| rdm1_fock(psi, &basis);
    let run = |u: f64| {
        let h = lattice_h(n, l, a_max, u);
        let initial = to_complex(&ground_state_at(&h, 0.0).unwrap().state);
        let map = entropy_map(&h, &initial, a_max, &t_ramps, &samples, &rdm, &ramp_options());
        assert!(map.failures.is_empty(), "{:?}", map.failures);
        map
    };
    let inter = run(1.0);
    let free = run(0.0);
    let h = lattice_h(n, l, a_max, 1.0);
    let ev = lowest_eigs_with(&h, 3, &EigOptions { tol: 1e-11, ..EigOptions::default() }).unwrap().values;
    let upper = (l as f64).ln();
    let bounds_ok = inter.values.iter().chain(&free.values).flatten().all(|&s| (-1e-12..=upper + 1e-12).contains(&s));
    let late = |row: &[f64], from: f64| -> Vec<f64> {
        row.iter().zip(&samples).filter(|(_, &t)| t >= from).map(|(s, _)| *s).collect()
    };
    let diabatic = late(&inter.values[0], t_end / 2.0);
    let mean = diabatic.iter().sum::<f64>() / diabatic.len() as f64;
    let var = diabatic.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / diabatic.len() as f64;
    let adiabatic = late(&inter.values[1], 30.0);
    let est = extract_periods(&adiabatic, dt, 4).unwrap();
    let summary = MapSummary {
        plateau_variation: var.sqrt() / mean,
        diabatic_flatness: spectral_flatness(&diabatic, dt),
        adiabatic_flatness: spectral_flatness(&late(&inter.values[1], t_end / 2.0), dt),
        adiabatic_line: est.angular_frequencies.first().copied().unwrap_or(0.0),
        max_abs_free: free.values.iter().flatten().fold(0.0f64, |m, s| m.max(s.abs())),
        bounds_ok,
    };
    (summary, 2.0 * (ev[1] - ev[0]))
}

#[test]
fn criterion_09_entropy_map_phase_structure() {
    let start = Instant::now();
    let mut pass = true;
    let mut lines = Vec::new();
    for &(n, l) in &[(2usize, 61usize), (3, 41)] {
        let (m, omega) = map_summary(n, l, 30.0, 150.0, 0.25);
        let bin = 2.0 * PI / (150.0 - 30.0);
        let plateau = m.plateau_variation < 0.1;
        let contrast = m.diabatic_flatness > m.adiabatic_flatness;
        let zero = m.max_abs_free < 1e-9;
        // for two particles the slow ramp leaves a single tone at twice the gap
        let tone = n != 2 || (m.adiabatic_line - omega).abs() <= bin;
        pass &= plateau && contrast && zero && tone && m.bounds_ok;
        lines.push(format!(
            "N={n} L={l}: diabatic plateau variation {:.3}, flatness {:.3} vs slow {:.3}, slow line {:.4} (2 gap {omega:.4}), \
             free map max {:.1e}, bounds {}",
            m.plateau_variation, m.diabatic_flatness, m.adiabatic_flatness, m.adiabatic_line, m.max_abs_free,
            if m.bounds_ok { "ok" } else { "VIOLATED" }
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    report(9, pass, &format!("{}; {secs:.0} s", lines.join("; ")));
    assert!(pass);
}

/// Three-point geometric extrapolation in a doubling sequence; falls back to
/// the finest value when the differences do not shrink.
fn extrapolate(e: [f64; 3]) -> f64 {
    let (d1, d2) = (e[1] - e[0], e[2] - e[1]);
    if d1.abs() < 1e-12 || d2.abs() < 1e-12 {
        return e[2];
    }
    let r = d2 / d1;
    if !(0.0..0.95).contains(&r) {
        return e[2];
    }
    e[2] + d2 * r / (1.0 - r)
}

#[test]
fn criterion_10_property_suite() {
    let start = Instant::now();
    let mut notes = Vec::new();

    // closure and RDM sanity along a two-body evolution
    let n_cut = 30;
    let b1 = basis_at(10.0, n_cut);
    let s = spectrum(&b1, 1.0, n_cut);
    let s0 = localized_initial_state(s.basis(), 1).unwrap();
    let mut closure = 0.0f64;
    let mut rdm_trace = 0.0f64;
    let mut rdm_min = 0.0f64;
    for k in 0..40 {
        let st = evolve_spectral(&s0, &s, k as f64 * 3.7);
        let c = st.to_pair(&s);
        closure = closure.max((pair_detection_probabilities(&c, s.basis(), &b1).unwrap().sum() - 1.0).abs());
        let r = rdm1_pair(&c, s.basis());
        rdm_trace = rdm_trace.max((r.trace() - 1.0).abs());
        rdm_min = rdm_min.min(r.eigenvalues().unwrap()[0]);
    }

    // norm drift and lattice closure along a ramp
    let l = 61;
    let fb = enumerate_fock(2, l).unwrap();
    let lat = LatticeSpec::new(10.0, l).unwrap();
    let h = lattice_h(2, l, 30.0, 1.0);
    let initial = to_complex(&ground_state_at(&h, 0.0).unwrap().state);
    let job = RampJob {
        hamiltonian: &h,
        initial_state: initial,
        spec: PotentialSpec::new(30.0, 10.0).unwrap(),
        t_start: 0.0,
        t_end: 40.0,
        sample_times: (0..=40).map(|k| k as f64).collect(),
    };
    let mut lattice_closure = 0.0f64;
    let right = lattice_right_weights(&lat);
    let traj = evolve_ramp_observed(&job, &ramp_options(), &mut |_, _, psi| {
        let p = domain_split(&rdm2_diag_fock(psi, &fb)?, &right)?;
        lattice_closure = lattice_closure.max((p.sum() - 1.0).abs());
        let r = rdm1_fock(psi, &fb)?;
        rdm_trace = rdm_trace.max((r.trace() - 1.0).abs());
        rdm_min = rdm_min.min(r.eigenvalues()?[0]);
        Ok(())
    })
    .unwrap();
    let drift = traj.max_norm_drift();
    closure = closure.max(lattice_closure);
    let closure_ok = closure < 1e-9 && drift < 1e-9 && rdm_trace < 1e-9 && rdm_min >= -1e-10;
    notes.push(format!("closure {closure:.1e}, norm drift {drift:.1e}, RDM trace {rdm_trace:.1e}, min eigenvalue {rdm_min:.1e}"));

    // parity of one-body, two-body and lattice eigenstates
    let grid = desk_grid();
    let mut parity_err = 0.0f64;
    for n in 0..n_cut {
        let sign = b1.parities()[n].sign();
        let v = b1.state(n);
        for m in 0..v.len() {
            parity_err = parity_err.max((v[grid.mirror(m)] - sign * v[m]).abs());
        }
    }
    for n in 0..12 {
        let sign = s.parities()[n].sign();
        let st = TwoBodyState::pair(to_complex(&s.eigenvector(n)), 0.0);
        let psi = grid_amplitudes(&st, s.basis(), &b1).unwrap();
        for i in 0..psi.nrows() {
            for j in 0..psi.ncols() {
                parity_err = parity_err.max((psi[(grid.mirror(i), grid.mirror(j))] - psi[(i, j)] * sign).norm());
                parity_err = parity_err.max((psi[(j, i)] - psi[(i, j)]).norm());
            }
        }
    }
    let refl = fb.reflection();
    // without a barrier the lattice levels are non-degenerate across parities
    let open = h.with_amplitude(0.0);
    let lat_pairs = lowest_eigs_with(&open, 6, &EigOptions { tol: 1e-11, ..EigOptions::default() }).unwrap();
    for n in 0..6 {
        let v = lat_pairs.vector(n);
        let even: f64 = (0..v.len()).map(|r| (v[refl[r]] - v[r]).powi(2)).sum();
        let odd: f64 = (0..v.len()).map(|r| (v[refl[r]] + v[r]).powi(2)).sum();
        parity_err = parity_err.max(even.min(odd).sqrt());
    }
    let parity_ok = parity_err < 1e-8;
    notes.push(format!("parity error {parity_err:.1e}"));

    // two-body continuum against the lattice; at L=231 the lattice alone is off by 6e-3 at lambda=0
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for &a in &[0.0, 10.0, 30.0] {
        let bases: Vec<SingleParticleBasis> = [30, 60, 120].iter().map(|&k| basis_at(a, k)).collect();
        for &lambda in &[0.0, 1.0] {
            let ladder: Vec<Vec<f64>> = bases.iter().map(|b| spectrum(b, lambda, b.n_cut()).energies()[..6].to_vec()).collect();
            let lattice = lattice_levels(2, 461, a, lambda, 6);
            let mut dev = 0.0f64;
            for k in 0..6 {
                let e = extrapolate([ladder[0][k], ladder[1][k], ladder[2][k]]);
                dev = dev.max((e - lattice[k]).abs());
            }
            worst = worst.max(dev);
            rows.push(format!("(a={a}, lambda={lambda}) {dev:.1e}"));
        }
    }
    let cross_ok = worst < 5e-3;
    notes.push(format!("continuum vs lattice max deviation {worst:.1e} [{}]", rows.join(", ")));
    let secs = start.elapsed().as_secs_f64();
    let pass = closure_ok && parity_ok && cross_ok;
    report(10, pass, &format!("{}; {secs:.0} s", notes.join("; ")));
    assert!(pass);
}
