//! Measurement functionals on two- and few-body states: domain detection
//! probabilities, the integrated probability current, reduced density
//! matrices and their entropy, and period extraction from time series.
//!
//! Domains: `RR` has both particles at `x > 0`, `LL` both at `x < 0` and
//! `LR` one on each side. Grid points at `x = 0` count half to each side.

use std::f64::consts::PI;

use faer::Mat;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::fock::{FockBasis, LatticeSpec};
use crate::grid::{Grid1D, SingleParticleBasis};
use crate::linalg::{self, C64};
use crate::ops::BarrierHamiltonian;
use crate::propagate::{evolve_ramp_observed, RampJob, RampOptions};
use crate::twobody::{PairBasis, TwoBodySpectrum};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainProbabilities {
    pub p_ll: f64,
    pub p_rr: f64,
    pub p_lr: f64,
}

impl DomainProbabilities {
    pub fn sum(&self) -> f64 {
        self.p_ll + self.p_rr + self.p_lr
    }
}

/// Splits a two-body probability table `P(i, j)` (summing to one) into the
/// three domains, given the right-half weight of every point.
pub fn domain_split(prob: &Mat<f64>, right: &[f64]) -> Result<DomainProbabilities> {
    let n = prob.nrows();
    if prob.ncols() != n || right.len() != n {
        return argument("probability table and weights disagree in size");
    }
    let (mut ll, mut rr, mut lr) = (0.0, 0.0, 0.0);
    for j in 0..n {
        let (rj, lj) = (right[j], 1.0 - right[j]);
        for i in 0..n {
            let p = prob[(i, j)];
            let (ri, li) = (right[i], 1.0 - right[i]);
            rr += ri * rj * p;
            ll += li * lj * p;
            lr += (ri * lj + li * rj) * p;
        }
    }
    normalized_split(ll, rr, lr)
}

fn normalized_split(ll: f64, rr: f64, lr: f64) -> Result<DomainProbabilities> {
    let total = ll + rr + lr;
    if (total - 1.0).abs() > 1e-6 {
        return argument(format!("state is not normalised (norm^2 = {total})"));
    }
    Ok(DomainProbabilities { p_ll: ll / total, p_rr: rr / total, p_lr: lr / total })
}

/// Probabilities of a two-particle grid amplitude `psi(x1, x2)` normalised
/// as `dx^2 sum |psi|^2 = 1`.
pub fn detection_probabilities(psi: &Mat<C64>, grid: &Grid1D) -> Result<DomainProbabilities> {
    domain_split(&rdm2_diag_grid(psi, grid), &grid.right_weights())
}

/// Same as [`detection_probabilities`], evaluated in the pair basis through
/// the half-line overlap matrices of the one-body states.
pub fn pair_detection_probabilities(c: &[C64], basis: &PairBasis, basis1p: &SingleParticleBasis) -> Result<DomainProbabilities> {
    let halves = HalfOverlaps::new(basis1p, basis.n_cut())?;
    let cm = basis.to_matrix(c);
    let rr = trace_sandwich(&halves.right, &cm, &halves.right);
    let ll = trace_sandwich(&halves.left, &cm, &halves.left);
    let lr = 2.0 * trace_sandwich(&halves.left, &cm, &halves.right);
    normalized_split(ll, rr, lr)
}

/// `tr(A C B C^H)` for real symmetric `A`, `B`.
fn trace_sandwich(a: &Mat<f64>, c: &Mat<C64>, b: &Mat<f64>) -> f64 {
    let n = c.nrows();
    let (cr, ci) = split_complex(c);
    let mut acc = 0.0;
    for part in [&cr, &ci] {
        let left = a * part;
        let right = b * part.transpose();
        for i in 0..n {
            for j in 0..n {
                acc += left[(i, j)] * right[(j, i)];
            }
        }
    }
    acc
}

fn split_complex(c: &Mat<C64>) -> (Mat<f64>, Mat<f64>) {
    (
        Mat::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)].re),
        Mat::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)].im),
    )
}

struct HalfOverlaps {
    right: Mat<f64>,
    left: Mat<f64>,
}

impl HalfOverlaps {
    fn new(basis1p: &SingleParticleBasis, n_cut: usize) -> Result<Self> {
        let b = basis1p.truncated(n_cut)?;
        let grid = b.grid();
        Ok(Self { right: b.weighted_overlaps(&grid.right_weights()), left: b.weighted_overlaps(&grid.left_weights()) })
    }
}

/// Right-half weights of a lattice (the centre site of an odd lattice counts
/// half).
pub fn lattice_right_weights(lattice: &LatticeSpec) -> Vec<f64> {
    lattice
        .points()
        .iter()
        .map(|&x| if x > 0.0 { 1.0 } else if x == 0.0 { 0.5 } else { 0.0 })
        .collect()
}

/// Two-particle amplitude `psi(x_i, x_j)` of an `N = 2` Fock state,
/// normalised as `dx^2 sum |psi|^2 = 1`.
pub fn fock_pair_amplitudes(state: &[C64], basis: &FockBasis, lattice: &LatticeSpec) -> Result<Mat<C64>> {
    if basis.n_particles() != 2 || state.len() != basis.dim() || basis.n_sites() != lattice.n_sites() {
        return argument("need a two-particle state on the given lattice");
    }
    let l = lattice.n_sites();
    let dx = lattice.dx();
    let mut psi = Mat::from_fn(l, l, |_, _| C64::new(0.0, 0.0));
    for (r, &c) in state.iter().enumerate() {
        let s = basis.sites_of(r);
        let (i, j) = (s[0] as usize, s[1] as usize);
        if i == j {
            psi[(i, i)] = c / dx;
        } else {
            let v = c * std::f64::consts::FRAC_1_SQRT_2 / dx;
            psi[(i, j)] = v;
            psi[(j, i)] = v;
        }
    }
    Ok(psi)
}

/// Rate at which probability leaves the `RR` domain through its two
/// boundaries, `-2 int_0^inf dx2 Im[psi* d psi/dx1](0, x2)`, with the
/// derivative at `x1 = 0` given by `derivative_row`.
pub fn rr_outflow(psi: &Mat<C64>, derivative_row: &[f64], centre: usize, right: &[f64], dx: f64) -> f64 {
    let n = psi.ncols();
    let mut acc = 0.0;
    for j in 0..n {
        if right[j] == 0.0 {
            continue;
        }
        let d: C64 = (0..psi.nrows()).map(|m| psi[(m, j)] * derivative_row[m]).sum();
        acc += right[j] * (psi[(centre, j)].conj() * d).im;
    }
    -2.0 * dx * acc
}

/// [`rr_outflow`] with spectral differentiation on an FGH grid.
pub fn fgh_outflow(psi: &Mat<C64>, grid: &Grid1D) -> f64 {
    let c = grid.center();
    rr_outflow(psi, &grid.spectral_derivative_row(c), c, &grid.right_weights(), grid.dx())
}

/// Fourth-order central difference at the centre site of a lattice.
pub fn lattice_derivative_row(lattice: &LatticeSpec) -> Result<Vec<f64>> {
    let c = lattice.center().ok_or_else(|| Error::Argument("lattice has no site at x = 0".into()))?;
    if c < 2 {
        return argument("the stencil needs at least 5 sites");
    }
    let h = lattice.dx();
    let mut row = vec![0.0; lattice.n_sites()];
    row[c - 2] = 1.0 / (12.0 * h);
    row[c - 1] = -8.0 / (12.0 * h);
    row[c + 1] = 8.0 / (12.0 * h);
    row[c + 2] = -1.0 / (12.0 * h);
    Ok(row)
}

/// [`rr_outflow`] with fourth-order differences on a lattice.
pub fn lattice_outflow(psi: &Mat<C64>, lattice: &LatticeSpec) -> Result<f64> {
    let row = lattice_derivative_row(lattice)?;
    let c = lattice.center().unwrap();
    Ok(rr_outflow(psi, &row, c, &lattice_right_weights(lattice), lattice.dx()))
}

/// [`fgh_outflow`] evaluated directly on pair coefficients.
pub fn pair_outflow(c: &[C64], basis: &PairBasis, basis1p: &SingleParticleBasis) -> Result<f64> {
    let b = basis1p.truncated(basis.n_cut())?;
    let right = b.weighted_overlaps(&b.grid().right_weights());
    let cm = basis.to_matrix(c);
    let phi0 = b.values_at_center();
    let dphi0 = b.derivatives_at_center();
    let a: Vec<C64> = (0..cm.nrows()).map(|i| (0..cm.ncols()).map(|k| cm[(i, k)] * phi0[k]).sum()).collect();
    let d: Vec<C64> = (0..cm.nrows()).map(|i| (0..cm.ncols()).map(|k| cm[(i, k)] * dphi0[k]).sum()).collect();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.len() {
        for j in 0..d.len() {
            acc += a[i].conj() * right[(i, j)] * d[j];
        }
    }
    Ok(-2.0 * acc.im)
}

/// `J(t) = int_0^t outflow dt'` by the trapezoid rule. The same integral on
/// every second sample must agree to `1e-3`, otherwise the sampling is
/// too coarse.
pub fn integrated_current(times: &[f64], outflow: &[f64]) -> Result<Vec<f64>> {
    if times.len() != outflow.len() {
        return argument("times and outflow differ in length");
    }
    let trapezoid = |idx: &[usize]| -> Vec<f64> {
        let mut acc = vec![0.0; idx.len()];
        for k in 1..idx.len() {
            let (a, b) = (idx[k - 1], idx[k]);
            acc[k] = acc[k - 1] + 0.5 * (times[b] - times[a]) * (outflow[a] + outflow[b]);
        }
        acc
    };
    let all: Vec<usize> = (0..times.len()).collect();
    let fine = trapezoid(&all);
    if times.len() >= 3 {
        let even: Vec<usize> = (0..times.len()).step_by(2).collect();
        let coarse = trapezoid(&even);
        let worst = even.iter().zip(&coarse).map(|(&i, c)| (fine[i] - c).abs()).fold(0.0, f64::max);
        if worst >= 1e-3 {
            return Err(Error::Resolution(format!(
                "current integral changes by {worst:.2e} when the sample spacing doubles"
            )));
        }
    }
    Ok(fine)
}

/// One-body reduced density matrix in an orthonormal one-body basis,
/// normalised to unit trace.
#[derive(Clone, Debug)]
pub struct ReducedDensityMatrix {
    pub matrix: Mat<C64>,
}

impl ReducedDensityMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).sum()
    }
    /// Ascending eigenvalues (occupation numbers).
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::eigvalsh_complex(&self.matrix)
    }
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }
    pub fn max_hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

/// `rho = C C^H` in the one-body eigenbasis of a pair state.
pub fn rdm1_pair(c: &[C64], basis: &PairBasis) -> ReducedDensityMatrix {
    let cm = basis.to_matrix(c);
    let n = cm.nrows();
    let matrix = Mat::from_fn(n, n, |i, j| (0..n).map(|k| cm[(i, k)] * cm[(j, k)].conj()).sum());
    ReducedDensityMatrix { matrix }
}

/// `rho(x, x') = dx int dx2 psi(x, x2) psi*(x', x2)` on grid points (an
/// orthonormal basis of discrete delta functions).
pub fn rdm1_grid(psi: &Mat<C64>, grid: &Grid1D) -> ReducedDensityMatrix {
    let dx2 = grid.dx() * grid.dx();
    let n = psi.nrows();
    let (pr, pi) = split_complex(psi);
    let rr = &pr * pr.transpose() + &pi * pi.transpose();
    let ri = &pi * pr.transpose() - &pr * pi.transpose();
    let matrix = Mat::from_fn(n, n, |i, j| C64::new(rr[(i, j)], ri[(i, j)]) * dx2);
    ReducedDensityMatrix { matrix }
}

/// `rho_ij = <a_i^dag a_j> / N` on lattice sites.
pub fn rdm1_fock(state: &[C64], basis: &FockBasis) -> Result<ReducedDensityMatrix> {
    if state.len() != basis.dim() {
        return argument("state does not match the Fock basis");
    }
    let l = basis.n_sites();
    let n = basis.n_particles() as f64;
    let mut m = Mat::from_fn(l, l, |_, _| C64::new(0.0, 0.0));
    for (r, &c) in state.iter().enumerate() {
        if c == C64::new(0.0, 0.0) {
            continue;
        }
        let sites = basis.sites_of(r);
        let mut prev = None;
        for &j in sites {
            if prev == Some(j) {
                continue;
            }
            prev = Some(j);
            let nj = sites.iter().filter(|&&s| s == j).count() as f64;
            m[(j as usize, j as usize)] += c.norm_sqr() * nj;
            for i in 0..l as u16 {
                if i == j {
                    continue;
                }
                // a_i^dag a_j |r> = f |r'>, so <r'|.|r> contributes conj(c_r') f c_r
                let (target, f) = basis.hop(r, j, i).expect("site is occupied");
                m[(i as usize, j as usize)] += state[target].conj() * c * f;
            }
        }
    }
    Ok(ReducedDensityMatrix { matrix: Mat::from_fn(l, l, |i, j| m[(i, j)] / n) })
}

/// Diagonal two-body probabilities `dx^2 |psi(x1, x2)|^2` on grid points.
pub fn rdm2_diag_grid(psi: &Mat<C64>, grid: &Grid1D) -> Mat<f64> {
    let dx2 = grid.dx() * grid.dx();
    Mat::from_fn(psi.nrows(), psi.ncols(), |i, j| psi[(i, j)].norm_sqr() * dx2)
}

/// `<a_i^dag a_j^dag a_j a_i> / (N (N - 1))`: probability of finding one
/// particle at site `i` and another at site `j`, marginalised over the rest.
pub fn rdm2_diag_fock(state: &[C64], basis: &FockBasis) -> Result<Mat<f64>> {
    let n = basis.n_particles();
    if n < 2 || state.len() != basis.dim() {
        return argument("need at least two particles and a matching state");
    }
    let l = basis.n_sites();
    let mut m = Mat::<f64>::zeros(l, l);
    let norm = (n * (n - 1)) as f64;
    let mut occ: Vec<(usize, f64)> = Vec::with_capacity(n);
    for (r, c) in state.iter().enumerate() {
        let p = c.norm_sqr();
        if p == 0.0 {
            continue;
        }
        occ.clear();
        for &s in basis.sites_of(r) {
            match occ.last_mut() {
                Some((site, k)) if *site == s as usize => *k += 1.0,
                _ => occ.push((s as usize, 1.0)),
            }
        }
        for &(i, ni) in &occ {
            for &(j, nj) in &occ {
                let pairs = if i == j { ni * (ni - 1.0) } else { ni * nj };
                m[(i, j)] += p * pairs / norm;
            }
        }
    }
    Ok(m)
}

/// Eigenvalues below this are treated as exact zeros.
pub const ENTROPY_FLOOR: f64 = 1e-12;

/// Von Neumann entropy `-sum p ln p` of the occupation numbers.
pub fn entropy(rdm: &ReducedDensityMatrix) -> Result<f64> {
    let tr = rdm.trace();
    if (tr - 1.0).abs() > 1e-6 {
        return argument(format!("density matrix has trace {tr}"));
    }
    Ok(entropy_of_occupations(&rdm.eigenvalues()?))
}

/// Occupations above one by roundoff are read as one, so a pure state gives
/// exactly zero rather than `-1e-15`.
pub fn entropy_of_occupations(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > ENTROPY_FLOOR).map(|&x| -x.min(1.0) * x.min(1.0).ln()).sum()
}

/// Peaks of a windowed DFT, strongest first. Periods use `T = 2 pi / omega`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PeriodEstimate {
    pub periods: Vec<f64>,
    pub angular_frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Bin width `2 pi / window` in angular frequency.
    pub resolution: f64,
}

impl PeriodEstimate {
    pub fn dominant_period(&self) -> Option<f64> {
        self.periods.first().copied()
    }
}

/// Hann-windowed amplitude spectrum of a uniformly sampled real series,
/// zero padded by `pad`. Returns `(angular frequencies, amplitudes)`.
fn amplitude_spectrum(series: &[f64], dt: f64, pad: usize) -> (Vec<f64>, Vec<f64>) {
    let n = series.len();
    let window: Vec<f64> = (0..n).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos()).collect();
    let wsum: f64 = window.iter().sum();
    let mean = series.iter().zip(&window).map(|(x, w)| x * w).sum::<f64>() / wsum;
    let m = (n * pad).next_power_of_two();
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> = vec![rustfft::num_complex::Complex::new(0.0, 0.0); m];
    for k in 0..n {
        buf[k].re = (series[k] - mean) * window[k];
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let half = m / 2;
    let omega = (0..=half).map(|k| 2.0 * PI * k as f64 / (m as f64 * dt)).collect();
    let amp = (0..=half).map(|k| 2.0 * buf[k].norm() / wsum).collect();
    (omega, amp)
}

/// Dominant oscillation periods of a uniformly sampled series.
pub fn extract_periods(series: &[f64], dt: f64, max_peaks: usize) -> Result<PeriodEstimate> {
    if series.len() < 8 || !(dt > 0.0) {
        return argument("need at least 8 samples and a positive spacing");
    }
    let window = dt * series.len() as f64;
    let (omega, amp) = amplitude_spectrum(series, dt, 4);
    let top = amp.iter().cloned().fold(0.0, f64::max);
    let mut sorted = amp.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let floor = (1e-3 * top).max(20.0 * median).max(1e-14);
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for k in 1..amp.len() - 1 {
        if amp[k] > floor && amp[k] >= amp[k - 1] && amp[k] > amp[k + 1] {
            // parabola through the log-magnitudes of the three bins
            let (a, b, c) = (amp[k - 1].max(1e-300).ln(), amp[k].ln(), amp[k + 1].max(1e-300).ln());
            let denom = a - 2.0 * b + c;
            let shift = if denom != 0.0 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
            let w = omega[k] + shift * (omega[1] - omega[0]);
            let height = (b - 0.25 * (a - c) * shift).exp();
            peaks.push((w, height));
        }
    }
    peaks.sort_by(|x, y| y.1.total_cmp(&x.1));
    peaks.truncate(max_peaks);
    Ok(PeriodEstimate {
        periods: peaks.iter().map(|p| 2.0 * PI / p.0).collect(),
        angular_frequencies: peaks.iter().map(|p| p.0).collect(),
        amplitudes: peaks.iter().map(|p| p.1).collect(),
        resolution: 2.0 * PI / window,
    })
}

/// Geometric over arithmetic mean of the power spectrum (DC excluded):
/// near 0 for a single tone, near 1 for white noise.
pub fn spectral_flatness(series: &[f64], dt: f64) -> f64 {
    let (_, amp) = amplitude_spectrum(series, dt, 1);
    let power: Vec<f64> = amp[1..].iter().map(|a| a * a + 1e-300).collect();
    let n = power.len() as f64;
    let geo = (power.iter().map(|p| p.ln()).sum::<f64>() / n).exp();
    let arith = power.iter().sum::<f64>() / n;
    geo / arith
}

/// `(P_LL, P_LR, P_RR)` of the three-level model for uncorrelated tunnelling
/// at Rabi frequency `delta`, starting in `RR`.
pub fn three_level_reference(delta: f64, t: f64) -> Result<(f64, f64, f64)> {
    if !(delta > 0.0) {
        return argument(format!("frequency must be positive, got {delta}"));
    }
    let (s, c) = (0.5 * delta * t).sin_cos();
    Ok((s.powi(4), 0.5 * (delta * t).sin().powi(2), c.powi(4)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodRow {
    pub lambda: f64,
    /// `2 pi / (E_2 - E_1)`; infinite for a vanishing gap.
    pub t21: f64,
    /// `2 pi / (E_1 - E_0)`.
    pub t10: f64,
}

fn period_of_gap(gap: f64, scale: f64) -> f64 {
    if gap <= 1e-14 * scale.abs().max(1.0) {
        f64::INFINITY
    } else {
        2.0 * PI / gap
    }
}

/// Gap-derived periods for each `(lambda, ascending energies)`.
pub fn periods_vs_lambda(spectra: &[(f64, Vec<f64>)]) -> Result<Vec<PeriodRow>> {
    spectra
        .iter()
        .map(|(lambda, e)| {
            if e.len() < 3 {
                return argument("need the three lowest levels");
            }
            Ok(PeriodRow { lambda: *lambda, t21: period_of_gap(e[2] - e[1], e[2]), t10: period_of_gap(e[1] - e[0], e[1]) })
        })
        .collect()
}

/// Expectation values of a two-body state restricted to a set of
/// eigenmodes of a static Hamiltonian. All time dependence sits in phases,
/// so long series cost `K^2` per sample.
#[derive(Clone, Debug)]
pub struct ModalSeries {
    energies: Vec<f64>,
    coefficients: Vec<C64>,
    p_ll: Mat<f64>,
    p_rr: Mat<f64>,
    outflow: Mat<f64>,
    captured: f64,
}

impl ModalSeries {
    /// Keeps every mode with `|c_n|^2 > min_weight`.
    pub fn new(spectrum: &TwoBodySpectrum, basis1p: &SingleParticleBasis, eigen_coefficients: &[C64], min_weight: f64) -> Result<Self> {
        let modes: Vec<usize> = (0..eigen_coefficients.len()).filter(|&n| eigen_coefficients[n].norm_sqr() > min_weight).collect();
        Self::with_modes(spectrum, basis1p, eigen_coefficients, &modes)
    }

    pub fn with_modes(spectrum: &TwoBodySpectrum, basis1p: &SingleParticleBasis, eigen_coefficients: &[C64], modes: &[usize]) -> Result<Self> {
        let basis = spectrum.basis();
        let halves = HalfOverlaps::new(basis1p, basis.n_cut())?;
        let b = basis1p.truncated(basis.n_cut())?;
        let phi0 = b.values_at_center();
        let dphi0 = b.derivatives_at_center();
        let vectors = spectrum.eigenvectors(modes);
        let mats: Vec<Mat<f64>> = (0..modes.len()).map(|k| basis.to_matrix(linalg::col(&vectors, k))).collect();
        let k = modes.len();
        let sandwich = |a: &Mat<f64>, b: &Mat<f64>| -> Mat<f64> {
            let left: Vec<Mat<f64>> = mats.iter().map(|v| a * v * b).collect();
            Mat::from_fn(k, k, |i, j| frobenius(&left[i], &mats[j]))
        };
        let p_rr = sandwich(&halves.right, &halves.right);
        let p_ll = sandwich(&halves.left, &halves.left);
        let av: Vec<Vec<f64>> = mats.iter().map(|v| mat_vec(v, &phi0)).collect();
        let dv: Vec<Vec<f64>> = mats.iter().map(|v| mat_vec(v, &dphi0)).collect();
        let outflow = Mat::from_fn(k, k, |i, j| linalg::dot(&av[i], &mat_vec(&halves.right, &dv[j])));
        let coefficients: Vec<C64> = modes.iter().map(|&n| eigen_coefficients[n]).collect();
        let captured = coefficients.iter().map(|c| c.norm_sqr()).sum();
        let energies = modes.iter().map(|&n| spectrum.energies()[n]).collect();
        Ok(Self { energies, coefficients, p_ll, p_rr, outflow, captured })
    }

    pub fn n_modes(&self) -> usize {
        self.energies.len()
    }
    /// Norm carried by the retained modes.
    pub fn captured_weight(&self) -> f64 {
        self.captured
    }

    fn phased(&self, t: f64) -> Vec<C64> {
        self.coefficients.iter().zip(&self.energies).map(|(c, e)| c * C64::from_polar(1.0, -e * t)).collect()
    }

    fn quadratic(m: &Mat<f64>, c: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..c.len() {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..c.len() {
                row += c[j] * m[(i, j)];
            }
            acc += c[i].conj() * row;
        }
        acc
    }

    /// Domain probabilities at time `t`, normalised by the captured weight.
    pub fn probabilities(&self, t: f64) -> DomainProbabilities {
        let c = self.phased(t);
        let rr = Self::quadratic(&self.p_rr, &c).re / self.captured;
        let ll = Self::quadratic(&self.p_ll, &c).re / self.captured;
        DomainProbabilities { p_ll: ll, p_rr: rr, p_lr: 1.0 - ll - rr }
    }

    /// Outflow rate from `RR` at time `t` (see [`rr_outflow`]).
    pub fn outflow(&self, t: f64) -> f64 {
        let c = self.phased(t);
        -2.0 * Self::quadratic(&self.outflow, &c).im / self.captured
    }

    /// Closed-form time integral of [`ModalSeries::outflow`] from 0 to `t`.
    pub fn integrated_current_exact(&self, t: f64) -> f64 {
        let k = self.n_modes();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..k {
            for j in 0..k {
                let w = self.energies[i] - self.energies[j];
                let z = self.coefficients[i].conj() * self.coefficients[j] * self.outflow[(i, j)];
                // int_0^t exp(i w s) ds
                let integral = if (w * t).abs() < 1e-12 { C64::new(t, 0.0) } else { (C64::from_polar(1.0, w * t) - 1.0) / C64::new(0.0, w) };
                acc += z * integral;
            }
        }
        -2.0 * acc.im / self.captured
    }
}

fn frobenius(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(i, j)];
        }
    }
    acc
}

fn mat_vec(m: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum()).collect()
}

/// Entropy `S(T_ramp, t)` on a rectangular grid of ramp durations and
/// sample times.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EntropyMap {
    pub t_ramps: Vec<f64>,
    pub sample_times: Vec<f64>,
    /// `values[r][k]` belongs to `t_ramps[r]` and `sample_times[k]`; rows of
    /// failed runs are empty.
    pub values: Vec<Vec<f64>>,
    pub failures: Vec<(f64, String)>,
}

impl EntropyMap {
    pub fn triples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.t_ramps
            .iter()
            .zip(&self.values)
            .flat_map(move |(&tr, row)| self.sample_times.iter().zip(row).map(move |(&t, &s)| (tr, t, s)))
    }
}

/// Runs one ramp per duration (in parallel) and records the one-body
/// entropy at every sample time. Failed runs are listed, not fatal.
pub fn entropy_map(
    hamiltonian: &dyn BarrierHamiltonian,
    initial_state: &[C64],
    a_max: f64,
    t_ramps: &[f64],
    sample_times: &[f64],
    rdm: &(dyn Fn(&[C64]) -> Result<ReducedDensityMatrix> + Sync),
    opts: &RampOptions,
) -> EntropyMap {
    use rayon::prelude::*;
    let t_end = sample_times.last().copied().unwrap_or(0.0);
    let opts = RampOptions { keep_states: false, ..*opts };
    let rows: Vec<Result<Vec<f64>>> = t_ramps
        .par_iter()
        .map(|&t_ramp| {
            let job = RampJob {
                hamiltonian,
                initial_state: initial_state.to_vec(),
                spec: crate::grid::PotentialSpec::new(a_max, t_ramp)?,
                t_start: 0.0,
                t_end,
                sample_times: sample_times.to_vec(),
            };
            let mut row = Vec::with_capacity(sample_times.len());
            evolve_ramp_observed(&job, &opts, &mut |_, _, psi| {
                row.push(entropy(&rdm(psi)?)?);
                Ok(())
            })?;
            Ok(row)
        })
        .collect();
    let mut map = EntropyMap { t_ramps: t_ramps.to_vec(), sample_times: sample_times.to_vec(), ..EntropyMap::default() };
    for (&tr, row) in t_ramps.iter().zip(rows) {
        match row {
            Ok(r) => map.values.push(r),
            Err(e) => {
                map.values.push(Vec::new());
                map.failures.push((tr, e.to_string()));
            }
        }
    }
    map
}
