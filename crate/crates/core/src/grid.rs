//! Uniform spatial grid, the ramped double-well potential and the Fourier
//! grid Hamiltonian for a single particle.
//!
//! All quantities are in harmonic-oscillator units (ħ = m = ω = 1).

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::linalg;

/// Symmetric, cell-centred grid on `[-x_max, x_max)` with an odd number of
/// points. Point `m` sits at `x_min + (m + 1/2) dx`, so the middle point is
/// exactly `x = 0` and `x_m = -x_{n-1-m}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid1D {
    x_max: f64,
    n_grid: usize,
    dx: f64,
    dp: f64,
    points: Vec<f64>,
}

impl Grid1D {
    pub fn new(x_max: f64, n_grid: usize) -> Result<Self> {
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(Error::Construction(format!("x_max must be positive, got {x_max}")));
        }
        if n_grid % 2 == 0 || n_grid < 3 {
            return Err(Error::Construction(format!(
                "n_grid must be odd and >= 3, got {n_grid}"
            )));
        }
        let length = 2.0 * x_max;
        let dx = length / n_grid as f64;
        let dp = 2.0 * std::f64::consts::PI / length;
        let c = (n_grid - 1) / 2;
        // integer offsets from the centre keep x = 0 exact and the grid mirror-symmetric
        let points = (0..n_grid).map(|m| (m as f64 - c as f64) * dx).collect();
        Ok(Self { x_max, n_grid, dx, dp, points })
    }

    pub fn x_min(&self) -> f64 {
        -self.x_max
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn n_grid(&self) -> usize {
        self.n_grid
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dp(&self) -> f64 {
        self.dp
    }
    pub fn points(&self) -> &[f64] {
        &self.points
    }
    /// Index of the point at `x = 0`.
    pub fn center(&self) -> usize {
        (self.n_grid - 1) / 2
    }
    /// Index of the mirror image `-x_m`.
    pub fn mirror(&self, m: usize) -> usize {
        self.n_grid - 1 - m
    }

    /// Quadrature weights of the half line `x > 0`; the `x = 0` point counts
    /// one half.
    pub fn right_weights(&self) -> Vec<f64> {
        let c = self.center();
        (0..self.n_grid)
            .map(|m| match m.cmp(&c) {
                std::cmp::Ordering::Less => 0.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Greater => 1.0,
            })
            .collect()
    }

    pub fn left_weights(&self) -> Vec<f64> {
        self.right_weights().into_iter().map(|w| 1.0 - w).collect()
    }

    /// `dx * H_mn` kinetic coefficients as a function of `|m - n|`.
    fn kinetic_row_scaled(&self) -> Vec<f64> {
        let n = self.n_grid;
        let lmax = (n - 1) / 2;
        let two_pi = 2.0 * std::f64::consts::PI;
        (0..n)
            .map(|d| {
                let mut acc = 0.0;
                for l in 1..=lmax {
                    let p = l as f64 * self.dp;
                    let phase = two_pi * ((l * d) % n) as f64 / n as f64;
                    acc += p * p / n as f64 * phase.cos();
                }
                acc
            })
            .collect()
    }

    /// Row `j` of the trigonometric-interpolation derivative matrix, i.e.
    /// `f'(x_j) = sum_m D_jm f(x_m)`.
    pub fn spectral_derivative_row(&self, j: usize) -> Vec<f64> {
        let n = self.n_grid;
        let lmax = (n - 1) / 2;
        let two_pi = 2.0 * std::f64::consts::PI;
        (0..n)
            .map(|m| {
                let d = (j as i64 - m as i64).rem_euclid(n as i64) as usize;
                let mut acc = 0.0;
                for l in 1..=lmax {
                    let phase = two_pi * ((l * d) % n) as f64 / n as f64;
                    acc += l as f64 * self.dp * phase.sin();
                }
                -2.0 / n as f64 * acc
            })
            .collect()
    }
}

/// Barrier amplitude and ramp duration of the double well
/// `V(x, t) = x^2/2 + A(t) exp(-x^2/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub a_max: f64,
    /// Zero means the barrier stands at `a_max` for all `t >= 0`.
    pub t_ramp: f64,
}

impl PotentialSpec {
    pub fn new(a_max: f64, t_ramp: f64) -> Result<Self> {
        if !(a_max >= 0.0 && a_max.is_finite()) {
            return argument(format!("a_max must be >= 0, got {a_max}"));
        }
        if !(t_ramp >= 0.0 && t_ramp.is_finite()) {
            return argument(format!("t_ramp must be >= 0, got {t_ramp}"));
        }
        Ok(Self { a_max, t_ramp })
    }

    pub fn fixed(a_max: f64) -> Result<Self> {
        Self::new(a_max, 0.0)
    }

    pub fn amplitude(&self, t: f64) -> Result<f64> {
        ramp_amplitude(self, t)
    }

    pub fn value(&self, x: f64, t: f64) -> Result<f64> {
        potential_value(self, x, t)
    }
}

/// Barrier profile multiplying the amplitude.
#[inline]
pub fn barrier_shape(x: f64) -> f64 {
    (-0.5 * x * x).exp()
}

#[inline]
pub fn potential_at_amplitude(x: f64, amplitude: f64) -> f64 {
    0.5 * x * x + amplitude * barrier_shape(x)
}

pub fn ramp_amplitude(spec: &PotentialSpec, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    if spec.t_ramp == 0.0 || t >= spec.t_ramp {
        Ok(spec.a_max)
    } else {
        Ok(spec.a_max * t / spec.t_ramp)
    }
}

pub fn potential_value(spec: &PotentialSpec, x: f64, t: f64) -> Result<f64> {
    Ok(potential_at_amplitude(x, ramp_amplitude(spec, t)?))
}

/// Positions of the potential minima for a given barrier amplitude.
pub fn potential_minima(amplitude: f64) -> Vec<f64> {
    if amplitude < 1.0 {
        vec![0.0]
    } else {
        let x = (2.0 * amplitude.ln()).sqrt();
        vec![-x, x]
    }
}

/// Dense FGH Hamiltonian `H_mn` (before multiplication by `dx`).
pub fn fgh_hamiltonian(grid: &Grid1D, spec: &PotentialSpec, t: f64) -> Result<Mat<f64>> {
    let a = spec.amplitude(t)?;
    let kin = grid.kinetic_row_scaled();
    let n = grid.n_grid();
    let dx = grid.dx();
    let pts = grid.points();
    let mut h = Mat::from_fn(n, n, |i, j| kin[i.abs_diff(j)] / dx);
    for m in 0..n {
        h[(m, m)] += potential_at_amplitude(pts[m], a) / dx;
    }
    Ok(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn times(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

/// Lowest `n_cut` FGH eigenpairs. States are real, grid-sampled and
/// normalised so that `dx * sum_k psi_n(x_k)^2 = 1`.
#[derive(Clone, Debug)]
pub struct SingleParticleBasis {
    grid: Grid1D,
    amplitude: f64,
    energies: Vec<f64>,
    states: Mat<f64>,
    parities: Vec<Parity>,
    unconfined: usize,
}

impl SingleParticleBasis {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }
    /// Barrier amplitude the basis was computed at.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
    pub fn n_cut(&self) -> usize {
        self.energies.len()
    }
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }
    pub fn parities(&self) -> &[Parity] {
        &self.parities
    }
    pub fn states(&self) -> &Mat<f64> {
        &self.states
    }
    pub fn state(&self, n: usize) -> &[f64] {
        linalg::col(&self.states, n)
    }
    /// Number of requested states at or above `V(x_max)`; their convergence
    /// is not controlled by the box.
    pub fn unconfined(&self) -> usize {
        self.unconfined
    }
    pub fn confinement_warning(&self) -> bool {
        self.unconfined > 0
    }

    pub fn truncated(&self, n_cut: usize) -> Result<Self> {
        if n_cut == 0 || n_cut > self.n_cut() {
            return argument(format!("cannot truncate {} states to {n_cut}", self.n_cut()));
        }
        let vmax = potential_at_amplitude(self.grid.x_max(), self.amplitude);
        Ok(Self {
            grid: self.grid.clone(),
            amplitude: self.amplitude,
            energies: self.energies[..n_cut].to_vec(),
            states: self.states.subcols(0, n_cut).to_owned(),
            parities: self.parities[..n_cut].to_vec(),
            unconfined: self.energies[..n_cut].iter().filter(|&&e| e >= vmax).count(),
        })
    }

    /// Matrix `dx * sum_m w(x_m) psi_i(x_m) psi_j(x_m)`.
    pub fn weighted_overlaps(&self, weights: &[f64]) -> Mat<f64> {
        let n = self.n_cut();
        let dx = self.grid.dx();
        let weighted = Mat::from_fn(self.grid.n_grid(), n, |m, j| weights[m] * self.states[(m, j)] * dx);
        let mut out = self.states.transpose() * &weighted;
        symmetrize(&mut out);
        out
    }

    /// Values of every basis state at `x = 0`.
    pub fn values_at_center(&self) -> Vec<f64> {
        let c = self.grid.center();
        (0..self.n_cut()).map(|j| self.states[(c, j)]).collect()
    }

    /// Spectral derivative of every basis state at `x = 0`.
    pub fn derivatives_at_center(&self) -> Vec<f64> {
        let row = self.grid.spectral_derivative_row(self.grid.center());
        (0..self.n_cut()).map(|j| linalg::dot(&row, self.state(j))).collect()
    }
}

pub(crate) fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Diagonalises the FGH Hamiltonian at time `t` and keeps the lowest
/// `n_cut` states. The mirror symmetry of the grid is used to split the
/// problem into exactly even and odd blocks, which fixes the parity of
/// (quasi-)degenerate doublets.
pub fn solve_1p(grid: &Grid1D, spec: &PotentialSpec, n_cut: usize, t: f64) -> Result<SingleParticleBasis> {
    let a = spec.amplitude(t)?;
    solve_1p_at(grid, a, n_cut)
}

/// [`solve_1p`] at a fixed barrier amplitude.
pub fn solve_1p_at(grid: &Grid1D, amplitude: f64, n_cut: usize) -> Result<SingleParticleBasis> {
    let n = grid.n_grid();
    if n_cut == 0 || n_cut > n {
        return argument(format!("n_cut must be in 1..={n}, got {n_cut}"));
    }
    let kin = grid.kinetic_row_scaled();
    let pts = grid.points();
    let c = grid.center();
    let v: Vec<f64> = pts.iter().map(|&x| potential_at_amplitude(x, amplitude)).collect();
    let sqrt2 = std::f64::consts::SQRT_2;

    let even = Mat::from_fn(c + 1, c + 1, |i, j| match (i, j) {
        (0, 0) => kin[0] + v[c],
        (0, k) | (k, 0) => sqrt2 * kin[k],
        (k, l) => kin[k.abs_diff(l)] + kin[k + l] + if k == l { v[c + k] } else { 0.0 },
    });
    let odd = Mat::from_fn(c, c, |i, j| {
        let (k, l) = (i + 1, j + 1);
        kin[k.abs_diff(l)] - kin[k + l] + if k == l { v[c + k] } else { 0.0 }
    });
    let (we, ve) = linalg::eigh(&even)?;
    let (wo, vo) = linalg::eigh(&odd)?;

    let mut order: Vec<(f64, Parity, usize)> = we
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, Parity::Even, i))
        .chain(wo.iter().enumerate().map(|(i, &e)| (e, Parity::Odd, i)))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1 as u8).cmp(&(b.1 as u8))));
    order.truncate(n_cut);

    let scale = 1.0 / grid.dx().sqrt();
    let mut states = Mat::<f64>::zeros(n, n_cut);
    for (col, &(_, parity, idx)) in order.iter().enumerate() {
        match parity {
            Parity::Even => {
                states[(c, col)] = ve[(0, idx)] * scale;
                for k in 1..=c {
                    let val = ve[(k, idx)] / sqrt2 * scale;
                    states[(c + k, col)] = val;
                    states[(c - k, col)] = val;
                }
            }
            Parity::Odd => {
                for k in 1..=c {
                    let val = vo[(k - 1, idx)] / sqrt2 * scale;
                    states[(c + k, col)] = val;
                    states[(c - k, col)] = -val;
                }
            }
        }
        fix_sign(&mut states, col);
    }

    let vmax = potential_at_amplitude(grid.x_max(), amplitude);
    let energies: Vec<f64> = order.iter().map(|o| o.0).collect();
    let unconfined = energies.iter().filter(|&&e| e >= vmax).count();
    Ok(SingleParticleBasis {
        grid: grid.clone(),
        amplitude,
        energies,
        states,
        parities: order.iter().map(|o| o.1).collect(),
        unconfined,
    })
}

/// Scanning inwards from `x_max`, the first amplitude that is not numerical
/// noise is made positive. Even and odd partners then agree in sign on the
/// right, so their sum is localised in the right well.
fn fix_sign(states: &mut Mat<f64>, col: usize) {
    let n = states.nrows();
    let max = (0..n).map(|m| states[(m, col)].abs()).fold(0.0, f64::max);
    let threshold = 1e-8 * max;
    if let Some(m) = (0..n).rev().find(|&m| states[(m, col)].abs() > threshold) {
        if states[(m, col)] < 0.0 {
            for k in 0..n {
                states[(k, col)] = -states[(k, col)];
            }
        }
    }
}
