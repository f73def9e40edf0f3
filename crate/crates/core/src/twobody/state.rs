use faer::Mat;

use super::{PairBasis, TwoBodySpectrum};
use crate::error::{argument, Result};
use crate::grid::SingleParticleBasis;
use crate::linalg::{self, C64};

#[derive(Clone, Debug, PartialEq)]
pub enum Coefficients {
    /// Amplitudes on the eigenstates of a [`TwoBodySpectrum`], in eigenvalue order.
    Eigen(Vec<C64>),
    /// Amplitudes on the pair basis.
    Pair(Vec<C64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoBodyState {
    pub coefficients: Coefficients,
    pub time: f64,
}

impl TwoBodyState {
    pub fn pair(coefficients: Vec<C64>, time: f64) -> Self {
        Self { coefficients: Coefficients::Pair(coefficients), time }
    }

    pub fn eigen(coefficients: Vec<C64>, time: f64) -> Self {
        Self { coefficients: Coefficients::Eigen(coefficients), time }
    }

    pub fn norm(&self) -> f64 {
        match &self.coefficients {
            Coefficients::Eigen(c) | Coefficients::Pair(c) => linalg::cnorm(c),
        }
    }

    pub fn to_pair(&self, spectrum: &TwoBodySpectrum) -> Vec<C64> {
        match &self.coefficients {
            Coefficients::Pair(c) => c.clone(),
            Coefficients::Eigen(c) => spectrum.expand(c),
        }
    }

    pub fn to_eigen(&self, spectrum: &TwoBodySpectrum) -> Vec<C64> {
        match &self.coefficients {
            Coefficients::Pair(c) => spectrum.project(c),
            Coefficients::Eigen(c) => c.clone(),
        }
    }

    /// Pair-basis amplitudes; fails for states held in an eigenbasis.
    pub fn pair_coefficients(&self) -> Result<&[C64]> {
        match &self.coefficients {
            Coefficients::Pair(c) => Ok(c),
            Coefficients::Eigen(_) => argument("state must be in the pair representation"),
        }
    }
}

/// Both bosons in the superposition `(psi_2n + psi_2n+1)/sqrt(2)`, which
/// sits in the right well.
pub fn localized_initial_state(basis: &PairBasis, n: usize) -> Result<TwoBodyState> {
    if 2 * n + 1 >= basis.n_cut() {
        return argument(format!("localized state {n} needs n_cut > {}, have {}", 2 * n + 1, basis.n_cut()));
    }
    let mut c = vec![C64::new(0.0, 0.0); basis.dim()];
    let (lo, hi) = (2 * n, 2 * n + 1);
    c[basis.index_of(lo, lo).unwrap()] = C64::new(0.5, 0.0);
    c[basis.index_of(hi, hi).unwrap()] = C64::new(0.5, 0.0);
    c[basis.index_of(hi, lo).unwrap()] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Ok(TwoBodyState::pair(c, 0.0))
}

/// `(E_n, |c_n|^2)` for every eigenstate, in ascending energy.
pub fn expansion_coefficients(state: &TwoBodyState, spectrum: &TwoBodySpectrum) -> Vec<(f64, f64)> {
    let c = state.to_eigen(spectrum);
    spectrum.energies().iter().zip(&c).map(|(&e, z)| (e, z.norm_sqr())).collect()
}

/// Exact evolution under the static Hamiltonian of `spectrum`. The result
/// is held in the eigenbasis.
pub fn evolve_spectral(state: &TwoBodyState, spectrum: &TwoBodySpectrum, t: f64) -> TwoBodyState {
    let c = state.to_eigen(spectrum);
    let out = c
        .iter()
        .zip(spectrum.energies())
        .map(|(z, &e)| z * C64::from_polar(1.0, -e * t))
        .collect();
    TwoBodyState::eigen(out, state.time + t)
}

/// `psi(x1, x2)` on the full grid.
pub fn grid_amplitudes(state: &TwoBodyState, basis: &PairBasis, basis1p: &SingleParticleBasis) -> Result<Mat<C64>> {
    let c = state.pair_coefficients()?;
    amplitudes_from_pairs(c, basis, basis1p)
}

pub(crate) fn amplitudes_from_pairs(c: &[C64], basis: &PairBasis, basis1p: &SingleParticleBasis) -> Result<Mat<C64>> {
    if c.len() != basis.dim() || basis.n_cut() > basis1p.n_cut() {
        return argument("state, pair basis and one-body basis are inconsistent");
    }
    let n_cut = basis.n_cut();
    let cm = basis.to_matrix(c);
    let phi = basis1p.states().subcols(0, n_cut);
    let re = Mat::from_fn(n_cut, n_cut, |i, j| cm[(i, j)].re);
    let im = Mat::from_fn(n_cut, n_cut, |i, j| cm[(i, j)].im);
    let pr = phi * &re * phi.transpose();
    let pi = phi * &im * phi.transpose();
    Ok(Mat::from_fn(pr.nrows(), pr.ncols(), |i, j| C64::new(pr[(i, j)], pi[(i, j)])))
}

/// `|psi(x1, x2)|^2` on the full grid.
pub fn grid_density(state: &TwoBodyState, basis: &PairBasis, basis1p: &SingleParticleBasis) -> Result<Mat<f64>> {
    let psi = grid_amplitudes(state, basis, basis1p)?;
    Ok(Mat::from_fn(psi.nrows(), psi.ncols(), |i, j| psi[(i, j)].norm_sqr()))
}
