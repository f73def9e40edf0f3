//! Exact two-boson problem in the basis of symmetrised products of
//! single-particle FGH eigenstates.
//!
//! A pair state `sum c_nm |n m>` is equivalently stored as a real symmetric
//! (or complex symmetric) coefficient matrix `C` with `C_nn = c_nn` and
//! `C_nm = C_mn = c_nm / sqrt(2)`, so that the two-particle amplitude is
//! `psi(x1, x2) = phi(x1)^T C phi(x2)` and `|c|_2 = |C|_F`.

mod hamiltonian;
mod operator;
mod state;
mod tensor;

pub use hamiltonian::{assemble_h2p, diagonalize_2p, H2p, H2pBlock, H2pMatrix, TwoBodySpectrum};
pub use operator::PairOperator;
pub use state::{
    evolve_spectral, expansion_coefficients, grid_amplitudes, grid_density, localized_initial_state,
    Coefficients, TwoBodyState,
};
pub use tensor::{interaction_tensor, InteractionTensor};

use faer::Mat;
use std::ops::Mul;

use crate::error::{argument, Result};
use crate::grid::{Parity, SingleParticleBasis};

/// Pairs `(n, m)` with `n >= m`, enumerated lexicographically by `(m, n)`:
/// `(0,0), (1,0), ..., (n_cut-1,0), (1,1), (2,1), ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairBasis {
    n_cut: usize,
    pairs: Vec<(usize, usize)>,
}

impl PairBasis {
    pub fn new(n_cut: usize) -> Result<Self> {
        build_pair_basis(n_cut)
    }
    pub fn n_cut(&self) -> usize {
        self.n_cut
    }
    pub fn dim(&self) -> usize {
        self.pairs.len()
    }
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
    pub fn pair(&self, index: usize) -> (usize, usize) {
        self.pairs[index]
    }

    /// Linear index of the unordered pair `{n, m}`.
    pub fn index_of(&self, n: usize, m: usize) -> Option<usize> {
        let (n, m) = if n >= m { (n, m) } else { (m, n) };
        (n < self.n_cut).then(|| pair_index(self.n_cut, n, m))
    }

    pub fn pair_parities(&self, basis1p: &SingleParticleBasis) -> Vec<Parity> {
        let p = basis1p.parities();
        self.pairs.iter().map(|&(n, m)| p[n].times(p[m])).collect()
    }

    /// Coefficient matrix of a pair vector.
    pub fn to_matrix<T>(&self, v: &[T]) -> Mat<T>
    where
        T: Copy + Default + Mul<f64, Output = T>,
    {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut c = Mat::from_fn(self.n_cut, self.n_cut, |_, _| T::default());
        for (k, &(n, m)) in self.pairs.iter().enumerate() {
            if n == m {
                c[(n, n)] = v[k];
            } else {
                c[(n, m)] = v[k] * s;
                c[(m, n)] = v[k] * s;
            }
        }
        c
    }

    /// Pair vector of a symmetric coefficient matrix (only the lower
    /// triangle is read).
    pub fn from_matrix<T>(&self, c: &Mat<T>) -> Vec<T>
    where
        T: Copy + Mul<f64, Output = T>,
    {
        let r = std::f64::consts::SQRT_2;
        self.pairs
            .iter()
            .map(|&(n, m)| if n == m { c[(n, n)] } else { c[(n, m)] * r })
            .collect()
    }
}

#[inline]
fn pair_index(n_cut: usize, n: usize, m: usize) -> usize {
    m * n_cut - m * m.saturating_sub(1) / 2 + (n - m)
}

pub fn build_pair_basis(n_cut: usize) -> Result<PairBasis> {
    if n_cut == 0 {
        return argument("n_cut must be >= 1");
    }
    let pairs = (0..n_cut).flat_map(|m| (m..n_cut).map(move |n| (n, m))).collect();
    Ok(PairBasis { n_cut, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn dimensions() {
        assert_eq!(build_pair_basis(330).unwrap().dim(), 54615);
        assert_eq!(build_pair_basis(1).unwrap().dim(), 1);
        let b = build_pair_basis(4).unwrap();
        assert_eq!(b.dim(), 10);
        assert!(build_pair_basis(0).is_err());
    }

    #[test]
    fn index_is_a_bijection() {
        let b = build_pair_basis(17).unwrap();
        for (k, &(n, m)) in b.pairs().iter().enumerate() {
            assert!(n >= m);
            assert_eq!(b.index_of(n, m), Some(k));
            assert_eq!(b.index_of(m, n), Some(k));
        }
        assert_eq!(b.index_of(17, 0), None);
        let mut sorted = b.pairs().to_vec();
        sorted.sort_by_key(|&(n, m)| (m, n));
        assert_eq!(sorted, b.pairs());
    }

    #[test]
    fn matrix_form_is_isometric() {
        let b = build_pair_basis(6).unwrap();
        let v: Vec<Complex64> = (0..b.dim()).map(|k| Complex64::new(k as f64 * 0.1, 1.0 - k as f64 * 0.03)).collect();
        let c = b.to_matrix(&v);
        let fro: f64 = (0..6).flat_map(|i| (0..6).map(move |j| (i, j))).map(|(i, j)| c[(i, j)].norm_sqr()).sum();
        let nrm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        assert!((fro - nrm).abs() < 1e-12);
        let back = b.from_matrix(&c);
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
