use faer::Mat;

use super::{build_pair_basis, PairBasis};
use crate::error::{argument, Result};
use crate::grid::{barrier_shape, SingleParticleBasis};
use crate::ops::BarrierHamiltonian;

/// Matrix-free two-particle Hamiltonian on the pair basis.
///
/// Works on the coefficient matrix `C`:
/// `HC = K C + C K + lambda dx Phi^T diag(f) Phi` with
/// `K = diag(E) + (A - A_ref) G`, `G` the barrier-shape overlaps and
/// `f(x) = psi(x, x)`. The one-body basis is fixed at `A_ref`, so the same
/// operator serves any barrier amplitude (accurate while the truncated
/// basis still resolves the state).
#[derive(Clone, Debug)]
pub struct PairOperator {
    basis: PairBasis,
    energies: Vec<f64>,
    phi: Mat<f64>,
    barrier: Mat<f64>,
    reference_amplitude: f64,
    lambda: f64,
    dx: f64,
}

impl PairOperator {
    pub fn new(basis1p: &SingleParticleBasis, n_cut: usize, lambda: f64) -> Result<Self> {
        if n_cut == 0 || n_cut > basis1p.n_cut() {
            return argument(format!("n_cut must be in 1..={}, got {n_cut}", basis1p.n_cut()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return argument(format!("lambda must be >= 0, got {lambda}"));
        }
        let trimmed = basis1p.truncated(n_cut)?;
        let shape: Vec<f64> = trimmed.grid().points().iter().map(|&x| barrier_shape(x)).collect();
        Ok(Self {
            basis: build_pair_basis(n_cut)?,
            energies: trimmed.energies().to_vec(),
            phi: trimmed.states().to_owned(),
            barrier: trimmed.weighted_overlaps(&shape),
            reference_amplitude: basis1p.amplitude(),
            lambda,
            dx: trimmed.grid().dx(),
        })
    }

    pub fn basis(&self) -> &PairBasis {
        &self.basis
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn reference_amplitude(&self) -> f64 {
        self.reference_amplitude
    }

    /// `H C` for a real symmetric coefficient matrix.
    pub fn apply_matrix(&self, amplitude: f64, c: &Mat<f64>) -> Mat<f64> {
        let n = c.nrows();
        let shift = amplitude - self.reference_amplitude;
        let kc = if shift == 0.0 {
            Mat::from_fn(n, n, |i, j| self.energies[i] * c[(i, j)])
        } else {
            let mut kc = &self.barrier * c * shift;
            for j in 0..n {
                for i in 0..n {
                    kc[(i, j)] += self.energies[i] * c[(i, j)];
                }
            }
            kc
        };
        let mut out = Mat::from_fn(n, n, |i, j| kc[(i, j)] + kc[(j, i)]);
        if self.lambda != 0.0 {
            let y = &self.phi * c;
            let ng = self.phi.nrows();
            let scale = self.lambda * self.dx;
            let z = Mat::from_fn(ng, n, |x, j| {
                let f: f64 = (0..n).map(|k| y[(x, k)] * self.phi[(x, k)]).sum();
                scale * f * self.phi[(x, j)]
            });
            out += self.phi.transpose() * &z;
        }
        out
    }
}

impl BarrierHamiltonian for PairOperator {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn apply_real(&self, amplitude: f64, x: &[f64], y: &mut [f64]) {
        let c = self.basis.to_matrix(x);
        let hc = self.apply_matrix(amplitude, &c);
        y.copy_from_slice(&self.basis.from_matrix(&hc));
    }
}
