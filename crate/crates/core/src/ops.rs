//! Operator abstractions shared by the iterative eigensolvers and the
//! propagators.

use crate::linalg::C64;

/// Real symmetric linear operator, applied matrix-free.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Real symmetric Hamiltonian whose only time dependence is the barrier
/// amplitude `A(t)`.
pub trait BarrierHamiltonian: Sync {
    fn dim(&self) -> usize;
    /// `y = H(A) x`.
    fn apply_real(&self, amplitude: f64, x: &[f64], y: &mut [f64]);
    /// `y = H(A) x` for a complex state; real and imaginary parts are
    /// independent because H is real.
    fn apply(&self, amplitude: f64, x: &[C64], y: &mut [C64]) {
        let n = x.len();
        let re: Vec<f64> = x.iter().map(|z| z.re).collect();
        let im: Vec<f64> = x.iter().map(|z| z.im).collect();
        let mut yr = vec![0.0; n];
        let mut yi = vec![0.0; n];
        self.apply_real(amplitude, &re, &mut yr);
        self.apply_real(amplitude, &im, &mut yi);
        for k in 0..n {
            y[k] = C64::new(yr[k], yi[k]);
        }
    }
}

/// A [`BarrierHamiltonian`] frozen at one amplitude.
pub struct Frozen<'a, H: ?Sized> {
    pub hamiltonian: &'a H,
    pub amplitude: f64,
}

impl<H: BarrierHamiltonian + ?Sized> SymmetricOperator for Frozen<'_, H> {
    fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.hamiltonian.apply_real(self.amplitude, x, y);
    }
}

/// Dense matrices act as operators too, which is handy for tests.
impl SymmetricOperator for faer::Mat<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..self.ncols()).map(|j| self[(i, j)] * x[j]).sum();
        }
    }
}
