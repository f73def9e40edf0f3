use faer::Mat;
use rayon::prelude::*;

use super::{build_pair_basis, InteractionTensor, PairBasis};
use crate::error::{argument, Result};
use crate::grid::{Parity, SingleParticleBasis};
use crate::linalg::{self, C64};

/// One parity sector of the two-particle Hamiltonian.
#[derive(Clone, Debug)]
pub enum H2pMatrix {
    /// Non-interacting case: the pair basis already diagonalises H.
    Diagonal(Vec<f64>),
    Dense(Mat<f64>),
}

#[derive(Clone, Debug)]
pub struct H2pBlock {
    pub parity: Parity,
    /// Pair-basis indices spanned by the block, ascending.
    pub indices: Vec<usize>,
    pub matrix: H2pMatrix,
}

/// Two-particle Hamiltonian in the pair basis, stored per exchange-parity
/// sector `p_n * p_m` (matrix elements between sectors vanish).
#[derive(Clone, Debug)]
pub struct H2p {
    basis: PairBasis,
    lambda: f64,
    amplitude: f64,
    blocks: Vec<H2pBlock>,
}

impl H2p {
    pub fn basis(&self) -> &PairBasis {
        &self.basis
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
    pub fn blocks(&self) -> &[H2pBlock] {
        &self.blocks
    }
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Full matrix in pair-basis order.
    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.dim();
        let mut out = Mat::<f64>::zeros(n, n);
        for block in &self.blocks {
            match &block.matrix {
                H2pMatrix::Diagonal(d) => {
                    for (k, &i) in block.indices.iter().enumerate() {
                        out[(i, i)] = d[k];
                    }
                }
                H2pMatrix::Dense(m) => {
                    for (b, &j) in block.indices.iter().enumerate() {
                        for (a, &i) in block.indices.iter().enumerate() {
                            out[(i, j)] = m[(a, b)];
                        }
                    }
                }
            }
        }
        out
    }
}

#[inline]
fn pair_factor(n: usize, m: usize, n2: usize, m2: usize) -> f64 {
    match (n == m, n2 == m2) {
        (true, true) => 1.0,
        (false, false) => 2.0,
        _ => std::f64::consts::SQRT_2,
    }
}

/// Matrix element between pair states `(n, m)` and `(n2, m2)`.
#[inline]
pub(crate) fn h2p_element(e: &[f64], w: &InteractionTensor, a: (usize, usize), b: (usize, usize)) -> f64 {
    let diag = if a == b { e[a.0] + e[a.1] } else { 0.0 };
    diag + pair_factor(a.0, a.1, b.0, b.1) * w.get(a.0, a.1, b.0, b.1)
}

pub fn assemble_h2p(basis1p: &SingleParticleBasis, w: &InteractionTensor) -> Result<H2p> {
    let n_cut = w.n_cut();
    if n_cut > basis1p.n_cut() {
        return argument(format!(
            "tensor has n_cut = {n_cut} but the one-body basis only {}",
            basis1p.n_cut()
        ));
    }
    let basis = build_pair_basis(n_cut)?;
    let parities = basis.pair_parities(basis1p);
    let e = &basis1p.energies()[..n_cut];

    let mut blocks = Vec::new();
    for parity in [Parity::Even, Parity::Odd] {
        let indices: Vec<usize> = (0..basis.dim()).filter(|&i| parities[i] == parity).collect();
        if indices.is_empty() {
            continue;
        }
        let matrix = if w.is_zero() {
            H2pMatrix::Diagonal(indices.iter().map(|&i| {
                let (n, m) = basis.pair(i);
                e[n] + e[m]
            }).collect())
        } else {
            let d = indices.len();
            let pairs: Vec<(usize, usize)> = indices.iter().map(|&i| basis.pair(i)).collect();
            let mut data = vec![0.0; d * d];
            data.par_chunks_mut(d).enumerate().for_each(|(j, col)| {
                for (i, v) in col.iter_mut().enumerate() {
                    *v = h2p_element(e, w, pairs[i], pairs[j]);
                }
            });
            H2pMatrix::Dense(Mat::from_fn(d, d, |i, j| data[j * d + i]))
        };
        blocks.push(H2pBlock { parity, indices, matrix });
    }
    Ok(H2p { basis, lambda: w.lambda(), amplitude: basis1p.amplitude(), blocks })
}

#[derive(Clone, Debug)]
struct SpectrumBlock {
    indices: Vec<usize>,
    /// `None` when the block Hamiltonian was diagonal.
    vectors: Option<Mat<f64>>,
}

/// Eigenvalues and eigenvectors of the two-particle Hamiltonian, ascending
/// in energy across both parity sectors.
#[derive(Clone, Debug)]
pub struct TwoBodySpectrum {
    basis: PairBasis,
    lambda: f64,
    amplitude: f64,
    energies: Vec<f64>,
    parities: Vec<Parity>,
    blocks: Vec<SpectrumBlock>,
    locate: Vec<(usize, usize)>,
}

pub fn diagonalize_2p(h: &H2p) -> Result<TwoBodySpectrum> {
    let mut blocks = Vec::new();
    let mut all: Vec<(f64, usize, usize, Parity)> = Vec::with_capacity(h.dim());
    for (bi, block) in h.blocks.iter().enumerate() {
        let (values, vectors) = match &block.matrix {
            H2pMatrix::Diagonal(d) => (d.clone(), None),
            H2pMatrix::Dense(m) => {
                let (w, v) = linalg::eigh_symmetric(m)?;
                (w, Some(v))
            }
        };
        all.extend(values.iter().enumerate().map(|(k, &e)| (e, bi, k, block.parity)));
        blocks.push(SpectrumBlock { indices: block.indices.clone(), vectors });
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    Ok(TwoBodySpectrum {
        basis: h.basis.clone(),
        lambda: h.lambda,
        amplitude: h.amplitude,
        energies: all.iter().map(|a| a.0).collect(),
        parities: all.iter().map(|a| a.3).collect(),
        blocks,
        locate: all.iter().map(|a| (a.1, a.2)).collect(),
    })
}

impl TwoBodySpectrum {
    pub fn basis(&self) -> &PairBasis {
        &self.basis
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }
    /// Exchange parity `p_n * p_m` of each eigenstate.
    pub fn parities(&self) -> &[Parity] {
        &self.parities
    }
    pub fn len(&self) -> usize {
        self.energies.len()
    }
    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Eigenvector `n` in the pair basis.
    pub fn eigenvector(&self, n: usize) -> Vec<f64> {
        let (bi, k) = self.locate[n];
        let block = &self.blocks[bi];
        let mut out = vec![0.0; self.basis.dim()];
        match &block.vectors {
            None => out[block.indices[k]] = 1.0,
            Some(v) => {
                for (a, &i) in block.indices.iter().enumerate() {
                    out[i] = v[(a, k)];
                }
            }
        }
        out
    }

    /// Pair-basis components `(pair, coefficient)` of eigenvector `n`,
    /// largest magnitude first.
    pub fn leading_pairs(&self, n: usize, count: usize) -> Vec<((usize, usize), f64)> {
        let v = self.eigenvector(n);
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
        idx.into_iter().take(count).map(|i| (self.basis.pair(i), v[i])).collect()
    }

    /// Coefficients `<Psi_n|psi>` of a pair-basis vector, in eigenvalue order.
    pub fn project(&self, psi: &[C64]) -> Vec<C64> {
        let mut per_block: Vec<Vec<C64>> = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let d = block.indices.len();
            match &block.vectors {
                None => per_block.push(block.indices.iter().map(|&i| psi[i]).collect()),
                Some(v) => {
                    let x = Mat::from_fn(d, 2, |a, j| {
                        let z = psi[block.indices[a]];
                        if j == 0 { z.re } else { z.im }
                    });
                    let y = v.transpose() * &x;
                    per_block.push((0..d).map(|k| C64::new(y[(k, 0)], y[(k, 1)])).collect());
                }
            }
        }
        self.locate.iter().map(|&(bi, k)| per_block[bi][k]).collect()
    }

    /// Pair-basis vector `sum_n c_n |Psi_n>`.
    pub fn expand(&self, c: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.basis.dim()];
        let mut per_block: Vec<Vec<C64>> =
            self.blocks.iter().map(|b| vec![C64::new(0.0, 0.0); b.indices.len()]).collect();
        for (n, &(bi, k)) in self.locate.iter().enumerate() {
            per_block[bi][k] = c[n];
        }
        for (block, cb) in self.blocks.iter().zip(&per_block) {
            let d = block.indices.len();
            match &block.vectors {
                None => {
                    for (a, &i) in block.indices.iter().enumerate() {
                        out[i] = cb[a];
                    }
                }
                Some(v) => {
                    let x = Mat::from_fn(d, 2, |k, j| if j == 0 { cb[k].re } else { cb[k].im });
                    let y = v * &x;
                    for (a, &i) in block.indices.iter().enumerate() {
                        out[i] = C64::new(y[(a, 0)], y[(a, 1)]);
                    }
                }
            }
        }
        out
    }

    /// Eigenvectors `n` for all `n` in `modes`, as columns of a pair-basis
    /// matrix.
    pub fn eigenvectors(&self, modes: &[usize]) -> Mat<f64> {
        let mut out = Mat::<f64>::zeros(self.basis.dim(), modes.len());
        for (col, &n) in modes.iter().enumerate() {
            let (bi, k) = self.locate[n];
            let block = &self.blocks[bi];
            match &block.vectors {
                None => out[(block.indices[k], col)] = 1.0,
                Some(v) => {
                    for (a, &i) in block.indices.iter().enumerate() {
                        out[(i, col)] = v[(a, k)];
                    }
                }
            }
        }
        out
    }
}
