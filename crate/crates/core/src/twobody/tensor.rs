use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{argument, Error, Result};
use crate::grid::{Parity, SingleParticleBasis};
use crate::kahan::kahan_lanes;

/// Largest number of stored canonical entries (8 bytes each).
pub const MAX_TENSOR_ENTRIES: usize = 300_000_000;

/// Contact-interaction matrix elements
/// `W_ksql = lambda * dx * sum_m psi_k psi_s psi_q psi_l` over the first
/// `n_cut` basis states.
///
/// Only sorted quadruples `a <= b <= c <= d` are stored, at rank
/// `a + C(b+1,2) + C(c+2,3) + C(d+3,4)`. The stored integrals do not
/// include `lambda`, so tensors at different strengths share storage.
#[derive(Clone, Debug)]
pub struct InteractionTensor {
    n_cut: usize,
    lambda: f64,
    integrals: Option<Arc<Vec<f64>>>,
}

#[inline]
fn c2(b: usize) -> usize {
    b * (b + 1) / 2
}
#[inline]
fn c3(c: usize) -> usize {
    c * (c + 1) * (c + 2) / 6
}
#[inline]
fn c4(d: usize) -> usize {
    d * (d + 1) * (d + 2) * (d + 3) / 24
}

#[inline]
fn sort4(mut i: [usize; 4]) -> [usize; 4] {
    if i[0] > i[1] {
        i.swap(0, 1);
    }
    if i[2] > i[3] {
        i.swap(2, 3);
    }
    if i[0] > i[2] {
        i.swap(0, 2);
    }
    if i[1] > i[3] {
        i.swap(1, 3);
    }
    if i[1] > i[2] {
        i.swap(1, 2);
    }
    i
}

#[inline]
pub(crate) fn canonical_rank(k: usize, s: usize, q: usize, l: usize) -> usize {
    let [a, b, c, d] = sort4([k, s, q, l]);
    a + c2(b) + c3(c) + c4(d)
}

impl InteractionTensor {
    /// Integrals at unit strength, computed regardless of `lambda`.
    pub fn unit(basis1p: &SingleParticleBasis, n_cut: usize) -> Result<Self> {
        if n_cut == 0 || n_cut > basis1p.n_cut() {
            return argument(format!(
                "n_cut must be in 1..={}, got {n_cut}",
                basis1p.n_cut()
            ));
        }
        let entries = c4(n_cut);
        if entries > MAX_TENSOR_ENTRIES {
            return Err(Error::Capacity {
                what: "interaction tensor entries".into(),
                required: entries,
                budget: MAX_TENSOR_ENTRIES,
            });
        }
        Ok(Self { n_cut, lambda: 1.0, integrals: Some(Arc::new(compute_integrals(basis1p, n_cut))) })
    }

    /// Same integrals at another interaction strength.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if lambda != 0.0 && self.integrals.is_none() {
            return argument("tensor was built without integrals (lambda = 0)");
        }
        Ok(Self { n_cut: self.n_cut, lambda, integrals: self.integrals.clone() })
    }

    pub fn n_cut(&self) -> usize {
        self.n_cut
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn is_zero(&self) -> bool {
        self.lambda == 0.0
    }

    /// `dx * sum psi_k psi_s psi_q psi_l` without the strength.
    pub fn integral(&self, k: usize, s: usize, q: usize, l: usize) -> f64 {
        match &self.integrals {
            Some(w) => w[canonical_rank(k, s, q, l)],
            None => 0.0,
        }
    }

    pub fn get(&self, k: usize, s: usize, q: usize, l: usize) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        self.lambda * self.integral(k, s, q, l)
    }

    pub fn stored_entries(&self) -> usize {
        self.integrals.as_ref().map_or(0, |w| w.len())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return argument(format!("lambda must be >= 0, got {lambda}"));
    }
    Ok(())
}

pub fn interaction_tensor(basis1p: &SingleParticleBasis, lambda: f64, n_cut: usize) -> Result<InteractionTensor> {
    check_lambda(lambda)?;
    if n_cut == 0 || n_cut > basis1p.n_cut() {
        return argument(format!("n_cut must be in 1..={}, got {n_cut}", basis1p.n_cut()));
    }
    if lambda == 0.0 {
        return Ok(InteractionTensor { n_cut, lambda, integrals: None });
    }
    InteractionTensor::unit(basis1p, n_cut)?.with_lambda(lambda)
}

/// Integrals for all sorted quadruples. Products with odd total parity
/// vanish identically and are left at zero; the remaining integrands are
/// even, so only the half grid `x >= 0` is summed (weight 2 off the centre).
/// Each entry is a compensated sum; the innermost index is vectorised.
fn compute_integrals(basis1p: &SingleParticleBasis, n_cut: usize) -> Vec<f64> {
    let grid = basis1p.grid();
    let c0 = grid.center();
    let nh = grid.n_grid() - c0;
    let dx = grid.dx();
    let parity = &basis1p.parities()[..n_cut];

    let half: Vec<Vec<f64>> = (0..n_cut).map(|n| basis1p.state(n)[c0..].to_vec()).collect();
    let weight: Vec<f64> = (0..nh).map(|i| if i == 0 { 1.0 } else { 2.0 }).collect();

    // grid-major tables of the states of each parity
    let split = |p: Parity| -> (Vec<usize>, Vec<f64>) {
        let idx: Vec<usize> = (0..n_cut).filter(|&n| parity[n] == p).collect();
        let mut table = vec![0.0; nh * idx.len()];
        for x in 0..nh {
            for (j, &n) in idx.iter().enumerate() {
                table[x * idx.len() + j] = half[n][x];
            }
        }
        (idx, table)
    };
    let (even_idx, even_tab) = split(Parity::Even);
    let (odd_idx, odd_tab) = split(Parity::Odd);

    let mut out = vec![0.0; c4(n_cut)];
    let mut chunks: Vec<(usize, &mut [f64])> = Vec::with_capacity(n_cut);
    let mut rest: &mut [f64] = &mut out;
    for d in 0..n_cut {
        let (head, tail) = rest.split_at_mut(c4(d + 1) - c4(d));
        chunks.push((d, head));
        rest = tail;
    }

    chunks.into_par_iter().for_each(|(d, chunk)| {
        let base_d = c4(d);
        let mut g = vec![0.0; nh];
        let mut sums = vec![0.0; n_cut];
        let mut comps = vec![0.0; n_cut];
        for c in 0..=d {
            for b in 0..=c {
                let p = parity[b].times(parity[c]).times(parity[d]);
                let (idx, tab) = match p {
                    Parity::Even => (&even_idx, &even_tab),
                    Parity::Odd => (&odd_idx, &odd_tab),
                };
                let lanes = idx.partition_point(|&a| a <= b);
                if lanes == 0 {
                    continue;
                }
                let stride = idx.len();
                for x in 0..nh {
                    g[x] = weight[x] * half[b][x] * half[c][x] * half[d][x];
                }
                sums[..lanes].fill(0.0);
                comps[..lanes].fill(0.0);
                for x in 0..nh {
                    let row = &tab[x * stride..x * stride + lanes];
                    kahan_lanes(&mut sums[..lanes], &mut comps[..lanes], g[x], row);
                }
                let base = c2(b) + c3(c) + c4(d) - base_d;
                for j in 0..lanes {
                    chunk[base + idx[j]] = dx * sums[j];
                }
            }
        }
    });
    out
}
