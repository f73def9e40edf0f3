//! Bose-Hubbard discretisation of the continuum problem: `N` bosons on a
//! uniform chain of `L` sites spanning `[-x_max, x_max]`.
//!
//! With site-indicator Wannier functions the contact strength maps to
//! `U = lambda` and the Hamiltonian is
//! `H = -1/(2 dx^2) sum (a_i^+ a_{i+1} + h.c.) + sum n_i (V_i + 1/dx^2)
//!      + U/(2 dx) sum n_i (n_i - 1)` with open ends.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::grid::{barrier_shape, PotentialSpec};
use crate::linalg::C64;
use crate::ops::{BarrierHamiltonian, SymmetricOperator};

/// Default cap on the Fock-space dimension.
pub const DEFAULT_MAX_DIM: usize = 4_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSpec {
    x_max: f64,
    n_sites: usize,
    dx: f64,
    points: Vec<f64>,
}

impl LatticeSpec {
    pub fn new(x_max: f64, n_sites: usize) -> Result<Self> {
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(Error::Construction(format!("x_max must be positive, got {x_max}")));
        }
        if n_sites < 3 {
            return Err(Error::Construction(format!("need at least 3 sites, got {n_sites}")));
        }
        let dx = 2.0 * x_max / (n_sites - 1) as f64;
        let c = (n_sites - 1) as f64 / 2.0;
        let points = (0..n_sites).map(|i| (i as f64 - c) * dx).collect();
        Ok(Self { x_max, n_sites, dx, points })
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn points(&self) -> &[f64] {
        &self.points
    }
    /// Site at `x = 0` for odd `L`.
    pub fn center(&self) -> Option<usize> {
        (self.n_sites % 2 == 1).then_some((self.n_sites - 1) / 2)
    }
}

/// `C(n, k)` in u128 to survive large intermediate values.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Dimension `C(N + L - 1, N)` of the bosonic Fock space.
pub fn fock_dimension(n_particles: usize, n_sites: usize) -> u128 {
    binomial((n_particles + n_sites - 1) as u64, n_particles as u64)
}

/// All `N`-boson configurations on `L` sites.
///
/// A configuration is stored as the sorted list of occupied sites
/// `s_1 <= ... <= s_N`; its rank is `sum_k C(s_k + k - 1, k)` (k from 1),
/// i.e. colexicographic order of the sorted lists.
#[derive(Clone, Debug)]
pub struct FockBasis {
    n_particles: usize,
    n_sites: usize,
    sites: Vec<u16>,
    /// `table[k][s] = C(s + k, k + 1)`, the rank contribution of `s` at slot `k`.
    table: Vec<Vec<usize>>,
}

pub fn enumerate_fock(n_particles: usize, n_sites: usize) -> Result<FockBasis> {
    enumerate_fock_with_budget(n_particles, n_sites, DEFAULT_MAX_DIM)
}

pub fn enumerate_fock_with_budget(n_particles: usize, n_sites: usize, max_dim: usize) -> Result<FockBasis> {
    if n_particles == 0 || n_sites == 0 {
        return argument("need at least one particle and one site");
    }
    if n_sites > u16::MAX as usize {
        return argument(format!("at most {} sites supported", u16::MAX));
    }
    let dim = fock_dimension(n_particles, n_sites);
    if dim > max_dim as u128 {
        return Err(Error::Capacity {
            what: format!("Fock space of {n_particles} bosons on {n_sites} sites"),
            required: usize::try_from(dim).unwrap_or(usize::MAX),
            budget: max_dim,
        });
    }
    let dim = dim as usize;
    let table = (0..n_particles)
        .map(|k| (0..n_sites).map(|s| binomial((s + k) as u64, (k + 1) as u64) as usize).collect())
        .collect();
    let mut sites = Vec::with_capacity(dim * n_particles);
    let mut cur = vec![0u16; n_particles];
    // colex order: the last slot is the most significant
    loop {
        sites.extend_from_slice(&cur);
        let mut k = 0;
        loop {
            if k == n_particles {
                return Ok(FockBasis { n_particles, n_sites, sites, table });
            }
            let limit = if k + 1 < n_particles { cur[k + 1] } else { (n_sites - 1) as u16 };
            if cur[k] < limit {
                cur[k] += 1;
                for j in 0..k {
                    cur[j] = 0;
                }
                break;
            }
            k += 1;
        }
    }
}

impl FockBasis {
    pub fn n_particles(&self) -> usize {
        self.n_particles
    }
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }
    pub fn dim(&self) -> usize {
        self.sites.len() / self.n_particles
    }

    /// Sorted occupied sites of configuration `r`.
    pub fn sites_of(&self, r: usize) -> &[u16] {
        &self.sites[r * self.n_particles..(r + 1) * self.n_particles]
    }

    pub fn occupations(&self, r: usize) -> Vec<u32> {
        let mut n = vec![0u32; self.n_sites];
        for &s in self.sites_of(r) {
            n[s as usize] += 1;
        }
        n
    }

    /// Rank of a sorted site list.
    pub fn rank_sorted(&self, sites: &[u16]) -> usize {
        sites.iter().enumerate().map(|(k, &s)| self.table[k][s as usize]).sum()
    }

    /// Rank of an occupation vector.
    pub fn rank(&self, occupations: &[u32]) -> Option<usize> {
        if occupations.len() != self.n_sites || occupations.iter().sum::<u32>() as usize != self.n_particles {
            return None;
        }
        let mut sites = Vec::with_capacity(self.n_particles);
        for (i, &n) in occupations.iter().enumerate() {
            for _ in 0..n {
                sites.push(i as u16);
            }
        }
        Some(self.rank_sorted(&sites))
    }

    /// Rank after moving one boson from site `from` to site `to`, with the
    /// bosonic factor `sqrt(n_from (n_to + 1))`.
    pub fn hop(&self, r: usize, from: u16, to: u16) -> Option<(usize, f64)> {
        let s = self.sites_of(r);
        let n_from = s.iter().filter(|&&x| x == from).count();
        if n_from == 0 {
            return None;
        }
        let n_to = s.iter().filter(|&&x| x == to).count();
        let mut moved: Vec<u16> = s.to_vec();
        let pos = moved.iter().position(|&x| x == from).unwrap();
        moved[pos] = to;
        moved.sort_unstable();
        let factor = ((n_from * (n_to + 1)) as f64).sqrt();
        Some((self.rank_sorted(&moved), factor))
    }

    /// Permutation mapping each configuration to its mirror image
    /// `i -> L - 1 - i`.
    pub fn reflection(&self) -> Vec<usize> {
        let l = self.n_sites as u16;
        (0..self.dim())
            .into_par_iter()
            .map(|r| {
                let mut m: Vec<u16> = self.sites_of(r).iter().map(|&s| l - 1 - s).collect();
                m.reverse();
                self.rank_sorted(&m)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BHParams {
    pub potential: PotentialSpec,
    pub u: f64,
}

/// `U = lambda * sum_i |w_0i|^4`, which is `lambda` for site-indicator
/// Wannier functions.
pub fn u_from_lambda(lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return argument(format!("lambda must be >= 0, got {lambda}"));
    }
    Ok(lambda)
}

/// Amplitude-independent pieces of the lattice Hamiltonian.
#[derive(Debug)]
pub struct BhStructure {
    lattice: LatticeSpec,
    n_particles: usize,
    /// Rightward hops only (strict upper triangle), CSR.
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    /// `sum n_i (x_i^2/2 + 1/dx^2)`
    base: Vec<f64>,
    /// `sum n_i exp(-x_i^2/2)`
    barrier: Vec<f64>,
    /// `sum n_i (n_i - 1) / (2 dx)`
    interaction: Vec<f64>,
}

impl BhStructure {
    pub fn new(basis: &FockBasis, lattice: &LatticeSpec) -> Result<Self> {
        if basis.n_sites() != lattice.n_sites() {
            return argument("lattice and Fock basis disagree on the number of sites");
        }
        let dx = lattice.dx();
        let hop = -0.5 / (dx * dx);
        let pts = lattice.points();
        let dim = basis.dim();
        let rows: Vec<(Vec<(u32, f64)>, [f64; 3])> = (0..dim)
            .into_par_iter()
            .map(|r| {
                let s = basis.sites_of(r);
                let mut entries = Vec::with_capacity(s.len());
                let (mut base, mut bar, mut int) = (0.0, 0.0, 0.0);
                let mut k = 0;
                while k < s.len() {
                    let site = s[k];
                    let mut n = 0;
                    while k < s.len() && s[k] == site {
                        n += 1;
                        k += 1;
                    }
                    let x = pts[site as usize];
                    base += n as f64 * (0.5 * x * x + 1.0 / (dx * dx));
                    bar += n as f64 * barrier_shape(x);
                    int += (n * (n - 1)) as f64 / (2.0 * dx);
                    if (site as usize) + 1 < lattice.n_sites() {
                        let (c, f) = basis.hop(r, site, site + 1).unwrap();
                        entries.push((c as u32, hop * f));
                    }
                }
                entries.sort_unstable_by_key(|e| e.0);
                (entries, [base, bar, int])
            })
            .collect();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(|r| r.0.len()).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        let mut base = Vec::with_capacity(dim);
        let mut barrier = Vec::with_capacity(dim);
        let mut interaction = Vec::with_capacity(dim);
        for (entries, d) in rows {
            for (c, v) in entries {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
            base.push(d[0]);
            barrier.push(d[1]);
            interaction.push(d[2]);
        }
        Ok(Self { lattice: lattice.clone(), n_particles: basis.n_particles(), row_ptr, cols, vals, base, barrier, interaction })
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }
    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }
    pub fn n_particles(&self) -> usize {
        self.n_particles
    }
    /// Stored off-diagonal entries (upper triangle).
    pub fn nnz_upper(&self) -> usize {
        self.vals.len()
    }
    /// Diagonal of `sum n_i (n_i - 1) / (2 dx)`, i.e. `dH/dU`.
    pub fn interaction_diagonal(&self) -> &[f64] {
        &self.interaction
    }
    pub fn barrier_diagonal(&self) -> &[f64] {
        &self.barrier
    }

    pub fn diagonal(&self, amplitude: f64, u: f64) -> Vec<f64> {
        (0..self.dim()).map(|r| self.base[r] + amplitude * self.barrier[r] + u * self.interaction[r]).collect()
    }

    /// Upper-triangle entries `(row, col, value)` of the hopping part.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k] as usize, self.vals[k]))
        })
    }

    fn apply_generic<T>(&self, diag: impl Fn(usize) -> f64, x: &[T], y: &mut [T])
    where
        T: Copy + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
    {
        for r in 0..self.dim() {
            y[r] = x[r] * diag(r);
        }
        for r in 0..self.dim() {
            let xr = x[r];
            let mut acc = y[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k] as usize;
                let v = self.vals[k];
                acc += x[c] * v;
                y[c] += xr * v;
            }
            y[r] = acc;
        }
    }
}

/// Lattice Hamiltonian at a fixed barrier amplitude and on-site strength.
#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    structure: Arc<BhStructure>,
    amplitude: f64,
    u: f64,
}

impl SparseHamiltonian {
    pub fn new(structure: Arc<BhStructure>, amplitude: f64, u: f64) -> Self {
        Self { structure, amplitude, u }
    }
    pub fn structure(&self) -> &Arc<BhStructure> {
        &self.structure
    }
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
    pub fn u(&self) -> f64 {
        self.u
    }
    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self { structure: self.structure.clone(), amplitude, u: self.u }
    }
    pub fn with_u(&self, u: f64) -> Self {
        Self { structure: self.structure.clone(), amplitude: self.amplitude, u }
    }
    pub fn diagonal(&self) -> Vec<f64> {
        self.structure.diagonal(self.amplitude, self.u)
    }

    /// Dense copy, for small problems and tests.
    pub fn to_dense(&self) -> faer::Mat<f64> {
        let n = self.structure.dim();
        let mut m = faer::Mat::<f64>::zeros(n, n);
        for (r, d) in self.diagonal().into_iter().enumerate() {
            m[(r, r)] = d;
        }
        for (r, c, v) in self.structure.upper_entries() {
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
        m
    }
}

pub fn assemble_bh(basis: &FockBasis, lattice: &LatticeSpec, params: &BHParams, t: f64) -> Result<SparseHamiltonian> {
    if !(params.u >= 0.0) {
        return argument(format!("U must be >= 0, got {}", params.u));
    }
    let amplitude = params.potential.amplitude(t)?;
    Ok(SparseHamiltonian::new(Arc::new(BhStructure::new(basis, lattice)?), amplitude, params.u))
}

impl SymmetricOperator for SparseHamiltonian {
    fn dim(&self) -> usize {
        self.structure.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let s = &self.structure;
        let (a, u) = (self.amplitude, self.u);
        s.apply_generic(|r| s.base[r] + a * s.barrier[r] + u * s.interaction[r], x, y);
    }
}

impl BarrierHamiltonian for SparseHamiltonian {
    fn dim(&self) -> usize {
        self.structure.dim()
    }
    fn apply_real(&self, amplitude: f64, x: &[f64], y: &mut [f64]) {
        let s = &self.structure;
        let u = self.u;
        s.apply_generic(|r| s.base[r] + amplitude * s.barrier[r] + u * s.interaction[r], x, y);
    }
    fn apply(&self, amplitude: f64, x: &[C64], y: &mut [C64]) {
        let s = &self.structure;
        let u = self.u;
        s.apply_generic(|r| s.base[r] + amplitude * s.barrier[r] + u * s.interaction[r], x, y);
    }
}

/// Which part of the spectrum a sweep follows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SweepWindow {
    Lowest(usize),
    Interval(f64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub u: f64,
    /// Level index within the solve at this `u`.
    pub n: usize,
    pub energy: f64,
    /// Branch label carried across `u` values. Levels without a unique
    /// predecessor open a new branch (and a diagnostic is recorded).
    pub branch: usize,
    /// Size of the quasi-degenerate cluster containing this level.
    pub degeneracy: usize,
    /// `<sum n_i (n_i - 1)> / (2 dx)`, which is also `dE/dU`.
    pub interaction: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SpectrumSweep {
    pub rows: Vec<SpectrumRow>,
    pub diagnostics: Vec<String>,
}

/// Levels closer than `tol` are grouped; returns the cluster size of every
/// level.
pub fn cluster_sizes(values: &[f64], tol: f64) -> Vec<usize> {
    let mut sizes = vec![1; values.len()];
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] - values[k - 1] > tol {
            for s in &mut sizes[start..k] {
                *s = k - start;
            }
            start = k;
        }
    }
    sizes
}

/// Spectrum of `h` at each on-site strength in `us`. Branches are linked
/// between neighbouring `u` values cluster by cluster: a quasi-degenerate
/// cluster inherits the labels of the previous cluster of equal size that
/// holds more than half of its weight.
pub fn spectrum_vs_u(
    h: &SparseHamiltonian,
    us: &[f64],
    window: SweepWindow,
    cluster_tol: f64,
    opts: &crate::eigs::EigOptions,
) -> Result<SpectrumSweep> {
    use crate::eigs::{interior_eigs_with, lowest_eigs_with, InteriorOptions};
    let mut sweep = SpectrumSweep::default();
    let mut previous: Option<(crate::eigs::Eigenpairs, Vec<usize>, Vec<usize>)> = None;
    let mut next_branch = 0;
    let inter = h.structure().interaction_diagonal();
    for &u in us {
        let hu = h.with_u(u);
        let pairs = match window {
            SweepWindow::Lowest(k) => lowest_eigs_with(&hu, k, opts)?,
            SweepWindow::Interval(lo, hi) => {
                let io = InteriorOptions { tol: opts.tol.max(1e-10), ..InteriorOptions::default() };
                interior_eigs_with(&hu, lo, hi, &io)?
            }
        };
        let sizes = cluster_sizes(&pairs.values, cluster_tol);
        let mut labels: Vec<Option<usize>> = vec![None; pairs.len()];
        if let Some((prev, prev_sizes, prev_labels)) = &previous {
            let starts = |sizes: &[usize]| -> Vec<usize> {
                let mut out = Vec::new();
                let mut k = 0;
                while k < sizes.len() {
                    out.push(k);
                    k += sizes[k];
                }
                out
            };
            let prev_starts = starts(prev_sizes);
            let mut taken = vec![false; prev.len()];
            for &c0 in &starts(&sizes) {
                let members = c0..c0 + sizes[c0];
                // weight of the current cluster inside each previous cluster
                let best = prev_starts
                    .iter()
                    .map(|&p0| {
                        let w: f64 = members
                            .clone()
                            .map(|j| {
                                (p0..p0 + prev_sizes[p0])
                                    .map(|i| crate::linalg::dot(prev.vector(i), pairs.vector(j)).powi(2))
                                    .sum::<f64>()
                            })
                            .sum::<f64>()
                            / sizes[c0] as f64;
                        (p0, w)
                    })
                    .max_by(|a, b| a.1.total_cmp(&b.1));
                match best {
                    Some((p0, w)) if w > 0.5 && prev_sizes[p0] == sizes[c0] && !taken[p0] => {
                        taken[p0] = true;
                        for (k, j) in members.enumerate() {
                            labels[j] = Some(prev_labels[p0 + k]);
                        }
                    }
                    _ => sweep.diagnostics.push(format!(
                        "u = {u}: levels {}..{} have no unique predecessor",
                        c0,
                        c0 + sizes[c0]
                    )),
                }
            }
        }
        let labels: Vec<usize> = labels
            .into_iter()
            .map(|l| {
                l.unwrap_or_else(|| {
                    next_branch += 1;
                    next_branch - 1
                })
            })
            .collect();
        for j in 0..pairs.len() {
            let v = pairs.vector(j);
            let interaction = v.iter().zip(inter).map(|(x, d)| x * x * d).sum();
            sweep.rows.push(SpectrumRow { u, n: j, energy: pairs.values[j], branch: labels[j], degeneracy: sizes[j], interaction });
        }
        previous = Some((pairs, sizes, labels));
    }
    Ok(sweep)
}
