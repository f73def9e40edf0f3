//! Iterative eigensolvers for large sparse or matrix-free symmetric
//! operators.
//!
//! * [`lowest_eigs`]: Chebyshev-filtered subspace iteration. Being a block
//!   method it resolves (quasi-)degenerate clusters, which single-vector
//!   Lanczos would miss.
//! * [`interior_eigs`]: shift-invert Lanczos about the window centre with
//!   MINRES inner solves and locking of converged pairs.
//!
//! Both fall back to a dense solve below [`DENSE_LIMIT`].

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{argument, Error, Result};
use crate::linalg;
use crate::ops::SymmetricOperator;

pub const DENSE_LIMIT: usize = 2000;

#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    /// One eigenvector per column.
    pub vectors: Mat<f64>,
    /// `|A v - e v|` for each pair.
    pub residuals: Vec<f64>,
}

impl Eigenpairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn vector(&self, j: usize) -> &[f64] {
        linalg::col(&self.vectors, j)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EigOptions {
    /// Relative residual target `|Av - ev| <= tol * max(1, |e|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Extra block vectors beyond the requested count.
    pub guard: usize,
    pub degree: usize,
    pub seed: u64,
    /// Force the iterative path even for small problems.
    pub iterative: bool,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 300, guard: 10, degree: 30, seed: 7, iterative: false }
    }
}

/// Dense copy of an operator, column by column.
pub fn materialize(op: &dyn SymmetricOperator) -> Mat<f64> {
    let n = op.dim();
    let mut m = Mat::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut y = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut y);
        e[j] = 0.0;
        for i in 0..n {
            m[(i, j)] = y[i];
        }
    }
    // symmetrise away rounding in the operator
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn residuals(op: &dyn SymmetricOperator, values: &[f64], vectors: &Mat<f64>) -> Vec<f64> {
    let n = op.dim();
    let mut y = vec![0.0; n];
    (0..values.len())
        .map(|j| {
            let v = linalg::col(vectors, j);
            op.apply(v, &mut y);
            y.iter().zip(v).map(|(a, b)| (a - values[j] * b).powi(2)).sum::<f64>().sqrt()
        })
        .collect()
}

fn dense_select(op: &dyn SymmetricOperator, keep: impl Fn(usize, f64) -> bool) -> Result<Eigenpairs> {
    let m = materialize(op);
    let (w, v) = linalg::eigh(&m)?;
    let idx: Vec<usize> = (0..w.len()).filter(|&i| keep(i, w[i])).collect();
    let values: Vec<f64> = idx.iter().map(|&i| w[i]).collect();
    let vectors = Mat::from_fn(op.dim(), idx.len(), |r, c| v[(r, idx[c])]);
    let residuals = residuals(op, &values, &vectors);
    Ok(Eigenpairs { values, vectors, residuals })
}

fn col_mut(m: &mut Mat<f64>, j: usize) -> &mut [f64] {
    m.col_mut(j).try_as_col_major_mut().expect("contiguous column").as_slice_mut()
}

fn random_block(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
    Mat::from_fn(n, p, |_, _| rng.random::<f64>() - 0.5)
}

/// Orthonormalises the columns in place (classical Gram-Schmidt, twice);
/// columns that collapse are replaced by fresh random directions.
fn orthonormalize(m: &mut Mat<f64>, locked: Option<&Mat<f64>>, rng: &mut ChaCha8Rng) {
    let (n, p) = (m.nrows(), m.ncols());
    for j in 0..p {
        for attempt in 0..4 {
            let original = linalg::norm(linalg::col(m, j));
            for _ in 0..2 {
                if let Some(l) = locked {
                    for i in 0..l.ncols() {
                        let c = linalg::dot(linalg::col(l, i), linalg::col(m, j));
                        let li = linalg::col(l, i).to_vec();
                        linalg::axpy(-c, &li, col_mut(m, j));
                    }
                }
                for i in 0..j {
                    let c = linalg::dot(linalg::col(m, i), linalg::col(m, j));
                    let mi = linalg::col(m, i).to_vec();
                    linalg::axpy(-c, &mi, col_mut(m, j));
                }
            }
            let nrm = linalg::norm(linalg::col(m, j));
            if nrm > 1e-10 * original.max(f64::MIN_POSITIVE) && nrm > 0.0 {
                col_mut(m, j).iter_mut().for_each(|x| *x /= nrm);
                break;
            }
            assert!(attempt < 3, "cannot extend orthonormal block");
            for x in col_mut(m, j).iter_mut() {
                *x = rng.random::<f64>() - 0.5;
            }
            let _ = n;
        }
    }
}

fn apply_block(op: &dyn SymmetricOperator, x: &Mat<f64>) -> Mat<f64> {
    let mut y = Mat::<f64>::zeros(x.nrows(), x.ncols());
    for j in 0..x.ncols() {
        op.apply(linalg::col(x, j), col_mut(&mut y, j));
    }
    y
}

/// Ritz values of an `m`-step Lanczos run and an upper bound of the
/// spectrum.
pub fn lanczos_bounds(op: &dyn SymmetricOperator, steps: usize, seed: u64) -> Result<(f64, f64)> {
    let n = op.dim();
    let steps = steps.min(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nv = linalg::norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut w = vec![0.0; n];
    let mut last_beta = 0.0;
    for j in 0..steps {
        op.apply(&v, &mut w);
        let a = linalg::dot(&w, &v);
        alpha.push(a);
        linalg::axpy(-a, &v, &mut w);
        if let Some(prev) = q.last() {
            linalg::axpy(-last_beta, prev, &mut w);
        }
        q.push(v.clone());
        for qi in &q {
            let c = linalg::dot(qi, &w);
            linalg::axpy(-c, qi, &mut w);
        }
        let b = linalg::norm(&w);
        last_beta = b;
        if j + 1 == steps || b < 1e-12 {
            break;
        }
        beta.push(b);
        v = w.iter().map(|x| x / b).collect();
    }
    let m = alpha.len();
    let t = Mat::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i.abs_diff(j) == 1 {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    let theta = linalg::eigvalsh(&t)?;
    Ok((theta[0], theta[m - 1] + last_beta.abs()))
}

/// The `k` lowest eigenpairs, ascending.
pub fn lowest_eigs(op: &dyn SymmetricOperator, k: usize, tol: f64) -> Result<Eigenpairs> {
    lowest_eigs_with(op, k, &EigOptions { tol, ..EigOptions::default() })
}

pub fn lowest_eigs_with(op: &dyn SymmetricOperator, k: usize, opts: &EigOptions) -> Result<Eigenpairs> {
    let n = op.dim();
    if k == 0 || k > n {
        return argument(format!("requested {k} eigenpairs of a {n}-dimensional operator"));
    }
    if n <= DENSE_LIMIT && !opts.iterative {
        return dense_select(op, |i, _| i < k);
    }
    let p = (k + opts.guard).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (_, upper) = lanczos_bounds(op, 40, opts.seed ^ 0x5eed)?;

    let mut x = random_block(n, p, &mut rng);
    orthonormalize(&mut x, None, &mut rng);
    let (mut theta, mut x, _) = rayleigh_ritz(op, &x)?;
    let mut res = vec![f64::INFINITY; k];
    for _ in 0..opts.max_iter {
        let cut = theta[p - 1];
        let lowest = theta[0];
        let mut y = chebyshev_filter(op, &x, opts.degree, cut, upper, lowest);
        orthonormalize(&mut y, None, &mut rng);
        let (t, xn, hx) = rayleigh_ritz(op, &y)?;
        theta = t;
        x = xn;
        for j in 0..k {
            let r: f64 = (0..n).map(|i| (hx[(i, j)] - theta[j] * x[(i, j)]).powi(2)).sum::<f64>().sqrt();
            res[j] = r;
        }
        if (0..k).all(|j| res[j] <= opts.tol * theta[j].abs().max(1.0)) {
            let vectors = x.subcols(0, k).to_owned();
            return Ok(Eigenpairs { values: theta[..k].to_vec(), vectors, residuals: res });
        }
    }
    Err(Error::Convergence { message: format!("lowest {k} eigenpairs after {} filter passes", opts.max_iter), residuals: res })
}

/// Rayleigh-Ritz on an orthonormal block: Ritz values, Ritz vectors and
/// `A` times the Ritz vectors.
fn rayleigh_ritz(op: &dyn SymmetricOperator, y: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>, Mat<f64>)> {
    let hy = apply_block(op, y);
    let mut g = y.transpose() * &hy;
    crate::grid::symmetrize(&mut g);
    let (theta, v) = linalg::eigh(&g)?;
    Ok((theta, y * &v, hy * &v))
}

/// Scaled Chebyshev filter damping `[cut, upper]` and amplifying below.
fn chebyshev_filter(op: &dyn SymmetricOperator, x: &Mat<f64>, degree: usize, cut: f64, upper: f64, lowest: f64) -> Mat<f64> {
    let e = (upper - cut) / 2.0;
    let c = (upper + cut) / 2.0;
    if !(e > 0.0) {
        return x.clone();
    }
    let mut sigma = e / (lowest - c);
    let sigma1 = sigma;
    let mut prev = x.clone();
    let mut cur = apply_block(op, x);
    let scale = sigma1 / e;
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            cur[(i, j)] = (cur[(i, j)] - c * x[(i, j)]) * scale;
        }
    }
    for _ in 1..degree {
        let sigma2 = 1.0 / (2.0 / sigma1 - sigma);
        let hy = apply_block(op, &cur);
        let next = Mat::from_fn(x.nrows(), x.ncols(), |i, j| {
            2.0 * sigma2 / e * (hy[(i, j)] - c * cur[(i, j)]) - sigma * sigma2 * prev[(i, j)]
        });
        prev = cur;
        cur = next;
        sigma = sigma2;
    }
    cur
}

/// Solves `(A - shift) x = b` for symmetric, possibly indefinite `A - shift`.
/// Returns the solution and the final residual-norm estimate.
pub fn minres(op: &dyn SymmetricOperator, shift: f64, b: &[f64], rtol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let beta1 = linalg::norm(b);
    if beta1 == 0.0 {
        return (x, 0.0);
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let (mut oldb, mut beta, mut dbar, mut epsln, mut phibar) = (0.0, beta1, 0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0, 0.0);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        op.apply(&v, &mut y);
        for i in 0..n {
            y[i] -= shift * v[i];
        }
        if itn >= 2 {
            let f = beta / oldb;
            for i in 0..n {
                y[i] -= f * r1[i];
            }
        }
        let alfa = linalg::dot(&v, &y);
        let f = alfa / beta;
        for i in 0..n {
            y[i] -= f * r2[i];
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        oldb = beta;
        beta = linalg::norm(&r2);
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let denom = 1.0 / gamma;
        for i in 0..n {
            let w1 = w2[i];
            w2[i] = w[i];
            w[i] = (v[i] - oldeps * w1 - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }
        if phibar <= rtol * beta1 || beta < 1e-300 {
            break;
        }
    }
    (x, phibar / beta1)
}

#[derive(Clone, Copy, Debug)]
pub struct InteriorOptions {
    pub tol: f64,
    /// Most eigenpairs the window may hold.
    pub max_states: usize,
    pub lanczos_steps: usize,
    pub max_rounds: usize,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub seed: u64,
    pub iterative: bool,
}

impl Default for InteriorOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_states: 64,
            lanczos_steps: 40,
            max_rounds: 200,
            inner_tol: 1e-12,
            inner_max_iter: 20_000,
            seed: 11,
            iterative: false,
        }
    }
}

/// All eigenpairs with eigenvalues in `[e_min, e_max]`, with multiplicity.
pub fn interior_eigs(op: &dyn SymmetricOperator, e_min: f64, e_max: f64, tol: f64) -> Result<Eigenpairs> {
    interior_eigs_with(op, e_min, e_max, &InteriorOptions { tol, ..InteriorOptions::default() })
}

pub fn interior_eigs_with(op: &dyn SymmetricOperator, e_min: f64, e_max: f64, opts: &InteriorOptions) -> Result<Eigenpairs> {
    if !(e_min < e_max) {
        return argument(format!("empty window [{e_min}, {e_max}]"));
    }
    let n = op.dim();
    if n <= DENSE_LIMIT && !opts.iterative {
        let found = dense_select(op, |_, e| e >= e_min && e <= e_max)?;
        if found.len() > opts.max_states {
            return Err(Error::Capacity { what: "eigenpairs in window".into(), required: found.len(), budget: opts.max_states });
        }
        return Ok(found);
    }
    let sigma = 0.5 * (e_min + e_max);
    let half = 0.5 * (e_max - e_min);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut locked_values: Vec<f64> = Vec::new();
    let mut hv = vec![0.0; n];

    for _round in 0..opts.max_rounds {
        let lock_mat = Mat::from_fn(n, locked.len(), |i, j| locked[j][i]);
        let mut start = random_block(n, 1, &mut rng);
        orthonormalize(&mut start, Some(&lock_mat), &mut rng);
        let mut q: Vec<Vec<f64>> = vec![linalg::col(&start, 0).to_vec()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let steps = opts.lanczos_steps.min(n - locked.len());
        for j in 0..steps {
            let (mut w, _) = minres(op, sigma, &q[j], opts.inner_tol, opts.inner_max_iter);
            let a = linalg::dot(&q[j], &w);
            for _ in 0..2 {
                for l in &locked {
                    let c = linalg::dot(l, &w);
                    linalg::axpy(-c, l, &mut w);
                }
                for qi in &q {
                    let c = linalg::dot(qi, &w);
                    linalg::axpy(-c, qi, &mut w);
                }
            }
            alpha.push(a);
            let b = linalg::norm(&w);
            if j + 1 == steps || b < 1e-14 {
                break;
            }
            beta.push(b);
            q.push(w.iter().map(|x| x / b).collect());
        }
        let m = alpha.len();
        let t = Mat::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i.abs_diff(j) == 1 {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let (theta, s) = linalg::eigh(&t)?;
        let mut found = 0;
        for idx in 0..m {
            if theta[idx].abs() < 1.0 / (half * 1.5) {
                continue;
            }
            let mut yv = vec![0.0; n];
            for (k, qk) in q.iter().enumerate().take(m) {
                linalg::axpy(s[(k, idx)], qk, &mut yv);
            }
            for l in &locked {
                let c = linalg::dot(l, &yv);
                linalg::axpy(-c, l, &mut yv);
            }
            let nrm = linalg::norm(&yv);
            if nrm < 0.5 {
                continue;
            }
            yv.iter_mut().for_each(|x| *x /= nrm);
            op.apply(&yv, &mut hv);
            let lam = linalg::dot(&yv, &hv);
            let res = hv.iter().zip(&yv).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
            if res <= opts.tol * lam.abs().max(1.0) && lam >= e_min && lam <= e_max {
                locked.push(yv);
                locked_values.push(lam);
                found += 1;
                if locked.len() > opts.max_states {
                    return Err(Error::Capacity {
                        what: "eigenpairs in window".into(),
                        required: locked.len(),
                        budget: opts.max_states,
                    });
                }
            }
        }
        let any_inside = theta.iter().any(|&th| th.abs() >= 1.0 / half);
        if found == 0 && !any_inside {
            break;
        }
    }

    // final Rayleigh-Ritz over the locked space
    let k = locked.len();
    if k == 0 {
        return Ok(Eigenpairs { values: vec![], vectors: Mat::zeros(n, 0), residuals: vec![] });
    }
    let mut y = Mat::from_fn(n, k, |i, j| locked[j][i]);
    orthonormalize(&mut y, None, &mut rng);
    let (theta, vecs, _) = rayleigh_ritz(op, &y)?;
    let idx: Vec<usize> = (0..k).filter(|&i| theta[i] >= e_min && theta[i] <= e_max).collect();
    let values: Vec<f64> = idx.iter().map(|&i| theta[i]).collect();
    let vectors = Mat::from_fn(n, idx.len(), |r, c| vecs[(r, idx[c])]);
    let residuals = residuals(op, &values, &vectors);
    Ok(Eigenpairs { values, vectors, residuals })
}
