use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::generator::RateMatrix;
use crate::error::{Error, Result};
use crate::events::mix64;
use crate::math;

/// Spaces up to this size are solved densely; larger ones by a restarted
/// Lanczos (Krylov-Schur) iteration.
pub const DENSE_LIMIT: usize = 1500;

const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapMethod {
    Dense,
    Lanczos,
}

impl GapMethod {
    pub fn name(self) -> &'static str {
        match self {
            GapMethod::Dense => "dense",
            GapMethod::Lanczos => "lanczos",
        }
    }
}

#[derive(Clone, Debug)]
pub struct GapResult {
    pub gap: f64,
    pub method: GapMethod,
    /// `||A y - gap y||` for the unit eigenvector `y` of the symmetrized
    /// negated generator
    pub residual: f64,
    /// eigenfunction `f = y / sqrt(pi)`
    pub witness: Vec<f64>,
    /// Dirichlet form over variance at the witness
    pub variational_ratio: f64,
}

/// `A = -D^{1/2} Q D^{-1/2}`, with entries `exit_i` on the diagonal and
/// `-sqrt(q_ij q_ji)` off it; positive semidefinite with kernel
/// spanned by `sqrt(pi)`.
struct SymOp<'a> {
    m: &'a RateMatrix,
    sym: Vec<f64>,
}

impl<'a> SymOp<'a> {
    fn new(m: &'a RateMatrix) -> Self {
        let mut sym = Vec::with_capacity(m.nnz());
        for i in 0..m.len() {
            for (j, q) in m.row(i) {
                sym.push(m.sym_rate(i, q, j));
            }
        }
        Self { m, sym }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut k = 0;
        for i in 0..self.m.len() {
            let (c, _) = self.m.row_slices(i);
            let mut acc = self.m.exit_rate(i) * x[i];
            for &j in c {
                acc -= self.sym[k] * x[j as usize];
                k += 1;
            }
            y[i] = acc;
        }
    }

    fn dense(&self) -> DMatrix<f64> {
        let n = self.m.len();
        let mut a = DMatrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            a[(i, i)] = self.m.exit_rate(i);
            let (c, _) = self.m.row_slices(i);
            for &j in c {
                a[(i, j as usize)] = -self.sym[k];
                k += 1;
            }
        }
        a
    }
}

/// Inverse iteration on the dense operator `a`, shifted just below `lambda`,
/// orthogonal to the unit vectors in `against`. The dense solver alone can
/// leave eigenvector residuals near 1e-9 on clustered spectra.
fn refine(a: &DMatrix<f64>, lambda: f64, v: &[f64], against: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let n = a.nrows();
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let residual = |lam: f64, x: &[f64]| {
        let ax = a * DVector::from_column_slice(x);
        math::sqrt(ax.iter().zip(x).map(|(p, q)| (p - lam * q) * (p - lam * q)).sum::<f64>())
    };
    let (mut lam, mut x) = (lambda, v.to_vec());
    let mut res = residual(lam, &x);
    for _ in 0..3 {
        if res <= 1e-13 * scale {
            break;
        }
        let shifted = a - DMatrix::identity(n, n) * (lam - 1e-9 * scale);
        let Some(y) = shifted.lu().solve(&DVector::from_column_slice(&x)) else { break };
        let mut y: Vec<f64> = y.iter().copied().collect();
        for _ in 0..2 {
            for u in against {
                let c = dot(u, &y);
                axpy(-c, u, &mut y);
            }
        }
        let ny = norm(&y);
        if !(ny.is_finite() && ny > 0.0) {
            break;
        }
        y.iter_mut().for_each(|t| *t /= ny);
        let ay = a * DVector::from_column_slice(&y);
        let next_lam = dot(ay.as_slice(), &y);
        let next_res = residual(next_lam, &y);
        if next_res >= res {
            break;
        }
        (lam, x, res) = (next_lam, y, next_res);
    }
    (lam, x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

fn check_reversible(m: &RateMatrix) -> Result<()> {
    let scale = (0..m.len()).map(|i| m.pi()[i] * m.exit_rate(i)).fold(0.0, f64::max);
    let r = m.reversibility_residual();
    if r > 1e-10 * scale.max(1e-300) {
        return Err(Error::NotReversible(r));
    }
    Ok(())
}

/// The `nev` smallest eigenpairs of `A` on the complement of `sqrt(pi)`,
/// eigenvectors unit-normalized in the Euclidean norm.
fn lowest_pairs(m: &RateMatrix, nev: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>, GapMethod)> {
    let n = m.len();
    if n < 2 {
        return Err(Error::InvalidParameters("need at least two states"));
    }
    let nev = nev.min(n - 1);
    let op = SymOp::new(m);
    let ground: Vec<f64> = m.pi().iter().map(|&p| math::sqrt(p)).collect();
    if n <= DENSE_LIMIT {
        let dense = op.dense();
        let eig = SymmetricEigen::new(dense.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        // the ground state is the eigenvector closest to sqrt(pi)
        let g = order
            .iter()
            .copied()
            .max_by(|&a, &b| {
                let da = math::abs(dot(eig.eigenvectors.column(a).as_slice(), &ground));
                let db = math::abs(dot(eig.eigenvectors.column(b).as_slice(), &ground));
                da.total_cmp(&db)
            })
            .unwrap();
        let picked: Vec<usize> = order.into_iter().filter(|&i| i != g).take(nev).collect();
        let gn = norm(&ground);
        let mut against = vec![ground.iter().map(|x| x / gn).collect::<Vec<f64>>()];
        let mut vals = Vec::with_capacity(picked.len());
        for &i in &picked {
            let col: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let (lam, v) = refine(&dense, eig.eigenvalues[i], &col, &against);
            vals.push(lam);
            against.push(v);
        }
        let vecs = against.split_off(1);
        return Ok((vals, vecs, GapMethod::Dense));
    }
    let (vals, vecs) = krylov_schur(&op, n, &ground, nev)?;
    Ok((vals, vecs, GapMethod::Lanczos))
}

/// Thick-restarted Lanczos with full reorthogonalization, deflating the
/// unit vector `g`.
fn krylov_schur(op: &SymOp<'_>, n: usize, g: &[f64], nev: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let m = (2 * nev + 30).max(40).min(n - 1);
    let keep = (nev + (m - nev) / 3).min(m - 2).max(nev);
    let gn = norm(g);
    let g: Vec<f64> = g.iter().map(|x| x / gn).collect();

    let orthogonalize = |w: &mut [f64], basis: &[Vec<f64>], coeffs: &mut [f64]| {
        for _ in 0..2 {
            let cg = dot(&g, w);
            axpy(-cg, &g, w);
            for (i, v) in basis.iter().enumerate() {
                let c = dot(v, w);
                axpy(-c, v, w);
                coeffs[i] += c;
            }
        }
    };

    let mut start: Vec<f64> = (0..n).map(|i| (mix64(i as u64) >> 11) as f64 / (1u64 << 53) as f64 - 0.5).collect();
    let mut scratch = vec![0.0; m + 1];
    orthogonalize(&mut start, &[], &mut scratch);
    let s0 = norm(&start);
    start.iter_mut().for_each(|x| *x /= s0);

    let mut basis: Vec<Vec<f64>> = vec![start];
    let mut h = DMatrix::<f64>::zeros(m + 1, m);
    let mut p = 0usize;
    let mut w = vec![0.0; n];
    let mut last_res = f64::INFINITY;
    for _restart in 0..2000 {
        for j in p..m {
            op.apply(&basis[j], &mut w);
            let mut coeffs = vec![0.0; j + 1];
            orthogonalize(&mut w, &basis[..=j], &mut coeffs);
            for (i, c) in coeffs.iter().enumerate() {
                h[(i, j)] += c;
            }
            let mut beta = norm(&w);
            if beta < 1e-13 {
                // invariant subspace: continue with a fresh direction
                for (i, x) in w.iter_mut().enumerate() {
                    *x = (mix64((i as u64) ^ ((j as u64) << 40)) >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                }
                let mut junk = vec![0.0; j + 1];
                orthogonalize(&mut w, &basis[..=j], &mut junk);
                let nn = norm(&w);
                w.iter_mut().for_each(|x| *x /= nn);
                beta = 0.0;
                basis.truncate(j + 1);
                basis.push(w.clone());
            } else {
                basis.truncate(j + 1);
                basis.push(w.iter().map(|x| x / beta).collect());
            }
            h[(j + 1, j)] = beta;
        }
        let t = DMatrix::from_fn(m, m, |i, k| 0.5 * (h[(i, k)] + h[(k, i)]));
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let beta = h[(m, m - 1)];
        let res: Vec<f64> = order.iter().map(|&i| math::abs(beta * eig.eigenvectors[(m - 1, i)])).collect();
        last_res = res[..nev].iter().cloned().fold(0.0, f64::max);
        let done = last_res < 0.1 * RESIDUAL_TOL;
        let k = if done { nev } else { keep };
        let mut new_basis: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
        for &col in order.iter().take(k) {
            let mut y = vec![0.0; n];
            for (jj, v) in basis.iter().take(m).enumerate() {
                axpy(eig.eigenvectors[(jj, col)], v, &mut y);
            }
            new_basis.push(y);
        }
        if done {
            let vals = order.iter().take(nev).map(|&i| eig.eigenvalues[i]).collect();
            return Ok((vals, new_basis));
        }
        new_basis.push(basis[m].clone());
        basis = new_basis;
        h.fill(0.0);
        for (i, &col) in order.iter().take(k).enumerate() {
            h[(i, i)] = eig.eigenvalues[col];
            h[(k, i)] = beta * eig.eigenvectors[(m - 1, col)];
        }
        p = k;
    }
    Err(Error::NoConvergence(last_res))
}

/// Spectral gap of a reversible generator: the smallest nonzero
/// eigenvalue of `-Q`, from the symmetrization `D^{1/2} Q D^{-1/2}`.
pub fn exact_gap(m: &RateMatrix) -> Result<GapResult> {
    check_reversible(m)?;
    let (vals, vecs, method) = lowest_pairs(m, 1)?;
    let y = &vecs[0];
    let gap = vals[0];
    let op = SymOp::new(m);
    let mut ay = vec![0.0; y.len()];
    op.apply(y, &mut ay);
    axpy(-gap, y, &mut ay);
    let residual = norm(&ay) / norm(y);
    if residual > RESIDUAL_TOL {
        return Err(Error::NoConvergence(residual));
    }
    let witness: Vec<f64> = y.iter().zip(m.pi()).map(|(v, p)| v / math::sqrt(*p)).collect();
    let variational_ratio = m.dirichlet(&witness) / m.variance(&witness);
    Ok(GapResult { gap, method, residual, witness, variational_ratio })
}

/// The `k` smallest nonzero eigenvalues of `-Q` with eigenfunctions
/// normalized in `L^2(pi)`.
pub fn smallest_eigenpairs(m: &RateMatrix, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    check_reversible(m)?;
    let (vals, vecs, _) = lowest_pairs(m, k)?;
    let fs = vecs
        .into_iter()
        .map(|y| {
            let ny = norm(&y);
            y.iter().zip(m.pi()).map(|(v, p)| v / ny / math::sqrt(*p)).collect()
        })
        .collect();
    Ok((vals, fs))
}
