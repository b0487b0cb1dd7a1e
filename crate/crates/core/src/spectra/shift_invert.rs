use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};

use super::dense::{check_dense_dim, full_spectrum, sequential_faer};
use super::krylov::{block_rayleigh_ritz, KrylovSettings, RitzPairs, RitzValues};
use super::{target_energy, target_window, SpectrumWindow};
use crate::model::SparseHamiltonian;
use crate::{Error, Result};

/// Relative residual `‖H y − λ y‖ / ‖H‖` accepted for every returned pair.
const RESIDUAL_TOL: f64 = 1e-10;
const BLOCK: usize = 16;
/// Backward error accepted from the unpivoted factorization.
const FACTOR_TOL: f64 = 1e-12;

fn residual(h: &SparseHamiltonian, y: &[f64], lambda: f64, scratch: &mut [f64]) -> f64 {
    h.apply(y, scratch);
    scratch
        .iter()
        .zip(y)
        .map(|(hy, yi)| (hy - lambda * yi).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn sparse_apply(h: &SparseHamiltonian, cols: MatRef<'_, f64>) -> Mat<f64> {
    let n = h.dim();
    let mut out = Mat::<f64>::zeros(n, cols.ncols());
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    for c in 0..cols.ncols() {
        x.iter_mut().zip(cols.col(c).iter()).for_each(|(a, b)| *a = *b);
        h.apply(&x, &mut y);
        out.col_mut(c).iter_mut().zip(&y).for_each(|(a, b)| *a = *b);
    }
    out
}

/// Smallest and largest eigenvalue by block Krylov on the sparse matrix.
pub fn spectral_bounds(h: &SparseHamiltonian) -> Result<(f64, f64)> {
    let n = h.dim();
    if n == 0 {
        return Err(Error::param("empty matrix has no spectrum"));
    }
    if n <= 64 {
        let e = full_spectrum(h, false)?;
        return Ok((e.values[0], e.values[n - 1]));
    }
    let norm = h.norm_bound().max(f64::MIN_POSITIVE);
    let mut scratch = vec![0.0; n];
    let settings = KrylovSettings {
        block: 4,
        max_dim: 1200,
        first_check: 24,
        seed: 0xb0_d5 ^ n as u64,
    };
    let pairs = block_rayleigh_ritz(
        n,
        &settings,
        |cols| Ok(sparse_apply(h, cols)),
        None::<fn(MatRef<'_, f64>) -> Mat<f64>>,
        |r: &RitzValues| vec![0, r.values.len() - 1],
        |p: &RitzPairs| {
            p.values
                .iter()
                .zip(&p.vectors)
                .all(|(&l, y)| residual(h, y, l, &mut scratch) <= RESIDUAL_TOL * norm)
        },
    )?;
    Ok((pairs.values[0], pairs.values[1]))
}

/// Symmetric factorization of `H − σI`.
enum Factor {
    Ldlt(faer::linalg::solvers::Ldlt<f64>),
    Lblt(faer::linalg::solvers::Lblt<f64>),
}

impl Factor {
    fn solve_in_place(&self, rhs: faer::MatMut<'_, f64>) {
        match self {
            Factor::Ldlt(f) => f.solve_in_place(rhs),
            Factor::Lblt(f) => f.solve_in_place(rhs),
        }
    }
}

/// Relative backward error of `x` as a solution of `a x = b`.
fn backward_error(a: &Mat<f64>, x: &Mat<f64>, b: &Mat<f64>, norm: f64) -> f64 {
    let r = a * x - b;
    let x_norm = x.norm_l2();
    if !x_norm.is_finite() {
        return f64::INFINITY;
    }
    r.norm_l2() / (norm * x_norm + b.norm_l2())
}

/// Dense factorization of `H − σI`, nudging `σ` off an exact eigenvalue.
///
/// Unpivoted `LDLᵀ` is about twice as fast as Bunch–Kaufman `LBLᵀ` but has no
/// stability guarantee on an indefinite matrix, so it is kept only when a probe
/// solve is backward stable.
fn factorize(dense: &Mat<f64>, shift: f64, norm: f64) -> Result<(Factor, f64)> {
    let n = dense.nrows();
    let probe = Mat::<f64>::from_fn(n, 1, |i, _| 1.0 + (i % 7) as f64);
    let mut shift = shift;
    for _ in 0..4 {
        let mut a = dense.clone();
        for i in 0..n {
            a[(i, i)] -= shift;
        }
        if let Ok(ldlt) = a.ldlt(Side::Lower) {
            let mut x = probe.clone();
            ldlt.solve_in_place(x.as_mut());
            if backward_error(&a, &x, &probe, norm) <= FACTOR_TOL {
                return Ok((Factor::Ldlt(ldlt), shift));
            }
        }
        let lblt = a.lblt(Side::Lower);
        let mut x = probe.clone();
        lblt.solve_in_place(x.as_mut());
        if x.col(0).iter().all(|v| v.is_finite()) {
            return Ok((Factor::Lblt(lblt), shift));
        }
        // the shift hit an eigenvalue to machine precision
        shift += 1e-9 * norm;
    }
    Err(Error::Solver(format!("H - {shift} I is numerically singular")))
}

/// Indices of the Ritz values of `H` matching the `k` dominant Ritz values
/// `θ` of `(H − σI)⁻¹`, through `λ ≈ σ + 1/θ`.
///
/// Rayleigh–Ritz with `H` on a shift-invert subspace can place spurious values
/// inside the window; the inverse has none there, so it decides which levels
/// belong to the window and `H` supplies the accurate values. Returns fewer than
/// `k` indices while two estimates still map to the same Ritz value.
fn match_inverse_ritz(r: &RitzValues, shift: f64, k: usize) -> Vec<usize> {
    let Some(theta) = r.generator else {
        return Vec::new();
    };
    let mut dominant: Vec<f64> = theta.to_vec();
    dominant.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let mut picked: Vec<usize> = dominant
        .iter()
        .take(k)
        .map(|&t| {
            let estimate = shift + 1.0 / t;
            let i = r.values.partition_point(|&v| v < estimate);
            match (i.checked_sub(1), (i < r.values.len()).then_some(i)) {
                (Some(a), Some(b)) if estimate - r.values[a] > r.values[b] - estimate => b,
                (Some(a), _) => a,
                (None, Some(b)) => b,
                (None, None) => unreachable!("projected spectrum is nonempty"),
            }
        })
        .collect();
    picked.sort_unstable();
    picked.dedup();
    picked
}

/// Windows of the `k` eigenpairs nearest each energy density, via
/// shift-invert block Krylov. Small matrices go through the dense solver.
pub fn shift_invert_windows(
    h: &SparseHamiltonian,
    eps: &[f64],
    k: usize,
    want_vectors: bool,
) -> Result<Vec<SpectrumWindow>> {
    let n = h.dim();
    check_dense_dim(n)?;
    if n < k || k == 0 {
        return Err(Error::param(format!(
            "window of {k} levels requested from a spectrum of {n}"
        )));
    }
    if n <= 4 * k.max(16) {
        let eigs = full_spectrum(h, want_vectors)?;
        return eps.iter().map(|&e| target_window(&eigs, e, k)).collect();
    }
    sequential_faer();
    let (e_min, e_max) = spectral_bounds(h)?;
    let norm = h.norm_bound().max(f64::MIN_POSITIVE);
    let dense = h.to_dense();
    let mut scratch = vec![0.0; n];

    eps.iter()
        .map(|&e| {
            let target = target_energy(e_min, e_max, e);
            let (factor, factor_shift) = factorize(&dense, target, norm)?;
            let settings = KrylovSettings {
                block: BLOCK,
                max_dim: (12 * k).max(600),
                first_check: 2 * k + BLOCK,
                seed: 0x5eed ^ (n as u64) ^ e.to_bits(),
            };
            let pairs = block_rayleigh_ritz(
                n,
                &settings,
                |cols| {
                    let mut rhs = cols.to_owned();
                    factor.solve_in_place(rhs.as_mut());
                    Ok(rhs)
                },
                Some(|cols: MatRef<'_, f64>| sparse_apply(h, cols)),
                |r: &RitzValues| match_inverse_ritz(r, factor_shift, k),
                |p: &RitzPairs| {
                    p.values.len() == k
                        && p.values.iter().zip(&p.vectors).all(|(&l, y)| {
                            let nrm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
                            residual(h, y, l, &mut scratch) <= RESIDUAL_TOL * norm * nrm
                        })
                },
            )?;

            let mut levels: Vec<(f64, Vec<f64>)> = pairs
                .values
                .iter()
                .zip(pairs.vectors)
                .map(|(&l, mut y)| {
                    let nrm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
                    y.iter_mut().for_each(|x| *x /= nrm);
                    (l, y)
                })
                .collect();
            levels.sort_by(|a, b| a.0.total_cmp(&b.0));
            let eigenvalues: Vec<f64> = levels.iter().map(|l| l.0).collect();
            Ok(SpectrumWindow {
                eps: e,
                target,
                e_min: e_min.min(eigenvalues[0]),
                e_max: e_max.max(eigenvalues[k - 1]),
                eigenvalues,
                eigenvectors: want_vectors.then(|| levels.into_iter().map(|l| l.1).collect()),
            })
        })
        .collect()
}
