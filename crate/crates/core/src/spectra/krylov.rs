//! Block Krylov subspace with full reorthogonalization and Rayleigh–Ritz
//! extraction, for symmetric operators given only through their action on a
//! block of vectors.

use faer::{Mat, MatRef, Side};
use rand_chacha::rand_core::RngCore;

use crate::model::rng_from_seed;
use crate::{Error, Result};

pub(crate) struct RitzPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

pub(crate) struct KrylovSettings {
    pub block: usize,
    pub max_dim: usize,
    /// Subspace size at which convergence checks begin.
    pub first_check: usize,
    pub seed: u64,
}

fn random_block(n: usize, cols: usize, rng: &mut impl RngCore) -> Mat<f64> {
    Mat::from_fn(n, cols, |_, _| {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    })
}

/// Orthonormalize the columns of `block` against the orthonormal columns of
/// `basis` and among themselves (two block Gram–Schmidt passes). Columns that
/// collapse are replaced by fresh random directions; those that keep
/// collapsing are dropped.
fn orthonormalize(basis: MatRef<'_, f64>, block: Mat<f64>, rng: &mut impl RngCore) -> Mat<f64> {
    let n = block.nrows();
    let mut block = block;
    for attempt in 0..4 {
        let before: Vec<f64> = (0..block.ncols()).map(|j| block.col(j).norm_l2()).collect();
        if basis.ncols() > 0 {
            for _ in 0..2 {
                let c = basis.transpose() * &block;
                block -= basis * &c;
            }
        }
        let mut collapsed = Vec::new();
        for (j, &norm) in before.iter().enumerate() {
            for _ in 0..2 {
                for i in 0..j {
                    if collapsed.contains(&i) {
                        continue;
                    }
                    let c = block.col(i).transpose() * block.col(j);
                    let qi = block.col(i).to_owned();
                    block.col_mut(j).iter_mut().zip(qi.iter()).for_each(|(x, q)| *x -= c * q);
                }
            }
            let after = block.col(j).norm_l2();
            if after > 1e-10 * norm && after > 0.0 {
                block.col_mut(j).iter_mut().for_each(|x| *x /= after);
            } else {
                collapsed.push(j);
            }
        }
        if collapsed.is_empty() {
            return block;
        }
        if attempt == 3 {
            let keep: Vec<usize> = (0..block.ncols()).filter(|j| !collapsed.contains(j)).collect();
            return Mat::from_fn(n, keep.len(), |r, c| block[(r, keep[c])]);
        }
        let fresh = random_block(n, collapsed.len(), rng);
        for (f, &j) in collapsed.iter().enumerate() {
            block.col_mut(j).copy_from(fresh.col(f));
        }
    }
    unreachable!()
}

/// Ritz values offered to a selection rule.
pub(crate) struct RitzValues<'a> {
    /// Ascending Ritz values of the operator the pairs are extracted from.
    pub values: &'a [f64],
    /// Ascending Ritz values of the generating operator, when extraction uses
    /// a different one.
    pub generator: Option<&'a [f64]>,
}

/// Fill the columns `start..start + b` (and the mirrored rows) of the
/// projection `Qᵀ W`, symmetrizing the new diagonal block.
fn update_projection(proj: &mut Mat<f64>, basis: MatRef<'_, f64>, images: MatRef<'_, f64>, start: usize) {
    let m = basis.ncols();
    let b = m - start;
    let c = basis.transpose() * images.subcols(start, b);
    for j in 0..b {
        for i in 0..m {
            let v = if i >= start {
                0.5 * (c[(i, j)] + c[(start + j, i - start)])
            } else {
                c[(i, j)]
            };
            proj[(i, start + j)] = v;
            proj[(start + j, i)] = v;
        }
    }
}

fn projected_eigen(proj: &Mat<f64>, m: usize) -> Result<(Vec<f64>, Mat<f64>)> {
    let eig = proj
        .submatrix(0, 0, m, m)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Solver(format!("projected eigenproblem: {e:?}")))?;
    let values = eig.S().column_vector().iter().copied().collect();
    Ok((values, eig.U().to_owned()))
}

fn projected_values(proj: &Mat<f64>, m: usize) -> Result<Vec<f64>> {
    proj.submatrix(0, 0, m, m)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Solver(format!("projected eigenproblem: {e:?}")))
}

/// Grow a Krylov basis of `apply` until `accept` is satisfied by the Ritz
/// pairs chosen by `select` (indices into the ascending Ritz values).
///
/// With `extract`, the Ritz pairs are those of `extract` on the subspace
/// instead of those of `apply`; a shift-invert solver uses it to read
/// eigenpairs from `H` itself rather than from the ill-conditioned inverse.
pub(crate) fn block_rayleigh_ritz<A, E, S, C>(
    n: usize,
    settings: &KrylovSettings,
    mut apply: A,
    mut extract: Option<E>,
    select: S,
    mut accept: C,
) -> Result<RitzPairs>
where
    A: FnMut(MatRef<'_, f64>) -> Result<Mat<f64>>,
    E: FnMut(MatRef<'_, f64>) -> Mat<f64>,
    S: Fn(&RitzValues) -> Vec<usize>,
    C: FnMut(&RitzPairs) -> bool,
{
    let max_dim = settings.max_dim.min(n);
    let mut rng = rng_from_seed(settings.seed);
    let mut basis = Mat::<f64>::zeros(n, max_dim);
    let mut images = Mat::<f64>::zeros(n, max_dim);
    let mut extracted = Mat::<f64>::zeros(n, if extract.is_some() { max_dim } else { 0 });
    let mut proj = Mat::<f64>::zeros(max_dim, max_dim);
    let mut proj_extract = Mat::<f64>::zeros(max_dim, max_dim);
    let mut next_check = settings.first_check;
    let mut m = 0;

    let mut block = random_block(n, settings.block.min(max_dim), &mut rng);
    block = orthonormalize(basis.subcols(0, 0), block, &mut rng);

    loop {
        let b = block.ncols();
        if b == 0 {
            return Err(Error::Solver("Krylov space exhausted".into()));
        }
        let start = m;
        m += b;
        basis.subcols_mut(start, b).copy_from(&block);
        images.subcols_mut(start, b).copy_from(apply(block.as_ref())?);
        update_projection(&mut proj, basis.subcols(0, m), images.subcols(0, m), start);
        if let Some(op) = extract.as_mut() {
            extracted.subcols_mut(start, b).copy_from(op(block.as_ref()));
            update_projection(&mut proj_extract, basis.subcols(0, m), extracted.subcols(0, m), start);
        }

        let done = m >= max_dim;
        if m >= next_check || done {
            next_check = (m + settings.block).max(m * 5 / 4);
            let (theta, s, generator) = if extract.is_some() {
                let (values, vectors) = projected_eigen(&proj_extract, m)?;
                (values, vectors, Some(projected_values(&proj, m)?))
            } else {
                let (values, vectors) = projected_eigen(&proj, m)?;
                (values, vectors, None)
            };
            let wanted = select(&RitzValues {
                values: &theta,
                generator: generator.as_deref(),
            });
            let coeffs = Mat::<f64>::from_fn(m, wanted.len(), |r, c| s[(r, wanted[c])]);
            let y = basis.subcols(0, m) * &coeffs;
            let pairs = RitzPairs {
                values: wanted.iter().map(|&i| theta[i]).collect(),
                vectors: (0..wanted.len()).map(|c| y.col(c).iter().copied().collect()).collect(),
            };
            if accept(&pairs) {
                log::debug!("Ritz pairs converged in a {m}-dimensional subspace");
                return Ok(pairs);
            }
            if done {
                return Err(Error::Solver(format!(
                    "Ritz pairs not converged with a {m}-dimensional subspace"
                )));
            }
        }

        let width = b.min(max_dim - m);
        block = images.subcols(start, width).to_owned();
        block = orthonormalize(basis.subcols(0, m), block, &mut rng);
    }
}

