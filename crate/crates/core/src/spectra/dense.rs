use faer::{Mat, Side};

use crate::model::SparseHamiltonian;
use crate::{Error, Result};

/// Largest matrix dimension accepted by the dense solvers (the L = 16
/// half-filled sector has 12 870 states).
pub const DENSE_MAX_DIM: usize = 13_000;

/// Eigenvalues ascending, eigenvectors (if computed) as matching columns.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: Option<Mat<f64>>,
}

pub(crate) fn check_dense_dim(dim: usize) -> Result<()> {
    if dim > DENSE_MAX_DIM {
        return Err(Error::Resource(format!(
            "matrix dimension {dim} exceeds the dense limit {DENSE_MAX_DIM}"
        )));
    }
    Ok(())
}

pub(crate) fn sequential_faer() {
    static INIT: std::sync::Once = std::sync::Once::new();
    INIT.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

pub fn full_spectrum(h: &SparseHamiltonian, want_vectors: bool) -> Result<Eigensystem> {
    check_dense_dim(h.dim())?;
    sequential_faer();
    let m = h.to_dense();
    if want_vectors {
        let eig = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        let values: Vec<f64> = eig.S().column_vector().iter().copied().collect();
        let vectors = eig.U().to_owned();
        Ok(sort_pairs(values, Some(vectors)))
    } else {
        let values = m
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        Ok(sort_pairs(values, None))
    }
}

fn sort_pairs(values: Vec<f64>, vectors: Option<Mat<f64>>) -> Eigensystem {
    if values.windows(2).all(|w| w[0] <= w[1]) {
        return Eigensystem { values, vectors };
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted = order.iter().map(|&i| values[i]).collect();
    let vectors = vectors.map(|v| Mat::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, order[c])]));
    Eigensystem {
        values: sorted,
        vectors,
    }
}
