//! Eigenpairs near a target energy density and adjacent-gap-ratio statistics.
//!
//! Two solvers sit behind the same window contract:
//!
//! * [`Solver::Dense`] diagonalizes the full matrix and picks the `k`
//!   eigenvalues closest to `E_target = E_min + ε (E_max − E_min)`.
//! * [`Solver::ShiftInvert`] finds `E_min`, `E_max` with a Krylov method on the
//!   sparse matrix, factorizes `H − E_target` densely and runs block Krylov
//!   Rayleigh–Ritz on `(H − E_target)^{-1}`, whose dominant eigenvalues belong
//!   to the levels nearest the target.
//!
//! Both return identical windows up to round-off; the shift-invert path is
//! several times cheaper once the dimension reaches a few thousand.

mod dense;
mod krylov;
mod ratios;
mod shift_invert;

use serde::{Deserialize, Serialize};

use crate::model::SparseHamiltonian;
use crate::{Error, Result};

pub use dense::{full_spectrum, Eigensystem, DENSE_MAX_DIM};
pub use ratios::{
    gap_ratios, goe_surmise_mean, reference_mean_r, reference_r_pdf, GapRatioSample,
    RandomMatrixEnsemble,
};
pub use shift_invert::{shift_invert_windows, spectral_bounds};

/// Default number of eigenpairs per window.
pub const DEFAULT_WINDOW: usize = 50;

/// Energy densities `0.15, 0.20, ..., 0.85`.
pub fn default_eps_grid() -> Vec<f64> {
    (3..=17).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Dense,
    ShiftInvert,
    /// Shift-invert above [`AUTO_DENSE_MAX_DIM`] for at most
    /// [`AUTO_MAX_SHIFTS`] targets, dense otherwise.
    #[default]
    Auto,
}

pub const AUTO_DENSE_MAX_DIM: usize = 1000;
/// Beyond this many targets one full diagonalization is cheaper than a
/// factorization per target.
pub const AUTO_MAX_SHIFTS: usize = 4;

impl Solver {
    fn resolve(self, dim: usize, targets: usize) -> Solver {
        match self {
            Solver::Auto if dim > AUTO_DENSE_MAX_DIM && targets <= AUTO_MAX_SHIFTS => {
                Solver::ShiftInvert
            }
            Solver::Auto => Solver::Dense,
            s => s,
        }
    }
}

/// The `k` eigenpairs nearest one target energy density.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumWindow {
    pub eps: f64,
    pub target: f64,
    pub e_min: f64,
    pub e_max: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unit vectors over the Fock basis, aligned with `eigenvalues`.
    pub eigenvectors: Option<Vec<Vec<f64>>>,
}

impl SpectrumWindow {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::param(format!("energy density {eps} outside [0, 1]")));
    }
    Ok(())
}

pub(crate) fn target_energy(e_min: f64, e_max: f64, eps: f64) -> f64 {
    e_min + eps * (e_max - e_min)
}

/// Start and end of the `k` entries of the ascending slice closest to `target`.
/// Ties go to the lower level.
pub(crate) fn nearest_range(sorted: &[f64], target: f64, k: usize) -> (usize, usize) {
    let n = sorted.len();
    let mut hi = sorted.partition_point(|&e| e < target);
    let mut lo = hi;
    while hi - lo < k {
        let take_low = if lo == 0 {
            false
        } else if hi == n {
            true
        } else {
            target - sorted[lo - 1] <= sorted[hi] - target
        };
        if take_low {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    (lo, hi)
}

/// Window of the `k` eigenpairs nearest energy density `eps` in a full spectrum.
pub fn target_window(eigs: &Eigensystem, eps: f64, k: usize) -> Result<SpectrumWindow> {
    check_eps(eps)?;
    let n = eigs.values.len();
    if n < k || k == 0 {
        return Err(Error::param(format!(
            "window of {k} levels requested from a spectrum of {n}"
        )));
    }
    let e_min = eigs.values[0];
    let e_max = eigs.values[n - 1];
    let target = target_energy(e_min, e_max, eps);
    let (lo, hi) = nearest_range(&eigs.values, target, k);
    let eigenvectors = eigs.vectors.as_ref().map(|v| {
        (lo..hi)
            .map(|c| v.col(c).iter().copied().collect())
            .collect()
    });
    Ok(SpectrumWindow {
        eps,
        target,
        e_min,
        e_max,
        eigenvalues: eigs.values[lo..hi].to_vec(),
        eigenvectors,
    })
}

/// Windows at several energy densities of one Hamiltonian.
pub fn windows(
    h: &SparseHamiltonian,
    eps: &[f64],
    k: usize,
    want_vectors: bool,
    solver: Solver,
) -> Result<Vec<SpectrumWindow>> {
    for &e in eps {
        check_eps(e)?;
    }
    if h.dim() < k || k == 0 {
        return Err(Error::param(format!(
            "window of {k} levels requested from a spectrum of {}",
            h.dim()
        )));
    }
    match solver.resolve(h.dim(), eps.len()) {
        Solver::Dense => {
            let eigs = full_spectrum(h, want_vectors)?;
            eps.iter().map(|&e| target_window(&eigs, e, k)).collect()
        }
        _ => shift_invert_windows(h, eps, k, want_vectors),
    }
}
