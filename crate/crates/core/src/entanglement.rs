//! Half-chain von Neumann entanglement entropy of states on a [`FockBasis`].
//!
//! The amplitude `C[n_L, n_R]` of a half-filled state is block diagonal in the
//! particle number of the left half, so the Schmidt values are the singular
//! values of one small matrix per left-particle-number sector.

use faer::Mat;

use crate::fock::{masks_with_popcount, FockBasis};
use crate::{Error, Result};

/// Schmidt coefficients below this are treated as exactly zero.
pub const SCHMIDT_FLOOR: f64 = 1e-12;
/// Allowed deviation of `‖ψ‖` from one.
pub const NORM_TOL: f64 = 1e-10;

/// Precomputed placement of every basis state in the Schmidt blocks of the
/// cut between sites `1..=L/2` and `L/2+1..=L`.
#[derive(Debug, Clone)]
pub struct Bipartition {
    dim: usize,
    /// `(rows, cols)` of each left-particle-number sector.
    blocks: Vec<(usize, usize)>,
    /// `(block, row, col)` for every basis index.
    placement: Vec<(usize, usize, usize)>,
}

impl Bipartition {
    pub fn new(basis: &FockBasis) -> Result<Self> {
        let l = basis.sites();
        if !l.is_multiple_of(2) {
            return Err(Error::param(format!("half-chain cut needs even L, got {l}")));
        }
        let half = l / 2;
        let n = basis.particles();
        let lo = n.saturating_sub(half);
        let hi = n.min(half);

        // rank of a half-chain mask among masks with the same popcount
        let mut rank = vec![0usize; 1 << half];
        let mut blocks = Vec::with_capacity(hi + 1 - lo);
        for n_left in lo..=hi {
            let left = masks_with_popcount(half, n_left);
            let right = masks_with_popcount(half, n - n_left);
            for (i, &m) in left.iter().enumerate() {
                rank[m as usize] = i;
            }
            for (i, &m) in right.iter().enumerate() {
                rank[m as usize] = i;
            }
            blocks.push((left.len(), right.len()));
        }

        let low_mask = (1u32 << half) - 1;
        let placement = basis
            .states()
            .iter()
            .map(|&m| {
                let left = m & low_mask;
                let right = m >> half;
                let block = left.count_ones() as usize - lo;
                (block, rank[left as usize], rank[right as usize])
            })
            .collect();
        Ok(Bipartition {
            dim: basis.dim(),
            blocks,
            placement,
        })
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.dim {
            return Err(Error::param(format!(
                "state has {} amplitudes, basis has {}",
                state.len(),
                self.dim
            )));
        }
        let norm = state.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::param(format!("state norm {norm} is not 1")));
        }
        Ok(())
    }

    /// Amplitude matrices `C[n_L, n_R]`, one per left-particle-number sector.
    pub fn amplitude_blocks(&self, state: &[f64]) -> Vec<Mat<f64>> {
        let mut mats: Vec<Mat<f64>> = self
            .blocks
            .iter()
            .map(|&(r, c)| Mat::zeros(r, c))
            .collect();
        for (&(b, r, c), &amp) in self.placement.iter().zip(state) {
            mats[b][(r, c)] = amp;
        }
        mats
    }

    /// Schmidt coefficients pooled over sectors, descending.
    pub fn schmidt_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check_state(state)?;
        let mut values = Vec::with_capacity(self.dim);
        for m in self.amplitude_blocks(state) {
            if m.nrows() == 1 || m.ncols() == 1 {
                values.push(m.norm_l2());
                continue;
            }
            let sv = m
                .singular_values()
                .map_err(|e| Error::Solver(format!("Schmidt SVD: {e:?}")))?;
            values.extend(sv);
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(values)
    }

    /// `S = −Σ λ² ln λ²` over the Schmidt coefficients `λ`.
    pub fn entropy(&self, state: &[f64]) -> Result<f64> {
        let s: f64 = self
            .schmidt_values(state)?
            .into_iter()
            .filter(|&l| l > SCHMIDT_FLOOR)
            .map(|l| {
                let p = l * l;
                -p * p.ln()
            })
            .sum();
        Ok(s.max(0.0))
    }
}

pub fn half_chain_entropy(state: &[f64], basis: &FockBasis) -> Result<f64> {
    Bipartition::new(basis)?.entropy(state)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyStats {
    pub mean: f64,
    /// `⟨S²⟩ − ⟨S⟩²` over all pooled samples.
    pub variance: f64,
    pub count: usize,
}

/// Pooled mean and variance over every (eigenstate, realization) sample.
pub fn entropy_stats(samples: &[f64]) -> Result<EntropyStats> {
    if samples.is_empty() {
        return Err(Error::param("entropy statistics of an empty sample"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let variance = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    Ok(EntropyStats {
        mean,
        variance: variance.max(0.0),
        count: samples.len(),
    })
}
