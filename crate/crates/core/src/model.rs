//! Tilted, disordered chain of spinless fermions with nearest-neighbour
//! tunneling and interaction, open boundaries.
//!
//! ```text
//! H = Σ_{j=1}^{L-1} [ J/2 (c†_j c_{j+1} + h.c.) + U n_j n_{j+1} ] + Σ_{j=1}^{L} V_j n_j
//! V_j = h_j − F j,   h_j ~ U[−W, W]
//! ```
//!
//! Only nearest-neighbour hops occur, so no Jordan–Wigner string sign ever
//! appears and every off-diagonal element equals `+J/2`.

use std::io::Write;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fock::{FockBasis, Mask};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub sites: usize,
    pub particles: usize,
    /// Tunneling scale `J`; the hopping amplitude is `J/2`.
    pub hopping: f64,
    /// Nearest-neighbour interaction `U`.
    pub interaction: f64,
    /// Field strength `F`.
    pub field: f64,
    /// Disorder strength `W`.
    pub disorder: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

impl LatticeParams {
    /// Half-filled chain with `J = U = 1`.
    pub fn half_filled(sites: usize, field: f64, disorder: f64) -> Self {
        LatticeParams {
            sites,
            particles: sites / 2,
            hopping: 1.0,
            interaction: 1.0,
            field,
            disorder,
            boundary: Boundary::Open,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles > self.sites {
            return Err(Error::param(format!(
                "N = {} exceeds L = {}",
                self.particles, self.sites
            )));
        }
        if !(self.field >= 0.0 && self.field.is_finite()) {
            return Err(Error::param(format!("field F = {} must be >= 0", self.field)));
        }
        if !(self.disorder >= 0.0 && self.disorder.is_finite()) {
            return Err(Error::param(format!(
                "disorder W = {} must be >= 0",
                self.disorder
            )));
        }
        if !self.hopping.is_finite() || !self.interaction.is_finite() {
            return Err(Error::param("J and U must be finite"));
        }
        Ok(())
    }

    /// Site potential `V_j = h_j − F j` for the 1-based site `j`.
    pub fn potential(&self, disorder: &DisorderRealization, site: usize) -> f64 {
        disorder.h[site - 1] - self.field * site as f64
    }
}

/// One draw of the random on-site energies `h_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub seed: u64,
    pub h: Vec<f64>,
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable seed for a tuple of integer keys, e.g. `(master_seed, L, realization)`.
pub fn derive_seed(keys: &[u64]) -> u64 {
    keys.iter().fold(0x5eed_0f5e_ed0f_5eedu64, |acc, &k| {
        splitmix64(acc.wrapping_add(GOLDEN_GAMMA) ^ splitmix64(k.wrapping_add(GOLDEN_GAMMA)))
    })
}

/// ChaCha8 stream whose 256-bit key is expanded from `seed` by splitmix64.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN_GAMMA);
        chunk.copy_from_slice(&splitmix64(state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Uniform double in `[0, 1)` from the top 53 bits.
fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn sample_disorder(disorder: f64, sites: usize, seed: u64) -> Result<DisorderRealization> {
    if !(disorder >= 0.0 && disorder.is_finite()) {
        return Err(Error::param(format!("disorder W = {disorder} must be >= 0")));
    }
    let mut rng = rng_from_seed(seed);
    let h = (0..sites)
        .map(|_| disorder * (2.0 * unit_f64(&mut rng) - 1.0))
        .collect();
    Ok(DisorderRealization { seed, h })
}

/// Real symmetric matrix stored as upper-triangle triplets `(row, col, value)`
/// with `row <= col`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHamiltonian {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseHamiltonian {
    pub fn from_triplets(dim: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = entries.iter().find(|&&(r, c, _)| r > c || c >= dim) {
            return Err(Error::param(format!(
                "triplet ({r}, {c}) is not in the upper triangle of a {dim}x{dim} matrix"
            )));
        }
        Ok(SparseHamiltonian { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn off_diagonal_count(&self) -> usize {
        self.entries.iter().filter(|e| e.0 != e.1).count()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for &(r, c, v) in &self.entries {
            if r == c {
                d[r] += v;
            }
        }
        d
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// Upper bound on the spectral norm (maximum absolute row sum).
    pub fn norm_bound(&self) -> f64 {
        let mut rows = vec![0.0f64; self.dim];
        for &(r, c, v) in &self.entries {
            rows[r] += v.abs();
            if r != c {
                rows[c] += v.abs();
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
            if r != c {
                y[c] += v * x[r];
            }
        }
    }

    pub fn to_dense(&self) -> faer::Mat<f64> {
        let mut m = faer::Mat::<f64>::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
            if r != c {
                m[(c, r)] += v;
            }
        }
        m
    }

    /// Coordinate text dump, one `row col value` line per stored triplet.
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "% symmetric {} {} {}", self.dim, self.dim, self.entries.len())?;
        for &(r, c, v) in &self.entries {
            writeln!(out, "{r} {c} {v:e}")?;
        }
        Ok(())
    }
}

/// Diagonal energy of one occupation configuration: interaction bonds first,
/// then the on-site potential, both in increasing site order.
fn diagonal_energy(params: &LatticeParams, potential: &[f64], mask: Mask) -> f64 {
    let l = params.sites;
    let mut e = 0.0;
    for j in 1..l {
        if FockBasis::is_occupied(mask, j) && FockBasis::is_occupied(mask, j + 1) {
            e += params.interaction;
        }
    }
    for j in 1..=l {
        if FockBasis::is_occupied(mask, j) {
            e += potential[j - 1];
        }
    }
    e
}

pub fn build_hamiltonian(
    params: &LatticeParams,
    disorder: &DisorderRealization,
    basis: &FockBasis,
) -> Result<SparseHamiltonian> {
    params.validate()?;
    if basis.sites() != params.sites || basis.particles() != params.particles {
        return Err(Error::param(format!(
            "basis (L={}, N={}) does not match parameters (L={}, N={})",
            basis.sites(),
            basis.particles(),
            params.sites,
            params.particles
        )));
    }
    if disorder.h.len() != params.sites {
        return Err(Error::param(format!(
            "disorder has {} sites, expected {}",
            disorder.h.len(),
            params.sites
        )));
    }

    let l = params.sites;
    let potential: Vec<f64> = (1..=l).map(|j| params.potential(disorder, j)).collect();
    let amplitude = 0.5 * params.hopping;

    let mut entries = Vec::with_capacity(basis.dim() * (l / 2 + 1));
    for (row, &mask) in basis.states().iter().enumerate() {
        entries.push((row, row, diagonal_energy(params, &potential, mask)));
        for j in 1..l {
            let pair = 0b11 << (j - 1);
            let bits = mask & pair;
            // exactly one of sites j, j+1 occupied: the hop swaps them
            if bits != 0 && bits != pair {
                let target = mask ^ pair;
                let col = basis.state_index(target)?;
                if row < col {
                    entries.push((row, col, amplitude));
                }
            }
        }
    }
    Ok(SparseHamiltonian {
        dim: basis.dim(),
        entries,
    })
}
