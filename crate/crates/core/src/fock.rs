//! Fixed-particle-number occupation basis.
//!
//! Site `j` (1-based, as in the lattice potential `V_j`) is stored in bit
//! `j - 1` of a `u32` mask. States are kept in increasing integer order.

use crate::{Error, Result};

/// Largest supported chain length.
pub const MAX_SITES: usize = 28;

/// Occupation mask; bit `j - 1` set means site `j` is occupied.
pub type Mask = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    sites: usize,
    particles: usize,
    states: Vec<Mask>,
}

/// Binomial coefficient, exact for the sizes used here.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) after the multiplication
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// Next larger integer with the same popcount (Gosper's hack).
fn next_same_popcount(v: u64) -> u64 {
    let t = v | (v - 1);
    (t + 1) | (((!t & (!t).wrapping_neg()) - 1) >> (v.trailing_zeros() + 1))
}

/// All masks of `sites` bits with exactly `particles` bits set, ascending.
pub(crate) fn masks_with_popcount(sites: usize, particles: usize) -> Vec<Mask> {
    let dim = binomial(sites, particles) as usize;
    let mut out = Vec::with_capacity(dim);
    if particles == 0 {
        out.push(0);
        return out;
    }
    let limit = 1u64 << sites;
    let mut v: u64 = (1u64 << particles) - 1;
    while v < limit {
        out.push(v as Mask);
        v = next_same_popcount(v);
    }
    out
}

pub fn enumerate_basis(sites: usize, particles: usize) -> Result<FockBasis> {
    if sites > MAX_SITES {
        return Err(Error::param(format!(
            "L = {sites} exceeds the supported maximum of {MAX_SITES} sites"
        )));
    }
    if particles > sites {
        return Err(Error::param(format!(
            "N = {particles} particles do not fit on L = {sites} sites"
        )));
    }
    Ok(FockBasis {
        sites,
        particles,
        states: masks_with_popcount(sites, particles),
    })
}

impl FockBasis {
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Mask] {
        &self.states
    }

    pub fn state(&self, index: usize) -> Mask {
        self.states[index]
    }

    /// Position of `mask` in the canonical order, by binary search.
    pub fn state_index(&self, mask: Mask) -> Result<usize> {
        self.states
            .binary_search(&mask)
            .map_err(|_| Error::NotFound { mask })
    }

    pub fn is_occupied(mask: Mask, site: usize) -> bool {
        mask >> (site - 1) & 1 == 1
    }
}
