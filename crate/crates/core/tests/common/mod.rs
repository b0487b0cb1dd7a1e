//! Independent reference implementations shared by the integration tests and
//! the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeMap;

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use starkmbl::collapse::{CollapseInput, CurvePoint};

/// Fermionic annihilation on bit `i`, with the Jordan–Wigner sign from the
/// occupied bits below it.
fn annihilate(state: u32, i: usize) -> Option<(u32, f64)> {
    if state >> i & 1 == 0 {
        return None;
    }
    let below = (state & ((1u32 << i) - 1)).count_ones();
    Some((state & !(1 << i), if below.is_multiple_of(2) { 1.0 } else { -1.0 }))
}

fn create(state: u32, i: usize) -> Option<(u32, f64)> {
    if state >> i & 1 == 1 {
        return None;
    }
    let below = (state & ((1u32 << i) - 1)).count_ones();
    Some((state | (1 << i), if below.is_multiple_of(2) { 1.0 } else { -1.0 }))
}

fn number(state: u32, i: usize) -> f64 {
    (state >> i & 1) as f64
}

/// Dense Hamiltonian in the basis of all `N`-particle masks in ascending
/// order, built by applying each second-quantized term to every basis state.
/// Site `j` (1-based) is bit `j − 1`. Diagonal terms are accumulated bonds
/// first, then sites, in increasing order.
pub fn brute_force_hamiltonian(
    sites: usize,
    particles: usize,
    hopping: f64,
    interaction: f64,
    field: f64,
    h: &[f64],
) -> Vec<Vec<f64>> {
    let states: Vec<u32> = (0u32..1 << sites)
        .filter(|s| s.count_ones() as usize == particles)
        .collect();
    let index: BTreeMap<u32, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let dim = states.len();
    let mut m = vec![vec![0.0; dim]; dim];
    for (col, &s) in states.iter().enumerate() {
        // c†_a c_b for both hopping directions on each bond
        for j in 0..sites.saturating_sub(1) {
            for (a, b) in [(j, j + 1), (j + 1, j)] {
                if let Some((t, s1)) = annihilate(s, b) {
                    if let Some((t, s2)) = create(t, a) {
                        m[index[&t]][col] += 0.5 * hopping * s1 * s2;
                    }
                }
            }
        }
        let mut diag = 0.0;
        for j in 0..sites.saturating_sub(1) {
            if number(s, j) * number(s, j + 1) == 1.0 {
                diag += interaction;
            }
        }
        for j in 0..sites {
            if number(s, j) == 1.0 {
                diag += h[j] - field * (j + 1) as f64;
            }
        }
        m[col][col] = diag;
    }
    m
}

/// Half-chain entropy from the reduced density matrix of the left half,
/// `ρ_A = Tr_B |ψ⟩⟨ψ|`, assembled over the full `2^L` space.
pub fn entropy_from_density_matrix(state: &[f64], masks: &[u32], sites: usize) -> f64 {
    let half = sites / 2;
    let left_dim = 1usize << half;
    let mut psi = vec![vec![0.0; 1 << (sites - half)]; left_dim];
    for (&amp, &m) in state.iter().zip(masks) {
        let left = (m as usize) & (left_dim - 1);
        let right = (m as usize) >> half;
        psi[left][right] = amp;
    }
    let rho = Mat::<f64>::from_fn(left_dim, left_dim, |a, b| {
        psi[a].iter().zip(&psi[b]).map(|(x, y)| x * y).sum()
    });
    let p = rho.self_adjoint_eigenvalues(Side::Lower).unwrap();
    p.into_iter()
        .filter(|&x| x > 1e-24)
        .map(|x| -x * x.ln())
        .sum()
}

pub fn random_unit_vector(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Smooth crossover from 1 to 0 that stays off its plateaus over the data.
pub fn scaling_function(x: f64) -> f64 {
    0.5 - 0.5 * (x / 10.0).tanh()
}

/// Curves `y = g((F − F_c) L^{1/ν})` on `F = 0.2, 0.3, …, 2.0`, optionally
/// with multiplicative Gaussian noise of relative size `noise`.
pub fn planted_curves(field_c: f64, nu: f64, sizes: &[usize], noise: f64, seed: u64) -> CollapseInput {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let curves = sizes
        .iter()
        .map(|&l| {
            let pts = (0..=18)
                .map(|i| {
                    let f = 0.2 + 0.1 * i as f64;
                    let y = scaling_function((f - field_c) * (l as f64).powf(1.0 / nu));
                    let xi: f64 = rng.sample(StandardNormal);
                    CurvePoint {
                        field: f,
                        value: y * (1.0 + noise * xi),
                        stderr: noise * y,
                    }
                })
                .collect();
            (l, pts)
        })
        .collect();
    CollapseInput::new(0.5, curves).unwrap()
}
