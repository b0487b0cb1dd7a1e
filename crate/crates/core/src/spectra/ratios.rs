use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Gaps smaller than this fraction of the spectral span count as degenerate.
pub const DEGENERATE_GAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRatioSample {
    pub r_values: Vec<f64>,
    /// Ratios skipped because one of their two gaps was degenerate.
    pub dropped: usize,
}

impl GapRatioSample {
    pub fn mean(&self) -> Option<f64> {
        (!self.r_values.is_empty())
            .then(|| self.r_values.iter().sum::<f64>() / self.r_values.len() as f64)
    }
}

/// Adjacent-gap ratios `r_n = min(δ_{n+1}/δ_n, δ_n/δ_{n+1})` of an ascending
/// list of levels.
pub fn gap_ratios(levels: &[f64]) -> Result<GapRatioSample> {
    if levels.len() < 3 {
        return Err(Error::param(format!(
            "gap ratios need at least 3 levels, got {}",
            levels.len()
        )));
    }
    if levels.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::param("levels must be sorted ascending"));
    }
    let span = levels[levels.len() - 1] - levels[0];
    let floor = DEGENERATE_GAP * span;
    let mut r_values = Vec::with_capacity(levels.len() - 2);
    let mut dropped = 0;
    for w in levels.windows(3) {
        let (lower, upper) = (w[1] - w[0], w[2] - w[1]);
        if lower <= floor || upper <= floor {
            dropped += 1;
        } else {
            r_values.push((lower / upper).min(upper / lower));
        }
    }
    Ok(GapRatioSample { r_values, dropped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RandomMatrixEnsemble {
    Poisson,
    Goe,
}

fn goe_shape(r: f64) -> f64 {
    (r + r * r) / (1.0 + r + r * r).powf(2.5)
}

/// Composite Simpson rule with `panels` (even) subintervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let inner: f64 = (1..panels)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// Prefactor making the GOE surmise integrate to one on `[0, 1]`.
fn goe_normalization() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| 1.0 / simpson(goe_shape, 0.0, 1.0, 20_000))
}

/// Density of the gap ratio on `[0, 1]` for Poisson levels or the GOE surmise.
pub fn reference_r_pdf(ensemble: RandomMatrixEnsemble, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::param(format!("gap ratio {r} outside [0, 1]")));
    }
    Ok(match ensemble {
        RandomMatrixEnsemble::Poisson => 2.0 / ((1.0 + r) * (1.0 + r)),
        RandomMatrixEnsemble::Goe => goe_normalization() * goe_shape(r),
    })
}

/// Reference `⟨r⟩`: `2 ln 2 − 1` for Poisson levels and the large-matrix GOE
/// value 0.5307 (the 3×3 surmise gives the slightly larger
/// [`goe_surmise_mean`]).
pub fn reference_mean_r(ensemble: RandomMatrixEnsemble) -> f64 {
    match ensemble {
        RandomMatrixEnsemble::Poisson => 2.0 * std::f64::consts::LN_2 - 1.0,
        RandomMatrixEnsemble::Goe => 0.5307,
    }
}

/// `∫ r P(r) dr` of the GOE surmise, `4 − 2√3`.
pub fn goe_surmise_mean() -> f64 {
    4.0 - 2.0 * 3f64.sqrt()
}
