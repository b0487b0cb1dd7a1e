//! Finite-size-scaling collapse of `⟨r⟩(F)` curves.
//!
//! Each curve is mapped to `x = (F − F_c) L^{1/ν}` and interpolated by a
//! natural cubic spline `y_L(x)`. The cost
//!
//! ```text
//! D(F_c, ν) = 1/(2wR) Σ_{i<j} ∫_{−wR}^{wR} (y_i(x) − y_j(x))² dx
//! ```
//!
//! is integrated only where both curves of a pair are defined, with `R` the
//! rescaled width of the smallest system's curve. For every window width `w`
//! the cost is minimized by a grid search followed by Nelder–Mead; the
//! reported `(F_c, ν)` are means over `w` and the errors their standard
//! deviations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleRecord;
use crate::par::{self, Execution};
use crate::{Error, Result};

/// Cost added for a pair of curves without common support.
pub const EMPTY_OVERLAP_PENALTY: f64 = 1e3;
pub const FIELD_STEP: f64 = 0.02;
pub const NU_RANGE: (f64, f64) = (0.3, 2.0);
pub const NU_STEP: f64 = 0.02;
const MIN_POINTS: usize = 5;

/// `w = 0.1, 0.2, ..., 1.0`.
pub fn default_w_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub field: f64,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseInput {
    pub eps: f64,
    /// System size → points with strictly increasing field.
    pub curves: BTreeMap<usize, Vec<CurvePoint>>,
}

impl CollapseInput {
    pub fn new(eps: f64, curves: BTreeMap<usize, Vec<CurvePoint>>) -> Result<Self> {
        let input = CollapseInput { eps, curves };
        input.validate()?;
        Ok(input)
    }

    /// Gather the `mean_r` curves of every size at energy density `eps`.
    pub fn from_records(records: &[EnsembleRecord], eps: f64) -> Result<Self> {
        let mut curves: BTreeMap<usize, Vec<CurvePoint>> = BTreeMap::new();
        for r in records.iter().filter(|r| (r.eps - eps).abs() < 1e-9) {
            curves.entry(r.sites).or_default().push(CurvePoint {
                field: r.field,
                value: r.mean_r,
                stderr: r.stderr_r,
            });
        }
        for pts in curves.values_mut() {
            pts.sort_by(|a, b| a.field.total_cmp(&b.field));
        }
        CollapseInput::new(eps, curves)
    }

    pub fn validate(&self) -> Result<()> {
        if self.curves.len() < 2 {
            return Err(Error::param(format!(
                "collapse at eps = {} needs at least 2 system sizes, found {}",
                self.eps,
                self.curves.len()
            )));
        }
        for (&l, pts) in &self.curves {
            if l == 0 {
                return Err(Error::param("system size must be positive"));
            }
            if pts.len() < MIN_POINTS {
                return Err(Error::param(format!(
                    "curve L = {l} has {} points, at least {MIN_POINTS} required",
                    pts.len()
                )));
            }
            if pts.windows(2).any(|w| !(w[0].field < w[1].field)) {
                return Err(Error::param(format!("curve L = {l}: F must be strictly increasing")));
            }
            if pts.iter().any(|p| !p.field.is_finite() || !p.value.is_finite()) {
                return Err(Error::param(format!("curve L = {l} has non-finite data")));
            }
        }
        Ok(())
    }

    /// Field interval shared by all curves.
    pub fn field_range(&self) -> (f64, f64) {
        let lo = self.curves.values().map(|c| c[0].field).fold(f64::NEG_INFINITY, f64::max);
        let hi = self
            .curves
            .values()
            .map(|c| c[c.len() - 1].field)
            .fold(f64::INFINITY, f64::min);
        (lo, hi)
    }
}

pub fn rescale(fields: &[f64], field_c: f64, nu: f64, size: usize) -> Result<Vec<f64>> {
    if !(nu > 0.0) {
        return Err(Error::param(format!("exponent nu = {nu} must be positive")));
    }
    if size == 0 {
        return Err(Error::param("system size must be positive"));
    }
    let scale = (size as f64).powf(1.0 / nu);
    Ok(fields.iter().map(|f| (f - field_c) * scale).collect())
}

/// Natural cubic spline through `(x_i, y_i)` with strictly increasing `x`.
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior second derivatives (Thomas algorithm)
            let mut diag = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
                if i > 1 {
                    let w = h0 / diag[i - 1];
                    diag[i] -= w * upper[i - 1];
                    rhs[i] -= w * rhs[i - 1];
                }
            }
            m[n - 2] = rhs[n - 2] / diag[n - 2];
            for i in (1..n - 2).rev() {
                m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
            }
        }
        NaturalSpline { x, y, m }
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = self.x.partition_point(|&v| v <= t).clamp(1, n - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

const GAUSS_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// `∫_a^b (p(x) − q(x))² dx`, split at every knot of both splines so each
/// piece is a polynomial of degree 6 and 4-point Gauss–Legendre is exact.
fn squared_difference(p: &NaturalSpline, q: &NaturalSpline, a: f64, b: f64) -> f64 {
    let mut cuts: Vec<f64> = p
        .knots()
        .iter()
        .chain(q.knots())
        .copied()
        .filter(|&t| t > a && t < b)
        .collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2)
        .map(|w| {
            let half = 0.5 * (w[1] - w[0]);
            let mid = 0.5 * (w[1] + w[0]);
            half * GAUSS_NODES
                .iter()
                .zip(GAUSS_WEIGHTS)
                .map(|(&t, wt)| {
                    let x = mid + half * t;
                    let d = p.eval(x) - q.eval(x);
                    wt * d * d
                })
                .sum::<f64>()
        })
        .sum()
}

fn splines(input: &CollapseInput, field_c: f64, nu: f64) -> Result<Vec<NaturalSpline>> {
    input
        .curves
        .iter()
        .map(|(&l, pts)| {
            let fields: Vec<f64> = pts.iter().map(|p| p.field).collect();
            let x = rescale(&fields, field_c, nu, l)?;
            Ok(NaturalSpline::new(x, pts.iter().map(|p| p.value).collect()))
        })
        .collect()
}

/// Collapse cost: the mean squared difference of every pair of rescaled curves
/// over `[−wR, wR]` ∩ the pair's common domain, summed over pairs, where `R` is
/// the rescaled width of the smallest size. Each pair is averaged over the
/// length it actually covers, so moving the window off the data cannot lower
/// the cost. Pairs without overlap add a fixed penalty.
pub fn collapse_cost(input: &CollapseInput, field_c: f64, nu: f64, w: f64) -> Result<f64> {
    input.validate()?;
    if !(w > 0.0 && w <= 1.0) {
        return Err(Error::param(format!("window width w = {w} outside (0, 1]")));
    }
    let curves = splines(input, field_c, nu)?;
    // the BTreeMap puts the smallest size first
    let (lo, hi) = curves[0].domain();
    let half_window = w * (hi - lo);
    let mut total = 0.0;
    let mut penalty = 0.0;
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            let (ai, bi) = curves[i].domain();
            let (aj, bj) = curves[j].domain();
            let a = ai.max(aj).max(-half_window);
            let b = bi.min(bj).min(half_window);
            if a < b {
                total += squared_difference(&curves[i], &curves[j], a, b) / (b - a);
            } else {
                penalty += EMPTY_OVERLAP_PENALTY;
            }
        }
    }
    Ok(total + penalty)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub w: f64,
    pub field_c: f64,
    pub nu: f64,
    pub cost: f64,
    pub boundary_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseMethod {
    pub spline: String,
    pub quadrature: String,
    pub optimizer: String,
    pub error_bars: String,
}

impl Default for CollapseMethod {
    fn default() -> Self {
        CollapseMethod {
            spline: "natural cubic".into(),
            quadrature: "4-point Gauss-Legendre between knots (exact)".into(),
            optimizer: format!(
                "grid F_c step {FIELD_STEP}, nu in [{}, {}] step {NU_STEP}, then Nelder-Mead",
                NU_RANGE.0, NU_RANGE.1
            ),
            error_bars: "sample standard deviation over w".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseResult {
    pub eps: f64,
    pub field_c: f64,
    pub nu: f64,
    pub field_c_err: f64,
    pub nu_err: f64,
    /// Mean over `w` of the minimized cost.
    pub cost_min: f64,
    pub per_w: Vec<WindowFit>,
    /// Some per-`w` optimum sits on the edge of the search box.
    pub boundary_hit: bool,
    /// The cost is flat over the search box, so `F_c` is not determined.
    pub unidentifiable: bool,
    pub method: CollapseMethod,
}

fn nelder_mead(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], step: [f64; 2]) -> ([f64; 2], f64) {
    let mut simplex = [
        start,
        [start[0] + step[0], start[1]],
        [start[0], start[1] + step[1]],
    ];
    let mut values = simplex.map(&f);
    for _ in 0..400 {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);
        let size = (simplex[1][0] - simplex[0][0]).abs()
            + (simplex[1][1] - simplex[0][1]).abs()
            + (simplex[2][0] - simplex[0][0]).abs()
            + (simplex[2][1] - simplex[0][1]).abs();
        if size < 1e-9 || (values[2] - values[0]).abs() <= 1e-15 * (1.0 + values[0].abs()) && size < 1e-6 {
            break;
        }
        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |t: f64| {
            [
                centroid[0] + t * (simplex[2][0] - centroid[0]),
                centroid[1] + t * (simplex[2][1] - centroid[1]),
            ]
        };
        let reflected = along(-1.0);
        let fr = f(reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(expanded);
            if fe < fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = reflected;
            values[2] = fr;
        } else {
            let contracted = if fr < values[2] { along(-0.5) } else { along(0.5) };
            let fc = f(contracted);
            if fc < values[2].min(fr) {
                simplex[2] = contracted;
                values[2] = fc;
            } else {
                for i in 1..3 {
                    simplex[i] = [
                        0.5 * (simplex[0][0] + simplex[i][0]),
                        0.5 * (simplex[0][1] + simplex[i][1]),
                    ];
                    values[i] = f(simplex[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    (simplex[best], values[best])
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut g: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    if hi - g[n] > 1e-9 {
        g.push(hi);
    }
    g
}

fn fit_window(input: &CollapseInput, w: f64) -> Result<(WindowFit, f64, f64)> {
    let (f_lo, f_hi) = input.field_range();
    let fields = grid(f_lo, f_hi, FIELD_STEP);
    let nus = grid(NU_RANGE.0, NU_RANGE.1, NU_STEP);
    let mut best = (f64::INFINITY, fields[0], nus[0]);
    let mut worst = 0.0f64;
    for &fc in &fields {
        for &nu in &nus {
            let d = collapse_cost(input, fc, nu, w)?;
            worst = worst.max(d);
            if d < best.0 {
                best = (d, fc, nu);
            }
        }
    }
    let grid_min = best.0;
    let clamp = |p: [f64; 2]| [p[0].clamp(f_lo, f_hi), p[1].clamp(NU_RANGE.0, NU_RANGE.1)];
    let objective = |p: [f64; 2]| {
        let q = clamp(p);
        collapse_cost(input, q[0], q[1], w).unwrap_or(f64::INFINITY)
    };
    let (p, d) = nelder_mead(objective, [best.1, best.2], [FIELD_STEP, NU_STEP]);
    let p = clamp(p);
    let (fc, nu, cost) = if d <= best.0 { (p[0], p[1], d) } else { (best.1, best.2, best.0) };
    let edge = 0.5 * FIELD_STEP;
    let boundary_hit = fc - f_lo < edge
        || f_hi - fc < edge
        || nu - NU_RANGE.0 < 0.5 * NU_STEP
        || NU_RANGE.1 - nu < 0.5 * NU_STEP;
    Ok((
        WindowFit {
            w,
            field_c: fc,
            nu,
            cost,
            boundary_hit,
        },
        grid_min,
        worst,
    ))
}

fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn fit_collapse(input: &CollapseInput, w_grid: &[f64], exec: Execution) -> Result<CollapseResult> {
    input.validate()?;
    if w_grid.is_empty() {
        return Err(Error::param("empty window-width grid"));
    }
    if let Some(w) = w_grid.iter().find(|&&w| !(w > 0.0 && w <= 1.0)) {
        return Err(Error::param(format!("window width w = {w} outside (0, 1]")));
    }
    let fits = par::try_map_indexed(w_grid.len(), exec, |i| fit_window(input, w_grid[i]))?;

    let unidentifiable = fits
        .iter()
        .all(|&(_, lo, hi)| hi <= 1e-14 || hi - lo <= 1e-9 * hi);
    let per_w: Vec<WindowFit> = fits.into_iter().map(|f| f.0).collect();
    let (field_c, field_c_err) = mean_and_std(&per_w.iter().map(|f| f.field_c).collect::<Vec<_>>());
    let (nu, nu_err) = mean_and_std(&per_w.iter().map(|f| f.nu).collect::<Vec<_>>());
    let cost_min = per_w.iter().map(|f| f.cost).sum::<f64>() / per_w.len() as f64;
    Ok(CollapseResult {
        eps: input.eps,
        field_c,
        nu,
        field_c_err,
        nu_err,
        cost_min,
        boundary_hit: per_w.iter().any(|f| f.boundary_hit),
        unidentifiable,
        per_w,
        method: CollapseMethod::default(),
    })
}

/// Rescaled curves `(x, y, L)` at a given `(F_c, ν)`, for plotting.
pub fn rescaled_curves(input: &CollapseInput, field_c: f64, nu: f64) -> Result<Vec<(f64, f64, usize)>> {
    let mut rows = Vec::new();
    for (&l, pts) in &input.curves {
        let fields: Vec<f64> = pts.iter().map(|p| p.field).collect();
        let xs = rescale(&fields, field_c, nu, l)?;
        rows.extend(xs.into_iter().zip(pts).map(|(x, p)| (x, p.value, l)));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityEdge {
    pub points: Vec<CollapseResult>,
    /// Energy densities skipped for lack of data.
    pub skipped: Vec<f64>,
    pub eps_at_max: Option<f64>,
    pub max_field_c: Option<f64>,
    /// `Σ F_c (ε − ½) / Σ F_c`; negative when the edge leans toward the ground state.
    pub centroid_offset: Option<f64>,
}

/// Collapse fit at every energy density in `eps_grid`, or at every one present
/// in `records` when `eps_grid` is `None`.
pub fn mobility_edge(
    records: &[EnsembleRecord],
    eps_grid: Option<&[f64]>,
    w_grid: &[f64],
    exec: Execution,
) -> Result<MobilityEdge> {
    let eps_list: Vec<f64> = match eps_grid {
        Some(g) => g.to_vec(),
        None => {
            let mut e: Vec<f64> = records.iter().map(|r| r.eps).collect();
            e.sort_by(f64::total_cmp);
            e.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
            e
        }
    };
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for eps in eps_list {
        match CollapseInput::from_records(records, eps) {
            Ok(input) => points.push(fit_collapse(&input, w_grid, exec)?),
            Err(err) => {
                log::warn!("skipping eps = {eps}: {err}");
                skipped.push(eps);
            }
        }
    }
    let best = points.iter().max_by(|a, b| a.field_c.total_cmp(&b.field_c));
    let weight: f64 = points.iter().map(|p| p.field_c).sum();
    let centroid_offset = (!points.is_empty() && weight != 0.0)
        .then(|| points.iter().map(|p| p.field_c * (p.eps - 0.5)).sum::<f64>() / weight);
    Ok(MobilityEdge {
        eps_at_max: best.map(|p| p.eps),
        max_field_c: best.map(|p| p.field_c),
        centroid_offset,
        points,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // broad crossover between the two plateaus, still sloped at the ends of the data
    fn scaling_function(x: f64) -> f64 {
        0.4585 - 0.0725 * (x / 10.0).tanh()
    }

    fn planted(field_c: f64, nu: f64, sizes: &[usize]) -> CollapseInput {
        let curves = sizes
            .iter()
            .map(|&l| {
                let pts = (0..=18)
                    .map(|i| {
                        let f = 0.2 + 0.1 * i as f64;
                        CurvePoint {
                            field: f,
                            value: scaling_function((f - field_c) * (l as f64).powf(1.0 / nu)),
                            stderr: 0.0,
                        }
                    })
                    .collect();
                (l, pts)
            })
            .collect();
        CollapseInput::new(0.5, curves).unwrap()
    }

    #[test]
    fn rescale_examples() {
        assert_eq!(rescale(&[0.7], 0.7, 0.9, 14).unwrap(), vec![0.0]);
        assert!((rescale(&[1.25], 1.0, 1.0, 16).unwrap()[0] - 4.0).abs() < 1e-12);
        assert!(rescale(&[1.0], 1.0, 0.0, 16).is_err());
    }

    proptest! {
        #[test]
        fn rescale_preserves_order(
            mut fs in proptest::collection::vec(-5.0f64..5.0, 2..30),
            fc in -2.0f64..2.0, nu in 0.1f64..3.0, l in 1usize..40,
        ) {
            fs.sort_by(f64::total_cmp);
            let xs = rescale(&fs, fc, nu, l).unwrap();
            prop_assert!(xs.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn spline_interpolates_and_is_exact_on_lines() {
        let x = vec![0.0, 0.5, 1.3, 2.0, 3.1];
        let y: Vec<f64> = x.iter().map(|t| 2.0 * t - 1.0).collect();
        let s = NaturalSpline::new(x.clone(), y.clone());
        for (a, b) in x.iter().zip(&y) {
            assert!((s.eval(*a) - b).abs() < 1e-14);
        }
        assert!((s.eval(2.4) - 3.8).abs() < 1e-12);
    }

    #[test]
    fn spline_matches_hand_solved_three_knots() {
        // knots (0,0),(1,1),(2,0): m1 = 6(−1 − 1)/4 = −3
        let s = NaturalSpline::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]);
        // on [0,1]: y = 1.5 t − 0.5 t³
        assert!((s.eval(0.5) - (0.75 - 0.0625)).abs() < 1e-14);
    }

    #[test]
    fn coinciding_rescaled_curves_cost_nothing() {
        // fields placed so that every size lands on the same rescaled knots
        let (fc, nu) = (0.9, 0.75);
        let knots = [-3.0, -1.5, -0.4, 0.0, 0.7, 1.9, 3.2];
        let ys = [0.53, 0.52, 0.49, 0.46, 0.42, 0.39, 0.387];
        let curves = [10usize, 12, 14]
            .iter()
            .map(|&l| {
                let s = (l as f64).powf(1.0 / nu);
                let pts = knots
                    .iter()
                    .zip(ys)
                    .map(|(x, y)| CurvePoint { field: fc + x / s, value: y, stderr: 0.0 })
                    .collect();
                (l, pts)
            })
            .collect();
        let input = CollapseInput::new(0.5, curves).unwrap();
        for w in [0.2, 1.0] {
            assert!(collapse_cost(&input, fc, nu, w).unwrap() < 1e-24);
        }
        assert!(collapse_cost(&input, fc + 0.1, nu, 1.0).unwrap() > 1e-6);
    }

    #[test]
    fn constant_offset_gives_c_squared() {
        let mk = |c: f64| -> Vec<CurvePoint> {
            (0..6).map(|i| CurvePoint { field: i as f64 * 0.4, value: c, stderr: 0.0 }).collect()
        };
        let input = CollapseInput::new(0.5, [(12, mk(0.4)), (14, mk(0.4 + 0.03))].into()).unwrap();
        // at w = 1 only half of the window is covered, which must not matter
        for w in [0.1, 0.3, 0.5, 1.0] {
            let d = collapse_cost(&input, 1.0, 0.8, w).unwrap();
            assert!((d - 0.03f64 * 0.03).abs() < 1e-12, "w={w}: {d}");
        }
        // a critical field at the edge of the data leaves the same offset
        let d = collapse_cost(&input, 2.0, 0.8, 0.3).unwrap();
        assert!((d - 0.03f64 * 0.03).abs() < 1e-12, "{d}");
    }

    #[test]
    fn cost_is_symmetric_and_shift_invariant() {
        let base = planted(1.0, 0.8, &[10, 12, 14, 16]);
        let mut shifted = base.clone();
        for pts in shifted.curves.values_mut() {
            for p in pts {
                p.value += 0.2;
            }
        }
        for (fc, nu) in [(0.9, 0.7), (1.1, 1.2), (0.5, 0.4)] {
            let a = collapse_cost(&base, fc, nu, 0.6).unwrap();
            let b = collapse_cost(&shifted, fc, nu, 0.6).unwrap();
            assert!(a >= 0.0);
            assert!((a - b).abs() <= 1e-10 * a.max(1e-12));
        }
    }

    #[test]
    fn true_parameters_beat_wrong_ones() {
        let input = planted(1.0, 0.8, &[10, 12, 14, 16]);
        for w in default_w_grid() {
            let good = collapse_cost(&input, 1.0, 0.8, w).unwrap();
            let bad = collapse_cost(&input, 1.3, 0.8, w).unwrap();
            assert!(good < bad, "w={w}: {good} vs {bad}");
        }
    }

    #[test]
    fn planted_parameters_recovered_for_every_w() {
        let input = planted(1.0, 0.8, &[12, 14, 16, 18]);
        let fit = fit_collapse(&input, &default_w_grid(), Execution::Sequential).unwrap();
        for f in &fit.per_w {
            assert!((f.field_c - 1.0).abs() < 0.02, "{f:?}");
            assert!((f.nu - 0.8).abs() < 0.05, "{f:?}");
        }
        assert!(!fit.unidentifiable);
        assert!(fit.cost_min >= 0.0);
    }

    #[test]
    fn flat_data_is_flagged_unidentifiable() {
        let pts: Vec<CurvePoint> = (0..6)
            .map(|i| CurvePoint { field: 0.25 * (i + 1) as f64, value: 0.45, stderr: 0.0 })
            .collect();
        let input = CollapseInput::new(0.5, [(10, pts.clone()), (12, pts)].into()).unwrap();
        let fit = fit_collapse(&input, &[0.5, 1.0], Execution::Sequential).unwrap();
        assert!(fit.unidentifiable);
        assert!(fit.cost_min < 1e-20);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let pts: Vec<CurvePoint> = (0..6)
            .map(|i| CurvePoint { field: i as f64, value: 0.4, stderr: 0.0 })
            .collect();
        assert!(CollapseInput::new(0.5, [(12, pts.clone())].into()).is_err());
        assert!(CollapseInput::new(0.5, [(12, pts[..3].to_vec()), (14, pts.clone())].into()).is_err());
        let input = CollapseInput::new(0.5, [(12, pts.clone()), (14, pts)].into()).unwrap();
        assert!(collapse_cost(&input, 1.0, 0.8, 0.0).is_err());
        assert!(collapse_cost(&input, 1.0, 0.8, 1.5).is_err());
    }
}
