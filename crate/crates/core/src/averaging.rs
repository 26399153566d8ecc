//! The kernel of `S₀` on translated and dilated dyadic grids, and its
//! averages over translations and dilations.
//!
//! The grid with parameters `(r, α)` consists of the intervals `α + r·I`
//! for standard dyadic `I` of every integer level, so interval lengths are
//! `L = r·2^{-k}`, `k ∈ ℤ`. On such a grid
//!
//! ```text
//! K₀(t, x) = Σ_I [ -h_{I-}(t) h_{I+}(x) + h_{I+}(t) h_{I-}(x) ]
//! ```
//!
//! has at most one nonzero term: the one for the smallest grid interval
//! containing both points.
//!
//! For one scale `L` and separation `d = x - t`, the translation average
//! is `G(d/L)/L` with `G` piecewise linear:
//!
//! ```text
//! G(ρ) = 2ρ        0   ≤ ρ ≤ 1/4
//!        2 - 6ρ    1/4 ≤ ρ ≤ 1/2
//!        6ρ - 4    1/2 ≤ ρ ≤ 3/4
//!        2 - 2ρ    3/4 ≤ ρ ≤ 1
//!        0         ρ ≥ 1,          G(-ρ) = -G(ρ).
//! ```
//!
//! Scales with `L ≥ 4|d|` sum to `(8/3) d / L₀²` in closed form.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of one grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    r: f64,
    alpha: f64,
}

impl GridParams {
    pub fn new(r: f64, alpha: f64) -> Result<Self> {
        if !(1.0..2.0).contains(&r) {
            return Err(Error::InvalidArgument(format!("dilation r = {r} must lie in [1, 2)")));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidArgument("translation must be finite".into()));
        }
        Ok(Self { r, alpha })
    }

    pub fn standard() -> Self {
        Self { r: 1.0, alpha: 0.0 }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Length of grid intervals at level `k`.
    pub fn length(&self, k: i32) -> f64 {
        self.r * 2f64.powi(-k)
    }

    /// Index of the level-`k` interval containing `t`.
    pub fn cell(&self, k: i32, t: f64) -> i64 {
        ((t - self.alpha) / self.length(k)).floor() as i64
    }
}

fn check_pair(t: f64, x: f64) -> Result<()> {
    if !t.is_finite() || !x.is_finite() {
        return Err(Error::InvalidArgument("arguments must be finite".into()));
    }
    if t == x {
        return Err(Error::InvalidArgument("kernel is singular at t = x".into()));
    }
    Ok(())
}

/// Which partial kernel a term belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Part {
    /// `h_{I+}(t) h_{I-}(x)`: `t` in the right child.
    Minus,
    /// `h_{I-}(t) h_{I+}(x)`: `t` in the left child.
    Plus,
}

/// `±1` for the left or right half of the level-`k+1` interval containing `t`.
fn half_sign(params: &GridParams, k: i32, t: f64) -> f64 {
    if params.cell(k + 2, t) % 2 == 0 {
        -1.0
    } else {
        1.0
    }
}

/// The term of level `k` as `(part, h·h product)`, if `t` and `x` lie in
/// different children of one level-`k` interval.
pub fn kernel_term(t: f64, x: f64, params: &GridParams, k: i32) -> Option<(Part, f64)> {
    if params.cell(k, t) != params.cell(k, x) {
        return None;
    }
    let ct = params.cell(k + 1, t);
    let cx = params.cell(k + 1, x);
    if ct == cx {
        return None;
    }
    let child = params.length(k + 1);
    let product = half_sign(params, k, t) * half_sign(params, k, x) / child;
    let part = if ct > cx { Part::Minus } else { Part::Plus };
    Some((part, product))
}

/// Level of the smallest grid interval containing both points, if any.
pub fn separating_level(t: f64, x: f64, params: &GridParams) -> Option<i32> {
    let d = (x - t).abs();
    // First level whose length exceeds d; coarser levels follow.
    let mut k = (params.r / d).log2().floor() as i32;
    while params.length(k) <= d {
        k -= 1;
    }
    for _ in 0..1100 {
        if params.cell(k, t) == params.cell(k, x) {
            return Some(k);
        }
        // α lies between the points: every scale separates them.
        if params.length(k) > 4.0 * (t - params.alpha).abs().max((x - params.alpha).abs()) {
            return None;
        }
        k -= 1;
    }
    None
}

/// `K₀(t, x)` on one grid.
pub fn kernel_value(t: f64, x: f64, params: &GridParams) -> Result<f64> {
    Ok(partial_kernels(t, x, params)?.0)
}

/// `(K₀, K₋, K₊)` with `K₋ = Σ h_{I+}(t) h_{I-}(x)` (supported where `t > x`),
/// `K₊ = -Σ h_{I-}(t) h_{I+}(x)` (where `t < x`) and `K₀ = K₋ + K₊`.
pub fn partial_kernels(t: f64, x: f64, params: &GridParams) -> Result<(f64, f64, f64)> {
    check_pair(t, x)?;
    let Some(k) = separating_level(t, x, params) else {
        return Ok((0.0, 0.0, 0.0));
    };
    Ok(match kernel_term(t, x, params, k) {
        Some((Part::Minus, v)) => (v, v, 0.0),
        Some((Part::Plus, v)) => (-v, 0.0, -v),
        None => (0.0, 0.0, 0.0),
    })
}

/// Per-scale profile `G`.
pub fn scale_profile(rho: f64) -> f64 {
    if rho < 0.0 {
        return -scale_profile(-rho);
    }
    if rho <= 0.25 {
        2.0 * rho
    } else if rho <= 0.5 {
        2.0 - 6.0 * rho
    } else if rho <= 0.75 {
        6.0 * rho - 4.0
    } else if rho <= 1.0 {
        2.0 - 2.0 * rho
    } else {
        0.0
    }
}

/// Exact translation average `lim (1/2R) ∫ K₀ dα` at dilation `r`.
pub fn average_translations_exact(t: f64, x: f64, r: f64) -> Result<f64> {
    check_pair(t, x)?;
    let params = GridParams::new(r, 0.0)?;
    let d = x - t;
    let a = d.abs();
    let mut k = (r / a).log2().ceil() as i32;
    while params.length(k) <= a {
        k -= 1;
    }
    let mut sum = 0.0;
    let mut length = params.length(k);
    while length < 4.0 * a {
        sum += scale_profile(d / length) / length;
        k -= 1;
        length = params.length(k);
    }
    Ok(sum + 8.0 / 3.0 * d / (length * length))
}

/// Sums in a fixed pairwise tree, independent of how the terms were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

/// Translation average by midpoint quadrature in `α`.
///
/// Levels with length up to the cap `L_c` (the first length `≥ 4|x - t|`)
/// are evaluated on the grid; all of them divide `L_c`, so a window of
/// `periods·L_c` is an exact period. Coarser levels are added in closed form.
pub fn average_translations(t: f64, x: f64, r: f64, periods: u32, points: usize) -> Result<f64> {
    check_pair(t, x)?;
    if periods == 0 || points == 0 {
        return Err(Error::InvalidArgument("window and point count must be positive".into()));
    }
    let d = x - t;
    let base = GridParams::new(r, 0.0)?;
    let mut cap = (r / d.abs()).log2().ceil() as i32 + 1;
    while base.length(cap) < 4.0 * d.abs() {
        cap -= 1;
    }
    let cap_length = base.length(cap);
    let window = periods as f64 * cap_length;
    let h = window / points as f64;
    let values: Vec<f64> = (0..points)
        .into_par_iter()
        .map(|j| {
            let params = GridParams { r, alpha: (j as f64 + 0.5) * h };
            let mut value = 0.0;
            let mut k = cap;
            while base.length(k) > d.abs() / 2.0 {
                match kernel_term(t, x, &params, k) {
                    Some((Part::Minus, v)) => value += v,
                    Some((Part::Plus, v)) => value -= v,
                    None => {}
                }
                k += 1;
            }
            value
        })
        .collect();
    let coarse = 2.0 * cap_length;
    Ok(pairwise_sum(&values) / points as f64 + 8.0 / 3.0 * d / (coarse * coarse))
}

/// `E_r E_α K₀(t, x)`: the exact translation average, averaged over
/// `r = 2^u` with the midpoint rule in `u ∈ [0, 1)`.
pub fn average_full(t: f64, x: f64, resolution: usize) -> Result<f64> {
    check_pair(t, x)?;
    if resolution == 0 {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let values: Vec<f64> = (0..resolution)
        .into_par_iter()
        .map(|j| {
            let r = 2f64.powf((j as f64 + 0.5) / resolution as f64);
            average_translations_exact(t, x, r).expect("r in [1, 2)")
        })
        .collect();
    Ok(pairwise_sum(&values) / resolution as f64)
}

/// Full averages of the partial kernels and of the even kernel `K₋ - K₊`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialAverages {
    pub minus: f64,
    pub plus: f64,
    pub even: f64,
}

/// Each partial kernel lives on one side of the diagonal, where it equals
/// `K₀`; so its translation average is that of `K₀` there and zero elsewhere,
/// and the even kernel averages to `-sign(x - t)` times that of `K₀`.
pub fn average_partials(t: f64, x: f64, resolution: usize) -> Result<PartialAverages> {
    let full = average_full(t, x, resolution)?;
    Ok(if x > t {
        PartialAverages {
            minus: 0.0,
            plus: full,
            even: -full,
        }
    } else {
        PartialAverages {
            minus: full,
            plus: 0.0,
            even: full,
        }
    })
}

/// Translation average of the even kernel at dilation `r`; symmetric in `t ↔ x`.
pub fn even_translation_average(t: f64, x: f64, r: f64) -> Result<f64> {
    Ok(-(x - t).signum() * average_translations_exact(t, x, r)?)
}

/// Translation average at separations `s` and `2s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityRow {
    pub r: f64,
    pub separation: f64,
    pub at_s: f64,
    pub at_2s: f64,
    /// `at_s / at_2s`, which is 2 for homogeneity of degree -1.
    pub ratio: f64,
    pub antisymmetry_defect: f64,
}

pub fn homogeneity_check(t: f64, separations: &[f64], r_values: &[f64]) -> Result<Vec<HomogeneityRow>> {
    let mut rows = Vec::new();
    for &r in r_values {
        for &s in separations {
            let at_s = average_translations_exact(t, t + s, r)?;
            let at_2s = average_translations_exact(t, t + 2.0 * s, r)?;
            let mirrored = average_translations_exact(t + s, t, r)?;
            rows.push(HomogeneityRow {
                r,
                separation: s,
                at_s,
                at_2s,
                ratio: at_s / at_2s,
                antisymmetry_defect: (at_s + mirrored).abs(),
            });
        }
    }
    Ok(rows)
}

/// One line of the averaging report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageRow {
    pub t: f64,
    pub x: f64,
    pub r_points: usize,
    pub alpha_points: usize,
    pub average: f64,
    pub single_grid_scale: f64,
    pub ratio: f64,
}

/// Full averages at the given pairs. `alpha_points = 0` marks the exact
/// translation average.
pub fn average_report(pairs: &[(f64, f64)], r_points: usize) -> Result<Vec<AverageRow>> {
    pairs
        .iter()
        .map(|&(t, x)| {
            let average = average_full(t, x, r_points)?;
            let scale = 1.0 / (x - t).abs();
            Ok(AverageRow {
                t,
                x,
                r_points,
                alpha_points: 0,
                average,
                single_grid_scale: scale,
                ratio: average.abs() / scale,
            })
        })
        .collect()
}

pub fn average_rows_to_csv(rows: &[AverageRow]) -> String {
    let mut out = String::from("t,x,r_points,alpha_points,average,single_grid_scale,ratio\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:e},{},{:e}\n",
            r.t, r.x, r.r_points, r.alpha_points, r.average, r.single_grid_scale, r.ratio
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn standard_grid_value() {
        // I = [0,1): t in the left half of I-, x in the right half of I+,
        // -h_{I-}(0.2) h_{I+}(0.8) = -(-√2)(√2) = 2.
        let g = GridParams::standard();
        assert_abs_diff_eq!(kernel_value(0.2, 0.8, &g).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(kernel_value(0.8, 0.2, &g).unwrap(), -2.0, epsilon = 1e-15);
        // Separated at [0, 1/4): -(-√8)(√8) = 8.
        assert_abs_diff_eq!(kernel_value(0.05, 0.2, &g).unwrap(), 8.0, epsilon = 1e-14);
    }

    #[test]
    fn direct_two_term_evaluation() {
        // Oracle: evaluate every term of the display with explicit Haar functions.
        let haar = |a: f64, len: f64, s: f64| -> f64 {
            if s < a || s >= a + len {
                0.0
            } else if s < a + len / 2.0 {
                -len.powf(-0.5)
            } else {
                len.powf(-0.5)
            }
        };
        let params = GridParams::new(1.3, 0.17).unwrap();
        for &(t, x) in &[(0.2, 0.7), (0.41, 0.45), (-0.3, 0.9), (1.1, 0.35), (0.5, 0.52)] {
            let mut direct = 0.0;
            for k in -6..=14 {
                let len = params.length(k);
                for j in -70..70i64 {
                    let a = params.alpha() + j as f64 * len;
                    let (lm, lp) = (a, a + len / 2.0);
                    direct += -haar(lm, len / 2.0, t) * haar(lp, len / 2.0, x)
                        + haar(lp, len / 2.0, t) * haar(lm, len / 2.0, x);
                }
            }
            assert_abs_diff_eq!(kernel_value(t, x, &params).unwrap(), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_when_translation_separates() {
        let params = GridParams::new(1.0, 0.5).unwrap();
        assert_eq!(kernel_value(0.2, 0.8, &params).unwrap(), 0.0);
        assert!(separating_level(0.2, 0.8, &params).is_none());
    }

    #[test]
    fn rejects_diagonal_and_bad_dilation() {
        assert!(kernel_value(0.3, 0.3, &GridParams::standard()).is_err());
        assert!(GridParams::new(2.0, 0.0).is_err());
        assert!(GridParams::new(0.9, 0.0).is_err());
    }

    #[test]
    fn at_most_one_scale_contributes() {
        for i in 0..200 {
            let params = GridParams::new(1.0 + (i as f64 * 0.618).fract(), (i as f64 * 0.377).fract() * 3.0 - 1.5).unwrap();
            let t = (i as f64 * 0.123).fract();
            let x = (i as f64 * 0.731).fract() + 0.001;
            let count = (-10..40).filter(|&k| kernel_term(t, x, &params, k).is_some()).count();
            assert!(count <= 1);
        }
    }

    #[test]
    fn profile_integrates_to_zero() {
        let m = 1 << 16;
        let s: f64 = (0..m).map(|j| scale_profile((j as f64 + 0.5) / m as f64)).sum();
        assert!(s.abs() / m as f64 <= 1e-12);
    }

    #[test]
    fn quadrature_matches_exact_translation_average() {
        for &(t, x, r) in &[(0.1, 0.4, 1.0), (0.3, 0.6, 1.37), (0.7, 0.2, 1.9)] {
            let exact = average_translations_exact(t, x, r).unwrap();
            let quad = average_translations(t, x, r, 1, 1 << 16).unwrap();
            assert_abs_diff_eq!(quad, exact, epsilon = 1e-3 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn doubling_the_window_changes_nothing() {
        let a = average_translations(0.1, 0.4, 1.25, 1, 4096).unwrap();
        let b = average_translations(0.1, 0.4, 1.25, 2, 8192).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn translation_average_depends_on_difference() {
        for r in [1.0, 1.2, 1.7] {
            let a = average_translations_exact(0.1, 0.4, r).unwrap();
            let b = average_translations_exact(0.3, 0.6, r).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn full_average_vanishes_and_shrinks() {
        let coarse = average_full(0.2, 0.7, 64).unwrap().abs();
        let fine = average_full(0.2, 0.7, 4096).unwrap().abs();
        assert!(fine <= 1e-3 * 2.0);
        assert!(fine <= coarse);
        let a = average_partials(0.2, 0.7, 4096).unwrap();
        assert!(a.minus.abs() <= 1e-3 && a.plus.abs() <= 1e-3 && a.even.abs() <= 1e-3);
    }

    #[test]
    fn partial_kernels_split_by_diagonal() {
        let params = GridParams::new(1.4, 0.3).unwrap();
        for &(t, x) in &[(0.2, 0.7), (0.7, 0.2), (0.41, 0.45), (1.1, 0.35)] {
            let (k0, km, kp) = partial_kernels(t, x, &params).unwrap();
            assert_eq!(k0, km + kp);
            if t < x {
                assert_eq!(km, 0.0);
            } else {
                assert_eq!(kp, 0.0);
            }
        }
        for r in [1.0, 1.5, 1.93] {
            let a = even_translation_average(0.1, 0.4, r).unwrap();
            let b = even_translation_average(0.4, 0.1, r).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn homogeneity_of_degree_minus_one() {
        for row in homogeneity_check(0.05, &[0.1, 0.15, 0.3], &[1.0, 1.3, 1.8]).unwrap() {
            assert_abs_diff_eq!(row.ratio, 2.0, epsilon = 1e-12);
            assert!(row.antisymmetry_defect <= 1e-12);
        }
    }

    #[test]
    fn csv_header() {
        let rows = average_report(&[(0.2, 0.7)], 128).unwrap();
        let csv = average_rows_to_csv(&rows);
        assert!(csv.starts_with("t,x,r_points,alpha_points,average,single_grid_scale,ratio\n"));
    }
}
