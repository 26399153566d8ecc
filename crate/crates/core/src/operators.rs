//! Haar-coefficient operators: the dyadic shift `S₀`, the classical shift,
//! sign multipliers, and the four-arc projection on the torus.
//!
//! Dense work happens in the slot layout of
//! [`HaarExpansion::to_slots`]: slot 0 is the mean and the interval
//! `(k, m)` sits at slot `2^k + m`. A depth-`d` space therefore has
//! dimension `2^d`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, TAU};
use std::fmt;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dyadic::{self, DyadicInterval, HaarExpansion, Sign};
use crate::error::{Error, Result};
use crate::hilbert::{quarter, FourierSeries};

/// Largest depth [`as_matrix`] accepts.
pub const MAX_MATRIX_DEPTH: u32 = 14;

/// Largest combined depth used by the line-embedding experiment.
pub const MAX_EMBED_DEPTH: u32 = 24;

/// Which operator to realize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ShiftKind {
    S0Interval,
    /// `S₀` on the dyadic ancestor `levels_above` generations above `[0, 1)`.
    S0LineTruncated { levels_above: u32 },
    SClassical,
    /// Sign multiplier; unlisted intervals carry `+1`.
    TAlpha(BTreeMap<DyadicInterval, Sign>),
    Identity,
}

impl fmt::Display for ShiftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShiftKind::S0Interval => f.write_str("S0_interval"),
            ShiftKind::S0LineTruncated { levels_above } => {
                write!(f, "S0_line_truncated(levels_above={levels_above})")
            }
            ShiftKind::SClassical => f.write_str("S_classical"),
            ShiftKind::TAlpha(signs) => {
                let minus = signs.values().filter(|s| **s == Sign::Minus).count();
                write!(f, "T_alpha(minus_signs={minus})")
            }
            ShiftKind::Identity => f.write_str("identity"),
        }
    }
}

impl ShiftKind {
    /// Depth of the coefficient space the operator acts on for inputs of depth `depth`.
    pub fn space_depth(&self, depth: u32) -> u32 {
        match self {
            ShiftKind::S0LineTruncated { levels_above } => depth + levels_above,
            _ => depth,
        }
    }

    /// Whether the operator annihilates the mean and root slots.
    pub fn kills_mean_and_root(&self) -> bool {
        matches!(self, ShiftKind::S0Interval | ShiftKind::S0LineTruncated { .. })
    }

    /// `out = Op(input)` in slot layout on a space of `input.len()` slots.
    pub fn apply_slots(&self, input: &[f64], out: &mut [f64]) {
        match self {
            ShiftKind::S0Interval | ShiftKind::S0LineTruncated { .. } => s0_slots(input, out),
            ShiftKind::SClassical => {
                s_classical_slots(input, out);
            }
            ShiftKind::TAlpha(signs) => t_alpha_slots(signs, input, out),
            ShiftKind::Identity => out.copy_from_slice(input),
        }
    }

    /// `out = Opᵀ(input)` in slot layout.
    pub fn apply_transpose_slots(&self, input: &[f64], out: &mut [f64]) {
        match self {
            ShiftKind::S0Interval | ShiftKind::S0LineTruncated { .. } => {
                s0_slots(input, out);
                out.iter_mut().for_each(|v| *v = -*v);
            }
            ShiftKind::SClassical => s_classical_transpose_slots(input, out),
            ShiftKind::TAlpha(signs) => t_alpha_slots(signs, input, out),
            ShiftKind::Identity => out.copy_from_slice(input),
        }
    }
}

/// `S₀` in slot layout: `out[I₋] = in[I₊]`, `out[I₊] = -in[I₋]`, mean and root cleared.
pub fn s0_slots(input: &[f64], out: &mut [f64]) {
    let n = input.len();
    out[0] = 0.0;
    if n > 1 {
        out[1] = 0.0;
    }
    let mut s = 2;
    while s < n {
        out[s] = input[s + 1];
        out[s + 1] = -input[s];
        s += 2;
    }
}

/// Classical shift in slot layout; returns the energy of the dropped deepest level.
pub fn s_classical_slots(input: &[f64], out: &mut [f64]) -> f64 {
    let n = input.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    let half = n / 2;
    for s in 1..half {
        let left = 2 * s;
        out[left] = -input[s] * FRAC_1_SQRT_2;
        out[left + 1] = input[s] * FRAC_1_SQRT_2;
    }
    input[half.max(1)..].iter().map(|v| v * v).sum()
}

fn s_classical_transpose_slots(input: &[f64], out: &mut [f64]) {
    let n = input.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    for s in 1..n / 2 {
        out[s] = (input[2 * s + 1] - input[2 * s]) * FRAC_1_SQRT_2;
    }
}

fn t_alpha_slots(signs: &BTreeMap<DyadicInterval, Sign>, input: &[f64], out: &mut [f64]) {
    out.copy_from_slice(input);
    for (interval, sign) in signs {
        let s = interval.slot();
        if *sign == Sign::Minus && s < out.len() {
            out[s] = -out[s];
        }
    }
}

/// `S₀ : h_{I±} ↦ ±h_{I∓}`; the mean and the root coefficient are sent to zero.
pub fn apply_s0(e: &HaarExpansion) -> HaarExpansion {
    let mut out = HaarExpansion::zero(e.depth());
    for (interval, v) in e.coeffs() {
        if let (Some(side), Some(sibling)) = (interval.side(), interval.sibling()) {
            let value = match side {
                Sign::Plus => *v,
                Sign::Minus => -*v,
            };
            out.set(sibling, value).expect("sibling shares the level");
        }
    }
    out
}

/// Image of the classical shift together with the energy lost at the truncation level.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalImage {
    pub image: HaarExpansion,
    pub dropped_energy: f64,
}

/// `S_cl : h_I ↦ (h_{I₊} - h_{I₋})/√2`; deepest-level coefficients are dropped.
pub fn apply_s_classical(e: &HaarExpansion) -> ClassicalImage {
    let mut image = HaarExpansion::zero(e.depth());
    let mut dropped_energy = 0.0;
    for (interval, v) in e.coeffs() {
        if interval.level() + 1 >= e.depth() {
            dropped_energy += v * v;
            continue;
        }
        image
            .set(interval.right_child(), v * FRAC_1_SQRT_2)
            .expect("child within depth");
        image
            .set(interval.left_child(), -v * FRAC_1_SQRT_2)
            .expect("child within depth");
    }
    ClassicalImage {
        image,
        dropped_energy,
    }
}

/// `T_α : h_I ↦ α_I h_I`, with `α_I = +1` for unlisted intervals.
pub fn apply_t_alpha(e: &HaarExpansion, signs: &BTreeMap<DyadicInterval, Sign>) -> HaarExpansion {
    let mut out = e.clone();
    for (interval, sign) in signs {
        if *sign == Sign::Minus {
            let v = out.coeff(interval);
            if v != 0.0 {
                out.set(*interval, -v).expect("interval already stored");
            }
        }
    }
    out
}

/// Embeds `e`, living on `[0, 1)`, into its ancestor `J = [0, 2^h)` rescaled to unit length.
///
/// The result is the expansion of `f(2^h ·)` on `[0, 1)`, at depth `depth + h`.
/// Coefficients scale by `2^{-h/2}` and the mean by `2^{-h}`.
pub fn embed_in_ancestor(e: &HaarExpansion, levels_above: u32) -> Result<HaarExpansion> {
    let depth = e.depth() + levels_above;
    if depth > MAX_EMBED_DEPTH {
        return Err(Error::DepthTooLarge {
            depth,
            max: MAX_EMBED_DEPTH,
        });
    }
    let samples = dyadic::synthesize_samples(e);
    let mut wide = vec![0.0; 1usize << depth];
    wide[..samples.len()].copy_from_slice(&samples);
    dyadic::analyze(&wide)
}

/// Applies any [`ShiftKind`]; the line version acts on the embedded expansion.
pub fn apply_kind(kind: &ShiftKind, e: &HaarExpansion) -> Result<HaarExpansion> {
    Ok(match kind {
        ShiftKind::S0Interval => apply_s0(e),
        ShiftKind::S0LineTruncated { levels_above } => apply_s0(&embed_in_ancestor(e, *levels_above)?),
        ShiftKind::SClassical => apply_s_classical(e).image,
        ShiftKind::TAlpha(signs) => apply_t_alpha(e, signs),
        ShiftKind::Identity => e.clone(),
    })
}

/// A dense matrix of an operator in the slot basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub kind: ShiftKind,
    pub depth: u32,
    pub entries: DMatrix<f64>,
}

/// Matrix of `kind` on the depth-`depth` coefficient space (`2^depth` slots).
///
/// The line version is built on its own, deeper space; by scaling it equals
/// the interval matrix at depth `depth + levels_above`.
pub fn as_matrix(kind: &ShiftKind, depth: u32) -> Result<OperatorMatrix> {
    let space = kind.space_depth(depth);
    if space > MAX_MATRIX_DEPTH {
        return Err(Error::DepthTooLarge {
            depth: space,
            max: MAX_MATRIX_DEPTH,
        });
    }
    let n = 1usize << space;
    let mut entries = DMatrix::zeros(n, n);
    let mut column = vec![0.0; n];
    let mut basis = vec![0.0; n];
    for j in 0..n {
        basis[j] = 1.0;
        kind.apply_slots(&basis, &mut column);
        entries.set_column(j, &nalgebra::DVector::from_column_slice(&column));
        basis[j] = 0.0;
    }
    Ok(OperatorMatrix {
        kind: kind.clone(),
        depth,
        entries,
    })
}

impl OperatorMatrix {
    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    pub fn apply(&self, e: &HaarExpansion) -> Result<HaarExpansion> {
        let slots = e.to_slots();
        if slots.len() != self.dimension() {
            return Err(Error::InvalidArgument(format!(
                "expansion has {} slots, matrix has {}",
                slots.len(),
                self.dimension()
            )));
        }
        let image = &self.entries * nalgebra::DVector::from_vec(slots);
        HaarExpansion::from_slots(image.as_slice())
    }

    pub fn nonzero_count(&self) -> usize {
        self.entries.iter().filter(|v| **v != 0.0).count()
    }

    /// Largest entry of `M + Mᵀ`.
    pub fn antisymmetry_defect(&self) -> f64 {
        (&self.entries + self.entries.transpose()).amax()
    }

    /// Singular values in decreasing order.
    ///
    /// When the columns are pairwise orthogonal (checked exactly on the
    /// sparse pattern) the singular values are the column norms; otherwise a
    /// dense SVD is used.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut values = match self.orthogonal_column_norms() {
            Some(norms) => norms,
            None => self.singular_values_dense(),
        };
        values.sort_by(|a, b| b.total_cmp(a));
        values
    }

    /// Singular values from a dense SVD, decreasing.
    pub fn singular_values_dense(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self
            .entries
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect();
        values.sort_by(|a, b| b.total_cmp(a));
        values
    }

    fn orthogonal_column_norms(&self) -> Option<Vec<f64>> {
        let n = self.dimension();
        let mut owner: Vec<Option<usize>> = vec![None; n];
        let mut norms = vec![0.0; n];
        for j in 0..n {
            let column = self.entries.column(j);
            for (i, v) in column.iter().enumerate() {
                if *v != 0.0 {
                    // Columns with disjoint supports are orthogonal.
                    if owner[i].is_some_and(|o| o != j) {
                        return None;
                    }
                    owner[i] = Some(j);
                    norms[j] += v * v;
                }
            }
        }
        Some(norms.into_iter().map(f64::sqrt).collect())
    }

    /// Dense CSV with a one-line `# kind=..., depth=...` header.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# kind={}, depth={}\n", self.kind, self.depth);
        for row in self.entries.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Averages of a function over the arcs `A_i = [iπ/2, iπ/2 + π/2)`,
/// stored in the order `A₋₂, A₋₁, A₀, A₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcAverages(pub [f64; 4]);

/// Quarters of `[0, 2π)` covered by `A₋₂, A₋₁, A₀, A₁`.
pub const ARC_QUARTERS: [usize; 4] = [2, 3, 0, 1];

impl ArcAverages {
    fn from_quarters(q: [f64; 4]) -> Self {
        Self(ARC_QUARTERS.map(|i| q[i]))
    }

    pub fn quarters(&self) -> [f64; 4] {
        let mut q = [0.0; 4];
        for (slot, &i) in ARC_QUARTERS.iter().enumerate() {
            q[i] = self.0[slot];
        }
        q
    }

    /// `(𝒫f)(θ)`.
    pub fn eval(&self, theta: f64) -> f64 {
        self.quarters()[quarter(theta)]
    }

    /// `(𝒫f, 𝒫g) = (1/4) Σ ⟨f⟩_{A_i}⟨g⟩_{A_i}`.
    pub fn inner(&self, other: &Self) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum::<f64>() / 4.0
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }
}

/// `𝒫f` for a function given by a sampler, midpoint rule with `resolution` nodes.
pub fn project_four_arcs(f: impl Fn(f64) -> f64, resolution: usize) -> Result<ArcAverages> {
    if resolution == 0 || !resolution.is_multiple_of(4) {
        return Err(Error::InvalidArgument(format!(
            "resolution {resolution} must be a positive multiple of 4"
        )));
    }
    let h = TAU / resolution as f64;
    let samples: Vec<f64> = (0..resolution).map(|j| f((j as f64 + 0.5) * h)).collect();
    project_four_arcs_samples(&samples)
}

/// `𝒫f` for midpoint samples `f((j + ½)2π/n)`, `4 | n`.
pub fn project_four_arcs_samples(samples: &[f64]) -> Result<ArcAverages> {
    let n = samples.len();
    if n == 0 || !n.is_multiple_of(4) {
        return Err(Error::InvalidArgument(format!(
            "sample count {n} must be a positive multiple of 4"
        )));
    }
    let q = n / 4;
    let mut sums = [0.0; 4];
    for (i, chunk) in samples.chunks(q).enumerate() {
        sums[i] = chunk.iter().sum::<f64>() / q as f64;
    }
    Ok(ArcAverages::from_quarters(sums))
}

/// `𝒫f` for a real Fourier series, integrating each mode exactly.
pub fn project_four_arcs_series(f: &FourierSeries) -> ArcAverages {
    let mut q = [0.0; 4];
    for (i, slot) in q.iter_mut().enumerate() {
        let a = i as f64 * FRAC_PI_2;
        let b = a + FRAC_PI_2;
        *slot = f
            .coeffs()
            .map(|(n, c)| {
                if n == 0 {
                    c
                } else {
                    let nf = n as f64;
                    let i = Complex64::new(0.0, 1.0);
                    c * (Complex64::from_polar(1.0, nf * b) - Complex64::from_polar(1.0, nf * a))
                        / (i * nf * FRAC_PI_2)
                }
            })
            .sum::<Complex64>()
            .re;
    }
    ArcAverages::from_quarters(q)
}

/// Outcome of comparing `S₀` on `[0, 1)` with `S₀` on an ancestor `J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineConsistencyReport {
    pub levels_above: u32,
    pub p: f64,
    /// `|J| = 2^levels_above`.
    pub ancestor_length: f64,
    /// `‖f‖_p` on the line.
    pub norm_f: f64,
    /// `‖f̃‖_p` with `f̃ = f - ⟨f⟩_J 1_J - (f, h_J) h_J`.
    pub norm_f_tilde: f64,
    /// `|‖f̃‖_p - ‖f‖_p|`; of order `‖f‖₁/|J|`.
    pub discrepancy: f64,
    /// `‖S₀^{I₀} f‖_p`.
    pub image_norm_interval: f64,
    /// `‖S₀^J f̃‖_p`.
    pub image_norm_line: f64,
    /// `‖(S₀^J f̃)|_{I₀} - S₀^{I₀} f‖_p`; zero up to roundoff since `S₀` acts locally.
    pub restriction_error: f64,
}

/// Compares the interval and line versions of `S₀` on `f` through an ancestor
/// `levels_above` generations up. Norms are taken on the line, with Lebesgue
/// measure.
pub fn s0_line_vs_interval_consistency(
    f: &HaarExpansion,
    levels_above: u32,
    p: f64,
) -> Result<LineConsistencyReport> {
    if !(p >= 1.0) {
        return Err(Error::ExponentOutOfRange(p));
    }
    let h = levels_above;
    let length = dyadic::pow2(h as i32);
    let mut wide = embed_in_ancestor(f, h)?;
    wide.set_mean(0.0);
    wide.set(DyadicInterval::root(), 0.0).ok();
    let tilde = dyadic::synthesize_samples(&wide);
    let image_line = dyadic::synthesize_samples(&apply_s0(&wide));

    let samples = dyadic::synthesize_samples(f);
    let image_interval = dyadic::synthesize_samples(&apply_s0(f));
    // Both grids have atoms of length 2^{-depth}; the J grid covers 2^h times more of them.
    let norm_on = |values: &[f64], measure: f64| dyadic::lp_norm(values, p) * measure.powf(1.0 / p);
    let norm_f = norm_on(&samples, 1.0);
    let norm_f_tilde = norm_on(&tilde, length);
    let restriction: Vec<f64> = image_line[..samples.len()]
        .iter()
        .zip(&image_interval)
        .map(|(a, b)| a - b)
        .collect();
    Ok(LineConsistencyReport {
        levels_above,
        p,
        ancestor_length: length,
        norm_f,
        norm_f_tilde,
        discrepancy: (norm_f_tilde - norm_f).abs(),
        image_norm_interval: norm_on(&image_interval, 1.0),
        image_norm_line: norm_on(&image_line, length),
        restriction_error: norm_on(&restriction, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn iv(k: u32, m: u64) -> DyadicInterval {
        DyadicInterval::new(k, m).unwrap()
    }

    fn random_expansion(depth: u32, rng: &mut ChaCha8Rng) -> HaarExpansion {
        let samples: Vec<f64> = (0..1usize << depth).map(|_| rng.random_range(-1.0..1.0)).collect();
        dyadic::analyze(&samples).unwrap()
    }

    fn inner(a: &HaarExpansion, b: &HaarExpansion) -> f64 {
        a.to_slots().iter().zip(b.to_slots()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn s0_on_root_children() {
        let plus = HaarExpansion::haar(iv(1, 1), 3).unwrap();
        let image = apply_s0(&plus);
        assert_eq!(image.coeff(&iv(1, 0)), 1.0);
        assert_eq!(image.nonzero_count(), 1);
        let minus = HaarExpansion::haar(iv(1, 0), 3).unwrap();
        let image = apply_s0(&minus);
        assert_eq!(image.coeff(&iv(1, 1)), -1.0);
        assert_eq!(image.nonzero_count(), 1);
    }

    #[test]
    fn s0_kills_mean_and_root() {
        let e = HaarExpansion::from_parts(2.0, 3, [(DyadicInterval::root(), 1.0)]).unwrap();
        assert_eq!(apply_s0(&e), HaarExpansion::zero(3));
    }

    #[test]
    fn s0_antiinvolution_and_isometry_on_children() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for depth in 2..=10 {
            let mut e = random_expansion(depth, &mut rng);
            e.set_mean(0.0);
            e.set(DyadicInterval::root(), 0.0).unwrap();
            assert_eq!(apply_s0(&apply_s0(&e)), e.scaled(-1.0));
            // A signed permutation of the coefficients: same multiset of moduli.
            let moduli = |x: &HaarExpansion| {
                let mut v: Vec<f64> = x.coeffs().map(|(_, c)| c.abs()).collect();
                v.sort_by(f64::total_cmp);
                v
            };
            assert_eq!(moduli(&apply_s0(&e)), moduli(&e));
        }
    }

    #[test]
    fn s0_antisymmetric_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let f = random_expansion(8, &mut rng);
            let g = random_expansion(8, &mut rng);
            assert!((inner(&apply_s0(&f), &g) + inner(&f, &apply_s0(&g))).abs() < 1e-12);
        }
    }

    #[test]
    fn classical_shift() {
        let image = apply_s_classical(&HaarExpansion::haar(DyadicInterval::root(), 3).unwrap());
        assert_abs_diff_eq!(image.image.coeff(&iv(1, 1)), FRAC_1_SQRT_2);
        assert_abs_diff_eq!(image.image.coeff(&iv(1, 0)), -FRAC_1_SQRT_2);
        assert_eq!(image.dropped_energy, 0.0);
        assert_eq!(apply_s_classical(&HaarExpansion::zero(4)).image, HaarExpansion::zero(4));

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let full = random_expansion(6, &mut rng);
        let mut shallow = HaarExpansion::zero(6);
        for (i, v) in full.coeffs() {
            if i.level() < 5 {
                shallow.set(*i, *v).unwrap();
            }
        }
        let image = apply_s_classical(&shallow);
        assert_abs_diff_eq!(image.image.energy(), shallow.energy(), epsilon = 1e-12);
        let lossy = apply_s_classical(&full);
        let deepest: f64 = full.coeffs().filter(|(i, _)| i.level() == 5).map(|(_, v)| v * v).sum();
        assert_abs_diff_eq!(lossy.dropped_energy, deepest, epsilon = 1e-12);
    }

    #[test]
    fn sign_multipliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let e = random_expansion(8, &mut rng);
        assert_eq!(apply_t_alpha(&e, &BTreeMap::new()), e);
        let all_minus: BTreeMap<_, _> = (0..8)
            .flat_map(DyadicInterval::level_iter)
            .map(|i| (i, Sign::Minus))
            .collect();
        let once = apply_t_alpha(&e, &all_minus);
        assert_eq!(once.mean(), e.mean());
        assert_eq!(apply_t_alpha(&once, &all_minus), e);
        let random: BTreeMap<_, _> = (0..8)
            .flat_map(DyadicInterval::level_iter)
            .map(|i| (i, if rng.random_bool(0.5) { Sign::Plus } else { Sign::Minus }))
            .collect();
        assert_abs_diff_eq!(apply_t_alpha(&e, &random).energy(), e.energy(), epsilon = 1e-12);
    }

    #[test]
    fn s0_matrix_small() {
        let m = as_matrix(&ShiftKind::S0Interval, 2).unwrap();
        assert_eq!(m.dimension(), 4);
        // Only the level-1 pair moves: slots 2 and 3.
        assert_eq!(m.nonzero_count(), 2);
        assert_eq!(m.entries[(2, 3)], 1.0);
        assert_eq!(m.entries[(3, 2)], -1.0);
        let m3 = as_matrix(&ShiftKind::S0Interval, 3).unwrap();
        assert_eq!(m3.nonzero_count(), 6);
        for j in 0..8 {
            let mut basis = vec![0.0; 8];
            basis[j] = 1.0;
            let e = HaarExpansion::from_slots(&basis).unwrap();
            assert_eq!(m3.apply(&e).unwrap(), apply_s0(&e));
        }
    }

    #[test]
    fn matrix_agrees_with_functional_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let signs: BTreeMap<_, _> = (0..6)
            .flat_map(DyadicInterval::level_iter)
            .map(|i| (i, if rng.random_bool(0.5) { Sign::Plus } else { Sign::Minus }))
            .collect();
        for kind in [
            ShiftKind::S0Interval,
            ShiftKind::SClassical,
            ShiftKind::TAlpha(signs),
            ShiftKind::Identity,
        ] {
            let m = as_matrix(&kind, 6).unwrap();
            for _ in 0..5 {
                let e = random_expansion(6, &mut rng);
                let a = m.apply(&e).unwrap().to_slots();
                let b = apply_kind(&kind, &e).unwrap().to_slots();
                for (x, y) in a.iter().zip(&b) {
                    assert_abs_diff_eq!(x, y, epsilon = 1e-12);
                }
                // The transpose routine is the adjoint.
                let g = random_expansion(6, &mut rng).to_slots();
                let mut mt = vec![0.0; g.len()];
                kind.apply_transpose_slots(&g, &mut mt);
                let lhs: f64 = a.iter().zip(&g).map(|(x, y)| x * y).sum();
                let rhs: f64 = e.to_slots().iter().zip(&mt).map(|(x, y)| x * y).sum();
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn matrix_structure() {
        for depth in 1..=10 {
            let m = as_matrix(&ShiftKind::S0Interval, depth).unwrap();
            assert_eq!(m.antisymmetry_defect(), 0.0);
            let sv = m.singular_values();
            assert!(sv.iter().all(|s| *s == 0.0 || *s == 1.0));
        }
        let diag = as_matrix(
            &ShiftKind::TAlpha([(DyadicInterval::root(), Sign::Minus)].into_iter().collect()),
            3,
        )
        .unwrap();
        assert_eq!(diag.entries[(1, 1)], -1.0);
        assert_eq!(diag.nonzero_count(), 8);
        assert!(as_matrix(&ShiftKind::S0Interval, 15).is_err());
        assert!(as_matrix(&ShiftKind::S0LineTruncated { levels_above: 4 }, 12).is_err());
    }

    #[test]
    fn structured_singular_values_match_dense_svd() {
        for kind in [ShiftKind::S0Interval, ShiftKind::SClassical] {
            for depth in 1..=6 {
                let m = as_matrix(&kind, depth).unwrap();
                let a = m.singular_values();
                let b = m.singular_values_dense();
                for (x, y) in a.iter().zip(&b) {
                    assert_abs_diff_eq!(x, y, epsilon = 1e-10);
                }
            }
        }
        let m = as_matrix(&ShiftKind::SClassical, 4).unwrap();
        let sv = m.singular_values_dense();
        // Levels 0..=2 survive: 1 + 2 + 4 unit singular values.
        assert_eq!(sv.iter().filter(|s| (**s - 1.0).abs() < 1e-12).count(), 7);
    }

    #[test]
    fn matrix_csv_header() {
        let csv = as_matrix(&ShiftKind::S0Interval, 2).unwrap().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "# kind=S0_interval, depth=2");
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn four_arc_projection() {
        let ones = project_four_arcs(|_| 1.0, 1024).unwrap();
        assert_eq!(ones.0, [1.0; 4]);
        let phi = project_four_arcs(|t| if t.sin() > 0.0 { 1.0 } else { -1.0 }, 1024).unwrap();
        assert_eq!(phi.0, [-1.0, -1.0, 1.0, 1.0]);
        let again = project_four_arcs(|t| phi.eval(t), 1024).unwrap();
        assert_eq!(again, phi);
    }

    #[test]
    fn projection_self_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let mk = |rng: &mut ChaCha8Rng| {
                let c: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
                let s: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
                FourierSeries::from_trig(rng.random_range(-1.0..1.0), &c, &s)
            };
            let f = mk(&mut rng);
            let g = mk(&mut rng);
            let pf = project_four_arcs_series(&f);
            let pg = project_four_arcs_series(&g);
            let sampled = project_four_arcs(|t| f.eval(t), 1 << 12).unwrap();
            assert!(pf.max_abs_diff(&sampled) < 1e-6);
            // (𝒫f, g) by quadrature of 𝒫f against g, and the other two forms.
            let n = 1 << 12;
            let pf_g: f64 = (0..n)
                .map(|j| {
                    let t = (j as f64 + 0.5) * TAU / n as f64;
                    pf.eval(t) * g.eval(t)
                })
                .sum::<f64>()
                / n as f64;
            let f_pg: f64 = (0..n)
                .map(|j| {
                    let t = (j as f64 + 0.5) * TAU / n as f64;
                    f.eval(t) * pg.eval(t)
                })
                .sum::<f64>()
                / n as f64;
            assert!((pf_g - pf.inner(&pg)).abs() < 1e-6);
            assert!((f_pg - pf.inner(&pg)).abs() < 1e-6);
        }
    }

    #[test]
    fn line_consistency_trivial_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut f = random_expansion(6, &mut rng);
        f.set_mean(0.0);
        f.set(DyadicInterval::root(), 0.0).unwrap();
        // Mean zero and no root coefficient: the embedded correction vanishes.
        let r = s0_line_vs_interval_consistency(&f, 3, 2.0).unwrap();
        assert!(r.discrepancy < 1e-12);
        assert!(r.restriction_error < 1e-13);
    }

    #[test]
    fn line_consistency_indicator_of_unit_interval() {
        let f = HaarExpansion::constant(1.0, 4);
        let mut last = f64::INFINITY;
        for h in 1..=8 {
            let r = s0_line_vs_interval_consistency(&f, h, 2.0).unwrap();
            // ‖f̃‖₂² = 1 - 2/|J|.
            assert_abs_diff_eq!(r.norm_f_tilde, (1.0 - 2.0 / r.ancestor_length).sqrt(), epsilon = 1e-12);
            assert!(r.discrepancy <= 2.0 / r.ancestor_length);
            assert!(r.discrepancy < last);
            assert!(r.restriction_error < 1e-13);
            last = r.discrepancy;
        }
    }

    #[test]
    fn line_consistency_halves_when_height_doubles() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..5 {
            let f = random_expansion(5, &mut rng);
            for h in [2, 3, 4] {
                let a = s0_line_vs_interval_consistency(&f, h, 2.0).unwrap();
                let b = s0_line_vs_interval_consistency(&f, 2 * h, 2.0).unwrap();
                assert!(b.discrepancy <= 0.5 * a.discrepancy + 1e-15);
            }
        }
    }
}
