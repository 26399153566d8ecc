//! The planar random walk with memory.
//!
//! Fine step `l ≥ 1` moves by `√(2δ) ε_l` horizontally when the previous
//! toss `ε_{l-1}` is `+1` and vertically when it is `-1`; `ε_0` only seeds
//! the memory. Positions are kept as integer lattice points in units of
//! `√(2δ)`. Every `N` fine steps give one coarse step `X_n = B_{nN}`, and the
//! walk stops at the first coarse time with `|X_n| ≥ 1 - ε`.
//!
//! Toss streams are counter based: path `r` of an ensemble with seed `s`
//! reads ChaCha8 stream `r` of key `s`, bits taken least significant first
//! from each 64-bit word. Any path can be regenerated on its own.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicInterval, HaarExpansion, Sign};
use crate::error::{Error, Result};
use crate::operators::apply_s0;

/// Resolution, horizon and the derived step sizes.
///
/// `δ = T/N⁵`, `θ = Nδ`, `ε = 1/N`. Strict configs require the coarse step
/// bound `N√(2δ) = √(2T) N^{-3/2}` to stay below `ε`, i.e. `N ≥ 2T`, so a
/// walk cannot jump over the band `𝔻 \ (1 - ε)𝔻` between coarse samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    n: u32,
    horizon: f64,
    strict: bool,
}

/// Largest supported resolution: one coarse block must fit in a 64-bit word.
pub const MAX_RESOLUTION: u32 = 64;

impl SimConfig {
    pub fn new(n: u32, horizon: f64) -> Result<Self> {
        let config = Self::relaxed(n, horizon)?;
        if !config.step_condition_holds() {
            return Err(Error::InvalidConfig(format!(
                "coarse step bound {:.6} exceeds the margin ε = {:.6} (need N ≥ 2T)",
                config.coarse_step_bound(),
                config.eps()
            )));
        }
        Ok(Self {
            strict: true,
            ..config
        })
    }

    /// Same parameters without the step-bound requirement.
    pub fn relaxed(n: u32, horizon: f64) -> Result<Self> {
        if !(2..=MAX_RESOLUTION).contains(&n) {
            return Err(Error::InvalidConfig(format!(
                "resolution N = {n} is outside 2..={MAX_RESOLUTION}"
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!("horizon T = {horizon} must be positive")));
        }
        Ok(Self {
            n,
            horizon,
            strict: false,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    /// `δ = T/N⁵`.
    pub fn delta(&self) -> f64 {
        self.horizon / (self.n as f64).powi(5)
    }

    /// `θ = Nδ`.
    pub fn theta(&self) -> f64 {
        self.n as f64 * self.delta()
    }

    /// `ε = 1/N`.
    pub fn eps(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Length of one fine step, `√(2δ)`.
    pub fn step(&self) -> f64 {
        (2.0 * self.delta()).sqrt()
    }

    /// `N√(2δ)`, the largest possible coarse displacement.
    pub fn coarse_step_bound(&self) -> f64 {
        self.n as f64 * self.step()
    }

    pub fn step_condition_holds(&self) -> bool {
        self.coarse_step_bound() <= self.eps() * (1.0 + 1e-12)
    }

    /// `N⁵`.
    pub fn fine_steps(&self) -> u64 {
        (self.n as u64).pow(5)
    }

    /// `N⁴`.
    pub fn coarse_steps(&self) -> u64 {
        (self.n as u64).pow(4)
    }

    /// Squared stopping radius `(1 - ε)²` in lattice units.
    pub fn stop_radius_sq_lattice(&self) -> f64 {
        let r = (1.0 - self.eps()) / self.step();
        r * r
    }

    /// Whether a lattice point is at or beyond the stopping radius.
    pub fn outside_stop_radius(&self, x: i64, y: i64) -> bool {
        ((x * x + y * y) as f64) >= self.stop_radius_sq_lattice()
    }
}

/// Reads uniformly random bits from a ChaCha8 stream, least significant bit first.
#[derive(Debug, Clone)]
pub struct TossStream {
    rng: ChaCha8Rng,
    word: u64,
    available: u32,
}

impl TossStream {
    /// Stream `path_index` under key `seed`.
    pub fn new(seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_index);
        Self {
            rng,
            word: 0,
            available: 0,
        }
    }

    /// The next `count ≤ 64` bits; bit `i` of the result is the `i`-th bit read.
    pub fn next_bits(&mut self, count: u32) -> u64 {
        debug_assert!(count <= 64);
        if count == 0 {
            return 0;
        }
        if count <= self.available {
            let out = self.word & low_mask(count);
            self.word = if count == 64 { 0 } else { self.word >> count };
            self.available -= count;
            return out;
        }
        let head_len = self.available;
        let head = self.word;
        let fresh = self.rng.next_u64();
        let tail_len = count - head_len;
        let out = head | ((fresh & low_mask(tail_len)) << head_len);
        self.word = if tail_len == 64 { 0 } else { fresh >> tail_len };
        self.available = 64 - tail_len;
        out
    }

    /// The next toss as `±1`.
    pub fn next_toss(&mut self) -> i8 {
        if self.next_bits(1) == 1 {
            1
        } else {
            -1
        }
    }
}

pub(crate) fn low_mask(count: u32) -> u64 {
    if count >= 64 {
        u64::MAX
    } else {
        (1u64 << count) - 1
    }
}

/// Lattice displacement of one coarse block.
///
/// `block` holds the `N` tosses of the block (bit `i` set for `+1`), `prior`
/// is the toss just before it. Returns `(dx, dy, last toss bit)`.
/// Any `n ≤ 64` consecutive fine tosses may be passed, not only a block.
#[inline(always)]
pub fn block_displacement(block: u64, prior: u64, n: u32) -> (i64, i64, u64) {
    let mask = low_mask(n);
    let block = block & mask;
    let prev = ((block << 1) | prior) & mask;
    let horizontal = prev.count_ones() as i64;
    let plus = block.count_ones() as i64;
    let plus_horizontal = (prev & block).count_ones() as i64;
    let dx = 2 * plus_horizontal - horizontal;
    let dy = 2 * (plus - plus_horizontal) - (n as i64 - horizontal);
    (dx, dy, (block >> (n - 1)) & 1)
}

/// A fine increment in lattice units; exactly one coordinate is nonzero.
pub type Increment = (i8, i8);

/// Increments `dB_1..dB_K` from tosses `ε_0..ε_K`.
pub fn step_increments(tosses: &[i8]) -> Result<Vec<Increment>> {
    if tosses.is_empty() {
        return Err(Error::InvalidArgument("toss sequence is empty".into()));
    }
    Ok(tosses
        .windows(2)
        .map(|w| if w[0] == 1 { (w[1], 0) } else { (0, w[1]) })
        .collect())
}

/// One sampled walk.
///
/// `tosses` holds `ε_0..ε_K` and `positions` holds `B_0..B_K` in lattice
/// units, with `K = N⁵`. Increments after the stopping time are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkPath {
    pub seed: u64,
    pub path_index: u64,
    pub tosses: Vec<i8>,
    pub positions: Vec<(i64, i64)>,
    pub stop_index: Option<u64>,
}

impl WalkPath {
    /// Regenerates path `path_index` of the ensemble keyed by `seed`.
    pub fn generate(config: &SimConfig, seed: u64, path_index: u64) -> Self {
        let mut stream = TossStream::new(seed, path_index);
        let k = config.fine_steps() as usize;
        let n = config.n as usize;
        let mut tosses = Vec::with_capacity(k + 1);
        let mut positions = Vec::with_capacity(k + 1);
        tosses.push(stream.next_toss());
        positions.push((0i64, 0i64));
        let (mut x, mut y) = (0i64, 0i64);
        let mut stop_index = None;
        for l in 1..=k {
            let toss = stream.next_toss();
            tosses.push(toss);
            if stop_index.is_none() {
                if tosses[l - 1] == 1 {
                    x += toss as i64;
                } else {
                    y += toss as i64;
                }
            }
            positions.push((x, y));
            if stop_index.is_none() && l % n == 0 && config.outside_stop_radius(x, y) {
                stop_index = Some((l / n) as u64);
            }
        }
        Self {
            seed,
            path_index,
            tosses,
            positions,
            stop_index,
        }
    }

    /// Builds a path from given tosses, applying the same stopping rule.
    pub fn from_tosses(config: &SimConfig, tosses: &[i8]) -> Result<Self> {
        let increments = step_increments(tosses)?;
        let n = config.n as usize;
        let mut positions = vec![(0i64, 0i64)];
        let mut stop_index = None;
        let (mut x, mut y) = (0i64, 0i64);
        for (l, (dx, dy)) in increments.iter().enumerate().map(|(i, d)| (i + 1, d)) {
            if stop_index.is_none() {
                x += *dx as i64;
                y += *dy as i64;
            }
            positions.push((x, y));
            if stop_index.is_none() && l % n == 0 && config.outside_stop_radius(x, y) {
                stop_index = Some((l / n) as u64);
            }
        }
        Ok(Self {
            seed: 0,
            path_index: 0,
            tosses: tosses.to_vec(),
            positions,
            stop_index,
        })
    }

    /// Positions in length units.
    pub fn position(&self, config: &SimConfig, l: usize) -> (f64, f64) {
        let (x, y) = self.positions[l];
        (x as f64 * config.step(), y as f64 * config.step())
    }

    /// Lattice increments `dB_l = B_l - B_{l-1}`, `l ≥ 1`.
    pub fn increments(&self) -> Vec<Increment> {
        self.positions
            .windows(2)
            .map(|w| ((w[1].0 - w[0].0) as i8, (w[1].1 - w[0].1) as i8))
            .collect()
    }

    /// The walk rotated by `π/4`, `((B¹ + B²)/√2, (B² - B¹)/√2)`, in units of `√δ`.
    ///
    /// Its first coordinate is the plain sum `Σ ε_l` up to the stopping time.
    pub fn rotated(&self) -> Vec<(i64, i64)> {
        self.positions.iter().map(|(x, y)| (x + y, y - x)).collect()
    }
}

/// Coarse positions `X_n = B_{nN}`, `n = 0..=N⁴`, in lattice units.
pub fn sample_coarse(path: &WalkPath, config: &SimConfig) -> Result<Vec<(i64, i64)>> {
    let needed = config.fine_steps() as usize + 1;
    if path.positions.len() < needed {
        return Err(Error::PathTooShort {
            needed,
            have: path.positions.len(),
        });
    }
    Ok(path
        .positions
        .iter()
        .step_by(config.n as usize)
        .take(config.coarse_steps() as usize + 1)
        .copied()
        .collect())
}

/// First coarse index with `|X_n| ≥ 1 - ε`, if any.
pub fn stop_at_annulus(coarse: &[(i64, i64)], config: &SimConfig) -> Option<u64> {
    coarse
        .iter()
        .position(|(x, y)| config.outside_stop_radius(*x, *y))
        .map(|n| n as u64)
}

/// Outcome of checking `S₀ dB_l = dB_l^⊤ = (dB², -dB¹)` on Haar coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationReport {
    pub depth: u32,
    pub levels_checked: u32,
    pub mismatches: usize,
    pub exact: bool,
}

/// `dB^σ_l = √(2δ) Σ_{I ∈ 𝒟_l^σ} |I|^{1/2} h_I`, `σ = +` for the horizontal
/// component; `𝒟_l^σ` are the level-`l` intervals of signature `σ`.
pub fn increment_expansion(config: &SimConfig, l: u32, sign: Sign, depth: u32) -> Result<HaarExpansion> {
    if l == 0 {
        return Err(Error::NoSignedTossAtGenerationZero);
    }
    let mut e = HaarExpansion::zero(depth);
    for interval in DyadicInterval::level_iter(l) {
        if interval.side() == Some(sign) {
            e.set(interval, config.step() * interval.length().sqrt())?;
        }
    }
    Ok(e)
}

/// Checks `S₀dB¹_l = dB²_l`, `S₀dB²_l = -dB¹_l` and `S₀S₀dB_l = -dB_l` for
/// `1 ≤ l ≤ depth`, coefficient by coefficient and without tolerance.
pub fn s0_rotation_check(config: &SimConfig, depth: u32) -> Result<RotationReport> {
    if depth > crate::operators::MAX_MATRIX_DEPTH {
        return Err(Error::DepthTooLarge {
            depth,
            max: crate::operators::MAX_MATRIX_DEPTH,
        });
    }
    let mut mismatches = 0;
    for l in 1..=depth {
        let h = increment_expansion(config, l, Sign::Plus, depth + 1)?;
        let v = increment_expansion(config, l, Sign::Minus, depth + 1)?;
        let s0h = apply_s0(&h);
        let s0v = apply_s0(&v);
        mismatches += usize::from(s0h != v);
        mismatches += usize::from(s0v != h.scaled(-1.0));
        mismatches += usize::from(apply_s0(&s0h) != h.scaled(-1.0));
        mismatches += usize::from(apply_s0(&s0v) != v.scaled(-1.0));
    }
    Ok(RotationReport {
        depth,
        levels_checked: depth,
        mismatches,
        exact: mismatches == 0,
    })
}

/// Exact one-coarse-step moments given the toss before the block.
///
/// Sums run over all `2^N` continuations; `s1`, `s2` are the horizontal and
/// vertical lattice displacements, so `dX^i = √(2δ) s_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentTable {
    pub n: u32,
    pub prior: i8,
    pub paths: u64,
    pub sum_s1: i64,
    pub sum_s2: i64,
    pub sum_s1_sq: i64,
    pub sum_s2_sq: i64,
    pub sum_s1_s2: i64,
    pub sum_s1_4: i64,
    pub sum_s2_4: i64,
}

/// Largest resolution for exhaustive moment enumeration.
pub const MAX_ENUMERATED_RESOLUTION: u32 = 12;

pub fn conditional_moments_exact(n: u32, prior: i8) -> Result<MomentTable> {
    if !(1..=MAX_ENUMERATED_RESOLUTION).contains(&n) {
        return Err(Error::EnumerationTooLarge(1u128 << n.min(127)));
    }
    let prior_bit = u64::from(prior == 1);
    let mut t = MomentTable {
        n,
        prior,
        paths: 1u64 << n,
        sum_s1: 0,
        sum_s2: 0,
        sum_s1_sq: 0,
        sum_s2_sq: 0,
        sum_s1_s2: 0,
        sum_s1_4: 0,
        sum_s2_4: 0,
    };
    for block in 0..1u64 << n {
        let (s1, s2, _) = block_displacement(block, prior_bit, n);
        t.sum_s1 += s1;
        t.sum_s2 += s2;
        t.sum_s1_sq += s1 * s1;
        t.sum_s2_sq += s2 * s2;
        t.sum_s1_s2 += s1 * s2;
        t.sum_s1_4 += s1.pow(4);
        t.sum_s2_4 += s2.pow(4);
    }
    Ok(t)
}

impl MomentTable {
    /// `E((dX^i)²)/δ = 2 E(s_i²)`, for component `i ∈ {1, 2}`.
    pub fn second_moment_over_delta(&self, component: u8) -> f64 {
        let sum = if component == 1 { self.sum_s1_sq } else { self.sum_s2_sq };
        2.0 * sum as f64 / self.paths as f64
    }

    /// Whether `2 Σ s_i² = 2^N (2·1(prior matches) + N - 1)` holds in integers.
    pub fn matches_closed_form(&self, component: u8) -> bool {
        let (sum, matches) = if component == 1 {
            (self.sum_s1_sq, self.prior == 1)
        } else {
            (self.sum_s2_sq, self.prior == -1)
        };
        2 * sum == self.paths as i64 * (2 * i64::from(matches) + self.n as i64 - 1)
    }

    /// `E((dX^i)⁴)/θ² = 4 E(s_i⁴)/N²`.
    pub fn fourth_moment_ratio(&self, component: u8) -> f64 {
        let sum = if component == 1 { self.sum_s1_4 } else { self.sum_s2_4 };
        4.0 * sum as f64 / self.paths as f64 / (self.n as f64 * self.n as f64)
    }
}

/// A seeded collection of stored paths.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkEnsemble {
    pub config: SimConfig,
    pub seed: u64,
    pub paths: Vec<WalkPath>,
}

impl WalkEnsemble {
    pub fn generate(config: SimConfig, seed: u64, count: u64) -> Self {
        let paths = (0..count)
            .into_par_iter()
            .map(|r| WalkPath::generate(&config, seed, r))
            .collect();
        Self { config, seed, paths }
    }

    /// One CSV line per path: seed, index, stop index, then coarse positions
    /// as `x;y` in length units.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,path,stop_index,coarse_positions\n");
        let s = self.config.step();
        for p in &self.paths {
            let coarse = sample_coarse(p, &self.config).expect("generated paths are full length");
            let last = p.stop_index.map_or(coarse.len(), |n| n as usize + 1);
            let cells: Vec<String> = coarse[..last]
                .iter()
                .map(|(x, y)| format!("{};{}", *x as f64 * s, *y as f64 * s))
                .collect();
            let stop = p.stop_index.map_or(String::from("none"), |n| n.to_string());
            out.push_str(&format!("{},{},{},{}\n", p.seed, p.path_index, stop, cells.join(" ")));
        }
        out
    }
}
