//! Dyadic intervals of `[0, 1)`, the Haar system and tosses.
//!
//! Sign convention: `h_I` is negative on the left child `I₋` and positive on
//! the right child `I₊`, i.e. `h_I = |I|^{-1/2} (1_{I₊} - 1_{I₋})`.
//!
//! Points are `f64` values in `[0, 1)`. Locating the level-`k` interval of a
//! point multiplies by `2^k`, which is exact in binary floating point, so
//! points on child borders are never misclassified.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deepest level an interval may live on.
pub const MAX_LEVEL: u32 = 52;

/// A sign in `{-1, +1}`; also used as the signature of a child (`-` left, `+` right).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Minus => -1,
            Sign::Plus => 1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
        }
    }

    pub fn from_i8(v: i8) -> Option<Sign> {
        match v {
            -1 => Some(Sign::Minus),
            1 => Some(Sign::Plus),
            _ => None,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Minus => "-",
            Sign::Plus => "+",
        })
    }
}

/// The dyadic interval `[m 2^{-k}, (m+1) 2^{-k})` inside `I₀ = [0, 1)`.
///
/// Ordering is level-major, then by index, which is the basis order used
/// everywhere coefficients are laid out densely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicInterval {
    level: u32,
    index: u64,
}

impl DyadicInterval {
    pub fn new(level: u32, index: u64) -> Result<Self> {
        if level > MAX_LEVEL || index >> level != 0 {
            return Err(Error::InvalidInterval { level, index });
        }
        Ok(Self { level, index })
    }

    pub const fn root() -> Self {
        Self { level: 0, index: 0 }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// `|I| = 2^{-level}`.
    pub fn length(&self) -> f64 {
        pow2(-(self.level as i32))
    }

    pub fn start(&self) -> f64 {
        self.index as f64 * self.length()
    }

    pub fn end(&self) -> f64 {
        (self.index + 1) as f64 * self.length()
    }

    pub fn is_root(&self) -> bool {
        self.level == 0
    }

    pub fn parent(&self) -> Option<Self> {
        (self.level > 0).then(|| Self {
            level: self.level - 1,
            index: self.index / 2,
        })
    }

    /// `I₋`.
    pub fn left_child(&self) -> Self {
        Self {
            level: self.level + 1,
            index: 2 * self.index,
        }
    }

    /// `I₊`.
    pub fn right_child(&self) -> Self {
        Self {
            level: self.level + 1,
            index: 2 * self.index + 1,
        }
    }

    pub fn child(&self, side: Sign) -> Self {
        match side {
            Sign::Minus => self.left_child(),
            Sign::Plus => self.right_child(),
        }
    }

    /// Which child of its parent this interval is; `None` for the root.
    pub fn side(&self) -> Option<Sign> {
        if self.is_root() {
            None
        } else if self.index.is_multiple_of(2) {
            Some(Sign::Minus)
        } else {
            Some(Sign::Plus)
        }
    }

    pub fn sibling(&self) -> Option<Self> {
        (!self.is_root()).then_some(Self {
            level: self.level,
            index: self.index ^ 1,
        })
    }

    pub fn contains(&self, x: f64) -> bool {
        (0.0..1.0).contains(&x) && atom_index(self.level, x) == self.index
    }

    /// The level-`level` interval containing `x ∈ [0, 1)`.
    pub fn containing(level: u32, x: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::InvalidArgument(format!("point {x} is outside [0, 1)")));
        }
        Self::new(level, atom_index(level, x))
    }

    /// Whether `other` is this interval or one of its descendants.
    pub fn is_ancestor_of(&self, other: &Self) -> bool {
        other.level >= self.level && other.index >> (other.level - self.level) == self.index
    }

    /// All intervals of a level, in index order.
    pub fn level_iter(level: u32) -> impl Iterator<Item = DyadicInterval> {
        (0..1u64 << level).map(move |index| DyadicInterval { level, index })
    }

    /// Slot of this interval in the dense coefficient layout
    /// `[mean, root, level 1 ..., level 2 ..., ...]`.
    pub fn slot(&self) -> usize {
        (1usize << self.level) + self.index as usize
    }

    /// Inverse of [`DyadicInterval::slot`]; slot 0 (the mean) has no interval.
    pub fn from_slot(slot: usize) -> Option<Self> {
        if slot == 0 {
            return None;
        }
        let level = usize::BITS - 1 - slot.leading_zeros();
        Some(Self {
            level,
            index: (slot - (1usize << level)) as u64,
        })
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.level, self.index)
    }
}

pub(crate) fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

fn atom_index(level: u32, x: f64) -> u64 {
    (x * pow2(level as i32)).floor() as u64
}

/// `h_I(x)`.
pub fn haar_eval(interval: &DyadicInterval, x: f64) -> f64 {
    if !interval.contains(x) {
        return 0.0;
    }
    let amplitude = pow2(interval.level as i32).sqrt();
    if interval.right_child().contains(x) {
        amplitude
    } else {
        -amplitude
    }
}

/// The standard toss `ε_k(x)`: `+1` iff `x` lies in a right child at level `k + 1`.
pub fn toss(k: u32, x: f64) -> Result<i8> {
    let child = DyadicInterval::containing(k + 1, x)?;
    Ok(if child.index % 2 == 1 { 1 } else { -1 })
}

/// The tuned toss `ε_k^σ(x)`: equal to `ε_k(x)` where `ε_{k-1}(x) = σ`, zero elsewhere.
pub fn toss_signed(k: u32, sign: Sign, x: f64) -> Result<i8> {
    if k == 0 {
        return Err(Error::NoSignedTossAtGenerationZero);
    }
    if toss(k - 1, x)? == sign.as_i8() {
        toss(k, x)
    } else {
        Ok(0)
    }
}

/// A finite Haar expansion of a function on `[0, 1)`.
///
/// The function is resolved on the `2^depth` atoms of level `depth`; only
/// intervals of level `< depth` carry coefficients. Storage is sparse, so a
/// single deep Haar function costs one entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ExpansionRecord", try_from = "ExpansionRecord")]
pub struct HaarExpansion {
    mean: f64,
    depth: u32,
    coeffs: BTreeMap<DyadicInterval, f64>,
}

impl HaarExpansion {
    pub fn zero(depth: u32) -> Self {
        Self {
            mean: 0.0,
            depth,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(value: f64, depth: u32) -> Self {
        Self {
            mean: value,
            ..Self::zero(depth)
        }
    }

    /// The single Haar function `h_I`.
    pub fn haar(interval: DyadicInterval, depth: u32) -> Result<Self> {
        let mut e = Self::zero(depth);
        e.set(interval, 1.0)?;
        Ok(e)
    }

    pub fn from_parts(
        mean: f64,
        depth: u32,
        coeffs: impl IntoIterator<Item = (DyadicInterval, f64)>,
    ) -> Result<Self> {
        let mut e = Self::constant(mean, depth);
        for (interval, value) in coeffs {
            e.set(interval, value)?;
        }
        Ok(e)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn set_mean(&mut self, mean: f64) {
        self.mean = mean;
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Sets `(f, h_I)`; zero removes the entry.
    pub fn set(&mut self, interval: DyadicInterval, value: f64) -> Result<()> {
        if interval.level >= self.depth {
            return Err(Error::LevelOutOfRange {
                level: interval.level,
                depth: self.depth,
            });
        }
        if value == 0.0 {
            self.coeffs.remove(&interval);
        } else {
            self.coeffs.insert(interval, value);
        }
        Ok(())
    }

    pub fn coeff(&self, interval: &DyadicInterval) -> f64 {
        self.coeffs.get(interval).copied().unwrap_or(0.0)
    }

    /// Nonzero coefficients in level-major order.
    pub fn coeffs(&self) -> impl Iterator<Item = (&DyadicInterval, &f64)> {
        self.coeffs.iter()
    }

    pub fn nonzero_count(&self) -> usize {
        self.coeffs.len()
    }

    /// Deepest level carrying a nonzero coefficient.
    pub fn max_level(&self) -> Option<u32> {
        self.coeffs.keys().map(|i| i.level).max()
    }

    /// Same coefficients, resolved on a finer grid.
    pub fn with_depth(&self, depth: u32) -> Result<Self> {
        Self::from_parts(self.mean, depth, self.coeffs.iter().map(|(i, v)| (*i, *v)))
    }

    /// `mean² + Σ (f, h_I)²`, the squared `L²` norm by Parseval.
    pub fn energy(&self) -> f64 {
        self.mean * self.mean + self.coeffs.values().map(|c| c * c).sum::<f64>()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = Self::constant(self.mean * factor, self.depth);
        for (i, v) in &self.coeffs {
            if v * factor != 0.0 {
                out.coeffs.insert(*i, v * factor);
            }
        }
        out
    }

    /// Coefficient-wise `self + other`; depths must match.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.depth != other.depth {
            return Err(Error::InvalidArgument(format!(
                "depth mismatch: {} vs {}",
                self.depth, other.depth
            )));
        }
        let mut out = self.clone();
        out.mean += other.mean;
        for (i, v) in &other.coeffs {
            let sum = out.coeff(i) + v;
            out.set(*i, sum)?;
        }
        Ok(out)
    }

    /// Coefficients laid out densely as `[mean, root, level 1 ..., ...]`, length `2^depth`.
    pub fn to_slots(&self) -> Vec<f64> {
        let mut slots = vec![0.0; 1usize << self.depth];
        slots[0] = self.mean;
        for (i, v) in &self.coeffs {
            slots[i.slot()] = *v;
        }
        slots
    }

    pub fn from_slots(slots: &[f64]) -> Result<Self> {
        let depth = log2_exact(slots.len())?;
        let mut e = Self::constant(slots[0], depth);
        for (slot, &v) in slots.iter().enumerate().skip(1) {
            if v != 0.0 {
                e.coeffs
                    .insert(DyadicInterval::from_slot(slot).expect("nonzero slot"), v);
            }
        }
        Ok(e)
    }

    /// `⟨f⟩_J`, the average over any dyadic interval `J`.
    pub fn average_on(&self, interval: &DyadicInterval) -> f64 {
        let mut avg = self.mean;
        let mut ancestor = DyadicInterval::root();
        while ancestor.level < interval.level.min(self.depth) {
            let shift = interval.level - ancestor.level - 1;
            let child_index = interval.index >> shift;
            let value = self.coeff(&ancestor);
            if value != 0.0 {
                let amplitude = pow2(ancestor.level as i32).sqrt();
                avg += if child_index % 2 == 1 {
                    value * amplitude
                } else {
                    -value * amplitude
                };
            }
            ancestor = DyadicInterval {
                level: ancestor.level + 1,
                index: child_index,
            };
        }
        avg
    }

    /// Serializable record `{mean, depth, coeffs: [[k, m, value], ...]}`.
    pub fn to_record(&self) -> ExpansionRecord {
        ExpansionRecord {
            mean: self.mean,
            depth: self.depth,
            coeffs: self
                .coeffs
                .iter()
                .map(|(i, v)| (i.level, i.index, *v))
                .collect(),
        }
    }

    pub fn from_record(record: &ExpansionRecord) -> Result<Self> {
        let mut e = Self::constant(record.mean, record.depth);
        for &(k, m, v) in &record.coeffs {
            e.set(DyadicInterval::new(k, m)?, v)?;
        }
        Ok(e)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: ExpansionRecord =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_record(&record)
    }
}

impl From<HaarExpansion> for ExpansionRecord {
    fn from(e: HaarExpansion) -> Self {
        e.to_record()
    }
}

impl TryFrom<ExpansionRecord> for HaarExpansion {
    type Error = Error;

    fn try_from(record: ExpansionRecord) -> Result<Self> {
        Self::from_record(&record)
    }
}

/// Wire form of a [`HaarExpansion`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRecord {
    pub mean: f64,
    pub depth: u32,
    pub coeffs: Vec<(u32, u64, f64)>,
}

pub(crate) fn log2_exact(len: usize) -> Result<u32> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros())
}

/// Fast Haar analysis into the dense slot layout. Input length must be `2^d`.
pub fn analyze_slots(samples: &[f64]) -> Result<Vec<f64>> {
    let depth = log2_exact(samples.len())?;
    let mut slots = vec![0.0; samples.len()];
    let mut averages = samples.to_vec();
    for level in (0..depth).rev() {
        let count = 1usize << level;
        let scale = pow2(-(level as i32)).sqrt() / 2.0;
        for m in 0..count {
            let left = averages[2 * m];
            let right = averages[2 * m + 1];
            slots[count + m] = scale * (right - left);
            averages[m] = 0.5 * (left + right);
        }
    }
    slots[0] = averages[0];
    Ok(slots)
}

/// Inverse of [`analyze_slots`].
pub fn synthesize_slots(slots: &[f64]) -> Result<Vec<f64>> {
    let depth = log2_exact(slots.len())?;
    let mut values = vec![0.0; slots.len()];
    values[0] = slots[0];
    let mut scratch = vec![0.0; slots.len()];
    for level in 0..depth {
        let count = 1usize << level;
        let amplitude = pow2(level as i32).sqrt();
        for m in 0..count {
            let delta = slots[count + m] * amplitude;
            scratch[2 * m] = values[m] - delta;
            scratch[2 * m + 1] = values[m] + delta;
        }
        values[..2 * count].copy_from_slice(&scratch[..2 * count]);
    }
    Ok(values)
}

/// Haar analysis of a step function given by its `2^d` atom values.
pub fn analyze(samples: &[f64]) -> Result<HaarExpansion> {
    HaarExpansion::from_slots(&analyze_slots(samples)?)
}

/// Analysis of an arbitrary function through per-atom averages of a sampler
/// (midpoint rule with `points_per_atom` nodes).
pub fn analyze_sampler(
    depth: u32,
    points_per_atom: usize,
    sampler: impl Fn(f64) -> f64,
) -> Result<HaarExpansion> {
    if depth > 26 {
        return Err(Error::DepthTooLarge { depth, max: 26 });
    }
    let atoms = 1usize << depth;
    let points = points_per_atom.max(1);
    let width = 1.0 / atoms as f64;
    let samples: Vec<f64> = (0..atoms)
        .map(|a| {
            (0..points)
                .map(|j| sampler((a as f64 + (j as f64 + 0.5) / points as f64) * width))
                .sum::<f64>()
                / points as f64
        })
        .collect();
    analyze(&samples)
}

/// Pointwise synthesis `mean + Σ (f, h_I) h_I(x)`.
pub fn synthesize(e: &HaarExpansion, x: f64) -> f64 {
    if !(0.0..1.0).contains(&x) {
        return 0.0;
    }
    let mut value = e.mean;
    for level in 0..e.depth {
        let interval = DyadicInterval {
            level,
            index: atom_index(level, x),
        };
        let c = e.coeff(&interval);
        if c != 0.0 {
            value += c * haar_eval(&interval, x);
        }
    }
    value
}

/// Values of the expansion on the `2^depth` atoms.
pub fn synthesize_samples(e: &HaarExpansion) -> Vec<f64> {
    synthesize_slots(&e.to_slots()).expect("slot layout has power-of-two length")
}

/// `d_I f = ½(⟨f⟩_{I₊} − ⟨f⟩_{I₋})`.
pub fn martingale_difference(e: &HaarExpansion, interval: &DyadicInterval) -> f64 {
    0.5 * (e.average_on(&interval.right_child()) - e.average_on(&interval.left_child()))
}

/// `L^p` norm of a step function on `[0, 1)` given by equal-width atom values;
/// `p = ∞` gives the sup norm.
pub fn lp_norm(samples: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    let n = samples.len() as f64;
    (samples.iter().map(|v| v.abs().powf(p)).sum::<f64>() / n).powf(1.0 / p)
}

/// One CSV line of comma-separated atom values.
pub fn samples_to_csv(samples: &[f64]) -> String {
    let mut line = samples
        .iter()
        .map(|v| format!("{v:e}"))
        .collect::<Vec<_>>()
        .join(",");
    line.push('\n');
    line
}

pub fn samples_from_csv(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
        })
        .collect()
}
