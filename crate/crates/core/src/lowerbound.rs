//! Ingredients of the lower estimate `‖S₀‖ ≤ c₀⁻¹ ‖H‖`: Catalan's constant and
//! `c₀ = 8G/π²`, the four-arc projection identity `𝒫Hφ^σ = c₀ S₀φ^σ`, and the
//! frequency ladder whose newest term dominates the sign of every combined
//! frequency.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::Sign;
use crate::error::{Error, Result};
use crate::hilbert::{hilbert_pv_lattice, phi_generator, phi_lattice};
use crate::operators::{project_four_arcs_samples, ArcAverages};

/// `Σ_{k<terms} (-1)^k/(2k+1)²`.
pub fn catalan_partial_sum(terms: usize) -> f64 {
    (0..terms)
        .map(|k| {
            let d = (2 * k + 1) as f64;
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            s / (d * d)
        })
        .sum()
}

/// Catalan's constant with the Cohen–Rodriguez Villegas–Zagier acceleration
/// of the alternating series, using `terms` terms. The error is about
/// `5.83^{-terms}`.
pub fn catalan_accelerated(terms: usize) -> f64 {
    let n = terms as f64;
    let mut d = (3.0 + 8f64.sqrt()).powf(n);
    d = (d + 1.0 / d) / 2.0;
    let mut b = -1.0;
    let mut c = -d;
    let mut s = 0.0;
    for k in 0..terms {
        let kf = k as f64;
        c = b - c;
        s += c / ((2.0 * kf + 1.0) * (2.0 * kf + 1.0));
        b = (kf + n) * (kf - n) * b / ((kf + 0.5) * (kf + 1.0));
    }
    s / d
}

/// Number of accelerated terms needed for an absolute error below `tolerance`.
pub fn catalan_terms_for(tolerance: f64) -> usize {
    let tol = tolerance.clamp(1e-16, 0.5);
    ((1.0 / tol).ln() / (3.0 + 8f64.sqrt()).ln()).ceil() as usize + 2
}

/// `G` to the requested absolute precision.
pub fn catalan_constant(tolerance: f64) -> f64 {
    catalan_accelerated(catalan_terms_for(tolerance))
}

/// `c₀ = 8G/π² ≈ 0.742454`.
pub fn c0_constant() -> f64 {
    8.0 * catalan_constant(1e-16) / (PI * PI)
}

/// The function `(2/π) log tan(x/2)` whose mean over `(0, π/2)` is `-c₀`.
pub fn c0_integrand(x: f64) -> f64 {
    2.0 / PI * (x / 2.0).tan().ln()
}

/// `c₀` as minus the mean of [`c0_integrand`] over `(0, π/2)`.
///
/// The logarithmic singularity at `0` is split off as `log(x/2)`, whose
/// integral is exact; the smooth remainder `log(tan(x/2)/(x/2))` uses the
/// midpoint rule with `resolution` cells, so the error is `O(resolution⁻²)`.
pub fn c0_via_quadrature(resolution: usize) -> Result<f64> {
    if resolution < 1 << 10 {
        return Err(Error::InvalidArgument(format!(
            "quadrature resolution {resolution} is below 1024"
        )));
    }
    let h = FRAC_PI_2 / resolution as f64;
    let smooth: f64 = (0..resolution)
        .map(|j| {
            let y = (j as f64 + 0.5) * h / 2.0;
            (y.tan() / y).ln()
        })
        .sum::<f64>()
        * h;
    let singular = FRAC_PI_2 * ((PI / 4.0).ln() - 1.0);
    let integral = smooth + singular;
    let mean = 2.0 / PI * integral / FRAC_PI_2;
    Ok(-mean)
}

/// A computed quantity next to its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityReport {
    pub quantity: String,
    pub computed: f64,
    pub reference: f64,
    pub abs_error: f64,
    pub resolution: usize,
}

impl QuantityReport {
    pub fn new(quantity: &str, computed: f64, reference: f64, resolution: usize) -> Self {
        Self {
            quantity: quantity.to_string(),
            computed,
            reference,
            abs_error: (computed - reference).abs(),
            resolution,
        }
    }
}

/// Arc pattern of `S₀φ^σ = σφ^{σ̄}`: `S₀φ⁺ = φ⁻`, `S₀φ⁻ = -φ⁺`.
pub fn s0_phi_arcs(sign: Sign) -> ArcAverages {
    match sign {
        Sign::Plus => ArcAverages([-1.0, -1.0, 1.0, 1.0]),
        Sign::Minus => ArcAverages([1.0, -1.0, -1.0, 1.0]),
    }
}

/// `Hφ^σ` at the midpoints `(j + ½)2π/n` by the lattice principal-value rule.
pub fn hilbert_phi_midpoints(sign: Sign, resolution: usize) -> Result<Vec<f64>> {
    hilbert_pv_lattice(&phi_lattice(sign, resolution)?)
}

/// Result of checking `𝒫Hφ^σ = c₀ S₀φ^σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub sign: Sign,
    pub resolution: usize,
    pub c0: f64,
    pub arc_averages: ArcAverages,
    pub expected: ArcAverages,
    pub max_error: f64,
    /// Largest `|Hφ^σ(x) - Hφ^σ(x̄)|` over mirrored midpoint pairs of the
    /// half-circle on which `Hφ^σ` is symmetric (about `π/2` for `σ = +`,
    /// about `π` for `σ = -`).
    pub symmetry_defect: f64,
}

pub fn projection_lemma_check(sign: Sign, resolution: usize) -> Result<ProjectionReport> {
    let h = hilbert_phi_midpoints(sign, resolution)?;
    let arc_averages = project_four_arcs_samples(&h)?;
    let c0 = c0_constant();
    let pattern = s0_phi_arcs(sign);
    let expected = ArcAverages(pattern.0.map(|v| c0 * v));
    let n = resolution;
    let symmetry_defect = match sign {
        // (0, π): x ↔ π - x, i.e. j ↔ n/2 - 1 - j.
        Sign::Plus => (0..n / 4)
            .map(|j| (h[j] - h[n / 2 - 1 - j]).abs())
            .fold(0.0, f64::max),
        // (π/2, 3π/2): x ↔ 2π - x, i.e. j ↔ n - 1 - j.
        Sign::Minus => (n / 4..n / 2)
            .map(|j| (h[j] - h[n - 1 - j]).abs())
            .fold(0.0, f64::max),
    };
    Ok(ProjectionReport {
        sign,
        resolution,
        c0,
        max_error: arc_averages.max_abs_diff(&expected),
        arc_averages,
        expected,
        symmetry_defect,
    })
}

/// Means of `Hφ^σ · φ^η` against their predicted values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub resolution: usize,
    /// `(σ, η, computed, expected)`.
    pub entries: Vec<(Sign, Sign, f64, f64)>,
    pub max_error: f64,
}

/// Checks `mean(Hφ^σ φ^σ) = 0` and `mean(Hφ^σ φ^η) = c₀ mean(S₀φ^σ φ^η)`.
pub fn dualized_orthogonality_check(resolution: usize) -> Result<OrthogonalityReport> {
    let c0 = c0_constant();
    let step = 2.0 * PI / resolution as f64;
    let mut entries = Vec::new();
    for sigma in [Sign::Plus, Sign::Minus] {
        let h = hilbert_phi_midpoints(sigma, resolution)?;
        let s0 = s0_phi_arcs(sigma);
        for eta in [Sign::Plus, Sign::Minus] {
            let mut computed = 0.0;
            let mut expected = 0.0;
            for (j, hv) in h.iter().enumerate() {
                let x = (j as f64 + 0.5) * step;
                let phi = f64::from(phi_generator(eta, x)?);
                computed += hv * phi;
                expected += c0 * s0.eval(x) * phi;
            }
            let computed = computed / resolution as f64;
            let expected = if sigma == eta { 0.0 } else { expected / resolution as f64 };
            entries.push((sigma, eta, computed, expected));
        }
    }
    let max_error = entries
        .iter()
        .map(|(_, _, c, e)| (c - e).abs())
        .fold(0.0, f64::max);
    Ok(OrthogonalityReport {
        resolution,
        entries,
        max_error,
    })
}

/// Largest enumeration [`verify_sign_domination`] attempts.
pub const MAX_ENUMERATION: u128 = 10_000_000;

/// Frequencies `n₀ = 1`, `n_k = factor · N_{k-1} · n_{k-1}`; the genuine ladder has factor 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModulationPlan {
    pub spectral_bounds: Vec<u64>,
    pub frequencies: Vec<u64>,
    pub factor: u64,
}

pub fn build_modulation(spectral_bounds: &[u64]) -> Result<ModulationPlan> {
    build_modulation_with_factor(spectral_bounds, 2)
}

/// Same recursion with an arbitrary factor; factor 1 is the boundary case
/// where domination breaks.
pub fn build_modulation_with_factor(spectral_bounds: &[u64], factor: u64) -> Result<ModulationPlan> {
    if factor == 0 || spectral_bounds.contains(&0) {
        return Err(Error::InvalidArgument(
            "spectral bounds and factor must be positive".into(),
        ));
    }
    let mut frequencies = vec![1u64];
    for &bound in spectral_bounds {
        let last = *frequencies.last().expect("n₀ present");
        let next = factor
            .checked_mul(bound)
            .and_then(|v| v.checked_mul(last))
            .filter(|v| *v <= i64::MAX as u64)
            .ok_or(Error::ModulationOverflow)?;
        frequencies.push(next);
    }
    Ok(ModulationPlan {
        spectral_bounds: spectral_bounds.to_vec(),
        frequencies,
        factor,
    })
}

/// Outcome of the exhaustive sign check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignDominationReport {
    pub k: usize,
    pub holds: bool,
    pub cases_checked: u64,
    /// `(l₀..l_{k-1}, l_k)` violating the rule, first in enumeration order.
    pub counterexample: Option<(Vec<i64>, i64)>,
}

/// Number of integer `k`-tuples with `‖l‖₁ ≤ budget`.
fn l1_ball_size(k: usize, budget: u64) -> u128 {
    // Row `j` holds the counts for tuples of length `j` and each budget.
    let b = budget as usize;
    let mut counts = vec![1u128; b + 1];
    for _ in 0..k {
        let mut next = vec![0u128; b + 1];
        for (total, slot) in next.iter_mut().enumerate() {
            *slot = counts[total];
            for v in 1..=total {
                *slot += 2 * counts[total - v];
            }
        }
        counts = next;
    }
    counts[b]
}

fn for_each_tuple(k: usize, budget: u64, prefix: &mut Vec<i64>, visit: &mut impl FnMut(&[i64]) -> bool) -> bool {
    if prefix.len() == k {
        return visit(prefix);
    }
    let b = budget as i64;
    for v in -b..=b {
        prefix.push(v);
        let keep_going = for_each_tuple(k, budget - v.unsigned_abs(), prefix, visit);
        prefix.pop();
        if !keep_going {
            return false;
        }
    }
    true
}

/// Checks `sign(l⃗·n⃗_{k-1} + l_k n_k) = sign(l_k)` for every `l⃗ ∈ ℤ^k`
/// with `‖l⃗‖₁ ≤ N_{k-1}` and every `0 < |l_k| ≤ N_k` (or `N_{k-1}` when `k` is
/// the last level).
pub fn verify_sign_domination(plan: &ModulationPlan, k: usize) -> Result<SignDominationReport> {
    if k == 0 || k >= plan.frequencies.len() {
        return Err(Error::InvalidArgument(format!(
            "level {k} is outside 1..={}",
            plan.frequencies.len() - 1
        )));
    }
    let budget = plan.spectral_bounds[k - 1];
    let newest = plan.spectral_bounds.get(k).copied().unwrap_or(budget) as i64;
    let size = l1_ball_size(k, budget) * 2 * newest as u128;
    if size > MAX_ENUMERATION {
        return Err(Error::EnumerationTooLarge(size));
    }
    let n_k = plan.frequencies[k] as i128;
    let lower = &plan.frequencies[..k];
    let l_values: Vec<i64> = (-newest..=newest).filter(|v| *v != 0).collect();
    let results: Vec<(u64, Option<(Vec<i64>, i64)>)> = l_values
        .par_iter()
        .map(|&lk| {
            let mut checked = 0u64;
            let mut bad = None;
            for_each_tuple(k, budget, &mut Vec::with_capacity(k), &mut |l| {
                checked += 1;
                let dot: i128 = l.iter().zip(lower).map(|(a, n)| *a as i128 * *n as i128).sum();
                let total = dot + lk as i128 * n_k;
                if total.signum() != (lk as i128).signum() {
                    bad = Some((l.to_vec(), lk));
                    return false;
                }
                true
            });
            (checked, bad)
        })
        .collect();
    let cases_checked = results.iter().map(|r| r.0).sum();
    let counterexample = results.into_iter().find_map(|r| r.1);
    Ok(SignDominationReport {
        k,
        holds: counterexample.is_none(),
        cases_checked,
        counterexample,
    })
}
