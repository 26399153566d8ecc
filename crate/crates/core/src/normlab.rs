//! Operator norms of the shifts on truncated coefficient spaces.
//!
//! `p = 2` norms come from singular values. For other `p` the norm is only
//! bounded from below, by explicit witnesses found with an ascent on
//! `‖Op f‖_p / ‖f‖_p` over step functions of the given depth.
//!
//! The depth-`d` coefficient space is exactly the space of step functions on
//! the `2^d` atoms, so an operator acts on atom values as
//! `synthesize ∘ K ∘ analyze` and its adjoint as `synthesize ∘ Kᵀ ∘ analyze`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{analyze_slots, lp_norm, synthesize_slots, HaarExpansion};
use crate::error::{Error, Result};
use crate::hilbert::hp_constant;
use crate::lowerbound::c0_constant;
use crate::operators::{as_matrix, ShiftKind, MAX_MATRIX_DEPTH};

/// Deepest coefficient space searched by the ascent.
pub const MAX_SEARCH_DEPTH: u32 = 16;

/// Largest singular value of the operator matrix.
pub fn norm_p2_exact(kind: &ShiftKind, depth: u32) -> Result<f64> {
    if kind.space_depth(depth) > 12 {
        return Err(Error::DepthTooLarge {
            depth: kind.space_depth(depth),
            max: 12.min(MAX_MATRIX_DEPTH),
        });
    }
    let m = as_matrix(kind, depth)?;
    Ok(m.singular_values().first().copied().unwrap_or(0.0))
}

/// Settings of the ascent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Relative improvement below which a power step counts as stalled.
    pub tolerance: f64,
    /// Smallest gradient step tried before declaring convergence.
    pub min_step: f64,
    /// Search only functions with zero mean and root coefficient when the
    /// operator kills both. Off by default: for `p ≠ 2` those components
    /// still change `‖f‖_p`, and the restricted norm is not `p ↔ p'` symmetric.
    pub project_kernel: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iterations: 2000,
            tolerance: 1e-13,
            min_step: 1e-12,
            project_kernel: false,
        }
    }
}

/// A certified lower bound for `‖Op‖_{p→p}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub kind: ShiftKind,
    pub p: f64,
    pub depth: u32,
    pub value: f64,
    pub witness: HaarExpansion,
    /// Iterations of the winning restart.
    pub iterations: usize,
    pub restarts: usize,
    /// Whether every restart stopped before its iteration cap.
    pub converged: bool,
    /// Final value of each restart, in restart order.
    pub restart_values: Vec<f64>,
    pub config: OptimizerConfig,
    pub seed: u64,
}

impl NormEstimate {
    /// Running maximum over restarts; non-decreasing by construction.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.restart_values
            .iter()
            .map(|v| {
                best = best.max(*v);
                best
            })
            .collect()
    }
}

/// `‖Op w‖_p / ‖w‖_p` from a single forward application on the witness.
pub fn witness_ratio(kind: &ShiftKind, witness: &HaarExpansion, p: f64) -> Result<f64> {
    let slots = witness.to_slots();
    let mut image = vec![0.0; slots.len()];
    kind.apply_slots(&slots, &mut image);
    let f = synthesize_slots(&slots)?;
    let g = synthesize_slots(&image)?;
    Ok(lp_norm(&g, p) / lp_norm(&f, p))
}

/// The operator acting on atom values.
struct SampleOperator<'a> {
    kind: &'a ShiftKind,
    p: f64,
    q: f64,
    project: bool,
}

fn duality_map(v: &[f64], p: f64) -> Vec<f64> {
    v.iter().map(|x| x.signum() * x.abs().powf(p - 1.0)).collect()
}

fn lp(v: &[f64], p: f64) -> f64 {
    lp_norm(v, p)
}

impl SampleOperator<'_> {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let slots = analyze_slots(x).expect("power-of-two length");
        let mut out = vec![0.0; slots.len()];
        self.kind.apply_slots(&slots, &mut out);
        synthesize_slots(&out).expect("power-of-two length")
    }

    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let slots = analyze_slots(y).expect("power-of-two length");
        let mut out = vec![0.0; slots.len()];
        self.kind.apply_transpose_slots(&slots, &mut out);
        synthesize_slots(&out).expect("power-of-two length")
    }

    /// Removes the mean and root components when the operator kills them.
    fn project(&self, x: Vec<f64>) -> Vec<f64> {
        if !self.project || !self.kind.kills_mean_and_root() {
            return x;
        }
        let mut slots = analyze_slots(&x).expect("power-of-two length");
        slots[0] = 0.0;
        if slots.len() > 1 {
            slots[1] = 0.0;
        }
        synthesize_slots(&slots).expect("power-of-two length")
    }

    fn normalize(&self, mut x: Vec<f64>) -> Option<Vec<f64>> {
        let n = lp(&x, self.p);
        if !(n > 0.0) || !n.is_finite() {
            return None;
        }
        x.iter_mut().for_each(|v| *v /= n);
        Some(x)
    }

    fn ratio(&self, x: &[f64]) -> f64 {
        lp(&self.forward(x), self.p) / lp(x, self.p)
    }

    /// Gradient of `log ‖Mx‖_p - log ‖x‖_p`, up to a positive factor.
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let y = self.forward(x);
        let ny = y.iter().map(|v| v.abs().powf(self.p)).sum::<f64>();
        let nx = x.iter().map(|v| v.abs().powf(self.p)).sum::<f64>();
        let a = self.adjoint(&duality_map(&y, self.p));
        let b = duality_map(x, self.p);
        a.iter().zip(&b).map(|(a, b)| a / ny - b / nx).collect()
    }

    /// `x ↦ ψ_{q}(Mᵀ ψ_p(Mx))`, the fixed-point step of the p-norm power method.
    fn power_step(&self, x: &[f64]) -> Vec<f64> {
        let y = self.forward(x);
        duality_map(&self.adjoint(&duality_map(&y, self.p)), self.q)
    }
}

struct Ascent {
    samples: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
}

fn ascend(op: &SampleOperator, start: Vec<f64>, config: &OptimizerConfig) -> Ascent {
    let Some(mut x) = op.normalize(op.project(start)) else {
        return Ascent {
            value: 0.0,
            samples: vec![],
            iterations: 0,
            converged: true,
        };
    };
    let mut value = op.ratio(&x);
    let mut eta = 0.25;
    for iteration in 0..config.max_iterations {
        if let Some(candidate) = op.normalize(op.project(op.power_step(&x))) {
            let v = op.ratio(&candidate);
            if v > value * (1.0 + config.tolerance) {
                x = candidate;
                value = v;
                continue;
            }
        }
        let g = op.gradient(&x);
        let gn = lp(&g, op.p);
        if !(gn > 0.0) {
            return Ascent {
                samples: x,
                value,
                iterations: iteration,
                converged: true,
            };
        }
        let mut improved = false;
        while eta >= config.min_step {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + eta * b / gn).collect();
            if let Some(candidate) = op.normalize(op.project(trial)) {
                let v = op.ratio(&candidate);
                if v > value {
                    x = candidate;
                    value = v;
                    eta = (2.0 * eta).min(1.0);
                    improved = true;
                    break;
                }
            }
            eta *= 0.5;
        }
        if !improved {
            return Ascent {
                samples: x,
                value,
                iterations: iteration,
                converged: true,
            };
        }
    }
    Ascent {
        samples: x,
        value,
        iterations: config.max_iterations,
        converged: false,
    }
}

/// Lower bound for `‖Op‖_{p→p}` on the depth-`depth` space.
pub fn norm_lp_lower_bound(
    kind: &ShiftKind,
    p: f64,
    depth: u32,
    config: &OptimizerConfig,
    seed: u64,
) -> Result<NormEstimate> {
    norm_lp_lower_bound_from(kind, p, depth, config, seed, None)
}

/// As [`norm_lp_lower_bound`], with an extra restart started at `warm`
/// (padded to the search depth), so the result is at least its ratio.
pub fn norm_lp_lower_bound_from(
    kind: &ShiftKind,
    p: f64,
    depth: u32,
    config: &OptimizerConfig,
    seed: u64,
    warm: Option<&HaarExpansion>,
) -> Result<NormEstimate> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::ExponentOutOfRange(p));
    }
    let space = kind.space_depth(depth);
    if space > MAX_SEARCH_DEPTH {
        return Err(Error::DepthTooLarge {
            depth: space,
            max: MAX_SEARCH_DEPTH,
        });
    }
    if config.restarts == 0 && warm.is_none() {
        return Err(Error::InvalidArgument("at least one restart is needed".into()));
    }
    let n = 1usize << space;
    let op = SampleOperator {
        kind,
        p,
        q: p / (p - 1.0),
        project: config.project_kernel,
    };
    let warm_start = match warm {
        Some(w) => {
            if w.depth() > space {
                return Err(Error::InvalidArgument(format!(
                    "warm start of depth {} exceeds search depth {space}",
                    w.depth()
                )));
            }
            Some(synthesize_slots(&w.with_depth(space)?.to_slots())?)
        }
        None => None,
    };
    let mut starts: Vec<Option<Vec<f64>>> = Vec::new();
    if let Some(w) = warm_start {
        starts.push(Some(w));
    }
    starts.extend((0..config.restarts).map(|_| None));
    let results: Vec<Ascent> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, start)| {
            let x = start.unwrap_or_else(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
            });
            ascend(&op, x, config)
        })
        .collect();
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.value > results[best].value {
            best = i;
        }
    }
    let winner = &results[best];
    let witness = if winner.samples.is_empty() {
        HaarExpansion::zero(space)
    } else {
        HaarExpansion::from_slots(&analyze_slots(&winner.samples)?)?
    };
    let value = if winner.samples.is_empty() {
        0.0
    } else {
        witness_ratio(kind, &witness, p)?
    };
    Ok(NormEstimate {
        kind: kind.clone(),
        p,
        depth,
        value,
        witness,
        iterations: winner.iterations,
        restarts: results.len(),
        converged: results.iter().all(|r| r.converged),
        restart_values: results.iter().map(|r| r.value).collect(),
        config: *config,
        seed,
    })
}

/// `ψ_p(Op w)` with `ψ_p(v) = sign(v)|v|^{p-1}`: a witness for `‖Opᵀ‖_{p'}`
/// whose ratio is at least that of `w` for `‖Op‖_p`.
pub fn dual_witness(kind: &ShiftKind, witness: &HaarExpansion, p: f64) -> Result<HaarExpansion> {
    let slots = witness.to_slots();
    let mut image = vec![0.0; slots.len()];
    kind.apply_slots(&slots, &mut image);
    let y = synthesize_slots(&image)?;
    HaarExpansion::from_slots(&analyze_slots(&duality_map(&y, p))?)
}

/// Lower bounds at `p` and its conjugate `p'` for an antisymmetric operator.
///
/// Each search gets one extra restart at the dual of the other's witness,
/// so both end at least at the larger of the two independent searches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub p: f64,
    pub q: f64,
    pub depth: u32,
    pub lb_p: f64,
    pub lb_q: f64,
    /// `|lb_p - lb_q| / max(lb_p, lb_q)`.
    pub relative_gap: f64,
}

pub fn duality_check(kind: &ShiftKind, p: f64, depth: u32, config: &OptimizerConfig, seed: u64) -> Result<DualityReport> {
    let q = p / (p - 1.0);
    let first_p = norm_lp_lower_bound(kind, p, depth, config, seed)?;
    let first_q = norm_lp_lower_bound(kind, q, depth, config, seed)?;
    let warm_only = OptimizerConfig {
        restarts: 0,
        ..*config
    };
    let cross_q = norm_lp_lower_bound_from(kind, q, depth, &warm_only, seed, Some(&dual_witness(kind, &first_p.witness, p)?))?;
    let cross_p = norm_lp_lower_bound_from(kind, p, depth, &warm_only, seed, Some(&dual_witness(kind, &first_q.witness, q)?))?;
    let lb_p = first_p.value.max(cross_p.value);
    let lb_q = first_q.value.max(cross_q.value);
    Ok(DualityReport {
        p,
        q,
        depth,
        lb_p,
        lb_q,
        relative_gap: (lb_p - lb_q).abs() / lb_p.max(lb_q),
    })
}

/// One row of the norm sandwich `h_p ≤ s_p ≤ c₀⁻¹ h_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub p: f64,
    pub depth: u32,
    pub h_p: f64,
    pub lb_s_p: f64,
    pub ceiling: f64,
    /// `h_p - lb`, reported only.
    pub gap: f64,
    pub restarts: usize,
    pub iterations: usize,
    /// `lb ≤ ceiling + 1e-9`.
    pub consistent: bool,
}

pub fn sandwich_report(p: f64, depth: u32, config: &OptimizerConfig, seed: u64) -> Result<SandwichRow> {
    let h_p = hp_constant(p)?;
    let ceiling = h_p / c0_constant();
    let lb = norm_lp_lower_bound(&ShiftKind::S0Interval, p, depth, config, seed)?;
    Ok(SandwichRow {
        p,
        depth,
        h_p,
        lb_s_p: lb.value,
        ceiling,
        gap: h_p - lb.value,
        restarts: lb.restarts,
        iterations: lb.iterations,
        consistent: lb.value <= ceiling + 1e-9,
    })
}

pub fn sandwich_to_csv(rows: &[SandwichRow]) -> String {
    let mut out = String::from("p,depth,h_p,lb_s_p,ceiling,gap,restarts,iterations\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.10},{:.10},{:.10},{:.10},{},{}\n",
            r.p, r.depth, r.h_p, r.lb_s_p, r.ceiling, r.gap, r.restarts, r.iterations
        ));
    }
    out
}
