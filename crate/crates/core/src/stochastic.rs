//! Martingales driven by the memory walk and Monte-Carlo estimates of their
//! `L^p` norms.
//!
//! For boundary data `f` with harmonic extension `u = Re F` and conjugate
//! `v = Im F`,
//!
//! ```text
//! M^f_k = f(0,0) + Σ_{l≤k} ∇u(B_{l-1}) · dB_l
//! M^g_k =          Σ_{l≤k} ∇u(B_{l-1}) · dB_l^⊤,    (a, b)^⊤ = (b, -a)
//! ```
//!
//! and `M^g` equals the martingale of `v`, `Σ ∇v(B_{l-1}) · dB_l`, by the
//! Cauchy–Riemann equations. Both are stopped with the walk.
//!
//! Reductions are deterministic: paths are grouped in fixed chunks of
//! [`CHUNK`] consecutive indices, each chunk is reduced sequentially and the
//! chunk summaries are merged in index order. Results are therefore
//! identical for every worker count.

use std::f64::consts::TAU;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{AnalyticCompletion, FourierSeries};
use crate::walk::{block_displacement, SimConfig, TossStream, WalkPath};

/// Paths per reduction chunk.
pub const CHUNK: u64 = 1024;

/// The two martingales along one stored path, indexed by fine time.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingalePair {
    pub seed: u64,
    pub path_index: u64,
    pub config: SimConfig,
    pub mf: Vec<f64>,
    pub mg: Vec<f64>,
    /// `Σ ∇v(B_{l-1}) · dB_l`, the same martingale through the conjugate gradient.
    pub mg_conjugate: Vec<f64>,
}

impl MartingalePair {
    /// `max_k |M^g_k - Σ ∇v·dB|`.
    pub fn identity_defect(&self) -> f64 {
        self.mg
            .iter()
            .zip(&self.mg_conjugate)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }
}

fn completion_of(f: &FourierSeries) -> Result<AnalyticCompletion> {
    if !f.is_real(1e-12) {
        return Err(Error::InvalidArgument(
            "boundary data must be real: c(-n) = conj(c(n))".into(),
        ));
    }
    Ok(AnalyticCompletion::new(f))
}

/// Runs both martingales along a stored path.
pub fn run_pair(f: &FourierSeries, path: &WalkPath, config: &SimConfig) -> Result<MartingalePair> {
    let completion = completion_of(f)?;
    let s = config.step();
    let f0 = completion.taylor()[0].re;
    let len = path.positions.len();
    let mut mf = Vec::with_capacity(len);
    let mut mg = Vec::with_capacity(len);
    let mut mg_conjugate = Vec::with_capacity(len);
    mf.push(f0);
    mg.push(0.0);
    mg_conjugate.push(0.0);
    for w in path.positions.windows(2) {
        let (x0, y0) = w[0];
        let db1 = (w[1].0 - x0) as f64 * s;
        let db2 = (w[1].1 - y0) as f64 * s;
        let (mut a, mut b, mut c) = (*mf.last().unwrap(), *mg.last().unwrap(), *mg_conjugate.last().unwrap());
        if db1 != 0.0 || db2 != 0.0 {
            let (x, y) = (x0 as f64 * s, y0 as f64 * s);
            if x * x + y * y >= 1.0 {
                return Err(Error::OutsideDisc { x, y });
            }
            let p = completion.point(x, y);
            let (ux, uy) = p.gradient;
            a += ux * db1 + uy * db2;
            b += ux * db2 - uy * db1;
            c += p.conjugate_gradient.0 * db1 + p.conjugate_gradient.1 * db2;
        }
        mf.push(a);
        mg.push(b);
        mg_conjugate.push(c);
    }
    Ok(MartingalePair {
        seed: path.seed,
        path_index: path.path_index,
        config: *config,
        mf,
        mg,
        mg_conjugate,
    })
}

/// Final values of one path, computed without storing it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub mf: f64,
    pub mg: f64,
    pub stopped: bool,
    /// Whether the stopped position left the closed unit disc.
    pub overshoot: bool,
    pub identity_defect: f64,
    pub end: (i64, i64),
}

/// Boundary data prepared for simulation.
#[derive(Debug, Clone)]
pub struct PathModel {
    completion: AnalyticCompletion,
    f0: f64,
    /// Constant `F'` when `F` is affine.
    affine: Option<Complex64>,
}

impl PathModel {
    pub fn new(f: &FourierSeries) -> Result<Self> {
        let completion = completion_of(f)?;
        let f0 = completion.taylor()[0].re;
        let affine = (completion.degree() <= 1).then(|| completion.derivative(Complex64::new(0.0, 0.0)));
        Ok(Self {
            completion,
            f0,
            affine,
        })
    }

    pub fn is_affine(&self) -> bool {
        self.affine.is_some()
    }

    /// Simulates path `index` of the ensemble keyed by `seed`.
    ///
    /// Affine data (bandwidth ≤ 1) has a constant gradient, so only the
    /// endpoint matters and each coarse block is summed with popcounts.
    /// Other data steps through the fine tosses and evaluates `F'` before
    /// each step. Both read the same bits in the same order. Under a
    /// relaxed config a path that leaves the disc before its stop check
    /// keeps using the polynomial `F` and is counted as an overshoot.
    pub fn simulate(&self, config: &SimConfig, seed: u64, index: u64) -> Result<PathOutcome> {
        match self.affine {
            Some(d) => Ok(self.simulate_affine(config, seed, index, d)),
            None => self.simulate_general(config, seed, index),
        }
    }

    fn simulate_affine(&self, config: &SimConfig, seed: u64, index: u64, d: Complex64) -> PathOutcome {
        let (x, y, stopped) = affine_endpoint(config, seed, index);
        let s = config.step();
        let (bx, by) = (x as f64 * s, y as f64 * s);
        let (ux, uy) = (d.re, -d.im);
        let mg = ux * by - uy * bx;
        let mg_conjugate = d.im * bx + d.re * by;
        PathOutcome {
            mf: self.f0 + ux * bx + uy * by,
            mg,
            stopped,
            overshoot: bx * bx + by * by >= 1.0,
            identity_defect: (mg - mg_conjugate).abs(),
            end: (x, y),
        }
    }

    fn simulate_general(&self, config: &SimConfig, seed: u64, index: u64) -> Result<PathOutcome> {
        let n = config.n();
        let s = config.step();
        let mut stream = TossStream::new(seed, index);
        let mut prior = stream.next_bits(1);
        let (mut x, mut y) = (0i64, 0i64);
        let (mut mf, mut mg, mut mg_conjugate) = (self.f0, 0.0, 0.0);
        let r2 = config.stop_radius_sq_lattice();
        let strict = config.is_strict();
        let mut stopped = false;
        for _ in 0..config.coarse_steps() {
            let block = stream.next_bits(n);
            for i in 0..n {
                let (px, py) = (x as f64 * s, y as f64 * s);
                // Relaxed configs may leave the disc inside a block; F is a
                // polynomial there, as on the affine path.
                if strict && px * px + py * py >= 1.0 {
                    return Err(Error::OutsideDisc { x: px, y: py });
                }
                let d = self.completion.derivative(Complex64::new(px, py));
                let (ux, uy) = (d.re, -d.im);
                let bit = (block >> i) & 1;
                let step = if bit == 1 { s } else { -s };
                if prior == 1 {
                    mf += ux * step;
                    mg -= uy * step;
                    mg_conjugate += d.im * step;
                    x += if bit == 1 { 1 } else { -1 };
                } else {
                    mf += uy * step;
                    mg += ux * step;
                    mg_conjugate += d.re * step;
                    y += if bit == 1 { 1 } else { -1 };
                }
                prior = bit;
            }
            if ((x * x + y * y) as f64) >= r2 {
                stopped = true;
                break;
            }
        }
        let (bx, by) = (x as f64 * s, y as f64 * s);
        Ok(PathOutcome {
            mf,
            mg,
            stopped,
            overshoot: bx * bx + by * by >= 1.0,
            identity_defect: (mg - mg_conjugate).abs(),
            end: (x, y),
        })
    }
}

/// Running mean, variance and covariance of two streams (Welford), mergeable
/// with Chan's update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairMoments {
    pub count: u64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub m2_a: f64,
    pub m2_b: f64,
    pub c_ab: f64,
}

impl PairMoments {
    pub fn push(&mut self, a: f64, b: f64) {
        self.count += 1;
        let n = self.count as f64;
        let da = a - self.mean_a;
        let db = b - self.mean_b;
        self.mean_a += da / n;
        self.mean_b += db / n;
        self.m2_a += da * (a - self.mean_a);
        self.m2_b += db * (b - self.mean_b);
        self.c_ab += da * (b - self.mean_b);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let da = other.mean_a - self.mean_a;
        let db = other.mean_b - self.mean_b;
        self.mean_a += da * nb / n;
        self.mean_b += db * nb / n;
        self.m2_a += other.m2_a + da * da * na * nb / n;
        self.m2_b += other.m2_b + db * db * na * nb / n;
        self.c_ab += other.c_ab + da * db * na * nb / n;
        self.count += other.count;
    }

    /// Sample variances and covariance, `(var_a, var_b, cov)`.
    pub fn variances(&self) -> (f64, f64, f64) {
        if self.count < 2 {
            return (0.0, 0.0, 0.0);
        }
        let d = (self.count - 1) as f64;
        (self.m2_a / d, self.m2_b / d, self.c_ab / d)
    }
}

/// Lattice endpoint and stop flag of one path, reading whole 64-bit words
/// whenever no coarse check inside the word can fire.
#[inline(always)]
fn affine_endpoint_impl(config: &SimConfig, seed: u64, index: u64) -> (i64, i64, bool) {
    let n = config.n();
    let r2 = config.stop_radius_sq_lattice();
    // Within this squared radius no point 64 fine steps away can stop.
    let safe = (r2.sqrt() - 64.0).max(0.0).powi(2);
    let total = config.fine_steps();
    let mut stream = TossStream::new(seed, index);
    let mut prior = stream.next_bits(1);
    let (mut x, mut y) = (0i64, 0i64);
    let mut done = 0u64;
    // Fine steps taken within the current coarse block.
    let mut phase = 0u32;
    while done < total {
        let count = if ((x * x + y * y) as f64) < safe && total - done >= 64 {
            64
        } else {
            n - phase
        };
        let bits = stream.next_bits(count);
        let (dx, dy, last) = block_displacement(bits, prior, count);
        x += dx;
        y += dy;
        prior = last;
        done += count as u64;
        phase += count;
        while phase >= n {
            phase -= n;
        }
        if phase == 0 && ((x * x + y * y) as f64) >= r2 {
            return (x, y, true);
        }
    }
    (x, y, false)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "popcnt")]
unsafe fn affine_endpoint_popcnt(config: &SimConfig, seed: u64, index: u64) -> (i64, i64, bool) {
    affine_endpoint_impl(config, seed, index)
}

fn affine_endpoint(config: &SimConfig, seed: u64, index: u64) -> (i64, i64, bool) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("popcnt") {
        // SAFETY: the feature was detected at runtime.
        return unsafe { affine_endpoint_popcnt(config, seed, index) };
    }
    affine_endpoint_impl(config, seed, index)
}

/// Summary of a block of simulated paths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    /// Moments of `|M^f_T|^p` (a) and `|M^g_T|^p` (b).
    pub powers: PairMoments,
    pub unstopped: u64,
    pub overshoot: u64,
    pub max_identity_defect: f64,
}

impl EnsembleSummary {
    fn merge(&mut self, other: &Self) {
        self.powers.merge(&other.powers);
        self.unstopped += other.unstopped;
        self.overshoot += other.overshoot;
        self.max_identity_defect = self.max_identity_defect.max(other.max_identity_defect);
    }
}

/// How many paths to simulate, under which seed, on how many workers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McRun {
    pub paths: u64,
    pub seed: u64,
    /// `None` uses the global pool.
    pub workers: Option<usize>,
}

impl McRun {
    pub fn new(paths: u64, seed: u64) -> Self {
        Self {
            paths,
            seed,
            workers: None,
        }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        Self {
            workers: Some(workers),
            ..self
        }
    }
}

/// Runs `job` on a pool of the requested size, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Simulates an ensemble and reduces it deterministically.
pub fn simulate_ensemble(f: &FourierSeries, p: f64, config: &SimConfig, run: &McRun) -> Result<EnsembleSummary> {
    if !(p >= 1.0) {
        return Err(Error::ExponentOutOfRange(p));
    }
    let model = PathModel::new(f)?;
    let chunks = run.paths.div_ceil(CHUNK);
    let summaries: Vec<Result<EnsembleSummary>> = with_workers(run.workers, || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut summary = EnsembleSummary::default();
                let end = ((c + 1) * CHUNK).min(run.paths);
                for index in c * CHUNK..end {
                    let o = model.simulate(config, run.seed, index)?;
                    summary.powers.push(o.mf.abs().powf(p), o.mg.abs().powf(p));
                    summary.unstopped += u64::from(!o.stopped);
                    summary.overshoot += u64::from(o.overshoot);
                    summary.max_identity_defect = summary.max_identity_defect.max(o.identity_defect);
                }
                Ok(summary)
            })
            .collect()
    })?;
    let mut total = EnsembleSummary::default();
    for s in summaries {
        total.merge(&s?);
    }
    Ok(total)
}

/// `(E|M_T|^p)^{1/p}` with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub p: f64,
    pub value: f64,
    pub paths: u64,
    pub standard_error: f64,
    pub config: SimConfig,
    pub mean_power: f64,
    pub variance_power: f64,
    pub unstopped_fraction: f64,
}

fn delta_factor(mean: f64, p: f64) -> f64 {
    if mean > 0.0 {
        mean.powf(1.0 / p - 1.0) / p
    } else {
        0.0
    }
}

fn estimate(mean: f64, var: f64, p: f64, paths: u64, config: &SimConfig, unstopped: f64) -> MCEstimate {
    MCEstimate {
        p,
        value: mean.powf(1.0 / p),
        paths,
        standard_error: delta_factor(mean, p) * (var / paths as f64).sqrt(),
        config: *config,
        mean_power: mean,
        variance_power: var,
        unstopped_fraction: unstopped,
    }
}

/// Estimates for both martingales of one ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub f: MCEstimate,
    pub g: MCEstimate,
    pub summary: EnsembleSummary,
    pub overshoot_fraction: f64,
}

impl PairEstimate {
    /// Standard error of `‖M^g‖_p - s ‖M^f‖_p`, including the covariance.
    pub fn difference_standard_error(&self, s: f64) -> f64 {
        let (var_f, var_g, cov) = self.summary.powers.variances();
        let af = delta_factor(self.f.mean_power, self.f.p);
        let ag = delta_factor(self.g.mean_power, self.g.p);
        let var = ag * ag * var_g + s * s * af * af * var_f - 2.0 * s * ag * af * cov;
        (var.max(0.0) / self.f.paths as f64).sqrt()
    }
}

pub fn mc_pair_norms(f: &FourierSeries, p: f64, config: &SimConfig, run: &McRun) -> Result<PairEstimate> {
    if run.paths < 2 {
        return Err(Error::InvalidArgument("need at least two paths".into()));
    }
    let summary = simulate_ensemble(f, p, config, run)?;
    let (var_f, var_g, _) = summary.powers.variances();
    let unstopped = summary.unstopped as f64 / run.paths as f64;
    Ok(PairEstimate {
        f: estimate(summary.powers.mean_a, var_f, p, run.paths, config, unstopped),
        g: estimate(summary.powers.mean_b, var_g, p, run.paths, config, unstopped),
        overshoot_fraction: summary.overshoot as f64 / run.paths as f64,
        summary,
    })
}

/// `(E|M^f_T|^p)^{1/p}` over seeded paths.
pub fn mc_lp_norm(f: &FourierSeries, p: f64, config: &SimConfig, run: &McRun) -> Result<MCEstimate> {
    Ok(mc_pair_norms(f, p, config, run)?.f)
}

/// `((1/2π) ∫ |f|^p)^{1/p}`, the norm of `f` at the exit point of Brownian motion.
pub fn reference_boundary_norm(f: &FourierSeries, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::ExponentOutOfRange(p));
    }
    let m = (64 * f.bandwidth() as usize).max(4096);
    let sum: f64 = (0..m)
        .map(|j| f.eval((j as f64 + 0.5) * TAU / m as f64).abs().powf(p))
        .sum();
    Ok((sum / m as f64).powf(1.0 / p))
}

/// One line of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: u32,
    pub t: f64,
    pub paths: u64,
    pub estimate: f64,
    pub reference: f64,
    pub bias: f64,
    pub stderr: f64,
    pub unstopped_fraction: f64,
    pub overshoot_fraction: f64,
    pub max_identity_defect: f64,
    pub step_condition: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub p: f64,
    pub seed: u64,
    pub rows: Vec<StudyRow>,
}

impl StudyTable {
    /// Whether each bias is at most the previous one plus three combined standard errors.
    pub fn bias_non_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| {
            let slack = 3.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
            w[1].bias <= w[0].bias + slack
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "N,T,paths,estimate,reference,bias,stderr,unstopped_fraction,overshoot_fraction,max_identity_defect,step_condition\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.10},{:.10},{:.10},{:.10},{},{},{:e},{}\n",
                r.n,
                r.t,
                r.paths,
                r.estimate,
                r.reference,
                r.bias,
                r.stderr,
                r.unstopped_fraction,
                r.overshoot_fraction,
                r.max_identity_defect,
                r.step_condition
            ));
        }
        out
    }
}

/// Bias of the Monte-Carlo norm against the boundary norm along increasing `N`.
///
/// Configs are built with [`SimConfig::relaxed`]; rows record whether the
/// step condition `N ≥ 2T` held.
pub fn convergence_study(
    f: &FourierSeries,
    p: f64,
    n_list: &[u32],
    horizon: f64,
    run: &McRun,
) -> Result<StudyTable> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("N list must be increasing".into()));
    }
    let reference = reference_boundary_norm(f, p)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let config = SimConfig::relaxed(n, horizon)?;
        let e = mc_pair_norms(f, p, &config, run)?;
        rows.push(StudyRow {
            n,
            t: horizon,
            paths: run.paths,
            estimate: e.f.value,
            reference,
            bias: (e.f.value - reference).abs(),
            stderr: e.f.standard_error,
            unstopped_fraction: e.f.unstopped_fraction,
            overshoot_fraction: e.overshoot_fraction,
            max_identity_defect: e.summary.max_identity_defect,
            step_condition: config.step_condition_holds(),
        });
    }
    Ok(StudyTable {
        p,
        seed: run.seed,
        rows,
    })
}

/// `‖M^g‖_p ≤ s ‖M^f‖_p` up to three standard errors of the difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub p: f64,
    pub bound: f64,
    pub norm_g: f64,
    pub norm_f: f64,
    pub rhs: f64,
    pub combined_se: f64,
    pub holds: bool,
}

pub fn shift_norm_inequality_check(
    f: &FourierSeries,
    p: f64,
    config: &SimConfig,
    run: &McRun,
    bound: f64,
) -> Result<InequalityReport> {
    let e = mc_pair_norms(f, p, config, run)?;
    let combined_se = e.difference_standard_error(bound);
    let rhs = bound * e.f.value;
    Ok(InequalityReport {
        p,
        bound,
        norm_g: e.g.value,
        norm_f: e.f.value,
        rhs,
        combined_se,
        holds: e.g.value <= rhs + 3.0 * combined_se,
    })
}

/// Statistics of coarse increments, bucketed by the toss before each block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IncrementStats {
    /// Index 0 for prior `-1`, 1 for prior `+1`; streams are `(dX¹, dX²)`.
    pub displacement: [PairMoments; 2],
    /// Streams are `(dM^f, dM^g)`.
    pub martingale: [PairMoments; 2],
    /// Streams are `(dM^f dM^g, dX¹ dX²)`.
    pub products: PairMoments,
}

impl IncrementStats {
    fn merge(&mut self, other: &Self) {
        for i in 0..2 {
            self.displacement[i].merge(&other.displacement[i]);
            self.martingale[i].merge(&other.martingale[i]);
        }
        self.products.merge(&other.products);
    }
}

/// `|mean| / standard error` of stream `a` (or `b`) of a moment accumulator.
pub fn z_scores(m: &PairMoments) -> (f64, f64) {
    let (va, vb, _) = m.variances();
    let n = m.count as f64;
    let z = |mean: f64, var: f64| if var > 0.0 { mean.abs() / (var / n).sqrt() } else { 0.0 };
    (z(m.mean_a, va), z(m.mean_b, vb))
}

/// Records the first `blocks` coarse increments of every path (before stopping).
pub fn increment_statistics(
    f: &FourierSeries,
    config: &SimConfig,
    run: &McRun,
    blocks: u64,
) -> Result<IncrementStats> {
    let completion = completion_of(f)?;
    let n = config.n();
    let s = config.step();
    let chunks = run.paths.div_ceil(CHUNK);
    let parts: Vec<IncrementStats> = with_workers(run.workers, || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut stats = IncrementStats::default();
                let end = ((c + 1) * CHUNK).min(run.paths);
                for index in c * CHUNK..end {
                    let mut stream = TossStream::new(run.seed, index);
                    let mut prior = stream.next_bits(1);
                    let (mut x, mut y) = (0i64, 0i64);
                    for _ in 0..blocks.min(config.coarse_steps()) {
                        let bucket = prior as usize;
                        let (x0, y0) = (x, y);
                        let (mut dmf, mut dmg) = (0.0, 0.0);
                        let block = stream.next_bits(n);
                        for i in 0..n {
                            let d = completion.derivative(Complex64::new(x as f64 * s, y as f64 * s));
                            let bit = (block >> i) & 1;
                            let step = if bit == 1 { s } else { -s };
                            if prior == 1 {
                                dmf += d.re * step;
                                dmg += d.im * step;
                                x += if bit == 1 { 1 } else { -1 };
                            } else {
                                dmf -= d.im * step;
                                dmg += d.re * step;
                                y += if bit == 1 { 1 } else { -1 };
                            }
                            prior = bit;
                        }
                        let dx = (x - x0) as f64 * s;
                        let dy = (y - y0) as f64 * s;
                        stats.displacement[bucket].push(dx, dy);
                        stats.martingale[bucket].push(dmf, dmg);
                        stats.products.push(dmf * dmg, dx * dy);
                        if config.outside_stop_radius(x, y) {
                            break;
                        }
                    }
                }
                stats
            })
            .collect()
    })?;
    let mut total = IncrementStats::default();
    for part in &parts {
        total.merge(part);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cos() -> FourierSeries {
        FourierSeries::cosine(1, 1.0)
    }

    #[test]
    fn constant_data() {
        let c = SimConfig::new(4, 1.0).unwrap();
        let path = WalkPath::generate(&c, 1, 0);
        let pair = run_pair(&FourierSeries::constant(2.0), &path, &c).unwrap();
        assert!(pair.mf.iter().all(|v| *v == 2.0));
        assert!(pair.mg.iter().all(|v| *v == 0.0));
        let e = mc_lp_norm(&FourierSeries::constant(-2.0), 3.0, &c, &McRun::new(200, 5)).unwrap();
        assert_eq!(e.value, 2.0);
        assert_eq!(e.standard_error, 0.0);
    }

    #[test]
    fn linear_data_tracks_position() {
        let c = SimConfig::new(6, 2.0).unwrap();
        let f = cos();
        for r in 0..5 {
            let path = WalkPath::generate(&c, 3, r);
            let pair = run_pair(&f, &path, &c).unwrap();
            for (l, _) in path.positions.iter().enumerate() {
                let (x, y) = path.position(&c, l);
                assert_abs_diff_eq!(pair.mf[l], x, epsilon = 1e-12);
                assert_abs_diff_eq!(pair.mg[l], y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gradients_are_taken_before_the_step() {
        // For u = Re z² = x² - y², ∇u(B_{l-1})·dB_l differs from the
        // post-step evaluation by 2|dB|² on every step.
        let f = FourierSeries::cosine(2, 1.0);
        let c = SimConfig::new(4, 1.0).unwrap();
        let path = WalkPath::generate(&c, 8, 0);
        let pair = run_pair(&f, &path, &c).unwrap();
        for l in 1..path.positions.len() {
            let (x0, y0) = path.position(&c, l - 1);
            let (x1, y1) = path.position(&c, l);
            let (dx, dy) = (x1 - x0, y1 - y0);
            let expected = 2.0 * x0 * dx - 2.0 * y0 * dy;
            assert_abs_diff_eq!(pair.mf[l] - pair.mf[l - 1], expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn identity_on_stored_paths() {
        let f = FourierSeries::from_trig(0.3, &[1.0, 0.0, 0.5], &[0.0, -0.4]);
        let c = SimConfig::new(4, 1.0).unwrap();
        for r in 0..1000 {
            let path = WalkPath::generate(&c, 17, r);
            let pair = run_pair(&f, &path, &c).unwrap();
            assert!(pair.identity_defect() <= 1e-12);
            if let Some(n) = path.stop_index {
                let k = n as usize * 4;
                assert!(pair.mf[k..].iter().all(|v| *v == pair.mf[k]));
                assert!(pair.mg[k..].iter().all(|v| *v == pair.mg[k]));
            }
        }
    }

    #[test]
    fn streaming_matches_stored_paths() {
        let c = SimConfig::new(6, 3.0).unwrap();
        for f in [cos(), FourierSeries::from_trig(0.1, &[1.0, 0.0, 0.5], &[0.2])] {
            let model = PathModel::new(&f).unwrap();
            for r in 0..30 {
                let path = WalkPath::generate(&c, 21, r);
                let pair = run_pair(&f, &path, &c).unwrap();
                let o = model.simulate(&c, 21, r).unwrap();
                assert_eq!(o.end, *path.positions.last().unwrap());
                assert_eq!(o.stopped, path.stop_index.is_some());
                assert_abs_diff_eq!(o.mf, *pair.mf.last().unwrap(), epsilon = 1e-12);
                assert_abs_diff_eq!(o.mg, *pair.mg.last().unwrap(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn affine_and_general_paths_agree() {
        let c = SimConfig::new(8, 4.0).unwrap();
        let f = FourierSeries::from_trig(0.5, &[1.0], &[-0.3]);
        let fast = PathModel::new(&f).unwrap();
        assert!(fast.is_affine());
        for r in 0..50 {
            let a = fast.simulate(&c, 2, r).unwrap();
            let b = fast.simulate_general(&c, 2, r).unwrap();
            assert_eq!(a.end, b.end);
            assert_eq!(a.stopped, b.stopped);
            assert_abs_diff_eq!(a.mf, b.mf, epsilon = 1e-12);
            assert_abs_diff_eq!(a.mg, b.mg, epsilon = 1e-12);
        }
    }

    #[test]
    fn welford_merge_matches_single_pass() {
        let values: Vec<(f64, f64)> = (0..1000).map(|i| ((i as f64).sin(), (i as f64 * 0.7).cos())).collect();
        let mut whole = PairMoments::default();
        values.iter().for_each(|(a, b)| whole.push(*a, *b));
        let mut merged = PairMoments::default();
        for chunk in values.chunks(137) {
            let mut part = PairMoments::default();
            chunk.iter().for_each(|(a, b)| part.push(*a, *b));
            merged.merge(&part);
        }
        assert_abs_diff_eq!(whole.mean_a, merged.mean_a, epsilon = 1e-14);
        let (va, vb, c) = whole.variances();
        let (wa, wb, d) = merged.variances();
        assert_abs_diff_eq!(va, wa, epsilon = 1e-12);
        assert_abs_diff_eq!(vb, wb, epsilon = 1e-12);
        assert_abs_diff_eq!(c, d, epsilon = 1e-12);
    }

    #[test]
    fn reference_norms() {
        assert_abs_diff_eq!(reference_boundary_norm(&FourierSeries::constant(1.0), 3.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(reference_boundary_norm(&cos(), 2.0).unwrap(), 0.5f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(reference_boundary_norm(&cos(), 4.0).unwrap(), 0.375f64.powf(0.25), epsilon = 1e-14);
        assert_abs_diff_eq!(reference_boundary_norm(&cos(), 4.0).unwrap(), 0.78254, epsilon = 1e-5);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let c = SimConfig::new(6, 3.0).unwrap();
        let f = FourierSeries::from_trig(0.0, &[1.0, 0.3], &[]);
        let a = mc_pair_norms(&f, 2.0, &c, &McRun::new(3000, 4).with_workers(1)).unwrap();
        let b = mc_pair_norms(&f, 2.0, &c, &McRun::new(3000, 4).with_workers(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn difference_error_accounts_for_correlation() {
        let c = SimConfig::new(8, 4.0).unwrap();
        let e = mc_pair_norms(&cos(), 2.0, &c, &McRun::new(2000, 1)).unwrap();
        let (_, _, cov) = e.summary.powers.variances();
        // |B¹|² and |B²|² share the exit radius, so they are anticorrelated.
        assert!(cov < 0.0);
        let naive = (e.f.standard_error.powi(2) + e.g.standard_error.powi(2)).sqrt();
        assert!(e.difference_standard_error(1.0) > naive);
    }
}
