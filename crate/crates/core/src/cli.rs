//! Command-line experiments.
//!
//! Each command runs one module operation, renders CSV or JSON with the full
//! config and the crate version embedded, and judges the result against its
//! tolerance. Output carries no timestamps, so identical flags give identical
//! bytes.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::averaging::{average_report, average_rows_to_csv, average_translations_exact};
use crate::dyadic::{analyze, synthesize_samples, DyadicInterval, HaarExpansion, Sign};
use crate::error::{Error, Result};
use crate::hilbert::{hp_constant, FourierSeries};
use crate::lowerbound::{
    build_modulation_with_factor, c0_constant, c0_via_quadrature, catalan_constant, projection_lemma_check,
    verify_sign_domination, QuantityReport,
};
use crate::normlab::{duality_check, norm_p2_exact, sandwich_report, sandwich_to_csv, OptimizerConfig};
use crate::operators::{apply_s0, as_matrix, ShiftKind, MAX_MATRIX_DEPTH};
use crate::stochastic::{convergence_study, shift_norm_inequality_check, with_workers, McRun};
use crate::walk::{conditional_moments_exact, s0_rotation_check, SimConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "shiftlab", version, about = "Dyadic shift and Hilbert transform experiments")]
pub struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Write the table here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Thread cap; results do not depend on it.
    #[arg(long, global = true, env = "SHIFTLAB_WORKERS")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Haar analysis/synthesis roundtrip and Parseval check.
    Haar(HaarArgs),
    /// Exact algebra of S₀: antiinvolution, antisymmetry, singular values, rotation of increments.
    ShiftCheck(ShiftCheckArgs),
    /// Exhaustive conditional moments of one coarse walk step.
    WalkMoments(WalkMomentsArgs),
    /// Monte-Carlo norms of the martingales driven by the memory walk.
    McConvergence(McArgs),
    /// The constant c₀ by series and by quadrature.
    C0(C0Args),
    /// Four-arc projection of the Hilbert transform of the square waves.
    ProjectionLemma(ResolutionArgs),
    /// Exhaustive sign domination of modulation ladders.
    ModulationCheck(ModulationArgs),
    /// Translation and dilation averages of the shift kernel.
    AverageKernel(AverageArgs),
    /// Lower bounds for the L^p norm of S₀ against the Hilbert-transform sandwich.
    NormSandwich(SandwichArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HaarArgs {
    #[arg(long, default_value_t = 10)]
    pub depth: u32,
    /// Comma or whitespace separated samples; replaces the random input.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ShiftCheckArgs {
    #[arg(long, default_value_t = 10)]
    pub depth: u32,
    /// Horizon used for the increment expansions.
    #[arg(long = "T", default_value_t = 8.0)]
    pub horizon: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WalkMomentsArgs {
    #[arg(long = "N", value_delimiter = ',', default_values_t = vec![2u32, 4, 8])]
    pub n: Vec<u32>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct McArgs {
    /// `cos`, `sin`, `cos+cos3` (cos θ + ½ cos 3θ), or a path to a series JSON file.
    #[arg(long, default_value = "cos")]
    pub f: String,
    #[arg(long, default_value = "2", value_parser = parse_exponent)]
    pub p: f64,
    #[arg(long = "N", value_delimiter = ',', default_values_t = vec![8u32, 16, 32])]
    pub n: Vec<u32>,
    #[arg(long = "T", default_value_t = 8.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 100_000)]
    pub paths: u64,
    #[arg(long)]
    pub seed: u64,
    /// Check ‖M^g‖_p ≤ s·‖M^f‖_p at the single (strict) N instead of the bias trend.
    #[arg(long)]
    pub inequality: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct C0Args {
    #[arg(long, default_value_t = 65_536)]
    pub resolution: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ResolutionArgs {
    #[arg(long, default_value_t = 65_536)]
    pub resolution: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModulationArgs {
    #[arg(long, default_value_t = 3)]
    pub k_max: usize,
    #[arg(long, default_value_t = 4)]
    pub n_max: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AverageArgs {
    /// Pairs as `t:x`, separated by commas.
    #[arg(
        long,
        value_delimiter = ',',
        value_parser = parse_pair,
        default_values = ["0.2:0.7", "0.1:0.15", "0.3:0.05", "0:1", "0.45:0.55", "0.9:0.2"]
    )]
    pub pairs: Vec<(f64, f64)>,
    /// Quadrature points in the dilation parameter.
    #[arg(long, default_value_t = 4096)]
    pub resolution: usize,
    /// Common offsets applied to both points for the translation check.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.125, 0.37, 1.5])]
    pub offsets: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 1.25, 1.5, 1.75])]
    pub r: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SandwichArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_exponent, default_values = ["4/3", "2", "4"])]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub depth: u32,
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    #[arg(long, default_value_t = 2000)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// Accepts decimals and fractions such as `4/3`.
pub fn parse_exponent(s: &str) -> std::result::Result<f64, String> {
    let value = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|e| format!("{s:?}: {e}"))?,
    };
    if value > 1.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(format!("exponent {s} must be a finite number above 1"))
    }
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("{s:?} is not t:x"))?;
    let t: f64 = a.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
    let x: f64 = b.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
    if t == x {
        return Err(format!("{s:?}: t and x must differ"));
    }
    Ok((t, x))
}

/// Result of one command.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: &'static str,
    pub config: Value,
    pub result: Value,
    pub csv: String,
    pub pass: bool,
    /// Short human summary for the verdict line.
    pub summary: String,
}

impl Outcome {
    pub fn verdict(&self) -> String {
        format!("{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.command, self.summary)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let config = serde_json::to_string(&self.config).expect("config serializes");
                format!("# shiftlab {VERSION} {} {config}\n{}", self.command, self.csv)
            }
            Format::Json => {
                let doc = json!({
                    "tool": "shiftlab",
                    "version": VERSION,
                    "command": self.command,
                    "config": self.config,
                    "pass": self.pass,
                    "summary": self.summary,
                    "result": self.result,
                });
                let mut text = serde_json::to_string_pretty(&doc).expect("result serializes");
                text.push('\n');
                text
            }
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Runs a parsed command line on the requested number of workers.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let command = cli.command.clone();
    with_workers(cli.workers, move || execute(&command))?
}

pub fn execute(command: &Command) -> Result<Outcome> {
    match command {
        Command::Haar(a) => haar(a),
        Command::ShiftCheck(a) => shift_check(a),
        Command::WalkMoments(a) => walk_moments(a),
        Command::McConvergence(a) => mc_convergence(a),
        Command::C0(a) => c0(a),
        Command::ProjectionLemma(a) => projection_lemma(a),
        Command::ModulationCheck(a) => modulation_check(a),
        Command::AverageKernel(a) => average_kernel(a),
        Command::NormSandwich(a) => norm_sandwich(a),
    }
}

fn haar(a: &HaarArgs) -> Result<Outcome> {
    let samples = match &a.input {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            crate::dyadic::samples_from_csv(&text)?
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            (0..1usize << a.depth).map(|_| rng.random_range(-1.0..1.0)).collect()
        }
    };
    let e = analyze(&samples)?;
    let back = synthesize_samples(&e);
    let scale = samples.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let roundtrip_error = samples.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mean_square = samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64;
    let parseval_error = (e.energy() - mean_square).abs();
    let serde_exact = HaarExpansion::from_json(&e.to_json())? == e;
    let pass = roundtrip_error <= 1e-12 * scale && parseval_error <= 1e-12 * scale * scale && serde_exact;

    let mut csv = String::from("slot,level,index,coefficient\n");
    csv.push_str(&format!("0,,,{:e}\n", e.mean()));
    for (interval, v) in e.coeffs() {
        csv.push_str(&format!("{},{},{},{v:e}\n", interval.slot(), interval.level(), interval.index()));
    }
    Ok(Outcome {
        command: "haar",
        config: to_value(a),
        result: json!({
            "depth": e.depth(),
            "samples": samples.len(),
            "roundtrip_error": roundtrip_error,
            "parseval_error": parseval_error,
            "serde_exact": serde_exact,
            "expansion": e.to_record(),
        }),
        csv,
        pass,
        summary: format!("roundtrip {roundtrip_error:e}, parseval {parseval_error:e}"),
    })
}

#[derive(Debug, Serialize)]
struct ShiftRow {
    depth: u32,
    antisymmetry_defect: f64,
    singular_value_defect: f64,
    rank: usize,
    antiinvolution_defect: f64,
    rotation_mismatches: usize,
}

fn shift_check(a: &ShiftCheckArgs) -> Result<Outcome> {
    if a.depth == 0 || a.depth > MAX_MATRIX_DEPTH {
        return Err(Error::DepthTooLarge {
            depth: a.depth,
            max: MAX_MATRIX_DEPTH,
        });
    }
    let config = SimConfig::relaxed(16, a.horizon)?;
    let mut rows = Vec::new();
    for depth in 1..=a.depth {
        let m = as_matrix(&ShiftKind::S0Interval, depth)?;
        let sv = m.singular_values();
        let singular_value_defect = sv.iter().map(|s| s.min((s - 1.0).abs())).fold(0.0, f64::max);
        let rank = sv.iter().filter(|s| **s > 0.5).count();
        // S₀S₀h_I = -h_I on every interval strictly below the root.
        let mut antiinvolution_defect = 0.0f64;
        for level in 1..depth {
            for interval in DyadicInterval::level_iter(level) {
                let h = HaarExpansion::haar(interval, depth)?;
                let twice = apply_s0(&apply_s0(&h));
                let diff = twice.add(&h)?;
                antiinvolution_defect = antiinvolution_defect.max(diff.coeffs().fold(0.0, |m, (_, v)| m.max(v.abs())));
            }
        }
        let rotation = s0_rotation_check(&config, depth - 1)?;
        rows.push(ShiftRow {
            depth,
            antisymmetry_defect: m.antisymmetry_defect(),
            singular_value_defect,
            rank,
            antiinvolution_defect,
            rotation_mismatches: rotation.mismatches,
        });
    }
    let pass = rows.iter().all(|r| {
        r.antisymmetry_defect == 0.0
            && r.singular_value_defect <= 1e-10
            && r.antiinvolution_defect == 0.0
            && r.rotation_mismatches == 0
    });
    let mut csv = String::from("depth,antisymmetry_defect,singular_value_defect,rank,antiinvolution_defect,rotation_mismatches\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{:e},{:e},{},{:e},{}\n",
            r.depth, r.antisymmetry_defect, r.singular_value_defect, r.rank, r.antiinvolution_defect, r.rotation_mismatches
        ));
    }
    let worst_sv = rows.iter().map(|r| r.singular_value_defect).fold(0.0, f64::max);
    Ok(Outcome {
        command: "shift-check",
        config: to_value(a),
        result: to_value(&rows),
        csv,
        pass,
        summary: format!("depths 1..={}, worst singular value defect {worst_sv:e}", a.depth),
    })
}

fn walk_moments(a: &WalkMomentsArgs) -> Result<Outcome> {
    let mut tables = Vec::new();
    for &n in &a.n {
        for prior in [-1i8, 1] {
            tables.push(conditional_moments_exact(n, prior)?);
        }
    }
    let pass = tables
        .iter()
        .all(|t| t.matches_closed_form(1) && t.matches_closed_form(2) && t.sum_s1_s2 == 0);
    let mut csv = String::from(
        "N,prior,paths,sum_s1,sum_s2,sum_s1_sq,sum_s2_sq,sum_s1_s2,second_moment_1_over_delta,second_moment_2_over_delta,closed_form\n",
    );
    for t in &tables {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            t.n,
            t.prior,
            t.paths,
            t.sum_s1,
            t.sum_s2,
            t.sum_s1_sq,
            t.sum_s2_sq,
            t.sum_s1_s2,
            t.second_moment_over_delta(1),
            t.second_moment_over_delta(2),
            t.matches_closed_form(1) && t.matches_closed_form(2)
        ));
    }
    Ok(Outcome {
        command: "walk-moments",
        config: to_value(a),
        result: to_value(&tables),
        csv,
        pass,
        summary: format!("{} tables, exact integer comparison", tables.len()),
    })
}

/// Named test functions, or a series stored as JSON.
pub fn resolve_series(name: &str) -> Result<FourierSeries> {
    match name {
        "cos" => Ok(FourierSeries::cosine(1, 1.0)),
        "sin" => Ok(FourierSeries::sine(1, 1.0)),
        "cos+cos3" => Ok(FourierSeries::from_trig(0.0, &[1.0, 0.0, 0.5], &[])),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidArgument(format!("unknown function {path:?}: {e}")))?;
            FourierSeries::from_json(&text)
        }
    }
}

fn mc_convergence(a: &McArgs) -> Result<Outcome> {
    let f = resolve_series(&a.f)?;
    let run = McRun::new(a.paths, a.seed);
    if a.inequality {
        let &[n] = a.n.as_slice() else {
            return Err(Error::InvalidArgument("--inequality takes a single N".into()));
        };
        let config = SimConfig::new(n, a.horizon)?;
        let bound = if a.p == 2.0 {
            norm_p2_exact(&ShiftKind::S0Interval, 8)?
        } else {
            hp_constant(a.p)? / c0_constant()
        };
        let report = shift_norm_inequality_check(&f, a.p, &config, &run, bound)?;
        let csv = format!(
            "p,N,T,paths,bound,norm_g,norm_f,rhs,combined_se,holds\n{},{},{},{},{:.10},{:.10},{:.10},{:.10},{:.10},{}\n",
            a.p, n, a.horizon, a.paths, report.bound, report.norm_g, report.norm_f, report.rhs, report.combined_se, report.holds
        );
        return Ok(Outcome {
            command: "mc-convergence",
            config: to_value(a),
            result: to_value(&report),
            csv,
            pass: report.holds,
            summary: format!(
                "|M^g|_p = {:.6} vs bound*|M^f|_p + 3SE = {:.6}",
                report.norm_g,
                report.rhs + 3.0 * report.combined_se
            ),
        });
    }
    let table = convergence_study(&f, a.p, &a.n, a.horizon, &run)?;
    let last = table
        .rows
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty N list".into()))?;
    let max_defect = table.rows.iter().map(|r| r.max_identity_defect).fold(0.0, f64::max);
    let relative = last.bias / last.reference;
    let trend = table.bias_non_increasing();
    let pass = trend && relative <= 0.03 && max_defect <= 1e-12;
    Ok(Outcome {
        command: "mc-convergence",
        config: to_value(a),
        result: to_value(&table),
        csv: table.to_csv(),
        pass,
        summary: format!(
            "relative bias {:.4} at N = {}, non-increasing {trend}, identity defect {max_defect:e}",
            relative, last.n
        ),
    })
}

/// Rounded reference values.
pub const C0_REFERENCE: f64 = 0.742454;
pub const C0_INVERSE_REFERENCE: f64 = 1.34689;

fn c0(a: &C0Args) -> Result<Outcome> {
    let series = 8.0 * catalan_constant(1e-15) / (std::f64::consts::PI * std::f64::consts::PI);
    let quadrature = c0_via_quadrature(a.resolution)?;
    let rows = [
        QuantityReport::new("c0_series", series, C0_REFERENCE, 0),
        QuantityReport::new("c0_quadrature", quadrature, C0_REFERENCE, a.resolution),
        QuantityReport::new("c0_inverse", 1.0 / series, C0_INVERSE_REFERENCE, 0),
    ];
    let pass = rows[0].abs_error <= 1e-6 && rows[1].abs_error <= 1e-6 && rows[2].abs_error <= 1e-5;
    let mut csv = String::from("quantity,computed,reference,abs_error,resolution\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{:.12},{},{:e},{}\n",
            r.quantity, r.computed, r.reference, r.abs_error, r.resolution
        ));
    }
    Ok(Outcome {
        command: "c0",
        config: to_value(a),
        result: to_value(&rows),
        csv,
        pass,
        summary: format!("c0 = {series:.6} (series), {quadrature:.6} (quadrature)"),
    })
}

fn projection_lemma(a: &ResolutionArgs) -> Result<Outcome> {
    let reports = [
        projection_lemma_check(Sign::Plus, a.resolution)?,
        projection_lemma_check(Sign::Minus, a.resolution)?,
    ];
    let worst = reports.iter().map(|r| r.max_error).fold(0.0, f64::max);
    let mut csv = String::from("sign,resolution,arc_1,arc_2,arc_3,arc_4,expected_1,expected_2,expected_3,expected_4,max_error\n");
    for r in &reports {
        let arcs: Vec<String> = r.arc_averages.0.iter().map(|v| format!("{v:.10}")).collect();
        let expected: Vec<String> = r.expected.0.iter().map(|v| format!("{v:.10}")).collect();
        csv.push_str(&format!(
            "{},{},{},{},{:e}\n",
            if r.sign == Sign::Plus { "+" } else { "-" },
            r.resolution,
            arcs.join(","),
            expected.join(","),
            r.max_error
        ));
    }
    Ok(Outcome {
        command: "projection-lemma",
        config: to_value(a),
        result: to_value(&reports),
        csv,
        pass: worst <= 1e-4,
        summary: format!("max arc error {worst:e}"),
    })
}

#[derive(Debug, Serialize)]
struct PlanRow {
    spectral_bounds: Vec<u64>,
    factor: u64,
    level: usize,
    holds: bool,
    cases_checked: u64,
    counterexample: Option<(Vec<i64>, i64)>,
}

/// Every vector in `{1..=n_max}^len`, in lexicographic order.
fn bound_vectors(len: usize, n_max: u64) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (1..=n_max).map(move |b| {
                    let mut v = prefix.clone();
                    v.push(b);
                    v
                })
            })
            .collect();
    }
    out
}

fn modulation_check(a: &ModulationArgs) -> Result<Outcome> {
    if a.k_max == 0 || a.n_max == 0 {
        return Err(Error::InvalidArgument("k-max and n-max must be positive".into()));
    }
    let mut rows = Vec::new();
    for k in 1..=a.k_max {
        for bounds in bound_vectors(k + 1, a.n_max) {
            let genuine = build_modulation_with_factor(&bounds, 2)?;
            for level in 1..=k {
                let r = verify_sign_domination(&genuine, level)?;
                rows.push(PlanRow {
                    spectral_bounds: bounds.clone(),
                    factor: 2,
                    level,
                    holds: r.holds,
                    cases_checked: r.cases_checked,
                    counterexample: r.counterexample,
                });
            }
            let boundary = build_modulation_with_factor(&bounds, 1)?;
            let r = verify_sign_domination(&boundary, k)?;
            rows.push(PlanRow {
                spectral_bounds: bounds,
                factor: 1,
                level: k,
                holds: r.holds,
                cases_checked: r.cases_checked,
                counterexample: r.counterexample,
            });
        }
    }
    let genuine_ok = rows.iter().filter(|r| r.factor == 2).all(|r| r.holds);
    let boundary_rejected = rows.iter().filter(|r| r.factor == 1).all(|r| !r.holds);
    let cases: u64 = rows.iter().map(|r| r.cases_checked).sum();
    let mut csv = String::from("spectral_bounds,factor,level,holds,cases_checked,counterexample\n");
    for r in &rows {
        let bounds: Vec<String> = r.spectral_bounds.iter().map(u64::to_string).collect();
        let counter = r.counterexample.as_ref().map_or(String::new(), |(l, lk)| {
            let l: Vec<String> = l.iter().map(i64::to_string).collect();
            format!("{};{lk}", l.join(" "))
        });
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            bounds.join(" "),
            r.factor,
            r.level,
            r.holds,
            r.cases_checked,
            counter
        ));
    }
    Ok(Outcome {
        command: "modulation-check",
        config: to_value(a),
        result: to_value(&rows),
        csv,
        pass: genuine_ok && boundary_rejected,
        summary: format!(
            "{} checks, {cases} cases; factor 2 dominates: {genuine_ok}, factor 1 rejected: {boundary_rejected}",
            rows.len()
        ),
    })
}

#[derive(Debug, Serialize)]
struct TranslationRow {
    r: f64,
    t: f64,
    x: f64,
    offset: f64,
    shift_defect: f64,
    antisymmetry_defect: f64,
}

fn average_kernel(a: &AverageArgs) -> Result<Outcome> {
    let rows = average_report(&a.pairs, a.resolution)?;
    let worst_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let mut translation = Vec::new();
    for &r in &a.r {
        for &(t, x) in &a.pairs {
            let base = average_translations_exact(t, x, r)?;
            let mirrored = average_translations_exact(x, t, r)?;
            for &offset in &a.offsets {
                let shifted = average_translations_exact(t + offset, x + offset, r)?;
                translation.push(TranslationRow {
                    r,
                    t,
                    x,
                    offset,
                    shift_defect: (shifted - base).abs(),
                    antisymmetry_defect: (base + mirrored).abs(),
                });
            }
        }
    }
    let worst_shift = translation.iter().map(|r| r.shift_defect).fold(0.0, f64::max);
    let worst_anti = translation.iter().map(|r| r.antisymmetry_defect).fold(0.0, f64::max);
    let pass = worst_ratio <= 1e-3 && worst_shift <= 1e-10 && worst_anti <= 1e-10;
    Ok(Outcome {
        command: "average-kernel",
        config: to_value(a),
        result: json!({ "averages": rows, "translation": translation }),
        csv: average_rows_to_csv(&rows),
        pass,
        summary: format!(
            "worst |E K0|·|t-x| {worst_ratio:e}, translation defect {worst_shift:e}, antisymmetry defect {worst_anti:e}"
        ),
    })
}

fn norm_sandwich(a: &SandwichArgs) -> Result<Outcome> {
    let config = OptimizerConfig {
        restarts: a.restarts,
        max_iterations: a.max_iterations,
        ..OptimizerConfig::default()
    };
    let mut rows = Vec::new();
    let mut duality = Vec::new();
    for &p in &a.p {
        rows.push(sandwich_report(p, a.depth, &config, a.seed)?);
        if p != 2.0 {
            duality.push(duality_check(&ShiftKind::S0Interval, p, a.depth, &config, a.seed)?);
        }
    }
    let consistent = rows.iter().all(|r| r.consistent);
    let p2_ok = rows.iter().filter(|r| r.p == 2.0).all(|r| (r.lb_s_p - 1.0).abs() <= 1e-8);
    let worst_gap = duality.iter().map(|d| d.relative_gap).fold(0.0, f64::max);
    Ok(Outcome {
        command: "norm-sandwich",
        config: to_value(a),
        result: json!({ "rows": rows, "duality": duality }),
        csv: sandwich_to_csv(&rows),
        pass: consistent && p2_ok && worst_gap <= 0.02,
        summary: format!("below ceiling: {consistent}, lb(s_2) = 1: {p2_ok}, worst duality gap {worst_gap:e}"),
    })
}
