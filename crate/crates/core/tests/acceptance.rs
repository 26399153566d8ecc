//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria run through the same entry point as the `shiftlab` binary. A
//! criterion fails if its check fails or it overruns its time budget.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::Parser;
use shiftlab::cli::{run, Cli, Format, Outcome};
use shiftlab::hilbert::FourierSeries;
use shiftlab::stochastic::{simulate_ensemble, McRun};
use shiftlab::walk::SimConfig;

struct Verdict {
    pass: bool,
    detail: String,
}

fn invoke(args: &str) -> Result<Outcome, String> {
    let argv = std::iter::once("shiftlab").chain(args.split_whitespace());
    let cli = Cli::try_parse_from(argv).map_err(|e| e.to_string())?;
    run(&cli).map_err(|e| e.to_string())
}

/// Runs the commands in order and passes if all of them do.
fn commands(list: &[&str]) -> Result<Verdict, String> {
    let mut pass = true;
    let mut details = Vec::new();
    for args in list {
        let o = invoke(args)?;
        pass &= o.pass;
        details.push(o.verdict());
    }
    Ok(Verdict {
        pass,
        detail: details.join(" | "),
    })
}

fn determinism() -> Result<Verdict, String> {
    let mut notes = Vec::new();
    let mut pass = true;

    // Same flags, different worker counts: identical bytes.
    for args in [
        "mc-convergence --f cos+cos3 --p 3 --N 8,16 --T 8 --paths 6000 --seed 11",
        "norm-sandwich --p 4/3,4 --depth 6 --restarts 6 --seed 3",
    ] {
        let mut bodies = Vec::new();
        for workers in [1, 1, 3] {
            let o = invoke(&format!("--workers {workers} {args}"))?;
            bodies.push((o.render(Format::Csv), o.render(Format::Json)));
        }
        let same = bodies.windows(2).all(|w| w[0] == w[1]);
        pass &= same;
        notes.push(format!("{}: byte-identical {same}", args.split(' ').next().unwrap_or_default()));
    }

    // Raw reductions: exact equality of every aggregate.
    let f = FourierSeries::from_trig(0.0, &[1.0, 0.0, 0.5], &[0.25]);
    let config = SimConfig::new(16, 8.0).map_err(|e| e.to_string())?;
    let mut summaries = Vec::new();
    for workers in [1, 2, 3] {
        let run = McRun::new(3000, 99).with_workers(workers);
        summaries.push(simulate_ensemble(&f, 2.5, &config, &run).map_err(|e| e.to_string())?);
    }
    let invariant = summaries.windows(2).all(|w| w[0] == w[1]);
    pass &= invariant;
    notes.push(format!("ensemble aggregates equal across 1/2/3 workers {invariant}"));

    Ok(Verdict {
        pass,
        detail: notes.join(", "),
    })
}

type Check = fn() -> Result<Verdict, String>;

fn main() -> ExitCode {
    let criteria: [(u32, &str, u64, Check); 10] = [
        (1, "constant c0", 1, || commands(&["c0 --resolution 65536"])),
        (2, "projection lemma", 10, || commands(&["projection-lemma --resolution 65536"])),
        (3, "exact shift algebra", 5, || commands(&["shift-check --depth 10"])),
        (4, "discrete moments", 5, || commands(&["walk-moments --N 2,4,8"])),
        (5, "Monte-Carlo convergence", 120, || {
            commands(&["mc-convergence --f cos --p 2 --N 8,16,32 --T 8 --paths 100000 --seed 20260101"])
        }),
        (6, "martingale-transform inequality", 180, || {
            commands(&[
                "mc-convergence --inequality --f cos --p 2 --N 16 --T 8 --paths 20000 --seed 7",
                "mc-convergence --inequality --f cos --p 4 --N 16 --T 8 --paths 20000 --seed 7",
                "mc-convergence --inequality --f cos+cos3 --p 2 --N 16 --T 8 --paths 20000 --seed 7",
                "mc-convergence --inequality --f cos+cos3 --p 4 --N 16 --T 8 --paths 20000 --seed 7",
            ])
        }),
        (7, "kernel averaging", 30, || commands(&["average-kernel --resolution 4096"])),
        (8, "modulation", 10, || commands(&["modulation-check --k-max 3 --n-max 4"])),
        (9, "norm sandwich", 300, || {
            commands(&[
                "norm-sandwich --p 4/3,2,4 --depth 6 --seed 1",
                "norm-sandwich --p 4/3,2,4 --depth 10 --seed 1",
            ])
        }),
        (10, "determinism and worker invariance", 120, determinism),
    ];

    let mut failures = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= Duration::from_secs(budget);
        let (pass, detail) = match outcome {
            Ok(v) => (v.pass && in_budget, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} criterion {id} ({name}) in {:.2}s of {budget}s: {detail}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
