use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use facspeed::benchmarks::{Params, Registry};
use facspeed::harness::{self, ExperimentPlan, HarnessError, PlanCell, RunKind, RunOptions};
use facspeed::measures::speedup_curves;
use facspeed::report::{diagnose, emit_csv, emit_svg, PlotSpec};

#[derive(Parser)]
#[command(name = "facspeed", version, about = "Factored speedup measurement for fork-join programs")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment plan and write its results file.
    Run {
        #[arg(long)]
        plan: PathBuf,
        /// Results file; overrides the plan's output_path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run samples in this process instead of fresh child processes.
        #[arg(long)]
        no_isolate: bool,
    },
    /// Take one sample and print it as JSON on stdout.
    RunOne {
        #[arg(long)]
        bench: String,
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 1)]
        procs: usize,
        /// Resolve worker-count dependent settings for this P.
        #[arg(long)]
        for_p: Option<usize>,
        /// Benchmark parameter as key=value; repeatable.
        #[arg(long = "param")]
        params: Vec<String>,
        /// All parameters as one JSON object; `--param` entries override it.
        #[arg(long)]
        params_json: Option<String>,
        #[arg(long)]
        oversubscribe: bool,
        /// Use the runtime build with idle-time accounting compiled out.
        #[arg(long)]
        no_instrument: bool,
    },
    /// List registered benchmarks and their parameters.
    ListBenchmarks,
    /// Render speedup curves from a results file as SVG or CSV (by extension).
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Draw the elision bound curve.
        #[arg(long)]
        elision: bool,
        /// Draw gap arrows at the largest P.
        #[arg(long)]
        annotate: bool,
        #[arg(long)]
        title: Option<String>,
    },
    /// Print curvature findings for a results file.
    Diagnose {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

/// Error carrying the process exit code.
struct Exit(u8, anyhow::Error);

fn classify(e: anyhow::Error) -> Exit {
    let code = match e.downcast_ref::<HarnessError>() {
        Some(h) if h.is_config_error() => 2,
        _ => 1,
    };
    Exit(code, e)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Exit(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<u8, Exit> {
    let registry = Registry::default();
    match cmd {
        Cmd::Run { plan, out, no_isolate } => cmd_run(&registry, &plan, out, no_isolate),
        Cmd::RunOne { bench, kind, procs, for_p, params, params_json, oversubscribe, no_instrument } => {
            let params = build_params(params_json.as_deref(), &params).map_err(|e| Exit(2, e))?;
            let kind = RunKind::parse(&kind).ok_or_else(|| Exit(2, anyhow!("unknown run kind {kind:?}")))?;
            let opts = RunOptions { isolate: false, oversubscribe, instrument: !no_instrument, exe: None };
            let cell = PlanCell { kind, p: procs, for_p };
            let sample =
                harness::run_single(&registry, &bench, &params, cell, &opts).map_err(|e| classify(e.into()))?;
            println!("{}", serde_json::to_string(&sample).expect("samples serialize"));
            Ok(0)
        }
        Cmd::ListBenchmarks => {
            for b in registry.iter() {
                println!("{}  {}", b.id(), b.description());
                for p in b.params() {
                    println!("    {:<22} default {:<26} {}", p.name, p.default, p.help);
                }
            }
            Ok(0)
        }
        Cmd::Plot { input, out, elision, annotate, title } => {
            cmd_plot(&input, &out, elision, annotate, title).map_err(classify)?;
            Ok(0)
        }
        Cmd::Diagnose { input, json } => {
            let set = harness::load_results(&input).map_err(|e| classify(e.into()))?;
            let curves = curves_of(&set).map_err(classify)?;
            let d = diagnose(&curves).map_err(|e| Exit(1, e.into()))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&d).expect("diagnostics serialize"));
            } else {
                print!("{}", d.to_text());
            }
            Ok(0)
        }
    }
}

fn build_params(json: Option<&str>, assignments: &[String]) -> Result<Params> {
    let mut params = match json {
        Some(j) => serde_json::from_str::<Params>(j).context("--params-json is not a JSON object")?,
        None => Params::new(),
    };
    let extra = Params::from_assignments(assignments.iter().map(String::as_str))?;
    params.0.extend(extra.0);
    Ok(params)
}

fn cmd_run(registry: &Registry, plan_path: &Path, out: Option<PathBuf>, no_isolate: bool) -> Result<u8, Exit> {
    let mut plan = ExperimentPlan::load(plan_path).map_err(|e| Exit(2, e.into()))?;
    if out.is_some() {
        plan.output_path = out;
    }
    if no_isolate {
        plan.isolate = false;
    }
    if plan.output_path.is_none() {
        return Err(Exit(2, anyhow!("no output file: pass --out or set output_path in the plan")));
    }
    let set = harness::run_experiment(&plan, registry, None).map_err(|e| classify(e.into()))?;
    eprintln!(
        "{} samples, {} failures written to {}",
        set.samples.len(),
        set.failures.len(),
        plan.output_path.as_ref().expect("checked").display()
    );
    if set.is_complete() {
        Ok(0)
    } else {
        for hole in &set.holes {
            eprintln!("missing: {hole}");
        }
        Ok(3)
    }
}

fn curves_of(set: &harness::ResultSet) -> Result<facspeed::measures::CurveSet> {
    let summary = set
        .summary
        .as_ref()
        .ok_or_else(|| anyhow!("results file has no summary (missing baseline or one-core runs)"))?;
    Ok(speedup_curves(summary)?)
}

fn cmd_plot(input: &Path, out: &Path, elision: bool, annotate: bool, title: Option<String>) -> Result<()> {
    let set = harness::load_results(input)?;
    let curves = curves_of(&set)?;
    let text = match out.extension().and_then(|e| e.to_str()) {
        Some("csv") => emit_csv(&curves),
        Some("svg") => {
            let title = title.unwrap_or_else(|| match &set.plan {
                Some(p) => format!("{} {}", p.benchmark_id, p.params),
                None => "speedup".to_string(),
            });
            emit_svg(&PlotSpec::new(title, curves).with_elision(elision).with_gaps(annotate))?
        }
        _ => bail!("output must end in .svg or .csv"),
    };
    std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}
