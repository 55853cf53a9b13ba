//! Command-line entry point: validate, rtca, sced, design, simulate,
//! screen, report.
//!
//! Every run writes file artifacts (JSON/CSV) into `--out`; JSON artifacts
//! embed the fully resolved configuration and CSV artifacts carry it as a
//! leading `#` comment line, so any result can be traced back to its exact
//! inputs. Identical case + configuration produce byte-identical artifacts.
//!
//! Exit codes: 0 success, 1 domain failure (validation errors, infeasible
//! dispatch, failed design), 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::attack::{build_bilevel, design_attack, AttackSpec, TargetCase};
use crate::benders::{trace_to_jsonl, MbdOptions};
use crate::config::RunConfig;
use crate::grid::{load_case, validate, CaseFormat, GridCase, LoadOptions, Severity};
use crate::network::{build_dc, compute_factors, dc_power_flow, factors_to_csv};
use crate::rtca::{contingency_list, screen, ScreenParams};
use crate::sced::{build_sced, solve_sced, CtgFlowForm, ScedStatus};
use crate::sim::{effective_injections, implement_attack, screen_targets, SimOptions};

#[derive(Parser)]
#[command(
    name = "gridsec",
    about = "Vulnerability assessment of N-1 reliable power systems to unobservable load-redistribution attacks",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct CaseArgs {
    /// Case file path.
    #[arg(long)]
    case: PathBuf,
    /// Case format: native (JSON) or matpower.
    #[arg(long, default_value = "native")]
    format: String,
    /// Short-term rating factor used when the case omits explicit values.
    #[arg(long, default_value_t = 1.15)]
    st_factor: f64,
    /// Override the case loss fraction.
    #[arg(long)]
    loss: Option<f64>,
}

#[derive(Args, Clone)]
struct ScreenArgs {
    /// Post-contingency monitoring threshold.
    #[arg(long, default_value_t = 0.90)]
    tau: f64,
    /// Base-case monitoring threshold (defaults to --tau).
    #[arg(long)]
    tau_base: Option<f64>,
    /// Contingency voltage floor, kV.
    #[arg(long, default_value_t = 100.0)]
    kv_min: f64,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Decomposition convergence tolerance.
    #[arg(long, default_value_t = 5e-5)]
    eps: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// l1 penalty weight.
    #[arg(long, default_value_t = 1e-3)]
    sigma: f64,
    /// Extra random decomposition starts.
    #[arg(long, default_value_t = 0)]
    multistart: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Post-contingency flow composition: augmented or textbook.
    #[arg(long, default_value = "augmented")]
    ctg_flow_form: String,
}

#[derive(Args, Clone)]
struct TargetArgs {
    /// Target line id.
    #[arg(long)]
    target: String,
    /// Target contingency id, or `base`.
    #[arg(long)]
    contingency: String,
    /// l1-norm budget.
    #[arg(long)]
    n1: f64,
    /// Load-shift fraction.
    #[arg(long)]
    ls: f64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and validate a case; print diagnostics.
    Validate {
        #[command(flatten)]
        case: CaseArgs,
    },
    /// Contingency screening: flows, classes, and the security constraints.
    Rtca {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        scr: ScreenArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also dump PTDF/LODF matrices.
        #[arg(long, default_value_t = false)]
        factors: bool,
    },
    /// Security-constrained dispatch at the current state (no attack).
    Sced {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        scr: ScreenArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "augmented")]
        ctg_flow_form: String,
    },
    /// Design the worst-case attack for one target.
    Design {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        scr: ScreenArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Design one attack and run it through the defender loop.
    Simulate {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        scr: ScreenArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        target: TargetArgs,
        /// EMS measurement/dispatch rounds to replay.
        #[arg(long, default_value_t = 1)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Attack every warned pair over a budget grid; statistical table out.
    Screen {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        scr: ScreenArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Comma-separated l1 budgets.
        #[arg(long, default_value = "0.2,0.6,1.0,1.4,2.0", value_delimiter = ',')]
        n1: Vec<f64>,
        /// Comma-separated load-shift fractions.
        #[arg(long, default_value = "0.1", value_delimiter = ',')]
        ls: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a JSON artifact (assessment report or screen sweep).
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

pub fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("GRIDSEC_LOG")).init();
    let cli = Cli::parse();
    std::process::exit(run(cli.cmd));
}

fn run(cmd: Cmd) -> i32 {
    match dispatch(cmd) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

enum CliError {
    Usage(String),
    Domain(String),
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Domain(e.to_string())
    }
}

fn parse_format(s: &str) -> Result<CaseFormat, CliError> {
    s.parse::<CaseFormat>()
        .map_err(|e| CliError::Usage(format!("--format: {e}")))
}

fn parse_ctg_form(s: &str) -> Result<CtgFlowForm, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "augmented" => Ok(CtgFlowForm::Augmented),
        "textbook" => Ok(CtgFlowForm::Textbook),
        other => Err(CliError::Usage(format!(
            "--ctg-flow-form must be `augmented` or `textbook`, got `{other}`"
        ))),
    }
}

fn load(case_args: &CaseArgs) -> Result<GridCase, CliError> {
    let format = parse_format(&case_args.format)?;
    let file = fs::File::open(&case_args.case)
        .map_err(|e| CliError::Usage(format!("--case {}: {e}", case_args.case.display())))?;
    let opts = LoadOptions {
        short_term_factor: case_args.st_factor,
        loss_fraction: case_args.loss,
    };
    let (case, _) = load_case(file, format, &opts)?;
    Ok(case)
}

fn resolve_config(
    case_args: &CaseArgs,
    scr: &ScreenArgs,
    solver: Option<&SolverArgs>,
    n1: &[f64],
    ls: &[f64],
    jobs: usize,
    rounds: usize,
) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig {
        tau: scr.tau,
        tau_base: scr.tau_base.unwrap_or(scr.tau),
        kv_min: scr.kv_min,
        st_factor: case_args.st_factor,
        loss_fraction: case_args.loss,
        jobs,
        rounds,
        ..RunConfig::default()
    };
    if !n1.is_empty() {
        cfg.n1_grid = n1.to_vec();
    }
    if !ls.is_empty() {
        cfg.ls_list = ls.to_vec();
    }
    if let Some(s) = solver {
        if !(s.eps > 0.0) {
            return Err(CliError::Usage(format!(
                "--eps must be positive, got {}",
                s.eps
            )));
        }
        cfg.eps = s.eps;
        cfg.max_iter = s.max_iter;
        cfg.sigma = s.sigma;
        cfg.multistart = s.multistart;
        cfg.seed = s.seed;
        cfg.ctg_flow_form = parse_ctg_form(&s.ctg_flow_form)?;
    }
    for (flag, v) in [("--tau", cfg.tau), ("--tau-base", cfg.tau_base)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(CliError::Usage(format!(
                "{flag} must lie in (0, 1], got {v}"
            )));
        }
    }
    Ok(cfg)
}

fn init_jobs(jobs: usize) {
    if jobs > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
}

fn write_artifact(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), content)?;
    Ok(())
}

/// JSON artifacts embed the resolved config under a `config` key.
fn json_with_config(cfg: &RunConfig, key: &str, body: &str) -> String {
    format!(
        "{{\n\"config\": {},\n\"{key}\": {}\n}}\n",
        cfg.to_json(),
        body.trim_end()
    )
}

/// CSV artifacts carry the resolved config as a leading comment line.
fn csv_with_config(cfg: &RunConfig, body: &str) -> String {
    let one_line = serde_json::to_string(cfg).expect("config serializes");
    format!("# config {one_line}\n{body}")
}

fn validate_target(t: &TargetArgs) -> Result<(AttackSpec, TargetCase), CliError> {
    if !(t.n1 > 0.0) {
        return Err(CliError::Usage(format!(
            "--n1 must be positive, got {}",
            t.n1
        )));
    }
    if !(t.ls > 0.0 && t.ls <= 1.0) {
        return Err(CliError::Usage(format!(
            "--ls must lie in (0, 1], got {}",
            t.ls
        )));
    }
    let target_case = if t.contingency.eq_ignore_ascii_case("base") {
        TargetCase::Base
    } else {
        TargetCase::Contingency(t.contingency.clone())
    };
    Ok((
        AttackSpec {
            target_line: t.target.clone(),
            target_case: target_case.clone(),
            n1: t.n1,
            load_shift: t.ls,
            sigma: 1e-3,
        },
        target_case,
    ))
}

struct Pipeline {
    case: GridCase,
    net: crate::network::DcNetwork,
    factors: crate::network::DistFactors,
    eligible: Vec<crate::rtca::ContingencySpec>,
    flows: crate::network::FlowState,
}

fn pipeline(case: GridCase, cfg: &RunConfig) -> Result<Pipeline, CliError> {
    let net = build_dc(&case)?;
    let eligible = contingency_list(&case, cfg.kv_min);
    let idx: Vec<usize> = eligible.iter().map(|c| c.branch_index).collect();
    let factors = compute_factors(&net, &case, &idx)?;
    let inj = effective_injections(&case, &case.p0());
    let flows = dc_power_flow(&net, &inj)?;
    Ok(Pipeline {
        case,
        net,
        factors,
        eligible,
        flows,
    })
}

fn dispatch(cmd: Cmd) -> Result<i32, CliError> {
    match cmd {
        Cmd::Validate { case } => {
            let format = parse_format(&case.format)?;
            let file = fs::File::open(&case.case)
                .map_err(|e| CliError::Usage(format!("--case {}: {e}", case.case.display())))?;
            let opts = LoadOptions {
                short_term_factor: case.st_factor,
                loss_fraction: case.loss,
            };
            match load_case(file, format, &opts) {
                Ok((parsed, diags)) => {
                    for d in &diags {
                        println!("{d}");
                    }
                    let fresh = validate(&parsed);
                    for d in fresh.iter().filter(|d| d.severity == Severity::Error) {
                        println!("{d}");
                    }
                    println!(
                        "ok: {} buses, {} branches, {} generators",
                        parsed.buses.len(),
                        parsed.branches.len(),
                        parsed.generators.len()
                    );
                    Ok(0)
                }
                Err(e) => {
                    eprintln!("{e}");
                    Ok(1)
                }
            }
        }
        Cmd::Rtca {
            case,
            scr,
            out,
            factors: dump_factors,
        } => {
            let cfg = resolve_config(&case, &scr, None, &[], &[], 0, 1)?;
            let p = pipeline(load(&case)?, &cfg)?;
            let params = ScreenParams {
                tau: cfg.tau,
                tau_base: cfg.tau_base,
            };
            let (result, constraints) =
                screen(&p.case, &p.factors, &p.flows, &p.eligible, &params)?;
            write_artifact(&out, "screen.csv", &csv_with_config(&cfg, &result.to_csv()))?;
            write_artifact(
                &out,
                "constraints.json",
                &json_with_config(
                    &cfg,
                    "constraints",
                    &serde_json::to_string_pretty(&constraints).expect("serializes"),
                ),
            )?;
            if dump_factors {
                write_artifact(&out, "ptdf.csv", &factors_to_csv(&p.case, &p.factors.ptdf))?;
            }
            println!(
                "{} entries, {} warnings, {} violations -> {}",
                result.entries.len(),
                result.warnings().count(),
                result.violations().count(),
                out.display()
            );
            Ok(0)
        }
        Cmd::Sced {
            case,
            scr,
            out,
            ctg_flow_form,
        } => {
            let mut cfg = resolve_config(&case, &scr, None, &[], &[], 0, 1)?;
            cfg.ctg_flow_form = parse_ctg_form(&ctg_flow_form)?;
            let p = pipeline(load(&case)?, &cfg)?;
            let params = ScreenParams {
                tau: cfg.tau,
                tau_base: cfg.tau_base,
            };
            let (_, constraints) = screen(&p.case, &p.factors, &p.flows, &p.eligible, &params)?;
            let problem = build_sced(
                &p.case,
                &p.factors,
                &constraints,
                &vec![0.0; p.case.buses.len()],
                &cfg.sced_params(),
            )?;
            let sol = solve_sced(&problem, &p.case)?;
            write_artifact(
                &out,
                "sced.json",
                &json_with_config(&cfg, "solution", &sol.to_json()),
            )?;
            match sol.status {
                ScedStatus::Optimal => {
                    println!("objective {:.4} -> {}", sol.objective, out.display());
                    Ok(0)
                }
                ScedStatus::Infeasible => {
                    println!("dispatch infeasible -> {}", out.display());
                    Ok(1)
                }
            }
        }
        Cmd::Design {
            case,
            scr,
            solver,
            target,
            out,
        } => {
            let cfg = resolve_config(&case, &scr, Some(&solver), &[], &[], 0, 1)?;
            let (mut spec, _) = validate_target(&target)?;
            spec.sigma = cfg.sigma;
            let p = pipeline(load(&case)?, &cfg)?;
            let params = ScreenParams {
                tau: cfg.tau,
                tau_base: cfg.tau_base,
            };
            let (_, constraints) = screen(&p.case, &p.factors, &p.flows, &p.eligible, &params)?;
            let bp = build_bilevel(
                &p.case,
                &p.net,
                &p.factors,
                &constraints,
                &spec,
                &cfg.sced_params(),
            )?;
            let opts = MbdOptions {
                epsilon: cfg.eps,
                max_iter: cfg.max_iter,
                u0: None,
                multistart: cfg.multistart,
                seed: cfg.seed,
                alpha_floor: -1e6,
            };
            let design = design_attack(&bp, &opts)?;
            write_artifact(
                &out,
                "design.json",
                &json_with_config(&cfg, "design", &design.to_json()),
            )?;
            write_artifact(&out, "trace.jsonl", &trace_to_jsonl(&design.trace))?;
            write_artifact(&out, "bilevel.json", &bp.to_json())?;
            println!(
                "predicted {:.2}% of limit, l0 {}, converged {} -> {}",
                design.predicted_flow_pct,
                design.l0_norm,
                design.converged,
                out.display()
            );
            Ok(0)
        }
        Cmd::Simulate {
            case,
            scr,
            solver,
            target,
            rounds,
            jobs,
            out,
        } => {
            init_jobs(jobs);
            let cfg = resolve_config(&case, &scr, Some(&solver), &[], &[], jobs, rounds)?;
            let (mut spec, _) = validate_target(&target)?;
            spec.sigma = cfg.sigma;
            let p = pipeline(load(&case)?, &cfg)?;
            let params = ScreenParams {
                tau: cfg.tau,
                tau_base: cfg.tau_base,
            };
            let (_, constraints) = screen(&p.case, &p.factors, &p.flows, &p.eligible, &params)?;
            let bp = build_bilevel(
                &p.case,
                &p.net,
                &p.factors,
                &constraints,
                &spec,
                &cfg.sced_params(),
            )?;
            let opts = MbdOptions {
                epsilon: cfg.eps,
                max_iter: cfg.max_iter,
                u0: None,
                multistart: cfg.multistart,
                seed: cfg.seed,
                alpha_floor: -1e6,
            };
            let design = design_attack(&bp, &opts)?;
            let sim_opts = SimOptions::from(&cfg);
            let report = implement_attack(&p.case, &p.net, &p.factors, &design, &sim_opts)?;
            write_artifact(
                &out,
                "report.json",
                &json_with_config(&cfg, "report", &report.to_json()),
            )?;
            write_artifact(&out, "trace.jsonl", &trace_to_jsonl(&design.trace))?;
            // cyber-vs-physical pairs for scatter plotting
            let mut pairs_csv = String::from("line,contingency,cyber_pct,physical_pct\n");
            for lp in &report.line_pairs {
                use std::fmt::Write;
                let _ = writeln!(
                    pairs_csv,
                    "{},{},{:.4},{:.4}",
                    lp.line, lp.contingency, lp.cyber_pct, lp.physical_pct
                );
            }
            write_artifact(&out, "pairs.csv", &csv_with_config(&cfg, &pairs_csv))?;
            println!(
                "predicted {:.2}% cyber {:.2}% physical {:.2}% ({} collateral violations) -> {}",
                report.predicted_pct,
                report.cyber_pct,
                report.physical_pct,
                report
                    .collateral_violations
                    .iter()
                    .filter(|v| !v.is_target)
                    .count(),
                out.display()
            );
            match report.sced_status {
                ScedStatus::Optimal => Ok(0),
                ScedStatus::Infeasible => Ok(1),
            }
        }
        Cmd::Screen {
            case,
            scr,
            solver,
            n1,
            ls,
            jobs,
            out,
        } => {
            init_jobs(jobs);
            for v in &n1 {
                if !(*v > 0.0) {
                    return Err(CliError::Usage(format!(
                        "--n1 entries must be positive, got {v}"
                    )));
                }
            }
            for v in &ls {
                if !(*v > 0.0 && *v <= 1.0) {
                    return Err(CliError::Usage(format!(
                        "--ls entries must lie in (0, 1], got {v}"
                    )));
                }
            }
            let cfg = resolve_config(&case, &scr, Some(&solver), &n1, &ls, jobs, 1)?;
            let parsed = load(&case)?;
            let sweep = screen_targets(&parsed, &cfg)?;
            write_artifact(
                &out,
                "table.csv",
                &csv_with_config(&cfg, &sweep.to_table_csv()),
            )?;
            write_artifact(
                &out,
                "cells.csv",
                &csv_with_config(&cfg, &sweep.to_cells_csv()),
            )?;
            write_artifact(
                &out,
                "plotdata.csv",
                &csv_with_config(&cfg, &sweep.to_plotdata_csv()),
            )?;
            write_artifact(
                &out,
                "sweep.json",
                &json_with_config(
                    &cfg,
                    "sweep",
                    &serde_json::to_string_pretty(&sweep).expect("serializes"),
                ),
            )?;
            println!(
                "{} targets, {} cells -> {}",
                sweep.summaries.len(),
                sweep.cells.len(),
                out.display()
            );
            Ok(0)
        }
        Cmd::Report { input } => {
            let text = fs::read_to_string(&input)
                .map_err(|e| CliError::Usage(format!("--in {}: {e}", input.display())))?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            if let Some(report) = value.get("report") {
                println!("attack assessment");
                for (label, key) in [("target", "target_line"), ("contingency", "target_case")] {
                    println!("  {label}: {}", report[key].as_str().unwrap_or("?"));
                }
                for (label, key) in [
                    ("predicted % of limit", "predicted_pct"),
                    ("cyber % of limit", "cyber_pct"),
                    ("physical % of limit", "physical_pct"),
                ] {
                    println!("  {label}: {:.2}", report[key].as_f64().unwrap_or(f64::NAN));
                }
                let viol = report["collateral_violations"]
                    .as_array()
                    .map(|a| a.len())
                    .unwrap_or(0);
                println!("  violations caused: {viol}");
            } else if let Some(sweep) = value.get("sweep") {
                let summaries = sweep["summaries"].as_array().cloned().unwrap_or_default();
                println!("screen sweep: {} targets", summaries.len());
                for s in summaries {
                    println!(
                        "  {} under {}: max PF {:.2}..{:.2}%, l0 {}..{}",
                        s["target_line"].as_str().unwrap_or("?"),
                        s["contingency"].as_str().unwrap_or("?"),
                        s["max_pf_min_pct"].as_f64().unwrap_or(f64::NAN),
                        s["max_pf_max_pct"].as_f64().unwrap_or(f64::NAN),
                        s["l0_min"],
                        s["l0_max"],
                    );
                }
            } else {
                return Err(CliError::Usage(
                    "unrecognized artifact: expected a `report` or `sweep` key".into(),
                ));
            }
            Ok(0)
        }
    }
}
