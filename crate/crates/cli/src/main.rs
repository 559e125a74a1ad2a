use std::io;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use jsqslq::measures::{compute_report, PAIRS};
use jsqslq::mg::{self, level_probability};
use jsqslq::model::{BOUNDARY_PHASES, PHASES};
use jsqslq::sim::{simulate, SimConfig};
use jsqslq::stability::{drift_is_negative, drift_terms, threshold_lambda};
use jsqslq::tables::{self, TableComparison, TableKind, THRESHOLD_TOL};
use jsqslq::truncated::solve_truncated;
use jsqslq::{Error, ModelParams};

mod params;

use params::{ParamArgs, ParamError};

const EXIT_VALIDATION: u8 = 2;
const EXIT_UNSTABLE: u8 = 3;
const EXIT_TABLE_MISMATCH: u8 = 4;
const EXIT_NUMERICAL: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "jsqslq", version, about = "Join-the-shortest-queue model with one roving server attending the longest queue")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    output: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Drift, stability verdict and phase stationary vector.
    Stability {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Largest stable arrival rate for the given service and tie weights.
    Threshold {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = THRESHOLD_TOL)]
        tol: f64,
    },
    /// Exact stationary measures.
    Solve {
        #[command(flatten)]
        params: ParamArgs,
        /// Also report level probabilities for levels 0..=N.
        #[arg(long, value_name = "N")]
        levels: Option<u64>,
        /// Cross-check against the chain truncated at level N.
        #[arg(long, value_name = "N")]
        truncation: Option<u64>,
    },
    /// Discrete-event estimates with standard errors.
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = SimConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = SimConfig::default().horizon)]
        horizon: f64,
        #[arg(long, default_value_t = SimConfig::default().warmup)]
        warmup: f64,
        #[arg(long, default_value_t = SimConfig::default().replications)]
        replications: usize,
        /// Put exact values next to the estimates.
        #[arg(long)]
        compare: bool,
    },
    /// Recompute a bundled table and diff it against the printed cells.
    ReproduceTable {
        #[arg(long, value_name = "K")]
        table: usize,
        /// Allowed distance from the printed cell, in units of its last digit.
        #[arg(long, default_value_t = 1)]
        tol_cells: u32,
        /// Exit 0 when every mismatch is a listed printing error.
        #[arg(long)]
        allow_errata: bool,
    },
}

#[derive(Debug)]
enum Failure {
    Params(ParamError),
    Model(Error),
    Io(String),
    /// Output already written; only the exit status is left.
    Status(u8),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

impl From<ParamError> for Failure {
    fn from(e: ParamError) -> Self {
        Failure::Params(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn model_exit_code(e: &Error) -> u8 {
    match e {
        Error::NonPositiveRate(_)
        | Error::BadRoutingWeights(_)
        | Error::InvalidConfig(_)
        | Error::Fixture(_) => EXIT_VALIDATION,
        Error::Unstable { .. } => EXIT_UNSTABLE,
        _ => EXIT_NUMERICAL,
    }
}

type Rows = Vec<Vec<String>>;

fn print_json(v: &Value) -> Result<(), Failure> {
    println!("{}", serde_json::to_string_pretty(v).map_err(|e| Failure::Io(e.to_string()))?);
    Ok(())
}

fn print_csv(header: &[&str], rows: &Rows) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(io::stdout());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn param_columns(m: &ModelParams) -> Vec<String> {
    let mut out = vec![m.lambda().to_string()];
    for v in [m.mu(), m.p(), m.q()] {
        out.extend(v.iter().map(f64::to_string));
    }
    out
}

const PARAM_HEADER: [&str; 10] = ["lambda", "mu1", "mu2", "mu3", "p1", "p2", "p3", "q1", "q2", "q3"];

fn stability(fmt: Format, args: &ParamArgs) -> Result<(), Failure> {
    let m = args.resolve(None)?;
    let (drift, stat) = drift_terms(&m)?;
    let pi: Vec<f64> = stat.pi.iter().copied().collect();
    let stable = drift_is_negative(drift.up, drift.down);
    match fmt {
        Format::Json => print_json(&json!({
            "params": m,
            "f_lambda": drift.value(),
            "drift_up": drift.up,
            "drift_down": drift.down,
            "stable": stable,
            "pi": pi,
        })),
        Format::Csv => {
            let mut header = vec!["lambda", "f_lambda", "stable"];
            let names: Vec<String> = (1..=12).map(|k| format!("pi{k}")).collect();
            header.extend(names.iter().map(String::as_str));
            let mut row = vec![m.lambda().to_string(), drift.value().to_string(), stable.to_string()];
            row.extend(pi.iter().map(f64::to_string));
            print_csv(&header, &vec![row])
        }
    }
}

fn threshold(fmt: Format, args: &ParamArgs, tol: f64) -> Result<(), Failure> {
    if !(tol > 0.0) {
        return Err(Failure::Params(ParamError(format!("tol must be positive, got {tol}"))));
    }
    // The arrival rate is not an input here; any positive value works.
    let m = args.resolve(Some(1.0))?;
    let lambda_max = threshold_lambda(&m, None, tol)?;
    match fmt {
        Format::Json => print_json(&json!({
            "mu": m.mu(),
            "p": m.p(),
            "q": m.q(),
            "lambda_max": lambda_max,
            "tol": tol,
        })),
        Format::Csv => {
            let mut row = param_columns(&m);
            row.remove(0);
            row.push(lambda_max.to_string());
            let mut header = PARAM_HEADER[1..].to_vec();
            header.push("lambda_max");
            print_csv(&header, &vec![row])
        }
    }
}

/// `(measure, index, value)` triples in a fixed order.
fn report_rows(r: &jsqslq::measures::PerformanceReport) -> Vec<(String, String, f64)> {
    let mut out = Vec::new();
    let per_queue: [(&str, &[f64; 3]); 8] = [
        ("mean_l", &r.mean_l),
        ("var_l", &r.var_l),
        ("mean_w", &r.mean_w),
        ("lambda_eff", &r.lambda_eff),
        ("rho_eff", &r.rho_eff),
        ("gamma", &r.gamma),
        ("cov", &r.cov),
        ("cor", &r.cor),
    ];
    for (name, v) in per_queue {
        for (k, x) in v.iter().enumerate() {
            let idx = if name == "cov" || name == "cor" {
                let (i, j) = PAIRS[k];
                format!("{}{}", i + 1, j + 1)
            } else {
                (k + 1).to_string()
            };
            out.push((name.to_string(), idx, *x));
        }
    }
    out.push(("p_idle".into(), String::new(), r.p_idle));
    out.push(("gini".into(), String::new(), r.gini));
    out
}

fn solve(fmt: Format, args: &ParamArgs, levels: Option<u64>, truncation: Option<u64>) -> Result<(), Failure> {
    let m = args.resolve(None)?;
    let sol = mg::solve(&m)?;
    let report = compute_report(&sol, &m)?;
    let mut level_rows = Vec::new();
    if let Some(top) = levels {
        for n in 0..=top {
            let phases: &[_] = if n == 0 { &BOUNDARY_PHASES } else { &PHASES };
            for &d in phases {
                level_rows.push((n, d.to_string(), level_probability(&sol, n, d)?));
            }
        }
    }
    let check = match truncation {
        Some(top) => {
            let t = solve_truncated(&m, top)?;
            Some((top, t.tv_distance(&sol), t.top_mass()))
        }
        None => None,
    };
    match fmt {
        Format::Json => {
            let mut v = json!({
                "params": m,
                "report": report,
                "diagnostics": {
                    "iterations": sol.iterations,
                    "r_residual": sol.residual,
                    "normalization_defect": sol.normalization_defect(),
                    "spectral_radius": sol.spectral_radius(),
                },
            });
            if levels.is_some() {
                v["levels"] = level_rows
                    .iter()
                    .map(|(n, d, x)| json!({"level": n, "phase": d, "probability": x}))
                    .collect();
            }
            if let Some((top, tv, top_mass)) = check {
                v["truncated"] = json!({"truncation": top, "tv_distance": tv, "top_mass": top_mass});
            }
            print_json(&v)
        }
        Format::Csv => {
            let mut rows: Rows = report_rows(&report)
                .into_iter()
                .map(|(a, b, x)| vec![a, b, x.to_string()])
                .collect();
            for (n, d, x) in &level_rows {
                rows.push(vec!["level_probability".into(), format!("{n} {d}"), x.to_string()]);
            }
            if let Some((_, tv, _)) = check {
                rows.push(vec!["tv_distance".into(), String::new(), tv.to_string()]);
            }
            print_csv(&["measure", "index", "value"], &rows)
        }
    }
}

fn simulate_cmd(fmt: Format, args: &ParamArgs, cfg: SimConfig, compare: bool) -> Result<(), Failure> {
    let m = args.resolve(None)?;
    let est = simulate(&m, &cfg)?;
    // An unstable model still gets its estimates, growth flag included.
    let exact = if compare {
        Some(mg::solve(&m).and_then(|sol| compute_report(&sol, &m)))
    } else {
        None
    };
    let comparison = match &exact {
        Some(Ok(r)) => Some(est.compare(r, 3.0)),
        _ => None,
    };
    match fmt {
        Format::Json => {
            let mut v = json!({"params": m, "config": cfg, "estimates": est});
            if let Some(c) = &comparison {
                v["comparison"] = json!(c);
            }
            print_json(&v)?;
        }
        Format::Csv => {
            let mut rows: Rows = Vec::new();
            match &comparison {
                Some(cs) => {
                    for c in cs {
                        rows.push(vec![
                            c.measure.clone(),
                            c.estimate.to_string(),
                            c.se.to_string(),
                            c.exact.to_string(),
                            c.within.to_string(),
                        ]);
                    }
                    print_csv(&["measure", "estimate", "se", "exact", "within_3se"], &rows)?;
                }
                None => {
                    let v = serde_json::to_value(&est).map_err(|e| Failure::Io(e.to_string()))?;
                    flatten_estimates(&v, "", &mut rows);
                    print_csv(&["measure", "estimate", "se"], &rows)?;
                }
            }
        }
    }
    match exact {
        Some(Err(e)) => {
            eprintln!("no exact values: {e}");
            Err(Failure::Status(model_exit_code(&e)))
        }
        _ => {
            if let Some(cs) = comparison {
                let off = cs.iter().filter(|c| !c.within).count();
                if off > 0 {
                    eprintln!("{off} of {} measures outside 3 SE", cs.len());
                }
            }
            Ok(())
        }
    }
}

/// Walks the serialized estimates into `(name, mean, se)` rows, scalars
/// going in the mean column.
fn flatten_estimates(v: &Value, prefix: &str, rows: &mut Rows) {
    match v {
        Value::Object(map) if map.contains_key("mean") && map.contains_key("se") => {
            rows.push(vec![prefix.to_string(), map["mean"].to_string(), map["se"].to_string()]);
        }
        Value::Object(map) => {
            for (k, x) in map {
                let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_estimates(x, &name, rows);
            }
        }
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                flatten_estimates(x, &format!("{prefix}{}", i + 1), rows);
            }
        }
        other => rows.push(vec![prefix.to_string(), other.to_string(), String::new()]),
    }
}

/// Computed value formatted like its printed cell.
fn shown(x: f64, cell: &tables::Cell) -> String {
    match cell.decimals {
        Some(d) => format!("{:.*}", d as usize, tables::round_to(x, d)),
        None => x.to_string(),
    }
}

fn reproduce(fmt: Format, table: usize, ulps: u32, allow_errata: bool) -> Result<(), Failure> {
    let expected = tables::load_table(table)?;
    let cmp: TableComparison = tables::compare_table(&expected, ulps)?;
    let cols = cmp.kind.columns();
    let mismatches = cmp.mismatches();
    match fmt {
        Format::Csv => {
            let mut header = PARAM_HEADER.to_vec();
            if cmp.kind == TableKind::Threshold {
                header.remove(0);
            }
            header.extend(cols);
            let rows: Rows = cmp
                .rows
                .iter()
                .map(|r| {
                    let mut row = param_columns(&r.params);
                    if cmp.kind == TableKind::Threshold {
                        row.remove(0);
                    }
                    row.extend(r.as_printed.iter().zip(&r.expected).map(|(x, c)| shown(*x, c)));
                    row
                })
                .collect();
            for line in &expected.header {
                println!("#{line}");
            }
            print_csv(&header, &rows)?;
        }
        Format::Json => {
            let rows: Vec<Value> = cmp
                .rows
                .iter()
                .map(|r| {
                    json!({
                        "params": r.params,
                        "computed": r.computed,
                        "as_printed": r.as_printed,
                        "expected": r.expected.iter().map(|c| c.text.clone()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            print_json(&json!({
                "table": cmp.number,
                "columns": cols,
                "cells": cmp.cell_count(),
                "rows": rows,
                "mismatches": mismatches,
            }))?;
        }
    }
    for mm in &mismatches {
        eprintln!(
            "table {} row {} {}: computed {} printed {}{}",
            cmp.number,
            mm.row + 1,
            mm.column,
            mm.computed,
            mm.expected,
            if mm.known_erratum { " (listed printing error)" } else { "" }
        );
    }
    let unexplained = mismatches.iter().filter(|m| !m.known_erratum).count();
    if unexplained > 0 || (!mismatches.is_empty() && !allow_errata) {
        eprintln!("{} of {} cells differ", mismatches.len(), cmp.cell_count());
        return Err(Failure::Status(EXIT_TABLE_MISMATCH));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let fmt = cli.output;
    match cli.command {
        Command::Stability { params } => stability(fmt, &params),
        Command::Threshold { params, tol } => threshold(fmt, &params, tol),
        Command::Solve { params, levels, truncation } => solve(fmt, &params, levels, truncation),
        Command::Simulate { params, seed, horizon, warmup, replications, compare } => {
            let cfg = SimConfig { seed, horizon, warmup, replications };
            simulate_cmd(fmt, &params, cfg, compare)
        }
        Command::ReproduceTable { table, tol_cells, allow_errata } => reproduce(fmt, table, tol_cells, allow_errata),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Status(code)) => ExitCode::from(code),
        Err(Failure::Params(e)) => {
            eprintln!("error: {}", e.0);
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Model(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(model_exit_code(&e))
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
