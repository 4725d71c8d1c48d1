//! `ldgram`: template enumeration, exact Gram matrices, spectral checks,
//! low-degree advantage and correlation, condition checks and Monte-Carlo
//! cross-validation from the command line.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 validation error, 3 cap exceeded,
//! 4 singular Gram matrix.

mod config;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ldgram_core::analysis::{
    advantage, check_condition_with, correlation, spectrum, Condition, ConditionReport, LdReport,
};
use ldgram_core::basis::{float_matrix_from_json, gram_matrix};
use ldgram_core::graph_core::{automorphism_count, enumerate_rooted_templates, enumerate_templates};
use ldgram_core::mc_oracle::cross_check;
use ldgram_core::{LdError, Result};
use serde_json::{json, Value};

use crate::config::{read_text, RunArgs, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "ldgram", version, about = "Near-orthonormal bases and low-degree criteria for planted graph models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List canonical templates with at most D edges and their automorphism counts (CSV).
    Templates {
        /// Degree (overrides --D).
        #[arg(value_name = "D")]
        max_edges: Option<usize>,
    },
    /// Assemble the exact Gram matrix of the normalized basis (JSON).
    Gram,
    /// Eigenvalues and deviation from the identity of a Gram matrix.
    Spectrum,
    /// Low-degree advantage against the ε-alteration (JSON report).
    Adv,
    /// Low-degree correlation for estimating 1{Θ_{z1 z2} ≠ 0} (JSON report).
    Corr,
    /// Worst-case ratios of the structural moment conditions (JSON).
    CheckConditions,
    /// Analytic moments against Monte-Carlo estimates, with z-scores (CSV).
    McCheck,
}

enum Failure {
    Ld(LdError),
    Io(String),
}

impl From<LdError> for Failure {
    fn from(e: LdError) -> Self {
        Failure::Ld(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Ld(e)) => {
            eprintln!("ldgram: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("ldgram: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = RunConfig::resolve(&cli.run)?;
    if let Some(threads) = cfg.threads()? {
        // Only fails if a pool was already installed, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match cli.command {
        Command::Templates { max_edges } => templates(&cfg, max_edges),
        Command::Gram => gram(&cfg),
        Command::Spectrum => spectrum_cmd(&cfg),
        Command::Adv => {
            let report = advantage(&cfg.oracle()?, cfg.degree()?)?;
            write_json(&cfg, &report_json(&report))
        }
        Command::Corr => {
            let report = correlation(&cfg.oracle()?, cfg.degree()?)?;
            write_json(&cfg, &report_json(&report))
        }
        Command::CheckConditions => check_conditions(&cfg),
        Command::McCheck => mc_check(&cfg),
    }
}

/// JSON with sorted keys (serde_json maps are ordered) and a trailing newline.
fn write_json(cfg: &RunConfig, value: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))? + "\n";
    write_text(cfg.output.as_deref(), &text)
}

fn write_text(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::Io(e.to_string()))
}

fn report_json(report: &LdReport) -> Value {
    serde_json::to_value(report).expect("reports serialize")
}

fn templates(cfg: &RunConfig, degree: Option<usize>) -> CliResult<()> {
    let d = match degree {
        Some(d) => d,
        None => cfg.degree()?,
    };
    let list = if cfg.rooted { enumerate_rooted_templates(d)? } else { enumerate_templates(d)? };
    let rows: Vec<Vec<String>> = list
        .iter()
        .enumerate()
        .map(|(i, t)| {
            vec![
                i.to_string(),
                t.to_string(),
                t.vertex_count().to_string(),
                t.edge_count().to_string(),
                automorphism_count(t).to_string(),
            ]
        })
        .collect();
    let text = csv_text(&["index", "template", "vertices", "edges", "automorphisms"], &rows)?;
    write_text(cfg.output.as_deref(), &text)
}

fn gram(cfg: &RunConfig) -> CliResult<()> {
    let g = gram_matrix(&cfg.oracle()?, cfg.degree()?, cfg.rooted)?;
    write_json(cfg, &g.to_json())
}

fn spectrum_cmd(cfg: &RunConfig) -> CliResult<()> {
    let (matrix, source) = match &cfg.gram_file {
        Some(path) => {
            let doc: Value = serde_json::from_str(&read_text(path)?)
                .map_err(|e| LdError::Validation(format!("{} is not valid JSON: {e}", path.display())))?;
            let source = json!({"D": doc["D"], "model": doc["model"], "rooted": doc["rooted"]});
            (float_matrix_from_json(&doc)?, source)
        }
        None => {
            let g = gram_matrix(&cfg.oracle()?, cfg.degree()?, cfg.rooted)?;
            let source = json!({"D": g.degree, "model": g.model, "rooted": g.rooted});
            (g.float_matrix(), source)
        }
    };
    let s = spectrum(&matrix)?;
    if let Some(path) = &cfg.csv {
        let rows: Vec<Vec<String>> =
            s.eigenvalues.iter().enumerate().map(|(i, e)| vec![i.to_string(), e.to_string()]).collect();
        std::fs::write(path, csv_text(&["index", "eigenvalue"], &rows)?)?;
    }
    let mut out = serde_json::to_value(&s).expect("spectrum serializes");
    out["near_orthonormal"] = json!(s.op_norm_deviation < 1.0);
    out["source"] = source;
    write_json(cfg, &out)
}

fn check_conditions(cfg: &RunConfig) -> CliResult<()> {
    let oracle = cfg.oracle()?;
    let d = cfg.degree()?;
    let consts = cfg.constants(oracle.model())?;
    let which: Vec<Condition> = match cfg.get("conditions") {
        Some(list) => list.split(',').map(str::parse).collect::<Result<_>>()?,
        None => vec![Condition::Signal, Condition::Moment, Condition::Variance, Condition::VariancePermutation],
    };
    let mut reports: Vec<ConditionReport> = Vec::new();
    for c in which {
        reports.push(check_condition_with(&oracle, d, c, &consts, cfg.max_pattern_nodes()?)?);
    }
    let all_hold = reports.iter().all(|r| r.holds);
    write_json(cfg, &json!({"all_hold": all_hold, "reports": reports}))
}

fn mc_check(cfg: &RunConfig) -> CliResult<()> {
    let oracle = cfg.oracle()?;
    let comparisons = cross_check(&oracle, cfg.degree()?, cfg.samples()?, cfg.seed()?)?;
    let rows: Vec<Vec<String>> = comparisons
        .iter()
        .map(|c| {
            vec![
                c.quantity.clone(),
                c.analytic.to_string(),
                c.empirical.to_string(),
                c.std_error.to_string(),
                format!("{:.4}", c.z_score),
            ]
        })
        .collect();
    let text = csv_text(&["quantity", "analytic", "empirical", "std_error", "z_score"], &rows)?;
    let path = cfg.csv.as_deref().or(cfg.output.as_deref());
    write_text(path, &text)?;
    let worst = comparisons.iter().map(|c| c.z_score.abs()).fold(0.0, f64::max);
    eprintln!("ldgram: {} comparisons, max |z| = {worst:.3}", comparisons.len());
    Ok(())
}
