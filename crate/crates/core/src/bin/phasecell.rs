use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use phasecell::error::Error;
use phasecell::report::{error_document, Format, Report};
use phasecell::scenario::{Experiment, Scenario};
use serde_json::json;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Verb {
    States,
    Projector,
    Evolve,
    Closeness,
    Probabilities,
    Audit,
    Regime,
    Scaling,
}

impl From<Verb> for Experiment {
    fn from(v: Verb) -> Self {
        match v {
            Verb::States => Experiment::States,
            Verb::Projector => Experiment::Projector,
            Verb::Evolve => Experiment::Evolve,
            Verb::Closeness => Experiment::Closeness,
            Verb::Probabilities => Experiment::Probabilities,
            Verb::Audit => Experiment::Audit,
            Verb::Regime => Experiment::Regime,
            Verb::Scaling => Experiment::Scaling,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Run one phase-space cell experiment described by a scenario file.
///
/// Exit status: 0 when every prediction is met, 2 when the input is
/// rejected, 3 when a computation fails or misses its tolerance.
#[derive(Debug, Parser)]
#[command(name = "phasecell", version)]
struct Cli {
    verb: Verb,
    /// Scenario JSON document.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the scenario's `output.dir`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table format; defaults to the scenario's `output.format`, then csv.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Seed for randomized test operators.
    #[arg(long)]
    seed: Option<u64>,
}

const VALIDATION: u8 = 2;
const NUMERICAL: u8 = 3;

fn emit_error(doc: &serde_json::Value, out: Option<&Path>) {
    let text = serde_json::to_string_pretty(doc).unwrap_or_default();
    eprintln!("{text}");
    if let Some(dir) = out {
        if fs::create_dir_all(dir).is_ok() {
            let _ = fs::write(dir.join("error.json"), format!("{text}\n"));
        }
    }
}

fn fail(err: &Error, out: Option<&Path>) -> ExitCode {
    emit_error(&error_document(err), out);
    ExitCode::from(if err.is_validation() { VALIDATION } else { NUMERICAL })
}

fn print_summary(report: &Report) {
    for r in &report.rows {
        println!(
            "{} {} [{}] measured {:.6e} predicted {:.6e}",
            if r.passed() { "PASS" } else { "FAIL" },
            r.quantity,
            r.equation,
            r.measured,
            r.predicted
        );
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            emit_error(&json!({ "error": { "kind": "usage", "message": e.kind().to_string() } }), None);
            return ExitCode::from(VALIDATION);
        }
    };
    let scenario = match Scenario::from_path(&cli.config) {
        Ok(s) => s,
        Err(e) => return fail(&e, cli.out.as_deref()),
    };
    let out = cli.out.clone().or_else(|| scenario.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let format = match cli.format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Json) => Format::Json,
        None => scenario.output.format.unwrap_or_default(),
    };
    let result = scenario.resolve_experiment(Some(cli.verb.into())).and_then(|experiment| scenario.run(experiment, cli.seed));
    let report = match result {
        Ok(r) => r,
        Err(e) => return fail(&e, Some(&out)),
    };
    if let Err(e) = report.write(&out, format) {
        return fail(&e, Some(&out));
    }
    print_summary(&report);
    let failures = report.failures();
    if failures.is_empty() {
        let _ = fs::remove_file(out.join("error.json"));
        return ExitCode::SUCCESS;
    }
    let names: Vec<String> = failures.iter().map(|r| format!("{} [{}]", r.quantity, r.equation)).collect();
    let doc = json!({
        "error": {
            "kind": "tolerance",
            "message": format!("{} of {} predictions outside tolerance", failures.len(), report.rows.len()),
            "failed": names,
        }
    });
    emit_error(&doc, Some(&out));
    ExitCode::from(NUMERICAL)
}
