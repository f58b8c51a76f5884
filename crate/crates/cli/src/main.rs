use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use cspmi_cli::config::{CheckName, ModelKind, Overrides};
use cspmi_cli::pipeline::{Report, REPORT_FILE};
use cspmi_cli::{report, run_config_file, Stage};
use cspmi_core::Metric;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cspmi", version, about = "Co-occurrence statistics, embeddings and analogy-geometry checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the vocabulary and token stream.
    Ingest(RunArgs),
    /// Count window co-occurrences.
    Count(RunArgs),
    /// Export pair statistics.
    Stats(RunArgs),
    /// Factorize the shifted PMI matrix (exact or truncated models).
    Embed(RunArgs),
    /// Train SGNS embeddings.
    Train(RunArgs),
    /// Evaluate the analogy set.
    Eval(RunArgs),
    /// Run the check suite.
    Verify(RunArgs),
    /// Run every stage.
    Run(RunArgs),
    /// Print the text table for a finished run.
    Report {
        /// Output directory of the run, or its report.json.
        path: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory [default: $CSPMI_OUT/<config name>]
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    lowercase: bool,
    /// exact | truncated:<d> | sgns
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    analogy: Option<PathBuf>,
    #[arg(long)]
    metric: Option<Metric>,
    /// Comma-separated check names.
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<CheckName>>,
    #[arg(long)]
    pair_samples: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out_dir: self.out.clone(),
            workers: self.workers,
            window: self.window,
            min_count: self.min_count,
            lowercase: self.lowercase,
            model: self.model,
            analogy_path: self.analogy.clone(),
            metric: self.metric,
            checks: self.checks.clone(),
            pair_samples: self.pair_samples,
        }
    }
}

/// `Ok(false)` when the run completed but a check failed.
fn run_stage(args: &RunArgs, until: Stage, force_model: Option<fn(ModelKind) -> bool>) -> anyhow::Result<bool> {
    let mut o = args.overrides();
    if let Some(ok) = force_model {
        let model = match o.model {
            Some(m) => m,
            None => cspmi_cli::RunConfig::load(&args.config)?.model,
        };
        if !ok(model) {
            anyhow::bail!("[schema] model '{model}' is not valid for this subcommand");
        }
        o.model = Some(model);
    }
    let outcome = run_config_file(&args.config, o, until)?;
    eprintln!("wrote {}", outcome.out_dir.display());
    if let Some(rep) = &outcome.report {
        print!("{}", report::render_table(rep));
        if rep.checks.iter().any(|c| c.status == cspmi_core::theorem::Status::Fail) {
            eprintln!("one or more checks failed");
            return Ok(false);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(a) => run_stage(a, Stage::Ingest, None),
        Command::Count(a) => run_stage(a, Stage::Count, None),
        Command::Stats(a) => run_stage(a, Stage::Stats, None),
        Command::Embed(a) => run_stage(a, Stage::Embed, Some(|m| m != ModelKind::Sgns)),
        Command::Train(a) => run_stage(a, Stage::Embed, Some(|m| m == ModelKind::Sgns)),
        Command::Eval(a) => run_stage(a, Stage::Evaluate, None),
        Command::Verify(a) | Command::Run(a) => run_stage(a, Stage::Verify, None),
        Command::Report { path } => print_report(path).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn print_report(path: &std::path::Path) -> anyhow::Result<()> {
    let file = if path.is_dir() { path.join(REPORT_FILE) } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).with_context(|| format!("cannot read {}", file.display()))?;
    let rep: Report = serde_json::from_str(&text).with_context(|| format!("invalid report {}", file.display()))?;
    print!("{}", report::render_table(&rep));
    Ok(())
}
