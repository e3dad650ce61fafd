use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use remlab_cli::args::{parse_betas, parse_box, parse_sizes};
use remlab_cli::config::max_n_from_env;
use remlab_cli::{cmd_compare, cmd_ldp_check, cmd_simulate, cmd_solve, cmd_sweep, load_spec, CliError};
use remlab_cli::{CellStatus, ExperimentConfig, NamedSpec};

#[derive(Parser)]
#[command(name = "remlab", version, about = "Random energy model experiments: variational free energies, exact enumeration, box diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Variational free energy per beta.
    Solve(Common),
    /// Per-replica (1/N) log Z from exact enumeration.
    Simulate(Common),
    /// Variational value against Monte-Carlo averages.
    Compare(Common),
    /// Empirical box masses with the predicted regime.
    LdpCheck(Common),
    /// Resumable grid of spec x beta x N cells.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Model spec file (repeatable).
    #[arg(long = "spec", required = true)]
    specs: Vec<PathBuf>,
    /// Comma list or start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    /// Comma list of system sizes.
    #[arg(long)]
    n: Option<String>,
    #[arg(long, default_value_t = 100)]
    replicas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; CSV goes to stdout without it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// compare: exit 1 if any |gap| exceeds this.
    #[arg(long)]
    threshold: Option<f64>,
    /// Final grid step of the variational solver, in rate units.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Box `a,b;c,d` (repeatable); bounds may be inf or -inf.
    #[arg(long = "box", allow_hyphen_values = true)]
    boxes: Vec<String>,
}

fn model_id(path: &std::path::Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let id: String = stem.chars().map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    if id.is_empty() {
        "model".into()
    } else {
        id
    }
}

fn build_config(c: &Common) -> Result<ExperimentConfig, CliError> {
    let mut specs = Vec::with_capacity(c.specs.len());
    let mut ids = BTreeSet::new();
    for path in &c.specs {
        let (spec, _) = load_spec(path)?;
        let id = model_id(path);
        if !ids.insert(id.clone()) {
            return Err(CliError::Usage(format!("two spec files share the model id {id:?}")));
        }
        specs.push(NamedSpec { id, spec });
    }
    let mut cfg = ExperimentConfig::new(specs);
    if let Some(b) = &c.beta {
        cfg.betas = parse_betas(b).map_err(|e| CliError::Usage(format!("--beta: {e}")))?;
    }
    if let Some(n) = &c.n {
        cfg.n_list = parse_sizes(n).map_err(|e| CliError::Usage(format!("--n: {e}")))?;
    }
    cfg.boxes = c
        .boxes
        .iter()
        .map(|b| parse_box(b).map_err(|e| CliError::Usage(format!("--box: {e}"))))
        .collect::<Result<_, _>>()?;
    cfg.replicas = c.replicas;
    cfg.seed = c.seed;
    cfg.threshold = c.threshold;
    cfg.grid_step = c.grid_step;
    cfg.max_n = max_n_from_env(std::env::var("REMLAB_MAX_N").ok().as_deref())?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let (common, name) = match &cli.command {
        Command::Solve(c) => (c, "solve"),
        Command::Simulate(c) => (c, "simulate"),
        Command::Compare(c) => (c, "compare"),
        Command::LdpCheck(c) => (c, "ldp-check"),
        Command::Sweep(c) => (c, "sweep"),
    };
    let cfg = build_config(common)?;
    let out = match name {
        "solve" => cmd_solve(&cfg)?,
        "simulate" => cmd_simulate(&cfg)?,
        "compare" => cmd_compare(&cfg)?,
        "ldp-check" => cmd_ldp_check(&cfg)?,
        _ => {
            let dir = common.out.as_deref().ok_or_else(|| CliError::Usage("sweep needs --out".into()))?;
            let report = cmd_sweep(&cfg, dir)?;
            eprintln!(
                "sweep: {} computed, {} skipped, {} failed",
                report.count(CellStatus::Computed),
                report.count(CellStatus::Skipped),
                report.count(CellStatus::Failed)
            );
            return Ok(if report.count(CellStatus::Failed) > 0 { 3 } else { 0 });
        }
    };
    out.emit(common.out.as_deref())?;
    if out.threshold_violated {
        eprintln!("compare: |gap| exceeds the threshold");
        return Ok(1);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
