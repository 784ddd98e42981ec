use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use lightray::checks::CheckConfig;
use lightray::Tolerances;
use lightray_cli::commands::{run, CommandName, Context};
use lightray_cli::envelope::ResultEnvelope;
use lightray_cli::scene::SceneConfig;
use lightray_cli::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Light rays, skies and causal isotopies on Lorentzian space-times.
#[derive(Debug, Parser)]
#[command(name = "lightray", version)]
struct Cli {
    #[arg(value_enum)]
    command: CommandName,
    /// Scene file (JSON); built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Integrator tolerance, used as both relative and absolute.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, env = "LIGHTRAY_THREADS")]
    threads: Option<usize>,
    /// Seed for random probes.
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(cli: &Cli) -> Result<ResultEnvelope, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let mut scene = match &cli.config {
        Some(p) => SceneConfig::load(p)?,
        None => SceneConfig::default(),
    };
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Usage(format!("--tol must be positive, got {t}")));
        }
        scene.tolerances = Tolerances {
            rtol: t,
            atol: t,
            ..scene.tolerances
        };
    }
    let seed = cli.seed.unwrap_or(CheckConfig::default().seed);
    let ctx = Context::new(scene, seed)?;
    run(cli.command, &ctx)
}

fn emit(cli: &Cli, env: &ResultEnvelope) -> Result<(), CliError> {
    let path = cli.out.clone().or_else(|| {
        cli.config
            .as_ref()
            .and_then(|_| SceneConfig::load(cli.config.as_ref()?).ok()?.output.path)
    });
    let sink: Box<dyn Write> = match &path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match cli.format {
        Format::Json => env.write_json(sink),
        Format::Csv => env.write_csv(sink),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(&cli).and_then(|env| {
        emit(&cli, &env)?;
        Ok(env)
    });
    match result {
        Ok(env) => {
            for c in env.checks.iter().filter(|c| !c.passed) {
                eprintln!("check failed: {} ({:.3e} vs {:.1e})", c.name, c.residual, c.threshold);
            }
            ExitCode::from(if env.all_passed() { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("lightray: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
