use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use quasiband::cli_io::output::{json_text, Stamp};
use quasiband::cli_io::{run_invariant_suite, run_stages, RunConfig, Stage};
use quasiband::error::{Error, Result};

#[derive(Parser)]
#[command(
    name = "quasiband",
    version,
    about = "Hartree-Fock bands and quasiparticle levels for soft-Coulomb model systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for per-k and per-frequency work.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized fixtures (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run the stages listed in the config.
    Run,
    /// Full-CI oracle only.
    Oracle,
    /// Hartree-Fock band structure.
    Bands,
    /// Quasiparticle reference points (runs bands first).
    Quasiparticle,
    /// Free and dressed Green functions (runs the Γ-point SCF first).
    Dyson,
    /// Charged vector-boson mass spectrum and hydrogen-like basis.
    Spectrum,
    /// Run the invariant suite.
    Verify,
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    emit(serde_json::json!({ "error": kind, "message": message }), code)
}

fn emit(error: serde_json::Value, code: u8) -> ExitCode {
    eprintln!("{error}");
    ExitCode::from(code)
}

fn load_config(cli: &Cli, required: bool) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None if required => {
            return Err(Error::Config {
                path: String::new(),
                message: "--config is required for this command".into(),
            })
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn output_dir(cli: &Cli, config: &RunConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("quasiband-out"))
}

fn verify(config: &RunConfig, out: &Path) -> Result<bool> {
    let report = run_invariant_suite(config.seed)?;
    std::fs::create_dir_all(out)?;
    let text = json_text(&Stamp::new(config.hash()), &report)?;
    std::fs::write(out.join("verify.json"), &text)?;
    print!("{text}");
    Ok(report.passed)
}

fn execute(cli: &Cli) -> Result<ExitCode> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("cannot configure thread pool: {e}")))?;
    }
    let config = load_config(cli, !matches!(cli.command, Command::Verify))?;
    let out = output_dir(cli, &config);
    let stages = match cli.command {
        Command::Verify => {
            return Ok(if verify(&config, &out)? {
                ExitCode::SUCCESS
            } else {
                fail("verification_failed", "one or more invariant checks failed", 3)
            })
        }
        Command::Run => config.stages.clone(),
        Command::Oracle => vec![Stage::Oracle],
        Command::Bands => vec![Stage::Bands],
        Command::Quasiparticle => vec![Stage::Quasiparticle],
        Command::Dyson => vec![Stage::Dyson],
        Command::Spectrum => vec![Stage::Spectrum],
    };
    let report = run_stages(&config, &stages, &out)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.degraded {
        let failed: Vec<&str> = report
            .stages
            .iter()
            .filter(|r| r.status != quasiband::cli_io::StageStatus::Ok)
            .map(|r| r.stage.name())
            .collect();
        return Ok(fail(
            "degraded",
            &format!("stages did not complete: {}", failed.join(", ")),
            2,
        ));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim(), 64),
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(Error::Config { path, message }) => emit(
            serde_json::json!({ "error": "config", "message": message, "path": path }),
            1,
        ),
        Err(e) => fail(e.kind(), &e.to_string(), 1),
    }
}
