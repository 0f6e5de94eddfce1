use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scatbound_cli::config::ConfigFile;
use scatbound_cli::output::OutputDir;
use scatbound_cli::{
    cmd_alpha, cmd_bound, cmd_dual_at_alpha, cmd_localopt, cmd_validate, cmd_verify,
};
use scatbound_cli::{CommandSummary, Overrides, Profile, SweepConfig};
use scatbound_core::Polarization;

const EXIT_VALIDATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "scatbound",
    version,
    about = "Certified cross-section bounds for 2D lossless scatterers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file; its fields override the profile defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Built-in parameter set: `paper` or `ci`.
    #[arg(long, global = true)]
    profile: Option<Profile>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Restrict the sweep to one polarization (TE or TM); repeatable.
    #[arg(long = "polarization", global = true)]
    polarizations: Vec<Polarization>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// α_ub, the dual bound at α_ub and the local-optimization baseline.
    Bound,
    /// α_ub and the α_loc restart distribution.
    Alpha,
    /// Multi-start local maximization of the cross-section.
    Localopt,
    /// −d(α) over an α grid, or at α_ub / α_loc.
    DualAtAlpha,
    /// Series, convergence, calibration and gradient self-checks.
    Validate,
    /// Re-verify stored certificates (a file, a run directory or its certs/).
    Verify { path: Option<PathBuf> },
}

fn resolve(cli: &Cli) -> anyhow::Result<SweepConfig> {
    let file: Option<ConfigFile> = cli.config.as_deref().map(SweepConfig::load).transpose()?;
    let overrides = Overrides {
        profile: cli.profile,
        seed: cli.seed,
        polarizations: (!cli.polarizations.is_empty()).then(|| cli.polarizations.clone()),
    };
    SweepConfig::resolve(file, &overrides)
}

fn report(summary: &CommandSummary) -> u8 {
    println!(
        "{}: {} cells, {} rows, {} failed -> {}",
        summary.command,
        summary.cells,
        summary.rows,
        summary.failed_cells,
        summary.csv.display()
    );
    summary.exit_code() as u8
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let config = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return Ok(EXIT_CONFIG);
        }
    };
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let code = match &cli.command {
        Command::Bound => report(&cmd_bound(&config, &cli.out)?),
        Command::Alpha => report(&cmd_alpha(&config, &cli.out)?),
        Command::Localopt => report(&cmd_localopt(&config, &cli.out)?),
        Command::DualAtAlpha => report(&cmd_dual_at_alpha(&config, &cli.out)?),
        Command::Validate => {
            let r = cmd_validate(config.seed)?;
            for c in &r.checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!(
                    "{tag} {:<32} {:.3e} (limit {:.1e})  {}",
                    c.name, c.value, c.threshold, c.detail
                );
            }
            OutputDir::create(&cli.out)?.write_json("validate.json", &r)?;
            if r.passed() {
                0
            } else {
                EXIT_VALIDATION
            }
        }
        Command::Verify { path } => {
            let s = cmd_verify(path.as_deref().unwrap_or(&cli.out))?;
            for r in s.rows.iter().filter(|r| !r.passed) {
                println!("FAIL {} {}", r.file, r.error);
            }
            println!(
                "verified {} certificates, {} failed",
                s.rows.len(),
                s.failed()
            );
            s.exit_code() as u8
        }
    };
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(EXIT_PARTIAL) => {
            eprintln!("some cells failed; see the status and note columns");
            ExitCode::from(EXIT_PARTIAL)
        }
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
