use adagoal::envs::{
    build_bpi_ssp_hard, build_grid_mixture, build_hard_reset_free, build_two_room_grid, BpiSspParams, GridParams,
    MixtureParams, ResetFreeParams,
};
use adagoal::harness::{run_curriculum, run_experiment, verify_run_dir, RunConfig};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "adagoal", version, about = "Multi-goal exploration experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every seed of a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a sequence of radii 2, 4, ..., 2^f.
    Curriculum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        f: u32,
    },
    /// Check the PAC conditions for a stored seed directory.
    Verify {
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Write an environment as JSON.
    GenEnv {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Builder parameters as a JSON object; omitted fields take defaults.
        #[arg(long, default_value = "{}")]
        params: String,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Grid,
    ResetFree,
    BpiSsp,
    Mixture,
}

fn gen_env(kind: Kind, params: &str) -> Result<String> {
    let json = match kind {
        Kind::Grid => {
            let p: GridParams = serde_json::from_str(params).context("grid params")?;
            serde_json::to_string_pretty(&build_two_room_grid(&p)?.mdp)?
        }
        Kind::ResetFree => {
            let p: ResetFreeParams = serde_json::from_str(params).context("reset-free params")?;
            serde_json::to_string_pretty(&build_hard_reset_free(&p)?)?
        }
        Kind::BpiSsp => {
            let p: BpiSspParams = serde_json::from_str(params).context("bpi-ssp params")?;
            serde_json::to_string_pretty(&build_bpi_ssp_hard(&p)?)?
        }
        Kind::Mixture => {
            let p: MixtureParams = serde_json::from_str(params).context("mixture params")?;
            serde_json::to_string_pretty(&build_grid_mixture(&p)?)?
        }
    };
    Ok(json + "\n")
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = run_experiment(&cfg)?;
            for r in &report.results {
                let s = &r.summary;
                let verdict = s.pac.as_ref().map_or("-".to_string(), |p| p.verdict.to_string());
                println!(
                    "seed {:>4}  stopped_by={:?}  kappa={}  tau={}  |X|={}  pac={}  -> {}",
                    s.seed,
                    s.stopped_by,
                    s.kappa,
                    s.tau,
                    s.x.len(),
                    verdict,
                    r.dir.display()
                );
            }
            for (seed, msg) in &report.failures {
                eprintln!("seed {seed} failed: {msg}");
            }
            if !report.failures.is_empty() {
                bail!("{} seed(s) failed", report.failures.len());
            }
        }
        Cmd::Curriculum { config, f } => {
            let cfg = RunConfig::load(&config)?;
            let reports = run_curriculum(&cfg, f)?;
            let mut aborted = 0;
            for r in &reports {
                println!(
                    "seed {:>4}  stages={}  cumulative_tau={}  final |X|={}",
                    r.seed,
                    r.stages.len(),
                    r.cumulative_tau,
                    r.final_x.len()
                );
                if let Some(why) = &r.aborted {
                    eprintln!("seed {} aborted: {why}", r.seed);
                    aborted += 1;
                }
            }
            if aborted > 0 {
                bail!("{aborted} curriculum run(s) aborted");
            }
        }
        Cmd::Verify { run_dir } => {
            let v = verify_run_dir(&run_dir)?;
            println!("{}", serde_json::to_string_pretty(&v)?);
            if !v.verdict {
                bail!("PAC verdict is false");
            }
        }
        Cmd::GenEnv { kind, params, out } => {
            let json = gen_env(kind, &params)?;
            match out {
                Some(p) => std::fs::write(&p, json).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{json}"),
            }
        }
    }
    Ok(())
}
