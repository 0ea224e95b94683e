//! Argument parsing and dispatch for the `symvmc` binary.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::commands;
use crate::config::{ExperimentConfig, Mode};
use crate::error::{AppError, Result};

#[derive(Debug, Parser)]
#[command(name = "symvmc", version, about = "Symmetrized variational Monte Carlo on periodic toy systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Experiment config (TOML or JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Run directory; defaults to `output` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `method.mode` (og, da, ga, gas, pa, sc, pc).
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, clap::Args)]
pub struct WithCheckpoint {
    #[command(flatten)]
    pub common: Common,
    /// Parameters to load; the initial ansatz when absent.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact non-interacting spectrum.
    Oracle(Common),
    /// Train and write metrics and checkpoints.
    Train(Common),
    /// Energy and local-energy variance of a checkpoint.
    Evaluate(WithCheckpoint),
    /// Translation scan of log|psi|^2 and its symmetry-error map.
    Scan(WithCheckpoint),
    /// Replicated update distributions at frozen parameters.
    Gradstats(WithCheckpoint),
    /// Smoothing derivative maxima and local-energy deviation per epsilon.
    ProbeSmoothing(WithCheckpoint),
}

pub fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(m) = &c.method {
        cfg.method.mode = Mode::parse(m).ok_or_else(|| AppError::Config(format!("--method: unknown method `{m}`")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(c: &Common, cfg: &ExperimentConfig) -> Result<PathBuf> {
    c.out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .ok_or_else(|| AppError::Config("output: no run directory (give --out or `output`)".into()))
}

fn logger(quiet: bool) -> impl FnMut(&str) {
    move |msg: &str| {
        if !quiet {
            eprintln!("{msg}");
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Oracle(c) => {
            let cfg = load_config(&c)?;
            let out = c.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from));
            let report = commands::oracle(&cfg, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Train(c) => {
            let cfg = load_config(&c)?;
            let out = out_dir(&c, &cfg)?;
            let mut log = logger(c.quiet);
            let s = commands::train(&cfg, &out, &mut log)?;
            if let Some(e) = s.final_energy {
                log(&format!("trained {} steps, final batch energy {e:.6}", s.steps));
            }
        }
        Command::Evaluate(w) => {
            let (cfg, out, ansatz) = prepare(&w)?;
            let mode = cfg.method.mode;
            let r = commands::evaluate(&cfg, &ansatz, mode, Some(&out))?;
            logger(w.common.quiet)(&format!("{mode}: energy {:.8} +- {:.8}, variance {:.3e}", r.energy, r.stderr, r.variance));
        }
        Command::Scan(w) => {
            let (cfg, out, ansatz) = prepare(&w)?;
            let mode = cfg.method.mode;
            let s = commands::scan_command(&cfg, &ansatz, mode, Some(&out))?;
            logger(w.common.quiet)(&format!("{mode}: max symmetry error {:.3e}, {} nodes", s.max_error, s.nodes));
        }
        Command::Gradstats(w) => {
            let (cfg, out, ansatz) = prepare(&w)?;
            let r = commands::gradstats(&cfg, &ansatz, Some(&out))?;
            let mut log = logger(w.common.quiet);
            for m in &r.methods {
                log(&format!("{} N={}: norm {:.4e} +- {:.1e}", m.method, m.n, m.norm, m.norm_se));
            }
        }
        Command::ProbeSmoothing(w) => {
            let (cfg, out, ansatz) = prepare(&w)?;
            let rows = commands::probe_smoothing(&cfg, &ansatz, Some(&out))?;
            let mut log = logger(w.common.quiet);
            for r in &rows {
                log(&format!("{} eps={}: deviation {:.4e}", r.kind, r.epsilon, r.energy_deviation));
            }
        }
    }
    Ok(())
}

fn prepare(w: &WithCheckpoint) -> Result<(ExperimentConfig, PathBuf, symvmc_core::ansatz::Ansatz)> {
    let cfg = load_config(&w.common)?;
    let out = out_dir(&w.common, &cfg)?;
    let ansatz = commands::load_ansatz(&cfg, w.checkpoint.as_deref().map(Path::new))?;
    Ok((cfg, out, ansatz))
}
