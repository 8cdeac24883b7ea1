use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use eigenlearn::experiments::output::{rerun_from_manifest, run_and_emit};
use eigenlearn::experiments::{ExperimentKind, RunCache, Settings};

/// Learn spin-chain couplings from eigenstates.
#[derive(Parser)]
#[command(name = "eigenlearn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset and write it in binary form.
    Generate(Common),
    /// Entanglement, participation entropy and density of states of full spectra.
    Diagnostics(Common),
    /// Train one encoder.
    Train(Common),
    /// Single-state training across the spectrum.
    SweepSpectrum(Common),
    /// Low and mid blocks of increasing size.
    SweepM(Common),
    /// Encoder width sweep.
    SweepHidden(Common),
    /// Full-domain versus holed-domain training.
    Generalize(Common),
    /// Learnability gap over a capacity class.
    Gap(Common),
    /// Joint inference of J1 and J2.
    TwoParam(Common),
    /// Re-run an experiment from its manifest on one thread and compare hashes.
    Rerun {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Flags shared by all experiments. Lists are comma separated.
#[derive(Args, Default)]
struct Common {
    /// Flat key=value file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// desk or paper.
    #[arg(long)]
    preset: Option<String>,
    /// Number of sites.
    #[arg(long)]
    l: Option<String>,
    /// low, mid or single (comma separated for sweeps).
    #[arg(long)]
    protocol: Option<String>,
    /// Number of input eigenstates M.
    #[arg(long)]
    m: Option<String>,
    /// 1-based eigenstate index for the single protocol.
    #[arg(long = "m-index")]
    m_index: Option<String>,
    /// Dataset size N_sam.
    #[arg(long)]
    samples: Option<String>,
    /// Encoder width w_H.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long = "batch-size")]
    batch_size: Option<String>,
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    /// Weight of the diagonal residual (default 0.1).
    #[arg(long)]
    gamma: Option<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<String>,
    /// Seeds per configuration in sweeps.
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    /// grid or uniform.
    #[arg(long)]
    sampling: Option<String>,
    /// Train on the parameter MSE instead of the Rayleigh loss.
    #[arg(long)]
    supervised: bool,
    /// Grid size of the generalization evaluation.
    #[arg(long = "eval-points")]
    eval_points: Option<String>,
    /// J1 values for diagnostics.
    #[arg(long, allow_hyphen_values = true)]
    j1: Option<String>,
    /// Anisotropy for diagnostics.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<String>,
    /// Density-of-states bins.
    #[arg(long)]
    bins: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

impl Common {
    fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(p) => Settings::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => Settings::default(),
        };
        let mut flags = Settings::default();
        let pairs = [
            ("preset", &self.preset),
            ("l", &self.l),
            ("protocol", &self.protocol),
            ("m", &self.m),
            ("m-index", &self.m_index),
            ("samples", &self.samples),
            ("hidden", &self.hidden),
            ("epochs", &self.epochs),
            ("batch-size", &self.batch_size),
            ("split", &self.split),
            ("lr", &self.lr),
            ("gamma", &self.gamma),
            ("seed", &self.seed),
            ("reps", &self.reps),
            ("threads", &self.threads),
            ("sampling", &self.sampling),
            ("eval-points", &self.eval_points),
            ("j1", &self.j1),
            ("delta", &self.delta),
            ("bins", &self.bins),
            ("out", &self.out),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                flags.set(key, v)?;
            }
        }
        if self.supervised {
            flags.supervised = Some(true);
        }
        s = s.overridden_by(flags);
        Ok(s)
    }
}

fn run(kind: ExperimentKind, common: &Common) -> Result<()> {
    let settings = common.settings()?;
    let spec = settings.resolve(kind)?;
    let out = settings
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("results").join(kind.name()));
    let manifest = run_and_emit(&spec, &RunCache::new(), &out)?;
    for f in &manifest.outputs {
        println!("{}  {}", f.sha256, out.join(&f.path).display());
    }
    eprintln!("{} runs in {:.1} s", manifest.runs.len(), manifest.wall_clock_secs);
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Generate(c) => run(ExperimentKind::Generate, c),
        Command::Diagnostics(c) => run(ExperimentKind::Diagnostics, c),
        Command::Train(c) => {
            let kind = if c.supervised {
                ExperimentKind::Supervised
            } else {
                ExperimentKind::Train
            };
            run(kind, c)
        }
        Command::SweepSpectrum(c) => run(ExperimentKind::SweepSpectrum, c),
        Command::SweepM(c) => run(ExperimentKind::SweepM, c),
        Command::SweepHidden(c) => run(ExperimentKind::SweepHidden, c),
        Command::Generalize(c) => run(ExperimentKind::GeneralizationHole, c),
        Command::Gap(c) => run(ExperimentKind::LearnabilityGap, c),
        Command::TwoParam(c) => run(ExperimentKind::TwoParam, c),
        Command::Rerun { manifest, out } => {
            let replay = rerun_from_manifest(manifest, out)?;
            for (path, before, after) in &replay.files {
                let tag = if before == after { "same" } else { "DIFFERS" };
                println!("{tag}  {path}");
            }
            if !replay.identical() {
                bail!("outputs differ from the manifest");
            }
            Ok(())
        }
    }
}
