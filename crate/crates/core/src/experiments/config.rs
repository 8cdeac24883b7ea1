//! Presets, `key=value` config files and their resolution into experiments.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DiagnosticsChain, ExperimentKind, ExperimentSpec, ProtocolKind, RunConfig};
use crate::error::{Error, Result};
use crate::loss::LossConfig;
use crate::protocols::SpectralProtocol;
use crate::spin_chain::Coupling;
use crate::training::{AdamConfig, LossMode, ParamRange, SamplingMode, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Small axes and 500 epochs; minutes per sweep.
    #[default]
    Desk,
    /// Full axes, 2500 epochs and up to 2·10⁴ samples.
    Paper,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }
}

/// User overrides; unset fields fall back to the preset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub preset: Option<Preset>,
    pub l: Option<usize>,
    pub protocol: Option<Vec<ProtocolKind>>,
    pub m: Option<Vec<usize>>,
    pub m_index: Option<Vec<usize>>,
    pub samples: Option<Vec<usize>>,
    pub hidden: Option<Vec<usize>>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub split: Option<f64>,
    pub lr: Option<f64>,
    pub gamma: Option<f64>,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub threads: Option<usize>,
    pub sampling: Option<SamplingMode>,
    pub supervised: Option<bool>,
    pub eval_points: Option<usize>,
    pub j1: Option<Vec<f64>>,
    pub delta: Option<f64>,
    pub bins: Option<usize>,
    pub out: Option<PathBuf>,
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| Error::Config(format!("{key}: {e}"))))
        .collect()
}

fn one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| Error::Config(format!("{key}: {e}")))
}

fn sampling(value: &str) -> Result<SamplingMode> {
    match value.trim().to_ascii_lowercase().as_str() {
        "grid" => Ok(SamplingMode::Grid),
        "uniform" => Ok(SamplingMode::Uniform),
        other => Err(Error::Config(format!("unknown sampling mode {other:?}"))),
    }
}

impl Settings {
    /// Sets one field from its flag name (`-` and `_` are interchangeable).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = key.trim().trim_start_matches("--").replace('_', "-");
        match k.as_str() {
            "preset" => self.preset = Some(one(&k, value)?),
            "l" => self.l = Some(one(&k, value)?),
            "protocol" => self.protocol = Some(list(&k, value)?),
            "m" => self.m = Some(list(&k, value)?),
            "m-index" => self.m_index = Some(list(&k, value)?),
            "samples" => self.samples = Some(list(&k, value)?),
            "hidden" => self.hidden = Some(list(&k, value)?),
            "epochs" => self.epochs = Some(one(&k, value)?),
            "batch-size" => self.batch_size = Some(one(&k, value)?),
            "split" => self.split = Some(one(&k, value)?),
            "lr" => self.lr = Some(one(&k, value)?),
            "gamma" => self.gamma = Some(one(&k, value)?),
            "seed" => self.seed = Some(one(&k, value)?),
            "reps" => self.reps = Some(one(&k, value)?),
            "threads" => self.threads = Some(one(&k, value)?),
            "sampling" => self.sampling = Some(sampling(value)?),
            "supervised" => self.supervised = Some(one(&k, value)?),
            "eval-points" => self.eval_points = Some(one(&k, value)?),
            "j1" => self.j1 = Some(list(&k, value)?),
            "delta" => self.delta = Some(one(&k, value)?),
            "bins" => self.bins = Some(one(&k, value)?),
            "out" => self.out = Some(PathBuf::from(value.trim())),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Flat `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Settings> {
        let mut s = Settings::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            s.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Settings> {
        Settings::parse(&std::fs::read_to_string(path)?)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overridden_by(self, over: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            preset, l, protocol, m, m_index, samples, hidden, epochs, batch_size, split, lr, gamma, seed,
            reps, threads, sampling, supervised, eval_points, j1, delta, bins, out
        )
    }

    /// Preset defaults for `kind`, then every set field.
    pub fn resolve(&self, kind: ExperimentKind) -> Result<ExperimentSpec> {
        use ExperimentKind::*;
        let preset = self.preset.unwrap_or_default();
        let paper = preset == Preset::Paper;
        let sites = self.l.unwrap_or(match kind {
            Diagnostics if paper => 12,
            Diagnostics => 10,
            _ => 6,
        });
        let dim = 1usize << sites.min(20);
        let half = dim / 2;

        let epochs = match (kind, paper) {
            (TwoParam, false) => 200,
            (TwoParam, true) => 1000,
            (_, false) => 500,
            (_, true) => 2500,
        };
        let sample_sizes = match (kind, paper) {
            (SweepSpectrum | SweepM, true) => vec![1000, 10_000, 20_000],
            _ => vec![1000],
        };
        let m_indices = match (kind, paper) {
            (SweepSpectrum, false) => vec![1, 4, 8, 16, 24, 32],
            (SweepSpectrum, true) => (1..=half).collect(),
            (LearnabilityGap, _) => vec![1, half],
            _ => Vec::new(),
        };
        let states = match (kind, paper) {
            (SweepM, false) => vec![1, 2, 5, 10],
            (SweepM, true) => vec![1, 2, 3, 5, 10, 16, 32],
            (SweepHidden, false) => vec![5],
            (SweepHidden, true) => vec![2, 5, 10],
            (TwoParam, _) => vec![2, 10],
            _ => vec![5],
        };
        let widths = match (kind, paper) {
            (SweepSpectrum, false) => vec![16, 128],
            (SweepSpectrum, true) => vec![16, 32, 64, 128],
            (SweepHidden, false) => vec![8, 32, 128],
            (SweepHidden, true) => vec![8, 16, 32, 64, 128],
            (LearnabilityGap, false) => vec![2, 8, 32, 128],
            (LearnabilityGap, true) => vec![2, 8, 16, 32, 64, 128],
            _ => vec![128],
        };
        let protocols = match kind {
            SweepM | SweepHidden => vec![ProtocolKind::Low, ProtocolKind::Mid],
            SweepSpectrum | LearnabilityGap => vec![ProtocolKind::Single],
            Supervised => vec![ProtocolKind::Low],
            _ => vec![ProtocolKind::Low],
        };
        let repetitions = match kind {
            SweepSpectrum | SweepM | SweepHidden | LearnabilityGap => 3,
            _ => 1,
        };

        let mut states = self.m.clone().unwrap_or(states);
        let m_indices = self.m_index.clone().unwrap_or(m_indices);
        let widths = self.hidden.clone().unwrap_or(widths);
        let sample_sizes = self.samples.clone().unwrap_or(sample_sizes);
        let protocols = self.protocol.clone().unwrap_or(protocols);
        if kind == Supervised && self.m.is_none() {
            states = vec![2];
        }

        let first_protocol = protocols.first().copied().unwrap_or(ProtocolKind::Low);
        let protocol = match first_protocol {
            ProtocolKind::Single => SpectralProtocol::Single {
                index: m_indices.first().copied().unwrap_or(1),
            },
            p => p.with(states.first().copied().unwrap_or(1)),
        };
        let free = if kind == TwoParam {
            vec![Coupling::J1, Coupling::J2]
        } else {
            vec![Coupling::J1]
        };
        let mode = if kind == Supervised || self.supervised == Some(true) {
            LossMode::SupervisedTheta
        } else {
            LossMode::Rayleigh
        };
        let base = RunConfig {
            sites,
            range: ParamRange::uniform(free.len(), -2.0, 2.0),
            free,
            protocol,
            samples: sample_sizes.first().copied().unwrap_or(1000),
            sampling: self.sampling.unwrap_or(SamplingMode::Uniform),
            hidden: widths.last().copied().unwrap_or(128),
            train: TrainConfig {
                epochs: self.epochs.unwrap_or(epochs),
                batch_size: self.batch_size.unwrap_or(64),
                split_fraction: self.split.unwrap_or(0.7),
                optimizer: AdamConfig {
                    learning_rate: self.lr.unwrap_or(1e-3),
                    ..AdamConfig::default()
                },
                loss: LossConfig {
                    gamma: self.gamma.unwrap_or(0.1),
                    ..LossConfig::default()
                },
                mode,
                seed: self.seed.unwrap_or(0),
            },
        };
        let mut diagnostics = DiagnosticsChain::default();
        if let Some(j1) = &self.j1 {
            diagnostics.couplings = j1.clone();
        }
        if let Some(d) = self.delta {
            diagnostics.delta = d;
        }
        if let Some(b) = self.bins {
            diagnostics.bins = b;
        }
        let spec = ExperimentSpec {
            kind,
            base,
            protocols,
            m_indices,
            states,
            widths,
            sample_sizes,
            repetitions: self.reps.unwrap_or(repetitions),
            eval_points: self.eval_points.unwrap_or(if paper { 161 } else { 81 }),
            diagnostics,
            threads: self.threads.unwrap_or(1),
        };
        spec.validate()?;
        Ok(spec)
    }
}
