//! Experiment suites over the training harness.
//!
//! Every experiment expands into independent training runs, executes them
//! (optionally in parallel) and reduces them into CSV tables whose rows are
//! sorted by their axis keys.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{density_of_states, DiagnosticsRecord};
use crate::eigensolver::diagonalize;
use crate::encoder::{init_params, write_checkpoint, EncoderParams};
use crate::error::{Error, Result};
use crate::protocols::SpectralProtocol;
use crate::seeds::{repetition_seed, SeedSet};
use crate::spin_chain::{apply_symmetry_breaking, build_hamiltonian, Coupling, LatentSpec, SpinChainParams};
use crate::stats::{mean, std_dev};
use crate::training::{
    evaluate, generate_dataset, loss_decreased, run_training, sample_parameters, Dataset, History, Interval,
    LossMode, ParamRange, SamplingMode, TrainConfig,
};

pub mod config;
pub mod output;

pub use config::{Preset, Settings};
pub use output::{emit_results, rerun_from_manifest, OutputFile, RunManifest, RunRecord, Table};

/// Everything that determines one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub sites: usize,
    pub free: Vec<Coupling>,
    pub protocol: SpectralProtocol,
    pub samples: usize,
    pub range: ParamRange,
    pub sampling: SamplingMode,
    pub hidden: usize,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn spec(&self) -> Result<LatentSpec> {
        LatentSpec::new(self.free.clone(), SpinChainParams::reference(self.sites)?)
    }

    pub fn seeds(&self) -> SeedSet {
        SeedSet::from_master(self.train.seed)
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.spec()?;
        self.protocol.validate(1 << self.sites)?;
        self.range.validate()?;
        if self.range.theta_dim() != spec.theta_dim() {
            return Err(Error::Config(format!(
                "range has {} axes for {} free couplings",
                self.range.theta_dim(),
                spec.theta_dim()
            )));
        }
        if self.samples < 2 || self.hidden == 0 {
            return Err(Error::Config("need at least 2 samples and a positive width".into()));
        }
        self.train.validate()
    }

    /// Identity of the run; `Low{1}` and `Single{1}` select the same state.
    pub fn cache_key(&self) -> String {
        let mut c = self.clone();
        if c.protocol == (SpectralProtocol::Low { states: 1 }) {
            c.protocol = SpectralProtocol::Single { index: 1 };
        }
        serde_json::to_string(&c).expect("config serializes")
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.train.seed = seed;
        c
    }
}

/// Final numbers of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalLosses {
    pub train_rayleigh: f64,
    pub val_rayleigh: f64,
    pub val_theta: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub seeds: SeedSet,
    pub params: EncoderParams<f32>,
    pub history: History,
    pub last: FinalLosses,
    pub elapsed_secs: f64,
}

/// Samples the dataset of a run from its sample seed.
pub fn run_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let thetas = sample_parameters(&cfg.range, cfg.samples, cfg.sampling, cfg.seeds().sample)?;
    generate_dataset(&thetas, &cfg.spec()?, cfg.protocol)
}

pub fn execute_run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let seeds = cfg.seeds();
    let ds = run_dataset(cfg)?;
    let init = init_params(ds.states(), cfg.hidden, ds.theta_dim, seeds.init)?;
    let out = run_training(&ds, &cfg.train, init)?;
    let rec = *out.history.last().expect("at least one epoch");
    Ok(RunOutcome {
        config: cfg.clone(),
        seeds,
        params: out.params,
        last: FinalLosses {
            train_rayleigh: rec.train_rayleigh,
            val_rayleigh: rec.val_rayleigh,
            val_theta: rec.val_theta,
        },
        history: out.history,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

type Slot = Arc<OnceLock<std::result::Result<Arc<RunOutcome>, String>>>;

/// Memo of finished runs keyed by [`RunConfig::cache_key`].
///
/// Concurrent requests for the same key wait for a single execution.
#[derive(Default)]
pub struct RunCache {
    slots: Mutex<HashMap<String, Slot>>,
}

impl RunCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_run(&self, cfg: &RunConfig) -> Result<Arc<RunOutcome>> {
        let slot = {
            let mut map = self.slots.lock().expect("cache lock");
            map.entry(cfg.cache_key()).or_default().clone()
        };
        slot.get_or_init(|| execute_run(cfg).map(Arc::new).map_err(|e| e.to_string()))
            .clone()
            .map_err(Error::RunFailed)
    }

    pub fn len(&self) -> usize {
        self.slots.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Runs every config on a pool of `threads` workers; results keep input order.
pub fn run_all(configs: &[RunConfig], cache: &RunCache, threads: usize) -> Result<Vec<Arc<RunOutcome>>> {
    for c in configs {
        c.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| configs.par_iter().map(|c| cache.get_or_run(c)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Generate,
    Diagnostics,
    Train,
    Supervised,
    SweepSpectrum,
    SweepM,
    SweepHidden,
    GeneralizationHole,
    LearnabilityGap,
    TwoParam,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Generate => "generate",
            ExperimentKind::Diagnostics => "diagnostics",
            ExperimentKind::Train => "train",
            ExperimentKind::Supervised => "supervised",
            ExperimentKind::SweepSpectrum => "sweep_spectrum",
            ExperimentKind::SweepM => "sweep_m",
            ExperimentKind::SweepHidden => "sweep_hidden",
            ExperimentKind::GeneralizationHole => "generalization_hole",
            ExperimentKind::LearnabilityGap => "learnability_gap",
            ExperimentKind::TwoParam => "two_param",
        }
    }
}

/// Protocol family without its count or index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Low,
    Mid,
    Single,
}

impl ProtocolKind {
    pub fn with(self, parameter: usize) -> SpectralProtocol {
        match self {
            ProtocolKind::Low => SpectralProtocol::Low { states: parameter },
            ProtocolKind::Mid => SpectralProtocol::Mid { states: parameter },
            ProtocolKind::Single => SpectralProtocol::Single { index: parameter },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Low => "low",
            ProtocolKind::Mid => "mid",
            ProtocolKind::Single => "single",
        }
    }
}

impl std::str::FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Ok(ProtocolKind::Low),
            "mid" => Ok(ProtocolKind::Mid),
            "single" => Ok(ProtocolKind::Single),
            other => Err(Error::Protocol(format!("unknown protocol {other:?}"))),
        }
    }
}

/// Chain used by the diagnostics experiment (`J1` varies per spectrum).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsChain {
    pub couplings: Vec<f64>,
    pub j2: f64,
    pub delta: f64,
    pub hz: f64,
    pub gx: f64,
    pub bins: usize,
}

impl Default for DiagnosticsChain {
    fn default() -> Self {
        DiagnosticsChain {
            couplings: vec![-0.4, 0.4],
            j2: 0.5,
            delta: 0.5,
            hz: 0.5,
            gx: -0.2,
            bins: 50,
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Template run; sweeps overwrite the swept fields.
    pub base: RunConfig,
    pub protocols: Vec<ProtocolKind>,
    pub m_indices: Vec<usize>,
    pub states: Vec<usize>,
    pub widths: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    pub repetitions: usize,
    /// Grid size of the generalization evaluation.
    pub eval_points: usize,
    pub diagnostics: DiagnosticsChain,
    pub threads: usize,
}

fn check_axis(name: &str, values: &[usize], needed: bool) -> Result<()> {
    if needed && values.is_empty() {
        return Err(Error::Config(format!("{name} must not be empty")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("{name} must be strictly ascending")));
    }
    Ok(())
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        let k = self.kind;
        let sweeps = matches!(k, SweepSpectrum | SweepM | SweepHidden | LearnabilityGap | TwoParam);
        check_axis("m_indices", &self.m_indices, matches!(k, SweepSpectrum | LearnabilityGap))?;
        check_axis("states", &self.states, matches!(k, SweepM | SweepHidden | TwoParam))?;
        check_axis("widths", &self.widths, matches!(k, SweepSpectrum | SweepHidden | LearnabilityGap))?;
        check_axis("sample_sizes", &self.sample_sizes, matches!(k, SweepSpectrum | SweepM))?;
        if self.protocols.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("protocols must be distinct and ordered low, mid, single".into()));
        }
        if matches!(k, SweepM | SweepHidden) {
            if self.protocols.is_empty() {
                return Err(Error::Config("protocols must not be empty".into()));
            }
            if self.protocols.contains(&ProtocolKind::Single) {
                return Err(Error::Config("state-count sweeps take low or mid".into()));
            }
        }
        if sweeps && self.repetitions == 0 {
            return Err(Error::Config("repetitions must be positive".into()));
        }
        if k == GeneralizationHole && self.eval_points < 2 {
            return Err(Error::Config("need at least 2 evaluation points".into()));
        }
        if k == Diagnostics {
            if self.diagnostics.couplings.is_empty() {
                return Err(Error::Config("no couplings for diagnostics".into()));
            }
            return Ok(());
        }
        self.base.validate()
    }

    fn rep_seeds(&self) -> Vec<u64> {
        (0..self.repetitions)
            .map(|r| repetition_seed(self.base.train.seed, r))
            .collect()
    }
}

/// CSV tables and binary artifacts of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub tables: Vec<(String, Table)>,
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub runs: Vec<Arc<RunOutcome>>,
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub fn run_experiment(spec: &ExperimentSpec, cache: &RunCache) -> Result<ExperimentResult> {
    spec.validate()?;
    match spec.kind {
        ExperimentKind::Generate => generate(spec),
        ExperimentKind::Diagnostics => diagnostics(spec),
        ExperimentKind::Train => train(spec, cache, spec.base.clone()),
        ExperimentKind::Supervised => {
            let mut base = spec.base.clone();
            base.train.mode = LossMode::SupervisedTheta;
            train(spec, cache, base)
        }
        ExperimentKind::SweepSpectrum => sweep_spectrum(spec, cache),
        ExperimentKind::SweepM => sweep_num_states(spec, cache),
        ExperimentKind::SweepHidden => sweep_hidden(spec, cache),
        ExperimentKind::GeneralizationHole => generalization_hole(spec, cache),
        ExperimentKind::LearnabilityGap => learnability_gap(spec, cache),
        ExperimentKind::TwoParam => two_parameter_run(spec, cache),
    }
}

fn generate(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let ds = run_dataset(&spec.base)?;
    let mut header = vec!["sample".to_string()];
    for c in &spec.base.free {
        header.push(c.name().to_string());
    }
    header.extend(["first_index".into(), "first_energy".into()]);
    let mut table = Table::new(header);
    for (i, s) in ds.samples.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(s.theta.iter().map(|&t| fmt_f64(t)));
        row.push(s.indices[0].to_string());
        row.push(fmt_f64(s.energies[0]));
        table.push(row);
    }
    let mut bytes = Vec::new();
    ds.write(&mut bytes)?;
    Ok(ExperimentResult {
        tables: vec![("samples.csv".into(), table)],
        artifacts: vec![("dataset.eigd".into(), bytes)],
        runs: Vec::new(),
    })
}

fn diagnostics(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let d = &spec.diagnostics;
    let mut tables = Vec::new();
    for &j1 in &d.couplings {
        let params = apply_symmetry_breaking(&SpinChainParams::uniform(
            spec.base.sites,
            j1,
            d.j2,
            d.delta,
            d.hz,
            d.gx,
        )?)?;
        let spectrum = diagonalize(&build_hamiltonian(&params)?)?;
        let rec = DiagnosticsRecord::compute(&spectrum, spec.base.sites)?;
        let mut states = Table::new(["m_index", "index_norm", "energy_rescaled", "svn_norm", "spart_norm"]);
        for m in 0..rec.len() {
            states.push(vec![
                (m + 1).to_string(),
                fmt_f64(rec.index_norm[m]),
                fmt_f64(rec.energy_rescaled[m]),
                fmt_f64(rec.svn_norm[m]),
                fmt_f64(rec.spart_norm[m]),
            ]);
        }
        let hist = density_of_states(spectrum.energies.as_slice().expect("contiguous"), d.bins)?;
        let mut dos = Table::new(["energy_rescaled", "count"]);
        for (c, n) in hist.centers.iter().zip(&hist.counts) {
            dos.push(vec![fmt_f64(*c), n.to_string()]);
        }
        tables.push((format!("diagnostics_J1_{j1}.csv"), states));
        tables.push((format!("dos_J1_{j1}.csv"), dos));
    }
    Ok(ExperimentResult {
        tables,
        artifacts: Vec::new(),
        runs: Vec::new(),
    })
}

fn history_table(h: &History) -> Table {
    let mut t = Table::new(["epoch", "train_rayleigh", "val_rayleigh", "val_theta"]);
    for r in &h.records {
        t.push(vec![
            r.epoch.to_string(),
            fmt_f64(r.train_rayleigh),
            fmt_f64(r.val_rayleigh),
            fmt_f64(r.val_theta),
        ]);
    }
    t
}

fn train(spec: &ExperimentSpec, cache: &RunCache, base: RunConfig) -> Result<ExperimentResult> {
    let run = run_all(std::slice::from_ref(&base), cache, spec.threads)?.remove(0);
    let mut fin = Table::new([
        "protocol",
        "parameter",
        "w_H",
        "N_sam",
        "mode",
        "rayleigh_final",
        "val_rayleigh_final",
        "theta_loss_final",
    ]);
    fin.push(vec![
        base.protocol.label().into(),
        base.protocol.parameter().to_string(),
        base.hidden.to_string(),
        base.samples.to_string(),
        serde_json::to_value(base.train.mode)?.as_str().unwrap_or_default().into(),
        fmt_f64(run.last.train_rayleigh),
        fmt_f64(run.last.val_rayleigh),
        fmt_f64(run.last.val_theta),
    ]);
    let mut ckpt = Vec::new();
    write_checkpoint(&run.params, &mut ckpt)?;
    Ok(ExperimentResult {
        tables: vec![("history.csv".into(), history_table(&run.history)), ("final.csv".into(), fin)],
        artifacts: vec![("encoder.enc1".into(), ckpt)],
        runs: vec![run],
    })
}

fn final_cells(run: &RunOutcome) -> [String; 3] {
    [
        fmt_f64(run.last.train_rayleigh),
        fmt_f64(run.last.val_rayleigh),
        fmt_f64(run.last.val_theta),
    ]
}

const FINAL_COLUMNS: [&str; 3] = ["rayleigh_final", "val_rayleigh_final", "theta_loss_final"];

fn columns(keys: &[&str]) -> Vec<String> {
    keys.iter().chain(FINAL_COLUMNS.iter()).map(|s| s.to_string()).collect()
}

/// Single-state training across the spectrum.
pub fn sweep_spectrum(spec: &ExperimentSpec, cache: &RunCache) -> Result<ExperimentResult> {
    let mut keys = Vec::new();
    let mut configs = Vec::new();
    for &m in &spec.m_indices {
        for &w in &spec.widths {
            for &n in &spec.sample_sizes {
                for (r, &seed) in spec.rep_seeds().iter().enumerate() {
                    let mut c = spec.base.with_seed(seed);
                    c.protocol = SpectralProtocol::Single { index: m };
                    c.hidden = w;
                    c.samples = n;
                    keys.push(vec![m.to_string(), w.to_string(), n.to_string(), r.to_string()]);
                    configs.push(c);
                }
            }
        }
    }
    let runs = run_all(&configs, cache, spec.threads)?;
    let mut t = Table::new(columns(&["m_index", "w_H", "N_sam", "rep"]));
    for (k, run) in keys.into_iter().zip(&runs) {
        t.push(k.into_iter().chain(final_cells(run)).collect());
    }
    Ok(ExperimentResult {
        tables: vec![("sweep_spectrum.csv".into(), t)],
        artifacts: Vec::new(),
        runs,
    })
}

/// Low and mid blocks of increasing size at fixed width.
pub fn sweep_num_states(spec: &ExperimentSpec, cache: &RunCache) -> Result<ExperimentResult> {
    let mut keys = Vec::new();
    let mut configs = Vec::new();
    for &p in &spec.protocols {
        for &m in &spec.states {
            for &n in &spec.sample_sizes {
                for (r, &seed) in spec.rep_seeds().iter().enumerate() {
                    let mut c = spec.base.with_seed(seed);
                    c.protocol = p.with(m);
                    c.samples = n;
                    keys.push(vec![p.name().into(), m.to_string(), n.to_string(), r.to_string()]);
                    configs.push(c);
                }
            }
        }
    }
    let runs = run_all(&configs, cache, spec.threads)?;
    let mut t = Table::new(columns(&["protocol", "M", "N_sam", "rep"]));
    for (k, run) in keys.into_iter().zip(&runs) {
        t.push(k.into_iter().chain(final_cells(run)).collect());
    }
    Ok(ExperimentResult {
        tables: vec![("sweep_m.csv".into(), t)],
        artifacts: Vec::new(),
        runs,
    })
}

/// Encoder width sweep per protocol and block size.
pub fn sweep_hidden(spec: &ExperimentSpec, cache: &RunCache) -> Result<ExperimentResult> {
    let mut keys = Vec::new();
    let mut configs = Vec::new();
    for &p in &spec.protocols {
        for &w in &spec.widths {
            for &m in &spec.states {
                for (r, &seed) in spec.rep_seeds().iter().enumerate() {
                    let mut c = spec.base.with_seed(seed);
                    c.protocol = p.with(m);
                    c.hidden = w;
                    keys.push(vec![p.name().into(), w.to_string(), m.to_string(), r.to_string()]);
                    configs.push(c);
                }
            }
        }
    }
    let runs = run_all(&configs, cache, spec.threads)?;
    let mut t = Table::new(columns(&["protocol", "w_H", "M", "rep"]));
    for (k, run) in keys.into_iter().zip(&runs) {
        t.push(k.into_iter().chain(final_cells(run)).collect());
    }
    Ok(ExperimentResult {
        tables: vec![("sweep_hidden.csv".into(), t)],
        artifacts: Vec::new(),
        runs,
    })
}

/// Training domain with the interval `(-1, 0.5)` removed.
pub fn holed_range() -> ParamRange {
    ParamRange::union(vec![Interval::new(-2.0, -1.0), Interval::new(0.5, 2.0)])
}

/// Full-domain and holed-domain training, evaluated on a dense grid.
pub fn generalization_hole(spec: &ExperimentSpec, cache: &RunCache) -> Result<ExperimentResult> {
    if spec.base.free != [Coupling::J1] {
        return Err(Error::Config("the hole experiment varies J1 alone".into()));
    }
    let mut full = spec.base.clone();
    full.range = ParamRange::uniform(1, -2.0, 2.0);
    let mut holed = spec.base.clone();
    holed.range = holed_range();
    let runs = run_all(&[full.clone(), holed], cache, spec.threads)?;
    let grid = sample_parameters(&full.range, spec.eval_points, SamplingMode::Grid, 0)?;
    let spec_latent = full.spec()?;
    let eval_ds = generate_dataset(&grid, &spec_latent, full.protocol)?;
    let all: Vec<usize> = (0..eval_ds.len()).collect();
    let mut t = Table::new(["domain_tag", "J1", "theta_loss", "delta_E"]);
    for (tag, run) in ["full", "holed"].iter().zip(&runs) {
        let ev = evaluate(&run.params, &eval_ds, &all, &full.train.loss, Some(&spec_latent))?;
        for s in &ev.samples {
            t.push(vec![
                tag.to_string(),
                fmt_f64(s.theta_true[0]),
                fmt_f64(s.theta_loss),
                fmt_f64(s.spectral_error.expect("spectral metrics requested")),
            ]);
        }
    }
    Ok(ExperimentResult {
        tables: vec![("generalization.csv".into(), t)],
        artifacts: Vec::new(),
        runs,
    })
}

/// `L(w_min) − min_w L(w)` with losses ordered by ascending capacity.
pub fn gap_from_losses(losses: &[f64]) -> f64 {
    match losses.first() {
        Some(&base) => base - losses.iter().copied().fold(f64::INFINITY, f64::min),
        None => f64::NAN,
    }
}

/// Gap statistics at one spectral position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub m_index: usize,
    /// One gap per repetition.
    pub gaps: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl GapRecord {
    pub fn from_gaps(m_index: usize, gaps: Vec<f64>) -> Self {
        GapRecord {
            m_index,
            mean: mean(&gaps),
            std: std_dev(&gaps),
            gaps,
        }
    }

    /// Positive beyond `k` run-to-run standard deviations.
    pub fn significant(&self, k: f64) -> bool {
        self.mean > k * self.std
    }

    /// Within `k` standard deviations of zero.
    pub fn consistent_with_zero(&self, k: f64) -> bool {
        self.mean.abs() <= k * self.std
    }
}

/// Capacity sweep at fixed single-state positions, reduced to gap records.
pub fn learnability_gap_records(spec: &ExperimentSpec, cache: &RunCache) -> Result<(Vec<GapRecord>, ExperimentResult)> {
    let seeds = spec.rep_seeds();
    let mut configs = Vec::new();
    for &m in &spec.m_indices {
        for &w in &spec.widths {
            for &seed in &seeds {
                let mut c = spec.base.with_seed(seed);
                c.protocol = SpectralProtocol::Single { index: m };
                c.hidden = w;
                configs.push(c);
            }
        }
    }
    let runs = run_all(&configs, cache, spec.threads)?;
    let mut detail = Table::new(columns(&["m_index", "w_H", "rep"]));
    let mut per_rep = Table::new(["m_index", "rep", "gap"]);
    let mut summary = Table::new(["m_index", "mean_gap", "std_gap", "reps"]);
    let mut records = Vec::new();
    let (nw, nr) = (spec.widths.len(), seeds.len());
    for (i, &m) in spec.m_indices.iter().enumerate() {
        let block = &runs[i * nw * nr..(i + 1) * nw * nr];
        for (j, &w) in spec.widths.iter().enumerate() {
            for r in 0..nr {
                let run = &block[j * nr + r];
                detail.push(
                    [m.to_string(), w.to_string(), r.to_string()]
                        .into_iter()
                        .chain(final_cells(run))
                        .collect(),
                );
            }
        }
        let gaps: Vec<f64> = (0..nr)
            .map(|r| {
                let losses: Vec<f64> = (0..nw).map(|j| block[j * nr + r].last.val_rayleigh).collect();
                gap_from_losses(&losses)
            })
            .collect();
        for (r, g) in gaps.iter().enumerate() {
            per_rep.push(vec![m.to_string(), r.to_string(), fmt_f64(*g)]);
        }
        let rec = GapRecord::from_gaps(m, gaps);
        summary.push(vec![m.to_string(), fmt_f64(rec.mean), fmt_f64(rec.std), nr.to_string()]);
        records.push(rec);
    }
    let result = ExperimentResult {
        tables: vec![
            ("gap_runs.csv".into(), detail),
            ("gap.csv".into(), per_rep),
            ("gap_summary.csv".into(), summary),
        ],
        artifacts: Vec::new(),
        runs,
    };
    Ok((records, result))
}

pub fn learnability_gap(spec: &ExperimentSpec, cache: &RunCache) -> Result<ExperimentResult> {
    Ok(learnability_gap_records(spec, cache)?.1)
}

/// `(J1, J2)` inference next to the matched `J1`-only run.
pub fn two_parameter_run(spec: &ExperimentSpec, cache: &RunCache) -> Result<ExperimentResult> {
    let (lo, hi) = {
        let a = &spec.base.range.axes[0];
        (a[0].lo, a[a.len() - 1].hi)
    };
    let mut keys = Vec::new();
    let mut configs = Vec::new();
    for (variant, free) in [("one_param", vec![Coupling::J1]), ("two_param", vec![Coupling::J1, Coupling::J2])] {
        for &m in &spec.states {
            for (r, &seed) in spec.rep_seeds().iter().enumerate() {
                let mut c = spec.base.with_seed(seed);
                c.range = ParamRange::uniform(free.len(), lo, hi);
                c.free = free.clone();
                c.protocol = SpectralProtocol::Low { states: m };
                keys.push((variant, m, r));
                configs.push(c);
            }
        }
    }
    let runs = run_all(&configs, cache, spec.threads)?;
    let mut fin = Table::new(columns(&["variant", "M", "rep"]).into_iter().chain(["converged".to_string()]).collect::<Vec<_>>());
    let mut hist = Table::new(["variant", "M", "rep", "epoch", "train_rayleigh", "val_rayleigh", "val_theta"]);
    for (&(variant, m, r), run) in keys.iter().zip(&runs) {
        let converged = loss_decreased(&run.history.series(|e| e.train_objective));
        fin.push(
            [variant.to_string(), m.to_string(), r.to_string()]
                .into_iter()
                .chain(final_cells(run))
                .chain([converged.to_string()])
                .collect(),
        );
        for e in &run.history.records {
            hist.push(vec![
                variant.into(),
                m.to_string(),
                r.to_string(),
                e.epoch.to_string(),
                fmt_f64(e.train_rayleigh),
                fmt_f64(e.val_rayleigh),
                fmt_f64(e.val_theta),
            ]);
        }
    }
    Ok(ExperimentResult {
        tables: vec![("two_param_final.csv".into(), fin), ("two_param_history.csv".into(), hist)],
        artifacts: Vec::new(),
        runs,
    })
}
