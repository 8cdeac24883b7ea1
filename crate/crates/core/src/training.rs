//! Datasets over the Hamiltonian family, the optimizer and the epoch loop.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::fidelity;
use crate::eigensolver::{diagonalize, mean_energy_index};
use crate::encoder::{backward, forward, EncoderParams, Real};
use crate::error::{Error, Result};
use crate::loss::{project_basis, rayleigh_loss, spectral_error, theta_loss, LossConfig, ProjectedBasis};
use crate::protocols::{build_state_block, select_indices, SpectralProtocol};
use crate::seeds::SeedSet;
use crate::spin_chain::{basis_operators, build_hamiltonian, LatentSpec};
use crate::stats::median;

const DATASET_MAGIC: &[u8; 4] = b"EIGD";
const DATASET_VERSION: u32 = 1;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Sampling domain: a union of intervals per free parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub axes: Vec<Vec<Interval>>,
}

impl ParamRange {
    /// The same interval on every axis.
    pub fn uniform(theta_dim: usize, lo: f64, hi: f64) -> Self {
        ParamRange {
            axes: vec![vec![Interval::new(lo, hi)]; theta_dim],
        }
    }

    /// One axis covering a union of intervals.
    pub fn union(intervals: Vec<Interval>) -> Self {
        ParamRange { axes: vec![intervals] }
    }

    pub fn theta_dim(&self) -> usize {
        self.axes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::InvalidParams("parameter range has no axes".into()));
        }
        for axis in &self.axes {
            if axis.is_empty() {
                return Err(Error::InvalidParams("empty parameter range".into()));
            }
            for w in axis {
                if !(w.lo < w.hi) || !w.lo.is_finite() || !w.hi.is_finite() {
                    return Err(Error::InvalidParams(format!(
                        "interval [{}, {}] is empty",
                        w.lo, w.hi
                    )));
                }
            }
            for p in axis.windows(2) {
                if p[1].lo < p[0].hi {
                    return Err(Error::InvalidParams(
                        "intervals must be ascending and disjoint".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.axes.len()
            && self
                .axes
                .iter()
                .zip(theta)
                .all(|(axis, &t)| axis.iter().any(|w| w.contains(t)))
    }
}

/// Maps a position along the concatenated intervals back onto the axis.
fn from_concatenated(axis: &[Interval], mut t: f64) -> f64 {
    for (k, w) in axis.iter().enumerate() {
        if t <= w.len() || k + 1 == axis.len() {
            return (w.lo + t).min(w.hi);
        }
        t -= w.len();
    }
    unreachable!("axis is nonempty")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    Grid,
    Uniform,
}

/// Latent vectors covering `range`.
///
/// Grid mode spaces points evenly (endpoints included) along each axis and
/// takes the Cartesian product of `⌈N^{1/Θ}⌉` points per axis, truncated to N.
/// Uniform mode draws i.i.d. points, with unions weighted by interval length.
pub fn sample_parameters(range: &ParamRange, count: usize, mode: SamplingMode, seed: u64) -> Result<Vec<Vec<f64>>> {
    range.validate()?;
    let totals: Vec<f64> = range
        .axes
        .iter()
        .map(|a| a.iter().map(Interval::len).sum())
        .collect();
    match mode {
        SamplingMode::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..count)
                .map(|_| {
                    range
                        .axes
                        .iter()
                        .zip(&totals)
                        .map(|(axis, &total)| from_concatenated(axis, rng.gen_range(0.0..total)))
                        .collect()
                })
                .collect())
        }
        SamplingMode::Grid => {
            let dim = range.theta_dim();
            let mut per_axis = 1usize;
            while per_axis.checked_pow(dim as u32).is_some_and(|p| p < count) {
                per_axis += 1;
            }
            let axis_points: Vec<Vec<f64>> = range
                .axes
                .iter()
                .zip(&totals)
                .map(|(axis, &total)| {
                    (0..per_axis)
                        .map(|i| {
                            let t = if per_axis == 1 {
                                0.0
                            } else {
                                total * i as f64 / (per_axis - 1) as f64
                            };
                            from_concatenated(axis, t)
                        })
                        .collect()
                })
                .collect();
            let mut out = Vec::with_capacity(count);
            let mut digits = vec![0usize; dim];
            while out.len() < count {
                out.push(digits.iter().enumerate().map(|(a, &i)| axis_points[a][i]).collect());
                for d in (0..dim).rev() {
                    digits[d] += 1;
                    if digits[d] < per_axis {
                        break;
                    }
                    digits[d] = 0;
                }
            }
            Ok(out)
        }
    }
}

/// One Hamiltonian realization prepared for training.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub theta: Vec<f64>,
    /// 1-based eigenstate indices.
    pub indices: Vec<usize>,
    pub energies: Vec<f64>,
    /// D×M network input.
    pub psi: Array2<f32>,
    pub projected: ProjectedBasis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sites: usize,
    pub protocol: SpectralProtocol,
    pub theta_dim: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        1 << self.sites
    }

    pub fn states(&self) -> usize {
        self.protocol.block_size()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            sites: self.sites,
            protocol: self.protocol,
            theta_dim: self.theta_dim,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(DATASET_MAGIC)?;
        out.write_all(&DATASET_VERSION.to_le_bytes())?;
        for v in [self.sites, self.dim(), self.states(), self.theta_dim, self.len()] {
            out.write_all(&(v as u64).to_le_bytes())?;
        }
        out.write_all(&[self.protocol.tag()])?;
        out.write_all(&(self.protocol.parameter() as u64).to_le_bytes())?;
        for s in &self.samples {
            for t in &s.theta {
                out.write_all(&t.to_le_bytes())?;
            }
            for &i in &s.indices {
                out.write_all(&(i as i64).to_le_bytes())?;
            }
            for e in &s.energies {
                out.write_all(&e.to_le_bytes())?;
            }
            for col in s.psi.columns() {
                for v in col {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
            for g in s.projected.g.iter().chain(std::iter::once(&s.projected.g_const)) {
                for v in g.iter() {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(mut input: R) -> Result<Dataset> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != DATASET_MAGIC {
            return Err(Error::Format("not a dataset file".into()));
        }
        let version = u32::from_le_bytes(read_array(&mut input)?);
        if version != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let mut header = [0usize; 5];
        for h in &mut header {
            *h = read_usize(&mut input)?;
        }
        let [sites, dim, states, theta_dim, count] = header;
        let tag = read_array::<1>(&mut input)?[0];
        let protocol = SpectralProtocol::from_tag(tag, read_usize(&mut input)?)?;
        if sites == 0 || sites > crate::spin_chain::MAX_SITES || dim != 1 << sites {
            return Err(Error::Format(format!("inconsistent sizes L={sites}, D={dim}")));
        }
        if states != protocol.block_size() || states > dim || theta_dim > 2 {
            return Err(Error::Format(format!("inconsistent block sizes M={states}, Θ={theta_dim}")));
        }
        let mut samples = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let theta = read_f64s(&mut input, theta_dim)?;
            let mut indices = Vec::with_capacity(states);
            for _ in 0..states {
                let i = i64::from_le_bytes(read_array(&mut input)?);
                if i < 1 || i as usize > dim {
                    return Err(Error::Format(format!("eigenstate index {i} out of range")));
                }
                indices.push(i as usize);
            }
            let energies = read_f64s(&mut input, states)?;
            let mut psi = Array2::<f32>::zeros((dim, states));
            for c in 0..states {
                for r in 0..dim {
                    psi[[r, c]] = f32::from_le_bytes(read_array(&mut input)?);
                }
            }
            let mut mats = Vec::with_capacity(theta_dim + 1);
            for _ in 0..=theta_dim {
                let v = read_f64s(&mut input, states * states)?;
                mats.push(Array2::from_shape_vec((states, states), v).expect("sized above"));
            }
            let g_const = mats.pop().expect("theta_dim + 1 matrices");
            samples.push(Sample {
                theta,
                indices,
                energies: energies.clone(),
                psi,
                projected: ProjectedBasis {
                    g: mats,
                    g_const,
                    energies,
                },
            });
        }
        Ok(Dataset {
            sites,
            protocol,
            theta_dim,
            samples,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        Dataset::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn read_array<const N: usize>(input: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    input.read_exact(&mut b)?;
    Ok(b)
}

fn read_usize(input: &mut impl Read) -> Result<usize> {
    usize::try_from(u64::from_le_bytes(read_array(input)?))
        .map_err(|_| Error::Format("size overflows usize".into()))
}

fn read_f64s(input: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| Ok(f64::from_le_bytes(read_array(input)?))).collect()
}

/// Diagonalizes H(θ) for every θ and keeps the protocol's eigenstates.
pub fn generate_dataset(thetas: &[Vec<f64>], spec: &LatentSpec, protocol: SpectralProtocol) -> Result<Dataset> {
    let basis = basis_operators(spec)?;
    protocol.validate(basis.dim())?;
    let samples = thetas
        .par_iter()
        .enumerate()
        .map(|(k, theta)| {
            build_sample(theta, spec, protocol, &basis).map_err(|e| Error::Sample {
                sample: k,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        sites: spec.sites(),
        protocol,
        theta_dim: spec.theta_dim(),
        samples,
    })
}

fn build_sample(
    theta: &[f64],
    spec: &LatentSpec,
    protocol: SpectralProtocol,
    basis: &crate::spin_chain::DecoderBasis,
) -> Result<Sample> {
    let h = build_hamiltonian(&spec.params(theta)?)?;
    let spectrum = diagonalize(&h)?;
    let m_av = mean_energy_index(&spectrum, &h);
    let indices = select_indices(protocol, spectrum.dim(), m_av)?;
    let block = build_state_block(&spectrum, &indices, theta)?;
    let projected = project_basis(&block, basis)?;
    Ok(Sample {
        theta: theta.to_vec(),
        indices,
        energies: block.energies,
        psi: block.psi.mapv(|v| v as f32),
        projected,
    })
}

/// Disjoint sorted (train, validation) index sets; `round(fraction·n)` go to training.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParams(format!(
            "split fraction {fraction} outside (0, 1)"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((fraction * n as f64).round() as usize).min(n);
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

pub fn split_dataset(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, val) = split_indices(ds.len(), fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&val)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for every parameter.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub m: EncoderParams<T>,
    pub v: EncoderParams<T>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &EncoderParams<T>) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of a flat parameter slice at step `step` (1-based).
pub fn adam_step_slice<T: Real>(p: &mut [T], g: &[T], m: &mut [T], v: &mut [T], step: u64, cfg: &AdamConfig) {
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let one = T::one();
    let c1 = T::from_f64(1.0 - cfg.beta1.powi(step as i32));
    let c2 = T::from_f64(1.0 - cfg.beta2.powi(step as i32));
    let lr = T::from_f64(cfg.learning_rate);
    let eps = T::from_f64(cfg.epsilon);
    for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Applies one Adam step; non-finite gradients leave everything untouched.
pub fn adam_update<T: Real>(
    params: &mut EncoderParams<T>,
    grads: &EncoderParams<T>,
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NonFinite);
    }
    state.step += 1;
    let step = state.step;
    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut())
        .zip(state.v.tensors_mut())
    {
        adam_step_slice(p, g, m, v, step, cfg);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    Rayleigh,
    SupervisedTheta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub split_fraction: f64,
    pub optimizer: AdamConfig,
    pub loss: LossConfig,
    pub mode: LossMode,
    /// Master seed; split and batch order use derived seeds.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: 64,
            split_fraction: 0.7,
            optimizer: AdamConfig::default(),
            loss: LossConfig::default(),
            mode: LossMode::Rayleigh,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParams("epochs and batch size must be positive".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::InvalidParams(format!(
                "split fraction {} outside (0, 1)",
                self.split_fraction
            )));
        }
        if !(self.optimizer.learning_rate > 0.0 && self.optimizer.learning_rate.is_finite()) {
            return Err(Error::InvalidParams("learning rate must be positive".into()));
        }
        self.loss.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean Rayleigh loss over the training samples seen this epoch.
    pub train_rayleigh: f64,
    /// Mean of the optimized objective (equals `train_rayleigh` in Rayleigh mode).
    pub train_objective: f64,
    pub val_rayleigh: f64,
    pub val_theta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn series(&self, f: impl Fn(&EpochRecord) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_rayleigh", "val_rayleigh", "val_theta"])?;
        for r in &self.records {
            w.write_record([
                r.epoch.to_string(),
                r.train_rayleigh.to_string(),
                r.val_rayleigh.to_string(),
                r.val_theta.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// True when the median over the last 10% of `series` is below the median over the first 10%.
pub fn loss_decreased(series: &[f64]) -> bool {
    if series.len() < 2 {
        return false;
    }
    let k = (series.len() / 10).max(1);
    median(&series[series.len() - k..]) < median(&series[..k])
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: EncoderParams<f32>,
    pub history: History,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

fn theta_f64(theta: &[f32]) -> Vec<f64> {
    theta.iter().map(|&v| v as f64).collect()
}

/// Latent prediction for one sample.
pub fn predict(params: &EncoderParams<f32>, sample: &Sample) -> Result<Vec<f64>> {
    Ok(theta_f64(&forward(params, sample.psi.view())?.0))
}

/// Mini-batch Adam training.
///
/// In Rayleigh mode the objective sees only the projected basis of each
/// sample, never its generating parameters.
pub fn run_training(ds: &Dataset, cfg: &TrainConfig, init: EncoderParams<f32>) -> Result<TrainOutcome> {
    cfg.validate()?;
    if init.inputs() != ds.states() || init.theta_dim() != ds.theta_dim {
        return Err(Error::Shape(format!(
            "encoder expects M={}, Θ={} but dataset has M={}, Θ={}",
            init.inputs(),
            init.theta_dim(),
            ds.states(),
            ds.theta_dim
        )));
    }
    let seeds = SeedSet::from_master(cfg.seed);
    let (train, val) = split_indices(ds.len(), cfg.split_fraction, seeds.split)?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidParams(format!(
            "{} samples leave an empty training or validation set",
            ds.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.batch);
    let mut params = init;
    let mut adam = AdamState::new(&params);
    let mut history = History::default();
    let mut order = train.clone();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut rayleigh_sum = 0.0;
        let mut objective_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = params.zeros_like();
            let inv_b = 1.0 / batch.len() as f64;
            for &i in batch {
                let s = &ds.samples[i];
                let (out, cache) = forward(&params, s.psi.view())?;
                let theta = theta_f64(&out);
                let (ray, d_ray) = rayleigh_loss(&s.projected, &theta, &cfg.loss)?;
                let (obj, d_obj) = match cfg.mode {
                    LossMode::Rayleigh => (ray, d_ray),
                    LossMode::SupervisedTheta => {
                        let n = theta.len() as f64;
                        let d = theta.iter().zip(&s.theta).map(|(a, b)| 2.0 * (a - b) / n).collect();
                        (theta_loss(&theta, &s.theta)?, d)
                    }
                };
                if !obj.is_finite() || !ray.is_finite() {
                    return Err(Error::Divergence {
                        epoch,
                        what: format!("training loss of sample {i}"),
                    });
                }
                rayleigh_sum += ray;
                objective_sum += obj;
                let seed: Vec<f32> = d_obj.iter().map(|d| (d * inv_b) as f32).collect();
                grad.scaled_add(1.0, &backward(&params, &cache, &seed)?);
            }
            adam_update(&mut params, &grad, &mut adam, &cfg.optimizer).map_err(|_| Error::Divergence {
                epoch,
                what: "non-finite gradient".into(),
            })?;
        }

        let mut val_rayleigh = 0.0;
        let mut val_theta = 0.0;
        for &i in &val {
            let s = &ds.samples[i];
            let theta = predict(&params, s)?;
            val_rayleigh += rayleigh_loss(&s.projected, &theta, &cfg.loss)?.0;
            val_theta += theta_loss(&theta, &s.theta)?;
        }
        let record = EpochRecord {
            epoch,
            train_rayleigh: rayleigh_sum / train.len() as f64,
            train_objective: objective_sum / train.len() as f64,
            val_rayleigh: val_rayleigh / val.len() as f64,
            val_theta: val_theta / val.len() as f64,
        };
        if !(record.val_rayleigh.is_finite() && record.val_theta.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                what: "validation loss".into(),
            });
        }
        history.records.push(record);
    }
    Ok(TrainOutcome {
        params,
        history,
        train_indices: train,
        val_indices: val,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEvaluation {
    pub theta_true: Vec<f64>,
    pub theta_pred: Vec<f64>,
    pub theta_loss: f64,
    pub rayleigh: f64,
    pub spectral_error: Option<f64>,
    /// Mean fidelity between the selected eigenstates of H(θ) and H(θ̃).
    pub fidelity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub samples: Vec<SampleEvaluation>,
    pub mean_theta_loss: f64,
    pub median_theta_loss: f64,
    pub mean_rayleigh: f64,
    pub mean_spectral_error: Option<f64>,
    pub mean_fidelity: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Metrics of `params` on the samples at `indices`.
///
/// Passing the latent spec additionally rediagonalizes H(θ̃) per sample for
/// the spectral error and eigenstate fidelity.
pub fn evaluate(
    params: &EncoderParams<f32>,
    ds: &Dataset,
    indices: &[usize],
    loss: &LossConfig,
    spectral: Option<&LatentSpec>,
) -> Result<Evaluation> {
    if indices.is_empty() {
        return Err(Error::InvalidParams("nothing to evaluate".into()));
    }
    let samples = indices
        .iter()
        .map(|&i| {
            let s = &ds.samples[i];
            let pred = predict(params, s)?;
            let (spectral_error, fid) = match spectral {
                Some(spec) => {
                    let (e, f) = spectral_metrics(spec, s, &pred)?;
                    (Some(e), Some(f))
                }
                None => (None, None),
            };
            Ok(SampleEvaluation {
                theta_loss: theta_loss(&pred, &s.theta)?,
                rayleigh: rayleigh_loss(&s.projected, &pred, loss)?.0,
                theta_true: s.theta.clone(),
                theta_pred: pred,
                spectral_error,
                fidelity: fid,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let losses: Vec<f64> = samples.iter().map(|s| s.theta_loss).collect();
    Ok(Evaluation {
        mean_theta_loss: mean(losses.iter().copied()),
        median_theta_loss: median(&losses),
        mean_rayleigh: mean(samples.iter().map(|s| s.rayleigh)),
        mean_spectral_error: spectral.map(|_| mean(samples.iter().filter_map(|s| s.spectral_error))),
        mean_fidelity: spectral.map(|_| mean(samples.iter().filter_map(|s| s.fidelity))),
        samples,
    })
}

/// (spectral error, mean fidelity of the selected states) for a prediction.
pub fn spectral_metrics(spec: &LatentSpec, sample: &Sample, pred: &[f64]) -> Result<(f64, f64)> {
    let exact = diagonalize(&build_hamiltonian(&spec.params(&sample.theta)?)?)?;
    let recon = diagonalize(&build_hamiltonian(&spec.params(pred)?)?)?;
    let err = spectral_error(
        exact.energies.as_slice().expect("contiguous"),
        recon.energies.as_slice().expect("contiguous"),
    )?;
    let mut fid = 0.0;
    for &m in &sample.indices {
        fid += fidelity(exact.vectors.column(m - 1), recon.vectors.column(m - 1))?;
    }
    Ok((err, fid / sample.indices.len() as f64))
}
