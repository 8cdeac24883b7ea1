//! Point-wise MLP encoder with mean pooling and manual backpropagation.
//!
//! Every basis index d of a D×M state block is a point carrying the M
//! amplitudes `ψ_d`. Points are lifted to width `w_H`, passed through one
//! residual block, averaged, and read out to Θ latent parameters:
//!
//! ```text
//! h   = SiLU(LN₁(ψ_d W_in + b_in))
//! h   ← SiLU(h + LN₃(SiLU(LN₂(h W_r1 + b_r1)) W_r2 + b_r2))
//! g   = mean_d h
//! θ̃   = SiLU(g W_out1 + b_out1) W_out2 + b_out2
//! ```
//!
//! Batches are processed as one (B·D)×M matrix so every layer is a single
//! matrix product.

use std::fmt::Debug;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis, LinalgScalar, ScalarOperand};
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Variance floor of the per-point normalization.
pub const NORM_EPS: f64 = 1e-5;

const CHECKPOINT_MAGIC: &[u8; 4] = b"ENC1";

/// Floating-point type the network runs in.
pub trait Real: LinalgScalar + Float + ScalarOperand + Debug + Default + Send + Sync {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sigmoid(self) -> Self;
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    #[inline(always)]
    fn sigmoid(self) -> Self {
        1.0 / (1.0 + (-self).exp())
    }
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline(always)]
    fn sigmoid(self) -> Self {
        1.0 / (1.0 + exp_f32(-self))
    }
}

/// Branch-free `exp` for f32, accurate to about one ulp on [-87, 88].
#[inline(always)]
fn exp_f32(x: f32) -> f32 {
    const MAGIC: f32 = 12_582_912.0;
    const LN2_HI: f32 = 0.693_145_75;
    const LN2_LO: f32 = 1.428_606_8e-6;
    let x = x.clamp(-87.0, 88.0);
    let t = x * std::f32::consts::LOG2_E + MAGIC;
    let n = t - MAGIC;
    let k = t.to_bits().wrapping_sub(MAGIC.to_bits()) as i32;
    let r = x - n * LN2_HI - n * LN2_LO;
    let p = 1.0
        + r * (1.0
            + r * (0.5
                + r * (1.0 / 6.0 + r * (1.0 / 24.0 + r * (1.0 / 120.0 + r * (1.0 / 720.0))))));
    f32::from_bits((p.to_bits() as i32).wrapping_add(k << 23) as u32)
}

/// Per-feature scale and shift applied after normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Norm<T> {
    pub scale: Array1<T>,
    pub shift: Array1<T>,
}

impl<T: Real> Norm<T> {
    fn identity(width: usize) -> Self {
        Norm {
            scale: Array1::from_elem(width, T::one()),
            shift: Array1::zeros(width),
        }
    }
}

/// Trainable weights. Gradients use the same structure.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    pub w_in: Array2<T>,
    pub b_in: Array1<T>,
    pub norm1: Norm<T>,
    pub norm2: Norm<T>,
    pub norm3: Norm<T>,
    pub w_r1: Array2<T>,
    pub b_r1: Array1<T>,
    pub w_r2: Array2<T>,
    pub b_r2: Array1<T>,
    pub w_out1: Array2<T>,
    pub b_out1: Array1<T>,
    pub w_out2: Array2<T>,
    pub b_out2: Array1<T>,
}

impl<T: Real> EncoderParams<T> {
    pub fn zeros(inputs: usize, hidden: usize, theta: usize) -> Self {
        let n = || Norm {
            scale: Array1::zeros(hidden),
            shift: Array1::zeros(hidden),
        };
        EncoderParams {
            w_in: Array2::zeros((inputs, hidden)),
            b_in: Array1::zeros(hidden),
            norm1: n(),
            norm2: n(),
            norm3: n(),
            w_r1: Array2::zeros((hidden, hidden)),
            b_r1: Array1::zeros(hidden),
            w_r2: Array2::zeros((hidden, hidden)),
            b_r2: Array1::zeros(hidden),
            w_out1: Array2::zeros((hidden, hidden)),
            b_out1: Array1::zeros(hidden),
            w_out2: Array2::zeros((hidden, theta)),
            b_out2: Array1::zeros(theta),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.inputs(), self.hidden(), self.theta_dim())
    }

    /// Input states M.
    pub fn inputs(&self) -> usize {
        self.w_in.nrows()
    }

    /// Hidden width w_H.
    pub fn hidden(&self) -> usize {
        self.w_in.ncols()
    }

    pub fn theta_dim(&self) -> usize {
        self.w_out2.ncols()
    }

    /// Every tensor in checkpoint order.
    pub fn tensors(&self) -> [&[T]; 16] {
        [
            self.w_in.as_slice().expect("standard layout"),
            self.b_in.as_slice().expect("standard layout"),
            self.norm1.scale.as_slice().expect("standard layout"),
            self.norm1.shift.as_slice().expect("standard layout"),
            self.norm2.scale.as_slice().expect("standard layout"),
            self.norm2.shift.as_slice().expect("standard layout"),
            self.norm3.scale.as_slice().expect("standard layout"),
            self.norm3.shift.as_slice().expect("standard layout"),
            self.w_r1.as_slice().expect("standard layout"),
            self.b_r1.as_slice().expect("standard layout"),
            self.w_r2.as_slice().expect("standard layout"),
            self.b_r2.as_slice().expect("standard layout"),
            self.w_out1.as_slice().expect("standard layout"),
            self.b_out1.as_slice().expect("standard layout"),
            self.w_out2.as_slice().expect("standard layout"),
            self.b_out2.as_slice().expect("standard layout"),
        ]
    }

    /// Mutable view of every tensor in checkpoint order.
    pub fn tensors_mut(&mut self) -> [&mut [T]; 16] {
        [
            self.w_in.as_slice_mut().expect("standard layout"),
            self.b_in.as_slice_mut().expect("standard layout"),
            self.norm1.scale.as_slice_mut().expect("standard layout"),
            self.norm1.shift.as_slice_mut().expect("standard layout"),
            self.norm2.scale.as_slice_mut().expect("standard layout"),
            self.norm2.shift.as_slice_mut().expect("standard layout"),
            self.norm3.scale.as_slice_mut().expect("standard layout"),
            self.norm3.shift.as_slice_mut().expect("standard layout"),
            self.w_r1.as_slice_mut().expect("standard layout"),
            self.b_r1.as_slice_mut().expect("standard layout"),
            self.w_r2.as_slice_mut().expect("standard layout"),
            self.b_r2.as_slice_mut().expect("standard layout"),
            self.w_out1.as_slice_mut().expect("standard layout"),
            self.b_out1.as_slice_mut().expect("standard layout"),
            self.w_out2.as_slice_mut().expect("standard layout"),
            self.b_out2.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self += factor · other`, tensor by tensor.
    pub fn scaled_add(&mut self, factor: T, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + factor * y;
            }
        }
    }

    pub fn cast<U: Real>(&self) -> EncoderParams<U> {
        let mut out = EncoderParams::<U>::zeros(self.inputs(), self.hidden(), self.theta_dim());
        for (dst, src) in out.tensors_mut().into_iter().zip(self.tensors()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = U::from_f64(s.to_f64());
            }
        }
        out
    }
}

/// Closed-form parameter count for (M, w_H, Θ).
pub fn num_parameters(inputs: usize, hidden: usize, theta: usize) -> usize {
    let w = hidden;
    inputs * w + w + 3 * 2 * w + 2 * (w * w + w) + (w * w + w) + (w * theta + theta)
}

/// Glorot-uniform weights, zero biases, identity normalization.
pub fn init_params<T: Real>(inputs: usize, hidden: usize, theta: usize, seed: u64) -> Result<EncoderParams<T>> {
    if inputs == 0 || hidden == 0 || theta == 0 {
        return Err(Error::InvalidParams(format!(
            "encoder dimensions must be positive, got M={inputs}, w_H={hidden}, Θ={theta}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut glorot = |rows: usize, cols: usize| {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        Array2::from_shape_simple_fn((rows, cols), || T::from_f64(rng.gen_range(-a..=a)))
    };
    let w_in = glorot(inputs, hidden);
    let w_r1 = glorot(hidden, hidden);
    let w_r2 = glorot(hidden, hidden);
    let w_out1 = glorot(hidden, hidden);
    let w_out2 = glorot(hidden, theta);
    Ok(EncoderParams {
        w_in,
        b_in: Array1::zeros(hidden),
        norm1: Norm::identity(hidden),
        norm2: Norm::identity(hidden),
        norm3: Norm::identity(hidden),
        w_r1,
        b_r1: Array1::zeros(hidden),
        w_r2,
        b_r2: Array1::zeros(hidden),
        w_out1,
        b_out1: Array1::zeros(hidden),
        w_out2,
        b_out2: Array1::zeros(theta),
    })
}

/// Intermediates of a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    samples: usize,
    points: usize,
    input: Array2<T>,
    n1: Array2<T>,
    inv1: Vec<T>,
    a1: Array2<T>,
    sig1: Array2<T>,
    h1: Array2<T>,
    n2: Array2<T>,
    inv2: Vec<T>,
    a2: Array2<T>,
    sig2: Array2<T>,
    u2: Array2<T>,
    n3: Array2<T>,
    inv3: Vec<T>,
    s: Array2<T>,
    sig_s: Array2<T>,
    g: Array2<T>,
    o1: Array2<T>,
    sig_o1: Array2<T>,
    r1: Array2<T>,
}

impl<T> ForwardCache<T> {
    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn points(&self) -> usize {
        self.points
    }
}

fn add_bias<T: Real>(z: &mut Array2<T>, b: &Array1<T>) {
    let b = b.as_slice().expect("standard layout");
    for row in z.as_slice_mut().expect("standard layout").chunks_exact_mut(b.len()) {
        for (x, &v) in row.iter_mut().zip(b) {
            *x = *x + v;
        }
    }
}

/// Row-major `a · b`.
fn mm<T: Real>(a: &ArrayView2<T>, b: &ArrayView2<T>) -> Array2<T> {
    let mut c = Array2::zeros((a.nrows(), b.ncols()));
    general_mat_mul(T::one(), a, b, T::zero(), &mut c);
    c
}

fn linear<T: Real>(x: &ArrayView2<T>, w: &Array2<T>, b: &Array1<T>) -> Array2<T> {
    let mut z = mm(x, &w.view());
    add_bias(&mut z, b);
    z
}

/// Sum with eight independent accumulators so the loop vectorizes.
#[inline(always)]
fn lane_sum<T: Real>(xs: &[T], ys: &[T], f: impl Fn(T, T) -> T) -> T {
    let mut acc = [T::zero(); 8];
    let mut cx = xs.chunks_exact(8);
    let mut cy = ys.chunks_exact(8);
    for (a, b) in (&mut cx).zip(&mut cy) {
        for k in 0..8 {
            acc[k] = acc[k] + f(a[k], b[k]);
        }
    }
    let mut tail = T::zero();
    for (&a, &b) in cx.remainder().iter().zip(cy.remainder()) {
        tail = tail + f(a, b);
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Normalizes each row in place; returns (normalized, 1/σ per row, affine output).
fn norm_forward<T: Real>(z: Array2<T>, norm: &Norm<T>) -> (Array2<T>, Vec<T>, Array2<T>) {
    let width = z.ncols();
    let wf = T::from_f64(width as f64);
    let eps = T::from_f64(NORM_EPS);
    let mut n = z;
    let mut inv = Vec::with_capacity(n.nrows());
    let mut a = Array2::zeros(n.raw_dim());
    let scale = norm.scale.as_slice().expect("standard layout");
    let shift = norm.shift.as_slice().expect("standard layout");
    for (row, out) in n
        .as_slice_mut()
        .expect("standard layout")
        .chunks_exact_mut(width)
        .zip(a.as_slice_mut().expect("standard layout").chunks_exact_mut(width))
    {
        let mean = lane_sum(row, row, |x, _| x) / wf;
        let var = lane_sum(row, row, |x, _| (x - mean) * (x - mean)) / wf;
        let r = T::one() / (var + eps).sqrt();
        for (((x, o), &sc), &sh) in row.iter_mut().zip(out.iter_mut()).zip(scale).zip(shift) {
            *x = (*x - mean) * r;
            *o = *x * sc + sh;
        }
        inv.push(r);
    }
    (n, inv, a)
}

/// Returns (σ(a), SiLU(a)).
fn silu_forward<T: Real>(a: &Array2<T>) -> (Array2<T>, Array2<T>) {
    let mut sig = Array2::zeros(a.raw_dim());
    let mut out = Array2::zeros(a.raw_dim());
    for ((s, o), &x) in sig
        .as_slice_mut()
        .expect("standard layout")
        .iter_mut()
        .zip(out.as_slice_mut().expect("standard layout"))
        .zip(a.as_slice().expect("standard layout"))
    {
        let v = x.sigmoid();
        *s = v;
        *o = x * v;
    }
    (sig, out)
}

/// `grad ⊙ SiLU'(a)` in place, with `SiLU'(a) = σ(1 + a(1 − σ))`.
fn silu_backward<T: Real>(grad: &mut Array2<T>, a: &Array2<T>, sig: &Array2<T>) {
    let one = T::one();
    for ((d, &x), &s) in grad
        .as_slice_mut()
        .expect("standard layout")
        .iter_mut()
        .zip(a.as_slice().expect("standard layout"))
        .zip(sig.as_slice().expect("standard layout"))
    {
        *d = *d * s * (one + x * (one - s));
    }
}

/// Backpropagates through normalization; `da` becomes the gradient at its input.
fn norm_backward<T: Real>(da: &mut Array2<T>, n: &Array2<T>, inv: &[T], norm: &Norm<T>, grad: &mut Norm<T>) {
    let width = da.ncols();
    let wf = T::from_f64(width as f64);
    let scale = norm.scale.as_slice().expect("standard layout");
    let gscale = grad.scale.as_slice_mut().expect("standard layout");
    let gshift = grad.shift.as_slice_mut().expect("standard layout");
    for ((row, nrow), &r) in da
        .as_slice_mut()
        .expect("standard layout")
        .chunks_exact_mut(width)
        .zip(n.as_slice().expect("standard layout").chunks_exact(width))
        .zip(inv)
    {
        for k in 0..width {
            gscale[k] = gscale[k] + row[k] * nrow[k];
            gshift[k] = gshift[k] + row[k];
            row[k] = row[k] * scale[k];
        }
        let mean = lane_sum(row, row, |x, _| x) / wf;
        let mean_dot = lane_sum(row, nrow, |x, y| x * y) / wf;
        for (x, &y) in row.iter_mut().zip(nrow) {
            *x = r * (*x - mean - y * mean_dot);
        }
    }
}

fn column_sums<T: Real>(a: &Array2<T>) -> Array1<T> {
    a.sum_axis(Axis(0))
}

/// Batched forward pass over `samples` stacked blocks of `points` rows each.
pub fn forward_batch<T: Real>(
    params: &EncoderParams<T>,
    input: ArrayView2<T>,
    points: usize,
) -> Result<(Array2<T>, ForwardCache<T>)> {
    if input.ncols() != params.inputs() {
        return Err(Error::Shape(format!(
            "input has {} columns, encoder expects M = {}",
            input.ncols(),
            params.inputs()
        )));
    }
    if points == 0 || input.nrows() == 0 || input.nrows() % points != 0 {
        return Err(Error::Shape(format!(
            "{} rows cannot be split into blocks of {points} points",
            input.nrows()
        )));
    }
    let samples = input.nrows() / points;
    let input = input.as_standard_layout().into_owned();

    let z1 = linear(&input.view(), &params.w_in, &params.b_in);
    let (n1, inv1, a1) = norm_forward(z1, &params.norm1);
    let (sig1, h1) = silu_forward(&a1);

    let z2 = linear(&h1.view(), &params.w_r1, &params.b_r1);
    let (n2, inv2, a2) = norm_forward(z2, &params.norm2);
    let (sig2, u2) = silu_forward(&a2);

    let z3 = linear(&u2.view(), &params.w_r2, &params.b_r2);
    let (n3, inv3, a3) = norm_forward(z3, &params.norm3);
    let s = a3 + &h1;
    let (sig_s, h2) = silu_forward(&s);

    let hidden = params.hidden();
    let pooled = h2
        .into_shape_with_order((samples, points, hidden))
        .expect("contiguous")
        .sum_axis(Axis(1))
        * T::from_f64(1.0 / points as f64);

    let o1 = linear(&pooled.view(), &params.w_out1, &params.b_out1);
    let (sig_o1, r1) = silu_forward(&o1);
    let theta = linear(&r1.view(), &params.w_out2, &params.b_out2);

    Ok((
        theta,
        ForwardCache {
            samples,
            points,
            input,
            n1,
            inv1,
            a1,
            sig1,
            h1,
            n2,
            inv2,
            a2,
            sig2,
            u2,
            n3,
            inv3,
            s,
            sig_s,
            g: pooled,
            o1,
            sig_o1,
            r1,
        },
    ))
}

/// Batched backward pass: gradient of `Σ_b d_theta[b]·θ̃[b]` with respect to the weights.
pub fn backward_batch<T: Real>(
    params: &EncoderParams<T>,
    cache: &ForwardCache<T>,
    d_theta: ArrayView2<T>,
) -> Result<EncoderParams<T>> {
    if d_theta.dim() != (cache.samples, params.theta_dim())
        || cache.input.ncols() != params.inputs()
        || cache.g.ncols() != params.hidden()
    {
        return Err(Error::Shape(format!(
            "output gradient {:?} does not match cache of {} samples for Θ = {}",
            d_theta.dim(),
            cache.samples,
            params.theta_dim()
        )));
    }
    let mut grad = params.zeros_like();
    let hidden = params.hidden();

    grad.w_out2 = mm(&cache.r1.t(), &d_theta);
    grad.b_out2 = d_theta.sum_axis(Axis(0));
    let mut do1 = mm(&d_theta, &params.w_out2.t());
    silu_backward(&mut do1, &cache.o1, &cache.sig_o1);
    grad.w_out1 = mm(&cache.g.t(), &do1.view());
    grad.b_out1 = column_sums(&do1);
    let dg = mm(&do1.view(), &params.w_out1.t());

    let inv_points = T::one() / T::from_f64(cache.points as f64);
    let mut ds = Array2::zeros((cache.samples * cache.points, hidden));
    for (b, mut block) in ds
        .axis_chunks_iter_mut(Axis(0), cache.points)
        .enumerate()
    {
        let row = dg.row(b).mapv(|v| v * inv_points);
        block.rows_mut().into_iter().for_each(|mut r| r.assign(&row));
    }
    silu_backward(&mut ds, &cache.s, &cache.sig_s);

    let mut dh1 = ds.clone();
    let mut dz3 = ds;
    norm_backward(&mut dz3, &cache.n3, &cache.inv3, &params.norm3, &mut grad.norm3);
    grad.w_r2 = mm(&cache.u2.t(), &dz3.view());
    grad.b_r2 = column_sums(&dz3);
    let mut dz2 = mm(&dz3.view(), &params.w_r2.t());
    silu_backward(&mut dz2, &cache.a2, &cache.sig2);
    norm_backward(&mut dz2, &cache.n2, &cache.inv2, &params.norm2, &mut grad.norm2);
    grad.w_r1 = mm(&cache.h1.t(), &dz2.view());
    grad.b_r1 = column_sums(&dz2);
    general_mat_mul(T::one(), &dz2, &params.w_r1.t(), T::one(), &mut dh1);

    let mut dz1 = dh1;
    silu_backward(&mut dz1, &cache.a1, &cache.sig1);
    norm_backward(&mut dz1, &cache.n1, &cache.inv1, &params.norm1, &mut grad.norm1);
    grad.w_in = mm(&cache.input.t(), &dz1.view());
    grad.b_in = column_sums(&dz1);
    Ok(grad)
}

/// Encodes one D×M block.
pub fn forward<T: Real>(params: &EncoderParams<T>, psi: ArrayView2<T>) -> Result<(Vec<T>, ForwardCache<T>)> {
    let (theta, cache) = forward_batch(params, psi, psi.nrows())?;
    Ok((theta.row(0).to_vec(), cache))
}

/// Gradient of `d_theta · θ̃` for a single block.
pub fn backward<T: Real>(params: &EncoderParams<T>, cache: &ForwardCache<T>, d_theta: &[T]) -> Result<EncoderParams<T>> {
    let d = ArrayView2::from_shape((1, d_theta.len()), d_theta)
        .map_err(|e| Error::Shape(e.to_string()))?;
    backward_batch(params, cache, d)
}

/// Writes an `ENC1` checkpoint.
pub fn write_checkpoint<W: Write>(params: &EncoderParams<f32>, mut out: W) -> Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    for d in [params.inputs(), params.hidden(), params.theta_dim()] {
        out.write_all(&(d as u64).to_le_bytes())?;
    }
    for t in params.tensors() {
        for v in t {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads an `ENC1` checkpoint.
pub fn read_checkpoint<R: Read>(mut input: R) -> Result<EncoderParams<f32>> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not an encoder checkpoint".into()));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let mut b = [0u8; 8];
        input.read_exact(&mut b)?;
        *d = usize::try_from(u64::from_le_bytes(b))
            .map_err(|_| Error::Format("dimension overflows usize".into()))?;
    }
    if dims.iter().any(|&d| d == 0 || d > 1 << 20) {
        return Err(Error::Format(format!("implausible encoder dimensions {dims:?}")));
    }
    let mut params = EncoderParams::<f32>::zeros(dims[0], dims[1], dims[2]);
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            let mut b = [0u8; 4];
            input.read_exact(&mut b)?;
            *v = f32::from_le_bytes(b);
        }
    }
    if !params.is_finite() {
        return Err(Error::Format("checkpoint contains non-finite weights".into()));
    }
    Ok(params)
}

pub fn save_checkpoint(params: &EncoderParams<f32>, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(params, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<EncoderParams<f32>> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}
