//! J1-J2 spin-1/2 chain with periodic boundaries, local fields and the
//! fixed operator basis used by the parameter-free decoder.
//!
//! Basis ordering: computational states `|s_1 ... s_L>` with `s = 0` (spin up)
//! first and site 1 as the most significant bit. Sites are 1-based throughout.
//! All matrices are real; `σ^y σ^y` products are assembled directly as real
//! flip terms and no complex matrix is ever materialized.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest chain handled by the dense representation (D = 4096).
pub const MAX_SITES: usize = 12;

/// Shift applied to the fields of site `⌊L/2⌋` when breaking symmetries.
pub const SYMMETRY_BREAKING_SHIFT: f64 = 0.1;

/// Full coupling vector of one chain realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinChainParams {
    pub sites: usize,
    pub j1: f64,
    pub j2: f64,
    pub delta: f64,
    /// Longitudinal field per site (length `sites`).
    pub hz: Vec<f64>,
    /// Transverse field per site (length `sites`).
    pub gx: Vec<f64>,
}

impl SpinChainParams {
    /// Chain with site-independent fields.
    pub fn uniform(sites: usize, j1: f64, j2: f64, delta: f64, hz: f64, gx: f64) -> Result<Self> {
        let p = Self {
            sites,
            j1,
            j2,
            delta,
            hz: vec![hz; sites],
            gx: vec![gx; sites],
        };
        p.validate()?;
        Ok(p)
    }

    /// Fixed couplings used for every dataset: `J2 = 0.5`, `Δ = 1`,
    /// `h_z = 0.5`, `g_x = -0.2`, with `J1 = 0` as a placeholder.
    pub fn reference(sites: usize) -> Result<Self> {
        Self::uniform(sites, 0.0, 0.5, 1.0, 0.5, -0.2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 3 {
            return Err(Error::InvalidParams(format!(
                "need at least 3 sites, got {}",
                self.sites
            )));
        }
        if self.sites > MAX_SITES {
            return Err(Error::InvalidParams(format!(
                "{} sites exceeds the dense limit of {MAX_SITES}",
                self.sites
            )));
        }
        if self.hz.len() != self.sites || self.gx.len() != self.sites {
            return Err(Error::InvalidParams(format!(
                "field vectors must have length {} (hz: {}, gx: {})",
                self.sites,
                self.hz.len(),
                self.gx.len()
            )));
        }
        let scalars = [self.j1, self.j2, self.delta];
        if !scalars
            .iter()
            .chain(&self.hz)
            .chain(&self.gx)
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidParams("non-finite coupling".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.sites
    }

    pub fn coupling(&self, c: Coupling) -> f64 {
        match c {
            Coupling::J1 => self.j1,
            Coupling::J2 => self.j2,
        }
    }

    pub fn set_coupling(&mut self, c: Coupling, value: f64) {
        match c {
            Coupling::J1 => self.j1 = value,
            Coupling::J2 => self.j2 = value,
        }
    }
}

/// Couplings that may be promoted to latent parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Coupling {
    J1,
    J2,
}

impl Coupling {
    /// Distance between the two sites of each bond.
    pub fn range(self) -> usize {
        match self {
            Coupling::J1 => 1,
            Coupling::J2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Coupling::J1 => "J1",
            Coupling::J2 => "J2",
        }
    }
}

impl std::fmt::Display for Coupling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Coupling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "J1" => Ok(Coupling::J1),
            "J2" => Ok(Coupling::J2),
            other => Err(Error::InvalidParams(format!("unknown coupling {other:?}"))),
        }
    }
}

/// Which couplings are latent, and where every other value comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSpec {
    free: Vec<Coupling>,
    base: SpinChainParams,
    symmetry_breaking: bool,
}

impl LatentSpec {
    /// `free` lists the latent couplings in latent-vector order. Symmetry
    /// breaking is on; see [`LatentSpec::without_symmetry_breaking`].
    pub fn new(free: Vec<Coupling>, base: SpinChainParams) -> Result<Self> {
        base.validate()?;
        if free.len() > 2 {
            return Err(Error::InvalidParams(format!(
                "at most two latent couplings, got {}",
                free.len()
            )));
        }
        if free.len() == 2 && free[0] == free[1] {
            return Err(Error::InvalidParams("duplicate latent coupling".into()));
        }
        if base.sites < 4 {
            return Err(Error::InvalidParams(
                "symmetry breaking needs at least 4 sites".into(),
            ));
        }
        Ok(Self {
            free,
            base,
            symmetry_breaking: true,
        })
    }

    /// Standard one-parameter family: `J1` free, reference couplings.
    pub fn j1_only(sites: usize) -> Result<Self> {
        Self::new(vec![Coupling::J1], SpinChainParams::reference(sites)?)
    }

    /// Two-parameter family: `(J1, J2)` free, reference fields.
    pub fn j1_j2(sites: usize) -> Result<Self> {
        Self::new(vec![Coupling::J1, Coupling::J2], SpinChainParams::reference(sites)?)
    }

    /// Disables the on-site perturbation; only meant for symmetry checks.
    pub fn without_symmetry_breaking(mut self) -> Self {
        self.symmetry_breaking = false;
        self
    }

    pub fn free(&self) -> &[Coupling] {
        &self.free
    }

    pub fn base(&self) -> &SpinChainParams {
        &self.base
    }

    pub fn symmetry_breaking(&self) -> bool {
        self.symmetry_breaking
    }

    /// Latent dimension Θ.
    pub fn theta_dim(&self) -> usize {
        self.free.len()
    }

    pub fn sites(&self) -> usize {
        self.base.sites
    }

    /// Fully resolved parameters for a latent vector, perturbation included.
    pub fn params(&self, theta: &[f64]) -> Result<SpinChainParams> {
        if theta.len() != self.free.len() {
            return Err(Error::Shape(format!(
                "latent vector has length {}, expected {}",
                theta.len(),
                self.free.len()
            )));
        }
        let mut p = self.base.clone();
        for (&c, &v) in self.free.iter().zip(theta) {
            p.set_coupling(c, v);
        }
        p.validate()?;
        if self.symmetry_breaking {
            apply_symmetry_breaking(&p)
        } else {
            Ok(p)
        }
    }

    /// The latent vector of the base parameters.
    pub fn base_theta(&self) -> Vec<f64> {
        self.free.iter().map(|&c| self.base.coupling(c)).collect()
    }
}

/// Dense real symmetric matrix of dimension `2^L`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    entries: Array2<f64>,
}

impl HamiltonianMatrix {
    /// Wraps a square array; symmetry is checked exactly.
    pub fn from_array(entries: Array2<f64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(Error::Shape(format!("{r}x{c} matrix is not square")));
        }
        for a in 0..r {
            for b in 0..a {
                if entries[[a, b]] != entries[[b, a]] {
                    return Err(Error::Shape(format!("matrix not symmetric at ({a},{b})")));
                }
            }
        }
        Ok(Self { entries })
    }

    pub(crate) fn zeros(dim: usize) -> Self {
        Self {
            entries: Array2::zeros((dim, dim)),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.diag().sum()
    }

    /// `self + factor * other`, entrywise.
    pub fn scaled_add(&mut self, factor: f64, other: &HamiltonianMatrix) {
        self.entries.scaled_add(factor, &other.entries);
    }
}

/// Pauli axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Embedded single-site Pauli operator in complex-free factored form.
///
/// The operator equals `matrix` when `imaginary` is false and `i * matrix`
/// otherwise. Only `σ^y` is imaginary; its real factor is antisymmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliEmbedding {
    pub matrix: Array2<f64>,
    pub imaginary: bool,
}

/// Bit position (from the least significant end) holding 1-based `site`.
#[inline]
fn bit_of(site: usize, sites: usize) -> usize {
    sites - site
}

fn check_site(site: usize, sites: usize) -> Result<()> {
    if sites < 1 || sites > MAX_SITES {
        return Err(Error::InvalidParams(format!(
            "site count {sites} outside 1..={MAX_SITES}"
        )));
    }
    if site < 1 || site > sites {
        return Err(Error::SiteOutOfRange { site, sites });
    }
    Ok(())
}

/// `I ⊗ … ⊗ σ^axis ⊗ … ⊗ I` with the Pauli matrix at `site` (1-based).
pub fn embed_pauli(site: usize, axis: Axis, sites: usize) -> Result<PauliEmbedding> {
    check_site(site, sites)?;
    let dim = 1usize << sites;
    let mask = 1usize << bit_of(site, sites);
    let mut m = Array2::zeros((dim, dim));
    for s in 0..dim {
        let up = s & mask == 0;
        match axis {
            Axis::Z => m[[s, s]] = if up { 1.0 } else { -1.0 },
            Axis::X => m[[s ^ mask, s]] = 1.0,
            // σ^y|0> = i|1>, σ^y|1> = -i|0>; the factor i is stripped.
            Axis::Y => m[[s ^ mask, s]] = if up { 1.0 } else { -1.0 },
        }
    }
    Ok(PauliEmbedding {
        matrix: m,
        imaginary: axis == Axis::Y,
    })
}

/// Adds `coef * (σ^x_a σ^x_b + σ^y_a σ^y_b + Δ σ^z_a σ^z_b)` for bit
/// positions `a != b`.
fn add_bond(h: &mut Array2<f64>, a: usize, b: usize, coef: f64, delta: f64) {
    let dim = h.nrows();
    let flip = (1usize << a) | (1usize << b);
    for s in 0..dim {
        let parallel = ((s >> a) & 1) == ((s >> b) & 1);
        if parallel {
            h[[s, s]] += coef * delta;
        } else {
            h[[s, s]] -= coef * delta;
            // xx and yy add up on antiparallel pairs and cancel on parallel ones.
            h[[s ^ flip, s]] += 2.0 * coef;
        }
    }
}

fn add_fields(h: &mut Array2<f64>, bit: usize, hz: f64, gx: f64) {
    let dim = h.nrows();
    let mask = 1usize << bit;
    for s in 0..dim {
        h[[s, s]] += if s & mask == 0 { hz } else { -hz };
        h[[s ^ mask, s]] += gx;
    }
}

/// `σ^x_i σ^x_j + σ^y_i σ^y_j + Δ σ^z_i σ^z_j`; indices wrap modulo `sites`.
pub fn coupling_term(i: usize, j: usize, delta: f64, sites: usize) -> Result<HamiltonianMatrix> {
    if sites < 1 || sites > MAX_SITES {
        return Err(Error::InvalidParams(format!(
            "site count {sites} outside 1..={MAX_SITES}"
        )));
    }
    if i < 1 || j < 1 {
        return Err(Error::SiteOutOfRange {
            site: i.min(j),
            sites,
        });
    }
    let (wi, wj) = ((i - 1) % sites + 1, (j - 1) % sites + 1);
    if wi == wj {
        return Err(Error::SelfCoupling { i, j, sites });
    }
    let mut h = HamiltonianMatrix::zeros(1 << sites);
    add_bond(
        &mut h.entries,
        bit_of(wi, sites),
        bit_of(wj, sites),
        1.0,
        delta,
    );
    Ok(h)
}

/// `Σ_i h_{i,i+range}` with periodic wrap.
fn bond_sum(sites: usize, range: usize, delta: f64) -> HamiltonianMatrix {
    let mut h = HamiltonianMatrix::zeros(1 << sites);
    for i in 1..=sites {
        let j = (i - 1 + range) % sites + 1;
        add_bond(
            &mut h.entries,
            bit_of(i, sites),
            bit_of(j, sites),
            1.0,
            delta,
        );
    }
    h
}

/// Dense Hamiltonian of one chain realization.
pub fn build_hamiltonian(p: &SpinChainParams) -> Result<HamiltonianMatrix> {
    p.validate()?;
    let l = p.sites;
    let mut h = HamiltonianMatrix::zeros(p.dim());
    for i in 1..=l {
        for (coef, range) in [(p.j1, 1), (p.j2, 2)] {
            if coef != 0.0 {
                let j = (i - 1 + range) % l + 1;
                add_bond(&mut h.entries, bit_of(i, l), bit_of(j, l), coef, p.delta);
            }
        }
        add_fields(&mut h.entries, bit_of(i, l), p.hz[i - 1], p.gx[i - 1]);
    }
    Ok(h)
}

/// Flips the sign of both fields on site 1, lowers `h_z` and raises `g_x`
/// on site `⌊L/2⌋` by 0.1. Not idempotent.
pub fn apply_symmetry_breaking(p: &SpinChainParams) -> Result<SpinChainParams> {
    p.validate()?;
    if p.sites < 4 {
        return Err(Error::InvalidParams(format!(
            "symmetry breaking needs at least 4 sites, got {}",
            p.sites
        )));
    }
    let mut q = p.clone();
    q.hz[0] = -q.hz[0];
    q.gx[0] = -q.gx[0];
    let mid = p.sites / 2 - 1;
    q.hz[mid] -= SYMMETRY_BREAKING_SHIFT;
    q.gx[mid] += SYMMETRY_BREAKING_SHIFT;
    Ok(q)
}

/// Fixed operators of the decoder: `H(θ̃) = constant + Σ_ℓ θ̃_ℓ B_ℓ`.
#[derive(Debug, Clone)]
pub struct DecoderBasis {
    pub constant: HamiltonianMatrix,
    pub terms: Vec<(Coupling, HamiltonianMatrix)>,
}

impl DecoderBasis {
    pub fn theta_dim(&self) -> usize {
        self.terms.len()
    }

    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    /// Candidate Hamiltonian for a latent vector.
    pub fn assemble(&self, theta: &[f64]) -> Result<HamiltonianMatrix> {
        if theta.len() != self.terms.len() {
            return Err(Error::Shape(format!(
                "latent vector has length {}, basis has {} terms",
                theta.len(),
                self.terms.len()
            )));
        }
        let mut h = self.constant.clone();
        for ((_, b), &t) in self.terms.iter().zip(theta) {
            h.scaled_add(t, b);
        }
        Ok(h)
    }
}

/// `B_ℓ = ∂H/∂θ_ℓ` per free coupling, plus the constant part with all free
/// couplings zeroed.
pub fn basis_operators(spec: &LatentSpec) -> Result<DecoderBasis> {
    let base = &spec.base;
    let zeros = vec![0.0; spec.theta_dim()];
    let constant = build_hamiltonian(&spec.params(&zeros)?)?;
    let terms = spec
        .free
        .iter()
        .map(|&c| (c, bond_sum(base.sites, c.range(), base.delta)))
        .collect();
    Ok(DecoderBasis { constant, terms })
}
