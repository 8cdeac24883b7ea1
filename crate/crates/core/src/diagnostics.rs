//! Eigenstate structure measures: density of states, half-chain entanglement
//! entropy, participation entropy and state fidelity.
//!
//! Natural logarithms throughout. Normalized entropies divide by their
//! theoretical maxima: `⌊L/2⌋ ln 2` for the half-chain entropy and `ln D` for
//! the participation entropy.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::Serialize;

use crate::eigensolver::{eigenvalues_symmetric, Spectrum};
use crate::error::{Error, Result};

/// Reduced-density eigenvalues below this are treated as exact zeros.
pub const EIGENVALUE_CLIP: f64 = 1e-14;

/// Allowed deviation of `‖ψ‖²` from one.
pub const NORM_TOLERANCE: f64 = 1e-9;

fn check_normalized(state: ArrayView1<f64>) -> Result<()> {
    let n2 = state.dot(&state);
    if (n2 - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NotNormalized(n2));
    }
    Ok(())
}

fn shannon(weights: impl Iterator<Item = f64>) -> f64 {
    weights
        .filter(|&p| p > EIGENVALUE_CLIP)
        .map(|p| -p * p.ln())
        .sum()
}

/// Von Neumann entropy of the first `cut` sites.
///
/// The Schmidt weights are the eigenvalues of the smaller Gram matrix of the
/// `2^cut × 2^(L-cut)` reshape, i.e. the squared singular values.
pub fn entanglement_entropy(state: ArrayView1<f64>, sites: usize, cut: usize) -> Result<f64> {
    if sites == 0 || state.len() != 1 << sites {
        return Err(Error::Shape(format!(
            "state of length {} does not match {sites} sites",
            state.len()
        )));
    }
    if cut < 1 || cut >= sites {
        return Err(Error::InvalidParams(format!(
            "cut {cut} outside 1..{sites}"
        )));
    }
    check_normalized(state)?;
    let rows = 1usize << cut;
    let cols = 1usize << (sites - cut);
    let a = state
        .to_owned()
        .into_shape_with_order((rows, cols))
        .map_err(|e| Error::Shape(e.to_string()))?;
    let gram: Array2<f64> = if rows <= cols { a.dot(&a.t()) } else { a.t().dot(&a) };
    let weights = eigenvalues_symmetric(gram.view())?;
    Ok(shannon(weights.iter().copied()))
}

/// Shannon entropy of `|c_k|²` in the computational basis.
pub fn participation_entropy(state: ArrayView1<f64>) -> Result<f64> {
    check_normalized(state)?;
    Ok(shannon(state.iter().map(|c| c * c)))
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    check_normalized(a)?;
    check_normalized(b)?;
    let o = a.dot(&b);
    Ok((o * o).min(1.0))
}

/// Equal-width histogram over the rescaled energy `(E - E_0)/(E_max - E_0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Center of the most populated bin (first one on ties).
    pub fn peak_center(&self) -> f64 {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        self.centers[best]
    }
}

fn rescale(energies: &[f64]) -> Result<(f64, f64)> {
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let emax = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(emax > e0) {
        return Err(Error::DegenerateSpectrum);
    }
    Ok((e0, emax - e0))
}

pub fn density_of_states(energies: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidParams("need at least one bin".into()));
    }
    let (e0, width) = rescale(energies)?;
    let mut counts = vec![0usize; bins];
    for &e in energies {
        let x = (e - e0) / width;
        let b = ((x * bins as f64).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    let centers = (0..bins).map(|b| (b as f64 + 0.5) / bins as f64).collect();
    Ok(Histogram { centers, counts })
}

/// Per-state diagnostics of a full spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    /// `m / D` with 1-based `m`.
    pub index_norm: Vec<f64>,
    pub energy_rescaled: Vec<f64>,
    pub svn_norm: Vec<f64>,
    pub spart_norm: Vec<f64>,
}

impl DiagnosticsRecord {
    pub fn compute(spectrum: &Spectrum, sites: usize) -> Result<Self> {
        let dim = spectrum.dim();
        if dim != 1 << sites {
            return Err(Error::Shape(format!(
                "spectrum of dimension {dim} does not match {sites} sites"
            )));
        }
        let energies = spectrum.energies.as_slice().expect("contiguous");
        let (e0, width) = rescale(energies)?;
        let half = sites / 2;
        let svn_max = half as f64 * std::f64::consts::LN_2;
        let spart_max = (dim as f64).ln();
        let mut rec = DiagnosticsRecord {
            index_norm: Vec::with_capacity(dim),
            energy_rescaled: Vec::with_capacity(dim),
            svn_norm: Vec::with_capacity(dim),
            spart_norm: Vec::with_capacity(dim),
        };
        for (m, col) in spectrum.vectors.columns().into_iter().enumerate() {
            rec.index_norm.push((m + 1) as f64 / dim as f64);
            rec.energy_rescaled.push((energies[m] - e0) / width);
            rec.svn_norm
                .push(entanglement_entropy(col, sites, half)? / svn_max);
            rec.spart_norm.push(participation_entropy(col)? / spart_max);
        }
        Ok(rec)
    }

    pub fn len(&self) -> usize {
        self.index_norm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_norm.is_empty()
    }

    /// Mean normalized half-chain entropy over 0-based states `range`.
    pub fn mean_svn(&self, range: std::ops::Range<usize>) -> f64 {
        let n = range.len() as f64;
        self.svn_norm[range].iter().sum::<f64>() / n
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["m_index", "index_norm", "energy_rescaled", "svn_norm", "spart_norm"])?;
        for m in 0..self.len() {
            w.write_record(&[
                (m + 1).to_string(),
                self.index_norm[m].to_string(),
                self.energy_rescaled[m].to_string(),
                self.svn_norm[m].to_string(),
                self.spart_norm[m].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolver::diagonalize;
    use crate::spin_chain::{build_hamiltonian, LatentSpec};
    use ndarray::{arr1, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Cyclic Jacobi eigenvalues; independent of the Householder/QL path.
    fn jacobi_eigenvalues(mut a: Array2<f64>) -> Vec<f64> {
        let n = a.nrows();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[[i, j]] * a[[i, j]])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[[p, q]].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[[k, p]], a[[k, q]]);
                        a[[k, p]] = c * akp - s * akq;
                        a[[k, q]] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                        a[[p, k]] = c * apk - s * aqk;
                        a[[q, k]] = s * apk + c * aqk;
                    }
                }
            }
        }
        a.diag().to_vec()
    }

    /// Partial trace over the last `sites - cut` sites by explicit summation.
    fn reduced_density(state: &Array1<f64>, sites: usize, cut: usize) -> Array2<f64> {
        let da = 1usize << cut;
        let db = 1usize << (sites - cut);
        Array2::from_shape_fn((da, da), |(a, a2)| {
            (0..db).map(|b| state[a * db + b] * state[a2 * db + b]).sum()
        })
    }

    fn oracle_entropy(state: &Array1<f64>, sites: usize, cut: usize) -> f64 {
        jacobi_eigenvalues(reduced_density(state, sites, cut))
            .into_iter()
            .filter(|&l| l > 1e-14)
            .map(|l| -l * l.ln())
            .sum()
    }

    fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
        let v: Array1<f64> = Array1::from_shape_fn(dim, |_| rng.gen_range(-1.0..1.0));
        let n = v.dot(&v).sqrt();
        v / n
    }

    #[test]
    fn product_state_has_no_entanglement() {
        let mut s = Array1::zeros(8);
        s[0] = 1.0;
        assert_eq!(entanglement_entropy(s.view(), 3, 1).unwrap(), 0.0);
    }

    #[test]
    fn bell_state() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = arr1(&[r, 0.0, 0.0, r]);
        let e = entanglement_entropy(s.view(), 2, 1).unwrap();
        assert!((e - std::f64::consts::LN_2).abs() <= 1e-9);
    }

    #[test]
    fn ground_state_matches_partial_trace_oracle() {
        let spec = LatentSpec::j1_only(6).unwrap();
        let h = build_hamiltonian(&spec.params(&[0.4]).unwrap()).unwrap();
        let s = diagonalize(&h).unwrap();
        let gs = s.vectors.column(0).to_owned();
        let e = entanglement_entropy(gs.view(), 6, 3).unwrap();
        assert!((e - oracle_entropy(&gs, 6, 3)).abs() <= 1e-9);
        assert!(e > 0.0);
    }

    #[test]
    fn entropy_errors() {
        let s = arr1(&[1.0, 0.0, 0.0, 0.0]);
        assert!(entanglement_entropy(s.view(), 2, 0).is_err());
        assert!(entanglement_entropy(s.view(), 2, 2).is_err());
        assert!(entanglement_entropy(arr1(&[1.0, 1.0, 0.0, 0.0]).view(), 2, 1).is_err());
        assert!(participation_entropy(arr1(&[0.5, 0.5]).view()).is_err());
    }

    #[test]
    fn participation_examples() {
        let mut e5 = Array1::zeros(16);
        e5[4] = 1.0;
        assert_eq!(participation_entropy(e5.view()).unwrap(), 0.0);

        let d = 64;
        let u = Array1::from_elem(d, 1.0 / (d as f64).sqrt());
        assert!((participation_entropy(u.view()).unwrap() - (d as f64).ln()).abs() <= 1e-9);

        let s = arr1(&[0.5f64.sqrt(), 0.5, 0.5, 0.0]);
        // -(0.5 ln 0.5 + 2 * 0.25 ln 0.25) = 1.5 ln 2
        let expect = 1.5 * std::f64::consts::LN_2;
        assert!((participation_entropy(s.view()).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 1.0397).abs() < 1e-4);
    }

    #[test]
    fn fidelity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = random_state(16, &mut rng);
        assert!((fidelity(v.view(), v.view()).unwrap() - 1.0).abs() < 1e-12);
        let neg = -&v;
        assert!((fidelity(v.view(), neg.view()).unwrap() - 1.0).abs() < 1e-12);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let f = fidelity(arr1(&[1.0, 0.0]).view(), arr1(&[r, r]).view()).unwrap();
        assert!((f - 0.5).abs() < 1e-12);
        assert!(fidelity(arr1(&[1.0, 0.0]).view(), arr1(&[2.0, 0.0]).view()).is_err());
    }

    #[test]
    fn dos_examples() {
        let h = density_of_states(&[0.0, 1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(h.counts, vec![2, 2]);
        assert_eq!(h.centers, vec![0.25, 0.75]);
        let h = density_of_states(&[0.1, 0.4, 0.9, 1.7, 2.0], 1).unwrap();
        assert_eq!(h.counts, vec![5]);
        assert!(matches!(
            density_of_states(&[1.0, 1.0], 3),
            Err(Error::DegenerateSpectrum)
        ));
        assert!(density_of_states(&[0.0, 1.0], 0).is_err());
    }

    #[test]
    fn record_invariants_and_csv() {
        let spec = LatentSpec::j1_only(6).unwrap();
        let h = build_hamiltonian(&spec.params(&[-0.4]).unwrap()).unwrap();
        let s = diagonalize(&h).unwrap();
        let rec = DiagnosticsRecord::compute(&s, 6).unwrap();
        assert_eq!(rec.len(), 64);
        assert!(rec.index_norm.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*rec.index_norm.last().unwrap(), 1.0);
        for v in rec.svn_norm.iter().chain(&rec.spart_norm) {
            assert!((0.0..=1.0 + 1e-9).contains(v));
        }
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("m_index,index_norm,energy_rescaled,svn_norm,spart_norm\n"));
        assert_eq!(text.lines().count(), 65);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn entropy_bounds_and_oracle_agreement(
                sites in 2usize..=7,
                cut_frac in 0.0f64..1.0,
                seed in any::<u64>(),
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let state = random_state(1 << sites, &mut rng);
                let cut = 1 + ((sites - 1) as f64 * cut_frac) as usize;
                let cut = cut.min(sites - 1);
                let s = entanglement_entropy(state.view(), sites, cut).unwrap();
                prop_assert!(s >= 0.0);
                prop_assert!(s <= cut.min(sites - cut) as f64 * std::f64::consts::LN_2 + 1e-12);
                let other = oracle_entropy(&state, sites, cut);
                prop_assert!((s - other).abs() <= 1e-9);
                let p = participation_entropy(state.view()).unwrap();
                prop_assert!(p >= 0.0 && p <= ((1usize << sites) as f64).ln() + 1e-12);
            }

            #[test]
            fn entropy_symmetric_under_complement(sites in 2usize..=7, seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let state = random_state(1 << sites, &mut rng);
                for cut in 1..sites {
                    let a = entanglement_entropy(state.view(), sites, cut).unwrap();
                    // the complement of the first `cut` sites is the first
                    // `sites - cut` sites of the site-reversed state
                    let dim = 1usize << sites;
                    let reversed = Array1::from_shape_fn(dim, |s| {
                        let mut r = 0;
                        for k in 0..sites {
                            r |= ((s >> k) & 1) << (sites - 1 - k);
                        }
                        state[r]
                    });
                    let b_rev = entanglement_entropy(reversed.view(), sites, sites - cut).unwrap();
                    prop_assert!((a - b_rev).abs() <= 1e-9);
                }
            }
        }
    }
}
