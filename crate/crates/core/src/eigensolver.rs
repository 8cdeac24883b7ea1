//! Dense real-symmetric eigendecomposition.
//!
//! Householder reduction to tridiagonal form followed by the implicit-shift
//! QL iteration (the EISPACK `tred2`/`tql2` pair). The working matrix is
//! kept transposed so every inner loop runs over contiguous memory; the
//! eigenvectors therefore come out as rows and are transposed once at the
//! end. Results are sorted ascending and each eigenvector is gauge fixed.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::spin_chain::HamiltonianMatrix;

/// QL sweeps allowed per eigenvalue before giving up.
pub const MAX_QL_ITERATIONS: usize = 60;

/// Eigenpairs closer than this are reported as near-degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;

/// Sorted eigenvalues and gauge-fixed eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Ascending.
    pub energies: Array1<f64>,
    /// Column `m` is the eigenvector of `energies[m]`.
    pub vectors: Array2<f64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Pairs `(m, m+1)` (0-based) whose gap is below [`DEGENERACY_GAP`].
    pub fn near_degenerate_pairs(&self) -> Vec<(usize, usize)> {
        near_degenerate(self.energies.as_slice().expect("contiguous"))
    }
}

pub(crate) fn near_degenerate(energies: &[f64]) -> Vec<(usize, usize)> {
    energies
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] - w[0] < DEGENERACY_GAP)
        .map(|(m, _)| (m, m + 1))
        .collect()
}

fn check_input(h: ArrayView2<f64>) -> Result<()> {
    let (r, c) = h.dim();
    if r != c {
        return Err(Error::Shape(format!("{r}x{c} matrix is not square")));
    }
    if r == 0 {
        return Err(Error::Shape("empty matrix".into()));
    }
    if !h.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Full spectrum of a Hamiltonian.
pub fn diagonalize(h: &HamiltonianMatrix) -> Result<Spectrum> {
    diagonalize_symmetric(h.entries().view())
}

/// Full spectrum of any real symmetric matrix (only the lower triangle is read).
pub fn diagonalize_symmetric(h: ArrayView2<f64>) -> Result<Spectrum> {
    check_input(h)?;
    let n = h.nrows();
    let mut t = lower_transposed(h);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut t, &mut d, &mut e, true);
    ql_implicit(&mut d, &mut e, Some(&mut t))?;

    // eigenvectors are rows of t; sort by energy, stable for ties
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let energies = Array1::from_iter(order.iter().map(|&k| d[k]));
    let mut vectors = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        vectors.column_mut(col).assign(&t.row(k));
    }
    fix_gauge_in_place(&mut vectors)?;
    Ok(Spectrum { energies, vectors })
}

/// Ascending eigenvalues only; skips the O(D³) vector accumulation.
pub fn eigenvalues(h: &HamiltonianMatrix) -> Result<Array1<f64>> {
    eigenvalues_symmetric(h.entries().view())
}

pub fn eigenvalues_symmetric(h: ArrayView2<f64>) -> Result<Array1<f64>> {
    check_input(h)?;
    let n = h.nrows();
    let mut t = lower_transposed(h);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut t, &mut d, &mut e, false);
    ql_implicit(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(Array1::from(d))
}

/// Transpose of the lower triangle, mirrored: `t[j][k] = h[k][j]` for k ≥ j.
fn lower_transposed(h: ArrayView2<f64>) -> Array2<f64> {
    let n = h.nrows();
    let mut t = Array2::zeros((n, n));
    for k in 0..n {
        for j in 0..=k {
            t[[j, k]] = h[[k, j]];
            t[[k, j]] = h[[k, j]];
        }
    }
    t
}

/// Householder tridiagonalization.
///
/// On exit `d` holds the diagonal and `e[1..]` the subdiagonal (`e[0] = 0`).
/// With `accumulate`, `t` holds the transposed orthogonal transformation.
fn tridiagonalize(t: &mut Array2<f64>, d: &mut [f64], e: &mut [f64], accumulate: bool) {
    let n = d.len();
    let ts = t.as_slice_mut().expect("standard layout");
    // t[j*n + k] stands for V[k][j] of the column-oriented formulation
    let at = |j: usize, k: usize| j * n + k;

    for j in 0..n {
        d[j] = ts[at(j, n - 1)];
    }

    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|v| v.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = ts[at(j, i - 1)];
                ts[at(j, i)] = 0.0;
                ts[at(i, j)] = 0.0;
            }
        } else {
            for v in &mut d[..i] {
                *v /= scale;
                h += *v * *v;
            }
            let f = d[i - 1];
            let g = if f > 0.0 { -h.sqrt() } else { h.sqrt() };
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].fill(0.0);

            for j in 0..i {
                let f = d[j];
                ts[at(i, j)] = f;
                let row = &ts[at(j, 0)..at(j, 0) + n];
                let mut g = e[j] + row[j] * f;
                for k in (j + 1)..i {
                    g += row[k] * d[k];
                    e[k] += row[k] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let (f, g) = (d[j], e[j]);
                let row = &mut ts[at(j, 0)..at(j, 0) + n];
                for k in j..i {
                    row[k] -= f * e[k] + g * d[k];
                }
                d[j] = row[i - 1];
                row[i] = 0.0;
            }
        }
        d[i] = h;
    }

    if !accumulate {
        for j in 0..n {
            d[j] = ts[at(j, j)];
        }
        e[0] = 0.0;
        return;
    }

    for i in 0..n - 1 {
        ts[at(i, n - 1)] = ts[at(i, i)];
        ts[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = ts[at(i + 1, k)] / h;
            }
            let (lo, hi) = ts.split_at_mut(at(i + 1, 0));
            let pivot = &hi[..=i];
            for j in 0..=i {
                let rest = &mut lo[at(j, 0)..at(j, 0) + i + 1];
                let g: f64 = pivot.iter().zip(rest.iter()).map(|(a, b)| a * b).sum();
                for k in 0..=i {
                    rest[k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            ts[at(i + 1, k)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = ts[at(j, n - 1)];
        ts[at(j, n - 1)] = 0.0;
    }
    ts[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL on the tridiagonal `(d, e)`; rotations are applied to
/// the rows of `rows` when given.
fn ql_implicit(d: &mut [f64], e: &mut [f64], mut rows: Option<&mut Array2<f64>>) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        // m == n cannot happen: e[n-1] = 0
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::NoConvergence {
                        index: l,
                        iterations: MAX_QL_ITERATIONS,
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for v in &mut d[l + 2..n] {
                    *v -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    if let Some(t) = rows.as_deref_mut() {
                        let ts = t.as_slice_mut().expect("standard layout");
                        let (lo, hi) = ts.split_at_mut((i + 1) * n);
                        let ri = &mut lo[i * n..];
                        let rj = &mut hi[..n];
                        for (a, b) in ri.iter_mut().zip(rj.iter_mut()) {
                            let hk = *b;
                            *b = s * *a + c * hk;
                            *a = c * *a - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Scales every column by ±1 so its largest-magnitude entry (lowest row on
/// ties) is positive. Idempotent.
pub fn fix_gauge(vectors: &Array2<f64>) -> Result<Array2<f64>> {
    let mut v = vectors.clone();
    fix_gauge_in_place(&mut v)?;
    Ok(v)
}

pub fn fix_gauge_in_place(vectors: &mut Array2<f64>) -> Result<()> {
    for (c, mut col) in vectors.columns_mut().into_iter().enumerate() {
        let mut best = 0.0;
        let mut sign = 0.0;
        for &v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if best == 0.0 {
            return Err(Error::ZeroColumn(c));
        }
        if sign < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
    Ok(())
}

/// 1-based index of the eigenvalue closest to `Tr H / D`, ties toward the
/// lower index.
pub fn mean_energy_index(spectrum: &Spectrum, h: &HamiltonianMatrix) -> usize {
    let mean = h.trace() / h.dim() as f64;
    closest_index(spectrum.energies.as_slice().expect("contiguous"), mean)
}

pub(crate) fn closest_index(energies: &[f64], target: f64) -> usize {
    let mut best = 0;
    let mut best_gap = f64::INFINITY;
    for (m, &e) in energies.iter().enumerate() {
        let gap = (e - target).abs();
        if gap < best_gap {
            best_gap = gap;
            best = m;
        }
    }
    best + 1
}
