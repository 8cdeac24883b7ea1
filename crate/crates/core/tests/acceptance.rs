//! Acceptance criteria 1–11.
//!
//! Runs as a plain binary so that every verdict line is printed under
//! `cargo test`. A criterion passes when all of its checks hold and its
//! wall-clock time stays within the stated bound. Set `EIGENLEARN_CRITERIA`
//! to a comma-separated list to run a subset.

use std::f64::consts::LN_2;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eigenlearn::diagnostics::{entanglement_entropy, participation_entropy, DiagnosticsRecord};
use eigenlearn::eigensolver::diagonalize;
use eigenlearn::encoder::{backward, forward, init_params, EncoderParams};
use eigenlearn::experiments::output::{rerun_from_manifest, run_and_emit};
use eigenlearn::experiments::{
    learnability_gap_records, run_experiment, ExperimentKind, ExperimentSpec, RunCache, Settings,
    Table,
};
use eigenlearn::loss::{rayleigh_loss, LossConfig, ProjectedBasis};
use eigenlearn::protocols::SpectralProtocol;
use eigenlearn::spin_chain::{
    apply_symmetry_breaking, basis_operators, build_hamiltonian, LatentSpec, SpinChainParams,
};
use eigenlearn::stats::{mean, median, spearman};
use eigenlearn::training::{generate_dataset, loss_decreased, Dataset};

/// Epoch budgets of the trend criteria whose configuration is not pinned,
/// chosen so each fits its time bound on a single core.
const STATE_COUNT_EPOCHS: usize = 60;
const CAPACITY_EPOCHS: usize = 60;
const HOLE_EPOCHS: usize = 300;
const VARIANT_EPOCHS: usize = 150;

type Check = Result<(bool, String), String>;

struct Verdict {
    id: usize,
    pass: bool,
}

fn run_criterion(id: usize, name: &str, bound_secs: Option<f64>, f: impl FnOnce() -> Check) -> Verdict {
    let start = Instant::now();
    let outcome = f();
    let secs = start.elapsed().as_secs_f64();
    let (checks, detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    let in_time = bound_secs.is_none_or(|b| secs <= b);
    let pass = checks && in_time;
    let timing = match bound_secs {
        Some(b) => format!("{secs:.1} s of {b:.0} s{}", if in_time { "" } else { " EXCEEDED" }),
        None => format!("{secs:.1} s"),
    };
    println!(
        "criterion {id:>2} {}  {name}: {detail} [{timing}]",
        if pass { "PASS" } else { "FAIL" }
    );
    Verdict { id, pass }
}

fn fail_msg<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn random_params(rng: &mut ChaCha8Rng, sites: usize) -> SpinChainParams {
    SpinChainParams {
        sites,
        j1: rng.gen_range(-2.0..2.0),
        j2: rng.gen_range(-2.0..2.0),
        delta: rng.gen_range(-2.0..2.0),
        hz: (0..sites).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        gx: (0..sites).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    }
}

/// Eigenvalues by Wilkinson-shifted QR iteration with deflation of the
/// trailing row; Householder QR, dense, no shared code with the solver.
fn qr_deflation_eigenvalues(h: &Array2<f64>) -> Vec<f64> {
    let mut a: Vec<Vec<f64>> = h.rows().into_iter().map(|r| r.to_vec()).collect();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut n = a.len();
    let mut out = Vec::with_capacity(n);
    let mut iterations = 0;
    while n > 1 {
        let off = (0..n - 1).map(|j| a[n - 1][j].abs()).fold(0.0, f64::max);
        if off <= 1e-15 * scale {
            out.push(a[n - 1][n - 1]);
            n -= 1;
            continue;
        }
        iterations += 1;
        assert!(iterations < 100 * a.len(), "oracle did not converge");
        let (p, q, r) = (a[n - 2][n - 2], a[n - 2][n - 1], a[n - 1][n - 1]);
        let d = 0.5 * (p - r);
        let sgn = if d >= 0.0 { 1.0 } else { -1.0 };
        let mu = r - q * q / (d + sgn * (d * d + q * q).sqrt());
        // Householder QR of the shifted leading block; Q accumulated explicitly.
        let mut rmat: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| a[i][j] - if i == j { mu } else { 0.0 }).collect())
            .collect();
        let mut qmat: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        for k in 0..n - 1 {
            let norm = (k..n).map(|i| rmat[i][k] * rmat[i][k]).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let alpha = if rmat[k][k] > 0.0 { -norm } else { norm };
            let mut v: Vec<f64> = (k..n).map(|i| rmat[i][k]).collect();
            v[0] -= alpha;
            let vn = v.iter().map(|x| x * x).sum::<f64>();
            if vn == 0.0 {
                continue;
            }
            for j in 0..n {
                let s = (k..n).map(|i| v[i - k] * rmat[i][j]).sum::<f64>() * 2.0 / vn;
                for i in k..n {
                    rmat[i][j] -= s * v[i - k];
                }
            }
            for row in qmat.iter_mut() {
                let s = (k..n).map(|i| row[i] * v[i - k]).sum::<f64>() * 2.0 / vn;
                for i in k..n {
                    row[i] -= s * v[i - k];
                }
            }
        }
        // A ← Qᵀ A Q on the active block.
        let mut aq = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                aq[i][j] = (0..n).map(|k| a[i][k] * qmat[k][j]).sum();
            }
        }
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|k| qmat[k][i] * aq[k][j]).sum();
            }
        }
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (a[i][j] + a[j][i]);
                a[i][j] = s;
                a[j][i] = s;
            }
        }
    }
    out.push(a[0][0]);
    out.sort_by(f64::total_cmp);
    out
}

fn criterion_1() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_trace = 0.0f64;
    let mut worst_residual = 0.0f64;
    for k in 0..20 {
        let sites = [3, 4, 6][k % 3];
        let p = random_params(&mut rng, sites);
        let h = build_hamiltonian(&p).map_err(fail_msg)?;
        let s = diagonalize(&h).map_err(fail_msg)?;
        let sum_e: f64 = s.energies.sum();
        let scale = s.energies.iter().map(|e| e.abs()).sum::<f64>().max(1.0);
        worst_trace = worst_trace.max((h.trace() - sum_e).abs() / scale);
        let hv = h.entries().dot(&s.vectors);
        for (m, &e) in s.energies.iter().enumerate() {
            let r = (&hv.column(m) - &(&s.vectors.column(m) * e)).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            worst_residual = worst_residual.max(r);
        }
    }
    let mut worst_oracle = 0.0f64;
    for _ in 0..3 {
        let p = random_params(&mut rng, 6);
        let h = build_hamiltonian(&p).map_err(fail_msg)?;
        let e = diagonalize(&h).map_err(fail_msg)?.energies;
        let oracle = qr_deflation_eigenvalues(h.entries());
        for (a, b) in e.iter().zip(&oracle) {
            worst_oracle = worst_oracle.max((a - b).abs());
        }
    }
    let pass = worst_trace <= 1e-8 && worst_residual <= 1e-8 && worst_oracle <= 1e-7;
    Ok((
        pass,
        format!("trace rel {worst_trace:.1e} (≤1e-8), residual {worst_residual:.1e} (≤1e-8), L=6 oracle {worst_oracle:.1e} (≤1e-7)"),
    ))
}

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for spec in [LatentSpec::j1_only(6), LatentSpec::j1_j2(6)] {
        let spec = spec.map_err(fail_msg)?;
        let basis = basis_operators(&spec).map_err(fail_msg)?;
        for _ in 0..5 {
            let theta: Vec<f64> = (0..spec.theta_dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let assembled = basis.assemble(&theta).map_err(fail_msg)?;
            let direct = build_hamiltonian(&spec.params(&theta).map_err(fail_msg)?).map_err(fail_msg)?;
            let d = (assembled.entries() - direct.entries()).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            worst = worst.max(d);
        }
    }
    Ok((worst <= 1e-12, format!("max entry deviation {worst:.1e} (≤1e-12) for Θ=1 and Θ=2")))
}

/// Loss computed from `Ψᵀ H(θ̃) Ψ` with `H(θ̃)` built from scratch.
fn dense_loss(spec: &LatentSpec, psi: &Array2<f64>, energies: &[f64], theta: &[f64], cfg: &LossConfig) -> f64 {
    let h = build_hamiltonian(&spec.params(theta).unwrap()).unwrap();
    let r = psi.t().dot(h.entries()).dot(psi);
    let m = energies.len();
    let mf = m as f64;
    let n = energies.iter().map(|e| e * e).sum::<f64>() / mf + cfg.epsilon;
    let mut off = 0.0;
    let mut diag = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                diag += (r[[i, i]] - energies[i]).powi(2);
            } else {
                off += r[[i, j]].powi(2);
            }
        }
    }
    let off = if m > 1 { off / (mf * (mf - 1.0)) } else { 0.0 };
    (off + cfg.gamma * diag / mf) / n
}

fn psi_f64(ds: &Dataset, i: usize) -> Array2<f64> {
    ds.samples[i].psi.mapv(f64::from)
}

fn scaled(pb: &ProjectedBasis, alpha: f64) -> ProjectedBasis {
    ProjectedBasis {
        g: pb.g.iter().map(|g| g * alpha).collect(),
        g_const: &pb.g_const * alpha,
        energies: pb.energies.iter().map(|e| e * alpha).collect(),
    }
}

fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let spec = LatentSpec::j1_only(6).map_err(fail_msg)?;
    let thetas: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.gen_range(-2.0..2.0)]).collect();
    let cfg = LossConfig::default();
    let mut worst_exact = 0.0f64;
    let mut worst_dense = 0.0f64;
    let mut worst_scale = 0.0f64;
    for protocol in [
        SpectralProtocol::Low { states: 5 },
        SpectralProtocol::Mid { states: 4 },
        SpectralProtocol::Single { index: 20 },
    ] {
        let ds = generate_dataset(&thetas, &spec, protocol).map_err(fail_msg)?;
        for (i, s) in ds.samples.iter().enumerate() {
            worst_exact = worst_exact.max(rayleigh_loss(&s.projected, &s.theta, &cfg).map_err(fail_msg)?.0);
            if i % 10 == 0 {
                // The stored block is single precision; rebuild it in f64 for the dense path.
                let exact = diagonalize(&build_hamiltonian(&spec.params(&s.theta).unwrap()).unwrap()).unwrap();
                let cols: Vec<usize> = s.indices.iter().map(|&m| m - 1).collect();
                let psi = exact.vectors.select(ndarray::Axis(1), &cols);
                assert!((&psi - &psi_f64(&ds, i)).iter().all(|v| v.abs() < 1e-6));
                let tt = vec![rng.gen_range(-2.0..2.0)];
                let projected = rayleigh_loss(&s.projected, &tt, &cfg).map_err(fail_msg)?.0;
                let dense = dense_loss(&spec, &psi, &s.energies, &tt, &cfg);
                worst_dense = worst_dense.max((projected - dense).abs() / dense.abs().max(1.0));
                let cfg0 = LossConfig { epsilon: 0.0, ..cfg };
                let base = rayleigh_loss(&s.projected, &tt, &cfg0).map_err(fail_msg)?.0;
                for alpha in [0.5, 2.0, 10.0] {
                    let l = rayleigh_loss(&scaled(&s.projected, alpha), &tt, &cfg0).map_err(fail_msg)?.0;
                    worst_scale = worst_scale.max((l - base).abs() / base.abs().max(1e-300));
                }
            }
        }
    }
    let pass = worst_exact <= 1e-12 && worst_dense <= 1e-10 && worst_scale <= 1e-6;
    Ok((
        pass,
        format!(
            "loss at θ̃=θ {worst_exact:.1e} (≤1e-12), projected vs dense {worst_dense:.1e} (≤1e-10), rescaling {worst_scale:.1e} (≤1e-6)"
        ),
    ))
}

fn criterion_4() -> Check {
    let spec = LatentSpec::j1_j2(4).map_err(fail_msg)?;
    let ds = generate_dataset(&[vec![0.3, -0.7]], &spec, SpectralProtocol::Low { states: 2 }).map_err(fail_msg)?;
    let sample = &ds.samples[0];
    let psi = sample.psi.mapv(f64::from);
    let cfg = LossConfig::default();

    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut params: EncoderParams<f64> = init_params(2, 8, 2, 5).map_err(fail_msg)?;
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
    }
    let objective = |p: &EncoderParams<f64>| {
        let (theta, _) = forward(p, psi.view()).unwrap();
        rayleigh_loss(&sample.projected, &theta, &cfg).unwrap().0
    };
    let (theta, cache) = forward(&params, psi.view()).map_err(fail_msg)?;
    let (_, d_theta) = rayleigh_loss(&sample.projected, &theta, &cfg).map_err(fail_msg)?;
    let grad = backward(&params, &cache, &d_theta).map_err(fail_msg)?;

    let h = 1e-5;
    let mut worst_net = 0.0f64;
    let flat_grad: Vec<f64> = grad.tensors().iter().flat_map(|t| t.iter().copied()).collect();
    let mut k = 0;
    for t in 0..16 {
        let len = params.tensors()[t].len();
        for i in 0..len {
            let mut plus = params.clone();
            plus.tensors_mut()[t][i] += h;
            let mut minus = params.clone();
            minus.tensors_mut()[t][i] -= h;
            let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
            let rel = (flat_grad[k] - fd).abs() / fd.abs().max(1e-3);
            worst_net = worst_net.max(rel);
            k += 1;
        }
    }

    let mut worst_loss = 0.0f64;
    for theta in [[0.1, 0.2], [-1.5, 0.8], [0.3, -0.7]] {
        let (_, g) = rayleigh_loss(&sample.projected, &theta, &cfg).map_err(fail_msg)?;
        for l in 0..2 {
            let mut p = theta;
            p[l] += h;
            let mut m = theta;
            m[l] -= h;
            let fd = (rayleigh_loss(&sample.projected, &p, &cfg).unwrap().0
                - rayleigh_loss(&sample.projected, &m, &cfg).unwrap().0)
                / (2.0 * h);
            worst_loss = worst_loss.max((g[l] - fd).abs() / fd.abs().max(1e-3));
        }
    }
    Ok((
        worst_net <= 1e-4 && worst_loss <= 1e-4,
        format!("encoder {worst_net:.1e} over {k} weights, loss {worst_loss:.1e} (both ≤1e-4 relative)"),
    ))
}

fn criterion_5() -> Check {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let bell = Array1::from(vec![s, 0.0, 0.0, s]);
    let bell_err = (entanglement_entropy(bell.view(), 2, 1).map_err(fail_msg)? - LN_2).abs();
    let d = 64;
    let uniform = Array1::from_elem(d, 1.0 / (d as f64).sqrt());
    let uniform_err = (participation_entropy(uniform.view()).map_err(fail_msg)? - (d as f64).ln()).abs();

    let spec = LatentSpec::j1_only(6).map_err(fail_msg)?;
    let spectrum = diagonalize(&build_hamiltonian(&spec.params(&[0.4]).unwrap()).unwrap()).map_err(fail_msg)?;
    let mut worst_trace = 0.0f64;
    for (m, cut) in [(0, 3), (0, 2), (10, 1), (31, 4)] {
        let psi = spectrum.vectors.column(m);
        let (na, nb) = (1usize << cut, 1usize << (6 - cut));
        let mut rho = Array2::<f64>::zeros((na, na));
        for i in 0..na {
            for k in 0..na {
                rho[[i, k]] = (0..nb).map(|j| psi[i * nb + j] * psi[k * nb + j]).sum();
            }
        }
        let oracle: f64 = qr_deflation_eigenvalues(&rho)
            .into_iter()
            .filter(|&l| l > 1e-14)
            .map(|l| -l * l.ln())
            .sum();
        let got = entanglement_entropy(psi, 6, cut).map_err(fail_msg)?;
        worst_trace = worst_trace.max((got - oracle).abs());
    }

    let mut trend = Vec::new();
    for j1 in [-0.4, 0.4] {
        let p = apply_symmetry_breaking(&SpinChainParams::uniform(10, j1, 0.5, 0.5, 0.5, -0.2).unwrap())
            .map_err(fail_msg)?;
        let spectrum = diagonalize(&build_hamiltonian(&p).map_err(fail_msg)?).map_err(fail_msg)?;
        let rec = DiagnosticsRecord::compute(&spectrum, 10).map_err(fail_msg)?;
        let n = rec.len();
        trend.push((j1, rec.mean_svn(0..n / 20), rec.mean_svn(n / 2 - n / 20..n / 2 + n / 20)));
    }
    let trend_ok = trend.iter().all(|&(_, lo, mid)| lo < mid);
    let pass = bell_err <= 1e-9 && uniform_err <= 1e-9 && worst_trace <= 1e-9 && trend_ok;
    let trend_txt: Vec<String> = trend
        .iter()
        .map(|(j, lo, mid)| format!("J1={j}: low 5% {lo:.3} < mid 10% {mid:.3}"))
        .collect();
    Ok((
        pass,
        format!(
            "Bell {bell_err:.1e}, uniform {uniform_err:.1e}, partial trace {worst_trace:.1e} (all ≤1e-9); {}",
            trend_txt.join(", ")
        ),
    ))
}

fn settings(pairs: &[(&str, &str)]) -> Settings {
    let mut s = Settings::default();
    for (k, v) in pairs {
        s.set(k, v).expect("valid setting");
    }
    s
}

fn resolve(kind: ExperimentKind, pairs: &[(&str, &str)]) -> Result<ExperimentSpec, String> {
    settings(pairs).resolve(kind).map_err(fail_msg)
}

fn table(spec: &ExperimentSpec, cache: &RunCache) -> Result<Table, String> {
    Ok(run_experiment(spec, cache).map_err(fail_msg)?.tables.remove(0).1)
}

/// Values of `value` in the rows where column `key` satisfies `keep`.
fn select(t: &Table, key: &str, keep: impl Fn(&str) -> bool, value: &str) -> Vec<f64> {
    let k = t.column(key).expect("key column");
    let v = t.column(value).expect("value column");
    t.rows.iter().filter(|r| keep(&r[k])).map(|r| r[v].parse().expect("float")).collect()
}

fn criterion_6(cache: &RunCache) -> Check {
    let spec = resolve(ExperimentKind::SweepSpectrum, &[("hidden", "128")])?;
    let t = table(&spec, cache)?;
    let edge = select(&t, "m_index", |m| m.parse::<usize>().unwrap() <= 4, "theta_loss_final");
    let mid = select(&t, "m_index", |m| m.parse::<usize>().unwrap() >= 24, "theta_loss_final");
    let (e, m) = (median(&edge), median(&mid));
    let per_m: Vec<String> = spec
        .m_indices
        .iter()
        .map(|&i| {
            let v = select(&t, "m_index", |m| m == i.to_string(), "theta_loss_final");
            format!("m={i}: {:.2e}", median(&v))
        })
        .collect();
    Ok((
        m >= 5.0 * e,
        format!("median L_θ edge {e:.2e}, mid {m:.2e}, ratio {:.1} (≥5); {}", m / e, per_m.join(", ")),
    ))
}

fn medians_by(t: &Table, protocol: &str, axis: &str, values: &[usize]) -> Vec<f64> {
    let p = t.column("protocol").expect("protocol column");
    let a = t.column(axis).expect("axis column");
    let l = t.column("theta_loss_final").expect("loss column");
    values
        .iter()
        .map(|&x| {
            let v: Vec<f64> = t
                .rows
                .iter()
                .filter(|r| r[p] == protocol && r[a] == x.to_string())
                .map(|r| r[l].parse().unwrap())
                .collect();
            median(&v)
        })
        .collect()
}

fn fmt_series(xs: &[usize], ys: &[f64]) -> String {
    xs.iter().zip(ys).map(|(x, y)| format!("{x}:{y:.2e}")).collect::<Vec<_>>().join(" ")
}

fn criterion_7(cache: &RunCache) -> Check {
    let epochs = STATE_COUNT_EPOCHS.to_string();
    let spec = resolve(ExperimentKind::SweepM, &[("epochs", &epochs)])?;
    let t = table(&spec, cache)?;
    let ms: Vec<f64> = spec.states.iter().map(|&m| m as f64).collect();
    let low = medians_by(&t, "low", "M", &spec.states);
    let mid = medians_by(&t, "mid", "M", &spec.states);
    let rho = spearman(&ms, &low);
    let quarter = (1usize << spec.base.sites) / 4;
    let above = spec
        .states
        .iter()
        .zip(low.iter().zip(&mid))
        .filter(|(&m, _)| m < quarter)
        .all(|(_, (l, md))| md > l);
    Ok((
        rho <= 0.0 && above,
        format!(
            "low {} (Spearman {rho:.2} ≤ 0); mid {} (above low for M<{quarter}: {above}); {} epochs",
            fmt_series(&spec.states, &low),
            fmt_series(&spec.states, &mid),
            STATE_COUNT_EPOCHS
        ),
    ))
}

fn criterion_8(cache: &RunCache) -> Check {
    let epochs = CAPACITY_EPOCHS.to_string();
    let spec = resolve(ExperimentKind::SweepHidden, &[("epochs", &epochs), ("protocol", "low")])?;
    let t = table(&spec, cache)?;
    let low = medians_by(&t, "low", "w_H", &spec.widths);
    let ws: Vec<f64> = spec.widths.iter().map(|&w| w as f64).collect();
    let rho = spearman(&ws, &low);

    let gap_spec = resolve(ExperimentKind::LearnabilityGap, &[("epochs", &epochs)])?;
    let (records, _) = learnability_gap_records(&gap_spec, cache).map_err(fail_msg)?;
    let edge = &records[0];
    let middle = &records[records.len() - 1];
    let pass = rho <= 0.0 && edge.significant(3.0) && middle.consistent_with_zero(3.0);
    Ok((
        pass,
        format!(
            "low L_θ by w_H {} (Spearman {rho:.2} ≤ 0); gap m={}: {:.2e} ± {:.1e} (>3σ: {}), m={}: {:.2e} ± {:.1e} (within 3σ of 0: {}); {} epochs",
            fmt_series(&spec.widths, &low),
            edge.m_index,
            edge.mean,
            edge.std,
            edge.significant(3.0),
            middle.m_index,
            middle.mean,
            middle.std,
            middle.consistent_with_zero(3.0),
            CAPACITY_EPOCHS
        ),
    ))
}

fn criterion_9(cache: &RunCache) -> Check {
    let epochs = HOLE_EPOCHS.to_string();
    let spec = resolve(ExperimentKind::GeneralizationHole, &[("epochs", &epochs)])?;
    let t = table(&spec, cache)?;
    let rows = |tag: &str| -> Vec<(f64, f64)> {
        t.rows
            .iter()
            .filter(|r| r[0] == tag)
            .map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap()))
            .collect()
    };
    let holed = rows("holed");
    let inside: Vec<f64> = holed.iter().filter(|(j, _)| *j > -1.0 && *j < 0.5).map(|p| p.1).collect();
    let outside: Vec<f64> = holed.iter().filter(|(j, _)| *j <= -1.0 || *j >= 0.5).map(|p| p.1).collect();
    let center = -0.25;
    let step = 4.0 / (spec.eval_points - 1) as f64;
    let hole_center: Vec<f64> = holed
        .iter()
        .filter(|(j, _)| (j - center).abs() <= 0.5 * step + 1e-12)
        .map(|p| p.1)
        .collect();
    let boundary: Vec<f64> = holed
        .iter()
        .filter(|(j, _)| *j > -1.0 && *j < 0.5 && ((j + 1.0).abs() <= 0.1 + 1e-12 || (j - 0.5).abs() <= 0.1 + 1e-12))
        .map(|p| p.1)
        .collect();
    let (mi, mo, mb, mc) = (mean(&inside), mean(&outside), mean(&boundary), mean(&hole_center));
    let full: Vec<f64> = rows("full").iter().map(|p| p.1).collect();
    let ratio = full.iter().copied().fold(0.0, f64::max) / full.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((
        mi > mo && mb < mc,
        format!(
            "holed mean L_θ inside {mi:.2e} > outside {mo:.2e}; boundary {mb:.2e} < center {mc:.2e}; full-domain max/min {ratio:.1e}; {} epochs",
            HOLE_EPOCHS
        ),
    ))
}

fn criterion_10(cache: &RunCache) -> Check {
    let epochs = VARIANT_EPOCHS.to_string();
    let sup = resolve(ExperimentKind::Supervised, &[("epochs", &epochs)])?;
    let sup_run = run_experiment(&sup, cache).map_err(fail_msg)?.runs.remove(0);
    let sup_ok = loss_decreased(&sup_run.history.series(|e| e.train_objective));

    let two = resolve(ExperimentKind::TwoParam, &[("epochs", &epochs)])?;
    let res = run_experiment(&two, cache).map_err(fail_msg)?;
    let mut ok = sup_ok;
    let mut parts = vec![format!(
        "supervised L_θ {:.2e} → {:.2e} (decreasing: {sup_ok})",
        sup_run.history.records[0].train_objective, sup_run.last.val_theta
    )];
    for &m in &two.states {
        let pick = |dim: usize| {
            res.runs
                .iter()
                .find(|r| r.config.free.len() == dim && r.config.protocol.block_size() == m)
                .expect("run present")
        };
        let (one, both) = (pick(1), pick(2));
        let conv = loss_decreased(&both.history.series(|e| e.train_objective));
        let higher = both.last.val_theta > one.last.val_theta;
        ok &= conv && higher;
        parts.push(format!(
            "M={m}: two-param L_θ {:.2e} vs one-param {:.2e} (converged: {conv}, higher: {higher})",
            both.last.val_theta, one.last.val_theta
        ));
    }
    parts.push(format!("{VARIANT_EPOCHS} epochs"));
    Ok((ok, parts.join("; ")))
}

fn criterion_11() -> Check {
    let mut details = Vec::new();
    let mut ok = true;
    let cases: Vec<(&str, ExperimentSpec)> = vec![
        ("generate", resolve(ExperimentKind::Generate, &[])?),
        ("diagnostics", resolve(ExperimentKind::Diagnostics, &[])?),
        (
            "sweep-m (2 threads, short)",
            resolve(ExperimentKind::SweepM, &[("epochs", "2"), ("samples", "100"), ("hidden", "16"), ("threads", "2")])?,
        ),
    ];
    for (name, spec) in cases {
        let dir = tempfile::tempdir().map_err(fail_msg)?;
        let first = dir.path().join("first");
        run_and_emit(&spec, &RunCache::new(), &first).map_err(fail_msg)?;
        let replay = rerun_from_manifest(&first.join("manifest.json"), &dir.path().join("replay")).map_err(fail_msg)?;
        let csv: Vec<_> = replay.files.iter().filter(|f| f.0.ends_with(".csv")).collect();
        let same = replay.identical() && !csv.is_empty();
        ok &= same;
        details.push(format!("{name}: {} files identical: {same}", replay.files.len()));
    }
    Ok((ok, details.join("; ")))
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("EIGENLEARN_CRITERIA")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let wanted = |id: usize| only.as_ref().is_none_or(|o| o.contains(&id));
    let cache = RunCache::new();
    let mut verdicts = Vec::new();
    let min = |m: f64| Some(60.0 * m);

    if wanted(1) {
        verdicts.push(run_criterion(1, "hamiltonian and eigensolver oracles", Some(30.0), criterion_1));
    }
    if wanted(2) {
        verdicts.push(run_criterion(2, "decoder linearity", None, criterion_2));
    }
    if wanted(3) {
        verdicts.push(run_criterion(3, "loss exactness", min(1.0), criterion_3));
    }
    if wanted(4) {
        verdicts.push(run_criterion(4, "gradient correctness", min(1.0), criterion_4));
    }
    if wanted(5) {
        verdicts.push(run_criterion(5, "diagnostics oracles and entanglement trend", min(2.0), criterion_5));
    }
    if wanted(6) {
        verdicts.push(run_criterion(6, "spectral-position crossover", min(15.0), || criterion_6(&cache)));
    }
    if wanted(7) {
        verdicts.push(run_criterion(7, "state-count trend", min(15.0), || criterion_7(&cache)));
    }
    if wanted(8) {
        verdicts.push(run_criterion(8, "capacity trend and learnability gap", min(15.0), || criterion_8(&cache)));
    }
    if wanted(9) {
        verdicts.push(run_criterion(9, "generalization hole", min(10.0), || criterion_9(&cache)));
    }
    if wanted(10) {
        verdicts.push(run_criterion(10, "supervised and two-parameter variants", min(10.0), || criterion_10(&cache)));
    }
    if wanted(11) {
        verdicts.push(run_criterion(11, "manifest reproducibility", None, criterion_11));
    }

    let failed: Vec<usize> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        verdicts.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({failed:?})") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
