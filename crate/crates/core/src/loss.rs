//! Physics-informed objective and evaluation metrics.
//!
//! A candidate Hamiltonian is judged only through its projection onto the
//! input eigenstates: `R = Ψᵀ H(θ̃) Ψ` should be diagonal with the target
//! energies on the diagonal. Since `H(θ̃)` is affine in θ̃, the projections of
//! every basis operator are computed once per sample and the loss costs
//! O(Θ·M²) per evaluation.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::StateBlock;
use crate::spin_chain::DecoderBasis;

/// Cached projections `G_ℓ = ΨᵀB_ℓΨ`, `G_const = ΨᵀH_constΨ` and the target energies.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedBasis {
    pub g: Vec<Array2<f64>>,
    pub g_const: Array2<f64>,
    pub energies: Vec<f64>,
}

impl ProjectedBasis {
    pub fn states(&self) -> usize {
        self.energies.len()
    }

    pub fn theta_dim(&self) -> usize {
        self.g.len()
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.g.len() {
            return Err(Error::Shape(format!(
                "latent vector has {} entries, basis has {}",
                theta.len(),
                self.g.len()
            )));
        }
        Ok(())
    }
}

/// Weights of the Rayleigh loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Weight of the diagonal energy mismatch.
    pub gamma: f64,
    /// Regularizer added to the energy normalization.
    pub epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            gamma: 0.1,
            epsilon: 1e-8,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParams(format!("gamma = {}", self.gamma)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!("epsilon = {}", self.epsilon)));
        }
        Ok(())
    }
}

/// `ΨᵀAΨ`, symmetrized to remove rounding asymmetry.
fn sandwich(psi: ArrayView2<f64>, a: &Array2<f64>) -> Array2<f64> {
    let p = psi.t().dot(&a.dot(&psi));
    (&p + &p.t()) * 0.5
}

/// Projects every basis operator onto the block's eigenstates.
pub fn project_basis(block: &StateBlock, basis: &DecoderBasis) -> Result<ProjectedBasis> {
    if block.psi.nrows() != basis.dim() {
        return Err(Error::Shape(format!(
            "state block has dimension {}, basis has {}",
            block.psi.nrows(),
            basis.dim()
        )));
    }
    if block.energies.len() != block.psi.ncols() {
        return Err(Error::Shape(format!(
            "{} energies for {} states",
            block.energies.len(),
            block.psi.ncols()
        )));
    }
    let psi = block.psi.view();
    Ok(ProjectedBasis {
        g: basis
            .terms
            .iter()
            .map(|(_, b)| sandwich(psi, b.entries()))
            .collect(),
        g_const: sandwich(psi, basis.constant.entries()),
        energies: block.energies.clone(),
    })
}

/// `H_res(θ̃) = G_const + Σ_ℓ θ̃_ℓ G_ℓ`.
pub fn residual_matrix(pb: &ProjectedBasis, theta_tilde: &[f64]) -> Result<Array2<f64>> {
    pb.check(theta_tilde)?;
    let mut r = pb.g_const.clone();
    for (g, &t) in pb.g.iter().zip(theta_tilde) {
        r.scaled_add(t, g);
    }
    Ok(r)
}

/// Energy normalization `N = Σ_i E_i²/M + ε`.
pub fn normalization(energies: &[f64], epsilon: f64) -> Result<f64> {
    let m = energies.len() as f64;
    let n = energies.iter().map(|e| e * e).sum::<f64>() / m + epsilon;
    if n <= 0.0 || !n.is_finite() {
        return Err(Error::ZeroNormalization);
    }
    Ok(n)
}

/// Rayleigh loss of one sample and its gradient with respect to θ̃.
///
/// The off-diagonal term is zero for a single state.
pub fn rayleigh_loss(
    pb: &ProjectedBasis,
    theta_tilde: &[f64],
    cfg: &LossConfig,
) -> Result<(f64, Vec<f64>)> {
    let r = residual_matrix(pb, theta_tilde)?;
    let m = pb.states();
    if m == 0 {
        return Err(Error::Shape("empty state block".into()));
    }
    let norm = normalization(&pb.energies, cfg.epsilon)?;
    let mf = m as f64;
    let off_w = if m > 1 { 1.0 / (norm * mf * (mf - 1.0)) } else { 0.0 };
    let diag_w = cfg.gamma / (norm * mf);

    let mut off = 0.0;
    let mut diag = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                let d = r[[i, i]] - pb.energies[i];
                diag += d * d;
            } else {
                off += r[[i, j]] * r[[i, j]];
            }
        }
    }
    let value = off_w * off + diag_w * diag;

    let grad = pb
        .g
        .iter()
        .map(|g| {
            let mut off_g = 0.0;
            let mut diag_g = 0.0;
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        diag_g += (r[[i, i]] - pb.energies[i]) * g[[i, i]];
                    } else {
                        off_g += r[[i, j]] * g[[i, j]];
                    }
                }
            }
            2.0 * (off_w * off_g + diag_w * diag_g)
        })
        .collect();
    Ok((value, grad))
}

/// Mean squared error over the free latent components.
pub fn theta_loss(theta_tilde: &[f64], theta_true: &[f64]) -> Result<f64> {
    if theta_tilde.len() != theta_true.len() || theta_true.is_empty() {
        return Err(Error::Shape(format!(
            "latent vectors of length {} and {}",
            theta_tilde.len(),
            theta_true.len()
        )));
    }
    let sq: f64 = theta_tilde
        .iter()
        .zip(theta_true)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sq / theta_true.len() as f64)
}

/// Mean absolute eigenvalue deviation relative to the true bandwidth.
pub fn spectral_error(energies: &[f64], energies_tilde: &[f64]) -> Result<f64> {
    if energies.len() != energies_tilde.len() || energies.is_empty() {
        return Err(Error::Shape(format!(
            "spectra of length {} and {}",
            energies.len(),
            energies_tilde.len()
        )));
    }
    let width = energies[energies.len() - 1] - energies[0];
    if width <= 0.0 {
        return Err(Error::DegenerateSpectrum);
    }
    let total: f64 = energies
        .iter()
        .zip(energies_tilde)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total / (energies.len() as f64 * width))
}
