//! Selection of the eigenstates fed to the encoder.
//!
//! Eigenstate indices are 1-based positions in the ascending spectrum.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::eigensolver::Spectrum;
use crate::error::{Error, Result};

/// Spectral window rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpectralProtocol {
    /// The `states` lowest eigenstates.
    Low { states: usize },
    /// `states` consecutive eigenstates around the one closest to the mean energy.
    Mid { states: usize },
    /// One eigenstate at 1-based `index`.
    Single { index: usize },
}

impl SpectralProtocol {
    /// Number of states M in each block.
    pub fn block_size(&self) -> usize {
        match *self {
            SpectralProtocol::Low { states } | SpectralProtocol::Mid { states } => states,
            SpectralProtocol::Single { .. } => 1,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SpectralProtocol::Low { .. } => "low",
            SpectralProtocol::Mid { .. } => "mid",
            SpectralProtocol::Single { .. } => "single",
        }
    }

    /// Stable tag: 0 low, 1 mid, 2 single.
    pub fn tag(&self) -> u8 {
        match self {
            SpectralProtocol::Low { .. } => 0,
            SpectralProtocol::Mid { .. } => 1,
            SpectralProtocol::Single { .. } => 2,
        }
    }

    /// `M` for low/mid, the 1-based index for single.
    pub fn parameter(&self) -> usize {
        match *self {
            SpectralProtocol::Low { states } | SpectralProtocol::Mid { states } => states,
            SpectralProtocol::Single { index } => index,
        }
    }

    pub fn from_tag(tag: u8, parameter: usize) -> Result<Self> {
        match tag {
            0 => Ok(SpectralProtocol::Low { states: parameter }),
            1 => Ok(SpectralProtocol::Mid { states: parameter }),
            2 => Ok(SpectralProtocol::Single { index: parameter }),
            t => Err(Error::Format(format!("unknown protocol tag {t}"))),
        }
    }

    /// Builds a protocol from its CLI name and the relevant count/index.
    pub fn parse(name: &str, parameter: usize) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "low" => Ok(SpectralProtocol::Low { states: parameter }),
            "mid" => Ok(SpectralProtocol::Mid { states: parameter }),
            "single" => Ok(SpectralProtocol::Single { index: parameter }),
            other => Err(Error::Protocol(format!("unknown protocol {other:?}"))),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let p = self.parameter();
        if p < 1 || p > dim {
            let what = match self {
                SpectralProtocol::Single { .. } => "index",
                _ => "state count",
            };
            return Err(Error::Protocol(format!(
                "{} {what} {p} outside 1..={dim}",
                self.label()
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for SpectralProtocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpectralProtocol::Single { index } => write!(f, "single(m={index})"),
            other => write!(f, "{}(M={})", other.label(), other.block_size()),
        }
    }
}

/// 1-based indices selected by `protocol` in a spectrum of dimension `dim`.
///
/// For `Mid`, the window `[m_av - ⌊M/2⌋, m_av + ⌊M/2⌋]` drops its topmost
/// entry when M is even and is shifted inward at the spectrum edges so it
/// always holds exactly M states.
pub fn select_indices(protocol: SpectralProtocol, dim: usize, m_av: usize) -> Result<Vec<usize>> {
    protocol.validate(dim)?;
    Ok(match protocol {
        SpectralProtocol::Low { states } => (1..=states).collect(),
        SpectralProtocol::Single { index } => vec![index],
        SpectralProtocol::Mid { states } => {
            if m_av < 1 || m_av > dim {
                return Err(Error::Protocol(format!(
                    "mean-energy index {m_av} outside 1..={dim}"
                )));
            }
            let lo = (m_av as isize - (states / 2) as isize).max(1) as usize;
            let lo = lo.min(dim - states + 1);
            (lo..lo + states).collect()
        }
    })
}

/// Selected eigenstates of one Hamiltonian realization.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBlock {
    /// D×M, selected eigenvectors as columns.
    pub psi: Array2<f64>,
    pub energies: Vec<f64>,
    /// 1-based, strictly increasing.
    pub indices: Vec<usize>,
    /// Generating latent vector. Evaluation only.
    pub theta_true: Vec<f64>,
}

impl StateBlock {
    pub fn states(&self) -> usize {
        self.indices.len()
    }

    pub fn dim(&self) -> usize {
        self.psi.nrows()
    }
}

/// Gathers the gauge-fixed columns and energies at `indices`.
pub fn build_state_block(spectrum: &Spectrum, indices: &[usize], theta: &[f64]) -> Result<StateBlock> {
    let dim = spectrum.dim();
    if indices.is_empty() {
        return Err(Error::Protocol("no states selected".into()));
    }
    for (k, &m) in indices.iter().enumerate() {
        if m < 1 || m > dim {
            return Err(Error::Protocol(format!("index {m} outside 1..={dim}")));
        }
        if k > 0 && indices[k - 1] >= m {
            return Err(Error::Protocol("indices must be strictly increasing".into()));
        }
    }
    let mut psi = Array2::zeros((dim, indices.len()));
    for (c, &m) in indices.iter().enumerate() {
        psi.column_mut(c).assign(&spectrum.vectors.column(m - 1));
    }
    Ok(StateBlock {
        psi,
        energies: indices.iter().map(|&m| spectrum.energies[m - 1]).collect(),
        indices: indices.to_vec(),
        theta_true: theta.to_vec(),
    })
}
