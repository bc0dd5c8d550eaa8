use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::eigen::eigenvalues;
use crate::error::Result;
use crate::nn::Mat;
use crate::policy::DynamicsMatrix;

/// Imaginary parts at or below this magnitude count as zero.
pub const IM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    StableNonoscillatory,
    StableDampedOscillation,
    Unstable,
}

impl Classification {
    pub fn from_summary(rho: f64, im_max: f64) -> Self {
        if rho > 1.0 || rho.is_nan() {
            Classification::Unstable
        } else if im_max <= IM_TOL {
            Classification::StableNonoscillatory
        } else {
            Classification::StableDampedOscillation
        }
    }

    pub fn is_stable(self) -> bool {
        self != Classification::Unstable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub eigenvalues: Vec<Complex64>,
    pub rho: f64,
    pub im_max: f64,
    pub classification: Classification,
    /// `rho < 1`: every eigenvalue strictly inside the unit circle.
    pub strictly_stable: bool,
    /// Eigenvalues of the one-step latent map `I + A`, for reference only.
    pub update_eigenvalues: Vec<Complex64>,
}

pub fn spectral_radius(eigs: &[Complex64]) -> f64 {
    eigs.iter().map(|e| e.norm()).fold(0.0, f64::max)
}

pub fn spectral_report(a: &DynamicsMatrix) -> Result<SpectralReport> {
    spectral_report_mat(a.as_mat())
}

pub fn spectral_report_mat(a: &Mat) -> Result<SpectralReport> {
    let eigs = eigenvalues(a)?;
    let rho = spectral_radius(&eigs);
    let im_max = eigs.iter().map(|e| e.im.abs()).fold(0.0, f64::max);
    let update_eigenvalues = eigs.iter().map(|e| e + 1.0).collect();
    Ok(SpectralReport {
        classification: Classification::from_summary(rho, im_max),
        strictly_stable: rho < 1.0,
        eigenvalues: eigs,
        rho,
        im_max,
        update_eigenvalues,
    })
}
