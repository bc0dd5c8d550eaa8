use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::spectral::spectral_radius;
use super::svd::sigma_min_shifted;
use super::eigen::eigenvalues;
use crate::error::{Error, Result};
use crate::nn::Mat;
use crate::policy::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KreissMode {
    /// `sup_{|z|>1} (|z| − 1)·‖(zI − A)⁻¹‖₂`
    #[default]
    Standard,
    /// `(|z| − 1) / ‖(zI − A)⁻¹‖₂` maximised over the same bounded grid.
    Product,
}

impl FromStr for KreissMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(KreissMode::Standard),
            "product" => Ok(KreissMode::Product),
            other => Err(Error::InvalidConfig(format!("unknown kreiss mode `{other}`"))),
        }
    }
}

impl fmt::Display for KreissMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KreissMode::Standard => "standard",
            KreissMode::Product => "product",
        })
    }
}

/// Search grid over `z = r·e^{iφ}` with `r = 1 + δ`, δ log-spaced in
/// `[min_offset, max_offset]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KreissSearch {
    pub radii: usize,
    pub angles: usize,
    pub min_offset: f64,
    pub max_offset: f64,
    /// Number of times the base grid is doubled in both directions.
    pub level: u32,
    /// Pattern-search iterations started from the best grid point.
    pub refine_iters: usize,
}

impl Default for KreissSearch {
    fn default() -> Self {
        KreissSearch {
            radii: 48,
            angles: 64,
            min_offset: 1e-4,
            max_offset: 3.0,
            level: 0,
            refine_iters: 200,
        }
    }
}

impl KreissSearch {
    pub fn refined(self, extra_levels: u32) -> Self {
        KreissSearch {
            level: self.level + extra_levels,
            ..self
        }
    }

    fn validate(&self) -> Result<()> {
        if self.radii < 2 || self.angles < 1 {
            return Err(Error::InvalidConfig("kreiss grid needs >= 2 radii and >= 1 angle".into()));
        }
        if !(self.min_offset > 0.0 && self.max_offset > self.min_offset) {
            return Err(Error::InvalidConfig("kreiss radius offsets must satisfy 0 < min < max".into()));
        }
        Ok(())
    }

    /// Grid coordinates `(ln δ, φ)`. Every point of level `L` is also a
    /// point of level `L + 1`.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let scale = 1usize << self.level;
        let nr = (self.radii - 1) * scale + 1;
        let na = self.angles * scale;
        let (lo, hi) = (self.min_offset.ln(), self.max_offset.ln());
        let mut pts = Vec::with_capacity(nr * na);
        for i in 0..nr {
            let u = lo + (hi - lo) * i as f64 / (nr - 1) as f64;
            for k in 0..na {
                pts.push((u, 2.0 * PI * k as f64 / na as f64));
            }
        }
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KreissEstimate {
    pub value: f64,
    pub grid_value: f64,
    pub argmax: Complex64,
    pub evaluations: usize,
}

fn point(u: f64, phi: f64) -> Complex64 {
    Complex64::from_polar(1.0 + u.exp(), phi)
}

/// The Kreiss objective at a single `z` with `|z| > 1`.
pub fn kreiss_objective(a: &Mat, z: Complex64, mode: KreissMode) -> f64 {
    let n = a.rows();
    let smin = sigma_min_shifted(n, a.data(), z);
    let gap = z.norm() - 1.0;
    match mode {
        KreissMode::Standard => {
            if smin == 0.0 {
                f64::INFINITY
            } else {
                gap / smin
            }
        }
        KreissMode::Product => gap * smin,
    }
}

fn check_gate(a: &Mat) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::dims("kreiss (square)", a.rows(), a.cols()));
    }
    let rho = spectral_radius(&eigenvalues(a)?);
    if rho >= 1.0 {
        return Err(Error::GateViolation { rho });
    }
    Ok(rho)
}

type Probe = (f64, f64, f64);

/// Coordinate pattern search from `start` that only accepts improving moves.
fn pattern_search(
    f: &impl Fn(f64, f64) -> f64,
    start: Probe,
    (mut du, mut dphi): (f64, f64),
    (lo, hi): (f64, f64),
    iters: usize,
) -> (Probe, usize) {
    let mut best = start;
    let mut evaluations = 0;
    for _ in 0..iters {
        if du < 1e-12 && dphi < 1e-12 {
            break;
        }
        let (_, u0, p0) = best;
        let mut moved = false;
        for (su, sp) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let u = (u0 + su * du).clamp(lo, hi);
            let phi = p0 + sp * dphi;
            let v = f(u, phi);
            evaluations += 1;
            if v > best.0 {
                best = (v, u, phi);
                moved = true;
            }
        }
        if !moved {
            du *= 0.5;
            dphi *= 0.5;
        }
    }
    (best, evaluations)
}

/// Grid search followed by pattern searches that only accept improving
/// moves. At level `L` a search is started from the best point of every
/// nested level `0..=L` and the largest result is kept, so refining the
/// grid never lowers the estimate.
pub fn kreiss_estimate(a: &Mat, mode: KreissMode, search: &KreissSearch) -> Result<KreissEstimate> {
    search.validate()?;
    check_gate(a)?;
    let f = |u: f64, phi: f64| kreiss_objective(a, point(u, phi), mode);

    let pts = search.points();
    let values: Vec<f64> = pts.iter().map(|&(u, phi)| f(u, phi)).collect();
    let mut evaluations = values.len();
    let grid_value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let bounds = (search.min_offset.ln(), search.max_offset.ln());
    let na = search.angles << search.level;
    let mut best: Probe = (f64::NEG_INFINITY, 0.0, 0.0);
    for l in 0..=search.level {
        let stride = 1usize << (search.level - l);
        let mut start: Probe = (f64::NEG_INFINITY, 0.0, 0.0);
        for (idx, (&v, &(u, phi))) in values.iter().zip(&pts).enumerate() {
            if (idx / na) % stride == 0 && (idx % na) % stride == 0 && v > start.0 {
                start = (v, u, phi);
            }
        }
        let scale = (1usize << l) as f64;
        let steps = (
            (bounds.1 - bounds.0) / ((search.radii - 1) as f64 * scale),
            2.0 * PI / (search.angles as f64 * scale),
        );
        let (found, n) = pattern_search(&f, start, steps, bounds, search.refine_iters);
        evaluations += n;
        if found.0 > best.0 {
            best = found;
        }
    }

    let mut value = best.0;
    if mode == KreissMode::Standard {
        // (|z| − 1)‖(zI − A)⁻¹‖ → 1 as |z| → ∞.
        value = value.max(1.0);
    }
    Ok(KreissEstimate {
        value,
        grid_value,
        argmax: point(best.1, best.2),
        evaluations,
    })
}

pub fn kreiss_constant(a: &Mat, mode: KreissMode, search: &KreissSearch) -> Result<f64> {
    Ok(kreiss_estimate(a, mode, search)?.value)
}

/// `‖AAᵀ − AᵀA‖_F`
pub fn normality_defect(a: &Mat) -> Result<f64> {
    let at = a.transpose();
    Ok(a.matmul(&at)?.sub(&at.matmul(a)?)?.frobenius_norm())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KreissStep {
    pub t: usize,
    pub rho: f64,
    pub normality_defect: f64,
    pub kreiss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KreissReport {
    pub mode: KreissMode,
    pub normality_tol: f64,
    pub steps: Vec<KreissStep>,
}

impl KreissReport {
    pub fn values(&self) -> Vec<f64> {
        self.steps.iter().filter_map(|s| s.kreiss).collect()
    }
}

pub const DEFAULT_NORMALITY_TOL: f64 = 1e-8;

/// Per-step transient-growth report. A step gets a Kreiss value only when
/// `ρ(A_t) < 1` and `A_t` is non-normal beyond `normality_tol`.
pub fn kreiss_sequence(
    matrices: &[Mat],
    mode: KreissMode,
    search: &KreissSearch,
    normality_tol: f64,
) -> Result<KreissReport> {
    let mut steps = Vec::with_capacity(matrices.len());
    for (t, a) in matrices.iter().enumerate() {
        let rho = spectral_radius(&eigenvalues(a)?);
        let defect = normality_defect(a)?;
        let kreiss = if rho < 1.0 && defect > normality_tol {
            Some(kreiss_constant(a, mode, search)?)
        } else {
            None
        };
        steps.push(KreissStep {
            t,
            rho,
            normality_defect: defect,
            kreiss,
        });
    }
    Ok(KreissReport {
        mode,
        normality_tol,
        steps,
    })
}

pub fn kreiss_trajectory(
    traj: &Trajectory,
    mode: KreissMode,
    search: &KreissSearch,
    normality_tol: f64,
) -> Result<KreissReport> {
    let mats: Vec<Mat> = traj.matrices()?.into_iter().map(|m| m.into_mat()).collect();
    let mut report = kreiss_sequence(&mats, mode, search, normality_tol)?;
    for (step, rec) in report.steps.iter_mut().zip(&traj.records) {
        step.t = rec.t;
    }
    Ok(report)
}
