use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::eigen::eigenvalues;
use crate::error::{Error, Result};
use crate::nn::Mat;
use crate::policy::Trajectory;

/// Centered moving average with window 3; endpoints average the available
/// neighbours.
pub fn smooth3(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            signal[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Indices of interior local maxima of the smoothed signal that lie above
/// its mean. A plateau reports its first index.
pub fn local_maxima(signal: &[f64]) -> Vec<usize> {
    let s = smooth3(signal);
    let mean = s.iter().sum::<f64>() / s.len().max(1) as f64;
    (1..s.len().saturating_sub(1))
        .filter(|&i| s[i] > s[i - 1] && s[i] >= s[i + 1] && s[i] > mean)
        .collect()
}

/// Last two consecutive peaks `(t1, t2)` of the smoothed signal.
pub fn detect_period(signal: &[f64]) -> Result<(usize, usize)> {
    if signal.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "period detection needs at least 3 samples, got {}",
            signal.len()
        )));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("period detection signal".into()));
    }
    let peaks = local_maxima(signal);
    match peaks.as_slice() {
        [.., a, b] => Ok((*a, *b)),
        _ => Err(Error::NoPeriod(format!(
            "found {} local maxima in {} samples",
            peaks.len(),
            signal.len()
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    Decay,
    Neutral,
    Growth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentClass {
    pub growth: Growth,
    pub oscillatory: bool,
}

/// Tolerance used when classifying exponents as neutral / non-oscillatory.
pub const EXPONENT_TOL: f64 = 1e-9;

impl ExponentClass {
    pub fn of(mu: Complex64) -> Self {
        let growth = if mu.re < -EXPONENT_TOL {
            Growth::Decay
        } else if mu.re > EXPONENT_TOL {
            Growth::Growth
        } else {
            Growth::Neutral
        };
        ExponentClass {
            growth,
            oscillatory: mu.im.abs() > EXPONENT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetReport {
    pub t1: usize,
    pub t2: usize,
    pub dt: f64,
    pub monodromy: Mat,
    pub multipliers: Vec<Complex64>,
    /// `ln(λ)/(T·Δt)` on the principal branch; a zero multiplier yields a
    /// real part of `-inf`.
    pub exponents: Vec<Complex64>,
    pub classes: Vec<ExponentClass>,
}

impl FloquetReport {
    pub fn period(&self) -> usize {
        self.t2 - self.t1
    }

    pub fn max_abs_re(&self) -> f64 {
        self.exponents.iter().map(|m| m.re.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_im(&self) -> f64 {
        self.exponents.iter().map(|m| m.im.abs()).fold(0.0, f64::max)
    }
}

/// `Φ ← (I + Δt·A_t) Φ` over the given matrices, starting from `Φ = I`.
pub fn monodromy(matrices: &[Mat], dt: f64) -> Result<Mat> {
    let n = matrices
        .first()
        .ok_or_else(|| Error::InvalidConfig("monodromy needs at least one matrix".into()))?
        .rows();
    let mut phi = Mat::identity(n);
    for a in matrices {
        if !a.is_square() || a.rows() != n {
            return Err(Error::dims("monodromy step", n, a.rows()));
        }
        let step = a.matmul(&phi)?.scale(dt);
        phi = phi.add(&step)?;
    }
    if !phi.is_finite() {
        return Err(Error::NonFinite("monodromy matrix".into()));
    }
    Ok(phi)
}

/// Floquet analysis of `matrices[t1..t2]`, where `matrices[t]` is `A_t`.
pub fn floquet(matrices: &[Mat], t1: usize, t2: usize, dt: f64) -> Result<FloquetReport> {
    if t1 >= t2 || t2 > matrices.len() {
        return Err(Error::InvalidConfig(format!(
            "floquet window [{t1}, {t2}) invalid for {} matrices",
            matrices.len()
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidConfig("floquet dt must be positive".into()));
    }
    let phi = monodromy(&matrices[t1..t2], dt)?;
    let multipliers = eigenvalues(&phi)?;
    let span = (t2 - t1) as f64 * dt;
    let exponents: Vec<Complex64> = multipliers
        .iter()
        .map(|l| {
            if l.norm() == 0.0 {
                log::warn!("zero Floquet multiplier; exponent set to -inf");
                Complex64::new(f64::NEG_INFINITY, 0.0)
            } else {
                l.ln() / span
            }
        })
        .collect();
    let classes = exponents.iter().map(|m| ExponentClass::of(*m)).collect();
    Ok(FloquetReport {
        t1,
        t2,
        dt,
        monodromy: phi,
        multipliers,
        exponents,
        classes,
    })
}

/// Where the analysis window comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    Explicit(usize, usize),
    /// Peaks of one observation component; falls back to the trailing
    /// `fallback` steps when no period is found.
    Detect { component: usize, fallback: Option<usize> },
}

pub fn floquet_trajectory(traj: &Trajectory, window: Window, dt: f64) -> Result<FloquetReport> {
    let mats: Vec<Mat> = traj.matrices()?.into_iter().map(|m| m.into_mat()).collect();
    let (t1, t2) = match window {
        Window::Explicit(a, b) => (a, b),
        Window::Detect {
            component,
            fallback,
        } => {
            let signal: Vec<f64> = traj
                .records
                .iter()
                .map(|r| r.observation.get(component).copied())
                .collect::<Option<_>>()
                .ok_or_else(|| Error::dims("floquet signal component", component + 1, 0))?;
            match (detect_period(&signal), fallback) {
                (Ok(p), _) => p,
                (Err(Error::NoPeriod(msg)), Some(k)) => {
                    log::warn!("{msg}; using the last {k} steps");
                    (mats.len().saturating_sub(k), mats.len())
                }
                (Err(e), _) => return Err(e),
            }
        }
    };
    floquet(&mats, t1, t2, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sine_period() {
        let s: Vec<f64> = (0..200).map(|t| (2.0 * PI * t as f64 / 50.0).sin()).collect();
        let (t1, t2) = detect_period(&s).unwrap();
        assert!((t2 - t1).abs_diff(50) <= 1, "{t1} {t2}");
    }

    #[test]
    fn ramp_has_no_period() {
        let s: Vec<f64> = (0..100).map(|t| t as f64).collect();
        assert!(matches!(detect_period(&s), Err(Error::NoPeriod(_))));
        assert!(detect_period(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_matrices_give_zero_exponents() {
        let mats = vec![Mat::zeros(3, 3); 20];
        let r = floquet(&mats, 0, 20, 1.0).unwrap();
        assert_eq!(r.monodromy, Mat::identity(3));
        assert!(r.exponents.iter().all(|m| m.norm() == 0.0));
        assert!(r.classes.iter().all(|c| c.growth == Growth::Neutral && !c.oscillatory));
    }

    #[test]
    fn constant_diagonal_closed_form() {
        let a = [0.3, -0.2, 0.05];
        let mats = vec![Mat::diag(&a); 40];
        let r = floquet(&mats, 5, 35, 1.0).unwrap();
        let mut want: Vec<f64> = a.iter().map(|v| (1.0f64 + v).ln()).collect();
        want.sort_by(|x, y| y.total_cmp(x));
        let mut got: Vec<f64> = r.exponents.iter().map(|m| m.re).collect();
        got.sort_by(|x, y| y.total_cmp(x));
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10, "{got:?} {want:?}");
        }
    }

    #[test]
    fn zero_multiplier_sentinel() {
        let mats = vec![Mat::diag(&[-1.0, 0.0])];
        let r = floquet(&mats, 0, 1, 1.0).unwrap();
        assert!(r.exponents.iter().any(|m| m.re == f64::NEG_INFINITY));
    }

    #[test]
    fn window_only_covers_the_period() {
        let mut mats = vec![Mat::diag(&[5.0, 5.0]); 10];
        mats[3] = Mat::zeros(2, 2);
        mats[4] = Mat::zeros(2, 2);
        let r = floquet(&mats, 3, 5, 1.0).unwrap();
        assert_eq!(r.monodromy, Mat::identity(2));
        assert!(floquet(&mats, 5, 5, 1.0).is_err());
        assert!(floquet(&mats, 0, 11, 1.0).is_err());
    }

    #[test]
    fn rotation_gives_oscillatory_exponent() {
        let a = Mat::from_rows(&[vec![0.0, -0.1], vec![0.1, 0.0]]).unwrap();
        let r = floquet(&vec![a; 10], 0, 10, 1.0).unwrap();
        assert!(r.classes.iter().all(|c| c.oscillatory && c.growth == Growth::Growth));
    }
}
