use serde::{Deserialize, Serialize};

use super::spectral::{spectral_report, SpectralReport};
use crate::error::{Error, Result};
use crate::policy::{DynamicsNet, Trajectory};

/// Which observation components to sweep, over which ranges, at which
/// trajectory steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// One or two observation indices.
    pub dims: Vec<usize>,
    /// Inclusive `(lo, hi)` per swept dimension.
    pub ranges: Vec<(f64, f64)>,
    pub resolution: usize,
    /// Take every `every`-th step of the trajectory as a frame.
    pub every: usize,
}

impl SweepSpec {
    pub fn validate(&self, state_dim: usize) -> Result<()> {
        if self.dims.is_empty() || self.dims.len() > 2 {
            return Err(Error::InvalidConfig("contour sweeps 1 or 2 dimensions".into()));
        }
        if self.ranges.len() != self.dims.len() {
            return Err(Error::dims("contour ranges", self.dims.len(), self.ranges.len()));
        }
        if self.dims.len() == 2 && self.dims[0] == self.dims[1] {
            return Err(Error::InvalidConfig("contour dimensions must differ".into()));
        }
        if let Some(&d) = self.dims.iter().find(|&&d| d >= state_dim) {
            return Err(Error::InvalidConfig(format!(
                "contour dimension {d} out of range for state dimension {state_dim}"
            )));
        }
        if self.resolution == 0 {
            return Err(Error::InvalidConfig("contour resolution must be positive".into()));
        }
        if self.every == 0 {
            return Err(Error::InvalidConfig("contour frame stride must be positive".into()));
        }
        for &(lo, hi) in &self.ranges {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidConfig(format!("empty contour range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn axes(&self) -> Vec<Vec<f64>> {
        self.ranges
            .iter()
            .map(|&(lo, hi)| linspace(lo, hi, self.resolution))
            .collect()
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// One frame of the neighbourhood sweep. Grids are indexed
/// `[i][j]` with `i` along `axes[0]` and `j` along `axes[1]` (a single
/// column for 1-D sweeps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourFrame {
    pub t: usize,
    pub dims: Vec<usize>,
    pub axes: Vec<Vec<f64>>,
    pub rho: Vec<Vec<f64>>,
    pub im_max: Vec<Vec<f64>>,
    pub anchor_state: Vec<f64>,
    /// ρ = 1 level set. For 2-D sweeps consecutive pairs of points are
    /// line segments; for 1-D sweeps each point is `[x, 1]`.
    pub rho_one_contour: Vec<[f64; 2]>,
}

/// Spectral report of `A(s)` with the swept components of `anchor`
/// replaced by `values`.
pub fn cell_report(
    dynamics: &DynamicsNet,
    anchor: &[f64],
    dims: &[usize],
    values: &[f64],
) -> Result<SpectralReport> {
    let mut s = anchor.to_vec();
    for (&d, &v) in dims.iter().zip(values) {
        s[d] = v;
    }
    spectral_report(&dynamics.matrix(&s)?)
}

pub fn contour_frame(
    dynamics: &DynamicsNet,
    t: usize,
    anchor: &[f64],
    spec: &SweepSpec,
) -> Result<ContourFrame> {
    spec.validate(anchor.len())?;
    let axes = spec.axes();
    let nj = if axes.len() == 2 { axes[1].len() } else { 1 };
    let mut rho = vec![vec![0.0; nj]; axes[0].len()];
    let mut im_max = rho.clone();
    for (i, &x) in axes[0].iter().enumerate() {
        for j in 0..nj {
            let values: Vec<f64> = if axes.len() == 2 {
                vec![x, axes[1][j]]
            } else {
                vec![x]
            };
            let r = cell_report(dynamics, anchor, &spec.dims, &values)?;
            rho[i][j] = r.rho;
            im_max[i][j] = r.im_max;
        }
    }
    let rho_one_contour = if axes.len() == 2 {
        marching_squares(&axes[0], &axes[1], &rho, 1.0)
    } else {
        crossings_1d(&axes[0], &rho, 1.0)
    };
    Ok(ContourFrame {
        t,
        dims: spec.dims.clone(),
        axes,
        rho,
        im_max,
        anchor_state: anchor.to_vec(),
        rho_one_contour,
    })
}

/// Frames at steps `0, every, 2·every, …` anchored on the recorded
/// observations.
pub fn stability_contour(
    dynamics: &DynamicsNet,
    traj: &Trajectory,
    spec: &SweepSpec,
) -> Result<Vec<ContourFrame>> {
    spec.validate(dynamics.state_dim())?;
    traj.records
        .iter()
        .step_by(spec.every)
        .map(|r| contour_frame(dynamics, r.t, &r.observation, spec))
        .collect()
}

fn lerp_root(x0: f64, x1: f64, f0: f64, f1: f64) -> f64 {
    if f0 == f1 {
        0.5 * (x0 + x1)
    } else {
        x0 + (x1 - x0) * f0 / (f0 - f1)
    }
}

fn crossings_1d(xs: &[f64], grid: &[Vec<f64>], level: f64) -> Vec<[f64; 2]> {
    let f: Vec<f64> = grid.iter().map(|row| row[0] - level).collect();
    (0..xs.len().saturating_sub(1))
        .filter(|&i| (f[i] >= 0.0) != (f[i + 1] >= 0.0))
        .map(|i| [lerp_root(xs[i], xs[i + 1], f[i], f[i + 1]), level])
        .collect()
}

/// Level-set segments of `grid[i][j]` sampled at `(xs[i], ys[j])`.
pub fn marching_squares(xs: &[f64], ys: &[f64], grid: &[Vec<f64>], level: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    if xs.len() < 2 || ys.len() < 2 {
        return out;
    }
    for i in 0..xs.len() - 1 {
        for j in 0..ys.len() - 1 {
            let c = [
                (xs[i], ys[j], grid[i][j] - level),
                (xs[i + 1], ys[j], grid[i + 1][j] - level),
                (xs[i + 1], ys[j + 1], grid[i + 1][j + 1] - level),
                (xs[i], ys[j + 1], grid[i][j + 1] - level),
            ];
            // Edge k joins corner k and corner k+1.
            let mut hits: Vec<(usize, [f64; 2])> = Vec::with_capacity(4);
            for k in 0..4 {
                let (a, b) = (c[k], c[(k + 1) % 4]);
                if (a.2 >= 0.0) != (b.2 >= 0.0) {
                    let p = [lerp_root(a.0, b.0, a.2, b.2), lerp_root(a.1, b.1, a.2, b.2)];
                    hits.push((k, p));
                }
            }
            match hits.len() {
                2 => {
                    out.push(hits[0].1);
                    out.push(hits[1].1);
                }
                4 => {
                    let centre = c.iter().map(|v| v.2).sum::<f64>() / 4.0;
                    let joined_02 = (centre >= 0.0) == (c[0].2 >= 0.0);
                    let pairs = if joined_02 {
                        // Separate corners 1 and 3.
                        [(0, 1), (2, 3)]
                    } else {
                        // Separate corners 0 and 2.
                        [(3, 0), (1, 2)]
                    };
                    for (a, b) in pairs {
                        out.push(hits[a].1);
                        out.push(hits[b].1);
                    }
                }
                _ => {}
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Mlp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec2() -> SweepSpec {
        SweepSpec {
            dims: vec![0, 2],
            ranges: vec![(-1.0, 1.0), (-8.0, 8.0)],
            resolution: 9,
            every: 10,
        }
    }

    #[test]
    fn zero_network_gives_zero_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut d = DynamicsNet::new(3, 3, &[8], None, &mut rng);
        d.net = Mlp::zeros(&[3, 8, 9], crate::nn::Activation::Tanh, crate::nn::Activation::Tanh);
        let f = contour_frame(&d, 0, &[1.0, 0.0, 0.0], &spec2()).unwrap();
        assert!(f.rho.iter().flatten().all(|&r| r == 0.0));
        assert!(f.rho_one_contour.is_empty());
    }

    #[test]
    fn anchor_cell_matches_direct_report() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = DynamicsNet::new(3, 3, &[8], None, &mut rng);
        let anchor = [0.2, -0.4, 1.5];
        let direct = spectral_report(&d.matrix(&anchor).unwrap()).unwrap();
        let cell = cell_report(&d, &anchor, &[0, 2], &[0.2, 1.5]).unwrap();
        assert_eq!(direct, cell);
    }

    #[test]
    fn bad_specs_are_rejected() {
        let mut s = spec2();
        s.resolution = 0;
        assert!(s.validate(3).is_err());
        let mut s = spec2();
        s.ranges[0] = (1.0, 1.0);
        assert!(s.validate(3).is_err());
        let mut s = spec2();
        s.dims = vec![0, 5];
        assert!(s.validate(3).is_err());
        assert!(spec2().validate(3).is_ok());
    }

    #[test]
    fn circle_level_set() {
        // f = x² + y², level 1: every segment endpoint lies near the unit circle.
        let xs = linspace(-2.0, 2.0, 81);
        let grid: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| xs.iter().map(|y| x * x + y * y).collect())
            .collect();
        let pts = marching_squares(&xs, &xs, &grid, 1.0);
        assert!(!pts.is_empty() && pts.len() % 2 == 0);
        for p in pts {
            assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() < 5e-3);
        }
    }

    #[test]
    fn one_dimensional_crossing() {
        let xs = linspace(0.0, 2.0, 5);
        let grid: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x]).collect();
        assert_eq!(crossings_1d(&xs, &grid, 1.0), vec![[1.0, 1.0]]);
    }
}
