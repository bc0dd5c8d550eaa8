use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::bundle::FORMAT_VERSION;
use crate::envs::EnvId;
use crate::error::{Error, Result};
use crate::policy::{LatentPolicy, Trajectory};
use crate::stability::{linspace, spectral_report, ContourFrame, FloquetReport, KreissReport};

fn state_columns(id: EnvId) -> &'static [&'static str] {
    match id {
        EnvId::Pendulum => &["theta", "theta_dot"],
        EnvId::CartPole => &["x", "x_dot", "phi", "phi_dot"],
    }
}

/// One row per step: `t,<physical state>,<action>,reward,rho,im_max`.
pub fn trajectory_csv(traj: &Trajectory) -> Result<String> {
    let mut out = String::from("t");
    for c in state_columns(traj.env.id) {
        out.push(',');
        out.push_str(c);
    }
    let m = traj.records.first().map_or(1, |r| r.action.len());
    for j in 0..m {
        write!(out, ",action_{j}").unwrap();
    }
    out.push_str(",reward,rho,im_max\n");
    for (rec, a) in traj.records.iter().zip(traj.matrices()?) {
        let report = spectral_report(&a)?;
        write!(out, "{}", rec.t).unwrap();
        for v in rec.state.iter().chain(&rec.action) {
            write!(out, ",{v}").unwrap();
        }
        writeln!(out, ",{},{},{}", rec.reward, report.rho, report.im_max).unwrap();
    }
    Ok(out)
}

/// JSON sidecar holding the complete trajectory, including every `A_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub format_version: u32,
    pub trajectory: Trajectory,
}

impl TrajectoryFile {
    pub fn load(path: &Path) -> Result<Trajectory> {
        let f: TrajectoryFile = serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if f.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "trajectory format version {} is not supported",
                f.format_version
            )));
        }
        Ok(f.trajectory)
    }
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`; returns both paths.
pub fn write_trajectory(dir: &Path, stem: &str, traj: &Trajectory) -> Result<(PathBuf, PathBuf)> {
    let csv = dir.join(format!("{stem}.csv"));
    let sidecar = dir.join(format!("{stem}.json"));
    fs::write(&csv, trajectory_csv(traj)?)?;
    let file = TrajectoryFile {
        format_version: FORMAT_VERSION,
        trajectory: traj.clone(),
    };
    fs::write(&sidecar, serde_json::to_string_pretty(&file)? + "\n")?;
    Ok((csv, sidecar))
}

/// One `contour_tNNNN.json` per frame.
pub fn write_contour_frames(dir: &Path, frames: &[ContourFrame]) -> Result<Vec<PathBuf>> {
    frames
        .iter()
        .map(|f| {
            let p = dir.join(format!("contour_t{:04}.json", f.t));
            fs::write(&p, serde_json::to_string(f)? + "\n")?;
            Ok(p)
        })
        .collect()
}

pub fn kreiss_json(report: &KreissReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

/// Non-finite reals become the strings `"inf"`, `"-inf"` or `"nan"`.
fn real(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn floquet_json(report: &FloquetReport) -> Result<String> {
    let complex = |c: &num_complex::Complex64| json!([real(c.re), real(c.im)]);
    let v = json!({
        "t1": report.t1,
        "t2": report.t2,
        "period": report.period(),
        "dt": report.dt,
        "monodromy": report.monodromy,
        "multipliers": report.multipliers.iter().map(complex).collect::<Vec<_>>(),
        "exponents": report.exponents.iter().map(complex).collect::<Vec<_>>(),
        "classes": report.classes,
    });
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

/// Executed action over a 2-D grid of physical coordinates, with a fixed
/// previous action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionGridExport {
    pub env: EnvId,
    /// Names of the two swept physical coordinates.
    pub coords: [String; 2],
    pub axes: [Vec<f64>; 2],
    pub prev_action: Vec<f64>,
    /// `actions[i][j]` at `(axes[0][i], axes[1][j])`, first action component.
    pub actions: Vec<Vec<f64>>,
}

/// Default sweep ranges: `θ ∈ [−π, π], θ̇ ∈ [−8, 8]` for Pendulum and
/// `φ ∈ [−12°, 12°], φ̇ ∈ [−2, 2]` (cart at rest at the origin) for CartPole.
pub fn default_grid_ranges(id: EnvId) -> [(f64, f64); 2] {
    match id {
        EnvId::Pendulum => [(-std::f64::consts::PI, std::f64::consts::PI), (-8.0, 8.0)],
        EnvId::CartPole => {
            let p = crate::envs::PHI_THRESHOLD;
            [(-p, p), (-2.0, 2.0)]
        }
    }
}

/// Observation for the grid coordinates `(u, v)`.
pub fn grid_observation(id: EnvId, u: f64, v: f64) -> Vec<f64> {
    match id {
        EnvId::Pendulum => vec![u.cos(), u.sin(), v],
        EnvId::CartPole => vec![0.0, 0.0, u, v],
    }
}

pub fn action_grid(
    policy: &LatentPolicy,
    id: EnvId,
    ranges: [(f64, f64); 2],
    resolution: usize,
    prev_action: &[f64],
) -> Result<ActionGridExport> {
    if resolution == 0 {
        return Err(Error::InvalidConfig("action grid resolution must be positive".into()));
    }
    let axes = [
        linspace(ranges[0].0, ranges[0].1, resolution),
        linspace(ranges[1].0, ranges[1].1, resolution),
    ];
    let mut actions = vec![vec![0.0; resolution]; resolution];
    for (i, &u) in axes[0].iter().enumerate() {
        for (j, &v) in axes[1].iter().enumerate() {
            let (a, _) = policy.step(&grid_observation(id, u, v), prev_action)?;
            actions[i][j] = a[0];
        }
    }
    let names = match id {
        EnvId::Pendulum => ["theta", "theta_dot"],
        EnvId::CartPole => ["phi", "phi_dot"],
    };
    Ok(ActionGridExport {
        env: id,
        coords: names.map(String::from),
        axes,
        prev_action: prev_action.to_vec(),
        actions,
    })
}
