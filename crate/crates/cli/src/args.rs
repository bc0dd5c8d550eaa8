use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "salsa",
    version,
    about = "Train latent-action policies and analyse the stability of their dynamics",
    after_help = "Settings may also be given as --env.KEY=VALUE, --ae.KEY=VALUE or --train.KEY=VALUE."
)]
pub struct Cli {
    /// Root directory for run directories.
    #[arg(long, global = true, default_value = "runs")]
    pub out: PathBuf,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Environment id: pendulum or cartpole.
    #[arg(long)]
    pub env: String,

    /// Latent dimension.
    #[arg(long, default_value_t = 3)]
    pub hd: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// key = value settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    Uniform,
    Agent,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pretrain the action autoencoder.
    TrainAe {
        #[command(flatten)]
        common: Common,
        /// Number of sampled actions.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long)]
        epochs: Option<usize>,
        /// Where the training actions come from.
        #[arg(long, value_enum, default_value_t = Source::Uniform)]
        source: Source,
        /// Bundle whose greedy rollouts supply actions for `--source agent`.
        #[arg(long)]
        agent_bundle: Option<PathBuf>,
        /// Held-out MSE the run must reach to exit successfully.
        #[arg(long, default_value_t = 1e-5)]
        target_mse: f64,
    },
    /// Train the latent dynamics network against a critic.
    Train {
        #[command(flatten)]
        common: Common,
        /// Pretrained autoencoder file (default: the latest one for env and hd).
        #[arg(long)]
        ae: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        /// Greedy evaluation episodes for the final report.
        #[arg(long, default_value_t = 50)]
        eval_episodes: u64,
    },
    /// Roll out a trained bundle and export the trajectory.
    Rollout {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Zero-action intervals, e.g. "0:30,150:200".
        #[arg(long)]
        mask: Option<String>,
        /// Explicit initial physical state, comma separated (overrides --seed).
        #[arg(long, allow_hyphen_values = true)]
        start: Option<String>,
        /// File stem for the exported CSV and JSON.
        #[arg(long, default_value = "trajectory")]
        export: String,
    },
    /// Greedy evaluation of a bundle.
    Eval {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value_t = 50)]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Post-hoc stability analyses.
    Analyze {
        #[command(subcommand)]
        what: Analysis,
    },
}

#[derive(Debug, Subcommand)]
pub enum Analysis {
    /// Spectral radius over a neighbourhood of trajectory states.
    Contour {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        /// One or two observation indices.
        #[arg(long, default_value = "0,1")]
        dims: String,
        /// Sweep ranges "lo:hi,lo:hi" (default: observation bounds).
        #[arg(long, allow_hyphen_values = true)]
        ranges: Option<String>,
        #[arg(long, default_value_t = 64)]
        res: usize,
        /// Frame stride in steps (1 for every step).
        #[arg(long, default_value_t = 10)]
        every: usize,
    },
    /// Kreiss constant along a trajectory.
    Kreiss {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long, default_value = "standard")]
        mode: String,
        /// Normality-defect threshold below which a step is skipped.
        #[arg(long, default_value_t = 1e-8)]
        normality_tol: f64,
    },
    /// Floquet exponents over one detected period.
    Floquet {
        #[arg(long)]
        trajectory: PathBuf,
        /// Explicit window "t1:t2" instead of peak detection.
        #[arg(long)]
        window: Option<String>,
        /// Observation component whose peaks define the period.
        #[arg(long)]
        component: Option<usize>,
        /// Fall back to the trailing N steps when no period is found.
        #[arg(long)]
        fallback: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
    },
    /// Executed action over a grid of states.
    ActionGrid {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value_t = 64)]
        res: usize,
        /// Previous action fed to the policy at every cell.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        prev_action: f64,
    },
}

/// Pulls `--env.k=v`, `--ae.k=v` and `--train.k=v` (or `--env.k v`) out of
/// the raw arguments.
pub fn extract_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), String> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let key = ["--env.", "--ae.", "--train."]
            .iter()
            .find(|p| arg.starts_with(*p))
            .map(|_| arg[2..].to_string());
        match key {
            Some(k) => match k.split_once('=') {
                Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
                None => {
                    let v = it.next().ok_or_else(|| format!("--{k} needs a value"))?;
                    overrides.push((k, v));
                }
            },
            None => rest.push(arg),
        }
    }
    Ok((rest, overrides))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn overrides_are_split_out() {
        let (rest, o) = extract_overrides(s(&[
            "salsa",
            "train",
            "--env",
            "pendulum",
            "--env.gravity=15",
            "--train.tau",
            "0.01",
        ]))
        .unwrap();
        assert_eq!(rest, s(&["salsa", "train", "--env", "pendulum"]));
        assert_eq!(
            o,
            vec![
                ("env.gravity".to_string(), "15".to_string()),
                ("train.tau".to_string(), "0.01".to_string())
            ]
        );
        assert!(extract_overrides(s(&["salsa", "--ae.epochs"])).is_err());
    }

    #[test]
    fn parses_rollout_mask() {
        let cli = Cli::try_parse_from(["salsa", "rollout", "--bundle", "b.json", "--mask", "0:30,150:200"])
            .unwrap();
        match cli.command {
            Command::Rollout { mask, .. } => assert_eq!(mask.as_deref(), Some("0:30,150:200")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_env_is_a_usage_error() {
        let err = Cli::try_parse_from(["salsa", "train-ae", "--hd", "3"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
