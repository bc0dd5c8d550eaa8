use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use salsa_core::io::{
    action_grid, default_grid_ranges, floquet_json, kreiss_json, write_contour_frames,
    write_trajectory, AutoencoderFile, ModelBundle, RunConfig, TrajectoryFile,
};
use salsa_core::stability::{
    floquet_trajectory, kreiss_trajectory, stability_contour, KreissMode, KreissSearch, SweepSpec,
    Window,
};
use salsa_core::trainer::{evaluate, train_with_progress};
use salsa_core::{
    rollout, train_autoencoder, ActionDataset, ActionMask, EnvId, Start, Trajectory,
};

use crate::args::{Analysis, Common, Source};
use crate::run::{latest_path, publish_latest, RunDir};

/// A required input file is absent or unusable.
#[derive(Debug)]
pub struct Missing(pub String);

impl std::fmt::Display for Missing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Missing {}

/// The command ran but its numeric target was not met.
#[derive(Debug)]
pub struct TargetMissed(pub String);

impl std::fmt::Display for TargetMissed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for TargetMissed {}

/// Bad flag values that clap cannot check.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(Usage(msg.into()))
}

fn parse_env(s: &str) -> Result<EnvId> {
    s.parse::<EnvId>().map_err(|e| usage(e.to_string()))
}

fn run_config(common: &Common, overrides: &[(String, String)]) -> Result<RunConfig> {
    let id = parse_env(&common.env)?;
    let mut cfg = RunConfig::defaults(id);
    if let Some(p) = &common.config {
        if !p.exists() {
            bail!(Missing(format!("config file {} does not exist", p.display())));
        }
        cfg.apply_file(p)?;
    }
    cfg.apply_all(overrides)?;
    cfg.seed = common.seed;
    cfg.env.seed = common.seed;
    cfg.ae.seed = common.seed;
    cfg.ae.hd = common.hd;
    cfg.train.seed = common.seed;
    cfg.validate()?;
    Ok(cfg)
}

fn load_bundle(path: &Path) -> Result<ModelBundle> {
    if !path.exists() {
        bail!(Missing(format!(
            "bundle {} not found; create one with `salsa train`",
            path.display()
        )));
    }
    ModelBundle::load(path).with_context(|| format!("loading bundle {}", path.display()))
}

fn load_trajectory(path: &Path) -> Result<Trajectory> {
    if !path.exists() {
        bail!(Missing(format!(
            "trajectory {} not found; create one with `salsa rollout`",
            path.display()
        )));
    }
    TrajectoryFile::load(path).with_context(|| format!("loading trajectory {}", path.display()))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len().max(1) as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[allow(clippy::too_many_arguments)]
pub fn train_ae(
    out: &Path,
    common: &Common,
    overrides: &[(String, String)],
    samples: usize,
    epochs: Option<usize>,
    source: Source,
    agent_bundle: Option<&Path>,
    target_mse: f64,
) -> Result<()> {
    let mut cfg = run_config(common, overrides)?;
    if let Some(e) = epochs {
        cfg.ae.epochs = e;
    }
    let mut inputs: Vec<&Path> = Vec::new();
    if let Some(p) = agent_bundle {
        inputs.push(p);
    }
    if source == Source::Agent && agent_bundle.is_none() {
        return Err(usage("--source agent needs --agent-bundle"));
    }
    let bounds = cfg.env.action_bounds();
    let dataset = match source {
        Source::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            ActionDataset::uniform(&bounds, samples, &mut rng)
        }
        Source::Agent => {
            let bundle = load_bundle(agent_bundle.expect("checked above"))?;
            let policy = bundle.policy()?;
            let mut actions = Vec::with_capacity(samples);
            let mut seed = cfg.seed;
            while actions.len() < samples {
                let t = rollout(
                    &cfg.env,
                    &policy,
                    cfg.env.max_episode_steps,
                    &ActionMask::none(),
                    Start::Seed(seed),
                )?;
                actions.extend(t.records.into_iter().map(|r| r.action));
                seed += 1;
            }
            actions.truncate(samples);
            ActionDataset::from_agent(&actions, &bounds)?
        }
    };
    let mut run = RunDir::create(out, "train-ae", cfg.seed, &cfg, &inputs)?;
    let (ae, report) = train_autoencoder(&dataset, &cfg.ae)?;
    let losses: String = report
        .epoch_losses
        .iter()
        .enumerate()
        .fold(String::from("epoch,loss\n"), |mut s, (i, l)| {
            writeln!(s, "{i},{l}").unwrap();
            s
        });
    run.write("ae_loss.csv", &losses)?;
    let file = AutoencoderFile::new(cfg.env.id, bounds, ae, cfg.ae.clone(), report.clone());
    let json = file.to_json()?;
    run.write("autoencoder.json", &json)?;
    let latest = publish_latest(out, "ae", cfg.env.id.as_str(), cfg.ae.hd, &json)?;
    let met = report.holdout_mse <= target_mse;
    run.note(
        "result",
        json!({
            "holdout_mse": report.holdout_mse,
            "holdout_max_abs_error": report.holdout_max_abs_error,
            "target_mse": target_mse,
            "target_met": met,
        }),
    )?;
    let dir = run.finish(if met { "ok" } else { "target_missed" })?;
    println!(
        "held-out MSE {:.3e} (max |error| {:.3e}); weights in {} and {}",
        report.holdout_mse,
        report.holdout_max_abs_error,
        dir.join("autoencoder.json").display(),
        latest.display()
    );
    if !met {
        bail!(TargetMissed(format!(
            "held-out MSE {:.3e} above target {target_mse:.1e}",
            report.holdout_mse
        )));
    }
    Ok(())
}

pub fn train(
    out: &Path,
    common: &Common,
    overrides: &[(String, String)],
    ae_path: Option<&Path>,
    steps: Option<usize>,
    eval_episodes: u64,
) -> Result<()> {
    let mut cfg = run_config(common, overrides)?;
    if let Some(s) = steps {
        cfg.train.total_steps = s;
    }
    let env_name = cfg.env.id.as_str();
    let ae_path: PathBuf = ae_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| latest_path(out, "ae", env_name, common.hd));
    if !ae_path.exists() {
        bail!(Missing(format!(
            "no pretrained autoencoder at {}; run `salsa train-ae --env {env_name} --hd {}` first",
            ae_path.display(),
            common.hd
        )));
    }
    let ae_file = AutoencoderFile::load(&ae_path)
        .with_context(|| format!("loading autoencoder {}", ae_path.display()))?;
    if ae_file.env != cfg.env.id || ae_file.hd != common.hd {
        bail!(Missing(format!(
            "autoencoder {} is for {} with hd {}, not {env_name} with hd {}; run `salsa train-ae --env {env_name} --hd {}`",
            ae_path.display(),
            ae_file.env,
            ae_file.hd,
            common.hd,
            common.hd
        )));
    }

    let mut run = RunDir::create(out, "train", cfg.seed, &cfg, &[&ae_path])?;
    let checkpoints = run.path.join("checkpoints");
    std::fs::create_dir_all(&checkpoints)?;
    let mut curve = String::from("episode,return,eval_return\n");
    let mut checkpoint_err = None;
    let outcome = train_with_progress(&cfg.env, &ae_file.autoencoder, &cfg.train, |p, policy, critic| {
        let eval = p.eval_return.map(|e| e.to_string()).unwrap_or_default();
        writeln!(curve, "{},{},{eval}", p.episode, p.episode_return).unwrap();
        if let Some(e) = p.eval_return {
            log::info!("episode {} step {}: eval return {e:.2}", p.episode, p.steps);
            let b = ModelBundle::new(cfg.env.clone(), policy.clone(), critic.clone(), cfg.train.clone());
            let path = checkpoints.join(format!("step{:07}.json", p.steps));
            if let Err(err) = b.save(&path) {
                checkpoint_err.get_or_insert(err);
            }
        }
    })?;
    if let Some(err) = checkpoint_err {
        return Err(err.into());
    }
    run.write("curve.csv", &curve)?;
    let bundle = ModelBundle::new(cfg.env.clone(), outcome.policy, outcome.critic, cfg.train.clone());
    let json = bundle.to_json()?;
    run.write("bundle.json", &json)?;
    let latest = publish_latest(out, "bundle", env_name, common.hd, &json)?;

    let policy = bundle.policy()?;
    let returns = evaluate(&policy, &cfg.env, 0..eval_episodes)?;
    let (mean, std) = mean_std(&returns);
    run.note(
        "result",
        json!({
            "steps": outcome.steps,
            "best_training_eval": outcome.best_eval,
            "eval_episodes": eval_episodes,
            "eval_mean": mean,
            "eval_std": std,
        }),
    )?;
    let dir = run.finish("ok")?;
    println!(
        "greedy return over {eval_episodes} episodes: {mean:.2} ± {std:.2}; bundle in {} and {}",
        dir.join("bundle.json").display(),
        latest.display()
    );
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<T>()
                .map_err(|_| usage(format!("bad {what} entry `{x}`")))
        })
        .collect()
}

fn parse_span(s: &str, what: &str) -> Result<(f64, f64)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| usage(format!("{what} `{s}` should look like lo:hi")))?;
    let p = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| usage(format!("bad number `{v}` in {what}")))
    };
    Ok((p(a)?, p(b)?))
}

#[allow(clippy::too_many_arguments)]
pub fn rollout_cmd(
    out: &Path,
    bundle_path: &Path,
    steps: Option<usize>,
    seed: u64,
    mask: Option<&str>,
    start: Option<&str>,
    export: &str,
) -> Result<()> {
    let bundle = load_bundle(bundle_path)?;
    let policy = bundle.policy()?;
    let horizon = steps.unwrap_or(bundle.env.max_episode_steps);
    let mask: ActionMask = match mask {
        Some(m) => m.parse().map_err(|e: salsa_core::Error| usage(e.to_string()))?,
        None => ActionMask::none(),
    };
    let start = match start {
        Some(s) => Start::State(parse_list(s, "start state")?),
        None => Start::Seed(seed),
    };
    let config = json!({
        "bundle": bundle_path,
        "horizon": horizon,
        "seed": seed,
        "mask": mask.to_string(),
        "start": format!("{start:?}"),
        "env": bundle.env,
    });
    let mut run = RunDir::create(out, "rollout", seed, &config, &[bundle_path])?;
    let traj = rollout(&bundle.env, &policy, horizon, &mask, start)?;
    let (csv, sidecar) = write_trajectory(&run.path, export, &traj)?;
    run.record(&csv)?;
    run.record(&sidecar)?;
    run.note("result", json!({ "steps": traj.len(), "total_reward": traj.total_reward() }))?;
    run.finish("ok")?;
    println!(
        "{} steps, return {:.2}; wrote {} and {}",
        traj.len(),
        traj.total_reward(),
        csv.display(),
        sidecar.display()
    );
    Ok(())
}

pub fn eval_cmd(out: &Path, bundle_path: &Path, episodes: u64, seed: u64) -> Result<()> {
    let bundle = load_bundle(bundle_path)?;
    let config = json!({ "bundle": bundle_path, "episodes": episodes, "seed": seed });
    let mut run = RunDir::create(out, "eval", seed, &config, &[bundle_path])?;
    let returns = evaluate(&bundle.policy()?, &bundle.env, seed..seed + episodes)?;
    let (mean, std) = mean_std(&returns);
    run.write(
        "eval.json",
        &(serde_json::to_string_pretty(&json!({ "returns": returns, "mean": mean, "std": std }))? + "\n"),
    )?;
    run.finish("ok")?;
    println!("greedy return over {episodes} episodes: {mean:.2} ± {std:.2}");
    Ok(())
}

fn default_obs_ranges(id: EnvId) -> Vec<(f64, f64)> {
    match id {
        EnvId::Pendulum => vec![(-1.0, 1.0), (-1.0, 1.0), (-8.0, 8.0)],
        EnvId::CartPole => vec![(-2.4, 2.4), (-3.0, 3.0), (-0.21, 0.21), (-3.0, 3.0)],
    }
}

pub fn analyze(out: &Path, what: &Analysis) -> Result<()> {
    match what {
        Analysis::Contour {
            bundle,
            trajectory,
            dims,
            ranges,
            res,
            every,
        } => {
            let b = load_bundle(bundle)?;
            let traj = load_trajectory(trajectory)?;
            let dims: Vec<usize> = parse_list(dims, "dims")?;
            let ranges = match ranges {
                Some(r) => r
                    .split(',')
                    .map(|s| parse_span(s, "range"))
                    .collect::<Result<Vec<_>>>()?,
                None => {
                    let all = default_obs_ranges(b.env.id);
                    dims.iter()
                        .map(|&d| all.get(d).copied().ok_or_else(|| usage(format!("dimension {d} out of range"))))
                        .collect::<Result<Vec<_>>>()?
                }
            };
            let spec = SweepSpec {
                dims,
                ranges,
                resolution: *res,
                every: *every,
            };
            spec.validate(b.dynamics.state_dim())
                .map_err(|e| usage(e.to_string()))?;
            let mut run = RunDir::create(out, "analyze-contour", traj.seed, &spec, &[bundle, trajectory])?;
            let frames = stability_contour(&b.dynamics, &traj, &spec)?;
            let dir = run.path.join("contour");
            std::fs::create_dir_all(&dir)?;
            for p in write_contour_frames(&dir, &frames)? {
                run.record(&p)?;
            }
            let dir = run.finish("ok")?;
            println!("{} contour frames in {}", frames.len(), dir.join("contour").display());
        }
        Analysis::Kreiss {
            trajectory,
            mode,
            normality_tol,
        } => {
            let traj = load_trajectory(trajectory)?;
            let mode: KreissMode = mode.parse().map_err(|e: salsa_core::Error| usage(e.to_string()))?;
            let search = KreissSearch::default();
            let config = json!({ "mode": mode, "normality_tol": normality_tol, "search": search });
            let mut run = RunDir::create(out, "analyze-kreiss", traj.seed, &config, &[trajectory])?;
            let report = kreiss_trajectory(&traj, mode, &search, *normality_tol)?;
            run.write("kreiss.json", &kreiss_json(&report)?)?;
            let mut v = report.values();
            v.sort_by(|a, b| a.total_cmp(b));
            let dir = run.finish("ok")?;
            if v.is_empty() {
                println!("no step passed the gate (rho < 1 and non-normal); report in {}", dir.display());
            } else {
                println!(
                    "{mode} kreiss over {} gated steps: median {:.4}, max {:.4}; report in {}",
                    v.len(),
                    v[v.len() / 2],
                    v[v.len() - 1],
                    dir.join("kreiss.json").display()
                );
            }
        }
        Analysis::Floquet {
            trajectory,
            window,
            component,
            fallback,
            dt,
        } => {
            let traj = load_trajectory(trajectory)?;
            let window = match window {
                Some(w) => {
                    let (a, b) = parse_span(w, "window")?;
                    Window::Explicit(a as usize, b as usize)
                }
                None => Window::Detect {
                    component: component.unwrap_or(match traj.env.id {
                        EnvId::Pendulum => 2,
                        EnvId::CartPole => 3,
                    }),
                    fallback: *fallback,
                },
            };
            let config = json!({ "window": format!("{window:?}"), "dt": dt });
            let mut run = RunDir::create(out, "analyze-floquet", traj.seed, &config, &[trajectory])?;
            let report = floquet_trajectory(&traj, window, *dt)?;
            run.write("floquet.json", &floquet_json(&report)?)?;
            let dir = run.finish("ok")?;
            println!("window [{}, {}), exponents:", report.t1, report.t2);
            for mu in &report.exponents {
                println!("  {:+.4} {:+.4}i", mu.re, mu.im);
            }
            println!("report in {}", dir.join("floquet.json").display());
        }
        Analysis::ActionGrid {
            bundle,
            res,
            prev_action,
        } => {
            let b = load_bundle(bundle)?;
            let config = json!({ "res": res, "prev_action": prev_action });
            let mut run = RunDir::create(out, "analyze-action-grid", 0, &config, &[bundle])?;
            let grid = action_grid(
                &b.policy()?,
                b.env.id,
                default_grid_ranges(b.env.id),
                *res,
                &[*prev_action],
            )?;
            let p = run.write("action_grid.json", &(serde_json::to_string(&grid)? + "\n"))?;
            run.finish("ok")?;
            println!("action grid {res}x{res} in {}", p.display());
        }
    }
    Ok(())
}
