use std::fs;
use std::path::{Path, PathBuf};

use mobelcov_core::baseline::{fixed_policy_sweep, FixedPolicy};
use mobelcov_core::env::{rollout, Env};
use mobelcov_core::epi::ParamFile;
use mobelcov_core::io::{self, MetricRow, RunMetadata};
use mobelcov_core::nn::{read_checkpoint, write_checkpoint, Network};
use mobelcov_core::pareto::{
    epsilon_indicators, hypervolume_2d, nondominated_filter, normalize_points, NormalizationBounds, Point,
};
use mobelcov_core::pcn::{self, rollout_policy, CoveragePoint, CoverageSet, DesiredTarget};
use mobelcov_core::rng::SeedStream;
use mobelcov_core::{Error, Result};

use crate::args::{Cli, Command};
use crate::config::RunConfig;

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::resolve(&cli.common)?;
    match cli.command {
        Command::Train { arch } => {
            if let Some(a) = arch {
                cfg.pcn.arch = a;
            }
            train(&cfg)
        }
        Command::Sweep { levels } => {
            if let Some(l) = levels {
                cfg.baseline.levels = l;
            }
            sweep(&cfg)
        }
        Command::Evaluate { checkpoint, coverage } => evaluate(&cfg, &checkpoint, &coverage),
        Command::Metrics { front, sets, reference, normalize } => metrics(&cfg, &front, &sets, reference, normalize),
        Command::Rollout { checkpoint, coverage, levels } => {
            let trained = checkpoint.zip(coverage);
            rollout_cmd(&cfg, trained.as_ref().map(|(a, b)| (a.as_path(), b.as_path())), &levels)
        }
    }
}

fn build_env(cfg: &RunConfig) -> Result<Env> {
    let params = match &cfg.params {
        Some(p) => ParamFile::load(p)?,
        None => ParamFile::shipped_default(),
    };
    Env::new(params.build()?, cfg.env.clone())
}

fn write_metadata(cfg: &RunConfig, dir: &Path, command: &str, seed: u64) -> Result<()> {
    RunMetadata::new(command, seed, cfg.to_toml()?).write(&dir.join(format!("{command}.run.toml")))
}

fn train(cfg: &RunConfig) -> Result<()> {
    let env = build_env(cfg)?;
    let seeds = cfg.all_seeds();
    let mut union: Vec<(u64, usize, Point)> = Vec::new();
    for &seed in &seeds {
        let dir = if seeds.len() == 1 { cfg.out.clone() } else { cfg.out.join(format!("seed-{seed}")) };
        let out = pcn::train(&env, &cfg.pcn, seed)?;
        let mut ckpt = Vec::new();
        write_checkpoint(&out.network, &mut ckpt)?;
        io::write_atomic(&dir.join("checkpoint.bin"), &ckpt)?;
        io::write_atomic(&dir.join("coverage.csv"), &io::coverage_csv(&out.coverage, &cfg.env.rewards)?)?;
        io::write_atomic(&dir.join("training_log.csv"), &io::training_log_csv(&out.log)?)?;
        let mut seed_cfg = cfg.clone();
        seed_cfg.seed = seed;
        write_metadata(&seed_cfg, &dir, "train", seed)?;
        for p in &out.coverage.points {
            union.push((seed, p.policy_id, cfg.env.rewards.unscale(p.achieved_return)));
        }
        println!(
            "seed {seed}: {} policies, {} steps, written to {}",
            out.coverage.points.len(),
            out.log.last().map_or(0, |r| r.steps),
            dir.display()
        );
    }
    if seeds.len() > 1 {
        let points: Vec<Point> = union.iter().map(|u| u.2).collect();
        let keep = mobelcov_core::pareto::nondominated_indices(&points);
        let mut text = String::from("schema_version,seed,policy_id,achieved_return_0,achieved_return_1\n");
        for i in keep {
            let (seed, id, p) = union[i];
            text.push_str(&format!("{},{seed},{id},{},{}\n", io::SCHEMA_VERSION, p[0], p[1]));
        }
        io::write_atomic(&cfg.out.join("coverage_union.csv"), text.as_bytes())?;
        write_metadata(cfg, &cfg.out, "train", cfg.seed)?;
    }
    Ok(())
}

fn sweep(cfg: &RunConfig) -> Result<()> {
    let env = build_env(cfg)?;
    let sweep = fixed_policy_sweep(&env, cfg.baseline.levels, cfg.baseline.repeats, cfg.pcn.execution, cfg.seed)?;
    io::write_atomic(&cfg.out.join("baseline.csv"), &io::baseline_csv(&sweep)?)?;
    write_metadata(cfg, &cfg.out, "sweep", cfg.seed)?;
    println!(
        "{} levels, {} non-dominated, written to {}",
        sweep.points.len(),
        sweep.points.iter().filter(|p| p.nondominated).count(),
        cfg.out.display()
    );
    Ok(())
}

fn load_trained(cfg: &RunConfig, checkpoint: &Path, coverage: &Path) -> Result<(Network, CoverageSet)> {
    let net = read_checkpoint(
        fs::File::open(checkpoint).map_err(|e| Error::Checkpoint(format!("{}: {e}", checkpoint.display())))?,
    )?;
    let points = io::read_coverage(coverage)?
        .into_iter()
        .map(|r| {
            let scale = |v: [f64; 2]| cfg.env.rewards.scale(v);
            CoveragePoint {
                policy_id: r.policy_id,
                desired_return: scale([r.desired_return_0, r.desired_return_1]),
                desired_horizon: r.desired_horizon,
                achieved_return: scale([r.achieved_return_0, r.achieved_return_1]),
            }
        })
        .collect();
    let cs = CoverageSet { arch: net.arch(), n_params: net.n_params(), points };
    Ok((net, cs))
}

fn evaluate(cfg: &RunConfig, checkpoint: &Path, coverage: &Path) -> Result<()> {
    let env = build_env(cfg)?;
    let (net, cs) = load_trained(cfg, checkpoint, coverage)?;
    if net.groups() != env.model().groups() {
        return Err(Error::Checkpoint(format!(
            "checkpoint expects {} age groups, parameters have {}",
            net.groups(),
            env.model().groups()
        )));
    }
    let report = pcn::evaluate_policies(&env, &net, &cs, cfg.pcn.eval_episodes, cfg.pcn.execution, cfg.seed)?;
    io::write_atomic(&cfg.out.join("robustness.csv"), &io::robustness_csv(&report, &cfg.env.rewards)?)?;
    let summary = format!(
        "schema_version,policies,n_eval,epsilon,epsilon_mean\n{},{},{},{},{}\n",
        io::SCHEMA_VERSION,
        report.rows.len(),
        cfg.pcn.eval_episodes,
        report.epsilon,
        report.epsilon_mean
    );
    io::write_atomic(&cfg.out.join("robustness_summary.csv"), summary.as_bytes())?;
    write_metadata(cfg, &cfg.out, "evaluate", cfg.seed)?;
    println!("I_eps {:.6} I_eps_mean {:.6} over {} policies", report.epsilon, report.epsilon_mean, report.rows.len());
    Ok(())
}

fn metrics(
    cfg: &RunConfig,
    front_path: &Path,
    sets: &[(String, PathBuf)],
    reference: Option<[f64; 2]>,
    normalize: bool,
) -> Result<()> {
    let front = nondominated_filter(&io::read_points(front_path)?);
    if front.is_empty() {
        return Err(Error::Empty("reference front"));
    }
    let mut named: Vec<(String, Vec<Point>)> = vec![("front".into(), front)];
    for (name, path) in sets {
        named.push((name.clone(), io::read_points(path)?));
    }
    let (named, reference) = if normalize {
        let bounds = NormalizationBounds::from_sets(named.iter().map(|(_, p)| p.as_slice())).expect("front is non-empty");
        let scaled = named.into_iter().map(|(n, p)| (n, normalize_points(&p, &bounds))).collect::<Vec<_>>();
        (scaled, [0.0, 0.0])
    } else {
        let lowest = named
            .iter()
            .flat_map(|(_, p)| p.iter())
            .fold([f64::INFINITY; 2], |a, p| [a[0].min(p[0]), a[1].min(p[1])]);
        (named, reference.unwrap_or(lowest))
    };
    let front = named[0].1.clone();
    let mut rows = Vec::new();
    for (i, (name, pts)) in named.iter().enumerate() {
        let (epsilon, epsilon_mean) = if i == 0 {
            (None, None)
        } else {
            let (e, m) = epsilon_indicators(&front, pts)?;
            (Some(e), Some(m))
        };
        rows.push(MetricRow {
            schema_version: io::SCHEMA_VERSION,
            set: name.clone(),
            points: pts.len(),
            hypervolume: hypervolume_2d(pts, reference),
            epsilon,
            epsilon_mean,
        });
    }
    io::write_atomic(&cfg.out.join("metrics.csv"), &io::metrics_csv(&rows)?)?;
    write_metadata(cfg, &cfg.out, "metrics", cfg.seed)?;
    println!("reference point ({}, {})", reference[0], reference[1]);
    for r in &rows {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x}"));
        println!(
            "{}: points {} hypervolume {} I_eps {} I_eps_mean {}",
            r.set,
            r.points,
            r.hypervolume,
            fmt(r.epsilon),
            fmt(r.epsilon_mean)
        );
    }
    Ok(())
}

fn rollout_cmd(cfg: &RunConfig, trained: Option<(&Path, &Path)>, levels: &[f64]) -> Result<()> {
    if trained.is_none() && levels.is_empty() {
        return Err(Error::InvalidInput("nothing to roll out: pass --checkpoint/--coverage or --levels".into()));
    }
    let env = build_env(cfg)?;
    let seeds = SeedStream::new(cfg.seed);
    let mut runs = Vec::new();
    if let Some((ckpt, cov)) = trained {
        let (net, cs) = load_trained(cfg, ckpt, cov)?;
        for p in &cs.points {
            let target = DesiredTarget::new(p.desired_return, p.desired_horizon)?;
            let mut rng = seeds.rng("rollout-pcn", p.policy_id as u64);
            let ep = rollout_policy(&env, &net, target, &mut rng)?;
            runs.push((format!("pcn-{}", p.policy_id), ep.daily));
        }
    }
    for (i, &level) in levels.iter().enumerate() {
        let policy = FixedPolicy::new(level)?;
        let mut rng = seeds.rng("rollout-fixed", i as u64);
        let ep = rollout(&env, |_, _| Ok(policy.action()), true, &mut rng)?;
        runs.push((format!("fixed-{level}"), ep.daily));
    }
    io::write_atomic(&cfg.out.join("daily.csv"), &io::daily_csv(&runs)?)?;
    write_metadata(cfg, &cfg.out, "rollout", cfg.seed)?;
    println!("{} policies, written to {}", runs.len(), cfg.out.join("daily.csv").display());
    Ok(())
}
