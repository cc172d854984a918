//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};

use mobelcov_core::baseline::{fixed_policy_sweep, level_grid, DEFAULT_LEVELS};
use mobelcov_core::env::{rollout, Env, EnvConfig, EnvState, LOCKDOWN_ACTION};
use mobelcov_core::epi::{effective_contact_matrix, Compartment, CompartmentState, Mode, ParamFile};
use mobelcov_core::exec::map_indexed;
use mobelcov_core::io::coverage_csv;
use mobelcov_core::nn::{gradient_check, init_network, Arch, TrainingBatch};
use mobelcov_core::pareto::{
    dominates, epsilon_indicators, hypervolume_2d, nondominated_filter, normalize_points, NormalizationBounds, Point,
};
use mobelcov_core::pcn::{evaluate_policies, train, PcnConfig, TrainOutcome};
use mobelcov_core::rng::{Rng as ChaRng, SeedStream};
use mobelcov_core::{Action, Execution};

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn env(mode: Mode) -> Env {
    let model = ParamFile::shipped_default().build().unwrap();
    Env::new(model, EnvConfig { mode, ..EnvConfig::shipped_default() }).unwrap()
}

fn random_state(rng: &mut ChaRng, groups: usize) -> CompartmentState {
    let mut st = CompartmentState::susceptible(&mobelcov_core::epi::AgeStructure::new(vec![1.0; groups], vec![String::new(); groups]).unwrap());
    for c in Compartment::ALL {
        for v in st.get_mut(c).iter_mut() {
            *v = rng.random_range(0..50_000u32) as f64;
        }
    }
    st
}

fn random_action(rng: &mut ChaRng) -> Action {
    Action::new(rng.random(), rng.random(), rng.random())
}

/// 1. Population conservation over random substeps.
fn conservation() -> Check {
    let env = env(Mode::Deterministic);
    let model = env.model();
    let mut rng = ChaRng::seed_from_u64(1);
    let mut worst_rel: f64 = 0.0;
    for _ in 0..10_000 {
        let st = random_state(&mut rng, model.groups());
        let c_hat = effective_contact_matrix(model.contacts(), &random_action(&mut rng)).unwrap();
        let before = st.total();
        let det = model.deterministic_substep(&st, &c_hat);
        worst_rel = worst_rel.max((det.state.total() - before).abs() / before);
        let sto = model.stochastic_substep(&st, &c_hat, &mut rng);
        ensure(sto.state.total() == before, || format!("binomial substep changed total {before} -> {}", sto.state.total()))?;
        ensure(sto.state.is_integral() && sto.state.is_nonnegative(), || "binomial substep left non-integer or negative counts".into())?;
    }
    ensure(worst_rel <= 1e-9, || format!("deterministic relative drift {worst_rel:e} > 1e-9"))?;
    Ok(format!("10000 substeps per mode; binomial exact, ODE max relative drift {worst_rel:.1e}"))
}

fn rounded(state: &EnvState) -> EnvState {
    let mut s = state.clone();
    for c in Compartment::ALL {
        s.compartments.get_mut(c).mapv_inplace(f64::round);
    }
    s
}

/// 2. Mean of 500 binomial runs tracks the ODE over four weeks.
fn mean_field() -> Check {
    let mut params = ParamFile::shipped_default();
    let pop = &mut params.age_structure.population;
    let total: f64 = pop.iter().sum();
    for p in pop.iter_mut() {
        *p = (*p * 11e6 / total).round();
    }
    let drift: f64 = 11e6 - pop.iter().sum::<f64>();
    pop[5] += drift;
    let model = params.build().unwrap();
    let det_env = Env::new(model.clone(), EnvConfig::shipped_default()).unwrap();
    let sto_env = Env::new(model, EnvConfig { mode: Mode::Stochastic, ..EnvConfig::shipped_default() }).unwrap();
    let start = rounded(&det_env.reset(&mut ChaRng::seed_from_u64(0)).unwrap());
    let action = Action::uniform(0.5);
    let weeks = 4;

    let mut det = Vec::new();
    let mut s = start.clone();
    for _ in 0..weeks {
        s = det_env.step(&s, action, &mut ChaRng::seed_from_u64(0)).unwrap().state;
        det.push(s.compartments.s.sum());
    }
    let seeds = SeedStream::new(2);
    let runs: Vec<Vec<f64>> = map_indexed(Execution::default(), 500, |i| {
        let mut rng = seeds.rng("mean-field", i as u64);
        let mut s = start.clone();
        (0..weeks)
            .map(|_| {
                s = sto_env.step(&s, action, &mut rng).unwrap().state;
                s.compartments.s.sum()
            })
            .collect()
    });
    let s0 = start.compartments.s.sum();
    let mut worst: f64 = 0.0;
    let mut worst_inf: f64 = 0.0;
    for w in 0..weeks {
        let mean = runs.iter().map(|r| r[w]).sum::<f64>() / runs.len() as f64;
        worst = worst.max((mean - det[w]).abs() / det[w]);
        worst_inf = worst_inf.max(((s0 - mean) - (s0 - det[w])).abs() / (s0 - det[w]));
    }
    ensure(worst <= 0.05, || format!("susceptible mean off by {:.3}%", worst * 100.0))?;
    Ok(format!(
        "N = 11e6, 500 runs, 4 weeks: S within {:.4}% (new infections within {:.2}%)",
        worst * 100.0,
        worst_inf * 100.0
    ))
}

fn mc_hypervolume(points: &[Point], rng: &mut ChaRng, samples: usize) -> f64 {
    let hi = points.iter().fold([0.0f64; 2], |a, p| [a[0].max(p[0]), a[1].max(p[1])]);
    let mut hits = 0usize;
    for _ in 0..samples {
        let x = [rng.random::<f64>() * hi[0], rng.random::<f64>() * hi[1]];
        if points.iter().any(|p| p[0] >= x[0] && p[1] >= x[1]) {
            hits += 1;
        }
    }
    hits as f64 / samples as f64 * hi[0] * hi[1]
}

fn brute_epsilon(front: &[Point], cs: &[Point]) -> (f64, f64) {
    let mut eps = Vec::new();
    for f in front {
        let mut best = f64::INFINITY;
        for c in cs {
            let worst = if f[0] - c[0] > f[1] - c[1] { f[0] - c[0] } else { f[1] - c[1] };
            if worst < best {
                best = worst;
            }
        }
        eps.push(if best < 0.0 { 0.0 } else { best });
    }
    let max = eps.iter().copied().fold(0.0, f64::max);
    (max, eps.iter().sum::<f64>() / eps.len() as f64)
}

/// 3. Metric oracles.
fn metric_oracles() -> Check {
    let mut rng = ChaRng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=20);
        let pts: Vec<Point> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let sweep = hypervolume_2d(&pts, [0.0, 0.0]);
        let mc = mc_hypervolume(&pts, &mut rng, 1_000_000);
        worst = worst.max((sweep - mc).abs() / sweep);

        let cs: Vec<Point> = (0..rng.random_range(1..=20)).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let got = epsilon_indicators(&pts, &cs).unwrap();
        let want = brute_epsilon(&pts, &cs);
        ensure(got == want, || format!("epsilon {got:?} != brute force {want:?}"))?;
        let front = nondominated_filter(&pts);
        ensure(front.iter().all(|p| !pts.iter().any(|q| dominates(q, p))), || "filter kept a dominated point".into())?;
    }
    ensure(worst <= 0.01, || format!("hypervolume vs Monte Carlo off by {:.3}%", worst * 100.0))?;
    let front = [[1.0, 4.0], [2.0, 2.0], [4.0, 1.0]];
    let cs = [[0.5, 3.0], [0.75, 2.3], [2.3, 1.0], [3.3, 0.7]];
    let hv = hypervolume_2d(&front, [-0.5, 0.0]);
    let (e, m) = epsilon_indicators(&front, &cs).unwrap();
    ensure((hv - 10.0).abs() < 1e-12, || format!("fixture hypervolume {hv}"))?;
    ensure((e - 1.0).abs() < 1e-12 && (m - 0.9).abs() < 1e-12, || format!("fixture epsilon ({e}, {m})"))?;
    Ok(format!("100 random sets, worst MC gap {:.3}%; epsilon exact; fixture HV 10, I_eps 1, I_eps_mean 0.9", worst * 100.0))
}

/// 4. Backpropagation against finite differences.
fn gradient_fidelity() -> Check {
    let mut rng = ChaRng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for arch in [Arch::DenseBig, Arch::Conv1dBig] {
        for b in 0..10 {
            let net = init_network(arch, 100 + b);
            let rows = 16;
            let obs = Array2::from_shape_fn((rows, 134), |(_, j)| if j == 133 { (rng.random::<bool>() as u8) as f64 } else { rng.random() });
            let ret = Array2::from_shape_fn((rows, 2), |_| rng.random_range(-20.0..0.0));
            let hor = ndarray::Array1::from_shape_fn(rows, |_| rng.random_range(1..=17) as f64);
            let tgt = Array2::from_shape_fn((rows, 3), |_| rng.random());
            let batch = TrainingBatch::new(obs, ret, hor, tgt).unwrap();
            let report = gradient_check(&net, &batch, 1e-5, &mut rng).unwrap();
            ensure(report.checked >= 200, || format!("{arch}: only {} parameters compared", report.checked))?;
            worst = worst.max(report.max_relative_error);
            checked += report.checked;
        }
    }
    ensure(worst < 1e-4, || format!("max relative error {worst:e}"))?;
    Ok(format!("2 architectures x 10 batches, {checked} parameters, max relative error {worst:.1e}"))
}

struct DeskScale {
    baseline_front: Vec<Point>,
    runs: Vec<(u64, TrainOutcome)>,
    env: Env,
}

fn desk_scale() -> DeskScale {
    let env = env(Mode::Deterministic);
    let sweep = fixed_policy_sweep(&env, DEFAULT_LEVELS, 1, Execution::default(), 0).unwrap();
    let cfg = PcnConfig { total_steps: 50_000, ..PcnConfig::default() };
    let runs = (0..3).map(|seed| (seed, train(&env, &cfg, seed).unwrap())).collect();
    DeskScale { baseline_front: sweep.scaled_front(), runs, env }
}

/// 5. Trained fronts against the fixed-policy baseline.
fn pcn_vs_baseline(desk: &DeskScale) -> Check {
    let fronts: Vec<Vec<Point>> = desk.runs.iter().map(|(_, o)| nondominated_filter(&o.coverage.achieved())).collect();
    let bounds = NormalizationBounds::from_sets(
        std::iter::once(desk.baseline_front.as_slice()).chain(fronts.iter().map(Vec::as_slice)),
    )
    .unwrap();
    let base = hypervolume_2d(&normalize_points(&desk.baseline_front, &bounds), [0.0, 0.0]);
    let mut clear_wins = 0;
    let mut parts = Vec::new();
    for ((seed, _), front) in desk.runs.iter().zip(&fronts) {
        let hv = hypervolume_2d(&normalize_points(front, &bounds), [0.0, 0.0]);
        ensure(hv >= base - 0.01, || format!("seed {seed}: PCN {hv:.4} < baseline {base:.4} - 0.01"))?;
        if hv >= base + 0.02 {
            clear_wins += 1;
        }
        parts.push(format!("seed {seed} {hv:.4}"));
    }
    ensure(clear_wins >= 2, || format!("only {clear_wins} of 3 seeds beat the baseline by 0.02 ({})", parts.join(", ")))?;
    Ok(format!("baseline {base:.4}; PCN {}; {clear_wins}/3 seeds >= baseline + 0.02", parts.join(", ")))
}

/// 6. Desired versus achieved returns of the trained policies.
fn robustness(desk: &DeskScale) -> Check {
    let mut parts = Vec::new();
    for (seed, out) in &desk.runs {
        let report = evaluate_policies(&desk.env, &out.network, &out.coverage, 1, Execution::default(), *seed).unwrap();
        ensure(report.epsilon_mean <= 0.05, || format!("seed {seed}: I_eps_mean {:.4} > 0.05", report.epsilon_mean))?;
        parts.push(format!("seed {seed} {:.4}", report.epsilon_mean));
    }
    Ok(format!("I_eps_mean {}", parts.join(", ")))
}

/// 7. Protocol constants and the holiday school rule.
fn protocol_fixtures() -> Check {
    let env = env(Mode::Deterministic);
    let mut rng = ChaRng::seed_from_u64(7);
    ensure(LOCKDOWN_ACTION == Action::new(0.2, 0.0, 0.1), || format!("lockdown action {LOCKDOWN_ACTION:?}"))?;
    let start = env.reset(&mut rng).unwrap();
    ensure(start.prev_action == LOCKDOWN_ACTION, || "burn-in does not end under the lockdown action".into())?;
    ensure(env.horizon() == 17, || format!("horizon {}", env.horizon()))?;
    let ep = rollout(&env, |_, _| Ok(Action::OPEN), false, &mut rng).unwrap();
    ensure(ep.rewards.len() == 17, || format!("{} steps", ep.rewards.len()))?;
    let mut s = start;
    while s.day < env.config().calendar.day_of(env.config().calendar.holiday_start) {
        s = env.step(&s, Action::OPEN, &mut rng).unwrap().state;
    }
    let with_school = env.step(&s, Action::new(0.6, 1.0, 0.4), &mut rng).unwrap();
    let without = env.step(&s, Action::new(0.6, 0.0, 0.4), &mut rng).unwrap();
    ensure(with_school.state.compartments == without.state.compartments, || "school action changed a holiday week".into())?;
    ensure(with_school.raw_reward == without.raw_reward, || "school action changed holiday rewards".into())?;
    let grid = level_grid(DEFAULT_LEVELS).unwrap();
    ensure(grid.len() == 100 && grid[0].level() == 0.0 && grid[99].level() == 1.0, || "baseline grid is not 100 levels over [0, 1]".into())?;
    Ok("lockdown (0.2, 0, 0.1), 17 steps, holiday school equivalence, 100-level grid".into())
}

/// 8. Same seed, same bytes.
fn reproducibility() -> Check {
    let cfg = PcnConfig {
        total_steps: 17 * 30,
        batch_size: 32,
        updates_per_iteration: 5,
        episodes_per_iteration: 4,
        buffer_episodes: 20,
        warmup_episodes: 10,
        ..PcnConfig::default()
    };
    let det = env(Mode::Deterministic);
    let a = train(&det, &cfg, 11).unwrap();
    let b = train(&det, &PcnConfig { execution: Execution::Sequential, ..cfg.clone() }, 11).unwrap();
    let scaling = det.config().rewards;
    let (ca, cb) = (coverage_csv(&a.coverage, &scaling).unwrap(), coverage_csv(&b.coverage, &scaling).unwrap());
    ensure(ca == cb, || "coverage CSVs differ between identical runs".into())?;
    let sto = env(Mode::Stochastic);
    let run = |seed: u64| {
        let mut rng = SeedStream::new(seed).rng("episode", 0);
        rollout(&sto, |_, _| Ok(Action::uniform(0.4)), true, &mut rng).unwrap()
    };
    let (x, y) = (run(5), run(5));
    ensure(x.raw_rewards == y.raw_rewards && x.daily == y.daily, || "stochastic trajectories differ".into())?;
    ensure(run(6).raw_rewards != x.raw_rewards, || "different seeds gave the same stochastic trajectory".into())?;
    Ok(format!("coverage CSV identical ({} bytes); stochastic trajectories identical", ca.len()))
}

fn run(id: u32, name: &str, f: impl FnOnce() -> Check) -> bool {
    let t = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    let secs = Duration::as_secs_f64(&t.elapsed());
    match outcome {
        Ok(detail) => {
            println!("PASS [{id}] {name}: {detail} ({secs:.1} s)");
            true
        }
        Err(why) => {
            println!("FAIL [{id}] {name}: {why} ({secs:.1} s)");
            false
        }
    }
}

fn main() {
    let mut ok = true;
    ok &= run(1, "conservation", conservation);
    ok &= run(2, "mean-field agreement", mean_field);
    ok &= run(3, "metric oracles", metric_oracles);
    ok &= run(4, "gradient fidelity", gradient_fidelity);
    let t = Instant::now();
    let desk = catch_unwind(desk_scale);
    println!("desk-scale training, 3 seeds x 50000 steps: {:.1} s", t.elapsed().as_secs_f64());
    match &desk {
        Ok(d) => {
            ok &= run(5, "PCN versus fixed baseline", || pcn_vs_baseline(d));
            ok &= run(6, "robustness", || robustness(d));
        }
        Err(_) => {
            println!("FAIL [5] PCN versus fixed baseline: desk-scale training panicked");
            println!("FAIL [6] robustness: desk-scale training panicked");
            ok = false;
        }
    }
    ok &= run(7, "protocol fixtures", protocol_fixtures);
    ok &= run(8, "reproducibility", reproducibility);
    if !ok {
        std::process::exit(1);
    }
}
