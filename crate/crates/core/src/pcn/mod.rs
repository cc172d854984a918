//! Pareto Conditioned Networks with a continuous action head: the policy is
//! conditioned on a desired return and horizon and trained by supervised
//! regression on actions from its own buffered episodes.

mod buffer;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::env::{Env, EnvState, Episode};
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::nn::{Adam, Arch, Network, TrainingBatch};
use crate::pareto::{epsilon_indicators, hypervolume_2d, nondominated_indices, normalize_points, NormalizationBounds, Point};
use crate::rng::SeedStream;

pub use buffer::{choose_desired, DesiredTarget, ExperienceBuffer, Trajectory, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcnConfig {
    pub arch: Arch,
    /// Environment steps, warm-up included.
    pub total_steps: usize,
    pub batch_size: usize,
    pub updates_per_iteration: usize,
    pub episodes_per_iteration: usize,
    pub buffer_episodes: usize,
    pub warmup_episodes: usize,
    pub exploration_noise: f64,
    pub desired_return_noise: f64,
    /// Gaussian noise on the return inputs during regression, as a fraction
    /// of the per-objective return spread.
    pub input_noise: f64,
    pub learning_rate: f64,
    /// Repeats per coverage point when the final policies are executed.
    pub eval_episodes: usize,
    pub execution: Execution,
}

impl Default for PcnConfig {
    fn default() -> Self {
        Self {
            arch: Arch::DenseBig,
            total_steps: 300_000,
            batch_size: 256,
            updates_per_iteration: 50,
            episodes_per_iteration: 10,
            buffer_episodes: 1000,
            warmup_episodes: 200,
            exploration_noise: 0.1,
            desired_return_noise: 0.2,
            input_noise: 0.05,
            learning_rate: 1e-3,
            eval_episodes: 10,
            execution: Execution::default(),
        }
    }
}

impl PcnConfig {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("updates_per_iteration", self.updates_per_iteration),
            ("episodes_per_iteration", self.episodes_per_iteration),
            ("buffer_episodes", self.buffer_episodes),
            ("warmup_episodes", self.warmup_episodes),
            ("eval_episodes", self.eval_episodes),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let warmup_steps = self.warmup_episodes * horizon;
        if self.total_steps < warmup_steps {
            return Err(Error::Config(format!(
                "step budget {} is smaller than the warm-up ({} episodes = {warmup_steps} steps)",
                self.total_steps, self.warmup_episodes
            )));
        }
        for (name, v) in [
            ("exploration_noise", self.exploration_noise),
            ("desired_return_noise", self.desired_return_noise),
            ("input_noise", self.input_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite non-negative number")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// How actions are produced inside [`run_episode`].
enum Driver<'a> {
    Policy { net: &'a Network, target: DesiredTarget, noise: f64 },
    Random,
}

/// One episode from `start` under the conditioned policy plus clamped
/// Gaussian action noise. After every step the desired return drops by the
/// reward received and the horizon by one (never below one).
pub fn run_episode<R: Rng + ?Sized>(
    env: &Env,
    net: &Network,
    start: &EnvState,
    target: DesiredTarget,
    noise_scale: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if noise_scale.is_nan() || noise_scale < 0.0 {
        return Err(Error::InvalidInput("noise scale must be non-negative".into()));
    }
    drive(env, start, Driver::Policy { net, target, noise: noise_scale }, rng)
}

/// Reset plus one noise-free conditioned episode, keeping the daily
/// records (burn-in included).
pub fn rollout_policy<R: Rng + ?Sized>(env: &Env, net: &Network, target: DesiredTarget, rng: &mut R) -> Result<Episode> {
    let (mut state, daily) = env.reset_with_daily(rng)?;
    let mut episode = Episode { actions: Vec::new(), rewards: Vec::new(), raw_rewards: Vec::new(), daily };
    let (mut desired, mut horizon) = (target.desired_return, target.desired_horizon);
    while !state.done {
        let a = net.policy_forward(&env.observe(&state), desired, horizon)?;
        let action = Action::new(a[0], a[1], a[2]).clamped();
        let out = env.step(&state, action, rng)?;
        desired = [desired[0] - out.reward[0], desired[1] - out.reward[1]];
        horizon = (horizon - 1.0).max(1.0);
        episode.actions.push(action);
        episode.rewards.push(out.reward);
        episode.raw_rewards.push(out.raw_reward);
        episode.daily.extend(out.daily);
        state = out.state;
    }
    Ok(episode)
}

/// One episode with uniform random actions.
pub fn random_episode<R: Rng + ?Sized>(env: &Env, start: &EnvState, rng: &mut R) -> Result<Trajectory> {
    drive(env, start, Driver::Random, rng)
}

fn drive<R: Rng + ?Sized>(env: &Env, start: &EnvState, driver: Driver<'_>, rng: &mut R) -> Result<Trajectory> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let (mut desired, mut horizon) = match &driver {
        Driver::Policy { target, .. } => (target.desired_return, target.desired_horizon),
        Driver::Random => ([0.0, 0.0], env.horizon() as f64),
    };
    let mut state = start.clone();
    let mut transitions = Vec::with_capacity(env.horizon());
    while !state.done {
        let obs = env.observe(&state);
        let action = match &driver {
            Driver::Policy { net, noise, .. } => {
                let mut a = net.policy_forward(&obs, desired, horizon)?;
                if *noise > 0.0 {
                    for v in &mut a {
                        *v += noise * normal.sample(rng);
                    }
                }
                Action::new(a[0], a[1], a[2]).clamped()
            }
            Driver::Random => Action::new(rng.random(), rng.random(), rng.random()),
        };
        let out = env.step(&state, action, rng)?;
        transitions.push(Transition { obs, action, reward: out.reward, desired_return: desired, desired_horizon: horizon });
        desired = [desired[0] - out.reward[0], desired[1] - out.reward[1]];
        horizon = (horizon - 1.0).max(1.0);
        state = out.state;
    }
    Ok(Trajectory::new(transitions))
}

/// Episode starts: deterministic environments share one burn-in.
struct Starts {
    cached: Option<EnvState>,
}

impl Starts {
    fn new(env: &Env, seeds: &SeedStream) -> Result<Self> {
        let cached = match env.mode() {
            crate::epi::Mode::Deterministic => Some(env.reset(&mut seeds.rng("reset", 0))?),
            crate::epi::Mode::Stochastic => None,
        };
        Ok(Self { cached })
    }

    fn start<R: Rng + ?Sized>(&self, env: &Env, rng: &mut R) -> Result<EnvState> {
        match &self.cached {
            Some(s) => Ok(s.clone()),
            None => env.reset(rng),
        }
    }
}

/// A learned policy target and what executing it achieved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub policy_id: usize,
    /// Scaled units.
    pub desired_return: [f64; 2],
    pub desired_horizon: f64,
    /// Mean scaled return of the noise-free policy.
    pub achieved_return: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSet {
    pub arch: Arch,
    pub n_params: usize,
    pub points: Vec<CoveragePoint>,
}

impl CoverageSet {
    pub fn desired(&self) -> Vec<Point> {
        self.points.iter().map(|p| p.desired_return).collect()
    }

    pub fn achieved(&self) -> Vec<Point> {
        self.points.iter().map(|p| p.achieved_return).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: usize,
    pub steps: usize,
    pub episodes: usize,
    pub buffer_size: usize,
    /// Area of the buffer front above the worst warm-up return, scaled units.
    pub hypervolume: f64,
    /// Mean regression loss of the iteration's updates.
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    pub coverage: CoverageSet,
    pub log: Vec<LogRow>,
    pub buffer: ExperienceBuffer,
}

/// Full training run; a pure function of `(env, cfg, seed)` when the
/// environment is deterministic.
pub fn train(env: &Env, cfg: &PcnConfig, seed: u64) -> Result<TrainOutcome> {
    let horizon = env.horizon();
    cfg.validate(horizon)?;
    let seeds = SeedStream::new(seed);
    let starts = Starts::new(env, &seeds)?;
    let mut net = Network::new(cfg.arch, env.model().groups(), seeds.seed("network", 0));
    let mut opt = Adam::new(cfg.learning_rate, net.n_params());
    let mut buffer = ExperienceBuffer::new(cfg.buffer_episodes)?;

    let warm = try_map_indexed(cfg.execution, cfg.warmup_episodes, |i| {
        let mut rng = seeds.rng("warmup", i as u64);
        let start = starts.start(env, &mut rng)?;
        random_episode(env, &start, &mut rng)
    })?;
    let mut steps: usize = warm.iter().map(Trajectory::len).sum();
    let mut episodes = warm.len();
    let reference = warm
        .iter()
        .map(Trajectory::ret)
        .fold([f64::INFINITY; 2], |a, r| [a[0].min(r[0]), a[1].min(r[1])]);
    buffer.insert(warm);

    let mut log = Vec::new();
    let mut iteration = 0;
    let mut update_rng = seeds.rng("updates", 0);
    while steps < cfg.total_steps {
        let mut loss_sum = 0.0;
        for _ in 0..cfg.updates_per_iteration {
            let batch = sample_batch(&buffer, cfg.batch_size, cfg.input_noise, net.observation_len(), &mut update_rng)?;
            loss_sum += net.train_batch(&mut opt, &batch)?;
        }

        let mut target_rng = seeds.rng("targets", iteration as u64);
        let targets: Vec<DesiredTarget> = (0..cfg.episodes_per_iteration)
            .map(|_| choose_desired(&buffer, cfg.desired_return_noise, &mut target_rng))
            .collect::<Result<_>>()?;
        let fresh = try_map_indexed(cfg.execution, targets.len(), |i| {
            let mut rng = seeds.rng("collect", (episodes + i) as u64);
            let start = starts.start(env, &mut rng)?;
            run_episode(env, &net, &start, targets[i], cfg.exploration_noise, &mut rng)
        })?;
        steps += fresh.iter().map(Trajectory::len).sum::<usize>();
        episodes += fresh.len();
        buffer.insert(fresh);

        let front: Vec<Point> = buffer.front().iter().map(|t| t.ret()).collect();
        let row = LogRow {
            iteration,
            steps,
            episodes,
            buffer_size: buffer.len(),
            hypervolume: hypervolume_2d(&front, reference),
            loss: loss_sum / cfg.updates_per_iteration as f64,
        };
        log::debug!("pcn iteration {} steps {} hv {:.4} loss {:.5}", row.iteration, row.steps, row.hypervolume, row.loss);
        log.push(row);
        iteration += 1;
    }

    let coverage = coverage_from_buffer(env, &net, &buffer, &starts, cfg, &seeds)?;
    Ok(TrainOutcome { network: net, coverage, log, buffer })
}

/// Regression batch over uniformly drawn buffered transitions. Inputs are
/// the hindsight return-to-go (plus noise) and remaining horizon; the label
/// is the action that was taken.
fn sample_batch<R: Rng + ?Sized>(
    buffer: &ExperienceBuffer,
    size: usize,
    input_noise: f64,
    obs_len: usize,
    rng: &mut R,
) -> Result<TrainingBatch> {
    let total = buffer.transition_count();
    if total == 0 {
        return Err(Error::Empty("experience buffer"));
    }
    let std = buffer.return_std();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut obs = Array2::zeros((size, obs_len));
    let mut ret = Array2::zeros((size, 2));
    let mut hor = Array1::zeros(size);
    let mut tgt = Array2::zeros((size, 3));
    for r in 0..size {
        let (traj, t) = buffer.locate(rng.random_range(0..total)).expect("index below total");
        let tr = &traj.transitions()[t];
        obs.row_mut(r).assign(&ndarray::ArrayView1::from(&tr.obs[..]));
        let rtg = traj.return_to_go(t);
        for o in 0..2 {
            let noise = if input_noise > 0.0 { input_noise * std[o] * normal.sample(rng) } else { 0.0 };
            ret[[r, o]] = rtg[o] + noise;
        }
        hor[r] = (traj.len() - t) as f64;
        let a = tr.action.to_array();
        for c in 0..3 {
            tgt[[r, c]] = a[c];
        }
    }
    TrainingBatch::new(obs, ret, hor, tgt)
}

fn coverage_from_buffer(
    env: &Env,
    net: &Network,
    buffer: &ExperienceBuffer,
    starts: &Starts,
    cfg: &PcnConfig,
    seeds: &SeedStream,
) -> Result<CoverageSet> {
    let front = buffer.front();
    let returns: Vec<Point> = front.iter().map(|t| t.ret()).collect();
    let keep = nondominated_indices(&returns);
    let targets: Vec<DesiredTarget> = keep
        .iter()
        .map(|&i| DesiredTarget::new(front[i].ret(), front[i].len() as f64))
        .collect::<Result<_>>()?;
    let repeats = match starts.cached {
        Some(_) => 1,
        None => cfg.eval_episodes,
    };
    let achieved = execute_targets(env, net, &targets, repeats, starts, cfg.execution, &seeds.child("coverage", 0))?;
    let points = targets
        .iter()
        .zip(achieved)
        .enumerate()
        .map(|(policy_id, (t, (mean, _)))| CoveragePoint {
            policy_id,
            desired_return: t.desired_return,
            desired_horizon: t.desired_horizon,
            achieved_return: mean,
        })
        .collect();
    Ok(CoverageSet { arch: net.arch(), n_params: net.n_params(), points })
}

/// Mean and standard deviation of the scaled return of each target's
/// noise-free policy over `repeats` episodes.
fn execute_targets(
    env: &Env,
    net: &Network,
    targets: &[DesiredTarget],
    repeats: usize,
    starts: &Starts,
    exec: Execution,
    seeds: &SeedStream,
) -> Result<Vec<([f64; 2], [f64; 2])>> {
    let runs = try_map_indexed(exec, targets.len() * repeats, |k| {
        let mut rng = seeds.rng("eval", k as u64);
        let start = starts.start(env, &mut rng)?;
        run_episode(env, net, &start, targets[k / repeats], 0.0, &mut rng).map(|t| t.ret())
    })?;
    Ok(runs
        .chunks(repeats)
        .map(|chunk| {
            let n = chunk.len() as f64;
            let mean = [chunk.iter().map(|r| r[0]).sum::<f64>() / n, chunk.iter().map(|r| r[1]).sum::<f64>() / n];
            let var = |o: usize| chunk.iter().map(|r| (r[o] - mean[o]).powi(2)).sum::<f64>() / n;
            (mean, [var(0).sqrt(), var(1).sqrt()])
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub policy_id: usize,
    pub desired_return: [f64; 2],
    pub achieved_mean: [f64; 2],
    pub achieved_std: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    pub rows: Vec<RobustnessRow>,
    /// Indicators of the achieved set against the desired set, both
    /// normalized with the bounds of their union.
    pub epsilon: f64,
    pub epsilon_mean: f64,
}

/// Executes every coverage point's policy `n_eval` times without action
/// noise and compares achieved with desired returns.
pub fn evaluate_policies(
    env: &Env,
    net: &Network,
    coverage: &CoverageSet,
    n_eval: usize,
    exec: Execution,
    seed: u64,
) -> Result<RobustnessReport> {
    if n_eval == 0 {
        return Err(Error::InvalidInput("n_eval must be at least 1".into()));
    }
    if coverage.arch != net.arch() || coverage.n_params != net.n_params() {
        return Err(Error::Checkpoint(format!(
            "coverage set was produced by {} ({} parameters), checkpoint is {} ({} parameters)",
            coverage.arch,
            coverage.n_params,
            net.arch(),
            net.n_params()
        )));
    }
    if coverage.points.is_empty() {
        return Err(Error::Empty("coverage set"));
    }
    let seeds = SeedStream::new(seed);
    let starts = Starts::new(env, &seeds)?;
    let targets: Vec<DesiredTarget> = coverage
        .points
        .iter()
        .map(|p| DesiredTarget::new(p.desired_return, p.desired_horizon))
        .collect::<Result<_>>()?;
    let stats = execute_targets(env, net, &targets, n_eval, &starts, exec, &seeds.child("robustness", 0))?;
    let rows: Vec<RobustnessRow> = coverage
        .points
        .iter()
        .zip(stats)
        .map(|(p, (mean, std))| RobustnessRow {
            policy_id: p.policy_id,
            desired_return: p.desired_return,
            achieved_mean: mean,
            achieved_std: std,
        })
        .collect();
    let desired: Vec<Point> = rows.iter().map(|r| r.desired_return).collect();
    let achieved: Vec<Point> = rows.iter().map(|r| r.achieved_mean).collect();
    let bounds = NormalizationBounds::from_sets([desired.as_slice(), achieved.as_slice()]).expect("non-empty");
    let (epsilon, epsilon_mean) = epsilon_indicators(&normalize_points(&desired, &bounds), &normalize_points(&achieved, &bounds))?;
    Ok(RobustnessReport { rows, epsilon, epsilon_mean })
}
