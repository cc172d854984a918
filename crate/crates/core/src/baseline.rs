//! Constant policies that scale every non-household contact by one level.

use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::env::{Env, Episode, rollout};
use crate::epi::Mode;
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::pareto::{nondominated_indices, Point};
use crate::rng::SeedStream;

pub const DEFAULT_LEVELS: usize = 100;

/// Contact matrix `C_home + level * (C - C_home)` every week.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPolicy {
    level: f64,
}

impl FixedPolicy {
    pub fn new(level: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&level) {
            return Err(Error::InvalidInput(format!("fixed-policy level {level} outside [0, 1]")));
        }
        Ok(Self { level })
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn action(&self) -> Action {
        Action::uniform(self.level)
    }
}

/// Evenly spaced levels from 0 to 1 inclusive.
pub fn level_grid(n_levels: usize) -> Result<Vec<FixedPolicy>> {
    if n_levels < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 levels, got {n_levels}")));
    }
    (0..n_levels)
        .map(|i| FixedPolicy::new(i as f64 / (n_levels - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub level: f64,
    /// Mean over repeats, raw units.
    pub raw_return: [f64; 2],
    /// Mean over repeats, scaled units.
    pub scaled_return: [f64; 2],
    pub nondominated: bool,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
    /// One episode per level (the first repeat).
    pub episodes: Vec<Episode>,
}

impl Sweep {
    pub fn raw_front(&self) -> Vec<Point> {
        self.points.iter().filter(|p| p.nondominated).map(|p| p.raw_return).collect()
    }

    pub fn scaled_front(&self) -> Vec<Point> {
        self.points.iter().filter(|p| p.nondominated).map(|p| p.scaled_return).collect()
    }
}

/// Runs every level of the grid. Deterministic environments use a single
/// episode per level whatever `repeats` says; stochastic ones average
/// `repeats` episodes, each on its own derived stream.
pub fn fixed_policy_sweep(env: &Env, n_levels: usize, repeats: usize, exec: Execution, seed: u64) -> Result<Sweep> {
    let policies = level_grid(n_levels)?;
    if repeats == 0 {
        return Err(Error::InvalidInput("repeats must be at least 1".into()));
    }
    let repeats = match env.mode() {
        Mode::Deterministic => 1,
        Mode::Stochastic => repeats,
    };
    let seeds = SeedStream::new(seed);
    let runs = try_map_indexed(exec, policies.len() * repeats, |k| {
        let policy = policies[k / repeats];
        let mut rng = seeds.rng("baseline", k as u64);
        rollout(env, |_, _| Ok(policy.action()), false, &mut rng)
    })?;
    let mut points = Vec::with_capacity(policies.len());
    let mut episodes = Vec::with_capacity(policies.len());
    for (policy, chunk) in policies.iter().zip(runs.chunks(repeats)) {
        let n = chunk.len() as f64;
        let mean = |f: fn(&Episode) -> [f64; 2]| {
            let s = chunk.iter().map(f).fold([0.0, 0.0], |a, r| [a[0] + r[0], a[1] + r[1]]);
            [s[0] / n, s[1] / n]
        };
        points.push(SweepPoint {
            level: policy.level(),
            raw_return: mean(Episode::raw_return),
            scaled_return: mean(Episode::scaled_return),
            nondominated: false,
        });
        episodes.push(chunk[0].clone());
    }
    let scaled: Vec<Point> = points.iter().map(|p| p.scaled_return).collect();
    for i in nondominated_indices(&scaled) {
        points[i].nondominated = true;
    }
    Ok(Sweep { points, episodes })
}
