//! The MOBelCov environment: a scripted burn-in (seeding, then lockdown)
//! followed by weekly control steps until the end of the summer holidays.

mod calendar;
mod rewards;

pub use calendar::{Calendar, DAYS_PER_STEP};
pub use rewards::{social_burden, ObjectivePair, RewardScaling, Rewards};

use chrono::NaiveDate;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::epi::{
    blended_matrix, compliance_weight, effective_contact_matrix, Compartment, CompartmentState, ContactSchedule,
    EpiModel, Flows, Matrix, Mode,
};
use crate::error::{Error, Result};

/// Contact reduction in force during the lockdown phase of the burn-in.
pub const LOCKDOWN_ACTION: Action = Action { p_w: 0.2, p_s: 0.0, p_l: 0.1 };

/// Observation channels per age group: the eleven compartments plus weekly
/// hospital admissions (ward and ICU) and weekly deaths.
pub const OBS_CHANNELS: usize = 13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub mode: Mode,
    pub objectives: ObjectivePair,
    /// Exposed individuals per age group at the start date.
    pub seed_infections: Vec<f64>,
    pub calendar: Calendar,
    pub rewards: RewardScaling,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self::shipped_default()
    }
}

impl EnvConfig {
    /// Defaults matching the shipped parameter file.
    pub fn shipped_default() -> Self {
        Self {
            mode: Mode::Deterministic,
            objectives: ObjectivePair::HospitalizationsBurden,
            seed_infections: vec![0.0, 1200.0, 4800.0, 4800.0, 4800.0, 3600.0, 2400.0, 1200.0, 600.0, 0.0],
            calendar: Calendar::default(),
            rewards: RewardScaling::default(),
        }
    }

    pub fn validate(&self, groups: usize) -> Result<()> {
        self.calendar.validate()?;
        self.rewards.validate()?;
        if self.seed_infections.len() != groups {
            return Err(Error::Config(format!(
                "{} seed values for {groups} age groups",
                self.seed_infections.len()
            )));
        }
        for &x in &self.seed_infections {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::Config(format!("seed infections must be non-negative, got {x}")));
            }
            if self.mode == Mode::Stochastic && x.fract() != 0.0 {
                return Err(Error::Config(format!("binomial model needs whole-number seeds, got {x}")));
            }
        }
        Ok(())
    }
}

/// Environment state between weekly steps.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    /// Compartments; `h_new` holds the admissions of the last week only.
    pub compartments: CompartmentState,
    /// Target matrix installed by the last action (after holiday override).
    pub installed: Matrix,
    /// Compliance schedule in force; its anchor moves when the target changes.
    pub schedule: ContactSchedule,
    /// Last applied action (after holiday override).
    pub prev_action: Action,
    /// Number of controlled weeks already simulated.
    pub week: usize,
    /// Days since the start date.
    pub day: i64,
    pub holiday: bool,
    /// Admissions (ward + ICU) and deaths during the last simulated week.
    pub weekly: Flows,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub hosp_new: f64,
    pub icu_new: f64,
    pub deaths_new: f64,
    pub action: Action,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: EnvState,
    /// Selected objective pair divided by the reward-scaling divisors.
    pub reward: [f64; 2],
    /// Selected objective pair in raw units.
    pub raw_reward: [f64; 2],
    pub rewards: Rewards,
    pub done: bool,
    pub daily: Vec<DailyRecord>,
}

#[derive(Debug, Clone)]
pub struct Env {
    model: EpiModel,
    cfg: EnvConfig,
}

impl Env {
    pub fn new(model: EpiModel, cfg: EnvConfig) -> Result<Self> {
        cfg.validate(model.groups())?;
        Ok(Self { model, cfg })
    }

    pub fn model(&self) -> &EpiModel {
        &self.model
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn mode(&self) -> Mode {
        self.cfg.mode
    }

    pub fn horizon(&self) -> usize {
        self.cfg.calendar.steps()
    }

    pub fn observation_len(&self) -> usize {
        OBS_CHANNELS * self.model.groups() + 4
    }

    /// Seeds infections, runs the free phase and the lockdown, and returns
    /// the state at the exit date with admission counters zeroed.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<EnvState> {
        self.reset_with_daily(rng).map(|(s, _)| s)
    }

    /// [`Env::reset`] plus the daily records of the burn-in.
    pub fn reset_with_daily<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(EnvState, Vec<DailyRecord>)> {
        let cal = &self.cfg.calendar;
        let mut compartments = CompartmentState::susceptible(self.model.ages());
        compartments.seed_exposed(&self.cfg.seed_infections)?;

        let full = self.model.full_matrix().clone();
        let schedule = ContactSchedule::constant(full.clone());
        let mut daily = Vec::new();
        let free = self.run_days(&compartments, schedule, Action::OPEN, 0, cal.lockdown_day(), rng, &mut daily)?;
        let lockdown = self.run_days(
            &free.compartments,
            free.schedule,
            LOCKDOWN_ACTION,
            cal.lockdown_day(),
            cal.exit_day() - cal.lockdown_day(),
            rng,
            &mut daily,
        )?;

        let mut compartments = lockdown.compartments;
        compartments.h_new.fill(0.0);
        let state = EnvState {
            compartments,
            installed: lockdown.installed_last,
            schedule: lockdown.schedule,
            prev_action: lockdown.action_last,
            week: 0,
            day: cal.exit_day(),
            holiday: cal.is_holiday(cal.exit_day()),
            weekly: lockdown.last_week,
            done: false,
        };
        Ok((state, daily))
    }

    /// Simulates one week under `action`.
    pub fn step<R: Rng + ?Sized>(&self, state: &EnvState, action: Action, rng: &mut R) -> Result<StepOutcome> {
        if state.done {
            return Err(Error::EpisodeDone);
        }
        action.validate()?;
        let cal = &self.cfg.calendar;
        let mut start = state.compartments.clone();
        start.h_new.fill(0.0);

        let mut daily = Vec::with_capacity(DAYS_PER_STEP as usize);
        let run = self.run_days(&start, state.schedule.clone(), action, state.day, DAYS_PER_STEP, rng, &mut daily)?;

        let week = state.week + 1;
        let day = state.day + DAYS_PER_STEP;
        let done = week >= cal.steps();
        let next = EnvState {
            compartments: run.compartments,
            installed: run.installed_last,
            schedule: run.schedule,
            prev_action: run.action_last,
            week,
            day,
            holiday: cal.is_holiday(day),
            weekly: run.week_total,
            done,
        };
        let rewards = self.compute_rewards(state, &run.installed_mean, &next);
        let raw_reward = rewards.pair(self.cfg.objectives);
        Ok(StepOutcome {
            reward: self.cfg.rewards.scale(raw_reward),
            raw_reward,
            rewards,
            done,
            state: next,
            daily,
        })
    }

    /// Raw reward signals for a transition `s -> s_next` under the installed
    /// matrix `c_hat`.
    pub fn compute_rewards(&self, s: &EnvState, c_hat: &Matrix, s_next: &EnvState) -> Rewards {
        let ari = -(s.compartments.s.sum() - s_next.compartments.s.sum());
        let arh = -s_next.compartments.h_new.sum();
        let diff = c_hat - self.model.full_matrix();
        let sb = if self.cfg.rewards.per_capita {
            let n = self.model.ages().population();
            social_burden(&diff, &(&s.compartments.s / n), &(&s.compartments.r / n))
        } else {
            social_burden(&diff, &s.compartments.s, &s.compartments.r)
        };
        // -0.0 from an untouched susceptible pool reads badly in exports
        Rewards { ari: ari + 0.0, arh: arh + 0.0, sb: sb + 0.0 }
    }

    /// Feature vector: per age group (group-major) the 13 channels divided
    /// by the group size, then the previous action, then the holiday flag.
    pub fn observe(&self, state: &EnvState) -> Vec<f64> {
        let n = self.model.ages().population();
        let mut obs = Vec::with_capacity(self.observation_len());
        for k in 0..self.model.groups() {
            for c in Compartment::ALL {
                obs.push(state.compartments.get(c)[k] / n[k]);
            }
            obs.push((state.weekly.hosp_new[k] + state.weekly.icu_new[k]) / n[k]);
            obs.push(state.weekly.deaths_new[k] / n[k]);
        }
        obs.extend(state.prev_action.to_array());
        obs.push(if state.holiday { 1.0 } else { 0.0 });
        obs
    }

    /// Applies the holiday school closure for `day`.
    pub fn applied_action(&self, action: Action, day: i64) -> Action {
        if self.cfg.calendar.is_holiday(day) {
            action.with_school(0.0)
        } else {
            action
        }
    }

    /// Runs `n_days` from `day0` with `action` (holiday override applied per
    /// day). The compliance anchor moves whenever the target matrix changes.
    #[allow(clippy::too_many_arguments)]
    fn run_days<R: Rng + ?Sized>(
        &self,
        start: &CompartmentState,
        mut schedule: ContactSchedule,
        action: Action,
        day0: i64,
        n_days: i64,
        rng: &mut R,
        daily: &mut Vec<DailyRecord>,
    ) -> Result<RunResult> {
        let params = self.model.params();
        let groups = self.model.groups();
        let mut compartments = start.clone();
        let mut week_total = Flows::zeros(groups);
        let mut last_week = Flows::zeros(groups);
        // distinct installed targets with their day counts
        let mut installed: Vec<(Matrix, usize)> = Vec::new();
        let mut installed_last = schedule.target.clone();
        let mut action_last = action;

        for offset in 0..n_days {
            let day = day0 + offset;
            let applied = self.applied_action(action, day);
            let target = effective_contact_matrix(self.model.contacts(), &applied)?;
            if target != schedule.target {
                let c = compliance_weight(day as f64, schedule.t_intervention, params.compliance_beta0, params.compliance_beta1);
                let current = blended_matrix(&schedule.prev, &schedule.target, c)?;
                schedule = ContactSchedule { prev: current, target: target.clone(), t_intervention: day as f64 };
            }
            let out = self.model.simulate_days(&compartments, &schedule, day as f64, 1, self.cfg.mode, rng)?;
            compartments = out.state;
            let flows = &out.daily[0];
            week_total.add(flows);
            if offset >= n_days - DAYS_PER_STEP {
                last_week.add(flows);
            }
            match installed.last_mut() {
                Some((m, count)) if *m == target => *count += 1,
                _ => installed.push((target.clone(), 1)),
            }
            installed_last = target;
            action_last = applied;
            daily.push(DailyRecord {
                date: self.cfg.calendar.date_of(day),
                hosp_new: flows.hosp_new.sum(),
                icu_new: flows.icu_new.sum(),
                deaths_new: flows.deaths_new.sum(),
                action: applied,
            });
        }
        Ok(RunResult {
            compartments,
            schedule,
            installed_mean: weighted_mean(&installed, groups),
            installed_last,
            action_last,
            week_total,
            last_week,
        })
    }
}

fn weighted_mean(parts: &[(Matrix, usize)], groups: usize) -> Matrix {
    let total: usize = parts.iter().map(|(_, c)| c).sum();
    let mut mean = Matrix::zeros((groups, groups));
    for (m, count) in parts {
        mean.scaled_add(*count as f64 / total.max(1) as f64, m);
    }
    mean
}

struct RunResult {
    compartments: CompartmentState,
    schedule: ContactSchedule,
    installed_mean: Matrix,
    installed_last: Matrix,
    action_last: Action,
    week_total: Flows,
    last_week: Flows,
}

/// A full episode driven by a state-feedback policy.
#[derive(Debug, Clone)]
pub struct Episode {
    pub actions: Vec<Action>,
    pub rewards: Vec<[f64; 2]>,
    pub raw_rewards: Vec<[f64; 2]>,
    pub daily: Vec<DailyRecord>,
}

impl Episode {
    pub fn raw_return(&self) -> [f64; 2] {
        sum_pairs(&self.raw_rewards)
    }

    pub fn scaled_return(&self) -> [f64; 2] {
        sum_pairs(&self.rewards)
    }
}

pub fn sum_pairs(v: &[[f64; 2]]) -> [f64; 2] {
    v.iter().fold([0.0, 0.0], |acc, r| [acc[0] + r[0], acc[1] + r[1]])
}

/// Runs reset plus one episode with `policy(obs, state)`; `include_burn_in`
/// keeps the burn-in days in the daily records.
pub fn rollout<R, P>(env: &Env, mut policy: P, include_burn_in: bool, rng: &mut R) -> Result<Episode>
where
    R: Rng + ?Sized,
    P: FnMut(&[f64], &EnvState) -> Result<Action>,
{
    let (mut state, burn_in) = env.reset_with_daily(rng)?;
    let mut episode = Episode {
        actions: Vec::new(),
        rewards: Vec::new(),
        raw_rewards: Vec::new(),
        daily: if include_burn_in { burn_in } else { Vec::new() },
    };
    while !state.done {
        let obs = env.observe(&state);
        let action = policy(&obs, &state)?;
        let out = env.step(&state, action, rng)?;
        episode.actions.push(action);
        episode.rewards.push(out.reward);
        episode.raw_rewards.push(out.raw_reward);
        episode.daily.extend(out.daily);
        state = out.state;
    }
    Ok(episode)
}

#[cfg(test)]
mod tests;
