use super::*;
use crate::epi::ParamFile;
use crate::rng::SeedStream;

pub(crate) fn default_env(mode: Mode) -> Env {
    let model = ParamFile::shipped_default().build().unwrap();
    let cfg = EnvConfig { mode, ..EnvConfig::shipped_default() };
    Env::new(model, cfg).unwrap()
}

fn run_fixed(env: &Env, action: Action, seed: u64) -> Episode {
    let mut rng = SeedStream::new(seed).rng("episode", 0);
    rollout(env, |_, _| Ok(action), false, &mut rng).unwrap()
}

#[test]
fn stochastic_reset_replays_with_same_seed() {
    let env = default_env(Mode::Stochastic);
    let a = env.reset(&mut SeedStream::new(5).rng("reset", 0)).unwrap();
    let b = env.reset(&mut SeedStream::new(5).rng("reset", 0)).unwrap();
    let c = env.reset(&mut SeedStream::new(6).rng("reset", 0)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.compartments, c.compartments);
    assert!(a.compartments.is_integral());
}

#[test]
fn deterministic_reset_ignores_rng() {
    let env = default_env(Mode::Deterministic);
    let a = env.reset(&mut SeedStream::new(1).rng("reset", 0)).unwrap();
    let b = env.reset(&mut SeedStream::new(2).rng("x", 7)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn burn_in_reaches_exit_date_with_epidemic_under_way() {
    let env = default_env(Mode::Deterministic);
    let s = env.reset(&mut SeedStream::new(0).rng("reset", 0)).unwrap();
    let n = env.model().ages().total();
    assert!(s.compartments.s.sum() < n);
    assert!(s.compartments.i_hosp.sum() > 0.0);
    assert_eq!(s.week, 0);
    assert_eq!(s.day, 64);
    assert_eq!(s.compartments.h_new.sum(), 0.0);
    assert_eq!(s.prev_action, LOCKDOWN_ACTION);
    assert!(!s.holiday && !s.done);
}

#[test]
fn invalid_seeds_are_configuration_errors() {
    let model = ParamFile::shipped_default().build().unwrap();
    let mut cfg = EnvConfig::shipped_default();
    cfg.seed_infections[2] = -1.0;
    assert!(matches!(Env::new(model.clone(), cfg), Err(Error::Config(_))));
    let mut cfg = EnvConfig::shipped_default();
    cfg.seed_infections.pop();
    assert!(Env::new(model.clone(), cfg).is_err());
    let mut cfg = EnvConfig { mode: Mode::Stochastic, ..EnvConfig::shipped_default() };
    cfg.seed_infections[2] = 1.5;
    assert!(Env::new(model, cfg).is_err());
}

#[test]
fn seventeen_steps_then_done() {
    let env = default_env(Mode::Deterministic);
    let mut rng = SeedStream::new(0).rng("e", 0);
    let mut s = env.reset(&mut rng).unwrap();
    for week in 1..=17 {
        let out = env.step(&s, Action::uniform(0.5), &mut rng).unwrap();
        assert_eq!(out.done, week == 17, "week {week}");
        assert_eq!(out.state.week, week);
        assert_eq!(out.daily.len(), 7);
        s = out.state;
    }
    assert_eq!(s.day, 183);
    assert!(matches!(env.step(&s, Action::OPEN, &mut rng), Err(Error::EpisodeDone)));
}

#[test]
fn out_of_range_action_is_rejected() {
    let env = default_env(Mode::Deterministic);
    let mut rng = SeedStream::new(0).rng("e", 0);
    let s = env.reset(&mut rng).unwrap();
    assert!(matches!(env.step(&s, Action::new(1.2, 0.0, 0.0), &mut rng), Err(Error::InvalidAction(_))));
    assert!(env.step(&s, Action::new(0.5, -0.1, 0.0), &mut rng).is_err());
}

#[test]
fn rewards_are_two_nonpositive_components() {
    for mode in [Mode::Deterministic, Mode::Stochastic] {
        let env = default_env(mode);
        let mut rng = SeedStream::new(3).rng("e", 0);
        let mut s = env.reset(&mut rng).unwrap();
        while !s.done {
            let out = env.step(&s, Action::new(0.7, 0.3, 0.9), &mut rng).unwrap();
            assert_eq!(out.reward.len(), 2);
            assert!(out.reward.iter().all(|&r| r <= 0.0), "{:?}", out.reward);
            assert!(out.rewards.ari <= 0.0 && out.rewards.arh <= 0.0 && out.rewards.sb <= 0.0);
            s = out.state;
        }
    }
}

#[test]
fn school_component_is_ignored_during_holidays() {
    let env = default_env(Mode::Deterministic);
    let mut rng = SeedStream::new(0).rng("e", 0);
    let mut s = env.reset(&mut rng).unwrap();
    // weeks 0..8 end before the holidays are fully under way
    for _ in 0..9 {
        s = env.step(&s, Action::uniform(0.4), &mut rng).unwrap().state;
    }
    assert!((s.day..s.day + 7).all(|d| env.config().calendar.is_holiday(d)));
    let a = env.step(&s, Action::new(0.6, 1.0, 0.3), &mut rng).unwrap();
    let b = env.step(&s, Action::new(0.6, 0.0, 0.3), &mut rng).unwrap();
    assert_eq!(a.state, b.state);
    assert_eq!(a.reward, b.reward);
    assert_eq!(a.rewards, b.rewards);
}

#[test]
fn straddling_week_closes_schools_from_the_first_holiday_day() {
    let env = default_env(Mode::Deterministic);
    let mut rng = SeedStream::new(0).rng("e", 0);
    let mut s = env.reset(&mut rng).unwrap();
    for _ in 0..8 {
        s = env.step(&s, Action::OPEN, &mut rng).unwrap().state;
    }
    assert_eq!(s.day, 120);
    let out = env.step(&s, Action::OPEN, &mut rng).unwrap();
    let school: Vec<f64> = out.daily.iter().map(|d| d.action.p_s).collect();
    assert_eq!(school, vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert!(out.state.holiday);
    // 2 of 7 days fully open, 5 days without school
    assert!(out.rewards.sb < 0.0);
}

#[test]
fn open_weeks_outside_holidays_cost_no_social_burden() {
    let env = default_env(Mode::Deterministic);
    let mut rng = SeedStream::new(0).rng("e", 0);
    let mut s = env.reset(&mut rng).unwrap();
    for _ in 0..8 {
        let out = env.step(&s, Action::OPEN, &mut rng).unwrap();
        assert_eq!(out.rewards.sb, 0.0);
        s = out.state;
    }
}

#[test]
fn disease_free_transition_has_no_attack_rate() {
    let env = default_env(Mode::Deterministic);
    let mut rng = SeedStream::new(0).rng("e", 0);
    let mut s = env.reset(&mut rng).unwrap();
    s.compartments = CompartmentState::susceptible(env.model().ages());
    s.weekly = Flows::zeros(env.model().groups());
    let out = env.step(&s, Action::uniform(0.3), &mut rng).unwrap();
    assert_eq!(out.rewards.ari, 0.0);
    assert_eq!(out.rewards.arh, 0.0);
    assert!(out.rewards.sb < 0.0);
    assert_eq!(out.state.compartments.s, s.compartments.s);
}

#[test]
fn social_burden_does_not_depend_on_the_transition_mode() {
    let det = default_env(Mode::Deterministic);
    let sto = default_env(Mode::Stochastic);
    let mut rng = SeedStream::new(9).rng("e", 0);
    let s = det.reset(&mut rng).unwrap();
    let a = Action::new(0.3, 0.8, 0.5);
    let r1 = det.step(&s, a, &mut rng).unwrap().rewards.sb;
    let r2 = sto.step(&s, a, &mut rng).unwrap().rewards.sb;
    assert_eq!(r1, r2);
}

#[test]
fn observation_layout() {
    let env = default_env(Mode::Deterministic);
    let mut rng = SeedStream::new(0).rng("e", 0);
    let s = env.reset(&mut rng).unwrap();
    let obs = env.observe(&s);
    assert_eq!(obs.len(), 134);
    assert!(obs[..130].iter().all(|&x| (0.0..=1.0).contains(&x)));
    assert_eq!(&obs[130..133], &[0.2, 0.0, 0.1]);
    assert_eq!(obs[133], 0.0);

    let mut clean = s.clone();
    clean.compartments = CompartmentState::susceptible(env.model().ages());
    clean.weekly = Flows::zeros(env.model().groups());
    let obs = env.observe(&clean);
    for k in 0..10 {
        let block = &obs[k * OBS_CHANNELS..(k + 1) * OBS_CHANNELS];
        assert_eq!(block[0], 1.0);
        assert!(block[1..].iter().all(|&x| x == 0.0));
    }
}

#[test]
fn episode_return_is_sum_of_step_rewards() {
    let env = default_env(Mode::Deterministic);
    let ep = run_fixed(&env, Action::uniform(0.6), 0);
    assert_eq!(ep.rewards.len(), 17);
    let mut acc = [0.0; 2];
    for r in &ep.rewards {
        acc[0] += r[0];
        acc[1] += r[1];
    }
    assert_eq!(ep.scaled_return(), acc);
}

#[test]
fn stochastic_episodes_replay() {
    let env = default_env(Mode::Stochastic);
    let a = run_fixed(&env, Action::uniform(0.5), 11);
    let b = run_fixed(&env, Action::uniform(0.5), 11);
    assert_eq!(a.raw_rewards, b.raw_rewards);
    assert_eq!(a.daily, b.daily);
}

#[test]
fn open_policy_trades_infections_for_social_burden() {
    let env = default_env(Mode::Deterministic);
    let open = run_fixed(&env, Action::OPEN, 0).raw_return();
    let closed = run_fixed(&env, Action::CLOSED, 0).raw_return();
    assert!(open[0] <= closed[0], "hospitalisations: open {open:?} closed {closed:?}");
    assert!(open[1] >= closed[1], "burden: open {open:?} closed {closed:?}");
}

#[test]
fn raising_an_action_component_raises_infections() {
    let model = ParamFile::shipped_default().build().unwrap();
    let cfg = EnvConfig { objectives: ObjectivePair::InfectionsBurden, ..EnvConfig::shipped_default() };
    let env = Env::new(model, cfg).unwrap();
    let base = Action::new(0.3, 0.3, 0.3);
    let infections = |a: Action| run_fixed(&env, a, 0).raw_return()[0];
    let reference = infections(base);
    for raised in [Action::new(0.6, 0.3, 0.3), Action::new(0.3, 0.6, 0.3), Action::new(0.3, 0.3, 0.6)] {
        assert!(infections(raised) <= reference, "{raised:?}");
    }
}
