//! Single-substep transitions and multi-day simulation.

use ndarray::Array1;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::contacts::{blended_matrix, compliance_weight, TransmissionRates};
use super::model::{AgeStructure, CompartmentState, ContactMatrixSet, EpiParams, Matrix, Vector};
use crate::error::{Error, Result};

/// Transition kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Forward-Euler integration of the ODE system.
    #[serde(rename = "ode", alias = "deterministic")]
    Deterministic,
    /// Chain-binomial draws.
    #[serde(rename = "binomial", alias = "stochastic")]
    Stochastic,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ode" | "deterministic" => Ok(Mode::Deterministic),
            "binomial" | "stochastic" => Ok(Mode::Stochastic),
            other => Err(Error::Config(format!("unknown mode '{other}' (expected ode|binomial)"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Deterministic => "ode",
            Mode::Stochastic => "binomial",
        })
    }
}

/// New admissions and deaths during a substep (or aggregated over a day).
#[derive(Debug, Clone, PartialEq)]
pub struct Flows {
    pub hosp_new: Vector,
    pub icu_new: Vector,
    pub deaths_new: Vector,
}

impl Flows {
    pub fn zeros(groups: usize) -> Self {
        Self {
            hosp_new: Array1::zeros(groups),
            icu_new: Array1::zeros(groups),
            deaths_new: Array1::zeros(groups),
        }
    }

    pub fn add(&mut self, other: &Flows) {
        self.hosp_new += &other.hosp_new;
        self.icu_new += &other.icu_new;
        self.deaths_new += &other.deaths_new;
    }
}

#[derive(Debug, Clone)]
pub struct Substep {
    pub state: CompartmentState,
    pub flows: Flows,
    /// Compartment entries clamped to zero after an Euler overshoot.
    pub clamped: usize,
}

/// A compliance-blended contact schedule: the effective matrix moves from
/// `prev` towards `target`, anchored at `t_intervention`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactSchedule {
    pub prev: Matrix,
    pub target: Matrix,
    pub t_intervention: f64,
}

impl ContactSchedule {
    pub fn constant(m: Matrix) -> Self {
        Self { prev: m.clone(), target: m, t_intervention: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub state: CompartmentState,
    /// One entry per simulated day.
    pub daily: Vec<Flows>,
    /// Blended matrix in effect at the end of the last substep.
    pub effective: Matrix,
    pub substeps: usize,
    pub clamped: usize,
}

/// The age-structured compartmental model with its parameters.
#[derive(Debug, Clone)]
pub struct EpiModel {
    ages: AgeStructure,
    params: EpiParams,
    contacts: ContactMatrixSet,
    full: Matrix,
}

impl EpiModel {
    pub fn new(ages: AgeStructure, params: EpiParams, contacts: ContactMatrixSet) -> Result<Self> {
        contacts.validate()?;
        if contacts.groups() != ages.groups() {
            return Err(Error::Dimension(format!(
                "contact matrices are {0}x{0} for {1} age groups",
                contacts.groups(),
                ages.groups()
            )));
        }
        params.validate(ages.groups())?;
        let full = contacts.full();
        Ok(Self { ages, params, contacts, full })
    }

    pub fn ages(&self) -> &AgeStructure {
        &self.ages
    }

    pub fn params(&self) -> &EpiParams {
        &self.params
    }

    pub fn contacts(&self) -> &ContactMatrixSet {
        &self.contacts
    }

    /// The unrestricted contact matrix `C`.
    pub fn full_matrix(&self) -> &Matrix {
        &self.full
    }

    pub fn groups(&self) -> usize {
        self.ages.groups()
    }

    pub fn rates(&self, c_hat: &Matrix) -> TransmissionRates {
        TransmissionRates::new(&self.contacts, &self.full, c_hat, &self.params)
    }

    /// One forward-Euler step of length `h`.
    pub fn deterministic_substep(&self, state: &CompartmentState, c_hat: &Matrix) -> Substep {
        let p = &self.params;
        let h = p.substep_days;
        let lambda = self.rates(c_hat).force_of_infection(state);
        let mut next = state.clone();
        let mut flows = Flows::zeros(self.groups());

        for k in 0..self.groups() {
            let infection = lambda[k] * state.s[k] * h;
            let onset = p.gamma_rate * state.e[k] * h;
            let to_asym = p.p_asym[k] * p.theta * state.i_presym[k] * h;
            let to_mild = (1.0 - p.p_asym[k]) * p.theta * state.i_presym[k] * h;
            let asym_rec = p.delta1 * state.i_asym[k] * h;
            let to_sev = p.psi[k] * state.i_mild[k] * h;
            let mild_rec = p.delta2[k] * state.i_mild[k] * h;
            let to_hosp = p.phi1[k] * p.omega[k] * state.i_sev[k] * h;
            let to_icu = (1.0 - p.phi1[k]) * p.omega[k] * state.i_sev[k] * h;
            let hosp_rec = p.delta3[k] * state.i_hosp[k] * h;
            let hosp_death = p.tau1[k] * state.i_hosp[k] * h;
            let icu_rec = p.delta4[k] * state.i_icu[k] * h;
            let icu_death = p.tau2[k] * state.i_icu[k] * h;

            next.s[k] -= infection;
            next.e[k] += infection - onset;
            next.i_presym[k] += onset - to_asym - to_mild;
            next.i_asym[k] += to_asym - asym_rec;
            next.i_mild[k] += to_mild - to_sev - mild_rec;
            next.i_sev[k] += to_sev - to_hosp - to_icu;
            next.i_hosp[k] += to_hosp - hosp_rec - hosp_death;
            next.i_icu[k] += to_icu - icu_rec - icu_death;
            next.h_new[k] += to_hosp;
            next.d[k] += hosp_death + icu_death;
            next.r[k] += asym_rec + mild_rec + hosp_rec + icu_rec;

            flows.hosp_new[k] = to_hosp;
            flows.icu_new[k] = to_icu;
            flows.deaths_new[k] = hosp_death + icu_death;
        }

        let mut clamped = 0;
        for c in super::model::Compartment::ALL {
            for x in next.get_mut(c).iter_mut() {
                if *x < 0.0 {
                    *x = 0.0;
                    clamped += 1;
                }
            }
        }
        if clamped > 0 {
            log::warn!("Euler substep produced {clamped} negative compartment entries; clamped to zero");
        }
        Substep { state: next, flows, clamped }
    }

    /// One chain-binomial step of length `h`. Competing exits from a
    /// compartment are drawn as a single total, then split, so a source is
    /// never overdrawn.
    pub fn stochastic_substep<R: Rng + ?Sized>(
        &self,
        state: &CompartmentState,
        c_hat: &Matrix,
        rng: &mut R,
    ) -> Substep {
        let p = &self.params;
        let h = p.substep_days;
        let lambda = self.rates(c_hat).force_of_infection(state);
        let mut next = state.clone();
        let mut flows = Flows::zeros(self.groups());

        for k in 0..self.groups() {
            let infection = binomial(rng, state.s[k], exit_probability(h, lambda[k]));
            let onset = binomial(rng, state.e[k], exit_probability(h, p.gamma_rate));
            let (to_asym, to_mild) = competing(
                rng,
                state.i_presym[k],
                h,
                p.p_asym[k] * p.theta,
                (1.0 - p.p_asym[k]) * p.theta,
            );
            let asym_rec = binomial(rng, state.i_asym[k], exit_probability(h, p.delta1));
            let (to_sev, mild_rec) = competing(rng, state.i_mild[k], h, p.psi[k], p.delta2[k]);
            let (to_hosp, to_icu) = competing(
                rng,
                state.i_sev[k],
                h,
                p.phi1[k] * p.omega[k],
                (1.0 - p.phi1[k]) * p.omega[k],
            );
            let (hosp_rec, hosp_death) = competing(rng, state.i_hosp[k], h, p.delta3[k], p.tau1[k]);
            let (icu_rec, icu_death) = competing(rng, state.i_icu[k], h, p.delta4[k], p.tau2[k]);

            next.s[k] -= infection;
            next.e[k] += infection - onset;
            next.i_presym[k] += onset - to_asym - to_mild;
            next.i_asym[k] += to_asym - asym_rec;
            next.i_mild[k] += to_mild - to_sev - mild_rec;
            next.i_sev[k] += to_sev - to_hosp - to_icu;
            next.i_hosp[k] += to_hosp - hosp_rec - hosp_death;
            next.i_icu[k] += to_icu - icu_rec - icu_death;
            next.h_new[k] += to_hosp;
            next.d[k] += hosp_death + icu_death;
            next.r[k] += asym_rec + mild_rec + hosp_rec + icu_rec;

            flows.hosp_new[k] = to_hosp;
            flows.icu_new[k] = to_icu;
            flows.deaths_new[k] = hosp_death + icu_death;
        }
        Substep { state: next, flows, clamped: 0 }
    }

    /// Runs `n_days` whole days of substeps starting at day `t_start`. At each
    /// substep the effective matrix is the compliance blend of the schedule.
    pub fn simulate_days<R: Rng + ?Sized>(
        &self,
        state: &CompartmentState,
        schedule: &ContactSchedule,
        t_start: f64,
        n_days: usize,
        mode: Mode,
        rng: &mut R,
    ) -> Result<SimOutcome> {
        if n_days == 0 {
            return Err(Error::InvalidInput("n_days must be at least 1".into()));
        }
        if state.groups() != self.groups() {
            return Err(Error::Dimension(format!(
                "state has {} groups, model has {}",
                state.groups(),
                self.groups()
            )));
        }
        let per_day = self.params.substeps_per_day()?;
        let h = self.params.substep_days;
        let mut current = state.clone();
        let mut daily = Vec::with_capacity(n_days);
        let mut effective = schedule.prev.clone();
        let mut clamped = 0;
        let mut substeps = 0;

        for day in 0..n_days {
            let mut flows = Flows::zeros(self.groups());
            for j in 0..per_day {
                let t = t_start + (day * per_day + j) as f64 * h;
                let c = compliance_weight(
                    t,
                    schedule.t_intervention,
                    self.params.compliance_beta0,
                    self.params.compliance_beta1,
                );
                effective = blended_matrix(&schedule.prev, &schedule.target, c)?;
                let step = match mode {
                    Mode::Deterministic => self.deterministic_substep(&current, &effective),
                    Mode::Stochastic => self.stochastic_substep(&current, &effective, rng),
                };
                flows.add(&step.flows);
                clamped += step.clamped;
                current = step.state;
                substeps += 1;
            }
            daily.push(flows);
        }
        Ok(SimOutcome { state: current, daily, effective, substeps, clamped })
    }
}

fn exit_probability(h: f64, rate: f64) -> f64 {
    -(-h * rate).exp_m1()
}

fn binomial<R: Rng + ?Sized>(rng: &mut R, n: f64, p: f64) -> f64 {
    if n <= 0.0 || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return n;
    }
    let dist = Binomial::new(n as u64, p).expect("p is in (0, 1)");
    dist.sample(rng) as f64
}

/// Total exits at the summed rate, split by relative rate.
fn competing<R: Rng + ?Sized>(rng: &mut R, n: f64, h: f64, rate_a: f64, rate_b: f64) -> (f64, f64) {
    let total_rate = rate_a + rate_b;
    if total_rate <= 0.0 {
        return (0.0, 0.0);
    }
    let exits = binomial(rng, n, exit_probability(h, total_rate));
    let a = binomial(rng, exits, rate_a / total_rate);
    (a, exits - a)
}
