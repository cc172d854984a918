use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = Array1<f64>;
pub type Matrix = Array2<f64>;

/// Population split into `K` age groups.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeStructure {
    population: Vector,
    labels: Vec<String>,
}

impl AgeStructure {
    pub fn new(population: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if population.is_empty() {
            return Err(Error::Config("at least one age group is required".into()));
        }
        if labels.len() != population.len() {
            return Err(Error::Dimension(format!(
                "{} group labels for {} groups",
                labels.len(),
                population.len()
            )));
        }
        if let Some(n) = population.iter().find(|n| !(n.is_finite() && **n > 0.0)) {
            return Err(Error::Config(format!("group sizes must be positive, got {n}")));
        }
        Ok(Self { population: Array1::from(population), labels })
    }

    pub fn groups(&self) -> usize {
        self.population.len()
    }

    pub fn population(&self) -> &Vector {
        &self.population
    }

    pub fn total(&self) -> f64 {
        self.population.sum()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// The compartments in the order used by observations and exports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Compartment {
    S,
    E,
    IPresym,
    IAsym,
    IMild,
    ISev,
    IHosp,
    IIcu,
    HNew,
    D,
    R,
}

impl Compartment {
    pub const ALL: [Compartment; 11] = [
        Compartment::S,
        Compartment::E,
        Compartment::IPresym,
        Compartment::IAsym,
        Compartment::IMild,
        Compartment::ISev,
        Compartment::IHosp,
        Compartment::IIcu,
        Compartment::HNew,
        Compartment::D,
        Compartment::R,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Compartment::S => "S",
            Compartment::E => "E",
            Compartment::IPresym => "I_presym",
            Compartment::IAsym => "I_asym",
            Compartment::IMild => "I_mild",
            Compartment::ISev => "I_sev",
            Compartment::IHosp => "I_hosp",
            Compartment::IIcu => "I_icu",
            Compartment::HNew => "H_new",
            Compartment::D => "D",
            Compartment::R => "R",
        }
    }

    /// Whether the compartment holds people (H_new is a counter).
    pub fn is_population(self) -> bool {
        self != Compartment::HNew
    }
}

/// Per-age-group person counts. Real-valued under the ODE model,
/// whole numbers under the chain-binomial model.
#[derive(Debug, Clone, PartialEq)]
pub struct CompartmentState {
    pub s: Vector,
    pub e: Vector,
    pub i_presym: Vector,
    pub i_asym: Vector,
    pub i_mild: Vector,
    pub i_sev: Vector,
    pub i_hosp: Vector,
    pub i_icu: Vector,
    pub h_new: Vector,
    pub d: Vector,
    pub r: Vector,
}

impl CompartmentState {
    /// Everyone susceptible.
    pub fn susceptible(ages: &AgeStructure) -> Self {
        let zeros = Array1::zeros(ages.groups());
        Self {
            s: ages.population().clone(),
            e: zeros.clone(),
            i_presym: zeros.clone(),
            i_asym: zeros.clone(),
            i_mild: zeros.clone(),
            i_sev: zeros.clone(),
            i_hosp: zeros.clone(),
            i_icu: zeros.clone(),
            h_new: zeros.clone(),
            d: zeros.clone(),
            r: zeros,
        }
    }

    /// Moves `exposed[k]` people from S to E in each group.
    pub fn seed_exposed(&mut self, exposed: &[f64]) -> Result<()> {
        if exposed.len() != self.groups() {
            return Err(Error::Dimension(format!(
                "{} seed values for {} groups",
                exposed.len(),
                self.groups()
            )));
        }
        for (k, &x) in exposed.iter().enumerate() {
            if !(x.is_finite() && x >= 0.0) || x > self.s[k] {
                return Err(Error::Config(format!("invalid seed {x} for group {k}")));
            }
            self.s[k] -= x;
            self.e[k] += x;
        }
        Ok(())
    }

    pub fn groups(&self) -> usize {
        self.s.len()
    }

    pub fn get(&self, c: Compartment) -> &Vector {
        match c {
            Compartment::S => &self.s,
            Compartment::E => &self.e,
            Compartment::IPresym => &self.i_presym,
            Compartment::IAsym => &self.i_asym,
            Compartment::IMild => &self.i_mild,
            Compartment::ISev => &self.i_sev,
            Compartment::IHosp => &self.i_hosp,
            Compartment::IIcu => &self.i_icu,
            Compartment::HNew => &self.h_new,
            Compartment::D => &self.d,
            Compartment::R => &self.r,
        }
    }

    pub fn get_mut(&mut self, c: Compartment) -> &mut Vector {
        match c {
            Compartment::S => &mut self.s,
            Compartment::E => &mut self.e,
            Compartment::IPresym => &mut self.i_presym,
            Compartment::IAsym => &mut self.i_asym,
            Compartment::IMild => &mut self.i_mild,
            Compartment::ISev => &mut self.i_sev,
            Compartment::IHosp => &mut self.i_hosp,
            Compartment::IIcu => &mut self.i_icu,
            Compartment::HNew => &mut self.h_new,
            Compartment::D => &mut self.d,
            Compartment::R => &mut self.r,
        }
    }

    /// Per-group population over all people-holding compartments.
    pub fn group_totals(&self) -> Vector {
        let mut total = Array1::zeros(self.groups());
        for c in Compartment::ALL.into_iter().filter(|c| c.is_population()) {
            total += self.get(c);
        }
        total
    }

    pub fn total(&self) -> f64 {
        self.group_totals().sum()
    }

    /// True when no one is exposed or infectious.
    pub fn is_disease_free(&self) -> bool {
        [&self.e, &self.i_presym, &self.i_asym, &self.i_mild, &self.i_sev]
            .iter()
            .all(|v| v.iter().all(|&x| x == 0.0))
    }

    pub fn is_nonnegative(&self) -> bool {
        Compartment::ALL.iter().all(|&c| self.get(c).iter().all(|&x| x >= 0.0))
    }

    pub fn is_integral(&self) -> bool {
        Compartment::ALL.iter().all(|&c| self.get(c).iter().all(|&x| x.fract() == 0.0))
    }
}

/// Location-specific contact matrices plus the matrices used to build the
/// asymptomatic and symptomatic transmission rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactMatrixSet {
    pub home: Matrix,
    pub work: Matrix,
    pub transport: Matrix,
    pub school: Matrix,
    pub leisure: Matrix,
    pub other: Matrix,
    pub asym: Matrix,
    pub sym: Matrix,
}

impl ContactMatrixSet {
    pub fn groups(&self) -> usize {
        self.home.nrows()
    }

    fn all(&self) -> [(&'static str, &Matrix); 8] {
        [
            ("home", &self.home),
            ("work", &self.work),
            ("transport", &self.transport),
            ("school", &self.school),
            ("leisure", &self.leisure),
            ("other", &self.other),
            ("asym", &self.asym),
            ("sym", &self.sym),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.groups();
        for (name, m) in self.all() {
            if m.dim() != (k, k) {
                return Err(Error::Dimension(format!(
                    "contact matrix {name} is {:?}, expected {k}x{k}",
                    m.dim()
                )));
            }
            if m.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
                return Err(Error::Config(format!("contact matrix {name} has a negative or non-finite entry")));
            }
        }
        Ok(())
    }

    /// Sum of the six location matrices.
    pub fn full(&self) -> Matrix {
        // grouped like the action-weighted matrix so an all-open action
        // reproduces it bit for bit
        &self.home + &(&self.work + &self.transport) + &self.school + &(&self.leisure + &self.other)
    }
}

/// Rates, probabilities and numerical settings of the compartmental model.
/// Per-group quantities are `K`-vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpiParams {
    /// Transmission proportionality for pre-/asymptomatic infectious people.
    pub q_asym: f64,
    /// Transmission proportionality for symptomatic infectious people.
    pub q_sym: f64,
    /// E -> I_presym.
    pub gamma_rate: f64,
    /// I_presym exit rate.
    pub theta: f64,
    /// Probability an infection stays asymptomatic.
    pub p_asym: Vec<f64>,
    /// I_mild -> I_sev.
    pub psi: Vec<f64>,
    /// I_sev exit rate (split into ward and ICU by `phi1`).
    pub omega: Vec<f64>,
    /// Probability that a severe case goes to the ward rather than ICU.
    pub phi1: Vec<f64>,
    /// I_asym -> R.
    pub delta1: f64,
    /// I_mild -> R.
    pub delta2: Vec<f64>,
    /// I_hosp -> R.
    pub delta3: Vec<f64>,
    /// I_icu -> R.
    pub delta4: Vec<f64>,
    /// I_hosp -> D.
    pub tau1: Vec<f64>,
    /// I_icu -> D.
    pub tau2: Vec<f64>,
    pub compliance_beta0: f64,
    pub compliance_beta1: f64,
    /// Substep length in days.
    pub substep_days: f64,
}

impl EpiParams {
    pub fn validate(&self, groups: usize) -> Result<()> {
        let scalars = [
            ("q_asym", self.q_asym),
            ("q_sym", self.q_sym),
            ("gamma_rate", self.gamma_rate),
            ("theta", self.theta),
            ("delta1", self.delta1),
        ];
        for (name, v) in scalars {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be a non-negative rate, got {v}")));
            }
        }
        let vectors: [(&str, &Vec<f64>, bool); 9] = [
            ("p_asym", &self.p_asym, true),
            ("psi", &self.psi, false),
            ("omega", &self.omega, false),
            ("phi1", &self.phi1, true),
            ("delta2", &self.delta2, false),
            ("delta3", &self.delta3, false),
            ("delta4", &self.delta4, false),
            ("tau1", &self.tau1, false),
            ("tau2", &self.tau2, false),
        ];
        for (name, v, probability) in vectors {
            if v.len() != groups {
                return Err(Error::Dimension(format!("{name} has {} entries, expected {groups}", v.len())));
            }
            for &x in v {
                if !(x.is_finite() && x >= 0.0) || (probability && x > 1.0) {
                    return Err(Error::Config(format!("{name} has invalid entry {x}")));
                }
            }
        }
        if !(self.compliance_beta0.is_finite() && self.compliance_beta1.is_finite()) {
            return Err(Error::Config("compliance coefficients must be finite".into()));
        }
        self.substeps_per_day()?;
        Ok(())
    }

    /// Number of substeps in one day; the substep must divide a day evenly.
    pub fn substeps_per_day(&self) -> Result<usize> {
        let h = self.substep_days;
        if !(h.is_finite() && h > 0.0 && h <= 1.0) {
            return Err(Error::Config(format!("substep length must be in (0, 1] days, got {h}")));
        }
        let n = (1.0 / h).round();
        if (n * h - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("substep length {h} does not divide one day")));
        }
        Ok(n as usize)
    }
}
