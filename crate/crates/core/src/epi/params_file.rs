//! TOML parameter file: age structure, model parameters and the eight
//! contact matrices as row-major nested arrays.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::model::{AgeStructure, ContactMatrixSet, EpiParams, Matrix};
use super::step::EpiModel;
use crate::error::{Error, Result};

/// Synthetic defaults shipped with the crate.
pub const DEFAULT_PARAMS_TOML: &str = include_str!("../../data/params_default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamFile {
    pub age_structure: AgeSection,
    pub epi: EpiParams,
    pub contacts: ContactSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeSection {
    pub group_labels: Vec<String>,
    pub population: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSection {
    pub home: Vec<Vec<f64>>,
    pub work: Vec<Vec<f64>>,
    pub transport: Vec<Vec<f64>>,
    pub school: Vec<Vec<f64>>,
    pub leisure: Vec<Vec<f64>>,
    pub other: Vec<Vec<f64>>,
    pub asym: Vec<Vec<f64>>,
    pub sym: Vec<Vec<f64>>,
}

impl ParamFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read parameter file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn shipped_default() -> Self {
        Self::parse(DEFAULT_PARAMS_TOML).expect("shipped parameter file parses")
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn build(&self) -> Result<EpiModel> {
        let ages = AgeStructure::new(
            self.age_structure.population.clone(),
            self.age_structure.group_labels.clone(),
        )?;
        let c = &self.contacts;
        let contacts = ContactMatrixSet {
            home: matrix("home", &c.home)?,
            work: matrix("work", &c.work)?,
            transport: matrix("transport", &c.transport)?,
            school: matrix("school", &c.school)?,
            leisure: matrix("leisure", &c.leisure)?,
            other: matrix("other", &c.other)?,
            asym: matrix("asym", &c.asym)?,
            sym: matrix("sym", &c.sym)?,
        };
        EpiModel::new(ages, self.epi.clone(), contacts)
    }
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<Matrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension(format!("contact matrix {name} is not square")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((n, n), flat).map_err(|e| Error::Dimension(format!("{name}: {e}")))
}
