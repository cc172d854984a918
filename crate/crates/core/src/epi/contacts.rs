//! Contact-matrix algebra: intervention matrices, compliance blending and
//! the force of infection.

use ndarray::{Array1, Zip};

use super::model::{CompartmentState, ContactMatrixSet, EpiParams, Matrix, Vector};
use crate::action::Action;
use crate::error::{Error, Result};

/// `C_home + p_w (C_work + C_transport) + p_s C_school + p_l (C_leisure + C_other)`.
pub fn effective_contact_matrix(cms: &ContactMatrixSet, action: &Action) -> Result<Matrix> {
    cms.validate()?;
    action.validate()?;
    Ok(&cms.home
        + &((&cms.work + &cms.transport) * action.p_w)
        + &(&cms.school * action.p_s)
        + &((&cms.leisure + &cms.other) * action.p_l))
}

/// Logistic compliance ramp, zero-ish at the intervention start and
/// rising to one.
pub fn compliance_weight(t: f64, t_intervention: f64, beta0: f64, beta1: f64) -> f64 {
    let x = beta0 + beta1 * (t - t_intervention);
    // 1/(1+e^-x) == e^x/(1+e^x) without overflow for large |x|
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let ex = x.exp();
        ex / (1.0 + ex)
    }
}

/// `(1 - c) prev + c target`.
pub fn blended_matrix(prev: &Matrix, target: &Matrix, c: f64) -> Result<Matrix> {
    if prev.dim() != target.dim() {
        return Err(Error::Dimension(format!(
            "cannot blend {:?} with {:?}",
            prev.dim(),
            target.dim()
        )));
    }
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::InvalidInput(format!("compliance weight {c} outside [0, 1]")));
    }
    Ok(prev * (1.0 - c) + target * c)
}

/// Transmission matrices under an installed contact matrix.
///
/// The asymptomatic and symptomatic contact matrices are scaled entrywise
/// by the fraction of contacts retained, `C_hat / C`, so a reduction on a
/// location hits both routes in the same proportion.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionRates {
    pub asym: Matrix,
    pub sym: Matrix,
}

impl TransmissionRates {
    pub fn new(cms: &ContactMatrixSet, full: &Matrix, c_hat: &Matrix, params: &EpiParams) -> Self {
        let mut retained = c_hat.clone();
        Zip::from(&mut retained).and(full).for_each(|r, &c| {
            *r = if c > 0.0 { *r / c } else { 1.0 };
        });
        Self {
            asym: &cms.asym * &retained * params.q_asym,
            sym: &cms.sym * &retained * params.q_sym,
        }
    }

    /// Rates with nothing reduced.
    pub fn unrestricted(cms: &ContactMatrixSet, params: &EpiParams) -> Self {
        Self { asym: &cms.asym * params.q_asym, sym: &cms.sym * params.q_sym }
    }

    /// `beta_a (I_presym + I_asym) + beta_s (I_mild + I_sev)`, per day.
    pub fn force_of_infection(&self, state: &CompartmentState) -> Vector {
        let asym_inf: Array1<f64> = &state.i_presym + &state.i_asym;
        let sym_inf: Array1<f64> = &state.i_mild + &state.i_sev;
        let mut lambda = self.asym.dot(&asym_inf) + self.sym.dot(&sym_inf);
        // guard against -0.0 and round-off below zero
        lambda.mapv_inplace(|x| x.max(0.0));
        lambda
    }
}

/// Force of infection with the unrestricted transmission matrices.
pub fn force_of_infection(state: &CompartmentState, params: &EpiParams, cms: &ContactMatrixSet) -> Vector {
    TransmissionRates::unrestricted(cms, params).force_of_infection(state)
}
