use rand::seq::index::sample;
use rand::Rng;

use super::{Network, TrainingBatch};
use crate::error::{Error, Result};

/// Parameters compared per check, spread over every weight and bias block.
const MIN_CHECKED: usize = 200;
/// Below this magnitude both gradients count as zero.
const ABS_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameters dropped because the perturbation flipped a ReLU.
    pub skipped_kinks: usize,
}

/// Central differences of `loss` at the given coordinates against
/// `analytic`. `loss` returns the value and a signature of its
/// piecewise-linear pieces; coordinates whose two probes disagree on the
/// signature are skipped.
pub fn finite_difference_check<F, S>(
    params: &[f64],
    analytic: &[f64],
    indices: &[usize],
    epsilon: f64,
    mut loss: F,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> (f64, S),
    S: PartialEq,
{
    let mut theta = params.to_vec();
    let mut report = GradCheckReport { max_relative_error: 0.0, checked: 0, skipped_kinks: 0 };
    for &i in indices {
        let orig = theta[i];
        theta[i] = orig + epsilon;
        let (plus, sig_plus) = loss(&theta);
        theta[i] = orig - epsilon;
        let (minus, sig_minus) = loss(&theta);
        theta[i] = orig;
        if sig_plus != sig_minus {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(ABS_FLOOR);
        report.max_relative_error = report.max_relative_error.max((a - numeric).abs() / denom);
        report.checked += 1;
    }
    report
}

pub fn gradient_check<R: Rng + ?Sized>(net: &Network, batch: &TrainingBatch, epsilon: f64, rng: &mut R) -> Result<GradCheckReport> {
    let (_, grad) = net.loss_and_grad(batch);
    gradient_check_against(net, batch, &grad, epsilon, rng)
}

/// Like [`gradient_check`] but against a caller-supplied gradient.
pub fn gradient_check_against<R: Rng + ?Sized>(
    net: &Network,
    batch: &TrainingBatch,
    analytic: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::InvalidInput(format!("epsilon {epsilon} outside [1e-7, 1e-3]")));
    }
    if batch.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    if analytic.len() != net.n_params() {
        return Err(Error::Dimension(format!("{} gradients for {} parameters", analytic.len(), net.n_params())));
    }
    let blocks = net.blocks();
    // a few extra per block so kink skips rarely push us under the minimum
    let per_block = MIN_CHECKED.div_ceil(blocks.len()) + 4;
    let mut indices = Vec::new();
    for &(offset, len) in &blocks {
        indices.extend(sample(rng, len, per_block.min(len)).into_iter().map(|i| offset + i));
    }
    let mut probe = net.clone();
    let report = finite_difference_check(net.params(), analytic, &indices, epsilon, |theta| {
        probe.params_mut().copy_from_slice(theta);
        (probe.loss(batch), probe.relu_pattern(batch))
    });
    if report.checked < MIN_CHECKED.min(net.n_params()) {
        log::warn!("gradient check compared only {} parameters ({} kinks)", report.checked, report.skipped_kinks);
    }
    Ok(report)
}
