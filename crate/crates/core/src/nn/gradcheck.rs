use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::model::ModelInstance;
use super::tensor::Tensor;
use super::NnError;
use crate::grammar::TokenSequence;

/// Central-difference step.
pub const STEP: f64 = 1e-5;
/// Denominator floor. Central differences on an O(1) loss carry round-off of
/// about `eps * loss / STEP`, near 1e-10; gradients smaller than the floor
/// (such as the exactly-zero key bias gradient) are compared in absolute terms.
pub const FLOOR: f64 = 1e-6;

/// Errors above this trigger a re-measurement with finer steps.
const RETRY_ABOVE: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
pub struct GroupCheck {
    pub name: String,
    pub checked: usize,
    /// Coordinates measured with a finer step because a ReLU kink sat inside
    /// the default stencil.
    pub remeasured: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub groups: Vec<GroupCheck>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Compares analytic loss gradients with central differences on up to
/// `per_group` random coordinates of every parameter tensor (all of them
/// for smaller tensors).
///
/// A central difference is meaningless when a ReLU switches inside the
/// stencil. A coordinate whose error exceeds `RETRY_ABOVE` is therefore
/// measured again with steps `STEP / 10` and `STEP / 100`; if those two agree
/// (the loss is smooth at that scale) the closer of the two estimates counts.
/// A wrong gradient disagrees at every step size and still fails.
pub fn grad_check(
    m: &ModelInstance,
    image: &Tensor,
    gt: &TokenSequence,
    per_group: usize,
    seed: u64,
) -> Result<GradCheckReport, NnError> {
    let (_, grads) = m.loss_and_grads(image, gt, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs = Vec::new();
    for (g, t) in m.params().tensors().iter().enumerate() {
        let coords: Vec<usize> = if t.len() <= per_group {
            (0..t.len()).collect()
        } else {
            sample(&mut rng, t.len(), per_group).into_vec()
        };
        jobs.extend(coords.into_iter().map(|i| (g, i)));
    }
    let errors: Vec<(usize, f64, bool)> = jobs
        .par_iter()
        .map(|&(g, i)| -> Result<(usize, f64, bool), NnError> {
            let mut probe = m.clone();
            let orig = probe.params().tensors()[g].data()[i];
            let mut central = |h: f64| -> Result<f64, NnError> {
                probe.params_mut().tensors_mut()[g].data_mut()[i] = orig + h;
                let up = probe.loss(image, gt)?;
                probe.params_mut().tensors_mut()[g].data_mut()[i] = orig - h;
                let down = probe.loss(image, gt)?;
                Ok((up - down) / (2.0 * h))
            };
            let analytic = grads[g].data()[i];
            let err = relative_error(analytic, central(STEP)?);
            if err <= RETRY_ABOVE {
                return Ok((g, err, false));
            }
            let (fine, finer) = (central(STEP / 10.0)?, central(STEP / 100.0)?);
            let smooth = (fine - finer).abs() <= 1e-3 * fine.abs().max(finer.abs()) + 1e-7;
            Ok(if smooth {
                (g, err.min(relative_error(analytic, fine)), true)
            } else {
                (g, err, false)
            })
        })
        .collect::<Result<_, _>>()?;
    let mut groups: Vec<GroupCheck> = m
        .params()
        .names()
        .iter()
        .map(|n| GroupCheck {
            name: n.clone(),
            checked: 0,
            remeasured: 0,
            max_rel_error: 0.0,
        })
        .collect();
    for (g, e, again) in errors {
        groups[g].checked += 1;
        groups[g].remeasured += again as usize;
        groups[g].max_rel_error = groups[g].max_rel_error.max(e);
    }
    let max_rel_error = groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_rel_error,
        groups,
    })
}
