//! Adadelta: per-parameter adaptive steps with no global learning rate.
//!
//! For each scalar parameter, with decay `rho` and stabilizer `eps`:
//!
//! ```text
//! Eg   <- rho·Eg + (1-rho)·g²
//! step <- -sqrt(Ex + eps) / sqrt(Eg + eps) · g
//! Ex   <- rho·Ex + (1-rho)·step²
//! p    <- p + step
//! ```
//!
//! Both accumulators start at zero, so a zero gradient moves nothing.

use ndarray::Zip;

use super::{Gradients, Params, TaggerModel};

/// The optimizer's accumulators, congruent with the model's parameter tree.
#[derive(Debug, Clone)]
pub struct TrainState {
    acc_grad: Params,
    acc_update: Params,
}

impl TrainState {
    pub fn new(model: &TaggerModel) -> TrainState {
        TrainState { acc_grad: model.params.zeros_like(), acc_update: model.params.zeros_like() }
    }
}

/// Applies one Adadelta update to every parameter tensor in place, using
/// the rho and epsilon from the model's configuration.
pub fn adadelta_step(model: &mut TaggerModel, state: &mut TrainState, grads: &Gradients) {
    let rho = model.config.adadelta_rho;
    let eps = model.config.adadelta_epsilon;
    let mut params = model.params.entries_mut();
    let mut acc_grad = state.acc_grad.entries_mut();
    let mut acc_update = state.acc_update.entries_mut();
    let gradients = grads.0.entries();
    debug_assert_eq!(params.len(), gradients.len());

    for i in 0..params.len() {
        debug_assert_eq!(params[i].0, gradients[i].0, "parameter trees must align");
        Zip::from(&mut *params[i].1)
            .and(&mut *acc_grad[i].1)
            .and(&mut *acc_update[i].1)
            .and(gradients[i].1)
            .for_each(|p, eg, ex, &g| {
                *eg = rho * *eg + (1.0 - rho) * g * g;
                let step = -((*ex + eps).sqrt() / (*eg + eps).sqrt()) * g;
                *ex = rho * *ex + (1.0 - rho) * step * step;
                *p += step;
            });
    }
}
