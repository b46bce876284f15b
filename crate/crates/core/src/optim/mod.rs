//! Losses and the Adam optimizer.

mod adam;
mod loss;

pub use adam::{adam_step, scaled_adam_step, AdamConfig, AdamState};
pub use loss::{cross_entropy, mse_loss, LossValue, PROB_CLAMP};
