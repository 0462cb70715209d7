//! Latent phase distortion: reparameterized sampling, the KL term, and the
//! modulated re-blur network.

mod latent;
mod modulate;
mod rbn;

pub use latent::{
    kl_loss, sample_latent, sample_latent_vjp, KlForm, LatentPhaseDistortion, LatentSample, NEUTRAL_LOG_SIGMA,
};
pub use modulate::{modulate, modulate_vjp};
pub use rbn::{
    rbn_forward, rbn_value_and_vjp, rbn_vjp, rbn_with_latent, zero_tilt_like, Dense, ModulatorStack, RbnArch,
    RbnDescriptor, RbnGradients, RbnWeights, SCALES,
};
