//! The turbulence degradation operator and its gradients.

mod basis;
mod blur;
mod degrade;
mod psf;
mod warp;

pub use basis::{build_psf_basis, PsfBasis, PsfBasisConfig, PsfBasisMeta};
pub use blur::{basis_blur, basis_blur_vjp, blur_weights, blur_weights_strided, convolve_replicate, BlurPlan, BlurWeightField};
pub use degrade::{add_noise, tilt_from_field, SimConfig, Simulator, DIRECT_SIZE_CAP};
pub use psf::{aperture_mask, psf_from_phase, PsfSynth};
pub use warp::{warp, warp_vjp};
