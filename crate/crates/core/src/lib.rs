//! Differentiable atmospheric-turbulence degradation and selective
//! state-space kernels.
//!
//! * [`zernike`]: Noll-ordered Zernike tables and random coefficient fields.
//! * [`turbsim`]: warp, PSF synthesis, low-rank PSF basis blur, and VJPs.
//! * [`lpd`]: latent phase distortion sampling, KL terms, and the
//!   multi-scale re-blur network with reverse-mode gradients.
//! * [`ssm`]: ZOH discretization, sequential and parallel scans, selective
//!   and guided parameterizations, gating, bidirectional composition.
//! * [`scanorder`]: space-first, time-first and local Hilbert flattenings.
//! * [`losses`]: Charbonnier, composite losses, PSNR/SSIM, EMA updates.
//! * [`harness`]: tensor files, configuration, benchmarks, inversion, checks.

pub mod error;
pub(crate) mod fft;
pub mod harness;
pub mod losses;
pub mod lpd;
pub mod scanorder;
pub mod ssm;
pub mod tensor;
pub mod turbsim;
pub mod zernike;

pub use error::{Error, Result};
pub use tensor::{FrameSequence, TiltField};
