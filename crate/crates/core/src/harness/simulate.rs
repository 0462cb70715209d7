//! Field sampling plus degradation for one input sequence.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{RunConfig, SIMULATE_FRAME_CAP, SIMULATE_SIZE_CAP};
use super::image_io::write_png_frames;
use super::tensor_file::{write_array, write_atomic};
use crate::error::{Error, Result};
use crate::losses::{psnr, ssim};
use crate::tensor::FrameSequence;
use crate::turbsim::{
    build_psf_basis, convolve_replicate, psf_from_phase, Simulator, DIRECT_SIZE_CAP,
};
use crate::zernike::{sample_zernike_field, ZernikeBasis, ZernikeField};

/// Fidelity required of the low-rank path against the direct path.
pub const SELF_CHECK_MIN_PSNR_DB: f64 = 35.0;

/// Zernike tables and a PSF basis fitted to fields drawn from `cfg`.
pub fn build_simulator(cfg: &RunConfig) -> Result<Simulator> {
    let t = &cfg.turbulence;
    let zb = ZernikeBasis::build(t.channels, t.zernike_grid)?;
    let s = cfg.basis.sample_size;
    let fields = cfg
        .basis
        .strength_scales
        .iter()
        .enumerate()
        .map(|(i, &scale)| {
            let spec = t.field_spec(scale)?;
            sample_zernike_field(&spec, (1, s, s, t.channels), cfg.seed.wrapping_add(1000 + i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let basis = build_psf_basis(&fields, &zb, &cfg.basis_config())?;
    Simulator::new(zb, basis, t.sim_config())
}

/// Draws the coefficient field for `image` under `cfg` and `seed`.
pub fn sample_field(cfg: &RunConfig, image: &FrameSequence, seed: u64) -> Result<ZernikeField> {
    let (t, h, w, _) = image.dims();
    let spec = cfg.turbulence.field_spec(1.0)?;
    sample_zernike_field(&spec, (t, h, w, cfg.turbulence.channels), seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfCheck {
    /// `"diffraction"` for zero-variance configs, `"direct"` otherwise.
    pub reference: String,
    pub relative_error: f64,
    pub psnr_db: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateMeta {
    pub dims: [usize; 4],
    pub seed: u64,
    pub kernel_size: usize,
    pub basis_k: usize,
    pub basis_reconstruction_bound: f64,
    pub psnr_db: f64,
    pub ssim: f64,
    pub self_check: Option<SelfCheck>,
    pub config: RunConfig,
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub degraded: FrameSequence,
    pub field: ZernikeField,
    pub meta: SimulateMeta,
}

fn check_caps(image: &FrameSequence) -> Result<()> {
    let (t, h, w, _) = image.dims();
    if h > SIMULATE_SIZE_CAP || w > SIMULATE_SIZE_CAP || t > SIMULATE_FRAME_CAP {
        return Err(Error::SizeCap(format!(
            "{t} frames of {h}x{w}; limits are {SIMULATE_FRAME_CAP} frames of {SIMULATE_SIZE_CAP}x{SIMULATE_SIZE_CAP}"
        )));
    }
    Ok(())
}

fn relative_l2(a: &FrameSequence, b: &FrameSequence) -> f64 {
    let num: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.data().iter().map(|y| y * y).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

/// Compares the noise-free low-rank output with a reference: the
/// diffraction-limited image when the config has no turbulence, the direct
/// per-pixel path otherwise.
pub fn self_check(
    sim: &Simulator,
    cfg: &RunConfig,
    image: &FrameSequence,
    field: &ZernikeField,
) -> Result<SelfCheck> {
    let clean = sim.degrade(image, field, 0.0, 0)?;
    let (_, h, w, _) = image.dims();
    if cfg.turbulence.is_still() {
        let ks = cfg.turbulence.kernel_size;
        let psf = psf_from_phase(&ndarray::Array2::zeros((ks, ks)), cfg.turbulence.aperture_ratio)?;
        let reference = convolve_replicate(image, &psf)?;
        // Kernel error is bounded in L2 relative to the PSF; convolution can
        // amplify it by at most the kernel's L1/L2 ratio (≤ ks). The extra
        // slack covers the single-precision transform.
        let tolerance = ks as f64 * sim.psf_basis().reconstruction_bound() + 1e-5;
        let relative_error = relative_l2(&clean, &reference);
        return Ok(SelfCheck {
            reference: "diffraction".into(),
            relative_error,
            psnr_db: psnr(&clean, &reference, 1.0)?,
            tolerance,
            passed: relative_error <= tolerance,
        });
    }
    if h > DIRECT_SIZE_CAP || w > DIRECT_SIZE_CAP {
        return Err(Error::SizeCap(format!(
            "self-check against the direct path needs frames up to {DIRECT_SIZE_CAP}x{DIRECT_SIZE_CAP}"
        )));
    }
    let reference = sim.degrade_direct(image, field, 0.0, 0)?;
    let psnr_db = psnr(&clean, &reference, 1.0)?;
    Ok(SelfCheck {
        reference: "direct".into(),
        relative_error: relative_l2(&clean, &reference),
        psnr_db,
        tolerance: SELF_CHECK_MIN_PSNR_DB,
        passed: psnr_db > SELF_CHECK_MIN_PSNR_DB,
    })
}

/// Samples a field and degrades `image` with it. Noise is drawn from `seed + 1`.
pub fn simulate(sim: &Simulator, cfg: &RunConfig, image: &FrameSequence, seed: u64, with_self_check: bool) -> Result<SimulateOutput> {
    check_caps(image)?;
    let field = sample_field(cfg, image, seed)?;
    let degraded = sim.degrade(image, &field, cfg.turbulence.noise_sigma, seed.wrapping_add(1))?;
    let check = if with_self_check { Some(self_check(sim, cfg, image, &field)?) } else { None };
    let (t, h, w, c) = image.dims();
    let meta = SimulateMeta {
        dims: [t, h, w, c],
        seed,
        kernel_size: cfg.turbulence.kernel_size,
        basis_k: sim.psf_basis().k(),
        basis_reconstruction_bound: sim.psf_basis().reconstruction_bound(),
        psnr_db: psnr(image, &degraded, 1.0)?,
        ssim: ssim(image, &degraded)?,
        self_check: check,
        config: cfg.clone(),
    };
    Ok(SimulateOutput { degraded, field, meta })
}

/// Writes `degraded.tsm`, `field.tsm`, `meta.json`, `metrics.csv` and PNG frames.
pub fn write_outputs(out: &SimulateOutput, dir: &Path, sequence_id: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_array(&dir.join("degraded.tsm"), &out.degraded.data().clone().into_dyn())?;
    write_array(&dir.join("field.tsm"), &out.field.coeffs().clone().into_dyn())?;
    write_png_frames(&out.degraded, dir, "degraded")?;
    write_atomic(&dir.join("meta.json"), serde_json::to_string_pretty(&out.meta)?.as_bytes())?;
    let csv = format!("sequence_id,psnr,ssim\n{sequence_id},{:.6},{:.6}\n", out.meta.psnr_db, out.meta.ssim);
    write_atomic(&dir.join("metrics.csv"), csv.as_bytes())
}
