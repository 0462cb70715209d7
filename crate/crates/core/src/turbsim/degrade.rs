//! Tilt-then-blur degradation: `I = Σ_k ψ_k ⊛ (β_k ⊙ warp(J; tilt)) + n`.

use ndarray::{Array2, Array4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::PsfBasis;
use std::sync::{Arc, Mutex};

use super::blur::{blur_weights_strided, BlurPlan, BlurWeightField};
use super::psf::PsfSynth;
use super::warp::warp;
use crate::error::{shape_err, Error, Result};
use crate::tensor::{FrameSequence, TiltField};
use crate::zernike::{ZernikeBasis, ZernikeField};

/// Largest frame side accepted by [`Simulator::degrade_direct`].
pub const DIRECT_SIZE_CAP: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Aperture diameter relative to the kernel grid.
    pub aperture_ratio: f64,
    /// Pixels of shift per unit tilt coefficient; `None` uses `kernel_size / 4`.
    pub tilt_scale: Option<f64>,
    /// Node spacing for blur-weight evaluation on the low-rank path.
    pub weight_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { aperture_ratio: 1.0, tilt_scale: None, weight_stride: 8 }
    }
}

impl SimConfig {
    pub fn tilt_scale_for(&self, kernel_size: usize) -> f64 {
        self.tilt_scale.unwrap_or(kernel_size as f64 / 4.0)
    }
}

/// Pixel shifts from the tilt coefficients (channels 0 and 1).
pub fn tilt_from_field(field: &ZernikeField, scale: f64) -> Result<TiltField> {
    let (t, h, w, _) = field.dims();
    let c = field.coeffs();
    TiltField::new(Array4::from_shape_fn((t, h, w, 2), |(f, y, x, k)| scale * c[[f, y, x, k]]))
}

/// Adds seeded white Gaussian noise in `(t, y, x, c)` order.
pub fn add_noise(image: &mut FrameSequence, sigma: f64, seed: u64) -> Result<()> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("noise sigma {sigma} must be >= 0")));
    }
    if sigma == 0.0 {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in image.data_mut().iter_mut() {
        let n: f64 = StandardNormal.sample(&mut rng);
        *v += sigma * n;
    }
    Ok(())
}

/// Zernike tables, PSF basis and options for one kernel size.
#[derive(Debug, Clone)]
pub struct Simulator {
    zernike: ZernikeBasis,
    psf_basis: PsfBasis,
    config: SimConfig,
    /// Kernel spectra for the most recent frame size.
    plan: Arc<Mutex<Option<Arc<BlurPlan>>>>,
}

impl Simulator {
    pub fn new(zernike: ZernikeBasis, psf_basis: PsfBasis, config: SimConfig) -> Result<Self> {
        if (psf_basis.aperture_ratio() - config.aperture_ratio).abs() > 1e-12 {
            return Err(Error::InvalidArgument(
                "PSF basis was built for a different aperture ratio".into(),
            ));
        }
        if config.weight_stride == 0 {
            return Err(Error::InvalidArgument("weight stride must be >= 1".into()));
        }
        Ok(Self { zernike, psf_basis, config, plan: Arc::default() })
    }

    pub fn zernike(&self) -> &ZernikeBasis {
        &self.zernike
    }

    pub fn psf_basis(&self) -> &PsfBasis {
        &self.psf_basis
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    fn check(&self, image: &FrameSequence, field: &ZernikeField) -> Result<()> {
        let (t, h, w, _) = image.dims();
        let (ft, fh, fw, _) = field.dims();
        if (t, h, w) != (ft, fh, fw) {
            return Err(shape_err(format!("field {:?} vs image {:?}", field.dims(), image.dims())));
        }
        if field.kernel_size() != self.psf_basis.kernel_size() {
            return Err(shape_err(format!(
                "field kernel size {} but basis built for {}",
                field.kernel_size(),
                self.psf_basis.kernel_size()
            )));
        }
        Ok(())
    }

    pub fn tilt(&self, field: &ZernikeField) -> Result<TiltField> {
        tilt_from_field(field, self.config.tilt_scale_for(field.kernel_size()))
    }

    /// Blur plan for `h × w` frames, built on first use and cached.
    pub fn blur_plan(&self, h: usize, w: usize) -> Arc<BlurPlan> {
        let mut slot = self.plan.lock().unwrap_or_else(|e| e.into_inner());
        match slot.as_ref() {
            Some(p) if p.frame_size() == (h, w) => Arc::clone(p),
            _ => {
                let p = Arc::new(BlurPlan::new(&self.psf_basis, h, w));
                *slot = Some(Arc::clone(&p));
                p
            }
        }
    }

    pub fn blur_weights(&self, field: &ZernikeField) -> Result<BlurWeightField> {
        blur_weights_strided(field, &self.zernike, &self.psf_basis, self.config.weight_stride)
    }

    /// Low-rank degradation: warp, basis blur, additive noise.
    pub fn degrade(&self, image: &FrameSequence, field: &ZernikeField, noise_sigma: f64, seed: u64) -> Result<FrameSequence> {
        self.check(image, field)?;
        let warped = warp(image, &self.tilt(field)?)?;
        let weights = self.blur_weights(field)?;
        let (_, h, w, _) = image.dims();
        let mut out = self.blur_plan(h, w).apply(&warped, &weights)?;
        add_noise(&mut out, noise_sigma, seed)?;
        Ok(out)
    }

    /// Reference path: every pixel's exact PSF applied as a spatially varying
    /// convolution. Each source pixel spreads its own PSF; borders replicate.
    pub fn degrade_direct(
        &self,
        image: &FrameSequence,
        field: &ZernikeField,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<FrameSequence> {
        self.check(image, field)?;
        let (t, h, w, c) = image.dims();
        if h > DIRECT_SIZE_CAP || w > DIRECT_SIZE_CAP {
            return Err(Error::SizeCap(format!(
                "direct path accepts frames up to {DIRECT_SIZE_CAP}x{DIRECT_SIZE_CAP}, got {h}x{w}"
            )));
        }
        let warped = warp(image, &self.tilt(field)?)?;
        let s = field.kernel_size();
        let ratio = self.config.aperture_ratio;
        let n_chan = field.dims().3;
        let resampled = self.zernike.resample(n_chan, s, ratio)?;
        let coeffs = field.coeffs();
        let src = warped.data();
        let r = (s / 2) as isize;

        let frames: Vec<Array4<f64>> = (0..t)
            .into_par_iter()
            .map(|f| {
                let mut synth = PsfSynth::new(s, ratio).expect("validated ratio");
                let mut phase = Array2::zeros((s, s));
                let mut psf = vec![0.0; s * s];
                let mut higher = vec![0.0; n_chan - 3];
                let mut acc = Array4::zeros((1, h, w, c));
                // Range of padded source positions that clamp onto index i.
                let span = |i: usize, n: usize| -> (isize, isize) {
                    let lo = if i == 0 { -r } else { i as isize };
                    let hi = if i + 1 == n { (n - 1) as isize + r } else { i as isize };
                    (lo, hi)
                };
                for y in 0..h {
                    for x in 0..w {
                        for (i, v) in higher.iter_mut().enumerate() {
                            *v = coeffs[[f, y, x, 2 + i]];
                        }
                        phase.fill(0.0);
                        resampled.accumulate_phase(&higher, 3, &mut phase);
                        synth.psf_into(&phase, &mut psf);
                        let (ylo, yhi) = span(y, h);
                        let (xlo, xhi) = span(x, w);
                        for sy in ylo..=yhi {
                            for sx in xlo..=xhi {
                                for u in 0..s {
                                    let oy = sy + u as isize - r;
                                    if oy < 0 || oy >= h as isize {
                                        continue;
                                    }
                                    for v in 0..s {
                                        let ox = sx + v as isize - r;
                                        if ox < 0 || ox >= w as isize {
                                            continue;
                                        }
                                        let p = psf[u * s + v];
                                        for ch in 0..c {
                                            acc[[0, oy as usize, ox as usize, ch]] += p * src[[f, y, x, ch]];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                acc
            })
            .collect();

        let mut out = Array4::zeros((t, h, w, c));
        for (f, frame) in frames.into_iter().enumerate() {
            out.slice_mut(ndarray::s![f..f + 1, .., .., ..]).assign(&frame);
        }
        let mut out = FrameSequence::new(out)?;
        add_noise(&mut out, noise_sigma, seed)?;
        Ok(out)
    }

    /// Exact PSF of one pixel (higher-order modes only).
    pub fn pixel_psf(&self, field: &ZernikeField, t: usize, y: usize, x: usize) -> Result<Array2<f64>> {
        let s = field.kernel_size();
        let n_chan = field.dims().3;
        let resampled = self.zernike.resample(n_chan, s, self.config.aperture_ratio)?;
        let higher: Vec<f64> = (2..n_chan - 1).map(|i| field.coeffs()[[t, y, x, i]]).collect();
        let mut phase = Array2::zeros((s, s));
        resampled.accumulate_phase(&higher, 3, &mut phase);
        Ok(PsfSynth::new(s, self.config.aperture_ratio)?.psf(&phase))
    }
}
