//! Charbonnier loss, the composite training objectives, PSNR/SSIM and the
//! mean-teacher EMA update.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_shape, shape_err, Error, Result};
use crate::lpd::{kl_loss, KlForm};
use crate::tensor::FrameSequence;

pub const CHARBONNIER_EPS: f64 = 1e-3;
/// Returned by [`psnr`] for identical inputs.
pub const PSNR_CAP_DB: f64 = 99.0;
pub const EMA_BETA: f64 = 0.999;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub alpha: f64,
    pub alpha_p: f64,
    pub alpha_k: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha: 0.2, alpha_p: 0.01, alpha_k: 0.001 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.alpha, self.alpha_p, self.alpha_k].iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("loss weights must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Mean of `sqrt((a − b)² + eps²)`.
pub fn charbonnier(a: &FrameSequence, b: &FrameSequence, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    ensure_same_shape(a.data().shape(), b.data().shape(), "charbonnier")?;
    let e2 = eps * eps;
    let sum: f64 = a.data().iter().zip(b.data().iter()).map(|(x, y)| ((x - y) * (x - y) + e2).sqrt()).sum();
    Ok(sum / a.data().len() as f64)
}

/// Gradient of [`charbonnier`] with respect to `a`.
pub fn charbonnier_grad(a: &FrameSequence, b: &FrameSequence, eps: f64) -> Result<ndarray::Array4<f64>> {
    ensure_same_shape(a.data().shape(), b.data().shape(), "charbonnier")?;
    let n = a.data().len() as f64;
    let e2 = eps * eps;
    Ok(ndarray::Zip::from(a.data()).and(b.data()).map_collect(|&x, &y| (x - y) / ((x - y) * (x - y) + e2).sqrt() / n))
}

/// Inputs of the re-degradation objective.
#[derive(Debug, Clone, Copy)]
pub struct ReturbTerms<'a> {
    /// Clean estimate warped by the estimated tilt, and the matching target.
    pub tilt_pair: (&'a FrameSequence, &'a FrameSequence),
    /// Re-degraded estimate and the observed degraded frames.
    pub returb_pair: (&'a FrameSequence, &'a FrameSequence),
    pub mu: &'a ndarray::Array4<f64>,
    pub log_sigma: &'a ndarray::Array4<f64>,
}

/// `L_c(tilt pair) + L_c(returb pair) + α_k · KL(μ, log σ)`.
pub fn returb_loss(terms: &ReturbTerms<'_>, weights: &LossWeights, kl_form: KlForm) -> Result<f64> {
    weights.validate()?;
    let tilt = charbonnier(terms.tilt_pair.0, terms.tilt_pair.1, CHARBONNIER_EPS)?;
    let turb = charbonnier(terms.returb_pair.0, terms.returb_pair.1, CHARBONNIER_EPS)?;
    let kl = if weights.alpha_k == 0.0 { 0.0 } else { kl_loss(terms.mu, terms.log_sigma, kl_form)? };
    Ok(tilt + turb + weights.alpha_k * kl)
}

/// Restoration-side terms. The perceptual term needs pretrained features and
/// is not computed here; its slot is kept so the structure is complete.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestoreTerms {
    pub charbonnier: f64,
    pub perceptual: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TotalLoss {
    pub total: f64,
    pub restore: f64,
    pub returb: f64,
    pub perceptual_skipped: bool,
}

/// `restore + α · returb`, with `restore = L_c + α_p · L_p` when `L_p` is given.
pub fn total_loss(restore: RestoreTerms, returb: f64, weights: &LossWeights) -> Result<TotalLoss> {
    weights.validate()?;
    let r = match restore.perceptual {
        Some(p) => restore.charbonnier + weights.alpha_p * p,
        None => restore.charbonnier,
    };
    Ok(TotalLoss {
        total: r + weights.alpha * returb,
        restore: r,
        returb,
        perceptual_skipped: restore.perceptual.is_none(),
    })
}

/// `10·log10(peak² / MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &FrameSequence, b: &FrameSequence, peak: f64) -> Result<f64> {
    ensure_same_shape(a.data().shape(), b.data().shape(), "psnr")?;
    if !(peak > 0.0) {
        return Err(Error::InvalidArgument("peak must be positive".into()));
    }
    let mse = a.data().iter().zip(b.data().iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> Vec<f64> {
    let c = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW).map(|i| (-(i as f64 - c).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable valid-mode filtering.
fn filter_valid(img: &ArrayView2<f64>, g: &[f64]) -> Array2<f64> {
    let (h, w) = img.dim();
    let n = g.len();
    let rows = Array2::from_shape_fn((h, w - n + 1), |(y, x)| (0..n).map(|k| g[k] * img[[y, x + k]]).sum::<f64>());
    Array2::from_shape_fn((h - n + 1, w - n + 1), |(y, x)| (0..n).map(|k| g[k] * rows[[y + k, x]]).sum::<f64>())
}

fn ssim_plane(a: &ArrayView2<f64>, b: &ArrayView2<f64>, g: &[f64]) -> (f64, usize) {
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    let mu_a = filter_valid(a, g);
    let mu_b = filter_valid(b, g);
    let aa = filter_valid(&(a * a).view(), g);
    let bb = filter_valid(&(b * b).view(), g);
    let ab = filter_valid(&(a * b).view(), g);
    let mut sum = 0.0;
    for ((((&ma, &mb), &saa), &sbb), &sab) in mu_a.iter().zip(&mu_b).zip(&aa).zip(&bb).zip(&ab) {
        let va = saa - ma * ma;
        let vb = sbb - mb * mb;
        let cov = sab - ma * mb;
        sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    (sum, mu_a.len())
}

/// Mean SSIM over all valid 11×11 Gaussian windows (σ = 1.5) of every frame
/// and channel, for data in `[0, 1]`.
pub fn ssim(a: &FrameSequence, b: &FrameSequence) -> Result<f64> {
    ensure_same_shape(a.data().shape(), b.data().shape(), "ssim")?;
    let (t, h, w, c) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(shape_err(format!("frames must be at least {SSIM_WINDOW}x{SSIM_WINDOW}")));
    }
    let g = gaussian_window();
    let (mut sum, mut count) = (0.0, 0);
    for f in 0..t {
        let (fa, fb) = (a.frame(f), b.frame(f));
        for ch in 0..c {
            let (s, n) = ssim_plane(&fa.index_axis(Axis(2), ch), &fb.index_axis(Axis(2), ch), &g);
            sum += s;
            count += n;
        }
    }
    Ok(sum / count as f64)
}

/// `θ_t ← β θ_t + (1 − β) θ_s`, in place.
pub fn ema_update(theta_t: &mut [f64], theta_s: &[f64], beta: f64) -> Result<()> {
    if theta_t.len() != theta_s.len() {
        return Err(shape_err(format!("teacher has {} parameters, student {}", theta_t.len(), theta_s.len())));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("beta must lie in [0, 1], got {beta}")));
    }
    if theta_s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("student parameters"));
    }
    for (t, s) in theta_t.iter_mut().zip(theta_s) {
        *t = beta * *t + (1.0 - beta) * s;
    }
    Ok(())
}
