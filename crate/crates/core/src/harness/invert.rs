//! Gradient-descent recovery of an LPD through the re-blurring network.

use std::fmt::Write as _;

use ndarray::{Array4, Zip};
use serde::{Deserialize, Serialize};

use super::config::{InvertSection, INVERT_FRAME_CAP, INVERT_SIZE_CAP};
use crate::error::{shape_err, Error, Result};
use crate::losses::{charbonnier, charbonnier_grad, CHARBONNIER_EPS};
use crate::lpd::{rbn_forward, rbn_value_and_vjp, LatentPhaseDistortion, RbnWeights};
use crate::tensor::{FrameSequence, TiltField};

/// Log σ the optimizer starts from.
pub const INITIAL_LOG_SIGMA: f64 = -3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub step_size: f64,
    pub accepted: bool,
    /// Against the known tilt, when one is supplied.
    pub tilt_rmse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct InvertResult {
    pub lpd: LatentPhaseDistortion,
    /// Record 0 is the starting point; record `i` follows step `i`.
    pub curve: Vec<StepRecord>,
}

impl InvertResult {
    pub fn initial_loss(&self) -> f64 {
        self.curve[0].loss
    }

    pub fn final_loss(&self) -> f64 {
        self.curve.last().expect("curve has the initial record").loss
    }

    pub fn final_tilt_rmse(&self) -> Option<f64> {
        self.curve.last().and_then(|r| r.tilt_rmse)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,loss,step_size,accepted,tilt_rmse\n");
        for r in &self.curve {
            let rmse = r.tilt_rmse.map_or(String::new(), |v| format!("{v:.9}"));
            let _ = writeln!(s, "{},{:.12},{:.9},{},{}", r.step, r.loss, r.step_size, r.accepted as u8, rmse);
        }
        s
    }
}

/// Root mean square of the per-pixel shift error, in pixels.
pub fn tilt_rmse(a: &TiltField, b: &TiltField) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(shape_err("tilt fields differ in size"));
    }
    let (t, h, w) = a.dims();
    let sq: f64 = Zip::from(a.shifts()).and(b.shifts()).fold(0.0, |acc, x, y| acc + (x - y) * (x - y));
    Ok((sq / (t * h * w) as f64).sqrt())
}

fn check_inputs(clean: &FrameSequence, degraded: &FrameSequence) -> Result<()> {
    if clean.dims() != degraded.dims() {
        return Err(shape_err(format!("clean {:?} vs degraded {:?}", clean.dims(), degraded.dims())));
    }
    let (t, h, w, _) = clean.dims();
    if t > INVERT_FRAME_CAP || h > INVERT_SIZE_CAP || w > INVERT_SIZE_CAP {
        return Err(Error::SizeCap(format!(
            "inversion takes up to {INVERT_FRAME_CAP} frames of {INVERT_SIZE_CAP}x{INVERT_SIZE_CAP}"
        )));
    }
    Ok(())
}

fn objective(clean: &FrameSequence, degraded: &FrameSequence, lpd: &LatentPhaseDistortion, w: &RbnWeights, seed: u64) -> Result<f64> {
    charbonnier(&rbn_forward(clean, lpd, w, seed)?, degraded, CHARBONNIER_EPS)
}

fn stepped(lpd: &LatentPhaseDistortion, g_tilt: &Array4<f64>, g_mu: &Array4<f64>, g_ls: &Array4<f64>, step: f64) -> Result<LatentPhaseDistortion> {
    let tilt = lpd.tilt.shifts() - &(g_tilt * step);
    let mu = &lpd.mu - &(g_mu * step);
    let ls = &lpd.log_sigma - &(g_ls * step);
    LatentPhaseDistortion::new(TiltField::new(tilt)?, mu, ls)
}

/// Minimizes `charbonnier(rbn_forward(clean, lpd), degraded)` over tilt, μ
/// and log σ from `init`. Each step moves along the negative gradient,
/// scaled so the step size is per pixel; a step that raises the loss is
/// rejected and the step size halved. The latent noise is fixed by `seed`.
pub fn invert(
    clean: &FrameSequence,
    degraded: &FrameSequence,
    weights: &RbnWeights,
    init: LatentPhaseDistortion,
    cfg: &InvertSection,
    seed: u64,
    truth: Option<&TiltField>,
) -> Result<InvertResult> {
    check_inputs(clean, degraded)?;
    let (t, h, w, _) = clean.dims();
    let pixels = (t * h * w) as f64;
    let rmse = |lpd: &LatentPhaseDistortion| truth.map(|tr| tilt_rmse(&lpd.tilt, tr)).transpose();

    let mut lpd = init;
    let mut step = cfg.step_size;
    let (mut loss, mut grads) = {
        let (out, g) = rbn_value_and_vjp(clean, &lpd, weights, seed, |out| charbonnier_grad(out, degraded, CHARBONNIER_EPS))?;
        (charbonnier(&out, degraded, CHARBONNIER_EPS)?, g)
    };
    if !loss.is_finite() {
        return Err(Error::Diverged { step: 0 });
    }
    let mut curve = vec![StepRecord { step: 0, loss, step_size: step, accepted: true, tilt_rmse: rmse(&lpd)? }];
    for i in 1..=cfg.steps {
        let scale = step * pixels;
        let candidate = stepped(&lpd, &grads.tilt, &grads.mu, &grads.log_sigma, scale);
        let (cand_loss, cand) = match candidate {
            Ok(c) => (objective(clean, degraded, &c, weights, seed)?, Some(c)),
            // Overflow or a tilt pushed off the frame both count as a runaway step.
            Err(Error::NonFinite(_) | Error::InvalidArgument(_)) => (f64::NAN, None),
            Err(e) => return Err(e),
        };
        if cand_loss.is_nan() && step <= cfg.min_step {
            return Err(Error::Diverged { step: i });
        }
        let accepted = cand_loss <= loss;
        if let (true, Some(c)) = (accepted, cand) {
            lpd = c;
            loss = cand_loss;
            grads = rbn_value_and_vjp(clean, &lpd, weights, seed, |out| charbonnier_grad(out, degraded, CHARBONNIER_EPS))?.1;
        } else {
            step = (step * 0.5).max(cfg.min_step);
        }
        curve.push(StepRecord { step: i, loss, step_size: step, accepted, tilt_rmse: rmse(&lpd)? });
    }
    Ok(InvertResult { lpd, curve })
}

/// Starting point: zero tilt and μ, `log σ` at [`INITIAL_LOG_SIGMA`].
pub fn initial_lpd(t: usize, h: usize, w: usize, latent_channels: usize) -> LatentPhaseDistortion {
    LatentPhaseDistortion {
        tilt: TiltField::zeros(t, h, w),
        mu: Array4::zeros((t, h, w, latent_channels)),
        log_sigma: Array4::from_elem((t, h, w, latent_channels), INITIAL_LOG_SIGMA),
    }
}

/// A self-consistent problem with known answer.
#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    pub clean: FrameSequence,
    pub degraded: FrameSequence,
    pub truth: LatentPhaseDistortion,
    pub weights: RbnWeights,
}

/// Smooth textured frames and a smooth tilt/latent field of known size;
/// `degraded` is produced by the network itself with zero noise.
pub fn synthetic_problem(cfg: &InvertSection, seed: u64) -> Result<SyntheticProblem> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (t, n) = (cfg.frames, cfg.size);
    let c = cfg.arch.image_channels;
    let mut wave = || {
        let fx: f64 = rng.random_range(-1.0..1.0);
        let fy: f64 = rng.random_range(-1.0..1.0);
        let ph: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        (fx, fy, ph)
    };
    // Image: per channel, four plane waves with periods of 8 to 20 pixels.
    let tex: Vec<Vec<(f64, f64, f64)>> = (0..c).map(|_| (0..4).map(|_| wave()).collect()).collect();
    let k_img = |(fx, fy, _): (f64, f64, f64)| {
        let norm = (fx * fx + fy * fy).sqrt().max(1e-3);
        let period = 8.0 + 12.0 * (fx.abs() + fy.abs()) / 2.0;
        (std::f64::consts::TAU * fx / norm / period, std::f64::consts::TAU * fy / norm / period)
    };
    let clean = FrameSequence::from_fn((t, n, n, c), |(f, y, x, ch)| {
        let v: f64 = tex[ch]
            .iter()
            .map(|&wv| {
                let (kx, ky) = k_img(wv);
                (kx * x as f64 + ky * y as f64 + wv.2 + f as f64 * 0.3).sin()
            })
            .sum();
        0.5 + 0.1 * v
    });
    // Tilt and μ: low-frequency waves across the whole frame.
    let slow: Vec<(f64, f64, f64)> = (0..6).map(|_| wave()).collect();
    let field = |i: usize, f: usize, y: usize, x: usize| {
        let (fx, fy, ph) = slow[i];
        let s = std::f64::consts::TAU / n as f64;
        (s * (fx * x as f64 + fy * y as f64) * 1.5 + ph + f as f64 * 0.5).sin()
    };
    let a = cfg.tilt_amplitude / 2.0;
    let tilt = TiltField::new(Array4::from_shape_fn((t, n, n, 2), |(f, y, x, k)| {
        a * (field(2 * k, f, y, x) + field(2 * k + 1, f, y, x))
    }))?;
    let lc = cfg.arch.latent_channels;
    let mu = Array4::from_shape_fn((t, n, n, lc), |(f, y, x, _)| field(4, f, y, x));
    let log_sigma = Array4::from_shape_fn((t, n, n, lc), |(f, y, x, _)| -2.0 + 0.5 * field(5, f, y, x));
    let truth = LatentPhaseDistortion::new(tilt, mu, log_sigma)?;
    let weights = RbnWeights::random(cfg.arch, seed.wrapping_add(17), cfg.residual_scale)?;
    let degraded = rbn_forward(&clean, &truth, &weights, seed)?;
    Ok(SyntheticProblem { clean, degraded, truth, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> InvertSection {
        InvertSection { size: 16, steps: 30, ..InvertSection::default() }
    }

    #[test]
    fn rmse_of_a_constant_offset() {
        let a = TiltField::constant(1, 4, 4, 0.3, -0.4);
        let b = TiltField::zeros(1, 4, 4);
        assert!((tilt_rmse(&a, &b).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn loss_never_increases_and_runs_repeat() {
        let cfg = small();
        let p = synthetic_problem(&cfg, 4).unwrap();
        let init = initial_lpd(1, 16, 16, 1);
        let a = invert(&p.clean, &p.degraded, &p.weights, init.clone(), &cfg, 4, Some(&p.truth.tilt)).unwrap();
        assert!(a.curve.windows(2).all(|w| w[1].loss <= w[0].loss));
        assert!(a.final_loss() < a.initial_loss());
        let b = invert(&p.clean, &p.degraded, &p.weights, init, &cfg, 4, Some(&p.truth.tilt)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn oversized_problems_are_rejected() {
        let big = FrameSequence::zeros(1, 72, 72, 3);
        let w = RbnWeights::identity(Default::default()).unwrap();
        let r = invert(&big, &big, &w, initial_lpd(1, 72, 72, 1), &small(), 0, None);
        assert!(matches!(r, Err(Error::SizeCap(_))));
    }
}
