use ndarray::{Array4, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_same_shape, shape_err, Error, Result};
use crate::tensor::TiltField;

/// Tilt field plus per-pixel Gaussian statistics `(μ, log σ)` of the blur latent.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPhaseDistortion {
    pub tilt: TiltField,
    /// `T × H × W × C_b`.
    pub mu: Array4<f64>,
    /// `T × H × W × C_b`.
    pub log_sigma: Array4<f64>,
}

/// `log σ` used to stand in for a zero-variance latent.
pub const NEUTRAL_LOG_SIGMA: f64 = -30.0;

impl LatentPhaseDistortion {
    pub fn new(tilt: TiltField, mu: Array4<f64>, log_sigma: Array4<f64>) -> Result<Self> {
        ensure_same_shape(mu.shape(), log_sigma.shape(), "mu vs log_sigma")?;
        let (t, h, w, _) = mu.dim();
        if tilt.dims() != (t, h, w) {
            return Err(shape_err(format!("tilt {:?} vs latent {:?}", tilt.dims(), mu.dim())));
        }
        if log_sigma.iter().chain(mu.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("latent statistics"));
        }
        Ok(Self { tilt, mu, log_sigma })
    }

    /// Zero tilt, zero mean, negligible spread.
    pub fn neutral(t: usize, h: usize, w: usize, blur_channels: usize) -> Self {
        Self {
            tilt: TiltField::zeros(t, h, w),
            mu: Array4::zeros((t, h, w, blur_channels)),
            log_sigma: Array4::from_elem((t, h, w, blur_channels), NEUTRAL_LOG_SIGMA),
        }
    }

    pub fn blur_channels(&self) -> usize {
        self.mu.dim().3
    }

    /// Packed `T × H × W × (2 + 2 C_b)` tensor: tilt, then μ, then log σ.
    pub fn to_stacked(&self) -> Array4<f64> {
        let (t, h, w, cb) = self.mu.dim();
        let tilt = self.tilt.shifts();
        Array4::from_shape_fn((t, h, w, 2 + 2 * cb), |(f, y, x, c)| match c {
            0 | 1 => tilt[[f, y, x, c]],
            c if c < 2 + cb => self.mu[[f, y, x, c - 2]],
            c => self.log_sigma[[f, y, x, c - 2 - cb]],
        })
    }

    pub fn from_stacked(stacked: &Array4<f64>) -> Result<Self> {
        let (t, h, w, n) = stacked.dim();
        if n < 4 || n % 2 != 0 {
            return Err(shape_err(format!("stacked LPD needs 2 + 2·C_b channels, got {n}")));
        }
        let cb = (n - 2) / 2;
        let tilt = TiltField::new(Array4::from_shape_fn((t, h, w, 2), |(f, y, x, c)| stacked[[f, y, x, c]]))?;
        let mu = Array4::from_shape_fn((t, h, w, cb), |(f, y, x, c)| stacked[[f, y, x, 2 + c]]);
        let ls = Array4::from_shape_fn((t, h, w, cb), |(f, y, x, c)| stacked[[f, y, x, 2 + cb + c]]);
        Self::new(tilt, mu, ls)
    }
}

/// A reparameterized draw `ã = μ + exp(log σ) ⊙ ε` with its noise.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub value: Array4<f64>,
    pub eps: Array4<f64>,
}

pub fn sample_latent(mu: &Array4<f64>, log_sigma: &Array4<f64>, seed: u64) -> Result<LatentSample> {
    ensure_same_shape(mu.shape(), log_sigma.shape(), "mu vs log_sigma")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = Array4::from_shape_simple_fn(mu.dim(), || StandardNormal.sample(&mut rng));
    let mut value = Array4::zeros(mu.dim());
    Zip::from(&mut value)
        .and(mu)
        .and(log_sigma)
        .and(&eps)
        .for_each(|v, &m, &ls, &e| *v = m + ls.exp() * e);
    Ok(LatentSample { value, eps })
}

/// Cotangents of [`sample_latent`]: `∂ã/∂μ = I`, `∂ã/∂log σ = diag(σ ε)`.
pub fn sample_latent_vjp(
    log_sigma: &Array4<f64>,
    eps: &Array4<f64>,
    cotangent: &Array4<f64>,
) -> Result<(Array4<f64>, Array4<f64>)> {
    ensure_same_shape(log_sigma.shape(), eps.shape(), "log_sigma vs eps")?;
    ensure_same_shape(log_sigma.shape(), cotangent.shape(), "log_sigma vs cotangent")?;
    let mut g_ls = Array4::zeros(log_sigma.dim());
    Zip::from(&mut g_ls)
        .and(log_sigma)
        .and(eps)
        .and(cotangent)
        .for_each(|g, &ls, &e, &c| *g = c * ls.exp() * e);
    Ok((cotangent.clone(), g_ls))
}

/// Which KL expression [`kl_loss`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KlForm {
    /// `-0.5 · mean(log σ² + 1 − μ² − σ²)` over every element: the KL of
    /// `N(μ, σ²)` from `N(0, 1)` per element.
    #[default]
    Standard,
    /// `-0.5 / (H·W) · Σ (log σ² + 1 − μ − σ)` summed over all frames and
    /// channels, exactly as the training objective prints it.
    AsPrinted,
}

pub fn kl_loss(mu: &Array4<f64>, log_sigma: &Array4<f64>, form: KlForm) -> Result<f64> {
    ensure_same_shape(mu.shape(), log_sigma.shape(), "mu vs log_sigma")?;
    if mu.iter().chain(log_sigma.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("KL inputs"));
    }
    let (t, h, w, cb) = mu.dim();
    if t * h * w * cb == 0 {
        return Err(shape_err("empty KL inputs"));
    }
    let sum: f64 = match form {
        KlForm::Standard => Zip::from(mu).and(log_sigma).fold(0.0, |acc, &m, &ls| {
            acc + (2.0 * ls + 1.0 - m * m - (2.0 * ls).exp())
        }),
        KlForm::AsPrinted => Zip::from(mu)
            .and(log_sigma)
            .fold(0.0, |acc, &m, &ls| acc + (2.0 * ls + 1.0 - m - ls.exp())),
    };
    let hw = (h * w) as f64;
    Ok(match form {
        KlForm::Standard => -0.5 * sum / (hw * (t * cb) as f64),
        KlForm::AsPrinted => -0.5 * sum / hw,
    })
}
