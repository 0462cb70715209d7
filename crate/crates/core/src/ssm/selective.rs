//! Input-dependent (and optionally guidance-dependent) `Δ`, `B`, `C`.
//!
//! Guidance enters additively before the nonlinearity,
//! `Δ = softplus(s_Δ(x) + g_Δ(r))`, `B = s_B(x) + g_B(r)`, `C = s_C(x) + g_C(r)`,
//! so zero guidance maps give back the unguided parameters exactly.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::discretize::{zoh_scalar, StepParams};
use super::scan::{parallel_scan, ScanOptions};
use crate::error::{shape_err, Error, Result};

#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 { x } else { x.exp().ln_1p() }
}

/// Token-wise affine map: rows are tokens, `out = x Wᵀ + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    /// `outputs × inputs`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Affine {
    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        Self { weight: Array2::zeros((outputs, inputs)), bias: Array1::zeros(outputs) }
    }

    pub fn random<R: Rng + ?Sized>(outputs: usize, inputs: usize, scale: f64, rng: &mut R) -> Self {
        let mut draw = || -> f64 {
            let n: f64 = StandardNormal.sample(&mut *rng);
            scale * n
        };
        let weight = Array2::from_shape_simple_fn((outputs, inputs), &mut draw);
        let bias = Array1::from_shape_simple_fn(outputs, &mut draw);
        Self { weight, bias }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.inputs() {
            return Err(shape_err(format!("{} features into a map expecting {}", x.ncols(), self.inputs())));
        }
        Ok(x.dot(&self.weight.t()) + &self.bias)
    }
}

/// Projections of an S6 layer with `F` channels and state size `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectiveProjections {
    /// `F × N`, nonpositive.
    pub a: Array2<f64>,
    pub delta: Affine,
    pub b: Affine,
    pub c: Affine,
    /// Skip weight per channel.
    pub d: Array1<f64>,
}

impl SelectiveProjections {
    pub fn random<R: Rng + ?Sized>(features: usize, state: usize, rng: &mut R) -> Self {
        let a = Array2::from_shape_fn((features, state), |(_, n)| -((n + 1) as f64) * (0.5 + 0.5 * rng.random::<f64>()));
        let s = 1.0 / (features as f64).sqrt();
        Self {
            a,
            delta: Affine::random(features, features, s, rng),
            b: Affine::random(state, features, s, rng),
            c: Affine::random(state, features, s, rng),
            d: Array1::from_shape_simple_fn(features, || rng.random::<f64>() - 0.5),
        }
    }

    pub fn features(&self) -> usize {
        self.a.nrows()
    }

    pub fn state_size(&self) -> usize {
        self.a.ncols()
    }

    fn validate(&self) -> Result<()> {
        let (f, n) = self.a.dim();
        let ok = self.delta.outputs() == f
            && self.delta.inputs() == f
            && self.b.outputs() == n
            && self.b.inputs() == f
            && self.c.outputs() == n
            && self.c.inputs() == f
            && self.d.len() == f;
        if !ok {
            return Err(shape_err("selective projections disagree on F or N"));
        }
        if self.a.iter().any(|&v| !(v <= 0.0)) {
            return Err(Error::InvalidArgument("diagonal A must be nonpositive".into()));
        }
        Ok(())
    }
}

/// Maps from a `G`-dimensional guidance embedding into `Δ`, `B`, `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceProjections {
    pub delta: Affine,
    pub b: Affine,
    pub c: Affine,
}

impl GuidanceProjections {
    /// All-zero maps, the neutral element of additive fusion.
    pub fn zeros(features: usize, state: usize, guidance: usize) -> Self {
        Self {
            delta: Affine::zeros(features, guidance),
            b: Affine::zeros(state, guidance),
            c: Affine::zeros(state, guidance),
        }
    }

    pub fn random<R: Rng + ?Sized>(features: usize, state: usize, guidance: usize, rng: &mut R) -> Self {
        let s = 1.0 / (guidance as f64).sqrt();
        Self {
            delta: Affine::random(features, guidance, s, rng),
            b: Affine::random(state, guidance, s, rng),
            c: Affine::random(state, guidance, s, rng),
        }
    }
}

/// Guidance embedding `r` (tokens × G) and the maps that read it.
#[derive(Debug, Clone, Copy)]
pub struct Guidance<'a> {
    pub r: &'a Array2<f64>,
    pub proj: &'a GuidanceProjections,
}

/// Per-token `Δ` (L × F), `B` and `C` (L × N).
#[derive(Debug, Clone, PartialEq)]
pub struct SelectiveParams {
    pub delta: Array2<f64>,
    pub b: Array2<f64>,
    pub c: Array2<f64>,
}

pub fn selective_params(
    x: &Array2<f64>,
    proj: &SelectiveProjections,
    guidance: Option<Guidance<'_>>,
) -> Result<SelectiveParams> {
    proj.validate()?;
    let mut delta = proj.delta.apply(x)?;
    let mut b = proj.b.apply(x)?;
    let mut c = proj.c.apply(x)?;
    if let Some(g) = guidance {
        if g.r.nrows() != x.nrows() {
            return Err(shape_err(format!("{} guidance tokens for {} inputs", g.r.nrows(), x.nrows())));
        }
        delta += &g.proj.delta.apply(g.r)?;
        b += &g.proj.b.apply(g.r)?;
        c += &g.proj.c.apply(g.r)?;
    }
    delta.mapv_inplace(softplus);
    Ok(SelectiveParams { delta, b, c })
}

impl SelectiveParams {
    /// Discrete steps for channel `f`.
    pub fn channel_steps(&self, proj: &SelectiveProjections, f: usize) -> Result<StepParams> {
        let (l, n) = self.b.dim();
        let mut abar = Array2::zeros((l, n));
        let mut bbar = Array2::zeros((l, n));
        for t in 0..l {
            let dt = self.delta[[t, f]];
            for k in 0..n {
                let (a, b) = zoh_scalar(proj.a[[f, k]], self.b[[t, k]], dt);
                abar[[t, k]] = a;
                bbar[[t, k]] = b;
            }
        }
        StepParams::new(abar, bbar, self.c.clone(), proj.d[f])
    }
}

/// Selective scan over `x` (L × F): every channel runs its own scan with
/// shared `B`, `C` and a channel-specific `Δ`, `A`, `D`.
pub fn selective_ssm(
    x: &Array2<f64>,
    proj: &SelectiveProjections,
    guidance: Option<Guidance<'_>>,
    opts: ScanOptions,
) -> Result<Array2<f64>> {
    let params = selective_params(x, proj, guidance)?;
    let cols: Vec<Vec<f64>> = (0..proj.features())
        .into_par_iter()
        .map(|f| {
            let steps = params.channel_steps(proj, f)?;
            let xf = x.index_axis(Axis(1), f).to_vec();
            parallel_scan(&steps, &xf, opts)
        })
        .collect::<Result<_>>()?;
    Ok(Array2::from_shape_fn(x.dim(), |(t, f)| cols[f][t]))
}
