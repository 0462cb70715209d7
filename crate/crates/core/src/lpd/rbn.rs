//! A small multi-scale re-blur network.
//!
//! The warped frame is lifted to `width` features and pushed through four
//! encoder scales; before each scale the features are multiplied by the
//! matching output of the latent modulator stack. A nearest-upsampling
//! decoder merges the scales back and a residual projection is added to the
//! warped frame:
//!
//! ```text
//! m_0 = softplus(M_0 ã)            v_0 = P_in x
//! m_i = softplus(M_i pool(m_{i-1}))
//! h_i = silu(E_i (v_i ⊙ m_i))      v_{i+1} = pool(h_i)
//! d_3 = h_3,  d_i = h_i + D_i up(d_{i+1})
//! out = x + P_out d_0
//! ```
//!
//! Every stage is smooth, so gradients exist everywhere except at the
//! integer crossings of bilinear warping.

use std::path::Path;

use ndarray::{s, Array1, Array2, Array3, Array4, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::latent::{sample_latent, sample_latent_vjp, LatentPhaseDistortion};
use crate::error::{shape_err, Error, Result};
use crate::harness::tensor_file::{self, TensorFile};
use crate::tensor::{FrameSequence, TiltField};
use crate::turbsim::{warp, warp_vjp};

/// Number of encoder / modulator scales.
pub const SCALES: usize = 4;

/// `softplus⁻¹(1)`: the bias that makes a zero input produce unit modulation.
const UNIT_SOFTPLUS_BIAS: f64 = 0.541_324_854_612_918_1;

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 30.0 { x } else { x.exp().ln_1p() }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Shape of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbnArch {
    pub image_channels: usize,
    pub latent_channels: usize,
    pub width: usize,
}

impl Default for RbnArch {
    fn default() -> Self {
        Self { image_channels: 3, latent_channels: 1, width: 8 }
    }
}

/// A 1×1 convolution: `out = W · in + b` at every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out × in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(out: usize, inp: usize) -> Self {
        Self { weight: Array2::zeros((out, inp)), bias: Array1::zeros(out) }
    }

    fn random(out: usize, inp: usize, std: f64, rng: &mut ChaCha8Rng) -> Self {
        Self {
            weight: Array2::from_shape_simple_fn((out, inp), || {
                let n: f64 = StandardNormal.sample(rng);
                std * n
            }),
            bias: Array1::zeros(out),
        }
    }

    fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    fn apply(&self, x: &Array3<f64>) -> Array3<f64> {
        let (h, w, c) = x.dim();
        debug_assert_eq!(c, self.inputs());
        let x = x.as_standard_layout();
        let flat = x.view().into_shape_with_order((h * w, c)).expect("standard layout");
        let mut out = flat.dot(&self.weight.t()).as_standard_layout().into_owned();
        out += &self.bias;
        out.into_shape_with_order((h, w, self.outputs())).expect("standard layout")
    }

    fn vjp_input(&self, g: &Array3<f64>) -> Array3<f64> {
        let (h, w, o) = g.dim();
        let g = g.as_standard_layout();
        let flat = g.view().into_shape_with_order((h * w, o)).expect("standard layout");
        flat.dot(&self.weight)
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((h, w, self.inputs()))
            .expect("standard layout")
    }
}

fn pool(x: &Array3<f64>) -> Array3<f64> {
    let (h, w, c) = x.dim();
    Array3::from_shape_fn((h / 2, w / 2, c), |(y, xx, ch)| {
        0.25 * (x[[2 * y, 2 * xx, ch]] + x[[2 * y + 1, 2 * xx, ch]] + x[[2 * y, 2 * xx + 1, ch]] + x[[2 * y + 1, 2 * xx + 1, ch]])
    })
}

fn pool_adjoint(g: &Array3<f64>) -> Array3<f64> {
    let (h, w, c) = g.dim();
    Array3::from_shape_fn((2 * h, 2 * w, c), |(y, x, ch)| 0.25 * g[[y / 2, x / 2, ch]])
}

fn upsample(x: &Array3<f64>) -> Array3<f64> {
    let (h, w, c) = x.dim();
    Array3::from_shape_fn((2 * h, 2 * w, c), |(y, xx, ch)| x[[y / 2, xx / 2, ch]])
}

fn upsample_adjoint(g: &Array3<f64>) -> Array3<f64> {
    pool(g) * 4.0
}

/// Latent encoders producing the per-scale modulators `e^1 … e^4`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulatorStack {
    pub layers: Vec<Dense>,
}

impl ModulatorStack {
    /// Modulators for one frame of latent sample, plus pre-activations.
    fn forward(&self, z: &Array3<f64>) -> (Vec<Array3<f64>>, Vec<Array3<f64>>) {
        let mut pre = Vec::with_capacity(SCALES);
        let mut mods: Vec<Array3<f64>> = Vec::with_capacity(SCALES);
        for (i, layer) in self.layers.iter().enumerate() {
            let input = if i == 0 { z.clone() } else { pool(&mods[i - 1]) };
            let p = layer.apply(&input);
            mods.push(p.mapv(softplus));
            pre.push(p);
        }
        (mods, pre)
    }

    pub fn modulators(&self, z: &Array3<f64>) -> Vec<Array3<f64>> {
        self.forward(z).0
    }
}

/// Frozen network weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RbnWeights {
    arch: RbnArch,
    pub input: Dense,
    pub encoders: Vec<Dense>,
    pub modulator: ModulatorStack,
    pub decoders: Vec<Dense>,
    pub output: Dense,
    lipschitz: f64,
}

/// Descriptor stored next to the flat parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbnDescriptor {
    pub arch: RbnArch,
    pub scales: usize,
    /// `(name, [out, in])` in file order; each block is weight then bias.
    pub layers: Vec<(String, [usize; 2])>,
    pub parameter_count: usize,
}

impl RbnWeights {
    fn layer_shapes(arch: &RbnArch) -> Vec<(String, [usize; 2])> {
        let f = arch.width;
        let mut v = vec![("input".to_string(), [f, arch.image_channels])];
        v.extend((0..SCALES).map(|i| (format!("encoder{i}"), [f, f])));
        v.push(("modulator0".to_string(), [f, arch.latent_channels]));
        v.extend((1..SCALES).map(|i| (format!("modulator{i}"), [f, f])));
        v.extend((0..SCALES - 1).map(|i| (format!("decoder{i}"), [f, f])));
        v.push(("output".to_string(), [arch.image_channels, f]));
        v
    }

    fn layers(&self) -> Vec<&Dense> {
        let mut v = vec![&self.input];
        v.extend(self.encoders.iter());
        v.extend(self.modulator.layers.iter());
        v.extend(self.decoders.iter());
        v.push(&self.output);
        v
    }

    fn from_layers(arch: RbnArch, mut layers: Vec<Dense>) -> Result<Self> {
        let shapes = Self::layer_shapes(&arch);
        if layers.len() != shapes.len()
            || layers.iter().zip(&shapes).any(|(l, (_, s))| [l.outputs(), l.inputs()] != *s || l.bias.len() != s[0])
        {
            return Err(Error::Format("layer shapes do not match the architecture".into()));
        }
        let output = layers.pop().expect("non-empty");
        let decoders = layers.split_off(1 + 2 * SCALES);
        let mods = layers.split_off(1 + SCALES);
        let encoders = layers.split_off(1);
        let input = layers.pop().expect("input layer");
        let mut w = Self {
            arch,
            input,
            encoders,
            modulator: ModulatorStack { layers: mods },
            decoders,
            output,
            lipschitz: 0.0,
        };
        w.lipschitz = w.estimate_lipschitz();
        Ok(w)
    }

    /// Sets modulator biases so that a zero latent yields unit modulation at
    /// every scale.
    fn calibrate_neutral(layers: &mut [Dense]) {
        for (i, layer) in layers.iter_mut().enumerate() {
            let incoming = if i == 0 { 0.0 } else { 1.0 };
            let row_sums = layer.weight.sum_axis(Axis(1));
            layer.bias = row_sums.mapv(|r| UNIT_SOFTPLUS_BIAS - incoming * r);
        }
    }

    /// Seeded random weights. `residual_scale` sets the magnitude of the
    /// output projection relative to the skip path.
    pub fn random(arch: RbnArch, seed: u64, residual_scale: f64) -> Result<Self> {
        Self::validate_arch(&arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = arch.width;
        let fs = f as f64;
        let input = Dense::random(f, arch.image_channels, 1.0 / (arch.image_channels as f64).sqrt(), &mut rng);
        let encoders = (0..SCALES).map(|_| Dense::random(f, f, 1.0 / fs.sqrt(), &mut rng)).collect();
        let mut mods: Vec<Dense> = (0..SCALES)
            .map(|i| {
                let inp = if i == 0 { arch.latent_channels } else { f };
                Dense::random(f, inp, 0.5 / (inp as f64).sqrt(), &mut rng)
            })
            .collect();
        Self::calibrate_neutral(&mut mods);
        let decoders = (0..SCALES - 1).map(|_| Dense::random(f, f, 0.5 / fs.sqrt(), &mut rng)).collect();
        let output = Dense::random(arch.image_channels, f, residual_scale / fs.sqrt(), &mut rng);
        let mut layers = vec![input];
        layers.extend::<Vec<Dense>>(encoders);
        layers.extend(mods);
        layers.extend::<Vec<Dense>>(decoders);
        layers.push(output);
        Self::from_layers(arch, layers)
    }

    /// Skip-only configuration: the output equals the warped input and every
    /// modulator is identically one.
    pub fn identity(arch: RbnArch) -> Result<Self> {
        Self::validate_arch(&arch)?;
        let f = arch.width;
        let mut mods: Vec<Dense> = (0..SCALES)
            .map(|i| Dense::zeros(f, if i == 0 { arch.latent_channels } else { f }))
            .collect();
        Self::calibrate_neutral(&mut mods);
        let mut layers = vec![Dense::zeros(f, arch.image_channels)];
        layers.extend((0..SCALES).map(|_| Dense::zeros(f, f)));
        layers.extend(mods);
        layers.extend((0..SCALES - 1).map(|_| Dense::zeros(f, f)));
        layers.push(Dense::zeros(arch.image_channels, f));
        Self::from_layers(arch, layers)
    }

    fn validate_arch(arch: &RbnArch) -> Result<()> {
        if arch.image_channels == 0 || arch.latent_channels == 0 || arch.width == 0 {
            return Err(Error::InvalidArgument("architecture sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn arch(&self) -> RbnArch {
        self.arch
    }

    /// Estimated bound on `‖Δout‖₂ / ‖Δã‖₂` for latents of unit scale and
    /// images in `[0, 1]`; computed once when the weights are built or loaded.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn descriptor(&self) -> RbnDescriptor {
        let layers = Self::layer_shapes(&self.arch);
        let parameter_count = layers.iter().map(|(_, [o, i])| o * i + o).sum();
        RbnDescriptor { arch: self.arch, scales: SCALES, layers, parameter_count }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for l in self.layers() {
            v.extend(l.weight.iter());
            v.extend(l.bias.iter());
        }
        v
    }

    pub fn from_flat(arch: RbnArch, flat: &[f64]) -> Result<Self> {
        Self::validate_arch(&arch)?;
        let shapes = Self::layer_shapes(&arch);
        let needed: usize = shapes.iter().map(|(_, [o, i])| o * i + o).sum();
        if flat.len() != needed {
            return Err(Error::Format(format!("{} parameters, architecture needs {needed}", flat.len())));
        }
        let mut at = 0;
        let layers = shapes
            .iter()
            .map(|(_, [o, i])| {
                let weight = Array2::from_shape_vec((*o, *i), flat[at..at + o * i].to_vec()).expect("sized");
                at += o * i;
                let bias = Array1::from_vec(flat[at..at + o].to_vec());
                at += o;
                Dense { weight, bias }
            })
            .collect();
        Self::from_layers(arch, layers)
    }

    /// Writes `<stem>.tsm` (flat parameters) and `<stem>.json` (descriptor).
    pub fn save(&self, stem: &Path) -> Result<()> {
        let flat: Vec<f32> = self.to_flat().iter().map(|&v| v as f32).collect();
        TensorFile::new(vec![flat.len()], flat)?.write(&stem.with_extension("tsm"))?;
        let json = serde_json::to_string_pretty(&self.descriptor())?;
        tensor_file::write_atomic(&stem.with_extension("json"), json.as_bytes())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let desc: RbnDescriptor = serde_json::from_slice(&std::fs::read(stem.with_extension("json"))?)?;
        if desc.scales != SCALES || desc.layers != Self::layer_shapes(&desc.arch) {
            return Err(Error::Format("descriptor does not match the supported architecture".into()));
        }
        let t = TensorFile::read(&stem.with_extension("tsm"))?;
        if t.dims != [desc.parameter_count] {
            return Err(Error::Format(format!("parameter tensor {:?} vs descriptor {}", t.dims, desc.parameter_count)));
        }
        let flat: Vec<f64> = t.data.iter().map(|&v| v as f64).collect();
        Self::from_flat(desc.arch, &flat)
    }

    fn estimate_lipschitz(&self) -> f64 {
        const PROBE: usize = 16;
        let arch = self.arch;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut worst = 0.0f64;
        for _ in 0..6 {
            let image = Array3::from_shape_simple_fn((PROBE, PROBE, arch.image_channels), || {
                rand::Rng::random::<f64>(&mut rng)
            });
            let z: Array3<f64> = Array3::from_shape_simple_fn((PROBE, PROBE, arch.latent_channels), || {
                StandardNormal.sample(&mut rng)
            });
            let base = self.frame_forward(&image, &z).out;
            for scale in [1e-4, 1e-2, 1e-1] {
                let dir: Array3<f64> = Array3::from_shape_simple_fn(z.dim(), || StandardNormal.sample(&mut rng));
                let norm = dir.mapv(|v| v * v).sum().sqrt();
                let delta = dir * (scale / norm);
                let out = self.frame_forward(&image, &(&z + &delta)).out;
                let change = (&out - &base).mapv(|v| v * v).sum().sqrt();
                worst = worst.max(change / scale);
            }
        }
        2.0 * worst
    }

    fn frame_forward(&self, x0: &Array3<f64>, z: &Array3<f64>) -> FrameCache {
        let (mods, mod_pre) = self.modulator.forward(z);
        let mut v = vec![self.input.apply(x0)];
        let mut u = Vec::with_capacity(SCALES);
        let mut h_pre = Vec::with_capacity(SCALES);
        let mut h = Vec::with_capacity(SCALES);
        for i in 0..SCALES {
            let ui = &v[i] * &mods[i];
            let pre = self.encoders[i].apply(&ui);
            let hi = pre.mapv(silu);
            if i + 1 < SCALES {
                v.push(pool(&hi));
            }
            u.push(ui);
            h_pre.push(pre);
            h.push(hi);
        }
        let mut d = vec![Array3::zeros((0, 0, 0)); SCALES];
        d[SCALES - 1] = h[SCALES - 1].clone();
        for i in (0..SCALES - 1).rev() {
            d[i] = &h[i] + &self.decoders[i].apply(&upsample(&d[i + 1]));
        }
        let out = x0 + &self.output.apply(&d[0]);
        FrameCache { mods, mod_pre, v, h_pre, out }
    }

    /// Returns `(g_x0, g_z)` for one frame.
    fn frame_backward(&self, cache: &FrameCache, g_out: &Array3<f64>) -> (Array3<f64>, Array3<f64>) {
        let mut g_x0 = g_out.clone();
        let mut g_d: Vec<Option<Array3<f64>>> = vec![None; SCALES];
        g_d[0] = Some(self.output.vjp_input(g_out));
        let mut g_h: Vec<Array3<f64>> = cache.h_pre.iter().map(|p| Array3::zeros(p.dim())).collect();
        for i in 0..SCALES - 1 {
            let gd = g_d[i].take().expect("filled by the finer scale");
            let g_up = self.decoders[i].vjp_input(&gd);
            g_d[i + 1] = Some(upsample_adjoint(&g_up));
            g_h[i] += &gd;
        }
        g_h[SCALES - 1] += g_d[SCALES - 1].as_ref().expect("coarsest scale");

        let mut g_mods: Vec<Array3<f64>> = cache.mods.iter().map(|m| Array3::zeros(m.dim())).collect();
        let mut g_v0 = None;
        for i in (0..SCALES).rev() {
            let mut g_pre = g_h[i].clone();
            g_pre.zip_mut_with(&cache.h_pre[i], |g, &p| *g *= silu_grad(p));
            let g_u = self.encoders[i].vjp_input(&g_pre);
            let g_v = &g_u * &cache.mods[i];
            g_mods[i] = &g_u * &cache.v[i];
            if i > 0 {
                g_h[i - 1] += &pool_adjoint(&g_v);
            } else {
                g_v0 = Some(g_v);
            }
        }
        g_x0 += &self.input.vjp_input(&g_v0.expect("finest scale"));

        let mut g_z = None;
        let mut carry: Option<Array3<f64>> = None;
        for i in (0..SCALES).rev() {
            let mut g_m = g_mods[i].clone();
            if let Some(c) = carry.take() {
                g_m += &c;
            }
            g_m.zip_mut_with(&cache.mod_pre[i], |g, &p| *g *= sigmoid(p));
            let g_in = self.modulator.layers[i].vjp_input(&g_m);
            if i > 0 {
                carry = Some(pool_adjoint(&g_in));
            } else {
                g_z = Some(g_in);
            }
        }
        (g_x0, g_z.expect("finest modulator"))
    }
}

struct FrameCache {
    mods: Vec<Array3<f64>>,
    mod_pre: Vec<Array3<f64>>,
    v: Vec<Array3<f64>>,
    h_pre: Vec<Array3<f64>>,
    out: Array3<f64>,
}

fn check_inputs(image: &FrameSequence, lpd: &LatentPhaseDistortion, weights: &RbnWeights) -> Result<()> {
    let (t, h, w, c) = image.dims();
    let arch = weights.arch();
    if c != arch.image_channels {
        return Err(shape_err(format!("image has {c} channels, network expects {}", arch.image_channels)));
    }
    if lpd.mu.dim() != (t, h, w, arch.latent_channels) {
        return Err(shape_err(format!("latent {:?} vs image {:?}", lpd.mu.dim(), image.dims())));
    }
    let factor = 1 << (SCALES - 1);
    if h % factor != 0 || w % factor != 0 {
        return Err(shape_err(format!("frame {h}x{w} is not divisible by {factor}")));
    }
    Ok(())
}

/// Warp by the LPD tilt, then blur through the modulated multi-scale network.
/// Deterministic given `seed`, which drives the latent draw.
pub fn rbn_forward(
    image: &FrameSequence,
    lpd: &LatentPhaseDistortion,
    weights: &RbnWeights,
    seed: u64,
) -> Result<FrameSequence> {
    check_inputs(image, lpd, weights)?;
    let warped = warp(image, &lpd.tilt)?;
    let sample = sample_latent(&lpd.mu, &lpd.log_sigma, seed)?;
    let (t, h, w, c) = image.dims();
    let mut out = Array4::zeros((t, h, w, c));
    for f in 0..t {
        let x0 = warped.frame(f).to_owned();
        let z = sample.value.index_axis(Axis(0), f).to_owned();
        let cache = weights.frame_forward(&x0, &z);
        out.slice_mut(s![f, .., .., ..]).assign(&cache.out);
    }
    FrameSequence::new(out)
}

/// Cotangents of [`rbn_forward`].
#[derive(Debug, Clone)]
pub struct RbnGradients {
    pub image: Array4<f64>,
    pub tilt: Array4<f64>,
    pub mu: Array4<f64>,
    pub log_sigma: Array4<f64>,
}

/// Forward output together with the gradients for `cotangent_fn(output)`.
pub fn rbn_value_and_vjp(
    image: &FrameSequence,
    lpd: &LatentPhaseDistortion,
    weights: &RbnWeights,
    seed: u64,
    cotangent_fn: impl FnOnce(&FrameSequence) -> Result<Array4<f64>>,
) -> Result<(FrameSequence, RbnGradients)> {
    check_inputs(image, lpd, weights)?;
    let warped = warp(image, &lpd.tilt)?;
    let sample = sample_latent(&lpd.mu, &lpd.log_sigma, seed)?;
    let (t, h, w, c) = image.dims();
    let mut out = Array4::zeros((t, h, w, c));
    let mut caches = Vec::with_capacity(t);
    for f in 0..t {
        let x0 = warped.frame(f).to_owned();
        let z = sample.value.index_axis(Axis(0), f).to_owned();
        let cache = weights.frame_forward(&x0, &z);
        out.slice_mut(s![f, .., .., ..]).assign(&cache.out);
        caches.push(cache);
    }
    let out = FrameSequence::new(out)?;
    let g_out = cotangent_fn(&out)?;
    if g_out.dim() != (t, h, w, c) {
        return Err(shape_err("rbn cotangent shape"));
    }
    let mut g_warped = Array4::zeros((t, h, w, c));
    let mut g_z = Array4::zeros(lpd.mu.dim());
    for (f, cache) in caches.iter().enumerate() {
        let g = g_out.index_axis(Axis(0), f).to_owned();
        let (gx, gz) = weights.frame_backward(cache, &g);
        g_warped.slice_mut(s![f, .., .., ..]).assign(&gx);
        g_z.slice_mut(s![f, .., .., ..]).assign(&gz);
    }
    let (g_image, g_tilt) = warp_vjp(image, &lpd.tilt, &g_warped)?;
    let (g_mu, g_ls) = sample_latent_vjp(&lpd.log_sigma, &sample.eps, &g_z)?;
    Ok((out, RbnGradients { image: g_image, tilt: g_tilt, mu: g_mu, log_sigma: g_ls }))
}

/// Cotangents of [`rbn_forward`] for a fixed output cotangent.
pub fn rbn_vjp(
    image: &FrameSequence,
    lpd: &LatentPhaseDistortion,
    weights: &RbnWeights,
    seed: u64,
    cotangent_out: &Array4<f64>,
) -> Result<RbnGradients> {
    let g = cotangent_out.clone();
    Ok(rbn_value_and_vjp(image, lpd, weights, seed, move |_| Ok(g))?.1)
}

/// Output for an explicit latent sample (no reparameterization, no warp).
pub fn rbn_with_latent(frame: &Array3<f64>, latent: &Array3<f64>, weights: &RbnWeights) -> Result<Array3<f64>> {
    let arch = weights.arch();
    let (h, w, c) = frame.dim();
    if c != arch.image_channels || latent.dim() != (h, w, arch.latent_channels) {
        return Err(shape_err("frame or latent does not match the architecture"));
    }
    if h % 8 != 0 || w % 8 != 0 {
        return Err(shape_err("frame sides must be divisible by 8"));
    }
    Ok(weights.frame_forward(frame, latent).out)
}

/// Zero tilt of matching size, for callers that only need the blur path.
pub fn zero_tilt_like(image: &FrameSequence) -> TiltField {
    let (t, h, w, _) = image.dims();
    TiltField::zeros(t, h, w)
}
