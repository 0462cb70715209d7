//! Self-check suites for the `check` and `ssm-check` commands.

use std::fmt::Write as _;

use ndarray::{Array2, Array3, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor_file::TensorFile;
use crate::error::{Error, Result};
use crate::losses::ema_update;
use crate::lpd::{
    kl_loss, modulate, modulate_vjp, rbn_forward, rbn_vjp, sample_latent, sample_latent_vjp, KlForm,
    LatentPhaseDistortion, RbnArch, RbnWeights,
};
use crate::scanorder::{build_permutation, ScanOrder};
use crate::ssm::scan::{parallel_scan_with, Combine};
use crate::ssm::{
    conv_mode, gated_output, gated_output_vjp, recurrence, selective_ssm, Affine, GateGuidance, Guidance,
    GuidanceProjections, ScanOptions, SelectiveProjections, StepParams,
};
use crate::tensor::{FrameSequence, TiltField};
use crate::turbsim::{basis_blur, basis_blur_vjp, warp, warp_vjp, BlurWeightField, PsfBasis};
use crate::zernike::ZernikeBasis;

/// Fault injected into a suite to show that its oracle can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Scan combine applies the wrong decay to the carried offset.
    Scan,
}

impl std::str::FromStr for Mutation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "scan" => Ok(Self::Scan),
            _ => Err(Error::InvalidArgument(format!("unknown mutation '{s}' (expected none or scan)"))),
        }
    }
}

pub const SUITES: [&str; 10] = [
    "scan-oracle",
    "scan-linearity",
    "conv-kernel",
    "hilbert",
    "gradients",
    "kl",
    "zernike",
    "guidance",
    "ema",
    "tensor-file",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest error metric seen; its meaning is suite specific.
    pub worst: f64,
    pub tolerance: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }

    fn from_errors(suite: &str, errors: &[f64], tolerance: f64) -> Self {
        let worst = errors.iter().fold(0.0f64, |m, &e| if e.is_nan() { f64::INFINITY } else { m.max(e) });
        Self {
            suite: suite.into(),
            cases: errors.len(),
            failures: errors.iter().filter(|&&e| !(e <= tolerance)).count(),
            worst,
            tolerance,
        }
    }
}

pub fn reports_to_csv(reports: &[SuiteReport]) -> String {
    let mut s = String::from("suite,cases,failures,worst,tolerance,status\n");
    for r in reports {
        let status = if r.passed() { "pass" } else { "fail" };
        let _ = writeln!(s, "{},{},{},{:.3e},{:.3e},{}", r.suite, r.cases, r.failures, r.worst, r.tolerance, status);
    }
    s
}

/// Runs the named suites. An empty list is an error.
pub fn run_suites(names: &[String], mutation: Mutation, seed: u64) -> Result<Vec<SuiteReport>> {
    if names.is_empty() {
        return Err(Error::Config("no suites selected".into()));
    }
    names.iter().map(|n| run_suite(n, mutation, seed)).collect()
}

pub fn run_suite(name: &str, mutation: Mutation, seed: u64) -> Result<SuiteReport> {
    let op = if mutation == Mutation::Scan { Combine::Faulty } else { Combine::Correct };
    match name {
        "scan-oracle" => scan_oracle(1000, 512, 16, op, seed),
        "scan-linearity" => scan_linearity(100, op, seed),
        "conv-kernel" => conv_kernel(200, seed),
        "hilbert" => hilbert(),
        "gradients" => gradients(10, seed),
        "kl" => kl(),
        "zernike" => zernike(),
        "guidance" => guidance(100, seed),
        "ema" => ema(),
        "tensor-file" => tensor_file(seed),
        _ => Err(Error::Config(format!("unknown suite '{name}'; known: {}", SUITES.join(", ")))),
    }
}

/// `‖a − b‖∞ / max(‖b‖∞, 1)`.
pub fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let num = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let den = b.iter().fold(1.0f64, |m, y| m.max(y.abs()));
    if num.is_nan() { f64::NAN } else { num / den }
}

/// Time-varying stable steps with `|Ā| < 1`.
pub fn random_varying_steps(rng: &mut impl Rng, len: usize, n: usize) -> Result<StepParams> {
    let abar = Array2::from_shape_simple_fn((len, n), || rng.random_range(0.0..0.999));
    let bbar = Array2::from_shape_simple_fn((len, n), || rng.random_range(-1.0..1.0));
    let c = Array2::from_shape_simple_fn((len, n), || rng.random_range(-1.0..1.0));
    StepParams::new(abar, bbar, c, rng.random_range(-1.0..1.0))
}

fn random_vec(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub(crate) fn scan_oracle(instances: usize, max_len: usize, max_state: usize, op: Combine, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errors = Vec::with_capacity(instances);
    for _ in 0..instances {
        let len = rng.random_range(1..=max_len);
        let n = rng.random_range(1..=max_state);
        let chunk = rng.random_range(1..=64);
        let params = random_varying_steps(&mut rng, len, n)?;
        let x = random_vec(&mut rng, len);
        let fast = parallel_scan_with(&params, &x, ScanOptions { chunk, parallel: true }, op)?;
        errors.push(rel_inf(&fast, &recurrence(&params, &x)?));
    }
    Ok(SuiteReport::from_errors("scan-oracle", &errors, 1e-6))
}

fn scan_linearity(instances: usize, op: Combine, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11);
    let mut errors = Vec::with_capacity(instances);
    for _ in 0..instances {
        let len = rng.random_range(1..=256);
        let n = rng.random_range(1..=8);
        let params = random_varying_steps(&mut rng, len, n)?;
        let (x1, x2) = (random_vec(&mut rng, len), random_vec(&mut rng, len));
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let mix: Vec<f64> = x1.iter().zip(&x2).map(|(p, q)| a * p + b * q).collect();
        let opts = ScanOptions { chunk: 16, parallel: true };
        let y1 = parallel_scan_with(&params, &x1, opts, op)?;
        let y2 = parallel_scan_with(&params, &x2, opts, op)?;
        let ym = parallel_scan_with(&params, &mix, opts, op)?;
        let lin: Vec<f64> = y1.iter().zip(&y2).map(|(p, q)| a * p + b * q).collect();
        errors.push(rel_inf(&ym, &lin));
    }
    Ok(SuiteReport::from_errors("scan-linearity", &errors, 1e-6))
}

pub(crate) fn conv_kernel(instances: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x22);
    let mut errors = Vec::with_capacity(instances);
    for _ in 0..instances {
        let len = rng.random_range(1..=256);
        let n = rng.random_range(1..=16);
        let abar: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.99)).collect();
        let params = StepParams::time_invariant(&abar, &random_vec(&mut rng, n), &random_vec(&mut rng, n), rng.random_range(-1.0..1.0), len)?;
        let x = random_vec(&mut rng, len);
        errors.push(rel_inf(&conv_mode(&params, &x)?, &recurrence(&params, &x)?));
    }
    Ok(SuiteReport::from_errors("conv-kernel", &errors, 1e-6))
}

/// Worst in-tile step length minus one (zero when every step is adjacent),
/// plus a unit penalty per frame size where Hilbert order is not more local
/// than raster order.
fn hilbert() -> Result<SuiteReport> {
    let mut errors = Vec::new();
    for &(t, h, w, block) in &[(1, 4, 4, 4), (1, 16, 16, 8), (2, 16, 16, 4), (1, 32, 32, 16), (3, 8, 8, 8)] {
        let p = build_permutation(ScanOrder::LocalHilbert, t, h, w, block)?;
        let tile_cells = block * block;
        let mut worst = 0.0f64;
        for s in 1..p.len() {
            if s % tile_cells == 0 {
                continue;
            }
            let (t0, y0, x0) = p.coords(s - 1);
            let (t1, y1, x1) = p.coords(s);
            let d = t0.abs_diff(t1) + y0.abs_diff(y1) + x0.abs_diff(x1);
            worst = worst.max(d as f64 - 1.0);
        }
        errors.push(worst);
        let raster = build_permutation(ScanOrder::SpaceFirst, t, h, w, block)?;
        let local = p.mean_consecutive_manhattan() < raster.mean_consecutive_manhattan();
        errors.push(if local || h < 8 { 0.0 } else { 1.0 });
    }
    Ok(SuiteReport::from_errors("hilbert", &errors, 0.0))
}

/// Relative gap between an analytic directional derivative and a central
/// difference.
pub fn fd_gap(analytic: f64, lo: f64, hi: f64, h: f64) -> f64 {
    let fd = (hi - lo) / (2.0 * h);
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-8)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rand_a4(rng: &mut impl Rng, dims: (usize, usize, usize, usize), lo: f64, hi: f64) -> Array4<f64> {
    Array4::from_shape_simple_fn(dims, || rng.random_range(lo..hi))
}

fn rand_a3(rng: &mut impl Rng, dims: (usize, usize, usize)) -> Array3<f64> {
    Array3::from_shape_simple_fn(dims, || rng.random_range(-1.0..1.0))
}

fn rand_a2(rng: &mut impl Rng, dims: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_simple_fn(dims, || rng.random_range(-1.0..1.0))
}

fn flat<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> Vec<f64> {
    a.iter().copied().collect()
}

/// Shifts away from integer positions so no finite-difference probe crosses
/// a bilinear cell boundary.
fn safe_tilt(rng: &mut impl Rng, t: usize, h: usize, w: usize) -> Array4<f64> {
    Array4::from_shape_simple_fn((t, h, w, 2), || {
        let whole = rng.random_range(-2i32..2) as f64;
        whole + rng.random_range(0.05..0.95)
    })
}

/// Random PSF basis with small kernels, for blur gradient checks.
pub fn small_psf_basis(rng: &mut impl Rng, size: usize, k: usize) -> Result<PsfBasis> {
    let psfs: Vec<Array2<f64>> = (0..k * 12)
        .map(|_| {
            let m = Array2::from_shape_simple_fn((size, size), || rng.random_range(0.0..1.0));
            let s = m.sum();
            m / s
        })
        .collect();
    PsfBasis::from_psfs(&psfs, k, 1.0, 7)
}

/// Directional-derivative checks for every VJP, `instances` each. Reports
/// the worst relative gap.
pub fn gradients(instances: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x33);
    let mut errors = Vec::new();
    let basis = small_psf_basis(&mut rng, 5, 4)?;
    let h = 1e-6;
    for _ in 0..instances {
        errors.push(warp_gap(&mut rng, h)?);
        errors.push(blur_gap(&mut rng, &basis)?);
        errors.push(modulate_gap(&mut rng)?);
        errors.push(latent_gap(&mut rng, h)?);
        errors.push(gate_gap(&mut rng, h)?);
        errors.push(rbn_gap(&mut rng, h)?);
    }
    Ok(SuiteReport::from_errors("gradients", &errors, 1e-3))
}

pub fn warp_gap(rng: &mut impl Rng, h: f64) -> Result<f64> {
    let (t, hh, w, c) = (2, 5, 6, 2);
    let img = rand_a4(rng, (t, hh, w, c), 0.0, 1.0);
    let tilt = safe_tilt(rng, t, hh, w);
    let (vi, vt) = (rand_a4(rng, img.dim(), -1.0, 1.0), rand_a4(rng, tilt.dim(), -1.0, 1.0));
    let u = rand_a4(rng, img.dim(), -1.0, 1.0);
    let eval = |s: f64| -> Result<f64> {
        let out = warp(&FrameSequence::new(&img + &(&vi * s))?, &TiltField::new(&tilt + &(&vt * s))?)?;
        Ok(dot(&flat(out.data()), &flat(&u)))
    };
    let (gi, gt) = warp_vjp(&FrameSequence::new(img.clone())?, &TiltField::new(tilt.clone())?, &u)?;
    let analytic = dot(&flat(&gi), &flat(&vi)) + dot(&flat(&gt), &flat(&vt));
    Ok(fd_gap(analytic, eval(-h)?, eval(h)?, h))
}

/// The blur is bilinear in (image, weights), so a wide central difference is
/// exact and swamps the single-precision forward transform.
pub fn blur_gap(rng: &mut impl Rng, basis: &PsfBasis) -> Result<f64> {
    let (t, hh, w, c) = (1, 6, 7, 3);
    let img = rand_a4(rng, (t, hh, w, c), 0.0, 1.0);
    let beta = rand_a4(rng, (t, hh, w, basis.k()), -1.0, 1.0);
    let (vi, vb) = (rand_a4(rng, img.dim(), -1.0, 1.0), rand_a4(rng, beta.dim(), -1.0, 1.0));
    let u = rand_a4(rng, img.dim(), -1.0, 1.0);
    let h = 0.5;
    let eval = |s: f64| -> Result<f64> {
        let out = basis_blur(&FrameSequence::new(&img + &(&vi * s))?, &BlurWeightField::new(&beta + &(&vb * s))?, basis)?;
        Ok(dot(&flat(out.data()), &flat(&u)))
    };
    let (gi, gb) = basis_blur_vjp(&FrameSequence::new(img.clone())?, &BlurWeightField::new(beta.clone())?, basis, &u)?;
    let analytic = dot(&flat(&gi), &flat(&vi)) + dot(&flat(&gb), &flat(&vb));
    Ok(fd_gap(analytic, eval(-h)?, eval(h)?, h))
}

pub fn modulate_gap(rng: &mut impl Rng) -> Result<f64> {
    let dims = [(4, 4, 3), (2, 2, 3)];
    let feats: Vec<_> = dims.iter().map(|&d| rand_a3(rng, d)).collect();
    let mods: Vec<_> = dims.iter().map(|&d| rand_a3(rng, d)).collect();
    let vf: Vec<_> = dims.iter().map(|&d| rand_a3(rng, d)).collect();
    let vm: Vec<_> = dims.iter().map(|&d| rand_a3(rng, d)).collect();
    let u: Vec<_> = dims.iter().map(|&d| rand_a3(rng, d)).collect();
    let h = 1e-3;
    let eval = |s: f64| -> Result<f64> {
        let f: Vec<_> = feats.iter().zip(&vf).map(|(a, v)| a + &(v * s)).collect();
        let m: Vec<_> = mods.iter().zip(&vm).map(|(a, v)| a + &(v * s)).collect();
        Ok(modulate(&f, &m)?.iter().zip(&u).map(|(o, c)| dot(&flat(o), &flat(c))).sum())
    };
    let (gf, gm) = modulate_vjp(&feats, &mods, &u)?;
    let analytic: f64 = gf.iter().zip(&vf).map(|(g, v)| dot(&flat(g), &flat(v))).sum::<f64>()
        + gm.iter().zip(&vm).map(|(g, v)| dot(&flat(g), &flat(v))).sum::<f64>();
    Ok(fd_gap(analytic, eval(-h)?, eval(h)?, h))
}

pub fn latent_gap(rng: &mut impl Rng, h: f64) -> Result<f64> {
    let dims = (2, 3, 4, 2);
    let mu = rand_a4(rng, dims, -1.0, 1.0);
    let ls = rand_a4(rng, dims, -2.0, 0.5);
    let (vm, vl, u) = (rand_a4(rng, dims, -1.0, 1.0), rand_a4(rng, dims, -1.0, 1.0), rand_a4(rng, dims, -1.0, 1.0));
    let seed = rng.random();
    let eval = |s: f64| -> Result<f64> {
        Ok(dot(&flat(&sample_latent(&(&mu + &(&vm * s)), &(&ls + &(&vl * s)), seed)?.value), &flat(&u)))
    };
    let eps = sample_latent(&mu, &ls, seed)?.eps;
    let (gm, gl) = sample_latent_vjp(&ls, &eps, &u)?;
    let analytic = dot(&flat(&gm), &flat(&vm)) + dot(&flat(&gl), &flat(&vl));
    Ok(fd_gap(analytic, eval(-h)?, eval(h)?, h))
}

pub fn gate_gap(rng: &mut impl Rng, h: f64) -> Result<f64> {
    let (l, f, fg, g) = (6, 3, 4, 2);
    let y = rand_a2(rng, (l, f));
    let xg = rand_a2(rng, (l, fg));
    let r = rand_a2(rng, (l, g));
    let gate = Affine::random(f, fg, 1.0, rng);
    let map = Affine::random(f, g, 0.5, rng);
    let (vy, vx, vr, u) = (rand_a2(rng, (l, f)), rand_a2(rng, (l, fg)), rand_a2(rng, (l, g)), rand_a2(rng, (l, f)));
    let eval = |s: f64| -> Result<f64> {
        let rr = &r + &(&vr * s);
        let out = gated_output(&(&y + &(&vy * s)), &(&xg + &(&vx * s)), &gate, Some(GateGuidance { r: &rr, map: &map }))?;
        Ok(dot(&flat(&out), &flat(&u)))
    };
    let gr = gated_output_vjp(&y, &xg, &gate, Some(GateGuidance { r: &r, map: &map }), &u)?;
    let g_r = gr.r.expect("guided gradients include r");
    let analytic = dot(&flat(&gr.y), &flat(&vy)) + dot(&flat(&gr.x_gate), &flat(&vx)) + dot(&flat(&g_r), &flat(&vr));
    Ok(fd_gap(analytic, eval(-h)?, eval(h)?, h))
}

pub fn rbn_gap(rng: &mut impl Rng, h: f64) -> Result<f64> {
    let arch = RbnArch { image_channels: 2, latent_channels: 1, width: 3 };
    let weights = RbnWeights::random(arch, rng.random(), 0.5)?;
    let (t, n) = (1, 8);
    let img = rand_a4(rng, (t, n, n, 2), 0.0, 1.0);
    let tilt = safe_tilt(rng, t, n, n);
    let mu = rand_a4(rng, (t, n, n, 1), -1.0, 1.0);
    let ls = rand_a4(rng, (t, n, n, 1), -2.0, 0.0);
    let vi = rand_a4(rng, img.dim(), -1.0, 1.0);
    let vt = rand_a4(rng, tilt.dim(), -1.0, 1.0);
    let vm = rand_a4(rng, mu.dim(), -1.0, 1.0);
    let vl = rand_a4(rng, ls.dim(), -1.0, 1.0);
    let u = rand_a4(rng, img.dim(), -1.0, 1.0);
    let seed = rng.random();
    let lpd_at = |s: f64| -> Result<LatentPhaseDistortion> {
        LatentPhaseDistortion::new(TiltField::new(&tilt + &(&vt * s))?, &mu + &(&vm * s), &ls + &(&vl * s))
    };
    let eval = |s: f64| -> Result<f64> {
        let out = rbn_forward(&FrameSequence::new(&img + &(&vi * s))?, &lpd_at(s)?, &weights, seed)?;
        Ok(dot(&flat(out.data()), &flat(&u)))
    };
    let g = rbn_vjp(&FrameSequence::new(img.clone())?, &lpd_at(0.0)?, &weights, seed, &u)?;
    let analytic = dot(&flat(&g.image), &flat(&vi))
        + dot(&flat(&g.tilt), &flat(&vt))
        + dot(&flat(&g.mu), &flat(&vm))
        + dot(&flat(&g.log_sigma), &flat(&vl));
    Ok(fd_gap(analytic, eval(-h)?, eval(h)?, h))
}

fn kl() -> Result<SuiteReport> {
    let dims = (2, 3, 3, 2);
    let zeros = Array4::zeros(dims);
    let ones = Array4::ones(dims);
    let mut errors = vec![
        kl_loss(&zeros, &zeros, KlForm::Standard)?.abs(),
        (kl_loss(&ones, &zeros, KlForm::Standard)? - 0.5).abs(),
    ];
    // Printed form at μ = 0, log σ = 0: -0.5/(HW) · Σ(0 + 1 − 0 − 1) = 0.
    errors.push(kl_loss(&zeros, &zeros, KlForm::AsPrinted)?.abs());
    // μ = 1, σ = 1: each element contributes (0 + 1 − 1 − 1) = −1; the sum
    // over T·C_b·H·W elements divided by H·W is −T·C_b.
    let expect = 0.5 * (dims.0 * dims.3) as f64;
    errors.push((kl_loss(&ones, &zeros, KlForm::AsPrinted)? - expect).abs());
    Ok(SuiteReport::from_errors("kl", &errors, 1e-9))
}

fn zernike() -> Result<SuiteReport> {
    let gram = ZernikeBasis::build(36, 128)?.gram();
    let errors: Vec<f64> = gram
        .indexed_iter()
        .map(|((i, j), &v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
        .collect();
    Ok(SuiteReport::from_errors("zernike", &errors, 2e-2))
}

/// One unit of error for every element that differs at the bit level.
fn guidance(instances: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x44);
    let mut errors = Vec::with_capacity(2 * instances);
    let bits = |a: &Array2<f64>, b: &Array2<f64>| {
        a.iter().zip(b).filter(|(x, y)| x.to_bits() != y.to_bits()).count() as f64
    };
    for _ in 0..instances {
        let (l, f, n, g) = (rng.random_range(1..=64), rng.random_range(1..=4), rng.random_range(1..=8), rng.random_range(1..=4));
        let proj = SelectiveProjections::random(f, n, &mut rng);
        let x = rand_a2(&mut rng, (l, f));
        let r = rand_a2(&mut rng, (l, g));
        let zero = GuidanceProjections::zeros(f, n, g);
        let opts = ScanOptions::default();
        let plain = selective_ssm(&x, &proj, None, opts)?;
        let guided = selective_ssm(&x, &proj, Some(Guidance { r: &r, proj: &zero }), opts)?;
        errors.push(bits(&plain, &guided));
        let gate = Affine::random(f, f, 1.0, &mut rng);
        let map = Affine::zeros(f, g);
        let a = gated_output(&plain, &x, &gate, None)?;
        let b = gated_output(&plain, &x, &gate, Some(GateGuidance { r: &r, map: &map }))?;
        errors.push(bits(&a, &b));
    }
    Ok(SuiteReport::from_errors("guidance", &errors, 0.0))
}

fn ema() -> Result<SuiteReport> {
    let beta = crate::losses::EMA_BETA;
    let n = 1000;
    let mut errors = Vec::new();
    for (t0, s) in [(1.0, 0.0), (0.25, -0.5), (3.0, 2.0)] {
        let mut teacher = vec![t0];
        for _ in 0..n {
            ema_update(&mut teacher, &[s], beta)?;
        }
        let expect = (t0 - s) * beta.powi(n);
        errors.push(((teacher[0] - s) - expect).abs() / expect.abs());
    }
    Ok(SuiteReport::from_errors("ema", &errors, 1e-12))
}

fn tensor_file(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
    let mut errors = Vec::new();
    for _ in 0..20 {
        let dims: Vec<usize> = (0..rng.random_range(0..4)).map(|_| rng.random_range(1..6)).collect();
        let data: Vec<f32> = (0..dims.iter().product()).map(|_| f32::from_bits(rng.random::<u32>() & 0x7f7f_ffff)).collect();
        let t = TensorFile::new(dims, data)?;
        let back = TensorFile::decode(&t.encode())?;
        let same = back.dims == t.dims && back.data.iter().zip(&t.data).all(|(a, b)| a.to_bits() == b.to_bits());
        errors.push(if same { 0.0 } else { 1.0 });
    }
    Ok(SuiteReport::from_errors("tensor-file", &errors, 0.0))
}
