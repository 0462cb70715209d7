//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so every line is printed.
//! The process exits nonzero if any criterion fails.

use std::time::Instant;

use ndarray::{Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use turbssm::harness::bench::{attention_ladder, degrade_timings, ladder_slope, scan_ladder};
use turbssm::harness::check::{
    blur_gap, gate_gap, latent_gap, modulate_gap, rbn_gap, small_psf_basis, warp_gap,
};
use turbssm::harness::invert::{initial_lpd, invert, synthetic_problem};
use turbssm::harness::simulate::{build_simulator, sample_field};
use turbssm::harness::RunConfig;
use turbssm::losses::{ema_update, psnr, EMA_BETA};
use turbssm::lpd::{kl_loss, KlForm};
use turbssm::scanorder::{build_permutation, ScanOrder};
use turbssm::ssm::{
    conv_mode, gated_output, parallel_scan, recurrence, selective_ssm, Affine, GateGuidance,
    Guidance, GuidanceProjections, ScanOptions, SelectiveProjections, StepParams,
};
use turbssm::zernike::zernike;
use turbssm::FrameSequence;

const SCAN_TOL: f64 = 1e-6;
const SCAN_BUDGET_S: f64 = 30.0;
const CONV_TOL: f64 = 1e-6;
const SCAN_SLOPE: (f64, f64) = (1.0, 0.15);
const ATTENTION_SLOPE: (f64, f64) = (2.0, 0.2);
const LADDER_BUDGET_S: f64 = 300.0;
const MIN_SPEEDUP: f64 = 10.0;
const MIN_FIDELITY_DB: f64 = 35.0;
const FIDELITY_BUDGET_S: f64 = 300.0;
const GRAD_TOL: f64 = 1e-3;
const GRAD_INSTANCES: usize = 50;
const MAX_TILT_RMSE: f64 = 0.25;
const MIN_LOSS_RATIO: f64 = 2.0;
const KL_TOL: f64 = 1e-9;
const GRAM_TOL: f64 = 2e-2;
const EMA_ULPS: f64 = 2.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Criterion = fn() -> turbssm::Result<Outcome>;

/// `max|a − b| / (1 + max|b|)`.
fn scaled_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let den = 1.0 + b.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    num / den
}

/// Textbook loop over the recurrence, written out independently.
fn naive_scan(p: &StepParams, x: &[f64]) -> Vec<f64> {
    let n = p.state_size();
    let mut h = vec![0.0; n];
    let mut y = Vec::with_capacity(x.len());
    for (t, &xt) in x.iter().enumerate() {
        let mut acc = p.d * xt;
        for k in 0..n {
            h[k] = p.abar[[t, k]] * h[k] + p.bbar[[t, k]] * xt;
            acc += p.c[[t, k]] * h[k];
        }
        y.push(acc);
    }
    y
}

fn uniform(rng: &mut impl Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

fn scan_oracle() -> turbssm::Result<Outcome> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let len = rng.random_range(1..=512);
        let n = rng.random_range(1..=16);
        let chunk = rng.random_range(1..=128);
        let m = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| Array2::from_shape_simple_fn((len, n), || rng.random_range(lo..hi));
        let abar = m(&mut rng, 0.0, 0.999);
        let bbar = m(&mut rng, -1.0, 1.0);
        let c = m(&mut rng, -1.0, 1.0);
        let p = StepParams::new(abar, bbar, c, rng.random_range(-1.0..1.0))?;
        let x = uniform(&mut rng, len, -1.0, 1.0);
        let fast = parallel_scan(&p, &x, ScanOptions { chunk, parallel: true })?;
        let slow = recurrence(&p, &x)?;
        worst = worst.max(scaled_err(&fast, &naive_scan(&p, &x))).max(scaled_err(&fast, &slow));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        worst < SCAN_TOL && secs < SCAN_BUDGET_S,
        format!("1000 instances, worst rel err {worst:.2e} (< {SCAN_TOL:e}), {secs:.2} s (< {SCAN_BUDGET_S} s)"),
    ))
}

fn conv_kernel() -> turbssm::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let len = rng.random_range(1..=512);
        let n = rng.random_range(1..=16);
        let abar = uniform(&mut rng, n, -0.99, 0.99);
        let bbar = uniform(&mut rng, n, -1.0, 1.0);
        let c = uniform(&mut rng, n, -1.0, 1.0);
        let d = rng.random_range(-1.0..1.0);
        let p = StepParams::time_invariant(&abar, &bbar, &c, d, len)?;
        let x = uniform(&mut rng, len, -1.0, 1.0);
        // Kernel from explicit powers, then a direct causal sum.
        let kernel: Vec<f64> = (0..len)
            .map(|i| (0..n).map(|k| c[k] * abar[k].powi(i as i32) * bbar[k]).sum())
            .collect();
        let direct: Vec<f64> = (0..len).map(|t| d * x[t] + (0..=t).map(|s| kernel[t - s] * x[s]).sum::<f64>()).collect();
        let rec = recurrence(&p, &x)?;
        worst = worst.max(scaled_err(&direct, &rec)).max(scaled_err(&conv_mode(&p, &x)?, &rec));
    }
    Ok(outcome(worst < CONV_TOL, format!("200 systems, worst rel err {worst:.2e} (< {CONV_TOL:e})")))
}

fn linear_complexity() -> turbssm::Result<Outcome> {
    let start = Instant::now();
    let scan = scan_ladder(10, 20, 2, 256, 3, 303)?;
    let attn = attention_ladder(8, 12, 8, 3, 303)?;
    let (s, a) = (ladder_slope(&scan)?, ladder_slope(&attn)?);
    let secs = start.elapsed().as_secs_f64();
    let pass = (s - SCAN_SLOPE.0).abs() <= SCAN_SLOPE.1
        && (a - ATTENTION_SLOPE.0).abs() <= ATTENTION_SLOPE.1
        && secs < LADDER_BUDGET_S;
    Ok(outcome(
        pass,
        format!(
            "scan slope {s:.3} (1.0 ± {}), attention slope {a:.3} (2.0 ± {}), {secs:.1} s",
            SCAN_SLOPE.1, ATTENTION_SLOPE.1
        ),
    ))
}

fn simulator_speed() -> turbssm::Result<Outcome> {
    let cfg = RunConfig::default();
    let (fast, slow) = degrade_timings(&cfg)?;
    let speedup = slow / fast;
    Ok(outcome(
        speedup >= MIN_SPEEDUP
            && cfg.bench.size == 128
            && cfg.basis.k == 100
            && cfg.turbulence.kernel_size == 33,
        format!(
            "128x128, K=100, kernel 33: low-rank {:.1} ms, direct {:.1} ms, speedup {speedup:.1}x (>= {MIN_SPEEDUP}x)",
            fast * 1e3,
            slow * 1e3
        ),
    ))
}

fn fidelity() -> turbssm::Result<Outcome> {
    let start = Instant::now();
    let strengths = [0.5, 0.75, 1.0, 1.25, 1.5];
    let image = FrameSequence::from_fn((1, 64, 64, 3), |(_, y, x, c)| {
        let checker = if (x / 8 + y / 8) % 2 == 0 { 0.2 } else { -0.2 };
        0.5 + checker + 0.2 * (0.37 * x as f64 + c as f64).sin() * (0.29 * y as f64).cos()
    });
    let mut scores = Vec::new();
    for (i, &s) in strengths.iter().enumerate() {
        let mut cfg = RunConfig::default();
        cfg.turbulence.d_over_r0 = s;
        cfg.seed = 500 + i as u64;
        let sim = build_simulator(&cfg)?;
        for j in 0..4 {
            let field = sample_field(&cfg, &image, 9000 + (4 * i + j) as u64)?;
            let fast = sim.degrade(&image, &field, 0.0, 0)?;
            let slow = sim.degrade_direct(&image, &field, 0.0, 0)?;
            scores.push(psnr(&fast, &slow, 1.0)?);
        }
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        mean > MIN_FIDELITY_DB && secs < FIDELITY_BUDGET_S,
        format!("20 configs at 64x64, D/r0 0.5..1.5: mean {mean:.2} dB, min {min:.2} dB (> {MIN_FIDELITY_DB} dB), {secs:.1} s"),
    ))
}

fn differentiability() -> turbssm::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let basis = small_psf_basis(&mut rng, 5, 4)?;
    let h = 1e-6;
    let mut worst = [0.0f64; 6];
    for _ in 0..GRAD_INSTANCES {
        let gaps = [
            warp_gap(&mut rng, h)?,
            blur_gap(&mut rng, &basis)?,
            modulate_gap(&mut rng)?,
            latent_gap(&mut rng, h)?,
            gate_gap(&mut rng, h)?,
            rbn_gap(&mut rng, h)?,
        ];
        for (w, g) in worst.iter_mut().zip(gaps) {
            *w = w.max(g);
        }
    }
    let names = ["warp", "basis_blur", "modulate", "sample_latent", "gated_output", "rbn_forward"];
    let detail = names.iter().zip(&worst).map(|(n, w)| format!("{n} {w:.1e}")).collect::<Vec<_>>().join(", ");
    Ok(outcome(worst.iter().all(|&w| w < GRAD_TOL), format!("{GRAD_INSTANCES} each, worst: {detail} (< {GRAD_TOL:e})")))
}

fn inversion() -> turbssm::Result<Outcome> {
    let cfg = RunConfig::default();
    let inv = &cfg.invert;
    let seed = 707;
    let p = synthetic_problem(inv, seed)?;
    let init = initial_lpd(inv.frames, inv.size, inv.size, inv.arch.latent_channels);
    let run = || invert(&p.clean, &p.degraded, &p.weights, init.clone(), inv, seed, Some(&p.truth.tilt));
    let a = run()?;
    let b = run()?;
    let rmse = a.final_tilt_rmse().unwrap_or(f64::INFINITY);
    let ratio = a.initial_loss() / a.final_loss();
    let same = a.to_csv() == b.to_csv();
    Ok(outcome(
        rmse < MAX_TILT_RMSE && ratio >= MIN_LOSS_RATIO && same && inv.size == 64 && inv.steps == 200,
        format!(
            "64x64, 200 steps: tilt RMSE {rmse:.3} px (< {MAX_TILT_RMSE}), loss ratio {ratio:.1} (>= {MIN_LOSS_RATIO}), repeatable {same}"
        ),
    ))
}

fn kl_forms() -> turbssm::Result<Outcome> {
    let dims = (2, 4, 5, 3);
    let zeros = Array4::<f64>::zeros(dims);
    let ones = Array4::<f64>::ones(dims);
    let matched = kl_loss(&zeros, &zeros, KlForm::Standard)?;
    let shifted = kl_loss(&ones, &zeros, KlForm::Standard)?;
    // As printed, summed over every element and divided by H·W only.
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mu = Array4::from_shape_simple_fn(dims, || rng.random_range(-1.0..1.0));
    let ls = Array4::from_shape_simple_fn(dims, || rng.random_range(-1.0..1.0));
    let sum: f64 = mu.iter().zip(&ls).map(|(&m, &l): (&f64, &f64)| 2.0 * l + 1.0 - m - l.exp()).sum();
    let printed = -0.5 * sum / (dims.1 * dims.2) as f64;
    let printed_err = (kl_loss(&mu, &ls, KlForm::AsPrinted)? - printed).abs();
    Ok(outcome(
        matched == 0.0 && (shifted - 0.5).abs() < KL_TOL && printed_err < KL_TOL,
        format!("KL(0,1) = {:e}, KL(1,1) = {shifted:.12}, printed-form err {printed_err:.1e}", matched.abs()),
    ))
}

fn hilbert_locality() -> turbssm::Result<Outcome> {
    let (t, n, block) = (2, 16, 8);
    let hil = build_permutation(ScanOrder::LocalHilbert, t, n, n, block)?;
    let raster = build_permutation(ScanOrder::SpaceFirst, t, n, n, block)?;
    let tile = block * block;
    let mut bad = 0;
    for s in 1..hil.len() {
        if s % tile == 0 {
            continue;
        }
        let (t0, y0, x0) = hil.coords(s - 1);
        let (t1, y1, x1) = hil.coords(s);
        if t0 != t1 || y0.abs_diff(y1) + x0.abs_diff(x1) != 1 {
            bad += 1;
        }
    }
    let mean = |p: &turbssm::scanorder::ScanPermutation| {
        (1..p.len())
            .map(|s| {
                let (a, b, c) = p.coords(s - 1);
                let (d, e, f) = p.coords(s);
                (a.abs_diff(d) + b.abs_diff(e) + c.abs_diff(f)) as f64
            })
            .sum::<f64>()
            / (p.len() - 1) as f64
    };
    let (mh, mr) = (mean(&hil), mean(&raster));
    Ok(outcome(
        bad == 0 && mh < mr,
        format!("16x16 frames: {bad} non-adjacent in-tile steps, mean Manhattan {mh:.3} local-hilbert vs {mr:.3} space-first"),
    ))
}

fn zernike_gram() -> turbssm::Result<Outcome> {
    // Midpoint samples of the unit disk on a 128 grid, modes evaluated
    // pointwise from the analytic definition.
    let g = 128;
    let modes = 36;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for i in 0..g {
        for j in 0..g {
            let x = (2.0 * j as f64 + 1.0) / g as f64 - 1.0;
            let y = (2.0 * i as f64 + 1.0) / g as f64 - 1.0;
            let rho = x.hypot(y);
            if rho <= 1.0 {
                let th = y.atan2(x);
                rows.push((1..=modes).map(|m| zernike(m, rho, th)).collect());
            }
        }
    }
    let npts = rows.len() as f64;
    let mut worst = 0.0f64;
    for a in 0..modes {
        for b in a..modes {
            let v: f64 = rows.iter().map(|r| r[a] * r[b]).sum::<f64>() / npts;
            worst = worst.max((v - if a == b { 1.0 } else { 0.0 }).abs());
        }
    }
    Ok(outcome(worst < GRAM_TOL, format!("36 modes at grid 128: max |G − I| = {worst:.2e} (< {GRAM_TOL:e})")))
}

fn neutral_guidance() -> turbssm::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut differing = 0usize;
    let bits = |a: &Array2<f64>, b: &Array2<f64>| a.iter().zip(b).filter(|(x, y)| x.to_bits() != y.to_bits()).count();
    for _ in 0..100 {
        let (l, f, n, g) = (rng.random_range(1..=128), rng.random_range(1..=4), rng.random_range(1..=16), rng.random_range(1..=4));
        let proj = SelectiveProjections::random(f, n, &mut rng);
        let x = Array2::from_shape_simple_fn((l, f), || rng.random_range(-1.0..1.0));
        let r = Array2::from_shape_simple_fn((l, g), || rng.random_range(-1.0..1.0));
        let zero = GuidanceProjections::zeros(f, n, g);
        let opts = ScanOptions::default();
        let plain = selective_ssm(&x, &proj, None, opts)?;
        let guided = selective_ssm(&x, &proj, Some(Guidance { r: &r, proj: &zero }), opts)?;
        differing += bits(&plain, &guided);
        let gate = Affine::random(f, f, 1.0, &mut rng);
        let map = Affine::zeros(f, g);
        let a = gated_output(&plain, &x, &gate, None)?;
        let b = gated_output(&plain, &x, &gate, Some(GateGuidance { r: &r, map: &map }))?;
        differing += bits(&a, &b);
    }
    Ok(outcome(differing == 0, format!("100 instances: {differing} elements differ bitwise from the unguided path")))
}

fn ema_geometry() -> turbssm::Result<Outcome> {
    let n = 1000;
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let t0 = uniform(&mut rng, 64, -3.0, 3.0);
    let s = uniform(&mut rng, 64, -3.0, 3.0);
    let mut teacher = t0.clone();
    for _ in 0..n {
        ema_update(&mut teacher, &s, EMA_BETA)?;
    }
    let contraction = EMA_BETA.powi(n);
    // Each update rounds at most a few ulps of the larger operand, so the
    // accumulated absolute error is bounded by n·EMA_ULPS·ε·max(|θ_t|, |θ_s|).
    for i in 0..t0.len() {
        let expect = (t0[i] - s[i]) * contraction;
        let bound = n as f64 * EMA_ULPS * f64::EPSILON * t0[i].abs().max(s[i].abs());
        worst = worst.max(((teacher[i] - s[i]) - expect).abs() / bound);
    }
    Ok(outcome(
        worst <= 1.0,
        format!("beta {EMA_BETA}, n {n}: contraction {contraction:.6e}, worst deviation {worst:.3} of the {EMA_ULPS}-ulp-per-step rounding bound"),
    ))
}

fn main() {
    let criteria: [(&str, Criterion); 12] = [
        ("scan-oracle", scan_oracle),
        ("conv-kernel", conv_kernel),
        ("linear-complexity", linear_complexity),
        ("simulator-speed", simulator_speed),
        ("low-rank-fidelity", fidelity),
        ("differentiability", differentiability),
        ("inversion", inversion),
        ("kl-closed-forms", kl_forms),
        ("hilbert-locality", hilbert_locality),
        ("zernike-orthonormality", zernike_gram),
        ("neutral-guidance", neutral_guidance),
        ("ema-geometry", ema_geometry),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let o = run().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
