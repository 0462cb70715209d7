//! Timing runs: low-rank vs direct degradation and scan/attention ladders.

use std::fmt::Write as _;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::simulate::build_simulator;
use crate::error::Result;
use crate::ssm::{attention_baseline, fit_loglog_slope, parallel_scan, ScanOptions, StepParams};
use crate::tensor::FrameSequence;
use crate::zernike::sample_zernike_field;

/// Per-call wall time: the minimum over `repeats` samples, each sample
/// looping `f` until at least `min_sample` seconds have elapsed.
pub fn time_per_call<T>(repeats: usize, min_sample: f64, mut f: impl FnMut() -> T) -> f64 {
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let mut calls = 0u32;
        loop {
            std::hint::black_box(f());
            calls += 1;
            let elapsed = start.elapsed().as_secs_f64();
            if elapsed >= min_sample {
                best = best.min(elapsed / calls as f64);
                break;
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub kind: String,
    pub size: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub degrade_seconds: f64,
    pub direct_seconds: f64,
    pub speedup: f64,
    pub scan_slope: f64,
    pub attention_slope: f64,
}

impl BenchReport {
    /// `kind,size,seconds` rows followed by derived `metric,...,value` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,size,seconds\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{:.9}", r.kind, r.size, r.seconds);
        }
        let _ = writeln!(s, "speedup,{},{:.4}", self.rows.iter().find(|r| r.kind == "degrade").map_or(0, |r| r.size), self.speedup);
        let _ = writeln!(s, "scan_slope,0,{:.4}", self.scan_slope);
        let _ = writeln!(s, "attention_slope,0,{:.4}", self.attention_slope);
        s
    }
}

/// A seeded test image with structure at several scales.
pub fn bench_image(t: usize, h: usize, w: usize, c: usize) -> FrameSequence {
    FrameSequence::from_fn((t, h, w, c), |(f, y, x, ch)| {
        let (xf, yf) = (x as f64, y as f64);
        let checker = if (x / 8 + y / 8 + f) % 2 == 0 { 0.15 } else { -0.15 };
        0.5 + checker + 0.2 * (0.31 * xf + ch as f64).sin() * (0.23 * yf).cos()
    })
}

/// Seconds per call for `(degrade, degrade_direct)` on one frame.
pub fn degrade_timings(cfg: &RunConfig) -> Result<(f64, f64)> {
    let sim = build_simulator(cfg)?;
    let b = &cfg.bench;
    let image = bench_image(1, b.size, b.size, b.channels);
    let spec = cfg.turbulence.field_spec(1.0)?;
    let field = sample_zernike_field(&spec, (1, b.size, b.size, cfg.turbulence.channels), cfg.seed)?;
    // Warm the cached blur plan so both paths are timed in steady state.
    sim.degrade(&image, &field, 0.0, 0)?;
    let fast = time_per_call(b.repeats, 0.2, || sim.degrade(&image, &field, 0.0, 0));
    let slow = time_per_call(b.repeats, 0.0, || sim.degrade_direct(&image, &field, 0.0, 0));
    Ok((fast, slow))
}

/// A stable random time-invariant system of length `len` and state size `n`.
pub fn random_steps(len: usize, n: usize, rng: &mut impl Rng) -> Result<StepParams> {
    let abar: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..0.99)).collect();
    let bbar: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    StepParams::time_invariant(&abar, &bbar, &c, rng.random_range(-1.0..1.0), len)
}

/// `(length, seconds)` of [`parallel_scan`] over `2^lo ..= 2^hi`.
pub fn scan_ladder(lo: u32, hi: u32, n: usize, chunk: usize, repeats: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = ScanOptions { chunk, ..ScanOptions::default() };
    (lo..=hi)
        .map(|p| {
            let len = 1usize << p;
            let params = random_steps(len, n, &mut rng)?;
            let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            Ok((len, time_per_call(repeats, 0.02, || parallel_scan(&params, &x, opts))))
        })
        .collect()
}

/// `(length, seconds)` of [`attention_baseline`] over `2^lo ..= 2^hi`.
pub fn attention_ladder(lo: u32, hi: u32, dim: usize, repeats: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (lo..=hi)
        .map(|p| {
            let len = 1usize << p;
            let mut m = || Array2::from_shape_fn((len, dim), |_| rng.random_range(-1.0..1.0));
            let (q, k, v) = (m(), m(), m());
            Ok((len, time_per_call(repeats, 0.02, || attention_baseline(&q, &k, &v))))
        })
        .collect()
}

/// Log-log slope of a ladder.
pub fn ladder_slope(points: &[(usize, f64)]) -> Result<f64> {
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    fit_loglog_slope(&xs, &ys)
}

pub fn run_bench(cfg: &RunConfig) -> Result<BenchReport> {
    let b = &cfg.bench;
    let (fast, slow) = degrade_timings(cfg)?;
    let mut rows = vec![
        BenchRow { kind: "degrade".into(), size: b.size, seconds: fast },
        BenchRow { kind: "degrade_direct".into(), size: b.size, seconds: slow },
    ];
    let scan = scan_ladder(b.scan_log2[0], b.scan_log2[1], b.scan_state_size, cfg.ssm.chunk, b.repeats, cfg.seed)?;
    let attn = attention_ladder(b.attention_log2[0], b.attention_log2[1], b.attention_dim, b.repeats, cfg.seed)?;
    rows.extend(scan.iter().map(|&(size, seconds)| BenchRow { kind: "scan".into(), size, seconds }));
    rows.extend(attn.iter().map(|&(size, seconds)| BenchRow { kind: "attention".into(), size, seconds }));
    Ok(BenchReport {
        rows,
        degrade_seconds: fast,
        direct_seconds: slow,
        speedup: slow / fast,
        scan_slope: ladder_slope(&scan)?,
        attention_slope: ladder_slope(&attn)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladders_have_one_point_per_power() {
        let s = scan_ladder(4, 6, 2, 8, 1, 0).unwrap();
        assert_eq!(s.iter().map(|p| p.0).collect::<Vec<_>>(), vec![16, 32, 64]);
        assert!(s.iter().all(|p| p.1 > 0.0));
        assert_eq!(attention_ladder(3, 4, 2, 1, 0).unwrap().len(), 2);
    }

    #[test]
    fn csv_lists_rows_and_slopes() {
        let r = BenchReport {
            rows: vec![BenchRow { kind: "degrade".into(), size: 8, seconds: 0.5 }],
            degrade_seconds: 0.5,
            direct_seconds: 5.0,
            speedup: 10.0,
            scan_slope: 1.0,
            attention_slope: 2.0,
        };
        let csv = r.to_csv();
        assert!(csv.starts_with("kind,size,seconds\ndegrade,8,0.500000000\n"));
        assert!(csv.contains("speedup,8,10.0000"));
    }
}
