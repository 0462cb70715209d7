//! Property tests for the invariants of each module.

use ndarray::{Array2, Array4, ArrayD, IxDyn};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use turbssm::harness::image_io::quantize;
use turbssm::harness::tensor_file::TensorFile;
use turbssm::losses::{charbonnier, ema_update, psnr, total_loss, LossWeights, RestoreTerms};
use turbssm::lpd::{kl_loss, KlForm};
use turbssm::scanorder::{apply, build_permutation, unapply, ScanOrder};
use turbssm::ssm::{
    combine, conv_mode, geometric_state_bound, hidden_states, parallel_scan, recurrence, selective_params,
    ScanOptions, SelectiveProjections, StepParams,
};
use turbssm::turbsim::{
    basis_blur, basis_blur_vjp, blur_weights_strided, build_psf_basis, warp, warp_vjp, PsfBasisConfig, SimConfig,
    Simulator,
};
use turbssm::zernike::{phase_from_coeffs, sample_zernike_field, FieldCovarianceSpec, ZernikeBasis, ZernikeField};
use turbssm::{FrameSequence, TiltField};

const KS: usize = 9;
const CHANNELS: usize = 15;

fn spec(d_over_r0: f64) -> FieldCovarianceSpec {
    FieldCovarianceSpec::kolmogorov(d_over_r0, CHANNELS, KS, 6.0, 0.5).unwrap()
}

fn simulator(k: usize, stride: usize) -> Simulator {
    let zb = ZernikeBasis::build(CHANNELS, 32).unwrap();
    let fields: Vec<ZernikeField> = [0.5, 1.0, 1.5]
        .iter()
        .enumerate()
        .map(|(i, &s)| sample_zernike_field(&FieldCovarianceSpec { spatial_correlation_length: 2.0, ..spec(s) }, (1, 24, 24, CHANNELS), 300 + i as u64).unwrap())
        .collect();
    let cfg = PsfBasisConfig { k, samples: 1600, ..PsfBasisConfig::default() };
    let basis = build_psf_basis(&fields, &zb, &cfg).unwrap();
    Simulator::new(zb, basis, SimConfig { weight_stride: stride, ..SimConfig::default() }).unwrap()
}

fn steps(rng: &mut ChaCha8Rng, len: usize, n: usize) -> StepParams {
    let mut m = |lo: f64, hi: f64| Array2::from_shape_simple_fn((len, n), || rng.random_range(lo..hi));
    let (a, b, c) = (m(-0.99, 0.99), m(-1.0, 1.0), m(-1.0, 1.0));
    StepParams::new(a, b, c, rng.random_range(-1.0..1.0)).unwrap()
}

fn vec_in(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn scaled_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    num / (1.0 + b.iter().fold(0.0f64, |m, y| m.max(y.abs())))
}

fn frames(rng: &mut ChaCha8Rng, dims: (usize, usize, usize, usize)) -> FrameSequence {
    FrameSequence::new(Array4::from_shape_simple_fn(dims, || rng.random_range(0.0..1.0))).unwrap()
}

fn largest_pow2(n: usize) -> usize {
    1 << (usize::BITS - 1 - n.leading_zeros())
}

fn dot(a: &Array4<f64>, b: &Array4<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Zernike.

    #[test]
    fn phase_is_linear_in_coefficients(seed in any::<u64>(), al in -2.0f64..2.0, be in -2.0f64..2.0) {
        let zb = ZernikeBasis::build(15, 48).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = vec_in(&mut rng, 15);
        let b = vec_in(&mut rng, 15);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| al * x + be * y).collect();
        let lhs = phase_from_coeffs(&zb, &mix, 11).unwrap();
        let rhs = phase_from_coeffs(&zb, &a, 11).unwrap() * al + phase_from_coeffs(&zb, &b, 11).unwrap() * be;
        prop_assert!(lhs.iter().zip(&rhs).all(|(x, y)| (x - y).abs() < 1e-6));
    }

    #[test]
    fn field_seeds_are_deterministic_and_distinct(seed in any::<u64>()) {
        let s = spec(1.0);
        let a = sample_zernike_field(&s, (2, 6, 6, CHANNELS), seed).unwrap();
        let b = sample_zernike_field(&s, (2, 6, 6, CHANNELS), seed).unwrap();
        let c = sample_zernike_field(&s, (2, 6, 6, CHANNELS), seed.wrapping_add(1)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a != c);
    }

    // Warp and blur.

    #[test]
    fn degrade_gradients_match_finite_differences(seed in any::<u64>()) {
        let sim = simulator(8, 1);
        let basis = sim.psf_basis();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 8;
        let img = frames(&mut rng, (1, n, n, 2));
        // Fractional parts stay clear of cell boundaries for the probe step.
        let tilt = Array4::from_shape_simple_fn((1, n, n, 2), || {
            rng.random_range(-2i32..2) as f64 + rng.random_range(0.1..0.9)
        });
        let field = sample_zernike_field(&spec(1.0), (1, n, n, CHANNELS), seed).unwrap();
        let weights = blur_weights_strided(&field, sim.zernike(), basis, 1).unwrap();
        let vi = Array4::from_shape_simple_fn(img.data().dim(), || rng.random_range(-1.0..1.0));
        let vt = Array4::from_shape_simple_fn(tilt.dim(), || rng.random_range(-1.0..1.0));
        let u = Array4::from_shape_simple_fn(img.data().dim(), || rng.random_range(-1.0..1.0));
        let warp_at = |s: f64| {
            let im = FrameSequence::new(img.data() + &(&vi * s)).unwrap();
            let tl = TiltField::new(&tilt + &(&vt * s)).unwrap();
            warp(&im, &tl).unwrap().into_inner()
        };
        let tl = TiltField::new(tilt.clone()).unwrap();
        let warped = warp(&img, &tl).unwrap();
        let (g_warped, _) = basis_blur_vjp(&warped, &weights, basis, &u).unwrap();
        let (gi, gt) = warp_vjp(&img, &tl, &g_warped).unwrap();
        let analytic = dot(&gi, &vi) + dot(&gt, &vt);
        let h = 1e-3;
        // The blur is linear, so blurring the warp difference once keeps its
        // single-precision transform out of the cancellation.
        let diff = FrameSequence::new(warp_at(h) - warp_at(-h)).unwrap();
        let fd = dot(basis_blur(&diff, &weights, basis).unwrap().data(), &u) / (2.0 * h);
        prop_assert!((analytic - fd).abs() <= 1e-3 * analytic.abs().max(fd.abs()).max(1e-3), "{} vs {}", analytic, fd);
    }

    // State-space kernels.

    #[test]
    fn scan_matches_recurrence(seed in any::<u64>(), len in 1usize..=512, n in 1usize..=16, chunk in 1usize..=96) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = steps(&mut rng, len, n);
        let x = vec_in(&mut rng, len);
        let fast = parallel_scan(&p, &x, ScanOptions { chunk, parallel: true }).unwrap();
        prop_assert!(scaled_err(&fast, &recurrence(&p, &x).unwrap()) < 1e-6);
    }

    #[test]
    fn scan_is_linear_in_the_input(seed in any::<u64>(), len in 1usize..=256, al in -2.0f64..2.0, be in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = steps(&mut rng, len, 4);
        let (x1, x2) = (vec_in(&mut rng, len), vec_in(&mut rng, len));
        let mix: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| al * a + be * b).collect();
        let opts = ScanOptions { chunk: 32, parallel: true };
        let y1 = parallel_scan(&p, &x1, opts).unwrap();
        let y2 = parallel_scan(&p, &x2, opts).unwrap();
        let lin: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| al * a + be * b).collect();
        prop_assert!(scaled_err(&parallel_scan(&p, &mix, opts).unwrap(), &lin) < 1e-6);
    }

    #[test]
    fn combine_is_associative(seed in any::<u64>(), n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e: Vec<(Vec<f64>, Vec<f64>)> = (0..3).map(|_| (vec_in(&mut rng, n), vec_in(&mut rng, n))).collect();
        let ab = combine((&e[0].0, &e[0].1), (&e[1].0, &e[1].1));
        let left = combine((&ab.0, &ab.1), (&e[2].0, &e[2].1));
        let bc = combine((&e[1].0, &e[1].1), (&e[2].0, &e[2].1));
        let right = combine((&e[0].0, &e[0].1), (&bc.0, &bc.1));
        for k in 0..n {
            prop_assert!((left.0[k] - right.0[k]).abs() < 1e-9 && (left.1[k] - right.1[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn conv_mode_matches_recurrence(seed in any::<u64>(), len in 1usize..=256, n in 1usize..=16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (0..n).map(|_| rng.random_range(-0.99..0.99)).collect::<Vec<_>>();
        let p = StepParams::time_invariant(&a, &vec_in(&mut rng, n), &vec_in(&mut rng, n), 0.4, len).unwrap();
        let x = vec_in(&mut rng, len);
        prop_assert!(scaled_err(&conv_mode(&p, &x).unwrap(), &recurrence(&p, &x).unwrap()) < 1e-6);
    }

    #[test]
    fn states_respect_the_geometric_bound(seed in any::<u64>(), len in 1usize..=256, n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = steps(&mut rng, len, n);
        let x = vec_in(&mut rng, len);
        let bound = geometric_state_bound(&p, &x).unwrap();
        let states = hidden_states(&p, &x).unwrap();
        prop_assert!(states.iter().flatten().all(|h| h.abs() <= bound * (1.0 + 1e-12)));
    }

    #[test]
    fn selective_steps_are_positive(seed in any::<u64>(), l in 1usize..=32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let proj = SelectiveProjections::random(3, 4, &mut rng);
        let x = Array2::from_shape_simple_fn((l, 3), || rng.random_range(-30.0..30.0));
        let p = selective_params(&x, &proj, None).unwrap();
        prop_assert!(p.delta.iter().all(|&d| d > 0.0 && d.is_finite()));
    }

    // Latent terms.

    #[test]
    fn standard_kl_is_nonnegative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = (2, 3, 4, 2);
        let mu = Array4::from_shape_simple_fn(dims, || rng.random_range(-5.0..5.0));
        let ls = Array4::from_shape_simple_fn(dims, || rng.random_range(-5.0..3.0));
        prop_assert!(kl_loss(&mu, &ls, KlForm::Standard).unwrap() >= 0.0);
    }

    // Scan orders.

    #[test]
    fn orders_are_bijections(t in 1usize..=8, h in 1usize..=64, w in 1usize..=64, log_block in 0u32..5, which in 0usize..3) {
        let order = ScanOrder::ALL[which];
        let block = largest_pow2(h.min(w)).min(1 << log_block);
        let p = build_permutation(order, t, h, w, block).unwrap();
        let mut seen = p.forward().to_vec();
        seen.sort_unstable();
        prop_assert!(seen.iter().enumerate().all(|(i, &v)| i == v));
        let tokens: Vec<usize> = (0..t * h * w).map(|i| i * 7 + 3).collect();
        let there = apply(&p, &tokens).unwrap();
        let mut sorted = there.clone();
        sorted.sort_unstable();
        prop_assert_eq!(&sorted, &tokens);
        prop_assert_eq!(unapply(&p, &there).unwrap(), tokens);
    }

    #[test]
    fn raster_orders_separate_time_by_frame_size(t in 2usize..=4, h in 1usize..=12, w in 1usize..=12) {
        let space = build_permutation(ScanOrder::SpaceFirst, t, h, w, 8).unwrap();
        let time = build_permutation(ScanOrder::TimeFirst, t, h, w, 8).unwrap();
        let pos = |p: &turbssm::scanorder::ScanPermutation, coord: (usize, usize, usize)| {
            (0..p.len()).find(|&s| p.coords(s) == coord).unwrap()
        };
        for (y, x) in [(0, 0), (h - 1, w - 1), (h / 2, w / 2)] {
            prop_assert_eq!(pos(&space, (1, y, x)) - pos(&space, (0, y, x)), h * w);
            prop_assert_eq!(pos(&time, (1, y, x)) - pos(&time, (0, y, x)), 1);
        }
    }

    #[test]
    fn hilbert_is_more_local_than_raster(t in 1usize..=3, side in 8usize..=40, log_block in 1u32..=3) {
        let block = 1usize << log_block;
        let hil = build_permutation(ScanOrder::LocalHilbert, t, side, side, block).unwrap();
        let raster = build_permutation(ScanOrder::SpaceFirst, t, side, side, block).unwrap();
        prop_assert!(hil.mean_consecutive_manhattan() < raster.mean_consecutive_manhattan());
    }

    // Losses and metrics.

    #[test]
    fn charbonnier_is_symmetric_with_a_floor(seed in any::<u64>(), eps in 1e-6f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = frames(&mut rng, (1, 5, 4, 2));
        let b = frames(&mut rng, (1, 5, 4, 2));
        let ab = charbonnier(&a, &b, eps).unwrap();
        prop_assert_eq!(ab, charbonnier(&b, &a, eps).unwrap());
        prop_assert!(ab >= eps);
    }

    #[test]
    fn psnr_detects_constant_shifts(seed in any::<u64>(), c in 1e-3f64..0.5, neg in any::<bool>(), peak in 0.5f64..255.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = frames(&mut rng, (1, 6, 6, 1));
        let c = if neg { -c } else { c };
        let b = FrameSequence::new(a.data().mapv(|v| v + c)).unwrap();
        let expect = (20.0 * (peak / c.abs()).log10()).min(turbssm::losses::PSNR_CAP_DB);
        prop_assert!((psnr(&a, &b, peak).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn total_loss_is_linear_in_each_term(r1 in 0.0f64..5.0, r2 in 0.0f64..5.0, q1 in 0.0f64..5.0, q2 in 0.0f64..5.0, s in 0.0f64..3.0) {
        let w = LossWeights::default();
        let t = |r: f64, q: f64| total_loss(RestoreTerms { charbonnier: r, perceptual: None }, q, &w).unwrap().total;
        prop_assert!((t(r1 + s * r2, q1) - (t(r1, q1) + s * r2)).abs() < 1e-12);
        prop_assert!((t(r1, q1 + s * q2) - (t(r1, q1) + s * w.alpha * q2)).abs() < 1e-12);
    }

    #[test]
    fn ema_contracts_by_powers_of_beta(t0 in -10.0f64..10.0, s in -10.0f64..10.0, beta in 0.5f64..1.0, n in 1i32..200) {
        prop_assume!((t0 - s).abs() > 1e-3);
        let mut theta = [t0];
        for _ in 0..n {
            ema_update(&mut theta, &[s], beta).unwrap();
        }
        let expect = (t0 - s) * beta.powi(n);
        let bound = n as f64 * 2.0 * f64::EPSILON * t0.abs().max(s.abs());
        prop_assert!(((theta[0] - s) - expect).abs() <= bound);
    }

    // Files.

    #[test]
    fn tensor_files_round_trip(seed in any::<u64>(), dims in proptest::collection::vec(1usize..6, 0..5)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = dims.iter().product();
        let data: Vec<f32> = (0..n).map(|_| f32::from_bits(rng.random::<u32>() & 0x7f7f_ffff)).collect();
        let tf = TensorFile::new(dims.clone(), data).unwrap();
        let back = TensorFile::decode(&tf.encode()).unwrap();
        prop_assert_eq!(back.encode(), tf.encode());
        let arr = ArrayD::from_shape_fn(IxDyn(&dims), |_| rng.random_range(-1.0f32..1.0) as f64);
        prop_assert_eq!(TensorFile::from_array(&arr).to_array(), arr);
    }

    #[test]
    fn quantization_rounds_half_to_even(level in 0u8..=254) {
        let mid = (level as f64 + 0.5) / 255.0;
        let expect = if level % 2 == 0 { level } else { level + 1 };
        prop_assert_eq!(quantize(mid), expect);
        prop_assert_eq!(quantize(level as f64 / 255.0), level);
    }
}

#[test]
fn sampled_marginals_match_the_spec_variance() {
    let s = FieldCovarianceSpec {
        per_mode_variance: vec![0.3, 1.0, 2.5],
        spatial_correlation_length: 2.0,
        temporal_correlation: 0.6,
        kernel_size: KS,
    };
    let draws = 10_000;
    let mut sq = [0.0f64; 3];
    for seed in 0..draws {
        let f = sample_zernike_field(&s, (2, 4, 4, 4), seed).unwrap();
        for (c, acc) in sq.iter_mut().enumerate() {
            let v = f.coeffs()[[1, 2, 1, c]];
            *acc += v * v;
        }
    }
    for (c, acc) in sq.iter().enumerate() {
        let var = acc / draws as f64;
        let want = s.per_mode_variance[c];
        assert!((var / want - 1.0).abs() < 0.05, "mode {c}: {var} vs {want}");
    }
}

#[test]
fn degrade_keeps_flat_images_flat_under_uniform_fields() {
    let sim = simulator(40, 4);
    let basis = sim.psf_basis();
    let mass: Vec<f64> = basis.kernels().outer_iter().map(|k| k.sum()).collect();
    let flat = FrameSequence::from_fn((1, 32, 32, 1), |_| 0.5);
    for seed in 0..4 {
        let sample = sample_zernike_field(&spec(1.0), (1, 1, 1, CHANNELS), seed).unwrap();
        let c = sample.coeffs().slice(ndarray::s![0, 0, 0, ..]).to_owned();
        let field = ZernikeField::new(Array4::from_shape_fn((1, 32, 32, CHANNELS), |(_, _, _, i)| c[i])).unwrap();
        let direct = sim.degrade_direct(&flat, &field, 0.0, 0).unwrap();
        assert!(direct.data().iter().all(|v| (v - 0.5).abs() < 1e-9));
        // The low-rank output is off by exactly the reconstructed kernel's mass error.
        let weights = sim.blur_weights(&field).unwrap();
        let w = weights.weights().slice(ndarray::s![0, 0, 0, ..]);
        let gain: f64 = w.iter().zip(&mass).map(|(a, m)| a * m).sum();
        let fast = sim.degrade(&flat, &field, 0.0, 0).unwrap();
        assert!((gain - 1.0).abs() < 0.05, "gain {gain}");
        assert!(fast.data().iter().all(|v| (v - 0.5 * gain).abs() < 1e-5), "seed {seed}");
    }
}

#[test]
fn blur_lands_where_the_tilt_moved_the_point() {
    let sim = simulator(12, 1);
    let n = 24;
    let image = FrameSequence::from_fn((1, n, n, 1), |(_, y, x, _)| if (y, x) == (12, 12) { 1.0 } else { 0.0 });
    let base = sample_zernike_field(&spec(1.0), (1, n, n, CHANNELS), 5).unwrap();
    let mut coeffs = base.into_inner();
    let scale = sim.config().tilt_scale_for(KS);
    // Uniform tilt of (-4, -3) px: the output samples the input 4 px to the
    // left and 3 px up, so the point appears at (15, 16).
    coeffs.slice_mut(ndarray::s![.., .., .., 0]).fill(-4.0 / scale);
    coeffs.slice_mut(ndarray::s![.., .., .., 1]).fill(-3.0 / scale);
    let field = ZernikeField::new(coeffs).unwrap();
    let out = sim.degrade(&image, &field, 0.0, 0).unwrap();
    let (mut m, mut my, mut mx) = (0.0, 0.0, 0.0);
    for ((_, y, x, _), &v) in out.data().indexed_iter() {
        m += v;
        my += v * y as f64;
        mx += v * x as f64;
    }
    let (cy, cx) = (my / m, mx / m);
    assert!((cy - 15.0).abs() < 0.5 && (cx - 16.0).abs() < 0.5, "centroid ({cy}, {cx})");
}

#[test]
fn fidelity_improves_with_more_kernels_on_average() {
    let image = FrameSequence::from_fn((1, 24, 24, 1), |(_, y, x, _)| {
        0.5 + 0.4 * ((0.9 * x as f64).sin() * (0.7 * y as f64).cos())
    });
    let mut means = Vec::new();
    for k in [4, 12, 40] {
        let sim = simulator(k, 1);
        let mut total = 0.0;
        for seed in 0..4 {
            let field = sample_zernike_field(&spec(1.0), (1, 24, 24, CHANNELS), 100 + seed).unwrap();
            let fast = sim.degrade(&image, &field, 0.0, 0).unwrap();
            let slow = sim.degrade_direct(&image, &field, 0.0, 0).unwrap();
            total += psnr(&fast, &slow, 1.0).unwrap();
        }
        means.push(total / 4.0);
    }
    assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
}
