//! Low-rank PSF basis: kernels `ψ_k` are the leading left singular vectors of a
//! matrix of sampled PSFs, and weights `β_k` are orthogonal projections onto them.

use std::path::Path;

use nalgebra::DMatrix;
use ndarray::{Array2, Array3, ArrayD, IxDyn};
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::psf::PsfSynth;
use crate::error::{shape_err, Error, Result};
use crate::harness::tensor_file;
use crate::zernike::{ZernikeBasis, ZernikeField};

/// Controls how the basis is derived from sample fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsfBasisConfig {
    /// Number of kernels `K`.
    pub k: usize,
    /// Number of pixels to draw PSFs from.
    pub samples: usize,
    pub seed: u64,
    pub aperture_ratio: f64,
    /// Required ratio of available PSFs to `K`.
    pub min_samples_per_kernel: usize,
    /// Subspace iterations of the randomized range finder.
    pub power_iterations: usize,
}

impl Default for PsfBasisConfig {
    fn default() -> Self {
        Self {
            k: 100,
            samples: 1000,
            seed: 0,
            aperture_ratio: 1.0,
            min_samples_per_kernel: 10,
            power_iterations: 2,
        }
    }
}

/// Sidecar metadata written next to the kernel tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsfBasisMeta {
    pub k: usize,
    pub kernel_size: usize,
    pub aperture_ratio: f64,
    /// Worst relative L2 reconstruction error over the training PSFs.
    pub reconstruction_bound: f64,
    pub mean_reconstruction_error: f64,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PsfBasis {
    /// `K × s × s`.
    kernels: Array3<f64>,
    meta: PsfBasisMeta,
}

impl PsfBasis {
    /// Derives a `k`-kernel basis from explicit PSFs (each `s × s`).
    pub fn from_psfs(psfs: &[Array2<f64>], k: usize, aperture_ratio: f64, seed: u64) -> Result<Self> {
        let Some(first) = psfs.first() else {
            return Err(Error::InsufficientSamples { needed: k.max(1), got: 0 });
        };
        let (s, s2) = first.dim();
        if s != s2 || psfs.iter().any(|p| p.dim() != (s, s)) {
            return Err(shape_err("PSFs must share one square size"));
        }
        let d = s * s;
        let mut m = DMatrix::zeros(d, psfs.len());
        for (j, p) in psfs.iter().enumerate() {
            for (i, &v) in p.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Self::from_matrix(m, s, k, aperture_ratio, seed, 2)
    }

    fn from_matrix(
        m: DMatrix<f64>,
        s: usize,
        k: usize,
        aperture_ratio: f64,
        seed: u64,
        power_iterations: usize,
    ) -> Result<Self> {
        let (d, n) = m.shape();
        if k == 0 || k > d.min(n) {
            return Err(Error::InvalidArgument(format!(
                "K = {k} must lie in [1, {}] for {n} samples of size {s}x{s}",
                d.min(n)
            )));
        }
        let q = range_finder(&m, k, seed, power_iterations);
        let b = q.transpose() * &m;
        let svd = b.svd(true, false);
        let u_small = svd.u.expect("requested U");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

        let mut kernels = Array3::zeros((k, s, s));
        for (slot, &idx) in order.iter().take(k).enumerate() {
            let mut col = &q * u_small.column(idx);
            // Fix the sign: positive total mass, or positive extreme entry.
            let total: f64 = col.iter().sum();
            let flip = if total.abs() > 1e-12 {
                total < 0.0
            } else {
                let extreme = col.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
                extreme < 0.0
            };
            if flip {
                col.neg_mut();
            }
            for (i, &v) in col.iter().enumerate() {
                kernels[[slot, i / s, i % s]] = v;
            }
        }
        let singular_values = order.iter().map(|&i| svd.singular_values[i]).collect();

        let mut basis = Self {
            kernels,
            meta: PsfBasisMeta {
                k,
                kernel_size: s,
                aperture_ratio,
                reconstruction_bound: 0.0,
                mean_reconstruction_error: 0.0,
                singular_values,
            },
        };
        let (worst, mean) = basis.reconstruction_errors(&m);
        basis.meta.reconstruction_bound = worst;
        basis.meta.mean_reconstruction_error = mean;
        Ok(basis)
    }

    fn psi_matrix(&self) -> DMatrix<f64> {
        let s = self.kernel_size();
        let d = s * s;
        DMatrix::from_fn(d, self.k(), |i, k| self.kernels[[k, i / s, i % s]])
    }

    /// Worst and mean relative L2 reconstruction error over the columns of `m`.
    fn reconstruction_errors(&self, m: &DMatrix<f64>) -> (f64, f64) {
        let psi = self.psi_matrix();
        let resid = m - &psi * (psi.transpose() * m);
        let mut worst = 0.0f64;
        let mut sum = 0.0;
        for j in 0..m.ncols() {
            let norm = m.column(j).norm();
            let e = if norm > 0.0 { resid.column(j).norm() / norm } else { 0.0 };
            worst = worst.max(e);
            sum += e;
        }
        (worst, sum / m.ncols() as f64)
    }

    pub fn k(&self) -> usize {
        self.meta.k
    }

    pub fn kernel_size(&self) -> usize {
        self.meta.kernel_size
    }

    pub fn aperture_ratio(&self) -> f64 {
        self.meta.aperture_ratio
    }

    pub fn kernels(&self) -> &Array3<f64> {
        &self.kernels
    }

    pub fn meta(&self) -> &PsfBasisMeta {
        &self.meta
    }

    pub fn reconstruction_bound(&self) -> f64 {
        self.meta.reconstruction_bound
    }

    pub fn mean_reconstruction_error(&self) -> f64 {
        self.meta.mean_reconstruction_error
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.meta.singular_values
    }

    fn kernel_rows(&self) -> ndarray::ArrayView2<'_, f64> {
        let s = self.kernel_size();
        self.kernels.view().into_shape_with_order((self.k(), s * s)).expect("standard layout")
    }

    /// `β = Ψᵀ p` for a row-major `s × s` PSF.
    pub fn project_into(&self, psf: &[f64], beta: &mut [f64]) {
        let p = ndarray::ArrayView1::from(psf);
        let mut out = ndarray::ArrayViewMut1::from(beta);
        ndarray::linalg::general_mat_vec_mul(1.0, &self.kernel_rows(), &p, 0.0, &mut out);
    }

    /// Projects many flattened PSFs at once: rows of `psfs` in, rows of
    /// weights (`rows × K`) out.
    pub fn project_rows(&self, psfs: &ndarray::ArrayView2<'_, f64>) -> Array2<f64> {
        psfs.dot(&self.kernel_rows().t())
    }

    pub fn project(&self, psf: &Array2<f64>) -> Vec<f64> {
        let mut beta = vec![0.0; self.k()];
        let flat: Vec<f64> = psf.iter().copied().collect();
        self.project_into(&flat, &mut beta);
        beta
    }

    /// `Σ_k β_k ψ_k`.
    pub fn reconstruct(&self, beta: &[f64]) -> Array2<f64> {
        let s = self.kernel_size();
        let mut out = Array2::zeros((s, s));
        for (k, &b) in beta.iter().enumerate() {
            out.scaled_add(b, &self.kernels.index_axis(ndarray::Axis(0), k));
        }
        out
    }

    /// Largest deviation of the Gram matrix of the kernels from identity.
    pub fn orthonormality_error(&self) -> f64 {
        let psi = self.psi_matrix();
        let gram = psi.transpose() * psi;
        let mut worst = 0.0f64;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Writes `<stem>.tsm` (kernels) and `<stem>.json` (metadata).
    pub fn save(&self, stem: &Path) -> Result<()> {
        let kernels = self.kernels.clone().into_dyn();
        tensor_file::write_array(&stem.with_extension("tsm"), &kernels)?;
        let json = serde_json::to_string_pretty(&self.meta)?;
        tensor_file::write_atomic(&stem.with_extension("json"), json.as_bytes())?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let meta: PsfBasisMeta = serde_json::from_slice(&std::fs::read(stem.with_extension("json"))?)?;
        let arr: ArrayD<f64> = tensor_file::read_array(&stem.with_extension("tsm"))?;
        let s = meta.kernel_size;
        if arr.shape() != [meta.k, s, s] {
            return Err(Error::Format(format!(
                "kernel tensor {:?} does not match sidecar K={} s={s}",
                arr.shape(),
                meta.k
            )));
        }
        let kernels = arr
            .into_shape_with_order(IxDyn(&[meta.k, s, s]))
            .and_then(|a| a.into_dimensionality())
            .map_err(|e| Error::Format(e.to_string()))?;
        Ok(Self { kernels, meta })
    }
}

/// Orthonormal basis whose span captures the dominant column space of `m`.
fn range_finder(m: &DMatrix<f64>, k: usize, seed: u64, power_iterations: usize) -> DMatrix<f64> {
    let (d, n) = m.shape();
    let l = (k + 20).min(d.min(n));
    if l == n {
        return m.clone().qr().q();
    }
    if l == d {
        return DMatrix::identity(d, d);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(n, l, |_, _| StandardNormal.sample(&mut rng));
    let mut q = (m * omega).qr().q();
    for _ in 0..power_iterations {
        let z = (m.transpose() * &q).qr().q();
        q = (m * z).qr().q();
    }
    q
}

/// Builds a basis from PSFs drawn at random pixels of the sample fields.
///
/// Only higher-order modes shape each PSF; tilt and the kernel-size channel
/// are excluded. All fields must encode the same kernel size.
pub fn build_psf_basis(
    sample_fields: &[ZernikeField],
    basis: &ZernikeBasis,
    config: &PsfBasisConfig,
) -> Result<PsfBasis> {
    let Some(first) = sample_fields.first() else {
        return Err(Error::InsufficientSamples { needed: config.k * config.min_samples_per_kernel, got: 0 });
    };
    let s = first.kernel_size();
    let n_chan = first.dims().3;
    if sample_fields.iter().any(|f| f.kernel_size() != s || f.dims().3 != n_chan) {
        return Err(shape_err("sample fields disagree on kernel size or channel count"));
    }
    let mut sites = Vec::new();
    for (fi, f) in sample_fields.iter().enumerate() {
        let (t, h, w, _) = f.dims();
        for px in 0..t * h * w {
            sites.push((fi, px));
        }
    }
    let needed = config.k * config.min_samples_per_kernel.max(1);
    let take = config.samples.min(sites.len());
    if take < needed {
        return Err(Error::InsufficientSamples { needed, got: take });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let picked = sample_indices(&mut rng, sites.len(), take);

    let resampled = basis.resample(n_chan, s, config.aperture_ratio)?;
    let mut synth = PsfSynth::new(s, config.aperture_ratio)?;
    let d = s * s;
    let mut m = DMatrix::zeros(d, take);
    let mut phase = Array2::zeros((s, s));
    let mut psf = vec![0.0; d];
    let mut higher = vec![0.0; n_chan - 3];
    for (j, idx) in picked.iter().enumerate() {
        let (fi, px) = sites[idx];
        let f = &sample_fields[fi];
        let (_, h, w, _) = f.dims();
        let (t, y, x) = (px / (h * w), (px / w) % h, px % w);
        for (i, v) in higher.iter_mut().enumerate() {
            *v = f.coeffs()[[t, y, x, 2 + i]];
        }
        phase.fill(0.0);
        resampled.accumulate_phase(&higher, 3, &mut phase);
        synth.psf_into(&phase, &mut psf);
        m.column_mut(j).copy_from_slice(&psf);
    }
    PsfBasis::from_matrix(m, s, config.k, config.aperture_ratio, config.seed, config.power_iterations)
}
