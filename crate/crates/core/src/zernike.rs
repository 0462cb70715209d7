//! Zernike polynomials in Noll ordering and Gaussian random fields of
//! per-pixel Zernike coefficients.
//!
//! Noll index `j` maps to radial order `n` and azimuthal frequency `m`:
//!
//! | j | 1 | 2 | 3 | 4 | 5 | 6 | 7 | 8 | 9 | 10 | 11 |
//! |---|---|---|---|---|---|---|---|---|---|----|----|
//! | n | 0 | 1 | 1 | 2 | 2 | 2 | 3 | 3 | 3 | 3  | 4  |
//! | m | 0 | 1 | -1| 0 | -2| 2 | -1| 1 | -3| 3  | 0  |
//!
//! Negative `m` denotes the sine term. Modes 2 and 3 are the tilt pair.
//! Normalization follows Noll, so disk-averaged products are orthonormal.

use ndarray::{Array2, Array3, Array4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::fft::Fft2;

/// Highest supported Noll index (radial order 20).
pub const MAX_NOLL_INDEX: usize = 231;

/// Smallest and largest odd kernel sizes encoded by the kernel-size channel.
pub const MIN_KERNEL_SIZE: usize = 3;
pub const MAX_KERNEL_SIZE: usize = 99;

/// Maps a Noll index (1-based) to `(n, m)`; `m < 0` selects the sine term.
pub fn noll_to_nm(j: usize) -> (u32, i32) {
    assert!(j >= 1, "Noll indices start at 1");
    let mut n = 0usize;
    while (n + 1) * (n + 2) / 2 < j {
        n += 1;
    }
    let k = j - n * (n + 1) / 2 - 1;
    let m_abs = if n % 2 == 0 { 2 * ((k + 1) / 2) } else { 2 * (k / 2) + 1 };
    let m = if m_abs != 0 && j % 2 == 1 { -(m_abs as i32) } else { m_abs as i32 };
    (n as u32, m)
}

fn factorial(k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, v| acc * v as f64)
}

/// Zernike radial polynomial `R_n^m(rho)` for `m >= 0`.
pub fn radial(n: u32, m: u32, rho: f64) -> f64 {
    debug_assert!(m <= n && (n - m) % 2 == 0);
    (0..=(n - m) / 2)
        .map(|s| {
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            sign * factorial(n - s)
                / (factorial(s) * factorial((n + m) / 2 - s) * factorial((n - m) / 2 - s))
                * rho.powi((n - 2 * s) as i32)
        })
        .sum()
}

/// Noll-normalized Zernike polynomial `Z_j` at polar coordinates.
pub fn zernike(j: usize, rho: f64, theta: f64) -> f64 {
    let (n, m) = noll_to_nm(j);
    let r = radial(n, m.unsigned_abs(), rho);
    let nf = (n + 1) as f64;
    match m {
        0 => nf.sqrt() * r,
        m if m > 0 => (2.0 * nf).sqrt() * r * (m as f64 * theta).cos(),
        m => (2.0 * nf).sqrt() * r * ((-m) as f64 * theta).sin(),
    }
}

/// Pupil coordinate of sample `i` on an `n`-point axis spanning `[-1, 1]`.
#[inline]
fn axis_coord(i: usize, n: usize) -> f64 {
    2.0 * (i as f64 + 0.5) / n as f64 - 1.0
}

/// Precomputed Zernike tables on a square grid covering the unit disk.
#[derive(Debug, Clone)]
pub struct ZernikeBasis {
    max_index: usize,
    grid_size: usize,
    /// `max_index × g × g`, polynomial values on the whole square (unmasked).
    values: Array3<f64>,
    mask: Array2<bool>,
}

impl ZernikeBasis {
    pub fn build(max_index: usize, grid_size: usize) -> Result<Self> {
        if max_index < 1 {
            return Err(Error::InvalidArgument("max_index must be >= 1".into()));
        }
        if max_index > MAX_NOLL_INDEX {
            return Err(Error::InvalidArgument(format!(
                "max_index {max_index} exceeds the supported cap {MAX_NOLL_INDEX}"
            )));
        }
        if grid_size < 8 {
            return Err(Error::InvalidArgument("grid_size must be >= 8".into()));
        }
        let g = grid_size;
        let mut values = Array3::zeros((max_index, g, g));
        let mut mask = Array2::from_elem((g, g), false);
        for r in 0..g {
            let y = axis_coord(r, g);
            for c in 0..g {
                let x = axis_coord(c, g);
                let rho = (x * x + y * y).sqrt();
                let theta = y.atan2(x);
                mask[[r, c]] = rho <= 1.0;
                for j in 1..=max_index {
                    values[[j - 1, r, c]] = zernike(j, rho, theta);
                }
            }
        }
        Ok(Self { max_index, grid_size, values, mask })
    }

    pub fn max_index(&self) -> usize {
        self.max_index
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// Table for Noll index `j`, zero outside the unit disk.
    pub fn table(&self, j: usize) -> Array2<f64> {
        assert!((1..=self.max_index).contains(&j));
        let mut t = self.values.index_axis(ndarray::Axis(0), j - 1).to_owned();
        t.zip_mut_with(&self.mask, |v, &inside| {
            if !inside {
                *v = 0.0
            }
        });
        t
    }

    pub fn disk_mask(&self) -> &Array2<bool> {
        &self.mask
    }

    /// Disk-averaged products `⟨Z_i Z_j⟩` for Noll indices `1..=max_index`.
    pub fn gram(&self) -> Array2<f64> {
        let n = self.max_index;
        let inside: Vec<usize> =
            self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
        let g2 = self.grid_size * self.grid_size;
        let flat = self.values.view().into_shape_with_order((n, g2)).expect("contiguous table");
        let rows = Array2::from_shape_fn((n, inside.len()), |(j, p)| flat[[j, inside[p]]]);
        rows.dot(&rows.t()) / inside.len() as f64
    }

    /// Bilinear lookup of the unmasked table at continuous grid coordinates.
    fn sample(&self, j: usize, gy: f64, gx: f64) -> f64 {
        let g = self.grid_size;
        let clamp = |v: f64| v.clamp(0.0, (g - 1) as f64);
        let (gy, gx) = (clamp(gy), clamp(gx));
        let y0 = gy.floor() as usize;
        let x0 = gx.floor() as usize;
        let y1 = (y0 + 1).min(g - 1);
        let x1 = (x0 + 1).min(g - 1);
        let fy = gy - y0 as f64;
        let fx = gx - x0 as f64;
        let t = &self.values;
        let k = j - 1;
        (1.0 - fy) * ((1.0 - fx) * t[[k, y0, x0]] + fx * t[[k, y0, x1]])
            + fy * ((1.0 - fx) * t[[k, y1, x0]] + fx * t[[k, y1, x1]])
    }

    /// Tables for Noll indices `1..=modes` resampled onto a `size × size`
    /// grid in which the unit disk has radius `pupil_ratio · size / 2`.
    pub fn resample(&self, modes: usize, size: usize, pupil_ratio: f64) -> Result<ResampledBasis> {
        if modes > self.max_index {
            return Err(Error::InvalidArgument(format!(
                "{modes} modes requested but basis holds {}",
                self.max_index
            )));
        }
        if size == 0 || !(pupil_ratio > 0.0 && pupil_ratio <= 1.0) {
            return Err(Error::InvalidArgument("bad resample geometry".into()));
        }
        let g = self.grid_size as f64;
        let mut tables = Array3::zeros((modes, size, size));
        for u in 0..size {
            let y = axis_coord(u, size) / pupil_ratio;
            for v in 0..size {
                let x = axis_coord(v, size) / pupil_ratio;
                if x * x + y * y > 1.0 {
                    continue;
                }
                let gy = (y + 1.0) * 0.5 * g - 0.5;
                let gx = (x + 1.0) * 0.5 * g - 0.5;
                for j in 1..=modes {
                    tables[[j - 1, u, v]] = self.sample(j, gy, gx);
                }
            }
        }
        Ok(ResampledBasis { size, tables })
    }
}

/// Zernike tables resampled to a kernel grid; index 0 is Noll mode 1.
#[derive(Debug, Clone)]
pub struct ResampledBasis {
    size: usize,
    tables: Array3<f64>,
}

impl ResampledBasis {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn modes(&self) -> usize {
        self.tables.dim().0
    }

    /// `Σ_j a[j-1] · Z_j` over the supplied Noll-ordered coefficients.
    pub fn phase(&self, noll_coeffs: &[f64]) -> Array2<f64> {
        let mut phase = Array2::zeros((self.size, self.size));
        self.accumulate_phase(noll_coeffs, 0, &mut phase);
        phase
    }

    /// Adds `Σ_i coeffs[i] · Z_{first + i + 1}` into `out`.
    pub(crate) fn accumulate_phase(&self, coeffs: &[f64], first: usize, out: &mut Array2<f64>) {
        for (i, &a) in coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let table = self.tables.index_axis(ndarray::Axis(0), first + i);
            out.scaled_add(a, &table);
        }
    }
}

/// Phase map `φ = Σ a_i Z_i` on a `kernel_size × kernel_size` grid covering the
/// unit disk. `a[0]` multiplies Noll mode 1.
pub fn phase_from_coeffs(basis: &ZernikeBasis, a: &[f64], kernel_size: usize) -> Result<Array2<f64>> {
    if a.len() > basis.max_index() {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients exceed basis size {}",
            a.len(),
            basis.max_index()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("zernike coefficients"));
    }
    Ok(basis.resample(a.len(), kernel_size, 1.0)?.phase(a))
}

/// Encodes an odd kernel size in `[3, 99]` into the `[0, 1]` channel value.
pub fn encode_kernel_size(kernel_size: usize) -> Result<f64> {
    if kernel_size % 2 == 0 || !(MIN_KERNEL_SIZE..=MAX_KERNEL_SIZE).contains(&kernel_size) {
        return Err(Error::InvalidArgument(format!(
            "kernel size {kernel_size} must be odd and within [{MIN_KERNEL_SIZE}, {MAX_KERNEL_SIZE}]"
        )));
    }
    Ok((kernel_size - MIN_KERNEL_SIZE) as f64 / (MAX_KERNEL_SIZE - MIN_KERNEL_SIZE) as f64)
}

/// Nearest odd kernel size for a channel value (clamped to `[0, 1]`).
pub fn decode_kernel_size(value: f64) -> usize {
    let steps = ((MAX_KERNEL_SIZE - MIN_KERNEL_SIZE) / 2) as f64;
    let v = if value.is_finite() { value.clamp(0.0, 1.0) } else { 0.0 };
    MIN_KERNEL_SIZE + 2 * (v * steps).round() as usize
}

/// Statistics of the sampled coefficient field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldCovarianceSpec {
    /// One variance per mode channel (tilt pair first, then Noll 4, 5, ...).
    /// The kernel-size channel is not sampled and has no entry.
    pub per_mode_variance: Vec<f64>,
    /// Squared-exponential correlation length in pixels.
    pub spatial_correlation_length: f64,
    /// AR(1) coefficient between consecutive frames, in `[0, 1)`.
    pub temporal_correlation: f64,
    /// Odd kernel size stored in the last channel.
    pub kernel_size: usize,
}

impl FieldCovarianceSpec {
    /// Kolmogorov-style variances: Noll mode `j` of radial order `n` gets
    /// `0.448 (D/r₀)^{5/3} (2 / (n + 1))^{11/3}`, so each tilt axis carries
    /// `0.448 (D/r₀)^{5/3}` rad² and higher orders fall off as `(n+1)^{-11/3}`.
    /// `channels` includes the kernel-size channel.
    pub fn kolmogorov(
        d_over_r0: f64,
        channels: usize,
        kernel_size: usize,
        spatial_correlation_length: f64,
        temporal_correlation: f64,
    ) -> Result<Self> {
        if !(d_over_r0 >= 0.0) || !d_over_r0.is_finite() {
            return Err(Error::InvalidArgument("D/r0 must be finite and >= 0".into()));
        }
        if channels < 4 || channels > MAX_NOLL_INDEX {
            return Err(Error::InvalidArgument(format!("channel count {channels} out of range")));
        }
        let strength = 0.448 * d_over_r0.powf(5.0 / 3.0);
        let per_mode_variance = (2..=channels)
            .map(|j| {
                let (n, _) = noll_to_nm(j);
                strength * (2.0 / (n as f64 + 1.0)).powf(11.0 / 3.0)
            })
            .collect();
        let spec = Self { per_mode_variance, spatial_correlation_length, temporal_correlation, kernel_size };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_mode_variance.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("variances must be finite and >= 0".into()));
        }
        if !(self.spatial_correlation_length > 0.0) || !self.spatial_correlation_length.is_finite() {
            return Err(Error::InvalidArgument("correlation length must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.temporal_correlation) {
            return Err(Error::InvalidArgument("temporal correlation must lie in [0, 1)".into()));
        }
        encode_kernel_size(self.kernel_size)?;
        Ok(())
    }
}

/// Per-pixel Zernike coefficients `T × H × W × N`.
///
/// Channels `0, 1` are Noll modes 2 and 3 (tilt), channel `i` for
/// `2 <= i < N - 1` is Noll mode `i + 2`, and channel `N - 1` holds the
/// normalized kernel size.
#[derive(Debug, Clone, PartialEq)]
pub struct ZernikeField {
    coeffs: Array4<f64>,
}

impl ZernikeField {
    pub fn new(coeffs: Array4<f64>) -> Result<Self> {
        let (t, h, w, n) = coeffs.dim();
        if t == 0 || h == 0 || w == 0 {
            return Err(shape_err("empty zernike field"));
        }
        if n < 4 {
            return Err(shape_err(format!("zernike field needs >= 4 channels, got {n}")));
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("zernike field"));
        }
        let ks = coeffs.index_axis(ndarray::Axis(3), n - 1);
        if ks.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("kernel-size channel must lie in [0, 1]".into()));
        }
        Ok(Self { coeffs })
    }

    /// All mode channels zero, constant kernel-size channel.
    pub fn zeros(dims: (usize, usize, usize, usize), kernel_size: usize) -> Result<Self> {
        let ks = encode_kernel_size(kernel_size)?;
        let n = dims.3;
        Self::new(Array4::from_shape_fn(dims, |(_, _, _, c)| if c + 1 == n { ks } else { 0.0 }))
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        self.coeffs.dim()
    }

    pub fn coeffs(&self) -> &Array4<f64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Array4<f64> {
        &mut self.coeffs
    }

    pub fn into_inner(self) -> Array4<f64> {
        self.coeffs
    }

    /// Highest Noll index carried by the mode channels.
    pub fn max_noll(&self) -> usize {
        self.dims().3
    }

    /// Number of higher-order (non-tilt) mode channels.
    pub fn higher_order_modes(&self) -> usize {
        self.dims().3 - 3
    }

    /// Kernel size decoded from the pixel at `(0, 0, 0)`.
    pub fn kernel_size(&self) -> usize {
        let n = self.dims().3;
        decode_kernel_size(self.coeffs[[0, 0, 0, n - 1]])
    }
}

/// Circulant power spectrum of the squared-exponential kernel on an `h × w`
/// periodic grid, normalized so that the field has unit marginal variance.
fn se_filter(h: usize, w: usize, length: f64) -> Vec<f64> {
    // Continuous SE spectrum sampled on the DFT grid: strictly positive, so the
    // periodized covariance is valid without clipping.
    let tau2 = 2.0 * std::f64::consts::PI.powi(2) * length * length;
    let mut spectrum = Vec::with_capacity(h * w);
    for r in 0..h {
        let fy = r.min(h - r) as f64 / h as f64;
        for c in 0..w {
            let fx = c.min(w - c) as f64 / w as f64;
            spectrum.push((-tau2 * (fx * fx + fy * fy)).exp());
        }
    }
    // Marginal variance of IFFT(sqrt(λ)·FFT(white)) is Σλ / n.
    let var = spectrum.iter().sum::<f64>() / (h * w) as f64;
    spectrum.iter().map(|l| (l / var).sqrt()).collect()
}

/// Samples a stationary Gaussian coefficient field.
///
/// Each mode channel is white noise filtered in the frequency domain by a
/// squared-exponential kernel (periodic boundary), scaled to the requested
/// variance; successive frames follow a stationary AR(1) chain.
pub fn sample_zernike_field(
    spec: &FieldCovarianceSpec,
    dims: (usize, usize, usize, usize),
    seed: u64,
) -> Result<ZernikeField> {
    spec.validate()?;
    let (t, h, w, n) = dims;
    if t == 0 || h == 0 || w == 0 {
        return Err(shape_err("zero-sized field dims"));
    }
    if n < 4 {
        return Err(shape_err(format!("zernike field needs >= 4 channels, got {n}")));
    }
    if spec.per_mode_variance.len() != n - 1 {
        return Err(shape_err(format!(
            "{} variances for {} mode channels",
            spec.per_mode_variance.len(),
            n - 1
        )));
    }
    let filter = se_filter(h, w, spec.spatial_correlation_length);
    let mut fft = Fft2::new(h, w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = spec.temporal_correlation;
    let innov = (1.0 - rho * rho).sqrt();
    let inv_n = 1.0 / (h * w) as f64;

    let ks = encode_kernel_size(spec.kernel_size)?;
    let mut coeffs = Array4::zeros(dims);
    let mut prev = vec![0.0; h * w];
    let mut buf = vec![Complex64::default(); h * w];
    for c in 0..n - 1 {
        let scale = spec.per_mode_variance[c].sqrt();
        for f in 0..t {
            for v in buf.iter_mut() {
                *v = Complex64::new(StandardNormal.sample(&mut rng), 0.0);
            }
            fft.forward(&mut buf);
            for (v, g) in buf.iter_mut().zip(&filter) {
                *v *= g;
            }
            fft.inverse(&mut buf);
            for (i, v) in buf.iter().enumerate() {
                let fresh = v.re * inv_n;
                let value = if f == 0 { fresh } else { rho * prev[i] + innov * fresh };
                prev[i] = value;
                coeffs[[f, i / w, i % w, c]] = scale * value;
            }
        }
    }
    for f in 0..t {
        for y in 0..h {
            for x in 0..w {
                coeffs[[f, y, x, n - 1]] = ks;
            }
        }
    }
    ZernikeField::new(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noll_table_matches_reference() {
        let expected = [
            (1, 0, 0),
            (2, 1, 1),
            (3, 1, -1),
            (4, 2, 0),
            (5, 2, -2),
            (6, 2, 2),
            (7, 3, -1),
            (8, 3, 1),
            (9, 3, -3),
            (10, 3, 3),
            (11, 4, 0),
            (12, 4, 2),
            (13, 4, -2),
            (14, 4, 4),
            (15, 4, -4),
            (22, 6, 0),
        ];
        for (j, n, m) in expected {
            assert_eq!(noll_to_nm(j), (n, m), "j = {j}");
        }
    }

    #[test]
    fn piston_is_one_on_disk() {
        let b = ZernikeBasis::build(1, 64).unwrap();
        let t = b.table(1);
        for ((r, c), &inside) in b.disk_mask().indexed_iter() {
            assert_eq!(t[[r, c]], if inside { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn defocus_at_center() {
        // Handwritten oracle: Z4 = sqrt(3)(2ρ² - 1).
        let oracle = |rho: f64| 3f64.sqrt() * (2.0 * rho * rho - 1.0);
        assert!((zernike(4, 0.0, 0.0) + 3f64.sqrt()).abs() < 1e-15);
        for rho in [0.1, 0.5, 0.9] {
            assert!((zernike(4, rho, 0.3) - oracle(rho)).abs() < 1e-12);
        }
        // The grid has no sample exactly at ρ = 0; the four central samples sit
        // at ρ = sqrt(2)/128.
        let b = ZernikeBasis::build(4, 128).unwrap();
        let rho = 2f64.sqrt() / 128.0;
        assert!((b.table(4)[[63, 64]] - oracle(rho)).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_arguments() {
        assert!(ZernikeBasis::build(0, 64).is_err());
        assert!(ZernikeBasis::build(MAX_NOLL_INDEX + 1, 64).is_err());
        assert!(ZernikeBasis::build(10, 4).is_err());
        assert!(ZernikeBasis::build(MAX_NOLL_INDEX, 8).is_ok());
    }

    #[test]
    fn kernel_size_channel_round_trips() {
        for ks in (3..=99).step_by(2) {
            assert_eq!(decode_kernel_size(encode_kernel_size(ks).unwrap()), ks);
        }
        assert!(encode_kernel_size(4).is_err());
        assert!(encode_kernel_size(101).is_err());
        assert_eq!(decode_kernel_size(0.0), 3);
        assert_eq!(decode_kernel_size(1.0), 99);
    }

    #[test]
    fn zero_coefficients_give_zero_phase() {
        let b = ZernikeBasis::build(10, 64).unwrap();
        let p = phase_from_coeffs(&b, &[0.0; 10], 15).unwrap();
        assert!(p.iter().all(|&v| v == 0.0));
    }

    fn spec(n_modes: usize, var: f64, len: f64, rho: f64) -> FieldCovarianceSpec {
        FieldCovarianceSpec {
            per_mode_variance: vec![var; n_modes],
            spatial_correlation_length: len,
            temporal_correlation: rho,
            kernel_size: 9,
        }
    }

    #[test]
    fn zero_variance_field_is_zero() {
        let f = sample_zernike_field(&spec(4, 0.0, 3.0, 0.5), (2, 8, 8, 5), 1).unwrap();
        let ks = encode_kernel_size(9).unwrap();
        for ((_, _, _, c), &v) in f.coeffs().indexed_iter() {
            if c == 4 {
                assert_eq!(v, ks);
            } else {
                assert_eq!(v, 0.0);
            }
        }
        assert_eq!(f.kernel_size(), 9);
    }

    #[test]
    fn sampling_rejects_bad_input() {
        assert!(sample_zernike_field(&spec(4, 1.0, 3.0, 0.0), (0, 8, 8, 5), 1).is_err());
        assert!(sample_zernike_field(&spec(3, 1.0, 3.0, 0.0), (1, 8, 8, 5), 1).is_err());
        assert!(sample_zernike_field(&spec(4, -1.0, 3.0, 0.0), (1, 8, 8, 5), 1).is_err());
        assert!(sample_zernike_field(&spec(4, 1.0, 0.0, 0.0), (1, 8, 8, 5), 1).is_err());
        assert!(sample_zernike_field(&spec(4, 1.0, 3.0, 1.0), (1, 8, 8, 5), 1).is_err());
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        let s = spec(3, 1.0, 2.0, 0.3);
        let a = sample_zernike_field(&s, (2, 6, 7, 4), 42).unwrap();
        let b = sample_zernike_field(&s, (2, 6, 7, 4), 42).unwrap();
        let c = sample_zernike_field(&s, (2, 6, 7, 4), 43).unwrap();
        assert!(a.coeffs().iter().zip(b.coeffs()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a.coeffs().iter().zip(c.coeffs()).any(|(x, y)| x != y));
    }
}
