//! Per-pixel blur weights and the low-rank spatially varying blur
//! `out = Σ_k ψ_k ⊛ (β_k ⊙ image)`.

use ndarray::{Array2, Array4};
use rayon::prelude::*;
use rustfft::num_complex::{Complex32, Complex64};

use super::basis::PsfBasis;
use super::psf::PsfSynth;
use crate::error::{shape_err, Error, Result};
use crate::fft::Fft2;
use crate::tensor::FrameSequence;
use crate::zernike::{ZernikeBasis, ZernikeField};

/// `β_k` per pixel: `T × H × W × K`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurWeightField {
    weights: Array4<f64>,
}

impl BlurWeightField {
    pub fn new(weights: Array4<f64>) -> Result<Self> {
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("blur weights"));
        }
        Ok(Self { weights })
    }

    /// Every pixel carries the same weight vector.
    pub fn constant(t: usize, h: usize, w: usize, beta: &[f64]) -> Self {
        Self {
            weights: Array4::from_shape_fn((t, h, w, beta.len()), |(_, _, _, k)| beta[k]),
        }
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        self.weights.dim()
    }

    pub fn weights(&self) -> &Array4<f64> {
        &self.weights
    }

    pub fn into_inner(self) -> Array4<f64> {
        self.weights
    }
}

fn check_field_against_basis(field: &ZernikeField, zbasis: &ZernikeBasis, psf_basis: &PsfBasis) -> Result<()> {
    if field.kernel_size() != psf_basis.kernel_size() {
        return Err(shape_err(format!(
            "field kernel size {} vs basis kernel size {}",
            field.kernel_size(),
            psf_basis.kernel_size()
        )));
    }
    if field.max_noll() > zbasis.max_index() {
        return Err(shape_err(format!(
            "field uses Noll modes up to {} but the Zernike basis stops at {}",
            field.max_noll(),
            zbasis.max_index()
        )));
    }
    Ok(())
}

/// Node coordinates for a strided grid that always includes the last index.
fn nodes(len: usize, stride: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..len).step_by(stride).collect();
    if *v.last().unwrap() != len - 1 {
        v.push(len - 1);
    }
    v
}

/// Blur weights from the higher-order modes of each pixel (tilt excluded).
pub fn blur_weights(field: &ZernikeField, zbasis: &ZernikeBasis, psf_basis: &PsfBasis) -> Result<BlurWeightField> {
    blur_weights_strided(field, zbasis, psf_basis, 1)
}

/// Like [`blur_weights`] but evaluates PSFs on a node grid of the given
/// stride and bilinearly interpolates the weights in between. Stride 1 is
/// exact per-pixel evaluation.
pub fn blur_weights_strided(
    field: &ZernikeField,
    zbasis: &ZernikeBasis,
    psf_basis: &PsfBasis,
    stride: usize,
) -> Result<BlurWeightField> {
    check_field_against_basis(field, zbasis, psf_basis)?;
    if stride == 0 {
        return Err(Error::InvalidArgument("weight stride must be >= 1".into()));
    }
    let (t, h, w, n_chan) = field.dims();
    let s = psf_basis.kernel_size();
    let k = psf_basis.k();
    let ratio = psf_basis.aperture_ratio();
    let resampled = zbasis.resample(n_chan, s, ratio)?;
    let ny = nodes(h, stride);
    let nx = nodes(w, stride);
    let coeffs = field.coeffs();

    // Weights at node pixels, one row of nodes per task.
    let rows: Vec<(usize, usize)> = (0..t).flat_map(|f| (0..ny.len()).map(move |r| (f, r))).collect();
    let node_rows: Vec<Vec<f64>> = rows
        .par_iter()
        .map_init(
            || (PsfSynth::new(s, ratio).expect("validated ratio"), Array2::zeros((s, s))),
            |(synth, phase), &(f, r)| {
                let y = ny[r];
                let mut psfs = Array2::zeros((nx.len(), s * s));
                let mut higher = vec![0.0; n_chan - 3];
                for (ci, &x) in nx.iter().enumerate() {
                    for (i, v) in higher.iter_mut().enumerate() {
                        *v = coeffs[[f, y, x, 2 + i]];
                    }
                    phase.fill(0.0);
                    resampled.accumulate_phase(&higher, 3, phase);
                    synth.psf_into(phase, psfs.row_mut(ci).into_slice().expect("contiguous row"));
                }
                psf_basis.project_rows(&psfs.view()).into_raw_vec_and_offset().0
            },
        )
        .collect();

    let mut weights = Array4::zeros((t, h, w, k));
    if stride == 1 {
        for (&(f, r), row) in rows.iter().zip(&node_rows) {
            for x in 0..w {
                for kk in 0..k {
                    weights[[f, r, x, kk]] = row[x * k + kk];
                }
            }
        }
        return BlurWeightField::new(weights);
    }

    let bracket = |pos: usize, grid: &[usize]| -> (usize, f64) {
        let i = grid.partition_point(|&g| g <= pos).saturating_sub(1).min(grid.len().saturating_sub(2));
        if grid.len() == 1 {
            return (0, 0.0);
        }
        let (a, b) = (grid[i], grid[i + 1]);
        (i, (pos - a) as f64 / (b - a) as f64)
    };
    let out = weights.as_slice_mut().expect("standard layout");
    let mut top = vec![0.0; k];
    let mut bot = vec![0.0; k];
    for f in 0..t {
        let base = f * ny.len();
        for y in 0..h {
            let (iy, fy) = bracket(y, &ny);
            let iy1 = (iy + 1).min(ny.len() - 1);
            let (r0, r1) = (&node_rows[base + iy], &node_rows[base + iy1]);
            for x in 0..w {
                let (ix, fx) = bracket(x, &nx);
                let ix1 = (ix + 1).min(nx.len() - 1);
                let lerp = |dst: &mut [f64], row: &[f64]| {
                    let (a, b) = (&row[ix * k..(ix + 1) * k], &row[ix1 * k..(ix1 + 1) * k]);
                    for ((d, &va), &vb) in dst.iter_mut().zip(a).zip(b) {
                        *d = (1.0 - fx) * va + fx * vb;
                    }
                };
                lerp(&mut top, r0);
                lerp(&mut bot, r1);
                let dst = &mut out[((f * h + y) * w + x) * k..((f * h + y) * w + x + 1) * k];
                for ((d, &a), &b) in dst.iter_mut().zip(&top).zip(&bot) {
                    *d = (1.0 - fy) * a + fy * b;
                }
            }
        }
    }
    BlurWeightField::new(weights)
}

/// Kernel spectra for one frame size, reusable across calls.
///
/// Frames are padded by the kernel radius with edge replication, so the
/// circular convolution on the padded grid equals the linear one on the crop.
pub struct BlurPlan {
    h: usize,
    w: usize,
    k: usize,
    ph: usize,
    pw: usize,
    radius: usize,
    /// Transposed-layout spectra, one per basis kernel. The forward pass
    /// runs in single precision; its rounding (~1e-7 relative) is far
    /// below the low-rank truncation error.
    spectra: Vec<Vec<Complex32>>,
}

impl std::fmt::Debug for BlurPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlurPlan").field("frame", &(self.h, self.w)).field("k", &self.k).finish()
    }
}

/// Planes (frame, channel) processed two at a time, packed as real and
/// imaginary parts of one complex FFT.
type PlanePair = ((usize, usize), Option<(usize, usize)>);

fn plane_pairs(t: usize, c: usize) -> Vec<PlanePair> {
    let planes: Vec<(usize, usize)> = (0..t).flat_map(|f| (0..c).map(move |ch| (f, ch))).collect();
    planes.chunks(2).map(|p| (p[0], p.get(1).copied())).collect()
}

/// Contiguous `H × W` planes: `planes[f][i]` is slice `i` along the last axis.
fn split_planes(a: &Array4<f64>) -> Vec<Vec<Vec<f64>>> {
    let (t, h, w, n) = a.dim();
    let a = a.as_standard_layout();
    let flat = a.as_slice().expect("standard layout");
    (0..t)
        .map(|f| {
            let mut planes = vec![vec![0.0; h * w]; n];
            for (p, px) in flat[f * h * w * n..(f + 1) * h * w * n].chunks_exact(n).enumerate() {
                for (plane, &v) in planes.iter_mut().zip(px) {
                    plane[p] = v;
                }
            }
            planes
        })
        .collect()
}

impl BlurPlan {
    pub fn new(psf_basis: &PsfBasis, h: usize, w: usize) -> Self {
        let s = psf_basis.kernel_size();
        let r = s / 2;
        let (ph, pw) = (h + 2 * r, w + 2 * r);
        let mut fft = Fft2::new(ph, pw);
        let spectra = (0..psf_basis.k())
            .map(|k| {
                let mut buf = vec![Complex64::default(); ph * pw];
                for u in 0..s {
                    for v in 0..s {
                        let row = (u + ph - r) % ph;
                        let col = (v + pw - r) % pw;
                        buf[row * pw + col].re += psf_basis.kernels()[[k, u, v]];
                    }
                }
                let mut spec = vec![Complex64::default(); ph * pw];
                fft.forward_transposed(&mut buf, &mut spec);
                spec.iter().map(|v| Complex32::new(v.re as f32, v.im as f32)).collect()
            })
            .collect();
        Self { h, w, k: psf_basis.k(), ph, pw, radius: r, spectra }
    }

    pub fn frame_size(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    fn check(&self, image: &FrameSequence, weights: &BlurWeightField) -> Result<()> {
        let (t, h, w, _) = image.dims();
        let (wt, wh, ww, wk) = weights.dims();
        if (h, w) != (self.h, self.w) || (wt, wh, ww) != (t, h, w) || wk != self.k {
            return Err(shape_err(format!(
                "weights {:?} vs image {:?}, plan for {}x{} with K = {}",
                weights.dims(),
                image.dims(),
                self.h,
                self.w,
                self.k
            )));
        }
        Ok(())
    }

    /// Writes `β ⊙ x` (and optionally a second product as the imaginary
    /// part) onto the padded grid.
    fn fill_padded(&self, buf: &mut [Complex32], re: (&[f64], &[f64]), im: Option<(&[f64], &[f64])>) {
        let (h, w, pw, r) = (self.h, self.w, self.pw, self.radius);
        for py in 0..self.ph {
            let y = py.saturating_sub(r).min(h - 1);
            let row = &mut buf[py * pw..(py + 1) * pw];
            let (bre, xre) = (&re.0[y * w..(y + 1) * w], &re.1[y * w..(y + 1) * w]);
            let (left, rest) = row.split_at_mut(r);
            let (mid, right) = rest.split_at_mut(w);
            match im {
                Some((bim, xim)) => {
                    let (bim, xim) = (&bim[y * w..(y + 1) * w], &xim[y * w..(y + 1) * w]);
                    for (((v, a), b), (cc, d)) in mid.iter_mut().zip(bre).zip(xre).zip(bim.iter().zip(xim)) {
                        *v = Complex32::new((a * b) as f32, (cc * d) as f32);
                    }
                }
                None => {
                    for ((v, a), b) in mid.iter_mut().zip(bre).zip(xre) {
                        *v = Complex32::new((a * b) as f32, 0.0);
                    }
                }
            }
            let (first, last) = (mid[0], mid[w - 1]);
            left.fill(first);
            right.fill(last);
        }
    }

    /// `out = Σ_k ψ_k ⊛ (β_k ⊙ image)` per channel.
    ///
    /// Channel pairs share one complex FFT per kernel. With an odd channel
    /// count the last channel is packed across consecutive kernels instead
    /// and split by Hermitian symmetry, so a frame costs `⌈K·C/2⌉` forward
    /// transforms.
    pub fn apply(&self, image: &FrameSequence, weights: &BlurWeightField) -> Result<FrameSequence> {
        self.check(image, weights)?;
        let (t, h, w, c) = image.dims();
        let (ph, pw, r) = (self.ph, self.pw, self.radius);
        let n = ph * pw;
        let img = split_planes(image.data());
        let beta = split_planes(weights.weights());
        let pairs = c / 2;

        let frames: Vec<Vec<Vec<f64>>> = (0..t)
            .into_par_iter()
            .map_init(
                || (Fft2::<f32>::new(ph, pw), vec![Complex32::default(); n], vec![Complex32::default(); n]),
                |(fft, buf, spec), f| {
                    let (b, x) = (&beta[f], &img[f]);
                    // acc[j] holds channel 2j in the real part, 2j + 1 in the imaginary.
                    let mut acc = vec![vec![Complex32::default(); n]; c.div_ceil(2)];
                    for k in 0..self.k {
                        for j in 0..pairs {
                            self.fill_padded(buf, (&b[k], &x[2 * j]), Some((&b[k], &x[2 * j + 1])));
                            fft.forward_transposed(buf, spec);
                            for ((o, v), s) in acc[j].iter_mut().zip(spec.iter()).zip(&self.spectra[k]) {
                                *o += v * s;
                            }
                        }
                    }
                    if c % 2 == 1 {
                        let last = c - 1;
                        let out = &mut acc[pairs];
                        for k in (0..self.k).step_by(2) {
                            if k + 1 == self.k {
                                self.fill_padded(buf, (&b[k], &x[last]), None);
                                fft.forward_transposed(buf, spec);
                                for ((o, v), s) in out.iter_mut().zip(spec.iter()).zip(&self.spectra[k]) {
                                    *o += v * s;
                                }
                                continue;
                            }
                            self.fill_padded(buf, (&b[k], &x[last]), Some((&b[k + 1], &x[last])));
                            fft.forward_transposed(buf, spec);
                            let (s1, s2) = (&self.spectra[k], &self.spectra[k + 1]);
                            // Z(−f) sits at column (pw − fx) mod pw, row (ph − fy) mod ph.
                            for fx in 0..pw {
                                let row = fx * ph;
                                let mrow = ((pw - fx) % pw) * ph;
                                for fy in 0..ph {
                                    let i = row + fy;
                                    let z = spec[i];
                                    let zc = spec[mrow + (ph - fy) % ph].conj();
                                    let u = (z + zc) * 0.5;
                                    let v = (z - zc) * Complex32::new(0.0, -0.5);
                                    out[i] += u * s1[i] + v * s2[i];
                                }
                            }
                        }
                    }
                    let norm = 1.0 / n as f64;
                    let mut planes = vec![vec![0.0; h * w]; c];
                    for (j, packed) in acc.iter_mut().enumerate() {
                        fft.inverse_transposed(packed, buf);
                        for y in 0..h {
                            for xx in 0..w {
                                let v = buf[(y + r) * pw + xx + r];
                                planes[2 * j][y * w + xx] = v.re as f64 * norm;
                                if 2 * j + 1 < c {
                                    planes[2 * j + 1][y * w + xx] = v.im as f64 * norm;
                                }
                            }
                        }
                    }
                    planes
                },
            )
            .collect();

        let out = Array4::from_shape_fn((t, h, w, c), |(f, y, x, ch)| frames[f][ch][y * w + x]);
        FrameSequence::new(out)
    }

    /// Cotangents with respect to the image and the weights.
    pub fn vjp(
        &self,
        image: &FrameSequence,
        weights: &BlurWeightField,
        cotangent_out: &Array4<f64>,
    ) -> Result<(Array4<f64>, Array4<f64>)> {
        self.check(image, weights)?;
        let (t, h, w, c) = image.dims();
        if cotangent_out.dim() != (t, h, w, c) {
            return Err(shape_err("basis blur cotangent shape"));
        }
        let (ph, pw, r) = (self.ph, self.pw, self.radius);
        let img = split_planes(image.data());
        let beta = split_planes(weights.weights());
        let mut g_img = vec![vec![vec![0.0; h * w]; c]; t];
        let mut g_beta = vec![vec![vec![0.0; h * w]; self.k]; t];
        let mut fft = Fft2::new(ph, pw);
        let norm = 1.0 / (ph * pw) as f64;
        let mut buf = vec![Complex64::default(); ph * pw];
        let mut g_spec = vec![Complex64::default(); ph * pw];
        let mut prod = vec![Complex64::default(); ph * pw];

        for (a, b) in plane_pairs(t, c) {
            // Adjoint of the crop: embed the cotangent into the padded frame.
            buf.fill(Complex64::default());
            for y in 0..h {
                for x in 0..w {
                    let im = b.map_or(0.0, |(bf, bc)| cotangent_out[[bf, y, x, bc]]);
                    buf[(y + r) * pw + x + r] = Complex64::new(cotangent_out[[a.0, y, x, a.1]], im);
                }
            }
            fft.forward_transposed(&mut buf, &mut g_spec);
            for k in 0..self.k {
                // Correlation with ψ_k is multiplication by the conjugate spectrum.
                for ((o, g), s) in prod.iter_mut().zip(&g_spec).zip(&self.spectra[k]) {
                    *o = g * Complex64::new(s.re as f64, -s.im as f64);
                }
                fft.inverse_transposed(&mut prod, &mut buf);
                // Adjoint of edge-replicated padding: fold back onto source pixels.
                for py in 0..ph {
                    let y = py.saturating_sub(r).min(h - 1);
                    for px in 0..pw {
                        let x = px.saturating_sub(r).min(w - 1);
                        let q = buf[py * pw + px] * norm;
                        let i = y * w + x;
                        g_img[a.0][a.1][i] += beta[a.0][k][i] * q.re;
                        g_beta[a.0][k][i] += img[a.0][a.1][i] * q.re;
                        if let Some((bf, bc)) = b {
                            g_img[bf][bc][i] += beta[bf][k][i] * q.im;
                            g_beta[bf][k][i] += img[bf][bc][i] * q.im;
                        }
                    }
                }
            }
        }
        let gather = |planes: &Vec<Vec<Vec<f64>>>, n: usize| {
            Array4::from_shape_fn((t, h, w, n), |(f, y, x, i)| planes[f][i][y * w + x])
        };
        Ok((gather(&g_img, c), gather(&g_beta, self.k)))
    }
}

/// `out = Σ_k ψ_k ⊛ (β_k ⊙ image)` per channel, edge-replicated borders.
pub fn basis_blur(image: &FrameSequence, weights: &BlurWeightField, psf_basis: &PsfBasis) -> Result<FrameSequence> {
    let (_, h, w, _) = image.dims();
    BlurPlan::new(psf_basis, h, w).apply(image, weights)
}

/// Cotangents of [`basis_blur`] with respect to the image and the weights.
pub fn basis_blur_vjp(
    image: &FrameSequence,
    weights: &BlurWeightField,
    psf_basis: &PsfBasis,
    cotangent_out: &Array4<f64>,
) -> Result<(Array4<f64>, Array4<f64>)> {
    let (_, h, w, _) = image.dims();
    BlurPlan::new(psf_basis, h, w).vjp(image, weights, cotangent_out)
}

/// Plain 2D convolution of every plane with one centred kernel, edge-replicated.
pub fn convolve_replicate(image: &FrameSequence, kernel: &Array2<f64>) -> Result<FrameSequence> {
    let (s, s2) = kernel.dim();
    if s != s2 || s % 2 == 0 {
        return Err(shape_err("kernel must be square with odd size"));
    }
    let (t, h, w, c) = image.dims();
    let r = (s / 2) as isize;
    let img = image.data();
    let mut out = Array4::zeros((t, h, w, c));
    for f in 0..t {
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    let mut acc = 0.0;
                    for u in 0..s {
                        let sy = (y as isize - (u as isize - r)).clamp(0, h as isize - 1) as usize;
                        for v in 0..s {
                            let sx = (x as isize - (v as isize - r)).clamp(0, w as isize - 1) as usize;
                            acc += kernel[[u, v]] * img[[f, sy, sx, ch]];
                        }
                    }
                    out[[f, y, x, ch]] = acc;
                }
            }
        }
    }
    FrameSequence::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis_from(psfs: &[Array2<f64>], k: usize) -> PsfBasis {
        PsfBasis::from_psfs(psfs, k, 1.0, 7).unwrap()
    }

    fn delta(s: usize) -> Array2<f64> {
        let mut d = Array2::zeros((s, s));
        d[[s / 2, s / 2]] = 1.0;
        d
    }

    #[test]
    fn delta_basis_reproduces_input() {
        let b = basis_from(&[delta(5)], 1);
        let img = FrameSequence::from_fn((2, 6, 7, 3), |(t, y, x, c)| ((t * 31 + y * 7 + x * 3 + c) % 11) as f64 / 11.0);
        let beta = b.project(&delta(5));
        let out = basis_blur(&img, &BlurWeightField::constant(2, 6, 7, &beta), &b).unwrap();
        let diff = (out.data() - img.data()).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(diff <= b.reconstruction_bound() + 1e-6, "{diff}");
    }

    #[test]
    fn constant_weights_match_direct_convolution() {
        let psfs: Vec<_> = (0..6)
            .map(|i| Array2::from_shape_fn((5, 5), |(r, c)| 1.0 + ((r * 5 + c) * (i + 1) % 9) as f64))
            .collect();
        let b = basis_from(&psfs, 4);
        let beta = vec![0.3, -0.1, 0.05, 0.2];
        let kernel = b.reconstruct(&beta);
        let img = FrameSequence::from_fn((1, 9, 8, 2), |(_, y, x, c)| ((y * 13 + x * 5 + c * 3) % 17) as f64 / 17.0);
        let fast = basis_blur(&img, &BlurWeightField::constant(1, 9, 8, &beta), &b).unwrap();
        let slow = convolve_replicate(&img, &kernel).unwrap();
        let scale = slow.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let diff = (fast.data() - slow.data()).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(diff < 1e-5 * scale, "{diff}");
    }

    #[test]
    fn zero_cotangent_and_zero_weights() {
        let b = basis_from(&[delta(3), Array2::from_elem((3, 3), 1.0 / 9.0)], 2);
        let img = FrameSequence::from_fn((1, 4, 4, 1), |(_, y, x, _)| (y + x) as f64);
        let wts = BlurWeightField::constant(1, 4, 4, &[0.4, 0.6]);
        let (gi, gb) = basis_blur_vjp(&img, &wts, &b, &Array4::zeros((1, 4, 4, 1))).unwrap();
        assert!(gi.iter().chain(gb.iter()).all(|&v| v == 0.0));
        let zero = BlurWeightField::constant(1, 4, 4, &[0.0, 0.0]);
        let (gi, _) = basis_blur_vjp(&img, &zero, &b, &Array4::ones((1, 4, 4, 1))).unwrap();
        assert!(gi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn node_grid_covers_ends() {
        assert_eq!(nodes(9, 4), vec![0, 4, 8]);
        assert_eq!(nodes(10, 4), vec![0, 4, 8, 9]);
        assert_eq!(nodes(1, 4), vec![0]);
    }
}
