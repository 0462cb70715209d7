//! Point spread functions from pupil-plane phase.

use ndarray::Array2;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft2;

/// Circular aperture of radius `ratio · s / 2` centred on an `s × s` grid.
pub fn aperture_mask(size: usize, ratio: f64) -> Array2<f64> {
    let radius = ratio * size as f64 / 2.0;
    let centre = size as f64 / 2.0;
    Array2::from_shape_fn((size, size), |(r, c)| {
        let dy = r as f64 + 0.5 - centre;
        let dx = c as f64 + 0.5 - centre;
        if dx * dx + dy * dy <= radius * radius { 1.0 } else { 0.0 }
    })
}

/// Reusable PSF synthesizer for one kernel size and aperture.
pub struct PsfSynth {
    size: usize,
    mask: Array2<f64>,
    fft: Fft2,
    buf: Vec<Complex64>,
}

impl PsfSynth {
    pub fn new(size: usize, aperture_ratio: f64) -> Result<Self> {
        if size == 0 || !(aperture_ratio > 0.0 && aperture_ratio <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "aperture ratio {aperture_ratio} must lie in (0, 1]"
            )));
        }
        let mask = aperture_mask(size, aperture_ratio);
        if mask.iter().all(|&m| m == 0.0) {
            return Err(Error::InvalidArgument("aperture mask is empty".into()));
        }
        Ok(Self {
            size,
            mask,
            fft: Fft2::new(size, size),
            buf: vec![Complex64::default(); size * size],
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Writes the unit-sum, centred PSF for `phase` into `out` (row-major `s × s`).
    pub fn psf_into(&mut self, phase: &Array2<f64>, out: &mut [f64]) {
        let s = self.size;
        debug_assert_eq!(phase.dim(), (s, s));
        for ((v, &m), &p) in self.buf.iter_mut().zip(self.mask.iter()).zip(phase.iter()) {
            *v = if m == 0.0 { Complex64::default() } else { Complex64::from_polar(m, p) };
        }
        self.fft.forward(&mut self.buf);
        // fftshift: frequency k lands at (k + s/2) mod s.
        let half = s / 2;
        let mut total = 0.0;
        for r in 0..s {
            let rr = (r + half) % s;
            for c in 0..s {
                let cc = (c + half) % s;
                let e = self.buf[r * s + c].norm_sqr();
                out[rr * s + cc] = e;
                total += e;
            }
        }
        for v in out.iter_mut() {
            *v /= total;
        }
    }

    pub fn psf(&mut self, phase: &Array2<f64>) -> Array2<f64> {
        let mut out = vec![0.0; self.size * self.size];
        self.psf_into(phase, &mut out);
        Array2::from_shape_vec((self.size, self.size), out).expect("square buffer")
    }
}

/// `|DFT(P · exp(jφ))|²`, shifted so zero frequency sits at the centre pixel,
/// normalized to unit sum. `P` is a circular aperture of the given ratio.
pub fn psf_from_phase(phase: &Array2<f64>, aperture_ratio: f64) -> Result<Array2<f64>> {
    let (r, c) = phase.dim();
    if r != c || r == 0 {
        return Err(Error::Shape(format!("phase map must be square, got {r}x{c}")));
    }
    if phase.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("phase map"));
    }
    Ok(PsfSynth::new(r, aperture_ratio)?.psf(phase))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_phase_peaks_at_centre() {
        let s = 15;
        let psf = psf_from_phase(&Array2::zeros((s, s)), 1.0).unwrap();
        let (mut best, mut at) = (0.0, (0, 0));
        for ((r, c), &v) in psf.indexed_iter() {
            if v > best {
                best = v;
                at = (r, c);
            }
        }
        assert_eq!(at, (s / 2, s / 2));
        // Parseval: the centre bin holds (aperture area / s²) of the energy.
        let area = aperture_mask(s, 1.0).sum();
        assert!((best - area / (s * s) as f64).abs() < 1e-12);
    }

    #[test]
    fn unit_sum_and_nonnegative() {
        let s = 9;
        let phase = Array2::from_shape_fn((s, s), |(r, c)| ((r * 3 + c * 5) as f64).sin() * 2.0);
        let psf = psf_from_phase(&phase, 0.7).unwrap();
        assert!((psf.sum() - 1.0).abs() < 1e-12);
        assert!(psf.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn rejects_degenerate_aperture() {
        assert!(psf_from_phase(&Array2::zeros((5, 5)), 0.0).is_err());
        assert!(psf_from_phase(&Array2::zeros((4, 4)), 0.05).is_err());
        assert!(psf_from_phase(&Array2::zeros((4, 5)), 1.0).is_err());
    }
}
