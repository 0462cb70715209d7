//! Small 2D FFT helper over row-major complex buffers.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};

/// Planned forward/inverse 2D transforms for a fixed `rows × cols` size.
///
/// The inverse is unnormalized, matching `rustfft`.
pub(crate) struct Fft2<T: FftNum = f64> {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
    column: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
}

impl<T: FftNum> Fft2<T> {
    pub(crate) fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(cols);
        let row_inv = planner.plan_fft_inverse(cols);
        let col_fwd = planner.plan_fft_forward(rows);
        let col_inv = planner.plan_fft_inverse(rows);
        let scratch_len = [&row_fwd, &row_inv, &col_fwd, &col_inv]
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            rows,
            cols,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
            column: vec![Complex::new(T::zero(), T::zero()); rows],
            scratch: vec![Complex::new(T::zero(), T::zero()); scratch_len],
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub(crate) fn forward(&mut self, buf: &mut [Complex<T>]) {
        self.run(buf, true);
    }

    pub(crate) fn inverse(&mut self, buf: &mut [Complex<T>]) {
        self.run(buf, false);
    }

    /// Forward transform whose spectrum is left transposed (`cols × rows`).
    /// Pointwise products of such spectra are still convolutions, which is
    /// all the blur path needs, and one transpose is saved each way.
    pub(crate) fn forward_transposed(&mut self, buf: &mut [Complex<T>], out: &mut [Complex<T>]) {
        debug_assert_eq!(buf.len(), self.len());
        self.row_fwd.process_with_scratch(buf, &mut self.scratch);
        transpose(buf, out, self.rows, self.cols);
        self.col_fwd.process_with_scratch(out, &mut self.scratch);
    }

    /// Inverse of [`Fft2::forward_transposed`]; `spec` is clobbered and
    /// `out` receives the natural `rows × cols` result (unnormalized).
    pub(crate) fn inverse_transposed(&mut self, spec: &mut [Complex<T>], out: &mut [Complex<T>]) {
        debug_assert_eq!(spec.len(), self.len());
        self.col_inv.process_with_scratch(spec, &mut self.scratch);
        transpose(spec, out, self.cols, self.rows);
        self.row_inv.process_with_scratch(out, &mut self.scratch);
    }

    fn run(&mut self, buf: &mut [Complex<T>], forward: bool) {
        debug_assert_eq!(buf.len(), self.len());
        let (row, col) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        row.process_with_scratch(buf, &mut self.scratch);
        for c in 0..self.cols {
            for r in 0..self.rows {
                self.column[r] = buf[r * self.cols + c];
            }
            col.process_with_scratch(&mut self.column, &mut self.scratch);
            for r in 0..self.rows {
                buf[r * self.cols + c] = self.column[r];
            }
        }
    }
}

/// `dst[c][r] = src[r][c]` for a `rows × cols` source, in cache blocks.
fn transpose<T: Copy>(src: &[T], dst: &mut [T], rows: usize, cols: usize) {
    const B: usize = 16;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}
