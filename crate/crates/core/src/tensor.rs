//! Tensor carriers shared by every module.
//!
//! All video-shaped data uses the `T × H × W × C` layout, row-major, in `f64`.

use ndarray::{Array4, ArrayView3, Axis};

use crate::error::{shape_err, Error, Result};

/// A `T × H × W × C` video tensor with values nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    data: Array4<f64>,
}

impl FrameSequence {
    pub fn new(data: Array4<f64>) -> Result<Self> {
        if data.shape().iter().any(|&d| d == 0) {
            return Err(shape_err(format!("empty frame sequence {:?}", data.shape())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("frame sequence"));
        }
        Ok(Self { data })
    }

    pub fn zeros(t: usize, h: usize, w: usize, c: usize) -> Self {
        Self { data: Array4::zeros((t, h, w, c)) }
    }

    pub fn from_fn(
        dims: (usize, usize, usize, usize),
        f: impl FnMut((usize, usize, usize, usize)) -> f64,
    ) -> Self {
        Self { data: Array4::from_shape_fn(dims, f) }
    }

    /// `(T, H, W, C)`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        self.data.dim()
    }

    pub fn data(&self) -> &Array4<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array4<f64> {
        &mut self.data
    }

    pub fn into_inner(self) -> Array4<f64> {
        self.data
    }

    pub fn frame(&self, t: usize) -> ArrayView3<'_, f64> {
        self.data.index_axis(Axis(0), t)
    }
}

/// Per-pixel shift field `T × H × W × 2`; channel 0 is the x (column) shift,
/// channel 1 the y (row) shift, both in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltField {
    shifts: Array4<f64>,
}

impl TiltField {
    pub fn new(shifts: Array4<f64>) -> Result<Self> {
        let (_, h, w, two) = shifts.dim();
        if two != 2 {
            return Err(shape_err(format!("tilt field needs 2 channels, got {two}")));
        }
        if shifts.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tilt field"));
        }
        let bound = h.max(w) as f64;
        if shifts.iter().any(|v| v.abs() > bound) {
            return Err(Error::InvalidArgument(format!(
                "tilt magnitude exceeds frame size {bound}"
            )));
        }
        Ok(Self { shifts })
    }

    pub fn zeros(t: usize, h: usize, w: usize) -> Self {
        Self { shifts: Array4::zeros((t, h, w, 2)) }
    }

    pub fn constant(t: usize, h: usize, w: usize, dx: f64, dy: f64) -> Self {
        Self {
            shifts: Array4::from_shape_fn((t, h, w, 2), |(_, _, _, c)| if c == 0 { dx } else { dy }),
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        let (t, h, w, _) = self.shifts.dim();
        (t, h, w)
    }

    pub fn shifts(&self) -> &Array4<f64> {
        &self.shifts
    }

    pub fn into_inner(self) -> Array4<f64> {
        self.shifts
    }
}
