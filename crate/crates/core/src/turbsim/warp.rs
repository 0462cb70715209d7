//! Backward bilinear warping with edge clamping, and its vector-Jacobian product.

use ndarray::Array4;

use crate::error::{shape_err, Result};
use crate::tensor::{FrameSequence, TiltField};

/// Clamped bilinear stencil for one sample position.
#[derive(Clone, Copy)]
struct Stencil {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
    fx: f64,
    fy: f64,
}

#[inline]
fn stencil(sx: f64, sy: f64, h: usize, w: usize) -> Stencil {
    let fx0 = sx.floor();
    let fy0 = sy.floor();
    let clamp = |v: f64, n: usize| v.max(0.0).min((n - 1) as f64) as usize;
    Stencil {
        x0: clamp(fx0, w),
        x1: clamp(fx0 + 1.0, w),
        y0: clamp(fy0, h),
        y1: clamp(fy0 + 1.0, h),
        fx: sx - fx0,
        fy: sy - fy0,
    }
}

fn check_dims(image: &FrameSequence, tilt: &TiltField) -> Result<()> {
    let (t, h, w, _) = image.dims();
    if tilt.dims() != (t, h, w) {
        return Err(shape_err(format!(
            "tilt {:?} does not match image {:?}",
            tilt.dims(),
            (t, h, w)
        )));
    }
    Ok(())
}

/// `out(t, y, x) = J_t(x + Δx, y + Δy)` by bilinear interpolation; samples
/// outside the frame clamp to the nearest edge pixel.
pub fn warp(image: &FrameSequence, tilt: &TiltField) -> Result<FrameSequence> {
    check_dims(image, tilt)?;
    let (t, h, w, c) = image.dims();
    let src = image.data();
    let shifts = tilt.shifts();
    let mut out = Array4::zeros((t, h, w, c));
    for f in 0..t {
        for y in 0..h {
            for x in 0..w {
                let s = stencil(
                    x as f64 + shifts[[f, y, x, 0]],
                    y as f64 + shifts[[f, y, x, 1]],
                    h,
                    w,
                );
                for ch in 0..c {
                    let top = (1.0 - s.fx) * src[[f, s.y0, s.x0, ch]] + s.fx * src[[f, s.y0, s.x1, ch]];
                    let bot = (1.0 - s.fx) * src[[f, s.y1, s.x0, ch]] + s.fx * src[[f, s.y1, s.x1, ch]];
                    out[[f, y, x, ch]] = (1.0 - s.fy) * top + s.fy * bot;
                }
            }
        }
    }
    FrameSequence::new(out)
}

/// Cotangents of [`warp`] with respect to the image and the tilt field.
pub fn warp_vjp(
    image: &FrameSequence,
    tilt: &TiltField,
    cotangent_out: &Array4<f64>,
) -> Result<(Array4<f64>, Array4<f64>)> {
    check_dims(image, tilt)?;
    let (t, h, w, c) = image.dims();
    if cotangent_out.dim() != (t, h, w, c) {
        return Err(shape_err("warp cotangent shape"));
    }
    let src = image.data();
    let shifts = tilt.shifts();
    let mut g_img = Array4::zeros((t, h, w, c));
    let mut g_tilt = Array4::zeros((t, h, w, 2));
    for f in 0..t {
        for y in 0..h {
            for x in 0..w {
                let s = stencil(
                    x as f64 + shifts[[f, y, x, 0]],
                    y as f64 + shifts[[f, y, x, 1]],
                    h,
                    w,
                );
                let (mut gx, mut gy) = (0.0, 0.0);
                for ch in 0..c {
                    let g = cotangent_out[[f, y, x, ch]];
                    if g == 0.0 {
                        continue;
                    }
                    let v00 = src[[f, s.y0, s.x0, ch]];
                    let v01 = src[[f, s.y0, s.x1, ch]];
                    let v10 = src[[f, s.y1, s.x0, ch]];
                    let v11 = src[[f, s.y1, s.x1, ch]];
                    g_img[[f, s.y0, s.x0, ch]] += g * (1.0 - s.fy) * (1.0 - s.fx);
                    g_img[[f, s.y0, s.x1, ch]] += g * (1.0 - s.fy) * s.fx;
                    g_img[[f, s.y1, s.x0, ch]] += g * s.fy * (1.0 - s.fx);
                    g_img[[f, s.y1, s.x1, ch]] += g * s.fy * s.fx;
                    // Clamped stencils collapse to equal taps, zeroing the slope.
                    gx += g * ((1.0 - s.fy) * (v01 - v00) + s.fy * (v11 - v10));
                    gy += g * ((1.0 - s.fx) * (v10 - v00) + s.fx * (v11 - v01));
                }
                g_tilt[[f, y, x, 0]] = gx;
                g_tilt[[f, y, x, 1]] = gy;
            }
        }
    }
    Ok((g_img, g_tilt))
}
