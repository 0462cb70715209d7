//! Output gating `y' = y ⊙ silu(p)`, with `p = s(x_gate)` unguided and
//! `p = s(x_gate) ⊙ (1 + g(r))` guided.

use ndarray::{Array2, Zip};

use super::selective::Affine;
use crate::error::{shape_err, Result};

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub(crate) fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Guidance embedding and the map it passes through before scaling the gate.
#[derive(Debug, Clone, Copy)]
pub struct GateGuidance<'a> {
    pub r: &'a Array2<f64>,
    pub map: &'a Affine,
}

fn pre_activation(
    y: &Array2<f64>,
    x_gate: &Array2<f64>,
    gate: &Affine,
    guidance: Option<GateGuidance<'_>>,
) -> Result<(Array2<f64>, Option<Array2<f64>>)> {
    if gate.outputs() != y.ncols() || x_gate.nrows() != y.nrows() {
        return Err(shape_err(format!("gate {:?} for output {:?}", x_gate.dim(), y.dim())));
    }
    let mut pre = gate.apply(x_gate)?;
    let scale = match guidance {
        Some(g) => {
            if g.r.nrows() != y.nrows() || g.map.outputs() != y.ncols() {
                return Err(shape_err("guidance does not match the gated output"));
            }
            let s = g.map.apply(g.r)?.mapv(|v| 1.0 + v);
            pre *= &s;
            Some(s)
        }
        None => None,
    };
    Ok((pre, scale))
}

pub fn gated_output(
    y: &Array2<f64>,
    x_gate: &Array2<f64>,
    gate: &Affine,
    guidance: Option<GateGuidance<'_>>,
) -> Result<Array2<f64>> {
    let (pre, _) = pre_activation(y, x_gate, gate, guidance)?;
    Ok(Zip::from(y).and(&pre).map_collect(|&yv, &p| yv * silu(p)))
}

#[derive(Debug, Clone)]
pub struct GateGradients {
    pub y: Array2<f64>,
    pub x_gate: Array2<f64>,
    pub r: Option<Array2<f64>>,
}

/// Cotangents of [`gated_output`] with respect to its tensor inputs.
pub fn gated_output_vjp(
    y: &Array2<f64>,
    x_gate: &Array2<f64>,
    gate: &Affine,
    guidance: Option<GateGuidance<'_>>,
    cotangent: &Array2<f64>,
) -> Result<GateGradients> {
    if cotangent.dim() != y.dim() {
        return Err(shape_err("cotangent shape"));
    }
    let (pre, scale) = pre_activation(y, x_gate, gate, guidance)?;
    let g_y = Zip::from(cotangent).and(&pre).map_collect(|&c, &p| c * silu(p));
    let g_pre = Zip::from(cotangent).and(y).and(&pre).map_collect(|&c, &yv, &p| c * yv * silu_grad(p));
    let (g_gate_out, g_r) = match (guidance, scale) {
        (Some(g), Some(s)) => {
            let gx = gate.apply(x_gate)?;
            let g_scale = &g_pre * &gx;
            (&g_pre * &s, Some(g_scale.dot(&g.map.weight)))
        }
        _ => (g_pre, None),
    };
    Ok(GateGradients { y: g_y, x_gate: g_gate_out.dot(&gate.weight), r: g_r })
}
