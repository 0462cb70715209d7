use ndarray::Array3;

use crate::error::{ensure_same_shape, shape_err, Result};

/// Per-scale elementwise product `features_i ⊙ mods_i`.
pub fn modulate(features: &[Array3<f64>], mods: &[Array3<f64>]) -> Result<Vec<Array3<f64>>> {
    if features.len() != mods.len() {
        return Err(shape_err(format!("{} feature scales vs {} modulators", features.len(), mods.len())));
    }
    features
        .iter()
        .zip(mods)
        .map(|(f, m)| {
            ensure_same_shape(f.shape(), m.shape(), "modulation scale")?;
            Ok(f * m)
        })
        .collect()
}

/// Cotangents of [`modulate`] with respect to features and modulators.
pub fn modulate_vjp(
    features: &[Array3<f64>],
    mods: &[Array3<f64>],
    cotangent: &[Array3<f64>],
) -> Result<(Vec<Array3<f64>>, Vec<Array3<f64>>)> {
    if cotangent.len() != features.len() {
        return Err(shape_err("cotangent scale count"));
    }
    let g_features = modulate(cotangent, mods)?;
    let g_mods = modulate(cotangent, features)?;
    Ok((g_features, g_mods))
}
