use super::discretize::StepParams;
use crate::error::{shape_err, Result};

/// `K_j = C Ā^j B̄` for `j < len`, for a time-invariant diagonal system.
pub fn ssm_conv_kernel(abar: &[f64], bbar: &[f64], c: &[f64], len: usize) -> Result<Vec<f64>> {
    let n = abar.len();
    if bbar.len() != n || c.len() != n {
        return Err(shape_err("Ā, B̄ and C must share a state size"));
    }
    let mut pow: Vec<f64> = bbar.to_vec();
    let mut k = Vec::with_capacity(len);
    for _ in 0..len {
        k.push(c.iter().zip(&pow).map(|(ci, pi)| ci * pi).sum());
        for (p, a) in pow.iter_mut().zip(abar) {
            *p *= a;
        }
    }
    Ok(k)
}

/// `y_t = Σ_{j≤t} K_j x_{t−j} + D x_t`.
pub fn causal_conv(x: &[f64], kernel: &[f64], d: f64) -> Result<Vec<f64>> {
    if kernel.len() < x.len() {
        return Err(shape_err(format!("kernel of {} taps for {} inputs", kernel.len(), x.len())));
    }
    Ok((0..x.len())
        .map(|t| (0..=t).map(|j| kernel[j] * x[t - j]).sum::<f64>() + d * x[t])
        .collect())
}

/// Convolution-mode evaluation of a time-invariant [`StepParams`]; uses the
/// first row as the shared system.
pub fn conv_mode(params: &StepParams, x: &[f64]) -> Result<Vec<f64>> {
    params.check_input(x)?;
    if x.is_empty() {
        return Ok(Vec::new());
    }
    let row = |m: &ndarray::Array2<f64>| m.row(0).to_vec();
    let k = ssm_conv_kernel(&row(&params.abar), &row(&params.bbar), &row(&params.c), x.len())?;
    causal_conv(x, &k, params.d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powers_of_a_half() {
        assert_eq!(ssm_conv_kernel(&[0.5], &[1.0], &[1.0], 3).unwrap(), vec![1.0, 0.5, 0.25]);
    }

    #[test]
    fn memoryless_system() {
        let k = ssm_conv_kernel(&[0.0, 0.0], &[2.0, 1.0], &[3.0, -1.0], 4).unwrap();
        assert_eq!(k, vec![5.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn short_kernel_rejected() {
        assert!(causal_conv(&[1.0, 2.0], &[1.0], 0.0).is_err());
    }
}
