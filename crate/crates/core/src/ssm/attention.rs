use std::time::Instant;

use ndarray::Array2;

use crate::error::{shape_err, Error, Result};

/// Dense softmax attention, `softmax(QKᵀ/√d) V`, computed row by row in
/// `O(L² d)`. Used only as a quadratic reference for timing.
pub fn attention_baseline(q: &Array2<f64>, k: &Array2<f64>, v: &Array2<f64>) -> Result<Array2<f64>> {
    let (l, d) = q.dim();
    if k.dim() != (l, d) || v.nrows() != l {
        return Err(shape_err("Q, K, V disagree on length or width"));
    }
    let scale = 1.0 / (d as f64).sqrt();
    let mut out = Array2::zeros((l, v.ncols()));
    let mut scores = vec![0.0; l];
    for i in 0..l {
        let qi = q.row(i);
        let mut max = f64::NEG_INFINITY;
        for (j, s) in scores.iter_mut().enumerate() {
            *s = qi.dot(&k.row(j)) * scale;
            max = max.max(*s);
        }
        let mut total = 0.0;
        for s in scores.iter_mut() {
            *s = (*s - max).exp();
            total += *s;
        }
        let mut row = out.row_mut(i);
        for (j, s) in scores.iter().enumerate() {
            row.scaled_add(s / total, &v.row(j));
        }
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("need at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all x values are equal".into()));
    }
    Ok(sxy / sxx)
}

/// Minimum wall time in seconds over `repeats` runs of `f`.
pub fn min_time<T>(repeats: usize, mut f: impl FnMut() -> T) -> f64 {
    (0..repeats.max(1))
        .map(|_| {
            let start = Instant::now();
            std::hint::black_box(f());
            start.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}
