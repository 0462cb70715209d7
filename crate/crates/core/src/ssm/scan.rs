//! Sequential and parallel evaluation of `h_t = Ā_t h_{t−1} + B̄_t x_t`,
//! `y_t = C_t·h_t + D x_t`, `h_{−1} = 0`.
//!
//! The parallel form treats each step as the affine map `h ↦ a h + b` and
//! composes maps with `(a₁,b₁)∘(a₂,b₂) = (a₂a₁, a₂b₁ + b₂)`. Chunks are
//! scanned independently with a work-efficient up/down sweep and their
//! composites are then folded in from the left.

use rayon::prelude::*;

use super::discretize::StepParams;
use crate::error::{Error, Result};

/// Default number of steps per chunk.
pub const DEFAULT_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanOptions {
    pub chunk: usize,
    /// Scan chunks on the rayon pool.
    pub parallel: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { chunk: DEFAULT_CHUNK, parallel: true }
    }
}

/// Combine operator used by the scan. `Faulty` swaps the factor applied to
/// the left offset and exists only so the check harness can prove that its
/// oracle notices a broken scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Combine {
    Correct,
    Faulty,
}

impl Combine {
    /// `out = left ∘ right` (left happens first), elementwise over the state.
    #[inline]
    fn apply(self, la: &[f64], lb: &[f64], ra: &[f64], rb: &[f64], oa: &mut [f64], ob: &mut [f64]) {
        match self {
            Combine::Correct => {
                for k in 0..la.len() {
                    oa[k] = ra[k] * la[k];
                    ob[k] = ra[k] * lb[k] + rb[k];
                }
            }
            Combine::Faulty => {
                for k in 0..la.len() {
                    oa[k] = ra[k] * la[k];
                    ob[k] = la[k] * lb[k] + rb[k];
                }
            }
        }
    }
}

/// Composes two affine steps: the result applies `first` then `second`.
pub fn combine(first: (&[f64], &[f64]), second: (&[f64], &[f64])) -> (Vec<f64>, Vec<f64>) {
    let n = first.0.len();
    let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
    Combine::Correct.apply(first.0, first.1, second.0, second.1, &mut a, &mut b);
    (a, b)
}

/// Plain sequential loop.
pub fn recurrence(params: &StepParams, x: &[f64]) -> Result<Vec<f64>> {
    params.check_input(x)?;
    let n = params.state_size();
    let mut h = vec![0.0; n];
    let mut y = Vec::with_capacity(x.len());
    for (t, &xt) in x.iter().enumerate() {
        let (a, b, c) = (params.abar.row(t), params.bbar.row(t), params.c.row(t));
        let mut acc = 0.0;
        for k in 0..n {
            h[k] = a[k] * h[k] + b[k] * xt;
            acc += c[k] * h[k];
        }
        y.push(acc + params.d * xt);
    }
    Ok(y)
}

/// Work-efficient parallel scan; same contract as [`recurrence`].
pub fn parallel_scan(params: &StepParams, x: &[f64], opts: ScanOptions) -> Result<Vec<f64>> {
    parallel_scan_with(params, x, opts, Combine::Correct)
}

pub(crate) fn parallel_scan_with(params: &StepParams, x: &[f64], opts: ScanOptions, op: Combine) -> Result<Vec<f64>> {
    params.check_input(x)?;
    if opts.chunk == 0 {
        return Err(Error::InvalidArgument("chunk size must be positive".into()));
    }
    let (l, n) = (x.len(), params.state_size());
    if l == 0 {
        return Ok(Vec::new());
    }
    // Inclusive within-chunk prefixes, stored as (a, b) rows.
    let mut pa = vec![0.0; l * n];
    let mut pb = vec![0.0; l * n];
    let chunk_rows = opts.chunk;
    let chunk_len = chunk_rows * n;
    let scan_chunk = |(ci, (ca, cb)): (usize, (&mut [f64], &mut [f64]))| {
        let t0 = ci * chunk_rows;
        let m = ca.len() / n;
        for i in 0..m {
            let t = t0 + i;
            let xt = x[t];
            ca[i * n..(i + 1) * n].copy_from_slice(params.abar.row(t).as_slice().expect("standard layout"));
            for (k, v) in cb[i * n..(i + 1) * n].iter_mut().enumerate() {
                *v = params.bbar[[t, k]] * xt;
            }
        }
        blelloch_inclusive(ca, cb, n, op);
    };
    let chunks = pa.chunks_mut(chunk_len).zip(pb.chunks_mut(chunk_len)).enumerate();
    if opts.parallel {
        chunks.collect::<Vec<_>>().into_par_iter().for_each(scan_chunk);
    } else {
        chunks.for_each(scan_chunk);
    }

    // Left-to-right fold of chunk composites gives the state entering each chunk.
    let n_chunks = l.div_ceil(chunk_rows);
    let mut carries = vec![0.0; n_chunks * n];
    let mut ta = vec![0.0; n];
    let mut tb = vec![0.0; n];
    for ci in 1..n_chunks {
        let last = ci * chunk_rows - 1;
        let (prev, cur) = carries.split_at_mut(ci * n);
        let prev = &prev[(ci - 1) * n..];
        // carry_ci = A_last * carry_{ci-1} + B_last (the carry is a state, not a map)
        let (a_last, b_last) = (&pa[last * n..(last + 1) * n], &pb[last * n..(last + 1) * n]);
        let ones = vec![1.0; n];
        op.apply(&ones, prev, a_last, b_last, &mut ta, &mut tb);
        cur[..n].copy_from_slice(&tb);
    }

    let mut y = vec![0.0; l];
    let finish = |(ci, yc): (usize, &mut [f64])| {
        let carry = &carries[ci * n..(ci + 1) * n];
        for (i, yt) in yc.iter_mut().enumerate() {
            let t = ci * chunk_rows + i;
            let (a, b) = (&pa[t * n..(t + 1) * n], &pb[t * n..(t + 1) * n]);
            let c = params.c.row(t);
            let mut acc = 0.0;
            for k in 0..n {
                acc += c[k] * (a[k] * carry[k] + b[k]);
            }
            *yt = acc + params.d * x[t];
        }
    };
    if opts.parallel {
        y.par_chunks_mut(chunk_rows).enumerate().for_each(finish);
    } else {
        y.chunks_mut(chunk_rows).enumerate().for_each(finish);
    }
    Ok(y)
}

/// In-place inclusive scan of `m` affine steps of width `n`, via an
/// exclusive up-sweep/down-sweep over a power-of-two tree.
fn blelloch_inclusive(a: &mut [f64], b: &mut [f64], n: usize, op: Combine) {
    let m = a.len() / n;
    let size = m.next_power_of_two();
    let mut ta = vec![1.0; size * n];
    let mut tb = vec![0.0; size * n];
    ta[..m * n].copy_from_slice(a);
    tb[..m * n].copy_from_slice(b);
    let mut oa = vec![0.0; n];
    let mut ob = vec![0.0; n];

    let mut stride = 1;
    while stride < size {
        let mut i = 2 * stride - 1;
        while i < size {
            let l = i - stride;
            op.apply(
                &ta[l * n..(l + 1) * n],
                &tb[l * n..(l + 1) * n],
                &ta[i * n..(i + 1) * n],
                &tb[i * n..(i + 1) * n],
                &mut oa,
                &mut ob,
            );
            ta[i * n..(i + 1) * n].copy_from_slice(&oa);
            tb[i * n..(i + 1) * n].copy_from_slice(&ob);
            i += 2 * stride;
        }
        stride *= 2;
    }

    let root = size - 1;
    ta[root * n..(root + 1) * n].fill(1.0);
    tb[root * n..(root + 1) * n].fill(0.0);
    let mut la = vec![0.0; n];
    let mut lb = vec![0.0; n];
    stride = size / 2;
    while stride >= 1 {
        let mut i = 2 * stride - 1;
        while i < size {
            let l = i - stride;
            la.copy_from_slice(&ta[l * n..(l + 1) * n]);
            lb.copy_from_slice(&tb[l * n..(l + 1) * n]);
            // left child receives the parent prefix; right child gets prefix ∘ left total
            let (pa, pb) = (ta[i * n..(i + 1) * n].to_vec(), tb[i * n..(i + 1) * n].to_vec());
            op.apply(&pa, &pb, &la, &lb, &mut oa, &mut ob);
            ta[l * n..(l + 1) * n].copy_from_slice(&pa);
            tb[l * n..(l + 1) * n].copy_from_slice(&pb);
            ta[i * n..(i + 1) * n].copy_from_slice(&oa);
            tb[i * n..(i + 1) * n].copy_from_slice(&ob);
            i += 2 * stride;
        }
        stride /= 2;
    }

    for j in 0..m {
        let r = j * n..(j + 1) * n;
        op.apply(&ta[r.clone()], &tb[r.clone()], &a[r.clone()], &b[r.clone()], &mut oa, &mut ob);
        a[r.clone()].copy_from_slice(&oa);
        b[r].copy_from_slice(&ob);
    }
}

/// `|h_t| ≤ max|B̄x| / (1 − max|Ā|)` for `max|Ā| < 1`, per state entry.
pub fn geometric_state_bound(params: &StepParams, x: &[f64]) -> Option<f64> {
    let amax = params.abar.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if amax >= 1.0 {
        return None;
    }
    let mut drive = 0.0f64;
    for (t, &xt) in x.iter().enumerate() {
        for &b in params.bbar.row(t) {
            drive = drive.max((b * xt).abs());
        }
    }
    Some(drive / (1.0 - amax))
}

/// Final hidden states of the recurrence, for bound checks.
pub fn hidden_states(params: &StepParams, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    params.check_input(x)?;
    let n = params.state_size();
    let mut h = vec![0.0; n];
    let mut out = Vec::with_capacity(x.len());
    for (t, &xt) in x.iter().enumerate() {
        for k in 0..n {
            h[k] = params.abar[[t, k]] * h[k] + params.bbar[[t, k]] * xt;
        }
        out.push(h.clone());
    }
    Ok(out)
}
