//! Flattenings of a `T × H × W` token grid into a 1-D sequence.
//!
//! Grid index is `(t·H + y)·W + x`. `forward[grid] = seq` and
//! `inverse[seq] = grid`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

/// Default Hilbert tile side.
pub const DEFAULT_BLOCK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanOrder {
    /// `x` fastest, then `y`, then `t`.
    SpaceFirst,
    /// `t` fastest, then `x`, then `y`.
    TimeFirst,
    /// Frames outermost, `block × block` tiles in raster order, Hilbert
    /// order inside each tile.
    LocalHilbert,
}

impl ScanOrder {
    pub const ALL: [ScanOrder; 3] = [ScanOrder::SpaceFirst, ScanOrder::TimeFirst, ScanOrder::LocalHilbert];

    pub fn name(self) -> &'static str {
        match self {
            ScanOrder::SpaceFirst => "space-first",
            ScanOrder::TimeFirst => "time-first",
            ScanOrder::LocalHilbert => "local-hilbert",
        }
    }
}

impl fmt::Display for ScanOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScanOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScanOrder::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scan order {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanPermutation {
    order: ScanOrder,
    dims: (usize, usize, usize),
    block: usize,
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl ScanPermutation {
    pub fn order(&self) -> ScanOrder {
        self.order
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    /// `(t, y, x)` of the token at sequence position `seq`.
    pub fn coords(&self, seq: usize) -> (usize, usize, usize) {
        let (_, h, w) = self.dims;
        let g = self.inverse[seq];
        (g / (h * w), (g / w) % h, g % w)
    }

    /// Mean L1 grid distance between consecutive sequence positions.
    pub fn mean_consecutive_manhattan(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        let total: usize = (1..self.len())
            .map(|s| {
                let (a, b) = (self.coords(s - 1), self.coords(s));
                a.0.abs_diff(b.0) + a.1.abs_diff(b.1) + a.2.abs_diff(b.2)
            })
            .sum();
        total as f64 / (self.len() - 1) as f64
    }
}

/// Hilbert index `d` to `(x, y)` on an `n × n` grid, `n` a power of two.
/// Starts at `(0, 0)` and ends at `(n − 1, 0)`.
pub fn hilbert_d2xy(n: usize, d: usize) -> (usize, usize) {
    let (mut x, mut y) = (0, 0);
    let mut t = d;
    let mut s = 1;
    while s < n {
        let rx = 1 & (t / 2);
        let ry = 1 & (t ^ rx);
        if ry == 0 {
            if rx == 1 {
                x = s - 1 - x;
                y = s - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        x += s * rx;
        y += s * ry;
        t /= 4;
        s *= 2;
    }
    (x, y)
}

pub fn build_permutation(order: ScanOrder, t: usize, h: usize, w: usize, block: usize) -> Result<ScanPermutation> {
    if t == 0 || h == 0 || w == 0 {
        return Err(shape_err(format!("empty grid {t}x{h}x{w}")));
    }
    let total = t.checked_mul(h).and_then(|v| v.checked_mul(w)).ok_or_else(|| shape_err("grid too large"))?;
    let mut inverse = Vec::with_capacity(total);
    match order {
        ScanOrder::SpaceFirst => inverse.extend(0..total),
        ScanOrder::TimeFirst => {
            for y in 0..h {
                for x in 0..w {
                    for f in 0..t {
                        inverse.push((f * h + y) * w + x);
                    }
                }
            }
        }
        ScanOrder::LocalHilbert => {
            if !block.is_power_of_two() || block > h.min(w) {
                return Err(Error::InvalidArgument(format!(
                    "block {block} must be a power of two no larger than {}",
                    h.min(w)
                )));
            }
            let frame = local_hilbert_frame(h, w, block);
            for f in 0..t {
                inverse.extend(frame.iter().map(|&(y, x)| (f * h + y) * w + x));
            }
        }
    }
    let mut forward = vec![0; total];
    for (seq, &g) in inverse.iter().enumerate() {
        forward[g] = seq;
    }
    Ok(ScanPermutation { order, dims: (t, h, w), block, forward, inverse })
}

/// `(y, x)` visit order for one frame.
fn local_hilbert_frame(h: usize, w: usize, block: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(h * w);
    for ty in (0..h).step_by(block) {
        for tx in (0..w).step_by(block) {
            let (bh, bw) = (block.min(h - ty), block.min(w - tx));
            if bh == block && bw == block {
                for d in 0..block * block {
                    let (x, y) = hilbert_d2xy(block, d);
                    out.push((ty + y, tx + x));
                }
            } else {
                for y in 0..bh {
                    for i in 0..bw {
                        let x = if y % 2 == 0 { i } else { bw - 1 - i };
                        out.push((ty + y, tx + x));
                    }
                }
            }
        }
    }
    out
}

/// Grid-ordered tokens to sequence order.
pub fn apply<T: Clone>(perm: &ScanPermutation, tokens: &[T]) -> Result<Vec<T>> {
    check_count(perm, tokens.len())?;
    Ok(perm.inverse.iter().map(|&g| tokens[g].clone()).collect())
}

/// Sequence-ordered tokens back to grid order.
pub fn unapply<T: Clone>(perm: &ScanPermutation, tokens: &[T]) -> Result<Vec<T>> {
    check_count(perm, tokens.len())?;
    Ok(perm.forward.iter().map(|&s| tokens[s].clone()).collect())
}

fn check_count(perm: &ScanPermutation, n: usize) -> Result<()> {
    if n != perm.len() {
        return Err(shape_err(format!("{n} tokens for a permutation of {}", perm.len())));
    }
    Ok(())
}
