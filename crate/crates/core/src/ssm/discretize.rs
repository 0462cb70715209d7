use ndarray::Array2;

use crate::error::{shape_err, Error, Result};

/// Zero-order-hold discretization of a diagonal system.
///
/// `Ā = exp(ΔA)`, `B̄ = (ΔA)⁻¹(exp(ΔA) − 1)·ΔB`, with `B̄ = ΔB` at `A = 0`.
pub fn discretize_zoh(a_diag: &[f64], b: &[f64], delta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {delta}")));
    }
    if a_diag.len() != b.len() {
        return Err(shape_err(format!("A has {} entries, B has {}", a_diag.len(), b.len())));
    }
    let mut abar = Vec::with_capacity(a_diag.len());
    let mut bbar = Vec::with_capacity(a_diag.len());
    for (&a, &bn) in a_diag.iter().zip(b) {
        let (ab, bb) = zoh_scalar(a, bn, delta);
        abar.push(ab);
        bbar.push(bb);
    }
    Ok((abar, bbar))
}

#[inline]
pub(crate) fn zoh_scalar(a: f64, b: f64, delta: f64) -> (f64, f64) {
    let z = delta * a;
    let phi = if z == 0.0 { 1.0 } else { z.exp_m1() / z };
    (z.exp(), phi * delta * b)
}

/// Continuous diagonal system with a per-step `Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SsmParams {
    pub a_diag: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
    pub delta: Vec<f64>,
}

impl SsmParams {
    pub fn state_size(&self) -> usize {
        self.a_diag.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a_diag.len();
        if n == 0 || self.b.len() != n || self.c.len() != n {
            return Err(shape_err("A, B and C must share a nonzero state size"));
        }
        if self.a_diag.iter().any(|&a| !(a <= 0.0)) {
            return Err(Error::InvalidArgument("diagonal A must be nonpositive".into()));
        }
        if let Some(bad) = self.delta.iter().find(|&&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {bad}")));
        }
        Ok(())
    }

    /// Per-step discrete parameters, one row per `Δ_t`.
    pub fn discretize(&self) -> Result<StepParams> {
        self.validate()?;
        let (l, n) = (self.delta.len(), self.state_size());
        let mut abar = Array2::zeros((l, n));
        let mut bbar = Array2::zeros((l, n));
        for (t, &dt) in self.delta.iter().enumerate() {
            for k in 0..n {
                let (a, b) = zoh_scalar(self.a_diag[k], self.b[k], dt);
                abar[[t, k]] = a;
                bbar[[t, k]] = b;
            }
        }
        let c = Array2::from_shape_fn((l, n), |(_, k)| self.c[k]);
        StepParams::new(abar, bbar, c, self.d)
    }
}

/// Discrete parameters for every step of a single-channel scan.
/// Rows index time, columns index the state.
#[derive(Debug, Clone, PartialEq)]
pub struct StepParams {
    pub abar: Array2<f64>,
    pub bbar: Array2<f64>,
    pub c: Array2<f64>,
    pub d: f64,
}

impl StepParams {
    pub fn new(abar: Array2<f64>, bbar: Array2<f64>, c: Array2<f64>, d: f64) -> Result<Self> {
        if abar.dim() != bbar.dim() || abar.dim() != c.dim() {
            return Err(shape_err(format!("Ā {:?}, B̄ {:?}, C {:?}", abar.dim(), bbar.dim(), c.dim())));
        }
        Ok(Self { abar, bbar, c, d })
    }

    /// The same `(Ā, B̄, C)` repeated for `len` steps.
    pub fn time_invariant(abar: &[f64], bbar: &[f64], c: &[f64], d: f64, len: usize) -> Result<Self> {
        let n = abar.len();
        if bbar.len() != n || c.len() != n {
            return Err(shape_err("Ā, B̄ and C must share a state size"));
        }
        let rep = |v: &[f64]| Array2::from_shape_fn((len, n), |(_, k)| v[k]);
        Self::new(rep(abar), rep(bbar), rep(c), d)
    }

    pub fn len(&self) -> usize {
        self.abar.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state_size(&self) -> usize {
        self.abar.ncols()
    }

    /// Steps in reverse order, for scanning a reversed sequence.
    pub fn reversed(&self) -> Self {
        let rev = |m: &Array2<f64>| m.slice(ndarray::s![..;-1, ..]).to_owned();
        Self { abar: rev(&self.abar), bbar: rev(&self.bbar), c: rev(&self.c), d: self.d }
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.len() {
            return Err(shape_err(format!("{} parameter steps for {} inputs", self.len(), x.len())));
        }
        Ok(())
    }
}
