//! Diagonal state-space kernels: discretization, recurrence and parallel
//! scans, the convolution form, selective and guided parameterizations,
//! output gating and bidirectional composition.

mod attention;
mod conv;
mod discretize;
mod gate;
pub(crate) mod scan;
mod selective;

pub use attention::{attention_baseline, fit_loglog_slope, min_time};
pub use conv::{causal_conv, conv_mode, ssm_conv_kernel};
pub use discretize::{discretize_zoh, SsmParams, StepParams};
pub use gate::{gated_output, gated_output_vjp, GateGradients, GateGuidance};
pub use scan::{
    combine, geometric_state_bound, hidden_states, parallel_scan, recurrence, ScanOptions, DEFAULT_CHUNK,
};
pub use selective::{
    selective_params, selective_ssm, Affine, Guidance, GuidanceProjections, SelectiveParams, SelectiveProjections,
};

use crate::error::Result;

/// `scan_fwd(x) + reverse(scan_bwd(reverse(x)))`. `bwd` is indexed in the
/// order it is applied, i.e. its step 0 meets the last token.
pub fn bidirectional_ssm(x: &[f64], fwd: &StepParams, bwd: &StepParams, opts: ScanOptions) -> Result<Vec<f64>> {
    let forward = parallel_scan(fwd, x, opts)?;
    let rev: Vec<f64> = x.iter().rev().copied().collect();
    let backward = parallel_scan(bwd, &rev, opts)?;
    Ok(forward.iter().zip(backward.iter().rev()).map(|(a, b)| a + b).collect())
}
