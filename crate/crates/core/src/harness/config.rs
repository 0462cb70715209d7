//! Run configuration, read from TOML. Every section is optional and unknown
//! keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::lpd::RbnArch;
use crate::scanorder::{ScanOrder, DEFAULT_BLOCK};
use crate::ssm::DEFAULT_CHUNK;
use crate::turbsim::{PsfBasisConfig, SimConfig};
use crate::zernike::{FieldCovarianceSpec, MAX_NOLL_INDEX};

/// Largest frame side accepted by `simulate`.
pub const SIMULATE_SIZE_CAP: usize = 512;
/// Largest frame count accepted by `simulate`.
pub const SIMULATE_FRAME_CAP: usize = 64;
/// Largest frame side accepted by `invert`.
pub const INVERT_SIZE_CAP: usize = 64;
/// Largest frame count accepted by `invert`.
pub const INVERT_FRAME_CAP: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TurbulenceConfig {
    /// Aperture-to-coherence ratio driving the Kolmogorov variance profile.
    pub d_over_r0: f64,
    /// Explicit per-mode variances (tilt pair first); replaces the profile
    /// when present.
    pub variances: Option<Vec<f64>>,
    /// Field channels including the kernel-size channel.
    pub channels: usize,
    pub kernel_size: usize,
    pub correlation_length: f64,
    pub temporal_correlation: f64,
    pub noise_sigma: f64,
    pub aperture_ratio: f64,
    /// Pixels per unit tilt coefficient; defaults to `kernel_size / 4`.
    pub tilt_scale: Option<f64>,
    pub weight_stride: usize,
    /// Zernike table resolution.
    pub zernike_grid: usize,
}

impl Default for TurbulenceConfig {
    fn default() -> Self {
        Self {
            d_over_r0: 1.0,
            variances: None,
            channels: 36,
            kernel_size: 33,
            correlation_length: 16.0,
            temporal_correlation: 0.5,
            noise_sigma: 0.0,
            aperture_ratio: 1.0,
            tilt_scale: None,
            weight_stride: SimConfig::default().weight_stride,
            zernike_grid: 128,
        }
    }
}

impl TurbulenceConfig {
    /// Field statistics at `scale × D/r0` (explicit variances scale as
    /// `scale^{5/3}`).
    pub fn field_spec(&self, scale: f64) -> Result<FieldCovarianceSpec> {
        match &self.variances {
            Some(v) => {
                let f = scale.powf(5.0 / 3.0);
                let spec = FieldCovarianceSpec {
                    per_mode_variance: v.iter().map(|x| x * f).collect(),
                    spatial_correlation_length: self.correlation_length,
                    temporal_correlation: self.temporal_correlation,
                    kernel_size: self.kernel_size,
                };
                spec.validate()?;
                Ok(spec)
            }
            None => FieldCovarianceSpec::kolmogorov(
                self.d_over_r0 * scale,
                self.channels,
                self.kernel_size,
                self.correlation_length,
                self.temporal_correlation,
            ),
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig { aperture_ratio: self.aperture_ratio, tilt_scale: self.tilt_scale, weight_stride: self.weight_stride }
    }

    /// True when every sampled mode has zero variance.
    pub fn is_still(&self) -> bool {
        match &self.variances {
            Some(v) => v.iter().all(|&x| x == 0.0),
            None => self.d_over_r0 == 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisSection {
    pub k: usize,
    /// PSFs drawn to fit the basis.
    pub samples: usize,
    /// Side of each square sample field.
    pub sample_size: usize,
    /// Multipliers on `D/r0` for the sample fields, one field each.
    pub strength_scales: Vec<f64>,
    pub power_iterations: usize,
}

impl Default for BasisSection {
    fn default() -> Self {
        let d = PsfBasisConfig::default();
        Self {
            k: d.k,
            samples: d.samples,
            sample_size: 32,
            strength_scales: vec![0.5, 1.0, 1.5, 2.0],
            power_iterations: d.power_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsmSection {
    pub state_size: usize,
    pub length: usize,
    pub chunk: usize,
}

impl Default for SsmSection {
    fn default() -> Self {
        Self { state_size: 16, length: 4096, chunk: DEFAULT_CHUNK }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub order: ScanOrder,
    pub block: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self { order: ScanOrder::LocalHilbert, block: DEFAULT_BLOCK }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvertSection {
    pub steps: usize,
    /// Initial step on the per-element gradient.
    pub step_size: f64,
    /// Smallest step before the run stops shrinking it.
    pub min_step: f64,
    /// Side of the synthetic problem.
    pub size: usize,
    pub frames: usize,
    /// Peak of the synthetic tilt field, in pixels.
    pub tilt_amplitude: f64,
    pub arch: RbnArch,
    pub residual_scale: f64,
}

impl Default for InvertSection {
    fn default() -> Self {
        Self {
            steps: 200,
            step_size: 2.0,
            min_step: 1e-6,
            size: 64,
            frames: 1,
            tilt_amplitude: 0.6,
            arch: RbnArch::default(),
            residual_scale: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    /// Frame side for the low-rank vs direct comparison.
    pub size: usize,
    pub channels: usize,
    pub repeats: usize,
    pub scan_log2: [u32; 2],
    pub scan_state_size: usize,
    pub attention_log2: [u32; 2],
    pub attention_dim: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            size: 128,
            channels: 3,
            repeats: 2,
            scan_log2: [10, 20],
            scan_state_size: 2,
            attention_log2: [8, 12],
            attention_dim: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub turbulence: TurbulenceConfig,
    pub basis: BasisSection,
    pub ssm: SsmSection,
    pub scan: ScanSection,
    pub loss: LossWeights,
    pub invert: InvertSection,
    pub bench: BenchSection,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn basis_config(&self) -> PsfBasisConfig {
        PsfBasisConfig {
            k: self.basis.k,
            samples: self.basis.samples,
            seed: self.seed,
            aperture_ratio: self.turbulence.aperture_ratio,
            power_iterations: self.basis.power_iterations,
            ..PsfBasisConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.turbulence;
        if !(t.d_over_r0 >= 0.0) || !t.d_over_r0.is_finite() {
            return Err(bad("turbulence.d_over_r0 must be finite and >= 0"));
        }
        if t.channels < 4 || t.channels > MAX_NOLL_INDEX {
            return Err(bad(format!("turbulence.channels must lie in 4..={MAX_NOLL_INDEX}")));
        }
        if let Some(v) = &t.variances {
            if v.len() != t.channels - 1 {
                return Err(bad(format!(
                    "turbulence.variances needs {} entries (channels - 1), got {}",
                    t.channels - 1,
                    v.len()
                )));
            }
        }
        if !(t.noise_sigma >= 0.0) || !t.noise_sigma.is_finite() {
            return Err(bad("turbulence.noise_sigma must be finite and >= 0"));
        }
        if t.weight_stride == 0 {
            return Err(bad("turbulence.weight_stride must be >= 1"));
        }
        if t.zernike_grid < 8 {
            return Err(bad("turbulence.zernike_grid must be >= 8"));
        }
        if !(t.aperture_ratio > 0.0 && t.aperture_ratio <= 1.0) {
            return Err(bad("turbulence.aperture_ratio must lie in (0, 1]"));
        }
        t.field_spec(1.0).map_err(|e| bad(e.to_string()))?;

        let b = &self.basis;
        if b.k == 0 || b.samples == 0 || b.sample_size == 0 || b.strength_scales.is_empty() {
            return Err(bad("basis.k, samples, sample_size and strength_scales must be non-empty"));
        }
        if b.strength_scales.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(bad("basis.strength_scales must be finite and >= 0"));
        }
        let s = &self.ssm;
        if s.state_size == 0 || s.length == 0 || s.chunk == 0 {
            return Err(bad("ssm sizes must be positive"));
        }
        let sc = &self.scan;
        if !sc.block.is_power_of_two() {
            return Err(bad("scan.block must be a power of two"));
        }
        self.loss.validate().map_err(|e| bad(e.to_string()))?;
        let inv = &self.invert;
        if !(inv.step_size > 0.0) || !(inv.min_step > 0.0) || inv.min_step > inv.step_size {
            return Err(bad("invert.step_size and min_step must satisfy 0 < min_step <= step_size"));
        }
        if inv.size == 0 || inv.size > INVERT_SIZE_CAP || inv.size % 8 != 0 {
            return Err(bad(format!("invert.size must be a multiple of 8 up to {INVERT_SIZE_CAP}")));
        }
        if inv.frames == 0 || inv.frames > INVERT_FRAME_CAP {
            return Err(bad(format!("invert.frames must lie in 1..={INVERT_FRAME_CAP}")));
        }
        if !(inv.tilt_amplitude >= 0.0) || !inv.residual_scale.is_finite() {
            return Err(bad("invert.tilt_amplitude and residual_scale must be finite"));
        }
        let be = &self.bench;
        if be.size == 0 || be.size > crate::turbsim::DIRECT_SIZE_CAP {
            return Err(bad(format!("bench.size must lie in 1..={}", crate::turbsim::DIRECT_SIZE_CAP)));
        }
        if be.channels == 0 || be.repeats == 0 || be.scan_state_size == 0 || be.attention_dim == 0 {
            return Err(bad("bench sizes must be positive"));
        }
        for [lo, hi] in [be.scan_log2, be.attention_log2] {
            if lo >= hi || hi > 24 {
                return Err(bad("bench ladders need lo < hi <= 24"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = RunConfig::from_toml("seed = 9\n[turbulence]\nd_over_r0 = 0.5\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.turbulence.d_over_r0, 0.5);
        assert_eq!(cfg.basis, BasisSection::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml("sed = 1\n"), Err(Error::Config(_))));
        assert!(RunConfig::from_toml("[scan]\norder = \"local-hilbert\"\nwidth = 3\n").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "[turbulence]\nkernel_size = 4\n",
            "[turbulence]\nvariances = [1.0]\n",
            "[scan]\nblock = 6\n",
            "[loss]\nalpha = -1.0\n",
            "[invert]\nsize = 100\n",
        ] {
            assert!(RunConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn explicit_variances_scale_with_strength() {
        let mut t = TurbulenceConfig { channels: 5, ..Default::default() };
        t.variances = Some(vec![1.0, 1.0, 0.5, 0.0]);
        let spec = t.field_spec(2f64.powf(0.6)).unwrap();
        assert!((spec.per_mode_variance[0] - 2.0).abs() < 1e-12);
        assert!(!t.is_still());
    }
}
