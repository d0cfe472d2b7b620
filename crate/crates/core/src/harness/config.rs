//! Sweep configuration, stored as versioned TOML.
//!
//! ```toml
//! version = 1
//! num_ports = 256
//! antennas_per_slot = 4
//! timeslots = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
//! snr_db = [20.0]
//! trials = 500
//! carrier_hz = 3.5e9
//! aperture_in_wavelengths = 10.0
//! base_seed = 1
//!
//! [channel]
//! num_clusters = 9
//! rays_per_cluster = 100
//! angle_spread_deg = 5.0
//!
//! [[schemes]]
//! type = "sbar"
//! kernel = { kind = "bessel" }
//!
//! [[schemes]]
//! type = "sbar"
//! kernel = { kind = "covariance", training_size = 100, training_seed = 1000000 }
//!
//! [[schemes]]
//! type = "selmmse"
//!
//! [[schemes]]
//! type = "fas_omp"
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{DEFAULT_OVERSAMPLING, DEFAULT_RESIDUAL_TOL};
use crate::error::{Error, Result};
use crate::geometry::{build_port_geometry, PortGeometry, SscModelParams};
use crate::kernels::{Jitter, LengthUnit, DEFAULT_RELATIVE_JITTER};
use crate::rng::hash_words;

pub const CONFIG_VERSION: u32 = 1;

fn config_version() -> u32 {
    CONFIG_VERSION
}

fn yes() -> bool {
    true
}

fn unit_alpha() -> f64 {
    1.0
}

fn default_relative_jitter() -> f64 {
    DEFAULT_RELATIVE_JITTER
}

fn default_residual_tol() -> f64 {
    DEFAULT_RESIDUAL_TOL
}

fn default_oversampling() -> usize {
    DEFAULT_OVERSAMPLING
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "config_version")]
    pub version: u32,
    pub num_ports: usize,
    pub antennas_per_slot: usize,
    /// Values of `P` to sweep.
    pub timeslots: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub carrier_hz: f64,
    pub aperture_in_wavelengths: f64,
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    /// Reuse one plan per `(kernel, P, M, sigma^2)`; results are identical
    /// either way.
    #[serde(default = "yes")]
    pub cache_plans: bool,
    /// Fill `wall_time_stage2_ns`; left at 0 otherwise so that output is
    /// byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
    pub channel: ChannelConfig,
    pub schemes: Vec<SchemeConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub num_clusters: usize,
    pub rays_per_cluster: usize,
    pub angle_spread_deg: f64,
}

impl ChannelConfig {
    pub fn params(&self, seed: u64) -> SscModelParams {
        SscModelParams::new(self.num_clusters, self.rays_per_cluster, self.angle_spread_deg, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeConfig {
    Sbar {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        kernel: KernelSpec,
    },
    Selmmse {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    FasOmp {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        /// Defaults to `min(num_clusters, P M)`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_atoms: Option<usize>,
        #[serde(default = "default_residual_tol")]
        residual_tol: f64,
        #[serde(default = "default_oversampling")]
        oversampling: usize,
    },
}

impl SchemeConfig {
    /// Value of the `scheme` column.
    pub fn label(&self) -> String {
        match self {
            SchemeConfig::Sbar { name, .. } => name.clone().unwrap_or_else(|| "SBAR".into()),
            SchemeConfig::Selmmse { name } => name.clone().unwrap_or_else(|| "SELMMSE".into()),
            SchemeConfig::FasOmp { name, .. } => name.clone().unwrap_or_else(|| "FAS_OMP".into()),
        }
    }

    /// Value of the `kernel_kind` column.
    pub fn kernel_kind(&self) -> &'static str {
        match self {
            SchemeConfig::Sbar { kernel, .. } => kernel.label(),
            _ => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Bessel {
        #[serde(default = "unit_alpha")]
        alpha: f64,
        /// Defaults to `sqrt(lambda / (2 pi))` in `unit`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
        #[serde(default)]
        order: u32,
        #[serde(default)]
        unit: LengthUnit,
        #[serde(default = "default_relative_jitter")]
        relative_jitter: f64,
    },
    Exponential {
        #[serde(default = "unit_alpha")]
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
        #[serde(default)]
        unit: LengthUnit,
        #[serde(default = "default_relative_jitter")]
        relative_jitter: f64,
    },
    Covariance {
        training_size: usize,
        /// Training channel `t` uses seed `training_seed + t`.
        training_seed: u64,
        #[serde(default = "default_relative_jitter")]
        relative_jitter: f64,
    },
}

impl KernelSpec {
    pub fn bessel() -> Self {
        KernelSpec::Bessel {
            alpha: 1.0,
            eta: None,
            order: 0,
            unit: LengthUnit::Wavelength,
            relative_jitter: DEFAULT_RELATIVE_JITTER,
        }
    }

    pub fn exponential() -> Self {
        KernelSpec::Exponential {
            alpha: 1.0,
            eta: None,
            unit: LengthUnit::Wavelength,
            relative_jitter: DEFAULT_RELATIVE_JITTER,
        }
    }

    pub fn covariance(training_size: usize, training_seed: u64) -> Self {
        KernelSpec::Covariance {
            training_size,
            training_seed,
            relative_jitter: DEFAULT_RELATIVE_JITTER,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            KernelSpec::Bessel { .. } => "bessel",
            KernelSpec::Exponential { .. } => "exponential",
            KernelSpec::Covariance { .. } => "covariance",
        }
    }

    pub fn jitter(&self) -> Jitter {
        match *self {
            KernelSpec::Bessel { relative_jitter, .. }
            | KernelSpec::Exponential { relative_jitter, .. }
            | KernelSpec::Covariance { relative_jitter, .. } => Jitter::Relative(relative_jitter),
        }
    }
}

/// Channel seed of one evaluation trial.
pub fn trial_seed(base_seed: u64, num_timeslots: usize, snr_db: f64, trial: usize) -> u64 {
    hash_words(&[base_seed, num_timeslots as u64, snr_db.to_bits(), trial as u64])
}

impl Default for ExperimentConfig {
    /// 256 ports over 10 wavelengths at 3.5 GHz, `M = 4`, `P = 1..=10`,
    /// 20 dB, 500 trials, S-BAR with the Bessel kernel against both baselines.
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            num_ports: 256,
            antennas_per_slot: 4,
            timeslots: (1..=10).collect(),
            snr_db: vec![20.0],
            trials: 500,
            carrier_hz: 3.5e9,
            aperture_in_wavelengths: 10.0,
            base_seed: 1,
            output_path: None,
            cache_plans: true,
            record_timing: false,
            channel: ChannelConfig {
                num_clusters: 9,
                rays_per_cluster: 100,
                angle_spread_deg: 5.0,
            },
            schemes: vec![
                SchemeConfig::Sbar {
                    name: None,
                    kernel: KernelSpec::bessel(),
                },
                SchemeConfig::Selmmse { name: None },
                SchemeConfig::FasOmp {
                    name: None,
                    max_atoms: None,
                    residual_tol: DEFAULT_RESIDUAL_TOL,
                    oversampling: DEFAULT_OVERSAMPLING,
                },
            ],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn geometry(&self) -> Result<PortGeometry> {
        build_port_geometry(self.num_ports, self.aperture_in_wavelengths, self.carrier_hz)
    }

    /// Channel seeds of every evaluation trial.
    pub fn evaluation_seeds(&self) -> HashSet<u64> {
        let mut seeds = HashSet::new();
        for &p in &self.timeslots {
            for &snr in &self.snr_db {
                for t in 0..self.trials {
                    seeds.insert(trial_seed(self.base_seed, p, snr, t));
                }
            }
        }
        seeds
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.version != CONFIG_VERSION {
            return fail(format!("unsupported config version {}", self.version));
        }
        self.geometry().map_err(|e| Error::Config(e.to_string()))?;
        self.channel
            .params(0)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.antennas_per_slot == 0 {
            return fail("antennas_per_slot must be at least 1".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.timeslots.is_empty() || self.snr_db.is_empty() || self.schemes.is_empty() {
            return fail("timeslots, snr_db and schemes must be non-empty".into());
        }
        let mut seen = HashSet::new();
        for &p in &self.timeslots {
            if p == 0 || p * self.antennas_per_slot > self.num_ports {
                return fail(format!(
                    "P = {p} with M = {} does not fit {} ports",
                    self.antennas_per_slot, self.num_ports
                ));
            }
            if !seen.insert(p) {
                return fail(format!("P = {p} listed twice"));
            }
        }
        let mut seen = HashSet::new();
        for &snr in &self.snr_db {
            if !snr.is_finite() {
                return fail(format!("SNR {snr} dB is not finite"));
            }
            if !seen.insert(snr.to_bits()) {
                return fail(format!("SNR {snr} dB listed twice"));
            }
        }
        let mut labels = HashSet::new();
        let max_pm = self.timeslots.iter().min().copied().unwrap_or(0) * self.antennas_per_slot;
        for scheme in &self.schemes {
            if !labels.insert((scheme.label(), scheme.kernel_kind())) {
                return fail(format!(
                    "scheme {} with kernel {} listed twice; give one a distinct name",
                    scheme.label(),
                    scheme.kernel_kind()
                ));
            }
            match scheme {
                SchemeConfig::Sbar { kernel, .. } => self.validate_kernel(kernel)?,
                SchemeConfig::Selmmse { .. } => {}
                SchemeConfig::FasOmp {
                    max_atoms,
                    residual_tol,
                    oversampling,
                    ..
                } => {
                    if max_atoms.is_some_and(|a| a > max_pm) {
                        return fail(format!("FAS-OMP max_atoms exceeds the smallest P M = {max_pm}"));
                    }
                    if !(*residual_tol >= 0.0) {
                        return fail("FAS-OMP residual_tol must be nonnegative".into());
                    }
                    if *oversampling == 0 {
                        return fail("FAS-OMP oversampling must be at least 1".into());
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_kernel(&self, kernel: &KernelSpec) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                fail(format!("kernel {name} must be positive, got {v}"))
            }
        };
        match kernel {
            KernelSpec::Bessel {
                alpha,
                eta,
                relative_jitter,
                ..
            }
            | KernelSpec::Exponential {
                alpha,
                eta,
                relative_jitter,
                ..
            } => {
                positive("alpha", *alpha)?;
                if let Some(eta) = eta {
                    positive("eta", *eta)?;
                }
                if !(*relative_jitter >= 0.0) {
                    return fail("relative_jitter must be nonnegative".into());
                }
            }
            KernelSpec::Covariance {
                training_size,
                training_seed,
                relative_jitter,
            } => {
                if *training_size == 0 {
                    return fail("training_size must be at least 1".into());
                }
                if !(*relative_jitter >= 0.0) {
                    return fail("relative_jitter must be nonnegative".into());
                }
                self.check_training_seeds(*training_seed, *training_size)?;
            }
        }
        Ok(())
    }

    /// Rejects training seeds that coincide with an evaluation channel seed.
    pub fn check_training_seeds(&self, training_seed: u64, training_size: usize) -> Result<()> {
        let eval = self.evaluation_seeds();
        for t in 0..training_size {
            let s = training_seed.wrapping_add(t as u64);
            if eval.contains(&s) {
                return Err(Error::Config(format!(
                    "training seed {s} is also an evaluation seed"
                )));
            }
        }
        Ok(())
    }
}
