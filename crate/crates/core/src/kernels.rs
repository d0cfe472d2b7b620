//! Prior covariance matrices over the ports.
//!
//! The stationary kernels measure port distance in a configurable
//! [`LengthUnit`]. The default is wavelengths, where the customary width
//! `eta = sqrt(lambda / (2 pi))` becomes `sqrt(1 / (2 pi))` and the kernel no
//! longer depends on the carrier frequency.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bessel::bessel_j;
use crate::error::{Error, Result};
use crate::geometry::{ChannelRealization, PortGeometry};

/// Jitter added by default, relative to the mean prior variance `trace / N`.
pub const DEFAULT_RELATIVE_JITTER: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    #[default]
    Wavelength,
    Meter,
}

impl LengthUnit {
    /// Port spacing of `geom` in this unit.
    pub fn spacing(self, geom: &PortGeometry) -> f64 {
        match self {
            LengthUnit::Wavelength => geom.spacing() / geom.wavelength(),
            LengthUnit::Meter => geom.spacing(),
        }
    }

    /// `sqrt(lambda / (2 pi))` with `lambda` expressed in this unit.
    pub fn default_eta(self, geom: &PortGeometry) -> f64 {
        let lambda = match self {
            LengthUnit::Wavelength => 1.0,
            LengthUnit::Meter => geom.wavelength(),
        };
        (lambda / (2.0 * PI)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    Exponential { alpha: f64, eta: f64 },
    Bessel { alpha: f64, eta: f64, order: u32 },
    TrainedCovariance { training_size: usize },
    /// Caller-supplied matrix.
    Custom,
}

impl KernelKind {
    pub fn label(&self) -> &'static str {
        match self {
            KernelKind::Exponential { .. } => "exponential",
            KernelKind::Bessel { .. } => "bessel",
            KernelKind::TrainedCovariance { .. } => "covariance",
            KernelKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Jitter {
    /// Multiple of `trace / N` of the un-jittered matrix.
    Relative(f64),
    Absolute(f64),
}

impl Default for Jitter {
    fn default() -> Self {
        Jitter::Relative(DEFAULT_RELATIVE_JITTER)
    }
}

impl Jitter {
    fn resolve(self, matrix: &DMatrix<Complex64>) -> Result<f64> {
        let value = match self {
            Jitter::Relative(r) => r * mean_diagonal(matrix),
            Jitter::Absolute(a) => a,
        };
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::InvalidArgument(format!("jitter must be nonnegative, got {value}")));
        }
        Ok(value)
    }
}

fn mean_diagonal(matrix: &DMatrix<Complex64>) -> f64 {
    matrix.diagonal().iter().map(|v| v.re).sum::<f64>() / matrix.nrows() as f64
}

/// Hermitian prior covariance `Sigma`, stored with its jitter already added.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    matrix: DMatrix<Complex64>,
    kind: KernelKind,
    unit: LengthUnit,
    jitter: f64,
    carrier_hz: Option<f64>,
    fingerprint: String,
}

impl Kernel {
    /// Assembles a kernel from a matrix that already contains `jitter` on its
    /// diagonal. The matrix must be square and exactly Hermitian.
    pub fn from_parts(
        matrix: DMatrix<Complex64>,
        kind: KernelKind,
        unit: LengthUnit,
        jitter: f64,
        carrier_hz: Option<f64>,
    ) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "kernel must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if hermitian_deviation(&matrix) != 0.0 {
            return Err(Error::InvalidArgument("kernel matrix is not Hermitian".into()));
        }
        let fingerprint = fingerprint(&matrix, &kind, unit, jitter);
        Ok(Self {
            matrix,
            kind,
            unit,
            jitter,
            carrier_hz,
            fingerprint,
        })
    }

    /// Wraps an arbitrary Hermitian matrix, adding `jitter` to its diagonal.
    pub fn custom(matrix: DMatrix<Complex64>, jitter: Jitter) -> Result<Self> {
        let value = jitter.resolve(&matrix)?;
        let mut matrix = matrix;
        add_to_diagonal(&mut matrix, value);
        Self::from_parts(matrix, KernelKind::Custom, LengthUnit::default(), value, None)
    }

    /// Real diagonal kernel, unjittered. Handy for small hand-checked cases.
    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let diag = nalgebra::DVector::from_iterator(values.len(), values.iter().map(|&v| Complex64::new(v, 0.0)));
        Self::custom(DMatrix::from_diagonal(&diag), Jitter::Absolute(0.0))
    }

    pub fn exponential(geom: &PortGeometry, alpha: f64, eta: f64, unit: LengthUnit, jitter: Jitter) -> Result<Self> {
        check_eta(eta)?;
        let spacing = unit.spacing(geom);
        let a2 = alpha * alpha;
        let lags: Vec<f64> = (0..geom.num_ports())
            .map(|d| {
                let r = d as f64 * spacing / eta;
                a2 * (-r * r).exp()
            })
            .collect();
        Self::stationary(geom, &lags, KernelKind::Exponential { alpha, eta }, unit, jitter)
    }

    pub fn bessel(
        geom: &PortGeometry,
        alpha: f64,
        eta: f64,
        order: u32,
        unit: LengthUnit,
        jitter: Jitter,
    ) -> Result<Self> {
        check_eta(eta)?;
        let spacing = unit.spacing(geom);
        let a2 = alpha * alpha;
        let lags: Vec<f64> = (0..geom.num_ports())
            .map(|d| a2 * bessel_j(order, d as f64 * spacing / eta))
            .collect();
        Self::stationary(geom, &lags, KernelKind::Bessel { alpha, eta, order }, unit, jitter)
    }

    // Distances on a uniform grid depend only on |i - j|, which keeps the
    // matrix exactly Toeplitz and reversal-symmetric.
    fn stationary(
        geom: &PortGeometry,
        lags: &[f64],
        kind: KernelKind,
        unit: LengthUnit,
        jitter: Jitter,
    ) -> Result<Self> {
        let n = geom.num_ports();
        let mut matrix = DMatrix::from_fn(n, n, |i, j| Complex64::new(lags[i.abs_diff(j)], 0.0));
        let value = jitter.resolve(&matrix)?;
        add_to_diagonal(&mut matrix, value);
        Self::from_parts(matrix, kind, unit, value, Some(geom.carrier_hz()))
    }

    /// Sample covariance `1/T sum_t h_t h_t^H`, Hermitian-symmetrized, plus
    /// `jitter * I`.
    pub fn covariance(training: &[ChannelRealization], jitter: Jitter) -> Result<Self> {
        let first = training.first().ok_or(Error::EmptyTrainingSet)?;
        let n = first.len();
        if n == 0 {
            return Err(Error::InvalidArgument("training channels are empty".into()));
        }
        let t = training.len();
        let mut stacked = DMatrix::<Complex64>::zeros(n, t);
        for (col, h) in training.iter().enumerate() {
            if h.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "training channel length",
                    expected: n,
                    found: h.len(),
                });
            }
            stacked.set_column(col, &h.values);
        }
        let raw = &stacked * stacked.adjoint() / Complex64::new(t as f64, 0.0);
        let mut matrix = (&raw + raw.adjoint()) * Complex64::new(0.5, 0.0);
        let value = jitter.resolve(&matrix)?;
        add_to_diagonal(&mut matrix, value);
        Self::from_parts(
            matrix,
            KernelKind::TrainedCovariance { training_size: t },
            LengthUnit::default(),
            value,
            None,
        )
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// The matrix with the jitter removed from the diagonal.
    pub fn unjittered(&self) -> DMatrix<Complex64> {
        let mut m = self.matrix.clone();
        add_to_diagonal(&mut m, -self.jitter);
        m
    }

    pub fn num_ports(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn unit(&self) -> LengthUnit {
        self.unit
    }

    /// Absolute jitter on the diagonal.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn carrier_hz(&self) -> Option<f64> {
        self.carrier_hz
    }

    /// Hex digest identifying the kernel contents.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|v| v.re).sum()
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")))
    }
}

fn add_to_diagonal(matrix: &mut DMatrix<Complex64>, value: f64) {
    for i in 0..matrix.nrows() {
        matrix[(i, i)].re += value;
    }
}

fn fingerprint(matrix: &DMatrix<Complex64>, kind: &KernelKind, unit: LengthUnit, jitter: f64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"sbar-kernel-v1");
    hasher.update(serde_json::to_vec(kind).unwrap_or_default());
    hasher.update(serde_json::to_vec(&unit).unwrap_or_default());
    hasher.update(jitter.to_le_bytes());
    hasher.update((matrix.nrows() as u64).to_le_bytes());
    // nalgebra stores column-major.
    for v in matrix.iter() {
        hasher.update(v.re.to_le_bytes());
        hasher.update(v.im.to_le_bytes());
    }
    hex::encode(&hasher.finalize()[..16])
}

pub fn kernel_exponential(geom: &PortGeometry, alpha: f64, eta: f64) -> Result<Kernel> {
    Kernel::exponential(geom, alpha, eta, LengthUnit::default(), Jitter::default())
}

pub fn kernel_bessel(geom: &PortGeometry, alpha: f64, eta: f64, order: u32) -> Result<Kernel> {
    Kernel::bessel(geom, alpha, eta, order, LengthUnit::default(), Jitter::default())
}

/// Trained covariance with an absolute `jitter`.
pub fn kernel_covariance(training: &[ChannelRealization], jitter: f64) -> Result<Kernel> {
    Kernel::covariance(training, Jitter::Absolute(jitter))
}

/// Largest `|Sigma(i,j) - conj(Sigma(j,i))|`.
pub fn hermitian_deviation(matrix: &DMatrix<Complex64>) -> f64 {
    let n = matrix.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j.min(matrix.nrows() - 1) {
            worst = worst.max((matrix[(i, j)] - matrix[(j, i)].conj()).norm());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelDiagnostics {
    pub hermitian_deviation: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Condition number of `Sigma + noise_power * I`; infinite when singular.
    pub condition: f64,
}

pub fn validate_kernel(kernel: &Kernel, noise_power: f64) -> KernelDiagnostics {
    let matrix = kernel.matrix();
    let eigen = SymmetricEigen::new(matrix.clone());
    let min = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eigen.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = min + noise_power;
    let condition = if lo > 0.0 { (max + noise_power) / lo } else { f64::INFINITY };
    KernelDiagnostics {
        hermitian_deviation: hermitian_deviation(matrix),
        min_eigenvalue: min,
        max_eigenvalue: max,
        condition,
    }
}
