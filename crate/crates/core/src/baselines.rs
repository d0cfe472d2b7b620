//! Comparison estimators: equally-spaced sampling with zero-order hold, and
//! orthogonal matching pursuit over an angular steering dictionary.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{ChannelRealization, PilotObservation, PortGeometry};
use crate::rng::rng_from_seed;

/// Default dictionary oversampling: `G = 4 N` angles.
pub const DEFAULT_OVERSAMPLING: usize = 4;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-3;

/// The `PM` ports `round((k - 1/2) N / PM)`, `k = 1..PM`, returned 0-based.
pub fn selmmse_ports(num_ports: usize, num_measurements: usize) -> Result<Vec<usize>> {
    if num_measurements == 0 || num_measurements > num_ports {
        return Err(Error::PlanTooLarge {
            requested: num_measurements,
            ports: num_ports,
        });
    }
    let step = num_ports as f64 / num_measurements as f64;
    Ok((1..=num_measurements)
        .map(|k| ((k as f64 - 0.5) * step).round() as usize - 1)
        .collect())
}

/// Holds each measured value over the ports closest to it; equidistant ports
/// take the lower measured index.
pub fn estimate_selmmse(y: &PilotObservation, ports: &[usize], num_ports: usize) -> Result<ChannelRealization> {
    if y.values.len() != ports.len() {
        return Err(Error::DimensionMismatch {
            what: "pilot vector length",
            expected: ports.len(),
            found: y.values.len(),
        });
    }
    if ports.is_empty() {
        return Err(Error::InvalidArgument("no measured ports".into()));
    }
    if let Some(&bad) = ports.iter().find(|&&p| p >= num_ports) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            ports: num_ports,
        });
    }
    let mut measured: Vec<(usize, Complex64)> = ports.iter().copied().zip(y.values.iter().copied()).collect();
    measured.sort_by_key(|&(p, _)| p);

    let mut out = DVector::zeros(num_ports);
    let mut k = 0;
    for n in 0..num_ports {
        while k + 1 < measured.len() {
            let here = n.abs_diff(measured[k].0);
            let next = n.abs_diff(measured[k + 1].0);
            if next < here {
                k += 1;
            } else {
                break;
            }
        }
        out[n] = measured[k].1;
    }
    Ok(ChannelRealization::external(out))
}

/// `PM` distinct ports drawn uniformly without replacement, sorted.
pub fn random_ports(num_ports: usize, num_measurements: usize, seed: u64) -> Result<Vec<usize>> {
    if num_measurements > num_ports {
        return Err(Error::PlanTooLarge {
            requested: num_measurements,
            ports: num_ports,
        });
    }
    let mut rng = rng_from_seed(seed);
    let mut ports = rand::seq::index::sample(&mut rng, num_ports, num_measurements).into_vec();
    ports.sort_unstable();
    Ok(ports)
}

/// Columns `a(u_g)` with `a_n(u) = exp(-j 2 pi x_n u / lambda)` over a grid
/// of `G` sines `u_g = -1 + 2 g / G`.
#[derive(Debug, Clone)]
pub struct SteeringDictionary {
    matrix: DMatrix<Complex64>,
    grid: Vec<f64>,
}

impl SteeringDictionary {
    pub fn new(geom: &PortGeometry, oversampling: usize) -> Result<Self> {
        if oversampling == 0 {
            return Err(Error::InvalidArgument("oversampling must be positive".into()));
        }
        let g = oversampling * geom.num_ports();
        let grid: Vec<f64> = (0..g).map(|i| -1.0 + 2.0 * i as f64 / g as f64).collect();
        let lambda = geom.wavelength();
        let positions = geom.positions();
        let matrix = DMatrix::from_fn(geom.num_ports(), g, |n, col| {
            Complex64::from_polar(1.0, -2.0 * PI * positions[n] * grid[col] / lambda)
        });
        Ok(Self { matrix, grid })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn num_atoms(&self) -> usize {
        self.grid.len()
    }

    pub fn atom(&self, g: usize) -> DVector<Complex64> {
        self.matrix.column(g).into_owned()
    }
}

#[derive(Debug, Clone)]
pub struct OmpResult {
    pub estimate: ChannelRealization,
    /// Selected dictionary columns, in selection order.
    pub support: Vec<usize>,
    pub coefficients: DVector<Complex64>,
    /// Residual norm before the first iteration and after each one.
    pub residual_norms: Vec<f64>,
    /// Set when a candidate atom made the refit rank deficient.
    pub rank_deficient: bool,
}

/// Orthogonal matching pursuit on the dictionary rows at `ports`.
pub fn estimate_fas_omp(
    y: &PilotObservation,
    ports: &[usize],
    dict: &SteeringDictionary,
    max_atoms: usize,
    residual_tol: f64,
) -> Result<OmpResult> {
    if y.values.len() != ports.len() {
        return Err(Error::DimensionMismatch {
            what: "pilot vector length",
            expected: ports.len(),
            found: y.values.len(),
        });
    }
    if max_atoms > ports.len() {
        return Err(Error::InvalidArgument(format!(
            "max_atoms {max_atoms} exceeds the {} measurements",
            ports.len()
        )));
    }
    let n = dict.matrix().nrows();
    if let Some(&bad) = ports.iter().find(|&&p| p >= n) {
        return Err(Error::IndexOutOfRange { index: bad, ports: n });
    }
    let sub = dict.matrix().select_rows(ports);
    let y = &y.values;
    let y_norm = y.norm();
    let mut residual = y.clone();
    let mut residual_norms = vec![y_norm];
    let mut support: Vec<usize> = Vec::new();
    let mut coefficients = DVector::zeros(0);
    let mut rank_deficient = false;

    while support.len() < max_atoms && residual.norm() > residual_tol * y_norm {
        let corr = sub.ad_mul(&residual);
        let mut best: Option<(usize, f64)> = None;
        for (g, c) in corr.iter().enumerate() {
            if support.contains(&g) {
                continue;
            }
            let mag = c.norm();
            if best.is_none_or(|(_, b)| mag > b) {
                best = Some((g, mag));
            }
        }
        let Some((g, _)) = best else { break };
        support.push(g);
        match least_squares(&sub.select_columns(&support), y) {
            Some(x) => {
                residual = y - sub.select_columns(&support) * &x;
                coefficients = x;
                residual_norms.push(residual.norm());
            }
            None => {
                support.pop();
                rank_deficient = true;
                break;
            }
        }
    }

    let estimate = if support.is_empty() {
        DVector::zeros(n)
    } else {
        dict.matrix().select_columns(&support) * &coefficients
    };
    Ok(OmpResult {
        estimate: ChannelRealization::external(estimate),
        support,
        coefficients,
        residual_norms,
        rank_deficient,
    })
}

/// `argmin ||a x - b||` by QR; `None` when `a` is numerically rank deficient.
fn least_squares(a: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Option<DVector<Complex64>> {
    let qr = a.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = r.diagonal().iter().map(|v| v.norm()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    if max == 0.0 || diag.iter().any(|&d| d < 1e-8 * max) {
        return None;
    }
    let qtb = qr.q().ad_mul(b);
    r.solve_upper_triangular(&qtb)
}
