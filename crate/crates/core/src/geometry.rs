//! Port geometry, synthetic channels and pilot observations.
//!
//! Port indices are 0-based throughout the Rust API. Files and the CLI use
//! 1-based indices.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{complex_gaussian, rng_for_stream, rng_from_seed};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `N` ports spread uniformly over a linear aperture `[0, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PortGeometry {
    num_ports: usize,
    aperture_in_wavelengths: f64,
    carrier_hz: f64,
    wavelength: f64,
    positions: Vec<f64>,
}

impl PortGeometry {
    pub fn new(num_ports: usize, aperture_in_wavelengths: f64, carrier_hz: f64) -> Result<Self> {
        if num_ports < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 ports, got {num_ports}"
            )));
        }
        if !(aperture_in_wavelengths > 0.0 && aperture_in_wavelengths.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "aperture must be positive, got {aperture_in_wavelengths}"
            )));
        }
        if !(carrier_hz > 0.0 && carrier_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "carrier must be positive, got {carrier_hz}"
            )));
        }
        let wavelength = SPEED_OF_LIGHT / carrier_hz;
        let aperture = aperture_in_wavelengths * wavelength;
        let last = (num_ports - 1) as f64;
        let positions = (0..num_ports)
            .map(|n| {
                if n == num_ports - 1 {
                    aperture
                } else {
                    n as f64 * aperture / last
                }
            })
            .collect();
        Ok(Self {
            num_ports,
            aperture_in_wavelengths,
            carrier_hz,
            wavelength,
            positions,
        })
    }

    pub fn num_ports(&self) -> usize {
        self.num_ports
    }

    pub fn aperture_in_wavelengths(&self) -> f64 {
        self.aperture_in_wavelengths
    }

    /// Aperture length in meters.
    pub fn aperture(&self) -> f64 {
        self.aperture_in_wavelengths * self.wavelength
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    /// Carrier wavelength in meters.
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Port positions in meters.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Distance between neighbouring ports, in meters.
    pub fn spacing(&self) -> f64 {
        self.aperture() / (self.num_ports - 1) as f64
    }
}

pub fn build_port_geometry(
    num_ports: usize,
    aperture_in_wavelengths: f64,
    carrier_hz: f64,
) -> Result<PortGeometry> {
    PortGeometry::new(num_ports, aperture_in_wavelengths, carrier_hz)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ChannelModel {
    Ssc,
    External,
}

/// One channel vector `h` over all ports.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub values: DVector<Complex64>,
    pub model: ChannelModel,
}

impl ChannelRealization {
    pub fn external(values: DVector<Complex64>) -> Self {
        Self {
            values,
            model: ChannelModel::External,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn power(&self) -> f64 {
        self.values.norm_squared()
    }
}

/// Spatially-sparse clustered channel parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SscModelParams {
    pub num_clusters: usize,
    pub rays_per_cluster: usize,
    pub angle_spread_deg: f64,
    pub rng_seed: u64,
}

impl SscModelParams {
    /// Cluster centres are drawn uniformly from this open interval, in degrees.
    pub const CENTER_SUPPORT_DEG: f64 = 60.0;

    pub fn new(num_clusters: usize, rays_per_cluster: usize, angle_spread_deg: f64, rng_seed: u64) -> Self {
        Self {
            num_clusters,
            rays_per_cluster,
            angle_spread_deg,
            rng_seed,
        }
    }

    pub fn with_seed(self, rng_seed: u64) -> Self {
        Self { rng_seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_clusters == 0 || self.rays_per_cluster == 0 {
            return Err(Error::InvalidArgument(
                "SSC model needs at least one cluster and one ray".into(),
            ));
        }
        if !(0.0..90.0).contains(&self.angle_spread_deg) {
            return Err(Error::InvalidArgument(format!(
                "angle spread must lie in [0, 90) degrees, got {}",
                self.angle_spread_deg
            )));
        }
        Ok(())
    }

    /// Draws the `C * R` rays of one realization.
    pub fn draw_rays(&self) -> Result<Vec<Ray>> {
        self.validate()?;
        let mut rng = rng_from_seed(self.rng_seed);
        let support = Self::CENTER_SUPPORT_DEG.to_radians();
        let spread = self.angle_spread_deg.to_radians();
        let mut rays = Vec::with_capacity(self.num_clusters * self.rays_per_cluster);
        for _ in 0..self.num_clusters {
            let center = loop {
                let c = rng.random_range(-support..support);
                if c != -support {
                    break c;
                }
            };
            for _ in 0..self.rays_per_cluster {
                let offset = if spread > 0.0 {
                    rng.random_range(-spread..=spread)
                } else {
                    0.0
                };
                let gain = complex_gaussian(&mut rng, 1.0);
                rays.push(Ray {
                    gain,
                    angle: center + offset,
                });
            }
        }
        Ok(rays)
    }
}

/// A single plane-wave path; `angle` in radians from broadside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub gain: Complex64,
    pub angle: f64,
}

/// Superposes `rays` over the ports and scales by `1/sqrt(rays.len())`, so
/// that with unit-variance gains each port has unit average power.
pub fn synthesize_channel(geom: &PortGeometry, rays: &[Ray]) -> ChannelRealization {
    let n = geom.num_ports();
    let mut h = DVector::<Complex64>::zeros(n);
    if rays.is_empty() {
        return ChannelRealization {
            values: h,
            model: ChannelModel::Ssc,
        };
    }
    let spacing_in_wavelengths = geom.spacing() / geom.wavelength();
    for ray in rays {
        // Uniform spacing lets the steering phase advance by a fixed rotation.
        let step = Complex64::from_polar(1.0, -2.0 * PI * spacing_in_wavelengths * ray.angle.sin());
        let mut phasor = ray.gain;
        for (i, v) in h.iter_mut().enumerate() {
            if i % 64 == 0 {
                let phase = -2.0 * PI * i as f64 * spacing_in_wavelengths * ray.angle.sin();
                phasor = ray.gain * Complex64::from_polar(1.0, phase);
            }
            *v += phasor;
            phasor *= step;
        }
    }
    let scale = 1.0 / (rays.len() as f64).sqrt();
    h.iter_mut().for_each(|v| *v *= scale);
    ChannelRealization {
        values: h,
        model: ChannelModel::Ssc,
    }
}

pub fn generate_ssc_channel(geom: &PortGeometry, params: &SscModelParams) -> Result<ChannelRealization> {
    let rays = params.draw_rays()?;
    Ok(synthesize_channel(geom, &rays))
}

/// Antenna-to-port assignment for one timeslot. Entry `m` is the port of
/// antenna `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchMatrix {
    ports: Vec<usize>,
}

impl SwitchMatrix {
    pub fn new(ports: Vec<usize>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(ports.len());
        for &p in &ports {
            if !seen.insert(p) {
                return Err(Error::DuplicateIndex(p));
            }
        }
        Ok(Self { ports })
    }

    pub fn ports(&self) -> &[usize] {
        &self.ports
    }

    pub fn num_antennas(&self) -> usize {
        self.ports.len()
    }

    /// Dense 0/1 form with `num_ports` columns.
    pub fn to_dense(&self, num_ports: usize) -> Result<Vec<Vec<u8>>> {
        stacked_dense(std::slice::from_ref(self), num_ports)
    }
}

/// Stacks switch matrices row-wise into one dense 0/1 matrix.
pub fn stacked_dense(slots: &[SwitchMatrix], num_ports: usize) -> Result<Vec<Vec<u8>>> {
    let mut rows = Vec::new();
    for slot in slots {
        for &p in slot.ports() {
            if p >= num_ports {
                return Err(Error::IndexOutOfRange {
                    index: p,
                    ports: num_ports,
                });
            }
            let mut row = vec![0u8; num_ports];
            row[p] = 1;
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Checks the row/column constraints of a stacked 0/1 switch matrix and that
/// `S * S^H` is exactly the identity, in integer arithmetic.
pub fn is_valid_switch(rows: &[Vec<u8>]) -> bool {
    let Some(width) = rows.first().map(Vec::len) else {
        return true;
    };
    if rows.iter().any(|r| r.len() != width) {
        return false;
    }
    if rows.iter().any(|r| r.iter().map(|&v| u32::from(v)).sum::<u32>() != 1) {
        return false;
    }
    for col in 0..width {
        if rows.iter().map(|r| u32::from(r[col])).sum::<u32>() > 1 {
            return false;
        }
    }
    for (i, a) in rows.iter().enumerate() {
        for (j, b) in rows.iter().enumerate() {
            let dot: u32 = a.iter().zip(b).map(|(&x, &y)| u32::from(x) * u32::from(y)).sum();
            if dot != u32::from(i == j) {
                return false;
            }
        }
    }
    true
}

/// Noisy pilots `y = S h + z`, bound to the measurement set that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    pub values: DVector<Complex64>,
    pub noise_power: f64,
    pub plan_id: String,
}

/// Observes `h` at `ports` with per-port noise.
///
/// The noise at a port depends only on `(rng_seed, port)`, so two measurement
/// sets that share a port see the same noise sample there.
pub fn observe_ports(
    h: &ChannelRealization,
    ports: &[usize],
    noise_power: f64,
    rng_seed: u64,
    plan_id: impl Into<String>,
) -> Result<PilotObservation> {
    if !(noise_power >= 0.0 && noise_power.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise power must be nonnegative, got {noise_power}"
        )));
    }
    let n = h.len();
    let values = ports
        .iter()
        .map(|&p| {
            if p >= n {
                return Err(Error::DimensionMismatch {
                    what: "observed port index",
                    expected: n,
                    found: p,
                });
            }
            let clean = h.values[p];
            Ok(if noise_power == 0.0 {
                clean
            } else {
                clean + complex_gaussian(&mut rng_for_stream(rng_seed, p as u64), noise_power)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PilotObservation {
        values: DVector::from_vec(values),
        noise_power,
        plan_id: plan_id.into(),
    })
}

/// `sigma^2 = E||h||^2 / 10^(snr/10)`.
pub fn noise_power_for_snr(h_ensemble_power: f64, snr_db: f64) -> Result<f64> {
    if !(h_ensemble_power > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ensemble power must be positive, got {h_ensemble_power}"
        )));
    }
    Ok(h_ensemble_power / 10f64.powf(snr_db / 10.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_sweep_geometry() {
        let g = build_port_geometry(256, 10.0, 3.5e9).unwrap();
        assert_eq!(g.positions().len(), 256);
        assert_relative_eq!(g.wavelength(), 0.085655, epsilon = 1e-5);
        assert_relative_eq!(g.spacing(), 10.0 * g.wavelength() / 255.0, max_relative = 1e-12);
        assert_eq!(g.positions()[0], 0.0);
        assert_eq!(g.positions()[255], g.aperture());
        for w in g.positions().windows(2) {
            assert!(w[1] > w[0]);
            assert_relative_eq!(w[1] - w[0], g.spacing(), max_relative = 1e-12);
        }
    }

    #[test]
    fn two_port_geometry_is_endpoints() {
        let g = build_port_geometry(2, 1.0, 3.5e9).unwrap();
        assert_eq!(g.positions(), &[0.0, g.wavelength()]);
    }

    #[test]
    fn five_ports_two_wavelengths() {
        let g = build_port_geometry(5, 2.0, 1e9).unwrap();
        assert_relative_eq!(g.spacing(), 0.149_896_229, epsilon = 1e-8);
        assert_relative_eq!(g.spacing(), 0.5 * g.wavelength(), max_relative = 1e-14);
    }

    #[test]
    fn geometry_rejects_bad_arguments() {
        assert!(matches!(build_port_geometry(1, 1.0, 1e9), Err(Error::InvalidArgument(_))));
        assert!(build_port_geometry(4, 0.0, 1e9).is_err());
        assert!(build_port_geometry(4, 1.0, -1.0).is_err());
        assert!(build_port_geometry(4, f64::NAN, 1e9).is_err());
    }

    #[test]
    fn broadside_ray_gives_constant_channel() {
        let g = build_port_geometry(16, 4.0, 3.5e9).unwrap();
        let h = synthesize_channel(
            &g,
            &[Ray {
                gain: Complex64::new(1.0, 0.0),
                angle: 0.0,
            }],
        );
        for v in h.values.iter() {
            assert_eq!(*v, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn single_ray_matches_direct_steering_phase() {
        let g = build_port_geometry(300, 10.0, 3.5e9).unwrap();
        let ray = Ray {
            gain: Complex64::new(0.3, -1.1),
            angle: 0.7,
        };
        let h = synthesize_channel(&g, &[ray]);
        for (n, x) in g.positions().iter().enumerate() {
            let expect = ray.gain * Complex64::from_polar(1.0, -2.0 * PI * x * ray.angle.sin() / g.wavelength());
            assert!((h.values[n] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn ssc_is_deterministic() {
        let g = build_port_geometry(64, 10.0, 3.5e9).unwrap();
        let p = SscModelParams::new(9, 100, 5.0, 42);
        let a = generate_ssc_channel(&g, &p).unwrap();
        let b = generate_ssc_channel(&g, &p).unwrap();
        assert_eq!(a, b);
        let c = generate_ssc_channel(&g, &p.with_seed(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ssc_rejects_bad_params() {
        let g = build_port_geometry(8, 1.0, 1e9).unwrap();
        assert!(generate_ssc_channel(&g, &SscModelParams::new(0, 1, 5.0, 0)).is_err());
        assert!(generate_ssc_channel(&g, &SscModelParams::new(1, 0, 5.0, 0)).is_err());
        assert!(generate_ssc_channel(&g, &SscModelParams::new(1, 1, 90.0, 0)).is_err());
        assert!(generate_ssc_channel(&g, &SscModelParams::new(1, 1, -1.0, 0)).is_err());
    }

    #[test]
    fn ray_angles_respect_support() {
        let p = SscModelParams::new(50, 20, 5.0, 9);
        let max = (60.0f64 + 5.0).to_radians();
        let rays = p.draw_rays().unwrap();
        assert_eq!(rays.len(), 1000);
        assert!(rays.iter().all(|r| r.angle.abs() <= max));
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let h = ChannelRealization::external(DVector::from_element(4, Complex64::new(1.0, 0.0)));
        let y = observe_ports(&h, &[0, 1], 0.0, 3, "p").unwrap();
        assert_eq!(y.values.as_slice(), &[Complex64::new(1.0, 0.0); 2]);
        assert!(observe_ports(&h, &[4], 0.0, 3, "p").is_err());
        assert!(observe_ports(&h, &[0], -1.0, 3, "p").is_err());
    }

    #[test]
    fn noise_variance_monte_carlo() {
        let n = 100_000;
        let h = ChannelRealization::external(DVector::zeros(n));
        let ports: Vec<usize> = (0..n).collect();
        let y = observe_ports(&h, &ports, 0.01, 5, "p").unwrap();
        let mean = y.values.iter().sum::<Complex64>() / n as f64;
        let var = y.values.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n - 1) as f64;
        assert!((var - 0.01).abs() < 0.05 * 0.01, "variance {var}");
    }

    #[test]
    fn noise_is_shared_per_port() {
        let h = ChannelRealization::external(DVector::zeros(10));
        let a = observe_ports(&h, &[3, 7], 1.0, 99, "a").unwrap();
        let b = observe_ports(&h, &[7, 1, 3], 1.0, 99, "b").unwrap();
        assert_eq!(a.values[0], b.values[2]);
        assert_eq!(a.values[1], b.values[0]);
    }

    #[test]
    fn snr_to_noise_power() {
        assert_relative_eq!(noise_power_for_snr(256.0, 20.0).unwrap(), 2.56, max_relative = 1e-14);
        assert_relative_eq!(noise_power_for_snr(1.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(noise_power_for_snr(256.0, 10.0).unwrap(), 25.6, max_relative = 1e-14);
        assert!(noise_power_for_snr(0.0, 10.0).is_err());
    }

    #[test]
    fn switch_matrix_checks() {
        assert!(matches!(SwitchMatrix::new(vec![1, 1]), Err(Error::DuplicateIndex(1))));
        let s = SwitchMatrix::new(vec![2, 0]).unwrap();
        let dense = s.to_dense(3).unwrap();
        assert_eq!(dense, vec![vec![0, 0, 1], vec![1, 0, 0]]);
        assert!(is_valid_switch(&dense));
        assert!(!is_valid_switch(&[vec![1, 0], vec![1, 0]]));
        assert!(!is_valid_switch(&[vec![1, 1]]));
        assert!(s.to_dense(2).is_err());
    }
}
