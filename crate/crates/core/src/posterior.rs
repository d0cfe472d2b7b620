//! Posterior covariance of the port channels given a growing measurement set.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernels::Kernel;

/// Smallest admissible `v + sigma^2`, relative to `trace(Sigma) / N`.
pub const DENOMINATOR_FLOOR: f64 = 1e-14;

/// Variances within this distance of the maximum, relative to
/// `trace(Sigma) / N`, count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Posterior `Sigma_Omega` after conditioning the prior on noisy
/// measurements at the ports in `measured`.
#[derive(Debug, Clone)]
pub struct PosteriorState<'k> {
    prior: &'k Kernel,
    measured: Vec<usize>,
    is_measured: Vec<bool>,
    post_cov: DMatrix<Complex64>,
    noise_power: f64,
}

impl<'k> PosteriorState<'k> {
    pub fn new(prior: &'k Kernel, noise_power: f64) -> Result<Self> {
        if !(noise_power >= 0.0 && noise_power.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise power must be nonnegative, got {noise_power}"
            )));
        }
        let n = prior.num_ports();
        Ok(Self {
            prior,
            measured: Vec::new(),
            is_measured: vec![false; n],
            post_cov: prior.matrix().clone(),
            noise_power,
        })
    }

    pub fn prior(&self) -> &'k Kernel {
        self.prior
    }

    pub fn measured(&self) -> &[usize] {
        &self.measured
    }

    pub fn post_cov(&self) -> &DMatrix<Complex64> {
        &self.post_cov
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn variance(&self) -> Vec<f64> {
        self.post_cov.diagonal().iter().map(|v| v.re).collect()
    }

    /// Unmeasured port with the largest posterior variance; ties, up to
    /// [`TIE_TOLERANCE`], go to the smallest index.
    pub fn next_candidate(&self) -> Option<usize> {
        let n = self.post_cov.nrows();
        let mut unmeasured = (0..n).filter(|&i| !self.is_measured[i]);
        let max = unmeasured
            .clone()
            .map(|i| self.post_cov[(i, i)].re)
            .fold(f64::NEG_INFINITY, f64::max);
        let tol = TIE_TOLERANCE * self.prior.trace() / n as f64;
        unmeasured.find(|&i| self.post_cov[(i, i)].re >= max - tol)
    }

    /// Conditions on one more measurement at `port`:
    /// `Sigma <- Sigma - c c^H / (v + sigma^2)` with `c = Sigma(:, port)`.
    pub fn update(&mut self, port: usize) -> Result<()> {
        let n = self.post_cov.nrows();
        if port >= n {
            return Err(Error::IndexOutOfRange { index: port, ports: n });
        }
        if self.is_measured[port] {
            return Err(Error::IndexAlreadyMeasured(port));
        }
        let denom = self.post_cov[(port, port)].re + self.noise_power;
        let floor = DENOMINATOR_FLOOR * self.prior.trace() / n as f64;
        if !(denom > floor) {
            return Err(Error::NonPositiveDenominator { port, value: denom });
        }
        let c: Vec<Complex64> = self.post_cov.column(port).iter().copied().collect();
        let inv = 1.0 / denom;
        for j in 0..n {
            let cj = c[j].conj() * inv;
            if cj == Complex64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..j {
                let v = self.post_cov[(i, j)] - c[i] * cj;
                self.post_cov[(i, j)] = v;
                self.post_cov[(j, i)] = v.conj();
            }
            let d = self.post_cov[(j, j)].re - c[j].norm_sqr() * inv;
            self.post_cov[(j, j)] = Complex64::new(d, 0.0);
        }
        self.measured.push(port);
        self.is_measured[port] = true;
        Ok(())
    }
}

pub fn posterior_update_one<'k>(state: PosteriorState<'k>, n_star: usize) -> Result<PosteriorState<'k>> {
    let mut state = state;
    state.update(n_star)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_noiseless() {
        let k = Kernel::diagonal(&[1.0, 1.0, 1.0]).unwrap();
        let s = posterior_update_one(PosteriorState::new(&k, 0.0).unwrap(), 0).unwrap();
        assert_eq!(s.variance(), vec![0.0, 1.0, 1.0]);
        assert_eq!(s.measured(), &[0]);
    }

    #[test]
    fn diagonal_with_noise() {
        let k = Kernel::diagonal(&[1.0, 2.0, 3.0]).unwrap();
        let s = posterior_update_one(PosteriorState::new(&k, 1.0).unwrap(), 2).unwrap();
        assert_eq!(s.variance(), vec![1.0, 2.0, 0.75]);
    }

    #[test]
    fn candidate_prefers_largest_then_smallest_index() {
        let k = Kernel::diagonal(&[1.0, 3.0, 3.0, 2.0]).unwrap();
        let mut s = PosteriorState::new(&k, 0.5).unwrap();
        assert_eq!(s.next_candidate(), Some(1));
        s.update(1).unwrap();
        assert_eq!(s.next_candidate(), Some(2));
    }

    #[test]
    fn rounding_level_differences_are_ties() {
        let k = Kernel::diagonal(&[1.0, 1.0 + 1e-15, 1.0]).unwrap();
        let s = PosteriorState::new(&k, 0.0).unwrap();
        assert_eq!(s.next_candidate(), Some(0));
        let k = Kernel::diagonal(&[1.0, 1.0 + 1e-9, 1.0]).unwrap();
        let s = PosteriorState::new(&k, 0.0).unwrap();
        assert_eq!(s.next_candidate(), Some(1));
    }

    #[test]
    fn rejects_repeat_and_degenerate() {
        let k = Kernel::diagonal(&[1.0, 1.0]).unwrap();
        let mut s = PosteriorState::new(&k, 0.0).unwrap();
        s.update(0).unwrap();
        assert!(matches!(s.update(0), Err(Error::IndexAlreadyMeasured(0))));
        assert!(matches!(s.update(5), Err(Error::IndexOutOfRange { .. })));

        let z = Kernel::diagonal(&[1.0, 0.0]).unwrap();
        let mut s = PosteriorState::new(&z, 0.0).unwrap();
        assert!(matches!(s.update(1), Err(Error::NonPositiveDenominator { port: 1, .. })));
    }

    #[test]
    fn exhausts_candidates() {
        let k = Kernel::diagonal(&[1.0, 1.0]).unwrap();
        let mut s = PosteriorState::new(&k, 0.1).unwrap();
        s.update(0).unwrap();
        s.update(1).unwrap();
        assert_eq!(s.next_candidate(), None);
    }
}
