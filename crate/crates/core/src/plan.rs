//! Offline plan design and online reconstruction.
//!
//! Stage 1 ([`design_plan`]) picks `P * M` ports greedily by largest posterior
//! variance, groups them into per-timeslot switch matrices and solves for the
//! linear MAP weights. Stage 2 ([`reconstruct`]) applies those weights to the
//! received pilots and never touches the kernel.

use std::collections::HashSet;

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{observe_ports, stacked_dense, ChannelRealization, PilotObservation, SwitchMatrix};
use crate::kernels::Kernel;
use crate::posterior::PosteriorState;

/// Output of the offline stage: where to measure and how to combine.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    num_ports: usize,
    num_timeslots: usize,
    antennas_per_slot: usize,
    order: Vec<usize>,
    switch_matrices: Vec<SwitchMatrix>,
    /// `PM x N`; the estimate is `weights^H y`.
    weights: DMatrix<Complex64>,
    posterior_variance: Vec<f64>,
    noise_power: f64,
    kernel_fingerprint: String,
    id: String,
}

impl SamplingPlan {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        num_ports: usize,
        num_timeslots: usize,
        antennas_per_slot: usize,
        order: Vec<usize>,
        weights: DMatrix<Complex64>,
        posterior_variance: Vec<f64>,
        noise_power: f64,
        kernel_fingerprint: String,
    ) -> Result<Self> {
        let pm = num_timeslots * antennas_per_slot;
        if let Some(&bad) = order.iter().find(|&&p| p >= num_ports) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                ports: num_ports,
            });
        }
        let switch_matrices = plan_to_switch_matrices(&order, num_timeslots, antennas_per_slot)?;
        if weights.nrows() != pm || weights.ncols() != num_ports {
            return Err(Error::DimensionMismatch {
                what: "weight matrix entries",
                expected: pm * num_ports,
                found: weights.nrows() * weights.ncols(),
            });
        }
        if posterior_variance.len() != num_ports {
            return Err(Error::DimensionMismatch {
                what: "posterior variance length",
                expected: num_ports,
                found: posterior_variance.len(),
            });
        }
        if !(noise_power >= 0.0 && noise_power.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise power must be nonnegative, got {noise_power}"
            )));
        }
        let id = plan_id(
            num_ports,
            num_timeslots,
            antennas_per_slot,
            &order,
            &weights,
            noise_power,
            &kernel_fingerprint,
        );
        Ok(Self {
            num_ports,
            num_timeslots,
            antennas_per_slot,
            order,
            switch_matrices,
            weights,
            posterior_variance,
            noise_power,
            kernel_fingerprint,
            id,
        })
    }

    pub fn num_ports(&self) -> usize {
        self.num_ports
    }

    pub fn num_timeslots(&self) -> usize {
        self.num_timeslots
    }

    pub fn antennas_per_slot(&self) -> usize {
        self.antennas_per_slot
    }

    pub fn num_measurements(&self) -> usize {
        self.order.len()
    }

    /// Measured ports in selection order (0-based).
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn switch_matrices(&self) -> &[SwitchMatrix] {
        &self.switch_matrices
    }

    /// The stacked `PM x N` 0/1 switch matrix.
    pub fn stacked_switch(&self) -> Vec<Vec<u8>> {
        stacked_dense(&self.switch_matrices, self.num_ports).expect("plan ports are in range")
    }

    pub fn weights(&self) -> &DMatrix<Complex64> {
        &self.weights
    }

    /// Diagonal of the design-time posterior covariance.
    pub fn posterior_variance(&self) -> &[f64] {
        &self.posterior_variance
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn kernel_fingerprint(&self) -> &str {
        &self.kernel_fingerprint
    }

    /// Digest binding observations to this plan.
    pub fn id(&self) -> &str {
        &self.id
    }
}

fn plan_id(
    num_ports: usize,
    num_timeslots: usize,
    antennas_per_slot: usize,
    order: &[usize],
    weights: &DMatrix<Complex64>,
    noise_power: f64,
    kernel_fingerprint: &str,
) -> String {
    let mut h = Sha256::new();
    h.update(b"sbar-plan-v1");
    for v in [num_ports, num_timeslots, antennas_per_slot] {
        h.update((v as u64).to_le_bytes());
    }
    for &p in order {
        h.update((p as u64).to_le_bytes());
    }
    h.update(noise_power.to_le_bytes());
    h.update(kernel_fingerprint.as_bytes());
    for w in weights.iter() {
        h.update(w.re.to_le_bytes());
        h.update(w.im.to_le_bytes());
    }
    hex::encode(&h.finalize()[..16])
}

/// Splits a selection order into `P` slots of `M` antennas each.
pub fn plan_to_switch_matrices(order: &[usize], num_timeslots: usize, antennas_per_slot: usize) -> Result<Vec<SwitchMatrix>> {
    let pm = num_timeslots * antennas_per_slot;
    if order.len() != pm {
        return Err(Error::DimensionMismatch {
            what: "selection order length",
            expected: pm,
            found: order.len(),
        });
    }
    check_distinct(order)?;
    if antennas_per_slot == 0 {
        return Ok(vec![SwitchMatrix::new(Vec::new())?; num_timeslots]);
    }
    order
        .chunks(antennas_per_slot)
        .map(|slot| SwitchMatrix::new(slot.to_vec()))
        .collect()
}

fn check_distinct(order: &[usize]) -> Result<()> {
    let mut seen = HashSet::with_capacity(order.len());
    for &p in order {
        if !seen.insert(p) {
            return Err(Error::DuplicateIndex(p));
        }
    }
    Ok(())
}

/// Weights `w = (Sigma(O,O) + sigma^2 I)^-1 Sigma(O,:)`, by Cholesky.
pub fn compute_weights(kernel: &Kernel, order: &[usize], noise_power: f64) -> Result<DMatrix<Complex64>> {
    check_distinct(order)?;
    let n = kernel.num_ports();
    if let Some(&bad) = order.iter().find(|&&p| p >= n) {
        return Err(Error::IndexOutOfRange { index: bad, ports: n });
    }
    let sigma = kernel.matrix();
    let k = order.len();
    let gram = DMatrix::from_fn(k, k, |i, j| {
        let v = sigma[(order[i], order[j])];
        if i == j {
            v + Complex64::new(noise_power, 0.0)
        } else {
            v
        }
    });
    let rhs = sigma.select_rows(order);
    let chol = Cholesky::new(gram).ok_or_else(|| {
        Error::SingularSystem(format!(
            "Sigma(O,O) + {noise_power} I is not positive definite for {k} measurements; raise the kernel jitter"
        ))
    })?;
    Ok(chol.solve(&rhs))
}

/// One greedy step, as reported to a [`design_plan_with`] observer.
#[derive(Debug)]
pub struct DesignStep<'a> {
    pub iteration: usize,
    pub selected: usize,
    pub variance_before: &'a [f64],
    pub variance_after: &'a [f64],
}

pub fn design_plan(kernel: &Kernel, num_timeslots: usize, antennas_per_slot: usize, noise_power: f64) -> Result<SamplingPlan> {
    design_plan_with(kernel, num_timeslots, antennas_per_slot, noise_power, |_| {})
}

/// [`design_plan`] that reports each greedy step to `observer`.
pub fn design_plan_with<F>(
    kernel: &Kernel,
    num_timeslots: usize,
    antennas_per_slot: usize,
    noise_power: f64,
    mut observer: F,
) -> Result<SamplingPlan>
where
    F: FnMut(&DesignStep<'_>),
{
    if num_timeslots == 0 || antennas_per_slot == 0 {
        return Err(Error::InvalidArgument(
            "need at least one timeslot and one antenna".into(),
        ));
    }
    let n = kernel.num_ports();
    let pm = num_timeslots * antennas_per_slot;
    if pm > n {
        return Err(Error::PlanTooLarge { requested: pm, ports: n });
    }
    let mut state = PosteriorState::new(kernel, noise_power)?;
    let mut before = state.variance();
    for iteration in 0..pm {
        let selected = state.next_candidate().expect("pm <= n leaves a candidate");
        state.update(selected)?;
        let after = state.variance();
        observer(&DesignStep {
            iteration,
            selected,
            variance_before: &before,
            variance_after: &after,
        });
        before = after;
    }
    let order = state.measured().to_vec();
    let weights = compute_weights(kernel, &order, noise_power)?;
    SamplingPlan::from_parts(
        n,
        num_timeslots,
        antennas_per_slot,
        order,
        weights,
        before,
        noise_power,
        kernel.fingerprint().to_owned(),
    )
}

/// Measures `h` through the plan's switch matrices (pilot symbol 1).
pub fn observe_pilots(h: &ChannelRealization, plan: &SamplingPlan, noise_power: f64, rng_seed: u64) -> Result<PilotObservation> {
    if h.len() != plan.num_ports() {
        return Err(Error::DimensionMismatch {
            what: "channel length",
            expected: plan.num_ports(),
            found: h.len(),
        });
    }
    observe_ports(h, plan.order(), noise_power, rng_seed, plan.id())
}

/// Binds raw pilot samples to `plan`, for callers that received them from
/// hardware rather than [`observe_pilots`].
pub fn bind_observation(plan: &SamplingPlan, values: DVector<Complex64>, noise_power: f64) -> PilotObservation {
    PilotObservation {
        values,
        noise_power,
        plan_id: plan.id().to_owned(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    /// Posterior mean, the channel estimate.
    pub estimate: DVector<Complex64>,
    pub post_variance: Vec<f64>,
    /// `estimate - 3 * variance` on real and imaginary parts separately.
    pub confidence_lo: Vec<Complex64>,
    pub confidence_hi: Vec<Complex64>,
}

/// Stage 2: `h_hat = w^H y`, linear in the number of ports.
pub fn reconstruct(plan: &SamplingPlan, y: &PilotObservation) -> Result<Reconstruction> {
    if y.plan_id != plan.id() {
        return Err(Error::PlanMismatch {
            expected: plan.id().to_owned(),
            observed: y.plan_id.clone(),
        });
    }
    if y.values.len() != plan.num_measurements() {
        return Err(Error::DimensionMismatch {
            what: "pilot vector length",
            expected: plan.num_measurements(),
            found: y.values.len(),
        });
    }
    let design = plan.noise_power();
    if (y.noise_power - design).abs() > 1e-12 * design.max(1.0) {
        return Err(Error::NoisePowerMismatch {
            design,
            observed: y.noise_power,
        });
    }
    let estimate = plan.weights().ad_mul(&y.values);
    let post_variance = plan.posterior_variance().to_vec();
    let (confidence_lo, confidence_hi) = estimate
        .iter()
        .zip(&post_variance)
        .map(|(mu, v)| {
            let half = 3.0 * v;
            (
                Complex64::new(mu.re - half, mu.im - half),
                Complex64::new(mu.re + half, mu.im + half),
            )
        })
        .unzip();
    Ok(Reconstruction {
        estimate,
        post_variance,
        confidence_lo,
        confidence_hi,
    })
}
