//! Monte-Carlo NMSE sweeps over `P`, SNR and schemes.
//!
//! Within one `(P, snr, trial)` every scheme sees the same channel, and the
//! noise at a port depends only on the trial and the port, so schemes that
//! measure the same port see the same noise sample.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{estimate_fas_omp, estimate_selmmse, random_ports, selmmse_ports, SteeringDictionary};
use crate::error::{Error, Result};
use crate::geometry::{generate_ssc_channel, noise_power_for_snr, observe_ports, ChannelRealization, PortGeometry};
use crate::harness::config::{trial_seed, ExperimentConfig, KernelSpec, SchemeConfig};
use crate::harness::report::{nmse, ResultRecord};
use crate::kernels::{Jitter, Kernel};
use crate::plan::{design_plan, observe_pilots, reconstruct, SamplingPlan};
use crate::rng::hash_words;

const NOISE_STREAM: u64 = 1;
const PORT_STREAM: u64 = 2;

/// Seeds derived for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub channel: u64,
    pub noise: u64,
    /// Random port draw of FAS-OMP.
    pub ports: u64,
}

impl TrialSeeds {
    pub fn new(base_seed: u64, num_timeslots: usize, snr_db: f64, trial: usize) -> Self {
        let channel = trial_seed(base_seed, num_timeslots, snr_db, trial);
        Self {
            channel,
            noise: hash_words(&[channel, NOISE_STREAM]),
            ports: hash_words(&[channel, PORT_STREAM]),
        }
    }
}

/// Channels `training_seed + t`, `t = 0..training_size`.
pub fn training_channels(
    config: &ExperimentConfig,
    training_size: usize,
    training_seed: u64,
) -> Result<Vec<ChannelRealization>> {
    if training_size == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    config.check_training_seeds(training_seed, training_size)?;
    let geom = config.geometry()?;
    (0..training_size)
        .map(|t| generate_ssc_channel(&geom, &config.channel.params(training_seed.wrapping_add(t as u64))))
        .collect()
}

/// Sample covariance of `T` training channels, with the default jitter.
pub fn train_covariance_kernel(config: &ExperimentConfig, training_size: usize, training_seed: u64) -> Result<Kernel> {
    Kernel::covariance(
        &training_channels(config, training_size, training_seed)?,
        Jitter::default(),
    )
}

/// Builds the prior of an S-BAR scheme.
pub fn build_kernel(config: &ExperimentConfig, geom: &PortGeometry, spec: &KernelSpec) -> Result<Kernel> {
    match *spec {
        KernelSpec::Bessel {
            alpha,
            eta,
            order,
            unit,
            ..
        } => Kernel::bessel(geom, alpha, eta.unwrap_or(unit.default_eta(geom)), order, unit, spec.jitter()),
        KernelSpec::Exponential { alpha, eta, unit, .. } => {
            Kernel::exponential(geom, alpha, eta.unwrap_or(unit.default_eta(geom)), unit, spec.jitter())
        }
        KernelSpec::Covariance {
            training_size,
            training_seed,
            ..
        } => Kernel::covariance(
            &training_channels(config, training_size, training_seed)?,
            spec.jitter(),
        ),
    }
}

enum Prepared {
    Sbar { kernel: Kernel },
    Selmmse,
    FasOmp {
        dict: SteeringDictionary,
        max_atoms: Option<usize>,
        residual_tol: f64,
    },
}

type PlanKey = (String, usize, usize, u64);

/// A plan designed during a sweep.
#[derive(Debug, Clone)]
pub struct PlanEntry {
    pub scheme: String,
    pub num_timeslots: usize,
    pub snr_db: f64,
    pub plan: SamplingPlan,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    /// Ordered by `(scheme, P, snr, trial)` in configuration order.
    pub records: Vec<ResultRecord>,
    /// One per S-BAR scheme, `P` and SNR.
    pub plans: Vec<PlanEntry>,
    /// Prior of each S-BAR scheme, by scheme label.
    pub kernels: Vec<(String, Kernel)>,
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    Ok(run_sweep_detailed(config)?.records)
}

pub fn run_sweep_detailed(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate()?;
    let geom = config.geometry()?;
    let m = config.antennas_per_slot;
    let ensemble_power = config.num_ports as f64;

    let mut prepared = Vec::with_capacity(config.schemes.len());
    let mut kernels = Vec::new();
    for scheme in &config.schemes {
        let label = scheme.label();
        prepared.push(match scheme {
            SchemeConfig::Sbar { kernel, .. } => {
                let kernel = build_kernel(config, &geom, kernel)
                    .map_err(|e| e.with_context(format!("building the prior of {label}")))?;
                kernels.push((label, kernel.clone()));
                Prepared::Sbar { kernel }
            }
            SchemeConfig::Selmmse { .. } => Prepared::Selmmse,
            SchemeConfig::FasOmp {
                max_atoms,
                residual_tol,
                oversampling,
                ..
            } => Prepared::FasOmp {
                dict: SteeringDictionary::new(&geom, *oversampling)?,
                max_atoms: *max_atoms,
                residual_tol: *residual_tol,
            },
        });
    }

    // Plans are designed serially, once per key, before any trial runs.
    let mut cache: HashMap<PlanKey, SamplingPlan> = HashMap::new();
    let mut plans = Vec::new();
    for (scheme, prep) in config.schemes.iter().zip(&prepared) {
        let Prepared::Sbar { kernel } = prep else { continue };
        for &p in &config.timeslots {
            for &snr in &config.snr_db {
                let sigma2 = noise_power_for_snr(ensemble_power, snr)?;
                let key = (kernel.fingerprint().to_owned(), p, m, sigma2.to_bits());
                let plan = match cache.get(&key) {
                    Some(plan) => plan.clone(),
                    None => {
                        let plan = design_plan(kernel, p, m, sigma2).map_err(|e| {
                            e.with_context(format!("designing {} for P={p}, snr={snr} dB", scheme.label()))
                        })?;
                        cache.insert(key, plan.clone());
                        plan
                    }
                };
                plans.push(PlanEntry {
                    scheme: scheme.label(),
                    num_timeslots: p,
                    snr_db: snr,
                    plan,
                });
            }
        }
    }
    let cache = config.cache_plans.then_some(cache);

    let tasks: Vec<(usize, f64, usize)> = config
        .timeslots
        .iter()
        .flat_map(|&p| {
            config
                .snr_db
                .iter()
                .flat_map(move |&snr| (0..config.trials).map(move |t| (p, snr, t)))
        })
        .collect();

    let per_task: Vec<Vec<ResultRecord>> = tasks
        .par_iter()
        .map(|&(p, snr, trial)| {
            run_trial(config, &geom, &prepared, cache.as_ref(), p, snr, trial)
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(per_task.len() * prepared.len());
    for s in 0..prepared.len() {
        records.extend(per_task.iter().map(|recs| recs[s].clone()));
    }
    Ok(SweepOutput {
        records,
        plans,
        kernels,
    })
}

fn run_trial(
    config: &ExperimentConfig,
    geom: &PortGeometry,
    prepared: &[Prepared],
    cache: Option<&HashMap<PlanKey, SamplingPlan>>,
    p: usize,
    snr: f64,
    trial: usize,
) -> Result<Vec<ResultRecord>> {
    let m = config.antennas_per_slot;
    let n = config.num_ports;
    let seeds = TrialSeeds::new(config.base_seed, p, snr, trial);
    let sigma2 = noise_power_for_snr(n as f64, snr)?;
    let context = |label: &str| format!("{label}, P={p}, snr={snr} dB, trial {trial}");
    let h = generate_ssc_channel(geom, &config.channel.params(seeds.channel))
        .map_err(|e| e.with_context(context("channel")))?;

    config
        .schemes
        .iter()
        .zip(prepared)
        .map(|(scheme, prep)| {
            let label = scheme.label();
            let (estimate, elapsed) = estimate_one(prep, &h, geom, cache, p, m, sigma2, seeds, config)
                .map_err(|e| e.with_context(context(&label)))?;
            Ok(ResultRecord {
                scheme: label.clone(),
                kernel_kind: scheme.kernel_kind().to_owned(),
                num_ports: n,
                antennas_per_slot: m,
                num_timeslots: p,
                snr_db: snr,
                trial,
                seed: seeds.channel,
                nmse: nmse(&h, &estimate).map_err(|e| e.with_context(context(&label)))?,
                wall_time_stage2_ns: if config.record_timing { elapsed } else { 0 },
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn estimate_one(
    prep: &Prepared,
    h: &ChannelRealization,
    geom: &PortGeometry,
    cache: Option<&HashMap<PlanKey, SamplingPlan>>,
    p: usize,
    m: usize,
    sigma2: f64,
    seeds: TrialSeeds,
    config: &ExperimentConfig,
) -> Result<(ChannelRealization, u64)> {
    let n = geom.num_ports();
    let pm = p * m;
    match prep {
        Prepared::Sbar { kernel } => {
            let key = (kernel.fingerprint().to_owned(), p, m, sigma2.to_bits());
            let designed;
            let plan = match cache.and_then(|c| c.get(&key)) {
                Some(plan) => plan,
                None => {
                    designed = design_plan(kernel, p, m, sigma2)?;
                    &designed
                }
            };
            let y = observe_pilots(h, plan, sigma2, seeds.noise)?;
            let start = Instant::now();
            let r = reconstruct(plan, &y)?;
            let elapsed = start.elapsed().as_nanos() as u64;
            Ok((ChannelRealization::external(r.estimate), elapsed))
        }
        Prepared::Selmmse => {
            let ports = selmmse_ports(n, pm)?;
            let y = observe_ports(h, &ports, sigma2, seeds.noise, "selmmse")?;
            let start = Instant::now();
            let est = estimate_selmmse(&y, &ports, n)?;
            Ok((est, start.elapsed().as_nanos() as u64))
        }
        Prepared::FasOmp {
            dict,
            max_atoms,
            residual_tol,
        } => {
            let ports = random_ports(n, pm, seeds.ports)?;
            let y = observe_ports(h, &ports, sigma2, seeds.noise, "fas-omp")?;
            let atoms = max_atoms.unwrap_or(config.channel.num_clusters.min(pm));
            let start = Instant::now();
            let r = estimate_fas_omp(&y, &ports, dict, atoms, *residual_tol)?;
            Ok((r.estimate, start.elapsed().as_nanos() as u64))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ChannelConfig;

    fn small(schemes: Vec<SchemeConfig>) -> ExperimentConfig {
        ExperimentConfig {
            num_ports: 16,
            antennas_per_slot: 2,
            timeslots: vec![1, 2, 4],
            snr_db: vec![10.0],
            trials: 3,
            aperture_in_wavelengths: 4.0,
            base_seed: 11,
            channel: ChannelConfig {
                num_clusters: 2,
                rays_per_cluster: 5,
                angle_spread_deg: 5.0,
            },
            schemes,
            ..ExperimentConfig::default()
        }
    }

    fn all_schemes() -> Vec<SchemeConfig> {
        vec![
            SchemeConfig::Sbar {
                name: None,
                kernel: KernelSpec::bessel(),
            },
            SchemeConfig::Selmmse { name: None },
            SchemeConfig::FasOmp {
                name: None,
                max_atoms: None,
                residual_tol: 1e-3,
                oversampling: 4,
            },
        ]
    }

    #[test]
    fn records_follow_scheme_p_snr_trial_order() {
        let recs = run_sweep(&small(all_schemes())).unwrap();
        assert_eq!(recs.len(), 3 * 3 * 3);
        let keys: Vec<(String, usize, usize)> = recs
            .iter()
            .map(|r| (r.scheme.clone(), r.num_timeslots, r.trial))
            .collect();
        let mut sorted = keys.clone();
        let rank = |s: &str| ["SBAR", "SELMMSE", "FAS_OMP"].iter().position(|x| *x == s).unwrap();
        sorted.sort_by_key(|(s, p, t)| (rank(s), *p, *t));
        assert_eq!(keys, sorted);
        assert!(recs.iter().all(|r| r.nmse >= 0.0 && r.wall_time_stage2_ns == 0));
    }

    #[test]
    fn schemes_share_the_trial_channel() {
        let recs = run_sweep(&small(all_schemes())).unwrap();
        let per_scheme = recs.len() / 3;
        for i in 0..per_scheme {
            assert_eq!(recs[i].seed, recs[i + per_scheme].seed);
            assert_eq!(recs[i].seed, recs[i + 2 * per_scheme].seed);
        }
    }

    #[test]
    fn caching_does_not_change_results() {
        let mut c = small(all_schemes());
        let cached = run_sweep(&c).unwrap();
        c.cache_plans = false;
        assert_eq!(run_sweep(&c).unwrap(), cached);
    }

    #[test]
    fn noiseless_full_sampling_is_exact() {
        let mut c = small(vec![SchemeConfig::Sbar {
            name: None,
            kernel: KernelSpec::bessel(),
        }]);
        c.trials = 1;
        c.timeslots = vec![8];
        c.snr_db = vec![400.0];
        let recs = run_sweep(&c).unwrap();
        assert_eq!(recs.len(), 1);
        assert!(recs[0].nmse < 1e-8, "{}", recs[0].nmse);
    }

    #[test]
    fn covariance_training_is_rank_limited() {
        let c = small(all_schemes());
        let k = train_covariance_kernel(&c, 1, 99).unwrap();
        let eig = nalgebra::SymmetricEigen::new(k.unjittered());
        let big = eig.eigenvalues.iter().filter(|v| v.abs() > 1e-9).count();
        assert_eq!(big, 1);
        assert!(matches!(train_covariance_kernel(&c, 0, 99), Err(Error::EmptyTrainingSet)));
    }

    #[test]
    fn timing_is_opt_in() {
        let mut c = small(all_schemes());
        c.record_timing = true;
        c.trials = 1;
        let recs = run_sweep(&c).unwrap();
        assert!(recs.iter().any(|r| r.wall_time_stage2_ns > 0));
    }
}
