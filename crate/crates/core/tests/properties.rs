mod common;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use common::*;
use sbar::baselines::{estimate_fas_omp, estimate_selmmse, random_ports, SteeringDictionary};
use sbar::geometry::{is_valid_switch, observe_ports};
use sbar::harness::{parse_csv, write_csv, ResultRecord};
use sbar::kernels::{Jitter, LengthUnit};
use sbar::{
    build_port_geometry, design_plan, generate_ssc_channel, plan_to_switch_matrices, ChannelRealization, Kernel,
    PosteriorState, SscModelParams,
};

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| Complex64::new(re, im)), len)
}

/// Bessel orders above zero vanish on the diagonal and are not covariances;
/// `max_order = 0` keeps the kernel positive semidefinite.
fn stationary_kernel(max_order: u32) -> impl Strategy<Value = Kernel> {
    (2usize..40, 0.5..10.0f64, 0.5..2.0f64, 0.2..1.0f64, 0..=max_order, any::<bool>(), any::<bool>()).prop_map(
        |(n, w, alpha, eta, order, bessel, meters)| {
            let g = build_port_geometry(n, w, 3.5e9).unwrap();
            let unit = if meters { LengthUnit::Meter } else { LengthUnit::Wavelength };
            let eta = if meters { eta * g.wavelength() } else { eta };
            if bessel {
                Kernel::bessel(&g, alpha, eta, order, unit, Jitter::default()).unwrap()
            } else {
                Kernel::exponential(&g, alpha, eta, unit, Jitter::default()).unwrap()
            }
        },
    )
}

fn is_exactly_hermitian(m: &DMatrix<Complex64>) -> bool {
    (0..m.nrows()).all(|i| m[(i, i)].im == 0.0 && (0..m.ncols()).all(|j| m[(i, j)] == m[(j, i)].conj()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn stationary_kernels_are_hermitian_and_reversal_symmetric(k in stationary_kernel(3)) {
        let m = k.matrix();
        prop_assert!(is_exactly_hermitian(m));
        let n = m.nrows();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(m[(i, j)], m[(n - 1 - i, n - 1 - j)]);
            }
        }
    }

    #[test]
    fn exponential_entries_decay_with_distance(
        n in 2usize..40, w in 0.5..10.0f64, alpha in 0.5..2.0f64, eta in 0.5..1.0f64,
    ) {
        let g = build_port_geometry(n, w, 3.5e9).unwrap();
        let k = Kernel::exponential(&g, alpha, eta, LengthUnit::Wavelength, Jitter::Absolute(0.0)).unwrap();
        let row = k.matrix().row(0);
        for j in 0..n {
            prop_assert!(row[j].re > 0.0 && row[j].re <= alpha * alpha);
            prop_assert_eq!(row[j].im, 0.0);
            if j > 0 {
                prop_assert!(row[j].re <= row[j - 1].re);
            }
        }
    }

    #[test]
    fn covariance_of_repeated_channel_ignores_t(h in complex_vec(6), t in 1usize..20, jitter in 0.0..0.1f64) {
        let ch = ChannelRealization::external(DVector::from_vec(h.clone()));
        let k = Kernel::covariance(&vec![ch; t], Jitter::Absolute(jitter)).unwrap();
        prop_assert!(is_exactly_hermitian(k.matrix()));
        for i in 0..6 {
            for j in 0..6 {
                let want = h[i] * h[j].conj() + if i == j { Complex64::new(jitter, 0.0) } else { Complex64::new(0.0, 0.0) };
                prop_assert!((k.matrix()[(i, j)] - want).norm() <= 1e-12 * (1.0 + want.norm()));
            }
        }
    }

    #[test]
    fn posterior_variance_never_grows(seed in any::<u64>(), n in 2usize..12, s2 in 0.0..1.0f64) {
        let mut r = rng(seed);
        let k = random_gram_kernel(&mut r, n);
        let mut s = PosteriorState::new(&k, s2).unwrap();
        let mut before = s.variance();
        while let Some(p) = s.next_candidate() {
            s.update(p).unwrap();
            let after = s.variance();
            for (a, b) in after.iter().zip(&before) {
                prop_assert!(*a <= b + 1e-10);
            }
            prop_assert!(is_exactly_hermitian(s.post_cov()));
            before = after;
        }
    }

    #[test]
    fn rank_one_matches_batch(seed in any::<u64>(), n in 2usize..12, s2 in 0.01..1.0f64) {
        let mut r = rng(seed);
        let k = random_gram_kernel(&mut r, n);
        let mut s = PosteriorState::new(&k, s2).unwrap();
        for p in (0..n).rev().step_by(2) {
            s.update(p).unwrap();
            let batch = batch_posterior(&rows(k.matrix()), s.measured(), s2);
            prop_assert!(relative_frobenius(&rows(s.post_cov()), &batch) < 1e-8);
        }
    }

    #[test]
    fn design_is_pure_and_switches_are_valid(
        k in stationary_kernel(0), p in 1usize..4, m in 1usize..4, s2 in 0.0..1.0f64,
    ) {
        prop_assume!(p * m <= k.num_ports());
        let a = design_plan(&k, p, m, s2).unwrap();
        let b = design_plan(&k, p, m, s2).unwrap();
        prop_assert_eq!(a.id(), b.id());
        prop_assert_eq!(&a, &b);
        let s = a.stacked_switch();
        prop_assert!(is_valid_switch(&s));
        // S S^T = I in integers
        for i in 0..s.len() {
            for j in 0..s.len() {
                let dot: u32 = s[i].iter().zip(&s[j]).map(|(x, y)| u32::from(*x) * u32::from(*y)).sum();
                prop_assert_eq!(dot, u32::from(i == j));
            }
        }
    }

    #[test]
    fn switch_split_preserves_order(order in Just((0..24).collect::<Vec<usize>>()).prop_shuffle(), m in 1usize..5) {
        let p = 24 / m;
        let order = &order[..p * m];
        let slots = plan_to_switch_matrices(order, p, m).unwrap();
        let flat: Vec<usize> = slots.iter().flat_map(|s| s.ports().to_vec()).collect();
        prop_assert_eq!(flat.as_slice(), order);
    }

    #[test]
    fn noiseless_observation_is_exact(h in complex_vec(10), ports in prop::collection::vec(0usize..10, 1..10)) {
        let ch = ChannelRealization::external(DVector::from_vec(h.clone()));
        let y = observe_ports(&ch, &ports, 0.0, 9, "x").unwrap();
        for (v, &p) in y.values.iter().zip(&ports) {
            prop_assert_eq!(*v, h[p]);
        }
    }

    #[test]
    fn ssc_channels_are_pure(seed in any::<u64>(), c in 1usize..5, r in 1usize..20, spread in 0.0..10.0f64) {
        let g = build_port_geometry(32, 5.0, 3.5e9).unwrap();
        let params = SscModelParams::new(c, r, spread, seed);
        prop_assert_eq!(generate_ssc_channel(&g, &params).unwrap(), generate_ssc_channel(&g, &params).unwrap());
    }

    #[test]
    fn selmmse_keeps_measurements(h in complex_vec(30), pm in 1usize..30, seed in any::<u64>()) {
        let ports = random_ports(30, pm, seed).unwrap();
        let ch = ChannelRealization::external(DVector::from_vec(h));
        let y = observe_ports(&ch, &ports, 0.1, seed, "").unwrap();
        let est = estimate_selmmse(&y, &ports, 30).unwrap();
        for (&p, v) in ports.iter().zip(y.values.iter()) {
            prop_assert_eq!(est.values[p], *v);
        }
    }

    #[test]
    fn omp_residuals_shrink_without_repeats(seed in any::<u64>(), pm in 2usize..16, atoms in 1usize..9) {
        prop_assume!(atoms <= pm);
        let g = build_port_geometry(32, 6.0, 3.5e9).unwrap();
        let dict = SteeringDictionary::new(&g, 4).unwrap();
        let h = generate_ssc_channel(&g, &SscModelParams::new(3, 20, 5.0, seed)).unwrap();
        let ports = random_ports(32, pm, seed).unwrap();
        let y = observe_ports(&h, &ports, 0.05, seed, "").unwrap();
        let r = estimate_fas_omp(&y, &ports, &dict, atoms, 1e-3).unwrap();
        prop_assert!(r.residual_norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let mut s = r.support.clone();
        s.sort_unstable();
        s.dedup();
        prop_assert_eq!(s.len(), r.support.len());
        prop_assert!(r.support.len() <= atoms);
    }

    #[test]
    fn csv_round_trips(records in prop::collection::vec(
        ("[A-Za-z_ ,\"]{1,12}", 1usize..300, 1usize..8, 1usize..20, -30.0..40.0f64, 0usize..1000, any::<u64>(), 0.0..1e6f64, any::<u64>()),
        0..20,
    )) {
        let records: Vec<ResultRecord> = records
            .into_iter()
            .map(|(scheme, n, m, p, snr, trial, seed, nmse, ns)| ResultRecord {
                scheme,
                kernel_kind: "none".into(),
                num_ports: n,
                antennas_per_slot: m,
                num_timeslots: p,
                snr_db: snr,
                trial,
                seed,
                nmse,
                wall_time_stage2_ns: ns,
            })
            .collect();
        let mut out = Vec::new();
        write_csv(&records, &mut out).unwrap();
        prop_assert_eq!(parse_csv(out.as_slice()).unwrap(), records);
    }
}
