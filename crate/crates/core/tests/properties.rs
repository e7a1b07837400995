use eprlab::bohmsim::*;
use eprlab::densecode::*;
use eprlab::numkit::*;
use eprlab::teleport::*;
use proptest::prelude::*;

fn small_n() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![1usize, 2, 4])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wrap_stays_in_range(v in -1000i64..1000, n in 1usize..20) {
        let w = wrap(v, n);
        prop_assert!(w >= 1 && w <= n as i64);
        prop_assert_eq!(wrap(w + n as i64, n), w);
    }

    #[test]
    fn flat_codes_biject(n in 1usize..9, code in 1usize..300) {
        let code = (code - 1) % (4 * n * n) + 1;
        let l = BellLabel::from_flat(n, code).unwrap();
        prop_assert_eq!(l.flat(n), code);
        prop_assert_eq!(BellLabel::all(n)[code - 1], l);
    }

    #[test]
    fn channel_index_inverse(n in 1usize..12, i in 0usize..24) {
        let i = i % (2 * n);
        prop_assert_eq!(idx(channel(i, n), n), i);
    }

    #[test]
    fn kron_of_hadamards_is_hadamard(a in 0u32..4, b in 0u32..4) {
        let h = HadamardMatrix::sylvester(a).unwrap().kron(&HadamardMatrix::sylvester(b).unwrap());
        prop_assert!(h.report().is_hadamard);
        let back = parse_hadamard(&h.to_text()).unwrap();
        prop_assert_eq!(back, h.rows());
    }

    #[test]
    fn fmt17_round_trips(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        prop_assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn roundtrip_any_message(n in small_n(), m in 0usize..64) {
        let coder = DenseCoder::with_table_hadamard(n).unwrap();
        let m = m % (4 * n * n);
        let r = coder.roundtrip(m).unwrap();
        prop_assert_eq!(r.message_in, r.message_out);
    }

    #[test]
    fn teleport_any_state_any_outcome(n in small_n(), seed in any::<u64>(), code in 1usize..64) {
        let t = Teleporter::new(n, table_hadamard(n).unwrap()).unwrap();
        let phi = random_state(2 * n, seed);
        let l = BellLabel::from_flat(n, (code - 1) % (4 * n * n) + 1).unwrap();
        let r = t.forced(&phi, l).unwrap();
        prop_assert!(r.fidelity >= 1.0 - 1e-10);
        prop_assert!((r.probability * (4 * n * n) as f64 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn expansion_is_a_partition(n in small_n(), seed in any::<u64>()) {
        let h = table_hadamard(n).unwrap();
        let res = bell_expand(&random_state(2 * n, seed), n, &h).unwrap();
        let total: f64 = res.iter().map(|r| r.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn encoders_unitary(n in small_n(), code in 1usize..64) {
        let h = table_hadamard(n).unwrap();
        let l = BellLabel::from_flat(n, (code - 1) % (4 * n * n) + 1).unwrap();
        prop_assert!(unitarity_deviation(&encode_operator(n, &h, l).unwrap()) < 1e-10);
    }
}

fn layout() -> impl Strategy<Value = (Layout, Exchange)> {
    prop::sample::select(vec![
        (Layout::TwoDoubleSlit, Exchange::Bosonic),
        (Layout::TwoDoubleSlit, Exchange::Fermionic),
        (Layout::SingleDoubleSlitEntangled, Exchange::Bosonic),
        (Layout::SingleDoubleSlitEntangled, Exchange::Fermionic),
    ])
}

fn params() -> impl Strategy<Value = PhysParams> {
    (0.5f64..2.0, 0.5f64..2.0, 0.5f64..4.0, 0.0f64..1.0).prop_map(|(m, s, y, k)| PhysParams { mass: m, sigma0: s, slit_y: y, k_y: k, ..Default::default() })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    // center-of-mass velocity is u a ȧ / (1 + a²) wherever ψ does not vanish
    #[test]
    fn com_velocity_is_linear(p in params(), (lay, ex) in layout(), y1 in -6.0f64..6.0, y2 in -6.0f64..6.0, t in 0.0f64..8.0) {
        let cfg = ExperimentConfig::new(p, lay, ex);
        let c = PairCoordinates::at(&cfg, y1, y2, t);
        if let Ok((v1, v2)) = bohm_velocities(&cfg, &c) {
            let a = p.a(t);
            let adot = p.hbar / (2.0 * p.mass * p.sigma0 * p.sigma0);
            let want = 0.5 * (y1 + y2) * a * adot / (1.0 + a * a);
            prop_assert!((0.5 * (v1 + v2) - want).abs() < 1e-9 * (1.0 + v1.abs() + v2.abs()));
        }
    }

    #[test]
    fn mirror_symmetry_of_velocities(p in params(), (lay, ex) in layout(), y1 in -6.0f64..6.0, y2 in -6.0f64..6.0, t in 0.0f64..8.0) {
        let cfg = ExperimentConfig::new(p, lay, ex);
        let a = bohm_velocities(&cfg, &PairCoordinates::at(&cfg, y1, y2, t));
        let b = bohm_velocities(&cfg, &PairCoordinates::at(&cfg, -y1, -y2, t));
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!((a.0 + b.0).abs() < 1e-9 * (1.0 + a.0.abs()));
            prop_assert!((a.1 + b.1).abs() < 1e-9 * (1.0 + a.1.abs()));
        }
    }

    #[test]
    fn exchange_symmetry(p in params(), y1 in -6.0f64..6.0, y2 in -6.0f64..6.0, t in 0.0f64..8.0) {
        for (ex, s) in [(Exchange::Bosonic, 1.0), (Exchange::Fermionic, -1.0)] {
            let cfg = ExperimentConfig::new(p, Layout::SingleDoubleSlitEntangled, ex);
            let a = pair_wavefunction(&cfg, &PairCoordinates::at(&cfg, y1, y2, t)).unwrap();
            let b = pair_wavefunction(&cfg, &PairCoordinates::at(&cfg, y2, y1, t)).unwrap();
            prop_assert!((a - b * s).norm() <= 1e-12 * a.norm().max(1e-300));
        }
    }

    #[test]
    fn eigen_identity(p in params(), (lay, ex) in layout(), y1 in -6.0f64..6.0, y2 in -6.0f64..6.0, t in 0.0f64..8.0) {
        let cfg = ExperimentConfig::new(p, lay, ex);
        let c = PairCoordinates { t, y1, y2, x1: 3.0, x2: -7.0 };
        if let Ok(r) = momentum_eigen_check(&cfg, &c) {
            prop_assert!(r < 1e-5, "{}", r);
        }
    }

    #[test]
    fn coincidence_symmetric_and_nonnegative(s1 in -0.9f64..0.9, s2 in -0.9f64..0.9, ky in 1.0f64..50.0, ks in 0.1f64..5.0) {
        let (t1, t2) = (s1.asin(), s2.asin());
        let a = coincidence_pattern(t1, t2, ky, ks, 0.0, 0.0).unwrap();
        let b = coincidence_pattern(t2, t1, ky, ks, 0.0, 0.0).unwrap();
        prop_assert!(a >= -1e-15);
        prop_assert!((a - b).abs() < 1e-12);
    }
}
