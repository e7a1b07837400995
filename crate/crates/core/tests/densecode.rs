use eprlab::densecode::*;
use eprlab::numkit::*;
use eprlab::EprError;

fn all_bells(n: usize) -> (HadamardMatrix, Vec<CVec>) {
    let h = HadamardMatrix::sylvester_order(2 * n).unwrap();
    let v = BellLabel::all(n).into_iter().map(|l| bell_state(n, &h, l).unwrap()).collect();
    (h, v)
}

#[test]
fn bell_basis_orthonormal_and_maximally_entangled() {
    for n in [1, 2, 4, 8] {
        let d = 2 * n;
        let (h, bells) = all_bells(n);
        assert_eq!(bells.len(), 4 * n * n);
        let mut gram = 0.0f64;
        for (a, x) in bells.iter().enumerate() {
            for (b, y) in bells.iter().enumerate() {
                let want = if a == b { 1.0 } else { 0.0 };
                gram = gram.max((x.dotc(y) - c(want, 0.0)).norm());
            }
            let target = identity(d).unscale(d as f64);
            assert!(max_abs_diff(&reduce_to_first(x, d, d), &target) < 1e-12);
            assert!(max_abs_diff(&reduce_to_second(x, d, d), &target) < 1e-12);
        }
        assert!(gram < 1e-12, "N={n}: {gram}");
        for l in BellLabel::all(n) {
            assert!(unitarity_deviation(&encode_operator(n, &h, l).unwrap()) < 1e-10);
        }
    }
}

#[test]
fn encoders_send_initial_state_to_bell_states() {
    for n in [1, 2, 4] {
        let h = table_hadamard(n).unwrap();
        let psi1 = initial_state(n, &h).unwrap();
        for l in BellLabel::all(n) {
            let o = encode_operator(n, &h, l).unwrap();
            let st = kron(&o, &identity(2 * n)) * &psi1;
            assert!(vec_max_abs(&(st - bell_state(n, &h, l).unwrap())) < 1e-12, "{l}");
            let w = compose_encoder(n, &h, l, 1).unwrap();
            assert!(diff_up_to_sign(&w, &o) < 1e-12, "{l}");
        }
    }
}

#[test]
fn encoders_close_under_products() {
    let n = 2;
    let h = table_hadamard(n).unwrap();
    let ops: Vec<CMat> = BellLabel::all(n).into_iter().map(|l| encode_operator(n, &h, l).unwrap()).collect();
    for a in &ops {
        for b in &ops {
            let p = a * b;
            assert!(ops.iter().any(|o| diff_up_to_sign(&p, o) < 1e-12));
        }
    }
}

#[test]
fn exhaustive_roundtrips() {
    for n in [1, 2, 4, 8] {
        let coder = DenseCoder::with_table_hadamard(n).unwrap();
        let bits = coder.message_bits().unwrap();
        assert_eq!(bits as f64, 2.0 * ((2 * n) as f64).log2());
        for m in 0..4 * n * n {
            let r = coder.roundtrip(m).unwrap();
            assert_eq!(r.message_in, r.message_out);
            assert_eq!(r.message_in.len(), bits);
        }
    }
}

#[test]
fn non_power_of_two_messages_are_integers() {
    assert_eq!(encode_message(7, None), "7");
    assert_eq!(decode_message("7", None).unwrap(), 7);
    assert!(decode_message("0102", Some(4)).is_err());
}

#[test]
fn n8_has_no_gate_chain() {
    let coder = DenseCoder::with_table_hadamard(8).unwrap();
    assert!(!coder.has_chain());
    let st = coder.bell(BellLabel::from_flat(8, 17).unwrap()).clone();
    assert!(matches!(coder.bsm_dense(&st), Err(EprError::Capability(_))));
    let (l, w) = coder.bsm_project(&st).unwrap();
    assert_eq!(l.flat(8), 17);
    assert!((w - 1.0).abs() < 1e-12);
}

#[test]
fn noise_tolerance() {
    let coder = DenseCoder::with_table_hadamard(4).unwrap();
    for (i, l) in BellLabel::all(4).into_iter().enumerate() {
        let st = coder.encoded_pair(l).unwrap();
        let r = coder.bsm_dense(&perturb(&st, 1e-3, i as u64)).unwrap();
        assert_eq!(r.label, l);
        assert!(!r.exact);
    }
    // an even superposition of two Bell states has no dominant outcome
    let a = coder.bell(BellLabel::from_flat(4, 1).unwrap());
    let b = coder.bell(BellLabel::from_flat(4, 2).unwrap());
    let mix = (a + b).unscale(2f64.sqrt());
    assert!(matches!(coder.bsm_dense(&mix), Err(EprError::Ambiguity { .. })));
}

#[test]
fn rates() {
    for n in [2usize, 8, 64] {
        let t = 0.5;
        let r = info_rates(n, n, GateTimes::equal(t, n)).unwrap();
        let nf = n as f64;
        assert!((r.r_x - 2.0 * (2.0 * nf).log2() / ((5.0 + nf) * t)).abs() < 1e-15);
        assert!((r.r_p - 1.0 / (nf * t)).abs() < 1e-15);
        assert!((r.r_m - 1.0 / ((nf - 1.0) * t)).abs() < 1e-15);
        assert!((r.rc_p - 1.0 / t).abs() < 1e-15 && (r.rc_m - 1.0 / t).abs() < 1e-12);
    }
    let r = info_rates(1024, 1024, GateTimes::equal(1.0, 1024)).unwrap();
    assert!((r.ratio_x_over_p - 22.0 * 1024.0 / 1029.0).abs() < 1e-12);
    assert!((r.ratio_x_over_p / 22.0 - 1.0).abs() < 0.01);
    assert!(info_rates(4, 4, GateTimes { t_c: 0.0, ..GateTimes::equal(1.0, 4) }).is_err());
}

#[test]
fn spin_extension() {
    let h = HadamardMatrix::sylvester_order(4).unwrap();
    let s = spin_extended_dim(2, 1, &h).unwrap();
    assert_eq!(s.dimension, 8);
    assert!((s.capacity_bits - 2.0 * 8f64.log2()).abs() < 1e-12);
    assert!(s.reduced_deviation < 1e-12);
}
