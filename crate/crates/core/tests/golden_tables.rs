mod common;

use common::*;
use eprlab::densecode::*;
use eprlab::numkit::{identity, kron, vec_diff_up_to_sign};

#[test]
fn encoding_tables_match() {
    for n in [1, 2, 4] {
        let h = table_hadamard(n).unwrap();
        let psi1 = initial_state(n, &h).unwrap();
        for (r, w) in table_words(n).iter().enumerate() {
            let label = BellLabel::from_flat(n, r + 1).unwrap();
            let o = word_matrix(&parse_word(w).unwrap(), n).unwrap();
            let st = kron(&o, &identity(2 * n)) * &psi1;
            let b = bell_state(n, &h, label).unwrap();
            assert!(vec_diff_up_to_sign(&st, &b) < 1e-12, "N={n} row {} word {w}", r + 1);
        }
    }
}

#[test]
fn measurement_tables_match() {
    for n in [1, 2, 4] {
        let coder = DenseCoder::with_table_hadamard(n).unwrap();
        for (r, &(m, nb)) in table_outcomes(n).iter().enumerate() {
            let label = BellLabel::from_flat(n, r + 1).unwrap();
            let res = coder.bsm_dense(coder.bell(label)).unwrap();
            assert_eq!(res.outcome, (m, nb), "N={n} row {}", r + 1);
            assert_eq!(res.label, label);
            assert_eq!(res.renamed, expected_rename(m, nb, n));
            assert!(res.exact);
        }
    }
    assert_eq!(
        (1..=4).map(|c| DenseCoder::with_table_hadamard(1).unwrap().roundtrip(c - 1).unwrap().renamed).collect::<Vec<_>>(),
        TAB2_RENAMED
    );
}

#[test]
fn explicit_u_forms() {
    for n in [2, 4, 8] {
        let g = u_gate(n, &u_hadamard(n).unwrap()).unwrap();
        let e = explicit_u(n, &explicit_u_words(n)).unwrap();
        assert!(eprlab::numkit::max_abs_diff(&g, &e) < 1e-12, "N={n}");
    }
}
