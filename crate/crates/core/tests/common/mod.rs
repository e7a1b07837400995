#![allow(dead_code)]
//! Hand-encoded table fixtures shared by integration tests.

pub const TAB1_WORDS: [&str; 4] = ["I", "N1", "P1", "N1P1"];
pub const TAB2_OUT: &str = "1,-1 -1,-1 1,1 -1,1";
pub const TAB2_RENAMED: [&str; 4] = ["01", "11", "00", "10"];

pub const AN2_MEMBERS: [&str; 8] = ["", "N1N2", "P2N2P2N2", "P2N1N2P2", "P1P2", "N1N2P1P2", "N2P1P2N2", "N1P1P2N2"];
pub const AN2_FAMILIES: [&str; 2] = ["", "L"];
pub const BN2_OUT: &str = "1,-1 -1,-1 2,-2 -2,-2 2,2 -2,2 1,1 -1,1 2,-1 -2,-1 1,-2 -1,-2 1,2 -1,2 2,1 -2,1";

pub const T7_MEMBERS: [&str; 8] = [
    "",
    "N1N2N3N4",
    "P2N2P2N2P3N3P3N3",
    "N1N4P2N2P2P3N3P3",
    "P2N2P2N2P4N4P4N4",
    "N1N3P2N2P2P4N4P4",
    "P3N3P3N3P4N4P4N4",
    "N1N2P3N3P3P4N4P4",
];
pub const T7_FAMILIES: [&str; 8] = ["", "P1P2P3P4", "L^3", "L^3P1P2P3P4", "L^2", "L^2P1P2P3P4", "L", "LP1P2P3P4"];
// row 34 is printed as |-3,1> in the source table; its rename string and
// the measurement chain both give |-3,-1>
pub const T8_OUT: &str = "1,-1 -1,-1 4,-4 -4,-4 2,-2 -2,-2 3,-3 -3,-3 2,2 -2,2 3,3 -3,3 1,1 -1,1 4,4 -4,4 \
4,-1 -4,-1 2,-3 -2,-3 1,-2 -1,-2 3,-4 -3,-4 1,2 -1,2 3,4 -3,4 4,1 -4,1 2,3 -2,3 \
3,-1 -3,-1 2,-4 -2,-4 4,-2 -4,-2 1,-3 -1,-3 4,2 -4,2 1,3 -1,3 3,1 -3,1 2,4 -2,4 \
2,-1 -2,-1 4,-3 -4,-3 3,-2 -3,-2 1,-4 -1,-4 3,2 -3,2 1,4 -1,4 2,1 -2,1 4,3 -4,3";

pub fn outcomes(s: &str) -> Vec<(i64, i64)> {
    s.split_whitespace()
        .map(|p| {
            let (a, b) = p.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect()
}

/// Encoder words in row order for N = 1, 2, 4.
pub fn table_words(n: usize) -> Vec<String> {
    match n {
        1 => TAB1_WORDS.iter().map(|s| s.to_string()).collect(),
        2 => AN2_FAMILIES.iter().flat_map(|f| AN2_MEMBERS.iter().map(move |m| format!("{m}{f}"))).collect(),
        4 => T7_FAMILIES.iter().flat_map(|f| T7_MEMBERS.iter().map(move |m| format!("{m}{f}"))).collect(),
        _ => panic!("no table for N={n}"),
    }
}

pub fn table_outcomes(n: usize) -> Vec<(i64, i64)> {
    outcomes(match n {
        1 => TAB2_OUT,
        2 => BN2_OUT,
        4 => T8_OUT,
        _ => panic!("no table for N={n}"),
    })
}

/// Rename rule applied by hand: slot |m| and slot N+|n|, '0' for positive.
pub fn expected_rename(m: i64, nb: i64, n: usize) -> String {
    let mut s = vec!["⊔"; 2 * n];
    s[m.unsigned_abs() as usize - 1] = if m > 0 { "0" } else { "1" };
    s[n + nb.unsigned_abs() as usize - 1] = if nb > 0 { "0" } else { "1" };
    s.concat()
}

pub fn all_n(n: usize) -> String {
    (1..=n).map(|i| format!("N{i}")).collect()
}

/// Explicit U words as printed for N = 2, 4, 8.
pub fn explicit_u_words(n: usize) -> Vec<String> {
    let nn = all_n(n);
    match n {
        2 => vec![format!("P1{nn}P1"), String::new()],
        4 => vec![format!("P1P4{nn}P1P4"), "P4N4P4N4".into(), format!("P1P3{nn}P1P3"), "P3N3P3N3".into()],
        8 => vec![
            format!("P1P3P6P8{nn}P1P3P6P8"),
            "P5N5P5N5P6N6P6N6P8N8P8N8".into(),
            format!("P1P3P6P7{nn}P1P3P6P7"),
            "P3N3P3N3P6N6P6N6P7N7P7N7".into(),
            format!("P1P4P5P8{nn}P1P4P5P8"),
            "P3N3P3N3P4N4P4N4P8N8P8N8".into(),
            format!("P1P4P5P7{nn}P1P4P5P7"),
            "P4N4P4N4P5N5P5N5P7N7P7N7".into(),
        ],
        _ => panic!("no explicit U for N={n}"),
    }
}
