//! Dense coding over signed position channels |±1..±N>.
//!
//! Single-particle basis order is |+1>..|+N>, |-1>..|-N>. Pair index is
//! `alice * 2N + bob`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{EprError, Result};
use crate::numkit::{c, identity, kron, CMat, CVec, HadamardMatrix};

/// Weight below which the dominant BSM outcome is no longer a majority.
pub const AMBIGUITY_WEIGHT: f64 = 0.5;
/// Outcomes within this distance of a pure product ket count as exact.
pub const EXACT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn value(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn from_value(v: i64) -> Sign {
        if v >= 0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;
    fn mul(self, o: Sign) -> Sign {
        Sign::from_value(self.value() * o.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BellLabel {
    pub k: usize,
    pub sign: Sign,
    pub j: usize,
}

impl BellLabel {
    pub fn new(n: usize, k: usize, sign: Sign, j: usize) -> Result<Self> {
        if k < 1 || k > n || j < 1 || j > 2 * n {
            return Err(EprError::Config(format!("label (k={k}, j={j}) out of range for N={n}")));
        }
        Ok(BellLabel { k, sign, j })
    }

    /// k+ = 2k, k- = 2k - 1.
    pub fn family(&self) -> usize {
        match self.sign {
            Sign::Plus => 2 * self.k,
            Sign::Minus => 2 * self.k - 1,
        }
    }

    /// One-based flat code 2N(k± - 1) + j.
    pub fn flat(&self, n: usize) -> usize {
        2 * n * (self.family() - 1) + self.j
    }

    pub fn from_flat(n: usize, code: usize) -> Result<Self> {
        if code < 1 || code > 4 * n * n {
            return Err(EprError::Config(format!("flat code {code} out of range for N={n}")));
        }
        let c0 = code - 1;
        let fam = c0 / (2 * n) + 1;
        let j = c0 % (2 * n) + 1;
        let sign = if fam.is_multiple_of(2) { Sign::Plus } else { Sign::Minus };
        Ok(BellLabel { k: fam.div_ceil(2), sign, j })
    }

    /// All 4N² labels in flat-code order.
    pub fn all(n: usize) -> Vec<BellLabel> {
        (1..=4 * n * n).map(|c| BellLabel::from_flat(n, c).unwrap()).collect()
    }
}

impl fmt::Display for BellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}{},{})", self.k, self.sign.symbol(), self.j)
    }
}

/// (v - 1) mod N + 1 for any integer v.
pub fn wrap(v: i64, n: usize) -> i64 {
    (v - 1).rem_euclid(n as i64) + 1
}

/// f_{k±}(n) = ±wrap(n + k - 1).
pub fn mod_shift(n_: usize, k: usize, sign: Sign, n: usize) -> i64 {
    sign.value() * wrap((n_ + k) as i64 - 1, n)
}

/// Basis position of a signed channel.
pub fn idx(ch: i64, n: usize) -> usize {
    debug_assert!(ch != 0 && ch.unsigned_abs() as usize <= n);
    if ch > 0 {
        ch as usize - 1
    } else {
        n + ch.unsigned_abs() as usize - 1
    }
}

/// Signed channel at a basis position.
pub fn channel(i: usize, n: usize) -> i64 {
    if i < n {
        i as i64 + 1
    } else {
        -((i - n) as i64 + 1)
    }
}

fn check_order(h: &HadamardMatrix, n: usize) -> Result<()> {
    if h.order() != 2 * n {
        return Err(EprError::OrderMismatch { expected: 2 * n, got: h.order() });
    }
    Ok(())
}

// ---------------------------------------------------------------- gates

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    /// Negates |-n>.
    N(usize),
    /// Swaps |n> and |-n>.
    P(usize),
    /// |±n> -> |±(n+1)>, wrapped.
    L,
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::N(n) => write!(f, "N{n}"),
            Gate::P(n) => write!(f, "P{n}"),
            Gate::L => write!(f, "L"),
        }
    }
}

pub fn gate_n(k: usize, n: usize) -> CMat {
    let mut m = identity(2 * n);
    let i = idx(-(k as i64), n);
    m[(i, i)] = c(-1.0, 0.0);
    m
}

pub fn gate_p(k: usize, n: usize) -> CMat {
    let mut m = identity(2 * n);
    m.swap_rows(idx(k as i64, n), idx(-(k as i64), n));
    m
}

pub fn gate_l(n: usize) -> CMat {
    let mut m = CMat::zeros(2 * n, 2 * n);
    for v in 1..=n as i64 {
        for s in [1, -1] {
            m[(idx(s * wrap(v + 1, n), n), idx(s * v, n))] = c(1.0, 0.0);
        }
    }
    m
}

/// Hadamard on the {|k>, |-k>} pair, identity elsewhere.
pub fn gate_hx(k: usize, n: usize) -> CMat {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = identity(2 * n);
    let (a, b) = (idx(k as i64, n), idx(-(k as i64), n));
    m[(a, a)] = c(r, 0.0);
    m[(a, b)] = c(r, 0.0);
    m[(b, a)] = c(r, 0.0);
    m[(b, b)] = c(-r, 0.0);
    m
}

/// H_{x1} ... H_{xN}.
pub fn hx_all(n: usize) -> CMat {
    (1..=n).fold(identity(2 * n), |acc, k| acc * gate_hx(k, n))
}

pub fn gate_matrix(g: Gate, n: usize) -> CMat {
    match g {
        Gate::N(k) => gate_n(k, n),
        Gate::P(k) => gate_p(k, n),
        Gate::L => gate_l(n),
    }
}

/// Parses words such as `N1P1`, `P2N2P2N2`, `L^3P1P2` or `I`.
/// Whitespace and `I` are ignored.
pub fn parse_word(s: &str) -> Result<Vec<Gate>> {
    let b: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
    let mut out = Vec::new();
    let mut i = 0;
    let num = |i: &mut usize| -> Option<usize> {
        let st = *i;
        while *i < b.len() && b[*i].is_ascii_digit() {
            *i += 1;
        }
        b[st..*i].iter().collect::<String>().parse().ok()
    };
    while i < b.len() {
        let ch = b[i];
        i += 1;
        match ch {
            'I' => {}
            'L' => {
                let mut p = 1;
                if i < b.len() && b[i] == '^' {
                    i += 1;
                    p = num(&mut i).ok_or_else(|| EprError::Format(format!("bad power in {s:?}")))?;
                }
                out.extend(std::iter::repeat_n(Gate::L, p));
            }
            'N' | 'P' => {
                let k = num(&mut i).ok_or_else(|| EprError::Format(format!("missing index in {s:?}")))?;
                out.push(if ch == 'N' { Gate::N(k) } else { Gate::P(k) });
            }
            _ => return Err(EprError::Format(format!("unexpected {ch:?} in gate word {s:?}"))),
        }
    }
    Ok(out)
}

/// Product of the gates as written; the rightmost gate acts first.
pub fn word_matrix(word: &[Gate], n: usize) -> Result<CMat> {
    let mut m = identity(2 * n);
    for &g in word {
        if let Gate::N(k) | Gate::P(k) = g {
            if k < 1 || k > n {
                return Err(EprError::Config(format!("gate {g} out of range for N={n}")));
            }
        }
        m *= gate_matrix(g, n);
    }
    Ok(m)
}

pub fn format_word(word: &[Gate]) -> String {
    if word.is_empty() {
        return "I".into();
    }
    let mut s = String::new();
    let mut i = 0;
    while i < word.len() {
        if word[i] == Gate::L {
            let mut p = 0;
            while i < word.len() && word[i] == Gate::L {
                p += 1;
                i += 1;
            }
            s.push('L');
            if p > 1 {
                s.push_str(&format!("^{p}"));
            }
        } else {
            s.push_str(&word[i].to_string());
            i += 1;
        }
    }
    s
}

// ---------------------------------------------------------------- states

/// (1/√2N) Σ_n [h_{j,2n-1}|n, f(n)> + h_{j,2n}|-n, -f(n)>].
pub fn bell_state(n: usize, h: &HadamardMatrix, label: BellLabel) -> Result<CVec> {
    check_order(h, n)?;
    let d = 2 * n;
    let s = 1.0 / (d as f64).sqrt();
    let mut v = CVec::zeros(d * d);
    for m in 1..=n {
        let f = mod_shift(m, label.k, label.sign, n);
        let mi = m as i64;
        v[idx(mi, n) * d + idx(f, n)] += c(h.h(label.j, 2 * m - 1) * s, 0.0);
        v[idx(-mi, n) * d + idx(-f, n)] += c(h.h(label.j, 2 * m) * s, 0.0);
    }
    Ok(v)
}

/// The shared initial state, label (1-, 1).
pub fn initial_state(n: usize, h: &HadamardMatrix) -> Result<CVec> {
    bell_state(n, h, BellLabel { k: 1, sign: Sign::Minus, j: 1 })
}

/// Alice's encoder: Σ_n h_{j,2n-1}|n><-f(n)| + h_{j,2n}|-n><f(n)|.
/// Applied to the first particle of the initial state it yields `bell_state(label)`.
pub fn encode_operator(n: usize, h: &HadamardMatrix, label: BellLabel) -> Result<CMat> {
    check_order(h, n)?;
    let mut o = CMat::zeros(2 * n, 2 * n);
    for m in 1..=n {
        let f = mod_shift(m, label.k, label.sign, n);
        let mi = m as i64;
        o[(idx(mi, n), idx(-f, n))] += c(h.h(label.j, 2 * m - 1), 0.0);
        o[(idx(-mi, n), idx(f, n))] += c(h.h(label.j, 2 * m), 0.0);
    }
    Ok(o)
}

/// Σ_n h_{j,2n-1}|n><f(n)| + h_{j,2n}|-n><-f(n)|. Equals `encode_operator` with
/// the family sign flipped; it obeys the composition law with sign s·s'.
pub fn literal_operator(n: usize, h: &HadamardMatrix, label: BellLabel) -> Result<CMat> {
    encode_operator(n, h, BellLabel { sign: label.sign.flip(), ..label })
}

/// Gate word O_j^{(a)} F_k for a label. `a` is the fixed reference row.
pub fn encoder_word(n: usize, h: &HadamardMatrix, label: BellLabel, a: usize) -> Result<Vec<Gate>> {
    check_order(h, n)?;
    if a < 1 || a > 2 * n {
        return Err(EprError::Config(format!("reference row {a} out of range")));
    }
    let mut w = Vec::new();
    for i in 1..=n {
        let e1 = (h.h(a, 2 * i - 1) - h.h(label.j, 2 * i - 1)) / 2.0;
        let e2 = (h.h(a, 2 * i) - h.h(label.j, 2 * i)) / 2.0;
        // P N P negates |i>, N negates |-i>
        if e1 != 0.0 {
            w.extend([Gate::P(i), Gate::N(i), Gate::P(i)]);
        }
        if e2 != 0.0 {
            w.push(Gate::N(i));
        }
    }
    let shifts = (n - label.k + 1) % n;
    w.extend(std::iter::repeat_n(Gate::L, shifts));
    if label.sign == Sign::Plus {
        w.extend((1..=n).map(Gate::P));
    }
    Ok(w)
}

pub fn compose_encoder(n: usize, h: &HadamardMatrix, label: BellLabel, a: usize) -> Result<CMat> {
    word_matrix(&encoder_word(n, h, label, a)?, n)
}

/// Controlled swap on Bob's channel when Alice's channel is negative.
pub fn pcs_gate(n: usize) -> CMat {
    let d = 2 * n;
    let mut m = CMat::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            let (l, mm) = (channel(a, n), channel(b, n));
            let m2 = if l < 0 { -mm } else { mm };
            m[(a * d + idx(m2, n), a * d + b)] = c(1.0, 0.0);
        }
    }
    m
}

/// U|s_l l, s_m m> = (1/√N) Σ_n G[m, wrap(m+n-1)] |s_l wrap(l+n-1), s_m wrap(m+n-1)>,
/// with G = H_N for negative Bob channels and H_N with adjacent rows and
/// columns swapped pairwise for positive ones.
pub fn u_gate(n: usize, hn: &HadamardMatrix) -> Result<CMat> {
    if hn.order() != n {
        return Err(EprError::OrderMismatch { expected: n, got: hn.order() });
    }
    let d = 2 * n;
    let pair: Vec<usize> = (0..n).map(|i| if (i ^ 1) < n { i ^ 1 } else { i }).collect();
    let pos = hn.permuted(&pair);
    let s = 1.0 / (n as f64).sqrt();
    let mut u = CMat::zeros(d * d, d * d);
    for l in 1..=n as i64 {
        for m in 1..=n as i64 {
            for sl in [1i64, -1] {
                for sm in [1i64, -1] {
                    let g = if sm < 0 { hn } else { &pos };
                    let col = idx(sl * l, n) * d + idx(sm * m, n);
                    for k in 1..=n as i64 {
                        let mw = wrap(m + k - 1, n);
                        let row = idx(sl * wrap(l + k - 1, n), n) * d + idx(sm * mw, n);
                        u[(row, col)] += c(g.get(m as usize - 1, mw as usize - 1) as f64 * s, 0.0);
                    }
                }
            }
        }
    }
    Ok(u)
}

/// (1/√N) Σ_{n=0}^{N-1} L^n ⊗ (A_n L^n) from a list of gate words A_n.
pub fn explicit_u(n: usize, terms: &[String]) -> Result<CMat> {
    let d = 2 * n;
    let l = gate_l(n);
    let mut lp = identity(d);
    let mut u = CMat::zeros(d * d, d * d);
    for t in terms {
        let a = word_matrix(&parse_word(t)?, n)?;
        u += kron(&lp, &(a * &lp));
        lp = &l * lp;
    }
    Ok(u.scale(1.0 / (n as f64).sqrt()))
}

fn all_n(n: usize) -> String {
    (1..=n).map(|i| format!("N{i}")).collect()
}

fn pn_pair(ks: &[usize]) -> String {
    ks.iter().map(|k| format!("P{k}N{k}P{k}N{k}")).collect()
}

/// Gate words of the hand-built U_(2), U_(4), U_(8).
pub fn explicit_u_terms(n: usize) -> Result<Vec<String>> {
    let sandwich = |p: &[usize]| {
        let ps: String = p.iter().map(|k| format!("P{k}")).collect();
        format!("{ps}{}{ps}", all_n(n))
    };
    Ok(match n {
        1 => vec![String::new()],
        2 => vec![sandwich(&[1]), String::new()],
        4 => vec![sandwich(&[1, 4]), pn_pair(&[4]), sandwich(&[1, 3]), pn_pair(&[3])],
        8 => vec![
            sandwich(&[1, 3, 6, 8]),
            pn_pair(&[5, 6, 8]),
            sandwich(&[1, 3, 6, 7]),
            pn_pair(&[3, 6, 7]),
            sandwich(&[1, 4, 5, 8]),
            pn_pair(&[3, 4, 8]),
            sandwich(&[1, 4, 5, 7]),
            pn_pair(&[4, 5, 7]),
        ],
        _ => return Err(EprError::Capability(format!("no explicit U for N={n}"))),
    })
}

/// Order-N Hadamard used by U: Sylvester, except at N=8 where the rows are
/// reordered to 1,2,5,6,7,8,3,4 (still symmetric).
pub fn u_hadamard(n: usize) -> Result<HadamardMatrix> {
    let s = HadamardMatrix::sylvester_order(n)?;
    Ok(if n == 8 { s.rows_permuted(&[0, 1, 4, 5, 6, 7, 2, 3]) } else { s })
}

/// Order-2N Hadamard matching the printed state tables: Sylvester for N=1,2,
/// K4'⊗H2 for N=4, Sylvester otherwise.
pub fn table_hadamard(n: usize) -> Result<HadamardMatrix> {
    if n == 4 {
        let k4 = HadamardMatrix::from_rows(&[
            vec![1, 1, 1, 1],
            vec![1, -1, -1, 1],
            vec![1, -1, 1, -1],
            vec![1, 1, -1, -1],
        ])?;
        return Ok(k4.kron(&HadamardMatrix::sylvester(1)?));
    }
    HadamardMatrix::sylvester_order(2 * n)
}

/// U · (H_{x1}..H_{xN} ⊗ I) · PCS.
pub fn bsm_chain(n: usize, hn: &HadamardMatrix) -> Result<CMat> {
    let u = u_gate(n, hn)?;
    Ok(u * kron(&hx_all(n), &identity(2 * n)) * pcs_gate(n))
}

/// 2N slots; slot |m| holds Alice's sign, slot N+|n| Bob's sign ('0' for +).
pub fn rename(m: i64, nb: i64, n: usize) -> String {
    let mut s = vec!['⊔'; 2 * n];
    s[m.unsigned_abs() as usize - 1] = if m > 0 { '0' } else { '1' };
    s[n + nb.unsigned_abs() as usize - 1] = if nb > 0 { '0' } else { '1' };
    s.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BsmResult {
    pub outcome: (i64, i64),
    pub label: BellLabel,
    pub renamed: String,
    /// Probability of the reported outcome.
    pub weight: f64,
    /// True when the chain output was a product ket within `EXACT_TOL`.
    pub exact: bool,
}

/// Bell-state measurement engine for one (N, H) pair.
#[derive(Debug, Clone)]
pub struct DenseCoder {
    n: usize,
    h: HadamardMatrix,
    chain: Option<CMat>,
    /// outcome basis index -> label
    decode: Vec<Option<BellLabel>>,
    bells: Vec<CVec>,
}

impl DenseCoder {
    pub fn new(n: usize, h: HadamardMatrix) -> Result<Self> {
        check_order(&h, n)?;
        let labels = BellLabel::all(n);
        let bells: Vec<CVec> = labels.iter().map(|&l| bell_state(n, &h, l)).collect::<Result<_>>()?;
        let chain = match u_hadamard(n) {
            Ok(hn) => Some(bsm_chain(n, &hn)?),
            Err(_) => None,
        };
        let mut decode = vec![None; 4 * n * n];
        let mut chain_ok = chain.is_some();
        if let Some(ch) = &chain {
            for (l, b) in labels.iter().zip(&bells) {
                let out = ch * b;
                let (i, w) = dominant(&out);
                if (w - 1.0).abs() > EXACT_TOL || decode[i].is_some() {
                    chain_ok = false;
                    break;
                }
                decode[i] = Some(*l);
            }
        }
        Ok(DenseCoder { n, h, chain: if chain_ok { chain } else { None }, decode, bells })
    }

    /// Uses the table Hadamard for this N.
    pub fn with_table_hadamard(n: usize) -> Result<Self> {
        Self::new(n, table_hadamard(n)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hadamard(&self) -> &HadamardMatrix {
        &self.h
    }

    pub fn bell(&self, label: BellLabel) -> &CVec {
        &self.bells[label.flat(self.n) - 1]
    }

    pub fn has_chain(&self) -> bool {
        self.chain.is_some()
    }

    pub fn chain(&self) -> Option<&CMat> {
        self.chain.as_ref()
    }

    /// Runs the gate chain and reads out a product ket.
    pub fn bsm_dense(&self, state: &CVec) -> Result<BsmResult> {
        let d = 2 * self.n;
        if state.len() != d * d {
            return Err(EprError::Dimension { expected: d * d, got: state.len() });
        }
        let ch = self.chain.as_ref().ok_or_else(|| {
            EprError::Capability(format!(
                "no Bell-diagonalizing gate chain for N={}; use projective measurement",
                self.n
            ))
        })?;
        let out = ch * state;
        let (i, w) = dominant(&out);
        let total = out.norm_squared();
        let weight = w / total;
        if weight <= AMBIGUITY_WEIGHT {
            return Err(EprError::Ambiguity { weight: 1.0 - weight });
        }
        let label = self.decode[i].expect("chain is a bijection");
        let (m, nb) = (channel(i / d, self.n), channel(i % d, self.n));
        Ok(BsmResult {
            outcome: (m, nb),
            label,
            renamed: rename(m, nb, self.n),
            weight,
            exact: (weight - 1.0).abs() <= EXACT_TOL,
        })
    }

    /// Projective measurement in the Bell basis; works for any admissible N.
    pub fn bsm_project(&self, state: &CVec) -> Result<(BellLabel, f64)> {
        let d = 2 * self.n;
        if state.len() != d * d {
            return Err(EprError::Dimension { expected: d * d, got: state.len() });
        }
        let total = state.norm_squared();
        let (best, w) = self
            .bells
            .iter()
            .enumerate()
            .map(|(i, b)| (i, b.dotc(state).norm_sqr() / total))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if w <= AMBIGUITY_WEIGHT {
            return Err(EprError::Ambiguity { weight: 1.0 - w });
        }
        Ok((BellLabel::from_flat(self.n, best + 1)?, w))
    }

    /// Alice encodes `label` on her half of the initial pair.
    pub fn encoded_pair(&self, label: BellLabel) -> Result<CVec> {
        let o = encode_operator(self.n, &self.h, label)?;
        let psi1 = self.bell(BellLabel { k: 1, sign: Sign::Minus, j: 1 });
        Ok(kron(&o, &identity(2 * self.n)) * psi1)
    }

    pub fn message_bits(&self) -> Option<usize> {
        let d = 2 * self.n;
        d.is_power_of_two().then(|| 2 * d.trailing_zeros() as usize)
    }

    /// Message (integer in [0, 4N²)) -> Bell label -> encode -> BSM -> message.
    pub fn roundtrip(&self, message: usize) -> Result<RoundTrip> {
        let n = self.n;
        let label = BellLabel::from_flat(n, message + 1)?;
        let state = self.encoded_pair(label)?;
        let r = match self.bsm_dense(&state) {
            Ok(r) => r,
            Err(EprError::Capability(_)) => {
                let (l, w) = self.bsm_project(&state)?;
                BsmResult { outcome: (0, 0), label: l, renamed: String::new(), weight: w, exact: (w - 1.0).abs() <= EXACT_TOL }
            }
            Err(e) => return Err(e),
        };
        let out = r.label.flat(n) - 1;
        let bits = self.message_bits();
        Ok(RoundTrip {
            n,
            label,
            outcome: [r.outcome.0, r.outcome.1],
            renamed: r.renamed,
            message_in: encode_message(message, bits),
            message_out: encode_message(out, bits),
        })
    }
}

fn dominant(v: &CVec) -> (usize, f64) {
    v.iter()
        .enumerate()
        .map(|(i, z)| (i, z.norm_sqr()))
        .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc })
}

/// Bit string (MSB first) when the width is known, decimal otherwise.
pub fn encode_message(m: usize, bits: Option<usize>) -> String {
    match bits {
        Some(0) => String::new(),
        Some(b) => format!("{m:0b$b}"),
        None => m.to_string(),
    }
}

pub fn decode_message(s: &str, bits: Option<usize>) -> Result<usize> {
    match bits {
        Some(b) => {
            if s.len() != b || !s.chars().all(|c| c == '0' || c == '1') {
                return Err(EprError::Config(format!("message {s:?} is not a {b}-bit string")));
            }
            if b == 0 {
                return Ok(0);
            }
            usize::from_str_radix(s, 2).map_err(|e| EprError::Config(e.to_string()))
        }
        None => s.parse().map_err(|_| EprError::Config(format!("message {s:?} is not an integer"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTrip {
    #[serde(rename = "N")]
    pub n: usize,
    pub label: BellLabel,
    pub outcome: [i64; 2],
    pub renamed: String,
    pub message_in: String,
    pub message_out: String,
}

/// Adds seeded complex Gaussian noise of scale `eps` to every amplitude and renormalizes.
pub fn perturb(state: &CVec, eps: f64, seed: u64) -> CVec {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut v = state.map(|z| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        z + Complex64::new(re, im) * eps
    });
    let nrm = v.norm();
    v /= c(nrm, 0.0);
    v
}

// ---------------------------------------------------------------- rates

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateTimes {
    pub t_c: f64,
    pub t_h: f64,
    pub t_p: f64,
    pub t_u: f64,
}

impl GateTimes {
    /// t_c = t_h = t, t_p = 4t, t_u = N t.
    pub fn equal(t: f64, n: usize) -> Self {
        GateTimes { t_c: t, t_h: t, t_p: 4.0 * t, t_u: n as f64 * t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rates {
    pub r_x: f64,
    pub r_p: f64,
    pub r_m: f64,
    /// pairwise and maximally entangled rates, corrected count
    pub rc_p: f64,
    pub rc_m: f64,
    /// same, per sent particle
    pub rc_p_per_particle: f64,
    pub rc_m_per_particle: f64,
    pub ratio_x_over_p: f64,
}

/// `n` is the channel count of the position scheme, `qn` the qubit count of
/// the pairwise/maximally entangled schemes.
pub fn info_rates(n: usize, qn: usize, t: GateTimes) -> Result<Rates> {
    if [t.t_c, t.t_h, t.t_p, t.t_u].iter().any(|&x| !(x > 0.0)) {
        return Err(EprError::Config("gate times must be positive".into()));
    }
    if n == 0 || qn < 2 {
        return Err(EprError::Config("need N >= 1 and qubit count >= 2".into()));
    }
    let (nf, q) = (n as f64, qn as f64);
    let r_x = 2.0 * (2.0 * nf).log2() / (t.t_p + t.t_h + t.t_u);
    let r_p = 2.0 * q / (q * q * (t.t_c + t.t_h));
    let r_m = q / ((q - 1.0) * ((q - 1.0) * t.t_c + t.t_h));
    Ok(Rates {
        r_x,
        r_p,
        r_m,
        rc_p: 2.0 * nf / (nf * (t.t_h + t.t_c)),
        rc_m: (nf + 1.0) / (t.t_h + nf * t.t_c),
        rc_p_per_particle: 2.0 / (nf * (t.t_h + t.t_c)),
        rc_m_per_particle: (nf + 1.0) / (nf * (t.t_h + nf * t.t_c)),
        ratio_x_over_p: r_x / r_p,
    })
}

// ---------------------------------------------------------------- spin

#[derive(Debug, Clone, Serialize)]
pub struct SpinExtension {
    pub dimension: usize,
    pub capacity_bits: f64,
    /// max deviation of Alice's reduced density from I/dimension
    pub reduced_deviation: f64,
    /// max deviation of the state from the position ⊗ spin product
    pub factor_deviation: f64,
}

/// Position pair ⊗ spin pair Σ_s (-1)^s |S-s, -(S-s)>, as a vector over
/// (alice_x, alice_s, bob_x, bob_s).
pub fn spin_extended_state(n: usize, two_s: usize, h: &HadamardMatrix) -> Result<CVec> {
    let psi = initial_state(n, h)?;
    let ds = two_s + 1;
    let mut spin = CVec::zeros(ds * ds);
    // spin index i <-> m = S - i; partner m' = -m <-> index 2S - i
    for i in 0..ds {
        let sg = if i % 2 == 0 { 1.0 } else { -1.0 };
        spin[i * ds + (two_s - i)] = c(sg / (ds as f64).sqrt(), 0.0);
    }
    let d = 2 * n;
    let mut out = CVec::zeros(d * ds * d * ds);
    for ax in 0..d {
        for bx in 0..d {
            let p = psi[ax * d + bx];
            if p.norm() == 0.0 {
                continue;
            }
            for as_ in 0..ds {
                for bs in 0..ds {
                    out[(ax * ds + as_) * d * ds + bx * ds + bs] = p * spin[as_ * ds + bs];
                }
            }
        }
    }
    Ok(out)
}

pub fn spin_extended_dim(n: usize, two_s: usize, h: &HadamardMatrix) -> Result<SpinExtension> {
    let ds = two_s + 1;
    let dim = 2 * n * ds;
    let state = spin_extended_state(n, two_s, h)?;
    let rho = crate::numkit::reduce_to_first(&state, dim, dim);
    let target = identity(dim).scale(1.0 / dim as f64);
    // factorization: reshape by (alice_x,bob_x) x (alice_s,bob_s) and compare
    // against the outer product of its marginal factors
    let d = 2 * n;
    let psi = initial_state(n, h)?;
    let mut spin = CVec::zeros(ds * ds);
    for i in 0..ds {
        let sg = if i % 2 == 0 { 1.0 } else { -1.0 };
        spin[i * ds + (two_s - i)] = c(sg / (ds as f64).sqrt(), 0.0);
    }
    let mut dev: f64 = 0.0;
    for ax in 0..d {
        for as_ in 0..ds {
            for bx in 0..d {
                for bs in 0..ds {
                    let v = state[(ax * ds + as_) * d * ds + bx * ds + bs];
                    dev = dev.max((v - psi[ax * d + bx] * spin[as_ * ds + bs]).norm());
                }
            }
        }
    }
    Ok(SpinExtension {
        dimension: dim,
        capacity_bits: 2.0 * (dim as f64).log2(),
        reduced_deviation: crate::numkit::max_abs_diff(&rho, &target),
        factor_deviation: dev,
    })
}

// ---------------------------------------------------------------- tables

#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    pub row: usize,
    pub label: BellLabel,
    pub operator: String,
    /// signed kets with the 1/√2N factor dropped, e.g. "+|1,-1> +|-1,1>"
    pub state: String,
    pub outcome: Option<(i64, i64)>,
    pub renamed: Option<String>,
}

/// Kets of a pair state with their signs, in basis order.
pub fn format_pair_state(v: &CVec, n: usize) -> String {
    let d = 2 * n;
    let s = (d as f64).sqrt();
    let mut terms = Vec::new();
    for i in 0..d * d {
        let a = v[i].re * s;
        if a.abs() > 0.5 {
            let sign = if a > 0.0 { '+' } else { '-' };
            terms.push(format!("{sign}|{},{}>", channel(i / d, n), channel(i % d, n)));
        }
    }
    terms.join(" ")
}

/// Encoding table (operator applied by Alice and resulting state) and
/// measurement outcome for every label.
pub fn dense_table(n: usize) -> Result<Vec<TableRow>> {
    let coder = DenseCoder::with_table_hadamard(n)?;
    let h = coder.hadamard().clone();
    let psi1 = initial_state(n, &h)?;
    BellLabel::all(n)
        .into_iter()
        .map(|label| {
            let w = encoder_word(n, &h, label, 1)?;
            let st = kron(&word_matrix(&w, n)?, &identity(2 * n)) * &psi1;
            let r = coder.bsm_dense(&st).ok();
            Ok(TableRow {
                row: label.flat(n),
                label,
                operator: format_word(&w),
                state: format_pair_state(&st, n),
                outcome: r.as_ref().map(|r| r.outcome),
                renamed: r.map(|r| r.renamed),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{diff_up_to_sign, max_abs_diff, unitarity_deviation};

    #[test]
    fn mod_shift_examples() {
        assert_eq!(mod_shift(3, 1, Sign::Plus, 4), 3);
        assert_eq!(mod_shift(4, 2, Sign::Plus, 4), 1);
        assert_eq!(mod_shift(2, 1, Sign::Minus, 4), -2);
    }

    #[test]
    fn flat_codes_round_trip() {
        for n in [1, 2, 3, 4] {
            for code in 1..=4 * n * n {
                assert_eq!(BellLabel::from_flat(n, code).unwrap().flat(n), code);
            }
        }
        let l = BellLabel::from_flat(2, 11).unwrap();
        assert_eq!((l.k, l.sign, l.j), (2, Sign::Minus, 3));
    }

    #[test]
    fn gate_algebra() {
        let n = 3;
        let i = identity(2 * n);
        for k in 1..=n {
            let p = gate_p(k, n);
            assert!(max_abs_diff(&(&p * &p), &i) < 1e-15);
            let hx = gate_hx(k, n);
            assert!(max_abs_diff(&(&hx * &hx), &i) < 1e-15);
        }
        let l = gate_l(n);
        assert!(max_abs_diff(&(&l * &l * &l), &i) < 1e-15);
        let neg = gate_n(2, n);
        assert_eq!(neg[(idx(-2, n), idx(-2, n))].re, -1.0);
        assert_eq!(neg[(idx(2, n), idx(2, n))].re, 1.0);
    }

    #[test]
    fn word_parse_and_format() {
        let w = parse_word("L^3P1P2 N1").unwrap();
        assert_eq!(w, vec![Gate::L, Gate::L, Gate::L, Gate::P(1), Gate::P(2), Gate::N(1)]);
        assert_eq!(format_word(&w), "L^3P1P2N1");
        assert!(parse_word("X1").is_err());
        assert_eq!(format_word(&parse_word("I").unwrap()), "I");
    }

    #[test]
    fn n1_bell_and_encoders() {
        let h = table_hadamard(1).unwrap();
        let b = bell_state(1, &h, BellLabel { k: 1, sign: Sign::Minus, j: 1 }).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((b[1].re - r).abs() < 1e-15 && (b[2].re - r).abs() < 1e-15);
        let o = encode_operator(1, &h, BellLabel { k: 1, sign: Sign::Minus, j: 2 }).unwrap();
        assert!(max_abs_diff(&o, &gate_n(1, 1)) < 1e-15);
        let o = encode_operator(1, &h, BellLabel { k: 1, sign: Sign::Minus, j: 1 }).unwrap();
        assert!(max_abs_diff(&o, &identity(2)) < 1e-15);
    }

    #[test]
    fn compose_matches_encode() {
        for n in [1, 2, 4] {
            let h = table_hadamard(n).unwrap();
            for l in BellLabel::all(n) {
                let a = compose_encoder(n, &h, l, 1).unwrap();
                let b = encode_operator(n, &h, l).unwrap();
                assert!(diff_up_to_sign(&a, &b) < 1e-12, "N={n} {l}");
            }
        }
    }

    #[test]
    fn chain_pieces_unitary() {
        for n in [1, 2, 4] {
            let hn = u_hadamard(n).unwrap();
            let u = u_gate(n, &hn).unwrap();
            assert!(unitarity_deviation(&u) < 1e-10);
            assert!(max_abs_diff(&(&u * &u), &identity(4 * n * n)) < 1e-10);
            let p = pcs_gate(n);
            assert!(max_abs_diff(&(&p * &p), &identity(4 * n * n)) < 1e-15);
        }
    }

    #[test]
    fn pcs_examples() {
        let p = pcs_gate(1);
        let d = 2;
        assert_eq!(p[(idx(1, 1) * d + idx(-1, 1), idx(1, 1) * d + idx(-1, 1))].re, 1.0);
        assert_eq!(p[(idx(-1, 1) * d + idx(1, 1), idx(-1, 1) * d + idx(-1, 1))].re, 1.0);
    }

    #[test]
    fn rename_examples() {
        assert_eq!(rename(1, -1, 1), "01");
        assert_eq!(rename(1, -2, 2), "0⊔⊔1");
    }

    #[test]
    fn messages() {
        assert_eq!(encode_message(5, Some(6)), "000101");
        assert_eq!(decode_message("000101", Some(6)).unwrap(), 5);
        assert_eq!(encode_message(7, None), "7");
        assert!(decode_message("012", Some(3)).is_err());
    }
}
