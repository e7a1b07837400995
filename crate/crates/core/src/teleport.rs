//! Teleportation of 2N-channel position states through the Bell basis,
//! plus the momentum, planar, spin and combined position-momentum variants.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::densecode::{self, channel, idx, BellLabel, DenseCoder, Sign};
use crate::error::{EprError, Result};
use crate::numkit::{c, fidelity, CMat, CVec, HadamardMatrix};

/// O'_{k±,j}: Σ_n h_{j,2n-1}|n><-f(n)| + h_{j,2n}|-n><f(n)|.
pub fn reconstruction_operator(n: usize, h: &HadamardMatrix, label: BellLabel) -> Result<CMat> {
    densecode::encode_operator(n, h, label)
}

fn check_dim(phi: &CVec, d: usize) -> Result<()> {
    if phi.len() != d {
        return Err(EprError::Dimension { expected: d, got: phi.len() });
    }
    if (phi.norm() - 1.0).abs() > 1e-12 {
        return Err(EprError::State(format!("state norm {} is not 1", phi.norm())));
    }
    Ok(())
}

/// Zero-pads a state with fewer than `d` amplitudes.
pub fn pad_state(phi: &CVec, d: usize) -> Result<CVec> {
    if phi.len() > d {
        return Err(EprError::Dimension { expected: d, got: phi.len() });
    }
    let mut v = CVec::zeros(d);
    v.rows_mut(0, phi.len()).copy_from(phi);
    Ok(v)
}

#[derive(Debug, Clone)]
pub struct Residual {
    pub label: BellLabel,
    /// O'† φ
    pub state: CVec,
    pub probability: f64,
}

/// φ ⊗ ψ1 = (1/2N) Σ |ψ_label> ⊗ O'†_label φ.
pub fn bell_expand(phi: &CVec, n: usize, h: &HadamardMatrix) -> Result<Vec<Residual>> {
    check_dim(phi, 2 * n)?;
    let p = 1.0 / (4 * n * n) as f64;
    BellLabel::all(n)
        .into_iter()
        .map(|label| {
            let o = reconstruction_operator(n, h, label)?;
            let state = o.adjoint() * phi;
            Ok(Residual { label, probability: p * state.norm_squared(), state })
        })
        .collect()
}

/// Right-hand side of the expansion, as a vector over (x0, x1, x2).
pub fn reassemble(residuals: &[Residual], n: usize, h: &HadamardMatrix) -> Result<CVec> {
    let d = 2 * n;
    let mut out = CVec::zeros(d * d * d);
    for r in residuals {
        let b = densecode::bell_state(n, h, r.label)?;
        out += b.kronecker(&r.state);
    }
    Ok(out.scale(1.0 / d as f64))
}

/// Bob's unnormalized conditional state after Alice projects (x0, x1) on `bell`.
fn project(bell: &CVec, phi: &CVec, psi1: &CVec, d: usize) -> CVec {
    let mut bob = CVec::zeros(d);
    for x0 in 0..d {
        if phi[x0].norm_sqr() == 0.0 {
            continue;
        }
        for x1 in 0..d {
            let w = bell[x0 * d + x1].conj() * phi[x0];
            if w.norm_sqr() == 0.0 {
                continue;
            }
            for x2 in 0..d {
                bob[x2] += w * psi1[x1 * d + x2];
            }
        }
    }
    bob
}

#[derive(Debug, Clone, Serialize)]
pub struct TeleportReport {
    pub n: usize,
    pub m: Option<usize>,
    pub outcome_position: BellLabel,
    #[serde(serialize_with = "momentum_label")]
    pub outcome_momentum: Option<BellLabel>,
    pub probability: f64,
    pub fidelity: f64,
    pub seed: Option<u64>,
    #[serde(skip)]
    pub bob_before: CVec,
    #[serde(skip)]
    pub bob_after: CVec,
}

// momentum outcomes are reported as {q, sign, r}
fn momentum_label<S: serde::Serializer>(l: &Option<BellLabel>, s: S) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct M {
        q: usize,
        sign: Sign,
        r: usize,
    }
    match l {
        Some(l) => M { q: l.k, sign: l.sign, r: l.j }.serialize(s),
        None => s.serialize_none(),
    }
}

/// Exact outcome distribution for a 1D teleport, by projection.
#[derive(Debug, Clone)]
pub struct Teleporter {
    n: usize,
    h: HadamardMatrix,
    coder: DenseCoder,
    psi1: CVec,
}

impl Teleporter {
    pub fn new(n: usize, h: HadamardMatrix) -> Result<Self> {
        let coder = DenseCoder::new(n, h.clone())?;
        let psi1 = densecode::initial_state(n, &h)?;
        Ok(Teleporter { n, h, coder, psi1 })
    }

    pub fn sylvester(n: usize) -> Result<Self> {
        Self::new(n, HadamardMatrix::sylvester_order(2 * n)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hadamard(&self) -> &HadamardMatrix {
        &self.h
    }

    /// Bob's unnormalized states and probabilities for every label, in flat order.
    pub fn branches(&self, phi: &CVec) -> Result<Vec<(BellLabel, f64, CVec)>> {
        let d = 2 * self.n;
        check_dim(phi, d)?;
        Ok(BellLabel::all(self.n)
            .into_iter()
            .map(|l| {
                let bob = project(self.coder.bell(l), phi, &self.psi1, d);
                (l, bob.norm_squared(), bob)
            })
            .collect())
    }

    pub fn probabilities(&self, phi: &CVec) -> Result<Vec<f64>> {
        Ok(self.branches(phi)?.into_iter().map(|b| b.1).collect())
    }

    /// Teleport with a given measurement outcome.
    pub fn forced(&self, phi: &CVec, label: BellLabel) -> Result<TeleportReport> {
        self.forced_with_corrector(phi, label, label)
    }

    /// Bob applies the corrector for `applied` although Alice saw `seen`.
    pub fn forced_with_corrector(&self, phi: &CVec, seen: BellLabel, applied: BellLabel) -> Result<TeleportReport> {
        let d = 2 * self.n;
        check_dim(phi, d)?;
        let bob = project(self.coder.bell(seen), phi, &self.psi1, d);
        let p = bob.norm_squared();
        let before = bob.unscale(p.sqrt());
        let after = reconstruction_operator(self.n, &self.h, applied)? * &before;
        Ok(TeleportReport {
            n: self.n,
            m: None,
            outcome_position: seen,
            outcome_momentum: None,
            probability: p,
            fidelity: fidelity(phi, &after),
            seed: None,
            bob_before: before,
            bob_after: after,
        })
    }

    /// Samples the outcome with its exact probability.
    pub fn simulate(&self, phi: &CVec, seed: u64) -> Result<TeleportReport> {
        let probs = self.probabilities(phi)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let i = WeightedIndex::new(&probs).map_err(|e| EprError::State(e.to_string()))?.sample(&mut rng);
        let mut r = self.forced(phi, BellLabel::from_flat(self.n, i + 1)?)?;
        r.seed = Some(seed);
        Ok(r)
    }

    /// Alice measures with the gate chain and reads a product ket; returns
    /// the label decoded from that ket and Bob's normalized state, for every
    /// outcome with nonzero weight.
    pub fn chain_branches(&self, phi: &CVec) -> Result<Vec<(BellLabel, CVec)>> {
        let d = 2 * self.n;
        check_dim(phi, d)?;
        let ch = self
            .coder
            .chain()
            .ok_or_else(|| EprError::Capability(format!("no gate chain for N={}", self.n)))?;
        let mut out = Vec::new();
        for col in 0..d * d {
            // <col| C on (x0, x1) is row `col` of C
            let row = ch.row(col).transpose();
            let mut bob = CVec::zeros(d);
            for a in 0..d * d {
                let w = row[a];
                if w.norm_sqr() == 0.0 {
                    continue;
                }
                let (x0, x1) = (a / d, a % d);
                for x2 in 0..d {
                    bob[x2] += w * phi[x0] * self.psi1[x1 * d + x2];
                }
            }
            let p = bob.norm_squared();
            if p < 1e-14 {
                continue;
            }
            let bell = ch.adjoint().column(col).into_owned();
            let label = self.coder.bsm_dense(&bell)?.label;
            out.push((label, bob.unscale(p.sqrt())));
        }
        Ok(out)
    }
}

/// Random unit vector from a seed.
pub fn random_state(d: usize, seed: u64) -> CVec {
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = CVec::from_fn(d, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        c(re, im)
    });
    let nrm = v.norm();
    v.unscale(nrm)
}

// ---------------------------------------------------------------- momentum

/// Momentum channel set |±p_1>..|±p_M>.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumConfig {
    pub m: usize,
    pub p: Vec<f64>,
}

impl MomentumConfig {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|&x| !(x > 0.0)) || p.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EprError::Config("momentum magnitudes must be positive and increasing".into()));
        }
        Ok(MomentumConfig { m: p.len(), p })
    }

    /// Signed momentum value of a basis position.
    pub fn momentum(&self, i: usize) -> f64 {
        let ch = channel(i, self.m);
        ch.signum() as f64 * self.p[ch.unsigned_abs() as usize - 1]
    }
}

/// Momentum gates; each is the position gate with the channels relabeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentumGate {
    /// negates |-p_m>
    Parity(usize),
    /// swaps |p_m> and |-p_m>
    Reversal(usize),
    /// |±p_m> -> |±p_{m+1}>
    Drift,
    /// Hadamard on the {|p_m>, |-p_m>} pair
    Hadamard(usize),
}

pub fn momentum_gate(g: MomentumGate, cfg: &MomentumConfig) -> CMat {
    let m = cfg.m;
    match g {
        MomentumGate::Parity(k) => densecode::gate_n(k, m),
        MomentumGate::Reversal(k) => densecode::gate_p(k, m),
        MomentumGate::Drift => densecode::gate_l(m),
        MomentumGate::Hadamard(k) => densecode::gate_hx(k, m),
    }
}

pub fn momentum_bell_state(cfg: &MomentumConfig, h: &HadamardMatrix, label: BellLabel) -> Result<CVec> {
    densecode::bell_state(cfg.m, h, label)
}

/// T_{q±,r}, the momentum counterpart of O'.
pub fn momentum_reconstruction(cfg: &MomentumConfig, h: &HadamardMatrix, label: BellLabel) -> Result<CMat> {
    reconstruction_operator(cfg.m, h, label)
}

/// V_(M): U_(M) on momentum channels.
pub fn v_gate(cfg: &MomentumConfig, hm: &HadamardMatrix) -> Result<CMat> {
    densecode::u_gate(cfg.m, hm)
}

/// Momentum-controlled reversal: PCS on momentum channels.
pub fn mcr_gate(cfg: &MomentumConfig) -> CMat {
    densecode::pcs_gate(cfg.m)
}

// ---------------------------------------------------------------- planar

/// Maps (nx, ny), both signed, to a signed channel of the flattened
/// N = 2 Nx Ny problem. (nx, ny) and (-nx, -ny) map to ±n.
pub fn flatten_xy(nx: i64, ny: i64, big_ny: usize) -> i64 {
    let (ax, ay) = if nx > 0 { (nx, ny) } else { (-nx, -ny) };
    let col = if ay > 0 { ay } else { big_ny as i64 - ay };
    let n = (ax - 1) * 2 * big_ny as i64 + col;
    if nx > 0 {
        n
    } else {
        -n
    }
}

pub fn unflatten_xy(ch: i64, big_ny: usize) -> (i64, i64) {
    let a = ch.abs() - 1;
    let ax = a / (2 * big_ny as i64) + 1;
    let col = a % (2 * big_ny as i64) + 1;
    let ay = if col <= big_ny as i64 { col } else { -(col - big_ny as i64) };
    if ch > 0 {
        (ax, ay)
    } else {
        (-ax, -ay)
    }
}

/// Reorders a state over (x channel, y channel) into the flattened 1D basis.
pub fn flatten_xy_state(phi_xy: &CVec, nx: usize, ny: usize) -> Result<CVec> {
    let (dx, dy) = (2 * nx, 2 * ny);
    if phi_xy.len() != dx * dy {
        return Err(EprError::Dimension { expected: dx * dy, got: phi_xy.len() });
    }
    let n = 2 * nx * ny;
    let mut v = CVec::zeros(2 * n);
    for ix in 0..dx {
        for iy in 0..dy {
            let ch = flatten_xy(channel(ix, nx), channel(iy, ny), ny);
            v[idx(ch, n)] = phi_xy[ix * dy + iy];
        }
    }
    Ok(v)
}

pub fn teleport_2d(phi_xy: &CVec, nx: usize, ny: usize, h: &HadamardMatrix, seed: u64) -> Result<TeleportReport> {
    let n = 2 * nx * ny;
    if h.order() != 2 * n {
        return Err(EprError::OrderMismatch { expected: 2 * n, got: h.order() });
    }
    let flat = flatten_xy_state(phi_xy, nx, ny)?;
    Teleporter::new(n, h.clone())?.simulate(&flat, seed)
}

// ---------------------------------------------------------------- spin

/// (channel, spin index) -> channel of the N(2S+1) problem.
pub fn flatten_spin(ch: i64, s_index: usize, two_s: usize) -> i64 {
    let ds = (two_s + 1) as i64;
    ch.signum() * ((ch.abs() - 1) * ds + s_index as i64 + 1)
}

pub fn flatten_spin_state(phi_xs: &CVec, n: usize, two_s: usize) -> Result<CVec> {
    let ds = two_s + 1;
    let d = 2 * n;
    if phi_xs.len() != d * ds {
        return Err(EprError::Dimension { expected: d * ds, got: phi_xs.len() });
    }
    let ne = n * ds;
    let mut v = CVec::zeros(2 * ne);
    for ix in 0..d {
        for is in 0..ds {
            v[idx(flatten_spin(channel(ix, n), is, two_s), ne)] = phi_xs[ix * ds + is];
        }
    }
    Ok(v)
}

pub fn teleport_with_spin(phi_xs: &CVec, n: usize, two_s: usize, h_ext: &HadamardMatrix, seed: u64) -> Result<TeleportReport> {
    let ne = n * (two_s + 1);
    if h_ext.order() != 2 * ne {
        return Err(EprError::OrderMismatch { expected: 2 * ne, got: h_ext.order() });
    }
    let flat = flatten_spin_state(phi_xs, n, two_s)?;
    Teleporter::new(ne, h_ext.clone())?.simulate(&flat, seed)
}

// ---------------------------------------------------------------- 3D

/// Position ⊗ momentum teleport with two independent Bell measurements.
#[derive(Debug, Clone)]
pub struct Teleporter3d {
    x: Teleporter,
    p: Teleporter,
}

impl Teleporter3d {
    pub fn new(n: usize, hx: HadamardMatrix, m: usize, hp: HadamardMatrix) -> Result<Self> {
        Ok(Teleporter3d { x: Teleporter::new(n, hx)?, p: Teleporter::new(m, hp)? })
    }

    fn dims(&self) -> (usize, usize) {
        (2 * self.x.n, 2 * self.p.n)
    }

    /// Bob's unnormalized state over (x2, p2) for outcome pair.
    fn project(&self, phi: &CVec, lx: BellLabel, lp: BellLabel) -> CVec {
        let (d, e) = self.dims();
        let bx = self.x.coder.bell(lx);
        let bp = self.p.coder.bell(lp);
        let (sx, sp) = (&self.x.psi1, &self.p.psi1);
        // contract x first: A[p0, x2, x1-summed] then p
        let mut t = vec![c(0.0, 0.0); e * d]; // (p0, x2)
        for x0 in 0..d {
            for x1 in 0..d {
                let w = bx[x0 * d + x1].conj();
                if w.norm_sqr() == 0.0 {
                    continue;
                }
                for x2 in 0..d {
                    let s = sx[x1 * d + x2];
                    if s.norm_sqr() == 0.0 {
                        continue;
                    }
                    for p0 in 0..e {
                        t[p0 * d + x2] += w * s * phi[x0 * e + p0];
                    }
                }
            }
        }
        let mut bob = CVec::zeros(d * e);
        for p0 in 0..e {
            for p1 in 0..e {
                let w = bp[p0 * e + p1].conj();
                if w.norm_sqr() == 0.0 {
                    continue;
                }
                for p2 in 0..e {
                    let s = sp[p1 * e + p2];
                    if s.norm_sqr() == 0.0 {
                        continue;
                    }
                    for x2 in 0..d {
                        bob[x2 * e + p2] += w * s * t[p0 * d + x2];
                    }
                }
            }
        }
        bob
    }

    pub fn outcome_pairs(&self) -> Vec<(BellLabel, BellLabel)> {
        let xs = BellLabel::all(self.x.n);
        let ps = BellLabel::all(self.p.n);
        xs.iter().flat_map(|&a| ps.iter().map(move |&b| (a, b))).collect()
    }

    pub fn probabilities(&self, phi: &CVec) -> Result<Vec<f64>> {
        let (d, e) = self.dims();
        check_dim(phi, d * e)?;
        Ok(self.outcome_pairs().into_iter().map(|(a, b)| self.project(phi, a, b).norm_squared()).collect())
    }

    pub fn forced(&self, phi: &CVec, lx: BellLabel, lp: BellLabel) -> Result<TeleportReport> {
        let (d, e) = self.dims();
        check_dim(phi, d * e)?;
        let bob = self.project(phi, lx, lp);
        let p = bob.norm_squared();
        let before = bob.unscale(p.sqrt());
        let o = reconstruction_operator(self.x.n, &self.x.h, lx)?;
        let t = reconstruction_operator(self.p.n, &self.p.h, lp)?;
        let after = o.kronecker(&t) * &before;
        Ok(TeleportReport {
            n: self.x.n,
            m: Some(self.p.n),
            outcome_position: lx,
            outcome_momentum: Some(lp),
            probability: p,
            fidelity: fidelity(phi, &after),
            seed: None,
            bob_before: before,
            bob_after: after,
        })
    }

    pub fn simulate(&self, phi: &CVec, seed: u64) -> Result<TeleportReport> {
        let probs = self.probabilities(phi)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let i = WeightedIndex::new(&probs).map_err(|e| EprError::State(e.to_string()))?.sample(&mut rng);
        let (a, b) = self.outcome_pairs()[i];
        let mut r = self.forced(phi, a, b)?;
        r.seed = Some(seed);
        Ok(r)
    }
}

/// Draws `count` outcome indices from a fixed distribution with one seeded stream.
pub fn sample_outcomes(probs: &[f64], count: usize, seed: u64) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(probs).map_err(|e| EprError::State(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hist = vec![0usize; probs.len()];
    for _ in 0..count {
        hist[dist.sample(&mut rng)] += 1;
    }
    Ok(hist)
}

/// Label for the first family member, used as a default.
pub fn identity_label() -> BellLabel {
    BellLabel { k: 1, sign: Sign::Minus, j: 1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{max_abs_diff, unitarity_deviation};

    #[test]
    fn n1_correctors() {
        let h = HadamardMatrix::sylvester(1).unwrap();
        let o = reconstruction_operator(1, &h, identity_label()).unwrap();
        assert!(max_abs_diff(&o, &crate::numkit::identity(2)) < 1e-15);
        let o = reconstruction_operator(1, &h, BellLabel { k: 1, sign: Sign::Plus, j: 1 }).unwrap();
        assert!(max_abs_diff(&o, &densecode::gate_p(1, 1)) < 1e-15);
    }

    #[test]
    fn reconstruction_unitary_n4() {
        let h = HadamardMatrix::sylvester(3).unwrap();
        for l in BellLabel::all(4) {
            assert!(unitarity_deviation(&reconstruction_operator(4, &h, l).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn flatten_xy_bijective() {
        let (nx, ny) = (2, 3);
        let n = 2 * nx * ny;
        let mut seen = std::collections::HashSet::new();
        for ix in 0..2 * nx {
            for iy in 0..2 * ny {
                let (a, b) = (channel(ix, nx), channel(iy, ny));
                let ch = flatten_xy(a, b, ny);
                assert!(ch != 0 && ch.unsigned_abs() as usize <= n);
                assert_eq!(unflatten_xy(ch, ny), (a, b));
                assert_eq!(flatten_xy(-a, -b, ny), -ch);
                assert!(seen.insert(ch));
            }
        }
    }

    #[test]
    fn pad_short_state() {
        let v = CVec::from_vec(vec![c(1.0, 0.0)]);
        let p = pad_state(&v, 4).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p[0].re, 1.0);
    }
}
