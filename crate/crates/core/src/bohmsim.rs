//! Entangled two-particle double-slit wavefunctions, Bohmian trajectories
//! and the matching standard-QM detection statistics.
//!
//! Only the transverse (y) motion is integrated; x is free plane-wave motion.
//! Times are physical; `PhysParams::a(t)` gives ħt/2mσ0².

use num_complex::Complex64 as C;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EprError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysParams {
    pub hbar: f64,
    pub mass: f64,
    pub sigma0: f64,
    pub slit_y: f64,
    #[serde(default)]
    pub slit_x: f64,
    pub k_x: f64,
    #[serde(default)]
    pub k_y: f64,
    pub screen_x: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams { hbar: 1.0, mass: 1.0, sigma0: 1.0, slit_y: 3.0, slit_x: 5.0, k_x: 20.0, k_y: 0.0, screen_x: 200.0 }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [("hbar", self.hbar), ("mass", self.mass), ("sigma0", self.sigma0), ("slit_y", self.slit_y), ("k_x", self.k_x), ("screen_x", self.screen_x)];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(EprError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("slit_x", self.slit_x), ("k_y", self.k_y)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(EprError::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// ħt / 2mσ0².
    pub fn a(&self, t: f64) -> f64 {
        self.hbar * t / (2.0 * self.mass * self.sigma0 * self.sigma0)
    }

    /// 2mσ0²/ħ.
    pub fn time_unit(&self) -> f64 {
        2.0 * self.mass * self.sigma0 * self.sigma0 / self.hbar
    }

    pub fn sigma_t(&self, t: f64) -> C {
        C::new(self.sigma0, self.sigma0 * self.a(t))
    }

    /// |σ_t|, the standard deviation of |ψ|² for one packet.
    pub fn width(&self, t: f64) -> f64 {
        self.sigma0 * (1.0 + self.a(t).powi(2)).sqrt()
    }

    /// Time at which x reaches the screen, D m / ħ k_x.
    pub fn screen_time(&self) -> f64 {
        self.screen_x * self.mass / (self.hbar * self.k_x)
    }

    fn vx(&self) -> f64 {
        self.hbar * self.k_x / self.mass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    TwoDoubleSlit,
    SingleDoubleSlitEntangled,
    SingleDoubleSlitDisentangled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exchange {
    Bosonic,
    Fermionic,
}

/// How the primed packets of the two-double-slit layout evolve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PacketConvention {
    /// A' and B' share the y-profile of A and B at all times.
    #[default]
    Printed,
    /// Free evolution of the t=0 primed packets: A' centred at -Y moving
    /// with +k_y, B' centred at +Y moving with -k_y.
    FreeEvolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: PhysParams,
    pub layout: Layout,
    #[serde(default = "default_exchange")]
    pub exchange: Exchange,
    #[serde(default)]
    pub com_y0: f64,
    #[serde(default)]
    pub com_spread: f64,
    #[serde(default)]
    pub packets: PacketConvention,
}

fn default_exchange() -> Exchange {
    Exchange::Bosonic
}

impl ExperimentConfig {
    pub fn new(params: PhysParams, layout: Layout, exchange: Exchange) -> Self {
        ExperimentConfig { params, layout, exchange, com_y0: 0.0, com_spread: 0.0, packets: PacketConvention::Printed }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.com_spread >= 0.0) || !self.com_y0.is_finite() {
            return Err(EprError::Config("com_spread must be >= 0 and com_y0 finite".into()));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(s).map_err(|e| EprError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    fn sign(&self) -> f64 {
        match (self.layout, self.exchange) {
            (Layout::SingleDoubleSlitDisentangled, _) => 1.0,
            (_, Exchange::Bosonic) => 1.0,
            (_, Exchange::Fermionic) => -1.0,
        }
    }

    /// Deterministic x positions at time t.
    pub fn x_at(&self, t: f64) -> (f64, f64) {
        let p = &self.params;
        match self.layout {
            Layout::TwoDoubleSlit => {
                let x = p.slit_x + p.vx() * t;
                (x, -x)
            }
            _ => (p.vx() * t, p.vx() * t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slit {
    A,
    B,
    APrime,
    BPrime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCoordinates {
    pub t: f64,
    pub y1: f64,
    pub y2: f64,
    pub x1: f64,
    pub x2: f64,
}

impl PairCoordinates {
    pub fn at(config: &ExperimentConfig, y1: f64, y2: f64, t: f64) -> Self {
        let (x1, x2) = config.x_at(t);
        PairCoordinates { t, y1, y2, x1, x2 }
    }
}

// ---------------------------------------------------------------- packets

/// Gaussian packet with initial centre `c` and transverse wavenumber `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Packet {
    c: f64,
    q: f64,
}

/// Packet constants at a fixed time: log g(y) = pre - (y - ct)² inv + i q y.
#[derive(Debug, Clone, Copy)]
struct PacketAt {
    ct: f64,
    inv: C,
    pre: C,
    q: f64,
}

impl Packet {
    fn at(&self, p: &PhysParams, t: f64) -> PacketAt {
        let st = p.sigma_t(t);
        let inv = 1.0 / (4.0 * p.sigma0 * st);
        let lnorm = -0.25 * (2.0 * std::f64::consts::PI * st * st).ln();
        let pre = lnorm - C::i() * (p.hbar * self.q * self.q * t / (2.0 * p.mass) + self.q * self.c);
        PacketAt { ct: self.c + p.hbar * self.q * t / p.mass, inv, pre, q: self.q }
    }
}

impl PacketAt {
    #[inline]
    fn log(&self, y: f64) -> C {
        let u = y - self.ct;
        self.pre - self.inv * (u * u) + C::new(0.0, self.q * y)
    }

    #[inline]
    fn dlog(&self, y: f64) -> C {
        -2.0 * (y - self.ct) * self.inv + C::new(0.0, self.q)
    }
}

fn slit_packet(slit: Slit, p: &PhysParams, conv: PacketConvention) -> Packet {
    let (y, k) = (p.slit_y, p.k_y);
    match (slit, conv) {
        (Slit::A, _) | (Slit::APrime, PacketConvention::Printed) => Packet { c: y, q: k },
        (Slit::B, _) | (Slit::BPrime, PacketConvention::Printed) => Packet { c: -y, q: -k },
        (Slit::APrime, PacketConvention::FreeEvolved) => Packet { c: -y, q: k },
        (Slit::BPrime, PacketConvention::FreeEvolved) => Packet { c: y, q: -k },
    }
}

/// Single-slit amplitude including the x plane wave.
pub fn slit_wave(slit: Slit, params: &PhysParams, conv: PacketConvention, x: f64, y: f64, t: f64) -> Result<C> {
    if t < 0.0 {
        return Err(EprError::Config("t must be >= 0".into()));
    }
    let pk = slit_packet(slit, params, conv).at(params, t);
    let kx = params.k_x;
    let xe = -params.hbar * kx * kx * t / (2.0 * params.mass);
    let xph = match slit {
        Slit::A | Slit::B => kx * (x - params.slit_x),
        Slit::APrime | Slit::BPrime => -kx * (x + params.slit_x),
    } + xe;
    Ok((pk.log(y) + C::new(0.0, xph)).exp())
}

/// Which particle travels towards +x; selects the plane-wave phase of a term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum XClass {
    None,
    FirstRight,
    FirstLeft,
}

#[derive(Debug, Clone, Copy)]
struct Term {
    p1: usize,
    p2: usize,
    sign: f64,
    x: XClass,
}

const A: usize = 0;
const B: usize = 1;
const AP: usize = 2;
const BP: usize = 3;

/// Precomputed term structure for a configuration.
#[derive(Debug, Clone)]
pub struct Field {
    cfg: ExperimentConfig,
    packets: [Packet; 4],
    /// terms of the full amplitude
    full: Vec<Term>,
    /// terms that drive y; the common x factor is dropped where it factors
    dynamic: Vec<Term>,
}

impl Field {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let p = &cfg.params;
        let conv = cfg.packets;
        let packets = [Slit::A, Slit::B, Slit::APrime, Slit::BPrime].map(|s| slit_packet(s, p, conv));
        let s = cfg.sign();
        let t = |p1, p2, sign, x| Term { p1, p2, sign, x };
        let (full, dynamic) = match cfg.layout {
            Layout::TwoDoubleSlit => {
                // A1B'2 ± A2B'1 + B1A'2 ± B2A'1
                let full = vec![
                    t(A, BP, 1.0, XClass::FirstRight),
                    t(BP, A, s, XClass::FirstLeft),
                    t(B, AP, 1.0, XClass::FirstRight),
                    t(AP, B, s, XClass::FirstLeft),
                ];
                let dynamic = match conv {
                    // (e^{iφa} ± e^{iφb}) (A1B2 + B1A2)
                    PacketConvention::Printed => vec![t(A, B, 1.0, XClass::None), t(B, A, 1.0, XClass::None)],
                    PacketConvention::FreeEvolved => full.clone(),
                };
                (full, dynamic)
            }
            Layout::SingleDoubleSlitEntangled => {
                let v = vec![t(A, B, 1.0, XClass::None), t(B, A, s, XClass::None)];
                (v.clone(), v)
            }
            Layout::SingleDoubleSlitDisentangled => {
                let v = vec![
                    t(A, A, 1.0, XClass::None),
                    t(A, B, 1.0, XClass::None),
                    t(B, A, 1.0, XClass::None),
                    t(B, B, 1.0, XClass::None),
                ];
                (v.clone(), v)
            }
        };
        Ok(Field { cfg: *cfg, packets, full, dynamic })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    fn frame(&self, t: f64) -> [PacketAt; 4] {
        self.packets.map(|pk| pk.at(&self.cfg.params, t))
    }

    fn xphase(&self, class: XClass, x1: f64, x2: f64) -> f64 {
        let (kx, d) = (self.cfg.params.k_x, self.cfg.params.slit_x);
        match class {
            XClass::None => 0.0,
            XClass::FirstRight => kx * (x1 - d) - kx * (x2 + d),
            XClass::FirstLeft => kx * (x2 - d) - kx * (x1 + d),
        }
    }

    fn term_logs(&self, terms: &[Term], fr: &[PacketAt; 4], c: &PairCoordinates, out: &mut [C; 4]) {
        for (k, tm) in terms.iter().enumerate() {
            let mut l = fr[tm.p1].log(c.y1) + fr[tm.p2].log(c.y2);
            let mut ph = self.xphase(tm.x, c.x1, c.x2);
            if tm.sign < 0.0 {
                ph += std::f64::consts::PI;
            }
            l += C::new(0.0, ph);
            out[k] = l;
        }
    }

    /// Full amplitude of the cited pair wavefunction (unnormalized).
    pub fn amplitude(&self, c: &PairCoordinates) -> C {
        let fr = self.frame(c.t);
        let mut logs = [C::new(0.0, 0.0); 4];
        self.term_logs(&self.full, &fr, c, &mut logs);
        logs[..self.full.len()].iter().map(|l| l.exp()).sum()
    }

    /// Amplitude of the part that drives y (equal to `amplitude` up to a
    /// factor independent of y).
    pub fn y_amplitude(&self, y1: f64, y2: f64, t: f64) -> C {
        let c = PairCoordinates::at(&self.cfg, y1, y2, t);
        let fr = self.frame(t);
        let mut logs = [C::new(0.0, 0.0); 4];
        self.term_logs(&self.dynamic, &fr, &c, &mut logs);
        logs[..self.dynamic.len()].iter().map(|l| l.exp()).sum()
    }

    /// Velocities plus log|ψ|² and the cancellation ratio |Σ T|/Σ|T|.
    fn eval(&self, fr: &[PacketAt; 4], c: &PairCoordinates) -> Eval {
        let terms = &self.dynamic;
        let mut logs = [C::new(0.0, 0.0); 4];
        self.term_logs(terms, fr, c, &mut logs);
        let n = terms.len();
        let lmax = logs[..n].iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = C::new(0.0, 0.0);
        let mut s1 = C::new(0.0, 0.0);
        let mut s2 = C::new(0.0, 0.0);
        let mut abs_sum = 0.0;
        for k in 0..n {
            let tk = (logs[k] - lmax).exp();
            abs_sum += tk.norm();
            sum += tk;
            s1 += fr[terms[k].p1].dlog(c.y1) * tk;
            s2 += fr[terms[k].p2].dlog(c.y2) * tk;
        }
        let hm = self.cfg.params.hbar / self.cfg.params.mass;
        let n2 = sum.norm_sqr();
        Eval {
            v1: hm * (s1 / sum).im,
            v2: hm * (s2 / sum).im,
            log_abs2: 2.0 * lmax + n2.ln(),
            cancellation: n2.sqrt() / abs_sum,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Eval {
    v1: f64,
    v2: f64,
    log_abs2: f64,
    cancellation: f64,
}

pub fn pair_wavefunction(config: &ExperimentConfig, coords: &PairCoordinates) -> Result<C> {
    Ok(Field::new(config)?.amplitude(coords))
}

/// Node threshold relative to the local or running maximum of |ψ|².
pub const NODE_EPS: f64 = 1e-10;

/// (ẏ1, ẏ2) from the guidance equation.
pub fn bohm_velocities(config: &ExperimentConfig, coords: &PairCoordinates) -> Result<(f64, f64)> {
    let f = Field::new(config)?;
    let e = f.eval(&f.frame(coords.t), coords);
    // |ψ|² relative to the squared sum of term magnitudes
    if !(e.cancellation * e.cancellation >= NODE_EPS) {
        return Err(EprError::Node { t: coords.t, y1: coords.y1, y2: coords.y2 });
    }
    Ok((e.v1, e.v2))
}

/// ħ |(∂1+∂2)ψ + (y1+y2)/(2σ0σ_t) ψ| / |ψ| by central differences.
pub fn momentum_eigen_check(config: &ExperimentConfig, coords: &PairCoordinates) -> Result<f64> {
    let f = Field::new(config)?;
    let p = &config.params;
    let fr = f.frame(coords.t);
    let e = f.eval(&fr, coords);
    if !(e.cancellation * e.cancellation >= NODE_EPS) {
        return Err(EprError::Node { t: coords.t, y1: coords.y1, y2: coords.y2 });
    }
    // scale every evaluation by the centre value so large exponents cancel
    let mut logs = [C::new(0.0, 0.0); 4];
    f.term_logs(&f.full, &fr, coords, &mut logs);
    let n = f.full.len();
    let l0 = logs[..n].iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let psi = |y1: f64, y2: f64| -> C {
        let c = PairCoordinates { y1, y2, ..*coords };
        let mut lg = [C::new(0.0, 0.0); 4];
        f.term_logs(&f.full, &fr, &c, &mut lg);
        lg[..n].iter().map(|l| (l - l0).exp()).sum()
    };
    let h = 1e-4 * p.sigma0;
    let (y1, y2) = (coords.y1, coords.y2);
    let d1 = (psi(y1 + h, y2) - psi(y1 - h, y2)) / (2.0 * h);
    let d2 = (psi(y1, y2 + h) - psi(y1, y2 - h)) / (2.0 * h);
    let v = psi(y1, y2);
    let k = (y1 + y2) / (2.0 * p.sigma0 * p.sigma_t(coords.t));
    Ok(p.hbar * (d1 + d2 + k * v).norm() / v.norm())
}

/// y0 √(1 + a²).
pub fn com_closed_form(y0: f64, params: &PhysParams, t: f64) -> f64 {
    y0 * (1.0 + params.a(t).powi(2)).sqrt()
}

/// ½ m y0² (ħ/2mσ0²)² / (1 + a²).
pub fn quantum_potential_com(y0: f64, params: &PhysParams, t: f64) -> f64 {
    let w = params.hbar / (2.0 * params.mass * params.sigma0 * params.sigma0);
    0.5 * params.mass * y0 * y0 * w * w / (1.0 + params.a(t).powi(2))
}

// ---------------------------------------------------------------- integration

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    /// base RK4 step, physical time
    pub base_step: f64,
    pub max_halvings: u32,
    pub node_eps: f64,
    /// keep every n-th base step in the trajectory
    pub record_every: usize,
}

impl StepControl {
    /// 1e-3 time units of 2mσ0²/ħ.
    pub fn for_params(p: &PhysParams) -> Self {
        StepControl { base_step: 1e-3 * p.time_unit(), max_halvings: 20, node_eps: NODE_EPS, record_every: 1 }
    }
}

/// Sample flag: 0 regular, 1 step was halved near a node, 2 truncated here.
pub const FLAG_OK: u8 = 0;
pub const FLAG_HALVED: u8 = 1;
pub const FLAG_TRUNCATED: u8 = 2;

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub samples: Vec<PairCoordinates>,
    pub flags: Vec<u8>,
    pub base_step: f64,
    pub min_step: f64,
    pub halvings: usize,
    pub truncated: bool,
}

impl Trajectory {
    pub fn last(&self) -> &PairCoordinates {
        self.samples.last().expect("trajectory has at least the initial sample")
    }
}

struct Integrator<'a> {
    f: &'a Field,
    ctrl: StepControl,
    log_eps: f64,
    running: f64,
    min_step: f64,
    halvings: usize,
}

impl<'a> Integrator<'a> {
    fn vel(&self, t: f64, y1: f64, y2: f64) -> Option<(f64, f64, f64)> {
        let c = PairCoordinates::at(self.f.config(), y1, y2, t);
        let e = self.f.eval(&self.f.frame(t), &c);
        if !e.log_abs2.is_finite() || e.log_abs2 < self.running + self.log_eps {
            return None;
        }
        Some((e.v1, e.v2, e.log_abs2))
    }

    fn rk4(&self, t: f64, y: (f64, f64), h: f64) -> Option<((f64, f64), f64)> {
        let (a1, b1, _) = self.vel(t, y.0, y.1)?;
        let (a2, b2, _) = self.vel(t + h / 2.0, y.0 + h / 2.0 * a1, y.1 + h / 2.0 * b1)?;
        let (a3, b3, _) = self.vel(t + h / 2.0, y.0 + h / 2.0 * a2, y.1 + h / 2.0 * b2)?;
        let (a4, b4, _) = self.vel(t + h, y.0 + h * a3, y.1 + h * b3)?;
        let ny = (y.0 + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4), y.1 + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4));
        let (_, _, l) = self.vel(t + h, ny.0, ny.1)?;
        Some((ny, l))
    }

    /// Advances by h, halving recursively near nodes. None means abort.
    fn advance(&mut self, t: f64, y: (f64, f64), h: f64, depth: u32) -> Option<(f64, f64)> {
        if let Some((ny, l)) = self.rk4(t, y, h) {
            self.running = self.running.max(l);
            self.min_step = self.min_step.min(h);
            return Some(ny);
        }
        if depth >= self.ctrl.max_halvings {
            return None;
        }
        self.halvings += 1;
        let mid = self.advance(t, y, h / 2.0, depth + 1)?;
        self.advance(t + h / 2.0, mid, h / 2.0, depth + 1)
    }
}

fn integrate(f: &Field, initial: &PairCoordinates, t_final: f64, ctrl: StepControl, keep: bool) -> Result<Trajectory> {
    if !(t_final > initial.t) {
        return Err(EprError::Config("t_final must exceed the initial time".into()));
    }
    if !(ctrl.base_step > 0.0) || ctrl.record_every == 0 {
        return Err(EprError::Config("step control needs a positive step and record interval".into()));
    }
    let cfg = f.config();
    let e0 = f.eval(&f.frame(initial.t), &PairCoordinates::at(cfg, initial.y1, initial.y2, initial.t));
    if !e0.log_abs2.is_finite() || e0.cancellation * e0.cancellation < ctrl.node_eps {
        return Err(EprError::Node { t: initial.t, y1: initial.y1, y2: initial.y2 });
    }
    let mut it = Integrator { f, ctrl, log_eps: ctrl.node_eps.ln(), running: e0.log_abs2, min_step: ctrl.base_step, halvings: 0 };
    let start = PairCoordinates::at(cfg, initial.y1, initial.y2, initial.t);
    let mut samples = vec![start];
    let mut flags = vec![FLAG_OK];
    let steps = ((t_final - initial.t) / ctrl.base_step).ceil() as usize;
    let mut y = (initial.y1, initial.y2);
    let mut truncated = false;
    for s in 0..steps {
        let t = initial.t + s as f64 * ctrl.base_step;
        let h = if s + 1 == steps { t_final - t } else { ctrl.base_step };
        let before = it.halvings;
        match it.advance(t, y, h, 0) {
            Some(ny) => {
                y = ny;
                if keep && ((s + 1) % ctrl.record_every == 0 || s + 1 == steps) {
                    samples.push(PairCoordinates::at(cfg, y.0, y.1, t + h));
                    flags.push(if it.halvings > before { FLAG_HALVED } else { FLAG_OK });
                } else if !keep && s + 1 == steps {
                    samples.push(PairCoordinates::at(cfg, y.0, y.1, t + h));
                    flags.push(FLAG_OK);
                }
            }
            None => {
                truncated = true;
                samples.push(PairCoordinates::at(cfg, y.0, y.1, t));
                flags.push(FLAG_TRUNCATED);
                break;
            }
        }
    }
    Ok(Trajectory { samples, flags, base_step: ctrl.base_step, min_step: it.min_step, halvings: it.halvings, truncated })
}

/// RK4 Bohmian trajectory from `initial` to `t_final`.
pub fn integrate_trajectory(config: &ExperimentConfig, initial: &PairCoordinates, t_final: f64, ctrl: StepControl) -> Result<Trajectory> {
    integrate(&Field::new(config)?, initial, t_final, ctrl, true)
}

/// Same as `integrate_trajectory` but only the endpoints are kept.
pub fn integrate_endpoint(field: &Field, initial: &PairCoordinates, t_final: f64, ctrl: StepControl) -> Result<Trajectory> {
    integrate(field, initial, t_final, ctrl, false)
}

// ---------------------------------------------------------------- SQM side

/// Box holding every packet at time t with `extent` widths of margin.
fn support(field: &Field, t: f64, extent: f64) -> (f64, f64) {
    let p = &field.cfg.params;
    let fr = field.frame(t);
    let used: Vec<usize> = field.dynamic.iter().flat_map(|tm| [tm.p1, tm.p2]).collect();
    let lo = used.iter().map(|&i| fr[i].ct).fold(f64::INFINITY, f64::min);
    let hi = used.iter().map(|&i| fr[i].ct).fold(f64::NEG_INFINITY, f64::max);
    let w = p.width(t);
    (lo - extent * w, hi + extent * w)
}

fn trapezoid_2d(f: &dyn Fn(f64, f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / (n - 1) as f64;
    let w = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    let mut s = 0.0;
    for i in 0..n {
        let y1 = lo + i as f64 * h;
        for j in 0..n {
            s += w(i) * w(j) * f(y1, lo + j as f64 * h);
        }
    }
    s * h * h
}

/// A configuration normalized at one time, for probability questions.
#[derive(Debug, Clone)]
pub struct SqmState {
    field: Field,
    pub t: f64,
    /// c with ∫∫|c ψ_y|² = 1
    pub norm: f64,
    lo: f64,
    hi: f64,
}

pub const MIN_EXTENT: f64 = 6.0;
pub const DEFAULT_EXTENT: f64 = 8.0;

/// Normalization constant of the y-part of the wavefunction at time t.
/// `extent` is the margin beyond the packet centres in units of |σ_t|.
pub fn normalize_config(config: &ExperimentConfig, t: f64, extent: f64) -> Result<f64> {
    Ok(SqmState::new(config, t, extent)?.norm)
}

impl SqmState {
    pub fn new(config: &ExperimentConfig, t: f64, extent: f64) -> Result<Self> {
        if extent < MIN_EXTENT {
            return Err(EprError::Coverage(format!("grid margin {extent} widths is below {MIN_EXTENT}")));
        }
        let field = Field::new(config)?;
        let (lo, hi) = support(&field, t, extent);
        let dens = |a: f64, b: f64| field.y_amplitude(a, b, t).norm_sqr();
        let mut n = 201;
        let mut prev = trapezoid_2d(&dens, lo, hi, n);
        loop {
            n = 2 * n - 1;
            let cur = trapezoid_2d(&dens, lo, hi, n);
            let done = ((cur - prev) / cur).abs() < 1e-11 || n > 3000;
            prev = cur;
            if done {
                break;
            }
        }
        if !(prev > 0.0) {
            return Err(EprError::State("wavefunction vanishes identically".into()));
        }
        Ok(SqmState { field, t, norm: 1.0 / prev.sqrt(), lo, hi })
    }

    pub fn config(&self) -> &ExperimentConfig {
        self.field.config()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Normalized |ψ|² in (y1, y2).
    pub fn density(&self, y1: f64, y2: f64) -> f64 {
        (self.field.y_amplitude(y1, y2, self.t) * self.norm).norm_sqr()
    }

    /// ∫|ψ|² dy_other at y for particle 1 or 2.
    pub fn marginal(&self, particle: usize, y: f64) -> f64 {
        let f = |z: f64| if particle == 1 { self.density(y, z) } else { self.density(z, y) };
        quadrature::integrate(f, self.lo, self.hi, 1e-12).integral
    }

    /// ∫_{ya}^{yb} marginal.
    pub fn marginal_probability(&self, particle: usize, ya: f64, yb: f64) -> f64 {
        quadrature::integrate(|y| self.marginal(particle, y), ya, yb, 1e-10).integral
    }

    /// ∫∫ over [y1a,y1b]×[y2a,y2b].
    pub fn box_probability(&self, y1a: f64, y1b: f64, y2a: f64, y2b: f64) -> f64 {
        quadrature::integrate(
            |y1| quadrature::integrate(|y2| self.density(y1, y2), y2a, y2b, 1e-10).integral,
            y1a,
            y1b,
            1e-9,
        )
        .integral
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionSpec {
    pub detector_size: f64,
    pub bins: usize,
    pub y_range: (f64, f64),
}

impl DetectionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.detector_size > 0.0) || self.bins == 0 || !(self.y_range.1 > self.y_range.0) {
            return Err(EprError::Config("detector size, bins and y range must be positive".into()));
        }
        Ok(())
    }

    pub fn bin_width(&self) -> f64 {
        (self.y_range.1 - self.y_range.0) / self.bins as f64
    }

    pub fn bin_of(&self, y: f64) -> Option<usize> {
        if y < self.y_range.0 || y >= self.y_range.1 {
            return None;
        }
        Some((((y - self.y_range.0) / self.bin_width()) as usize).min(self.bins - 1))
    }
}

/// P12 = ∫_{yM}^{yM+Δ} ∫_{yN}^{yN+Δ} |ψ|² dy2 dy1.
pub fn joint_detection_probability(state: &SqmState, y_m: f64, y_n: f64, spec: &DetectionSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    if (state.t - t).abs() > 1e-12 * t.abs().max(1.0) {
        return Err(EprError::State(format!("state normalized at t={} but asked for t={t}", state.t)));
    }
    let d = spec.detector_size;
    Ok(state.box_probability(y_m, y_m + d, y_n, y_n + d))
}

// ---------------------------------------------------------------- sampling

/// Tabulated inverse CDF of a 1D density.
struct Sampler1d {
    x: Vec<f64>,
    cdf: Vec<f64>,
}

impl Sampler1d {
    /// From log-densities on a uniform grid.
    fn from_log(x: Vec<f64>, logd: &[f64]) -> Self {
        let m = logd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let d: Vec<f64> = logd.iter().map(|l| (l - m).exp()).collect();
        let mut cdf = vec![0.0; x.len()];
        for i in 1..x.len() {
            cdf[i] = cdf[i - 1] + 0.5 * (d[i] + d[i - 1]) * (x[i] - x[i - 1]);
        }
        let tot = *cdf.last().unwrap();
        for v in &mut cdf {
            *v /= tot;
        }
        Sampler1d { x, cdf }
    }

    fn sample(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, self.x.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let f = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.x[i - 1] + f * (self.x[i] - self.x[i - 1])
    }
}

const SAMPLE_GRID: usize = 1601;

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn log_density(field: &Field, fr: &[PacketAt; 4], y1: f64, y2: f64) -> f64 {
    field.eval(fr, &PairCoordinates::at(field.config(), y1, y2, 0.0)).log_abs2
}

/// Deterministic stream for trajectory `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

/// Initial pairs at t=0 drawn from |ψ(t=0)|² under the configured
/// centre-of-mass constraint.
pub fn sample_initial_positions(config: &ExperimentConfig, count: usize, seed: u64) -> Result<Vec<PairCoordinates>> {
    if count == 0 {
        return Err(EprError::Config("count must be >= 1".into()));
    }
    let field = Field::new(config)?;
    let fr = field.frame(0.0);
    let (lo, hi) = support(&field, 0.0, DEFAULT_EXTENT);
    let ys = grid(lo, hi, SAMPLE_GRID);
    let y0 = config.com_y0;
    if config.com_spread == 0.0 {
        // marginal of y1 by summing |ψ|² over y2 in log space
        let logm: Vec<f64> = ys
            .iter()
            .map(|&a| {
                let row: Vec<f64> = ys.iter().map(|&b| log_density(&field, &fr, a, b)).collect();
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                m + row.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
            })
            .collect();
        let s = Sampler1d::from_log(ys, &logm);
        return Ok((0..count)
            .map(|i| {
                let u: f64 = Uniform::new(0.0, 1.0).sample(&mut stream(seed, i as u64));
                let y1 = s.sample(u);
                PairCoordinates::at(config, y1, 2.0 * y0 - y1, 0.0)
            })
            .collect());
    }
    let normal = Normal::new(y0, config.com_spread).map_err(|e| EprError::Config(e.to_string()))?;
    let out: Vec<PairCoordinates> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let u = normal.sample(&mut rng);
            // relative coordinate r = y1 - y2 from |ψ(u + r/2, u - r/2)|²
            let span = 2.0 * (hi - lo);
            let rs = grid(-span, span, SAMPLE_GRID);
            let logd: Vec<f64> = rs.iter().map(|&r| log_density(&field, &fr, u + r / 2.0, u - r / 2.0)).collect();
            let r = Sampler1d::from_log(rs, &logd).sample(Uniform::new(0.0, 1.0).sample(&mut rng));
            PairCoordinates::at(config, u + r / 2.0, u - r / 2.0, 0.0)
        })
        .collect();
    Ok(out)
}

// ---------------------------------------------------------------- ensembles

#[derive(Debug, Clone, Serialize)]
pub struct EmptyInterval {
    pub lo: f64,
    pub hi: f64,
    pub length: f64,
    pub threshold_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Pattern {
    pub spec: DetectionSpec,
    pub t_final: f64,
    /// both particles pooled
    pub count_full: Vec<u64>,
    pub count_selected: Vec<u64>,
    /// particle 1 only
    pub count_first: Vec<u64>,
    /// joint (y1 bin, y2 bin), row-major
    pub joint: Vec<u64>,
    /// mean of the two single-particle marginals averaged over each bin
    pub sqm_density: Vec<f64>,
    pub pairs: usize,
    pub truncated: usize,
    pub selected_pairs: usize,
    pub removed_pairs: usize,
    pub mirror_max: f64,
    pub empty_interval: Option<EmptyInterval>,
    #[serde(skip)]
    pub endpoints: Vec<(f64, f64)>,
}

pub const EMPTY_THRESHOLD: f64 = 0.05;

fn empty_interval(spec: &DetectionSpec, counts: &[u64], frac: f64) -> Option<EmptyInterval> {
    let peak = *counts.iter().max()?;
    if peak == 0 {
        return None;
    }
    let thr = frac * peak as f64;
    let first = counts.iter().position(|&c| c as f64 > thr)?;
    let last = counts.iter().rposition(|&c| c as f64 > thr)?;
    let (mut best, mut cur_start, mut best_start) = (0usize, None, 0usize);
    for (i, &c) in counts.iter().enumerate().take(last + 1).skip(first) {
        if (c as f64) <= thr {
            let s = *cur_start.get_or_insert(i);
            if i + 1 - s > best {
                best = i + 1 - s;
                best_start = s;
            }
        } else {
            cur_start = None;
        }
    }
    if best == 0 {
        return None;
    }
    let w = spec.bin_width();
    let lo = spec.y_range.0 + best_start as f64 * w;
    Some(EmptyInterval { lo, hi: lo + best as f64 * w, length: best as f64 * w, threshold_fraction: frac })
}

/// Runs `count` trajectories to `t_final` and bins the endpoints.
pub fn ensemble_pattern(config: &ExperimentConfig, count: usize, seed: u64, t_final: f64, spec: &DetectionSpec) -> Result<Pattern> {
    spec.validate()?;
    let field = Field::new(config)?;
    let ctrl = StepControl::for_params(&config.params);
    let init = sample_initial_positions(config, count, seed)?;
    let ends: Vec<Result<Trajectory>> = init.par_iter().map(|c| integrate_endpoint(&field, c, t_final, ctrl)).collect();
    let nb = spec.bins;
    let mut p = Pattern {
        spec: *spec,
        t_final,
        count_full: vec![0; nb],
        count_selected: vec![0; nb],
        count_first: vec![0; nb],
        joint: vec![0; nb * nb],
        sqm_density: vec![0.0; nb],
        pairs: count,
        truncated: 0,
        selected_pairs: 0,
        removed_pairs: 0,
        mirror_max: 0.0,
        empty_interval: None,
        endpoints: Vec::with_capacity(count),
    };
    for e in ends {
        let tr = match e {
            Ok(tr) => tr,
            Err(EprError::Node { .. }) => {
                p.truncated += 1;
                continue;
            }
            Err(err) => return Err(err),
        };
        if tr.truncated {
            p.truncated += 1;
            continue;
        }
        let end = tr.last();
        let (y1, y2) = (end.y1, end.y2);
        p.endpoints.push((y1, y2));
        p.mirror_max = p.mirror_max.max((y1 + y2 - 2.0 * com_closed_form(config.com_y0, &config.params, t_final)).abs());
        let selected = (y1 > 0.0) != (y2 > 0.0);
        if selected {
            p.selected_pairs += 1;
        } else {
            p.removed_pairs += 1;
        }
        let (b1, b2) = (spec.bin_of(y1), spec.bin_of(y2));
        for b in [b1, b2].into_iter().flatten() {
            p.count_full[b] += 1;
            if selected {
                p.count_selected[b] += 1;
            }
        }
        if let Some(b) = b1 {
            p.count_first[b] += 1;
        }
        if let (Some(a), Some(b)) = (b1, b2) {
            p.joint[a * nb + b] += 1;
        }
    }
    let st = SqmState::new(config, t_final, DEFAULT_EXTENT)?;
    let w = spec.bin_width();
    p.sqm_density = (0..nb)
        .into_par_iter()
        .map(|i| {
            let a = spec.y_range.0 + i as f64 * w;
            0.5 * (st.marginal_probability(1, a, a + w) + st.marginal_probability(2, a, a + w)) / w
        })
        .collect();
    p.empty_interval = empty_interval(spec, &p.count_selected, EMPTY_THRESHOLD);
    Ok(p)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub bins_used: usize,
}

/// Pearson test of particle-1 endpoints against the SQM marginal. Bins with
/// expected count below 5 are merged with their neighbours; the mass outside
/// the range forms one more category.
pub fn chi_square_first(pattern: &Pattern, state: &SqmState) -> Result<ChiSquare> {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let spec = &pattern.spec;
    let w = spec.bin_width();
    let n: u64 = (pattern.pairs - pattern.truncated) as u64;
    let probs: Vec<f64> = (0..spec.bins)
        .into_par_iter()
        .map(|i| {
            let a = spec.y_range.0 + i as f64 * w;
            state.marginal_probability(1, a, a + w)
        })
        .collect();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut e_acc, mut o_acc) = (0.0, 0.0);
    for (pr, &o) in probs.iter().zip(&pattern.count_first) {
        e_acc += pr * n as f64;
        o_acc += o as f64;
        if e_acc >= 5.0 {
            cells.push((o_acc, e_acc));
            e_acc = 0.0;
            o_acc = 0.0;
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += o_acc;
        last.1 += e_acc;
    }
    let inside_o: f64 = pattern.count_first.iter().map(|&c| c as f64).sum();
    let outside_e = (1.0 - probs.iter().sum::<f64>()).max(0.0) * n as f64;
    let outside_o = n as f64 - inside_o;
    if outside_e >= 5.0 {
        cells.push((outside_o, outside_e));
    } else if let Some(last) = cells.last_mut() {
        last.0 += outside_o;
        last.1 += outside_e;
    }
    if cells.len() < 2 {
        return Err(EprError::State("too few populated bins for a chi-square test".into()));
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| EprError::State(e.to_string()))?;
    Ok(ChiSquare { statistic: stat, dof, p_value: 1.0 - dist.cdf(stat), bins_used: cells.len() })
}

// ---------------------------------------------------------------- coincidences

/// sin(x)/x with the removable point at 0.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// g(θ, θ_i) = sinc(kσ0 (sin θ - sin θ_i)).
pub fn g_factor(theta: f64, theta_i: f64, k_sigma0: f64) -> f64 {
    sinc(k_sigma0 * (theta.sin() - theta_i.sin()))
}

pub fn coincidence_pattern(theta1: f64, theta2: f64, k_y: f64, k_sigma0: f64, theta_a: f64, theta_b: f64) -> Result<f64> {
    let half = std::f64::consts::FRAC_PI_2;
    if theta1.abs() >= half || theta2.abs() >= half {
        return Err(EprError::Config("angles must satisfy |θ| < π/2".into()));
    }
    let g1a = g_factor(theta1, theta_a, k_sigma0);
    let g2a = g_factor(theta2, theta_a, k_sigma0);
    let g1b = g_factor(theta1, theta_b, k_sigma0);
    let g2b = g_factor(theta2, theta_b, k_sigma0);
    Ok(g1a * g1a * g2b * g2b + g2a * g2a * g1b * g1b + 2.0 * g1a * g2b * g2a * g1b * (2.0 * k_y * (theta1.sin() - theta2.sin())).cos())
}

/// Mean spacing in sin θ1 between successive maxima of C at fixed θ2,
/// over sin θ1 in [s_lo, s_hi].
pub fn fringe_period(theta2: f64, k_y: f64, k_sigma0: f64, theta_a: f64, theta_b: f64, s_lo: f64, s_hi: f64) -> Result<f64> {
    let n = 200_001;
    let s: Vec<f64> = grid(s_lo, s_hi, n);
    let v: Vec<f64> = s.iter().map(|&x| coincidence_pattern(x.asin(), theta2, k_y, k_sigma0, theta_a, theta_b)).collect::<Result<_>>()?;
    let ds = s[1] - s[0];
    let mut peaks = Vec::new();
    for i in 1..n - 1 {
        if v[i] > v[i - 1] && v[i] >= v[i + 1] {
            // parabolic refinement
            let den = v[i - 1] - 2.0 * v[i] + v[i + 1];
            let off = if den != 0.0 { 0.5 * (v[i - 1] - v[i + 1]) / den } else { 0.0 };
            peaks.push(s[i] + off * ds);
        }
    }
    if peaks.len() < 2 {
        return Err(EprError::State("fewer than two fringe maxima in range".into()));
    }
    Ok((peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64)
}
