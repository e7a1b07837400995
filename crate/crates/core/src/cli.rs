//! Command-line front end.
//!
//! Times on the command line and in trajectory CSVs are in units of 2mσ0²/ħ.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bohmsim::{self, DetectionSpec, ExperimentConfig, SqmState, StepControl};
use crate::densecode::{self, BellLabel, DenseCoder, GateTimes, Sign};
use crate::error::{EprError, Result};
use crate::numkit::{self, fmt17, CMat, CVec, HadamardMatrix};
use crate::teleport::{self, Teleporter, Teleporter3d};

#[derive(Parser, Debug)]
#[command(name = "eprlab", version, about = "Entangled double-slit trajectories, dense coding and teleportation")]
pub struct Cli {
    /// Progress messages on stderr (-v, -vv)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Bohmian trajectories and standard-QM statistics
    #[command(subcommand)]
    Bohm(BohmCmd),
    /// Position-channel dense coding
    #[command(subcommand)]
    Dense(DenseCmd),
    /// Teleportation through the Bell basis
    #[command(subcommand)]
    Teleport(TeleportCmd),
    /// Hadamard matrix files
    #[command(subcommand)]
    Hadamard(HadamardCmd),
}

#[derive(Args, Debug)]
pub struct BohmCommon {
    /// JSON experiment config
    #[arg(long)]
    pub config: PathBuf,
    /// Final time in units of 2mσ0²/ħ; defaults to the screen arrival time
    #[arg(long)]
    pub t_final: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum BohmCmd {
    /// Sample initial pairs and write full trajectories
    Trajectories {
        #[command(flatten)]
        common: BohmCommon,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep every n-th base step
        #[arg(long, default_value_t = 100)]
        record_every: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Endpoint histogram with the standard-QM density
    Pattern {
        #[command(flatten)]
        common: BohmCommon,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        bins: usize,
        #[arg(long, allow_hyphen_values = true)]
        y_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        y_max: f64,
        #[arg(long)]
        out: PathBuf,
        /// JSON summary (counts, empty interval, chi-square)
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Joint detection probability for two detectors of size Δ
    Probability {
        #[command(flatten)]
        common: BohmCommon,
        #[arg(long, allow_hyphen_values = true)]
        y_m: f64,
        #[arg(long, allow_hyphen_values = true)]
        y_n: f64,
        #[arg(long)]
        delta: f64,
        /// Integration margin beyond the packet centres, in packet widths
        #[arg(long, default_value_t = bohmsim::DEFAULT_EXTENT)]
        extent: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coincidence rate against θ1 at fixed θ2
    Coincidence {
        /// k·Y
        #[arg(long)]
        k_y: f64,
        /// k·σ0
        #[arg(long)]
        k_sigma0: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        theta2: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        theta_a: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        theta_b: f64,
        #[arg(long, default_value_t = 1001)]
        points: usize,
        /// Largest |θ1|
        #[arg(long, default_value_t = 0.5)]
        theta_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct HadamardArg {
    /// Hadamard matrix file of order 2N (default: the built-in table choice)
    #[arg(long)]
    pub hadamard: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum DenseCmd {
    /// One Bell state (and optionally its encoder) as "re,im" rows
    Bell {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, value_parser = parse_sign, allow_hyphen_values = true)]
        sign: Sign,
        #[arg(long)]
        j: usize,
        #[command(flatten)]
        h: HadamardArg,
        #[arg(long)]
        out: PathBuf,
        /// Encoder matrix, row-major "re,im" rows
        #[arg(long)]
        operator: Option<PathBuf>,
    },
    /// Encode, send and decode messages
    Roundtrip {
        #[arg(long)]
        n: usize,
        #[arg(long, conflicts_with = "message")]
        all: bool,
        /// Message as bit string (or integer when 2N is not a power of two)
        #[arg(long)]
        message: Option<String>,
        #[command(flatten)]
        h: HadamardArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Information rates of the position, pairwise and maximally entangled schemes
    Rates {
        #[arg(long)]
        n: usize,
        /// Qubit count of the comparison schemes (default N)
        #[arg(long)]
        qn: Option<usize>,
        /// Common gate time; sets t_c = t_h = t, t_p = 4t, t_u = N t
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long)]
        t_c: Option<f64>,
        #[arg(long)]
        t_h: Option<f64>,
        #[arg(long)]
        t_p: Option<f64>,
        #[arg(long)]
        t_u: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encoding and measurement tables for N = 1, 2, 4
    Tables {
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum TeleportCmd {
    /// Teleport a state read from CSV (or a seeded random one)
    Run {
        #[arg(long)]
        n: usize,
        /// Momentum channels; enables position-momentum teleportation
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// "re,im" rows; x-major over (x, p) when --m is given
        #[arg(long)]
        state: Option<PathBuf>,
        #[command(flatten)]
        h: HadamardArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bell expansion of φ⊗ψ1: probability and Bob's residual per outcome
    Expand {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        state: PathBuf,
        #[command(flatten)]
        h: HadamardArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum HadamardCmd {
    /// Sylvester matrix of a power-of-two order
    Gen {
        #[arg(long)]
        order: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a matrix file
    Check {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_sign(s: &str) -> std::result::Result<Sign, String> {
    match s {
        "+" | "plus" | "+1" => Ok(Sign::Plus),
        "-" | "minus" | "-1" => Ok(Sign::Minus),
        _ => Err(format!("sign must be + or -, got {s:?}")),
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
}

/// Exit code for an error: 3 for numerical failures, 2 otherwise.
pub fn exit_code(e: &EprError) -> i32 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

/// Parses argv, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return 0;
            }
            report_error("usage", e.to_string().trim().to_string());
            return 2;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            report_error(e.kind(), e.to_string());
            exit_code(&e)
        }
    }
}

fn report_error(kind: &str, message: String) {
    let r = ErrorReport { error: kind, message };
    eprintln!("{}", serde_json::to_string(&r).unwrap_or_default());
}

/// Caps rayon's pool at EPRLAB_THREADS when set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("EPRLAB_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| EprError::Config(format!("EPRLAB_THREADS={v:?} is not a count")))?;
        if n == 0 {
            return Err(EprError::Config("EPRLAB_THREADS must be >= 1".into()));
        }
        // a second call in the same process (tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    init_threads()?;
    let v = cli.verbose;
    match &cli.command {
        Command::Bohm(c) => bohm(c, v),
        Command::Dense(c) => dense(c),
        Command::Teleport(c) => teleport_cmd(c),
        Command::Hadamard(c) => hadamard(c),
    }
}

fn log(v: u8, msg: impl AsRef<str>) {
    if v > 0 {
        eprintln!("{}", msg.as_ref());
    }
}

fn to_json<T: Serialize>(x: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(x).map_err(|e| EprError::Format(e.to_string()))?;
    s.push(b'\n');
    Ok(s)
}

fn emit_json<T: Serialize>(x: &T, out: Option<&Path>) -> Result<()> {
    let bytes = to_json(x)?;
    match out {
        Some(p) => numkit::write_atomic(p, &bytes),
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| EprError::Format(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.into_inner().map_err(|e| EprError::Format(e.to_string()))
}

fn read_text(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).map_err(|e| EprError::Config(format!("{}: {e}", p.display())))
}

// ---------------------------------------------------------------- bohm

fn load_config(p: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_json(&read_text(p)?)
}

fn final_time(cfg: &ExperimentConfig, t: Option<f64>) -> Result<f64> {
    let tu = cfg.params.time_unit();
    let t = t.map(|a| a * tu).unwrap_or_else(|| cfg.params.screen_time());
    if !(t > 0.0) || !t.is_finite() {
        return Err(EprError::Config("final time must be positive".into()));
    }
    Ok(t)
}

fn bohm(c: &BohmCmd, v: u8) -> Result<()> {
    match c {
        BohmCmd::Trajectories { common, count, seed, record_every, out } => {
            let cfg = load_config(&common.config)?;
            let t = final_time(&cfg, common.t_final)?;
            if *count == 0 || *record_every == 0 {
                return Err(EprError::Config("count and record-every must be >= 1".into()));
            }
            let mut ctrl = StepControl::for_params(&cfg.params);
            ctrl.record_every = *record_every;
            let init = bohmsim::sample_initial_positions(&cfg, *count, *seed)?;
            log(v, format!("integrating {count} trajectories to t = {}", t / cfg.params.time_unit()));
            use rayon::prelude::*;
            let trs: Vec<Result<bohmsim::Trajectory>> = init.par_iter().map(|s| bohmsim::integrate_trajectory(&cfg, s, t, ctrl)).collect();
            let tu = cfg.params.time_unit();
            let mut rows = Vec::new();
            for tr in trs {
                let tr = tr?;
                for (s, f) in tr.samples.iter().zip(&tr.flags) {
                    rows.push(vec![fmt17(s.t / tu), fmt17(s.y1), fmt17(s.y2), fmt17(s.x1), fmt17(s.x2), f.to_string()]);
                }
            }
            numkit::write_atomic(out, &csv_bytes(&["t", "y1", "y2", "x1", "x2", "flag"], rows)?)
        }
        BohmCmd::Pattern { common, count, seed, bins, y_min, y_max, out, report } => {
            let cfg = load_config(&common.config)?;
            let t = final_time(&cfg, common.t_final)?;
            let spec = DetectionSpec { detector_size: (y_max - y_min) / *bins.max(&1) as f64, bins: *bins, y_range: (*y_min, *y_max) };
            spec.validate()?;
            if *count == 0 {
                return Err(EprError::Config("count must be >= 1".into()));
            }
            log(v, format!("ensemble of {count} pairs"));
            let pat = bohmsim::ensemble_pattern(&cfg, *count, *seed, t, &spec)?;
            let w = spec.bin_width();
            let rows = (0..spec.bins).map(|i| {
                let lo = y_min + i as f64 * w;
                vec![fmt17(lo), fmt17(lo + w), pat.count_full[i].to_string(), pat.count_selected[i].to_string(), fmt17(pat.sqm_density[i])]
            });
            let bytes = csv_bytes(&["bin_lo", "bin_hi", "count_full", "count_selected", "sqm_density"], rows)?;
            let summary = match report {
                Some(_) => {
                    let st = SqmState::new(&cfg, t, bohmsim::DEFAULT_EXTENT)?;
                    let chi = bohmsim::chi_square_first(&pat, &st).ok();
                    Some(PatternReport {
                        pairs: pat.pairs,
                        truncated: pat.truncated,
                        selected_pairs: pat.selected_pairs,
                        removed_pairs: pat.removed_pairs,
                        mirror_max: pat.mirror_max,
                        empty_interval: pat.empty_interval.clone(),
                        chi_square: chi,
                        seed: *seed,
                        t_final: t / cfg.params.time_unit(),
                    })
                }
                None => None,
            };
            numkit::write_atomic(out, &bytes)?;
            if let (Some(p), Some(s)) = (report, summary) {
                numkit::write_atomic(p, &to_json(&s)?)?;
            }
            Ok(())
        }
        BohmCmd::Probability { common, y_m, y_n, delta, extent, out } => {
            let cfg = load_config(&common.config)?;
            let t = final_time(&cfg, common.t_final)?;
            let spec = DetectionSpec { detector_size: *delta, bins: 1, y_range: (y_m.min(*y_n), y_m.max(*y_n) + delta) };
            spec.validate()?;
            let st = SqmState::new(&cfg, t, *extent)?;
            let p12 = bohmsim::joint_detection_probability(&st, *y_m, *y_n, &spec, t)?;
            let r = ProbabilityReport { y_m: *y_m, y_n: *y_n, delta: *delta, t: t / cfg.params.time_unit(), norm: st.norm, p12 };
            emit_json(&r, out.as_deref())
        }
        BohmCmd::Coincidence { k_y, k_sigma0, theta2, theta_a, theta_b, points, theta_max, out } => {
            if *points < 2 || !(*theta_max > 0.0 && *theta_max < std::f64::consts::FRAC_PI_2) {
                return Err(EprError::Config("need >= 2 points and 0 < theta-max < π/2".into()));
            }
            let mut rows = Vec::with_capacity(*points);
            for i in 0..*points {
                let th = -theta_max + 2.0 * theta_max * i as f64 / (*points - 1) as f64;
                let cval = bohmsim::coincidence_pattern(th, *theta2, *k_y, *k_sigma0, *theta_a, *theta_b)?;
                rows.push(vec![fmt17(th), fmt17(th.sin()), fmt17(cval)]);
            }
            numkit::write_atomic(out, &csv_bytes(&["theta1", "sin_theta1", "coincidence"], rows)?)
        }
    }
}

#[derive(Serialize)]
struct PatternReport {
    pairs: usize,
    truncated: usize,
    selected_pairs: usize,
    removed_pairs: usize,
    mirror_max: f64,
    empty_interval: Option<bohmsim::EmptyInterval>,
    chi_square: Option<bohmsim::ChiSquare>,
    seed: u64,
    t_final: f64,
}

#[derive(Serialize)]
struct ProbabilityReport {
    y_m: f64,
    y_n: f64,
    delta: f64,
    t: f64,
    norm: f64,
    p12: f64,
}

// ---------------------------------------------------------------- dense

fn hadamard_for(n: usize, h: &HadamardArg) -> Result<HadamardMatrix> {
    if n == 0 {
        return Err(EprError::Config("N must be >= 1".into()));
    }
    match &h.hadamard {
        Some(p) => {
            let m = numkit::load_hadamard(p)?;
            if m.order() != 2 * n {
                return Err(EprError::OrderMismatch { expected: 2 * n, got: m.order() });
            }
            Ok(m)
        }
        None => densecode::table_hadamard(n),
    }
}

fn vec_rows(v: &CVec) -> Vec<Vec<String>> {
    v.iter().map(|z| vec![fmt17(z.re), fmt17(z.im)]).collect()
}

fn mat_rows(m: &CMat) -> Vec<Vec<String>> {
    let mut rows = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            rows.push(vec![fmt17(m[(i, j)].re), fmt17(m[(i, j)].im)]);
        }
    }
    rows
}

fn dense(c: &DenseCmd) -> Result<()> {
    match c {
        DenseCmd::Bell { n, k, sign, j, h, out, operator } => {
            let hm = hadamard_for(*n, h)?;
            let label = BellLabel::new(*n, *k, *sign, *j)?;
            let st = densecode::bell_state(*n, &hm, label)?;
            let op = match operator {
                Some(_) => Some(densecode::encode_operator(*n, &hm, label)?),
                None => None,
            };
            numkit::write_atomic(out, &csv_bytes(&["re", "im"], vec_rows(&st))?)?;
            if let (Some(p), Some(m)) = (operator, op) {
                numkit::write_atomic(p, &csv_bytes(&["re", "im"], mat_rows(&m))?)?;
            }
            Ok(())
        }
        DenseCmd::Roundtrip { n, all, message, h, out } => {
            let coder = DenseCoder::new(*n, hadamard_for(*n, h)?)?;
            let total = 4 * n * n;
            let msgs: Vec<usize> = match (all, message) {
                (true, _) => (0..total).collect(),
                (false, Some(m)) => {
                    let v = densecode::decode_message(m, coder.message_bits())?;
                    if v >= total {
                        return Err(EprError::Config(format!("message {m} out of range for N={n}")));
                    }
                    vec![v]
                }
                (false, None) => return Err(EprError::Config("give --all or --message".into())),
            };
            let reports = msgs.into_iter().map(|m| coder.roundtrip(m)).collect::<Result<Vec<_>>>()?;
            numkit::write_atomic(out, &to_json(&reports)?)
        }
        DenseCmd::Rates { n, qn, t, t_c, t_h, t_p, t_u, out } => {
            let base = GateTimes::equal(*t, *n);
            let times = GateTimes {
                t_c: t_c.unwrap_or(base.t_c),
                t_h: t_h.unwrap_or(base.t_h),
                t_p: t_p.unwrap_or(base.t_p),
                t_u: t_u.unwrap_or(base.t_u),
            };
            let r = densecode::info_rates(*n, qn.unwrap_or(*n), times)?;
            emit_json(&r, out.as_deref())
        }
        DenseCmd::Tables { out_dir } => {
            let mut files = Vec::new();
            for (n, enc, meas) in [(1, "table1", "table2"), (2, "tableAN2", "tableBN2"), (4, "table7", "table8")] {
                let rows = densecode::dense_table(n)?;
                let e = rows.iter().map(|r| vec![r.row.to_string(), r.label.to_string(), r.operator.clone(), r.state.clone()]);
                files.push((enc, csv_bytes(&["row", "label", "operator", "state"], e)?));
                let m = rows.iter().map(|r| {
                    let (a, b) = r.outcome.unwrap_or((0, 0));
                    vec![r.row.to_string(), r.label.to_string(), format!("|{a},{b}>"), r.renamed.clone().unwrap_or_default()]
                });
                files.push((meas, csv_bytes(&["row", "label", "outcome", "renamed"], m)?));
            }
            std::fs::create_dir_all(out_dir)?;
            for (name, bytes) in files {
                numkit::write_atomic(out_dir.join(format!("{name}.csv")), &bytes)?;
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------- teleport

/// Reads "re,im" rows; a non-numeric first row is taken as a header.
pub fn read_state_csv(p: &Path) -> Result<CVec> {
    let text = read_text(p)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut amps = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| EprError::Parse { line: i + 1, msg: e.to_string() })?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rec.len() != 2 {
            return Err(EprError::Parse { line: i + 1, msg: format!("expected 2 fields, got {}", rec.len()) });
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(re), Ok(im)) => amps.push(numkit::c(re, im)),
            _ if i == 0 => continue,
            _ => return Err(EprError::Parse { line: i + 1, msg: "amplitude is not a number".into() }),
        }
    }
    Ok(CVec::from_vec(amps))
}

#[derive(Serialize)]
struct ExpandEntry {
    label: BellLabel,
    probability: f64,
    residual: Vec<[f64; 2]>,
}

fn teleport_cmd(c: &TeleportCmd) -> Result<()> {
    match c {
        TeleportCmd::Run { n, m, seed, state, h, out } => {
            let hx = hadamard_for(*n, h)?;
            let d = 2 * n * m.map(|m| 2 * m).unwrap_or(1);
            let phi = match state {
                Some(p) => read_state_csv(p)?,
                None => teleport::random_state(d, *seed),
            };
            let r = match m {
                None => Teleporter::new(*n, hx)?.simulate(&phi, *seed)?,
                Some(m) => {
                    let hp = densecode::table_hadamard(*m)?;
                    Teleporter3d::new(*n, hx, *m, hp)?.simulate(&phi, *seed)?
                }
            };
            numkit::write_atomic(out, &to_json(&r)?)
        }
        TeleportCmd::Expand { n, state, h, out } => {
            let hm = hadamard_for(*n, h)?;
            let phi = read_state_csv(state)?;
            let res = teleport::bell_expand(&phi, *n, &hm)?;
            let entries: Vec<ExpandEntry> = res
                .into_iter()
                .map(|r| ExpandEntry { label: r.label, probability: r.probability, residual: r.state.iter().map(|z| [z.re, z.im]).collect() })
                .collect();
            numkit::write_atomic(out, &to_json(&entries)?)
        }
    }
}

// ---------------------------------------------------------------- hadamard

fn hadamard(c: &HadamardCmd) -> Result<()> {
    match c {
        HadamardCmd::Gen { order, out } => numkit::save_hadamard(&HadamardMatrix::sylvester_order(*order)?, out),
        HadamardCmd::Check { file, out } => {
            let rows = numkit::parse_hadamard(&read_text(file)?)?;
            let rep = numkit::validate_hadamard(&rows)?;
            emit_json(&rep, out.as_deref())?;
            if !rep.is_hadamard {
                return Err(EprError::Validation(format!("{} is not a Hadamard matrix", file.display())));
            }
            Ok(())
        }
    }
}
