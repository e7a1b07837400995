//! Small complex linear algebra, Hadamard matrices and file helpers.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{EprError, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const MAX_SYLVESTER_EXPONENT: u32 = 12;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Raw ±1 Hadamard matrix. Rows are stored row-major as i8.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HadamardMatrix {
    order: usize,
    entries: Vec<i8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct HadamardReport {
    pub order: usize,
    pub is_hadamard: bool,
    pub is_symmetric: bool,
    pub is_normalized: bool,
}

impl HadamardReport {
    pub fn accepted(&self) -> bool {
        self.is_hadamard && self.is_symmetric && self.is_normalized
    }
}

impl HadamardMatrix {
    pub fn sylvester(exponent: u32) -> Result<Self> {
        if exponent > MAX_SYLVESTER_EXPONENT {
            return Err(EprError::Size(format!(
                "sylvester exponent {exponent} exceeds {MAX_SYLVESTER_EXPONENT}"
            )));
        }
        let order = 1usize << exponent;
        let mut entries = vec![0i8; order * order];
        for i in 0..order {
            for j in 0..order {
                // (-1)^{popcount(i & j)}
                entries[i * order + j] = if (i & j).count_ones() % 2 == 0 { 1 } else { -1 };
            }
        }
        Ok(HadamardMatrix { order, entries })
    }

    /// Sylvester matrix of the given order, if the order is a power of two.
    pub fn sylvester_order(order: usize) -> Result<Self> {
        if order == 0 || !order.is_power_of_two() {
            return Err(EprError::Capability(format!(
                "no built-in Hadamard of order {order}; supply one from a file"
            )));
        }
        Self::sylvester(order.trailing_zeros())
    }

    /// Builds a matrix from rows and rejects anything that is not symmetric,
    /// normalized and Hadamard.
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let report = validate_hadamard(rows)?;
        if !report.accepted() {
            return Err(EprError::Validation(format!(
                "order {}: is_hadamard={} is_symmetric={} is_normalized={}",
                report.order, report.is_hadamard, report.is_symmetric, report.is_normalized
            )));
        }
        Ok(Self::from_rows_unchecked(rows))
    }

    fn from_rows_unchecked(rows: &[Vec<i64>]) -> Self {
        let order = rows.len();
        let entries = rows.iter().flat_map(|r| r.iter().map(|&v| v as i8)).collect();
        HadamardMatrix { order, entries }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Zero-based entry.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i32 {
        self.entries[i * self.order + j] as i32
    }

    /// One-based entry h_{i,j}.
    #[inline]
    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.get(i - 1, j - 1) as f64
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        (0..self.order)
            .map(|i| (0..self.order).map(|j| self.get(i, j) as i64).collect())
            .collect()
    }

    /// Applies the same permutation to rows and columns (keeps symmetry).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.order;
        let mut entries = vec![0i8; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = self.entries[perm[i] * n + perm[j]];
            }
        }
        HadamardMatrix { order: n, entries }
    }

    /// Permutes rows only. The result may not be symmetric.
    pub fn rows_permuted(&self, perm: &[usize]) -> Self {
        let n = self.order;
        let mut entries = vec![0i8; n * n];
        for i in 0..n {
            entries[i * n..(i + 1) * n].copy_from_slice(&self.entries[perm[i] * n..(perm[i] + 1) * n]);
        }
        HadamardMatrix { order: n, entries }
    }

    pub fn kron(&self, other: &HadamardMatrix) -> Self {
        let (a, b) = (self.order, other.order);
        let n = a * b;
        let mut entries = vec![0i8; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = self.entries[(i / b) * a + j / b] * other.entries[(i % b) * b + j % b];
            }
        }
        HadamardMatrix { order: n, entries }
    }

    pub fn report(&self) -> HadamardReport {
        validate_hadamard(&self.rows()).expect("stored matrix is well formed")
    }

    /// Normalized form H/sqrt(order) as a complex matrix.
    pub fn normalized(&self) -> CMat {
        let s = 1.0 / (self.order as f64).sqrt();
        CMat::from_fn(self.order, self.order, |i, j| c(self.get(i, j) as f64 * s, 0.0))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.order);
        for i in 0..self.order {
            let row: Vec<&str> = (0..self.order)
                .map(|j| if self.get(i, j) > 0 { "+1" } else { "-1" })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

pub fn validate_hadamard(rows: &[Vec<i64>]) -> Result<HadamardReport> {
    let n = rows.len();
    if n == 0 {
        return Err(EprError::Format("empty matrix".into()));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(EprError::Format(format!("row {} has {} entries, expected {n}", i + 1, r.len())));
        }
        if let Some(v) = r.iter().find(|v| v.abs() != 1) {
            return Err(EprError::Format(format!("row {} contains {v}, expected +1 or -1", i + 1)));
        }
    }
    let mut is_hadamard = true;
    'outer: for a in 0..n {
        for b in a..n {
            let dot: i64 = (0..n).map(|j| rows[a][j] * rows[b][j]).sum();
            let want = if a == b { n as i64 } else { 0 };
            if dot != want {
                is_hadamard = false;
                break 'outer;
            }
        }
    }
    let is_symmetric = (0..n).all(|i| (0..i).all(|j| rows[i][j] == rows[j][i]));
    let is_normalized = (0..n).all(|i| rows[0][i] == 1 && rows[i][0] == 1);
    Ok(HadamardReport { order: n, is_hadamard, is_symmetric, is_normalized })
}

pub fn parse_hadamard(text: &str) -> Result<Vec<Vec<i64>>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (l0, first) = lines.next().ok_or(EprError::Parse { line: 1, msg: "empty file".into() })?;
    let order: usize = first
        .trim()
        .parse()
        .map_err(|_| EprError::Parse { line: l0 + 1, msg: format!("bad order {first:?}") })?;
    let mut rows = Vec::with_capacity(order);
    for (ln, line) in lines {
        let mut row = Vec::with_capacity(order);
        for tok in line.split_whitespace() {
            match tok {
                "+1" => row.push(1),
                "-1" => row.push(-1),
                _ => return Err(EprError::Parse { line: ln + 1, msg: format!("bad entry {tok:?}") }),
            }
        }
        if row.len() != order {
            return Err(EprError::Parse {
                line: ln + 1,
                msg: format!("row has {} entries, expected {order}", row.len()),
            });
        }
        rows.push(row);
    }
    if rows.len() != order {
        return Err(EprError::Parse { line: rows.len() + 2, msg: format!("expected {order} rows, found {}", rows.len()) });
    }
    Ok(rows)
}

pub fn load_hadamard(path: impl AsRef<Path>) -> Result<HadamardMatrix> {
    let text = std::fs::read_to_string(path)?;
    HadamardMatrix::from_rows(&parse_hadamard(&text)?)
}

pub fn save_hadamard(h: &HadamardMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, h.to_text().as_bytes())
}

/// Writes to a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| EprError::Io(e.error))?;
    Ok(())
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b))
}

/// Largest entry of M·M† − I.
pub fn unitarity_deviation(m: &CMat) -> f64 {
    max_abs_diff(&(m * m.adjoint()), &identity(m.nrows()))
}

/// min over s in {+1,−1} of max|a − s·b|.
pub fn diff_up_to_sign(a: &CMat, b: &CMat) -> f64 {
    max_abs_diff(a, b).min(max_abs(&(a + b)))
}

pub fn vec_diff_up_to_sign(a: &CVec, b: &CVec) -> f64 {
    vec_max_abs(&(a - b)).min(vec_max_abs(&(a + b)))
}

pub fn vec_max_abs(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Reduced density matrix of a pure bipartite state over the first factor.
pub fn reduce_to_first(psi: &CVec, da: usize, db: usize) -> CMat {
    CMat::from_fn(da, da, |i, k| (0..db).map(|j| psi[i * db + j] * psi[k * db + j].conj()).sum())
}

/// Reduced density matrix of a pure bipartite state over the second factor.
pub fn reduce_to_second(psi: &CVec, da: usize, db: usize) -> CMat {
    CMat::from_fn(db, db, |j, l| (0..da).map(|i| psi[i * db + j] * psi[i * db + l].conj()).sum())
}

pub fn fidelity(a: &CVec, b: &CVec) -> f64 {
    a.dotc(b).norm_sqr()
}

/// Formats a float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{:.16e}", x)
}
