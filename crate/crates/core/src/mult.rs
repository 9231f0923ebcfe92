//! Signed 8-bit multiplier models and their error profiles.
//!
//! A model is a total function `i8 × i8 → i16`. Approximate units from
//! external libraries are ingested as 65,536-entry lookup tables indexed by
//! `(a + 128) * 256 + (b + 128)`; truncated-operand multipliers are built in
//! so everything runs without external tables.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::quant::sha256_hex;

pub const LUT_ENTRIES: usize = 1 << 16;
pub const LUT_BYTES: usize = LUT_ENTRIES * 2;
pub const PRODUCT_BOUND: i16 = 16384;

#[derive(Clone, PartialEq, Eq)]
pub enum MultiplierKind {
    Exact,
    Lut(Arc<[i16]>),
    /// Operands have their `k` least significant bits zeroed before an exact
    /// multiply.
    Truncated(u8),
}

impl fmt::Debug for MultiplierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MultiplierKind::Exact => write!(f, "Exact"),
            MultiplierKind::Lut(t) => write!(f, "Lut(sha256={})", &lut_checksum(t)[..12]),
            MultiplierKind::Truncated(k) => write!(f, "Truncated({k})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiplierModel {
    name: String,
    kind: MultiplierKind,
}

#[inline]
pub fn lut_index(a: i8, b: i8) -> usize {
    (a as i32 + 128) as usize * 256 + (b as i32 + 128) as usize
}

/// Operand pair for a LUT index; inverse of [`lut_index`].
#[inline]
pub fn lut_operands(index: usize) -> (i8, i8) {
    (((index / 256) as i32 - 128) as i8, ((index % 256) as i32 - 128) as i8)
}

#[inline]
fn truncate_operand(x: i8, k: u8) -> i8 {
    if k >= 8 {
        0
    } else {
        x & !((1i8 << k).wrapping_sub(1))
    }
}

impl MultiplierModel {
    pub fn exact() -> Self {
        MultiplierModel {
            name: "exact".into(),
            kind: MultiplierKind::Exact,
        }
    }

    pub fn truncated(k: u8) -> Result<Self> {
        if k > 8 {
            return Err(Error::Config(format!(
                "truncated multiplier zeroes at most 8 bits, got {k}"
            )));
        }
        Ok(MultiplierModel {
            name: format!("trunc{k}"),
            kind: MultiplierKind::Truncated(k),
        })
    }

    pub fn from_table(name: impl Into<String>, table: Vec<i16>) -> Result<Self> {
        let name = name.into();
        if table.len() != LUT_ENTRIES {
            return Err(Error::load(
                &name,
                format!("table has {} entries, expected {LUT_ENTRIES}", table.len()),
            ));
        }
        if let Some(i) = table.iter().position(|v| v.abs() > PRODUCT_BOUND) {
            let (a, b) = lut_operands(i);
            return Err(Error::load(
                &name,
                format!("product {} for ({a}, {b}) outside [-16384, 16384]", table[i]),
            ));
        }
        Ok(MultiplierModel {
            name,
            kind: MultiplierKind::Lut(table.into()),
        })
    }

    /// Tabulates any model into a LUT model.
    pub fn to_table(&self) -> Vec<i16> {
        (0..LUT_ENTRIES)
            .map(|i| {
                let (a, b) = lut_operands(i);
                self.mul(a, b)
            })
            .collect()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &MultiplierKind {
        &self.kind
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.kind, MultiplierKind::Exact | MultiplierKind::Truncated(0))
    }

    #[inline]
    pub fn mul(&self, a: i8, b: i8) -> i16 {
        match &self.kind {
            MultiplierKind::Exact => a as i16 * b as i16,
            MultiplierKind::Lut(t) => t[lut_index(a, b)],
            MultiplierKind::Truncated(k) => {
                truncate_operand(a, *k) as i16 * truncate_operand(b, *k) as i16
            }
        }
    }

    /// Error statistics over all 65,536 operand pairs.
    pub fn profile(&self) -> ErrorProfile {
        ErrorProfile::from_sums(self.error_sums())
    }

    fn error_sums(&self) -> EdSums {
        // One task per `a` row; integer sums make the reduction order-free.
        exec::map_reduce(
            256,
            EdSums::default,
            |row| {
                let a = (row as i32 - 128) as i8;
                let mut s = EdSums::default();
                for b in i8::MIN..=i8::MAX {
                    s.push(a as i64 * b as i64 - self.mul(a, b) as i64);
                }
                s
            },
            EdSums::merge,
        )
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct EdSums {
    n: u64,
    sum: i64,
    sum_sq: i64,
    sum_abs: i64,
    nonzero: u64,
    worst: i64,
}

impl EdSums {
    fn push(&mut self, ed: i64) {
        self.n += 1;
        self.sum += ed;
        self.sum_sq += ed * ed;
        self.sum_abs += ed.abs();
        self.nonzero += (ed != 0) as u64;
        self.worst = self.worst.max(ed.abs());
    }

    fn merge(a: Self, b: Self) -> Self {
        EdSums {
            n: a.n + b.n,
            sum: a.sum + b.sum,
            sum_sq: a.sum_sq + b.sum_sq,
            sum_abs: a.sum_abs + b.sum_abs,
            nonzero: a.nonzero + b.nonzero,
            worst: a.worst.max(b.worst),
        }
    }
}

/// Error-distance statistics, ED(a, b) = a·b − approx(a, b), under a uniform
/// operand distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub mean_ed: f64,
    pub mae: f64,
    pub error_rate: f64,
    pub var_ed: f64,
    pub rms_ed: f64,
    pub worst_ed: u32,
}

impl ErrorProfile {
    fn from_sums(s: EdSums) -> Self {
        let n = s.n as f64;
        let n_i = s.n as i128;
        // population variance, computed exactly in integers before dividing
        let var_num = n_i * s.sum_sq as i128 - (s.sum as i128) * (s.sum as i128);
        ErrorProfile {
            mean_ed: s.sum as f64 / n,
            mae: s.sum_abs as f64 / n,
            error_rate: s.nonzero as f64 / n,
            var_ed: var_num as f64 / (n * n),
            rms_ed: (s.sum_sq as f64 / n).sqrt(),
            worst_ed: s.worst as u32,
        }
    }

    pub fn score(&self, weight_var: f64, weight_rms: f64) -> f64 {
        weight_var * self.var_ed + weight_rms * self.rms_ed
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub name: String,
    pub score: f64,
    pub profile: ErrorProfile,
}

/// Orders candidates by `weight_var·Var-ED + weight_rms·RMS-ED`, ascending,
/// ties broken by name.
pub fn rank_candidates(
    models: &[MultiplierModel],
    weight_var: f64,
    weight_rms: f64,
) -> Result<Vec<RankedCandidate>> {
    if !(weight_var >= 0.0 && weight_rms >= 0.0) || !weight_var.is_finite() || !weight_rms.is_finite()
    {
        return Err(Error::Config(format!(
            "ranking weights must be finite and non-negative, got ({weight_var}, {weight_rms})"
        )));
    }
    if weight_var == 0.0 && weight_rms == 0.0 {
        return Err(Error::Config("ranking weights cannot both be zero".into()));
    }
    let mut ranked: Vec<RankedCandidate> = models
        .iter()
        .map(|m| {
            let profile = m.profile();
            RankedCandidate {
                name: m.name().to_string(),
                score: profile.score(weight_var, weight_rms),
                profile,
            }
        })
        .collect();
    ranked.sort_by(|x, y| x.score.total_cmp(&y.score).then_with(|| x.name.cmp(&y.name)));
    Ok(ranked)
}

pub fn lut_checksum(table: &[i16]) -> String {
    sha256_hex(&table_bytes(table))
}

fn table_bytes(table: &[i16]) -> Vec<u8> {
    table.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".sha256");
    s.into()
}

/// Loads a LUT from a raw little-endian int16 file or, when the extension is
/// `.csv`, from `a,b,product` rows. A `<file>.sha256` sidecar, when present,
/// must match the table.
pub fn load_lut(path: &Path, name: &str) -> Result<MultiplierModel> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let table = if is_csv {
        read_csv_table(path, name)?
    } else {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() != LUT_BYTES {
            return Err(Error::load(
                name,
                format!("{} bytes, expected {LUT_BYTES}", bytes.len()),
            ));
        }
        bytes
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]))
            .collect()
    };
    let model = MultiplierModel::from_table(name, table)?;
    let side = sidecar(path);
    if side.exists() {
        let expected = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let MultiplierKind::Lut(t) = model.kind() else {
            unreachable!()
        };
        let actual = lut_checksum(t);
        if expected.trim() != actual {
            return Err(Error::load(
                name,
                format!("checksum mismatch: sidecar {} vs table {actual}", expected.trim()),
            ));
        }
    }
    Ok(model)
}

fn read_csv_table(path: &Path, name: &str) -> Result<Vec<i16>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::load(name, e.to_string()))?;
    let mut table = vec![0i16; LUT_ENTRIES];
    let mut seen = vec![false; LUT_ENTRIES];
    let mut rows = 0usize;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::load(name, e.to_string()))?;
        // tolerate a textual header row
        if line == 0 && rec.get(0).is_some_and(|f| f.parse::<i32>().is_err()) {
            continue;
        }
        if rec.len() != 3 {
            return Err(Error::load(name, format!("row {}: expected 3 fields", line + 1)));
        }
        let field = |i: usize| -> Result<i32> {
            rec[i]
                .parse::<i32>()
                .map_err(|e| Error::load(name, format!("row {}: {e}", line + 1)))
        };
        let (a, b, p) = (field(0)?, field(1)?, field(2)?);
        if !(-128..=127).contains(&a) || !(-128..=127).contains(&b) {
            return Err(Error::load(name, format!("row {}: operand out of int8 range", line + 1)));
        }
        if p.abs() > PRODUCT_BOUND as i32 {
            return Err(Error::load(
                name,
                format!("row {}: product {p} outside [-16384, 16384]", line + 1),
            ));
        }
        let idx = lut_index(a as i8, b as i8);
        if seen[idx] {
            return Err(Error::load(name, format!("row {}: duplicate pair ({a}, {b})", line + 1)));
        }
        seen[idx] = true;
        table[idx] = p as i16;
        rows += 1;
    }
    if rows != LUT_ENTRIES {
        return Err(Error::load(name, format!("{rows} rows, expected {LUT_ENTRIES}")));
    }
    Ok(table)
}

/// Writes the binary LUT and its `.sha256` sidecar.
pub fn save_lut_bin(model: &MultiplierModel, path: &Path) -> Result<()> {
    let table = model.to_table();
    fs::write(path, table_bytes(&table)).map_err(|e| Error::io(path, e))?;
    let side = sidecar(path);
    fs::write(&side, lut_checksum(&table) + "\n").map_err(|e| Error::io(&side, e))
}

pub fn save_lut_csv(model: &MultiplierModel, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(LUT_ENTRIES * 14);
    out.push_str("a,b,product\n");
    for i in 0..LUT_ENTRIES {
        let (a, b) = lut_operands(i);
        out.push_str(&format!("{a},{b},{}\n", model.mul(a, b)));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
