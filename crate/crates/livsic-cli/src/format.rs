//! On-disk formats: JSON with complex numbers as `[re, im]` pairs, CSV with a
//! header row and '.' decimals. Serialization is canonical (pretty JSON with
//! a trailing newline) so parse -> serialize round-trips byte-identically.

use livsic::colligation::{Colligation, Signature};
use livsic::factorize::BlaschkeProduct;
use livsic::models::{ContinuousModelData, DiscreteModelData};
use livsic::numerics::{cplx, CMatrix, CVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

type ComplexPair = (f64, f64);

fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<ComplexPair>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| (m[(i, j)].re, m[(i, j)].im)).collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<ComplexPair>], what: &str) -> Result<CMatrix, CliError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::parse(format!("{what}: ragged rows")));
    }
    Ok(CMatrix::from_fn(nrows, ncols, |i, j| cplx(rows[i][j].0, rows[i][j].1)))
}

/// A bare complex matrix, as nested arrays of `[re, im]`.
pub fn read_matrix(path: &std::path::Path) -> Result<CMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    let rows: Vec<Vec<ComplexPair>> =
        serde_json::from_str(&text).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    if rows.is_empty() {
        return Err(CliError::parse(format!("{}: empty matrix", path.display())));
    }
    rows_to_matrix(&rows, "matrix")
}

#[derive(Serialize, Deserialize)]
pub struct ColligationFile {
    pub schema: u32,
    pub n: usize,
    pub r: usize,
    pub a: Vec<Vec<ComplexPair>>,
    pub phi: Vec<Vec<ComplexPair>>,
    pub j: Vec<i8>,
}

impl ColligationFile {
    pub fn from_colligation(c: &Colligation) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            n: c.n(),
            r: c.r(),
            a: matrix_to_rows(c.a()),
            phi: matrix_to_rows(c.phi()),
            j: c.j().signs().to_vec(),
        }
    }

    pub fn into_colligation(self) -> Result<Colligation, CliError> {
        if self.schema != SCHEMA_VERSION {
            return Err(CliError::parse(format!("unsupported schema version {}", self.schema)));
        }
        let a = rows_to_matrix(&self.a, "a")?;
        let phi = rows_to_matrix(&self.phi, "phi")?;
        if a.nrows() != self.n || phi.nrows() != self.r {
            return Err(CliError::parse("declared dimensions do not match the payload".into()));
        }
        let j = Signature::new(self.j).map_err(|e| CliError::parse(e.to_string()))?;
        let c = Colligation::new(a, phi, j).map_err(|e| CliError::parse(e.to_string()))?;
        let report = c.validate(1e-8 * (1.0 + livsic::numerics::norm(c.a())));
        if !report.pass {
            return Err(CliError::domain(format!(
                "file does not describe a colligation: identity residual {:.3e}",
                report.identity_residual
            )));
        }
        Ok(c)
    }
}

pub fn read_colligation(path: &std::path::Path) -> Result<Colligation, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    let file: ColligationFile =
        serde_json::from_str(&text).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    file.into_colligation()
}

#[derive(Serialize, Deserialize)]
pub struct FactorRecord {
    pub lambda: ComplexPair,
    pub eta: Vec<ComplexPair>,
}

#[derive(Serialize, Deserialize)]
pub struct BlaschkeFile {
    pub schema: u32,
    pub j: Vec<i8>,
    pub factors: Vec<FactorRecord>,
}

impl BlaschkeFile {
    pub fn from_product(bp: &BlaschkeProduct) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            j: bp.j.signs().to_vec(),
            factors: bp
                .factors
                .iter()
                .map(|f| FactorRecord {
                    lambda: (f.lambda.re, f.lambda.im),
                    eta: f.eta.iter().map(|x| (x.re, x.im)).collect(),
                })
                .collect(),
        }
    }

}

/// Discrete model data: `{"entries": [{"lambda": [re, im], "eta": [...]}]}`
/// with an optional `"j"` signature array (defaults to all +1).
#[derive(Serialize, Deserialize)]
pub struct DiscreteModelFile {
    #[serde(default)]
    pub j: Option<Vec<i8>>,
    pub entries: Vec<FactorRecord>,
}

impl DiscreteModelFile {
    pub fn into_data(self) -> Result<(DiscreteModelData, Option<Signature>), CliError> {
        let data = DiscreteModelData {
            lambdas: self.entries.iter().map(|e| cplx(e.lambda.0, e.lambda.1)).collect(),
            etas: self
                .entries
                .iter()
                .map(|e| CVector::from_fn(e.eta.len(), |i, _| cplx(e.eta[i].0, e.eta[i].1)))
                .collect(),
        };
        let j = match self.j {
            Some(signs) => Some(Signature::new(signs).map_err(|e| CliError::parse(e.to_string()))?),
            None => None,
        };
        Ok((data, j))
    }
}

pub fn read_discrete_model(
    path: &std::path::Path,
) -> Result<(DiscreteModelData, Option<Signature>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    let file: DiscreteModelFile =
        serde_json::from_str(&text).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    file.into_data()
}

/// Continuous model CSV: header `t,a,xi_re_<i>_<j>,xi_im_<i>_<j>,...` with
/// `r*p` complex entries per row; `p` is passed separately.
pub fn read_continuous_model(path: &std::path::Path, p: usize) -> Result<ContinuousModelData, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| CliError::parse(format!("{}: empty file", path.display())))?;
    let cols = header.split(',').count();
    if cols < 4 || (cols - 2) % 2 != 0 {
        return Err(CliError::parse(format!("{}: expected t,a and re/im pairs", path.display())));
    }
    let entries = (cols - 2) / 2;
    if entries % p != 0 {
        return Err(CliError::parse(format!("{path:?}: {entries} xi entries not divisible by p = {p}", path = path.display())));
    }
    let r = entries / p;
    let mut grid = Vec::new();
    let mut a = Vec::new();
    let mut xi = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::parse(format!("{}: line {}: {e}", path.display(), lineno + 2)))?;
        if fields.len() != cols {
            return Err(CliError::parse(format!("{}: line {} has {} fields, expected {cols}", path.display(), lineno + 2, fields.len())));
        }
        grid.push(fields[0]);
        a.push(fields[1]);
        xi.push(CMatrix::from_fn(r, p, |i, j| {
            let base = 2 + 2 * (i * p + j);
            cplx(fields[base], fields[base + 1])
        }));
    }
    let ell = *grid.last().ok_or_else(|| CliError::parse("no data rows".into()))?;
    ContinuousModelData::new(ell, grid, a, xi).map_err(|e| CliError::domain(e.to_string()))
}

/// Stieltjes weight CSV: header `t,h_re_<i>_<j>,h_im_<i>_<j>,...` (r^2 pairs).
pub fn read_weight(path: &std::path::Path) -> Result<livsic::multint::StieltjesWeight, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| CliError::parse(format!("{}: empty file", path.display())))?;
    let cols = header.split(',').count();
    if cols < 3 || (cols - 1) % 2 != 0 {
        return Err(CliError::parse(format!("{}: expected t plus re/im pairs", path.display())));
    }
    let entries = (cols - 1) / 2;
    let r = (entries as f64).sqrt().round() as usize;
    if r * r != entries {
        return Err(CliError::parse(format!("{}: {entries} entries is not a square matrix", path.display())));
    }
    let mut grid = Vec::new();
    let mut samples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::parse(format!("{}: line {}: {e}", path.display(), lineno + 2)))?;
        if fields.len() != cols {
            return Err(CliError::parse(format!("{}: line {} has {} fields", path.display(), lineno + 2, fields.len())));
        }
        grid.push(fields[0]);
        samples.push(CMatrix::from_fn(r, r, |i, j| {
            let base = 1 + 2 * (i * r + j);
            cplx(fields[base], fields[base + 1])
        }));
    }
    livsic::multint::StieltjesWeight::new(grid, samples).map_err(|e| CliError::domain(e.to_string()))
}

/// Canonical JSON rendering: pretty with a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialization cannot fail");
    s.push('\n');
    s
}

pub fn csv_matrix_header(prefix: &str, rows: usize, cols: usize) -> String {
    let mut parts = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            parts.push(format!("{prefix}_re_{i}_{j}"));
            parts.push(format!("{prefix}_im_{i}_{j}"));
        }
    }
    parts.join(",")
}

pub fn csv_matrix_row(m: &CMatrix) -> String {
    let mut parts = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            parts.push(format!("{}", m[(i, j)].re));
            parts.push(format!("{}", m[(i, j)].im));
        }
    }
    parts.join(",")
}

/// Joins fixed leading fields, a possibly empty matrix segment, and a
/// trailing field without producing empty columns.
pub fn csv_fields(leading: Vec<String>, matrix_segment: String, trailing: &str) -> String {
    let mut parts = leading;
    if !matrix_segment.is_empty() {
        parts.push(matrix_segment);
    }
    parts.push(trailing.to_string());
    parts.join(",")
}
