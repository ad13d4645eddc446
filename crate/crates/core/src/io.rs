//! CSV ingestion and the two case-study dataset layouts.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::data::{DataError, Dataset};
use crate::experiments::{CaseStudy, SuiteReport};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{0}: file is empty")]
    Empty(PathBuf),
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column '{column}': unknown category '{value}'")]
    UnknownCategory {
        row: usize,
        column: String,
        value: String,
    },
    #[error("unexpected shape: {0}")]
    Shape(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnKind {
    Numeric,
    /// Fixed token → value table; matching is case-insensitive.
    Ordinal(Vec<(String, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub features: Vec<(String, ColumnKind)>,
    pub response: String,
    /// When set, the response becomes `1{value > threshold}`.
    pub binarize_above: Option<f64>,
}

impl CsvSchema {
    pub fn numeric(features: &[&str], response: &str) -> Self {
        Self {
            features: features
                .iter()
                .map(|f| (f.to_string(), ColumnKind::Numeric))
                .collect(),
            response: response.to_string(),
            binarize_above: None,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset, IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if text.trim().is_empty() {
        return Err(IoError::Empty(path.to_path_buf()));
    }
    parse_csv(&text, schema).map_err(|e| match e {
        IoError::Csv { source, .. } => IoError::Csv {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Loads a CSV whose every column other than `response` is a numeric
/// feature, in header order.
pub fn load_numeric_csv(path: impl AsRef<Path>, response: &str) -> Result<Dataset, IoError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    let header = reader.headers().map_err(|source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    if header.is_empty() {
        return Err(IoError::Empty(path.to_path_buf()));
    }
    let features: Vec<&str> = header.iter().filter(|h| *h != response).collect();
    let schema = CsvSchema::numeric(&features, response);
    load_csv(path, &schema)
}

/// Parses CSV text; row numbers in errors are 1-based data rows.
pub fn parse_csv(text: &str, schema: &CsvSchema) -> Result<Dataset, IoError> {
    let csv_err = |source| IoError::Csv {
        path: PathBuf::new(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_err)?.clone();
    let locate = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IoError::MissingColumn(name.to_string()))
    };
    let feature_idx = schema
        .features
        .iter()
        .map(|(name, _)| locate(name))
        .collect::<Result<Vec<_>, _>>()?;
    let response_idx = locate(&schema.response)?;

    let mut columns = vec![Vec::new(); schema.features.len()];
    let mut response = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = i + 1;
        for (k, ((name, kind), &idx)) in schema.features.iter().zip(&feature_idx).enumerate() {
            let cell = record.get(idx).unwrap_or("");
            let v = match kind {
                ColumnKind::Numeric => parse_number(cell, row, name)?,
                ColumnKind::Ordinal(table) => table
                    .iter()
                    .find(|(token, _)| token.eq_ignore_ascii_case(cell))
                    .map(|&(_, v)| v)
                    .ok_or_else(|| IoError::UnknownCategory {
                        row,
                        column: name.clone(),
                        value: cell.to_string(),
                    })?,
            };
            columns[k].push(v);
        }
        let y = parse_number(record.get(response_idx).unwrap_or(""), row, &schema.response)?;
        response.push(match schema.binarize_above {
            Some(t) => f64::from(u8::from(y > t)),
            None => y,
        });
    }
    if response.is_empty() {
        return Err(IoError::Data(DataError::NoRows));
    }
    let named = schema
        .features
        .iter()
        .map(|(name, _)| name.clone())
        .zip(columns)
        .collect();
    Ok(Dataset::new(named, response, None)?)
}

fn parse_number(cell: &str, row: usize, column: &str) -> Result<f64, IoError> {
    cell.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| IoError::Parse {
            row,
            column: column.to_string(),
            value: cell.to_string(),
        })
}

/// Writes features plus a trailing response column `y`. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn dump_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let mut out = String::new();
    let mut header: Vec<&str> = ds.feature_names().iter().map(String::as_str).collect();
    header.push("y");
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..ds.n_rows() {
        let mut cells: Vec<String> = (0..ds.n_features()).map(|j| ds.value(i, j).to_string()).collect();
        cells.push(ds.response()[i].to_string());
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_file(path, &out)
}

/// Writes `contents` to `path`, creating missing parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    std::fs::write(path, contents).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Shape-check outcome in lenient mode.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

fn shape_check(problems: Vec<String>, strict: bool) -> Result<Vec<String>, IoError> {
    if strict && !problems.is_empty() {
        return Err(IoError::Shape(problems.join("; ")));
    }
    Ok(problems)
}

pub const PIMA_FEATURES: [&str; 8] = [
    "Pregnancies",
    "Glucose",
    "BloodPressure",
    "SkinThickness",
    "Insulin",
    "BMI",
    "DiabetesPedigreeFunction",
    "Age",
];

pub fn pima_schema() -> CsvSchema {
    CsvSchema::numeric(&PIMA_FEATURES, "Outcome")
}

/// Checks the canonical diabetes layout: 768 rows, the 8 clinical features
/// and a binary outcome with roughly 34.9% positives. Zeros are kept as-is.
pub fn prepare_pima(raw: Dataset, strict: bool) -> Result<Prepared, IoError> {
    raw.require_binary()?;
    if raw.n_features() != PIMA_FEATURES.len() {
        return Err(IoError::Shape(format!(
            "expected {} features, found {}",
            PIMA_FEATURES.len(),
            raw.n_features()
        )));
    }
    let mut problems = Vec::new();
    if raw.n_rows() != 768 {
        problems.push(format!("expected 768 rows, found {}", raw.n_rows()));
    }
    let rate = raw.response().iter().sum::<f64>() / raw.n_rows() as f64;
    if (rate - 0.349).abs() > 0.001 {
        problems.push(format!("positive rate {rate:.4}, expected about 0.349"));
    }
    let warnings = shape_check(problems, strict)?;
    Ok(Prepared {
        dataset: raw,
        warnings,
    })
}

pub fn load_pima(path: impl AsRef<Path>, strict: bool) -> Result<Prepared, IoError> {
    prepare_pima(load_csv(path, &pima_schema())?, strict)
}

pub const FORESTFIRE_FEATURES: [&str; 11] = [
    "X", "Y", "month", "FFMC", "DMC", "DC", "ISI", "temp", "RH", "wind", "rain",
];

pub const MONTHS: [&str; 12] = [
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];

/// Month as an ordinal 1–12, `day` omitted, label `1{area > 5}`.
pub fn forestfire_schema() -> CsvSchema {
    let months = MONTHS
        .iter()
        .enumerate()
        .map(|(i, m)| (m.to_string(), (i + 1) as f64))
        .collect::<Vec<_>>();
    CsvSchema {
        features: FORESTFIRE_FEATURES
            .iter()
            .map(|&f| {
                let kind = if f == "month" {
                    ColumnKind::Ordinal(months.clone())
                } else {
                    ColumnKind::Numeric
                };
                (f.to_string(), kind)
            })
            .collect(),
        response: "area".into(),
        binarize_above: Some(5.0),
    }
}

pub fn prepare_forestfire(raw: Dataset, strict: bool) -> Result<Prepared, IoError> {
    raw.require_binary()?;
    if raw.feature_names() != FORESTFIRE_FEATURES {
        return Err(IoError::Shape(format!(
            "expected features {FORESTFIRE_FEATURES:?}, found {:?}",
            raw.feature_names()
        )));
    }
    let mut problems = Vec::new();
    if raw.n_rows() != 517 {
        problems.push(format!("expected 517 rows, found {}", raw.n_rows()));
    }
    let warnings = shape_check(problems, strict)?;
    Ok(Prepared {
        dataset: raw,
        warnings,
    })
}

pub fn load_forestfire(path: impl AsRef<Path>, strict: bool) -> Result<Prepared, IoError> {
    prepare_forestfire(load_csv(path, &forestfire_schema())?, strict)
}

fn ensure_dir(dir: &Path) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes `results.csv`, `report.md` and `diagnostics.txt`.
pub fn write_suite_report(report: &SuiteReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, IoError> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let mut diagnostics = report.diagnostics().join("\n");
    if !diagnostics.is_empty() {
        diagnostics.push('\n');
    }
    let files = [
        ("results.csv", report.to_csv()),
        ("report.md", report.to_markdown()),
        ("diagnostics.txt", diagnostics),
    ];
    files
        .into_iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            write_file(&path, &body)?;
            Ok(path)
        })
        .collect()
}

/// Per method `<name>_<method>.txt` (the rendered tree) and `.json`, plus
/// `<name>_policies.csv` and `<name>.md`.
pub fn write_case_study(study: &CaseStudy, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, IoError> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let mut files = Vec::new();
    for t in &study.trees {
        let stem = format!("{}_{}", study.name, t.method.slug());
        let json = t
            .tree
            .to_json()
            .map_err(|e| IoError::Shape(format!("tree serialisation failed: {e}")))?;
        files.push((format!("{stem}.txt"), format!("{}\n", t.tree.render())));
        files.push((format!("{stem}.json"), format!("{json}\n")));
    }
    files.push((format!("{}_policies.csv", study.name), study.policies_csv()));
    files.push((format!("{}.md", study.name), study.to_markdown()));
    files
        .into_iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            write_file(&path, &body)?;
            Ok(path)
        })
        .collect()
}
