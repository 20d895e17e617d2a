//! CSV ingestion and output.
//!
//! Every input is a comma-separated file with a header row, `.` as decimal
//! point, and LF or CRLF line ends. Rows in diagnostics are 1-based data
//! rows (the header is not counted).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dpboot_core::{ImputedDataset, LabeledDataset, PosteriorDraws};

use crate::error::{CliError, Result};

/// A parsed numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    /// Row-major, `rows × headers.len()`.
    pub values: Vec<f64>,
    pub rows: usize,
}

impl Table {
    pub fn width(&self) -> usize {
        self.headers.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i)[j]).collect()
    }

    /// Columns `cols`, row-major.
    fn gather(&self, cols: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            let row = self.row(i);
            out.extend(cols.iter().map(|&j| row[j]));
        }
        out
    }
}

fn csv_error(path: &Path, err: csv::Error) -> CliError {
    if let csv::ErrorKind::Io(_) = err.kind() {
        if let csv::ErrorKind::Io(e) = err.into_kind() {
            return CliError::Io {
                path: path.to_path_buf(),
                source: e,
            };
        }
        unreachable!()
    }
    CliError::Csv {
        path: path.to_path_buf(),
        reason: err.to_string(),
    }
}

/// Reads a numeric CSV table. Cells must parse as finite `f64`.
pub fn read_table(path: &Path) -> Result<Table> {
    let bytes = fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(CliError::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if let Some(j) = headers.iter().position(|h| h.is_empty()) {
        return Err(CliError::Schema {
            path: path.to_path_buf(),
            reason: format!("header column {} is unnamed", j + 1),
        });
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        rows += 1;
        if record.len() != headers.len() {
            return Err(CliError::Ragged {
                path: path.to_path_buf(),
                row: rows,
                expected: headers.len(),
                found: record.len(),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(CliError::NotNumeric {
                        path: path.to_path_buf(),
                        row: rows,
                        column: headers[j].clone(),
                        value: cell.to_owned(),
                    })
                }
            }
        }
    }
    if rows == 0 {
        return Err(CliError::NoRows {
            path: path.to_path_buf(),
        });
    }
    Ok(Table { headers, values, rows })
}

/// Loads `y,x1,…,xd`: the first column is the response, the rest are
/// covariates. `classes` declares the responses to be class indices.
pub fn load_labeled(path: &Path, classes: Option<usize>) -> Result<LabeledDataset> {
    let table = read_table(path)?;
    if table.headers[0] != "y" {
        return Err(CliError::Schema {
            path: path.to_path_buf(),
            reason: format!("first column must be `y`, found `{}`", table.headers[0]),
        });
    }
    let d = table.width() - 1;
    let y = table.column(0);
    let x = table.gather(&(1..=d).collect::<Vec<_>>());
    let ds = LabeledDataset::new(y, x, d).map_err(|e| CliError::in_file(path, e))?;
    match classes {
        Some(k) => ds.with_classes(k).map_err(|e| CliError::in_file(path, e)),
        None => Ok(ds),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ImputedSchema {
    /// `x1,…,xd,y`
    Labels,
    /// `x1,…,xd,p1,…,pK`
    Probabilities,
}

/// Column roles of an imputed file: `y` (hard label), `p1…pK`
/// (probabilities), `g` (prompt weight); everything else is a covariate, in
/// file order.
struct ImputedColumns {
    covariates: Vec<usize>,
    label: Option<usize>,
    probabilities: Vec<usize>,
    prompt_weight: Option<usize>,
}

fn is_probability_column(name: &str) -> bool {
    name.len() > 1 && name.starts_with('p') && name[1..].bytes().all(|b| b.is_ascii_digit())
}

fn classify(path: &Path, headers: &[String]) -> Result<ImputedColumns> {
    let mut cols = ImputedColumns {
        covariates: Vec::new(),
        label: None,
        probabilities: Vec::new(),
        prompt_weight: None,
    };
    for (j, h) in headers.iter().enumerate() {
        let slot = match h.as_str() {
            "y" => &mut cols.label,
            "g" => &mut cols.prompt_weight,
            name if is_probability_column(name) => {
                let expected = format!("p{}", cols.probabilities.len() + 1);
                if name != expected {
                    return Err(CliError::Schema {
                        path: path.to_path_buf(),
                        reason: format!(
                            "probability columns must be p1, p2, …; found `{name}` where `{expected}` was expected"
                        ),
                    });
                }
                cols.probabilities.push(j);
                continue;
            }
            _ => {
                cols.covariates.push(j);
                continue;
            }
        };
        if slot.replace(j).is_some() {
            return Err(CliError::Schema {
                path: path.to_path_buf(),
                reason: format!("column `{h}` appears twice"),
            });
        }
    }
    Ok(cols)
}

/// Loads imputed rows. With `schema == None` the schema follows the header:
/// probabilities when `p` columns are present, labels otherwise.
pub fn load_imputed(path: &Path, schema: Option<ImputedSchema>) -> Result<ImputedDataset> {
    let table = read_table(path)?;
    let cols = classify(path, &table.headers)?;
    let schema = schema.unwrap_or(if cols.probabilities.is_empty() {
        ImputedSchema::Labels
    } else {
        ImputedSchema::Probabilities
    });
    let d = cols.covariates.len();
    let x = table.gather(&cols.covariates);
    let invalid = |e| CliError::in_file(path, e);
    let mut ds = match schema {
        ImputedSchema::Labels => {
            let y = cols.label.ok_or_else(|| CliError::Schema {
                path: path.to_path_buf(),
                reason: "labels schema needs a `y` column".into(),
            })?;
            ImputedDataset::from_labels(x, d, table.column(y)).map_err(invalid)?
        }
        ImputedSchema::Probabilities => {
            if cols.probabilities.is_empty() {
                return Err(CliError::Schema {
                    path: path.to_path_buf(),
                    reason: "probabilities schema needs columns p1,…,pK".into(),
                });
            }
            let k = cols.probabilities.len();
            let ds = ImputedDataset::from_probabilities(x, d, table.gather(&cols.probabilities), k).map_err(invalid)?;
            match cols.label {
                Some(y) => ds.with_labels(table.column(y)).map_err(invalid)?,
                None => ds,
            }
        }
    };
    if let Some(g) = cols.prompt_weight {
        ds = ds.with_prompt_weights(table.column(g)).map_err(invalid)?;
    }
    Ok(ds)
}

/// Reads a single-column file of numbers (any header name).
pub fn load_vector(path: &Path) -> Result<Vec<f64>> {
    let table = read_table(path)?;
    if table.width() != 1 {
        return Err(CliError::Schema {
            path: path.to_path_buf(),
            reason: format!("expected one column, found {}", table.width()),
        });
    }
    Ok(table.values)
}

/// Reads covariate rows for prediction: every column is a covariate.
pub fn load_points(path: &Path) -> Result<Table> {
    read_table(path)
}

/// Reads `theta_1,…,theta_p[,converged]`.
pub fn load_draws(path: &Path) -> Result<PosteriorDraws> {
    let table = read_table(path)?;
    let has_flag = table.headers.last().is_some_and(|h| h == "converged");
    let p = table.width() - usize::from(has_flag);
    for (j, h) in table.headers[..p].iter().enumerate() {
        if *h != format!("theta_{}", j + 1) {
            return Err(CliError::Schema {
                path: path.to_path_buf(),
                reason: format!("column {} must be `theta_{}`, found `{h}`", j + 1, j + 1),
            });
        }
    }
    if p == 0 {
        return Err(CliError::Schema {
            path: path.to_path_buf(),
            reason: "no theta columns".into(),
        });
    }
    let values = table.gather(&(0..p).collect::<Vec<_>>());
    let converged = if has_flag {
        table.column(p).iter().map(|&c| c != 0.0).collect()
    } else {
        vec![true; table.rows]
    };
    PosteriorDraws::from_matrix(values, p, converged).map_err(|e| CliError::in_file(path, e))
}

/// Shortest text that parses back to exactly `v`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes rows under `header` with LF line ends.
pub fn write_csv<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let err = |e: csv::Error| csv_error(path, e);
    writer.write_record(header).map_err(err)?;
    for row in rows {
        writer.write_record(&row).map_err(err)?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.into_error(),
    })?;
    write_bytes(path, &bytes)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = fs::File::create(path).map_err(io)?;
    file.write_all(bytes).map_err(io)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

/// Serializes a labeled dataset as `y,x1,…,xd`.
pub fn write_labeled(path: &Path, data: &LabeledDataset) -> Result<()> {
    let mut header = vec!["y".to_owned()];
    header.extend((1..=data.dim()).map(|j| format!("x{j}")));
    let rows = (0..data.len()).map(|i| {
        let mut row = vec![format_f64(data.responses()[i])];
        row.extend(data.covariates(i).iter().map(|&v| format_f64(v)));
        row
    });
    write_csv(path, &header, rows)
}

/// Serializes imputed rows as `x1,…,xd[,y][,p1,…,pK][,g]`.
pub fn write_imputed(path: &Path, data: &ImputedDataset) -> Result<()> {
    let k = data.probability_columns();
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    if data.labels().is_some() {
        header.push("y".into());
    }
    header.extend((1..=k).map(|c| format!("p{c}")));
    if data.prompt_weights().is_some() {
        header.push("g".into());
    }
    let rows = (0..data.len()).map(|i| {
        let mut row: Vec<String> = data.covariates(i).iter().map(|&v| format_f64(v)).collect();
        if let Some(labels) = data.labels() {
            row.push(format_f64(labels[i]));
        }
        if let Some(p) = data.probability_row(i) {
            row.extend(p.iter().map(|&v| format_f64(v)));
        }
        if let Some(g) = data.prompt_weights() {
            row.push(format_f64(g[i]));
        }
        row
    });
    write_csv(path, &header, rows)
}

/// Writes `theta_1,…,theta_p,converged` with `converged` as 1/0.
pub fn write_draws(path: &Path, draws: &PosteriorDraws) -> Result<()> {
    let mut header: Vec<String> = (1..=draws.dim()).map(|j| format!("theta_{j}")).collect();
    header.push("converged".into());
    let rows = draws.iter().zip(draws.converged()).map(|(theta, &ok)| {
        let mut row: Vec<String> = theta.iter().map(|&v| format_f64(v)).collect();
        row.push(if ok { "1" } else { "0" }.into());
        row
    });
    write_csv(path, &header, rows)
}

pub fn ensure_dir(path: &Path) -> Result<PathBuf> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(path.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn labeled_examples() {
        let dir = tempfile::tempdir().unwrap();
        let ds = load_labeled(&file(&dir, "a.csv", "y\n1\n0\n1\n"), None).unwrap();
        assert_eq!((ds.len(), ds.dim()), (3, 0));
        assert_eq!(ds.responses(), &[1.0, 0.0, 1.0]);
        let ds = load_labeled(&file(&dir, "b.csv", "y,x1\r\n2.5,1.0\r\n"), None).unwrap();
        assert_eq!((ds.len(), ds.dim()), (1, 1));
        let err = load_labeled(&file(&dir, "c.csv", "y,x1\n1,foo\n"), None).unwrap_err();
        match &err {
            CliError::NotNumeric { row, column, .. } => assert_eq!((*row, column.as_str()), (1, "x1")),
            other => panic!("{other:?}"),
        }
        assert!(err.to_string().contains("row 1, column x1"));
    }

    #[test]
    fn labeled_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("none.csv");
        assert!(matches!(load_labeled(&missing, None), Err(CliError::Io { .. })));
        assert!(matches!(
            load_labeled(&file(&dir, "e.csv", ""), None),
            Err(CliError::EmptyFile { .. })
        ));
        assert!(matches!(
            load_labeled(&file(&dir, "h.csv", "y,x1\n"), None),
            Err(CliError::NoRows { .. })
        ));
        match load_labeled(&file(&dir, "r.csv", "y,x1\n1,2\n3\n"), None) {
            Err(CliError::Ragged {
                row: 2,
                expected: 2,
                found: 1,
                ..
            }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            load_labeled(&file(&dir, "n.csv", "y\nNaN\n"), None),
            Err(CliError::NotNumeric { .. })
        ));
        match load_labeled(&file(&dir, "k.csv", "y\n0\n3\n"), Some(2)) {
            Err(e @ CliError::Invalid { .. }) => assert!(e.to_string().contains("row 2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn imputed_examples() {
        let dir = tempfile::tempdir().unwrap();
        let ds = load_imputed(&file(&dir, "p.csv", "p1\n0.9\n0.1\n"), None).unwrap();
        assert_eq!((ds.len(), ds.classes()), (2, Some(2)));
        let ds = load_imputed(&file(&dir, "q.csv", "x1,p1,p2\n0,0.5001,0.5001\n"), None).unwrap();
        let row = ds.probability_row(0).unwrap();
        assert!((row[0] - 0.5).abs() < 1e-15 && (row[1] - 0.5).abs() < 1e-15);
        let err = load_imputed(&file(&dir, "bad.csv", "p1,p2\n0.9,0.9\n"), None).unwrap_err();
        assert!(err.to_string().contains("1.8"), "{err}");
        let err = load_imputed(&file(&dir, "neg.csv", "p1\n1.5\n"), None).unwrap_err();
        assert!(err.to_string().contains("outside [0, 1]"), "{err}");
        let err = load_imputed(&file(&dir, "lab.csv", "x1,p1\n0,0.5\n"), Some(ImputedSchema::Labels)).unwrap_err();
        assert!(matches!(err, CliError::Schema { .. }));
        let ds = load_imputed(&file(&dir, "l.csv", "x1,y,g\n0.5,1,2\n1.5,0,1\n"), None).unwrap();
        assert_eq!(ds.labels().unwrap(), &[1.0, 0.0]);
        assert_eq!(ds.prompt_weights().unwrap(), &[2.0, 1.0]);
    }

    #[test]
    fn draws_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let draws = PosteriorDraws::from_matrix(vec![0.1, -2.5e-300, 1.0 / 3.0, 7.0], 2, vec![true, false]).unwrap();
        let p = dir.path().join("d.csv");
        write_draws(&p, &draws).unwrap();
        assert_eq!(load_draws(&p).unwrap(), draws);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("theta_1,theta_2,converged\n"));
    }
}
