//! Score records, ingestion and alignment into aligned score matrices.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One metric score for one summary, i.e. one (system, input) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    #[serde(rename = "metric")]
    pub metric_name: String,
    pub system_id: String,
    pub input_id: String,
    pub score: f64,
}

/// On-disk encodings of score records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    /// Guesses the format from a file extension (`.csv` or anything else as JSONL).
    pub fn from_path(path: &std::path::Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

/// What to do with cells that are not scored by every requested metric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    /// Any missing cell is an error.
    #[default]
    Strict,
    /// Drop inputs with a missing cell, then drop systems that are still
    /// incomplete.
    DropIncomplete,
}

/// Scores of one metric, systems as rows and inputs as columns, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    metric: String,
    systems: Arc<[String]>,
    inputs: Arc<[String]>,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(
        metric: impl Into<String>,
        systems: Vec<String>,
        inputs: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        Self::from_parts(metric.into(), systems.into(), inputs.into(), values)
    }

    pub(crate) fn from_parts(
        metric: String,
        systems: Arc<[String]>,
        inputs: Arc<[String]>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if systems.len() < 2 || inputs.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "a score matrix needs at least 2 systems and 1 input, got {}x{}",
                systems.len(),
                inputs.len()
            )));
        }
        if values.len() != systems.len() * inputs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {}x{} matrix",
                values.len(),
                systems.len(),
                inputs.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite score {v} in matrix {metric:?}"
            )));
        }
        Ok(ScoreMatrix {
            metric,
            systems,
            inputs,
            values,
        })
    }

    /// Builds a matrix from rows with generated ids `s000..`, `d000..`.
    pub fn from_rows(metric: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Self::new(
            metric,
            default_ids("s", n),
            default_ids("d", m),
            rows.iter().flatten().copied().collect(),
        )
    }

    pub fn metric(&self) -> &str {
        &self.metric
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn n_systems(&self) -> usize {
        self.systems.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    /// Row-major values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, system: usize, input: usize) -> f64 {
        self.values[system * self.inputs.len() + input]
    }

    pub fn row(&self, system: usize) -> &[f64] {
        let m = self.inputs.len();
        &self.values[system * m..(system + 1) * m]
    }

    pub fn column(&self, input: usize) -> Vec<f64> {
        (0..self.n_systems()).map(|i| self.get(i, input)).collect()
    }

    /// A matrix with the same labels and new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::from_parts(
            self.metric.clone(),
            self.systems.clone(),
            self.inputs.clone(),
            values,
        )
    }

    pub fn renamed(&self, metric: impl Into<String>) -> Self {
        ScoreMatrix {
            metric: metric.into(),
            ..self.clone()
        }
    }

    /// Selects rows and columns by index; repeated indices are allowed.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Result<Self> {
        let m = self.n_inputs();
        let mut values = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                values.push(self.values[i * m + j]);
            }
        }
        Self::from_parts(
            self.metric.clone(),
            rows.iter().map(|&i| self.systems[i].clone()).collect(),
            cols.iter().map(|&j| self.inputs[j].clone()).collect(),
            values,
        )
    }

    pub fn same_shape(&self, other: &ScoreMatrix) -> bool {
        self.n_systems() == other.n_systems() && self.n_inputs() == other.n_inputs()
    }

    pub fn to_records(&self) -> Vec<ScoreRecord> {
        let mut out = Vec::with_capacity(self.values.len());
        for (i, system) in self.systems.iter().enumerate() {
            for (j, input) in self.inputs.iter().enumerate() {
                out.push(ScoreRecord {
                    metric_name: self.metric.clone(),
                    system_id: system.clone(),
                    input_id: input.clone(),
                    score: self.get(i, j),
                });
            }
        }
        out
    }
}

pub(crate) fn default_ids(prefix: &str, n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len().max(3);
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

pub(crate) fn ensure_aligned(a: &ScoreMatrix, b: &ScoreMatrix) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{:?} is {}x{} but {:?} is {}x{}",
            a.metric(),
            a.n_systems(),
            a.n_inputs(),
            b.metric(),
            b.n_systems(),
            b.n_inputs()
        )))
    }
}

/// A group of matrices over one shared system and input index.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSet {
    systems: Arc<[String]>,
    inputs: Arc<[String]>,
    matrices: BTreeMap<String, ScoreMatrix>,
}

impl ScoreSet {
    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn metrics(&self) -> impl Iterator<Item = &str> {
        self.matrices.keys().map(String::as_str)
    }

    pub fn get(&self, metric: &str) -> Result<&ScoreMatrix> {
        self.matrices
            .get(metric)
            .ok_or_else(|| Error::UnknownMetric(metric.to_string()))
    }

    pub fn to_records(&self) -> Vec<ScoreRecord> {
        self.matrices.values().flat_map(ScoreMatrix::to_records).collect()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawScore {
    Number(f64),
    Text(String),
}

#[derive(Deserialize)]
struct RawRecord {
    metric: String,
    system_id: String,
    input_id: String,
    score: RawScore,
}

impl RawRecord {
    fn into_record(self, line: usize) -> Result<ScoreRecord> {
        let score = match self.score {
            RawScore::Number(v) => v,
            RawScore::Text(s) => s.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("score {s:?} is not a number"),
            })?,
        };
        if !score.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite score {score}"),
            });
        }
        Ok(ScoreRecord {
            metric_name: self.metric,
            system_id: self.system_id,
            input_id: self.input_id,
            score,
        })
    }
}

/// Reads score records in file order. Line numbers in errors are 1-based
/// (for CSV the header is line 1).
pub fn parse_scores<R: Read>(reader: R, format: Format) -> Result<Vec<ScoreRecord>> {
    match format {
        Format::Jsonl => parse_jsonl(reader),
        Format::Csv => parse_csv(reader),
    }
}

fn parse_jsonl<R: Read>(reader: R) -> Result<Vec<ScoreRecord>> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        out.push(raw.into_record(lineno)?);
    }
    Ok(out)
}

fn parse_csv<R: Read>(reader: R) -> Result<Vec<ScoreRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let expected = ["metric", "system_id", "input_id", "score"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {:?}", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let lineno = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 4 fields, found {}", row.len()),
            });
        }
        let raw = RawRecord {
            metric: row[0].to_string(),
            system_id: row[1].to_string(),
            input_id: row[2].to_string(),
            score: RawScore::Text(row[3].to_string()),
        };
        out.push(raw.into_record(lineno)?);
    }
    Ok(out)
}

/// Writes records as JSONL. Scores use the shortest representation that
/// parses back to the same `f64`.
pub fn write_jsonl<W: Write>(records: &[ScoreRecord], mut writer: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_csv<W: Write>(records: &[ScoreRecord], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    wtr.write_record(["metric", "system_id", "input_id", "score"])
        .map_err(io)?;
    for r in records {
        wtr.write_record([
            r.metric_name.as_str(),
            r.system_id.as_str(),
            r.input_id.as_str(),
            &r.score.to_string(),
        ])
        .map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Aligns the requested metrics into complete matrices over a shared,
/// lexicographically ordered system and input index.
pub fn build_score_set(
    records: &[ScoreRecord],
    metrics: &[String],
    policy: MissingPolicy,
) -> Result<ScoreSet> {
    if metrics.is_empty() {
        return Err(Error::InvalidArgument("no metrics requested".into()));
    }
    let wanted: BTreeSet<&str> = metrics.iter().map(String::as_str).collect();
    let mut cells: HashMap<&str, HashMap<(&str, &str), f64>> =
        wanted.iter().map(|m| (*m, HashMap::new())).collect();
    for r in records {
        let Some(table) = cells.get_mut(r.metric_name.as_str()) else {
            continue;
        };
        if table
            .insert((r.system_id.as_str(), r.input_id.as_str()), r.score)
            .is_some()
        {
            return Err(Error::DuplicateScore {
                metric: r.metric_name.clone(),
                system: r.system_id.clone(),
                input: r.input_id.clone(),
            });
        }
    }
    for m in &wanted {
        if cells[m].is_empty() {
            return Err(Error::UnknownMetric((*m).to_string()));
        }
    }

    let mut systems: BTreeSet<&str> = BTreeSet::new();
    let mut inputs: BTreeSet<&str> = BTreeSet::new();
    for table in cells.values() {
        for (s, d) in table.keys() {
            systems.insert(s);
            inputs.insert(d);
        }
    }
    let complete = |s: &str, d: &str| cells.values().all(|t| t.contains_key(&(s, d)));

    match policy {
        MissingPolicy::Strict => {
            for m in &wanted {
                let table = &cells[m];
                let mut missing = Vec::new();
                for s in &systems {
                    for d in &inputs {
                        if !table.contains_key(&(*s, *d)) {
                            missing.push((*s, *d));
                        }
                    }
                }
                if let Some(&(s, d)) = missing.first() {
                    return Err(Error::MissingCells {
                        metric: (*m).to_string(),
                        count: missing.len(),
                        system: s.to_string(),
                        input: d.to_string(),
                    });
                }
            }
        }
        MissingPolicy::DropIncomplete => {
            let kept_inputs: BTreeSet<&str> = inputs
                .iter()
                .copied()
                .filter(|d| systems.iter().all(|s| complete(s, d)))
                .collect();
            let kept_inputs = if kept_inputs.is_empty() {
                // Nothing survives the input pass; fall back to pruning
                // systems first so a partially annotated set is still usable.
                inputs.clone()
            } else {
                kept_inputs
            };
            systems.retain(|s| kept_inputs.iter().all(|d| complete(s, d)));
            inputs = kept_inputs;
            inputs.retain(|d| systems.iter().all(|s| complete(s, d)));
        }
    }

    if systems.len() < 2 || inputs.is_empty() {
        let first = wanted.iter().next().copied().unwrap_or_default();
        return Err(Error::EmptyAfterAlignment(first.to_string()));
    }

    let systems: Arc<[String]> = systems.iter().map(|s| s.to_string()).collect();
    let inputs: Arc<[String]> = inputs.iter().map(|d| d.to_string()).collect();
    let mut matrices = BTreeMap::new();
    for m in &wanted {
        let table = &cells[m];
        let values = systems
            .iter()
            .flat_map(|s| inputs.iter().map(move |d| (s, d)))
            .map(|(s, d)| table[&(s.as_str(), d.as_str())])
            .collect();
        matrices.insert(
            (*m).to_string(),
            ScoreMatrix::from_parts(m.to_string(), systems.clone(), inputs.clone(), values)?,
        );
    }
    Ok(ScoreSet {
        systems,
        inputs,
        matrices,
    })
}
