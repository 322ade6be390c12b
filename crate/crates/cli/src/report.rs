//! Experiment reports as CSV (streamed row by row) and JSON.
//!
//! CSV layout: `# key: value` provenance comments, one header row, numeric
//! rows, and on interruption a final `# truncated: ...` comment. Values are
//! written in Rust's shortest round-trip form, the same digits `serde_json`
//! emits, so both formats carry identical numbers.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::RunError;

/// Name of the per-row timing column. Timings measure this crate's own
/// backend only and are not comparable with other solvers.
pub const TIMING_COLUMN: &str = "wall_clock_s_backend_relative";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub experiment: String,
    pub m: usize,
    pub k: usize,
    pub seed: u64,
    pub tol: f64,
    pub backend: String,
    pub grid: Option<usize>,
    pub count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub values: Vec<f64>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    /// Data columns, without the timing column.
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    /// Rows the experiment would have produced without interruption.
    pub expected_rows: usize,
    pub truncated: bool,
}

impl ExperimentReport {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.values[i]).collect())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<(), RunError> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn read_json<R: std::io::Read>(r: R) -> Result<Self, RunError> {
        Ok(serde_json::from_reader(r)?)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), RunError> {
        let mut stream = CsvStream::start(w, &self.provenance, &self.columns, self.expected_rows)?;
        for row in &self.rows {
            stream.push(row)?;
        }
        stream.finish(self.truncated.then_some("interrupted"))?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, RunError> {
        let mut comments = Vec::new();
        let mut body = String::new();
        for line in r.lines() {
            let line = line?;
            match line.strip_prefix("# ") {
                Some(c) => comments.push(c.to_string()),
                None => {
                    body.push_str(&line);
                    body.push('\n');
                }
            }
        }
        let field = |key: &str| -> Option<&str> {
            comments
                .iter()
                .find_map(|c| c.strip_prefix(key)?.strip_prefix(": "))
        };
        let required = |key: &str| -> Result<&str, RunError> {
            field(key).ok_or_else(|| RunError::Malformed(format!("missing `# {key}:` comment")))
        };
        let num = |key: &str| -> Result<usize, RunError> {
            required(key)?
                .parse()
                .map_err(|_| RunError::Malformed(format!("bad `{key}`")))
        };
        let opt = |key: &str| -> Result<Option<usize>, RunError> {
            field(key)
                .map(|v| {
                    v.parse()
                        .map_err(|_| RunError::Malformed(format!("bad `{key}`")))
                })
                .transpose()
        };
        let provenance = Provenance {
            experiment: required("experiment")?.to_string(),
            m: num("m")?,
            k: num("k")?,
            seed: required("seed")?
                .parse()
                .map_err(|_| RunError::Malformed("bad `seed`".into()))?,
            tol: required("tol")?
                .parse()
                .map_err(|_| RunError::Malformed("bad `tol`".into()))?,
            backend: required("backend")?.to_string(),
            grid: opt("grid")?,
            count: opt("count")?,
        };
        let expected_rows = num("rows")?;
        let truncated = field("truncated").is_some();

        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if header.last().map(String::as_str) != Some(TIMING_COLUMN) {
            return Err(RunError::Malformed(format!(
                "last column must be `{TIMING_COLUMN}`"
            )));
        }
        let columns = header[..header.len() - 1].to_vec();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let mut values = record
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| RunError::Malformed(format!("non-numeric value {v:?}")))
                })
                .collect::<Result<Vec<f64>, RunError>>()?;
            let wall_clock_s = values.pop().unwrap_or(f64::NAN);
            rows.push(Row {
                values,
                wall_clock_s,
            });
        }
        Ok(ExperimentReport {
            provenance,
            columns,
            rows,
            expected_rows,
            truncated,
        })
    }
}

/// Writes a CSV report incrementally and flushes after every row, so an
/// interrupted run leaves a valid prefix on disk.
pub struct CsvStream<W: Write> {
    writer: csv::Writer<W>,
    written: usize,
    expected: usize,
}

impl<W: Write> CsvStream<W> {
    pub fn start(
        mut w: W,
        p: &Provenance,
        columns: &[String],
        expected: usize,
    ) -> Result<Self, RunError> {
        writeln!(w, "# experiment: {}", p.experiment)?;
        writeln!(w, "# m: {}", p.m)?;
        writeln!(w, "# k: {}", p.k)?;
        writeln!(w, "# seed: {}", p.seed)?;
        writeln!(w, "# tol: {:e}", p.tol)?;
        writeln!(w, "# backend: {}", p.backend)?;
        if let Some(g) = p.grid {
            writeln!(w, "# grid: {g}")?;
        }
        if let Some(c) = p.count {
            writeln!(w, "# count: {c}")?;
        }
        writeln!(w, "# rows: {expected}")?;
        writeln!(w, "# timing: backend-relative wall clock, seconds")?;
        let mut writer = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = columns.iter().map(String::as_str).collect();
        header.push(TIMING_COLUMN);
        writer.write_record(&header)?;
        writer.flush()?;
        Ok(CsvStream {
            writer,
            written: 0,
            expected,
        })
    }

    pub fn push(&mut self, row: &Row) -> Result<(), RunError> {
        let fields = row
            .values
            .iter()
            .chain(std::iter::once(&row.wall_clock_s))
            .map(|v| v.to_string());
        self.writer.write_record(fields)?;
        self.writer.flush()?;
        self.written += 1;
        Ok(())
    }

    /// Flushes and returns the sink. With `Some(reason)` (`interrupted` or
    /// `failed`) a truncation marker comment is appended first.
    pub fn finish(self, truncation: Option<&str>) -> Result<W, RunError> {
        let mut w = self
            .writer
            .into_inner()
            .map_err(|e| RunError::Io(e.into_error()))?;
        if let Some(reason) = truncation {
            writeln!(
                w,
                "# truncated: {reason} after {} of {} rows",
                self.written, self.expected
            )?;
        }
        w.flush()?;
        Ok(w)
    }
}
