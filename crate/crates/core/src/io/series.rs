//! Diagnostic time series as CSV, one row per sample.
//!
//! Values are written in Rust's shortest round-trip exponent form, so a
//! file read back reproduces every `f64` exactly and reruns are
//! byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::diagnostics::TimeSeriesRecord;
use crate::error::{Error, Result};

/// Derived column: `l2_u_sq + l2_F_sq`.
pub const L2_SUM: &str = "l2_sum";

pub fn header(m_order: usize) -> Vec<String> {
    let mut h = vec!["time".to_string(), "l2_u_sq".into(), "l2_F_sq".into()];
    h.extend((0..=m_order).map(|j| format!("hm_sq_{j}")));
    h.extend(
        [
            "dissipation_u",
            "damping_F",
            "shell_mass_u",
            "shell_mass_F",
            "ratio_u",
            "ratio_F",
        ]
        .map(String::from),
    );
    h
}

fn row(record: &TimeSeriesRecord) -> Vec<String> {
    let mut values = vec![record.time, record.l2_u_sq, record.l2_f_sq];
    values.extend(&record.hm_sq);
    values.extend([
        record.dissipation_u,
        record.damping_f,
        record.shell_mass_u,
        record.shell_mass_f,
        record.ratio_u,
        record.ratio_f,
    ]);
    values.iter().map(|v| format!("{v:e}")).collect()
}

fn csv_error(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

/// Streams records to a CSV file, flushing after every row so a run that
/// stops early leaves a complete prefix.
pub struct SeriesWriter<W: Write> {
    inner: csv::Writer<W>,
    m_order: usize,
}

impl SeriesWriter<BufWriter<File>> {
    pub fn create(path: &Path, m_order: usize) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        Self::new(BufWriter::new(File::create(path)?), m_order)
    }
}

impl<W: Write> SeriesWriter<W> {
    pub fn new(sink: W, m_order: usize) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(sink);
        inner.write_record(header(m_order)).map_err(csv_error)?;
        Ok(Self { inner, m_order })
    }

    pub fn write(&mut self, record: &TimeSeriesRecord) -> Result<()> {
        if record.hm_sq.len() != self.m_order + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.m_order + 1,
                actual: record.hm_sq.len(),
            });
        }
        self.inner.write_record(row(record)).map_err(csv_error)?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| Error::Csv(e.error().to_string()))
    }
}

/// Header and numeric rows of a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
        let columns: Vec<String> = reader
            .headers()
            .map_err(csv_error)?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(csv_error)?;
            let values = rec
                .iter()
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        Error::Csv(format!("row {}: cannot parse {s:?} as a number", line + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(values);
        }
        Ok(Self { columns, rows })
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| {
            Error::Csv(format!(
                "no column {name:?}; available: {}",
                self.columns.join(", ")
            ))
        })
    }

    /// `(time, value)` pairs of a stored column or of [`L2_SUM`].
    pub fn column(&self, name: &str) -> Result<Vec<(f64, f64)>> {
        let t = self.index("time")?;
        if name == L2_SUM {
            let (a, b) = (self.index("l2_u_sq")?, self.index("l2_F_sq")?);
            return Ok(self.rows.iter().map(|r| (r[t], r[a] + r[b])).collect());
        }
        let c = self.index(name)?;
        Ok(self.rows.iter().map(|r| (r[t], r[c])).collect())
    }

    /// Rows as diagnostic records; the derivative order is read off the
    /// `hm_sq_*` columns.
    pub fn records(&self) -> Result<Vec<TimeSeriesRecord>> {
        let m_order = self
            .columns
            .iter()
            .filter(|c| c.starts_with("hm_sq_"))
            .count()
            .checked_sub(1)
            .ok_or_else(|| Error::Csv("no hm_sq_* columns".into()))?;
        if self.columns != header(m_order) {
            return Err(Error::Csv(format!(
                "unexpected columns {}",
                self.columns.join(", ")
            )));
        }
        Ok(self
            .rows
            .iter()
            .map(|r| {
                let tail = &r[4 + m_order..];
                TimeSeriesRecord {
                    time: r[0],
                    l2_u_sq: r[1],
                    l2_f_sq: r[2],
                    hm_sq: r[3..4 + m_order].to_vec(),
                    dissipation_u: tail[0],
                    damping_f: tail[1],
                    shell_mass_u: tail[2],
                    shell_mass_f: tail[3],
                    ratio_u: tail[4],
                    ratio_f: tail[5],
                }
            })
            .collect())
    }
}
