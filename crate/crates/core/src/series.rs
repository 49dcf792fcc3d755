//! Node-by-sample trajectory records and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::noise::Signal;

/// `n × T` state record: row `i` is node `i`, column `k` is time `k·dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesMatrix {
    values: DMatrix<f64>,
    dt: f64,
}

impl TimeSeriesMatrix {
    pub fn new(values: DMatrix<f64>, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param(format!("sampling interval must be positive, got {dt}")));
        }
        if values.ncols() == 0 || values.nrows() == 0 {
            return Err(Error::param("time series needs at least one node and one sample"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let n = values.nrows();
            return Err(Error::numerical(format!(
                "non-finite value at node {}, sample {}",
                pos % n,
                pos / n
            )));
        }
        Ok(TimeSeriesMatrix { values, dt })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn node_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn sample_count(&self) -> usize {
        self.values.ncols()
    }

    pub fn node_series(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    pub fn node_signal(&self, i: usize) -> Signal {
        Signal {
            samples: self.node_series(i),
            dt: self.dt,
        }
    }

    /// First `len` samples.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.sample_count() {
            return Err(Error::param(format!(
                "prefix length {len} outside 1..={}",
                self.sample_count()
            )));
        }
        Ok(TimeSeriesMatrix {
            values: self.values.columns(0, len).into_owned(),
            dt: self.dt,
        })
    }

    /// `t,node_0,...,node_{n-1}` CSV.
    pub fn to_csv(&self) -> String {
        let n = self.node_count();
        let mut out = String::from("t");
        for i in 0..n {
            let _ = write!(out, ",node_{i}");
        }
        out.push('\n');
        for k in 0..self.sample_count() {
            let _ = write!(out, "{}", k as f64 * self.dt);
            for v in self.values.column(k).iter() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Parse the CSV written by [`to_csv`](Self::to_csv). `dt` is taken from
    /// the first two time stamps (1.0 for a single-row file).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(None, "empty time-series file"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return Err(Error::parse(Some(1), "expected header `t,node_0,...`"));
        }
        for (i, c) in cols[1..].iter().enumerate() {
            if *c != format!("node_{i}") {
                return Err(Error::parse(Some(1), format!("column {} should be node_{i}, got {c}", i + 1)));
            }
        }
        let n = cols.len() - 1;
        let mut times = Vec::new();
        let mut data = Vec::new();
        for (idx, line) in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n + 1 {
                return Err(Error::parse(
                    Some(idx + 1),
                    format!("expected {} fields, found {}", n + 1, fields.len()),
                ));
            }
            for (c, f) in fields.iter().enumerate() {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(Some(idx + 1), format!("bad number {f:?}: {e}")))?;
                if c == 0 {
                    times.push(v);
                } else {
                    data.push(v);
                }
            }
        }
        if times.is_empty() {
            return Err(Error::parse(None, "time series has no samples"));
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 1.0 };
        // data is sample-major; DMatrix::from_column_slice wants column-major n×T
        let values = DMatrix::from_column_slice(n, times.len(), &data);
        TimeSeriesMatrix::new(values, dt)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text).map_err(|e| e.at_path(path))
    }
}
