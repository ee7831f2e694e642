//! Observation series and their CSV form (`t,y1,...,yp`, header required).

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::ode::TimeGrid;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("invalid series: {0}")]
    Invalid(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Observations `y_1..y_n ∈ ℝᵖ` at strictly increasing times `t_1..t_n`,
/// together with the origin `t_0` at which the initial state lives.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    t0: f64,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl ObservationSeries {
    pub fn new(t0: f64, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self, SeriesError> {
        if times.len() != values.len() {
            return Err(SeriesError::Invalid(format!(
                "{} times but {} observations",
                times.len(),
                values.len()
            )));
        }
        let p = values.first().map_or(1, Vec::len);
        if p == 0 || values.iter().any(|v| v.len() != p) {
            return Err(SeriesError::Invalid("observations must share one positive dimension".into()));
        }
        if values.iter().flatten().chain(&times).any(|v| !v.is_finite()) || !t0.is_finite() {
            return Err(SeriesError::Invalid("missing or non-finite value".into()));
        }
        let mut prev = t0;
        for &t in &times {
            if t <= prev {
                return Err(SeriesError::Invalid(format!(
                    "times must be strictly increasing after t0 = {t0}: {prev} then {t}"
                )));
            }
            prev = t;
        }
        Ok(Self { t0, times, values })
    }

    /// Origin inferred as `t_1 − (t_2 − t_1)`; needs at least two observations.
    pub fn with_inferred_origin(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self, SeriesError> {
        if times.len() < 2 {
            return Err(SeriesError::Invalid(
                "cannot infer t0 from fewer than two observations".into(),
            ));
        }
        let t0 = times[0] - (times[1] - times[0]);
        Self::new(t0, times, values)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Time before observation `i` (0-based): `t_0` for `i = 0`.
    pub fn previous_time(&self, i: usize) -> f64 {
        if i == 0 {
            self.t0
        } else {
            self.times[i - 1]
        }
    }

    /// Prefix of the first `n` observations.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            t0: self.t0,
            times: self.times[..n].to_vec(),
            values: self.values[..n].to_vec(),
        }
    }

    pub fn grid(&self) -> Result<TimeGrid, SeriesError> {
        let mut points = Vec::with_capacity(self.len() + 1);
        points.push(self.t0);
        points.extend_from_slice(&self.times);
        TimeGrid::new(points).map_err(|e| SeriesError::Invalid(e.to_string()))
    }

    pub fn read_csv<R: Read>(reader: R, t0: Option<f64>) -> Result<Self, SeriesError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 {
            return Err(SeriesError::Invalid("header must be t,y1,...,yp".into()));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            let row = parsed.map_err(|e| SeriesError::Invalid(format!("row {}: {e}", line + 1)))?;
            if row.len() != headers.len() {
                return Err(SeriesError::Invalid(format!("row {} has {} fields", line + 1, row.len())));
            }
            times.push(row[0]);
            values.push(row[1..].to_vec());
        }
        match t0 {
            Some(t0) => Self::new(t0, times, values),
            None => Self::with_inferred_origin(times, values),
        }
    }

    pub fn read_csv_path(path: &Path, t0: Option<f64>) -> Result<Self, SeriesError> {
        Self::read_csv(std::fs::File::open(path)?, t0)
    }

    /// Writes with 17 significant digits, so parsing back is bit-exact.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SeriesError> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|k| format!("y{k}")));
        wtr.write_record(&header)?;
        for (t, y) in self.times.iter().zip(&self.values) {
            let mut row = vec![fmt_f64(*t)];
            row.extend(y.iter().map(|v| fmt_f64(*v)));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
