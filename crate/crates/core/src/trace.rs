//! Run traces: header, per-iteration rows and a summary, plus the CSV format.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::{Algorithm, Budget, StepSchedule};

/// Exact CSV header row.
pub const CSV_HEADER: &str =
    "iter,epoch,time_s,grad_evals,f_gap_iterate,f_gap_average,max_violation_average,dist2_C_average";

/// One recorded iteration. Gap columns are `NaN` when the instance has no
/// reference optimum; `dist2_C_average` is `NaN` on rows between distance
/// evaluations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub epoch: usize,
    /// Algorithm time only; metric evaluation is excluded.
    pub time_s: f64,
    pub grad_evals: u64,
    pub f_gap_iterate: f64,
    pub f_gap_average: f64,
    pub max_violation_average: f64,
    #[serde(rename = "dist2_C_average")]
    pub dist2_c_average: f64,
}

/// Trace columns that can be rate-fitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    FGapAverage,
    FGapIterate,
    MaxViolationAverage,
    #[serde(rename = "dist2_C_average")]
    Dist2CAverage,
}

impl Metric {
    pub fn of(&self, row: &TraceRow) -> f64 {
        match self {
            Metric::FGapAverage => row.f_gap_average,
            Metric::FGapIterate => row.f_gap_iterate,
            Metric::MaxViolationAverage => row.max_violation_average,
            Metric::Dist2CAverage => row.dist2_c_average,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::FGapAverage => "f_gap_average",
            Metric::FGapIterate => "f_gap_iterate",
            Metric::MaxViolationAverage => "max_violation_average",
            Metric::Dist2CAverage => "dist2_C_average",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Metric::FGapAverage,
            Metric::FGapIterate,
            Metric::MaxViolationAverage,
            Metric::Dist2CAverage,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| Error::Argument(format!("unknown metric `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub algorithm: Algorithm,
    pub schedule: StepSchedule,
    pub seed: u64,
    pub prng: String,
    /// Hex fingerprint of the instance the run was given (before grouping).
    pub instance_fingerprint: String,
    pub family: String,
    pub n: usize,
    pub m: usize,
    /// Constraint count seen by the solver after grouping.
    pub m_solver: usize,
    pub d: usize,
    pub batch: usize,
    pub epoch_length: usize,
    pub grouping: Option<usize>,
    pub relaxation: f64,
    pub budget: Budget,
    pub dist_stride: usize,
    pub f_star: Option<f64>,
    pub kappa: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged { iteration: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub status: RunStatus,
    pub iterations: usize,
    pub grad_evals: u64,
    pub halfspace_projections: u64,
    pub exact_projections: u64,
    pub final_f_gap_iterate: Option<f64>,
    pub final_f_gap_average: Option<f64>,
    pub final_max_violation_average: f64,
    pub final_dist2_c_average: Option<f64>,
    /// At least one distance evaluation hit the Dykstra sweep cap and reports
    /// a lower bound.
    pub dist_lower_bound: bool,
    pub final_iterate: Vec<f64>,
    pub final_average: Vec<f64>,
}

/// Everything recorded by one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub header: TraceHeader,
    pub rows: Vec<TraceRow>,
    pub summary: TraceSummary,
    /// Every iterate `x⁰, …, xᴷ`, when requested.
    #[serde(skip)]
    pub iterates: Option<Vec<crate::DenseVector>>,
}

pub(crate) fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl RunTrace {
    pub fn last_row(&self) -> &TraceRow {
        self.rows.last().expect("a trace always has the initial row")
    }

    pub fn write_csv_to<W: Write>(&self, w: W) -> Result<()> {
        write_rows(&self.rows, w)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv_to(std::io::BufWriter::new(f))
    }
}

pub fn write_rows<W: Write>(rows: &[TraceRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    if rows.is_empty() {
        let mut inner = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        writeln!(inner, "{CSV_HEADER}")?;
        return Ok(());
    }
    wtr.flush()?;
    Ok(())
}

/// Parses a trace CSV, insisting on the exact header.
pub fn read_rows<R: Read>(r: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::Argument(format!("unexpected trace header `{header}`")));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<TraceRow>> {
    read_rows(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(iter: usize, dist: f64) -> TraceRow {
        TraceRow {
            iter,
            epoch: iter / 3,
            time_s: iter as f64 * 1e-3,
            grad_evals: 7 * iter as u64,
            f_gap_iterate: 1.0 / (iter as f64 + 1.0),
            f_gap_average: -1e-12,
            max_violation_average: 0.25,
            dist2_c_average: dist,
        }
    }

    #[test]
    fn header_is_exact() {
        let mut buf = Vec::new();
        write_rows(&[row(0, 0.5)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        let mut empty = Vec::new();
        write_rows(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim_end(), CSV_HEADER);
    }

    #[test]
    fn nan_cells_survive() {
        let mut buf = Vec::new();
        write_rows(&[row(1, f64::NAN)], &mut buf).unwrap();
        let back = read_rows(&buf[..]).unwrap();
        assert!(back[0].dist2_c_average.is_nan());
    }

    #[test]
    fn wrong_header_rejected() {
        let text = "iter,epoch\n1,0\n";
        assert!(read_rows(text.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn rows_round_trip(iters in proptest::collection::vec(0usize..1_000_000, 1..20), d in 0.0f64..1e3) {
            let rows: Vec<_> = iters.iter().map(|&i| row(i, d)).collect();
            let mut buf = Vec::new();
            write_rows(&rows, &mut buf).unwrap();
            prop_assert_eq!(read_rows(&buf[..]).unwrap(), rows);
        }
    }
}
