//! Experiment report structure: tables, fitted rates, verdicts.
//!
//! Every verdict is a pure function of the serialized table and the criteria
//! thresholds stored next to it, so reports can be re-judged offline without
//! touching a solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    #[serde(rename = "E1_adjoint")]
    E1Adjoint,
    #[serde(rename = "E2_ibp")]
    E2Ibp,
    #[serde(rename = "E3_grad_value")]
    E3GradValue,
    #[serde(rename = "E4_time_deriv")]
    E4TimeDeriv,
    #[serde(rename = "E5_joint")]
    E5Joint,
    #[serde(rename = "E6_stability")]
    E6Stability,
    #[serde(rename = "E7_growth")]
    E7Growth,
    #[serde(rename = "E8_neighborhood")]
    E8Neighborhood,
    #[serde(rename = "E9_lsl1")]
    E9LsL1,
    #[serde(rename = "E10_bellman")]
    E10Bellman,
}

pub const ALL_EXPERIMENTS: [ExperimentId; 10] = [
    ExperimentId::E1Adjoint,
    ExperimentId::E2Ibp,
    ExperimentId::E3GradValue,
    ExperimentId::E4TimeDeriv,
    ExperimentId::E5Joint,
    ExperimentId::E6Stability,
    ExperimentId::E7Growth,
    ExperimentId::E8Neighborhood,
    ExperimentId::E9LsL1,
    ExperimentId::E10Bellman,
];

impl ExperimentId {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentId::E1Adjoint => "E1_adjoint",
            ExperimentId::E2Ibp => "E2_ibp",
            ExperimentId::E3GradValue => "E3_grad_value",
            ExperimentId::E4TimeDeriv => "E4_time_deriv",
            ExperimentId::E5Joint => "E5_joint",
            ExperimentId::E6Stability => "E6_stability",
            ExperimentId::E7Growth => "E7_growth",
            ExperimentId::E8Neighborhood => "E8_neighborhood",
            ExperimentId::E9LsL1 => "E9_lsl1",
            ExperimentId::E10Bellman => "E10_bellman",
        }
    }

    /// Accepts the full name or the bare `E<k>` shorthand, case-insensitive.
    pub fn parse(s: &str) -> Result<ExperimentId> {
        let lower = s.to_ascii_lowercase();
        for id in ALL_EXPERIMENTS {
            if lower == id.name().to_ascii_lowercase()
                || lower == id.name().split('_').next().unwrap().to_ascii_lowercase()
            {
                return Ok(id);
            }
        }
        Err(Error::invalid(format!(
            "unknown experiment `{s}` (expected E1..E10 or a full id like E3_grad_value)"
        )))
    }
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One numeric table with named columns; the whole experiment outcome is a
/// deterministic function of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row arity mismatch");
        self.rows.push(row);
    }

    pub fn col(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Format(format!("table has no column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Table> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty table csv".into()))?;
        let columns: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Format(format!("bad value `{tok}` at line {}", i + 2)))
                })
                .collect::<Result<_>>()?;
            if row.len() != columns.len() {
                return Err(Error::Format(format!("ragged row at line {}", i + 2)));
            }
            rows.push(row);
        }
        Ok(Table { columns, rows })
    }
}

/// One named pass/fail criterion with its threshold and the measured value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    /// "<=" or ">=" comparison of measured against threshold.
    pub cmp: String,
    pub threshold: f64,
    pub measured: f64,
    pub pass: bool,
}

impl Criterion {
    pub fn le(name: &str, measured: f64, threshold: f64) -> Self {
        Criterion {
            name: name.into(),
            cmp: "<=".into(),
            threshold,
            measured,
            pass: measured <= threshold && measured.is_finite(),
        }
    }

    pub fn ge(name: &str, measured: f64, threshold: f64) -> Self {
        Criterion {
            name: name.into(),
            cmp: ">=".into(),
            threshold,
            measured,
            pass: measured >= threshold && measured.is_finite(),
        }
    }
}

/// Least-squares slope of log|y| against log x with a 95% confidence
/// interval from the residual variance. Pairs with nonpositive x or y are
/// skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedRate {
    pub name: String,
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

pub fn fit_loglog_rate(name: &str, x: &[f64], y: &[f64]) -> FittedRate {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return FittedRate {
            name: name.into(),
            slope: f64::NAN,
            ci_low: f64::NAN,
            ci_high: f64::NAN,
            points: n,
        };
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| {
            let e = p.1 - (intercept + slope * p.0);
            e * e
        })
        .sum();
    let se = if n > 2 {
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    FittedRate {
        name: name.into(),
        slope,
        ci_low: slope - 1.96 * se,
        ci_high: slope + 1.96 * se,
        points: n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment_id: ExperimentId,
    pub table: Table,
    pub fitted_rates: Vec<FittedRate>,
    pub criteria: Vec<Criterion>,
    pub verdict: bool,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub grid_nx: usize,
    pub grid_nt: usize,
    pub gap_tol: f64,
    pub samples_attempted: usize,
    pub samples_used: usize,
    pub samples_excluded: usize,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    /// Judge the table and assemble the report; the same judging runs when a
    /// stored table is re-rendered offline.
    pub fn build(
        experiment_id: ExperimentId,
        table: Table,
        metadata: Metadata,
    ) -> crate::error::Result<Self> {
        let (rates, criteria) = crate::verify::judge::judge(experiment_id, &table, &metadata)?;
        Ok(Self::assemble(
            experiment_id,
            table,
            rates,
            criteria,
            metadata,
        ))
    }

    pub fn assemble(
        experiment_id: ExperimentId,
        table: Table,
        fitted_rates: Vec<FittedRate>,
        criteria: Vec<Criterion>,
        metadata: Metadata,
    ) -> Self {
        let mut criteria = criteria;
        // excluded-sample accounting is a criterion everywhere
        let excl_rate = if metadata.samples_attempted == 0 {
            0.0
        } else {
            metadata.samples_excluded as f64 / metadata.samples_attempted as f64
        };
        criteria.push(Criterion::le("exclusion_rate", excl_rate, 0.10));
        let verdict = criteria.iter().all(|c| c.pass)
            && table.rows.iter().all(|r| r.iter().all(|v| v.is_finite()));
        ExperimentReport {
            experiment_id,
            table,
            fitted_rates,
            criteria,
            verdict,
            metadata,
        }
    }
}
