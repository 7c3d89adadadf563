use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{rad_per_s_to_rpm, ScenarioKind};
use crate::{Error, Result};

/// One control step as logged after the plant has advanced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub theta: f64,
    pub omega: f64,
    /// Target the controller was tracking during this step (rad or rad/s).
    pub target: f64,
    pub reward: f64,
    pub stimulation: Vec<f64>,
    pub activation: Vec<f64>,
    pub fatigue: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub kind: ScenarioKind,
    pub dt: f64,
    pub rows: Vec<TraceRow>,
}

/// Tracking error summary in degrees (arm) or RPM (crank).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingError {
    pub mean_abs: f64,
    pub rmse: f64,
}

impl EpisodeTrace {
    pub fn new(kind: ScenarioKind, dt: f64) -> Self {
        Self {
            kind,
            dt,
            rows: Vec::new(),
        }
    }

    pub fn n_channels(&self) -> usize {
        self.kind.n_channels()
    }

    /// Per-row tracking error in reporting units (degrees or RPM).
    pub fn errors(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| {
                if self.kind.is_arm() {
                    (r.theta - r.target).to_degrees()
                } else {
                    rad_per_s_to_rpm(r.omega - r.target)
                }
            })
            .collect()
    }

    pub fn mean_stimulation(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let n = self.n_channels() as f64;
        self.rows
            .iter()
            .map(|r| r.stimulation.iter().sum::<f64>() / n)
            .sum::<f64>()
            / self.rows.len() as f64
    }

    pub fn header(&self) -> String {
        let n = self.n_channels();
        let mut cols = vec![
            "t".to_string(),
            "theta".into(),
            "omega".into(),
            "target".into(),
            "r".into(),
        ];
        for prefix in ["u", "act", "fat"] {
            cols.extend((1..=n).map(|i| format!("{prefix}_{i}")));
        }
        cols.join(",")
    }

    /// CSV with an optional leading `# ...` comment line. Values use the
    /// shortest representation that parses back to the same `f64`.
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut out = String::with_capacity(self.rows.len() * 64);
        if let Some(c) = comment {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str(&self.header());
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{},{},{},{}", r.t, r.theta, r.omega, r.target, r.reward);
            for v in r.stimulation.iter().chain(&r.activation).chain(&r.fatigue) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses CSV produced by [`EpisodeTrace::to_csv`]. Comment lines are
    /// skipped.
    pub fn from_csv(text: &str, kind: ScenarioKind, dt: f64) -> Result<Self> {
        let mut trace = Self::new(kind, dt);
        let n = kind.n_channels();
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty trace CSV".into()))?;
        if header != trace.header() {
            return Err(Error::InvalidArgument(format!("unexpected trace header `{header}`")));
        }
        let width = 5 + 3 * n;
        for (i, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidArgument(format!("trace row {}: {e}", i + 1)))?;
            if vals.len() != width {
                return Err(Error::shape(format!("trace row {}", i + 1), &[width], &[vals.len()]));
            }
            trace.rows.push(TraceRow {
                t: vals[0],
                theta: vals[1],
                omega: vals[2],
                target: vals[3],
                reward: vals[4],
                stimulation: vals[5..5 + n].to_vec(),
                activation: vals[5 + n..5 + 2 * n].to_vec(),
                fatigue: vals[5 + 2 * n..].to_vec(),
            });
        }
        Ok(trace)
    }
}

/// Mean absolute tracking error and RMSE over a trace, in degrees for the
/// arm and RPM for the crank.
pub fn episodic_error(trace: &EpisodeTrace) -> Result<TrackingError> {
    if trace.rows.is_empty() {
        return Err(Error::InvalidArgument("episodic error of an empty trace".into()));
    }
    let errors = trace.errors();
    let n = errors.len() as f64;
    Ok(TrackingError {
        mean_abs: errors.iter().map(|e| e.abs()).sum::<f64>() / n,
        rmse: (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
    })
}
