use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use smoothlab_core::dynamics::{Trajectory, TrajectoryRecord};
use smoothlab_core::metrics::SmoothingMetrics;
use smoothlab_core::tensor_core::RealMatrix;

use crate::config::Settings;
use crate::error::CliError;
use crate::sampling::SAMPLING;

pub const CSV_HEADER: &str = "layer,hfc_lfc,mean_cosine,effective_rank,frobenius_log,direction_delta";

/// Trajectory as CSV with 17 significant digits; infinities are written as `inf`.
pub fn trajectory_csv(t: &Trajectory) -> String {
    let mut out = String::with_capacity(64 * (t.records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &t.records {
        let m = r.metrics;
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.layer, m.hfc_lfc, m.mean_cosine, m.effective_rank, r.frobenius_log, r.direction_delta
        )
        .expect("writing to a String");
    }
    out
}

/// Parses a trajectory CSV written by [`trajectory_csv`].
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRecord>, CliError> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(CliError::Config(format!(
            "trajectory CSV must start with `{CSV_HEADER}`"
        )));
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let bad = || CliError::Config(format!("malformed trajectory row {}: {line}", k + 1));
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(TrajectoryRecord {
                layer: fields[0].parse().map_err(|_| bad())?,
                metrics: SmoothingMetrics {
                    hfc_lfc: num(fields[1])?,
                    mean_cosine: num(fields[2])?,
                    effective_rank: num(fields[3])?,
                },
                frobenius_log: num(fields[4])?,
                direction_delta: num(fields[5])?,
            })
        })
        .collect()
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

pub fn read_matrix(path: &Path) -> Result<RealMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Files produced by a command, written once at the end.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        self.files
            .iter()
            .map(|(name, contents)| {
                let path = dir.join(name);
                std::fs::write(&path, contents).map_err(io(&path))?;
                Ok(path)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Pass,
    Fail,
    Skipped,
    Errored,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub trials: usize,
    pub pass: usize,
    pub fail: usize,
    pub skipped: usize,
    pub errored: usize,
}

impl Summary {
    pub fn count(&mut self, status: TrialStatus) {
        self.trials += 1;
        match status {
            TrialStatus::Pass => self.pass += 1,
            TrialStatus::Fail => self.fail += 1,
            TrialStatus::Skipped => self.skipped += 1,
            TrialStatus::Errored => self.errored += 1,
        }
    }

    pub fn of<'a>(statuses: impl IntoIterator<Item = &'a TrialStatus>) -> Self {
        let mut s = Self::default();
        for &st in statuses {
            s.count(st);
        }
        s
    }
}

/// Common leading section of every JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct ReportHeader {
    pub command: &'static str,
    pub settings: Settings,
    pub sampling: BTreeMap<&'static str, &'static str>,
}

impl ReportHeader {
    pub fn new(settings: &Settings) -> Self {
        Self {
            command: settings.kind.name(),
            settings: settings.clone(),
            sampling: SAMPLING.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(layer: usize, hfc: f64) -> TrajectoryRecord {
        TrajectoryRecord {
            layer,
            metrics: SmoothingMetrics {
                hfc_lfc: hfc,
                mean_cosine: 0.1 + 1.0 / 3.0,
                effective_rank: std::f64::consts::E,
            },
            frobenius_log: -1e-300,
            direction_delta: 5e-324,
        }
    }

    #[test]
    fn csv_round_trip() {
        let t = Trajectory {
            records: vec![record(1, f64::INFINITY), record(2, 1.0 / 7.0)],
            final_state: RealMatrix::identity(1),
            final_frobenius_log: 0.0,
        };
        let text = trajectory_csv(&t);
        assert!(text.starts_with(CSV_HEADER));
        assert!(text.lines().nth(1).unwrap().starts_with("1,inf,"));
        assert_eq!(parse_trajectory_csv(&text).unwrap(), t.records);
    }

    #[test]
    fn csv_rejects_other_schemas() {
        assert!(parse_trajectory_csv("layer,hfc\n1,2\n").is_err());
        assert!(parse_trajectory_csv(&format!("{CSV_HEADER}\n1,2,3\n")).is_err());
    }

    #[test]
    fn summary_accounting() {
        let s = Summary::of(&[
            TrialStatus::Pass,
            TrialStatus::Skipped,
            TrialStatus::Pass,
            TrialStatus::Errored,
        ]);
        assert_eq!((s.trials, s.pass, s.fail, s.skipped, s.errored), (4, 2, 0, 1, 1));
    }
}
