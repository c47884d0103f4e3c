//! CSV/JSON rendering of trial series and benchmark tables.
//!
//! Rendering is pure string construction from already-ordered data, so
//! identical inputs always produce identical bytes.

use std::path::Path;

use crate::bench::BenchRow;
use crate::error::ModelError;
use crate::model::Mode;
use crate::sim::TrialSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(ModelError::InvalidConfig(format!(
                "format: expected csv | json, got {other:?}"
            ))),
        }
    }
}

fn mode_str(mode: Mode) -> &'static str {
    match mode {
        Mode::Preemptible => "preemptible",
        Mode::NonPreemptible => "nonpreemptible",
    }
}

pub fn series_csv(series: &TrialSeries) -> String {
    let mut out = String::from("trial,mean_cost\n");
    for &(trial, mean) in &series.rows {
        out.push_str(&format!("{trial},{mean}\n"));
    }
    out
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("label,mode,states,seconds\n");
    for r in rows {
        match &r.error {
            None => out.push_str(&format!(
                "{},{},{},{}\n",
                r.label,
                mode_str(r.mode),
                r.states,
                r.seconds
            )),
            Some(e) => out.push_str(&format!(
                "{},{},error,\"{}\"\n",
                r.label,
                mode_str(r.mode),
                e.replace('"', "'")
            )),
        }
    }
    out
}

pub fn series_json(series: &TrialSeries) -> Result<String, ModelError> {
    Ok(serde_json::to_string_pretty(series)?)
}

pub fn bench_json(rows: &[BenchRow]) -> Result<String, ModelError> {
    Ok(serde_json::to_string_pretty(rows)?)
}

pub fn render_series(series: &TrialSeries, format: Format) -> Result<String, ModelError> {
    match format {
        Format::Csv => Ok(series_csv(series)),
        Format::Json => series_json(series),
    }
}

pub fn render_bench(rows: &[BenchRow], format: Format) -> Result<String, ModelError> {
    match format {
        Format::Csv => Ok(bench_csv(rows)),
        Format::Json => bench_json(rows),
    }
}

/// Writes rendered output to a file.
pub fn emit(content: &str, path: impl AsRef<Path>) -> Result<(), ModelError> {
    std::fs::write(path, content)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_series_renders_a_header_only_csv() {
        let series = TrialSeries {
            rows: vec![],
            per_trial: vec![],
        };
        assert_eq!(series_csv(&series), "trial,mean_cost\n");
    }

    #[test]
    fn series_rows_render_one_line_each() {
        let series = TrialSeries {
            rows: vec![(50, -48.2), (100, -46.46)],
            per_trial: vec![],
        };
        assert_eq!(
            series_csv(&series),
            "trial,mean_cost\n50,-48.2\n100,-46.46\n"
        );
    }

    #[test]
    fn identical_inputs_render_identical_bytes() {
        let series = TrialSeries {
            rows: vec![(50, -1.0 / 3.0)],
            per_trial: vec![-0.5, 0.0],
        };
        assert_eq!(series_csv(&series), series_csv(&series.clone()));
        assert_eq!(
            series_json(&series).unwrap(),
            series_json(&series.clone()).unwrap()
        );
    }

    #[test]
    fn bench_rows_round_trip_through_json() {
        let rows = vec![
            BenchRow {
                label: "routes-1h1s".into(),
                mode: Mode::Preemptible,
                states: 47,
                states_without_terminal: 46,
                vi_iterations: 5,
                seconds: 0.003,
                error: None,
            },
            BenchRow {
                label: "twin-hard".into(),
                mode: Mode::NonPreemptible,
                states: 0,
                states_without_terminal: 0,
                vi_iterations: 0,
                seconds: 0.0,
                error: Some("system is not schedulable".into()),
            },
        ];
        let text = bench_json(&rows).unwrap();
        let again: Vec<BenchRow> = serde_json::from_str(&text).unwrap();
        assert_eq!(rows, again);
    }

    #[test]
    fn bench_csv_has_the_documented_columns() {
        let rows = vec![BenchRow {
            label: "routes-1h1s".into(),
            mode: Mode::NonPreemptible,
            states: 18,
            states_without_terminal: 17,
            vi_iterations: 5,
            seconds: 0.25,
            error: None,
        }];
        assert_eq!(
            bench_csv(&rows),
            "label,mode,states,seconds\nroutes-1h1s,nonpreemptible,18,0.25\n"
        );
    }
}
