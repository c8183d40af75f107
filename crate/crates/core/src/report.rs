//! Metric tables and heatmap grids in CSV and JSON.
//!
//! CSV columns, in order: `cell, n_samples, b_mse, c_mse, cf_mse, sb_mse,
//! sc_mse, scf_mse, b_mse_05s, b_mse_10s, b_mse_15s`. Pixel metrics are in
//! px², scaled ones are dimensionless. Horizon columns are empty when the
//! prediction horizon is shorter than that time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{aggregate, aggregate_all, MetricRow, SampleMetrics};
use crate::scenario::{cell_name, Factor, Partition, ScenarioKey};

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 11] = [
    "cell",
    "n_samples",
    "b_mse",
    "c_mse",
    "cf_mse",
    "sb_mse",
    "sc_mse",
    "scf_mse",
    "b_mse_05s",
    "b_mse_10s",
    "b_mse_15s",
];

/// Which aggregated metric a heatmap shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    BMse,
    CMse,
    CfMse,
    SbMse,
    ScMse,
    ScfMse,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::BMse => "b_mse",
            MetricKind::CMse => "c_mse",
            MetricKind::CfMse => "cf_mse",
            MetricKind::SbMse => "sb_mse",
            MetricKind::ScMse => "sc_mse",
            MetricKind::ScfMse => "scf_mse",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [
            MetricKind::BMse,
            MetricKind::CMse,
            MetricKind::CfMse,
            MetricKind::SbMse,
            MetricKind::ScMse,
            MetricKind::ScfMse,
        ]
        .into_iter()
        .find(|m| m.name() == s.trim())
        .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }

    pub fn of(self, row: &MetricRow) -> f64 {
        match self {
            MetricKind::BMse => row.b_mse,
            MetricKind::CMse => row.c_mse,
            MetricKind::CfMse => row.cf_mse,
            MetricKind::SbMse => row.sb_mse,
            MetricKind::ScMse => row.sc_mse,
            MetricKind::ScfMse => row.scf_mse,
        }
    }
}

/// Conventions every report records next to its numbers.
pub fn conventions(aspect_ratio: f64, adjusted: bool) -> serde_json::Value {
    serde_json::json!({
        "coordinate_mean": "b_mse averages the 4 box coordinates; c_mse and cf_mse average the 2 center coordinates",
        "scale_denominator": "mean area of the ground-truth future boxes",
        "area_adjustment": if adjusted { "truncated boxes rebuilt from the visible aspect ratio" } else { "none (visible area)" },
        "aspect_ratio": aspect_ratio,
        "aggregation": "scale-then-average: per-sample scaled values, unweighted mean over samples",
        "best_of_k": "minimum over the k predictions, per metric",
        "scale_bins": "mean observed box height, left-inclusive [50, 80, 100, 150, 200, 300]",
        "speed_bins": "0 when every frame is below the zero threshold, otherwise mean ego speed over the window, right-inclusive (0, 5, 10, 20, 30]",
        "state": "majority vote per horizon",
        "empty_cells": "omitted",
    })
}

/// One table of aggregated metrics, plus the metadata needed to
/// reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricReport {
    pub schema_version: u32,
    pub predictor: String,
    pub factors: Vec<String>,
    /// The `all` row first, then non-empty cells in factor order.
    pub rows: Vec<MetricRow>,
    pub metadata: serde_json::Value,
}

impl MetricReport {
    /// Builds the `all` row and, when a partition is given, one row per
    /// non-empty cell.
    pub fn build(
        predictor: &str,
        metrics: &[SampleMetrics],
        partition: Option<&Partition>,
        metadata: serde_json::Value,
    ) -> Result<MetricReport> {
        let mut rows = vec![aggregate_all(metrics)?];
        let mut factors = Vec::new();
        if let Some(p) = partition {
            if p.total != metrics.len() {
                return Err(Error::LengthMismatch {
                    expected: metrics.len(),
                    actual: p.total,
                });
            }
            factors = p.factors.iter().map(|f| f.name().to_string()).collect();
            for (key, idx) in &p.cells {
                match aggregate(&cell_name(&p.factors, key), metrics, idx) {
                    Ok(row) => rows.push(row),
                    Err(Error::EmptyCell) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(MetricReport {
            schema_version: SCHEMA_VERSION,
            predictor: predictor.to_string(),
            factors,
            rows,
            metadata,
        })
    }

    pub fn row(&self, cell: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.cell == cell)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses and checks a report produced by [`MetricReport::to_json`].
    pub fn from_json(s: &str) -> Result<MetricReport> {
        let r: MetricReport = serde_json::from_str(s)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "report schema version {} (expected {SCHEMA_VERSION})",
                r.schema_version
            )));
        }
        if r.rows.first().is_none_or(|row| row.cell != "all") {
            return Err(Error::Config("report must start with the `all` row".into()));
        }
        Ok(r)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS)?;
        for r in &self.rows {
            let mut rec = vec![
                r.cell.clone(),
                r.n_samples.to_string(),
                fmt(r.b_mse),
                fmt(r.c_mse),
                fmt(r.cf_mse),
                fmt(r.sb_mse),
                fmt(r.sc_mse),
                fmt(r.scf_mse),
            ];
            rec.extend(r.b_mse_at.iter().map(|v| v.map(fmt).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv writes UTF-8"))
    }
}

// Shortest representation that parses back to the same f64.
fn fmt(v: f64) -> String {
    format!("{v:?}")
}

/// Dense two-factor grid: rows follow the first factor's full domain and
/// columns the second's, with `null` where a cell has no samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Heatmap {
    pub schema_version: u32,
    pub predictor: String,
    pub metric: MetricKind,
    pub row_factor: String,
    pub col_factor: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<usize>>,
    pub metadata: serde_json::Value,
}

impl Heatmap {
    pub fn build(
        predictor: &str,
        keys: &[ScenarioKey],
        metrics: &[SampleMetrics],
        row_factor: Factor,
        col_factor: Factor,
        metric: MetricKind,
        metadata: serde_json::Value,
    ) -> Result<Heatmap> {
        if keys.len() != metrics.len() {
            return Err(Error::LengthMismatch {
                expected: metrics.len(),
                actual: keys.len(),
            });
        }
        let part = Partition::from_keys(keys, &[row_factor, col_factor])?;
        let rows = row_factor.domain();
        let cols = col_factor.domain();
        let mut values = vec![vec![None; cols.len()]; rows.len()];
        let mut counts = vec![vec![0; cols.len()]; rows.len()];
        for (i, rv) in rows.iter().enumerate() {
            for (j, cv) in cols.iter().enumerate() {
                if let Some(idx) = part.cells.get(&vec![*rv, *cv]) {
                    let row = aggregate("", metrics, idx)?;
                    values[i][j] = Some(metric.of(&row));
                    counts[i][j] = idx.len();
                }
            }
        }
        Ok(Heatmap {
            schema_version: SCHEMA_VERSION,
            predictor: predictor.to_string(),
            metric,
            row_factor: row_factor.name().into(),
            col_factor: col_factor.name().into(),
            row_labels: rows.iter().map(|v| v.to_string()).collect(),
            col_labels: cols.iter().map(|v| v.to_string()).collect(),
            values,
            counts,
            metadata,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{EgoAction, EgoMotion, ScaleBin, SpeedBin, StateTransition};
    use crate::trajectory::PedestrianState;

    fn m(b: f64) -> SampleMetrics {
        SampleMetrics {
            b_mse: b,
            c_mse: b / 2.0,
            cf_mse: b * 2.0,
            sb_mse: b / 100.0,
            sc_mse: b / 200.0,
            scf_mse: b / 50.0,
            b_mse_at: [Some(b / 4.0), None, None],
        }
    }

    fn key(scale: ScaleBin, speed: SpeedBin) -> ScenarioKey {
        ScenarioKey {
            scale_bin: scale,
            obs_state: PedestrianState::Walking,
            fut_state: PedestrianState::Walking,
            speed_bin: speed,
            ego_action: EgoAction::Straight,
            ego_motion: EgoMotion::Constant,
            state_transition: StateTransition::WW,
        }
    }

    fn corpus_keys() -> (Vec<ScenarioKey>, Vec<SampleMetrics>) {
        let keys = vec![
            key(ScaleBin::S0_50, SpeedBin::Z0),
            key(ScaleBin::S0_50, SpeedBin::Z0),
            key(ScaleBin::S80_100, SpeedBin::V30p),
        ];
        (keys, vec![m(1.0), m(3.0), m(10.0)])
    }

    #[test]
    fn cells_follow_the_all_row() {
        let (keys, metrics) = corpus_keys();
        let p = Partition::from_keys(&keys, &[Factor::Speed]).unwrap();
        let r = MetricReport::build("cp", &metrics, Some(&p), serde_json::json!({})).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.rows[0].cell, "all");
        let z = r.row("speed=0").unwrap();
        assert_eq!((z.n_samples, z.b_mse), (2, 2.0));
        assert_eq!(r.row("speed=30+").unwrap().b_mse, 10.0);
        assert!(r.row("speed=0-5").is_none());
    }

    #[test]
    fn csv_has_fixed_columns_and_blank_missing_horizons() {
        let (_, metrics) = corpus_keys();
        let r = MetricReport::build("cp", &metrics, None, serde_json::json!({})).unwrap();
        let csv = r.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), CSV_COLUMNS.len());
        assert_eq!(fields[0], "all");
        assert_eq!(fields[2].parse::<f64>().unwrap(), 14.0 / 3.0);
        assert_eq!(&fields[9..], &["", ""]);
    }

    #[test]
    fn json_round_trips_and_rejects_other_versions() {
        let (_, metrics) = corpus_keys();
        let r = MetricReport::build("cv", &metrics, None, conventions(0.34, true)).unwrap();
        let s = r.to_json().unwrap();
        assert_eq!(MetricReport::from_json(&s).unwrap(), r);
        let bumped = s.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(MetricReport::from_json(&bumped).is_err());
        let extra = s.replacen('{', "{\"surprise\": 1,", 1);
        assert!(MetricReport::from_json(&extra).is_err());
    }

    #[test]
    fn heatmap_is_dense_with_nulls() {
        let (keys, metrics) = corpus_keys();
        let h = Heatmap::build(
            "cp",
            &keys,
            &metrics,
            Factor::Speed,
            Factor::Scale,
            MetricKind::BMse,
            serde_json::json!({}),
        )
        .unwrap();
        assert_eq!(h.row_labels.len(), 6);
        assert_eq!(h.col_labels.len(), 7);
        assert_eq!(h.values[0][0], Some(2.0));
        assert_eq!(h.counts[0][0], 2);
        assert_eq!(h.values[5][2], Some(10.0));
        let filled = h.values.iter().flatten().filter(|v| v.is_some()).count();
        assert_eq!(filled, 2);
        let total: usize = h.counts.iter().flatten().sum();
        assert_eq!(total, keys.len());
    }

    #[test]
    fn metric_names_parse_back() {
        for k in [MetricKind::BMse, MetricKind::SbMse, MetricKind::ScfMse] {
            assert_eq!(MetricKind::parse(k.name()).unwrap(), k);
        }
        assert!(MetricKind::parse("ade").is_err());
    }
}
