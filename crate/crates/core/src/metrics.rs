//! Bounding-box trajectory errors and their scale-normalized variants.
//!
//! All pixel metrics average squared errors over coordinates: four box
//! coordinates for `B_MSE`, two center coordinates for `C_MSE`/`CF_MSE`.
//! The scaled variants divide a sample's pixel error by the mean adjusted
//! area of its ground-truth future boxes, then average over samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{Adjustment, BoundingBox, ImageGeometry, TrajectorySample};

fn check_lengths(pred: &[BoundingBox], gt: &[BoundingBox], horizon: usize) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            actual: pred.len(),
        });
    }
    if horizon == 0 || horizon > gt.len() {
        return Err(Error::BadHorizon {
            horizon,
            len: gt.len(),
        });
    }
    Ok(())
}

/// Mean squared coordinate error over the first `horizon` steps.
pub fn b_mse(pred: &[BoundingBox], gt: &[BoundingBox], horizon: usize) -> Result<f64> {
    check_lengths(pred, gt, horizon)?;
    let sum: f64 = pred[..horizon]
        .iter()
        .zip(&gt[..horizon])
        .map(|(p, g)| {
            let (p, g) = (p.to_array(), g.to_array());
            (0..4).map(|i| (p[i] - g[i]).powi(2)).sum::<f64>()
        })
        .sum();
    Ok(sum / (4 * horizon) as f64)
}

fn center_sq(p: &BoundingBox, g: &BoundingBox) -> f64 {
    let (px, py) = p.center();
    let (gx, gy) = g.center();
    (px - gx).powi(2) + (py - gy).powi(2)
}

/// Mean squared center error over the first `horizon` steps.
pub fn c_mse(pred: &[BoundingBox], gt: &[BoundingBox], horizon: usize) -> Result<f64> {
    check_lengths(pred, gt, horizon)?;
    let sum: f64 = pred[..horizon]
        .iter()
        .zip(&gt[..horizon])
        .map(|(p, g)| center_sq(p, g))
        .sum();
    Ok(sum / (2 * horizon) as f64)
}

/// Squared center error at the final step, averaged over the two coordinates.
pub fn cf_mse(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<f64> {
    check_lengths(pred, gt, gt.len().max(1))?;
    let last = gt.len() - 1;
    Ok(center_sq(&pred[last], &gt[last]) / 2.0)
}

/// How box areas are measured for the scaled metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AreaMode {
    /// Truncation-aware area.
    Adjusted(Adjustment),
    /// Raw visible `w·h`.
    Visible,
}

impl AreaMode {
    pub fn area(&self, b: &BoundingBox, g: &ImageGeometry) -> Result<f64> {
        match self {
            AreaMode::Adjusted(adj) => adj.area(b, g),
            AreaMode::Visible => Ok(b.width() * b.height()),
        }
    }
}

/// Mean area of the ground-truth future boxes.
pub fn scale_denominator(gt: &[BoundingBox], geometry: &ImageGeometry, mode: &AreaMode) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::LengthMismatch {
            expected: 1,
            actual: 0,
        });
    }
    let mut total = 0.0;
    for b in gt {
        total += mode.area(b, geometry)?;
    }
    let mean = total / gt.len() as f64;
    if mean == 0.0 {
        return Err(Error::ZeroArea);
    }
    Ok(mean)
}

/// Divides a pixel² error by the sample's mean adjusted future-box area.
pub fn scaled(
    metric_value: f64,
    sample: &TrajectorySample,
    adjustment: &Adjustment,
) -> Result<f64> {
    let denom = scale_denominator(
        &sample.fut_boxes,
        &sample.geometry,
        &AreaMode::Adjusted(*adjustment),
    )?;
    Ok(metric_value / denom)
}

/// Smallest metric value among `k` candidate trajectories.
pub fn best_of_k<F>(preds: &[Vec<BoundingBox>], gt: &[BoundingBox], metric: F) -> Result<f64>
where
    F: Fn(&[BoundingBox], &[BoundingBox]) -> Result<f64>,
{
    if preds.is_empty() {
        return Err(Error::LengthMismatch {
            expected: 1,
            actual: 0,
        });
    }
    let mut best = f64::INFINITY;
    for p in preds {
        best = best.min(metric(p, gt)?);
    }
    Ok(best)
}

/// `k` predicted futures for every sample of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub k: usize,
    pub per_sample: Vec<Vec<Vec<BoundingBox>>>,
}

impl PredictionSet {
    pub fn new(per_sample: Vec<Vec<Vec<BoundingBox>>>) -> Result<Self> {
        let k = per_sample.first().map_or(1, |p| p.len());
        if k == 0 || per_sample.iter().any(|p| p.len() != k) {
            return Err(Error::Config("prediction sets must share k >= 1".into()));
        }
        Ok(PredictionSet { k, per_sample })
    }

    pub fn single(per_sample: Vec<Vec<BoundingBox>>) -> Self {
        PredictionSet {
            k: 1,
            per_sample: per_sample.into_iter().map(|p| vec![p]).collect(),
        }
    }
}

/// Best-of-k errors of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub b_mse: f64,
    pub c_mse: f64,
    pub cf_mse: f64,
    pub sb_mse: f64,
    pub sc_mse: f64,
    pub scf_mse: f64,
    /// `B_MSE` at 0.5 s, 1.0 s and 1.5 s when the horizon reaches them.
    pub b_mse_at: [Option<f64>; 3],
}

pub const HORIZON_SECONDS: [f64; 3] = [0.5, 1.0, 1.5];

pub fn evaluate_sample(
    preds: &[Vec<BoundingBox>],
    sample: &TrajectorySample,
    area: &AreaMode,
    fps: f64,
) -> Result<SampleMetrics> {
    let gt = &sample.fut_boxes;
    let tau = gt.len();
    let b = best_of_k(preds, gt, |p, g| b_mse(p, g, tau))?;
    let c = best_of_k(preds, gt, |p, g| c_mse(p, g, tau))?;
    let cf = best_of_k(preds, gt, cf_mse)?;
    let denom = scale_denominator(gt, &sample.geometry, area)?;
    let mut at = [None; 3];
    for (slot, secs) in at.iter_mut().zip(HORIZON_SECONDS) {
        let h = (secs * fps).round() as usize;
        if h >= 1 && h <= tau {
            *slot = Some(best_of_k(preds, gt, |p, g| b_mse(p, g, h))?);
        }
    }
    Ok(SampleMetrics {
        b_mse: b,
        c_mse: c,
        cf_mse: cf,
        sb_mse: b / denom,
        sc_mse: c / denom,
        scf_mse: cf / denom,
        b_mse_at: at,
    })
}

/// Per-sample metrics for a whole corpus, computed in parallel.
pub fn evaluate_corpus(
    samples: &[TrajectorySample],
    preds: &PredictionSet,
    area: &AreaMode,
    fps: f64,
) -> Result<Vec<SampleMetrics>> {
    if preds.per_sample.len() != samples.len() {
        return Err(Error::LengthMismatch {
            expected: samples.len(),
            actual: preds.per_sample.len(),
        });
    }
    samples
        .par_iter()
        .zip(preds.per_sample.par_iter())
        .map(|(s, p)| evaluate_sample(p, s, area, fps))
        .collect()
}

/// Pairwise (cascade) summation; the split order depends only on length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

fn mean_of(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Aggregated metrics of one scenario cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub cell: String,
    pub n_samples: usize,
    pub b_mse: f64,
    pub c_mse: f64,
    pub cf_mse: f64,
    pub sb_mse: f64,
    pub sc_mse: f64,
    pub scf_mse: f64,
    pub b_mse_at: [Option<f64>; 3],
}

/// Unweighted mean over the selected samples (scale-then-average).
pub fn aggregate(cell: &str, metrics: &[SampleMetrics], indices: &[usize]) -> Result<MetricRow> {
    if indices.is_empty() {
        return Err(Error::EmptyCell);
    }
    let pick = |f: &dyn Fn(&SampleMetrics) -> f64| -> f64 {
        let v: Vec<f64> = indices.iter().map(|&i| f(&metrics[i])).collect();
        mean_of(&v)
    };
    let mut at = [None; 3];
    for (j, slot) in at.iter_mut().enumerate() {
        let v: Option<Vec<f64>> = indices.iter().map(|&i| metrics[i].b_mse_at[j]).collect();
        *slot = v.map(|v| mean_of(&v));
    }
    Ok(MetricRow {
        cell: cell.to_string(),
        n_samples: indices.len(),
        b_mse: pick(&|m| m.b_mse),
        c_mse: pick(&|m| m.c_mse),
        cf_mse: pick(&|m| m.cf_mse),
        sb_mse: pick(&|m| m.sb_mse),
        sc_mse: pick(&|m| m.sc_mse),
        scf_mse: pick(&|m| m.scf_mse),
        b_mse_at: at,
    })
}

pub fn aggregate_all(metrics: &[SampleMetrics]) -> Result<MetricRow> {
    let all: Vec<usize> = (0..metrics.len()).collect();
    aggregate("all", metrics, &all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{EgoState, PedestrianState};

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    fn track(n: usize) -> Vec<BoundingBox> {
        (0..n)
            .map(|i| bb(500.0 + i as f64, 300.0, 534.0 + i as f64, 400.0))
            .collect()
    }

    fn shifted(v: &[BoundingBox], d: [f64; 4]) -> Vec<BoundingBox> {
        v.iter()
            .map(|b| bb(b.x1 + d[0], b.y1 + d[1], b.x2 + d[2], b.y2 + d[3]))
            .collect()
    }

    fn sample_with_future(fut: Vec<BoundingBox>) -> TrajectorySample {
        let ego = EgoState {
            speed_kmh: 0.0,
            accel_ms2: 0.0,
            yaw_deg: 0.0,
            yaw_rate_dps: 0.0,
            lat: 0.0,
            lon: 0.0,
        };
        let t = fut.len();
        TrajectorySample {
            ped_id: "p".into(),
            video_id: "v".into(),
            start_frame: 0,
            obs_boxes: vec![fut[0]],
            fut_boxes: fut,
            obs_states: vec![PedestrianState::Walking],
            fut_states: vec![PedestrianState::Walking; t],
            obs_ego: vec![ego],
            fut_ego: vec![ego; t],
            geometry: ImageGeometry::default(),
            truth: None,
        }
    }

    #[test]
    fn b_mse_examples() {
        let gt = track(45);
        assert_eq!(b_mse(&gt, &gt, 45).unwrap(), 0.0);
        assert_eq!(b_mse(&shifted(&gt, [10.0; 4]), &gt, 45).unwrap(), 100.0);
        assert_eq!(
            b_mse(&shifted(&gt, [10.0, 0.0, 10.0, 0.0]), &gt, 45).unwrap(),
            50.0
        );
    }

    #[test]
    fn center_examples() {
        let gt = track(10);
        assert_eq!(c_mse(&gt, &gt, 10).unwrap(), 0.0);
        assert_eq!(cf_mse(&gt, &gt).unwrap(), 0.0);
        let off = shifted(&gt, [3.0, 4.0, 3.0, 4.0]);
        assert_eq!(c_mse(&off, &gt, 10).unwrap(), 12.5);
        assert_eq!(cf_mse(&off, &gt).unwrap(), 12.5);
    }

    #[test]
    fn final_step_only_error() {
        let gt = track(6);
        let mut pred = gt.clone();
        pred[5] = pred[5].translate(6.0, -2.0);
        let cf = cf_mse(&pred, &gt).unwrap();
        let c = c_mse(&pred, &gt, 6).unwrap();
        let brute: f64 = (0..6)
            .map(|t| center_sq(&pred[t], &gt[t]) / 2.0)
            .sum::<f64>()
            / 6.0;
        assert_eq!(c, brute);
        assert!((c - cf / 6.0).abs() < 1e-12);
    }

    #[test]
    fn length_and_horizon_errors() {
        let gt = track(5);
        assert!(matches!(
            b_mse(&gt[..4], &gt, 4),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(b_mse(&gt, &gt, 0), Err(Error::BadHorizon { .. })));
        assert!(matches!(c_mse(&gt, &gt, 6), Err(Error::BadHorizon { .. })));
    }

    #[test]
    fn scaled_examples() {
        let gt = vec![bb(500.0, 300.0, 534.0, 400.0); 45];
        let s = sample_with_future(gt);
        let adj = Adjustment::default();
        assert_eq!(scaled(0.0, &s, &adj).unwrap(), 0.0);
        let v = scaled(50.0, &s, &adj).unwrap();
        assert!((v - 50.0 / 3400.0).abs() < 1e-15);
        assert!((v - 0.0147).abs() < 1e-4);
    }

    #[test]
    fn adjustment_lowers_scaled_error_for_cut_boxes() {
        let gt = vec![bb(0.0, 300.0, 10.0, 400.0); 5];
        let s = sample_with_future(gt.clone());
        let adjusted = evaluate_sample(
            &[shifted(&gt, [5.0; 4])],
            &s,
            &AreaMode::Adjusted(Adjustment::default()),
            30.0,
        )
        .unwrap();
        let raw = evaluate_sample(&[shifted(&gt, [5.0; 4])], &s, &AreaMode::Visible, 30.0).unwrap();
        assert_eq!(adjusted.b_mse, raw.b_mse);
        assert!(adjusted.sb_mse < raw.sb_mse);
    }

    #[test]
    fn best_of_k_examples() {
        let gt = track(8);
        let bad = shifted(&gt, [9.0; 4]);
        let plain = b_mse(&bad, &gt, 8).unwrap();
        let one = best_of_k(&[bad.clone()], &gt, |p, g| b_mse(p, g, 8)).unwrap();
        assert_eq!(one, plain);
        let with_exact = best_of_k(&[bad.clone(), gt.clone(), bad], &gt, |p, g| b_mse(p, g, 8));
        assert_eq!(with_exact.unwrap(), 0.0);
    }

    #[test]
    fn aggregate_examples() {
        let m = |v: f64| SampleMetrics {
            b_mse: v,
            c_mse: v,
            cf_mse: v,
            sb_mse: v,
            sc_mse: v,
            scf_mse: v,
            b_mse_at: [Some(v), None, None],
        };
        let one = aggregate("x", &[m(7.0)], &[0]).unwrap();
        assert_eq!(one.b_mse, 7.0);
        assert_eq!(one.b_mse_at, [Some(7.0), None, None]);
        let two = aggregate("x", &[m(1.0), m(3.0)], &[0, 1]).unwrap();
        assert_eq!(two.b_mse, 2.0);
        assert_eq!(two.n_samples, 2);
        assert!(matches!(aggregate("x", &[m(1.0)], &[]), Err(Error::EmptyCell)));
    }

    #[test]
    fn horizons_follow_frame_rate() {
        let gt = track(45);
        let s = sample_with_future(gt.clone());
        let mut pred = gt.clone();
        for b in pred.iter_mut().skip(15) {
            *b = b.translate(4.0, 0.0);
        }
        let m = evaluate_sample(
            &[pred],
            &s,
            &AreaMode::Adjusted(Adjustment::default()),
            30.0,
        )
        .unwrap();
        assert_eq!(m.b_mse_at[0], Some(0.0));
        assert_eq!(m.b_mse_at[1], Some(8.0 * 15.0 / 30.0));
        assert_eq!(m.b_mse_at[2], Some(m.b_mse));
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn traj(n: usize) -> impl Strategy<Value = Vec<BoundingBox>> {
            proptest::collection::vec(
                (50.0..1500.0f64, 50.0..800.0f64, 5.0..100.0f64, 10.0..200.0f64),
                n,
            )
            .prop_map(|v| {
                v.into_iter()
                    .map(|(x, y, w, h)| BoundingBox::new(x, y, x + w, y + h).unwrap())
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn metrics_are_translation_invariant(
                pred in traj(6), gt in traj(6), dx in -40.0..40.0f64, dy in -40.0..40.0f64,
            ) {
                let mp: Vec<_> = pred.iter().map(|b| b.translate(dx, dy)).collect();
                let mg: Vec<_> = gt.iter().map(|b| b.translate(dx, dy)).collect();
                for (a, b) in [
                    (b_mse(&pred, &gt, 6).unwrap(), b_mse(&mp, &mg, 6).unwrap()),
                    (c_mse(&pred, &gt, 6).unwrap(), c_mse(&mp, &mg, 6).unwrap()),
                    (cf_mse(&pred, &gt).unwrap(), cf_mse(&mp, &mg).unwrap()),
                ] {
                    prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
                }
            }

            #[test]
            fn metrics_are_non_negative_and_zero_on_identity(gt in traj(5), pred in traj(5)) {
                prop_assert!(b_mse(&pred, &gt, 5).unwrap() >= 0.0);
                prop_assert!(c_mse(&pred, &gt, 3).unwrap() >= 0.0);
                prop_assert_eq!(b_mse(&gt, &gt, 5).unwrap(), 0.0);
                prop_assert_eq!(cf_mse(&gt, &gt).unwrap(), 0.0);
            }

            #[test]
            fn best_of_k_non_increasing_for_nested_sets(gt in traj(4), cands in proptest::collection::vec(traj(4), 1..6)) {
                let mut last = f64::INFINITY;
                for k in 1..=cands.len() {
                    let v = best_of_k(&cands[..k], &gt, |p, g| b_mse(p, g, 4)).unwrap();
                    prop_assert!(v <= last);
                    last = v;
                }
            }
        }
    }
}
