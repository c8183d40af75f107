//! Per-sample model inputs and targets, and their batched tensors.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::trajectory::{Adjustment, BoundingBox, EgoState, ImageGeometry, PedestrianState, TrajectorySample};

pub const EGO_FEATURES: usize = 5;

// Fixed divisors that bring ego readings to roughly unit range.
const SPEED_SCALE_KMH: f64 = 50.0;
const ACCEL_SCALE_MS2: f64 = 3.0;
const YAW_RATE_SCALE_DPS: f64 = 20.0;
const GPS_SCALE_M: f64 = 1.0;

const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Encoder-side inputs for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityBundle {
    /// Boxes normalized by image size, relative to the first observed box.
    pub location: Vec<[f64; 4]>,
    pub velocity: Vec<[f64; 4]>,
    /// One-hot `[walking, standing]`.
    pub state: Vec<[f64; 2]>,
    /// `[speed, acceleration, yaw rate, east step, north step]`, scaled.
    pub ego: Vec<[f64; EGO_FEATURES]>,
    pub future_ego: Vec<[f64; EGO_FEATURES]>,
    /// First observed box, normalized but not centered.
    pub origin: [f64; 4],
    pub geometry: ImageGeometry,
}

/// Training targets for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    /// Future boxes in the same frame as `ModalityBundle::location`.
    pub future: Vec<[f64; 4]>,
    /// Mean adjusted future box size, normalized, as `(w, h, w, h)`.
    pub scale: [f64; 4],
}

fn normalized(b: &BoundingBox, g: &ImageGeometry) -> [f64; 4] {
    [b.x1 / g.width(), b.y1 / g.height(), b.x2 / g.width(), b.y2 / g.height()]
}

fn sub4(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

/// East/north displacement in metres between two GPS fixes.
pub fn gps_delta(from: &EgoState, to: &EgoState) -> (f64, f64) {
    let lat0 = from.lat.to_radians();
    let east = (to.lon - from.lon).to_radians() * lat0.cos() * EARTH_RADIUS_M;
    let north = (to.lat - from.lat).to_radians() * EARTH_RADIUS_M;
    (east, north)
}

fn ego_rows(seq: &[&EgoState]) -> Vec<[f64; EGO_FEATURES]> {
    seq.iter()
        .enumerate()
        .map(|(t, e)| {
            let (dx, dy) = if t == 0 { (0.0, 0.0) } else { gps_delta(seq[t - 1], e) };
            [
                e.speed_kmh / SPEED_SCALE_KMH,
                e.accel_ms2 / ACCEL_SCALE_MS2,
                e.yaw_rate_dps / YAW_RATE_SCALE_DPS,
                dx / GPS_SCALE_M,
                dy / GPS_SCALE_M,
            ]
        })
        .collect()
}

pub fn build_bundle(sample: &TrajectorySample) -> ModalityBundle {
    let g = sample.geometry;
    let origin = normalized(&sample.obs_boxes[0], &g);
    let location: Vec<[f64; 4]> = sample
        .obs_boxes
        .iter()
        .map(|b| sub4(normalized(b, &g), origin))
        .collect();
    let velocity = (0..location.len())
        .map(|t| if t == 0 { [0.0; 4] } else { sub4(location[t], location[t - 1]) })
        .collect();
    let state = sample
        .obs_states
        .iter()
        .map(|s| match s {
            PedestrianState::Walking => [1.0, 0.0],
            PedestrianState::Standing => [0.0, 1.0],
        })
        .collect();
    // Deltas run across the observation/future seam, so the first future
    // step is measured from the last observed fix.
    let all: Vec<&EgoState> = sample.all_ego().collect();
    let rows = ego_rows(&all);
    let o = sample.obs_len();
    ModalityBundle {
        location,
        velocity,
        state,
        ego: rows[..o].to_vec(),
        future_ego: rows[o..].to_vec(),
        origin,
        geometry: g,
    }
}

pub fn build_targets(sample: &TrajectorySample, adjustment: &Adjustment) -> Result<Targets> {
    let g = sample.geometry;
    let origin = normalized(&sample.obs_boxes[0], &g);
    let future = sample
        .fut_boxes
        .iter()
        .map(|b| sub4(normalized(b, &g), origin))
        .collect();
    let (mut w, mut h) = (0.0, 0.0);
    for b in &sample.fut_boxes {
        let (bw, bh) = adjustment.dims(b, &g)?;
        w += bw;
        h += bh;
    }
    let n = sample.fut_boxes.len() as f64;
    let (w, h) = (w / n / g.width(), h / n / g.height());
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::ZeroArea);
    }
    Ok(Targets {
        future,
        scale: [w, h, w, h],
    })
}

/// Maps model-frame rows back to ordered pixel boxes.
pub fn denormalize(rows: &[[f64; 4]], origin: [f64; 4], g: &ImageGeometry) -> Vec<BoundingBox> {
    rows.iter()
        .map(|r| {
            BoundingBox::from_corners(
                (r[0] + origin[0]) * g.width(),
                (r[1] + origin[1]) * g.height(),
                (r[2] + origin[2]) * g.width(),
                (r[3] + origin[3]) * g.height(),
            )
        })
        .collect()
}

/// Stacked inputs (and optionally targets) of several samples.
#[derive(Debug, Clone)]
pub struct Batch {
    pub size: usize,
    pub obs_len: usize,
    pub pred_len: usize,
    pub location: Tensor,
    pub velocity: Tensor,
    pub state: Tensor,
    pub ego: Tensor,
    pub future_ego: Tensor,
    /// `[B, o, EGO_FEATURES + 4]`: ego rows with the first box appended.
    pub ego_with_origin: Tensor,
    /// Last observed location, `[B, 4]`.
    pub last: Vec<[f64; 4]>,
    pub origins: Vec<[f64; 4]>,
    pub geometries: Vec<ImageGeometry>,
    pub target: Option<Tensor>,
    pub scale: Option<Vec<[f64; 4]>>,
}

fn stack<const N: usize>(rows: impl Iterator<Item = Vec<[f64; N]>>, b: usize, t: usize) -> Result<Tensor> {
    let data: Vec<f64> = rows.flat_map(|r| r.into_iter().flatten()).collect();
    Tensor::new(vec![b, t, N], data)
}

impl Batch {
    pub fn new(bundles: &[&ModalityBundle], targets: Option<&[&Targets]>) -> Result<Self> {
        let b = bundles.len();
        if b == 0 {
            return Err(Error::EmptyCorpus);
        }
        let o = bundles[0].location.len();
        let tau = bundles[0].future_ego.len();
        for x in bundles {
            if x.location.len() != o || x.future_ego.len() != tau {
                return Err(Error::LengthMismatch {
                    expected: o,
                    actual: x.location.len(),
                });
            }
        }
        let with_origin = bundles.iter().map(|x| {
            x.ego
                .iter()
                .map(|e| {
                    let mut row = [0.0; EGO_FEATURES + 4];
                    row[..EGO_FEATURES].copy_from_slice(e);
                    row[EGO_FEATURES..].copy_from_slice(&x.origin);
                    row
                })
                .collect::<Vec<_>>()
        });
        let (target, scale) = match targets {
            Some(ts) => {
                if ts.len() != b {
                    return Err(Error::LengthMismatch {
                        expected: b,
                        actual: ts.len(),
                    });
                }
                if ts.iter().any(|t| t.future.len() != tau) {
                    return Err(Error::MissingFuture);
                }
                (
                    Some(stack(ts.iter().map(|t| t.future.clone()), b, tau)?),
                    Some(ts.iter().map(|t| t.scale).collect()),
                )
            }
            None => (None, None),
        };
        Ok(Batch {
            size: b,
            obs_len: o,
            pred_len: tau,
            location: stack(bundles.iter().map(|x| x.location.clone()), b, o)?,
            velocity: stack(bundles.iter().map(|x| x.velocity.clone()), b, o)?,
            state: stack(bundles.iter().map(|x| x.state.clone()), b, o)?,
            ego: stack(bundles.iter().map(|x| x.ego.clone()), b, o)?,
            future_ego: stack(bundles.iter().map(|x| x.future_ego.clone()), b, tau)?,
            ego_with_origin: stack(with_origin, b, o)?,
            last: bundles.iter().map(|x| x.location[o - 1]).collect(),
            origins: bundles.iter().map(|x| x.origin).collect(),
            geometries: bundles.iter().map(|x| x.geometry).collect(),
            target,
            scale,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::PedestrianState;

    fn sample(step: f64) -> TrajectorySample {
        let ego = EgoState {
            speed_kmh: 0.0,
            accel_ms2: 0.0,
            yaw_deg: 0.0,
            yaw_rate_dps: 0.0,
            lat: 43.0,
            lon: -79.0,
        };
        let bx = |t: usize| BoundingBox::new(100.0 + step * t as f64, 300.0, 140.0 + step * t as f64, 420.0).unwrap();
        TrajectorySample {
            ped_id: "p".into(),
            video_id: "v".into(),
            start_frame: 0,
            obs_boxes: (0..4).map(bx).collect(),
            fut_boxes: (4..10).map(bx).collect(),
            obs_states: vec![PedestrianState::Walking; 4],
            fut_states: vec![PedestrianState::Walking; 6],
            obs_ego: vec![ego; 4],
            fut_ego: vec![ego; 6],
            geometry: ImageGeometry::default(),
            truth: None,
        }
    }

    #[test]
    fn static_box_has_zero_velocity() {
        let b = build_bundle(&sample(0.0));
        assert!(b.velocity.iter().flatten().all(|&v| v == 0.0));
        assert!(b.location.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn first_location_is_origin() {
        let b = build_bundle(&sample(5.0));
        assert_eq!(b.location[0], [0.0; 4]);
        assert_eq!(b.origin[0], 100.0 / 1920.0);
    }

    #[test]
    fn moving_box_velocity_is_normalized_step() {
        let b = build_bundle(&sample(3.0));
        for v in &b.velocity[1..] {
            assert!((v[0] - 3.0 / 1920.0).abs() < 1e-15);
            assert!((v[2] - 3.0 / 1920.0).abs() < 1e-15);
            assert_eq!(v[1], 0.0);
        }
    }

    #[test]
    fn gps_delta_of_one_arc_second_north() {
        let a = EgoState {
            speed_kmh: 0.0,
            accel_ms2: 0.0,
            yaw_deg: 0.0,
            yaw_rate_dps: 0.0,
            lat: 0.0,
            lon: 0.0,
        };
        let b = EgoState { lat: 1.0 / 3600.0, ..a };
        let (e, n) = gps_delta(&a, &b);
        assert_eq!(e, 0.0);
        assert!((n - 30.887).abs() < 1e-3);
    }

    #[test]
    fn denormalize_inverts_normalization() {
        let s = sample(2.0);
        let b = build_bundle(&s);
        let back = denormalize(&b.location, b.origin, &s.geometry);
        for (x, y) in back.iter().zip(&s.obs_boxes) {
            assert!((x.x1 - y.x1).abs() < 1e-9 && (x.y2 - y.y2).abs() < 1e-9);
        }
    }

    #[test]
    fn scaled_targets_use_adjusted_dims() {
        let s = sample(0.0);
        let t = build_targets(&s, &Adjustment::default()).unwrap();
        assert!((t.scale[0] - 40.0 / 1920.0).abs() < 1e-15);
        assert!((t.scale[1] - 120.0 / 1080.0).abs() < 1e-15);
    }

    #[test]
    fn batch_shapes() {
        let s = sample(1.0);
        let b = build_bundle(&s);
        let t = build_targets(&s, &Adjustment::default()).unwrap();
        let batch = Batch::new(&[&b, &b], Some(&[&t, &t])).unwrap();
        assert_eq!(batch.location.shape(), &[2, 4, 4]);
        assert_eq!(batch.future_ego.shape(), &[2, 6, 5]);
        assert_eq!(batch.ego_with_origin.shape(), &[2, 4, 9]);
        assert_eq!(batch.target.as_ref().unwrap().shape(), &[2, 6, 4]);
    }
}
