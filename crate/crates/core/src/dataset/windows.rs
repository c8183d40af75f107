use serde::{Deserialize, Serialize};

use crate::dataset::annotations::RawTrack;
use crate::dataset::synthetic::SampleTruth;
use crate::error::{Error, Result};
use crate::trajectory::TrajectorySample;

/// Observation/prediction horizons and window stride, all in frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub obs_len: usize,
    pub pred_len: usize,
    pub stride: usize,
}

impl WindowSpec {
    pub fn new(obs_len: usize, pred_len: usize, stride: usize) -> Result<Self> {
        if obs_len == 0 || pred_len == 0 || stride == 0 {
            return Err(Error::Config(format!(
                "window lengths must be >= 1 (o={obs_len}, tau={pred_len}, stride={stride})"
            )));
        }
        Ok(WindowSpec {
            obs_len,
            pred_len,
            stride,
        })
    }

    /// Half-overlapping windows: stride is half the total window.
    pub fn half_overlap(obs_len: usize, pred_len: usize) -> Result<Self> {
        Self::new(obs_len, pred_len, ((obs_len + pred_len) / 2).max(1))
    }

    /// 0.5 s observation and 1.5 s prediction at the given frame rate.
    pub fn from_seconds(fps: f64) -> Result<Self> {
        let obs = (0.5 * fps).round() as usize;
        let pred = (1.5 * fps).round() as usize;
        Self::half_overlap(obs, pred)
    }

    pub fn total(&self) -> usize {
        self.obs_len + self.pred_len
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            obs_len: 15,
            pred_len: 45,
            stride: 30,
        }
    }
}

/// Cuts a track into fixed-length windows starting at `0, stride, 2·stride, …`.
/// Windows that straddle a missing frame are dropped.
pub fn slice_windows(track: &RawTrack, spec: &WindowSpec) -> Vec<TrajectorySample> {
    let total = spec.total();
    let mut out = Vec::new();
    if track.frames.len() < total {
        return out;
    }
    let mut start = 0;
    while start + total <= track.frames.len() {
        let window = &track.frames[start..start + total];
        let contiguous = window.windows(2).all(|p| p[1].frame == p[0].frame + 1);
        if contiguous {
            let (obs, fut) = window.split_at(spec.obs_len);
            let truth = if window.iter().all(|r| r.truth.is_some()) {
                let frames: Vec<_> = window.iter().filter_map(|r| r.truth.clone()).collect();
                Some(SampleTruth::from_frames(frames, spec.obs_len, track.fps))
            } else {
                None
            };
            out.push(TrajectorySample {
                ped_id: track.ped_id.clone(),
                video_id: track.video_id.clone(),
                start_frame: window[0].frame,
                obs_boxes: obs.iter().map(|r| r.bbox).collect(),
                fut_boxes: fut.iter().map(|r| r.bbox).collect(),
                obs_states: obs.iter().map(|r| r.state).collect(),
                fut_states: fut.iter().map(|r| r.state).collect(),
                obs_ego: obs.iter().map(|r| r.ego).collect(),
                fut_ego: fut.iter().map(|r| r.ego).collect(),
                geometry: track.geometry,
                truth,
            });
        }
        start += spec.stride;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::annotations::FrameRecord;
    use crate::trajectory::{BoundingBox, EgoState, ImageGeometry, PedestrianState};

    fn track_of(len: usize) -> RawTrack {
        let ego = EgoState {
            speed_kmh: 0.0,
            accel_ms2: 0.0,
            yaw_deg: 0.0,
            yaw_rate_dps: 0.0,
            lat: 0.0,
            lon: 0.0,
        };
        RawTrack {
            video_id: "v".into(),
            ped_id: "p".into(),
            frames: (0..len)
                .map(|i| FrameRecord {
                    frame: i as i64,
                    bbox: BoundingBox::new(i as f64, 0.0, i as f64 + 10.0, 30.0).unwrap(),
                    state: PedestrianState::Walking,
                    ego,
                    truth: None,
                })
                .collect(),
            geometry: ImageGeometry::default(),
            fps: 30.0,
        }
    }

    #[test]
    fn defaults_realize_half_and_one_and_a_half_seconds() {
        assert_eq!(WindowSpec::from_seconds(30.0).unwrap(), WindowSpec::default());
    }

    #[test]
    fn window_count_examples() {
        let spec = WindowSpec::default();
        assert_eq!(slice_windows(&track_of(60), &spec).len(), 1);
        let two = slice_windows(&track_of(90), &spec);
        assert_eq!(
            two.iter().map(|s| s.start_frame).collect::<Vec<_>>(),
            vec![0, 30]
        );
        assert!(slice_windows(&track_of(59), &spec).is_empty());
    }

    #[test]
    fn window_contents_split_at_observation_length() {
        let s = &slice_windows(&track_of(60), &WindowSpec::default())[0];
        assert_eq!(s.obs_boxes.len(), 15);
        assert_eq!(s.fut_boxes.len(), 45);
        assert_eq!(s.fut_boxes[0].x1, 15.0);
        s.validate().unwrap();
    }

    #[test]
    fn gapped_windows_are_dropped() {
        let mut t = track_of(90);
        for r in t.frames.iter_mut().skip(45) {
            r.frame += 5;
        }
        // Window at 0 spans the gap between index 44 and 45; window at 30 does too.
        assert!(slice_windows(&t, &WindowSpec::default()).is_empty());
        let short = WindowSpec::new(5, 10, 15).unwrap();
        let starts: Vec<_> = slice_windows(&t, &short).iter().map(|s| s.start_frame).collect();
        assert_eq!(starts, vec![0, 15, 30, 50, 65, 80]);
    }

    #[test]
    fn count_matches_brute_force_enumeration() {
        for (o, tau, stride) in [(15, 45, 30), (3, 4, 2), (1, 1, 1), (5, 7, 13)] {
            let spec = WindowSpec::new(o, tau, stride).unwrap();
            for len in 0..=200usize {
                let brute = (0..len).filter(|s| s % stride == 0 && s + o + tau <= len).count();
                let formula = if len < o + tau {
                    0
                } else {
                    (len - (o + tau)) / stride + 1
                };
                assert_eq!(brute, formula);
                assert_eq!(slice_windows(&track_of(len), &spec).len(), brute, "len={len}");
            }
        }
    }
}
