//! Kinematic reference predictors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{BoundingBox, TrajectorySample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Repeats the last observed box.
    ConstantPosition,
    /// Extrapolates the mean frame-to-frame delta of the observation.
    ConstantVelocity,
    /// Extrapolates a per-coordinate least-squares line.
    LinearFit,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [
        BaselineKind::ConstantPosition,
        BaselineKind::ConstantVelocity,
        BaselineKind::LinearFit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::ConstantPosition => "constant_position",
            BaselineKind::ConstantVelocity => "constant_velocity",
            BaselineKind::LinearFit => "linear_fit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "constant_position" | "cp" => Ok(BaselineKind::ConstantPosition),
            "constant_velocity" | "cv" => Ok(BaselineKind::ConstantVelocity),
            "linear_fit" | "lf" => Ok(BaselineKind::LinearFit),
            other => Err(Error::Config(format!("unknown baseline `{other}`"))),
        }
    }
}

/// Predicts `sample.pred_len()` future boxes from the observation alone.
pub fn predict(kind: BaselineKind, sample: &TrajectorySample) -> Vec<BoundingBox> {
    predict_len(kind, &sample.obs_boxes, sample.pred_len())
}

pub fn predict_len(kind: BaselineKind, obs: &[BoundingBox], pred_len: usize) -> Vec<BoundingBox> {
    let o = obs.len();
    let last = obs[o - 1].to_array();
    let coords: Vec<[f64; 4]> = obs.iter().map(|b| b.to_array()).collect();
    let (intercept, slope): ([f64; 4], [f64; 4]) = match kind {
        BaselineKind::ConstantPosition => (last, [0.0; 4]),
        BaselineKind::ConstantVelocity => {
            let mut v = [0.0; 4];
            if o > 1 {
                // Telescoping mean of deltas.
                for (i, slot) in v.iter_mut().enumerate() {
                    *slot = (coords[o - 1][i] - coords[0][i]) / (o - 1) as f64;
                }
            }
            (last, v)
        }
        BaselineKind::LinearFit => {
            let mut a = last;
            let mut b = [0.0; 4];
            if o > 1 {
                let n = o as f64;
                let tm = (n - 1.0) / 2.0;
                let stt: f64 = (0..o).map(|t| (t as f64 - tm).powi(2)).sum();
                for i in 0..4 {
                    let ym = coords.iter().map(|c| c[i]).sum::<f64>() / n;
                    let sty: f64 = coords
                        .iter()
                        .enumerate()
                        .map(|(t, c)| (t as f64 - tm) * (c[i] - ym))
                        .sum();
                    b[i] = sty / stt;
                    // Fitted value at the last observed frame.
                    a[i] = ym + b[i] * ((n - 1.0) - tm);
                }
            }
            (a, b)
        }
    };
    (1..=pred_len)
        .map(|step| {
            let s = step as f64;
            BoundingBox::from_corners(
                intercept[0] + slope[0] * s,
                intercept[1] + slope[1] * s,
                intercept[2] + slope[2] * s,
                intercept[3] + slope[3] * s,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::b_mse;

    fn linear(o: usize, tau: usize, v: [f64; 4]) -> (Vec<BoundingBox>, Vec<BoundingBox>) {
        let at = |t: f64| {
            BoundingBox::new(
                100.0 + v[0] * t,
                200.0 + v[1] * t,
                140.0 + v[2] * t,
                320.0 + v[3] * t,
            )
            .unwrap()
        };
        let obs = (0..o).map(|t| at(t as f64)).collect();
        let fut = (o..o + tau).map(|t| at(t as f64)).collect();
        (obs, fut)
    }

    #[test]
    fn constant_position_is_exact_on_static_track() {
        let (obs, fut) = linear(15, 45, [0.0; 4]);
        let p = predict_len(BaselineKind::ConstantPosition, &obs, 45);
        assert_eq!(b_mse(&p, &fut, 45).unwrap(), 0.0);
    }

    #[test]
    fn constant_velocity_is_exact_on_linear_track() {
        let (obs, fut) = linear(15, 45, [2.0, -1.0, 2.5, 0.5]);
        let p = predict_len(BaselineKind::ConstantVelocity, &obs, 45);
        assert!(b_mse(&p, &fut, 45).unwrap() < 1e-18);
    }

    #[test]
    fn linear_fit_matches_constant_velocity_without_noise() {
        let (obs, _) = linear(15, 45, [1.5, 0.25, 1.75, 0.75]);
        let cv = predict_len(BaselineKind::ConstantVelocity, &obs, 45);
        let lf = predict_len(BaselineKind::LinearFit, &obs, 45);
        for (a, b) in cv.iter().zip(&lf) {
            for (x, y) in a.to_array().iter().zip(b.to_array()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linear_fit_agrees_with_normal_equations() {
        // y = [3, 5, 4, 8]: closed-form slope 1.4, intercept 2.9.
        let obs: Vec<_> = [3.0, 5.0, 4.0, 8.0]
            .iter()
            .map(|&y| BoundingBox::new(y, 0.0, y + 10.0, 10.0).unwrap())
            .collect();
        let p = predict_len(BaselineKind::LinearFit, &obs, 2);
        assert!((p[0].x1 - (2.9 + 1.4 * 4.0)).abs() < 1e-12);
        assert!((p[1].x1 - (2.9 + 1.4 * 5.0)).abs() < 1e-12);
    }

    #[test]
    fn baselines_are_translation_equivariant() {
        let (obs, _) = linear(6, 4, [1.0, 0.3, 1.4, 0.8]);
        let moved: Vec<_> = obs.iter().map(|b| b.translate(17.0, -9.0)).collect();
        for kind in BaselineKind::ALL {
            let a = predict_len(kind, &obs, 4);
            let b = predict_len(kind, &moved, 4);
            for (x, y) in a.iter().zip(&b) {
                assert!((x.x1 + 17.0 - y.x1).abs() < 1e-9);
                assert!((x.y2 - 9.0 - y.y2).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for k in BaselineKind::ALL {
            assert_eq!(BaselineKind::parse(k.name()).unwrap(), k);
        }
    }
}
