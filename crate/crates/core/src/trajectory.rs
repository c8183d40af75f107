//! Image-plane geometry: bounding boxes, trajectory windows, and the
//! truncation-aware area used to scale pixel errors.
//!
//! A pedestrian box that touches the image border is assumed to be cut off
//! by it. Its full extent is then reconstructed from the side that is still
//! intact and the corpus-average width/height ratio of fully visible boxes.

use serde::{Deserialize, Serialize};

use crate::dataset::synthetic::SampleTruth;
use crate::error::{Error, Result};

pub const DEFAULT_ASPECT_RATIO: f64 = 0.34;
pub const DEFAULT_EDGE_EPS: f64 = 1.0;
pub const DEFAULT_FPS: f64 = 30.0;

/// Axis-aligned pedestrian box `[x1, y1, x2, y2]` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let b = BoundingBox { x1, y1, x2, y2 };
        if b.is_valid() {
            Ok(b)
        } else {
            Err(Error::InvalidBox { x1, y1, x2, y2 })
        }
    }

    /// Builds a box from unordered corners.
    pub fn from_corners(xa: f64, ya: f64, xb: f64, yb: f64) -> Self {
        BoundingBox {
            x1: xa.min(xb),
            y1: ya.min(yb),
            x2: xa.max(xb),
            y2: ya.max(yb),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite()) && self.x2 >= self.x1 && self.y2 >= self.y1
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn dims(&self) -> (f64, f64) {
        (self.x2 - self.x1, self.y2 - self.y1)
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        BoundingBox {
            x1: self.x1 + dx,
            y1: self.y1 + dy,
            x2: self.x2 + dx,
            y2: self.y2 + dy,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        BoundingBox {
            x1: self.x1 * s,
            y1: self.y1 * s,
            x2: self.x2 * s,
            y2: self.y2 * s,
        }
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.to_array()
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

pub fn box_center(b: &BoundingBox) -> (f64, f64) {
    b.center()
}

pub fn box_dims(b: &BoundingBox) -> (f64, f64) {
    b.dims()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageGeometry {
    pub w: u32,
    pub h: u32,
}

impl ImageGeometry {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!(
                "image geometry must be positive, got {width}x{height}"
            )));
        }
        Ok(ImageGeometry {
            w: width,
            h: height,
        })
    }

    pub fn width(&self) -> f64 {
        f64::from(self.w)
    }

    pub fn height(&self) -> f64 {
        f64::from(self.h)
    }
}

impl Default for ImageGeometry {
    fn default() -> Self {
        ImageGeometry { w: 1920, h: 1080 }
    }
}

/// Ego-vehicle reading for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub speed_kmh: f64,
    pub accel_ms2: f64,
    /// Unwrapped heading in degrees.
    pub yaw_deg: f64,
    pub yaw_rate_dps: f64,
    pub lat: f64,
    pub lon: f64,
}

impl EgoState {
    pub fn is_valid(&self) -> bool {
        self.speed_kmh >= 0.0
            && [
                self.speed_kmh,
                self.accel_ms2,
                self.yaw_deg,
                self.yaw_rate_dps,
                self.lat,
                self.lon,
            ]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PedestrianState {
    Walking,
    Standing,
}

/// One observation/future window of a single pedestrian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub ped_id: String,
    pub video_id: String,
    /// Frame index of the first observed frame.
    pub start_frame: i64,
    pub obs_boxes: Vec<BoundingBox>,
    pub fut_boxes: Vec<BoundingBox>,
    pub obs_states: Vec<PedestrianState>,
    pub fut_states: Vec<PedestrianState>,
    pub obs_ego: Vec<EgoState>,
    pub fut_ego: Vec<EgoState>,
    pub geometry: ImageGeometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<SampleTruth>,
}

impl TrajectorySample {
    /// Stable identifier `video/ped@start`.
    pub fn id(&self) -> String {
        format!("{}/{}@{}", self.video_id, self.ped_id, self.start_frame)
    }

    pub fn obs_len(&self) -> usize {
        self.obs_boxes.len()
    }

    pub fn pred_len(&self) -> usize {
        self.fut_boxes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let o = self.obs_boxes.len();
        let t = self.fut_boxes.len();
        for (expected, actual) in [
            (o, self.obs_states.len()),
            (o, self.obs_ego.len()),
            (t, self.fut_states.len()),
            (t, self.fut_ego.len()),
        ] {
            if expected != actual {
                return Err(Error::LengthMismatch { expected, actual });
            }
        }
        if let Some(b) = self
            .obs_boxes
            .iter()
            .chain(&self.fut_boxes)
            .find(|b| !b.is_valid())
        {
            return Err(Error::InvalidBox {
                x1: b.x1,
                y1: b.y1,
                x2: b.x2,
                y2: b.y2,
            });
        }
        Ok(())
    }

    pub fn all_ego(&self) -> impl Iterator<Item = &EgoState> {
        self.obs_ego.iter().chain(&self.fut_ego)
    }

    pub fn all_boxes(&self) -> impl Iterator<Item = &BoundingBox> {
        self.obs_boxes.iter().chain(&self.fut_boxes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub samples: Vec<TrajectorySample>,
    pub split: Split,
    pub fps: f64,
    pub visible_aspect_ratio: f64,
}

impl Corpus {
    pub fn new(samples: Vec<TrajectorySample>, split: Split, fps: f64) -> Result<Self> {
        if !(fps > 0.0) {
            return Err(Error::Config(format!("fps must be positive, got {fps}")));
        }
        Ok(Corpus {
            samples,
            split,
            fps,
            visible_aspect_ratio: DEFAULT_ASPECT_RATIO,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of distinct pedestrians.
    pub fn pedestrian_count(&self) -> usize {
        let ids: std::collections::BTreeSet<(&str, &str)> = self
            .samples
            .iter()
            .map(|s| (s.video_id.as_str(), s.ped_id.as_str()))
            .collect();
        ids.len()
    }

    pub fn set_aspect_ratio(&mut self, ratio: f64) -> Result<()> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Config(format!(
                "visible aspect ratio must lie in (0, 1), got {ratio}"
            )));
        }
        self.visible_aspect_ratio = ratio;
        Ok(())
    }

    pub fn adjustment(&self) -> Adjustment {
        Adjustment {
            ratio: self.visible_aspect_ratio,
            edge_eps: DEFAULT_EDGE_EPS,
        }
    }
}

/// Which image borders a box touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    None,
    Horizontal,
    Vertical,
    Both,
}

/// Parameters of the boundary adjustment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adjustment {
    /// Width/height ratio of fully visible boxes.
    pub ratio: f64,
    /// Distance to the border, in pixels, under which a side counts as cut.
    pub edge_eps: f64,
}

impl Default for Adjustment {
    fn default() -> Self {
        Adjustment {
            ratio: DEFAULT_ASPECT_RATIO,
            edge_eps: DEFAULT_EDGE_EPS,
        }
    }
}

impl Adjustment {
    pub fn with_ratio(ratio: f64) -> Self {
        Adjustment {
            ratio,
            ..Default::default()
        }
    }

    pub fn truncation(&self, b: &BoundingBox, g: &ImageGeometry) -> Truncation {
        let horizontal = b.x1 <= self.edge_eps || b.x2 >= g.width() - self.edge_eps;
        let vertical = b.y1 <= self.edge_eps || b.y2 >= g.height() - self.edge_eps;
        match (horizontal, vertical) {
            (false, false) => Truncation::None,
            (true, false) => Truncation::Horizontal,
            (false, true) => Truncation::Vertical,
            (true, true) => Truncation::Both,
        }
    }

    pub fn is_fully_visible(&self, b: &BoundingBox, g: &ImageGeometry) -> bool {
        self.truncation(b, g) == Truncation::None
    }

    /// Reconstructed `(w, h)` of a possibly truncated box. The product is
    /// [`Adjustment::area`].
    pub fn dims(&self, b: &BoundingBox, g: &ImageGeometry) -> Result<(f64, f64)> {
        if !(self.ratio > 0.0) {
            return Err(Error::Config(format!(
                "aspect ratio must be positive, got {}",
                self.ratio
            )));
        }
        let (w, h) = b.dims();
        if w == 0.0 && h == 0.0 {
            return Err(Error::ZeroArea);
        }
        let from_height = (self.ratio * h, h);
        let from_width = (w, w / self.ratio);
        Ok(match self.truncation(b, g) {
            Truncation::None => (w, h),
            Truncation::Horizontal => from_height,
            Truncation::Vertical => from_width,
            // Largest plausible extent among the three estimates.
            Truncation::Both => [(w, h), from_height, from_width]
                .into_iter()
                .fold((0.0, 0.0), |best: (f64, f64), c| {
                    if c.0 * c.1 > best.0 * best.1 {
                        c
                    } else {
                        best
                    }
                }),
        })
    }

    pub fn area(&self, b: &BoundingBox, g: &ImageGeometry) -> Result<f64> {
        let (w, h) = self.dims(b, g)?;
        Ok(w * h)
    }
}

/// Area of `b` after compensating for border truncation, with the default
/// one-pixel edge tolerance.
pub fn adjusted_area(b: &BoundingBox, g: &ImageGeometry, ratio: f64) -> Result<f64> {
    Adjustment::with_ratio(ratio).area(b, g)
}

/// Mean width/height ratio over every fully visible box in the corpus.
pub fn measure_visible_aspect_ratio(corpus: &Corpus) -> Result<f64> {
    measure_aspect_ratio_with(corpus, &Adjustment::default())
}

pub fn measure_aspect_ratio_with(corpus: &Corpus, adjustment: &Adjustment) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for sample in &corpus.samples {
        for b in sample.all_boxes() {
            if b.height() > 0.0 && adjustment.is_fully_visible(b, &sample.geometry) {
                sum += b.width() / b.height();
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::NoVisibleBoxes);
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    const HD: ImageGeometry = ImageGeometry { w: 1920, h: 1080 };

    #[test]
    fn center_examples() {
        assert_eq!(bb(0.0, 0.0, 10.0, 20.0).center(), (5.0, 10.0));
        assert_eq!(bb(100.0, 100.0, 100.0, 100.0).center(), (100.0, 100.0));
        assert_eq!(bb(3.5, 7.0, 8.5, 11.0).center(), (6.0, 9.0));
    }

    #[test]
    fn dims_examples() {
        assert_eq!(box_dims(&bb(0.0, 0.0, 34.0, 100.0)), (34.0, 100.0));
        assert_eq!(box_dims(&bb(5.0, 5.0, 5.0, 5.0)), (0.0, 0.0));
        assert_eq!(box_dims(&bb(12.5, 0.0, 46.5, 100.0)), (34.0, 100.0));
    }

    #[test]
    fn rejects_inverted_and_nonfinite_boxes() {
        assert!(BoundingBox::new(10.0, 0.0, 5.0, 1.0).is_err());
        assert!(BoundingBox::new(0.0, f64::NAN, 5.0, 1.0).is_err());
        assert!(serde_json::from_str::<BoundingBox>("[3, 4, 1, 5]").is_err());
    }

    #[test]
    fn adjusted_area_examples() {
        let visible = bb(500.0, 300.0, 534.0, 400.0);
        assert_eq!(adjusted_area(&visible, &HD, 0.34).unwrap(), 3400.0);
        let cut_left = bb(0.0, 300.0, 10.0, 400.0);
        let area = adjusted_area(&cut_left, &HD, 0.34).unwrap();
        assert!((area - 3400.0).abs() < 1e-9);
    }

    #[test]
    fn vertical_truncation_uses_width() {
        let cut_bottom = bb(500.0, 900.0, 534.0, 1080.0);
        let area = adjusted_area(&cut_bottom, &HD, 0.34).unwrap();
        assert!((area - 34.0 * 100.0).abs() < 1e-9);
    }

    #[test]
    fn both_axes_takes_largest_estimate() {
        let corner = bb(0.0, 0.0, 30.0, 50.0);
        let area = adjusted_area(&corner, &HD, 0.34).unwrap();
        let expected = [30.0 * 50.0, 0.34 * 50.0 * 50.0, 30.0 * (30.0 / 0.34)]
            .into_iter()
            .fold(0.0, f64::max);
        assert!((area - expected).abs() < 1e-9);
    }

    #[test]
    fn zero_area_is_an_error() {
        let point = bb(100.0, 100.0, 100.0, 100.0);
        assert!(matches!(adjusted_area(&point, &HD, 0.34), Err(Error::ZeroArea)));
    }

    #[test]
    fn edge_tolerance_is_one_pixel() {
        let adj = Adjustment::default();
        assert_eq!(adj.truncation(&bb(1.0, 10.0, 30.0, 90.0), &HD), Truncation::Horizontal);
        assert_eq!(adj.truncation(&bb(1.5, 10.0, 30.0, 90.0), &HD), Truncation::None);
        assert_eq!(
            adj.truncation(&bb(100.0, 10.0, 130.0, 1079.0), &HD),
            Truncation::Vertical
        );
    }

    #[test]
    fn horizontally_truncated_area_ignores_visible_width() {
        let a = adjusted_area(&bb(0.0, 200.0, 5.0, 380.0), &HD, 0.34).unwrap();
        let b = adjusted_area(&bb(0.0, 200.0, 55.0, 380.0), &HD, 0.34).unwrap();
        let c = adjusted_area(&bb(1880.0, 200.0, 1920.0, 380.0), &HD, 0.34).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    fn corpus_of(boxes: Vec<BoundingBox>) -> Corpus {
        let n = boxes.len();
        let ego = EgoState {
            speed_kmh: 0.0,
            accel_ms2: 0.0,
            yaw_deg: 0.0,
            yaw_rate_dps: 0.0,
            lat: 0.0,
            lon: 0.0,
        };
        let sample = TrajectorySample {
            ped_id: "p".into(),
            video_id: "v".into(),
            start_frame: 0,
            obs_boxes: boxes,
            fut_boxes: vec![],
            obs_states: vec![PedestrianState::Standing; n],
            fut_states: vec![],
            obs_ego: vec![ego; n],
            fut_ego: vec![],
            geometry: HD,
            truth: None,
        };
        Corpus::new(vec![sample], Split::Train, DEFAULT_FPS).unwrap()
    }

    #[test]
    fn measured_ratio_examples() {
        let same = corpus_of(vec![bb(100.0, 100.0, 134.0, 200.0); 5]);
        assert!((measure_visible_aspect_ratio(&same).unwrap() - 0.34).abs() < 1e-15);
        let two = corpus_of(vec![
            bb(100.0, 100.0, 130.0, 200.0),
            bb(300.0, 100.0, 340.0, 200.0),
        ]);
        assert!((measure_visible_aspect_ratio(&two).unwrap() - 0.35).abs() < 1e-15);
    }

    #[test]
    fn measured_ratio_skips_truncated_boxes() {
        let mixed = corpus_of(vec![
            bb(0.0, 100.0, 80.0, 200.0),
            bb(300.0, 100.0, 340.0, 200.0),
        ]);
        assert!((measure_visible_aspect_ratio(&mixed).unwrap() - 0.4).abs() < 1e-15);
        let none = corpus_of(vec![bb(0.0, 100.0, 80.0, 200.0)]);
        assert!(matches!(
            measure_visible_aspect_ratio(&none),
            Err(Error::NoVisibleBoxes)
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn visible_box() -> impl Strategy<Value = BoundingBox> {
            (10.0..1500.0f64, 10.0..700.0f64, 1.0..300.0f64, 1.0..300.0f64)
                .prop_map(|(x, y, w, h)| BoundingBox::new(x, y, x + w, y + h).unwrap())
        }

        proptest! {
            #[test]
            fn visible_area_is_plain_and_translation_invariant(
                b in visible_box(), dx in -5.0..5.0f64, dy in -5.0..5.0f64,
            ) {
                let a = adjusted_area(&b, &HD, 0.34).unwrap();
                prop_assert_eq!(a, b.width() * b.height());
                let moved = adjusted_area(&b.translate(dx, dy), &HD, 0.34).unwrap();
                prop_assert!((a - moved).abs() <= 1e-9 * a.max(1.0));
            }

            #[test]
            fn adjusted_area_non_negative(
                x1 in 0.0..1920.0f64, y1 in 0.0..1080.0f64, w in 0.0..400.0f64, h in 0.0..400.0f64,
            ) {
                prop_assume!(w > 0.0 || h > 0.0);
                let b = BoundingBox::new(x1, y1, (x1 + w).min(1920.0), (y1 + h).min(1080.0)).unwrap();
                prop_assume!(b.width() > 0.0 || b.height() > 0.0);
                prop_assert!(adjusted_area(&b, &HD, 0.34).unwrap() >= 0.0);
            }
        }
    }
}
