use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{BoundingBox, ImageGeometry};

pub const PEDESTRIAN_HEIGHT_M: f64 = 1.7;
pub const PEDESTRIAN_WIDTH_M: f64 = 0.5;
pub const MIN_DEPTH_M: f64 = 0.5;

/// Forward-looking pinhole camera mounted on the ego vehicle. The principal
/// point sits at the image center; the optical axis is level with the road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub focal_px: f64,
    pub image: ImageGeometry,
    pub mount_height_m: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Camera {
            focal_px: 1000.0,
            image: ImageGeometry::default(),
            mount_height_m: 1.4,
        }
    }
}

/// Position in the camera frame: `lateral` to the right, `depth` forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPoint {
    pub lateral: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Box of the whole billboard, possibly extending past the image.
    pub full: BoundingBox,
    /// `full` clipped to the image; `None` when nothing is inside.
    pub visible: Option<BoundingBox>,
}

impl Camera {
    /// Projects an upright billboard of the given width standing on the
    /// ground plane at `p`.
    pub fn project(&self, p: CameraPoint, width_m: f64) -> Result<Projection> {
        if !(p.depth > MIN_DEPTH_M) {
            return Err(Error::Projection(format!(
                "pedestrian at depth {:.3} m is not in front of the camera",
                p.depth
            )));
        }
        let cx = self.image.width() / 2.0;
        let cy = self.image.height() / 2.0;
        let f = self.focal_px;
        let u = cx + f * p.lateral / p.depth;
        let half_w = f * width_m / (2.0 * p.depth);
        let top = cy - f * (PEDESTRIAN_HEIGHT_M - self.mount_height_m) / p.depth;
        let bottom = cy + f * self.mount_height_m / p.depth;
        let full = BoundingBox::from_corners(u - half_w, top, u + half_w, bottom);
        let clipped = BoundingBox {
            x1: full.x1.clamp(0.0, self.image.width()),
            y1: full.y1.clamp(0.0, self.image.height()),
            x2: full.x2.clamp(0.0, self.image.width()),
            y2: full.y2.clamp(0.0, self.image.height()),
        };
        let visible = (clipped.width() > 0.0 && clipped.height() > 0.0).then_some(clipped);
        Ok(Projection { full, visible })
    }
}

/// Clipped image box of a standard-size pedestrian. Fails when the
/// pedestrian is behind the camera or entirely outside the frame.
pub fn project_to_image(p: CameraPoint, camera: &Camera) -> Result<BoundingBox> {
    camera
        .project(p, PEDESTRIAN_WIDTH_M)?
        .visible
        .ok_or_else(|| Error::Projection("pedestrian outside the field of view".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{Adjustment, Truncation};

    #[test]
    fn on_axis_height_follows_pinhole_formula() {
        let cam = Camera::default();
        for d in [5.0, 10.0, 23.7] {
            let b = project_to_image(CameraPoint { lateral: 0.0, depth: d }, &cam).unwrap();
            assert!((b.height() - cam.focal_px * 1.7 / d).abs() < 1e-9);
            assert!((b.width() - cam.focal_px * 0.5 / d).abs() < 1e-9);
        }
    }

    #[test]
    fn doubling_depth_halves_height() {
        let cam = Camera::default();
        let near = project_to_image(CameraPoint { lateral: 1.0, depth: 8.0 }, &cam).unwrap();
        let far = project_to_image(CameraPoint { lateral: 1.0, depth: 16.0 }, &cam).unwrap();
        assert!((near.height() - 2.0 * far.height()).abs() < 1e-9);
    }

    #[test]
    fn lateral_edge_is_clamped_and_flagged() {
        let cam = Camera::default();
        // u = 960 - 1000 * 9.7 / 10 = -10, so x1 falls left of the image.
        let p = CameraPoint { lateral: -9.7, depth: 10.0 };
        let proj = cam.project(p, PEDESTRIAN_WIDTH_M).unwrap();
        assert!(proj.full.x1 < 0.0);
        let b = proj.visible.unwrap();
        assert_eq!(b.x1, 0.0);
        assert_eq!(
            Adjustment::default().truncation(&b, &cam.image),
            Truncation::Horizontal
        );
    }

    #[test]
    fn behind_camera_is_an_error() {
        let cam = Camera::default();
        for d in [0.5, 0.0, -3.0] {
            assert!(matches!(
                project_to_image(CameraPoint { lateral: 0.0, depth: d }, &cam),
                Err(Error::Projection(_))
            ));
        }
    }
}
