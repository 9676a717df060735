//! Center-format bounding boxes and overlap geometry.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box field `{field}` is not finite ({value})")]
    NonFinite { field: &'static str, value: f64 },
    #[error("box size must be positive, got w={w}, h={h}")]
    NonPositiveSize { w: f64, h: f64 },
}

/// Axis-aligned box in center format: `(x, y)` is the center, `w`/`h` the
/// extents, all in pixels.
///
/// Construction rejects non-finite fields and non-positive sizes, so every
/// value of this type is usable in area and ratio computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundingBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        for (field, value) in [("x", x), ("y", y), ("w", w), ("h", h)] {
            if !value.is_finite() {
                return Err(GeometryError::NonFinite { field, value });
            }
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(GeometryError::NonPositiveSize { w, h });
        }
        Ok(Self { x, y, w, h })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn diagonal(&self) -> f64 {
        self.w.hypot(self.h)
    }

    /// Corner extents `(x_min, y_min, x_max, y_max)`.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        let hw = self.w / 2.0;
        let hh = self.h / 2.0;
        (self.x - hw, self.y - hh, self.x + hw, self.y + hh)
    }

    /// Same size, center shifted by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self, GeometryError> {
        Self::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    /// Center and size multiplied by `factor` about the origin.
    pub fn scaled(&self, factor: f64) -> Result<Self, GeometryError> {
        Self::new(
            self.x * factor,
            self.y * factor,
            self.w * factor,
            self.h * factor,
        )
    }

    pub fn to_measurement(&self) -> Measurement {
        Measurement([self.x, self.y, self.w, self.h])
    }
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            x: f64,
            y: f64,
            w: f64,
            h: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        BoundingBox::new(raw.x, raw.y, raw.w, raw.h).map_err(serde::de::Error::custom)
    }
}

/// A box viewed as a Kalman observation `z = (x, y, w, h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement([f64; 4]);

impl Measurement {
    pub fn as_array(&self) -> &[f64; 4] {
        &self.0
    }

    pub fn to_box(&self) -> BoundingBox {
        // Only constructible from a valid box, so the invariants carry over.
        let [x, y, w, h] = self.0;
        BoundingBox { x, y, w, h }
    }
}

impl From<BoundingBox> for Measurement {
    fn from(b: BoundingBox) -> Self {
        b.to_measurement()
    }
}

/// Intersection over union of two boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.corners();
    let (bx0, by0, bx1, by1) = b.corners();
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    // Areas from the same corner extents so that iou(a, a) == 1 exactly.
    let union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter;
    (inter / union).clamp(0.0, 1.0)
}
