//! Newline-delimited JSON parser for street-view building detections.
//!
//! One object per line:
//!
//! ```json
//! {"image_id":"img-001","lon":-75.49,"lat":10.40,"heading_deg":92.5,
//!  "side":"right","bbox":[14.0,8.0,420.0,310.0],
//!  "mask":[[14.0,8.0],[420.0,8.0],[420.0,310.0]],
//!  "attributes":{"construction_type":{"class":"confined","confidence":0.93},
//!                "material":{"class":"plaster","confidence":0.81},
//!                "use":{"class":"residential","confidence":0.97},
//!                "condition":{"class":"fair","confidence":0.66}}}
//! ```
//!
//! `mask` is optional; every other key is required.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::ParseError;
use crate::geom::{GeoPoint, PixelRect};
use crate::taxonomy::{AttributeKind, Condition, ConstructionType, Material, UseType};

/// Which side of the travel direction the camera faced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// A predicted class with the model's confidence in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScore<C> {
    pub class: C,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionAttributes {
    pub construction_type: ClassScore<ConstructionType>,
    pub material: ClassScore<Material>,
    #[serde(rename = "use")]
    pub use_type: ClassScore<UseType>,
    pub condition: ClassScore<Condition>,
}

impl DetectionAttributes {
    /// Class index of the prediction on the given attribute axis.
    pub fn class_index(&self, kind: AttributeKind) -> usize {
        match kind {
            AttributeKind::ConstructionType => self.construction_type.class.index(),
            AttributeKind::Material => self.material.class.index(),
            AttributeKind::Use => self.use_type.class.index(),
            AttributeKind::Condition => self.condition.class.index(),
        }
    }

    pub fn confidence(&self, kind: AttributeKind) -> f64 {
        match kind {
            AttributeKind::ConstructionType => self.construction_type.confidence,
            AttributeKind::Material => self.material.confidence,
            AttributeKind::Use => self.use_type.confidence,
            AttributeKind::Condition => self.condition.confidence,
        }
    }
}

/// One detected building instance in one image.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub image_id: String,
    pub capture_point: GeoPoint,
    /// Degrees clockwise from north, in [0, 360).
    pub camera_heading: f64,
    pub side: Side,
    pub bbox: PixelRect,
    pub mask: Option<Vec<[f64; 2]>>,
    pub attributes: DetectionAttributes,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct DetectionWire {
    image_id: String,
    lon: f64,
    lat: f64,
    heading_deg: f64,
    side: Side,
    bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask: Option<Vec<[f64; 2]>>,
    attributes: DetectionAttributes,
}

impl From<&DetectionRecord> for DetectionWire {
    fn from(r: &DetectionRecord) -> Self {
        DetectionWire {
            image_id: r.image_id.clone(),
            lon: r.capture_point.lon,
            lat: r.capture_point.lat,
            heading_deg: r.camera_heading,
            side: r.side,
            bbox: r.bbox.corners(),
            mask: r.mask.clone(),
            attributes: r.attributes,
        }
    }
}

fn field_err(path: &Path, line: usize, field: &str, message: impl Into<String>) -> ParseError {
    ParseError::Field {
        path: path.to_path_buf(),
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn validate(wire: DetectionWire, path: &Path, line: usize) -> Result<DetectionRecord, ParseError> {
    if !wire.lon.is_finite() || !wire.lat.is_finite() {
        return Err(field_err(path, line, "capture_point", "lon/lat must be finite"));
    }
    if !wire.heading_deg.is_finite() || !(0.0..360.0).contains(&wire.heading_deg) {
        return Err(field_err(
            path,
            line,
            "camera_heading",
            format!("{} is outside [0, 360)", wire.heading_deg),
        ));
    }
    let bbox = PixelRect::from_corners(wire.bbox);
    if !bbox.is_valid() {
        return Err(field_err(path, line, "bbox", "requires x_min < x_max and y_min < y_max"));
    }
    if let Some(mask) = &wire.mask {
        if mask.len() < 3 {
            return Err(field_err(path, line, "mask", "polygon needs at least 3 points"));
        }
        if mask.iter().flatten().any(|v| !v.is_finite()) {
            return Err(field_err(path, line, "mask", "coordinates must be finite"));
        }
    }
    for kind in AttributeKind::ALL {
        let c = wire.attributes.confidence(kind);
        if !c.is_finite() || !(0.0..=1.0).contains(&c) {
            return Err(field_err(
                path,
                line,
                &format!("attributes.{kind}.confidence"),
                format!("{c} is outside [0, 1]"),
            ));
        }
    }
    Ok(DetectionRecord {
        image_id: wire.image_id,
        capture_point: GeoPoint { lon: wire.lon, lat: wire.lat },
        camera_heading: wire.heading_deg,
        side: wire.side,
        bbox,
        mask: wire.mask,
        attributes: wire.attributes,
    })
}

/// Parse a detections JSONL file, preserving input order. Fails on the
/// first malformed line, reporting its line number.
pub fn parse_detections(path: &Path) -> Result<Vec<DetectionRecord>, ParseError> {
    let file = File::open(path).map_err(|source| ParseError::Io { path: path.to_path_buf(), source })?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| ParseError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            return Err(ParseError::Line {
                path: path.to_path_buf(),
                line: line_no,
                message: "empty line".into(),
            });
        }
        let wire: DetectionWire = serde_json::from_str(&line).map_err(|e| ParseError::Line {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        records.push(validate(wire, path, line_no)?);
    }
    Ok(records)
}

/// Serialize records back to the JSONL schema accepted by
/// [`parse_detections`].
pub fn write_detections_jsonl<W: Write>(mut w: W, records: &[DetectionRecord]) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut w, &DetectionWire::from(record))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
