//! GeoJSON parser for building footprints.
//!
//! Accepts a FeatureCollection of Polygon features carrying
//! `footprint_id` and `block_id` properties. Rings must be closed,
//! simple, and of nonzero area; interior rings are rejected.

use serde::Deserialize;
use serde_json::json;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::ParseError;
use crate::geom::{ring_is_simple, ring_signed_area, GeoPoint};

/// A building footprint polygon tagged with its census block.
#[derive(Debug, Clone, PartialEq)]
pub struct FootprintFeature {
    pub footprint_id: String,
    pub block_id: String,
    /// Closed exterior ring, first vertex repeated last.
    pub polygon: Vec<GeoPoint>,
}

#[derive(Deserialize)]
struct CollectionWire {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<serde_json::Value>,
}

#[derive(Deserialize)]
struct FeatureWire {
    geometry: GeometryWire,
    properties: PropertiesWire,
}

#[derive(Deserialize)]
struct GeometryWire {
    #[serde(rename = "type")]
    kind: String,
    coordinates: serde_json::Value,
}

#[derive(Deserialize)]
struct PropertiesWire {
    footprint_id: String,
    block_id: String,
}

fn feature_err(path: &Path, index: usize, message: impl Into<String>) -> ParseError {
    ParseError::Feature { path: path.to_path_buf(), index, message: message.into() }
}

fn parse_feature(value: serde_json::Value, path: &Path, index: usize) -> Result<FootprintFeature, ParseError> {
    let feature: FeatureWire =
        serde_json::from_value(value).map_err(|e| feature_err(path, index, e.to_string()))?;
    if feature.geometry.kind != "Polygon" {
        return Err(feature_err(
            path,
            index,
            format!("expected Polygon geometry, found {}", feature.geometry.kind),
        ));
    }
    let rings: Vec<Vec<[f64; 2]>> = serde_json::from_value(feature.geometry.coordinates)
        .map_err(|e| feature_err(path, index, format!("bad Polygon coordinates: {e}")))?;
    if rings.is_empty() {
        return Err(feature_err(path, index, "Polygon has no rings"));
    }
    if rings.len() > 1 {
        return Err(feature_err(path, index, "interior rings are not supported"));
    }
    let ring = &rings[0];
    if ring.iter().flatten().any(|v| !v.is_finite()) {
        return Err(feature_err(path, index, "coordinates must be finite"));
    }
    if ring.first() != ring.last() {
        return Err(feature_err(path, index, "ring not closed"));
    }
    if ring.len() < 4 {
        return Err(feature_err(path, index, "ring must have at least 4 positions"));
    }
    let pairs: Vec<(f64, f64)> = ring.iter().map(|p| (p[0], p[1])).collect();
    ring_is_simple(&pairs).map_err(|m| feature_err(path, index, m))?;
    if ring_signed_area(&pairs) == 0.0 {
        return Err(feature_err(path, index, "ring has zero area"));
    }
    Ok(FootprintFeature {
        footprint_id: feature.properties.footprint_id,
        block_id: feature.properties.block_id,
        polygon: ring.iter().map(|p| GeoPoint { lon: p[0], lat: p[1] }).collect(),
    })
}

/// Parse a footprints GeoJSON file, preserving feature order.
pub fn parse_footprints(path: &Path) -> Result<Vec<FootprintFeature>, ParseError> {
    let text = fs::read_to_string(path)
        .map_err(|source| ParseError::Io { path: path.to_path_buf(), source })?;
    let collection: CollectionWire = serde_json::from_str(&text)
        .map_err(|e| ParseError::Format { path: path.to_path_buf(), message: e.to_string() })?;
    if collection.kind != "FeatureCollection" {
        return Err(ParseError::Format {
            path: path.to_path_buf(),
            message: format!("expected FeatureCollection, found {}", collection.kind),
        });
    }
    collection
        .features
        .into_iter()
        .enumerate()
        .map(|(i, value)| parse_feature(value, path, i))
        .collect()
}

/// Serialize footprints back to the GeoJSON schema accepted by
/// [`parse_footprints`].
pub fn write_footprints_geojson<W: Write>(mut w: W, features: &[FootprintFeature]) -> std::io::Result<()> {
    let features: Vec<serde_json::Value> = features
        .iter()
        .map(|f| {
            let ring: Vec<[f64; 2]> = f.polygon.iter().map(|p| [p.lon, p.lat]).collect();
            json!({
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {"footprint_id": f.footprint_id, "block_id": f.block_id},
            })
        })
        .collect();
    let doc = json!({"type": "FeatureCollection", "features": features});
    serde_json::to_writer_pretty(&mut w, &doc)?;
    w.write_all(b"\n")
}
