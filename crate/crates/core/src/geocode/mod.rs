//! Detection-to-footprint geocoding.
//!
//! Each detection casts a single ray perpendicular to the camera's
//! travel direction; the footprint whose boundary the ray first crosses
//! within range wins. Detections landing on the same footprint are
//! fused into one consensus attribute record by confidence-weighted
//! voting.

mod index;

pub use index::{BoundingBox, SpatialIndex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::geom::{
    bearing_to_direction, normalize_bearing, project_local, ray_segment_t, GeoPoint, PlanarPoint,
};
use crate::ingest::{DetectionRecord, FootprintFeature, Side};
use crate::taxonomy::{Condition, ConstructionType, Material, UseType};

pub const DEFAULT_MAX_RANGE_M: f64 = 50.0;

#[derive(Debug, thiserror::Error)]
pub enum GeocodeError {
    #[error("cannot fuse an empty detection group")]
    EmptyDetectionGroup,
}

/// Viewing ray in the local planar frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewRay {
    pub origin: PlanarPoint,
    /// Degrees clockwise from north, in [0, 360).
    pub bearing_deg: f64,
    pub max_range_m: f64,
}

/// Footprint projected into the shared planar frame.
#[derive(Debug, Clone)]
pub struct PlanarFootprint {
    pub footprint_id: String,
    pub block_id: String,
    /// Closed ring, first point repeated last.
    pub ring: Vec<PlanarPoint>,
}

/// Origin for the shared projection plane: center of the bounding box
/// of all footprint vertices.
pub fn scene_origin(footprints: &[FootprintFeature]) -> Option<GeoPoint> {
    let mut points = footprints.iter().flat_map(|f| f.polygon.iter());
    let first = points.next()?;
    let (mut lon_min, mut lon_max, mut lat_min, mut lat_max) =
        (first.lon, first.lon, first.lat, first.lat);
    for p in points {
        lon_min = lon_min.min(p.lon);
        lon_max = lon_max.max(p.lon);
        lat_min = lat_min.min(p.lat);
        lat_max = lat_max.max(p.lat);
    }
    Some(GeoPoint { lon: (lon_min + lon_max) / 2.0, lat: (lat_min + lat_max) / 2.0 })
}

pub fn project_footprints(footprints: &[FootprintFeature], origin: GeoPoint) -> Vec<PlanarFootprint> {
    footprints
        .iter()
        .map(|f| PlanarFootprint {
            footprint_id: f.footprint_id.clone(),
            block_id: f.block_id.clone(),
            ring: f.polygon.iter().map(|&p| project_local(p, origin)).collect(),
        })
        .collect()
}

/// Build the viewing ray for a detection: bearing is the camera heading
/// rotated 90 degrees toward the recorded side.
pub fn cast_ray(detection: &DetectionRecord, origin: GeoPoint, max_range_m: f64) -> ViewRay {
    let offset = match detection.side {
        Side::Right => 90.0,
        Side::Left => -90.0,
    };
    ViewRay {
        origin: project_local(detection.capture_point, origin),
        bearing_deg: normalize_bearing(detection.camera_heading + offset),
        max_range_m,
    }
}

/// First crossing of the ray with a footprint boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub footprint_idx: usize,
    pub distance_m: f64,
}

fn ray_ring_distance(ray: &ViewRay, dir: (f64, f64), ring: &[PlanarPoint]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for w in ring.windows(2) {
        if let Some(t) = ray_segment_t(ray.origin, dir, w[0], w[1]) {
            if t <= ray.max_range_m && best.map_or(true, |b| t < b) {
                best = Some(t);
            }
        }
    }
    best
}

/// The footprint whose boundary the ray first crosses within
/// `max_range_m`, if any. Equal distances resolve to the lower
/// footprint index.
pub fn match_footprint(
    ray: &ViewRay,
    spatial: &SpatialIndex,
    footprints: &[PlanarFootprint],
) -> Option<RayHit> {
    let dir = bearing_to_direction(ray.bearing_deg);
    let end = PlanarPoint {
        x: ray.origin.x + dir.0 * ray.max_range_m,
        y: ray.origin.y + dir.1 * ray.max_range_m,
    };
    let query = BoundingBox {
        min_x: ray.origin.x.min(end.x),
        min_y: ray.origin.y.min(end.y),
        max_x: ray.origin.x.max(end.x),
        max_y: ray.origin.y.max(end.y),
    };
    let mut best: Option<RayHit> = None;
    for idx in spatial.query(&query) {
        if let Some(t) = ray_ring_distance(ray, dir, &footprints[idx].ring) {
            if best.map_or(true, |b| t < b.distance_m) {
                best = Some(RayHit { footprint_idx: idx, distance_m: t });
            }
        }
    }
    best
}

/// Build the index over projected footprints. Degenerate empty rings
/// never occur (ingest guarantees >= 4 vertices).
pub fn build_index(footprints: &[PlanarFootprint]) -> SpatialIndex {
    let boxes: Vec<BoundingBox> = footprints
        .iter()
        .map(|f| BoundingBox::of_points(&f.ring).expect("footprint ring is non-empty"))
        .collect();
    SpatialIndex::build(&boxes)
}

/// Consensus class and its summed-confidence support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeight<C> {
    pub class: C,
    pub weight: f64,
}

/// Fused per-footprint building attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingAttributeRecord {
    pub footprint_id: String,
    pub block_id: String,
    pub n_detections: usize,
    pub construction_type: ClassWeight<ConstructionType>,
    pub material: ClassWeight<Material>,
    pub use_type: ClassWeight<UseType>,
    pub condition: ClassWeight<Condition>,
}

impl BuildingAttributeRecord {
    pub fn class_index(&self, kind: crate::taxonomy::AttributeKind) -> usize {
        use crate::taxonomy::AttributeKind;
        match kind {
            AttributeKind::ConstructionType => self.construction_type.class.index(),
            AttributeKind::Material => self.material.class.index(),
            AttributeKind::Use => self.use_type.class.index(),
            AttributeKind::Condition => self.condition.class.index(),
        }
    }
}

fn vote<C: Copy + PartialEq>(
    all: &[C],
    votes: impl Iterator<Item = (C, f64)>,
) -> ClassWeight<C> {
    let mut sums = vec![0.0f64; all.len()];
    for (class, confidence) in votes {
        let i = all.iter().position(|&c| c == class).expect("class is a taxonomy member");
        sums[i] += confidence;
    }
    // strict > keeps the earliest declared class on ties
    let mut best = 0;
    for i in 1..sums.len() {
        if sums[i] > sums[best] {
            best = i;
        }
    }
    ClassWeight { class: all[best], weight: sums[best] }
}

/// Fuse all detections assigned to one footprint: per attribute, the
/// class with the largest summed confidence wins; ties go to the class
/// declared first in the taxonomy.
pub fn consensus_attributes(
    footprint_id: &str,
    block_id: &str,
    detections: &[&DetectionRecord],
) -> Result<BuildingAttributeRecord, GeocodeError> {
    if detections.is_empty() {
        return Err(GeocodeError::EmptyDetectionGroup);
    }
    let a = |d: &&DetectionRecord| d.attributes;
    Ok(BuildingAttributeRecord {
        footprint_id: footprint_id.to_string(),
        block_id: block_id.to_string(),
        n_detections: detections.len(),
        construction_type: vote(
            ConstructionType::ALL,
            detections.iter().map(|d| (a(d).construction_type.class, a(d).construction_type.confidence)),
        ),
        material: vote(
            Material::ALL,
            detections.iter().map(|d| (a(d).material.class, a(d).material.confidence)),
        ),
        use_type: vote(
            UseType::ALL,
            detections.iter().map(|d| (a(d).use_type.class, a(d).use_type.confidence)),
        ),
        condition: vote(
            Condition::ALL,
            detections.iter().map(|d| (a(d).condition.class, a(d).condition.confidence)),
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    NoFootprintWithinRange,
}

/// A detection that could not be assigned to any footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedDetection {
    pub reason: RejectReason,
    pub detection: DetectionRecord,
}

#[derive(Debug)]
pub struct GeocodeOutcome {
    /// One fused record per matched footprint, in footprint input order.
    pub buildings: Vec<BuildingAttributeRecord>,
    /// Unmatched detections, in detection input order.
    pub rejects: Vec<RejectedDetection>,
    pub n_matched: usize,
}

/// Match every detection and fuse per-footprint consensus records.
/// Matching runs in parallel; outputs are ordered by input order and
/// independent of thread count.
pub fn geocode(
    detections: &[DetectionRecord],
    footprints: &[FootprintFeature],
    max_range_m: f64,
) -> GeocodeOutcome {
    let origin = scene_origin(footprints);
    let (planar, spatial) = match origin {
        Some(origin) => {
            let planar = project_footprints(footprints, origin);
            let spatial = build_index(&planar);
            (planar, Some(spatial))
        }
        None => (Vec::new(), None),
    };

    let hits: Vec<Option<RayHit>> = detections
        .par_iter()
        .map(|d| {
            let (origin, spatial) = (origin?, spatial.as_ref()?);
            let ray = cast_ray(d, origin, max_range_m);
            match_footprint(&ray, spatial, &planar)
        })
        .collect();

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut rejects = Vec::new();
    for (det_idx, hit) in hits.iter().enumerate() {
        match hit {
            Some(hit) => groups.entry(hit.footprint_idx).or_default().push(det_idx),
            None => rejects.push(RejectedDetection {
                reason: RejectReason::NoFootprintWithinRange,
                detection: detections[det_idx].clone(),
            }),
        }
    }

    let n_matched = detections.len() - rejects.len();
    let buildings = groups
        .iter()
        .map(|(&fp_idx, det_indices)| {
            let group: Vec<&DetectionRecord> = det_indices.iter().map(|&i| &detections[i]).collect();
            let fp = &footprints[fp_idx];
            consensus_attributes(&fp.footprint_id, &fp.block_id, &group)
                .expect("groups are non-empty by construction")
        })
        .collect();

    GeocodeOutcome { buildings, rejects, n_matched }
}
