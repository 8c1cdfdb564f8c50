//! Planar geometry primitives shared by ingest validation, geocoding,
//! and evaluation.

use serde::{Deserialize, Serialize};

/// Mean Earth radius used by the local projection.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Geographic coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

/// Point in a local planar frame, meters east (x) and north (y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

/// Equirectangular projection about `origin`: x = R * dlon * cos(lat0),
/// y = R * dlat. Good to <0.1% for spans under ~5 km.
pub fn project_local(point: GeoPoint, origin: GeoPoint) -> PlanarPoint {
    let lat0 = origin.lat.to_radians();
    let dlon = (point.lon - origin.lon).to_radians();
    let dlat = (point.lat - origin.lat).to_radians();
    PlanarPoint {
        x: EARTH_RADIUS_M * dlon * lat0.cos(),
        y: EARTH_RADIUS_M * dlat,
    }
}

/// Normalize a bearing into [0, 360).
pub fn normalize_bearing(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    // rem_euclid(-1e-18, 360) rounds to 360.0 itself
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Unit direction (east, north) of a bearing in degrees clockwise from north.
pub fn bearing_to_direction(bearing_deg: f64) -> (f64, f64) {
    let r = bearing_deg.to_radians();
    (r.sin(), r.cos())
}

fn cross(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ax * by - ay * bx
}

/// Ray parameter t > 0 where the ray `origin + t * dir` crosses segment
/// p->q, counting the segment half-open at q so a shared vertex between
/// consecutive edges is hit exactly once. Parallel segments never hit.
pub fn ray_segment_t(origin: PlanarPoint, dir: (f64, f64), p: PlanarPoint, q: PlanarPoint) -> Option<f64> {
    let vx = q.x - p.x;
    let vy = q.y - p.y;
    let wx = p.x - origin.x;
    let wy = p.y - origin.y;
    let denom = cross(dir.0, dir.1, vx, vy);
    if denom == 0.0 {
        return None;
    }
    let t = cross(wx, wy, vx, vy) / denom;
    let s = cross(wx, wy, dir.0, dir.1) / denom;
    (t > 0.0 && (0.0..1.0).contains(&s)).then_some(t)
}

/// Shoelace signed area of a closed ring (first point repeated last).
pub fn ring_signed_area(ring: &[(f64, f64)]) -> f64 {
    let mut acc = 0.0;
    for w in ring.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        acc += x0 * y1 - x1 * y0;
    }
    acc / 2.0
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    cross(b.0 - a.0, b.1 - a.1, c.0 - a.0, c.1 - a.1)
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

/// Whether segments a0-a1 and b0-b1 share any point, touching included.
pub fn segments_intersect(a0: (f64, f64), a1: (f64, f64), b0: (f64, f64), b1: (f64, f64)) -> bool {
    let d1 = orient(a0, a1, b0);
    let d2 = orient(a0, a1, b1);
    let d3 = orient(b0, b1, a0);
    let d4 = orient(b0, b1, a1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a0, a1, b0))
        || (d2 == 0.0 && on_segment(a0, a1, b1))
        || (d3 == 0.0 && on_segment(b0, b1, a0))
        || (d4 == 0.0 && on_segment(b0, b1, a1))
}

/// Validate a closed ring is simple: no zero-length edges, no spikes,
/// and no contact between non-adjacent edges. `ring` includes the
/// repeated closing point.
pub fn ring_is_simple(ring: &[(f64, f64)]) -> Result<(), String> {
    let m = ring.len() - 1; // edge count
    for i in 0..m {
        if ring[i] == ring[i + 1] {
            return Err(format!("repeated consecutive vertex at position {i}"));
        }
    }
    // spike: edge i+1 folds back onto edge i
    for i in 0..m {
        let a = ring[i];
        let b = ring[(i + 1) % m];
        let c = ring[(i + 2) % m];
        if orient(a, b, c) == 0.0 {
            let dot = (a.0 - b.0) * (c.0 - b.0) + (a.1 - b.1) * (c.1 - b.1);
            if dot > 0.0 {
                return Err(format!("ring folds back on itself at vertex {}", (i + 1) % m));
            }
        }
    }
    for i in 0..m {
        for j in (i + 2)..m {
            if i == 0 && j == m - 1 {
                continue; // adjacent through closure
            }
            if segments_intersect(ring[i], ring[i + 1], ring[j], ring[j + 1]) {
                return Err(format!("self-intersecting ring (edges {i} and {j})"));
            }
        }
    }
    Ok(())
}

/// Axis-aligned pixel rectangle, `x_min < x_max` and `y_min < y_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelRect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl PixelRect {
    pub fn from_corners(corners: [f64; 4]) -> Self {
        PixelRect { x_min: corners[0], y_min: corners[1], x_max: corners[2], y_max: corners[3] }
    }

    pub fn corners(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn is_valid(&self) -> bool {
        self.corners().iter().all(|v| v.is_finite()) && self.x_min < self.x_max && self.y_min < self.y_max
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn intersection_area(&self, other: &PixelRect) -> f64 {
        let w = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let h = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        w * h
    }
}

impl Serialize for PixelRect {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.corners().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PixelRect {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(PixelRect::from_corners(<[f64; 4]>::deserialize(deserializer)?))
    }
}
