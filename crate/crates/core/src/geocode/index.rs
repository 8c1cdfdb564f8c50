//! Bulk-loaded rectangle tree over footprint bounding boxes.
//!
//! Backed by an R*-tree; queries return candidate footprint indices in
//! ascending order so downstream iteration is deterministic.

use rstar::{RTree, RTreeObject, AABB};

use crate::geom::PlanarPoint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub fn of_points(points: &[PlanarPoint]) -> Option<BoundingBox> {
        let first = points.first()?;
        let mut bb = BoundingBox { min_x: first.x, min_y: first.y, max_x: first.x, max_y: first.y };
        for p in &points[1..] {
            bb.min_x = bb.min_x.min(p.x);
            bb.min_y = bb.min_y.min(p.y);
            bb.max_x = bb.max_x.max(p.x);
            bb.max_y = bb.max_y.max(p.y);
        }
        Some(bb)
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }
}

#[derive(Debug, Clone)]
struct IndexedBox {
    bbox: BoundingBox,
    idx: usize,
}

impl RTreeObject for IndexedBox {
    type Envelope = AABB<[f64; 2]>;

    fn envelope(&self) -> Self::Envelope {
        AABB::from_corners([self.bbox.min_x, self.bbox.min_y], [self.bbox.max_x, self.bbox.max_y])
    }
}

pub struct SpatialIndex {
    tree: RTree<IndexedBox>,
}

impl SpatialIndex {
    pub fn build(bboxes: &[BoundingBox]) -> SpatialIndex {
        let items = bboxes
            .iter()
            .enumerate()
            .map(|(idx, &bbox)| IndexedBox { bbox, idx })
            .collect();
        SpatialIndex { tree: RTree::bulk_load(items) }
    }

    /// Indices of entries whose bounding box intersects `query`,
    /// ascending.
    pub fn query(&self, query: &BoundingBox) -> Vec<usize> {
        let envelope =
            AABB::from_corners([query.min_x, query.min_y], [query.max_x, query.max_y]);
        let mut hits: Vec<usize> =
            self.tree.locate_in_envelope_intersecting(&envelope).map(|e| e.idx).collect();
        hits.sort_unstable();
        hits
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_box(rng: &mut StdRng) -> BoundingBox {
        let x = rng.gen_range(-500.0..500.0);
        let y = rng.gen_range(-500.0..500.0);
        BoundingBox {
            min_x: x,
            min_y: y,
            max_x: x + rng.gen_range(0.1..50.0),
            max_y: y + rng.gen_range(0.1..50.0),
        }
    }

    #[test]
    fn query_matches_linear_scan() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(0..=500);
            let boxes: Vec<BoundingBox> = (0..n).map(|_| random_box(&mut rng)).collect();
            let index = SpatialIndex::build(&boxes);
            for _ in 0..20 {
                let q = random_box(&mut rng);
                let expected: Vec<usize> = boxes
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| b.intersects(&q))
                    .map(|(i, _)| i)
                    .collect();
                assert_eq!(index.query(&q), expected);
            }
        }
    }
}
