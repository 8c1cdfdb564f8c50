//! Seeded synthetic fixtures: census households in three welfare tiers
//! and a street grid of footprints with cameras aimed at them, with a
//! configurable tier-to-attribute signal strength.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use k3_core::geom::{GeoPoint, PixelRect};
use k3_core::ingest::{
    write_census_csv, write_detections_jsonl, write_footprints_geojson, CensusSchema, ClassScore,
    DetectionAttributes, DetectionRecord, FootprintFeature, HouseholdRecord, Polarity, Side,
    VariableKind,
};
use k3_core::pipeline::PipelineConfig;
use k3_core::taxonomy::{Condition, ConstructionType, Material, UseType};

pub const METERS_PER_DEGREE: f64 = 111_194.92664455873; // 6371000 * pi / 180

#[derive(Debug, Clone, Copy)]
pub struct SyntheticSpec {
    pub n_households: usize,
    pub n_buildings: usize,
    pub n_blocks: usize,
    /// Probability that a building's attributes follow its block's tier.
    pub strength: f64,
    pub missing_rate: f64,
    pub seed: u64,
}

pub struct SyntheticData {
    pub schema: CensusSchema,
    pub households: Vec<HouseholdRecord>,
    pub footprints: Vec<FootprintFeature>,
    pub detections: Vec<DetectionRecord>,
    /// tier (0 = poorest) per block index.
    #[allow(dead_code)] // not every test binary reads it
    pub block_tier: Vec<usize>,
}

pub fn block_id(index: usize) -> String {
    format!("b{index:03}")
}

/// Households in three separated welfare tiers over the default schema.
pub fn synthetic_households(spec: &SyntheticSpec, rng: &mut StdRng) -> Vec<HouseholdRecord> {
    let schema = CensusSchema::default_variables();
    let binary_yes = [0.15, 0.5, 0.85];
    let pct_mean: [f64; 3] = [20.0, 50.0, 80.0];
    let pct_noise = Normal::new(0.0, 12.0).unwrap();

    (0..spec.n_households)
        .map(|i| {
            let block = i % spec.n_blocks;
            let tier = block % 3;
            let values = schema
                .variables
                .iter()
                .enumerate()
                .map(|(v, var)| {
                    if v > 0 && rng.gen_bool(spec.missing_rate) {
                        return None;
                    }
                    Some(match var.kind {
                        VariableKind::Binary => {
                            let p = match var.polarity {
                                Polarity::HigherIsBetter => binary_yes[tier],
                                Polarity::HigherIsWorse => binary_yes[2 - tier],
                            };
                            if rng.gen_bool(p) {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        VariableKind::Percentage => {
                            (pct_mean[tier] + pct_noise.sample(rng)).clamp(0.0, 100.0)
                        }
                    })
                })
                .collect();
            HouseholdRecord {
                household_id: format!("h{i:06}"),
                block_id: block_id(block),
                values,
            }
        })
        .collect()
}

fn tiered_condition(tier: usize) -> Condition {
    [Condition::Poor, Condition::Fair, Condition::Good][tier]
}

fn tiered_material(tier: usize) -> Material {
    [Material::WoodCrudePlank, Material::Plaster, Material::BrickOrConcreteBlock][tier]
}

fn pick<T: Copy>(rng: &mut StdRng, all: &[T]) -> T {
    all[rng.gen_range(0..all.len())]
}

/// Street grid: one row of footprints per block 200 m apart, buildings
/// 40 m apart along the row, one camera per building on the street
/// 15 m south of the facade, looking left while driving east.
pub fn synthetic_scene(
    spec: &SyntheticSpec,
    rng: &mut StdRng,
) -> (Vec<FootprintFeature>, Vec<DetectionRecord>) {
    let deg = |meters: f64| meters / METERS_PER_DEGREE;
    let mut footprints = Vec::with_capacity(spec.n_buildings);
    let mut detections = Vec::with_capacity(spec.n_buildings);
    for i in 0..spec.n_buildings {
        let block = i % spec.n_blocks;
        let tier = block % 3;
        let col = i / spec.n_blocks;
        let x = deg(40.0 * col as f64);
        let street_y = deg(200.0 * block as f64);
        let center_y = street_y + deg(20.0);
        let (hx, hy) = (deg(5.0), deg(5.0));

        footprints.push(FootprintFeature {
            footprint_id: format!("f{i:05}"),
            block_id: block_id(block),
            polygon: vec![
                GeoPoint { lon: x - hx, lat: center_y - hy },
                GeoPoint { lon: x + hx, lat: center_y - hy },
                GeoPoint { lon: x + hx, lat: center_y + hy },
                GeoPoint { lon: x - hx, lat: center_y + hy },
                GeoPoint { lon: x - hx, lat: center_y - hy },
            ],
        });

        let planted = rng.gen_bool(spec.strength);
        let condition = if planted { tiered_condition(tier) } else { pick(rng, Condition::ALL) };
        let planted = rng.gen_bool(spec.strength);
        let construction = if planted {
            if tier == 0 {
                ConstructionType::Unconfined
            } else {
                ConstructionType::Confined
            }
        } else {
            pick(rng, ConstructionType::ALL)
        };
        let planted = rng.gen_bool(spec.strength);
        let material = if planted { tiered_material(tier) } else { pick(rng, Material::ALL) };
        let use_class = pick(rng, UseType::ALL);
        let attributes = DetectionAttributes {
            construction_type: ClassScore { class: construction, confidence: rng.gen_range(0.6..0.99) },
            material: ClassScore { class: material, confidence: rng.gen_range(0.6..0.99) },
            use_type: ClassScore { class: use_class, confidence: rng.gen_range(0.6..0.99) },
            condition: ClassScore { class: condition, confidence: rng.gen_range(0.6..0.99) },
        };
        detections.push(DetectionRecord {
            image_id: format!("img{i:05}"),
            capture_point: GeoPoint { lon: x, lat: street_y },
            camera_heading: 90.0,
            side: Side::Left,
            bbox: PixelRect::from_corners([10.0, 10.0, 110.0, 210.0]),
            mask: None,
            attributes,
        });
    }
    (footprints, detections)
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticData {
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let households = synthetic_households(spec, &mut rng);
    let (footprints, detections) = synthetic_scene(spec, &mut rng);
    SyntheticData {
        schema: CensusSchema::default_variables(),
        households,
        footprints,
        detections,
        block_tier: (0..spec.n_blocks).map(|b| b % 3).collect(),
    }
}

/// Write the synthetic dataset as pipeline input files and return a
/// ready config.
pub fn write_inputs(data: &SyntheticData, dir: &Path) -> PipelineConfig {
    let schema_path = dir.join("schema.yaml");
    std::fs::write(&schema_path, data.schema.to_yaml()).unwrap();
    let census_path = dir.join("census.csv");
    write_census_csv(BufWriter::new(File::create(&census_path).unwrap()), &data.schema, &data.households)
        .unwrap();
    let footprints_path = dir.join("footprints.geojson");
    write_footprints_geojson(BufWriter::new(File::create(&footprints_path).unwrap()), &data.footprints)
        .unwrap();
    let detections_path = dir.join("detections.jsonl");
    write_detections_jsonl(BufWriter::new(File::create(&detections_path).unwrap()), &data.detections)
        .unwrap();

    PipelineConfig {
        detections: detections_path,
        footprints: footprints_path,
        census: census_path,
        schema: Some(schema_path),
        annotations: None,
        out_dir: dir.join("out"),
        max_range_m: 50.0,
        seed: 0,
        iou_threshold: 0.75,
        mask_iou: false,
        anova_threshold: 3.0,
        histogram_bins: 20,
        histogram_lo: 1.0,
        histogram_hi: 3.0,
        allow_large: false,
    }
}
