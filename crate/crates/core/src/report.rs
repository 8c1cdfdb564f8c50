//! Serialization of every pipeline artifact. All writers are
//! deterministic: struct field order for JSON objects, sorted keys for
//! maps, LF line endings, shortest round-trip float formatting.

use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::correlate::{profile_columns, BlockProfile, CorrelationMatrix, Histogram, TrendSummary};
use crate::eval::EvalReport;
use crate::geocode::{BuildingAttributeRecord, ClassWeight, RejectReason, RejectedDetection};
use crate::ingest::{FootprintFeature, ParseError};
use crate::k3::{BlockK3, K3Diagnostics};
use crate::taxonomy::{Condition, ConstructionType, Material, UseType};

fn lf_csv<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

// ---- buildings.jsonl ----

#[derive(Serialize, Deserialize)]
struct BuildingWeightsWire {
    construction_type: f64,
    material: f64,
    #[serde(rename = "use")]
    use_type: f64,
    condition: f64,
}

#[derive(Serialize, Deserialize)]
struct BuildingWire {
    footprint_id: String,
    block_id: String,
    n_detections: usize,
    construction_type: ConstructionType,
    material: Material,
    #[serde(rename = "use")]
    use_type: UseType,
    condition: Condition,
    weights: BuildingWeightsWire,
}

impl From<&BuildingAttributeRecord> for BuildingWire {
    fn from(b: &BuildingAttributeRecord) -> Self {
        BuildingWire {
            footprint_id: b.footprint_id.clone(),
            block_id: b.block_id.clone(),
            n_detections: b.n_detections,
            construction_type: b.construction_type.class,
            material: b.material.class,
            use_type: b.use_type.class,
            condition: b.condition.class,
            weights: BuildingWeightsWire {
                construction_type: b.construction_type.weight,
                material: b.material.weight,
                use_type: b.use_type.weight,
                condition: b.condition.weight,
            },
        }
    }
}

pub fn write_buildings_jsonl<W: Write>(
    mut w: W,
    buildings: &[BuildingAttributeRecord],
) -> std::io::Result<()> {
    for b in buildings {
        serde_json::to_writer(&mut w, &BuildingWire::from(b))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_buildings_jsonl(path: &Path) -> Result<Vec<BuildingAttributeRecord>, ParseError> {
    let file = File::open(path).map_err(|source| ParseError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| ParseError::Io { path: path.to_path_buf(), source })?;
        let wire: BuildingWire = serde_json::from_str(&line).map_err(|e| ParseError::Line {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(BuildingAttributeRecord {
            footprint_id: wire.footprint_id,
            block_id: wire.block_id,
            n_detections: wire.n_detections,
            construction_type: ClassWeight {
                class: wire.construction_type,
                weight: wire.weights.construction_type,
            },
            material: ClassWeight { class: wire.material, weight: wire.weights.material },
            use_type: ClassWeight { class: wire.use_type, weight: wire.weights.use_type },
            condition: ClassWeight { class: wire.condition, weight: wire.weights.condition },
        });
    }
    Ok(out)
}

// ---- rejects.jsonl ----

#[derive(Serialize)]
struct RejectWire {
    reason: RejectReason,
    detection: crate::ingest::DetectionWire,
}

pub fn write_rejects_jsonl<W: Write>(mut w: W, rejects: &[RejectedDetection]) -> std::io::Result<()> {
    for r in rejects {
        let wire = RejectWire { reason: r.reason, detection: (&r.detection).into() };
        serde_json::to_writer(&mut w, &wire)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

// ---- blocks_k3.csv ----

pub fn write_blocks_csv<W: Write>(w: W, blocks: &[BlockK3]) -> csv::Result<()> {
    let mut writer = lf_csv(w);
    writer.write_record(["block_id", "k3", "n_households"])?;
    for b in blocks {
        writer.write_record([b.block_id.as_str(), &fmt_f64(b.k3), &b.n_households.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_blocks_csv(path: &Path) -> Result<Vec<BlockK3>, ParseError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => ParseError::Io { path: path.to_path_buf(), source },
        other => ParseError::Format { path: path.to_path_buf(), message: format!("{other:?}") },
    })?;
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row =
            row.map_err(|e| ParseError::Format { path: path.to_path_buf(), message: e.to_string() })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        let cell = |idx: usize, name: &str| {
            row.get(idx).map(str::to_string).ok_or_else(|| ParseError::Cell {
                path: path.to_path_buf(),
                line,
                column: name.to_string(),
                message: "missing cell".into(),
            })
        };
        let k3: f64 = cell(1, "k3")?.parse().map_err(|_| ParseError::Cell {
            path: path.to_path_buf(),
            line,
            column: "k3".into(),
            message: "not a number".into(),
        })?;
        let n: usize = cell(2, "n_households")?.parse().map_err(|_| ParseError::Cell {
            path: path.to_path_buf(),
            line,
            column: "n_households".into(),
            message: "not a count".into(),
        })?;
        out.push(BlockK3 { block_id: cell(0, "block_id")?, k3, n_households: n });
    }
    Ok(out)
}

// ---- k3_diagnostics.json ----

pub fn write_diagnostics_json<W: Write>(mut w: W, d: &K3Diagnostics) -> std::io::Result<()> {
    let variables: Vec<serde_json::Value> = d
        .variables
        .iter()
        .map(|v| match v.result {
            Some(r) => json!({
                "name": v.name,
                "testable": true,
                "f": if r.f.is_finite() { json!(r.f) } else { json!(null) },
                "infinite": r.f.is_infinite(),
                "df_between": r.df_between,
                "df_within": r.df_within,
            }),
            None => json!({
                "name": v.name,
                "testable": false,
                "f": null,
                "infinite": false,
                "df_between": null,
                "df_within": null,
            }),
        })
        .collect();
    let min_f_finite = d.min_f.filter(|f| f.is_finite());
    let doc = json!({
        "n_households": d.n_households,
        "medoids": d.medoids,
        "cluster_sizes": d.cluster_sizes,
        "objective": d.objective,
        "dropped_columns": d.dropped_columns,
        "anova_threshold": d.anova_threshold,
        "min_f": min_f_finite,
        "min_f_infinite": d.min_f.is_some_and(f64::is_infinite),
        "frac_above_threshold": d.frac_above_threshold,
        "variables": variables,
    });
    serde_json::to_writer_pretty(&mut w, &doc)?;
    w.write_all(b"\n")
}

// ---- eval_report.json ----

pub fn write_eval_report_json<W: Write>(mut w: W, report: &EvalReport) -> std::io::Result<()> {
    let attributes: BTreeMap<&str, serde_json::Value> = report
        .attributes
        .iter()
        .map(|(kind, metrics)| {
            let value = match metrics {
                Some(m) => serde_json::to_value(m).expect("metrics serialize"),
                None => json!(null),
            };
            (kind.name(), value)
        })
        .collect();
    let doc = json!({
        "iou_threshold": report.iou_threshold,
        "mask_iou": report.mask_iou,
        "detection": report.detection,
        "attributes": attributes,
    });
    serde_json::to_writer_pretty(&mut w, &doc)?;
    w.write_all(b"\n")
}

// ---- correlation_matrix.csv ----

pub fn write_correlation_csv<W: Write>(w: W, m: &CorrelationMatrix) -> csv::Result<()> {
    let mut writer = lf_csv(w);
    let mut header = vec![String::new()];
    header.extend(m.names.iter().cloned());
    writer.write_record(&header)?;
    for (i, name) in m.names.iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend(m.cells[i].iter().map(|c| fmt_opt(*c)));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

// ---- class_k3.csv ----

pub fn write_class_k3_csv<W: Write>(w: W, trends: &[TrendSummary]) -> csv::Result<()> {
    let mut writer = lf_csv(w);
    writer.write_record(["attribute", "class", "mean_k3", "n", "slope", "intercept"])?;
    for t in trends {
        for c in &t.classes {
            writer.write_record([
                t.attribute.name(),
                c.class,
                &fmt_opt(c.mean_k3),
                &c.n.to_string(),
                &fmt_opt(t.slope),
                &fmt_opt(t.intercept),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

// ---- histogram.csv ----

pub fn write_histogram_csv<W: Write>(w: W, h: &Histogram) -> csv::Result<()> {
    let mut writer = lf_csv(w);
    writer.write_record(["bin_lo", "bin_hi", "count"])?;
    let bins = h.counts.len();
    let width = (h.hi - h.lo) / bins as f64;
    for (i, count) in h.counts.iter().enumerate() {
        let lo = h.lo + width * i as f64;
        let hi = if i + 1 == bins { h.hi } else { h.lo + width * (i + 1) as f64 };
        writer.write_record([&fmt_f64(lo), &fmt_f64(hi), &count.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

// ---- blocks_joined.geojson ----

/// Footprint polygons carrying their block's K3 and class-proportion
/// profile, for external GIS tools. Footprints whose block has no K3
/// value or no profile are skipped.
pub fn write_blocks_joined_geojson<W: Write>(
    mut w: W,
    footprints: &[FootprintFeature],
    blocks: &[BlockK3],
    profiles: &[BlockProfile],
) -> std::io::Result<()> {
    let k3_of: BTreeMap<&str, &BlockK3> = blocks.iter().map(|b| (b.block_id.as_str(), b)).collect();
    let profile_of: BTreeMap<&str, &BlockProfile> =
        profiles.iter().map(|p| (p.block_id.as_str(), p)).collect();
    let columns = profile_columns();

    let features: Vec<serde_json::Value> = footprints
        .iter()
        .filter_map(|f| {
            let block = k3_of.get(f.block_id.as_str())?;
            let profile = profile_of.get(f.block_id.as_str())?;
            let ring: Vec<[f64; 2]> = f.polygon.iter().map(|p| [p.lon, p.lat]).collect();
            let mut properties = serde_json::Map::new();
            properties.insert("footprint_id".into(), json!(f.footprint_id));
            properties.insert("block_id".into(), json!(f.block_id));
            properties.insert("k3".into(), json!(block.k3));
            properties.insert("n_households".into(), json!(block.n_households));
            properties.insert("n_buildings".into(), json!(profile.n_buildings));
            for (name, value) in columns.iter().zip(&profile.proportions) {
                properties.insert(name.clone(), json!(value));
            }
            Some(json!({
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": properties,
            }))
        })
        .collect();
    let doc = json!({"type": "FeatureCollection", "features": features});
    serde_json::to_writer_pretty(&mut w, &doc)?;
    w.write_all(b"\n")
}
