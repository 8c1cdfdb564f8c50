//! End-to-end pipeline: parse inputs, geocode, compute K3, evaluate
//! against annotations when given, correlate, and write every artifact
//! plus a run manifest.
//!
//! Artifacts are written under `<name>.partial` and renamed only after
//! the whole run succeeds, so a failed run never leaves half-written
//! files under the final names.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

use crate::correlate::{
    block_profile, class_k3_trend, correlation_matrix, default_class_order, histogram, join_blocks,
    CorrelateError,
};
use crate::eval::{evaluate, parse_annotations, EvalOptions, DEFAULT_IOU_THRESHOLD};
use crate::geocode::{geocode, DEFAULT_MAX_RANGE_M};
use crate::ingest::{parse_census, parse_detections, parse_footprints, CensusSchema, ParseError};
use crate::k3::{compute_k3, K3Error, K3Options};
use crate::report;
use crate::taxonomy::AttributeKind;

/// Stage names used in error messages and exit-code mapping.
pub type Stage = &'static str;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    /// Unusable configuration: unreadable file, bad value, missing path.
    #[error("config: {0}")]
    Config(String),
    /// A stage rejected its input data.
    #[error("{stage}: {source}")]
    Input {
        stage: Stage,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    /// Environment or internal failure (I/O on outputs, lock poisoning).
    #[error("{stage}: {source}")]
    Internal {
        stage: Stage,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

impl PipelineError {
    /// CLI exit code: 1 for input problems, 2 for internal failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Config(_) | PipelineError::Input { .. } => 1,
            PipelineError::Internal { .. } => 2,
        }
    }
}

fn input_err(stage: Stage, e: impl std::error::Error + Send + Sync + 'static) -> PipelineError {
    PipelineError::Input { stage, source: Box::new(e) }
}

fn internal_err(stage: Stage, e: impl std::error::Error + Send + Sync + 'static) -> PipelineError {
    PipelineError::Internal { stage, source: Box::new(e) }
}

fn default_max_range() -> f64 {
    DEFAULT_MAX_RANGE_M
}
fn default_iou_threshold() -> f64 {
    DEFAULT_IOU_THRESHOLD
}
fn default_anova_threshold() -> f64 {
    3.0
}
fn default_histogram_bins() -> usize {
    20
}
fn default_histogram_lo() -> f64 {
    1.0
}
fn default_histogram_hi() -> f64 {
    3.0
}

/// Everything a run needs, loadable from a TOML file. Relative paths
/// resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub detections: PathBuf,
    pub footprints: PathBuf,
    pub census: PathBuf,
    /// Census variable schema; the built-in default applies when absent.
    #[serde(default)]
    pub schema: Option<PathBuf>,
    /// Ground-truth annotations; the eval stage runs only when present.
    #[serde(default)]
    pub annotations: Option<PathBuf>,
    pub out_dir: PathBuf,
    #[serde(default = "default_max_range")]
    pub max_range_m: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_iou_threshold")]
    pub iou_threshold: f64,
    #[serde(default)]
    pub mask_iou: bool,
    #[serde(default = "default_anova_threshold")]
    pub anova_threshold: f64,
    #[serde(default = "default_histogram_bins")]
    pub histogram_bins: usize,
    #[serde(default = "default_histogram_lo")]
    pub histogram_lo: f64,
    #[serde(default = "default_histogram_hi")]
    pub histogram_hi: f64,
    #[serde(default)]
    pub allow_large: bool,
}

impl PipelineConfig {
    pub fn from_toml_path(path: &Path) -> Result<PipelineConfig, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut config: PipelineConfig = toml::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        resolve(&mut config.detections);
        resolve(&mut config.footprints);
        resolve(&mut config.census);
        if let Some(p) = &mut config.schema {
            resolve(p);
        }
        if let Some(p) = &mut config.annotations {
            resolve(p);
        }
        resolve(&mut config.out_dir);
        Ok(config)
    }

    /// Check parameter ranges and input-path existence.
    pub fn check(&self) -> Result<(), PipelineError> {
        let exists = |p: &Path, what: &str| {
            if p.is_file() {
                Ok(())
            } else {
                Err(PipelineError::Config(format!("{what} file not found: {}", p.display())))
            }
        };
        exists(&self.detections, "detections")?;
        exists(&self.footprints, "footprints")?;
        exists(&self.census, "census")?;
        if let Some(p) = &self.schema {
            exists(p, "schema")?;
        }
        if let Some(p) = &self.annotations {
            exists(p, "annotations")?;
        }
        if !(self.max_range_m.is_finite() && self.max_range_m > 0.0) {
            return Err(PipelineError::Config(format!(
                "max_range_m must be positive, got {}",
                self.max_range_m
            )));
        }
        if !(0.0..1.0).contains(&self.iou_threshold) {
            return Err(PipelineError::Config(format!(
                "iou_threshold must be in [0, 1), got {}",
                self.iou_threshold
            )));
        }
        if !self.anova_threshold.is_finite() || self.anova_threshold < 0.0 {
            return Err(PipelineError::Config(format!(
                "anova_threshold must be non-negative, got {}",
                self.anova_threshold
            )));
        }
        if self.histogram_bins == 0 {
            return Err(PipelineError::Config("histogram_bins must be at least 1".into()));
        }
        if !(self.histogram_lo < self.histogram_hi) {
            return Err(PipelineError::Config(format!(
                "histogram range is empty: [{}, {}]",
                self.histogram_lo, self.histogram_hi
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization of the effective
    /// config.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn load_schema(&self) -> Result<CensusSchema, ParseError> {
        match &self.schema {
            Some(path) => CensusSchema::from_yaml_path(path),
            None => Ok(CensusSchema::default_variables()),
        }
    }
}

/// Record counts gathered by check-only validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub detections: usize,
    pub footprints: usize,
    pub households: usize,
    pub schema_variables: usize,
    pub annotations: Option<usize>,
}

/// Run every parser in check-only mode.
pub fn validate(config: &PipelineConfig) -> Result<ValidationReport, PipelineError> {
    config.check()?;
    let schema = config.load_schema().map_err(|e| input_err("ingest/schema", e))?;
    let detections =
        parse_detections(&config.detections).map_err(|e| input_err("ingest/detections", e))?;
    let footprints =
        parse_footprints(&config.footprints).map_err(|e| input_err("ingest/footprints", e))?;
    let households =
        parse_census(&config.census, &schema).map_err(|e| input_err("ingest/census", e))?;
    let annotations = match &config.annotations {
        Some(path) => {
            Some(parse_annotations(path).map_err(|e| input_err("ingest/annotations", e))?.len())
        }
        None => None,
    };
    Ok(ValidationReport {
        detections: detections.len(),
        footprints: footprints.len(),
        households: households.len(),
        schema_variables: schema.variables.len(),
        annotations,
    })
}

/// Per-stage record counts written into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCounts {
    pub detections: usize,
    pub footprints: usize,
    pub households: usize,
    pub schema_variables: usize,
    pub kept_variables: usize,
    pub dropped_variables: usize,
    pub matched_detections: usize,
    pub rejected_detections: usize,
    pub buildings: usize,
    pub blocks: usize,
    pub joined_blocks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matched_pairs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub counts: ManifestCounts,
    pub artifacts: Vec<String>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
}

/// Artifact names cmd_run can produce; stale copies of optional ones
/// are removed on success.
const OPTIONAL_ARTIFACTS: &[&str] = &["eval_report.json"];

struct ArtifactSink {
    out_dir: PathBuf,
    written: Vec<(PathBuf, PathBuf, String)>, // (partial, final, name)
}

impl ArtifactSink {
    fn new(out_dir: &Path) -> ArtifactSink {
        ArtifactSink { out_dir: out_dir.to_path_buf(), written: Vec::new() }
    }

    fn write(
        &mut self,
        name: &str,
        emit: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<(), PipelineError> {
        let mut buf = Vec::new();
        emit(&mut buf).map_err(|e| internal_err("report", e))?;
        let partial = self.out_dir.join(format!("{name}.partial"));
        fs::write(&partial, &buf).map_err(|e| internal_err("report", e))?;
        self.written.push((partial, self.out_dir.join(name), name.to_string()));
        Ok(())
    }

    /// Promote all partial files to their final names.
    fn commit(self) -> Result<Vec<String>, PipelineError> {
        let mut names = Vec::new();
        for (partial, final_path, name) in &self.written {
            fs::rename(partial, final_path).map_err(|e| internal_err("report", e))?;
            names.push(name.clone());
        }
        for name in OPTIONAL_ARTIFACTS {
            if !names.iter().any(|n| n == name) {
                match fs::remove_file(self.out_dir.join(name)) {
                    Ok(()) => {}
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                    Err(e) => return Err(internal_err("report", e)),
                }
            }
        }
        Ok(names)
    }
}

/// Execute the full pipeline and write all artifacts into
/// `config.out_dir`.
pub fn run(config: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    config.check()?;
    fs::create_dir_all(&config.out_dir).map_err(|e| internal_err("setup", e))?;

    // ingest
    let schema = config.load_schema().map_err(|e| input_err("ingest/schema", e))?;
    let detections =
        parse_detections(&config.detections).map_err(|e| input_err("ingest/detections", e))?;
    let footprints =
        parse_footprints(&config.footprints).map_err(|e| input_err("ingest/footprints", e))?;
    let households =
        parse_census(&config.census, &schema).map_err(|e| input_err("ingest/census", e))?;
    let annotations = match &config.annotations {
        Some(path) => Some(parse_annotations(path).map_err(|e| input_err("ingest/annotations", e))?),
        None => None,
    };

    let mut sink = ArtifactSink::new(&config.out_dir);

    // geocode
    let outcome = geocode(&detections, &footprints, config.max_range_m);
    sink.write("buildings.jsonl", |w| report::write_buildings_jsonl(w, &outcome.buildings))?;
    sink.write("rejects.jsonl", |w| report::write_rejects_jsonl(w, &outcome.rejects))?;

    // k3
    let k3_opts = K3Options {
        seed: config.seed,
        anova_threshold: config.anova_threshold,
        allow_large: config.allow_large,
    };
    let k3_out = compute_k3(&households, &schema, &k3_opts).map_err(classify_k3)?;
    sink.write("blocks_k3.csv", |w| {
        report::write_blocks_csv(w, &k3_out.blocks).map_err(csv_io)
    })?;
    sink.write("k3_diagnostics.json", |w| report::write_diagnostics_json(w, &k3_out.diagnostics))?;

    // eval (optional)
    let mut matched_pairs = None;
    if let Some(annotations) = &annotations {
        let opts = EvalOptions { iou_threshold: config.iou_threshold, mask_iou: config.mask_iou };
        let eval_report = evaluate(&detections, annotations, &opts);
        matched_pairs = Some(eval_report.detection.matched);
        sink.write("eval_report.json", |w| report::write_eval_report_json(w, &eval_report))?;
    }

    // correlate
    let profiles = block_profile(&outcome.buildings);
    let joined = join_blocks(&k3_out.blocks, &profiles);
    let matrix = correlation_matrix(&joined)
        .map_err(|e: CorrelateError| input_err("correlate", e))?;
    sink.write("correlation_matrix.csv", |w| {
        report::write_correlation_csv(w, &matrix).map_err(csv_io)
    })?;
    let trends: Vec<_> = AttributeKind::ALL
        .iter()
        .map(|&kind| {
            let order = default_class_order(kind);
            class_k3_trend(&outcome.buildings, &k3_out.blocks, kind, &order)
        })
        .collect();
    sink.write("class_k3.csv", |w| report::write_class_k3_csv(w, &trends).map_err(csv_io))?;
    let k3_values: Vec<f64> = k3_out.blocks.iter().map(|b| b.k3).collect();
    let hist =
        histogram(&k3_values, config.histogram_lo, config.histogram_hi, config.histogram_bins);
    sink.write("histogram.csv", |w| report::write_histogram_csv(w, &hist).map_err(csv_io))?;
    sink.write("blocks_joined.geojson", |w| {
        report::write_blocks_joined_geojson(w, &footprints, &k3_out.blocks, &profiles)
    })?;

    // manifest
    let counts = ManifestCounts {
        detections: detections.len(),
        footprints: footprints.len(),
        households: households.len(),
        schema_variables: schema.variables.len(),
        kept_variables: schema.variables.len() - k3_out.diagnostics.dropped_columns.len(),
        dropped_variables: k3_out.diagnostics.dropped_columns.len(),
        matched_detections: outcome.n_matched,
        rejected_detections: outcome.rejects.len(),
        buildings: outcome.buildings.len(),
        blocks: k3_out.blocks.len(),
        joined_blocks: joined.block_ids.len(),
        annotations: annotations.as_ref().map(Vec::len),
        matched_pairs,
    };
    let mut manifest = RunManifest {
        config_hash: config.content_hash(),
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        counts,
        artifacts: Vec::new(),
    };
    manifest.artifacts = sink
        .written
        .iter()
        .map(|(_, _, name)| name.clone())
        .chain(std::iter::once("run_manifest.json".to_string()))
        .collect();
    sink.write("run_manifest.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        use std::io::Write as _;
        w.write_all(b"\n")
    })?;
    sink.commit()?;

    Ok(RunSummary { manifest, out_dir: config.out_dir.clone() })
}

fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

/// Oversized input is an input problem, as are degenerate data shapes.
fn classify_k3(e: K3Error) -> PipelineError {
    input_err("k3", e)
}
