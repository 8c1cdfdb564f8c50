//! `k3` — batch pipeline from street-view building detections and
//! census microdata to block-level vulnerability analytics.
//!
//! Exit codes: 0 success, 1 input/config error, 2 internal error.

use clap::{Args, Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use k3_core::correlate::{
    block_profile, class_k3_trend, correlation_matrix, default_class_order, histogram, join_blocks,
};
use k3_core::eval::{evaluate, parse_annotations, EvalOptions};
use k3_core::geocode::geocode;
use k3_core::ingest::{parse_census, parse_detections, parse_footprints, CensusSchema};
use k3_core::k3::{compute_k3, K3Options};
use k3_core::pipeline::{self, PipelineConfig, PipelineError};
use k3_core::report;
use k3_core::taxonomy::AttributeKind;

#[derive(Parser)]
#[command(name = "k3", version, about = "Street-view building attributes meets census vulnerability")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check all configured inputs without writing anything
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the full pipeline and write every artifact
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Assign detections to footprints and fuse per-building attributes
    Geocode {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        footprints: PathBuf,
        /// Output directory for buildings.jsonl and rejects.jsonl
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50.0)]
        max_range_m: f64,
    },
    /// Compute block-level K3 from census microdata
    K3 {
        #[arg(long)]
        census: PathBuf,
        /// Variable schema YAML; built-in default schema when omitted
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3.0)]
        anova_threshold: f64,
        #[arg(long)]
        out_dir: PathBuf,
        /// Permit more than 100,000 households (O(N^2) memory)
        #[arg(long)]
        allow_large: bool,
    },
    /// Score predictions against annotations at an IoU threshold
    Eval {
        /// Predictions in the detections JSONL schema
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value_t = 0.75)]
        iou_threshold: f64,
        /// Use polygon mask IoU where both sides carry masks
        #[arg(long)]
        mask_iou: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Join geocoded buildings with block K3 and write the analyses
    Correlate {
        /// buildings.jsonl from the geocode stage
        #[arg(long)]
        buildings: PathBuf,
        /// blocks_k3.csv from the k3 stage
        #[arg(long)]
        blocks_k3: PathBuf,
        /// Footprints GeoJSON, for the joined map output
        #[arg(long)]
        footprints: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long, default_value_t = 1.0)]
        hist_lo: f64,
        #[arg(long, default_value_t = 3.0)]
        hist_hi: f64,
    },
}

/// Flags that override values from the config file.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_range_m: Option<f64>,
    #[arg(long)]
    iou_threshold: Option<f64>,
    #[arg(long)]
    anova_threshold: Option<f64>,
    #[arg(long)]
    mask_iou: bool,
    #[arg(long)]
    allow_large: bool,
}

impl Overrides {
    fn apply(self, config: &mut PipelineConfig) {
        if let Some(v) = self.out_dir {
            config.out_dir = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.max_range_m {
            config.max_range_m = v;
        }
        if let Some(v) = self.iou_threshold {
            config.iou_threshold = v;
        }
        if let Some(v) = self.anova_threshold {
            config.anova_threshold = v;
        }
        if self.mask_iou {
            config.mask_iou = true;
        }
        if self.allow_large {
            config.allow_large = true;
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn input_err(stage: &'static str, e: impl std::error::Error + Send + Sync + 'static) -> PipelineError {
    PipelineError::Input { stage, source: Box::new(e) }
}

fn internal_err(stage: &'static str, e: impl std::error::Error + Send + Sync + 'static) -> PipelineError {
    PipelineError::Internal { stage, source: Box::new(e) }
}

fn write_out(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|e| internal_err("report", e))?;
    fs::write(dir.join(name), bytes).map_err(|e| internal_err("report", e))
}

fn dispatch(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Validate { config } => {
            let config = PipelineConfig::from_toml_path(&config)?;
            let report = pipeline::validate(&config)?;
            println!("detections: {} records ({})", report.detections, config.detections.display());
            println!("footprints: {} features ({})", report.footprints, config.footprints.display());
            println!(
                "census: {} households, {} schema variables ({})",
                report.households,
                report.schema_variables,
                config.census.display()
            );
            match report.annotations {
                Some(n) => println!(
                    "annotations: {} instances ({})",
                    n,
                    config.annotations.as_ref().expect("annotations path").display()
                ),
                None => println!("annotations: not configured"),
            }
            println!("ok");
            Ok(())
        }
        Command::Run { config, overrides } => {
            let mut config = PipelineConfig::from_toml_path(&config)?;
            overrides.apply(&mut config);
            let summary = pipeline::run(&config)?;
            let c = &summary.manifest.counts;
            println!(
                "geocode: {} matched, {} rejected of {} detections",
                c.matched_detections, c.rejected_detections, c.detections
            );
            println!("k3: {} households over {} blocks", c.households, c.blocks);
            if let Some(pairs) = c.matched_pairs {
                println!("eval: {pairs} matched instance pairs");
            }
            println!("artifacts in {}:", summary.out_dir.display());
            for name in &summary.manifest.artifacts {
                println!("  {name}");
            }
            Ok(())
        }
        Command::Geocode { detections, footprints, out, max_range_m } => {
            let detections =
                parse_detections(&detections).map_err(|e| input_err("ingest/detections", e))?;
            let footprints =
                parse_footprints(&footprints).map_err(|e| input_err("ingest/footprints", e))?;
            let outcome = geocode(&detections, &footprints, max_range_m);
            let mut buildings = Vec::new();
            report::write_buildings_jsonl(&mut buildings, &outcome.buildings)
                .map_err(|e| internal_err("report", e))?;
            write_out(&out, "buildings.jsonl", &buildings)?;
            let mut rejects = Vec::new();
            report::write_rejects_jsonl(&mut rejects, &outcome.rejects)
                .map_err(|e| internal_err("report", e))?;
            write_out(&out, "rejects.jsonl", &rejects)?;
            println!(
                "{} buildings from {} matched detections; {} rejected",
                outcome.buildings.len(),
                outcome.n_matched,
                outcome.rejects.len()
            );
            Ok(())
        }
        Command::K3 { census, schema, seed, anova_threshold, out_dir, allow_large } => {
            let schema = match schema {
                Some(path) => {
                    CensusSchema::from_yaml_path(&path).map_err(|e| input_err("ingest/schema", e))?
                }
                None => CensusSchema::default_variables(),
            };
            let households =
                parse_census(&census, &schema).map_err(|e| input_err("ingest/census", e))?;
            let opts = K3Options { seed, anova_threshold, allow_large };
            let out = compute_k3(&households, &schema, &opts).map_err(|e| input_err("k3", e))?;
            let mut blocks = Vec::new();
            report::write_blocks_csv(&mut blocks, &out.blocks)
                .map_err(|e| internal_err("report", std::io::Error::other(e)))?;
            write_out(&out_dir, "blocks_k3.csv", &blocks)?;
            let mut diag = Vec::new();
            report::write_diagnostics_json(&mut diag, &out.diagnostics)
                .map_err(|e| internal_err("report", e))?;
            write_out(&out_dir, "k3_diagnostics.json", &diag)?;
            for dropped in &out.diagnostics.dropped_columns {
                eprintln!("warning: dropped constant column `{dropped}`");
            }
            println!("{} blocks from {} households", out.blocks.len(), households.len());
            Ok(())
        }
        Command::Eval { predictions, annotations, iou_threshold, mask_iou, out_dir } => {
            let predictions =
                parse_detections(&predictions).map_err(|e| input_err("ingest/predictions", e))?;
            let annotations =
                parse_annotations(&annotations).map_err(|e| input_err("ingest/annotations", e))?;
            let opts = EvalOptions { iou_threshold, mask_iou };
            let eval_report = evaluate(&predictions, &annotations, &opts);
            let mut buf = Vec::new();
            report::write_eval_report_json(&mut buf, &eval_report)
                .map_err(|e| internal_err("report", e))?;
            write_out(&out_dir, "eval_report.json", &buf)?;
            println!(
                "{} matched pairs of {} predictions / {} truths",
                eval_report.detection.matched,
                eval_report.detection.n_predictions,
                eval_report.detection.n_truths
            );
            Ok(())
        }
        Command::Correlate { buildings, blocks_k3, footprints, out_dir, bins, hist_lo, hist_hi } => {
            if !(hist_lo < hist_hi) || bins == 0 {
                return Err(PipelineError::Config(format!(
                    "bad histogram parameters: bins={bins}, range [{hist_lo}, {hist_hi}]"
                )));
            }
            let buildings =
                report::read_buildings_jsonl(&buildings).map_err(|e| input_err("ingest/buildings", e))?;
            let blocks = report::read_blocks_csv(&blocks_k3)
                .map_err(|e| input_err("ingest/blocks_k3", e))?;
            let footprints =
                parse_footprints(&footprints).map_err(|e| input_err("ingest/footprints", e))?;

            let profiles = block_profile(&buildings);
            let joined = join_blocks(&blocks, &profiles);
            let matrix = correlation_matrix(&joined).map_err(|e| input_err("correlate", e))?;
            let mut buf = Vec::new();
            report::write_correlation_csv(&mut buf, &matrix)
                .map_err(|e| internal_err("report", std::io::Error::other(e)))?;
            write_out(&out_dir, "correlation_matrix.csv", &buf)?;

            let trends: Vec<_> = AttributeKind::ALL
                .iter()
                .map(|&kind| class_k3_trend(&buildings, &blocks, kind, &default_class_order(kind)))
                .collect();
            let mut buf = Vec::new();
            report::write_class_k3_csv(&mut buf, &trends)
                .map_err(|e| internal_err("report", std::io::Error::other(e)))?;
            write_out(&out_dir, "class_k3.csv", &buf)?;

            let values: Vec<f64> = blocks.iter().map(|b| b.k3).collect();
            let hist = histogram(&values, hist_lo, hist_hi, bins);
            let mut buf = Vec::new();
            report::write_histogram_csv(&mut buf, &hist)
                .map_err(|e| internal_err("report", std::io::Error::other(e)))?;
            write_out(&out_dir, "histogram.csv", &buf)?;

            let mut buf = Vec::new();
            report::write_blocks_joined_geojson(&mut buf, &footprints, &blocks, &profiles)
                .map_err(|e| internal_err("report", e))?;
            write_out(&out_dir, "blocks_joined.geojson", &buf)?;

            println!("{} joined blocks", joined.block_ids.len());
            Ok(())
        }
    }
}
