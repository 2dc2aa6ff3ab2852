//! Output tables, SVG line charts and run manifests.
//!
//! CSV fractions are percentages with one decimal, average counts carry two
//! decimals, and absent values are empty fields. JSON siblings keep full
//! precision.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::estimator::{BucketEstimate, EstimatorError, SelfScorePair};
use crate::gateway::GatewayError;
use crate::ingestion::IngestError;
use crate::judgment::{FlipRateRecord, JudgeError, SelfScoreRow, SelfScores};
use crate::model::{BucketStats, ModelError, PositionBucket, N_BUCKETS};
use crate::rag::RagError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_NAME: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;
/// A stage whose failure share exceeds this makes the run partial.
pub const PARTIAL_FAILURE_THRESHOLD: f64 = 0.10;

pub const BUCKETS_CSV_VERSION: u32 = 1;
pub const SELFSCORES_CSV_VERSION: u32 = 1;
pub const FLIPRATE_CSV_VERSION: u32 = 1;
pub const ESTIMATES_CSV_VERSION: u32 = 1;
pub const STATS_CSV_VERSION: u32 = 1;

pub const BUCKETS_HEADER: [&str; 8] = [
    "bucket_lo",
    "bucket_hi",
    "frac_supported",
    "frac_unsupported",
    "frac_irrelevant",
    "n_sentences",
    "avg_supported_count",
    "avg_unsupported_count",
];
pub const SELFSCORES_HEADER: [&str; 7] = [
    "strategy",
    "bucket",
    "self_known",
    "self_unknown",
    "n_judged_supported",
    "n_judged_unsupported",
    "unparseable_rate",
];
pub const FLIPRATE_HEADER: [&str; 5] = ["bucket", "label", "n_correct_in_b", "n_flipped", "flip_rate"];
pub const ESTIMATES_HEADER: [&str; 6] = ["strategy", "bucket", "self_known", "self_unknown", "estimate", "status"];
pub const STATS_HEADER: [&str; 5] = ["model_id", "n_generations", "n_filtered", "claims_per_gen", "filtered_rate"];

/// Estimates from real judgments rest on the estimator's modelling
/// assumptions; reports say so.
pub const ESTIMATE_KIND: &str = "model-consistent estimate";

/// Row label used for whole-corpus rows next to the per-bucket rows.
pub const OVERALL: &str = "overall";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Rag(#[from] RagError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ReportError {
    /// 1 for usage and configuration problems, 2 for bad data, 3 for a
    /// pipeline stage that could not run.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::Config(_) => 1,
            ReportError::Gateway(GatewayError::NoProvider | GatewayError::InvalidRequest(_)) => 1,
            ReportError::Estimator(EstimatorError::InvalidConfig(_)) => 1,
            ReportError::Gateway(_) => 3,
            _ => 2,
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

fn opt_pct(x: Option<f64>) -> String {
    x.map(pct).unwrap_or_default()
}

pub fn count2(x: f64) -> String {
    format!("{x:.2}")
}

fn parse_pct(field: &str) -> Result<Option<f64>, String> {
    if field.trim().is_empty() {
        return Ok(None);
    }
    field
        .trim()
        .parse::<f64>()
        .map(|v| Some(v / 100.0))
        .map_err(|e| format!("bad percentage {field:?}: {e}"))
}

fn csv_string<const N: usize>(header: [&str; N], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

pub fn jsonl_bytes<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("serializable");
        out.push(b'\n');
    }
    out
}

fn bound(x: f64) -> String {
    format!("{:.0}", 100.0 * x)
}

pub fn buckets_csv(stats: &[BucketStats]) -> Vec<u8> {
    csv_string(
        BUCKETS_HEADER,
        stats.iter().map(|s| {
            vec![
                bound(s.bucket.lower()),
                bound(s.bucket.upper()),
                pct(s.frac_supported),
                pct(s.frac_unsupported),
                pct(s.frac_irrelevant),
                s.n_sentences.to_string(),
                count2(s.avg_supported_count),
                count2(s.avg_unsupported_count),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub bucket: String,
    pub lower: f64,
    pub upper: f64,
    pub frac_supported: f64,
    pub frac_unsupported: f64,
    pub frac_irrelevant: f64,
    pub n_sentences: usize,
    pub avg_supported_count: f64,
    pub avg_unsupported_count: f64,
}

pub fn buckets_json(stats: &[BucketStats]) -> Vec<u8> {
    let rows: Vec<BucketRow> = stats
        .iter()
        .map(|s| BucketRow {
            bucket: s.bucket.label(),
            lower: s.bucket.lower(),
            upper: s.bucket.upper(),
            frac_supported: s.frac_supported,
            frac_unsupported: s.frac_unsupported,
            frac_irrelevant: s.frac_irrelevant,
            n_sentences: s.n_sentences,
            avg_supported_count: s.avg_supported_count,
            avg_unsupported_count: s.avg_unsupported_count,
        })
        .collect();
    json_bytes(&serde_json::json!({ "schema_version": BUCKETS_CSV_VERSION, "buckets": rows }))
}

fn score_rows(scores: &SelfScores) -> impl Iterator<Item = (String, &SelfScoreRow)> {
    PositionBucket::all()
        .into_iter()
        .map(|b| b.label())
        .zip(scores.buckets.iter())
        .chain(std::iter::once((OVERALL.to_string(), &scores.overall)))
}

pub fn selfscores_csv(all: &[SelfScores]) -> Vec<u8> {
    csv_string(
        SELFSCORES_HEADER,
        all.iter().flat_map(|s| {
            score_rows(s).map(|(bucket, row)| {
                vec![
                    s.strategy.name().to_string(),
                    bucket,
                    opt_pct(row.self_known),
                    opt_pct(row.self_unknown),
                    row.n_judged_supported.to_string(),
                    row.n_judged_unsupported.to_string(),
                    opt_pct(row.unparseable_rate()),
                ]
            })
        }),
    )
}

pub fn selfscores_json(all: &[SelfScores]) -> Vec<u8> {
    json_bytes(&serde_json::json!({ "schema_version": SELFSCORES_CSV_VERSION, "strategies": all }))
}

pub fn fliprate_csv(records: &[FlipRateRecord]) -> Vec<u8> {
    csv_string(
        FLIPRATE_HEADER,
        records.iter().map(|r| {
            vec![
                r.bucket.label(),
                r.label_class.to_string(),
                r.n_correct_in_b.to_string(),
                r.n_flipped.to_string(),
                opt_pct(r.flip_rate),
            ]
        }),
    )
}

/// Self-scores of one row (a bucket or the overall row) of one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreInput {
    pub strategy: String,
    pub bucket: String,
    pub self_known: Option<f64>,
    pub self_unknown: Option<f64>,
}

pub fn score_inputs(all: &[SelfScores]) -> Vec<ScoreInput> {
    all.iter()
        .flat_map(|s| {
            score_rows(s).map(|(bucket, row)| ScoreInput {
                strategy: s.strategy.name().to_string(),
                bucket,
                self_known: row.self_known,
                self_unknown: row.self_unknown,
            })
        })
        .collect()
}

/// Reads self-scores from `selfscores.json` (full precision) or
/// `selfscores.csv` (one-decimal percentages).
pub fn load_score_inputs(path: &Path) -> Result<Vec<ScoreInput>, ReportError> {
    let raw = fs::read_to_string(path).map_err(io_err(path))?;
    let parse_err = |line: usize, message: String| ReportError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    if path.extension().is_some_and(|e| e == "json") {
        #[derive(Deserialize)]
        struct Doc {
            strategies: Vec<SelfScores>,
        }
        let doc: Doc = serde_json::from_str(&raw).map_err(|e| parse_err(e.line(), e.to_string()))?;
        return Ok(score_inputs(&doc.strategies));
    }
    let mut reader = csv::ReaderBuilder::new().from_reader(raw.as_bytes());
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing column {name}")))
    };
    let (c_strategy, c_bucket, c_sk, c_su) = (col("strategy")?, col("bucket")?, col("self_known")?, col("self_unknown")?);
    let mut out = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        out.push(ScoreInput {
            strategy: field(c_strategy).to_string(),
            bucket: field(c_bucket).to_string(),
            self_known: parse_pct(field(c_sk)).map_err(|m| parse_err(line, m))?,
            self_unknown: parse_pct(field(c_su)).map_err(|m| parse_err(line, m))?,
        });
    }
    if out.is_empty() {
        return Err(parse_err(1, "no self-score rows".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub strategy: String,
    pub bucket: String,
    pub self_known: Option<f64>,
    pub self_unknown: Option<f64>,
    pub estimate: BucketEstimate,
}

/// Applies the estimator row by row; a score outside [0, 1] is data error.
pub fn estimate_rows(inputs: &[ScoreInput]) -> Result<Vec<EstimateRow>, ReportError> {
    inputs
        .iter()
        .map(|i| {
            let pair = match (i.self_known, i.self_unknown) {
                (Some(sk), Some(su)) => Some(SelfScorePair::new(sk, su)?),
                _ => None,
            };
            let estimate = crate::estimator::estimate_per_bucket(&[pair])[0];
            Ok(EstimateRow {
                strategy: i.strategy.clone(),
                bucket: i.bucket.clone(),
                self_known: i.self_known,
                self_unknown: i.self_unknown,
                estimate,
            })
        })
        .collect()
}

fn status(e: BucketEstimate) -> &'static str {
    match e {
        BucketEstimate::Ok { .. } => "ok",
        BucketEstimate::Absent => "absent",
        BucketEstimate::Degenerate => "degenerate",
    }
}

pub fn estimates_csv(rows: &[EstimateRow]) -> Vec<u8> {
    csv_string(
        ESTIMATES_HEADER,
        rows.iter().map(|r| {
            vec![
                r.strategy.clone(),
                r.bucket.clone(),
                opt_pct(r.self_known),
                opt_pct(r.self_unknown),
                opt_pct(r.estimate.sigma()),
                status(r.estimate).to_string(),
            ]
        }),
    )
}

pub fn estimates_json(rows: &[EstimateRow]) -> Vec<u8> {
    json_bytes(&serde_json::json!({
        "schema_version": ESTIMATES_CSV_VERSION,
        "kind": ESTIMATE_KIND,
        "estimates": rows,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub model_id: String,
    pub n_generations: usize,
    pub n_filtered: usize,
    /// Mean claim count over unfiltered generations; absent when all were
    /// filtered.
    pub claims_per_gen: Option<f64>,
    pub filtered_rate: f64,
}

pub fn stats_csv(rows: &[StatsRow]) -> Vec<u8> {
    csv_string(
        STATS_HEADER,
        rows.iter().map(|r| {
            vec![
                r.model_id.clone(),
                r.n_generations.to_string(),
                r.n_filtered.to_string(),
                r.claims_per_gen.map(|c| format!("{c:.1}")).unwrap_or_default(),
                pct(r.filtered_rate),
            ]
        }),
    )
}

/// Fixed-width text rendering for the terminal.
pub fn stats_table(rows: &[StatsRow]) -> String {
    let width = rows.iter().map(|r| r.model_id.len()).max().unwrap_or(0).max("Model".len());
    let mut out = format!("{:<width$}  {:>12}  {:>17}\n", "Model", "#Claims / Gen", "Filtered Rate (%)");
    for r in rows {
        let claims = r.claims_per_gen.map(|c| format!("{c:.1}")).unwrap_or_else(|| "-".into());
        out.push_str(&format!("{:<width$}  {:>12}  {:>17}\n", r.model_id, claims, pct(r.filtered_rate)));
    }
    out
}

pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub values: [f64; N_BUCKETS],
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line chart over the bucket midpoints. Output depends only on the inputs.
pub fn line_chart(title: &str, y_label: &str, y_max: f64, series: &[Series<'_>]) -> String {
    const W: f64 = 520.0;
    const H: f64 = 340.0;
    const LEFT: f64 = 64.0;
    const RIGHT: f64 = 140.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 56.0;
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let x_of = |b: PositionBucket| LEFT + b.midpoint() * plot_w;
    let y_of = |v: f64| TOP + plot_h * (1.0 - (v / y_max).clamp(0.0, 1.0));

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    ));
    s.push_str(&format!("<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"));
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
        LEFT + plot_w / 2.0,
        xml_escape(title)
    ));
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let y = y_of(v);
        s.push_str(&format!(
            "<line x1=\"{LEFT:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>\n",
            LEFT + plot_w
        ));
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{v:.1}</text>\n",
            LEFT - 6.0,
            y + 4.0
        ));
    }
    s.push_str(&format!(
        "<line x1=\"{LEFT:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    ));
    s.push_str(&format!(
        "<line x1=\"{LEFT:.2}\" y1=\"{TOP:.2}\" x2=\"{LEFT:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        TOP + plot_h
    ));
    for b in PositionBucket::all() {
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            x_of(b),
            TOP + plot_h + 16.0,
            b.label()
        ));
    }
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">Relative position (%)</text>\n",
        LEFT + plot_w / 2.0,
        H - 14.0
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">{}</text>\n",
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        xml_escape(y_label)
    ));
    for (k, series) in series.iter().enumerate() {
        let points: Vec<String> = PositionBucket::all()
            .into_iter()
            .map(|b| format!("{:.2},{:.2}", x_of(b), y_of(series.values[b.index])))
            .collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n",
            series.color,
            points.join(" ")
        ));
        for b in PositionBucket::all() {
            s.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>\n",
                x_of(b),
                y_of(series.values[b.index]),
                series.color
            ));
        }
        let ly = TOP + 12.0 + 18.0 * k as f64;
        let lx = LEFT + plot_w + 14.0;
        s.push_str(&format!(
            "<line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            lx + 18.0,
            series.color
        ));
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>\n",
            lx + 24.0,
            ly + 4.0,
            xml_escape(series.name)
        ));
    }
    s.push_str("</svg>\n");
    s
}

pub fn fractions_svg(stats: &[BucketStats]) -> String {
    let col = |f: fn(&BucketStats) -> f64| {
        let mut v = [0.0; N_BUCKETS];
        for s in stats {
            v[s.bucket.index] = 100.0 * f(s);
        }
        v
    };
    line_chart(
        "Claim labels by relative position",
        "Percentage (%)",
        100.0,
        &[
            Series { name: "Supported", color: "#1b9e77", values: col(|s| s.frac_supported) },
            Series { name: "Unsupported", color: "#d95f02", values: col(|s| s.frac_unsupported) },
            Series { name: "Irrelevant", color: "#7570b3", values: col(|s| s.frac_irrelevant) },
        ],
    )
}

pub fn counts_svg(stats: &[BucketStats]) -> String {
    let col = |f: fn(&BucketStats) -> f64| {
        let mut v = [0.0; N_BUCKETS];
        for s in stats {
            v[s.bucket.index] = f(s);
        }
        v
    };
    let supported = col(|s| s.avg_supported_count);
    let unsupported = col(|s| s.avg_unsupported_count);
    let peak = supported.iter().chain(&unsupported).cloned().fold(0.0, f64::max);
    let y_max = if peak > 0.0 { (peak * 2.0).ceil() / 2.0 } else { 1.0 };
    line_chart(
        "Claims per generation by relative position",
        "Average count",
        y_max,
        &[
            Series { name: "Supported", color: "#1b9e77", values: supported },
            Series { name: "Unsupported", color: "#d95f02", values: unsupported },
        ],
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: Vec<u8>,
    pub schema_version: Option<u32>,
}

impl OutputFile {
    pub fn new(name: impl Into<String>, contents: impl Into<Vec<u8>>) -> Self {
        OutputFile {
            name: name.into(),
            contents: contents.into(),
            schema_version: None,
        }
    }

    pub fn versioned(name: impl Into<String>, contents: impl Into<Vec<u8>>, version: u32) -> Self {
        OutputFile {
            schema_version: Some(version),
            ..OutputFile::new(name, contents)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub failed: usize,
    pub total: usize,
}

impl StageFailure {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.failed as f64 / self.total as f64
        }
    }

    pub fn is_partial(&self) -> bool {
        self.rate() > PARTIAL_FAILURE_THRESHOLD
    }
}

/// Everything a command produces, before anything touches the disk.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandOutput {
    pub files: Vec<OutputFile>,
    pub failures: Vec<StageFailure>,
}

impl CommandOutput {
    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|f| f.name == name).map(|f| f.contents.as_slice())
    }

    pub fn push(&mut self, file: OutputFile) {
        self.files.retain(|f| f.name != file.name);
        self.files.push(file);
    }

    pub fn extend(&mut self, other: CommandOutput) {
        for f in other.files {
            self.push(f);
        }
        self.failures.extend(other.failures);
    }

    pub fn record_failures(&mut self, stage: &str, failed: usize, total: usize) {
        if failed > 0 {
            log::warn!("{stage}: {failed} of {total} failed");
        }
        self.failures.push(StageFailure {
            stage: stage.to_string(),
            failed,
            total,
        });
    }

    pub fn is_partial(&self) -> bool {
        self.failures.iter().any(StageFailure::is_partial)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub run_id: String,
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub schema_versions: BTreeMap<String, u32>,
    pub failures: Vec<StageFailure>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<FileDigest, ReportError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

/// Builds the manifest for a run. The id hashes the command, the config
/// snapshot and the input digests, so equal inputs give equal ids.
pub fn manifest(command: &str, config: &serde_json::Value, inputs: &[&Path], output: &CommandOutput) -> Result<RunManifest, ReportError> {
    let inputs: Vec<FileDigest> = inputs.iter().map(|p| digest_file(p)).collect::<Result<_, _>>()?;
    let identity = serde_json::json!({ "command": command, "config": config, "inputs": inputs });
    let run_id = sha256_hex(identity.to_string().as_bytes())[..16].to_string();
    Ok(RunManifest {
        manifest_version: MANIFEST_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        run_id,
        command: command.to_string(),
        config: config.clone(),
        inputs,
        outputs: output
            .files
            .iter()
            .map(|f| FileDigest {
                path: f.name.clone(),
                sha256: sha256_hex(&f.contents),
            })
            .collect(),
        schema_versions: output
            .files
            .iter()
            .filter_map(|f| f.schema_version.map(|v| (f.name.clone(), v)))
            .collect(),
        failures: output.failures.clone(),
    })
}

/// Writes every output file and `manifest.json` under `out_dir`.
pub fn emit(out_dir: &Path, command: &str, config: &serde_json::Value, inputs: &[&Path], output: &CommandOutput) -> Result<RunManifest, ReportError> {
    let m = manifest(command, config, inputs, output)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for f in &output.files {
        let path = out_dir.join(&f.name);
        fs::write(&path, &f.contents).map_err(io_err(&path))?;
    }
    let path = out_dir.join(MANIFEST_NAME);
    fs::write(&path, json_bytes(&m)).map_err(io_err(&path))?;
    Ok(m)
}
