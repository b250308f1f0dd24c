//! End-to-end orchestration: load or generate data, train the masked
//! stack, rank and choose variables, optionally cross-check against the
//! exhaustive oracle, and write all artifacts into one output directory.
//!
//! Artifacts: `report.json` (run summary), `mask.json` (scores in full
//! precision), `history.csv` (per-epoch losses), `scores.svg` (bar
//! chart), and `exhaustive.json` when the oracle comparison runs.
//! Everything except the recorded wall time is a pure function of the
//! config and input bytes, which the report pins via two digests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{
    fit_encode, infer_schema, load_schema_sidecar, load_table, EncodedMatrix,
};
use crate::mask::{EpochStats, LearnerStack, StackOptions, TrainConfig};
use crate::plot::score_bar_chart;
use crate::selection::{
    agreement, choose_subset, exhaustive_search, rank_variables, ExhaustiveOptions,
    ExhaustiveResult, SelectionMethod, SelectionReport,
};
use crate::synthetic::{generate_dut_dataset, SyntheticSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// CSV file plus an optional schema sidecar; without a sidecar the
    /// schema is inferred and `targets` must name the target columns.
    CsvFile {
        path: PathBuf,
        schema: Option<PathBuf>,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: DataSource,
    /// Target column names; may stay empty for sources that declare
    /// their own targets (synthetic, schema sidecar).
    pub targets: Vec<String>,
    pub train: TrainConfig,
    pub stack: StackOptions,
    /// Subset size for `choose`; `None` means the automatic elbow cut.
    pub k: Option<usize>,
    pub compare_exhaustive: bool,
    pub max_subset_size: usize,
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn new(source: DataSource, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            source,
            targets: Vec::new(),
            train: TrainConfig::default(),
            stack: StackOptions::default(),
            k: None,
            compare_exhaustive: false,
            max_subset_size: 6,
            workers: 1,
            out_dir: out_dir.into(),
        }
    }
}

/// The reproducibility-relevant slice of a [`RunConfig`]: everything that
/// changes results, nothing that does not (paths, worker count).
#[derive(Serialize)]
struct DigestView<'a> {
    targets: &'a [String],
    train: &'a TrainConfig,
    stack: &'a StackOptions,
    k: Option<usize>,
    compare_exhaustive: bool,
    max_subset_size: usize,
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn config_digest(config: &RunConfig) -> Result<String> {
    let view = DigestView {
        targets: &config.targets,
        train: &config.train,
        stack: &config.stack,
        k: config.k,
        compare_exhaustive: config.compare_exhaustive,
        max_subset_size: config.max_subset_size,
    };
    let json = serde_json::to_vec(&view)
        .map_err(|e| Error::InvalidConfig(format!("config not serializable: {e}")))?;
    Ok(hex_digest(&json))
}

fn input_digest(source: &DataSource) -> Result<String> {
    match source {
        DataSource::CsvFile { path, .. } => {
            let bytes = std::fs::read(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            Ok(hex_digest(&bytes))
        }
        DataSource::Synthetic(spec) => {
            let json = serde_json::to_vec(spec)
                .map_err(|e| Error::InvalidConfig(format!("spec not serializable: {e}")))?;
            Ok(hex_digest(&json))
        }
    }
}

fn load_source(config: &RunConfig) -> Result<EncodedMatrix> {
    match &config.source {
        DataSource::CsvFile { path, schema } => {
            let table = match schema {
                Some(sidecar) => {
                    let declared = load_schema_sidecar(sidecar)?;
                    load_table(path, Some(&declared))?
                }
                None => {
                    if config.targets.is_empty() {
                        return Err(Error::MissingRole { role: "target" });
                    }
                    let table = load_table(path, None)?;
                    let schema = infer_schema(&table, &config.targets)?;
                    table.with_schema(schema)?
                }
            };
            fit_encode(&table)
        }
        DataSource::Synthetic(spec) => {
            let (table, _) = generate_dut_dataset(spec)?;
            if !config.targets.is_empty() {
                let declared = table.target_names();
                if config.targets != declared {
                    return Err(Error::InvalidConfig(format!(
                        "synthetic source defines targets {declared:?}, not {:?}",
                        config.targets
                    )));
                }
            }
            fit_encode(&table)
        }
    }
}

/// `mask.json`: ranked scores in full double precision plus the knobs
/// needed to regenerate them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskDocument {
    pub variables: Vec<MaskEntry>,
    pub temperature: f64,
    pub seed: u64,
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskEntry {
    pub name: String,
    pub score: f64,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidConfig(format!("not serializable: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_slice(&bytes).map_err(|e| Error::SchemaMismatch {
        detail: format!("{}: {e}", path.display()),
    })
}

fn write_history(history: &[EpochStats], path: &Path) -> Result<()> {
    let mut out = String::from("epoch,train_loss,validation_loss\n");
    for row in history {
        let val = row
            .validation_loss
            .map(|v| format!("{v}"))
            .unwrap_or_default();
        out.push_str(&format!("{},{},{val}\n", row.epoch, row.train_loss));
    }
    std::fs::write(path, out).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Everything a run produced, for callers that want more than the report.
#[derive(Debug)]
pub struct PipelineOutput {
    pub report: SelectionReport,
    pub history: Vec<EpochStats>,
    pub oracle: Option<ExhaustiveResult>,
}

/// Run the full selection pipeline and write artifacts under
/// `config.out_dir` (created if absent). Returns the report that was
/// written to `report.json`.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutput> {
    let config_digest = config_digest(config)?;
    let input_digest = input_digest(&config.source)?;
    let data = load_source(config)?;

    let start = Instant::now();
    let mut stack = LearnerStack::build(
        data.n_candidates(),
        data.n_targets(),
        &config.stack,
        config.train,
    )?;
    let history = stack.train(&data)?;
    let mask = stack.extract_final_mask(&data)?;
    let training_seconds = start.elapsed().as_secs_f64();

    let ranking = rank_variables(&mask);
    let chosen = choose_subset(&ranking, config.k)?;

    let oracle = if config.compare_exhaustive {
        let options = ExhaustiveOptions {
            split_seed: config.train.seed,
            workers: config.workers.max(1),
            max_evaluations: None,
        };
        Some(exhaustive_search(&data, config.max_subset_size, &options)?)
    } else {
        None
    };
    let oracle_agreement = oracle
        .as_ref()
        .map(|result| agreement(&chosen, &result.chosen));

    let report = SelectionReport {
        ranking: ranking.clone(),
        chosen,
        method: SelectionMethod::Mask,
        training_seconds,
        seed: config.train.seed,
        oracle_agreement,
        config_digest: config_digest.clone(),
        input_digest,
    };

    std::fs::create_dir_all(&config.out_dir).map_err(|source| Error::Write {
        path: config.out_dir.clone(),
        source,
    })?;
    write_json(&report, &config.out_dir.join("report.json"))?;
    let mask_doc = MaskDocument {
        variables: ranking
            .iter()
            .map(|r| MaskEntry {
                name: r.name.clone(),
                score: r.score,
            })
            .collect(),
        temperature: config.stack.temperature,
        seed: config.train.seed,
        config_digest,
    };
    write_json(&mask_doc, &config.out_dir.join("mask.json"))?;
    write_history(&history, &config.out_dir.join("history.csv"))?;
    let bars: Vec<(String, f64)> = ranking.iter().map(|r| (r.name.clone(), r.score)).collect();
    let svg = score_bar_chart("importance scores", &bars)?;
    std::fs::write(config.out_dir.join("scores.svg"), svg).map_err(|source| Error::Write {
        path: config.out_dir.join("scores.svg"),
        source,
    })?;
    if let Some(result) = &oracle {
        write_json(result, &config.out_dir.join("exhaustive.json"))?;
    }

    Ok(PipelineOutput {
        report,
        history,
        oracle,
    })
}
