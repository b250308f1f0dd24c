//! Wall-time scaling measurements: mask-pipeline time versus candidate
//! count, exhaustive-search time versus candidate count, and a log-log
//! slope fit over the measured points.
//!
//! Datasets are derived from the synthetic generator: the 11-variable
//! table is truncated or padded with independent uniform columns to hit
//! each requested dimension. Generation and encoding are excluded from
//! the timed region, which covers training plus mask extraction only.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{fit_encode, EncodedMatrix};
use crate::mask::{LearnerStack, StackOptions, TrainConfig};
use crate::selection::{exhaustive_search, ExhaustiveOptions, SelectionMethod};
use crate::synthetic::{generate_dut_dataset, pad_with_artificial_variables, SyntheticSpec};

/// Points whose estimated working set exceeds this are flagged and
/// skipped instead of risking the allocator.
const MEMORY_CAP_BYTES: u64 = 8 << 30;

/// Largest dimension the exhaustive benchmark accepts; 2^14 subsets is
/// already minutes of work and the growth is the point being measured.
pub const EXHAUSTIVE_DIM_CAP: usize = 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPoint {
    pub d: usize,
    /// Median wall-clock seconds over the timed repetitions.
    pub seconds: f64,
    pub mean_seconds: f64,
    pub repetitions: usize,
    /// Subsets evaluated per repetition (exhaustive method only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsets: Option<u64>,
    /// Set when the point was skipped (for example, projected memory
    /// above the cap); `seconds` is 0 and excluded from slope fits.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchFixed {
    pub n: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub points: Vec<BenchPoint>,
    pub method: SelectionMethod,
    pub fixed: BenchFixed,
    /// CPU model and math thread count, recorded for context.
    pub environment: String,
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::InvalidConfig("empty dimension grid".into()));
    }
    if dims.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(format!(
            "dimension grid must be strictly increasing, got {dims:?}"
        )));
    }
    if dims[0] == 0 {
        return Err(Error::InvalidConfig("dimension 0 is not meaningful".into()));
    }
    Ok(())
}

/// Human-readable host description: CPU model plus the math thread cap.
pub fn environment_description() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|text| {
            text.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|s| s.trim().to_string())
        })
        .unwrap_or_else(|| "unknown CPU".into());
    format!("{cpu}; {} math thread(s)", crate::linalg::math_threads())
}

fn median(sorted: &mut [f64]) -> f64 {
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

/// Replica dataset truncated or padded to exactly `d` candidates.
fn replica_at_dim(d: usize, n: usize, seed: u64) -> Result<EncodedMatrix> {
    let spec = SyntheticSpec {
        n,
        seed,
        ..SyntheticSpec::default()
    };
    let (mut table, _) = generate_dut_dataset(&spec)?;
    let base = table.candidate_names();
    if d < base.len() {
        table.drop_candidate_columns(&base[d..])?;
    } else if d > base.len() {
        table = pad_with_artificial_variables(&table, d - base.len(), seed)?;
    }
    fit_encode(&table)
}

/// Time `reps` runs of `work` after one discarded warm-up, returning
/// (median, mean) seconds.
fn time_reps(reps: usize, mut work: impl FnMut()) -> (f64, f64) {
    work();
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        work();
        times.push(start.elapsed().as_secs_f64());
    }
    let mean = times.iter().sum::<f64>() / reps as f64;
    (median(&mut times), mean)
}

/// Train + extract wall time across a dimension grid at fixed `n`.
/// Per dimension: one warm-up run is discarded, then the median of
/// `reps` timed runs is recorded. Data generation and encoding happen
/// outside the timed region.
pub fn run_scaling_benchmark(
    dims: &[usize],
    n: usize,
    config: &TrainConfig,
    reps: usize,
) -> Result<BenchResult> {
    check_dims(dims)?;
    if reps < 3 {
        return Err(Error::InvalidConfig(format!(
            "need at least 3 repetitions for a median, got {reps}"
        )));
    }
    let options = StackOptions::default();
    let mut points = Vec::with_capacity(dims.len());
    for &d in dims {
        // x, its mask product, and layer activations all scale with n·d.
        let projected = (n as u64) * (d as u64) * 8 * 4;
        if projected > MEMORY_CAP_BYTES {
            points.push(BenchPoint {
                d,
                seconds: 0.0,
                mean_seconds: 0.0,
                repetitions: 0,
                subsets: None,
                note: Some(format!(
                    "skipped: projected working set {projected} bytes over cap"
                )),
            });
            continue;
        }
        let data = replica_at_dim(d, n, config.seed)?;
        let mut failure = None;
        let (seconds, mean_seconds) = time_reps(reps, || {
            let run = || -> Result<()> {
                let mut stack =
                    LearnerStack::build(data.x.ncols(), data.y.ncols(), &options, *config)?;
                stack.train(&data)?;
                stack.extract_final_mask(&data)?;
                Ok(())
            };
            if let Err(e) = run() {
                failure = Some(e);
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        points.push(BenchPoint {
            d,
            seconds,
            mean_seconds,
            repetitions: reps,
            subsets: None,
            note: None,
        });
    }
    Ok(BenchResult {
        points,
        method: SelectionMethod::Mask,
        fixed: BenchFixed {
            n,
            epochs: config.epochs,
            batch_size: config.batch_size,
            seed: config.seed,
        },
        environment: environment_description(),
    })
}

/// Exhaustive-search wall time with `max_subset_size = d` at each grid
/// dimension (full 2^d − 1 enumeration), same warm-up/median protocol.
pub fn run_exhaustive_benchmark(dims: &[usize], n: usize, seed: u64) -> Result<BenchResult> {
    check_dims(dims)?;
    if let Some(&over) = dims.iter().find(|&&d| d > EXHAUSTIVE_DIM_CAP) {
        return Err(Error::InvalidConfig(format!(
            "dimension {over} exceeds the exhaustive cap of {EXHAUSTIVE_DIM_CAP}"
        )));
    }
    const REPS: usize = 3;
    let options = ExhaustiveOptions {
        split_seed: seed,
        ..ExhaustiveOptions::default()
    };
    let mut points = Vec::with_capacity(dims.len());
    for &d in dims {
        let data = replica_at_dim(d, n, seed)?;
        let mut evaluated = 0;
        let mut failure = None;
        let (seconds, mean_seconds) = time_reps(REPS, || {
            match exhaustive_search(&data, d, &options) {
                Ok(result) => evaluated = result.evaluated,
                Err(e) => failure = Some(e),
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        points.push(BenchPoint {
            d,
            seconds,
            mean_seconds,
            repetitions: REPS,
            subsets: Some(evaluated),
            note: None,
        });
    }
    Ok(BenchResult {
        points,
        method: SelectionMethod::Exhaustive,
        fixed: BenchFixed {
            n,
            epochs: 0,
            batch_size: 0,
            seed,
        },
        environment: environment_description(),
    })
}

/// Ordinary least-squares slope of `log(seconds)` against `log(d)` over
/// the successfully measured points. Needs at least 3.
pub fn fit_loglog_slope(result: &BenchResult) -> Result<f64> {
    let pts: Vec<(f64, f64)> = result
        .points
        .iter()
        .filter(|p| p.note.is_none() && p.seconds > 0.0)
        .map(|p| ((p.d as f64).ln(), p.seconds.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "slope fit needs at least 3 measured points, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

/// Two-column CSV (`d,seconds`) alongside the JSON serialization.
pub fn write_bench_csv(result: &BenchResult, path: &std::path::Path) -> Result<()> {
    let mut out = String::from("d,seconds\n");
    for p in result.points.iter().filter(|p| p.note.is_none()) {
        out.push_str(&format!("{},{}\n", p.d, p.seconds));
    }
    std::fs::write(path, out).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}
