//! Synthetic device-tuning datasets with a known relevant-variable set.
//!
//! The generator mimics a tuning log: 7 categorical knobs `t1…t7` with 8
//! levels each, 4 operating conditions (`c1`,`c2` categorical with 4
//! levels, `c3`,`c4` uniform on `[0,1]`), and a figure-of-merit response
//! that depends on `t1…t5` only. Everything is a pure function of the
//! seed, so datasets can be regenerated instead of stored.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Cell, ColumnKind, ColumnRole, ColumnSchema, RawTable};

pub const KNOB_COUNT: usize = 7;
pub const KNOB_LEVELS: usize = 8;
pub const CONDITION_LEVELS: usize = 4;

/// Which response surface the generator attaches to the drawn variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    /// Single figure of merit over five knobs: a nonlinearity, an
    /// interaction, a non-monotone term, and a weak linear term.
    /// `fom = sin(π·v1) + 2·v2·v3 + (v4 − 0.5)² + 0.5·v5 + ε`.
    ReplicaFom,
    /// Two targets with disjoint drivers: `y1 = 2·v1·v2 + ε`,
    /// `y2 = sin(π·v3) + ε`.
    TwoTargets,
}

impl ResponseKind {
    pub fn target_names(&self) -> Vec<String> {
        match self {
            ResponseKind::ReplicaFom => vec!["fom".into()],
            ResponseKind::TwoTargets => vec!["y1".into(), "y2".into()],
        }
    }

    pub fn relevant(&self) -> Vec<String> {
        let knobs = match self {
            ResponseKind::ReplicaFom => 5,
            ResponseKind::TwoTargets => 3,
        };
        (1..=knobs).map(|i| format!("t{i}")).collect()
    }

    pub fn description(&self) -> &'static str {
        match self {
            ResponseKind::ReplicaFom => {
                "fom = sin(pi*v1) + 2*v2*v3 + (v4 - 0.5)^2 + 0.5*v5 + noise, \
                 v_i = level(t_i)/8"
            }
            ResponseKind::TwoTargets => {
                "y1 = 2*v1*v2 + noise, y2 = sin(pi*v3) + noise, v_i = level(t_i)/8"
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    /// Standard deviation of the additive Gaussian response noise.
    pub noise_sd: f64,
    pub seed: u64,
    pub response: ResponseKind,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 100_000,
            noise_sd: 0.05,
            seed: 0,
            response: ResponseKind::ReplicaFom,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("row count must be positive".into()));
        }
        if !self.noise_sd.is_finite() || self.noise_sd < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise_sd must be a non-negative real, got {}",
                self.noise_sd
            )));
        }
        Ok(())
    }
}

/// Sidecar record naming the variables the response actually uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub relevant: Vec<String>,
    pub response: String,
    pub noise_sd: f64,
    pub seed: u64,
}

/// Knob level scaled into `(0, 1]`: `K1 → 1/8, …, K8 → 1`.
fn v_of(level_index: usize) -> f64 {
    (level_index + 1) as f64 / KNOB_LEVELS as f64
}

/// Draw a full dataset. Per row the draw order is fixed — knobs `t1…t7`,
/// then `c1,c2`, then `c3,c4`, then the noise sample(s) — so output is
/// byte-identical across runs with equal specs.
pub fn generate_dut_dataset(spec: &SyntheticSpec) -> Result<(RawTable, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd)
        .map_err(|e| Error::InvalidConfig(format!("bad noise level: {e}")))?;

    let mut schema = Vec::new();
    for i in 1..=KNOB_COUNT {
        schema.push(ColumnSchema::new(
            format!("t{i}"),
            ColumnKind::Categorical,
            ColumnRole::Candidate,
        ));
    }
    schema.push(ColumnSchema::new("c1", ColumnKind::Categorical, ColumnRole::Candidate));
    schema.push(ColumnSchema::new("c2", ColumnKind::Categorical, ColumnRole::Candidate));
    schema.push(ColumnSchema::new("c3", ColumnKind::Numerical, ColumnRole::Candidate));
    schema.push(ColumnSchema::new("c4", ColumnKind::Numerical, ColumnRole::Candidate));
    for name in spec.response.target_names() {
        schema.push(ColumnSchema::new(name, ColumnKind::Numerical, ColumnRole::Target));
    }

    let mut rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let mut levels = [0usize; KNOB_COUNT];
        for level in levels.iter_mut() {
            *level = rng.random_range(0..KNOB_LEVELS);
        }
        let cond1 = rng.random_range(0..CONDITION_LEVELS);
        let cond2 = rng.random_range(0..CONDITION_LEVELS);
        let cond3: f64 = rng.random_range(0.0..1.0);
        let cond4: f64 = rng.random_range(0.0..1.0);

        let mut row = Vec::with_capacity(schema.len());
        for &level in &levels {
            row.push(Cell::Text(format!("K{}", level + 1)));
        }
        row.push(Cell::Text(format!("L{}", cond1 + 1)));
        row.push(Cell::Text(format!("L{}", cond2 + 1)));
        row.push(Cell::Number(cond3));
        row.push(Cell::Number(cond4));

        let v = |i: usize| v_of(levels[i]);
        match spec.response {
            ResponseKind::ReplicaFom => {
                let fom = (PI * v(0)).sin()
                    + 2.0 * v(1) * v(2)
                    + (v(3) - 0.5) * (v(3) - 0.5)
                    + 0.5 * v(4)
                    + noise.sample(&mut rng);
                row.push(Cell::Number(fom));
            }
            ResponseKind::TwoTargets => {
                let y1 = 2.0 * v(0) * v(1) + noise.sample(&mut rng);
                let y2 = (PI * v(2)).sin() + noise.sample(&mut rng);
                row.push(Cell::Number(y1));
                row.push(Cell::Number(y2));
            }
        }
        rows.push(row);
    }

    let truth = GroundTruth {
        relevant: spec.response.relevant(),
        response: spec.response.description().to_string(),
        noise_sd: spec.noise_sd,
        seed: spec.seed,
    };
    Ok((RawTable::new(schema, rows)?, truth))
}

/// Append `extra` independent `U[0,1]` candidate columns named `a1…`,
/// leaving every existing column untouched. Used to scale the variable
/// count in benchmarks without changing the response.
pub fn pad_with_artificial_variables(
    table: &RawTable,
    extra: usize,
    seed: u64,
) -> Result<RawTable> {
    let mut padded = table.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 1..=extra {
        let values: Vec<f64> = (0..table.n_rows())
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        padded.push_numeric_column(&format!("a{i}"), &values)?;
    }
    Ok(padded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{fit_encode, load_table, write_csv};
    use crate::selection::evaluate_subset;

    fn spec(n: usize, noise_sd: f64, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n,
            noise_sd,
            seed,
            response: ResponseKind::ReplicaFom,
        }
    }

    #[test]
    fn equal_seeds_give_identical_tables() {
        let (a, truth_a) = generate_dut_dataset(&spec(200, 0.05, 3)).unwrap();
        let (b, truth_b) = generate_dut_dataset(&spec(200, 0.05, 3)).unwrap();
        assert_eq!(a.schema(), b.schema());
        assert_eq!(a.rows(), b.rows());
        assert_eq!(truth_a, truth_b);
        let (c, _) = generate_dut_dataset(&spec(200, 0.05, 4)).unwrap();
        assert_ne!(a.rows(), c.rows());
    }

    #[test]
    fn schema_and_ground_truth_shape() {
        let (table, truth) = generate_dut_dataset(&spec(10, 0.05, 0)).unwrap();
        let candidates = table.candidate_names();
        assert_eq!(
            candidates,
            vec!["t1", "t2", "t3", "t4", "t5", "t6", "t7", "c1", "c2", "c3", "c4"]
        );
        assert_eq!(table.target_names(), vec!["fom"]);
        assert_eq!(truth.relevant, vec!["t1", "t2", "t3", "t4", "t5"]);
        assert!(truth
            .relevant
            .iter()
            .all(|name| candidates.contains(name)));
    }

    fn knob_level(cell: &Cell) -> usize {
        match cell {
            Cell::Text(t) => t[1..].parse::<usize>().unwrap() - 1,
            other => panic!("knob cell {other:?}"),
        }
    }

    #[test]
    fn noiseless_response_recomputes_bit_for_bit() {
        let (table, _) = generate_dut_dataset(&spec(500, 0.0, 9)).unwrap();
        let fom_col = table.column_index("fom").unwrap();
        for row in table.rows() {
            let v: Vec<f64> = (0..5).map(|k| v_of(knob_level(&row[k]))).collect();
            let expected = (PI * v[0]).sin()
                + 2.0 * v[1] * v[2]
                + (v[3] - 0.5) * (v[3] - 0.5)
                + 0.5 * v[4];
            match row[fom_col] {
                Cell::Number(actual) => assert_eq!(actual, expected),
                ref other => panic!("target cell {other:?}"),
            }
        }
    }

    #[test]
    fn knob_levels_uniform_and_conditions_uncorrelated() {
        let (table, _) = generate_dut_dataset(&spec(100_000, 0.05, 1)).unwrap();
        let n = table.n_rows() as f64;

        // Binomial(n, 1/8): each level count within 3σ of the mean.
        let mean = n / KNOB_LEVELS as f64;
        let sd = (n * (1.0 / 8.0) * (7.0 / 8.0)).sqrt();
        for knob in 0..KNOB_COUNT {
            let mut counts = [0usize; KNOB_LEVELS];
            for row in table.rows() {
                counts[knob_level(&row[knob])] += 1;
            }
            for (level, &count) in counts.iter().enumerate() {
                assert!(
                    (count as f64 - mean).abs() <= 3.0 * sd,
                    "knob t{} level K{}: count {count}",
                    knob + 1,
                    level + 1
                );
            }
        }

        // c3 never enters the response; sample correlation stays tiny.
        let c3_col = table.column_index("c3").unwrap();
        let fom_col = table.column_index("fom").unwrap();
        let value = |cell: &Cell| match cell {
            Cell::Number(v) => *v,
            other => panic!("numeric cell {other:?}"),
        };
        let (mut sx, mut sy) = (0.0, 0.0);
        for row in table.rows() {
            sx += value(&row[c3_col]);
            sy += value(&row[fom_col]);
        }
        let (mx, my) = (sx / n, sy / n);
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for row in table.rows() {
            let dx = value(&row[c3_col]) - mx;
            let dy = value(&row[fom_col]) - my;
            sxy += dx * dy;
            sxx += dx * dx;
            syy += dy * dy;
        }
        let r = sxy / (sxx * syy).sqrt();
        assert!(r.abs() < 0.02, "correlation {r}");
    }

    #[test]
    fn relevant_knobs_beat_swapped_in_irrelevant_ones() {
        let (table, _) = generate_dut_dataset(&spec(4000, 0.0, 2)).unwrap();
        let data = fit_encode(&table).unwrap();
        let full: Vec<String> = (1..=5).map(|i| format!("t{i}")).collect();
        let baseline = evaluate_subset(&data, &full, 0).unwrap().validation_mse;
        for dropped in 0..5 {
            for spare in ["t6", "t7"] {
                let mut subset = full.clone();
                subset[dropped] = spare.to_string();
                let swapped = evaluate_subset(&data, &subset, 0).unwrap().validation_mse;
                assert!(
                    baseline < swapped,
                    "dropping t{} for {spare}: {baseline} vs {swapped}",
                    dropped + 1
                );
            }
        }
    }

    #[test]
    fn two_target_response_shape_and_truth() {
        let spec = SyntheticSpec {
            n: 300,
            noise_sd: 0.0,
            seed: 5,
            response: ResponseKind::TwoTargets,
        };
        let (table, truth) = generate_dut_dataset(&spec).unwrap();
        assert_eq!(table.target_names(), vec!["y1", "y2"]);
        assert_eq!(truth.relevant, vec!["t1", "t2", "t3"]);
        let y1_col = table.column_index("y1").unwrap();
        let y2_col = table.column_index("y2").unwrap();
        for row in table.rows() {
            let v: Vec<f64> = (0..3).map(|k| v_of(knob_level(&row[k]))).collect();
            assert_eq!(row[y1_col], Cell::Number(2.0 * v[0] * v[1]));
            assert_eq!(row[y2_col], Cell::Number((PI * v[2]).sin()));
        }
    }

    #[test]
    fn padding_appends_without_touching_originals() {
        let (table, _) = generate_dut_dataset(&spec(50, 0.05, 6)).unwrap();
        let same = pad_with_artificial_variables(&table, 0, 0).unwrap();
        assert_eq!(table.rows(), same.rows());
        assert_eq!(table.schema(), same.schema());

        let padded = pad_with_artificial_variables(&table, 389, 0).unwrap();
        assert_eq!(padded.candidate_names().len(), 400);
        assert_eq!(padded.candidate_names()[11], "a1");
        for (orig, new) in table.rows().iter().zip(padded.rows()) {
            assert_eq!(&new[..orig.len()], &orig[..]);
            for cell in &new[orig.len()..] {
                match cell {
                    Cell::Number(v) => assert!((0.0..1.0).contains(v)),
                    other => panic!("padded cell {other:?}"),
                }
            }
        }

        let again = pad_with_artificial_variables(&table, 389, 0).unwrap();
        assert_eq!(padded.rows(), again.rows());
    }

    #[test]
    fn padding_rejects_name_collisions() {
        let (table, _) = generate_dut_dataset(&spec(20, 0.05, 7)).unwrap();
        let padded = pad_with_artificial_variables(&table, 2, 0).unwrap();
        assert!(matches!(
            pad_with_artificial_variables(&padded, 1, 0),
            Err(Error::DuplicateColumn { .. })
        ));
    }

    #[test]
    fn generated_table_survives_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("replica.csv");
        let (table, _) = generate_dut_dataset(&spec(120, 0.05, 8)).unwrap();
        write_csv(&table, &path).unwrap();
        let reloaded = load_table(&path, Some(table.schema())).unwrap();
        assert_eq!(table.schema(), reloaded.schema());
        assert_eq!(table.rows(), reloaded.rows());
    }

    #[test]
    fn spec_validation() {
        assert!(generate_dut_dataset(&spec(0, 0.05, 0)).is_err());
        assert!(generate_dut_dataset(&spec(10, -0.1, 0)).is_err());
        assert!(generate_dut_dataset(&spec(10, f64::NAN, 0)).is_err());
    }
}
