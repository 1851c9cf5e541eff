//! Synthetic task generators and CSV ingestion.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lagrangian::LossKind;

/// Supervised pairs. `inputs` is examples x input_dim, `targets` is
/// examples x output_dim.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Grid,
    pub targets: Grid,
    pub name: String,
}

impl Dataset {
    pub fn new(inputs: Grid, targets: Grid, name: impl Into<String>) -> Result<Self> {
        if inputs.rows() != targets.rows() {
            return Err(Error::Shape(format!(
                "{} input rows vs {} target rows",
                inputs.rows(),
                targets.rows()
            )));
        }
        if !inputs.is_finite() || !targets.is_finite() {
            return Err(Error::NonFinite("dataset values".into()));
        }
        Ok(Dataset {
            inputs,
            targets,
            name: name.into(),
        })
    }

    pub fn num_examples(&self) -> usize {
        self.inputs.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.targets.cols()
    }
}

/// Class-label encoding of a binary task's targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetEncoding {
    /// Labels in {0, 1} (logistic outputs, cross-entropy).
    #[default]
    ZeroOne,
    /// Labels in {-1, +1} (tanh outputs with squared error).
    PlusMinusOne,
}

impl TargetEncoding {
    fn encode(self, label: usize) -> f64 {
        match self {
            TargetEncoding::ZeroOne => label as f64,
            TargetEncoding::PlusMinusOne => 2.0 * label as f64 - 1.0,
        }
    }

    /// Midpoint between the two encoded labels.
    pub fn midpoint(self) -> f64 {
        match self {
            TargetEncoding::ZeroOne => 0.5,
            TargetEncoding::PlusMinusOne => 0.0,
        }
    }
}

/// The 4-row XOR truth table with {0,1} targets.
pub fn gen_xor() -> Dataset {
    gen_xor_encoded(TargetEncoding::ZeroOne)
}

/// XOR with a selectable target encoding ({-1,+1} suits tanh outputs).
pub fn gen_xor_encoded(encoding: TargetEncoding) -> Dataset {
    let inputs = Grid::from_rows(&[
        vec![0.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
        vec![1.0, 1.0],
    ]);
    let targets = Grid::from_rows(&[
        vec![encoding.encode(0)],
        vec![encoding.encode(1)],
        vec![encoding.encode(1)],
        vec![encoding.encode(0)],
    ]);
    Dataset::new(inputs, targets, "xor").expect("xor table is well-formed")
}

/// Two interleaved half-circle arcs with Gaussian jitter. `n` must be even;
/// the first n/2 rows are class 0, the rest class 1. Deterministic in
/// `(n, noise, seed)`.
pub fn gen_two_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::Usage(format!("n must be even and >= 2, got {n}")));
    }
    if noise.is_nan() || noise < 0.0 {
        return Err(Error::Usage(format!("noise must be >= 0, got {noise}")));
    }
    let half = n / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = if noise > 0.0 {
        Some(Normal::new(0.0, noise).expect("noise is finite and positive"))
    } else {
        None
    };
    let sample = |rng: &mut ChaCha8Rng| jitter.map_or(0.0, |d| d.sample(rng));

    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for class in 0..2 {
        for i in 0..half {
            let t = if half == 1 {
                0.0
            } else {
                std::f64::consts::PI * i as f64 / (half - 1) as f64
            };
            let (mut px, mut py) = moon_point(class, t);
            px += sample(&mut rng);
            py += sample(&mut rng);
            rows.push(vec![px, py]);
            labels.push(vec![class as f64]);
        }
    }
    Dataset::new(Grid::from_rows(&rows), Grid::from_rows(&labels), "two_moons")
}

/// Noiseless arc parameterization; exposed so tests can check the noiseless
/// generator point-for-point.
pub fn moon_point(class: usize, t: f64) -> (f64, f64) {
    if class == 0 {
        (t.cos(), t.sin())
    } else {
        (1.0 - t.cos(), 0.5 - t.sin())
    }
}

/// Fraction of examples classified correctly, comparing per-dimension signs
/// of predictions and targets against the decision thresholds of the loss.
/// Squared-error predictions are compared at the encoding midpoint;
/// cross-entropy predictions are logits, compared at zero.
pub fn accuracy(
    predictions: &Grid,
    targets: &Grid,
    loss: LossKind,
    encoding: TargetEncoding,
) -> f64 {
    assert_eq!(predictions.rows(), targets.rows());
    assert_eq!(predictions.cols(), targets.cols());
    if predictions.rows() == 0 {
        return 0.0;
    }
    let pred_thr = match loss {
        LossKind::SquaredError => encoding.midpoint(),
        LossKind::CrossEntropyWithLogistic => 0.0,
    };
    let tgt_thr = encoding.midpoint();
    let correct = (0..predictions.rows())
        .filter(|&e| {
            predictions
                .row(e)
                .iter()
                .zip(targets.row(e))
                .all(|(p, t)| (*p > pred_thr) == (*t > tgt_thr))
        })
        .count();
    correct as f64 / predictions.rows() as f64
}

// CSV format: header `x0,..,x{d-1},y0,..,y{k-1}`, one example per line,
// floats emitted with 17 significant digits so a round-trip is lossless.

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    let d = dataset.input_dim();
    let k = dataset.output_dim();
    let header: Vec<String> = (0..d)
        .map(|i| format!("x{i}"))
        .chain((0..k).map(|i| format!("y{i}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for e in 0..dataset.num_examples() {
        let mut first = true;
        for v in dataset.inputs.row(e).iter().chain(dataset.targets.row(e)) {
            if !first {
                out.push(',');
            }
            first = false;
            // 1 leading + 16 fractional digits = 17 significant digits.
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    parse_csv(&text, name)
}

fn parse_csv(text: &str, name: String) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse {
            row: 1,
            msg: "empty file".into(),
        })?;
    let cols: Vec<&str> = header.split(',').collect();
    let d = cols.iter().take_while(|c| c.starts_with('x')).count();
    let k = cols.len() - d;
    if d == 0 || k == 0 {
        return Err(Error::Parse {
            row: 1,
            msg: format!("header must be x0..x{{d-1}},y0..y{{k-1}}, got `{header}`"),
        });
    }
    for (i, c) in cols.iter().enumerate() {
        let expect = if i < d {
            format!("x{i}")
        } else {
            format!("y{}", i - d)
        };
        if *c != expect {
            return Err(Error::Parse {
                row: 1,
                msg: format!("expected column `{expect}`, got `{c}`"),
            });
        }
    }

    let mut input_rows = Vec::new();
    let mut target_rows = Vec::new();
    for (lineno, line) in lines {
        let row = lineno + 1; // 1-based file line
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != d + k {
            return Err(Error::Parse {
                row,
                msg: format!("expected {} cells, got {}", d + k, cells.len()),
            });
        }
        let mut values = Vec::with_capacity(d + k);
        for cell in cells {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                msg: format!("non-numeric cell `{cell}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    msg: format!("non-finite cell `{cell}`"),
                });
            }
            values.push(v);
        }
        input_rows.push(values[..d].to_vec());
        target_rows.push(values[d..].to_vec());
    }
    Dataset::new(
        Grid::from_rows(&input_rows),
        Grid::from_rows(&target_rows),
        name,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn xor_truth_table() {
        let d = gen_xor();
        assert_eq!(d.num_examples(), 4);
        assert_eq!(d.inputs.row(0), &[0.0, 0.0]);
        assert_eq!(d.targets.row(0), &[0.0]);
        assert_eq!(d.inputs.row(1), &[0.0, 1.0]);
        assert_eq!(d.targets.row(1), &[1.0]);
        assert_eq!(d.targets.row(2), &[1.0]);
        assert_eq!(d.targets.row(3), &[0.0]);
        // each row exactly once
        let rows: Vec<&[f64]> = (0..4).map(|e| d.inputs.row(e)).collect();
        for a in 0..4 {
            for b in (a + 1)..4 {
                assert_ne!(rows[a], rows[b]);
            }
        }
    }

    #[test]
    fn xor_plus_minus_encoding() {
        let d = gen_xor_encoded(TargetEncoding::PlusMinusOne);
        assert_eq!(d.targets.row(0), &[-1.0]);
        assert_eq!(d.targets.row(1), &[1.0]);
    }

    #[test]
    fn noiseless_moons_lie_on_the_arcs() {
        let d = gen_two_moons(8, 0.0, 3).unwrap();
        for i in 0..4 {
            let t = std::f64::consts::PI * i as f64 / 3.0;
            let (x, y) = moon_point(0, t);
            assert_eq!(d.inputs.row(i), &[x, y]);
            let (x, y) = moon_point(1, t);
            assert_eq!(d.inputs.row(4 + i), &[x, y]);
        }
    }

    #[test]
    fn moons_are_deterministic() {
        let a = gen_two_moons(40, 0.1, 7).unwrap();
        let b = gen_two_moons(40, 0.1, 7).unwrap();
        assert_eq!(a, b);
        let c = gen_two_moons(40, 0.1, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn moons_class_counts() {
        let d = gen_two_moons(200, 0.1, 7).unwrap();
        let zeros = (0..200).filter(|&e| d.targets.get(e, 0) == 0.0).count();
        let ones = (0..200).filter(|&e| d.targets.get(e, 0) == 1.0).count();
        assert_eq!((zeros, ones), (100, 100));
    }

    #[test]
    fn odd_n_is_rejected() {
        assert!(gen_two_moons(7, 0.1, 1).is_err());
        assert!(gen_two_moons(0, 0.1, 1).is_err());
    }

    #[test]
    fn csv_round_trip_xor() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("xor.csv");
        let d = gen_xor();
        save_csv(&d, &path).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(d.inputs, back.inputs);
        assert_eq!(d.targets, back.targets);
    }

    #[test]
    fn csv_round_trip_moons_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("moons.csv");
        let d = gen_two_moons(200, 0.1, 7).unwrap();
        save_csv(&d, &path).unwrap();
        let back = load_csv(&path).unwrap();
        let max_diff = d
            .inputs
            .as_slice()
            .iter()
            .zip(back.inputs.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert_eq!(max_diff, 0.0);
        assert_eq!(d.targets, back.targets);
    }

    #[test]
    fn bad_cell_names_its_row() {
        let text = "x0,y0\n1.0,0.0\nfoo,1.0\n";
        let err = parse_csv(text, "t".into()).unwrap_err();
        match err {
            Error::Parse { row, msg } => {
                assert_eq!(row, 3);
                assert!(msg.contains("foo"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_column_count_is_rejected() {
        let text = "x0,y0\n1.0,0.0\n1.0\n";
        let err = parse_csv(text, "t".into()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, .. }));
    }

    #[test]
    fn accuracy_thresholds() {
        let preds = Grid::from_rows(&[vec![0.8], vec![0.2]]);
        let targets = Grid::from_rows(&[vec![1.0], vec![0.0]]);
        assert_eq!(
            accuracy(&preds, &targets, LossKind::SquaredError, TargetEncoding::ZeroOne),
            1.0
        );
        // as logits, 0.2 > 0 means class 1: second example is wrong
        assert_eq!(
            accuracy(
                &preds,
                &targets,
                LossKind::CrossEntropyWithLogistic,
                TargetEncoding::ZeroOne
            ),
            0.5
        );
    }

    proptest! {
        #[test]
        fn prop_csv_round_trip_is_lossless(
            rows in proptest::collection::vec(
                proptest::collection::vec(-1e12f64..1e12, 3), 1..20)
        ) {
            let inputs: Vec<Vec<f64>> = rows.iter().map(|r| r[..2].to_vec()).collect();
            let targets: Vec<Vec<f64>> = rows.iter().map(|r| r[2..].to_vec()).collect();
            let d = Dataset::new(
                Grid::from_rows(&inputs),
                Grid::from_rows(&targets),
                "prop",
            ).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("prop.csv");
            save_csv(&d, &path).unwrap();
            let back = load_csv(&path).unwrap();
            prop_assert_eq!(d.inputs, back.inputs);
            prop_assert_eq!(d.targets, back.targets);
        }
    }
}
