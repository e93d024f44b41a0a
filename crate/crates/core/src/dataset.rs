//! Dataset persistence and the deterministic train/validation/test split.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::{Sample, WindowSpec, FEATURE_COUNT, FEATURE_NAMES, FEATURES_VERSION};

/// Fixed column header of the dataset CSV format.
pub const DATASET_HEADER: &str = "x1,x2,x3,x4,x5,x6,label,window_start_s";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid split spec: {0}")]
    InvalidSpec(String),
    #[error("need at least 10 samples to split, got {0}")]
    TooFewSamples(usize),
    #[error("stratified split requires both classes to be present")]
    MissingClass,
    #[error("dataset io: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Split fractions and shuffling seed. `val_frac` and `test_frac` each get
/// `round(frac * N)` samples; training takes the remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { val_frac: 0.15, test_frac: 0.15, seed: 1, stratified: true }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(self.val_frac >= 0.0 && self.val_frac.is_finite())
            || !(self.test_frac >= 0.0 && self.test_frac.is_finite())
        {
            return Err(DatasetError::InvalidSpec(format!(
                "fractions must be non-negative, got val={} test={}",
                self.val_frac, self.test_frac
            )));
        }
        if self.val_frac + self.test_frac >= 1.0 {
            return Err(DatasetError::InvalidSpec(format!(
                "val_frac + test_frac must stay below 1, got {}",
                self.val_frac + self.test_frac
            )));
        }
        Ok(())
    }
}

/// Returns `(attack, normal)` counts.
pub fn class_counts(samples: &[Sample]) -> (usize, usize) {
    let attack = samples.iter().filter(|s| s.label == 1).count();
    (attack, samples.len() - attack)
}

/// Allocates `target` picks across classes proportionally to the class sizes
/// in `available`; exact totals via largest remainder.
fn proportional_allocation(available: &[usize], target: usize) -> Vec<usize> {
    let total: usize = available.iter().sum();
    let quotas: Vec<f64> = available
        .iter()
        .map(|&n| target as f64 * n as f64 / total as f64)
        .collect();
    let mut alloc: Vec<usize> = quotas
        .iter()
        .zip(available)
        .map(|(&q, &cap)| (q.floor() as usize).min(cap))
        .collect();
    let mut assigned: usize = alloc.iter().sum();
    // Hand out the remainder, biggest fractional part first, largest class
    // breaking ties, skipping exhausted classes.
    let mut order: Vec<usize> = (0..available.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa)
            .then_with(|| available[b].cmp(&available[a]))
            .then_with(|| a.cmp(&b))
    });
    while assigned < target {
        let before = assigned;
        for &c in &order {
            if assigned == target {
                break;
            }
            if alloc[c] < available[c] {
                alloc[c] += 1;
                assigned += 1;
            }
        }
        assert!(assigned > before, "allocation target exceeds availability");
    }
    alloc
}

/// Splits into (train, validation, test) by seeded shuffle;
/// `n_val = round(val_frac * N)`, `n_test = round(test_frac * N)`, training
/// takes the rest. Stratified mode keeps each split's class mix proportional
/// to the whole set (within one sample per class). Splits preserve the input
/// order internally and are disjoint and exhaustive.
pub fn split(
    samples: &[Sample],
    spec: &SplitSpec,
) -> Result<(Vec<Sample>, Vec<Sample>, Vec<Sample>), DatasetError> {
    spec.validate()?;
    let n = samples.len();
    if n < 10 {
        return Err(DatasetError::TooFewSamples(n));
    }
    let n_val = (spec.val_frac * n as f64).round() as usize;
    let n_test = (spec.test_frac * n as f64).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut val_idx: Vec<usize> = Vec::with_capacity(n_val);
    let mut test_idx: Vec<usize> = Vec::with_capacity(n_test);
    let mut train_idx: Vec<usize> = Vec::with_capacity(n - n_val - n_test);

    if spec.stratified {
        let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, s) in samples.iter().enumerate() {
            classes[usize::from(s.label)].push(i);
        }
        if classes[0].is_empty() || classes[1].is_empty() {
            return Err(DatasetError::MissingClass);
        }
        for class in &mut classes {
            class.shuffle(&mut rng);
        }
        let sizes = [classes[0].len(), classes[1].len()];
        let val_alloc = proportional_allocation(&sizes, n_val);
        let remaining = [sizes[0] - val_alloc[0], sizes[1] - val_alloc[1]];
        let test_alloc = proportional_allocation(&remaining, n_test);
        for (c, class) in classes.iter().enumerate() {
            let (v, t) = (val_alloc[c], test_alloc[c]);
            val_idx.extend(&class[..v]);
            test_idx.extend(&class[v..v + t]);
            train_idx.extend(&class[v + t..]);
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        val_idx.extend(&order[..n_val]);
        test_idx.extend(&order[n_val..n_val + n_test]);
        train_idx.extend(&order[n_val + n_test..]);
    }

    let collect = |mut idx: Vec<usize>| -> Vec<Sample> {
        idx.sort_unstable();
        idx.into_iter().map(|i| samples[i].clone()).collect()
    };
    Ok((collect(train_idx), collect(val_idx), collect(test_idx)))
}

fn header_comment(window: &WindowSpec) -> String {
    format!(
        "# dataset={FEATURES_VERSION} features={} window_len_s={} attack_frac_threshold={}",
        FEATURE_NAMES.join(","),
        window.window_len_s,
        window.attack_frac_threshold,
    )
}

/// Writes samples as CSV with a comment line recording the feature
/// definitions version and the window spec. Lossless round trip.
pub fn save_dataset(
    samples: &[Sample],
    window: &WindowSpec,
    path: &Path,
) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header_comment(window))?;
    writeln!(w, "{DATASET_HEADER}")?;
    for s in samples {
        assert_eq!(s.features.len(), FEATURE_COUNT, "dataset files hold 6-feature samples");
        for x in &s.features {
            write!(w, "{x},")?;
        }
        writeln!(w, "{},{}", s.label, s.window_start_s)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset CSV, validating the 6-feature width and binary labels.
pub fn load_dataset(path: &Path) -> Result<Vec<Sample>, DatasetError> {
    let reader = BufReader::new(File::open(path)?);
    let mut samples = Vec::new();
    let mut seen_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if !seen_header {
            if line != DATASET_HEADER {
                return Err(DatasetError::Parse {
                    line: lineno,
                    msg: format!("unexpected header `{line}`"),
                });
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != FEATURE_COUNT + 2 {
            return Err(DatasetError::Parse {
                line: lineno,
                msg: format!("expected {} fields, got {}", FEATURE_COUNT + 2, fields.len()),
            });
        }
        let mut features = Vec::with_capacity(FEATURE_COUNT);
        for f in &fields[..FEATURE_COUNT] {
            let x: f64 = f.parse().map_err(|e| DatasetError::Parse {
                line: lineno,
                msg: format!("bad feature value: {e}"),
            })?;
            if !x.is_finite() {
                return Err(DatasetError::Parse {
                    line: lineno,
                    msg: format!("non-finite feature value {x}"),
                });
            }
            features.push(x);
        }
        let label = match fields[FEATURE_COUNT] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(DatasetError::Parse {
                    line: lineno,
                    msg: format!("label must be 0 or 1, got `{other}`"),
                })
            }
        };
        let window_start_s: f64 = fields[FEATURE_COUNT + 1].parse().map_err(|e| {
            DatasetError::Parse { line: lineno, msg: format!("bad window start: {e}") }
        })?;
        samples.push(Sample { features, label, window_start_s });
    }
    if !seen_header {
        return Err(DatasetError::Parse { line: 1, msg: "missing dataset header".into() });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    fn synthetic(n_attack: usize, n_normal: usize) -> Vec<Sample> {
        let mut samples = Vec::with_capacity(n_attack + n_normal);
        for i in 0..n_attack + n_normal {
            let label = u8::from(i < n_attack);
            samples.push(Sample {
                features: vec![i as f64, 1.0, 2.0, 3.0, 4.0, 5.0],
                label,
                window_start_s: i as f64 * 0.5,
            });
        }
        samples
    }

    #[test]
    fn split_reproduces_the_reference_sizes_at_3305() {
        let samples = synthetic(2121, 1184);
        let spec = SplitSpec::default();
        let (train, val, test) = split(&samples, &spec).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (2313, 496, 496));

        let unstratified = SplitSpec { stratified: false, ..spec };
        let (train, val, test) = split(&samples, &unstratified).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (2313, 496, 496));
    }

    #[test]
    fn split_sizes_are_exact_for_awkward_class_mixes() {
        // class rounding that would drift under naive per-class round()
        for (a, b) in [(2129, 1176), (3304, 1), (1653, 1652)] {
            let samples = synthetic(a, b);
            let (train, val, test) = split(&samples, &SplitSpec::default()).unwrap();
            assert_eq!(
                (train.len(), val.len(), test.len()),
                (2313, 496, 496),
                "mix {a}/{b}"
            );
        }
    }

    #[test]
    fn split_of_ten_samples_is_6_2_2_and_partitions_the_input() {
        let samples = synthetic(5, 5);
        let (train, val, test) = split(&samples, &SplitSpec::default()).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (6, 2, 2));
        let mut all: Vec<&Sample> = train.iter().chain(&val).chain(&test).collect();
        all.sort_by(|x, y| x.window_start_s.total_cmp(&y.window_start_s));
        let original: Vec<&Sample> = samples.iter().collect();
        assert_eq!(all, original);
    }

    #[test]
    fn stratified_split_keeps_class_proportions_close() {
        let samples = synthetic(640, 360);
        let (train, val, test) = split(&samples, &SplitSpec::default()).unwrap();
        for part in [&train, &val, &test] {
            let (attack, _) = class_counts(part);
            let frac = attack as f64 / part.len() as f64;
            assert!((frac - 0.64).abs() <= 0.02, "attack fraction {frac}");
        }
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let samples = synthetic(300, 200);
        let spec = SplitSpec::default();
        let a = split(&samples, &spec).unwrap();
        let b = split(&samples, &spec).unwrap();
        assert_eq!(a, b);
        let c = split(&samples, &SplitSpec { seed: 2, ..spec }).unwrap();
        assert_ne!(a.1, c.1, "different seeds should pick different validation sets");
    }

    #[test]
    fn split_rejects_bad_specs_and_degenerate_inputs() {
        let samples = synthetic(5, 5);
        assert!(matches!(
            split(&samples, &SplitSpec { val_frac: 0.6, test_frac: 0.5, ..SplitSpec::default() }),
            Err(DatasetError::InvalidSpec(_))
        ));
        assert!(matches!(
            split(&samples[..4], &SplitSpec::default()),
            Err(DatasetError::TooFewSamples(4))
        ));
        assert!(matches!(
            split(&synthetic(10, 0), &SplitSpec::default()),
            Err(DatasetError::MissingClass)
        ));
        // without stratification a single-class set is fine
        assert!(split(&synthetic(10, 0), &SplitSpec { stratified: false, ..SplitSpec::default() })
            .is_ok());
    }

    #[test]
    fn class_counts_hand_cases() {
        assert_eq!(class_counts(&[]), (0, 0));
        assert_eq!(class_counts(&synthetic(3, 1)), (3, 1));
    }

    #[test]
    fn dataset_round_trip_is_lossless() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("dataset.csv");
        let samples = vec![
            Sample {
                features: vec![0.1, 0.2, 3.0, 0.5, 0.0625, 128.5],
                label: 0,
                window_start_s: 0.0,
            },
            Sample {
                features: vec![4216.0, 3.2e6, 8.0, 0.997, 0.000236, 768.25],
                label: 1,
                window_start_s: 300.0,
            },
        ];
        save_dataset(&samples, &WindowSpec::default(), &path).unwrap();
        let restored = load_dataset(&path).unwrap();
        assert_eq!(samples, restored);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# dataset=v1 features=pps,"));
    }

    #[test]
    fn loader_rejects_wrong_width_and_bad_labels() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");

        std::fs::write(&path, format!("{DATASET_HEADER}\n1,2,3,4,5\n")).unwrap();
        match load_dataset(&path).unwrap_err() {
            DatasetError::Parse { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("fields"));
            }
            other => panic!("unexpected error {other:?}"),
        }

        std::fs::write(&path, format!("{DATASET_HEADER}\n1,2,3,4,5,6,2,0.0\n")).unwrap();
        match load_dataset(&path).unwrap_err() {
            DatasetError::Parse { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains('2'));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn split_partitions_any_dataset(
            n_attack in 5usize..120,
            n_normal in 5usize..120,
            seed in 0u64..20,
            stratified in proptest::bool::ANY,
        ) {
            let samples = synthetic(n_attack, n_normal);
            let n = samples.len();
            let spec = SplitSpec { seed, stratified, ..SplitSpec::default() };
            let (train, val, test) = split(&samples, &spec).unwrap();
            prop_assert_eq!(val.len(), (0.15 * n as f64).round() as usize);
            prop_assert_eq!(test.len(), (0.15 * n as f64).round() as usize);
            prop_assert_eq!(train.len() + val.len() + test.len(), n);
            // disjoint and exhaustive: window_start_s is unique per sample here
            let mut starts: Vec<u64> = train
                .iter()
                .chain(&val)
                .chain(&test)
                .map(|s| s.window_start_s.to_bits())
                .collect();
            starts.sort_unstable();
            starts.dedup();
            prop_assert_eq!(starts.len(), n);
        }
    }
}
