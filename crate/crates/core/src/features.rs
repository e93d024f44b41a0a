//! Windowed traffic features: partitions a packet trace into fixed-length
//! time windows and turns each non-empty window into one six-dimensional
//! sample with a binary label.
//!
//! The six features, in order:
//!
//! 1. packets per second
//! 2. bytes per second
//! 3. distinct source nodes
//! 4. fraction of packets destined to the server
//! 5. mean inter-arrival time within the window (a single-packet window
//!    reports the window length)
//! 6. mean packet size in bytes
//!
//! Rate, volume, source diversity, directionality, timing, size: together
//! they separate flood traffic from sensor chatter. The list is versioned in
//! the dataset file header so it can be swapped without ambiguity.

use std::collections::HashSet;

use thiserror::Error;

use crate::simulator::{NodeRole, PacketRecord, Phase};

/// Number of features per sample.
pub const FEATURE_COUNT: usize = 6;

/// Version tag written into dataset headers.
pub const FEATURES_VERSION: &str = "v1";

/// Short names of the features, index-aligned, recorded in dataset headers.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "pps",
    "bytes_per_s",
    "distinct_sources",
    "server_dst_frac",
    "mean_iat_s",
    "mean_size_bytes",
];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("trace is not timestamp-sorted (record {index})")]
    UnsortedTrace { index: usize },
    #[error("invalid window spec: {0}")]
    InvalidSpec(&'static str),
    #[error("sample set is empty")]
    EmptySampleSet,
}

/// One feature vector with its label. Extraction always emits
/// [`FEATURE_COUNT`] features; the vector is raw until normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    /// 0 = normal, 1 = attack.
    pub label: u8,
    pub window_start_s: f64,
}

/// Windowing parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    pub window_len_s: f64,
    /// Minimum fraction of attack-phase packets for an attack label.
    pub attack_frac_threshold: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec { window_len_s: 0.5, attack_frac_threshold: 0.5 }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if !(self.window_len_s > 0.0 && self.window_len_s.is_finite()) {
            return Err(FeatureError::InvalidSpec("window_len_s must be positive"));
        }
        if !(self.attack_frac_threshold > 0.0 && self.attack_frac_threshold <= 1.0) {
            return Err(FeatureError::InvalidSpec("attack_frac_threshold must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Per-feature min/max fitted on the training split only.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

#[derive(Debug)]
struct WindowAccumulator {
    index: u64,
    count: usize,
    attack_count: usize,
    to_server: usize,
    bytes: u64,
    first_t: f64,
    last_t: f64,
    sources: HashSet<(NodeRole, u16)>,
}

impl WindowAccumulator {
    fn new(index: u64) -> Self {
        WindowAccumulator {
            index,
            count: 0,
            attack_count: 0,
            to_server: 0,
            bytes: 0,
            first_t: 0.0,
            last_t: 0.0,
            sources: HashSet::new(),
        }
    }

    fn add(&mut self, p: &PacketRecord) {
        if self.count == 0 {
            self.first_t = p.timestamp;
        }
        self.last_t = p.timestamp;
        self.count += 1;
        if p.phase == Phase::Attack {
            self.attack_count += 1;
        }
        if p.dst.role == NodeRole::Server {
            self.to_server += 1;
        }
        self.bytes += u64::from(p.size_bytes);
        self.sources.insert((p.src.role, p.src.index));
    }

    fn finish(&self, spec: &WindowSpec) -> Sample {
        let n = self.count as f64;
        let w = spec.window_len_s;
        let mean_iat = if self.count >= 2 {
            (self.last_t - self.first_t) / (n - 1.0)
        } else {
            w
        };
        let attack_frac = self.attack_count as f64 / n;
        Sample {
            features: vec![
                n / w,
                self.bytes as f64 / w,
                self.sources.len() as f64,
                self.to_server as f64 / n,
                mean_iat,
                self.bytes as f64 / n,
            ],
            label: u8::from(attack_frac >= spec.attack_frac_threshold),
            window_start_s: self.index as f64 * w,
        }
    }
}

/// Partitions `[0, trace_end]` into consecutive windows of `window_len_s` and
/// emits one raw sample per non-empty window. The trace must be
/// timestamp-sorted; empty windows are skipped.
pub fn extract_windows(
    trace: &[PacketRecord],
    spec: &WindowSpec,
) -> Result<Vec<Sample>, FeatureError> {
    spec.validate()?;
    let mut samples = Vec::new();
    let mut current: Option<WindowAccumulator> = None;
    let mut prev_t = f64::NEG_INFINITY;
    for (i, p) in trace.iter().enumerate() {
        if p.timestamp < prev_t {
            return Err(FeatureError::UnsortedTrace { index: i });
        }
        prev_t = p.timestamp;
        let index = (p.timestamp / spec.window_len_s).floor() as u64;
        match current.as_mut() {
            Some(acc) if acc.index == index => acc.add(p),
            _ => {
                if let Some(done) = current.take() {
                    samples.push(done.finish(spec));
                }
                let mut acc = WindowAccumulator::new(index);
                acc.add(p);
                current = Some(acc);
            }
        }
    }
    if let Some(done) = current.take() {
        samples.push(done.finish(spec));
    }
    Ok(samples)
}

/// Computes per-feature min/max over the given samples.
pub fn fit_normalization(samples: &[Sample]) -> Result<NormalizationStats, FeatureError> {
    let first = samples.first().ok_or(FeatureError::EmptySampleSet)?;
    let dim = first.features.len();
    let mut mins = vec![f64::INFINITY; dim];
    let mut maxs = vec![f64::NEG_INFINITY; dim];
    for s in samples {
        assert_eq!(s.features.len(), dim, "inconsistent feature dimensions");
        for (i, &x) in s.features.iter().enumerate() {
            mins[i] = mins[i].min(x);
            maxs[i] = maxs[i].max(x);
        }
    }
    Ok(NormalizationStats { mins, maxs })
}

/// Min-max scaling into [0, 1], clamped; a degenerate feature
/// (`max == min`) maps to 0.5 everywhere.
pub fn apply_normalization(samples: &[Sample], stats: &NormalizationStats) -> Vec<Sample> {
    samples
        .iter()
        .map(|s| {
            assert_eq!(s.features.len(), stats.mins.len(), "inconsistent feature dimensions");
            let features = s
                .features
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let (lo, hi) = (stats.mins[i], stats.maxs[i]);
                    if hi == lo {
                        0.5
                    } else {
                        ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
                    }
                })
                .collect();
            Sample { features, label: s.label, window_start_s: s.window_start_s }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{NodeId, PacketKind};
    use proptest::prelude::*;

    fn packet(t: f64, src: NodeId, dst: NodeId, size: u32, kind: PacketKind, phase: Phase) -> PacketRecord {
        PacketRecord { timestamp: t, src, dst, size_bytes: size, kind, phase }
    }

    fn sensor_packet(t: f64, size: u32) -> PacketRecord {
        packet(t, NodeId::sensor(1), NodeId::server(), size, PacketKind::SensorData, Phase::Normal)
    }

    #[test]
    fn uniform_one_pps_trace_yields_hand_computed_features() {
        // one 100-byte packet per second for 100 s, 10 s windows
        let trace: Vec<PacketRecord> =
            (0..100).map(|i| sensor_packet(i as f64 + 0.5, 100)).collect();
        let spec = WindowSpec { window_len_s: 10.0, attack_frac_threshold: 0.5 };
        let samples = extract_windows(&trace, &spec).unwrap();
        assert_eq!(samples.len(), 10);
        for (k, s) in samples.iter().enumerate() {
            assert_eq!(s.features[0], 1.0, "pps");
            assert_eq!(s.features[1], 100.0, "bytes per second");
            assert_eq!(s.features[2], 1.0, "distinct sources");
            assert_eq!(s.features[3], 1.0, "server fraction");
            assert_eq!(s.features[4], 1.0, "mean inter-arrival");
            assert_eq!(s.features[5], 100.0, "mean size");
            assert_eq!(s.label, 0);
            assert_eq!(s.window_start_s, k as f64 * 10.0);
        }
    }

    #[test]
    fn single_packet_window_reports_window_length_as_iat() {
        let trace = vec![sensor_packet(0.2, 80)];
        let spec = WindowSpec::default();
        let samples = extract_windows(&trace, &spec).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].features[0], 2.0);
        assert_eq!(samples[0].features[4], spec.window_len_s);
        assert_eq!(samples[0].label, 0);
    }

    #[test]
    fn flood_only_window_counts_three_attacker_sources() {
        let mut trace = Vec::new();
        for i in 0..30 {
            let attacker = NodeId::attacker(i % 3 + 1);
            trace.push(packet(
                0.01 * f64::from(i),
                attacker,
                NodeId::server(),
                700,
                PacketKind::Flood,
                Phase::Attack,
            ));
        }
        let samples = extract_windows(&trace, &WindowSpec::default()).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].features[2], 3.0);
        assert_eq!(samples[0].label, 1);
    }

    #[test]
    fn mixed_window_label_follows_attack_fraction_threshold() {
        // 2 attack + 2 normal packets: fraction 0.5 meets the default threshold
        let trace = vec![
            packet(0.0, NodeId::sensor(1), NodeId::server(), 100, PacketKind::SensorData, Phase::Normal),
            packet(0.1, NodeId::attacker(1), NodeId::server(), 700, PacketKind::Flood, Phase::Attack),
            packet(0.2, NodeId::attacker(1), NodeId::server(), 700, PacketKind::Flood, Phase::Attack),
            packet(0.3, NodeId::sensor(2), NodeId::server(), 100, PacketKind::SensorData, Phase::Normal),
        ];
        let samples = extract_windows(&trace, &WindowSpec::default()).unwrap();
        assert_eq!(samples[0].label, 1);
        let strict = WindowSpec { attack_frac_threshold: 0.75, ..WindowSpec::default() };
        let samples = extract_windows(&trace, &strict).unwrap();
        assert_eq!(samples[0].label, 0);
    }

    #[test]
    fn empty_windows_are_skipped_and_no_packet_is_dropped() {
        let trace = vec![
            sensor_packet(0.1, 50),
            sensor_packet(0.2, 50),
            // 3 empty windows in between
            sensor_packet(2.1, 50),
        ];
        let spec = WindowSpec::default();
        let samples = extract_windows(&trace, &spec).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].window_start_s, 0.0);
        assert_eq!(samples[1].window_start_s, 2.0);
        let total: f64 = samples
            .iter()
            .map(|s| s.features[0] * spec.window_len_s)
            .sum();
        assert_eq!(total.round() as usize, trace.len());
    }

    #[test]
    fn unsorted_trace_is_rejected() {
        let trace = vec![sensor_packet(1.0, 50), sensor_packet(0.5, 50)];
        assert!(matches!(
            extract_windows(&trace, &WindowSpec::default()),
            Err(FeatureError::UnsortedTrace { index: 1 })
        ));
    }

    #[test]
    fn empty_trace_gives_no_samples() {
        let samples = extract_windows(&[], &WindowSpec::default()).unwrap();
        assert!(samples.is_empty());
    }

    #[test]
    fn normalization_stats_match_hand_computation() {
        let samples = vec![
            Sample { features: vec![1.0, -2.0, 5.0], label: 0, window_start_s: 0.0 },
            Sample { features: vec![3.0, 0.0, 5.0], label: 1, window_start_s: 0.5 },
            Sample { features: vec![2.0, 4.0, 5.0], label: 0, window_start_s: 1.0 },
        ];
        let stats = fit_normalization(&samples).unwrap();
        assert_eq!(stats.mins, vec![1.0, -2.0, 5.0]);
        assert_eq!(stats.maxs, vec![3.0, 4.0, 5.0]);

        let single = fit_normalization(&samples[..1]).unwrap();
        assert_eq!(single.mins, single.maxs);

        let mut reversed = samples.clone();
        reversed.reverse();
        assert_eq!(fit_normalization(&reversed).unwrap(), stats);
    }

    #[test]
    fn fit_normalization_rejects_empty_input() {
        assert!(matches!(fit_normalization(&[]), Err(FeatureError::EmptySampleSet)));
    }

    #[test]
    fn apply_normalization_maps_endpoints_clamps_and_handles_degenerate() {
        let train = vec![
            Sample { features: vec![1.0, 7.0], label: 0, window_start_s: 0.0 },
            Sample { features: vec![3.0, 7.0], label: 1, window_start_s: 0.5 },
        ];
        let stats = fit_normalization(&train).unwrap();
        let normalized = apply_normalization(&train, &stats);
        assert_eq!(normalized[0].features, vec![0.0, 0.5]);
        assert_eq!(normalized[1].features, vec![1.0, 0.5]);

        let outside = vec![Sample { features: vec![-4.0, 9.0], label: 0, window_start_s: 1.0 }];
        let clamped = apply_normalization(&outside, &stats);
        assert_eq!(clamped[0].features, vec![0.0, 0.5]);
    }

    #[test]
    fn normalization_is_idempotent_on_unit_interval_stats() {
        let samples = vec![
            Sample { features: vec![0.0, 0.25], label: 0, window_start_s: 0.0 },
            Sample { features: vec![1.0, 0.75], label: 1, window_start_s: 0.5 },
        ];
        let unit = NormalizationStats { mins: vec![0.0, 0.0], maxs: vec![1.0, 1.0] };
        let once = apply_normalization(&samples, &unit);
        let twice = apply_normalization(&once, &unit);
        assert_eq!(once, twice);
    }

    proptest! {
        #[test]
        fn extraction_conserves_packets_and_emits_six_features(
            gaps in proptest::collection::vec(0.001..2.0f64, 1..200),
        ) {
            let mut t = 0.0;
            let trace: Vec<PacketRecord> = gaps
                .iter()
                .map(|g| {
                    t += g;
                    sensor_packet(t, 120)
                })
                .collect();
            let spec = WindowSpec::default();
            let samples = extract_windows(&trace, &spec).unwrap();
            let total: f64 = samples.iter().map(|s| s.features[0] * spec.window_len_s).sum();
            prop_assert_eq!(total.round() as usize, trace.len());
            for s in &samples {
                prop_assert_eq!(s.features.len(), FEATURE_COUNT);
            }
            let starts: Vec<f64> = samples.iter().map(|s| s.window_start_s).collect();
            prop_assert!(starts.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn normalized_features_always_land_in_unit_interval(
            raw in proptest::collection::vec(
                proptest::collection::vec(-1e6..1e6f64, 3),
                2..40,
            ),
        ) {
            let samples: Vec<Sample> = raw
                .iter()
                .map(|f| Sample { features: f.clone(), label: 0, window_start_s: 0.0 })
                .collect();
            let stats = fit_normalization(&samples[..samples.len() / 2 + 1]).unwrap();
            for s in apply_normalization(&samples, &stats) {
                for x in s.features {
                    prop_assert!((0.0..=1.0).contains(&x));
                }
            }
        }
    }
}
