//! Deterministic event-driven simulation of a small IoT deployment: sensor
//! clients reporting to one server relay, optionally attacked by up to three
//! UDP-flooding hosts. The output is a timestamp-sorted, ground-truth-labelled
//! packet trace; no sockets are involved.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Delay between a sensor report and the server's reply.
pub const SERVICE_DELAY_S: f64 = 0.001;

/// Fixed column header of the trace CSV format.
pub const TRACE_HEADER: &str = "timestamp,src_role,src_idx,dst_role,dst_idx,size_bytes,kind,phase";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario config: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("trace io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("trace timestamps out of order at line {line}")]
    OutOfOrder { line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRole {
    Sensor,
    Server,
    Attacker,
}

impl NodeRole {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeRole::Sensor => "sensor",
            NodeRole::Server => "server",
            NodeRole::Attacker => "attacker",
        }
    }
}

/// Address of one simulated node. Sensors and attackers are numbered from 1;
/// the single server is index 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId {
    pub role: NodeRole,
    pub index: u16,
}

impl NodeId {
    pub fn server() -> Self {
        NodeId { role: NodeRole::Server, index: 0 }
    }

    pub fn sensor(index: u16) -> Self {
        NodeId { role: NodeRole::Sensor, index }
    }

    pub fn attacker(index: u16) -> Self {
        NodeId { role: NodeRole::Attacker, index }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketKind {
    SensorData,
    ServerReply,
    Flood,
}

impl PacketKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::SensorData => "sensor_data",
            PacketKind::ServerReply => "server_reply",
            PacketKind::Flood => "flood",
        }
    }
}

/// Ground-truth label attached to every packet at generation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Normal,
    Attack,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Normal => "normal",
            Phase::Attack => "attack",
        }
    }
}

/// One simulated packet event.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub timestamp: f64,
    pub src: NodeId,
    pub dst: NodeId,
    pub size_bytes: u32,
    pub kind: PacketKind,
    pub phase: Phase,
}

/// Scenario parameters. Sizes are sampled uniformly from the inclusive byte
/// ranges; flood arrivals form a Poisson process per attacker restricted to
/// the attack window.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_sensors: u16,
    /// 0 disables the attack entirely; at most 3 flooding hosts.
    pub n_attackers: u16,
    pub duration_s: f64,
    /// Mean interval between reports of one sensor.
    pub sensor_period_s: f64,
    /// Relative jitter on the report interval, in [0, 1).
    pub sensor_jitter_frac: f64,
    /// Flood packets per second, per attacker.
    pub flood_rate_pps: f64,
    pub attack_start_s: f64,
    pub attack_end_s: f64,
    pub sensor_bytes_min: u32,
    pub sensor_bytes_max: u32,
    pub flood_bytes_min: u32,
    pub flood_bytes_max: u32,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    /// Desk-scale default: ~3310 half-second windows, ~64% of them inside the
    /// attack window, ~2.2 million flood packets. See the features module for
    /// how this calibration is consumed downstream.
    fn default() -> Self {
        ScenarioConfig {
            n_sensors: 4,
            n_attackers: 3,
            duration_s: 1655.0,
            sensor_period_s: 0.5,
            sensor_jitter_frac: 0.3,
            flood_rate_pps: 700.0,
            attack_start_s: 300.0,
            attack_end_s: 1360.5,
            sensor_bytes_min: 64,
            sensor_bytes_max: 256,
            flood_bytes_min: 512,
            flood_bytes_max: 1024,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |field: &'static str, reason: String| Err(SimError::InvalidConfig { field, reason });
        if self.n_sensors == 0 {
            return fail("n_sensors", "need at least one sensor".into());
        }
        if self.n_attackers > 3 {
            return fail("n_attackers", format!("at most 3 supported, got {}", self.n_attackers));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return fail("duration_s", format!("must be positive, got {}", self.duration_s));
        }
        if !(self.sensor_period_s > 0.0 && self.sensor_period_s.is_finite()) {
            return fail("sensor_period_s", format!("must be positive, got {}", self.sensor_period_s));
        }
        if !(0.0..1.0).contains(&self.sensor_jitter_frac) {
            return fail(
                "sensor_jitter_frac",
                format!("must lie in [0, 1), got {}", self.sensor_jitter_frac),
            );
        }
        if !(self.flood_rate_pps > 0.0 && self.flood_rate_pps.is_finite()) {
            return fail("flood_rate_pps", format!("must be positive, got {}", self.flood_rate_pps));
        }
        if !self.attack_start_s.is_finite() || self.attack_start_s < 0.0 {
            return fail("attack_start_s", format!("must be non-negative, got {}", self.attack_start_s));
        }
        if !(self.attack_end_s > self.attack_start_s) {
            return fail(
                "attack_end_s",
                format!("window ({}, {}) is not well-ordered", self.attack_start_s, self.attack_end_s),
            );
        }
        if self.attack_end_s > self.duration_s {
            return fail(
                "attack_end_s",
                format!("window end {} exceeds duration {}", self.attack_end_s, self.duration_s),
            );
        }
        if self.sensor_bytes_min == 0 || self.sensor_bytes_min > self.sensor_bytes_max {
            return fail(
                "sensor_bytes_min",
                format!("bad range [{}, {}]", self.sensor_bytes_min, self.sensor_bytes_max),
            );
        }
        if self.flood_bytes_min == 0 || self.flood_bytes_min > self.flood_bytes_max {
            return fail(
                "flood_bytes_min",
                format!("bad range [{}, {}]", self.flood_bytes_min, self.flood_bytes_max),
            );
        }
        Ok(())
    }

    fn phase_at(&self, t: f64) -> Phase {
        if self.n_attackers >= 1 && t >= self.attack_start_s && t < self.attack_end_s {
            Phase::Attack
        } else {
            Phase::Normal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    SensorReport { sensor: u16 },
    ServerReply { sensor: u16, size: u32 },
    Flood { attacker: u16 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    /// Insertion counter; breaks timestamp ties deterministically.
    seq: u64,
    kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for earliest-first popping.
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// RNG streams: one per sensor, one per attacker, never shared, so event
/// interleaving cannot perturb the draws.
fn sensor_rng(seed: u64, sensor: u16) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(sensor));
    rng
}

fn attacker_rng(seed: u64, attacker: u16) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1_000 + u64::from(attacker));
    rng
}

fn report_gap(rng: &mut ChaCha8Rng, period: f64, jitter: f64) -> f64 {
    let u: f64 = rng.gen();
    period * (1.0 + (2.0 * u - 1.0) * jitter)
}

fn exponential_gap(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

/// Runs the scenario and returns the merged, timestamp-sorted packet trace.
/// Pure function of the config, seed included.
pub fn simulate(config: &ScenarioConfig) -> Result<Vec<PacketRecord>, SimError> {
    config.validate()?;

    let mut heap: BinaryHeap<Event> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |heap: &mut BinaryHeap<Event>, time: f64, kind: EventKind| {
        heap.push(Event { time, seq, kind });
        seq += 1;
    };

    let mut sensor_rngs: Vec<ChaCha8Rng> = (1..=config.n_sensors)
        .map(|s| sensor_rng(config.seed, s))
        .collect();
    for (i, rng) in sensor_rngs.iter_mut().enumerate() {
        let first = report_gap(rng, config.sensor_period_s, config.sensor_jitter_frac);
        if first < config.duration_s {
            push(&mut heap, first, EventKind::SensorReport { sensor: i as u16 + 1 });
        }
    }

    let mut attacker_rngs: Vec<ChaCha8Rng> = (1..=config.n_attackers)
        .map(|a| attacker_rng(config.seed, a))
        .collect();
    for (i, rng) in attacker_rngs.iter_mut().enumerate() {
        let first = config.attack_start_s + exponential_gap(rng, config.flood_rate_pps);
        if first < config.attack_end_s {
            push(&mut heap, first, EventKind::Flood { attacker: i as u16 + 1 });
        }
    }

    let mut trace = Vec::new();
    while let Some(Event { time, kind, .. }) = heap.pop() {
        match kind {
            EventKind::SensorReport { sensor } => {
                let rng = &mut sensor_rngs[usize::from(sensor - 1)];
                let size = rng.gen_range(config.sensor_bytes_min..=config.sensor_bytes_max);
                let reply_size = rng.gen_range(config.sensor_bytes_min..=config.sensor_bytes_max);
                let gap = report_gap(rng, config.sensor_period_s, config.sensor_jitter_frac);
                trace.push(PacketRecord {
                    timestamp: time,
                    src: NodeId::sensor(sensor),
                    dst: NodeId::server(),
                    size_bytes: size,
                    kind: PacketKind::SensorData,
                    phase: config.phase_at(time),
                });
                push(
                    &mut heap,
                    time + SERVICE_DELAY_S,
                    EventKind::ServerReply { sensor, size: reply_size },
                );
                let next = time + gap;
                if next < config.duration_s {
                    push(&mut heap, next, EventKind::SensorReport { sensor });
                }
            }
            EventKind::ServerReply { sensor, size } => {
                trace.push(PacketRecord {
                    timestamp: time,
                    src: NodeId::server(),
                    dst: NodeId::sensor(sensor),
                    size_bytes: size,
                    kind: PacketKind::ServerReply,
                    phase: config.phase_at(time),
                });
            }
            EventKind::Flood { attacker } => {
                let rng = &mut attacker_rngs[usize::from(attacker - 1)];
                let size = rng.gen_range(config.flood_bytes_min..=config.flood_bytes_max);
                let gap = exponential_gap(rng, config.flood_rate_pps);
                trace.push(PacketRecord {
                    timestamp: time,
                    src: NodeId::attacker(attacker),
                    dst: NodeId::server(),
                    size_bytes: size,
                    kind: PacketKind::Flood,
                    phase: config.phase_at(time),
                });
                let next = time + gap;
                if next < config.attack_end_s {
                    push(&mut heap, next, EventKind::Flood { attacker });
                }
            }
        }
    }
    Ok(trace)
}

/// Formats a timestamp losslessly (shortest digits that round-trip) padded to
/// at least nine decimal places.
fn format_timestamp(t: f64) -> String {
    let mut s = format!("{t}");
    match s.find('.') {
        Some(dot) => {
            let decimals = s.len() - dot - 1;
            for _ in decimals..9 {
                s.push('0');
            }
        }
        None => s.push_str(".000000000"),
    }
    s
}

/// Writes the trace as CSV. Round-trips through [`read_trace`] losslessly.
pub fn write_trace(trace: &[PacketRecord], path: &Path) -> Result<(), SimError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TRACE_HEADER}")?;
    for p in trace {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            format_timestamp(p.timestamp),
            p.src.role.as_str(),
            p.src.index,
            p.dst.role.as_str(),
            p.dst.index,
            p.size_bytes,
            p.kind.as_str(),
            p.phase.as_str(),
        )?;
    }
    w.flush()?;
    Ok(())
}

fn parse_role(token: &str, line: usize) -> Result<NodeRole, SimError> {
    match token {
        "sensor" => Ok(NodeRole::Sensor),
        "server" => Ok(NodeRole::Server),
        "attacker" => Ok(NodeRole::Attacker),
        other => Err(SimError::Parse { line, msg: format!("unknown role token `{other}`") }),
    }
}

/// Reads a trace CSV, validating the header, every field, and that
/// timestamps are non-decreasing.
pub fn read_trace(path: &Path) -> Result<Vec<PacketRecord>, SimError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| SimError::Parse { line: 1, msg: "empty trace file".into() })?;
    if header != TRACE_HEADER {
        return Err(SimError::Parse { line: 1, msg: format!("unexpected header `{header}`") });
    }

    let mut trace = Vec::new();
    let mut prev_t = f64::NEG_INFINITY;
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(SimError::Parse {
                line: lineno,
                msg: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        let timestamp: f64 = fields[0].parse().map_err(|e| SimError::Parse {
            line: lineno,
            msg: format!("bad timestamp: {e}"),
        })?;
        if !timestamp.is_finite() || timestamp < 0.0 {
            return Err(SimError::Parse {
                line: lineno,
                msg: format!("timestamp out of range: {timestamp}"),
            });
        }
        if timestamp < prev_t {
            return Err(SimError::OutOfOrder { line: lineno });
        }
        prev_t = timestamp;
        let parse_idx = |s: &str| -> Result<u16, SimError> {
            s.parse().map_err(|e| SimError::Parse { line: lineno, msg: format!("bad index: {e}") })
        };
        let src = NodeId { role: parse_role(fields[1], lineno)?, index: parse_idx(fields[2])? };
        let dst = NodeId { role: parse_role(fields[3], lineno)?, index: parse_idx(fields[4])? };
        let size_bytes: u32 = fields[5].parse().map_err(|e| SimError::Parse {
            line: lineno,
            msg: format!("bad size: {e}"),
        })?;
        if size_bytes == 0 {
            return Err(SimError::Parse { line: lineno, msg: "size must be positive".into() });
        }
        let kind = match fields[6] {
            "sensor_data" => PacketKind::SensorData,
            "server_reply" => PacketKind::ServerReply,
            "flood" => PacketKind::Flood,
            other => {
                return Err(SimError::Parse {
                    line: lineno,
                    msg: format!("unknown kind token `{other}`"),
                })
            }
        };
        let phase = match fields[7] {
            "normal" => Phase::Normal,
            "attack" => Phase::Attack,
            other => {
                return Err(SimError::Parse {
                    line: lineno,
                    msg: format!("unknown phase token `{other}`"),
                })
            }
        };
        trace.push(PacketRecord { timestamp, src, dst, size_bytes, kind, phase });
    }
    Ok(trace)
}
