//! Mobility traces: CSV ingestion, synthetic random-waypoint generation, and
//! unit-disk adjacency queries.
//!
//! A trace is a time-ordered list of position snapshots taken at a fixed
//! interval. Positions between snapshots hold the last snapshot (no
//! interpolation); coordinates are kept at centimeter precision so the CSV
//! form round-trips losslessly.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::types::{NodeId, SimTime};

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("trace parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("non-monotonic snapshot time at line {line}")]
    NonMonotonicTime { line: usize },
    #[error("position out of bounds at line {line}")]
    OutOfBounds { line: usize },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("query time outside the trace span")]
    TimeOutOfRange,
}

/// Parameters for the synthetic random-waypoint generator.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticParams {
    pub n_nodes: u32,
    pub area: (f64, f64),
    pub speed_range: (f64, f64),
    pub duration_s: f64,
    pub snapshot_interval_s: f64,
}

#[derive(Debug, Clone)]
pub struct MobilityTrace {
    node_ids: Vec<u32>,
    id_to_idx: HashMap<u32, usize>,
    snapshot_interval: SimTime,
    times: Vec<SimTime>,
    /// positions[snapshot][node index]; `None` while a node is not deployed.
    positions: Vec<Vec<Option<(f64, f64)>>>,
    area: (f64, f64),
}

fn round_cm(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

impl MobilityTrace {
    pub fn node_ids(&self) -> &[u32] {
        &self.node_ids
    }

    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.id_to_idx.contains_key(&id.0)
    }

    pub fn snapshot_interval(&self) -> SimTime {
        self.snapshot_interval
    }

    pub fn snapshot_count(&self) -> usize {
        self.times.len()
    }

    pub fn snapshot_time(&self, index: usize) -> SimTime {
        self.times[index]
    }

    /// Positions of all nodes at a snapshot, indexed like [`Self::node_ids`].
    pub fn snapshot_positions(&self, index: usize) -> &[Option<(f64, f64)>] {
        &self.positions[index]
    }

    pub fn area(&self) -> (f64, f64) {
        self.area
    }

    pub fn start_time(&self) -> SimTime {
        self.times[0]
    }

    pub fn end_time(&self) -> SimTime {
        *self.times.last().expect("trace has snapshots")
    }

    /// True when the trace holds a position for every node in every snapshot.
    pub fn is_dense(&self) -> bool {
        self.positions
            .iter()
            .all(|snap| snap.iter().all(|p| p.is_some()))
    }

    /// Index of the latest snapshot at or before `t`.
    pub fn snapshot_index_at(&self, t: SimTime) -> Result<usize, TraceError> {
        if t < self.times[0] {
            return Err(TraceError::TimeOutOfRange);
        }
        Ok(self.times.partition_point(|&st| st <= t) - 1)
    }

    /// Position of a node at time `t`, holding the latest snapshot.
    pub fn position_at(&self, id: NodeId, t: SimTime) -> Result<Option<(f64, f64)>, TraceError> {
        let idx = self.snapshot_index_at(t)?;
        let node = match self.id_to_idx.get(&id.0) {
            Some(&i) => i,
            None => return Ok(None),
        };
        Ok(self.positions[idx][node])
    }

    /// Unit-disk adjacency at time `t`: all unordered pairs of nodes whose
    /// Euclidean distance at the governing snapshot is at most `radius`.
    pub fn neighbors_at(
        &self,
        t: SimTime,
        radius: f64,
    ) -> Result<Vec<(NodeId, NodeId)>, TraceError> {
        if t > self.end_time() + self.snapshot_interval {
            return Err(TraceError::TimeOutOfRange);
        }
        let idx = self.snapshot_index_at(t)?;
        let snap = &self.positions[idx];
        let r2 = radius * radius;
        let mut pairs = Vec::new();
        for i in 0..snap.len() {
            let (xi, yi) = match snap[i] {
                Some(p) => p,
                None => continue,
            };
            for (j, other) in snap.iter().enumerate().skip(i + 1) {
                let (xj, yj) = match other {
                    Some(p) => *p,
                    None => continue,
                };
                let (dx, dy) = (xi - xj, yi - yj);
                if dx * dx + dy * dy <= r2 {
                    pairs.push((NodeId(self.node_ids[i]), NodeId(self.node_ids[j])));
                }
            }
        }
        Ok(pairs)
    }

    /// Parses the CSV trace format: header `t,node,x,y`, one row per node per
    /// snapshot, seconds and meters as decimals.
    pub fn parse_csv(text: &str) -> Result<Self, TraceError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "t,node,x,y" => {}
            Some((_, other)) => {
                return Err(TraceError::Parse {
                    line: 1,
                    reason: format!("expected header `t,node,x,y`, found `{}`", other.trim()),
                })
            }
            None => {
                return Err(TraceError::Parse {
                    line: 1,
                    reason: "empty file".into(),
                })
            }
        }

        struct Row {
            line: usize,
            t: SimTime,
            node: u32,
            x: f64,
            y: f64,
        }
        let mut rows: Vec<Row> = Vec::new();
        for (i, raw) in lines {
            let line = i + 1;
            let txt = raw.trim();
            if txt.is_empty() {
                continue;
            }
            let mut parts = txt.split(',');
            let mut field = |name: &str| {
                parts.next().map(str::trim).ok_or(TraceError::Parse {
                    line,
                    reason: format!("missing field {name}"),
                })
            };
            let t: f64 = field("t")?.parse().map_err(|_| TraceError::Parse {
                line,
                reason: "bad time".into(),
            })?;
            let node: u32 = field("node")?.parse().map_err(|_| TraceError::Parse {
                line,
                reason: "bad node id".into(),
            })?;
            let x: f64 = field("x")?.parse().map_err(|_| TraceError::Parse {
                line,
                reason: "bad x".into(),
            })?;
            let y: f64 = field("y")?.parse().map_err(|_| TraceError::Parse {
                line,
                reason: "bad y".into(),
            })?;
            if t < 0.0 {
                return Err(TraceError::NonMonotonicTime { line });
            }
            if x < 0.0 || y < 0.0 {
                return Err(TraceError::OutOfBounds { line });
            }
            rows.push(Row {
                line,
                t: SimTime::from_secs_f64(t),
                node,
                x,
                y,
            });
        }
        if rows.is_empty() {
            return Err(TraceError::Parse {
                line: 1,
                reason: "no data rows".into(),
            });
        }

        let mut node_ids: Vec<u32> = rows.iter().map(|r| r.node).collect();
        node_ids.sort_unstable();
        node_ids.dedup();
        let id_to_idx: HashMap<u32, usize> =
            node_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

        let mut times: Vec<SimTime> = Vec::new();
        let mut positions: Vec<Vec<Option<(f64, f64)>>> = Vec::new();
        let mut max_x: f64 = 0.0;
        let mut max_y: f64 = 0.0;
        for row in &rows {
            match times.last() {
                None => {
                    times.push(row.t);
                    positions.push(vec![None; node_ids.len()]);
                }
                Some(&last) if row.t == last => {}
                Some(&last) if row.t > last => {
                    times.push(row.t);
                    positions.push(vec![None; node_ids.len()]);
                }
                Some(_) => return Err(TraceError::NonMonotonicTime { line: row.line }),
            }
            let slot = &mut positions.last_mut().unwrap()[id_to_idx[&row.node]];
            if slot.is_some() {
                return Err(TraceError::Parse {
                    line: row.line,
                    reason: format!("node {} repeated within one snapshot", row.node),
                });
            }
            *slot = Some((round_cm(row.x), round_cm(row.y)));
            max_x = max_x.max(row.x);
            max_y = max_y.max(row.y);
        }
        if times.len() < 2 {
            return Err(TraceError::Parse {
                line: rows.last().unwrap().line,
                reason: "need at least two snapshots to infer the interval".into(),
            });
        }

        Ok(MobilityTrace {
            node_ids,
            id_to_idx,
            snapshot_interval: times[1] - times[0],
            times,
            positions,
            area: (max_x.ceil(), max_y.ceil()),
        })
    }

    pub fn load(path: &Path) -> Result<Self, TraceError> {
        let text = std::fs::read_to_string(path).map_err(|e| TraceError::Parse {
            line: 0,
            reason: e.to_string(),
        })?;
        Self::parse_csv(&text)
    }

    /// Serializes back to the CSV trace format.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,node,x,y\n");
        for (si, t) in self.times.iter().enumerate() {
            for (ni, pos) in self.positions[si].iter().enumerate() {
                if let Some((x, y)) = pos {
                    out.push_str(&format!(
                        "{:.3},{},{:.2},{:.2}\n",
                        t.as_secs_f64(),
                        self.node_ids[ni],
                        x,
                        y
                    ));
                }
            }
        }
        out
    }

    /// Generates a seeded random-waypoint trace: every node repeatedly picks
    /// a uniform waypoint in the area and a uniform speed in range, and walks
    /// there at constant speed. Nodes are labeled `0..n_nodes`.
    pub fn generate_synthetic(params: &SyntheticParams, seed: u64) -> Result<Self, TraceError> {
        let SyntheticParams {
            n_nodes,
            area,
            speed_range: (smin, smax),
            duration_s,
            snapshot_interval_s,
        } = *params;
        if n_nodes == 0 {
            return Err(TraceError::InvalidParams("n_nodes must be positive".into()));
        }
        if !(smin > 0.0 && smin <= smax) {
            return Err(TraceError::InvalidParams(
                "need 0 < speed_min <= speed_max".into(),
            ));
        }
        if area.0 <= 0.0 || area.1 <= 0.0 {
            return Err(TraceError::InvalidParams("area must be positive".into()));
        }
        if duration_s <= 0.0 || snapshot_interval_s <= 0.0 {
            return Err(TraceError::InvalidParams(
                "duration and snapshot interval must be positive".into(),
            ));
        }

        let interval = SimTime::from_secs_f64(snapshot_interval_s);
        let duration = SimTime::from_secs_f64(duration_s);
        let count = (duration.as_micros().div_ceil(interval.as_micros()) as usize).max(2);
        let dt = interval.as_secs_f64();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut positions = vec![vec![None; n_nodes as usize]; count];
        for node in 0..n_nodes as usize {
            let mut pos = (
                rng.random_range(0.0..area.0),
                rng.random_range(0.0..area.1),
            );
            let mut waypoint = (
                rng.random_range(0.0..area.0),
                rng.random_range(0.0..area.1),
            );
            let mut speed = rng.random_range(smin..=smax);
            for snap in positions.iter_mut() {
                snap[node] = Some((round_cm(pos.0), round_cm(pos.1)));
                // advance one interval, possibly across several waypoints
                let mut budget = speed * dt;
                loop {
                    let (dx, dy) = (waypoint.0 - pos.0, waypoint.1 - pos.1);
                    let dist = (dx * dx + dy * dy).sqrt();
                    if dist > budget {
                        pos.0 += dx / dist * budget;
                        pos.1 += dy / dist * budget;
                        break;
                    }
                    pos = waypoint;
                    budget -= dist;
                    waypoint = (
                        rng.random_range(0.0..area.0),
                        rng.random_range(0.0..area.1),
                    );
                    speed = rng.random_range(smin..=smax);
                    if budget <= 0.0 {
                        break;
                    }
                }
            }
        }

        let node_ids: Vec<u32> = (0..n_nodes).collect();
        let id_to_idx = node_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        Ok(MobilityTrace {
            node_ids,
            id_to_idx,
            snapshot_interval: interval,
            times: (0..count as u64)
                .map(|k| SimTime::from_micros(k * interval.as_micros()))
                .collect(),
            positions,
            area,
        })
    }

    /// Builds a trace from explicit snapshots; nodes labeled `0..n`.
    pub fn from_snapshots(
        interval: SimTime,
        snapshots: Vec<Vec<(f64, f64)>>,
        area: (f64, f64),
    ) -> Result<Self, TraceError> {
        if snapshots.len() < 2 {
            return Err(TraceError::InvalidParams("need at least two snapshots".into()));
        }
        let n = snapshots[0].len();
        if n == 0 || snapshots.iter().any(|s| s.len() != n) {
            return Err(TraceError::InvalidParams(
                "snapshots must cover the same non-empty node set".into(),
            ));
        }
        let node_ids: Vec<u32> = (0..n as u32).collect();
        let id_to_idx = node_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        Ok(MobilityTrace {
            node_ids,
            id_to_idx,
            snapshot_interval: interval,
            times: (0..snapshots.len() as u64)
                .map(|k| SimTime::from_micros(k * interval.as_micros()))
                .collect(),
            positions: snapshots
                .into_iter()
                .map(|s| s.into_iter().map(|p| Some((round_cm(p.0), round_cm(p.1)))).collect())
                .collect(),
            area,
        })
    }

    /// Translates the whole trajectory of `node` so it sits at `target` at
    /// time `t`, clamping to the area. Used to pin scenario participants
    /// together at a meeting instant.
    pub fn pin_node_at(&mut self, id: NodeId, t: SimTime, target: (f64, f64)) -> Result<(), TraceError> {
        let idx = self.snapshot_index_at(t)?;
        let node = *self
            .id_to_idx
            .get(&id.0)
            .ok_or(TraceError::TimeOutOfRange)?;
        let current = self.positions[idx][node].ok_or(TraceError::TimeOutOfRange)?;
        let shift = (target.0 - current.0, target.1 - current.1);
        for snap in self.positions.iter_mut() {
            if let Some(p) = snap[node] {
                snap[node] = Some((
                    round_cm((p.0 + shift.0).clamp(0.0, self.area.0)),
                    round_cm((p.1 + shift.1).clamp(0.0, self.area.1)),
                ));
            }
        }
        Ok(())
    }
}

/// Module-level alias mirroring the operation vocabulary.
pub fn load_trace(path: &Path) -> Result<MobilityTrace, TraceError> {
    MobilityTrace::load(path)
}
