//! Deterministic discrete-event engine.
//!
//! Drives per-node protocol state machines over a mobility trace. All state
//! changes happen by processing timestamped events in a total order: events
//! are keyed by `(time, kind rank, actor, sequence)`, so a run is a pure
//! function of `(spec, trace, seed)` and replays to a bit-identical log.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::protocol::{
    wire_size, AlertPayload, Effect, Message, MessageBody, MessageKind, NodeProfile, NodeState,
    ProtocolConfig,
};
use crate::taxonomy::SkillTaxonomy;
use crate::types::{NodeId, SimTime};

use super::log::{EventLog, LogBody};
use super::radio::{Delivery, RadioModel};
use super::trace::MobilityTrace;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid run configuration: {0}")]
    Config(String),
}

/// One scheduled critical event.
#[derive(Debug, Clone, Copy)]
pub struct EmergencySpec {
    pub node: NodeId,
    pub at: SimTime,
    pub priority: u8,
}

/// Everything a single repetition needs besides the trace and the seed.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub duration: SimTime,
    pub warmup: SimTime,
    pub protocol: ProtocolConfig,
    pub radio: RadioModel,
    pub profiles: Vec<NodeProfile>,
    pub emergencies: Vec<EmergencySpec>,
    pub taxonomy: SkillTaxonomy,
    /// Size of the interest label universe, for wire sizing.
    pub interest_universe_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum EventKind {
    /// Log-only transient-removal marker.
    Marker,
    /// Advance to snapshot `index` and record neighborhood sizes.
    SnapshotAdvance { index: usize },
    /// Deliver a message to `actor`.
    Delivery { msg: Message },
    /// Critical event at `actor`.
    Emergency { priority: u8 },
    AnnounceTimer,
    AckTimeout { attempt: u32 },
    AckDrain,
}

fn rank(kind: &EventKind) -> u8 {
    match kind {
        EventKind::Marker => 0,
        EventKind::SnapshotAdvance { .. } => 1,
        EventKind::Delivery { .. } => 2,
        EventKind::Emergency { .. } => 3,
        EventKind::AnnounceTimer | EventKind::AckTimeout { .. } | EventKind::AckDrain => 4,
    }
}

#[derive(Debug)]
struct QueuedEvent {
    time: SimTime,
    rank: u8,
    actor: u32,
    push_seq: u64,
    kind: EventKind,
}

impl QueuedEvent {
    fn key(&self) -> (SimTime, u8, u32, u64) {
        (self.time, self.rank, self.actor, self.push_seq)
    }
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for QueuedEvent {}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed so the BinaryHeap pops the earliest event first
        other.key().cmp(&self.key())
    }
}

struct Engine<'a> {
    spec: &'a RunSpec,
    trace: &'a MobilityTrace,
    states: Vec<NodeState>,
    queue: BinaryHeap<QueuedEvent>,
    push_seq: u64,
    rng: ChaCha8Rng,
    log: EventLog,
    positions: Vec<Option<(f64, f64)>>,
    now: SimTime,
}

/// Runs one repetition and returns its event log.
pub fn run(spec: &RunSpec, trace: &MobilityTrace, seed: u64) -> Result<EventLog, EngineError> {
    validate(spec, trace)?;

    let n = spec.profiles.len();
    let mut engine = Engine {
        spec,
        trace,
        states: spec
            .profiles
            .iter()
            .map(|p| NodeState::new(p.clone(), spec.protocol))
            .collect(),
        queue: BinaryHeap::new(),
        push_seq: 0,
        rng: ChaCha8Rng::seed_from_u64(seed),
        log: EventLog::default(),
        positions: vec![None; n],
        now: SimTime::ZERO,
    };

    // Initial snapshot state and scheduled events. Announcement timers are
    // staggered with a seeded per-node phase inside the first interval; the
    // cadence afterwards is exactly the announce interval.
    engine.positions = trace.snapshot_positions(0).to_vec();
    engine.schedule(SimTime::ZERO, 0, EventKind::SnapshotAdvance { index: 0 });
    engine.schedule(spec.warmup, 0, EventKind::Marker);
    let interval_us = spec.protocol.announce_interval.as_micros();
    for node in 0..n as u32 {
        let offset = SimTime::from_micros(engine.rng.random_range(0..interval_us));
        engine.schedule(offset, node, EventKind::AnnounceTimer);
    }
    for e in &spec.emergencies {
        engine.schedule(e.at, e.node.0, EventKind::Emergency { priority: e.priority });
    }

    engine.run_loop();
    Ok(engine.log)
}

fn validate(spec: &RunSpec, trace: &MobilityTrace) -> Result<(), EngineError> {
    let n = spec.profiles.len();
    if n == 0 {
        return Err(EngineError::Config("no node profiles".into()));
    }
    for (i, p) in spec.profiles.iter().enumerate() {
        if p.id.index() != i {
            return Err(EngineError::Config(format!(
                "profiles must be dense by id; index {i} holds node {}",
                p.id
            )));
        }
        if !spec.taxonomy.contains(&p.skill) {
            return Err(EngineError::Config(format!(
                "node {} holds a competence outside the taxonomy: {}",
                p.id, p.skill
            )));
        }
    }
    if trace.n_nodes() < n
        || !(0..n as u32).all(|id| trace.contains_node(NodeId(id)))
        || !trace.is_dense()
    {
        return Err(EngineError::Config(
            "trace must position every configured node in every snapshot".into(),
        ));
    }
    if trace.start_time() != SimTime::ZERO {
        return Err(EngineError::Config("trace must start at t=0".into()));
    }
    if trace.end_time() + trace.snapshot_interval() < spec.duration {
        return Err(EngineError::Config("trace does not cover the run duration".into()));
    }
    for e in &spec.emergencies {
        if e.node.index() >= n {
            return Err(EngineError::Config(format!("emergency node {} unknown", e.node)));
        }
        if !(1..=4).contains(&e.priority) {
            return Err(EngineError::Config(format!(
                "emergency priority {} outside 1..=4",
                e.priority
            )));
        }
        if e.at > spec.duration {
            return Err(EngineError::Config("emergency after run end".into()));
        }
    }
    if spec.warmup > spec.duration {
        return Err(EngineError::Config("warmup exceeds duration".into()));
    }
    Ok(())
}

impl Engine<'_> {
    fn schedule(&mut self, time: SimTime, actor: u32, kind: EventKind) {
        let rank = rank(&kind);
        self.push_seq += 1;
        self.queue.push(QueuedEvent {
            time,
            rank,
            actor,
            push_seq: self.push_seq,
            kind,
        });
    }

    fn run_loop(&mut self) {
        while let Some(ev) = self.queue.pop() {
            if ev.time > self.spec.duration {
                break;
            }
            self.now = ev.time;
            match ev.kind {
                EventKind::Marker => self.log.push(self.now, LogBody::Warmup),
                EventKind::SnapshotAdvance { index } => self.on_snapshot(index),
                EventKind::Delivery { msg } => self.on_delivery(NodeId(ev.actor), msg),
                EventKind::Emergency { priority } => {
                    let node = NodeId(ev.actor);
                    self.log.push(self.now, LogBody::EmergencyTriggered { node, priority });
                    let effects = self.states[node.index()].trigger_emergency(priority, self.now);
                    self.perform(node, effects);
                }
                EventKind::AnnounceTimer => {
                    let node = NodeId(ev.actor);
                    let effects = self.states[node.index()].on_announce_timer(self.now);
                    self.perform(node, effects);
                }
                EventKind::AckTimeout { attempt } => {
                    let node = NodeId(ev.actor);
                    let effects = self.states[node.index()].on_ack_timeout(attempt, self.now);
                    self.perform(node, effects);
                }
                EventKind::AckDrain => {
                    let node = NodeId(ev.actor);
                    let effects = self.states[node.index()].on_ack_drain(self.now);
                    self.perform(node, effects);
                }
            }
        }
    }

    fn on_snapshot(&mut self, index: usize) {
        self.positions = self.trace.snapshot_positions(index).to_vec();
        let n = self.states.len();
        let r2 = self.spec.radio.radius_m * self.spec.radio.radius_m;
        let mut counts = vec![0u32; n];
        for i in 0..n {
            let (xi, yi) = match self.positions[i] {
                Some(p) => p,
                None => continue,
            };
            for j in (i + 1)..n {
                let (xj, yj) = match self.positions[j] {
                    Some(p) => p,
                    None => continue,
                };
                let (dx, dy) = (xi - xj, yi - yj);
                if dx * dx + dy * dy <= r2 {
                    counts[i] += 1;
                    counts[j] += 1;
                }
            }
        }
        for (i, count) in counts.into_iter().enumerate() {
            self.log.push(
                self.now,
                LogBody::SnapshotNeighbors {
                    node: NodeId(i as u32),
                    count,
                },
            );
        }
        if index + 1 < self.trace.snapshot_count() {
            let t = self.trace.snapshot_time(index + 1);
            if t <= self.spec.duration {
                self.schedule(t, 0, EventKind::SnapshotAdvance { index: index + 1 });
            }
        }
    }

    fn on_delivery(&mut self, dst: NodeId, msg: Message) {
        let reference = match &msg.body {
            MessageBody::AckAlert { alert_seq } => Some(*alert_seq),
            _ => None,
        };
        self.log.push(
            self.now,
            LogBody::Delivered {
                kind: msg.body.kind(),
                src: msg.src,
                dst,
                seq: msg.seq,
                reference,
                sent_at: msg.sent_at,
            },
        );
        let state = &mut self.states[dst.index()];
        let effects = match msg.body {
            MessageBody::Announce => state.on_announce(msg.src, self.now),
            MessageBody::AnswerAnnounce { skill, interests } => {
                state.on_answer(msg.src, &skill, &interests, self.now, &self.spec.taxonomy)
            }
            MessageBody::Alert { payload: _, priority } => {
                state.on_alert(msg.src, msg.seq, priority, self.now)
            }
            MessageBody::AckAlert { alert_seq } => state.on_ack(msg.src, alert_seq, self.now),
            MessageBody::StopAnnounce => state.on_stop_announce(msg.src, self.now),
        };
        self.perform(dst, effects);
    }

    fn perform(&mut self, node: NodeId, effects: Vec<Effect>) {
        for effect in effects {
            match effect {
                Effect::Broadcast { seq, body } => self.broadcast(node, seq, body),
                Effect::Unicast { seq, to, body } => {
                    debug_assert!(matches!(body, MessageBody::AnswerAnnounce { .. }));
                    self.log.push(self.now, LogBody::AnswerSent { node, to, seq });
                    self.unicast(node, to, seq, body);
                }
                Effect::SendAlert {
                    seq,
                    to,
                    priority,
                    attempt,
                    tier,
                    receiver_skill,
                    trust_total,
                } => {
                    self.log.push(
                        self.now,
                        LogBody::AlertSent {
                            node,
                            to,
                            seq,
                            attempt,
                            priority,
                            tier,
                            receiver_skill,
                            trust_total,
                        },
                    );
                    let body = MessageBody::Alert {
                        payload: AlertPayload { tier, subject: node },
                        priority,
                    };
                    self.unicast(node, to, seq, body);
                }
                Effect::SendAck {
                    seq,
                    to,
                    alert_seq,
                    priority,
                    alert_received_at,
                } => {
                    self.log.push(
                        self.now,
                        LogBody::AckSent {
                            node,
                            to,
                            seq,
                            alert_seq,
                            priority,
                            alert_received_at,
                        },
                    );
                    self.unicast(node, to, seq, MessageBody::AckAlert { alert_seq });
                }
                Effect::ScheduleAnnounce(at) => {
                    if at <= self.spec.duration {
                        self.schedule(at, node.0, EventKind::AnnounceTimer);
                    }
                }
                Effect::ScheduleAckTimeout { at, attempt } => {
                    self.schedule(at, node.0, EventKind::AckTimeout { attempt });
                }
                Effect::ScheduleAckDrain(at) => {
                    self.schedule(at, node.0, EventKind::AckDrain);
                }
                Effect::RegistryReset => {
                    if self.spec.profiles[node.index()].interests.has_health_interest() {
                        self.log.push(self.now, LogBody::RegistryReset { owner: node });
                    }
                }
                Effect::Registered {
                    member,
                    skill,
                    trust,
                    common_interests,
                } => {
                    self.log.push(
                        self.now,
                        LogBody::Registered {
                            owner: node,
                            member,
                            skill,
                            interest_trust: trust.interest_trust,
                            skill_trust: trust.skill_trust,
                            total_trust: trust.total,
                            common_interests: common_interests as u32,
                        },
                    );
                }
                Effect::MemberRemoved { member, reason } => {
                    self.log.push(
                        self.now,
                        LogBody::MemberRemoved {
                            owner: node,
                            member,
                            reason: reason.as_str().to_string(),
                        },
                    );
                }
                Effect::Fault(reason) => {
                    self.log.push(
                        self.now,
                        LogBody::Fault {
                            node,
                            reason: reason.as_str().to_string(),
                        },
                    );
                }
            }
        }
    }

    /// Sends to every other node within radio range at the send instant.
    /// Recipients are scanned in id order so jitter draws are deterministic.
    fn broadcast(&mut self, src: NodeId, seq: u64, body: MessageBody) {
        match body.kind() {
            MessageKind::Announce => {
                self.log.push(self.now, LogBody::AnnounceSent { node: src, seq })
            }
            MessageKind::Stop => self.log.push(self.now, LogBody::StopSent { node: src, seq }),
            other => unreachable!("unexpected broadcast kind {other:?}"),
        }
        let src_pos = match self.positions[src.index()] {
            Some(p) => p,
            None => return,
        };
        let size = wire_size(&body, self.spec.interest_universe_len);
        for dst in 0..self.states.len() {
            if dst == src.index() {
                continue;
            }
            let dst_pos = match self.positions[dst] {
                Some(p) => p,
                None => continue,
            };
            if let Delivery::Delivered(offset) =
                self.spec.radio.deliver(size, src_pos, dst_pos, &mut self.rng)
            {
                let msg = Message {
                    src,
                    seq,
                    sent_at: self.now,
                    body: body.clone(),
                };
                self.schedule(self.now + offset, dst as u32, EventKind::Delivery { msg });
            }
        }
    }

    /// Sends to one receiver; out-of-range attempts are logged as dropped.
    fn unicast(&mut self, src: NodeId, to: NodeId, seq: u64, body: MessageBody) {
        let kind = body.kind();
        let (src_pos, dst_pos) = match (self.positions[src.index()], self.positions[to.index()]) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                self.log.push(
                    self.now,
                    LogBody::Dropped {
                        kind,
                        src,
                        dst: to,
                        seq,
                        reason: "not_deployed".into(),
                    },
                );
                return;
            }
        };
        let size = wire_size(&body, self.spec.interest_universe_len);
        match self.spec.radio.deliver(size, src_pos, dst_pos, &mut self.rng) {
            Delivery::Delivered(offset) => {
                let msg = Message {
                    src,
                    seq,
                    sent_at: self.now,
                    body,
                };
                self.schedule(self.now + offset, to.0, EventKind::Delivery { msg });
            }
            Delivery::Dropped => {
                self.log.push(
                    self.now,
                    LogBody::Dropped {
                        kind,
                        src,
                        dst: to,
                        seq,
                        reason: "out_of_range".into(),
                    },
                );
            }
        }
    }
}
