//! Per-node protocol state machines: community management (periodic
//! neighborhood announcement, identification, trust-gated registration) and
//! critical-event management (alert dissemination, acknowledgements,
//! operation shutdown).
//!
//! Handlers are pure with respect to the outside world: they mutate only the
//! node's own state and return [`Effect`]s for the engine to perform. The
//! engine invokes all handlers of one node sequentially in timestamp order.

mod message;

pub use message::{
    encode, wire_size, AlertPayload, DataTier, Message, MessageBody, MessageKind, WireContext,
};

use std::collections::BTreeMap;

use crate::taxonomy::{SkillTaxonomy, TaxonomyError, REFERENCE_SKILL};
use crate::trust::{total_trust, InterestSet, TrustScore};
use crate::types::{NodeId, SimTime};

/// A node's social identity: one competence and a non-empty interest set.
#[derive(Debug, Clone)]
pub struct NodeProfile {
    pub id: NodeId,
    pub skill: String,
    pub interests: InterestSet,
}

impl NodeProfile {
    pub fn new(id: NodeId, skill: &str, interests: InterestSet) -> Self {
        NodeProfile {
            id,
            skill: skill.trim().to_ascii_lowercase(),
            interests,
        }
    }
}

/// A registered health-community member.
#[derive(Debug, Clone)]
pub struct NeighborRecord {
    pub id: NodeId,
    pub skill: String,
    pub interests: InterestSet,
    pub trust: TrustScore,
    pub common_interests: usize,
    pub registered_at: SimTime,
}

/// Closed membership interval of one member in one node's community.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MembershipPeriod {
    pub member: NodeId,
    pub join: SimTime,
    pub leave: SimTime,
}

/// The registry of health-interested neighbors with their trust scores.
///
/// The registry is round-scoped: it is cleared at every announcement-timer
/// firing, so it only ever holds neighbors that answered in the current
/// round. Membership periods record each contiguous registration interval.
#[derive(Debug, Clone, Default)]
pub struct HealthCommunity {
    members: BTreeMap<NodeId, NeighborRecord>,
    open_since: BTreeMap<NodeId, SimTime>,
    closed: Vec<MembershipPeriod>,
}

impl HealthCommunity {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.members.contains_key(&id)
    }

    pub fn member(&self, id: NodeId) -> Option<&NeighborRecord> {
        self.members.get(&id)
    }

    pub fn members(&self) -> impl Iterator<Item = &NeighborRecord> {
        self.members.values()
    }

    /// Registers or overwrites a member. Re-registration keeps the original
    /// join time of the ongoing period.
    pub fn register(&mut self, record: NeighborRecord, now: SimTime) {
        self.open_since.entry(record.id).or_insert(now);
        self.members.insert(record.id, record);
    }

    pub fn remove(&mut self, id: NodeId, now: SimTime) -> bool {
        if self.members.remove(&id).is_some() {
            if let Some(join) = self.open_since.remove(&id) {
                self.closed.push(MembershipPeriod {
                    member: id,
                    join,
                    leave: now,
                });
            }
            true
        } else {
            false
        }
    }

    /// Clears the registry at a round boundary, closing all open periods.
    pub fn reset(&mut self, now: SimTime) {
        for (&id, &join) in &self.open_since {
            self.closed.push(MembershipPeriod {
                member: id,
                join,
                leave: now,
            });
        }
        self.open_since.clear();
        self.members.clear();
    }

    /// Closes any still-open periods without clearing membership; used when a
    /// run ends.
    pub fn close_periods(&mut self, now: SimTime) {
        for (&id, &join) in &self.open_since {
            self.closed.push(MembershipPeriod {
                member: id,
                join,
                leave: now,
            });
        }
        self.open_since.clear();
    }

    pub fn periods(&self) -> &[MembershipPeriod] {
        &self.closed
    }

    /// The member to receive sensitive data: maximum total trust, ties broken
    /// by larger common-interest count, then by smaller node id.
    pub fn select_receiver(&self) -> Result<&NeighborRecord, NoReceiver> {
        self.members
            .values()
            .max_by(|a, b| {
                a.trust
                    .total
                    .partial_cmp(&b.trust.total)
                    .expect("trust is never NaN")
                    .then(a.common_interests.cmp(&b.common_interests))
                    .then(b.id.cmp(&a.id))
            })
            .ok_or(NoReceiver)
    }
}

/// The community is empty: there is no eligible receiver. Counts as a
/// dissemination fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoReceiver;

/// Sensitive data granted to a receiver, scoped by competence class.
///
/// Doctors get the full record, nurses vitals plus medication, everyone else
/// (practitioner competences and `other`) vitals only.
pub fn tailor_payload(tax: &SkillTaxonomy, receiver_skill: &str) -> Result<DataTier, TaxonomyError> {
    if !tax.contains(receiver_skill) {
        return Err(TaxonomyError::UnknownSkill(receiver_skill.to_string()));
    }
    Ok(classify_tier(receiver_skill))
}

fn classify_tier(skill: &str) -> DataTier {
    match skill.trim().to_ascii_lowercase().as_str() {
        REFERENCE_SKILL => DataTier::FullRecord,
        "nurse" => DataTier::VitalsAndMedication,
        _ => DataTier::VitalsOnly,
    }
}

/// Acknowledgement behavior of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AckMode {
    /// Alerts are not acknowledged; delivery completes the dissemination.
    None,
    /// Every received alert is acknowledged immediately.
    Immediate,
    /// Simultaneously received alerts are acknowledged in descending urgency
    /// (ascending numeric priority), ties in reception order.
    PriorityOrdered,
}

#[derive(Debug, Clone, Copy)]
pub struct ProtocolConfig {
    pub announce_interval: SimTime,
    pub ack_timeout: SimTime,
    /// How long a priority-ordered receiver waits to collect concurrent
    /// alerts before acknowledging them.
    pub ack_drain_delay: SimTime,
    pub ack_mode: AckMode,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            announce_interval: SimTime::from_secs_f64(1.0),
            ack_timeout: SimTime::from_millis_f64(500.0),
            ack_drain_delay: SimTime::from_millis_f64(10.0),
            ack_mode: AckMode::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovalReason {
    StoppedOperation,
    AckTimeout,
}

impl RemovalReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RemovalReason::StoppedOperation => "stop",
            RemovalReason::AckTimeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultReason {
    /// Emergency with an empty health community: nothing can be disseminated.
    NoCommunity,
    /// Every community member was tried and none acknowledged.
    CommunityExhausted,
}

impl FaultReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FaultReason::NoCommunity => "no_community",
            FaultReason::CommunityExhausted => "community_exhausted",
        }
    }
}

/// Side effects requested by a handler, performed by the engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Broadcast {
        seq: u64,
        body: MessageBody,
    },
    Unicast {
        seq: u64,
        to: NodeId,
        body: MessageBody,
    },
    SendAlert {
        seq: u64,
        to: NodeId,
        priority: u8,
        attempt: u32,
        tier: DataTier,
        receiver_skill: String,
        trust_total: f64,
    },
    SendAck {
        seq: u64,
        to: NodeId,
        alert_seq: u64,
        priority: u8,
        alert_received_at: SimTime,
    },
    ScheduleAnnounce(SimTime),
    ScheduleAckTimeout {
        at: SimTime,
        attempt: u32,
    },
    ScheduleAckDrain(SimTime),
    RegistryReset,
    Registered {
        member: NodeId,
        skill: String,
        trust: TrustScore,
        common_interests: usize,
    },
    MemberRemoved {
        member: NodeId,
        reason: RemovalReason,
    },
    Fault(FaultReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Active,
    AwaitingAck,
    Done,
}

#[derive(Debug, Clone, Copy)]
struct OutstandingAlert {
    alert_seq: u64,
    receiver: NodeId,
    attempt: u32,
}

#[derive(Debug, Clone, Copy)]
struct PendingAlert {
    src: NodeId,
    alert_seq: u64,
    priority: u8,
    received_at: SimTime,
}

/// Protocol state of a single node.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub profile: NodeProfile,
    config: ProtocolConfig,
    community: HealthCommunity,
    phase: Phase,
    next_seq: u64,
    outstanding: Option<OutstandingAlert>,
    pending_acks: Vec<PendingAlert>,
    drain_scheduled: bool,
    emergency_at: Option<SimTime>,
    emergency_priority: Option<u8>,
}

impl NodeState {
    pub fn new(profile: NodeProfile, config: ProtocolConfig) -> Self {
        NodeState {
            profile,
            config,
            community: HealthCommunity::default(),
            phase: Phase::Active,
            next_seq: 0,
            outstanding: None,
            pending_acks: Vec::new(),
            drain_scheduled: false,
            emergency_at: None,
            emergency_priority: None,
        }
    }

    pub fn community(&self) -> &HealthCommunity {
        &self.community
    }

    pub fn community_mut(&mut self) -> &mut HealthCommunity {
        &mut self.community
    }

    pub fn is_active(&self) -> bool {
        self.phase == Phase::Active
    }

    pub fn in_emergency(&self) -> bool {
        self.emergency_at.is_some()
    }

    fn alloc_seq(&mut self) -> u64 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    /// Announcement timer: reset the neighbor registry, announce presence,
    /// rearm the timer. Nodes that interrupted operation stay silent.
    pub fn on_announce_timer(&mut self, now: SimTime) -> Vec<Effect> {
        if self.phase != Phase::Active {
            return Vec::new();
        }
        self.community.reset(now);
        let seq = self.alloc_seq();
        vec![
            Effect::RegistryReset,
            Effect::Broadcast {
                seq,
                body: MessageBody::Announce,
            },
            Effect::ScheduleAnnounce(now + self.config.announce_interval),
        ]
    }

    /// Someone is searching for neighbors: identify ourselves to them.
    pub fn on_announce(&mut self, from: NodeId, _now: SimTime) -> Vec<Effect> {
        if self.phase != Phase::Active || from == self.profile.id {
            return Vec::new();
        }
        let seq = self.alloc_seq();
        vec![Effect::Unicast {
            seq,
            to: from,
            body: MessageBody::AnswerAnnounce {
                skill: self.profile.skill.clone(),
                interests: self.profile.interests.clone(),
            },
        }]
    }

    /// Identification received from a neighbor answering our announcement.
    ///
    /// The neighbor is registered only when it shares at least one interest
    /// with us and is health-interested; only health-interested nodes
    /// evaluate trust at all. Answers carrying a competence outside the
    /// taxonomy are discarded.
    pub fn on_answer(
        &mut self,
        from: NodeId,
        skill: &str,
        interests: &InterestSet,
        now: SimTime,
        tax: &SkillTaxonomy,
    ) -> Vec<Effect> {
        if self.phase == Phase::Done {
            return Vec::new();
        }
        if !self.profile.interests.has_health_interest() {
            return Vec::new();
        }
        let common = self.profile.interests.common_count(interests);
        if common == 0 || !interests.has_health_interest() {
            return Vec::new();
        }
        let trust = match total_trust(&self.profile.interests, interests, skill, tax) {
            Ok(t) => t,
            Err(_) => return Vec::new(),
        };
        debug_assert!(trust.total > 0.0);
        let record = NeighborRecord {
            id: from,
            skill: skill.to_string(),
            interests: interests.clone(),
            trust,
            common_interests: common,
            registered_at: now,
        };
        self.community.register(record, now);
        vec![Effect::Registered {
            member: from,
            skill: skill.to_string(),
            trust,
            common_interests: common,
        }]
    }

    /// A critical event occurred: disseminate sensitive data to the most
    /// trusted community member, announce operation interruption, and stop
    /// announcing and answering. With acknowledgements enabled the node then
    /// waits for the ack (see [`NodeState::on_ack_timeout`]).
    pub fn trigger_emergency(&mut self, priority: u8, now: SimTime) -> Vec<Effect> {
        if self.phase != Phase::Active {
            return Vec::new();
        }
        self.emergency_at = Some(now);
        self.emergency_priority = Some(priority);
        let mut effects = Vec::new();
        match self.community.select_receiver() {
            Ok(member) => {
                let (to, skill, trust_total) =
                    (member.id, member.skill.clone(), member.trust.total);
                let seq = self.alloc_seq();
                effects.push(Effect::SendAlert {
                    seq,
                    to,
                    priority,
                    attempt: 0,
                    tier: classify_tier(&skill),
                    receiver_skill: skill,
                    trust_total,
                });
                if self.config.ack_mode == AckMode::None {
                    self.phase = Phase::Done;
                } else {
                    self.phase = Phase::AwaitingAck;
                    self.outstanding = Some(OutstandingAlert {
                        alert_seq: seq,
                        receiver: to,
                        attempt: 0,
                    });
                    effects.push(Effect::ScheduleAckTimeout {
                        at: now + self.config.ack_timeout,
                        attempt: 0,
                    });
                }
            }
            Err(NoReceiver) => {
                effects.push(Effect::Fault(FaultReason::NoCommunity));
                self.phase = Phase::Done;
            }
        }
        let seq = self.alloc_seq();
        effects.push(Effect::Broadcast {
            seq,
            body: MessageBody::StopAnnounce,
        });
        effects
    }

    /// Sensitive data received. Nodes that already interrupted their own
    /// operation discard it; the sender's timeout handles the loss.
    pub fn on_alert(
        &mut self,
        from: NodeId,
        alert_seq: u64,
        priority: u8,
        now: SimTime,
    ) -> Vec<Effect> {
        if self.phase != Phase::Active {
            return Vec::new();
        }
        match self.config.ack_mode {
            AckMode::None => Vec::new(),
            AckMode::Immediate => {
                let seq = self.alloc_seq();
                vec![Effect::SendAck {
                    seq,
                    to: from,
                    alert_seq,
                    priority,
                    alert_received_at: now,
                }]
            }
            AckMode::PriorityOrdered => {
                self.pending_acks.push(PendingAlert {
                    src: from,
                    alert_seq,
                    priority,
                    received_at: now,
                });
                if !self.drain_scheduled {
                    self.drain_scheduled = true;
                    vec![Effect::ScheduleAckDrain(now + self.config.ack_drain_delay)]
                } else {
                    Vec::new()
                }
            }
        }
    }

    /// Acknowledge all collected alerts: highest urgency (priority 1) first,
    /// reception order among equal priorities.
    pub fn on_ack_drain(&mut self, _now: SimTime) -> Vec<Effect> {
        self.drain_scheduled = false;
        let mut pending = std::mem::take(&mut self.pending_acks);
        pending.sort_by(|a, b| {
            a.priority
                .cmp(&b.priority)
                .then(a.received_at.cmp(&b.received_at))
                .then(a.src.cmp(&b.src))
        });
        pending
            .into_iter()
            .map(|p| Effect::SendAck {
                seq: self.alloc_seq(),
                to: p.src,
                alert_seq: p.alert_seq,
                priority: p.priority,
                alert_received_at: p.received_at,
            })
            .collect()
    }

    /// A neighbor interrupted its operation: purge it from the community so
    /// it cannot be selected to receive sensitive data.
    pub fn on_stop_announce(&mut self, from: NodeId, now: SimTime) -> Vec<Effect> {
        if self.phase == Phase::Done {
            return Vec::new();
        }
        if self.community.remove(from, now) {
            vec![Effect::MemberRemoved {
                member: from,
                reason: RemovalReason::StoppedOperation,
            }]
        } else {
            Vec::new()
        }
    }

    /// Acknowledgement for our outstanding alert: dissemination succeeded.
    pub fn on_ack(&mut self, _from: NodeId, alert_seq: u64, _now: SimTime) -> Vec<Effect> {
        if self.phase == Phase::AwaitingAck {
            if let Some(out) = self.outstanding {
                if out.alert_seq == alert_seq {
                    self.outstanding = None;
                    self.phase = Phase::Done;
                }
            }
        }
        Vec::new()
    }

    /// The selected receiver did not acknowledge in time: drop it from the
    /// community and retry with the next most trusted member, until the
    /// community is exhausted.
    pub fn on_ack_timeout(&mut self, attempt: u32, now: SimTime) -> Vec<Effect> {
        if self.phase != Phase::AwaitingAck {
            return Vec::new();
        }
        let out = match self.outstanding {
            Some(out) if out.attempt == attempt => out,
            _ => return Vec::new(),
        };
        let mut effects = Vec::new();
        if self.community.remove(out.receiver, now) {
            effects.push(Effect::MemberRemoved {
                member: out.receiver,
                reason: RemovalReason::AckTimeout,
            });
        }
        match self.community.select_receiver() {
            Ok(member) => {
                let (to, skill, trust_total) =
                    (member.id, member.skill.clone(), member.trust.total);
                let seq = self.alloc_seq();
                let attempt = out.attempt + 1;
                self.outstanding = Some(OutstandingAlert {
                    alert_seq: seq,
                    receiver: to,
                    attempt,
                });
                let priority = self.pending_priority();
                effects.push(Effect::SendAlert {
                    seq,
                    to,
                    priority,
                    attempt,
                    tier: classify_tier(&skill),
                    receiver_skill: skill,
                    trust_total,
                });
                effects.push(Effect::ScheduleAckTimeout {
                    at: now + self.config.ack_timeout,
                    attempt,
                });
            }
            Err(NoReceiver) => {
                self.outstanding = None;
                self.phase = Phase::Done;
                effects.push(Effect::Fault(FaultReason::CommunityExhausted));
            }
        }
        effects
    }

    fn pending_priority(&self) -> u8 {
        self.emergency_priority.unwrap_or(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::build_default_taxonomy;

    fn interests(labels: &[&str]) -> InterestSet {
        InterestSet::new(labels.iter().copied()).unwrap()
    }

    fn node(id: u32, skill: &str, labels: &[&str], mode: AckMode) -> NodeState {
        let profile = NodeProfile::new(NodeId(id), skill, interests(labels));
        let config = ProtocolConfig {
            ack_mode: mode,
            ..ProtocolConfig::default()
        };
        NodeState::new(profile, config)
    }

    fn register_answer(state: &mut NodeState, id: u32, skill: &str, labels: &[&str], t: f64) {
        let tax = build_default_taxonomy();
        let fx = state.on_answer(
            NodeId(id),
            skill,
            &interests(labels),
            SimTime::from_secs_f64(t),
            &tax,
        );
        assert!(
            fx.iter().any(|e| matches!(e, Effect::Registered { .. })),
            "expected registration for node {id}"
        );
    }

    #[test]
    fn announce_timer_resets_registry_and_rearms() {
        let mut n = node(1, "other", &["health"], AckMode::None);
        register_answer(&mut n, 2, "nurse", &["health"], 0.5);
        register_answer(&mut n, 3, "doctor", &["health"], 0.6);
        register_answer(&mut n, 4, "other", &["health"], 0.7);
        assert_eq!(n.community().len(), 3);

        let fx = n.on_announce_timer(SimTime::from_secs_f64(1.0));
        assert_eq!(n.community().len(), 0);
        assert!(matches!(fx[0], Effect::RegistryReset));
        assert!(matches!(
            fx[1],
            Effect::Broadcast {
                body: MessageBody::Announce,
                ..
            }
        ));
        assert_eq!(
            fx[2],
            Effect::ScheduleAnnounce(SimTime::from_secs_f64(2.0))
        );

        // idempotent on an already-empty registry
        let fx = n.on_announce_timer(SimTime::from_secs_f64(2.0));
        assert_eq!(fx.len(), 3);
        assert_eq!(n.community().len(), 0);
    }

    #[test]
    fn no_announce_after_emergency() {
        let mut n = node(1, "other", &["health"], AckMode::None);
        register_answer(&mut n, 2, "nurse", &["health"], 0.5);
        n.trigger_emergency(1, SimTime::from_secs_f64(1.0));
        assert!(n.on_announce_timer(SimTime::from_secs_f64(2.0)).is_empty());
        assert!(n
            .on_announce(NodeId(9), SimTime::from_secs_f64(2.1))
            .is_empty());
    }

    #[test]
    fn announce_is_answered_with_own_profile() {
        let mut n = node(50, "nurse", &["health", "music"], AckMode::None);
        let fx = n.on_announce(NodeId(37), SimTime::from_secs_f64(1.0));
        match &fx[..] {
            [Effect::Unicast {
                to,
                body: MessageBody::AnswerAnnounce { skill, interests },
                ..
            }] => {
                assert_eq!(*to, NodeId(37));
                assert_eq!(skill, "nurse");
                assert!(interests.has_health_interest());
            }
            other => panic!("unexpected effects: {other:?}"),
        }
        // own broadcast loops back: ignored
        assert!(n.on_announce(NodeId(50), SimTime::from_secs_f64(1.0)).is_empty());
    }

    #[test]
    fn answer_registration_filters() {
        let tax = build_default_taxonomy();
        let mut n = node(1, "other", &["health", "music"], AckMode::None);

        // health-interested with common interests: registered
        register_answer(&mut n, 2, "nurse", &["health", "books"], 0.2);
        assert!(n.community().contains(NodeId(2)));

        // no health interest: not registered
        let fx = n.on_answer(
            NodeId(3),
            "doctor",
            &interests(&["music"]),
            SimTime::from_secs_f64(0.3),
            &tax,
        );
        assert!(fx.is_empty());
        assert!(!n.community().contains(NodeId(3)));

        // unknown competence: discarded
        let fx = n.on_answer(
            NodeId(4),
            "wizard",
            &interests(&["health"]),
            SimTime::from_secs_f64(0.4),
            &tax,
        );
        assert!(fx.is_empty());

        // duplicate answer in one round overwrites, size unchanged
        register_answer(&mut n, 2, "doctor", &["health"], 0.5);
        assert_eq!(n.community().len(), 1);
        assert_eq!(n.community().member(NodeId(2)).unwrap().skill, "doctor");
    }

    #[test]
    fn non_health_node_never_registers() {
        let tax = build_default_taxonomy();
        let mut n = node(1, "other", &["music", "books"], AckMode::None);
        let fx = n.on_answer(
            NodeId(2),
            "doctor",
            &interests(&["health", "music"]),
            SimTime::from_secs_f64(0.2),
            &tax,
        );
        assert!(fx.is_empty());
        assert!(n.community().is_empty());
    }

    #[test]
    fn receiver_selection_and_tie_breaking() {
        let mut n = node(1, "other", &["health", "music", "tourism"], AckMode::None);
        register_answer(&mut n, 60, "doctor", &["health", "music", "tourism"], 0.1);
        register_answer(&mut n, 62, "doctor", &["health"], 0.2);
        // 60: interest 3/3, total 1.0; 62: interest 1/3, total 2/3
        assert_eq!(n.community().select_receiver().unwrap().id, NodeId(60));

        // equal totals: larger common-interest count wins
        let mut m = node(1, "other", &["health", "music", "books", "movies"], AckMode::None);
        let tax = build_default_taxonomy();
        // 13: 3 common, skill other -> total (3/4 + 0)/2 = 0.375
        m.on_answer(
            NodeId(13),
            "other",
            &interests(&["health", "music", "books"]),
            SimTime::from_secs_f64(0.1),
            &tax,
        );
        // 89: 2 common, pick skill to hit the same total: (2/4 + s)/2 = 0.375 -> s = 0.25; no
        // such label exists, so construct equality via identical profiles instead.
        m.on_answer(
            NodeId(89),
            "other",
            &interests(&["health", "music", "books"]),
            SimTime::from_secs_f64(0.2),
            &tax,
        );
        // identical trust and common count: smaller id wins
        assert_eq!(m.community().select_receiver().unwrap().id, NodeId(13));

        let empty = HealthCommunity::default();
        assert_eq!(empty.select_receiver().unwrap_err(), NoReceiver);
    }

    #[test]
    fn tie_break_oracle_enumeration() {
        // Enumerate candidate sets and check selection equals a brute-force
        // scan applying (total desc, common desc, id asc).
        let tax = build_default_taxonomy();
        let skills = ["doctor", "nurse", "caregiver", "other"];
        let evaluator = interests(&["health", "music", "tourism", "movies", "books"]);
        let mut n = NodeState::new(
            NodeProfile::new(NodeId(0), "other", evaluator.clone()),
            ProtocolConfig::default(),
        );
        let candidates: Vec<(u32, &str, Vec<&str>)> = vec![
            (13, "other", vec!["health", "music", "tourism"]),
            (89, "other", vec!["health", "music"]),
            (60, "doctor", vec!["health", "music", "tourism"]),
            (62, "doctor", vec!["health"]),
            (50, "nurse", vec!["health", "books"]),
            (7, "caregiver", vec!["health", "movies", "books"]),
        ];
        for (id, skill, labels) in &candidates {
            n.on_answer(
                NodeId(*id),
                skill,
                &interests(labels),
                SimTime::from_secs_f64(0.1),
                &tax,
            );
        }
        assert!(skills.iter().all(|s| tax.contains(s)));

        let selected = n.community().select_receiver().unwrap().id;
        let best = n
            .community()
            .members()
            .map(|r| (r.trust.total, r.common_interests, std::cmp::Reverse(r.id)))
            .max_by(|a, b| a.partial_cmp(b).unwrap())
            .unwrap();
        let brute = n
            .community()
            .members()
            .find(|r| {
                (r.trust.total, r.common_interests, std::cmp::Reverse(r.id))
                    .partial_cmp(&best)
                    .unwrap()
                    .is_eq()
            })
            .unwrap()
            .id;
        assert_eq!(selected, brute);
    }

    #[test]
    fn payload_tiers_by_competence_class() {
        let tax = build_default_taxonomy();
        assert_eq!(tailor_payload(&tax, "doctor").unwrap(), DataTier::FullRecord);
        assert_eq!(
            tailor_payload(&tax, "nurse").unwrap(),
            DataTier::VitalsAndMedication
        );
        for skill in ["caregiver", "police_officer", "firefighter", "life_saving", "other"] {
            assert_eq!(tailor_payload(&tax, skill).unwrap(), DataTier::VitalsOnly);
        }
        assert!(tailor_payload(&tax, "wizard").is_err());
    }

    #[test]
    fn emergency_sends_alert_and_stop() {
        let mut n = node(70, "other", &["health"], AckMode::None);
        register_answer(&mut n, 13, "other", &["health"], 0.1);
        register_answer(&mut n, 89, "other", &["health"], 0.2);
        let fx = n.trigger_emergency(1, SimTime::from_secs_f64(300.0));
        assert!(matches!(fx[0], Effect::SendAlert { to: NodeId(13), .. }));
        assert!(matches!(
            fx[1],
            Effect::Broadcast {
                body: MessageBody::StopAnnounce,
                ..
            }
        ));
        assert!(!n.is_active());
        // without acks the node is done; a second trigger is a no-op
        assert!(n.trigger_emergency(1, SimTime::from_secs_f64(301.0)).is_empty());
    }

    #[test]
    fn emergency_with_empty_community_faults_but_still_stops() {
        let mut n = node(37, "other", &["health"], AckMode::Immediate);
        let fx = n.trigger_emergency(1, SimTime::from_secs_f64(300.0));
        assert!(matches!(fx[0], Effect::Fault(FaultReason::NoCommunity)));
        assert!(matches!(
            fx[1],
            Effect::Broadcast {
                body: MessageBody::StopAnnounce,
                ..
            }
        ));
        assert!(!n.is_active());
    }

    #[test]
    fn alert_handling_per_ack_mode() {
        let t = SimTime::from_secs_f64(485.0);
        // no acknowledgement: receipt is log-only
        let mut senack = node(5, "doctor", &["health"], AckMode::None);
        assert!(senack.on_alert(NodeId(70), 3, 1, t).is_empty());

        // immediate acknowledgement
        let mut seack = node(5, "doctor", &["health"], AckMode::Immediate);
        let fx = seack.on_alert(NodeId(70), 3, 1, t);
        assert!(matches!(
            fx[..],
            [Effect::SendAck {
                to: NodeId(70),
                alert_seq: 3,
                ..
            }]
        ));

        // a node that already stopped discards alerts
        let mut stopped = node(5, "doctor", &["health"], AckMode::Immediate);
        stopped.phase = Phase::Done;
        assert!(stopped.on_alert(NodeId(70), 3, 1, t).is_empty());
    }

    #[test]
    fn priority_ordered_acks_drain_in_urgency_order() {
        let mut n = node(63, "doctor", &["health"], AckMode::PriorityOrdered);
        let t0 = SimTime::from_secs_f64(485.001);
        let t1 = SimTime::from_secs_f64(485.002);
        let fx = n.on_alert(NodeId(52), 10, 2, t0);
        assert!(matches!(fx[..], [Effect::ScheduleAckDrain(_)]));
        // second alert joins the pending queue without rescheduling
        assert!(n.on_alert(NodeId(69), 11, 1, t1).is_empty());

        let acks = n.on_ack_drain(t0 + n.config.ack_drain_delay);
        let order: Vec<(NodeId, u64)> = acks
            .iter()
            .map(|e| match e {
                Effect::SendAck { to, alert_seq, .. } => (*to, *alert_seq),
                other => panic!("unexpected effect {other:?}"),
            })
            .collect();
        assert_eq!(order, vec![(NodeId(69), 11), (NodeId(52), 10)]);
    }

    #[test]
    fn priority_ordered_acks_fifo_among_equal_priorities() {
        let mut n = node(63, "doctor", &["health"], AckMode::PriorityOrdered);
        let t0 = SimTime::from_secs_f64(485.001);
        let t1 = SimTime::from_secs_f64(485.004);
        n.on_alert(NodeId(70), 5, 3, t0);
        n.on_alert(NodeId(52), 6, 3, t1);
        let acks = n.on_ack_drain(SimTime::from_secs_f64(485.011));
        let order: Vec<NodeId> = acks
            .iter()
            .map(|e| match e {
                Effect::SendAck { to, .. } => *to,
                other => panic!("unexpected effect {other:?}"),
            })
            .collect();
        assert_eq!(order, vec![NodeId(70), NodeId(52)]);
    }

    #[test]
    fn stop_announce_removes_member_and_closes_period() {
        let mut n = node(1, "other", &["health"], AckMode::None);
        register_answer(&mut n, 2, "nurse", &["health"], 0.2);
        let fx = n.on_stop_announce(NodeId(2), SimTime::from_secs_f64(0.9));
        assert!(matches!(
            fx[..],
            [Effect::MemberRemoved {
                member: NodeId(2),
                reason: RemovalReason::StoppedOperation,
            }]
        ));
        assert!(n.community().is_empty());
        let periods = n.community().periods();
        assert_eq!(periods.len(), 1);
        assert_eq!(periods[0].join, SimTime::from_secs_f64(0.2));
        assert_eq!(periods[0].leave, SimTime::from_secs_f64(0.9));
        // absent member: no-op; node keeps operating
        assert!(n.on_stop_announce(NodeId(7), SimTime::from_secs_f64(1.0)).is_empty());
        assert!(n.is_active());
    }

    #[test]
    fn ack_timeout_retries_down_the_community() {
        let mut n = node(70, "other", &["health", "music"], AckMode::Immediate);
        register_answer(&mut n, 60, "doctor", &["health", "music"], 0.1);
        register_answer(&mut n, 13, "other", &["health"], 0.2);

        let fx = n.trigger_emergency(2, SimTime::from_secs_f64(300.0));
        let first_attempt = match &fx[0] {
            Effect::SendAlert { to, attempt, .. } => {
                assert_eq!(*to, NodeId(60));
                *attempt
            }
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(first_attempt, 0);

        // timeout: retry targets the remaining member with the same priority
        let fx = n.on_ack_timeout(0, SimTime::from_secs_f64(300.5));
        assert!(matches!(
            fx[0],
            Effect::MemberRemoved {
                member: NodeId(60),
                reason: RemovalReason::AckTimeout,
            }
        ));
        match &fx[1] {
            Effect::SendAlert {
                to,
                attempt,
                priority,
                ..
            } => {
                assert_eq!(*to, NodeId(13));
                assert_eq!(*attempt, 1);
                assert_eq!(*priority, 2);
            }
            other => panic!("unexpected {other:?}"),
        }

        // exhausted: terminate with a fault
        let fx = n.on_ack_timeout(1, SimTime::from_secs_f64(301.0));
        assert!(fx
            .iter()
            .any(|e| matches!(e, Effect::Fault(FaultReason::CommunityExhausted))));
        assert!(!n.is_active());
    }

    #[test]
    fn ack_before_timeout_completes_without_retry() {
        let mut n = node(70, "other", &["health"], AckMode::Immediate);
        register_answer(&mut n, 60, "doctor", &["health"], 0.1);
        let fx = n.trigger_emergency(1, SimTime::from_secs_f64(300.0));
        let alert_seq = match fx[0] {
            Effect::SendAlert { seq, .. } => seq,
            _ => panic!(),
        };
        n.on_ack(NodeId(60), alert_seq, SimTime::from_secs_f64(300.02));
        // stale timeout fires later: no retry
        assert!(n.on_ack_timeout(0, SimTime::from_secs_f64(300.5)).is_empty());
    }

    #[test]
    fn membership_periods_are_consistent() {
        let mut n = node(1, "other", &["health"], AckMode::None);
        for round in 0..5 {
            let t = SimTime::from_secs_f64(round as f64);
            n.on_announce_timer(t);
            if round % 2 == 0 {
                register_answer(&mut n, 2, "nurse", &["health"], round as f64 + 0.01);
            }
        }
        n.community_mut().close_periods(SimTime::from_secs_f64(5.0));
        let mut periods: Vec<_> = n.community().periods().to_vec();
        periods.sort_by_key(|p| (p.member, p.join));
        for p in &periods {
            assert!(p.join <= p.leave);
        }
        for pair in periods.windows(2) {
            if pair[0].member == pair[1].member {
                assert!(pair[0].leave <= pair[1].join, "overlapping periods");
            }
        }
    }

    #[test]
    fn round_freshness_after_timer() {
        let mut n = node(1, "other", &["health"], AckMode::None);
        register_answer(&mut n, 2, "nurse", &["health"], 0.4);
        register_answer(&mut n, 3, "doctor", &["health"], 0.5);
        n.on_announce_timer(SimTime::from_secs_f64(1.0));
        register_answer(&mut n, 4, "caregiver", &["health"], 1.01);
        let members: Vec<NodeId> = n.community().members().map(|r| r.id).collect();
        assert_eq!(members, vec![NodeId(4)]);
    }
}
