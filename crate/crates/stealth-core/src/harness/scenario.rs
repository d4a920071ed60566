//! Scenario construction and social-aspect assignment.
//!
//! Three evaluation scenarios exist. `senack`: single critical event per
//! focal node, no acknowledgement. `seack`: same, but the receiver must
//! acknowledge and unacknowledged alerts are retried down the community.
//! `meack`: multiple simultaneous events carrying a service priority, with
//! acknowledgements emitted in descending urgency.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::protocol::{AckMode, NodeProfile, ProtocolConfig};
use crate::simkit::RadioModel;
use crate::trust::InterestSet;
use crate::types::{NodeId, SimTime};

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario: {0}")]
    UnknownScenario(String),
    #[error("invalid override: {0}")]
    InvalidOverride(String),
    #[error("conflicting fixed profile: {0}")]
    ConflictingFixedProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Senack,
    Seack,
    Meack,
}

impl ScenarioKind {
    pub fn parse(name: &str) -> Result<Self, ScenarioError> {
        match name.trim().to_ascii_lowercase().as_str() {
            "senack" => Ok(ScenarioKind::Senack),
            "seack" => Ok(ScenarioKind::Seack),
            "meack" => Ok(ScenarioKind::Meack),
            other => Err(ScenarioError::UnknownScenario(other.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Senack => "senack",
            ScenarioKind::Seack => "seack",
            ScenarioKind::Meack => "meack",
        }
    }

    pub fn ack_mode(self) -> AckMode {
        match self {
            ScenarioKind::Senack => AckMode::None,
            ScenarioKind::Seack => AckMode::Immediate,
            ScenarioKind::Meack => AckMode::PriorityOrdered,
        }
    }

    pub fn ack_required(self) -> bool {
        self != ScenarioKind::Senack
    }
}

/// How competences and interests are distributed over the node population.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialDistribution {
    /// Nodes per competence; nodes left unaccounted for are assigned `other`.
    pub skill_counts: BTreeMap<String, u32>,
    /// Nodes per interest, treated as exact target multiplicities subject to
    /// the 1..=5 interests-per-node bound.
    pub interest_counts: BTreeMap<String, u32>,
}

impl Default for SocialDistribution {
    fn default() -> Self {
        let skill_counts = [("doctor", 10), ("nurse", 15), ("caregiver", 20), ("other", 25)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let interest_counts = [
            ("health", 20),
            ("music", 30),
            ("tourism", 45),
            ("movies", 60),
            ("books", 15),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        SocialDistribution {
            skill_counts,
            interest_counts,
        }
    }
}

impl SocialDistribution {
    pub fn interest_universe(&self) -> Vec<String> {
        self.interest_counts.keys().cloned().collect()
    }

    pub fn skill_classes(&self) -> Vec<String> {
        self.skill_counts.keys().cloned().collect()
    }
}

/// Skill assignment mode for the unaccounted population share.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkillAssignment {
    /// Honor the configured counts exactly; the shortfall gets `other`.
    Counts,
    /// Draw every node independently with probabilities proportional to the
    /// configured counts.
    Weights,
}

impl SkillAssignment {
    pub fn parse(name: &str) -> Result<Self, ScenarioError> {
        match name.trim().to_ascii_lowercase().as_str() {
            "counts" => Ok(SkillAssignment::Counts),
            "weights" => Ok(SkillAssignment::Weights),
            other => Err(ScenarioError::InvalidOverride(format!(
                "skill assignment must be counts|weights, got {other}"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SkillAssignment::Counts => "counts",
            SkillAssignment::Weights => "weights",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub n_nodes: u32,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub emergency_time_s: f64,
    pub focal: Vec<NodeId>,
    /// Designated receiver co-located with the focal nodes (meack only).
    pub receiver: Option<NodeId>,
    pub priorities: BTreeMap<NodeId, u8>,
    pub announce_interval_s: f64,
    pub ack_timeout_ms: f64,
    pub ack_drain_ms: f64,
    pub radio: RadioModel,
    pub repetitions: u32,
    pub seed: u64,
    pub snapshot_interval_s: f64,
    pub area: (f64, f64),
    pub speed_range: (f64, f64),
    pub distribution: SocialDistribution,
    pub skill_assignment: SkillAssignment,
    pub workers: u32,
}

/// Optional overrides applied on top of a scenario's defaults.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n_nodes: Option<u32>,
    pub duration_s: Option<f64>,
    pub emergency_time_s: Option<f64>,
    pub announce_interval_s: Option<f64>,
    pub ack_timeout_ms: Option<f64>,
    pub radius_m: Option<f64>,
    pub repetitions: Option<u32>,
    pub seed: Option<u64>,
    pub skill_assignment: Option<SkillAssignment>,
    pub workers: Option<u32>,
}

/// Builds a scenario configuration from its name plus overrides.
pub fn build_scenario(name: &str, overrides: &Overrides) -> Result<ScenarioConfig, ScenarioError> {
    let kind = ScenarioKind::parse(name)?;
    let (emergency_time_s, focal, receiver) = match kind {
        ScenarioKind::Senack | ScenarioKind::Seack => {
            (300.0, vec![NodeId(37), NodeId(52), NodeId(70)], None)
        }
        ScenarioKind::Meack => (
            485.0,
            vec![NodeId(52), NodeId(69), NodeId(70)],
            Some(NodeId(63)),
        ),
    };
    let priorities = match kind {
        ScenarioKind::Meack => focal
            .iter()
            .enumerate()
            .map(|(i, &n)| (n, (i as u8 % 4) + 1))
            .collect(),
        _ => BTreeMap::new(),
    };
    let mut config = ScenarioConfig {
        kind,
        n_nodes: 100,
        duration_s: 900.0,
        warmup_s: 25.0,
        emergency_time_s,
        focal,
        receiver,
        priorities,
        announce_interval_s: 1.0,
        ack_timeout_ms: 500.0,
        ack_drain_ms: 10.0,
        radio: RadioModel::default(),
        repetitions: 35,
        seed: 1,
        snapshot_interval_s: 0.6,
        area: (400.0, 430.0),
        speed_range: (0.5, 2.0),
        distribution: SocialDistribution::default(),
        skill_assignment: SkillAssignment::Counts,
        workers: std::thread::available_parallelism()
            .map(|p| p.get() as u32)
            .unwrap_or(1)
            .min(8),
    };

    if let Some(n) = overrides.n_nodes {
        config.n_nodes = n;
    }
    if let Some(d) = overrides.duration_s {
        config.duration_s = d;
    }
    if let Some(t) = overrides.emergency_time_s {
        config.emergency_time_s = t;
    }
    if let Some(a) = overrides.announce_interval_s {
        config.announce_interval_s = a;
    }
    if let Some(t) = overrides.ack_timeout_ms {
        config.ack_timeout_ms = t;
    }
    if let Some(r) = overrides.radius_m {
        config.radio.radius_m = r;
    }
    if let Some(r) = overrides.repetitions {
        config.repetitions = r;
    }
    if let Some(s) = overrides.seed {
        config.seed = s;
    }
    if let Some(s) = overrides.skill_assignment {
        config.skill_assignment = s;
    }
    if let Some(w) = overrides.workers {
        config.workers = w.max(1);
    }
    validate(&config)?;
    Ok(config)
}

fn validate(config: &ScenarioConfig) -> Result<(), ScenarioError> {
    let bad = |reason: String| Err(ScenarioError::InvalidOverride(reason));
    if config.n_nodes == 0 {
        return bad("n_nodes must be positive".into());
    }
    if config.repetitions == 0 {
        return bad("repetitions must be positive".into());
    }
    if config.duration_s <= 0.0 || config.announce_interval_s <= 0.0 {
        return bad("duration and announce interval must be positive".into());
    }
    if config.emergency_time_s <= config.warmup_s || config.emergency_time_s > config.duration_s {
        return bad(format!(
            "emergency time {} must lie in ({}, {}]",
            config.emergency_time_s, config.warmup_s, config.duration_s
        ));
    }
    if config.ack_timeout_ms <= 0.0 {
        return bad("ack timeout must be positive".into());
    }
    if config.radio.radius_m < 0.0 {
        return bad("radius must be non-negative".into());
    }
    for id in config.focal.iter().chain(config.receiver.iter()) {
        if id.0 >= config.n_nodes {
            return bad(format!("node {id} does not exist with n_nodes={}", config.n_nodes));
        }
    }
    if config.kind == ScenarioKind::Meack {
        for n in &config.focal {
            match config.priorities.get(n) {
                Some(p) if (1..=4).contains(p) => {}
                _ => return bad(format!("meack needs a priority in 1..=4 for node {n}")),
            }
        }
    } else if !config.priorities.is_empty() {
        return bad("priorities are only defined for meack".into());
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            announce_interval: SimTime::from_secs_f64(self.announce_interval_s),
            ack_timeout: SimTime::from_millis_f64(self.ack_timeout_ms),
            ack_drain_delay: SimTime::from_millis_f64(self.ack_drain_ms),
            ack_mode: self.kind.ack_mode(),
        }
    }

    /// Fixed profiles: focal nodes hold the `other` competence and all
    /// configured interests in every repetition; the meack receiver holds the
    /// reference competence instead.
    pub fn fixed_profiles(&self) -> BTreeMap<NodeId, NodeProfile> {
        let all_interests =
            InterestSet::new(self.distribution.interest_universe()).expect("universe non-empty");
        let mut fixed = BTreeMap::new();
        for &node in &self.focal {
            fixed.insert(node, NodeProfile::new(node, "other", all_interests.clone()));
        }
        if let Some(receiver) = self.receiver {
            fixed.insert(
                receiver,
                NodeProfile::new(receiver, "doctor", all_interests.clone()),
            );
        }
        fixed
    }
}

/// Assigns social aspects to `n` nodes: fixed nodes keep their exact
/// configured profile; the rest draw competences and interests from the
/// distribution with a seeded generator.
///
/// Counts mode honors skill counts exactly (fixed profiles consume their
/// competence's count; any unaccounted shortfall is assigned `other`).
/// Interest targets are met exactly whenever the per-node 1..=5 bound allows;
/// with the built-in five-label universe that is always the case.
pub fn assign_social_aspects(
    n: u32,
    dist: &SocialDistribution,
    fixed: &BTreeMap<NodeId, NodeProfile>,
    skill_assignment: SkillAssignment,
    seed: u64,
) -> Result<Vec<NodeProfile>, ScenarioError> {
    for (&id, profile) in fixed {
        if id.0 >= n {
            return Err(ScenarioError::ConflictingFixedProfile(format!(
                "fixed node {id} does not exist with n_nodes={n}"
            )));
        }
        if profile.id != id {
            return Err(ScenarioError::ConflictingFixedProfile(format!(
                "fixed profile for {id} carries id {}",
                profile.id
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let free: Vec<NodeId> = (0..n).map(NodeId).filter(|id| !fixed.contains_key(id)).collect();

    // Competences.
    let mut remaining: BTreeMap<&str, i64> = dist
        .skill_counts
        .iter()
        .map(|(k, &v)| (k.as_str(), v as i64))
        .collect();
    for profile in fixed.values() {
        if let Some(c) = remaining.get_mut(profile.skill.as_str()) {
            *c -= 1;
        }
    }
    let skills: Vec<String> = match skill_assignment {
        SkillAssignment::Counts => {
            let mut pool: Vec<&str> = Vec::with_capacity(free.len());
            for (skill, &count) in &remaining {
                for _ in 0..count.max(0) {
                    pool.push(skill);
                }
            }
            while pool.len() < free.len() {
                pool.push("other");
            }
            pool.shuffle(&mut rng);
            pool.truncate(free.len());
            pool.into_iter().map(String::from).collect()
        }
        SkillAssignment::Weights => {
            let weights: Vec<(&str, u32)> = dist
                .skill_counts
                .iter()
                .map(|(k, &v)| (k.as_str(), v))
                .collect();
            let total: u32 = weights.iter().map(|(_, w)| w).sum();
            (0..free.len())
                .map(|_| {
                    let mut pick = rng.random_range(0..total.max(1));
                    for (skill, w) in &weights {
                        if pick < *w {
                            return skill.to_string();
                        }
                        pick -= w;
                    }
                    "other".to_string()
                })
                .collect()
        }
    };

    // Interests: exact target multiplicities, 1..=5 per node. Fixed profiles
    // consume their interests from the targets first. Each free node gets one
    // interest, then the leftover units are dealt to eligible nodes.
    let universe = dist.interest_universe();
    let mut targets: BTreeMap<&str, i64> = dist
        .interest_counts
        .iter()
        .map(|(k, &v)| (k.as_str(), v as i64))
        .collect();
    for profile in fixed.values() {
        for label in profile.interests.iter() {
            if let Some(c) = targets.get_mut(label) {
                *c -= 1;
            }
        }
    }

    let mut slots: Vec<String> = Vec::new();
    for (label, &count) in &targets {
        for _ in 0..count.max(0) {
            slots.push(label.to_string());
        }
    }
    slots.shuffle(&mut rng);

    let mut node_interests: Vec<Vec<String>> = vec![Vec::new(); free.len()];
    // round one: a first interest for every node, drawn from the slot pool
    for interests in node_interests.iter_mut() {
        if let Some(slot) = slots.pop() {
            interests.push(slot);
        } else {
            // targets exhausted before every node got one; exceed the target
            // minimally on a seeded pick so the 1..=5 bound holds
            interests.push(universe[rng.random_range(0..universe.len())].clone());
        }
    }
    // deal the remaining units to nodes that lack that interest and have room
    let max_per_node = 5.min(universe.len());
    for slot in slots {
        let eligible: Vec<usize> = (0..free.len())
            .filter(|&i| node_interests[i].len() < max_per_node && !node_interests[i].contains(&slot))
            .collect();
        if eligible.is_empty() {
            // infeasible leftover unit (only possible with custom universes
            // larger than the per-node bound); drop it
            continue;
        }
        let pick = eligible[rng.random_range(0..eligible.len())];
        node_interests[pick].push(slot);
    }

    let mut profiles: Vec<NodeProfile> = Vec::with_capacity(n as usize);
    let mut free_iter = free.iter().zip(skills.iter().zip(node_interests.iter()));
    for id in (0..n).map(NodeId) {
        if let Some(profile) = fixed.get(&id) {
            profiles.push(profile.clone());
            continue;
        }
        let (fid, (skill, interests)) = free_iter.next().expect("free nodes cover the rest");
        debug_assert_eq!(*fid, id);
        profiles.push(NodeProfile::new(
            id,
            skill,
            InterestSet::new(interests.iter()).expect("at least one interest"),
        ));
    }
    Ok(profiles)
}
