//! Evaluation metrics computed from run event logs.
//!
//! All measures exclude records before the transient-removal marker and are
//! averaged across repetitions. Community measures are derived from the raw
//! registry records: the round-scoped registry is lifted to a persistent view
//! by bridging the gap between a round reset and a re-registration within the
//! same round, so a neighbor answering every round counts as continuously
//! present.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::simkit::{EventLog, LogBody};
use crate::types::{NodeId, SimTime};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no event logs (or no post-transient intervals) to aggregate")]
    EmptyLogs,
    #[error("no emergencies recorded for the focal node")]
    NoEmergencies,
    #[error("no successful disseminations recorded for the focal node")]
    NoSuccesses,
}

/// Success of one repetition's emergency: who finally received the data.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessInfo {
    pub receiver: NodeId,
    pub receiver_skill: String,
    pub dispatched_at: SimTime,
    pub received_at: SimTime,
}

/// Per-repetition, per-focal-node reduction of an event log.
#[derive(Debug, Clone, Default)]
pub struct FocalDigest {
    /// Post-transient snapshot intervals observed.
    pub intervals: u32,
    /// Sum of radio-neighborhood sizes over those intervals.
    pub neighbor_sum: u64,
    /// Intervals during which the persistent community was non-empty.
    pub presence_sum: u32,
    /// Community episodes: empty-to-non-empty transitions of the persistent registry.
    pub episodes: u32,
    pub emergencies: u32,
    pub success: Option<SuccessInfo>,
}

/// Reduction of one repetition for a set of focal nodes.
#[derive(Debug, Clone, Default)]
pub struct RepDigest {
    pub per_focal: BTreeMap<NodeId, FocalDigest>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommunityAverages {
    /// Mean over intervals and repetitions of community presence (0 or 1).
    pub interval_avg: f64,
    /// Mean over repetitions of the community episode count.
    pub episode_mean: f64,
}

/// Extracts the per-focal digest of one repetition log.
///
/// `ack_required` selects the success criterion: plain alert delivery, or an
/// acknowledgement making it back to the disseminating node.
pub fn extract_digest(log: &EventLog, focal: &[NodeId], ack_required: bool) -> RepDigest {
    let warmup = log
        .records
        .iter()
        .find(|r| matches!(r.body, LogBody::Warmup))
        .map(|r| r.t)
        .unwrap_or(SimTime::ZERO);
    let end = log.records.iter().map(|r| r.t).max().unwrap_or(SimTime::ZERO);

    let mut digest = RepDigest::default();
    for &node in focal {
        digest
            .per_focal
            .insert(node, focal_digest(log, node, warmup, end, ack_required));
    }
    digest
}

fn focal_digest(
    log: &EventLog,
    focal: NodeId,
    warmup: SimTime,
    end: SimTime,
    ack_required: bool,
) -> FocalDigest {
    let mut out = FocalDigest::default();

    // Neighborhood sizes per snapshot interval.
    let mut snapshot_times: Vec<SimTime> = Vec::new();
    for rec in &log.records {
        if let LogBody::SnapshotNeighbors { node, count } = rec.body {
            if node == focal && rec.t >= warmup {
                snapshot_times.push(rec.t);
                out.neighbor_sum += count as u64;
                out.intervals += 1;
            }
        }
    }

    // Persistent community view from raw registry records.
    let presence = persistent_presence(log, focal, end);
    out.presence_sum = snapshot_times
        .iter()
        .filter(|&&t| presence.iter().any(|&(s, e)| s <= t && t < e))
        .count() as u32;
    out.episodes = presence
        .iter()
        .filter(|&&(s, e)| e > warmup && e > s)
        .count() as u32;

    // Emergency outcome.
    let mut dispatched_at = None;
    for rec in &log.records {
        if let LogBody::EmergencyTriggered { node, .. } = rec.body {
            if node == focal {
                out.emergencies += 1;
                if dispatched_at.is_none() {
                    dispatched_at = Some(rec.t);
                }
            }
        }
    }
    let dispatched_at = match dispatched_at {
        Some(t) => t,
        None => return out,
    };

    let mut alerts_sent: HashMap<u64, (NodeId, String)> = HashMap::new();
    let mut alert_delivered: HashMap<u64, SimTime> = HashMap::new();
    for rec in &log.records {
        match &rec.body {
            LogBody::AlertSent {
                node,
                to,
                seq,
                receiver_skill,
                ..
            } if *node == focal => {
                alerts_sent.insert(*seq, (*to, receiver_skill.clone()));
            }
            LogBody::Delivered {
                kind: crate::protocol::MessageKind::Alert,
                src,
                seq,
                ..
            } if *src == focal => {
                let t = alert_delivered.entry(*seq).or_insert(rec.t);
                *t = (*t).min(rec.t);
            }
            _ => {}
        }
    }

    let winning_alert: Option<u64> = if ack_required {
        log.records
            .iter()
            .filter_map(|rec| match &rec.body {
                LogBody::Delivered {
                    kind: crate::protocol::MessageKind::Ack,
                    dst,
                    reference: Some(aseq),
                    ..
                } if *dst == focal && alerts_sent.contains_key(aseq) => Some((rec.t, *aseq)),
                _ => None,
            })
            .min()
            .map(|(_, aseq)| aseq)
    } else {
        alert_delivered.iter().map(|(&seq, &t)| (t, seq)).min().map(|(_, s)| s)
    };

    if let Some(seq) = winning_alert {
        if let (Some((receiver, skill)), Some(&t_r)) =
            (alerts_sent.get(&seq), alert_delivered.get(&seq))
        {
            out.success = Some(SuccessInfo {
                receiver: *receiver,
                receiver_skill: skill.clone(),
                dispatched_at,
                received_at: t_r,
            });
        }
    }
    out
}

/// Half-open intervals during which the focal node's persistent community is
/// non-empty. Records at equal timestamps are applied in a canonical order
/// (registrations, removals, then resets), so same-instant record reordering
/// cannot change the result.
fn persistent_presence(log: &EventLog, focal: NodeId, end: SimTime) -> Vec<(SimTime, SimTime)> {
    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    enum Kind {
        Register(NodeId),
        Remove(NodeId),
        Reset,
    }
    let mut events: Vec<(SimTime, Kind)> = Vec::new();
    for rec in &log.records {
        match &rec.body {
            LogBody::Registered { owner, member, .. } if *owner == focal => {
                events.push((rec.t, Kind::Register(*member)));
            }
            LogBody::MemberRemoved { owner, member, .. } if *owner == focal => {
                events.push((rec.t, Kind::Remove(*member)));
            }
            LogBody::RegistryReset { owner } if *owner == focal => {
                events.push((rec.t, Kind::Reset));
            }
            _ => {}
        }
    }
    events.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    let mut resets: Vec<SimTime> = Vec::new();
    let mut open: BTreeMap<NodeId, SimTime> = BTreeMap::new();
    let mut raw: BTreeMap<NodeId, Vec<(SimTime, SimTime)>> = BTreeMap::new();
    for (t, kind) in events {
        match kind {
            Kind::Register(m) => {
                open.entry(m).or_insert(t);
            }
            Kind::Remove(m) => {
                if let Some(join) = open.remove(&m) {
                    raw.entry(m).or_default().push((join, t));
                }
            }
            Kind::Reset => {
                resets.push(t);
                for (m, join) in std::mem::take(&mut open) {
                    raw.entry(m).or_default().push((join, t));
                }
            }
        }
    }
    // Members still registered at the end stay present through the last
    // instant, so the synthetic closure lands just past it.
    let past_end = SimTime::from_micros(end.as_micros() + 1);
    for (m, join) in open {
        raw.entry(m).or_default().push((join, past_end));
    }

    // Bridge reset-to-re-registration gaps that stay within one round: merge
    // consecutive raw periods when no further reset falls inside the gap.
    let mut merged: Vec<(SimTime, SimTime)> = Vec::new();
    for periods in raw.values() {
        let mut current: Option<(SimTime, SimTime)> = None;
        for &(join, leave) in periods {
            match current {
                None => current = Some((join, leave)),
                Some((cj, cl)) => {
                    let blocked = resets.iter().any(|&r| cl < r && r <= join);
                    if !blocked {
                        current = Some((cj, leave.max(cl)));
                    } else {
                        merged.push((cj, cl));
                        current = Some((join, leave));
                    }
                }
            }
        }
        if let Some(p) = current {
            merged.push(p);
        }
    }
    merged.retain(|&(s, e)| e > s);
    merged.sort();

    // Union of member intervals.
    let mut union: Vec<(SimTime, SimTime)> = Vec::new();
    for (s, e) in merged {
        match union.last_mut() {
            Some((_, ue)) if s <= *ue => *ue = (*ue).max(e),
            _ => union.push((s, e)),
        }
    }
    union
}

fn digests_for(
    logs: &[EventLog],
    focal: NodeId,
    ack_required: bool,
) -> Result<Vec<FocalDigest>, MetricsError> {
    if logs.is_empty() {
        return Err(MetricsError::EmptyLogs);
    }
    Ok(logs
        .iter()
        .map(|log| {
            extract_digest(log, &[focal], ack_required)
                .per_focal
                .remove(&focal)
                .expect("digest for requested focal node")
        })
        .collect())
}

/// Average number of radio neighbors of the focal node per snapshot interval,
/// across repetitions.
pub fn avg_neighbors(logs: &[EventLog], focal: NodeId) -> Result<f64, MetricsError> {
    let digests = digests_for(logs, focal, false)?;
    combine_neighbors(&digests)
}

fn combine_neighbors(digests: &[FocalDigest]) -> Result<f64, MetricsError> {
    if digests.iter().any(|d| d.intervals == 0) {
        return Err(MetricsError::EmptyLogs);
    }
    let per_rep: f64 = digests
        .iter()
        .map(|d| d.neighbor_sum as f64 / d.intervals as f64)
        .sum();
    Ok(per_rep / digests.len() as f64)
}

/// Average number of health communities maintained by the focal node: both
/// the per-interval presence average and the per-run episode count.
pub fn avg_communities(
    logs: &[EventLog],
    focal: NodeId,
) -> Result<CommunityAverages, MetricsError> {
    let digests = digests_for(logs, focal, false)?;
    combine_communities(&digests)
}

fn combine_communities(digests: &[FocalDigest]) -> Result<CommunityAverages, MetricsError> {
    if digests.iter().any(|d| d.intervals == 0) {
        return Err(MetricsError::EmptyLogs);
    }
    let interval_avg = digests
        .iter()
        .map(|d| d.presence_sum as f64 / d.intervals as f64)
        .sum::<f64>()
        / digests.len() as f64;
    let episode_mean =
        digests.iter().map(|d| d.episodes as f64).sum::<f64>() / digests.len() as f64;
    Ok(CommunityAverages {
        interval_avg,
        episode_mean,
    })
}

/// Hit and fault rate over all repetitions: the share of emergencies whose
/// sensitive data reached (and, when required, was acknowledged by) the
/// selected receiver. The pair always sums to exactly 100.
pub fn hit_rate(
    logs: &[EventLog],
    focal: NodeId,
    ack_required: bool,
) -> Result<(f64, f64), MetricsError> {
    let digests = digests_for(logs, focal, ack_required)?;
    combine_hit_rate(&digests)
}

fn combine_hit_rate(digests: &[FocalDigest]) -> Result<(f64, f64), MetricsError> {
    let dispatched: u32 = digests.iter().map(|d| d.emergencies).sum();
    if dispatched == 0 {
        return Err(MetricsError::NoEmergencies);
    }
    let successes = digests.iter().filter(|d| d.success.is_some()).count() as u32;
    let hr = successes as f64 / dispatched as f64 * 100.0;
    Ok((hr, 100.0 - hr))
}

/// Share of successful disseminations per receiver competence.
pub fn hit_rate_by_skill(
    logs: &[EventLog],
    focal: NodeId,
    ack_required: bool,
) -> Result<BTreeMap<String, f64>, MetricsError> {
    let digests = digests_for(logs, focal, ack_required)?;
    combine_hit_rate_by_skill(&digests)
}

fn combine_hit_rate_by_skill(
    digests: &[FocalDigest],
) -> Result<BTreeMap<String, f64>, MetricsError> {
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    let mut successes = 0u32;
    for d in digests {
        if let Some(s) = &d.success {
            *counts.entry(s.receiver_skill.clone()).or_default() += 1;
            successes += 1;
        }
    }
    if successes == 0 {
        return Err(MetricsError::NoSuccesses);
    }
    Ok(counts
        .into_iter()
        .map(|(skill, k)| (skill, k as f64 / successes as f64 * 100.0))
        .collect())
}

/// Mean time from dissemination to the receipt of the finally-acknowledged
/// alert (or plain delivery without acknowledgements), in milliseconds,
/// over repetitions with a successful access.
pub fn avg_access_time(
    logs: &[EventLog],
    focal: NodeId,
    ack_required: bool,
) -> Result<f64, MetricsError> {
    let digests = digests_for(logs, focal, ack_required)?;
    combine_access_time(&digests)
}

fn combine_access_time(digests: &[FocalDigest]) -> Result<f64, MetricsError> {
    let times: Vec<f64> = digests
        .iter()
        .filter_map(|d| d.success.as_ref())
        .map(|s| (s.received_at - s.dispatched_at).as_millis_f64())
        .collect();
    if times.is_empty() {
        return Err(MetricsError::NoSuccesses);
    }
    Ok(times.iter().sum::<f64>() / times.len() as f64)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct NodeMetrics {
    pub node: u32,
    pub avg_neighbors: f64,
    pub community_interval_avg: f64,
    pub community_episodes: f64,
    pub dispatched: u32,
    pub successes: u32,
    pub hit_rate_pct: f64,
    pub fault_rate_pct: f64,
    pub hit_rate_by_skill_pct: BTreeMap<String, f64>,
    pub avg_access_time_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MetricsReport {
    pub repetitions: u32,
    pub intervals_per_rep: u32,
    pub nodes: Vec<NodeMetrics>,
}

/// Builds the full report for a set of focal nodes from in-memory logs.
pub fn build_report(
    logs: &[EventLog],
    focal: &[NodeId],
    ack_required: bool,
) -> Result<MetricsReport, MetricsError> {
    if logs.is_empty() {
        return Err(MetricsError::EmptyLogs);
    }
    let digests: Vec<RepDigest> = logs
        .iter()
        .map(|log| extract_digest(log, focal, ack_required))
        .collect();
    report_from_digests(&digests, focal)
}

/// Combines per-repetition digests into the final report. Order-independent:
/// digests may arrive from concurrently executed repetitions.
pub fn report_from_digests(
    digests: &[RepDigest],
    focal: &[NodeId],
) -> Result<MetricsReport, MetricsError> {
    if digests.is_empty() {
        return Err(MetricsError::EmptyLogs);
    }
    let mut nodes = Vec::new();
    let mut intervals_per_rep = 0;
    for &node in focal {
        let per_node: Vec<FocalDigest> = digests
            .iter()
            .map(|d| d.per_focal.get(&node).cloned().ok_or(MetricsError::EmptyLogs))
            .collect::<Result<_, _>>()?;
        let (hit_rate_pct, fault_rate_pct) = combine_hit_rate(&per_node)?;
        let successes = per_node.iter().filter(|d| d.success.is_some()).count() as u32;
        intervals_per_rep = per_node.first().map(|d| d.intervals).unwrap_or(0);
        nodes.push(NodeMetrics {
            node: node.0,
            avg_neighbors: combine_neighbors(&per_node)?,
            community_interval_avg: combine_communities(&per_node)?.interval_avg,
            community_episodes: combine_communities(&per_node)?.episode_mean,
            dispatched: per_node.iter().map(|d| d.emergencies).sum(),
            successes,
            hit_rate_pct,
            fault_rate_pct,
            hit_rate_by_skill_pct: combine_hit_rate_by_skill(&per_node).unwrap_or_default(),
            avg_access_time_ms: combine_access_time(&per_node).ok(),
        });
    }
    Ok(MetricsReport {
        repetitions: digests.len() as u32,
        intervals_per_rep,
        nodes,
    })
}

impl MetricsReport {
    /// One metric per line: `node.metric=value`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("repetitions={}\n", self.repetitions));
        out.push_str(&format!("intervals_per_rep={}\n", self.intervals_per_rep));
        for n in &self.nodes {
            out.push_str(&format!("{}.n_n={:.4}\n", n.node, n.avg_neighbors));
            out.push_str(&format!(
                "{}.n_c_interval_avg={:.4}\n",
                n.node, n.community_interval_avg
            ));
            out.push_str(&format!(
                "{}.n_c_episodes={:.4}\n",
                n.node, n.community_episodes
            ));
            out.push_str(&format!("{}.a_disp={}\n", n.node, n.dispatched));
            out.push_str(&format!("{}.a_success={}\n", n.node, n.successes));
            out.push_str(&format!("{}.hr={:.2}\n", n.node, n.hit_rate_pct));
            out.push_str(&format!("{}.fr={:.2}\n", n.node, n.fault_rate_pct));
            for (skill, pct) in &n.hit_rate_by_skill_pct {
                out.push_str(&format!("{}.hr_skill.{}={:.2}\n", n.node, skill, pct));
            }
            match n.avg_access_time_ms {
                Some(at) => out.push_str(&format!("{}.at_ms={:.3}\n", n.node, at)),
                None => out.push_str(&format!("{}.at_ms=-\n", n.node)),
            }
        }
        out
    }

    /// CSV mirroring the result-table layout: dissemination, latency, and
    /// per-competence control sections.
    pub fn to_csv(&self, scenario: &str, skill_classes: &[String]) -> String {
        let mut out = String::from("section,scenario,node,metric,value\n");
        for n in &self.nodes {
            out.push_str(&format!(
                "dissemination,{scenario},{},hr_pct,{:.2}\n",
                n.node, n.hit_rate_pct
            ));
            out.push_str(&format!(
                "dissemination,{scenario},{},fr_pct,{:.2}\n",
                n.node, n.fault_rate_pct
            ));
        }
        for n in &self.nodes {
            match n.avg_access_time_ms {
                Some(at) => out.push_str(&format!(
                    "latency,{scenario},{},at_ms,{:.3}\n",
                    n.node, at
                )),
                None => out.push_str(&format!("latency,{scenario},{},at_ms,-\n", n.node)),
            }
        }
        for n in &self.nodes {
            let mut classes: Vec<String> = skill_classes.to_vec();
            for k in n.hit_rate_by_skill_pct.keys() {
                if !classes.contains(k) {
                    classes.push(k.clone());
                }
            }
            for class in classes {
                let pct = n.hit_rate_by_skill_pct.get(&class).copied().unwrap_or(0.0);
                out.push_str(&format!(
                    "control,{scenario},{},hr_skill.{class},{:.2}\n",
                    n.node, pct
                ));
            }
        }
        out
    }

    /// Newline-delimited JSON: one header object, then one object per node.
    pub fn to_jsonl(&self, scenario: &str) -> String {
        let mut out = String::new();
        out.push_str(
            &serde_json::json!({
                "scenario": scenario,
                "repetitions": self.repetitions,
                "intervals_per_rep": self.intervals_per_rep,
            })
            .to_string(),
        );
        out.push('\n');
        for n in &self.nodes {
            out.push_str(&serde_json::to_string(n).expect("metrics serialize"));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{DataTier, MessageKind};

    fn t(secs: f64) -> SimTime {
        SimTime::from_secs_f64(secs)
    }

    /// Log with a constant neighborhood and no registry activity.
    fn neighbors_log(counts: &[u32]) -> EventLog {
        let mut log = EventLog::default();
        for (i, &c) in counts.iter().enumerate() {
            log.push(
                t(i as f64 * 0.6),
                LogBody::SnapshotNeighbors {
                    node: NodeId(7),
                    count: c,
                },
            );
        }
        log
    }

    fn emergency_log(success: bool, latency_ms: f64, skill: &str) -> EventLog {
        let mut log = EventLog::default();
        log.push(t(0.0), LogBody::SnapshotNeighbors { node: NodeId(7), count: 1 });
        log.push(
            t(300.0),
            LogBody::EmergencyTriggered {
                node: NodeId(7),
                priority: 1,
            },
        );
        log.push(
            t(300.0),
            LogBody::AlertSent {
                node: NodeId(7),
                to: NodeId(9),
                seq: 5,
                attempt: 0,
                priority: 1,
                tier: DataTier::VitalsOnly,
                receiver_skill: skill.to_string(),
                trust_total: 0.5,
            },
        );
        if success {
            log.push(
                t(300.0) + SimTime::from_millis_f64(latency_ms),
                LogBody::Delivered {
                    kind: MessageKind::Alert,
                    src: NodeId(7),
                    dst: NodeId(9),
                    seq: 5,
                    reference: None,
                    sent_at: t(300.0),
                },
            );
        } else {
            log.push(
                t(300.0),
                LogBody::Dropped {
                    kind: MessageKind::Alert,
                    src: NodeId(7),
                    dst: NodeId(9),
                    seq: 5,
                    reason: "out_of_range".into(),
                },
            );
        }
        log
    }

    #[test]
    fn constant_neighborhood_averages_to_itself() {
        let logs = vec![neighbors_log(&[3, 3, 3, 3])];
        assert_eq!(avg_neighbors(&logs, NodeId(7)).unwrap(), 3.0);
    }

    #[test]
    fn cross_rep_neighbor_mean() {
        let logs = vec![neighbors_log(&[2, 2, 2]), neighbors_log(&[4, 4, 4])];
        assert_eq!(avg_neighbors(&logs, NodeId(7)).unwrap(), 3.0);
    }

    #[test]
    fn empty_logs_rejected() {
        assert_eq!(
            avg_neighbors(&[], NodeId(7)).unwrap_err(),
            MetricsError::EmptyLogs
        );
    }

    #[test]
    fn isolated_node_has_zero_communities() {
        let logs = vec![neighbors_log(&[0, 0, 0])];
        let c = avg_communities(&logs, NodeId(7)).unwrap();
        assert_eq!(c.interval_avg, 0.0);
        assert_eq!(c.episode_mean, 0.0);
    }

    fn registry_log() -> EventLog {
        // Two episodes: presence over rounds 1-2 (bridged across the round-2
        // reset), absence over round 3, then presence again in round 4.
        let mut log = EventLog::default();
        for i in 0..10 {
            log.push(
                t(i as f64 * 0.6),
                LogBody::SnapshotNeighbors {
                    node: NodeId(1),
                    count: 1,
                },
            );
        }
        for round in 0..5 {
            log.push(t(round as f64), LogBody::RegistryReset { owner: NodeId(1) });
        }
        // member 2 answers in rounds 1 and 2
        log.push(
            t(1.01),
            LogBody::Registered {
                owner: NodeId(1),
                member: NodeId(2),
                skill: "nurse".into(),
                interest_trust: 1.0,
                skill_trust: 1.0 / 3.0,
                total_trust: 2.0 / 3.0,
                common_interests: 1,
            },
        );
        log.push(
            t(2.01),
            LogBody::Registered {
                owner: NodeId(1),
                member: NodeId(2),
                skill: "nurse".into(),
                interest_trust: 1.0,
                skill_trust: 1.0 / 3.0,
                total_trust: 2.0 / 3.0,
                common_interests: 1,
            },
        );
        // round 3 empty; member 3 answers in round 4
        log.push(
            t(4.02),
            LogBody::Registered {
                owner: NodeId(1),
                member: NodeId(3),
                skill: "doctor".into(),
                interest_trust: 1.0,
                skill_trust: 1.0,
                total_trust: 1.0,
                common_interests: 1,
            },
        );
        log
    }

    #[test]
    fn two_disjoint_membership_episodes_count_as_two() {
        let logs = vec![registry_log()];
        let c = avg_communities(&logs, NodeId(1)).unwrap();
        assert_eq!(c.episode_mean, 2.0);
        // presence spans [1.01, 3.0) and [4.02, end]: snapshots at 1.2, 1.8,
        // 2.4, 4.2, 4.8, 5.4 of the ten in the log
        assert!((c.interval_avg - 6.0 / 10.0).abs() < 1e-12);
    }

    #[test]
    fn stable_membership_is_one_episode() {
        let mut log = EventLog::default();
        log.push(t(0.0), LogBody::SnapshotNeighbors { node: NodeId(1), count: 1 });
        for round in 0..50 {
            log.push(t(round as f64), LogBody::RegistryReset { owner: NodeId(1) });
            log.push(
                t(round as f64 + 0.01),
                LogBody::Registered {
                    owner: NodeId(1),
                    member: NodeId(2),
                    skill: "other".into(),
                    interest_trust: 1.0,
                    skill_trust: 0.0,
                    total_trust: 0.5,
                    common_interests: 1,
                },
            );
        }
        let c = avg_communities(&[log], NodeId(1)).unwrap();
        assert_eq!(c.episode_mean, 1.0);
    }

    #[test]
    fn hit_rate_fixtures() {
        // 34 successes in 35 repetitions
        let mut logs: Vec<EventLog> = (0..34).map(|_| emergency_log(true, 1.0, "other")).collect();
        logs.push(emergency_log(false, 0.0, "other"));
        let (hr, fr) = hit_rate(&logs, NodeId(7), false).unwrap();
        assert!((hr - 97.14).abs() < 5e-3);
        assert_eq!(hr + fr, 100.0);

        let logs: Vec<EventLog> = (0..35).map(|_| emergency_log(true, 1.0, "other")).collect();
        let (hr, fr) = hit_rate(&logs, NodeId(7), false).unwrap();
        assert_eq!((hr, fr), (100.0, 0.0));

        let logs: Vec<EventLog> = (0..35).map(|_| emergency_log(false, 0.0, "other")).collect();
        let (hr, fr) = hit_rate(&logs, NodeId(7), false).unwrap();
        assert_eq!((hr, fr), (0.0, 100.0));

        assert_eq!(
            hit_rate(&[neighbors_log(&[1])], NodeId(7), false).unwrap_err(),
            MetricsError::NoEmergencies
        );
    }

    #[test]
    fn ack_required_changes_the_success_criterion() {
        let log = emergency_log(true, 1.0, "other");
        let (hr, _) = hit_rate(std::slice::from_ref(&log), NodeId(7), false).unwrap();
        assert_eq!(hr, 100.0);
        // no ack in the log: delivery alone is not enough
        let (hr, fr) = hit_rate(std::slice::from_ref(&log), NodeId(7), true).unwrap();
        assert_eq!((hr, fr), (0.0, 100.0));

        let mut acked = log;
        acked.push(
            t(300.004),
            LogBody::Delivered {
                kind: MessageKind::Ack,
                src: NodeId(9),
                dst: NodeId(7),
                seq: 0,
                reference: Some(5),
                sent_at: t(300.002),
            },
        );
        let (hr, _) = hit_rate(&[acked], NodeId(7), true).unwrap();
        assert_eq!(hr, 100.0);
    }

    #[test]
    fn skill_rate_fixtures() {
        // 10 of 13 successes reached `other`-skilled receivers
        let mut logs: Vec<EventLog> = (0..10).map(|_| emergency_log(true, 1.0, "other")).collect();
        logs.extend((0..3).map(|_| emergency_log(true, 1.0, "nurse")));
        let by_skill = hit_rate_by_skill(&logs, NodeId(7), false).unwrap();
        assert!((by_skill["other"] - 76.92).abs() < 5e-3);
        assert!((by_skill["other"] - 10.0 / 13.0 * 100.0).abs() < 1e-9);
        let total: f64 = by_skill.values().sum();
        assert!((total - 100.0).abs() < 0.01);

        let logs = vec![emergency_log(true, 1.0, "nurse")];
        let by_skill = hit_rate_by_skill(&logs, NodeId(7), false).unwrap();
        assert_eq!(by_skill["nurse"], 100.0);

        let logs = vec![emergency_log(false, 0.0, "nurse")];
        assert_eq!(
            hit_rate_by_skill(&logs, NodeId(7), false).unwrap_err(),
            MetricsError::NoSuccesses
        );
    }

    #[test]
    fn access_time_fixtures() {
        let logs = vec![emergency_log(true, 17.0, "other")];
        assert_eq!(avg_access_time(&logs, NodeId(7), false).unwrap(), 17.0);

        let logs = vec![
            emergency_log(true, 4.0, "other"),
            emergency_log(true, 6.0, "other"),
        ];
        assert_eq!(avg_access_time(&logs, NodeId(7), false).unwrap(), 5.0);

        // failed repetitions do not contribute
        let logs = vec![
            emergency_log(true, 4.0, "other"),
            emergency_log(false, 0.0, "other"),
            emergency_log(true, 6.0, "other"),
        ];
        assert_eq!(avg_access_time(&logs, NodeId(7), false).unwrap(), 5.0);
    }

    #[test]
    fn warmup_excludes_early_snapshots() {
        let mut log = EventLog::default();
        log.push(t(10.0), LogBody::SnapshotNeighbors { node: NodeId(7), count: 100 });
        log.push(t(25.0), LogBody::Warmup);
        log.push(t(25.2), LogBody::SnapshotNeighbors { node: NodeId(7), count: 2 });
        log.push(t(25.8), LogBody::SnapshotNeighbors { node: NodeId(7), count: 4 });
        assert_eq!(avg_neighbors(&[log], NodeId(7)).unwrap(), 3.0);
    }

    #[test]
    fn metrics_invariant_under_same_timestamp_reordering() {
        let base = registry_log();
        let mut shuffled = base.clone();
        // reverse runs of equal timestamps
        let mut i = 0;
        while i < shuffled.records.len() {
            let mut j = i + 1;
            while j < shuffled.records.len() && shuffled.records[j].t == shuffled.records[i].t {
                j += 1;
            }
            shuffled.records[i..j].reverse();
            i = j;
        }
        let a = avg_communities(std::slice::from_ref(&base), NodeId(1)).unwrap();
        let b = avg_communities(&[shuffled.clone()], NodeId(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            avg_neighbors(&[base], NodeId(1)).unwrap(),
            avg_neighbors(&[shuffled], NodeId(1)).unwrap()
        );
    }

    #[test]
    fn report_identities() {
        let logs = vec![
            emergency_log(true, 4.0, "nurse"),
            emergency_log(false, 0.0, "nurse"),
            emergency_log(true, 6.0, "doctor"),
        ];
        let report = build_report(&logs, &[NodeId(7)], false).unwrap();
        let node = &report.nodes[0];
        assert_eq!(node.hit_rate_pct, 2.0 / 3.0 * 100.0);
        assert_eq!(node.hit_rate_pct + node.fault_rate_pct, 100.0);
        assert_eq!(node.avg_access_time_ms, Some(5.0));
        let total: f64 = node.hit_rate_by_skill_pct.values().sum();
        assert!((total - 100.0).abs() < 0.01);
        assert_eq!(report.repetitions, 3);
    }
}
