//! Run event logs: typed records, deterministic text export, and parsing.
//!
//! Two text forms exist. The structured form (`t=<us> ev=<kind> k=v ...`) is
//! self-describing, lossless and machine-readable; stored repetition logs use
//! it and the metrics pipeline can re-ingest it. The flat form
//! (`t_ms,event_kind,src,dst,detail`) is a compact human-oriented export.

use std::fmt::Write as _;

use thiserror::Error;

use crate::protocol::{DataTier, MessageKind};
use crate::types::{NodeId, SimTime};

#[derive(Debug, Error)]
pub enum LogParseError {
    #[error("log parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogBody {
    /// Transient-removal marker: records before it are excluded from metrics.
    Warmup,
    /// Radio neighborhood size of a node at a snapshot instant.
    SnapshotNeighbors { node: NodeId, count: u32 },
    AnnounceSent { node: NodeId, seq: u64 },
    AnswerSent { node: NodeId, to: NodeId, seq: u64 },
    StopSent { node: NodeId, seq: u64 },
    AlertSent {
        node: NodeId,
        to: NodeId,
        seq: u64,
        attempt: u32,
        priority: u8,
        tier: DataTier,
        receiver_skill: String,
        trust_total: f64,
    },
    AckSent {
        node: NodeId,
        to: NodeId,
        seq: u64,
        alert_seq: u64,
        priority: u8,
        alert_received_at: SimTime,
    },
    Delivered {
        kind: MessageKind,
        src: NodeId,
        dst: NodeId,
        seq: u64,
        /// Alert sequence referenced by an acknowledgement.
        reference: Option<u64>,
        sent_at: SimTime,
    },
    Dropped {
        kind: MessageKind,
        src: NodeId,
        dst: NodeId,
        seq: u64,
        reason: String,
    },
    Registered {
        owner: NodeId,
        member: NodeId,
        skill: String,
        interest_trust: f64,
        skill_trust: f64,
        total_trust: f64,
        common_interests: u32,
    },
    RegistryReset { owner: NodeId },
    MemberRemoved {
        owner: NodeId,
        member: NodeId,
        reason: String,
    },
    EmergencyTriggered { node: NodeId, priority: u8 },
    Fault { node: NodeId, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub t: SimTime,
    pub body: LogBody,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub records: Vec<LogRecord>,
}

fn kind_name(kind: MessageKind) -> &'static str {
    kind.as_str()
}

fn parse_kind(s: &str) -> Option<MessageKind> {
    Some(match s {
        "announce" => MessageKind::Announce,
        "answer" => MessageKind::Answer,
        "alert" => MessageKind::Alert,
        "ack" => MessageKind::Ack,
        "stop" => MessageKind::Stop,
        _ => return None,
    })
}

fn tier_name(tier: DataTier) -> &'static str {
    tier.as_str()
}

fn parse_tier(s: &str) -> Option<DataTier> {
    Some(match s {
        "full_record" => DataTier::FullRecord,
        "vitals_and_medication" => DataTier::VitalsAndMedication,
        "vitals_only" => DataTier::VitalsOnly,
        _ => return None,
    })
}

impl EventLog {
    pub fn push(&mut self, t: SimTime, body: LogBody) {
        self.records.push(LogRecord { t, body });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Lossless structured export, one `t=<us> ev=<name> ...` record per line.
    pub fn to_structured(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            let _ = write!(out, "t={}", rec.t.as_micros());
            match &rec.body {
                LogBody::Warmup => out.push_str(" ev=warmup"),
                LogBody::SnapshotNeighbors { node, count } => {
                    let _ = write!(out, " ev=snap node={node} nbrs={count}");
                }
                LogBody::AnnounceSent { node, seq } => {
                    let _ = write!(out, " ev=announce_sent node={node} seq={seq}");
                }
                LogBody::AnswerSent { node, to, seq } => {
                    let _ = write!(out, " ev=answer_sent node={node} dst={to} seq={seq}");
                }
                LogBody::StopSent { node, seq } => {
                    let _ = write!(out, " ev=stop_sent node={node} seq={seq}");
                }
                LogBody::AlertSent {
                    node,
                    to,
                    seq,
                    attempt,
                    priority,
                    tier,
                    receiver_skill,
                    trust_total,
                } => {
                    let _ = write!(
                        out,
                        " ev=alert_sent node={node} dst={to} seq={seq} attempt={attempt} \
                         priority={priority} tier={} skill={receiver_skill} trust={trust_total}",
                        tier_name(*tier)
                    );
                }
                LogBody::AckSent {
                    node,
                    to,
                    seq,
                    alert_seq,
                    priority,
                    alert_received_at,
                } => {
                    let _ = write!(
                        out,
                        " ev=ack_sent node={node} dst={to} seq={seq} alert_seq={alert_seq} \
                         priority={priority} alert_recv={}",
                        alert_received_at.as_micros()
                    );
                }
                LogBody::Delivered {
                    kind,
                    src,
                    dst,
                    seq,
                    reference,
                    sent_at,
                } => {
                    let _ = write!(
                        out,
                        " ev=delivered kind={} src={src} dst={dst} seq={seq} sent={}",
                        kind_name(*kind),
                        sent_at.as_micros()
                    );
                    if let Some(r) = reference {
                        let _ = write!(out, " ref={r}");
                    }
                }
                LogBody::Dropped {
                    kind,
                    src,
                    dst,
                    seq,
                    reason,
                } => {
                    let _ = write!(
                        out,
                        " ev=dropped kind={} src={src} dst={dst} seq={seq} reason={reason}",
                        kind_name(*kind)
                    );
                }
                LogBody::Registered {
                    owner,
                    member,
                    skill,
                    interest_trust,
                    skill_trust,
                    total_trust,
                    common_interests,
                } => {
                    let _ = write!(
                        out,
                        " ev=registered owner={owner} member={member} skill={skill} \
                         t_i={interest_trust} t_s={skill_trust} t_total={total_trust} \
                         common={common_interests}"
                    );
                }
                LogBody::RegistryReset { owner } => {
                    let _ = write!(out, " ev=registry_reset owner={owner}");
                }
                LogBody::MemberRemoved {
                    owner,
                    member,
                    reason,
                } => {
                    let _ = write!(
                        out,
                        " ev=member_removed owner={owner} member={member} reason={reason}"
                    );
                }
                LogBody::EmergencyTriggered { node, priority } => {
                    let _ = write!(out, " ev=emergency node={node} priority={priority}");
                }
                LogBody::Fault { node, reason } => {
                    let _ = write!(out, " ev=fault node={node} reason={reason}");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Compact flat export: `t_ms,event_kind,src,dst,detail`.
    pub fn to_flat(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            let (kind, src, dst, detail) = match &rec.body {
                LogBody::Warmup => ("warmup".into(), "-".into(), "-".into(), String::new()),
                LogBody::SnapshotNeighbors { node, count } => {
                    ("snap".into(), node.to_string(), "-".into(), format!("nbrs={count}"))
                }
                LogBody::AnnounceSent { node, seq } => {
                    ("announce_sent".into(), node.to_string(), "*".into(), format!("seq={seq}"))
                }
                LogBody::AnswerSent { node, to, seq } => {
                    ("answer_sent".into(), node.to_string(), to.to_string(), format!("seq={seq}"))
                }
                LogBody::StopSent { node, seq } => {
                    ("stop_sent".into(), node.to_string(), "*".into(), format!("seq={seq}"))
                }
                LogBody::AlertSent {
                    node, to, seq, attempt, priority, tier, receiver_skill, ..
                } => (
                    "alert_sent".into(),
                    node.to_string(),
                    to.to_string(),
                    format!(
                        "seq={seq} attempt={attempt} priority={priority} tier={} skill={receiver_skill}",
                        tier_name(*tier)
                    ),
                ),
                LogBody::AckSent { node, to, seq, alert_seq, .. } => (
                    "ack_sent".into(),
                    node.to_string(),
                    to.to_string(),
                    format!("seq={seq} alert_seq={alert_seq}"),
                ),
                LogBody::Delivered { kind, src, dst, seq, reference, .. } => (
                    format!("{}_delivered", kind_name(*kind)),
                    src.to_string(),
                    dst.to_string(),
                    match reference {
                        Some(r) => format!("seq={seq} ref={r}"),
                        None => format!("seq={seq}"),
                    },
                ),
                LogBody::Dropped { kind, src, dst, seq, reason } => (
                    format!("{}_dropped", kind_name(*kind)),
                    src.to_string(),
                    dst.to_string(),
                    format!("seq={seq} reason={reason}"),
                ),
                LogBody::Registered { owner, member, total_trust, .. } => (
                    "registered".into(),
                    owner.to_string(),
                    member.to_string(),
                    format!("trust={total_trust}"),
                ),
                LogBody::RegistryReset { owner } => {
                    ("registry_reset".into(), owner.to_string(), "-".into(), String::new())
                }
                LogBody::MemberRemoved { owner, member, reason } => (
                    "member_removed".into(),
                    owner.to_string(),
                    member.to_string(),
                    format!("reason={reason}"),
                ),
                LogBody::EmergencyTriggered { node, priority } => (
                    "emergency".into(),
                    node.to_string(),
                    "-".into(),
                    format!("priority={priority}"),
                ),
                LogBody::Fault { node, reason } => {
                    ("fault".into(), node.to_string(), "-".into(), format!("reason={reason}"))
                }
            };
            let _ = writeln!(out, "{},{kind},{src},{dst},{detail}", rec.t);
        }
        out
    }

    /// Parses the structured form back into a log.
    pub fn parse_structured(text: &str) -> Result<EventLog, LogParseError> {
        let mut log = EventLog::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let txt = raw.trim();
            if txt.is_empty() {
                continue;
            }
            let mut fields = std::collections::HashMap::new();
            for part in txt.split_whitespace() {
                let (k, v) = part.split_once('=').ok_or_else(|| LogParseError::Parse {
                    line,
                    reason: format!("field `{part}` is not k=v"),
                })?;
                fields.insert(k, v);
            }
            let err = |reason: &str| LogParseError::Parse {
                line,
                reason: reason.to_string(),
            };
            let get = |k: &str| fields.get(k).copied().ok_or_else(|| err(&format!("missing {k}")));
            let get_u64 = |k: &str| -> Result<u64, LogParseError> {
                get(k)?.parse().map_err(|_| err(&format!("bad {k}")))
            };
            let get_u32 = |k: &str| -> Result<u32, LogParseError> {
                get(k)?.parse().map_err(|_| err(&format!("bad {k}")))
            };
            let get_f64 = |k: &str| -> Result<f64, LogParseError> {
                get(k)?.parse().map_err(|_| err(&format!("bad {k}")))
            };
            let get_node = |k: &str| -> Result<NodeId, LogParseError> {
                Ok(NodeId(get_u32(k)?))
            };

            let t = SimTime::from_micros(get_u64("t")?);
            let body = match get("ev")? {
                "warmup" => LogBody::Warmup,
                "snap" => LogBody::SnapshotNeighbors {
                    node: get_node("node")?,
                    count: get_u32("nbrs")?,
                },
                "announce_sent" => LogBody::AnnounceSent {
                    node: get_node("node")?,
                    seq: get_u64("seq")?,
                },
                "answer_sent" => LogBody::AnswerSent {
                    node: get_node("node")?,
                    to: get_node("dst")?,
                    seq: get_u64("seq")?,
                },
                "stop_sent" => LogBody::StopSent {
                    node: get_node("node")?,
                    seq: get_u64("seq")?,
                },
                "alert_sent" => LogBody::AlertSent {
                    node: get_node("node")?,
                    to: get_node("dst")?,
                    seq: get_u64("seq")?,
                    attempt: get_u32("attempt")?,
                    priority: get_u32("priority")? as u8,
                    tier: parse_tier(get("tier")?).ok_or_else(|| err("bad tier"))?,
                    receiver_skill: get("skill")?.to_string(),
                    trust_total: get_f64("trust")?,
                },
                "ack_sent" => LogBody::AckSent {
                    node: get_node("node")?,
                    to: get_node("dst")?,
                    seq: get_u64("seq")?,
                    alert_seq: get_u64("alert_seq")?,
                    priority: get_u32("priority")? as u8,
                    alert_received_at: SimTime::from_micros(get_u64("alert_recv")?),
                },
                "delivered" => LogBody::Delivered {
                    kind: parse_kind(get("kind")?).ok_or_else(|| err("bad kind"))?,
                    src: get_node("src")?,
                    dst: get_node("dst")?,
                    seq: get_u64("seq")?,
                    reference: match fields.get("ref") {
                        Some(v) => Some(v.parse().map_err(|_| err("bad ref"))?),
                        None => None,
                    },
                    sent_at: SimTime::from_micros(get_u64("sent")?),
                },
                "dropped" => LogBody::Dropped {
                    kind: parse_kind(get("kind")?).ok_or_else(|| err("bad kind"))?,
                    src: get_node("src")?,
                    dst: get_node("dst")?,
                    seq: get_u64("seq")?,
                    reason: get("reason")?.to_string(),
                },
                "registered" => LogBody::Registered {
                    owner: get_node("owner")?,
                    member: get_node("member")?,
                    skill: get("skill")?.to_string(),
                    interest_trust: get_f64("t_i")?,
                    skill_trust: get_f64("t_s")?,
                    total_trust: get_f64("t_total")?,
                    common_interests: get_u32("common")?,
                },
                "registry_reset" => LogBody::RegistryReset {
                    owner: get_node("owner")?,
                },
                "member_removed" => LogBody::MemberRemoved {
                    owner: get_node("owner")?,
                    member: get_node("member")?,
                    reason: get("reason")?.to_string(),
                },
                "emergency" => LogBody::EmergencyTriggered {
                    node: get_node("node")?,
                    priority: get_u32("priority")? as u8,
                },
                "fault" => LogBody::Fault {
                    node: get_node("node")?,
                    reason: get("reason")?.to_string(),
                },
                other => return Err(err(&format!("unknown event `{other}`"))),
            };
            log.push(t, body);
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_log() -> EventLog {
        let mut log = EventLog::default();
        log.push(SimTime::from_micros(25_000_000), LogBody::Warmup);
        log.push(
            SimTime::from_micros(25_200_000),
            LogBody::SnapshotNeighbors {
                node: NodeId(37),
                count: 3,
            },
        );
        log.push(
            SimTime::from_micros(300_000_000),
            LogBody::EmergencyTriggered {
                node: NodeId(37),
                priority: 1,
            },
        );
        log.push(
            SimTime::from_micros(300_000_000),
            LogBody::AlertSent {
                node: NodeId(37),
                to: NodeId(50),
                seq: 12,
                attempt: 0,
                priority: 1,
                tier: DataTier::VitalsAndMedication,
                receiver_skill: "nurse".into(),
                trust_total: 2.0 / 3.0,
            },
        );
        log.push(
            SimTime::from_micros(300_000_196),
            LogBody::Delivered {
                kind: MessageKind::Alert,
                src: NodeId(37),
                dst: NodeId(50),
                seq: 12,
                reference: None,
                sent_at: SimTime::from_micros(300_000_000),
            },
        );
        log.push(
            SimTime::from_micros(300_004_210),
            LogBody::Delivered {
                kind: MessageKind::Ack,
                src: NodeId(50),
                dst: NodeId(37),
                seq: 4,
                reference: Some(12),
                sent_at: SimTime::from_micros(300_001_000),
            },
        );
        log
    }

    #[test]
    fn structured_round_trip_is_lossless() {
        let log = sample_log();
        let text = log.to_structured();
        let reparsed = EventLog::parse_structured(&text).unwrap();
        assert_eq!(log, reparsed);
        assert_eq!(text, reparsed.to_structured());
    }

    #[test]
    fn flat_export_has_expected_shape() {
        let log = sample_log();
        let flat = log.to_flat();
        let lines: Vec<&str> = flat.lines().collect();
        assert_eq!(lines.len(), log.len());
        assert!(lines[0].starts_with("25000.000,warmup"));
        assert!(lines[4].starts_with("300000.196,alert_delivered,37,50,seq=12"));
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(EventLog::parse_structured("t=1 ev=snap node=1\n").is_err());
        assert!(EventLog::parse_structured("t=x ev=warmup\n").is_err());
        assert!(EventLog::parse_structured("hello\n").is_err());
    }
}
