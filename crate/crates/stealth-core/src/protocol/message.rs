//! Protocol messages and their canonical wire encoding.
//!
//! The encoding exists so message sizes feed the latency model
//! deterministically. Layout: an 8-byte header `tag(1) src(4, LE) ref(2, LE)
//! len(1)` followed by `len` body bytes. `ref` carries the message's own
//! sequence number, except for acknowledgements where it references the
//! acknowledged alert. Interests travel as a bitmap over the scenario's
//! interest universe; competences as their taxonomy label index.

use crate::trust::InterestSet;
use crate::types::{NodeId, SimTime};

/// Sensitive-data access level granted to a receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DataTier {
    FullRecord,
    VitalsAndMedication,
    VitalsOnly,
}

impl DataTier {
    pub fn as_str(self) -> &'static str {
        match self {
            DataTier::FullRecord => "full_record",
            DataTier::VitalsAndMedication => "vitals_and_medication",
            DataTier::VitalsOnly => "vitals_only",
        }
    }

    fn tag(self) -> u8 {
        match self {
            DataTier::FullRecord => 0,
            DataTier::VitalsAndMedication => 1,
            DataTier::VitalsOnly => 2,
        }
    }
}

/// Sensitive payload of an alert: the subject whose data is shared and the
/// tier the receiver is entitled to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlertPayload {
    pub tier: DataTier,
    pub subject: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MessageBody {
    /// Neighborhood search broadcast.
    Announce,
    /// Identification reply carrying the responder's social profile.
    AnswerAnnounce {
        skill: String,
        interests: InterestSet,
    },
    /// Sensitive-data dissemination to a selected community member.
    Alert { payload: AlertPayload, priority: u8 },
    /// Acknowledgement of a received alert.
    AckAlert { alert_seq: u64 },
    /// Operation-interruption broadcast from a node entering an emergency.
    StopAnnounce,
}

impl MessageBody {
    pub fn kind(&self) -> MessageKind {
        match self {
            MessageBody::Announce => MessageKind::Announce,
            MessageBody::AnswerAnnounce { .. } => MessageKind::Answer,
            MessageBody::Alert { .. } => MessageKind::Alert,
            MessageBody::AckAlert { .. } => MessageKind::Ack,
            MessageBody::StopAnnounce => MessageKind::Stop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MessageKind {
    Announce,
    Answer,
    Alert,
    Ack,
    Stop,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Announce => "announce",
            MessageKind::Answer => "answer",
            MessageKind::Alert => "alert",
            MessageKind::Ack => "ack",
            MessageKind::Stop => "stop",
        }
    }

    fn tag(self) -> u8 {
        match self {
            MessageKind::Announce => 1,
            MessageKind::Answer => 2,
            MessageKind::Alert => 3,
            MessageKind::Ack => 4,
            MessageKind::Stop => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub src: NodeId,
    pub seq: u64,
    pub sent_at: SimTime,
    pub body: MessageBody,
}

const HEADER_LEN: usize = 8;
const ALERT_PAYLOAD_STUB: usize = 64;

/// Wire-encoding context: the label universes referenced by compact fields.
pub struct WireContext<'a> {
    pub interest_universe: &'a [String],
    pub skill_index: &'a dyn Fn(&str) -> u8,
}

/// Serialized size in bytes, without materializing the encoding.
pub fn wire_size(body: &MessageBody, interest_universe_len: usize) -> usize {
    HEADER_LEN
        + match body {
            MessageBody::Announce | MessageBody::StopAnnounce | MessageBody::AckAlert { .. } => 0,
            MessageBody::AnswerAnnounce { .. } => 1 + interest_universe_len.div_ceil(8),
            MessageBody::Alert { .. } => 2 + ALERT_PAYLOAD_STUB,
        }
}

/// Canonical byte encoding of a message.
pub fn encode(msg: &Message, ctx: &WireContext<'_>) -> Vec<u8> {
    let mut body = Vec::new();
    match &msg.body {
        MessageBody::Announce | MessageBody::StopAnnounce => {}
        MessageBody::AckAlert { .. } => {}
        MessageBody::AnswerAnnounce { skill, interests } => {
            body.push((ctx.skill_index)(skill));
            let mut bitmap = vec![0u8; ctx.interest_universe.len().div_ceil(8)];
            for (i, label) in ctx.interest_universe.iter().enumerate() {
                if interests.contains(label) {
                    bitmap[i / 8] |= 1 << (i % 8);
                }
            }
            body.extend_from_slice(&bitmap);
        }
        MessageBody::Alert { payload, priority } => {
            body.push(payload.tier.tag());
            body.push(*priority);
            let mut stub = [0u8; ALERT_PAYLOAD_STUB];
            stub[..4].copy_from_slice(&payload.subject.0.to_le_bytes());
            body.extend_from_slice(&stub);
        }
    }

    let reference = match &msg.body {
        MessageBody::AckAlert { alert_seq } => *alert_seq,
        _ => msg.seq,
    } as u16;

    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.push(msg.body.kind().tag());
    out.extend_from_slice(&msg.src.0.to_le_bytes());
    out.extend_from_slice(&reference.to_le_bytes());
    out.push(body.len() as u8);
    out.extend_from_slice(&body);
    out
}
