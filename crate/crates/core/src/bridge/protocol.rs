use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aoi::{CostMode, DropMode};
use crate::sim::{Action, DecisionKind, Observation};

pub const PROTOCOL_VERSION: u32 = 1;

/// One NDJSON line. Every message carries `device`, `episode` and `seq`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello(Hello),
    Decision(Decision),
    Action(ActionMsg),
    Experience(Experience),
    GammaUpdate(GammaUpdateMsg),
    EpisodeBegin(EpisodeBegin),
    EpisodeEnd(EpisodeEnd),
    Error(ErrorMsg),
}

/// Client side: claims `devices` (empty = all). Server side: echoes the
/// claimed devices and describes the session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hello {
    pub seq: u64,
    pub device: usize,
    pub episode: usize,
    pub protocol: u32,
    #[serde(default)]
    pub devices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<SessionInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionInfo {
    pub num_devices: usize,
    pub num_edges: usize,
    pub z_max: f64,
    pub drop_time: f64,
    pub episodes: usize,
    pub steps: u64,
    pub cost_mode: CostMode,
    pub drop_mode: DropMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decision {
    pub seq: u64,
    pub device: usize,
    pub episode: usize,
    /// Must be echoed by the answering action.
    pub token: u64,
    pub kind: DecisionKind,
    pub task: u64,
    pub time: f64,
    pub state: Observation,
}

/// `z` answers updating decisions, `x` offloading ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionMsg {
    pub seq: u64,
    pub device: usize,
    pub episode: usize,
    pub token: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<usize>,
}

/// `(s, a, c, s')` for one decision, sent once its cost is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experience {
    pub seq: u64,
    pub device: usize,
    pub episode: usize,
    pub kind: DecisionKind,
    /// Task whose completion fixed the cost.
    pub task: u64,
    pub state: Observation,
    pub action: Action,
    pub cost: f64,
    pub next_state: Observation,
    /// Quotient the cost was computed with.
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaUpdateMsg {
    pub seq: u64,
    pub device: usize,
    pub episode: usize,
    pub gamma: f64,
    #[serde(default)]
    pub numerator: f64,
    #[serde(default)]
    pub denominator: f64,
    #[serde(default)]
    pub records: usize,
    #[serde(default)]
    pub carried: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeBegin {
    pub seq: u64,
    pub device: usize,
    pub episode: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeEnd {
    pub seq: u64,
    pub device: usize,
    pub episode: usize,
    /// Time-averaged age over the episode's time window.
    pub avg_aoi: f64,
    pub tasks: u64,
    pub drops: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    UnknownDevice,
    DeviceTaken,
    StaleToken,
    WrongKind,
    InvalidAction,
    BadSequence,
    Unexpected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorMsg {
    pub seq: u64,
    pub device: usize,
    pub episode: usize,
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Error)]
#[error("cannot decode message: {0}")]
pub struct DecodeError(#[from] pub serde_json::Error);

impl Message {
    pub fn seq(&self) -> u64 {
        self.header().0
    }

    pub fn device(&self) -> usize {
        self.header().1
    }

    pub fn episode(&self) -> usize {
        self.header().2
    }

    fn header(&self) -> (u64, usize, usize) {
        match self {
            Message::Hello(m) => (m.seq, m.device, m.episode),
            Message::Decision(m) => (m.seq, m.device, m.episode),
            Message::Action(m) => (m.seq, m.device, m.episode),
            Message::Experience(m) => (m.seq, m.device, m.episode),
            Message::GammaUpdate(m) => (m.seq, m.device, m.episode),
            Message::EpisodeBegin(m) => (m.seq, m.device, m.episode),
            Message::EpisodeEnd(m) => (m.seq, m.device, m.episode),
            Message::Error(m) => (m.seq, m.device, m.episode),
        }
    }

    pub fn set_seq(&mut self, seq: u64) {
        match self {
            Message::Hello(m) => m.seq = seq,
            Message::Decision(m) => m.seq = seq,
            Message::Action(m) => m.seq = seq,
            Message::Experience(m) => m.seq = seq,
            Message::GammaUpdate(m) => m.seq = seq,
            Message::EpisodeBegin(m) => m.seq = seq,
            Message::EpisodeEnd(m) => m.seq = seq,
            Message::Error(m) => m.seq = seq,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Message::Hello(_) => "hello",
            Message::Decision(_) => "decision",
            Message::Action(_) => "action",
            Message::Experience(_) => "experience",
            Message::GammaUpdate(_) => "gamma_update",
            Message::EpisodeBegin(_) => "episode_begin",
            Message::EpisodeEnd(_) => "episode_end",
            Message::Error(_) => "error",
        }
    }
}

/// One JSON object followed by `\n`.
pub fn encode(msg: &Message) -> Vec<u8> {
    let mut out = serde_json::to_vec(msg).expect("messages always serialize");
    out.push(b'\n');
    out
}

pub fn decode(bytes: &[u8]) -> Result<Message, DecodeError> {
    Ok(serde_json::from_slice(bytes.trim_ascii())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn samples() -> Vec<Message> {
        vec![
            Message::Hello(Hello {
                seq: 0,
                device: 0,
                episode: 0,
                protocol: PROTOCOL_VERSION,
                devices: vec![0, 1],
                session: Some(SessionInfo {
                    num_devices: 2,
                    num_edges: 2,
                    z_max: 5.0,
                    drop_time: 5.346,
                    episodes: 3,
                    steps: 200,
                    cost_mode: CostMode::Fractional,
                    drop_mode: DropMode::FoldIn,
                }),
            }),
            Message::Decision(Decision {
                seq: 1,
                device: 1,
                episode: 0,
                token: 7,
                kind: DecisionKind::Offloading,
                task: 3,
                time: 12.5,
                state: Observation::QueueLengths(vec![2, 0]),
            }),
            Message::Action(ActionMsg {
                seq: 2,
                device: 1,
                episode: 0,
                token: 7,
                z: None,
                x: Some(2),
            }),
            Message::Experience(Experience {
                seq: 3,
                device: 0,
                episode: 1,
                kind: DecisionKind::Updating,
                task: 4,
                state: Observation::PrevDelay(1.0),
                action: Action::Wait(1.0),
                cost: 2.0,
                next_state: Observation::PrevDelay(2.0),
                gamma: 2.0,
            }),
            Message::GammaUpdate(GammaUpdateMsg {
                seq: 4,
                device: 0,
                episode: 3,
                gamma: 2.5,
                numerator: 10.0,
                denominator: 4.0,
                records: 2,
                carried: false,
            }),
            Message::EpisodeBegin(EpisodeBegin {
                seq: 5,
                device: 0,
                episode: 4,
                gamma: 2.5,
            }),
            Message::EpisodeEnd(EpisodeEnd {
                seq: 6,
                device: 0,
                episode: 4,
                avg_aoi: 7.1,
                tasks: 200,
                drops: 3,
            }),
            Message::Error(ErrorMsg {
                seq: 7,
                device: 0,
                episode: 0,
                code: ErrorCode::StaleToken,
                message: "token 3 is not pending".into(),
            }),
        ]
    }

    #[test]
    fn every_schema_round_trips() {
        for m in samples() {
            let bytes = encode(&m);
            assert_eq!(bytes.last(), Some(&b'\n'));
            assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), 1);
            assert_eq!(decode(&bytes).unwrap(), m, "{}", m.type_name());
        }
    }

    #[test]
    fn gamma_update_wire_form() {
        let m = decode(br#"{"type":"gamma_update","seq":9,"device":0,"episode":3,"gamma":2.5}"#).unwrap();
        match m {
            Message::GammaUpdate(g) => {
                assert_eq!((g.device, g.episode, g.gamma), (0, 3, 2.5));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncated_and_unknown_fields_rejected() {
        let full = encode(&samples()[1]);
        for cut in [1, full.len() / 2, full.len() - 3] {
            assert!(decode(&full[..cut]).is_err());
        }
        assert!(decode(br#"{"type":"episode_begin","seq":1,"device":0,"episode":0,"gamma":0.0,"extra":1}"#).is_err());
        assert!(decode(br#"{"type":"teleport","seq":1,"device":0,"episode":0}"#).is_err());
        assert!(decode(br#"{"type":"episode_begin","device":0,"episode":0,"gamma":0.0}"#).is_err());
    }

    #[test]
    fn negative_wait_decodes() {
        let m = decode(br#"{"type":"action","seq":1,"device":0,"episode":0,"token":0,"z":-1}"#).unwrap();
        assert!(matches!(m, Message::Action(ActionMsg { z: Some(z), .. }) if z == -1.0));
    }
}
