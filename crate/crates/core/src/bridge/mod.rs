//! Lockstep NDJSON protocol between the simulator and external learning
//! clients.
//!
//! A session runs one continuous simulation in which every device plays
//! `episodes` consecutive episodes of `steps` tasks. The server sends a
//! `decision` whenever a remote device must act and blocks until the
//! matching `action` (same `token`) arrives. When a completion fixes the cost
//! of earlier decisions the server sends one `experience` per decision, and
//! each device's episode closes with `gamma_update` then `episode_end`. The
//! schema and example transcripts live in `docs/protocol.md`.

mod oracle;
mod protocol;
mod session;
mod transport;

use thiserror::Error;

pub use oracle::{canonical_experiences, experiences_from_log, OracleOutput};
pub use protocol::*;
pub use session::{EpisodeStat, Session, SessionPlan};
pub use transport::{serve_connect, serve_stream, serve_tcp, Client, Transcript};

use crate::aoi::AoiError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("invalid session: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Cost(#[from] AoiError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot reach bridge endpoint {addr}: {source}")]
    Connect { addr: String, source: std::io::Error },
    #[error("peer disconnected before the session finished")]
    Disconnected,
    #[error("server rejected the client: {0}")]
    Rejected(String),
}
