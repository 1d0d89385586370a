//! Client/server lifecycle harnesses.
//!
//! [`ServerCore`] is the transport-agnostic server: roster-checked joins,
//! batched departures with churn policing, rekey/rotate, and broadcast
//! accounting. Two harnesses drive it: [`sim::Simulation`] delivers encoded
//! frames synchronously in-process (deterministic under a seed), and
//! [`tcp`] runs the same frames over real sockets with a single-writer
//! command loop.
//!
//! All randomness is pinned by the `OKMP_SEED` environment variable (or an
//! explicit config seed); without one the server uses an entropy-seeded
//! generator.

mod config;
mod server;
pub mod sim;
pub mod tcp;

pub use config::{parse_config, Roster, ServerConfig, DEFAULT_BATCH_WINDOW_MS, DEFAULT_CHURN_THRESHOLD};
pub use server::{JoinReply, JoinResult, ServerCore, ServerStats};

use thiserror::Error;

use crate::ffield::{Fe, PrimeField};
use crate::gkm::{GkmError, MemberId, MemberKey};
use crate::ortholin::FVector;
use crate::wire::{Frame, KeyIssueBody, RefusalCode, WireError};

#[derive(Debug, Error)]
pub enum NetsimError {
    #[error("bind failed: {0}")]
    BindFailure(std::io::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("request refused: {0}")]
    Refused(RefusalCode),
    #[error("timed out waiting for the server")]
    Timeout,
    #[error("connection closed")]
    Closed,
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Gkm(#[from] GkmError),
}

/// Reads the `OKMP_SEED` environment variable.
pub fn seed_from_env() -> Option<u64> {
    std::env::var("OKMP_SEED").ok().and_then(|s| s.trim().parse().ok())
}

/// Member-side protocol state: applied frames drive it, whatever the
/// transport.
#[derive(Clone, Debug, Default)]
pub struct ClientNode {
    pub member: Option<MemberId>,
    pub key: Option<MemberKey<PrimeField>>,
    pub aggregate: Option<FVector<PrimeField>>,
    pub last_secret: Option<Fe>,
    pub epoch_seen: u64,
    pub last_refusal: Option<RefusalCode>,
    pub leave_acked: bool,
}

impl ClientNode {
    pub fn new(member: MemberId) -> Self {
        ClientNode { member: Some(member), ..ClientNode::default() }
    }

    /// Applies a received frame. Unknown or undecodable situations are the
    /// transport's problem; this only interprets well-formed frames.
    pub fn apply(&mut self, frame: &Frame) {
        match frame {
            Frame::KeyIssue { epoch, body } => match body {
                KeyIssueBody::Issued { slot, v, norm_inv, aggregate } => {
                    match MemberKey::from_issue(*slot as usize, v.clone(), *norm_inv, *epoch) {
                        Ok(key) => {
                            self.key = Some(key);
                            self.aggregate = aggregate.clone();
                            self.last_refusal = None;
                        }
                        Err(_) => {
                            // Defective material: keep whatever key we had.
                        }
                    }
                }
                KeyIssueBody::Refused(code) => {
                    self.last_refusal = Some(*code);
                }
                KeyIssueBody::LeaveAck => {
                    self.leave_acked = true;
                }
            },
            Frame::Rekey { epoch, c } => {
                if let Some(key) = &self.key {
                    let msg = crate::gkm::RekeyMessage { epoch: *epoch, c: c.clone() };
                    if let Ok(secret) = key.recover_secret(&msg) {
                        self.last_secret = Some(secret);
                        self.epoch_seen = *epoch;
                    }
                }
            }
            _ => {}
        }
    }
}
