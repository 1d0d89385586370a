//! Transport-agnostic server: group state, roster checks, batch windows,
//! churn policing, broadcast accounting.

use std::collections::HashMap;

use rand::RngCore;

use crate::ffield::{Fe, PrimeField};
use crate::gkm::{GkmError, GroupState, MemberId, MemberKey, RekeyMessage};
use crate::netsim::{NetsimError, ServerConfig};
use crate::ortholin::FVector;
use crate::wire::RefusalCode;

/// Unicast reply to a join request.
#[derive(Clone, Debug)]
pub enum JoinReply {
    Issued { key: MemberKey<PrimeField>, aggregate: Option<FVector<PrimeField>> },
    Refused(RefusalCode),
}

/// A join may trigger broadcasts (its own rekey; plus an immediate single
/// departure flush when a pending leaver re-joins). Transports must deliver
/// the unicast reply to the joiner before fanning these out.
#[derive(Clone, Debug)]
pub struct JoinResult {
    pub reply: JoinReply,
    pub broadcasts: Vec<RekeyMessage<PrimeField>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ServerStats {
    pub epoch: u64,
    pub current_secret: Fe,
    pub broadcast_count: u64,
    pub bound_members: usize,
    pub pending_departures: usize,
    pub capacity: usize,
}

pub struct ServerCore {
    group: GroupState<PrimeField>,
    config: ServerConfig,
    rng: Box<dyn RngCore + Send>,
    pending: Vec<MemberId>,
    /// Logout-login cycles per member within the current window.
    churn: HashMap<MemberId, u32>,
    broadcast_count: u64,
}

impl ServerCore {
    pub fn new(config: ServerConfig) -> Result<Self, NetsimError> {
        let mut rng: Box<dyn RngCore + Send> =
            match config.seed.or_else(crate::netsim::seed_from_env) {
                Some(seed) => Box::new(crate::ffield::seeded_rng(seed)),
                None => Box::new(crate::ffield::secure_rng()),
            };
        let group = GroupState::init_group(
            config.mode,
            config.field,
            config.capacity,
            config.dim,
            rng.as_mut(),
        )?;
        Ok(ServerCore { group, config, rng, pending: Vec::new(), churn: HashMap::new(), broadcast_count: 0 })
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    pub fn group(&self) -> &GroupState<PrimeField> {
        &self.group
    }

    pub fn stats(&self) -> ServerStats {
        ServerStats {
            epoch: self.group.epoch(),
            current_secret: *self.group.current_secret(),
            broadcast_count: self.broadcast_count,
            bound_members: self.group.capacity() - self.group.free_slots(),
            pending_departures: self.pending.len(),
            capacity: self.group.capacity(),
        }
    }

    fn fresh_secret(&mut self) -> Fe {
        self.config.field.rand_nonzero(self.rng.as_mut())
    }

    /// Credential-checked join. A member with a pending departure re-joining
    /// counts as one churn cycle: tolerated ones force that departure
    /// through immediately (its own broadcast), past the threshold the
    /// client is refused and left queued for the window flush.
    pub fn handle_join(&mut self, member: &MemberId, credential: &str) -> JoinResult {
        let mut broadcasts = Vec::new();
        if !self.config.roster.verify(member.as_str(), credential) {
            return JoinResult { reply: JoinReply::Refused(RefusalCode::AuthFailed), broadcasts };
        }
        if let Some(pos) = self.pending.iter().position(|m| m == member) {
            let cycles = self.churn.entry(member.clone()).or_insert(0);
            *cycles += 1;
            if *cycles > self.config.churn_threshold {
                return JoinResult {
                    reply: JoinReply::Refused(RefusalCode::ChurnClosed),
                    broadcasts,
                };
            }
            self.pending.remove(pos);
            let secret = self.fresh_secret();
            match self.group.leave(member, secret, self.rng.as_mut()) {
                Ok(msg) => {
                    self.broadcast_count += 1;
                    broadcasts.push(msg);
                }
                Err(e) => {
                    debug_assert!(false, "pending member must be bound: {e}");
                }
            }
        }
        let secret = self.fresh_secret();
        match self.group.join(member.clone(), secret) {
            Ok((key, msg)) => {
                self.broadcast_count += 1;
                broadcasts.push(msg);
                let aggregate = self.config.auth_enabled.then(|| self.group.aggregate().clone());
                JoinResult { reply: JoinReply::Issued { key, aggregate }, broadcasts }
            }
            Err(GkmError::GroupFull) => {
                JoinResult { reply: JoinReply::Refused(RefusalCode::GroupFull), broadcasts }
            }
            Err(GkmError::DuplicateMember(_)) => {
                JoinResult { reply: JoinReply::Refused(RefusalCode::DuplicateMember), broadcasts }
            }
            Err(e) => {
                debug_assert!(false, "unexpected join failure: {e}");
                JoinResult { reply: JoinReply::Refused(RefusalCode::GroupFull), broadcasts }
            }
        }
    }

    /// Queues a departure for the next window flush. Idempotent while
    /// queued.
    pub fn handle_leave(&mut self, member: &MemberId) -> Result<(), RefusalCode> {
        if self.group.member_slot(member).is_none() {
            return Err(RefusalCode::UnknownMember);
        }
        if !self.pending.contains(member) {
            self.pending.push(member.clone());
        }
        Ok(())
    }

    /// Window flush: all pending departures fold into one broadcast; churn
    /// counters reset. Returns `None` on an empty window.
    pub fn flush_window(&mut self) -> Result<Option<RekeyMessage<PrimeField>>, GkmError> {
        self.churn.clear();
        if self.pending.is_empty() {
            return Ok(None);
        }
        let departures = std::mem::take(&mut self.pending);
        let secret = self.fresh_secret();
        let msg = self.group.batch_refresh(&departures, secret, self.rng.as_mut())?;
        self.broadcast_count += 1;
        Ok(Some(msg))
    }

    /// Plain rekey with a fresh secret.
    pub fn rekey_now(&mut self) -> Result<RekeyMessage<PrimeField>, GkmError> {
        let secret = self.fresh_secret();
        let msg = self.group.build_rekey(secret)?;
        self.broadcast_count += 1;
        Ok(msg)
    }

    /// Full rotation. Every bound member needs its key re-issued before the
    /// broadcast is useful to it; the returned list carries the fresh keys
    /// in slot order.
    #[allow(clippy::type_complexity)]
    pub fn rotate_now(
        &mut self,
    ) -> Result<(RekeyMessage<PrimeField>, Vec<(MemberId, MemberKey<PrimeField>)>), GkmError> {
        let secret = self.fresh_secret();
        let msg = self.group.rotate_all(secret, self.rng.as_mut())?;
        self.broadcast_count += 1;
        let members: Vec<MemberId> =
            self.group.bound_members().map(|(_, m)| m.clone()).collect();
        let mut reissues = Vec::with_capacity(members.len());
        for member in members {
            let key = self.group.reissue_key(&member)?;
            reissues.push((member, key));
        }
        Ok((msg, reissues))
    }

    pub fn aggregate_for_auth(&self) -> Option<FVector<PrimeField>> {
        self.config.auth_enabled.then(|| self.group.aggregate().clone())
    }
}
