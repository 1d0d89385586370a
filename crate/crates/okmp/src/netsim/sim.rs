//! Deterministic in-process harness: the same frames as the TCP transport,
//! delivered synchronously through the codec. Batch windows are logical
//! ticks.

use crate::ffield::PrimeField;
use crate::gkm::{MemberId, RekeyMessage};
use crate::netsim::{ClientNode, JoinReply, NetsimError, ServerConfig, ServerCore, ServerStats};
use crate::wire::{decode_frame, encode_frame, Frame, KeyIssueBody, RefusalCode};

pub struct Simulation {
    core: ServerCore,
    field: PrimeField,
    clients: Vec<ClientNode>,
    /// Every broadcast frame ever fanned out, in order.
    pub broadcast_log: Vec<Frame>,
}

impl Simulation {
    pub fn new(config: ServerConfig) -> Result<Self, NetsimError> {
        let field = config.field;
        let core = ServerCore::new(config)?;
        Ok(Simulation { core, field, clients: Vec::new(), broadcast_log: Vec::new() })
    }

    pub fn stats(&self) -> ServerStats {
        self.core.stats()
    }

    pub fn core(&self) -> &ServerCore {
        &self.core
    }

    pub fn client(&self, idx: usize) -> &ClientNode {
        &self.clients[idx]
    }

    pub fn add_client(&mut self, member: &str) -> usize {
        self.clients.push(ClientNode::new(MemberId::new(member)));
        self.clients.len() - 1
    }

    /// Round-trips a frame through the codec, as the wire would.
    fn reencode(&self, frame: &Frame) -> Frame {
        let bytes = encode_frame(frame).expect("sim frames are encodable");
        decode_frame(&self.field, &bytes).expect("sim frames decode")
    }

    fn fan_out(&mut self, msg: &RekeyMessage<PrimeField>) {
        let frame = self.reencode(&Frame::Rekey { epoch: msg.epoch, c: msg.c.clone() });
        for client in &mut self.clients {
            client.apply(&frame);
        }
        self.broadcast_log.push(frame);
    }

    /// Client `idx` sends a join request; the reply and any broadcasts are
    /// delivered synchronously. Returns the refusal, if any.
    pub fn join(&mut self, idx: usize, password: &str) -> Option<RefusalCode> {
        let member = self.clients[idx].member.clone().expect("sim clients are named");
        let request = self.reencode(&Frame::JoinRequest {
            member: member.clone(),
            credential: password.to_string(),
        });
        let Frame::JoinRequest { member, credential } = request else { unreachable!() };
        let result = self.core.handle_join(&member, &credential);

        let reply_frame = match &result.reply {
            JoinReply::Issued { key, aggregate } => Frame::KeyIssue {
                epoch: key.epoch_issued(),
                body: KeyIssueBody::Issued {
                    slot: key.slot() as u32,
                    v: key.vector().clone(),
                    norm_inv: *key.norm_inv().expect("field keys carry inverse norms"),
                    aggregate: aggregate.clone(),
                },
            },
            JoinReply::Refused(code) => {
                Frame::KeyIssue { epoch: 0, body: KeyIssueBody::Refused(*code) }
            }
        };
        let reply_frame = self.reencode(&reply_frame);
        self.clients[idx].apply(&reply_frame);
        for msg in &result.broadcasts {
            self.fan_out(&msg.clone());
        }
        match result.reply {
            JoinReply::Issued { .. } => None,
            JoinReply::Refused(code) => Some(code),
        }
    }

    /// Client `idx` requests to leave; the departure waits for the next
    /// tick.
    pub fn leave(&mut self, idx: usize) -> Option<RefusalCode> {
        let member = self.clients[idx].member.clone().expect("sim clients are named");
        let notice = self.reencode(&Frame::LeaveNotice { member: member.clone() });
        let Frame::LeaveNotice { member } = notice else { unreachable!() };
        match self.core.handle_leave(&member) {
            Ok(()) => {
                let ack = self.reencode(&Frame::KeyIssue { epoch: 0, body: KeyIssueBody::LeaveAck });
                self.clients[idx].apply(&ack);
                None
            }
            Err(code) => {
                let frame =
                    self.reencode(&Frame::KeyIssue { epoch: 0, body: KeyIssueBody::Refused(code) });
                self.clients[idx].apply(&frame);
                Some(code)
            }
        }
    }

    /// Logical batch-window boundary.
    pub fn tick(&mut self) -> Result<bool, NetsimError> {
        match self.core.flush_window()? {
            Some(msg) => {
                self.fan_out(&msg);
                Ok(true)
            }
            None => Ok(false),
        }
    }

    pub fn rekey(&mut self) -> Result<(), NetsimError> {
        let msg = self.core.rekey_now()?;
        self.fan_out(&msg);
        Ok(())
    }

    /// Rotation: fresh keys go out per member before the broadcast.
    pub fn rotate(&mut self) -> Result<(), NetsimError> {
        let (msg, reissues) = self.core.rotate_now()?;
        for (member, key) in reissues {
            let aggregate = self.core.aggregate_for_auth();
            let frame = self.reencode(&Frame::KeyIssue {
                epoch: key.epoch_issued(),
                body: KeyIssueBody::Issued {
                    slot: key.slot() as u32,
                    v: key.vector().clone(),
                    norm_inv: *key.norm_inv().expect("field keys carry inverse norms"),
                    aggregate,
                },
            });
            if let Some(client) = self
                .clients
                .iter_mut()
                .find(|c| c.member.as_ref() == Some(&member) && c.key.is_some())
            {
                client.apply(&frame);
            }
        }
        self.fan_out(&msg);
        Ok(())
    }

    /// Count of rekey broadcasts delivered so far.
    pub fn broadcasts_seen(&self) -> usize {
        self.broadcast_log.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffield::{seeded_rng, PrimeField};
    use crate::netsim::Roster;

    fn config(capacity: usize, dim: usize, members: &[&str]) -> ServerConfig {
        let mut roster = Roster::new();
        let mut rng = seeded_rng(1000);
        for m in members {
            roster.add_password(m, &format!("pw-{m}"), &mut rng);
        }
        let mut cfg = ServerConfig::new(PrimeField::default_field(), capacity, dim);
        cfg.roster = roster;
        cfg.seed = Some(424242);
        cfg
    }

    #[test]
    fn four_clients_agree_after_rekey() {
        let members = ["a", "b", "c", "d"];
        let mut sim = Simulation::new(config(4, 9, &members)).unwrap();
        for m in members {
            let idx = sim.add_client(m);
            assert_eq!(sim.join(idx, &format!("pw-{m}")), None);
        }
        sim.rekey().unwrap();
        let secret = sim.stats().current_secret;
        for idx in 0..4 {
            assert_eq!(sim.client(idx).last_secret, Some(secret));
            assert_eq!(sim.client(idx).epoch_seen, sim.stats().epoch);
        }
    }

    #[test]
    fn fifth_join_refused_group_full() {
        let members = ["a", "b", "c", "d", "e"];
        let mut sim = Simulation::new(config(4, 9, &members)).unwrap();
        for m in &members[..4] {
            let idx = sim.add_client(m);
            assert_eq!(sim.join(idx, &format!("pw-{m}")), None);
        }
        let e = sim.add_client("e");
        assert_eq!(sim.join(e, "pw-e"), Some(RefusalCode::GroupFull));
        assert_eq!(sim.client(e).last_refusal, Some(RefusalCode::GroupFull));
        assert!(sim.client(e).key.is_none());
    }

    #[test]
    fn wrong_credential_gets_no_key_material() {
        let mut sim = Simulation::new(config(2, 5, &["a"])).unwrap();
        let idx = sim.add_client("a");
        assert_eq!(sim.join(idx, "wrong"), Some(RefusalCode::AuthFailed));
        assert!(sim.client(idx).key.is_none());
        assert!(sim.client(idx).last_secret.is_none());
    }

    #[test]
    fn relogin_after_flushed_leave_gets_fresh_scalar() {
        let mut sim = Simulation::new(config(2, 5, &["a"])).unwrap();
        let idx = sim.add_client("a");
        assert_eq!(sim.join(idx, "pw-a"), None);
        let old_vector = sim.client(idx).key.as_ref().unwrap().vector().clone();
        assert_eq!(sim.leave(idx), None);
        assert!(sim.tick().unwrap(), "window with a departure must broadcast");
        assert_eq!(sim.join(idx, "pw-a"), None);
        let new_vector = sim.client(idx).key.as_ref().unwrap().vector().clone();
        assert_ne!(old_vector, new_vector, "revoked vector must never be re-issued");
    }

    #[test]
    fn batch_window_folds_departures_into_one_broadcast() {
        let members = ["a", "b", "c", "d"];
        let mut sim = Simulation::new(config(4, 9, &members)).unwrap();
        for m in members {
            let idx = sim.add_client(m);
            sim.join(idx, &format!("pw-{m}"));
        }
        let before = sim.broadcasts_seen();
        for idx in 0..3 {
            assert_eq!(sim.leave(idx), None);
        }
        assert_eq!(sim.broadcasts_seen(), before, "departures alone must not broadcast");
        assert!(sim.tick().unwrap());
        assert_eq!(sim.broadcasts_seen(), before + 1, "one window, one broadcast");
        // Empty window: no broadcast.
        assert!(!sim.tick().unwrap());
        assert_eq!(sim.broadcasts_seen(), before + 1);

        // Survivor agrees; departed clients do not.
        let secret = sim.stats().current_secret;
        assert_eq!(sim.client(3).last_secret, Some(secret));
        for idx in 0..3 {
            assert_ne!(sim.client(idx).last_secret, Some(secret));
        }
    }

    #[test]
    fn churn_client_is_closed_and_slot_rerandomized() {
        let mut sim = Simulation::new(config(2, 5, &["a", "b"])).unwrap();
        let a = sim.add_client("a");
        sim.join(a, "pw-a");
        // Three tolerated logout-login cycles within one window...
        for cycle in 0..3 {
            assert_eq!(sim.leave(a), None, "cycle {cycle}");
            assert_eq!(sim.join(a, "pw-a"), None, "cycle {cycle}");
        }
        // ...the fourth crosses the threshold.
        assert_eq!(sim.leave(a), None);
        assert_eq!(sim.join(a, "pw-a"), Some(RefusalCode::ChurnClosed));
        let key_before_flush = sim.client(a).key.as_ref().unwrap().vector().clone();
        assert!(sim.tick().unwrap(), "the queued departure still flushes");
        // The slot was re-randomized at flush: the churned key no longer
        // recovers the current secret.
        let secret = sim.stats().current_secret;
        assert_ne!(sim.client(a).last_secret, Some(secret));
        // After the window resets, the member may come back with a new key.
        assert_eq!(sim.join(a, "pw-a"), None);
        assert_ne!(sim.client(a).key.as_ref().unwrap().vector(), &key_before_flush);
    }

    #[test]
    fn rotate_reissues_keys_and_agreement_holds() {
        let members = ["a", "b", "c"];
        let mut sim = Simulation::new(config(3, 7, &members)).unwrap();
        for m in members {
            let idx = sim.add_client(m);
            sim.join(idx, &format!("pw-{m}"));
        }
        sim.rotate().unwrap();
        let secret = sim.stats().current_secret;
        for idx in 0..3 {
            assert_eq!(sim.client(idx).last_secret, Some(secret), "client {idx}");
        }
    }

    #[test]
    fn auth_enabled_provisions_aggregate_and_members_authenticate() {
        let mut cfg = config(2, 5, &["a", "b"]);
        cfg.auth_enabled = true;
        let mut sim = Simulation::new(cfg).unwrap();
        let a = sim.add_client("a");
        let b = sim.add_client("b");
        sim.join(a, "pw-a");
        sim.join(b, "pw-b");

        let ua = sim.client(a).aggregate.clone().expect("aggregate provisioned");
        let ub = sim.client(b).aggregate.clone().expect("aggregate provisioned");
        // Client a epoch vs b epoch: b joined later, both saw b's join
        // broadcast.
        let epoch = sim.stats().epoch;
        let mut rng = seeded_rng(5);
        let issued = crate::auth::make_challenge(&ua, epoch, &mut rng).unwrap();
        // Round-trip the challenge and response through the codec.
        let ch_frame = sim.reencode(&Frame::AuthChallenge {
            epoch: issued.challenge.epoch,
            payload: issued.challenge.payload.clone(),
        });
        let Frame::AuthChallenge { epoch: ch_epoch, payload } = ch_frame else { unreachable!() };
        let challenge = crate::auth::AuthChallenge { epoch: ch_epoch, payload };
        let key_b = sim.client(b).key.clone().unwrap();
        let resp = crate::auth::answer_challenge(&key_b, &ub, &challenge).unwrap();
        let resp_frame = sim.reencode(&Frame::AuthResponse { epoch: resp.epoch, payload: resp.payload.clone() });
        let Frame::AuthResponse { epoch: r_epoch, payload } = resp_frame else { unreachable!() };
        let resp = crate::auth::AuthResponse { epoch: r_epoch, payload };
        let key_a = sim.client(a).key.clone().unwrap();
        assert!(crate::auth::verify_response(
            &issued,
            &resp,
            epoch,
            crate::auth::Verifier::Key(&key_a)
        )
        .unwrap());
    }
}
