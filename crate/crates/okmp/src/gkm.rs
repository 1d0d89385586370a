//! The group-key state machine.
//!
//! Server side: an [`OrthogonalSystem`] plus one secret nonzero scalar per
//! slot. The broadcast for a secret `s` is `c = s * u` with the aggregate
//! `u = sum x_i e_i` kept cached; a departure only needs one scalar
//! subtraction, two scalar-vector multiplications and one vector addition
//! (tracked by [`OpCounter`]). Member side: [`MemberKey`] recovers `s` from
//! a broadcast via one inner product and one multiplication by the cached
//! inverse norm.

use num_bigint::BigInt;
use num_integer::Integer;
use rand::RngCore;
use thiserror::Error;

use crate::ffield::{FieldError, PrimeField, Ring};
use crate::ortholin::{
    gen_orthogonal_system, linear_combination, FVector, OrthogonalSystem, OrtholinError,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GkmError {
    #[error("group is full")]
    GroupFull,
    #[error("member {0} is already bound to a slot")]
    DuplicateMember(MemberId),
    #[error("member {0} is not bound to any slot")]
    UnknownMember(MemberId),
    #[error("the distributed secret must be nonzero")]
    ZeroSecret,
    #[error("slot scalars must be nonzero")]
    ZeroScalar,
    #[error("message epoch {message_epoch} predates key issued at epoch {key_epoch}")]
    StaleEpoch { message_epoch: u64, key_epoch: u64 },
    #[error("dimension mismatch: key is {key} message is {message}")]
    DimMismatch { key: usize, message: usize },
    #[error("member key is isotropic; recovery impossible")]
    IsotropicKey,
    #[error("recovery division is not exact in this ring")]
    InexactRecovery,
    #[error("key material is inconsistent")]
    InvalidKeyMaterial,
    #[error("operation requires exact-integer (demo) mode")]
    WrongMode,
    #[error("protocol mode requires dim > 2 * capacity (got dim {dim}, capacity {capacity})")]
    DimRule { dim: usize, capacity: usize },
    #[error("protocol mode requires a protocol-grade field (modulus >= 2^31)")]
    InsecureField,
    #[error("scalar count {scalars} does not match system size {system}")]
    ScalarCountMismatch { scalars: usize, system: usize },
    #[error(transparent)]
    Ortholin(#[from] OrtholinError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Identifies a group member. Free-form; typically a login name.
#[derive(Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct MemberId(String);

impl MemberId {
    pub fn new(id: impl Into<String>) -> Self {
        MemberId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for MemberId {
    fn from(s: &str) -> Self {
        MemberId(s.to_string())
    }
}

impl std::fmt::Display for MemberId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Enforcement level for initialization-time parameter rules.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mode {
    /// Requires a protocol-grade field and `dim > 2 * capacity`.
    Protocol,
    /// Relaxed to `dim >= capacity`; for tests, toys, and benchmarks.
    Test,
}

/// Tallies of the scalar/vector operations performed by the most recent
/// rekeying operation.
#[derive(Clone, Copy, Default, Debug, PartialEq, Eq)]
pub struct OpCounter {
    pub scalar_subs: u64,
    pub scalar_vector_muls: u64,
    pub vector_adds: u64,
}

impl OpCounter {
    fn reset(&mut self) {
        *self = OpCounter::default();
    }
}

/// A member's secret key: the slot vector `v = x_i * e_i` plus cached norm
/// data. Immutable once issued.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemberKey<R: Ring> {
    slot: usize,
    v: FVector<R>,
    norm: R::Elem,
    norm_inv: Option<R::Elem>,
    epoch_issued: u64,
}

impl<R: Ring> MemberKey<R> {
    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn vector(&self) -> &FVector<R> {
        &self.v
    }

    pub fn norm(&self) -> &R::Elem {
        &self.norm
    }

    pub fn norm_inv(&self) -> Option<&R::Elem> {
        self.norm_inv.as_ref()
    }

    pub fn epoch_issued(&self) -> u64 {
        self.epoch_issued
    }

    /// Rebuilds a key from issued material (the unicast key-issue path).
    /// The norm is recomputed from `v` and checked against the supplied
    /// inverse.
    pub fn from_issue(
        slot: usize,
        v: FVector<R>,
        norm_inv: R::Elem,
        epoch_issued: u64,
    ) -> Result<Self, GkmError> {
        let ring = v.ring().clone();
        let norm = v.inner(&v)?;
        if ring.is_zero(&norm) {
            return Err(GkmError::IsotropicKey);
        }
        if ring.mul(&norm, &norm_inv) != ring.one() {
            return Err(GkmError::InvalidKeyMaterial);
        }
        Ok(MemberKey { slot, v, norm, norm_inv: Some(norm_inv), epoch_issued })
    }

    /// Recovers the secret from a broadcast: `s = <c, v> * <v, v>^-1`
    /// (exact division in rings without inverses).
    pub fn recover_secret(&self, msg: &RekeyMessage<R>) -> Result<R::Elem, GkmError> {
        if self.v.dim() != msg.c.dim() {
            return Err(GkmError::DimMismatch { key: self.v.dim(), message: msg.c.dim() });
        }
        if msg.epoch < self.epoch_issued {
            return Err(GkmError::StaleEpoch {
                message_epoch: msg.epoch,
                key_epoch: self.epoch_issued,
            });
        }
        let ring = self.v.ring();
        if ring.is_zero(&self.norm) {
            return Err(GkmError::IsotropicKey);
        }
        let h = msg.c.inner(&self.v)?;
        match &self.norm_inv {
            Some(ni) => Ok(ring.mul(&h, ni)),
            None => ring.div_exact(&h, &self.norm).ok_or(GkmError::InexactRecovery),
        }
    }
}

/// A rekey broadcast: the only value ever visible to outsiders.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RekeyMessage<R: Ring> {
    pub epoch: u64,
    pub c: FVector<R>,
}

/// Server-side group state. Single-writer: all mutating operations take
/// `&mut self`; recovery by members is pure and may run anywhere.
#[derive(Clone, Debug)]
pub struct GroupState<R: Ring> {
    system: OrthogonalSystem<R>,
    scalars: Vec<R::Elem>,
    slots: Vec<Option<MemberId>>,
    aggregate: FVector<R>,
    epoch: u64,
    current_secret: R::Elem,
    ops: OpCounter,
    consistency_checks: bool,
}

impl GroupState<PrimeField> {
    /// Initializes a fresh group over `F_p`: new system, new scalars, all
    /// slots free, epoch 0.
    pub fn init_group(
        mode: Mode,
        field: PrimeField,
        capacity: usize,
        dim: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Self, GkmError> {
        match mode {
            Mode::Protocol => {
                if !field.is_protocol_grade() {
                    return Err(GkmError::InsecureField);
                }
                if dim <= 2 * capacity {
                    return Err(GkmError::DimRule { dim, capacity });
                }
            }
            Mode::Test => {
                if dim < capacity {
                    return Err(OrtholinError::DimTooSmall { n: capacity, m: dim }.into());
                }
            }
        }
        let system = gen_orthogonal_system(&field, dim, capacity, rng)?;
        let scalars: Vec<_> = (0..capacity).map(|_| field.rand_nonzero(rng)).collect();
        let initial_secret = field.rand_nonzero(rng);
        let state = Self::assemble(system, scalars, initial_secret)?;
        state.debug_check();
        Ok(state)
    }
}

impl<R: Ring> GroupState<R> {
    /// Builds a group around an existing system and explicit scalars
    /// (demo walkthroughs, misconfiguration experiments, imports).
    pub fn from_parts(
        system: OrthogonalSystem<R>,
        scalars: Vec<R::Elem>,
        initial_secret: R::Elem,
    ) -> Result<Self, GkmError> {
        Self::assemble(system, scalars, initial_secret)
    }

    fn assemble(
        system: OrthogonalSystem<R>,
        scalars: Vec<R::Elem>,
        initial_secret: R::Elem,
    ) -> Result<Self, GkmError> {
        if scalars.len() != system.len() {
            return Err(GkmError::ScalarCountMismatch {
                scalars: scalars.len(),
                system: system.len(),
            });
        }
        let ring = system.ring().clone();
        if scalars.iter().any(|x| ring.is_zero(x)) {
            return Err(GkmError::ZeroScalar);
        }
        if ring.is_zero(&initial_secret) {
            return Err(GkmError::ZeroSecret);
        }
        let aggregate = linear_combination(&ring, &scalars, system.basis(), system.dim())?;
        let slots = vec![None; system.len()];
        Ok(GroupState {
            system,
            scalars,
            slots,
            aggregate,
            epoch: 0,
            current_secret: initial_secret,
            ops: OpCounter::default(),
            consistency_checks: cfg!(debug_assertions),
        })
    }

    pub fn ring(&self) -> &R {
        self.system.ring()
    }

    pub fn capacity(&self) -> usize {
        self.system.len()
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// The cached aggregate `u = sum x_i e_i`. Secret material.
    pub fn aggregate(&self) -> &FVector<R> {
        &self.aggregate
    }

    /// The secret distributed by the most recent broadcast.
    pub fn current_secret(&self) -> &R::Elem {
        &self.current_secret
    }

    /// Slot scalars. Secret material; exposed for diagnostics and ground
    /// truth in tests.
    pub fn scalars(&self) -> &[R::Elem] {
        &self.scalars
    }

    pub fn system(&self) -> &OrthogonalSystem<R> {
        &self.system
    }

    pub fn last_rekey_ops(&self) -> OpCounter {
        self.ops
    }

    pub fn member_slot(&self, member: &MemberId) -> Option<usize> {
        self.slots.iter().position(|s| s.as_ref() == Some(member))
    }

    pub fn bound_members(&self) -> impl Iterator<Item = (usize, &MemberId)> {
        self.slots.iter().enumerate().filter_map(|(i, s)| s.as_ref().map(|m| (i, m)))
    }

    pub fn free_slots(&self) -> usize {
        self.slots.iter().filter(|s| s.is_none()).count()
    }

    /// Disables the from-scratch aggregate recomputation performed after
    /// every mutation in debug/test builds. Only the benchmark harness
    /// should need this: the check is O(n*m) and would swamp the O(m)
    /// operations being measured.
    pub fn set_consistency_checks(&mut self, enabled: bool) {
        self.consistency_checks = enabled;
    }

    /// Recomputes `sum x_i e_i` from scratch and compares with the cache.
    pub fn check_aggregate_consistency(&self) -> bool {
        let fresh = linear_combination(
            self.system.ring(),
            &self.scalars,
            self.system.basis(),
            self.system.dim(),
        )
        .expect("state dimensions are consistent");
        fresh == self.aggregate
    }

    fn debug_check(&self) {
        if self.consistency_checks {
            debug_assert!(self.check_aggregate_consistency(), "aggregate cache drifted");
        }
    }

    fn key_for_slot(&self, slot: usize, epoch_issued: u64) -> Result<MemberKey<R>, GkmError> {
        let ring = self.system.ring();
        let v = self.system.vector(slot).scale(&self.scalars[slot]);
        let norm = v.inner(&v)?;
        if ring.is_zero(&norm) {
            return Err(GkmError::IsotropicKey);
        }
        let norm_inv = ring.inv(&norm);
        Ok(MemberKey { slot, v, norm, norm_inv, epoch_issued })
    }

    /// Initialization-time provisioning: binds the first free slot to
    /// `member` and issues its key without broadcasting. Runtime joins go
    /// through [`GroupState::join`].
    pub fn assign_member(&mut self, member: MemberId) -> Result<MemberKey<R>, GkmError> {
        if self.member_slot(&member).is_some() {
            return Err(GkmError::DuplicateMember(member));
        }
        let slot = self
            .slots
            .iter()
            .position(|s| s.is_none())
            .ok_or(GkmError::GroupFull)?;
        self.slots[slot] = Some(member);
        self.key_for_slot(slot, self.epoch)
    }

    /// Re-issues the key a bound member currently owns (after a rotation).
    pub fn reissue_key(&self, member: &MemberId) -> Result<MemberKey<R>, GkmError> {
        let slot = self
            .member_slot(member)
            .ok_or_else(|| GkmError::UnknownMember(member.clone()))?;
        self.key_for_slot(slot, self.epoch)
    }

    /// Broadcast construction: `c = s * u`, epoch bumped, secret recorded.
    pub fn build_rekey(&mut self, secret: R::Elem) -> Result<RekeyMessage<R>, GkmError> {
        let ring = self.system.ring().clone();
        if ring.is_zero(&secret) {
            return Err(GkmError::ZeroSecret);
        }
        self.ops.reset();
        let c = self.aggregate.scale(&secret);
        self.ops.scalar_vector_muls += 1;
        self.epoch += 1;
        self.current_secret = secret;
        self.debug_check();
        Ok(RekeyMessage { epoch: self.epoch, c })
    }

    /// Member join: binds a free slot (the slot's scalar is unchanged — it
    /// was already re-randomized when its previous owner left) and
    /// broadcasts the fresh secret so the joiner can start decoding.
    pub fn join(
        &mut self,
        member: MemberId,
        fresh_secret: R::Elem,
    ) -> Result<(MemberKey<R>, RekeyMessage<R>), GkmError> {
        if self.ring().is_zero(&fresh_secret) {
            return Err(GkmError::ZeroSecret);
        }
        if self.member_slot(&member).is_some() {
            return Err(GkmError::DuplicateMember(member));
        }
        let slot = self
            .slots
            .iter()
            .position(|s| s.is_none())
            .ok_or(GkmError::GroupFull)?;
        self.slots[slot] = Some(member);
        let msg = self.build_rekey(fresh_secret)?;
        let key = self.key_for_slot(slot, self.epoch)?;
        Ok((key, msg))
    }

    /// Member departure: the slot scalar is replaced by a fresh one
    /// (resampled until it differs), the aggregate is updated incrementally
    /// as `u += (x' - x) e_j`, and the fresh secret is broadcast.
    pub fn leave(
        &mut self,
        member: &MemberId,
        fresh_secret: R::Elem,
        rng: &mut dyn RngCore,
    ) -> Result<RekeyMessage<R>, GkmError> {
        let slot = self
            .member_slot(member)
            .ok_or_else(|| GkmError::UnknownMember(member.clone()))?;
        let replacement = self.draw_distinct_scalar(slot, rng);
        self.ops.reset();
        self.refresh_slot(slot, replacement)?;
        self.finish_broadcast(fresh_secret)
    }

    /// Departure with a caller-chosen replacement scalar. Walkthrough and
    /// test hook: unlike [`GroupState::leave`] it permits `x' = x`, the
    /// degenerate configuration in which the departed key keeps working.
    pub fn leave_with_scalar(
        &mut self,
        member: &MemberId,
        fresh_secret: R::Elem,
        replacement: R::Elem,
    ) -> Result<RekeyMessage<R>, GkmError> {
        let slot = self
            .member_slot(member)
            .ok_or_else(|| GkmError::UnknownMember(member.clone()))?;
        if self.ring().is_zero(&replacement) {
            return Err(GkmError::ZeroScalar);
        }
        self.ops.reset();
        self.refresh_slot(slot, replacement)?;
        self.finish_broadcast(fresh_secret)
    }

    /// Batched departures: all slot updates are applied incrementally, then
    /// a single broadcast covers the batch. An empty batch is a pure rekey.
    pub fn batch_refresh(
        &mut self,
        departures: &[MemberId],
        fresh_secret: R::Elem,
        rng: &mut dyn RngCore,
    ) -> Result<RekeyMessage<R>, GkmError> {
        // Validate up front so a bad id cannot leave a half-applied batch.
        let mut slots = Vec::with_capacity(departures.len());
        let mut seen = std::collections::HashSet::new();
        for member in departures {
            let slot = self
                .member_slot(member)
                .ok_or_else(|| GkmError::UnknownMember(member.clone()))?;
            if !seen.insert(slot) {
                return Err(GkmError::UnknownMember(member.clone()));
            }
            slots.push(slot);
        }
        self.ops.reset();
        for slot in slots {
            let replacement = self.draw_distinct_scalar(slot, rng);
            self.refresh_slot(slot, replacement)?;
        }
        self.finish_broadcast(fresh_secret)
    }

    /// Full rotation: every slot scalar is resampled, the aggregate is
    /// rebuilt, and every outstanding member key is invalidated until
    /// re-issued.
    pub fn rotate_all(
        &mut self,
        fresh_secret: R::Elem,
        rng: &mut dyn RngCore,
    ) -> Result<RekeyMessage<R>, GkmError> {
        if self.ring().is_zero(&fresh_secret) {
            return Err(GkmError::ZeroSecret);
        }
        self.ops.reset();
        for slot in 0..self.scalars.len() {
            self.scalars[slot] = self.draw_distinct_scalar(slot, rng);
        }
        let ring = self.system.ring().clone();
        self.aggregate =
            linear_combination(&ring, &self.scalars, self.system.basis(), self.system.dim())?;
        self.ops.scalar_vector_muls += self.scalars.len() as u64;
        self.ops.vector_adds += self.scalars.len().saturating_sub(1) as u64;
        self.finish_broadcast(fresh_secret)
    }

    fn draw_distinct_scalar(&self, slot: usize, rng: &mut dyn RngCore) -> R::Elem {
        let ring = self.system.ring();
        loop {
            let candidate = ring.rand_nonzero(rng);
            if candidate != self.scalars[slot] {
                return candidate;
            }
        }
    }

    /// Applies one slot refresh: `u += (x' - x) e_j`, scalar swapped, slot
    /// freed.
    fn refresh_slot(&mut self, slot: usize, replacement: R::Elem) -> Result<(), GkmError> {
        let ring = self.system.ring().clone();
        if ring.is_zero(&replacement) {
            return Err(GkmError::ZeroScalar);
        }
        let delta = ring.sub(&replacement, &self.scalars[slot]);
        self.ops.scalar_subs += 1;
        let correction = self.system.vector(slot).scale(&delta);
        self.ops.scalar_vector_muls += 1;
        self.aggregate = self.aggregate.add(&correction);
        self.ops.vector_adds += 1;
        self.scalars[slot] = replacement;
        self.slots[slot] = None;
        Ok(())
    }

    /// Final scale + epoch bump shared by every refreshment path. Counted
    /// as one scalar-vector multiplication.
    fn finish_broadcast(&mut self, secret: R::Elem) -> Result<RekeyMessage<R>, GkmError> {
        let ring = self.system.ring().clone();
        if ring.is_zero(&secret) {
            return Err(GkmError::ZeroSecret);
        }
        let c = self.aggregate.scale(&secret);
        self.ops.scalar_vector_muls += 1;
        self.epoch += 1;
        self.current_secret = secret;
        self.debug_check();
        Ok(RekeyMessage { epoch: self.epoch, c })
    }
}

/// One broadcast's gcd audit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GcdEntry {
    pub epoch: u64,
    pub gcd: BigInt,
    pub secret_divides_gcd: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GcdLeakReport {
    pub entries: Vec<GcdEntry>,
}

impl GcdLeakReport {
    pub fn all_divisible(&self) -> bool {
        self.entries.iter().all(|e| e.secret_divides_gcd)
    }
}

/// Demonstrates the exact-integer leak: over a gcd-admitting ring the
/// distributed secret divides the gcd of every broadcast's coordinates.
/// Errors with [`GkmError::WrongMode`] over `F_p`, where no such gcd exists.
pub fn gcd_leak_probe<R: Ring>(
    ring: &R,
    messages: &[RekeyMessage<R>],
    secrets: &[R::Elem],
) -> Result<GcdLeakReport, GkmError> {
    assert_eq!(messages.len(), secrets.len(), "one secret per message");
    let mut entries = Vec::with_capacity(messages.len());
    for (msg, secret) in messages.iter().zip(secrets) {
        let secret_int = ring.as_integer(secret).ok_or(GkmError::WrongMode)?;
        let mut gcd = BigInt::from(0);
        for coord in msg.c.coords() {
            let c = ring.as_integer(coord).ok_or(GkmError::WrongMode)?;
            gcd = gcd.gcd(&c);
        }
        let secret_divides_gcd = if secret_int == BigInt::from(0) {
            false
        } else {
            (&gcd % &secret_int) == BigInt::from(0)
        };
        entries.push(GcdEntry { epoch: msg.epoch, gcd, secret_divides_gcd });
    }
    Ok(GcdLeakReport { entries })
}
