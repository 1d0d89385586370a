//! Member-to-member challenge-response authentication.
//!
//! A challenger holding the aggregate `u = sum x_i e_i` picks a random
//! nonzero `k` and sends `k^-1 * u`. Any member can recover `k^-1` with the
//! usual inner-product algebra, invert it, and respond with `k * u`; the
//! challenger checks that the recovered scalar equals the retained `k`.
//! These exchanges expire with any refreshment that changes the scalar set,
//! enforced here by epoch binding.
//!
//! Members obtain `u` at key-issue time when the server runs with
//! authentication enabled. A deployment can also dedicate a second,
//! independent group state to authentication; this module works against
//! whichever aggregate it is handed.
//!
//! Note: response payloads are scalar multiples of `u`, so an eavesdropper
//! collecting auth traffic accumulates multiples of the aggregate. That
//! exposure is flagged here and deliberately not mitigated.

use rand::RngCore;
use thiserror::Error;

use crate::ffield::{Fe, FieldError, PrimeField};
use crate::gkm::MemberKey;
use crate::ortholin::{FVector, OrtholinError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuthError {
    #[error("epoch mismatch: challenge {challenge}, response {response}, current {current}")]
    EpochMismatch { challenge: u64, response: u64, current: u64 },
    #[error("member key is isotropic")]
    IsotropicKey,
    #[error("challenge is malformed: recovered scalar is zero")]
    ZeroRecovered,
    #[error("challenge scalar k must be nonzero")]
    ZeroK,
    #[error("aggregate is the zero vector; no challenge can be built")]
    ZeroAggregate,
    #[error(transparent)]
    Ortholin(#[from] OrtholinError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// The frame a challenger sends: `payload = k^-1 * u` at a given epoch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthChallenge {
    pub epoch: u64,
    pub payload: FVector<PrimeField>,
}

/// The frame a responder returns: `payload = k * u`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthResponse {
    pub epoch: u64,
    pub payload: FVector<PrimeField>,
}

/// A challenge plus the challenger's retained `k`. The secret never leaves
/// this struct; transmit only [`IssuedChallenge::challenge`].
#[derive(Clone, Debug)]
pub struct IssuedChallenge {
    pub challenge: AuthChallenge,
    k: Fe,
}

/// Builds a challenge from the current aggregate with a fresh random `k`.
pub fn make_challenge(
    aggregate: &FVector<PrimeField>,
    epoch: u64,
    rng: &mut dyn RngCore,
) -> Result<IssuedChallenge, AuthError> {
    let k = aggregate.ring().rand_nonzero(rng);
    make_challenge_with_k(aggregate, epoch, k)
}

/// Deterministic variant for tests and walkthroughs.
pub fn make_challenge_with_k(
    aggregate: &FVector<PrimeField>,
    epoch: u64,
    k: Fe,
) -> Result<IssuedChallenge, AuthError> {
    if k.is_zero() {
        return Err(AuthError::ZeroK);
    }
    if aggregate.is_zero() {
        return Err(AuthError::ZeroAggregate);
    }
    let payload = aggregate.scale(&k.inv()?);
    Ok(IssuedChallenge { challenge: AuthChallenge { epoch, payload }, k })
}

/// Responder side: recovers `k^-1` from the challenge via the member key,
/// inverts it, and returns `k * u`.
pub fn answer_challenge(
    key: &MemberKey<PrimeField>,
    aggregate: &FVector<PrimeField>,
    challenge: &AuthChallenge,
) -> Result<AuthResponse, AuthError> {
    let norm_inv = *key.norm_inv().ok_or(AuthError::IsotropicKey)?;
    let h = challenge.payload.inner(key.vector())?;
    let k_inv = h * norm_inv;
    if k_inv.is_zero() {
        return Err(AuthError::ZeroRecovered);
    }
    let k = k_inv.inv()?;
    Ok(AuthResponse { epoch: challenge.epoch, payload: aggregate.scale(&k) })
}

/// What the verifier holds: its own member key, or direct aggregate access
/// (the server, or a provisioned member).
#[derive(Clone, Copy, Debug)]
pub enum Verifier<'a> {
    Key(&'a MemberKey<PrimeField>),
    Aggregate(&'a FVector<PrimeField>),
}

/// Challenger side: recovers `k` from the response and accepts iff it
/// equals the retained value. `current_epoch` is the verifier's view of the
/// group epoch; any refreshment since the challenge was issued makes the
/// exchange expire with [`AuthError::EpochMismatch`].
pub fn verify_response(
    issued: &IssuedChallenge,
    response: &AuthResponse,
    current_epoch: u64,
    verifier: Verifier<'_>,
) -> Result<bool, AuthError> {
    let challenge_epoch = issued.challenge.epoch;
    if challenge_epoch != current_epoch || response.epoch != challenge_epoch {
        return Err(AuthError::EpochMismatch {
            challenge: challenge_epoch,
            response: response.epoch,
            current: current_epoch,
        });
    }
    match verifier {
        Verifier::Key(key) => {
            let norm_inv = *key.norm_inv().ok_or(AuthError::IsotropicKey)?;
            if response.payload.dim() != key.vector().dim() {
                return Err(OrtholinError::DimMismatch {
                    left: key.vector().dim(),
                    right: response.payload.dim(),
                }
                .into());
            }
            let recovered = response.payload.inner(key.vector())? * norm_inv;
            Ok(recovered == issued.k)
        }
        Verifier::Aggregate(aggregate) => Ok(response.payload == aggregate.scale(&issued.k)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffield::{seeded_rng, PrimeField};
    use crate::gkm::{GroupState, MemberId, Mode};
    use crate::ortholin::{random_vector, OrthogonalSystem};

    fn f7_toy() -> (GroupState<PrimeField>, PrimeField) {
        let f7 = PrimeField::new_test(7).unwrap();
        let basis = vec![
            FVector::new(f7, vec![f7.elem(1), f7.elem(0)]).unwrap(),
            FVector::new(f7, vec![f7.elem(0), f7.elem(1)]).unwrap(),
        ];
        let system = OrthogonalSystem::from_basis(f7, basis).unwrap();
        let state =
            GroupState::from_parts(system, vec![f7.elem(2), f7.elem(3)], f7.elem(1)).unwrap();
        (state, f7)
    }

    #[test]
    fn f7_worked_values() {
        let (mut state, f7) = f7_toy();
        let key = state.assign_member(MemberId::new("m1")).unwrap();
        // u = (2, 3), k = 3: payload = 5 * (2, 3) = (3, 1).
        let issued = make_challenge_with_k(state.aggregate(), 0, f7.elem(3)).unwrap();
        assert_eq!(
            issued.challenge.payload.coords(),
            &[f7.elem(3), f7.elem(1)]
        );
        // h = <(3,1), (2,0)> = 6, norm_inv = 2, k^-1 = 5, k = 3,
        // response = 3 * (2, 3) = (6, 2).
        let resp = answer_challenge(&key, state.aggregate(), &issued.challenge).unwrap();
        assert_eq!(resp.payload.coords(), &[f7.elem(6), f7.elem(2)]);
        assert!(verify_response(&issued, &resp, 0, Verifier::Key(&key)).unwrap());
        assert!(verify_response(&issued, &resp, 0, Verifier::Aggregate(state.aggregate())).unwrap());
    }

    #[test]
    fn identity_k_echoes_aggregate() {
        let (state, f7) = f7_toy();
        let issued = make_challenge_with_k(state.aggregate(), 0, f7.elem(1)).unwrap();
        assert_eq!(&issued.challenge.payload, state.aggregate());
    }

    #[test]
    fn same_seed_same_challenge() {
        let (state, _) = f7_toy();
        let a = make_challenge(state.aggregate(), 0, &mut seeded_rng(4)).unwrap();
        let b = make_challenge(state.aggregate(), 0, &mut seeded_rng(4)).unwrap();
        assert_eq!(a.challenge, b.challenge);
        assert_eq!(a.k, b.k);
    }

    #[test]
    fn zero_payload_challenge_rejected_by_responder() {
        let (mut state, f7) = f7_toy();
        let key = state.assign_member(MemberId::new("m1")).unwrap();
        let zero = FVector::zero(f7, 2).unwrap();
        let bogus = AuthChallenge { epoch: 0, payload: zero };
        assert_eq!(
            answer_challenge(&key, state.aggregate(), &bogus).unwrap_err(),
            AuthError::ZeroRecovered
        );
    }

    #[test]
    fn completeness_many_trials() {
        let field = PrimeField::default_field();
        let mut rng = seeded_rng(61);
        let mut state = GroupState::init_group(Mode::Protocol, field, 4, 9, &mut rng).unwrap();
        let keys: Vec<_> = (0..4)
            .map(|i| state.assign_member(MemberId::new(format!("m{i}"))).unwrap())
            .collect();
        for trial in 0..1000 {
            let challenger = &keys[trial % 4];
            let responder = &keys[(trial + 1) % 4];
            let issued = make_challenge(state.aggregate(), state.epoch(), &mut rng).unwrap();
            let resp = answer_challenge(responder, state.aggregate(), &issued.challenge).unwrap();
            assert!(
                verify_response(&issued, &resp, state.epoch(), Verifier::Key(challenger)).unwrap(),
                "trial {trial}"
            );
        }
    }

    #[test]
    fn forged_response_rejected() {
        let field = PrimeField::default_field();
        let mut rng = seeded_rng(62);
        let mut state = GroupState::init_group(Mode::Protocol, field, 2, 5, &mut rng).unwrap();
        let key = state.assign_member(MemberId::new("honest")).unwrap();
        for _ in 0..200 {
            let issued = make_challenge(state.aggregate(), state.epoch(), &mut rng).unwrap();
            let forged = AuthResponse {
                epoch: state.epoch(),
                payload: random_vector(&field, 5, &mut rng),
            };
            assert!(!verify_response(&issued, &forged, state.epoch(), Verifier::Key(&key)).unwrap());
        }
    }

    #[test]
    fn soundness_rate_bounded_at_small_field() {
        // p = 10007: a forger answering with a random fake key should pass
        // about once in p - 1 attempts. 10^4 trials here; the acceptance
        // suite runs 10^5.
        let field = PrimeField::new_test(10007).unwrap();
        let mut rng = seeded_rng(63);
        let mut state = GroupState::init_group(Mode::Test, field, 3, 7, &mut rng).unwrap();
        let verifier_key = state.assign_member(MemberId::new("v")).unwrap();
        let mut accepts = 0u32;
        for _ in 0..10_000 {
            let issued = make_challenge(state.aggregate(), state.epoch(), &mut rng).unwrap();
            let fake_v = random_vector(&field, 7, &mut rng);
            let fake_norm = fake_v.inner(&fake_v).unwrap();
            let Ok(fake_norm_inv) = fake_norm.inv() else { continue };
            let h = issued.challenge.payload.inner(&fake_v).unwrap();
            let guess_k_inv = h * fake_norm_inv;
            if guess_k_inv.is_zero() {
                continue;
            }
            let forged = AuthResponse {
                epoch: state.epoch(),
                payload: state.aggregate().scale(&guess_k_inv.inv().unwrap()),
            };
            if verify_response(&issued, &forged, state.epoch(), Verifier::Key(&verifier_key))
                .unwrap()
            {
                accepts += 1;
            }
        }
        assert!(accepts <= 10, "forgery acceptance rate too high: {accepts}/10000");
    }

    #[test]
    fn refreshment_expires_in_flight_challenges() {
        let field = PrimeField::default_field();
        let mut rng = seeded_rng(64);
        let mut state = GroupState::init_group(Mode::Protocol, field, 3, 7, &mut rng).unwrap();
        let a = state.assign_member(MemberId::new("a")).unwrap();
        let b = state.assign_member(MemberId::new("b")).unwrap();
        let _ = state.assign_member(MemberId::new("c")).unwrap();

        let issued = make_challenge(state.aggregate(), state.epoch(), &mut rng).unwrap();
        let resp = answer_challenge(&b, state.aggregate(), &issued.challenge).unwrap();
        // "c" leaves before the response is checked.
        let _ = state.leave(&MemberId::new("c"), field.rand_nonzero(&mut rng), &mut rng).unwrap();
        let err =
            verify_response(&issued, &resp, state.epoch(), Verifier::Key(&a)).unwrap_err();
        assert!(matches!(err, AuthError::EpochMismatch { .. }));
    }
}
