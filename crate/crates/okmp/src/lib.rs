//! Multicast group key management over orthogonal vector systems.
//!
//! A server keeps a secret orthogonal system `{e_1, ..., e_n}` and secret
//! nonzero scalars `x_i`; member `i` holds `v_i = x_i * e_i`. Distributing a
//! secret `s` takes a single broadcast `c = s * (x_1 e_1 + ... + x_n e_n)`:
//! each member recovers `s = <c, v_i> * <v_i, v_i>^-1`, departures are
//! revoked by re-randomizing one scalar, and the same algebra doubles as a
//! member-to-member challenge-response authenticator.
//!
//! Crate layout:
//!
//! * [`ffield`] — prime-field and exact-integer scalar arithmetic.
//! * [`ortholin`] — vectors, the bilinear form, orthogonal-system
//!   generation, and parameter advice.
//! * [`gkm`] — the group-key state machine (rekey, join, leave, rotate,
//!   batch refresh) with operation-count instrumentation.
//! * [`auth`] — challenge-response authentication between members.
//! * [`adversary`] — executable attack narratives used as oracles.
//! * [`wire`] — the binary frame format, capture files, and message-length
//!   estimators.
//! * [`netsim`] — in-process and TCP client/server harnesses.
//! * [`bench`] — the stage benchmark harness behind the CLI.
//! * [`worked_example`] — the hand-checkable integer walkthrough.

pub mod adversary;
pub mod auth;
pub mod bench;
pub mod ffield;
pub mod gkm;
pub mod netsim;
pub mod ortholin;
pub mod wire;
pub mod worked_example;

pub use ffield::{DemoInt, DemoRing, Fe, FieldError, PrimeField, Ring};
pub use gkm::{GroupState, MemberId, MemberKey, Mode, RekeyMessage};
pub use ortholin::{FVector, OrthogonalSystem};
