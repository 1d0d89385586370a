//! Binary wire format, capture files, and message-length estimators.
//!
//! Every frame starts with an 18-byte header:
//!
//! ```text
//! magic "OKMP" | version u8 | kind u8 | epoch u64 LE | dim u32 LE
//! ```
//!
//! Version 1 is protocol mode: field elements are 8-byte little-endian
//! canonical residues, and a decoder rejects any value `>= p`. Version 2 is
//! demo (exact-integer) mode, used only for rekey frames, with each
//! coordinate a length-prefixed decimal string. `dim` is the element count
//! for vector-bearing kinds and 0 otherwise.
//!
//! Kinds: `REKEY=1, JOIN_REQ=2, KEY_ISSUE=3, AUTH_CH=4, AUTH_RESP=5,
//! LEAVE_NOTICE=6`. KEY_ISSUE frames exist only on the secure unicast
//! channel and carry the member's secret vector, cached inverse norm, and
//! (when authentication is enabled) the aggregate — treat captures of them
//! as confidential. Their body starts with a status byte so the same kind
//! also carries typed refusals and acks back to the requesting client.
//!
//! A capture file is a sequence of frames, each prefixed with a u32 LE
//! length. The same framing runs on TCP connections.

use std::io::{Read, Write};

use num_bigint::BigInt;
use thiserror::Error;

use crate::ffield::{DemoInt, DemoRing, Fe, PrimeField};
use crate::gkm::MemberId;
use crate::ortholin::FVector;

pub const MAGIC: [u8; 4] = *b"OKMP";
pub const VERSION_PROTOCOL: u8 = 1;
pub const VERSION_DEMO: u8 = 2;
/// Header length: magic 4 + version 1 + kind 1 + epoch 8 + dim 4.
pub const FRAME_HEADER_LEN: usize = 18;

pub const KIND_REKEY: u8 = 1;
pub const KIND_JOIN_REQ: u8 = 2;
pub const KIND_KEY_ISSUE: u8 = 3;
pub const KIND_AUTH_CH: u8 = 4;
pub const KIND_AUTH_RESP: u8 = 5;
pub const KIND_LEAVE_NOTICE: u8 = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown frame kind {0}")]
    UnknownKind(u8),
    #[error("frame truncated: needed {needed} more bytes")]
    TruncatedFrame { needed: usize },
    #[error("declared lengths do not match body: {0}")]
    LengthMismatch(String),
    #[error("element {value} is not a canonical residue mod {modulus}")]
    NonCanonicalElement { value: u64, modulus: u64 },
    #[error("demo integer body is not a valid decimal string")]
    BadDemoInt,
    #[error("string field is not valid UTF-8")]
    BadUtf8,
    #[error("string field exceeds the u16 length prefix")]
    StringTooLong,
    #[error("unknown key-issue status {0}")]
    UnknownStatus(u8),
    #[error("demo mode supports only rekey frames (kind {0})")]
    UnsupportedDemoKind(u8),
    #[error("corrupt capture: {0}")]
    CorruptCapture(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for WireError {
    fn from(e: std::io::Error) -> Self {
        WireError::Io(e.to_string())
    }
}

/// Typed refusal/ack carried by a KEY_ISSUE frame with nonzero status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefusalCode {
    AuthFailed = 1,
    GroupFull = 2,
    DuplicateMember = 3,
    UnknownMember = 4,
    ChurnClosed = 5,
}

impl RefusalCode {
    fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            1 => RefusalCode::AuthFailed,
            2 => RefusalCode::GroupFull,
            3 => RefusalCode::DuplicateMember,
            4 => RefusalCode::UnknownMember,
            5 => RefusalCode::ChurnClosed,
            _ => return None,
        })
    }
}

impl std::fmt::Display for RefusalCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RefusalCode::AuthFailed => "authentication failed",
            RefusalCode::GroupFull => "group is full",
            RefusalCode::DuplicateMember => "member already joined",
            RefusalCode::UnknownMember => "unknown member",
            RefusalCode::ChurnClosed => "closed for churning",
        };
        f.write_str(s)
    }
}

const STATUS_ISSUED: u8 = 0;
const STATUS_LEAVE_ACK: u8 = 6;

/// Body of a KEY_ISSUE frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KeyIssueBody {
    /// Key material for the joining member. `aggregate` is present when the
    /// server runs with authentication enabled.
    Issued {
        slot: u32,
        v: FVector<PrimeField>,
        norm_inv: Fe,
        aggregate: Option<FVector<PrimeField>>,
    },
    Refused(RefusalCode),
    LeaveAck,
}

/// A decoded frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    Rekey { epoch: u64, c: FVector<PrimeField> },
    DemoRekey { epoch: u64, c: FVector<DemoRing> },
    JoinRequest { member: MemberId, credential: String },
    KeyIssue { epoch: u64, body: KeyIssueBody },
    AuthChallenge { epoch: u64, payload: FVector<PrimeField> },
    AuthResponse { epoch: u64, payload: FVector<PrimeField> },
    LeaveNotice { member: MemberId },
}

impl Frame {
    fn kind(&self) -> u8 {
        match self {
            Frame::Rekey { .. } | Frame::DemoRekey { .. } => KIND_REKEY,
            Frame::JoinRequest { .. } => KIND_JOIN_REQ,
            Frame::KeyIssue { .. } => KIND_KEY_ISSUE,
            Frame::AuthChallenge { .. } => KIND_AUTH_CH,
            Frame::AuthResponse { .. } => KIND_AUTH_RESP,
            Frame::LeaveNotice { .. } => KIND_LEAVE_NOTICE,
        }
    }

    fn version(&self) -> u8 {
        match self {
            Frame::DemoRekey { .. } => VERSION_DEMO,
            _ => VERSION_PROTOCOL,
        }
    }

    fn epoch(&self) -> u64 {
        match self {
            Frame::Rekey { epoch, .. }
            | Frame::DemoRekey { epoch, .. }
            | Frame::KeyIssue { epoch, .. }
            | Frame::AuthChallenge { epoch, .. }
            | Frame::AuthResponse { epoch, .. } => *epoch,
            Frame::JoinRequest { .. } | Frame::LeaveNotice { .. } => 0,
        }
    }

    fn dim(&self) -> u32 {
        match self {
            Frame::Rekey { c, .. } => c.dim() as u32,
            Frame::DemoRekey { c, .. } => c.dim() as u32,
            Frame::AuthChallenge { payload, .. } | Frame::AuthResponse { payload, .. } => {
                payload.dim() as u32
            }
            Frame::KeyIssue { body: KeyIssueBody::Issued { v, .. }, .. } => v.dim() as u32,
            _ => 0,
        }
    }
}

/// Serializes a frame. Infallible except for oversized string fields.
pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + 16);
    out.extend_from_slice(&MAGIC);
    out.push(frame.version());
    out.push(frame.kind());
    out.extend_from_slice(&frame.epoch().to_le_bytes());
    out.extend_from_slice(&frame.dim().to_le_bytes());
    match frame {
        Frame::Rekey { c, .. } => put_vector(&mut out, c),
        Frame::DemoRekey { c, .. } => put_demo_vector(&mut out, c)?,
        Frame::JoinRequest { member, credential } => {
            put_string(&mut out, member.as_str())?;
            put_string(&mut out, credential)?;
        }
        Frame::KeyIssue { body, .. } => match body {
            KeyIssueBody::Issued { slot, v, norm_inv, aggregate } => {
                out.push(STATUS_ISSUED);
                out.extend_from_slice(&slot.to_le_bytes());
                put_vector(&mut out, v);
                out.extend_from_slice(&norm_inv.value().to_le_bytes());
                match aggregate {
                    Some(u) => {
                        out.push(1);
                        put_vector(&mut out, u);
                    }
                    None => out.push(0),
                }
            }
            KeyIssueBody::Refused(code) => out.push(*code as u8),
            KeyIssueBody::LeaveAck => out.push(STATUS_LEAVE_ACK),
        },
        Frame::AuthChallenge { payload, .. } | Frame::AuthResponse { payload, .. } => {
            put_vector(&mut out, payload)
        }
        Frame::LeaveNotice { member } => put_string(&mut out, member.as_str())?,
    }
    Ok(out)
}

/// Decodes one frame. `field` anchors canonical-residue validation for
/// protocol-mode elements; demo frames carry self-describing decimals.
/// Never reads past `bytes`.
pub fn decode_frame(field: &PrimeField, bytes: &[u8]) -> Result<Frame, WireError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(WireError::BadMagic);
    }
    let version = r.u8()?;
    if version != VERSION_PROTOCOL && version != VERSION_DEMO {
        return Err(WireError::BadVersion(version));
    }
    let kind = r.u8()?;
    let epoch = r.u64()?;
    let dim = r.u32()? as usize;

    if version == VERSION_DEMO {
        if kind != KIND_REKEY {
            return Err(WireError::UnsupportedDemoKind(kind));
        }
        let c = r.demo_vector(dim)?;
        r.finish()?;
        return Ok(Frame::DemoRekey { epoch, c });
    }

    let frame = match kind {
        KIND_REKEY => Frame::Rekey { epoch, c: r.vector(field, dim)? },
        KIND_JOIN_REQ => {
            expect_zero_dim(dim)?;
            let member = MemberId::new(r.string()?);
            let credential = r.string()?;
            Frame::JoinRequest { member, credential }
        }
        KIND_KEY_ISSUE => {
            let status = r.u8()?;
            let body = match status {
                STATUS_ISSUED => {
                    let slot = r.u32()?;
                    let v = r.vector(field, dim)?;
                    let norm_inv = r.element(field)?;
                    let aggregate = match r.u8()? {
                        0 => None,
                        1 => Some(r.vector(field, dim)?),
                        b => {
                            return Err(WireError::LengthMismatch(format!(
                                "aggregate flag must be 0 or 1, got {b}"
                            )))
                        }
                    };
                    KeyIssueBody::Issued { slot, v, norm_inv, aggregate }
                }
                STATUS_LEAVE_ACK => {
                    expect_zero_dim(dim)?;
                    KeyIssueBody::LeaveAck
                }
                other => {
                    expect_zero_dim(dim)?;
                    KeyIssueBody::Refused(
                        RefusalCode::from_byte(other).ok_or(WireError::UnknownStatus(other))?,
                    )
                }
            };
            Frame::KeyIssue { epoch, body }
        }
        KIND_AUTH_CH => Frame::AuthChallenge { epoch, payload: r.vector(field, dim)? },
        KIND_AUTH_RESP => Frame::AuthResponse { epoch, payload: r.vector(field, dim)? },
        KIND_LEAVE_NOTICE => {
            expect_zero_dim(dim)?;
            Frame::LeaveNotice { member: MemberId::new(r.string()?) }
        }
        other => return Err(WireError::UnknownKind(other)),
    };
    r.finish()?;
    Ok(frame)
}

fn expect_zero_dim(dim: usize) -> Result<(), WireError> {
    if dim != 0 {
        return Err(WireError::LengthMismatch(format!(
            "kind carries no vector but declares dim {dim}"
        )));
    }
    Ok(())
}

fn put_vector(out: &mut Vec<u8>, v: &FVector<PrimeField>) {
    for c in v.coords() {
        out.extend_from_slice(&c.value().to_le_bytes());
    }
}

fn put_demo_vector(out: &mut Vec<u8>, v: &FVector<DemoRing>) -> Result<(), WireError> {
    for c in v.coords() {
        let s = c.to_string();
        if s.len() > u16::MAX as usize {
            return Err(WireError::StringTooLong);
        }
        out.extend_from_slice(&(s.len() as u16).to_le_bytes());
        out.extend_from_slice(s.as_bytes());
    }
    Ok(())
}

fn put_string(out: &mut Vec<u8>, s: &str) -> Result<(), WireError> {
    if s.len() > u16::MAX as usize {
        return Err(WireError::StringTooLong);
    }
    out.extend_from_slice(&(s.len() as u16).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

/// Bounds-checked sequential reader over a frame body.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self
            .pos
            .checked_add(n)
            .ok_or(WireError::LengthMismatch("length overflow".into()))?;
        if end > self.bytes.len() {
            return Err(WireError::TruncatedFrame { needed: end - self.bytes.len() });
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn element(&mut self, field: &PrimeField) -> Result<Fe, WireError> {
        let raw = self.u64()?;
        field.try_elem(raw).ok_or(WireError::NonCanonicalElement {
            value: raw,
            modulus: field.modulus(),
        })
    }

    fn vector(&mut self, field: &PrimeField, dim: usize) -> Result<FVector<PrimeField>, WireError> {
        if dim == 0 {
            return Err(WireError::LengthMismatch("vector frame declares dim 0".into()));
        }
        let mut coords = Vec::with_capacity(dim.min(1 << 20));
        for _ in 0..dim {
            coords.push(self.element(field)?);
        }
        FVector::new(*field, coords)
            .map_err(|e| WireError::LengthMismatch(format!("vector rejected: {e}")))
    }

    fn demo_vector(&mut self, dim: usize) -> Result<FVector<DemoRing>, WireError> {
        if dim == 0 {
            return Err(WireError::LengthMismatch("vector frame declares dim 0".into()));
        }
        let mut coords = Vec::with_capacity(dim.min(1 << 20));
        for _ in 0..dim {
            let len = u16::from_le_bytes(self.take(2)?.try_into().unwrap()) as usize;
            let raw = self.take(len)?;
            let value = BigInt::parse_bytes(raw, 10).ok_or(WireError::BadDemoInt)?;
            coords.push(DemoInt::new(value));
        }
        FVector::new(DemoRing, coords)
            .map_err(|e| WireError::LengthMismatch(format!("vector rejected: {e}")))
    }

    fn string(&mut self) -> Result<String, WireError> {
        let len = u16::from_le_bytes(self.take(2)?.try_into().unwrap()) as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| WireError::BadUtf8)
    }

    /// The declared body must be fully consumed.
    fn finish(&self) -> Result<(), WireError> {
        if self.pos != self.bytes.len() {
            return Err(WireError::LengthMismatch(format!(
                "{} trailing bytes after body",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Appends length-prefixed frames to a writer. Capture files are
/// append-only and single-writer.
pub struct CaptureWriter<W: Write> {
    inner: W,
}

impl<W: Write> CaptureWriter<W> {
    pub fn new(inner: W) -> Self {
        CaptureWriter { inner }
    }

    pub fn append(&mut self, frame: &Frame) -> Result<(), WireError> {
        let bytes = encode_frame(frame)?;
        self.inner.write_all(&(bytes.len() as u32).to_le_bytes())?;
        self.inner.write_all(&bytes)?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

/// Captures a transcript to bytes.
pub fn write_capture(frames: &[Frame]) -> Result<Vec<u8>, WireError> {
    let mut w = CaptureWriter::new(Vec::new());
    for f in frames {
        w.append(f)?;
    }
    Ok(w.into_inner())
}

/// Replays a capture. An empty input yields an empty transcript; a bad
/// length prefix is [`WireError::CorruptCapture`], frame-level problems
/// keep their own typed errors.
pub fn read_capture<R: Read>(field: &PrimeField, mut reader: R) -> Result<Vec<Frame>, WireError> {
    let mut data = Vec::new();
    reader.read_to_end(&mut data)?;
    let mut frames = Vec::new();
    let mut pos = 0usize;
    while pos < data.len() {
        if data.len() - pos < 4 {
            return Err(WireError::CorruptCapture("dangling length prefix".into()));
        }
        let len = u32::from_le_bytes(data[pos..pos + 4].try_into().unwrap()) as usize;
        pos += 4;
        if data.len() - pos < len {
            return Err(WireError::CorruptCapture(format!(
                "record declares {len} bytes, {} remain",
                data.len() - pos
            )));
        }
        frames.push(decode_frame(field, &data[pos..pos + len])?);
        pos += len;
    }
    Ok(frames)
}

/// Competing schemes for the message-length model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// This protocol: one field element per slot.
    Orthogonal,
    /// Extended-Euclid scheme: one prime-sized integer per member.
    Euclides { prime_bits: u32 },
    /// Chinese-remainder scheme: message is on the order of the product of
    /// all member moduli.
    SecureLock { modulus_bits: u32 },
}

/// Inputs to the rekey message-length estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CostModel {
    /// Group size `n`.
    pub group_size: u64,
    /// Serialized bits per element, `C`.
    pub elem_bits: u32,
    pub scheme: Scheme,
}

/// Estimated rekey payload length in bytes: `n * C / 8` for the orthogonal
/// scheme (header excluded; add [`FRAME_HEADER_LEN`] for the full frame),
/// `n * prime_bits / 8` for Euclides, `n * modulus_bits / 8` for Secure
/// Lock.
pub fn rekey_length_bytes(model: &CostModel) -> u64 {
    let bits_per_member = match model.scheme {
        Scheme::Orthogonal => model.elem_bits as u64,
        Scheme::Euclides { prime_bits } => prime_bits as u64,
        Scheme::SecureLock { modulus_bits } => modulus_bits as u64,
    };
    model.group_size * bits_per_member / 8
}
