//! Server configuration: a flat `key = value` file plus a salted-hash
//! credential roster.
//!
//! ```text
//! # comments and blank lines are ignored
//! prime = 2305843009213693951
//! dim = 17
//! capacity = 8
//! listen = 127.0.0.1:7700
//! batch_window_ms = 250
//! auth_enabled = true
//! churn_threshold = 3
//! member.alice = plain:wonderland
//! member.bob = <salt_hex>:<sha256_hex>
//! ```
//!
//! `plain:` entries are hashed with a random salt at load time — a test
//! convenience; ship real rosters pre-hashed.

use std::collections::HashMap;

use rand::RngCore;
use sha2::{Digest, Sha256};

use crate::ffield::PrimeField;
use crate::gkm::Mode;
use crate::netsim::NetsimError;

pub const DEFAULT_BATCH_WINDOW_MS: u64 = 250;
/// Logout-login cycles tolerated per batch window; one more closes the
/// client.
pub const DEFAULT_CHURN_THRESHOLD: u32 = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
struct Credential {
    salt: [u8; 16],
    hash: [u8; 32],
}

/// Salted-SHA-256 credential store.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Roster {
    entries: HashMap<String, Credential>,
}

impl Roster {
    pub fn new() -> Self {
        Roster::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds a member with a freshly salted password hash.
    pub fn add_password(&mut self, member: &str, password: &str, rng: &mut dyn RngCore) {
        let mut salt = [0u8; 16];
        rng.fill_bytes(&mut salt);
        let hash = hash_credential(&salt, password);
        self.entries.insert(member.to_string(), Credential { salt, hash });
    }

    /// Adds a pre-hashed entry in `salt_hex:hash_hex` form.
    pub fn add_hashed(&mut self, member: &str, entry: &str) -> Result<(), NetsimError> {
        let (salt_hex, hash_hex) = entry
            .split_once(':')
            .ok_or_else(|| NetsimError::BadConfig(format!("member {member}: expected salt:hash")))?;
        let salt_vec = hex::decode(salt_hex)
            .map_err(|e| NetsimError::BadConfig(format!("member {member}: bad salt hex: {e}")))?;
        let hash_vec = hex::decode(hash_hex)
            .map_err(|e| NetsimError::BadConfig(format!("member {member}: bad hash hex: {e}")))?;
        let salt: [u8; 16] = salt_vec
            .try_into()
            .map_err(|_| NetsimError::BadConfig(format!("member {member}: salt must be 16 bytes")))?;
        let hash: [u8; 32] = hash_vec
            .try_into()
            .map_err(|_| NetsimError::BadConfig(format!("member {member}: hash must be 32 bytes")))?;
        self.entries.insert(member.to_string(), Credential { salt, hash });
        Ok(())
    }

    pub fn verify(&self, member: &str, password: &str) -> bool {
        match self.entries.get(member) {
            Some(cred) => hash_credential(&cred.salt, password) == cred.hash,
            None => false,
        }
    }

    /// Config lines reproducing this roster.
    pub fn to_config_lines(&self) -> Vec<String> {
        let mut members: Vec<&String> = self.entries.keys().collect();
        members.sort();
        members
            .into_iter()
            .map(|m| {
                let c = &self.entries[m];
                format!("member.{m} = {}:{}", hex::encode(c.salt), hex::encode(c.hash))
            })
            .collect()
    }
}

pub fn hash_credential(salt: &[u8; 16], password: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(salt);
    hasher.update(password.as_bytes());
    hasher.finalize().into()
}

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub field: PrimeField,
    pub capacity: usize,
    pub dim: usize,
    pub mode: Mode,
    pub listen: Option<String>,
    pub batch_window_ms: u64,
    pub auth_enabled: bool,
    pub churn_threshold: u32,
    pub roster: Roster,
    /// Pins all server randomness when set (tests, reproductions).
    pub seed: Option<u64>,
}

impl ServerConfig {
    pub fn new(field: PrimeField, capacity: usize, dim: usize) -> Self {
        ServerConfig {
            field,
            capacity,
            dim,
            mode: Mode::Protocol,
            listen: None,
            batch_window_ms: DEFAULT_BATCH_WINDOW_MS,
            auth_enabled: false,
            churn_threshold: DEFAULT_CHURN_THRESHOLD,
            roster: Roster::new(),
            seed: None,
        }
    }
}

/// Parses the flat config format. Unknown keys are rejected so typos
/// surface.
pub fn parse_config(text: &str) -> Result<ServerConfig, NetsimError> {
    let mut prime: Option<u64> = None;
    let mut dim: Option<usize> = None;
    let mut capacity: Option<usize> = None;
    let mut listen: Option<String> = None;
    let mut batch_window_ms = DEFAULT_BATCH_WINDOW_MS;
    let mut auth_enabled = false;
    let mut churn_threshold = DEFAULT_CHURN_THRESHOLD;
    let mut mode = Mode::Protocol;
    let mut seed: Option<u64> = None;
    let mut plain_members: Vec<(String, String)> = Vec::new();
    let mut hashed_members: Vec<(String, String)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| NetsimError::BadConfig(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim();
        let value = value.trim();
        let bad = |what: &str| NetsimError::BadConfig(format!("line {}: {what}", lineno + 1));
        match key {
            "prime" => prime = Some(value.parse().map_err(|_| bad("prime must be an integer"))?),
            "dim" => dim = Some(value.parse().map_err(|_| bad("dim must be an integer"))?),
            "capacity" => {
                capacity = Some(value.parse().map_err(|_| bad("capacity must be an integer"))?)
            }
            "listen" => listen = Some(value.to_string()),
            "batch_window_ms" => {
                batch_window_ms = value.parse().map_err(|_| bad("batch_window_ms must be an integer"))?
            }
            "auth_enabled" => {
                auth_enabled = match value {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    _ => return Err(bad("auth_enabled must be true or false")),
                }
            }
            "churn_threshold" => {
                churn_threshold = value.parse().map_err(|_| bad("churn_threshold must be an integer"))?
            }
            "mode" => {
                mode = match value {
                    "protocol" => Mode::Protocol,
                    "test" => Mode::Test,
                    _ => return Err(bad("mode must be protocol or test")),
                }
            }
            "seed" => seed = Some(value.parse().map_err(|_| bad("seed must be an integer"))?),
            _ if key.starts_with("member.") => {
                let member = key.trim_start_matches("member.").to_string();
                if member.is_empty() {
                    return Err(bad("empty member name"));
                }
                match value.strip_prefix("plain:") {
                    Some(pw) => plain_members.push((member, pw.to_string())),
                    None => hashed_members.push((member, value.to_string())),
                }
            }
            other => {
                return Err(NetsimError::BadConfig(format!("line {}: unknown key {other}", lineno + 1)))
            }
        }
    }

    let field = match (prime, mode) {
        (Some(p), Mode::Protocol) => PrimeField::new(p).map_err(|e| NetsimError::BadConfig(e.to_string()))?,
        (Some(p), Mode::Test) => PrimeField::new_test(p).map_err(|e| NetsimError::BadConfig(e.to_string()))?,
        (None, _) => PrimeField::default_field(),
    };
    let capacity = capacity.ok_or_else(|| NetsimError::BadConfig("missing capacity".into()))?;
    let dim = dim.ok_or_else(|| NetsimError::BadConfig("missing dim".into()))?;

    let mut roster = Roster::new();
    for (member, entry) in hashed_members {
        roster.add_hashed(&member, &entry)?;
    }
    // Plain entries get salts from a generator pinned by the seed when one
    // is configured.
    let mut salt_rng: Box<dyn RngCore> = match seed {
        Some(s) => Box::new(crate::ffield::seeded_rng(s)),
        None => Box::new(crate::ffield::secure_rng()),
    };
    for (member, pw) in plain_members {
        roster.add_password(&member, &pw, salt_rng.as_mut());
    }

    Ok(ServerConfig {
        field,
        capacity,
        dim,
        mode,
        listen,
        batch_window_ms,
        auth_enabled,
        churn_threshold,
        roster,
        seed,
    })
}
