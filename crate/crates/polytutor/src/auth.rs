//! Learner credentials and API session tokens.
//!
//! Passwords are hashed with Argon2id and a random 16-byte salt, and kept
//! as PHC strings in a credentials file next to the event log, one JSON
//! object per line: `{"name":..,"learner_id":..,"hash":..}`. Tokens are 128
//! random bits from the OS generator, hex-encoded, held in memory only.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::{Algorithm, Argon2, Params, Version};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};

/// Default token lifetime in seconds.
pub const DEFAULT_TOKEN_TTL: u64 = 24 * 60 * 60;

#[derive(Debug, thiserror::Error)]
pub enum AuthError {
    #[error("name `{0}` is already registered")]
    NameTaken(String),
    #[error("name must be 1-64 characters without control characters")]
    InvalidName,
    #[error("password must be at least {0} characters")]
    WeakPassword(usize),
    #[error("unknown name or wrong password")]
    BadCredentials,
    #[error("missing, unknown or expired token")]
    InvalidToken,
    #[error("credentials file {path}: {message}")]
    Store { path: String, message: String },
}

pub const MIN_PASSWORD_CHARS: usize = 8;

/// Argon2id cost settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashCost {
    pub memory_kib: u32,
    pub iterations: u32,
    pub parallelism: u32,
}

impl Default for HashCost {
    /// The argon2 crate's recommended defaults (19 MiB, 2 passes, 1 lane).
    fn default() -> Self {
        Self {
            memory_kib: Params::DEFAULT_M_COST,
            iterations: Params::DEFAULT_T_COST,
            parallelism: Params::DEFAULT_P_COST,
        }
    }
}

impl HashCost {
    /// Minimal cost, for tests and simulations only.
    pub fn insecure_fast() -> Self {
        Self {
            memory_kib: Params::MIN_M_COST.max(8),
            iterations: 1,
            parallelism: 1,
        }
    }

    fn hasher(&self) -> Argon2<'static> {
        let params = Params::new(self.memory_kib, self.iterations, self.parallelism, None)
            .expect("argon2 cost within library bounds");
        Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credential {
    pub name: String,
    pub learner_id: String,
    pub hash: String,
}

pub fn hash_password(cost: HashCost, password: &str) -> String {
    let mut salt = [0u8; 16];
    OsRng.fill_bytes(&mut salt);
    let salt = SaltString::encode_b64(&salt).expect("16 bytes is a valid salt");
    cost.hasher()
        .hash_password(password.as_bytes(), &salt)
        .expect("hashing with valid params")
        .to_string()
}

/// Checks `password` against a PHC string; the cost is read from the hash.
pub fn verify_password(hash: &str, password: &str) -> bool {
    PasswordHash::new(hash)
        .map(|parsed| Argon2::default().verify_password(password.as_bytes(), &parsed).is_ok())
        .unwrap_or(false)
}

fn validate_name(name: &str) -> Result<(), AuthError> {
    let chars = name.chars().count();
    if (1..=64).contains(&chars) && !name.chars().any(char::is_control) && name.trim() == name {
        Ok(())
    } else {
        Err(AuthError::InvalidName)
    }
}

/// Name to credential map, optionally persisted.
#[derive(Debug)]
pub struct CredentialStore {
    path: Option<PathBuf>,
    cost: HashCost,
    entries: Mutex<HashMap<String, Credential>>,
}

impl CredentialStore {
    pub fn in_memory(cost: HashCost) -> Self {
        Self {
            path: None,
            cost,
            entries: Mutex::new(HashMap::new()),
        }
    }

    /// Loads `path` if it exists; later registrations are appended to it.
    pub fn open(path: &Path, cost: HashCost) -> Result<Self, AuthError> {
        let store_err = |message: String| AuthError::Store {
            path: path.display().to_string(),
            message,
        };
        let mut entries = HashMap::new();
        match std::fs::read_to_string(path) {
            Ok(text) => {
                for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                    let c: Credential =
                        serde_json::from_str(line).map_err(|e| store_err(format!("line {}: {e}", i + 1)))?;
                    entries.insert(c.name.clone(), c);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(store_err(e.to_string())),
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            cost,
            entries: Mutex::new(entries),
        })
    }

    pub fn cost(&self) -> HashCost {
        self.cost
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, name: &str) -> bool {
        self.lock().contains_key(name)
    }

    /// Checks the name and password rules and that `name` is free, and
    /// returns the hash to store. Does not reserve the name.
    pub fn prepare(&self, name: &str, password: &str) -> Result<String, AuthError> {
        validate_name(name)?;
        if password.chars().count() < MIN_PASSWORD_CHARS {
            return Err(AuthError::WeakPassword(MIN_PASSWORD_CHARS));
        }
        if self.contains(name) {
            return Err(AuthError::NameTaken(name.into()));
        }
        Ok(hash_password(self.cost, password))
    }

    /// Stores a prepared credential. Fails if the name was taken meanwhile.
    pub fn insert(&self, credential: Credential) -> Result<(), AuthError> {
        let mut entries = self.lock();
        if entries.contains_key(&credential.name) {
            return Err(AuthError::NameTaken(credential.name));
        }
        if let Some(path) = &self.path {
            let mut line = serde_json::to_vec(&credential).expect("credential serializes");
            line.push(b'\n');
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .and_then(|mut f| f.write_all(&line).and_then(|_| f.sync_data()))
                .map_err(|e| AuthError::Store {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
        }
        entries.insert(credential.name.clone(), credential);
        Ok(())
    }

    /// The learner id for a correct name and password.
    pub fn authenticate(&self, name: &str, password: &str) -> Result<String, AuthError> {
        let credential = self.lock().get(name).cloned();
        match credential {
            Some(c) if verify_password(&c.hash, password) => Ok(c.learner_id),
            Some(_) => Err(AuthError::BadCredentials),
            None => {
                // spend comparable time so unknown names are not revealed
                let _ = verify_password(&hash_password(self.cost, "timing-equaliser"), password);
                Err(AuthError::BadCredentials)
            }
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<String, Credential>> {
        self.entries.lock().unwrap_or_else(|p| p.into_inner())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiSession {
    pub token: String,
    pub learner_id: String,
    pub created_at: u64,
    pub expires_at: u64,
}

/// Issued tokens, in memory. Times are Unix seconds.
#[derive(Debug)]
pub struct TokenStore {
    ttl: u64,
    sessions: Mutex<HashMap<String, ApiSession>>,
}

impl TokenStore {
    pub fn new(ttl: u64) -> Self {
        Self {
            ttl,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn issue(&self, learner_id: &str, now: u64) -> ApiSession {
        let mut bytes = [0u8; 16];
        OsRng.fill_bytes(&mut bytes);
        let session = ApiSession {
            token: hex::encode(bytes),
            learner_id: learner_id.into(),
            created_at: now,
            expires_at: now.saturating_add(self.ttl),
        };
        let mut sessions = self.sessions.lock().unwrap_or_else(|p| p.into_inner());
        sessions.retain(|_, s| s.expires_at > now);
        sessions.insert(session.token.clone(), session.clone());
        session
    }

    pub fn resolve(&self, token: &str, now: u64) -> Result<ApiSession, AuthError> {
        let mut sessions = self.sessions.lock().unwrap_or_else(|p| p.into_inner());
        match sessions.get(token) {
            Some(s) if s.expires_at > now => Ok(s.clone()),
            Some(_) => {
                sessions.remove(token);
                Err(AuthError::InvalidToken)
            }
            None => Err(AuthError::InvalidToken),
        }
    }
}

impl Default for TokenStore {
    fn default() -> Self {
        Self::new(DEFAULT_TOKEN_TTL)
    }
}
