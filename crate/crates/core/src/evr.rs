// SPDX-License-Identifier: Apache-2.0

//! Encryption variable refreshing (EVR).
//!
//! The sender keeps drawing fresh Paillier randomness for a plaintext until
//! the ciphertext bits at the configured positions spell the message symbol.
//! The accepted ciphertext is an ordinary encryption of the same plaintext, so
//! decryption is untouched; the receiver reads the bits back without any key.

use num_bigint::BigUint;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::paillier::{PaillierCiphertext, PaillierError, PaillierPublicKey, Randomness};

pub const DEFAULT_MAX_RETRIES: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvrError {
    #[error("invalid EVR configuration: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} message bits, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("symbol {index}: no match after {draws} draws")]
    RetryLimitExceeded { index: usize, draws: u32 },
    #[error(transparent)]
    Paillier(#[from] PaillierError),
}

pub type Result<T> = std::result::Result<T, EvrError>;

/// How a mismatching candidate is replaced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefreshMode {
    /// Encrypt the plaintext again with fresh `r`. Needs the plaintext.
    ReEncrypt,
    /// Multiply the cover by `s^N` for fresh `s`. Needs only `N`.
    #[default]
    Rerandomize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvrConfig {
    positions: Vec<u64>,
    max_retries: u32,
    #[serde(default)]
    refresh: RefreshMode,
}

impl Default for EvrConfig {
    fn default() -> Self {
        Self {
            positions: vec![0],
            max_retries: DEFAULT_MAX_RETRIES,
            refresh: RefreshMode::default(),
        }
    }
}

impl EvrConfig {
    pub fn new(positions: Vec<u64>, max_retries: u32, refresh: RefreshMode) -> Result<Self> {
        if positions.is_empty() {
            return Err(EvrError::InvalidConfig("positions must not be empty".into()));
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvrError::InvalidConfig(
                "positions must be strictly increasing".into(),
            ));
        }
        if max_retries == 0 {
            return Err(EvrError::InvalidConfig("max_retries must be at least 1".into()));
        }
        Ok(Self {
            positions,
            max_retries,
            refresh,
        })
    }

    /// Single least-significant-bit sampling.
    pub fn lsb(refresh: RefreshMode) -> Self {
        Self {
            refresh,
            ..Self::default()
        }
    }

    pub fn positions(&self) -> &[u64] {
        &self.positions
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.positions.len()
    }

    pub fn max_retries(&self) -> u32 {
        self.max_retries
    }

    pub fn refresh(&self) -> RefreshMode {
        self.refresh
    }

    pub fn with_refresh(mut self, refresh: RefreshMode) -> Self {
        self.refresh = refresh;
        self
    }

    /// Positions must fall inside the bit length of `N²`.
    pub fn check_key(&self, pk: &PaillierPublicKey) -> Result<()> {
        let limit = pk.ciphertext_bits();
        match self.positions.last() {
            Some(&top) if top >= limit => Err(EvrError::InvalidConfig(format!(
                "position {top} is outside the {limit}-bit ciphertext"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StegoCiphertext(pub PaillierCiphertext);

impl StegoCiphertext {
    pub fn ciphertext(&self) -> &PaillierCiphertext {
        &self.0
    }
}

/// Refresh count per embedded symbol, in input order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RetryTrace(pub Vec<u32>);

impl RetryTrace {
    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().map(|&c| c as f64).sum::<f64>() / self.0.len() as f64
    }
}

/// Result of embedding one symbol.
#[derive(Clone, Debug)]
pub struct EvrEmbedding {
    pub stego: StegoCiphertext,
    /// Re-encryptions performed after the initial draw.
    pub refreshes: u32,
    /// The randomness inside the accepted ciphertext, when the embedder knows
    /// it (always, except on the keyless path).
    pub randomness: Option<Randomness>,
}

fn symbol_matches(c: &PaillierCiphertext, positions: &[u64], bits: &[bool]) -> bool {
    positions.iter().zip(bits).all(|(&pos, &b)| c.bit(pos) == b)
}

fn check_symbol(cfg: &EvrConfig, bits: &[bool]) -> Result<()> {
    if bits.len() != cfg.bits_per_symbol() {
        return Err(EvrError::LengthMismatch {
            expected: cfg.bits_per_symbol(),
            found: bits.len(),
        });
    }
    Ok(())
}

/// Embed one symbol into a fresh encryption of `m`. Bit `j` of `bits` lands at
/// `cfg.positions()[j]`.
pub fn embed_symbol<R: RngCore + ?Sized>(
    pk: &PaillierPublicKey,
    m: &BigUint,
    bits: &[bool],
    cfg: &EvrConfig,
    rng: &mut R,
) -> Result<EvrEmbedding> {
    check_symbol(cfg, bits)?;
    cfg.check_key(pk)?;
    let (cover, r0) = pk.encrypt_with_rng(m, rng)?;
    if symbol_matches(&cover, cfg.positions(), bits) {
        return Ok(EvrEmbedding {
            stego: StegoCiphertext(cover),
            refreshes: 0,
            randomness: Some(r0),
        });
    }
    for refreshes in 1..cfg.max_retries() {
        let (candidate, r) = match cfg.refresh() {
            RefreshMode::ReEncrypt => pk.encrypt_with_rng(m, rng)?,
            RefreshMode::Rerandomize => {
                let s = pk.sample_randomness(rng);
                let c = pk.rerandomize(&cover, &s)?;
                let r = pk.randomness((r0.value() * s.value()) % pk.n())?;
                (c, r)
            }
        };
        if symbol_matches(&candidate, cfg.positions(), bits) {
            return Ok(EvrEmbedding {
                stego: StegoCiphertext(candidate),
                refreshes,
                randomness: Some(r),
            });
        }
    }
    Err(EvrError::RetryLimitExceeded {
        index: 0,
        draws: cfg.max_retries(),
    })
}

/// Single-bit embedding: `LSB(c') = b` for the default configuration.
pub fn embed_bit<R: RngCore + ?Sized>(
    pk: &PaillierPublicKey,
    m: &BigUint,
    b: bool,
    cfg: &EvrConfig,
    rng: &mut R,
) -> Result<(StegoCiphertext, u32)> {
    let e = embed_symbol(pk, m, &[b], cfg, rng)?;
    Ok((e.stego, e.refreshes))
}

/// Embed into an existing ciphertext without knowing its plaintext. The cover
/// itself is the first draw; refreshes are re-randomizations of it.
pub fn embed_into_ciphertext<R: RngCore + ?Sized>(
    pk: &PaillierPublicKey,
    cover: &PaillierCiphertext,
    bits: &[bool],
    cfg: &EvrConfig,
    rng: &mut R,
) -> Result<EvrEmbedding> {
    check_symbol(cfg, bits)?;
    cfg.check_key(pk)?;
    pk.check_ciphertext(cover)?;
    if symbol_matches(cover, cfg.positions(), bits) {
        return Ok(EvrEmbedding {
            stego: StegoCiphertext(cover.clone()),
            refreshes: 0,
            randomness: None,
        });
    }
    for refreshes in 1..cfg.max_retries() {
        let s = pk.sample_randomness(rng);
        let candidate = pk.rerandomize(cover, &s)?;
        if symbol_matches(&candidate, cfg.positions(), bits) {
            return Ok(EvrEmbedding {
                stego: StegoCiphertext(candidate),
                refreshes,
                randomness: None,
            });
        }
    }
    Err(EvrError::RetryLimitExceeded {
        index: 0,
        draws: cfg.max_retries(),
    })
}

fn check_message_len(cfg: &EvrConfig, symbols: usize, bits: &[bool]) -> Result<()> {
    let expected = symbols * cfg.bits_per_symbol();
    if bits.len() != expected {
        return Err(EvrError::LengthMismatch {
            expected,
            found: bits.len(),
        });
    }
    Ok(())
}

fn tag_index(e: EvrError, index: usize) -> EvrError {
    match e {
        EvrError::RetryLimitExceeded { draws, .. } => EvrError::RetryLimitExceeded { index, draws },
        other => other,
    }
}

/// Embed `bits` across fresh encryptions of `plaintexts`, one symbol of
/// `cfg.bits_per_symbol()` bits per plaintext, in input order.
pub fn embed_message<R: RngCore + ?Sized>(
    pk: &PaillierPublicKey,
    plaintexts: &[BigUint],
    bits: &[bool],
    cfg: &EvrConfig,
    rng: &mut R,
) -> Result<(Vec<StegoCiphertext>, RetryTrace)> {
    let embeddings = embed_message_detailed(pk, plaintexts, bits, cfg, rng)?;
    Ok(split_embeddings(embeddings))
}

pub fn embed_message_detailed<R: RngCore + ?Sized>(
    pk: &PaillierPublicKey,
    plaintexts: &[BigUint],
    bits: &[bool],
    cfg: &EvrConfig,
    rng: &mut R,
) -> Result<Vec<EvrEmbedding>> {
    check_message_len(cfg, plaintexts.len(), bits)?;
    cfg.check_key(pk)?;
    let k = cfg.bits_per_symbol();
    plaintexts
        .iter()
        .zip(bits.chunks(k))
        .enumerate()
        .map(|(i, (m, symbol))| embed_symbol(pk, m, symbol, cfg, rng).map_err(|e| tag_index(e, i)))
        .collect()
}

/// Keyless variant of [`embed_message`] working on published ciphertexts.
pub fn embed_message_into<R: RngCore + ?Sized>(
    pk: &PaillierPublicKey,
    covers: &[PaillierCiphertext],
    bits: &[bool],
    cfg: &EvrConfig,
    rng: &mut R,
) -> Result<(Vec<StegoCiphertext>, RetryTrace)> {
    check_message_len(cfg, covers.len(), bits)?;
    cfg.check_key(pk)?;
    let k = cfg.bits_per_symbol();
    let embeddings = covers
        .iter()
        .zip(bits.chunks(k))
        .enumerate()
        .map(|(i, (c, symbol))| {
            embed_into_ciphertext(pk, c, symbol, cfg, rng).map_err(|e| tag_index(e, i))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(split_embeddings(embeddings))
}

fn split_embeddings(embeddings: Vec<EvrEmbedding>) -> (Vec<StegoCiphertext>, RetryTrace) {
    let trace = RetryTrace(embeddings.iter().map(|e| e.refreshes).collect());
    let stegos = embeddings.into_iter().map(|e| e.stego).collect();
    (stegos, trace)
}

pub fn extract_symbol(c: &PaillierCiphertext, cfg: &EvrConfig) -> Vec<bool> {
    cfg.positions().iter().map(|&pos| c.bit(pos)).collect()
}

/// Read the configured bit positions of every ciphertext, in order. No key.
pub fn extract_message(stegos: &[StegoCiphertext], cfg: &EvrConfig) -> Vec<bool> {
    stegos
        .iter()
        .flat_map(|s| extract_symbol(&s.0, cfg))
        .collect()
}
