// SPDX-License-Identifier: Apache-2.0

//! Scheme-agnostic embed/extract contracts, the four application modes and a
//! sender → channel → receiver scenario runner.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::de::{self, LocationMap};
use crate::baseline::expansion::{self, ExpansionStego};
use crate::baseline::image::pairs_from_samples;
use crate::baseline::BaselineError;
use crate::evr::{self, EvrConfig, EvrError, StegoCiphertext};
use crate::lwe::{LweCiphertext, LweError, LweSecretKey};
use crate::paillier::{PaillierCiphertext, PaillierError, PaillierPublicKey, PaillierSecretKey};
use crate::stats::{psnr, Fidelity};

/// Application modes, keyed by whether the embedder holds the encryption key
/// and whether the extractor holds the decryption key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiedMode {
    /// Both keys available.
    #[serde(rename = "AC")]
    Ac,
    /// Extraction controlled: only the extractor holds a key.
    #[serde(rename = "EXC")]
    Exc,
    /// Embedding controlled: only the embedder holds a key.
    #[serde(rename = "EMC")]
    Emc,
    /// Key free.
    #[serde(rename = "AF")]
    Af,
}

pub fn classify_mode(alice_has_enc_key: bool, bob_has_dec_key: bool) -> SiedMode {
    match (alice_has_enc_key, bob_has_dec_key) {
        (true, true) => SiedMode::Ac,
        (false, true) => SiedMode::Exc,
        (true, false) => SiedMode::Emc,
        (false, false) => SiedMode::Af,
    }
}

impl SiedMode {
    pub const ALL: [SiedMode; 4] = [SiedMode::Ac, SiedMode::Exc, SiedMode::Emc, SiedMode::Af];

    /// `(alice_has_enc_key, bob_has_dec_key)`.
    pub fn key_flags(self) -> (bool, bool) {
        match self {
            SiedMode::Ac => (true, true),
            SiedMode::Exc => (false, true),
            SiedMode::Emc => (true, false),
            SiedMode::Af => (false, false),
        }
    }
}

impl fmt::Display for SiedMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SiedMode::Ac => "AC",
            SiedMode::Exc => "EXC",
            SiedMode::Emc => "EMC",
            SiedMode::Af => "AF",
        })
    }
}

/// Attack levels, ordered by the warden's prior knowledge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SecurityLevel {
    None,
    Scoa,
    Kca,
    Cca,
    Acca,
}

impl SecurityLevel {
    /// The four attack levels, weakest first.
    pub const ATTACKS: [SecurityLevel; 4] = [
        SecurityLevel::Scoa,
        SecurityLevel::Kca,
        SecurityLevel::Cca,
        SecurityLevel::Acca,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SecurityLevel::None => "NONE",
            SecurityLevel::Scoa => "SCOA",
            SecurityLevel::Kca => "KCA",
            SecurityLevel::Cca => "CCA",
            SecurityLevel::Acca => "ACCA",
        }
    }
}

impl fmt::Display for SecurityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for SecurityLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "NONE" => Ok(SecurityLevel::None),
            "SCOA" => Ok(SecurityLevel::Scoa),
            "KCA" => Ok(SecurityLevel::Kca),
            "CCA" => Ok(SecurityLevel::Cca),
            "ACCA" => Ok(SecurityLevel::Acca),
            _ => Err(format!("unknown security level {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyRole {
    None,
    Encryption,
    Decryption,
    DataHiding,
}

impl fmt::Display for KeyRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KeyRole::None => "none",
            KeyRole::Encryption => "encryption",
            KeyRole::Decryption => "decryption",
            KeyRole::DataHiding => "data-hiding",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Evr,
    EvrKeyless,
    LweToy,
    ExpansionLsb,
    MarkedDe,
    /// Plain encryption without embedding; the null hypothesis.
    Plain,
}

impl SchemeName {
    pub const ALL: [SchemeName; 6] = [
        SchemeName::Evr,
        SchemeName::EvrKeyless,
        SchemeName::LweToy,
        SchemeName::ExpansionLsb,
        SchemeName::MarkedDe,
        SchemeName::Plain,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeName::Evr => "evr",
            SchemeName::EvrKeyless => "evr-keyless",
            SchemeName::LweToy => "lwe-toy",
            SchemeName::ExpansionLsb => "expansion-lsb",
            SchemeName::MarkedDe => "marked-de",
            SchemeName::Plain => "plain",
        }
    }
}

impl fmt::Display for SchemeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeName {
    type Err = FrameworkError;

    fn from_str(s: &str) -> Result<Self, FrameworkError> {
        SchemeName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| FrameworkError::UnknownScheme(s.to_string()))
    }
}

/// The cryptosystem a scheme's ciphertexts belong to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cryptosystem {
    Paillier,
    Lwe,
}

/// What the embedder starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverKind {
    /// The embedder encrypts plaintexts itself.
    Plaintexts,
    /// The embedder works on intercepted ciphertexts.
    Ciphertexts,
}

/// What the receiver's direct decryption is supposed to return.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecryptionContract {
    /// Exactly the original plaintexts.
    Lossless,
    /// The marked plaintexts; recovery needs the extractor.
    Marked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeDescriptor {
    pub name: SchemeName,
    pub mode: SiedMode,
    pub embed_key: KeyRole,
    pub extract_key: KeyRole,
    pub claimed_level: SecurityLevel,
    /// Whether embedding uses only standard encryption operations.
    pub standard_ops_only: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evr: Option<EvrConfig>,
}

impl SchemeDescriptor {
    pub fn new(name: SchemeName) -> Self {
        use KeyRole::*;
        let (embed_key, extract_key, claimed_level, standard_ops_only, evr) = match name {
            SchemeName::Evr => (Encryption, None, SecurityLevel::Cca, true, Some(EvrConfig::default())),
            SchemeName::EvrKeyless => (None, None, SecurityLevel::Cca, true, Some(EvrConfig::default())),
            SchemeName::LweToy => (DataHiding, Decryption, SecurityLevel::Kca, false, Option::None),
            SchemeName::ExpansionLsb => (Encryption, Decryption, SecurityLevel::None, true, Option::None),
            SchemeName::MarkedDe => (Encryption, Decryption, SecurityLevel::Scoa, false, Option::None),
            SchemeName::Plain => (Encryption, None, SecurityLevel::Acca, true, Option::None),
        };
        let mode = classify_mode(embed_key == Encryption, extract_key == Decryption);
        Self {
            name,
            mode,
            embed_key,
            extract_key,
            claimed_level,
            standard_ops_only,
            evr,
        }
    }

    pub fn lookup(name: &str) -> Result<Self, FrameworkError> {
        Ok(Self::new(name.parse()?))
    }

    /// Every registered scheme.
    pub fn registry() -> Vec<Self> {
        SchemeName::ALL.into_iter().map(Self::new).collect()
    }

    pub fn with_evr_config(mut self, cfg: EvrConfig) -> Self {
        if self.evr.is_some() {
            self.evr = Some(cfg);
        }
        self
    }

    /// The mode agrees with the key roles.
    pub fn is_consistent(&self) -> bool {
        self.mode
            == classify_mode(
                self.embed_key == KeyRole::Encryption,
                self.extract_key == KeyRole::Decryption,
            )
    }

    pub fn cryptosystem(&self) -> Cryptosystem {
        match self.name {
            SchemeName::LweToy => Cryptosystem::Lwe,
            _ => Cryptosystem::Paillier,
        }
    }

    pub fn cover_kind(&self) -> CoverKind {
        match self.name {
            SchemeName::EvrKeyless | SchemeName::ExpansionLsb => CoverKind::Ciphertexts,
            _ => CoverKind::Plaintexts,
        }
    }

    pub fn decryption_contract(&self) -> DecryptionContract {
        match self.name {
            SchemeName::MarkedDe => DecryptionContract::Marked,
            _ => DecryptionContract::Lossless,
        }
    }

    fn evr_config(&self) -> EvrConfig {
        self.evr.clone().unwrap_or_default()
    }

    /// Payload bits a cover of `records` items can carry at most.
    pub fn capacity(&self, records: usize) -> usize {
        match self.name {
            SchemeName::Evr | SchemeName::EvrKeyless => records * self.evr_config().bits_per_symbol(),
            SchemeName::LweToy => records,
            SchemeName::ExpansionLsb => usize::MAX,
            SchemeName::MarkedDe => records / 2,
            SchemeName::Plain => 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum FrameworkError {
    #[error("KeyRoleMismatch: scheme {scheme} needs a {expected} key for {stage}")]
    KeyRoleMismatch {
        scheme: SchemeName,
        expected: KeyRole,
        stage: &'static str,
    },
    #[error("unknown scheme {0:?}")]
    UnknownScheme(String),
    #[error("cover does not fit scheme {scheme}: {reason}")]
    CoverMismatch {
        scheme: SchemeName,
        reason: &'static str,
    },
    #[error("message needs {needed} bits of capacity, cover offers {available}")]
    CapacityExceeded { needed: usize, available: usize },
    #[error("stego bundle was produced by {found}, not {expected}")]
    BundleMismatch { expected: SchemeName, found: SchemeName },
    #[error("decrypted value does not fit in 64 bits")]
    PlaintextTooLarge,
    #[error(transparent)]
    Paillier(#[from] PaillierError),
    #[error(transparent)]
    Evr(#[from] EvrError),
    #[error(transparent)]
    Lwe(#[from] LweError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

/// Key material handed to the embedder.
#[derive(Clone, Debug)]
pub enum EmbedKey {
    None,
    PaillierPublic(PaillierPublicKey),
    LweSecret(LweSecretKey),
}

/// Key material handed to the extractor.
#[derive(Clone, Debug)]
pub enum ExtractKey {
    None,
    Paillier {
        pk: PaillierPublicKey,
        sk: PaillierSecretKey,
    },
    LweSecret(LweSecretKey),
    MarkedDe {
        pk: PaillierPublicKey,
        sk: PaillierSecretKey,
        location_map: LocationMap,
    },
}

#[derive(Clone, Debug)]
pub enum Cover {
    Plaintexts(Vec<u64>),
    Ciphertexts {
        public: PaillierPublicKey,
        ciphertexts: Vec<PaillierCiphertext>,
    },
}

impl Cover {
    pub fn len(&self) -> usize {
        match self {
            Cover::Plaintexts(p) => p.len(),
            Cover::Ciphertexts { ciphertexts, .. } => ciphertexts.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleHeader {
    pub scheme: SchemeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StegoRecords {
    Paillier(Vec<PaillierCiphertext>),
    Lwe(Vec<LweCiphertext>),
}

/// What travels on the channel: a header naming the scheme plus ciphertext
/// records.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StegoBundle {
    pub header: BundleHeader,
    pub records: StegoRecords,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub appendix: Vec<PaillierCiphertext>,
}

impl StegoBundle {
    fn paillier(scheme: SchemeName, records: Vec<PaillierCiphertext>) -> Self {
        Self {
            header: BundleHeader {
                scheme,
                positions: None,
            },
            records: StegoRecords::Paillier(records),
            appendix: Vec::new(),
        }
    }

    pub fn paillier_records(&self) -> &[PaillierCiphertext] {
        match &self.records {
            StegoRecords::Paillier(r) => r,
            StegoRecords::Lwe(_) => &[],
        }
    }

    pub fn lwe_records(&self) -> &[LweCiphertext] {
        match &self.records {
            StegoRecords::Lwe(r) => r,
            StegoRecords::Paillier(_) => &[],
        }
    }

    /// Every Paillier ciphertext in the bundle, appendix included.
    pub fn all_paillier(&self) -> impl Iterator<Item = &PaillierCiphertext> {
        self.paillier_records().iter().chain(&self.appendix)
    }

    pub fn record_count(&self) -> usize {
        match &self.records {
            StegoRecords::Paillier(r) => r.len() + self.appendix.len(),
            StegoRecords::Lwe(r) => r.len(),
        }
    }

    /// Canonical byte size: Paillier records at the fixed `N²` width, LWE
    /// records at `(n + 1)` residues.
    pub fn serialized_size(&self, pk: Option<&PaillierPublicKey>) -> usize {
        match &self.records {
            StegoRecords::Paillier(r) => {
                (r.len() + self.appendix.len()) * pk.map_or(0, |pk| pk.ciphertext_width())
            }
            StegoRecords::Lwe(r) => r
                .first()
                .map_or(0, |c| r.len() * (c.params.n + 1) * residue_width(c.params.q)),
        }
    }
}

fn residue_width(q: u32) -> usize {
    (32 - (q.max(2) - 1).leading_zeros()).div_ceil(8) as usize
}

/// A named process-variable sample set (`Θ` or `Θ'`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSet {
    pub name: String,
    pub samples: Vec<f64>,
}

impl TraceSet {
    pub fn new(name: impl Into<String>, samples: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            samples,
        }
    }
}

/// Everything the embedder did, recorded for the harness.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProcessTrace {
    /// Refreshes/redraws per output record, zero included.
    pub retries: Vec<u32>,
    /// Encryptions performed per output record.
    pub invocations: Vec<u32>,
    pub traces: Vec<TraceSet>,
}

impl ProcessTrace {
    pub fn trace(&self, name: &str) -> Option<&TraceSet> {
        self.traces.iter().find(|t| t.name == name)
    }
}

#[derive(Clone, Debug)]
pub struct EmbedOutput {
    pub stego: StegoBundle,
    pub trace: ProcessTrace,
    /// Side information the extractor needs besides its key, if any.
    pub location_map: Option<LocationMap>,
}

/// Map a big integer in `[0, modulus)` to `[0, 1)` using its top 64 bits.
pub fn unit_fraction(value: &BigUint, modulus: &BigUint) -> f64 {
    let scaled: BigUint = (value << 64u32) / modulus;
    scaled.to_u64().unwrap_or(u64::MAX) as f64 / 18_446_744_073_709_551_616.0
}

fn role_mismatch(d: &SchemeDescriptor, expected: KeyRole, stage: &'static str) -> FrameworkError {
    FrameworkError::KeyRoleMismatch {
        scheme: d.name,
        expected,
        stage,
    }
}

fn embed_public_key<'a>(d: &SchemeDescriptor, key: &'a EmbedKey) -> Result<&'a PaillierPublicKey, FrameworkError> {
    match key {
        EmbedKey::PaillierPublic(pk) => Ok(pk),
        _ => Err(role_mismatch(d, KeyRole::Encryption, "embedding")),
    }
}

fn cover_plaintexts<'a>(d: &SchemeDescriptor, cover: &'a Cover) -> Result<&'a [u64], FrameworkError> {
    match cover {
        Cover::Plaintexts(p) => Ok(p),
        Cover::Ciphertexts { .. } => Err(FrameworkError::CoverMismatch {
            scheme: d.name,
            reason: "needs plaintexts",
        }),
    }
}

fn cover_ciphertexts<'a>(
    d: &SchemeDescriptor,
    cover: &'a Cover,
) -> Result<(&'a PaillierPublicKey, &'a [PaillierCiphertext]), FrameworkError> {
    match cover {
        Cover::Ciphertexts { public, ciphertexts } => Ok((public, ciphertexts)),
        Cover::Plaintexts(_) => Err(FrameworkError::CoverMismatch {
            scheme: d.name,
            reason: "needs published ciphertexts",
        }),
    }
}

fn check_capacity(d: &SchemeDescriptor, cover_len: usize, bits: usize) -> Result<(), FrameworkError> {
    let available = d.capacity(cover_len);
    if bits > available {
        return Err(FrameworkError::CapacityExceeded {
            needed: bits,
            available,
        });
    }
    Ok(())
}

/// Split `message` into EVR symbols, padding the last one with random bits.
fn evr_symbols<R: RngCore + ?Sized>(cfg: &EvrConfig, message: &[bool], rng: &mut R) -> Vec<bool> {
    let k = cfg.bits_per_symbol();
    let mut bits = message.to_vec();
    while bits.len() % k != 0 {
        bits.push(rng.gen());
    }
    bits
}

/// `C' = Emb(K_emb, C, m)` for the scheme named by `d`.
pub fn scheme_embed<R: RngCore + ?Sized>(
    d: &SchemeDescriptor,
    key: &EmbedKey,
    cover: &Cover,
    message: &[bool],
    rng: &mut R,
) -> Result<EmbedOutput, FrameworkError> {
    check_capacity(d, cover.len(), message.len())?;
    match d.name {
        SchemeName::Evr => {
            let pk = embed_public_key(d, key)?;
            let plaintexts = cover_plaintexts(d, cover)?;
            let cfg = d.evr_config();
            let bits = evr_symbols(&cfg, message, rng);
            let symbols = bits.len() / cfg.bits_per_symbol();
            let ms: Vec<BigUint> = plaintexts.iter().map(|&m| BigUint::from(m)).collect();
            let mut embedded = evr::embed_message_detailed(pk, &ms[..symbols], &bits, &cfg, rng)?;
            for m in &ms[symbols..] {
                let (c, r) = pk.encrypt_with_rng(m, rng)?;
                embedded.push(evr::EvrEmbedding {
                    stego: StegoCiphertext(c),
                    refreshes: 0,
                    randomness: Some(r),
                });
            }
            let retries: Vec<u32> = embedded.iter().map(|e| e.refreshes).collect();
            let r_trace = embedded
                .iter()
                .filter_map(|e| e.randomness.as_ref())
                .map(|r| unit_fraction(r.value(), pk.n()))
                .collect();
            let mut stego = StegoBundle::paillier(d.name, embedded.into_iter().map(|e| e.stego.0).collect());
            stego.header.positions = Some(cfg.positions().to_vec());
            Ok(EmbedOutput {
                stego,
                trace: ProcessTrace {
                    invocations: retries.iter().map(|r| r + 1).collect(),
                    traces: vec![
                        TraceSet::new("evr.retries", retries.iter().map(|&r| r as f64).collect()),
                        TraceSet::new("paillier.r", r_trace),
                    ],
                    retries,
                },
                location_map: None,
            })
        }
        SchemeName::EvrKeyless => {
            if !matches!(key, EmbedKey::None) {
                return Err(role_mismatch(d, KeyRole::None, "embedding"));
            }
            let (pk, covers) = cover_ciphertexts(d, cover)?;
            let cfg = d.evr_config();
            let bits = evr_symbols(&cfg, message, rng);
            let symbols = bits.len() / cfg.bits_per_symbol();
            let (stegos, trace) = evr::embed_message_into(pk, &covers[..symbols], &bits, &cfg, rng)?;
            let mut records: Vec<PaillierCiphertext> = stegos.into_iter().map(|s| s.0).collect();
            records.extend_from_slice(&covers[symbols..]);
            let mut retries = trace.0;
            retries.resize(records.len(), 0);
            let mut stego = StegoBundle::paillier(d.name, records);
            stego.header.positions = Some(cfg.positions().to_vec());
            Ok(EmbedOutput {
                stego,
                trace: ProcessTrace {
                    invocations: retries.iter().map(|r| r + 1).collect(),
                    traces: vec![TraceSet::new(
                        "evr.retries",
                        retries.iter().map(|&r| r as f64).collect(),
                    )],
                    retries,
                },
                location_map: None,
            })
        }
        SchemeName::LweToy => {
            let sk = match key {
                EmbedKey::LweSecret(sk) => sk,
                _ => return Err(role_mismatch(d, KeyRole::DataHiding, "embedding")),
            };
            let plaintexts = cover_plaintexts(d, cover)?;
            let mut records = Vec::with_capacity(plaintexts.len());
            let mut draws = Vec::with_capacity(plaintexts.len());
            let mut noise = Vec::with_capacity(plaintexts.len());
            for (i, &m) in plaintexts.iter().enumerate() {
                let m = u8::try_from(m).map_err(|_| LweError::NotABit)?;
                match message.get(i) {
                    Some(&payload) => {
                        let e = sk.embed_bit(m, u8::from(payload), rng)?;
                        records.push(e.ciphertext);
                        draws.push(e.draws);
                        noise.push(e.noise.0 as f64);
                    }
                    None => {
                        let (ct, e) = sk.encrypt(m, rng)?;
                        records.push(ct);
                        draws.push(1);
                        noise.push(e.0 as f64);
                    }
                }
            }
            Ok(EmbedOutput {
                stego: StegoBundle {
                    header: BundleHeader {
                        scheme: d.name,
                        positions: None,
                    },
                    records: StegoRecords::Lwe(records),
                    appendix: Vec::new(),
                },
                trace: ProcessTrace {
                    retries: draws.iter().map(|d| d - 1).collect(),
                    invocations: draws,
                    traces: vec![TraceSet::new("lwe.noise", noise)],
                },
                location_map: None,
            })
        }
        SchemeName::ExpansionLsb => {
            let pk = embed_public_key(d, key)?;
            let (public, covers) = cover_ciphertexts(d, cover)?;
            if public != pk {
                return Err(FrameworkError::CoverMismatch {
                    scheme: d.name,
                    reason: "cover ciphertexts belong to a different key",
                });
            }
            let ExpansionStego { original, appendix } = expansion::expansion_embed(pk, covers, message, rng)?;
            let n = original.len() + appendix.len();
            let mut stego = StegoBundle::paillier(d.name, original);
            stego.appendix = appendix;
            Ok(EmbedOutput {
                stego,
                trace: ProcessTrace {
                    retries: vec![0; n],
                    invocations: vec![1; n],
                    traces: Vec::new(),
                },
                location_map: None,
            })
        }
        SchemeName::MarkedDe => {
            let pk = embed_public_key(d, key)?;
            let plaintexts = cover_plaintexts(d, cover)?;
            let samples = plaintexts
                .iter()
                .map(|&v| u8::try_from(v))
                .collect::<Result<Vec<u8>, _>>()
                .map_err(|_| FrameworkError::CoverMismatch {
                    scheme: d.name,
                    reason: "samples must be 8-bit",
                })?;
            let pairs = pairs_from_samples(&samples);
            let out = de::marked_de_embed(pk, &pairs, message, rng)?;
            let mut records = out.stego;
            if samples.len() % 2 == 1 {
                let last = BigUint::from(*samples.last().unwrap());
                records.push(pk.encrypt_with_rng(&last, rng)?.0);
            }
            let n = records.len();
            Ok(EmbedOutput {
                stego: StegoBundle::paillier(d.name, records),
                trace: ProcessTrace {
                    retries: vec![0; n],
                    invocations: vec![1; n],
                    traces: Vec::new(),
                },
                location_map: Some(out.location_map),
            })
        }
        SchemeName::Plain => {
            let pk = embed_public_key(d, key)?;
            let plaintexts = cover_plaintexts(d, cover)?;
            let mut records = Vec::with_capacity(plaintexts.len());
            let mut r_trace = Vec::with_capacity(plaintexts.len());
            for &m in plaintexts {
                let (c, r) = pk.encrypt_with_rng(&BigUint::from(m), rng)?;
                records.push(c);
                r_trace.push(unit_fraction(r.value(), pk.n()));
            }
            let n = records.len();
            Ok(EmbedOutput {
                stego: StegoBundle::paillier(d.name, records),
                trace: ProcessTrace {
                    retries: vec![0; n],
                    invocations: vec![1; n],
                    traces: vec![TraceSet::new("paillier.r", r_trace)],
                },
                location_map: None,
            })
        }
    }
}

/// `m = Ext(K_ext, C')`. Returns every bit the records carry; callers that
/// know the message length truncate.
pub fn scheme_extract(
    d: &SchemeDescriptor,
    key: &ExtractKey,
    stego: &StegoBundle,
) -> Result<Vec<bool>, FrameworkError> {
    if stego.header.scheme != d.name {
        return Err(FrameworkError::BundleMismatch {
            expected: d.name,
            found: stego.header.scheme,
        });
    }
    match d.name {
        SchemeName::Evr | SchemeName::EvrKeyless => {
            let cfg = match &stego.header.positions {
                Some(p) => EvrConfig::new(p.clone(), 1, Default::default())?,
                None => d.evr_config(),
            };
            let stegos: Vec<StegoCiphertext> = stego
                .paillier_records()
                .iter()
                .cloned()
                .map(StegoCiphertext)
                .collect();
            Ok(evr::extract_message(&stegos, &cfg))
        }
        SchemeName::LweToy => {
            let sk = match key {
                ExtractKey::LweSecret(sk) => sk,
                _ => return Err(role_mismatch(d, KeyRole::Decryption, "extraction")),
            };
            stego
                .lwe_records()
                .iter()
                .map(|ct| Ok(sk.extract_bit(ct)? == 1))
                .collect()
        }
        SchemeName::ExpansionLsb => {
            let (pk, sk) = match key {
                ExtractKey::Paillier { pk, sk } | ExtractKey::MarkedDe { pk, sk, .. } => (pk, sk),
                _ => return Err(role_mismatch(d, KeyRole::Decryption, "extraction")),
            };
            let es = ExpansionStego {
                original: stego.paillier_records().to_vec(),
                appendix: stego.appendix.clone(),
            };
            Ok(expansion::expansion_extract(sk, pk, &es)?)
        }
        SchemeName::MarkedDe => {
            let (pk, sk, map) = match key {
                ExtractKey::MarkedDe { pk, sk, location_map } => (pk, sk, location_map),
                _ => return Err(role_mismatch(d, KeyRole::Decryption, "extraction")),
            };
            let records = stego.paillier_records();
            let paired = &records[..records.len() - records.len() % 2];
            Ok(de::marked_de_extract(sk, pk, paired, map)?.0)
        }
        SchemeName::Plain => Ok(Vec::new()),
    }
}

/// Keys held by the legitimate receiver.
#[derive(Clone, Debug, Default)]
pub struct KeyRing {
    pub paillier: Option<(PaillierPublicKey, PaillierSecretKey)>,
    pub lwe: Option<LweSecretKey>,
}

/// Direct decryption of the bundle's main records, as the receiver does it.
pub fn receiver_decrypt(stego: &StegoBundle, keys: &KeyRing) -> Result<Vec<u64>, FrameworkError> {
    match &stego.records {
        StegoRecords::Paillier(records) => {
            let (pk, sk) = keys
                .paillier
                .as_ref()
                .ok_or(FrameworkError::KeyRoleMismatch {
                    scheme: stego.header.scheme,
                    expected: KeyRole::Decryption,
                    stage: "decryption",
                })?;
            records
                .iter()
                .map(|c| sk.decrypt(pk, c)?.to_u64().ok_or(FrameworkError::PlaintextTooLarge))
                .collect()
        }
        StegoRecords::Lwe(records) => {
            let sk = keys.lwe.as_ref().ok_or(FrameworkError::KeyRoleMismatch {
                scheme: stego.header.scheme,
                expected: KeyRole::Decryption,
                stage: "decryption",
            })?;
            records
                .iter()
                .map(|ct| Ok(u64::from(sk.decrypt(ct)?)))
                .collect()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Encrypt,
    Embed,
    Channel,
    Extract,
    Decrypt,
    Verify,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Encrypt => "encrypt",
            Stage::Embed => "embed",
            Stage::Channel => "channel",
            Stage::Extract => "extract",
            Stage::Decrypt => "decrypt",
            Stage::Verify => "verify",
        })
    }
}

#[derive(Debug, Error)]
#[error("scenario failed at stage {stage}: {source}")]
pub struct ScenarioError {
    pub stage: Stage,
    #[source]
    pub source: ScenarioFailure,
}

#[derive(Debug, Error)]
pub enum ScenarioFailure {
    #[error(transparent)]
    Framework(#[from] FrameworkError),
    #[error("{0}")]
    Contract(String),
}

/// One record observed on the open channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelTap {
    pub label: String,
    pub payload: serde_json::Value,
}

#[derive(Clone, Debug)]
pub struct ScenarioResult {
    pub descriptor: SchemeDescriptor,
    pub stego: StegoBundle,
    pub trace: ProcessTrace,
    pub bob_extracted: Vec<bool>,
    pub receiver_decryption: Vec<u64>,
    pub fidelity: Fidelity<f64>,
    /// Only what the warden can see on the channel.
    pub transcript: Vec<ChannelTap>,
    pub log: Vec<(Stage, String)>,
}

fn at<T, E: Into<ScenarioFailure>>(stage: Stage, r: Result<T, E>) -> Result<T, ScenarioError> {
    r.map_err(|e| ScenarioError {
        stage,
        source: e.into(),
    })
}

fn contract(stage: Stage, msg: String) -> ScenarioError {
    ScenarioError {
        stage,
        source: ScenarioFailure::Contract(msg),
    }
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("records serialize")
}

/// Encrypt → embed → channel → extract and decrypt, checking the receiver's
/// decryption against the scheme's contract.
pub fn run_scenario<R: RngCore + ?Sized>(
    d: &SchemeDescriptor,
    keys: &KeyRing,
    plaintexts: &[u64],
    message: &[bool],
    rng: &mut R,
) -> Result<ScenarioResult, ScenarioError> {
    let mut log = Vec::new();
    let mut transcript = Vec::new();
    let paillier = keys.paillier.as_ref();

    let cover = match d.cover_kind() {
        CoverKind::Plaintexts => {
            log.push((Stage::Encrypt, format!("Alice holds {} plaintexts and encrypts them herself", plaintexts.len())));
            Cover::Plaintexts(plaintexts.to_vec())
        }
        CoverKind::Ciphertexts => {
            let (pk, _) = at(
                Stage::Encrypt,
                paillier.ok_or(FrameworkError::KeyRoleMismatch {
                    scheme: d.name,
                    expected: KeyRole::Encryption,
                    stage: "cover encryption",
                }),
            )?;
            let ciphertexts = at(
                Stage::Encrypt,
                plaintexts
                    .iter()
                    .map(|&m| Ok(pk.encrypt_with_rng(&BigUint::from(m), rng)?.0))
                    .collect::<Result<Vec<_>, FrameworkError>>(),
            )?;
            transcript.push(ChannelTap {
                label: "cover".into(),
                payload: to_json(&ciphertexts),
            });
            log.push((Stage::Encrypt, format!("sender published {} ciphertexts; Alice intercepts them", ciphertexts.len())));
            Cover::Ciphertexts {
                public: pk.clone(),
                ciphertexts,
            }
        }
    };

    let embed_key = match d.embed_key {
        KeyRole::None => EmbedKey::None,
        KeyRole::Encryption => match paillier {
            Some((pk, _)) => EmbedKey::PaillierPublic(pk.clone()),
            None => EmbedKey::None,
        },
        KeyRole::DataHiding | KeyRole::Decryption => match &keys.lwe {
            Some(sk) => EmbedKey::LweSecret(sk.clone()),
            None => EmbedKey::None,
        },
    };
    let out = at(Stage::Embed, scheme_embed(d, &embed_key, &cover, message, rng))?;
    log.push((
        Stage::Embed,
        format!(
            "Alice embedded {} bits into {} records ({} refreshes)",
            message.len(),
            out.stego.record_count(),
            out.trace.retries.iter().map(|&r| r as u64).sum::<u64>()
        ),
    ));

    transcript.push(ChannelTap {
        label: "stego".into(),
        payload: to_json(&out.stego),
    });
    let on_wire = out.stego.clone();
    log.push((Stage::Channel, format!("{} records cross the open channel", on_wire.record_count())));

    let extract_key = match (d.extract_key, d.name) {
        (KeyRole::None, _) => ExtractKey::None,
        (_, SchemeName::LweToy) => keys.lwe.clone().map_or(ExtractKey::None, ExtractKey::LweSecret),
        (_, SchemeName::MarkedDe) => match (paillier, &out.location_map) {
            (Some((pk, sk)), Some(map)) => ExtractKey::MarkedDe {
                pk: pk.clone(),
                sk: sk.clone(),
                location_map: map.clone(),
            },
            _ => ExtractKey::None,
        },
        _ => paillier.map_or(ExtractKey::None, |(pk, sk)| ExtractKey::Paillier {
            pk: pk.clone(),
            sk: sk.clone(),
        }),
    };
    let mut bob_extracted = at(Stage::Extract, scheme_extract(d, &extract_key, &on_wire))?;
    bob_extracted.truncate(message.len());
    if bob_extracted != message {
        return Err(contract(Stage::Extract, "extracted bits differ from the message".into()));
    }
    log.push((Stage::Extract, format!("Bob extracted {} bits (key: {})", bob_extracted.len(), d.extract_key)));

    let receiver_decryption = at(Stage::Decrypt, receiver_decrypt(&on_wire, keys))?;
    let reference: Vec<f64> = plaintexts.iter().map(|&v| v as f64).collect();
    let decrypted: Vec<f64> = receiver_decryption.iter().map(|&v| v as f64).collect();
    let max_value = plaintexts.iter().copied().max().unwrap_or(0).max(255) as f64;
    let fidelity = if reference.is_empty() {
        Fidelity {
            psnr: crate::stats::Psnr::Infinite,
            mse: 0.0,
        }
    } else {
        at(
            Stage::Verify,
            psnr(&reference, &decrypted, max_value)
                .map_err(|e| ScenarioFailure::Contract(e.to_string())),
        )?
    };
    match d.decryption_contract() {
        DecryptionContract::Lossless => {
            if receiver_decryption != plaintexts {
                return Err(contract(Stage::Verify, "lossless scheme decrypted to something else".into()));
            }
            log.push((Stage::Decrypt, "receiver decryption equals the plaintexts (PSNR = inf)".into()));
        }
        DecryptionContract::Marked => {
            if receiver_decryption.len() != plaintexts.len() {
                return Err(contract(Stage::Verify, "marked decryption has the wrong length".into()));
            }
            log.push((
                Stage::Decrypt,
                format!("receiver decryption is the marked plaintext, PSNR = {:.2} dB", fidelity.psnr.db()),
            ));
        }
    }

    Ok(ScenarioResult {
        descriptor: d.clone(),
        stego: on_wire,
        trace: out.trace,
        bob_extracted,
        receiver_decryption,
        fidelity,
        transcript,
        log,
    })
}
