// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, RngCore};

use super::{HarnessConfig, HarnessError};
use crate::baseline::image::{default_corpus, GrayImage};
use crate::framework::{
    receiver_decrypt, scheme_embed, unit_fraction, BundleHeader, Cover, CoverKind, Cryptosystem,
    EmbedKey, EmbedOutput, KeyRing, KeyRole, SchemeDescriptor, SchemeName, StegoBundle, StegoRecords,
};
use crate::lwe::{self, LweSecretKey};
use crate::paillier::{keygen, DecryptionCost, PaillierCiphertext, PaillierPublicKey, PaillierSecretKey};
use crate::stats::{Histogram, Psnr, StatsError};

/// What a ciphertext-only warden collects.
#[derive(Clone, Debug)]
pub struct ScoaObservation {
    pub cover_bytes: usize,
    pub stego_bytes: usize,
    /// Samples drawn from the stego population, each in `[0, domain)`.
    pub population: Vec<u64>,
    pub domain: u64,
    pub cover_decrypt_ops: u64,
    pub stego_decrypt_ops: u64,
}

/// Known covers next to what the stego decrypts to.
#[derive(Clone, Debug)]
pub struct KcaObservation {
    pub reference: Vec<u64>,
    pub decrypted: Vec<u64>,
    pub max_value: f64,
    pub per_image_psnr: Vec<Psnr<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TraceBinning {
    /// Values in `[0, 1)`.
    Unit,
    /// Integer values.
    Integer,
}

/// `Θ` (plain operation) against `Θ'` (stego operation) for one process
/// variable.
#[derive(Clone, Debug)]
pub struct TracePair {
    pub name: String,
    pub plain: Vec<f64>,
    pub stego: Vec<f64>,
    pub binning: TraceBinning,
}

impl TracePair {
    pub fn histograms(&self, cfg: &HarnessConfig) -> Result<(Histogram<f64>, Histogram<f64>), StatsError> {
        let base = match self.binning {
            TraceBinning::Unit => Histogram::uniform(0.0, 1.0, cfg.kl_bins)?,
            TraceBinning::Integer => Histogram::integer(-cfg.noise_range, cfg.noise_range)?,
        };
        Ok((base.clone().with_samples(&self.plain), base.with_samples(&self.stego)))
    }
}

#[derive(Clone, Debug)]
pub struct AccaObservation {
    pub plain_invocations: Vec<u32>,
    pub stego_invocations: Vec<u32>,
    pub standard_ops_only: bool,
}

/// Anything the evaluators can interrogate.
pub trait Suspect {
    fn descriptor(&self) -> &SchemeDescriptor;
    fn observe_scoa(&self, cfg: &HarnessConfig, rng: &mut dyn RngCore) -> Result<ScoaObservation, HarnessError>;
    fn observe_kca(&self, cfg: &HarnessConfig, rng: &mut dyn RngCore) -> Result<KcaObservation, HarnessError>;
    fn observe_cca(&self, cfg: &HarnessConfig, rng: &mut dyn RngCore) -> Result<Vec<TracePair>, HarnessError>;
    fn observe_acca(&self, cfg: &HarnessConfig, rng: &mut dyn RngCore) -> Result<AccaObservation, HarnessError>;
}

/// Keys and covers shared by every evaluator in one grading run.
#[derive(Clone, Debug)]
pub struct HarnessFixture {
    pub pk: PaillierPublicKey,
    pub sk: PaillierSecretKey,
    pub lwe: LweSecretKey,
    pub corpus: Vec<GrayImage>,
}

impl HarnessFixture {
    pub fn generate<R: RngCore + ?Sized>(cfg: &HarnessConfig, rng: &mut R) -> Result<Self, HarnessError> {
        let (pk, sk) = keygen(cfg.prime_bits, rng)?;
        let lwe = lwe::keygen(cfg.lwe, rng)?;
        Ok(Self {
            pk,
            sk,
            lwe,
            corpus: default_corpus(),
        })
    }

    pub fn keyring(&self) -> KeyRing {
        KeyRing {
            paillier: Some((self.pk.clone(), self.sk.clone())),
            lwe: Some(self.lwe.clone()),
        }
    }

    /// `count` corpus samples starting at a random offset, wrapping around.
    fn corpus_samples(&self, count: usize, rng: &mut dyn RngCore) -> Vec<u64> {
        let flat: Vec<u8> = self.corpus.iter().flat_map(|img| img.samples.iter().copied()).collect();
        let start = rng.gen_range(0..flat.len() / 2) * 2;
        flat.iter().cycle().skip(start).take(count).map(|&v| u64::from(v)).collect()
    }
}

/// A registered scheme driven through the framework's embed dispatch.
pub struct RegisteredScheme<'a> {
    descriptor: SchemeDescriptor,
    fixture: &'a HarnessFixture,
}

impl<'a> RegisteredScheme<'a> {
    pub fn new(descriptor: SchemeDescriptor, fixture: &'a HarnessFixture) -> Self {
        Self { descriptor, fixture }
    }

    fn covers(&self, count: usize, rng: &mut dyn RngCore) -> Vec<u64> {
        match self.descriptor.cryptosystem() {
            Cryptosystem::Paillier => self.fixture.corpus_samples(count, rng),
            Cryptosystem::Lwe => (0..count).map(|_| u64::from(rng.gen::<bool>())).collect(),
        }
    }

    fn payload_len(&self, cover_len: usize, cfg: &HarnessConfig) -> usize {
        let d = &self.descriptor;
        match d.name {
            SchemeName::MarkedDe | SchemeName::ExpansionLsb => {
                ((cfg.payload_rate * cover_len as f64).ceil() as usize).clamp(1, d.capacity(cover_len))
            }
            _ => d.capacity(cover_len),
        }
    }

    /// Plain encryptions of `plaintexts`, as the owner would publish them.
    fn encrypt_plain(&self, plaintexts: &[u64], rng: &mut dyn RngCore) -> Result<StegoBundle, HarnessError> {
        let plain = SchemeDescriptor::new(SchemeName::Plain);
        let key = EmbedKey::PaillierPublic(self.fixture.pk.clone());
        Ok(match self.descriptor.cryptosystem() {
            Cryptosystem::Paillier => scheme_embed(&plain, &key, &Cover::Plaintexts(plaintexts.to_vec()), &[], rng)?.stego,
            Cryptosystem::Lwe => {
                let records = plaintexts
                    .iter()
                    .map(|&m| Ok(self.fixture.lwe.encrypt(m as u8, rng)?.0))
                    .collect::<Result<Vec<_>, HarnessError>>()?;
                StegoBundle {
                    header: BundleHeader {
                        scheme: SchemeName::Plain,
                        positions: None,
                    },
                    records: StegoRecords::Lwe(records),
                    appendix: Vec::new(),
                }
            }
        })
    }

    /// Embed `message` into `plaintexts`, starting from `published` when the
    /// scheme works on intercepted ciphertexts.
    fn embed(
        &self,
        plaintexts: &[u64],
        published: Option<&StegoBundle>,
        message: &[bool],
        rng: &mut dyn RngCore,
    ) -> Result<EmbedOutput, HarnessError> {
        let d = &self.descriptor;
        let cover = match d.cover_kind() {
            CoverKind::Plaintexts => Cover::Plaintexts(plaintexts.to_vec()),
            CoverKind::Ciphertexts => {
                let owned;
                let bundle = match published {
                    Some(b) => b,
                    None => {
                        owned = self.encrypt_plain(plaintexts, rng)?;
                        &owned
                    }
                };
                Cover::Ciphertexts {
                    public: self.fixture.pk.clone(),
                    ciphertexts: bundle.paillier_records().to_vec(),
                }
            }
        };
        let key = match d.embed_key {
            KeyRole::None => EmbedKey::None,
            KeyRole::Encryption => EmbedKey::PaillierPublic(self.fixture.pk.clone()),
            _ => EmbedKey::LweSecret(self.fixture.lwe.clone()),
        };
        Ok(scheme_embed(d, &key, &cover, message, rng)?)
    }

    fn decrypt_ops(&self, bundle: &StegoBundle) -> Result<u64, HarnessError> {
        let fx = self.fixture;
        let mut cost = DecryptionCost::default();
        for c in bundle.all_paillier() {
            fx.sk.decrypt_counted(&fx.pk, c, &mut cost)?;
        }
        let mut ops = cost.total();
        for ct in bundle.lwe_records() {
            fx.lwe.decrypt(ct)?;
            ops += fx.lwe.decryption_ops();
        }
        Ok(ops)
    }

    fn paillier_traces(&self, cts: &[PaillierCiphertext]) -> Result<(Vec<f64>, Vec<f64>), HarnessError> {
        let fx = self.fixture;
        let mut r = Vec::with_capacity(cts.len());
        let mut c = Vec::with_capacity(cts.len());
        for ct in cts {
            r.push(unit_fraction(fx.sk.recover_randomness(&fx.pk, ct)?.value(), fx.pk.n()));
            c.push(unit_fraction(ct.value(), fx.pk.n_squared()));
        }
        Ok((r, c))
    }
}

fn random_bits(n: usize, rng: &mut dyn RngCore) -> Vec<bool> {
    (0..n).map(|_| rng.gen()).collect()
}

impl Suspect for RegisteredScheme<'_> {
    fn descriptor(&self) -> &SchemeDescriptor {
        &self.descriptor
    }

    fn observe_scoa(&self, cfg: &HarnessConfig, rng: &mut dyn RngCore) -> Result<ScoaObservation, HarnessError> {
        let fx = self.fixture;
        let half = fx.pk.ciphertext_width() / 2;
        let count = match self.descriptor.cryptosystem() {
            Cryptosystem::Paillier => cfg.trials.div_ceil(half.max(1)),
            Cryptosystem::Lwe => cfg.trials,
        };
        let plaintexts = self.covers(count, rng);
        let message = random_bits(self.payload_len(count, cfg), rng);
        let cover = self.encrypt_plain(&plaintexts, rng)?;
        let out = self.embed(&plaintexts, Some(&cover), &message, rng)?;
        let stego = out.stego;

        let (population, domain) = match self.descriptor.cryptosystem() {
            Cryptosystem::Paillier => {
                let bytes: Vec<u64> = stego
                    .all_paillier()
                    .flat_map(|c| {
                        let b = fx.pk.canonical_bytes(c);
                        b[b.len() - half..].iter().map(|&v| u64::from(v)).collect::<Vec<_>>()
                    })
                    .take(cfg.trials)
                    .collect();
                (bytes, 256)
            }
            Cryptosystem::Lwe => (
                stego.lwe_records().iter().map(|ct| u64::from(ct.b)).collect(),
                u64::from(cfg.lwe.q),
            ),
        };
        Ok(ScoaObservation {
            cover_bytes: cover.serialized_size(Some(&fx.pk)),
            stego_bytes: stego.serialized_size(Some(&fx.pk)),
            population,
            domain,
            cover_decrypt_ops: self.decrypt_ops(&cover)?,
            stego_decrypt_ops: self.decrypt_ops(&stego)?,
        })
    }

    fn observe_kca(&self, cfg: &HarnessConfig, rng: &mut dyn RngCore) -> Result<KcaObservation, HarnessError> {
        let keys = self.fixture.keyring();
        let lwe = self.descriptor.cryptosystem() == Cryptosystem::Lwe;
        let mut obs = KcaObservation {
            reference: Vec::new(),
            decrypted: Vec::new(),
            max_value: if lwe { 1.0 } else { 255.0 },
            per_image_psnr: Vec::new(),
        };
        for img in self.fixture.corpus.iter().take(cfg.kca_images.max(1)) {
            let plaintexts: Vec<u64> = img
                .samples
                .iter()
                .map(|&v| if lwe { u64::from(v & 1) } else { u64::from(v) })
                .collect();
            let message = random_bits(self.payload_len(plaintexts.len(), cfg), rng);
            let out = self.embed(&plaintexts, None, &message, rng)?;
            let decrypted = receiver_decrypt(&out.stego, &keys)?;
            let a: Vec<f64> = plaintexts.iter().map(|&v| v as f64).collect();
            let b: Vec<f64> = decrypted.iter().map(|&v| v as f64).collect();
            obs.per_image_psnr.push(crate::stats::psnr(&a, &b, obs.max_value)?.psnr);
            obs.reference.extend(plaintexts);
            obs.decrypted.extend(decrypted);
        }
        Ok(obs)
    }

    fn observe_cca(&self, cfg: &HarnessConfig, rng: &mut dyn RngCore) -> Result<Vec<TracePair>, HarnessError> {
        let n = cfg.trials;
        let plaintexts = self.covers(n, rng);
        // Eve drives the embedder with a chosen constant payload.
        let message = vec![false; self.payload_len(n, cfg)];
        let plain = self.encrypt_plain(&plaintexts, rng)?;
        let out = self.embed(&plaintexts, None, &message, rng)?;
        match self.descriptor.cryptosystem() {
            Cryptosystem::Paillier => {
                let (plain_r, plain_c) = self.paillier_traces(plain.paillier_records())?;
                let (stego_r, stego_c) = self.paillier_traces(out.stego.paillier_records())?;
                Ok(vec![
                    TracePair {
                        name: "paillier.r".into(),
                        plain: plain_r,
                        stego: stego_r,
                        binning: TraceBinning::Unit,
                    },
                    TracePair {
                        name: "paillier.c".into(),
                        plain: plain_c,
                        stego: stego_c,
                        binning: TraceBinning::Unit,
                    },
                ])
            }
            Cryptosystem::Lwe => {
                let noise = |b: &StegoBundle| -> Result<Vec<f64>, HarnessError> {
                    b.lwe_records()
                        .iter()
                        .map(|ct| Ok(self.fixture.lwe.recover_noise(ct)?.0 as f64))
                        .collect()
                };
                Ok(vec![TracePair {
                    name: "lwe.noise".into(),
                    plain: noise(&plain)?,
                    stego: noise(&out.stego)?,
                    binning: TraceBinning::Integer,
                }])
            }
        }
    }

    fn observe_acca(&self, cfg: &HarnessConfig, rng: &mut dyn RngCore) -> Result<AccaObservation, HarnessError> {
        let n = cfg.trials;
        let plaintexts = self.covers(n, rng);
        let message = random_bits(self.payload_len(n, cfg), rng);
        let plain = if self.descriptor.cryptosystem() == Cryptosystem::Paillier {
            let d = SchemeDescriptor::new(SchemeName::Plain);
            let key = EmbedKey::PaillierPublic(self.fixture.pk.clone());
            scheme_embed(&d, &key, &Cover::Plaintexts(plaintexts.clone()), &[], rng)?.trace.invocations
        } else {
            for &m in &plaintexts {
                self.fixture.lwe.encrypt(m as u8, rng)?;
            }
            vec![1; plaintexts.len()]
        };
        let out = self.embed(&plaintexts, None, &message, rng)?;
        Ok(AccaObservation {
            plain_invocations: plain,
            stego_invocations: out.trace.invocations,
            standard_ops_only: self.descriptor.standard_ops_only,
        })
    }
}
