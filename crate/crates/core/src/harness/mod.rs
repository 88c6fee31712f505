// SPDX-License-Identifier: Apache-2.0

//! Four graded evaluators (SCOA, KCA, CCA, ACCA) and the grading ladder.

mod subject;

use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::framework::{FrameworkError, SchemeDescriptor, SchemeName, SecurityLevel, SiedMode};
use crate::lwe::{LweError, LweParams};
use crate::paillier::PaillierError;
use crate::stats::{self, Histogram, StatsError};

pub use crate::framework::TraceSet;
pub use subject::{
    AccaObservation, HarnessFixture, KcaObservation, RegisteredScheme, ScoaObservation, Suspect,
    TraceBinning, TracePair,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub seed: u64,
    /// Samples per statistical test.
    pub trials: usize,
    pub alpha: f64,
    /// KL budget in nats.
    pub epsilon: f64,
    pub prime_bits: u64,
    /// Corpus images used by the known-cover attack.
    pub kca_images: usize,
    /// Payload bits per cover sample for schemes with tunable rate.
    pub payload_rate: f64,
    pub uniformity_bins: usize,
    /// Bins for traces living in `[0, 1)`.
    pub kl_bins: usize,
    /// Integer traces are binned over `[-noise_range, noise_range]`.
    pub noise_range: i64,
    pub peak_prominence: f64,
    pub lwe: LweParams,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            trials: 10_000,
            alpha: 0.01,
            epsilon: 0.01,
            prime_bits: 128,
            kca_images: 4,
            payload_rate: 0.01,
            uniformity_bins: 256,
            kl_bins: 32,
            noise_range: 16,
            peak_prominence: 0.005,
            lwe: LweParams::default(),
        }
    }
}

impl HarnessConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("MissingTrace: scheme {scheme} exposes no {what} for {level}")]
    MissingTrace {
        scheme: SchemeName,
        level: SecurityLevel,
        what: &'static str,
    },
    #[error(transparent)]
    Framework(#[from] FrameworkError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Paillier(#[from] PaillierError),
    #[error(transparent)]
    Lwe(#[from] LweError),
}

/// A real number that serializes infinities as `"inf"` / `"-inf"`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Measure(pub f64);

impl Serialize for Measure {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_nan() {
            s.serialize_str("nan")
        } else if v == f64::INFINITY {
            s.serialize_str("inf")
        } else if v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(v)
        }
    }
}

impl<'de> Deserialize<'de> for Measure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Measure(v)),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(Measure(f64::INFINITY)),
                "-inf" => Ok(Measure(f64::NEG_INFINITY)),
                "nan" => Ok(Measure(f64::NAN)),
                _ => Err(serde::de::Error::custom(format!("bad measure {t:?}"))),
            },
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str(if self.0 > 0.0 { "inf" } else { "-inf" })
        } else {
            write!(f, "{:.6}", self.0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
}

impl Comparison {
    fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparison::Eq => value == threshold,
            Comparison::Le => value <= threshold,
            Comparison::Gt => value > threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub check: String,
    pub value: Measure,
    pub comparison: Comparison,
    pub threshold: Measure,
    pub passed: bool,
}

impl Evidence {
    pub fn new(check: impl Into<String>, value: f64, comparison: Comparison, threshold: f64) -> Self {
        Self {
            check: check.into(),
            value: Measure(value),
            comparison,
            threshold: Measure(threshold),
            passed: comparison.holds(value, threshold),
        }
    }
}

/// Informational numbers that do not decide the verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub value: Measure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackVerdict {
    pub level: SecurityLevel,
    pub passed: bool,
    pub evidence: Vec<Evidence>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub measurements: Vec<Measurement>,
}

impl AttackVerdict {
    pub fn new(level: SecurityLevel, evidence: Vec<Evidence>, measurements: Vec<(String, f64)>) -> Self {
        Self {
            level,
            passed: evidence.iter().all(|e| e.passed),
            evidence,
            measurements: measurements
                .into_iter()
                .map(|(name, v)| Measurement {
                    name,
                    value: Measure(v),
                })
                .collect(),
        }
    }

    pub fn evidence(&self, check: &str) -> Option<&Evidence> {
        self.evidence.iter().find(|e| e.check == check)
    }

    pub fn measurement(&self, name: &str) -> Option<f64> {
        self.measurements.iter().find(|m| m.name == name).map(|m| m.value.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityGrade {
    pub scheme: SchemeName,
    pub mode: SiedMode,
    pub claimed_level: SecurityLevel,
    pub seed: u64,
    pub config: HarnessConfig,
    pub resisted: SecurityLevel,
    pub verdicts: Vec<AttackVerdict>,
    pub notes: Vec<String>,
}

impl SecurityGrade {
    pub fn verdict(&self, level: SecurityLevel) -> Option<&AttackVerdict> {
        self.verdicts.iter().find(|v| v.level == level)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grade serializes")
    }
}

/// Highest level `L` such that every verdict at or below `L` passed.
pub fn resisted_level(verdicts: &[AttackVerdict]) -> SecurityLevel {
    let mut resisted = SecurityLevel::None;
    for level in SecurityLevel::ATTACKS {
        match verdicts.iter().find(|v| v.level == level) {
            Some(v) if v.passed => resisted = level,
            _ => break,
        }
    }
    resisted
}

pub fn scoa_evaluate(
    subject: &dyn Suspect,
    cfg: &HarnessConfig,
    rng: &mut dyn RngCore,
) -> Result<AttackVerdict, HarnessError> {
    let obs = subject.observe_scoa(cfg, rng)?;
    let size_ratio = obs.stego_bytes as f64 / obs.cover_bytes.max(1) as f64;
    let chi = stats::chi_square_uniformity::<f64>(&obs.population, obs.domain, cfg.uniformity_bins)?;
    let ops_ratio = obs.stego_decrypt_ops as f64 / obs.cover_decrypt_ops.max(1) as f64;
    Ok(AttackVerdict::new(
        SecurityLevel::Scoa,
        vec![
            Evidence::new("size_ratio", size_ratio, Comparison::Eq, 1.0),
            Evidence::new("uniformity_p", chi.p_value, Comparison::Gt, cfg.alpha),
            Evidence::new("decrypt_ops_ratio", ops_ratio, Comparison::Eq, 1.0),
        ],
        vec![
            ("cover_bytes".into(), obs.cover_bytes as f64),
            ("stego_bytes".into(), obs.stego_bytes as f64),
            ("uniformity_chi2".into(), chi.statistic),
            ("uniformity_samples".into(), obs.population.len() as f64),
        ],
    ))
}

pub fn kca_evaluate(
    subject: &dyn Suspect,
    cfg: &HarnessConfig,
    rng: &mut dyn RngCore,
) -> Result<AttackVerdict, HarnessError> {
    let obs = subject.observe_kca(cfg, rng)?;
    let matches = obs
        .reference
        .iter()
        .zip(&obs.decrypted)
        .filter(|(a, b)| a == b)
        .count();
    let exact = if obs.reference.len() == obs.decrypted.len() && !obs.reference.is_empty() {
        matches as f64 / obs.reference.len() as f64
    } else {
        0.0
    };
    let reference: Vec<f64> = obs.reference.iter().map(|&v| v as f64).collect();
    let decrypted: Vec<f64> = obs.decrypted.iter().map(|&v| v as f64).collect();
    let fid = stats::psnr(&reference, &decrypted, obs.max_value)?;
    let mut measurements = vec![("mse".to_string(), fid.mse)];
    if let Some(min) = obs
        .per_image_psnr
        .iter()
        .map(|p| p.db())
        .min_by(|a, b| a.total_cmp(b))
    {
        measurements.push(("psnr_min_image_db".into(), min));
    }
    Ok(AttackVerdict::new(
        SecurityLevel::Kca,
        vec![
            Evidence::new("exact_match_fraction", exact, Comparison::Eq, 1.0),
            Evidence::new("psnr_db", fid.psnr.db(), Comparison::Eq, f64::INFINITY),
        ],
        measurements,
    ))
}

pub fn cca_evaluate(
    subject: &dyn Suspect,
    cfg: &HarnessConfig,
    rng: &mut dyn RngCore,
) -> Result<AttackVerdict, HarnessError> {
    let pairs = subject.observe_cca(cfg, rng)?;
    if pairs.is_empty() {
        return Err(HarnessError::MissingTrace {
            scheme: subject.descriptor().name,
            level: SecurityLevel::Cca,
            what: "process trace",
        });
    }
    let mut evidence = Vec::new();
    let mut measurements = Vec::new();
    for pair in &pairs {
        let ks = stats::ks_two_sample(&pair.plain, &pair.stego)?;
        let (hp, hs) = pair.histograms(cfg)?;
        let kl = stats::kl_divergence(&hs, &hp)?;
        evidence.push(Evidence::new(format!("{}.ks_p", pair.name), ks.p_value, Comparison::Gt, cfg.alpha));
        evidence.push(Evidence::new(format!("{}.kl", pair.name), kl, Comparison::Le, cfg.epsilon));
        measurements.push((format!("{}.ks_statistic", pair.name), ks.statistic));
        if let TraceBinning::Integer { .. } = pair.binning {
            measurements.push((
                format!("{}.peaks_plain", pair.name),
                stats::count_peaks(&hp, cfg.peak_prominence)? as f64,
            ));
            measurements.push((
                format!("{}.peaks_stego", pair.name),
                stats::count_peaks(&hs, cfg.peak_prominence)? as f64,
            ));
        }
    }
    Ok(AttackVerdict::new(SecurityLevel::Cca, evidence, measurements))
}

pub fn acca_evaluate(
    subject: &dyn Suspect,
    cfg: &HarnessConfig,
    rng: &mut dyn RngCore,
) -> Result<AttackVerdict, HarnessError> {
    let obs = subject.observe_acca(cfg, rng)?;
    if obs.stego_invocations.is_empty() || obs.plain_invocations.is_empty() {
        return Err(HarnessError::MissingTrace {
            scheme: subject.descriptor().name,
            level: SecurityLevel::Acca,
            what: "invocation-count trace",
        });
    }
    let plain: Vec<f64> = obs.plain_invocations.iter().map(|&v| v as f64).collect();
    let stego: Vec<f64> = obs.stego_invocations.iter().map(|&v| v as f64).collect();
    let ks = stats::ks_two_sample(&plain, &stego)?;
    Ok(AttackVerdict::new(
        SecurityLevel::Acca,
        vec![
            Evidence::new("invocations.ks_p", ks.p_value, Comparison::Gt, cfg.alpha),
            Evidence::new(
                "standard_ops_only",
                f64::from(u8::from(obs.standard_ops_only)),
                Comparison::Eq,
                1.0,
            ),
        ],
        vec![
            ("invocations.mean_plain".into(), stats::mean(&plain).unwrap_or(0.0)),
            ("invocations.mean_stego".into(), stats::mean(&stego).unwrap_or(0.0)),
            ("invocations.ks_statistic".into(), ks.statistic),
        ],
    ))
}

fn level_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Notes attached to every report.
pub fn report_notes(cfg: &HarnessConfig) -> Vec<String> {
    vec![
        format!(
            "alpha = {} per test and KL budget epsilon = {} nat at {} samples; these are calibrated defaults, and per-trace alpha is not Bonferroni-corrected",
            cfg.alpha, cfg.epsilon, cfg.trials
        ),
        format!(
            "Paillier keys use {}-bit primes; ciphertext uniformity is tested on the least-significant half of each ciphertext's canonical bytes",
            cfg.prime_bits
        ),
        "decryption complexity is compared as exact operation counts, not wall-clock time".into(),
        "CCA embeds a chosen all-zero payload; ACCA is approximated by an invocation-count side channel plus the scheme's standard-operations flag".into(),
        "no scheme in this repository reaches ACCA; rejection-sampling schemes leak through their invocation counts".into(),
    ]
}

/// Run every evaluator on `subject`, each level with its own random stream.
pub fn grade_subject(subject: &dyn Suspect, cfg: &HarnessConfig) -> Result<SecurityGrade, HarnessError> {
    let evaluators: [fn(&dyn Suspect, &HarnessConfig, &mut dyn RngCore) -> Result<AttackVerdict, HarnessError>; 4] =
        [scoa_evaluate, kca_evaluate, cca_evaluate, acca_evaluate];
    let mut verdicts = Vec::with_capacity(4);
    for (i, eval) in evaluators.iter().enumerate() {
        let mut rng = level_rng(cfg.seed, i as u64 + 1);
        verdicts.push(eval(subject, cfg, &mut rng)?);
    }
    let d = subject.descriptor();
    Ok(SecurityGrade {
        scheme: d.name,
        mode: d.mode,
        claimed_level: d.claimed_level,
        seed: cfg.seed,
        config: cfg.clone(),
        resisted: resisted_level(&verdicts),
        verdicts,
        notes: report_notes(cfg),
    })
}

/// Generate keys from the configured seed and grade a registered scheme.
pub fn grade_security(descriptor: &SchemeDescriptor, cfg: &HarnessConfig) -> Result<SecurityGrade, HarnessError> {
    let fixture = HarnessFixture::generate(cfg, &mut level_rng(cfg.seed, 0))?;
    let subject = RegisteredScheme::new(descriptor.clone(), &fixture);
    grade_subject(&subject, cfg)
}

/// Plain- and stego-trace histograms with identical binning, for plotting.
pub fn trace_histograms(
    descriptor: &SchemeDescriptor,
    cfg: &HarnessConfig,
) -> Result<Vec<(String, Histogram<f64>, Histogram<f64>)>, HarnessError> {
    let fixture = HarnessFixture::generate(cfg, &mut level_rng(cfg.seed, 0))?;
    let subject = RegisteredScheme::new(descriptor.clone(), &fixture);
    let mut rng = level_rng(cfg.seed, 3);
    subject
        .observe_cca(cfg, &mut rng)?
        .into_iter()
        .map(|p| {
            let (hp, hs) = p.histograms(cfg)?;
            Ok((p.name, hp, hs))
        })
        .collect()
}
