// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sied_core::baseline::de::LocationMap;
use sied_core::baseline::image::default_corpus;
use sied_core::codec::BitString;
use sied_core::evr::EvrConfig;
use sied_core::framework::{
    receiver_decrypt, run_scenario, scheme_embed, scheme_extract, BundleHeader, Cover, EmbedKey,
    ExtractKey, KeyRing, KeyRole, SchemeDescriptor, SchemeName, SecurityLevel, StegoBundle,
    StegoRecords,
};
use sied_core::harness::{grade_security, trace_histograms, HarnessConfig, SecurityGrade};
use sied_core::lwe::{self, LweCiphertext, LweParams, LweSecretKey};
use sied_core::paillier::{keygen as paillier_keygen, PaillierCiphertext, PaillierPublicKey, PaillierSecretKey};
use sied_core::stats::{count_peaks, Histogram};

use crate::{DemoArgs, DecryptArgs, EmbedArgs, ExtractArgs, GradeArgs, HistArgs, KeygenArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Runtime(String),
    Expectation { expected: SecurityLevel, found: SecurityLevel },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Expectation { .. } => 2,
            CliError::Usage(_) => 64,
            CliError::Data(_) => 65,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Data(m) => write!(f, "malformed input: {m}"),
            CliError::Runtime(m) => f.write_str(m),
            CliError::Expectation { expected, found } => {
                write!(f, "expected resisted level {expected}, graded {found}")
            }
        }
    }
}

fn runtime(stage: &str, e: impl fmt::Display) -> CliError {
    CliError::Runtime(format!("{stage} failed: {e}"))
}

/// Everything that determines a run; embedded in every report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub scheme: String,
    pub seed: u64,
    pub trials: usize,
    pub alpha: f64,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub key_paths: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<PathBuf>,
}

#[derive(Serialize)]
struct GradeReport<'a> {
    run_config: &'a RunConfig,
    #[serde(flatten)]
    grade: &'a SecurityGrade,
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| runtime("reading input", format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| runtime("writing output", format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("records serialize") + "\n"
}

fn scheme(name: &str) -> Result<SchemeDescriptor, CliError> {
    SchemeDescriptor::lookup(name).map_err(|e| CliError::Usage(e.to_string()))
}

fn fingerprint(record: &str) -> String {
    let digest = Sha256::digest(record.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn keygen(a: &KeygenArgs, seed: u64) -> Result<(), CliError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let with_ext = |ext: &str| {
        let mut s = a.out.clone().into_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    match a.scheme.as_str() {
        "paillier" | "evr" | "evr-keyless" | "expansion-lsb" | "marked-de" | "plain" => {
            let (pk, sk) = paillier_keygen(a.prime_bits, &mut rng).map_err(|e| runtime("key generation", e))?;
            let pk_json = to_json(&pk);
            write(&with_ext(".pk.json"), &pk_json)?;
            write(&with_ext(".sk.json"), to_json(&sk))?;
            println!("paillier {}-bit N, fingerprint {}", pk.n().bits(), fingerprint(&pk_json));
        }
        "lwe-toy" | "lwe" => {
            let params = LweParams::new(a.lwe_n, a.lwe_q, a.lwe_sigma).map_err(|e| CliError::Usage(e.to_string()))?;
            let sk = lwe::keygen(params, &mut rng).map_err(|e| runtime("key generation", e))?;
            let sk_json = to_json(&sk);
            write(&with_ext(".sk.json"), &sk_json)?;
            println!("lwe n={} q={} sigma={}, fingerprint {}", params.n, params.q, params.sigma, fingerprint(&sk_json));
        }
        other => return Err(CliError::Usage(format!("unknown key scheme {other:?}"))),
    }
    Ok(())
}

#[derive(Default)]
struct LoadedKeys {
    paillier_pk: Option<PaillierPublicKey>,
    paillier_sk: Option<PaillierSecretKey>,
    lwe_sk: Option<LweSecretKey>,
}

fn load_keys(paths: &[PathBuf]) -> Result<LoadedKeys, CliError> {
    let mut keys = LoadedKeys::default();
    for path in paths {
        let value: serde_json::Value = read_json(path)?;
        let bad = |e: serde_json::Error| CliError::Data(format!("{}: {e}", path.display()));
        match value.get("kind").and_then(|k| k.as_str()) {
            Some("paillier-pk") => keys.paillier_pk = Some(serde_json::from_value(value).map_err(bad)?),
            Some("paillier-sk") => keys.paillier_sk = Some(serde_json::from_value(value).map_err(bad)?),
            Some("lwe-sk") => keys.lwe_sk = Some(serde_json::from_value(value).map_err(bad)?),
            other => return Err(CliError::Data(format!("{}: unknown key kind {other:?}", path.display()))),
        }
    }
    Ok(keys)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CoverFile {
    Plaintexts {
        plaintexts: Vec<u64>,
    },
    Ciphertexts {
        public: PaillierPublicKey,
        ciphertexts: Vec<PaillierCiphertext>,
    },
}

fn key_error(d: &SchemeDescriptor, expected: KeyRole, stage: &str) -> CliError {
    CliError::Runtime(format!(
        "{stage} failed: KeyRoleMismatch: scheme {} needs a {expected} key",
        d.name
    ))
}

pub fn embed(a: &EmbedArgs, seed: u64) -> Result<(), CliError> {
    let mut d = scheme(&a.scheme)?;
    if let Some(p) = &a.positions {
        let cfg = EvrConfig::new(p.clone(), sied_core::evr::DEFAULT_MAX_RETRIES, Default::default())
            .map_err(|e| CliError::Usage(e.to_string()))?;
        d = d.with_evr_config(cfg);
    }
    let keys = load_keys(&a.keys)?;
    let bits = a.bits.unwrap_or(a.message.len() * 4);
    let message = BitString::from_hex(&a.message, bits).map_err(|e| CliError::Usage(format!("--message: {e}")))?;
    let cover = match read_json::<CoverFile>(&a.cover)? {
        CoverFile::Plaintexts { plaintexts } => Cover::Plaintexts(plaintexts),
        CoverFile::Ciphertexts { public, ciphertexts } => Cover::Ciphertexts { public, ciphertexts },
    };
    let key = match d.embed_key {
        KeyRole::None => EmbedKey::None,
        KeyRole::Encryption => EmbedKey::PaillierPublic(
            keys.paillier_pk.ok_or_else(|| key_error(&d, KeyRole::Encryption, "embed"))?,
        ),
        KeyRole::DataHiding | KeyRole::Decryption => {
            EmbedKey::LweSecret(keys.lwe_sk.ok_or_else(|| key_error(&d, KeyRole::DataHiding, "embed"))?)
        }
    };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let out = scheme_embed(&d, &key, &cover, message.as_slice(), &mut rng).map_err(|e| runtime("embed", e))?;
    write(&a.out, to_json(&out.stego))?;
    if let Some(path) = &a.trace {
        write(path, to_json(&out.trace))?;
    }
    match (&a.side_info, &out.location_map) {
        (Some(path), Some(map)) => write(path, to_json(map))?,
        (None, Some(_)) => eprintln!("warning: {} produced side information; pass --side-info to keep it", d.name),
        _ => {}
    }
    eprintln!("embedded {bits} bits into {} records", out.stego.record_count());
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StegoFile {
    Bundle(StegoBundle),
    Paillier(Vec<PaillierCiphertext>),
    Lwe(Vec<LweCiphertext>),
}

fn load_stego(path: &Path, scheme: SchemeName) -> Result<StegoBundle, CliError> {
    let header = BundleHeader { scheme, positions: None };
    Ok(match read_json::<StegoFile>(path)? {
        StegoFile::Bundle(b) => b,
        StegoFile::Paillier(r) => StegoBundle { header, records: StegoRecords::Paillier(r), appendix: Vec::new() },
        StegoFile::Lwe(r) => StegoBundle { header, records: StegoRecords::Lwe(r), appendix: Vec::new() },
    })
}

pub fn extract(a: &ExtractArgs) -> Result<(), CliError> {
    let d = scheme(&a.scheme)?;
    let keys = load_keys(&a.keys)?;
    let stego = load_stego(&a.stego, d.name)?;
    let key = match d.extract_key {
        KeyRole::None => ExtractKey::None,
        _ => match d.name {
            SchemeName::LweToy => {
                ExtractKey::LweSecret(keys.lwe_sk.ok_or_else(|| key_error(&d, KeyRole::Decryption, "extract"))?)
            }
            _ => {
                let (pk, sk) = keys
                    .paillier_pk
                    .zip(keys.paillier_sk)
                    .ok_or_else(|| key_error(&d, KeyRole::Decryption, "extract"))?;
                match &a.side_info {
                    Some(path) => ExtractKey::MarkedDe { pk, sk, location_map: read_json::<LocationMap>(path)? },
                    None if d.name == SchemeName::MarkedDe => {
                        return Err(CliError::Usage("marked-de extraction needs --side-info".into()))
                    }
                    None => ExtractKey::Paillier { pk, sk },
                }
            }
        },
    };
    let mut bits = scheme_extract(&d, &key, &stego).map_err(|e| runtime("extract", e))?;
    if let Some(n) = a.bits {
        bits.truncate(n);
    }
    println!("{}", BitString::new(bits).to_hex());
    Ok(())
}

pub fn decrypt(a: &DecryptArgs) -> Result<(), CliError> {
    let keys = load_keys(&a.keys)?;
    let stego = load_stego(&a.stego, SchemeName::Plain)?;
    let ring = KeyRing {
        paillier: keys.paillier_pk.zip(keys.paillier_sk),
        lwe: keys.lwe_sk,
    };
    let plaintexts = receiver_decrypt(&stego, &ring).map_err(|e| runtime("decrypt", e))?;
    println!("{}", serde_json::to_string(&plaintexts).expect("integers serialize"));
    Ok(())
}

fn harness_config(
    seed: Option<u64>,
    trials: Option<usize>,
    prime_bits: Option<u64>,
) -> HarnessConfig {
    let mut cfg = HarnessConfig::default();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(b) = prime_bits {
        cfg.prime_bits = b;
    }
    cfg
}

pub fn grade(a: &GradeArgs, seed: Option<u64>) -> Result<(), CliError> {
    let d = scheme(&a.scheme)?;
    let expect = a
        .expect
        .as_deref()
        .map(str::parse::<SecurityLevel>)
        .transpose()
        .map_err(CliError::Usage)?;
    let mut cfg = harness_config(seed, a.trials, a.prime_bits);
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = a.kca_images {
        cfg.kca_images = v;
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) || !(cfg.epsilon > 0.0) || cfg.trials == 0 {
        return Err(CliError::Usage("need 0 < alpha < 1, epsilon > 0 and trials > 0".into()));
    }
    let run = RunConfig {
        command: "grade".into(),
        scheme: d.name.to_string(),
        seed: cfg.seed,
        trials: cfg.trials,
        alpha: cfg.alpha,
        epsilon: cfg.epsilon,
        key_paths: Vec::new(),
        inputs: Vec::new(),
        outputs: a.out.iter().cloned().collect(),
    };
    let grade = grade_security(&d, &cfg).map_err(|e| runtime("grading", e))?;
    let report = to_json(&GradeReport { run_config: &run, grade: &grade });
    match &a.out {
        Some(path) => write(path, report)?,
        None => print!("{report}"),
    }
    for v in &grade.verdicts {
        eprintln!("{:>4}: {}", v.level, if v.passed { "pass" } else { "fail" });
    }
    eprintln!("{}: resisted {}", d.name, grade.resisted);
    match expect {
        Some(level) if level != grade.resisted => Err(CliError::Expectation {
            expected: level,
            found: grade.resisted,
        }),
        _ => Ok(()),
    }
}

fn read_trace(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = String::from_utf8(read(path)?).map_err(|_| CliError::Data(format!("{}: not UTF-8", path.display())))?;
    let samples = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Data(format!("{}: bad sample {l:?}", path.display())))
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    if samples.is_empty() {
        return Err(CliError::Data(format!("{}: empty trace", path.display())));
    }
    Ok(samples)
}

fn trace_binning(all: &[f64]) -> Result<Histogram<f64>, CliError> {
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let h = if all.iter().all(|v| v.fract() == 0.0) {
        Histogram::integer(lo as i64, (hi as i64).max(lo as i64 + 2))
    } else {
        Histogram::uniform(lo, if hi > lo { hi } else { lo + 1.0 }, 32)
    };
    h.map_err(|e| CliError::Data(e.to_string()))
}

pub fn hist(a: &HistArgs, seed: Option<u64>) -> Result<(), CliError> {
    fs::create_dir_all(&a.out_dir).map_err(|e| runtime("creating output directory", e))?;
    let cfg = harness_config(seed, a.trials, a.prime_bits);
    let sets: Vec<(String, Histogram<f64>, Histogram<f64>)> = match (&a.trace, &a.scheme) {
        (Some(path), _) => {
            let stego = read_trace(path)?;
            let plain = match &a.baseline {
                Some(p) => read_trace(p)?,
                None => Vec::new(),
            };
            let all: Vec<f64> = stego.iter().chain(&plain).copied().collect();
            let base = trace_binning(&all)?;
            let name = path.file_stem().map_or("trace".into(), |s| s.to_string_lossy().into_owned());
            vec![(name, base.clone().with_samples(&plain), base.with_samples(&stego))]
        }
        (None, Some(name)) => trace_histograms(&scheme(name)?, &cfg).map_err(|e| runtime("trace generation", e))?,
        (None, None) => return Err(CliError::Usage("pass --trace or --scheme".into())),
    };
    for (name, plain, stego) in sets {
        for (tag, h) in [("plain", &plain), ("stego", &stego)] {
            if h.total() == 0 {
                continue;
            }
            let path = a.out_dir.join(format!("{name}.{tag}.csv"));
            write(&path, h.to_csv())?;
            let peaks = if h.bins() >= 3 {
                count_peaks(h, cfg.peak_prominence).map_err(|e| runtime("peak count", e))?
            } else {
                0
            };
            println!("{} peaks={peaks} samples={}", path.display(), h.total());
        }
    }
    Ok(())
}

pub fn demo(a: &DemoArgs, seed: u64) -> Result<(), CliError> {
    let d = scheme(&a.scheme)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (pk, sk) = paillier_keygen(a.prime_bits, &mut rng).map_err(|e| runtime("key generation", e))?;
    let lwe_sk = lwe::keygen(LweParams::default(), &mut rng).map_err(|e| runtime("key generation", e))?;
    let keys = KeyRing { paillier: Some((pk, sk)), lwe: Some(lwe_sk) };
    let samples: Vec<u64> = default_corpus()[1]
        .samples
        .iter()
        .take(a.samples)
        .map(|&v| if d.name == SchemeName::LweToy { u64::from(v & 1) } else { u64::from(v) })
        .collect();
    let message: Vec<bool> = (0..a.bits).map(|_| rng.gen()).collect();
    println!("scheme {} (mode {}, embed key: {}, extract key: {})", d.name, d.mode, d.embed_key, d.extract_key);
    println!("message {}", BitString::new(message.clone()).to_hex());
    let res = run_scenario(&d, &keys, &samples, &message, &mut rng).map_err(|e| CliError::Runtime(e.to_string()))?;
    for (stage, line) in &res.log {
        println!("[{stage}] {line}");
    }
    for tap in &res.transcript {
        println!("[wire] {} ({} bytes of JSON)", tap.label, tap.payload.to_string().len());
    }
    println!("Bob reads {}", BitString::new(res.bob_extracted).to_hex());
    Ok(())
}
