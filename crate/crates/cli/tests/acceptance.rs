// SPDX-License-Identifier: Apache-2.0

//! Acceptance criteria 1 to 10, one PASS/FAIL line each.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use sied_core::evr::{self, EvrConfig};
use sied_core::framework::{SchemeDescriptor, SchemeName, SecurityLevel};
use sied_core::harness::{grade_security, HarnessConfig, SecurityGrade};
use sied_core::paillier::{keygen, keypair_from_primes};
use sied_core::stats::chi_square_goodness_of_fit;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.passed &= took < limit;
    o.detail = format!("{} [{:.2?} of {}s]", o.detail, took, limit.as_secs());
    o
}

fn paillier_exhaustive() -> Outcome {
    let (pk, sk) = keypair_from_primes(&BigUint::from(5u32), &BigUint::from(7u32), None).unwrap();
    let (mut cases, mut failures) = (0, 0);
    for m in 0u32..35 {
        for r in 1u32..35 {
            if r.gcd(&35) != 1 {
                continue;
            }
            cases += 1;
            let c = pk.encrypt(&BigUint::from(m), &pk.randomness(BigUint::from(r)).unwrap()).unwrap();
            if sk.decrypt(&pk, &c).unwrap() != BigUint::from(m) {
                failures += 1;
            }
        }
    }
    outcome(cases == 840 && failures == 0, format!("{cases} cases, {failures} failures"))
}

fn evr_lossless_512() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let (pk, sk) = keygen(512, &mut rng).unwrap();
    let cfg = EvrConfig::default();
    let plaintexts: Vec<BigUint> = (0..1000).map(|_| pk.sample_plaintext(&mut rng)).collect();
    let bits: Vec<bool> = (0..1000).map(|_| rng.gen()).collect();
    let (stego, _) = evr::embed_message(&pk, &plaintexts, &bits, &cfg, &mut rng).unwrap();
    let exact = stego
        .iter()
        .zip(&plaintexts)
        .filter(|(s, m)| sk.decrypt(&pk, s.ciphertext()).unwrap() == **m)
        .count();
    let extracted = evr::extract_message(&stego, &cfg);
    let recovered = extracted.iter().zip(&bits).filter(|(a, b)| a == b).count();
    outcome(
        exact == 1000 && recovered == 1000 && extracted.len() == 1000,
        format!("N is {} bits; {exact}/1000 exact decryptions, {recovered}/1000 bits recovered", pk.n().bits()),
    )
}

fn evr_retry_law() -> Outcome {
    const EMBEDS: usize = 100_000;
    const TAIL: usize = 13;
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let (pk, _) = keygen(32, &mut rng).unwrap();
    let cfg = EvrConfig::default();
    let mut counts = vec![0u64; TAIL + 1];
    let mut total = 0u64;
    for _ in 0..EMBEDS {
        let m = pk.sample_plaintext(&mut rng);
        let (_, refreshes) = evr::embed_bit(&pk, &m, rng.gen(), &cfg, &mut rng).unwrap();
        total += u64::from(refreshes);
        counts[(refreshes as usize).min(TAIL)] += 1;
    }
    let mean = total as f64 / EMBEDS as f64;
    // P(K = k) = 2^-(k+1), with the tail K >= TAIL pooled.
    let mut probs: Vec<f64> = (0..TAIL).map(|k| 0.5f64.powi(k as i32 + 1)).collect();
    probs.push(0.5f64.powi(TAIL as i32));
    let chi = chi_square_goodness_of_fit(&counts, &probs).unwrap();
    outcome(
        (0.9..=1.1).contains(&mean) && chi.p_value > 0.01,
        format!("mean refreshes {mean:.4}, geometric fit chi2 {:.2} on {} df, p = {:.4}", chi.statistic, chi.degrees_of_freedom, chi.p_value),
    )
}

fn run_grade(dir: &Path, scheme: &str, expect: &str) -> (i32, Option<SecurityGrade>) {
    let out = dir.join(format!("{scheme}.json"));
    let status = Command::new(env!("CARGO_BIN_EXE_sied"))
        .args(["grade", "--scheme", scheme, "--expect", expect, "--seed", "7", "--out"])
        .arg(&out)
        .env_remove("SIED_SEED")
        .output()
        .expect("sied runs");
    let grade = std::fs::read(&out).ok().and_then(|b| serde_json::from_slice(&b).ok());
    (status.status.code().unwrap_or(-1), grade)
}

fn show(v: Option<f64>) -> String {
    v.map_or("missing".into(), |x| if x.is_infinite() { "inf".into() } else { format!("{x:.4e}") })
}

fn check(v: Option<f64>, f: impl Fn(f64) -> bool) -> bool {
    v.is_some_and(f)
}

fn value(g: &SecurityGrade, level: SecurityLevel, check: &str) -> Option<f64> {
    g.verdict(level)?.evidence(check).map(|e| e.value.0)
}

fn measured(g: &SecurityGrade, level: SecurityLevel, name: &str) -> Option<f64> {
    g.verdict(level)?.measurement(name)
}

fn null_calibration() -> Outcome {
    const RUNS: u64 = 100;
    let d = SchemeDescriptor::new(SchemeName::Plain);
    let mut failures: BTreeMap<String, u32> = BTreeMap::new();
    let mut clean = 0;
    let mut alpha = 0.0;
    for seed in 0..RUNS {
        let cfg = HarnessConfig {
            seed,
            prime_bits: 32,
            kca_images: 1,
            ..HarnessConfig::default()
        };
        alpha = cfg.alpha;
        let g = grade_security(&d, &cfg).unwrap();
        if g.resisted == SecurityLevel::Acca {
            clean += 1;
        }
        for v in &g.verdicts {
            for e in &v.evidence {
                *failures.entry(format!("{}:{}", v.level, e.check)).or_default() += u32::from(!e.passed);
            }
        }
    }
    let limit = (2.0 * alpha * RUNS as f64).round() as u32;
    let worst = failures.iter().max_by_key(|(_, &n)| n).map(|(k, &n)| (k.clone(), n));
    let (name, n) = worst.unwrap_or_default();
    outcome(
        failures.values().all(|&n| n <= limit),
        format!("{clean}/{RUNS} runs pass all four levels; worst check {name} failed {n} times (limit {limit})"),
    )
}

fn main() {
    let suite = Instant::now();
    let mut results: Vec<(u32, Outcome)> = Vec::new();

    results.push((1, timed(Duration::from_secs(1), paillier_exhaustive)));
    results.push((2, timed(Duration::from_secs(60), evr_lossless_512)));
    results.push((3, timed(Duration::from_secs(120), evr_retry_law)));

    let dir = tempfile::tempdir().unwrap();
    let expected = [
        ("expansion-lsb", "NONE"),
        ("marked-de", "SCOA"),
        ("lwe-toy", "KCA"),
        ("evr", "CCA"),
    ];
    let mut grades = BTreeMap::new();
    let mut codes = Vec::new();
    for (scheme, level) in expected {
        let (code, grade) = run_grade(dir.path(), scheme, level);
        codes.push(format!("{scheme}->{code}"));
        if let Some(g) = grade {
            grades.insert(scheme, g);
        }
    }
    let have_all = grades.len() == expected.len();
    let g = |s: &str| grades.get(s);
    use SecurityLevel::*;

    let c4 = have_all && {
        let exp = g("expansion-lsb").unwrap();
        let size_fail = !exp.verdict(Scoa).unwrap().passed && check(value(exp, Scoa, "size_ratio"), |r| r > 1.0);
        let uniform = ["evr", "lwe-toy", "marked-de"].iter().all(|s| {
            let gr = g(s).unwrap();
            gr.verdict(Scoa).unwrap().passed
                && check(value(gr, Scoa, "uniformity_p"), |p| p > 0.01)
                && check(measured(gr, Scoa, "uniformity_samples"), |n| n >= 10_000.0)
        });
        size_fail && uniform
    };
    let c4_detail = if have_all {
        format!(
            "expansion size ratio {}; uniformity p: evr {}, lwe-toy {}, marked-de {}",
            show(value(g("expansion-lsb").unwrap(), Scoa, "size_ratio")),
            show(value(g("evr").unwrap(), Scoa, "uniformity_p")),
            show(value(g("lwe-toy").unwrap(), Scoa, "uniformity_p")),
            show(value(g("marked-de").unwrap(), Scoa, "uniformity_p")),
        )
    } else {
        "grade reports missing".into()
    };
    results.push((4, outcome(c4, c4_detail)));

    let c5 = have_all && {
        let de = g("marked-de").unwrap();
        let de_ok = !de.verdict(Kca).unwrap().passed
            && check(value(de, Kca, "psnr_db"), |p| p.is_finite() && p >= 65.0)
            && check(measured(de, Kca, "psnr_min_image_db"), |p| p >= 65.0);
        let lossless = ["evr", "lwe-toy"].iter().all(|s| {
            let gr = g(s).unwrap();
            gr.verdict(Kca).unwrap().passed && check(value(gr, Kca, "psnr_db"), |p| p == f64::INFINITY)
        });
        de_ok && lossless
    };
    let c5_detail = if have_all {
        format!(
            "marked-de PSNR {} dB (worst image {}); evr {}, lwe-toy {}",
            show(value(g("marked-de").unwrap(), Kca, "psnr_db")),
            show(measured(g("marked-de").unwrap(), Kca, "psnr_min_image_db")),
            show(value(g("evr").unwrap(), Kca, "psnr_db")),
            show(value(g("lwe-toy").unwrap(), Kca, "psnr_db")),
        )
    } else {
        "grade reports missing".into()
    };
    results.push((5, outcome(c5, c5_detail)));

    let c6 = have_all && {
        let lwe = g("lwe-toy").unwrap();
        let evr = g("evr").unwrap();
        check(value(lwe, Cca, "lwe.noise.ks_p"), |p| p < 1e-3)
            && measured(lwe, Cca, "lwe.noise.peaks_stego") > measured(lwe, Cca, "lwe.noise.peaks_plain")
            && check(value(evr, Cca, "paillier.r.ks_p"), |p| p > 0.01)
    };
    let c6_detail = if have_all {
        let lwe = g("lwe-toy").unwrap();
        format!(
            "lwe noise KS p {}, peaks stego {} vs plain {}; evr r-trace KS p {}",
            show(value(lwe, Cca, "lwe.noise.ks_p")),
            show(measured(lwe, Cca, "lwe.noise.peaks_stego")),
            show(measured(lwe, Cca, "lwe.noise.peaks_plain")),
            show(value(g("evr").unwrap(), Cca, "paillier.r.ks_p")),
        )
    } else {
        "grade reports missing".into()
    };
    results.push((6, outcome(c6, c6_detail)));

    let c7 = have_all && {
        let evr = g("evr").unwrap();
        !evr.verdict(Acca).unwrap().passed
            && check(value(evr, Acca, "invocations.ks_p"), |p| p < 0.01)
            && check(measured(evr, Acca, "invocations.mean_stego"), |m| (m - 2.0).abs() < 0.1)
            && check(measured(evr, Acca, "invocations.mean_plain"), |m| m == 1.0)
    };
    let c7_detail = if have_all {
        let evr = g("evr").unwrap();
        format!(
            "mean invocations stego {} vs plain {}, KS p {}",
            show(measured(evr, Acca, "invocations.mean_stego")),
            show(measured(evr, Acca, "invocations.mean_plain")),
            show(value(evr, Acca, "invocations.ks_p")),
        )
    } else {
        "grade reports missing".into()
    };
    results.push((7, outcome(c7, c7_detail)));

    let ladder: Vec<String> = grades.iter().map(|(s, gr)| format!("{s}={}", gr.resisted)).collect();
    let c8 = have_all
        && codes.iter().all(|c| c.ends_with("->0"))
        && expected
            .iter()
            .all(|(s, l)| g(s).is_some_and(|gr| gr.resisted.to_string() == *l))
        && grades.values().all(|gr| {
            gr.resisted < Acca && gr.notes.iter().any(|n| n.contains("no scheme in this repository reaches ACCA"))
        });
    results.push((8, outcome(c8, format!("{}; exit codes {}", ladder.join(", "), codes.join(", ")))));

    results.push((9, timed(Duration::from_secs(240), null_calibration)));

    let total = suite.elapsed();
    results.push((
        10,
        outcome(
            total < Duration::from_secs(300),
            format!("acceptance suite with 512-bit keys took {total:.2?} (limit 300s)"),
        ),
    ));

    for (n, o) in &results {
        println!("criterion {n}: {} - {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<u32> = results.iter().filter(|(_, o)| !o.passed).map(|(n, _)| *n).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
