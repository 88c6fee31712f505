// SPDX-License-Identifier: Apache-2.0

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sied_core::framework::{SchemeDescriptor, SchemeName, SecurityLevel};
use sied_core::harness::{
    cca_evaluate, grade_security, grade_subject, AccaObservation, HarnessConfig, HarnessError,
    KcaObservation, ScoaObservation, Suspect, TracePair,
};
use rand::RngCore;

fn small() -> HarnessConfig {
    HarnessConfig {
        prime_bits: 64,
        kca_images: 4,
        ..HarnessConfig::default()
    }
}

#[test]
fn ladder_at_reduced_size() {
    let cfg = small();
    for (name, expected) in [
        (SchemeName::ExpansionLsb, SecurityLevel::None),
        (SchemeName::MarkedDe, SecurityLevel::Scoa),
        (SchemeName::LweToy, SecurityLevel::Kca),
        (SchemeName::Evr, SecurityLevel::Cca),
        (SchemeName::EvrKeyless, SecurityLevel::Cca),
        (SchemeName::Plain, SecurityLevel::Acca),
    ] {
        let t = std::time::Instant::now();
        let g = grade_security(&SchemeDescriptor::new(name), &cfg).unwrap();
        eprintln!("{name}: {} in {:?}", g.resisted, t.elapsed());
        assert_eq!(g.resisted, expected, "{}", g.to_json());
        assert_eq!(g.verdicts.len(), 4);
    }
}

#[test]
fn grading_is_reproducible() {
    let cfg = HarnessConfig { trials: 2_000, prime_bits: 48, kca_images: 1, ..HarnessConfig::default() };
    let d = SchemeDescriptor::new(SchemeName::LweToy);
    let a = grade_security(&d, &cfg).unwrap().to_json();
    let b = grade_security(&d, &cfg).unwrap().to_json();
    assert_eq!(a, b);
    let c = grade_security(&d, &cfg.clone().with_seed(8)).unwrap().to_json();
    assert_ne!(a, c);
}

/// A scheme that embeds nothing and exposes no process traces.
struct Silent(SchemeDescriptor);

impl Suspect for Silent {
    fn descriptor(&self) -> &SchemeDescriptor {
        &self.0
    }
    fn observe_scoa(&self, _: &HarnessConfig, rng: &mut dyn RngCore) -> Result<ScoaObservation, HarnessError> {
        Ok(ScoaObservation {
            cover_bytes: 64,
            stego_bytes: 64,
            population: (0..10_000).map(|_| u64::from(rng.next_u32() & 0xff)).collect(),
            domain: 256,
            cover_decrypt_ops: 3,
            stego_decrypt_ops: 3,
        })
    }
    fn observe_kca(&self, _: &HarnessConfig, _: &mut dyn RngCore) -> Result<KcaObservation, HarnessError> {
        Ok(KcaObservation { reference: vec![1, 2, 3], decrypted: vec![1, 2, 3], max_value: 255.0, per_image_psnr: vec![] })
    }
    fn observe_cca(&self, _: &HarnessConfig, _: &mut dyn RngCore) -> Result<Vec<TracePair>, HarnessError> {
        Ok(Vec::new())
    }
    fn observe_acca(&self, _: &HarnessConfig, _: &mut dyn RngCore) -> Result<AccaObservation, HarnessError> {
        Ok(AccaObservation { plain_invocations: vec![1; 100], stego_invocations: vec![1; 100], standard_ops_only: true })
    }
}

#[test]
fn missing_trace_is_an_error() {
    let s = Silent(SchemeDescriptor::new(SchemeName::Plain));
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let err = cca_evaluate(&s, &HarnessConfig::default(), &mut rng).unwrap_err();
    assert!(matches!(err, HarnessError::MissingTrace { .. }));
    assert!(grade_subject(&s, &HarnessConfig::default()).is_err());
}

/// Zero retries and standard operations only: every level passes.
struct Ideal(SchemeDescriptor);

impl Suspect for Ideal {
    fn descriptor(&self) -> &SchemeDescriptor {
        &self.0
    }
    fn observe_scoa(&self, c: &HarnessConfig, r: &mut dyn RngCore) -> Result<ScoaObservation, HarnessError> {
        Silent(self.0.clone()).observe_scoa(c, r)
    }
    fn observe_kca(&self, c: &HarnessConfig, r: &mut dyn RngCore) -> Result<KcaObservation, HarnessError> {
        Silent(self.0.clone()).observe_kca(c, r)
    }
    fn observe_cca(&self, _: &HarnessConfig, _: &mut dyn RngCore) -> Result<Vec<TracePair>, HarnessError> {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        Ok(vec![TracePair { name: "t".into(), plain: xs.clone(), stego: xs, binning: sied_core::harness::TraceBinning::Unit }])
    }
    fn observe_acca(&self, c: &HarnessConfig, r: &mut dyn RngCore) -> Result<AccaObservation, HarnessError> {
        Silent(self.0.clone()).observe_acca(c, r)
    }
}

#[test]
fn ideal_scheme_reaches_acca() {
    let g = grade_subject(&Ideal(SchemeDescriptor::new(SchemeName::Plain)), &HarnessConfig::default()).unwrap();
    assert_eq!(g.resisted, SecurityLevel::Acca);
    assert!(g.verdicts.iter().all(|v| v.passed));
}
