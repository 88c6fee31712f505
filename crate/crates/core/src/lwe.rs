// SPDX-License-Identifier: Apache-2.0

//! Toy symmetric LWE encryption with payload bits hidden in the noise parity.
//!
//! `b = ⟨a, s⟩ + e + ⌊q/2⌋·m (mod q)` with `a` uniform and `e` a rounded
//! Gaussian. Embedding redraws `e` until `e ≡ payload (mod 2)`; decryption of
//! `m` is unaffected, but the noise histogram collapses onto one parity class
//! whenever the payload is biased. This is a qualitative stand-in for
//! quantization-redundancy embedding, not a faithful port of any published
//! construction.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Noise draws allowed per embedded bit.
pub const MAX_NOISE_DRAWS: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LweError {
    #[error("invalid LWE parameters: {0}")]
    InvalidParams(&'static str),
    #[error("plaintext and payload must be bits")]
    NotABit,
    #[error("no noise of the requested parity after {0} draws")]
    RetryLimitExceeded(u32),
    #[error("ciphertext does not match the key parameters")]
    ParamsMismatch,
}

pub type Result<T> = std::result::Result<T, LweError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LweParams {
    pub n: usize,
    pub q: u32,
    pub sigma: f64,
}

impl Default for LweParams {
    fn default() -> Self {
        Self {
            n: 32,
            q: 12289,
            sigma: 3.2,
        }
    }
}

impl LweParams {
    pub fn new(n: usize, q: u32, sigma: f64) -> Result<Self> {
        let p = Self { n, q, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(LweError::InvalidParams("dimension must be positive"));
        }
        if self.q < 3 || self.q % 2 == 0 {
            return Err(LweError::InvalidParams("q must be an odd modulus ≥ 3"));
        }
        if !(self.sigma > 0.0) || (self.q as f64) <= 8.0 * self.sigma {
            return Err(LweError::InvalidParams("need sigma > 0 and q > 8·sigma"));
        }
        Ok(())
    }

    pub fn half_q(&self) -> u32 {
        self.q / 2
    }

    /// Bytes per residue in the canonical encoding.
    pub fn residue_width(&self) -> usize {
        (32 - (self.q - 1).leading_zeros()).div_ceil(8) as usize
    }

    /// Canonical serialized size of one ciphertext: `(n + 1)` residues.
    pub fn ciphertext_bytes(&self) -> usize {
        (self.n + 1) * self.residue_width()
    }

    /// Centered representative in `(−q/2, q/2]`.
    pub fn centered(&self, v: u32) -> i64 {
        let v = v as i64;
        let q = self.q as i64;
        if v > q / 2 {
            v - q
        } else {
            v
        }
    }

    fn reduce(&self, v: i64) -> u32 {
        v.rem_euclid(self.q as i64) as u32
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename = "lwe-sk")]
pub struct LweSecretKey {
    params: LweParams,
    s: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CiphertextParams {
    pub n: usize,
    pub q: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LweCiphertext {
    pub a: Vec<u32>,
    pub b: u32,
    pub params: CiphertextParams,
}

/// The noise term of one encryption, centered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NoiseSample(pub i64);

#[derive(Clone, Debug)]
pub struct LweEmbedding {
    pub ciphertext: LweCiphertext,
    pub noise: NoiseSample,
    /// Noise draws including the first one.
    pub draws: u32,
}

pub fn keygen<R: RngCore + ?Sized>(params: LweParams, rng: &mut R) -> Result<LweSecretKey> {
    params.validate()?;
    let s = (0..params.n).map(|_| rng.gen_range(0..params.q)).collect();
    Ok(LweSecretKey { params, s })
}

fn check_bit(b: u8) -> Result<()> {
    if b > 1 {
        return Err(LweError::NotABit);
    }
    Ok(())
}

impl LweSecretKey {
    pub fn params(&self) -> &LweParams {
        &self.params
    }

    pub fn coefficients(&self) -> &[u32] {
        &self.s
    }

    /// Rounded Gaussian draw.
    pub fn sample_noise<R: RngCore + ?Sized>(&self, rng: &mut R) -> NoiseSample {
        let normal = Normal::new(0.0, self.params.sigma).expect("sigma validated");
        NoiseSample(normal.sample(rng).round() as i64)
    }

    fn inner(&self, a: &[u32]) -> u64 {
        let q = self.params.q as u64;
        a.iter()
            .zip(&self.s)
            .fold(0u64, |acc, (&ai, &si)| (acc + ai as u64 * si as u64) % q)
    }

    /// Encrypt `m` with an explicit noise term.
    pub fn encrypt_with_noise<R: RngCore + ?Sized>(
        &self,
        m: u8,
        noise: NoiseSample,
        rng: &mut R,
    ) -> Result<LweCiphertext> {
        check_bit(m)?;
        let p = &self.params;
        let a: Vec<u32> = (0..p.n).map(|_| rng.gen_range(0..p.q)).collect();
        Ok(self.assemble(a, m, noise))
    }

    fn assemble(&self, a: Vec<u32>, m: u8, noise: NoiseSample) -> LweCiphertext {
        let p = &self.params;
        let b = p.reduce(self.inner(&a) as i64 + noise.0 + p.half_q() as i64 * m as i64);
        LweCiphertext {
            a,
            b,
            params: CiphertextParams { n: p.n, q: p.q },
        }
    }

    pub fn encrypt<R: RngCore + ?Sized>(
        &self,
        m: u8,
        rng: &mut R,
    ) -> Result<(LweCiphertext, NoiseSample)> {
        let noise = self.sample_noise(rng);
        let ct = self.encrypt_with_noise(m, noise, rng)?;
        Ok((ct, noise))
    }

    fn check_ct(&self, ct: &LweCiphertext) -> Result<()> {
        let p = &self.params;
        if ct.params.n != p.n || ct.params.q != p.q || ct.a.len() != p.n {
            return Err(LweError::ParamsMismatch);
        }
        if ct.b >= p.q || ct.a.iter().any(|&x| x >= p.q) {
            return Err(LweError::ParamsMismatch);
        }
        Ok(())
    }

    fn phase(&self, ct: &LweCiphertext) -> u32 {
        self.params
            .reduce(ct.b as i64 - self.inner(&ct.a) as i64)
    }

    /// `1` iff the phase lies strictly inside `(q/4, 3q/4)`; a phase exactly on
    /// a quarter boundary decodes to `0`.
    pub fn decrypt(&self, ct: &LweCiphertext) -> Result<u8> {
        self.check_ct(ct)?;
        let v = self.phase(ct) as u64 * 4;
        let q = self.params.q as u64;
        Ok(u8::from(v > q && v < 3 * q))
    }

    /// Operation count of one decryption: `n` multiply-accumulates plus the
    /// final rounding.
    pub fn decryption_ops(&self) -> u64 {
        self.params.n as u64 + 1
    }

    /// The noise term a key holder observes while decrypting.
    pub fn recover_noise(&self, ct: &LweCiphertext) -> Result<NoiseSample> {
        let m = self.decrypt(ct)?;
        let p = &self.params;
        let v = p.reduce(self.phase(ct) as i64 - p.half_q() as i64 * m as i64);
        Ok(NoiseSample(p.centered(v)))
    }

    /// Encrypt `m` with noise redrawn until its parity equals `payload`.
    pub fn embed_bit<R: RngCore + ?Sized>(
        &self,
        m: u8,
        payload: u8,
        rng: &mut R,
    ) -> Result<LweEmbedding> {
        check_bit(m)?;
        check_bit(payload)?;
        let p = &self.params;
        let a: Vec<u32> = (0..p.n).map(|_| rng.gen_range(0..p.q)).collect();
        for draws in 1..=MAX_NOISE_DRAWS {
            let noise = self.sample_noise(rng);
            if noise.0.rem_euclid(2) as u8 == payload {
                return Ok(LweEmbedding {
                    ciphertext: self.assemble(a, m, noise),
                    noise,
                    draws,
                });
            }
        }
        Err(LweError::RetryLimitExceeded(MAX_NOISE_DRAWS))
    }

    pub fn extract_bit(&self, ct: &LweCiphertext) -> Result<u8> {
        Ok(self.recover_noise(ct)?.0.rem_euclid(2) as u8)
    }
}

/// One integer per line, for external histogram tooling.
pub fn noise_csv(samples: &[NoiseSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&s.0.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{chi_square_goodness_of_fit, chi_square_uniformity};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

    #[test]
    fn params_validation() {
        LweParams::default().validate().unwrap();
        assert!(LweParams::new(0, 12289, 3.2).is_err());
        assert!(LweParams::new(32, 12288, 3.2).is_err());
        assert!(LweParams::new(32, 25, 3.2).is_err());
        assert!(LweParams::new(32, 27, 3.2).is_ok());
        assert_eq!(LweParams::default().ciphertext_bytes(), 33 * 2);
    }

    #[test]
    fn smallest_dimension_and_determinism() {
        let p = LweParams::new(1, 97, 1.0).unwrap();
        let k = keygen(p, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        assert_eq!(k.coefficients().len(), 1);
        let k2 = keygen(p, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        assert_eq!(k, k2);
    }

    #[test]
    fn default_keygen_is_fast() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let start = std::time::Instant::now();
        keygen(LweParams::default(), &mut rng).unwrap();
        assert!(start.elapsed() < std::time::Duration::from_millis(1));
    }

    #[test]
    fn zero_noise_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let k = keygen(LweParams::default(), &mut rng).unwrap();
        for m in [0u8, 1] {
            let ct = k.encrypt_with_noise(m, NoiseSample(0), &mut rng).unwrap();
            assert_eq!(k.decrypt(&ct).unwrap(), m);
            assert_eq!(k.extract_bit(&ct).unwrap(), 0);
        }
    }

    #[test]
    fn quarter_boundary_decodes_to_zero() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let k = keygen(LweParams::default(), &mut rng).unwrap();
        let quarter = (12289 / 4) as i64; // 3072, 4·3072 < q
        let ct = k.encrypt_with_noise(0, NoiseSample(quarter), &mut rng).unwrap();
        assert_eq!(k.decrypt(&ct).unwrap(), 0);
        let ct = k.encrypt_with_noise(0, NoiseSample(quarter + 1), &mut rng).unwrap();
        assert_eq!(k.decrypt(&ct).unwrap(), 1);
        // With q divisible by 4 the tie is exact and still rounds to 0.
        let even = LweSecretKey {
            params: LweParams { n: 1, q: 16, sigma: 1.0 },
            s: vec![0],
        };
        let ct = even.assemble(vec![0], 0, NoiseSample(4));
        assert_eq!(even.decrypt(&ct).unwrap(), 0);
    }

    #[test]
    fn monte_carlo_roundtrip_and_extraction() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let k = keygen(LweParams::default(), &mut rng).unwrap();
        let mut failures = 0;
        for i in 0..10_000u32 {
            let m = (i % 2) as u8;
            let payload = ((i / 2) % 2) as u8;
            let (ct, _) = k.encrypt(m, &mut rng).unwrap();
            failures += usize::from(k.decrypt(&ct).unwrap() != m);
            let e = k.embed_bit(m, payload, &mut rng).unwrap();
            assert_eq!(k.decrypt(&e.ciphertext).unwrap(), m);
            assert_eq!(k.extract_bit(&e.ciphertext).unwrap(), payload);
            assert_eq!(k.recover_noise(&e.ciphertext).unwrap(), e.noise);
        }
        assert_eq!(failures, 0);
    }

    #[test]
    fn noise_follows_rounded_gaussian() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let k = keygen(LweParams::default(), &mut rng).unwrap();
        let noise: Vec<i64> = (0..10_000).map(|_| k.sample_noise(&mut rng).0).collect();
        // Cells: (-inf,-7], -6..=6, [7,inf)
        let normal = StatNormal::new(0.0, 3.2).unwrap();
        let mut expected = vec![normal.cdf(-6.5)];
        for j in -6..=6 {
            expected.push(normal.cdf(j as f64 + 0.5) - normal.cdf(j as f64 - 0.5));
        }
        expected.push(1.0 - normal.cdf(6.5));
        let mut observed = vec![0u64; 15];
        for e in noise {
            observed[(e.clamp(-7, 7) + 7) as usize] += 1;
        }
        let r = chi_square_goodness_of_fit(&observed, &expected).unwrap();
        assert!(r.p_value > 0.01, "{r:?}");
    }

    #[test]
    fn extraction_from_plain_ciphertexts_is_balanced() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let k = keygen(LweParams::default(), &mut rng).unwrap();
        let bits: Vec<u64> = (0..10_000)
            .map(|_| k.extract_bit(&k.encrypt(0, &mut rng).unwrap().0).unwrap() as u64)
            .collect();
        assert!(chi_square_uniformity::<f64>(&bits, 2, 2).unwrap().p_value > 0.01);
    }

    #[test]
    fn first_draw_parity_match_equals_plain_encryption() {
        let k = keygen(LweParams::default(), &mut ChaCha20Rng::seed_from_u64(8)).unwrap();
        // Same stream: a first, then the noise draw.
        let mut r1 = ChaCha20Rng::seed_from_u64(80);
        let mut probe = ChaCha20Rng::seed_from_u64(80);
        let a: Vec<u32> = (0..32).map(|_| probe.gen_range(0..12289)).collect();
        let first = k.sample_noise(&mut probe);
        let payload = first.0.rem_euclid(2) as u8;
        let e = k.embed_bit(1, payload, &mut r1).unwrap();
        assert_eq!(e.draws, 1);
        assert_eq!(e.noise, first);
        assert_eq!(e.ciphertext, k.assemble(a, 1, first));
    }

    #[test]
    fn constant_payload_empties_one_parity_class() {
        use crate::stats::Histogram;
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let k = keygen(LweParams::default(), &mut rng).unwrap();
        let plain: Vec<f64> = (0..10_000).map(|_| k.encrypt(0, &mut rng).unwrap().1 .0 as f64).collect();
        let stego: Vec<f64> = (0..10_000)
            .map(|_| k.embed_bit(0, 0, &mut rng).unwrap().noise.0 as f64)
            .collect();
        let hp = Histogram::<f64>::integer(-16, 16).unwrap().with_samples(&plain);
        let hs = Histogram::<f64>::integer(-16, 16).unwrap().with_samples(&stego);
        assert!(hs.empty_bins() >= 2 * hp.empty_bins().max(1), "{} vs {}", hs.empty_bins(), hp.empty_bins());
    }

    #[test]
    fn ciphertext_record_shape() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let k = keygen(LweParams::new(2, 97, 1.0).unwrap(), &mut rng).unwrap();
        let (ct, _) = k.encrypt(1, &mut rng).unwrap();
        let js = serde_json::to_value(&ct).unwrap();
        assert_eq!(js["params"], serde_json::json!({"n": 2, "q": 97}));
        assert_eq!(js["a"].as_array().unwrap().len(), 2);
        let sk = serde_json::to_value(&k).unwrap();
        assert_eq!(sk["kind"], "lwe-sk");
        let back: LweSecretKey = serde_json::from_value(sk).unwrap();
        assert_eq!(back, k);
        assert_eq!(noise_csv(&[NoiseSample(-3), NoiseSample(2)]), "-3\n2\n");
    }
}
