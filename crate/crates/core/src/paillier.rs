// SPDX-License-Identifier: Apache-2.0

//! Paillier cryptosystem over arbitrary-precision integers.
//!
//! Decryption uses the Carmichael exponent: `m = L(c^λ mod N²) · μ mod N`
//! with `μ = L(g^λ mod N²)^-1 mod N` precomputed at key generation.

use std::fmt;
use std::ops::AddAssign;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::hex_biguint;
use crate::primes::{lcm, mod_inverse, random_prime};

/// Candidate draws per prime before key generation gives up.
const PRIME_DRAWS_PER_BIT: usize = 64;
/// Prime-pair redraws when the pair is equal or `gcd(N, φ(N)) ≠ 1`.
const MAX_PAIR_ATTEMPTS: usize = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PaillierError {
    #[error("prime generation failed after {draws} candidate draws at {bits} bits")]
    PrimeGenerationFailure { bits: u64, draws: usize },
    #[error("prime size must be at least 3 bits, got {0}")]
    PrimeBitsTooSmall(u64),
    #[error("L function input is not congruent to 1 modulo N")]
    NonDivisibleInput,
    #[error("plaintext is outside [0, N)")]
    PlaintextOutOfRange,
    #[error("randomness must lie in [1, N) and be coprime to N")]
    BadRandomness,
    #[error("malformed ciphertext: {0}")]
    MalformedCiphertext(&'static str),
    #[error("invalid key: {0}")]
    InvalidKey(&'static str),
}

pub type Result<T> = std::result::Result<T, PaillierError>;

/// `K₁ = (N, g)`.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PublicKeyRecord", into = "PublicKeyRecord")]
pub struct PaillierPublicKey {
    n: BigUint,
    g: BigUint,
    n_squared: BigUint,
}

/// `K₂ = (p, q, λ)` plus the precomputed `μ`.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SecretKeyRecord", into = "SecretKeyRecord")]
pub struct PaillierSecretKey {
    p: BigUint,
    q: BigUint,
    lambda: BigUint,
    mu: BigUint,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PaillierCiphertext {
    #[serde(rename = "c", with = "hex_biguint")]
    value: BigUint,
}

/// The encryption process variable `r ∈ Z*_N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Randomness(BigUint);

/// Operation counts reported by decryption. Used to check that embedding does
/// not change the receiver's decryption workload.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecryptionCost {
    pub modexp: u64,
    pub modmul: u64,
    pub l_eval: u64,
}

impl DecryptionCost {
    pub fn total(&self) -> u64 {
        self.modexp + self.modmul + self.l_eval
    }
}

impl AddAssign for DecryptionCost {
    fn add_assign(&mut self, rhs: Self) {
        self.modexp += rhs.modexp;
        self.modmul += rhs.modmul;
        self.l_eval += rhs.l_eval;
    }
}

/// `L(x) = (x − 1) / N`, defined only when the division is exact.
pub fn l_function(x: &BigUint, n: &BigUint) -> Result<BigUint> {
    if x.is_zero() {
        return Err(PaillierError::NonDivisibleInput);
    }
    let (quot, rem) = (x - 1u32).div_rem(n);
    if !rem.is_zero() {
        return Err(PaillierError::NonDivisibleInput);
    }
    Ok(quot)
}

/// Generate a keypair from two random `prime_bits`-bit primes with `g = N + 1`.
pub fn keygen<R: RngCore + ?Sized>(
    prime_bits: u64,
    rng: &mut R,
) -> Result<(PaillierPublicKey, PaillierSecretKey)> {
    if prime_bits < 3 {
        return Err(PaillierError::PrimeBitsTooSmall(prime_bits));
    }
    let draws = PRIME_DRAWS_PER_BIT * prime_bits as usize;
    let fail = PaillierError::PrimeGenerationFailure {
        bits: prime_bits,
        draws,
    };
    for _ in 0..MAX_PAIR_ATTEMPTS {
        let p = random_prime(prime_bits, draws, rng).ok_or_else(|| fail.clone())?;
        let q = random_prime(prime_bits, draws, rng).ok_or_else(|| fail.clone())?;
        if p == q {
            continue;
        }
        match keypair_from_primes(&p, &q, None) {
            Ok(pair) => return Ok(pair),
            Err(PaillierError::InvalidKey(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(fail)
}

/// Build a keypair from known primes. `g` defaults to `N + 1`.
pub fn keypair_from_primes(
    p: &BigUint,
    q: &BigUint,
    g: Option<BigUint>,
) -> Result<(PaillierPublicKey, PaillierSecretKey)> {
    let (p, q) = if p <= q { (p, q) } else { (q, p) };
    if p == q {
        return Err(PaillierError::InvalidKey("p and q must be distinct"));
    }
    let two = BigUint::from(2u32);
    if p <= &two || p.is_even() || q.is_even() {
        return Err(PaillierError::InvalidKey("p and q must be odd primes"));
    }
    let n = p * q;
    let one = BigUint::one();
    let phi = (p - &one) * (q - &one);
    if !n.gcd(&phi).is_one() {
        return Err(PaillierError::InvalidKey("gcd(N, φ(N)) ≠ 1"));
    }
    let lambda = lcm(&(p - &one), &(q - &one));
    let n_squared = &n * &n;
    let g = g.unwrap_or_else(|| &n + &one);
    if g.is_zero() || g >= n_squared || !g.gcd(&n_squared).is_one() {
        return Err(PaillierError::InvalidKey("g is not a unit modulo N²"));
    }
    let u = l_function(&g.modpow(&lambda, &n_squared), &n)
        .map_err(|_| PaillierError::InvalidKey("g^λ mod N² is not 1 mod N"))?;
    let mu = mod_inverse(&u, &n)
        .ok_or(PaillierError::InvalidKey("gcd(L(g^λ mod N²), N) ≠ 1"))?;
    Ok((
        PaillierPublicKey { n, g, n_squared },
        PaillierSecretKey {
            p: p.clone(),
            q: q.clone(),
            lambda,
            mu,
        },
    ))
}

impl PaillierPublicKey {
    pub fn new(n: BigUint, g: BigUint) -> Result<Self> {
        if n < BigUint::from(15u32) || n.is_even() {
            return Err(PaillierError::InvalidKey("N must be an odd composite ≥ 15"));
        }
        let n_squared = &n * &n;
        if g.is_zero() || g >= n_squared || !g.gcd(&n_squared).is_one() {
            return Err(PaillierError::InvalidKey("g is not a unit modulo N²"));
        }
        Ok(Self { n, g, n_squared })
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_squared
    }

    /// Bit length of `N²`; valid EVR positions lie below it.
    pub fn ciphertext_bits(&self) -> u64 {
        self.n_squared.bits()
    }

    /// Width in bytes of the canonical fixed-width ciphertext encoding.
    pub fn ciphertext_width(&self) -> usize {
        self.ciphertext_bits().div_ceil(8) as usize
    }

    /// Wrap and validate a raw ciphertext value.
    pub fn ciphertext(&self, value: BigUint) -> Result<PaillierCiphertext> {
        let c = PaillierCiphertext { value };
        self.check_ciphertext(&c)?;
        Ok(c)
    }

    pub fn check_ciphertext(&self, c: &PaillierCiphertext) -> Result<()> {
        if c.value.is_zero() || c.value >= self.n_squared {
            return Err(PaillierError::MalformedCiphertext("value outside [1, N²)"));
        }
        if !c.value.gcd(&self.n_squared).is_one() {
            return Err(PaillierError::MalformedCiphertext("value is not a unit modulo N²"));
        }
        Ok(())
    }

    pub fn randomness(&self, r: BigUint) -> Result<Randomness> {
        if r.is_zero() || r >= self.n || !r.gcd(&self.n).is_one() {
            return Err(PaillierError::BadRandomness);
        }
        Ok(Randomness(r))
    }

    /// Uniform draw from `Z*_N` by rejection.
    pub fn sample_randomness<R: RngCore + ?Sized>(&self, rng: &mut R) -> Randomness {
        let one = BigUint::one();
        loop {
            let r = rng.gen_biguint_range(&one, &self.n);
            if r.gcd(&self.n).is_one() {
                return Randomness(r);
            }
        }
    }

    /// Uniform plaintext in `[0, N)`.
    pub fn sample_plaintext<R: RngCore + ?Sized>(&self, rng: &mut R) -> BigUint {
        rng.gen_biguint_below(&self.n)
    }

    /// `c = g^m · r^N mod N²`.
    pub fn encrypt(&self, m: &BigUint, r: &Randomness) -> Result<PaillierCiphertext> {
        if m >= &self.n {
            return Err(PaillierError::PlaintextOutOfRange);
        }
        if r.0.is_zero() || r.0 >= self.n {
            return Err(PaillierError::BadRandomness);
        }
        let gm = self.g_pow(m);
        let rn = r.0.modpow(&self.n, &self.n_squared);
        Ok(PaillierCiphertext {
            value: (gm * rn) % &self.n_squared,
        })
    }

    pub fn encrypt_with_rng<R: RngCore + ?Sized>(
        &self,
        m: &BigUint,
        rng: &mut R,
    ) -> Result<(PaillierCiphertext, Randomness)> {
        let r = self.sample_randomness(rng);
        let c = self.encrypt(m, &r)?;
        Ok((c, r))
    }

    /// `c' = c · s^N mod N²`: same plaintext, hidden randomness multiplied by `s`.
    pub fn rerandomize(&self, c: &PaillierCiphertext, s: &Randomness) -> Result<PaillierCiphertext> {
        if s.0.is_zero() || s.0 >= self.n {
            return Err(PaillierError::BadRandomness);
        }
        self.check_ciphertext(c)?;
        let sn = s.0.modpow(&self.n, &self.n_squared);
        Ok(PaillierCiphertext {
            value: (&c.value * sn) % &self.n_squared,
        })
    }

    /// Ciphertext product; decrypts to the sum of the plaintexts mod N.
    pub fn add(&self, a: &PaillierCiphertext, b: &PaillierCiphertext) -> PaillierCiphertext {
        PaillierCiphertext {
            value: (&a.value * &b.value) % &self.n_squared,
        }
    }

    /// Big-endian bytes left-padded to [`Self::ciphertext_width`].
    pub fn canonical_bytes(&self, c: &PaillierCiphertext) -> Vec<u8> {
        let width = self.ciphertext_width();
        let raw = c.value.to_bytes_be();
        let mut out = vec![0u8; width.saturating_sub(raw.len())];
        out.extend_from_slice(&raw);
        out
    }

    fn g_pow(&self, m: &BigUint) -> BigUint {
        // (N + 1)^m = 1 + mN mod N².
        if self.g == &self.n + 1u32 {
            (BigUint::one() + m * &self.n) % &self.n_squared
        } else {
            self.g.modpow(m, &self.n_squared)
        }
    }
}

impl PaillierSecretKey {
    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn lambda(&self) -> &BigUint {
        &self.lambda
    }

    pub fn mu(&self) -> &BigUint {
        &self.mu
    }

    pub fn decrypt(&self, pk: &PaillierPublicKey, c: &PaillierCiphertext) -> Result<BigUint> {
        let mut cost = DecryptionCost::default();
        self.decrypt_counted(pk, c, &mut cost)
    }

    /// Decrypt and accumulate the operation counts into `cost`.
    pub fn decrypt_counted(
        &self,
        pk: &PaillierPublicKey,
        c: &PaillierCiphertext,
        cost: &mut DecryptionCost,
    ) -> Result<BigUint> {
        pk.check_ciphertext(c)?;
        let u = c.value.modpow(&self.lambda, &pk.n_squared);
        let l = l_function(&u, &pk.n)
            .map_err(|_| PaillierError::MalformedCiphertext("L function not exact"))?;
        *cost += DecryptionCost {
            modexp: 1,
            modmul: 1,
            l_eval: 1,
        };
        Ok((l * &self.mu) % &pk.n)
    }

    /// Recover the encryption randomness `r` from a ciphertext: with `m` known,
    /// `c · g^-m ≡ r^N (mod N)` and `r = (r^N)^(N^-1 mod φ(N)) mod N`.
    pub fn recover_randomness(
        &self,
        pk: &PaillierPublicKey,
        c: &PaillierCiphertext,
    ) -> Result<Randomness> {
        pk.check_ciphertext(c)?;
        let one = BigUint::one();
        let phi = (&self.p - &one) * (&self.q - &one);
        let d = mod_inverse(&pk.n, &phi).ok_or(PaillierError::InvalidKey("gcd(N, φ(N)) ≠ 1"))?;
        let c_mod_n = &c.value % &pk.n;
        // (N + 1)^m ≡ 1 (mod N).
        let rn = if pk.g == &pk.n + 1u32 {
            c_mod_n
        } else {
            let m = self.decrypt(pk, c)?;
            let gm = pk.g.modpow(&m, &pk.n);
            let gm_inv = mod_inverse(&gm, &pk.n)
                .ok_or(PaillierError::InvalidKey("g is not a unit modulo N"))?;
            c_mod_n * gm_inv % &pk.n
        };
        Ok(Randomness(rn.modpow(&d, &pk.n)))
    }

    /// Check every key invariant against `pk`.
    pub fn validate(&self, pk: &PaillierPublicKey) -> Result<()> {
        let one = BigUint::one();
        if &self.p * &self.q != pk.n {
            return Err(PaillierError::InvalidKey("N ≠ p·q"));
        }
        if self.p == self.q {
            return Err(PaillierError::InvalidKey("p and q must be distinct"));
        }
        if self.lambda != lcm(&(&self.p - &one), &(&self.q - &one)) {
            return Err(PaillierError::InvalidKey("λ ≠ lcm(p−1, q−1)"));
        }
        let u = l_function(&pk.g.modpow(&self.lambda, &pk.n_squared), &pk.n)
            .map_err(|_| PaillierError::InvalidKey("g^λ mod N² is not 1 mod N"))?;
        if !u.gcd(&pk.n).is_one() {
            return Err(PaillierError::InvalidKey("gcd(L(g^λ mod N²), N) ≠ 1"));
        }
        if (&self.mu * &u) % &pk.n != one {
            return Err(PaillierError::InvalidKey("μ·L(g^λ mod N²) ≢ 1 (mod N)"));
        }
        Ok(())
    }
}

impl PaillierCiphertext {
    pub fn value(&self) -> &BigUint {
        &self.value
    }

    /// Unchecked constructor; validate against a key with
    /// [`PaillierPublicKey::check_ciphertext`].
    pub fn from_raw(value: BigUint) -> Self {
        Self { value }
    }

    pub fn bit(&self, index: u64) -> bool {
        self.value.bit(index)
    }
}

impl Randomness {
    pub fn value(&self) -> &BigUint {
        &self.0
    }
}

impl fmt::Debug for PaillierPublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PaillierPublicKey")
            .field("n_bits", &self.n.bits())
            .finish()
    }
}

impl fmt::Debug for PaillierSecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PaillierSecretKey { .. }")
    }
}

const RECORD_VERSION: u32 = 1;

fn default_version() -> u32 {
    RECORD_VERSION
}

#[derive(Serialize, Deserialize)]
struct PublicKeyRecord {
    kind: String,
    #[serde(default = "default_version")]
    version: u32,
    #[serde(rename = "N", with = "hex_biguint")]
    n: BigUint,
    #[serde(with = "hex_biguint")]
    g: BigUint,
}

impl From<PaillierPublicKey> for PublicKeyRecord {
    fn from(pk: PaillierPublicKey) -> Self {
        Self {
            kind: "paillier-pk".into(),
            version: RECORD_VERSION,
            n: pk.n,
            g: pk.g,
        }
    }
}

impl TryFrom<PublicKeyRecord> for PaillierPublicKey {
    type Error = String;

    fn try_from(rec: PublicKeyRecord) -> std::result::Result<Self, String> {
        if rec.kind != "paillier-pk" {
            return Err(format!("expected kind \"paillier-pk\", found {:?}", rec.kind));
        }
        if rec.version != RECORD_VERSION {
            return Err(format!("unsupported key record version {}", rec.version));
        }
        PaillierPublicKey::new(rec.n, rec.g).map_err(|e| e.to_string())
    }
}

#[derive(Serialize, Deserialize)]
struct SecretKeyRecord {
    kind: String,
    #[serde(default = "default_version")]
    version: u32,
    #[serde(with = "hex_biguint")]
    p: BigUint,
    #[serde(with = "hex_biguint")]
    q: BigUint,
    #[serde(with = "hex_biguint")]
    lambda: BigUint,
    #[serde(with = "hex_biguint")]
    mu: BigUint,
}

impl From<PaillierSecretKey> for SecretKeyRecord {
    fn from(sk: PaillierSecretKey) -> Self {
        Self {
            kind: "paillier-sk".into(),
            version: RECORD_VERSION,
            p: sk.p,
            q: sk.q,
            lambda: sk.lambda,
            mu: sk.mu,
        }
    }
}

impl TryFrom<SecretKeyRecord> for PaillierSecretKey {
    type Error = String;

    fn try_from(rec: SecretKeyRecord) -> std::result::Result<Self, String> {
        if rec.kind != "paillier-sk" {
            return Err(format!("expected kind \"paillier-sk\", found {:?}", rec.kind));
        }
        if rec.version != RECORD_VERSION {
            return Err(format!("unsupported key record version {}", rec.version));
        }
        let one = BigUint::one();
        if rec.p.is_zero() || rec.q.is_zero() {
            return Err("p and q must be positive".into());
        }
        if rec.lambda != lcm(&(&rec.p - &one), &(&rec.q - &one)) {
            return Err("lambda ≠ lcm(p−1, q−1)".into());
        }
        Ok(Self {
            p: rec.p,
            q: rec.q,
            lambda: rec.lambda,
            mu: rec.mu,
        })
    }
}
