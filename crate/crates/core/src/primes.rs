// SPDX-License-Identifier: Apache-2.0

//! Probable-prime generation: small-prime trial division followed by
//! Miller-Rabin with random bases.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;

/// 40 random-base rounds bound the false-positive rate by 4^-40 = 2^-80.
pub const MILLER_RABIN_ROUNDS: usize = 40;

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

pub fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rng: &mut R) -> bool {
    if let Some(small) = n.to_u32() {
        if small < 2 {
            return false;
        }
        if SMALL_PRIMES.contains(&small) {
            return true;
        }
    }
    for &sp in SMALL_PRIMES.iter() {
        if (n % sp).is_zero() {
            return false;
        }
    }
    // n > 251 and odd from here on.
    let one = BigUint::one();
    let n_minus_one = n - &one;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;
    let two = BigUint::from(2u32);
    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let a = rng.gen_biguint_range(&two, &n_minus_one);
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
            if x == one {
                return false;
            }
        }
        return false;
    }
    true
}

/// Draw an odd candidate with its top bit set and test it. Returns `None` when
/// `max_draws` candidates all fail.
pub fn random_prime<R: RngCore + ?Sized>(
    bits: u64,
    max_draws: usize,
    rng: &mut R,
) -> Option<BigUint> {
    assert!(bits >= 2, "primes need at least two bits");
    for _ in 0..max_draws {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(0, true);
        if is_probable_prime(&candidate, rng) {
            return Some(candidate);
        }
    }
    None
}

pub fn lcm(a: &BigUint, b: &BigUint) -> BigUint {
    a.lcm(b)
}

/// Modular inverse via the extended Euclidean algorithm on signed integers.
pub fn mod_inverse(a: &BigUint, modulus: &BigUint) -> Option<BigUint> {
    use num_bigint::BigInt;
    let m = BigInt::from(modulus.clone());
    let g = BigInt::from(a % modulus).extended_gcd(&m);
    if !g.gcd.is_one() {
        return None;
    }
    let x = g.x.mod_floor(&m);
    x.to_biguint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn naive_prime(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
    }

    #[test]
    fn agrees_with_trial_division_below_20000() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for n in 0u64..20_000 {
            assert_eq!(
                is_probable_prime(&BigUint::from(n), &mut rng),
                naive_prime(n),
                "n = {n}"
            );
        }
    }

    #[test]
    fn rejects_carmichael_numbers() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for n in [561u64, 1105, 1729, 2465, 2821, 6601, 8911, 41041, 825265] {
            assert!(!is_probable_prime(&BigUint::from(n), &mut rng));
        }
    }

    #[test]
    fn three_bit_primes_are_five_or_seven() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = random_prime(3, 100, &mut rng).unwrap();
            assert!(p == BigUint::from(5u32) || p == BigUint::from(7u32));
        }
    }

    #[test]
    fn inverse_and_lcm() {
        let n = BigUint::from(35u32);
        assert_eq!(mod_inverse(&BigUint::from(12u32), &n), Some(BigUint::from(3u32)));
        assert_eq!(mod_inverse(&BigUint::from(7u32), &n), None);
        assert_eq!(lcm(&BigUint::from(4u32), &BigUint::from(6u32)), BigUint::from(12u32));
    }
}
