// SPDX-License-Identifier: Apache-2.0

//! Expansion embedding: the cover ciphertexts are left alone and every
//! payload bit is appended as its own encryption. Trivially detectable from
//! the size of the record alone.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::paillier::{PaillierCiphertext, PaillierPublicKey, PaillierSecretKey};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionStego {
    pub original: Vec<PaillierCiphertext>,
    pub appendix: Vec<PaillierCiphertext>,
}

impl ExpansionStego {
    pub fn records(&self) -> usize {
        self.original.len() + self.appendix.len()
    }

    /// Canonical size in bytes under `pk`'s fixed ciphertext width.
    pub fn serialized_size(&self, pk: &PaillierPublicKey) -> usize {
        self.records() * pk.ciphertext_width()
    }
}

pub fn expansion_embed<R: RngCore + ?Sized>(
    pk: &PaillierPublicKey,
    covers: &[PaillierCiphertext],
    bits: &[bool],
    rng: &mut R,
) -> Result<ExpansionStego, BaselineError> {
    let appendix = bits
        .iter()
        .map(|&b| Ok(pk.encrypt_with_rng(&BigUint::from(u8::from(b)), rng)?.0))
        .collect::<Result<Vec<_>, BaselineError>>()?;
    Ok(ExpansionStego {
        original: covers.to_vec(),
        appendix,
    })
}

pub fn expansion_extract(
    sk: &PaillierSecretKey,
    pk: &PaillierPublicKey,
    stego: &ExpansionStego,
) -> Result<Vec<bool>, BaselineError> {
    stego
        .appendix
        .iter()
        .enumerate()
        .map(|(index, c)| {
            let m = sk.decrypt(pk, c)?;
            if m.is_zero() {
                Ok(false)
            } else if m.is_one() {
                Ok(true)
            } else {
                Err(BaselineError::PayloadCorruption { index })
            }
        })
        .collect()
}
