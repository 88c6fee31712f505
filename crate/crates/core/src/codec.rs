// SPDX-License-Identifier: Apache-2.0

//! Hex encodings shared by the key, ciphertext and message records.

use num_bigint::BigUint;
use num_traits::Num;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("invalid hexadecimal string: {0:?}")]
    BadHex(String),
    #[error("hex string carries {available} bits but {requested} were declared")]
    BitCountOverflow { requested: usize, available: usize },
}

/// Lowercase hexadecimal, no prefix, no padding. Zero is `"0"`.
pub fn biguint_to_hex(v: &BigUint) -> String {
    v.to_str_radix(16)
}

pub fn biguint_from_hex(s: &str) -> Result<BigUint, CodecError> {
    let t = s.trim();
    let t = t.strip_prefix("0x").unwrap_or(t);
    if t.is_empty() || !t.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(CodecError::BadHex(s.to_string()));
    }
    BigUint::from_str_radix(t, 16).map_err(|_| CodecError::BadHex(s.to_string()))
}

/// serde adapter for `BigUint` fields stored as hex strings.
pub mod hex_biguint {
    use super::*;

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        biguint_to_hex(v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        biguint_from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// A bit string with an explicit length. Bits are packed most-significant-first
/// into the hex form, so `"a0"` with 3 bits is `[1, 0, 1]`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct BitString(pub Vec<bool>);

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(self.0.len().div_ceil(4));
        for chunk in self.0.chunks(4) {
            let mut nibble = 0u8;
            for (i, &b) in chunk.iter().enumerate() {
                if b {
                    nibble |= 1 << (3 - i);
                }
            }
            out.push(char::from_digit(nibble as u32, 16).unwrap());
        }
        out
    }

    pub fn from_hex(hex: &str, bit_count: usize) -> Result<Self, CodecError> {
        let hex = hex.trim();
        if !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(CodecError::BadHex(hex.to_string()));
        }
        let available = hex.len() * 4;
        if bit_count > available {
            return Err(CodecError::BitCountOverflow {
                requested: bit_count,
                available,
            });
        }
        let mut bits = Vec::with_capacity(bit_count);
        for c in hex.chars() {
            let v = c.to_digit(16).unwrap();
            for i in (0..4).rev() {
                bits.push((v >> i) & 1 == 1);
            }
        }
        bits.truncate(bit_count);
        Ok(Self(bits))
    }
}

impl From<Vec<bool>> for BitString {
    fn from(v: Vec<bool>) -> Self {
        Self(v)
    }
}

#[derive(Serialize, Deserialize)]
struct BitStringRecord {
    bits: usize,
    hex: String,
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        BitStringRecord {
            bits: self.len(),
            hex: self.to_hex(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rec = BitStringRecord::deserialize(d)?;
        BitString::from_hex(&rec.hex, rec.bits).map_err(serde::de::Error::custom)
    }
}
