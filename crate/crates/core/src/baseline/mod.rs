// SPDX-License-Identifier: Apache-2.0

//! Deliberately flawed schemes that anchor the low rungs of the security
//! ladder.

pub mod de;
pub mod expansion;
pub mod image;

use thiserror::Error;

use crate::paillier::PaillierError;
use de::PixelPair;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BaselineError {
    #[error("pair ({}, {}) is not expandable", .0.x, .0.y)]
    NotExpandable(PixelPair),
    #[error("payload needs {needed} expandable pairs, only {available} available")]
    CapacityExceeded { needed: usize, available: usize },
    #[error("decrypted payload at index {index} is out of range")]
    PayloadCorruption { index: usize },
    #[error(transparent)]
    Paillier(#[from] PaillierError),
}
