// SPDX-License-Identifier: Apache-2.0

//! Steganography in the encrypted domain.
//!
//! [`evr`] embeds bits into Paillier ciphertexts by re-randomizing until a
//! chosen bit pattern of the ciphertext appears. [`baseline`] and [`lwe`]
//! hold the comparison schemes, [`framework`] ties keys, covers and bundles
//! together, and [`harness`] grades each scheme against the attack ladder.
//!
//! The statistics layer is generic over the float type; the aliases below
//! fix it to `f64`, which is what the harness uses.

pub mod codec;
pub mod evr;
pub mod lwe;
pub mod paillier;
pub mod primes;
pub mod stats;
pub mod baseline;
pub mod framework;
pub mod harness;

pub type Histogram = stats::Histogram<f64>;
pub type ChiSquare = stats::ChiSquare<f64>;
pub type KolmogorovSmirnov = stats::KolmogorovSmirnov<f64>;
pub type Psnr = stats::Psnr<f64>;
pub type Fidelity = stats::Fidelity<f64>;

pub use framework::{SchemeDescriptor, SchemeName, SecurityLevel, SiedMode, StegoBundle};
pub use harness::{grade_security, HarnessConfig, SecurityGrade};
