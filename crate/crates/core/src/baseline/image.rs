// SPDX-License-Identifier: Apache-2.0

//! 8-bit grayscale images, binary PGM I/O and the synthetic test corpus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use super::de::PixelPair;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PgmError {
    #[error("not a binary PGM (P5) file")]
    BadMagic,
    #[error("malformed PGM header")]
    BadHeader,
    #[error("only 8-bit PGM (maxval 255) is supported, found maxval {0}")]
    UnsupportedDepth(u32),
    #[error("PGM raster truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub samples: Vec<u8>,
}

impl GrayImage {
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            samples,
        }
    }

    /// Adjacent samples paired in row-major order. A trailing odd sample is
    /// left out.
    pub fn pairs(&self) -> Vec<PixelPair> {
        pairs_from_samples(&self.samples)
    }

    pub fn with_pairs(&self, pairs: &[PixelPair]) -> Self {
        let mut out = self.clone();
        for (i, p) in pairs.iter().enumerate() {
            out.samples[2 * i] = p.x;
            out.samples[2 * i + 1] = p.y;
        }
        out
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.samples);
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self, PgmError> {
        let mut pos = 0usize;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            // Skip whitespace and comments.
            while pos < bytes.len() {
                match bytes[pos] {
                    b'#' => {
                        while pos < bytes.len() && bytes[pos] != b'\n' {
                            pos += 1;
                        }
                    }
                    b if b.is_ascii_whitespace() => pos += 1,
                    _ => break,
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(PgmError::BadHeader);
            }
            fields.push(&bytes[start..pos]);
        }
        if fields[0] != b"P5" {
            return Err(PgmError::BadMagic);
        }
        let num = |f: &[u8]| -> Result<usize, PgmError> {
            std::str::from_utf8(f)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or(PgmError::BadHeader)
        };
        let width = num(fields[1])?;
        let height = num(fields[2])?;
        let maxval = num(fields[3])?;
        if maxval != 255 {
            return Err(PgmError::UnsupportedDepth(maxval as u32));
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let expected = width * height;
        let raster = bytes.get(pos..).unwrap_or(&[]);
        if raster.len() < expected {
            return Err(PgmError::Truncated {
                expected,
                found: raster.len(),
            });
        }
        Ok(Self {
            width,
            height,
            samples: raster[..expected].to_vec(),
        })
    }
}

pub fn pairs_from_samples(samples: &[u8]) -> Vec<PixelPair> {
    samples
        .chunks_exact(2)
        .map(|c| PixelPair { x: c[0], y: c[1] })
        .collect()
}

pub const CORPUS_SIDE: usize = 64;
const CORPUS_NOISE_SEED: u64 = 0x5eed_c0de;

/// Two smooth gradients and two uniform-noise images, 64×64 each. The noise
/// images come from a fixed internal seed, so the corpus never changes.
pub fn default_corpus() -> Vec<GrayImage> {
    let n = CORPUS_SIDE;
    let vertical = GrayImage::from_fn(n, n, |_, y| (4 * y) as u8);
    let diagonal = GrayImage::from_fn(n, n, |x, y| (x + 2 * y) as u8);
    let mut rng = ChaCha20Rng::seed_from_u64(CORPUS_NOISE_SEED);
    let mut noise = || {
        let samples: Vec<u8> = (0..n * n).map(|_| rng.gen()).collect();
        GrayImage {
            width: n,
            height: n,
            samples,
        }
    };
    let noise_a = noise();
    let noise_b = noise();
    vec![vertical, diagonal, noise_a, noise_b]
}
