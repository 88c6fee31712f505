// SPDX-License-Identifier: Apache-2.0

//! Distribution distances and hypothesis tests used by the steganalysis
//! harness. Everything here is generic over the floating-point scalar; the
//! crate root exposes `f64` aliases.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Floating-point scalar accepted by the statistics routines.
pub trait Real: Float + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static {
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }
}

impl<T> Real for T where T: Float + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static {}

/// Pseudo-count substituted for empty bins before normalizing.
pub const KL_SMOOTHING: f64 = 0.5;
/// Minimum expected count per bin for the chi-square approximation.
pub const MIN_EXPECTED_PER_BIN: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("histograms use different binning")]
    BinningMismatch,
    #[error("insufficient samples: expected count {expected:.3} in some bin, need at least {required}")]
    InsufficientSamples { expected: f64, required: f64 },
    #[error("empty sample")]
    EmptySample,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid binning: {0}")]
    InvalidBinning(&'static str),
    #[error("sample {value} outside the domain [0, {domain})")]
    OutOfDomain { value: u64, domain: u64 },
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// Counts over contiguous bins `[edges[i], edges[i+1])`. Samples below the
/// first edge or at/after the last one are clamped into the end bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram<F> {
    edges: Vec<F>,
    counts: Vec<u64>,
}

impl<F: Real> Histogram<F> {
    pub fn new(edges: Vec<F>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(StatsError::InvalidBinning("need at least one bin"));
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(StatsError::InvalidBinning("edges must be strictly increasing"));
        }
        let bins = edges.len() - 1;
        Ok(Self {
            edges,
            counts: vec![0; bins],
        })
    }

    /// `bins` equal-width bins over `[lo, hi)`.
    pub fn uniform(lo: F, hi: F, bins: usize) -> Result<Self> {
        if bins == 0 || !(lo < hi) {
            return Err(StatsError::InvalidBinning("need lo < hi and bins > 0"));
        }
        let width = (hi - lo) / F::from_usize(bins).unwrap();
        let edges = (0..=bins)
            .map(|i| lo + width * F::from_usize(i).unwrap())
            .collect();
        Self::new(edges)
    }

    /// One unit-width bin per integer in `lo..=hi`, centered on the integer.
    pub fn integer(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(StatsError::InvalidBinning("need lo <= hi"));
        }
        let half = F::lit(0.5);
        let edges = (lo..=hi + 1)
            .map(|k| F::from_i64(k).unwrap() - half)
            .collect();
        Self::new(edges)
    }

    pub fn with_samples(mut self, samples: &[F]) -> Self {
        self.fill(samples);
        self
    }

    pub fn fill(&mut self, samples: &[F]) {
        for &x in samples {
            let i = self.bin_index(x);
            self.counts[i] += 1;
        }
    }

    fn bin_index(&self, x: F) -> usize {
        let bins = self.counts.len();
        // First edge strictly greater than x, minus one.
        let upper = self.edges.partition_point(|&e| e <= x);
        upper.saturating_sub(1).min(bins - 1)
    }

    pub fn edges(&self) -> &[F] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn empty_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c == 0).count()
    }

    pub fn same_binning(&self, other: &Self) -> bool {
        self.edges == other.edges
    }

    /// `bin_low,bin_high,count` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let lo = self.edges[i].to_f64().unwrap();
            let hi = self.edges[i + 1].to_f64().unwrap();
            out.push_str(&format!("{lo},{hi},{c}\n"));
        }
        out
    }

    fn smoothed(&self) -> Vec<F> {
        let smooth = F::lit(KL_SMOOTHING);
        let raw: Vec<F> = self
            .counts
            .iter()
            .map(|&c| if c == 0 { smooth } else { F::from_u64(c).unwrap() })
            .collect();
        let sum = raw.iter().fold(F::zero(), |a, &b| a + b);
        raw.into_iter().map(|v| v / sum).collect()
    }
}

/// `Σ pᵢ ln(pᵢ/qᵢ)` over normalized bins, with empty bins replaced by
/// [`KL_SMOOTHING`] before normalizing.
pub fn kl_divergence<F: Real>(p: &Histogram<F>, q: &Histogram<F>) -> Result<F> {
    if !p.same_binning(q) {
        return Err(StatsError::BinningMismatch);
    }
    if p.total() == 0 || q.total() == 0 {
        return Err(StatsError::EmptySample);
    }
    let ps = p.smoothed();
    let qs = q.smoothed();
    let kl = ps
        .iter()
        .zip(&qs)
        .fold(F::zero(), |acc, (&pi, &qi)| acc + pi * (pi / qi).ln());
    // Rounding can leave a tiny negative residue.
    Ok(kl.max(F::zero()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare<F> {
    pub statistic: F,
    pub degrees_of_freedom: usize,
    pub p_value: F,
}

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chi_square_sf<F: Real>(statistic: F, df: usize) -> F {
    if df == 0 {
        return F::one();
    }
    let x = statistic.to_f64().unwrap();
    if x <= 0.0 {
        return F::one();
    }
    F::lit(statrs::function::gamma::gamma_ur(df as f64 / 2.0, x / 2.0))
}

/// Pearson goodness of fit of `observed` counts to the cell probabilities
/// `expected`. Every expected count must reach [`MIN_EXPECTED_PER_BIN`].
pub fn chi_square_goodness_of_fit<F: Real>(observed: &[u64], expected: &[F]) -> Result<ChiSquare<F>> {
    if observed.len() != expected.len() {
        return Err(StatsError::LengthMismatch {
            left: observed.len(),
            right: expected.len(),
        });
    }
    if observed.len() < 2 {
        return Err(StatsError::InvalidBinning("need at least two cells"));
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(StatsError::EmptySample);
    }
    let n = F::from_u64(n).unwrap();
    let mut statistic = F::zero();
    for (&o, &p) in observed.iter().zip(expected) {
        let e = n * p;
        if e < F::lit(MIN_EXPECTED_PER_BIN) {
            return Err(StatsError::InsufficientSamples {
                expected: e.to_f64().unwrap(),
                required: MIN_EXPECTED_PER_BIN,
            });
        }
        let d = F::from_u64(o).unwrap() - e;
        statistic = statistic + d * d / e;
    }
    let df = observed.len() - 1;
    Ok(ChiSquare {
        statistic,
        degrees_of_freedom: df,
        p_value: chi_square_sf(statistic, df),
    })
}

/// Uniformity of integer samples over `[0, domain)` split into `bins`
/// contiguous bins. When `bins` does not divide `domain` the expected mass of
/// each bin is its exact share of the domain.
pub fn chi_square_uniformity<F: Real>(samples: &[u64], domain: u64, bins: usize) -> Result<ChiSquare<F>> {
    if bins < 2 || domain < bins as u64 {
        return Err(StatsError::InvalidBinning("need 2 <= bins <= domain"));
    }
    let bin_of = |v: u64| ((v as u128 * bins as u128) / domain as u128) as usize;
    let mut observed = vec![0u64; bins];
    for &v in samples {
        if v >= domain {
            return Err(StatsError::OutOfDomain { value: v, domain });
        }
        observed[bin_of(v)] += 1;
    }
    // Bin i holds the integers v with floor(v·bins/domain) = i, i.e.
    // ceil(i·domain/bins) <= v < ceil((i+1)·domain/bins).
    let start = |i: usize| ((i as u128 * domain as u128).div_ceil(bins as u128)) as u64;
    let d = F::from_u64(domain).unwrap();
    let expected: Vec<F> = (0..bins)
        .map(|i| F::from_u64(start(i + 1) - start(i)).unwrap() / d)
        .collect();
    chi_square_goodness_of_fit(&observed, &expected)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovSmirnov<F> {
    pub statistic: F,
    pub p_value: F,
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Small-lambda form converges faster here.
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let s = y + y.powi(9) + y.powi(25) + y.powi(49);
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let x = (-2.0 * lambda * lambda).exp();
        let q = 2.0 * (x - x.powi(4) + x.powi(9) - x.powi(16));
        q.clamp(0.0, 1.0)
    }
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// `Q((√nₑ + 0.12 + 0.11/√nₑ)·D)`, `nₑ = nm/(n+m)`. Ties are handled by
/// stepping both empirical CDFs over every copy of a value at once.
pub fn ks_two_sample<F: Real>(a: &[F], b: &[F]) -> Result<KolmogorovSmirnov<F>> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    let cmp = |x: &F, y: &F| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal);
    xs.sort_by(cmp);
    ys.sort_by(cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let v = if xs[i] <= ys[j] { xs[i] } else { ys[j] };
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        let gap = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        d = d.max(gap);
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let sq = ne.sqrt();
    let p = kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d);
    Ok(KolmogorovSmirnov {
        statistic: F::lit(d),
        p_value: F::lit(p),
    })
}

/// Peak signal-to-noise ratio, or [`Psnr::Infinite`] when the inputs agree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Psnr<F> {
    Infinite,
    Finite(F),
}

impl<F: Real> Psnr<F> {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Psnr::Infinite)
    }

    /// Decibels, with `+∞` for the identical case.
    pub fn db(&self) -> F {
        match *self {
            Psnr::Infinite => F::infinity(),
            Psnr::Finite(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fidelity<F> {
    pub psnr: Psnr<F>,
    pub mse: F,
}

pub fn psnr<F: Real>(reference: &[F], test: &[F], max_value: F) -> Result<Fidelity<F>> {
    if reference.len() != test.len() {
        return Err(StatsError::LengthMismatch {
            left: reference.len(),
            right: test.len(),
        });
    }
    if reference.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let sse = reference
        .iter()
        .zip(test)
        .fold(F::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y));
    let mse = sse / F::from_usize(reference.len()).unwrap();
    let psnr = if mse == F::zero() {
        Psnr::Infinite
    } else {
        Psnr::Finite(F::lit(10.0) * (max_value * max_value / mse).log10())
    };
    Ok(Fidelity { psnr, mse })
}

/// Interior local maxima that stand above both neighbours by
/// `min_prominence · total`.
pub fn count_peaks<F: Real>(h: &Histogram<F>, min_prominence: F) -> Result<usize> {
    let c = h.counts();
    if c.len() < 3 {
        return Err(StatsError::InvalidBinning("need at least three bins"));
    }
    let margin = min_prominence * F::from_u64(h.total()).unwrap();
    let count = (1..c.len() - 1)
        .filter(|&i| {
            let here = F::from_u64(c[i]).unwrap();
            here > F::from_u64(c[i - 1]).unwrap() + margin
                && here > F::from_u64(c[i + 1]).unwrap() + margin
        })
        .count();
    Ok(count)
}

pub fn mean<F: Real>(xs: &[F]) -> Option<F> {
    if xs.is_empty() {
        return None;
    }
    let sum = xs.iter().fold(F::zero(), |a, &b| a + b);
    Some(sum / F::from_usize(xs.len()).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn histogram_binning() {
        let h = Histogram::<f64>::uniform(0.0, 1.0, 4)
            .unwrap()
            .with_samples(&[0.0, 0.24, 0.25, 0.99, 1.5, -3.0]);
        assert_eq!(h.counts(), &[3, 1, 0, 2]);
        let h = Histogram::<f64>::integer(-2, 2)
            .unwrap()
            .with_samples(&[-2.0, 0.0, 0.0, 2.0, 7.0]);
        assert_eq!(h.counts(), &[1, 0, 2, 0, 2]);
        assert!(Histogram::<f64>::new(vec![0.0]).is_err());
        assert!(Histogram::<f64>::new(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = Histogram::<f64>::integer(0, 1).unwrap().with_samples(&[0.0, 1.0, 1.0]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);

        let all_left = Histogram::<f64>::integer(0, 1).unwrap().with_samples(&vec![0.0; 1000]);
        let mut half = vec![0.0; 500];
        half.extend(vec![1.0; 500]);
        let uniform = Histogram::<f64>::integer(0, 1).unwrap().with_samples(&half);
        let kl = kl_divergence(&all_left, &uniform).unwrap();
        // Smoothing moves 0.5/1000.5 of the mass into the empty bin.
        assert!((kl - std::f64::consts::LN_2).abs() < 0.01, "{kl}");
        assert!(kl < std::f64::consts::LN_2);

        let other = Histogram::<f64>::integer(0, 2).unwrap().with_samples(&[0.0]);
        assert_eq!(kl_divergence(&p, &other), Err(StatsError::BinningMismatch));
    }

    #[test]
    fn kl_of_independent_uniform_samples_is_small() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..10_000).map(|_| rng.gen()).collect();
        let b: Vec<f64> = (0..10_000).map(|_| rng.gen()).collect();
        let ha = Histogram::uniform(0.0, 1.0, 32).unwrap().with_samples(&a);
        let hb = Histogram::uniform(0.0, 1.0, 32).unwrap().with_samples(&b);
        assert!(kl_divergence(&ha, &hb).unwrap() < 0.01);
    }

    #[test]
    fn chi_square_examples() {
        let samples: Vec<u64> = (0..256u64).flat_map(|v| std::iter::repeat(v).take(10)).collect();
        let r = chi_square_uniformity::<f64>(&samples, 256, 256).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.degrees_of_freedom, 255);

        let stuck = vec![7u64; 10_000];
        let r = chi_square_uniformity::<f64>(&stuck, 256, 256).unwrap();
        assert!(r.p_value < 1e-10);

        assert!(matches!(
            chi_square_uniformity::<f64>(&[1, 2, 3], 256, 256),
            Err(StatsError::InsufficientSamples { .. })
        ));
        assert!(matches!(
            chi_square_uniformity::<f64>(&[300], 256, 2),
            Err(StatsError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn chi_square_uneven_bins() {
        // domain 10 into 3 bins: {0..3}, {4..6}, {7..9} → 4, 3, 3.
        let samples: Vec<u64> = (0..10u64).flat_map(|v| std::iter::repeat(v).take(5)).collect();
        let r = chi_square_uniformity::<f64>(&samples, 10, 3).unwrap();
        assert!(r.statistic.abs() < 1e-12);
    }

    #[test]
    fn chi_square_sf_reference_values() {
        // scipy.stats.chi2.sf(3.84145882, 1) = 0.05; chi2.sf(23.2093, 10) = 0.01
        assert!((chi_square_sf(3.841_458_82_f64, 1) - 0.05).abs() < 1e-6);
        assert!((chi_square_sf(23.209_251_f64, 10) - 0.01).abs() < 1e-6);
    }

    #[test]
    fn ks_examples() {
        let a = [1.0, 2.0, 3.0, 3.0, 5.0];
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(ks_two_sample::<f64>(&[], &a), Err(StatsError::EmptySample));

        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.statistic, 1.0);
    }

    #[test]
    fn ks_statistic_matches_brute_force() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a: Vec<f64> = (0..rng.gen_range(1..40)).map(|_| rng.gen_range(0..8) as f64).collect();
            let b: Vec<f64> = (0..rng.gen_range(1..40)).map(|_| rng.gen_range(0..8) as f64).collect();
            let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
            let brute = a
                .iter()
                .chain(&b)
                .map(|&x| (ecdf(&a, x) - ecdf(&b, x)).abs())
                .fold(0.0, f64::max);
            assert!((ks_two_sample(&a, &b).unwrap().statistic - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn kolmogorov_sf_reference_values() {
        // Critical values of the Kolmogorov distribution: Q(1.3581) = 0.05, Q(1.6276) = 0.01.
        assert!((kolmogorov_sf(1.358_1) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.627_6) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(0.5) - 0.963_945).abs() < 1e-5);
        // Both branches agree at the switch point.
        let x = 1.18f64;
        let lo = 1.0 - (2.0 * std::f64::consts::PI).sqrt() / x
            * (1..=4).map(|k| (-((2 * k - 1) as f64).powi(2) * std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp()).sum::<f64>();
        assert!((kolmogorov_sf(x) - lo).abs() < 1e-9);
    }

    #[test]
    fn ks_same_source_not_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..10_000).map(|_| rng.gen()).collect();
        let b: Vec<f64> = (0..10_000).map(|_| rng.gen()).collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.01);
    }

    #[test]
    fn psnr_examples() {
        let a = vec![10.0f64; 4096];
        assert!(psnr(&a, &a, 255.0).unwrap().psnr.is_infinite());

        let mut b = a.clone();
        b[100] += 1.0;
        let f = psnr(&a, &b, 255.0).unwrap();
        let expected = 10.0 * (255.0f64 * 255.0 * 4096.0).log10();
        assert!((f.psnr.db() - expected).abs() < 1e-9);
        assert!((f.psnr.db() - 84.254).abs() < 1e-3);
        assert_eq!(f.mse, 1.0 / 4096.0);

        let zeros = vec![0.0f64; 16];
        let full = vec![255.0f64; 16];
        assert!(psnr(&zeros, &full, 255.0).unwrap().psnr.db().abs() < 1e-12);
        assert!(matches!(psnr(&zeros, &full[..3], 255.0), Err(StatsError::LengthMismatch { .. })));
    }

    #[test]
    fn peak_counting() {
        let mut gauss = Histogram::<f64>::integer(-10, 10).unwrap();
        for k in -10i64..=10 {
            let n = (10_000.0 * (-(k * k) as f64 / 18.0).exp()).round() as usize;
            gauss.fill(&vec![k as f64; n]);
        }
        assert_eq!(count_peaks(&gauss, 0.005).unwrap(), 1);

        let mut comb = Histogram::<f64>::integer(-10, 10).unwrap();
        for k in (-10i64..=10).filter(|k| k % 2 == 0) {
            let n = (10_000.0 * (-(k * k) as f64 / 18.0).exp()).round() as usize;
            comb.fill(&vec![k as f64; n]);
        }
        let occupied = comb.bins() - comb.empty_bins();
        let peaks = count_peaks(&comb, 0.005).unwrap();
        assert!(peaks + 2 >= occupied / 2 && peaks <= occupied, "{peaks} of {occupied}");

        let flat = Histogram::<f64>::integer(0, 9)
            .unwrap()
            .with_samples(&(0..10).map(|k| k as f64).collect::<Vec<_>>());
        assert_eq!(count_peaks(&flat, 0.01).unwrap(), 0);
        assert!(count_peaks(&Histogram::<f64>::integer(0, 1).unwrap(), 0.0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let h = Histogram::<f32>::uniform(0.0, 1.0, 2).unwrap().with_samples(&[0.1, 0.9]);
        assert_eq!(kl_divergence(&h, &h).unwrap(), 0.0f32);
        let r = ks_two_sample(&[0.1f32, 0.2], &[0.1f32, 0.2]).unwrap();
        assert_eq!(r.statistic, 0.0f32);
        assert!(psnr(&[1.0f32], &[1.0f32], 255.0).unwrap().psnr.is_infinite());
    }
}
