//! Coincidence-counting emulation: sample pair positions, drop pairs where
//! either photon lands in the dark region, bin the rest by sign.
//!
//! Samples are generated in fixed-size chunks. Chunk `i` of a run seeded with
//! `seed` draws from ChaCha8 stream `i` of that seed, so the sample sequence
//! (and every count derived from it) is independent of how chunks are spread
//! over worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chsh::{JointProbTable, MeasurementSettings, SettingPair};
use crate::error::{Error, Result};
use crate::state::{position_joint_density, BivariateGaussian, GaussianTwoModeState};

/// Pairs drawn per chunk (and per seed stream).
pub const CHUNK_SIZE: u64 = 1 << 16;

/// Cholesky sampling refuses correlations closer to +/-1 than this.
pub const MAX_ABS_CORR: f64 = 1.0 - 1e-12;

/// Minimum surviving pairs for a probability estimate.
pub const MIN_KEPT_COUNTS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub n_pp: u64,
    pub n_pm: u64,
    pub n_mp: u64,
    pub n_mm: u64,
    pub n_discarded: u64,
    pub seed: u64,
    pub n_total: u64,
}

impl CountTable {
    pub fn empty(seed: u64) -> Self {
        Self { n_pp: 0, n_pm: 0, n_mp: 0, n_mm: 0, n_discarded: 0, seed, n_total: 0 }
    }

    pub fn kept(&self) -> u64 {
        self.n_pp + self.n_pm + self.n_mp + self.n_mm
    }

    /// Adds the counts of another partition of the same run.
    pub fn merge(mut self, other: &CountTable) -> Self {
        self.n_pp += other.n_pp;
        self.n_pm += other.n_pm;
        self.n_mp += other.n_mp;
        self.n_mm += other.n_mm;
        self.n_discarded += other.n_discarded;
        self.n_total += other.n_total;
        self
    }

    fn record(&mut self, x1: f64, x2: f64, r: f64) {
        self.n_total += 1;
        // Photons at |x| <= r are never detected.
        if x1.abs() <= r || x2.abs() <= r {
            self.n_discarded += 1;
            return;
        }
        match (x1 > 0.0, x2 > 0.0) {
            (true, true) => self.n_pp += 1,
            (true, false) => self.n_pm += 1,
            (false, true) => self.n_mp += 1,
            (false, false) => self.n_mm += 1,
        }
    }
}

/// Cholesky factor of a bivariate Gaussian.
#[derive(Debug, Clone, Copy)]
struct PairTransform {
    std1: f64,
    std2_corr: f64,
    std2_resid: f64,
}

impl PairTransform {
    fn new(bg: &BivariateGaussian) -> Result<Self> {
        let corr = bg.corr();
        if corr.abs() > MAX_ABS_CORR {
            return Err(Error::DegenerateCorrelation { corr });
        }
        Ok(Self {
            std1: bg.std1(),
            std2_corr: bg.std2() * corr,
            std2_resid: bg.std2() * (1.0 - corr * corr).sqrt(),
        })
    }

    #[inline]
    fn draw<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        (self.std1 * z1, self.std2_corr * z1 + self.std2_resid * z2)
    }
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn chunk_len(n: u64, chunk: u64) -> u64 {
    (n - chunk * CHUNK_SIZE).min(CHUNK_SIZE)
}

/// Deterministic stream of `n` pairs from `bg`.
pub struct PairSampler {
    transform: PairTransform,
    seed: u64,
    n: u64,
    emitted: u64,
    rng: ChaCha8Rng,
}

impl Iterator for PairSampler {
    type Item = (f64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.emitted >= self.n {
            return None;
        }
        if self.emitted > 0 && self.emitted % CHUNK_SIZE == 0 {
            self.rng = chunk_rng(self.seed, self.emitted / CHUNK_SIZE);
        }
        self.emitted += 1;
        Some(self.transform.draw(&mut self.rng))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.n - self.emitted) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for PairSampler {}

pub fn sample_pairs(bg: &BivariateGaussian, n: u64, seed: u64) -> Result<PairSampler> {
    if n == 0 {
        return Err(Error::invalid("n", "must draw at least one pair"));
    }
    Ok(PairSampler { transform: PairTransform::new(bg)?, seed, n, emitted: 0, rng: chunk_rng(seed, 0) })
}

/// Counts for `n` pairs from `bg` with dark-region half-width `r`.
///
/// Chunks run on the current rayon pool; results do not depend on its size.
pub fn simulate_counts_for(bg: &BivariateGaussian, r: f64, n: u64, seed: u64) -> Result<CountTable> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::invalid("r", format!("must be finite and >= 0, got {r}")));
    }
    if n == 0 {
        return Err(Error::invalid("n", "must draw at least one pair"));
    }
    let transform = PairTransform::new(bg)?;
    let chunks = n.div_ceil(CHUNK_SIZE);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = chunk_rng(seed, chunk);
            let mut table = CountTable::empty(seed);
            for _ in 0..chunk_len(n, chunk) {
                let (x1, x2) = transform.draw(&mut rng);
                table.record(x1, x2, r);
            }
            table
        })
        .reduce(|| CountTable::empty(seed), |a, b| a.merge(&b));
    Ok(counts)
}

pub fn simulate_counts(
    state: &GaussianTwoModeState,
    alpha: f64,
    beta: f64,
    r: f64,
    n: u64,
    seed: u64,
) -> Result<CountTable> {
    simulate_counts_for(&position_joint_density(state, alpha, beta)?, r, n, seed)
}

/// Normalized counts with binomial standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub table: JointProbTable,
    pub se_pp: f64,
    pub se_pm: f64,
    pub se_mp: f64,
    pub se_mm: f64,
    pub kept_fraction_se: f64,
    pub kept: u64,
    pub n_total: u64,
    pub seed: u64,
    /// Correlation estimate and its standard error `sqrt((1 - E^2) / kept)`.
    pub e: f64,
    pub e_se: f64,
}

impl ProbabilityEstimate {
    pub fn alice_plus_se(&self) -> f64 {
        binomial_se(self.table.alice_plus(), self.kept)
    }

    pub fn bob_plus_se(&self) -> f64 {
        binomial_se(self.table.bob_plus(), self.kept)
    }
}

fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

pub fn estimate_probabilities(counts: &CountTable) -> Result<ProbabilityEstimate> {
    let kept = counts.kept();
    if kept < MIN_KEPT_COUNTS {
        return Err(Error::InsufficientCounts { kept, required: MIN_KEPT_COUNTS });
    }
    let k = kept as f64;
    let table = JointProbTable {
        p_pp: counts.n_pp as f64 / k,
        p_pm: counts.n_pm as f64 / k,
        p_mp: counts.n_mp as f64 / k,
        p_mm: counts.n_mm as f64 / k,
        kept_fraction: k / counts.n_total as f64,
    };
    let e = table.correlation();
    Ok(ProbabilityEstimate {
        se_pp: binomial_se(table.p_pp, kept),
        se_pm: binomial_se(table.p_pm, kept),
        se_mp: binomial_se(table.p_mp, kept),
        se_mm: binomial_se(table.p_mm, kept),
        kept_fraction_se: binomial_se(table.kept_fraction, counts.n_total),
        kept,
        n_total: counts.n_total,
        seed: counts.seed,
        e,
        e_se: ((1.0 - e * e) / k).sqrt(),
        table,
    })
}

/// SplitMix64 finalizer, used to derive independent per-setting seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellEstimate {
    pub s: f64,
    pub se: f64,
    /// Per-setting estimates in CHSH order.
    pub estimates: Vec<(SettingPair, ProbabilityEstimate)>,
}

/// Bell parameter from four simulated tables of `n` pairs each; errors add in quadrature.
pub fn mc_bell_s(state: &GaussianTwoModeState, settings: &MeasurementSettings, n: u64, seed: u64) -> Result<BellEstimate> {
    settings.validate()?;
    let mut s = 0.0;
    let mut var = 0.0;
    let mut estimates = Vec::with_capacity(4);
    for (i, (pair, alpha, beta)) in settings.pairs().into_iter().enumerate() {
        let counts = simulate_counts(state, alpha, beta, settings.r, n, derive_seed(seed, i as u64))?;
        let est = estimate_probabilities(&counts)?;
        s += pair.chsh_sign() * est.e;
        var += est.e_se * est.e_se;
        estimates.push((pair, est));
    }
    Ok(BellEstimate { s, se: var.sqrt(), estimates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn same_seed_same_stream() {
        let bg = BivariateGaussian::new(0.5, 2.0, 0.3).unwrap();
        let a: Vec<_> = sample_pairs(&bg, 100, 7).unwrap().collect();
        let b: Vec<_> = sample_pairs(&bg, 100, 7).unwrap().collect();
        assert_eq!(a, b);
        let c: Vec<_> = sample_pairs(&bg, 100, 8).unwrap().collect();
        assert_ne!(a, c);
    }

    #[test]
    fn parallel_counts_match_sequential_stream() {
        let bg = BivariateGaussian::new(0.8, 1.1, -0.4).unwrap();
        let n = 3 * CHUNK_SIZE + 123;
        let r = 0.3;
        let mut seq = CountTable::empty(99);
        for (x1, x2) in sample_pairs(&bg, n, 99).unwrap() {
            seq.record(x1, x2, r);
        }
        assert_eq!(simulate_counts_for(&bg, r, n, 99).unwrap(), seq);
    }

    #[test]
    fn no_discards_without_dark_region() {
        let state = GaussianTwoModeState::new(0.75, 1.25).unwrap();
        let c = simulate_counts(&state, PI, 1.0, 0.0, 50_000, 3).unwrap();
        assert_eq!(c.n_discarded, 0);
        assert_eq!(c.kept(), c.n_total);
    }

    #[test]
    fn count_invariant_holds() {
        let state = GaussianTwoModeState::new(0.75, 1.25).unwrap();
        let c = simulate_counts(&state, PI / 2.0, 2.0, 0.6, 200_001, 11).unwrap();
        assert_eq!(c.kept() + c.n_discarded, c.n_total);
        assert_eq!(c.n_total, 200_001);
        assert_eq!(c.seed, 11);
    }

    #[test]
    fn uniform_counts_give_quarter_probabilities() {
        let counts = CountTable { n_pp: 250, n_pm: 250, n_mp: 250, n_mm: 250, n_discarded: 0, seed: 0, n_total: 1000 };
        let est = estimate_probabilities(&counts).unwrap();
        assert_eq!(est.table.p_pp, 0.25);
        assert!((est.se_pp - 0.013_693).abs() < 1e-6);
        assert_eq!(est.e, 0.0);
        assert_eq!(est.table.kept_fraction, 1.0);
    }

    #[test]
    fn too_few_kept_counts_rejected() {
        let counts = CountTable { n_pp: 20, n_pm: 20, n_mp: 20, n_mm: 20, n_discarded: 5000, seed: 0, n_total: 5080 };
        assert_eq!(
            estimate_probabilities(&counts).unwrap_err(),
            Error::InsufficientCounts { kept: 80, required: MIN_KEPT_COUNTS }
        );
    }

    #[test]
    fn degenerate_correlation_rejected() {
        let bg = BivariateGaussian::new(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(sample_pairs(&bg, 10, 0), Err(Error::DegenerateCorrelation { .. })));
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: Vec<u64> = (0..4).map(|i| derive_seed(42, i)).collect();
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert_ne!(seeds[i], seeds[j]);
            }
        }
    }
}
