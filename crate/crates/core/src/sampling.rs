//! Random subspace distributions.
//!
//! Both distributions first draw a size `d` uniformly from `1..=D`. The
//! uniform one then picks a size-`d` subset uniformly; the weighted one makes
//! `d` sequential draws without replacement with probability proportional to
//! the remaining weights.
//!
//! Randomness comes from [`substream`], a ChaCha generator keyed by
//! `(seed, iteration, learner, candidate)`, so every draw is reproducible no
//! matter which thread makes it.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Subspace;
use crate::error::{Error, Result};

/// Generator for one `(seed, t, j, k)` key. Distinct keys give independent
/// streams.
pub fn substream(seed: u64, t: u64, j: u64, k: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, t, j, k]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SubspaceDistribution {
    Uniform { p: usize, d_max: usize },
    Weighted { d_max: usize, weights: Vec<f64> },
}

impl SubspaceDistribution {
    pub fn uniform(p: usize, d_max: usize) -> Result<Self> {
        check_bound(p, d_max)?;
        Ok(Self::Uniform { p, d_max })
    }

    pub fn weighted(weights: Vec<f64>, d_max: usize) -> Result<Self> {
        check_weights(&weights)?;
        check_bound(weights.len(), d_max)?;
        Ok(Self::Weighted { d_max, weights })
    }

    pub fn p(&self) -> usize {
        match self {
            Self::Uniform { p, .. } => *p,
            Self::Weighted { weights, .. } => weights.len(),
        }
    }

    pub fn d_max(&self) -> usize {
        match self {
            Self::Uniform { d_max, .. } | Self::Weighted { d_max, .. } => *d_max,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Subspace {
        match self {
            Self::Uniform { p, d_max } => uniform_unchecked(*p, *d_max, rng),
            Self::Weighted { d_max, weights } => weighted_unchecked(weights, *d_max, rng),
        }
    }
}

fn check_bound(p: usize, d_max: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidBound("p must be positive"));
    }
    if d_max == 0 || d_max > p {
        return Err(Error::InvalidBound("D must lie in 1..=p"));
    }
    Ok(())
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidBound("weights must be positive and finite"));
    }
    Ok(())
}

/// Draws from the hierarchical uniform distribution: `d ~ U{1..D}`, then a
/// uniform size-`d` subset of `0..p` by partial Fisher-Yates.
pub fn sample_uniform<R: Rng + ?Sized>(p: usize, d_max: usize, rng: &mut R) -> Result<Subspace> {
    check_bound(p, d_max)?;
    Ok(uniform_unchecked(p, d_max, rng))
}

fn uniform_unchecked<R: Rng + ?Sized>(p: usize, d_max: usize, rng: &mut R) -> Subspace {
    let d = rng.random_range(1..=d_max);
    let mut pool: Vec<usize> = (0..p).collect();
    for i in 0..d {
        let r = rng.random_range(i..p);
        pool.swap(i, r);
    }
    pool.truncate(d);
    pool.sort_unstable();
    Subspace::from_sorted_unchecked(pool)
}

/// Draws `d ~ U{1..D}` and then `d` features one at a time without
/// replacement, each with probability proportional to its weight among the
/// features not yet chosen.
pub fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], d_max: usize, rng: &mut R) -> Result<Subspace> {
    check_weights(weights)?;
    check_bound(weights.len(), d_max)?;
    Ok(weighted_unchecked(weights, d_max, rng))
}

fn weighted_unchecked<R: Rng + ?Sized>(weights: &[f64], d_max: usize, rng: &mut R) -> Subspace {
    let p = weights.len();
    let d = rng.random_range(1..=d_max);
    if d == p {
        return Subspace::full(p);
    }
    let mut remaining = weights.to_vec();
    let mut chosen = Vec::with_capacity(d);
    for _ in 0..d {
        let total: f64 = remaining.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        // falls back to the last live feature if rounding leaves target unreached
        let mut pick = None;
        for (l, &w) in remaining.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            pick = Some(l);
            acc += w;
            if target < acc {
                break;
            }
        }
        let l = pick.expect("at least one feature remains");
        remaining[l] = 0.0;
        chosen.push(l);
    }
    chosen.sort_unstable();
    Subspace::from_sorted_unchecked(chosen)
}

/// Weights for the next iteration: `η_l` if `η_l > C₀/ln p`, else `C₀/p`.
pub fn update_weights(eta: &[f64], c0: f64) -> Vec<f64> {
    let p = eta.len();
    let threshold = c0 / libm::log(p as f64);
    let floor = c0 / p as f64;
    eta.iter().map(|&e| if e > threshold { e } else { floor }).collect()
}

/// Probability that a uniform-distribution draw contains a fixed set of
/// `p_star` features:
/// `(1/D) Σ_{d=p*}^{D} C(p−p*, d−p*) / C(p, d)`.
///
/// Each binomial ratio is evaluated as `Π_{i<p*} (d−i)/(p−i)`, which avoids
/// forming large binomials.
pub fn coverage_probability(p: usize, p_star: usize, d_max: usize) -> Result<f64> {
    check_bound(p, d_max)?;
    if p_star > d_max {
        return Err(Error::InvalidBound("p* must not exceed D"));
    }
    let mut total = 0.0;
    for d in p_star.max(1)..=d_max {
        let ratio: f64 = (0..p_star).map(|i| (d - i) as f64 / (p - i) as f64).product();
        total += ratio;
    }
    Ok(total / d_max as f64)
}
