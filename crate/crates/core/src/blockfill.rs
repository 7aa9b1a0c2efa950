//! Block-filling: the integer analogue of water-filling.
//!
//! When every compressor is an eigenvector of `D_0`, the net gain is
//! `(1/2) log prod (1 + Lambda_i gamma_i)` where `gamma_i = k_i / m` counts how
//! often `v_i` was used. Each channel starts at height `1/Lambda_i` and every
//! measurement drops a block of height `1/m` into one channel. The scalar
//! greedy policy fills the currently lowest channel. This module also checks
//! the two sufficient conditions under which greedy is optimal.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::waterfill::{effective_eigenvalues, find_r, water_level};

/// Relative tolerance under which two channel heights count as equal.
pub const HEIGHT_TIE_REL_TOL: f64 = 1e-10;

/// `|n_k - round(n_k)|` below this counts as an integer.
pub const INTEGRALITY_TOL: f64 = 1e-9;

// slack on the open interval of the height certificate
const CERTIFICATE_TOL: f64 = 1e-12;

fn require_channels(effective: &[f64]) -> Result<()> {
    if effective.is_empty() {
        return Err(Error::Domain("at least one channel is required".into()));
    }
    if effective.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::Domain("effective eigenvalues must be positive".into()));
    }
    if effective.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
        return Err(Error::Domain("effective eigenvalues must be nonincreasing".into()));
    }
    Ok(())
}

/// An allocation of `blocks` blocks of size `1/blocks` over the channels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockAllocation {
    pub blocks: usize,
    /// Block count `k_i` per channel; `gamma_i = k_i / blocks`.
    pub counts: Vec<usize>,
    /// Final heights `1/Lambda_i + gamma_i`.
    pub heights: Vec<f64>,
    /// `(1/2) log prod (1 + Lambda_i gamma_i)` in nats.
    pub gain: f64,
}

impl BlockAllocation {
    pub fn from_counts(effective: &[f64], counts: Vec<usize>) -> Result<Self> {
        if counts.len() != effective.len() {
            return Err(Error::DimensionMismatch {
                what: "block counts",
                expected: effective.len().to_string(),
                found: counts.len().to_string(),
            });
        }
        let blocks: usize = counts.iter().sum();
        let m = blocks.max(1) as f64;
        let heights = effective
            .iter()
            .zip(&counts)
            .map(|(l, &k)| 1.0 / l + k as f64 / m)
            .collect();
        Ok(Self {
            blocks,
            gain: allocation_gain(effective, &counts, blocks),
            counts,
            heights,
        })
    }

    /// `gamma_i = k_i / m` as floats.
    pub fn gamma(&self) -> Vec<f64> {
        let m = self.blocks.max(1) as f64;
        self.counts.iter().map(|&k| k as f64 / m).collect()
    }

    /// The channel index of each block in greedy fill order is not recorded;
    /// this expands the counts into a channel sequence, lowest index first.
    pub fn channel_sequence(&self) -> Vec<usize> {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(i, &k)| std::iter::repeat_n(i, k))
            .collect()
    }
}

/// `(1/2) log prod (1 + Lambda_i k_i / m)`.
pub fn allocation_gain(effective: &[f64], counts: &[usize], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    0.5 * effective
        .iter()
        .zip(counts)
        .map(|(l, &k)| (l * k as f64 / m as f64).ln_1p())
        .sum::<f64>()
}

fn lowest_channel(effective: &[f64], counts: &[usize], m: usize, among: usize) -> usize {
    let height = |i: usize| 1.0 / effective[i] + counts[i] as f64 / m as f64;
    let mut best = 0;
    for i in 1..among {
        let (h, hb) = (height(i), height(best));
        if h < hb - HEIGHT_TIE_REL_TOL * hb.abs().max(h.abs()) {
            best = i;
        }
    }
    best
}

/// Greedy block-filling: each block goes to the lowest channel, ties to the
/// smallest index. Matches the scalar greedy policy block for block.
pub fn greedy_blockfill(effective: &[f64], m: usize) -> Result<BlockAllocation> {
    require_channels(effective)?;
    let mut counts = vec![0; effective.len()];
    for _ in 0..m {
        let i = lowest_channel(effective, &counts, m, effective.len());
        counts[i] += 1;
    }
    BlockAllocation::from_counts(effective, counts)
}

/// Water level and active-channel count used by the block-filling routines,
/// computed on the first `q = min(m, N)` channels.
fn level(effective: &[f64], m: usize) -> Result<(usize, f64)> {
    let q = m.min(effective.len());
    let r = find_r(&effective[..q])?;
    Ok((r, water_level(&effective[..q], r)))
}

/// Optimal block allocation.
///
/// Fills each of the first `r` channels with as many blocks as fit without
/// exceeding the water level `mu`, then places the `m'` leftover blocks one
/// each on the `m'` lowest of those channels.
pub fn optimal_blockfill(effective: &[f64], m: usize) -> Result<BlockAllocation> {
    require_channels(effective)?;
    let mut counts = vec![0usize; effective.len()];
    if m == 0 {
        return BlockAllocation::from_counts(effective, counts);
    }
    let (r, mu) = level(effective, m)?;
    let mf = m as f64;
    for i in 0..r {
        let room = (mu - 1.0 / effective[i]) * mf;
        counts[i] = (room + INTEGRALITY_TOL).floor().max(0.0) as usize;
    }
    let placed: usize = counts.iter().sum();
    if placed > m {
        return Err(Error::Degenerate(format!(
            "filled {placed} blocks below the water level, more than m = {m}"
        )));
    }
    let leftover = m - placed;
    let mut order: Vec<usize> = (0..r).collect();
    let height = |i: usize| 1.0 / effective[i] + counts[i] as f64 / mf;
    order.sort_by(|&a, &b| height(a).total_cmp(&height(b)));
    if leftover > order.len() {
        return Err(Error::Degenerate(format!(
            "{leftover} leftover blocks for {} active channels",
            order.len()
        )));
    }
    for &i in &order[..leftover] {
        counts[i] += 1;
    }
    BlockAllocation::from_counts(effective, counts)
}

/// Height certificate: every channel holding blocks has its final height in
/// `(mu - 1/m, mu + 1/m)`, and channels beyond `r` hold nothing.
pub fn lemma6_certificate(alloc: &BlockAllocation, effective: &[f64], m: usize) -> Result<bool> {
    require_channels(effective)?;
    if alloc.counts.len() != effective.len() {
        return Err(Error::DimensionMismatch {
            what: "allocation",
            expected: effective.len().to_string(),
            found: alloc.counts.len().to_string(),
        });
    }
    if m == 0 {
        return Ok(alloc.counts.iter().all(|&k| k == 0));
    }
    let (r, mu) = level(effective, m)?;
    let block = 1.0 / m as f64;
    Ok(alloc.counts.iter().enumerate().all(|(i, &k)| {
        if k == 0 {
            return true;
        }
        let h = 1.0 / effective[i] + k as f64 * block;
        i < r && h > mu - block - CERTIFICATE_TOL && h < mu + block + CERTIFICATE_TOL
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Theorem {
    /// Eigenvector action set containing the first `r` eigenvectors.
    T4,
    /// Integer eigenvalue gaps with `r | (m - m_hat)`.
    T5,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TheoremDetails {
    T4 {
        /// Allowed eigenvector indices (0-based).
        set: Vec<usize>,
        r: usize,
        /// Indices among `0..r` that are missing from `set`.
        missing: Vec<usize>,
    },
    T5 {
        r: usize,
        /// `n_k = sigma^2 (1/lambda_{k+1} - 1/lambda_k)` for k = 1..r-1.
        gaps: Vec<f64>,
        gaps_integral: bool,
        /// `sum k n_k`, when every gap is integral.
        m_hat: Option<usize>,
        /// Whether `r` divides `m - m_hat` (false when `m_hat > m`).
        divisible: bool,
    },
}

/// Outcome of checking one of the greedy-optimality conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremConditionReport {
    pub theorem: Theorem,
    pub holds: bool,
    pub details: TheoremDetails,
}

/// Greedy over the eigenvector subset `set` (0-based) is optimal when
/// `{0, .., r-1}` is contained in it.
pub fn check_theorem4(set: &[usize], effective: &[f64], m: usize) -> Result<TheoremConditionReport> {
    require_channels(effective)?;
    if let Some(&bad) = set.iter().find(|&&i| i >= effective.len()) {
        return Err(Error::Domain(format!(
            "eigenvector index {bad} outside 0..{}",
            effective.len()
        )));
    }
    let r = if m == 0 { 0 } else { level(effective, m)?.0 };
    let missing: Vec<usize> = (0..r).filter(|i| !set.contains(i)).collect();
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    Ok(TheoremConditionReport {
        theorem: Theorem::T4,
        holds: missing.is_empty(),
        details: TheoremDetails::T4 {
            set: sorted,
            r,
            missing,
        },
    })
}

/// Greedy over all unit vectors reaches the relaxed optimum when the gaps
/// `n_k = sigma^2 (1/lambda_{k+1} - 1/lambda_k)` are nonnegative integers for
/// `k < r` and `r` divides `m - sum k n_k`.
pub fn check_theorem5(lambdas: &[f64], sigma2: f64, m: usize) -> Result<TheoremConditionReport> {
    let effective = effective_eigenvalues(lambdas, m, sigma2)?;
    let r = find_r(&effective)?;
    let gaps: Vec<f64> = (0..r.saturating_sub(1))
        .map(|k| sigma2 * (1.0 / lambdas[k + 1] - 1.0 / lambdas[k]))
        .collect();
    let gaps_integral = gaps
        .iter()
        .all(|&n| n > -INTEGRALITY_TOL && (n - n.round()).abs() < INTEGRALITY_TOL);
    let m_hat = gaps_integral.then(|| {
        gaps.iter()
            .enumerate()
            .map(|(k, n)| (k + 1) * n.round() as usize)
            .sum::<usize>()
    });
    let divisible = match m_hat {
        Some(mh) if mh <= m => (m - mh).is_multiple_of(r),
        _ => false,
    };
    Ok(TheoremConditionReport {
        theorem: Theorem::T5,
        holds: gaps_integral && divisible,
        details: TheoremDetails::T5 {
            r,
            gaps,
            gaps_integral,
            m_hat,
            divisible,
        },
    })
}
