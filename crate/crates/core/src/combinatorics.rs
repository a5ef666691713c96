//! Exact integer combinatorics: binomials, colex ranking of fixed-size subsets,
//! uniform random subset sampling and t-subset enumeration inside a block.
//!
//! Points are `u32` indices. Ranks are `u64`. Colex rank of a strictly
//! increasing `s` is `sum_i C(s[i], i + 1)`; it does not depend on the size of
//! the ambient set, which is what lets a bitmap over all t-subsets of
//! `{0..v}` be indexed from inside any block.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// Exact `C(n, r)`, or an overflow error if it does not fit in `u64`.
pub fn binomial(n: u64, r: u64) -> Result<u64> {
    if r > n {
        return Ok(0);
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        // acc == C(n, i) here, so the division is exact.
        acc = acc * u128::from(n - i) / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return Err(Error::Overflow(format!("C({n}, {r})")));
        }
    }
    Ok(acc as u64)
}

/// Pascal table of `C(n, r)` for `n <= n_max`, `r <= r_max`.
#[derive(Clone, Debug)]
pub struct BinomialTable {
    n_max: u32,
    r_max: u32,
    data: Vec<u64>,
}

impl BinomialTable {
    pub fn new(n_max: u32, r_max: u32) -> Result<Self> {
        let width = r_max as usize + 1;
        let mut data = vec![0u64; (n_max as usize + 1) * width];
        for n in 0..=n_max as usize {
            data[n * width] = 1;
            for r in 1..=(r_max as usize).min(n) {
                let above = data[(n - 1) * width + r - 1];
                let left = if r < n { data[(n - 1) * width + r] } else { 0 };
                data[n * width + r] = above
                    .checked_add(left)
                    .ok_or_else(|| Error::Overflow(format!("C({n}, {r})")))?;
            }
        }
        Ok(Self { n_max, r_max, data })
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn r_max(&self) -> u32 {
        self.r_max
    }

    /// `C(n, r)`; zero when `r > n`. Panics if outside the table.
    #[inline]
    pub fn get(&self, n: u32, r: u32) -> u64 {
        debug_assert!(n <= self.n_max && r <= self.r_max);
        self.data[n as usize * (self.r_max as usize + 1) + r as usize]
    }

    /// Colex rank of a strictly increasing slice whose elements and length fit the table.
    #[inline]
    pub fn rank(&self, s: &[u32]) -> u64 {
        s.iter()
            .enumerate()
            .map(|(i, &x)| self.get(x, i as u32 + 1))
            .sum()
    }

    /// Writes the subset of size `out.len()` with the given colex rank into `out`.
    pub fn unrank_into(&self, mut rank: u64, out: &mut [u32]) {
        for i in (1..=out.len() as u32).rev() {
            // Largest c with C(c, i) <= rank; C(i - 1, i) = 0 so c >= i - 1.
            let (mut lo, mut hi) = (i - 1, self.n_max);
            while lo < hi {
                let mid = lo + (hi - lo).div_ceil(2);
                if self.get(mid, i) <= rank {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            out[i as usize - 1] = lo;
            rank -= self.get(lo, i);
        }
    }
}

/// A finite set of points, stored as a strictly increasing sequence.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subset(Vec<u32>);

impl Subset {
    pub fn new(elements: Vec<u32>) -> Result<Self> {
        if elements.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams(format!(
                "subset {elements:?} is not strictly increasing"
            )));
        }
        Ok(Self(elements))
    }

    /// Sorts the elements; duplicates are an error.
    pub fn from_unsorted(mut elements: Vec<u32>) -> Result<Self> {
        elements.sort_unstable();
        Self::new(elements)
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<u32> {
        self.0
    }
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(&self.0).finish()
    }
}

impl AsRef<[u32]> for Subset {
    fn as_ref(&self) -> &[u32] {
        &self.0
    }
}

pub fn colex_rank(s: &Subset) -> Result<u64> {
    s.as_slice()
        .iter()
        .enumerate()
        .try_fold(0u64, |acc, (i, &x)| {
            let term = binomial(u64::from(x), i as u64 + 1)?;
            acc.checked_add(term)
                .ok_or_else(|| Error::Overflow(format!("colex rank of {s:?}")))
        })
}

/// Inverse of [`colex_rank`] for subsets of size `r`.
pub fn colex_unrank(mut rank: u64, r: u32) -> Result<Subset> {
    let mut out = vec![0u32; r as usize];
    for i in (1..=r).rev() {
        // Smallest c with C(c, i) > rank, minus one. Overflow counts as "greater".
        let exceeds = |c: u64| binomial(c, u64::from(i)).map_or(true, |b| b > rank);
        let lo = u64::from(i - 1);
        let mut hi = lo + 1;
        while !exceeds(hi) {
            hi = lo + (hi - lo) * 2;
        }
        let (mut lo, mut hi) = (lo, hi);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if exceeds(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let c = u32::try_from(lo).map_err(|_| Error::Overflow(format!("unrank {rank}")))?;
        out[i as usize - 1] = c;
        rank -= binomial(lo, u64::from(i))?;
    }
    Subset::new(out)
}

/// Fills `out` with a uniform random `k`-subset of `{0..v}`, sorted ascending.
///
/// Floyd's algorithm: `k` draws, no permutation of the ground set.
#[inline]
pub fn sample_k_subset_into<R: Rng + ?Sized>(v: u32, k: u32, rng: &mut R, out: &mut Vec<u32>) {
    debug_assert!(k <= v);
    out.clear();
    for j in (v - k)..v {
        let x = rng.random_range(0..=j);
        if out.contains(&x) {
            out.push(j);
        } else {
            out.push(x);
        }
    }
    out.sort_unstable();
}

pub fn random_k_subset<R: Rng + ?Sized>(v: u32, k: u32, rng: &mut R) -> Result<Subset> {
    if k > v {
        return Err(Error::InvalidParams(format!("k = {k} exceeds v = {v}")));
    }
    let mut out = Vec::with_capacity(k as usize);
    sample_k_subset_into(v, k, rng, &mut out);
    Ok(Subset(out))
}

/// Positions of every `t`-subset of `0..k`, in colex order, flattened.
///
/// Applying a pattern to a sorted block yields the block's t-subsets in colex
/// order, each already sorted.
#[derive(Clone, Debug)]
pub struct SubsetPattern {
    k: u32,
    t: u32,
    positions: Vec<u32>,
}

impl SubsetPattern {
    pub fn new(k: u32, t: u32) -> Result<Self> {
        if t > k {
            return Err(Error::InvalidParams(format!(
                "t = {t} exceeds block size {k}"
            )));
        }
        let table = BinomialTable::new(k, t)?;
        let count = table.get(k, t);
        let mut positions = vec![0u32; count as usize * t as usize];
        for (rank, chunk) in positions.chunks_mut(t.max(1) as usize).enumerate() {
            if t > 0 {
                table.unrank_into(rank as u64, chunk);
            }
        }
        if t == 0 {
            positions.clear();
        }
        Ok(Self { k, t, positions })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    /// Number of t-subsets per block, `C(k, t)`.
    pub fn count(&self) -> usize {
        if self.t == 0 {
            1
        } else {
            self.positions.len() / self.t as usize
        }
    }

    pub fn iter(&self) -> std::slice::Chunks<'_, u32> {
        self.positions.chunks(self.t.max(1) as usize)
    }
}

pub fn t_subsets_of(block: &Subset, t: u32) -> Result<Vec<Subset>> {
    let pattern = SubsetPattern::new(block.len() as u32, t)?;
    let b = block.as_slice();
    Ok(pattern
        .iter()
        .map(|pos| Subset(pos.iter().map(|&i| b[i as usize]).collect()))
        .collect())
}
