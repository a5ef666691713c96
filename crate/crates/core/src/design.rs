//! Covering designs, coverage bookkeeping over colex ranks, density and
//! verification.

use std::fmt;

use crate::combinatorics::{binomial, sample_k_subset_into, BinomialTable, Subset, SubsetPattern};
use crate::error::{Error, Result};
use crate::rng;

/// Largest coverage bitmap any routine will allocate (2^34 bits, 2 GiB).
pub const MAX_BITMAP_BITS: u64 = 1 << 34;

/// Default limit on `C(v, t)` for exhaustive verification.
pub const DEFAULT_EXHAUSTIVE_BUDGET: u64 = 100_000_000;

/// Uncovered t-sets kept in a [`VerifyReport`]; the count is always exact.
pub const MAX_REPORTED_UNCOVERED: usize = 1000;

/// Parameters `(v, k, t)` with `1 <= t <= k <= v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DesignParams {
    v: u32,
    k: u32,
    t: u32,
}

impl DesignParams {
    pub fn new(v: u32, k: u32, t: u32) -> Result<Self> {
        if !(1 <= t && t <= k && k <= v) {
            return Err(Error::InvalidParams(format!(
                "need 1 <= t <= k <= v, got (v,k,t) = ({v},{k},{t})"
            )));
        }
        Ok(Self { v, k, t })
    }

    pub fn v(&self) -> u32 {
        self.v
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    /// `C(v, t)`, the number of t-sets to cover.
    pub fn t_set_count(&self) -> Result<u64> {
        binomial(self.v.into(), self.t.into())
    }

    /// `C(k, t)`, the number of t-sets inside one block.
    pub fn t_sets_per_block(&self) -> Result<u64> {
        binomial(self.k.into(), self.t.into())
    }
}

impl fmt::Display for DesignParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.v, self.k, self.t)
    }
}

/// A family of k-blocks over `{0..v}`. Blocks are stored flat, each sorted.
///
/// Construction checks block shape only; whether the blocks cover every t-set
/// is the job of [`verify`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoveringDesign {
    params: DesignParams,
    points: Vec<u32>,
}

impl CoveringDesign {
    pub fn new(params: DesignParams) -> Self {
        Self {
            params,
            points: Vec::new(),
        }
    }

    pub fn from_blocks<I, B>(params: DesignParams, blocks: I) -> Result<Self>
    where
        I: IntoIterator<Item = B>,
        B: AsRef<[u32]>,
    {
        let mut d = Self::new(params);
        for b in blocks {
            d.push_block(b.as_ref())?;
        }
        Ok(d)
    }

    pub fn params(&self) -> DesignParams {
        self.params
    }

    /// Appends a block given in any order; rejects wrong size, repeats and
    /// out-of-range points.
    pub fn push_block(&mut self, block: &[u32]) -> Result<()> {
        let k = self.params.k as usize;
        if block.len() != k {
            return Err(Error::InvalidParams(format!(
                "block {block:?} has {} points, expected {k}",
                block.len()
            )));
        }
        let start = self.points.len();
        self.points.extend_from_slice(block);
        let new = &mut self.points[start..];
        new.sort_unstable();
        let bad = new.windows(2).any(|w| w[0] == w[1]) || new[k - 1] >= self.params.v;
        if bad {
            self.points.truncate(start);
            return Err(Error::InvalidParams(format!(
                "block {block:?} must have {k} distinct points below {}",
                self.params.v
            )));
        }
        Ok(())
    }

    /// Appends a block the caller guarantees is sorted, distinct and in range.
    pub(crate) fn push_sorted_unchecked(&mut self, block: &[u32]) {
        debug_assert_eq!(block.len(), self.params.k as usize);
        debug_assert!(block.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(block.last().is_none_or(|&x| x < self.params.v));
        self.points.extend_from_slice(block);
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.params.k as usize
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn block(&self, i: usize) -> &[u32] {
        let k = self.params.k as usize;
        &self.points[i * k..(i + 1) * k]
    }

    pub fn blocks(&self) -> std::slice::ChunksExact<'_, u32> {
        self.points.chunks_exact(self.params.k as usize)
    }

    pub fn to_subsets(&self) -> Vec<Subset> {
        self.blocks()
            .map(|b| Subset::new(b.to_vec()).expect("blocks are sorted"))
            .collect()
    }

    /// Blocks sorted lexicographically (points within blocks are always sorted).
    pub fn canonical(&self) -> Self {
        let mut blocks: Vec<&[u32]> = self.blocks().collect();
        blocks.sort_unstable();
        Self {
            params: self.params,
            points: blocks.concat(),
        }
    }
}

/// An exact rational density `numerator / denominator` in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Density {
    pub numerator: u128,
    pub denominator: u128,
}

impl Density {
    fn reduced(n: u128, d: u128) -> Self {
        let (mut a, mut b) = (n, d);
        while b != 0 {
            (a, b) = (b, a % b);
        }
        let g = a.max(1);
        Self {
            numerator: n / g,
            denominator: d / g,
        }
    }

    pub fn as_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

impl fmt::Display for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{} ({:.6})",
            self.numerator,
            self.denominator,
            self.as_f64()
        )
    }
}

/// Average number of blocks containing a t-set: `|blocks| C(k,t) / C(v,t)`.
pub fn density(d: &CoveringDesign) -> Result<Density> {
    let p = d.params();
    let num = (d.len() as u128)
        .checked_mul(p.t_sets_per_block()?.into())
        .ok_or_else(|| Error::Overflow("design density".into()))?;
    Ok(Density::reduced(num, p.t_set_count()?.into()))
}

/// One bit per t-set of `{0..v}`, indexed by colex rank.
#[derive(Clone)]
pub struct CoverageBitmap {
    params: DesignParams,
    table: BinomialTable,
    pattern: SubsetPattern,
    words: Vec<u64>,
    total: u64,
    covered: u64,
    ranks: Vec<u64>,
    scratch: Vec<u32>,
}

impl fmt::Debug for CoverageBitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoverageBitmap")
            .field("params", &self.params)
            .field("covered", &self.covered)
            .field("total", &self.total)
            .finish()
    }
}

impl CoverageBitmap {
    pub fn new(params: DesignParams) -> Result<Self> {
        Self::with_budget(params, MAX_BITMAP_BITS)
    }

    pub fn with_budget(params: DesignParams, max_bits: u64) -> Result<Self> {
        let total = params.t_set_count()?;
        if total > max_bits {
            return Err(Error::BudgetExceeded {
                what: "coverage bitmap",
                needed: total.into(),
                budget: max_bits.into(),
                hint: "use sampled verification or smaller parameters",
            });
        }
        let table = BinomialTable::new(params.v, params.t)?;
        let pattern = SubsetPattern::new(params.k, params.t)?;
        let per_block = pattern.count();
        Ok(Self {
            params,
            table,
            pattern,
            words: vec![0; total.div_ceil(64) as usize],
            total,
            covered: 0,
            ranks: Vec::with_capacity(per_block),
            scratch: Vec::with_capacity(params.t as usize),
        })
    }

    pub fn params(&self) -> DesignParams {
        self.params
    }

    pub fn table(&self) -> &BinomialTable {
        &self.table
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn covered_count(&self) -> u64 {
        self.covered
    }

    pub fn uncovered_count(&self) -> u64 {
        self.total - self.covered
    }

    pub fn is_complete(&self) -> bool {
        self.covered == self.total
    }

    #[inline]
    pub fn is_rank_covered(&self, rank: u64) -> bool {
        self.words[(rank >> 6) as usize] >> (rank & 63) & 1 == 1
    }

    /// Sets one bit; returns whether it was previously clear.
    #[inline]
    pub fn cover_rank(&mut self, rank: u64) -> bool {
        let w = &mut self.words[(rank >> 6) as usize];
        let mask = 1u64 << (rank & 63);
        if *w & mask == 0 {
            *w |= mask;
            self.covered += 1;
            true
        } else {
            false
        }
    }

    /// Coverage of a sorted t-set.
    pub fn is_covered(&self, t_set: &[u32]) -> bool {
        self.is_rank_covered(self.table.rank(t_set))
    }

    #[inline]
    fn fill_block_ranks(&mut self, block: &[u32]) {
        debug_assert_eq!(block.len(), self.params.k as usize);
        debug_assert!(block.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(block.last().is_none_or(|&x| x < self.params.v));
        self.ranks.clear();
        for pos in self.pattern.iter() {
            self.scratch.clear();
            self.scratch.extend(pos.iter().map(|&i| block[i as usize]));
            self.ranks.push(self.table.rank(&self.scratch));
        }
    }

    /// Covers every t-subset of a sorted k-block; returns how many were new.
    pub fn mark_block(&mut self, block: &[u32]) -> u64 {
        self.fill_block_ranks(block);
        let mut fresh = 0;
        for i in 0..self.ranks.len() {
            fresh += u64::from(self.cover_rank(self.ranks[i]));
        }
        fresh
    }

    /// True iff no t-subset of the sorted k-block is covered yet.
    pub fn block_is_clean(&mut self, block: &[u32]) -> bool {
        self.fill_block_ranks(block);
        self.ranks.iter().all(|&r| !self.is_rank_covered(r))
    }

    /// Marks the block only if it is clean. Returns whether it was marked.
    #[inline]
    pub fn mark_if_clean(&mut self, block: &[u32]) -> bool {
        if !self.block_is_clean(block) {
            return false;
        }
        for i in 0..self.ranks.len() {
            self.cover_rank(self.ranks[i]);
        }
        true
    }

    /// Colex ranks of the uncovered t-sets, ascending.
    pub fn uncovered_ranks(&self) -> impl Iterator<Item = u64> + '_ {
        let total = self.total;
        self.words.iter().enumerate().flat_map(move |(wi, &w)| {
            let mut free = !w;
            std::iter::from_fn(move || {
                if free == 0 {
                    return None;
                }
                let bit = free.trailing_zeros() as u64;
                free &= free - 1;
                Some(wi as u64 * 64 + bit)
            })
            .take_while(move |&r| r < total)
        })
    }

    pub fn unrank(&self, rank: u64) -> Vec<u32> {
        let mut out = vec![0; self.params.t as usize];
        self.table.unrank_into(rank, &mut out);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyMode {
    Exhaustive,
    /// Test `samples` uniform random t-sets drawn from the given seed.
    Sampled {
        samples: u64,
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyKind {
    Exhaustive,
    Sampled,
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub mode: VerifyKind,
    /// t-sets examined.
    pub checked: u64,
    /// Uncovered t-sets found, at most [`MAX_REPORTED_UNCOVERED`].
    pub uncovered_found: Vec<Subset>,
    /// Exact number of uncovered t-sets found (sampled mode counts draws).
    pub uncovered_count: u64,
    /// Definitive answer; only exhaustive verification gives one.
    pub is_covering: Option<bool>,
}

impl VerifyReport {
    /// No uncovered t-set was found.
    pub fn passed(&self) -> bool {
        self.uncovered_count == 0
    }
}

pub fn verify(d: &CoveringDesign, mode: VerifyMode) -> Result<VerifyReport> {
    verify_with_budget(d, mode, DEFAULT_EXHAUSTIVE_BUDGET)
}

pub fn verify_with_budget(
    d: &CoveringDesign,
    mode: VerifyMode,
    exhaustive_budget: u64,
) -> Result<VerifyReport> {
    match mode {
        VerifyMode::Exhaustive => verify_exhaustive(d, exhaustive_budget),
        VerifyMode::Sampled { samples, seed } => Ok(verify_sampled(d, samples, seed)),
    }
}

fn verify_exhaustive(d: &CoveringDesign, budget: u64) -> Result<VerifyReport> {
    let needed = d.params().t_set_count()?;
    if needed > budget {
        return Err(Error::BudgetExceeded {
            what: "exhaustive verification",
            needed: needed.into(),
            budget: budget.into(),
            hint: "use sampled verification",
        });
    }
    let mut bm = CoverageBitmap::with_budget(d.params(), budget)?;
    for b in d.blocks() {
        bm.mark_block(b);
    }
    let uncovered_found = bm
        .uncovered_ranks()
        .take(MAX_REPORTED_UNCOVERED)
        .map(|r| Subset::new(bm.unrank(r)).expect("unrank is sorted"))
        .collect();
    Ok(VerifyReport {
        mode: VerifyKind::Exhaustive,
        checked: bm.total(),
        uncovered_found,
        uncovered_count: bm.uncovered_count(),
        is_covering: Some(bm.is_complete()),
    })
}

fn verify_sampled(d: &CoveringDesign, samples: u64, seed: u64) -> VerifyReport {
    let p = d.params();
    let mut incidence: Vec<Vec<u32>> = vec![Vec::new(); p.v as usize];
    for (i, b) in d.blocks().enumerate() {
        for &x in b {
            incidence[x as usize].push(i as u32);
        }
    }
    let mut rng = rng::stream(seed);
    let mut t_set = Vec::with_capacity(p.t as usize);
    let mut uncovered_found = Vec::new();
    let mut uncovered_count = 0;
    for _ in 0..samples {
        sample_k_subset_into(p.v, p.t, &mut rng, &mut t_set);
        if !sample_is_covered(d, &incidence, &t_set) {
            uncovered_count += 1;
            if uncovered_found.len() < MAX_REPORTED_UNCOVERED {
                uncovered_found.push(Subset::new(t_set.clone()).expect("sorted sample"));
            }
        }
    }
    VerifyReport {
        mode: VerifyKind::Sampled,
        checked: samples,
        uncovered_found,
        uncovered_count,
        is_covering: None,
    }
}

fn sample_is_covered(d: &CoveringDesign, incidence: &[Vec<u32>], t_set: &[u32]) -> bool {
    let rarest = t_set
        .iter()
        .min_by_key(|&&x| incidence[x as usize].len())
        .expect("t >= 1");
    incidence[*rarest as usize].iter().any(|&bi| {
        let block = d.block(bi as usize);
        t_set.iter().all(|x| block.binary_search(x).is_ok())
    })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use proptest::prelude::*;

    use super::*;
    use crate::combinatorics::{t_subsets_of, Subset};

    fn params(v: u32, k: u32, t: u32) -> DesignParams {
        DesignParams::new(v, k, t).unwrap()
    }

    pub(crate) fn fano() -> CoveringDesign {
        let blocks = [
            [0, 1, 3],
            [1, 2, 4],
            [2, 3, 5],
            [3, 4, 6],
            [4, 5, 0],
            [5, 6, 1],
            [6, 0, 2],
        ];
        CoveringDesign::from_blocks(params(7, 3, 2), blocks).unwrap()
    }

    fn all_k_subsets(v: u32, k: u32) -> Vec<Vec<u32>> {
        (0u32..1 << v)
            .filter(|m| m.count_ones() == k)
            .map(|m| (0..v).filter(|i| m >> i & 1 == 1).collect())
            .collect()
    }

    #[test]
    fn params_validation() {
        assert!(DesignParams::new(5, 3, 2).is_ok());
        assert!(DesignParams::new(5, 3, 0).is_err());
        assert!(DesignParams::new(5, 2, 3).is_err());
        assert!(DesignParams::new(2, 3, 2).is_err());
    }

    #[test]
    fn density_examples() {
        let ag = CoveringDesign::from_blocks(
            params(9, 3, 2),
            [
                [0, 1, 2],
                [3, 4, 5],
                [6, 7, 8],
                [0, 3, 6],
                [1, 4, 7],
                [2, 5, 8],
                [0, 4, 8],
                [1, 5, 6],
                [2, 3, 7],
                [0, 5, 7],
                [1, 3, 8],
                [2, 4, 6],
            ],
        )
        .unwrap();
        assert_eq!(
            density(&ag).unwrap(),
            Density {
                numerator: 1,
                denominator: 1
            }
        );

        let pairs = CoveringDesign::from_blocks(params(4, 2, 2), all_k_subsets(4, 2)).unwrap();
        assert_eq!(pairs.len(), 6);
        assert_eq!(density(&pairs).unwrap().as_f64(), 1.0);

        let d = density(&fano()).unwrap();
        assert_eq!((d.numerator, d.denominator), (1, 1));
    }

    #[test]
    fn push_block_rejects_bad_blocks() {
        let mut d = CoveringDesign::new(params(7, 3, 2));
        assert!(d.push_block(&[0, 0, 1]).is_err());
        assert!(d.push_block(&[0, 1, 7]).is_err());
        assert!(d.push_block(&[0, 1]).is_err());
        assert!(d.is_empty());
        d.push_block(&[5, 1, 3]).unwrap();
        assert_eq!(d.block(0), &[1, 3, 5]);
    }

    #[test]
    fn mark_block_examples() {
        let mut bm = CoverageBitmap::new(params(8, 3, 2)).unwrap();
        assert!(bm.block_is_clean(&[3, 4, 5]));
        assert_eq!(bm.mark_block(&[0, 1, 2]), 3);
        assert_eq!(bm.mark_block(&[0, 1, 2]), 0);
        assert!(!bm.block_is_clean(&[1, 2, 3]));
        assert!(bm.block_is_clean(&[3, 4, 5]));
        assert_eq!(bm.mark_block(&[1, 2, 3]), 2);
        assert_eq!(bm.covered_count(), 5);
        assert!(bm.is_covered(&[1, 3]));
        assert!(!bm.is_covered(&[0, 3]));
    }

    #[test]
    fn mark_if_clean_leaves_dirty_blocks_alone() {
        let mut bm = CoverageBitmap::new(params(6, 3, 2)).unwrap();
        assert!(bm.mark_if_clean(&[0, 1, 2]));
        assert!(!bm.mark_if_clean(&[0, 1, 5]));
        assert_eq!(bm.covered_count(), 3);
        assert!(!bm.is_covered(&[0, 5]));
    }

    #[test]
    fn uncovered_ranks_lists_clear_bits() {
        let mut bm = CoverageBitmap::new(params(5, 3, 2)).unwrap();
        bm.mark_block(&[0, 1, 2]);
        let ranks: Vec<u64> = bm.uncovered_ranks().collect();
        assert_eq!(ranks, vec![3, 4, 5, 6, 7, 8, 9]);
        let full = CoverageBitmap::new(params(70, 3, 2)).unwrap();
        assert_eq!(full.uncovered_ranks().count() as u64, full.total());
    }

    #[test]
    fn verify_fano() {
        let r = verify(&fano(), VerifyMode::Exhaustive).unwrap();
        assert_eq!(r.is_covering, Some(true));
        assert_eq!(r.checked, 21);
        assert!(r.uncovered_found.is_empty());

        let mut broken = CoveringDesign::new(params(7, 3, 2));
        for b in fano().blocks().skip(1) {
            broken.push_block(b).unwrap();
        }
        let r = verify(&broken, VerifyMode::Exhaustive).unwrap();
        assert_eq!(r.is_covering, Some(false));
        assert_eq!(r.uncovered_count, 3);
        let expected: HashSet<Subset> = t_subsets_of(&Subset::new(vec![0, 1, 3]).unwrap(), 2)
            .unwrap()
            .into_iter()
            .collect();
        assert_eq!(
            r.uncovered_found.into_iter().collect::<HashSet<_>>(),
            expected
        );
    }

    #[test]
    fn all_k_subsets_cover() {
        let d = CoveringDesign::from_blocks(params(8, 4, 3), all_k_subsets(8, 4)).unwrap();
        assert_eq!(
            verify(&d, VerifyMode::Exhaustive).unwrap().is_covering,
            Some(true)
        );
    }

    #[test]
    fn exhaustive_budget_refusal() {
        let d = CoveringDesign::new(params(1000, 3, 2));
        let err = verify_with_budget(&d, VerifyMode::Exhaustive, 1000).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
        assert!(err.to_string().contains("sampled"));
    }

    #[test]
    fn sampled_verify_never_claims_covering() {
        let r = verify(
            &fano(),
            VerifyMode::Sampled {
                samples: 500,
                seed: 3,
            },
        )
        .unwrap();
        assert_eq!(r.is_covering, None);
        assert!(r.passed());
        assert_eq!(r.checked, 500);

        let mut broken = CoveringDesign::new(params(7, 3, 2));
        for b in fano().blocks().skip(1) {
            broken.push_block(b).unwrap();
        }
        let r = verify(
            &broken,
            VerifyMode::Sampled {
                samples: 2000,
                seed: 3,
            },
        )
        .unwrap();
        assert!(!r.passed());
        assert!(r
            .uncovered_found
            .iter()
            .all(|s| s.as_slice().iter().all(|x| [0, 1, 3].contains(x))));
    }

    /// Naive oracle: set of covered t-sets as explicit sorted vectors.
    fn naive_union(p: DesignParams, blocks: &[Vec<u32>]) -> HashSet<Vec<u32>> {
        let mut covered = HashSet::new();
        for b in blocks {
            let s = Subset::new(b.clone()).unwrap();
            for ts in t_subsets_of(&s, p.t()).unwrap() {
                covered.insert(ts.into_vec());
            }
        }
        covered
    }

    fn arb_design() -> impl Strategy<Value = (DesignParams, Vec<Vec<u32>>)> {
        (3u32..=12)
            .prop_flat_map(|v| (Just(v), 1u32..=v.min(5)))
            .prop_flat_map(|(v, k)| (Just(v), Just(k), 1u32..=k))
            .prop_flat_map(|(v, k, t)| {
                let block = proptest::sample::subsequence((0..v).collect::<Vec<_>>(), k as usize);
                (
                    Just(params(v, k, t)),
                    proptest::collection::vec(block, 0..25),
                )
            })
    }

    proptest! {
        #[test]
        fn covered_count_matches_naive_union((p, blocks) in arb_design()) {
            let mut bm = CoverageBitmap::new(p).unwrap();
            let mut seen = HashSet::new();
            for b in &blocks {
                let before = seen.len();
                seen.extend(naive_union(p, std::slice::from_ref(b)));
                prop_assert_eq!(bm.mark_block(b), (seen.len() - before) as u64);
                prop_assert_eq!(bm.covered_count(), seen.len() as u64);
            }
            let d = CoveringDesign::from_blocks(p, &blocks).unwrap();
            let r = verify(&d, VerifyMode::Exhaustive).unwrap();
            // Brute-force double loop over (t-set, block).
            let all_t: Vec<Vec<u32>> = all_k_subsets(p.v(), p.t());
            let brute_uncovered = all_t
                .iter()
                .filter(|ts| !blocks.iter().any(|b| ts.iter().all(|x| b.contains(x))))
                .count() as u64;
            prop_assert_eq!(r.uncovered_count, brute_uncovered);
            prop_assert_eq!(r.is_covering, Some(brute_uncovered == 0));
            if brute_uncovered == 0 {
                prop_assert!(density(&d).unwrap().as_f64() >= 1.0);
            }
        }
    }
}
