//! Random greedy covering with early abort.
//!
//! The packing phase draws uniform random k-sets one at a time and accepts a
//! draw iff none of its t-sets is covered yet. The i.i.d. draw stream stands in
//! for a random ordering of all k-sets: a repeated draw is never clean the
//! second time, so the accepted blocks are exactly those the first-occurrence
//! ordering would pick. After `budget` draws the packing stops and every
//! remaining t-set gets a block of its own.
//!
//! With [`GreedyConfig::saturate`] the packing is instead run to saturation:
//! after the draw stream, the k-sets that are still clean are enumerated and
//! offered in random order. Clean k-sets can only be ones never drawn, so this
//! continues the same uniformly random ordering and reproduces the unbudgeted
//! algorithm exactly.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::combinatorics::{sample_k_subset_into, SubsetPattern};
use crate::design::{CoverageBitmap, CoveringDesign, DesignParams};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::mean_stderr;

/// Default `beta` in the draw budget `ceil(beta * v^t * ln v)`.
pub const DEFAULT_BETA: f64 = 2.0;

/// Refuse saturation sweeps with more clean candidates than this.
pub const MAX_SWEEP_CANDIDATES: usize = 1 << 26;

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyConfig {
    pub seed: u64,
    /// Random k-set draws before cutting over to completion. At least 1.
    pub budget: u64,
    /// Record `(draw index, covered count)` after every draw.
    pub record_trajectory: bool,
    /// Finish the packing exactly instead of aborting at the budget.
    pub saturate: bool,
}

impl GreedyConfig {
    /// Early abort with the default budget.
    pub fn new(p: DesignParams, seed: u64) -> Result<Self> {
        Ok(Self {
            seed,
            budget: default_budget(p)?,
            record_trajectory: false,
            saturate: false,
        })
    }

    pub fn with_budget(seed: u64, budget: u64) -> Self {
        Self {
            seed,
            budget,
            record_trajectory: false,
            saturate: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidParams(
                "greedy budget must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GreedyStats {
    pub draws_used: u64,
    /// Blocks accepted while packing, including any saturation sweep.
    pub blocks_from_packing: u64,
    /// Of those, blocks accepted by the saturation sweep.
    pub blocks_from_sweep: u64,
    pub blocks_from_completion: u64,
    /// t-sets still uncovered when the packing stopped.
    pub uncovered_at_abort: u64,
    pub trajectory: Option<Vec<(u64, u64)>>,
}

impl GreedyStats {
    pub fn total_blocks(&self) -> u64 {
        self.blocks_from_packing + self.blocks_from_completion
    }
}

/// Output of [`greedy_pack`]: a partial design whose blocks share no t-set.
#[derive(Debug)]
pub struct Packing {
    pub blocks: CoveringDesign,
    pub coverage: CoverageBitmap,
    pub stats: GreedyStats,
}

/// `ceil(beta * v^t * ln v)` with the default `beta`, at least 1.
pub fn default_budget(p: DesignParams) -> Result<u64> {
    budget_with_beta(p, DEFAULT_BETA)
}

pub fn budget_with_beta(p: DesignParams, beta: f64) -> Result<u64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let v = f64::from(p.v());
    let raw = (beta * v.powi(p.t() as i32) * v.ln()).ceil();
    if raw.is_nan() || raw >= u64::MAX as f64 {
        return Err(Error::Overflow(format!("greedy budget for {p}")));
    }
    Ok((raw as u64).max(1))
}

pub fn greedy_pack(p: DesignParams, cfg: &GreedyConfig) -> Result<Packing> {
    cfg.validate()?;
    let mut bm = CoverageBitmap::new(p)?;
    let mut blocks = CoveringDesign::new(p);
    let mut rng = rng::stream(cfg.seed);
    let mut trajectory = cfg.record_trajectory.then(Vec::new);
    let mut draw = Vec::with_capacity(p.k() as usize);
    let mut draws = 0;
    while draws < cfg.budget && !bm.is_complete() {
        sample_k_subset_into(p.v(), p.k(), &mut rng, &mut draw);
        draws += 1;
        if bm.mark_if_clean(&draw) {
            blocks.push_sorted_unchecked(&draw);
        }
        if let Some(tr) = trajectory.as_mut() {
            tr.push((draws, bm.covered_count()));
        }
    }
    let from_stream = blocks.len() as u64;

    if cfg.saturate && !bm.is_complete() {
        let mut candidates = Vec::new();
        let mut count = 0usize;
        let mut overflow = false;
        for_each_clean_k_set(&bm, |ks| {
            if count == MAX_SWEEP_CANDIDATES {
                overflow = true;
                return;
            }
            candidates.extend_from_slice(ks);
            count += 1;
        });
        if overflow {
            return Err(Error::BudgetExceeded {
                what: "saturation sweep",
                needed: (count as u128) + 1,
                budget: MAX_SWEEP_CANDIDATES as u128,
                hint: "raise the draw budget before saturating",
            });
        }
        let k = p.k() as usize;
        let mut order: Vec<u32> = (0..count as u32).collect();
        order.shuffle(&mut rng);
        for i in order {
            let ks = &candidates[i as usize * k..(i as usize + 1) * k];
            if bm.mark_if_clean(ks) {
                blocks.push_sorted_unchecked(ks);
            }
        }
    }

    let packed = blocks.len() as u64;
    let stats = GreedyStats {
        draws_used: draws,
        blocks_from_packing: packed,
        blocks_from_sweep: packed - from_stream,
        blocks_from_completion: 0,
        uncovered_at_abort: bm.uncovered_count(),
        trajectory,
    };
    Ok(Packing {
        blocks,
        coverage: bm,
        stats,
    })
}

/// Covers each remaining t-set, in colex order, with the block formed by
/// adding the `k - t` smallest points outside it. t-sets covered incidentally
/// by an earlier completion block are skipped. Returns the number of blocks added.
pub fn greedy_complete(design: &mut CoveringDesign, bm: &mut CoverageBitmap) -> u64 {
    let p = bm.params();
    debug_assert_eq!(design.params(), p);
    let pending: Vec<u64> = bm.uncovered_ranks().collect();
    let mut t_set = vec![0u32; p.t() as usize];
    let mut block = Vec::with_capacity(p.k() as usize);
    let mut added = 0;
    for rank in pending {
        if bm.is_rank_covered(rank) {
            continue;
        }
        bm.table().unrank_into(rank, &mut t_set);
        extend_with_smallest(&t_set, p.k() as usize, 0..p.v(), &mut block);
        bm.mark_block(&block);
        design.push_sorted_unchecked(&block);
        added += 1;
    }
    added
}

/// Writes into `out` the points of `base` followed by the first points of
/// `pool` not already taken, up to `size` points, then sorts.
pub(crate) fn extend_with_smallest(
    base: &[u32],
    size: usize,
    pool: impl IntoIterator<Item = u32>,
    out: &mut Vec<u32>,
) {
    out.clear();
    out.extend_from_slice(base);
    for x in pool {
        if out.len() == size {
            break;
        }
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out.sort_unstable();
}

pub fn greedy_cover(p: DesignParams, cfg: &GreedyConfig) -> Result<(CoveringDesign, GreedyStats)> {
    let Packing {
        blocks: mut design,
        coverage: mut bm,
        mut stats,
    } = greedy_pack(p, cfg)?;
    stats.blocks_from_completion = greedy_complete(&mut design, &mut bm);
    debug_assert!(bm.is_complete());
    Ok((design, stats))
}

/// Calls `f` with every k-set (sorted) none of whose t-subsets is covered.
pub fn for_each_clean_k_set(bm: &CoverageBitmap, mut f: impl FnMut(&[u32])) {
    let p = bm.params();
    let (k, t) = (p.k() as usize, p.t());
    // Patterns for the (t-1)-subsets of a prefix of each length.
    let patterns: Vec<Option<SubsetPattern>> = (0..k as u32)
        .map(|m| (t >= 2 && m >= t - 1).then(|| SubsetPattern::new(m, t - 1).expect("t-1 <= m")))
        .collect();
    let mut cur = Vec::with_capacity(k);
    let mut partial_ranks: Vec<Vec<u64>> = vec![Vec::new(); k];
    extend_clean(bm, &patterns, &mut cur, &mut partial_ranks, &mut f);
}

fn extend_clean(
    bm: &CoverageBitmap,
    patterns: &[Option<SubsetPattern>],
    cur: &mut Vec<u32>,
    partial_ranks: &mut [Vec<u64>],
    f: &mut impl FnMut(&[u32]),
) {
    let p = bm.params();
    let (v, k, t) = (p.v(), p.k() as usize, p.t());
    let m = cur.len();
    if m == k {
        f(cur);
        return;
    }
    let table = bm.table();
    // Colex rank of S + {x} with x above S is rank(S) + C(x, t).
    let mut ranks = std::mem::take(&mut partial_ranks[m]);
    ranks.clear();
    if let Some(pattern) = &patterns[m] {
        let mut sub = Vec::with_capacity(t as usize - 1);
        for pos in pattern.iter() {
            sub.clear();
            sub.extend(pos.iter().map(|&i| cur[i as usize]));
            ranks.push(table.rank(&sub));
        }
    }
    let start = cur.last().map_or(0, |&x| x + 1);
    let end = v - (k - m - 1) as u32;
    for x in start..end {
        let ok = if t == 1 {
            !bm.is_rank_covered(u64::from(x))
        } else {
            let top = table.get(x, t);
            ranks.iter().all(|&r| !bm.is_rank_covered(r + top))
        };
        if ok {
            cur.push(x);
            extend_clean(bm, patterns, cur, partial_ranks, f);
            cur.pop();
        }
    }
    partial_ranks[m] = ranks;
}

/// Number of draws that realizes time `tau` of the continuous-time model:
/// k-sets arrive at total rate `C(v,t) / C(k,t)`.
pub fn draws_for_tau(p: DesignParams, tau: f64) -> Result<u64> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParams(format!("tau must be >= 0, got {tau}")));
    }
    let rate = p.t_set_count()? as f64 / p.t_sets_per_block()? as f64;
    let m = (tau * rate).round();
    if m.is_nan() || m >= u64::MAX as f64 {
        return Err(Error::Overflow(format!("draw count for tau = {tau}")));
    }
    Ok(m as u64)
}

/// Mean fraction of t-sets left uncovered after packing for time `tau`, with
/// its standard error over `trials` independent runs.
pub fn uncovered_fraction_at_tau(
    p: DesignParams,
    tau: f64,
    trials: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let m = draws_for_tau(p, tau)?;
    if m == 0 {
        return Ok((1.0, 0.0));
    }
    let fractions = (0..trials)
        .into_par_iter()
        .map(|i| {
            let cfg = GreedyConfig::with_budget(rng::split_seed(seed, i), m);
            let packing = greedy_pack(p, &cfg)?;
            let bm = &packing.coverage;
            Ok(bm.uncovered_count() as f64 / bm.total() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_stderr(&fractions))
}
