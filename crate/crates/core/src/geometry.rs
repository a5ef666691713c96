//! Affine-geometry coverings over prime fields and induced coverings.
//!
//! Points of `AG(t, p)` are coordinate vectors over `GF(p)`, indexed by their
//! little-endian base-`p` encoding `x_0 + x_1 p + ... + x_{t-1} p^{t-1}`.
//! A hyperplane is `{x : d . x = b}` for a direction `d` whose first nonzero
//! coordinate is 1 and an offset `b`, giving `(p^t - 1)/(p - 1)` directions
//! and `(p^{t+1} - p)/(p - 1)` hyperplanes.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

use crate::combinatorics::SubsetPattern;
use crate::design::{verify, CoveringDesign, DesignParams, VerifyMode};
use crate::error::{Error, Result};
use crate::format::{read_design, write_design};
use crate::greedy::{extend_with_smallest, greedy_cover, GreedyConfig};
use crate::rng;

/// Largest `p^t` for which [`ag_hyperplane_covering`] materializes every block.
pub const MAX_AG_POINTS: u64 = 1 << 22;

/// Largest total number of point entries in an emitted affine covering.
pub const MAX_AG_ENTRIES: u64 = 1 << 28;

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Primes in `[lo, hi]`.
pub fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    (lo..=hi).filter(|&n| is_prime(n)).collect()
}

fn checked_pow(base: u64, exp: u32) -> Option<u64> {
    base.checked_pow(exp)
}

/// `(p^{t+1} - p) / (p - 1)`.
pub fn hyperplane_count(p: u64, t: u32) -> Option<u64> {
    Some((checked_pow(p, t + 1)? - p) / (p - 1))
}

/// The hyperplanes of `AG(t, p)`, enumerated implicitly.
#[derive(Clone, Debug)]
pub struct AffinePlaneCovering {
    p: u32,
    t: u32,
    /// Normalized directions, `t` coordinates each, flattened.
    directions: Vec<u32>,
}

impl AffinePlaneCovering {
    pub fn new(p: u64, t: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if t < 2 {
            return Err(Error::InvalidParams(format!(
                "affine dimension must be >= 2, got {t}"
            )));
        }
        let points = checked_pow(p, t)
            .filter(|&n| n <= u64::from(u32::MAX))
            .ok_or_else(|| Error::Overflow(format!("{p}^{t} points")))?;
        let p32 = p as u32;
        let mut directions = Vec::new();
        // Leading 1 at position `lead`, zeros before, anything after.
        for lead in 0..t as usize {
            let free = t as usize - lead - 1;
            for tail in 0..p.pow(free as u32) {
                let mut d = vec![0u32; t as usize];
                d[lead] = 1;
                let mut rest = tail;
                for c in d.iter_mut().skip(lead + 1) {
                    *c = (rest % p) as u32;
                    rest /= p;
                }
                directions.extend(d);
            }
        }
        debug_assert_eq!(
            directions.len() as u64 / u64::from(t),
            (points - 1) / (p - 1)
        );
        Ok(Self {
            p: p32,
            t,
            directions,
        })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn point_count(&self) -> u64 {
        u64::from(self.p).pow(self.t)
    }

    pub fn direction_count(&self) -> usize {
        self.directions.len() / self.t as usize
    }

    pub fn hyperplane_count(&self) -> u64 {
        self.direction_count() as u64 * u64::from(self.p)
    }

    pub fn direction(&self, i: usize) -> &[u32] {
        let t = self.t as usize;
        &self.directions[i * t..(i + 1) * t]
    }

    pub fn decode(&self, point: u64, coords: &mut [u32]) {
        let p = u64::from(self.p);
        let mut rest = point;
        for c in coords.iter_mut() {
            *c = (rest % p) as u32;
            rest /= p;
        }
    }

    /// Offset `d . x mod p` of the point with the given coordinates for each direction.
    pub fn offsets<'a>(&'a self, coords: &'a [u32]) -> impl Iterator<Item = u32> + 'a {
        let p = u64::from(self.p);
        self.directions.chunks_exact(self.t as usize).map(move |d| {
            (d.iter()
                .zip(coords)
                .map(|(&a, &x)| u64::from(a) * u64::from(x))
                .sum::<u64>()
                % p) as u32
        })
    }

    /// Buckets the given points by hyperplane. Bucket `dir * p + offset` lists
    /// the indices into `points` lying on that hyperplane, ascending.
    fn bucket(&self, points: &[u64]) -> Vec<Vec<u32>> {
        let mut buckets = vec![Vec::new(); self.hyperplane_count() as usize];
        let mut coords = vec![0u32; self.t as usize];
        let p = self.p as usize;
        for (i, &x) in points.iter().enumerate() {
            self.decode(x, &mut coords);
            for (dir, b) in self.offsets(&coords).enumerate() {
                buckets[dir * p + b as usize].push(i as u32);
            }
        }
        buckets
    }
}

/// The hyperplanes of `AG(t, p)` as a `(p^t, p^{t-1}, t)` covering, in
/// enumeration order (direction, then offset).
pub fn ag_hyperplane_covering(p: u64, t: u32) -> Result<CoveringDesign> {
    let geometry = AffinePlaneCovering::new(p, t)?;
    let points = geometry.point_count();
    let entries = u128::from(geometry.hyperplane_count()) * u128::from(points / p);
    if points > MAX_AG_POINTS || entries > u128::from(MAX_AG_ENTRIES) {
        return Err(Error::BudgetExceeded {
            what: "affine covering",
            needed: entries,
            budget: MAX_AG_ENTRIES.into(),
            hint: "choose a smaller prime or dimension",
        });
    }
    let params = DesignParams::new(points as u32, (points / p) as u32, t)?;
    let all: Vec<u64> = (0..points).collect();
    let mut design = CoveringDesign::new(params);
    for plane in geometry.bucket(&all) {
        design.push_sorted_unchecked(&plane);
    }
    Ok(design)
}

/// Parameters of an induced covering.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InducedConfig {
    /// Target intersection scale, `ceil(v^{1-1/t} / 9)`.
    pub ell: u32,
    pub p: u64,
    /// Greedy trials per cached design; `None` means `ceil(log2 l') + 1`.
    pub precompute_trials: Option<u32>,
    pub seed: u64,
}

impl InducedConfig {
    pub fn validate(&self, params: DesignParams) -> Result<()> {
        let (v, t) = (u128::from(params.v()), params.t());
        let (ell, p) = (u128::from(self.ell), u128::from(self.p));
        if !is_prime(self.p) {
            return Err(Error::NotPrime(self.p));
        }
        let slack = v - u128::from(t);
        if !(4 * ell * p <= slack && slack <= 8 * ell * p) {
            return Err(Error::InvalidParams(format!(
                "need 4*ell <= (v-t)/p <= 8*ell, got ell = {}, p = {}, v - t = {slack}",
                self.ell, self.p
            )));
        }
        if !p.checked_pow(t).is_some_and(|pt| pt > v) {
            return Err(Error::InvalidParams(format!(
                "need p^t > v, got p = {}",
                self.p
            )));
        }
        Ok(())
    }
}

/// `ceil(v^{1-1/t} / 9)`, exactly: the least `l >= 1` with `(9 l)^t >= v^{t-1}`.
pub fn ell_for(v: u32, t: u32) -> Result<u32> {
    let target = u128::from(v)
        .checked_pow(t - 1)
        .ok_or_else(|| Error::Overflow(format!("{v}^{}", t - 1)))?;
    let reaches = |ell: u128| (9 * ell).checked_pow(t).is_none_or(|x| x >= target);
    // Float estimate, then correct by exact comparison.
    let guess = (f64::from(v).powf(1.0 - 1.0 / f64::from(t)) / 9.0)
        .ceil()
        .max(1.0) as u128;
    let mut ell = guess;
    while ell > 1 && reaches(ell - 1) {
        ell -= 1;
    }
    while !reaches(ell) {
        ell += 1;
    }
    u32::try_from(ell).map_err(|_| Error::Overflow("ell".into()))
}

/// Chooses `ell` and the smallest prime `p` with `4 ell <= (v-t)/p <= 8 ell`
/// and `p^t > v`.
pub fn select_induced_params(params: DesignParams) -> Result<InducedConfig> {
    let (v, k, t) = (params.v(), params.k(), params.t());
    let too_small = || Error::TooSmallForInduced { v, k, t };
    if t < 2 {
        return Err(Error::InvalidParams("induced coverings need t >= 2".into()));
    }
    let ell = ell_for(v, t)?;
    let slack = u64::from(v - t);
    let (ell64, k64) = (u64::from(ell), u64::from(k));
    if 9 * ell64 - 1 < k64 {
        return Err(too_small());
    }
    let lo = slack.div_ceil(8 * ell64).max(2);
    let hi = slack / (4 * ell64);
    if hi < lo {
        return Err(too_small());
    }
    let p = primes_in(lo, hi)
        .into_iter()
        .find(|&p| p.checked_pow(t).is_none_or(|pt| pt > u64::from(v)))
        .ok_or(Error::NoPrime {
            v: v.into(),
            t,
            lo,
            hi,
        })?;
    let cfg = InducedConfig {
        ell,
        p,
        precompute_trials: None,
        seed: 0,
    };
    cfg.validate(params)?;
    Ok(cfg)
}

/// Verified small `(l', k, t)` coverings for `ell < l' < 9 ell`, `l' >= k`.
#[derive(Clone, Debug)]
pub struct SmallCoverCache {
    k: u32,
    t: u32,
    ell: u32,
    designs: BTreeMap<usize, CoveringDesign>,
}

impl SmallCoverCache {
    /// The `l'` values the cache must hold.
    pub fn required_keys(k: u32, t: u32, ell: u32) -> std::ops::Range<usize> {
        let lo = (ell as usize + 1).max(k.max(t) as usize);
        lo..(9 * ell as usize).max(lo)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn get(&self, ell_prime: usize) -> Option<&CoveringDesign> {
        self.designs.get(&ell_prime)
    }

    pub fn keys(&self) -> impl Iterator<Item = usize> + '_ {
        self.designs.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.designs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.designs.is_empty()
    }

    pub fn file_name(ell_prime: usize, k: u32, t: u32) -> String {
        format!("ellprime-{ell_prime}_k{k}_t{t}.cov")
    }

    /// Writes every cached design into `dir`, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (&lp, d) in &self.designs {
            fs::write(
                dir.join(Self::file_name(lp, self.k, self.t)),
                write_design(d),
            )?;
        }
        Ok(())
    }

    /// Loads cached designs from `dir` and computes any that are missing,
    /// saving the new ones back.
    pub fn load_or_build(
        dir: &Path,
        k: u32,
        t: u32,
        ell: u32,
        trials: Option<u32>,
        seed: u64,
    ) -> Result<Self> {
        let mut designs = BTreeMap::new();
        let mut missing = Vec::new();
        for lp in Self::required_keys(k, t, ell) {
            let path = dir.join(Self::file_name(lp, k, t));
            if path.exists() {
                designs.insert(lp, load_entry(&path, lp, k, t)?);
            } else {
                missing.push(lp);
            }
        }
        let built = build_entries(&missing, k, t, trials, seed)?;
        let fresh = Self {
            k,
            t,
            ell,
            designs: built,
        };
        fresh.save(dir)?;
        designs.extend(fresh.designs);
        Ok(Self { k, t, ell, designs })
    }
}

fn load_entry(path: &PathBuf, ell_prime: usize, k: u32, t: u32) -> Result<CoveringDesign> {
    let bad = |msg: String| Error::BadCacheEntry {
        path: path.clone(),
        msg,
    };
    let d = read_design(&fs::read_to_string(path)?).map_err(|e| bad(e.to_string()))?;
    let p = d.params();
    if (p.v() as usize, p.k(), p.t()) != (ell_prime, k, t) {
        return Err(bad(format!("holds a {p} design")));
    }
    if verify(&d, VerifyMode::Exhaustive)?.is_covering != Some(true) {
        return Err(bad("not a covering".into()));
    }
    Ok(d)
}

/// `ceil(log2 n) + 1` greedy trials.
fn default_trials(ell_prime: usize) -> u32 {
    let n = ell_prime.max(1) as u64;
    (u64::BITS - (n - 1).leading_zeros()) + 1
}

fn build_entries(
    keys: &[usize],
    k: u32,
    t: u32,
    trials: Option<u32>,
    seed: u64,
) -> Result<BTreeMap<usize, CoveringDesign>> {
    keys.par_iter()
        .map(|&lp| {
            let params = DesignParams::new(lp as u32, k, t)?;
            let n = trials.unwrap_or_else(|| default_trials(lp)).max(1);
            let lp_seed = rng::split_seed(seed, lp as u64);
            let mut best: Option<CoveringDesign> = None;
            for i in 0..u64::from(n) {
                let mut cfg = GreedyConfig::new(params, rng::split_seed(lp_seed, i))?;
                cfg.saturate = true;
                let (d, _) = greedy_cover(params, &cfg)?;
                if verify(&d, VerifyMode::Exhaustive)?.is_covering != Some(true) {
                    return Err(Error::InvalidParams(format!(
                        "greedy produced a non-covering {params}"
                    )));
                }
                if best.as_ref().is_none_or(|b| d.len() < b.len()) {
                    best = Some(d);
                }
            }
            Ok((lp, best.expect("at least one trial").canonical()))
        })
        .collect()
}

pub fn precompute_small_covers(
    k: u32,
    t: u32,
    ell: u32,
    trials: Option<u32>,
    seed: u64,
) -> Result<SmallCoverCache> {
    if ell == 0 {
        return Err(Error::InvalidParams("ell must be at least 1".into()));
    }
    let keys: Vec<usize> = SmallCoverCache::required_keys(k, t, ell).collect();
    let designs = build_entries(&keys, k, t, trials, seed)?;
    Ok(SmallCoverCache { k, t, ell, designs })
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InducedStats {
    pub p: u64,
    pub ell: u32,
    pub hyperplanes: u64,
    /// Number of hyperplanes by intersection size `l'`.
    pub ell_prime_histogram: BTreeMap<usize, u64>,
    pub trivial_hyperplanes: u64,
    pub trivial_blocks: u64,
    pub cached_blocks: u64,
    /// The chosen prime is below 5, where the intersection-size estimate of
    /// the construction does not apply.
    pub small_prime: bool,
}

/// Samples `v` distinct points of `AG(t, p)`, ascending.
fn sample_points<R: Rng + ?Sized>(v: u32, point_count: u64, rng: &mut R) -> Vec<u64> {
    let mut chosen = HashSet::with_capacity(v as usize);
    let mut points = Vec::with_capacity(v as usize);
    while points.len() < v as usize {
        let x = rng.random_range(0..point_count);
        if chosen.insert(x) {
            points.push(x);
        }
    }
    points.sort_unstable();
    points
}

/// Embeds `v` random points in `AG(t, p)` and replaces each hyperplane's
/// intersection with a cached small covering, or with one block per t-subset
/// when the intersection size is outside `(ell, 9 ell)` or below `k`.
pub fn induced_cover(
    params: DesignParams,
    cache: &SmallCoverCache,
    cfg: &InducedConfig,
) -> Result<(CoveringDesign, InducedStats)> {
    cfg.validate(params)?;
    let (v, k, t) = (params.v(), params.k(), params.t());
    if (cache.k, cache.t, cache.ell) != (k, t, cfg.ell) {
        return Err(Error::InvalidParams(format!(
            "cache holds (l',{},{}) designs for ell = {}, need (l',{k},{t}) for ell = {}",
            cache.k, cache.t, cache.ell, cfg.ell
        )));
    }
    let geometry = AffinePlaneCovering::new(cfg.p, t)?;
    let mut rng = rng::stream(cfg.seed);
    let points = sample_points(v, geometry.point_count(), &mut rng);
    let buckets = geometry.bucket(&points);

    let ell = cfg.ell as usize;
    let cached_range = ell + 1..9 * ell;
    let per_plane: Vec<(Vec<u32>, bool)> = buckets
        .par_iter()
        .map(|plane| {
            let lp = plane.len();
            let mut out = Vec::new();
            if cached_range.contains(&lp) && lp >= k as usize {
                let small = cache.get(lp).ok_or(Error::CacheMiss {
                    ell_prime: lp,
                    k,
                    t,
                })?;
                for b in small.blocks() {
                    out.extend(b.iter().map(|&x| plane[x as usize]));
                }
                return Ok((out, false));
            }
            if lp >= t as usize {
                let pattern = SubsetPattern::new(lp as u32, t)?;
                let mut base = Vec::with_capacity(t as usize);
                let mut block = Vec::with_capacity(k as usize);
                for pos in pattern.iter() {
                    base.clear();
                    base.extend(pos.iter().map(|&i| plane[i as usize]));
                    extend_with_smallest(
                        &base,
                        k as usize,
                        plane.iter().copied().chain(0..v),
                        &mut block,
                    );
                    out.extend_from_slice(&block);
                }
            }
            Ok((out, true))
        })
        .collect::<Result<_>>()?;

    let mut design = CoveringDesign::new(params);
    let mut stats = InducedStats {
        p: cfg.p,
        ell: cfg.ell,
        hyperplanes: buckets.len() as u64,
        small_prime: cfg.p < 5,
        ..Default::default()
    };
    for (plane, (blocks, trivial)) in buckets.iter().zip(per_plane) {
        *stats.ell_prime_histogram.entry(plane.len()).or_default() += 1;
        let n = (blocks.len() / k as usize) as u64;
        if trivial {
            stats.trivial_hyperplanes += 1;
            stats.trivial_blocks += n;
        } else {
            stats.cached_blocks += n;
        }
        for b in blocks.chunks_exact(k as usize) {
            design.push_sorted_unchecked(b);
        }
    }
    Ok((design, stats))
}
