//! Density laws of random greedy coverings, as estimators.
//!
//! A t-set is still uncovered at time `tau` of the continuous-time greedy
//! process with probability tending to `P(tau) = (tau D + 1)^(-1/D)`, where
//! `D = C(k,t) - 1`. [`simulate_idealized_tree`] estimates the same quantity by
//! growing the idealized birth tree directly, and [`density_experiment`] with
//! [`fit_alpha`] measures how fast the density of real greedy coverings
//! approaches 1.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::binomial;
use crate::design::{density, CoverageBitmap, DesignParams};
use crate::error::{Error, Result};
use crate::greedy::{
    budget_with_beta, for_each_clean_k_set, greedy_cover, greedy_pack, GreedyConfig, DEFAULT_BETA,
};
use crate::rng;
use crate::stats::mean_stderr;

/// Largest `C(v, t)` the clique statistic will scan.
pub const MAX_CLIQUE_SCAN: u64 = 10_000_000;

/// `(tau D + 1)^(-1/D)`.
pub fn p_tau(tau: f64, d: u32) -> f64 {
    let d = f64::from(d);
    (tau * d + 1.0).powf(-1.0 / d)
}

/// `D = C(k,t) - 1`, the number of t-children of a k-vertex.
pub fn branching_d(k: u32, t: u32) -> Result<u32> {
    let d = binomial(k.into(), t.into())?.saturating_sub(1);
    u32::try_from(d).map_err(|_| Error::Overflow(format!("C({k},{t}) - 1")))
}

/// Conjectured exponent `(k - t) / D` of the density excess.
pub fn conjectured_alpha(k: u32, t: u32) -> Result<f64> {
    Ok(f64::from(k - t) / f64::from(branching_d(k, t)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdealizedTreeConfig {
    pub tau: f64,
    pub d: u32,
    pub trials: u64,
    /// Node limit per trial; exceeding it is an error.
    pub max_nodes: u64,
    pub seed: u64,
}

impl IdealizedTreeConfig {
    /// Headroom demanded over the expected tree size `e^{tau D}`.
    pub const SAFETY_FACTOR: f64 = 16.0;

    pub fn new(tau: f64, d: u32, trials: u64, seed: u64) -> Self {
        Self {
            tau,
            d,
            trials,
            max_nodes: 10_000_000,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeEstimate {
    /// Fraction of trials whose root ended uncovered.
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
    pub mean_nodes: f64,
}

struct TreeWalk<'a, R> {
    rng: &'a mut R,
    d: u32,
    nodes: u64,
    max_nodes: u64,
}

struct Exploded;

impl<R: Rng> TreeWalk<'_, R> {
    fn count(&mut self) -> std::result::Result<(), Exploded> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            Err(Exploded)
        } else {
            Ok(())
        }
    }

    /// A t-vertex alive at `time` is uncovered iff none of its k-children,
    /// born at the points of a unit-rate Poisson process on `(0, time)`, is accepted.
    fn t_uncovered(&mut self, time: f64) -> std::result::Result<bool, Exploded> {
        let mut s = time;
        loop {
            let gap: f64 = self.rng.sample(Exp1);
            s -= gap;
            if s <= 0.0 {
                return Ok(true);
            }
            self.count()?;
            if self.k_accepted(s)? {
                return Ok(false);
            }
        }
    }

    /// A k-vertex born at `time` is accepted iff all its `D` t-children are uncovered.
    fn k_accepted(&mut self, time: f64) -> std::result::Result<bool, Exploded> {
        for _ in 0..self.d {
            self.count()?;
            if !self.t_uncovered(time)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Monte Carlo estimate of `P(tau)` from the idealized tree, simulated in
/// continuous time.
///
/// Subtrees are generated lazily: once a vertex's label is determined its
/// remaining children are never drawn. They are independent of everything
/// already drawn, so the estimate is unbiased, and the node count reported is
/// that of the explored part.
pub fn simulate_idealized_tree(cfg: &IdealizedTreeConfig) -> Result<TreeEstimate> {
    if !(cfg.tau >= 0.0 && cfg.tau.is_finite()) || cfg.d == 0 || cfg.trials == 0 {
        return Err(Error::InvalidParams(format!(
            "need tau >= 0, D >= 1 and trials >= 1, got tau = {}, D = {}, trials = {}",
            cfg.tau, cfg.d, cfg.trials
        )));
    }
    let expected = (cfg.tau * f64::from(cfg.d)).exp() * IdealizedTreeConfig::SAFETY_FACTOR;
    if expected > cfg.max_nodes as f64 {
        return Err(Error::BudgetExceeded {
            what: "idealized tree",
            needed: expected as u128,
            budget: cfg.max_nodes.into(),
            hint: "lower tau or raise the node limit",
        });
    }
    run_trials(cfg)
}

fn run_trials(cfg: &IdealizedTreeConfig) -> Result<TreeEstimate> {
    let outcomes = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::trial_stream(cfg.seed, i);
            let mut walk = TreeWalk {
                rng: &mut rng,
                d: cfg.d,
                nodes: 1,
                max_nodes: cfg.max_nodes,
            };
            match walk.t_uncovered(cfg.tau) {
                Ok(uncovered) => Ok((f64::from(u8::from(uncovered)), walk.nodes)),
                Err(Exploded) => Err(Error::TreeExplosion {
                    trial: i,
                    max_nodes: cfg.max_nodes,
                }),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let hits: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let (estimate, stderr) = mean_stderr(&hits);
    let mean_nodes = outcomes.iter().map(|o| o.1 as f64).sum::<f64>() / outcomes.len() as f64;
    Ok(TreeEstimate {
        estimate,
        stderr,
        trials: cfg.trials,
        mean_nodes,
    })
}

/// How many random draws each greedy run in an experiment gets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BudgetRule {
    /// `ceil(beta v^t ln v)` draws, then completion.
    EarlyAbort {
        beta: f64,
    },
    Fixed(u64),
    /// `ceil(beta v^t ln v)` draws, then a sweep to a maximal packing. The
    /// result has the law of greedy run until no k-set can be chosen.
    Saturate {
        beta: f64,
    },
}

impl Default for BudgetRule {
    fn default() -> Self {
        BudgetRule::Saturate { beta: DEFAULT_BETA }
    }
}

impl BudgetRule {
    pub fn config(&self, p: DesignParams, seed: u64) -> Result<GreedyConfig> {
        Ok(match *self {
            BudgetRule::EarlyAbort { beta } => {
                GreedyConfig::with_budget(seed, budget_with_beta(p, beta)?)
            }
            BudgetRule::Fixed(n) => GreedyConfig::with_budget(seed, n),
            BudgetRule::Saturate { beta } => {
                let mut cfg = GreedyConfig::with_budget(seed, budget_with_beta(p, beta)?);
                cfg.saturate = true;
                cfg
            }
        })
    }
}

/// One row of the density experiment CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub v: u32,
    pub k: u32,
    pub t: u32,
    pub trials: u64,
    pub mean_density: f64,
    pub stderr: f64,
    pub mean_blocks: f64,
    pub seed: u64,
}

/// Mean density of `trials` greedy coverings for each `v`. Each `v` gets its
/// own stream `split_seed(seed, v)`, and trial `i` within it
/// `split_seed(that, i)`.
pub fn density_experiment(
    k: u32,
    t: u32,
    v_list: &[u32],
    trials: u64,
    rule: BudgetRule,
    seed: u64,
) -> Result<Vec<DensityRow>> {
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    v_list
        .iter()
        .map(|&v| {
            let p = DesignParams::new(v, k, t)?;
            let v_seed = rng::split_seed(seed, v.into());
            let runs = (0..trials)
                .into_par_iter()
                .map(|i| {
                    let cfg = rule.config(p, rng::split_seed(v_seed, i))?;
                    let (d, _) = greedy_cover(p, &cfg)?;
                    Ok((density(&d)?.as_f64(), d.len() as f64))
                })
                .collect::<Result<Vec<_>>>()?;
            let densities: Vec<f64> = runs.iter().map(|r| r.0).collect();
            let (mean_density, stderr) = mean_stderr(&densities);
            let mean_blocks = runs.iter().map(|r| r.1).sum::<f64>() / trials as f64;
            Ok(DensityRow {
                v,
                k,
                t,
                trials,
                mean_density,
                stderr,
                mean_blocks,
                seed,
            })
        })
        .collect()
}

pub fn write_density_csv<W: Write>(rows: &[DensityRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    if rows.is_empty() {
        w.write_record([
            "v",
            "k",
            "t",
            "trials",
            "mean_density",
            "stderr",
            "mean_blocks",
            "seed",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_density_csv<R: Read>(input: R) -> Result<Vec<DensityRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaFit {
    /// Points `(v, mean density)` that entered the fit.
    pub points: Vec<(u32, f64)>,
    pub v_lo: u32,
    pub v_hi: u32,
    /// Negated slope of `ln(delta - 1)` against `ln v`.
    pub alpha: f64,
    pub intercept: f64,
    /// RMS residual of the fit.
    pub residual: f64,
    /// `v` values inside the range dropped because their density was `<= 1`.
    pub excluded: Vec<u32>,
}

/// JSON form of an [`AlphaFit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaReport {
    pub k: u32,
    pub t: u32,
    pub alpha: f64,
    pub residual: f64,
    pub v_lo: u32,
    pub v_hi: u32,
}

impl AlphaReport {
    pub fn new(k: u32, t: u32, fit: &AlphaFit) -> Self {
        Self {
            k,
            t,
            alpha: fit.alpha,
            residual: fit.residual,
            v_lo: fit.v_lo,
            v_hi: fit.v_hi,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain struct serializes")
    }
}

/// Ordinary least squares of `ln(delta - 1)` on `ln v` over `v_lo <= v <= v_hi`.
pub fn fit_alpha(points: &[(u32, f64)], v_lo: u32, v_hi: u32) -> Result<AlphaFit> {
    let in_range: Vec<(u32, f64)> = points
        .iter()
        .copied()
        .filter(|&(v, _)| v_lo <= v && v <= v_hi)
        .collect();
    let excluded: Vec<u32> = in_range
        .iter()
        .filter(|&&(_, d)| d.is_nan() || d <= 1.0)
        .map(|&(v, _)| v)
        .collect();
    let used: Vec<(u32, f64)> = in_range.into_iter().filter(|&(_, d)| d > 1.0).collect();
    if used.len() < 3 {
        return Err(Error::InsufficientFitPoints {
            v_lo,
            v_hi,
            found: used.len(),
        });
    }
    let xy: Vec<(f64, f64)> = used
        .iter()
        .map(|&(v, d)| (f64::from(v).ln(), (d - 1.0).ln()))
        .collect();
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientFitPoints {
            v_lo,
            v_hi,
            found: 1,
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xy
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(AlphaFit {
        points: used,
        v_lo,
        v_hi,
        alpha: -slope,
        intercept,
        residual,
        excluded,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliqueStat {
    /// t-sets left uncovered by the packing.
    pub uncovered: u64,
    /// Of those, how many lie in no k-set whose t-subsets are all uncovered.
    pub isolated: u64,
}

impl CliqueStat {
    /// `isolated / uncovered`, or `None` when nothing is uncovered.
    pub fn isolated_fraction(&self) -> Option<f64> {
        (self.uncovered > 0).then(|| self.isolated as f64 / self.uncovered as f64)
    }
}

/// Runs the packing phase and counts the uncovered t-sets that no further
/// packing step could ever cover.
pub fn clique_statistic(p: DesignParams, cfg: &GreedyConfig) -> Result<CliqueStat> {
    let total = p.t_set_count()?;
    if total > MAX_CLIQUE_SCAN {
        return Err(Error::BudgetExceeded {
            what: "clique scan",
            needed: total.into(),
            budget: MAX_CLIQUE_SCAN.into(),
            hint: "use smaller v",
        });
    }
    let packing = greedy_pack(p, cfg)?;
    let uncovered = &packing.coverage;
    let mut in_clique = CoverageBitmap::new(p)?;
    for_each_clean_k_set(uncovered, |ks| {
        in_clique.mark_block(ks);
    });
    let isolated = uncovered
        .uncovered_ranks()
        .filter(|&r| !in_clique.is_rank_covered(r))
        .count();
    Ok(CliqueStat {
        uncovered: uncovered.uncovered_count(),
        isolated: isolated as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_tau_examples() {
        for d in [1, 2, 5, 9] {
            assert_eq!(p_tau(0.0, d), 1.0);
        }
        assert!((p_tau(4.0, 2) - 1.0 / 3.0).abs() < 1e-15);
        assert!((p_tau(3.0, 2) - 0.377_964_473_009_227_2).abs() < 1e-15);
        assert!((p_tau(2.0, 2) - 0.447_213_595_499_958).abs() < 1e-15);
    }

    #[test]
    fn p_tau_solves_its_ode() {
        let h = 1e-4;
        for d in [2, 5, 9] {
            for tau in [0.5, 1.0, 2.0, 4.0] {
                let deriv = (p_tau(tau + h, d) - p_tau(tau - h, d)) / (2.0 * h);
                let rhs = -p_tau(tau, d).powi(d as i32 + 1);
                assert!((deriv - rhs).abs() < 1e-6, "D={d} tau={tau}");
            }
        }
    }

    #[test]
    fn p_tau_is_decreasing() {
        let mut prev = 1.0;
        for i in 1..200 {
            let now = p_tau(f64::from(i) * 0.1, 3);
            assert!(now < prev);
            prev = now;
        }
    }

    #[test]
    fn d_and_conjecture() {
        assert_eq!(branching_d(3, 2).unwrap(), 2);
        assert_eq!(branching_d(5, 2).unwrap(), 9);
        assert_eq!(conjectured_alpha(3, 2).unwrap(), 0.5);
        assert!((conjectured_alpha(4, 3).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((conjectured_alpha(5, 3).unwrap() - 2.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn tree_at_time_zero_is_uncovered() {
        let est = simulate_idealized_tree(&IdealizedTreeConfig::new(0.0, 3, 100, 1)).unwrap();
        assert_eq!(est.estimate, 1.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn tree_matches_closed_form_within_three_sigma() {
        for (tau, d) in [(0.5, 2), (1.0, 2), (2.0, 3), (1.0, 5)] {
            let est =
                simulate_idealized_tree(&IdealizedTreeConfig::new(tau, d, 10_000, 17)).unwrap();
            let exact = p_tau(tau, d);
            assert!(
                (est.estimate - exact).abs() <= 3.0 * est.stderr.max(1e-3),
                "tau={tau} D={d}: {est:?} vs {exact}"
            );
        }
    }

    #[test]
    fn tree_explosion_is_an_error() {
        let mut cfg = IdealizedTreeConfig::new(3.0, 2, 50, 1);
        cfg.max_nodes = 10;
        assert!(matches!(
            simulate_idealized_tree(&cfg),
            Err(Error::BudgetExceeded { .. })
        ));
        let mut cfg = IdealizedTreeConfig::new(5.0, 2, 50, 1);
        cfg.max_nodes = 3;
        assert!(matches!(run_trials(&cfg), Err(Error::TreeExplosion { .. })));
    }

    #[test]
    fn fit_recovers_planted_exponents() {
        for alpha in [0.5, 1.0 / 3.0, 0.25, 0.4] {
            let pts: Vec<(u32, f64)> = (60..=150)
                .step_by(10)
                .map(|v| (v, 1.0 + 2.0 * f64::from(v).powf(-alpha)))
                .collect();
            let fit = fit_alpha(&pts, 100, 150).unwrap();
            assert!((fit.alpha - alpha).abs() < 1e-9);
            assert!(fit.residual < 1e-9);
            assert_eq!(fit.points.len(), 6);
        }
    }

    #[test]
    fn fit_excludes_degenerate_points() {
        let mut pts: Vec<(u32, f64)> = (100..=150)
            .step_by(10)
            .map(|v| (v, 1.0 + f64::from(v).powf(-0.5)))
            .collect();
        pts.push((125, 1.0));
        let fit = fit_alpha(&pts, 100, 150).unwrap();
        assert_eq!(fit.excluded, vec![125]);
        assert!((fit.alpha - 0.5).abs() < 1e-9);
        assert!(matches!(
            fit_alpha(&pts, 100, 115),
            Err(Error::InsufficientFitPoints { .. })
        ));
    }

    #[test]
    fn csv_round_trip_and_header() {
        let rows = density_experiment(3, 2, &[8, 12], 20, BudgetRule::default(), 5).unwrap();
        let mut buf = Vec::new();
        write_density_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("v,k,t,trials,mean_density,stderr,mean_blocks,seed\n"));
        assert_eq!(read_density_csv(&buf[..]).unwrap(), rows);
        for r in &rows {
            assert!(r.mean_density > 1.0);
        }
    }

    #[test]
    fn alpha_json_shape() {
        let fit = AlphaFit {
            points: vec![],
            v_lo: 100,
            v_hi: 150,
            alpha: 0.5,
            intercept: 0.0,
            residual: 0.25,
            excluded: vec![],
        };
        let json = AlphaReport::new(3, 2, &fit).to_json();
        assert_eq!(
            json,
            r#"{"k":3,"t":2,"alpha":0.5,"residual":0.25,"v_lo":100,"v_hi":150}"#
        );
        assert_eq!(
            serde_json::from_str::<AlphaReport>(&json).unwrap(),
            AlphaReport::new(3, 2, &fit)
        );
    }

    #[test]
    fn saturated_packing_leaves_only_isolated_sets() {
        let p = DesignParams::new(20, 3, 2).unwrap();
        let mut cfg = GreedyConfig::new(p, 3).unwrap();
        cfg.saturate = true;
        let stat = clique_statistic(p, &cfg).unwrap();
        if stat.uncovered > 0 {
            assert_eq!(stat.isolated_fraction(), Some(1.0));
        }
    }

    #[test]
    fn empty_statistic_is_not_applicable() {
        let p = DesignParams::new(5, 5, 2).unwrap();
        let stat = clique_statistic(p, &GreedyConfig::new(p, 0).unwrap()).unwrap();
        assert_eq!(stat.uncovered, 0);
        assert_eq!(stat.isolated_fraction(), None);
    }

    #[test]
    fn clique_scan_budget() {
        let p = DesignParams::new(5000, 3, 2).unwrap();
        assert!(matches!(
            clique_statistic(p, &GreedyConfig::with_budget(0, 1)),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
