//! Deterministic parallel replications and the diagnostics that check the
//! urn's limit theorems empirically.
//!
//! Replication `r` of a plan draws every random number from streams under
//! `StreamSeed::new(master_seed).replication(r)`, and results are collected
//! in replication order. Output therefore does not depend on the number of
//! worker threads or on scheduling.
//!
//! The unknown limit `Z` is approximated by `Z_{n_proxy}` from the same run
//! continued well past the evaluation horizon `n`.

mod diagnostics;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use diagnostics::{
    clt_check_mn, clt_check_zn, combination_coverage, coverage_experiment, limit_law_suite,
    mean_reinforcement_frequency, mn_diagnostics, rep_intervals, zn_diagnostics, BasisCoverage,
    CltDiagnostics, CoverageReport, LimitLawDiagnostics, MeanReinforcementSummary,
    ProductKernelDiagnostics, RepStatistics, BOUNDARY_TOLERANCE,
};

use crate::error::{Error, Result};
use crate::multi_urn::{SystemConfig, SystemSnapshot, UrnSystem};
use crate::rng::{Purpose, StreamSeed};
use crate::urn::{DrawSizePolicy, DrawSizeSampler, Snapshot, Urn, UrnConfig};

/// Default ratio `n_proxy / n`.
pub const DEFAULT_PROXY_FACTOR: u64 = 50;
/// Smallest accepted ratio `n_proxy / n`.
pub const MIN_PROXY_FACTOR: u64 = 10;

/// Monte Carlo configuration: `reps` independent runs of `config`, each
/// observed at `n` and at the proxy horizon `n_proxy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationPlan<C = UrnConfig> {
    pub reps: u64,
    pub n: u64,
    pub n_proxy: u64,
    pub master_seed: u64,
    pub config: C,
}

impl<C> ReplicationPlan<C> {
    pub fn new(config: C, reps: u64, n: u64, master_seed: u64) -> Self {
        ReplicationPlan {
            reps,
            n,
            n_proxy: n.saturating_mul(DEFAULT_PROXY_FACTOR),
            master_seed,
            config,
        }
    }

    pub fn with_proxy(mut self, n_proxy: u64) -> Self {
        self.n_proxy = n_proxy;
        self
    }

    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.reps < 1 {
            errs.push("reps: reps >= 1 required".to_string());
        }
        if self.n < 1 {
            errs.push("n: n >= 1 required".to_string());
        }
        if self.n_proxy < self.n.saturating_mul(MIN_PROXY_FACTOR) {
            errs.push(format!(
                "n_proxy: n_proxy >= {MIN_PROXY_FACTOR} n required (n = {}, n_proxy = {})",
                self.n, self.n_proxy
            ));
        }
        errs
    }

    pub fn rep_seed(&self, rep: u64) -> StreamSeed {
        StreamSeed::new(self.master_seed).replication(rep)
    }
}

/// One replication of a single urn observed at both horizons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepSummary {
    pub rep: u64,
    pub at_n: Snapshot,
    pub at_proxy: Snapshot,
}

/// One replication of a system observed at both horizons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRepSummary {
    pub rep: u64,
    pub at_n: SystemSnapshot,
    pub at_proxy: SystemSnapshot,
}

fn check_plan<C>(plan: &ReplicationPlan<C>, config_errs: Vec<String>) -> Result<()> {
    let mut errs = plan.validation_errors();
    errs.extend(config_errs.into_iter().map(|e| format!("config.{e}")));
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(errs))
    }
}

/// Run every replication of a single-urn plan.
pub fn replicate(plan: &ReplicationPlan) -> Result<Vec<RepSummary>> {
    check_plan(plan, plan.config.validation_errors())?;
    (0..plan.reps)
        .into_par_iter()
        .map(|rep| {
            let run = || -> Result<RepSummary> {
                let mut urn = Urn::new_unchecked(plan.config.clone(), plan.rep_seed(rep));
                urn.advance_to(plan.n)?;
                let at_n = urn.snapshot()?;
                urn.advance_to(plan.n_proxy)?;
                Ok(RepSummary {
                    rep,
                    at_n,
                    at_proxy: urn.snapshot()?,
                })
            };
            run().map_err(|e| e.in_rep(rep))
        })
        .collect()
}

/// Run every replication of a system plan.
pub fn replicate_system(plan: &ReplicationPlan<SystemConfig>) -> Result<Vec<SystemRepSummary>> {
    check_plan(plan, plan.config.validation_errors())?;
    (0..plan.reps)
        .into_par_iter()
        .map(|rep| {
            let run = || -> Result<SystemRepSummary> {
                let mut system = UrnSystem::new(plan.config.clone(), plan.rep_seed(rep))?;
                system.advance_to(plan.n)?;
                let at_n = system.snapshot()?;
                system.advance_to(plan.n_proxy)?;
                Ok(SystemRepSummary {
                    rep,
                    at_n,
                    at_proxy: system.snapshot()?,
                })
            };
            run().map_err(|e| e.in_rep(rep))
        })
        .collect()
}

/// Run `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Steps after which a lone absorbing walk is abandoned.
pub const WALK_STEP_CAP: u64 = 10_000_000;

/// Empirical absorption frequency of the draw-size walk at the lower barrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingReport {
    pub start: u64,
    pub h: u64,
    pub reps: u64,
    pub absorbed_low: u64,
    /// Walks that reached the step cap without absorption (excluded).
    pub cap_hits: u64,
    pub estimate: f64,
    /// `(h - start) / (h - 1)`.
    pub expected: f64,
    /// Binomial standard error `sqrt(p (1 - p) / reps)` at the expected `p`.
    pub std_error: f64,
}

/// Simulate the frozen walk of the absorbing-random-walk draw policy alone,
/// `reps` times, and estimate the probability of absorption at 1.
pub fn hitting_probability_check(
    start: u64,
    h: u64,
    reps: u64,
    master_seed: u64,
) -> Result<HittingReport> {
    let policy = DrawSizePolicy::AbsorbingRandomWalk { start, h };
    let errs = policy.validation_errors("walk");
    if !errs.is_empty() {
        return Err(Error::InvalidConfig(errs));
    }
    if reps < 1 {
        return Err(Error::invalid("hitting probability: reps >= 1 required"));
    }
    let root = StreamSeed::new(master_seed);
    let outcomes: Vec<Option<bool>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = root.replication(rep).stream(Purpose::DrawSize);
            let mut walk = DrawSizeSampler::new(policy.clone());
            let mut value = walk.next(u64::MAX, &mut rng);
            let mut steps = 0;
            while !walk.is_absorbed() {
                if steps == WALK_STEP_CAP {
                    return None;
                }
                value = walk.next(u64::MAX, &mut rng);
                steps += 1;
            }
            Some(value == 1)
        })
        .collect();
    let cap_hits = outcomes.iter().filter(|o| o.is_none()).count() as u64;
    let absorbed_low = outcomes.iter().filter(|o| **o == Some(true)).count() as u64;
    let expected = (h - start) as f64 / (h - 1) as f64;
    let finished = reps - cap_hits;
    Ok(HittingReport {
        start,
        h,
        reps,
        absorbed_low,
        cap_hits,
        estimate: absorbed_low as f64 / finished as f64,
        expected,
        std_error: (expected * (1.0 - expected) / reps as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::urn::{run_trajectory, ReinforcementPolicy};

    fn config() -> UrnConfig {
        UrnConfig {
            a: 10,
            b: 10,
            k: 4,
            draw: DrawSizePolicy::IidUniform { h: 4 },
            reinforcement: ReinforcementPolicy::UniformRange { lo: 1, hi: 3 },
        }
    }

    #[test]
    fn single_rep_reduces_to_trajectory() {
        let plan = ReplicationPlan::new(config(), 1, 20, 5);
        let reps = replicate(&plan).unwrap();
        let t = run_trajectory(&plan.config, plan.n_proxy, plan.rep_seed(0)).unwrap();
        assert_eq!(reps[0].at_n, t.snapshot(20).unwrap());
        assert_eq!(reps[0].at_proxy, t.snapshot(1000).unwrap());
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let plan = ReplicationPlan::new(config(), 40, 30, 11);
        let one = with_workers(1, || replicate(&plan)).unwrap().unwrap();
        let three = with_workers(3, || replicate(&plan)).unwrap().unwrap();
        assert_eq!(one, three);
    }

    #[test]
    fn reps_are_independent_of_execution_order() {
        let plan = ReplicationPlan::new(config(), 12, 10, 3);
        let all = replicate(&plan).unwrap();
        for r in (0..12).rev() {
            let mut urn = Urn::new(config(), plan.rep_seed(r)).unwrap();
            urn.advance_to(10).unwrap();
            assert_eq!(all[r as usize].at_n, urn.snapshot().unwrap());
        }
    }

    #[test]
    fn plan_validation() {
        let plan = ReplicationPlan::new(config(), 0, 10, 0).with_proxy(50);
        let errs = plan.validation_errors();
        assert_eq!(errs.len(), 2);
        let bad_cfg = UrnConfig { k: 30, ..config() };
        let err = replicate(&ReplicationPlan::new(bad_cfg, 1, 10, 0)).unwrap_err();
        assert!(err.to_string().contains("config.k"));
    }

    #[test]
    fn hitting_symmetric_case() {
        let r = hitting_probability_check(2, 3, 20_000, 1).unwrap();
        assert_eq!(r.expected, 0.5);
        assert_eq!(r.cap_hits, 0);
        assert!((r.estimate - 0.5).abs() < 4.0 * r.std_error);
    }

    #[test]
    fn hitting_rejects_trivial_walks() {
        assert!(hitting_probability_check(1, 5, 10, 0).is_err());
        assert!(hitting_probability_check(2, 2, 10, 0).is_err());
        assert!(hitting_probability_check(5, 5, 10, 0).is_err());
    }
}
