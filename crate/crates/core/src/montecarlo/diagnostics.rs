use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use super::{replicate, RepSummary, ReplicationPlan, SystemRepSummary};
use crate::error::{Error, Result};
use crate::estimators::{confidence_interval, variance_estimates, ConfidenceInterval, IntervalBasis};
use crate::multi_urn::{mean_reinforcement_test, linear_combination_ci, LinearCombination, TestOutcome};
use crate::stats::{correlation, ks_distance, ks_distance_normal, max_ecdf_jump, median};
use crate::urn::UrnConfig;

/// A standardized statistic collected over replications and compared with
/// the standard normal law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltDiagnostics {
    /// Finite standardized values, in replication order.
    pub samples: Vec<f64>,
    /// Replications whose variance estimate was zero.
    pub excluded: u64,
    pub exclusion_rate: f64,
    /// Kolmogorov-Smirnov distance from `N(0, 1)`; `None` when every
    /// replication was excluded.
    pub ks_distance: Option<f64>,
}

impl CltDiagnostics {
    fn collect(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let mut samples = Vec::new();
        let mut excluded = 0u64;
        for v in values {
            match v {
                Some(t) => samples.push(t),
                None => excluded += 1,
            }
        }
        let total = samples.len() as u64 + excluded;
        CltDiagnostics {
            ks_distance: (!samples.is_empty()).then(|| ks_distance_normal(&samples)),
            exclusion_rate: if total == 0 { 0.0 } else { excluded as f64 / total as f64 },
            excluded,
            samples,
        }
    }
}

/// `sqrt(n) * gap / sqrt(variance)`, or `None` for a degenerate variance.
fn standardize(n: u64, gap: f64, variance: f64) -> Option<f64> {
    if variance > 0.0 && variance.is_finite() {
        let t = (n as f64).sqrt() * gap / variance.sqrt();
        t.is_finite().then_some(t)
    } else {
        None
    }
}

/// Standardized statistics of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepStatistics {
    pub rep: u64,
    /// `sqrt(n)(Z_n - Z) / sqrt(V_n)`.
    pub t_z: Option<f64>,
    /// `sqrt(n)(M_n - Z_n) / sqrt(U_n)`.
    pub t_m_z: Option<f64>,
    /// `sqrt(n)(M_n - Z) / sqrt(W_n)`.
    pub t_m: Option<f64>,
}

impl RepSummary {
    pub fn statistics(&self) -> RepStatistics {
        let s = &self.at_n;
        let truth = self.at_proxy.z;
        let v = variance_estimates(s.z, s.m, &s.estimates);
        RepStatistics {
            rep: self.rep,
            t_z: standardize(s.n, s.z - truth, v.v),
            t_m_z: standardize(s.n, s.m - s.z, v.u),
            t_m: standardize(s.n, s.m - truth, v.w),
        }
    }
}

/// Check of `sqrt(n)(Z_n - Z) -> N(0, V)` from existing replications.
pub fn zn_diagnostics(reps: &[RepSummary]) -> CltDiagnostics {
    CltDiagnostics::collect(reps.iter().map(|r| r.statistics().t_z))
}

pub fn clt_check_zn(plan: &ReplicationPlan) -> Result<CltDiagnostics> {
    Ok(zn_diagnostics(&replicate(plan)?))
}

/// Joint behaviour of `sqrt(n)(M_n - Z_n)` and `sqrt(n)(Z_n - Z)`, whose
/// limit is the product of two independent Gaussian kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductKernelDiagnostics {
    /// `sqrt(n)(M_n - Z_n) / sqrt(U_n)`.
    pub t1: CltDiagnostics,
    /// `sqrt(n)(Z_n - Z) / sqrt(V_n)`.
    pub t2: CltDiagnostics,
    /// `sqrt(n)(M_n - Z) / sqrt(W_n)`.
    pub t3: CltDiagnostics,
    /// Correlation of `(t1, t2)` over replications where both exist.
    pub correlation: Option<f64>,
    /// Median of `|sqrt(n)(M_n - Z_n)|` at the evaluation horizon.
    pub median_abs_gap_n: f64,
    /// The same median at the proxy horizon.
    pub median_abs_gap_proxy: f64,
}

pub fn mn_diagnostics(reps: &[RepSummary]) -> ProductKernelDiagnostics {
    let stats: Vec<RepStatistics> = reps.iter().map(RepSummary::statistics).collect();
    let pairs: Vec<(f64, f64)> = stats
        .iter()
        .filter_map(|s| Some((s.t_m_z?, s.t_z?)))
        .collect();
    let abs_gap = |pick: fn(&RepSummary) -> &crate::urn::Snapshot| {
        let gaps: Vec<f64> = reps
            .iter()
            .map(|r| {
                let s = pick(r);
                (s.n as f64).sqrt() * (s.m - s.z).abs()
            })
            .collect();
        if gaps.is_empty() {
            f64::NAN
        } else {
            median(&gaps)
        }
    };
    ProductKernelDiagnostics {
        t1: CltDiagnostics::collect(stats.iter().map(|s| s.t_m_z)),
        t2: CltDiagnostics::collect(stats.iter().map(|s| s.t_z)),
        t3: CltDiagnostics::collect(stats.iter().map(|s| s.t_m)),
        correlation: (pairs.len() > 2).then(|| correlation(&pairs)),
        median_abs_gap_n: abs_gap(|r| &r.at_n),
        median_abs_gap_proxy: abs_gap(|r| &r.at_proxy),
    }
}

pub fn clt_check_mn(plan: &ReplicationPlan) -> Result<ProductKernelDiagnostics> {
    Ok(mn_diagnostics(&replicate(plan)?))
}

/// Distance of a proxy limit from the boundary below which it counts as
/// an atom at 0 or 1.
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;

/// Growth of the urn and the shape of the limit law, from the proxy horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLawDiagnostics {
    pub horizon: u64,
    /// Max over replications of `|S_n/n - mu_n m_n|`.
    pub max_growth_error: f64,
    /// Max over replications of `|S_n/n - mu_n m_n| / (mu_n m_n)`.
    pub max_relative_growth_error: f64,
    /// Largest point mass of the empirical law of the proxy limits.
    pub max_ecdf_jump: f64,
    /// Fraction of proxy limits within [`BOUNDARY_TOLERANCE`] of 0 or 1.
    pub boundary_fraction: f64,
    /// For the classical Pólya urn (`N_n = 1`, `R_n = c`): KS distance of the
    /// proxy limits from Beta(a/c, b/c).
    pub beta_ks_distance: Option<f64>,
    pub proxy_limits: Vec<f64>,
}

impl LimitLawDiagnostics {
    pub fn from_reps(reps: &[RepSummary], config: &UrnConfig) -> Result<Self> {
        let mut max_abs = 0.0f64;
        let mut max_rel = 0.0f64;
        for r in reps {
            let s = &r.at_proxy;
            let growth = s.s as f64 / s.n as f64;
            let target = s.estimates.mu * s.estimates.m;
            max_abs = max_abs.max((growth - target).abs());
            max_rel = max_rel.max((growth - target).abs() / target);
        }
        let limits: Vec<f64> = reps.iter().map(|r| r.at_proxy.z).collect();
        let boundary = limits
            .iter()
            .filter(|&&z| z <= BOUNDARY_TOLERANCE || z >= 1.0 - BOUNDARY_TOLERANCE)
            .count();
        let beta_ks_distance = match config.polya_reinforcement() {
            Some(c) if !limits.is_empty() => {
                let beta = Beta::new(config.a as f64 / c as f64, config.b as f64 / c as f64)
                    .map_err(|e| Error::invalid(format!("beta reference law: {e}")))?;
                Some(ks_distance(&limits, |z| beta.cdf(z)))
            }
            _ => None,
        };
        Ok(LimitLawDiagnostics {
            horizon: reps.first().map_or(0, |r| r.at_proxy.n),
            max_growth_error: max_abs,
            max_relative_growth_error: max_rel,
            max_ecdf_jump: max_ecdf_jump(&limits),
            boundary_fraction: if limits.is_empty() {
                0.0
            } else {
                boundary as f64 / limits.len() as f64
            },
            beta_ks_distance,
            proxy_limits: limits,
        })
    }
}

pub fn limit_law_suite(plan: &ReplicationPlan) -> Result<LimitLawDiagnostics> {
    LimitLawDiagnostics::from_reps(&replicate(plan)?, &plan.config)
}

/// Empirical coverage of one kind of interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisCoverage {
    pub basis: IntervalBasis,
    pub hits: u64,
    pub total: u64,
    pub coverage: f64,
    /// `sqrt(c (1 - c) / total)`.
    pub std_error: f64,
}

impl BasisCoverage {
    fn new(basis: IntervalBasis, hits: u64, total: u64) -> Self {
        let c = if total == 0 { f64::NAN } else { hits as f64 / total as f64 };
        BasisCoverage {
            basis,
            hits,
            total,
            coverage: c,
            std_error: (c * (1.0 - c) / total as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub level: f64,
    pub zn: BasisCoverage,
    pub mn: BasisCoverage,
}

/// The `Z_n`- and `M_n`-centered intervals of one replication at level
/// `1 - alpha`.
pub fn rep_intervals(rep: &RepSummary, alpha: f64) -> Result<(ConfidenceInterval, ConfidenceInterval)> {
    let s = &rep.at_n;
    let v = variance_estimates(s.z, s.m, &s.estimates);
    Ok((
        confidence_interval(IntervalBasis::FromZn, s.z, v.v, s.n, alpha)?,
        confidence_interval(IntervalBasis::FromMn, s.m, v.w, s.n, alpha)?,
    ))
}

impl CoverageReport {
    /// Fraction of replications whose raw interval contains the proxy limit.
    pub fn from_reps(reps: &[RepSummary], level: f64) -> Result<Self> {
        let alpha = 1.0 - level;
        let (mut zn, mut mn) = (0u64, 0u64);
        for r in reps {
            let (ci_z, ci_m) = rep_intervals(r, alpha)?;
            zn += u64::from(ci_z.contains(r.at_proxy.z));
            mn += u64::from(ci_m.contains(r.at_proxy.z));
        }
        let total = reps.len() as u64;
        Ok(CoverageReport {
            level,
            zn: BasisCoverage::new(IntervalBasis::FromZn, zn, total),
            mn: BasisCoverage::new(IntervalBasis::FromMn, mn, total),
        })
    }
}

pub fn coverage_experiment(plan: &ReplicationPlan, level: f64) -> Result<CoverageReport> {
    CoverageReport::from_reps(&replicate(plan)?, level)
}

/// Coverage of intervals for `<alpha, Z>` with truth `<alpha, Z_proxy>`.
pub fn combination_coverage(
    reps: &[SystemRepSummary],
    combination: &LinearCombination,
    level: f64,
) -> Result<CoverageReport> {
    let alpha = 1.0 - level;
    let (mut zn, mut mn) = (0u64, 0u64);
    for r in reps {
        let truth = combination.apply(&r.at_proxy, |s| s.z)?;
        let ci_z = linear_combination_ci(&r.at_n, combination, IntervalBasis::FromZn, alpha)?;
        let ci_m = linear_combination_ci(&r.at_n, combination, IntervalBasis::FromMn, alpha)?;
        zn += u64::from(ci_z.contains(truth));
        mn += u64::from(ci_m.contains(truth));
    }
    let total = reps.len() as u64;
    Ok(CoverageReport {
        level,
        zn: BasisCoverage::new(IntervalBasis::FromZn, zn, total),
        mn: BasisCoverage::new(IntervalBasis::FromMn, mn, total),
    })
}

/// Rejection frequency of the mean-reinforcement test over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanReinforcementSummary {
    pub target: String,
    pub reference: Vec<String>,
    pub alpha: f64,
    pub reps: u64,
    pub inapplicable: u64,
    pub rejections: u64,
    /// Rejections over applicable replications.
    pub frequency: f64,
    pub statistics: Vec<Option<f64>>,
}

pub fn mean_reinforcement_frequency(
    reps: &[SystemRepSummary],
    target: &str,
    reference: &[String],
    alpha: f64,
) -> Result<MeanReinforcementSummary> {
    let mut statistics = Vec::with_capacity(reps.len());
    let (mut rejections, mut inapplicable) = (0u64, 0u64);
    let mut ordered_reference = reference.to_vec();
    for r in reps {
        let test = mean_reinforcement_test(&r.at_n, target, reference, alpha)?;
        ordered_reference.clone_from(&test.reference);
        match test.outcome {
            TestOutcome::Applicable { statistic, reject, .. } => {
                rejections += u64::from(reject);
                statistics.push(Some(statistic));
            }
            TestOutcome::Inapplicable => {
                inapplicable += 1;
                statistics.push(None);
            }
        }
    }
    let applicable = reps.len() as u64 - inapplicable;
    Ok(MeanReinforcementSummary {
        target: target.to_string(),
        reference: ordered_reference,
        alpha,
        reps: reps.len() as u64,
        inapplicable,
        rejections,
        frequency: if applicable == 0 {
            f64::NAN
        } else {
            rejections as f64 / applicable as f64
        },
        statistics,
    })
}
