//! Finite systems of urns driven by common random factors.
//!
//! Every urn `u` follows the single-urn dynamics. At each step one pair of
//! common factors `(F', F'')` is drawn and shifts every urn's draw size and
//! reinforcement: `N_n(u) = base_N(u) + F'_n`, `R_n(u) = base_R(u) + F''_n`.
//! Given the draw sizes, the extractions are independent across urns, each
//! from its own stream.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    confidence_interval, normal_quantile, variance_estimates, ConfidenceInterval, IntervalBasis,
};
use crate::rng::{Purpose, RngStream, StreamSeed};
use crate::stats::CompensatedSum;
use crate::urn::{
    distribution_errors, sample_index, Snapshot, StepRecord, Trajectory, Urn, UrnConfig,
};

/// Finite integer-valued law of a common factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub values: Vec<i64>,
    pub probabilities: Vec<f64>,
}

impl FactorSpec {
    pub fn degenerate(value: i64) -> Self {
        FactorSpec {
            values: vec![value],
            probabilities: vec![1.0],
        }
    }

    /// Smallest and largest values carrying positive probability.
    pub fn range(&self) -> RangeInclusive<i64> {
        let support = self
            .values
            .iter()
            .zip(&self.probabilities)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&v, _)| v);
        let lo = support.clone().min().unwrap_or(0);
        let hi = support.max().unwrap_or(0);
        lo..=hi
    }

    pub fn sample(&self, rng: &mut RngStream) -> i64 {
        self.values[sample_index(&self.probabilities, rng)]
    }

    pub fn validation_errors(&self, field: &str) -> Vec<String> {
        distribution_errors(field, self.values.len(), &self.probabilities)
    }
}

/// Labelled urns plus optional common factors. Urns are stepped in label
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub urns: BTreeMap<String, UrnConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draw_factor: Option<FactorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reinforcement_factor: Option<FactorSpec>,
}

impl SystemConfig {
    pub fn single(label: impl Into<String>, config: UrnConfig) -> Self {
        SystemConfig {
            urns: BTreeMap::from([(label.into(), config)]),
            draw_factor: None,
            reinforcement_factor: None,
        }
    }

    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.urns.is_empty() {
            errs.push("urns: at least one urn required".to_string());
        }
        let mut factor_ok = true;
        for (field, factor) in [
            ("draw_factor", &self.draw_factor),
            ("reinforcement_factor", &self.reinforcement_factor),
        ] {
            if let Some(f) = factor {
                let e = f.validation_errors(field);
                factor_ok &= e.is_empty();
                errs.extend(e);
            }
        }
        let draw_shift = self.draw_factor.as_ref().map_or(0..=0, FactorSpec::range);
        let reinf_shift = self
            .reinforcement_factor
            .as_ref()
            .map_or(0..=0, FactorSpec::range);
        for (label, urn) in &self.urns {
            if label.is_empty() {
                errs.push("urns: labels must be nonempty".to_string());
            }
            let urn_errs = if factor_ok {
                urn.validation_errors_with_shift(draw_shift.clone(), reinf_shift.clone())
            } else {
                urn.validation_errors()
            };
            errs.extend(urn_errs.into_iter().map(|e| format!("urns.{label}.{e}")));
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.validation_errors();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }

    /// Plug-in estimators are consistent for every urn: i.i.d. base draw
    /// sizes (factors are i.i.d. by construction).
    pub fn plugin_assumptions_met(&self) -> bool {
        self.urns.values().all(UrnConfig::plugin_assumptions_met)
    }
}

/// A running system of urns.
#[derive(Debug, Clone)]
pub struct UrnSystem {
    config: SystemConfig,
    urns: Vec<(String, Urn)>,
    factors: RngStream,
    n: u64,
}

/// Draws of the common factors at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorDraw {
    pub draw_shift: i64,
    pub reinforcement_shift: i64,
}

impl UrnSystem {
    /// Urn `u` draws from streams under `seed.urn(u)`; the factors from
    /// `seed`'s common-factor stream.
    pub fn new(config: SystemConfig, seed: StreamSeed) -> Result<Self> {
        config.validate()?;
        let urns = config
            .urns
            .iter()
            .map(|(label, cfg)| (label.clone(), Urn::new_unchecked(cfg.clone(), seed.urn(label))))
            .collect();
        Ok(UrnSystem {
            factors: seed.stream(Purpose::CommonFactor),
            config,
            urns,
            n: 0,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.n
    }

    pub fn urns(&self) -> impl Iterator<Item = (&str, &Urn)> {
        self.urns.iter().map(|(l, u)| (l.as_str(), u))
    }

    /// One step of every urn, in label order. Records are returned in the same
    /// order.
    pub fn system_step(&mut self) -> Result<(FactorDraw, Vec<StepRecord>)> {
        let factors = FactorDraw {
            draw_shift: self
                .config
                .draw_factor
                .as_ref()
                .map_or(0, |f| f.sample(&mut self.factors)),
            reinforcement_shift: self
                .config
                .reinforcement_factor
                .as_ref()
                .map_or(0, |f| f.sample(&mut self.factors)),
        };
        let records = self
            .urns
            .iter_mut()
            .map(|(_, urn)| urn.step_shifted(factors.draw_shift, factors.reinforcement_shift))
            .collect::<Result<Vec<_>>>()?;
        self.n += 1;
        Ok((factors, records))
    }

    pub fn advance_to(&mut self, n: u64) -> Result<()> {
        while self.n < n {
            self.system_step()?;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Result<SystemSnapshot> {
        Ok(SystemSnapshot {
            n: self.n,
            urns: self
                .urns
                .iter()
                .map(|(l, u)| Ok((l.clone(), u.snapshot()?)))
                .collect::<Result<_>>()?,
        })
    }
}

/// Horizon-`n` quantities of every urn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSnapshot {
    pub n: u64,
    pub urns: BTreeMap<String, Snapshot>,
}

impl SystemSnapshot {
    pub fn urn(&self, label: &str) -> Result<&Snapshot> {
        self.urns
            .get(label)
            .ok_or_else(|| Error::invalid(format!("unknown urn label `{label}`")))
    }

    /// Per-urn plug-in variances `V_n(u)` and `U_n(u)`.
    pub fn limit_summary(&self) -> BTreeMap<String, PerUrnLimitSummary> {
        self.urns
            .iter()
            .map(|(l, s)| {
                let v = variance_estimates(s.z, s.m, &s.estimates);
                (
                    l.clone(),
                    PerUrnLimitSummary {
                        z: s.z,
                        m: s.m,
                        v: v.v,
                        u: v.u,
                    },
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerUrnLimitSummary {
    pub z: f64,
    pub m: f64,
    pub v: f64,
    pub u: f64,
}

/// Recorded run of a system: one trajectory per urn plus the factor draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemTrajectory {
    pub config: SystemConfig,
    pub seed: StreamSeed,
    pub factors: Vec<FactorDraw>,
    pub urns: BTreeMap<String, Trajectory>,
}

impl SystemTrajectory {
    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn snapshot(&self, n: usize) -> Result<SystemSnapshot> {
        Ok(SystemSnapshot {
            n: n as u64,
            urns: self
                .urns
                .iter()
                .map(|(l, t)| Ok((l.clone(), t.snapshot(n)?)))
                .collect::<Result<_>>()?,
        })
    }
}

pub fn run_system(config: &SystemConfig, steps: u64, seed: StreamSeed) -> Result<SystemTrajectory> {
    if steps < 1 {
        return Err(Error::invalid("run_system: steps >= 1 required"));
    }
    let mut system = UrnSystem::new(config.clone(), seed)?;
    let mut factors = Vec::with_capacity(steps as usize);
    let mut urns: BTreeMap<String, Trajectory> = config
        .urns
        .iter()
        .map(|(l, c)| {
            (
                l.clone(),
                Trajectory {
                    config: c.clone(),
                    seed: seed.urn(l),
                    records: Vec::with_capacity(steps as usize),
                    m: Vec::with_capacity(steps as usize),
                },
            )
        })
        .collect();
    for _ in 0..steps {
        let (f, records) = system.system_step()?;
        factors.push(f);
        for ((traj, record), (_, urn)) in urns.values_mut().zip(records).zip(system.urns()) {
            traj.records.push(record);
            traj.m.push(urn.snapshot()?.m);
        }
    }
    Ok(SystemTrajectory {
        config: config.clone(),
        seed,
        factors,
        urns,
    })
}

/// Coefficients `alpha(u)` of a linear combination `<alpha, Z>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCombination(pub BTreeMap<String, f64>);

impl LinearCombination {
    pub fn new<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        LinearCombination(terms.into_iter().map(|(l, a)| (l.into(), a)).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.values().all(|a| *a == 0.0) {
            return Err(Error::invalid(
                "linear combination: at least one nonzero coefficient required",
            ));
        }
        if self.0.values().any(|a| !a.is_finite()) {
            return Err(Error::invalid("linear combination: coefficients must be finite"));
        }
        Ok(())
    }

    /// `<alpha, x>` over the urns of `snapshot`.
    pub fn apply(&self, snapshot: &SystemSnapshot, value: impl Fn(&Snapshot) -> f64) -> Result<f64> {
        let mut sum = CompensatedSum::new();
        for (label, alpha) in &self.0 {
            sum.add(alpha * value(snapshot.urn(label)?));
        }
        Ok(sum.value())
    }
}

/// Interval for `<alpha, Z>`: centered on `<alpha, Z_n>` with variance
/// `sum alpha(u)^2 V_n(u)`, or on `<alpha, M_n>` with variance
/// `sum alpha(u)^2 W_n(u)`.
pub fn linear_combination_ci(
    snapshot: &SystemSnapshot,
    combination: &LinearCombination,
    basis: IntervalBasis,
    alpha: f64,
) -> Result<ConfidenceInterval> {
    combination.validate()?;
    let mut center = CompensatedSum::new();
    let mut variance = CompensatedSum::new();
    for (label, coef) in &combination.0 {
        let s = snapshot.urn(label)?;
        let v = variance_estimates(s.z, s.m, &s.estimates);
        match basis {
            IntervalBasis::FromZn => {
                center.add(coef * s.z);
                variance.add(coef * coef * v.v);
            }
            IntervalBasis::FromMn => {
                center.add(coef * s.m);
                variance.add(coef * coef * v.w);
            }
        }
    }
    confidence_interval(basis, center.value(), variance.value(), snapshot.n, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum TestOutcome {
    Applicable {
        statistic: f64,
        critical_value: f64,
        reject: bool,
    },
    /// `U_n(u) = 0`: `sqrt(n)(M_n - Z_n)` has a degenerate limit.
    Inapplicable,
}

/// Test of `H0: m(u) >= mean_{v in U'} m(v)` from the asymptotic critical
/// region
/// `sqrt(mean_{v in U'} m_n(v) / m_n(u)) * sqrt(n) |M_n(u) - Z_n(u)| / sqrt(U_n(u)) > q_{1-alpha/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanReinforcementTest {
    pub target: String,
    pub reference: Vec<String>,
    pub alpha: f64,
    pub outcome: TestOutcome,
}

impl MeanReinforcementTest {
    pub fn rejects(&self) -> bool {
        matches!(self.outcome, TestOutcome::Applicable { reject: true, .. })
    }
}

pub fn mean_reinforcement_test(
    snapshot: &SystemSnapshot,
    target: &str,
    reference: &[String],
    alpha: f64,
) -> Result<MeanReinforcementTest> {
    let reference: BTreeSet<&String> = reference.iter().collect();
    if reference.is_empty() {
        return Err(Error::invalid("mean reinforcement test: reference set must be nonempty"));
    }
    if reference.iter().any(|v| v.as_str() == target) {
        return Err(Error::invalid(format!(
            "mean reinforcement test: target `{target}` must not belong to the reference set"
        )));
    }
    let critical_value = normal_quantile(1.0 - alpha / 2.0)?;
    let s = snapshot.urn(target)?;
    let mut ref_sum = CompensatedSum::new();
    for v in &reference {
        ref_sum.add(snapshot.urn(v)?.estimates.m);
    }
    let ref_mean = ref_sum.value() / reference.len() as f64;

    let u = variance_estimates(s.z, s.m, &s.estimates).u;
    let outcome = if u > 0.0 {
        let statistic = (ref_mean / s.estimates.m).sqrt()
            * (snapshot.n as f64).sqrt()
            * (s.m - s.z).abs()
            / u.sqrt();
        TestOutcome::Applicable {
            statistic,
            critical_value,
            reject: statistic > critical_value,
        }
    } else {
        TestOutcome::Inapplicable
    };
    Ok(MeanReinforcementTest {
        target: target.to_string(),
        reference: reference.into_iter().cloned().collect(),
        alpha,
        outcome,
    })
}

/// Pooled mean of `(X'_n(u) - Z_{n-1}(u)) (X'_n(v) - Z_{n-1}(v))` along one
/// run, with its standard error. The conditional expectation of every term
/// is zero because extractions are conditionally independent across urns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossMomentCheck {
    pub steps: u64,
    pub mean: f64,
    pub std_error: f64,
    /// `mean / std_error`.
    pub z_score: f64,
}

pub fn cross_moment_check(
    config: &SystemConfig,
    first: &str,
    second: &str,
    steps: u64,
    seed: StreamSeed,
) -> Result<CrossMomentCheck> {
    if first == second {
        return Err(Error::invalid("cross moment check: two distinct urns required"));
    }
    if steps < 2 {
        return Err(Error::invalid("cross moment check: steps >= 2 required"));
    }
    let mut system = UrnSystem::new(config.clone(), seed)?;
    let index = |label: &str| {
        config
            .urns
            .keys()
            .position(|l| l == label)
            .ok_or_else(|| Error::invalid(format!("unknown urn label `{label}`")))
    };
    let (i, j) = (index(first)?, index(second)?);
    let z_of = |sys: &UrnSystem, k: usize| sys.urns[k].1.state().z();

    let mut sum = CompensatedSum::new();
    let mut sum_sq = CompensatedSum::new();
    for _ in 0..steps {
        let (zi, zj) = (z_of(&system, i), z_of(&system, j));
        let (_, records) = system.system_step()?;
        let product = (records[i].x_prime - zi) * (records[j].x_prime - zj);
        sum.add(product);
        sum_sq.add(product * product);
    }
    let n = steps as f64;
    let mean = sum.value() / n;
    let var = (sum_sq.value() - n * mean * mean) / (n - 1.0);
    let std_error = (var / n).sqrt();
    Ok(CrossMomentCheck {
        steps,
        mean,
        std_error,
        z_score: mean / std_error,
    })
}
