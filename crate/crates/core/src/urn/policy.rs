//! Generative rules for the draw sizes `N_n` and the reinforcements `R_n`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::RngStream;

/// Information available to a custom draw-size rule at step `n`.
#[derive(Debug, Clone, Copy)]
pub struct DrawContext<'a> {
    /// Index of the step about to be taken (1-based).
    pub step: u64,
    /// Total balls before the draw, `S_{n-1}`.
    pub total_before: u64,
    /// Draw sizes `N_1, ..., N_{n-1}`.
    pub history: &'a [u64],
}

/// User-supplied draw-size rule.
pub trait DrawRule: Send + Sync {
    /// Largest value the rule may ever emit. Checked on every emission.
    fn bound(&self) -> u64;

    fn draw(&self, ctx: &DrawContext<'_>, rng: &mut RngStream) -> u64;

    /// Whether the emitted sizes are i.i.d. and independent of the past.
    fn is_iid(&self) -> bool {
        false
    }
}

/// Shared handle to a [`DrawRule`]. Two handles compare equal only when they
/// point to the same rule.
#[derive(Clone)]
pub struct CustomDrawRule(pub Arc<dyn DrawRule>);

impl fmt::Debug for CustomDrawRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomDrawRule(bound = {})", self.0.bound())
    }
}

impl PartialEq for CustomDrawRule {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

/// How many balls are drawn at each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DrawSizePolicy {
    /// `N_n = h_n`; the last entry repeats once the sequence is exhausted.
    Deterministic { sequence: Vec<u64> },
    /// `N_n = 1`, the randomly reinforced urn.
    ConstantOne,
    /// `N_n` i.i.d. uniform on `{1, ..., h}`.
    IidUniform { h: u64 },
    /// Symmetric ±1 walk started at `start`, frozen on reaching 1 or `h`.
    AbsorbingRandomWalk { start: u64, h: u64 },
    #[serde(skip)]
    Custom(CustomDrawRule),
}

pub const DRAW_POLICY_NAMES: &[&str] = &[
    "deterministic",
    "constant-one",
    "iid-uniform",
    "absorbing-random-walk",
];

impl DrawSizePolicy {
    pub fn custom(rule: impl DrawRule + 'static) -> Self {
        DrawSizePolicy::Custom(CustomDrawRule(Arc::new(rule)))
    }

    pub fn support_min(&self) -> u64 {
        match self {
            DrawSizePolicy::Deterministic { sequence } => {
                sequence.iter().copied().min().unwrap_or(0)
            }
            _ => 1,
        }
    }

    pub fn support_max(&self) -> u64 {
        match self {
            DrawSizePolicy::Deterministic { sequence } => {
                sequence.iter().copied().max().unwrap_or(0)
            }
            DrawSizePolicy::ConstantOne => 1,
            DrawSizePolicy::IidUniform { h } => *h,
            DrawSizePolicy::AbsorbingRandomWalk { h, .. } => *h,
            DrawSizePolicy::Custom(rule) => rule.0.bound(),
        }
    }

    /// Whether `N_n` are i.i.d. and independent of the past, the setting in
    /// which the plug-in variance estimators are consistent.
    pub fn is_iid(&self) -> bool {
        match self {
            DrawSizePolicy::Deterministic { sequence } => {
                sequence.windows(2).all(|w| w[0] == w[1])
            }
            DrawSizePolicy::ConstantOne | DrawSizePolicy::IidUniform { .. } => true,
            DrawSizePolicy::AbsorbingRandomWalk { .. } => false,
            DrawSizePolicy::Custom(rule) => rule.0.is_iid(),
        }
    }

    /// `E[N_n]` and `E[1/N_n]` for i.i.d. policies.
    pub fn moments(&self) -> Option<(f64, f64)> {
        match self {
            DrawSizePolicy::ConstantOne => Some((1.0, 1.0)),
            DrawSizePolicy::Deterministic { sequence } if self.is_iid() => {
                let h = *sequence.first()? as f64;
                Some((h, 1.0 / h))
            }
            DrawSizePolicy::IidUniform { h } => {
                let mean = (*h as f64 + 1.0) / 2.0;
                let harmonic: f64 = (1..=*h).map(|j| 1.0 / j as f64).sum();
                Some((mean, harmonic / *h as f64))
            }
            _ => None,
        }
    }

    pub fn validation_errors(&self, field: &str) -> Vec<String> {
        let mut errs = Vec::new();
        match self {
            DrawSizePolicy::Deterministic { sequence } => {
                if sequence.is_empty() {
                    errs.push(format!("{field}.sequence: must not be empty"));
                }
                if sequence.contains(&0) {
                    errs.push(format!("{field}.sequence: draw sizes must be >= 1"));
                }
            }
            DrawSizePolicy::ConstantOne => {}
            DrawSizePolicy::IidUniform { h } => {
                if *h < 1 {
                    errs.push(format!("{field}.h: h >= 1 required (h = {h})"));
                }
            }
            DrawSizePolicy::AbsorbingRandomWalk { start, h } => {
                if *h < 3 {
                    errs.push(format!(
                        "{field}.h: h >= 3 required for a non-trivial walk (h = {h})"
                    ));
                }
                if *start < 2 || *start + 1 > *h {
                    errs.push(format!(
                        "{field}.start: 2 <= start <= h-1 required (start = {start}, h = {h})"
                    ));
                }
            }
            DrawSizePolicy::Custom(rule) => {
                if rule.0.bound() < 1 {
                    errs.push(format!("{field}: custom rule bound must be >= 1"));
                }
            }
        }
        errs
    }
}

/// Mutable sampling state attached to a [`DrawSizePolicy`].
#[derive(Debug, Clone)]
pub struct DrawSizeSampler {
    policy: DrawSizePolicy,
    emitted: u64,
    walk: Option<u64>,
    history: Vec<u64>,
}

impl DrawSizeSampler {
    pub fn new(policy: DrawSizePolicy) -> Self {
        DrawSizeSampler {
            policy,
            emitted: 0,
            walk: None,
            history: Vec::new(),
        }
    }

    pub fn policy(&self) -> &DrawSizePolicy {
        &self.policy
    }

    /// True once an absorbing walk has hit one of its barriers.
    pub fn is_absorbed(&self) -> bool {
        match (&self.policy, self.walk) {
            (DrawSizePolicy::AbsorbingRandomWalk { h, .. }, Some(cur)) => cur == 1 || cur == *h,
            _ => false,
        }
    }

    /// Emit `N_n` for the next step.
    pub fn next(&mut self, total_before: u64, rng: &mut RngStream) -> u64 {
        let step = self.emitted + 1;
        let value = match &self.policy {
            DrawSizePolicy::Deterministic { sequence } => {
                let idx = (self.emitted as usize).min(sequence.len() - 1);
                sequence[idx]
            }
            DrawSizePolicy::ConstantOne => 1,
            DrawSizePolicy::IidUniform { h } => rng.random_range(1..=*h),
            DrawSizePolicy::AbsorbingRandomWalk { start, h } => {
                let next = match self.walk {
                    None => *start,
                    Some(cur) if cur == 1 || cur == *h => cur,
                    Some(cur) => {
                        if rng.random::<bool>() {
                            cur + 1
                        } else {
                            cur - 1
                        }
                    }
                };
                self.walk = Some(next);
                next
            }
            DrawSizePolicy::Custom(rule) => {
                let ctx = DrawContext {
                    step,
                    total_before,
                    history: &self.history,
                };
                let v = rule.0.draw(&ctx, rng);
                self.history.push(v);
                v
            }
        };
        self.emitted = step;
        value
    }
}

/// Distribution of the reinforcement `R_n`, i.i.d. across steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReinforcementPolicy {
    Constant { value: u64 },
    /// Uniform on `{lo, ..., hi}`.
    UniformRange { lo: u64, hi: u64 },
    FiniteDiscrete { values: Vec<u64>, probabilities: Vec<f64> },
}

pub const REINFORCEMENT_POLICY_NAMES: &[&str] = &["constant", "uniform-range", "finite-discrete"];

impl ReinforcementPolicy {
    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> u64 {
        match self {
            ReinforcementPolicy::Constant { value } => *value,
            ReinforcementPolicy::UniformRange { lo, hi } => rng.random_range(*lo..=*hi),
            ReinforcementPolicy::FiniteDiscrete {
                values,
                probabilities,
            } => values[sample_index(probabilities, rng)],
        }
    }

    pub fn support_min(&self) -> u64 {
        match self {
            ReinforcementPolicy::Constant { value } => *value,
            ReinforcementPolicy::UniformRange { lo, .. } => *lo,
            ReinforcementPolicy::FiniteDiscrete {
                values,
                probabilities,
            } => support(values, probabilities).min().unwrap_or(0),
        }
    }

    pub fn support_max(&self) -> u64 {
        match self {
            ReinforcementPolicy::Constant { value } => *value,
            ReinforcementPolicy::UniformRange { hi, .. } => *hi,
            ReinforcementPolicy::FiniteDiscrete {
                values,
                probabilities,
            } => support(values, probabilities).max().unwrap_or(0),
        }
    }

    /// `(E[R], E[R^2])`.
    pub fn moments(&self) -> (f64, f64) {
        match self {
            ReinforcementPolicy::Constant { value } => {
                let v = *value as f64;
                (v, v * v)
            }
            ReinforcementPolicy::UniformRange { lo, hi } => {
                let count = (hi - lo + 1) as f64;
                let (m, q) = (*lo..=*hi).fold((0.0, 0.0), |(m, q), r| {
                    let r = r as f64;
                    (m + r, q + r * r)
                });
                (m / count, q / count)
            }
            ReinforcementPolicy::FiniteDiscrete {
                values,
                probabilities,
            } => values
                .iter()
                .zip(probabilities)
                .fold((0.0, 0.0), |(m, q), (&v, &p)| {
                    let v = v as f64;
                    (m + p * v, q + p * v * v)
                }),
        }
    }

    pub fn validation_errors(&self, field: &str) -> Vec<String> {
        let mut errs = Vec::new();
        match self {
            ReinforcementPolicy::Constant { value } => {
                if *value < 1 {
                    errs.push(format!("{field}.value: reinforcement must be >= 1"));
                }
            }
            ReinforcementPolicy::UniformRange { lo, hi } => {
                if *lo < 1 {
                    errs.push(format!("{field}.lo: reinforcement must be >= 1 (lo = {lo})"));
                }
                if lo > hi {
                    errs.push(format!("{field}: lo <= hi required (lo = {lo}, hi = {hi})"));
                }
            }
            ReinforcementPolicy::FiniteDiscrete {
                values,
                probabilities,
            } => {
                errs.extend(distribution_errors(field, values.len(), probabilities));
                if values.iter().zip(probabilities).any(|(&v, &p)| v < 1 && p > 0.0) {
                    errs.push(format!("{field}.values: reinforcement must be >= 1"));
                }
            }
        }
        errs
    }
}

fn support<'a>(values: &'a [u64], probabilities: &'a [f64]) -> impl Iterator<Item = u64> + 'a {
    values
        .iter()
        .zip(probabilities)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&v, _)| v)
}

/// Checks shared by every finite discrete law: matching lengths, nonnegative
/// probabilities summing to one within 1e-12.
pub(crate) fn distribution_errors(field: &str, len: usize, probabilities: &[f64]) -> Vec<String> {
    let mut errs = Vec::new();
    if len == 0 {
        errs.push(format!("{field}.values: must not be empty"));
    }
    if len != probabilities.len() {
        errs.push(format!(
            "{field}: values and probabilities must have equal length ({len} vs {})",
            probabilities.len()
        ));
    }
    if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        errs.push(format!("{field}.probabilities: must be finite and nonnegative"));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        errs.push(format!(
            "{field}.probabilities: must sum to 1 within 1e-12 (sum = {total})"
        ));
    }
    errs
}

/// Inverse-CDF draw of an index from a validated probability vector.
#[inline]
pub(crate) fn sample_index(probabilities: &[f64], rng: &mut RngStream) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probabilities.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}
