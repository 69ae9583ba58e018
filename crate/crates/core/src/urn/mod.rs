//! Exact dynamics of a single hypergeometric randomly reinforced urn.
//!
//! At step `n` the urn holds `H_{n-1}` color-A balls out of `S_{n-1}`.
//! `N_n` balls are drawn without replacement, `X_n` of them color A; they are
//! returned together with `R_n X_n` extra A balls and `R_n (N_n - X_n)` extra
//! B balls. Compositions are exact `u64` integers and every update is
//! overflow-checked.

mod hypergeometric;
mod policy;

use serde::{Deserialize, Serialize};

pub use hypergeometric::sample_hypergeometric;
pub use policy::{
    CustomDrawRule, DrawContext, DrawRule, DrawSizePolicy, DrawSizeSampler, ReinforcementPolicy,
    DRAW_POLICY_NAMES, REINFORCEMENT_POLICY_NAMES,
};
pub(crate) use policy::{distribution_errors, sample_index};

use crate::error::{Error, Result};
use crate::estimators::{PlugInAccumulator, PlugInEstimates};
use crate::rng::{Purpose, RngStream, StreamSeed};

/// Composition of one urn after `n` completed steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UrnState {
    /// Initial color-A balls.
    pub a: u64,
    /// Initial color-B balls.
    pub b: u64,
    /// Completed steps.
    pub n: u64,
    /// Current color-A balls `H_n`.
    pub h: u64,
    /// Current total balls `S_n`.
    pub s: u64,
}

impl UrnState {
    pub fn new(a: u64, b: u64) -> Result<Self> {
        if a < 1 || b < 1 {
            return Err(Error::invalid(format!(
                "urn: a >= 1 and b >= 1 required (a = {a}, b = {b})"
            )));
        }
        let s = a
            .checked_add(b)
            .ok_or(Error::Overflow { step: 0 })?;
        Ok(UrnState { a, b, n: 0, h: a, s })
    }

    /// Proportion of color-A balls `Z_n = H_n / S_n`.
    #[inline]
    pub fn z(&self) -> f64 {
        self.h as f64 / self.s as f64
    }
}

/// What happened during one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Index of this step (1-based).
    pub n: u64,
    /// Balls drawn, `N_n`.
    pub draws: u64,
    /// Color-A balls drawn, `X_n`.
    pub drawn_a: u64,
    /// Reinforcement multiplier `R_n`.
    pub reinforcement: u64,
    pub h_after: u64,
    pub s_after: u64,
    pub z_after: f64,
    /// `X_n / N_n`.
    pub x_prime: f64,
}

/// Full description of one urn: initial composition, the uniform bound `k`
/// on draw sizes and reinforcements, and the two policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UrnConfig {
    pub a: u64,
    pub b: u64,
    pub k: u64,
    pub draw: DrawSizePolicy,
    pub reinforcement: ReinforcementPolicy,
}

impl UrnConfig {
    /// Every violated constraint, each prefixed by the offending field.
    pub fn validation_errors(&self) -> Vec<String> {
        self.validation_errors_with_shift(0..=0, 0..=0)
    }

    /// Validation when every emitted `N_n` and `R_n` is additionally shifted
    /// by a common factor taking values in the given ranges.
    pub(crate) fn validation_errors_with_shift(
        &self,
        draw_shift: std::ops::RangeInclusive<i64>,
        reinforcement_shift: std::ops::RangeInclusive<i64>,
    ) -> Vec<String> {
        let mut errs = Vec::new();
        if self.a < 1 {
            errs.push(format!("a: a >= 1 required (a = {})", self.a));
        }
        if self.b < 1 {
            errs.push(format!("b: b >= 1 required (b = {})", self.b));
        }
        if self.k < 1 {
            errs.push(format!("k: k >= 1 required (k = {})", self.k));
        }
        let total = self.a.saturating_add(self.b);
        if self.k > total {
            errs.push(format!(
                "k: k <= a+b required so that every draw fits in the urn (k = {}, a+b = {total})",
                self.k
            ));
        }
        let draw_errs = self.draw.validation_errors("draw");
        let reinf_errs = self.reinforcement.validation_errors("reinforcement");
        let policies_ok = draw_errs.is_empty() && reinf_errs.is_empty();
        errs.extend(draw_errs);
        errs.extend(reinf_errs);
        if policies_ok {
            let k = i128::from(self.k);
            let lo = i128::from(self.draw.support_min()) + i128::from(*draw_shift.start());
            let hi = i128::from(self.draw.support_max()) + i128::from(*draw_shift.end());
            if lo < 1 || hi > k {
                errs.push(format!(
                    "draw: every draw size must lie in 1..=k (range {lo}..={hi}, k = {})",
                    self.k
                ));
            }
            let lo = i128::from(self.reinforcement.support_min())
                + i128::from(*reinforcement_shift.start());
            let hi = i128::from(self.reinforcement.support_max())
                + i128::from(*reinforcement_shift.end());
            if lo < 1 || hi > k {
                errs.push(format!(
                    "reinforcement: every reinforcement must lie in 1..=k (range {lo}..={hi}, k = {})",
                    self.k
                ));
            }
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

    /// Draw sizes i.i.d. (reinforcements always are), so the plug-in
    /// variance estimators target the right limits.
    pub fn plugin_assumptions_met(&self) -> bool {
        self.draw.is_iid()
    }

    /// `N_n = 1` and constant `R_n = c`: the classical Pólya urn, whose limit
    /// proportion is Beta(a/c, b/c).
    pub fn polya_reinforcement(&self) -> Option<u64> {
        let unit_draws = match &self.draw {
            DrawSizePolicy::ConstantOne => true,
            DrawSizePolicy::Deterministic { sequence } => sequence.iter().all(|&h| h == 1),
            _ => false,
        };
        match self.reinforcement {
            ReinforcementPolicy::Constant { value } if unit_draws => Some(value),
            _ => None,
        }
    }
}

/// The three independent streams feeding one urn.
#[derive(Debug, Clone)]
pub struct UrnStreams {
    pub draw: RngStream,
    pub extraction: RngStream,
    pub reinforcement: RngStream,
}

impl UrnStreams {
    pub fn new(seed: StreamSeed) -> Self {
        UrnStreams {
            draw: seed.stream(Purpose::DrawSize),
            extraction: seed.stream(Purpose::Extraction),
            reinforcement: seed.stream(Purpose::Reinforcement),
        }
    }
}

/// Take one step from `state`. `bound` is the urn's `k`; any emission outside
/// `1..=min(k, S_{n-1})` is a model violation.
pub fn step(
    state: &UrnState,
    draw: &mut DrawSizeSampler,
    reinforcement: &ReinforcementPolicy,
    streams: &mut UrnStreams,
    bound: u64,
) -> Result<(UrnState, StepRecord)> {
    step_shifted(state, draw, reinforcement, streams, bound, 0, 0)
}

#[inline]
pub(crate) fn step_shifted(
    state: &UrnState,
    draw: &mut DrawSizeSampler,
    reinforcement: &ReinforcementPolicy,
    streams: &mut UrnStreams,
    bound: u64,
    draw_shift: i64,
    reinforcement_shift: i64,
) -> Result<(UrnState, StepRecord)> {
    let n = state.n + 1;
    let raw_draws = draw.next(state.s, &mut streams.draw);
    let draws = shift(raw_draws, draw_shift);
    let limit = bound.min(state.s);
    let draws = match draws {
        Some(d) if (1..=limit).contains(&d) => d,
        _ => {
            return Err(Error::ModelViolation {
                step: n,
                message: format!(
                    "draw size {raw_draws}{} outside 1..={limit}",
                    shift_note(draw_shift)
                ),
            })
        }
    };

    let drawn_a = sample_hypergeometric(&mut streams.extraction, draws, state.s, state.h)?;

    let raw_r = reinforcement.sample(&mut streams.reinforcement);
    let r = match shift(raw_r, reinforcement_shift) {
        Some(r) if (1..=bound).contains(&r) => r,
        _ => {
            return Err(Error::ModelViolation {
                step: n,
                message: format!(
                    "reinforcement {raw_r}{} outside 1..={bound}",
                    shift_note(reinforcement_shift)
                ),
            })
        }
    };

    let overflow = || Error::Overflow { step: n };
    let h = r
        .checked_mul(drawn_a)
        .and_then(|added| state.h.checked_add(added))
        .ok_or_else(overflow)?;
    let s = r
        .checked_mul(draws)
        .and_then(|added| state.s.checked_add(added))
        .ok_or_else(overflow)?;

    let next = UrnState { n, h, s, ..*state };
    let record = StepRecord {
        n,
        draws,
        drawn_a,
        reinforcement: r,
        h_after: h,
        s_after: s,
        z_after: next.z(),
        x_prime: drawn_a as f64 / draws as f64,
    };
    Ok((next, record))
}

#[inline]
fn shift(value: u64, by: i64) -> Option<u64> {
    value.checked_add_signed(by)
}

fn shift_note(by: i64) -> String {
    if by == 0 {
        String::new()
    } else {
        format!(" shifted by {by}")
    }
}

/// Integer form of `Z_n - Z_{n-1} = R_n (X_n - N_n Z_{n-1}) / S_n`:
/// `H_n S_{n-1} - H_{n-1} S_n = R_n X_n S_{n-1} - R_n N_n H_{n-1}`.
pub fn increment_identity_check(record: &StepRecord, h_before: u64, s_before: u64) -> bool {
    let (hb, sb) = (i128::from(h_before), i128::from(s_before));
    let (ha, sa) = (i128::from(record.h_after), i128::from(record.s_after));
    let r = i128::from(record.reinforcement);
    let lhs = ha * sb - hb * sa;
    let rhs = r * i128::from(record.drawn_a) * sb - r * i128::from(record.draws) * hb;
    lhs == rhs
}

/// Quantities observed at a fixed horizon `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub n: u64,
    pub h: u64,
    pub s: u64,
    /// `Z_n`.
    pub z: f64,
    /// `M_n`, the running mean of `X_j / N_j`.
    pub m: f64,
    pub estimates: PlugInEstimates,
}

/// A running urn: configuration, composition, policy state, streams and the
/// running plug-in sums. This is the streaming counterpart of [`Trajectory`]
/// used when per-step records are not kept.
#[derive(Debug, Clone)]
pub struct Urn {
    config: UrnConfig,
    state: UrnState,
    sampler: DrawSizeSampler,
    streams: UrnStreams,
    stats: PlugInAccumulator,
}

impl Urn {
    pub fn new(config: UrnConfig, seed: StreamSeed) -> Result<Self> {
        config.validate()?;
        Ok(Self::new_unchecked(config, seed))
    }

    pub(crate) fn new_unchecked(config: UrnConfig, seed: StreamSeed) -> Self {
        Urn {
            state: UrnState {
                a: config.a,
                b: config.b,
                n: 0,
                h: config.a,
                s: config.a + config.b,
            },
            sampler: DrawSizeSampler::new(config.draw.clone()),
            streams: UrnStreams::new(seed),
            stats: PlugInAccumulator::new(),
            config,
        }
    }

    pub fn config(&self) -> &UrnConfig {
        &self.config
    }

    pub fn state(&self) -> &UrnState {
        &self.state
    }

    #[inline]
    pub fn step(&mut self) -> Result<StepRecord> {
        self.step_shifted(0, 0)
    }

    #[inline]
    pub(crate) fn step_shifted(&mut self, draw_shift: i64, reinf_shift: i64) -> Result<StepRecord> {
        let (state, record) = step_shifted(
            &self.state,
            &mut self.sampler,
            &self.config.reinforcement,
            &mut self.streams,
            self.config.k,
            draw_shift,
            reinf_shift,
        )?;
        self.state = state;
        self.stats.push(&record);
        Ok(record)
    }

    /// Step until `n` steps have been completed in total.
    pub fn advance_to(&mut self, n: u64) -> Result<()> {
        while self.state.n < n {
            self.step()?;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Result<Snapshot> {
        Ok(Snapshot {
            n: self.state.n,
            h: self.state.h,
            s: self.state.s,
            z: self.state.z(),
            m: self.stats.running_mean_x_prime()?,
            estimates: self.stats.estimates()?,
        })
    }
}

/// A recorded run of one urn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: UrnConfig,
    pub seed: StreamSeed,
    pub records: Vec<StepRecord>,
    /// `M_n` after each step.
    pub m: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Composition before step `n` (1-based), i.e. `(H_{n-1}, S_{n-1})`.
    pub fn before(&self, n: usize) -> (u64, u64) {
        match n {
            0 | 1 => (self.config.a, self.config.a + self.config.b),
            _ => {
                let r = &self.records[n - 2];
                (r.h_after, r.s_after)
            }
        }
    }

    /// Horizon-`n` quantities recomputed from the first `n` records.
    pub fn snapshot(&self, n: usize) -> Result<Snapshot> {
        if n == 0 || n > self.records.len() {
            return Err(Error::invalid(format!(
                "snapshot: 1 <= n <= {} required (n = {n})",
                self.records.len()
            )));
        }
        let last = &self.records[n - 1];
        Ok(Snapshot {
            n: n as u64,
            h: last.h_after,
            s: last.s_after,
            z: last.z_after,
            m: self.m[n - 1],
            estimates: crate::estimators::plugin_estimates(self, n)?,
        })
    }
}

/// Run `steps` steps of the urn described by `config`.
pub fn run_trajectory(config: &UrnConfig, steps: u64, seed: StreamSeed) -> Result<Trajectory> {
    if steps < 1 {
        return Err(Error::invalid("run_trajectory: steps >= 1 required"));
    }
    let mut urn = Urn::new(config.clone(), seed)?;
    let mut records = Vec::with_capacity(steps as usize);
    let mut m = Vec::with_capacity(steps as usize);
    for _ in 0..steps {
        records.push(urn.step()?);
        m.push(urn.stats.running_mean_x_prime()?);
    }
    Ok(Trajectory {
        config: config.clone(),
        seed,
        records,
        m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polya(a: u64, b: u64, k: u64) -> UrnConfig {
        UrnConfig {
            a,
            b,
            k,
            draw: DrawSizePolicy::ConstantOne,
            reinforcement: ReinforcementPolicy::Constant { value: k },
        }
    }

    fn example_4_7() -> UrnConfig {
        UrnConfig {
            a: 10,
            b: 10,
            k: 4,
            draw: DrawSizePolicy::IidUniform { h: 4 },
            reinforcement: ReinforcementPolicy::UniformRange { lo: 1, hi: 3 },
        }
    }

    #[test]
    fn initial_state() {
        let s = UrnState::new(2, 3).unwrap();
        assert_eq!((s.h, s.s, s.n), (2, 5, 0));
        assert!(UrnState::new(0, 3).is_err());
    }

    #[test]
    fn exhaustive_draw_step() {
        // H = 3, S = 5, all five balls drawn, R = 2.
        let state = UrnState { a: 3, b: 2, n: 0, h: 3, s: 5 };
        let mut draw = DrawSizeSampler::new(DrawSizePolicy::Deterministic { sequence: vec![5] });
        let reinf = ReinforcementPolicy::Constant { value: 2 };
        let mut streams = UrnStreams::new(StreamSeed::new(9));
        let (next, rec) = step(&state, &mut draw, &reinf, &mut streams, 5).unwrap();
        assert_eq!(rec.drawn_a, 3);
        assert_eq!((next.h, next.s), (9, 15));
        assert_eq!(next.z(), 0.6);
        assert!(increment_identity_check(&rec, 3, 5));
    }

    #[test]
    fn first_polya_step_is_fair_coin() {
        // Hypergeom(1, 2, 1): H' in {1, 2} with probability 1/2 each.
        let cfg = polya(1, 1, 1);
        let reps = 100_000u64;
        let mut twos = 0u64;
        for r in 0..reps {
            let t = run_trajectory(&cfg, 1, StreamSeed::new(5).replication(r)).unwrap();
            let rec = t.records[0];
            assert_eq!(rec.s_after, 3);
            assert!(rec.h_after == 1 || rec.h_after == 2);
            twos += u64::from(rec.h_after == 2);
        }
        let p = twos as f64 / reps as f64;
        assert!((p - 0.5).abs() < 4.0 * (0.25 / reps as f64).sqrt(), "{p}");
    }

    #[test]
    fn one_step_trajectory() {
        let cfg = UrnConfig { a: 2, b: 3, ..polya(2, 3, 1) };
        assert!(run_trajectory(&cfg, 0, StreamSeed::new(1)).is_err());
        let t = run_trajectory(&cfg, 1, StreamSeed::new(1)).unwrap();
        let r = t.records[0];
        assert_eq!(r.s_after, 5 + r.reinforcement * r.draws);
    }

    #[test]
    fn constant_policies_grow_linearly() {
        let cfg = polya(2, 3, 4);
        let t = run_trajectory(&cfg, 500, StreamSeed::new(2)).unwrap();
        for r in &t.records {
            assert_eq!(r.s_after, 5 + 4 * r.n);
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let cfg = example_4_7();
        let a = run_trajectory(&cfg, 1000, StreamSeed::new(77)).unwrap();
        let b = run_trajectory(&cfg, 1000, StreamSeed::new(77)).unwrap();
        assert_eq!(a, b);
        let c = run_trajectory(&cfg, 1000, StreamSeed::new(78)).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn running_mean_matches_recomputation() {
        let t = run_trajectory(&example_4_7(), 5000, StreamSeed::new(3)).unwrap();
        assert_eq!(t.m.len(), t.records.len());
        for n in [1usize, 10, 999, 5000] {
            let direct: f64 =
                t.records[..n].iter().map(|r| r.x_prime).sum::<f64>() / n as f64;
            assert!((direct - t.m[n - 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn state_invariants_along_trajectory() {
        let cfg = example_4_7();
        let t = run_trajectory(&cfg, 3000, StreamSeed::new(4)).unwrap();
        let mut total = cfg.a + cfg.b;
        for (i, r) in t.records.iter().enumerate() {
            let (hb, sb) = t.before(i + 1);
            assert!(r.drawn_a <= r.draws.min(hb));
            assert!(r.drawn_a + (sb - hb) >= r.draws);
            total += r.draws * r.reinforcement;
            assert_eq!(r.s_after, total);
            assert!(r.h_after >= cfg.a && r.s_after - r.h_after >= cfg.b);
            assert!(r.z_after > 0.0 && r.z_after < 1.0);
            assert!(increment_identity_check(r, hb, sb));
        }
    }

    #[test]
    fn corrupted_record_fails_identity() {
        let t = run_trajectory(&example_4_7(), 10, StreamSeed::new(6)).unwrap();
        let mut r = t.records[4];
        let (hb, sb) = t.before(5);
        assert!(increment_identity_check(&r, hb, sb));
        r.h_after += 1;
        assert!(!increment_identity_check(&r, hb, sb));
    }

    #[test]
    fn polya_increment_form() {
        // N = 1, R = k: Z_n - Z_{n-1} = k (X_n - Z_{n-1}) / S_n.
        let cfg = polya(3, 4, 5);
        let t = run_trajectory(&cfg, 200, StreamSeed::new(8)).unwrap();
        for (i, r) in t.records.iter().enumerate() {
            let (hb, sb) = t.before(i + 1);
            let z_prev = hb as f64 / sb as f64;
            let lhs = r.z_after - z_prev;
            let rhs = 5.0 * (r.drawn_a as f64 - z_prev) / r.s_after as f64;
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn conditional_mean_of_x_prime_is_z() {
        // From a fixed state, E[X/N] = H/S.
        let state = UrnState { a: 7, b: 6, n: 0, h: 7, s: 13 };
        let reinf = ReinforcementPolicy::Constant { value: 1 };
        let mut streams = UrnStreams::new(StreamSeed::new(10));
        let reps = 100_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..reps {
            let mut draw = DrawSizeSampler::new(DrawSizePolicy::IidUniform { h: 4 });
            let (_, r) = step(&state, &mut draw, &reinf, &mut streams, 4).unwrap();
            sum += r.x_prime;
            sum2 += r.x_prime * r.x_prime;
        }
        let mean = sum / reps as f64;
        let sd = (sum2 / reps as f64 - mean * mean).sqrt();
        assert!((mean - 7.0 / 13.0).abs() < 4.0 * sd / (reps as f64).sqrt());
    }

    #[test]
    fn validation_lists_every_problem() {
        let cfg = UrnConfig {
            a: 1,
            b: 1,
            k: 3,
            draw: DrawSizePolicy::IidUniform { h: 4 },
            reinforcement: ReinforcementPolicy::UniformRange { lo: 0, hi: 2 },
        };
        let errs = cfg.validation_errors();
        assert!(errs.iter().any(|e| e.contains("k <= a+b")), "{errs:?}");
        assert!(errs.iter().any(|e| e.starts_with("reinforcement.lo")), "{errs:?}");
        assert!(Urn::new(cfg, StreamSeed::new(0)).is_err());

        let over = UrnConfig { k: 3, ..example_4_7() };
        let errs = over.validation_errors();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].starts_with("draw:"));
    }

    #[test]
    fn custom_rule_violating_bound_is_caught() {
        struct Liar;
        impl DrawRule for Liar {
            fn bound(&self) -> u64 {
                2
            }
            fn draw(&self, _: &DrawContext<'_>, _: &mut RngStream) -> u64 {
                7
            }
        }
        let cfg = UrnConfig {
            a: 5,
            b: 5,
            k: 2,
            draw: DrawSizePolicy::custom(Liar),
            reinforcement: ReinforcementPolicy::Constant { value: 1 },
        };
        let err = run_trajectory(&cfg, 3, StreamSeed::new(0)).unwrap_err();
        assert!(matches!(err, Error::ModelViolation { step: 1, .. }));
    }

    #[test]
    fn overflow_is_reported() {
        let state = UrnState { a: 1, b: 1, n: 41, h: u64::MAX - 10, s: u64::MAX - 5 };
        let mut draw = DrawSizeSampler::new(DrawSizePolicy::ConstantOne);
        let reinf = ReinforcementPolicy::Constant { value: 8 };
        let mut streams = UrnStreams::new(StreamSeed::new(0));
        let err = step(&state, &mut draw, &reinf, &mut streams, 8).unwrap_err();
        assert_eq!(err, Error::Overflow { step: 42 });
    }

    #[test]
    fn streaming_urn_matches_trajectory() {
        let cfg = example_4_7();
        let seed = StreamSeed::new(11);
        let t = run_trajectory(&cfg, 700, seed).unwrap();
        let mut urn = Urn::new(cfg, seed).unwrap();
        urn.advance_to(700).unwrap();
        assert_eq!(urn.snapshot().unwrap(), t.snapshot(700).unwrap());
    }
}
