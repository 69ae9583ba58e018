//! Plug-in estimators of the asymptotic variances and the resulting
//! confidence intervals for the limit proportion `Z`.
//!
//! With `m_n, q_n, mu_n, eta_n` the running means of `R_j, R_j^2, N_j` and
//! `1/N_j`, and `rho_n = q_n / (m_n^2 mu_n)`:
//!
//! ```text
//! V_n = rho_n Z_n (1 - Z_n)                          Var of sqrt(n)(Z_n - Z)
//! U_n = (rho_n + eta_n - 2/mu_n) Z_n (1 - Z_n)       Var of sqrt(n)(M_n - Z_n)
//! W_n = (2 rho_n + eta_n - 2/mu_n) M_n (1 - M_n)     Var of sqrt(n)(M_n - Z)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::CompensatedSum;
use crate::urn::{StepRecord, Trajectory};

/// Running means of the reinforcements and draw sizes after `n` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlugInEstimates {
    pub n: u64,
    /// Mean reinforcement `m_n`.
    pub m: f64,
    /// Mean squared reinforcement `q_n`.
    pub q: f64,
    /// Mean draw size `mu_n`.
    pub mu: f64,
    /// Mean reciprocal draw size `eta_n`.
    pub eta: f64,
}

impl PlugInEstimates {
    /// `q_n / (m_n^2 mu_n)`.
    pub fn reinforcement_ratio(&self) -> f64 {
        self.q / (self.m * self.m * self.mu)
    }
}

/// Streaming sums behind [`PlugInEstimates`] and `M_n`.
///
/// Reinforcement and draw-size sums are exact integers. `eta_n` is formed
/// from a histogram of draw sizes, so constant draw sizes give `1/h`
/// correctly rounded and the degenerate `U_n` is exactly zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlugInAccumulator {
    n: u64,
    sum_r: u128,
    sum_r2: u128,
    sum_draws: u128,
    draw_counts: Vec<u64>,
    sum_x_prime: CompensatedSum,
}

impl PlugInAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, record: &StepRecord) {
        let r = u128::from(record.reinforcement);
        self.n += 1;
        self.sum_r += r;
        self.sum_r2 += r * r;
        self.sum_draws += u128::from(record.draws);
        let idx = record.draws as usize;
        if idx >= self.draw_counts.len() {
            self.draw_counts.resize(idx + 1, 0);
        }
        self.draw_counts[idx] += 1;
        self.sum_x_prime.add(record.x_prime);
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn running_mean_x_prime(&self) -> Result<f64> {
        self.nonempty()?;
        Ok(self.sum_x_prime.value() / self.n as f64)
    }

    pub fn estimates(&self) -> Result<PlugInEstimates> {
        self.nonempty()?;
        let n = self.n as f64;
        let eta = self
            .draw_counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(v, &c)| (c as f64 / n) / v as f64)
            .collect::<CompensatedSum>()
            .value();
        Ok(PlugInEstimates {
            n: self.n,
            m: self.sum_r as f64 / n,
            q: self.sum_r2 as f64 / n,
            mu: self.sum_draws as f64 / n,
            eta,
        })
    }

    fn nonempty(&self) -> Result<()> {
        if self.n == 0 {
            Err(Error::invalid("plug-in estimates: n >= 1 required (n = 0)"))
        } else {
            Ok(())
        }
    }
}

/// Plug-in estimates from the first `n` records of a trajectory.
pub fn plugin_estimates(trajectory: &Trajectory, n: usize) -> Result<PlugInEstimates> {
    if n == 0 || n > trajectory.len() {
        return Err(Error::invalid(format!(
            "plug-in estimates: 1 <= n <= {} required (n = {n})",
            trajectory.len()
        )));
    }
    let mut acc = PlugInAccumulator::new();
    trajectory.records[..n].iter().for_each(|r| acc.push(r));
    acc.estimates()
}

/// Estimated asymptotic variances at one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimates {
    /// For `sqrt(n)(Z_n - Z)`.
    pub v: f64,
    /// For `sqrt(n)(M_n - Z)`.
    pub w: f64,
    /// For `sqrt(n)(M_n - Z_n)`.
    pub u: f64,
}

pub fn variance_estimates(z: f64, m: f64, est: &PlugInEstimates) -> VarianceEstimates {
    let rho = est.reinforcement_ratio();
    let spread = est.eta - 2.0 / est.mu;
    let z_var = z * (1.0 - z);
    let m_var = m * (1.0 - m);
    // rho >= 1/mu and eta >= 1/mu make both brackets nonnegative; clamp the
    // rounding residue.
    VarianceEstimates {
        v: rho * z_var,
        w: (2.0 * rho + spread).max(0.0) * m_var,
        u: (rho + spread).max(0.0) * z_var,
    }
}

/// Which point estimate an interval is centered on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalBasis {
    /// `Z_n ± q sqrt(V_n / n)`.
    FromZn,
    /// `M_n ± q sqrt(W_n / n)`. Does not use the initial composition.
    FromMn,
}

/// A symmetric normal-approximation interval. The raw interval may leave
/// `[0, 1]`; coverage is always judged on the raw interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub basis: IntervalBasis,
    pub center: f64,
    pub half_width: f64,
    /// Confidence level `1 - alpha`.
    pub level: f64,
}

/// An interval intersected with `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClippedInterval {
    pub lower: f64,
    pub upper: f64,
    pub clipped: bool,
}

impl ConfidenceInterval {
    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }

    /// Closed-interval membership; a zero-width interval contains only its
    /// center.
    pub fn contains(&self, x: f64) -> bool {
        self.lower() <= x && x <= self.upper()
    }

    pub fn clipped(&self) -> ClippedInterval {
        let (lo, hi) = (self.lower(), self.upper());
        ClippedInterval {
            lower: lo.clamp(0.0, 1.0),
            upper: hi.clamp(0.0, 1.0),
            clipped: lo < 0.0 || hi > 1.0,
        }
    }
}

pub fn confidence_interval(
    basis: IntervalBasis,
    point: f64,
    variance: f64,
    n: u64,
    alpha: f64,
) -> Result<ConfidenceInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "confidence interval: 0 < alpha < 1 required (alpha = {alpha})"
        )));
    }
    if n < 1 {
        return Err(Error::invalid("confidence interval: n >= 1 required"));
    }
    if variance.is_nan() || variance < 0.0 {
        return Err(Error::invalid(format!(
            "confidence interval: variance >= 0 required (variance = {variance})"
        )));
    }
    let q = normal_quantile(1.0 - alpha / 2.0)?;
    Ok(ConfidenceInterval {
        basis,
        center: point,
        half_width: q * (variance / n as f64).sqrt(),
        level: 1.0 - alpha,
    })
}

/// Inverse of the standard normal CDF (Wichura's AS 241, about 1e-16
/// relative accuracy).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!(
            "normal quantile: 0 < p < 1 required (p = {p})"
        )));
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5)
            * q;
        let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return Ok(num / den);
    }

    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let z = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_7e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    Ok(if q < 0.0 { -z } else { z })
}
