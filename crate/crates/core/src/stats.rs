//! Small numeric helpers shared by the estimators and the Monte Carlo suites.

use libm::erfc;

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn total_cmp_sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Exact Kolmogorov-Smirnov distance `sup |F_emp - F|` between the empirical
/// CDF of `samples` and a continuous reference CDF. The supremum is attained
/// at a jump point, so only the two one-sided gaps at each sorted sample are
/// inspected.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let sorted = total_cmp_sorted(samples);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Kolmogorov-Smirnov distance from the standard normal law.
pub fn ks_distance_normal(samples: &[f64]) -> f64 {
    ks_distance(samples, normal_cdf)
}

/// Two-sample Kolmogorov-Smirnov distance `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let a = total_cmp_sorted(a);
    let b = total_cmp_sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at significance `alpha`.
pub fn ks_two_sample_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    let (n, m) = (n as f64, m as f64);
    c * ((n + m) / (n * m)).sqrt()
}

/// Largest point mass of the empirical distribution (ties counted exactly).
pub fn max_ecdf_jump(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let sorted = total_cmp_sorted(samples);
    let mut best = 1usize;
    let mut run = 1usize;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
            best = best.max(run);
        } else {
            run = 1;
        }
    }
    best as f64 / sorted.len() as f64
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().copied().collect::<CompensatedSum>().value() / values.len() as f64
}

/// Unbiased sample standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss = values
        .iter()
        .map(|x| (x - m) * (x - m))
        .collect::<CompensatedSum>()
        .value();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

/// Pearson correlation of paired samples.
pub fn correlation(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).collect::<CompensatedSum>().value() / n;
    let my = pairs.iter().map(|p| p.1).collect::<CompensatedSum>().value() / n;
    let (mut sxy, mut sxx, mut syy) = (
        CompensatedSum::new(),
        CompensatedSum::new(),
        CompensatedSum::new(),
    );
    for &(x, y) in pairs {
        sxy.add((x - mx) * (y - my));
        sxx.add((x - mx) * (x - mx));
        syy.add((y - my) * (y - my));
    }
    sxy.value() / (sxx.value() * syy.value()).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    let sorted = total_cmp_sorted(values);
    let n = sorted.len();
    match n % 2 {
        1 => sorted[n / 2],
        _ => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Brute-force reference: evaluate |F_emp - F| just at and just left of
    // every sample by counting, O(n^2).
    fn ks_brute(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
        let n = samples.len() as f64;
        let mut d = 0.0f64;
        for &x in samples {
            let at = samples.iter().filter(|&&y| y <= x).count() as f64 / n;
            let left = samples.iter().filter(|&&y| y < x).count() as f64 / n;
            d = d.max((at - cdf(x)).abs()).max((left - cdf(x)).abs());
        }
        d
    }

    #[test]
    fn ks_matches_brute_force() {
        let samples = [0.3, -1.2, 0.0, 2.5, 0.3, -0.7, 1.1, -2.2, 0.9];
        let fast = ks_distance_normal(&samples);
        let slow = ks_brute(&samples, normal_cdf);
        assert!((fast - slow).abs() < 1e-15, "{fast} vs {slow}");
    }

    #[test]
    fn ks_single_point_uniform() {
        // ECDF jumps 0 -> 1 at 0.25 against F(z) = z: sup = 0.75.
        assert!((ks_distance(&[0.25], |z| z) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn ks_invariant_to_sample_order() {
        let a = [0.5, -0.1, 1.7, -0.9];
        let b = [-0.9, 1.7, 0.5, -0.1];
        assert_eq!(ks_distance_normal(&a), ks_distance_normal(&b));
    }

    #[test]
    fn two_sample_ks() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
        assert!((ks_two_sample(&[0.0, 2.0], &[1.0, 3.0]) - 0.5).abs() < 1e-15);
        assert!((ks_two_sample_critical(0.05, 100, 100) - 0.19206).abs() < 1e-4);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-15);
        assert!((normal_cdf(-3.090232306167813) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn ecdf_jump_and_median() {
        assert_eq!(max_ecdf_jump(&[0.1, 0.2, 0.2, 0.3]), 0.5);
        assert_eq!(max_ecdf_jump(&[0.1, 0.2]), 0.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn correlation_of_linear_pairs() {
        let pairs: Vec<_> = (0..10).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect();
        assert!((correlation(&pairs) + 1.0).abs() < 1e-12);
    }
}
