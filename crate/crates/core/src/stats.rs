//! Self-contained statistical kernel: Welch's t-test, Mann-Whitney U,
//! Cohen's d, Shannon diversity, and normal-approximation confidence
//! intervals. All tests are two-sided.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestMethod {
    WelchT,
    MannWhitneyU,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    pub n1: usize,
    pub n2: usize,
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance (n-1 denominator).
pub fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn sample_sd(x: &[f64]) -> f64 {
    sample_variance(x).sqrt()
}

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

/// Lanczos approximation of ln Γ(z), g = 7, n = 9.
fn ln_gamma(z: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if z < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut acc = COEFFS[0];
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (Lentz's method).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 3e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value for a Student-t statistic with `df` degrees of freedom.
/// Uses P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2).
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    incomplete_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// erf via the Abramowitz & Stegun 7.1.26 rational approximation
/// (absolute error < 1.5e-7, ample for two-sided p-values).
fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

// ---------------------------------------------------------------------------
// Welch's t-test
// ---------------------------------------------------------------------------

/// Welch's unequal-variance t-test, two-sided p via the Student-t CDF with
/// Welch-Satterthwaite degrees of freedom.
pub fn welch_t(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::EmptySample);
    }
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let (v1, v2) = (sample_variance(x), sample_variance(y));
    if v1 == 0.0 && v2 == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let se2 = v1 / n1 + v2 / n2;
    let t = (mean(x) - mean(y)) / se2.sqrt();
    let df = se2 * se2 / ((v1 / n1).powi(2) / (n1 - 1.0) + (v2 / n2).powi(2) / (n2 - 1.0));
    Ok(TestResult {
        statistic: t,
        p_value: student_t_two_sided_p(t, df),
        method: TestMethod::WelchT,
        n1: x.len(),
        n2: y.len(),
    })
}

// ---------------------------------------------------------------------------
// Mann-Whitney U
// ---------------------------------------------------------------------------

/// Midranks of the pooled sample, then U for the first sample.
fn u_statistic(x: &[f64], y: &[f64]) -> f64 {
    let n1 = x.len();
    let mut pooled: Vec<(f64, bool)> = x
        .iter()
        .map(|&v| (v, true))
        .chain(y.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pooled.len();
    let mut r1 = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + j + 1) as f64 / 2.0;
        for item in &pooled[i..j] {
            if item.1 {
                r1 += midrank;
            }
        }
        i = j;
    }
    r1 - (n1 * (n1 + 1)) as f64 / 2.0
}

/// Sum over tie groups of t^3 - t, for the tie-corrected variance.
fn tie_term(pooled_sorted: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut i = 0;
    while i < pooled_sorted.len() {
        let mut j = i + 1;
        while j < pooled_sorted.len() && pooled_sorted[j] == pooled_sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        acc += t * t * t - t;
        i = j;
    }
    acc
}

/// Exact two-sided p by enumerating every assignment of the pooled values to
/// the first sample: P(|U - n1 n2 / 2| >= |u_obs - n1 n2 / 2|).
fn mann_whitney_exact_p(x: &[f64], y: &[f64], u_obs: f64) -> f64 {
    let n1 = x.len();
    let n = n1 + y.len();
    debug_assert!(n <= 20);
    let pooled: Vec<f64> = x.iter().chain(y.iter()).copied().collect();
    let mu = (x.len() * y.len()) as f64 / 2.0;
    let dev = (u_obs - mu).abs();
    let mut total = 0u64;
    let mut extreme = 0u64;
    let mut xs = Vec::with_capacity(n1);
    let mut ys = Vec::with_capacity(n - n1);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        xs.clear();
        ys.clear();
        for (i, &v) in pooled.iter().enumerate() {
            if mask & (1 << i) != 0 {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
        let u = u_statistic(&xs, &ys);
        total += 1;
        // small slack so float-equal deviations count as extreme
        if (u - mu).abs() >= dev - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / total as f64
}

/// Mann-Whitney U with midrank tie handling. Exact enumeration when both
/// samples are smaller than 8; otherwise a normal approximation with
/// tie-corrected variance and continuity correction.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySample);
    }
    let u = u_statistic(x, y);
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let mu = n1 * n2 / 2.0;

    let mut pooled: Vec<f64> = x.iter().chain(y.iter()).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let n = n1 + n2;
    let ties = tie_term(&pooled);
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));

    let p = if var <= 0.0 {
        // every pooled value identical
        1.0
    } else if x.len() < 8 && y.len() < 8 {
        mann_whitney_exact_p(x, y, u)
    } else {
        let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
        (2.0 * (1.0 - normal_cdf(z))).clamp(0.0, 1.0)
    };

    Ok(TestResult {
        statistic: u,
        p_value: p,
        method: TestMethod::MannWhitneyU,
        n1: x.len(),
        n2: y.len(),
    })
}

// ---------------------------------------------------------------------------
// Effect size, diversity, confidence intervals
// ---------------------------------------------------------------------------

/// Cohen's d with the pooled standard deviation.
pub fn cohens_d(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::EmptySample);
    }
    cohens_d_from_moments(
        mean(x),
        sample_sd(x),
        x.len(),
        mean(y),
        sample_sd(y),
        y.len(),
    )
}

pub fn cohens_d_from_moments(
    mean_x: f64,
    sd_x: f64,
    n_x: usize,
    mean_y: f64,
    sd_y: f64,
    n_y: usize,
) -> Result<f64> {
    let pooled = (((n_x - 1) as f64 * sd_x * sd_x + (n_y - 1) as f64 * sd_y * sd_y)
        / (n_x + n_y - 2) as f64)
        .sqrt();
    if pooled == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok((mean_x - mean_y) / pooled)
}

/// Shannon entropy in nats over the classes with positive count.
pub fn shannon_diversity(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            p * p.ln()
        })
        .sum::<f64>()
}

/// 95% normal-approximation confidence interval: mean +- 1.96 * SD / sqrt(n).
pub fn mean_ci95(x: &[f64]) -> Result<(f64, f64)> {
    if x.len() < 2 {
        return Err(Error::EmptySample);
    }
    Ok(ci95_from_moments(mean(x), sample_sd(x), x.len()))
}

pub fn ci95_from_moments(mean: f64, sd: f64, n: usize) -> (f64, f64) {
    let half = 1.96 * sd / (n as f64).sqrt();
    (mean - half, mean + half)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn ln_gamma_matches_known_values() {
        assert_close(ln_gamma(1.0), 0.0, 1e-12);
        assert_close(ln_gamma(2.0), 0.0, 1e-12);
        assert_close(ln_gamma(5.0), 24f64.ln(), 1e-10);
        assert_close(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), 1e-10);
    }

    #[test]
    fn t_two_sided_p_analytic_anchors() {
        // df = 1 is Cauchy: P(|T| > 1) = 0.5 exactly.
        assert_close(student_t_two_sided_p(1.0, 1.0), 0.5, 1e-9);
        // df = 2: CDF(t) = 1/2 + t / (2 sqrt(2) sqrt(1 + t^2/2)).
        let p2 = 2.0 * (0.5 - 1.0 / (2.0 * (2.0f64).sqrt() * (1.5f64).sqrt()));
        assert_close(student_t_two_sided_p(1.0, 2.0), p2, 1e-9);
        // tabulated: P(|T_8| >= 1) = 0.34659...
        assert_close(student_t_two_sided_p(-1.0, 8.0), 0.3466, 2e-4);
        assert_close(student_t_two_sided_p(0.0, 5.0), 1.0, 1e-12);
    }

    #[test]
    fn normal_cdf_anchor() {
        assert_close(normal_cdf(1.96), 0.975_002, 1e-5);
        assert_close(normal_cdf(0.0), 0.5, 1e-9);
    }

    #[test]
    fn welch_identical_samples() {
        let x = [1.0, 2.0, 3.0];
        let r = welch_t(&x, &x).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_close(r.p_value, 1.0, 1e-12);
    }

    #[test]
    fn welch_hand_computed_statistic() {
        // means 3 and 4, both variances 2.5 -> t = -1.0, df = 8.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 3.0, 4.0, 5.0, 6.0];
        let r = welch_t(&x, &y).unwrap();
        assert_close(r.statistic, -1.0, 1e-12);
        assert_close(r.p_value, 0.3466, 2e-4);
    }

    #[test]
    fn welch_p_tracks_resampled_permutation_oracle() {
        // moderate samples: 1e5 random permutations of the pooled values
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let x: Vec<f64> = (0..12).map(|i| 1.0 + 0.9 * i as f64).collect();
        let y: Vec<f64> = (0..12).map(|i| 2.2 + 1.0 * i as f64).collect();
        let observed = welch_t(&x, &y).unwrap();
        let t_obs = observed.statistic.abs();
        let mut pooled: Vec<f64> = x.iter().chain(y.iter()).copied().collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1234);
        let resamples = 100_000;
        let mut extreme = 0u32;
        for _ in 0..resamples {
            pooled.shuffle(&mut rng);
            let t = welch_t(&pooled[..12], &pooled[12..]).unwrap().statistic;
            if t.abs() >= t_obs {
                extreme += 1;
            }
        }
        let oracle = f64::from(extreme) / f64::from(resamples);
        assert!(
            (observed.p_value - oracle).abs() <= 0.01,
            "welch {} vs resampled {}",
            observed.p_value,
            oracle
        );
    }

    #[test]
    fn welch_degenerate_errors() {
        let x = [2.0, 2.0, 2.0];
        let y = [3.0, 3.0, 3.0];
        assert!(matches!(
            welch_t(&x, &y),
            Err(Error::DegenerateVariance)
        ));
    }

    #[test]
    fn welch_shift_monotonicity() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 4.5, 5.0];
        let t0 = welch_t(&x, &y).unwrap().statistic;
        let shifted: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        let t1 = welch_t(&shifted, &y).unwrap().statistic;
        assert!(t1 >= t0);
    }

    #[test]
    fn mann_whitney_exact_small_case() {
        // {1,2} vs {3,4}: U = 0, exact two-sided p = 2/6.
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_close(r.p_value, 1.0 / 3.0, 1e-12);
    }

    #[test]
    fn mann_whitney_symmetric_u() {
        let x = [1.0, 2.0, 3.0];
        let r = mann_whitney_u(&x, &x).unwrap();
        assert_eq!(r.statistic, 4.5); // n1*n2/2
        assert_close(r.p_value, 1.0, 1e-9);
    }

    #[test]
    fn mann_whitney_all_identical() {
        let x = [5.0; 4];
        let y = [5.0; 6];
        let r = mann_whitney_u(&x, &y).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn mann_whitney_approx_tracks_exact_enumeration() {
        // Both samples at size 8 use the normal approximation; check it
        // against full enumeration (12870 splits).
        let x = [1.0, 3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0];
        let y = [2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0];
        let r = mann_whitney_u(&x, &y).unwrap();
        let exact = mann_whitney_exact_p(&x, &y, r.statistic);
        assert_close(r.p_value, exact, 0.02);

        let x = [0.5, 0.5, 1.0, 2.0, 2.0, 3.0, 4.0, 8.0];
        let y = [1.5, 2.0, 2.5, 3.0, 5.0, 6.0, 7.0, 7.5];
        let r = mann_whitney_u(&x, &y).unwrap();
        let exact = mann_whitney_exact_p(&x, &y, r.statistic);
        assert_close(r.p_value, exact, 0.02);
    }

    #[test]
    fn cohens_d_basics() {
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 2.0, 3.0];
        assert_eq!(cohens_d(&x, &y).unwrap(), 0.0);
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 3.0, 5.0, 6.0];
        let d1 = cohens_d(&a, &b).unwrap();
        let d2 = cohens_d(&b, &a).unwrap();
        assert_close(d1, -d2, 1e-12);
    }

    #[test]
    fn cohens_d_from_reported_moments() {
        let d = cohens_d_from_moments(27.36, 8.59, 300, 20.37, 10.96, 300).unwrap();
        assert_close(d, 0.708, 0.01);
    }

    #[test]
    fn shannon_diversity_cases() {
        assert_eq!(shannon_diversity(&[7]), 0.0);
        assert_close(shannon_diversity(&[3, 3, 3, 3, 3]), 5.0f64.ln(), 1e-9);
        // counts (2,2,1): -(0.4 ln 0.4 + 0.4 ln 0.4 + 0.2 ln 0.2)
        let expected = -(0.4f64 * 0.4f64.ln() + 0.4 * 0.4f64.ln() + 0.2 * 0.2f64.ln());
        assert_close(shannon_diversity(&[2, 2, 1]), expected, 1e-12);
        assert_eq!(shannon_diversity(&[0, 0]), 0.0);
    }

    #[test]
    fn shannon_diversity_relabel_invariant() {
        assert_eq!(
            shannon_diversity(&[5, 1, 9, 0, 2]),
            shannon_diversity(&[9, 2, 0, 5, 1])
        );
    }

    #[test]
    fn ci95_from_reported_moments() {
        let (lo, hi) = ci95_from_moments(0.67, 1.28, 300);
        assert_close(lo, 0.52, 0.01);
        assert_close(hi, 0.81, 0.01);
    }

    #[test]
    fn ci95_scaling_and_constant_sample() {
        let x = [3.0; 5];
        let (lo, hi) = mean_ci95(&x).unwrap();
        assert_eq!((lo, hi), (3.0, 3.0));

        let (lo1, hi1) = ci95_from_moments(0.0, 1.0, 100);
        let (lo2, hi2) = ci95_from_moments(0.0, 1.0, 200);
        let ratio = (hi1 - lo1) / (hi2 - lo2);
        assert_close(ratio, 2.0f64.sqrt(), 1e-12);
    }
}
