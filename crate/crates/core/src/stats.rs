//! Small statistics toolkit: KS tests, z-tests, OLS, batch errors and ESS.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Sample mean and standard error of the mean.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn variance(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Mean with a cluster-robust standard error: samples sharing a cluster label
/// (one MCMC chain, say) are averaged first, and the error comes from the
/// spread of cluster means. Falls back to [`mean_se`] with a single cluster.
pub fn cluster_mean_se(x: &[f64], clusters: &[usize]) -> (f64, f64) {
    assert_eq!(x.len(), clusters.len());
    let k = clusters.iter().copied().max().map_or(0, |m| m + 1);
    let mut sum = vec![0.0; k];
    let mut cnt = vec![0usize; k];
    for (v, &c) in x.iter().zip(clusters) {
        sum[c] += v;
        cnt[c] += 1;
    }
    let used: Vec<usize> = (0..k).filter(|&c| cnt[c] > 0).collect();
    if used.len() < 2 {
        return mean_se(x);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    // Ratio-estimator variance for unequal cluster sizes.
    let g = used.len() as f64;
    let nbar = n / g;
    let s: f64 = used.iter().map(|&c| (sum[c] - cnt[c] as f64 * mean).powi(2)).sum();
    let var = s / (g * (g - 1.0) * nbar * nbar);
    (mean, var.sqrt())
}

/// Integrated-autocorrelation effective sample size with Geyer's initial
/// positive sequence truncation.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return n as f64;
    }
    let acf = |lag: usize| -> f64 {
        x[..n - lag].iter().zip(&x[lag..]).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>() / n as f64 / c0
    };
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while 2 * t + 1 < n {
        let mut pair = acf(2 * t) + acf(2 * t + 1);
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        t += 1;
    }
    (n as f64 / tau.max(1.0 / n as f64)).min(n as f64)
}

/// Upper tail of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series converges fast for small lambda.
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let s: f64 = (0..20).map(|j| y.powi((2 * j + 1) * (2 * j + 1))).sum();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic KS p-value for statistic `d` at effective sample size `n_eff`.
pub fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

/// Result of a Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test of `data` against a continuous CDF.
pub fn ks_one_sample(data: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut x = data.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in x.iter().enumerate() {
        let f = cdf(*v);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    KsResult { statistic: d, p_value: ks_p_value(d, n) }
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    KsResult { statistic: d, p_value: ks_p_value(d, ne) }
}

pub fn normal_cdf(z: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").cdf(z)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p)
}

/// Two-sided p-value of a standard normal statistic.
pub fn two_sided_p(z: f64) -> f64 {
    if !z.is_finite() {
        return 0.0;
    }
    2.0 * normal_cdf(-z.abs())
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    ChiSquared::new(dof).expect("positive dof").sf(x)
}

/// Ordinary least squares fit `y = a + b x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub residual_sd: f64,
}

pub fn ols(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let residual_sd = if n > 2.0 { (rss / (n - 2.0)).sqrt() } else { 0.0 };
    LinearFit { intercept, slope, slope_se: residual_sd / sxx.sqrt(), residual_sd }
}

/// z-statistic of the difference of two independent estimates.
pub fn difference_z(a: f64, sa: f64, b: f64, sb: f64) -> f64 {
    let s = (sa * sa + sb * sb).sqrt();
    let d = a - b;
    if s > 0.0 {
        d / s
    } else if d == 0.0 {
        0.0
    } else {
        f64::INFINITY * d.signum()
    }
}

/// Empirical CDF evaluated at sorted `grid` points.
pub fn ecdf(data: &[f64], at: &[f64]) -> Vec<f64> {
    let mut x = data.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    at.iter().map(|&t| x.partition_point(|v| *v <= t) as f64 / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kolmogorov_tail_reference_values() {
        // Q(1.3581) = 0.05, Q(1.6276) = 0.01.
        assert_relative_eq!(kolmogorov_q(1.3581), 0.05, epsilon = 2e-4);
        assert_relative_eq!(kolmogorov_q(1.6276), 0.01, epsilon = 1e-4);
        assert_relative_eq!(kolmogorov_q(1.0), 0.26999967, epsilon = 1e-6);
        // The two series agree at the switch point.
        let below = kolmogorov_q(1.18 - 1e-12);
        let above = kolmogorov_q(1.18);
        assert!((below - above).abs() < 1e-10);
    }

    #[test]
    fn ks_two_sample_identical_is_zero() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn ks_two_sample_disjoint_is_one() {
        let a: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let b: Vec<f64> = (100..150).map(|i| i as f64).collect();
        assert_eq!(ks_two_sample(&a, &b).statistic, 1.0);
    }

    #[test]
    fn ks_one_sample_uniform_grid() {
        let a: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let r = ks_one_sample(&a, |x| x.clamp(0.0, 1.0));
        assert!(r.statistic <= 0.0005 + 1e-12);
        assert!(r.p_value > 0.99);
    }

    #[test]
    fn ols_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = ols(&x, &y);
        assert_relative_eq!(f.slope, 2.0, epsilon = 1e-14);
        assert_relative_eq!(f.intercept, 1.0, epsilon = 1e-14);
        assert!(f.slope_se < 1e-12);
    }

    #[test]
    fn ess_of_iid_is_near_n() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..4000).map(|_| rng.gen::<f64>()).collect();
        let ess = effective_sample_size(&x);
        assert!(ess > 3000.0, "ess {ess}");
        // Strongly autocorrelated AR(1) with phi = 0.9 has ESS ~ n/19.
        let mut y = vec![0.0; 4000];
        for i in 1..4000 {
            y[i] = 0.9 * y[i - 1] + rng.gen::<f64>() - 0.5;
        }
        let ess = effective_sample_size(&y);
        assert!(ess < 600.0 && ess > 100.0, "ess {ess}");
    }

    #[test]
    fn cluster_se_single_cluster_falls_back() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(cluster_mean_se(&x, &[0, 0, 0, 0]), mean_se(&x));
    }
}
