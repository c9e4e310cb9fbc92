//! One-sample Kolmogorov-Smirnov test against an analytic CDF, for the
//! equivariance checks on trajectory ensembles.

/// Result of a one-sample KS test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    /// Maximum absolute ECDF deviation.
    pub statistic: f64,
    /// Asymptotic p-value with the small-sample correction of Stephens
    /// (effective argument `(sqrt(n) + 0.12 + 0.11/sqrt(n)) D`).
    pub p_value: f64,
    pub n: usize,
}

/// Complement of the Kolmogorov distribution,
/// `Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test of `samples` against the reference CDF.
pub fn ks_test(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    assert!(!samples.is_empty(), "KS test needs at least one sample");
    samples.sort_by(|a, b| a.partial_cmp(b).expect("NaN in KS sample"));
    let n = samples.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / nf).abs());
        d = d.max(((i + 1) as f64 / nf - f).abs());
    }
    let sqrt_n = nf.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn kolmogorov_q_reference_points() {
        // Reference values from the standard series.
        assert!((kolmogorov_q(0.0) - 1.0).abs() < 1e-12);
        assert!((kolmogorov_q(1.0) - 0.26999967167).abs() < 1e-8);
        assert!((kolmogorov_q(2.0) - 6.7092525578e-4).abs() < 1e-10);
        assert!(kolmogorov_q(100.0) < 1e-300);
    }

    #[test]
    fn uniform_samples_pass_against_uniform_cdf() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut samples: Vec<f64> = (0..5000).map(|_| rng.gen::<f64>()).collect();
        let res = ks_test(&mut samples, |x| x.clamp(0.0, 1.0));
        assert!(res.p_value > 1e-3, "p = {}", res.p_value);
    }

    #[test]
    fn shifted_samples_fail() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut samples: Vec<f64> = (0..5000).map(|_| rng.gen::<f64>() * 0.9).collect();
        let res = ks_test(&mut samples, |x| x.clamp(0.0, 1.0));
        assert!(res.p_value < 1e-6, "p = {}", res.p_value);
    }
}
