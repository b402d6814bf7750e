//! Small shared statistics helpers: means, sample deviations and
//! Student-t confidence intervals for repeated experiment cells.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation (n - 1 denominator).
pub fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    (ss / (n - 1) as f64).sqrt()
}

/// Two-sided Student-t critical value for confidence `level` at `df`
/// degrees of freedom, refined with Newton steps on the CDF so the
/// quantile is accurate well past 1e-9.
pub fn t_critical(level: f64, df: usize) -> f64 {
    assert!(df >= 1, "t_critical needs df >= 1");
    assert!((0.0..1.0).contains(&level));
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("valid t distribution");
    let p = 0.5 + level / 2.0;
    let mut t = dist.inverse_cdf(p);
    for _ in 0..4 {
        let err = dist.cdf(t) - p;
        let pdf = statrs::distribution::Continuous::pdf(&dist, t);
        if pdf <= 0.0 {
            break;
        }
        t -= err / pdf;
    }
    t
}

/// Half-width of the two-sided 95% t-interval for the sample mean.
///
/// Zero for a single observation (degenerate interval; callers flag it).
pub fn ci95_half_width(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    t_critical(0.95, n - 1) * sample_std(xs) / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_critical_matches_published_table_values() {
        // Reference quantiles: R qt(0.975, df).
        let cases = [
            (1, 12.706204736432095),
            (4, 2.7764451051977987),
            (9, 2.2621571627409915),
            (19, 2.093024054408263),
            (99, 1.9842169515086827),
        ];
        for (df, expected) in cases {
            assert!(
                (t_critical(0.95, df) - expected).abs() < 1e-9,
                "df={df}: {} vs {expected}",
                t_critical(0.95, df)
            );
        }
    }

    #[test]
    fn constant_sample_gives_zero_width_interval() {
        let xs = [0.25; 12];
        assert_eq!(ci95_half_width(&xs), 0.0);
        assert_eq!(sample_std(&xs), 0.0);
    }
}
