//! Small numerical helpers shared across modules.

use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

/// Upper tail `P(X > x)` of a chi-squared variable with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma_ur(df / 2.0, x / 2.0).clamp(0.0, 1.0)
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Pairwise (tree) summation; the order of additions depends only on the
/// length of the slice.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(v) / v.len() as f64
}

/// Sample standard deviation (denominator `n - 1`).
pub fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let sq: Vec<f64> = v.iter().map(|x| (x - m).powi(2)).collect();
    (pairwise_sum(&sq) / (v.len() - 1) as f64).sqrt()
}

/// Quantile of sorted data with linear interpolation between order
/// statistics (position `q (n - 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn quantile(data: &[f64], q: f64) -> f64 {
    let mut s = data.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi2_known_values() {
        // P(chi2_1 > 3.841459) = 0.05, P(chi2_2 > x) = exp(-x/2)
        assert!((chi2_sf(3.841_458_820_694_124, 1.0) - 0.05).abs() < 1e-10);
        for x in [0.1, 1.0, 7.5] {
            assert!((chi2_sf(x, 2.0) - (-x / 2.0f64).exp()).abs() < 1e-13);
        }
        assert_eq!(chi2_sf(0.0, 3.0), 1.0);
    }

    #[test]
    fn quantile_interpolates() {
        let d = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&d, 0.0), 1.0);
        assert_eq!(quantile(&d, 1.0), 4.0);
        assert!((quantile(&d, 0.5) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn pairwise_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        assert!((pairwise_sum(&v) - v.iter().sum::<f64>()).abs() < 1e-10);
        assert!((sd(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
    }
}
