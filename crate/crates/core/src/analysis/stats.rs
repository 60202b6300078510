//! Binomial intervals, log-log slope fits and the seam-defect Poisson fit.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use crate::Error;

pub const Z95: f64 = 1.959_963_984_540_054;

/// Points with fewer failures than this are flagged in slope fits.
pub const MIN_FIT_FAILURES: u64 = 10;

/// Histogram fits need at least this many shots.
pub const MIN_HISTOGRAM_SHOTS: u64 = 1000;

/// Two-sided Wilson score interval at normal quantile `z`.
pub fn wilson_interval(failures: u64, shots: u64, z: f64) -> (f64, f64) {
    if shots == 0 {
        return (0.0, 1.0);
    }
    let n = shots as f64;
    let x = failures as f64;
    let z2 = z * z;
    let denom = n + z2;
    let center = (x + z2 / 2.0) / denom;
    let half = z / denom * (x * (n - x) / n + z2 / 4.0).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LerEstimate {
    pub failures: u64,
    pub shots: u64,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl LerEstimate {
    pub fn new(failures: u64, shots: u64) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(failures, shots, Z95);
        let rate = if shots == 0 { 0.0 } else { failures as f64 / shots as f64 };
        LerEstimate { failures, shots, rate, ci_lo, ci_hi }
    }

    pub fn contains(&self, rate: f64) -> bool {
        self.ci_lo <= rate && rate <= self.ci_hi
    }

    pub fn overlaps(&self, other: &LerEstimate) -> bool {
        self.ci_lo <= other.ci_hi && other.ci_lo <= self.ci_hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub points_used: usize,
    /// Some point used in the fit had fewer than [`MIN_FIT_FAILURES`].
    pub insufficient_failures: bool,
}

/// Weighted least squares of `ln(rate)` on `ln(p)`, each point weighted by
/// the inverse delta-method variance `n r / (1 - r)`. Zero-failure points
/// carry no information on the log scale and are skipped.
pub fn fit_loglog_slope(points: &[(f64, LerEstimate)]) -> Option<SlopeFit> {
    let used: Vec<(f64, f64, f64, u64)> = points
        .iter()
        .filter(|(p, e)| *p > 0.0 && e.failures > 0 && e.failures < e.shots)
        .map(|(p, e)| (p.ln(), e.rate.ln(), e.shots as f64 * e.rate / (1.0 - e.rate), e.failures))
        .collect();
    if used.len() < 2 {
        return None;
    }
    let sw: f64 = used.iter().map(|u| u.2).sum();
    let mx = used.iter().map(|u| u.2 * u.0).sum::<f64>() / sw;
    let my = used.iter().map(|u| u.2 * u.1).sum::<f64>() / sw;
    let sxx: f64 = used.iter().map(|u| u.2 * (u.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = used.iter().map(|u| u.2 * (u.0 - mx) * (u.1 - my)).sum();
    let slope = sxy / sxx;
    Some(SlopeFit {
        slope,
        intercept: my - slope * mx,
        stderr: (1.0 / sxx).sqrt(),
        points_used: used.len(),
        insufficient_failures: used.iter().any(|u| u.3 < MIN_FIT_FAILURES),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectStats {
    /// `histogram[k]` shots carried `k` defects.
    pub histogram: Vec<u64>,
    pub shots: u64,
    pub lambda_hat: f64,
    pub chi2: f64,
    pub dof: u32,
    pub p_value: f64,
}

impl DefectStats {
    pub fn frequency(&self, k: usize) -> f64 {
        self.histogram.get(k).copied().unwrap_or(0) as f64 / self.shots as f64
    }
}

/// Fits a Poisson law to per-shot counts and runs a chi-squared goodness of
/// fit test, pooling tail bins until each expects at least five shots.
pub fn fit_defect_poisson(histogram: &[u64]) -> Result<DefectStats, Error> {
    let shots: u64 = histogram.iter().sum();
    if shots < MIN_HISTOGRAM_SHOTS {
        return Err(Error::InsufficientShots(shots, MIN_HISTOGRAM_SHOTS));
    }
    let n = shots as f64;
    let lambda_hat = histogram.iter().enumerate().map(|(k, &c)| k as f64 * c as f64).sum::<f64>() / n;
    let mut hist = histogram.to_vec();
    while hist.last() == Some(&0) && hist.len() > 1 {
        hist.pop();
    }
    if lambda_hat == 0.0 {
        return Ok(DefectStats { histogram: hist, shots, lambda_hat, chi2: 0.0, dof: 0, p_value: 1.0 });
    }
    let pois = Poisson::new(lambda_hat).expect("positive mean");

    // Bins [lo, hi); the last one is open-ended.
    let kmax = hist.len().max((lambda_hat * 3.0 + 10.0) as usize);
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut obs = 0.0;
    let mut exp = 0.0;
    for k in 0..kmax {
        obs += hist.get(k).copied().unwrap_or(0) as f64;
        exp += n * pois.pmf(k as u64);
        if exp >= 5.0 {
            bins.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    let tail_obs: f64 = obs + hist.iter().skip(kmax).sum::<u64>() as f64;
    let assigned: f64 = bins.iter().map(|b| b.1).sum();
    let tail_exp = n - assigned;
    if tail_exp >= 5.0 || bins.is_empty() {
        bins.push((tail_obs, tail_exp));
    } else {
        let last = bins.last_mut().expect("non-empty");
        last.0 += tail_obs;
        last.1 += tail_exp;
    }
    let chi2: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len().saturating_sub(2) as u32;
    let p_value = if dof == 0 { 1.0 } else { 1.0 - ChiSquared::new(dof as f64).expect("dof > 0").cdf(chi2) };
    Ok(DefectStats { histogram: hist, shots, lambda_hat, chi2, dof, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::Distribution;

    #[test]
    fn wilson_zero_failures() {
        let (lo, hi) = wilson_interval(0, 1_000_000, Z95);
        assert_eq!(lo, 0.0);
        let want = Z95 * Z95 / (1e6 + Z95 * Z95);
        assert!((hi - want).abs() < 1e-12);
        assert!((hi - 3.84e-6).abs() < 0.01e-6);
    }

    #[test]
    fn wilson_reference_values() {
        // 10 of 100 at 95%: [0.0552, 0.1744].
        let (lo, hi) = wilson_interval(10, 100, Z95);
        assert!((lo - 0.05522914).abs() < 1e-6, "{lo}");
        assert!((hi - 0.17436566).abs() < 1e-6, "{hi}");
    }

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, LerEstimate)> = [0.01, 0.02, 0.04]
            .iter()
            .map(|&p| {
                let shots = 1u64 << 40;
                let rate = 3.0 * p * p;
                (p, LerEstimate::new((rate * shots as f64) as u64, shots))
            })
            .collect();
        let fit = fit_loglog_slope(&pts).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-6, "{fit:?}");
        assert!(!fit.insufficient_failures);
    }

    #[test]
    fn slope_skips_zero_and_flags_few() {
        let pts = vec![
            (0.01, LerEstimate::new(0, 1000)),
            (0.02, LerEstimate::new(5, 1000)),
            (0.04, LerEstimate::new(40, 1000)),
        ];
        let fit = fit_loglog_slope(&pts).unwrap();
        assert_eq!(fit.points_used, 2);
        assert!(fit.insufficient_failures);
        assert!(fit_loglog_slope(&pts[..2]).is_none());
    }

    #[test]
    fn poisson_fit_needs_shots() {
        assert!(matches!(fit_defect_poisson(&[10, 5]), Err(Error::InsufficientShots(15, _))));
    }

    #[test]
    fn poisson_fit_recovers_synthetic_mean() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for lambda in [0.3, 2.0, 7.5] {
            let pois = rand_distr::Poisson::new(lambda).unwrap();
            let mut hist = vec![0u64; 64];
            let shots = 20_000;
            for _ in 0..shots {
                let k = pois.sample(&mut rng) as usize;
                hist[k.min(63)] += 1;
            }
            let st = fit_defect_poisson(&hist).unwrap();
            let se = (lambda / shots as f64).sqrt();
            assert!((st.lambda_hat - lambda).abs() < 4.0 * se, "{lambda}: {st:?}");
            assert!(st.p_value > 0.001, "{lambda}: {st:?}");
        }
    }

    #[test]
    fn poisson_fit_rejects_overdispersion() {
        // Half the shots at mean 1, half at mean 6.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut hist = vec![0u64; 64];
        for i in 0..20_000 {
            let lam = if i % 2 == 0 { 1.0 } else { 6.0 };
            let k = rand_distr::Poisson::new(lam).unwrap().sample(&mut rng) as usize;
            hist[k] += 1;
        }
        assert!(fit_defect_poisson(&hist).unwrap().p_value < 1e-6);
    }

    proptest! {
        #[test]
        fn wilson_brackets_rate(x in 0u64..1000, extra in 0u64..1000) {
            let n = x + extra + 1;
            let (lo, hi) = wilson_interval(x, n, Z95);
            let r = x as f64 / n as f64;
            prop_assert!(lo <= r + 1e-12 && r <= hi + 1e-12);
            prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        }
    }
}
