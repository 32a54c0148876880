//! Batch statistics: the time/stall fitness measure and the one-tailed
//! Welch t-test used to compare each baseline against the idiotypic system.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// One-tailed unequal-variance (Welch) t-test of mean(a) < mean(b).
/// Returns the confidence level in percent: 50 for indistinguishable
/// samples, approaching 100 as the evidence for mean(a) < mean(b) grows.
pub fn welch_one_tailed_level(a: &[f64], b: &[f64]) -> f64 {
    assert!(a.len() >= 2 && b.len() >= 2, "need at least two samples each");
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (variance(a), variance(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se2 = va / na + vb / nb;
    if se2 <= 0.0 {
        // Both samples constant.
        return if ma == mb {
            50.0
        } else if ma < mb {
            100.0
        } else {
            0.0
        };
    }
    let t = (mb - ma) / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid dof");
    dist.cdf(t) * 100.0
}

/// Ratio of mean task time to mean stall count over a batch of runs.
/// None when no stall was ever recorded.
pub fn time_to_stall_ratio(times: &[f64], stalls: &[f64]) -> Option<f64> {
    let sigma = mean(stalls);
    if sigma <= 0.0 {
        None
    } else {
        Some(mean(times) / sigma)
    }
}

/// Fitness F = (T + phi * sigma) / 2; lower is better.
pub fn fitness(time: f64, stalls: f64, phi: f64) -> f64 {
    (time + phi * stalls) / 2.0
}
