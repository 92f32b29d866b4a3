use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
    pub significant: bool,
    /// Zero variance with a nonzero mean difference.
    pub degenerate: bool,
}

/// Two-sided paired t-test on `a - b`. With `test_train_ratio = Some(r)`
/// the variance is scaled by `1/n + r` (corrected resampled test);
/// `None` gives the plain paired test.
pub fn paired_ttest(
    a: &[f64],
    b: &[f64],
    alpha: f64,
    test_train_ratio: Option<f64>,
) -> Result<TTest, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::Length {
            truth: a.len(),
            pred: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(EvalError::TooFewPairs(n));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let df = nf - 1.0;
    let factor = 1.0 / nf + test_train_ratio.unwrap_or(0.0);
    if var == 0.0 {
        if mean == 0.0 {
            return Ok(TTest {
                t: 0.0,
                p: 1.0,
                df,
                significant: false,
                degenerate: false,
            });
        }
        return Ok(TTest {
            t: mean.signum() * f64::INFINITY,
            p: 0.0,
            df,
            significant: 0.0 < alpha,
            degenerate: true,
        });
    }
    let t = mean / (factor * var).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TTest {
        t,
        p,
        df,
        significant: p < alpha,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: [f64; 10] = [0.91, 0.93, 0.90, 0.94, 0.92, 0.95, 0.89, 0.93, 0.92, 0.94];
    const B: [f64; 10] = [0.88, 0.90, 0.91, 0.90, 0.89, 0.92, 0.88, 0.90, 0.91, 0.90];

    #[test]
    fn corrected_and_plain_match_reference() {
        let c = paired_ttest(&A, &B, 0.05, Some(1.0 / 9.0)).unwrap();
        assert!((c.t - 3.3109524332188167).abs() < 1e-9);
        assert!((c.p - 0.00907013268500546).abs() < 1e-9);
        let p = paired_ttest(&A, &B, 0.05, None).unwrap();
        assert!((p.t - 4.810702354423642).abs() < 1e-9);
        assert!((p.p - 0.0009593102991236726).abs() < 1e-9);
    }

    #[test]
    fn identical_samples_and_zero_alpha() {
        let r = paired_ttest(&A, &A, 0.05, Some(1.0 / 9.0)).unwrap();
        assert_eq!((r.t, r.significant), (0.0, false));
        let r = paired_ttest(&A, &B, 0.0, Some(1.0 / 9.0)).unwrap();
        assert!(!r.significant);
        let r = paired_ttest(&[1.5, 2.5, 3.5], &[1.0, 2.0, 3.0], 0.05, Some(1.0 / 9.0)).unwrap();
        assert!(r.degenerate && r.significant);
        assert!(paired_ttest(&A[..1], &B[..1], 0.05, None).is_err());
    }
}
