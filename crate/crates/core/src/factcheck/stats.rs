//! Two-sample Student's t-test with pooled variance.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("each sample needs at least 2 values (got {0} and {1})")]
    Undersized(usize, usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("sample contains a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p_value: f64,
    pub method: &'static str,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Equal-variance independent two-sample t-test.
///
/// Two constant samples with different means give `t = ±inf` and `p = 0`;
/// equal constant samples are an error.
pub fn ttest_independent(a: &[f64], b: &[f64]) -> Result<TTestResult, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::Undersized(a.len(), b.len()));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    if pooled <= 0.0 {
        if ma == mb {
            return Err(StatsError::ZeroVariance);
        }
        let t = if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY };
        return Ok(TTestResult { t, df, p_value: 0.0, method: "student-pooled-variance" });
    }
    let se = libm::sqrt(pooled * (1.0 / na + 1.0 / nb));
    let t = (ma - mb) / se;
    Ok(TTestResult { t, df, p_value: student_t_two_sided_p(t, df), method: "student-pooled-variance" })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(0.5 * df, 0.5, x).clamp(0.0, 1.0)
}

/// `I_x(a, b)` via the continued fraction, using the symmetry relation
/// where it converges faster.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * libm::log(x) + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut cc = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = f64::from(m);
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        cc = 1.0 + aa / cc;
        if cc.abs() < TINY {
            cc = TINY;
        }
        d = 1.0 / d;
        h *= d * cc;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        cc = 1.0 + aa / cc;
        if cc.abs() < TINY {
            cc = TINY;
        }
        d = 1.0 / d;
        let del = d * cc;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, StudentsT};

    #[test]
    fn identical_samples() {
        let r = ttest_independent(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn shifted_samples_hand_value() {
        let r = ttest_independent(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!((r.t + 1.0).abs() < 1e-12);
        assert_eq!(r.df, 8.0);
        assert!((r.p_value - 0.3466).abs() < 1e-3, "{}", r.p_value);
    }

    #[test]
    fn errors() {
        assert_eq!(ttest_independent(&[0.0; 3], &[0.0; 3]), Err(StatsError::ZeroVariance));
        assert_eq!(ttest_independent(&[1.0], &[1.0, 2.0]), Err(StatsError::Undersized(1, 2)));
        assert_eq!(ttest_independent(&[1.0, f64::NAN], &[1.0, 2.0]), Err(StatsError::NonFinite));
    }

    #[test]
    fn separated_constant_samples() {
        let r = ttest_independent(&[0.0; 3], &[1.0; 3]).unwrap();
        assert_eq!((r.t, r.df, r.p_value), (f64::NEG_INFINITY, 4.0, 0.0));
        assert_eq!(ttest_independent(&[1.0; 2], &[0.0; 3]).unwrap().t, f64::INFINITY);
    }

    #[test]
    fn p_value_matches_reference_cdf() {
        for &df in &[1.0, 2.0, 3.0, 8.0, 17.0, 60.0, 400.0] {
            let dist = StudentsT::new(0.0, 1.0, df).unwrap();
            for &t in &[0.01, 0.3, 1.0, 2.2, 4.5, 11.0, -3.0] {
                let reference = 2.0 * (1.0 - dist.cdf(f64::abs(t)));
                let ours = student_t_two_sided_p(t, df);
                assert!((ours - reference).abs() < 1e-6, "df={df} t={t}: {ours} vs {reference}");
            }
        }
    }
}
