mod common;

use common::{f64s, fixture};
use finnews_core::factcheck::{student_t_two_sided_p, ttest_independent};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[test]
fn matches_reference_values() {
    for case in fixture("stats.json")["ttests"].as_array().unwrap() {
        let (a, b) = (f64s(&case["a"]), f64s(&case["b"]));
        let r = ttest_independent(&a, &b).unwrap();
        assert!((r.t - case["t"].as_f64().unwrap()).abs() <= 1e-9 * r.t.abs().max(1.0), "{case}");
        assert_eq!(r.df, case["df"].as_f64().unwrap());
        assert!((r.p_value - case["p"].as_f64().unwrap()).abs() <= 1e-6, "{case}");
    }
}

#[test]
fn hand_case() {
    let r = ttest_independent(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    assert!((r.t + 1.0).abs() < 1e-12);
    assert_eq!(r.df, 8.0);
    assert!((r.p_value - 0.3466).abs() < 1e-3);
    let same = ttest_independent(&[0.8, 0.9, 0.7], &[0.8, 0.9, 0.7]).unwrap();
    assert_eq!(same.p_value, 1.0);
}

#[test]
fn p_values_agree_with_an_independent_cdf() {
    for df in [1.0, 2.0, 3.5, 8.0, 30.0, 200.0] {
        let dist = StudentsT::new(0.0, 1.0, df).unwrap();
        for t in [-6.0, -2.5, -1.0, -0.1, 0.3, 1.7, 4.0] {
            let want = 2.0 * (1.0 - dist.cdf(f64::abs(t)));
            let got = student_t_two_sided_p(t, df);
            assert!((got - want).abs() <= 1e-6, "t {t} df {df}: {got} vs {want}");
            assert!((0.0..=1.0).contains(&got));
        }
    }
}
