use ddform::analysis::{corollary_criterion, leading_term_at, matrix_inequality_check, ClassifyOptions};
use ddform::coeff::CoefficientField;
use ddform::linalg;
use ddform::meshmeans::SphereRule;
use ddform::modulus::ModulusOmega;
use ddform::potential::{gamma, sphere_mean_gamma};
use ddform::scalar::cx;
use proptest::prelude::*;

fn log_modulus() -> impl Strategy<Value = ModulusOmega<f64>> {
    (0.01f64..0.3, 0.6f64..2.0).prop_map(|(k, s)| ModulusOmega::log(k, s, 0.2).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dini_integral_is_additive(m in log_modulus(), a in -12.0f64..-0.1, frac in 0.05f64..0.95) {
        let (lo, hi) = (a.exp(), 1.0);
        let mid = (a * frac).exp();
        let whole = m.dini_integral(lo, hi).unwrap();
        let parts = m.dini_integral(lo, mid).unwrap() + m.dini_integral(mid, hi).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-10 * whole.max(1e-12));
        prop_assert!(whole >= 0.0);
    }

    #[test]
    fn log_integral_is_monotone(m in log_modulus(), a in -20.0f64..-0.01, b in -20.0f64..-0.01) {
        let (r1, r2) = (a.min(b).exp(), a.max(b).exp());
        prop_assert!(m.log_integral(r1) >= m.log_integral(r2));
        prop_assert_eq!(m.log_integral(1.0), 0.0);
    }

    #[test]
    fn sphere_mean_of_gamma_is_symmetric(a in -8.0f64..3.0, b in -8.0f64..3.0) {
        let (rx, ry) = (a.exp(), b.exp());
        let m1 = sphere_mean_gamma(rx, ry, 3).unwrap();
        let m2 = sphere_mean_gamma(ry, rx, 3).unwrap();
        prop_assert_eq!(m1, m2);
        prop_assert!(m1 <= gamma(rx, 3).unwrap() * (1.0 + 1e-15));
    }

    #[test]
    fn symmetric_matrices_satisfy_the_trace_inequality(
        e in proptest::array::uniform6(-10.0f64..10.0),
        d in proptest::collection::vec(proptest::array::uniform3(-1.0f64..1.0), 1..20),
    ) {
        let m = [[e[0], e[1], e[2]], [e[1], e[3], e[4]], [e[2], e[4], e[5]]];
        let dirs: Vec<[f64; 3]> = d.into_iter().filter(|v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6).collect();
        prop_assert!(matrix_inequality_check(&m, &dirs).unwrap());
    }

    #[test]
    fn spectral_norm_bounds_entries(e in proptest::array::uniform6(-5.0f64..5.0)) {
        let m = [[e[0], e[1], e[2]], [e[1], e[3], e[4]], [e[2], e[4], e[5]]].map(|row| row.map(cx));
        let n = linalg::spectral_norm(&m);
        for row in &m {
            for v in row {
                prop_assert!(v.norm() <= n * (1.0 + 1e-12) + 1e-12);
            }
        }
    }
}

#[test]
fn criterion_and_leading_term_agree_on_real_families() {
    let rule = SphereRule::gauss_product(16);
    let r_set: Vec<f64> = (1..=10).map(|k| 10f64.powf(-0.8 * k as f64)).collect();
    for a in [
        CoefficientField::k_family(0.1, 0.75, 0.2).unwrap(),
        CoefficientField::k_family(-0.07, 1.2, 0.2).unwrap(),
        CoefficientField::g_family(0.1, 0.75, 0.2).unwrap(),
    ] {
        let rep = corollary_criterion(&a, &r_set, &rule, ClassifyOptions::default()).unwrap();
        let area = 4.0 * std::f64::consts::PI;
        for row in &rep.rows {
            let l = leading_term_at(&a, row.r, &rule).unwrap().norm();
            let want = (-row.criterion / area).exp();
            assert!((l - want).abs() <= 1e-9 * want, "{}: {l} vs {want} at r = {}", a.label(), row.r);
        }
    }
}

#[test]
fn criterion_table_extends_under_nesting() {
    let rule = SphereRule::gauss_product(16);
    let a = CoefficientField::k_family(0.1, 0.75, 0.2).unwrap();
    let coarse = corollary_criterion(&a, &[1e-2, 1e-4], &rule, ClassifyOptions::default()).unwrap();
    let fine = corollary_criterion(&a, &[1e-1, 1e-2, 1e-3, 1e-4], &rule, ClassifyOptions::default()).unwrap();
    assert!((coarse.rows[0].criterion - fine.rows[1].criterion).abs() < 1e-10);
    assert!((coarse.rows[1].criterion - fine.rows[3].criterion).abs() < 1e-10);
    // positive density: the value at a smaller radius extends the integral
    assert!(fine.rows.windows(2).all(|w| w[1].criterion > w[0].criterion));
}
