use expsumkit::kernel::PowerKernel;
use expsumkit::numcore::{rel_diff, Precision};
use proptest::prelude::*;
use rug::ops::Pow;

fn ctx() -> Precision {
    Precision::new(128).unwrap()
}

fn kernel(eta: f64, a: f64, b: f64) -> PowerKernel {
    let c = ctx();
    PowerKernel::new(c.real(eta), c.real(a), c.real(b)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn f0_matches_f_at_zero_and_quadrature(eta in 0.1f64..4.0, log2_a in -12.0f64..-0.5, b in 0.5f64..4.0) {
        let c = ctx();
        let k = kernel(eta, b * 2f64.powf(log2_a), b);
        let f0 = k.f0(c);
        prop_assert!(rel_diff(&k.f(&c.zero(), c).unwrap(), &f0) <= c.pow2(16 - 128));
        let quad = k.f_derivative_quadrature(0, &c.zero(), c).unwrap();
        prop_assert!(rel_diff(&quad, &f0) <= c.pow2(16 - 128));
    }

    #[test]
    fn closed_form_matches_quadrature(eta in 0.1f64..4.0, log2_a in -10.0f64..-0.5, x in 0.0f64..200.0, n in 0u32..4) {
        let c = ctx();
        let k = kernel(eta, 2f64.powf(log2_a), 1.0);
        let x = c.real(x);
        let closed = k.f_derivative(n, &x, c).unwrap();
        let quad = k.f_derivative_quadrature(n, &x, c).unwrap();
        prop_assert!(rel_diff(&closed, &quad) <= c.pow2(24 - 128));
    }

    #[test]
    fn completely_monotone_signs(eta in 0.1f64..4.0, log2_a in -10.0f64..-0.5, x in 0.0f64..500.0, n in 0u32..6) {
        let c = ctx();
        let k = kernel(eta, 2f64.powf(log2_a), 1.0);
        let d = k.f_derivative(n, &c.real(x), c).unwrap();
        let ok = if n % 2 == 0 { d > 0 } else { d < 0 };
        prop_assert!(ok);
    }

    #[test]
    fn scaling(eta in 0.1f64..4.0, log2_a in -10.0f64..-0.5, b in 0.25f64..8.0, x in 0.0f64..50.0) {
        let c = ctx();
        let k = kernel(eta, b * 2f64.powf(log2_a), b);
        let unit = k.normalized();
        let x = c.real(x);
        let lhs = k.f(&x, c).unwrap();
        let rhs = unit.f(&c.real(&x * b), c).unwrap() * c.real(b).pow(c.real(eta));
        prop_assert!(rel_diff(&lhs, &rhs) <= c.pow2(16 - 128));
    }
}
