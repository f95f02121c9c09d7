use expsumkit::numcore::{rel_diff, Precision};
use expsumkit::transform::{Transform, TransformKind};
use proptest::prelude::*;

fn ctx() -> Precision {
    Precision::new(128).unwrap()
}

fn rho(kind: TransformKind, r: f64) -> rug::Float {
    let c = ctx();
    Transform::new(kind, &c.real(r), c).unwrap().rho_hat()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn r01_and_p1_share_rho_hat(log2_r in -30.0f64..-0.01) {
        let r = 2f64.powf(log2_r);
        prop_assert!(rel_diff(&rho(TransformKind::R01, r), &rho(TransformKind::P1, r)) <= ctx().pow2(-120));
    }

    #[test]
    fn rho_hat_ordering(k in 1i32..=20) {
        let r = 2f64.powi(-k);
        let [phi, exp, p2, p1] = [TransformKind::Phi, TransformKind::Exp, TransformKind::P2, TransformKind::P1]
            .map(|kind| rho(kind, r));
        prop_assert!(phi > exp && exp > p2 && p2 > p1);
    }

    #[test]
    fn landen_squares_rho_hat(log2_r in -30.0f64..-0.05) {
        let c = ctx();
        let r = c.real(2f64.powf(log2_r));
        let landen = c.real(r.sqrt_ref()) * 2u32 / (c.one() + &r);
        let big = Transform::new(TransformKind::Phi, &landen, c).unwrap().rho_hat();
        let small = Transform::new(TransformKind::Phi, &r, c).unwrap().rho_hat();
        prop_assert!(rel_diff(&big, &c.real(small.square_ref())) <= c.pow2(10 - 128));
    }

    #[test]
    fn phi_over_p1_between_one_and_two(log2_r in -30.0f64..-0.05, step in 0.01f64..0.5) {
        let ratio = |r: f64| (rho(TransformKind::Phi, r) / rho(TransformKind::P1, r)).to_f64();
        let (r1, r2) = (2f64.powf(log2_r), 2f64.powf((log2_r + step).min(-0.01)));
        let (q1, q2) = (ratio(r1), ratio(r2));
        prop_assert!(1.0 < q1 && q1 < 2.0 && 1.0 < q2 && q2 < 2.0);
        prop_assert!(r1 >= r2 || q1 < q2);
    }

    #[test]
    fn derivative_matches_difference(kind_ix in 0usize..5, log2_r in -20.0f64..-0.05, u in -0.99f64..0.99) {
        let c = ctx();
        let t = Transform::new(TransformKind::ALL[kind_ix], &c.real(2f64.powf(log2_r)), c).unwrap();
        let h = c.pow2(-40);
        let u = c.real(u);
        let fd = (t.eval(&c.real(&u + &h)).unwrap() - t.eval(&c.real(&u - &h)).unwrap()) / c.real(&h * 2u32);
        prop_assert!(rel_diff(&fd, &t.deriv(&u).unwrap()) < c.pow2(-60));
    }

    #[test]
    fn inverse_round_trip(kind_ix in 0usize..5, log2_r in -20.0f64..-0.05, u in -1.0f64..1.0) {
        let c = ctx();
        let t = Transform::new(TransformKind::ALL[kind_ix], &c.real(2f64.powf(log2_r)), c).unwrap();
        let u = c.real(u);
        let back = t.inverse(&t.eval(&u).unwrap()).unwrap();
        prop_assert!(c.real(back - &u).abs() < c.pow2(-90));
    }
}
