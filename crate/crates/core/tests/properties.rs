use std::f64::consts::PI;

use cytorus::cli::expr::Expr;
use cytorus::cy_pipeline::wp;
use cytorus::lie_frame::{Form, LieModel};
use cytorus::torus_field::io::{read_csv, write_csv};
use cytorus::torus_field::{Axis, Scheme, TorusField};
use cytorus::verifier::check_volume;
use proptest::prelude::*;

const PAIRS: [[usize; 2]; 6] = [[1, 2], [1, 3], [1, 4], [2, 3], [2, 4], [3, 4]];

fn models() -> [LieModel; 4] {
    [LieModel::nil3xr(), LieModel::nil4(), LieModel::nil4_scaled(0.37), LieModel::sol3xr()]
}

fn trig_field(n: usize, modes: &[(i32, i32, f64, f64)]) -> TorusField {
    TorusField::from_fn(n, n, Scheme::Spectral, |x, y| {
        modes.iter().map(|(k1, k2, a, ph)| a * (2.0 * PI * (*k1 as f64 * x + *k2 as f64 * y) + ph).cos()).sum()
    })
}

fn modes() -> impl Strategy<Value = Vec<(i32, i32, f64, f64)>> {
    prop::collection::vec((-4i32..=4, -4i32..=4, -1.0f64..1.0, 0.0f64..6.3), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn wp_nonnegative_on_symmetric(a in -1e3f64..1e3, b in -1e3f64..1e3, c in -1e3f64..1e3) {
        let v = wp([[a, c], [c, b]]);
        prop_assert!(v >= 0.0);
    }

    #[test]
    fn d_squared_vanishes_on_constant_forms(c1 in prop::array::uniform4(-2.0f64..2.0), c2 in prop::array::uniform6(-2.0f64..2.0)) {
        let one = Form::covector(&c1);
        let mut two = Form::zero(2);
        for (v, p) in c2.iter().zip(PAIRS) {
            two = two.add(&Form::monomial(&p).scale(*v));
        }
        for m in models() {
            prop_assert!(one.d(&m).unwrap().d(&m).unwrap().max_abs() <= 1e-14);
            prop_assert!(two.d(&m).unwrap().d(&m).unwrap().max_abs() <= 1e-14);
        }
    }

    #[test]
    fn wedge_of_one_forms_anticommutes(a in prop::array::uniform4(-2.0f64..2.0), b in prop::array::uniform4(-2.0f64..2.0)) {
        let (x, y) = (Form::covector(&a), Form::covector(&b));
        prop_assert!(x.wedge(&y).add(&y.wedge(&x)).max_abs() <= 1e-15);
        prop_assert!(x.wedge(&x).max_abs() == 0.0);
    }

    #[test]
    fn leibniz_rule(a in prop::array::uniform4(-2.0f64..2.0), b in prop::array::uniform4(-2.0f64..2.0)) {
        let (x, y) = (Form::covector(&a), Form::covector(&b));
        for m in models() {
            let lhs = x.wedge(&y).d(&m).unwrap();
            let rhs = x.d(&m).unwrap().wedge(&y).sub(&x.wedge(&y.d(&m).unwrap()));
            prop_assert!(lhs.sub(&rhs).max_abs() <= 1e-14);
        }
    }

    #[test]
    fn derivatives_integrate_to_zero(ms in modes()) {
        let f = trig_field(16, &ms);
        for axis in [Axis::One, Axis::Two] {
            for order in 1..=2u8 {
                prop_assert!(f.derivative(axis, order).integrate().abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn laplacian_inverts_poisson(ms in modes()) {
        let q = trig_field(16, &ms).remove_mean();
        let phi = q.poisson_solve().unwrap();
        prop_assert!((&phi.laplacian() - &q).max_abs() <= 1e-10 * (1.0 + q.max_abs()));
    }

    #[test]
    fn csv_round_trip_is_bit_exact(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 32)) {
        let f = TorusField::from_values(4, 8, Scheme::Fd4, values).unwrap();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        let g = read_csv(buf.as_slice(), Scheme::Fd4).unwrap();
        prop_assert_eq!(f.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), g.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn normalization_hits_target(ms in modes(), target in 0.1f64..5.0) {
        let (g, _) = trig_field(16, &ms).normalize_rhs(target);
        prop_assert!((g.exp().integrate() - target).abs() <= 1e-12 * target);
    }

    #[test]
    fn integer_maps_preserve_integral(ms in modes(), k in -3i64..=3) {
        let f = trig_field(16, &ms);
        let g = f.compose_integer_map([[1, k], [0, 1]]);
        prop_assert!((f.integrate() - g.integrate()).abs() <= 1e-12);
    }

    #[test]
    fn scaled_form_meets_constant_volume(c in -2.0f64..2.0, s in prop::array::uniform6(-1.0f64..1.0)) {
        let mut omega = Form::monomial(&[1, 4]).add(&Form::monomial(&[2, 3]));
        for (v, p) in s.iter().zip(PAIRS) {
            omega = omega.add(&Form::monomial(&p).scale(0.1 * v));
        }
        let f = TorusField::constant(4, 4, Scheme::Spectral, c);
        let r = check_volume(&omega.scale((c / 2.0).exp()), &omega, &f);
        prop_assert!(r.value("relative volume error") <= 1e-14);
    }

    #[test]
    fn number_literals_round_trip(v in 0.0f64..1e6) {
        prop_assert_eq!(Expr::parse(&format!("{v:?}")).unwrap().eval(0.0, 0.0), v);
    }

    #[test]
    fn printed_expressions_reparse(a in -3.0f64..3.0, b in -3.0f64..3.0, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let src = format!("{a:?}*sin(2*pi*x)*exp(-y/{b:?}) - cos(x*y)/(2+{a:?}*{a:?})");
        let e = Expr::parse(&src).unwrap();
        let again = Expr::parse(&e.to_string()).unwrap();
        let (u, v) = (e.eval(x, y), again.eval(x, y));
        prop_assert!(u == v || (u.is_nan() && v.is_nan()));
    }
}
