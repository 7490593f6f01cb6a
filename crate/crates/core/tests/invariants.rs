use proptest::prelude::*;

use dampwave::expr::Expr;
use dampwave::problem::{Alpha, BoundaryCondition};
use dampwave::quad::{exp_weight, integrate, invert_monotone, plain};
use dampwave::reduction::{reduce_trace, simpson_uniform};
use dampwave::sim::{detect_sign_changes, SimulationTrace, TraceScheme};

fn poly(c: [f64; 4]) -> impl Fn(f64) -> f64 {
    move |t| c[0] + t * (c[1] + t * (c[2] + t * c[3]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sign_changes_ignore_positive_scaling(
        freq in 0.3f64..4.0,
        phase in 0.0f64..6.0,
        scale in 1e-3f64..1e3,
    ) {
        let t: Vec<f64> = (0..=2000).map(|i| i as f64 * 5e-3).collect();
        let v: Vec<f64> = t.iter().map(|t| (freq * t + phase).sin()).collect();
        let scaled: Vec<f64> = v.iter().map(|x| x * scale).collect();
        let a = detect_sign_changes(&t, &v, 0.0);
        let b = detect_sign_changes(&t, &scaled, 0.0);
        prop_assert_eq!(a.count, b.count);
        for (x, y) in a.crossings.iter().zip(&b.crossings) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn integral_is_additive(c in prop::array::uniform4(-3.0f64..3.0), a in -2.0f64..0.0, m in 0.0f64..1.0, b in 1.0f64..3.0) {
        let f = plain(|t: f64| (c[0] * t).sin() + c[1] * t * t + c[2] * (c[3] * t).cos());
        let whole = integrate(&f, a, b, 1e-11).unwrap().value;
        let left = integrate(&f, a, m, 1e-11).unwrap().value;
        let right = integrate(&f, m, b, 1e-11).unwrap().value;
        prop_assert!((whole - left - right).abs() <= 1e-9 * (1.0 + whole.abs()));
    }

    #[test]
    fn integral_is_linear(c in prop::array::uniform4(-3.0f64..3.0), k in -5.0f64..5.0) {
        let f = poly(c);
        let g = |t: f64| (t * c[3]).exp();
        let lhs = integrate(&plain(|t: f64| k * f(t) + g(t)), 0.0, 2.0, 1e-12).unwrap().value;
        let rf = integrate(&plain(&f), 0.0, 2.0, 1e-12).unwrap().value;
        let rg = integrate(&plain(g), 0.0, 2.0, 1e-12).unwrap().value;
        prop_assert!((lhs - (k * rf + rg)).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn invert_monotone_round_trips(a in 0.1f64..3.0, b in -2.0f64..2.0, x in 1.0f64..20.0) {
        let m = Expr::parse(&format!("{a}*t + {b} + t^3/100")).unwrap();
        let y = m.at(x).unwrap();
        let back = invert_monotone(&m, y, (0.5, 25.0)).unwrap();
        prop_assert!((back - x).abs() <= 1e-8 * (1.0 + x));
    }

    #[test]
    fn exp_weight_is_positive_and_nonincreasing(c in 0.0f64..3.0, d in 0.0f64..2.0) {
        let w = exp_weight(plain(move |t: f64| c / t + d * (t.sin()).powi(2)), 1.0).unwrap();
        let mut prev = 1.0;
        for i in 0..40 {
            let t = 1.0 + 0.5 * i as f64;
            let v = dampwave::quad::Integrand::eval(&w, t).unwrap();
            prop_assert!(v > 0.0);
            prop_assert!(v <= prev * (1.0 + 1e-12));
            prev = v;
        }
    }

    #[test]
    fn simpson_exact_on_cubics(c in prop::array::uniform4(-3.0f64..3.0), n in 3usize..40) {
        let f = poly(c);
        let dx = 2.0 / (n - 1) as f64;
        let y: Vec<f64> = (0..n).map(|i| f(i as f64 * dx)).collect();
        let exact = 2.0 * c[0] + 2.0 * c[1] + 8.0 / 3.0 * c[2] + 4.0 * c[3];
        prop_assert!((simpson_uniform(&y, dx) - exact).abs() <= 1e-11 * (1.0 + exact.abs()));
    }

    #[test]
    fn reduction_of_positive_fields_is_positive(
        amp in 0.0f64..0.9,
        k in 0.5f64..4.0,
        dirichlet in any::<bool>(),
    ) {
        let nx = 33;
        let pi = std::f64::consts::PI;
        let x: Vec<f64> = (0..nx).map(|i| pi * i as f64 / (nx - 1) as f64).collect();
        let t: Vec<f64> = (0..20).map(|j| 1.0 + 0.05 * j as f64).collect();
        let u = t
            .iter()
            .map(|&t| x.iter().map(|&x| 1.0 + amp * (k * x + t).sin()).collect())
            .collect();
        let trace = SimulationTrace { x, t, u, scheme: TraceScheme::default() };
        let bc = if dirichlet {
            BoundaryCondition::Dirichlet
        } else {
            BoundaryCondition::Robin { psi: Expr::parse("1").unwrap() }
        };
        let v = reduce_trace(&trace, Alpha::integer(3).unwrap(), &bc).unwrap();
        prop_assert!(v.v.iter().all(|&v| v > 0.0));
    }
}
