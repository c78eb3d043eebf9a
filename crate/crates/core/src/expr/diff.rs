use super::{BinOp, Expr, Func, Node};

pub(super) fn derivative(e: &Expr, var: usize) -> Expr {
    match e.node() {
        Node::Const(_) => Expr::zero(),
        Node::Var(i) => {
            if *i == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Neg(a) => Expr::neg(derivative(a, var)),
        Node::Func(f, a) => {
            let da = derivative(a, var);
            if da.is_zero() {
                return Expr::zero();
            }
            let outer = match f {
                Func::Exp => e.clone(),
                Func::Log => Expr::div(Expr::one(), a.clone()),
                Func::Sin => Expr::func(Func::Cos, a.clone()),
                Func::Cos => Expr::neg(Expr::func(Func::Sin, a.clone())),
                Func::Sqrt => Expr::div(Expr::one(), Expr::scale(2.0, e.clone())),
                Func::Abs => Expr::func(Func::Sign, a.clone()),
                Func::Sign => Expr::zero(),
            };
            Expr::mul(outer, da)
        }
        Node::Binary(op, a, b) => {
            let da = derivative(a, var);
            let db = derivative(b, var);
            match op {
                BinOp::Add => Expr::add(da, db),
                BinOp::Sub => Expr::sub(da, db),
                BinOp::Mul => Expr::add(Expr::mul(da, b.clone()), Expr::mul(a.clone(), db)),
                BinOp::Div => {
                    if db.is_zero() {
                        Expr::div(da, b.clone())
                    } else {
                        Expr::div(
                            Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a.clone(), db)),
                            Expr::pow(b.clone(), Expr::constant(2.0)),
                        )
                    }
                }
                BinOp::Pow => {
                    if db.is_zero() && b.is_constant() {
                        // b * a^(b-1) * a'
                        let reduced = Expr::pow(a.clone(), Expr::sub(b.clone(), Expr::one()));
                        Expr::mul(Expr::mul(b.clone(), reduced), da)
                    } else {
                        // a^b * (b' log a + b a'/a)
                        let log_term = Expr::mul(db, Expr::func(Func::Log, a.clone()));
                        let ratio_term = Expr::div(Expr::mul(b.clone(), da), a.clone());
                        Expr::mul(e.clone(), Expr::add(log_term, ratio_term))
                    }
                }
                BinOp::Min | BinOp::Max => {
                    // sign(a - b) selects the active branch; ties average.
                    let s = Expr::func(Func::Sign, Expr::sub(a.clone(), b.clone()));
                    let (wa, wb) = if *op == BinOp::Max {
                        (Expr::add(Expr::one(), s.clone()), Expr::sub(Expr::one(), s))
                    } else {
                        (Expr::sub(Expr::one(), s.clone()), Expr::add(Expr::one(), s))
                    };
                    let half = |w: Expr, d: Expr| Expr::mul(Expr::scale(0.5, w), d);
                    Expr::add(half(wa, da), half(wb, db))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;
    use proptest::prelude::*;

    fn central_fd(e: &crate::expr::Expr, i: usize, p: &[f64], h: f64) -> f64 {
        let mut plus = p.to_vec();
        let mut minus = p.to_vec();
        plus[i] += h;
        minus[i] -= h;
        (e.eval(&plus) - e.eval(&minus)) / (2.0 * h)
    }

    #[test]
    fn simple_derivatives() {
        let e = parse("x^2", 1).unwrap();
        assert_eq!(e.diff(0), parse("2*x", 1).unwrap());
        assert!(parse("exp(-y)", 2).unwrap().diff(0).is_zero());
    }

    #[test]
    fn sin_exp_matches_finite_difference() {
        let e = parse("sin(x)*exp(y)", 2).unwrap();
        let points = [
            [0.1, -0.3],
            [1.2, 0.4],
            [-2.0, 1.1],
            [0.7, -1.9],
            [3.0, 0.0],
            [-0.5, 0.25],
            [2.2, -0.8],
            [-1.4, 1.6],
            [0.05, 2.0],
            [1.9, -1.2],
        ];
        for p in points {
            for i in 0..2 {
                let exact = e.diff(i).eval(&p);
                let fd = central_fd(&e, i, &p, 1e-5);
                assert!(
                    (exact - fd).abs() <= 1e-6 * exact.abs().max(1.0),
                    "{p:?} var {i}: {exact} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn abs_derivative_is_sign_with_zero_at_origin() {
        let d = parse("abs(x)", 1).unwrap().diff(0);
        assert_eq!(d.eval(&[0.0]), 0.0);
        assert_eq!(d.eval(&[-2.0]), -1.0);
    }

    #[test]
    fn min_max_derivatives() {
        let e = parse("max(x, y^2)", 2).unwrap();
        assert_eq!(e.diff(0).eval(&[2.0, 1.0]), 1.0);
        assert_eq!(e.diff(1).eval(&[2.0, 1.0]), 0.0);
        assert_eq!(e.diff(1).eval(&[0.0, 3.0]), 6.0);
        let m = parse("min(x, y)", 2).unwrap();
        assert_eq!(m.diff(0).eval(&[1.0, 2.0]), 1.0);
        assert_eq!(m.diff(1).eval(&[1.0, 2.0]), 0.0);
    }

    #[test]
    fn variable_exponent() {
        let e = parse("x^y", 2).unwrap();
        let p = [1.7, 0.6];
        assert!((e.diff(1).eval(&p) - p[0].powf(p[1]) * p[0].ln()).abs() < 1e-14);
        assert!((e.diff(0).eval(&p) - p[1] * p[0].powf(p[1] - 1.0)).abs() < 1e-14);
    }

    // Random expressions built from polynomial / exp / trig pieces.
    fn arb_expr(dim: usize) -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            (1usize..=dim).prop_map(|i| format!("x{i}")),
            (-3.0f64..3.0).prop_map(|c| format!("({c:.3})")),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
                (inner.clone(), 0u32..4).prop_map(|(a, k)| format!("({a})^{k}")),
                inner.clone().prop_map(|a| format!("sin({a})")),
                inner.clone().prop_map(|a| format!("cos({a})")),
                inner.prop_map(|a| format!("exp(0.3*{a})")),
            ]
        })
    }

    proptest! {
        #[test]
        fn derivative_matches_central_difference(
            src in arb_expr(3),
            p in proptest::collection::vec(-1.5f64..1.5, 3),
            i in 0usize..3,
        ) {
            let e = parse(&src, 3).unwrap();
            let v = e.eval(&p);
            let exact = e.diff(i).eval(&p);
            let fd = central_fd(&e, i, &p, 1e-5);
            prop_assume!(v.is_finite() && exact.is_finite() && fd.is_finite());
            prop_assume!(v.abs() < 1e6);
            prop_assert!((exact - fd).abs() <= 1e-6 * (1.0 + v.abs()),
                "{} at {:?}: exact {} fd {}", src, p, exact, fd);
        }
    }
}
