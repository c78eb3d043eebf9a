//! Flat postfix form of an [`Expr`] for repeated evaluation.
//!
//! Semantics are identical to [`Expr::eval`]. `x^2` is evaluated as `x*x`,
//! which is the correctly rounded square.

use super::{BinOp, Expr, Func, Node};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Var(u32),
    Neg,
    Func(Func),
    Bin(BinOp),
    Square,
}

const INLINE_STACK: usize = 48;

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledExpr {
    ops: Vec<Op>,
    depth: usize,
    constant: Option<f64>,
}

impl CompiledExpr {
    pub fn new(e: &Expr) -> CompiledExpr {
        let mut ops = Vec::with_capacity(e.node_count());
        emit(e, &mut ops);
        let depth = max_depth(&ops);
        let constant = match ops.as_slice() {
            [Op::Const(v)] => Some(*v),
            _ => None,
        };
        CompiledExpr { ops, depth, constant }
    }

    /// Value when the expression is a literal constant.
    pub fn constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn is_zero(&self) -> bool {
        self.constant == Some(0.0)
    }

    #[inline]
    pub fn eval(&self, point: &[f64]) -> f64 {
        if let Some(v) = self.constant {
            return v;
        }
        if self.depth <= INLINE_STACK {
            let mut stack = [0.0f64; INLINE_STACK];
            run(&self.ops, point, &mut stack)
        } else {
            let mut stack = vec![0.0f64; self.depth];
            run(&self.ops, point, &mut stack)
        }
    }
}

fn emit(e: &Expr, ops: &mut Vec<Op>) {
    match e.node() {
        Node::Const(v) => ops.push(Op::Const(*v)),
        Node::Var(i) => ops.push(Op::Var(*i as u32)),
        Node::Neg(a) => {
            emit(a, ops);
            ops.push(Op::Neg);
        }
        Node::Func(f, a) => {
            emit(a, ops);
            ops.push(Op::Func(*f));
        }
        Node::Binary(BinOp::Pow, a, b) => {
            emit(a, ops);
            match b.as_const() {
                Some(2.0) => ops.push(Op::Square),
                _ => {
                    emit(b, ops);
                    ops.push(Op::Bin(BinOp::Pow));
                }
            }
        }
        Node::Binary(op, a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Bin(*op));
        }
    }
}

fn max_depth(ops: &[Op]) -> usize {
    let mut depth = 0usize;
    let mut max = 0usize;
    for op in ops {
        match op {
            Op::Const(_) | Op::Var(_) => depth += 1,
            Op::Bin(_) => depth -= 1,
            Op::Neg | Op::Func(_) | Op::Square => {}
        }
        max = max.max(depth);
    }
    max
}

#[inline]
fn run(ops: &[Op], point: &[f64], stack: &mut [f64]) -> f64 {
    let mut sp = 0usize;
    for op in ops {
        match *op {
            Op::Const(v) => {
                stack[sp] = v;
                sp += 1;
            }
            Op::Var(i) => {
                stack[sp] = point[i as usize];
                sp += 1;
            }
            Op::Neg => stack[sp - 1] = -stack[sp - 1],
            Op::Func(f) => stack[sp - 1] = f.apply(stack[sp - 1]),
            Op::Square => stack[sp - 1] *= stack[sp - 1],
            Op::Bin(b) => {
                sp -= 1;
                stack[sp - 1] = b.apply(stack[sp - 1], stack[sp]);
            }
        }
    }
    stack[0]
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    #[test]
    fn matches_tree_evaluation() {
        for src in [
            "x^2 + 1",
            "exp(-abs(x)^(-0.5))",
            "sin(x)*exp(y) - cos(x*y)/3",
            "max(x, y) - min(x^3, -y)",
            "x^(-2) + sqrt(abs(y))",
        ] {
            let e = parse(src, 2).unwrap();
            let c = e.compile();
            for p in [[0.3, -1.2], [2.0, 0.5], [-0.7, 0.0]] {
                let (a, b) = (e.eval(&p), c.eval(&p));
                assert!(a == b || (a.is_nan() && b.is_nan()), "{src} at {p:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn ieee_conventions() {
        let c = parse("exp(-abs(x)^(-0.5))", 1).unwrap().compile();
        assert_eq!(c.eval(&[0.0]), 0.0);
        let v = c.eval(&[0.01]);
        assert!((v - 4.539_992_976_248_485e-5).abs() < 1e-18);
        assert_eq!(parse("x^2+1", 1).unwrap().compile().eval(&[2.0]), 5.0);
        assert_eq!(parse("x^(-1)", 1).unwrap().compile().eval(&[0.0]), f64::INFINITY);
    }

    #[test]
    fn deep_expressions_use_heap_stack() {
        let mut nested = String::from("x");
        for _ in 0..60 {
            nested = format!("x*({nested} + 1)");
        }
        let e = parse(&nested, 1).unwrap();
        let c = e.compile();
        assert!(c.depth > 1);
        assert_eq!(c.eval(&[0.5]), e.eval(&[0.5]));
    }
}
