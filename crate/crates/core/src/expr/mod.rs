//! Scalar expressions over spatial variables `x1..xd`.
//!
//! Expressions are immutable reference-counted trees. The smart constructors
//! ([`Expr::add`], [`Expr::mul`], ...) fold constants and apply the handful of
//! identities `0*e -> 0`, `e+0 -> e`, `e^1 -> e` (plus their obvious mirrors);
//! nothing deeper, so derivative output stays predictable.

mod compile;
mod diff;
mod parse;

use std::fmt;
use std::sync::Arc;

pub use compile::CompiledExpr;
pub use parse::parse;

/// Errors produced while parsing expression source.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` at offset {offset} takes {expected} argument(s), got {found}")]
    Arity {
        name: String,
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("variable `{name}` at offset {offset} exceeds dimension {dim}")]
    VariableOutOfRange { name: String, offset: usize, dim: usize },
}

impl ExprError {
    pub fn offset(&self) -> usize {
        match self {
            ExprError::Syntax { offset, .. }
            | ExprError::UnknownIdentifier { offset, .. }
            | ExprError::Arity { offset, .. }
            | ExprError::VariableOutOfRange { offset, .. } => *offset,
        }
    }
}

/// Single-argument functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
    /// Sign with `sign(0) = 0`; appears as the derivative of `abs`.
    Sign,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
            Func::Sign => sign(v),
        }
    }
}

#[inline]
pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else if v == 0.0 {
        0.0
    } else {
        f64::NAN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Min,
    Max,
}

impl BinOp {
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Pow => a.powf(b),
            BinOp::Min => ieee_min(a, b),
            BinOp::Max => ieee_max(a, b),
        }
    }
}

// NaN-propagating min/max; `f64::min` would silently drop a NaN operand.
#[inline]
fn ieee_min(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.min(b)
    }
}

#[inline]
fn ieee_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    /// Zero-based variable index; printed as `x{index+1}`.
    Var(usize),
    Neg(Expr),
    Func(Func, Expr),
    Binary(BinOp, Expr, Expr),
}

/// Immutable expression tree. Cloning is cheap.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

// Smart constructors that fold constants; not operator overloads.
#[allow(clippy::should_implement_trait)]
impl Expr {
    fn new(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(v: f64) -> Expr {
        Expr::new(Node::Const(v))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    /// Variable with zero-based index.
    pub fn var(index: usize) -> Expr {
        Expr::new(Node::Var(index))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    /// True when no variable occurs in the tree.
    pub fn is_constant(&self) -> bool {
        match self.node() {
            Node::Const(_) => true,
            Node::Var(_) => false,
            Node::Neg(a) | Node::Func(_, a) => a.is_constant(),
            Node::Binary(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Largest zero-based variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self.node() {
            Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Neg(a) | Node::Func(_, a) => a.max_var(),
            Node::Binary(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn node_count(&self) -> usize {
        match self.node() {
            Node::Const(_) | Node::Var(_) => 1,
            Node::Neg(a) | Node::Func(_, a) => 1 + a.node_count(),
            Node::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a.node() {
            Node::Const(v) => Expr::constant(-v),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::new(Node::Neg(a)),
        }
    }

    pub fn func(f: Func, a: Expr) -> Expr {
        if let Some(v) = a.as_const() {
            let r = f.apply(v);
            if r.is_finite() {
                return Expr::constant(r);
            }
        }
        Expr::new(Node::Func(f, a))
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        match op {
            BinOp::Add => Expr::add(a, b),
            BinOp::Sub => Expr::sub(a, b),
            BinOp::Mul => Expr::mul(a, b),
            BinOp::Div => Expr::div(a, b),
            BinOp::Pow => Expr::pow(a, b),
            BinOp::Min | BinOp::Max => Expr::fold(op, &a, &b).unwrap_or_else(|| Expr::new(Node::Binary(op, a, b))),
        }
    }

    fn fold(op: BinOp, a: &Expr, b: &Expr) -> Option<Expr> {
        let (x, y) = (a.as_const()?, b.as_const()?);
        let r = op.apply(x, y);
        r.is_finite().then(|| Expr::constant(r))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        if let Some(e) = Expr::fold(BinOp::Add, &a, &b) {
            return e;
        }
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        Expr::new(Node::Binary(BinOp::Add, a, b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        if let Some(e) = Expr::fold(BinOp::Sub, &a, &b) {
            return e;
        }
        if b.is_zero() {
            return a;
        }
        if a.is_zero() {
            return Expr::neg(b);
        }
        Expr::new(Node::Binary(BinOp::Sub, a, b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        if let Some(e) = Expr::fold(BinOp::Mul, &a, &b) {
            return e;
        }
        if a.is_zero() || b.is_zero() {
            return Expr::zero();
        }
        if a.is_one() {
            return b;
        }
        if b.is_one() {
            return a;
        }
        Expr::new(Node::Binary(BinOp::Mul, a, b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if let Some(e) = Expr::fold(BinOp::Div, &a, &b) {
            return e;
        }
        if a.is_zero() && !b.is_zero() {
            return Expr::zero();
        }
        if b.is_one() {
            return a;
        }
        Expr::new(Node::Binary(BinOp::Div, a, b))
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        if let Some(e) = Expr::fold(BinOp::Pow, &a, &b) {
            return e;
        }
        if b.is_one() {
            return a;
        }
        if b.is_zero() {
            return Expr::one();
        }
        Expr::new(Node::Binary(BinOp::Pow, a, b))
    }

    pub fn scale(alpha: f64, e: Expr) -> Expr {
        Expr::mul(Expr::constant(alpha), e)
    }

    /// Tree-walking evaluation. Prefer [`CompiledExpr`] in hot loops.
    pub fn eval(&self, point: &[f64]) -> f64 {
        match self.node() {
            Node::Const(v) => *v,
            Node::Var(i) => point[*i],
            Node::Neg(a) => -a.eval(point),
            Node::Func(f, a) => f.apply(a.eval(point)),
            Node::Binary(op, a, b) => op.apply(a.eval(point), b.eval(point)),
        }
    }

    pub fn compile(&self) -> CompiledExpr {
        CompiledExpr::new(self)
    }

    /// Exact symbolic partial derivative with respect to the zero-based variable `var`.
    pub fn diff(&self, var: usize) -> Expr {
        diff::derivative(self, var)
    }

    pub fn gradient(&self, dim: usize) -> Vec<Expr> {
        (0..dim).map(|i| self.diff(i)).collect()
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Expr {
        Expr::constant(v)
    }
}

// Printing. Precedence levels: 1 additive, 2 multiplicative, 3 unary minus,
// 4 power, 5 atom.
fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Const(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => 3,
        Node::Const(_) | Node::Var(_) | Node::Func(..) => 5,
        Node::Binary(BinOp::Min | BinOp::Max, ..) => 5,
        Node::Neg(_) => 3,
        Node::Binary(BinOp::Pow, ..) => 4,
        Node::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
        Node::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    let mag = v.abs();
    let body = if mag == 0.0 || (1e-4..1e15).contains(&mag) {
        format!("{mag}")
    } else {
        format!("{mag:e}")
    };
    if v.is_sign_negative() {
        write!(f, "(-{body})")
    } else {
        f.write_str(&body)
    }
}

fn is_neg_const(e: &Expr) -> bool {
    matches!(e.node(), Node::Const(v) if v.is_sign_negative())
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    // negative constants carry their own parentheses
    if parens && !is_neg_const(e) {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(v) => write_const(f, *v),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, precedence(a) <= 3)
            }
            Node::Func(func, a) => write!(f, "{}({a})", func.name()),
            Node::Binary(op @ (BinOp::Min | BinOp::Max), a, b) => {
                let name = if *op == BinOp::Min { "min" } else { "max" };
                write!(f, "{name}({a}, {b})")
            }
            Node::Binary(BinOp::Pow, a, b) => {
                write_child(f, a, precedence(a) < 5)?;
                f.write_str("^")?;
                write_child(f, b, precedence(b) <= 3)
            }
            Node::Binary(op @ (BinOp::Mul | BinOp::Div), a, b) => {
                write_child(f, a, precedence(a) < 2)?;
                f.write_str(if *op == BinOp::Mul { "*" } else { "/" })?;
                write_child(f, b, precedence(b) <= 3)
            }
            Node::Binary(op, a, b) => {
                write_child(f, a, false)?;
                f.write_str(if *op == BinOp::Add { " + " } else { " - " })?;
                write_child(f, b, precedence(b) <= 1 || precedence(b) == 3)
            }
        }
    }
}
