use std::fmt;

use thiserror::Error;

/// A variable `x<k>` or `y<k>`, stored zero-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X(usize),
    Y(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Abs,
    Cos,
    Sin,
    Exp,
    Sqrt,
}

impl Func {
    pub(crate) fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "cos" => Func::Cos,
            "sin" => Func::Sin,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Cos => "cos",
            Func::Sin => "sin",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extremum {
    Min,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    /// Exact float comparison, no tolerance.
    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: Expr,
}

impl Comparison {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<bool, EvalError> {
        Ok(self.op.holds(self.lhs.eval(x, y)?, self.rhs.eval(x, y)?))
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }
}

/// A conjunction of comparisons; the empty conjunction is `true`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Condition {
    pub clauses: Vec<Comparison>,
}

impl Condition {
    pub fn always() -> Self {
        Condition::default()
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<bool, EvalError> {
        for c in &self.clauses {
            if !c.eval(x, y)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn max_index(&self) -> (usize, usize) {
        self.clauses.iter().fold((0, 0), |(a, b), c| {
            let (l1, l2) = c.lhs.max_index();
            let (r1, r2) = c.rhs.max_index();
            (a.max(l1).max(r1), b.max(l2).max(r2))
        })
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.clauses.is_empty() {
            return write!(f, "true");
        }
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                write!(f, " and ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Expression tree over `x1..xn`, `y1..yn` and real constants.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Extremum(Extremum, Vec<Expr>),
    Cond(Box<Comparison>, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("square root of negative number in `{0}`")]
    NegativeSqrt(String),
    #[error("non-finite value in `{0}`")]
    NonFinite(String),
    #[error("variable {0} is not bound (point has too few coordinates)")]
    Unbound(String),
}

impl Expr {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::X(i)) => *x
                .get(*i)
                .ok_or_else(|| EvalError::Unbound(format!("x{}", i + 1)))?,
            Expr::Var(Var::Y(i)) => *y
                .get(*i)
                .ok_or_else(|| EvalError::Unbound(format!("y{}", i + 1)))?,
            Expr::Neg(e) => -e.eval(x, y)?,
            Expr::Binary(op, a, b) => {
                let a = a.eval(x, y)?;
                let b = b.eval(x, y)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero(self.to_string()));
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
                            a.powi(b as i32)
                        } else {
                            a.powf(b)
                        }
                    }
                }
            }
            Expr::Call(func, arg) => {
                let a = arg.eval(x, y)?;
                match func {
                    Func::Abs => a.abs(),
                    Func::Cos => a.cos(),
                    Func::Sin => a.sin(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(EvalError::NegativeSqrt(self.to_string()));
                        }
                        a.sqrt()
                    }
                }
            }
            Expr::Extremum(kind, args) => {
                let mut acc = match kind {
                    Extremum::Min => f64::INFINITY,
                    Extremum::Max => f64::NEG_INFINITY,
                };
                for a in args {
                    let v = a.eval(x, y)?;
                    acc = match kind {
                        Extremum::Min => acc.min(v),
                        Extremum::Max => acc.max(v),
                    };
                }
                acc
            }
            Expr::Cond(cmp, then, otherwise) => {
                if cmp.eval(x, y)? {
                    then.eval(x, y)?
                } else {
                    otherwise.eval(x, y)?
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite(self.to_string()))
        }
    }

    /// Largest one-based index of `x` and `y` variables (0 when absent).
    pub fn max_index(&self) -> (usize, usize) {
        let mut acc = (0, 0);
        self.visit(&mut |e| {
            if let Expr::Var(v) = e {
                match v {
                    Var::X(i) => acc.0 = acc.0.max(i + 1),
                    Var::Y(i) => acc.1 = acc.1.max(i + 1),
                }
            }
        });
        acc
    }

    /// True when evaluation uses only operations that are exact on the
    /// dyadic-friendly values found at grid nodes (no transcendental
    /// functions, no division, no fractional powers).
    pub fn is_exact(&self) -> bool {
        let mut exact = true;
        self.visit(&mut |e| match e {
            Expr::Call(f, _) if *f != Func::Abs => exact = false,
            Expr::Binary(BinOp::Div, _, _) => exact = false,
            Expr::Binary(BinOp::Pow, _, b)
                if !matches!(**b, Expr::Const(c) if c.fract() == 0.0 && c >= 0.0) => {
                    exact = false;
                }
            _ => {}
        });
        exact
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Neg(e) | Expr::Call(_, e) => e.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Extremum(_, args) => args.iter().for_each(|a| a.visit(f)),
            Expr::Cond(c, a, b) => {
                c.lhs.visit(f);
                c.rhs.visit(f);
                a.visit(f);
                b.visit(f);
            }
        }
    }
}

fn fmt_const(c: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c < 0.0 || (c == 0.0 && c.is_sign_negative()) {
        write!(f, "(-{:?})", -c)
    } else {
        write!(f, "{c:?}")
    }
}

/// Fully parenthesized rendering that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => fmt_const(*c, f),
            Expr::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Expr::Var(Var::Y(i)) => write!(f, "y{}", i + 1),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Extremum(kind, args) => {
                let name = match kind {
                    Extremum::Min => "min",
                    Extremum::Max => "max",
                };
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Expr::Cond(c, a, b) => write!(f, "cond({c}, {a}, {b})"),
        }
    }
}
