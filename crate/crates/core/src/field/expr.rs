//! Tiny expression language for user-defined fields.
//!
//! Grammar (usual precedence, `^` binds tightest and is right-associative):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'pi' | var | func '(' expr ')' | 'atanr' '(' expr ',' expr ')' | '(' expr ')'
//! ```
//!
//! Variables are `x`, `y`, `z` (coordinates 1..3), `x1`..`x9`, and `t` (time).
//! Functions: `sin cos tan exp log sqrt abs atan tanh sinh cosh`.  `atanr(a, b)`
//! is the principal arctangent of the ratio `a / b`, range `(-pi/2, pi/2)`,
//! not the quadrant-aware two-argument form.
//!
//! Expressions are differentiated symbolically so user fields get analytic
//! Jacobians.

use std::fmt;

use crate::linalg::Matrix;
use crate::{Error, Result, Scalar};

use super::{SingularSet, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Atan,
    Tanh,
    Sinh,
    Cosh,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "tan" => Self::Tan,
            "exp" => Self::Exp,
            "log" | "ln" => Self::Log,
            "sqrt" => Self::Sqrt,
            "abs" => Self::Abs,
            "atan" => Self::Atan,
            "tanh" => Self::Tanh,
            "sinh" => Self::Sinh,
            "cosh" => Self::Cosh,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Self::Sin => "sin",
            Self::Cos => "cos",
            Self::Tan => "tan",
            Self::Exp => "exp",
            Self::Log => "log",
            Self::Sqrt => "sqrt",
            Self::Abs => "abs",
            Self::Atan => "atan",
            Self::Tanh => "tanh",
            Self::Sinh => "sinh",
            Self::Cosh => "cosh",
        }
    }

    fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Self::Sin => v.sin(),
            Self::Cos => v.cos(),
            Self::Tan => v.tan(),
            Self::Exp => v.exp(),
            Self::Log => v.ln(),
            Self::Sqrt => v.sqrt(),
            Self::Abs => v.abs(),
            Self::Atan => v.atan(),
            Self::Tanh => v.tanh(),
            Self::Sinh => v.sinh(),
            Self::Cosh => v.cosh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Time,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    /// Generalised sign, used by the derivative of `abs`.
    Sign(Box<Expr>),
    /// Principal `atan(a / b)`.
    AtanRatio(Box<Expr>, Box<Expr>),
}

use Expr::*;

fn c(v: f64) -> Expr {
    Const(v)
}

// Constructors with constant folding so derivatives stay small.
fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Const(x), Const(y)) => c(x + y),
        (Const(z), e) | (e, Const(z)) if z == 0.0 => e,
        (a, b) => Add(a.into(), b.into()),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Const(x), Const(y)) => c(x - y),
        (e, Const(z)) if z == 0.0 => e,
        (Const(z), e) if z == 0.0 => neg(e),
        (a, b) => Sub(a.into(), b.into()),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Const(x), Const(y)) => c(x * y),
        (Const(z), _) | (_, Const(z)) if z == 0.0 => c(0.0),
        (Const(o), e) | (e, Const(o)) if o == 1.0 => e,
        (a, b) => Mul(a.into(), b.into()),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Const(z), _) if z == 0.0 => c(0.0),
        (e, Const(o)) if o == 1.0 => e,
        (a, b) => Div(a.into(), b.into()),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Const(x) => c(-x),
        Neg(e) => *e,
        e => Neg(e.into()),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (_, Const(z)) if z == 0.0 => c(1.0),
        (e, Const(o)) if o == 1.0 => e,
        (a, b) => Pow(a.into(), b.into()),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    Call(f, a.into())
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(parse_err(format!(
                "unexpected trailing input `{:?}` in `{src}`",
                p.tokens[p.pos]
            )));
        }
        Ok(e)
    }

    pub fn eval<T: Scalar>(&self, x: &[T], t: T) -> T {
        match self {
            Const(v) => T::lit(*v),
            Var(i) => x.get(*i).copied().unwrap_or_else(T::nan),
            Time => t,
            Neg(a) => -a.eval(x, t),
            Add(a, b) => a.eval(x, t) + b.eval(x, t),
            Sub(a, b) => a.eval(x, t) - b.eval(x, t),
            Mul(a, b) => a.eval(x, t) * b.eval(x, t),
            Div(a, b) => a.eval(x, t) / b.eval(x, t),
            Pow(a, b) => {
                let base = a.eval(x, t);
                match **b {
                    Const(k) if k.fract() == 0.0 && k.abs() < 64.0 => base.powi(k as i32),
                    _ => base.powf(b.eval(x, t)),
                }
            }
            Call(f, a) => f.apply(a.eval(x, t)),
            Sign(a) => crate::scalar::sign0(a.eval(x, t)),
            AtanRatio(a, b) => (a.eval(x, t) / b.eval(x, t)).atan(),
        }
    }

    /// Symbolic partial derivative with respect to coordinate `var`.
    pub fn derivative(&self, var: usize) -> Expr {
        match self {
            Const(_) | Time | Sign(_) => c(0.0),
            Var(i) => c(if *i == var { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(var)),
            Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Mul(a, b) => add(
                mul(a.derivative(var), (**b).clone()),
                mul((**a).clone(), b.derivative(var)),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.derivative(var), (**b).clone()),
                    mul((**a).clone(), b.derivative(var)),
                ),
                pow((**b).clone(), c(2.0)),
            ),
            Pow(a, b) => {
                let da = a.derivative(var);
                let db = b.derivative(var);
                if db == c(0.0) {
                    // k a^(k-1) a'
                    mul(
                        mul(
                            (**b).clone(),
                            pow((**a).clone(), sub((**b).clone(), c(1.0))),
                        ),
                        da,
                    )
                } else {
                    // a^b (b' ln a + b a'/a)
                    mul(
                        self.clone(),
                        add(
                            mul(db, call(Func::Log, (**a).clone())),
                            div(mul((**b).clone(), da), (**a).clone()),
                        ),
                    )
                }
            }
            Call(f, a) => {
                let da = a.derivative(var);
                if da == c(0.0) {
                    return c(0.0);
                }
                let u = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, u),
                    Func::Cos => neg(call(Func::Sin, u)),
                    Func::Tan => div(c(1.0), pow(call(Func::Cos, u), c(2.0))),
                    Func::Exp => call(Func::Exp, u),
                    Func::Log => div(c(1.0), u),
                    Func::Sqrt => div(c(0.5), call(Func::Sqrt, u)),
                    Func::Abs => Sign(u.into()),
                    Func::Atan => div(c(1.0), add(c(1.0), pow(u, c(2.0)))),
                    Func::Tanh => sub(c(1.0), pow(call(Func::Tanh, u), c(2.0))),
                    Func::Sinh => call(Func::Cosh, u),
                    Func::Cosh => call(Func::Sinh, u),
                };
                mul(outer, da)
            }
            AtanRatio(a, b) => {
                // d atan(a/b) = (a' b - a b') / (a^2 + b^2)
                let num = sub(
                    mul(a.derivative(var), (**b).clone()),
                    mul((**a).clone(), b.derivative(var)),
                );
                div(
                    num,
                    add(pow((**a).clone(), c(2.0)), pow((**b).clone(), c(2.0))),
                )
            }
        }
    }

    pub fn uses_time(&self) -> bool {
        match self {
            Time => true,
            Const(_) | Var(_) => false,
            Neg(a) | Call(_, a) | Sign(a) => a.uses_time(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) | AtanRatio(a, b) => {
                a.uses_time() || b.uses_time()
            }
        }
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Var(i) => Some(*i),
            Const(_) | Time => None,
            Neg(a) | Call(_, a) | Sign(a) => a.max_var(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) | AtanRatio(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(p), Some(q)) => Some(p.max(q)),
                    (p, q) => p.or(q),
                }
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const(v) => write!(f, "{v}"),
            Var(i) => write!(f, "x{}", i + 1),
            Time => write!(f, "t"),
            Neg(a) => write!(f, "(-{a})"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Pow(a, b) => write!(f, "({a} ^ {b})"),
            Call(func, a) => write!(f, "{}({a})", func.name()),
            Sign(a) => write!(f, "sign({a})"),
            AtanRatio(a, b) => write!(f, "atanr({a}, {b})"),
        }
    }
}

fn parse_err(message: String) -> Error {
    Error::Parse { line: 0, message }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse()
                .map_err(|_| parse_err(format!("bad number `{text}`")))?;
            out.push(Tok::Num(v));
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(ch) {
            out.push(Tok::Op(ch));
            i += 1;
        } else {
            return Err(parse_err(format!("unexpected character `{ch}` in `{src}`")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.eat(op) {
            Ok(())
        } else {
            Err(parse_err(format!("expected `{op}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Add(lhs.into(), self.term()?.into());
            } else if self.eat('-') {
                lhs = Sub(lhs.into(), self.term()?.into());
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Mul(lhs.into(), self.unary()?.into());
            } else if self.eat('/') {
                lhs = Div(lhs.into(), self.unary()?.into());
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Neg(self.unary()?.into()));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Pow(base.into(), exp.into()));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .peek()
            .cloned()
            .ok_or_else(|| parse_err("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Const(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Op(op) => Err(parse_err(format!("unexpected `{op}`"))),
            Tok::Ident(name) => self.ident(&name),
        }
    }

    fn ident(&mut self, name: &str) -> Result<Expr> {
        if name == "atanr" {
            self.expect('(')?;
            let a = self.expr()?;
            self.expect(',')?;
            let b = self.expr()?;
            self.expect(')')?;
            return Ok(AtanRatio(a.into(), b.into()));
        }
        if let Some(f) = Func::from_name(name) {
            self.expect('(')?;
            let a = self.expr()?;
            self.expect(')')?;
            return Ok(Call(f, a.into()));
        }
        match name {
            "x" => Ok(Var(0)),
            "y" => Ok(Var(1)),
            "z" => Ok(Var(2)),
            "t" => Ok(Time),
            "pi" => Ok(Const(std::f64::consts::PI)),
            _ => {
                if let Some(idx) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
                    if idx >= 1 {
                        return Ok(Var(idx - 1));
                    }
                }
                Err(parse_err(format!("unknown identifier `{name}`")))
            }
        }
    }
}

/// Builds a vector field from component expressions, with a symbolic Jacobian.
pub fn expression_field<T: Scalar>(
    name: &str,
    components: &[&str],
    singular: SingularSet<T>,
) -> Result<VectorField<T>> {
    let dim = components.len();
    if dim == 0 {
        return Err(parse_err(format!("field `{name}` has no components")));
    }
    let exprs: Vec<Expr> = components
        .iter()
        .map(|s| Expr::parse(s))
        .collect::<Result<_>>()?;
    if let Some(v) = exprs.iter().filter_map(Expr::max_var).max() {
        if v >= dim {
            return Err(parse_err(format!(
                "field `{name}` references coordinate {} but has dimension {dim}",
                v + 1
            )));
        }
    }
    let jac_exprs: Vec<Vec<Expr>> = exprs
        .iter()
        .map(|e| (0..dim).map(|j| e.derivative(j)).collect())
        .collect();
    let time_dependent = exprs.iter().any(Expr::uses_time);
    let div_exprs: Vec<Expr> = (0..dim).map(|i| jac_exprs[i][i].clone()).collect();
    let eval_exprs = exprs;
    Ok(VectorField::new(name, dim, move |x: &[T], t: T| {
        eval_exprs.iter().map(|e| e.eval(x, t)).collect()
    })
    .with_jacobian(move |x: &[T], t: T| {
        Matrix::from_fn(dim, dim, |i, j| jac_exprs[i][j].eval(x, t))
    })
    .with_divergence(move |x: &[T], t: T| div_exprs.iter().map(|e| e.eval(x, t)).sum())
    .with_singular_set(singular)
    .time_dependent(time_dependent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str, x: &[f64]) -> f64 {
        Expr::parse(s).unwrap().eval(x, 0.0)
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2 * 3", &[]), 7.0);
        assert_eq!(ev("-2^2", &[]), -4.0);
        assert_eq!(ev("2^3^2", &[]), 512.0);
        assert_eq!(ev("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(ev("8 / 4 / 2", &[]), 1.0);
        assert_eq!(ev("x - y - z", &[1.0, 2.0, 3.0]), -4.0);
        assert_eq!(ev("x3", &[1.0, 2.0, 5.0]), 5.0);
        assert_eq!(ev("1.5e1 + 2E-1", &[]), 15.2);
    }

    #[test]
    fn atanr_is_principal_branch() {
        // quadrant (-1, -1): ratio 1 -> pi/4, not -3pi/4
        let v = ev("atanr(y, x)", &[-1.0, -1.0]);
        assert!((v - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo(x)").is_err());
        assert!(Expr::parse("x $ y").is_err());
        assert!(Expr::parse("(x").is_err());
        assert!(Expr::parse("x y").is_err());
    }

    #[test]
    fn dimension_check() {
        assert!(expression_field::<f64>("bad", &["x", "z"], SingularSet::empty()).is_err());
    }

    #[test]
    fn helix_v1_from_text_matches_formula() {
        let f = expression_field::<f64>("v1", &["1", "0", "-y/(x^2+y^2)"], SingularSet::empty())
            .unwrap();
        let v = crate::field::eval_field(&f, &[-1.0, -1.0, 0.0], 0.0).unwrap();
        assert_eq!(v, vec![1.0, 0.0, 0.5]);
        let j = crate::field::jacobian(
            &f,
            &[1.0, 1.0, 0.0],
            0.0,
            crate::field::DiffMethod::Analytic,
        )
        .unwrap();
        // d/dx(-y/r^2) = 2xy/r^4, d/dy = (y^2 - x^2)/r^4
        assert!((j[(2, 0)] - 0.5).abs() < 1e-15);
        assert!(j[(2, 1)].abs() < 1e-15);
    }

    const SOURCES: &[&str] = &[
        "sin(x) * cos(y) + z^3",
        "exp(-(x^2 + y^2)/2) * x",
        "atanr(y, x) + sqrt(1 + x^2)",
        "x^y + tanh(z)",
        "log(1 + x^2) / (2 + cos(y*z))",
        "atan(x*y) - sinh(z) + cosh(x)",
        "t * x + tan(0.3*y)",
        "-abs(x - 0.123) * y",
    ];

    proptest! {
        #[test]
        fn symbolic_derivative_matches_central_difference(
            x in 0.2f64..1.5, y in 0.2f64..1.5, z in -1.0f64..1.0, which in 0usize..8
        ) {
            let e = Expr::parse(SOURCES[which]).unwrap();
            let p = [x, y, z];
            for var in 0..3 {
                let h = 1e-6;
                let mut a = p; a[var] += h;
                let mut b = p; b[var] -= h;
                let fd = (e.eval(&a, 0.7) - e.eval(&b, 0.7)) / (2.0 * h);
                let an = e.derivative(var).eval(&p, 0.7);
                prop_assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "{} d/d{}: {} vs {}", SOURCES[which], var, fd, an);
            }
        }
    }
}
