//! Recursive-descent parser for bifunction and map expressions.
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := primary ("^" unary)?
//! primary := number | ident | call | "(" expr ")"
//! call    := ident "(" expr ("," expr)* ")"
//! ```
//!
//! Power binds tighter than unary minus, so `-x1^2` is `-(x1^2)`. The first
//! argument of `cond` is a comparison `expr op expr` with `op` one of
//! `< <= = >= >` (also `≤`, `≥`, `==`).

use thiserror::Error;

use super::expr::{BinOp, CmpOp, Comparison, Condition, Expr, Extremum, Func, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("`{name}` at offset {offset} expects {expected} argument(s), found {found}")]
    Arity {
        name: String,
        offset: usize,
        expected: String,
        found: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::Arity { offset, .. } => *offset,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    Cmp(CmpOp),
    LParen,
    RParen,
    Comma,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::Cmp(_) => "comparison operator".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{s}`"),
            })?;
            out.push((Tok::Num(v), start));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start));
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, len) = match (c, next) {
            ('<', Some('=')) => (Tok::Cmp(CmpOp::Le), 2),
            ('>', Some('=')) => (Tok::Cmp(CmpOp::Ge), 2),
            ('=', Some('=')) => (Tok::Cmp(CmpOp::Eq), 2),
            ('&', Some('&')) => (Tok::Ident("and".into()), 2),
            ('<', _) => (Tok::Cmp(CmpOp::Lt), 1),
            ('>', _) => (Tok::Cmp(CmpOp::Gt), 1),
            ('=', _) => (Tok::Cmp(CmpOp::Eq), 1),
            ('≤', _) => (Tok::Cmp(CmpOp::Le), 1),
            ('≥', _) => (Tok::Cmp(CmpOp::Ge), 1),
            ('+' | '-' | '*' | '/' | '^', _) => (Tok::Op(c), 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            (',', _) => (Tok::Comma, 1),
            _ => {
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        out.push((tok, start));
        i += len;
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            offset: self.offset(),
            message: format!("expected {expected}, found {}", describe(self.peek())),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.error(what)
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(v) = variable(&name) {
                    return Ok(Expr::Var(v));
                }
                if *self.peek() == Tok::LParen && is_function(&name) {
                    self.bump();
                    return self.call(&name, offset);
                }
                if is_function(&name) {
                    return self.error("`(` after function name");
                }
                Err(ParseError::UnknownIdentifier { name, offset })
            }
            _ => self.error("an operand"),
        }
    }

    fn call(&mut self, name: &str, offset: usize) -> Result<Expr, ParseError> {
        if name == "cond" {
            let cmp = self.comparison()?;
            let mut args = Vec::new();
            while *self.peek() == Tok::Comma {
                self.bump();
                args.push(self.expr()?);
            }
            self.expect(Tok::RParen, "`,` or `)`")?;
            if args.len() != 2 {
                return Err(ParseError::Arity {
                    name: name.into(),
                    offset,
                    expected: "3".into(),
                    found: args.len() + 1,
                });
            }
            let otherwise = args.pop().unwrap();
            let then = args.pop().unwrap();
            return Ok(Expr::Cond(
                Box::new(cmp),
                Box::new(then),
                Box::new(otherwise),
            ));
        }
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen, "`,` or `)`")?;
        match name {
            "min" => Ok(Expr::Extremum(Extremum::Min, args)),
            "max" => Ok(Expr::Extremum(Extremum::Max, args)),
            _ => {
                let func = Func::from_name(name).expect("checked by is_function");
                if args.len() != 1 {
                    return Err(ParseError::Arity {
                        name: name.into(),
                        offset,
                        expected: "1".into(),
                        found: args.len(),
                    });
                }
                Ok(Expr::Call(func, Box::new(args.pop().unwrap())))
            }
        }
    }

    fn comparison(&mut self) -> Result<Comparison, ParseError> {
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            _ => return self.error("comparison operator"),
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Comparison { lhs, op, rhs })
    }

    fn finish(&self) -> Result<(), ParseError> {
        if *self.peek() == Tok::End {
            Ok(())
        } else {
            self.error("end of input")
        }
    }
}

fn variable(name: &str) -> Option<Var> {
    let (head, digits) = name.split_at(1);
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let k: usize = digits.parse().ok()?;
    if k == 0 {
        return None;
    }
    match head {
        "x" => Some(Var::X(k - 1)),
        "y" => Some(Var::Y(k - 1)),
        _ => None,
    }
}

fn is_function(name: &str) -> bool {
    matches!(name, "cond" | "min" | "max") || Func::from_name(name).is_some()
}

/// Parses an arithmetic expression.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parses a condition: comparisons joined by `and` / `&&`, or `true` /
/// `otherwise` for the always-true condition.
pub fn parse_condition(text: &str) -> Result<Condition, ParseError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    if let Tok::Ident(w) = p.peek() {
        if w == "true" || w == "otherwise" {
            p.bump();
            p.finish()?;
            return Ok(Condition::always());
        }
    }
    let mut clauses = vec![p.comparison()?];
    while matches!(p.peek(), Tok::Ident(w) if w == "and") {
        p.bump();
        clauses.push(p.comparison()?);
    }
    p.finish()?;
    Ok(Condition { clauses })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subtraction() {
        let e = parse("y1 - x1").unwrap();
        assert_eq!(
            e,
            Expr::Binary(
                BinOp::Sub,
                Box::new(Expr::Var(Var::Y(0))),
                Box::new(Expr::Var(Var::X(0)))
            )
        );
    }

    #[test]
    fn nested_conditional() {
        let e = parse("cond(x1 = 0, cond(y1 > 0, -1, 0), 0)").unwrap();
        match e {
            Expr::Cond(c, then, _) => {
                assert_eq!(c.op, CmpOp::Eq);
                assert!(matches!(*then, Expr::Cond(..)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_operator_reports_offset() {
        let err = parse("y1 +").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 4, .. }), "{err}");
    }

    #[test]
    fn precedence() {
        let v = parse("-2^2").unwrap().eval(&[], &[]).unwrap();
        assert_eq!(v, -4.0);
        let v = parse("1 + 2 * 3 - 4 / 2").unwrap().eval(&[], &[]).unwrap();
        assert_eq!(v, 5.0);
        let v = parse("2^-1").unwrap().eval(&[], &[]).unwrap();
        assert_eq!(v, 0.5);
        let v = parse("max(1, 3, 2) - min(4, 5)")
            .unwrap()
            .eval(&[], &[])
            .unwrap();
        assert_eq!(v, -1.0);
        let v = parse("1.5e1 + .5").unwrap().eval(&[], &[]).unwrap();
        assert_eq!(v, 15.5);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse("z1 + 1"),
            Err(ParseError::UnknownIdentifier { offset: 0, .. })
        ));
        assert!(matches!(
            parse("cos(x1, y1)"),
            Err(ParseError::Arity { .. })
        ));
        assert!(matches!(
            parse("cond(x1 < 0, 1)"),
            Err(ParseError::Arity { .. })
        ));
        assert!(matches!(
            parse("cond(x1, 1, 2)"),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            parse("(x1"),
            Err(ParseError::Syntax { offset: 3, .. })
        ));
        assert!(matches!(
            parse("x0"),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse("1 $ 2"),
            Err(ParseError::Syntax { offset: 2, .. })
        ));
        assert!(parse("").is_err());
    }

    #[test]
    fn conditions() {
        let c = parse_condition("x1 > 1 and x1 < 2").unwrap();
        assert_eq!(c.clauses.len(), 2);
        assert!(c.eval(&[1.5], &[]).unwrap());
        assert!(!c.eval(&[2.0], &[]).unwrap());
        assert!(parse_condition("otherwise")
            .unwrap()
            .eval(&[9.0], &[])
            .unwrap());
        assert!(parse_condition("x1 ≤ 1 && x1 ≥ 0")
            .unwrap()
            .eval(&[1.0], &[])
            .unwrap());
        assert!(parse_condition("x1").is_err());
    }
}
