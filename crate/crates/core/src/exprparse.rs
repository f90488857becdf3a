//! Arithmetic expressions in one free variable.
//!
//! Coefficient functions such as `kappa^2(t)` or the Ray-Reid couplings
//! `f(s)`, `g(s)` are given as text in scenario files. The grammar is the
//! usual one:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus and is right-associative, so
//! `-2^2 = -4` and `2^3^2 = 512`. Known functions are `sin cos tan exp log
//! sqrt abs` (one argument) and `pow` (two). `pi` and `e` are constants.

use std::fmt;

use thiserror::Error;

const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at byte {pos}")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("function `{func}` at byte {pos} takes {expected} argument(s), got {found}")]
    Arity {
        pos: usize,
        func: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("domain error in `{func}` at argument {arg}")]
    Domain { func: &'static str, arg: f64 },
    #[error("invalid variable name `{0}`")]
    InvalidVariable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Pow => "pow",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var,
    Pi,
    E,
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression bound to a single free variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    var: String,
}

impl Expr {
    pub fn parse(text: &str, var: &str) -> Result<Expr, ExprError> {
        parse(text, var)
    }

    /// A constant expression; prints as its value.
    pub fn constant(value: f64, var: &str) -> Expr {
        Expr {
            root: Node::Num(value),
            var: var.to_string(),
        }
    }

    pub fn var(&self) -> &str {
        &self.var
    }

    /// `Some(v)` when the expression is a bare literal.
    pub fn as_constant(&self) -> Option<f64> {
        match self.root {
            Node::Num(v) => Some(v),
            _ => None,
        }
    }

    pub fn eval(&self, value: f64) -> Result<f64, ExprError> {
        eval_node(&self.root, value)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, &self.var)
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node, var: &str) -> fmt::Result {
    match node {
        Node::Num(v) => write!(f, "{v:?}"),
        Node::Var => f.write_str(var),
        Node::Pi => f.write_str("pi"),
        Node::E => f.write_str("e"),
        Node::Neg(inner) => {
            f.write_str("(-")?;
            write_node(f, inner, var)?;
            f.write_str(")")
        }
        Node::Bin(op, l, r) => {
            f.write_str("(")?;
            write_node(f, l, var)?;
            write!(f, " {} ", op.symbol())?;
            write_node(f, r, var)?;
            f.write_str(")")
        }
        Node::Call(func, args) => {
            write!(f, "{}(", func.name())?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_node(f, a, var)?;
            }
            f.write_str(")")
        }
    }
}

fn pow_checked(base: f64, exponent: f64) -> Result<f64, ExprError> {
    if base == 0.0 && exponent < 0.0 {
        return Err(ExprError::Domain {
            func: "pow",
            arg: base,
        });
    }
    let r = base.powf(exponent);
    if r.is_nan() && !base.is_nan() && !exponent.is_nan() {
        return Err(ExprError::Domain {
            func: "pow",
            arg: base,
        });
    }
    Ok(r)
}

fn eval_node(node: &Node, x: f64) -> Result<f64, ExprError> {
    Ok(match node {
        Node::Num(v) => *v,
        Node::Var => x,
        Node::Pi => std::f64::consts::PI,
        Node::E => std::f64::consts::E,
        Node::Neg(inner) => -eval_node(inner, x)?,
        Node::Bin(op, l, r) => {
            let a = eval_node(l, x)?;
            let b = eval_node(r, x)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(ExprError::Domain { func: "/", arg: b });
                    }
                    a / b
                }
                BinOp::Pow => pow_checked(a, b)?,
            }
        }
        Node::Call(func, args) => {
            let a = eval_node(&args[0], x)?;
            match func {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Exp => a.exp(),
                Func::Log => {
                    if a <= 0.0 {
                        return Err(ExprError::Domain { func: "log", arg: a });
                    }
                    a.ln()
                }
                Func::Sqrt => {
                    if a < 0.0 {
                        return Err(ExprError::Domain { func: "sqrt", arg: a });
                    }
                    a.sqrt()
                }
                Func::Abs => a.abs(),
                Func::Pow => pow_checked(a, eval_node(&args[1], x)?)?,
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn syntax(pos: usize, message: impl Into<String>) -> ExprError {
    ExprError::Syntax {
        pos,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit
                    .parse()
                    .map_err(|_| syntax(start, format!("malformed number `{lit}`")))?;
                if !v.is_finite() {
                    return Err(syntax(start, format!("number `{lit}` overflows")));
                }
                out.push((start, Tok::Num(v)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(syntax(start, format!("unexpected character `{ch}`")));
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    var: &'a str,
    depth: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ExprError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(syntax(
                self.pos(),
                format!("expected {what}, found {}", self.peek().describe()),
            ))
        }
    }

    fn enter(&mut self) -> Result<(), ExprError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(syntax(self.pos(), "expression nested too deeply"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        self.enter()?;
        let node = if *self.peek() == Tok::Minus {
            self.bump();
            Node::Neg(Box::new(self.unary()?))
        } else {
            self.power()?
        };
        self.depth -= 1;
        Ok(node)
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    let func = Func::lookup(&name).ok_or(ExprError::UnknownIdentifier {
                        pos,
                        name: name.clone(),
                    })?;
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "`,` or `)`")?;
                    if args.len() != func.arity() {
                        return Err(ExprError::Arity {
                            pos,
                            func: func.name(),
                            expected: func.arity(),
                            found: args.len(),
                        });
                    }
                    Ok(Node::Call(func, args))
                } else if name == self.var {
                    Ok(Node::Var)
                } else if name == "pi" {
                    Ok(Node::Pi)
                } else if name == "e" {
                    Ok(Node::E)
                } else if Func::lookup(&name).is_some() {
                    Err(syntax(self.pos(), format!("expected `(` after `{name}`")))
                } else {
                    Err(ExprError::UnknownIdentifier { pos, name })
                }
            }
            other => Err(syntax(
                pos,
                format!("expected a number, identifier or `(`, found {}", other.describe()),
            )),
        }
    }
}

fn valid_var(var: &str) -> bool {
    let mut chars = var.chars();
    let head_ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_');
    head_ok
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && var != "pi"
        && var != "e"
        && Func::lookup(var).is_none()
}

/// Parse `text` as an expression in the single free variable `var`.
pub fn parse(text: &str, var: &str) -> Result<Expr, ExprError> {
    if !valid_var(var) {
        return Err(ExprError::InvalidVariable(var.to_string()));
    }
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        var,
        depth: 0,
    };
    if *p.peek() == Tok::End {
        return Err(syntax(0, "empty expression"));
    }
    let root = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(syntax(
            p.pos(),
            format!(
                "expected an operator or end of input, found {}",
                p.peek().describe()
            ),
        ));
    }
    Ok(Expr {
        root,
        var: var.to_string(),
    })
}

pub fn eval(e: &Expr, value: f64) -> Result<f64, ExprError> {
    e.eval(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(text: &str, x: f64) -> f64 {
        parse(text, "t").unwrap().eval(x).unwrap()
    }

    #[test]
    fn literal_and_cosine() {
        assert_eq!(ev("1", 0.3), 1.0);
        assert_eq!(ev("1 + 0.1*cos(0.7*t)", 0.0), 1.1);
        assert_eq!(ev("t*t", 3.0), 9.0);
        assert!(ev("sin(pi)", 0.0).abs() < 1e-15);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("2^3^2", 0.0), 512.0);
        assert_eq!(ev("-2^2", 0.0), -4.0);
        assert_eq!(ev("2^-1", 0.0), 0.5);
        assert_eq!(ev("1 - 2 - 3", 0.0), -4.0);
        assert_eq!(ev("8 / 4 / 2", 0.0), 1.0);
        assert_eq!(ev("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0), 9.0);
        assert_eq!(ev("--t", 2.0), 2.0);
        assert_eq!(ev("1.5e2 + .5 + 2E-1", 0.0), 150.7);
        assert_eq!(ev("pow(t, 2) + abs(-1) + exp(0) + log(e)", 3.0), 12.0);
    }

    #[test]
    fn domain_errors_are_reported() {
        let e = parse("sqrt(t)", "t").unwrap();
        assert_eq!(
            e.eval(-1.0),
            Err(ExprError::Domain {
                func: "sqrt",
                arg: -1.0
            })
        );
        assert!(matches!(
            parse("log(t)", "t").unwrap().eval(0.0),
            Err(ExprError::Domain { func: "log", .. })
        ));
        assert!(matches!(
            parse("1/t", "t").unwrap().eval(0.0),
            Err(ExprError::Domain { func: "/", .. })
        ));
        assert!(matches!(
            parse("t^0.5", "t").unwrap().eval(-4.0),
            Err(ExprError::Domain { func: "pow", .. })
        ));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse("", "t"), Err(ExprError::Syntax { pos: 0, .. })));
        assert!(matches!(parse("1 +", "t"), Err(ExprError::Syntax { pos: 3, .. })));
        assert!(matches!(parse("(1", "t"), Err(ExprError::Syntax { pos: 2, .. })));
        assert!(matches!(parse("1 2", "t"), Err(ExprError::Syntax { pos: 2, .. })));
        assert!(matches!(
            parse("2 # 3", "t"),
            Err(ExprError::Syntax { pos: 2, .. })
        ));
        assert_eq!(
            parse("x + t", "t"),
            Err(ExprError::UnknownIdentifier {
                pos: 0,
                name: "x".into()
            })
        );
        assert!(matches!(
            parse("foo(1)", "t"),
            Err(ExprError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse("pow(1)", "t"),
            Err(ExprError::Arity {
                func: "pow",
                expected: 2,
                found: 1,
                ..
            })
        ));
        assert!(matches!(parse("sin(1, 2)", "t"), Err(ExprError::Arity { .. })));
        assert!(matches!(parse("sin + 1", "t"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("1", "pi"), Err(ExprError::InvalidVariable(_))));
        assert!(matches!(parse("1", "2x"), Err(ExprError::InvalidVariable(_))));
    }

    #[test]
    fn variable_is_fixed_at_parse_time() {
        let e = parse("s*s", "s").unwrap();
        assert_eq!(e.eval(4.0).unwrap(), 16.0);
        assert!(parse("s*s", "t").is_err());
    }

    #[test]
    fn deep_nesting_is_rejected_without_overflow() {
        let text = format!("{}1{}", "(".repeat(10_000), ")".repeat(10_000));
        assert!(matches!(parse(&text, "t"), Err(ExprError::Syntax { .. })));
        let minus = format!("{}1", "-".repeat(10_000));
        assert!(parse(&minus, "t").is_err());
    }

    #[test]
    fn display_is_reparseable() {
        let e = parse("-2^t^2 + sin(pi*t) / (1 + 1e-5*t)", "t").unwrap();
        let printed = e.to_string();
        let again = parse(&printed, "t").unwrap();
        assert_eq!(e, again);
    }

    fn arb_expr() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            (0.0f64..10.0).prop_map(|v| format!("{v}")),
            Just("t".to_string()),
            Just("pi".to_string()),
            Just("e".to_string()),
        ];
        leaf.prop_recursive(5, 48, 3, |inner| {
            prop_oneof![
                (
                    inner.clone(),
                    inner.clone(),
                    prop::sample::select(vec!['+', '-', '*', '/', '^'])
                )
                    .prop_map(|(a, b, op)| format!("{a} {op} {b}")),
                inner.clone().prop_map(|a| format!("-{a}")),
                inner.clone().prop_map(|a| format!("({a})")),
                (
                    inner.clone(),
                    prop::sample::select(vec!["sin", "cos", "exp", "abs", "sqrt", "log"])
                )
                    .prop_map(|(a, f)| format!("{f}({a})")),
                (inner.clone(), inner).prop_map(|(a, b)| format!("pow({a}, {b})")),
            ]
        })
    }

    fn same_outcome(a: Result<f64, ExprError>, b: Result<f64, ExprError>) -> bool {
        match (a, b) {
            (Ok(x), Ok(y)) => x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()),
            (Err(_), Err(_)) => true,
            _ => false,
        }
    }

    proptest! {
        #[test]
        fn printed_form_evaluates_identically(text in arb_expr(), args in prop::collection::vec(-5.0f64..5.0, 1000)) {
            let e = parse(&text, "t").unwrap();
            let again = parse(&e.to_string(), "t").unwrap();
            for x in args {
                prop_assert!(same_outcome(e.eval(x), again.eval(x)));
            }
        }

        #[test]
        fn parser_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
            let text = String::from_utf8_lossy(&bytes);
            let _ = parse(&text, "t");
        }

        #[test]
        fn parser_never_panics_on_grammar_soup(
            parts in prop::collection::vec(
                prop::sample::select(vec!["t", "1", "2.5e3", "(", ")", "+", "-", "*", "/", "^", ",", "sin", "pow", "pi", " ", "e", "."]),
                0..40)
        ) {
            let text: String = parts.concat();
            if let Ok(e) = parse(&text, "t") {
                let _ = e.eval(0.5);
            }
        }

        #[test]
        fn evaluation_is_deterministic(text in arb_expr(), x in -5.0f64..5.0) {
            let a = parse(&text, "t").unwrap();
            let b = parse(&text, "t").unwrap();
            prop_assert!(same_outcome(a.eval(x), b.eval(x)));
        }
    }
}
