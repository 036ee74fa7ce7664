//! A small arithmetic language for dynamics and running costs.
//!
//! Expressions range over spatial variables `x1..xN` and control components
//! `a1..aK`. Grammar, lowest precedence first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := number | variable | call | '(' sum ')'
//! call    := name '(' sum (',' sum)* ')'
//! ```
//!
//! `pow(b, e)` is a call, never an infix operator, so `-pow(2, 2)` is `-4`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("variable `{name}` at offset {offset} is out of range (limit {limit})")]
    VariableOutOfRange {
        offset: usize,
        name: String,
        limit: usize,
    },
    #[error("function `{name}` at offset {offset} takes {expected} argument(s), got {found}")]
    ArityMismatch {
        offset: usize,
        name: String,
        expected: usize,
        found: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::VariableOutOfRange { offset, .. }
            | ParseError::ArityMismatch { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("sqrt of negative value {0}")]
    NegativeSqrt(f64),
    #[error("non-finite result in `{0}`")]
    NonFinite(String),
    #[error("expected {expected} {what} values, got {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// Spatial coordinate, zero-based.
    X(usize),
    /// Control component, zero-based.
    A(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Abs,
    Exp,
    Sin,
    Cos,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(Var),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

/// A parsed expression together with the arities it was checked against.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    dim: usize,
    control_arity: usize,
    source: String,
}

impl Expression {
    pub fn parse(text: &str, dim: usize, control_arity: usize) -> Result<Self, ParseError> {
        let root = Parser::new(text, dim, control_arity).parse()?;
        Ok(Expression {
            root,
            dim,
            control_arity,
            source: text.to_string(),
        })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn control_arity(&self) -> usize {
        self.control_arity
    }

    /// The text this expression was parsed from.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn evaluate(&self, x: &[f64], a: &[f64]) -> Result<f64, EvalError> {
        if x.len() != self.dim {
            return Err(EvalError::Shape {
                what: "spatial",
                expected: self.dim,
                found: x.len(),
            });
        }
        if a.len() != self.control_arity {
            return Err(EvalError::Shape {
                what: "control",
                expected: self.control_arity,
                found: a.len(),
            });
        }
        eval_node(&self.root, x, a)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) => write!(f, "{v:?}"),
            Node::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Node::Var(Var::A(i)) => write!(f, "a{}", i + 1),
            Node::Unary(UnaryOp::Neg, e) => write!(f, "(-{e})"),
            Node::Unary(op, e) => {
                let name = match op {
                    UnaryOp::Abs => "abs",
                    UnaryOp::Exp => "exp",
                    UnaryOp::Sin => "sin",
                    UnaryOp::Cos => "cos",
                    UnaryOp::Sqrt => "sqrt",
                    UnaryOp::Neg => unreachable!(),
                };
                write!(f, "{name}({e})")
            }
            Node::Binary(op, l, r) => match op {
                BinaryOp::Add => write!(f, "({l} + {r})"),
                BinaryOp::Sub => write!(f, "({l} - {r})"),
                BinaryOp::Mul => write!(f, "({l} * {r})"),
                BinaryOp::Div => write!(f, "({l} / {r})"),
                BinaryOp::Min => write!(f, "min({l}, {r})"),
                BinaryOp::Max => write!(f, "max({l}, {r})"),
                BinaryOp::Pow => write!(f, "pow({l}, {r})"),
            },
        }
    }
}

fn eval_node(node: &Node, x: &[f64], a: &[f64]) -> Result<f64, EvalError> {
    let v = match node {
        Node::Num(v) => *v,
        Node::Var(Var::X(i)) => x[*i],
        Node::Var(Var::A(i)) => a[*i],
        Node::Unary(op, e) => {
            let v = eval_node(e, x, a)?;
            match op {
                UnaryOp::Neg => -v,
                UnaryOp::Abs => v.abs(),
                UnaryOp::Exp => v.exp(),
                UnaryOp::Sin => v.sin(),
                UnaryOp::Cos => v.cos(),
                UnaryOp::Sqrt => {
                    if v < 0.0 {
                        return Err(EvalError::NegativeSqrt(v));
                    }
                    v.sqrt()
                }
            }
        }
        Node::Binary(op, l, r) => {
            let l = eval_node(l, x, a)?;
            let r = eval_node(r, x, a)?;
            match op {
                BinaryOp::Add => l + r,
                BinaryOp::Sub => l - r,
                BinaryOp::Mul => l * r,
                BinaryOp::Div => {
                    if r == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    l / r
                }
                BinaryOp::Min => l.min(r),
                BinaryOp::Max => l.max(r),
                BinaryOp::Pow => l.powf(r),
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite(node.to_string()))
    }
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    dim: usize,
    control_arity: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, dim: usize, control_arity: usize) -> Self {
        Parser {
            text,
            bytes: text.as_bytes(),
            pos: 0,
            dim,
            control_arity,
        }
    }

    fn parse(mut self) -> Result<Node, ParseError> {
        self.skip_ws();
        if self.pos == self.bytes.len() {
            return Err(self.syntax("empty expression"));
        }
        let node = self.sum()?;
        self.skip_ws();
        if self.pos != self.bytes.len() {
            return Err(self.syntax("unexpected trailing input"));
        }
        Ok(node)
    }

    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(&format!("expected `{}`", c as char)))
        }
    }

    fn sum(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinaryOp::Add,
                Some(b'-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinaryOp::Mul,
                Some(b'/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Node::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.sum()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(_) => Err(self.syntax("unexpected character")),
            None => Err(self.syntax("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let b = self.bytes;
        let mut end = start;
        while end < b.len() && (b[end].is_ascii_digit() || b[end] == b'.') {
            end += 1;
        }
        if end < b.len() && (b[end] == b'e' || b[end] == b'E') {
            let mut k = end + 1;
            if k < b.len() && (b[k] == b'+' || b[k] == b'-') {
                k += 1;
            }
            if k < b.len() && b[k].is_ascii_digit() {
                while k < b.len() && b[k].is_ascii_digit() {
                    k += 1;
                }
                end = k;
            }
        }
        let literal = &self.text[start..end];
        match literal.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos = end;
                Ok(Node::Num(v))
            }
            _ => Err(ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{literal}`"),
            }),
        }
    }

    fn identifier(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let b = self.bytes;
        let mut end = start;
        while end < b.len() && (b[end].is_ascii_alphanumeric() || b[end] == b'_') {
            end += 1;
        }
        let name = &self.text[start..end];
        self.pos = end;

        if let Some(var) = self.variable(name, start)? {
            return Ok(Node::Var(var));
        }

        let (arity, build): (usize, fn(Vec<Node>) -> Node) = match name {
            "neg" => (1, |mut v| Node::Unary(UnaryOp::Neg, Box::new(v.remove(0)))),
            "abs" => (1, |mut v| Node::Unary(UnaryOp::Abs, Box::new(v.remove(0)))),
            "exp" => (1, |mut v| Node::Unary(UnaryOp::Exp, Box::new(v.remove(0)))),
            "sin" => (1, |mut v| Node::Unary(UnaryOp::Sin, Box::new(v.remove(0)))),
            "cos" => (1, |mut v| Node::Unary(UnaryOp::Cos, Box::new(v.remove(0)))),
            "sqrt" => (1, |mut v| Node::Unary(UnaryOp::Sqrt, Box::new(v.remove(0)))),
            "min" => (2, |v| binary_call(BinaryOp::Min, v)),
            "max" => (2, |v| binary_call(BinaryOp::Max, v)),
            "pow" => (2, |v| binary_call(BinaryOp::Pow, v)),
            _ => {
                return Err(ParseError::UnknownIdentifier {
                    offset: start,
                    name: name.to_string(),
                })
            }
        };

        self.expect(b'(')?;
        let mut args = vec![self.sum()?];
        while self.peek() == Some(b',') {
            self.pos += 1;
            args.push(self.sum()?);
        }
        self.expect(b')')?;
        if args.len() != arity {
            return Err(ParseError::ArityMismatch {
                offset: start,
                name: name.to_string(),
                expected: arity,
                found: args.len(),
            });
        }
        Ok(build(args))
    }

    fn variable(&self, name: &str, offset: usize) -> Result<Option<Var>, ParseError> {
        let (kind, digits) = name.split_at(1);
        if digits.is_empty() || !digits.bytes().all(|c| c.is_ascii_digit()) {
            return Ok(None);
        }
        let (limit, make): (usize, fn(usize) -> Var) = match kind {
            "x" => (self.dim, Var::X),
            "a" => (self.control_arity, Var::A),
            _ => return Ok(None),
        };
        let index: usize = digits.parse().unwrap_or(0);
        if index == 0 || index > limit {
            return Err(ParseError::VariableOutOfRange {
                offset,
                name: name.to_string(),
                limit,
            });
        }
        Ok(Some(make(index - 1)))
    }
}

fn binary_call(op: BinaryOp, mut args: Vec<Node>) -> Node {
    let r = args.pop().expect("two arguments");
    let l = args.pop().expect("two arguments");
    Node::Binary(op, Box::new(l), Box::new(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval(text: &str, x: &[f64], a: &[f64]) -> f64 {
        Expression::parse(text, x.len(), a.len())
            .unwrap()
            .evaluate(x, a)
            .unwrap()
    }

    #[test]
    fn worked_examples() {
        assert_eq!(eval("-a1*(x1+1)", &[0.0], &[0.5]), -0.5);
        assert_eq!(eval("abs(x1)", &[-2.0], &[]), 2.0);
        assert_eq!(eval("exp(-x1)", &[0.0], &[]), 1.0);
        assert_eq!(eval("min(a1, 0)", &[], &[-1.0]), -1.0);
        // 2 e^{-1}; reference value computed to 20 digits with mpmath.
        let v = eval("a1*exp(-x1)", &[1.0], &[2.0]);
        assert!((v - 0.735_758_882_342_884_6).abs() < 1e-15);
    }

    #[test]
    fn syntax_error_offset() {
        let err = Expression::parse("1+*2", 1, 1).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 2, .. }), "{err:?}");
    }

    #[test]
    fn rejects_unknown_and_out_of_range() {
        assert!(matches!(
            Expression::parse("y1 + 1", 1, 1),
            Err(ParseError::UnknownIdentifier { offset: 0, .. })
        ));
        assert!(matches!(
            Expression::parse("x2", 1, 1),
            Err(ParseError::VariableOutOfRange { .. })
        ));
        assert!(matches!(
            Expression::parse("a0", 1, 1),
            Err(ParseError::VariableOutOfRange { .. })
        ));
        assert!(matches!(
            Expression::parse("2 * min(1)", 1, 1),
            Err(ParseError::ArityMismatch { offset: 4, expected: 2, found: 1, .. })
        ));
        assert!(matches!(
            Expression::parse("exp(1, 2)", 1, 1),
            Err(ParseError::ArityMismatch { .. })
        ));
        assert!(Expression::parse("", 1, 1).is_err());
        assert!(Expression::parse("   ", 1, 1).is_err());
        assert!(Expression::parse("(1", 1, 1).is_err());
        assert!(Expression::parse("1 2", 1, 1).is_err());
    }

    #[test]
    fn domain_errors_are_reported() {
        let e = Expression::parse("1/x1", 1, 0).unwrap();
        assert_eq!(e.evaluate(&[0.0], &[]), Err(EvalError::DivisionByZero));
        let e = Expression::parse("sqrt(x1)", 1, 0).unwrap();
        assert!(matches!(e.evaluate(&[-1.0], &[]), Err(EvalError::NegativeSqrt(_))));
        let e = Expression::parse("exp(x1)", 1, 0).unwrap();
        assert!(matches!(e.evaluate(&[1000.0], &[]), Err(EvalError::NonFinite(_))));
        let e = Expression::parse("pow(x1, 0.5)", 1, 0).unwrap();
        assert!(e.evaluate(&[-4.0], &[]).is_err());
        assert!(matches!(e.evaluate(&[], &[]), Err(EvalError::Shape { .. })));
    }

    #[test]
    fn precedence_golden_table() {
        let table: &[(&str, f64)] = &[
            ("1+2*3", 7.0),
            ("(1+2)*3", 9.0),
            ("1-2-3", -4.0),
            ("8/4/2", 1.0),
            ("-(2)*3", -6.0),
            ("-pow(2,2)", -4.0),
            ("pow(-2,2)", 4.0),
            ("pow(2,3)*2", 16.0),
            ("--3", 3.0),
            ("2*-3", -6.0),
            ("-2*3+1", -5.0),
            ("1-(-2)", 3.0),
            ("neg(2)+5", 3.0),
            ("max(1, 2*3) - min(-1, 4)", 7.0),
            ("abs(-3)*-1", -3.0),
            ("2e1 + .5", 20.5),
            ("1.5E-1*10", 1.5),
            ("sqrt(16)/2", 2.0),
            ("cos(0) + sin(0)", 1.0),
        ];
        for (text, expected) in table {
            assert_eq!(eval(text, &[], &[]), *expected, "{text}");
        }
    }

    #[test]
    fn pretty_print_reparses() {
        for text in ["-a1*(x1+1)", "pow(x1, -2) - max(a1, abs(x1))/3", "--x1", "1e-7*a1"] {
            let e = Expression::parse(text, 1, 1).unwrap();
            let again = Expression::parse(&e.to_string(), 1, 1).unwrap();
            assert_eq!(e.root(), again.root(), "{text} -> {e}");
        }
    }

    fn arb_node() -> impl Strategy<Value = Node> {
        let leaf = prop_oneof![
            (0.0f64..100.0).prop_map(Node::Num),
            (0usize..2).prop_map(|i| Node::Var(Var::X(i))),
            Just(Node::Var(Var::A(0))),
        ];
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                (
                    prop_oneof![
                        Just(UnaryOp::Neg),
                        Just(UnaryOp::Abs),
                        Just(UnaryOp::Exp),
                        Just(UnaryOp::Sqrt)
                    ],
                    inner.clone()
                )
                    .prop_map(|(op, e)| Node::Unary(op, Box::new(e))),
                (
                    prop_oneof![
                        Just(BinaryOp::Add),
                        Just(BinaryOp::Sub),
                        Just(BinaryOp::Mul),
                        Just(BinaryOp::Div),
                        Just(BinaryOp::Min),
                        Just(BinaryOp::Pow)
                    ],
                    inner.clone(),
                    inner
                )
                    .prop_map(|(op, l, r)| Node::Binary(op, Box::new(l), Box::new(r))),
            ]
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_structural(node in arb_node()) {
            let printed = node.to_string();
            let parsed = Expression::parse(&printed, 2, 1).unwrap();
            prop_assert_eq!(parsed.root(), &node);
        }

        #[test]
        fn identity_variable(x1 in -1e6f64..1e6, x2 in -1e6f64..1e6) {
            let e = Expression::parse("x1", 2, 0).unwrap();
            prop_assert_eq!(e.evaluate(&[x1, x2], &[]).unwrap(), x1);
            let e = Expression::parse("x2", 2, 0).unwrap();
            prop_assert_eq!(e.evaluate(&[x1, x2], &[]).unwrap(), x2);
        }
    }
}
