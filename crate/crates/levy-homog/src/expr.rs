//! Closed-form coefficient expressions.
//!
//! Periodic coefficients `a(y)`, sources `f(y)`, exterior data `phi(x)` and custom
//! jump densities are written as small arithmetic expressions over named variables
//! (`y1..yN`, `x1..xN`, `z1..zM`). The grammar is deliberately minimal: literals,
//! variables, `+ - * / ^`, unary minus, `sin cos exp abs min max`, and `pi`.
//! `^` binds tighter than unary minus; binary operators of equal precedence
//! associate to the left.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "abs" => Some(Func::Abs),
            "min" => Some(Func::Min),
            "max" => Some(Func::Max),
            _ => None,
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Literal(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression over a fixed list of variable names.
#[derive(Debug, Clone)]
pub struct Expression {
    root: Node,
    vars: Vec<String>,
    source: String,
}

impl Expression {
    /// Parse `text` over the given variable names.
    pub fn parse(text: &str, var_names: &[&str]) -> Result<Expression> {
        if text.trim().is_empty() {
            return Err(Error::Parse {
                offset: 0,
                message: "empty expression".into(),
                expected: "literal, variable, '(' or function".into(),
            });
        }
        let vars: Vec<String> = var_names.iter().map(|s| s.to_string()).collect();
        let mut p = Parser {
            bytes: text.as_bytes(),
            pos: 0,
            vars: &vars,
        };
        let root = p.parse_expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(Error::Parse {
                offset: p.pos,
                message: format!("unexpected trailing input '{}'", &text[p.pos..]),
                expected: "end of input or binary operator".into(),
            });
        }
        Ok(Expression {
            root,
            vars,
            source: text.to_string(),
        })
    }

    pub fn var_names(&self) -> &[String] {
        &self.vars
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluate at a point. `point.len()` must match the variable list.
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.vars.len() {
            return Err(Error::ShapeMismatch(format!(
                "expression over {} variables evaluated at a point of dimension {}",
                self.vars.len(),
                point.len()
            )));
        }
        eval_node(&self.root, point)
    }

    /// Wrap into a shareable evaluator that panics on evaluation errors.
    /// Intended for coefficients that have already been validated on the grid.
    pub fn into_fn(self) -> Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> {
        Arc::new(move |p: &[f64]| {
            self.eval(p)
                .unwrap_or_else(|e| panic!("expression '{}' failed at {:?}: {e}", self.source, p))
        })
    }

    /// Check 1-periodicity in every coordinate direction on random samples.
    pub fn check_periodic(&self, dims: usize, samples: usize, seed: u64) -> Result<PeriodicReport> {
        use rand::Rng;
        use rand::SeedableRng;
        if dims != self.vars.len() {
            return Err(Error::ShapeMismatch(format!(
                "periodicity check over {dims} dims for an expression in {} variables",
                self.vars.len()
            )));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut max_defect = 0.0f64;
        let mut worst = vec![0.0; dims];
        for _ in 0..samples.max(1) {
            let y: Vec<f64> = (0..dims).map(|_| rng.random_range(0.0..1.0)).collect();
            let base = self.eval(&y)?;
            for d in 0..dims {
                let mut shifted = y.clone();
                shifted[d] += 1.0;
                let defect = (self.eval(&shifted)? - base).abs();
                if defect > max_defect {
                    max_defect = defect;
                    worst = y.clone();
                }
            }
        }
        Ok(PeriodicReport {
            passed: max_defect <= 1e-10,
            max_defect,
            worst_point: worst,
        })
    }

    /// Check `min over a dense torus grid >= a0`. `samples` is the grid
    /// resolution per dimension.
    pub fn check_positive_lower_bound(&self, a0: f64, samples: usize) -> Result<LowerBoundReport> {
        let dims = self.vars.len();
        let n = samples.max(1);
        let total = n.pow(dims as u32);
        let mut min_value = f64::INFINITY;
        let mut argmin = vec![0.0; dims];
        let mut point = vec![0.0; dims];
        for flat in 0..total {
            let mut rem = flat;
            for v in point.iter_mut() {
                *v = (rem % n) as f64 / n as f64;
                rem /= n;
            }
            let val = self.eval(&point)?;
            if val < min_value {
                min_value = val;
                argmin = point.clone();
            }
        }
        Ok(LowerBoundReport {
            passed: min_value >= a0,
            min_value,
            argmin,
        })
    }

    /// Canonical printing with minimal parentheses; `parse . pretty` is a
    /// fixed point.
    pub fn pretty(&self) -> String {
        let mut s = String::new();
        print_node(&self.root, &self.vars, 0, &mut s);
        s
    }
}

#[derive(Debug, Clone)]
pub struct PeriodicReport {
    pub passed: bool,
    pub max_defect: f64,
    pub worst_point: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LowerBoundReport {
    pub passed: bool,
    pub min_value: f64,
    pub argmin: Vec<f64>,
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pretty())
    }
}

fn eval_node(node: &Node, point: &[f64]) -> Result<f64> {
    match node {
        Node::Literal(v) => Ok(*v),
        Node::Var(i) => Ok(point[*i]),
        Node::Neg(inner) => Ok(-eval_node(inner, point)?),
        Node::Bin(op, lhs, rhs) => {
            let l = eval_node(lhs, point)?;
            let r = eval_node(rhs, point)?;
            match op {
                BinOp::Add => Ok(l + r),
                BinOp::Sub => Ok(l - r),
                BinOp::Mul => Ok(l * r),
                BinOp::Div => {
                    if r == 0.0 {
                        Err(Error::Eval(format!("division by zero in {l} / {r}")))
                    } else {
                        Ok(l / r)
                    }
                }
                BinOp::Pow => {
                    if l == 0.0 && r < 0.0 {
                        return Err(Error::Eval(format!("zero raised to negative power {r}")));
                    }
                    let v = l.powf(r);
                    if v.is_nan() {
                        Err(Error::Eval(format!("{l} ^ {r} is not a real number")))
                    } else {
                        Ok(v)
                    }
                }
            }
        }
        Node::Call(func, args) => {
            let a = eval_node(&args[0], point)?;
            match func {
                Func::Sin => Ok(a.sin()),
                Func::Cos => Ok(a.cos()),
                Func::Exp => Ok(a.exp()),
                Func::Abs => Ok(a.abs()),
                Func::Min => Ok(a.min(eval_node(&args[1], point)?)),
                Func::Max => Ok(a.max(eval_node(&args[1], point)?)),
            }
        }
    }
}

// Precedence levels used for printing: 0 add/sub, 1 mul/div, 2 unary minus, 3 pow.
fn print_node(node: &Node, vars: &[String], parent_level: u8, out: &mut String) {
    let level = match node {
        Node::Literal(_) | Node::Var(_) | Node::Call(..) => 4,
        Node::Neg(_) => 2,
        Node::Bin(BinOp::Add | BinOp::Sub, ..) => 0,
        Node::Bin(BinOp::Mul | BinOp::Div, ..) => 1,
        Node::Bin(BinOp::Pow, ..) => 3,
    };
    let parens = level < parent_level;
    if parens {
        out.push('(');
    }
    match node {
        Node::Literal(v) => {
            if *v == std::f64::consts::PI {
                out.push_str("pi");
            } else {
                out.push_str(&format!("{v}"));
            }
        }
        Node::Var(i) => out.push_str(&vars[*i]),
        Node::Neg(inner) => {
            out.push('-');
            print_node(inner, vars, 3, out);
        }
        Node::Bin(op, lhs, rhs) => {
            let (sym, lhs_level, rhs_level) = match op {
                BinOp::Add => ("+", 0, 1),
                BinOp::Sub => ("-", 0, 1),
                BinOp::Mul => ("*", 1, 2),
                BinOp::Div => ("/", 1, 2),
                // '^' is left-associative, so a right operand at the same
                // level needs parentheses.
                BinOp::Pow => ("^", 3, 4),
            };
            print_node(lhs, vars, lhs_level, out);
            out.push_str(sym);
            print_node(rhs, vars, rhs_level, out);
        }
        Node::Call(func, args) => {
            out.push_str(func.name());
            out.push('(');
            for (i, arg) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                print_node(arg, vars, 0, out);
            }
            out.push(')');
        }
    }
    if parens {
        out.push(')');
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    vars: &'a [String],
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn err(&self, message: impl Into<String>, expected: &str) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
            expected: expected.into(),
        }
    }

    // expr := term (('+'|'-') term)*
    fn parse_expr(&mut self) -> Result<Node> {
        let mut lhs = self.parse_term()?;
        while let Some(c) = self.peek() {
            let op = match c {
                b'+' => BinOp::Add,
                b'-' => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.parse_term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    // term := unary (('*'|'/') unary)*
    fn parse_term(&mut self) -> Result<Node> {
        let mut lhs = self.parse_unary()?;
        while let Some(c) = self.peek() {
            let op = match c {
                b'*' => BinOp::Mul,
                b'/' => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.parse_unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    // unary := '-' unary | power
    fn parse_unary(&mut self) -> Result<Node> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.parse_unary()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    // power := atom ('^' atom)*   (left-associative)
    fn parse_power(&mut self) -> Result<Node> {
        let mut lhs = self.parse_atom()?;
        while self.peek() == Some(b'^') {
            self.pos += 1;
            let rhs = self.parse_atom()?;
            lhs = Node::Bin(BinOp::Pow, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_atom(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.err(
                "unexpected end of input",
                "literal, variable, '(' or function",
            )),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.parse_expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("unbalanced parenthesis", "')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.parse_ident(),
            Some(c) => Err(self.err(
                format!("unexpected character '{}'", c as char),
                "literal, variable, '(' or function",
            )),
        }
    }

    fn parse_number(&mut self) -> Result<Node> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E')
                && self.pos > start
                && self
                    .bytes
                    .get(self.pos + 1)
                    .is_some_and(|&n| n.is_ascii_digit() || n == b'+' || n == b'-')
            {
                self.pos += 2;
                while self
                    .bytes
                    .get(self.pos)
                    .is_some_and(|&n| n.is_ascii_digit())
                {
                    self.pos += 1;
                }
                break;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) => Ok(Node::Literal(v)),
            Err(_) => {
                self.pos = start;
                Err(self.err(format!("malformed number '{text}'"), "numeric literal"))
            }
        }
    }

    fn parse_ident(&mut self) -> Result<Node> {
        self.skip_ws();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|&c| c.is_ascii_alphanumeric() || c == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        if name == "pi" {
            return Ok(Node::Literal(std::f64::consts::PI));
        }
        if let Some(func) = Func::from_name(name) {
            if self.peek() != Some(b'(') {
                return Err(self.err(format!("function '{name}' requires arguments"), "'('"));
            }
            self.pos += 1;
            let mut args = vec![self.parse_expr()?];
            while self.peek() == Some(b',') {
                self.pos += 1;
                args.push(self.parse_expr()?);
            }
            if self.peek() != Some(b')') {
                return Err(self.err("unbalanced call parenthesis", "')' or ','"));
            }
            self.pos += 1;
            if args.len() != func.arity() {
                self.pos = start;
                return Err(self.err(
                    format!(
                        "function '{name}' takes {} argument(s), got {}",
                        func.arity(),
                        args.len()
                    ),
                    "matching argument count",
                ));
            }
            return Ok(Node::Call(func, args));
        }
        if let Some(idx) = self.vars.iter().position(|v| v == name) {
            return Ok(Node::Var(idx));
        }
        self.pos = start;
        Err(self.err(
            format!("unknown identifier '{name}'"),
            "declared variable, function or 'pi'",
        ))
    }
}
