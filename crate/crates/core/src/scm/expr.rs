//! A small expression language for structural mechanisms.
//!
//! Values are `f64`; comparisons and logical operators yield 0 or 1 and any
//! non-zero value is true. Supported syntax, loosest binding first:
//!
//! ```text
//! c ? a : b        ||        &&        == != < <= > >=
//! + -              * / %     unary - !
//! min(a, b, ...)   max(...)  abs(a)    floor(a)
//! [t0, t1, t2][i]  table lookup, i truncated toward zero
//! ```
//!
//! `%` is the Euclidean remainder, so `(a + b) % 2` is XOR on bits.

use std::collections::HashMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(&'static str),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    const OPS: [&str; 21] = [
        "&&", "||", "==", "!=", "<=", ">=", "<", ">", "+", "-", "*", "/", "%", "!", "?", ":", "(", ")", "[", "]", ",",
    ];
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    'outer: while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v = text.parse::<f64>().map_err(|_| Error::Expr {
                pos: start,
                msg: format!("bad number {text:?}"),
            })?;
            out.push((start, Tok::Num(v)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
            continue;
        }
        for op in OPS {
            if src[i..].starts_with(op) {
                out.push((i, Tok::Op(op)));
                i += op.len();
                continue 'outer;
            }
        }
        return Err(Error::Expr {
            pos: i,
            msg: format!("unexpected character {c:?}"),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Min,
    Max,
    Abs,
    Floor,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(String),
    Slot(usize),
    Neg(Box<Node>),
    Not(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Cond(Box<Node>, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
    Table(Vec<Node>, Box<Node>),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Expr {
            pos: self.offset(),
            msg: msg.into(),
        })
    }

    fn eat(&mut self, op: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Op(o)) if *o == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: &str) -> Result<()> {
        if self.eat(op) {
            Ok(())
        } else {
            self.err(format!("expected {op:?}"))
        }
    }

    fn ternary(&mut self) -> Result<Node> {
        let c = self.or()?;
        if self.eat("?") {
            let a = self.ternary()?;
            self.expect(":")?;
            let b = self.ternary()?;
            return Ok(Node::Cond(Box::new(c), Box::new(a), Box::new(b)));
        }
        Ok(c)
    }

    fn or(&mut self) -> Result<Node> {
        let mut l = self.and()?;
        while self.eat("||") {
            l = Node::Or(Box::new(l), Box::new(self.and()?));
        }
        Ok(l)
    }

    fn and(&mut self) -> Result<Node> {
        let mut l = self.cmp()?;
        while self.eat("&&") {
            l = Node::And(Box::new(l), Box::new(self.cmp()?));
        }
        Ok(l)
    }

    fn cmp(&mut self) -> Result<Node> {
        let l = self.add()?;
        let op = match self.peek() {
            Some(Tok::Op("==")) => BinOp::Eq,
            Some(Tok::Op("!=")) => BinOp::Ne,
            Some(Tok::Op("<")) => BinOp::Lt,
            Some(Tok::Op("<=")) => BinOp::Le,
            Some(Tok::Op(">")) => BinOp::Gt,
            Some(Tok::Op(">=")) => BinOp::Ge,
            _ => return Ok(l),
        };
        self.pos += 1;
        let r = self.add()?;
        Ok(Node::Bin(op, Box::new(l), Box::new(r)))
    }

    fn add(&mut self) -> Result<Node> {
        let mut l = self.mul()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Op("+")) => BinOp::Add,
                Some(Tok::Op("-")) => BinOp::Sub,
                _ => return Ok(l),
            };
            self.pos += 1;
            l = Node::Bin(op, Box::new(l), Box::new(self.mul()?));
        }
    }

    fn mul(&mut self) -> Result<Node> {
        let mut l = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Op("*")) => BinOp::Mul,
                Some(Tok::Op("/")) => BinOp::Div,
                Some(Tok::Op("%")) => BinOp::Rem,
                _ => return Ok(l),
            };
            self.pos += 1;
            l = Node::Bin(op, Box::new(l), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat("-") {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat("!") {
            return Ok(Node::Not(Box::new(self.unary()?)));
        }
        self.postfix()
    }

    fn list(&mut self, close: &str) -> Result<Vec<Node>> {
        let mut items = Vec::new();
        if self.eat(close) {
            return Ok(items);
        }
        loop {
            items.push(self.ternary()?);
            if self.eat(close) {
                return Ok(items);
            }
            self.expect(",")?;
        }
    }

    fn postfix(&mut self) -> Result<Node> {
        let at = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Const(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.eat("(") {
                    let f = match name.as_str() {
                        "min" => Func::Min,
                        "max" => Func::Max,
                        "abs" => Func::Abs,
                        "floor" => Func::Floor,
                        _ => {
                            return Err(Error::Expr {
                                pos: at,
                                msg: format!("unknown function {name:?}"),
                            })
                        }
                    };
                    let args = self.list(")")?;
                    let ok = match f {
                        Func::Min | Func::Max => !args.is_empty(),
                        Func::Abs | Func::Floor => args.len() == 1,
                    };
                    if !ok {
                        return Err(Error::Expr {
                            pos: at,
                            msg: format!("wrong number of arguments to {name}"),
                        });
                    }
                    Ok(Node::Call(f, args))
                } else {
                    Ok(Node::Var(name))
                }
            }
            Some(Tok::Op("(")) => {
                self.pos += 1;
                let e = self.ternary()?;
                self.expect(")")?;
                Ok(e)
            }
            Some(Tok::Op("[")) => {
                self.pos += 1;
                let items = self.list("]")?;
                if items.is_empty() {
                    return Err(Error::Expr {
                        pos: at,
                        msg: "empty table".into(),
                    });
                }
                self.expect("[")?;
                let idx = self.ternary()?;
                self.expect("]")?;
                Ok(Node::Table(items, Box::new(idx)))
            }
            Some(_) => self.err("unexpected token"),
            None => self.err("unexpected end of expression"),
        }
    }
}

/// A parsed expression whose free variables have been bound to slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
    vars: Vec<String>,
}

impl Expr {
    /// Parses `src`. Variables stay unbound until [`Expr::bind`].
    pub fn parse(src: &str) -> Result<Expr> {
        let toks = tokenize(src)?;
        let mut p = Parser {
            toks,
            pos: 0,
            end: src.len(),
        };
        let root = p.ternary()?;
        if p.pos != p.toks.len() {
            return p.err("trailing input");
        }
        let mut vars = Vec::new();
        collect_vars(&root, &mut vars);
        Ok(Expr {
            source: src.to_string(),
            root,
            vars,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Free variable names in order of first appearance.
    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    /// Resolves every variable to a slot index.
    pub fn bind(&self, slots: &HashMap<String, usize>) -> Result<Expr> {
        let root = bind_node(&self.root, slots)?;
        Ok(Expr {
            source: self.source.clone(),
            root,
            vars: self.vars.clone(),
        })
    }

    /// Evaluates a bound expression against slot values.
    pub fn eval(&self, slots: &[f64]) -> Result<f64> {
        eval(&self.root, slots)
    }
}

fn collect_vars(n: &Node, out: &mut Vec<String>) {
    match n {
        Node::Var(v) => {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        Node::Const(_) | Node::Slot(_) => {}
        Node::Neg(a) | Node::Not(a) => collect_vars(a, out),
        Node::Bin(_, a, b) | Node::And(a, b) | Node::Or(a, b) => {
            collect_vars(a, out);
            collect_vars(b, out);
        }
        Node::Cond(c, a, b) => {
            collect_vars(c, out);
            collect_vars(a, out);
            collect_vars(b, out);
        }
        Node::Call(_, args) => args.iter().for_each(|a| collect_vars(a, out)),
        Node::Table(items, i) => {
            items.iter().for_each(|a| collect_vars(a, out));
            collect_vars(i, out);
        }
    }
}

fn bind_node(n: &Node, slots: &HashMap<String, usize>) -> Result<Node> {
    let b = |x: &Node| bind_node(x, slots).map(Box::new);
    Ok(match n {
        Node::Var(v) => Node::Slot(*slots.get(v).ok_or_else(|| Error::Scm(format!("unknown variable {v:?}")))?),
        Node::Const(_) | Node::Slot(_) => n.clone(),
        Node::Neg(a) => Node::Neg(b(a)?),
        Node::Not(a) => Node::Not(b(a)?),
        Node::Bin(op, x, y) => Node::Bin(*op, b(x)?, b(y)?),
        Node::And(x, y) => Node::And(b(x)?, b(y)?),
        Node::Or(x, y) => Node::Or(b(x)?, b(y)?),
        Node::Cond(c, x, y) => Node::Cond(b(c)?, b(x)?, b(y)?),
        Node::Call(f, args) => Node::Call(*f, args.iter().map(|a| bind_node(a, slots)).collect::<Result<_>>()?),
        Node::Table(items, i) => Node::Table(
            items.iter().map(|a| bind_node(a, slots)).collect::<Result<_>>()?,
            b(i)?,
        ),
    })
}

#[inline]
fn truth(v: f64) -> bool {
    v != 0.0
}

#[inline]
fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn eval(n: &Node, s: &[f64]) -> Result<f64> {
    Ok(match n {
        Node::Const(v) => *v,
        Node::Slot(i) => s[*i],
        Node::Var(v) => return Err(Error::Scm(format!("variable {v:?} was never bound"))),
        Node::Neg(a) => -eval(a, s)?,
        Node::Not(a) => bit(!truth(eval(a, s)?)),
        Node::And(a, b) => bit(truth(eval(a, s)?) && truth(eval(b, s)?)),
        Node::Or(a, b) => bit(truth(eval(a, s)?) || truth(eval(b, s)?)),
        Node::Cond(c, a, b) => {
            if truth(eval(c, s)?) {
                eval(a, s)?
            } else {
                eval(b, s)?
            }
        }
        Node::Bin(op, a, b) => {
            let (x, y) = (eval(a, s)?, eval(b, s)?);
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == 0.0 {
                        return Err(Error::Scm("division by zero".into()));
                    }
                    x / y
                }
                BinOp::Rem => {
                    if y == 0.0 {
                        return Err(Error::Scm("remainder by zero".into()));
                    }
                    x.rem_euclid(y)
                }
                BinOp::Eq => bit(x == y),
                BinOp::Ne => bit(x != y),
                BinOp::Lt => bit(x < y),
                BinOp::Le => bit(x <= y),
                BinOp::Gt => bit(x > y),
                BinOp::Ge => bit(x >= y),
            }
        }
        Node::Call(f, args) => {
            let first = eval(&args[0], s)?;
            match f {
                Func::Abs => first.abs(),
                Func::Floor => first.floor(),
                Func::Min => args[1..].iter().try_fold(first, |m, a| eval(a, s).map(|v| m.min(v)))?,
                Func::Max => args[1..].iter().try_fold(first, |m, a| eval(a, s).map(|v| m.max(v)))?,
            }
        }
        Node::Table(items, i) => {
            let idx = eval(i, s)?;
            let k = idx.trunc();
            if !(k >= 0.0 && (k as usize) < items.len()) {
                return Err(Error::Scm(format!(
                    "table index {idx} out of range for {} entries",
                    items.len()
                )));
            }
            eval(&items[k as usize], s)?
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(src: &str, vars: &[(&str, f64)]) -> f64 {
        let slots: HashMap<String, usize> = vars.iter().enumerate().map(|(i, (n, _))| (n.to_string(), i)).collect();
        let values: Vec<f64> = vars.iter().map(|v| v.1).collect();
        Expr::parse(src).unwrap().bind(&slots).unwrap().eval(&values).unwrap()
    }

    #[test]
    fn precedence_and_arithmetic() {
        assert_eq!(run("1 + 2 * 3", &[]), 7.0);
        assert_eq!(run("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(run("-2 * -3", &[]), 6.0);
        assert_eq!(run("7 % 3", &[]), 1.0);
        assert_eq!(run("-1 % 2", &[]), 1.0);
        assert_eq!(run("1.5e1 / 3", &[]), 5.0);
    }

    #[test]
    fn logic_comparison_and_ternary() {
        assert_eq!(run("a + b >= 2 && !c", &[("a", 1.0), ("b", 1.0), ("c", 0.0)]), 1.0);
        assert_eq!(run("a || b", &[("a", 0.0), ("b", 0.0)]), 0.0);
        assert_eq!(run("a == 1 ? 10 : b < 1 ? 20 : 30", &[("a", 0.0), ("b", 0.5)]), 20.0);
        assert_eq!(run("(a + b) % 2", &[("a", 1.0), ("b", 1.0)]), 0.0);
    }

    #[test]
    fn functions_and_tables() {
        assert_eq!(run("min(3, x, 5)", &[("x", 1.0)]), 1.0);
        assert_eq!(run("max(x, 2)", &[("x", 1.0)]), 2.0);
        assert_eq!(run("abs(-2.5) + floor(1.9)", &[]), 3.5);
        assert_eq!(run("[0.1, 0.2, x * 2][i + 1]", &[("x", 4.0), ("i", 1.0)]), 8.0);
    }

    #[test]
    fn variables_in_first_appearance_order() {
        let e = Expr::parse("b + a * b + c").unwrap();
        assert_eq!(e.variables(), &["b", "a", "c"]);
    }

    #[test]
    fn parse_errors_carry_offsets() {
        match Expr::parse("1 + $") {
            Err(Error::Expr { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("abs(1, 2)").is_err());
    }

    #[test]
    fn runtime_errors() {
        let slots: HashMap<String, usize> = [("i".to_string(), 0)].into();
        let e = Expr::parse("[1, 2][i]").unwrap().bind(&slots).unwrap();
        assert!(e.eval(&[2.0]).is_err());
        assert!(Expr::parse("1 / 0").unwrap().eval(&[]).is_err());
        assert!(Expr::parse("y").unwrap().bind(&slots).is_err());
    }
}
