use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Binary, ExprError, ExprTree, Node, Unary};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Dollar(usize),
    Op(char),
    LParen,
    RParen,
    End,
}

fn syntax(pos: usize, msg: impl Into<String>) -> ExprError {
    ExprError::Syntax { pos, msg: msg.into() }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == b'.' && b.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut j = i + 1;
                if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                    j += 1;
                }
                if j < b.len() && b[j].is_ascii_digit() {
                    i = j;
                    while i < b.len() && b[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s = &text[start..i];
            let v: f64 = s.parse().map_err(|_| syntax(start, format!("bad number `{s}`")))?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
        } else if c == b'$' {
            i += 1;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            let idx = text[start + 1..i]
                .parse()
                .map_err(|_| syntax(start, "expected parameter index after `$`"))?;
            out.push((start, Tok::Dollar(idx)));
        } else {
            let t = match c {
                b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                _ => {
                    let ch = text[start..].chars().next().unwrap_or('?');
                    return Err(syntax(start, format!("unexpected character `{ch}`")));
                }
            };
            i += 1;
            out.push((start, t));
        }
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    names: &'a [&'a str],
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

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ExprError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(syntax(self.pos(), format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => Binary::Add,
                Tok::Op('-') => Binary::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Node::binary(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => Binary::Mul,
                Tok::Op('/') => Binary::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Node::binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(match self.unary()? {
                    Node::Const(c) => Node::Const(-c),
                    other => Node::unary(Unary::Neg, other),
                })
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Op('^') {
            return Ok(base);
        }
        self.bump();
        let k = self.exponent()?;
        Ok(Node::unary(Unary::Powi(k), base))
    }

    fn exponent(&mut self) -> Result<i32, ExprError> {
        let pos = self.pos();
        let paren = *self.peek() == Tok::LParen;
        if paren {
            self.bump();
        }
        let mut sign = 1.0;
        while let Tok::Op(c @ ('-' | '+')) = *self.peek() {
            if c == '-' {
                sign = -sign;
            }
            self.bump();
        }
        let k = match self.bump() {
            Tok::Num(v) if libm::trunc(v) == v && v.abs() <= f64::from(i32::MAX) => (sign * v) as i32,
            _ => return Err(syntax(pos, "exponent must be an integer literal")),
        };
        if paren {
            self.expect(Tok::RParen, "`)` after exponent")?;
        }
        Ok(k)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::Dollar(i) => Ok(Node::Param(i)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    let op = Unary::from_name(&name)
                        .ok_or(ExprError::UnknownIdentifier { pos, name: name.clone() })?;
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)` after function argument")?;
                    return Ok(Node::unary(op, arg));
                }
                if let Some(i) = self.names.iter().position(|n| *n == name) {
                    return Ok(Node::Var(i));
                }
                if name == "pi" {
                    return Ok(Node::Const(core::f64::consts::PI));
                }
                if let Some(i) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
                    return Ok(Node::Var(i));
                }
                Err(ExprError::UnknownIdentifier { pos, name })
            }
            Tok::End => Err(syntax(pos, "unexpected end of input")),
            t => Err(syntax(pos, format!("unexpected token {t:?}"))),
        }
    }
}

/// Parses infix text. Variables are bound by position in `names`; `x<i>`
/// also denotes feature `i` unless shadowed. `$i` is parameter `i`, `pi`
/// is the constant, and `^` takes an integer literal exponent.
pub fn parse(text: &str, names: &[&str]) -> Result<ExprTree, ExprError> {
    let mut p = Parser { toks: lex(text)?, at: 0, names };
    let root = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(syntax(p.pos(), "trailing input"));
    }
    Ok(ExprTree::new(root))
}

/// Parses the canonical prefix notation produced by [`ExprTree::to_prefix`].
pub fn parse_prefix(text: &str) -> Result<ExprTree, ExprError> {
    let mut toks = Vec::new();
    let b = text.as_bytes();
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            c if c.is_ascii_whitespace() => i += 1,
            b'(' | b')' => {
                toks.push((i, &text[i..i + 1]));
                i += 1;
            }
            _ => {
                let s = i;
                while i < b.len() && !b[i].is_ascii_whitespace() && b[i] != b'(' && b[i] != b')' {
                    i += 1;
                }
                toks.push((s, &text[s..i]));
            }
        }
    }
    let mut at = 0;
    let root = prefix_node(&toks, &mut at, text.len())?;
    if at != toks.len() {
        return Err(syntax(toks[at].0, "trailing input"));
    }
    Ok(ExprTree::new(root))
}

fn prefix_node(toks: &[(usize, &str)], at: &mut usize, end: usize) -> Result<Node, ExprError> {
    let (pos, t) = *toks.get(*at).ok_or_else(|| syntax(end, "unexpected end of input"))?;
    *at += 1;
    if t == ")" {
        return Err(syntax(pos, "unexpected `)`"));
    }
    if t != "(" {
        return prefix_atom(pos, t);
    }
    let (hpos, head) = *toks.get(*at).ok_or_else(|| syntax(end, "unexpected end of input"))?;
    *at += 1;
    let node = if head == "powi" {
        let (kpos, k) = *toks.get(*at).ok_or_else(|| syntax(end, "missing exponent"))?;
        *at += 1;
        let k: i32 = k.parse().map_err(|_| syntax(kpos, "exponent must be an integer"))?;
        Node::unary(Unary::Powi(k), prefix_node(toks, at, end)?)
    } else if let Some(op) = Unary::from_name(head) {
        Node::unary(op, prefix_node(toks, at, end)?)
    } else if let Some(op) = Binary::from_name(head) {
        let a = prefix_node(toks, at, end)?;
        let b = prefix_node(toks, at, end)?;
        Node::binary(op, a, b)
    } else {
        return Err(ExprError::UnknownIdentifier { pos: hpos, name: head.to_string() });
    };
    match toks.get(*at) {
        Some((_, ")")) => {
            *at += 1;
            Ok(node)
        }
        Some((p, _)) => Err(syntax(*p, "expected `)`")),
        None => Err(syntax(end, "expected `)`")),
    }
}

fn prefix_atom(pos: usize, t: &str) -> Result<Node, ExprError> {
    if let Some(i) = t.strip_prefix('x').and_then(|s| s.parse().ok()) {
        return Ok(Node::Var(i));
    }
    if let Some(i) = t.strip_prefix('p').and_then(|s| s.parse().ok()) {
        return Ok(Node::Param(i));
    }
    t.parse::<f64>()
        .map(Node::Const)
        .map_err(|_| ExprError::UnknownIdentifier { pos, name: t.to_string() })
}
