//! Text format for nets and markings (`.rwspt`).
//!
//! ```text
//! net = [2 . p(< "s" ; 0 >), 1 . p(< "w" ; 0 >) + 1 . p(< "w" ; 1 >), nilP] |-> << "ld", 0.5 >> ;
//!       [1 . p(< "w" ; 0 >), 1 . p(< "a" ; 0 >), 1 . p(< "f" ; 0 >)] |-> << "ln", 0.1 >>
//! m0 = 2 . p(< "s" ; 0 >)
//! ```

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::multiset::Bag;
use crate::net::{Net, NetError, Pair, Place, System, Transition};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("semantic error at {line}:{col}: {msg}")]
    Semantic { line: usize, col: usize, msg: String },
}

/// A parsed file: a net and an optional initial marking.
#[derive(Debug, Clone, PartialEq)]
pub struct NetDocument {
    pub net: Net,
    pub initial_marking: Option<Bag<Place>>,
}

impl NetDocument {
    pub fn system(&self) -> System {
        System::new_unchecked(Arc::new(self.net.clone()), self.initial_marking.clone().unwrap_or_default())
    }
}

pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Shortest decimal that reads back to the same f64.
pub fn format_rate(r: f64) -> String {
    format!("{r:?}")
}

pub fn serialize_transitions_sorted(ts: &[Transition]) -> String {
    let mut rows: Vec<(&str, String)> = ts.iter().map(|t| (&*t.tag, t.to_string())).collect();
    rows.sort();
    join_rows(rows.iter().map(|(_, s)| s.as_str()))
}

fn join_rows<'a>(rows: impl Iterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for (i, r) in rows.enumerate() {
        if i > 0 {
            out.push_str(" ;\n  ");
        }
        out.push_str(r);
    }
    out
}

/// Canonical text of a system: sorted transitions, marking in bag order.
pub fn serialize_system(s: &System) -> String {
    let mut out = String::from("net =\n  ");
    out.push_str(s.net.canonical_text());
    let _ = write!(out, "\nm0 = {}\n", s.marking);
    out
}

/// Text of a document with transitions in their stored order.
pub fn serialize_document(d: &NetDocument) -> String {
    let rows: Vec<String> = d.net.transitions().iter().map(|t| t.to_string()).collect();
    let mut out = String::from("net =\n  ");
    out.push_str(&join_rows(rows.iter().map(|s| s.as_str())));
    out.push('\n');
    if let Some(m) = &d.initial_marking {
        let _ = writeln!(out, "m0 = {m}");
    }
    out
}

pub fn parse_net(text: &str) -> Result<NetDocument, ParseError> {
    let mut p = Parser::new(text)?;
    p.document()
}

/// Parses a lone bag, e.g. `2 . p(< "s" ; 0 >)` or `nilP`.
pub fn parse_bag(text: &str) -> Result<Bag<Place>, ParseError> {
    let mut p = Parser::new(text)?;
    let b = p.bag()?;
    p.expect_end()?;
    Ok(b)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(String),
    Sym(&'static str),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 13] = ["|->", "->", "<<", ">>", "=", ";", "[", "]", ",", "(", ")", "<", ">"];

struct Cursor {
    chars: Vec<char>,
    i: usize,
    line: usize,
    col: usize,
}

impl Cursor {
    fn at(&self, k: usize) -> Option<char> {
        self.chars.get(self.i + k).copied()
    }

    fn digit(&self, k: usize) -> bool {
        self.at(k).is_some_and(|c| c.is_ascii_digit())
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.at(0)?;
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn digits(&mut self) {
        while self.digit(0) {
            self.bump();
        }
    }
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor { chars: text.chars().collect(), i: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    while let Some(c) = cur.at(0) {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        let (line, col, start) = (cur.line, cur.col, cur.i);
        let err = |msg: String| ParseError::Syntax { line, col, msg };
        let tok = if c == '"' {
            cur.bump();
            let mut s = String::new();
            loop {
                match cur.bump() {
                    None => return Err(err("unterminated string".into())),
                    Some('"') => break,
                    Some('\\') => match cur.bump() {
                        Some(e @ ('"' | '\\')) => s.push(e),
                        Some(e) => return Err(err(format!("bad escape \\{e}"))),
                        None => return Err(err("unterminated string".into())),
                    },
                    Some(d) => s.push(d),
                }
            }
            Tok::Str(s)
        } else if c.is_ascii_digit() || ((c == '-' || c == '+') && cur.digit(1)) {
            cur.bump();
            cur.digits();
            // a dot belongs to the number only when a digit follows ("2 . p" is a term)
            if cur.at(0) == Some('.') && cur.digit(1) {
                cur.bump();
                cur.digits();
            }
            if matches!(cur.at(0), Some('e' | 'E')) {
                let sign = matches!(cur.at(1), Some('+' | '-')) as usize;
                if cur.digit(1 + sign) {
                    for _ in 0..=sign {
                        cur.bump();
                    }
                    cur.digits();
                }
            }
            Tok::Num(cur.chars[start..cur.i].iter().collect())
        } else if c.is_alphabetic() || c == '_' {
            while cur.at(0).is_some_and(|c| c.is_alphanumeric() || c == '_') {
                cur.bump();
            }
            Tok::Ident(cur.chars[start..cur.i].iter().collect())
        } else if c == '.' || c == '+' {
            cur.bump();
            Tok::Sym(if c == '.' { "." } else { "+" })
        } else {
            let rest: String = cur.chars[start..cur.chars.len().min(start + 3)].iter().collect();
            let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) else {
                return Err(err(format!("unexpected character {c:?}")));
            };
            for _ in 0..sym.len() {
                cur.bump();
            }
            Tok::Sym(sym)
        };
        out.push(Token { tok, line, col });
    }
    out.push(Token { tok: Tok::End, line: cur.line, col: cur.col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Parser, ParseError> {
        Ok(Parser { toks: lex(text)?, pos: 0 })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, t: &Token, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn semantic<T>(&self, t: &Token, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Semantic { line: t.line, col: t.col, msg: msg.into() })
    }

    fn describe(t: &Tok) -> String {
        match t {
            Tok::Ident(s) => s.clone(),
            Tok::Str(s) => quote(s),
            Tok::Num(s) => s.clone(),
            Tok::Sym(s) => (*s).to_string(),
            Tok::End => "end of input".into(),
        }
    }

    fn sym(&mut self, s: &'static str) -> Result<Token, ParseError> {
        let t = self.next();
        if t.tok == Tok::Sym(s) {
            Ok(t)
        } else {
            self.syntax(&t, format!("expected `{s}`, found {}", Self::describe(&t.tok)))
        }
    }

    fn keyword(&mut self, k: &str) -> Result<Token, ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if s == k => Ok(t),
            other => self.syntax(&t, format!("expected `{k}`, found {}", Self::describe(other))),
        }
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek().tok, Tok::Sym(x) if x == s)
    }

    fn at_ident(&self, k: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == k)
    }

    fn expect_end(&mut self) -> Result<(), ParseError> {
        let t = self.next();
        if t.tok == Tok::End {
            Ok(())
        } else {
            self.syntax(&t, format!("unexpected {}", Self::describe(&t.tok)))
        }
    }

    fn nat(&mut self) -> Result<u64, ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Num(s) if s.bytes().all(|b| b.is_ascii_digit()) => match s.parse::<u64>() {
                Ok(v) => Ok(v),
                Err(_) => self.semantic(&t, format!("number {s} out of range")),
            },
            other => self.syntax(&t, format!("expected natural number, found {}", Self::describe(other))),
        }
    }

    fn string(&mut self) -> Result<(String, Token), ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Str(s) => Ok((s.clone(), t.clone())),
            other => self.syntax(&t, format!("expected string, found {}", Self::describe(other))),
        }
    }

    fn document(&mut self) -> Result<NetDocument, ParseError> {
        self.keyword("net")?;
        self.sym("=")?;
        let start = self.peek().clone();
        let mut ts: Vec<(Transition, Token)> = Vec::new();
        if !(self.at_ident("m0") || self.peek().tok == Tok::End) {
            loop {
                let at = self.peek().clone();
                ts.push((self.transition()?, at));
                if self.at_sym(";") {
                    self.next();
                } else {
                    break;
                }
            }
        }
        for (i, (t, at)) in ts.iter().enumerate() {
            if ts[..i].iter().any(|(u, _)| u == t) {
                return self.semantic(at, format!("duplicate transition {t}"));
            }
        }
        let net = match Net::new(ts.into_iter().map(|(t, _)| t).collect()) {
            Ok(n) => n,
            Err(e) => return self.semantic(&start, e.to_string()),
        };
        let mut initial_marking = None;
        if self.at_ident("m0") {
            self.next();
            self.sym("=")?;
            let at = self.peek().clone();
            let m = self.bag()?;
            let places = net.places();
            if let Some(p) = m.elements().find(|p| !places.contains(*p)) {
                return self.semantic(&at, format!("marked place {p} does not occur in the net"));
            }
            initial_marking = Some(m);
        }
        self.expect_end()?;
        Ok(NetDocument { net, initial_marking })
    }

    fn transition(&mut self) -> Result<Transition, ParseError> {
        self.sym("[")?;
        let input = self.bag()?;
        self.sym(",")?;
        let output = self.bag()?;
        self.sym(",")?;
        let inhibitor = self.bag()?;
        self.sym("]")?;
        let arrow = self.next();
        if arrow.tok != Tok::Sym("|->") && arrow.tok != Tok::Sym("->") {
            return self.syntax(&arrow, format!("expected `|->`, found {}", Self::describe(&arrow.tok)));
        }
        self.sym("<<")?;
        let (tag, _) = self.string()?;
        self.sym(",")?;
        let rt = self.next();
        let rate = match &rt.tok {
            Tok::Num(s) => match s.parse::<f64>() {
                Ok(v) => v,
                Err(_) => return self.syntax(&rt, format!("bad number {s}")),
            },
            other => return self.syntax(&rt, format!("expected rate, found {}", Self::describe(other))),
        };
        self.sym(">>")?;
        match Transition::new(input, output, inhibitor, tag, rate) {
            Ok(t) => Ok(t),
            Err(NetError::BadRate(r)) => self.semantic(&rt, format!("rate must be positive, got {r}")),
            Err(e) => self.semantic(&rt, e.to_string()),
        }
    }

    fn bag(&mut self) -> Result<Bag<Place>, ParseError> {
        if self.at_ident("nilP") {
            self.next();
            return Ok(Bag::new());
        }
        let mut b = Bag::new();
        loop {
            let at = self.peek().clone();
            let k = self.nat()?;
            self.sym(".")?;
            let p = self.place()?;
            if k == 0 {
                return self.semantic(&at, "multiplicity must be positive");
            }
            if b.insert(p, k).is_err() {
                return self.semantic(&at, "multiplicity overflow");
            }
            if self.at_sym("+") {
                self.next();
            } else {
                return Ok(b);
            }
        }
    }

    fn place(&mut self) -> Result<Place, ParseError> {
        self.keyword("p")?;
        self.sym("(")?;
        let mut pairs = Vec::new();
        loop {
            self.sym("<")?;
            let (tag, at) = self.string()?;
            if tag.is_empty() {
                return self.semantic(&at, "empty tag");
            }
            self.sym(";")?;
            let it = self.peek().clone();
            let idx = self.nat()?;
            let Ok(idx) = u32::try_from(idx) else {
                return self.semantic(&it, "index out of range");
            };
            self.sym(">")?;
            pairs.push(Pair::new(tag, idx));
            if !self.at_sym("<") {
                break;
            }
        }
        self.sym(")")?;
        Ok(Place::new(pairs).expect("checked nonempty"))
    }
}
