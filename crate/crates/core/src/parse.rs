//! Text syntax for formulas, model files and formula files.
//!
//! ```text
//! theory int; colors 2; places p, q;
//! functions f/1;
//! trans t: p, q -> q : d1(x1) >= 0 & phi_id(2);
//! ```

use std::collections::HashMap;

use thiserror::Error;

use crate::formula::{colors_equal, Formula, Quant};
use crate::name::{Name, NameSupply};
use crate::sig::Signature;
use crate::theory::{ColorAtom, ColorTheory, Term, TermError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(i64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Semi,
    Colon,
    Slash,
    Bang,
    Amp,
    Bar,
    Implies,
    Iff,
    Arrow,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let bump = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            bump(1, &mut i, &mut col);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let peek = |k: usize| chars.get(i + k).copied().unwrap_or('\0');
        let (tok, n) = if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len()
                && (chars[j].is_ascii_alphanumeric() || chars[j] == '_' || chars[j] == '\'')
            {
                j += 1;
            }
            (Tok::Ident(chars[i..j].iter().collect()), j - i)
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            let v = s.parse::<i64>().map_err(|_| ParseError {
                line,
                col,
                msg: format!("integer `{s}` out of range"),
            })?;
            (Tok::Num(v), j - i)
        } else {
            match (c, peek(1), peek(2)) {
                ('<', '=', '>') => (Tok::Iff, 3),
                ('=', '>', _) => (Tok::Implies, 2),
                ('-', '>', _) => (Tok::Arrow, 2),
                ('!', '=', _) => (Tok::Neq, 2),
                ('<', '=', _) => (Tok::Le, 2),
                ('>', '=', _) => (Tok::Ge, 2),
                ('&', '&', _) => (Tok::Amp, 2),
                ('|', '|', _) => (Tok::Bar, 2),
                ('(', _, _) => (Tok::LParen, 1),
                (')', _, _) => (Tok::RParen, 1),
                ('{', _, _) => (Tok::LBrace, 1),
                ('}', _, _) => (Tok::RBrace, 1),
                (',', _, _) => (Tok::Comma, 1),
                ('.', _, _) => (Tok::Dot, 1),
                (';', _, _) => (Tok::Semi, 1),
                (':', _, _) => (Tok::Colon, 1),
                ('/', _, _) => (Tok::Slash, 1),
                ('!', _, _) | ('~', _, _) => (Tok::Bang, 1),
                ('&', _, _) => (Tok::Amp, 1),
                ('|', _, _) => (Tok::Bar, 1),
                ('=', _, _) => (Tok::Eq, 1),
                ('<', _, _) => (Tok::Lt, 1),
                ('>', _, _) => (Tok::Gt, 1),
                ('+', _, _) => (Tok::Plus, 1),
                ('-', _, _) => (Tok::Minus, 1),
                _ => {
                    return Err(ParseError {
                        line,
                        col,
                        msg: format!("unexpected character `{c}`"),
                    })
                }
            }
        };
        out.push(Spanned {
            tok,
            line: l0,
            col: c0,
        });
        bump(n, &mut i, &mut col);
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sort {
    Token,
    Color,
}

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    sig: Option<&'a Signature>,
    /// Innermost binding last: (source name, unique name, sort).
    scope: Vec<(String, Name, Sort)>,
    free_tokens: Vec<Name>,
    supply: NameSupply,
}

type PResult<T> = Result<T, ParseError>;

const KEYWORDS: &[&str] = &["true", "false", "exists", "forall", "in", "color", "trans"];

impl<'a> Parser<'a> {
    fn new(src: &str) -> PResult<Self> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            sig: None,
            scope: Vec::new(),
            free_tokens: Vec::new(),
            supply: NameSupply::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let s = &self.toks[self.pos];
        Err(ParseError {
            line: s.line,
            col: s.col,
            msg: msg.into(),
        })
    }

    fn expect(&mut self, t: Tok, what: &str) -> PResult<()> {
        if *self.peek() == t {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected {what}, found {:?}", self.peek()))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.next();
                Ok(s)
            }
            other => self.err(format!("expected {what}, found {other:?}")),
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn sig(&self) -> &'a Signature {
        self.sig.expect("signature set before formula parsing")
    }

    fn term_err<T>(&self, e: TermError) -> PResult<T> {
        self.err(e.to_string())
    }

    fn lookup(&self, name: &str) -> Option<(Name, Sort)> {
        for (src, uniq, sort) in self.scope.iter().rev() {
            if src == name {
                return Some((uniq.clone(), *sort));
            }
        }
        self.free_tokens
            .iter()
            .find(|t| t.as_str() == name)
            .map(|t| (t.clone(), Sort::Token))
    }

    // ---- formulas ----

    fn formula(&mut self) -> PResult<Formula> {
        let mut lhs = self.implication()?;
        while *self.peek() == Tok::Iff {
            self.next();
            let rhs = self.implication()?;
            // the second copies get fresh binders so every name is bound once
            let lhs2 = lhs.rename_bound(&mut self.supply);
            let rhs2 = rhs.rename_bound(&mut self.supply);
            lhs = Formula::And(vec![
                Formula::implies(lhs, rhs),
                Formula::implies(rhs2, lhs2),
            ]);
        }
        Ok(lhs)
    }

    fn implication(&mut self) -> PResult<Formula> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Implies {
            self.next();
            let rhs = self.implication()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> PResult<Formula> {
        let mut parts = vec![self.conjunction()?];
        while *self.peek() == Tok::Bar {
            self.next();
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::Or(parts)
        })
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let mut parts = vec![self.unary()?];
        while *self.peek() == Tok::Amp {
            self.next();
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::And(parts)
        })
    }

    fn unary(&mut self) -> PResult<Formula> {
        if *self.peek() == Tok::Bang {
            self.next();
            return Ok(Formula::not(self.unary()?));
        }
        if self.is_kw("exists") || self.is_kw("forall") {
            return self.quantified();
        }
        self.primary()
    }

    fn quantified(&mut self) -> PResult<Formula> {
        let q = if self.is_kw("exists") {
            Quant::Exists
        } else {
            Quant::Forall
        };
        self.next();
        let color = if self.is_kw("color") {
            self.next();
            true
        } else {
            false
        };
        // binders: `x, y in p, t in q` or `x` or `c, d` for colors
        let mut binders: Vec<(String, Option<String>)> = Vec::new();
        let mut pending: Vec<String> = Vec::new();
        loop {
            pending.push(self.ident("variable")?);
            if self.is_kw("in") {
                if color {
                    return self.err("color quantifiers cannot be place-guarded");
                }
                self.next();
                let p = self.ident("place")?;
                if !self.sig().has_place(&p) {
                    return self.err(format!("unknown place `{p}`"));
                }
                binders.extend(pending.drain(..).map(|v| (v, Some(p.clone()))));
            }
            if *self.peek() == Tok::Comma {
                self.next();
                continue;
            }
            break;
        }
        binders.extend(pending.drain(..).map(|v| (v, None)));
        self.expect(Tok::Dot, "`.` after quantifier binders")?;
        let sort = if color { Sort::Color } else { Sort::Token };
        let mut uniq = Vec::new();
        for (v, _) in &binders {
            let n = self.supply.fresh(v);
            self.scope.push((v.clone(), n.clone(), sort));
            uniq.push(n);
        }
        let body = self.formula();
        for _ in &binders {
            self.scope.pop();
        }
        let mut f = body?;
        for ((_, place), var) in binders.into_iter().zip(uniq).rev() {
            f = if color {
                Formula::Color {
                    q,
                    var,
                    body: Box::new(f),
                }
            } else {
                Formula::Token {
                    q,
                    var,
                    place: place.map(Name::from),
                    body: Box::new(f),
                }
            };
        }
        Ok(f)
    }

    fn primary(&mut self) -> PResult<Formula> {
        if self.is_kw("true") {
            self.next();
            return Ok(Formula::True);
        }
        if self.is_kw("false") {
            self.next();
            return Ok(Formula::False);
        }
        if *self.peek() == Tok::LParen {
            // could be a parenthesised formula or the start of a term
            let save = self.pos;
            let scope_len = self.scope.len();
            self.next();
            if let Ok(f) = self.formula() {
                if *self.peek() == Tok::RParen {
                    self.next();
                    if !is_term_continuation(self.peek()) {
                        return Ok(f);
                    }
                }
            }
            self.pos = save;
            self.scope.truncate(scope_len);
        }
        if let Tok::Ident(name) = self.peek().clone() {
            if name == "phi_id" && *self.peek_at(1) == Tok::LParen {
                return self.phi_id();
            }
            if *self.peek_at(1) == Tok::LParen {
                if self.sig().has_place(&name) && self.lookup(&name).is_none() {
                    self.next();
                    self.next();
                    let tok = self.token_var()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Formula::InPlace {
                        place: Name::from(name),
                        token: tok,
                    });
                }
                let is_pred = self
                    .sig()
                    .theory
                    .predicates
                    .get(name.as_str())
                    .is_some_and(|s| !s.interpreted);
                if is_pred {
                    self.next();
                    let args = self.term_args()?;
                    let atom = ColorAtom {
                        pred: Name::from(name),
                        args,
                    };
                    if let Err(e) = self.sig().theory.check_atom(&atom, self.sig().n_colors) {
                        return self.term_err(e);
                    }
                    return Ok(Formula::Pred(atom));
                }
            }
        }
        self.relation()
    }

    fn phi_id(&mut self) -> PResult<Formula> {
        self.next();
        self.expect(Tok::LParen, "`(`")?;
        let i = match self.next() {
            Tok::Num(i) if i >= 1 => i,
            _ => return self.err("phi_id expects a positive index"),
        };
        self.expect(Tok::RParen, "`)`")?;
        let (x, y) = (format!("x{i}"), format!("y{i}"));
        for v in [&x, &y] {
            if !matches!(self.lookup(v), Some((_, Sort::Token))) {
                return self.err(format!("phi_id({i}) needs token variables {x} and {y}"));
            }
        }
        Ok(colors_equal(&y, &x, self.sig().n_colors))
    }

    fn token_var(&mut self) -> PResult<Name> {
        let v = self.ident("token variable")?;
        match self.lookup(&v) {
            Some((n, Sort::Token)) => Ok(n),
            Some((_, Sort::Color)) => {
                self.err(format!("`{v}` is a color variable, expected a token"))
            }
            None => self.err(format!("unbound token variable `{v}`")),
        }
    }

    fn relation(&mut self) -> PResult<Formula> {
        let start = self.pos;
        let first = self.term()?;
        let mut chain = vec![first];
        let mut ops = Vec::new();
        while let Some(op) = relop(self.peek()) {
            self.next();
            ops.push(op);
            chain.push(self.term()?);
        }
        if ops.is_empty() {
            self.pos = start;
            return self.err("expected a formula");
        }
        let mut parts = Vec::new();
        for (i, op) in ops.iter().enumerate() {
            let (a, b) = (&chain[i], &chain[i + 1]);
            let atom = match (a, b, *op) {
                (RawTerm::TokenVar(x), RawTerm::TokenVar(y), "=") => {
                    Formula::TokenEq(x.clone(), y.clone())
                }
                (RawTerm::TokenVar(x), RawTerm::TokenVar(y), "!=") => {
                    Formula::not(Formula::TokenEq(x.clone(), y.clone()))
                }
                (RawTerm::TokenVar(x), _, _) | (_, RawTerm::TokenVar(x), _) => {
                    return self.err(format!("token `{x}` used as a color; write dK({x})"));
                }
                (RawTerm::Color(ta), RawTerm::Color(tb), op) => {
                    let (pred, neg) = if op == "!=" { ("=", true) } else { (op, false) };
                    let atom = ColorAtom::new(pred, vec![ta.clone(), tb.clone()]);
                    if let Err(e) = self.sig().theory.check_atom(&atom, self.sig().n_colors) {
                        return self.term_err(e);
                    }
                    if neg {
                        Formula::not(Formula::Pred(atom))
                    } else {
                        Formula::Pred(atom)
                    }
                }
            };
            parts.push(atom);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::And(parts)
        })
    }

    fn term(&mut self) -> PResult<RawTerm> {
        let first = self.term_prim()?;
        if !matches!(self.peek(), Tok::Plus | Tok::Minus) {
            return Ok(first);
        }
        let mut acc = self.as_color(first)?;
        while let Tok::Plus | Tok::Minus = self.peek() {
            let op = if *self.peek() == Tok::Plus { "+" } else { "-" };
            self.next();
            let rhs = self.term_prim()?;
            let rhs = self.as_color(rhs)?;
            acc = Term::app(op, vec![acc, rhs]);
            if let Err(e) = self.sig().theory.check_term(&acc, self.sig().n_colors) {
                return self.term_err(e);
            }
        }
        Ok(RawTerm::Color(acc))
    }

    fn as_color(&self, t: RawTerm) -> PResult<Term> {
        match t {
            RawTerm::Color(t) => Ok(t),
            RawTerm::TokenVar(x) => self.err(format!("token `{x}` used as a color; write dK({x})")),
        }
    }

    fn term_prim(&mut self) -> PResult<RawTerm> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.next();
                Ok(RawTerm::Color(Term::Lit(n)))
            }
            Tok::Minus => {
                self.next();
                if let Tok::Num(n) = self.peek().clone() {
                    self.next();
                    return Ok(RawTerm::Color(Term::Lit(-n)));
                }
                let inner = self.term_prim()?;
                let inner = self.as_color(inner)?;
                let t = Term::app("-", vec![inner]);
                if let Err(e) = self.sig().theory.check_term(&t, self.sig().n_colors) {
                    return self.term_err(e);
                }
                Ok(RawTerm::Color(t))
            }
            Tok::LParen => {
                self.next();
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.next();
                if *self.peek() == Tok::LParen {
                    if let Some(k) = color_index(&name) {
                        self.next();
                        let tok = self.token_var()?;
                        self.expect(Tok::RParen, "`)`")?;
                        let t = Term::Color {
                            index: k,
                            token: tok,
                        };
                        if let Err(e) = self.sig().theory.check_term(&t, self.sig().n_colors) {
                            return self.term_err(e);
                        }
                        return Ok(RawTerm::Color(t));
                    }
                    let args = self.term_args()?;
                    let t = Term::App(Name::from(name), args);
                    if let Err(e) = self.sig().theory.check_term(&t, self.sig().n_colors) {
                        return self.term_err(e);
                    }
                    return Ok(RawTerm::Color(t));
                }
                match self.lookup(&name) {
                    Some((n, Sort::Token)) => Ok(RawTerm::TokenVar(n)),
                    Some((n, Sort::Color)) => Ok(RawTerm::Color(Term::Var(n))),
                    None => {
                        if self
                            .sig()
                            .theory
                            .functions
                            .get(name.as_str())
                            .is_some_and(|s| s.arity == 0)
                        {
                            Ok(RawTerm::Color(Term::App(Name::from(name), vec![])))
                        } else {
                            self.err(format!("unbound variable `{name}`"))
                        }
                    }
                }
            }
            other => self.err(format!("expected a term, found {other:?}")),
        }
    }

    fn term_args(&mut self) -> PResult<Vec<Term>> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let t = self.term()?;
                args.push(self.as_color(t)?);
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(args)
    }
}

enum RawTerm {
    TokenVar(Name),
    Color(Term),
}

fn relop(t: &Tok) -> Option<&'static str> {
    Some(match t {
        Tok::Eq => "=",
        Tok::Neq => "!=",
        Tok::Lt => "<",
        Tok::Le => "<=",
        Tok::Gt => ">",
        Tok::Ge => ">=",
        _ => return None,
    })
}

fn is_term_continuation(t: &Tok) -> bool {
    relop(t).is_some() || matches!(t, Tok::Plus | Tok::Minus)
}

fn color_index(name: &str) -> Option<usize> {
    let rest = name.strip_prefix('d')?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

/// Parse a closed formula.
pub fn parse_formula(text: &str, sig: &Signature) -> Result<Formula, ParseError> {
    parse_open_formula(text, sig, &[])
}

/// Parse a formula whose free token variables are exactly drawn from `free_tokens`.
pub fn parse_open_formula(
    text: &str,
    sig: &Signature,
    free_tokens: &[Name],
) -> Result<Formula, ParseError> {
    let mut p = Parser::new(text)?;
    p.sig = Some(sig);
    p.free_tokens = free_tokens.to_vec();
    p.supply.reserve_all(free_tokens);
    let f = p.formula()?;
    if *p.peek() == Tok::Semi {
        p.next();
    }
    if *p.peek() != Tok::Eof {
        return p.err(format!("trailing input {:?}", p.peek()));
    }
    Ok(f)
}

/// Header-level items shared by model and formula files.
#[derive(Debug, Clone, Default)]
struct Header {
    theory: Option<String>,
    colors: Option<usize>,
    places: Option<Vec<Name>>,
    functions: Vec<(String, usize)>,
    predicates: Vec<(String, usize)>,
}

/// A transition as written, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTransition {
    pub name: Name,
    pub lhs: Vec<Name>,
    pub rhs: Vec<Name>,
    pub guard: Formula,
}

#[derive(Debug, Clone)]
pub struct ModelText {
    pub signature: Signature,
    pub transitions: Vec<RawTransition>,
}

fn header_item(p: &mut Parser, h: &mut Header) -> PResult<bool> {
    let kw = match p.peek() {
        Tok::Ident(s) => s.clone(),
        _ => return Ok(false),
    };
    match kw.as_str() {
        "theory" => {
            p.next();
            // theory names may carry a parenthesised value list: enum(0, 1, 2)
            let mut s = p.ident("theory name")?;
            if *p.peek() == Tok::LParen {
                p.next();
                let mut vals = Vec::new();
                loop {
                    let neg = if *p.peek() == Tok::Minus {
                        p.next();
                        true
                    } else {
                        false
                    };
                    match p.next() {
                        Tok::Num(n) => vals.push(if neg { -n } else { n }),
                        _ => return p.err("expected integer in theory value list"),
                    }
                    if *p.peek() == Tok::Comma {
                        p.next();
                    } else {
                        break;
                    }
                }
                p.expect(Tok::RParen, "`)`")?;
                s = format!(
                    "{s}({})",
                    vals.iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                );
            }
            h.theory = Some(s);
        }
        "colors" => {
            p.next();
            match p.next() {
                Tok::Num(n) if n >= 0 => h.colors = Some(n as usize),
                _ => return p.err("expected color count"),
            }
        }
        "places" => {
            p.next();
            let mut ps = Vec::new();
            loop {
                let name = p.ident("place name")?;
                if ps.iter().any(|q: &Name| q.as_str() == name) {
                    return p.err(format!("duplicate place `{name}`"));
                }
                ps.push(Name::from(name));
                if *p.peek() == Tok::Comma {
                    p.next();
                } else {
                    break;
                }
            }
            h.places = Some(ps);
        }
        "functions" | "predicates" => {
            p.next();
            loop {
                let name = p.ident("symbol name")?;
                p.expect(Tok::Slash, "`/arity`")?;
                let arity = match p.next() {
                    Tok::Num(n) if n >= 0 => n as usize,
                    _ => return p.err("expected arity"),
                };
                if kw == "functions" {
                    h.functions.push((name, arity));
                } else {
                    h.predicates.push((name, arity));
                }
                if *p.peek() == Tok::Comma {
                    p.next();
                } else {
                    break;
                }
            }
        }
        _ => return Ok(false),
    }
    p.expect(Tok::Semi, "`;`")?;
    Ok(true)
}

fn build_signature(p: &Parser, h: &Header) -> PResult<Signature> {
    let theory_name = h.theory.clone().unwrap_or_else(|| "int".to_string());
    let mut theory = match ColorTheory::by_name(&theory_name) {
        Ok(t) => t,
        Err(e) => return p.err(e.to_string()),
    };
    for (f, a) in &h.functions {
        if let Err(e) = theory.declare_function(f, *a) {
            return p.err(e.to_string());
        }
    }
    for (r, a) in &h.predicates {
        if let Err(e) = theory.declare_predicate(r, *a) {
            return p.err(e.to_string());
        }
    }
    let Some(places) = h.places.clone() else {
        return p.err("missing `places` declaration");
    };
    Ok(Signature {
        theory,
        places,
        n_colors: h.colors.unwrap_or(1),
    })
}

fn place_list(p: &mut Parser, sig: &Signature, stop: &Tok) -> PResult<Vec<Name>> {
    let mut out = Vec::new();
    if p.peek() == stop || *p.peek() == Tok::Semi {
        return Ok(out);
    }
    loop {
        let name = p.ident("place")?;
        if !sig.has_place(&name) {
            return p.err(format!("unknown place `{name}`"));
        }
        out.push(Name::from(name));
        if *p.peek() == Tok::Comma {
            p.next();
        } else {
            break;
        }
    }
    Ok(out)
}

/// Parse a model file: header followed by `trans` declarations.
pub fn parse_model_text(text: &str) -> Result<ModelText, ParseError> {
    let mut p = Parser::new(text)?;
    let mut h = Header::default();
    while header_item(&mut p, &mut h)? {}
    let sig = build_signature(&p, &h)?;
    let mut transitions = Vec::new();
    while p.is_kw("trans") {
        p.next();
        let name = p.ident("transition name")?;
        if transitions
            .iter()
            .any(|t: &RawTransition| t.name.as_str() == name)
        {
            return p.err(format!("duplicate transition `{name}`"));
        }
        p.expect(Tok::Colon, "`:`")?;
        let lhs = place_list(&mut p, &sig, &Tok::Arrow)?;
        p.expect(Tok::Arrow, "`->`")?;
        let rhs = place_list(&mut p, &sig, &Tok::Colon)?;
        let guard = if *p.peek() == Tok::Colon {
            p.next();
            let free: Vec<Name> = (1..=lhs.len())
                .map(|i| Name::from(format!("x{i}")))
                .chain((1..=rhs.len()).map(|j| Name::from(format!("y{j}"))))
                .collect();
            p.sig = Some(&sig);
            p.free_tokens = free.clone();
            p.scope.clear();
            p.supply = NameSupply::new();
            p.supply.reserve_all(&free);
            let g = p.formula()?;
            p.sig = None;
            g
        } else {
            Formula::True
        };
        p.expect(Tok::Semi, "`;` after transition")?;
        transitions.push(RawTransition {
            name: Name::from(name),
            lhs,
            rhs,
            guard,
        });
    }
    if *p.peek() != Tok::Eof {
        return p.err(format!(
            "expected `trans` or end of file, found {:?}",
            p.peek()
        ));
    }
    Ok(ModelText {
        signature: sig,
        transitions,
    })
}

/// A formula file: optional header, then one closed formula. Without a
/// header the caller's signature is used; without either, the signature is
/// inferred (theory `int`, places and color count read off the text).
pub fn parse_formula_file(
    text: &str,
    fallback: Option<&Signature>,
) -> Result<(Signature, Formula), ParseError> {
    let mut p = Parser::new(text)?;
    let mut h = Header::default();
    let mut any = false;
    while header_item(&mut p, &mut h)? {
        any = true;
    }
    let body_start = p.pos;
    let sig = if any {
        let mut merged = h.clone();
        if merged.places.is_none() {
            if let Some(fb) = fallback {
                merged.places = Some(fb.places.clone());
                merged.colors = merged.colors.or(Some(fb.n_colors));
            }
        }
        build_signature(&p, &merged)?
    } else if let Some(fb) = fallback {
        fb.clone()
    } else {
        infer_signature(&p.toks[body_start..])
    };
    // re-lex the body with the final signature
    let rest_offset = {
        let s = &p.toks[body_start];
        offset_of(text, s.line, s.col)
    };
    let body = &text[rest_offset..];
    let f = parse_formula(body, &sig).map_err(|mut e| {
        let s = &p.toks[body_start];
        if e.line == 1 {
            e.col += s.col - 1;
        }
        e.line += s.line - 1;
        e
    })?;
    Ok((sig, f))
}

fn offset_of(text: &str, line: usize, col: usize) -> usize {
    let mut l = 1;
    let mut c = 1;
    for (i, ch) in text.char_indices() {
        if l == line && c == col {
            return i;
        }
        if ch == '\n' {
            l += 1;
            c = 1;
        } else {
            c += 1;
        }
    }
    text.len()
}

// Identifiers applied to a single bare identifier and not used as dK are
// taken to be places.
fn infer_signature(toks: &[Spanned]) -> Signature {
    let mut places: Vec<Name> = Vec::new();
    let mut n_colors = 1;
    for w in toks.windows(4) {
        if let (Tok::Ident(f), Tok::LParen, Tok::Ident(_), Tok::RParen) =
            (&w[0].tok, &w[1].tok, &w[2].tok, &w[3].tok)
        {
            if let Some(k) = color_index(f) {
                n_colors = n_colors.max(k);
            } else if f != "phi_id" && !places.iter().any(|p| p.as_str() == f) {
                places.push(Name::from(f.clone()));
            }
        }
    }
    for w in toks.windows(2) {
        if let (Tok::Ident(kw), Tok::Ident(p)) = (&w[0].tok, &w[1].tok) {
            if kw == "in" && !places.iter().any(|q| q.as_str() == p) {
                places.push(Name::from(p.clone()));
            }
        }
    }
    Signature {
        theory: ColorTheory::int(),
        places,
        n_colors,
    }
}

/// How often each bound name is bound; the parser keeps every count at 1.
pub fn binder_names(f: &Formula) -> HashMap<Name, usize> {
    let mut m = HashMap::new();
    f.visit(&mut |g| {
        if let Formula::Token { var, .. } | Formula::Color { var, .. } = g {
            *m.entry(var.clone()).or_insert(0) += 1;
        }
    });
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig() -> Signature {
        let mut t = ColorTheory::int();
        t.declare_function("f", 1).unwrap();
        Signature::new(t, &["p", "q", "r"], 2)
    }

    #[test]
    fn guarded_quantifiers_and_atoms() {
        let f = parse_formula("forall x, y in p . x = y", &sig()).unwrap();
        assert_eq!(
            f,
            Formula::forall_in(
                "x",
                "p",
                Formula::forall_in("y", "p", Formula::teq("x", "y"))
            )
        );
        let g = parse_formula("exists x . p(x) & d1(x) <= f(d2(x)) + 1", &sig()).unwrap();
        match g {
            Formula::Token {
                q: Quant::Exists,
                place: None,
                ..
            } => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn binders_are_made_unique() {
        let f = parse_formula("(exists x in p . true) & exists x in q . true", &sig()).unwrap();
        let names = binder_names(&f);
        assert_eq!(names.len(), 2);
        assert!(names.values().all(|&c| c == 1));
    }

    #[test]
    fn mixed_binder_groups() {
        let f = parse_formula("forall a in r, t in q . d2(a) = f(d1(t))", &sig()).unwrap();
        assert_eq!(
            f,
            Formula::forall_in(
                "a",
                "r",
                Formula::forall_in(
                    "t",
                    "q",
                    Formula::pred(
                        "=",
                        vec![
                            Term::color(2, "a"),
                            Term::app("f", vec![Term::color(1, "t")])
                        ]
                    )
                )
            )
        );
    }

    #[test]
    fn parenthesised_terms_and_formulas() {
        assert!(parse_formula("forall x in p . (d1(x) + 1) <= 3", &sig()).is_ok());
        assert!(parse_formula("forall x in p . (d1(x) <= 3)", &sig()).is_ok());
        assert!(parse_formula("exists color c . (c = -1 | c > 2) => c != 0", &sig()).is_ok());
    }

    #[test]
    fn chains_become_conjunctions() {
        let f = parse_formula("exists x, y, z in p . d1(x) <= d1(z) <= d1(y)", &sig()).unwrap();
        let mut ands = 0;
        f.visit(&mut |g| {
            if let Formula::And(v) = g {
                ands += v.len();
            }
        });
        assert_eq!(ands, 2);
    }

    #[test]
    fn errors_have_positions() {
        let e = parse_formula("exists x in nowhere . true", &sig()).unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.msg.contains("nowhere"));
        assert!(parse_formula("exists x in p . d3(x) = 0", &sig()).is_err());
        assert!(parse_formula("exists x in p . x = 0", &sig()).is_err());
        assert!(parse_formula("y = y", &sig()).is_err());
        assert!(parse_formula("exists x in p . g(d1(x)) = 0", &sig()).is_err());
    }

    #[test]
    fn model_file() {
        let src = "# demo\ntheory int; colors 1; places p, q;\nfunctions f/1;\n\
                   trans t: p -> q : d1(y1) = f(d1(x1));\ntrans u: p, p -> ;\n";
        let m = parse_model_text(src).unwrap();
        assert_eq!(m.transitions.len(), 2);
        assert_eq!(m.transitions[1].guard, Formula::True);
        assert_eq!(m.transitions[0].guard.free_vars().tokens.len(), 2);
        assert!(parse_model_text("places p; trans t: p -> q;").is_err());
    }

    #[test]
    fn phi_id_macro() {
        let src = "colors 2; places p; trans t: p -> p : phi_id(1);";
        let m = parse_model_text(src).unwrap();
        assert_eq!(m.transitions[0].guard, colors_equal("y1", "x1", 2));
    }

    #[test]
    fn formula_file_inference() {
        let (s, f) = parse_formula_file("exists x . p(x) & d2(x) = 0", None).unwrap();
        assert_eq!(s.n_colors, 2);
        assert!(s.has_place("p"));
        assert!(f.is_closed());
        let (s2, _) =
            parse_formula_file("theory enum; places a, b;\nexists x in a . true", None).unwrap();
        assert!(s2.theory.finite_values().is_some());
        let e = parse_formula_file("places a;\n\nexists x in b . true", None).unwrap_err();
        assert_eq!(e.line, 3);
    }
}
