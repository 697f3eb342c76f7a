//! Concrete markings and direct formula evaluation.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::formula::{Formula, Quant};
use crate::name::Name;
use crate::theory::{Color, ColorTheory, Term};

pub type TokenId = u32;

/// A marking with finite support. Tokens outside the support sit in no
/// place and carry `default_colors`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ConcreteMarking {
    pub support: BTreeMap<TokenId, (Name, Vec<Color>)>,
    pub default_colors: Vec<Color>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("cannot evaluate: {0}")]
    Unsupported(String),
    #[error("unbound variable `{0}`")]
    Unbound(Name),
}

type Func = Arc<dyn Fn(&[Color]) -> Color + Send + Sync>;
type Rel = Arc<dyn Fn(&[Color]) -> bool + Send + Sync>;

/// Meanings for uninterpreted symbols.
#[derive(Clone, Default)]
pub struct Interpretation {
    funcs: HashMap<Name, Func>,
    preds: HashMap<Name, Rel>,
}

impl fmt::Debug for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Interpretation")
            .field("funcs", &self.funcs.keys().collect::<Vec<_>>())
            .field("preds", &self.preds.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Interpretation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_function(
        mut self,
        name: &str,
        f: impl Fn(&[Color]) -> Color + Send + Sync + 'static,
    ) -> Self {
        self.funcs.insert(Name::new(name), Arc::new(f));
        self
    }

    pub fn with_predicate(
        mut self,
        name: &str,
        r: impl Fn(&[Color]) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.preds.insert(Name::new(name), Arc::new(r));
        self
    }
}

impl ConcreteMarking {
    pub fn new(n_colors: usize) -> Self {
        ConcreteMarking {
            support: BTreeMap::new(),
            default_colors: vec![0; n_colors],
        }
    }

    /// Build from `(place, colors)` pairs; ids are assigned 0, 1, ...
    pub fn from_tokens(n_colors: usize, tokens: &[(&str, Vec<Color>)]) -> Self {
        let mut m = Self::new(n_colors);
        for (i, (p, c)) in tokens.iter().enumerate() {
            m.support.insert(i as TokenId, (Name::new(p), c.clone()));
        }
        m
    }

    pub fn place_of(&self, t: TokenId) -> Option<&Name> {
        self.support.get(&t).map(|(p, _)| p)
    }

    pub fn colors_of(&self, t: TokenId) -> &[Color] {
        self.support
            .get(&t)
            .map(|(_, c)| c.as_slice())
            .unwrap_or(&self.default_colors)
    }

    pub fn tokens_in<'a>(&'a self, place: &'a Name) -> impl Iterator<Item = TokenId> + 'a {
        self.support
            .iter()
            .filter(move |(_, (p, _))| p == place)
            .map(|(t, _)| *t)
    }

    pub fn count_in(&self, place: &str) -> usize {
        self.support
            .values()
            .filter(|(p, _)| p.as_str() == place)
            .count()
    }

    /// Smallest ids not in the support.
    pub fn fresh_ids(&self, n: usize) -> Vec<TokenId> {
        let mut out = Vec::with_capacity(n);
        let mut i: TokenId = 0;
        while out.len() < n {
            if !self.support.contains_key(&i) {
                out.push(i);
            }
            i += 1;
        }
        out
    }

    /// The support as a sorted multiset, forgetting token identities.
    pub fn shape(&self) -> Vec<(Name, Vec<Color>)> {
        let mut v: Vec<_> = self.support.values().cloned().collect();
        v.sort();
        v
    }

    /// Same shape with ids renumbered 0.. in shape order.
    pub fn canonical(&self) -> ConcreteMarking {
        let mut m = ConcreteMarking {
            support: BTreeMap::new(),
            default_colors: self.default_colors.clone(),
        };
        for (i, tok) in self.shape().into_iter().enumerate() {
            m.support.insert(i as TokenId, tok);
        }
        m
    }
}

impl fmt::Display for ConcreteMarking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (t, (p, c))) in self.support.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            let cs: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            write!(f, "#{t}@{p}({})", cs.join(","))?;
        }
        write!(f, "}}")
    }
}

/// Values for free variables, plus colors for tokens outside the support
/// that differ from the default.
#[derive(Debug, Clone, Default)]
pub struct Valuation {
    pub tokens: Vec<(Name, TokenId)>,
    pub colors: Vec<(Name, Color)>,
    pub overrides: HashMap<TokenId, Vec<Color>>,
}

impl Valuation {
    pub fn token(&self, n: &Name) -> Option<TokenId> {
        self.tokens
            .iter()
            .rev()
            .find(|(m, _)| m == n)
            .map(|(_, t)| *t)
    }

    pub fn color(&self, n: &Name) -> Option<Color> {
        self.colors
            .iter()
            .rev()
            .find(|(m, _)| m == n)
            .map(|(_, c)| *c)
    }
}

pub struct Evaluator<'a> {
    pub marking: &'a ConcreteMarking,
    pub theory: &'a ColorTheory,
    pub interp: &'a Interpretation,
    /// Range of color quantifiers when the theory's domain is infinite.
    pub domain: Option<&'a [Color]>,
    outside: Vec<TokenId>,
}

/// Truth value of a closed formula.
pub fn evaluate(m: &ConcreteMarking, f: &Formula, theory: &ColorTheory) -> Result<bool, EvalError> {
    let interp = Interpretation::new();
    evaluate_with(m, f, theory, &interp, &mut Valuation::default())
}

pub fn evaluate_with(
    m: &ConcreteMarking,
    f: &Formula,
    theory: &ColorTheory,
    interp: &Interpretation,
    val: &mut Valuation,
) -> Result<bool, EvalError> {
    evaluate_bounded(m, f, theory, interp, val, None)
}

/// Like `evaluate_with`, with color quantifiers ranging over `domain`
/// instead of the theory's own domain.
pub fn evaluate_bounded(
    m: &ConcreteMarking,
    f: &Formula,
    theory: &ColorTheory,
    interp: &Interpretation,
    val: &mut Valuation,
    domain: Option<&[Color]>,
) -> Result<bool, EvalError> {
    // enough anonymous outside tokens for every token variable at once
    let mut n = 0;
    f.visit(&mut |g| {
        if let Formula::Token { place: None, .. } = g {
            n += 1;
        }
    });
    let mut outside = Vec::new();
    let mut i: TokenId = 0;
    while outside.len() < n {
        if !m.support.contains_key(&i)
            && !val.tokens.iter().any(|(_, t)| *t == i)
            && !val.overrides.contains_key(&i)
        {
            outside.push(i);
        }
        i += 1;
    }
    let ev = Evaluator {
        marking: m,
        theory,
        interp,
        domain,
        outside,
    };
    ev.eval(f, val)
}

impl<'a> Evaluator<'a> {
    fn token(&self, val: &Valuation, n: &Name) -> Result<TokenId, EvalError> {
        val.token(n).ok_or_else(|| EvalError::Unbound(n.clone()))
    }

    fn colors<'b>(&'b self, val: &'b Valuation, t: TokenId) -> &'b [Color] {
        if let Some(c) = val.overrides.get(&t) {
            if !self.marking.support.contains_key(&t) {
                return c;
            }
        }
        self.marking.colors_of(t)
    }

    fn term(&self, t: &Term, val: &Valuation) -> Result<Color, EvalError> {
        Ok(match t {
            Term::Lit(c) => *c,
            Term::Var(v) => val.color(v).ok_or_else(|| EvalError::Unbound(v.clone()))?,
            Term::Color { index, token } => {
                let id = self.token(val, token)?;
                let cs = self.colors(val, id);
                *cs.get(index - 1)
                    .ok_or_else(|| EvalError::Unsupported(format!("color index {index}")))?
            }
            Term::App(g, args) => {
                let vals: Vec<Color> = args
                    .iter()
                    .map(|a| self.term(a, val))
                    .collect::<Result<_, _>>()?;
                match (g.as_str(), vals.as_slice()) {
                    ("+", [a, b]) => a.wrapping_add(*b),
                    ("-", [a, b]) => a.wrapping_sub(*b),
                    ("-", [a]) => a.wrapping_neg(),
                    _ => match self.interp.funcs.get(g) {
                        Some(f) => f(&vals),
                        None => {
                            return Err(EvalError::Unsupported(format!(
                                "no interpretation for `{g}`"
                            )))
                        }
                    },
                }
            }
        })
    }

    pub fn eval(&self, f: &Formula, val: &mut Valuation) -> Result<bool, EvalError> {
        Ok(match f {
            Formula::True => true,
            Formula::False => false,
            Formula::TokenEq(a, b) => self.token(val, a)? == self.token(val, b)?,
            Formula::InPlace { place, token } => {
                let t = self.token(val, token)?;
                self.marking.place_of(t) == Some(place)
            }
            Formula::Pred(a) => {
                let args: Vec<Color> = a
                    .args
                    .iter()
                    .map(|t| self.term(t, val))
                    .collect::<Result<_, _>>()?;
                match (a.pred.as_str(), args.as_slice()) {
                    ("=", [x, y]) => x == y,
                    ("<", [x, y]) => x < y,
                    ("<=", [x, y]) => x <= y,
                    (">", [x, y]) => x > y,
                    (">=", [x, y]) => x >= y,
                    _ => match self.interp.preds.get(&a.pred) {
                        Some(r) => r(&args),
                        None => {
                            return Err(EvalError::Unsupported(format!(
                                "no interpretation for `{}`",
                                a.pred
                            )))
                        }
                    },
                }
            }
            Formula::Not(b) => !self.eval(b, val)?,
            Formula::And(v) => {
                for c in v {
                    if !self.eval(c, val)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Or(v) => {
                for c in v {
                    if self.eval(c, val)? {
                        return Ok(true);
                    }
                }
                false
            }
            Formula::Token {
                q,
                var,
                place,
                body,
            } => {
                let candidates: Vec<TokenId> = match place {
                    Some(p) => self.marking.tokens_in(p).collect(),
                    None => {
                        // every support token, every valued outside token, and
                        // enough anonymous outside tokens
                        let mut v: Vec<TokenId> = self.marking.support.keys().copied().collect();
                        for (_, t) in &val.tokens {
                            if !v.contains(t) {
                                v.push(*t);
                            }
                        }
                        for t in val.overrides.keys() {
                            if !v.contains(t) {
                                v.push(*t);
                            }
                        }
                        v.extend(self.outside.iter().copied());
                        v
                    }
                };
                let want = *q == Quant::Exists;
                for t in candidates {
                    val.tokens.push((var.clone(), t));
                    let r = self.eval(body, val);
                    val.tokens.pop();
                    if r? == want {
                        return Ok(want);
                    }
                }
                !want
            }
            Formula::Color { q, var, body } => {
                let dom = self
                    .domain
                    .or_else(|| self.theory.finite_values())
                    .ok_or_else(|| {
                        EvalError::Unsupported("color quantifier over an infinite domain".into())
                    })?;
                let want = *q == Quant::Exists;
                for &c in dom {
                    val.colors.push((var.clone(), c));
                    let r = self.eval(body, val);
                    val.colors.pop();
                    if r? == want {
                        return Ok(want);
                    }
                }
                !want
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_formula;
    use crate::sig::Signature;

    fn sig() -> Signature {
        Signature::new(ColorTheory::finite_enum(vec![0, 1, 2]), &["p", "q"], 1)
    }

    fn ev(m: &ConcreteMarking, s: &str) -> bool {
        evaluate(m, &parse_formula(s, &sig()).unwrap(), &sig().theory).unwrap()
    }

    #[test]
    fn guarded_and_unguarded() {
        let m = ConcreteMarking::from_tokens(1, &[("p", vec![1]), ("p", vec![2]), ("q", vec![0])]);
        assert!(ev(&m, "exists x in p . d1(x) = 2"));
        assert!(!ev(&m, "forall x, y in p . x = y"));
        assert!(ev(&m, "exists x . q(x) & d1(x) = 0"));
        // outside tokens exist even when every place is empty
        let empty = ConcreteMarking::new(1);
        assert!(ev(&empty, "exists x . !p(x) & !q(x)"));
        assert!(ev(&empty, "forall x in p . false"));
        assert!(!ev(&empty, "exists x in p . true"));
        // two distinct outside tokens are available
        assert!(ev(&empty, "exists x . exists y . x != y"));
    }

    #[test]
    fn color_quantifiers_need_finite_domain() {
        let m = ConcreteMarking::from_tokens(1, &[("p", vec![1])]);
        assert!(ev(&m, "exists color c . forall x in p . d1(x) > c"));
        assert!(!ev(&m, "forall color c . exists x in p . d1(x) = c"));
        let int_sig = Signature::new(ColorTheory::int(), &["p"], 1);
        let f = parse_formula("exists color c . c = 0", &int_sig).unwrap();
        assert!(evaluate(&m, &f, &int_sig.theory).is_err());
    }

    #[test]
    fn interpretations() {
        let mut th = ColorTheory::int();
        th.declare_function("f", 1).unwrap();
        let s = Signature {
            theory: th.clone(),
            places: vec![Name::new("p")],
            n_colors: 1,
        };
        let m = ConcreteMarking::from_tokens(1, &[("p", vec![4])]);
        let f = parse_formula("exists x in p . f(d1(x)) = 5", &s).unwrap();
        let i = Interpretation::new().with_function("f", |a| a[0] + 1);
        assert!(evaluate_with(&m, &f, &th, &i, &mut Valuation::default()).unwrap());
        assert!(evaluate(&m, &f, &th).is_err());
    }

    #[test]
    fn canonical_forgets_ids() {
        let mut a = ConcreteMarking::new(1);
        a.support.insert(7, (Name::new("q"), vec![0]));
        a.support.insert(3, (Name::new("p"), vec![1]));
        let b = ConcreteMarking::from_tokens(1, &[("p", vec![1]), ("q", vec![0])]);
        assert_eq!(a.canonical(), b.canonical());
        assert_eq!(a.fresh_ids(2), vec![0, 1]);
    }
}
