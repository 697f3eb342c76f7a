//! Formulas over tokens and colors.

use std::collections::{BTreeSet, HashMap};

use crate::name::{Name, NameSupply};
use crate::theory::{ColorAtom, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quant {
    Exists,
    Forall,
}

impl Quant {
    pub fn dual(self) -> Quant {
        match self {
            Quant::Exists => Quant::Forall,
            Quant::Forall => Quant::Exists,
        }
    }
}

/// `And`/`Or` are n-ary and universal quantifiers are kept explicit;
/// `=>`, `<=>` and friends are desugared by the parser.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    /// Token equality.
    TokenEq(Name, Name),
    /// Place atom `p(x)`.
    InPlace {
        place: Name,
        token: Name,
    },
    Pred(ColorAtom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    /// Token quantifier, optionally guarded by a place.
    Token {
        q: Quant,
        var: Name,
        place: Option<Name>,
        body: Box<Formula>,
    },
    /// Color quantifier.
    Color {
        q: Quant,
        var: Name,
        body: Box<Formula>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FreeVars {
    pub tokens: BTreeSet<Name>,
    pub colors: BTreeSet<Name>,
}

impl FreeVars {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty() && self.colors.is_empty()
    }
}

impl Formula {
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(fs: Vec<Formula>) -> Formula {
        Formula::And(fs)
    }

    pub fn or(fs: Vec<Formula>) -> Formula {
        Formula::Or(fs)
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Or(vec![Formula::not(a), b])
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::And(vec![
            Formula::implies(a.clone(), b.clone()),
            Formula::implies(b, a),
        ])
    }

    pub fn teq(a: &str, b: &str) -> Formula {
        Formula::TokenEq(Name::new(a), Name::new(b))
    }

    pub fn in_place(p: &str, x: &str) -> Formula {
        Formula::InPlace {
            place: Name::new(p),
            token: Name::new(x),
        }
    }

    pub fn pred(p: &str, args: Vec<Term>) -> Formula {
        Formula::Pred(ColorAtom::new(p, args))
    }

    pub fn exists_in(x: &str, p: &str, body: Formula) -> Formula {
        Formula::Token {
            q: Quant::Exists,
            var: Name::new(x),
            place: Some(Name::new(p)),
            body: Box::new(body),
        }
    }

    pub fn forall_in(x: &str, p: &str, body: Formula) -> Formula {
        Formula::Token {
            q: Quant::Forall,
            var: Name::new(x),
            place: Some(Name::new(p)),
            body: Box::new(body),
        }
    }

    pub fn exists_token(x: &str, body: Formula) -> Formula {
        Formula::Token {
            q: Quant::Exists,
            var: Name::new(x),
            place: None,
            body: Box::new(body),
        }
    }

    pub fn forall_token(x: &str, body: Formula) -> Formula {
        Formula::Token {
            q: Quant::Forall,
            var: Name::new(x),
            place: None,
            body: Box::new(body),
        }
    }

    pub fn exists_color(c: &str, body: Formula) -> Formula {
        Formula::Color {
            q: Quant::Exists,
            var: Name::new(c),
            body: Box::new(body),
        }
    }

    pub fn forall_color(c: &str, body: Formula) -> Formula {
        Formula::Color {
            q: Quant::Forall,
            var: Name::new(c),
            body: Box::new(body),
        }
    }

    pub fn is_literal(&self) -> bool {
        match self {
            Formula::True
            | Formula::False
            | Formula::TokenEq(..)
            | Formula::InPlace { .. }
            | Formula::Pred(_) => true,
            Formula::Not(inner) => inner.is_literal(),
            _ => false,
        }
    }

    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::Not(b) => vec![b],
            Formula::And(v) | Formula::Or(v) => v.iter().collect(),
            Formula::Token { body, .. } | Formula::Color { body, .. } => vec![body],
            _ => vec![],
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn has_token_quantifier(&self) -> bool {
        match self {
            Formula::Token { .. } => true,
            _ => self.children().iter().any(|c| c.has_token_quantifier()),
        }
    }

    pub fn has_quantifier(&self) -> bool {
        match self {
            Formula::Token { .. } | Formula::Color { .. } => true,
            _ => self.children().iter().any(|c| c.has_quantifier()),
        }
    }

    pub fn free_vars(&self) -> FreeVars {
        let mut out = FreeVars::default();
        let mut bound_t = Vec::new();
        let mut bound_c = Vec::new();
        collect_free(self, &mut bound_t, &mut bound_c, &mut out);
        out
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Every name bound anywhere in the formula.
    pub fn bound_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| match f {
            Formula::Token { var, .. } | Formula::Color { var, .. } => {
                out.insert(var.clone());
            }
            _ => {}
        });
        out
    }

    /// All names occurring in the formula, bound or free.
    pub fn all_names(&self) -> BTreeSet<Name> {
        let mut out = self.bound_vars();
        let fv = self.free_vars();
        out.extend(fv.tokens);
        out.extend(fv.colors);
        out
    }

    /// Places mentioned by guards and place atoms.
    pub fn places(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| match f {
            Formula::InPlace { place, .. } => {
                out.insert(place.clone());
            }
            Formula::Token { place: Some(p), .. } => {
                out.insert(p.clone());
            }
            _ => {}
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit(&self, f: &mut impl FnMut(&Formula)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    /// Apply `f` to every term of every color atom.
    pub fn map_terms(&self, f: &impl Fn(&Term) -> Option<Term>) -> Formula {
        match self {
            Formula::Pred(a) => Formula::Pred(ColorAtom {
                pred: a.pred.clone(),
                args: a.args.iter().map(|t| t.map(f)).collect(),
            }),
            Formula::Not(b) => Formula::not(b.map_terms(f)),
            Formula::And(v) => Formula::And(v.iter().map(|c| c.map_terms(f)).collect()),
            Formula::Or(v) => Formula::Or(v.iter().map(|c| c.map_terms(f)).collect()),
            Formula::Token {
                q,
                var,
                place,
                body,
            } => Formula::Token {
                q: *q,
                var: var.clone(),
                place: place.clone(),
                body: Box::new(body.map_terms(f)),
            },
            Formula::Color { q, var, body } => Formula::Color {
                q: *q,
                var: var.clone(),
                body: Box::new(body.map_terms(f)),
            },
            other => other.clone(),
        }
    }

    /// Replace free occurrences of token variable `from` by `to`.
    /// The caller guarantees `to` is not captured (bound names are unique).
    pub fn subst_token(&self, from: &Name, to: &Name) -> Formula {
        let mut m = HashMap::new();
        m.insert(from.clone(), to.clone());
        self.subst_tokens(&m)
    }

    pub fn subst_tokens(&self, m: &HashMap<Name, Name>) -> Formula {
        if m.is_empty() {
            return self.clone();
        }
        let r = |n: &Name| m.get(n).cloned().unwrap_or_else(|| n.clone());
        match self {
            Formula::TokenEq(a, b) => Formula::TokenEq(r(a), r(b)),
            Formula::InPlace { place, token } => Formula::InPlace {
                place: place.clone(),
                token: r(token),
            },
            Formula::Pred(_) => self.map_terms(&|t| match t {
                Term::Color { index, token } if m.contains_key(token) => Some(Term::Color {
                    index: *index,
                    token: r(token),
                }),
                _ => None,
            }),
            Formula::Not(b) => Formula::not(b.subst_tokens(m)),
            Formula::And(v) => Formula::And(v.iter().map(|c| c.subst_tokens(m)).collect()),
            Formula::Or(v) => Formula::Or(v.iter().map(|c| c.subst_tokens(m)).collect()),
            Formula::Token {
                q,
                var,
                place,
                body,
            } => {
                if m.contains_key(var) {
                    let mut inner = m.clone();
                    inner.remove(var);
                    Formula::Token {
                        q: *q,
                        var: var.clone(),
                        place: place.clone(),
                        body: Box::new(body.subst_tokens(&inner)),
                    }
                } else {
                    Formula::Token {
                        q: *q,
                        var: var.clone(),
                        place: place.clone(),
                        body: Box::new(body.subst_tokens(m)),
                    }
                }
            }
            Formula::Color { q, var, body } => Formula::Color {
                q: *q,
                var: var.clone(),
                body: Box::new(body.subst_tokens(m)),
            },
            other => other.clone(),
        }
    }

    /// Replace free color variables by terms.
    pub fn subst_colors(&self, m: &HashMap<Name, Term>) -> Formula {
        if m.is_empty() {
            return self.clone();
        }
        match self {
            Formula::Color { q, var, body } if m.contains_key(var) => {
                let mut inner = m.clone();
                inner.remove(var);
                Formula::Color {
                    q: *q,
                    var: var.clone(),
                    body: Box::new(body.subst_colors(&inner)),
                }
            }
            Formula::Color { q, var, body } => Formula::Color {
                q: *q,
                var: var.clone(),
                body: Box::new(body.subst_colors(m)),
            },
            Formula::Pred(_) => self.map_terms(&|t| match t {
                Term::Var(v) => m.get(v).cloned(),
                _ => None,
            }),
            Formula::Not(b) => Formula::not(b.subst_colors(m)),
            Formula::And(v) => Formula::And(v.iter().map(|c| c.subst_colors(m)).collect()),
            Formula::Or(v) => Formula::Or(v.iter().map(|c| c.subst_colors(m)).collect()),
            Formula::Token {
                q,
                var,
                place,
                body,
            } => Formula::Token {
                q: *q,
                var: var.clone(),
                place: place.clone(),
                body: Box::new(body.subst_colors(m)),
            },
            other => other.clone(),
        }
    }

    /// Rename every bound variable to a name fresh w.r.t. `supply`.
    pub fn rename_bound(&self, supply: &mut NameSupply) -> Formula {
        rename_rec(self, supply, &mut HashMap::new())
    }
}

fn rename_rec(f: &Formula, supply: &mut NameSupply, env: &mut HashMap<Name, Name>) -> Formula {
    let r = |env: &HashMap<Name, Name>, n: &Name| env.get(n).cloned().unwrap_or_else(|| n.clone());
    match f {
        Formula::TokenEq(a, b) => Formula::TokenEq(r(env, a), r(env, b)),
        Formula::InPlace { place, token } => Formula::InPlace {
            place: place.clone(),
            token: r(env, token),
        },
        Formula::Pred(_) => f.map_terms(&|t| match t {
            Term::Var(v) if env.contains_key(v) => Some(Term::Var(r(env, v))),
            Term::Color { index, token } if env.contains_key(token) => Some(Term::Color {
                index: *index,
                token: r(env, token),
            }),
            _ => None,
        }),
        Formula::Not(b) => Formula::not(rename_rec(b, supply, env)),
        Formula::And(v) => Formula::And(v.iter().map(|c| rename_rec(c, supply, env)).collect()),
        Formula::Or(v) => Formula::Or(v.iter().map(|c| rename_rec(c, supply, env)).collect()),
        Formula::Token {
            q,
            var,
            place,
            body,
        } => {
            let fresh = supply.fresh(var);
            let old = env.insert(var.clone(), fresh.clone());
            let b = rename_rec(body, supply, env);
            restore(env, var, old);
            Formula::Token {
                q: *q,
                var: fresh,
                place: place.clone(),
                body: Box::new(b),
            }
        }
        Formula::Color { q, var, body } => {
            let fresh = supply.fresh(var);
            let old = env.insert(var.clone(), fresh.clone());
            let b = rename_rec(body, supply, env);
            restore(env, var, old);
            Formula::Color {
                q: *q,
                var: fresh,
                body: Box::new(b),
            }
        }
        other => other.clone(),
    }
}

fn restore(env: &mut HashMap<Name, Name>, var: &Name, old: Option<Name>) {
    match old {
        Some(o) => {
            env.insert(var.clone(), o);
        }
        None => {
            env.remove(var);
        }
    }
}

fn collect_free(f: &Formula, bt: &mut Vec<Name>, bc: &mut Vec<Name>, out: &mut FreeVars) {
    match f {
        Formula::TokenEq(a, b) => {
            for v in [a, b] {
                if !bt.contains(v) {
                    out.tokens.insert(v.clone());
                }
            }
        }
        Formula::InPlace { token, .. } => {
            if !bt.contains(token) {
                out.tokens.insert(token.clone());
            }
        }
        Formula::Pred(a) => {
            for t in &a.args {
                t.visit(&mut |t| match t {
                    Term::Var(v) if !bc.contains(v) => {
                        out.colors.insert(v.clone());
                    }
                    Term::Color { token, .. } if !bt.contains(token) => {
                        out.tokens.insert(token.clone());
                    }
                    _ => {}
                });
            }
        }
        Formula::Token { var, body, .. } => {
            bt.push(var.clone());
            collect_free(body, bt, bc, out);
            bt.pop();
        }
        Formula::Color { var, body, .. } => {
            bc.push(var.clone());
            collect_free(body, bt, bc, out);
            bc.pop();
        }
        _ => {
            for c in f.children() {
                collect_free(c, bt, bc, out);
            }
        }
    }
}

/// Conjunction of `dj(a) = dj(b)` for j in 1..=n.
pub fn colors_equal(a: &str, b: &str, n_colors: usize) -> Formula {
    Formula::And(
        (1..=n_colors)
            .map(|j| Formula::pred("=", vec![Term::color(j, a), Term::color(j, b)]))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Formula {
        // exists x in p . d1(x) = c & x = y
        Formula::exists_in(
            "x",
            "p",
            Formula::and(vec![
                Formula::pred("=", vec![Term::color(1, "x"), Term::var("c")]),
                Formula::teq("x", "y"),
            ]),
        )
    }

    #[test]
    fn free_vars_split_sorts() {
        let fv = sample().free_vars();
        assert_eq!(
            fv.tokens.iter().map(|n| n.as_str()).collect::<Vec<_>>(),
            vec!["y"]
        );
        assert_eq!(
            fv.colors.iter().map(|n| n.as_str()).collect::<Vec<_>>(),
            vec!["c"]
        );
        assert!(!sample().is_closed());
    }

    #[test]
    fn subst_respects_binding() {
        let f = sample().subst_token(&Name::new("x"), &Name::new("z"));
        assert_eq!(f, sample());
        let g = sample().subst_token(&Name::new("y"), &Name::new("z"));
        assert!(g.free_vars().tokens.contains("z"));
    }

    #[test]
    fn rename_keeps_free() {
        let mut s = NameSupply::new();
        s.reserve(&Name::new("x"));
        let f = sample().rename_bound(&mut s);
        match &f {
            Formula::Token { var, .. } => assert_eq!(var.as_str(), "x_1"),
            _ => panic!(),
        }
        assert_eq!(f.free_vars(), sample().free_vars());
    }

    #[test]
    fn color_subst() {
        let mut m = HashMap::new();
        m.insert(Name::new("c"), Term::Lit(3));
        let f = sample().subst_colors(&m);
        assert!(f.free_vars().colors.is_empty());
    }
}
