//! Simplification and normal forms.
//!
//! Token quantifiers range over all tokens, including the infinitely many
//! tokens sitting in no place, so the token domain is never empty.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::formula::{Formula, Quant};
use crate::name::{Name, NameSupply};
use crate::sig::Signature;
use crate::theory::Term;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalError {
    /// The quantifier also says something about tokens outside every place.
    #[error("quantifier over `{0}` is not place-guarded")]
    Unguarded(Name),
    #[error("place atom `{place}({token})` on a token whose place is unknown")]
    UnknownPlace { place: Name, token: Name },
    #[error("unknown place `{0}`")]
    UnknownPlaceName(Name),
    #[error("formula has free variables: {0}")]
    NotClosed(String),
}

// ---------------------------------------------------------------- simplify

/// Constant folding, flattening, duplicate removal (modulo renaming and
/// reordering) and hoisting closed conjuncts out of quantifier scopes.
/// Color equalities `t = t` are deliberately kept.
pub fn simplify(f: &Formula) -> Formula {
    match f {
        Formula::TokenEq(a, b) if a == b => Formula::True,
        Formula::True
        | Formula::False
        | Formula::TokenEq(..)
        | Formula::InPlace { .. }
        | Formula::Pred(_) => f.clone(),
        Formula::Not(inner) => mk_not(simplify(inner)),
        Formula::And(v) => mk_and(v.iter().map(simplify).collect()),
        Formula::Or(v) => mk_or(v.iter().map(simplify).collect()),
        Formula::Token {
            q,
            var,
            place,
            body,
        } => mk_token(*q, var.clone(), place.clone(), simplify(body)),
        Formula::Color { q, var, body } => mk_color(*q, var.clone(), simplify(body)),
    }
}

pub fn mk_not(f: Formula) -> Formula {
    match f {
        Formula::True => Formula::False,
        Formula::False => Formula::True,
        Formula::Not(inner) => *inner,
        other => Formula::not(other),
    }
}

pub fn mk_and(v: Vec<Formula>) -> Formula {
    junction(v, true)
}

pub fn mk_or(v: Vec<Formula>) -> Formula {
    junction(v, false)
}

fn junction(v: Vec<Formula>, conj: bool) -> Formula {
    let (unit, zero) = if conj {
        (Formula::True, Formula::False)
    } else {
        (Formula::False, Formula::True)
    };
    let mut flat = Vec::new();
    for c in v {
        match c {
            Formula::And(inner) if conj => flat.extend(inner),
            Formula::Or(inner) if !conj => flat.extend(inner),
            c if c == unit => {}
            c if c == zero => return zero,
            c => flat.push(c),
        }
    }
    let mut keys: BTreeSet<String> = BTreeSet::new();
    let mut out = Vec::new();
    for c in flat {
        if keys.insert(canonical_key(&c)) {
            out.push(c);
        }
    }
    // complementary pair
    for c in &out {
        if let Formula::Not(inner) = c {
            if keys.contains(&canonical_key(inner)) {
                return zero;
            }
        }
    }
    match out.len() {
        0 => unit,
        1 => out.pop().unwrap(),
        _ => {
            if conj {
                Formula::And(out)
            } else {
                Formula::Or(out)
            }
        }
    }
}

pub fn mk_token(q: Quant, var: Name, place: Option<Name>, body: Formula) -> Formula {
    match (&body, q, &place) {
        (Formula::False, Quant::Exists, _) => return Formula::False,
        (Formula::True, Quant::Forall, _) => return Formula::True,
        // the token domain is never empty
        (Formula::True, Quant::Exists, None) => return Formula::True,
        (Formula::False, Quant::Forall, None) => return Formula::False,
        _ => {}
    }
    if place.is_none() && !body.free_vars().tokens.contains(&var) {
        return body;
    }
    if let Some(f) = hoist_closed(q, &body, |b| mk_token(q, var.clone(), place.clone(), b)) {
        return f;
    }
    Formula::Token {
        q,
        var,
        place,
        body: Box::new(body),
    }
}

pub fn mk_color(q: Quant, var: Name, body: Formula) -> Formula {
    if !body.free_vars().colors.contains(&var) {
        return body;
    }
    if let Some(f) = hoist_closed(q, &body, |b| mk_color(q, var.clone(), b)) {
        return f;
    }
    Formula::Color {
        q,
        var,
        body: Box::new(body),
    }
}

// `Qv.(A op B)` with `A` closed becomes `A op Qv.B`, where `op` is `&` for
// existentials and `|` for universals.
fn hoist_closed(q: Quant, body: &Formula, rebuild: impl Fn(Formula) -> Formula) -> Option<Formula> {
    let parts: Vec<Formula> = match (q, body) {
        (Quant::Exists, Formula::And(v)) | (Quant::Forall, Formula::Or(v)) => v.clone(),
        _ => return None,
    };
    let (closed, rest): (Vec<_>, Vec<_>) = parts.into_iter().partition(|c| c.is_closed());
    if closed.is_empty() || rest.is_empty() {
        return None;
    }
    let inner = rebuild(if q == Quant::Exists {
        mk_and(rest)
    } else {
        mk_or(rest)
    });
    let mut all = closed;
    all.push(inner);
    Some(if q == Quant::Exists {
        mk_and(all)
    } else {
        mk_or(all)
    })
}

// ---------------------------------------------------------------- canonical form

/// Key identifying a formula up to bound-variable names and the order of
/// conjuncts/disjuncts.
pub fn canonical_key(f: &Formula) -> String {
    let mut env = Vec::new();
    let mut out = String::new();
    canon(f, &mut env, &mut out);
    out
}

/// Equality up to renaming of bound variables and AC of `&`/`|`.
pub fn alpha_eq(a: &Formula, b: &Formula) -> bool {
    canonical_key(a) == canonical_key(b)
}

fn lookup_env(env: &[Name], n: &Name) -> String {
    match env.iter().rposition(|m| m == n) {
        Some(i) => format!("#{i}"),
        None => n.to_string(),
    }
}

fn canon_term(t: &Term, env: &[Name], out: &mut String) {
    match t {
        Term::Var(v) => out.push_str(&lookup_env(env, v)),
        Term::Lit(c) => out.push_str(&c.to_string()),
        Term::Color { index, token } => {
            out.push_str(&format!("d{index}({})", lookup_env(env, token)));
        }
        Term::App(g, args) => {
            out.push_str(g);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                canon_term(a, env, out);
            }
            out.push(')');
        }
    }
}

fn canon(f: &Formula, env: &mut Vec<Name>, out: &mut String) {
    match f {
        Formula::True => out.push('T'),
        Formula::False => out.push('F'),
        Formula::TokenEq(a, b) => {
            let (x, y) = (lookup_env(env, a), lookup_env(env, b));
            let (x, y) = if x <= y { (x, y) } else { (y, x) };
            out.push_str(&format!("({x}=={y})"));
        }
        Formula::InPlace { place, token } => {
            out.push_str(&format!("{place}[{}]", lookup_env(env, token)))
        }
        Formula::Pred(a) => {
            out.push_str(&a.pred);
            out.push('(');
            for (i, t) in a.args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                canon_term(t, env, out);
            }
            out.push(')');
        }
        Formula::Not(inner) => {
            out.push('!');
            canon(inner, env, out);
        }
        Formula::And(_) | Formula::Or(_) => {
            let conj = matches!(f, Formula::And(_));
            let mut leaves = Vec::new();
            collect_junction(f, conj, &mut leaves);
            let mut keys: Vec<String> = leaves
                .into_iter()
                .map(|c| {
                    let mut s = String::new();
                    canon(c, env, &mut s);
                    s
                })
                .collect();
            keys.sort();
            keys.dedup();
            out.push_str(if conj { "&[" } else { "|[" });
            out.push_str(&keys.join(";"));
            out.push(']');
        }
        Formula::Token {
            q,
            var,
            place,
            body,
        } => {
            out.push_str(if *q == Quant::Exists { "E" } else { "A" });
            if let Some(p) = place {
                out.push_str(&format!("@{p}"));
            }
            out.push('.');
            env.push(var.clone());
            canon(body, env, out);
            env.pop();
        }
        Formula::Color { q, var, body } => {
            out.push_str(if *q == Quant::Exists { "Ec." } else { "Ac." });
            env.push(var.clone());
            canon(body, env, out);
            env.pop();
        }
    }
}

fn collect_junction<'a>(f: &'a Formula, conj: bool, out: &mut Vec<&'a Formula>) {
    match f {
        Formula::And(v) if conj => v.iter().for_each(|c| collect_junction(c, conj, out)),
        Formula::Or(v) if !conj => v.iter().for_each(|c| collect_junction(c, conj, out)),
        other => out.push(other),
    }
}

// ---------------------------------------------------------------- NNF

/// Negation normal form: negations only in front of atoms.
pub fn to_nnf(f: &Formula) -> Formula {
    nnf(f, false)
}

fn nnf(f: &Formula, neg: bool) -> Formula {
    match f {
        Formula::True => {
            if neg {
                Formula::False
            } else {
                Formula::True
            }
        }
        Formula::False => {
            if neg {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::TokenEq(..) | Formula::InPlace { .. } | Formula::Pred(_) => {
            if neg {
                Formula::not(f.clone())
            } else {
                f.clone()
            }
        }
        Formula::Not(inner) => nnf(inner, !neg),
        Formula::And(v) => {
            let parts = v.iter().map(|c| nnf(c, neg)).collect();
            if neg {
                Formula::Or(parts)
            } else {
                Formula::And(parts)
            }
        }
        Formula::Or(v) => {
            let parts = v.iter().map(|c| nnf(c, neg)).collect();
            if neg {
                Formula::And(parts)
            } else {
                Formula::Or(parts)
            }
        }
        Formula::Token {
            q,
            var,
            place,
            body,
        } => Formula::Token {
            q: if neg { q.dual() } else { *q },
            var: var.clone(),
            place: place.clone(),
            body: Box::new(nnf(body, neg)),
        },
        Formula::Color { q, var, body } => Formula::Color {
            q: if neg { q.dual() } else { *q },
            var: var.clone(),
            body: Box::new(nnf(body, neg)),
        },
    }
}

/// Replace guards by place literals: `exists x in p . f` becomes
/// `exists x . p(x) & f` and `forall x in p . f` becomes `forall x . !p(x) | f`.
pub fn unguard(f: &Formula) -> Formula {
    match f {
        Formula::Token {
            q,
            var,
            place,
            body,
        } => {
            let b = unguard(body);
            let b = match place {
                None => b,
                Some(p) => {
                    let lit = Formula::InPlace {
                        place: p.clone(),
                        token: var.clone(),
                    };
                    match q {
                        Quant::Exists => Formula::And(vec![lit, b]),
                        Quant::Forall => Formula::Or(vec![Formula::not(lit), b]),
                    }
                }
            };
            Formula::Token {
                q: *q,
                var: var.clone(),
                place: None,
                body: Box::new(b),
            }
        }
        Formula::Not(b) => Formula::not(unguard(b)),
        Formula::And(v) => Formula::And(v.iter().map(unguard).collect()),
        Formula::Or(v) => Formula::Or(v.iter().map(unguard).collect()),
        Formula::Color { q, var, body } => Formula::Color {
            q: *q,
            var: var.clone(),
            body: Box::new(unguard(body)),
        },
        other => other.clone(),
    }
}

// ---------------------------------------------------------------- PNF

/// Number of quantifier blocks of the shortest prefix starting with `first`
/// (an empty first block counts). Token-free subformulas count as matrix.
pub fn prefix_depth(f: &Formula, first: Quant) -> usize {
    if !f.has_token_quantifier() {
        return 0;
    }
    match f {
        Formula::Token { q, body, .. } | Formula::Color { q, body, .. } => {
            if *q == first {
                prefix_depth(body, first).max(1)
            } else {
                1 + prefix_depth(f, first.dual())
            }
        }
        Formula::And(v) | Formula::Or(v) => {
            v.iter().map(|c| prefix_depth(c, first)).max().unwrap_or(0)
        }
        Formula::Not(inner) => prefix_depth(inner, first.dual()),
        _ => 0,
    }
}

/// Give every binder its own name, so scopes can be merged without capture.
/// Free names are kept and the first binder of each name keeps it.
pub fn distinct_binders(f: &Formula) -> Formula {
    let free = f.free_vars();
    let mut supply = NameSupply::new();
    supply.reserve_all(free.tokens.iter().chain(&free.colors));
    f.rename_bound(&mut supply)
}

/// Prenex normal form with a minimal number of quantifier alternations.
/// Guards become place literals; token-free color subformulas stay in the matrix.
pub fn to_pnf(f: &Formula) -> Formula {
    let g = unguard(&to_nnf(&distinct_binders(f)));
    let (de, da) = (
        prefix_depth(&g, Quant::Exists),
        prefix_depth(&g, Quant::Forall),
    );
    let first = if da < de {
        Quant::Forall
    } else {
        Quant::Exists
    };
    let (blocks, matrix) = build_prefix(&g, first);
    let mut out = simplify_matrix(matrix);
    let mut q = if blocks.len() % 2 == 1 {
        first
    } else {
        first.dual()
    };
    for block in blocks.into_iter().rev() {
        for b in block.into_iter().rev() {
            out = match b {
                Binder::Token(v) => Formula::Token {
                    q,
                    var: v,
                    place: None,
                    body: Box::new(out),
                },
                Binder::Color(v) => Formula::Color {
                    q,
                    var: v,
                    body: Box::new(out),
                },
            };
        }
        q = q.dual();
    }
    out
}

fn simplify_matrix(m: Formula) -> Formula {
    // keep the matrix quantifier-free at the token level; only flatten
    match m {
        Formula::And(v) => Formula::And(v.into_iter().map(simplify_matrix).collect()),
        Formula::Or(v) => Formula::Or(v.into_iter().map(simplify_matrix).collect()),
        other => other,
    }
}

#[derive(Debug, Clone)]
enum Binder {
    Token(Name),
    Color(Name),
}

type Blocks = Vec<Vec<Binder>>;

fn build_prefix(f: &Formula, first: Quant) -> (Blocks, Formula) {
    if !f.has_token_quantifier() {
        return (Vec::new(), f.clone());
    }
    match f {
        Formula::Token { q, var, body, .. } | Formula::Color { q, var, body, .. } => {
            let binder = match f {
                Formula::Token { .. } => Binder::Token(var.clone()),
                _ => Binder::Color(var.clone()),
            };
            if *q == first {
                let (mut blocks, m) = build_prefix(body, first);
                if blocks.is_empty() {
                    blocks.push(Vec::new());
                }
                blocks[0].insert(0, binder);
                (blocks, m)
            } else {
                let (mut blocks, m) = build_prefix(f, first.dual());
                blocks.insert(0, Vec::new());
                (blocks, m)
            }
        }
        Formula::And(v) | Formula::Or(v) => {
            let mut blocks: Blocks = Vec::new();
            let mut mats = Vec::new();
            for c in v {
                let (b, m) = build_prefix(c, first);
                for (i, blk) in b.into_iter().enumerate() {
                    if blocks.len() <= i {
                        blocks.push(Vec::new());
                    }
                    blocks[i].extend(blk);
                }
                mats.push(m);
            }
            let m = if matches!(f, Formula::And(_)) {
                Formula::And(mats)
            } else {
                Formula::Or(mats)
            };
            (blocks, m)
        }
        _ => (Vec::new(), f.clone()),
    }
}

// ---------------------------------------------------------------- special form

/// Rewrite into special form: every token quantifier is place-guarded and
/// place atoms are gone. `known` gives places of free token variables.
///
/// An unguarded quantifier is split into one guarded copy per place; the
/// copy for tokens in no place must simplify away, otherwise the formula
/// is rejected with [`NormalError::Unguarded`].
pub fn to_special_form(
    f: &Formula,
    sig: &Signature,
    known: &HashMap<Name, Name>,
) -> Result<Formula, NormalError> {
    let mut supply = NameSupply::new();
    supply.reserve_all(&f.all_names());
    supply.reserve_all(known.keys());
    let mut k: HashMap<Name, Option<Name>> = known
        .iter()
        .map(|(a, b)| (a.clone(), Some(b.clone())))
        .collect();
    for p in known.values() {
        if !sig.has_place(p) {
            return Err(NormalError::UnknownPlaceName(p.clone()));
        }
    }
    let out = special(f, sig, &mut k, &mut supply)?;
    Ok(simplify(&out))
}

/// Special form of a closed formula.
pub fn to_special_form_closed(f: &Formula, sig: &Signature) -> Result<Formula, NormalError> {
    let fv = f.free_vars();
    if !fv.is_empty() {
        let names: Vec<String> = fv
            .tokens
            .iter()
            .chain(fv.colors.iter())
            .map(|n| n.to_string())
            .collect();
        return Err(NormalError::NotClosed(names.join(", ")));
    }
    to_special_form(f, sig, &HashMap::new())
}

// `None` in the map means "in no place".
fn special(
    f: &Formula,
    sig: &Signature,
    known: &mut HashMap<Name, Option<Name>>,
    supply: &mut NameSupply,
) -> Result<Formula, NormalError> {
    Ok(match f {
        Formula::InPlace { place, token } => match known.get(token) {
            Some(Some(p)) => {
                if p == place {
                    Formula::True
                } else {
                    Formula::False
                }
            }
            Some(None) => Formula::False,
            None => {
                return Err(NormalError::UnknownPlace {
                    place: place.clone(),
                    token: token.clone(),
                })
            }
        },
        Formula::TokenEq(a, b) => match (known.get(a), known.get(b)) {
            (Some(Some(p)), Some(Some(q))) if p != q => Formula::False,
            (Some(Some(_)), Some(None)) | (Some(None), Some(Some(_))) => Formula::False,
            _ => f.clone(),
        },
        Formula::True | Formula::False | Formula::Pred(_) => f.clone(),
        Formula::Not(b) => mk_not(special(b, sig, known, supply)?),
        Formula::And(v) => mk_and(
            v.iter()
                .map(|c| special(c, sig, known, supply))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Or(v) => mk_or(
            v.iter()
                .map(|c| special(c, sig, known, supply))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Color { q, var, body } => {
            mk_color(*q, var.clone(), special(body, sig, known, supply)?)
        }
        Formula::Token {
            q,
            var,
            place: Some(p),
            body,
        } => {
            if !sig.has_place(p) {
                return Err(NormalError::UnknownPlaceName(p.clone()));
            }
            let old = known.insert(var.clone(), Some(p.clone()));
            let b = special(body, sig, known, supply);
            restore(known, var, old);
            mk_token(*q, var.clone(), Some(p.clone()), b?)
        }
        Formula::Token {
            q,
            var,
            place: None,
            body,
        } => {
            // tokens in no place first: that copy must vanish
            let old = known.insert(var.clone(), None);
            let outside = special(body, sig, known, supply);
            restore(known, var, old);
            let vanish = if *q == Quant::Exists {
                Formula::False
            } else {
                Formula::True
            };
            if simplify(&outside?) != vanish {
                return Err(NormalError::Unguarded(var.clone()));
            }
            let mut parts = Vec::new();
            for (i, p) in sig.places.iter().enumerate() {
                let (v, b) = if i == 0 {
                    (var.clone(), (**body).clone())
                } else {
                    let copy = Formula::Token {
                        q: *q,
                        var: var.clone(),
                        place: None,
                        body: body.clone(),
                    }
                    .rename_bound(supply);
                    match copy {
                        Formula::Token { var, body, .. } => (var, *body),
                        _ => unreachable!(),
                    }
                };
                let old = known.insert(v.clone(), Some(p.clone()));
                let sb = special(&b, sig, known, supply);
                restore(known, &v, old);
                parts.push(mk_token(*q, v, Some(p.clone()), sb?));
            }
            if *q == Quant::Exists {
                mk_or(parts)
            } else {
                mk_and(parts)
            }
        }
    })
}

fn restore(known: &mut HashMap<Name, Option<Name>>, var: &Name, old: Option<Option<Name>>) {
    match old {
        Some(o) => {
            known.insert(var.clone(), o);
        }
        None => {
            known.remove(var);
        }
    }
}

/// True if every token quantifier is guarded and there are no place atoms.
pub fn is_special_form(f: &Formula) -> bool {
    let mut ok = true;
    f.visit(&mut |g| match g {
        Formula::InPlace { .. } | Formula::Token { place: None, .. } => ok = false,
        _ => {}
    });
    ok
}

// ---------------------------------------------------------------- CNF skeleton

/// Split into clauses, treating quantified subformulas as opaque atoms.
pub fn cnf_clauses(f: &Formula) -> Vec<Formula> {
    let g = to_nnf(f);
    let mut clauses: Vec<Vec<Formula>> = cnf(&g);
    clauses.retain(|c| !c.contains(&Formula::True));
    let mut out: Vec<Formula> = Vec::new();
    let mut seen = BTreeSet::new();
    for c in clauses {
        let cl = simplify(&Formula::Or(c));
        if cl == Formula::True {
            continue;
        }
        if seen.insert(canonical_key(&cl)) {
            out.push(cl);
        }
    }
    out
}

fn cnf(f: &Formula) -> Vec<Vec<Formula>> {
    match f {
        Formula::True => vec![],
        Formula::False => vec![vec![]],
        Formula::And(v) => v.iter().flat_map(cnf).collect(),
        Formula::Or(v) => {
            let mut acc: Vec<Vec<Formula>> = vec![vec![]];
            for c in v {
                let cc = cnf(c);
                let mut next = Vec::new();
                for a in &acc {
                    for b in &cc {
                        let mut m = a.clone();
                        m.extend(b.iter().cloned());
                        next.push(m);
                    }
                }
                acc = next;
            }
            acc
        }
        other => vec![vec![other.clone()]],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_formula;
    use crate::theory::ColorTheory;

    fn sig() -> Signature {
        Signature::new(ColorTheory::int(), &["p", "q", "r"], 1)
    }

    fn p(s: &str) -> Formula {
        parse_formula(s, &sig()).unwrap()
    }

    #[test]
    fn simplify_folds_and_dedupes() {
        assert_eq!(
            simplify(&p("true & (false | exists x in p . true)")),
            p("exists x in p . true")
        );
        let f = simplify(&p("(exists x in p . true) | (exists y in p . true)"));
        assert!(matches!(f, Formula::Token { .. }));
        assert_eq!(simplify(&p("forall x in p . x = x")), Formula::True);
        assert_eq!(
            simplify(&p("exists x in p . d1(x) = 0 & !(d1(x) = 0)")),
            Formula::False
        );
        // color reflexivity is kept
        assert!(matches!(
            simplify(&p("exists x in p . d1(x) = d1(x)")),
            Formula::Token { .. }
        ));
    }

    #[test]
    fn closed_conjuncts_leave_scopes() {
        let f = simplify(&p("exists y in q . (exists x in r . true) & d1(y) >= 0"));
        assert!(alpha_eq(
            &f,
            &p("(exists x in r . true) & exists y in q . d1(y) >= 0")
        ));
    }

    #[test]
    fn alpha_eq_ignores_names_and_order() {
        assert!(alpha_eq(
            &p("exists a in p . d1(a) = 0 & d1(a) < 1"),
            &p("exists b in p . d1(b) < 1 & d1(b) = 0")
        ));
        assert!(!alpha_eq(
            &p("exists a in p . true"),
            &p("exists a in q . true")
        ));
    }

    #[test]
    fn special_form_splits_unguarded() {
        let f = p("exists x . (p(x) | q(x)) & d1(x) = 0");
        let s = to_special_form_closed(&f, &sig()).unwrap();
        assert!(is_special_form(&s));
        assert!(alpha_eq(
            &s,
            &p("(exists x in p . d1(x) = 0) | (exists y in q . d1(y) = 0)")
        ));
        let ids = p("forall t . (p(t) | q(t) | r(t)) => d1(t) >= 0");
        let s = to_special_form_closed(&ids, &sig()).unwrap();
        assert_eq!(s.places().len(), 3);
        let bad = p("forall t . d1(t) >= 0");
        assert_eq!(
            to_special_form_closed(&bad, &sig()),
            Err(NormalError::Unguarded(Name::new("t")))
        );
    }

    #[test]
    fn special_form_binds_each_name_once() {
        let f = p("exists x . p(x) & forall y . (q(y) => d1(y) = d1(x))");
        let s = to_special_form_closed(&f, &sig()).unwrap();
        let mut seen = BTreeSet::new();
        s.visit(&mut |g| {
            if let Formula::Token { var, .. } = g {
                assert!(seen.insert(var.clone()), "{var} bound twice in {s}");
            }
        });
    }

    #[test]
    fn pnf_minimises_alternation() {
        let f = p("(exists x in p . true) & (forall y in q . false) & (exists z in r . true)");
        let g = to_pnf(&f);
        assert_eq!(prefix_depth(&g, Quant::Exists), 2);
        // E then A
        match g {
            Formula::Token {
                q: Quant::Exists, ..
            } => {}
            other => panic!("{other}"),
        }
        let h = to_pnf(&p("forall y in q . exists x in p . x = y"));
        assert!(matches!(
            h,
            Formula::Token {
                q: Quant::Forall,
                ..
            }
        ));
    }

    #[test]
    fn cnf_splits_iff() {
        let f = p("(exists x in p . true) <=> (exists y in q . true)");
        assert_eq!(cnf_clauses(&f).len(), 2);
    }
}
