//! Symbolic successors and predecessors.
//!
//! `ominus` rewrites a formula about a marking into one about the marking
//! with some tokens removed (their colors become color variables);
//! `oplus` rewrites a formula about a marking into one about the marking
//! with some fresh tokens added.

use std::collections::HashMap;

use thiserror::Error;

use crate::formula::{Formula, Quant};
use crate::fragment::{classify_fragment, Fragment};
use crate::name::{Name, NameSupply};
use crate::net::{Cpn, CpnTransition};
use crate::normal::{
    mk_and, mk_color, mk_not, mk_or, mk_token, simplify, to_special_form_closed, NormalError,
};
use crate::theory::Term;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImageError {
    #[error(transparent)]
    Normal(#[from] NormalError),
    #[error("not in special form: {0}")]
    NotSpecialForm(String),
    #[error("bound variable `{0}` clashes with a context token")]
    VariableClash(Name),
    #[error("{what} must be in {expected}, found {found}")]
    Fragment {
        what: String,
        expected: String,
        found: Fragment,
    },
}

/// Removed tokens: name, place, and one color variable per component.
#[derive(Debug, Clone, Default)]
pub struct DeletionContext {
    pub tokens: Vec<(Name, Name, Vec<Name>)>,
}

/// Added tokens and their places.
#[derive(Debug, Clone, Default)]
pub struct AdditionContext {
    pub tokens: Vec<(Name, Name)>,
}

fn check_clash<'a>(f: &Formula, names: impl Iterator<Item = &'a Name>) -> Result<(), ImageError> {
    let bound = f.bound_vars();
    for n in names {
        if bound.contains(n) {
            return Err(ImageError::VariableClash(n.clone()));
        }
    }
    Ok(())
}

/// Deletion rewrite. `f` must be in special form.
pub fn ominus(f: &Formula, ctx: &DeletionContext) -> Result<Formula, ImageError> {
    check_clash(f, ctx.tokens.iter().map(|(z, _, _)| z))?;
    let mut supply = NameSupply::new();
    supply.reserve_all(&f.all_names());
    for (z, _, cs) in &ctx.tokens {
        supply.reserve(z);
        supply.reserve_all(cs);
    }
    let cols: HashMap<(usize, Name), Term> = ctx
        .tokens
        .iter()
        .flat_map(|(z, _, cs)| {
            cs.iter()
                .enumerate()
                .map(move |(k, c)| ((k + 1, z.clone()), Term::Var(c.clone())))
        })
        .collect();
    Ok(simplify(&om(f, ctx, &cols, &mut supply)?))
}

fn in_ctx(ctx: &DeletionContext, v: &Name) -> bool {
    ctx.tokens.iter().any(|(z, _, _)| z == v)
}

fn om(
    f: &Formula,
    ctx: &DeletionContext,
    cols: &HashMap<(usize, Name), Term>,
    supply: &mut NameSupply,
) -> Result<Formula, ImageError> {
    Ok(match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Pred(_) => f.map_terms(&|t| match t {
            Term::Color { index, token } => cols.get(&(*index, token.clone())).cloned(),
            _ => None,
        }),
        Formula::TokenEq(a, b) => {
            if !in_ctx(ctx, a) && !in_ctx(ctx, b) {
                f.clone()
            } else if a == b {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::InPlace { .. } => return Err(ImageError::NotSpecialForm(f.to_string())),
        Formula::Not(b) => mk_not(om(b, ctx, cols, supply)?),
        Formula::And(v) => mk_and(
            v.iter()
                .map(|c| om(c, ctx, cols, supply))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Or(v) => mk_or(
            v.iter()
                .map(|c| om(c, ctx, cols, supply))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Color { q, var, body } => mk_color(*q, var.clone(), om(body, ctx, cols, supply)?),
        Formula::Token { place: None, .. } => {
            return Err(ImageError::NotSpecialForm(f.to_string()))
        }
        Formula::Token {
            q,
            var,
            place: Some(p),
            body,
        } => {
            let mut parts = vec![mk_token(
                *q,
                var.clone(),
                Some(p.clone()),
                om(body, ctx, cols, supply)?,
            )];
            // the quantified token may also be one of the removed ones
            for (z, loc, _) in &ctx.tokens {
                if loc != p {
                    continue;
                }
                let copy = body.rename_bound(supply).subst_token(var, z);
                parts.push(om(&copy, ctx, cols, supply)?);
            }
            if *q == Quant::Exists {
                mk_or(parts)
            } else {
                mk_and(parts)
            }
        }
    })
}

/// Addition rewrite. `f` must be in special form.
pub fn oplus(f: &Formula, ctx: &AdditionContext) -> Result<Formula, ImageError> {
    check_clash(f, ctx.tokens.iter().map(|(z, _)| z))?;
    Ok(simplify(&op(f, ctx)?))
}

fn op(f: &Formula, ctx: &AdditionContext) -> Result<Formula, ImageError> {
    let in_ctx = |v: &Name| ctx.tokens.iter().any(|(z, _)| z == v);
    Ok(match f {
        Formula::True | Formula::False | Formula::Pred(_) => f.clone(),
        Formula::TokenEq(a, b) => {
            if !in_ctx(a) && !in_ctx(b) {
                f.clone()
            } else if a == b {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::InPlace { .. } | Formula::Token { place: None, .. } => {
            return Err(ImageError::NotSpecialForm(f.to_string()));
        }
        Formula::Not(b) => mk_not(op(b, ctx)?),
        Formula::And(v) => mk_and(v.iter().map(|c| op(c, ctx)).collect::<Result<_, _>>()?),
        Formula::Or(v) => mk_or(v.iter().map(|c| op(c, ctx)).collect::<Result<_, _>>()?),
        Formula::Color { q, var, body } => mk_color(*q, var.clone(), op(body, ctx)?),
        Formula::Token {
            q,
            var,
            place: Some(p),
            body,
        } => {
            // the quantified token must not be one of the new ones
            let others: Vec<Formula> = ctx
                .tokens
                .iter()
                .filter(|(_, loc)| loc == p)
                .map(|(z, _)| Formula::TokenEq(var.clone(), z.clone()))
                .collect();
            let b = op(body, ctx)?;
            let nb = match q {
                Quant::Exists => mk_and(
                    std::iter::once(b)
                        .chain(others.into_iter().map(Formula::not))
                        .collect(),
                ),
                Quant::Forall => mk_or(std::iter::once(b).chain(others).collect()),
            };
            mk_token(*q, var.clone(), Some(p.clone()), nb)
        }
    })
}

fn distinct(vars: &[Name], places: &[Name]) -> Vec<Formula> {
    let mut out = Vec::new();
    for i in 0..vars.len() {
        for j in i + 1..vars.len() {
            if places[i] == places[j] {
                out.push(Formula::not(Formula::TokenEq(
                    vars[i].clone(),
                    vars[j].clone(),
                )));
            }
        }
    }
    out
}

fn wrap(vars: &[Name], places: &[Name], colors: &[Name], body: Formula) -> Formula {
    let mut f = body;
    for c in colors.iter().rev() {
        f = Formula::Color {
            q: Quant::Exists,
            var: c.clone(),
            body: Box::new(f),
        };
    }
    for (v, p) in vars.iter().zip(places).rev() {
        f = Formula::Token {
            q: Quant::Exists,
            var: v.clone(),
            place: Some(p.clone()),
            body: Box::new(f),
        };
    }
    simplify(&f)
}

struct Prepared {
    phi: Formula,
    guard: Formula,
    supply: NameSupply,
}

// Special form of `phi`, with binders renamed away from the transition's
// variables and from the guard's binders.
fn prepare(phi: &Formula, net: &Cpn, t: &CpnTransition) -> Result<Prepared, ImageError> {
    let s = to_special_form_closed(phi, &net.signature)?;
    let mut supply = NameSupply::new();
    supply.reserve_all(&t.deleted_vars());
    supply.reserve_all(&t.created_vars());
    supply.reserve_all(&t.guard_special.all_names());
    let phi = s.rename_bound(&mut supply);
    Ok(Prepared {
        phi,
        guard: t.guard_special.clone(),
        supply,
    })
}

fn color_vars(supply: &mut NameSupply, tokens: &[Name], n_colors: usize) -> Vec<Vec<Name>> {
    tokens
        .iter()
        .map(|x| {
            (1..=n_colors)
                .map(|k| supply.fresh(&format!("c{k}_{x}")))
                .collect()
        })
        .collect()
}

/// Markings reachable by one firing of `t` from a marking satisfying `phi`.
pub fn post_formula(phi: &Formula, net: &Cpn, t: &CpnTransition) -> Result<Formula, ImageError> {
    let Prepared {
        phi,
        guard,
        mut supply,
    } = prepare(phi, net, t)?;
    let xs = t.deleted_vars();
    let ys = t.created_vars();
    let cs = color_vars(&mut supply, &xs, net.signature.n_colors);
    let del = DeletionContext {
        tokens: xs
            .iter()
            .zip(&t.lhs)
            .zip(&cs)
            .map(|((x, p), c)| (x.clone(), p.clone(), c.clone()))
            .collect(),
    };
    let add = AdditionContext {
        tokens: ys.iter().cloned().zip(t.rhs.iter().cloned()).collect(),
    };
    let removed = ominus(&mk_and(vec![phi, guard]), &del)?;
    let added = oplus(&removed, &add)?;
    let mut body = distinct(&ys, &t.rhs);
    body.push(added);
    let flat: Vec<Name> = cs.into_iter().flatten().collect();
    Ok(wrap(&ys, &t.rhs, &flat, mk_and(body)))
}

/// Markings from which one firing of `t` can reach a marking satisfying `phi`.
pub fn pre_formula(phi: &Formula, net: &Cpn, t: &CpnTransition) -> Result<Formula, ImageError> {
    let Prepared {
        phi,
        guard,
        mut supply,
    } = prepare(phi, net, t)?;
    let xs = t.deleted_vars();
    let ys = t.created_vars();
    let cs = color_vars(&mut supply, &ys, net.signature.n_colors);
    let del = DeletionContext {
        tokens: ys
            .iter()
            .zip(&t.rhs)
            .zip(&cs)
            .map(|((y, q), c)| (y.clone(), q.clone(), c.clone()))
            .collect(),
    };
    let add = AdditionContext {
        tokens: xs.iter().cloned().zip(t.lhs.iter().cloned()).collect(),
    };
    let after = oplus(&ominus(&phi, &del)?, &add)?;
    // the guard reads the created colors through the same variables
    let created: HashMap<(usize, Name), Term> = ys
        .iter()
        .zip(&cs)
        .flat_map(|(y, c)| {
            c.iter()
                .enumerate()
                .map(move |(k, v)| ((k + 1, y.clone()), Term::Var(v.clone())))
        })
        .collect();
    let g = crate::net::substitute_created_colors(&guard, &created);
    let mut body = distinct(&xs, &t.lhs);
    body.push(after);
    body.push(g);
    let flat: Vec<Name> = cs.into_iter().flatten().collect();
    Ok(wrap(&xs, &t.lhs, &flat, mk_and(body)))
}

pub fn post_all(phi: &Formula, net: &Cpn) -> Result<Formula, ImageError> {
    let parts = net
        .transitions
        .iter()
        .map(|t| post_formula(phi, net, t))
        .collect::<Result<_, _>>()?;
    Ok(simplify(&mk_or(parts)))
}

pub fn pre_all(phi: &Formula, net: &Cpn) -> Result<Formula, ImageError> {
    let parts = net
        .transitions
        .iter()
        .map(|t| pre_formula(phi, net, t))
        .collect::<Result<_, _>>()?;
    Ok(simplify(&mk_or(parts)))
}

/// Markings all of whose successors satisfy `phi` (deadlocks included).
/// Needs `phi` in Pi1 and guards in Sigma1, and then stays in Pi1.
pub fn pre_tilde(phi: &Formula, net: &Cpn) -> Result<Formula, ImageError> {
    let s = to_special_form_closed(phi, &net.signature)?;
    let frag = classify_fragment(&s);
    if !frag.within_pi1() {
        return Err(ImageError::Fragment {
            what: "formula".into(),
            expected: "Pi1".into(),
            found: frag,
        });
    }
    let class = net.class();
    if !class.within_sigma1() {
        return Err(ImageError::Fragment {
            what: "net guards".into(),
            expected: "Sigma1".into(),
            found: class,
        });
    }
    let neg = pre_all(&mk_not(s), net)?;
    Ok(simplify(&crate::normal::to_nnf(&mk_not(neg))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::alpha_eq;
    use crate::parse::parse_formula;

    fn net() -> Cpn {
        crate::net::parse_model(
            "theory int; colors 1; places p, q, r;\n\
             trans tau: p -> q : d1(x1) >= 0 & !(exists t in q . d1(t) = d1(y1));",
        )
        .unwrap()
    }

    fn f(s: &str) -> Formula {
        parse_formula(s, &net().signature).unwrap()
    }

    #[test]
    fn post_of_unrelated_place() {
        let n = net();
        let got = post_formula(&f("exists x in r . true"), &n, &n.transitions[0]).unwrap();
        let want = f("(exists x in r . true) & exists y1 in q . exists color c . c >= 0 & !(exists t in q . d1(t) = d1(y1) & t != y1)");
        assert!(alpha_eq(&got, &want), "{got}");
    }

    #[test]
    fn post_of_singleton() {
        let n = net();
        let got = post_formula(&f("forall x, y in p . x = y"), &n, &n.transitions[0]).unwrap();
        let want = f("(forall x in p . false) & exists y1 in q . exists color c . c >= 0 & !(exists t in q . d1(t) = d1(y1) & t != y1)");
        assert!(alpha_eq(&got, &want), "{got}");
    }

    #[test]
    fn ominus_expands_quantifiers() {
        let phi = f("exists t in p . d1(t) = 3");
        let ctx = DeletionContext {
            tokens: vec![(Name::new("z"), Name::new("p"), vec![Name::new("k")])],
        };
        let got = ominus(&phi, &ctx).unwrap();
        let want = Formula::Or(vec![
            phi.clone(),
            Formula::pred("=", vec![Term::var("k"), Term::Lit(3)]),
        ]);
        assert!(alpha_eq(&got, &want), "{got}");
        let clash = DeletionContext {
            tokens: vec![(Name::new("t"), Name::new("p"), vec![Name::new("k")])],
        };
        assert_eq!(
            ominus(&phi, &clash),
            Err(ImageError::VariableClash(Name::new("t")))
        );
    }

    #[test]
    fn oplus_excludes_new_tokens() {
        let phi = f("forall t in q . d1(t) = 0");
        let ctx = AdditionContext {
            tokens: vec![(Name::new("n"), Name::new("q"))],
        };
        let got = oplus(&phi, &ctx).unwrap();
        let want = Formula::forall_in(
            "t",
            "q",
            Formula::Or(vec![
                Formula::pred("=", vec![Term::color(1, "t"), Term::Lit(0)]),
                Formula::teq("t", "n"),
            ]),
        );
        assert!(alpha_eq(&got, &want), "{got}");
        assert!(matches!(
            oplus(&f("exists t . p(t)"), &ctx),
            Err(ImageError::NotSpecialForm(_))
        ));
    }

    #[test]
    fn pre_tilde_needs_pi1() {
        let n = net();
        assert!(matches!(
            pre_tilde(&f("forall x in q . d1(x) >= 0"), &n),
            Err(ImageError::Fragment { .. })
        ));
        let n = crate::net::parse_model(
            "theory int; colors 1; places p, q, r; trans tau: p -> q : d1(y1) = d1(x1) + 1;",
        )
        .unwrap();
        assert!(pre_tilde(&f("exists x in p . true"), &n).is_err());
        let g = pre_tilde(&f("forall x in q . d1(x) >= 0"), &n).unwrap();
        assert!(classify_fragment(&g).within_pi1(), "{g}");
    }
}
