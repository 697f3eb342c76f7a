//! Explicit-state reference semantics over bounded markings.
//!
//! Used to cross-check the symbolic operators: a marking satisfies
//! `post(phi)` iff one of its concrete predecessors satisfies `phi`, and so on.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::formula::Formula;
use crate::image::{self, ImageError};
use crate::marking::{
    evaluate_bounded, ConcreteMarking, EvalError, Interpretation, TokenId, Valuation,
};
use crate::name::Name;
use crate::net::{Cpn, CpnTransition};
use crate::sig::Signature;
use crate::theory::Color;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Finite slice of the state space: at most `max_tokens` tokens, all colors
/// drawn from `colors`.
#[derive(Debug, Clone, Serialize)]
pub struct Bounds {
    pub max_tokens: usize,
    pub colors: Vec<Color>,
}

impl Bounds {
    pub fn new(max_tokens: usize, colors: Vec<Color>) -> Self {
        Bounds { max_tokens, colors }
    }

    /// Defaults to the theory's own values when it has finitely many.
    pub fn for_signature(sig: &Signature, max_tokens: usize) -> Self {
        let colors = sig
            .theory
            .finite_values()
            .map(|v| v.to_vec())
            .unwrap_or_else(|| vec![-1, 0, 1]);
        Bounds { max_tokens, colors }
    }
}

pub fn color_vectors(n: usize, dom: &[Color]) -> Vec<Vec<Color>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                dom.iter().map(move |c| {
                    let mut w = v.clone();
                    w.push(*c);
                    w
                })
            })
            .collect();
    }
    out
}

/// Every marking within the bounds, one per shape.
pub fn enumerate_markings(sig: &Signature, bounds: &Bounds) -> Vec<ConcreteMarking> {
    let kinds: Vec<(Name, Vec<Color>)> = sig
        .places
        .iter()
        .flat_map(|p| {
            color_vectors(sig.n_colors, &bounds.colors)
                .into_iter()
                .map(move |c| (p.clone(), c))
        })
        .collect();
    let mut out = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    multisets(&kinds, 0, bounds.max_tokens, &mut cur, &mut |sel| {
        let mut m = ConcreteMarking::new(sig.n_colors);
        for (i, &k) in sel.iter().enumerate() {
            m.support.insert(i as TokenId, kinds[k].clone());
        }
        out.push(m);
    });
    out
}

fn multisets(
    kinds: &[(Name, Vec<Color>)],
    from: usize,
    left: usize,
    cur: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[usize]),
) {
    emit(cur);
    if left == 0 {
        return;
    }
    for k in from..kinds.len() {
        cur.push(k);
        multisets(kinds, k, left - 1, cur, emit);
        cur.pop();
    }
}

// Ordered choices of distinct tokens, the i-th one sitting in places[i].
fn selections(m: &ConcreteMarking, places: &[Name]) -> Vec<Vec<TokenId>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(
        m: &ConcreteMarking,
        places: &[Name],
        cur: &mut Vec<TokenId>,
        out: &mut Vec<Vec<TokenId>>,
    ) {
        let i = cur.len();
        if i == places.len() {
            out.push(cur.clone());
            return;
        }
        for t in m.tokens_in(&places[i]).collect::<Vec<_>>() {
            if !cur.contains(&t) {
                cur.push(t);
                go(m, places, cur, out);
                cur.pop();
            }
        }
    }
    go(m, places, &mut cur, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn guard_holds(
    t: &CpnTransition,
    pre: &ConcreteMarking,
    taken: &[TokenId],
    made: &[TokenId],
    made_colors: &[Vec<Color>],
    dom: &[Color],
    interp: &Interpretation,
    theory: &crate::theory::ColorTheory,
) -> Result<bool, EvalError> {
    let mut val = Valuation::default();
    for (x, a) in t.deleted_vars().into_iter().zip(taken) {
        val.tokens.push((x, *a));
    }
    for ((y, b), c) in t.created_vars().into_iter().zip(made).zip(made_colors) {
        val.tokens.push((y, *b));
        val.overrides.insert(*b, c.clone());
    }
    evaluate_bounded(pre, &t.guard, theory, interp, &mut val, Some(dom))
}

/// All markings one firing of `t` leads to.
pub fn successors(
    net: &Cpn,
    t: &CpnTransition,
    m: &ConcreteMarking,
    bounds: &Bounds,
    interp: &Interpretation,
) -> Result<Vec<ConcreteMarking>, EvalError> {
    let sig = &net.signature;
    let mut out = Vec::new();
    let vecs = color_vectors(sig.n_colors, &bounds.colors);
    for taken in selections(m, &t.lhs) {
        let made = m.fresh_ids(t.rhs.len());
        for combo in product(&vecs, t.rhs.len()) {
            if guard_holds(
                t,
                m,
                &taken,
                &made,
                &combo,
                &bounds.colors,
                interp,
                &sig.theory,
            )? {
                let mut next = m.clone();
                for a in &taken {
                    next.support.remove(a);
                }
                for ((b, q), c) in made.iter().zip(&t.rhs).zip(&combo) {
                    next.support.insert(*b, (q.clone(), c.clone()));
                }
                out.push(next);
            }
        }
    }
    Ok(out)
}

/// All markings from which one firing of `t` leads to `m`.
pub fn predecessors(
    net: &Cpn,
    t: &CpnTransition,
    m: &ConcreteMarking,
    bounds: &Bounds,
    interp: &Interpretation,
) -> Result<Vec<ConcreteMarking>, EvalError> {
    let sig = &net.signature;
    let mut out = Vec::new();
    let vecs = color_vectors(sig.n_colors, &bounds.colors);
    for made in selections(m, &t.rhs) {
        let made_colors: Vec<Vec<Color>> = made.iter().map(|b| m.colors_of(*b).to_vec()).collect();
        let mut base = m.clone();
        for b in &made {
            base.support.remove(b);
        }
        // deleted tokens get ids clear of both markings
        let mut avoid = m.clone();
        let taken: Vec<TokenId> = {
            let ids = avoid.fresh_ids(t.lhs.len());
            for i in &ids {
                avoid.support.insert(*i, (Name::new(""), Vec::new()));
            }
            ids
        };
        for combo in product(&vecs, t.lhs.len()) {
            let mut prev = base.clone();
            for ((a, p), c) in taken.iter().zip(&t.lhs).zip(&combo) {
                prev.support.insert(*a, (p.clone(), c.clone()));
            }
            if guard_holds(
                t,
                &prev,
                &taken,
                &made,
                &made_colors,
                &bounds.colors,
                interp,
                &sig.theory,
            )? {
                out.push(prev);
            }
        }
    }
    Ok(out)
}

fn product(vecs: &[Vec<Color>], k: usize) -> Vec<Vec<Vec<Color>>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|v: Vec<Vec<Color>>| {
                vecs.iter().map(move |c| {
                    let mut w = v.clone();
                    w.push(c.clone());
                    w
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Operator {
    Post,
    Pre,
    PreTilde,
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operator::Post => "post",
            Operator::Pre => "pre",
            Operator::PreTilde => "pre~",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Mismatch {
    pub operator: Operator,
    pub marking: String,
    pub symbolic: bool,
    pub concrete: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct OracleReport {
    /// Marking/operator pairs compared.
    pub instances: usize,
    pub mismatches: Vec<Mismatch>,
}

impl OracleReport {
    pub fn agrees(&self) -> bool {
        self.mismatches.is_empty()
    }
}

struct Ctx<'a> {
    net: &'a Cpn,
    bounds: &'a Bounds,
    interp: &'a Interpretation,
}

impl Ctx<'_> {
    fn eval(&self, m: &ConcreteMarking, f: &Formula) -> Result<bool, EvalError> {
        evaluate_bounded(
            m,
            f,
            &self.net.signature.theory,
            self.interp,
            &mut Valuation::default(),
            Some(&self.bounds.colors),
        )
    }

    fn any_pred(&self, m: &ConcreteMarking, phi: &Formula) -> Result<bool, EvalError> {
        for t in &self.net.transitions {
            for p in predecessors(self.net, t, m, self.bounds, self.interp)? {
                if self.eval(&p, phi)? {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    // (some successor satisfies phi, every successor satisfies phi)
    fn succs(&self, m: &ConcreteMarking, phi: &Formula) -> Result<(bool, bool), EvalError> {
        let (mut any, mut all) = (false, true);
        for t in &self.net.transitions {
            for s in successors(self.net, t, m, self.bounds, self.interp)? {
                if self.eval(&s, phi)? {
                    any = true;
                } else {
                    all = false;
                }
            }
        }
        Ok((any, all))
    }
}

/// Compare the symbolic images of `phi` with the explicit ones on every
/// marking within `bounds`. The co-image is checked only when it is defined.
pub fn check_images(
    phi: &Formula,
    net: &Cpn,
    bounds: &Bounds,
    interp: &Interpretation,
) -> Result<OracleReport, OracleError> {
    let post = image::post_all(phi, net)?;
    let pre = image::pre_all(phi, net)?;
    let tilde = image::pre_tilde(phi, net).ok();
    let ctx = Ctx {
        net,
        bounds,
        interp,
    };
    let markings = enumerate_markings(&net.signature, bounds);
    let per: Vec<Result<(usize, Vec<Mismatch>), EvalError>> = markings
        .par_iter()
        .map(|m| {
            let mut bad = Vec::new();
            let mut n = 0;
            let mut cmp = |op, symbolic: bool, concrete: bool| {
                n += 1;
                if symbolic != concrete {
                    bad.push(Mismatch {
                        operator: op,
                        marking: m.to_string(),
                        symbolic,
                        concrete,
                    });
                }
            };
            cmp(Operator::Post, ctx.eval(m, &post)?, ctx.any_pred(m, phi)?);
            let (any, all) = ctx.succs(m, phi)?;
            cmp(Operator::Pre, ctx.eval(m, &pre)?, any);
            if let Some(t) = &tilde {
                cmp(Operator::PreTilde, ctx.eval(m, t)?, all);
            }
            Ok((n, bad))
        })
        .collect();
    let mut report = OracleReport::default();
    for r in per {
        let (n, bad) = r?;
        report.instances += n;
        report.mismatches.extend(bad);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::parse_model;
    use crate::parse::parse_formula;

    fn net() -> Cpn {
        parse_model(
            "theory int; colors 1; places p, q, r;\n\
             trans tau: p -> q : d1(x1) >= 0 & !(exists t in q . d1(t) = d1(y1));\n\
             trans back: q, q -> p : d1(y1) = d1(x1);",
        )
        .unwrap()
    }

    #[test]
    fn marking_count() {
        let sig = net().signature;
        // 6 kinds, multisets of size <= 2: 1 + 6 + 21
        let ms = enumerate_markings(&sig, &Bounds::new(2, vec![0, 1]));
        assert_eq!(ms.len(), 28);
    }

    #[test]
    fn successors_and_predecessors_agree() {
        let n = net();
        let b = Bounds::new(3, vec![-1, 0]);
        let interp = Interpretation::new();
        for m in enumerate_markings(&n.signature, &b) {
            for t in &n.transitions {
                for s in successors(&n, t, &m, &b, &interp).unwrap() {
                    let back = predecessors(&n, t, &s, &b, &interp).unwrap();
                    assert!(back.iter().any(|p| p.shape() == m.shape()), "{m} -> {s}");
                }
            }
        }
    }

    #[test]
    fn guard_blocks_duplicates() {
        let n = net();
        let b = Bounds::new(3, vec![0, 1]);
        let m = ConcreteMarking::from_tokens(1, &[("p", vec![0])]);
        let succ = successors(&n, &n.transitions[0], &m, &b, &Interpretation::new()).unwrap();
        assert_eq!(succ.len(), 2);
        let m = ConcreteMarking::from_tokens(1, &[("p", vec![0]), ("q", vec![1])]);
        let succ = successors(&n, &n.transitions[0], &m, &b, &Interpretation::new()).unwrap();
        assert_eq!(succ.len(), 1);
    }

    #[test]
    fn images_match_explicit_semantics() {
        let n = net();
        let b = Bounds::new(3, vec![-1, 0, 1]);
        for s in [
            "exists x in r . true",
            "forall x, y in p . x = y",
            "exists x in q . d1(x) = 1",
            "forall x in q . d1(x) >= 0",
            "exists x in p . forall y in q . d1(x) != d1(y)",
        ] {
            let phi = parse_formula(s, &n.signature).unwrap();
            let r = check_images(&phi, &n, &b, &Interpretation::new()).unwrap();
            assert!(
                r.agrees(),
                "{s}: {:?}",
                &r.mismatches[..r.mismatches.len().min(3)]
            );
            assert!(r.instances > 100);
        }
    }
}
