//! Colored Petri nets with formula guards.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::formula::{colors_equal, Formula};
use crate::fragment::{classify_fragment, Fragment};
use crate::name::Name;
use crate::normal::{to_special_form, NormalError};
use crate::parse::{parse_model_text, ParseError, RawTransition};
use crate::sig::Signature;
use crate::theory::Term;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("transition `{transition}`: {msg}")]
    Invalid { transition: Name, msg: String },
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
}

/// `lhs ↪ rhs : guard`. The guard talks about the deleted tokens as
/// `x1..xn` and about the colors of the created tokens as `dK(yj)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpnTransition {
    pub name: Name,
    pub lhs: Vec<Name>,
    pub rhs: Vec<Name>,
    #[serde(serialize_with = "crate::sat::ser_display")]
    pub guard: Formula,
    /// Guard in special form, with each `xi` known to sit in `lhs[i]`.
    #[serde(skip)]
    pub guard_special: Formula,
}

impl CpnTransition {
    pub fn deleted_vars(&self) -> Vec<Name> {
        (1..=self.lhs.len())
            .map(|i| Name::from(format!("x{i}")))
            .collect()
    }

    pub fn created_vars(&self) -> Vec<Name> {
        (1..=self.rhs.len())
            .map(|j| Name::from(format!("y{j}")))
            .collect()
    }

    /// Places whose contents the transition can change.
    pub fn touched_places(&self) -> BTreeSet<Name> {
        self.lhs.iter().chain(self.rhs.iter()).cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cpn {
    pub signature: Signature,
    pub transitions: Vec<CpnTransition>,
}

/// `dj(yi) = dj(xi)` for every color component: token `i` keeps its colors.
pub fn phi_id(i: usize, n_colors: usize) -> Formula {
    colors_equal(&format!("y{i}"), &format!("x{i}"), n_colors)
}

impl Cpn {
    pub fn new(signature: Signature) -> Self {
        Cpn {
            signature,
            transitions: Vec::new(),
        }
    }

    /// Validate and add a transition.
    pub fn add_transition(
        &mut self,
        name: &str,
        lhs: &[&str],
        rhs: &[&str],
        guard: Formula,
    ) -> Result<(), NetError> {
        let raw = RawTransition {
            name: Name::new(name),
            lhs: lhs.iter().map(|p| Name::new(p)).collect(),
            rhs: rhs.iter().map(|p| Name::new(p)).collect(),
            guard,
        };
        let t = validate_transition(&self.signature, raw)?;
        if self.transitions.iter().any(|u| u.name == t.name) {
            return Err(NetError::Invalid {
                transition: t.name,
                msg: "duplicate name".into(),
            });
        }
        self.transitions.push(t);
        Ok(())
    }

    pub fn transition(&self, name: &str) -> Result<&CpnTransition, NetError> {
        self.transitions
            .iter()
            .find(|t| t.name.as_str() == name)
            .ok_or_else(|| NetError::UnknownTransition(name.to_string()))
    }

    /// Fragment of the guards: the net is in CPN[class].
    pub fn class(&self) -> Fragment {
        self.transitions.iter().fold(Fragment::Sigma0, |acc, t| {
            acc.join(classify_fragment(&t.guard_special))
        })
    }
}

/// Parse and validate a model file.
pub fn parse_model(text: &str) -> Result<Cpn, NetError> {
    let m = parse_model_text(text)?;
    let mut net = Cpn::new(m.signature);
    for raw in m.transitions {
        let t = validate_transition(&net.signature, raw)?;
        net.transitions.push(t);
    }
    Ok(net)
}

fn invalid(t: &RawTransition, msg: impl Into<String>) -> NetError {
    NetError::Invalid {
        transition: t.name.clone(),
        msg: msg.into(),
    }
}

/// Check the guard discipline and precompute its special form.
pub fn validate_transition(sig: &Signature, raw: RawTransition) -> Result<CpnTransition, NetError> {
    for p in raw.lhs.iter().chain(raw.rhs.iter()) {
        if !sig.has_place(p) {
            return Err(invalid(&raw, format!("unknown place `{p}`")));
        }
    }
    let xs: Vec<Name> = (1..=raw.lhs.len())
        .map(|i| Name::from(format!("x{i}")))
        .collect();
    let ys: Vec<Name> = (1..=raw.rhs.len())
        .map(|j| Name::from(format!("y{j}")))
        .collect();
    let fv = raw.guard.free_vars();
    if let Some(c) = fv.colors.iter().next() {
        return Err(invalid(&raw, format!("free color variable `{c}` in guard")));
    }
    for v in &fv.tokens {
        if !xs.contains(v) && !ys.contains(v) {
            return Err(invalid(
                &raw,
                format!("free token variable `{v}` is neither a deleted nor a created token"),
            ));
        }
    }
    for b in raw.guard.bound_vars() {
        if xs.contains(&b) || ys.contains(&b) {
            return Err(invalid(&raw, format!("guard rebinds `{b}`")));
        }
    }
    // created tokens occur only under dK(.)
    let mut bad = None;
    raw.guard.visit(&mut |g| match g {
        Formula::TokenEq(a, b) => {
            for v in [a, b] {
                if ys.contains(v) {
                    bad = Some(v.clone());
                }
            }
        }
        Formula::InPlace { token, .. } if ys.contains(token) => bad = Some(token.clone()),
        _ => {}
    });
    if let Some(y) = bad {
        return Err(invalid(
            &raw,
            format!("created token `{y}` may only occur as dK({y})"),
        ));
    }
    let mut known: HashMap<Name, Name> = HashMap::new();
    for (x, p) in xs.iter().zip(raw.lhs.iter()) {
        known.insert(x.clone(), p.clone());
    }
    let guard_special = to_special_form(&raw.guard, sig, &known)
        .map_err(|e: NormalError| invalid(&raw, e.to_string()))?;
    let mut err = None;
    raw.guard.visit(&mut |g| {
        if let Formula::Pred(a) = g {
            if let Err(e) = sig.theory.check_atom(a, sig.n_colors) {
                err = Some(e);
            }
        }
    });
    if let Some(e) = err {
        return Err(invalid(&raw, e.to_string()));
    }
    Ok(CpnTransition {
        name: raw.name,
        lhs: raw.lhs,
        rhs: raw.rhs,
        guard: raw.guard,
        guard_special,
    })
}

/// Replace `dK(yj)` by the given color terms.
pub fn substitute_created_colors(f: &Formula, map: &HashMap<(usize, Name), Term>) -> Formula {
    f.map_terms(&|t| match t {
        Term::Color { index, token } => map.get(&(*index, token.clone())).cloned(),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "theory int; colors 2; places p, q;\n\
        trans a: p -> q : d1(x1) >= 0 & !(exists t in q . d1(t) = d1(y1));\n\
        trans b: p, q -> : exists t in p . t != x1;\n";

    #[test]
    fn parses_and_classifies() {
        let net = parse_model(SRC).unwrap();
        assert_eq!(net.transitions.len(), 2);
        assert_eq!(net.class(), Fragment::BSigma1);
        assert_eq!(net.transition("a").unwrap().touched_places().len(), 2);
        assert!(net.transition("zz").is_err());
    }

    #[test]
    fn rejects_bad_guards() {
        for src in [
            "places p; trans a: p -> p : y1 = x1;",
            "places p; trans a: p -> p : p(y1);",
            "places p; trans a: p -> p : d1(x2) = 0;",
            "places p; trans a: p -> p : forall t . d1(t) = 0;",
        ] {
            assert!(parse_model(src).is_err(), "{src}");
        }
    }

    #[test]
    fn guard_special_form_uses_known_places() {
        let net = parse_model("places p, q; trans a: p -> q : p(x1) & !q(x1);").unwrap();
        assert_eq!(net.transitions[0].guard_special, Formula::True);
    }

    #[test]
    fn phi_id_shape() {
        assert_eq!(
            phi_id(2, 1),
            Formula::And(vec![Formula::pred(
                "=",
                vec![Term::color(1, "y2"), Term::color(1, "x2")]
            )])
        );
    }
}
