//! Random closed formulas and small nets, for cross-checking.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::formula::{Formula, Quant};
use crate::name::Name;
use crate::net::Cpn;
use crate::sig::Signature;
use crate::theory::Term;

#[derive(Debug, Clone)]
pub struct GenOptions {
    pub depth: usize,
    /// Most token variables in scope at once.
    pub max_tokens: usize,
    pub literals: Vec<i64>,
    /// Allow color quantifiers.
    pub color_quantifiers: bool,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            depth: 4,
            max_tokens: 3,
            literals: vec![-1, 0, 1],
            color_quantifiers: true,
        }
    }
}

struct Gen<'a, R> {
    rng: &'a mut R,
    sig: &'a Signature,
    opts: &'a GenOptions,
    tokens: Vec<Name>,
    colors: Vec<Name>,
    next: usize,
}

impl<R: Rng> Gen<'_, R> {
    fn fresh(&mut self, base: &str) -> Name {
        self.next += 1;
        Name::new(&format!("{base}{}", self.next))
    }

    fn term(&mut self) -> Term {
        let k = self.rng.gen_range(1..=self.sig.n_colors);
        match self.rng.gen_range(0..4) {
            0 | 1 if !self.tokens.is_empty() => Term::Color {
                index: k,
                token: self.tokens.choose(self.rng).unwrap().clone(),
            },
            2 if !self.colors.is_empty() => {
                Term::Var(self.colors.choose(self.rng).unwrap().clone())
            }
            _ => Term::Lit(*self.opts.literals.choose(self.rng).unwrap()),
        }
    }

    fn atom(&mut self) -> Formula {
        if self.tokens.len() >= 2 && self.rng.gen_bool(0.25) {
            let a = self.tokens.choose(self.rng).unwrap().clone();
            let b = self.tokens.choose(self.rng).unwrap().clone();
            return Formula::TokenEq(a, b);
        }
        if self.tokens.is_empty() && self.colors.is_empty() {
            return if self.rng.gen_bool(0.5) {
                Formula::True
            } else {
                Formula::False
            };
        }
        let rel = *["=", "<", "<="].choose(self.rng).unwrap();
        let (a, b) = (self.term(), self.term());
        Formula::pred(rel, vec![a, b])
    }

    fn formula(&mut self, depth: usize) -> Formula {
        if depth == 0 || (!self.tokens.is_empty() && self.rng.gen_bool(0.2)) {
            return self.atom();
        }
        let room = self.tokens.len() < self.opts.max_tokens;
        // with nothing in scope, atoms would be constants
        let pick = if self.tokens.is_empty() {
            9
        } else {
            self.rng.gen_range(0..10)
        };
        match pick {
            0 => Formula::not(self.formula(depth - 1)),
            1 | 2 => Formula::And(vec![self.formula(depth - 1), self.formula(depth - 1)]),
            3 | 4 => Formula::Or(vec![self.formula(depth - 1), self.formula(depth - 1)]),
            5 if self.opts.color_quantifiers => {
                let c = self.fresh("c");
                self.colors.push(c.clone());
                let body = self.formula(depth - 1);
                self.colors.pop();
                let q = if self.rng.gen_bool(0.5) {
                    Quant::Exists
                } else {
                    Quant::Forall
                };
                Formula::Color {
                    q,
                    var: c,
                    body: Box::new(body),
                }
            }
            _ if room => {
                let q = if self.rng.gen_bool(0.5) {
                    Quant::Exists
                } else {
                    Quant::Forall
                };
                self.quantified(q, depth)
            }
            _ => self.atom(),
        }
    }

    fn matrix(&mut self, depth: usize) -> Formula {
        if depth == 0 || self.rng.gen_bool(0.25) {
            return self.atom();
        }
        match self.rng.gen_range(0..5) {
            0 => Formula::not(self.matrix(depth - 1)),
            1 | 2 => Formula::And(vec![self.matrix(depth - 1), self.matrix(depth - 1)]),
            _ => Formula::Or(vec![self.matrix(depth - 1), self.matrix(depth - 1)]),
        }
    }

    fn quantified(&mut self, q: Quant, depth: usize) -> Formula {
        let x = self.fresh("t");
        let p = self.sig.places.choose(self.rng).unwrap().clone();
        self.tokens.push(x.clone());
        let body = self.formula(depth - 1);
        self.tokens.pop();
        self.bind(q, x, p, body)
    }

    fn bind(&mut self, q: Quant, x: Name, p: Name, body: Formula) -> Formula {
        if self.rng.gen_bool(0.2) {
            // unguarded binder with an explicit place guard
            let g = Formula::in_place(p.as_str(), x.as_str());
            let b = match q {
                Quant::Exists => Formula::and(vec![g, body]),
                Quant::Forall => Formula::implies(g, body),
            };
            Formula::Token {
                q,
                var: x,
                place: None,
                body: Box::new(b),
            }
        } else {
            Formula::Token {
                q,
                var: x,
                place: Some(p),
                body: Box::new(body),
            }
        }
    }
}

/// A random closed, place-guarded formula.
pub fn random_formula<R: Rng>(rng: &mut R, sig: &Signature, opts: &GenOptions) -> Formula {
    let mut g = Gen {
        rng,
        sig,
        opts,
        tokens: Vec::new(),
        colors: Vec::new(),
        next: 0,
    };
    g.formula(opts.depth)
}

/// A random formula shaped `exists x1..xn . forall y1..ym . matrix`, with
/// each binder in a random place and a quantifier-free matrix.
pub fn random_sigma2<R: Rng>(
    rng: &mut R,
    sig: &Signature,
    n_exists: usize,
    n_forall: usize,
    opts: &GenOptions,
) -> Formula {
    let mut g = Gen {
        rng,
        sig,
        opts,
        tokens: Vec::new(),
        colors: Vec::new(),
        next: 0,
    };
    let mut binders = Vec::new();
    for i in 0..n_exists + n_forall {
        let x = g.fresh("t");
        let p = g.sig.places.choose(g.rng).unwrap().clone();
        g.tokens.push(x.clone());
        binders.push((
            if i < n_exists {
                Quant::Exists
            } else {
                Quant::Forall
            },
            x,
            p,
        ));
    }
    let mut body = g.matrix(opts.depth);
    for (q, x, p) in binders.into_iter().rev() {
        body = g.bind(q, x, p, body);
    }
    body
}

/// A random net with one or two transitions of at most two inputs and two
/// outputs each. Guards compare input and output colors and may ask that
/// some place holds a token of a given color.
pub fn random_net<R: Rng>(rng: &mut R, sig: &Signature) -> Cpn {
    let mut net = Cpn::new(sig.clone());
    let plus = sig.theory.functions.contains_key("+");
    let lits: Vec<i64> = sig
        .theory
        .finite_values()
        .map(|v| v.to_vec())
        .unwrap_or_else(|| vec![-1, 0, 1]);
    let n = rng.gen_range(1..=2);
    for i in 0..n {
        let lhs: Vec<&str> = (0..rng.gen_range(0..=2))
            .map(|_| sig.places.choose(rng).unwrap().as_str())
            .collect();
        let rhs: Vec<&str> = (0..rng.gen_range(if lhs.is_empty() { 1 } else { 0 }..=2))
            .map(|_| sig.places.choose(rng).unwrap().as_str())
            .collect();
        let mut conj = Vec::new();
        for j in 1..=rhs.len() {
            let y = Term::color(1, &format!("y{j}"));
            let rhs_term = if !lhs.is_empty() && rng.gen_bool(0.6) {
                let x = Term::color(1, &format!("x{}", rng.gen_range(1..=lhs.len())));
                if plus && rng.gen_bool(0.5) {
                    Term::app("+", vec![x, Term::Lit(1)])
                } else {
                    x
                }
            } else {
                Term::Lit(*lits.choose(rng).unwrap())
            };
            let rel = *["=", "<=", "<"].choose(rng).unwrap();
            conj.push(Formula::pred(rel, vec![y, rhs_term]));
        }
        if rng.gen_bool(0.3) {
            let p = sig.places.choose(rng).unwrap().clone();
            let c = Term::Lit(*lits.choose(rng).unwrap());
            let t = Name::new("w");
            let atom = Formula::pred("=", vec![Term::color(1, "w"), c]);
            conj.push(Formula::Token {
                q: Quant::Exists,
                var: t,
                place: Some(p),
                body: Box::new(atom),
            });
        }
        let guard = if conj.is_empty() {
            Formula::True
        } else {
            Formula::And(conj)
        };
        net.add_transition(&format!("t{i}"), &lhs, &rhs, guard)
            .expect("generated transition is valid");
    }
    net
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::ColorTheory;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn generated_formulas_are_closed() {
        let sig = Signature::new(ColorTheory::int(), &["p", "q"], 1);
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..200 {
            let f = random_formula(&mut rng, &sig, &GenOptions::default());
            assert!(f.is_closed(), "{f}");
            crate::normal::to_special_form_closed(&f, &sig).unwrap();
        }
    }

    #[test]
    fn generated_nets_are_valid() {
        let sig = Signature::new(ColorTheory::int(), &["p", "q"], 1);
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..50 {
            let n = random_net(&mut rng, &sig);
            assert!(n.class().within_sigma1());
        }
        let sig = Signature::new(ColorTheory::finite_enum(vec![0, 1, 2]), &["p", "q"], 1);
        for _ in 0..50 {
            random_net(&mut rng, &sig);
        }
    }
}
