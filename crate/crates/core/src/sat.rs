//! Satisfiability for the Sigma2 fragment.
//!
//! Outer existentials are hoisted, universals are instantiated over the
//! hoisted witnesses, and the remaining token structure (which witnesses
//! coincide, where each one sits) is either enumerated or left to the solver.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::formula::{Formula, Quant};
use crate::fragment::{classify_fragment, Fragment};
use crate::marking::{ConcreteMarking, TokenId};
use crate::name::{Name, NameSupply};
use crate::normal::{
    distinct_binders, mk_and, mk_not, mk_or, simplify, to_nnf, to_special_form_closed, NormalError,
};
use crate::sig::Signature;
use crate::smt::{check_formula, SmtError, SolverConfig, SolverVerdict};
use crate::theory::{Color, ColorAtom, ColorTheory, Term};

#[derive(Debug, Error)]
pub enum SatError {
    #[error("formula is in {0}, outside the decidable fragment")]
    FragmentUnsupported(Fragment),
    #[error(transparent)]
    Normal(#[from] NormalError),
    #[error(transparent)]
    Smt(#[from] SmtError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Strategy {
    /// Pick by the number of guesses.
    Auto,
    /// One solver query per (partition, placement) guess.
    Enumerate,
    /// A single query with identity and place variables.
    Symbolic,
}

#[derive(Debug, Clone)]
pub struct SatOptions {
    pub strategy: Strategy,
    pub solver: SolverConfig,
    /// Auto switches to `Symbolic` above this many guesses.
    pub enumerate_limit: usize,
}

impl Default for SatOptions {
    fn default() -> Self {
        SatOptions {
            strategy: Strategy::Auto,
            solver: SolverConfig::default(),
            enumerate_limit: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SatVerdict {
    /// With a witness marking when the model allowed building one.
    Sat(Option<ConcreteMarking>),
    Unsat,
    Unknown(String),
}

impl SatVerdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatVerdict::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, SatVerdict::Unsat)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionTrace {
    pub fragment: Fragment,
    /// Existential closure with universals instantiated.
    #[serde(serialize_with = "ser_display")]
    pub closure: Formula,
    /// The last query formula sent to the solver.
    #[serde(serialize_with = "ser_display")]
    pub sigma0: Formula,
    pub strategy: Strategy,
    pub guesses: usize,
    pub queries: usize,
    pub solver_time: Duration,
}

pub(crate) fn ser_display<S: serde::Serializer, T: std::fmt::Display>(
    v: &T,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct SatResult {
    pub verdict: SatVerdict,
    pub trace: ReductionTrace,
}

// ---------------------------------------------------------------- closure

/// Hoisted witnesses and the instantiated, token-quantifier-free matrix.
#[derive(Debug, Clone)]
pub struct Closure {
    /// Existential token variables; `Some(p)` when the place is forced.
    pub tokens: Vec<(Name, Option<Name>)>,
    pub colors: Vec<Name>,
    pub matrix: Formula,
}

impl Closure {
    pub fn to_formula(&self) -> Formula {
        let mut f = self.matrix.clone();
        for c in self.colors.iter().rev() {
            f = Formula::Color {
                q: Quant::Exists,
                var: c.clone(),
                body: Box::new(f),
            };
        }
        for (x, p) in self.tokens.iter().rev() {
            f = Formula::Token {
                q: Quant::Exists,
                var: x.clone(),
                place: p.clone(),
                body: Box::new(f),
            };
        }
        f
    }

    fn place_of(&self, x: &Name) -> Option<&Name> {
        self.tokens
            .iter()
            .find(|(y, _)| y == x)
            .and_then(|(_, p)| p.as_ref())
    }
}

/// Hoist existentials of a Sigma2 formula and instantiate its universals
/// over them. The input must already be in special form.
pub fn closure_of(f: &Formula) -> Result<Closure, SatError> {
    // hoisting merges scopes
    let g = to_nnf(&distinct_binders(f));
    let mut cl = Closure {
        tokens: Vec::new(),
        colors: Vec::new(),
        matrix: Formula::True,
    };
    let body = hoist(&g, true, &mut cl);
    let known: HashMap<Name, Name> = cl
        .tokens
        .iter()
        .filter_map(|(x, p)| p.clone().map(|p| (x.clone(), p)))
        .collect();
    let xs: Vec<Name> = cl.tokens.iter().map(|(x, _)| x.clone()).collect();
    let inst = instantiate(&body, &xs, &known)?;
    cl.matrix = simplify(&fold_places(&inst, &known));
    Ok(cl)
}

fn hoist(f: &Formula, on_spine: bool, cl: &mut Closure) -> Formula {
    match f {
        Formula::Token {
            q: Quant::Exists,
            var,
            place,
            body,
        } => match place {
            Some(p) if on_spine => {
                cl.tokens.push((var.clone(), Some(p.clone())));
                hoist(body, on_spine, cl)
            }
            Some(p) => {
                cl.tokens.push((var.clone(), None));
                Formula::And(vec![
                    Formula::InPlace {
                        place: p.clone(),
                        token: var.clone(),
                    },
                    hoist(body, on_spine, cl),
                ])
            }
            None => {
                cl.tokens.push((var.clone(), None));
                hoist(body, on_spine, cl)
            }
        },
        Formula::Color {
            q: Quant::Exists,
            var,
            body,
        } if body.has_token_quantifier() => {
            cl.colors.push(var.clone());
            hoist(body, on_spine, cl)
        }
        Formula::And(v) => Formula::And(v.iter().map(|c| hoist(c, on_spine, cl)).collect()),
        Formula::Or(v) => Formula::Or(v.iter().map(|c| hoist(c, false, cl)).collect()),
        other => other.clone(),
    }
}

fn instantiate(f: &Formula, xs: &[Name], known: &HashMap<Name, Name>) -> Result<Formula, SatError> {
    Ok(match f {
        Formula::Token {
            q: Quant::Forall,
            var,
            place,
            body,
        } => {
            let mut parts = Vec::new();
            for x in xs {
                let b = body.subst_token(var, x);
                let inst = match (place, known.get(x)) {
                    (Some(p), Some(q)) if p != q => continue,
                    (Some(_), Some(_)) | (None, _) => b,
                    (Some(p), None) => Formula::Or(vec![
                        Formula::not(Formula::InPlace {
                            place: p.clone(),
                            token: x.clone(),
                        }),
                        b,
                    ]),
                };
                parts.push(instantiate(&inst, xs, known)?);
            }
            mk_and(parts)
        }
        Formula::Token {
            q: Quant::Exists, ..
        } => {
            return Err(SatError::FragmentUnsupported(Fragment::Pi2));
        }
        Formula::Color { q, var, body } if body.has_token_quantifier() => {
            if *q == Quant::Exists {
                return Err(SatError::FragmentUnsupported(Fragment::Pi2));
            }
            Formula::Color {
                q: *q,
                var: var.clone(),
                body: Box::new(instantiate(body, xs, known)?),
            }
        }
        Formula::And(v) => mk_and(
            v.iter()
                .map(|c| instantiate(c, xs, known))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Or(v) => mk_or(
            v.iter()
                .map(|c| instantiate(c, xs, known))
                .collect::<Result<_, _>>()?,
        ),
        other => other.clone(),
    })
}

fn fold_places(f: &Formula, known: &HashMap<Name, Name>) -> Formula {
    match f {
        Formula::InPlace { place, token } => match known.get(token) {
            Some(p) => {
                if p == place {
                    Formula::True
                } else {
                    Formula::False
                }
            }
            None => f.clone(),
        },
        Formula::TokenEq(a, b) => match (known.get(a), known.get(b)) {
            (Some(p), Some(q)) if p != q => Formula::False,
            _ => f.clone(),
        },
        Formula::Not(b) => mk_not(fold_places(b, known)),
        Formula::And(v) => mk_and(v.iter().map(|c| fold_places(c, known)).collect()),
        Formula::Or(v) => mk_or(v.iter().map(|c| fold_places(c, known)).collect()),
        Formula::Color { q, var, body } => Formula::Color {
            q: *q,
            var: var.clone(),
            body: Box::new(fold_places(body, known)),
        },
        other => other.clone(),
    }
}

/// The upward closure of a Sigma2 formula as a Sigma1 formula.
pub fn upward_closure(f: &Formula, sig: &Signature) -> Result<Formula, SatError> {
    let s = to_special_form_closed(f, sig)?;
    let frag = classify_fragment(&s);
    if !frag.within_sigma2() {
        return Err(SatError::FragmentUnsupported(frag));
    }
    Ok(closure_of(&s)?.to_formula())
}

// ---------------------------------------------------------------- guesses

/// One guess: a class index per witness and a place (None = outside) per class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Guess {
    pub class_of: Vec<usize>,
    pub place_of_class: Vec<Option<Name>>,
}

struct GuessSpace<'a> {
    cl: &'a Closure,
    /// Candidate places for each witness with an unforced place.
    options: Vec<Vec<Option<Name>>>,
}

impl<'a> GuessSpace<'a> {
    fn new(cl: &'a Closure) -> Self {
        // places that matter for a witness: those its place atoms mention
        let mut mentioned: BTreeMap<Name, BTreeSet<Name>> = BTreeMap::new();
        cl.matrix.visit(&mut |g| {
            if let Formula::InPlace { place, token } = g {
                mentioned
                    .entry(token.clone())
                    .or_default()
                    .insert(place.clone());
            }
        });
        let options = cl
            .tokens
            .iter()
            .map(|(x, p)| match p {
                Some(p) => vec![Some(p.clone())],
                None => {
                    let mut v: Vec<Option<Name>> = mentioned
                        .get(x)
                        .map(|s| s.iter().cloned().map(Some).collect())
                        .unwrap_or_default();
                    v.push(None);
                    v
                }
            })
            .collect();
        GuessSpace { cl, options }
    }

    /// Visit guesses until `f` returns false. Returns the number visited.
    fn for_each(&self, mut f: impl FnMut(&Guess) -> bool) -> usize {
        let n = self.cl.tokens.len();
        let mut class_of = vec![0usize; n];
        let mut count = 0;
        let mut go_on = true;
        self.partitions(0, 0, &mut class_of, &mut |cls, k| {
            if !go_on {
                return;
            }
            // candidate places per class: intersection of member options
            let mut per_class: Vec<Vec<Option<Name>>> = Vec::with_capacity(k);
            for c in 0..k {
                let mut opts: Option<Vec<Option<Name>>> = None;
                for (i, &ci) in cls.iter().enumerate() {
                    if ci != c {
                        continue;
                    }
                    opts = Some(match opts {
                        None => self.options[i].clone(),
                        Some(prev) => {
                            // unforced members accept any place, forced ones pin it
                            let forced_i = self.cl.tokens[i].1.is_some();
                            let forced_prev = prev.len() == 1 && prev[0].is_some();
                            if forced_i && forced_prev {
                                if prev == self.options[i] {
                                    prev
                                } else {
                                    vec![]
                                }
                            } else if forced_i {
                                self.options[i].clone()
                            } else if forced_prev {
                                prev
                            } else {
                                let mut u = prev;
                                for o in &self.options[i] {
                                    if !u.contains(o) {
                                        u.push(o.clone());
                                    }
                                }
                                u
                            }
                        }
                    });
                }
                per_class.push(opts.unwrap_or_default());
            }
            if per_class.iter().any(|o| o.is_empty()) {
                return;
            }
            let mut idx = vec![0usize; k];
            loop {
                let g = Guess {
                    class_of: cls.to_vec(),
                    place_of_class: idx
                        .iter()
                        .enumerate()
                        .map(|(c, &i)| per_class[c][i].clone())
                        .collect(),
                };
                count += 1;
                if !f(&g) {
                    go_on = false;
                    return;
                }
                // odometer
                let mut c = 0;
                loop {
                    if c == k {
                        return;
                    }
                    idx[c] += 1;
                    if idx[c] < per_class[c].len() {
                        break;
                    }
                    idx[c] = 0;
                    c += 1;
                }
            }
        });
        count
    }

    // restricted-growth strings; witnesses with different forced places never merge
    fn partitions(
        &self,
        i: usize,
        k: usize,
        cls: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize], usize),
    ) {
        let n = cls.len();
        if i == n {
            f(cls, k);
            return;
        }
        for c in 0..=k {
            if c < k {
                let pi = &self.cl.tokens[i].1;
                let clash = (0..i).any(|j| {
                    cls[j] == c
                        && matches!((pi, &self.cl.tokens[j].1), (Some(a), Some(b)) if a != b)
                });
                if clash {
                    continue;
                }
            }
            cls[i] = c;
            self.partitions(i + 1, k.max(c + 1), cls, f);
        }
    }
}

fn color_var(k: usize, x: &Name) -> Name {
    Name::from(format!("s{k}_{x}"))
}

/// Apply a guess: the result mentions colors only.
fn apply_guess(cl: &Closure, g: &Guess) -> Formula {
    let rep: HashMap<&Name, &Name> = cl
        .tokens
        .iter()
        .enumerate()
        .map(|(i, (x, _))| {
            let first = cl
                .tokens
                .iter()
                .enumerate()
                .find(|(j, _)| g.class_of[*j] == g.class_of[i])
                .unwrap();
            (x, &first.1 .0)
        })
        .collect();
    let class: HashMap<&Name, usize> = cl
        .tokens
        .iter()
        .enumerate()
        .map(|(i, (x, _))| (x, g.class_of[i]))
        .collect();
    let f = map_token_atoms(
        &cl.matrix,
        &|a| match a {
            Formula::TokenEq(x, y) => Some(if class.get(x) == class.get(y) {
                Formula::True
            } else {
                Formula::False
            }),
            Formula::InPlace { place, token } => {
                let c = class[token];
                Some(if g.place_of_class[c].as_ref() == Some(place) {
                    Formula::True
                } else {
                    Formula::False
                })
            }
            _ => None,
        },
        &|t| match t {
            Term::Color { index, token } => rep.get(token).map(|r| Term::Var(color_var(*index, r))),
            _ => None,
        },
    );
    simplify(&f)
}

fn map_token_atoms(
    f: &Formula,
    atoms: &impl Fn(&Formula) -> Option<Formula>,
    terms: &impl Fn(&Term) -> Option<Term>,
) -> Formula {
    match f {
        Formula::TokenEq(..) | Formula::InPlace { .. } => atoms(f).unwrap_or_else(|| f.clone()),
        Formula::Pred(_) => f.map_terms(terms),
        Formula::Not(b) => Formula::not(map_token_atoms(b, atoms, terms)),
        Formula::And(v) => {
            Formula::And(v.iter().map(|c| map_token_atoms(c, atoms, terms)).collect())
        }
        Formula::Or(v) => Formula::Or(v.iter().map(|c| map_token_atoms(c, atoms, terms)).collect()),
        Formula::Color { q, var, body } => Formula::Color {
            q: *q,
            var: var.clone(),
            body: Box::new(map_token_atoms(body, atoms, terms)),
        },
        Formula::Token {
            q,
            var,
            place,
            body,
        } => Formula::Token {
            q: *q,
            var: var.clone(),
            place: place.clone(),
            body: Box::new(map_token_atoms(body, atoms, terms)),
        },
        other => other.clone(),
    }
}

/// Explicit Sigma0 equivalent of a closed Sigma1 formula: the disjunction
/// over every guess, with color variables existentially closed.
pub fn sigma1_to_sigma0(f: &Formula, sig: &Signature) -> Result<Formula, SatError> {
    let s = to_special_form_closed(f, sig)?;
    let frag = classify_fragment(&s);
    if !frag.within_sigma1() {
        return Err(SatError::FragmentUnsupported(frag));
    }
    let cl = closure_of(&s)?;
    let space = GuessSpace::new(&cl);
    let mut branches = Vec::new();
    space.for_each(|g| {
        let b = apply_guess(&cl, g);
        if b != Formula::False {
            branches.push(exists_colors(b, &cl.colors));
        }
        true
    });
    Ok(simplify(&mk_or(branches)))
}

fn exists_colors(f: Formula, hoisted: &[Name]) -> Formula {
    let mut fv: Vec<Name> = f.free_vars().colors.into_iter().collect();
    // hoisted color variables first, then the per-witness ones
    fv.sort_by_key(|v| (!hoisted.contains(v), v.clone()));
    let mut out = f;
    for v in fv.into_iter().rev() {
        out = Formula::Color {
            q: Quant::Exists,
            var: v,
            body: Box::new(out),
        };
    }
    out
}

// ---------------------------------------------------------------- finite domains

fn domain_atom(v: &Name, vals: &[Color]) -> Formula {
    Formula::Or(
        vals.iter()
            .map(|c| Formula::pred("=", vec![Term::Var(v.clone()), Term::Lit(*c)]))
            .collect(),
    )
}

/// Restrict bound color variables to a finite domain.
fn relativize(f: &Formula, vals: &[Color]) -> Formula {
    match f {
        Formula::Color { q, var, body } => {
            let b = relativize(body, vals);
            let d = domain_atom(var, vals);
            let nb = match q {
                Quant::Exists => Formula::And(vec![d, b]),
                Quant::Forall => Formula::Or(vec![Formula::not(d), b]),
            };
            Formula::Color {
                q: *q,
                var: var.clone(),
                body: Box::new(nb),
            }
        }
        Formula::Not(b) => Formula::not(relativize(b, vals)),
        Formula::And(v) => Formula::And(v.iter().map(|c| relativize(c, vals)).collect()),
        Formula::Or(v) => Formula::Or(v.iter().map(|c| relativize(c, vals)).collect()),
        other => other.clone(),
    }
}

/// Query formula with domain constraints for finite theories. Free color
/// variables are restricted unless listed in `unrestricted`.
fn with_domain(f: &Formula, theory: &ColorTheory, unrestricted: &BTreeSet<Name>) -> Formula {
    match theory.finite_values() {
        None => f.clone(),
        Some(vals) => {
            let mut parts = vec![relativize(f, vals)];
            for v in f.free_vars().colors {
                if !unrestricted.contains(&v) {
                    parts.push(domain_atom(&v, vals));
                }
            }
            Formula::And(parts)
        }
    }
}

// ---------------------------------------------------------------- check_sat

/// Decide a closed formula of the Sigma2 fragment.
pub fn check_sat(f: &Formula, sig: &Signature, opts: &SatOptions) -> Result<SatResult, SatError> {
    let s = to_special_form_closed(f, sig)?;
    let frag = classify_fragment(&s);
    if !frag.within_sigma2() {
        return Err(SatError::FragmentUnsupported(frag));
    }
    let cl = closure_of(&s)?;
    let space = GuessSpace::new(&cl);
    let strategy = match opts.strategy {
        Strategy::Auto => {
            let limit = opts.enumerate_limit;
            let mut count = 0;
            space.for_each(|_| {
                count += 1;
                count <= limit
            });
            if count <= limit {
                Strategy::Enumerate
            } else {
                Strategy::Symbolic
            }
        }
        s => s,
    };
    let mut trace = ReductionTrace {
        fragment: frag,
        closure: cl.to_formula(),
        sigma0: Formula::True,
        strategy,
        guesses: 0,
        queries: 0,
        solver_time: Duration::ZERO,
    };
    let verdict = match strategy {
        Strategy::Symbolic => symbolic(&cl, sig, opts, &mut trace)?,
        _ => enumerate(&cl, &space, sig, opts, &mut trace)?,
    };
    Ok(SatResult { verdict, trace })
}

fn enumerate(
    cl: &Closure,
    space: &GuessSpace<'_>,
    sig: &Signature,
    opts: &SatOptions,
    trace: &mut ReductionTrace,
) -> Result<SatVerdict, SatError> {
    let mut result: Option<SatVerdict> = None;
    let mut unknown: Option<String> = None;
    let mut err: Option<SatError> = None;
    let guesses = space.for_each(|g| {
        let phi = apply_guess(cl, g);
        if phi == Formula::False {
            return true;
        }
        let q = with_domain(&phi, &sig.theory, &BTreeSet::new());
        trace.sigma0 = q.clone();
        trace.queries += 1;
        let start = Instant::now();
        let out = check_formula(&q, &sig.theory, true, &opts.solver);
        trace.solver_time += start.elapsed();
        match out {
            Err(e) => {
                err = Some(e.into());
                false
            }
            Ok(o) => match o.verdict {
                SolverVerdict::Sat => {
                    result = Some(SatVerdict::Sat(witness_from_guess(cl, g, &o.model, sig)));
                    false
                }
                SolverVerdict::Unsat => true,
                SolverVerdict::Unknown(r) => {
                    unknown = Some(r);
                    true
                }
            },
        }
    });
    trace.guesses = guesses;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(match (result, unknown) {
        (Some(r), _) => r,
        (None, Some(u)) => SatVerdict::Unknown(u),
        (None, None) => SatVerdict::Unsat,
    })
}

fn default_color(sig: &Signature) -> Color {
    sig.theory
        .finite_values()
        .and_then(|v| v.first().copied())
        .unwrap_or(0)
}

fn witness_from_guess(
    cl: &Closure,
    g: &Guess,
    model: &BTreeMap<String, Color>,
    sig: &Signature,
) -> Option<ConcreteMarking> {
    let mut m = ConcreteMarking::new(sig.n_colors);
    m.default_colors = vec![default_color(sig); sig.n_colors];
    let mut done = BTreeSet::new();
    for (i, (x, _)) in cl.tokens.iter().enumerate() {
        let c = g.class_of[i];
        if !done.insert(c) {
            continue;
        }
        let Some(place) = &g.place_of_class[c] else {
            continue;
        };
        let colors = (1..=sig.n_colors)
            .map(|k| {
                model
                    .get(color_var(k, x).as_str())
                    .copied()
                    .unwrap_or(default_color(sig))
            })
            .collect();
        m.support.insert(c as TokenId, (place.clone(), colors));
    }
    Some(m)
}

fn symbolic(
    cl: &Closure,
    sig: &Signature,
    opts: &SatOptions,
    trace: &mut ReductionTrace,
) -> Result<SatVerdict, SatError> {
    let mut supply = NameSupply::new();
    supply.reserve_all(&cl.matrix.all_names());
    supply.reserve_all(cl.colors.iter());
    let ids: HashMap<Name, Name> = cl
        .tokens
        .iter()
        .map(|(x, _)| (x.clone(), supply.fresh(&format!("id_{x}"))))
        .collect();
    let pls: HashMap<Name, Name> = cl
        .tokens
        .iter()
        .map(|(x, _)| (x.clone(), supply.fresh(&format!("pl_{x}"))))
        .collect();
    let svars: HashMap<(usize, Name), Name> = cl
        .tokens
        .iter()
        .flat_map(|(x, _)| (1..=sig.n_colors).map(move |k| (k, x.clone())))
        .map(|(k, x)| {
            let n = supply.fresh(color_var(k, &x).as_str());
            ((k, x), n)
        })
        .collect();
    let outside = sig.places.len() as Color;
    let place_code = |p: &Name| sig.place_index(p).expect("known place") as Color;
    let eq = |a: Term, b: Term| Formula::Pred(ColorAtom::new("=", vec![a, b]));
    let pl_term = |x: &Name| -> Term {
        match cl.place_of(x) {
            Some(p) => Term::Lit(place_code(p)),
            None => Term::Var(pls[x].clone()),
        }
    };

    let body = map_token_atoms(
        &cl.matrix,
        &|a| match a {
            Formula::TokenEq(x, y) => {
                Some(eq(Term::Var(ids[x].clone()), Term::Var(ids[y].clone())))
            }
            Formula::InPlace { place, token } => {
                Some(eq(pl_term(token), Term::Lit(place_code(place))))
            }
            _ => None,
        },
        &|t| match t {
            Term::Color { index, token } => svars
                .get(&(*index, token.clone()))
                .map(|v| Term::Var(v.clone())),
            _ => None,
        },
    );
    let mut parts = vec![body];
    // place codes of unforced witnesses: a place index or `outside`
    for (x, p) in &cl.tokens {
        if p.is_none() {
            let v = Term::Var(pls[x].clone());
            parts.push(Formula::pred(">=", vec![v.clone(), Term::Lit(0)]));
            parts.push(Formula::pred("<=", vec![v, Term::Lit(outside)]));
        }
    }
    // equal identities force equal places and colors
    for i in 0..cl.tokens.len() {
        for j in i + 1..cl.tokens.len() {
            let (xi, xj) = (&cl.tokens[i].0, &cl.tokens[j].0);
            let same = eq(Term::Var(ids[xi].clone()), Term::Var(ids[xj].clone()));
            let mut cons = vec![eq(pl_term(xi), pl_term(xj))];
            for k in 1..=sig.n_colors {
                cons.push(eq(
                    Term::Var(svars[&(k, xi.clone())].clone()),
                    Term::Var(svars[&(k, xj.clone())].clone()),
                ));
            }
            parts.push(Formula::Or(vec![Formula::not(same), Formula::And(cons)]));
        }
    }
    let phi = simplify(&Formula::And(parts));
    let bookkeeping: BTreeSet<Name> = ids.values().chain(pls.values()).cloned().collect();
    let q = with_domain(&phi, &sig.theory, &bookkeeping);
    trace.sigma0 = q.clone();
    trace.queries = 1;
    trace.guesses = 1;
    let start = Instant::now();
    let out = check_formula(&q, &sig.theory, true, &opts.solver)?;
    trace.solver_time = start.elapsed();
    Ok(match out.verdict {
        SolverVerdict::Unsat => SatVerdict::Unsat,
        SolverVerdict::Unknown(r) => SatVerdict::Unknown(r),
        SolverVerdict::Sat => {
            let model = &out.model;
            let mut m = ConcreteMarking::new(sig.n_colors);
            m.default_colors = vec![default_color(sig); sig.n_colors];
            let mut by_id: BTreeMap<Color, TokenId> = BTreeMap::new();
            let mut next: TokenId = 0;
            for (x, forced) in &cl.tokens {
                let place = match forced {
                    Some(p) => Some(p.clone()),
                    None => match model.get(pls[x].as_str()) {
                        Some(&c) if c >= 0 && (c as usize) < sig.places.len() => {
                            Some(sig.places[c as usize].clone())
                        }
                        _ => None,
                    },
                };
                let Some(place) = place else { continue };
                let id = match model.get(ids[x].as_str()) {
                    Some(&v) => *by_id.entry(v).or_insert_with(|| {
                        next += 1;
                        next - 1
                    }),
                    None => {
                        next += 1;
                        next - 1
                    }
                };
                let colors = (1..=sig.n_colors)
                    .map(|k| {
                        model
                            .get(svars[&(k, x.clone())].as_str())
                            .copied()
                            .unwrap_or(default_color(sig))
                    })
                    .collect();
                m.support.entry(id).or_insert((place, colors));
            }
            SatVerdict::Sat(Some(m))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marking::evaluate;
    use crate::normal::alpha_eq;
    use crate::parse::parse_formula;

    fn sig() -> Signature {
        Signature::new(ColorTheory::finite_enum(vec![0, 1, 2]), &["p", "q"], 1)
    }

    fn p(s: &str) -> Formula {
        parse_formula(s, &sig()).unwrap()
    }

    #[test]
    fn closure_instantiates_over_witnesses() {
        let f = p("exists x in p . forall y in p . d1(y) = d1(x)");
        let u = upward_closure(&f, &sig()).unwrap();
        assert!(alpha_eq(&u, &p("exists x in p . d1(x) = d1(x)")), "{u}");
        // a universal over a place with no witness there vanishes
        let g = p("(exists x in p . true) & forall y in q . false");
        let u = upward_closure(&g, &sig()).unwrap();
        assert!(alpha_eq(&u, &p("exists x in p . true")), "{u}");
    }

    #[test]
    fn sibling_binders_with_one_name_stay_apart() {
        // built directly: the parser would not produce the shared name
        let f = Formula::And(vec![
            Formula::exists_in("t", "p", Formula::True),
            Formula::exists_in("t", "q", Formula::True),
            Formula::forall_in("s", "p", Formula::False),
        ]);
        let r = check_sat(&f, &sig(), &SatOptions::default()).unwrap();
        assert!(r.verdict.is_unsat(), "{:?}", r.verdict);
        let cl = closure_of(&f).unwrap();
        assert_eq!(cl.tokens.len(), 2);
        assert_ne!(cl.tokens[0].0, cl.tokens[1].0);
    }

    #[test]
    fn guess_space_respects_forced_places() {
        let f = p("exists x in p . exists y in q . true");
        let s = to_special_form_closed(&f, &sig()).unwrap();
        let cl = closure_of(&s).unwrap();
        let space = GuessSpace::new(&cl);
        // x and y can never merge, and their places are fixed
        assert_eq!(space.for_each(|_| true), 1);
        let g = p("(exists x in p . true) | (exists y in q . true)");
        let s = to_special_form_closed(&g, &sig()).unwrap();
        let cl = closure_of(&s).unwrap();
        // partitions {x}{y} with 2x2 places + {xy} with 3 places
        assert_eq!(GuessSpace::new(&cl).for_each(|_| true), 4 + 3);
    }

    #[test]
    fn sigma0_translation() {
        let f = p("exists x, y in p . x != y & d1(x) = d1(y)");
        let s0 = sigma1_to_sigma0(&f, &sig()).unwrap();
        assert!(!s0.has_token_quantifier());
        assert!(
            alpha_eq(&s0, &p("exists color a . exists color b . a = b")),
            "{s0}"
        );
    }

    #[test]
    fn fragment_gate() {
        let f = p("forall x in p . exists y in q . d1(x) = d1(y)");
        assert!(matches!(
            check_sat(&f, &sig(), &SatOptions::default()),
            Err(SatError::FragmentUnsupported(Fragment::Pi2))
        ));
    }

    #[test]
    fn symbolic_identities_are_not_colors() {
        // four distinct tokens although the color domain has three values
        let f = p("exists a, b, c, d in p . a != b & a != c & a != d & b != c & b != d & c != d");
        let opts = SatOptions {
            strategy: Strategy::Symbolic,
            ..SatOptions::default()
        };
        match check_sat(&f, &sig(), &opts).unwrap().verdict {
            SatVerdict::Sat(Some(m)) => assert_eq!(m.support.len(), 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn decides_with_solver() {
        for strategy in [Strategy::Enumerate, Strategy::Symbolic] {
            let opts = SatOptions {
                strategy,
                ..SatOptions::default()
            };
            let sat = p(
                "(exists x in p . true) & (forall x, y in p . x = y) & (forall z in p . d1(z) = 2)",
            );
            let r = check_sat(&sat, &sig(), &opts).unwrap();
            match &r.verdict {
                SatVerdict::Sat(Some(m)) => {
                    assert_eq!(m.support.len(), 1);
                    assert!(evaluate(m, &sat, &sig().theory).unwrap(), "{m}");
                }
                other => panic!("{strategy:?}: {other:?}"),
            }
            let unsat = p("(exists x, y in p . x != y) & forall x, y in p . x = y");
            assert!(
                check_sat(&unsat, &sig(), &opts).unwrap().verdict.is_unsat(),
                "{strategy:?}"
            );
            let empty_ok = p("(forall x in p . false) | exists y in p . d1(y) = 5");
            let r = check_sat(&empty_ok, &sig(), &opts).unwrap();
            assert!(r.verdict.is_sat(), "{strategy:?}");
        }
    }
}
