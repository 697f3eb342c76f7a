//! Verification drivers: Hoare triples, bounded reachability, inductive
//! invariants and invariant strengthening.
//!
//! Every proof obligation becomes a lemma whose formula must be
//! unsatisfiable for the obligation to hold.

use std::fmt::{self, Write as _};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::formula::Formula;
use crate::fragment::{classify_fragment, Fragment};
use crate::image::{self, ImageError};
use crate::net::Cpn;
use crate::normal::{cnf_clauses, mk_and, mk_not, simplify, to_special_form_closed, NormalError};
use crate::sat::{check_sat, ser_display, SatError, SatOptions, SatVerdict};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("{what} must be in {expected}, found {found}")]
    Fragment {
        what: String,
        expected: &'static str,
        found: Fragment,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error(transparent)]
    Normal(#[from] NormalError),
    #[error("resource budget exceeded: {0}")]
    Budget(String),
}

impl VerifyError {
    /// True when the input lies outside the decidable fragments.
    pub fn is_fragment_error(&self) -> bool {
        matches!(
            self,
            VerifyError::Fragment { .. }
                | VerifyError::Sat(SatError::FragmentUnsupported(_))
                | VerifyError::Image(ImageError::Fragment { .. })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LemmaVerdict {
    Unsat,
    Sat,
    Unknown,
    /// Not checked because an earlier lemma already failed.
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma {
    pub id: usize,
    /// Transition name, or `init`, `implication`, `reach`.
    pub subject: String,
    /// Index of the invariant conjunct this lemma is about.
    pub conjunct: Option<usize>,
    pub depth: Option<usize>,
    #[serde(serialize_with = "ser_display")]
    pub formula: Formula,
    pub verdict: LemmaVerdict,
    pub counterexample: Option<String>,
    pub note: Option<String>,
    pub time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails {
        lemma: usize,
        counterexample: Option<String>,
    },
    Unknown {
        reason: String,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub problem: String,
    pub verdict: Verdict,
    pub lemmas: Vec<Lemma>,
    /// (transition, conjunct) pairs discharged because they share no place.
    pub stable_pairs: usize,
    /// Depth at which the target was hit, for reachability.
    pub reached_at: Option<usize>,
    pub total_ms: f64,
}

impl VerificationReport {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn count(&self, v: LemmaVerdict) -> usize {
        self.lemmas.iter().filter(|l| l.verdict == v).count()
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        writeln!(s, "problem: {}", self.problem)?;
        for l in &self.lemmas {
            let mut tag = l.subject.clone();
            if let Some(c) = l.conjunct {
                write!(tag, "#{c}")?;
            }
            if let Some(d) = l.depth {
                write!(tag, "@{d}")?;
            }
            write!(
                s,
                "  lemma {:>3} {:<20} {:<8} {:>9.1} ms",
                l.id,
                tag,
                format!("{:?}", l.verdict).to_lowercase(),
                l.time_ms
            )?;
            if let Some(n) = &l.note {
                write!(s, "  ({n})")?;
            }
            writeln!(s)?;
            if let Some(m) = &l.counterexample {
                writeln!(s, "      counterexample: {m}")?;
            }
        }
        writeln!(
            s,
            "lemmas: {} ({} unsat, {} sat, {} unknown, {} skipped); stable pairs: {}",
            self.lemmas.len(),
            self.count(LemmaVerdict::Unsat),
            self.count(LemmaVerdict::Sat),
            self.count(LemmaVerdict::Unknown),
            self.count(LemmaVerdict::Skipped),
            self.stable_pairs
        )?;
        if let Some(d) = self.reached_at {
            writeln!(s, "target reached at depth {d}")?;
        }
        match &self.verdict {
            Verdict::Holds => write!(s, "verdict: holds")?,
            Verdict::Fails { lemma, .. } => write!(s, "verdict: fails at lemma {lemma}")?,
            Verdict::Unknown { reason } => write!(s, "verdict: unknown ({reason})")?,
        }
        writeln!(s, " [{:.1} ms]", self.total_ms)?;
        f.write_str(&s)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub sat: SatOptions,
    /// Check every lemma even after one fails.
    pub full: bool,
    /// Bounded reachability iterates pre from the target instead of post
    /// from the initial states.
    pub backward: bool,
    /// Most formulas kept per reachability frontier.
    pub max_frontier: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            sat: SatOptions::default(),
            full: false,
            backward: false,
            max_frontier: 4096,
        }
    }
}

fn need(
    what: &str,
    f: &Formula,
    net: &Cpn,
    expected: &'static str,
    ok: fn(Fragment) -> bool,
) -> Result<Formula, VerifyError> {
    let s = to_special_form_closed(f, &net.signature)?;
    let frag = classify_fragment(&s);
    if !ok(frag) {
        return Err(VerifyError::Fragment {
            what: what.into(),
            expected,
            found: frag,
        });
    }
    Ok(s)
}

fn need_net(
    net: &Cpn,
    expected: &'static str,
    ok: fn(Fragment) -> bool,
) -> Result<(), VerifyError> {
    let c = net.class();
    if !ok(c) {
        return Err(VerifyError::Fragment {
            what: "net guards".into(),
            expected,
            found: c,
        });
    }
    Ok(())
}

struct Pending {
    subject: String,
    conjunct: Option<usize>,
    depth: Option<usize>,
    formula: Formula,
}

impl Pending {
    fn new(subject: &str, conjunct: Option<usize>, formula: Formula) -> Self {
        Pending {
            subject: subject.into(),
            conjunct,
            depth: None,
            formula,
        }
    }
}

// Check lemmas in parallel. Once lemma i is Sat, lemmas after i are not
// started and are reported as skipped, so the report does not depend on
// scheduling.
fn discharge(
    pending: Vec<Pending>,
    net: &Cpn,
    opts: &VerifyOptions,
) -> Result<Vec<Lemma>, VerifyError> {
    let first_sat = AtomicUsize::new(usize::MAX);
    let results: Vec<Result<Lemma, VerifyError>> = pending
        .into_par_iter()
        .enumerate()
        .map(|(id, p)| {
            let mut lemma = Lemma {
                id,
                subject: p.subject,
                conjunct: p.conjunct,
                depth: p.depth,
                formula: p.formula,
                verdict: LemmaVerdict::Skipped,
                counterexample: None,
                note: None,
                time_ms: 0.0,
            };
            if !opts.full && first_sat.load(Ordering::SeqCst) < id {
                return Ok(lemma);
            }
            let start = Instant::now();
            let r = check_sat(&lemma.formula, &net.signature, &opts.sat)?;
            lemma.time_ms = ms(start.elapsed());
            match r.verdict {
                SatVerdict::Unsat => lemma.verdict = LemmaVerdict::Unsat,
                SatVerdict::Sat(w) => {
                    lemma.verdict = LemmaVerdict::Sat;
                    lemma.counterexample = w.map(|m| m.to_string());
                    first_sat.fetch_min(id, Ordering::SeqCst);
                }
                SatVerdict::Unknown(why) => {
                    lemma.verdict = LemmaVerdict::Unknown;
                    lemma.note = Some(why);
                }
            }
            Ok(lemma)
        })
        .collect();
    let mut lemmas = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    if !opts.full {
        let cut = first_sat.load(Ordering::SeqCst);
        for l in lemmas.iter_mut().filter(|l| l.id > cut) {
            *l = Lemma {
                verdict: LemmaVerdict::Skipped,
                counterexample: None,
                note: None,
                time_ms: 0.0,
                ..l.clone()
            };
        }
    }
    Ok(lemmas)
}

fn verdict_of(lemmas: &[Lemma]) -> Verdict {
    if let Some(l) = lemmas.iter().find(|l| l.verdict == LemmaVerdict::Sat) {
        return Verdict::Fails {
            lemma: l.id,
            counterexample: l.counterexample.clone(),
        };
    }
    if let Some(l) = lemmas.iter().find(|l| l.verdict == LemmaVerdict::Unknown) {
        return Verdict::Unknown {
            reason: format!("lemma {}: {}", l.id, l.note.clone().unwrap_or_default()),
        };
    }
    Verdict::Holds
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

fn report(
    problem: &str,
    lemmas: Vec<Lemma>,
    stable_pairs: usize,
    start: Instant,
) -> VerificationReport {
    VerificationReport {
        problem: problem.into(),
        verdict: verdict_of(&lemmas),
        lemmas,
        stable_pairs,
        reached_at: None,
        total_ms: ms(start.elapsed()),
    }
}

/// Does every `tau`-successor of a `pre`-marking satisfy `post`?
pub fn check_hoare(
    net: &Cpn,
    pre: &Formula,
    transition: &str,
    post: &Formula,
    opts: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    let start = Instant::now();
    need_net(net, "Sigma2", Fragment::within_sigma2)?;
    let pre = need("precondition", pre, net, "Sigma2", Fragment::within_sigma2)?;
    let post = to_special_form_closed(post, &net.signature)?;
    let frag = classify_fragment(&post);
    if !matches!(frag, Fragment::Pi2) && !frag.within_sigma2() {
        return Err(VerifyError::Fragment {
            what: "postcondition".into(),
            expected: "Pi2",
            found: frag,
        });
    }
    let t = net
        .transition(transition)
        .map_err(|e| VerifyError::Budget(e.to_string()))?;
    let image = image::post_formula(&pre, net, t)?;
    let pending = cnf_clauses(&post)
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            Pending::new(
                &t.name,
                Some(i),
                simplify(&mk_and(vec![image.clone(), mk_not(c)])),
            )
        })
        .collect();
    let lemmas = discharge(pending, net, opts)?;
    Ok(report(&format!("hoare {transition}"), lemmas, 0, start))
}

// Lemmas for `post_tau(inv) => conjunct` over every transition.
fn inductive_lemmas(
    net: &Cpn,
    inv: &Formula,
    conjuncts: &[Formula],
) -> Result<(Vec<Pending>, usize), VerifyError> {
    let sig = &net.signature;
    let places: Vec<_> = conjuncts
        .iter()
        .map(|c| to_special_form_closed(c, sig).map(|s| s.places()))
        .collect::<Result<_, _>>()?;
    let images: Vec<Formula> = net
        .transitions
        .par_iter()
        .map(|t| image::post_formula(inv, net, t))
        .collect::<Result<_, _>>()?;
    let mut pending = Vec::new();
    let mut stable = 0;
    for (t, img) in net.transitions.iter().zip(&images) {
        let touched = t.touched_places();
        for (i, c) in conjuncts.iter().enumerate() {
            // a conjunct that only looks at untouched places cannot change
            if places[i].is_disjoint(&touched) {
                stable += 1;
                continue;
            }
            pending.push(Pending::new(
                &t.name,
                Some(i),
                simplify(&mk_and(vec![img.clone(), mk_not(c.clone())])),
            ));
        }
    }
    Ok((pending, stable))
}

/// Is `inv` true initially and preserved by every transition?
pub fn check_inductive_invariant(
    net: &Cpn,
    init: &Formula,
    inv: &Formula,
    opts: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    let start = Instant::now();
    need_net(net, "Sigma2", Fragment::within_sigma2)?;
    let init = need(
        "initial formula",
        init,
        net,
        "Sigma2",
        Fragment::within_sigma2,
    )?;
    let inv = need("invariant", inv, net, "BSigma1", Fragment::within_bsigma1)?;
    let conjuncts = cnf_clauses(&inv);
    let mut pending: Vec<Pending> = conjuncts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            Pending::new(
                "init",
                Some(i),
                simplify(&mk_and(vec![init.clone(), mk_not(c.clone())])),
            )
        })
        .collect();
    let (step, stable) = inductive_lemmas(net, &inv, &conjuncts)?;
    pending.extend(step);
    let lemmas = discharge(pending, net, opts)?;
    Ok(report("inductive invariant", lemmas, stable, start))
}

/// `init => aux`, `aux => inv`, and `aux` inductive.
pub fn check_invariance_instance(
    net: &Cpn,
    init: &Formula,
    inv: &Formula,
    aux: &Formula,
    opts: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    let start = Instant::now();
    need_net(net, "Sigma2", Fragment::within_sigma2)?;
    let init = need(
        "initial formula",
        init,
        net,
        "Sigma2",
        Fragment::within_sigma2,
    )?;
    let inv = need("invariant", inv, net, "BSigma1", Fragment::within_bsigma1)?;
    let aux = need(
        "auxiliary invariant",
        aux,
        net,
        "BSigma1",
        Fragment::within_bsigma1,
    )?;
    let aux_cs = cnf_clauses(&aux);
    let mut pending: Vec<Pending> = aux_cs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            Pending::new(
                "init",
                Some(i),
                simplify(&mk_and(vec![init.clone(), mk_not(c.clone())])),
            )
        })
        .collect();
    for (i, c) in cnf_clauses(&inv).into_iter().enumerate() {
        pending.push(Pending::new(
            "implication",
            Some(i),
            simplify(&mk_and(vec![aux.clone(), mk_not(c)])),
        ));
    }
    let (step, stable) = inductive_lemmas(net, &aux, &aux_cs)?;
    pending.extend(step);
    let lemmas = discharge(pending, net, opts)?;
    Ok(report("invariance instance", lemmas, stable, start))
}

fn disjuncts(f: Formula) -> Vec<Formula> {
    match f {
        Formula::Or(v) => v,
        Formula::False => Vec::new(),
        f => vec![f],
    }
}

/// Can a `target` marking be reached from an `init` marking in at most `k`
/// steps? `Holds` means unreachable; `Fails` carries a witness at the first
/// depth where the target is hit.
pub fn bounded_reach(
    net: &Cpn,
    init: &Formula,
    target: &Formula,
    k: usize,
    opts: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    let start = Instant::now();
    need_net(net, "Sigma2", Fragment::within_sigma2)?;
    let init = need(
        "initial formula",
        init,
        net,
        "Sigma2",
        Fragment::within_sigma2,
    )?;
    let target = need("target", target, net, "Sigma2", Fragment::within_sigma2)?;
    let (from, goal) = if opts.backward {
        (target, init)
    } else {
        (init, target)
    };
    let sig = &net.signature;
    let mut lemmas: Vec<Lemma> = Vec::new();
    let mut frontier = disjuncts(from);
    let mut reached = None;
    let mut unknown = None;
    for depth in 0..=k {
        // each frontier piece is checked against the goal, and kept only
        // when it is itself satisfiable
        let checks: Vec<Result<(Lemma, bool, bool), VerifyError>> = frontier
            .par_iter()
            .map(|f| {
                let t0 = Instant::now();
                let hit_f = simplify(&mk_and(vec![f.clone(), goal.clone()]));
                let hit = check_sat(&hit_f, sig, &opts.sat)?.verdict;
                let mut alive = true;
                if hit.is_unsat() && depth < k {
                    alive = !check_sat(f, sig, &opts.sat)?.verdict.is_unsat();
                }
                let (verdict, cex, note) = match hit {
                    SatVerdict::Sat(w) => (LemmaVerdict::Sat, w.map(|m| m.to_string()), None),
                    SatVerdict::Unsat => (LemmaVerdict::Unsat, None, None),
                    SatVerdict::Unknown(r) => (LemmaVerdict::Unknown, None, Some(r)),
                };
                let unk = verdict == LemmaVerdict::Unknown;
                let lemma = Lemma {
                    id: 0,
                    subject: "reach".into(),
                    conjunct: None,
                    depth: Some(depth),
                    formula: hit_f,
                    verdict,
                    counterexample: cex,
                    note,
                    time_ms: ms(t0.elapsed()),
                };
                Ok((lemma, alive, unk))
            })
            .collect();
        let mut next = Vec::new();
        for (f, r) in frontier.iter().zip(checks) {
            let (mut lemma, alive, unk) = r?;
            lemma.id = lemmas.len();
            if lemma.verdict == LemmaVerdict::Sat && reached.is_none() {
                reached = Some(depth);
            }
            if unk && unknown.is_none() {
                unknown = lemma.note.clone();
            }
            lemmas.push(lemma);
            if alive && depth < k {
                next.push(f.clone());
            }
        }
        if reached.is_some() || depth == k {
            break;
        }
        let stepped: Vec<Result<Vec<Formula>, ImageError>> = next
            .par_iter()
            .map(|f| {
                let mut out = Vec::new();
                for t in &net.transitions {
                    let img = if opts.backward {
                        image::pre_formula(f, net, t)?
                    } else {
                        image::post_formula(f, net, t)?
                    };
                    out.extend(disjuncts(img));
                }
                Ok(out)
            })
            .collect();
        frontier = Vec::new();
        for s in stepped {
            frontier.extend(s?);
        }
        if frontier.len() > opts.max_frontier {
            return Err(VerifyError::Budget(format!(
                "{} formulas at depth {}",
                frontier.len(),
                depth + 1
            )));
        }
        if frontier.is_empty() {
            break;
        }
    }
    let mut r = report(
        if opts.backward {
            "bounded reachability (backward)"
        } else {
            "bounded reachability"
        },
        lemmas,
        0,
        start,
    );
    r.reached_at = reached;
    if reached.is_none() {
        if let Some(why) = unknown {
            r.verdict = Verdict::Unknown { reason: why };
        }
    }
    Ok(r)
}

/// `inv & pre~(inv) & ... & pre~^k(inv)`: markings from which every run of
/// at most `k` steps stays inside `inv`.
pub fn strengthen(net: &Cpn, inv: &Formula, k: usize) -> Result<Formula, VerifyError> {
    need_net(net, "Sigma1", Fragment::within_sigma1)?;
    let inv = need("invariant", inv, net, "Pi1", Fragment::within_pi1)?;
    let mut parts = vec![inv.clone()];
    let mut cur = inv;
    for _ in 0..k {
        cur = image::pre_tilde(&cur, net)?;
        parts.push(cur.clone());
    }
    Ok(simplify(&mk_and(parts)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::parse_model;
    use crate::parse::parse_formula;

    fn lemma(id: usize, v: LemmaVerdict) -> Lemma {
        Lemma {
            id,
            subject: "t".into(),
            conjunct: None,
            depth: None,
            formula: Formula::True,
            verdict: v,
            counterexample: None,
            note: None,
            time_ms: 0.0,
        }
    }

    #[test]
    fn verdict_prefers_first_failure() {
        use LemmaVerdict::*;
        assert_eq!(
            verdict_of(&[lemma(0, Unsat), lemma(1, Unsat)]),
            Verdict::Holds
        );
        assert!(matches!(
            verdict_of(&[lemma(0, Unknown), lemma(1, Sat)]),
            Verdict::Fails { lemma: 1, .. }
        ));
        assert!(matches!(
            verdict_of(&[lemma(0, Unknown), lemma(1, Unsat)]),
            Verdict::Unknown { .. }
        ));
    }

    #[test]
    fn fragment_gates() {
        let net = parse_model(
            "theory int; colors 1; places p, q; trans t: p -> q : !(exists z in q . true);",
        )
        .unwrap();
        let f = |s: &str| parse_formula(s, &net.signature).unwrap();
        let opts = VerifyOptions::default();
        let e = check_inductive_invariant(
            &net,
            &f("true"),
            &f("forall x in p . exists y in q . d1(x) = d1(y)"),
            &opts,
        )
        .unwrap_err();
        assert!(e.is_fragment_error(), "{e}");
        let e = strengthen(&net, &f("forall x in p . true"), 1).unwrap_err();
        assert!(e.is_fragment_error(), "{e}");
    }

    #[test]
    fn strengthen_zero_is_identity() {
        let net =
            parse_model("theory int; colors 1; places p, q; trans t: p -> q : d1(y1) = d1(x1);")
                .unwrap();
        let inv = parse_formula("forall x in q . d1(x) >= 0", &net.signature).unwrap();
        let s = strengthen(&net, &inv, 0).unwrap();
        assert!(crate::normal::alpha_eq(&s, &inv));
        let s1 = strengthen(&net, &inv, 1).unwrap();
        assert!(classify_fragment(&s1).within_pi1());
    }
}
