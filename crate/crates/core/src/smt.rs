//! SMT-LIB v2 output and an external solver driven over stdin/stdout.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex, OnceLock};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;
use wait_timeout::ChildExt;

use crate::formula::{Formula, Quant};
use crate::name::Name;
use crate::theory::{Color, ColorTheory, Sort, Term};

/// Environment variable naming the solver executable.
pub const SOLVER_ENV: &str = "CMLKIT_SOLVER";
/// Environment variable capping concurrent solver processes.
pub const JOBS_ENV: &str = "CMLKIT_SOLVER_JOBS";

#[derive(Debug, Error)]
pub enum SmtError {
    #[error("solver executable `{0}` could not be started: {1}")]
    SolverNotFound(String, String),
    #[error("solver i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver protocol: {0}")]
    Protocol(String),
    #[error("cannot encode for the solver: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SolverVerdict {
    Sat,
    Unsat,
    Unknown(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverOutcome {
    pub verdict: SolverVerdict,
    /// Integral values of the declared constants (only when sat).
    pub model: BTreeMap<String, Color>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub executable: String,
    pub args: Vec<String>,
    pub timeout: Duration,
    /// Write every script here as `query_NNNNNN.smt2`.
    pub emit_dir: Option<PathBuf>,
    /// Replaces the derived `set-logic` value.
    pub logic: Option<String>,
    /// Reuse verdicts of identical scripts.
    pub cache: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let executable = std::env::var(SOLVER_ENV).unwrap_or_else(|_| "z3".to_string());
        let args = default_args(&executable);
        SolverConfig {
            executable,
            args,
            timeout: Duration::from_secs(60),
            emit_dir: None,
            logic: None,
            cache: true,
        }
    }
}

fn default_args(exe: &str) -> Vec<String> {
    let base = std::path::Path::new(exe)
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or(exe);
    if base.starts_with("z3") {
        vec!["-in".into(), "-smt2".into()]
    } else if base.starts_with("cvc") {
        vec!["--lang=smt2".into(), "--produce-models".into()]
    } else {
        vec![]
    }
}

impl SolverConfig {
    pub fn with_executable(mut self, exe: &str) -> Self {
        self.args = default_args(exe);
        self.executable = exe.to_string();
        self
    }

    pub fn with_timeout(mut self, t: Duration) -> Self {
        self.timeout = t;
        self
    }
}

// ---------------------------------------------------------------- emission

/// A Sigma0 query: free color variables are implicitly existential.
#[derive(Debug, Clone)]
pub struct Query<'a> {
    pub formula: &'a Formula,
    pub theory: &'a ColorTheory,
    /// Ask for a model.
    pub want_model: bool,
}

fn quote(name: &str) -> String {
    let simple = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "_.".contains(c))
        && !name.chars().next().unwrap().is_ascii_digit();
    if simple && !is_reserved(name) {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

fn is_reserved(s: &str) -> bool {
    matches!(
        s,
        "true"
            | "false"
            | "and"
            | "or"
            | "not"
            | "exists"
            | "forall"
            | "let"
            | "ite"
            | "distinct"
            | "assert"
    )
}

fn literal(c: Color, sort: Sort) -> String {
    let body = match sort {
        Sort::Int => c.unsigned_abs().to_string(),
        Sort::Real => format!("{}.0", c.unsigned_abs()),
    };
    if c < 0 {
        format!("(- {body})")
    } else {
        body
    }
}

fn emit_term(t: &Term, th: &ColorTheory, out: &mut String) -> Result<(), SmtError> {
    match t {
        Term::Var(v) => out.push_str(&quote(v)),
        Term::Lit(c) => out.push_str(&literal(*c, th.sort)),
        Term::Color { index, token } => {
            return Err(SmtError::Unsupported(format!(
                "token color d{index}({token}) in a solver query"
            )));
        }
        Term::App(g, args) => {
            if args.is_empty() {
                out.push_str(&quote(g));
                return Ok(());
            }
            out.push('(');
            let interpreted = th.functions.get(g).is_some_and(|s| s.interpreted);
            out.push_str(&if interpreted { g.to_string() } else { quote(g) });
            for a in args {
                out.push(' ');
                emit_term(a, th, out)?;
            }
            out.push(')');
        }
    }
    Ok(())
}

fn emit_formula(f: &Formula, th: &ColorTheory, out: &mut String) -> Result<(), SmtError> {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Pred(a) => {
            let interpreted = th.predicates.get(&a.pred).is_some_and(|s| s.interpreted);
            if a.args.is_empty() {
                out.push_str(&quote(&a.pred));
                return Ok(());
            }
            out.push('(');
            out.push_str(&if interpreted {
                a.pred.to_string()
            } else {
                quote(&a.pred)
            });
            for t in &a.args {
                out.push(' ');
                emit_term(t, th, out)?;
            }
            out.push(')');
        }
        Formula::Not(b) => {
            out.push_str("(not ");
            emit_formula(b, th, out)?;
            out.push(')');
        }
        Formula::And(v) | Formula::Or(v) => {
            if v.is_empty() {
                out.push_str(if matches!(f, Formula::And(_)) {
                    "true"
                } else {
                    "false"
                });
                return Ok(());
            }
            out.push_str(if matches!(f, Formula::And(_)) {
                "(and"
            } else {
                "(or"
            });
            for c in v {
                out.push(' ');
                emit_formula(c, th, out)?;
            }
            out.push(')');
        }
        Formula::Color { q, var, body } => {
            out.push_str(if *q == Quant::Exists {
                "(exists (("
            } else {
                "(forall (("
            });
            out.push_str(&quote(var));
            out.push(' ');
            out.push_str(th.sort.smt_name());
            out.push_str(")) ");
            emit_formula(body, th, out)?;
            out.push(')');
        }
        Formula::TokenEq(..) | Formula::InPlace { .. } | Formula::Token { .. } => {
            return Err(SmtError::Unsupported(format!(
                "token-level construct `{f}` in a solver query"
            )));
        }
    }
    Ok(())
}

fn used_symbols(f: &Formula, th: &ColorTheory) -> (BTreeSet<Name>, BTreeMap<Name, (usize, bool)>) {
    let fv = f.free_vars();
    let mut syms = BTreeMap::new();
    f.visit(&mut |g| {
        if let Formula::Pred(a) = g {
            if th.predicates.get(&a.pred).is_some_and(|s| !s.interpreted) {
                syms.insert(a.pred.clone(), (a.args.len(), true));
            }
            for t in &a.args {
                t.visit(&mut |t| {
                    if let Term::App(g, args) = t {
                        if th.functions.get(g).is_some_and(|s| !s.interpreted) {
                            syms.insert(g.clone(), (args.len(), false));
                        }
                    }
                });
            }
        }
    });
    (fv.colors, syms)
}

// `v op c`, `v - w op c` and mirror images: the difference-logic shape.
fn is_difference_atom(f: &Formula) -> bool {
    let simple = |t: &Term| match t {
        Term::Var(_) | Term::Lit(_) => true,
        Term::App(_, a) => a.is_empty(),
        Term::Color { .. } => false,
    };
    let diff = |t: &Term| match t {
        Term::App(g, a) if g.as_str() == "-" && a.len() == 2 => simple(&a[0]) && simple(&a[1]),
        t => simple(t),
    };
    match f {
        Formula::Pred(a) if a.args.len() == 2 => {
            let lit = |t: &Term| matches!(t, Term::Lit(_));
            (diff(&a.args[0]) && (simple(&a.args[1]) || lit(&a.args[1])))
                || (simple(&a.args[0]) && diff(&a.args[1]))
        }
        Formula::Pred(_) => false,
        _ => f.children().iter().all(|c| is_difference_atom(c)),
    }
}

/// The `set-logic` value for a query.
pub fn derive_logic(f: &Formula, th: &ColorTheory) -> String {
    let quantified = f.has_quantifier();
    let (_, syms) = used_symbols(f, th);
    let uf = !syms.is_empty();
    let mut base = th.smt_logic.clone();
    if base == "IDL" && (quantified || !is_difference_atom(f)) {
        base = "LIA".into();
    }
    format!(
        "{}{}{}",
        if quantified { "" } else { "QF_" },
        if uf { "UF" } else { "" },
        base
    )
}

/// Deterministic script for a Sigma0 formula over color variables.
pub fn emit_smt(q: &Query<'_>, logic_override: Option<&str>) -> Result<String, SmtError> {
    let th = q.theory;
    let sort = th.sort.smt_name();
    let (consts, syms) = used_symbols(q.formula, th);
    let mut s = String::new();
    if q.want_model {
        s.push_str("(set-option :produce-models true)\n");
    }
    let logic = logic_override
        .map(|l| l.to_string())
        .unwrap_or_else(|| derive_logic(q.formula, th));
    s.push_str(&format!("(set-logic {logic})\n"));
    for (name, (arity, is_pred)) in &syms {
        let args = vec![sort; *arity].join(" ");
        let ret = if *is_pred { "Bool" } else { sort };
        s.push_str(&format!("(declare-fun {} ({args}) {ret})\n", quote(name)));
    }
    for c in &consts {
        s.push_str(&format!("(declare-fun {} () {sort})\n", quote(c)));
    }
    let mut body = String::new();
    emit_formula(q.formula, th, &mut body)?;
    s.push_str(&format!("(assert {body})\n(check-sat)\n"));
    if q.want_model && !consts.is_empty() {
        s.push_str("(get-value (");
        let names: Vec<String> = consts.iter().map(|c| quote(c)).collect();
        s.push_str(&names.join(" "));
        s.push_str("))\n");
    }
    s.push_str("(exit)\n");
    Ok(s)
}

// ---------------------------------------------------------------- process

struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().unwrap();
        while *n == 0 {
            n = self.cv.wait(n).unwrap();
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

fn semaphore() -> &'static Semaphore {
    static SEM: OnceLock<Semaphore> = OnceLock::new();
    SEM.get_or_init(|| {
        let n = std::env::var(JOBS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(4)
            });
        Semaphore {
            permits: Mutex::new(n),
            cv: Condvar::new(),
        }
    })
}

fn cache() -> &'static Mutex<HashMap<String, SolverOutcome>> {
    static CACHE: OnceLock<Mutex<HashMap<String, SolverOutcome>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

static QUERY_COUNTER: AtomicUsize = AtomicUsize::new(0);
static SOLVER_CALLS: AtomicUsize = AtomicUsize::new(0);

/// Number of solver processes started so far in this process.
pub fn solver_calls() -> usize {
    SOLVER_CALLS.load(Ordering::Relaxed)
}

/// Run one script. A timeout or an `unknown` answer gives `Unknown`.
pub fn run_query(script: &str, cfg: &SolverConfig) -> Result<SolverOutcome, SmtError> {
    if let Some(dir) = &cfg.emit_dir {
        std::fs::create_dir_all(dir)?;
        let n = QUERY_COUNTER.fetch_add(1, Ordering::Relaxed);
        std::fs::write(dir.join(format!("query_{n:06}.smt2")), script)?;
    }
    if cfg.cache {
        if let Some(hit) = cache().lock().unwrap().get(script) {
            let mut o = hit.clone();
            o.elapsed = Duration::ZERO;
            return Ok(o);
        }
    }
    let out = {
        let _permit = semaphore().acquire();
        spawn_and_wait(script, cfg)?
    };
    if cfg.cache && out.verdict != SolverVerdict::Unknown("timeout".into()) {
        cache()
            .lock()
            .unwrap()
            .insert(script.to_string(), out.clone());
    }
    Ok(out)
}

fn spawn_and_wait(script: &str, cfg: &SolverConfig) -> Result<SolverOutcome, SmtError> {
    SOLVER_CALLS.fetch_add(1, Ordering::Relaxed);
    let start = Instant::now();
    let mut child = Command::new(&cfg.executable)
        .args(&cfg.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SmtError::SolverNotFound(cfg.executable.clone(), e.to_string()))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let input = script.to_string();
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(input.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let status = child.wait_timeout(cfg.timeout)?;
    let elapsed = start.elapsed();
    if status.is_none() {
        let _ = child.kill();
        let _ = child.wait();
        let _ = writer.join();
        let _ = reader.join();
        return Ok(SolverOutcome {
            verdict: SolverVerdict::Unknown("timeout".into()),
            model: BTreeMap::new(),
            elapsed,
        });
    }
    let _ = writer.join();
    let text = reader
        .join()
        .map_err(|_| SmtError::Protocol("reader thread panicked".into()))?;
    parse_response(&text, elapsed)
}

fn parse_response(text: &str, elapsed: Duration) -> Result<SolverOutcome, SmtError> {
    let exprs = parse_sexprs(text)?;
    let first = exprs
        .first()
        .ok_or_else(|| SmtError::Protocol("empty solver output".into()))?;
    let verdict = match first {
        Sexp::Atom(a) if a == "sat" => SolverVerdict::Sat,
        Sexp::Atom(a) if a == "unsat" => SolverVerdict::Unsat,
        Sexp::Atom(a) if a == "unknown" => SolverVerdict::Unknown("solver answered unknown".into()),
        Sexp::List(l) if matches!(l.first(), Some(Sexp::Atom(e)) if e == "error") => {
            return Err(SmtError::Protocol(format!(
                "solver error: {}",
                sexp_text(first)
            )));
        }
        other => {
            return Err(SmtError::Protocol(format!(
                "unexpected answer `{}`",
                sexp_text(other)
            )))
        }
    };
    let mut model = BTreeMap::new();
    if verdict == SolverVerdict::Sat {
        for e in &exprs[1..] {
            if let Sexp::List(pairs) = e {
                if matches!(pairs.first(), Some(Sexp::Atom(a)) if a == "error") {
                    return Err(SmtError::Protocol(format!(
                        "solver error: {}",
                        sexp_text(e)
                    )));
                }
                for p in pairs {
                    if let Sexp::List(kv) = p {
                        if kv.len() == 2 {
                            if let Sexp::Atom(name) = &kv[0] {
                                if let Some(v) = value_of(&kv[1])? {
                                    model.insert(name.trim_matches('|').to_string(), v);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(SolverOutcome {
        verdict,
        model,
        elapsed,
    })
}

// Integral value of a model term; non-integral reals give `None`.
fn value_of(e: &Sexp) -> Result<Option<Color>, SmtError> {
    match e {
        Sexp::Atom(a) => {
            if let Ok(v) = a.parse::<Color>() {
                return Ok(Some(v));
            }
            if let Some(int) = a.strip_suffix(".0") {
                if let Ok(v) = int.parse::<Color>() {
                    return Ok(Some(v));
                }
            }
            if a.parse::<f64>().is_ok() {
                return Ok(None);
            }
            Err(SmtError::Protocol(format!(
                "model value `{a}` is not a number"
            )))
        }
        Sexp::List(l) => match l.as_slice() {
            [Sexp::Atom(m), x] if m == "-" => Ok(value_of(x)?.map(|v| -v)),
            [Sexp::Atom(d), _, _] if d == "/" => Ok(None),
            _ => Err(SmtError::Protocol(format!(
                "unsupported model value `{}`",
                sexp_text(e)
            ))),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn sexp_text(e: &Sexp) -> String {
    match e {
        Sexp::Atom(a) => a.clone(),
        Sexp::List(l) => format!(
            "({})",
            l.iter().map(sexp_text).collect::<Vec<_>>().join(" ")
        ),
    }
}

fn parse_sexprs(text: &str) -> Result<Vec<Sexp>, SmtError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' => stack.push(Vec::new()),
            ')' => {
                let done = stack
                    .pop()
                    .ok_or_else(|| SmtError::Protocol("unbalanced `)`".into()))?;
                stack
                    .last_mut()
                    .ok_or_else(|| SmtError::Protocol("unbalanced `)`".into()))?
                    .push(Sexp::List(done));
            }
            c if c.is_whitespace() => {}
            ';' => {
                for d in chars.by_ref() {
                    if d == '\n' {
                        break;
                    }
                }
            }
            '"' | '|' => {
                let mut s = String::new();
                s.push(c);
                for d in chars.by_ref() {
                    s.push(d);
                    if d == c {
                        break;
                    }
                }
                stack.last_mut().unwrap().push(Sexp::Atom(s));
            }
            _ => {
                let mut s = String::from(c);
                while let Some(&d) = chars.peek() {
                    if d.is_whitespace() || d == '(' || d == ')' {
                        break;
                    }
                    s.push(d);
                    chars.next();
                }
                stack.last_mut().unwrap().push(Sexp::Atom(s));
            }
        }
    }
    if stack.len() != 1 {
        return Err(SmtError::Protocol("truncated solver output".into()));
    }
    Ok(stack.pop().unwrap())
}

/// Emit and run in one go.
pub fn check_formula(
    f: &Formula,
    theory: &ColorTheory,
    want_model: bool,
    cfg: &SolverConfig,
) -> Result<SolverOutcome, SmtError> {
    let script = emit_smt(
        &Query {
            formula: f,
            theory,
            want_model,
        },
        cfg.logic.as_deref(),
    )?;
    run_query(&script, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn th() -> ColorTheory {
        let mut t = ColorTheory::int();
        t.declare_function("f", 1).unwrap();
        t
    }

    fn atom(p: &str, a: Term, b: Term) -> Formula {
        Formula::pred(p, vec![a, b])
    }

    #[test]
    fn script_is_deterministic_and_declares_symbols() {
        let f = Formula::And(vec![
            atom("=", Term::var("b"), Term::app("f", vec![Term::var("a")])),
            atom("<", Term::var("a"), Term::Lit(-2)),
        ]);
        let s1 = emit_smt(
            &Query {
                formula: &f,
                theory: &th(),
                want_model: true,
            },
            None,
        )
        .unwrap();
        let s2 = emit_smt(
            &Query {
                formula: &f,
                theory: &th(),
                want_model: true,
            },
            None,
        )
        .unwrap();
        assert_eq!(s1, s2);
        assert!(s1.contains("(set-logic QF_UFLIA)"));
        assert!(s1.contains("(declare-fun f (Int) Int)"));
        assert!(s1.contains("(declare-fun a () Int)"));
        assert!(s1.contains("(< a (- 2))"));
    }

    #[test]
    fn token_constructs_rejected() {
        let f = Formula::teq("x", "y");
        assert!(matches!(
            emit_smt(
                &Query {
                    formula: &f,
                    theory: &th(),
                    want_model: false
                },
                None
            ),
            Err(SmtError::Unsupported(_))
        ));
    }

    #[test]
    fn logic_derivation() {
        let idl = ColorTheory::difference_logic();
        let d = atom(
            "<=",
            Term::app("-", vec![Term::var("a"), Term::var("b")]),
            Term::Lit(3),
        );
        assert_eq!(derive_logic(&d, &idl), "QF_IDL");
        let nd = atom(
            "<=",
            Term::app(
                "-",
                vec![
                    Term::app("-", vec![Term::var("a"), Term::var("b")]),
                    Term::var("c"),
                ],
            ),
            Term::Lit(3),
        );
        assert_eq!(derive_logic(&nd, &idl), "QF_LIA");
        let q = Formula::exists_color("c", atom("=", Term::var("c"), Term::Lit(0)));
        assert_eq!(derive_logic(&q, &ColorTheory::int()), "LIA");
    }

    #[test]
    fn response_parsing() {
        let o = parse_response("sat\n((a 3)\n (|b c| (- 4)))\n", Duration::ZERO).unwrap();
        assert_eq!(o.verdict, SolverVerdict::Sat);
        assert_eq!(o.model.get("a"), Some(&3));
        assert_eq!(o.model.get("b c"), Some(&-4));
        let u = parse_response("unsat\n", Duration::ZERO).unwrap();
        assert_eq!(u.verdict, SolverVerdict::Unsat);
        assert!(parse_response("(error \"boom\")", Duration::ZERO).is_err());
        assert!(parse_response("sat\n((a \"x\"))", Duration::ZERO).is_err());
        let r = parse_response("sat\n((a (/ 1 2)) (b 2.0))", Duration::ZERO).unwrap();
        assert_eq!(r.model.get("a"), None);
        assert_eq!(r.model.get("b"), Some(&2));
    }

    #[test]
    fn missing_solver_is_reported() {
        let cfg = SolverConfig {
            cache: false,
            ..SolverConfig::default()
        }
        .with_executable("/nonexistent/solver-binary");
        let r = check_formula(&Formula::True, &th(), false, &cfg);
        assert!(matches!(r, Err(SmtError::SolverNotFound(..))));
    }
}
