//! Color theories: the first-order vocabulary token colors live in.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::name::Name;

/// Value of a single color component. Finite-enum and integer theories use it
/// directly; real theories only expose integral model values.
pub type Color = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sort {
    Int,
    Real,
}

impl Sort {
    pub fn smt_name(self) -> &'static str {
        match self {
            Sort::Int => "Int",
            Sort::Real => "Real",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum DomainKind {
    Infinite,
    FiniteEnum(Vec<Color>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Symbol {
    pub arity: usize,
    /// Interpreted symbols have a fixed meaning in the solver logic;
    /// the rest are declared as uninterpreted functions.
    pub interpreted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColorTheory {
    pub name: String,
    pub sort: Sort,
    pub domain: DomainKind,
    /// Arithmetic family written into solver scripts ("LIA", "IDL", "LRA").
    /// The `QF_`/`UF` decorations are derived per query.
    pub smt_logic: String,
    pub functions: BTreeMap<Name, Symbol>,
    pub predicates: BTreeMap<Name, Symbol>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TermError {
    #[error("unknown function symbol `{0}`")]
    UnknownFunction(Name),
    #[error("unknown predicate symbol `{0}`")]
    UnknownPredicate(Name),
    #[error("`{name}` expects {expected} argument(s), got {got}")]
    Arity {
        name: Name,
        expected: usize,
        got: usize,
    },
    #[error("color index {index} out of range 1..={max}")]
    ColorIndex { index: usize, max: usize },
    #[error("unknown theory `{0}`")]
    UnknownTheory(String),
    #[error("symbol `{0}` already declared")]
    Duplicate(Name),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    /// Color variable.
    Var(Name),
    /// `dK(x)`: the K-th color component (1-based) of token `x`.
    Color {
        index: usize,
        token: Name,
    },
    App(Name, Vec<Term>),
    Lit(Color),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColorAtom {
    pub pred: Name,
    pub args: Vec<Term>,
}

impl ColorAtom {
    pub fn new(pred: &str, args: Vec<Term>) -> Self {
        ColorAtom {
            pred: Name::new(pred),
            args,
        }
    }
}

const ORDER_PREDS: [&str; 5] = ["=", "<", "<=", ">", ">="];

impl ColorTheory {
    fn arithmetic(name: &str, sort: Sort, logic: &str, ops: &[&str]) -> Self {
        let mut functions = BTreeMap::new();
        for op in ops {
            functions.insert(
                Name::new(op),
                Symbol {
                    arity: 2,
                    interpreted: true,
                },
            );
        }
        let mut predicates = BTreeMap::new();
        for p in ORDER_PREDS {
            predicates.insert(
                Name::new(p),
                Symbol {
                    arity: 2,
                    interpreted: true,
                },
            );
        }
        ColorTheory {
            name: name.to_string(),
            sort,
            domain: DomainKind::Infinite,
            smt_logic: logic.to_string(),
            functions,
            predicates,
        }
    }

    pub fn int() -> Self {
        Self::arithmetic("int", Sort::Int, "LIA", &["+", "-"])
    }

    pub fn difference_logic() -> Self {
        Self::arithmetic("idl", Sort::Int, "IDL", &["-"])
    }

    pub fn real() -> Self {
        Self::arithmetic("real", Sort::Real, "LRA", &["+", "-"])
    }

    /// Small finite domain with order predicates only; used by the oracle.
    pub fn finite_enum(values: Vec<Color>) -> Self {
        let mut t = Self::arithmetic("enum", Sort::Int, "LIA", &[]);
        let mut vals = values;
        vals.sort_unstable();
        vals.dedup();
        t.domain = DomainKind::FiniteEnum(vals);
        t
    }

    /// Resolve a theory by the name used in model-file headers:
    /// `int`, `idl`, `real`, `enum` (values 0,1,2) or `enum(v1, v2, ...)`.
    pub fn by_name(spec: &str) -> Result<Self, TermError> {
        let s = spec.trim();
        match s {
            "int" | "lia" => return Ok(Self::int()),
            "idl" => return Ok(Self::difference_logic()),
            "real" | "lra" => return Ok(Self::real()),
            "enum" => return Ok(Self::finite_enum(vec![0, 1, 2])),
            _ => {}
        }
        if let Some(inner) = s.strip_prefix("enum(").and_then(|r| r.strip_suffix(')')) {
            let vals: Result<Vec<Color>, _> = inner
                .split(',')
                .map(|v| v.trim().parse::<Color>())
                .collect();
            if let Ok(v) = vals {
                if !v.is_empty() {
                    return Ok(Self::finite_enum(v));
                }
            }
        }
        Err(TermError::UnknownTheory(s.to_string()))
    }

    pub fn declare_function(&mut self, name: &str, arity: usize) -> Result<(), TermError> {
        let n = Name::new(name);
        if self.functions.contains_key(&n) || self.predicates.contains_key(&n) {
            return Err(TermError::Duplicate(n));
        }
        self.functions.insert(
            n,
            Symbol {
                arity,
                interpreted: false,
            },
        );
        Ok(())
    }

    pub fn declare_predicate(&mut self, name: &str, arity: usize) -> Result<(), TermError> {
        let n = Name::new(name);
        if self.functions.contains_key(&n) || self.predicates.contains_key(&n) {
            return Err(TermError::Duplicate(n));
        }
        self.predicates.insert(
            n,
            Symbol {
                arity,
                interpreted: false,
            },
        );
        Ok(())
    }

    pub fn finite_values(&self) -> Option<&[Color]> {
        match &self.domain {
            DomainKind::FiniteEnum(v) => Some(v),
            DomainKind::Infinite => None,
        }
    }

    pub fn check_term(&self, t: &Term, n_colors: usize) -> Result<(), TermError> {
        match t {
            Term::Var(_) | Term::Lit(_) => Ok(()),
            Term::Color { index, .. } => {
                if *index == 0 || *index > n_colors {
                    Err(TermError::ColorIndex {
                        index: *index,
                        max: n_colors,
                    })
                } else {
                    Ok(())
                }
            }
            Term::App(f, args) => {
                let sym = self
                    .functions
                    .get(f)
                    .ok_or_else(|| TermError::UnknownFunction(f.clone()))?;
                // binary minus doubles as unary negation
                let ok = sym.arity == args.len() || (f.as_str() == "-" && args.len() == 1);
                if !ok {
                    return Err(TermError::Arity {
                        name: f.clone(),
                        expected: sym.arity,
                        got: args.len(),
                    });
                }
                args.iter().try_for_each(|a| self.check_term(a, n_colors))
            }
        }
    }

    pub fn check_atom(&self, a: &ColorAtom, n_colors: usize) -> Result<(), TermError> {
        let sym = self
            .predicates
            .get(&a.pred)
            .ok_or_else(|| TermError::UnknownPredicate(a.pred.clone()))?;
        if sym.arity != a.args.len() {
            return Err(TermError::Arity {
                name: a.pred.clone(),
                expected: sym.arity,
                got: a.args.len(),
            });
        }
        a.args.iter().try_for_each(|t| self.check_term(t, n_colors))
    }

    /// Names of uninterpreted function and predicate symbols.
    pub fn uninterpreted(&self) -> BTreeSet<Name> {
        self.functions
            .iter()
            .chain(self.predicates.iter())
            .filter(|(_, s)| !s.interpreted)
            .map(|(n, _)| n.clone())
            .collect()
    }
}

/// The builtin theories, keyed by header name.
pub fn declare_builtin_theories() -> Vec<ColorTheory> {
    vec![
        ColorTheory::int(),
        ColorTheory::difference_logic(),
        ColorTheory::real(),
        ColorTheory::finite_enum(vec![0, 1, 2]),
    ]
}

impl Term {
    pub fn var(n: &str) -> Self {
        Term::Var(Name::new(n))
    }

    pub fn color(index: usize, token: &str) -> Self {
        Term::Color {
            index,
            token: Name::new(token),
        }
    }

    pub fn app(f: &str, args: Vec<Term>) -> Self {
        Term::App(Name::new(f), args)
    }

    pub fn visit(&self, f: &mut impl FnMut(&Term)) {
        f(self);
        if let Term::App(_, args) = self {
            for a in args {
                a.visit(f);
            }
        }
    }

    /// Bottom-up rewrite.
    pub fn map(&self, f: &impl Fn(&Term) -> Option<Term>) -> Term {
        let inner = match self {
            Term::App(g, args) => Term::App(g.clone(), args.iter().map(|a| a.map(f)).collect()),
            other => other.clone(),
        };
        f(&inner).unwrap_or(inner)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Color { index, token } => write!(f, "d{index}({token})"),
            Term::Lit(c) => write!(f, "{c}"),
            Term::App(g, args) if is_infix_op(g) && args.len() == 2 => {
                write!(f, "(")?;
                write_operand(f, &args[0])?;
                write!(f, " {g} ")?;
                write_operand(f, &args[1])?;
                write!(f, ")")
            }
            Term::App(g, args) if g.as_str() == "-" && args.len() == 1 => {
                write!(f, "(-")?;
                write_operand(f, &args[0])?;
                write!(f, ")")
            }
            Term::App(g, args) => {
                write!(f, "{g}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, t: &Term) -> fmt::Result {
    write!(f, "{t}")
}

pub(crate) fn is_infix_op(op: &str) -> bool {
    matches!(op, "+" | "-")
}

pub(crate) fn is_infix_pred(p: &str) -> bool {
    ORDER_PREDS.contains(&p)
}

impl fmt::Display for ColorAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if is_infix_pred(&self.pred) && self.args.len() == 2 {
            write!(f, "{} {} {}", self.args[0], self.pred, self.args[1])
        } else {
            write!(f, "{}(", self.pred)?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{a}")?;
            }
            write!(f, ")")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_lookup() {
        assert_eq!(ColorTheory::by_name("int").unwrap().sort, Sort::Int);
        let e = ColorTheory::by_name("enum(2, 0, 2)").unwrap();
        assert_eq!(e.finite_values(), Some(&[0, 2][..]));
        assert!(ColorTheory::by_name("bogus").is_err());
        assert_eq!(declare_builtin_theories().len(), 4);
    }

    #[test]
    fn arity_checks() {
        let mut t = ColorTheory::int();
        t.declare_function("f", 1).unwrap();
        assert!(t
            .check_term(&Term::app("f", vec![Term::color(1, "x")]), 2)
            .is_ok());
        assert_eq!(
            t.check_term(&Term::app("f", vec![]), 2),
            Err(TermError::Arity {
                name: Name::new("f"),
                expected: 1,
                got: 0
            })
        );
        assert!(matches!(
            t.check_term(&Term::color(3, "x"), 2),
            Err(TermError::ColorIndex { .. })
        ));
        assert!(t.check_term(&Term::app("-", vec![Term::Lit(1)]), 1).is_ok());
        assert!(t.declare_function("f", 2).is_err());
        assert!(t
            .check_atom(&ColorAtom::new("<=", vec![Term::Lit(0), Term::var("c")]), 1)
            .is_ok());
        assert!(t.check_atom(&ColorAtom::new("r", vec![]), 1).is_err());
    }

    #[test]
    fn term_display() {
        let t = Term::app(
            "+",
            vec![Term::color(2, "x"), Term::app("f", vec![Term::Lit(-1)])],
        );
        assert_eq!(t.to_string(), "(d2(x) + f(-1))");
    }
}
