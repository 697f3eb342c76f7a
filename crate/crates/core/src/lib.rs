//! Symbolic verification of colored Petri nets.

pub mod formula;
pub mod name;
pub mod parse;
pub mod print;
pub mod sig;
pub mod theory;

pub use formula::{Formula, FreeVars, Quant};
pub use name::{Name, NameSupply};
pub use parse::{parse_formula, parse_formula_file, ParseError};
pub use sig::Signature;
pub use theory::{Color, ColorAtom, ColorTheory, DomainKind, Sort, Term, TermError};
pub mod fragment;
pub mod normal;
pub use fragment::{classify_fragment, Fragment};
pub mod marking;
pub use marking::{evaluate, ConcreteMarking, Interpretation};
pub mod smt;
pub use smt::{SolverConfig, SolverVerdict};
pub mod sat;
pub use sat::{check_sat, SatOptions, SatResult, SatVerdict, Strategy};
pub mod net;
pub use net::{parse_model, Cpn, CpnTransition, NetError};
pub mod image;
pub use image::{post_all, post_formula, pre_all, pre_formula, pre_tilde};
pub mod cli;
pub mod gen;
pub mod oracle;
pub mod verify;
pub use verify::{
    bounded_reach, check_hoare, check_inductive_invariant, check_invariance_instance, strengthen,
    Lemma, LemmaVerdict, Verdict, VerificationReport, VerifyError, VerifyOptions,
};
