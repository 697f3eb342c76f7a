//! Command-line front end.
//!
//! Exit codes: 0 success, 1 the property fails, 2 usage, parse or fragment
//! errors, 3 solver failure or unknown verdict.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::fragment::classify_fragment;
use crate::image;
use crate::net::{parse_model, Cpn};
use crate::oracle::{check_images, Bounds};
use crate::parse::parse_formula_file;
use crate::sat::{check_sat, SatError, SatOptions, SatVerdict, Strategy};
use crate::sig::Signature;
use crate::smt::{SolverConfig, JOBS_ENV};
use crate::verify::{self, Verdict, VerificationReport, VerifyError, VerifyOptions};
use crate::{Formula, Interpretation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "cmlkit",
    version,
    about = "Symbolic verification of colored Petri nets"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// SMT solver executable (default: $CMLKIT_SOLVER, then z3)
    #[arg(long, global = true)]
    pub solver: Option<String>,
    /// Per-query timeout in seconds
    #[arg(long, global = true, default_value_t = 60.0)]
    pub timeout: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write every solver script into this directory
    #[arg(long, global = true)]
    pub emit_smt: Option<PathBuf>,
    /// Concurrent solver processes
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = StrategyArg::Auto)]
    pub strategy: StrategyArg,
    /// Keep checking lemmas after the first failure
    #[arg(long, global = true)]
    pub full: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum StrategyArg {
    Auto,
    Enumerate,
    Symbolic,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide satisfiability of a closed Sigma2 formula
    CheckSat {
        formula: PathBuf,
        /// Take places and theory from this model when the file has no header
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Symbolic successors of a formula
    Post(ImageArgs),
    /// Symbolic predecessors of a formula
    Pre(ImageArgs),
    /// Markings all of whose successors satisfy a Pi1 formula
    PreTilde {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        formula: PathBuf,
    },
    /// Check {pre} transition {post}
    CheckHoare {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        transition: String,
        #[arg(long)]
        post: PathBuf,
    },
    /// Is a target reachable from the initial states within k steps
    BoundedReach {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(short, long)]
        k: usize,
        /// Iterate pre from the target instead of post from init
        #[arg(long)]
        backward: bool,
    },
    /// Check an inductive invariant, or an (init, inv, aux) instance
    CheckInvariant {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        inv: PathBuf,
        /// Inductive strengthening of inv
        #[arg(long)]
        aux: Option<PathBuf>,
    },
    /// inv & pre~(inv) & ... & pre~^k(inv)
    Strengthen {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        inv: PathBuf,
        #[arg(short, long)]
        k: usize,
    },
    /// Compare symbolic images with explicit enumeration
    #[command(hide = true)]
    OracleCheck {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        formula: PathBuf,
        #[arg(long, default_value_t = 3)]
        max_tokens: usize,
        /// Color values to enumerate, comma separated
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        colors: Option<Vec<i64>>,
    },
}

#[derive(Args, Debug)]
pub struct ImageArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub formula: PathBuf,
    /// One transition only (default: all of them)
    #[arg(long)]
    pub transition: Option<String>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            msg: msg.into(),
        }
    }
}

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Self {
        let code = match &e {
            VerifyError::Sat(SatError::Smt(_)) => EXIT_SOLVER,
            VerifyError::Budget(_) => EXIT_SOLVER,
            _ => EXIT_USAGE,
        };
        let msg = if e.is_fragment_error() {
            format!("FragmentUnsupported: {e} (satisfiability is undecidable beyond Sigma2)")
        } else {
            e.to_string()
        };
        Failure { code, msg }
    }
}

impl From<SatError> for Failure {
    fn from(e: SatError) -> Self {
        VerifyError::Sat(e).into()
    }
}

impl From<image::ImageError> for Failure {
    fn from(e: image::ImageError) -> Self {
        VerifyError::Image(e).into()
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<Cpn, Failure> {
    parse_model(&read(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_formula(path: &Path, sig: Option<&Signature>) -> Result<(Signature, Formula), Failure> {
    parse_formula_file(&read(path)?, sig)
        .map_err(|e| Failure::usage(format!("{}:{}", path.display(), e)))
}

struct Out {
    format: Format,
    text: String,
    json: serde_json::Value,
}

fn sat_options(g: &Global) -> Result<SatOptions, Failure> {
    if g.timeout <= 0.0 || !g.timeout.is_finite() {
        return Err(Failure::usage("--timeout must be positive"));
    }
    let mut solver = SolverConfig::default();
    if let Some(s) = &g.solver {
        solver = solver.with_executable(s);
    }
    solver = solver.with_timeout(Duration::from_secs_f64(g.timeout));
    solver.emit_dir = g.emit_smt.clone();
    let strategy = match g.strategy {
        StrategyArg::Auto => Strategy::Auto,
        StrategyArg::Enumerate => Strategy::Enumerate,
        StrategyArg::Symbolic => Strategy::Symbolic,
    };
    Ok(SatOptions {
        strategy,
        solver,
        ..SatOptions::default()
    })
}

fn report_out(format: Format, r: &VerificationReport) -> (i32, Out) {
    let code = match r.verdict {
        Verdict::Holds => EXIT_OK,
        Verdict::Fails { .. } => EXIT_FAILS,
        Verdict::Unknown { .. } => EXIT_SOLVER,
    };
    (
        code,
        Out {
            format,
            text: r.to_string(),
            json: serde_json::to_value(r).expect("report serializes"),
        },
    )
}

fn formula_out(format: Format, f: &Formula) -> Out {
    let frag = classify_fragment(f);
    Out {
        format,
        text: format!("{f}\n"),
        json: json!({ "formula": f.to_string(), "fragment": frag.name() }),
    }
}

fn dispatch(cli: &Cli) -> Result<(i32, Out), Failure> {
    let g = &cli.global;
    let fmt = g.format;
    let sat = sat_options(g)?;
    let vopts = VerifyOptions {
        sat: sat.clone(),
        full: g.full,
        ..VerifyOptions::default()
    };
    match &cli.command {
        Command::CheckSat { formula, model } => {
            let net = model.as_deref().map(load_model).transpose()?;
            let (sig, f) = load_formula(formula, net.as_ref().map(|n| &n.signature))?;
            let r = check_sat(&f, &sig, &sat)?;
            let (code, word) = match &r.verdict {
                SatVerdict::Sat(_) => (EXIT_OK, "sat".to_string()),
                SatVerdict::Unsat => (EXIT_OK, "unsat".to_string()),
                SatVerdict::Unknown(why) => (EXIT_SOLVER, format!("unknown ({why})")),
            };
            let mut text = format!("{word}\n");
            if let SatVerdict::Sat(Some(m)) = &r.verdict {
                text.push_str(&format!("witness: {m}\n"));
            }
            text.push_str(&format!(
                "fragment: {}, strategy: {:?}, guesses: {}, queries: {}\n",
                r.trace.fragment, r.trace.strategy, r.trace.guesses, r.trace.queries
            ));
            let json = json!({
                "verdict": word,
                "witness": match &r.verdict { SatVerdict::Sat(Some(m)) => Some(m.to_string()), _ => None },
                "trace": r.trace,
            });
            Ok((
                code,
                Out {
                    format: fmt,
                    text,
                    json,
                },
            ))
        }
        Command::Post(a) | Command::Pre(a) => {
            let forward = matches!(cli.command, Command::Post(_));
            let net = load_model(&a.model)?;
            let (_, f) = load_formula(&a.formula, Some(&net.signature))?;
            let img = match &a.transition {
                Some(t) => {
                    let t = net
                        .transition(t)
                        .map_err(|e| Failure::usage(e.to_string()))?;
                    if forward {
                        image::post_formula(&f, &net, t)?
                    } else {
                        image::pre_formula(&f, &net, t)?
                    }
                }
                None => {
                    if forward {
                        image::post_all(&f, &net)?
                    } else {
                        image::pre_all(&f, &net)?
                    }
                }
            };
            Ok((EXIT_OK, formula_out(fmt, &img)))
        }
        Command::PreTilde { model, formula } => {
            let net = load_model(model)?;
            let (_, f) = load_formula(formula, Some(&net.signature))?;
            Ok((EXIT_OK, formula_out(fmt, &image::pre_tilde(&f, &net)?)))
        }
        Command::CheckHoare {
            model,
            pre,
            transition,
            post,
        } => {
            let net = load_model(model)?;
            let (_, p) = load_formula(pre, Some(&net.signature))?;
            let (_, q) = load_formula(post, Some(&net.signature))?;
            net.transition(transition)
                .map_err(|e| Failure::usage(e.to_string()))?;
            Ok(report_out(
                fmt,
                &verify::check_hoare(&net, &p, transition, &q, &vopts)?,
            ))
        }
        Command::BoundedReach {
            model,
            init,
            target,
            k,
            backward,
        } => {
            let net = load_model(model)?;
            let (_, i) = load_formula(init, Some(&net.signature))?;
            let (_, t) = load_formula(target, Some(&net.signature))?;
            let opts = VerifyOptions {
                backward: *backward,
                ..vopts
            };
            let r = verify::bounded_reach(&net, &i, &t, *k, &opts)?;
            // reaching the target is reported as a failing safety property
            Ok(report_out(fmt, &r))
        }
        Command::CheckInvariant {
            model,
            init,
            inv,
            aux,
        } => {
            let net = load_model(model)?;
            let (_, i) = load_formula(init, Some(&net.signature))?;
            let (_, v) = load_formula(inv, Some(&net.signature))?;
            let r = match aux {
                Some(a) => {
                    let (_, a) = load_formula(a, Some(&net.signature))?;
                    verify::check_invariance_instance(&net, &i, &v, &a, &vopts)?
                }
                None => verify::check_inductive_invariant(&net, &i, &v, &vopts)?,
            };
            Ok(report_out(fmt, &r))
        }
        Command::Strengthen { model, inv, k } => {
            let net = load_model(model)?;
            let (_, v) = load_formula(inv, Some(&net.signature))?;
            Ok((
                EXIT_OK,
                formula_out(fmt, &verify::strengthen(&net, &v, *k)?),
            ))
        }
        Command::OracleCheck {
            model,
            formula,
            max_tokens,
            colors,
        } => {
            let net = load_model(model)?;
            let (_, f) = load_formula(formula, Some(&net.signature))?;
            let mut bounds = Bounds::for_signature(&net.signature, *max_tokens);
            if let Some(c) = colors {
                bounds.colors = c.clone();
            }
            let r = check_images(&f, &net, &bounds, &Interpretation::new())
                .map_err(|e| Failure::usage(e.to_string()))?;
            let mut text = format!(
                "instances: {}, mismatches: {}\n",
                r.instances,
                r.mismatches.len()
            );
            for m in r.mismatches.iter().take(10) {
                text.push_str(&format!(
                    "  {} at {}: symbolic {}, explicit {}\n",
                    m.operator, m.marking, m.symbolic, m.concrete
                ));
            }
            let code = if r.agrees() { EXIT_OK } else { EXIT_FAILS };
            Ok((
                code,
                Out {
                    format: fmt,
                    text,
                    json: serde_json::to_value(&r).expect("report serializes"),
                },
            ))
        }
    }
}

/// Run with the given arguments (program name first) and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be positive");
            return EXIT_USAGE;
        }
        std::env::set_var(JOBS_ENV, j.to_string());
        // fails harmlessly when a pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global();
    }
    match dispatch(&cli) {
        Ok((code, out)) => {
            match out.format {
                Format::Text => print!("{}", out.text),
                Format::Json => {
                    println!("{}", serde_json::to_string_pretty(&out.json).expect("json"))
                }
            }
            code
        }
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}
