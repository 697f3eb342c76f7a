//! Concrete syntax output. `parse(print(f))` gives back `f` up to binder names.

use std::fmt;

use crate::formula::{Formula, Quant};
use crate::name::Name;

// Binding strength, loosest first.
const P_OR: u8 = 1;
const P_AND: u8 = 2;
const P_NOT: u8 = 3;

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self, 0)
    }
}

fn write_formula(f: &mut fmt::Formatter<'_>, phi: &Formula, ctx: u8) -> fmt::Result {
    match phi {
        Formula::True => f.write_str("true"),
        Formula::False => f.write_str("false"),
        Formula::TokenEq(a, b) => write!(f, "{a} = {b}"),
        Formula::InPlace { place, token } => write!(f, "{place}({token})"),
        Formula::Pred(a) => {
            if ctx >= P_NOT && a.args.len() == 2 && crate::theory::is_infix_pred(&a.pred) {
                write!(f, "({a})")
            } else {
                write!(f, "{a}")
            }
        }
        Formula::Not(inner) => match &**inner {
            Formula::TokenEq(a, b) => paren_if(f, ctx >= P_NOT, |f| write!(f, "{a} != {b}")),
            Formula::Pred(a) if a.pred.as_str() == "=" && a.args.len() == 2 => {
                paren_if(f, ctx >= P_NOT, |f| {
                    write!(f, "{} != {}", a.args[0], a.args[1])
                })
            }
            _ => {
                f.write_str("!")?;
                write_formula(f, inner, P_NOT)
            }
        },
        Formula::And(v) => junction(f, v, " & ", "true", P_AND, ctx),
        Formula::Or(v) => junction(f, v, " | ", "false", P_OR, ctx),
        Formula::Token { .. } | Formula::Color { .. } => {
            paren_if(f, ctx > 0, |f| write_quantifier(f, phi))
        }
    }
}

fn junction(
    f: &mut fmt::Formatter<'_>,
    v: &[Formula],
    sep: &str,
    unit: &str,
    prec: u8,
    ctx: u8,
) -> fmt::Result {
    match v.len() {
        0 => f.write_str(unit),
        1 => write_formula(f, &v[0], ctx),
        _ => paren_if(f, ctx > prec, |f| {
            for (i, c) in v.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                // nested junctions of the same kind keep their parentheses
                write_formula(f, c, prec + 1)?;
            }
            Ok(())
        }),
    }
}

fn paren_if(
    f: &mut fmt::Formatter<'_>,
    cond: bool,
    inner: impl FnOnce(&mut fmt::Formatter<'_>) -> fmt::Result,
) -> fmt::Result {
    if cond {
        f.write_str("(")?;
        inner(f)?;
        f.write_str(")")
    } else {
        inner(f)
    }
}

#[derive(PartialEq)]
enum Kind {
    Token(Option<Name>),
    Color,
}

fn write_quantifier(f: &mut fmt::Formatter<'_>, phi: &Formula) -> fmt::Result {
    let (q, kind) = head(phi).expect("quantifier");
    let mut vars = Vec::new();
    let mut cur = phi;
    while let Some((q2, k2)) = head(cur) {
        if q2 != q || k2 != kind {
            break;
        }
        let (var, body) = match cur {
            Formula::Token { var, body, .. } | Formula::Color { var, body, .. } => (var, body),
            _ => unreachable!(),
        };
        vars.push(var.as_str());
        cur = body;
    }
    f.write_str(if q == Quant::Exists {
        "exists "
    } else {
        "forall "
    })?;
    if kind == Kind::Color {
        f.write_str("color ")?;
    }
    f.write_str(&vars.join(", "))?;
    if let Kind::Token(Some(p)) = &kind {
        write!(f, " in {p}")?;
    }
    f.write_str(" . ")?;
    write_formula(f, cur, 0)
}

fn head(phi: &Formula) -> Option<(Quant, Kind)> {
    match phi {
        Formula::Token { q, place, .. } => Some((*q, Kind::Token(place.clone()))),
        Formula::Color { q, .. } => Some((*q, Kind::Color)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use crate::parse::parse_formula;
    use crate::sig::Signature;
    use crate::theory::ColorTheory;

    fn sig() -> Signature {
        let mut t = ColorTheory::int();
        t.declare_function("f", 1).unwrap();
        Signature::new(t, &["p", "q"], 2)
    }

    #[test]
    fn round_trips() {
        for src in [
            "forall x, y in p . x = y",
            "(exists x in p . true) & !(exists y in q . d1(y) < 0)",
            "forall a in p, t in q . d2(a) = f(d1(t))",
            "exists x . (p(x) | q(x)) & d1(x) != -1",
            "exists color c . forall x in p . d1(x) - c >= 0 | x != x",
            "(exists x in p . true) | (exists y in q . true) & true",
        ] {
            let f = parse_formula(src, &sig()).unwrap();
            let printed = f.to_string();
            let g = parse_formula(&printed, &sig()).unwrap_or_else(|e| panic!("{printed}: {e}"));
            assert_eq!(f, g, "{printed}");
        }
    }

    #[test]
    fn mixed_guards_are_not_merged() {
        let f = parse_formula("forall x . forall y in p . x = y", &sig()).unwrap();
        assert_eq!(f.to_string(), "forall x . forall y in p . x = y");
    }
}
