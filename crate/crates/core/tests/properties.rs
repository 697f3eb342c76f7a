//! Property tests: rewrites preserve meaning on every small marking, and the
//! decision procedure agrees with explicit evaluation.

use cmlkit::gen::{random_formula, random_net, GenOptions};
use cmlkit::marking::{evaluate, Interpretation};
use cmlkit::normal::{alpha_eq, simplify, to_nnf, to_pnf, to_special_form_closed};
use cmlkit::oracle::{enumerate_markings, predecessors, successors, Bounds};
use cmlkit::{
    check_sat, classify_fragment, parse_formula, ColorTheory, Formula, NameSupply, SatOptions,
    SatVerdict, Signature, Strategy,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn enum_sig() -> Signature {
    Signature::new(ColorTheory::finite_enum(vec![0, 1, 2]), &["p", "q"], 1)
}

fn formula(seed: u64, depth: usize) -> Formula {
    let opts = GenOptions {
        depth,
        max_tokens: 2,
        literals: vec![0, 1, 2],
        color_quantifiers: true,
    };
    random_formula(&mut StdRng::seed_from_u64(seed), &enum_sig(), &opts)
}

fn same_truth(a: &Formula, b: &Formula, sig: &Signature) -> Result<(), String> {
    for m in enumerate_markings(sig, &Bounds::new(2, vec![0, 1, 2])) {
        let (x, y) = (
            evaluate(&m, a, &sig.theory).unwrap(),
            evaluate(&m, b, &sig.theory).unwrap(),
        );
        if x != y {
            return Err(format!("differ on {m}: {a} vs {b}"));
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printing_round_trips(seed in any::<u64>()) {
        let f = formula(seed, 5);
        let back = parse_formula(&f.to_string(), &enum_sig()).unwrap();
        prop_assert!(alpha_eq(&f, &back), "{} vs {}", f, back);
    }

    #[test]
    fn normal_forms_keep_meaning(seed in any::<u64>()) {
        let sig = enum_sig();
        let f = formula(seed, 4);
        for g in [simplify(&f), to_nnf(&f), to_pnf(&f), to_special_form_closed(&f, &sig).unwrap()] {
            if let Err(e) = same_truth(&f, &g, &sig) {
                prop_assert!(false, "{}", e);
            }
        }
    }

    #[test]
    fn pnf_prefix_matches_fragment(seed in any::<u64>()) {
        let f = to_special_form_closed(&formula(seed, 4), &enum_sig()).unwrap();
        let a = classify_fragment(&f);
        let b = classify_fragment(&to_pnf(&f));
        // prenexing may only lose the boolean-combination refinement
        prop_assert!(a == b || (a == cmlkit::Fragment::BSigma1 && b == cmlkit::Fragment::Sigma2), "{} vs {}", a, b);
    }

    #[test]
    fn step_relation_is_symmetric(seed in any::<u64>()) {
        let sig = enum_sig();
        let net = random_net(&mut StdRng::seed_from_u64(seed), &sig);
        let b = Bounds::new(2, vec![0, 1]);
        let interp = Interpretation::new();
        for m in enumerate_markings(&sig, &b) {
            for t in &net.transitions {
                for s in successors(&net, t, &m, &b, &interp).unwrap() {
                    let back = predecessors(&net, t, &s, &b, &interp).unwrap();
                    prop_assert!(back.iter().any(|p| p.shape() == m.shape()));
                }
                for p in predecessors(&net, t, &m, &b, &interp).unwrap() {
                    let fwd = successors(&net, t, &p, &b, &interp).unwrap();
                    prop_assert!(fwd.iter().any(|s| s.shape() == m.shape()));
                }
            }
        }
    }
}

fn existential_tokens(f: &Formula) -> usize {
    // token existentials of the prenex prefix
    let mut n = 0;
    let mut cur = &to_pnf(f);
    loop {
        match cur {
            Formula::Token {
                q: cmlkit::Quant::Exists,
                body,
                ..
            } => {
                n += 1;
                cur = body;
            }
            Formula::Token { body, .. } | Formula::Color { body, .. } => cur = body,
            _ => return n,
        }
    }
}

// One solver call per case, so fewer cases.
proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sat_agrees_with_small_models(seed in any::<u64>()) {
        let sig = enum_sig();
        let f = to_special_form_closed(&formula(seed, 4), &sig).unwrap();
        prop_assume!(classify_fragment(&f).within_sigma2());
        let r = check_sat(&f, &sig, &SatOptions::default()).unwrap();
        // is there a model with at most 2 tokens?
        let small = enumerate_markings(&sig, &Bounds::new(2, vec![0, 1, 2]))
            .into_iter()
            .any(|m| evaluate(&m, &f, &sig.theory).unwrap());
        match r.verdict {
            SatVerdict::Sat(Some(w)) => {
                prop_assert!(evaluate(&w, &f, &sig.theory).unwrap(), "witness {} fails {}", w, f);
                prop_assert!(w.support.len() <= existential_tokens(&f), "witness {} too large for {}", w, f);
            }
            SatVerdict::Sat(None) => prop_assert!(false, "no witness"),
            SatVerdict::Unsat => prop_assert!(!small, "unsat but a small model exists: {}", f),
            SatVerdict::Unknown(why) => prop_assert!(false, "unknown: {}", why),
        }
    }

    #[test]
    fn shared_binder_names_do_not_interfere(seed in any::<u64>()) {
        // two generated formulas reuse the same binder names
        let sig = enum_sig();
        let f = to_special_form_closed(&formula(seed, 3), &sig).unwrap();
        let g = to_special_form_closed(&formula(seed ^ 1, 3), &sig).unwrap();
        let clash = Formula::And(vec![f.clone(), g.clone()]);
        prop_assume!(classify_fragment(&clash).within_sigma2());
        let mut supply = NameSupply::new();
        supply.reserve_all(&f.all_names());
        let apart = Formula::And(vec![f.clone(), g.rename_bound(&mut supply)]);
        let sat = |h: &Formula| check_sat(h, &sig, &SatOptions::default()).unwrap().verdict.is_sat();
        prop_assert_eq!(sat(&clash), sat(&apart), "{}", clash);
        for h in [to_pnf(&clash), to_special_form_closed(&clash, &sig).unwrap()] {
            if let Err(e) = same_truth(&clash, &h, &sig) {
                prop_assert!(false, "{}", e);
            }
        }
    }

    #[test]
    fn strategies_agree(seed in any::<u64>()) {
        let sig = enum_sig();
        let f = to_special_form_closed(&formula(seed, 4), &sig).unwrap();
        prop_assume!(classify_fragment(&f).within_sigma2());
        let run = |s| check_sat(&f, &sig, &SatOptions { strategy: s, ..SatOptions::default() }).unwrap().verdict.is_sat();
        prop_assert_eq!(run(Strategy::Enumerate), run(Strategy::Symbolic), "{}", f);
    }
}
