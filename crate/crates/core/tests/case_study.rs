//! The reader-writer lock: concrete firings, the shipped invariants, and
//! bounded reachability.

use std::path::PathBuf;

use cmlkit::marking::{evaluate_bounded, evaluate_with, Valuation};
use cmlkit::oracle::{successors, Bounds};
use cmlkit::{
    bounded_reach, check_invariance_instance, parse_formula_file, parse_model, post_formula,
    ConcreteMarking, Cpn, Formula, Interpretation, LemmaVerdict, Name, Verdict, VerifyOptions,
};

fn path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("examples/rw")
        .join(rel)
}

fn net() -> Cpn {
    parse_model(&std::fs::read_to_string(path("rw.cpn")).unwrap()).unwrap()
}

fn formula(net: &Cpn, rel: &str) -> Formula {
    let text = std::fs::read_to_string(path(rel)).unwrap();
    parse_formula_file(&text, Some(&net.signature)).unwrap().1
}

fn marking(tokens: &[(u32, &str, [i64; 2])]) -> ConcreteMarking {
    let mut m = ConcreteMarking::new(2);
    for (id, p, c) in tokens {
        m.support.insert(*id, (Name::new(p), c.to_vec()));
    }
    m
}

// f and g as plain identity; any interpretation works for these checks
fn interp() -> Interpretation {
    Interpretation::new()
        .with_function("f", |a| a[0])
        .with_function("g", |a| a[0])
}

fn holds(net: &Cpn, m: &ConcreteMarking, f: &Formula) -> bool {
    evaluate_with(
        m,
        f,
        &net.signature.theory,
        &interp(),
        &mut Valuation::default(),
    )
    .unwrap()
}

#[test]
fn writer_enters_and_takes_the_lock() {
    let net = net();
    let m = marking(&[(5, "w1", [5, 0]), (7, "w", [7, -1])]);
    let t = net.transition("w1").unwrap();
    let b = Bounds::new(4, vec![-1, 0, 1, 5, 7]);
    let next = successors(&net, t, &m, &b, &interp()).unwrap();
    assert!(!next.is_empty());
    for s in &next {
        assert_eq!(s.count_in("w1"), 0);
        assert_eq!(s.count_in("w2"), 1);
        let lock = s.tokens_in(&Name::new("w")).next().unwrap();
        assert_eq!(s.colors_of(lock), &[7, 5]);
    }
    // a held lock blocks a second writer
    let held = marking(&[(5, "w1", [5, 0]), (7, "w", [7, 3])]);
    assert!(successors(&net, t, &held, &b, &interp())
        .unwrap()
        .is_empty());
}

#[test]
fn init_satisfies_aux_on_a_concrete_state() {
    let net = net();
    let m = marking(&[
        (0, "x", [0, 7]),
        (1, "w", [1, -1]),
        (2, "r1", [2, 0]),
        (3, "w1", [3, 0]),
    ]);
    assert!(holds(&net, &m, &formula(&net, "init.cml")));
    assert!(holds(&net, &m, &formula(&net, "aux.cml")));
}

#[test]
fn aux_is_not_preserved_by_reader_exit() {
    // two readers inside, r records only one of them
    let net = net();
    let aux = formula(&net, "aux.cml");
    let m = marking(&[
        (0, "x", [0, 7]),
        (1, "w", [1, -1]),
        (2, "r3", [2, 0]),
        (3, "r2", [3, 0]),
        (4, "r", [2, 0]),
    ]);
    assert!(holds(&net, &m, &aux));
    let t = net.transition("r3").unwrap();
    let dom = [-1, 0, 2, 7];
    let next = successors(&net, t, &m, &Bounds::new(5, dom.to_vec()), &interp()).unwrap();
    assert!(!next.is_empty());
    for s in &next {
        assert_eq!(s.count_in("r"), 0);
        assert!(!holds(&net, s, &aux), "{s} should break aux");
    }
    // the symbolic image agrees: post_r3(aux) is satisfied by the broken state
    // (its color quantifiers range over the same small domain)
    let image = post_formula(&aux, &net, t).unwrap();
    let th = &net.signature.theory;
    let mut val = Valuation::default();
    assert!(evaluate_bounded(&next[0], &image, th, &interp(), &mut val, Some(&dom)).unwrap());
}

#[test]
fn reader_writer_instance_fails_with_seventy_lemmas() {
    let net = net();
    let opts = VerifyOptions {
        full: true,
        ..VerifyOptions::default()
    };
    let r = check_invariance_instance(
        &net,
        &formula(&net, "init.cml"),
        &formula(&net, "rf.cml"),
        &formula(&net, "aux.cml"),
        &opts,
    )
    .unwrap();
    assert_eq!(r.lemmas.len(), 70);
    assert_eq!(r.stable_pairs, 85);
    assert_eq!(r.count(LemmaVerdict::Sat), 6);
    assert_eq!(r.count(LemmaVerdict::Unknown), 0);
    assert!(matches!(r.verdict, Verdict::Fails { .. }));
    // every failing lemma is a step lemma; init and implication all hold
    for l in &r.lemmas {
        if l.verdict == LemmaVerdict::Sat {
            assert!(
                ["w3", "r2", "r3"].contains(&l.subject.as_str()),
                "{}",
                l.subject
            );
        }
    }
}

#[test]
fn writer_exclusion_is_inductive() {
    let net = net();
    let r = check_invariance_instance(
        &net,
        &formula(&net, "init.cml"),
        &formula(&net, "writers_exclusive.cml"),
        &formula(&net, "aux_writers.cml"),
        &VerifyOptions::default(),
    )
    .unwrap();
    assert!(r.holds(), "{r}");
    assert_eq!(r.count(LemmaVerdict::Unsat), r.lemmas.len());
}

#[test]
fn bounded_reachability() {
    let net = net();
    let init = formula(&net, "init.cml");
    let opts = VerifyOptions::default();
    let r = bounded_reach(&net, &init, &formula(&net, "target_writer.cml"), 1, &opts).unwrap();
    assert_eq!(r.reached_at, Some(1));
    let r = bounded_reach(
        &net,
        &init,
        &formula(&net, "target_two_writers.cml"),
        3,
        &opts,
    )
    .unwrap();
    assert!(r.holds(), "{r}");
    let back = VerifyOptions {
        backward: true,
        ..VerifyOptions::default()
    };
    let r = bounded_reach(&net, &init, &formula(&net, "target_writer.cml"), 1, &back).unwrap();
    assert_eq!(r.reached_at, Some(1));
}
