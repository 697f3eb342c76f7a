use cmlkit::gen::{random_formula, random_net, GenOptions};
use cmlkit::marking::Interpretation;
use cmlkit::oracle::{check_images, Bounds};
use cmlkit::{ColorTheory, Signature};
use rand::rngs::StdRng;
use rand::SeedableRng;

#[test]
fn random_images_match_explicit_semantics() {
    let sig = Signature::new(ColorTheory::int(), &["p", "q"], 1);
    let bounds = Bounds::new(3, vec![-1, 0, 1]);
    let opts = GenOptions {
        depth: 4,
        max_tokens: 2,
        ..Default::default()
    };
    let mut rng = StdRng::seed_from_u64(11);
    let mut total = 0;
    for i in 0..60 {
        let net = random_net(&mut rng, &sig);
        let phi = random_formula(&mut rng, &sig, &opts);
        let r = check_images(&phi, &net, &bounds, &Interpretation::new()).unwrap();
        assert!(
            r.agrees(),
            "case {i}: {phi}\nnet: {:?}\n{:?}",
            net.transitions
                .iter()
                .map(|t| format!("{}: {:?} -> {:?} : {}", t.name, t.lhs, t.rhs, t.guard))
                .collect::<Vec<_>>(),
            &r.mismatches[..r.mismatches.len().min(3)]
        );
        total += r.instances;
    }
    assert!(total > 1000);
}
