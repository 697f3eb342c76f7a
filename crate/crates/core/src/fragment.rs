//! Quantifier-alternation fragments.

use serde::Serialize;

use crate::formula::{Formula, Quant};
use crate::normal::{prefix_depth, to_nnf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Fragment {
    /// No token quantifiers.
    Sigma0,
    Sigma1,
    Pi1,
    /// Boolean combination of Sigma1 formulas.
    BSigma1,
    Sigma2,
    Pi2,
    /// Three or more alternations.
    Higher,
}

impl Fragment {
    /// Contained in the Sigma2 fragment.
    pub fn within_sigma2(self) -> bool {
        matches!(
            self,
            Fragment::Sigma0
                | Fragment::Sigma1
                | Fragment::Pi1
                | Fragment::BSigma1
                | Fragment::Sigma2
        )
    }

    pub fn within_pi1(self) -> bool {
        matches!(self, Fragment::Sigma0 | Fragment::Pi1)
    }

    pub fn within_sigma1(self) -> bool {
        matches!(self, Fragment::Sigma0 | Fragment::Sigma1)
    }

    pub fn within_bsigma1(self) -> bool {
        matches!(
            self,
            Fragment::Sigma0 | Fragment::Sigma1 | Fragment::Pi1 | Fragment::BSigma1
        )
    }

    /// Smallest fragment containing both (closed under conjunction/disjunction).
    pub fn join(self, other: Fragment) -> Fragment {
        use Fragment::*;
        match (self, other) {
            (a, b) if a == b => a,
            (Sigma0, x) | (x, Sigma0) => x,
            (Higher, _) | (_, Higher) => Higher,
            (Sigma2, Pi2) | (Pi2, Sigma2) => Higher,
            (Sigma2, _) | (_, Sigma2) => Sigma2,
            (Pi2, _) | (_, Pi2) => Pi2,
            _ => BSigma1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Fragment::Sigma0 => "Sigma0",
            Fragment::Sigma1 => "Sigma1",
            Fragment::Pi1 => "Pi1",
            Fragment::BSigma1 => "BSigma1",
            Fragment::Sigma2 => "Sigma2",
            Fragment::Pi2 => "Pi2",
            Fragment::Higher => "Higher",
        }
    }
}

impl std::fmt::Display for Fragment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Smallest fragment containing `f`. Color quantifiers over token-free
/// subformulas are absorbed by the color theory.
pub fn classify_fragment(f: &Formula) -> Fragment {
    let g = to_nnf(f);
    if !g.has_token_quantifier() {
        return Fragment::Sigma0;
    }
    let de = prefix_depth(&g, Quant::Exists);
    let da = prefix_depth(&g, Quant::Forall);
    if de <= 1 {
        return Fragment::Sigma1;
    }
    if da <= 1 {
        return Fragment::Pi1;
    }
    if boolean_of_level1(&g) {
        return Fragment::BSigma1;
    }
    if de <= 2 {
        return Fragment::Sigma2;
    }
    if da <= 2 {
        return Fragment::Pi2;
    }
    Fragment::Higher
}

// every maximal quantified subformula below the boolean skeleton is Sigma1 or Pi1
fn boolean_of_level1(f: &Formula) -> bool {
    match f {
        Formula::And(v) | Formula::Or(v) => v.iter().all(boolean_of_level1),
        Formula::Not(inner) => boolean_of_level1(inner),
        g if !g.has_token_quantifier() => true,
        g => prefix_depth(g, Quant::Exists) <= 1 || prefix_depth(g, Quant::Forall) <= 1,
    }
}
