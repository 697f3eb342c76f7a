use serde::Serialize;

use crate::name::Name;
use crate::theory::ColorTheory;

/// Everything needed to read and reason about formulas of one net:
/// the color theory, the place set and the number of color components.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Signature {
    pub theory: ColorTheory,
    pub places: Vec<Name>,
    pub n_colors: usize,
}

impl Signature {
    pub fn new(theory: ColorTheory, places: &[&str], n_colors: usize) -> Self {
        Signature {
            theory,
            places: places.iter().map(|p| Name::new(p)).collect(),
            n_colors,
        }
    }

    pub fn has_place(&self, p: &str) -> bool {
        self.places.iter().any(|q| q.as_str() == p)
    }

    pub fn place_index(&self, p: &str) -> Option<usize> {
        self.places.iter().position(|q| q.as_str() == p)
    }
}
