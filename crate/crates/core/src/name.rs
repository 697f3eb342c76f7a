use std::borrow::Borrow;
use std::collections::HashSet;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Interned-ish identifier, cheap to clone.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(s: &str) -> Self {
        Name(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Deref for Name {
    type Target = str;
    fn deref(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Name {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

impl From<String> for Name {
    fn from(s: String) -> Self {
        Name(Arc::from(s))
    }
}

impl From<&String> for Name {
    fn from(s: &String) -> Self {
        Name::new(s)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl Serialize for Name {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Name {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d).map(Name::from)
    }
}

/// Hands out identifiers that do not collide with anything registered so far.
#[derive(Debug, Clone, Default)]
pub struct NameSupply {
    used: HashSet<Name>,
}

impl NameSupply {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reserve(&mut self, n: &Name) {
        self.used.insert(n.clone());
    }

    pub fn reserve_all<'a>(&mut self, names: impl IntoIterator<Item = &'a Name>) {
        for n in names {
            self.reserve(n);
        }
    }

    pub fn is_used(&self, n: &str) -> bool {
        self.used.contains(n)
    }

    /// `base` itself if free, otherwise `base_1`, `base_2`, ...
    pub fn fresh(&mut self, base: &str) -> Name {
        let stem = strip_suffix(base);
        if !self.used.contains(base) {
            let n = Name::new(base);
            self.used.insert(n.clone());
            return n;
        }
        let mut i = 1usize;
        loop {
            let cand = format!("{stem}_{i}");
            if !self.used.contains(cand.as_str()) {
                let n = Name::from(cand);
                self.used.insert(n.clone());
                return n;
            }
            i += 1;
        }
    }
}

// "x_3" -> "x" so repeated freshening does not stack suffixes.
fn strip_suffix(s: &str) -> &str {
    if let Some(pos) = s.rfind('_') {
        let tail = &s[pos + 1..];
        if !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit()) && pos > 0 {
            return &s[..pos];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_avoids_used() {
        let mut s = NameSupply::new();
        assert_eq!(s.fresh("x").as_str(), "x");
        assert_eq!(s.fresh("x").as_str(), "x_1");
        assert_eq!(s.fresh("x_1").as_str(), "x_2");
        s.reserve(&Name::new("y_1"));
        assert_eq!(s.fresh("y").as_str(), "y");
        assert_eq!(s.fresh("y").as_str(), "y_2");
    }
}
