//! Toy molecules as canonical term strings.
//!
//! A molecule is either a *fragment* — one to twelve uppercase letters —
//! or a *term* `T<id>(c1,...,cm)` produced by applying template `id` to
//! child molecules `c1..cm`, stored in non-decreasing lexicographic order
//! so every molecule has exactly one canonical spelling.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::TreeError;

pub const MAX_FRAGMENT_LEN: usize = 12;

/// A validated canonical molecule string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Molecule(String);

impl Molecule {
    /// Parses and validates a canonical string.
    pub fn parse(s: &str) -> Result<Self, TreeError> {
        let term = Term::parse(s)?;
        // Canonical means the input spells itself: sorted children at
        // every level, no whitespace, exact digits.
        let canon = term.to_string();
        if canon != s {
            return Err(TreeError::MoleculeParse {
                input: s.to_string(),
                detail: format!("not canonical (expected {canon})"),
            });
        }
        Ok(Self(s.to_string()))
    }

    pub(crate) fn from_canonical_unchecked(s: String) -> Self {
        Self(s)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_fragment(&self) -> bool {
        !self.0.starts_with('T') || self.0.bytes().all(|b| b.is_ascii_uppercase())
    }

    /// Whether the canonical string contains the given token letter.
    pub fn contains_token(&self, token: char) -> bool {
        self.0.contains(token)
    }

    /// Maximum template-nesting depth: 0 for fragments.
    pub fn depth(&self) -> usize {
        let mut depth = 0usize;
        let mut max = 0usize;
        for b in self.0.bytes() {
            match b {
                b'(' => {
                    depth += 1;
                    max = max.max(depth);
                }
                b')' => depth = depth.saturating_sub(1),
                _ => {}
            }
        }
        max
    }

    pub fn term(&self) -> Term {
        Term::parse(&self.0).expect("molecule holds a valid term")
    }

    /// Template ids used anywhere in this molecule, with multiplicity.
    pub fn template_uses(&self) -> Vec<usize> {
        fn walk(term: &Term, out: &mut Vec<usize>) {
            if let Term::Apply { template_id, children } = term {
                out.push(*template_id);
                children.iter().for_each(|c| walk(c, out));
            }
        }
        let mut out = Vec::new();
        walk(&self.term(), &mut out);
        out
    }
}

impl fmt::Display for Molecule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for Molecule {
    type Error = TreeError;
    fn try_from(s: String) -> Result<Self, TreeError> {
        Molecule::parse(&s)
    }
}

impl From<Molecule> for String {
    fn from(m: Molecule) -> String {
        m.0
    }
}

/// The parsed term structure of a molecule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Fragment(String),
    Apply { template_id: usize, children: Vec<Term> },
}

impl Term {
    pub fn parse(s: &str) -> Result<Self, TreeError> {
        let bytes = s.as_bytes();
        let mut pos = 0usize;
        let term = parse_term(s, bytes, &mut pos)?;
        if pos != bytes.len() {
            return Err(TreeError::MoleculeParse {
                input: s.to_string(),
                detail: format!("trailing input at byte {pos}"),
            });
        }
        Ok(term)
    }

    pub fn node_count(&self) -> usize {
        match self {
            Term::Fragment(_) => 1,
            Term::Apply { children, .. } => 1 + children.iter().map(Term::node_count).sum::<usize>(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Fragment(frag) => f.write_str(frag),
            Term::Apply { template_id, children } => {
                write!(f, "T{template_id}(")?;
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn parse_term(input: &str, bytes: &[u8], pos: &mut usize) -> Result<Term, TreeError> {
    let err = |pos: usize, detail: &str| TreeError::MoleculeParse {
        input: input.to_string(),
        detail: format!("{detail} at byte {pos}"),
    };

    let start = *pos;
    // A term head is 'T' followed by digits and '('; anything else that
    // starts with uppercase letters is a fragment.
    if bytes.get(*pos) == Some(&b'T') {
        let mut k = *pos + 1;
        while k < bytes.len() && bytes[k].is_ascii_digit() {
            k += 1;
        }
        if k > *pos + 1 && bytes.get(k) == Some(&b'(') {
            let id: usize = input[*pos + 1..k]
                .parse()
                .map_err(|_| err(*pos, "bad template id"))?;
            if input[*pos + 1..k].starts_with('0') && k - *pos - 1 > 1 {
                return Err(err(*pos, "leading zero in template id"));
            }
            *pos = k + 1; // past '('
            let mut children = Vec::new();
            loop {
                children.push(parse_term(input, bytes, pos)?);
                match bytes.get(*pos) {
                    Some(b',') => *pos += 1,
                    Some(b')') => {
                        *pos += 1;
                        break;
                    }
                    _ => return Err(err(*pos, "expected ',' or ')'")),
                }
            }
            for pair in children.windows(2) {
                if pair[0].to_string() > pair[1].to_string() {
                    return Err(err(start, "children not in canonical order"));
                }
            }
            return Ok(Term::Apply { template_id: id, children });
        }
    }

    let mut k = *pos;
    while k < bytes.len() && bytes[k].is_ascii_uppercase() {
        k += 1;
    }
    let len = k - *pos;
    if len == 0 {
        return Err(err(*pos, "expected fragment or term"));
    }
    if len > MAX_FRAGMENT_LEN {
        return Err(err(*pos, "fragment longer than 12 letters"));
    }
    let frag = input[*pos..k].to_string();
    *pos = k;
    Ok(Term::Fragment(frag))
}
