//! Junction trees: rooted trees of substructure labels describing a
//! product molecule's decomposition.

use serde::{Deserialize, Serialize};

use super::molecule::{Molecule, Term};
use super::vocab::SubstructureVocab;
use super::TreeError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JunctionNode {
    pub id: usize,
    /// Index into the substructure vocabulary.
    pub label: usize,
}

/// A rooted tree over substructure labels. Node ids are dense `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JunctionTree {
    pub nodes: Vec<JunctionNode>,
    /// `(parent, child)` pairs.
    pub edges: Vec<(usize, usize)>,
    pub root: usize,
}

impl JunctionTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Children of each node, in stored edge order.
    pub fn children_table(&self) -> Vec<Vec<usize>> {
        let mut table = vec![Vec::new(); self.nodes.len()];
        for &(p, c) in &self.edges {
            table[p].push(c);
        }
        table
    }

    /// Undirected neighbours of each node.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(p, c) in &self.edges {
            adj[p].push(c);
            adj[c].push(p);
        }
        adj
    }

    /// Checks connectivity, acyclicity, dense ids, and label range.
    pub fn validate(&self, vocab_size: usize) -> Result<(), TreeError> {
        if self.nodes.is_empty() {
            return Err(TreeError::Structure { node: None, detail: "empty junction tree".into() });
        }
        let n = self.nodes.len();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return Err(TreeError::Structure {
                    node: Some(node.id),
                    detail: format!("node ids must be dense 0..{n}"),
                });
            }
            if node.label >= vocab_size {
                return Err(TreeError::Structure {
                    node: Some(node.id),
                    detail: format!("label {} outside substructure vocab of {vocab_size}", node.label),
                });
            }
        }
        if self.root >= n {
            return Err(TreeError::Structure { node: Some(self.root), detail: "root id out of range".into() });
        }
        if self.edges.len() != n - 1 {
            return Err(TreeError::Structure {
                node: None,
                detail: format!("tree on {n} nodes needs {} edges, found {}", n - 1, self.edges.len()),
            });
        }
        let mut seen_child = vec![false; n];
        for &(p, c) in &self.edges {
            if p >= n || c >= n {
                return Err(TreeError::Structure { node: None, detail: format!("edge ({p},{c}) out of range") });
            }
            if seen_child[c] || c == self.root {
                return Err(TreeError::Structure { node: Some(c), detail: "node has two parents or is the root".into() });
            }
            seen_child[c] = true;
        }
        // n-1 edges, unique child per edge, root not a child => connected & acyclic
        // provided every non-root node appears as a child.
        for i in 0..n {
            if i != self.root && !seen_child[i] {
                return Err(TreeError::Structure { node: Some(i), detail: "node unreachable from root".into() });
            }
        }
        Ok(())
    }

    /// A canonical text form that ignores node ids and child order.
    pub fn signature(&self) -> String {
        fn walk(tree: &JunctionTree, table: &[Vec<usize>], node: usize) -> String {
            let mut parts: Vec<String> = table[node].iter().map(|&c| walk(tree, table, c)).collect();
            parts.sort_unstable();
            if parts.is_empty() {
                format!("s{}", tree.nodes[node].label)
            } else {
                format!("s{}({})", tree.nodes[node].label, parts.join(","))
            }
        }
        walk(self, &self.children_table(), self.root)
    }
}

/// The decomposition of a molecule before labels are interned: node
/// labels are the raw substructure strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTree {
    pub labels: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    pub root: usize,
}

/// Decomposes a molecule into its substructure tree: each template head
/// `T<id>` becomes one node, each fragment leaf one node, and the tree
/// mirrors the term structure.
pub fn decompose_labels(molecule: &Molecule) -> LabeledTree {
    fn walk(term: &Term, labels: &mut Vec<String>, edges: &mut Vec<(usize, usize)>) -> usize {
        let id = labels.len();
        match term {
            Term::Fragment(s) => labels.push(s.clone()),
            Term::Apply { template_id, children } => {
                labels.push(format!("T{template_id}"));
                for c in children {
                    let cid = walk(c, labels, edges);
                    edges.push((id, cid));
                }
            }
        }
        id
    }
    let mut labels = Vec::new();
    let mut edges = Vec::new();
    let term = molecule.term();
    let root = walk(&term, &mut labels, &mut edges);
    LabeledTree { labels, edges, root }
}

/// [`decompose_labels`] followed by vocabulary interning. Fails when the
/// molecule uses a substructure the vocabulary has never seen.
pub fn decompose_toy(molecule: &Molecule, vocab: &SubstructureVocab) -> Result<JunctionTree, TreeError> {
    let raw = decompose_labels(molecule);
    let nodes = raw
        .labels
        .iter()
        .enumerate()
        .map(|(id, label)| {
            vocab
                .index_of(label)
                .map(|label| JunctionNode { id, label })
                .ok_or_else(|| TreeError::UnknownSubstructure { label: label.clone() })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(JunctionTree { nodes, edges: raw.edges, root: raw.root })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fragment_decomposes_to_single_node() {
        let m = Molecule::parse("AQB").unwrap();
        let t = decompose_labels(&m);
        assert_eq!(t.labels, vec!["AQB".to_string()]);
        assert!(t.edges.is_empty());
        assert_eq!(t.root, 0);
    }

    #[test]
    fn one_step_term_decomposes_to_star() {
        let m = Molecule::parse("T3(AQB,QC)").unwrap();
        let t = decompose_labels(&m);
        assert_eq!(t.labels, vec!["T3".to_string(), "AQB".to_string(), "QC".to_string()]);
        assert_eq!(t.edges, vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn node_count_matches_independent_token_scan() {
        // Independent oracle: count term nodes straight off the string.
        // A head is "T<digits>("; a leaf is a maximal letter run that is
        // not a head.
        fn count_nodes(s: &str) -> usize {
            let b = s.as_bytes();
            let mut i = 0;
            let mut count = 0;
            while i < b.len() {
                if b[i].is_ascii_uppercase() {
                    let start = i;
                    while i < b.len() && b[i].is_ascii_uppercase() {
                        i += 1;
                    }
                    // "T" then digits then '(' is a head; count it and
                    // let the digits be skipped below.
                    if b[start] == b'T' && i == start + 1 && i < b.len() && b[i].is_ascii_digit() {
                        while i < b.len() && b[i].is_ascii_digit() {
                            i += 1;
                        }
                        count += 1; // head
                    } else {
                        count += 1; // leaf fragment
                    }
                } else {
                    i += 1;
                }
            }
            count
        }

        for s in ["AQB", "T3(AQB,QC)", "T1(T3(AQB,QC),ZZ)", "T2(T0(A),T0(B),T1(C,T0(D)))"] {
            let m = Molecule::parse(s).unwrap();
            let t = decompose_labels(&m);
            assert_eq!(t.labels.len(), count_nodes(s), "on {s}");
            assert_eq!(t.labels.len(), m.term().node_count(), "on {s}");
        }
    }

    #[test]
    fn validate_catches_broken_trees() {
        let good = JunctionTree {
            nodes: vec![JunctionNode { id: 0, label: 0 }, JunctionNode { id: 1, label: 1 }],
            edges: vec![(0, 1)],
            root: 0,
        };
        assert!(good.validate(2).is_ok());
        assert!(good.validate(1).is_err()); // label out of vocab

        let cyclic = JunctionTree {
            nodes: vec![JunctionNode { id: 0, label: 0 }, JunctionNode { id: 1, label: 0 }],
            edges: vec![(0, 1), (1, 0)],
            root: 0,
        };
        assert!(cyclic.validate(1).is_err());
    }
}
