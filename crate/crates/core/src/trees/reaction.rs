//! Reaction trees: alternating molecule and template nodes whose leaves
//! are purchasable starting molecules.

use serde::{Deserialize, Serialize};

use super::registry::TemplateRegistry;
use super::TreeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Molecule,
    Template,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RxnNode {
    pub id: usize,
    pub kind: NodeKind,
    /// Starting-molecule or template vocabulary index; -1 marks a
    /// molecule that a reaction step still has to produce.
    pub label: i64,
}

/// A rooted synthesis route. The root molecule (label -1) is produced by
/// executing template nodes bottom-up from starting-molecule leaves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReactionTree {
    pub nodes: Vec<RxnNode>,
    /// `(parent, child)` pairs in generation order.
    pub edges: Vec<(usize, usize)>,
    pub root: usize,
}

impl ReactionTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn children_table(&self) -> Vec<Vec<usize>> {
        let mut table = vec![Vec::new(); self.nodes.len()];
        for &(p, c) in &self.edges {
            table[p].push(c);
        }
        table
    }

    /// Number of reaction steps (template nodes).
    pub fn step_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Template).count()
    }

    /// A canonical text form that ignores node ids and sibling order.
    pub fn signature(&self) -> String {
        fn walk(tree: &ReactionTree, table: &[Vec<usize>], node: usize) -> String {
            let mut parts: Vec<String> = table[node].iter().map(|&c| walk(tree, table, c)).collect();
            parts.sort_unstable();
            let n = &tree.nodes[node];
            let tag = match n.kind {
                NodeKind::Molecule => "m",
                NodeKind::Template => "t",
            };
            if parts.is_empty() {
                format!("{tag}{}", n.label)
            } else {
                format!("{tag}{}({})", n.label, parts.join(","))
            }
        }
        walk(self, &self.children_table(), self.root)
    }
}

/// The single reference checker for reaction-tree structure.
///
/// Verifies, on top of connectivity/acyclicity/dense ids:
/// - the root is a molecule node labeled -1;
/// - molecule and template kinds strictly alternate along every path;
/// - every leaf is a molecule with a starting-molecule label in range;
/// - internal molecule nodes are labeled -1 and have exactly one
///   template child;
/// - every template node's child count equals its registry arity.
pub fn validate_structure(
    tree: &ReactionTree,
    registry: &TemplateRegistry,
    n_start_molecules: usize,
) -> Result<(), TreeError> {
    let n = tree.nodes.len();
    if n == 0 {
        return Err(TreeError::Structure { node: None, detail: "empty reaction tree".into() });
    }
    for (i, node) in tree.nodes.iter().enumerate() {
        if node.id != i {
            return Err(TreeError::Structure { node: Some(node.id), detail: format!("node ids must be dense 0..{n}") });
        }
    }
    if tree.root >= n {
        return Err(TreeError::Structure { node: Some(tree.root), detail: "root id out of range".into() });
    }
    if tree.edges.len() != n - 1 {
        return Err(TreeError::Structure {
            node: None,
            detail: format!("tree on {n} nodes needs {} edges, found {}", n - 1, tree.edges.len()),
        });
    }
    let mut seen_child = vec![false; n];
    for &(p, c) in &tree.edges {
        if p >= n || c >= n {
            return Err(TreeError::Structure { node: None, detail: format!("edge ({p},{c}) out of range") });
        }
        if seen_child[c] || c == tree.root {
            return Err(TreeError::Structure { node: Some(c), detail: "node has two parents or is the root".into() });
        }
        seen_child[c] = true;
    }
    for i in 0..n {
        if i != tree.root && !seen_child[i] {
            return Err(TreeError::Structure { node: Some(i), detail: "node unreachable from root".into() });
        }
    }

    let root = &tree.nodes[tree.root];
    if root.kind != NodeKind::Molecule || root.label != -1 {
        return Err(TreeError::Structure {
            node: Some(tree.root),
            detail: "root must be a molecule node labeled -1".into(),
        });
    }

    let table = tree.children_table();
    for node in &tree.nodes {
        let children = &table[node.id];
        match node.kind {
            NodeKind::Molecule => {
                for &c in children {
                    if tree.nodes[c].kind != NodeKind::Template {
                        return Err(TreeError::Structure {
                            node: Some(node.id),
                            detail: "molecule node with a molecule child breaks alternation".into(),
                        });
                    }
                }
                if children.is_empty() {
                    let label = node.label;
                    if label < 0 || label as usize >= n_start_molecules {
                        return Err(TreeError::Structure {
                            node: Some(node.id),
                            detail: format!("leaf label {label} outside starting-molecule vocab of {n_start_molecules}"),
                        });
                    }
                } else {
                    if node.label != -1 {
                        return Err(TreeError::Structure {
                            node: Some(node.id),
                            detail: "internal molecule node must be labeled -1".into(),
                        });
                    }
                    if children.len() != 1 {
                        return Err(TreeError::Structure {
                            node: Some(node.id),
                            detail: format!("molecule node must have exactly one template child, found {}", children.len()),
                        });
                    }
                }
            }
            NodeKind::Template => {
                let label = node.label;
                if label < 0 || registry.get(label as usize).is_none() {
                    return Err(TreeError::Structure {
                        node: Some(node.id),
                        detail: format!("template label {label} outside registry of {}", registry.len()),
                    });
                }
                let arity = registry.arity(label as usize).expect("checked above");
                if children.len() != arity {
                    return Err(TreeError::Structure {
                        node: Some(node.id),
                        detail: format!("template {label} needs {arity} reactants, found {}", children.len()),
                    });
                }
                for &c in children {
                    if tree.nodes[c].kind != NodeKind::Molecule {
                        return Err(TreeError::Structure {
                            node: Some(node.id),
                            detail: "template node with a template child breaks alternation".into(),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}
