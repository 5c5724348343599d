//! Synthetic dataset generation.
//!
//! Produces a template registry, a starting-molecule vocabulary, and a
//! corpus of reaction trees that execute successfully by construction,
//! each paired with the junction tree of its product.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{Dataset, TrainPair};
use super::junction::{decompose_labels, decompose_toy};
use super::molecule::{Molecule, MAX_FRAGMENT_LEN};
use super::reaction::{NodeKind, ReactionTree, RxnNode};
use super::registry::{apply_template_toy, TemplateEntry, TemplateRegistry};
use super::vocab::{SubstructureVocab, Vocabularies};
use super::TreeError;

/// Precondition tokens cycle through this pool. 'T' is excluded because
/// every multi-step product contains it, which would make the
/// precondition vacuous.
pub const TOKEN_POOL: [char; 8] = ['Q', 'R', 'S', 'U', 'V', 'W', 'X', 'Y'];

const MAX_TREE_NODES: usize = 48;
const EXPAND_PROB: f64 = 0.5;
const ATTEMPT_LIMIT: usize = 1000;

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub seed: u64,
    pub n_trees: usize,
    pub n_templates: usize,
    pub n_start_molecules: usize,
    /// Maximum reaction-step nesting, at most 6.
    pub max_depth: usize,
    /// When set, sampling prefers templates and starting molecules that
    /// have not yet reached this corpus-wide occurrence count.
    pub frequency_floor: Option<usize>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_trees: 1000,
            n_templates: 20,
            n_start_molecules: 60,
            max_depth: 3,
            frequency_floor: Some(5),
        }
    }
}

impl GenConfig {
    fn validate(&self) -> Result<(), TreeError> {
        if self.n_trees < 1 || self.n_templates < 1 || self.n_start_molecules < 1 || self.max_depth < 1 {
            return Err(TreeError::Infeasible { detail: "all generation counts must be at least 1".into() });
        }
        if self.max_depth > 6 {
            return Err(TreeError::Infeasible { detail: format!("max_depth {} exceeds 6", self.max_depth) });
        }
        Ok(())
    }
}

/// Deterministically generates a full dataset from the config seed.
pub fn generate_toy_dataset(config: &GenConfig) -> Result<Dataset, TreeError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let registry = build_registry(config, &mut rng)?;
    let used_tokens: BTreeSet<char> = registry.entries().iter().map(|e| e.token).collect();
    let molecules = build_starting_molecules(config, &used_tokens, &mut rng)?;

    let mut gen = TreeGen {
        registry: &registry,
        molecules: &molecules,
        max_depth: config.max_depth,
        floor: config.frequency_floor.unwrap_or(0),
        tpl_usage: vec![0; registry.len()],
        mol_usage: vec![0; molecules.len()],
        rng,
    };

    let mut products = Vec::with_capacity(config.n_trees);
    let mut reactions = Vec::with_capacity(config.n_trees);
    for _ in 0..config.n_trees {
        let (tree, product) = gen.gen_tree()?;
        reactions.push(tree);
        products.push(product);
    }

    // The substructure vocabulary is whatever the corpus products expose.
    let mut labels = BTreeSet::new();
    for p in &products {
        labels.extend(decompose_labels(p).labels);
    }
    let substructures = SubstructureVocab::new(labels.into_iter().collect())?;

    let trees = reactions
        .into_iter()
        .zip(products)
        .map(|(reaction, product)| {
            let junction = decompose_toy(&product, &substructures)?;
            Ok(TrainPair { junction, reaction, product })
        })
        .collect::<Result<Vec<_>, TreeError>>()?;

    let dataset = Dataset {
        vocabularies: Vocabularies::new(substructures, molecules, registry)?,
        trees,
    };
    dataset.validate()?;
    Ok(dataset)
}

fn build_registry(config: &GenConfig, rng: &mut ChaCha8Rng) -> Result<TemplateRegistry, TreeError> {
    let entries = (0..config.n_templates)
        .map(|id| {
            let arity = match rng.random_range(0..4u8) {
                0 => 1,
                3 => 3,
                _ => 2,
            };
            TemplateEntry { id, arity, token: TOKEN_POOL[id % TOKEN_POOL.len()] }
        })
        .collect();
    TemplateRegistry::new(entries)
}

fn build_starting_molecules(
    config: &GenConfig,
    used_tokens: &BTreeSet<char>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Molecule>, TreeError> {
    let n = config.n_start_molecules;
    let letters: Vec<char> = ('A'..='Z').collect();
    let mut set: BTreeSet<String> = BTreeSet::new();

    // A few "rich" fragments carry every token in use, so a leaf subject
    // to several inherited preconditions always exists.
    let universal = (n / 20).max(2).min(n);
    let mut attempts = 0;
    while set.len() < universal {
        let mut s: Vec<char> = used_tokens.iter().copied().collect();
        while s.len() < MAX_FRAGMENT_LEN.min(s.len() + rng.random_range(1..=3)) {
            s.push(letters[rng.random_range(0..letters.len())]);
        }
        // deterministic shuffle
        for i in (1..s.len()).rev() {
            s.swap(i, rng.random_range(0..=i));
        }
        set.insert(s.into_iter().collect());
        attempts += 1;
        if attempts > ATTEMPT_LIMIT {
            return Err(TreeError::Infeasible { detail: "could not build universal fragments".into() });
        }
    }
    attempts = 0;
    while set.len() < n {
        let len = rng.random_range(2..=8usize);
        let s: String = (0..len).map(|_| letters[rng.random_range(0..letters.len())]).collect();
        set.insert(s);
        attempts += 1;
        if attempts > ATTEMPT_LIMIT + 10 * n {
            return Err(TreeError::Infeasible { detail: "could not sample enough distinct fragments".into() });
        }
    }

    // Every starting molecule must carry at least one token in use, or
    // no template could ever consume it.
    let mut frags: Vec<String> = set.into_iter().collect();
    let token_list: Vec<char> = used_tokens.iter().copied().collect();
    for i in 0..frags.len() {
        if frags[i].chars().any(|c| used_tokens.contains(&c)) {
            continue;
        }
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts > ATTEMPT_LIMIT {
                return Err(TreeError::Infeasible { detail: "could not give every fragment a usable token".into() });
            }
            let token = token_list[rng.random_range(0..token_list.len())];
            let mut cand: Vec<char> = frags[i].chars().collect();
            if cand.len() < MAX_FRAGMENT_LEN {
                cand.insert(rng.random_range(0..=cand.len()), token);
            } else {
                let at = rng.random_range(0..cand.len());
                cand[at] = token;
            }
            let cand: String = cand.into_iter().collect();
            if !frags.contains(&cand) {
                frags[i] = cand;
                break;
            }
        }
    }

    // Each token must appear in at least 10% of starting molecules.
    for &token in used_tokens {
        let need = (n as f64 * 0.1).ceil() as usize;
        let mut have = frags.iter().filter(|f| f.contains(token)).count();
        let mut attempts = 0;
        while have < need {
            attempts += 1;
            if attempts > ATTEMPT_LIMIT {
                return Err(TreeError::Infeasible {
                    detail: format!("no starting molecule contains token {token} after {ATTEMPT_LIMIT} attempts"),
                });
            }
            let i = rng.random_range(0..frags.len());
            if frags[i].contains(token) {
                continue;
            }
            let mut cand: Vec<char> = frags[i].chars().collect();
            if cand.len() < MAX_FRAGMENT_LEN {
                cand.insert(rng.random_range(0..=cand.len()), token);
            } else {
                let at = rng.random_range(0..cand.len());
                cand[at] = token;
            }
            let cand: String = cand.into_iter().collect();
            if frags.iter().any(|f| *f == cand) {
                continue; // would duplicate; try another host
            }
            frags[i] = cand;
            have += 1;
        }
    }

    frags.sort_unstable();
    frags.dedup();
    if frags.len() != n {
        return Err(TreeError::Infeasible { detail: "fragment set collapsed while injecting tokens".into() });
    }
    Ok(frags.into_iter().map(Molecule::from_canonical_unchecked).collect())
}

struct TreeGen<'a> {
    registry: &'a TemplateRegistry,
    molecules: &'a [Molecule],
    max_depth: usize,
    floor: usize,
    tpl_usage: Vec<usize>,
    mol_usage: Vec<usize>,
    rng: ChaCha8Rng,
}

/// Node under construction: either a leaf molecule or a reaction step.
enum Draft {
    Leaf { mol: usize },
    Step { template: usize, children: Vec<Draft>, product: Molecule },
}

impl Draft {
    fn product<'a>(&'a self, molecules: &'a [Molecule]) -> &'a Molecule {
        match self {
            Draft::Leaf { mol } => &molecules[*mol],
            Draft::Step { product, .. } => product,
        }
    }

    fn node_count(&self) -> usize {
        match self {
            Draft::Leaf { .. } => 1,
            // one molecule node plus one template node per step
            Draft::Step { children, .. } => 2 + children.iter().map(Draft::node_count).sum::<usize>(),
        }
    }
}

impl TreeGen<'_> {
    fn gen_tree(&mut self) -> Result<(ReactionTree, Molecule), TreeError> {
        for _ in 0..ATTEMPT_LIMIT {
            let draft = self.gen_step(0, &BTreeSet::new())?;
            if draft.node_count() <= MAX_TREE_NODES {
                self.count_usage(&draft);
                let product = draft.product(self.molecules).clone();
                return Ok((self.materialize(&draft), product));
            }
        }
        Err(TreeError::Infeasible { detail: format!("no tree under {MAX_TREE_NODES} nodes after {ATTEMPT_LIMIT} attempts") })
    }

    /// Builds one reaction step at `depth` whose product must contain
    /// every letter in `constraints`.
    fn gen_step(&mut self, depth: usize, constraints: &BTreeSet<char>) -> Result<Draft, TreeError> {
        let template = self.pick_template();
        let entry = self.registry.get(template).expect("picked from registry").clone();
        let mut child_constraints: BTreeSet<char> = BTreeSet::new();
        child_constraints.insert(entry.token);

        let mut children = Vec::with_capacity(entry.arity);
        for k in 0..entry.arity {
            // the first reactant carries the inherited constraints; any
            // letter inside any reactant surfaces in the product string
            let mut need = child_constraints.clone();
            if k == 0 {
                need.extend(constraints.iter().copied());
            }
            let expand = depth + 1 < self.max_depth && self.rng.random_bool(EXPAND_PROB);
            let child = if expand {
                self.gen_step(depth + 1, &need)?
            } else {
                Draft::Leaf { mol: self.pick_molecule(&need)? }
            };
            children.push(child);
        }

        let reactants: Vec<Molecule> =
            children.iter().map(|c| c.product(self.molecules).clone()).collect();
        let product = apply_template_toy(self.registry, template, &reactants)
            .map_err(|e| TreeError::Infeasible { detail: format!("construction violated its own precondition: {e}") })?;
        Ok(Draft::Step { template, children, product })
    }

    fn pick_template(&mut self) -> usize {
        if self.floor > 0 {
            let below: Vec<usize> =
                (0..self.tpl_usage.len()).filter(|&t| self.tpl_usage[t] < self.floor).collect();
            if !below.is_empty() {
                return below[self.rng.random_range(0..below.len())];
            }
        }
        self.rng.random_range(0..self.registry.len())
    }

    fn pick_molecule(&mut self, need: &BTreeSet<char>) -> Result<usize, TreeError> {
        let candidates: Vec<usize> = (0..self.molecules.len())
            .filter(|&i| need.iter().all(|&c| self.molecules[i].contains_token(c)))
            .collect();
        if candidates.is_empty() {
            return Err(TreeError::Infeasible {
                detail: format!("no starting molecule satisfies constraint set {need:?}"),
            });
        }
        if self.floor > 0 {
            let below: Vec<usize> =
                candidates.iter().copied().filter(|&i| self.mol_usage[i] < self.floor).collect();
            if !below.is_empty() {
                return Ok(below[self.rng.random_range(0..below.len())]);
            }
        }
        Ok(candidates[self.rng.random_range(0..candidates.len())])
    }

    fn count_usage(&mut self, draft: &Draft) {
        match draft {
            Draft::Leaf { mol } => self.mol_usage[*mol] += 1,
            Draft::Step { template, children, .. } => {
                self.tpl_usage[*template] += 1;
                children.iter().for_each(|c| self.count_usage(c));
            }
        }
    }

    /// Lays the draft out as a dense-id tree, ids in DFS preorder.
    fn materialize(&self, draft: &Draft) -> ReactionTree {
        fn walk(draft: &Draft, nodes: &mut Vec<RxnNode>, edges: &mut Vec<(usize, usize)>) -> usize {
            match draft {
                Draft::Leaf { mol } => {
                    let id = nodes.len();
                    nodes.push(RxnNode { id, kind: NodeKind::Molecule, label: *mol as i64 });
                    id
                }
                Draft::Step { template, children, .. } => {
                    let mol_id = nodes.len();
                    nodes.push(RxnNode { id: mol_id, kind: NodeKind::Molecule, label: -1 });
                    let tpl_id = nodes.len();
                    nodes.push(RxnNode { id: tpl_id, kind: NodeKind::Template, label: *template as i64 });
                    edges.push((mol_id, tpl_id));
                    for c in children {
                        let cid = walk(c, nodes, edges);
                        edges.push((tpl_id, cid));
                    }
                    mol_id
                }
            }
        }
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        let root = walk(draft, &mut nodes, &mut edges);
        ReactionTree { nodes, edges, root }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::reaction::validate_structure;

    #[test]
    fn single_tree_is_reproducible() {
        let config = GenConfig { seed: 1, n_trees: 1, max_depth: 1, ..GenConfig::default() };
        let a = generate_toy_dataset(&config).unwrap();
        let b = generate_toy_dataset(&config).unwrap();
        assert_eq!(a.trees, b.trees);
        assert_eq!(a.vocabularies, b.vocabularies);
        assert_eq!(a.trees.len(), 1);
        assert_eq!(a.trees[0].reaction.step_count(), 1); // max_depth 1 forces one step
    }

    #[test]
    fn generated_trees_validate_and_cover_vocab() {
        let config = GenConfig { seed: 7, n_trees: 300, ..GenConfig::default() };
        let d = generate_toy_dataset(&config).unwrap();
        assert_eq!(d.trees.len(), 300);
        for pair in &d.trees {
            validate_structure(&pair.reaction, &d.vocabularies.templates, d.vocabularies.n_starting_molecules())
                .unwrap();
            pair.junction.validate(d.vocabularies.n_substructures()).unwrap();
        }
    }

    #[test]
    fn frequency_floor_is_met_at_default_scale() {
        let config = GenConfig { seed: 3, n_trees: 500, ..GenConfig::default() };
        let d = generate_toy_dataset(&config).unwrap();
        let mut tpl = vec![0usize; d.vocabularies.n_templates()];
        let mut mol = vec![0usize; d.vocabularies.n_starting_molecules()];
        for pair in &d.trees {
            let table = pair.reaction.children_table();
            for n in &pair.reaction.nodes {
                match n.kind {
                    NodeKind::Template => tpl[n.label as usize] += 1,
                    NodeKind::Molecule if table[n.id].is_empty() => mol[n.label as usize] += 1,
                    _ => {}
                }
            }
        }
        assert!(tpl.iter().all(|&c| c >= 5), "template floor: {tpl:?}");
        assert!(mol.iter().all(|&c| c >= 5), "molecule floor: {mol:?}");
    }

    #[test]
    fn junction_node_count_is_steps_plus_leaves() {
        let d = generate_toy_dataset(&GenConfig { seed: 19, n_trees: 80, ..GenConfig::default() }).unwrap();
        for pair in &d.trees {
            let table = pair.reaction.children_table();
            let leaves = pair
                .reaction
                .nodes
                .iter()
                .filter(|n| n.kind == NodeKind::Molecule && table[n.id].is_empty())
                .count();
            assert_eq!(pair.junction.len(), pair.reaction.step_count() + leaves);
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(generate_toy_dataset(&GenConfig { n_trees: 0, ..GenConfig::default() }).is_err());
        assert!(generate_toy_dataset(&GenConfig { max_depth: 7, ..GenConfig::default() }).is_err());
    }

    #[test]
    fn token_coverage_holds() {
        let d = generate_toy_dataset(&GenConfig { seed: 2, n_trees: 5, ..GenConfig::default() }).unwrap();
        let n = d.vocabularies.n_starting_molecules();
        for e in d.vocabularies.templates.entries() {
            let have = d
                .vocabularies
                .starting_molecules
                .iter()
                .filter(|m| m.contains_token(e.token))
                .count();
            assert!(have * 10 >= n, "token {} coverage {have}/{n}", e.token);
        }
    }
}
