//! Reaction-tree codec: a bottom-up encoder that sums reactant
//! representations through each template, and an attention-guided
//! top-down decoder that grows template and molecule nodes conditioned
//! on `z_y` and the junction tree's node embeddings.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;

use crate::codec::{pick_label, DecodeLimits, ModelDims, PosteriorParams};
use crate::jt_codec::NodeEmbeddings;
use crate::numerics::{
    gru_cell, GruParams, LinearParams, NumericsError, ParamId, ParamSet, Tape, Tensor, TensorId,
};
use crate::trees::{validate_structure, NodeKind, ReactionTree, RxnNode, TemplateRegistry, TreeError};

/// Maximum reactant count any template may declare.
pub const MAX_ARITY: usize = 3;

/// Parameters of the reaction codec, registered under the `rxn.` prefix.
#[derive(Debug, Clone, Copy)]
pub struct RxnParams {
    /// Template representations (one row per template).
    pub tpl_embed: ParamId,
    /// Starting-molecule representations (one row per molecule).
    pub mol_embed: ParamId,
    /// Reactant-sum mixing matrix.
    pub enc_u1: ParamId,
    pub post_mu: LinearParams,
    pub post_logvar: LinearParams,
    /// Root hidden state from the latent code.
    pub root_w: ParamId,
    pub gru_template: GruParams,
    pub gru_molecule: GruParams,
    /// Template label head over `[z, s]`.
    pub tpl_head: LinearParams,
    /// Molecule label head over `[z, s]`; class `S` is the expand class.
    pub mol_head: LinearParams,
}

impl RxnParams {
    pub fn register(params: &mut ParamSet, dims: &ModelDims, rng: &mut ChaCha8Rng) -> Result<Self, NumericsError> {
        let (t, s, h, d) = (dims.n_templates, dims.n_start_molecules, dims.hidden, dims.latent);
        Ok(Self {
            tpl_embed: params.add_matrix("rxn.enc.tpl_embed", t, h, rng)?,
            mol_embed: params.add_matrix("rxn.enc.mol_embed", s, h, rng)?,
            enc_u1: params.add_matrix("rxn.enc.u1", h, h, rng)?,
            post_mu: LinearParams::register(params, "rxn.enc.post_mu", d, h, rng)?,
            post_logvar: LinearParams::register(params, "rxn.enc.post_logvar", d, h, rng)?,
            root_w: params.add_matrix("rxn.dec.root.w", h, d, rng)?,
            gru_template: GruParams::register(params, "rxn.dec.gru_template", d + h, h, rng)?,
            gru_molecule: GruParams::register(params, "rxn.dec.gru_molecule", d + h, h, rng)?,
            tpl_head: LinearParams::register(params, "rxn.dec.tpl_head", t, d + h, rng)?,
            mol_head: LinearParams::register(params, "rxn.dec.mol_head", s + 1, d + h, rng)?,
        })
    }
}

#[derive(Debug)]
pub enum RxnError {
    Tree(TreeError),
    Numerics(NumericsError),
}

impl std::fmt::Display for RxnError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RxnError::Tree(e) => write!(f, "{e}"),
            RxnError::Numerics(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RxnError {}

impl From<TreeError> for RxnError {
    fn from(e: TreeError) -> Self {
        RxnError::Tree(e)
    }
}

impl From<NumericsError> for RxnError {
    fn from(e: NumericsError) -> Self {
        RxnError::Numerics(e)
    }
}

/// Inner-product attention over the junction tree's node embeddings:
/// weights are a softmax over `<s, h_j>` and the context is the weighted
/// sum of the embeddings.
pub fn attention(
    tape: &mut Tape,
    h_nodes: &[TensorId],
    s: TensorId,
) -> Result<(TensorId, TensorId), NumericsError> {
    debug_assert!(!h_nodes.is_empty(), "attention needs at least one node");
    let scores: Vec<TensorId> = h_nodes
        .iter()
        .map(|&h| tape.dot(s, h))
        .collect::<Result<_, _>>()?;
    let stacked = tape.concat(&scores)?;
    let alpha = tape.softmax(stacked)?;
    let context = tape.weighted_sum(alpha, h_nodes)?;
    Ok((alpha, context))
}

/// Bottom-up encoder. Each product node combines its template's
/// representation with the sum of its reactants' representations:
/// `v_i = relu(tpl[T] + U1 * sum_t v_{j_t})`.
///
/// Reactants are summed in subtree-signature order, so any permutation
/// of reactant subtrees yields a bit-identical posterior.
pub fn encode_reaction(
    tape: &mut Tape,
    params: &ParamSet,
    rxn: &RxnParams,
    dims: &ModelDims,
    tree: &ReactionTree,
    registry: &TemplateRegistry,
) -> Result<PosteriorParams, RxnError> {
    validate_structure(tree, registry, dims.n_start_molecules)?;
    let table = tree.children_table();
    let signature = subtree_signatures(tree, &table);

    fn value_of(
        tape: &mut Tape,
        params: &ParamSet,
        rxn: &RxnParams,
        tree: &ReactionTree,
        table: &[Vec<usize>],
        signature: &[String],
        mol_node: usize,
    ) -> Result<TensorId, RxnError> {
        let children = &table[mol_node];
        if children.is_empty() {
            let mol_m = tape.param(params, rxn.mol_embed)?;
            return Ok(tape.row(mol_m, tree.nodes[mol_node].label as usize)?);
        }
        let tpl_node = children[0];
        let mut reactants: Vec<usize> = table[tpl_node].clone();
        reactants.sort_by(|&a, &b| signature[a].cmp(&signature[b]));
        let mut sum: Option<TensorId> = None;
        for r in reactants {
            let v = value_of(tape, params, rxn, tree, table, signature, r)?;
            sum = Some(match sum {
                None => v,
                Some(acc) => tape.add(acc, v)?,
            });
        }
        let tpl_m = tape.param(params, rxn.tpl_embed)?;
        let y_t = tape.row(tpl_m, tree.nodes[tpl_node].label as usize)?;
        let u1 = tape.param(params, rxn.enc_u1)?;
        let mixed = tape.matvec(u1, sum.expect("arity >= 1"))?;
        let pre = tape.add(y_t, mixed)?;
        Ok(tape.relu(pre)?)
    }

    let v_root = value_of(tape, params, rxn, tree, &table, &signature, tree.root)?;
    let mu = rxn.post_mu.apply(tape, params, v_root)?;
    let logvar = rxn.post_logvar.apply(tape, params, v_root)?;
    Ok(PosteriorParams { mu, logvar })
}

/// Per-node canonical signatures (labels + shapes, sibling order-free).
fn subtree_signatures(tree: &ReactionTree, table: &[Vec<usize>]) -> Vec<String> {
    fn walk(tree: &ReactionTree, table: &[Vec<usize>], node: usize, out: &mut Vec<String>) {
        let mut parts: Vec<String> = table[node]
            .iter()
            .map(|&c| {
                walk(tree, table, c, out);
                out[c].clone()
            })
            .collect();
        parts.sort_unstable();
        let n = &tree.nodes[node];
        let tag = if n.kind == NodeKind::Molecule { "m" } else { "t" };
        out[node] = if parts.is_empty() {
            format!("{tag}{}", n.label)
        } else {
            format!("{tag}{}({})", n.label, parts.join(","))
        };
    }
    let mut out = vec![String::new(); tree.nodes.len()];
    walk(tree, table, tree.root, &mut out);
    out
}

/// Free-running decoder. Pending molecule nodes expand in FIFO order;
/// the expand class is masked out at the depth frontier, and when the
/// node budget runs out every pending node is forced to its best
/// starting-molecule label.
#[allow(clippy::too_many_arguments)]
pub fn decode_reaction(
    params: &ParamSet,
    rxn: &RxnParams,
    dims: &ModelDims,
    z_y: &[f64],
    h_x_values: &[Tensor],
    registry: &TemplateRegistry,
    mut rng: Option<&mut ChaCha8Rng>,
    limits: &DecodeLimits,
    use_step_context: bool,
) -> Result<ReactionTree, RxnError> {
    let expand_class = dims.n_start_molecules;
    // the mandatory first step needs room for a template and reactants
    let max_nodes = limits.max_nodes.max(2 + MAX_ARITY);

    let mut tape = Tape::new();
    let z = tape.constant(Tensor::vector(z_y.to_vec()))?;
    let h_nodes: Vec<TensorId> = h_x_values
        .iter()
        .map(|t| tape.constant(t.clone()))
        .collect::<Result<_, _>>()?;

    let root_w = tape.param(params, rxn.root_w)?;
    let pre = tape.matvec(root_w, z)?;
    let s_root = tape.relu(pre)?;

    let mut nodes = vec![RxnNode { id: 0, kind: NodeKind::Molecule, label: -1 }];
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut pending: VecDeque<(usize, TensorId, usize)> = VecDeque::new();
    pending.push_back((0, s_root, 0));

    let mol_logits = |tape: &mut Tape, s: TensorId| -> Result<Vec<f64>, RxnError> {
        let zs = tape.concat(&[z, s])?;
        let logits = rxn.mol_head.apply(tape, params, zs)?;
        Ok(tape.value(logits).as_slice().to_vec())
    };

    while let Some((node, s_i, depth)) = pending.pop_front() {
        // out of budget: freeze this node (and eventually the rest of
        // the queue) as its most likely starting molecule
        if nodes.len() + 1 + MAX_ARITY > max_nodes {
            let logits = mol_logits(&mut tape, s_i)?;
            nodes[node].label = pick_label(&logits[..expand_class], None, None) as i64;
            continue;
        }

        let (_, c_i) = attention(&mut tape, &h_nodes, s_i)?;
        let zc = tape.concat(&[z, c_i])?;
        let s_t = gru_cell(&mut tape, params, &rxn.gru_template, zc, s_i)?;
        let zs = tape.concat(&[z, s_t])?;
        let tpl_logit_node = rxn.tpl_head.apply(&mut tape, params, zs)?;
        let tpl_logits = tape.value(tpl_logit_node).as_slice().to_vec();
        let tpl_label = pick_label(&tpl_logits, None, rng.as_deref_mut());
        let arity = registry.arity(tpl_label).expect("decoder samples only registry templates");

        let tpl_id = nodes.len();
        nodes.push(RxnNode { id: tpl_id, kind: NodeKind::Template, label: tpl_label as i64 });
        edges.push((node, tpl_id));

        let mut s_prev = s_t;
        for _ in 0..arity {
            let ctx = if use_step_context {
                attention(&mut tape, &h_nodes, s_prev)?.1
            } else {
                c_i
            };
            let zc = tape.concat(&[z, ctx])?;
            let s_jk = gru_cell(&mut tape, params, &rxn.gru_molecule, zc, s_prev)?;
            let logits = mol_logits(&mut tape, s_jk)?;
            let mask = if depth + 1 >= limits.max_depth { Some(expand_class) } else { None };
            let label = pick_label(&logits, mask, rng.as_deref_mut());

            let mol_id = nodes.len();
            if label == expand_class {
                nodes.push(RxnNode { id: mol_id, kind: NodeKind::Molecule, label: -1 });
                pending.push_back((mol_id, s_jk, depth + 1));
            } else {
                nodes.push(RxnNode { id: mol_id, kind: NodeKind::Molecule, label: label as i64 });
            }
            edges.push((tpl_id, mol_id));
            s_prev = s_jk;
        }
    }

    Ok(ReactionTree { nodes, edges, root: 0 })
}

/// Teacher-forced decoder loss: categorical cross-entropy over every
/// template and molecule label along the ground-truth generation order
/// (pending queue FIFO, reactants in stored child order).
#[allow(clippy::too_many_arguments)]
pub fn reaction_teacher_forced_loss(
    tape: &mut Tape,
    params: &ParamSet,
    rxn: &RxnParams,
    dims: &ModelDims,
    tree: &ReactionTree,
    z_y: TensorId,
    h_x: &NodeEmbeddings,
    registry: &TemplateRegistry,
    use_step_context: bool,
) -> Result<TensorId, RxnError> {
    validate_structure(tree, registry, dims.n_start_molecules)?;
    let table = tree.children_table();
    let expand_class = dims.n_start_molecules;

    let root_w = tape.param(params, rxn.root_w)?;
    let pre = tape.matvec(root_w, z_y)?;
    let s_root = tape.relu(pre)?;

    let mut terms: Vec<TensorId> = Vec::new();
    let mut pending: VecDeque<(usize, TensorId)> = VecDeque::new();
    pending.push_back((tree.root, s_root));

    while let Some((node, s_i)) = pending.pop_front() {
        let tpl_node = table[node][0];
        let (_, c_i) = attention(tape, &h_x.nodes, s_i)?;
        let zc = tape.concat(&[z_y, c_i])?;
        let s_t = gru_cell(tape, params, &rxn.gru_template, zc, s_i)?;
        let zs = tape.concat(&[z_y, s_t])?;
        let tpl_logits = rxn.tpl_head.apply(tape, params, zs)?;
        terms.push(tape.cross_entropy(tpl_logits, tree.nodes[tpl_node].label as usize)?);

        let mut s_prev = s_t;
        for &reactant in &table[tpl_node] {
            let ctx = if use_step_context {
                attention(tape, &h_x.nodes, s_prev)?.1
            } else {
                c_i
            };
            let zc = tape.concat(&[z_y, ctx])?;
            let s_jk = gru_cell(tape, params, &rxn.gru_molecule, zc, s_prev)?;
            let zs = tape.concat(&[z_y, s_jk])?;
            let logits = rxn.mol_head.apply(tape, params, zs)?;
            let target = if table[reactant].is_empty() {
                tree.nodes[reactant].label as usize
            } else {
                expand_class
            };
            terms.push(tape.cross_entropy(logits, target)?);
            if !table[reactant].is_empty() {
                pending.push_back((reactant, s_jk));
            }
            s_prev = s_jk;
        }
    }

    let stacked = tape.concat(&terms)?;
    Ok(tape.sum_elems(stacked)?)
}
