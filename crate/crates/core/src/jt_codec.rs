//! Junction-tree codec: a two-phase tree message-passing encoder that
//! yields node embeddings and a posterior over `z_x`, and a top-down
//! decoder that regrows a junction tree from a latent code.

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;

use crate::codec::{pick_label, DecodeLimits, ModelDims, PosteriorParams};
use crate::numerics::{
    gru_cell, GruParams, LinearParams, NumericsError, ParamId, ParamSet, Tape, Tensor, TensorId,
};
use crate::trees::{JunctionNode, JunctionTree, TreeError};

/// Everything the junction codec owns in the parameter set, registered
/// under the `jt.` prefix.
#[derive(Debug, Clone, Copy)]
pub struct JtParams {
    /// Shared by both message-passing phases.
    pub msg_gru: GruParams,
    /// Node-embedding layer: `h_i = relu(W0 x_i + U0 sum(m_ki))`.
    pub node_w0: ParamId,
    pub node_u0: ParamId,
    pub post_mu: LinearParams,
    pub post_logvar: LinearParams,
    /// Decoder initial state from the latent code.
    pub dec_init_w: ParamId,
    /// Label embeddings fed to the traversal GRU.
    pub label_embed: ParamId,
    pub dec_gru: GruParams,
    /// Expand-vs-backtrack head over `[z, state]`.
    pub topo: LinearParams,
    /// Label head over `[z, state]`.
    pub label_head: LinearParams,
}

impl JtParams {
    pub fn register(params: &mut ParamSet, dims: &ModelDims, rng: &mut ChaCha8Rng) -> Result<Self, NumericsError> {
        let (v, h, d) = (dims.n_substructures, dims.hidden, dims.latent);
        Ok(Self {
            msg_gru: GruParams::register(params, "jt.enc.msg_gru", v, h, rng)?,
            node_w0: params.add_matrix("jt.enc.node.w0", h, v, rng)?,
            node_u0: params.add_matrix("jt.enc.node.u0", h, h, rng)?,
            post_mu: LinearParams::register(params, "jt.enc.post_mu", d, h, rng)?,
            post_logvar: LinearParams::register(params, "jt.enc.post_logvar", d, h, rng)?,
            dec_init_w: params.add_matrix("jt.dec.init.w", h, d, rng)?,
            label_embed: params.add_matrix("jt.dec.label_embed", v, h, rng)?,
            dec_gru: GruParams::register(params, "jt.dec.gru", d + h, h, rng)?,
            topo: LinearParams::register(params, "jt.dec.topo", 1, d + h, rng)?,
            label_head: LinearParams::register(params, "jt.dec.label", v, d + h, rng)?,
        })
    }
}

/// Per-node embeddings `H_x` plus the node that fed the posterior.
#[derive(Debug, Clone)]
pub struct NodeEmbeddings {
    /// One embedding per junction-tree node, ordered by node id.
    pub nodes: Vec<TensorId>,
    pub root: usize,
}

#[derive(Debug)]
pub enum JtError {
    Tree(TreeError),
    Numerics(NumericsError),
}

impl std::fmt::Display for JtError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            JtError::Tree(e) => write!(f, "{e}"),
            JtError::Numerics(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for JtError {}

impl From<TreeError> for JtError {
    fn from(e: TreeError) -> Self {
        JtError::Tree(e)
    }
}

impl From<NumericsError> for JtError {
    fn from(e: NumericsError) -> Self {
        JtError::Numerics(e)
    }
}

/// The encoding root: the leaf (degree <= 1) with the smallest node id,
/// chosen for reproducible posteriors.
pub fn encoding_root(tree: &JunctionTree) -> usize {
    let adj = tree.adjacency();
    (0..tree.len()).find(|&i| adj[i].len() <= 1).expect("a tree always has a leaf")
}

/// Directional subtree signatures: `sig[(k, i)]` describes the subtree
/// seen from node `i` looking into neighbour `k`. Messages from subtrees
/// with equal signatures are bitwise equal, so summing incoming messages
/// in signature order makes the encoder invariant to node relabeling.
fn directional_signatures(tree: &JunctionTree, adj: &[Vec<usize>]) -> HashMap<(usize, usize), String> {
    fn sig(
        tree: &JunctionTree,
        adj: &[Vec<usize>],
        from: usize,
        into: usize,
        memo: &mut HashMap<(usize, usize), String>,
    ) -> String {
        if let Some(s) = memo.get(&(from, into)) {
            return s.clone();
        }
        let mut parts: Vec<String> = adj[from]
            .iter()
            .filter(|&&k| k != into)
            .map(|&k| sig(tree, adj, k, from, memo))
            .collect();
        parts.sort_unstable();
        let s = format!("{}({})", tree.nodes[from].label, parts.join(","));
        memo.insert((from, into), s.clone());
        s
    }
    let mut memo = HashMap::new();
    for &(p, c) in &tree.edges {
        sig(tree, adj, p, c, &mut memo);
        sig(tree, adj, c, p, &mut memo);
    }
    memo
}

/// Incoming-message senders of `node` (excluding `except`), in canonical
/// signature order.
fn ordered_senders(
    adj: &[Vec<usize>],
    sigs: &HashMap<(usize, usize), String>,
    node: usize,
    except: Option<usize>,
) -> Vec<usize> {
    let mut senders: Vec<usize> = adj[node].iter().copied().filter(|&k| Some(k) != except).collect();
    senders.sort_by(|&a, &b| sigs[&(a, node)].cmp(&sigs[&(b, node)]));
    senders
}

/// Runs both message-passing phases and returns the node embeddings and
/// the posterior computed from the encoding root's embedding.
pub fn encode_junction(
    tape: &mut Tape,
    params: &ParamSet,
    jt: &JtParams,
    dims: &ModelDims,
    tree: &JunctionTree,
) -> Result<(NodeEmbeddings, PosteriorParams), JtError> {
    tree.validate(dims.n_substructures)?;
    let adj = tree.adjacency();
    let sigs = directional_signatures(tree, &adj);
    let root = encoding_root(tree);

    // BFS order from the encoding root gives the schedule: upward
    // messages in deepest-first order, downward in shallowest-first.
    let mut order = vec![root];
    let mut parent: Vec<Option<usize>> = vec![None; tree.len()];
    let mut seen = vec![false; tree.len()];
    seen[root] = true;
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        for &k in &adj[u] {
            if !seen[k] {
                seen[k] = true;
                parent[k] = Some(u);
                order.push(k);
            }
        }
    }

    let one_hots: Vec<TensorId> = tree
        .nodes
        .iter()
        .map(|n| tape.constant(Tensor::one_hot(dims.n_substructures, n.label)?))
        .collect::<Result<_, _>>()?;
    let zero = tape.constant(Tensor::zeros(&[dims.hidden]))?;

    let mut messages: HashMap<(usize, usize), TensorId> = HashMap::new();
    let send = |tape: &mut Tape,
                    messages: &mut HashMap<(usize, usize), TensorId>,
                    from: usize,
                    to: usize|
     -> Result<(), JtError> {
        let senders = ordered_senders(&adj, &sigs, from, Some(to));
        // every precursor message must already exist
        assert!(
            senders.iter().all(|&k| messages.contains_key(&(k, from))),
            "message schedule violated precursor completeness"
        );
        let inward: Vec<TensorId> = senders.iter().map(|&k| messages[&(k, from)]).collect();
        let agg = if inward.is_empty() { zero } else { tape.add_many(&inward)? };
        let m = gru_cell(tape, params, &jt.msg_gru, one_hots[from], agg)?;
        messages.insert((from, to), m);
        Ok(())
    };

    // bottom-up: leaves toward the root
    for &node in order.iter().rev() {
        if let Some(p) = parent[node] {
            send(tape, &mut messages, node, p)?;
        }
    }
    // top-down: root back toward the leaves
    for &node in order.iter() {
        if let Some(p) = parent[node] {
            send(tape, &mut messages, p, node)?;
        }
    }
    debug_assert_eq!(messages.len(), 2 * tree.edges.len());

    let w0 = tape.param(params, jt.node_w0)?;
    let u0 = tape.param(params, jt.node_u0)?;
    let mut embeddings = Vec::with_capacity(tree.len());
    for i in 0..tree.len() {
        let senders = ordered_senders(&adj, &sigs, i, None);
        let inward: Vec<TensorId> = senders.iter().map(|&k| messages[&(k, i)]).collect();
        let agg = if inward.is_empty() { zero } else { tape.add_many(&inward)? };
        let wx = tape.matvec(w0, one_hots[i])?;
        let um = tape.matvec(u0, agg)?;
        let pre = tape.add(wx, um)?;
        embeddings.push(tape.relu(pre)?);
    }

    let mu = jt.post_mu.apply(tape, params, embeddings[root])?;
    let logvar = jt.post_logvar.apply(tape, params, embeddings[root])?;
    Ok((NodeEmbeddings { nodes: embeddings, root }, PosteriorParams { mu, logvar }))
}

/// Decodes a junction tree from a latent code: depth-first, one topology
/// decision per visit, labels from the shared head. Greedy when `rng` is
/// `None`, sampled otherwise. Stops unconditionally at `max_nodes`.
pub fn decode_junction(
    params: &ParamSet,
    jt: &JtParams,
    dims: &ModelDims,
    z_x: &[f64],
    mut rng: Option<&mut ChaCha8Rng>,
    limits: &DecodeLimits,
) -> Result<JunctionTree, JtError> {
    assert!(limits.max_nodes >= 1, "decode_junction needs max_nodes >= 1");
    if z_x.len() != dims.latent {
        return Err(JtError::Numerics(NumericsError::ShapeMismatch {
            op: "decode_junction",
            detail: format!("latent code has {} dims, model expects {}", z_x.len(), dims.latent),
        }));
    }
    let mut tape = Tape::new();
    let z = tape.constant(Tensor::vector(z_x.to_vec()))?;
    let init_w = tape.param(params, jt.dec_init_w)?;
    let pre = tape.matvec(init_w, z)?;
    let mut state = tape.relu(pre)?;

    let label_of = |tape: &mut Tape, state: TensorId, rng: &mut Option<&mut ChaCha8Rng>| -> Result<usize, JtError> {
        let zs = tape.concat(&[z, state])?;
        let logits = jt.label_head.apply(tape, params, zs)?;
        let logits = tape.value(logits).as_slice().to_vec();
        Ok(pick_label(&logits, None, rng.as_deref_mut()))
    };

    let root_label = label_of(&mut tape, state, &mut rng)?;
    let mut labels = vec![root_label];
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut stack = vec![0usize];

    while let Some(&cur) = stack.last() {
        // advance the traversal state over (z, current node's label)
        let embed_m = tape.param(params, jt.label_embed)?;
        let embed = tape.row(embed_m, labels[cur])?;
        let input = tape.concat(&[z, embed])?;
        state = gru_cell(&mut tape, params, &jt.dec_gru, input, state)?;

        let zs = tape.concat(&[z, state])?;
        let topo_logit = jt.topo.apply(&mut tape, params, zs)?;
        let p_expand = crate::numerics::sigmoid(tape.value(topo_logit).as_slice()[0]);
        let expand = if labels.len() >= limits.max_nodes {
            false
        } else {
            match rng.as_deref_mut() {
                None => p_expand > 0.5,
                Some(rng) => rand::Rng::random_bool(rng, p_expand),
            }
        };

        if expand {
            let label = label_of(&mut tape, state, &mut rng)?;
            let child = labels.len();
            labels.push(label);
            edges.push((cur, child));
            stack.push(child);
        } else {
            stack.pop();
        }
    }

    let nodes = labels
        .into_iter()
        .enumerate()
        .map(|(id, label)| JunctionNode { id, label })
        .collect();
    Ok(JunctionTree { nodes, edges, root: 0 })
}

/// Teacher-forced decoder loss: binary cross-entropy over the topology
/// decisions of the ground-truth DFS (children in label order) plus
/// categorical cross-entropy over every node label.
pub fn junction_teacher_forced_loss(
    tape: &mut Tape,
    params: &ParamSet,
    jt: &JtParams,
    dims: &ModelDims,
    tree: &JunctionTree,
    z_x: TensorId,
) -> Result<TensorId, JtError> {
    tree.validate(dims.n_substructures)?;
    let mut children = tree.children_table();
    for c in children.iter_mut() {
        c.sort_by_key(|&k| (tree.nodes[k].label, k));
    }

    let init_w = tape.param(params, jt.dec_init_w)?;
    let pre = tape.matvec(init_w, z_x)?;
    let mut state = tape.relu(pre)?;

    let mut terms: Vec<TensorId> = Vec::new();
    let label_loss = |tape: &mut Tape, state: TensorId, target: usize| -> Result<TensorId, JtError> {
        let zs = tape.concat(&[z_x, state])?;
        let logits = jt.label_head.apply(tape, params, zs)?;
        Ok(tape.cross_entropy(logits, target)?)
    };

    let root_term = label_loss(tape, state, tree.nodes[tree.root].label)?;
    terms.push(root_term);

    // (node, next child index) stack replicating the decoder's visits
    let mut stack: Vec<(usize, usize)> = vec![(tree.root, 0)];
    while let Some(&mut (cur, ref mut next)) = stack.last_mut() {
        let embed_m = tape.param(params, jt.label_embed)?;
        let embed = tape.row(embed_m, tree.nodes[cur].label)?;
        let input = tape.concat(&[z_x, embed])?;
        state = gru_cell(tape, params, &jt.dec_gru, input, state)?;

        let zs = tape.concat(&[z_x, state])?;
        let topo_logit = jt.topo.apply(tape, params, zs)?;

        if *next < children[cur].len() {
            let child = children[cur][*next];
            *next += 1;
            terms.push(tape.bce_with_logit(topo_logit, 1.0)?);
            terms.push(label_loss(tape, state, tree.nodes[child].label)?);
            stack.push((child, 0));
        } else {
            terms.push(tape.bce_with_logit(topo_logit, 0.0)?);
            stack.pop();
        }
    }

    let stacked = tape.concat(&terms)?;
    Ok(tape.sum_elems(stacked)?)
}
