//! The synthesizability protocol: decode each latent code several times,
//! keep the most frequent valid product, and check that its route
//! re-executes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::trees::{ReactionTree, TemplateBackend, Vocabularies};

use super::{execute, ExecutorError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub n_codes: usize,
    pub k_decodes: usize,
    /// Codes whose modal product's route re-executed validly, as a
    /// fraction of all codes, in percent.
    pub modal_rate: f64,
    /// Validity of the first decode per code, in percent — the
    /// single-sample baseline.
    pub single_sample_rate: f64,
}

/// Runs the protocol over `n_codes` latent codes. `decode(code, try)`
/// produces the `try`-th decode of code `code`; the supplier owns all
/// randomness so the evaluation itself is deterministic.
///
/// Per code: decode `k_decodes` times, execute each, and among valid
/// executions pick the most frequent product (ties broken by the
/// lexicographically smallest product). The code counts toward the rate
/// when such a product exists and its tree re-executes validly.
pub fn synthesizability_eval<F>(
    n_codes: usize,
    k_decodes: usize,
    vocab: &Vocabularies,
    backend: &dyn TemplateBackend,
    mut decode: F,
) -> Result<SynthReport, ExecutorError>
where
    F: FnMut(u64, u64) -> ReactionTree,
{
    let mut modal_ok = 0usize;
    let mut single_ok = 0usize;
    for code in 0..n_codes {
        let mut by_product: HashMap<String, (usize, ReactionTree)> = HashMap::new();
        for attempt in 0..k_decodes {
            let tree = decode(code as u64, attempt as u64);
            let result = execute(&tree, vocab, backend)?;
            if attempt == 0 && result.is_valid() {
                single_ok += 1;
            }
            if let Some(product) = result.product {
                by_product.entry(product).or_insert((0, tree)).0 += 1;
            }
        }
        let modal = by_product
            .iter()
            .map(|(product, (count, _))| (*count, product.clone()))
            // max count first, then lexicographically smallest product
            .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.cmp(&a.1)));
        if let Some((_, product)) = modal {
            let tree = &by_product[&product].1;
            if execute(tree, vocab, backend)?.is_valid() {
                modal_ok += 1;
            }
        }
    }
    let pct = |n: usize| if n_codes == 0 { 0.0 } else { 100.0 * n as f64 / n_codes as f64 };
    Ok(SynthReport {
        n_codes,
        k_decodes,
        modal_rate: pct(modal_ok),
        single_sample_rate: pct(single_ok),
    })
}
