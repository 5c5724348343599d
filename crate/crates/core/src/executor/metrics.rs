//! Generation metrics over a batch of decoded reaction trees.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::trees::{ReactionTree, TemplateBackend, Vocabularies};

use super::{execute, ExecutorError};

/// Percentages are in [0, 100]; metrics conditioned on validity read 0
/// when nothing was valid, with `degenerate` set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub validity: f64,
    pub uniqueness: f64,
    pub novelty: f64,
    pub quality: f64,
    pub descriptor_distance: f64,
    pub counts: MetricCounts,
    /// True when no generated tree executed validly, so the conditioned
    /// metrics carry no information.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricCounts {
    pub generated: usize,
    pub valid: usize,
    pub unique: usize,
    pub novel: usize,
    pub quality_passing: usize,
}

/// The default quality predicate: a cheap stability proxy on the product
/// string (bounded length, bounded nesting).
pub fn default_quality_hook(product: &str) -> bool {
    product.len() <= 120 && paren_depth(product) <= 6
}

/// Validity, uniqueness, novelty, quality, and the descriptor-histogram
/// distance between generated and training products.
///
/// Uniqueness/novelty/quality are fractions of the *valid* trees.
pub fn compute_metrics(
    generated: &[ReactionTree],
    training_products: &[String],
    vocab: &Vocabularies,
    backend: &dyn TemplateBackend,
    quality_hook: Option<&dyn Fn(&str) -> bool>,
) -> Result<MetricsReport, ExecutorError> {
    let hook = quality_hook.unwrap_or(&default_quality_hook);
    let mut valid_products: Vec<String> = Vec::new();
    for tree in generated {
        let result = execute(tree, vocab, backend)?;
        if let Some(product) = result.product {
            valid_products.push(product);
        }
    }

    let n_gen = generated.len();
    let n_valid = valid_products.len();
    let degenerate = n_valid == 0;

    let unique: HashSet<&str> = valid_products.iter().map(|s| s.as_str()).collect();
    let training: HashSet<&str> = training_products.iter().map(|s| s.as_str()).collect();
    let n_unique = unique.len();
    let n_novel = valid_products.iter().filter(|p| !training.contains(p.as_str())).count();
    let n_quality = valid_products.iter().filter(|p| hook(p)).count();

    let pct = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
    let descriptor = if degenerate {
        0.0
    } else {
        descriptor_distance(
            &valid_products.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
            &training_products.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
            vocab.n_templates(),
        )
    };

    Ok(MetricsReport {
        validity: pct(n_valid, n_gen),
        uniqueness: pct(n_unique, n_valid),
        novelty: pct(n_novel, n_valid),
        quality: pct(n_quality, n_valid),
        descriptor_distance: descriptor,
        counts: MetricCounts {
            generated: n_gen,
            valid: n_valid,
            unique: n_unique,
            novel: n_novel,
            quality_passing: n_quality,
        },
        degenerate,
    })
}

const LEN_BINS: usize = 20;
const LEN_BIN_WIDTH: usize = 10;
const DEPTH_BINS: usize = 13;

/// L1 distance between normalized histograms of product length, nesting
/// depth, and per-template usage, summed over the three descriptors.
/// Each term lies in [0, 2], so the total lies in [0, 6].
pub fn descriptor_distance(generated: &[&str], training: &[&str], n_templates: usize) -> f64 {
    let a = histograms(generated, n_templates);
    let b = histograms(training, n_templates);
    a.iter()
        .zip(&b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>())
        .sum()
}

fn histograms(products: &[&str], n_templates: usize) -> [Vec<f64>; 3] {
    let mut len_hist = vec![0.0; LEN_BINS];
    let mut depth_hist = vec![0.0; DEPTH_BINS];
    let mut tpl_hist = vec![0.0; n_templates.max(1)];
    for p in products {
        len_hist[(p.len() / LEN_BIN_WIDTH).min(LEN_BINS - 1)] += 1.0;
        depth_hist[paren_depth(p).min(DEPTH_BINS - 1)] += 1.0;
        for id in template_mentions(p) {
            if id < n_templates {
                tpl_hist[id] += 1.0;
            }
        }
    }
    for h in [&mut len_hist, &mut depth_hist, &mut tpl_hist] {
        let total: f64 = h.iter().sum();
        if total > 0.0 {
            h.iter_mut().for_each(|v| *v /= total);
        }
    }
    [len_hist, depth_hist, tpl_hist]
}

fn paren_depth(s: &str) -> usize {
    let mut depth = 0usize;
    let mut max = 0usize;
    for b in s.bytes() {
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

/// Template ids mentioned as `T<digits>(` heads, with multiplicity.
fn template_mentions(s: &str) -> Vec<usize> {
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'T' && (i == 0 || !b[i - 1].is_ascii_uppercase()) {
            let mut k = i + 1;
            while k < b.len() && b[k].is_ascii_digit() {
                k += 1;
            }
            if k > i + 1 && b.get(k) == Some(&b'(') {
                if let Ok(id) = s[i + 1..k].parse() {
                    out.push(id);
                }
                i = k;
                continue;
            }
        }
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::{generate_toy_dataset, GenConfig, NodeKind, RxnNode, ToyBackend};

    #[test]
    fn resampled_training_trees_are_valid_but_not_novel() {
        let d = generate_toy_dataset(&GenConfig { seed: 9, n_trees: 40, ..GenConfig::default() }).unwrap();
        let backend = ToyBackend { registry: &d.vocabularies.templates };
        let generated: Vec<_> = d.trees.iter().take(10).map(|p| p.reaction.clone()).collect();
        let training: Vec<String> = d.trees.iter().map(|p| p.product.as_str().to_string()).collect();
        let report = compute_metrics(&generated, &training, &d.vocabularies, &backend, None).unwrap();
        assert_eq!(report.validity, 100.0);
        assert_eq!(report.novelty, 0.0);
        assert!(!report.degenerate);
    }

    #[test]
    fn empty_generated_list_reports_zeros_with_flag() {
        let d = generate_toy_dataset(&GenConfig { seed: 9, n_trees: 5, ..GenConfig::default() }).unwrap();
        let backend = ToyBackend { registry: &d.vocabularies.templates };
        let report = compute_metrics(&[], &[], &d.vocabularies, &backend, None).unwrap();
        assert!(report.degenerate);
        assert_eq!(report.validity, 0.0);
        assert_eq!(report.uniqueness, 0.0);
        assert_eq!(report.counts.generated, 0);
    }

    /// Hand-enumerated four-tree fixture: two valid trees sharing one
    /// product (not in training), two invalid.
    #[test]
    fn four_tree_fixture_matches_hand_counts() {
        let d = generate_toy_dataset(&GenConfig { seed: 11, n_trees: 5, ..GenConfig::default() }).unwrap();
        let v = &d.vocabularies;
        let backend = ToyBackend { registry: &v.templates };

        // template 0 has token Q (pool order); find leaves with and without it
        let tpl = v.templates.get(0).unwrap();
        assert_eq!(tpl.token, 'Q');
        let with: i64 = (0..v.n_starting_molecules())
            .find(|&i| v.starting_molecule(i).unwrap().contains_token('Q'))
            .unwrap() as i64;
        let without: i64 = (0..v.n_starting_molecules())
            .find(|&i| !v.starting_molecule(i).unwrap().contains_token('Q'))
            .unwrap() as i64;

        let make = |leaves: Vec<i64>| {
            let mut nodes = vec![
                RxnNode { id: 0, kind: NodeKind::Molecule, label: -1 },
                RxnNode { id: 1, kind: NodeKind::Template, label: 0 },
            ];
            let mut edges = vec![(0, 1)];
            for (k, leaf) in leaves.into_iter().enumerate() {
                nodes.push(RxnNode { id: 2 + k, kind: NodeKind::Molecule, label: leaf });
                edges.push((1, 2 + k));
            }
            ReactionTree { nodes, edges, root: 0 }
        };
        let leaves_valid = vec![with; tpl.arity];
        let leaves_invalid = vec![without; tpl.arity];
        let generated = vec![
            make(leaves_valid.clone()),
            make(leaves_valid),
            make(leaves_invalid.clone()),
            make(leaves_invalid),
        ];
        let training = vec!["QQ".to_string()];
        let report = compute_metrics(&generated, &training, v, &backend, None).unwrap();
        // brute force over the four outcomes: 2 valid / 4; 1 distinct / 2 valid;
        // both valid novel; both pass the default quality hook
        assert_eq!(report.validity, 50.0);
        assert_eq!(report.uniqueness, 50.0);
        assert_eq!(report.novelty, 100.0);
        assert_eq!(report.quality, 100.0);
        assert_eq!(report.counts.valid, 2);
    }

    #[test]
    fn duplicating_the_batch_preserves_validity_and_halves_uniqueness() {
        let d = generate_toy_dataset(&GenConfig { seed: 13, n_trees: 30, ..GenConfig::default() }).unwrap();
        let backend = ToyBackend { registry: &d.vocabularies.templates };
        let base: Vec<_> = d.trees.iter().take(8).map(|p| p.reaction.clone()).collect();
        let training: Vec<String> = Vec::new();
        let single = compute_metrics(&base, &training, &d.vocabularies, &backend, None).unwrap();
        let doubled: Vec<_> = base.iter().chain(base.iter()).cloned().collect();
        let twice = compute_metrics(&doubled, &training, &d.vocabularies, &backend, None).unwrap();
        assert_eq!(single.validity, twice.validity);
        assert_eq!(twice.counts.unique, single.counts.unique);
        assert!((twice.uniqueness - single.uniqueness / 2.0).abs() < 1e-9);
    }

    #[test]
    fn template_mentions_scans_heads_only() {
        assert_eq!(template_mentions("T3(AQB,QC)"), vec![3]);
        assert_eq!(template_mentions("T1(T3(AQB,QC),ZZ)"), vec![1, 3]);
        assert_eq!(template_mentions("QTX"), Vec::<usize>::new());
        // 'T' inside a fragment never starts a head
        assert_eq!(template_mentions("T0(AT,BT)"), vec![0]);
    }

    #[test]
    fn descriptor_distance_is_zero_on_identical_sets() {
        let products = vec!["T3(AQB,QC)", "AQB"];
        assert_eq!(descriptor_distance(&products, &products, 4), 0.0);
        assert!(descriptor_distance(&products, &["ZZZZZZZZZZ"], 4) > 0.0);
    }
}
