//! Deterministic FLOP accounting and magnitude pruning against a FLOPs
//! budget.
//!
//! The count models a full-graph forward pass. Per layer with input width
//! `d` and output width `o` on a graph with `n` nodes and active degree
//! sum `Σ|N(v)|`:
//!
//! ```text
//! aggregation: Σ|N(v)|·d adds + n·d divides
//! transform:   n·(2·nnz(mask_self) + 2·nnz(mask_neigh)) + n·o bias adds
//! ```
//!
//! Multiply-accumulate counts as 2 ops; only unmasked weights and active
//! edges count. Every weight therefore contributes exactly `2n` FLOPs,
//! which makes the pruning loop's budget arithmetic exact.

use crate::graph::Graph;

use super::{GnnError, GnnModel, SageLayer};

fn layer_flops(layer: &SageLayer, n: u64, degree_sum: u64) -> u64 {
    let d = layer.in_dim() as u64;
    let o = layer.out_dim() as u64;
    let aggregation = degree_sum * d + n * d;
    let transform = n * (2 * layer.nnz_self() + 2 * layer.nnz_neigh()) + n * o;
    aggregation + transform
}

/// FLOPs of one full forward pass of `model` on the active subgraph of
/// `g`.
pub fn count_flops(model: &GnnModel, g: &Graph) -> u64 {
    let n = g.num_nodes() as u64;
    let degree_sum = 2 * g.num_active_edges() as u64;
    layer_flops(&model.layer1.layer, n, degree_sum)
        + layer_flops(&model.layer2.layer, n, degree_sum)
}

/// FLOPs of the layer-1 block alone (the client-side share under the
/// split placement).
pub fn count_flops_layer1(model: &GnnModel, g: &Graph) -> u64 {
    layer_flops(&model.layer1.layer, g.num_nodes() as u64, 2 * g.num_active_edges() as u64)
}

/// Mask the smallest-magnitude unmasked weights, in ascending order of
/// |value| with ties broken by (layer, matrix, row, column) — matrix 0 is
/// the self transform, 1 the neighbor transform — until the model's FLOPs
/// on `g` drop to at most `flops_target_ratio` times the count at entry.
/// Biases and batch-norm parameters are never masked. Returns the number
/// of weights masked.
pub fn magnitude_prune_weights(
    model: &mut GnnModel,
    flops_target_ratio: f64,
    g: &Graph,
) -> Result<usize, GnnError> {
    if !(flops_target_ratio > 0.0 && flops_target_ratio <= 1.0) {
        return Err(GnnError::InvalidTargetRatio(flops_target_ratio));
    }
    let original = count_flops(model, g);
    let target = flops_target_ratio * original as f64;
    if original as f64 <= target {
        return Ok(0);
    }

    // The transform terms vanish with every weight masked; what remains is
    // the floor no amount of masking can undercut.
    let per_weight = 2 * g.num_nodes() as u64;
    let total_nnz: u64 = [&model.layer1.layer, &model.layer2.layer]
        .iter()
        .map(|l| l.nnz_self() + l.nnz_neigh())
        .sum();
    let floor = original - per_weight * total_nnz;
    if (floor as f64) > target {
        return Err(GnnError::TargetUnreachable { target: target.floor() as u64, floor });
    }

    // (|w|, layer, matrix, row, col) for every unmasked weight.
    let mut candidates: Vec<(f64, usize, usize, usize, usize)> = Vec::new();
    {
        let layers = [&model.layer1.layer, &model.layer2.layer];
        for (li, layer) in layers.iter().enumerate() {
            for (mi, (w, mask)) in
                [(&layer.w_self, &layer.mask_self), (&layer.w_neigh, &layer.mask_neigh)]
                    .into_iter()
                    .enumerate()
            {
                for ((r, c), &value) in w.indexed_iter() {
                    if mask[[r, c]] != 0.0 {
                        candidates.push((value.abs(), li, mi, r, c));
                    }
                }
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("weights are finite")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
            .then(a.4.cmp(&b.4))
    });

    let mut flops = original;
    let mut masked = 0;
    for (_, li, mi, r, c) in candidates {
        if flops as f64 <= target {
            break;
        }
        let layer = if li == 0 { &mut model.layer1.layer } else { &mut model.layer2.layer };
        let (w, mask) = if mi == 0 {
            (&mut layer.w_self, &mut layer.mask_self)
        } else {
            (&mut layer.w_neigh, &mut layer.mask_neigh)
        };
        mask[[r, c]] = 0.0;
        w[[r, c]] = 0.0;
        flops -= per_weight;
        masked += 1;
    }
    debug_assert_eq!(flops, count_flops(model, g));
    Ok(masked)
}
