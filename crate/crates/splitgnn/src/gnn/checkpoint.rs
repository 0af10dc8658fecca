//! Model checkpoints: a JSON document listing shapes, weights, masks and
//! batch-norm statistics, with every real stored as f32. Values written by
//! [`save_checkpoint`] reload bit-for-bit (f32 text round-trips exactly);
//! f64 training state is narrowed once at save time.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{BatchNorm, GnnError, GnnModel, Layer1Part, Layer2Part, SageLayer};

const SCHEMA: &str = "sage-checkpoint-v1";

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    in_dim: usize,
    out_dim: usize,
    w_self: Vec<f32>,
    w_neigh: Vec<f32>,
    bias: Vec<f32>,
    mask_self: Vec<u8>,
    mask_neigh: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct BnDoc {
    gamma: Vec<f32>,
    beta: Vec<f32>,
    running_mean: Vec<f32>,
    running_var: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    schema: String,
    dropout_rate: f64,
    layer1: LayerDoc,
    bn1: BnDoc,
    layer2: LayerDoc,
}

fn layer_doc(layer: &SageLayer) -> LayerDoc {
    LayerDoc {
        in_dim: layer.in_dim(),
        out_dim: layer.out_dim(),
        w_self: layer.w_self.iter().map(|&x| x as f32).collect(),
        w_neigh: layer.w_neigh.iter().map(|&x| x as f32).collect(),
        bias: layer.bias.iter().map(|&x| x as f32).collect(),
        mask_self: layer.mask_self.iter().map(|&m| (m != 0.0) as u8).collect(),
        mask_neigh: layer.mask_neigh.iter().map(|&m| (m != 0.0) as u8).collect(),
    }
}

fn layer_from_doc(doc: &LayerDoc) -> Result<SageLayer, GnnError> {
    let shape = (doc.in_dim, doc.out_dim);
    let want = doc.in_dim * doc.out_dim;
    for (name, len) in [
        ("w_self", doc.w_self.len()),
        ("w_neigh", doc.w_neigh.len()),
        ("mask_self", doc.mask_self.len()),
        ("mask_neigh", doc.mask_neigh.len()),
    ] {
        if len != want {
            return Err(GnnError::CheckpointFormat(format!(
                "{name} has {len} entries, expected {want}"
            )));
        }
    }
    if doc.bias.len() != doc.out_dim {
        return Err(GnnError::CheckpointFormat(format!(
            "bias has {} entries, expected {}",
            doc.bias.len(),
            doc.out_dim
        )));
    }
    let to2 = |v: &[f32]| {
        Array2::from_shape_vec(shape, v.iter().map(|&x| x as f64).collect())
            .expect("length checked")
    };
    Ok(SageLayer {
        w_self: to2(&doc.w_self),
        w_neigh: to2(&doc.w_neigh),
        bias: Array1::from_iter(doc.bias.iter().map(|&x| x as f64)),
        mask_self: Array2::from_shape_vec(
            shape,
            doc.mask_self.iter().map(|&m| m as f64).collect(),
        )
        .expect("length checked"),
        mask_neigh: Array2::from_shape_vec(
            shape,
            doc.mask_neigh.iter().map(|&m| m as f64).collect(),
        )
        .expect("length checked"),
    })
}

pub fn save_checkpoint(model: &GnnModel, path: &Path) -> Result<(), GnnError> {
    let doc = CheckpointDoc {
        schema: SCHEMA.to_string(),
        dropout_rate: model.dropout_rate,
        layer1: layer_doc(&model.layer1.layer),
        bn1: BnDoc {
            gamma: model.layer1.bn.gamma.iter().map(|&x| x as f32).collect(),
            beta: model.layer1.bn.beta.iter().map(|&x| x as f32).collect(),
            running_mean: model.layer1.bn.running_mean.iter().map(|&x| x as f32).collect(),
            running_var: model.layer1.bn.running_var.iter().map(|&x| x as f32).collect(),
        },
        layer2: layer_doc(&model.layer2.layer),
    };
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| GnnError::CheckpointFormat(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<GnnModel, GnnError> {
    let text = std::fs::read_to_string(path)?;
    let doc: CheckpointDoc =
        serde_json::from_str(&text).map_err(|e| GnnError::CheckpointFormat(e.to_string()))?;
    if doc.schema != SCHEMA {
        return Err(GnnError::CheckpointFormat(format!(
            "unknown schema {:?}, expected {SCHEMA:?}",
            doc.schema
        )));
    }
    let layer1 = layer_from_doc(&doc.layer1)?;
    let layer2 = layer_from_doc(&doc.layer2)?;
    let hidden = layer1.out_dim();
    for (name, len) in [
        ("gamma", doc.bn1.gamma.len()),
        ("beta", doc.bn1.beta.len()),
        ("running_mean", doc.bn1.running_mean.len()),
        ("running_var", doc.bn1.running_var.len()),
    ] {
        if len != hidden {
            return Err(GnnError::CheckpointFormat(format!(
                "bn {name} has {len} entries, expected {hidden}"
            )));
        }
    }
    let widen = |v: &[f32]| Array1::from_iter(v.iter().map(|&x| x as f64));
    Ok(GnnModel {
        layer1: Layer1Part {
            layer: layer1,
            bn: BatchNorm {
                gamma: widen(&doc.bn1.gamma),
                beta: widen(&doc.bn1.beta),
                running_mean: widen(&doc.bn1.running_mean),
                running_var: widen(&doc.bn1.running_var),
            },
        },
        layer2: Layer2Part { layer: layer2 },
        dropout_rate: doc.dropout_rate,
    })
}
