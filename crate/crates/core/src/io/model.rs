use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_json, write_json, RawTensor};
use crate::error::{Error, Result};
use crate::miml::{Hyperparams, MimlHead};
use crate::tensor::Matrix;
use crate::Real;

/// Sidecar JSON describing a saved head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCard {
    pub n_classes: usize,
    pub feat_dim: usize,
    pub attention: bool,
    /// Tensor file holding the parameters, relative to the card.
    pub params: String,
    pub hyperparams: Hyperparams<f64>,
    pub seed: u64,
}

/// Packs a head as a `rows × (D+1)` tensor: one row per class holding its
/// weights then its bias, plus a final attention row (`D` weights, bias)
/// when attention is present.
pub fn head_to_tensor<T: Real>(head: &MimlHead<T>) -> RawTensor {
    let d = head.feat_dim();
    let mut data = Vec::with_capacity((head.n_classes() + 1) * (d + 1));
    for a in 0..head.n_classes() {
        data.extend(head.weights.row(a).iter().map(|v| v.to_f64_lossy() as f32));
        data.push(head.bias[a].to_f64_lossy() as f32);
    }
    if let Some(att) = &head.attention {
        data.extend(att.iter().map(|v| v.to_f64_lossy() as f32));
    }
    let rows = head.n_classes() + head.attention.is_some() as usize;
    RawTensor { dims: vec![rows, d + 1], data }
}

pub fn head_from_tensor<T: Real>(t: &RawTensor, n_classes: usize, attention: bool) -> Result<MimlHead<T>> {
    let &[rows, cols] = t.dims.as_slice() else {
        return Err(Error::Format(format!("head tensor needs 2 dims, got {:?}", t.dims)));
    };
    if cols == 0 || rows != n_classes + attention as usize {
        return Err(Error::Format(format!(
            "head tensor {rows}x{cols} does not fit {n_classes} classes (attention: {attention})"
        )));
    }
    let d = cols - 1;
    let lit = |v: &f32| T::lit(*v as f64);
    let mut weights = Matrix::zeros(n_classes, d);
    let mut bias = Vec::with_capacity(n_classes);
    for a in 0..n_classes {
        let row = &t.data[a * cols..(a + 1) * cols];
        for (w, v) in weights.row_mut(a).iter_mut().zip(&row[..d]) {
            *w = lit(v);
        }
        bias.push(lit(&row[d]));
    }
    let attention = attention.then(|| t.data[n_classes * cols..].iter().map(lit).collect());
    let head = MimlHead { weights, bias, attention };
    if !head.is_finite() {
        return Err(Error::Format("head tensor holds non-finite parameters".into()));
    }
    Ok(head)
}

/// Writes `<stem>.json` and `<stem>.otsr`.
pub fn save_model<T: Real>(stem: impl AsRef<Path>, head: &MimlHead<T>, hp: &Hyperparams<f64>, seed: u64) -> Result<()> {
    let stem = stem.as_ref();
    let tensor_path = stem.with_extension("otsr");
    head_to_tensor(head).save(&tensor_path)?;
    let card = ModelCard {
        n_classes: head.n_classes(),
        feat_dim: head.feat_dim(),
        attention: head.attention.is_some(),
        params: tensor_path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string(),
        hyperparams: *hp,
        seed,
    };
    write_json(stem.with_extension("json"), &card)
}

/// Reads a model card and its parameter tensor.
pub fn load_model<T: Real>(card_path: impl AsRef<Path>) -> Result<(ModelCard, MimlHead<T>)> {
    let card_path = card_path.as_ref();
    let card: ModelCard = read_json(card_path)?;
    let dir = card_path.parent().unwrap_or(Path::new("."));
    let head: MimlHead<T> = head_from_tensor(&RawTensor::load(dir.join(&card.params))?, card.n_classes, card.attention)?;
    if head.feat_dim() != card.feat_dim {
        return Err(Error::Format(format!(
            "model card says D = {} but the tensor holds D = {}",
            card.feat_dim,
            head.feat_dim()
        )));
    }
    Ok((card, head))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn head_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for attention in [false, true] {
            let head = MimlHead::<f32>::init(3, 5, attention, &mut rng);
            let t = head_to_tensor(&head);
            assert_eq!(t.dims, vec![3 + attention as usize, 6]);
            let back: MimlHead<f32> = head_from_tensor(&t, 3, attention).unwrap();
            assert_eq!(back, head);
            assert!(head_from_tensor::<f32>(&t, 4, attention).is_err());
        }
    }

    #[test]
    fn model_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let head = MimlHead::<f64>::init(2, 4, true, &mut rng);
        let hp = Hyperparams::default();
        save_model(dir.path().join("head"), &head, &hp, 9).unwrap();
        let (card, back): (ModelCard, MimlHead<f64>) = load_model(dir.path().join("head.json")).unwrap();
        assert_eq!((card.n_classes, card.feat_dim, card.attention, card.seed), (2, 4, true, 9));
        assert_eq!(card.params, "head.otsr");
        for (a, b) in back.flat_params().iter().zip(head.flat_params()) {
            assert_eq!(*a, b as f32 as f64);
        }
    }
}
