//! N-pair batch sampling and the SGD training loop.
//!
//! Every step draws one (anchor, positive) pair from each class, runs both
//! through the network, evaluates the N-pair contrastive loss on their
//! posteriors and applies one SGD update with the summed gradient. An epoch
//! is `max(1, N_p / (2 N_c))` steps.

mod augment;
mod dataset;

pub use augment::{augment, flip_horizontal, shift_image, Augmentation};
pub use dataset::{
    dataset_from_idx, load_dataset, load_idx, load_mnist_dir, read_dataset, read_idx_images, read_idx_labels,
    save_dataset, write_dataset, LabeledDataset, DATASET_MAGIC, DATASET_VERSION, IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
};

use crate::error::{PdhError, Result};
use crate::loss::{loss_grad_wrt_logits, npair_contrastive_loss, PairBatch};
use crate::model::{backward_accumulate, forward, init_params, posteriors, ModelConfig, Parameters};
use crate::numerics::{sgd_step, Matrix, Rng, SgdConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub code_bits: usize,
    pub sgd: SgdConfig,
    pub epochs: usize,
    pub augmentation: Augmentation,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.code_bits == 0 {
            return Err(PdhError::InvalidConfig("code length must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(PdhError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.augmentation.shift_pixels > 4 {
            return Err(PdhError::InvalidConfig("shift must be at most 4 pixels".into()));
        }
        self.sgd.validate()
    }
}

/// Dataset indices of one (anchor, positive) pair per class, in class order.
pub fn sample_npair_batch(ds: &LabeledDataset, rng: &mut Rng) -> Result<Vec<(usize, usize)>> {
    sample_from_index(&ds.class_indices(), rng)
}

fn sample_from_index(by_class: &[Vec<usize>], rng: &mut Rng) -> Result<Vec<(usize, usize)>> {
    if let Some((class, members)) = by_class.iter().enumerate().find(|(_, m)| m.len() < 2) {
        return Err(PdhError::ClassTooSmall { class, count: members.len() });
    }
    Ok(by_class
        .iter()
        .map(|members| {
            let picks = rng.sample_distinct(members.len(), 2);
            (members[picks[0]], members[picks[1]])
        })
        .collect())
}

pub fn steps_per_epoch(ds: &LabeledDataset) -> usize {
    (ds.len() / (2 * ds.num_classes().max(1))).max(1)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: Parameters,
    /// Loss of every batch, measured before that batch's update.
    pub loss_history: Vec<f64>,
}

/// Loss and summed parameter gradient for one sampled batch.
pub fn batch_loss_and_grads(
    params: &Parameters,
    anchors: &[Vec<f64>],
    positives: &[Vec<f64>],
) -> Result<(f64, Vec<Matrix>)> {
    let n = params.config().code_bits;
    let mut traces = Vec::with_capacity(anchors.len() + positives.len());
    let mut qs = Vec::with_capacity(traces.capacity());
    for input in anchors.iter().chain(positives) {
        let (x, trace) = forward(params, input)?;
        qs.push(posteriors(&x));
        traces.push(trace);
    }
    let positives_q = qs.split_off(anchors.len());
    let batch = PairBatch::new(qs, positives_q)?;
    let loss = npair_contrastive_loss(&batch, n)?;
    let g = loss_grad_wrt_logits(&batch, n)?;
    let mut grads: Vec<Matrix> = params.tensors().iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect();
    for (trace, gx) in traces.iter().zip(g.anchors.iter().chain(&g.positives)) {
        backward_accumulate(params, trace, gx, &mut grads)?;
    }
    Ok((loss, grads))
}

pub fn train(ds: &LabeledDataset, mcfg: &ModelConfig, tcfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(ds, mcfg, tcfg, |_, _| {})
}

/// [`train`] with a callback receiving `(step, loss)` after every batch.
pub fn train_with_progress(
    ds: &LabeledDataset,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    tcfg.validate()?;
    mcfg.validate()?;
    if mcfg.code_bits != tcfg.code_bits {
        return Err(PdhError::InvalidConfig(format!(
            "model emits {} bits, training asks for {}",
            mcfg.code_bits, tcfg.code_bits
        )));
    }
    if mcfg.input != ds.shape() {
        return Err(PdhError::InvalidConfig(format!(
            "model input {:?} does not match dataset samples {:?}",
            mcfg.input,
            ds.shape()
        )));
    }
    let by_class = ds.class_indices();
    let mut root = Rng::new(tcfg.seed);
    let mut init_rng = root.split();
    let mut sample_rng = root.split();
    let mut augment_rng = root.split();

    let mut params = init_params(mcfg, &mut init_rng)?;
    let mut velocity: Vec<Matrix> = params.tensors().iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect();
    let total_steps = tcfg.epochs * steps_per_epoch(ds);
    let mut history = Vec::with_capacity(total_steps);
    let shape = ds.shape();

    for step in 0..total_steps {
        let pairs = sample_from_index(&by_class, &mut sample_rng)?;
        let mut view = |k: usize| augment(ds.image(k), shape, &tcfg.augmentation, &mut augment_rng);
        let anchors: Vec<Vec<f64>> = pairs.iter().map(|&(a, _)| view(a)).collect();
        let positives: Vec<Vec<f64>> = pairs.iter().map(|&(_, p)| view(p)).collect();
        let (loss, grads) = match batch_loss_and_grads(&params, &anchors, &positives) {
            Err(PdhError::NonFinite(_)) => return Err(PdhError::Divergence { step, loss: f64::NAN }),
            other => other?,
        };
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(PdhError::Divergence { step, loss });
        }
        history.push(loss);
        progress(step, loss);
        sgd_step(params.tensors_mut(), &grads, &tcfg.sgd, &mut velocity)?;
        if params.tensors().iter().any(|t| !t.is_finite()) {
            return Err(PdhError::Divergence { step, loss: f64::NAN });
        }
    }
    Ok(TrainOutcome { params, loss_history: history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InputShape;

    fn tiny_dataset() -> LabeledDataset {
        LabeledDataset::new(InputShape::Flat(1), 2, vec![0.0, 1.0, 2.0, 3.0], vec![0, 0, 1, 1]).unwrap()
    }

    #[test]
    fn two_by_two_batch_is_the_unique_pairing() {
        let ds = tiny_dataset();
        let mut rng = Rng::new(1);
        for _ in 0..20 {
            let pairs = sample_npair_batch(&ds, &mut rng).unwrap();
            assert_eq!(pairs.len(), 2);
            let mut first = [pairs[0].0, pairs[0].1];
            let mut second = [pairs[1].0, pairs[1].1];
            first.sort_unstable();
            second.sort_unstable();
            assert_eq!((first, second), ([0, 1], [2, 3]));
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let ds = LabeledDataset::new(InputShape::Flat(1), 3, vec![0.0; 30], (0..30).map(|k| (k % 3) as u16).collect()).unwrap();
        let a = sample_npair_batch(&ds, &mut Rng::new(7)).unwrap();
        let b = sample_npair_batch(&ds, &mut Rng::new(7)).unwrap();
        assert_eq!(a, b);
        for (class, &(x, y)) in a.iter().enumerate() {
            assert_ne!(x, y);
            assert_eq!(ds.label(x) as usize, class);
            assert_eq!(ds.label(y) as usize, class);
        }
    }

    #[test]
    fn singleton_class_is_named() {
        let ds = LabeledDataset::new(InputShape::Flat(1), 2, vec![0.0, 1.0, 2.0], vec![0, 0, 1]).unwrap();
        let err = sample_npair_batch(&ds, &mut Rng::new(1)).unwrap_err();
        assert!(matches!(err, PdhError::ClassTooSmall { class: 1, count: 1 }));
        assert!(err.to_string().contains("class 1"));
    }

    #[test]
    fn zero_learning_rate_keeps_init() {
        let ds = tiny_dataset();
        let mcfg = ModelConfig::mlp_small(1, 4);
        let tcfg = TrainConfig {
            code_bits: 4,
            sgd: SgdConfig::new(0.0, 0.9).unwrap(),
            epochs: 3,
            augmentation: Augmentation::default(),
            seed: 5,
        };
        let out = train(&ds, &mcfg, &tcfg).unwrap();
        let mut root = Rng::new(5);
        let init = init_params(&mcfg, &mut root.split()).unwrap();
        assert_eq!(out.params, init);
        assert_eq!(out.loss_history.len(), 3);
    }

    #[test]
    fn rejects_bad_configs() {
        let ds = tiny_dataset();
        let mut tcfg = TrainConfig {
            code_bits: 4,
            sgd: SgdConfig::new(0.1, 0.0).unwrap(),
            epochs: 0,
            augmentation: Augmentation::default(),
            seed: 1,
        };
        assert!(train(&ds, &ModelConfig::mlp_small(1, 4), &tcfg).is_err());
        tcfg.epochs = 1;
        assert!(train(&ds, &ModelConfig::mlp_small(2, 4), &tcfg).is_err());
        assert!(train(&ds, &ModelConfig::mlp_small(1, 5), &tcfg).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let ds = LabeledDataset::new(InputShape::Flat(1), 2, vec![0.0, 1e150, -1e150, 3.0], vec![0, 0, 1, 1]).unwrap();
        let tcfg = TrainConfig {
            code_bits: 2,
            sgd: SgdConfig::new(1e10, 0.0).unwrap(),
            epochs: 50,
            augmentation: Augmentation::default(),
            seed: 1,
        };
        let err = train(&ds, &ModelConfig::mlp_small(1, 2), &tcfg).unwrap_err();
        assert!(matches!(err, PdhError::Divergence { .. }), "{err}");
    }
}
