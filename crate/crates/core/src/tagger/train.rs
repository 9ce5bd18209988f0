//! Training loop: shuffled mini-batches, Adadelta updates, and early
//! stopping on validation mention-level F1.
//!
//! Sentences in a batch are processed at their own lengths and the gradient
//! is averaged over the batch, which is equivalent to padding to the batch
//! maximum with a loss mask but never spends work on pad positions. The
//! epoch metric decodes the validation set with beam search, converts tags
//! to mention sets, and scores them exactly; the returned model carries the
//! parameters from the best validation epoch, not the last one.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{decode, TagSequence};
use crate::eval::MatchCounts;
use crate::features::FeatureRow;

use super::net::DropoutMasks;
use super::{adadelta_step, Gradients, TaggerError, TaggerModel, TrainState};

/// One training or validation item: per-token features with the gold tag
/// ids (alphabet indices of the model's scheme).
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub rows: Vec<FeatureRow>,
    pub tags: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean teacher-forced negative log-likelihood per training sentence.
    pub train_loss: f64,
    /// Mention-level micro F1 on the validation set.
    pub val_f1: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// The model restored to its best-validation parameters.
    pub model: TaggerModel,
    pub history: Vec<EpochStats>,
    /// 1-based epoch whose parameters the returned model carries.
    pub best_epoch: usize,
    pub best_val_f1: f64,
    pub stopped_early: bool,
}

/// Trains until the validation F1 stops improving for
/// `early_stopping_patience` consecutive epochs or `max_epochs` is reached.
/// Fully deterministic for a fixed configuration: shuffling and dropout both
/// derive from the configured seed.
pub fn train(
    mut model: TaggerModel,
    train_set: &[Example],
    val_set: &[Example],
) -> Result<TrainOutcome, TaggerError> {
    if train_set.is_empty() {
        return Err(TaggerError::EmptyTrainingSet);
    }
    if val_set.is_empty() {
        return Err(TaggerError::EmptyValidationSet);
    }
    for example in train_set.iter().chain(val_set) {
        model.check_labels(&example.rows, &example.tags)?;
    }

    let config = model.config.clone();
    // A distinct stream from parameter initialization, still seed-derived.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut state = TrainState::new(&model);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut history = Vec::new();
    let mut best_params = model.params.clone();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut patience = 0;
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut batch_grads = Gradients::zeros_like(&model);
            for &index in batch {
                let example = &train_set[index];
                let masks = (config.dropout_rate > 0.0)
                    .then(|| DropoutMasks::sample(&config, example.rows.len(), &mut rng));
                let (loss, grads) =
                    model.grad_with_masks(&example.rows, &example.tags, masks.as_ref())?;
                loss_sum += loss;
                batch_grads.accumulate(&grads);
            }
            batch_grads.scale(1.0 / batch.len() as f64);
            adadelta_step(&mut model, &mut state, &batch_grads);
        }

        let train_loss = loss_sum / train_set.len() as f64;
        let val_f1 = validation_mention_f1(&model, val_set);
        history.push(EpochStats { epoch, train_loss, val_f1 });

        if val_f1 > best_f1 {
            best_f1 = val_f1;
            best_epoch = epoch;
            best_params = model.params.clone();
            patience = 0;
        } else {
            patience += 1;
            if patience >= config.early_stopping_patience {
                stopped_early = true;
                break;
            }
        }
    }

    model.params = best_params;
    Ok(TrainOutcome { model, history, best_epoch, best_val_f1: best_f1, stopped_early })
}

/// Beam-decodes every validation sentence, converts predicted and gold tags
/// to mention sets, and returns the micro F1 of exact one-to-one matches.
pub fn validation_mention_f1(model: &TaggerModel, val_set: &[Example]) -> f64 {
    let scheme = model.config.scheme;
    let mut counts = MatchCounts::default();
    for example in val_set {
        let (pred_seq, _) = model.beam_decode(&example.rows, model.config.beam_size);
        let gold_seq = TagSequence::from_indices(scheme, &example.tags);
        let pred = decode(&pred_seq).expect("decoding predicted tags is total");
        let gold = decode(&gold_seq).expect("decoding gold tags is total");
        counts.absorb(match_mention_sets(&gold, &pred));
    }
    counts.f1()
}

fn match_mention_sets(
    gold: &[(crate::corpus::Span, Option<crate::corpus::DdiType>)],
    pred: &[(crate::corpus::Span, Option<crate::corpus::DdiType>)],
) -> MatchCounts {
    use std::collections::BTreeMap;
    let mut tally: BTreeMap<_, (usize, usize)> = BTreeMap::new();
    for item in gold {
        tally.entry(item.clone()).or_default().0 += 1;
    }
    for item in pred {
        tally.entry(item.clone()).or_default().1 += 1;
    }
    let tp: usize = tally.values().map(|&(g, p)| g.min(p)).sum();
    MatchCounts::new(tp, pred.len() - tp, gold.len() - tp)
}
