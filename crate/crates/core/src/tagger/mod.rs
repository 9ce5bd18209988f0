//! CNN-encoder / BiGRU-decoder sequence tagger with hand-rolled backprop.
//!
//! The encoder embeds per-token features (word, shape, anchor distance and
//! optionally pooled characters), then applies a stack of width-`k`
//! zero-padded convolutions with ReLU. The decoder runs one GRU over the
//! encoder output in each direction; the output layer scores each position
//! from the two GRU states concatenated with an embedding of the previous
//! label, so label conditioning stays outside the recurrences and exact
//! search over label sequences is cheap.
//!
//! Training is teacher-forced negative log-likelihood under Adadelta, with
//! early stopping on validation mention-level F1. All randomness (parameter
//! init, dropout, batch shuffling) is drawn from seeded generators, so runs
//! are bit-reproducible for a fixed configuration.

mod adadelta;
mod beam;
mod checkpoint;
mod net;
mod train;

pub use adadelta::{adadelta_step, TrainState};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use train::{train, EpochStats, Example, TrainOutcome};

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::TagScheme;
use crate::features::{PositionFeature, ShapeClass, Vocab};

#[derive(Debug, Error)]
pub enum TaggerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("sequence length mismatch: {expected} feature rows but {got} labels")]
    LengthMismatch { expected: usize, got: usize },
    #[error("label id {id} out of range for an alphabet of {alphabet}")]
    LabelOutOfRange { id: usize, alphabet: usize },
    #[error("tag sequence uses scheme {got} but the model was built for {expected}")]
    SchemeMismatch { expected: &'static str, got: &'static str },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("validation set is empty")]
    EmptyValidationSet,
    #[error(transparent)]
    Codec(#[from] crate::codec::CodecError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
}

/// Hyperparameters for one tagger. `new` fills every field with its default;
/// the decoder output size defaults to the tag alphabet size of the chosen
/// scheme but may be set larger (extra rows are trained but never decoded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerConfig {
    pub scheme: TagScheme,
    pub word_dim: usize,
    pub shape_dim: usize,
    pub position_dim: usize,
    pub char_dim: usize,
    pub label_dim: usize,
    /// Pooled character embeddings are appended to the token embedding when
    /// set. Off by default; the anchored steps of the pipeline switch it on.
    pub use_char_features: bool,
    /// Channels of every convolution layer (the encoder's output width).
    pub encoder_output_size: usize,
    /// Convolution window width; must be odd so the output stays centred.
    pub encoder_filter_size: usize,
    pub conv_layers: usize,
    /// Hidden size of each GRU direction.
    pub gru_hidden: usize,
    /// Rows of the output projection. At least the alphabet size; defaults
    /// to exactly the alphabet size.
    pub decoder_output_size: usize,
    pub dropout_rate: f64,
    pub beam_size: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation-F1 improvement before training stops.
    pub early_stopping_patience: usize,
    pub adadelta_rho: f64,
    pub adadelta_epsilon: f64,
    pub seed: u64,
}

impl TaggerConfig {
    pub fn new(scheme: TagScheme) -> TaggerConfig {
        TaggerConfig {
            scheme,
            word_dim: 50,
            shape_dim: 8,
            position_dim: 8,
            char_dim: 16,
            label_dim: 16,
            use_char_features: false,
            encoder_output_size: 400,
            encoder_filter_size: 3,
            conv_layers: 3,
            gru_hidden: 200,
            decoder_output_size: scheme.size(),
            dropout_rate: 0.25,
            beam_size: 8,
            batch_size: 32,
            max_epochs: 100,
            early_stopping_patience: 10,
            adadelta_rho: 0.95,
            adadelta_epsilon: 1e-6,
            seed: 0,
        }
    }

    pub fn alphabet_size(&self) -> usize {
        self.scheme.size()
    }

    /// Index of the synthetic start-of-sentence label in the label
    /// embedding table (one past the real alphabet).
    pub(crate) fn start_label(&self) -> usize {
        self.alphabet_size()
    }

    pub(crate) fn input_dim(&self) -> usize {
        let base = self.word_dim + self.shape_dim + self.position_dim;
        if self.use_char_features { base + self.char_dim } else { base }
    }

    pub fn validate(&self) -> Result<(), TaggerError> {
        let positive = [
            ("word_dim", self.word_dim),
            ("shape_dim", self.shape_dim),
            ("position_dim", self.position_dim),
            ("char_dim", self.char_dim),
            ("label_dim", self.label_dim),
            ("encoder_output_size", self.encoder_output_size),
            ("encoder_filter_size", self.encoder_filter_size),
            ("conv_layers", self.conv_layers),
            ("gru_hidden", self.gru_hidden),
            ("decoder_output_size", self.decoder_output_size),
            ("beam_size", self.beam_size),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("early_stopping_patience", self.early_stopping_patience),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(TaggerError::Config(format!("{name} must be positive")));
            }
        }
        if self.encoder_filter_size % 2 == 0 {
            return Err(TaggerError::Config("encoder_filter_size must be odd".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(TaggerError::Config("dropout_rate must lie in [0, 1)".into()));
        }
        if self.decoder_output_size < self.alphabet_size() {
            return Err(TaggerError::Config(format!(
                "decoder_output_size {} is smaller than the tag alphabet ({})",
                self.decoder_output_size,
                self.alphabet_size()
            )));
        }
        if !(0.0..1.0).contains(&self.adadelta_rho) {
            return Err(TaggerError::Config("adadelta_rho must lie in [0, 1)".into()));
        }
        if self.adadelta_epsilon <= 0.0 {
            return Err(TaggerError::Config("adadelta_epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// One GRU direction's parameters, row-vector convention: for input `x` and
/// state `h`, the update gate is `sigmoid(x·wz + h·uz + bz)` and likewise
/// for the reset gate; the candidate is `tanh(x·wn + r ⊙ (h·un) + bn)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct GruBlock {
    pub wz: Array2<f64>,
    pub uz: Array2<f64>,
    pub bz: Array2<f64>,
    pub wr: Array2<f64>,
    pub ur: Array2<f64>,
    pub br: Array2<f64>,
    pub wn: Array2<f64>,
    pub un: Array2<f64>,
    pub bn: Array2<f64>,
}

impl GruBlock {
    fn zeros(input: usize, hidden: usize) -> GruBlock {
        GruBlock {
            wz: Array2::zeros((input, hidden)),
            uz: Array2::zeros((hidden, hidden)),
            bz: Array2::zeros((1, hidden)),
            wr: Array2::zeros((input, hidden)),
            ur: Array2::zeros((hidden, hidden)),
            br: Array2::zeros((1, hidden)),
            wn: Array2::zeros((input, hidden)),
            un: Array2::zeros((hidden, hidden)),
            bn: Array2::zeros((1, hidden)),
        }
    }

    fn entries(&self, prefix: &str) -> Vec<(String, &Array2<f64>)> {
        vec![
            (format!("{prefix}.wz"), &self.wz),
            (format!("{prefix}.uz"), &self.uz),
            (format!("{prefix}.bz"), &self.bz),
            (format!("{prefix}.wr"), &self.wr),
            (format!("{prefix}.ur"), &self.ur),
            (format!("{prefix}.br"), &self.br),
            (format!("{prefix}.wn"), &self.wn),
            (format!("{prefix}.un"), &self.un),
            (format!("{prefix}.bn"), &self.bn),
        ]
    }

    fn entries_mut(&mut self, prefix: &str) -> Vec<(String, &mut Array2<f64>)> {
        vec![
            (format!("{prefix}.wz"), &mut self.wz),
            (format!("{prefix}.uz"), &mut self.uz),
            (format!("{prefix}.bz"), &mut self.bz),
            (format!("{prefix}.wr"), &mut self.wr),
            (format!("{prefix}.ur"), &mut self.ur),
            (format!("{prefix}.br"), &mut self.br),
            (format!("{prefix}.wn"), &mut self.wn),
            (format!("{prefix}.un"), &mut self.un),
            (format!("{prefix}.bn"), &mut self.bn),
        ]
    }
}

/// The full parameter tree. Every tensor is a 2-D `f64` array (biases are
/// single-row matrices) so optimizer state, serialization and gradient
/// checking can treat all blocks uniformly via [`Params::entries`].
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Params {
    pub emb_word: Array2<f64>,
    pub emb_shape: Array2<f64>,
    pub emb_position: Array2<f64>,
    pub emb_char: Array2<f64>,
    /// One row per tag plus a final row for the start-of-sentence label.
    pub emb_label: Array2<f64>,
    /// Per layer: weight `[filter·input_dim, channels]` and bias.
    pub conv: Vec<(Array2<f64>, Array2<f64>)>,
    pub gru_fwd: GruBlock,
    pub gru_bwd: GruBlock,
    /// `[2·gru_hidden + label_dim, decoder_output_size]`.
    pub out_w: Array2<f64>,
    pub out_b: Array2<f64>,
}

impl Params {
    fn zeros(config: &TaggerConfig, word_count: usize, char_count: usize) -> Params {
        let d_in = config.input_dim();
        let d_h = config.encoder_output_size;
        let k = config.encoder_filter_size;
        let g = config.gru_hidden;
        let conv = (0..config.conv_layers)
            .map(|layer| {
                let d_prev = if layer == 0 { d_in } else { d_h };
                (Array2::zeros((k * d_prev, d_h)), Array2::zeros((1, d_h)))
            })
            .collect();
        Params {
            emb_word: Array2::zeros((word_count, config.word_dim)),
            emb_shape: Array2::zeros((ShapeClass::COUNT, config.shape_dim)),
            emb_position: Array2::zeros((PositionFeature::COUNT, config.position_dim)),
            emb_char: Array2::zeros((char_count, config.char_dim)),
            emb_label: Array2::zeros((config.alphabet_size() + 1, config.label_dim)),
            conv,
            gru_fwd: GruBlock::zeros(d_h, g),
            gru_bwd: GruBlock::zeros(d_h, g),
            out_w: Array2::zeros((2 * g + config.label_dim, config.decoder_output_size)),
            out_b: Array2::zeros((1, config.decoder_output_size)),
        }
    }

    pub(crate) fn zeros_like(&self) -> Params {
        let mut copy = self.clone();
        for (_, tensor) in copy.entries_mut() {
            tensor.fill(0.0);
        }
        copy
    }

    /// All tensors with stable names in a fixed order. The order is the
    /// contract that lets optimizer state, gradients and checkpoints be
    /// zipped positionally.
    pub(crate) fn entries(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = vec![
            ("emb.word".to_string(), &self.emb_word),
            ("emb.shape".to_string(), &self.emb_shape),
            ("emb.position".to_string(), &self.emb_position),
            ("emb.char".to_string(), &self.emb_char),
            ("emb.label".to_string(), &self.emb_label),
        ];
        for (i, (w, b)) in self.conv.iter().enumerate() {
            out.push((format!("conv{}.w", i + 1), w));
            out.push((format!("conv{}.b", i + 1), b));
        }
        out.extend(self.gru_fwd.entries("gru_fwd"));
        out.extend(self.gru_bwd.entries("gru_bwd"));
        out.push(("out.w".to_string(), &self.out_w));
        out.push(("out.b".to_string(), &self.out_b));
        out
    }

    pub(crate) fn entries_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out = vec![
            ("emb.word".to_string(), &mut self.emb_word),
            ("emb.shape".to_string(), &mut self.emb_shape),
            ("emb.position".to_string(), &mut self.emb_position),
            ("emb.char".to_string(), &mut self.emb_char),
            ("emb.label".to_string(), &mut self.emb_label),
        ];
        for (i, (w, b)) in self.conv.iter_mut().enumerate() {
            out.push((format!("conv{}.w", i + 1), w));
            out.push((format!("conv{}.b", i + 1), b));
        }
        out.extend(self.gru_fwd.entries_mut("gru_fwd"));
        out.extend(self.gru_bwd.entries_mut("gru_bwd"));
        out.push(("out.w".to_string(), &mut self.out_w));
        out.push(("out.b".to_string(), &mut self.out_b));
        out
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        for (_, tensor) in self.entries_mut() {
            tensor.mapv_inplace(|v| v * factor);
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Params) {
        let mut mine = self.entries_mut();
        let theirs = other.entries();
        debug_assert_eq!(mine.len(), theirs.len());
        for ((_, dst), (_, src)) in mine.iter_mut().zip(theirs.iter()) {
            **dst += *src;
        }
    }
}

/// Gradients of the loss with respect to every parameter tensor, congruent
/// with the model's [`Params`] tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub(crate) Params);

impl Gradients {
    pub(crate) fn zeros_like(model: &TaggerModel) -> Gradients {
        Gradients(model.params.zeros_like())
    }

    pub(crate) fn accumulate(&mut self, other: &Gradients) {
        self.0.add_assign(&other.0);
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        self.0.scale(factor);
    }

    /// Largest absolute entry across all blocks; handy for sanity checks.
    pub fn max_abs(&self) -> f64 {
        self.0
            .entries()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// A trainable tagger: configuration plus parameter tensors. The vocabulary
/// is kept outside the model and bundled alongside it in checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    pub config: TaggerConfig,
    pub(crate) params: Params,
}

impl TaggerModel {
    /// Initializes parameters from the configured seed: embeddings uniform
    /// in ±0.1, weight matrices Xavier-uniform, biases zero. For one seed
    /// and configuration the result is identical on every run.
    pub fn new(config: TaggerConfig, vocab: &Vocab) -> Result<TaggerModel, TaggerError> {
        config.validate()?;
        let mut params = Params::zeros(&config, vocab.word_count(), vocab.char_count());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

        for table in [
            &mut params.emb_word,
            &mut params.emb_shape,
            &mut params.emb_position,
            &mut params.emb_char,
            &mut params.emb_label,
        ] {
            fill_uniform(table, 0.1, &mut rng);
        }
        for (w, _) in params.conv.iter_mut() {
            fill_xavier(w, &mut rng);
        }
        for block in [&mut params.gru_fwd, &mut params.gru_bwd] {
            for m in [&mut block.wz, &mut block.uz, &mut block.wr, &mut block.ur, &mut block.wn, &mut block.un] {
                fill_xavier(m, &mut rng);
            }
        }
        fill_xavier(&mut params.out_w, &mut rng);

        Ok(TaggerModel { config, params })
    }

    /// Number of trainable scalars across all parameter tensors.
    pub fn parameter_count(&self) -> usize {
        self.params.entries().iter().map(|(_, t)| t.len()).sum()
    }
}

fn fill_uniform(tensor: &mut Array2<f64>, bound: f64, rng: &mut ChaCha8Rng) {
    for v in tensor.iter_mut() {
        *v = rng.random_range(-bound..bound);
    }
}

fn fill_xavier(tensor: &mut Array2<f64>, rng: &mut ChaCha8Rng) {
    let (fan_in, fan_out) = tensor.dim();
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    fill_uniform(tensor, bound, rng);
}
