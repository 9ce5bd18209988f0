//! Forward pass, loss, and hand-derived backpropagation.
//!
//! Row-vector convention throughout: activations are `[T, dim]` matrices,
//! one row per token, and a linear layer is `x · W + b` with `b` a one-row
//! matrix. Dropout (training only) multiplies by pre-scaled masks whose
//! entries are `0` or `1/(1-p)`, so evaluation never rescales.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::codec::TagSequence;
use crate::features::FeatureRow;

use super::{Gradients, GruBlock, TaggerConfig, TaggerError, TaggerModel};

/// Pre-scaled dropout masks for one sequence: one over the embedded input
/// and one after each convolution layer except the last.
pub(crate) struct DropoutMasks {
    emb: Array2<f64>,
    conv: Vec<Array2<f64>>,
}

impl DropoutMasks {
    pub(crate) fn sample(config: &TaggerConfig, len: usize, rng: &mut ChaCha8Rng) -> DropoutMasks {
        let p = config.dropout_rate;
        let mut draw = |shape: (usize, usize)| {
            let mut mask = Array2::zeros(shape);
            for v in mask.iter_mut() {
                *v = if rng.random_range(0.0..1.0) < p { 0.0 } else { 1.0 / (1.0 - p) };
            }
            mask
        };
        let emb = draw((len, config.input_dim()));
        let conv = (0..config.conv_layers.saturating_sub(1))
            .map(|_| draw((len, config.encoder_output_size)))
            .collect();
        DropoutMasks { emb, conv }
    }
}

/// Per-direction GRU activations. `hprev[t]` is the state the step at
/// position `t` consumed (zero at the direction's starting edge).
pub(crate) struct GruTrace {
    hprev: Array2<f64>,
    z: Array2<f64>,
    r: Array2<f64>,
    n: Array2<f64>,
    pub(crate) h: Array2<f64>,
}

/// Everything the backward pass needs from one forward run.
pub(crate) struct Trace {
    conv_wins: Vec<Array2<f64>>,
    conv_pre: Vec<Array2<f64>>,
    conv_out: Vec<Array2<f64>>,
    fwd: GruTrace,
    bwd: GruTrace,
    full: Array2<f64>,
    prev_ids: Vec<usize>,
    pub(crate) logp: Array2<f64>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

fn log_softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Unrolls `input` into windows of `filter` consecutive rows (zero-padded at
/// both edges) so a convolution becomes one matrix product.
fn build_windows(input: &Array2<f64>, filter: usize) -> Array2<f64> {
    let (len, dim) = input.dim();
    let half = (filter / 2) as isize;
    let mut windows = Array2::zeros((len, filter * dim));
    for t in 0..len {
        for c in 0..filter {
            let src = t as isize + c as isize - half;
            if (0..len as isize).contains(&src) {
                windows
                    .slice_mut(s![t, c * dim..(c + 1) * dim])
                    .assign(&input.row(src as usize));
            }
        }
    }
    windows
}

/// Adjoint of [`build_windows`]: routes window gradients back to the rows
/// they were copied from.
fn scatter_windows(d_windows: &Array2<f64>, filter: usize, dim: usize) -> Array2<f64> {
    let len = d_windows.nrows();
    let half = (filter / 2) as isize;
    let mut d_input = Array2::zeros((len, dim));
    for t in 0..len {
        for c in 0..filter {
            let src = t as isize + c as isize - half;
            if (0..len as isize).contains(&src) {
                let mut dst = d_input.row_mut(src as usize);
                dst += &d_windows.slice(s![t, c * dim..(c + 1) * dim]);
            }
        }
    }
    d_input
}

fn run_gru(block: &GruBlock, inputs: &Array2<f64>, order: &[usize]) -> GruTrace {
    let len = inputs.nrows();
    let hidden = block.uz.nrows();
    let xz = inputs.dot(&block.wz);
    let xr = inputs.dot(&block.wr);
    let xn = inputs.dot(&block.wn);
    let mut trace = GruTrace {
        hprev: Array2::zeros((len, hidden)),
        z: Array2::zeros((len, hidden)),
        r: Array2::zeros((len, hidden)),
        n: Array2::zeros((len, hidden)),
        h: Array2::zeros((len, hidden)),
    };
    let mut state = Array1::<f64>::zeros(hidden);
    for &t in order {
        trace.hprev.row_mut(t).assign(&state);

        let mut az = state.dot(&block.uz);
        az += &xz.row(t);
        az += &block.bz.row(0);
        let z = az.mapv(sigmoid);

        let mut ar = state.dot(&block.ur);
        ar += &xr.row(t);
        ar += &block.br.row(0);
        let r = ar.mapv(sigmoid);

        let hu = state.dot(&block.un);
        let mut an = &r * &hu;
        an += &xn.row(t);
        an += &block.bn.row(0);
        let n = an.mapv(f64::tanh);

        let h = &n - &(&z * &n) + &(&z * &state);
        trace.z.row_mut(t).assign(&z);
        trace.r.row_mut(t).assign(&r);
        trace.n.row_mut(t).assign(&n);
        trace.h.row_mut(t).assign(&h);
        state = h;
    }
    trace
}

/// Backpropagates one GRU direction. `d_h_ext` carries the loss gradient
/// arriving at each step's state from outside the recurrence; gradients on
/// the inputs are accumulated into `d_inputs` and parameter gradients into
/// `grads`.
fn backward_gru(
    block: &GruBlock,
    trace: &GruTrace,
    inputs: &Array2<f64>,
    d_h_ext: &Array2<f64>,
    order: &[usize],
    d_inputs: &mut Array2<f64>,
    grads: &mut GruBlock,
) {
    let len = inputs.nrows();
    let hidden = block.uz.nrows();
    let mut dz_pre = Array2::<f64>::zeros((len, hidden));
    let mut dr_pre = Array2::<f64>::zeros((len, hidden));
    let mut dn_pre = Array2::<f64>::zeros((len, hidden));
    let hu_all = trace.hprev.dot(&block.un);

    let mut carry = Array1::<f64>::zeros(hidden);
    for &t in order.iter().rev() {
        let mut dh = carry;
        dh += &d_h_ext.row(t);

        let z = trace.z.row(t);
        let r = trace.r.row(t);
        let n = trace.n.row(t);
        let hprev = trace.hprev.row(t);

        let dzp = &dh * &(&hprev.to_owned() - &n) * &z * &z.mapv(|v| 1.0 - v);
        let dnp = &dh * &z.mapv(|v| 1.0 - v) * &n.mapv(|v| 1.0 - v * v);
        let dr_vec = &dnp * &hu_all.row(t);
        let drp = &dr_vec * &r * &r.mapv(|v| 1.0 - v);

        carry = &dh * &z;
        carry += &dzp.dot(&block.uz.t());
        carry += &drp.dot(&block.ur.t());
        carry += &(&dnp * &r).dot(&block.un.t());

        dz_pre.row_mut(t).assign(&dzp);
        dr_pre.row_mut(t).assign(&drp);
        dn_pre.row_mut(t).assign(&dnp);
    }

    grads.wz += &inputs.t().dot(&dz_pre);
    grads.uz += &trace.hprev.t().dot(&dz_pre);
    grads.bz += &dz_pre.sum_axis(Axis(0)).insert_axis(Axis(0));
    grads.wr += &inputs.t().dot(&dr_pre);
    grads.ur += &trace.hprev.t().dot(&dr_pre);
    grads.br += &dr_pre.sum_axis(Axis(0)).insert_axis(Axis(0));
    grads.wn += &inputs.t().dot(&dn_pre);
    grads.un += &trace.hprev.t().dot(&(&dn_pre * &trace.r));
    grads.bn += &dn_pre.sum_axis(Axis(0)).insert_axis(Axis(0));

    *d_inputs += &dz_pre.dot(&block.wz.t());
    *d_inputs += &dr_pre.dot(&block.wr.t());
    *d_inputs += &dn_pre.dot(&block.wn.t());
}

impl TaggerModel {
    fn embed(&self, rows: &[FeatureRow]) -> Array2<f64> {
        let config = &self.config;
        let mut x = Array2::zeros((rows.len(), config.input_dim()));
        for (t, row) in rows.iter().enumerate() {
            debug_assert!(row.word_id < self.params.emb_word.nrows());
            let mut offset = 0;
            x.slice_mut(s![t, offset..offset + config.word_dim])
                .assign(&self.params.emb_word.row(row.word_id));
            offset += config.word_dim;
            x.slice_mut(s![t, offset..offset + config.shape_dim])
                .assign(&self.params.emb_shape.row(row.shape.index()));
            offset += config.shape_dim;
            x.slice_mut(s![t, offset..offset + config.position_dim])
                .assign(&self.params.emb_position.row(row.position.index()));
            offset += config.position_dim;
            if config.use_char_features && !row.char_ids.is_empty() {
                let mut pooled = Array1::<f64>::zeros(config.char_dim);
                for &cid in &row.char_ids {
                    pooled += &self.params.emb_char.row(cid);
                }
                pooled /= row.char_ids.len() as f64;
                x.slice_mut(s![t, offset..offset + config.char_dim]).assign(&pooled);
            }
        }
        x
    }

    fn encoder_forward(
        &self,
        x: Array2<f64>,
        masks: Option<&DropoutMasks>,
    ) -> (Vec<Array2<f64>>, Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let config = &self.config;
        let mut wins = Vec::with_capacity(config.conv_layers);
        let mut pres = Vec::with_capacity(config.conv_layers);
        let mut outs = Vec::with_capacity(config.conv_layers);
        let mut input = x;
        for (layer, (w, b)) in self.params.conv.iter().enumerate() {
            let win = build_windows(&input, config.encoder_filter_size);
            let mut pre = win.dot(w);
            pre += b;
            let mut out = pre.mapv(relu);
            if layer + 1 < config.conv_layers {
                if let Some(m) = masks {
                    out *= &m.conv[layer];
                }
            }
            wins.push(win);
            pres.push(pre);
            outs.push(out.clone());
            input = out;
        }
        (wins, pres, outs)
    }

    pub(crate) fn forward(
        &self,
        rows: &[FeatureRow],
        prev_ids: &[usize],
        masks: Option<&DropoutMasks>,
    ) -> Trace {
        debug_assert_eq!(rows.len(), prev_ids.len());
        let config = &self.config;
        let len = rows.len();

        let mut x = self.embed(rows);
        if let Some(m) = masks {
            x *= &m.emb;
        }
        let (conv_wins, conv_pre, conv_out) = self.encoder_forward(x, masks);
        let enc = conv_out.last().expect("at least one convolution layer");

        let order_fwd: Vec<usize> = (0..len).collect();
        let order_bwd: Vec<usize> = (0..len).rev().collect();
        let fwd = run_gru(&self.params.gru_fwd, enc, &order_fwd);
        let bwd = run_gru(&self.params.gru_bwd, enc, &order_bwd);

        let g = config.gru_hidden;
        let mut full = Array2::zeros((len, 2 * g + config.label_dim));
        for t in 0..len {
            debug_assert!(prev_ids[t] < self.params.emb_label.nrows());
            full.slice_mut(s![t, 0..g]).assign(&fwd.h.row(t));
            full.slice_mut(s![t, g..2 * g]).assign(&bwd.h.row(t));
            full.slice_mut(s![t, 2 * g..]).assign(&self.params.emb_label.row(prev_ids[t]));
        }
        let mut logits = full.dot(&self.params.out_w);
        logits += &self.params.out_b;
        let logp = log_softmax_rows(&logits);

        Trace {
            conv_wins,
            conv_pre,
            conv_out,
            fwd,
            bwd,
            full,
            prev_ids: prev_ids.to_vec(),
            logp,
        }
    }

    fn backward(
        &self,
        trace: &Trace,
        rows: &[FeatureRow],
        gold: &[usize],
        masks: Option<&DropoutMasks>,
    ) -> Gradients {
        let config = &self.config;
        let len = rows.len();
        let g = config.gru_hidden;
        let mut grads = Gradients::zeros_like(self);

        // Negative log-likelihood through the softmax: p - onehot(gold).
        let mut dlogits = trace.logp.mapv(f64::exp);
        for (t, &y) in gold.iter().enumerate() {
            dlogits[[t, y]] -= 1.0;
        }

        grads.0.out_w += &trace.full.t().dot(&dlogits);
        grads.0.out_b += &dlogits.sum_axis(Axis(0)).insert_axis(Axis(0));
        let d_full = dlogits.dot(&self.params.out_w.t());

        let d_hf = d_full.slice(s![.., 0..g]).to_owned();
        let d_hb = d_full.slice(s![.., g..2 * g]).to_owned();
        for t in 0..len {
            let mut row = grads.0.emb_label.row_mut(trace.prev_ids[t]);
            row += &d_full.slice(s![t, 2 * g..]);
        }

        let enc = trace.conv_out.last().expect("at least one convolution layer");
        let order_fwd: Vec<usize> = (0..len).collect();
        let order_bwd: Vec<usize> = (0..len).rev().collect();
        let mut d_enc = Array2::<f64>::zeros(enc.raw_dim());
        backward_gru(&self.params.gru_fwd, &trace.fwd, enc, &d_hf, &order_fwd, &mut d_enc, &mut grads.0.gru_fwd);
        backward_gru(&self.params.gru_bwd, &trace.bwd, enc, &d_hb, &order_bwd, &mut d_enc, &mut grads.0.gru_bwd);

        // Convolution stack, last layer first.
        let mut d_out = d_enc;
        for layer in (0..config.conv_layers).rev() {
            let mut d_act = d_out;
            if layer + 1 < config.conv_layers {
                if let Some(m) = masks {
                    d_act *= &m.conv[layer];
                }
            }
            let d_pre = &d_act * &trace.conv_pre[layer].mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            let (w, _) = &self.params.conv[layer];
            let (gw, gb) = &mut grads.0.conv[layer];
            *gw += &trace.conv_wins[layer].t().dot(&d_pre);
            *gb += &d_pre.sum_axis(Axis(0)).insert_axis(Axis(0));
            let d_win = d_pre.dot(&w.t());
            let input_dim = if layer == 0 { config.input_dim() } else { config.encoder_output_size };
            d_out = scatter_windows(&d_win, config.encoder_filter_size, input_dim);
        }

        // Embedding lookups.
        let mut d_x = d_out;
        if let Some(m) = masks {
            d_x *= &m.emb;
        }
        for (t, row) in rows.iter().enumerate() {
            let mut offset = 0;
            {
                let mut dst = grads.0.emb_word.row_mut(row.word_id);
                dst += &d_x.slice(s![t, offset..offset + config.word_dim]);
            }
            offset += config.word_dim;
            {
                let mut dst = grads.0.emb_shape.row_mut(row.shape.index());
                dst += &d_x.slice(s![t, offset..offset + config.shape_dim]);
            }
            offset += config.shape_dim;
            {
                let mut dst = grads.0.emb_position.row_mut(row.position.index());
                dst += &d_x.slice(s![t, offset..offset + config.position_dim]);
            }
            offset += config.position_dim;
            if config.use_char_features && !row.char_ids.is_empty() {
                let share = 1.0 / row.char_ids.len() as f64;
                let seg = d_x.slice(s![t, offset..offset + config.char_dim]);
                for &cid in &row.char_ids {
                    let mut dst = grads.0.emb_char.row_mut(cid);
                    dst.zip_mut_with(&seg, |d, &s| *d += s * share);
                }
            }
        }

        grads
    }

    pub(crate) fn check_labels(&self, rows: &[FeatureRow], labels: &[usize]) -> Result<(), TaggerError> {
        if rows.len() != labels.len() {
            return Err(TaggerError::LengthMismatch { expected: rows.len(), got: labels.len() });
        }
        let alphabet = self.config.alphabet_size();
        for &id in labels {
            if id >= alphabet {
                return Err(TaggerError::LabelOutOfRange { id, alphabet });
            }
        }
        Ok(())
    }

    /// Previous-label ids under teacher forcing: the start label, then the
    /// gold labels shifted one position right.
    pub(crate) fn teacher_prev_ids(&self, gold: &[usize]) -> Vec<usize> {
        let mut prev = Vec::with_capacity(gold.len());
        let mut last = self.config.start_label();
        for &y in gold {
            prev.push(last);
            last = y;
        }
        prev
    }

    /// Runs the convolutional encoder alone (no dropout) and returns the
    /// `[T, encoder_output_size]` feature matrix.
    pub fn encode_cnn(&self, rows: &[FeatureRow]) -> Array2<f64> {
        let x = self.embed(rows);
        let (_, _, outs) = self.encoder_forward(x, None);
        outs.into_iter().last().expect("at least one convolution layer")
    }

    /// Both GRU directions' states side by side: `[T, 2·gru_hidden]`. The
    /// recurrences never see label choices, so search can compute this once
    /// per sentence and vary only the previous-label conditioning.
    pub(crate) fn decoder_hidden(&self, encoded: &Array2<f64>) -> Array2<f64> {
        let len = encoded.nrows();
        let g = self.config.gru_hidden;
        let order_fwd: Vec<usize> = (0..len).collect();
        let order_bwd: Vec<usize> = (0..len).rev().collect();
        let fwd = run_gru(&self.params.gru_fwd, encoded, &order_fwd);
        let bwd = run_gru(&self.params.gru_bwd, encoded, &order_bwd);
        let mut hidden = Array2::zeros((len, 2 * g));
        for t in 0..len {
            hidden.slice_mut(s![t, 0..g]).assign(&fwd.h.row(t));
            hidden.slice_mut(s![t, g..2 * g]).assign(&bwd.h.row(t));
        }
        hidden
    }

    /// Runs the BiGRU decoder and output layer over precomputed encoder
    /// features, conditioning position `t` on `prev_label_ids[t]`, and
    /// returns log-probabilities (each row sums to one in probability
    /// space).
    pub fn decode_scores(&self, encoded: &Array2<f64>, prev_label_ids: &[usize]) -> Array2<f64> {
        assert_eq!(encoded.nrows(), prev_label_ids.len(), "one previous label per position");
        assert_eq!(encoded.ncols(), self.config.encoder_output_size, "encoder feature width");
        let len = encoded.nrows();
        let g = self.config.gru_hidden;

        let order_fwd: Vec<usize> = (0..len).collect();
        let order_bwd: Vec<usize> = (0..len).rev().collect();
        let fwd = run_gru(&self.params.gru_fwd, encoded, &order_fwd);
        let bwd = run_gru(&self.params.gru_bwd, encoded, &order_bwd);

        let mut full = Array2::zeros((len, 2 * g + self.config.label_dim));
        for t in 0..len {
            assert!(prev_label_ids[t] < self.params.emb_label.nrows(), "previous label id in range");
            full.slice_mut(s![t, 0..g]).assign(&fwd.h.row(t));
            full.slice_mut(s![t, g..2 * g]).assign(&bwd.h.row(t));
            full.slice_mut(s![t, 2 * g..]).assign(&self.params.emb_label.row(prev_label_ids[t]));
        }
        let mut logits = full.dot(&self.params.out_w);
        logits += &self.params.out_b;
        log_softmax_rows(&logits)
    }

    pub(crate) fn loss_with_masks(
        &self,
        rows: &[FeatureRow],
        gold: &[usize],
        masks: Option<&DropoutMasks>,
    ) -> Result<f64, TaggerError> {
        self.check_labels(rows, gold)?;
        let trace = self.forward(rows, &self.teacher_prev_ids(gold), masks);
        Ok(nll(&trace.logp, gold))
    }

    pub(crate) fn grad_with_masks(
        &self,
        rows: &[FeatureRow],
        gold: &[usize],
        masks: Option<&DropoutMasks>,
    ) -> Result<(f64, Gradients), TaggerError> {
        self.check_labels(rows, gold)?;
        let trace = self.forward(rows, &self.teacher_prev_ids(gold), masks);
        let loss = nll(&trace.logp, gold);
        let grads = self.backward(&trace, rows, gold, masks);
        Ok((loss, grads))
    }

    /// Teacher-forced negative log-likelihood of a gold label sequence.
    pub fn loss(&self, rows: &[FeatureRow], gold: &[usize]) -> Result<f64, TaggerError> {
        self.loss_with_masks(rows, gold, None)
    }

    /// Loss plus exact gradients for every parameter tensor.
    pub fn grad(&self, rows: &[FeatureRow], gold: &[usize]) -> Result<(f64, Gradients), TaggerError> {
        self.grad_with_masks(rows, gold, None)
    }

    /// Total log-probability the model assigns to a complete tag sequence
    /// (the quantity beam search maximizes, and the ensemble sums).
    pub fn score_sequence(&self, rows: &[FeatureRow], tags: &TagSequence) -> Result<f64, TaggerError> {
        if tags.scheme != self.config.scheme {
            return Err(TaggerError::SchemeMismatch {
                expected: self.config.scheme.name(),
                got: tags.scheme.name(),
            });
        }
        let ids = tags.indices()?;
        self.check_labels(rows, &ids)?;
        let trace = self.forward(rows, &self.teacher_prev_ids(&ids), None);
        Ok(-nll(&trace.logp, &ids))
    }
}

fn nll(logp: &Array2<f64>, gold: &[usize]) -> f64 {
    gold.iter().enumerate().map(|(t, &y)| -logp[[t, y]]).sum()
}
