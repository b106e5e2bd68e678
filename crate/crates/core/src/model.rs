//! The multi-task language model.
//!
//! Per time step `t`, with `x_w = E_w[w_t]` and `x_p = E_p[p_t]`:
//!
//! ```text
//! u_t = LSTM_lm(x_w ⊕ x_p, u_{t-1})
//! v_t = LSTM_pt(x_p, v_{t-1})
//! z_t = u_t + v_t
//! P(w_{t+1}) = softmax(z_t · E_wᵀ + b_w)
//! P(p_{t+1}) = softmax(v_t · E_pᵀ + b_p)
//! L_total    = p·L_lm + (1 − p)·L_pt
//! ```
//!
//! With `stop_gradient` set, the copies of `x_p` and `v_t` read by the LM
//! path are detached, so the POS tower only learns from its own loss.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{softmax, Tape, Var};
use crate::corpus::{Vocab, Window, EOS_ID};
use crate::error::{Error, Result};
use crate::nn::{self, DropoutMask, Embedding, LstmStack, LstmState, Mode, Params, TiedProjection};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMode {
    /// Both towers, hidden-state sum and joint loss.
    Multitask,
    /// Word LM over `x_w ⊕ x_p`, no POS tower or loss.
    LmPlusSyntactic,
    /// Word LM over `x_w` only.
    LmOnly,
}

impl ModelMode {
    pub const ALL: [ModelMode; 3] = [ModelMode::Multitask, ModelMode::LmPlusSyntactic, ModelMode::LmOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelMode::Multitask => "multitask",
            ModelMode::LmPlusSyntactic => "lm_plus_syntactic",
            ModelMode::LmOnly => "lm_only",
        }
    }

    pub fn uses_tags(self) -> bool {
        self != ModelMode::LmOnly
    }

    pub fn has_pos_tower(self) -> bool {
        self == ModelMode::Multitask
    }
}

impl fmt::Display for ModelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "multitask" => Ok(ModelMode::Multitask),
            "lm_plus_syntactic" => Ok(ModelMode::LmPlusSyntactic),
            "lm_only" => Ok(ModelMode::LmOnly),
            _ => Err(format!(
                "unknown mode {s:?} (expected multitask, lm_plus_syntactic or lm_only)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// LSTM hidden size; also the embedding size, which tying requires.
    pub hidden: usize,
    pub layers: usize,
    pub dropout_word: f64,
    pub dropout_pos: f64,
    /// Weight `p` of the LM loss in `p·L_lm + (1 − p)·L_pt`.
    pub loss_weight: f64,
    pub stop_gradient: bool,
    /// Tie the POS head to the POS embedding table.
    pub tie_pos_head: bool,
    pub mode: ModelMode,
    /// Seed for parameter initialization.
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 200,
            layers: 2,
            dropout_word: 0.2,
            dropout_pos: 0.2,
            loss_weight: 0.25,
            stop_gradient: true,
            tie_pos_head: true,
            mode: ModelMode::Multitask,
            init_seed: 1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.hidden == 0 {
            problems.push("hidden must be positive".to_string());
        }
        if self.layers == 0 {
            problems.push("layers must be positive".to_string());
        }
        for (name, v) in [("dropout_word", self.dropout_word), ("dropout_pos", self.dropout_pos)] {
            if !(0.0..1.0).contains(&v) {
                problems.push(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        if !(self.loss_weight > 0.0 && self.loss_weight <= 1.0) {
            problems.push(format!("loss_weight must lie in (0, 1], got {}", self.loss_weight));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

/// Mean per-token losses of one window or one corpus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub loss_lm: f64,
    pub loss_pt: Option<f64>,
    pub loss_total: f64,
}

/// `p·L_lm + (1 − p)·L_pt`; without a POS loss the total is `L_lm`.
pub fn combine_losses(loss_lm: f64, loss_pt: Option<f64>, p: f64) -> f64 {
    match loss_pt {
        Some(pt) => p * loss_lm + (1.0 - p) * pt,
        None => loss_lm,
    }
}

/// Recurrent state carried between windows.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub lm: LstmState,
    pub pt: Option<LstmState>,
}

pub struct ForwardOutput {
    /// `[T·B × V_w]`, time-major rows.
    pub word_logits: Var,
    /// `[T·B × V_p]`, present in multitask mode.
    pub pos_logits: Option<Var>,
    /// Final states, detached from the tape.
    pub state: ModelState,
}

/// Loss nodes on the tape plus their values.
pub struct LossVars {
    pub lm: Var,
    pub pt: Option<Var>,
    pub total: Var,
    pub values: StepLosses,
    /// Per-target cross-entropies, time-major.
    pub lm_per_token: Vec<f64>,
    pub pt_per_token: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct MultiTaskLm {
    pub config: ModelConfig,
    pub word_vocab: usize,
    pub tag_vocab: usize,
    pub params: Params,
    pub word_emb: Embedding,
    pub pos_emb: Option<Embedding>,
    pub lstm_lm: LstmStack,
    pub lstm_pt: Option<LstmStack>,
    pub word_head: TiedProjection,
    pub pos_head: Option<TiedProjection>,
}

impl MultiTaskLm {
    pub fn new(config: ModelConfig, word_vocab: usize, tag_vocab: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let h = config.hidden;
        let mut params = Params::new();
        let word_emb = Embedding::new(&mut params, "word_emb", word_vocab, h, &mut rng);
        let pos_emb = config
            .mode
            .uses_tags()
            .then(|| Embedding::new(&mut params, "pos_emb", tag_vocab, h, &mut rng));
        let lm_input = if config.mode.uses_tags() { 2 * h } else { h };
        let lstm_lm = LstmStack::new(
            &mut params,
            "lstm_lm",
            lm_input,
            h,
            config.layers,
            config.dropout_word,
            &mut rng,
        );
        let lstm_pt = config
            .mode
            .has_pos_tower()
            .then(|| LstmStack::new(&mut params, "lstm_pt", h, h, config.layers, config.dropout_pos, &mut rng));
        let word_head = TiedProjection::new(&mut params, "word_head", &word_emb);
        let pos_head = match (&pos_emb, config.mode.has_pos_tower()) {
            (Some(emb), true) if config.tie_pos_head => Some(TiedProjection::new(&mut params, "pos_head", emb)),
            (Some(_), true) => Some(TiedProjection::untied(&mut params, "pos_head", tag_vocab, h, &mut rng)),
            _ => None,
        };
        Ok(Self {
            config,
            word_vocab,
            tag_vocab,
            params,
            word_emb,
            pos_emb,
            lstm_lm,
            lstm_pt,
            word_head,
            pos_head,
        })
    }

    /// Rebuilds a model around previously saved parameter values.
    pub fn with_params(config: ModelConfig, word_vocab: usize, tag_vocab: usize, saved: &Params) -> Result<Self> {
        let mut model = Self::new(config, word_vocab, tag_vocab)?;
        if saved.len() != model.params.len() {
            return Err(Error::Incompatible(format!(
                "expected {} parameter tensors, found {}",
                model.params.len(),
                saved.len()
            )));
        }
        for id in model.params.ids().collect::<Vec<_>>() {
            let name = model.params.name(id).to_string();
            let src = saved
                .id(&name)
                .map(|s| saved.get(s))
                .ok_or_else(|| Error::Incompatible(format!("missing parameter {name}")))?;
            let dst = model.params.get_mut(id);
            if src.shape() != dst.shape() {
                return Err(Error::Incompatible(format!(
                    "{name}: shape {:?} vs {:?}",
                    src.shape(),
                    dst.shape()
                )));
            }
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok(model)
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    pub fn zero_state(&self, batch: usize) -> ModelState {
        let h = self.config.hidden;
        ModelState {
            lm: LstmState::zeros(self.config.layers, batch, h),
            pt: self
                .lstm_pt
                .as_ref()
                .map(|_| LstmState::zeros(self.config.layers, batch, h)),
        }
    }

    /// Parameters that belong to the POS tower (embedding, LSTM, head).
    pub fn pos_tower_params(&self) -> Vec<crate::autodiff::ParamId> {
        let mut ids = Vec::new();
        if self.config.mode.has_pos_tower() {
            if let Some(e) = &self.pos_emb {
                ids.push(e.table);
            }
            for l in &self.lstm_pt.as_ref().unwrap().layers {
                ids.extend([l.w_ih, l.w_hh, l.bias]);
            }
            let head = self.pos_head.as_ref().unwrap();
            ids.extend([head.table, head.bias]);
            ids.sort();
            ids.dedup();
        }
        ids
    }

    /// Runs both towers over one window.
    pub fn forward(
        &self,
        tape: &mut Tape,
        window: &Window,
        state: &ModelState,
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> Result<ForwardOutput> {
        let cfg = &self.config;
        let (batch, steps) = (window.batch, window.steps);
        let d = cfg.hidden;
        let multitask = cfg.mode.has_pos_tower();
        let blocked = multitask && cfg.stop_gradient;

        let xw = self.word_emb.lookup(tape, &self.params, &window.word_inputs)?;
        let xw = DropoutMask::sample(cfg.dropout_word, &[batch * steps, d], mode, rng).apply(tape, xw)?;
        let xp = match &self.pos_emb {
            Some(emb) => {
                let xp = emb.lookup(tape, &self.params, &window.tag_inputs)?;
                Some(DropoutMask::sample(cfg.dropout_pos, &[batch * steps, d], mode, rng).apply(tape, xp)?)
            }
            None => None,
        };

        let lm_in = match xp {
            Some(xp) => {
                let xp_lm = if blocked { tape.detach(xp) } else { xp };
                tape.concat(xw, xp_lm, 1)?
            }
            None => xw,
        };
        let lm_masks = self.lstm_lm.sample_masks(batch, steps, mode, rng);
        let (u, lm_state) = self.lstm_lm.forward(tape, &self.params, lm_in, batch, &state.lm, &lm_masks)?;

        let (z, pos_logits, pt_state) = match (&self.lstm_pt, xp) {
            (Some(stack), Some(xp)) => {
                let pt_prev = state.pt.as_ref().ok_or_else(|| {
                    Error::Incompatible("multitask model given a state without POS tower".into())
                })?;
                let masks = stack.sample_masks(batch, steps, mode, rng);
                let (v, pt_state) = stack.forward(tape, &self.params, xp, batch, pt_prev, &masks)?;
                let v_lm = if blocked { tape.detach(v) } else { v };
                let z = tape.add(u, v_lm)?;
                let head = self.pos_head.as_ref().expect("multitask model has a POS head");
                let pos_logits = head.logits(tape, &self.params, v)?;
                (z, Some(pos_logits), Some(pt_state))
            }
            _ => (u, None, None),
        };
        let word_logits = self.word_head.logits(tape, &self.params, z)?;
        Ok(ForwardOutput {
            word_logits,
            pos_logits,
            state: ModelState {
                lm: lm_state,
                pt: pt_state,
            },
        })
    }

    /// Mean cross-entropies of both heads and their weighted sum.
    pub fn compute_losses(&self, tape: &mut Tape, out: &ForwardOutput, window: &Window) -> Result<LossVars> {
        let n = window.tokens() as f64;
        let ce_lm = tape.softmax_cross_entropy(out.word_logits, &window.word_targets)?;
        let lm_per_token = tape.value(ce_lm).data().to_vec();
        let sum_lm = tape.sum(ce_lm);
        let lm = tape.scale(sum_lm, 1.0 / n);
        let p = self.config.loss_weight;
        let (pt, pt_per_token, total) = match out.pos_logits {
            Some(logits) => {
                let ce_pt = tape.softmax_cross_entropy(logits, &window.tag_targets)?;
                let per = tape.value(ce_pt).data().to_vec();
                let sum_pt = tape.sum(ce_pt);
                let pt = tape.scale(sum_pt, 1.0 / n);
                let a = tape.scale(lm, p);
                let b = tape.scale(pt, 1.0 - p);
                let total = tape.add(a, b)?;
                (Some(pt), Some(per), total)
            }
            None => (None, None, lm),
        };
        let loss_lm = tape.value(lm).item();
        let loss_pt = pt.map(|v| tape.value(v).item());
        Ok(LossVars {
            lm,
            pt,
            total,
            values: StepLosses {
                loss_lm,
                loss_pt,
                loss_total: combine_losses(loss_lm, loss_pt, p),
            },
            lm_per_token,
            pt_per_token,
        })
    }

    /// Eval-mode pass over one window: summed per-token cross-entropies
    /// `(Σ CE_lm, Σ CE_pt)` and the carried state.
    pub fn evaluate_window(&self, window: &Window, state: &ModelState) -> Result<(f64, Option<f64>, ModelState)> {
        let mut tape = Tape::new();
        // Eval mode draws nothing from the generator.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = self.forward(&mut tape, window, state, Mode::Eval, &mut rng)?;
        let losses = self.compute_losses(&mut tape, &out, window)?;
        let lm = losses.lm_per_token.iter().sum();
        let pt = losses.pt_per_token.map(|v| v.iter().sum());
        Ok((lm, pt, out.state))
    }

    /// Teacher-forced scoring of one utterance from a zero state.
    ///
    /// `word_ids`/`tag_ids` are the utterance without EOS; targets are the
    /// next ids with EOS after the last token.
    pub fn score_sequence(&self, word_ids: &[usize], tag_ids: &[usize]) -> Result<SequenceScores> {
        assert_eq!(word_ids.len(), tag_ids.len());
        assert!(!word_ids.is_empty());
        let shift = |ids: &[usize]| ids[1..].iter().copied().chain([EOS_ID]).collect::<Vec<_>>();
        let window = Window {
            batch: 1,
            steps: word_ids.len(),
            word_inputs: word_ids.to_vec(),
            tag_inputs: tag_ids.to_vec(),
            word_targets: shift(word_ids),
            tag_targets: shift(tag_ids),
        };
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = self.forward(&mut tape, &window, &self.zero_state(1), Mode::Eval, &mut rng)?;
        let losses = self.compute_losses(&mut tape, &out, &window)?;
        let pos_probs = out.pos_logits.map(|v| {
            let t = tape.value(v);
            let cols = t.shape()[1];
            t.data().chunks_exact(cols).map(softmax).collect()
        });
        Ok(SequenceScores {
            word_logp: losses.lm_per_token.iter().map(|ce| -ce).collect(),
            tag_logp: losses.pt_per_token.map(|v| v.iter().map(|ce| -ce).collect()),
            pos_probs,
        })
    }
}

/// Per-position teacher-forced outputs for one utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceScores {
    /// `log P(w_{t+1})` for every position (the last target is EOS).
    pub word_logp: Vec<f64>,
    pub tag_logp: Option<Vec<f64>>,
    /// Distribution over the next tag at every position.
    pub pos_probs: Option<Vec<Vec<f64>>>,
}

/// A model together with the vocabularies it was trained on.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: MultiTaskLm,
    pub word_vocab: Vocab,
    pub tag_vocab: Vocab,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    model_config: ModelConfig,
    word_vocab: Vocab,
    tag_vocab: Vocab,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = serde_json::to_value(CheckpointMeta {
            model_config: self.model.config.clone(),
            word_vocab: self.word_vocab.clone(),
            tag_vocab: self.tag_vocab.clone(),
        })?;
        nn::save_checkpoint(path, &self.model.params, meta)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (params, meta) = nn::load_checkpoint(path)?;
        let meta: CheckpointMeta = serde_json::from_value(meta).map_err(|e| Error::Checkpoint {
            path: path.to_path_buf(),
            message: format!("bad manifest metadata: {e}"),
        })?;
        let model = MultiTaskLm::with_params(
            meta.model_config,
            meta.word_vocab.len(),
            meta.tag_vocab.len(),
            &params,
        )?;
        Ok(Self {
            model,
            word_vocab: meta.word_vocab,
            tag_vocab: meta.tag_vocab,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamId;
    use rand::Rng;

    fn micro_config(mode: ModelMode, stop_gradient: bool) -> ModelConfig {
        ModelConfig {
            hidden: 4,
            layers: 2,
            dropout_word: 0.0,
            dropout_pos: 0.0,
            loss_weight: 0.25,
            stop_gradient,
            tie_pos_head: true,
            mode,
            init_seed: 3,
        }
    }

    fn micro_window() -> Window {
        // B = 2, T = 3, V_w = 5, V_p = 3
        Window {
            batch: 2,
            steps: 3,
            word_inputs: vec![2, 3, 4, 2, 3, 0],
            tag_inputs: vec![2, 1, 0, 2, 1, 2],
            word_targets: vec![4, 2, 3, 0, 2, 4],
            tag_targets: vec![0, 2, 1, 2, 2, 0],
        }
    }

    fn randomize(model: &mut MultiTaskLm, seed: u64, scale: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for id in model.params.ids().collect::<Vec<_>>() {
            for v in model.params.get_mut(id).data_mut() {
                *v = rng.gen_range(-scale..scale);
            }
        }
    }

    fn zero(model: &mut MultiTaskLm) {
        for id in model.params.ids().collect::<Vec<_>>() {
            model.params.get_mut(id).data_mut().fill(0.0);
        }
    }

    fn grads_of(model: &MultiTaskLm, which: fn(&LossVars) -> Var) -> Params {
        let mut m = model.clone();
        let w = micro_window();
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = m.forward(&mut tape, &w, &m.zero_state(2), Mode::Eval, &mut rng).unwrap();
        let l = m.compute_losses(&mut tape, &out, &w).unwrap();
        tape.backward(which(&l)).unwrap();
        m.params.zero_grad();
        m.params.accumulate_grads(&tape);
        m.params
    }

    #[test]
    fn zero_model_gives_uniform_predictions() {
        let mut m = MultiTaskLm::new(micro_config(ModelMode::Multitask, true), 5, 3).unwrap();
        zero(&mut m);
        let w = micro_window();
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = m.forward(&mut tape, &w, &m.zero_state(2), Mode::Eval, &mut rng).unwrap();
        assert!(tape.value(out.word_logits).data().iter().all(|&z| z == 0.0));
        let l = m.compute_losses(&mut tape, &out, &w).unwrap();
        assert!((l.values.loss_lm - 5f64.ln()).abs() < 1e-12);
        assert!((l.values.loss_pt.unwrap() - 3f64.ln()).abs() < 1e-12);
        let row = softmax(&tape.value(out.word_logits).data()[..5]);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_weighting_arithmetic() {
        assert_eq!(combine_losses(2.0, Some(4.0), 0.25), 3.5);
        assert_eq!(combine_losses(2.0, Some(4.0), 1.0), 2.0);
        assert_eq!(combine_losses(2.0, None, 0.25), 2.0);
    }

    #[test]
    fn lm_plus_syntactic_ignores_loss_weight() {
        let m = MultiTaskLm::new(micro_config(ModelMode::LmPlusSyntactic, true), 5, 3).unwrap();
        let w = micro_window();
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = m.forward(&mut tape, &w, &m.zero_state(2), Mode::Eval, &mut rng).unwrap();
        let l = m.compute_losses(&mut tape, &out, &w).unwrap();
        assert_eq!(l.values.loss_total, l.values.loss_lm);
        assert!(l.values.loss_pt.is_none());
    }

    #[test]
    fn stop_gradient_blocks_lm_loss_from_pos_tower() {
        let mut m = MultiTaskLm::new(micro_config(ModelMode::Multitask, true), 5, 3).unwrap();
        randomize(&mut m, 5, 0.5);
        let g = grads_of(&m, |l| l.lm);
        for id in m.pos_tower_params() {
            assert!(g.get(id).grad().iter().all(|&x| x == 0.0), "{}", g.name(id));
        }
        // The LM tower itself does receive gradient.
        let lm0 = m.lstm_lm.layers[0].w_ih;
        assert!(g.get(lm0).grad().iter().any(|&x| x != 0.0));
    }

    #[test]
    fn without_stop_gradient_lm_loss_reaches_pos_embedding() {
        let mut m = MultiTaskLm::new(micro_config(ModelMode::Multitask, false), 5, 3).unwrap();
        randomize(&mut m, 5, 0.5);
        let table = m.pos_emb.as_ref().unwrap().table;
        let g = grads_of(&m, |l| l.lm);
        let analytic = g.get(table).grad().to_vec();
        assert!(analytic.iter().any(|&x| x.abs() > 1e-8));

        // Finite difference on the largest component confirms it.
        let k = (0..analytic.len())
            .max_by(|&a, &b| analytic[a].abs().total_cmp(&analytic[b].abs()))
            .unwrap();
        let loss_at = |delta: f64| {
            let mut mm = m.clone();
            mm.params.get_mut(table).data_mut()[k] += delta;
            let w = micro_window();
            let mut tape = Tape::new();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let out = mm.forward(&mut tape, &w, &mm.zero_state(2), Mode::Eval, &mut rng).unwrap();
            mm.compute_losses(&mut tape, &out, &w).unwrap().values.loss_lm
        };
        let numeric = (loss_at(1e-5) - loss_at(-1e-5)) / 2e-5;
        assert!(numeric.abs() > 1e-8);
        assert!((numeric - analytic[k]).abs() / numeric.abs() < 1e-4);
    }

    #[test]
    fn parameter_counts_follow_closed_form() {
        let (vw, vp, h) = (50usize, 7usize, 6usize);
        let count = |mode| {
            let cfg = ModelConfig {
                hidden: h,
                mode,
                ..micro_config(mode, true)
            };
            MultiTaskLm::new(cfg, vw, vp).unwrap().num_parameters()
        };
        let lstm = |input: usize| 4 * h * input + 4 * h * h + 4 * h;
        let lm_only = vw * h + vw + lstm(h) + lstm(h);
        let lm_syn = vw * h + vp * h + vw + lstm(2 * h) + lstm(h);
        let multi = lm_syn + lstm(h) + lstm(h) + vp;
        assert_eq!(count(ModelMode::LmOnly), lm_only);
        assert_eq!(count(ModelMode::LmPlusSyntactic), lm_syn);
        assert_eq!(count(ModelMode::Multitask), multi);
        assert!(lm_only < lm_syn && lm_syn < multi);
    }

    #[test]
    fn untied_pos_head_has_its_own_weight() {
        let cfg = ModelConfig {
            tie_pos_head: false,
            ..micro_config(ModelMode::Multitask, true)
        };
        let m = MultiTaskLm::new(cfg, 5, 3).unwrap();
        assert_ne!(m.pos_head.as_ref().unwrap().table, m.pos_emb.as_ref().unwrap().table);
        let tied = MultiTaskLm::new(micro_config(ModelMode::Multitask, true), 5, 3).unwrap();
        assert_eq!(m.num_parameters(), tied.num_parameters() + 3 * 4);
    }

    #[test]
    fn out_of_range_id_is_an_index_error() {
        let m = MultiTaskLm::new(micro_config(ModelMode::Multitask, true), 5, 3).unwrap();
        let mut w = micro_window();
        w.word_inputs[0] = 5;
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            m.forward(&mut tape, &w, &m.zero_state(2), Mode::Eval, &mut rng),
            Err(Error::Index { .. })
        ));
    }

    #[test]
    fn invalid_config_lists_every_problem() {
        let cfg = ModelConfig {
            hidden: 0,
            loss_weight: 0.0,
            dropout_pos: 1.0,
            ..ModelConfig::default()
        };
        match cfg.validate() {
            Err(Error::InvalidConfig(p)) => assert_eq!(p.len(), 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn chained_windows_match_one_long_window() {
        let mut m = MultiTaskLm::new(micro_config(ModelMode::Multitask, true), 5, 3).unwrap();
        randomize(&mut m, 8, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (batch, steps) = (2, 6);
        let mut ids = |v: usize| (0..batch * (steps + 1)).map(|_| rng.gen_range(0..v)).collect::<Vec<_>>();
        let (ws, ts) = (ids(5), ids(3));
        let window = |from: usize, len: usize| Window {
            batch,
            steps: len,
            word_inputs: ws[from * batch..(from + len) * batch].to_vec(),
            tag_inputs: ts[from * batch..(from + len) * batch].to_vec(),
            word_targets: ws[(from + 1) * batch..(from + len + 1) * batch].to_vec(),
            tag_targets: ts[(from + 1) * batch..(from + len + 1) * batch].to_vec(),
        };
        let (lm_full, pt_full, _) = m.evaluate_window(&window(0, steps), &m.zero_state(batch)).unwrap();
        let (lm_a, pt_a, s) = m.evaluate_window(&window(0, steps / 2), &m.zero_state(batch)).unwrap();
        let (lm_b, pt_b, _) = m.evaluate_window(&window(steps / 2, steps / 2), &s).unwrap();
        assert!((lm_full - (lm_a + lm_b)).abs() < 1e-12);
        assert!((pt_full.unwrap() - (pt_a.unwrap() + pt_b.unwrap())).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut m = MultiTaskLm::new(micro_config(ModelMode::Multitask, true), 5, 3).unwrap();
        randomize(&mut m, 2, 0.3);
        let wv = Vocab::from(vec!["<eos>", "<unk>", "a", "b", "c"].into_iter().map(String::from).collect::<Vec<_>>());
        let tv = Vocab::from(vec!["<eos>", "<unk>", "NN_en"].into_iter().map(String::from).collect::<Vec<_>>());
        let ck = Checkpoint {
            model: m.clone(),
            word_vocab: wv,
            tag_vocab: tv,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.model.params.flat_values(), m.params.flat_values());
        assert_eq!(back.model.config, m.config);
        assert_eq!(back.word_vocab, ck.word_vocab);
        let w = micro_window();
        let a = m.evaluate_window(&w, &m.zero_state(2)).unwrap();
        let b = back.model.evaluate_window(&w, &back.model.zero_state(2)).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        let _ = ParamId(0);
    }
}
