//! Training loop, learning-rate schedule, perplexity and the sweep harness.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::corpus::BatchPlan;
use crate::error::{Error, Result};
use crate::model::{combine_losses, ModelConfig, ModelMode, MultiTaskLm, StepLosses};
use crate::nn::{Mode, SgdOptimizer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr0: f64,
    /// Factor applied to the learning rate after a non-improving dev epoch.
    pub decay: f64,
    pub clip: f64,
    pub batch: usize,
    pub unroll: usize,
    pub max_epochs: usize,
    /// Seed for dropout masks.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 20.0,
            decay: 0.75,
            clip: 0.25,
            batch: 20,
            unroll: 35,
            max_epochs: 40,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.lr0 > 0.0) {
            problems.push(format!("lr0 must be positive, got {}", self.lr0));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            problems.push(format!("decay must lie in (0, 1), got {}", self.decay));
        }
        if !(self.clip > 0.0) {
            problems.push(format!("clip must be positive, got {}", self.clip));
        }
        for (name, v) in [("batch", self.batch), ("unroll", self.unroll), ("max_epochs", self.max_epochs)] {
            if v == 0 {
                problems.push(format!("{name} must be at least 1"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

/// Decays the learning rate whenever a dev evaluation fails to beat the best so far.
#[derive(Clone, Debug, PartialEq)]
pub struct LrSchedule {
    lr0: f64,
    decay: f64,
    best: Option<f64>,
    misses: u32,
}

impl LrSchedule {
    pub fn new(lr0: f64, decay: f64) -> Self {
        Self {
            lr0,
            decay,
            best: None,
            misses: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr0 * self.decay.powi(self.misses as i32)
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn misses(&self) -> u32 {
        self.misses
    }

    /// Records a dev perplexity; returns whether it improved strictly.
    pub fn observe(&mut self, dev_ppl: f64) -> bool {
        match self.best {
            Some(b) if !(dev_ppl < b) => {
                self.misses += 1;
                false
            }
            _ => {
                self.best = Some(dev_ppl);
                true
            }
        }
    }
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    /// Learning rate used during the epoch.
    pub lr: f64,
    pub train_loss_lm: f64,
    pub train_loss_pt: Option<f64>,
    pub train_loss_total: f64,
    pub dev_ppl_lm: f64,
    pub dev_ppl_total: f64,
    pub improved: bool,
    pub wall_secs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perplexity {
    pub ppl_lm: f64,
    pub ppl_total: f64,
    pub loss_lm: f64,
    pub loss_pt: Option<f64>,
    pub tokens: usize,
}

/// Eval-mode perplexity over every window of `plan`, carrying state.
pub fn perplexity(model: &MultiTaskLm, plan: &BatchPlan) -> Result<Perplexity> {
    let mut state = model.zero_state(plan.batch);
    let (mut lm, mut pt) = (0.0, 0.0);
    let mut tokens = 0;
    for window in plan.windows() {
        let (l, p, next) = model.evaluate_window(&window, &state)?;
        lm += l;
        pt += p.unwrap_or(0.0);
        tokens += window.tokens();
        state = next;
    }
    let loss_lm = lm / tokens as f64;
    let loss_pt = model.config.mode.has_pos_tower().then(|| pt / tokens as f64);
    Ok(Perplexity {
        ppl_lm: loss_lm.exp(),
        ppl_total: combine_losses(loss_lm, loss_pt, model.config.loss_weight).exp(),
        loss_lm,
        loss_pt,
        tokens,
    })
}

pub struct TrainOutcome {
    /// Model with the parameters of the best dev epoch.
    pub best: MultiTaskLm,
    pub best_epoch: usize,
    pub best_dev: Perplexity,
    pub metrics: Vec<MetricsRecord>,
    /// Global gradient norm after clipping, one entry per step.
    pub grad_norms: Vec<f64>,
}

/// One SGD step on one window; returns the losses and the post-clip norm.
pub fn train_step(
    model: &mut MultiTaskLm,
    window: &crate::corpus::Window,
    state: &mut crate::model::ModelState,
    optimizer: &SgdOptimizer,
    rng: &mut ChaCha8Rng,
) -> Result<(StepLosses, f64)> {
    let mut tape = Tape::new();
    let out = model.forward(&mut tape, window, state, Mode::Train, rng)?;
    let losses = model.compute_losses(&mut tape, &out, window)?;
    let values = losses.values;
    if !values.loss_total.is_finite() {
        return Ok((values, f64::NAN));
    }
    tape.backward(losses.total)?;
    model.params.zero_grad();
    model.params.accumulate_grads(&tape);
    let norm = optimizer.step(&mut model.params);
    *state = out.state;
    Ok((values, norm))
}

/// Runs the full recipe and keeps the best-dev parameters.
///
/// `on_epoch` sees every metrics record as soon as it is produced.
pub fn train(
    model: &mut MultiTaskLm,
    train_plan: &BatchPlan,
    dev_plan: &BatchPlan,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&MetricsRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut schedule = LrSchedule::new(cfg.lr0, cfg.decay);
    let mut metrics = Vec::with_capacity(cfg.max_epochs);
    let mut grad_norms = Vec::new();
    let mut best: Option<(usize, Perplexity, MultiTaskLm)> = None;

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let lr = schedule.lr();
        let optimizer = SgdOptimizer::new(lr, cfg.clip);
        let mut state = model.zero_state(train_plan.batch);
        let (mut lm, mut pt, mut tokens) = (0.0, 0.0, 0usize);
        for (k, window) in train_plan.windows().enumerate() {
            let (losses, norm) = train_step(model, &window, &mut state, &optimizer, &mut rng)?;
            if !losses.loss_total.is_finite() {
                return Err(Error::NonFinite { epoch, window: k, lr });
            }
            grad_norms.push(norm);
            let n = window.tokens();
            lm += losses.loss_lm * n as f64;
            pt += losses.loss_pt.unwrap_or(0.0) * n as f64;
            tokens += n;
        }
        let train_lm = lm / tokens as f64;
        let train_pt = model.config.mode.has_pos_tower().then(|| pt / tokens as f64);
        let dev = perplexity(model, dev_plan)?;
        let improved = schedule.observe(dev.ppl_lm);
        if improved {
            best = Some((epoch, dev, model.clone()));
        }
        let record = MetricsRecord {
            epoch,
            lr,
            train_loss_lm: train_lm,
            train_loss_pt: train_pt,
            train_loss_total: combine_losses(train_lm, train_pt, model.config.loss_weight),
            dev_ppl_lm: dev.ppl_lm,
            dev_ppl_total: dev.ppl_total,
            improved,
            wall_secs: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch} lr {lr:.4} train_lm {train_lm:.4} dev_ppl_lm {:.3}{}",
            dev.ppl_lm,
            if improved { " *" } else { "" }
        );
        on_epoch(&record);
        metrics.push(record);
    }
    let (best_epoch, best_dev, best) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        best,
        best_epoch,
        best_dev,
        metrics,
        grad_norms,
    })
}

pub fn write_metrics(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for r in records {
        writeln!(f, "{}", serde_json::to_string(r)?).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Hyperparameter grid; every combination becomes one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub hidden: Vec<usize>,
    pub loss_weight: Vec<f64>,
    pub modes: Vec<ModelMode>,
    pub dropout: Vec<f64>,
    pub pos_dropout: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            hidden: vec![200, 500],
            loss_weight: vec![0.25, 0.5, 0.75],
            modes: vec![ModelMode::Multitask],
            dropout: vec![0.2],
            pos_dropout: vec![0.2],
            seeds: vec![1],
        }
    }
}

impl SweepGrid {
    /// Expands the grid; `p` and POS dropout only vary for multitask cells.
    pub fn cells(&self, base: &ModelConfig) -> Vec<ModelConfig> {
        let mut out = Vec::new();
        for &mode in &self.modes {
            let multi = mode.has_pos_tower();
            let ps: Vec<f64> = if multi { self.loss_weight.clone() } else { vec![1.0] };
            let pos_drops: Vec<f64> = if mode.uses_tags() {
                self.pos_dropout.clone()
            } else {
                vec![base.dropout_pos]
            };
            for &hidden in &self.hidden {
                for &p in &ps {
                    for &dropout_word in &self.dropout {
                        for &dropout_pos in &pos_drops {
                            for &init_seed in &self.seeds {
                                out.push(ModelConfig {
                                    hidden,
                                    dropout_word,
                                    dropout_pos,
                                    loss_weight: p,
                                    mode,
                                    init_seed,
                                    ..base.clone()
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// One row of the sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "Hidden size")]
    pub hidden: usize,
    /// Empty for modes without a POS loss.
    pub p: Option<f64>,
    #[serde(rename = "PPL Dev")]
    pub ppl_dev: Option<f64>,
    #[serde(rename = "PPL Test")]
    pub ppl_test: Option<f64>,
    pub mode: ModelMode,
    pub seed: u64,
    pub dropout: f64,
    pub pos_dropout: f64,
    pub best_epoch: Option<usize>,
    pub error: Option<String>,
}

pub struct SweepData<'a> {
    pub word_vocab: usize,
    pub tag_vocab: usize,
    pub train: &'a BatchPlan,
    pub dev: &'a BatchPlan,
    pub test: &'a BatchPlan,
}

/// Trains every cell independently (in parallel) and tabulates dev/test ppl_lm.
pub fn sweep(cells: &[ModelConfig], train_cfg: &TrainConfig, data: &SweepData<'_>) -> Vec<SweepRow> {
    cells
        .par_iter()
        .map(|cfg| {
            let run = || -> Result<(usize, f64, f64)> {
                let mut model = MultiTaskLm::new(cfg.clone(), data.word_vocab, data.tag_vocab)?;
                let tc = TrainConfig {
                    seed: cfg.init_seed,
                    ..train_cfg.clone()
                };
                let out = train(&mut model, data.train, data.dev, &tc, |_| {})?;
                let test = perplexity(&out.best, data.test)?;
                Ok((out.best_epoch, out.best_dev.ppl_lm, test.ppl_lm))
            };
            let mut row = SweepRow {
                hidden: cfg.hidden,
                p: cfg.mode.has_pos_tower().then_some(cfg.loss_weight),
                ppl_dev: None,
                ppl_test: None,
                mode: cfg.mode,
                seed: cfg.init_seed,
                dropout: cfg.dropout_word,
                pos_dropout: cfg.dropout_pos,
                best_epoch: None,
                error: None,
            };
            match run() {
                Ok((epoch, dev, test)) => {
                    row.best_epoch = Some(epoch);
                    row.ppl_dev = Some(dev);
                    row.ppl_test = Some(test);
                }
                Err(e) => {
                    log::warn!("sweep cell {} h={} failed: {e}", cfg.mode, cfg.hidden);
                    row.error = Some(e.to_string());
                }
            }
            row
        })
        .collect()
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
