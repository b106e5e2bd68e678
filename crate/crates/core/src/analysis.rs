//! Per-token diagnostics: log-probability gains of one model over another,
//! the predicted language of the next tag, and trigger-tag frequencies.
//!
//! Every utterance is scored on its own from a zero state.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{BilingualTag, Lang, TaggedUtterance, Vocab, EOS};
use crate::error::{Error, Result};
use crate::model::{Checkpoint, SequenceScores};
use crate::synthgen::trigger_profile;

/// One target position of one utterance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TokenDiagnostic {
    pub utterance: usize,
    pub position: usize,
    /// Input token `w_t`.
    pub token: String,
    /// Predicted token `w_{t+1}` (EOS after the last word).
    pub target: String,
    pub logp_a: f64,
    pub logp_b: f64,
    /// `logp_a − logp_b`; positive when model A is better.
    pub delta: f64,
    /// P(next tag is zh) under model A's POS head, if it has one.
    pub p_next_zh: Option<f64>,
    /// The target starts a new language segment.
    pub is_switch_point: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NextLang {
    pub utterance: usize,
    pub position: usize,
    pub token: String,
    pub p_zh: f64,
    pub p_en: f64,
    /// Mass on EOS, UNK and anything without a language suffix.
    pub p_other: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TriggerRow {
    #[serde(rename = "POS Tag")]
    pub tag: String,
    #[serde(rename = "Freq")]
    pub count: usize,
    pub relative: f64,
}

fn encode(u: &TaggedUtterance, ck: &Checkpoint) -> (Vec<usize>, Vec<usize>) {
    let words = u.words.iter().map(|w| ck.word_vocab.encode(w)).collect();
    let tags = u.tags.iter().map(|t| ck.tag_vocab.encode(&t.to_string())).collect();
    (words, tags)
}

fn score(u: &TaggedUtterance, ck: &Checkpoint) -> Result<SequenceScores> {
    let (w, t) = encode(u, ck);
    ck.model.score_sequence(&w, &t)
}

/// Language of every tag id; `None` for specials and unsuffixed tags.
pub fn tag_languages(tags: &Vocab) -> Vec<Option<Lang>> {
    tags.tokens()
        .iter()
        .map(|s| s.parse::<BilingualTag>().ok().map(|t| t.lang))
        .collect()
}

fn lang_mass(probs: &[f64], langs: &[Option<Lang>]) -> (f64, f64, f64) {
    let (mut zh, mut en, mut other) = (0.0, 0.0, 0.0);
    for (p, l) in probs.iter().zip(langs) {
        match l {
            Some(Lang::Zh) => zh += p,
            Some(Lang::En) => en += p,
            None => other += p,
        }
    }
    (zh, en, other)
}

fn target_of(u: &TaggedUtterance, t: usize) -> String {
    u.words.get(t + 1).cloned().unwrap_or_else(|| EOS.to_string())
}

fn is_switch(u: &TaggedUtterance, t: usize) -> bool {
    t + 1 < u.len() && u.tags[t].lang != u.tags[t + 1].lang
}

/// Teacher-forced comparison of model A against model B.
pub fn compare_models(a: &Checkpoint, b: &Checkpoint, corpus: &[TaggedUtterance]) -> Result<Vec<TokenDiagnostic>> {
    if a.word_vocab != b.word_vocab {
        return Err(Error::Incompatible(format!(
            "word vocabularies differ ({} vs {} entries)",
            a.word_vocab.len(),
            b.word_vocab.len()
        )));
    }
    let langs = tag_languages(&a.tag_vocab);
    let per_utt: Vec<Vec<TokenDiagnostic>> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            let sa = score(u, a)?;
            let sb = score(u, b)?;
            Ok((0..u.len())
                .map(|t| TokenDiagnostic {
                    utterance: i,
                    position: t,
                    token: u.words[t].clone(),
                    target: target_of(u, t),
                    logp_a: sa.word_logp[t],
                    logp_b: sb.word_logp[t],
                    delta: sa.word_logp[t] - sb.word_logp[t],
                    p_next_zh: sa.pos_probs.as_ref().map(|p| lang_mass(&p[t], &langs).0),
                    is_switch_point: is_switch(u, t),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_utt.into_iter().flatten().collect())
}

/// Probability mass the POS head puts on zh tags at every position.
pub fn next_lang_probability(ck: &Checkpoint, corpus: &[TaggedUtterance]) -> Result<Vec<NextLang>> {
    if !ck.model.config.mode.has_pos_tower() {
        return Err(Error::UnsupportedMode(format!(
            "{} checkpoints have no POS head",
            ck.model.config.mode
        )));
    }
    let langs = tag_languages(&ck.tag_vocab);
    let per_utt: Vec<Vec<NextLang>> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            let s = score(u, ck)?;
            let probs = s.pos_probs.expect("multitask model has a POS head");
            Ok(probs
                .iter()
                .enumerate()
                .map(|(t, p)| {
                    let (zh, en, other) = lang_mass(p, &langs);
                    NextLang {
                        utterance: i,
                        position: t,
                        token: u.words[t].clone(),
                        p_zh: zh,
                        p_en: en,
                        p_other: other,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_utt.into_iter().flatten().collect())
}

/// Trigger tags with their share of all switch points.
pub fn trigger_table(corpus: &[TaggedUtterance]) -> Vec<TriggerRow> {
    let profile = trigger_profile(corpus);
    let total: usize = profile.iter().map(|(_, n)| n).sum();
    profile
        .into_iter()
        .map(|(tag, count)| TriggerRow {
            tag: tag.to_string(),
            count,
            relative: count as f64 / total as f64,
        })
        .collect()
}

/// Mean delta at switch-point targets and at all other targets.
pub fn switch_summary(diags: &[TokenDiagnostic]) -> (f64, f64) {
    let mean = |switch: bool| {
        let (s, n) = diags
            .iter()
            .filter(|d| d.is_switch_point == switch)
            .fold((0.0, 0usize), |(s, n), d| (s + d.delta, n + 1));
        if n == 0 {
            f64::NAN
        } else {
            s / n as f64
        }
    };
    (mean(true), mean(false))
}

/// Keeps the `k` utterances with the largest `|delta|` anywhere in them.
pub fn top_k_utterances(diags: &[TokenDiagnostic], k: usize) -> Vec<TokenDiagnostic> {
    let mut peak: Vec<(usize, f64)> = Vec::new();
    for d in diags {
        match peak.last_mut() {
            Some((u, m)) if *u == d.utterance => *m = m.max(d.delta.abs()),
            _ => peak.push((d.utterance, d.delta.abs())),
        }
    }
    peak.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let keep: Vec<usize> = peak.iter().take(k).map(|p| p.0).collect();
    diags.iter().filter(|d| keep.contains(&d.utterance)).cloned().collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
