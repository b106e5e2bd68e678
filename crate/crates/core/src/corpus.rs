//! Tagged code-switched text: file loading, vocabularies, contiguous
//! truncated-BPTT batching and switch statistics.
//!
//! A corpus is a pair of parallel UTF-8 files with one utterance per line:
//! the words file holds space-separated tokens and the tags file holds one
//! bilingual tag (`BASE_lang`, lang ∈ {en, zh}) per token.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";
pub const EOS_ID: usize = 0;
pub const UNK_ID: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    En,
    Zh,
}

impl Lang {
    pub fn other(self) -> Self {
        match self {
            Lang::En => Lang::Zh,
            Lang::Zh => Lang::En,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Lang::En => "en",
            Lang::Zh => "zh",
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Lang {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "en" => Ok(Lang::En),
            "zh" => Ok(Lang::Zh),
            other => Err(format!("unknown language {other:?} (expected en or zh)")),
        }
    }
}

/// POS tag carrying the language of its word, e.g. `NN_en`, `VV_zh`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BilingualTag {
    pub base: String,
    pub lang: Lang,
}

impl BilingualTag {
    pub fn new(base: impl Into<String>, lang: Lang) -> Self {
        Self {
            base: base.into(),
            lang,
        }
    }
}

impl fmt::Display for BilingualTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.base, self.lang)
    }
}

impl FromStr for BilingualTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (base, lang) = s
            .rsplit_once('_')
            .ok_or_else(|| format!("malformed tag {s:?}: expected BASE_lang"))?;
        if base.is_empty() {
            return Err(format!("malformed tag {s:?}: empty base"));
        }
        let lang = lang.parse().map_err(|e| format!("malformed tag {s:?}: {e}"))?;
        Ok(Self::new(base, lang))
    }
}

/// One sentence with a bilingual tag per word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedUtterance {
    pub words: Vec<String>,
    pub tags: Vec<BilingualTag>,
}

impl TaggedUtterance {
    pub fn new(words: Vec<String>, tags: Vec<BilingualTag>) -> Result<Self, String> {
        if words.is_empty() {
            return Err("empty utterance".into());
        }
        if words.len() != tags.len() {
            return Err(format!("{} words but {} tags", words.len(), tags.len()));
        }
        Ok(Self { words, tags })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn langs(&self) -> Vec<Lang> {
        self.tags.iter().map(|t| t.lang).collect()
    }

    pub fn words_line(&self) -> String {
        self.words.join(" ")
    }

    pub fn tags_line(&self) -> String {
        self.tags.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
    }
}

/// Parses a pair of parallel word/tag texts. Lines blank in both are skipped.
pub fn parse_tagged(words: &str, tags: &str, source: &str) -> Result<Vec<TaggedUtterance>> {
    let wl: Vec<&str> = words.lines().collect();
    let tl: Vec<&str> = tags.lines().collect();
    let err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    if wl.len() != tl.len() {
        return Err(err(
            wl.len().min(tl.len()) + 1,
            format!("words file has {} lines, tags file has {}", wl.len(), tl.len()),
        ));
    }
    let mut out = Vec::new();
    for (i, (w, t)) in wl.iter().zip(&tl).enumerate() {
        let line = i + 1;
        let words: Vec<String> = w.split_whitespace().map(String::from).collect();
        let raw_tags: Vec<&str> = t.split_whitespace().collect();
        if words.is_empty() && raw_tags.is_empty() {
            continue;
        }
        if words.len() != raw_tags.len() {
            return Err(err(
                line,
                format!("{} words but {} tags", words.len(), raw_tags.len()),
            ));
        }
        let tags = raw_tags
            .iter()
            .map(|s| s.parse::<BilingualTag>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|m| err(line, m))?;
        out.push(TaggedUtterance::new(words, tags).map_err(|m| err(line, m))?);
    }
    Ok(out)
}

pub fn load_tagged_corpus(words_path: &Path, tags_path: &Path) -> Result<Vec<TaggedUtterance>> {
    let words = fs::read_to_string(words_path).map_err(|e| Error::io(words_path, e))?;
    let tags = fs::read_to_string(tags_path).map_err(|e| Error::io(tags_path, e))?;
    parse_tagged(&words, &tags, &words_path.display().to_string())
}

pub fn write_tagged_corpus(words_path: &Path, tags_path: &Path, utterances: &[TaggedUtterance]) -> Result<()> {
    let write = |path: &Path, line: &dyn Fn(&TaggedUtterance) -> String| -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for u in utterances {
            writeln!(f, "{}", line(u)).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    };
    write(words_path, &TaggedUtterance::words_line)?;
    write(tags_path, &TaggedUtterance::tags_line)
}

/// Token ↔ id map with `<eos>` = 0 and `<unk>` = 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    frozen: bool,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocab {
    /// Unfrozen vocabulary holding only the reserved tokens.
    pub fn new() -> Self {
        let mut v = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
            frozen: false,
        };
        v.insert(EOS);
        v.insert(UNK);
        v
    }

    /// Ids by descending frequency, ties broken lexicographically; tokens
    /// seen fewer than `min_count` times are left out.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        assert!(min_count >= 1, "min_count must be at least 1");
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *counts.entry(t).or_default() += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_count && t != EOS && t != UNK)
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut v = Self::new();
        for (t, _) in ranked {
            v.insert(t);
        }
        v.freeze();
        v
    }

    /// Assigns the next id to `token` unless frozen; frozen vocabularies
    /// return the existing id or UNK.
    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        if self.frozen {
            return UNK_ID;
        }
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), self.tokens.len() - 1);
        self.tokens.len() - 1
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn encode(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn decode(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            tokens,
            index,
            frozen: true,
        }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

pub fn build_vocab(utterances: &[TaggedUtterance], min_count: usize) -> Vocab {
    Vocab::build(
        utterances.iter().flat_map(|u| u.words.iter().map(String::as_str)),
        min_count,
    )
}

pub fn build_tag_vocab(utterances: &[TaggedUtterance]) -> Vocab {
    let surface: Vec<String> = utterances
        .iter()
        .flat_map(|u| u.tags.iter().map(ToString::to_string))
        .collect();
    Vocab::build(surface.iter().map(String::as_str), 1)
}

/// Word and tag id streams with an EOS after every utterance.
pub fn encode_stream(utterances: &[TaggedUtterance], words: &Vocab, tags: &Vocab) -> (Vec<usize>, Vec<usize>) {
    let n: usize = utterances.iter().map(|u| u.len() + 1).sum();
    let (mut ws, mut ts) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for u in utterances {
        ws.extend(u.words.iter().map(|w| words.encode(w)));
        ts.extend(u.tags.iter().map(|t| tags.encode(&t.to_string())));
        ws.push(EOS_ID);
        ts.push(EOS_ID);
    }
    (ws, ts)
}

/// One truncated-BPTT window. Every id vector is time-major: entry
/// `t·batch + b` belongs to lane `b` at step `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window {
    pub batch: usize,
    pub steps: usize,
    pub word_inputs: Vec<usize>,
    pub tag_inputs: Vec<usize>,
    pub word_targets: Vec<usize>,
    pub tag_targets: Vec<usize>,
}

impl Window {
    pub fn tokens(&self) -> usize {
        self.batch * self.steps
    }
}

/// The joined id stream split into `batch` contiguous lanes.
///
/// Lane `b` holds stream positions `[b·L, (b+1)·L)`. Window `k` feeds lane
/// positions `[k·unroll, (k+1)·unroll)` and predicts the same positions
/// shifted by one; positions that do not fill a whole window are dropped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchPlan {
    pub batch: usize,
    pub unroll: usize,
    pub lane_len: usize,
    words: Vec<usize>,
    tags: Vec<usize>,
}

impl BatchPlan {
    pub fn num_windows(&self) -> usize {
        (self.lane_len - 1) / self.unroll
    }

    /// Number of input positions per lane covered by whole windows.
    pub fn steps_per_lane(&self) -> usize {
        self.num_windows() * self.unroll
    }

    pub fn num_targets(&self) -> usize {
        self.batch * self.steps_per_lane()
    }

    pub fn word_lane(&self, b: usize) -> &[usize] {
        &self.words[b * self.lane_len..(b + 1) * self.lane_len]
    }

    pub fn tag_lane(&self, b: usize) -> &[usize] {
        &self.tags[b * self.lane_len..(b + 1) * self.lane_len]
    }

    pub fn window(&self, k: usize) -> Window {
        assert!(k < self.num_windows(), "window {k} out of range");
        let (b_n, steps) = (self.batch, self.unroll);
        let mut w = Window {
            batch: b_n,
            steps,
            word_inputs: Vec::with_capacity(b_n * steps),
            tag_inputs: Vec::with_capacity(b_n * steps),
            word_targets: Vec::with_capacity(b_n * steps),
            tag_targets: Vec::with_capacity(b_n * steps),
        };
        for t in 0..steps {
            let pos = k * steps + t;
            for b in 0..b_n {
                let (wl, tl) = (self.word_lane(b), self.tag_lane(b));
                w.word_inputs.push(wl[pos]);
                w.tag_inputs.push(tl[pos]);
                w.word_targets.push(wl[pos + 1]);
                w.tag_targets.push(tl[pos + 1]);
            }
        }
        w
    }

    pub fn windows(&self) -> impl Iterator<Item = Window> + '_ {
        (0..self.num_windows()).map(|k| self.window(k))
    }
}

pub fn make_batches(
    utterances: &[TaggedUtterance],
    words: &Vocab,
    tags: &Vocab,
    batch: usize,
    unroll: usize,
) -> Result<BatchPlan> {
    let (ws, ts) = encode_stream(utterances, words, tags);
    plan_from_stream(ws, ts, batch, unroll)
}

pub fn plan_from_stream(ws: Vec<usize>, ts: Vec<usize>, batch: usize, unroll: usize) -> Result<BatchPlan> {
    assert_eq!(ws.len(), ts.len());
    let minimum = batch.max(1) * (unroll.max(1) + 1);
    if batch == 0 || unroll == 0 || ws.len() < minimum {
        return Err(Error::CorpusTooSmall {
            tokens: ws.len(),
            minimum,
            batch,
            unroll,
        });
    }
    let lane_len = ws.len() / batch;
    let used = lane_len * batch;
    Ok(BatchPlan {
        batch,
        unroll,
        lane_len,
        words: ws[..used].to_vec(),
        tags: ts[..used].to_vec(),
    })
}

/// Adjacent token pairs whose languages differ.
pub fn count_switches(u: &TaggedUtterance) -> usize {
    u.tags.windows(2).filter(|p| p[0].lang != p[1].lang).count()
}

/// Lengths of the maximal monolingual runs, in order.
pub fn segment_lengths(u: &TaggedUtterance) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = 0;
    for (i, t) in u.tags.iter().enumerate() {
        if i > 0 && u.tags[i - 1].lang != t.lang {
            runs.push(current);
            current = 0;
        }
        current += 1;
    }
    if current > 0 {
        runs.push(current);
    }
    runs
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_utterances: usize,
    pub n_tokens: usize,
    /// Mean over utterances of the mean monolingual run length.
    pub avg_segment_length: f64,
    /// Mean number of switch points per utterance.
    pub avg_switches: f64,
}

pub fn compute_stats(corpus: &[TaggedUtterance]) -> CorpusStats {
    let n = corpus.len();
    if n == 0 {
        return CorpusStats {
            n_utterances: 0,
            n_tokens: 0,
            avg_segment_length: 0.0,
            avg_switches: 0.0,
        };
    }
    let mut seg_sum = 0.0;
    let mut sw_sum = 0usize;
    for u in corpus {
        let runs = segment_lengths(u);
        seg_sum += u.len() as f64 / runs.len() as f64;
        sw_sum += count_switches(u);
    }
    CorpusStats {
        n_utterances: n,
        n_tokens: corpus.iter().map(TaggedUtterance::len).sum(),
        avg_segment_length: seg_sum / n as f64,
        avg_switches: sw_sum as f64 / n as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn utt(words: &str, tags: &str) -> TaggedUtterance {
        parse_tagged(words, tags, "test").unwrap().remove(0)
    }

    #[test]
    fn parses_intra_sentential_example() {
        let u = utt("我 要 去 check", "PN_zh VV_zh VV_zh VB_en");
        assert_eq!(u.len(), 4);
        assert_eq!(u.langs(), vec![Lang::Zh, Lang::Zh, Lang::Zh, Lang::En]);
        assert_eq!(u.tags[3], BilingualTag::new("VB", Lang::En));
    }

    #[test]
    fn empty_pair_is_empty_corpus() {
        assert!(parse_tagged("", "", "x").unwrap().is_empty());
        assert!(parse_tagged("\n\n", "\n\n", "x").unwrap().is_empty());
    }

    #[test]
    fn token_count_mismatch_cites_line() {
        let err = parse_tagged("a_ b\nx y z", "NN_en NN_en\nNN_en NN_en", "w.txt").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("3 words but 2 tags"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn malformed_tag_is_named() {
        let err = parse_tagged("a b", "NN_en NNfr", "w.txt").unwrap_err().to_string();
        assert!(err.contains("NNfr") && err.contains(":1:"), "{err}");
        assert!(parse_tagged("a", "NN_fr", "w").is_err());
        assert!(parse_tagged("a", "_en", "w").is_err());
    }

    #[test]
    fn line_count_mismatch_is_an_error() {
        assert!(matches!(parse_tagged("a\nb", "NN_en", "w"), Err(Error::Parse { .. })));
    }

    #[test]
    fn tag_with_inner_underscore_splits_on_last() {
        let t: BilingualTag = "PU_X_zh".parse().unwrap();
        assert_eq!(t.base, "PU_X");
        assert_eq!(t.to_string(), "PU_X_zh");
    }

    #[test]
    fn vocab_frequency_then_lexicographic() {
        let v = Vocab::build("a a b".split(' '), 1);
        assert_eq!(v.tokens(), &[EOS, UNK, "a", "b"]);
        let v = Vocab::build("b a".split(' '), 1);
        assert_eq!(v.encode("a"), 2);
        assert_eq!(v.encode("b"), 3);
        let v = Vocab::build("a b".split(' '), 2);
        assert_eq!(v.encode("a"), UNK_ID);
        assert_eq!(v.encode("b"), UNK_ID);
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn frozen_vocab_never_grows() {
        let mut v = Vocab::build(["x"], 1);
        assert!(v.is_frozen());
        assert_eq!(v.insert("y"), UNK_ID);
        assert_eq!(v.len(), 3);
        let mut open = Vocab::new();
        assert_eq!(open.insert("y"), 2);
        assert_eq!(open.insert("y"), 2);
    }

    #[test]
    fn vocab_serializes_as_token_list() {
        let v = Vocab::build("a a b".split(' '), 1);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["<eos>","<unk>","a","b"]"#);
        let back: Vocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn single_utterance_batch_shifts_by_one() {
        let c = vec![utt("a b", "NN_en NN_en")];
        let (vw, vp) = (build_vocab(&c, 1), build_tag_vocab(&c));
        let plan = make_batches(&c, &vw, &vp, 1, 2).unwrap();
        let w = plan.window(0);
        let (a, b) = (vw.encode("a"), vw.encode("b"));
        assert_eq!(w.word_inputs, vec![a, b]);
        assert_eq!(w.word_targets, vec![b, EOS_ID]);
        assert_eq!(w.tag_targets[1], EOS_ID);
    }

    #[test]
    fn lanes_are_contiguous_stream_slices() {
        let ws: Vec<usize> = (10..20).collect();
        let plan = plan_from_stream(ws.clone(), ws.clone(), 2, 2).unwrap();
        assert_eq!(plan.lane_len, 5);
        assert_eq!(plan.word_lane(1)[0], ws[5]);
        assert_eq!(plan.num_windows(), 2);
        let w1 = plan.window(1);
        // time-major: [t0 lane0, t0 lane1, t1 lane0, t1 lane1]
        assert_eq!(w1.word_inputs, vec![12, 17, 13, 18]);
        assert_eq!(w1.word_targets, vec![13, 18, 14, 19]);
    }

    #[test]
    fn sentence_boundary_targets_eos_then_next_sentence() {
        // Stream: x y EOS z w EOS  (positions 0..6)
        let c = vec![utt("x y", "NN_en NN_en"), utt("z w", "NN_zh NN_zh")];
        let (vw, vp) = (build_vocab(&c, 1), build_tag_vocab(&c));
        let plan = make_batches(&c, &vw, &vp, 1, 2).unwrap();
        assert_eq!(plan.num_windows(), 2);
        let (w0, w1) = (plan.window(0), plan.window(1));
        assert_eq!(w0.word_inputs, vec![vw.encode("x"), vw.encode("y")]);
        assert_eq!(w0.word_targets, vec![vw.encode("y"), EOS_ID]);
        assert_eq!(w1.word_inputs, vec![EOS_ID, vw.encode("z")]);
        assert_eq!(w1.word_targets, vec![vw.encode("z"), vw.encode("w")]);
        assert_eq!(w1.tag_targets, vec![vp.encode("NN_zh"), vp.encode("NN_zh")]);
    }

    #[test]
    fn too_small_corpus_reports_minimum() {
        let c = vec![utt("a b", "NN_en NN_en")];
        let (vw, vp) = (build_vocab(&c, 1), build_tag_vocab(&c));
        match make_batches(&c, &vw, &vp, 2, 35) {
            Err(Error::CorpusTooSmall { minimum, tokens, .. }) => {
                assert_eq!(minimum, 72);
                assert_eq!(tokens, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn switch_statistics_examples() {
        let u = utt("我 要 去 check", "PN_zh VV_zh VV_zh VB_en");
        assert_eq!(count_switches(&u), 1);
        assert_eq!(segment_lengths(&u), vec![3, 1]);
        assert_eq!(compute_stats(&[u]).avg_segment_length, 2.0);

        let mono = utt("a b c", "NN_en VB_en NN_en");
        assert_eq!(count_switches(&mono), 0);

        let alt = utt("a b c d", "NN_zh NN_en NN_zh NN_en");
        assert_eq!(count_switches(&alt), 3);
        let s = compute_stats(&[alt]);
        assert_eq!(s.avg_segment_length, 1.0);
        assert_eq!(s.avg_switches, 3.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_utterance() -> impl Strategy<Value = TaggedUtterance> {
            prop::collection::vec((0usize..4, prop::bool::ANY), 1..12).prop_map(|cells| {
                let words = cells.iter().map(|(w, _)| format!("w{w}")).collect();
                let tags = cells
                    .iter()
                    .map(|(_, zh)| BilingualTag::new("NN", if *zh { Lang::Zh } else { Lang::En }))
                    .collect();
                TaggedUtterance::new(words, tags).unwrap()
            })
        }

        proptest! {
            #[test]
            fn switch_and_run_invariants(u in arb_utterance()) {
                let s = count_switches(&u);
                prop_assert!(s < u.len());
                let mono = u.tags.iter().all(|t| t.lang == u.tags[0].lang);
                prop_assert_eq!(s == 0, mono);
                let runs = segment_lengths(&u);
                prop_assert_eq!(runs.iter().sum::<usize>(), u.len());
                prop_assert_eq!(runs.len(), s + 1);
            }

            #[test]
            fn encode_decode(corpus in prop::collection::vec(arb_utterance(), 1..5), oov in "[x-z]{3}") {
                let v = build_vocab(&corpus, 1);
                for u in &corpus {
                    for w in &u.words {
                        prop_assert_eq!(v.decode(v.encode(w)), Some(w.as_str()));
                    }
                }
                prop_assert_eq!(v.decode(v.encode(&oov)), Some(UNK));
            }

            #[test]
            fn lanes_shift_by_one(corpus in prop::collection::vec(arb_utterance(), 3..8), batch in 1usize..4, unroll in 1usize..5) {
                let (vw, vp) = (build_vocab(&corpus, 1), build_tag_vocab(&corpus));
                let Ok(plan) = make_batches(&corpus, &vw, &vp, batch, unroll) else { return Ok(()) };
                for k in 0..plan.num_windows() {
                    let w = plan.window(k);
                    for t in 0..w.steps - 1 {
                        for b in 0..batch {
                            prop_assert_eq!(w.word_targets[t * batch + b], w.word_inputs[(t + 1) * batch + b]);
                            prop_assert_eq!(w.tag_targets[t * batch + b], w.tag_inputs[(t + 1) * batch + b]);
                        }
                    }
                    if k + 1 < plan.num_windows() {
                        let next = plan.window(k + 1);
                        let last = (w.steps - 1) * batch;
                        prop_assert_eq!(&w.word_targets[last..], &next.word_inputs[..batch]);
                    }
                }
            }
        }
    }
}
