//! Synthetic code-switched corpora with exact bilingual POS tags.
//!
//! Each utterance starts from a POS template written in the matrix
//! language. At every token boundary an embedded-language island may open;
//! its length is geometric and its tokens keep the template's category but
//! take the embedded language's tag. Words are drawn from a per-cell
//! lexicon and spell out their cell, e.g. `zh_VV_17`.
//!
//! Switching is more likely right after trigger categories, so the tag
//! sequence carries information about where the language changes.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, compute_stats, BilingualTag, CorpusStats, Lang, TaggedUtterance};
use crate::error::{Error, Result};

/// Shared categories with their English (Penn) and Chinese (CTB) bases.
pub const CATEGORIES: &[(&str, &str, &str)] = &[
    ("noun", "NN", "NN"),
    ("verb", "VB", "VV"),
    ("adj", "JJ", "VA"),
    ("adv", "RB", "AD"),
    ("adp", "IN", "P"),
    ("det", "DT", "DT"),
    ("pron", "PRP", "PN"),
    ("conj", "CC", "CC"),
    ("num", "CD", "CD"),
    ("part", "RP", "SP"),
    ("aux", "MD", "AS"),
    ("intj", "UH", "IJ"),
];

/// Category pairs whose lexicons overlap when `homograph_rate > 0`.
const PARTNERS: &[(&str, &str)] = &[
    ("noun", "verb"),
    ("adj", "adv"),
    ("adp", "conj"),
    ("det", "pron"),
    ("num", "part"),
    ("aux", "intj"),
];

pub fn inventory(lang: Lang) -> Vec<&'static str> {
    CATEGORIES.iter().map(|c| base_of(c, lang)).collect()
}

fn base_of(c: &(&'static str, &'static str, &'static str), lang: Lang) -> &'static str {
    match lang {
        Lang::En => c.1,
        Lang::Zh => c.2,
    }
}

fn category_index(base: &str, lang: Lang) -> Option<usize> {
    CATEGORIES.iter().position(|c| base_of(c, lang) == base)
}

fn category_by_name(name: &str) -> Option<usize> {
    CATEGORIES.iter().position(|c| c.0 == name)
}

/// A space-separated tag sequence in the matrix language.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub pattern: String,
    pub weight: f64,
}

impl Template {
    pub fn new(pattern: &str, weight: f64) -> Self {
        Self {
            pattern: pattern.to_string(),
            weight,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub vocab_per_pos: usize,
    /// Per-boundary probability of opening an embedded island.
    pub switch_prob: f64,
    /// Mean length of an embedded island.
    pub island_len: f64,
    pub matrix_lang: Lang,
    /// Templates in matrix-language tags; empty selects the built-in set.
    pub templates: Vec<Template>,
    /// Categories after which an island is more likely to open.
    pub triggers: Vec<String>,
    /// Multiplier on `switch_prob` after a trigger (capped at 1).
    pub trigger_boost: f64,
    /// Probability that a slot borrows a word from its partner category.
    pub homograph_rate: f64,
    /// Zipf exponent of word choice inside a lexicon cell; 0 is uniform.
    pub zipf: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_train: 20_000,
            n_dev: 2_000,
            n_test: 2_000,
            vocab_per_pos: 50,
            switch_prob: 0.1,
            island_len: 2.0,
            matrix_lang: Lang::Zh,
            templates: Vec::new(),
            triggers: vec!["verb".into(), "adp".into(), "det".into()],
            trigger_boost: 4.0,
            homograph_rate: 0.0,
            zipf: 1.0,
        }
    }
}

pub fn default_templates(lang: Lang) -> Vec<Template> {
    let zh = [
        ("PN VV NN", 3.0),
        ("PN AD VV DT NN", 2.0),
        ("DT NN VV VA SP", 2.0),
        ("PN VV P NN", 2.0),
        ("NN AD VA", 1.5),
        ("PN AS VV CD NN", 1.0),
        ("IJ PN VV NN SP", 1.0),
        ("PN VV PN CC PN", 1.0),
        ("PN AD VV P DT NN VV NN", 1.0),
        ("CD NN VV VA", 1.0),
        ("PN VV AS NN CC NN", 1.0),
        ("P NN PN AD VV", 1.0),
    ];
    let en = [
        ("PRP VB NN", 3.0),
        ("PRP RB VB DT NN", 2.0),
        ("DT NN VB JJ", 2.0),
        ("PRP VB IN NN", 2.0),
        ("NN RB JJ", 1.5),
        ("PRP MD VB CD NN", 1.0),
        ("UH PRP VB NN RP", 1.0),
        ("PRP VB PRP CC PRP", 1.0),
        ("PRP RB VB IN DT NN VB NN", 1.0),
        ("CD NN VB JJ", 1.0),
        ("PRP MD VB NN CC NN", 1.0),
        ("IN NN PRP RB VB", 1.0),
    ];
    let src: &[(&str, f64)] = match lang {
        Lang::Zh => &zh,
        Lang::En => &en,
    };
    src.iter().map(|&(p, w)| Template::new(p, w)).collect()
}

impl SynthConfig {
    pub fn effective_templates(&self) -> Vec<Template> {
        if self.templates.is_empty() {
            default_templates(self.matrix_lang)
        } else {
            self.templates.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, n) in [("n_train", self.n_train), ("n_dev", self.n_dev), ("n_test", self.n_test)] {
            if n == 0 {
                problems.push(format!("{name} must be at least 1"));
            }
        }
        if self.vocab_per_pos == 0 {
            problems.push("vocab_per_pos must be at least 1".into());
        }
        for (name, p) in [("switch_prob", self.switch_prob), ("homograph_rate", self.homograph_rate)] {
            if !(0.0..=1.0).contains(&p) {
                problems.push(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if !(self.island_len >= 1.0) {
            problems.push(format!("island_len must be at least 1, got {}", self.island_len));
        }
        if !(self.trigger_boost >= 1.0) {
            problems.push(format!("trigger_boost must be at least 1, got {}", self.trigger_boost));
        }
        if !(self.zipf >= 0.0) {
            problems.push(format!("zipf must be non-negative, got {}", self.zipf));
        }
        for t in &self.triggers {
            if category_by_name(t).is_none() {
                problems.push(format!("unknown trigger category {t:?}"));
            }
        }
        let templates = self.effective_templates();
        if templates.iter().all(|t| !(t.weight > 0.0)) {
            problems.push("templates need at least one positive weight".into());
        }
        for t in &templates {
            if !(t.weight >= 0.0) {
                problems.push(format!("template {:?} has weight {}", t.pattern, t.weight));
            }
            if t.pattern.split_whitespace().next().is_none() {
                problems.push("empty template".into());
            }
            for base in t.pattern.split_whitespace() {
                if category_index(base, self.matrix_lang).is_none() {
                    problems.push(format!(
                        "template {:?}: {base} is not a {} tag",
                        t.pattern, self.matrix_lang
                    ));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub config: SynthConfig,
    pub train: CorpusStats,
    pub dev: CorpusStats,
    pub test: CorpusStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub train: Vec<TaggedUtterance>,
    pub dev: Vec<TaggedUtterance>,
    pub test: Vec<TaggedUtterance>,
    pub manifest: SynthManifest,
}

impl SynthCorpus {
    /// Writes `{split}.words`, `{split}.tags` and `manifest.json` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for (name, split) in [("train", &self.train), ("dev", &self.dev), ("test", &self.test)] {
            let (w, t) = split_paths(dir, name);
            corpus::write_tagged_corpus(&w, &t, split)?;
            written.extend([w, t]);
        }
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(written)
    }
}

pub fn split_paths(dir: &Path, split: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{split}.words")), dir.join(format!("{split}.tags")))
}

struct Sampler {
    templates: Vec<Vec<usize>>,
    template_dist: WeightedIndex<f64>,
    word_dist: WeightedIndex<f64>,
    partner: Vec<usize>,
    trigger: Vec<bool>,
}

impl Sampler {
    fn new(cfg: &SynthConfig) -> Result<Self> {
        let templates = cfg.effective_templates();
        let dist = WeightedIndex::new(templates.iter().map(|t| t.weight))
            .map_err(|e| Error::InvalidConfig(vec![format!("template weights: {e}")]))?;
        let seqs = templates
            .iter()
            .map(|t| {
                t.pattern
                    .split_whitespace()
                    .map(|b| category_index(b, cfg.matrix_lang).expect("validated"))
                    .collect()
            })
            .collect();
        let zipf = (1..=cfg.vocab_per_pos).map(|r| (r as f64).powf(-cfg.zipf));
        let mut partner: Vec<usize> = (0..CATEGORIES.len()).collect();
        for (a, b) in PARTNERS {
            let (a, b) = (category_by_name(a).unwrap(), category_by_name(b).unwrap());
            partner[a] = b;
            partner[b] = a;
        }
        let mut trigger = vec![false; CATEGORIES.len()];
        for t in &cfg.triggers {
            trigger[category_by_name(t).expect("validated")] = true;
        }
        Ok(Self {
            templates: seqs,
            template_dist: dist,
            word_dist: WeightedIndex::new(zipf).expect("vocab_per_pos >= 1"),
            partner,
            trigger,
        })
    }

    fn utterance(&self, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> TaggedUtterance {
        let template = &self.templates[self.template_dist.sample(rng)];
        let mut words = Vec::with_capacity(template.len());
        let mut tags = Vec::with_capacity(template.len());
        let mut island_left = 0usize;
        let mut prev_lang = cfg.matrix_lang;
        for (i, &cat) in template.iter().enumerate() {
            // An island that just closed hands the next token back to the matrix language.
            if i > 0 && island_left == 0 && prev_lang == cfg.matrix_lang {
                let prev = template[i - 1];
                let p = if self.trigger[prev] {
                    (cfg.switch_prob * cfg.trigger_boost).min(1.0)
                } else {
                    cfg.switch_prob
                };
                if rng.gen_bool(p) {
                    island_left = geometric(rng, cfg.island_len);
                }
            }
            let lang = if island_left > 0 {
                island_left -= 1;
                cfg.matrix_lang.other()
            } else {
                cfg.matrix_lang
            };
            prev_lang = lang;
            let source = if cfg.homograph_rate > 0.0 && rng.gen_bool(cfg.homograph_rate) {
                self.partner[cat]
            } else {
                cat
            };
            let k = self.word_dist.sample(rng);
            words.push(format!("{lang}_{}_{k}", base_of(&CATEGORIES[source], lang)));
            tags.push(BilingualTag::new(base_of(&CATEGORIES[cat], lang), lang));
        }
        TaggedUtterance { words, tags }
    }
}

/// Geometric length on {1, 2, ...} with the given mean.
fn geometric(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    let stop = 1.0 / mean;
    let mut n = 1;
    while stop < 1.0 && !rng.gen_bool(stop) {
        n += 1;
    }
    n
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let sampler = Sampler::new(cfg)?;
    let split = |stream: u64, n: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        (0..n).map(|_| sampler.utterance(cfg, &mut rng)).collect::<Vec<_>>()
    };
    let train = split(1, cfg.n_train);
    let dev = split(2, cfg.n_dev);
    let test = split(3, cfg.n_test);
    let manifest = SynthManifest {
        config: cfg.clone(),
        train: compute_stats(&train),
        dev: compute_stats(&dev),
        test: compute_stats(&test),
    };
    Ok(SynthCorpus {
        train,
        dev,
        test,
        manifest,
    })
}

/// Tags immediately preceding a switch point, most frequent first.
pub fn trigger_profile(corpus: &[TaggedUtterance]) -> Vec<(BilingualTag, usize)> {
    let mut counts: HashMap<&BilingualTag, usize> = HashMap::new();
    for u in corpus {
        for pair in u.tags.windows(2) {
            if pair[0].lang != pair[1].lang {
                *counts.entry(&pair[0]).or_default() += 1;
            }
        }
    }
    let mut rows: Vec<_> = counts.into_iter().map(|(t, n)| (t.clone(), n)).collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.to_string().cmp(&b.0.to_string())));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::count_switches;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            seed,
            n_train: 300,
            n_dev: 50,
            n_test: 50,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn no_switching_gives_monolingual_matrix_corpus() {
        let c = generate(&SynthConfig {
            switch_prob: 0.0,
            ..small(1)
        })
        .unwrap();
        assert_eq!(c.manifest.train.avg_switches, 0.0);
        assert!(c.train.iter().all(|u| u.langs().iter().all(|&l| l == Lang::Zh)));
    }

    #[test]
    fn saturated_switching_alternates() {
        let c = generate(&SynthConfig {
            switch_prob: 1.0,
            island_len: 1.0,
            ..small(2)
        })
        .unwrap();
        for u in &c.train {
            assert_eq!(count_switches(u), u.len() - 1);
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate(&small(9)).unwrap();
        let b = generate(&small(9)).unwrap();
        assert_eq!(a, b);
        let c = generate(&small(10)).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn splits_use_independent_streams() {
        let c = generate(&small(4)).unwrap();
        assert_ne!(c.train[..50], c.dev[..]);
        assert_ne!(c.dev, c.test);
    }

    #[test]
    fn tags_match_word_language_and_inventory() {
        let c = generate(&SynthConfig {
            switch_prob: 0.3,
            homograph_rate: 0.3,
            ..small(5)
        })
        .unwrap();
        for u in c.train.iter().chain(&c.test) {
            for (w, t) in u.words.iter().zip(&u.tags) {
                assert!(w.starts_with(&format!("{}_", t.lang)));
                assert!(inventory(t.lang).contains(&t.base.as_str()));
            }
        }
    }

    #[test]
    fn words_spell_their_cell_without_homographs() {
        let c = generate(&SynthConfig {
            switch_prob: 0.3,
            ..small(6)
        })
        .unwrap();
        for u in &c.train {
            for (w, t) in u.words.iter().zip(&u.tags) {
                assert!(w.starts_with(&format!("{t_lang}_{base}_", t_lang = t.lang, base = t.base)));
            }
        }
    }

    #[test]
    fn switching_grows_with_switch_prob() {
        let stats = |p| {
            let c = generate(&SynthConfig {
                switch_prob: p,
                n_train: 1000,
                ..small(11)
            })
            .unwrap();
            c.manifest.train.avg_switches
        };
        let (a, b, c) = (stats(0.05), stats(0.2), stats(0.5));
        assert!(a <= b && b <= c, "{a} {b} {c}");
    }

    #[test]
    fn triggers_dominate_the_profile() {
        let c = generate(&SynthConfig {
            switch_prob: 0.1,
            trigger_boost: 6.0,
            ..small(12)
        })
        .unwrap();
        let top = &trigger_profile(&c.train)[0].0;
        assert!(["VV", "P", "DT"].contains(&top.base.as_str()), "{top}");
    }

    #[test]
    fn profile_of_single_switch() {
        let u = corpus::parse_tagged("我 要 check", "PN_zh VV_zh VB_en", "mem").unwrap();
        assert_eq!(trigger_profile(&u), vec![("VV_zh".parse().unwrap(), 1)]);
        let mono = corpus::parse_tagged("我 要", "PN_zh VV_zh", "mem").unwrap();
        assert!(trigger_profile(&mono).is_empty());
    }

    #[test]
    fn invalid_config_names_fields() {
        let cfg = SynthConfig {
            n_dev: 0,
            switch_prob: 1.5,
            templates: vec![Template::new("PN VB", 1.0)],
            ..SynthConfig::default()
        };
        let Err(Error::InvalidConfig(p)) = cfg.validate() else {
            panic!("accepted invalid config");
        };
        assert_eq!(p.len(), 3, "{p:?}");
        assert!(p.iter().any(|m| m.contains("VB")));
    }

    #[test]
    fn write_and_reload() {
        let c = generate(&small(3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        c.write_to(dir.path()).unwrap();
        let (w, t) = split_paths(dir.path(), "dev");
        assert_eq!(corpus::load_tagged_corpus(&w, &t).unwrap(), c.dev);
        let m: SynthManifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m, c.manifest);
    }
}
