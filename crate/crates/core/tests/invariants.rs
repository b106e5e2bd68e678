use proptest::prelude::*;

use cslm::model::{combine_losses, ModelConfig, ModelMode, MultiTaskLm};
use cslm::synthgen::{generate, inventory, SynthConfig};
use cslm::trainer::LrSchedule;

fn small_synth(seed: u64, switch_prob: f64, homograph_rate: f64) -> SynthConfig {
    SynthConfig {
        seed,
        n_train: 40,
        n_dev: 5,
        n_test: 5,
        vocab_per_pos: 3,
        switch_prob,
        homograph_rate,
        ..SynthConfig::default()
    }
}

fn tiny_model(mode: ModelMode, seed: u64) -> MultiTaskLm {
    let cfg = ModelConfig { hidden: 5, layers: 1, mode, init_seed: seed, ..ModelConfig::default() };
    MultiTaskLm::new(cfg, 12, 7).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_words_agree_with_tags(seed in 0u64..1000, sp in 0.0f64..=1.0, homo in 0.0f64..=1.0) {
        let corpus = generate(&small_synth(seed, sp, homo)).unwrap();
        for u in corpus.train.iter().chain(&corpus.dev).chain(&corpus.test) {
            prop_assert!(!u.is_empty());
            for (w, t) in u.words.iter().zip(&u.tags) {
                prop_assert!(inventory(t.lang).contains(&t.base.as_str()), "{} not in inventory", t);
                let mut parts = w.splitn(3, '_');
                prop_assert_eq!(parts.next(), Some(t.lang.as_str()), "{} tagged {}", w, t);
                let base = parts.next().unwrap();
                prop_assert!(inventory(t.lang).contains(&base));
                if homo == 0.0 {
                    prop_assert_eq!(base, t.base.as_str());
                }
                let k: usize = parts.next().unwrap().parse().unwrap();
                prop_assert!(k < 3);
            }
        }
    }

    #[test]
    fn zero_switch_prob_stays_monolingual(seed in 0u64..1000) {
        let corpus = generate(&small_synth(seed, 0.0, 0.0)).unwrap();
        prop_assert!(corpus.train.iter().all(|u| u.tags.iter().all(|t| t.lang == SynthConfig::default().matrix_lang)));
    }

    #[test]
    fn lr_follows_miss_count(devs in prop::collection::vec(1.0f64..200.0, 1..30)) {
        let mut s = LrSchedule::new(20.0, 0.75);
        let mut best = f64::INFINITY;
        let mut misses = 0i32;
        for d in devs {
            let improved = d < best;
            prop_assert_eq!(s.observe(d), improved);
            if improved { best = d } else { misses += 1 }
            prop_assert_eq!(s.lr(), 20.0 * 0.75f64.powi(misses));
        }
    }

    #[test]
    fn total_loss_is_a_convex_mix(lm in 0.0f64..20.0, pt in 0.0f64..20.0, p in 0.0f64..=1.0) {
        let t = combine_losses(lm, Some(pt), p);
        prop_assert!(t >= lm.min(pt) - 1e-12 && t <= lm.max(pt) + 1e-12);
        prop_assert_eq!(combine_losses(lm, None, p), lm);
    }

    #[test]
    fn scores_are_normalized(
        seed in 0u64..100,
        seq in prop::collection::vec((4usize..12, 4usize..7), 1..8),
    ) {
        let m = tiny_model(ModelMode::Multitask, seed);
        let (w, t): (Vec<_>, Vec<_>) = seq.into_iter().unzip();
        let s = m.score_sequence(&w, &t).unwrap();
        prop_assert_eq!(s.word_logp.len(), w.len());
        prop_assert!(s.word_logp.iter().all(|&l| l.is_finite() && l <= 0.0));
        for row in s.pos_probs.unwrap() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lm_only_ignores_tags(
        seed in 0u64..100,
        seq in prop::collection::vec((4usize..12, 4usize..7, 4usize..7), 1..8),
    ) {
        let m = tiny_model(ModelMode::LmOnly, seed);
        let w: Vec<_> = seq.iter().map(|x| x.0).collect();
        let a: Vec<_> = seq.iter().map(|x| x.1).collect();
        let b: Vec<_> = seq.iter().map(|x| x.2).collect();
        let sa = m.score_sequence(&w, &a).unwrap();
        let sb = m.score_sequence(&w, &b).unwrap();
        prop_assert_eq!(sa.word_logp, sb.word_logp);
        prop_assert!(sa.pos_probs.is_none());
    }
}
