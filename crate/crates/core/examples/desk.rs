//! Generate a corpus in memory and train each mode on it, printing test ppl_lm.
//!
//! Settings come from env vars: SEED NTRAIN VPP SP HOMO BOOST EPOCHS MODES H P DROP.
//! `HOMO=0.4 cargo run --release -p cslm --example desk`

use std::time::Instant;

use cslm::corpus::{build_tag_vocab, build_vocab, make_batches};
use cslm::model::{ModelConfig, ModelMode, MultiTaskLm};
use cslm::synthgen::{generate, SynthConfig};
use cslm::trainer::{perplexity, train, TrainConfig};

fn arg<T: std::str::FromStr>(name: &str, default: T) -> T {
    std::env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn main() {
    let synth = SynthConfig {
        seed: arg("SEED", 1),
        n_train: arg("NTRAIN", 20_000),
        n_dev: 1000,
        n_test: 1000,
        vocab_per_pos: arg("VPP", 10),
        switch_prob: arg("SP", 0.15),
        homograph_rate: arg("HOMO", 0.0),
        trigger_boost: arg("BOOST", 4.0),
        ..SynthConfig::default()
    };
    let c = generate(&synth).unwrap();
    let vw = build_vocab(&c.train, 1);
    let vp = build_tag_vocab(&c.train);
    println!("vocab {} tags {} stats {:?}", vw.len(), vp.len(), c.manifest.train);
    let tc = TrainConfig { max_epochs: arg("EPOCHS", 5), batch: 20, unroll: 35, ..TrainConfig::default() };
    let tr = make_batches(&c.train, &vw, &vp, tc.batch, tc.unroll).unwrap();
    let dv = make_batches(&c.dev, &vw, &vp, tc.batch, tc.unroll).unwrap();
    let te = make_batches(&c.test, &vw, &vp, tc.batch, tc.unroll).unwrap();
    let modes: Vec<ModelMode> = std::env::var("MODES").map(|s| s.split(',').map(|m| m.parse().unwrap()).collect()).unwrap_or(ModelMode::ALL.to_vec());
    for mode in modes {
        let mc = ModelConfig {
            hidden: arg("H", 32),
            mode,
            loss_weight: arg("P", 0.25),
            dropout_word: arg("DROP", 0.2),
            dropout_pos: arg("DROP", 0.2),
            init_seed: arg("SEED", 1),
            ..ModelConfig::default()
        };
        let mut m = MultiTaskLm::new(mc, vw.len(), vp.len()).unwrap();
        let t = Instant::now();
        let out = train(&mut m, &tr, &dv, &TrainConfig { seed: arg("SEED", 1), ..tc.clone() }, |r| {
            eprintln!("  {mode} ep {} lr {} train {:.4} dev {:.3}", r.epoch, r.lr, r.train_loss_lm, r.dev_ppl_lm)
        })
        .unwrap();
        let test = perplexity(&out.best, &te).unwrap();
        println!("{mode}: test ppl_lm {:.4} best epoch {} ({:.1}s)", test.ppl_lm, out.best_epoch, t.elapsed().as_secs_f64());
    }
}
