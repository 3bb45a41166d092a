//! Train the adapters in the synthetic world and compare grounding and
//! placement success before and after.
//!
//! cargo run --release --example train_synthetic -- [steps] [train_scenes]

use std::time::Instant;

use spatial_place::adapter::{grounding_accuracy, prepare_samples, train_prepared, AdapterConfig, AdapterPair, TrainConfig};
use spatial_place::embeddings::{SyntheticConfig, SyntheticWorld};
use spatial_place::harness::{
    gen_dataset, run_eval, DatasetRecord, DatasetSpec, EvalConfig, InstructionTemplates, ObjectVocabulary, Pipeline,
    Split,
};
use spatial_place::parser::Lexicon;
use spatial_place::pipeline::ModelAssets;

fn main() -> spatial_place::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map_or(20_000, |s| s.parse().expect("steps"));
    let scenes: usize = args.next().map_or(200, |s| s.parse().expect("train scenes"));

    let lex = Lexicon::default();
    let vocab = ObjectVocabulary::default();
    let spec = DatasetSpec::scaled(scenes, 400, 11).only(&[Split::Train, Split::TestSeen]);
    let records = gen_dataset(&spec, &vocab, &InstructionTemplates::default(), &lex)?;
    let (train, test): (Vec<DatasetRecord>, Vec<DatasetRecord>) =
        records.into_iter().partition(|r| r.split == Split::Train);

    let names: Vec<&str> = vocab.all().collect();
    let world = SyntheticWorld::new(&names, SyntheticConfig { seed: 11, ..Default::default() });
    let samples: Vec<_> = train.iter().map(DatasetRecord::train_sample).collect();
    let held_out: Vec<_> = test.iter().map(DatasetRecord::train_sample).collect();
    let data = prepare_samples(&world, &samples)?;
    let eval_data = prepare_samples(&world, &held_out)?;

    let init = AdapterPair::init(&AdapterConfig::default(), 11)?;
    let cfg = TrainConfig { steps, seed: 11, ..Default::default() };
    let t0 = Instant::now();
    let outcome = train_prepared(&init, &data, &cfg)?;
    println!("{steps} steps on {} scenes in {:.1?}", data.len(), t0.elapsed());
    let tail = &outcome.losses[outcome.losses.len().saturating_sub(1000)..];
    println!("mean loss over the last {} steps: {:.5}", tail.len(), tail.iter().sum::<f64>() / tail.len().max(1) as f64);

    for (label, pair) in [("untrained", &init), ("trained", &outcome.pair)] {
        let assets = ModelAssets { pair, encoder: &world, lexicon: &lex, llm: None };
        let report = run_eval(&Pipeline::Model(assets), &test, &EvalConfig::default());
        println!(
            "{label:>9}: held-out grounding {:.4}, placement success {:.4} (table {:.3}, 1obj {:.3}, 2obj {:.3})",
            grounding_accuracy(pair, &eval_data)?,
            report.overall,
            report.levels.table.success_rate,
            report.levels.one_obj.success_rate,
            report.levels.two_obj.success_rate,
        );
    }
    Ok(())
}
