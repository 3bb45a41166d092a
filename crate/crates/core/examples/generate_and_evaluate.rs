//! Generate a small dataset on disk, reload it, and score the oracle and an
//! untrained model on each test split.
//!
//! cargo run --release --example generate_and_evaluate -- [out_dir]

use std::path::PathBuf;

use spatial_place::adapter::{AdapterConfig, AdapterPair};
use spatial_place::embeddings::{SyntheticConfig, SyntheticWorld};
use spatial_place::harness::{
    gen_dataset, load_dataset, run_eval, save_dataset, DatasetSpec, EvalConfig, InstructionTemplates, ObjectVocabulary,
    Pipeline, Split,
};
use spatial_place::parser::Lexicon;
use spatial_place::pipeline::ModelAssets;

fn main() -> spatial_place::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "dataset".into()));
    let lex = Lexicon::default();
    let vocab = ObjectVocabulary::default();
    let records = gen_dataset(&DatasetSpec::scaled(40, 40, 1), &vocab, &InstructionTemplates::default(), &lex)?;
    save_dataset(&dir, &records)?;
    let records = load_dataset(&dir)?;
    println!("{} records in {}", records.len(), dir.display());
    if let Some(r) = records.first() {
        println!("e.g. #{} [{:?}] {}", r.id, r.level, r.instruction);
    }

    let names: Vec<&str> = vocab.all().collect();
    let world = SyntheticWorld::new(&names, SyntheticConfig { seed: 1, ..Default::default() });
    let pair = AdapterPair::init(&AdapterConfig::default(), 1)?;
    let model = Pipeline::Model(ModelAssets { pair: &pair, encoder: &world, lexicon: &lex, llm: None });
    let cfg = EvalConfig::default();
    for split in [Split::TestSeen, Split::TestUnseenObj, Split::TestUnseenInst] {
        let subset: Vec<_> = records.iter().filter(|r| r.split == split).cloned().collect();
        let oracle = run_eval(&Pipeline::Oracle, &subset, &cfg);
        let untrained = run_eval(&model, &subset, &cfg);
        println!(
            "{:<18} oracle {:.3}  untrained {:.3}  (table {:.3}, 1obj {:.3}, 2obj {:.3})",
            split.name(),
            oracle.overall,
            untrained.overall,
            untrained.levels.table.success_rate,
            untrained.levels.one_obj.success_rate,
            untrained.levels.two_obj.success_rate
        );
    }
    Ok(())
}
