//! Briefly train the adapters, then ground an instruction against one scene and
//! print the reference distribution per tuple.
//!
//! cargo run --release --example ground_scene

use spatial_place::adapter::{prepare_samples, train_prepared, AdapterConfig, AdapterPair, TrainConfig};
use spatial_place::embeddings::{tokenize_scene, SyntheticConfig, SyntheticWorld};
use spatial_place::harness::{gen_dataset, DatasetRecord, DatasetSpec, InstructionTemplates, Level, ObjectVocabulary, Split};
use spatial_place::parser::Lexicon;
use spatial_place::pipeline::ModelAssets;

fn main() -> spatial_place::Result<()> {
    let lex = Lexicon::default();
    let vocab = ObjectVocabulary::default();
    let spec = DatasetSpec::scaled(100, 20, 4).only(&[Split::Train, Split::TestSeen]);
    let records = gen_dataset(&spec, &vocab, &InstructionTemplates::default(), &lex)?;
    let names: Vec<&str> = vocab.all().collect();
    let world = SyntheticWorld::new(&names, SyntheticConfig { seed: 4, ..Default::default() });

    let train: Vec<_> = records.iter().filter(|r| r.split == Split::Train).map(DatasetRecord::train_sample).collect();
    let data = prepare_samples(&world, &train)?;
    let init = AdapterPair::init(&AdapterConfig::default(), 4)?;
    let pair = train_prepared(&init, &data, &TrainConfig { steps: 3000, seed: 4, ..Default::default() })?.pair;

    let record = records
        .iter()
        .find(|r| r.split == Split::TestSeen && r.level == Level::TwoObjects)
        .expect("a two-object test record");
    let assets = ModelAssets { pair: &pair, encoder: &world, lexicon: &lex, llm: None };
    let parsed = assets.parse(&record.instruction)?;
    let (visual, textual) = tokenize_scene(&world, &record.scene, &parsed.tuples)?;
    let probs = pair.probabilities(&visual, &textual)?;

    println!("{}", record.instruction);
    let mut labels: Vec<String> = record.scene.objects.iter().map(|o| o.name.clone()).collect();
    labels.push("<workspace>".into());
    for ((t, g), row) in parsed.tuples.iter().zip(assets.ground(&record.scene, &parsed)?).zip(probs.iter_rows()) {
        println!("({} | {}) -> {} / {}", t.ref_expr(), t.rel_expr(), labels[g.object_index], g.relation);
        for (name, p) in labels.iter().zip(row) {
            println!("    {p:.3}  {name}");
        }
    }
    println!("expected: {:?}", record.gt_labels.iter().map(|&i| &labels[i]).collect::<Vec<_>>());
    Ok(())
}
