mod common;

use proptest::prelude::*;

use spatial_place::adapter::{AdapterConfig, AdapterPair};
use spatial_place::embeddings::{SyntheticConfig, SyntheticWorld};
use spatial_place::grounding::ground_all;
use spatial_place::harness::{gen_dataset, run_eval, DatasetSpec, EvalConfig, InstructionTemplates, ObjectVocabulary, Pipeline, Split};
use spatial_place::parser::{parse_instruction, Lexicon};
use spatial_place::scene::Scene;

const NAMES: [&str; 5] = ["mug", "plate", "yellow banana", "toy car", "black and blue sneakers"];

fn world() -> SyntheticWorld {
    SyntheticWorld::new(&NAMES, SyntheticConfig { dim: 64, ..Default::default() })
}

fn base_scene() -> Scene {
    let objects = NAMES
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let x = -0.45 + 0.19 * i as f64;
            common::object(i as u32, n, [x, -0.05, x + 0.06, 0.01])
        })
        .collect();
    common::scene(objects)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn relabeling_objects_relabels_groundings(perm in Just((0..5u32).collect::<Vec<_>>()).prop_shuffle(), seed in 0u64..50) {
        let pair = AdapterPair::init(&AdapterConfig { dim: 64, hidden: 16, ..Default::default() }, seed).unwrap();
        let enc = world();
        let lex = Lexicon::default();
        let parsed = parse_instruction("put it left to the toy car and behind the black and blue sneakers.", &lex).unwrap();

        let scene = base_scene();
        let mut objects = scene.objects.clone();
        for (o, &id) in objects.iter_mut().zip(&perm) {
            o.id = id;
        }
        let shuffled = common::scene(objects);

        let a = ground_all(&scene, &parsed, &pair, &enc, &lex).unwrap();
        let b = ground_all(&shuffled, &parsed, &pair, &enc, &lex).unwrap();
        for (ga, gb) in a.iter().zip(&b) {
            prop_assert_eq!(ga.relation, gb.relation);
            prop_assert_eq!(&scene.objects[ga.object_index].name, &shuffled.objects[gb.object_index].name);
        }
    }
}

#[test]
fn conjunctions_inside_names_survive() {
    let lex = Lexicon::default();
    let p = parse_instruction("put it right to the black and blue sneakers and in front of the mug.", &lex).unwrap();
    let refs: Vec<&str> = p.tuples.iter().map(|t| t.ref_expr()).collect();
    assert_eq!(refs, ["black and blue sneakers", "mug"]);
}

#[test]
fn oracle_groundings_always_succeed() {
    let spec = DatasetSpec::scaled(0, 60, 17);
    let records = gen_dataset(&spec, &ObjectVocabulary::default(), &InstructionTemplates::default(), &Lexicon::default()).unwrap();
    for split in [Split::TestSeen, Split::TestUnseenObj, Split::TestUnseenInst] {
        let subset: Vec<_> = records.iter().filter(|r| r.split == split).cloned().collect();
        let report = run_eval(&Pipeline::Oracle, &subset, &EvalConfig::default());
        assert_eq!(report.successes, report.count, "{split:?}: {:?}", report.failures);
    }
}
