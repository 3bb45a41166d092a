//! Dataset directories: `scenes/NNNNN.json`, `instructions.jsonl`, `embeddings.jsonl`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetRecord, Level, Split};
use crate::embeddings::{EmbeddingStore, Encoder};
use crate::parser::{parse_instruction, Lexicon};
use crate::relation::CanonicalRelation;
use crate::scene::{Scene, Tuple};
use crate::{Error, Result};

pub const SCENES_DIR: &str = "scenes";
pub const INSTRUCTIONS_FILE: &str = "instructions.jsonl";
pub const EMBEDDINGS_FILE: &str = "embeddings.jsonl";

#[derive(Debug, Serialize, Deserialize)]
struct InstructionLine {
    id: u64,
    instruction: String,
    gt_tuples: Vec<Tuple>,
    gt_labels: Vec<usize>,
    gt_relations: Vec<CanonicalRelation>,
    level: Level,
    split: Split,
}

fn scene_path(dir: &Path, id: u64) -> std::path::PathBuf {
    dir.join(SCENES_DIR).join(format!("{id:05}.json"))
}

/// Writes scenes and instructions; an existing embeddings file is left alone.
pub fn save_dataset(dir: impl AsRef<Path>, records: &[DatasetRecord]) -> Result<()> {
    let dir = dir.as_ref();
    let scenes = dir.join(SCENES_DIR);
    fs::create_dir_all(&scenes).map_err(|e| Error::io(&scenes, e))?;
    let path = dir.join(INSTRUCTIONS_FILE);
    let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
    for r in records {
        r.scene.save(scene_path(dir, r.id))?;
        let line = InstructionLine {
            id: r.id,
            instruction: r.instruction.clone(),
            gt_tuples: r.gt_tuples.clone(),
            gt_labels: r.gt_labels.clone(),
            gt_relations: r.gt_relations.clone(),
            level: r.level,
            split: r.split,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Reads every record, validating each.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<DatasetRecord>> {
    let dir = dir.as_ref();
    let path = dir.join(INSTRUCTIONS_FILE);
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let l: InstructionLine = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), n + 1)))?;
        let record = DatasetRecord {
            id: l.id,
            scene: Scene::load(scene_path(dir, l.id))?,
            instruction: l.instruction,
            gt_tuples: l.gt_tuples,
            gt_labels: l.gt_labels,
            gt_relations: l.gt_relations,
            level: l.level,
            split: l.split,
        };
        record.validate()?;
        out.push(record);
    }
    Ok(out)
}

/// Embeds everything an evaluation over `records` will look up: each crop, the
/// workspace image, ground-truth tuple texts and the grammar parse's tuple texts.
pub fn build_embedding_store(records: &[DatasetRecord], encoder: &dyn Encoder, lex: &Lexicon) -> Result<EmbeddingStore> {
    let mut store = EmbeddingStore::new();
    for r in records {
        for i in 0..r.scene.token_count() {
            let key = r.scene.objects.get(i).map_or(&r.scene.workspace_crop_key, |o| &o.crop_key);
            if !store.contains(key) {
                store.insert(key.clone(), encoder.embed_visual(&r.scene, i)?)?;
            }
        }
        let parsed = parse_instruction(&r.instruction, lex).map(|p| p.tuples).unwrap_or_default();
        for t in r.gt_tuples.iter().chain(&parsed) {
            let text = t.render();
            if !store.contains(&text) {
                let e = encoder.embed_text(&text)?;
                store.insert(text, e)?;
            }
        }
    }
    Ok(store)
}
