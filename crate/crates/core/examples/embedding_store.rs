//! Precompute tokens for a scene, persist them in both store formats and
//! serve them back through a store-backed encoder.
//!
//! cargo run --example embedding_store

use spatial_place::embeddings::{EmbeddingStore, Encoder, StoreEncoder, SyntheticConfig, SyntheticWorld};
use spatial_place::geometry::{Aabb, Workspace};
use spatial_place::scene::{Scene, SceneObject};

fn main() -> spatial_place::Result<()> {
    let names = ["red mug", "plate", "toy car"];
    let world = SyntheticWorld::new(&names, SyntheticConfig::default());
    let objects = names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let x = -0.3 + 0.25 * i as f64;
            SceneObject {
                id: i as u32,
                name: n.to_string(),
                aabb: Aabb::from_extents(x, 0.0, x + 0.08, 0.08),
                crop_key: format!("demo/{i}"),
                raster_bbox: None,
            }
        })
        .collect();
    let scene = Scene::new(Workspace::default(), objects, "demo/ws")?;

    let mut store = EmbeddingStore::new();
    for (i, o) in scene.objects.iter().enumerate() {
        store.insert(&o.crop_key, world.embed_visual(&scene, i)?)?;
    }
    store.insert(&scene.workspace_crop_key, world.embed_visual(&scene, scene.len())?)?;
    for text in ["red mug left", "plate behind", "toy car front"] {
        store.insert(text, world.embed_text(text)?)?;
    }

    let dir = std::env::temp_dir().join("spatial-place-store");
    std::fs::create_dir_all(&dir).map_err(|e| spatial_place::Error::io(&dir, e))?;
    for name in ["tokens.jsonl", "tokens.bin"] {
        let path = dir.join(name);
        store.save(&path)?;
        let back = EmbeddingStore::load(&path)?;
        println!("{}: {} keys, dim {:?}, identical {}", path.display(), back.len(), back.dim(), back == store);
    }

    let enc = StoreEncoder::new(store);
    let mug = enc.embed_visual(&scene, 0)?;
    for text in ["red mug left", "plate behind", "toy car front"] {
        println!("cos(mug crop, {text:?}) = {:.3}", mug.cosine(&enc.embed_text(text)?));
    }
    println!("missing key: {}", enc.embed_text("bowl right").unwrap_err());
    Ok(())
}
