//! Placement fields for a table region, one object relation and a two-object
//! composition, rendered as PPM and SVG heatmaps with a sampled point each.
//!
//! cargo run --example placement_fields -- [out_dir]

use std::path::PathBuf;

use spatial_place::geometry::{Aabb, Workspace};
use spatial_place::placement::{placement_field, render_field, FieldSampler, PlacementParams};
use spatial_place::relation::{CanonicalRelation, ObjectDir, TableRegion};
use spatial_place::scene::{GroundedPair, Scene, SceneObject};

fn main() -> spatial_place::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fields".into()));
    std::fs::create_dir_all(&out).map_err(|e| spatial_place::Error::io(&out, e))?;

    let object = |id: u32, name: &str, b: [f64; 4]| SceneObject {
        id,
        name: name.into(),
        aabb: Aabb::from_extents(b[0], b[1], b[2], b[3]),
        crop_key: format!("o{id}"),
        raster_bbox: None,
    };
    let scene = Scene::new(
        Workspace::default(),
        vec![
            object(0, "mug", [-0.25, -0.15, -0.18, -0.08]),
            object(1, "plate", [0.02, -0.02, 0.12, 0.08]),
            object(2, "toy car", [0.3, 0.15, 0.4, 0.21]),
        ],
        "ws",
    )?;
    let table = scene.workspace_index();
    let cases = [
        ("region", vec![GroundedPair { object_index: table, relation: CanonicalRelation::Region(TableRegion::TopLeftCorner) }]),
        ("one_object", vec![GroundedPair { object_index: 1, relation: CanonicalRelation::Direction(ObjectDir::Right) }]),
        (
            "two_objects",
            vec![
                GroundedPair { object_index: 1, relation: CanonicalRelation::Direction(ObjectDir::Left) },
                GroundedPair { object_index: 0, relation: CanonicalRelation::Direction(ObjectDir::Behind) },
            ],
        ),
    ];
    let params = PlacementParams::default();
    for (name, pairs) in cases {
        let field = placement_field(&pairs, &scene, &params)?.normalize()?;
        let point = FieldSampler::new(&field, 7)?.sample();
        for ext in ["ppm", "svg"] {
            render_field(&field, &scene, &out.join(format!("{name}.{ext}")))?;
        }
        println!(
            "{name}: {} feasible cells, sample ({:.3}, {:.3}), images in {}",
            field.feasible_cells(),
            point.x,
            point.y,
            out.display()
        );
    }
    Ok(())
}
