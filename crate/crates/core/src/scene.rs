//! Scene model and its JSON file format.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Vec2, Workspace};
use crate::raster::PixelRect;
use crate::relation::CanonicalRelation;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: u32,
    pub name: String,
    pub aabb: Aabb,
    /// Key of this object's crop in an embedding store.
    pub crop_key: String,
    pub raster_bbox: Option<PixelRect>,
}

/// Location of the scene image and its pixel/meter mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterRef {
    pub path: PathBuf,
    pub meters_per_pixel: f64,
    /// Pixel coordinates of the workspace origin.
    pub origin_px: [f64; 2],
}

impl RasterRef {
    pub fn to_pixel(&self, p: Vec2) -> [f64; 2] {
        [
            self.origin_px[0] + p.x / self.meters_per_pixel,
            self.origin_px[1] - p.y / self.meters_per_pixel,
        ]
    }

    /// Pixel rectangle covering `b`, clamped at zero.
    pub fn rect_for(&self, b: &Aabb) -> PixelRect {
        let [u0, v0] = self.to_pixel(Vec2::new(b.min.x, b.max.y));
        let [u1, v1] = self.to_pixel(Vec2::new(b.max.x, b.min.y));
        PixelRect::new(
            u0.floor().max(0.0) as u32,
            v0.floor().max(0.0) as u32,
            u1.ceil().max(0.0) as u32,
            v1.ceil().max(0.0) as u32,
        )
    }
}

/// A tabletop: the workspace plus `N` detected objects.
///
/// Visual token `i < N` is `objects[i]`; token `N` is the whole workspace image.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub workspace: Workspace,
    pub objects: Vec<SceneObject>,
    pub workspace_crop_key: String,
    pub raster: Option<RasterRef>,
}

impl Scene {
    /// Builds a scene, sorting objects by id and checking containment and id uniqueness.
    pub fn new(
        workspace: Workspace,
        mut objects: Vec<SceneObject>,
        workspace_crop_key: impl Into<String>,
    ) -> Result<Self> {
        objects.sort_by_key(|o| o.id);
        let scene = Scene {
            workspace,
            objects,
            workspace_crop_key: workspace_crop_key.into(),
            raster: None,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.workspace.width > 0.0 && self.workspace.height > 0.0) {
            return Err(Error::InvalidInput("workspace extent must be positive".into()));
        }
        let bounds = self.workspace.bounds();
        let mut ids = HashSet::new();
        for o in &self.objects {
            if !ids.insert(o.id) {
                return Err(Error::InvalidInput(format!("duplicate object id {}", o.id)));
            }
            if !(o.aabb.min.is_finite() && o.aabb.max.is_finite()) || !bounds.contains_box(&o.aabb)
            {
                return Err(Error::InvalidInput(format!(
                    "object {} ({}) lies outside the workspace",
                    o.id, o.name
                )));
            }
        }
        Ok(())
    }

    /// N, the number of object tokens.
    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Index of the whole-workspace token.
    pub fn workspace_index(&self) -> usize {
        self.objects.len()
    }

    pub fn token_count(&self) -> usize {
        self.objects.len() + 1
    }

    pub fn obstacles(&self) -> impl Iterator<Item = &Aabb> {
        self.objects.iter().map(|o| &o.aabb)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SceneFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SceneFile::from(self))?)
    }

    /// Loads a scene file; a relative raster path resolves against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut scene = Self::from_json(&text)?;
        if let (Some(r), Some(dir)) = (scene.raster.as_mut(), path.parent()) {
            if r.path.is_relative() {
                r.path = dir.join(&r.path);
            }
        }
        Ok(scene)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SceneFile {
    workspace: Workspace,
    workspace_crop_key: String,
    objects: Vec<ObjectFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raster: Option<RasterRef>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ObjectFile {
    id: u32,
    name: String,
    aabb: [f64; 4],
    crop_key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raster_bbox: Option<[u32; 4]>,
}

impl TryFrom<SceneFile> for Scene {
    type Error = Error;

    fn try_from(f: SceneFile) -> Result<Self> {
        let objects = f
            .objects
            .into_iter()
            .map(|o| {
                let [x0, y0, x1, y1] = o.aabb;
                if !(x0 <= x1 && y0 <= y1) {
                    return Err(Error::InvalidInput(format!("object {} has an inverted aabb", o.id)));
                }
                Ok(SceneObject {
                    id: o.id,
                    name: o.name,
                    aabb: Aabb::from_extents(x0, y0, x1, y1),
                    crop_key: o.crop_key,
                    raster_bbox: o.raster_bbox.map(PixelRect::from),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut scene = Scene::new(f.workspace, objects, f.workspace_crop_key)?;
        scene.raster = f.raster;
        Ok(scene)
    }
}

impl From<&Scene> for SceneFile {
    fn from(s: &Scene) -> Self {
        SceneFile {
            workspace: s.workspace,
            workspace_crop_key: s.workspace_crop_key.clone(),
            objects: s
                .objects
                .iter()
                .map(|o| ObjectFile {
                    id: o.id,
                    name: o.name.clone(),
                    aabb: o.aabb.as_array(),
                    crop_key: o.crop_key.clone(),
                    raster_bbox: o.raster_bbox.map(Into::into),
                })
                .collect(),
            raster: s.raster.clone(),
        }
    }
}

/// A raw ⟨reference, relation⟩ text pair as extracted from an instruction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TupleFile", into = "TupleFile")]
pub struct Tuple {
    ref_expr: String,
    rel_expr: String,
}

impl Tuple {
    pub fn new(ref_expr: impl Into<String>, rel_expr: impl Into<String>) -> Result<Self> {
        let ref_expr = ref_expr.into().trim().to_string();
        let rel_expr = rel_expr.into().trim().to_string();
        if ref_expr.is_empty() || rel_expr.is_empty() {
            return Err(Error::InvalidInput(format!(
                "tuple fields must be non-empty: ({ref_expr:?}, {rel_expr:?})"
            )));
        }
        Ok(Self { ref_expr, rel_expr })
    }

    pub fn ref_expr(&self) -> &str {
        &self.ref_expr
    }

    pub fn rel_expr(&self) -> &str {
        &self.rel_expr
    }

    /// Text fed to the text encoder: relation first, then reference.
    pub fn render(&self) -> String {
        format!("{} {}", self.rel_expr, self.ref_expr)
    }

    pub fn with_relation(&self, rel_expr: &str) -> Tuple {
        Tuple {
            ref_expr: self.ref_expr.clone(),
            rel_expr: rel_expr.to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TupleFile {
    #[serde(rename = "ref")]
    ref_expr: String,
    #[serde(rename = "rel")]
    rel_expr: String,
}

impl TryFrom<TupleFile> for Tuple {
    type Error = Error;
    fn try_from(t: TupleFile) -> Result<Self> {
        Tuple::new(t.ref_expr, t.rel_expr)
    }
}

impl From<Tuple> for TupleFile {
    fn from(t: Tuple) -> Self {
        TupleFile {
            ref_expr: t.ref_expr,
            rel_expr: t.rel_expr,
        }
    }
}

/// A tuple resolved against a scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedPair {
    /// Index in `0..=N`; `N` is the workspace token.
    pub object_index: usize,
    pub relation: CanonicalRelation,
}

impl GroundedPair {
    /// Checks the index range and that regions pair only with the workspace token.
    pub fn validate(&self, scene: &Scene) -> Result<()> {
        let n = scene.workspace_index();
        let ok = if self.relation.is_region() {
            self.object_index == n
        } else {
            self.object_index < n
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "relation {} cannot anchor on token {} of a scene with {} objects",
                self.relation, self.object_index, n
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::{ObjectDir, TableRegion};

    const SCENE: &str = r#"{
        "workspace": {"width": 1.0, "height": 0.6},
        "workspace_crop_key": "ws",
        "objects": [
            {"id": 7, "name": "mug", "aabb": [0.1, 0.1, 0.2, 0.2], "crop_key": "mug7"},
            {"id": 2, "name": "plate", "aabb": [-0.3, -0.2, -0.2, -0.1], "crop_key": "plate2"}
        ]
    }"#;

    #[test]
    fn parses_and_orders_by_id() {
        let s = Scene::from_json(SCENE).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.objects[0].name, "plate");
        assert_eq!(s.workspace_index(), 2);
        assert_eq!(s.token_count(), 3);
        let back = Scene::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_object_outside_workspace() {
        let bad = SCENE.replace("[0.1, 0.1, 0.2, 0.2]", "[0.45, 0.1, 0.55, 0.2]");
        assert!(matches!(Scene::from_json(&bad), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_duplicate_ids() {
        let bad = SCENE.replace("\"id\": 7", "\"id\": 2");
        assert!(Scene::from_json(&bad).is_err());
    }

    #[test]
    fn tuple_requires_both_fields() {
        assert!(Tuple::new("", "left").is_err());
        assert!(Tuple::new("mug", "  ").is_err());
        let t = Tuple::new(" mug ", "left").unwrap();
        assert_eq!(t.render(), "left mug");
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, r#"{"ref":"mug","rel":"left"}"#);
        assert!(serde_json::from_str::<Tuple>(r#"{"ref":"","rel":"left"}"#).is_err());
    }

    #[test]
    fn grounded_pair_family_rule() {
        let s = Scene::from_json(SCENE).unwrap();
        let region = CanonicalRelation::Region(TableRegion::Middle);
        let dir = CanonicalRelation::Direction(ObjectDir::Left);
        assert!(GroundedPair { object_index: 2, relation: region }.validate(&s).is_ok());
        assert!(GroundedPair { object_index: 0, relation: region }.validate(&s).is_err());
        assert!(GroundedPair { object_index: 1, relation: dir }.validate(&s).is_ok());
        assert!(GroundedPair { object_index: 2, relation: dir }.validate(&s).is_err());
    }
}
