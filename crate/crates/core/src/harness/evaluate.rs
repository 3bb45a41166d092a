//! Success check for a placement, written separately from the placement code
//! so the two can be cross-checked.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use super::DatasetRecord;
use crate::geometry::{Aabb, Vec2};
use crate::placement::PlacementParams;
use crate::relation::{CanonicalRelation, ObjectDir, TableRegion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    WrongRegion,
    TooClose,
    TooFar,
    WrongDirection,
    Collision,
    GroundingError,
    ParseError,
}

impl FailureReason {
    pub const ALL: [FailureReason; 7] = [
        FailureReason::WrongRegion,
        FailureReason::TooClose,
        FailureReason::TooFar,
        FailureReason::WrongDirection,
        FailureReason::Collision,
        FailureReason::GroundingError,
        FailureReason::ParseError,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub success: bool,
    pub reason: Option<FailureReason>,
}

impl EvalOutcome {
    pub const SUCCESS: EvalOutcome = EvalOutcome { success: true, reason: None };

    pub fn failure(reason: FailureReason) -> Self {
        Self { success: false, reason: Some(reason) }
    }
}

/// Distances in meters, cone half-angle in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessThresholds {
    pub too_close: f64,
    pub too_far: f64,
    pub half_angle: f64,
    pub clearance: f64,
}

impl Default for SuccessThresholds {
    fn default() -> Self {
        Self { too_close: 0.1, too_far: 0.3, half_angle: FRAC_PI_4, clearance: 0.03 }
    }
}

impl From<&PlacementParams> for SuccessThresholds {
    fn from(p: &PlacementParams) -> Self {
        Self {
            too_close: p.d_min,
            too_far: p.d_max,
            half_angle: p.cone_half_angle_deg.to_radians(),
            clearance: p.placed_radius,
        }
    }
}

fn box_distance(p: Vec2, b: &Aabb) -> f64 {
    let dx = (b.min.x - p.x).max(p.x - b.max.x).max(0.0);
    let dy = (b.min.y - p.y).max(p.y - b.max.y).max(0.0);
    dx.hypot(dy)
}

/// Column and row of a region in the 3x3 grid, counted from the front left.
fn region_cell(r: TableRegion) -> (u8, u8) {
    use TableRegion::*;
    match r {
        BottomLeftCorner => (0, 0),
        BottomPart => (1, 0),
        BottomRightCorner => (2, 0),
        LeftPart => (0, 1),
        Middle => (1, 1),
        RightPart => (2, 1),
        TopLeftCorner => (0, 2),
        TopPart => (1, 2),
        TopRightCorner => (2, 2),
    }
}

/// Edge `k` of three equal bands across `extent`; the outer edges are exact.
fn grid_edge(k: u8, extent: f64) -> f64 {
    match k {
        0 => -0.5 * extent,
        3 => 0.5 * extent,
        _ => -0.5 * extent + f64::from(k) * extent / 3.0,
    }
}

fn heading(d: ObjectDir) -> f64 {
    use ObjectDir::*;
    match d {
        Right => 0.0,
        BehindRight => FRAC_PI_4,
        Behind => FRAC_PI_2,
        BehindLeft => 3.0 * FRAC_PI_4,
        Left => PI,
        FrontLeft => -3.0 * FRAC_PI_4,
        Front => -FRAC_PI_2,
        FrontRight => -FRAC_PI_4,
    }
}

fn angle_between(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Success for `x` under the record's ground truth with the default thresholds.
pub fn evaluate_placement(x: Vec2, record: &DatasetRecord) -> EvalOutcome {
    evaluate_placement_with(x, record, &SuccessThresholds::default())
}

/// Every ground-truth constraint in order, then collisions and the table edge.
/// The first violation is the reported reason.
pub fn evaluate_placement_with(x: Vec2, record: &DatasetRecord, t: &SuccessThresholds) -> EvalOutcome {
    let scene = &record.scene;
    let (w, h) = (scene.workspace.width, scene.workspace.height);
    for (&label, &relation) in record.gt_labels.iter().zip(&record.gt_relations) {
        match relation {
            CanonicalRelation::Region(r) => {
                let (col, row) = region_cell(r);
                let (x0, x1) = (grid_edge(col, w), grid_edge(col + 1, w));
                let (y0, y1) = (grid_edge(row, h), grid_edge(row + 1, h));
                let inside = x.x >= x0 && x.x <= x1 && x.y >= y0 && x.y <= y1;
                if !inside {
                    return EvalOutcome::failure(FailureReason::WrongRegion);
                }
            }
            CanonicalRelation::Direction(d) => {
                let Some(obj) = scene.objects.get(label) else {
                    return EvalOutcome::failure(FailureReason::GroundingError);
                };
                let dist = box_distance(x, &obj.aabb);
                if dist < t.too_close {
                    return EvalOutcome::failure(FailureReason::TooClose);
                }
                if dist > t.too_far {
                    return EvalOutcome::failure(FailureReason::TooFar);
                }
                let c = obj.aabb.center();
                let bearing = (x.y - c.y).atan2(x.x - c.x);
                if angle_between(bearing, heading(d)) > t.half_angle {
                    return EvalOutcome::failure(FailureReason::WrongDirection);
                }
            }
        }
    }
    let on_table = x.x.abs() <= 0.5 * w && x.y.abs() <= 0.5 * h;
    if !on_table || scene.objects.iter().any(|o| box_distance(x, &o.aabb) < t.clearance) {
        return EvalOutcome::failure(FailureReason::Collision);
    }
    EvalOutcome::SUCCESS
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Workspace;
    use crate::harness::{Level, Split};
    use crate::relation::region_bounds;
    use crate::scene::{Scene, SceneObject, Tuple};

    fn record(level: Level, labels: Vec<usize>, relations: Vec<CanonicalRelation>) -> DatasetRecord {
        let objects = vec![SceneObject {
            id: 0,
            name: "mug".into(),
            aabb: Aabb::from_extents(0.1, 0.1, 0.2, 0.2),
            crop_key: "o0".into(),
            raster_bbox: None,
        }];
        let tuples = relations.iter().map(|r| Tuple::new("mug", r.name()).unwrap()).collect();
        DatasetRecord {
            id: 0,
            scene: Scene::new(Workspace::default(), objects, "ws").unwrap(),
            instruction: String::new(),
            gt_tuples: tuples,
            gt_labels: labels,
            gt_relations: relations,
            level,
            split: Split::TestSeen,
        }
    }

    fn left_of_mug() -> DatasetRecord {
        record(Level::OneObject, vec![0], vec![CanonicalRelation::Direction(ObjectDir::Left)])
    }

    #[test]
    fn distance_thresholds() {
        let r = left_of_mug();
        assert_eq!(evaluate_placement(Vec2::new(0.05, 0.15), &r).reason, Some(FailureReason::TooClose));
        assert_eq!(evaluate_placement(Vec2::new(-0.25, 0.15), &r).reason, Some(FailureReason::TooFar));
        assert!(evaluate_placement(Vec2::new(-0.1, 0.15), &r).success);
        assert!(evaluate_placement(Vec2::new(0.0, 0.15), &r).success);
        assert!(evaluate_placement(Vec2::new(-0.19, 0.15), &r).success);
    }

    #[test]
    fn direction_cone() {
        let r = left_of_mug();
        assert_eq!(evaluate_placement(Vec2::new(0.15, -0.05), &r).reason, Some(FailureReason::WrongDirection));
        assert!(evaluate_placement(Vec2::new(0.0, 0.05), &r).success);
        let diag = record(Level::OneObject, vec![0], vec![CanonicalRelation::Direction(ObjectDir::BehindRight)]);
        assert!(evaluate_placement(Vec2::new(0.3, 0.28), &diag).success);
        assert_eq!(evaluate_placement(Vec2::new(0.12, 0.38), &diag).reason, Some(FailureReason::WrongDirection));
    }

    #[test]
    fn region_center_succeeds() {
        let ws = Workspace::default();
        for r in TableRegion::ALL {
            let rec = record(Level::Table, vec![1], vec![CanonicalRelation::Region(r)]);
            let c = region_bounds(r, &ws).center();
            let out = evaluate_placement(c, &rec);
            let inside_mug = box_distance(c, &rec.scene.objects[0].aabb) < 0.03;
            assert_eq!(out.success, !inside_mug, "{r:?}");
        }
        let rec = record(Level::Table, vec![1], vec![CanonicalRelation::Region(TableRegion::LeftPart)]);
        assert_eq!(evaluate_placement(Vec2::new(0.4, 0.0), &rec).reason, Some(FailureReason::WrongRegion));
    }

    #[test]
    fn collisions_and_edges() {
        let rec = record(Level::Table, vec![1], vec![CanonicalRelation::Region(TableRegion::TopRightCorner)]);
        assert_eq!(evaluate_placement(Vec2::new(0.21, 0.15), &rec).reason, Some(FailureReason::Collision));
        assert_eq!(evaluate_placement(Vec2::new(0.1, 0.15), &rec).reason, Some(FailureReason::WrongRegion));
        let rec = record(Level::Table, vec![1], vec![CanonicalRelation::Region(TableRegion::Middle)]);
        assert_eq!(evaluate_placement(Vec2::new(0.15, 0.09), &rec).reason, Some(FailureReason::Collision));
        let rec = record(Level::Table, vec![1], vec![CanonicalRelation::Region(TableRegion::RightPart)]);
        assert!(evaluate_placement(Vec2::new(0.5, 0.0), &rec).success);
        let mut free = rec.clone();
        free.gt_relations.clear();
        free.gt_labels.clear();
        assert_eq!(evaluate_placement(Vec2::new(0.6, 0.0), &free).reason, Some(FailureReason::Collision));
    }
}
