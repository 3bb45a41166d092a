//! The canonical relation vocabulary: nine table regions and eight object directions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::geometry::{Aabb, Vec2, Workspace};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TableRegion {
    LeftPart,
    RightPart,
    TopPart,
    BottomPart,
    Middle,
    TopLeftCorner,
    TopRightCorner,
    BottomLeftCorner,
    BottomRightCorner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectDir {
    Left,
    Right,
    Front,
    Behind,
    FrontLeft,
    FrontRight,
    BehindLeft,
    BehindRight,
}

/// A predefined spatial relation. Regions anchor on the table itself,
/// directions on a scene object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CanonicalRelation {
    Region(TableRegion),
    Direction(ObjectDir),
}

impl TableRegion {
    pub const ALL: [TableRegion; 9] = [
        TableRegion::LeftPart,
        TableRegion::RightPart,
        TableRegion::TopPart,
        TableRegion::BottomPart,
        TableRegion::Middle,
        TableRegion::TopLeftCorner,
        TableRegion::TopRightCorner,
        TableRegion::BottomLeftCorner,
        TableRegion::BottomRightCorner,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TableRegion::LeftPart => "left part",
            TableRegion::RightPart => "right part",
            TableRegion::TopPart => "top part",
            TableRegion::BottomPart => "bottom part",
            TableRegion::Middle => "middle",
            TableRegion::TopLeftCorner => "top left corner",
            TableRegion::TopRightCorner => "top right corner",
            TableRegion::BottomLeftCorner => "bottom left corner",
            TableRegion::BottomRightCorner => "bottom right corner",
        }
    }

    /// (column, row) in the 3x3 partition; column 0 is left, row 0 is bottom.
    fn cell(self) -> (u8, u8) {
        match self {
            TableRegion::LeftPart => (0, 1),
            TableRegion::RightPart => (2, 1),
            TableRegion::TopPart => (1, 2),
            TableRegion::BottomPart => (1, 0),
            TableRegion::Middle => (1, 1),
            TableRegion::TopLeftCorner => (0, 2),
            TableRegion::TopRightCorner => (2, 2),
            TableRegion::BottomLeftCorner => (0, 0),
            TableRegion::BottomRightCorner => (2, 0),
        }
    }
}

impl ObjectDir {
    pub const ALL: [ObjectDir; 8] = [
        ObjectDir::Left,
        ObjectDir::Right,
        ObjectDir::Front,
        ObjectDir::Behind,
        ObjectDir::FrontLeft,
        ObjectDir::FrontRight,
        ObjectDir::BehindLeft,
        ObjectDir::BehindRight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectDir::Left => "left",
            ObjectDir::Right => "right",
            ObjectDir::Front => "front",
            ObjectDir::Behind => "behind",
            ObjectDir::FrontLeft => "front left",
            ObjectDir::FrontRight => "front right",
            ObjectDir::BehindLeft => "behind left",
            ObjectDir::BehindRight => "behind right",
        }
    }
}

impl CanonicalRelation {
    /// All 17 relations, regions first.
    pub fn all() -> impl Iterator<Item = CanonicalRelation> {
        TableRegion::ALL
            .into_iter()
            .map(CanonicalRelation::Region)
            .chain(ObjectDir::ALL.into_iter().map(CanonicalRelation::Direction))
    }

    pub fn name(self) -> &'static str {
        match self {
            CanonicalRelation::Region(r) => r.name(),
            CanonicalRelation::Direction(d) => d.name(),
        }
    }

    pub fn is_region(self) -> bool {
        matches!(self, CanonicalRelation::Region(_))
    }
}

impl fmt::Display for CanonicalRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CanonicalRelation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        CanonicalRelation::all()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown canonical relation {s:?}")))
    }
}

impl Serialize for CanonicalRelation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for CanonicalRelation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Unit direction for an object relation; diagonals are normalized sums.
pub fn direction_vector(dir: ObjectDir) -> Vec2 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match dir {
        ObjectDir::Left => Vec2::new(-1.0, 0.0),
        ObjectDir::Right => Vec2::new(1.0, 0.0),
        ObjectDir::Front => Vec2::new(0.0, -1.0),
        ObjectDir::Behind => Vec2::new(0.0, 1.0),
        ObjectDir::FrontLeft => Vec2::new(-s, -s),
        ObjectDir::FrontRight => Vec2::new(s, -s),
        ObjectDir::BehindLeft => Vec2::new(-s, s),
        ObjectDir::BehindRight => Vec2::new(s, s),
    }
}

/// Cell of the uniform 3x3 partition of the workspace named by `region`.
pub fn region_bounds(region: TableRegion, ws: &Workspace) -> Aabb {
    let (col, row) = region.cell();
    let b = ws.bounds();
    let cw = ws.width / 3.0;
    let ch = ws.height / 3.0;
    // outer edges come straight from the workspace so the tiling is exact
    let edge_x = |i: u8| match i {
        0 => b.min.x,
        3 => b.max.x,
        _ => b.min.x + cw * f64::from(i),
    };
    let edge_y = |i: u8| match i {
        0 => b.min.y,
        3 => b.max.y,
        _ => b.min.y + ch * f64::from(i),
    };
    Aabb::from_extents(edge_x(col), edge_y(row), edge_x(col + 1), edge_y(row + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn family_sizes() {
        assert_eq!(TableRegion::ALL.len(), 9);
        assert_eq!(ObjectDir::ALL.len(), 8);
        assert_eq!(CanonicalRelation::all().count(), 17);
    }

    #[test]
    fn names_round_trip() {
        for r in CanonicalRelation::all() {
            assert_eq!(r.name().parse::<CanonicalRelation>().unwrap(), r);
            let json = serde_json::to_string(&r).unwrap();
            assert_eq!(serde_json::from_str::<CanonicalRelation>(&json).unwrap(), r);
        }
        assert!("sideways".parse::<CanonicalRelation>().is_err());
    }

    #[test]
    fn direction_examples() {
        assert_eq!(direction_vector(ObjectDir::Front), Vec2::new(0.0, -1.0));
        assert_eq!(direction_vector(ObjectDir::Left), Vec2::new(-1.0, 0.0));
        let br = direction_vector(ObjectDir::BehindRight);
        let s = 1.0 / 2f64.sqrt();
        assert!(close(br.x, s) && close(br.y, s));
        for d in ObjectDir::ALL {
            assert!((direction_vector(d).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn region_examples() {
        let table = Workspace::default();
        let m = region_bounds(TableRegion::Middle, &table);
        assert!(close(m.min.x, -1.0 / 6.0) && close(m.min.y, -0.1));
        assert!(close(m.max.x, 1.0 / 6.0) && close(m.max.y, 0.1));

        let br = region_bounds(TableRegion::BottomRightCorner, &table);
        assert!(close(br.min.x, 1.0 / 6.0) && close(br.min.y, -0.3));
        assert!(close(br.max.x, 0.5) && close(br.max.y, -0.1));

        let square = Workspace::new(1.0, 1.0);
        let tl = region_bounds(TableRegion::TopLeftCorner, &square);
        assert!(close(tl.min.x, -0.5) && close(tl.min.y, 1.0 / 6.0));
        assert!(close(tl.max.x, -1.0 / 6.0) && close(tl.max.y, 0.5));
    }

    #[test]
    fn regions_tile_the_workspace() {
        let ws = Workspace::new(1.3, 0.7);
        let cells: Vec<Aabb> = TableRegion::ALL.iter().map(|&r| region_bounds(r, &ws)).collect();
        for (i, a) in cells.iter().enumerate() {
            for b in &cells[i + 1..] {
                assert!(!a.overlaps(b), "{a:?} overlaps {b:?}");
            }
        }
        let area: f64 = cells.iter().map(|c| c.width() * c.height()).sum();
        assert!((area - 1.3 * 0.7).abs() < 1e-12);
        let bounds = ws.bounds();
        assert!(cells.iter().all(|c| bounds.contains_box(c)));
        // every point of a fine probe grid lies in some cell
        for i in 0..=130 {
            for j in 0..=70 {
                let p = Vec2::new(-0.65 + 0.01 * f64::from(i), -0.35 + 0.01 * f64::from(j));
                let p = Vec2::new(p.x.clamp(-0.65, 0.65), p.y.clamp(-0.35, 0.35));
                assert!(cells.iter().any(|c| c.contains(p)), "{p:?} uncovered");
            }
        }
    }
}
