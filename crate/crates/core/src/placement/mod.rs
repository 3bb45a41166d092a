//! Placement distributions over a discretized workspace.
//!
//! Each grounded pair contributes a Gaussian truncated to its constraint set;
//! several pairs are averaged and their masks intersected. Object footprints
//! are masked with a clearance radius before sampling.

mod render;

pub use render::{render_field, render_ppm, render_svg, RenderFormat};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{aabb_distance, Aabb, Vec2, Workspace};
use crate::relation::{direction_vector, region_bounds, CanonicalRelation};
use crate::scene::{GroundedPair, Scene};
use crate::{Error, Result};

/// Predicates are evaluated this far inside their boundary, so that points they
/// accept also pass a boundary-inclusive check computed by different arithmetic.
const INNER_MARGIN: f64 = 1e-9;
const JITTER_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlacementParams {
    /// Grid cell size in meters.
    pub resolution: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub cone_half_angle_deg: f64,
    pub object_sigma: f64,
    /// Distance of the Gaussian mean from the reference boundary.
    pub mean_offset: f64,
    /// Radius of the placed object's footprint.
    pub placed_radius: f64,
}

impl Default for PlacementParams {
    fn default() -> Self {
        Self {
            resolution: 0.01,
            d_min: 0.1,
            d_max: 0.3,
            cone_half_angle_deg: 45.0,
            object_sigma: 0.05,
            mean_offset: 0.2,
            placed_radius: 0.03,
        }
    }
}

impl PlacementParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.d_min < self.d_max && self.d_min >= 0.0) {
            return Err(Error::InvalidInput(
                "placement needs resolution > 0 and 0 <= d_min < d_max".into(),
            ));
        }
        if !(self.object_sigma > 0.0 && self.cone_half_angle_deg > 0.0 && self.placed_radius >= 0.0) {
            return Err(Error::InvalidInput("placement sigma, cone and radius must be positive".into()));
        }
        Ok(())
    }
}

/// A constraint a placement must satisfy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintPredicate {
    TableRegion {
        cell: Aabb,
    },
    ObjectRelation {
        reference: Aabb,
        direction: Vec2,
        d_min: f64,
        d_max: f64,
        half_angle_deg: f64,
    },
}

impl ConstraintPredicate {
    pub fn admits(&self, p: Vec2) -> bool {
        match self {
            ConstraintPredicate::TableRegion { cell } => {
                p.x >= cell.min.x + INNER_MARGIN
                    && p.x <= cell.max.x - INNER_MARGIN
                    && p.y >= cell.min.y + INNER_MARGIN
                    && p.y <= cell.max.y - INNER_MARGIN
            }
            ConstraintPredicate::ObjectRelation {
                reference,
                direction,
                d_min,
                d_max,
                half_angle_deg,
            } => {
                let d = aabb_distance(p, reference);
                if d < d_min + INNER_MARGIN || d > d_max - INNER_MARGIN {
                    return false;
                }
                let offset = p - reference.center();
                let len = offset.norm();
                let cos_limit = (half_angle_deg.to_radians() - INNER_MARGIN).cos();
                len > 0.0 && offset.dot(*direction) >= cos_limit * len
            }
        }
    }
}

/// Collision and workspace limits applied after composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clearance {
    pub obstacles: Vec<Aabb>,
    pub radius: f64,
    pub bounds: Aabb,
}

impl Clearance {
    pub fn admits(&self, p: Vec2) -> bool {
        self.bounds.contains(p)
            && self
                .obstacles
                .iter()
                .all(|b| aabb_distance(p, b) >= self.radius + INNER_MARGIN)
    }
}

/// Probability mass over grid cells with a feasibility mask.
///
/// Cells are row-major with row 0 at the front (lowest y).
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementField {
    pub workspace: Workspace,
    pub resolution: f64,
    pub width_cells: usize,
    pub height_cells: usize,
    pub probs: Vec<f64>,
    pub mask: Vec<bool>,
    pub constraints: Vec<ConstraintPredicate>,
    pub clearance: Option<Clearance>,
}

fn gaussian(p: Vec2, mean: Vec2, sx: f64, sy: f64) -> f64 {
    let zx = (p.x - mean.x) / sx;
    let zy = (p.y - mean.y) / sy;
    (-0.5 * (zx * zx + zy * zy)).exp() / (2.0 * std::f64::consts::PI * sx * sy)
}

impl PlacementField {
    /// Every cell feasible, zero mass.
    pub fn empty(workspace: Workspace, resolution: f64) -> Self {
        let width_cells = ((workspace.width / resolution).round() as usize).max(1);
        let height_cells = ((workspace.height / resolution).round() as usize).max(1);
        let n = width_cells * height_cells;
        Self {
            workspace,
            resolution,
            width_cells,
            height_cells,
            probs: vec![0.0; n],
            mask: vec![true; n],
            constraints: Vec::new(),
            clearance: None,
        }
    }

    /// Equal mass on every cell.
    pub fn uniform(workspace: Workspace, resolution: f64) -> Self {
        let mut f = Self::empty(workspace, resolution);
        let n = f.probs.len() as f64;
        f.probs.iter_mut().for_each(|p| *p = 1.0 / n);
        f
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (
            self.workspace.width / self.width_cells as f64,
            self.workspace.height / self.height_cells as f64,
        )
    }

    pub fn cell_center(&self, idx: usize) -> Vec2 {
        let (i, j) = (idx % self.width_cells, idx / self.width_cells);
        let (cw, ch) = self.cell_size();
        Vec2::new(
            -0.5 * self.workspace.width + (i as f64 + 0.5) * cw,
            -0.5 * self.workspace.height + (j as f64 + 0.5) * ch,
        )
    }

    pub fn cell_bounds(&self, idx: usize) -> Aabb {
        let c = self.cell_center(idx);
        let (cw, ch) = self.cell_size();
        Aabb::from_extents(c.x - 0.5 * cw, c.y - 0.5 * ch, c.x + 0.5 * cw, c.y + 0.5 * ch)
    }

    /// True when `p` satisfies every constraint and the clearance, if any.
    pub fn admits(&self, p: Vec2) -> bool {
        self.workspace.bounds().contains(p)
            && self.constraints.iter().all(|c| c.admits(p))
            && self.clearance.as_ref().is_none_or(|c| c.admits(p))
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn feasible_cells(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    fn truncated_gaussian(
        workspace: Workspace,
        params: &PlacementParams,
        predicate: ConstraintPredicate,
        mean: Vec2,
        sx: f64,
        sy: f64,
    ) -> Self {
        let mut f = Self::empty(workspace, params.resolution);
        for idx in 0..f.len() {
            let c = f.cell_center(idx);
            let ok = predicate.admits(c);
            f.mask[idx] = ok;
            f.probs[idx] = if ok { gaussian(c, mean, sx, sy) } else { 0.0 };
        }
        f.constraints.push(predicate);
        f
    }

    /// Zeroes mass wherever the mask is off.
    fn enforce_mask(&mut self) {
        for (p, &m) in self.probs.iter_mut().zip(&self.mask) {
            if !m {
                *p = 0.0;
            }
        }
    }

    /// Scales mass to sum to one.
    pub fn normalize(&self) -> Result<PlacementField> {
        let total = self.total_mass();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InfeasiblePlacement);
        }
        let mut f = self.clone();
        f.probs.iter_mut().for_each(|p| *p /= total);
        Ok(f)
    }
}

/// Unnormalized, pre-collision field for one grounded pair.
pub fn field_for_pair(g: &GroundedPair, scene: &Scene, params: &PlacementParams) -> Result<PlacementField> {
    params.validate()?;
    g.validate(scene)?;
    match g.relation {
        CanonicalRelation::Region(region) => {
            let cell = region_bounds(region, &scene.workspace);
            Ok(PlacementField::truncated_gaussian(
                scene.workspace,
                params,
                ConstraintPredicate::TableRegion { cell },
                cell.center(),
                cell.width() / 4.0,
                cell.height() / 4.0,
            ))
        }
        CanonicalRelation::Direction(dir) => {
            let reference = scene.objects[g.object_index].aabb;
            let direction = direction_vector(dir);
            let mean = reference.boundary_point(direction) + direction * params.mean_offset;
            Ok(PlacementField::truncated_gaussian(
                scene.workspace,
                params,
                ConstraintPredicate::ObjectRelation {
                    reference,
                    direction,
                    d_min: params.d_min,
                    d_max: params.d_max,
                    half_angle_deg: params.cone_half_angle_deg,
                },
                mean,
                params.object_sigma,
                params.object_sigma,
            ))
        }
    }
}

/// Mean of the masses, intersection of the masks.
pub fn compose_fields(fields: &[PlacementField]) -> Result<PlacementField> {
    let first = fields
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot compose zero fields".into()))?;
    if let Some(f) = fields.iter().find(|f| {
        f.workspace != first.workspace
            || f.resolution != first.resolution
            || f.width_cells != first.width_cells
            || f.height_cells != first.height_cells
    }) {
        return Err(Error::Shape(format!(
            "cannot compose a {}x{} grid with a {}x{} grid",
            f.width_cells, f.height_cells, first.width_cells, first.height_cells
        )));
    }
    let k = fields.len() as f64;
    let mut out = PlacementField::empty(first.workspace, first.resolution);
    for idx in 0..out.len() {
        out.probs[idx] = fields.iter().map(|f| f.probs[idx]).sum::<f64>() / k;
        out.mask[idx] = fields.iter().all(|f| f.mask[idx]);
    }
    out.constraints = fields.iter().flat_map(|f| f.constraints.iter().cloned()).collect();
    out.clearance = fields.iter().find_map(|f| f.clearance.clone());
    out.enforce_mask();
    Ok(out)
}

/// Masks cells closer than `radius` to any object, or outside the workspace.
pub fn apply_collision_mask(f: &PlacementField, scene: &Scene, radius: f64) -> PlacementField {
    let clearance = Clearance {
        obstacles: scene.obstacles().copied().collect(),
        radius,
        bounds: scene.workspace.bounds(),
    };
    let mut out = f.clone();
    for idx in 0..out.len() {
        if out.mask[idx] && !clearance.admits(out.cell_center(idx)) {
            out.mask[idx] = false;
        }
    }
    out.clearance = Some(clearance);
    out.enforce_mask();
    out
}

/// Seeded sampler over a normalized field.
#[derive(Debug, Clone)]
pub struct FieldSampler<'a> {
    field: &'a PlacementField,
    cdf: Vec<f64>,
    rng: ChaCha8Rng,
}

impl<'a> FieldSampler<'a> {
    pub fn new(field: &'a PlacementField, seed: u64) -> Result<Self> {
        let total = field.total_mass();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InfeasiblePlacement);
        }
        let mut acc = 0.0;
        let cdf = field
            .probs
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();
        Ok(Self {
            field,
            cdf,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Index of the next sampled cell (inverse CDF over row-major order).
    pub fn sample_cell(&mut self) -> usize {
        let u: f64 = self.rng.random::<f64>() * self.cdf.last().copied().unwrap_or(1.0);
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        // skip zero-mass cells that share a cdf value with their predecessor
        let mut i = idx;
        while self.field.probs[i] <= 0.0 && i + 1 < self.cdf.len() {
            i += 1;
        }
        if self.field.probs[i] <= 0.0 {
            i = self.field.probs.iter().rposition(|&p| p > 0.0).expect("positive mass exists");
        }
        i
    }

    /// A point uniformly jittered inside a sampled cell, restricted to where the
    /// field's constraints and clearance hold.
    pub fn sample(&mut self) -> Vec2 {
        let idx = self.sample_cell();
        let cell = self.field.cell_bounds(idx);
        for _ in 0..JITTER_ATTEMPTS {
            let p = Vec2::new(
                self.rng.random_range(cell.min.x..cell.max.x),
                self.rng.random_range(cell.min.y..cell.max.y),
            );
            if self.field.admits(p) {
                return p;
            }
        }
        self.field.cell_center(idx)
    }
}

/// Normalizes `f` and draws one placement.
pub fn normalize_and_sample(f: &PlacementField, seed: u64) -> Result<Vec2> {
    let normalized = f.normalize()?;
    Ok(FieldSampler::new(&normalized, seed)?.sample())
}

/// The full field for a set of grounded pairs: per-pair fields, composition, collision mask.
pub fn placement_field(grounded: &[GroundedPair], scene: &Scene, params: &PlacementParams) -> Result<PlacementField> {
    let fields = grounded
        .iter()
        .map(|g| field_for_pair(g, scene, params))
        .collect::<Result<Vec<_>>>()?;
    let composed = compose_fields(&fields)?;
    Ok(apply_collision_mask(&composed, scene, params.placed_radius))
}

/// JSON dump of a field's grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDump {
    pub resolution: f64,
    pub width_cells: usize,
    pub height_cells: usize,
    pub probs: Vec<f64>,
    pub mask: Vec<bool>,
}

impl From<&PlacementField> for FieldDump {
    fn from(f: &PlacementField) -> Self {
        Self {
            resolution: f.resolution,
            width_cells: f.width_cells,
            height_cells: f.height_cells,
            probs: f.probs.clone(),
            mask: f.mask.clone(),
        }
    }
}
