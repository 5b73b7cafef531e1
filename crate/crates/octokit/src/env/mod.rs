//! Continuous-pose navigation environment over procedural occupancy grids.
//!
//! A [`Scene`] is a boolean navigable mask plus semantic objects placed as
//! vertical cylinders. The agent is a point at a continuous [`Pose`];
//! motion is collision-clamped ([`step`]), geodesic distances come from an
//! 8-connected grid metric ([`geodesic`]), and observations are fixed-length
//! feature vectors ([`observe`]) standing in for camera frames.
//!
//! Scenes are immutable after construction; stepping and observation are
//! pure functions of `(scene, pose)`.

mod gen;
pub mod geodesic;
mod observe;
mod raycast;

pub use gen::{gen_scene, SceneParams, CATEGORIES};
pub use geodesic::{geodesic_distance, DistanceField, GridDist};
pub use observe::{observe, ObsLayout, ObservationFeature};
pub use raycast::{frame_coverage, visible};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default camera height above the floor, meters.
pub const CAMERA_HEIGHT: f64 = 1.25;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid scene parameters: {0}")]
    InvalidParams(String),
    #[error("scene generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: u32, reason: String },
    #[error("pose ({x:.3}, {y:.3}) is outside the scene bounds")]
    OutOfBounds { x: f64, y: f64 },
    #[error("no navigable path between the given poses")]
    Unreachable,
    #[error("malformed scene data: {0}")]
    Malformed(String),
}

/// Agent pose: planar position, camera height and heading in degrees.
///
/// Heading is normalized to `[0, 360)`; the facing direction is
/// `(cos h, sin h)` and turning right increases the heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub height: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose {
            x,
            y,
            height: CAMERA_HEIGHT,
            heading: normalize_heading(heading),
        }
    }

    pub fn with_height(mut self, height: f64) -> Self {
        self.height = height;
        self
    }

    /// Unit facing vector `(cos h, sin h)`.
    pub fn direction(&self) -> (f64, f64) {
        let r = self.heading.to_radians();
        (r.cos(), r.sin())
    }

    /// Bearing of a point relative to the heading, in degrees within
    /// `(-180, 180]`. Negative bearings are to the agent's left.
    pub fn relative_bearing(&self, x: f64, y: f64) -> f64 {
        let abs = (y - self.y).atan2(x - self.x).to_degrees();
        normalize_relative(abs - self.heading)
    }

    pub fn ground_distance(&self, x: f64, y: f64) -> f64 {
        ((self.x - x).powi(2) + (self.y - y).powi(2)).sqrt()
    }
}

/// Normalizes a heading to `[0, 360)`.
pub fn normalize_heading(deg: f64) -> f64 {
    let mut h = deg % 360.0;
    if h < 0.0 {
        h += 360.0;
    }
    if h == 360.0 {
        0.0
    } else {
        h
    }
}

/// Normalizes a relative angle to `(-180, 180]`.
pub fn normalize_relative(deg: f64) -> f64 {
    let mut a = deg % 360.0;
    if a <= -180.0 {
        a += 360.0;
    }
    if a > 180.0 {
        a -= 360.0;
    }
    a
}

/// Forward-step magnitudes, centimeters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ForwardCm {
    Cm25,
    Cm50,
    Cm75,
}

impl ForwardCm {
    pub const ALL: [ForwardCm; 3] = [ForwardCm::Cm25, ForwardCm::Cm50, ForwardCm::Cm75];

    pub fn meters(self) -> f64 {
        match self {
            ForwardCm::Cm25 => 0.25,
            ForwardCm::Cm50 => 0.50,
            ForwardCm::Cm75 => 0.75,
        }
    }

    pub fn centimeters(self) -> u32 {
        match self {
            ForwardCm::Cm25 => 25,
            ForwardCm::Cm50 => 50,
            ForwardCm::Cm75 => 75,
        }
    }
}

/// Turn magnitudes, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TurnDeg {
    Deg15,
    Deg30,
    Deg45,
    Deg90,
}

impl TurnDeg {
    pub const ALL: [TurnDeg; 4] = [
        TurnDeg::Deg15,
        TurnDeg::Deg30,
        TurnDeg::Deg45,
        TurnDeg::Deg90,
    ];

    pub fn degrees(self) -> f64 {
        match self {
            TurnDeg::Deg15 => 15.0,
            TurnDeg::Deg30 => 30.0,
            TurnDeg::Deg45 => 45.0,
            TurnDeg::Deg90 => 90.0,
        }
    }
}

/// Low-level agent action with a binned magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    MoveForward(ForwardCm),
    TurnLeft(TurnDeg),
    TurnRight(TurnDeg),
    Stop,
}

impl Action {
    pub fn is_stop(self) -> bool {
        matches!(self, Action::Stop)
    }

    /// True for actions that do not change the planar position.
    pub fn is_non_moving(self) -> bool {
        !matches!(self, Action::MoveForward(_))
    }

    /// Lowercase phrase, e.g. `move forward 50 cm` / `turn left 30 degrees`.
    pub fn phrase(self) -> String {
        match self {
            Action::MoveForward(m) => format!("move forward {} cm", m.centimeters()),
            Action::TurnLeft(d) => format!("turn left {} degrees", d.degrees() as u32),
            Action::TurnRight(d) => format!("turn right {} degrees", d.degrees() as u32),
            Action::Stop => "stop".to_string(),
        }
    }
}

/// A semantic object grounding ObjNav / instance-image targets.
///
/// Objects are vertical cylinders footed on the floor; their footprint
/// cells are carved out of the navigable mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticObject {
    pub id: u32,
    pub category: String,
    pub center: (f64, f64),
    pub radius: f64,
    pub top_height: f64,
}

/// Immutable navigable world: occupancy grid plus semantic objects.
#[derive(Debug, Clone)]
pub struct Scene {
    width: usize,
    height: usize,
    resolution: f64,
    seed: u64,
    navigable: Vec<bool>,
    /// Cells carved by some object footprint (treated as walls for
    /// navigation, as cylinders for ray casting).
    object_cell: Vec<bool>,
    /// Per-object footprint cell indices, parallel to `objects`.
    footprints: Vec<Vec<u32>>,
    objects: Vec<SemanticObject>,
}

impl Scene {
    /// Builds a scene from a mask that already excludes object footprints.
    pub(crate) fn from_parts(
        width: usize,
        height: usize,
        resolution: f64,
        seed: u64,
        navigable: Vec<bool>,
        objects: Vec<SemanticObject>,
    ) -> Self {
        assert_eq!(navigable.len(), width * height);
        let mut scene = Scene {
            width,
            height,
            resolution,
            seed,
            navigable,
            object_cell: vec![false; width * height],
            footprints: Vec::new(),
            objects: Vec::new(),
        };
        for obj in objects {
            let cells = scene.footprint_cells(&obj);
            for &c in &cells {
                scene.navigable[c as usize] = false;
                scene.object_cell[c as usize] = true;
            }
            scene.footprints.push(cells);
            scene.objects.push(obj);
        }
        scene
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn objects(&self) -> &[SemanticObject] {
        &self.objects
    }

    pub fn object(&self, id: u32) -> Option<&SemanticObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Width and height in meters.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    pub fn cell_index(&self, cx: usize, cy: usize) -> usize {
        cy * self.width + cx
    }

    pub fn cell_xy(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    /// Grid cell containing a point, or `None` outside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if x < 0.0 || y < 0.0 {
            return None;
        }
        let cx = (x / self.resolution).floor() as usize;
        let cy = (y / self.resolution).floor() as usize;
        if cx >= self.width || cy >= self.height {
            None
        } else {
            Some((cx, cy))
        }
    }

    pub fn cell_center(&self, idx: usize) -> (f64, f64) {
        let (cx, cy) = self.cell_xy(idx);
        (
            (cx as f64 + 0.5) * self.resolution,
            (cy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn is_navigable_cell(&self, idx: usize) -> bool {
        self.navigable[idx]
    }

    /// True if the point lies inside the grid on a navigable cell.
    pub fn is_navigable_point(&self, x: f64, y: f64) -> bool {
        match self.cell_of(x, y) {
            Some((cx, cy)) => self.navigable[self.cell_index(cx, cy)],
            None => false,
        }
    }

    pub fn is_object_cell(&self, idx: usize) -> bool {
        self.object_cell[idx]
    }

    pub fn in_bounds(&self, x: f64, y: f64) -> bool {
        self.cell_of(x, y).is_some()
    }

    /// Indices of all navigable cells in row-major order.
    pub fn navigable_cells(&self) -> Vec<usize> {
        (0..self.cell_count())
            .filter(|&i| self.navigable[i])
            .collect()
    }

    /// Footprint cell indices of one object (cells whose center is within
    /// the object radius, always including the center cell).
    fn footprint_cells(&self, obj: &SemanticObject) -> Vec<u32> {
        let mut cells = Vec::new();
        let (ox, oy) = obj.center;
        let r_cells = (obj.radius / self.resolution).ceil() as i64 + 1;
        let (ccx, ccy) = match self.cell_of(ox, oy) {
            Some(c) => c,
            None => return cells,
        };
        for dy in -r_cells..=r_cells {
            for dx in -r_cells..=r_cells {
                let cx = ccx as i64 + dx;
                let cy = ccy as i64 + dy;
                if cx < 0 || cy < 0 || cx >= self.width as i64 || cy >= self.height as i64 {
                    continue;
                }
                let idx = self.cell_index(cx as usize, cy as usize);
                let (px, py) = self.cell_center(idx);
                let within =
                    (px - ox).powi(2) + (py - oy).powi(2) <= obj.radius * obj.radius;
                if within || (dx == 0 && dy == 0) {
                    cells.push(idx as u32);
                }
            }
        }
        cells
    }

    pub(crate) fn footprint_of(&self, object_id: u32) -> &[u32] {
        let pos = self
            .objects
            .iter()
            .position(|o| o.id == object_id)
            .expect("unknown object id");
        &self.footprints[pos]
    }

    /// Nearest navigable cell to a point, by Euclidean distance between the
    /// point and cell centers (ties broken by cell index).
    pub fn nearest_navigable_cell(&self, x: f64, y: f64) -> Option<usize> {
        let (cx, cy) = self.cell_of(
            x.clamp(0.0, (self.width as f64 - 0.5) * self.resolution),
            y.clamp(0.0, (self.height as f64 - 0.5) * self.resolution),
        )?;
        let start = self.cell_index(cx, cy);
        if self.navigable[start] {
            return Some(start);
        }
        let mut best: Option<(f64, usize)> = None;
        let max_ring = self.width.max(self.height) as i64;
        for ring in 1..=max_ring {
            for dy in -ring..=ring {
                for dx in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue;
                    }
                    let nx = cx as i64 + dx;
                    let ny = cy as i64 + dy;
                    if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
                        continue;
                    }
                    let idx = self.cell_index(nx as usize, ny as usize);
                    if !self.navigable[idx] {
                        continue;
                    }
                    let (px, py) = self.cell_center(idx);
                    let d2 = (px - x).powi(2) + (py - y).powi(2);
                    match best {
                        Some((bd, bi)) if (d2, idx) >= (bd, bi) => {}
                        _ => best = Some((d2, idx)),
                    }
                }
            }
            // A hit in ring k can only be beaten inside ring k+1.
            if let Some((bd, _)) = best {
                let safe = (ring as f64 - 1.0) * self.resolution;
                if bd.sqrt() <= safe {
                    break;
                }
            }
        }
        best.map(|(_, i)| i)
    }
}

/// Applies an action to a pose. Collisions clamp the forward motion to the
/// last collision-free sample; turning and `Stop` never fail.
pub fn step(scene: &Scene, pose: &Pose, action: Action) -> Pose {
    match action {
        Action::Stop => *pose,
        Action::TurnLeft(d) => Pose {
            heading: normalize_heading(pose.heading - d.degrees()),
            ..*pose
        },
        Action::TurnRight(d) => Pose {
            heading: normalize_heading(pose.heading + d.degrees()),
            ..*pose
        },
        Action::MoveForward(m) => {
            let dist = m.meters();
            let (dx, dy) = pose.direction();
            let h = scene.resolution() / 2.0;
            let n = (dist / h).floor() as usize;
            let mut best = 0.0;
            let mut ts: Vec<f64> = (1..=n).map(|k| k as f64 * h).collect();
            if ts.last().map_or(true, |&t| t < dist) {
                ts.push(dist);
            }
            for t in ts {
                if scene.is_navigable_point(pose.x + dx * t, pose.y + dy * t) {
                    best = t;
                } else {
                    break;
                }
            }
            Pose {
                x: pose.x + dx * best,
                y: pose.y + dy * best,
                ..*pose
            }
        }
    }
}

/// Serialized scene: `{seed, resolution, width, height, navigable_rle,
/// objects[]}`. The RLE starts with the value of the first run (0/1)
/// followed by row-major run lengths; footprint carving is re-derived on
/// load, so the round trip is lossless.
#[derive(Debug, Serialize, Deserialize)]
pub struct SceneRecord {
    pub seed: u64,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub navigable_rle: Vec<u32>,
    pub objects: Vec<SemanticObject>,
}

impl SceneRecord {
    pub fn from_scene(scene: &Scene) -> Self {
        // Encode the pre-carving mask: object footprints become walls again
        // on load, so store navigable-or-object-cell.
        let mut rle = Vec::new();
        let mut value = (scene.navigable[0] || scene.object_cell[0]) as u32;
        rle.push(value);
        let mut run: u32 = 0;
        for i in 0..scene.cell_count() {
            let v = (scene.navigable[i] || scene.object_cell[i]) as u32;
            if v == value {
                run += 1;
            } else {
                rle.push(run);
                value = v;
                run = 1;
            }
        }
        rle.push(run);
        SceneRecord {
            seed: scene.seed,
            resolution: scene.resolution,
            width: scene.width,
            height: scene.height,
            navigable_rle: rle,
            objects: scene.objects.clone(),
        }
    }

    pub fn into_scene(self) -> Result<Scene, EnvError> {
        if self.navigable_rle.len() < 2 {
            return Err(EnvError::Malformed("empty RLE".into()));
        }
        let total = self.width * self.height;
        let mut mask = Vec::with_capacity(total);
        let mut value = match self.navigable_rle[0] {
            0 => false,
            1 => true,
            v => return Err(EnvError::Malformed(format!("bad RLE lead value {v}"))),
        };
        for &run in &self.navigable_rle[1..] {
            for _ in 0..run {
                mask.push(value);
            }
            value = !value;
        }
        if mask.len() != total {
            return Err(EnvError::Malformed(format!(
                "RLE covers {} cells, grid has {}",
                mask.len(),
                total
            )));
        }
        Ok(Scene::from_parts(
            self.width,
            self.height,
            self.resolution,
            self.seed,
            mask,
            self.objects,
        ))
    }
}

pub fn scene_to_json(scene: &Scene) -> String {
    serde_json::to_string(&SceneRecord::from_scene(scene)).expect("scene serializes")
}

pub fn scene_from_json(text: &str) -> Result<Scene, EnvError> {
    let record: SceneRecord =
        serde_json::from_str(text).map_err(|e| EnvError::Malformed(e.to_string()))?;
    record.into_scene()
}

#[cfg(test)]
pub(crate) mod tests;
