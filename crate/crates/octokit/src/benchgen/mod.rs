//! Instruction-trajectory episode construction.
//!
//! An [`Episode`] couples an ordered list of capability sub-goals with a
//! grounded instruction and a ground-truth action trajectory that enters
//! every sub-goal success area in order. Construction pipeline:
//! capability sampling -> constrained trajectory sampling (with waypoint
//! splicing for route-following sub-goals) -> sub-goal assignment ->
//! template instantiation -> dataset serialization.

mod builder;
mod dataset;
mod goal_camera;
mod sampler;
mod templates;
mod vln;

pub use builder::{build_episode, generate_dataset, DatasetGenConfig, GenConfig};
pub use dataset::{read_dataset, write_dataset, DatasetError, DatasetItem, SceneCache, DATASET_SCHEMA};
pub use goal_camera::{sample_goal_camera, GoalCameraSamples};
pub use sampler::{accept_by_ratio, sample_capabilities, sample_trajectory, TrajectorySample};
pub use templates::{build_template, instantiate_instruction, InstructionTemplate, TemplatePool};
pub use vln::{gen_vln_walk, splice_conditions, splice_vln, Splice, VlnWalk};

use crate::env::{Action, ObservationFeature, Pose};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("{what}: no candidate accepted after {attempts} attempts ({detail})")]
    SamplingExhausted {
        what: &'static str,
        attempts: usize,
        detail: String,
    },
    #[error("straight ratio {0} < 1: geodesic shorter than euclidean, check the distance metric")]
    RatioContract(f64),
    #[error("episode construction failed: {0}")]
    Infeasible(String),
    #[error("template/sub-goal mismatch: {0}")]
    TemplateMismatch(String),
    #[error("malformed template pool: {0}")]
    BadTemplatePool(String),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
}

/// The five navigation capabilities composable within one instruction.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum Capability {
    ObjNav,
    PointNav,
    ImgNav,
    InsImgNav,
    VLN,
}

impl Capability {
    pub const ALL: [Capability; 5] = [
        Capability::ObjNav,
        Capability::PointNav,
        Capability::ImgNav,
        Capability::InsImgNav,
        Capability::VLN,
    ];

    pub fn index(self) -> usize {
        Capability::ALL.iter().position(|c| *c == self).unwrap()
    }

    /// Report label, e.g. `Ins-ImgNav`.
    pub fn label(self) -> &'static str {
        match self {
            Capability::ObjNav => "ObjNav",
            Capability::PointNav => "PointNav",
            Capability::ImgNav => "ImgNav",
            Capability::InsImgNav => "Ins-ImgNav",
            Capability::VLN => "VLN",
        }
    }

    /// Placeholder token used by instruction templates.
    pub fn placeholder(self) -> &'static str {
        match self {
            Capability::ObjNav => "object",
            Capability::PointNav => "coordinates",
            Capability::ImgNav => "ImageNav",
            Capability::InsImgNav => "InstanceImageNav",
            Capability::VLN => "VLN",
        }
    }
}

impl std::fmt::Display for Capability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// What a sub-goal points at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SubGoalTarget {
    /// Absolute scene-frame point; `z` is the floor-plane height component
    /// used only for instruction formatting.
    Point { x: f64, y: f64, z: f64 },
    /// A semantic object (category and center denormalized for
    /// self-contained evaluation).
    Object {
        id: u32,
        category: String,
        center: (f64, f64),
    },
    /// A viewpoint to reproduce (image-goal).
    GoalPose { pose: Pose },
    /// An ordered waypoint walk plus its step-by-step rendering.
    Waypoints {
        path: Vec<(f64, f64)>,
        directions: String,
    },
}

/// One capability-typed target inside an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubGoal {
    pub capability: Capability,
    pub target: SubGoalTarget,
    pub success_distance: f64,
    pub goal_signature: Option<ObservationFeature>,
}

impl SubGoal {
    /// Ground-plane point that distances are measured against.
    pub fn target_point(&self) -> (f64, f64) {
        match &self.target {
            SubGoalTarget::Point { x, y, .. } => (*x, *y),
            SubGoalTarget::Object { center, .. } => *center,
            SubGoalTarget::GoalPose { pose } => (pose.x, pose.y),
            SubGoalTarget::Waypoints { path, .. } => *path.last().expect("non-empty walk"),
        }
    }
}

/// A grounded instruction-trajectory pair.
///
/// Invariants: `gt_poses.len() == gt_actions.len() + 1`; replaying
/// `gt_actions` from `start` reproduces `gt_poses` exactly; the poses enter
/// every sub-goal success area in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: u64,
    pub scene_id: u64,
    pub start: Pose,
    pub subgoals: Vec<SubGoal>,
    pub instruction_text: String,
    pub gt_actions: Vec<Action>,
    pub gt_poses: Vec<Pose>,
    pub geodesic_length: f64,
}

impl Episode {
    pub fn capabilities(&self) -> Vec<Capability> {
        self.subgoals.iter().map(|s| s.capability).collect()
    }
}

#[cfg(test)]
mod tests;
