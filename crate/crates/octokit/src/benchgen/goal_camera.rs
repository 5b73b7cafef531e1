//! Goal-camera sampling for instance-image targets.
//!
//! 36 bearings (every 10 degrees) x 4 radii {0.5, 1.0, 1.5, 2.0} m give
//! 144 ground points; 5 heights sampled uniformly from [0.8, 1.5] m at each
//! point give 720 candidate poses. Candidates survive when navigable and
//! visible; survivors are oriented toward the object center and retained
//! iff their frame coverage reaches 20%.

use crate::env::{frame_coverage, normalize_heading, visible, Pose, Scene, SemanticObject};
use rand::Rng;

pub const RING_BEARINGS: usize = 36;
pub const RING_RADII: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
pub const HEIGHTS_PER_POINT: usize = 5;
pub const HEIGHT_RANGE: (f64, f64) = (0.8, 1.5);
pub const COVERAGE_THRESHOLD: f64 = 0.20;

#[derive(Debug, Clone)]
pub struct GoalCameraSamples {
    /// Pre-filter candidate count (always 720).
    pub candidate_count: usize,
    pub accepted: Vec<Pose>,
}

/// Samples goal-camera poses around an object. An empty result is allowed;
/// callers resample the object.
pub fn sample_goal_camera(
    scene: &Scene,
    object: &SemanticObject,
    rng: &mut impl Rng,
) -> GoalCameraSamples {
    let (ox, oy) = object.center;
    let mut candidate_count = 0;
    let mut accepted = Vec::new();
    for bearing_idx in 0..RING_BEARINGS {
        let phi = (bearing_idx as f64 * 10.0).to_radians();
        for radius in RING_RADII {
            let gx = ox + radius * phi.cos();
            let gy = oy + radius * phi.sin();
            for _ in 0..HEIGHTS_PER_POINT {
                // Heights are drawn unconditionally so the rng stream does
                // not depend on filter outcomes.
                let height = rng.gen_range(HEIGHT_RANGE.0..HEIGHT_RANGE.1);
                candidate_count += 1;
                if !scene.is_navigable_point(gx, gy) {
                    continue;
                }
                let heading = normalize_heading((oy - gy).atan2(ox - gx).to_degrees());
                let pose = Pose::new(gx, gy, heading).with_height(height);
                if !visible(scene, &pose, object) {
                    continue;
                }
                if frame_coverage(scene, &pose, object) >= COVERAGE_THRESHOLD {
                    accepted.push(pose);
                }
            }
        }
    }
    GoalCameraSamples {
        candidate_count,
        accepted,
    }
}
