//! Feature-vector observations standing in for camera frames.
//!
//! The feature is a fixed-length concatenation of
//! - an 11x11 egocentric occupancy patch, rotated to the heading,
//! - a per-category count of currently visible objects,
//! - distance-bin and bearing-bin one-hots for the 3 nearest visible
//!   objects.

use super::{visible, Pose, Scene};
use serde::{Deserialize, Serialize};

/// Patch radius in cells; the patch is `(2r+1) x (2r+1)`.
pub const PATCH_RADIUS: i64 = 5;
pub const PATCH_SIDE: usize = (2 * PATCH_RADIUS as usize) + 1;
/// Distance bin upper edges, meters (last bin is open-ended).
pub const DIST_BIN_EDGES: [f64; 7] = [0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0];
pub const DIST_BINS: usize = DIST_BIN_EDGES.len() + 1;
pub const BEARING_BINS: usize = 8;
pub const NEAREST_SLOTS: usize = 3;

/// Fixed observation layout for a category list of size `categories`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObsLayout {
    pub categories: usize,
}

impl ObsLayout {
    pub fn patch_len(&self) -> usize {
        PATCH_SIDE * PATCH_SIDE
    }

    pub fn len(&self) -> usize {
        self.patch_len() + self.categories + NEAREST_SLOTS * (DIST_BINS + BEARING_BINS)
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Flattened observation vector; constant length for a given layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationFeature(pub Vec<f64>);

impl ObservationFeature {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Occupancy patch entries (row-major, forward axis along columns).
    pub fn patch(&self) -> &[f64] {
        &self.0[..PATCH_SIDE * PATCH_SIDE]
    }

    pub fn histogram<'a>(&'a self, layout: &ObsLayout) -> &'a [f64] {
        &self.0[layout.patch_len()..layout.patch_len() + layout.categories]
    }
}

fn dist_bin(d: f64) -> usize {
    for (i, &edge) in DIST_BIN_EDGES.iter().enumerate() {
        if d < edge {
            return i;
        }
    }
    DIST_BINS - 1
}

fn bearing_bin(rel_deg: f64) -> usize {
    // rel in (-180, 180] -> bins of 45 degrees starting at -180.
    let shifted = (rel_deg + 180.0).clamp(0.0, 359.999);
    ((shifted / 45.0) as usize).min(BEARING_BINS - 1)
}

/// Deterministic observation at a pose.
///
/// The patch samples occupancy at `pose + R(heading) * (du, dv) * res`
/// with `du` forward and `dv` to the left, so rotating the agent by 90
/// degrees permutes the patch by the corresponding quarter rotation.
pub fn observe(scene: &Scene, pose: &Pose, categories: &[&str]) -> ObservationFeature {
    let layout = ObsLayout {
        categories: categories.len(),
    };
    let mut out = Vec::with_capacity(layout.len());
    let res = scene.resolution();
    let (fx, fy) = pose.direction();
    let (lx, ly) = (-fy, fx); // left axis: heading rotated +90 degrees
    for dv in -PATCH_RADIUS..=PATCH_RADIUS {
        for du in -PATCH_RADIUS..=PATCH_RADIUS {
            let px = pose.x + (du as f64 * fx + dv as f64 * lx) * res;
            let py = pose.y + (du as f64 * fy + dv as f64 * ly) * res;
            out.push(if scene.is_navigable_point(px, py) {
                0.0
            } else {
                1.0
            });
        }
    }

    let mut hist = vec![0.0; categories.len()];
    let mut visible_objs: Vec<(f64, f64, usize)> = Vec::new(); // (dist, rel, obj index)
    for (i, obj) in scene.objects().iter().enumerate() {
        if !visible(scene, pose, obj) {
            continue;
        }
        if let Some(slot) = categories.iter().position(|c| *c == obj.category) {
            hist[slot] += 1.0;
        }
        let d = pose.ground_distance(obj.center.0, obj.center.1);
        let rel = pose.relative_bearing(obj.center.0, obj.center.1);
        visible_objs.push((d, rel, i));
    }
    out.extend_from_slice(&hist);

    visible_objs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.2.cmp(&b.2)));
    for slot in 0..NEAREST_SLOTS {
        let mut dist_onehot = vec![0.0; DIST_BINS];
        let mut bearing_onehot = vec![0.0; BEARING_BINS];
        if let Some(&(d, rel, _)) = visible_objs.get(slot) {
            dist_onehot[dist_bin(d)] = 1.0;
            bearing_onehot[bearing_bin(rel)] = 1.0;
        }
        out.extend_from_slice(&dist_onehot);
        out.extend_from_slice(&bearing_onehot);
    }

    debug_assert_eq!(out.len(), layout.len());
    ObservationFeature(out)
}
