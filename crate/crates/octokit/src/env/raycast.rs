//! Line-of-sight and frame-coverage queries.
//!
//! Visibility walks the exact set of grid cells a segment crosses
//! (Amanatides-Woo traversal). Frame coverage casts a fixed 32x24 ray fan
//! over a 90-degree by 60-degree field of view and reports the fraction of
//! rays whose first hit is the target cylinder; walls block at all heights,
//! other objects block as cylinders, and the floor plane blocks from below.

use super::{Pose, Scene, SemanticObject};

/// Horizontal field of view of the goal camera, degrees.
pub const HFOV_DEG: f64 = 90.0;
/// Vertical field of view of the goal camera, degrees.
pub const VFOV_DEG: f64 = 60.0;
/// Ray-fan resolution (columns x rows).
pub const FAN_COLS: usize = 32;
pub const FAN_ROWS: usize = 24;

/// Cells crossed by the segment from `(x0, y0)` to `(x1, y1)`, in order.
fn segment_cells(scene: &Scene, x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<usize> {
    let res = scene.resolution();
    let mut cells = Vec::new();
    let start = match scene.cell_of(x0, y0) {
        Some((cx, cy)) => (cx as i64, cy as i64),
        None => return cells,
    };
    let goal = match scene.cell_of(x1, y1) {
        Some((cx, cy)) => (cx as i64, cy as i64),
        None => return cells,
    };
    let (mut cx, mut cy) = start;
    cells.push(scene.cell_index(cx as usize, cy as usize));
    let dx = x1 - x0;
    let dy = y1 - y0;
    let step_x: i64 = if dx > 0.0 {
        1
    } else if dx < 0.0 {
        -1
    } else {
        0
    };
    let step_y: i64 = if dy > 0.0 {
        1
    } else if dy < 0.0 {
        -1
    } else {
        0
    };
    // Parametric distance to the next vertical/horizontal cell boundary.
    let mut t_max_x = if step_x != 0 {
        let edge = if step_x > 0 {
            (cx + 1) as f64 * res
        } else {
            cx as f64 * res
        };
        (edge - x0) / dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if step_y != 0 {
        let edge = if step_y > 0 {
            (cy + 1) as f64 * res
        } else {
            cy as f64 * res
        };
        (edge - y0) / dy
    } else {
        f64::INFINITY
    };
    let t_delta_x = if step_x != 0 {
        res / dx.abs()
    } else {
        f64::INFINITY
    };
    let t_delta_y = if step_y != 0 {
        res / dy.abs()
    } else {
        f64::INFINITY
    };
    let max_iters = 4 * (scene.width() + scene.height());
    for _ in 0..max_iters {
        if (cx, cy) == goal {
            break;
        }
        if t_max_x < t_max_y {
            cx += step_x;
            t_max_x += t_delta_x;
        } else {
            cy += step_y;
            t_max_y += t_delta_y;
        }
        if cx < 0 || cy < 0 || cx >= scene.width() as i64 || cy >= scene.height() as i64 {
            break;
        }
        cells.push(scene.cell_index(cx as usize, cy as usize));
    }
    cells
}

/// True iff the segment from the pose to the object center crosses no
/// non-navigable cell other than the object's own footprint.
pub fn visible(scene: &Scene, pose: &Pose, object: &SemanticObject) -> bool {
    let footprint = scene.footprint_of(object.id);
    let cells = segment_cells(scene, pose.x, pose.y, object.center.0, object.center.1);
    if cells.is_empty() {
        return false;
    }
    for cell in cells {
        if !scene.is_navigable_cell(cell) && !footprint.contains(&(cell as u32)) {
            return false;
        }
    }
    true
}

/// First positive ray parameter at which a wall column is entered, if any.
///
/// Walls are non-navigable cells that belong to no object footprint; they
/// block at every height. `origin`/`dir` are 3D with z up; the returned t
/// is in 3D ray units.
fn wall_hit_t(scene: &Scene, origin: [f64; 3], dir: [f64; 3]) -> Option<f64> {
    let horiz = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
    if horiz < 1e-12 {
        return None;
    }
    let res = scene.resolution();
    let (x0, y0) = (origin[0], origin[1]);
    let start = scene.cell_of(x0, y0)?;
    let (mut cx, mut cy) = (start.0 as i64, start.1 as i64);
    let dx = dir[0];
    let dy = dir[1];
    let step_x: i64 = if dx > 0.0 {
        1
    } else if dx < 0.0 {
        -1
    } else {
        0
    };
    let step_y: i64 = if dy > 0.0 {
        1
    } else if dy < 0.0 {
        -1
    } else {
        0
    };
    let mut t_max_x = if step_x != 0 {
        let edge = if step_x > 0 {
            (cx + 1) as f64 * res
        } else {
            cx as f64 * res
        };
        (edge - x0) / dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if step_y != 0 {
        let edge = if step_y > 0 {
            (cy + 1) as f64 * res
        } else {
            cy as f64 * res
        };
        (edge - y0) / dy
    } else {
        f64::INFINITY
    };
    let t_delta_x = if step_x != 0 {
        res / dx.abs()
    } else {
        f64::INFINITY
    };
    let t_delta_y = if step_y != 0 {
        res / dy.abs()
    } else {
        f64::INFINITY
    };
    let is_wall = |cx: i64, cy: i64| -> bool {
        if cx < 0 || cy < 0 || cx >= scene.width() as i64 || cy >= scene.height() as i64 {
            return true; // outside the grid blocks like a wall
        }
        let idx = scene.cell_index(cx as usize, cy as usize);
        !scene.is_navigable_cell(idx) && !scene.is_object_cell(idx)
    };
    if is_wall(cx, cy) {
        return Some(0.0);
    }
    let max_iters = 4 * (scene.width() + scene.height());
    for _ in 0..max_iters {
        let t_enter;
        if t_max_x < t_max_y {
            t_enter = t_max_x;
            cx += step_x;
            t_max_x += t_delta_x;
        } else {
            t_enter = t_max_y;
            cy += step_y;
            t_max_y += t_delta_y;
        }
        if is_wall(cx, cy) {
            return Some(t_enter);
        }
    }
    None
}

/// First intersection of a ray with a solid vertical cylinder
/// (lateral surface plus top and bottom caps). Returns `Some(0.0)` when the
/// origin is inside the solid.
fn cylinder_hit_t(origin: [f64; 3], dir: [f64; 3], obj: &SemanticObject) -> Option<f64> {
    let (cx, cy) = obj.center;
    let r = obj.radius;
    let h = obj.top_height;
    let ox = origin[0] - cx;
    let oy = origin[1] - cy;
    let inside_radial = ox * ox + oy * oy <= r * r;
    if inside_radial && origin[2] >= 0.0 && origin[2] <= h {
        return Some(0.0);
    }
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| {
        if t >= 0.0 && best.map_or(true, |b| t < b) {
            best = Some(t);
        }
    };
    // Lateral surface.
    let a = dir[0] * dir[0] + dir[1] * dir[1];
    if a > 1e-12 {
        let b = 2.0 * (ox * dir[0] + oy * dir[1]);
        let c = ox * ox + oy * oy - r * r;
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                if t >= 0.0 {
                    let z = origin[2] + dir[2] * t;
                    if (0.0..=h).contains(&z) {
                        consider(t);
                    }
                }
            }
        }
    }
    // Caps.
    if dir[2].abs() > 1e-12 {
        for plane in [0.0, h] {
            let t = (plane - origin[2]) / dir[2];
            if t >= 0.0 {
                let px = ox + dir[0] * t;
                let py = oy + dir[1] * t;
                if px * px + py * py <= r * r {
                    consider(t);
                }
            }
        }
    }
    best
}

/// Fraction of the 32x24 ray fan whose first hit is the target cylinder.
///
/// The caller orients the camera along the vector to the object center;
/// this function derives that orientation from the camera position itself
/// so coverage is a pure function of `(scene, camera position, object)`.
pub fn frame_coverage(scene: &Scene, camera: &Pose, object: &SemanticObject) -> f64 {
    let origin = [camera.x, camera.y, camera.height];
    let target = [
        object.center.0,
        object.center.1,
        object.top_height / 2.0,
    ];
    let mut fwd = [
        target[0] - origin[0],
        target[1] - origin[1],
        target[2] - origin[2],
    ];
    let norm = (fwd[0] * fwd[0] + fwd[1] * fwd[1] + fwd[2] * fwd[2]).sqrt();
    if norm < 1e-12 {
        fwd = [1.0, 0.0, 0.0];
    } else {
        for v in &mut fwd {
            *v /= norm;
        }
    }
    // Camera basis: right = fwd x z_up (horizontal), up = right x fwd.
    let mut right = [fwd[1], -fwd[0], 0.0];
    let rn = (right[0] * right[0] + right[1] * right[1]).sqrt();
    if rn < 1e-9 {
        right = [1.0, 0.0, 0.0];
    } else {
        right[0] /= rn;
        right[1] /= rn;
    }
    let up = [
        right[1] * fwd[2] - right[2] * fwd[1],
        right[2] * fwd[0] - right[0] * fwd[2],
        right[0] * fwd[1] - right[1] * fwd[0],
    ];

    let mut covered = 0usize;
    for row in 0..FAN_ROWS {
        let pitch =
            (-VFOV_DEG / 2.0 + (row as f64 + 0.5) * VFOV_DEG / FAN_ROWS as f64).to_radians();
        for col in 0..FAN_COLS {
            let yaw =
                (-HFOV_DEG / 2.0 + (col as f64 + 0.5) * HFOV_DEG / FAN_COLS as f64).to_radians();
            let cp = pitch.cos();
            let dir = [
                fwd[0] * cp * yaw.cos() + right[0] * cp * yaw.sin() + up[0] * pitch.sin(),
                fwd[1] * cp * yaw.cos() + right[1] * cp * yaw.sin() + up[1] * pitch.sin(),
                fwd[2] * cp * yaw.cos() + right[2] * cp * yaw.sin() + up[2] * pitch.sin(),
            ];
            let t_target = match cylinder_hit_t(origin, dir, object) {
                Some(t) => t,
                None => continue,
            };
            let mut t_block = f64::INFINITY;
            if let Some(t) = wall_hit_t(scene, origin, dir) {
                t_block = t_block.min(t);
            }
            if dir[2] < 0.0 {
                t_block = t_block.min(-origin[2] / dir[2]);
            }
            for other in scene.objects() {
                if other.id == object.id {
                    continue;
                }
                if let Some(t) = cylinder_hit_t(origin, dir, other) {
                    t_block = t_block.min(t);
                }
            }
            if t_target <= t_block {
                covered += 1;
            }
        }
    }
    covered as f64 / (FAN_ROWS * FAN_COLS) as f64
}
