//! Procedural indoor scenes: BSP rooms, 3-cell door gaps, cylinder objects.

use super::{EnvError, Scene, SemanticObject};
use crate::derive_seed;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Object categories the generator draws from (alphabetical; the order
/// fixes observation histogram slots).
pub const CATEGORIES: [&str; 12] = [
    "bed", "cabinet", "chair", "desk", "fridge", "lamp", "plant", "shelf", "sink", "sofa",
    "table", "tv",
];

const MIN_ROOM_SIDE: usize = 8;
const DOOR_WIDTH: usize = 3;
const MAX_ATTEMPTS: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    /// Grid width in cells (>= 40).
    pub width: usize,
    /// Grid height in cells (>= 40).
    pub height: usize,
    /// Meters per cell, in [0.05, 0.25].
    pub resolution: f64,
    /// Number of rooms (>= 2).
    pub rooms: usize,
    /// Number of semantic objects (>= 4).
    pub objects: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            width: 64,
            height: 64,
            resolution: 0.15,
            rooms: 4,
            objects: 8,
        }
    }
}

impl SceneParams {
    fn validate(&self) -> Result<(), EnvError> {
        if self.width < 40 || self.height < 40 {
            return Err(EnvError::InvalidParams(format!(
                "grid must be at least 40x40, got {}x{}",
                self.width, self.height
            )));
        }
        if !(0.05..=0.25).contains(&self.resolution) {
            return Err(EnvError::InvalidParams(format!(
                "resolution must lie in [0.05, 0.25] m, got {}",
                self.resolution
            )));
        }
        if self.rooms < 2 {
            return Err(EnvError::InvalidParams(format!(
                "need at least 2 rooms, got {}",
                self.rooms
            )));
        }
        if self.objects < 4 {
            return Err(EnvError::InvalidParams(format!(
                "need at least 4 objects, got {}",
                self.objects
            )));
        }
        Ok(())
    }
}

/// Axis-aligned room interior, cell coordinates, half-open.
#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

impl Rect {
    fn w(&self) -> usize {
        self.x1 - self.x0
    }
    fn h(&self) -> usize {
        self.y1 - self.y0
    }
    fn area(&self) -> usize {
        self.w() * self.h()
    }
}

/// Deterministically generates a connected multi-room scene.
///
/// Retries internally (up to 100 layout attempts per call) and reports a
/// diagnostic error when no connected layout satisfying the parameters was
/// found.
pub fn gen_scene(seed: u64, params: &SceneParams) -> Result<Scene, EnvError> {
    params.validate()?;
    let mut last_reason = String::from("no attempt ran");
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xC0DE, attempt as u64));
        match try_generate(seed, params, &mut rng) {
            Ok(scene) => return Ok(scene),
            Err(reason) => last_reason = reason,
        }
    }
    Err(EnvError::GenerationFailed {
        attempts: MAX_ATTEMPTS,
        reason: last_reason,
    })
}

fn try_generate(seed: u64, params: &SceneParams, rng: &mut ChaCha8Rng) -> Result<Scene, String> {
    let w = params.width;
    let h = params.height;

    // Split the interior into `rooms` leaves separated by 1-cell walls.
    let mut leaves = vec![Rect {
        x0: 1,
        y0: 1,
        x1: w - 1,
        y1: h - 1,
    }];
    while leaves.len() < params.rooms {
        // Split the largest splittable leaf.
        let mut order: Vec<usize> = (0..leaves.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(leaves[i].area()));
        let mut split_done = false;
        for &i in &order {
            let r = leaves[i];
            let can_v = r.w() >= 2 * MIN_ROOM_SIDE + 1;
            let can_h = r.h() >= 2 * MIN_ROOM_SIDE + 1;
            if !can_v && !can_h {
                continue;
            }
            let vertical = if can_v && can_h {
                if r.w() == r.h() {
                    rng.gen_bool(0.5)
                } else {
                    r.w() > r.h()
                }
            } else {
                can_v
            };
            if vertical {
                let s = rng.gen_range(r.x0 + MIN_ROOM_SIDE..=r.x1 - 1 - MIN_ROOM_SIDE);
                leaves[i] = Rect { x1: s, ..r };
                leaves.push(Rect { x0: s + 1, ..r });
            } else {
                let s = rng.gen_range(r.y0 + MIN_ROOM_SIDE..=r.y1 - 1 - MIN_ROOM_SIDE);
                leaves[i] = Rect { y1: s, ..r };
                leaves.push(Rect { y0: s + 1, ..r });
            }
            split_done = true;
            break;
        }
        if !split_done {
            return Err(format!(
                "cannot split {}x{} interior into {} rooms of side >= {}",
                w - 2,
                h - 2,
                params.rooms,
                MIN_ROOM_SIDE
            ));
        }
    }

    let mut mask = vec![false; w * h];
    for r in &leaves {
        for y in r.y0..r.y1 {
            for x in r.x0..r.x1 {
                mask[y * w + x] = true;
            }
        }
    }

    // Door candidates between leaves separated by exactly one wall line.
    struct Edge {
        a: usize,
        b: usize,
        cells: Vec<(usize, usize)>, // candidate door start cells, full span
        vertical_wall: bool,
    }
    let mut edges = Vec::new();
    for a in 0..leaves.len() {
        for b in a + 1..leaves.len() {
            let (ra, rb) = (leaves[a], leaves[b]);
            // Wall column between horizontally adjacent rooms.
            if rb.x0 == ra.x1 + 1 || ra.x0 == rb.x1 + 1 {
                let wall_x = if rb.x0 == ra.x1 + 1 { ra.x1 } else { rb.x1 };
                let y0 = ra.y0.max(rb.y0);
                let y1 = ra.y1.min(rb.y1);
                if y1 > y0 && y1 - y0 >= DOOR_WIDTH {
                    let cells = (y0..=y1 - DOOR_WIDTH).map(|y| (wall_x, y)).collect();
                    edges.push(Edge {
                        a,
                        b,
                        cells,
                        vertical_wall: true,
                    });
                }
            }
            if rb.y0 == ra.y1 + 1 || ra.y0 == rb.y1 + 1 {
                let wall_y = if rb.y0 == ra.y1 + 1 { ra.y1 } else { rb.y1 };
                let x0 = ra.x0.max(rb.x0);
                let x1 = ra.x1.min(rb.x1);
                if x1 > x0 && x1 - x0 >= DOOR_WIDTH {
                    let cells = (x0..=x1 - DOOR_WIDTH).map(|x| (x, wall_y)).collect();
                    edges.push(Edge {
                        a,
                        b,
                        cells,
                        vertical_wall: false,
                    });
                }
            }
        }
    }

    // Randomized spanning tree plus a few extra doors.
    let mut order: Vec<usize> = (0..edges.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut comp: Vec<usize> = (0..leaves.len()).collect();
    fn find(comp: &mut Vec<usize>, i: usize) -> usize {
        if comp[i] != i {
            let root = find(comp, comp[i]);
            comp[i] = root;
        }
        comp[i]
    }
    let mut door_cells: Vec<usize> = Vec::new();
    let mut carved = 0usize;
    for &ei in &order {
        let e = &edges[ei];
        let (ra, rb) = (find(&mut comp, e.a), find(&mut comp, e.b));
        let needed = ra != rb;
        if !needed && !rng.gen_bool(0.3) {
            continue;
        }
        let (sx, sy) = e.cells[rng.gen_range(0..e.cells.len())];
        for k in 0..DOOR_WIDTH {
            let (x, y) = if e.vertical_wall {
                (sx, sy + k)
            } else {
                (sx + k, sy)
            };
            mask[y * w + x] = true;
            door_cells.push(y * w + x);
        }
        if needed {
            comp[ra] = rb;
            carved += 1;
        }
    }
    let root = find(&mut comp, 0);
    for i in 1..leaves.len() {
        if find(&mut comp, i) != root {
            return Err(format!(
                "room graph not spanning: {} of {} tree doors carved",
                carved,
                leaves.len() - 1
            ));
        }
    }

    // Objects: carve footprints while keeping the mask connected and the
    // doors clear. Radii scale with resolution so footprints fit rooms.
    let r_min = 0.12_f64.min(1.2 * params.resolution);
    let r_max = 0.30_f64.min(2.2 * params.resolution);
    let mut objects: Vec<SemanticObject> = Vec::new();
    for id in 0..params.objects {
        let mut placed = false;
        for _ in 0..60 {
            let room = leaves[rng.gen_range(0..leaves.len())];
            let radius = rng.gen_range(r_min..r_max);
            let margin = radius / params.resolution + 1.5;
            if room.x0 as f64 + margin >= room.x1 as f64 - margin
                || room.y0 as f64 + margin >= room.y1 as f64 - margin
            {
                continue;
            }
            let cx = (rng.gen_range(room.x0 as f64 + margin..room.x1 as f64 - margin))
                * params.resolution;
            let cy = (rng.gen_range(room.y0 as f64 + margin..room.y1 as f64 - margin))
                * params.resolution;
            let obj = SemanticObject {
                id: id as u32,
                category: CATEGORIES[rng.gen_range(0..CATEGORIES.len())].to_string(),
                center: (cx, cy),
                radius,
                top_height: rng.gen_range(0.6..1.9),
            };
            let candidate = {
                let mut objs = objects.clone();
                objs.push(obj.clone());
                Scene::from_parts(w, h, params.resolution, seed, mask.clone(), objs)
            };
            if scene_connected(&candidate, &door_cells) {
                objects.push(obj);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(format!(
                "could not place object {} without splitting the navigable area",
                id
            ));
        }
    }

    let scene = Scene::from_parts(w, h, params.resolution, seed, mask, objects);
    let nav_total = scene.navigable_cells().len();
    if nav_total < 100 {
        return Err(format!("navigable area too small: {nav_total} cells"));
    }
    if !scene_connected(&scene, &door_cells) {
        return Err("navigable area not connected".into());
    }
    // Every object center must sit in or next to navigable space.
    for obj in scene.objects() {
        let (cx, cy) = match scene.cell_of(obj.center.0, obj.center.1) {
            Some(c) => c,
            None => return Err(format!("object {} outside the grid", obj.id)),
        };
        let mut ok = false;
        'adj: for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let nx = cx as i64 + dx;
                let ny = cy as i64 + dy;
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                if scene.is_navigable_cell(scene.cell_index(nx as usize, ny as usize)) {
                    ok = true;
                    break 'adj;
                }
            }
        }
        if !ok {
            return Err(format!("object {} isolated from navigable space", obj.id));
        }
    }
    Ok(scene)
}

/// True iff the navigable cells form one component containing every
/// (still navigable) door cell.
fn scene_connected(scene: &Scene, door_cells: &[usize]) -> bool {
    let total: usize = scene.navigable_cells().len();
    if total == 0 {
        return false;
    }
    let start = match (0..scene.cell_count()).find(|&i| scene.is_navigable_cell(i)) {
        Some(s) => s,
        None => return false,
    };
    let mut seen = vec![false; scene.cell_count()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut reached = 0usize;
    let w = scene.width() as i64;
    let h = scene.height() as i64;
    let navigable_at = |x: i64, y: i64| -> bool {
        x >= 0
            && y >= 0
            && x < w
            && y < h
            && scene.is_navigable_cell(scene.cell_index(x as usize, y as usize))
    };
    while let Some(cell) = stack.pop() {
        reached += 1;
        let (cx, cy) = scene.cell_xy(cell);
        for (dx, dy) in [
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ] {
            let nx = cx as i64 + dx;
            let ny = cy as i64 + dy;
            if !navigable_at(nx, ny) {
                continue;
            }
            // Same adjacency as the geodesic metric: no squeezing between
            // two wall corners.
            if dx != 0
                && dy != 0
                && !navigable_at(cx as i64 + dx, cy as i64)
                && !navigable_at(cx as i64, cy as i64 + dy)
            {
                continue;
            }
            let nidx = scene.cell_index(nx as usize, ny as usize);
            if !seen[nidx] {
                seen[nidx] = true;
                stack.push(nidx);
            }
        }
    }
    if reached != total {
        return false;
    }
    door_cells.iter().all(|&c| seen[c])
}
