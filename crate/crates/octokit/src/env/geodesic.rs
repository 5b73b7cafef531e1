//! 8-connected grid geodesics with exact step-count arithmetic.
//!
//! Path lengths are kept as integer counts of straight and diagonal steps
//! and compared exactly (`a + b*sqrt(2)` with integer `a, b` admits an
//! exact total order), so shortest-path lengths are unique and their
//! conversion to meters is reproducible bit-for-bit.

use super::{EnvError, Pose, Scene};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Exact grid path length: `straight + diag * sqrt(2)` cell steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GridDist {
    pub straight: u32,
    pub diag: u32,
}

impl GridDist {
    pub const ZERO: GridDist = GridDist {
        straight: 0,
        diag: 0,
    };

    pub fn meters(self, resolution: f64) -> f64 {
        self.straight as f64 * resolution
            + self.diag as f64 * std::f64::consts::SQRT_2 * resolution
    }

    fn plus_straight(self) -> GridDist {
        GridDist {
            straight: self.straight + 1,
            diag: self.diag,
        }
    }

    fn plus_diag(self) -> GridDist {
        GridDist {
            straight: self.straight,
            diag: self.diag + 1,
        }
    }
}

impl Ord for GridDist {
    fn cmp(&self, other: &Self) -> Ordering {
        // Compare s1 + d1*sqrt(2) with s2 + d2*sqrt(2) exactly.
        let ds = self.straight as i64 - other.straight as i64;
        let dd = self.diag as i64 - other.diag as i64;
        if ds == 0 && dd == 0 {
            return Ordering::Equal;
        }
        if ds >= 0 && dd >= 0 {
            return Ordering::Greater;
        }
        if ds <= 0 && dd <= 0 {
            return Ordering::Less;
        }
        // Opposite signs: sign of ds + dd*sqrt(2) = sign of ds^2 - 2*dd^2
        // when ds > 0, negated when ds < 0. Never equal (sqrt(2) is
        // irrational and ds, dd are nonzero here).
        let lhs = ds * ds;
        let rhs = 2 * dd * dd;
        if ds > 0 {
            lhs.cmp(&rhs)
        } else {
            rhs.cmp(&lhs)
        }
    }
}

impl PartialOrd for GridDist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(PartialEq, Eq)]
struct HeapEntry {
    cost: GridDist,
    cell: usize,
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap with deterministic cell-index tie-break.
        other
            .cost
            .cmp(&self.cost)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Per-cell shortest distances from a set of seeded sources.
#[derive(Debug, Clone)]
pub struct DistanceField {
    pub dist: Vec<Option<GridDist>>,
    parent: Vec<u32>,
}

const NO_PARENT: u32 = u32::MAX;

impl DistanceField {
    pub fn get(&self, cell: usize) -> Option<GridDist> {
        self.dist[cell]
    }

    pub fn meters_at(&self, cell: usize, resolution: f64) -> Option<f64> {
        self.dist[cell].map(|d| d.meters(resolution))
    }

    /// Cell path from a source to `cell` following parents (source first).
    pub fn path_to(&self, cell: usize) -> Option<Vec<usize>> {
        self.dist[cell]?;
        let mut path = vec![cell];
        let mut cur = cell;
        while self.parent[cur] != NO_PARENT {
            cur = self.parent[cur] as usize;
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }
}

/// Multi-source Dijkstra over navigable cells with optional initial costs.
pub fn distance_field_from(scene: &Scene, sources: &[(usize, GridDist)]) -> DistanceField {
    let n = scene.cell_count();
    let mut dist: Vec<Option<GridDist>> = vec![None; n];
    let mut parent = vec![NO_PARENT; n];
    let mut heap = BinaryHeap::new();
    for &(cell, cost) in sources {
        if !scene.is_navigable_cell(cell) {
            continue;
        }
        let better = match dist[cell] {
            None => true,
            Some(d) => cost < d,
        };
        if better {
            dist[cell] = Some(cost);
            heap.push(HeapEntry { cost, cell });
        }
    }
    let w = scene.width() as i64;
    let h = scene.height() as i64;
    let navigable_at = |x: i64, y: i64| -> bool {
        x >= 0
            && y >= 0
            && x < w
            && y < h
            && scene.is_navigable_cell(scene.cell_index(x as usize, y as usize))
    };
    while let Some(HeapEntry { cost, cell }) = heap.pop() {
        if dist[cell] != Some(cost) {
            continue;
        }
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
            // A diagonal step is walkable only when at least one of its
            // orthogonal companions is free; a continuous agent cannot
            // squeeze between two wall corners.
            if dx != 0
                && dy != 0
                && !navigable_at(cx as i64 + dx, cy as i64)
                && !navigable_at(cx as i64, cy as i64 + dy)
            {
                continue;
            }
            let nidx = scene.cell_index(nx as usize, ny as usize);
            let ncost = if dx != 0 && dy != 0 {
                cost.plus_diag()
            } else {
                cost.plus_straight()
            };
            let better = match dist[nidx] {
                None => true,
                Some(d) => ncost < d,
            };
            if better {
                dist[nidx] = Some(ncost);
                parent[nidx] = cell as u32;
                heap.push(HeapEntry {
                    cost: ncost,
                    cell: nidx,
                });
            }
        }
    }
    DistanceField { dist, parent }
}

/// Single-source field from one cell.
pub fn distance_field(scene: &Scene, source: usize) -> DistanceField {
    distance_field_from(scene, &[(source, GridDist::ZERO)])
}

/// Exact grid distance between two cells, if connected.
pub fn cell_distance(scene: &Scene, from: usize, to: usize) -> Option<GridDist> {
    distance_field(scene, from).get(to)
}

/// Geodesic distance in meters between the nearest navigable cells to two
/// poses. Symmetric; `EnvError::Unreachable` when the cells lie in
/// different components.
pub fn geodesic_distance(scene: &Scene, a: &Pose, b: &Pose) -> Result<f64, EnvError> {
    if !scene.in_bounds(a.x, a.y) {
        return Err(EnvError::OutOfBounds { x: a.x, y: a.y });
    }
    if !scene.in_bounds(b.x, b.y) {
        return Err(EnvError::OutOfBounds { x: b.x, y: b.y });
    }
    let ca = scene
        .nearest_navigable_cell(a.x, a.y)
        .ok_or(EnvError::Unreachable)?;
    let cb = scene
        .nearest_navigable_cell(b.x, b.y)
        .ok_or(EnvError::Unreachable)?;
    cell_distance(scene, ca, cb)
        .map(|d| d.meters(scene.resolution()))
        .ok_or(EnvError::Unreachable)
}

/// Shortest cell path between two cells (inclusive), if connected.
pub fn shortest_cell_path(scene: &Scene, from: usize, to: usize) -> Option<Vec<usize>> {
    distance_field(scene, from).path_to(to)
}
