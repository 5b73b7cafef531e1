//! Synthetic route-following segments and their trajectory splicing.
//!
//! A walk is 3-6 waypoints joined by shortest grid paths, rendered into a
//! deterministic step-by-step English passage from motion primitives.
//! Splicing prepends/appends trajectory segments so the full path passes
//! through the walk, subject to the three geodesic ratio screens
//! `(dAS+dST)/dAT <= 3`, `(dST+dTB)/dSB <= 3`, `(dAS+dST+dTB)/dAB <= 5`.

use super::GenError;
use crate::env::geodesic::distance_field;
use crate::env::{normalize_relative, Scene};
use rand::Rng;

const MAX_SPLICE_CANDIDATES: usize = 10_000;

#[derive(Debug, Clone)]
pub struct VlnWalk {
    /// Waypoint cells (3-6 of them).
    pub waypoints: Vec<usize>,
    /// Full cell path through all waypoints (inclusive).
    pub path: Vec<usize>,
    /// Deterministic English rendering of the walk.
    pub directions: String,
}

impl VlnWalk {
    pub fn start_cell(&self) -> usize {
        *self.path.first().expect("non-empty walk")
    }

    pub fn end_cell(&self) -> usize {
        *self.path.last().expect("non-empty walk")
    }
}

/// Generates a 3-6 waypoint walk with legs of roughly 0.8-2.0 m.
pub fn gen_vln_walk(scene: &Scene, rng: &mut impl Rng) -> Result<VlnWalk, GenError> {
    let cells = scene.navigable_cells();
    let n_way = rng.gen_range(3..=6usize);
    'restart: for _ in 0..200 {
        let start = cells[rng.gen_range(0..cells.len())];
        let mut waypoints = vec![start];
        let mut path = vec![start];
        for _ in 1..n_way {
            let cur = *waypoints.last().unwrap();
            let field = distance_field(scene, cur);
            let (cx, cy) = scene.cell_center(cur);
            let mut leg: Option<Vec<usize>> = None;
            for _ in 0..60 {
                let cand = cells[rng.gen_range(0..cells.len())];
                if cand == cur {
                    continue;
                }
                let (px, py) = scene.cell_center(cand);
                let euclid = ((px - cx).powi(2) + (py - cy).powi(2)).sqrt();
                if !(0.8..=2.0).contains(&euclid) {
                    continue;
                }
                if field.get(cand).is_none() {
                    continue;
                }
                leg = field.path_to(cand);
                break;
            }
            match leg {
                Some(seg) => {
                    path.extend_from_slice(&seg[1..]);
                    waypoints.push(*seg.last().unwrap());
                }
                None => continue 'restart,
            }
        }
        let directions = render_directions(scene, &waypoints);
        return Ok(VlnWalk {
            waypoints,
            path,
            directions,
        });
    }
    Err(GenError::SamplingExhausted {
        what: "route-following walk",
        attempts: 200,
        detail: format!("{} waypoints with 0.8-2.0 m legs", n_way),
    })
}

/// Renders waypoints into motion primitives: relative turns plus nearby
/// landmarks when one sits within 1.5 m of a waypoint.
fn render_directions(scene: &Scene, waypoints: &[usize]) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut prev_bearing: Option<f64> = None;
    for i in 1..waypoints.len() {
        let (ax, ay) = scene.cell_center(waypoints[i - 1]);
        let (bx, by) = scene.cell_center(waypoints[i]);
        let bearing = (by - ay).atan2(bx - ax).to_degrees();
        let turn = match prev_bearing {
            None => "walk forward".to_string(),
            Some(p) => {
                let rel = normalize_relative(bearing - p);
                if rel.abs() <= 30.0 {
                    "continue straight".to_string()
                } else if rel < 0.0 {
                    "turn left and keep going".to_string()
                } else {
                    "turn right and keep going".to_string()
                }
            }
        };
        prev_bearing = Some(bearing);
        let landmark = scene
            .objects()
            .iter()
            .map(|o| {
                let d = ((o.center.0 - bx).powi(2) + (o.center.1 - by).powi(2)).sqrt();
                (d, &o.category)
            })
            .filter(|(d, _)| *d <= 1.5)
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        match landmark {
            Some((_, cat)) if i == waypoints.len() - 1 => {
                parts.push(format!("{turn} and stop near the {cat}"))
            }
            Some((_, cat)) => parts.push(format!("{turn} past the {cat}")),
            None => parts.push(turn),
        }
    }
    parts.join(", then ")
}

/// Evaluates the three splice inequalities for candidate endpoints `a`, `b`
/// against a walk from `s` to `t`. `None` when any leg is unreachable or a
/// ratio has a zero denominator with a nonzero numerator.
pub fn splice_conditions(
    scene: &Scene,
    a: usize,
    b: usize,
    s: usize,
    t: usize,
) -> Option<(f64, f64, f64)> {
    let res = scene.resolution();
    let field_a = distance_field(scene, a);
    let field_s = distance_field(scene, s);
    let field_t = distance_field(scene, t);
    let d_as = field_a.get(s)?.meters(res);
    let d_st = field_s.get(t)?.meters(res);
    let d_at = field_a.get(t)?.meters(res);
    let d_sb = field_s.get(b)?.meters(res);
    let d_tb = field_t.get(b)?.meters(res);
    let d_ab = field_a.get(b)?.meters(res);
    let ratio = |num: f64, den: f64| {
        if den == 0.0 {
            if num == 0.0 {
                Some(1.0)
            } else {
                None
            }
        } else {
            Some(num / den)
        }
    };
    Some((
        ratio(d_as + d_st, d_at)?,
        ratio(d_st + d_tb, d_sb)?,
        ratio(d_as + d_st + d_tb, d_ab)?,
    ))
}

#[derive(Debug, Clone)]
pub struct Splice {
    /// Full cell path A..S..T..B; the walk occupies
    /// `[vln_start, vln_end]` as indices into this path.
    pub full_path: Vec<usize>,
    pub vln_start: usize,
    pub vln_end: usize,
    pub a: usize,
    pub b: usize,
    pub ratios: (f64, f64, f64),
}

/// Samples prefix/suffix endpoints around a walk until all three ratio
/// screens pass. `fix_a`/`fix_b` pin an endpoint (used when the walk opens
/// or closes the episode; `A = S` and `B = T` are the degenerate cases).
pub fn splice_vln(
    scene: &Scene,
    vln: &VlnWalk,
    rng: &mut impl Rng,
    fix_a: Option<usize>,
    fix_b: Option<usize>,
) -> Result<Splice, GenError> {
    let s = vln.start_cell();
    let t = vln.end_cell();
    let res = scene.resolution();
    let cells = scene.navigable_cells();
    let field_s = distance_field(scene, s);
    let field_t = distance_field(scene, t);
    let d_st = field_s
        .get(t)
        .ok_or_else(|| GenError::Infeasible("walk endpoints disconnected".into()))?
        .meters(res);

    for _ in 0..MAX_SPLICE_CANDIDATES {
        let a = fix_a.unwrap_or_else(|| cells[rng.gen_range(0..cells.len())]);
        let b = fix_b.unwrap_or_else(|| cells[rng.gen_range(0..cells.len())]);
        let field_a = distance_field(scene, a);
        let (d_as, d_at, d_ab) = match (field_a.get(s), field_a.get(t), field_a.get(b)) {
            (Some(x), Some(y), Some(z)) => {
                (x.meters(res), y.meters(res), z.meters(res))
            }
            _ => continue,
        };
        let (d_sb, d_tb) = match (field_s.get(b), field_t.get(b)) {
            (Some(x), Some(y)) => (x.meters(res), y.meters(res)),
            _ => continue,
        };
        let ratio = |num: f64, den: f64| -> Option<f64> {
            if den == 0.0 {
                if num == 0.0 {
                    Some(1.0)
                } else {
                    None
                }
            } else {
                Some(num / den)
            }
        };
        let r1 = match ratio(d_as + d_st, d_at) {
            Some(r) => r,
            None => continue,
        };
        let r2 = match ratio(d_st + d_tb, d_sb) {
            Some(r) => r,
            None => continue,
        };
        let r3 = match ratio(d_as + d_st + d_tb, d_ab) {
            Some(r) => r,
            None => continue,
        };
        if r1 > 3.0 || r2 > 3.0 || r3 > 5.0 {
            continue;
        }
        let prefix = field_a.path_to(s).expect("S reachable from A");
        let suffix = field_t.path_to(b).expect("B reachable from T");
        let mut full = prefix;
        let vln_start = full.len() - 1;
        full.extend_from_slice(&vln.path[1..]);
        let vln_end = full.len() - 1;
        full.extend_from_slice(&suffix[1..]);
        return Ok(Splice {
            full_path: full,
            vln_start,
            vln_end,
            a,
            b,
            ratios: (r1, r2, r3),
        });
    }
    Err(GenError::SamplingExhausted {
        what: "walk splicing",
        attempts: MAX_SPLICE_CANDIDATES,
        detail: format!("walk of {} cells, d_st = {d_st:.2} m", vln.path.len()),
    })
}
