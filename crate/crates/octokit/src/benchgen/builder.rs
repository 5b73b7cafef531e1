//! Episode assembly: skeleton trajectory, sub-goal snapping, ground-truth
//! action synthesis and instruction grounding.

use super::dataset::DatasetItem;
use super::goal_camera::sample_goal_camera;
use super::sampler::{sample_capabilities, sample_trajectory};
use super::templates::{build_template, instantiate_instruction, TemplatePool};
use super::vln::{gen_vln_walk, splice_vln};
use super::{Capability, Episode, GenError, SubGoal, SubGoalTarget};
use crate::derive_seed;
use crate::env::geodesic::distance_field;
use crate::env::{
    gen_scene, observe, step, Action, ForwardCm, Pose, Scene, SceneParams, TurnDeg, CATEGORIES,
};
use crate::metrics::SuccessDistances;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const STREAM_SCENE: u64 = 0x5C;
const STREAM_CAPS: u64 = 0xCA;
const STREAM_EPISODE: u64 = 0xE9;

#[derive(Debug, Clone)]
pub struct GenConfig {
    /// Scale factor `s` applied to the `[3k, 10k]` m length interval;
    /// 1.0 recovers the unscaled rule.
    pub scale: f64,
    /// Weights for the capability count k = 1..5.
    pub length_weights: [f64; 5],
    /// Object sub-goals snap to the nearest object within this radius, m.
    pub snap_radius: f64,
    /// Minimum geodesic separation between consecutive sub-goals, m
    /// (raised to the sum of their success distances when larger).
    pub min_separation: f64,
    pub success_distances: SuccessDistances,
    /// Skeleton/waypoint retries before the fallback episode kicks in.
    pub max_attempts: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            scale: 0.3,
            length_weights: super::sampler::LENGTH_WEIGHTS,
            snap_radius: 2.0,
            min_separation: 1.0,
            success_distances: SuccessDistances::default(),
            max_attempts: 40,
        }
    }
}

/// Ground-truth follower tolerance around route vertices, m.
const REACH_TOL: f64 = 0.18;
/// Heading error below which the follower moves instead of turning, deg.
const FACE_TOL: f64 = 7.5;

pub fn build_episode(
    scene: &Scene,
    scene_id: u64,
    episode_id: u64,
    capabilities: &[Capability],
    rng: &mut ChaCha8Rng,
    cfg: &GenConfig,
    pool: &TemplatePool,
) -> Result<Episode, GenError> {
    for _ in 0..cfg.max_attempts {
        match try_build(scene, scene_id, episode_id, capabilities, rng, cfg, pool) {
            Ok(ep) => return Ok(ep),
            Err(_) => continue,
        }
    }
    fallback_pointnav(scene, scene_id, episode_id, rng, cfg, pool)
}

fn try_build(
    scene: &Scene,
    scene_id: u64,
    episode_id: u64,
    caps: &[Capability],
    rng: &mut ChaCha8Rng,
    cfg: &GenConfig,
    pool: &TemplatePool,
) -> Result<Episode, GenError> {
    let k = caps.len();
    let vln_pos = caps.iter().position(|c| *c == Capability::VLN);

    // Skeleton path, per-sub-goal waypoint cells and (when present) the
    // exact walk span cells.
    let (path, start_heading, waypoint_cells, vln_target, walk_cells): (
        Vec<usize>,
        f64,
        Vec<Option<usize>>,
        Option<SubGoalTarget>,
        Option<Vec<usize>>,
    ) = match vln_pos {
        None => {
            let traj = sample_trajectory(scene, k, cfg.scale, rng)?;
            let arcs = arc_lengths(scene, &traj.path);
            let total = *arcs.last().unwrap();
            let cells = (1..=k)
                .map(|j| {
                    let target = total * j as f64 / k as f64;
                    Some(traj.path[arc_index(&arcs, target)])
                })
                .collect();
            (traj.path, traj.start.heading, cells, None, None)
        }
        Some(p) => {
            let walk = gen_vln_walk(scene, rng)?;
            let fix_a = (p == 0).then(|| walk.start_cell());
            let fix_b = (p == k - 1).then(|| walk.end_cell());
            let splice = splice_vln(scene, &walk, rng, fix_a, fix_b)?;
            let prefix = &splice.full_path[..=splice.vln_start];
            let suffix = &splice.full_path[splice.vln_end..];
            let mut cells: Vec<Option<usize>> = vec![None; k];
            let pre = p;
            let post = k - 1 - p;
            if pre > 0 {
                let arcs = arc_lengths(scene, prefix);
                let total = *arcs.last().unwrap();
                for (slot, j) in (0..pre).zip(1..=pre) {
                    let target = total * j as f64 / (pre + 1) as f64;
                    cells[slot] = Some(prefix[arc_index(&arcs, target)]);
                }
            }
            if post > 0 {
                let arcs = arc_lengths(scene, suffix);
                let total = *arcs.last().unwrap();
                for (slot, j) in (p + 1..k).zip(1..=post) {
                    let target = total * j as f64 / post as f64;
                    cells[slot] = Some(suffix[arc_index(&arcs, target)]);
                }
            }
            let target = SubGoalTarget::Waypoints {
                path: walk.path.iter().map(|&c| scene.cell_center(c)).collect(),
                directions: walk.directions.clone(),
            };
            let heading = 15.0 * rng.gen_range(0..24) as f64;
            let span = splice.full_path[splice.vln_start..=splice.vln_end].to_vec();
            (splice.full_path, heading, cells, Some(target), Some(span))
        }
    };

    // Snap each waypoint into a sub-goal plus a route anchor cell.
    let mut subgoals: Vec<SubGoal> = Vec::with_capacity(k);
    let mut anchors: Vec<Option<usize>> = Vec::with_capacity(k); // None = walk span
    let mut used_objects: Vec<u32> = Vec::new();
    for (j, &cap) in caps.iter().enumerate() {
        if cap == Capability::VLN {
            subgoals.push(SubGoal {
                capability: cap,
                target: vln_target.clone().expect("walk target present"),
                success_distance: cfg.success_distances.for_cap(cap),
                goal_signature: None,
            });
            anchors.push(None);
            continue;
        }
        let wp = waypoint_cells[j].expect("non-walk sub-goal has a waypoint");
        let sd = cfg.success_distances.for_cap(cap);
        match cap {
            Capability::PointNav => {
                let (x, y) = scene.cell_center(wp);
                subgoals.push(SubGoal {
                    capability: cap,
                    target: SubGoalTarget::Point { x, y, z: 0.0 },
                    success_distance: sd,
                    goal_signature: None,
                });
                anchors.push(Some(wp));
            }
            Capability::ImgNav => {
                let pose = goal_pose_at(scene, &path, wp);
                let signature = observe(scene, &pose, &CATEGORIES);
                subgoals.push(SubGoal {
                    capability: cap,
                    target: SubGoalTarget::GoalPose { pose },
                    success_distance: sd,
                    goal_signature: Some(signature),
                });
                anchors.push(Some(wp));
            }
            Capability::ObjNav | Capability::InsImgNav => {
                let (obj_id, approach) =
                    snap_object(scene, wp, sd, cfg.snap_radius, &used_objects)
                        .ok_or_else(|| GenError::Infeasible("no snappable object".into()))?;
                used_objects.push(obj_id);
                let obj = scene.object(obj_id).unwrap().clone();
                let signature = if cap == Capability::InsImgNav {
                    let samples = sample_goal_camera(scene, &obj, rng);
                    if samples.accepted.is_empty() {
                        return Err(GenError::Infeasible(format!(
                            "object {} has no goal-camera pose",
                            obj.id
                        )));
                    }
                    let pick = rng.gen_range(0..samples.accepted.len());
                    Some(observe(scene, &samples.accepted[pick], &CATEGORIES))
                } else {
                    None
                };
                subgoals.push(SubGoal {
                    capability: cap,
                    target: SubGoalTarget::Object {
                        id: obj.id,
                        category: obj.category.clone(),
                        center: obj.center,
                    },
                    success_distance: sd,
                    goal_signature: signature,
                });
                anchors.push(Some(approach));
            }
            Capability::VLN => unreachable!(),
        }
    }

    // Separation screens: start to first target, then consecutive targets.
    let start_cell = path[0];
    check_separations(scene, start_cell, &subgoals, cfg)?;

    // Route through anchors (walk span kept verbatim) and synthesize the
    // ground-truth actions.
    let route = build_route(scene, start_cell, &anchors, walk_cells.as_deref())?;
    let (sx, sy) = scene.cell_center(start_cell);
    let start = Pose::new(sx, sy, start_heading);
    let (gt_actions, gt_poses) = follow_route(scene, &start, &route)?;
    verify_ordered_entry(&gt_poses, &subgoals)?;

    let template = build_template(pool, caps, rng);
    let instruction_text = instantiate_instruction(&template, &subgoals, &start, episode_id)?;
    let geodesic_length = *arc_lengths(scene, &route).last().unwrap();

    Ok(Episode {
        id: episode_id,
        scene_id,
        start,
        subgoals,
        instruction_text,
        gt_actions,
        gt_poses,
        geodesic_length,
    })
}

/// Cumulative arc length along a cell path, meters.
fn arc_lengths(scene: &Scene, path: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(path.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in path.windows(2) {
        let (ax, ay) = scene.cell_center(w[0]);
        let (bx, by) = scene.cell_center(w[1]);
        acc += ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
        out.push(acc);
    }
    out
}

fn arc_index(arcs: &[f64], target: f64) -> usize {
    arcs.iter()
        .position(|&a| a >= target - 1e-12)
        .unwrap_or(arcs.len() - 1)
}

/// Goal pose at a waypoint, facing along the path.
fn goal_pose_at(scene: &Scene, path: &[usize], wp: usize) -> Pose {
    let i = path.iter().position(|&c| c == wp).unwrap_or(0);
    let (wx, wy) = scene.cell_center(wp);
    let (nx, ny) = if i + 1 < path.len() {
        scene.cell_center(path[i + 1])
    } else if i > 0 {
        let (px, py) = scene.cell_center(path[i - 1]);
        (2.0 * wx - px, 2.0 * wy - py)
    } else {
        (wx + 1.0, wy)
    };
    Pose::new(wx, wy, (ny - wy).atan2(nx - wx).to_degrees())
}

/// Nearest unused object within `snap_radius` of the waypoint that has a
/// navigable approach cell within 0.7 x success-distance of its center.
fn snap_object(
    scene: &Scene,
    wp: usize,
    success_distance: f64,
    snap_radius: f64,
    used: &[u32],
) -> Option<(u32, usize)> {
    let (wx, wy) = scene.cell_center(wp);
    let mut candidates: Vec<(f64, u32)> = scene
        .objects()
        .iter()
        .filter(|o| !used.contains(&o.id))
        .map(|o| {
            let d = ((o.center.0 - wx).powi(2) + (o.center.1 - wy).powi(2)).sqrt();
            (d, o.id)
        })
        .filter(|(d, _)| *d <= snap_radius)
        .collect();
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    for (_, id) in candidates {
        let obj = scene.object(id).unwrap();
        if let Some(cell) = scene.nearest_navigable_cell(obj.center.0, obj.center.1) {
            let (cx, cy) = scene.cell_center(cell);
            let d = ((cx - obj.center.0).powi(2) + (cy - obj.center.1).powi(2)).sqrt();
            if d <= 0.7 * success_distance {
                return Some((id, cell));
            }
        }
    }
    None
}

fn check_separations(
    scene: &Scene,
    start_cell: usize,
    subgoals: &[SubGoal],
    cfg: &GenConfig,
) -> Result<(), GenError> {
    let mut prev_cell = start_cell;
    let mut prev_sd = 0.0;
    for (j, sg) in subgoals.iter().enumerate() {
        let (tx, ty) = sg.target_point();
        let cell = scene
            .nearest_navigable_cell(tx, ty)
            .ok_or_else(|| GenError::Infeasible("target off the navigable area".into()))?;
        let needed = cfg.min_separation.max(prev_sd + sg.success_distance);
        let field = distance_field(scene, prev_cell);
        let sep = field
            .get(cell)
            .map(|d| d.meters(scene.resolution()))
            .ok_or_else(|| GenError::Infeasible("target unreachable".into()))?;
        if sep < needed {
            return Err(GenError::Infeasible(format!(
                "sub-goal {j} separation {sep:.2} < {needed:.2} m"
            )));
        }
        prev_cell = cell;
        prev_sd = sg.success_distance;
    }
    Ok(())
}

/// Full cell route: start -> anchors in order, with the walk span spliced
/// verbatim at its position.
fn build_route(
    scene: &Scene,
    start_cell: usize,
    anchors: &[Option<usize>],
    walk_cells: Option<&[usize]>,
) -> Result<Vec<usize>, GenError> {
    use crate::env::geodesic::shortest_cell_path;
    let mut route = vec![start_cell];
    let mut cur = start_cell;
    for anchor in anchors {
        match anchor {
            Some(cell) => {
                let seg = shortest_cell_path(scene, cur, *cell)
                    .ok_or_else(|| GenError::Infeasible("anchor unreachable".into()))?;
                route.extend_from_slice(&seg[1..]);
                cur = *cell;
            }
            None => {
                let walk = walk_cells.expect("walk anchor implies walk cells");
                let seg = shortest_cell_path(scene, cur, walk[0])
                    .ok_or_else(|| GenError::Infeasible("walk start unreachable".into()))?;
                route.extend_from_slice(&seg[1..]);
                route.extend_from_slice(&walk[1..]);
                cur = *walk.last().unwrap();
            }
        }
    }
    Ok(route)
}

/// Turns a cell route into executable actions by closed-loop following:
/// face the next corner within 7.5 degrees, then step forward with the
/// largest safe bin. Returns the action list and the recorded poses.
fn follow_route(
    scene: &Scene,
    start: &Pose,
    route: &[usize],
) -> Result<(Vec<Action>, Vec<Pose>), GenError> {
    // Keep corners and the final cell as explicit targets.
    let mut targets: Vec<(f64, f64)> = Vec::new();
    for (i, &cell) in route.iter().enumerate() {
        if i == 0 {
            continue;
        }
        let is_last = i == route.len() - 1;
        let is_corner = if i + 1 < route.len() && i > 0 {
            let (ax, ay) = scene.cell_xy(route[i - 1]);
            let (bx, by) = scene.cell_xy(cell);
            let (cx, cy) = scene.cell_xy(route[i + 1]);
            (bx as i64 - ax as i64, by as i64 - ay as i64)
                != (cx as i64 - bx as i64, cy as i64 - by as i64)
        } else {
            false
        };
        if is_last || is_corner {
            targets.push(scene.cell_center(cell));
        }
    }
    if targets.is_empty() {
        targets.push(scene.cell_center(*route.last().unwrap()));
    }

    let mut actions = Vec::new();
    let mut poses = vec![*start];
    let mut pose = *start;
    let mut stuck = 0u32;
    let budget = targets.len() * 40 + (route.len() as f64 * scene.resolution() / 0.25) as usize * 4 + 80;
    let mut ti = 0;
    while ti < targets.len() {
        if actions.len() > budget {
            return Err(GenError::Infeasible("follower exceeded its action budget".into()));
        }
        let (tx, ty) = targets[ti];
        let dist = pose.ground_distance(tx, ty);
        if dist <= REACH_TOL {
            ti += 1;
            stuck = 0;
            continue;
        }
        let rel = pose.relative_bearing(tx, ty);
        let action = if rel.abs() > FACE_TOL {
            let best = TurnDeg::ALL
                .iter()
                .min_by(|a, b| {
                    let da = (rel.abs() - a.degrees()).abs();
                    let db = (rel.abs() - b.degrees()).abs();
                    da.partial_cmp(&db).unwrap()
                })
                .copied()
                .unwrap();
            if rel > 0.0 {
                Action::TurnRight(best)
            } else {
                Action::TurnLeft(best)
            }
        } else {
            let bin = if dist >= 0.72 {
                ForwardCm::Cm75
            } else if dist >= 0.47 {
                ForwardCm::Cm50
            } else {
                ForwardCm::Cm25
            };
            Action::MoveForward(bin)
        };
        let next = step(scene, &pose, action);
        if let Action::MoveForward(_) = action {
            let moved = ((next.x - pose.x).powi(2) + (next.y - pose.y).powi(2)).sqrt();
            if moved < 0.02 {
                stuck += 1;
                if stuck > 12 {
                    return Err(GenError::Infeasible("follower wedged against a wall".into()));
                }
                // Deterministic wiggle: yaw away and retry.
                let wiggle = if stuck % 2 == 0 {
                    Action::TurnLeft(TurnDeg::Deg15)
                } else {
                    Action::TurnRight(TurnDeg::Deg15)
                };
                pose = step(scene, &pose, wiggle);
                actions.push(wiggle);
                poses.push(pose);
                continue;
            }
            stuck = 0;
        }
        pose = next;
        actions.push(action);
        poses.push(pose);
    }
    actions.push(Action::Stop);
    poses.push(pose);
    Ok((actions, poses))
}

/// Greedy ordered-entry check of the ground-truth poses through all
/// success areas.
fn verify_ordered_entry(poses: &[Pose], subgoals: &[SubGoal]) -> Result<(), GenError> {
    let mut idx = 0usize;
    for (j, sg) in subgoals.iter().enumerate() {
        let (tx, ty) = sg.target_point();
        let found = poses[idx..]
            .iter()
            .position(|p| p.ground_distance(tx, ty) <= sg.success_distance);
        match found {
            Some(off) => idx += off,
            None => {
                return Err(GenError::Infeasible(format!(
                    "ground truth never enters success area {j}"
                )))
            }
        }
    }
    Ok(())
}

/// Always-feasible fallback: a single point-goal to a well-separated cell.
fn fallback_pointnav(
    scene: &Scene,
    scene_id: u64,
    episode_id: u64,
    rng: &mut ChaCha8Rng,
    cfg: &GenConfig,
    pool: &TemplatePool,
) -> Result<Episode, GenError> {
    let cells = scene.navigable_cells();
    for _ in 0..50 {
        let start_cell = cells[rng.gen_range(0..cells.len())];
        let field = distance_field(scene, start_cell);
        // Farthest reachable cell keeps the episode non-trivial.
        let target = (0..scene.cell_count())
            .filter_map(|c| field.get(c).map(|d| (d, c)))
            .max_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        let (dist, target_cell) = match target {
            Some(x) => x,
            None => continue,
        };
        if dist.meters(scene.resolution()) < cfg.min_separation.max(1.0) {
            continue;
        }
        let route = field.path_to(target_cell).unwrap();
        let (sx, sy) = scene.cell_center(start_cell);
        let start = Pose::new(sx, sy, 15.0 * rng.gen_range(0..24) as f64);
        let (tx, ty) = scene.cell_center(target_cell);
        let subgoals = vec![SubGoal {
            capability: Capability::PointNav,
            target: SubGoalTarget::Point { x: tx, y: ty, z: 0.0 },
            success_distance: cfg.success_distances.for_cap(Capability::PointNav),
            goal_signature: None,
        }];
        let (gt_actions, gt_poses) = match follow_route(scene, &start, &route) {
            Ok(x) => x,
            Err(_) => continue,
        };
        if verify_ordered_entry(&gt_poses, &subgoals).is_err() {
            continue;
        }
        let template = build_template(pool, &[Capability::PointNav], rng);
        let instruction_text = instantiate_instruction(&template, &subgoals, &start, episode_id)?;
        let geodesic_length = *arc_lengths(scene, &route).last().unwrap();
        return Ok(Episode {
            id: episode_id,
            scene_id,
            start,
            subgoals,
            instruction_text,
            gt_actions,
            gt_poses,
            geodesic_length,
        });
    }
    Err(GenError::Infeasible(
        "even the fallback point-goal failed; scene may be degenerate".into(),
    ))
}

#[derive(Debug, Clone)]
pub struct DatasetGenConfig {
    pub seed: u64,
    pub scenes: usize,
    pub episodes: usize,
    pub scene_params: SceneParams,
    /// Offset into the scene-seed stream; disjoint offsets give held-out
    /// scene sets.
    pub scene_seed_offset: u64,
    pub gen: GenConfig,
}

/// Generates a dataset. Episode builds run parallel over indices with
/// per-episode seeds, so the output is identical for any worker count.
pub fn generate_dataset(
    cfg: &DatasetGenConfig,
    pool: &TemplatePool,
) -> Result<Vec<DatasetItem>, GenError> {
    let scene_seeds: Vec<u64> = (0..cfg.scenes)
        .map(|i| derive_seed(cfg.seed, STREAM_SCENE, cfg.scene_seed_offset + i as u64))
        .collect();
    let scenes: Vec<Scene> = scene_seeds
        .par_iter()
        .map(|&s| gen_scene(s, &cfg.scene_params))
        .collect::<Result<_, _>>()?;

    // Capability assignment is sequential: balancing depends on running
    // counts. Builds below are order-independent.
    let mut counts = [0u64; 5];
    let mut assignments: Vec<Vec<Capability>> = Vec::with_capacity(cfg.episodes);
    for ep in 0..cfg.episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_CAPS, ep as u64));
        let mut caps = sample_capabilities(&mut rng, &counts, &cfg.gen.length_weights);
        // Multiple walks in one episode are not splice-able; retry a few
        // times, then drop surplus walks.
        let mut guard = 0;
        while caps.iter().filter(|c| **c == Capability::VLN).count() > 1 && guard < 20 {
            caps = sample_capabilities(&mut rng, &counts, &cfg.gen.length_weights);
            guard += 1;
        }
        if caps.iter().filter(|c| **c == Capability::VLN).count() > 1 {
            let mut seen = false;
            caps = caps
                .into_iter()
                .map(|c| {
                    if c == Capability::VLN {
                        if seen {
                            Capability::ObjNav
                        } else {
                            seen = true;
                            c
                        }
                    } else {
                        c
                    }
                })
                .collect();
        }
        for c in &caps {
            counts[c.index()] += 1;
        }
        assignments.push(caps);
    }

    let items: Vec<Result<DatasetItem, GenError>> = (0..cfg.episodes)
        .into_par_iter()
        .map(|ep| {
            let scene_idx = ep % cfg.scenes;
            let scene = &scenes[scene_idx];
            let scene_seed = scene_seeds[scene_idx];
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_EPISODE, ep as u64));
            let episode = build_episode(
                scene,
                scene_seed,
                ep as u64,
                &assignments[ep],
                &mut rng,
                &cfg.gen,
                pool,
            )?;
            Ok(DatasetItem {
                scene_seed,
                scene_params: cfg.scene_params,
                episode,
            })
        })
        .collect();
    items.into_iter().collect()
}
