use super::*;
use crate::derive_seed;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fully navigable rectangle, no objects.
pub(crate) fn open_scene(width: usize, height: usize, resolution: f64) -> Scene {
    Scene::from_parts(
        width,
        height,
        resolution,
        0,
        vec![true; width * height],
        Vec::new(),
    )
}

/// Open scene with a given mask override (false = wall).
pub(crate) fn scene_with_walls(
    width: usize,
    height: usize,
    resolution: f64,
    walls: &[(usize, usize)],
    objects: Vec<SemanticObject>,
) -> Scene {
    let mut mask = vec![true; width * height];
    for &(x, y) in walls {
        mask[y * width + x] = false;
    }
    Scene::from_parts(width, height, resolution, 0, mask, objects)
}

fn flood_components(scene: &Scene) -> usize {
    let navigable_at = |x: i64, y: i64| -> bool {
        x >= 0
            && y >= 0
            && x < scene.width() as i64
            && y < scene.height() as i64
            && scene.is_navigable_cell(scene.cell_index(x as usize, y as usize))
    };
    let mut seen = vec![false; scene.cell_count()];
    let mut comps = 0;
    for start in 0..scene.cell_count() {
        if !scene.is_navigable_cell(start) || seen[start] {
            continue;
        }
        comps += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(cell) = stack.pop() {
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
    }
    comps
}

#[test]
fn gen_scene_deterministic_in_seed() {
    let params = SceneParams::default();
    let a = gen_scene(7, &params).unwrap();
    let b = gen_scene(7, &params).unwrap();
    assert_eq!(scene_to_json(&a), scene_to_json(&b));
}

#[test]
fn gen_scene_seed_sensitivity() {
    let params = SceneParams::default();
    let a = gen_scene(7, &params).unwrap();
    let b = gen_scene(8, &params).unwrap();
    let mask_a: Vec<bool> = (0..a.cell_count()).map(|i| a.is_navigable_cell(i)).collect();
    let mask_b: Vec<bool> = (0..b.cell_count()).map(|i| b.is_navigable_cell(i)).collect();
    assert_ne!(mask_a, mask_b);
}

#[test]
fn gen_scene_single_component_flood_fill_oracle() {
    for seed in 0..10u64 {
        let scene = gen_scene(seed, &SceneParams::default()).unwrap();
        assert_eq!(flood_components(&scene), 1, "seed {seed}");
        assert!(scene.navigable_cells().len() >= 100);
    }
}

#[test]
fn gen_scene_rejects_bad_params() {
    let mut p = SceneParams::default();
    p.width = 20;
    assert!(matches!(
        gen_scene(1, &p),
        Err(EnvError::InvalidParams(_))
    ));
    let mut p = SceneParams::default();
    p.resolution = 0.5;
    assert!(gen_scene(1, &p).is_err());
    let mut p = SceneParams::default();
    p.objects = 2;
    assert!(gen_scene(1, &p).is_err());
}

#[test]
fn geodesic_same_cell_is_zero() {
    let scene = open_scene(10, 10, 0.1);
    let a = Pose::new(0.31, 0.33, 0.0);
    let b = Pose::new(0.35, 0.38, 90.0);
    assert_eq!(geodesic_distance(&scene, &a, &b).unwrap(), 0.0);
}

#[test]
fn geodesic_straight_line_hand_count() {
    // 9 straight steps of 0.1 m between (0.05, 0.05) and (0.05, 0.95).
    let scene = open_scene(10, 10, 0.1);
    let a = Pose::new(0.05, 0.05, 0.0);
    let b = Pose::new(0.05, 0.95, 0.0);
    let d = geodesic_distance(&scene, &a, &b).unwrap();
    assert!((d - 0.9).abs() < 1e-12, "got {d}");
}

#[test]
fn geodesic_unreachable_in_sealed_room() {
    // Seal off the cell block x in [6..10), y in [6..10) with walls.
    let mut walls = Vec::new();
    for k in 4..10 {
        walls.push((5, k));
        walls.push((k, 5));
    }
    let scene = scene_with_walls(10, 10, 0.1, &walls, Vec::new());
    let a = Pose::new(0.15, 0.15, 0.0);
    let b = Pose::new(0.85, 0.85, 0.0);
    assert!(matches!(
        geodesic_distance(&scene, &a, &b),
        Err(EnvError::Unreachable)
    ));
}

#[test]
fn geodesic_symmetry_and_lower_bound() {
    let scene = gen_scene(3, &SceneParams::default()).unwrap();
    let cells = scene.navigable_cells();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let ca = cells[rng.gen_range(0..cells.len())];
        let cb = cells[rng.gen_range(0..cells.len())];
        let (ax, ay) = scene.cell_center(ca);
        let (bx, by) = scene.cell_center(cb);
        let a = Pose::new(ax, ay, 0.0);
        let b = Pose::new(bx, by, 0.0);
        let d_ab = geodesic_distance(&scene, &a, &b).unwrap();
        let d_ba = geodesic_distance(&scene, &b, &a).unwrap();
        assert_eq!(d_ab, d_ba);
        let euclid = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
        assert!(
            d_ab >= euclid - std::f64::consts::SQRT_2 * scene.resolution() - 1e-9,
            "geodesic {d_ab} under euclid {euclid}"
        );
    }
}

#[test]
fn step_turn_wraparound() {
    let scene = open_scene(10, 10, 0.1);
    let pose = Pose::new(0.5, 0.5, 350.0);
    let turned = step(&scene, &pose, Action::TurnRight(TurnDeg::Deg30));
    assert!((turned.heading - 20.0).abs() < 1e-12);
    let back = step(&scene, &turned, Action::TurnLeft(TurnDeg::Deg30));
    assert!((back.heading - 350.0).abs() < 1e-12);
}

#[test]
fn step_forward_open_space() {
    let scene = open_scene(40, 40, 0.1);
    let pose = Pose::new(2.0, 2.0, 33.0);
    let moved = step(&scene, &pose, Action::MoveForward(ForwardCm::Cm50));
    let disp = ((moved.x - pose.x).powi(2) + (moved.y - pose.y).powi(2)).sqrt();
    assert!((disp - 0.5).abs() < 1e-9, "displacement {disp}");
}

#[test]
fn step_forward_clamps_before_wall() {
    // Wall column at x cell 15 (x in [1.5, 1.6)); pose 0.3 m before it.
    let walls: Vec<(usize, usize)> = (0..40).map(|y| (15, y)).collect();
    let scene = scene_with_walls(40, 40, 0.1, &walls, Vec::new());
    let pose = Pose::new(1.2, 2.0, 0.0);
    let moved = step(&scene, &pose, Action::MoveForward(ForwardCm::Cm75));
    let advanced = moved.x - pose.x;
    // Dense-sampling oracle for the maximal free advance along the ray.
    let mut oracle_max: f64 = 0.0;
    let mut t = 0.0;
    while t <= 0.75 {
        if scene.is_navigable_point(pose.x + t, pose.y) {
            oracle_max = t;
        } else {
            break;
        }
        t += scene.resolution() / 20.0;
    }
    assert!(advanced < 0.3, "advanced {advanced}");
    assert!(advanced <= oracle_max + 1e-12);
    assert!(scene.is_navigable_point(moved.x, moved.y));
}

#[test]
fn step_stop_is_identity_and_never_leaves_navigable() {
    let scene = gen_scene(5, &SceneParams::default()).unwrap();
    let cells = scene.navigable_cells();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (sx, sy) = scene.cell_center(cells[rng.gen_range(0..cells.len())]);
    let mut pose = Pose::new(sx, sy, 15.0 * rng.gen_range(0..24) as f64);
    for _ in 0..10_000 {
        let action = match rng.gen_range(0..4) {
            0 => Action::MoveForward(ForwardCm::ALL[rng.gen_range(0..3)]),
            1 => Action::TurnLeft(TurnDeg::ALL[rng.gen_range(0..4)]),
            2 => Action::TurnRight(TurnDeg::ALL[rng.gen_range(0..4)]),
            _ => Action::Stop,
        };
        let next = step(&scene, &pose, action);
        if action.is_stop() {
            assert_eq!(next, pose);
        }
        assert!(
            scene.is_navigable_point(next.x, next.y),
            "non-navigable pose after {action:?}"
        );
        pose = next;
    }
}

#[test]
fn visible_in_open_room_and_behind_wall() {
    let obj = SemanticObject {
        id: 0,
        category: "chair".into(),
        center: (2.5, 2.0),
        radius: 0.15,
        top_height: 1.0,
    };
    let open = Scene::from_parts(40, 40, 0.1, 0, vec![true; 1600], vec![obj.clone()]);
    let pose = Pose::new(2.0, 2.0, 0.0);
    assert!(visible(&open, &pose, &open.objects()[0].clone()));

    let walls: Vec<(usize, usize)> = (0..40).map(|y| (22, y)).collect();
    let walled = scene_with_walls(40, 40, 0.1, &walls, vec![obj]);
    assert!(!visible(&walled, &pose, &walled.objects()[0].clone()));
}

#[test]
fn visible_agrees_with_fine_ray_march_oracle() {
    // Independent oracle: sample the segment at resolution/4 steps and
    // flag any non-exempt blocked cell.
    fn oracle(scene: &Scene, pose: &Pose, obj: &SemanticObject) -> bool {
        let fp = scene.footprint_of(obj.id);
        let (tx, ty) = obj.center;
        let len = pose.ground_distance(tx, ty);
        let step = scene.resolution() / 4.0;
        let n = (len / step).ceil() as usize;
        for k in 0..=n {
            let t = (k as f64 * step).min(len);
            let x = pose.x + (tx - pose.x) * t / len.max(1e-12);
            let y = pose.y + (ty - pose.y) * t / len.max(1e-12);
            match scene.cell_of(x, y) {
                Some((cx, cy)) => {
                    let idx = scene.cell_index(cx, cy);
                    if !scene.is_navigable_cell(idx) && !fp.contains(&(idx as u32)) {
                        return false;
                    }
                }
                None => return false,
            }
        }
        true
    }

    let mut rng = ChaCha8Rng::seed_from_u64(424242);
    let mut checked = 0;
    for seed in 0..5u64 {
        let scene = gen_scene(derive_seed(17, 1, seed), &SceneParams::default()).unwrap();
        let cells = scene.navigable_cells();
        for _ in 0..100 {
            let (px, py) = scene.cell_center(cells[rng.gen_range(0..cells.len())]);
            let pose = Pose::new(px, py, rng.gen_range(0.0..360.0));
            let obj = &scene.objects()[rng.gen_range(0..scene.objects().len())].clone();
            assert_eq!(
                visible(&scene, &pose, obj),
                oracle(&scene, &pose, obj),
                "pose ({px}, {py}) -> object {}",
                obj.id
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 500);
}

#[test]
fn visible_monotone_under_wall_removal() {
    let scene = gen_scene(21, &SceneParams::default()).unwrap();
    let cells = scene.navigable_cells();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // Rebuild the same scene with every wall removed: anything visible
    // before must stay visible.
    let all_open = Scene::from_parts(
        scene.width(),
        scene.height(),
        scene.resolution(),
        scene.seed(),
        vec![true; scene.cell_count()],
        scene.objects().to_vec(),
    );
    for _ in 0..200 {
        let (px, py) = scene.cell_center(cells[rng.gen_range(0..cells.len())]);
        let pose = Pose::new(px, py, 0.0);
        let obj = scene.objects()[rng.gen_range(0..scene.objects().len())].clone();
        if visible(&scene, &pose, &obj) {
            assert!(visible(&all_open, &pose, &obj));
        }
    }
}

#[test]
fn frame_coverage_close_camera_dominates() {
    let obj = SemanticObject {
        id: 0,
        category: "sofa".into(),
        center: (3.0, 3.0),
        radius: 0.4,
        top_height: 1.6,
    };
    let scene = Scene::from_parts(60, 60, 0.1, 0, vec![true; 3600], vec![obj.clone()]);
    let camera = Pose::new(3.0 + 0.5 * obj.radius, 3.0, 0.0).with_height(1.1);
    let cov = frame_coverage(&scene, &camera, &obj);
    assert!(cov >= 0.5, "coverage {cov}");
}

#[test]
fn frame_coverage_zero_when_fully_occluded() {
    let obj = SemanticObject {
        id: 0,
        category: "tv".into(),
        center: (3.0, 2.0),
        radius: 0.2,
        top_height: 1.2,
    };
    let walls: Vec<(usize, usize)> = (0..40).map(|y| (22, y)).collect();
    let scene = scene_with_walls(40, 40, 0.1, &walls, vec![obj.clone()]);
    let camera = Pose::new(1.0, 2.0, 0.0);
    assert_eq!(frame_coverage(&scene, &camera, &obj), 0.0);
}

#[test]
fn frame_coverage_monotone_in_distance() {
    let obj = SemanticObject {
        id: 0,
        category: "shelf".into(),
        center: (4.0, 4.0),
        radius: 0.35,
        top_height: 1.5,
    };
    let scene = Scene::from_parts(80, 80, 0.1, 0, vec![true; 6400], vec![obj.clone()]);
    let mut last = f64::INFINITY;
    for r in [0.5, 1.0, 1.5, 2.0] {
        let camera = Pose::new(4.0 - r, 4.0, 0.0);
        let cov = frame_coverage(&scene, &camera, &obj);
        assert!(cov <= last + 1e-12, "coverage increased at r={r}: {cov} > {last}");
        last = cov;
    }
}

#[test]
fn observe_deterministic_and_zero_histogram_without_objects() {
    let scene = open_scene(40, 40, 0.1);
    let pose = Pose::new(2.05, 2.05, 45.0);
    let a = observe(&scene, &pose, &CATEGORIES);
    let b = observe(&scene, &pose, &CATEGORIES);
    assert_eq!(a, b);
    let layout = ObsLayout {
        categories: CATEGORIES.len(),
    };
    assert!(a.histogram(&layout).iter().all(|&v| v == 0.0));
    assert_eq!(a.len(), layout.len());
    assert!(a.as_slice().iter().all(|v| v.is_finite()));
    assert!(a.patch().iter().all(|&v| v == 0.0 || v == 1.0));
}

#[test]
fn observe_quarter_rotation_permutes_patch() {
    let scene = gen_scene(2, &SceneParams::default()).unwrap();
    let cells = scene.navigable_cells();
    let (px, py) = scene.cell_center(cells[cells.len() / 2]);
    let p0 = observe(&scene, &Pose::new(px, py, 0.0), &CATEGORIES);
    let p90 = observe(&scene, &Pose::new(px, py, 90.0), &CATEGORIES);
    let side = observe::PATCH_SIDE;
    for i in 0..side {
        for j in 0..side {
            // patch at heading 90, local (du=j, dv=i), equals patch at
            // heading 0 sampled at (du'=-dv, dv'=du).
            let i0 = j;
            let j0 = side - 1 - i;
            assert_eq!(
                p90.patch()[i * side + j],
                p0.patch()[i0 * side + j0],
                "mismatch at ({i}, {j})"
            );
        }
    }
}

#[test]
fn scene_round_trip_is_lossless() {
    let scene = gen_scene(13, &SceneParams::default()).unwrap();
    let text = scene_to_json(&scene);
    let back = scene_from_json(&text).unwrap();
    assert_eq!(scene_to_json(&back), text);
    assert_eq!(back.objects(), scene.objects());
    for i in 0..scene.cell_count() {
        assert_eq!(back.is_navigable_cell(i), scene.is_navigable_cell(i));
    }
}

#[test]
fn scene_rejects_malformed_rle() {
    let scene = gen_scene(13, &SceneParams::default()).unwrap();
    let mut record = SceneRecord::from_scene(&scene);
    record.navigable_rle.pop();
    let json = serde_json::to_string(&record).unwrap();
    assert!(matches!(
        scene_from_json(&json),
        Err(EnvError::Malformed(_))
    ));
}

#[test]
fn object_centers_touch_navigable_space() {
    for seed in [1u64, 2, 3] {
        let scene = gen_scene(seed, &SceneParams::default()).unwrap();
        for obj in scene.objects() {
            let (cx, cy) = scene.cell_of(obj.center.0, obj.center.1).unwrap();
            let mut ok = false;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let nx = cx as i64 + dx;
                    let ny = cy as i64 + dy;
                    if nx < 0
                        || ny < 0
                        || nx >= scene.width() as i64
                        || ny >= scene.height() as i64
                    {
                        continue;
                    }
                    if scene.is_navigable_cell(scene.cell_index(nx as usize, ny as usize)) {
                        ok = true;
                    }
                }
            }
            assert!(ok, "object {} isolated", obj.id);
        }
    }
}
