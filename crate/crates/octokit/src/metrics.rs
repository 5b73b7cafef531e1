//! Ordered sub-task evaluation: S / OS indicators, shortest and executed
//! path lengths, and SR / OSR / SPL aggregation per capability and overall.
//!
//! Sub-task `j` succeeds when strictly increasing trajectory indices
//! `k_1 < ... < k_j` enter areas `1..j` in order; oracle success only asks
//! whether an area was ever touched. `L_j` is the shortest path length from
//! the start that satisfies `S_j` (multi-stage Dijkstra over area cells,
//! exact on the grid); `TL_j` is the executed arc length up to the earliest
//! completing index, `+inf` when the sub-task failed.

use crate::benchgen::{Capability, Episode, SubGoal};
use crate::env::geodesic::{distance_field_from, DistanceField, GridDist};
use crate::env::{geodesic_distance, Pose, Scene};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Per-capability success distances, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessDistances {
    pub point_nav: f64,
    pub img_nav: f64,
    pub obj_nav: f64,
    pub ins_img_nav: f64,
    pub vln: f64,
}

impl Default for SuccessDistances {
    fn default() -> Self {
        SuccessDistances {
            point_nav: 0.36,
            img_nav: 0.36,
            obj_nav: 1.0,
            ins_img_nav: 1.0,
            vln: 3.0,
        }
    }
}

impl SuccessDistances {
    pub fn for_cap(&self, cap: Capability) -> f64 {
        match cap {
            Capability::PointNav => self.point_nav,
            Capability::ImgNav => self.img_nav,
            Capability::ObjNav => self.obj_nav,
            Capability::InsImgNav => self.ins_img_nav,
            Capability::VLN => self.vln,
        }
    }
}

/// Distance notion for success-area membership (the shortest-path lengths
/// always use the grid geodesic).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MembershipMetric {
    #[default]
    Euclidean,
    Geodesic,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalConfig {
    pub membership: MembershipMetric,
}

/// True iff the pose lies within the sub-goal's success distance of its
/// target point (closed inequality).
pub fn success_area_member(
    scene: &Scene,
    p: &Pose,
    subgoal: &SubGoal,
    cfg: &EvalConfig,
) -> bool {
    let (tx, ty) = subgoal.target_point();
    match cfg.membership {
        MembershipMetric::Euclidean => p.ground_distance(tx, ty) <= subgoal.success_distance,
        MembershipMetric::Geodesic => {
            let target = Pose::new(tx, ty, 0.0);
            matches!(geodesic_distance(scene, p, &target), Ok(d) if d <= subgoal.success_distance)
        }
    }
}

/// Book-keeping for one sub-task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubTaskOutcome {
    pub capability: Capability,
    pub os: bool,
    pub s: bool,
    /// Shortest cumulative length satisfying `S_j`, meters.
    pub l_cum: f64,
    /// Executed cumulative length satisfying `S_j`, meters (`+inf` on
    /// failure).
    pub tl_cum: f64,
    /// Local shortest length `L_j - L_{j-1}`.
    pub l_local: f64,
    /// Local executed length `TL_j - TL_{j-1}` (`+inf` on failure).
    pub tl_local: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub subtasks: Vec<SubTaskOutcome>,
    pub success: bool,
    pub oracle_success: bool,
}

/// Evaluates one executed trajectory against an episode.
pub fn eval_episode(
    scene: &Scene,
    episode: &Episode,
    executed: &[Pose],
    cfg: &EvalConfig,
) -> EvalOutcome {
    assert!(!executed.is_empty(), "executed trajectory must be non-empty");
    let res = scene.resolution();
    let num = episode.subgoals.len();

    // Membership of every pose in every area.
    let member: Vec<Vec<bool>> = episode
        .subgoals
        .iter()
        .map(|sg| {
            executed
                .iter()
                .map(|p| success_area_member(scene, p, sg, cfg))
                .collect()
        })
        .collect();

    // Executed cumulative arc length per index.
    let mut cum = Vec::with_capacity(executed.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in executed.windows(2) {
        acc += ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt();
        cum.push(acc);
    }

    // Greedy earliest strictly increasing completion indices.
    let mut s_flags = vec![false; num];
    let mut tl_cum = vec![f64::INFINITY; num];
    let mut cursor: Option<usize> = None; // last used index
    for j in 0..num {
        let from = cursor.map_or(0, |c| c + 1);
        let hit = (from..executed.len()).find(|&i| member[j][i]);
        match hit {
            Some(i) => {
                s_flags[j] = true;
                tl_cum[j] = cum[i];
                cursor = Some(i);
            }
            None => break,
        }
    }
    let os_flags: Vec<bool> = (0..num).map(|j| member[j].iter().any(|&m| m)).collect();

    // Shortest ordered-tour lengths via multi-stage Dijkstra.
    let area_cells: Vec<Vec<usize>> = episode
        .subgoals
        .iter()
        .map(|sg| area_cells_for(scene, sg, cfg))
        .collect();
    let start_cell = scene.nearest_navigable_cell(episode.start.x, episode.start.y);
    let mut l_cum = vec![f64::INFINITY; num];
    if let Some(start_cell) = start_cell {
        let mut field: DistanceField =
            distance_field_from(scene, &[(start_cell, GridDist::ZERO)]);
        for j in 0..num {
            let mut sources: Vec<(usize, GridDist)> = Vec::new();
            let mut best: Option<GridDist> = None;
            for &cell in &area_cells[j] {
                if let Some(d) = field.get(cell) {
                    sources.push((cell, d));
                    if best.map_or(true, |b| d < b) {
                        best = Some(d);
                    }
                }
            }
            match best {
                Some(b) => l_cum[j] = b.meters(res),
                None => break,
            }
            field = distance_field_from(scene, &sources);
        }
    }

    let mut subtasks = Vec::with_capacity(num);
    for j in 0..num {
        let l_prev = if j == 0 { 0.0 } else { l_cum[j - 1] };
        let tl_prev = if j == 0 { 0.0 } else { tl_cum[j - 1] };
        let l_local = if l_cum[j].is_finite() {
            l_cum[j] - l_prev
        } else {
            f64::INFINITY
        };
        let tl_local = if tl_cum[j].is_finite() {
            tl_cum[j] - tl_prev
        } else {
            f64::INFINITY
        };
        subtasks.push(SubTaskOutcome {
            capability: episode.subgoals[j].capability,
            os: os_flags[j],
            s: s_flags[j],
            l_cum: l_cum[j],
            tl_cum: tl_cum[j],
            l_local,
            tl_local,
        });
    }
    EvalOutcome {
        success: s_flags.last().copied().unwrap_or(true),
        oracle_success: os_flags.last().copied().unwrap_or(true),
        subtasks,
    }
}

/// Navigable cells inside a success area under the membership metric.
fn area_cells_for(scene: &Scene, sg: &SubGoal, cfg: &EvalConfig) -> Vec<usize> {
    let (tx, ty) = sg.target_point();
    match cfg.membership {
        MembershipMetric::Euclidean => {
            let r = sg.success_distance;
            let res = scene.resolution();
            let x0 = (((tx - r) / res).floor().max(0.0)) as usize;
            let y0 = (((ty - r) / res).floor().max(0.0)) as usize;
            let x1 = (((tx + r) / res).ceil() as usize).min(scene.width().saturating_sub(1));
            let y1 = (((ty + r) / res).ceil() as usize).min(scene.height().saturating_sub(1));
            let mut cells = Vec::new();
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    let idx = scene.cell_index(cx, cy);
                    if !scene.is_navigable_cell(idx) {
                        continue;
                    }
                    let (px, py) = scene.cell_center(idx);
                    if ((px - tx).powi(2) + (py - ty).powi(2)).sqrt() <= r {
                        cells.push(idx);
                    }
                }
            }
            cells
        }
        MembershipMetric::Geodesic => match scene.nearest_navigable_cell(tx, ty) {
            Some(target_cell) => {
                let field = distance_field_from(scene, &[(target_cell, GridDist::ZERO)]);
                (0..scene.cell_count())
                    .filter(|&c| {
                        matches!(field.get(c), Some(d) if d.meters(scene.resolution()) <= sg.success_distance)
                    })
                    .collect()
            }
            None => Vec::new(),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub sr: f64,
    pub spl: f64,
    pub osr: f64,
}

/// SR / SPL / OSR per capability (absent buckets omitted) and overall.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub overall: MetricTriple,
    pub per_capability: BTreeMap<Capability, MetricTriple>,
    pub episodes: usize,
}

/// One efficiency term `S * l / max(l, tl)`. A zero success indicator
/// forces a zero term, so infinite executed lengths never propagate; a
/// zero-length requirement satisfied at zero length counts as perfect.
fn spl_term(s: bool, l: f64, tl: f64) -> f64 {
    if !s || !l.is_finite() {
        return 0.0;
    }
    let denom = l.max(tl);
    if denom == 0.0 {
        1.0
    } else {
        l / denom
    }
}

/// Aggregates evaluation outcomes exactly as the per-capability and
/// overall formulas prescribe: capability metrics average over sub-tasks of
/// that capability; overall metrics average the final sub-task of each
/// episode.
pub fn aggregate(outcomes: &[EvalOutcome]) -> Report {
    let mut cap_counts: BTreeMap<Capability, usize> = BTreeMap::new();
    let mut cap_sr: BTreeMap<Capability, f64> = BTreeMap::new();
    let mut cap_osr: BTreeMap<Capability, f64> = BTreeMap::new();
    let mut cap_spl: BTreeMap<Capability, f64> = BTreeMap::new();
    let mut overall_sr = 0.0;
    let mut overall_osr = 0.0;
    let mut overall_spl = 0.0;
    for outcome in outcomes {
        for sub in &outcome.subtasks {
            *cap_counts.entry(sub.capability).or_insert(0) += 1;
            *cap_sr.entry(sub.capability).or_insert(0.0) += if sub.s { 1.0 } else { 0.0 };
            *cap_osr.entry(sub.capability).or_insert(0.0) += if sub.os { 1.0 } else { 0.0 };
            *cap_spl.entry(sub.capability).or_insert(0.0) +=
                spl_term(sub.s, sub.l_local, sub.tl_local);
        }
        if let Some(last) = outcome.subtasks.last() {
            overall_sr += if last.s { 1.0 } else { 0.0 };
            overall_osr += if last.os { 1.0 } else { 0.0 };
            overall_spl += spl_term(last.s, last.l_cum, last.tl_cum);
        }
    }
    let n = outcomes.len().max(1) as f64;
    let per_capability = cap_counts
        .iter()
        .map(|(&cap, &count)| {
            let c = count as f64;
            (
                cap,
                MetricTriple {
                    sr: cap_sr[&cap] / c,
                    spl: cap_spl[&cap] / c,
                    osr: cap_osr[&cap] / c,
                },
            )
        })
        .collect();
    Report {
        overall: MetricTriple {
            sr: overall_sr / n,
            spl: overall_spl / n,
            osr: overall_osr / n,
        },
        per_capability,
        episodes: outcomes.len(),
    }
}
