//! Capability and trajectory samplers with the straight-ratio filter.

use super::{Capability, GenError};
use crate::env::geodesic::distance_field;
use crate::env::{Pose, Scene};
use rand::Rng;

/// Default weights for the capability count k = 1..5.
pub const LENGTH_WEIGHTS: [f64; 5] = [0.20, 0.30, 0.25, 0.15, 0.10];

/// Samples an ordered capability list of length k in [1, 5].
///
/// k follows `length_weights`; capabilities are drawn without immediate
/// repetition, inversely weighted by running counts (`counts_so_far` plus
/// picks made within this sequence) so under-represented capabilities
/// catch up.
pub fn sample_capabilities(
    rng: &mut impl Rng,
    counts_so_far: &[u64; 5],
    length_weights: &[f64; 5],
) -> Vec<Capability> {
    let total: f64 = length_weights.iter().sum();
    let mut pick = rng.gen::<f64>() * total;
    let mut k = 1;
    for (i, w) in length_weights.iter().enumerate() {
        if pick < *w {
            k = i + 1;
            break;
        }
        pick -= w;
        k = i + 1;
    }

    let mut local = [0u64; 5];
    let mut out = Vec::with_capacity(k);
    let mut prev: Option<usize> = None;
    for _ in 0..k {
        let weights: Vec<f64> = (0..5)
            .map(|c| {
                if prev == Some(c) {
                    0.0
                } else {
                    1.0 / (1.0 + (counts_so_far[c] + local[c]) as f64)
                }
            })
            .collect();
        let sum: f64 = weights.iter().sum();
        let mut r = rng.gen::<f64>() * sum;
        let mut chosen = 0;
        for (c, w) in weights.iter().enumerate() {
            if r < *w {
                chosen = c;
                break;
            }
            r -= w;
            chosen = c;
        }
        local[chosen] += 1;
        prev = Some(chosen);
        out.push(Capability::ALL[chosen]);
    }
    out
}

/// Straight-ratio acceptance: ratios above 1.1 always pass, ratios in
/// [1.0, 1.1] pass with probability `10 * (ratio - 1)^2`.
///
/// A ratio below 1 violates the geodesic >= euclidean contract and is
/// reported as an error (tiny float slack is forgiven and clamped).
pub fn accept_by_ratio(ratio: f64, rng: &mut impl Rng) -> Result<bool, GenError> {
    if ratio < 1.0 - 1e-9 {
        return Err(GenError::RatioContract(ratio));
    }
    let ratio = ratio.max(1.0);
    if ratio > 1.1 {
        return Ok(true);
    }
    let p = 10.0 * (ratio - 1.0).powi(2);
    Ok(rng.gen::<f64>() < p)
}

#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub start: Pose,
    pub end: Pose,
    /// Shortest cell path from start to end (inclusive).
    pub path: Vec<usize>,
    pub geodesic: f64,
    pub ratio: f64,
}

const MAX_CANDIDATES: usize = 10_000;

/// Samples a start/end pair whose geodesic length lies within
/// `[3k, 10k] * scale` meters and whose straight ratio passes
/// [`accept_by_ratio`]. Fails with a diagnostic after 10k rejections.
pub fn sample_trajectory(
    scene: &Scene,
    k: usize,
    scale: f64,
    rng: &mut impl Rng,
) -> Result<TrajectorySample, GenError> {
    assert!((1..=5).contains(&k), "capability count k must be in [1, 5]");
    let lo = 3.0 * k as f64 * scale;
    let hi = 10.0 * k as f64 * scale;
    let cells = scene.navigable_cells();
    if cells.len() < 2 {
        return Err(GenError::Infeasible("scene has fewer than 2 navigable cells".into()));
    }
    for _ in 0..MAX_CANDIDATES {
        let start_cell = cells[rng.gen_range(0..cells.len())];
        let end_cell = cells[rng.gen_range(0..cells.len())];
        if start_cell == end_cell {
            continue;
        }
        let field = distance_field(scene, start_cell);
        let dist = match field.get(end_cell) {
            Some(d) => d,
            None => continue, // inaccessible start-end pair
        };
        let geodesic = dist.meters(scene.resolution());
        if geodesic < lo || geodesic > hi {
            continue;
        }
        let (sx, sy) = scene.cell_center(start_cell);
        let (ex, ey) = scene.cell_center(end_cell);
        let euclid = ((sx - ex).powi(2) + (sy - ey).powi(2)).sqrt();
        if euclid <= 0.0 {
            continue;
        }
        let ratio = geodesic / euclid;
        if !accept_by_ratio(ratio, rng)? {
            continue;
        }
        let path = field.path_to(end_cell).expect("end is reachable");
        let heading = 15.0 * rng.gen_range(0..24) as f64;
        let end_heading = 15.0 * rng.gen_range(0..24) as f64;
        return Ok(TrajectorySample {
            start: Pose::new(sx, sy, heading),
            end: Pose::new(ex, ey, end_heading),
            path,
            geodesic,
            ratio,
        });
    }
    let (w, h) = scene.extent();
    Err(GenError::SamplingExhausted {
        what: "trajectory sampling",
        attempts: MAX_CANDIDATES,
        detail: format!(
            "k={k}, target interval [{lo:.2}, {hi:.2}] m on a {w:.1}x{h:.1} m scene"
        ),
    })
}
