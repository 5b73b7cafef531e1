//! octokit: a desk-scale embodied-navigation kit.
//!
//! The crate bundles everything needed to study multi-capability
//! instruction-following navigation on a laptop:
//!
//! 1. **`env`** — a continuous-pose agent over procedural occupancy-grid
//!    scenes: collision-aware kinematics, geodesic distances, ray
//!    visibility and feature-vector observations.
//! 2. **`benchgen`** — constructs instruction-trajectory episodes:
//!    capability sampling, constrained trajectory sampling, waypoint
//!    splicing, goal-camera sampling and template instantiation.
//! 3. **`metrics`** — ordered sub-task success, oracle success and
//!    path-length bookkeeping feeding SR / OSR / SPL reports.
//! 4. **`policy`** — a tiny differentiable autoregressive policy with a
//!    closed token vocabulary, exact log-probabilities and a tape-based
//!    reverse-mode gradient engine.
//! 5. **`train`** — the three-stage training stack: supervised
//!    fine-tuning (plain and think-before-action), group-relative policy
//!    optimization with a stepped reward, and online advantage
//!    actor-critic with critic warm-up.
//! 6. **`tba`** — think-before-action dataset synthesis over a pluggable
//!    text-generation client with a deterministic stub.
//! 7. **`rollout`** — closed-loop inference producing trajectories for
//!    the metrics engine and transitions for online RL.
//! 8. **`config` / `pipeline`** — run configuration, stage orchestration
//!    and report emission, exposed through the `octokit` binary.
//!
//! See the crate `examples/` directory for one runnable example per
//! capability, and `README.md` for the end-to-end walkthrough.

pub mod benchgen;
pub mod env;
pub mod metrics;

/// Mixes a base seed with per-purpose stream and index labels.
///
/// Generation is parallel over item indices; deriving one seed per item
/// keeps outputs independent of worker count and scheduling.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = base
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(stream.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(index.wrapping_mul(0x94d0_49bb_1331_11eb))
        .wrapping_add(0x2545_f491_4f6c_dd1d);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over bytes, used for content-addressing stage outputs.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
