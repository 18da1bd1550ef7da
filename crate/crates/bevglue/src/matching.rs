//! Common-subgraph matching between two object graphs.
//!
//! The matcher looks for the largest set of node pairs whose features agree:
//! paired nodes must look alike (extent affinity above the node gate) and
//! every two pairs must see each other alike in both graphs (edge affinity
//! above the edge gate, checked in both edge directions). Affinities map
//! feature distance to `(0, 1]` through a negative exponential, so the gates
//! are absolute distance budgets in disguise.
//!
//! Search runs in three steps: candidate seeding (optionally carrying the
//! previous frame's matches forward by track id), greedy expansion under
//! strict pairwise consistency, and selection of the best grown candidate.
//! Strictness buys an outlier-free guarantee: every returned pair set is
//! mutually consistent, so the downstream pose solve needs no robustifier.
//!
//! Left/right in a pair `(m, n)` index into the first/second graph.

use thiserror::Error;

use crate::geometry::wrap;
use crate::graph::{EdgeFeature, NodeFeature, ObjectGraph};

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("invalid match config: {0}")]
    InvalidConfig(&'static str),
    #[error("exhaustive search limited to {limit} nodes per side, got {nodes}")]
    TooLargeForExhaustive { nodes: usize, limit: usize },
}

/// Gates and distance scales for the affinity forms.
///
/// Defaults suit near-noiseless detections; widen the sigmas when the
/// expected center error grows beyond a couple of decimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchConfig {
    /// Admission threshold on node affinity, in `(0, 1]`.
    pub min_node_affinity: f64,
    /// Admission threshold on edge affinity, in `(0, 1]`.
    pub min_edge_affinity: f64,
    /// Extent-difference scale (meters) in the node affinity.
    pub sigma_extent: f64,
    /// Range-difference scale (meters) in the edge affinity.
    pub sigma_range: f64,
    /// Bearing-difference scale (radians) in the edge affinity.
    pub sigma_bearing: f64,
    /// Relative-heading-difference scale (radians) in the edge affinity.
    pub sigma_heading: f64,
    /// Cap on the number of seeds grown per frame.
    pub max_candidates: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            min_node_affinity: (-1.0f64).exp(),
            min_edge_affinity: (-1.0f64).exp(),
            sigma_extent: 0.5,
            sigma_range: 0.5,
            sigma_bearing: 0.2,
            sigma_heading: 0.2,
            max_candidates: 64,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), MatchError> {
        for (what, v) in [
            ("sigma_extent", self.sigma_extent),
            ("sigma_range", self.sigma_range),
            ("sigma_bearing", self.sigma_bearing),
            ("sigma_heading", self.sigma_heading),
        ] {
            if !(v.is_finite() && v > 0.0) {
                let _ = what;
                return Err(MatchError::InvalidConfig(
                    "distance scales must be positive and finite",
                ));
            }
        }
        for v in [self.min_node_affinity, self.min_edge_affinity] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(MatchError::InvalidConfig(
                    "affinity gates must lie in (0, 1]",
                ));
            }
        }
        if self.max_candidates == 0 {
            return Err(MatchError::InvalidConfig("max_candidates must be >= 1"));
        }
        Ok(())
    }
}

/// Similarity of two boxes by extent alone; track ids play no part.
pub fn node_affinity(a: &NodeFeature, b: &NodeFeature, cfg: &MatchConfig) -> f64 {
    let d = (a.length - b.length).abs() + (a.width - b.width).abs();
    (-d / cfg.sigma_extent).exp()
}

/// Similarity of two directed edges; angle differences are wrapped before
/// taking magnitudes, so bearings just across the boundary stay close.
pub fn edge_affinity(a: &EdgeFeature, b: &EdgeFeature, cfg: &MatchConfig) -> f64 {
    let d = (a.rho - b.rho).abs() / cfg.sigma_range
        + wrap(a.theta - b.theta).abs() / cfg.sigma_bearing
        + wrap(a.psi_rel - b.psi_rel).abs() / cfg.sigma_heading;
    (-d).exp()
}

/// A matched pair set between two graphs, plus its selection confidence.
///
/// Pairs are sorted by left index and one-to-one on both sides. Track-id
/// pairs are carried so a later frame can seed from this result after node
/// indices have changed.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonSubgraph {
    pairs: Vec<(usize, usize)>,
    track_pairs: Vec<(u32, u32)>,
    confidence: f64,
}

impl CommonSubgraph {
    pub fn empty() -> Self {
        Self {
            pairs: Vec::new(),
            track_pairs: Vec::new(),
            confidence: 0.0,
        }
    }

    pub(crate) fn from_pairs(
        mut pairs: Vec<(usize, usize)>,
        gi: &ObjectGraph,
        gj: &ObjectGraph,
        cfg: &MatchConfig,
    ) -> Self {
        pairs.sort_unstable();
        let confidence = confidence_of(&pairs, gi, gj, cfg);
        let track_pairs = pairs
            .iter()
            .map(|&(m, n)| (gi.node(m).track_id, gj.node(n).track_id))
            .collect();
        Self {
            pairs,
            track_pairs,
            confidence,
        }
    }

    /// Matched `(left, right)` node indices, sorted by left index.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Matched track ids, aligned with `pairs`.
    pub fn track_pairs(&self) -> &[(u32, u32)] {
        &self.track_pairs
    }

    /// Sum of node affinities plus both-direction edge affinities over the
    /// matched set; zero for an empty match.
    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Total affinity score of a pair set: node terms plus every ordered cross
/// term between distinct pairs. Self terms stay out, both orderings stay in.
fn confidence_of(pairs: &[(usize, usize)], gi: &ObjectGraph, gj: &ObjectGraph, cfg: &MatchConfig) -> f64 {
    let mut c = 0.0;
    for &(m, n) in pairs {
        c += node_affinity(gi.node(m), gj.node(n), cfg);
    }
    for (a_idx, &(ma, na)) in pairs.iter().enumerate() {
        for (b_idx, &(mb, nb)) in pairs.iter().enumerate() {
            if a_idx == b_idx {
                continue;
            }
            c += edge_affinity(gi.edge(ma, mb), gj.edge(na, nb), cfg);
        }
    }
    c
}

/// Both-direction edge consistency of pair `(m, n)` against pair `(p, q)`.
fn pairwise_consistent(
    gi: &ObjectGraph,
    gj: &ObjectGraph,
    cfg: &MatchConfig,
    (m, n): (usize, usize),
    (p, q): (usize, usize),
) -> bool {
    edge_affinity(gi.edge(p, m), gj.edge(q, n), cfg) > cfg.min_edge_affinity
        && edge_affinity(gi.edge(m, p), gj.edge(n, q), cfg) > cfg.min_edge_affinity
}

/// Seeds for the expansion step.
///
/// Without a previous result this is the single-pair candidates whose node
/// affinity clears the gate, best first, capped at `max_candidates`. With a
/// previous result, its pairs are re-resolved through track ids, pruned to a
/// pairwise-consistent core, and placed first as one multi-pair seed; the
/// single-pair candidates follow as fallback under the same cap.
pub fn init_candidates(
    gi: &ObjectGraph,
    gj: &ObjectGraph,
    prev: Option<&CommonSubgraph>,
    cfg: &MatchConfig,
) -> Vec<Vec<(usize, usize)>> {
    let mut candidates = Vec::new();

    if let Some(prev) = prev {
        let mut kept: Vec<(usize, usize)> = Vec::new();
        for &(ti, tj) in prev.track_pairs() {
            let (Some(m), Some(n)) = (gi.node_by_track(ti), gj.node_by_track(tj)) else {
                continue;
            };
            // The scene may have changed under the surviving ids, so every
            // carried pair is re-validated against the ones already kept.
            let node_ok = node_affinity(gi.node(m), gj.node(n), cfg) > cfg.min_node_affinity;
            if node_ok
                && kept
                    .iter()
                    .all(|&held| pairwise_consistent(gi, gj, cfg, (m, n), held))
            {
                kept.push((m, n));
            }
        }
        if !kept.is_empty() {
            candidates.push(kept);
        }
    }

    let mut singles: Vec<(f64, (usize, usize))> = Vec::new();
    for m in 0..gi.len() {
        for n in 0..gj.len() {
            let aff = node_affinity(gi.node(m), gj.node(n), cfg);
            if aff > cfg.min_node_affinity {
                singles.push((aff, (m, n)));
            }
        }
    }
    singles.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    for (_, pair) in singles {
        if candidates.len() >= cfg.max_candidates {
            break;
        }
        candidates.push(vec![pair]);
    }
    candidates.truncate(cfg.max_candidates);
    candidates
}

/// Grows a seed by greedily admitting the pair with the best
/// `node_affinity * min-edge-affinity-to-members` score, requiring every
/// admitted pair to be edge-consistent with all current members in both
/// directions. Ties fall to the lexicographically smallest `(m, n)`.
pub fn expand_subgraph(
    seed: &[(usize, usize)],
    gi: &ObjectGraph,
    gj: &ObjectGraph,
    cfg: &MatchConfig,
) -> Vec<(usize, usize)> {
    let node_aff = node_affinity_table(gi, gj, cfg);
    expand_with(&node_aff, seed, gi, gj, cfg)
}

/// Dense node-affinity lookup, row-major over `(m, n)`.
fn node_affinity_table(gi: &ObjectGraph, gj: &ObjectGraph, cfg: &MatchConfig) -> Vec<f64> {
    let mut t = Vec::with_capacity(gi.len() * gj.len());
    for m in 0..gi.len() {
        for n in 0..gj.len() {
            t.push(node_affinity(gi.node(m), gj.node(n), cfg));
        }
    }
    t
}

struct PoolEntry {
    pair: (usize, usize),
    node_aff: f64,
    /// Minimum edge affinity against current members; 1 while there are no
    /// members. Monotone non-increasing as members join, so entries dropping
    /// below the gate are pruned for good.
    min_edge_aff: f64,
}

fn expand_with(
    node_aff: &[f64],
    seed: &[(usize, usize)],
    gi: &ObjectGraph,
    gj: &ObjectGraph,
    cfg: &MatchConfig,
) -> Vec<(usize, usize)> {
    let mut members: Vec<(usize, usize)> = seed.to_vec();
    let mut used_i = vec![false; gi.len()];
    let mut used_j = vec![false; gj.len()];
    for &(m, n) in seed {
        used_i[m] = true;
        used_j[n] = true;
    }

    let mut pool: Vec<PoolEntry> = Vec::new();
    for m in 0..gi.len() {
        for n in 0..gj.len() {
            if used_i[m] || used_j[n] {
                continue;
            }
            let aff = node_aff[m * gj.len() + n];
            if aff <= cfg.min_node_affinity {
                continue;
            }
            let mut entry = PoolEntry {
                pair: (m, n),
                node_aff: aff,
                min_edge_aff: 1.0,
            };
            if tighten(&mut entry, members.iter().copied(), gi, gj, cfg) {
                pool.push(entry);
            }
        }
    }

    while !pool.is_empty() {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (idx, e) in pool.iter().enumerate() {
            let score = e.node_aff * e.min_edge_aff;
            if score > best_score || (score == best_score && e.pair < pool[best].pair) {
                best = idx;
                best_score = score;
            }
        }
        let admitted = pool.swap_remove(best).pair;
        members.push(admitted);
        used_i[admitted.0] = true;
        used_j[admitted.1] = true;
        pool.retain_mut(|e| {
            e.pair.0 != admitted.0
                && e.pair.1 != admitted.1
                && tighten(e, std::iter::once(admitted), gi, gj, cfg)
        });
    }
    members
}

/// Folds the edge affinities against `others` into the entry's running
/// minimum. False once the entry can no longer clear the edge gate.
fn tighten(
    entry: &mut PoolEntry,
    others: impl Iterator<Item = (usize, usize)>,
    gi: &ObjectGraph,
    gj: &ObjectGraph,
    cfg: &MatchConfig,
) -> bool {
    let (m, n) = entry.pair;
    for (p, q) in others {
        let out = edge_affinity(gi.edge(p, m), gj.edge(q, n), cfg);
        let back = edge_affinity(gi.edge(m, p), gj.edge(n, q), cfg);
        entry.min_edge_aff = entry.min_edge_aff.min(out).min(back);
        if entry.min_edge_aff <= cfg.min_edge_affinity {
            return false;
        }
    }
    true
}

/// Picks the best grown candidate: most pairs, then highest confidence,
/// then the lexicographically smallest sorted pair list. No candidates, or
/// only empty ones, yield the empty result.
pub fn select_mcs(
    candidates: &[Vec<(usize, usize)>],
    gi: &ObjectGraph,
    gj: &ObjectGraph,
    cfg: &MatchConfig,
) -> CommonSubgraph {
    let mut best: Option<(Vec<(usize, usize)>, f64)> = None;
    for cand in candidates {
        if cand.is_empty() {
            continue;
        }
        let mut sorted = cand.clone();
        sorted.sort_unstable();
        let conf = confidence_of(&sorted, gi, gj, cfg);
        let wins = match &best {
            None => true,
            Some((bp, bc)) => {
                sorted.len() > bp.len()
                    || (sorted.len() == bp.len() && conf > *bc)
                    || (sorted.len() == bp.len() && conf == *bc && sorted < *bp)
            }
        };
        if wins {
            best = Some((sorted, conf));
        }
    }
    match best {
        None => CommonSubgraph::empty(),
        Some((pairs, _)) => CommonSubgraph::from_pairs(pairs, gi, gj, cfg),
    }
}

/// Full matcher: seed, grow every candidate, select.
///
/// `prev` is the previous frame's result for the same graph pair and only
/// its track ids are read, so stale node indices are harmless. The result
/// is pairwise consistent in its entirety; reported positions of either
/// agent are never consulted.
pub fn match_graphs(
    gi: &ObjectGraph,
    gj: &ObjectGraph,
    prev: Option<&CommonSubgraph>,
    cfg: &MatchConfig,
) -> Result<CommonSubgraph, MatchError> {
    cfg.validate()?;
    if gi.is_empty() || gj.is_empty() {
        return Ok(CommonSubgraph::empty());
    }
    let node_aff = node_affinity_table(gi, gj, cfg);
    let candidates = init_candidates(gi, gj, prev, cfg);
    let grown: Vec<Vec<(usize, usize)>> = candidates
        .iter()
        .map(|seed| expand_with(&node_aff, seed, gi, gj, cfg))
        .collect();
    let result = select_mcs(&grown, gi, gj, cfg);
    debug_assert!(result
        .pairs()
        .iter()
        .enumerate()
        .all(|(a, &pa)| result.pairs()[..a]
            .iter()
            .all(|&pb| pairwise_consistent(gi, gj, cfg, pa, pb))));
    Ok(result)
}

const EXHAUSTIVE_LIMIT: usize = 8;

/// Exhaustive reference matcher for small graphs.
///
/// Enumerates every one-to-one pair set that clears both gates and applies
/// the same selection rule as `select_mcs`. Kept free of the greedy search
/// machinery on purpose: this is the oracle the greedy path is tested
/// against. Sides are limited to 8 nodes.
pub fn brute_force_mcs(
    gi: &ObjectGraph,
    gj: &ObjectGraph,
    cfg: &MatchConfig,
) -> Result<CommonSubgraph, MatchError> {
    cfg.validate()?;
    let nodes = gi.len().max(gj.len());
    if nodes > EXHAUSTIVE_LIMIT {
        return Err(MatchError::TooLargeForExhaustive {
            nodes,
            limit: EXHAUSTIVE_LIMIT,
        });
    }

    struct Search<'a> {
        gi: &'a ObjectGraph,
        gj: &'a ObjectGraph,
        cfg: &'a MatchConfig,
        used_j: Vec<bool>,
        chosen: Vec<(usize, usize)>,
        best: Vec<(usize, usize)>,
        best_conf: f64,
    }

    impl Search<'_> {
        fn admissible(&self, m: usize, n: usize) -> bool {
            if node_affinity(self.gi.node(m), self.gj.node(n), self.cfg)
                <= self.cfg.min_node_affinity
            {
                return false;
            }
            self.chosen.iter().all(|&(p, q)| {
                edge_affinity(self.gi.edge(p, m), self.gj.edge(q, n), self.cfg)
                    > self.cfg.min_edge_affinity
                    && edge_affinity(self.gi.edge(m, p), self.gj.edge(n, q), self.cfg)
                        > self.cfg.min_edge_affinity
            })
        }

        fn consider_current(&mut self) {
            // `chosen` is built left-sorted, matching the selection rule's
            // sorted-list comparison.
            let conf = confidence_of(&self.chosen, self.gi, self.gj, self.cfg);
            let wins = self.chosen.len() > self.best.len()
                || (self.chosen.len() == self.best.len() && conf > self.best_conf)
                || (self.chosen.len() == self.best.len()
                    && conf == self.best_conf
                    && self.chosen < self.best);
            if wins && !self.chosen.is_empty() {
                self.best = self.chosen.clone();
                self.best_conf = conf;
            }
        }

        fn dfs(&mut self, m: usize) {
            if m == self.gi.len() {
                self.consider_current();
                return;
            }
            self.dfs(m + 1);
            for n in 0..self.gj.len() {
                if self.used_j[n] || !self.admissible(m, n) {
                    continue;
                }
                self.used_j[n] = true;
                self.chosen.push((m, n));
                self.dfs(m + 1);
                self.chosen.pop();
                self.used_j[n] = false;
            }
        }
    }

    let mut search = Search {
        gi,
        gj,
        cfg,
        used_j: vec![false; gj.len()],
        chosen: Vec::new(),
        best: Vec::new(),
        best_conf: 0.0,
    };
    search.dfs(0);
    if search.best.is_empty() {
        return Ok(CommonSubgraph::empty());
    }
    Ok(CommonSubgraph::from_pairs(search.best, gi, gj, cfg))
}
