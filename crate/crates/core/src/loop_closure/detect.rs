//! Candidate retrieval and verification for one keyframe.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use super::{compute_sim3, geometric_check, EpipolarParams, LoopRejection, Sim3Constraint, Sim3Params};
use crate::backend::{Keyframe, SlamMap};
use crate::bow::score;
use crate::features::{match_descriptors, Grid, MatchParams};
use crate::ids::KeyframeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopParams {
    /// Candidates taken from the database query before score filtering.
    pub query_size: usize,
    /// Candidates verified per keyframe after filtering.
    pub max_candidates: usize,
    pub min_score: f64,
    /// Candidate score must reach this fraction of the best score between
    /// the current keyframe and its local-map neighbours.
    pub neighbor_ratio: f64,
    /// Keyframes closer than this many ids to the current one are never
    /// candidates, even after leaving the local map.
    pub min_separation: u32,
    pub matching: MatchParams,
    pub epipolar: EpipolarParams,
    pub sim3: Sim3Params,
}

impl Default for LoopParams {
    fn default() -> Self {
        LoopParams {
            query_size: 10,
            max_candidates: 3,
            min_score: 0.05,
            neighbor_ratio: 0.75,
            min_separation: 30,
            matching: MatchParams::default(),
            epipolar: EpipolarParams::default(),
            sim3: Sim3Params::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateStatus {
    Proposed,
    GeometryVerified,
    Sim3Resolved,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopCandidate {
    pub candidate: KeyframeId,
    pub current: KeyframeId,
    pub score: f64,
    pub matches: Vec<(usize, usize)>,
    pub status: CandidateStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection: Option<LoopRejection>,
    pub epipolar_inliers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint: Option<Sim3Constraint>,
}

impl LoopCandidate {
    fn new(candidate: KeyframeId, current: KeyframeId, score: f64) -> Self {
        LoopCandidate {
            candidate,
            current,
            score,
            matches: Vec::new(),
            status: CandidateStatus::Proposed,
            rejection: None,
            epipolar_inliers: 0,
            constraint: None,
        }
    }

    /// Moves the status forward; never backwards and never out of `Rejected`.
    pub fn advance(&mut self, next: CandidateStatus) {
        assert!(
            next > self.status,
            "candidate status must move forward ({:?} -> {:?})",
            self.status,
            next
        );
        self.status = next;
    }

    fn reject(&mut self, why: LoopRejection) {
        self.advance(CandidateStatus::Rejected);
        self.rejection = Some(why);
    }
}

/// Outcome of loop detection for one keyframe.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoopDetection {
    pub candidates: Vec<LoopCandidate>,
    pub constraint: Option<Sim3Constraint>,
    /// Sim(3) inlier matches `(candidate corner, current corner)` of the
    /// accepted candidate.
    pub inlier_matches: Vec<(usize, usize)>,
}

/// Ids that may not be proposed for `current`: the local map and every
/// keyframe within `min_separation` ids.
pub fn excluded_ids(current: KeyframeId, map: &SlamMap, min_separation: u32) -> BTreeSet<KeyframeId> {
    let mut ex = map.local_set();
    ex.insert(current);
    let lo = current.0.saturating_sub(min_separation.saturating_sub(1));
    ex.extend(map.keyframes.range(KeyframeId(lo)..).map(|(k, _)| *k));
    ex
}

fn pair_seed(base: u64, current: KeyframeId, candidate: KeyframeId) -> u64 {
    base ^ ((current.0 as u64) << 32 | candidate.0 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Queries the database (outside the local map), filters by score, matches
/// descriptors, checks epipolar geometry and resolves a Sim(3). Candidates
/// are tried best score first; the first one resolved is returned.
pub fn detect_loop(current: &Keyframe, map: &SlamMap, grid: &Grid, params: &LoopParams) -> LoopDetection {
    let mut out = LoopDetection::default();
    if current.bow.is_empty() {
        return out;
    }
    let exclude = excluded_ids(current.id, map, params.min_separation);
    let neighbor_best = map
        .local_ids()
        .filter(|&id| id != current.id)
        .filter_map(|id| map.keyframes.get(&id))
        .map(|kf| score(&current.bow, &kf.bow))
        .fold(0.0, f64::max);
    let floor = params.min_score.max(params.neighbor_ratio * neighbor_best);
    let hits = map.database.query(&current.bow, params.query_size, &exclude);
    let mut current_depths = None;
    for (cand_id, s) in hits.into_iter().filter(|(_, s)| *s >= floor).take(params.max_candidates) {
        let Some(cand) = map.keyframes.get(&cand_id) else {
            continue;
        };
        let mut lc = LoopCandidate::new(cand_id, current.id, s);
        lc.matches = match_descriptors(&cand.descriptors, &current.descriptors, &params.matching);
        let pairs: Vec<(Vector3<f64>, Vector3<f64>)> = lc
            .matches
            .iter()
            .map(|&(a, b)| (cand.bearings[a], current.bearings[b]))
            .collect();
        let mut ep = params.epipolar;
        ep.seed = pair_seed(ep.seed, current.id, cand_id);
        let geo = match geometric_check(&pairs, &ep) {
            Ok(g) => g,
            Err(why) => {
                lc.reject(why);
                out.candidates.push(lc);
                continue;
            }
        };
        lc.epipolar_inliers = geo.inliers;
        lc.advance(CandidateStatus::GeometryVerified);
        let verified: Vec<(usize, usize)> = lc
            .matches
            .iter()
            .zip(&geo.inlier_mask)
            .filter(|(_, &m)| m)
            .map(|(x, _)| *x)
            .collect();
        let cur_depths = current_depths.get_or_insert_with(|| map.depth_grid(current, grid));
        let cand_depths = map.depth_grid(cand, grid);
        let mut sp = params.sim3;
        sp.seed = pair_seed(sp.seed, current.id, cand_id);
        match compute_sim3(cand, current, &verified, &cand_depths, cur_depths, &sp) {
            Ok((c, inliers)) => {
                lc.constraint = Some(c);
                lc.advance(CandidateStatus::Sim3Resolved);
                out.constraint = Some(c);
                out.inlier_matches = inliers;
                out.candidates.push(lc);
                break;
            }
            Err(why) => {
                lc.reject(why);
                out.candidates.push(lc);
            }
        }
    }
    out
}
