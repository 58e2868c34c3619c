//! Writing optimized Sim(3) vertices back into the map.

use std::collections::BTreeMap;

use super::SlamMap;
use crate::geom::{Sim3, SE3};
use crate::ids::KeyframeId;

/// Replaces each keyframe pose by the rigid part of its optimized
/// world-from-camera similarity (the scale lives in the points), and moves
/// every map point with its reference keyframe: `X' = S_r' · S_r⁻¹ · X`.
/// Keyframes whose vertex did not change are left bit-identical.
pub fn fold_sim3_into_map(
    map: &mut SlamMap,
    before: &BTreeMap<KeyframeId, Sim3>,
    after: &BTreeMap<KeyframeId, Sim3>,
) {
    let mut corrections: BTreeMap<KeyframeId, Sim3> = BTreeMap::new();
    for (id, new) in after {
        let Some(old) = before.get(id) else { continue };
        if old == new {
            continue;
        }
        corrections.insert(*id, new.compose(&old.inverse()));
        if let Some(kf) = map.keyframes.get_mut(id) {
            kf.pose = SE3::new(*new.rotation(), *new.translation()).inverse();
        }
    }
    for p in map.points.values_mut() {
        if let Some(c) = corrections.get(&p.reference) {
            p.position = c.transform_point(&p.position);
        }
    }
}
