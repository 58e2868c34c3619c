//! Sim(3) pose-graph optimization.
//!
//! Vertices are world-from-camera similarities `S_i`. An edge `(i, j)`
//! carries `S_ij` and contributes the residual `e_ij = log(S_ij · S_j⁻¹ · S_i)`,
//! which vanishes when `S_ij = S_i⁻¹ · S_j`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::linear::SparseBuilder;
use super::{BackendError, EdgeKind, SlamMap};
use crate::geom::{Sim3, Tangent7, Vector7};
use crate::ids::KeyframeId;
use crate::loop_closure::Sim3Constraint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseGraphEdge {
    pub from: KeyframeId,
    pub to: KeyframeId,
    pub measurement: Sim3,
    /// Measurement scale is pinned to 1 (odometry edges).
    pub fixed_scale: bool,
    /// Residual passes through the Huber kernel (loop edges).
    pub robust: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PoseGraph {
    pub vertices: BTreeMap<KeyframeId, Sim3>,
    pub edges: Vec<PoseGraphEdge>,
    pub fixed: BTreeSet<KeyframeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgoParams {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    /// Huber threshold on the norm of a robust edge's 7-vector residual.
    pub huber_delta: f64,
    pub initial_lambda: f64,
}

impl Default for PgoParams {
    fn default() -> Self {
        PgoParams {
            max_iterations: 100,
            gradient_tolerance: 1e-8,
            step_tolerance: 1e-10,
            huber_delta: 1.0,
            initial_lambda: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizationStats {
    pub iterations: usize,
    pub initial_chi2: f64,
    pub final_chi2: f64,
    /// Total cost after each accepted step, starting with the initial cost.
    pub chi2_history: Vec<f64>,
    pub termination: String,
}

/// Cost `ρ(s)` of a squared residual norm, and the IRLS weight `ρ'(s)`.
pub(crate) fn huber(s: f64, delta: Option<f64>) -> (f64, f64) {
    match delta {
        Some(d) if s > d * d => {
            let n = s.sqrt();
            (2.0 * d * n - d * d, d / n)
        }
        _ => (s, 1.0),
    }
}

pub fn edge_residual(measurement: &Sim3, s_i: &Sim3, s_j: &Sim3) -> Option<Vector7> {
    measurement
        .compose(&s_j.inverse())
        .compose(s_i)
        .log()
        .ok()
        .map(|t| t.0)
}

impl PoseGraph {
    /// All keyframes as vertices (`S_i = T_i⁻¹` with scale 1), the map's
    /// sequential and loop edges plus the pending sequential edges of active
    /// keyframes, and the active keyframes as the fixed set.
    pub fn from_map(map: &SlamMap) -> Self {
        let vertices = map
            .keyframes
            .iter()
            .map(|(id, kf)| (*id, Sim3::from_se3(&kf.pose.inverse())))
            .collect();
        let edges = map
            .edges
            .iter()
            .chain(map.pending_edges())
            .map(|e| PoseGraphEdge {
                from: e.from,
                to: e.to,
                measurement: e.relative,
                fixed_scale: e.kind == EdgeKind::Sequential,
                robust: e.kind == EdgeKind::Loop,
            })
            .collect();
        PoseGraph {
            vertices,
            edges,
            fixed: map.local_set(),
        }
    }

    /// Adds a loop edge for a constraint. The constraint maps candidate-frame
    /// points into the current frame, i.e. `S_cur⁻¹ · S_cand`, so the edge
    /// `(candidate, current)` carries its inverse.
    pub fn add_loop(&mut self, c: &Sim3Constraint) {
        self.edges.push(PoseGraphEdge {
            from: c.from,
            to: c.to,
            measurement: c.relative.inverse(),
            fixed_scale: false,
            robust: true,
        });
    }

    fn check(&self) -> Result<(), BackendError> {
        for e in &self.edges {
            for id in [e.from, e.to] {
                if !self.vertices.contains_key(&id) {
                    return Err(BackendError::UnknownVertex(id));
                }
            }
        }
        if self.fixed.is_empty() || !self.fixed.iter().any(|f| self.vertices.contains_key(f)) {
            return Err(BackendError::NoFixedVertex);
        }
        let mut adj: BTreeMap<KeyframeId, Vec<KeyframeId>> = BTreeMap::new();
        for e in &self.edges {
            adj.entry(e.from).or_default().push(e.to);
            adj.entry(e.to).or_default().push(e.from);
        }
        let mut seen: BTreeSet<KeyframeId> = self.fixed.iter().copied().filter(|f| self.vertices.contains_key(f)).collect();
        let mut queue: VecDeque<KeyframeId> = seen.iter().copied().collect();
        while let Some(v) = queue.pop_front() {
            for &n in adj.get(&v).into_iter().flatten() {
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        if let Some(v) = self.vertices.keys().find(|v| !seen.contains(v)) {
            return Err(BackendError::Disconnected(*v));
        }
        Ok(())
    }

    /// Robust total cost, or `None` if a residual is undefined.
    pub fn chi2(&self, huber_delta: f64) -> Option<f64> {
        chi2_of(&self.vertices, &self.edges, huber_delta)
    }
}

fn chi2_of(vertices: &BTreeMap<KeyframeId, Sim3>, edges: &[PoseGraphEdge], delta: f64) -> Option<f64> {
    let mut total = 0.0;
    for e in edges {
        let r = edge_residual(&e.measurement, &vertices[&e.from], &vertices[&e.to])?;
        total += huber(r.norm_squared(), e.robust.then_some(delta)).0;
    }
    Some(total)
}

const JACOBIAN_STEP: f64 = 1e-6;

/// Central-difference Jacobian of an edge residual with respect to a left
/// perturbation `exp(δ)·S` of one endpoint.
fn numeric_jacobian(e: &PoseGraphEdge, s_i: &Sim3, s_j: &Sim3, wrt_from: bool) -> Option<nalgebra::SMatrix<f64, 7, 7>> {
    let mut j = nalgebra::SMatrix::<f64, 7, 7>::zeros();
    for k in 0..7 {
        let mut d = Vector7::zeros();
        d[k] = JACOBIAN_STEP;
        let plus = Sim3::exp(&Tangent7(d));
        let minus = Sim3::exp(&Tangent7(-d));
        let (rp, rm) = if wrt_from {
            (
                edge_residual(&e.measurement, &plus.compose(s_i), s_j)?,
                edge_residual(&e.measurement, &minus.compose(s_i), s_j)?,
            )
        } else {
            (
                edge_residual(&e.measurement, s_i, &plus.compose(s_j))?,
                edge_residual(&e.measurement, s_i, &minus.compose(s_j))?,
            )
        };
        j.set_column(k, &((rp - rm) / (2.0 * JACOBIAN_STEP)));
    }
    Some(j)
}

/// Optionally adds `constraint` as a loop edge, then runs Levenberg–Marquardt
/// over the non-fixed vertices. Fixed vertices are never written.
pub fn optimize_pose_graph(
    graph: &mut PoseGraph,
    constraint: Option<&Sim3Constraint>,
    params: &PgoParams,
) -> Result<OptimizationStats, BackendError> {
    if let Some(c) = constraint {
        graph.add_loop(c);
    }
    let mut stats = OptimizationStats::default();
    if graph.edges.is_empty() {
        stats.termination = "no edges".into();
        return Ok(stats);
    }
    graph.check()?;
    let free: Vec<KeyframeId> = graph.vertices.keys().copied().filter(|v| !graph.fixed.contains(v)).collect();
    let index: BTreeMap<KeyframeId, usize> = free.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let dim = 7 * free.len();
    let delta = params.huber_delta;

    let mut chi2 = graph.chi2(delta).ok_or(BackendError::InvalidResidual)?;
    stats.initial_chi2 = chi2;
    stats.chi2_history.push(chi2);
    if dim == 0 {
        stats.final_chi2 = chi2;
        stats.termination = "no free vertices".into();
        return Ok(stats);
    }
    let mut lambda = params.initial_lambda;
    stats.termination = "max iterations".into();
    'outer: for _ in 0..params.max_iterations {
        let mut h = SparseBuilder::new(dim);
        let mut g = DVector::<f64>::zeros(dim);
        for e in &graph.edges {
            let (s_i, s_j) = (&graph.vertices[&e.from], &graph.vertices[&e.to]);
            let r = edge_residual(&e.measurement, s_i, s_j).ok_or(BackendError::InvalidResidual)?;
            let w = huber(r.norm_squared(), e.robust.then_some(delta)).1;
            let blocks: Vec<(usize, nalgebra::SMatrix<f64, 7, 7>)> = [(e.from, true), (e.to, false)]
                .into_iter()
                .filter_map(|(v, from)| {
                    let col = *index.get(&v)?;
                    Some(numeric_jacobian(e, s_i, s_j, from).map(|j| (col, j)))
                })
                .collect::<Option<Vec<_>>>()
                .ok_or(BackendError::InvalidResidual)?;
            for (a, ja) in &blocks {
                let ga = ja.transpose() * r * w;
                g.rows_mut(7 * a, 7).add_assign(&ga);
                for (b, jb) in &blocks {
                    h.push_block(7 * a, 7 * b, &(ja.transpose() * jb * w));
                }
            }
        }
        if g.amax() < params.gradient_tolerance {
            stats.termination = "gradient".into();
            break;
        }
        stats.iterations += 1;
        let diag = h.diagonal();
        loop {
            let damping = diag.map(|d| lambda * d.max(1e-9));
            let Some(step) = h.solve(&damping, &(-&g)) else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    stats.termination = "linear solve failed".into();
                    break 'outer;
                }
                continue;
            };
            if step.norm() < params.step_tolerance {
                stats.termination = "step".into();
                break 'outer;
            }
            let mut trial = graph.vertices.clone();
            for (v, i) in &index {
                let d = Vector7::from_column_slice(step.rows(7 * i, 7).as_slice());
                let s = trial.get_mut(v).expect("free vertex");
                *s = Sim3::exp(&Tangent7(d)).compose(s);
            }
            match chi2_of(&trial, &graph.edges, delta) {
                Some(c) if c < chi2 => {
                    for v in &free {
                        graph.vertices.insert(*v, trial[v]);
                    }
                    chi2 = c;
                    stats.chi2_history.push(c);
                    lambda = (lambda / 3.0).max(1e-12);
                    break;
                }
                _ => {
                    lambda *= 4.0;
                    if lambda > 1e16 {
                        stats.termination = "no decrease".into();
                        break 'outer;
                    }
                }
            }
        }
    }
    stats.final_chi2 = chi2;
    Ok(stats)
}

use std::ops::AddAssign;
