//! The full pipeline: front-end, loop worker and backend worker.

use serde::{Deserialize, Serialize};
use std::sync::mpsc;
use std::sync::{Arc, RwLock};
use std::thread;
use std::time::Instant;

use super::frontend::Frontend;
use super::RunConfig;
use crate::backend::{
    fold_sim3_into_map, global_ba, optimize_pose_graph, BaStats, EdgeKind, GraphEdge, OptimizationStats, PoseGraph,
    SlamMap,
};
use crate::bow::{train_vocabulary, Vocabulary};
use crate::camera::Camera;
use crate::eval::{loop_closure_error_pct, Trajectory};
use crate::features::Grid;
use crate::ids::KeyframeId;
use crate::loop_closure::{detect_loop, LoopDetection, Sim3Constraint};
use crate::sim::{chain, corrupt_odometry, Scenario};

/// The map behind a lock, with a counter bumped after every backend update.
/// Readers holding the lock see a whole epoch, never a partial update.
#[derive(Debug)]
pub struct SharedMap {
    pub map: SlamMap,
    pub epoch: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopEvent {
    pub keyframe: KeyframeId,
    pub constraint: Sim3Constraint,
    pub pose_graph: OptimizationStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ba: Option<BaStats>,
    /// Map points that gained an observation from the current keyframe.
    pub fused_points: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageTimes {
    pub frontend_s: f64,
    pub loop_detection_s: f64,
    pub pose_graph_s: f64,
    pub global_ba_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub keyframes: usize,
    pub map_points: usize,
    pub loop_queries: usize,
    pub loops_accepted: usize,
    /// Endpoint gap over path length of the raw odometry, percent.
    pub loop_closure_error_pct_before: f64,
    pub loop_closure_error_pct_after: f64,
    /// Mean share of extracted corners kept by the hybrid selection.
    pub selection_ratio: f64,
    pub times: StageTimes,
}

pub struct RunOutput {
    pub trajectory: Trajectory,
    /// Odometry chain without any correction.
    pub odometry: Trajectory,
    pub map: SlamMap,
    pub loops: Vec<LoopEvent>,
    /// Detection outcome for every keyframe that was queried.
    pub trace: Vec<LoopDetection>,
    pub summary: RunSummary,
}

/// Trains a vocabulary on evenly spaced keyframes of the scenario.
pub fn train_scenario_vocabulary(
    scenario: &Scenario,
    budget: usize,
    frames: usize,
    k: u32,
    depth: u32,
    seed: u64,
) -> Result<Vocabulary, crate::bow::VocabError> {
    let n = scenario.ground_truth.len();
    let frames = frames.clamp(1, n.max(1));
    let images: Vec<Vec<_>> = (0..frames)
        .map(|i| i * n / frames)
        .map(|f| super::frontend::extract(scenario, f, budget).descriptors)
        .collect();
    train_vocabulary(&images, k, depth, seed)
}

enum LoopJob {
    Query(KeyframeId),
    Skip,
    Stop,
}

enum BackendJob {
    Loop(Box<LoopDetection>, f64),
    Nothing,
    Stop,
}

struct BackendReply {
    event: Option<LoopEvent>,
    detection: Option<LoopDetection>,
    detect_s: f64,
    pgo_s: f64,
    ba_s: f64,
}

/// Runs the scenario through the front-end, loop detection and backend.
/// The three stages run on their own threads in lock-step per keyframe, so
/// the output is deterministic.
pub fn run_pipeline(scenario: &Scenario, config: &RunConfig, vocabulary: &Vocabulary) -> RunOutput {
    let started = Instant::now();
    let n = scenario.ground_truth.len();
    let motions = corrupt_odometry(&scenario.ground_truth, &scenario.config.noise, scenario.odometry_seed());
    let odometry_poses = chain(&scenario.ground_truth.entries()[0].1, &motions);
    let odometry = Trajectory::new(scenario.ground_truth.timestamps().zip(odometry_poses).collect())
        .expect("ground-truth timestamps");

    let mut frontend = Frontend::new(
        scenario,
        vocabulary,
        motions,
        config.features,
        config.grid_cell,
        config.depth_noise,
    );
    let grid = frontend.grid().clone();
    let camera = frontend.camera().clone();
    let shared = Arc::new(RwLock::new(SharedMap {
        map: SlamMap::new(config.local_window),
        epoch: 0,
    }));

    let (loop_tx, loop_rx) = mpsc::channel::<LoopJob>();
    let (back_tx, back_rx) = mpsc::channel::<BackendJob>();
    let (reply_tx, reply_rx) = mpsc::channel::<BackendReply>();

    let mut times = StageTimes::default();
    let mut loops = Vec::new();
    let mut trace = Vec::new();
    let mut queries = 0;

    thread::scope(|s| {
        let loop_shared = Arc::clone(&shared);
        let loop_params = config.loop_params.clone();
        let loop_grid = grid.clone();
        s.spawn(move || loop_worker(loop_rx, back_tx, loop_shared, loop_grid, loop_params));
        let back_shared = Arc::clone(&shared);
        let back_config = config.clone();
        let back_camera = camera.clone();
        s.spawn(move || backend_worker(back_rx, reply_tx, back_shared, back_camera, back_config));

        let mut cooldown_until = 0usize;
        for k in 0..n {
            let t = Instant::now();
            {
                let mut guard = shared.write().expect("map lock");
                frontend.process(&mut guard.map, k);
            }
            times.frontend_s += t.elapsed().as_secs_f64();
            let job = if config.loop_closure && k >= cooldown_until {
                queries += 1;
                LoopJob::Query(KeyframeId(k as u32))
            } else {
                LoopJob::Skip
            };
            loop_tx.send(job).expect("loop worker alive");
            let reply = reply_rx.recv().expect("backend worker alive");
            times.loop_detection_s += reply.detect_s;
            times.pose_graph_s += reply.pgo_s;
            times.global_ba_s += reply.ba_s;
            if let Some(d) = reply.detection {
                trace.push(d);
            }
            if let Some(ev) = reply.event {
                log::info!(
                    "loop {} -> {} (scale {:.4}, {} inliers)",
                    ev.constraint.from,
                    ev.constraint.to,
                    ev.constraint.relative.scale(),
                    ev.constraint.inliers
                );
                cooldown_until = k + 1 + config.loop_cooldown;
                loops.push(ev);
            }
        }
        loop_tx.send(LoopJob::Stop).expect("loop worker alive");
    });

    let map = Arc::try_unwrap(shared)
        .expect("workers joined")
        .into_inner()
        .expect("map lock")
        .map;
    let trajectory = Trajectory::new(
        map.keyframes
            .values()
            .map(|kf| (kf.timestamp, kf.pose.inverse()))
            .collect(),
    )
    .expect("keyframe timestamps increase");
    let before = loop_closure_error_pct(&odometry.positions()).unwrap_or(0.0);
    let after = loop_closure_error_pct(&trajectory.positions()).unwrap_or(0.0);
    times.total_s = started.elapsed().as_secs_f64();
    let ratios = &frontend.selection_ratios;
    let summary = RunSummary {
        keyframes: map.keyframes.len(),
        map_points: map.points.len(),
        loop_queries: queries,
        loops_accepted: loops.len(),
        loop_closure_error_pct_before: before,
        loop_closure_error_pct_after: after,
        selection_ratio: ratios.iter().sum::<f64>() / ratios.len().max(1) as f64,
        times,
    };
    RunOutput {
        trajectory,
        odometry,
        map,
        loops,
        trace,
        summary,
    }
}

fn loop_worker(
    jobs: mpsc::Receiver<LoopJob>,
    backend: mpsc::Sender<BackendJob>,
    shared: Arc<RwLock<SharedMap>>,
    grid: Grid,
    params: crate::loop_closure::LoopParams,
) {
    for job in jobs {
        let out = match job {
            LoopJob::Stop => {
                let _ = backend.send(BackendJob::Stop);
                return;
            }
            LoopJob::Skip => BackendJob::Nothing,
            LoopJob::Query(id) => {
                let t = Instant::now();
                let guard = shared.read().expect("map lock");
                let current = &guard.map.keyframes[&id];
                let d = detect_loop(current, &guard.map, &grid, &params);
                BackendJob::Loop(Box::new(d), t.elapsed().as_secs_f64())
            }
        };
        if backend.send(out).is_err() {
            return;
        }
    }
}

fn backend_worker(
    jobs: mpsc::Receiver<BackendJob>,
    replies: mpsc::Sender<BackendReply>,
    shared: Arc<RwLock<SharedMap>>,
    camera: Camera,
    config: RunConfig,
) {
    for job in jobs {
        let reply = match job {
            BackendJob::Stop => return,
            BackendJob::Nothing => BackendReply {
                event: None,
                detection: None,
                detect_s: 0.0,
                pgo_s: 0.0,
                ba_s: 0.0,
            },
            BackendJob::Loop(d, detect_s) => {
                let mut reply = BackendReply {
                    event: None,
                    detection: None,
                    detect_s,
                    pgo_s: 0.0,
                    ba_s: 0.0,
                };
                if let Some(c) = d.constraint {
                    let mut guard = shared.write().expect("map lock");
                    let state = &mut *guard;
                    match correct_loop(&mut state.map, &camera, &config, &c, &d.inlier_matches) {
                        Ok((event, pgo_s, ba_s)) => {
                            state.epoch += 1;
                            reply.event = Some(event);
                            reply.pgo_s = pgo_s;
                            reply.ba_s = ba_s;
                        }
                        Err(e) => log::warn!("loop {} -> {} not applied: {e}", c.from, c.to),
                    }
                }
                reply.detection = Some(*d);
                reply
            }
        };
        if replies.send(reply).is_err() {
            return;
        }
    }
}

/// Pose-graph optimization with the new constraint, fold into the map,
/// point fusion across the loop and (optionally) global BA.
pub fn correct_loop(
    map: &mut SlamMap,
    camera: &Camera,
    config: &RunConfig,
    c: &Sim3Constraint,
    inlier_matches: &[(usize, usize)],
) -> Result<(LoopEvent, f64, f64), crate::backend::BackendError> {
    let t = Instant::now();
    let mut graph = PoseGraph::from_map(map);
    let before = graph.vertices.clone();
    let stats = optimize_pose_graph(&mut graph, Some(c), &config.pose_graph)?;
    fold_sim3_into_map(map, &before, &graph.vertices);
    map.edges.push(GraphEdge {
        from: c.from,
        to: c.to,
        relative: c.relative.inverse(),
        kind: EdgeKind::Loop,
    });
    let fused = fuse_points(map, c.from, c.to, inlier_matches);
    let pgo_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let ba = config.global_ba.then(|| global_ba(map, camera, &config.ba));
    let ba_s = t.elapsed().as_secs_f64();
    Ok((
        LoopEvent {
            keyframe: c.to,
            constraint: *c,
            pose_graph: stats,
            ba,
            fused_points: fused,
        },
        pgo_s,
        ba_s,
    ))
}

/// For every Sim(3) inlier whose candidate corner carries a map point, adds
/// the current keyframe's measurement of that corner to the point.
fn fuse_points(map: &mut SlamMap, candidate: KeyframeId, current: KeyframeId, matches: &[(usize, usize)]) -> usize {
    let Some(cand) = map.keyframes.get(&candidate) else { return 0 };
    let pairs: Vec<_> = matches
        .iter()
        .filter_map(|&(a, b)| cand.corner_points.get(a).copied().flatten().map(|mp| (mp, b)))
        .collect();
    let mut fused = 0;
    for (mp, b) in pairs {
        let pixel = map.keyframes[&current].corners[b].position;
        let point = map.points.get_mut(&mp).expect("candidate point");
        if point.observations.iter().any(|(k, _)| *k == current) {
            continue;
        }
        point.observations.push((current, pixel));
        map.keyframes
            .get_mut(&current)
            .expect("current keyframe")
            .observations
            .push(crate::backend::Observation { point: mp, pixel });
        fused += 1;
    }
    fused
}
