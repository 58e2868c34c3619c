//! Run artifacts on disk.

use nalgebra::Vector3;
use serde::Serialize;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::run::{LoopEvent, RunOutput, RunSummary};
use crate::backend::{GraphEdge, SlamMap};
use crate::geom::{Sim3, SE3};
use crate::ids::{KeyframeId, MapPointId};

#[derive(Debug, Serialize)]
struct KeyframeRecord {
    id: KeyframeId,
    timestamp: f64,
    /// Camera-from-world.
    pose: SE3,
    corners: usize,
    observations: usize,
}

#[derive(Debug, Serialize)]
struct PointRecord {
    id: MapPointId,
    position: Vector3<f64>,
    observations: usize,
}

#[derive(Debug, Serialize)]
struct MapSnapshot<'a> {
    keyframes: Vec<KeyframeRecord>,
    points: Vec<PointRecord>,
    edges: &'a [GraphEdge],
}

fn snapshot(map: &SlamMap) -> MapSnapshot<'_> {
    MapSnapshot {
        keyframes: map
            .keyframes
            .values()
            .map(|k| KeyframeRecord {
                id: k.id,
                timestamp: k.timestamp,
                pose: k.pose,
                corners: k.corners.len(),
                observations: k.observations.len(),
            })
            .collect(),
        points: map
            .points
            .values()
            .map(|p| PointRecord {
                id: p.id,
                position: p.position,
                observations: p.observations.len(),
            })
            .collect(),
        edges: &map.edges,
    }
}

/// One line of the constraint trace.
#[derive(Debug, Serialize)]
struct ConstraintRecord {
    from: KeyframeId,
    to: KeyframeId,
    score: f64,
    matches: usize,
    epipolar_inliers: usize,
    sim3_inliers: usize,
    relative: Sim3,
}

#[derive(Debug, Serialize)]
struct Metrics<'a> {
    #[serde(flatten)]
    summary: &'a RunSummary,
    loops: &'a [LoopEvent],
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()
}

/// Writes `trajectory.txt`, `odometry.txt`, `map.json` and `metrics.json`
/// into `dir` (created if needed), plus `constraints.jsonl` when `trace` is
/// set. Returns the written paths.
pub fn write_run_outputs(output: &RunOutput, dir: &Path, trace: bool) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let to_io = |e: crate::eval::EvalError| io::Error::other(e.to_string());

    let p = dir.join("trajectory.txt");
    output.trajectory.save(&p).map_err(to_io)?;
    written.push(p);
    let p = dir.join("odometry.txt");
    output.odometry.save(&p).map_err(to_io)?;
    written.push(p);

    let p = dir.join("map.json");
    write_json(&p, &snapshot(&output.map))?;
    written.push(p);

    let p = dir.join("metrics.json");
    write_json(
        &p,
        &Metrics {
            summary: &output.summary,
            loops: &output.loops,
        },
    )?;
    written.push(p);

    if trace {
        let p = dir.join("constraints.jsonl");
        let mut w = BufWriter::new(fs::File::create(&p)?);
        for d in &output.trace {
            for c in &d.candidates {
                let Some(s) = c.constraint else { continue };
                let rec = ConstraintRecord {
                    from: c.candidate,
                    to: c.current,
                    score: c.score,
                    matches: c.matches.len(),
                    epipolar_inliers: c.epipolar_inliers,
                    sim3_inliers: s.inliers,
                    relative: s.relative,
                };
                serde_json::to_writer(&mut w, &rec)?;
                writeln!(w)?;
            }
        }
        w.flush()?;
        written.push(p);
    }
    Ok(written)
}
