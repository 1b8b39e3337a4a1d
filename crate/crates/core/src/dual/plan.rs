use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::ik::{solve_dual_ik, DualIkOptions};
use super::rig::DualArmRig;
use super::DualError;
use crate::kinematics::{JointKind, JointVector};
use crate::surface::SweepPath;

/// Sweep planner settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanOptions {
    pub ik: DualIkOptions,
    /// Largest change of a revolute joint between consecutive waypoints, rad.
    pub max_revolute_step: f64,
    /// Largest change of a prismatic joint between consecutive waypoints, m.
    pub max_prismatic_step: f64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            ik: DualIkOptions::default(),
            max_revolute_step: 0.5,
            max_prismatic_step: 0.05,
        }
    }
}

impl PlanOptions {
    pub fn with_margin(margin: f64) -> Self {
        Self {
            ik: DualIkOptions::with_margin(margin),
            ..Self::default()
        }
    }
}

/// One planned waypoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub tick: u64,
    pub joints: JointVector,
    /// Capsule clearance at this configuration, m.
    pub min_clearance: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest clearance over all waypoints (infinite when empty).
    pub fn min_clearance(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.min_clearance)
            .fold(f64::INFINITY, f64::min)
    }

    /// One JSON record per line.
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for p in &self.points {
            serde_json::to_writer(&mut out, p)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    /// Parse NDJSON records; blank lines are skipped.
    pub fn read_ndjson<R: BufRead>(input: R) -> Result<Self, DualError> {
        let mut points = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| DualError::InvalidArgument(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let p = serde_json::from_str(&line)
                .map_err(|e| DualError::InvalidArgument(format!("line {}: {e}", i + 1)))?;
            points.push(p);
        }
        Ok(Self { points })
    }
}

/// Plan a joint trajectory that runs both probes along their paths together.
///
/// Waypoint `k` is solved with [`solve_dual_ik`] seeded from waypoint `k - 1`
/// (waypoint 0 from `seed`). A waypoint fails if the solve fails or if any
/// joint moves further than the configured step from the previous waypoint;
/// the error carries the waypoints planned so far.
pub fn plan_dual_sweep(
    rig: &DualArmRig,
    path_left: &SweepPath,
    path_right: &SweepPath,
    seed: &[f64],
    opts: &PlanOptions,
) -> Result<Trajectory, DualError> {
    if path_left.len() != path_right.len() {
        return Err(DualError::WaypointMismatch {
            left: path_left.len(),
            right: path_right.len(),
        });
    }
    if path_left.is_empty() {
        return Err(DualError::InvalidArgument("sweep paths are empty".into()));
    }
    if !(opts.ik.margin > 0.0 && opts.ik.margin.is_finite()) {
        return Err(DualError::InvalidArgument(format!(
            "clearance margin {} must be positive",
            opts.ik.margin
        )));
    }
    rig.check(seed)?;
    let mut trajectory = Trajectory::default();
    let mut previous = JointVector::from(seed);
    for (k, (l, r)) in path_left
        .waypoints
        .iter()
        .zip(&path_right.waypoints)
        .enumerate()
    {
        let fail = |trajectory: Trajectory, reason: DualError| DualError::PlanFailed {
            index: k,
            partial: trajectory,
            reason: Box::new(reason),
        };
        let q = match solve_dual_ik(rig, &l.probe_pose(), &r.probe_pose(), &previous, &opts.ik) {
            Ok(q) => q,
            Err(e) => return Err(fail(trajectory, e)),
        };
        if k > 0 {
            if let Some(jump) = step_violation(rig, &previous, &q, opts) {
                return Err(fail(trajectory, jump));
            }
        }
        let clearance = rig.separation_at(&rig.state(&q)).min_distance;
        trajectory.points.push(TrajectoryPoint {
            tick: k as u64,
            joints: q.clone(),
            min_clearance: clearance,
        });
        previous = q;
    }
    Ok(trajectory)
}

fn step_violation(
    rig: &DualArmRig,
    from: &[f64],
    to: &[f64],
    opts: &PlanOptions,
) -> Option<DualError> {
    let ids = rig.joint_ids();
    for (i, joint) in rig.joints().enumerate() {
        let max = match joint.kind {
            JointKind::Revolute => opts.max_revolute_step,
            JointKind::Prismatic => opts.max_prismatic_step,
        };
        let step = joint.delta(from[i], to[i]).abs();
        if step > max {
            return Some(DualError::StepTooLarge {
                joint: ids[i].clone(),
                step,
                max,
            });
        }
    }
    None
}
