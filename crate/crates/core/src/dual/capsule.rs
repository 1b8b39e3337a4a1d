use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::rig::{DualArmRig, RigState, Side};
use crate::kinematics::{KinematicChain, KinematicsError};

/// Capsule radii block of a rig config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapsuleConfig {
    /// First joint whose link counts as wrist.
    pub wrist_from: String,
    pub arm_radius: f64,
    pub wrist_radius: f64,
    pub probe_radius: f64,
}

impl Default for CapsuleConfig {
    fn default() -> Self {
        Self {
            wrist_from: "J4".into(),
            arm_radius: 0.04,
            wrist_radius: 0.03,
            probe_radius: 0.02,
        }
    }
}

/// A segment swept by a sphere, fixed to one link frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    /// Joint id of the carrying frame, or `probe`.
    pub id: String,
    /// Index into the chain's frames (joint frames, then the tool frame).
    pub frame: usize,
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

/// Capsules of one arm; both arms of a rig share the set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapsuleSet {
    pub capsules: Vec<Capsule>,
}

const MIN_LINK_LENGTH: f64 = 1e-9;

impl CapsuleSet {
    /// One capsule per non-degenerate link: from each joint frame's origin to
    /// the next joint origin, the last one running from the final joint to the tip.
    pub fn for_chain(chain: &KinematicChain, cfg: &CapsuleConfig) -> Result<Self, KinematicsError> {
        for (name, r) in [
            ("arm", cfg.arm_radius),
            ("wrist", cfg.wrist_radius),
            ("probe", cfg.probe_radius),
        ] {
            if !(r > 0.0 && r.is_finite()) {
                return Err(KinematicsError::InvalidConfig(format!(
                    "{name} capsule radius {r} must be positive"
                )));
            }
        }
        let wrist = chain.joint_index(&cfg.wrist_from).ok_or_else(|| {
            KinematicsError::InvalidConfig(format!("unknown wrist joint {}", cfg.wrist_from))
        })?;
        let n = chain.dof();
        let mut capsules = Vec::new();
        for k in 0..n {
            let last = k + 1 == n;
            let end = if last {
                chain.tool.translation.vector
            } else {
                chain.joints[k + 1].pre.translation.vector
            };
            if end.norm() < MIN_LINK_LENGTH {
                continue;
            }
            let (id, radius) = if last {
                ("probe".to_string(), cfg.probe_radius)
            } else if k >= wrist {
                (chain.joints[k].id.clone(), cfg.wrist_radius)
            } else {
                (chain.joints[k].id.clone(), cfg.arm_radius)
            };
            capsules.push(Capsule {
                id,
                frame: k,
                a: Vector3::zeros(),
                b: end,
                radius,
            });
        }
        Ok(Self { capsules })
    }

    pub fn len(&self) -> usize {
        self.capsules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capsules.is_empty()
    }
}

/// A capsule placed in the world.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorldCapsule {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

const PARALLEL_EPS: f64 = 1e-12;

/// Closest points between segments `p1-q1` and `p2-q2`: `(distance, on first, on second)`.
pub fn segment_distance(
    p1: &Vector3<f64>,
    q1: &Vector3<f64>,
    p2: &Vector3<f64>,
    q2: &Vector3<f64>,
) -> (f64, Vector3<f64>, Vector3<f64>) {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t) = if a <= PARALLEL_EPS && e <= PARALLEL_EPS {
        (0.0, 0.0)
    } else if a <= PARALLEL_EPS {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= PARALLEL_EPS {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > PARALLEL_EPS * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    ((c1 - c2).norm(), c1, c2)
}

/// Distance from `p` to segment `a-b`.
pub fn point_segment_distance(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + d * t)).norm()
}

/// Surface-to-surface distance for one left × right capsule pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub left: usize,
    pub right: usize,
    /// Negative when the capsules overlap, m.
    pub distance: f64,
    /// Closest points on the two capsule axes.
    pub points: [Vector3<f64>; 2],
}

/// Clearance between the two arms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    /// Minimum over `pairs`; negative means penetration, m.
    pub min_distance: f64,
    /// Capsule indices (left, right) of the closest pair.
    pub witness: (usize, usize),
    /// Capsule ids of the closest pair.
    pub witness_ids: (String, String),
    pub pairs: Vec<PairDistance>,
}

impl SeparationReport {
    pub fn witness_pair(&self) -> &PairDistance {
        self.pairs
            .iter()
            .find(|p| (p.left, p.right) == self.witness)
            .expect("witness is one of the pairs")
    }
}

impl DualArmRig {
    /// World capsules of one arm.
    pub fn world_capsules(&self, state: &RigState, side: Side) -> Vec<WorldCapsule> {
        let arm = state.arm(side);
        self.capsules
            .capsules
            .iter()
            .map(|c| WorldCapsule {
                a: arm.to_world(c.frame, &c.a),
                b: arm.to_world(c.frame, &c.b),
                radius: c.radius,
            })
            .collect()
    }

    /// Every left × right capsule distance at an evaluated state.
    pub fn separation_at(&self, state: &RigState) -> SeparationReport {
        let left = self.world_capsules(state, Side::Left);
        let right = self.world_capsules(state, Side::Right);
        let mut pairs = Vec::with_capacity(left.len() * right.len());
        for (i, l) in left.iter().enumerate() {
            for (j, r) in right.iter().enumerate() {
                let (d, c1, c2) = segment_distance(&l.a, &l.b, &r.a, &r.b);
                pairs.push(PairDistance {
                    left: i,
                    right: j,
                    distance: d - l.radius - r.radius,
                    points: [c1, c2],
                });
            }
        }
        let w = pairs
            .iter()
            .min_by(|a, b| a.distance.total_cmp(&b.distance))
            .expect("capsule sets are never empty");
        let witness = (w.left, w.right);
        SeparationReport {
            min_distance: w.distance,
            witness,
            witness_ids: (
                self.capsules.capsules[witness.0].id.clone(),
                self.capsules.capsules[witness.1].id.clone(),
            ),
            pairs,
        }
    }

    pub fn min_separation(&self, q: &[f64]) -> Result<SeparationReport, KinematicsError> {
        self.check(q)?;
        Ok(self.separation_at(&self.state(q)))
    }
}

/// Free-function form of [`DualArmRig::min_separation`].
pub fn min_separation(rig: &DualArmRig, q: &[f64]) -> Result<SeparationReport, KinematicsError> {
    rig.min_separation(q)
}
