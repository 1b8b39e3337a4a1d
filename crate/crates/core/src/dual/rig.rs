use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, Isometry3, Vector3};
use serde::{Deserialize, Serialize};

use super::capsule::{CapsuleConfig, CapsuleSet};
use crate::kinematics::{
    ChainConfig, ChainState, JointConfig, JointSpec, JointVector, KinematicChain, KinematicsError,
    Pose, RigidTransform,
};
use crate::safety::SafetyConfig;

const RIG_PRESETS: &[(&str, &str)] = &[(
    "ifind-v3",
    include_str!("../../assets/presets/ifind-v3.toml"),
)];

/// Names of the bundled rig presets.
pub fn rig_preset_names() -> impl Iterator<Item = &'static str> {
    RIG_PRESETS.iter().map(|(n, _)| *n)
}

/// Raw bundled rig config text.
pub fn rig_preset_source(name: &str) -> Option<&'static str> {
    RIG_PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseOffsets {
    pub left: RigidTransform,
    pub right: RigidTransform,
}

/// Rig config file contents. The arm is either a bundled preset or inline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigConfig {
    #[serde(default = "default_rig_name")]
    pub name: String,
    #[serde(default)]
    pub arm_preset: Option<String>,
    #[serde(default)]
    pub arm: Option<ChainConfig>,
    pub gantry: JointConfig,
    pub base_offsets: BaseOffsets,
    #[serde(default)]
    pub capsules: CapsuleConfig,
    #[serde(default)]
    pub safety: Option<SafetyConfig>,
}

fn default_rig_name() -> String {
    "ifind-v3".into()
}

impl RigConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, KinematicsError> {
        toml::from_str(text).map_err(|e| KinematicsError::InvalidConfig(e.to_string()))
    }

    pub fn preset(name: &str) -> Result<Self, KinematicsError> {
        let src = rig_preset_source(name)
            .ok_or_else(|| KinematicsError::UnknownPreset(name.to_string()))?;
        Self::from_toml_str(src)
    }

    pub fn load(path: &Path) -> Result<Self, KinematicsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KinematicsError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

/// Gantry plus two arms. Joint vectors are laid out `[J0, left J1.., right J1..]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualArmRig {
    pub name: String,
    pub gantry: JointSpec,
    pub arm_left: KinematicChain,
    pub arm_right: KinematicChain,
    /// Carriage frame to each arm base, indexed by [`Side::index`].
    pub base_offsets: [Isometry3<f64>; 2],
    pub capsules: CapsuleSet,
    pub safety: SafetyConfig,
}

/// Build a rig from its config.
pub fn assemble_rig(config: &RigConfig) -> Result<DualArmRig, KinematicsError> {
    let arm_cfg = match (&config.arm_preset, &config.arm) {
        (Some(_), Some(_)) => {
            return Err(KinematicsError::InvalidConfig(
                "give either arm_preset or arm, not both".into(),
            ))
        }
        (Some(name), None) => ChainConfig::preset(name)?,
        (None, Some(cfg)) => cfg.clone(),
        (None, None) => {
            return Err(KinematicsError::InvalidConfig(
                "rig needs arm_preset or arm".into(),
            ))
        }
    };
    let arm = KinematicChain::from_config(arm_cfg)?;
    let gantry = JointSpec::from_config(&config.gantry)?;
    if arm.joint_index(&gantry.id).is_some() {
        return Err(KinematicsError::InvalidConfig(format!(
            "gantry id {} clashes with an arm joint",
            gantry.id
        )));
    }
    let capsules = CapsuleSet::for_chain(&arm, &config.capsules)?;
    let safety = config.safety.clone().unwrap_or_else(|| arm.safety.clone());
    for id in safety.back_arm.iter().chain(safety.retract.keys()) {
        if arm.joint_index(id).is_none() && *id != gantry.id {
            return Err(KinematicsError::InvalidConfig(format!(
                "unknown joint {id} in rig safety block"
            )));
        }
    }
    Ok(DualArmRig {
        name: config.name.clone(),
        gantry,
        arm_left: arm.clone(),
        arm_right: arm,
        base_offsets: [
            config.base_offsets.left.to_isometry(),
            config.base_offsets.right.to_isometry(),
        ],
        capsules,
        safety,
    })
}

/// Both arms evaluated at one rig configuration.
#[derive(Clone, Debug)]
pub struct RigState {
    pub gantry: f64,
    pub arms: [ChainState; 2],
}

impl RigState {
    pub fn arm(&self, side: Side) -> &ChainState {
        &self.arms[side.index()]
    }

    pub fn tip(&self, side: Side) -> &Isometry3<f64> {
        self.arms[side.index()].tip()
    }
}

impl DualArmRig {
    pub fn preset(name: &str) -> Result<Self, KinematicsError> {
        assemble_rig(&RigConfig::preset(name)?)
    }

    pub fn arm(&self, side: Side) -> &KinematicChain {
        match side {
            Side::Left => &self.arm_left,
            Side::Right => &self.arm_right,
        }
    }

    pub fn dof(&self) -> usize {
        1 + self.arm_left.dof() + self.arm_right.dof()
    }

    /// Positions of one arm's joints in the rig vector.
    pub fn arm_range(&self, side: Side) -> Range<usize> {
        match side {
            Side::Left => 1..1 + self.arm_left.dof(),
            Side::Right => 1 + self.arm_left.dof()..self.dof(),
        }
    }

    /// All joint specs in rig order.
    pub fn joints(&self) -> impl Iterator<Item = &JointSpec> {
        std::iter::once(&self.gantry)
            .chain(self.arm_left.joints.iter())
            .chain(self.arm_right.joints.iter())
    }

    /// `J0`, then `left.J1`.. and `right.J1`..
    pub fn joint_ids(&self) -> Vec<String> {
        let mut ids = vec![self.gantry.id.clone()];
        for side in Side::BOTH {
            ids.extend(
                self.arm(side)
                    .joints
                    .iter()
                    .map(|j| format!("{}.{}", side.as_str(), j.id)),
            );
        }
        ids
    }

    pub fn home(&self) -> JointVector {
        self.joints().map(|j| j.home).collect()
    }

    pub fn check(&self, q: &[f64]) -> Result<(), KinematicsError> {
        if q.len() != self.dof() {
            return Err(KinematicsError::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        for ((j, id), &v) in self.joints().zip(self.joint_ids()).zip(q) {
            if !v.is_finite() || !j.contains(v) {
                return Err(KinematicsError::LimitViolation {
                    joint: id,
                    value: v,
                    min: j.limits[0],
                    max: j.limits[1],
                });
            }
        }
        Ok(())
    }

    pub fn bound(&self, q: &mut [f64]) {
        for (j, v) in self.joints().zip(q.iter_mut()) {
            *v = j.bound(*v);
        }
    }

    /// One arm's slice of a rig vector.
    pub fn arm_q<'a>(&self, q: &'a [f64], side: Side) -> &'a [f64] {
        &q[self.arm_range(side)]
    }

    /// World pose of an arm base at gantry value `j0`.
    pub fn arm_base(&self, side: Side, j0: f64) -> Isometry3<f64> {
        self.gantry.pre * self.gantry.kind.motion(&self.gantry.axis, j0) * self.base_offsets[side.index()]
    }

    /// Evaluate without limit checks.
    pub fn state(&self, q: &[f64]) -> RigState {
        let arms = Side::BOTH.map(|side| {
            ChainState::evaluate(self.arm(side), &self.arm_base(side, q[0]), self.arm_q(q, side))
        });
        RigState { gantry: q[0], arms }
    }

    /// Probe-tip poses, left then right.
    pub fn tip_poses(&self, q: &[f64]) -> Result<[Pose; 2], KinematicsError> {
        self.check(q)?;
        let state = self.state(q);
        Ok(Side::BOTH.map(|s| Pose::from_isometry(state.tip(s))))
    }

    /// Link frames of both arms (joint frames then tool frame), left then right.
    pub fn link_frames(&self, q: &[f64]) -> Result<[Vec<Pose>; 2], KinematicsError> {
        self.check(q)?;
        let state = self.state(q);
        Ok(Side::BOTH.map(|s| state.arm(s).frames().iter().map(Pose::from_isometry).collect()))
    }

    /// World direction of the gantry axis.
    pub fn gantry_axis(&self) -> Vector3<f64> {
        self.gantry.pre.rotation * self.gantry.axis
    }

    /// 6 x 17 tip Jacobian of one arm over the whole rig vector.
    pub fn tip_jacobian(&self, state: &RigState, side: Side) -> DMatrix<f64> {
        let arm = state.arm(side).tip_jacobian();
        let mut jac = DMatrix::zeros(6, self.dof());
        self.fill_gantry_column(&mut jac, 0..3);
        let cols = self.arm_range(side);
        jac.view_mut((0, cols.start), (6, cols.len())).copy_from(&arm);
        jac
    }

    /// 3 x 17 linear Jacobian of a world point attached to `frame` of one arm.
    pub fn point_jacobian(
        &self,
        state: &RigState,
        side: Side,
        frame: usize,
        point: &Vector3<f64>,
    ) -> DMatrix<f64> {
        let arm = state.arm(side).point_jacobian(frame, point);
        let mut jac = DMatrix::zeros(3, self.dof());
        self.fill_gantry_column(&mut jac, 0..3);
        let cols = self.arm_range(side);
        jac.view_mut((0, cols.start), (3, cols.len())).copy_from(&arm);
        jac
    }

    fn fill_gantry_column(&self, jac: &mut DMatrix<f64>, rows: Range<usize>) {
        // The gantry is prismatic in every bundled rig; a revolute carriage
        // would need the arm-point lever arm here.
        if self.gantry.kind == crate::kinematics::JointKind::Prismatic {
            let axis = self.gantry_axis();
            for (k, r) in rows.enumerate() {
                jac[(r, 0)] = axis[k];
            }
        }
    }

    /// Configuration mirrored through the carriage's local x = 0 plane with the arms swapped.
    ///
    /// Valid for rigs whose base offsets are mirror images and whose arm
    /// geometry lies in the local x-z plane: joints about y keep their value,
    /// joints about x or z (and the gantry) change sign.
    pub fn mirror(&self, q: &[f64]) -> JointVector {
        let mut out = JointVector::zeros(self.dof());
        out[0] = -q[0];
        for side in Side::BOTH {
            let from = self.arm_range(side);
            let to = self.arm_range(side.other());
            for (k, joint) in self.arm(side).joints.iter().enumerate() {
                let keep = joint.axis.y.abs() > 0.5;
                let v = q[from.start + k];
                out[to.start + k] = if keep { v } else { -v };
            }
        }
        out
    }
}
