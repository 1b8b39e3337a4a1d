use std::collections::HashSet;
use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};
use std::path::{Path, PathBuf};

use nalgebra::{Isometry3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::pose::RigidTransform;
use super::KinematicsError;
use crate::safety::SafetyConfig;

/// Slack on limit checks so values produced by wrapping or clamping never trip them.
pub const LIMIT_EPS: f64 = 1e-12;

const AXIS_NORM_TOL: f64 = 1e-9;

const PRESETS: &[(&str, &str, usize)] = &[
    (
        "ifind-v1",
        include_str!("../../assets/presets/ifind-v1.toml"),
        7,
    ),
    (
        "ifind-v2",
        include_str!("../../assets/presets/ifind-v2.toml"),
        8,
    ),
    (
        "ifind-v3-arm",
        include_str!("../../assets/presets/ifind-v3-arm.toml"),
        8,
    ),
];

/// Names of the bundled single-chain presets.
pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _, _)| *name)
}

/// Raw bundled config text for a preset.
pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, src, _)| *src)
}

fn expected_joint_count(name: &str) -> Option<usize> {
    PRESETS
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, _, count)| *count)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

impl JointKind {
    /// Transform produced by moving a joint of this kind by `value` along/about `axis`.
    pub fn motion(self, axis: &Vector3<f64>, value: f64) -> Isometry3<f64> {
        match self {
            JointKind::Revolute => Isometry3::from_parts(
                Translation3::identity(),
                UnitQuaternion::from_axis_angle(&Unit::new_unchecked(*axis), value),
            ),
            JointKind::Prismatic => {
                Isometry3::from_parts(Translation3::from(axis * value), UnitQuaternion::identity())
            }
        }
    }
}

/// Joint as written in a chain config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointConfig {
    pub id: String,
    pub kind: JointKind,
    pub axis: [f64; 3],
    pub limits: [f64; 2],
    #[serde(default)]
    pub home: f64,
    #[serde(default)]
    pub clutch_threshold: Option<f64>,
    #[serde(default)]
    pub pre: RigidTransform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParallelogramConfig {
    pub driver: String,
    pub compensated: String,
}

/// Chain config file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub name: String,
    #[serde(default)]
    pub tool: RigidTransform,
    pub joints: Vec<JointConfig>,
    #[serde(default)]
    pub parallelogram: Vec<ParallelogramConfig>,
    #[serde(default)]
    pub safety: Option<SafetyConfig>,
}

impl ChainConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, KinematicsError> {
        toml::from_str(text).map_err(|e| KinematicsError::InvalidConfig(e.to_string()))
    }

    pub fn preset(name: &str) -> Result<Self, KinematicsError> {
        let src =
            preset_source(name).ok_or_else(|| KinematicsError::UnknownPreset(name.to_string()))?;
        Self::from_toml_str(src)
    }
}

/// Where a chain comes from.
#[derive(Clone, Debug)]
pub enum ChainSource {
    Preset(String),
    Config(ChainConfig),
    File(PathBuf),
}

impl ChainSource {
    /// A bundled preset name if it is one, otherwise a path to a config file.
    pub fn parse(arg: &str) -> Self {
        if preset_source(arg).is_none() && Path::new(arg).is_file() {
            ChainSource::File(PathBuf::from(arg))
        } else {
            ChainSource::Preset(arg.to_string())
        }
    }
}

/// Load and validate a chain.
pub fn load_chain(source: &ChainSource) -> Result<KinematicChain, KinematicsError> {
    match source {
        ChainSource::Preset(name) => KinematicChain::from_config(ChainConfig::preset(name)?),
        ChainSource::Config(cfg) => KinematicChain::from_config(cfg.clone()),
        ChainSource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                KinematicsError::InvalidConfig(format!("{}: {e}", path.display()))
            })?;
            KinematicChain::from_config(ChainConfig::from_toml_str(&text)?)
        }
    }
}

/// A validated joint.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec {
    pub id: String,
    pub kind: JointKind,
    /// Unit axis in the joint's own (post pre-transform) frame.
    pub axis: Vector3<f64>,
    pub limits: [f64; 2],
    pub home: f64,
    pub clutch_threshold: Option<f64>,
    pub pre: Isometry3<f64>,
}

impl JointSpec {
    pub fn from_config(cfg: &JointConfig) -> Result<Self, KinematicsError> {
        let bad = |msg: String| KinematicsError::InvalidConfig(format!("joint {}: {msg}", cfg.id));
        let finite = cfg.axis.iter().all(|v| v.is_finite())
            && cfg.limits.iter().all(|v| v.is_finite())
            && cfg.home.is_finite()
            && cfg.pre.translation.iter().all(|v| v.is_finite())
            && cfg.pre.rpy.iter().all(|v| v.is_finite());
        if !finite {
            return Err(bad("non-finite value".into()));
        }
        let axis = Vector3::from(cfg.axis);
        if (axis.norm() - 1.0).abs() >= AXIS_NORM_TOL {
            return Err(bad(format!("axis norm {} is not 1", axis.norm())));
        }
        let [min, max] = cfg.limits;
        if min > max {
            return Err(bad(format!("limit min {min} > max {max}")));
        }
        if cfg.home < min || cfg.home > max {
            return Err(bad(format!("home {} outside [{min}, {max}]", cfg.home)));
        }
        if let Some(t) = cfg.clutch_threshold {
            if !(t > 0.0) {
                return Err(bad(format!("clutch threshold {t} must be positive")));
            }
        }
        Ok(Self {
            id: cfg.id.clone(),
            kind: cfg.kind,
            axis,
            limits: cfg.limits,
            home: cfg.home,
            clutch_threshold: cfg.clutch_threshold,
            pre: cfg.pre.to_isometry(),
        })
    }

    /// Revolute joint whose range covers a full turn; values wrap instead of clamping.
    pub fn is_continuous(&self) -> bool {
        self.kind == JointKind::Revolute && self.limits[1] - self.limits[0] >= 2.0 * PI - 1e-9
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.limits[0] - LIMIT_EPS && value <= self.limits[1] + LIMIT_EPS
    }

    /// Bring `value` back into range: wrap continuous joints, clamp the rest.
    pub fn bound(&self, value: f64) -> f64 {
        let [min, max] = self.limits;
        if self.is_continuous() && (value < min || value > max) {
            let wrapped = wrap_angle(value);
            return wrapped.clamp(min, max);
        }
        value.clamp(min, max)
    }

    /// Signed shortest displacement from `from` to `to` for this joint.
    pub fn delta(&self, from: f64, to: f64) -> f64 {
        if self.is_continuous() {
            wrap_angle(to - from)
        } else {
            to - from
        }
    }
}

/// Wrap an angle into `[-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI && a > 0.0 {
        PI
    } else {
        w
    }
}

/// Joint values in chain order (rad for revolute, m for prismatic).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointVector(pub Vec<f64>);

impl JointVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn max_abs_diff(&self, other: &JointVector) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Deref for JointVector {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for JointVector {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

impl From<Vec<f64>> for JointVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<&[f64]> for JointVector {
    fn from(v: &[f64]) -> Self {
        Self(v.to_vec())
    }
}

impl FromIterator<f64> for JointVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Parallel-link constraint: the compensated joint's frame is counter-moved by
/// the driver's value, keeping orientation past it independent of the driver.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParallelogramPair {
    pub driver: usize,
    pub compensated: usize,
}

/// Serial chain: each joint is a fixed pre-transform followed by a single-variable motion.
#[derive(Clone, Debug, PartialEq)]
pub struct KinematicChain {
    pub name: String,
    pub joints: Vec<JointSpec>,
    pub tool: Isometry3<f64>,
    pub parallelogram: Vec<ParallelogramPair>,
    pub safety: SafetyConfig,
}

impl KinematicChain {
    pub fn preset(name: &str) -> Result<Self, KinematicsError> {
        Self::from_config(ChainConfig::preset(name)?)
    }

    pub fn from_config(cfg: ChainConfig) -> Result<Self, KinematicsError> {
        if cfg.joints.is_empty() {
            return Err(KinematicsError::InvalidConfig("chain has no joints".into()));
        }
        if let Some(expected) = expected_joint_count(&cfg.name) {
            if cfg.joints.len() != expected {
                return Err(KinematicsError::InvalidConfig(format!(
                    "preset {} needs {expected} joints, config has {}",
                    cfg.name,
                    cfg.joints.len()
                )));
            }
        }
        let joints = cfg
            .joints
            .iter()
            .map(JointSpec::from_config)
            .collect::<Result<Vec<_>, _>>()?;
        let mut seen = HashSet::new();
        for j in &joints {
            if !seen.insert(j.id.as_str()) {
                return Err(KinematicsError::InvalidConfig(format!(
                    "duplicate joint id {}",
                    j.id
                )));
            }
        }
        let index_of = |id: &str| {
            joints
                .iter()
                .position(|j| j.id == id)
                .ok_or_else(|| KinematicsError::InvalidConfig(format!("unknown joint {id}")))
        };
        let mut parallelogram = Vec::new();
        for p in &cfg.parallelogram {
            let driver = index_of(&p.driver)?;
            let compensated = index_of(&p.compensated)?;
            if driver >= compensated {
                return Err(KinematicsError::InvalidConfig(format!(
                    "parallelogram driver {} must precede {}",
                    p.driver, p.compensated
                )));
            }
            parallelogram.push(ParallelogramPair {
                driver,
                compensated,
            });
        }
        let safety = cfg.safety.unwrap_or_default();
        for id in safety.back_arm.iter().chain(safety.retract.keys()) {
            index_of(id)?;
        }
        Ok(Self {
            name: cfg.name,
            joints,
            tool: cfg.tool.to_isometry(),
            parallelogram,
            safety,
        })
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joint_index(&self, id: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.id == id)
    }

    /// Every joint at its home value.
    pub fn home(&self) -> JointVector {
        self.joints.iter().map(|j| j.home).collect()
    }

    /// Length and limit check.
    pub fn check(&self, q: &[f64]) -> Result<(), KinematicsError> {
        if q.len() != self.dof() {
            return Err(KinematicsError::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        for (j, &v) in self.joints.iter().zip(q) {
            if !v.is_finite() || !j.contains(v) {
                return Err(KinematicsError::LimitViolation {
                    joint: j.id.clone(),
                    value: v,
                    min: j.limits[0],
                    max: j.limits[1],
                });
            }
        }
        Ok(())
    }

    /// Project every value back into its joint range.
    pub fn bound(&self, q: &mut [f64]) {
        for (j, v) in self.joints.iter().zip(q.iter_mut()) {
            *v = j.bound(*v);
        }
    }

    /// Values for the safe retract pose; joints not listed keep `current`.
    pub fn retract_target(&self, current: &[f64]) -> JointVector {
        let mut q = JointVector::from(current);
        for (id, v) in &self.safety.retract {
            if let Some(i) = self.joint_index(id) {
                q[i] = self.joints[i].bound(*v);
            }
        }
        q
    }

    /// Indices of joints in the back-arm (gas-spring) set.
    pub fn back_arm_indices(&self) -> Vec<usize> {
        self.safety
            .back_arm
            .iter()
            .filter_map(|id| self.joint_index(id))
            .collect()
    }

    /// Parallelogram pairs as ids, in config order.
    pub fn parallelogram_ids(&self) -> Vec<(String, String)> {
        self.parallelogram
            .iter()
            .map(|p| {
                (
                    self.joints[p.driver].id.clone(),
                    self.joints[p.compensated].id.clone(),
                )
            })
            .collect()
    }
}

/// Home joint vector of a chain.
pub fn home(chain: &KinematicChain) -> JointVector {
    chain.home()
}
