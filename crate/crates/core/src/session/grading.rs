use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::views::{StandardView, ViewName};
use crate::kinematics::Pose;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    Sonographer,
    Robot,
}

impl Operator {
    pub const ALL: [Operator; 2] = [Operator::Sonographer, Operator::Robot];

    pub fn as_str(self) -> &'static str {
        match self {
            Operator::Sonographer => "sonographer",
            Operator::Robot => "robot",
        }
    }
}

/// Ordered best first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grade {
    Good,
    Acceptable,
    Poor,
}

impl Grade {
    pub fn as_str(self) -> &'static str {
        match self {
            Grade::Good => "good",
            Grade::Acceptable => "acceptable",
            Grade::Poor => "poor",
        }
    }

    pub fn is_adequate(self) -> bool {
        self != Grade::Poor
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradeRecord {
    pub view: ViewName,
    pub operator: Operator,
    pub grade: Grade,
    /// m
    pub position_error: f64,
    /// rad
    pub orientation_error: f64,
    /// N
    pub normal_force: f64,
    pub tick: u64,
}

/// Force slack of the acceptable band, as a fraction of the window bounds.
pub const FORCE_SLACK: f64 = 0.2;

/// Grade from pose errors and normal force alone.
///
/// Good: both errors within half their tolerance and force inside the window.
/// Acceptable: errors within tolerance and force inside the window widened by
/// [`FORCE_SLACK`] at each end. Otherwise poor.
pub fn grade_errors(view: &StandardView, position_error: f64, orientation_error: f64, force: f64) -> Grade {
    let [lo, hi] = view.force_window;
    let within = |k: f64| {
        position_error <= k * view.position_tolerance
            && orientation_error <= k * view.orientation_tolerance
    };
    if within(0.5) && force >= lo && force <= hi {
        Grade::Good
    } else if within(1.0) && force >= lo * (1.0 - FORCE_SLACK) && force <= hi * (1.0 + FORCE_SLACK) {
        Grade::Acceptable
    } else {
        Grade::Poor
    }
}

/// Grade an acquisition: `achieved` is the probe pose held, `normal_force` the contact force.
pub fn grade_acquisition(
    view: &StandardView,
    achieved: &Pose,
    normal_force: f64,
    operator: Operator,
    tick: u64,
) -> GradeRecord {
    let (dp, dr) = achieved.error_to(&view.target.probe_pose());
    GradeRecord {
        view: view.name,
        operator,
        grade: grade_errors(view, dp, dr, normal_force),
        position_error: dp,
        orientation_error: dr,
        normal_force,
        tick,
    }
}

/// Counts and fractions for one operator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GradeCounts {
    pub total: usize,
    pub good: usize,
    pub acceptable: usize,
    pub poor: usize,
}

impl GradeCounts {
    pub fn add(&mut self, grade: Grade) {
        self.total += 1;
        match grade {
            Grade::Good => self.good += 1,
            Grade::Acceptable => self.acceptable += 1,
            Grade::Poor => self.poor += 1,
        }
    }

    pub fn adequate(&self) -> usize {
        self.good + self.acceptable
    }

    /// Good-or-acceptable over total; `None` when there are no records.
    pub fn adequate_fraction(&self) -> Option<f64> {
        ratio(self.adequate(), self.total)
    }

    /// Good over good-or-acceptable; `None` when nothing was adequate.
    pub fn good_fraction(&self) -> Option<f64> {
        ratio(self.good, self.adequate())
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Per-operator grade counts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GradeSummary {
    pub operators: BTreeMap<Operator, GradeCounts>,
}

impl GradeSummary {
    /// Counts for `op`, zero when absent.
    pub fn get(&self, op: Operator) -> GradeCounts {
        self.operators.get(&op).copied().unwrap_or_default()
    }
}

pub fn summarize_grades<'a>(records: impl IntoIterator<Item = &'a GradeRecord>) -> GradeSummary {
    let mut summary = GradeSummary::default();
    for op in Operator::ALL {
        summary.operators.insert(op, GradeCounts::default());
    }
    for r in records {
        summary.operators.entry(r.operator).or_default().add(r.grade);
    }
    summary
}

/// Percentage to one decimal place, or `n/a`.
pub fn format_percent(fraction: Option<f64>) -> String {
    match fraction {
        Some(f) => format!("{:.1}%", 100.0 * f),
        None => "n/a".to_string(),
    }
}
