use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::surface::{ContactPose, SurfaceMesh};

pub const VIEWS_TOML: &str = include_str!("../../assets/session/views.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewName {
    PancreasTs,
    LeftLobeLiverTs,
    RightLobeLiverTs,
    RightLobeLiverWithRightKidney,
    GallbladderLs,
    AortaCoeliacAxis,
    AortaMidAbdominal,
}

impl ViewName {
    pub const ALL: [ViewName; 7] = [
        ViewName::PancreasTs,
        ViewName::LeftLobeLiverTs,
        ViewName::RightLobeLiverTs,
        ViewName::RightLobeLiverWithRightKidney,
        ViewName::GallbladderLs,
        ViewName::AortaCoeliacAxis,
        ViewName::AortaMidAbdominal,
    ];

    /// Identifier used in config files and logs.
    pub fn key(self) -> &'static str {
        match self {
            ViewName::PancreasTs => "pancreas_ts",
            ViewName::LeftLobeLiverTs => "left_lobe_liver_ts",
            ViewName::RightLobeLiverTs => "right_lobe_liver_ts",
            ViewName::RightLobeLiverWithRightKidney => "right_lobe_liver_with_right_kidney",
            ViewName::GallbladderLs => "gallbladder_ls",
            ViewName::AortaCoeliacAxis => "aorta_coeliac_axis",
            ViewName::AortaMidAbdominal => "aorta_mid_abdominal",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ViewName::PancreasTs => "pancreas TS",
            ViewName::LeftLobeLiverTs => "left lobe liver TS",
            ViewName::RightLobeLiverTs => "right lobe liver TS",
            ViewName::RightLobeLiverWithRightKidney => "right lobe liver with right kidney",
            ViewName::GallbladderLs => "gallbladder LS",
            ViewName::AortaCoeliacAxis => "aorta at coeliac axis",
            ViewName::AortaMidAbdominal => "aorta mid-abdominal",
        }
    }

    /// Central dome (liver, pancreas, aorta) or right flank (gallbladder, kidney).
    pub fn region(self) -> Region {
        match self {
            ViewName::RightLobeLiverWithRightKidney | ViewName::GallbladderLs => Region::Flank,
            _ => Region::Upper,
        }
    }

    pub fn parse(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.key() == key)
    }
}

impl fmt::Display for ViewName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Central dome: liver, pancreas, aorta.
    Upper,
    /// Right flank: gallbladder, kidney.
    Flank,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ViewDefaults {
    position_tolerance: f64,
    orientation_tolerance: f64,
    force_window: [f64; 2],
    indentation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ViewEntry {
    name: ViewName,
    center: [f64; 3],
    #[serde(default)]
    roll: f64,
    position_tolerance: Option<f64>,
    orientation_tolerance: Option<f64>,
    force_window: Option<[f64; 2]>,
    indentation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ViewsFile {
    defaults: ViewDefaults,
    view: Vec<ViewEntry>,
}

/// A standard view resolved on a surface mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardView {
    pub name: ViewName,
    pub region: Region,
    pub target: ContactPose,
    /// m
    pub position_tolerance: f64,
    /// rad
    pub orientation_tolerance: f64,
    /// Accepted normal force, N.
    pub force_window: [f64; 2],
}

impl StandardView {
    pub fn validate(&self) -> Result<(), SessionError> {
        let bad = |m: String| Err(SessionError::InvalidView(format!("{}: {m}", self.name.key())));
        if !(self.position_tolerance > 0.0 && self.orientation_tolerance > 0.0) {
            return bad("tolerances must be positive".into());
        }
        let [lo, hi] = self.force_window;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return bad(format!("force window [{lo}, {hi}] needs 0 < min < max"));
        }
        Ok(())
    }
}

/// Parse a views file and project each view centre onto `mesh`.
pub fn load_views(text: &str, mesh: &SurfaceMesh) -> Result<Vec<StandardView>, SessionError> {
    let file: ViewsFile =
        toml::from_str(text).map_err(|e| SessionError::InvalidView(e.to_string()))?;
    let d = &file.defaults;
    let mut views = Vec::with_capacity(file.view.len());
    for entry in &file.view {
        if views.iter().any(|v: &StandardView| v.name == entry.name) {
            return Err(SessionError::InvalidView(format!(
                "duplicate view {}",
                entry.name.key()
            )));
        }
        let indentation = entry.indentation.unwrap_or(d.indentation);
        let view = StandardView {
            name: entry.name,
            region: entry.name.region(),
            target: ContactPose::on_mesh(mesh, &Vector3::from(entry.center), indentation, entry.roll),
            position_tolerance: entry.position_tolerance.unwrap_or(d.position_tolerance),
            orientation_tolerance: entry.orientation_tolerance.unwrap_or(d.orientation_tolerance),
            force_window: entry.force_window.unwrap_or(d.force_window),
        };
        view.validate()?;
        views.push(view);
    }
    Ok(views)
}

/// The bundled views on `mesh`.
pub fn standard_views(mesh: &SurfaceMesh) -> Vec<StandardView> {
    load_views(VIEWS_TOML, mesh).expect("bundled views are valid")
}
