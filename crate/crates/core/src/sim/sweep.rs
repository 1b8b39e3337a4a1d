use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::session::{StandardView, ViewName};
use crate::surface::{generate_sweep, SurfaceMesh, SweepPath};

/// A point a path passes through: a standard view (a graded stop) or a raw point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Via {
    View(ViewName),
    Point([f64; 3]),
}

/// One probe's path as written in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub via: Vec<Via>,
    /// Probe roll along the path, rad. Stops take their view's roll.
    #[serde(default)]
    pub roll: f64,
    /// Resample to exactly this many waypoints (paths without view stops only).
    #[serde(default)]
    pub waypoints: Option<usize>,
}

/// A named sweep: `path` for a single arm, `left` and `right` for the dual rig.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub id: String,
    /// Largest surface distance between waypoints, m.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default)]
    pub path: Option<PathSpec>,
    #[serde(default)]
    pub left: Option<PathSpec>,
    #[serde(default)]
    pub right: Option<PathSpec>,
}

fn default_spacing() -> f64 {
    0.01
}

/// A surface path plus the view graded at each waypoint, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedPath {
    pub path: SweepPath,
    pub stops: Vec<Option<ViewName>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepDef {
    pub id: String,
    /// One per arm.
    pub paths: Vec<ResolvedPath>,
}

impl SweepDef {
    pub fn len(&self) -> usize {
        self.paths[0].path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The paths with every waypoint pressed in by `indentation`.
    pub fn at_indentation(&self, indentation: f64) -> Vec<SweepPath> {
        self.paths
            .iter()
            .map(|p| {
                let mut path = p.path.clone();
                for w in &mut path.waypoints {
                    w.indentation = indentation;
                }
                path
            })
            .collect()
    }
}

impl SweepSpec {
    /// One sweep written as a standalone TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))
    }

    pub fn resolve(&self, arms: usize, mesh: &SurfaceMesh, views: &[StandardView]) -> Result<SweepDef, SimError> {
        let bad = |m: &str| SimError::InvalidConfig(format!("sweep {}: {m}", self.id));
        let specs: Vec<&PathSpec> = match (arms, &self.path, &self.left, &self.right) {
            (1, Some(p), None, None) => vec![p],
            (2, None, Some(l), Some(r)) => vec![l, r],
            (1, ..) => return Err(bad("a single arm needs `path` only")),
            _ => return Err(bad("a dual rig needs `left` and `right` only")),
        };
        let paths = specs
            .into_iter()
            .map(|p| resolve_path(p, self.spacing, mesh, views).map_err(|m| bad(&m)))
            .collect::<Result<Vec<_>, _>>()?;
        if paths.iter().any(|p| p.path.len() != paths[0].path.len()) {
            let lens: Vec<String> = paths.iter().map(|p| p.path.len().to_string()).collect();
            return Err(bad(&format!("paths have different lengths ({})", lens.join(" vs "))));
        }
        Ok(SweepDef {
            id: self.id.clone(),
            paths,
        })
    }
}

fn resolve_path(
    spec: &PathSpec,
    spacing: f64,
    mesh: &SurfaceMesh,
    views: &[StandardView],
) -> Result<ResolvedPath, String> {
    if spec.via.is_empty() {
        return Err("path has no via points".into());
    }
    let view = |name: ViewName| {
        views
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| format!("view {} is not loaded", name.key()))
    };
    let point = |via: &Via| -> Result<Vector3<f64>, String> {
        Ok(match via {
            Via::View(name) => view(*name)?.target.surface_point,
            Via::Point(p) => Vector3::from(*p),
        })
    };
    let stop = |via: &Via| match via {
        Via::View(name) => Some(*name),
        Via::Point(_) => None,
    };

    let mut path = if spec.via.len() == 1 {
        SweepPath::from_points(mesh, &[point(&spec.via[0])?], 0.0, 0.0).map_err(|e| e.to_string())?
    } else {
        SweepPath {
            waypoints: Vec::new(),
            spacing,
        }
    };
    let mut stops = vec![stop(&spec.via[0])];
    for pair in spec.via.windows(2) {
        let segment = generate_sweep(mesh, &point(&pair[0])?, &point(&pair[1])?, spacing, 0.0)
            .map_err(|e| e.to_string())?;
        let skip = usize::from(!path.waypoints.is_empty());
        path.waypoints.extend(segment.waypoints.into_iter().skip(skip));
        stops.resize(path.waypoints.len() - 1, None);
        stops.push(stop(&pair[1]));
    }
    for w in &mut path.waypoints {
        w.axial_roll = spec.roll;
    }
    for (w, s) in path.waypoints.iter_mut().zip(&stops) {
        if let Some(name) = s {
            *w = view(*name)?.target;
            w.indentation = 0.0;
        }
    }
    if let Some(n) = spec.waypoints {
        if stops.iter().any(Option::is_some) {
            return Err("`waypoints` cannot be combined with view stops".into());
        }
        path = path.resample(mesh, n).map_err(|e| e.to_string())?;
        stops = vec![None; n];
    }
    Ok(ResolvedPath { path, stops })
}
