//! Flat `key = value` run configuration. Command-line flags mirror the keys
//! one to one and override file values.

use std::path::PathBuf;

use helm_open::analysis::MeshPolicy;
use helm_open::cgm::CgmConfig;
use helm_open::fem::OuterKind;
use helm_open::functional::FunctionalConfig;
use helm_open::mesh::{DomainSpec, Shape};
use helm_open::refraction::RefractionModel;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Study,
    Exact,
    Mesh,
    Scan,
}

impl Command {
    pub fn parse(s: &str) -> Option<Command> {
        Some(match s {
            "solve" => Command::Solve,
            "study" => Command::Study,
            "exact" => Command::Exact,
            "mesh" => Command::Mesh,
            "scan" => Command::Scan,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initial {
    Zero,
    /// Uniform in `[-1, 1]^2` per node, drawn from `seed`.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldOutput {
    pub csv: bool,
    pub vtk: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub shapes: Vec<Shape>,
    pub r_inner: f64,
    pub radii: Vec<f64>,
    pub js: Vec<usize>,
    pub ks: Vec<f64>,
    pub refraction: RefractionModel,
    pub mesh: MeshPolicy,
    pub functional: FunctionalConfig,
    pub cgm: CgmConfig,
    pub outer_kind: OuterKind,
    pub seed: u64,
    pub initial: Initial,
    pub a_values: Vec<f64>,
    pub reference_radius: Option<f64>,
    pub field: FieldOutput,
    pub samples_r: usize,
    pub samples_theta: usize,
    pub trace: bool,
    pub out: PathBuf,
}

/// Every accepted key, in documentation order.
pub const KEYS: &[&str] = &[
    "shape",
    "r_inner",
    "R",
    "j",
    "k",
    "refraction",
    "h",
    "hole_levels",
    "functional",
    "epsilon",
    "max_iterations",
    "restart",
    "outer",
    "seed",
    "initial",
    "a",
    "reference_radius",
    "field",
    "samples_r",
    "samples_theta",
    "trace",
    "out",
];

/// Where a value came from, for diagnostics.
#[derive(Debug, Clone)]
pub enum Source {
    Line(usize),
    Flag,
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::Line(n) => write!(f, "line {n}"),
            Source::Flag => write!(f, "command line"),
        }
    }
}

/// `(key, value, source)` triples from config text. `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String, Source)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| CliError::Parse {
            at: format!("line {}", i + 1),
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        out.push((key.trim().to_string(), value.trim().to_string(), Source::Line(i + 1)));
    }
    Ok(out)
}

fn list<T>(v: &str, parse: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    v.split(',').map(|s| parse(s.trim())).collect::<Option<Vec<_>>>().filter(|l| !l.is_empty())
}

fn bool_value(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Some(true),
        "false" | "no" | "0" | "off" => Some(false),
        _ => None,
    }
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        RunConfig {
            command,
            shapes: vec![Shape::Annulus],
            r_inner: 0.5,
            radii: vec![2.0],
            js: vec![0],
            ks: vec![1.0],
            refraction: RefractionModel::Constant(1.0),
            mesh: MeshPolicy { h: 0.2, hole_levels: 0 },
            functional: FunctionalConfig::unweighted(),
            cgm: CgmConfig::default(),
            outer_kind: OuterKind::Neumann,
            seed: 42,
            initial: Initial::Zero,
            a_values: vec![0.0, 0.1, 0.8],
            reference_radius: None,
            field: FieldOutput { csv: false, vtk: false },
            samples_r: 31,
            samples_theta: 64,
            trace: false,
            out: PathBuf::from("helm-open-out"),
        }
    }

    fn set(&mut self, key: &str, value: &str, at: &Source) -> Result<(), CliError> {
        let bad = |what: &str| CliError::Parse {
            at: at.to_string(),
            msg: format!("`{key}`: expected {what}, got `{value}`"),
        };
        let float = |s: &str| s.parse::<f64>().ok().filter(|x| x.is_finite());
        match key {
            "shape" => self.shapes = list(value, Shape::parse).ok_or_else(|| bad("annulus, ellipse or square"))?,
            "r_inner" => self.r_inner = float(value).ok_or_else(|| bad("a number"))?,
            "R" | "radius" => self.radii = list(value, float).ok_or_else(|| bad("a list of numbers"))?,
            "j" => self.js = list(value, |s| s.parse().ok()).ok_or_else(|| bad("a list of nonnegative integers"))?,
            "k" => self.ks = list(value, float).ok_or_else(|| bad("a list of numbers"))?,
            "refraction" => {
                self.refraction = RefractionModel::parse(value).map_err(|e| match e {
                    helm_open::Error::NonPositiveIndex { .. } => CliError::Validation(format!("{at}: refraction: {e}")),
                    e => CliError::Parse { at: at.to_string(), msg: e.to_string() },
                })?
            }
            "h" => self.mesh.h = float(value).ok_or_else(|| bad("a number"))?,
            "hole_levels" => self.mesh.hole_levels = value.parse().map_err(|_| bad("a nonnegative integer"))?,
            "functional" => {
                self.functional = match value {
                    "weighted" => FunctionalConfig::weighted(),
                    "unweighted" => FunctionalConfig::unweighted(),
                    _ => return Err(bad("weighted or unweighted")),
                }
            }
            "epsilon" => self.cgm.epsilon = float(value).ok_or_else(|| bad("a number"))?,
            "max_iterations" => self.cgm.max_iterations = value.parse().map_err(|_| bad("a positive integer"))?,
            "restart" => self.cgm.restart = value.parse().map_err(|_| bad("a positive integer"))?,
            "outer" => self.outer_kind = OuterKind::parse(value).ok_or_else(|| bad("neumann or dirichlet"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("an unsigned integer"))?,
            "initial" => {
                self.initial = match value {
                    "zero" => Initial::Zero,
                    "random" => Initial::Random,
                    _ => return Err(bad("zero or random")),
                }
            }
            "a" => self.a_values = list(value, float).ok_or_else(|| bad("a list of numbers"))?,
            "reference_radius" => self.reference_radius = Some(float(value).ok_or_else(|| bad("a number"))?),
            "field" => {
                self.field = match value {
                    "none" => FieldOutput { csv: false, vtk: false },
                    "csv" => FieldOutput { csv: true, vtk: false },
                    "vtk" => FieldOutput { csv: false, vtk: true },
                    "both" => FieldOutput { csv: true, vtk: true },
                    _ => return Err(bad("none, csv, vtk or both")),
                }
            }
            "samples_r" => self.samples_r = value.parse().map_err(|_| bad("an integer"))?,
            "samples_theta" => self.samples_theta = value.parse().map_err(|_| bad("an integer"))?,
            "trace" => self.trace = bool_value(value).ok_or_else(|| bad("true or false"))?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(CliError::Parse { at: at.to_string(), msg: format!("unknown key `{key}`") }),
        }
        Ok(())
    }

    /// Applies pairs in order, so later ones (flags) win.
    pub fn from_pairs(command: Command, pairs: &[(String, String, Source)]) -> Result<Self, CliError> {
        let mut cfg = RunConfig::defaults(command);
        if command == Command::Scan {
            cfg.radii = vec![2.0, 4.0, 8.0, 12.0];
            cfg.functional = FunctionalConfig::weighted();
        }
        for (k, v, at) in pairs {
            cfg.set(k, v, at)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |m: String| Err(CliError::Validation(m));
        if !(self.r_inner > 0.0) {
            return invalid(format!("r_inner must be positive, got {}", self.r_inner));
        }
        for &shape in &self.shapes {
            for &r in &self.radii {
                if let Err(e) = DomainSpec::new(shape, self.r_inner, r) {
                    return invalid(format!("R = {r}: {e}"));
                }
            }
        }
        if let Some(k) = self.ks.iter().find(|&&k| !(k > 0.0)) {
            return invalid(format!("k must be positive, got {k}"));
        }
        if !(self.mesh.h > 0.0) {
            return invalid(format!("h must be positive, got {}", self.mesh.h));
        }
        if let Err(e) = self.cgm.validate() {
            return invalid(e.to_string());
        }
        for &a in &self.a_values {
            if let Err(e) = RefractionModel::AngularLinear(a).validate() {
                return invalid(format!("a = {a}: {e}"));
            }
        }
        let single = self.shapes.len() == 1 && self.radii.len() == 1 && self.js.len() == 1 && self.ks.len() == 1;
        if matches!(self.command, Command::Solve | Command::Mesh) && !single {
            return invalid("solve and mesh take a single shape, R, j and k".into());
        }
        if self.command == Command::Scan && self.radii.len() < 2 {
            return invalid("scan needs at least two radii".into());
        }
        if self.command == Command::Exact && (self.samples_r < 2 || self.samples_theta == 0) {
            return invalid("exact needs samples_r >= 2 and samples_theta >= 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_is_accepted() {
        let values = [
            "square",
            "0.5",
            "1,2",
            "0,2",
            "0.5,1",
            "angular:0.1",
            "0.3",
            "1",
            "weighted",
            "1e-6",
            "20",
            "10",
            "dirichlet",
            "7",
            "random",
            "0,0.5",
            "4",
            "both",
            "5",
            "8",
            "true",
            "/tmp/x",
        ];
        assert_eq!(values.len(), KEYS.len());
        let mut cfg = RunConfig::defaults(Command::Study);
        for (k, v) in KEYS.iter().zip(values) {
            cfg.set(k, v, &Source::Flag).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
    }
}
