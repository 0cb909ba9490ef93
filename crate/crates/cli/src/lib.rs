//! Command-line runner: configuration, orchestration and artifact output.

pub mod config;
pub mod run;

use std::path::PathBuf;

use clap::Parser;

pub use config::{Command, RunConfig};
pub use run::run;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error at {at}: {msg}")]
    Parse { at: String, msg: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: helm_open::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status: 2 for bad input, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => 2,
            CliError::Core { .. } | CliError::Io { .. } => 1,
        }
    }
}

/// `helm-open <command> [--config FILE] [--key value ...] [--trace] [--out DIR]`.
#[derive(Debug, Parser)]
#[command(name = "helm-open", version, about = "Radiation-functional Helmholtz solver")]
pub struct Args {
    /// solve, study, exact, mesh or scan.
    pub command: String,
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write per-iteration CG history.
    #[arg(long)]
    pub trace: bool,
    #[arg(long)]
    pub out: Option<String>,
    /// annulus, ellipse or square (comma list for study).
    #[arg(long)]
    pub shape: Option<String>,
    #[arg(long)]
    pub r_inner: Option<String>,
    /// Outer size(s) R.
    #[arg(long = "R", alias = "radius")]
    pub radius: Option<String>,
    #[arg(long)]
    pub j: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    /// constant:<n0>, gaussian_pair or angular:<a>.
    #[arg(long)]
    pub refraction: Option<String>,
    #[arg(long)]
    pub h: Option<String>,
    #[arg(long)]
    pub hole_levels: Option<String>,
    /// weighted or unweighted.
    #[arg(long)]
    pub functional: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub max_iterations: Option<String>,
    #[arg(long)]
    pub restart: Option<String>,
    /// neumann or dirichlet.
    #[arg(long)]
    pub outer: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// zero or random.
    #[arg(long)]
    pub initial: Option<String>,
    /// Scan parameters for n = 2 + a x/|x|.
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub reference_radius: Option<String>,
    /// none, csv, vtk or both.
    #[arg(long)]
    pub field: Option<String>,
    #[arg(long)]
    pub samples_r: Option<String>,
    #[arg(long)]
    pub samples_theta: Option<String>,
}

impl Args {
    fn flag_pairs(&self) -> Vec<(String, String, config::Source)> {
        let fields: [(&str, &Option<String>); 21] = [
            ("shape", &self.shape),
            ("r_inner", &self.r_inner),
            ("R", &self.radius),
            ("j", &self.j),
            ("k", &self.k),
            ("refraction", &self.refraction),
            ("h", &self.h),
            ("hole_levels", &self.hole_levels),
            ("functional", &self.functional),
            ("epsilon", &self.epsilon),
            ("max_iterations", &self.max_iterations),
            ("restart", &self.restart),
            ("outer", &self.outer),
            ("seed", &self.seed),
            ("initial", &self.initial),
            ("a", &self.a),
            ("reference_radius", &self.reference_radius),
            ("field", &self.field),
            ("samples_r", &self.samples_r),
            ("samples_theta", &self.samples_theta),
            ("out", &self.out),
        ];
        let mut pairs: Vec<_> = fields
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone(), config::Source::Flag)))
            .collect();
        if self.trace {
            pairs.push(("trace".into(), "true".into(), config::Source::Flag));
        }
        pairs
    }

    /// Resolves the config file (if any) and flags into a validated config.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let command = Command::parse(&self.command).ok_or_else(|| CliError::Parse {
            at: "command line".into(),
            msg: format!("unknown command `{}` (expected solve, study, exact, mesh or scan)", self.command),
        })?;
        let mut pairs = match &self.config {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
                config::parse_pairs(&text).map_err(|e| match e {
                    CliError::Parse { at, msg } => CliError::Parse { at: format!("{}:{at}", path.display()), msg },
                    e => e,
                })?
            }
            None => Vec::new(),
        };
        pairs.extend(self.flag_pairs());
        RunConfig::from_pairs(command, &pairs)
    }
}
