//! Job files and the settings a run is evaluated with.

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use borelforge::{Rat, Region};

use crate::CliError;

pub const JOB_VERSION: u32 = 1;

/// `{version, command, region, payload, tolerances, outputs}`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobFile {
    pub version: u32,
    pub command: String,
    #[serde(default)]
    pub region: Option<Region>,
    pub payload: Value,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Residual bound for the command's main match check.
    #[serde(default)]
    pub residual: Option<f64>,
    /// Highest derivative order the verification pass looks at.
    #[serde(default)]
    pub max_order: Option<usize>,
    /// First rung of vanishing-order ladders.
    #[serde(default)]
    pub h0: Option<f64>,
}

/// File names inside the output directory.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_expr")]
    pub expr: String,
    #[serde(default = "default_report")]
    pub report: String,
    #[serde(default = "default_text")]
    pub text: String,
    /// Written when set, or with `--dump-grid`.
    #[serde(default)]
    pub grid: Option<String>,
}

fn default_expr() -> String {
    "expr.json".into()
}
fn default_report() -> String {
    "report.json".into()
}
fn default_text() -> String {
    "report.txt".into()
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { expr: default_expr(), report: default_report(), text: default_text(), grid: None }
    }
}

/// Knobs after merging job tolerances with command-line flags.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    pub tol: Option<f64>,
    pub max_order: Option<usize>,
    pub h0: Option<f64>,
    pub i_max: Option<u32>,
    pub j_max: Option<usize>,
    pub window: Option<(Rat, Rat)>,
}

impl Settings {
    /// Flags win over the job file.
    pub fn merged(&self, t: &Tolerances) -> Settings {
        Settings {
            tol: self.tol.or(t.residual),
            max_order: self.max_order.or(t.max_order),
            h0: self.h0.or(t.h0),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(t) = self.tol {
            if !(t > 0.0) || !t.is_finite() {
                return Err(CliError::Validation(format!("tolerance must be positive, got {t}")));
            }
        }
        if let Some(h) = self.h0 {
            if !(h > 0.0) || !h.is_finite() {
                return Err(CliError::Validation(format!("h0 must be positive, got {h}")));
            }
        }
        if let Some((a, b)) = &self.window {
            if a >= b {
                return Err(CliError::Validation("window must have lo < hi".into()));
            }
        }
        Ok(())
    }
}

/// Deserializes with the failing field path in the message.
pub fn parse_at<T: DeserializeOwned>(v: &Value, prefix: &str) -> Result<T, CliError> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let at = if path == "." { prefix.to_string() } else { format!("{prefix}.{path}") };
        CliError::Validation(format!("at {at}: {}", e.inner()))
    })
}

pub fn parse_job(text: &str) -> Result<JobFile, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let job: JobFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Validation(format!("at {path}: {}", e.inner()))
    })?;
    if job.version != JOB_VERSION {
        return Err(CliError::Validation(format!("at version: unsupported job version {}, expected {JOB_VERSION}", job.version)));
    }
    Ok(job)
}
