use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;

use jsqslq::model::{validate_params, RawParams};
use jsqslq::{Error, ModelParams};

/// Model parameters from an optional JSON file, overridden by flags.
#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// JSON object with any of "lambda", "mu", "p", "q".
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Service rates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_name = "A,B,C")]
    pub mu: Option<Vec<f64>>,
    /// Arrival tie weights; uniform when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_name = "A,B,C")]
    pub p: Option<Vec<f64>>,
    /// Server tie weights; uniform when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_name = "A,B,C")]
    pub q: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    lambda: Option<f64>,
    mu: Option<[f64; 3]>,
    p: Option<[f64; 3]>,
    q: Option<[f64; 3]>,
}

/// Failure to assemble parameters; always a validation error.
#[derive(Debug)]
pub struct ParamError(pub String);

impl From<Error> for ParamError {
    fn from(e: Error) -> Self {
        ParamError(e.to_string())
    }
}

fn triple(name: &str, v: Option<&Vec<f64>>) -> Result<Option<[f64; 3]>, ParamError> {
    match v {
        None => Ok(None),
        Some(v) if v.len() == 3 => Ok(Some([v[0], v[1], v[2]])),
        Some(v) => Err(ParamError(format!("--{name} takes 3 values, got {}", v.len()))),
    }
}

impl ParamArgs {
    /// `lambda_fallback` fills in the arrival rate for commands that do not
    /// use it.
    pub fn resolve(&self, lambda_fallback: Option<f64>) -> Result<ModelParams, ParamError> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ParamError(format!("{}: {e}", path.display())))?;
                serde_json::from_str::<ConfigFile>(&text)
                    .map_err(|e| ParamError(format!("{}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };
        let lambda = self
            .lambda
            .or(file.lambda)
            .or(lambda_fallback)
            .ok_or_else(|| ParamError("missing lambda".into()))?;
        let mu = triple("mu", self.mu.as_ref())?
            .or(file.mu)
            .ok_or_else(|| ParamError("missing mu".into()))?;
        let p = triple("p", self.p.as_ref())?.or(file.p).unwrap_or([1.0 / 3.0; 3]);
        let q = triple("q", self.q.as_ref())?.or(file.q).unwrap_or([1.0; 3]);
        Ok(validate_params(&RawParams { lambda, mu, p, q })?)
    }
}
