use anyhow::{bail, Result};
use coxcindex::{BaselineSet, Dataset, Observation};
use serde::{Deserialize, Serialize};

use crate::table::Table;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub covariates: Vec<String>,
    pub strata_col: Option<String>,
    pub fingerprint: String,
}

impl Schema {
    pub fn of(table: &Table) -> Self {
        let fingerprint = format!(
            "time,event;strata={};covariates={}",
            table.strata_col.as_deref().unwrap_or("-"),
            table.covariate_names.join(",")
        );
        Schema {
            covariates: table.covariate_names.clone(),
            strata_col: table.strata_col.clone(),
            fingerprint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    /// Column means and sample standard deviations; constant columns keep scale 1.
    pub fn estimate(data: &Dataset) -> Self {
        let n = data.len() as f64;
        let d = data.dim();
        let mut means = vec![0.0; d];
        for o in data.observations() {
            for (m, x) in means.iter_mut().zip(&o.covariates) {
                *m += x / n;
            }
        }
        let mut scales = vec![0.0; d];
        for o in data.observations() {
            for j in 0..d {
                scales[j] += (o.covariates[j] - means[j]).powi(2);
            }
        }
        for s in &mut scales {
            let sd = if n > 1.0 { (*s / (n - 1.0)).sqrt() } else { 0.0 };
            *s = if sd > 0.0 { sd } else { 1.0 };
        }
        Standardization { means, scales }
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let obs = data
            .observations()
            .iter()
            .map(|o| Observation {
                covariates: o
                    .covariates
                    .iter()
                    .zip(self.means.iter().zip(&self.scales))
                    .map(|(x, (m, s))| (x - m) / s)
                    .collect(),
                ..o.clone()
            })
            .collect();
        Ok(Dataset::new(obs)?)
    }

    /// Coefficients on the standardized scale mapped back to original units.
    pub fn to_original(&self, beta: &[f64]) -> Vec<f64> {
        beta.iter().zip(&self.scales).map(|(b, s)| b / s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub method: String,
    pub converged: bool,
    pub n_iterations: usize,
    pub log_partial_likelihood: f64,
    pub final_gradient_norm: Option<f64>,
    pub kkt_violation: Option<f64>,
    pub monotone_likelihood: bool,
    pub n_observations: usize,
    pub n_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub schema: Schema,
    /// Coefficients on the original covariate scale.
    pub beta: Vec<f64>,
    pub penalty: Option<f64>,
    pub standardization: Option<Standardization>,
    pub baselines: BaselineSet,
    pub diagnostics: FitDiagnostics,
}

impl ModelFile {
    pub fn check_schema(&self, table: &Table) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            bail!(
                "model format_version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            );
        }
        let schema = Schema::of(table);
        if schema.fingerprint != self.schema.fingerprint {
            bail!(
                "schema mismatch: model expects {:?}, input has {:?}",
                self.schema.fingerprint,
                schema.fingerprint
            );
        }
        Ok(())
    }
}
