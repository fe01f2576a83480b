//! Experiment configuration: one JSON document, schema-validated, unknown
//! keys rejected. Sweep lists expand into a cartesian run matrix; each
//! replication bumps the seed.

use serde::{Deserialize, Serialize};

use oco_core::{SequenceSpec, StartMode};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepLists {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_drift: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_drift: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub horizon: usize,
    pub ambient_radius: f64,
    pub f_drift: f64,
    pub g_drift: f64,
    pub g_level: f64,
    pub eig_f: (f64, f64),
    pub eig_g: (f64, f64),
    pub dist: f64,
    pub alpha: f64,
    pub seed: u64,
    #[serde(default)]
    pub start: StartMode,
    #[serde(default = "default_true")]
    pub f_isotropic: bool,
    #[serde(default = "default_true")]
    pub g_isotropic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_smoothness_floor: Option<f64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<SweepLists>,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    /// Tolerance of the iterative intersection projections.
    #[serde(default = "default_projection_tol")]
    pub projection_tol: f64,
    #[serde(default = "default_projection_max_iter")]
    pub projection_max_iter: usize,
}

fn default_true() -> bool {
    true
}

fn default_replications() -> usize {
    1
}

fn default_out_dir() -> String {
    "out".to_string()
}

fn default_projection_tol() -> f64 {
    1e-13
}

fn default_projection_max_iter() -> usize {
    200_000
}

/// One resolved run: which sweep overrides apply and which seed to use.
#[derive(Debug, Clone, Serialize)]
pub struct RunPlan {
    pub id: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    pub overrides: serde_json::Map<String, serde_json::Value>,
    #[serde(skip)]
    pub spec: SequenceSpec,
}

impl ExperimentConfig {
    fn base_spec(&self) -> SequenceSpec {
        SequenceSpec {
            dim: self.dim,
            horizon: self.horizon,
            ambient_radius: self.ambient_radius,
            f_drift: self.f_drift,
            g_drift: self.g_drift,
            g_level: self.g_level,
            eig_f: self.eig_f,
            eig_g: self.eig_g,
            dist: self.dist,
            alpha: self.alpha,
            seed: self.seed,
            start: self.start,
            f_isotropic: self.f_isotropic,
            g_isotropic: self.g_isotropic,
            g_smoothness_floor: self.g_smoothness_floor,
        }
    }

    /// Expands sweeps x replications into the run matrix. Replications share
    /// sweep points; the same replication index uses the same seed at every
    /// sweep point, so sweep comparisons hold everything else fixed.
    pub fn plan_runs(&self) -> oco_core::Result<Vec<RunPlan>> {
        if self.replications == 0 {
            return Err(oco_core::Error::invalid("replications must be at least 1"));
        }
        let one = |v: &Option<Vec<f64>>| -> Vec<Option<f64>> {
            match v {
                Some(list) if !list.is_empty() => list.iter().copied().map(Some).collect(),
                _ => vec![None],
            }
        };
        let (dists, f_drifts, g_drifts) = match &self.sweeps {
            Some(s) => (one(&s.dist), one(&s.f_drift), one(&s.g_drift)),
            None => (vec![None], vec![None], vec![None]),
        };

        let mut plans = Vec::new();
        let mut sweep_idx = 0;
        for dist in &dists {
            for f_drift in &f_drifts {
                for g_drift in &g_drifts {
                    for rep in 0..self.replications {
                        let mut spec = self.base_spec();
                        let mut overrides = serde_json::Map::new();
                        if let Some(d) = dist {
                            spec.dist = *d;
                            overrides.insert("dist".into(), json_f64(*d));
                        }
                        if let Some(d) = f_drift {
                            spec.f_drift = *d;
                            overrides.insert("f_drift".into(), json_f64(*d));
                        }
                        if let Some(d) = g_drift {
                            spec.g_drift = *d;
                            overrides.insert("g_drift".into(), json_f64(*d));
                        }
                        spec.seed = self.seed.wrapping_add(rep as u64);
                        spec.validate()?;
                        plans.push(RunPlan {
                            id: format!("s{sweep_idx}_r{rep}"),
                            seed: spec.seed,
                            overrides,
                            spec,
                        });
                    }
                    sweep_idx += 1;
                }
            }
        }
        Ok(plans)
    }
}

fn json_f64(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}
