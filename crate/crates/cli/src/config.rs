use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cmcgraph::domain::DomainSpec;
use cmcgraph::geometry::MetricSpec;
use cmcgraph::solver::{geometric_schedule, validate_schedule, NewtonSettings, PhiSpec, U0Spec};
use serde::{Deserialize, Serialize};

fn default_metric() -> MetricSpec {
    MetricSpec::Euclidean { dim: 2 }
}

fn default_phi() -> PhiSpec {
    PhiSpec::Constant { value: 0.0 }
}

fn default_schedule() -> Vec<f64> {
    geometric_schedule(1e-1, 1e-4, 4)
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// A single JSON run description; command-line flags override its fields.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_metric")]
    pub metric: MetricSpec,
    pub domain: DomainSpec,
    #[serde(default = "default_phi")]
    pub phi: PhiSpec,
    #[serde(default)]
    pub u0: U0Spec,
    #[serde(default = "default_schedule")]
    pub eps_schedule: Vec<f64>,
    #[serde(default)]
    pub newton: NewtonSettings<f64>,
    #[serde(default = "default_output", skip_serializing)]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub h: Option<f64>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub eps_schedule: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn load(path: &Path, o: &Overrides) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("{}: invalid configuration", path.display()))?;
        if let Some(h) = o.h {
            if cfg.domain.h().is_none() {
                bail!("{}: --h given but domain is a mesh file", path.display());
            }
            cfg.domain.set_h(h);
        }
        if let Some(out) = &o.output {
            cfg.output = out.clone();
        }
        if let Some(s) = o.seed {
            cfg.seed = s;
        }
        if o.workers.is_some() {
            cfg.workers = o.workers;
        }
        if let Some(e) = &o.eps_schedule {
            cfg.eps_schedule = e.clone();
        }
        cfg.validate().with_context(|| format!("{}: invalid configuration", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if let Some(h) = self.domain.h() {
            if !(h > 0.0 && h.is_finite()) {
                bail!("field `domain.h` must be positive (got {h})");
            }
        }
        validate_schedule(&self.eps_schedule).context("field `eps_schedule`")?;
        self.newton.validate().context("field `newton`")?;
        if self.workers == Some(0) {
            bail!("field `workers` must be at least 1");
        }
        Ok(())
    }
}
