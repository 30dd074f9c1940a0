use crate::envs::{
    build_bpi_ssp_hard, build_grid_mixture, build_hard_reset_free, build_two_room_grid, BpiSspParams, EnvError,
    GridParams, MixtureParams, ResetFreeParams,
};
use crate::linear::{LinearMixtureModel, LinearOptions};
use crate::mdp::TabularMdp;
use crate::samplers::GoalSampler;
use crate::tabular::AdaGoalConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("io on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json in {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.into(), source })
}

/// Where the environment comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvSpec {
    Grid {
        #[serde(default)]
        params: GridParams,
    },
    ResetFree {
        #[serde(default)]
        params: ResetFreeParams,
    },
    BpiSsp {
        #[serde(default)]
        params: BpiSspParams,
    },
    Mixture {
        #[serde(default)]
        params: MixtureParams,
    },
    /// JSON file holding either an MDP or a mixture.
    File { path: PathBuf },
    Inline { mdp: TabularMdp },
}

/// A built environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Env {
    Mixture(LinearMixtureModel),
    Tabular(TabularMdp),
}

impl Env {
    pub fn mdp(&self) -> &TabularMdp {
        match self {
            Env::Tabular(m) => m,
            Env::Mixture(m) => &m.mdp,
        }
    }
}

impl EnvSpec {
    /// Build the environment; relative file paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<Env, HarnessError> {
        Ok(match self {
            EnvSpec::Grid { params } => Env::Tabular(build_two_room_grid(params)?.mdp),
            EnvSpec::ResetFree { params } => Env::Tabular(build_hard_reset_free(params)?),
            EnvSpec::BpiSsp { params } => Env::Tabular(build_bpi_ssp_hard(params)?),
            EnvSpec::Mixture { params } => Env::Mixture(build_grid_mixture(params)?),
            EnvSpec::Inline { mdp } => Env::Tabular(mdp.clone()),
            EnvSpec::File { path } => {
                let p = if path.is_absolute() { path.clone() } else { base.join(path) };
                read_json::<Env>(&p)?
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "adagoal-ucbvi")]
    Tabular,
    #[serde(rename = "adagoal-ucrlvtr")]
    Linear,
}

fn default_delta() -> f64 {
    0.1
}
fn default_max_episodes() -> usize {
    100_000
}
fn default_period() -> usize {
    1
}
fn default_scale() -> f64 {
    1.0
}
fn default_buckets() -> usize {
    3
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_output() -> PathBuf {
    PathBuf::from("runs")
}
fn default_sampler() -> GoalSampler {
    GoalSampler::AdaGoal
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvSpec,
    pub algorithm: Algorithm,
    #[serde(default = "default_sampler")]
    pub sampler: GoalSampler,
    #[serde(rename = "L")]
    pub l: f64,
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub simplified_bonuses: bool,
    #[serde(default = "default_max_episodes")]
    pub max_episodes: usize,
    #[serde(default)]
    pub run_to_cap: bool,
    #[serde(default)]
    pub goal_space: Option<Vec<usize>>,
    #[serde(default = "default_period")]
    pub table_update_period: usize,
    #[serde(default = "default_scale")]
    pub confidence_scale: f64,
    #[serde(default = "default_buckets")]
    pub buckets: usize,
    #[serde(default)]
    pub verify: bool,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let mut cfg: RunConfig = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let EnvSpec::File { path: p } = &mut cfg.env {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn adagoal(&self) -> AdaGoalConfig {
        AdaGoalConfig {
            l: self.l,
            epsilon: self.epsilon,
            delta: self.delta,
            horizon: self.horizon,
            goal_space: self.goal_space.clone(),
            max_episodes: self.max_episodes,
            table_update_period: self.table_update_period,
            simplified_bonuses: self.simplified_bonuses,
            run_to_cap: self.run_to_cap,
            buckets: self.buckets,
        }
    }

    pub fn linear_options(&self) -> LinearOptions {
        LinearOptions { confidence_scale: self.confidence_scale }
    }

    /// Schema checks that need the built environment.
    pub fn validate(&self, env: &Env) -> Result<(), HarnessError> {
        self.adagoal()
            .validate(env.mdp().num_states())
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("no seeds".into()));
        }
        if self.buckets == 0 {
            return Err(HarnessError::Config("buckets must be positive".into()));
        }
        if self.max_episodes == 0 {
            return Err(HarnessError::Config("max_episodes must be positive".into()));
        }
        if env.mdp().reset_action().is_none() {
            return Err(HarnessError::Config("environment has no reset action".into()));
        }
        if self.algorithm == Algorithm::Linear && !matches!(env, Env::Mixture(_)) {
            return Err(HarnessError::Config("adagoal-ucrlvtr needs a mixture environment".into()));
        }
        if !(self.confidence_scale > 0.0) {
            return Err(HarnessError::Config("confidence_scale must be positive".into()));
        }
        Ok(())
    }

    /// Departures from the default algorithm recorded with every summary.
    pub fn deviations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(h) = self.horizon {
            out.push(format!("horizon overridden to {h}"));
        }
        if self.simplified_bonuses && self.algorithm == Algorithm::Tabular {
            out.push("simplified bonuses".into());
        }
        if self.table_update_period > 1 {
            out.push(format!("tables rebuilt every {} episodes", self.table_update_period));
        }
        if self.confidence_scale != 1.0 && self.algorithm == Algorithm::Linear {
            out.push(format!("confidence radius scaled by {}", self.confidence_scale));
        }
        if self.run_to_cap {
            out.push("ran to the episode cap regardless of the stopping rule".into());
        }
        out
    }

    /// Hash of every field that changes results: seeds and output location
    /// are excluded, and the environment enters through its built form.
    pub fn hash(&self, env: &Env) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("seeds");
            obj.remove("output_dir");
            obj.insert("env".into(), serde_json::to_value(env).expect("env serializes"));
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
