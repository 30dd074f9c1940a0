//! Batch runner: configuration, per-seed runs, curriculum over `L`,
//! verification and the on-disk outputs.

mod config;

pub use config::{Algorithm, Env, EnvSpec, HarnessError, RunConfig};

use crate::episode::{GoalFrequencyLog, RunOutcome, StoppedBy};
use crate::linear::run_linear;
use crate::mdp::{ResettingPolicy, RngStream};
use crate::oracle::{verify_pac, PacVerdict};
use crate::tabular;
use config::read_json;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub sampler: String,
    pub horizon: usize,
    pub kappa: usize,
    pub tau: u64,
    pub stopped_by: StoppedBy,
    pub rule_met_at: Option<usize>,
    pub x: Vec<usize>,
    pub d: BTreeMap<usize, f64>,
    pub e: BTreeMap<usize, f64>,
    pub pac: Option<PacVerdict>,
    pub deviations: Vec<String>,
}

/// Result of one seed, in memory.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub summary: RunSummary,
    pub frequencies: GoalFrequencyLog,
    pub policies: BTreeMap<usize, ResettingPolicy>,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexEntry {
    pub config_hash: String,
    pub seed: u64,
    pub dir: String,
    pub status: String,
    pub kappa: Option<usize>,
    pub tau: Option<u64>,
    pub verdict: Option<bool>,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub results: Vec<SeedResult>,
    /// `(seed, message)` for every failed seed.
    pub failures: Vec<(u64, String)>,
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| HarnessError::Io { path: parent.into(), source })?;
    }
    std::fs::write(path, contents).map_err(|source| HarnessError::Io { path: path.into(), source })
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Run the configured algorithm once on `env`.
pub fn run_once(cfg: &RunConfig, env: &Env, rng: &mut RngStream) -> Result<RunOutcome, HarnessError> {
    let ada = cfg.adagoal();
    let out = match (cfg.algorithm, env) {
        (Algorithm::Tabular, _) => tabular::run(env.mdp(), &ada, &cfg.sampler, rng),
        (Algorithm::Linear, Env::Mixture(m)) => run_linear(m, &ada, cfg.linear_options(), &cfg.sampler, rng),
        (Algorithm::Linear, Env::Tabular(_)) => {
            return Err(HarnessError::Config("adagoal-ucrlvtr needs a mixture environment".into()))
        }
    };
    out.map_err(|e| HarnessError::Config(e.to_string()))
}

fn summarize(cfg: &RunConfig, env: &Env, hash: &str, seed: u64, out: &RunOutcome) -> RunSummary {
    let pac = cfg.verify.then(|| {
        let goals = cfg.adagoal().goals(env.mdp().num_states());
        verify_pac(env.mdp(), &goals, cfg.l, cfg.epsilon, &out.x, &out.policies)
    });
    RunSummary {
        config_hash: hash.to_string(),
        seed,
        algorithm: cfg.algorithm,
        sampler: cfg.sampler.to_string(),
        horizon: out.horizon,
        kappa: out.kappa,
        tau: out.tau,
        stopped_by: out.stopped_by,
        rule_met_at: out.rule_met_at,
        x: out.x.clone(),
        d: out.d.clone(),
        e: out.e.clone(),
        pac,
        deviations: cfg.deviations(),
    }
}

/// Run every seed, writing `summary.json`, `frequencies.csv` and
/// `policies.json` into `<output_dir>/<hash>/seed_<seed>/` and an aggregate
/// `index.json` into `<output_dir>`. Configuration errors abort before any
/// run; per-seed errors are collected.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport, HarnessError> {
    let env = cfg.env.build(Path::new("."))?;
    cfg.validate(&env)?;
    let hash = cfg.hash(&env);
    let root = cfg.output_dir.join(&hash);
    write(&root.join("config.json"), &to_json(cfg))?;
    write(&root.join("env.json"), &to_json(&env))?;
    let goals = cfg.adagoal().goals(env.mdp().num_states());

    let mut results = Vec::new();
    let mut failures = Vec::new();
    let mut index = Vec::new();
    for &seed in &cfg.seeds {
        let dir = root.join(format!("seed_{seed}"));
        let mut rng = RngStream::new(seed, 0);
        let res = run_once(cfg, &env, &mut rng).and_then(|out| {
            let summary = summarize(cfg, &env, &hash, seed, &out);
            let frequencies = out.frequencies(&goals, cfg.buckets);
            write(&dir.join("summary.json"), &to_json(&summary))?;
            write(&dir.join("frequencies.csv"), &frequencies.to_csv())?;
            write(&dir.join("policies.json"), &to_json(&out.policies))?;
            Ok(SeedResult { summary, frequencies, policies: out.policies, dir: dir.clone() })
        });
        let rel = format!("{hash}/seed_{seed}");
        match res {
            Ok(r) => {
                index.push(IndexEntry {
                    config_hash: hash.clone(),
                    seed,
                    dir: rel,
                    status: match r.summary.stopped_by {
                        StoppedBy::Rule => "rule".into(),
                        StoppedBy::Cap => "cap".into(),
                    },
                    kappa: Some(r.summary.kappa),
                    tau: Some(r.summary.tau),
                    verdict: r.summary.pac.as_ref().map(|p| p.verdict),
                });
                results.push(r);
            }
            Err(e) => {
                index.push(IndexEntry {
                    config_hash: hash.clone(),
                    seed,
                    dir: rel,
                    status: format!("error: {e}"),
                    kappa: None,
                    tau: None,
                    verdict: None,
                });
                failures.push((seed, e.to_string()));
            }
        }
    }
    update_index(&cfg.output_dir, &hash, index)?;
    Ok(ExperimentReport { results, failures })
}

// Merge entries into index.json, replacing earlier entries of the same hash.
fn update_index(dir: &Path, hash: &str, entries: Vec<IndexEntry>) -> Result<(), HarnessError> {
    let path = dir.join("index.json");
    let mut all: Vec<IndexEntry> = if path.exists() { read_json(&path).unwrap_or_default() } else { Vec::new() };
    all.retain(|e| e.config_hash != hash);
    all.extend(entries);
    all.sort_by(|a, b| (&a.config_hash, a.seed).cmp(&(&b.config_hash, b.seed)));
    write(&path, &to_json(&all))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    #[serde(rename = "L")]
    pub l: f64,
    pub horizon: usize,
    pub kappa: usize,
    pub tau: u64,
    pub stopped_by: StoppedBy,
    pub x: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumReport {
    pub seed: u64,
    pub f: u32,
    pub stages: Vec<StageSummary>,
    pub cumulative_tau: u64,
    pub final_x: Vec<usize>,
    pub aborted: Option<String>,
}

/// Successive tabular runs with `L = 2, 4, ..., 2^f`, each from scratch on
/// its own random stream (stage 1 shares the stream of a plain run). Stops
/// at the first stage that hits the cap.
pub fn run_curriculum(cfg: &RunConfig, f: u32) -> Result<Vec<CurriculumReport>, HarnessError> {
    if f < 1 {
        return Err(HarnessError::Config("curriculum exponent must be at least 1".into()));
    }
    let env = cfg.env.build(Path::new("."))?;
    let mut stage_cfg = cfg.clone();
    stage_cfg.algorithm = Algorithm::Tabular;
    stage_cfg.l = 2f64.powi(f as i32);
    stage_cfg.validate(&env)?;
    let hash = stage_cfg.hash(&env);
    let mut reports = Vec::new();
    for &seed in &cfg.seeds {
        let mut stages = Vec::new();
        let mut cumulative = 0;
        let mut aborted = None;
        for i in 1..=f {
            stage_cfg.l = 2f64.powi(i as i32);
            let mut rng = RngStream::new(seed, (i - 1) as u64);
            let out = run_once(&stage_cfg, &env, &mut rng)?;
            cumulative += out.tau;
            stages.push(StageSummary {
                l: stage_cfg.l,
                horizon: out.horizon,
                kappa: out.kappa,
                tau: out.tau,
                stopped_by: out.stopped_by,
                x: out.x.clone(),
            });
            if out.stopped_by == StoppedBy::Cap && !cfg.run_to_cap {
                aborted = Some(format!("stage L = {} hit the episode cap", stage_cfg.l));
                break;
            }
        }
        let final_x = if aborted.is_none() { stages.last().map(|s| s.x.clone()).unwrap_or_default() } else { vec![] };
        let report = CurriculumReport { seed, f, stages, cumulative_tau: cumulative, final_x, aborted };
        write(
            &cfg.output_dir.join(&hash).join(format!("curriculum_seed_{seed}.json")),
            &to_json(&report),
        )?;
        reports.push(report);
    }
    Ok(reports)
}

fn find_up(dir: &Path, name: &str) -> Option<PathBuf> {
    [dir.join(name), dir.parent()?.join(name)].into_iter().find(|p| p.exists())
}

/// Re-run the PAC check for a stored seed directory and write the verdict
/// back into its `summary.json`.
pub fn verify_run_dir(dir: &Path) -> Result<PacVerdict, HarnessError> {
    let summary_path = dir.join("summary.json");
    let mut summary: RunSummary = read_json(&summary_path)?;
    let policies_path = dir.join("policies.json");
    let policies: BTreeMap<usize, ResettingPolicy> = if policies_path.exists() {
        read_json(&policies_path)?
    } else {
        BTreeMap::new()
    };
    let missing = |n: &str| HarnessError::Config(format!("{n} not found next to {}", dir.display()));
    let cfg: RunConfig = read_json(&find_up(dir, "config.json").ok_or_else(|| missing("config.json"))?)?;
    let env: Env = read_json(&find_up(dir, "env.json").ok_or_else(|| missing("env.json"))?)?;
    let goals = cfg.adagoal().goals(env.mdp().num_states());
    let verdict = verify_pac(env.mdp(), &goals, cfg.l, cfg.epsilon, &summary.x, &policies);
    summary.pac = Some(verdict.clone());
    write(&summary_path, &to_json(&summary))?;
    Ok(verdict)
}
