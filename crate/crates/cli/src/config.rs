//! Fully resolved run configurations. Every report embeds one, and replaying
//! it reproduces the report byte for byte.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::Context;
use metricconf::ci::{CiMethod, MIN_RESAMPLES};
use metricconf::correl::{Coefficient, Level, UndefinedPolicy};
use metricconf::hypo::{TestMethod, TiePolicy};
use metricconf::scores::{build_score_set, parse_scores, Format, MissingPolicy, ScoreMatrix, ScoreSet};
use metricconf::sim::SyntheticWorld;
use serde::{Deserialize, Serialize};

use crate::args::{self, CiMethodArg, DataArgs, WorldArgs};
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Config {
    Corr(CorrConfig),
    Ci(CiConfig),
    Test(TestConfig),
    Compare(CompareConfig),
    SimCoverage(CoverageConfig),
    SimPower(PowerRunConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub scores: PathBuf,
    pub format: Format,
    pub truth: String,
    /// Analysed metrics; filled in from the file when left empty.
    pub metrics: Vec<String>,
    pub missing: MissingPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrConfig {
    pub data: DataConfig,
    pub levels: Vec<Level>,
    pub coefficients: Vec<Coefficient>,
    pub undefined: UndefinedPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiConfig {
    pub data: DataConfig,
    pub levels: Vec<Level>,
    pub coefficient: Coefficient,
    pub method: CiMethod,
    pub alpha: f64,
    pub resamples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub data: DataConfig,
    pub x: String,
    pub y: String,
    pub level: Level,
    pub coefficient: Coefficient,
    pub method: TestMethod,
    pub tie_policy: TiePolicy,
    pub alpha: f64,
    pub resamples: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    Metric,
    DatasetLevel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub data: DataConfig,
    pub level: Level,
    pub coefficient: Coefficient,
    pub method: TestMethod,
    pub tie_policy: TiePolicy,
    pub correct_by: Grouping,
    pub alpha: f64,
    pub resamples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Scores { data: DataConfig, metric: String },
    World(SyntheticWorld),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub source: Source,
    pub levels: Vec<Level>,
    pub coefficient: Coefficient,
    pub methods: Vec<CiMethod>,
    pub trials: usize,
    pub records: bool,
    pub alpha: f64,
    pub resamples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerRunConfig {
    pub source: Source,
    pub level: Level,
    pub coefficient: Coefficient,
    pub methods: Vec<TestMethod>,
    pub degradation: Vec<f64>,
    pub trials: usize,
    pub tie_policy: TiePolicy,
    pub alpha: f64,
    pub resamples: usize,
    pub seed: u64,
}

fn levels(level: Option<args::LevelArg>) -> Vec<Level> {
    match level {
        Some(l) => vec![l.into()],
        None => Level::ALL.to_vec(),
    }
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--alpha must be in (0, 1), got {alpha}")))
    }
}

fn check_resamples(k: usize) -> Result<(), CliError> {
    if k >= MIN_RESAMPLES {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--resamples must be at least {MIN_RESAMPLES}, got {k}")))
    }
}

fn check_trials(trials: usize) -> Result<(), CliError> {
    if trials >= 1 {
        Ok(())
    } else {
        Err(CliError::Usage("--trials must be at least 1".into()))
    }
}

fn data_config(a: &DataArgs) -> DataConfig {
    DataConfig {
        format: a.format.map(Into::into).unwrap_or_else(|| Format::from_path(&a.scores)),
        scores: a.scores.clone(),
        truth: a.truth.clone(),
        metrics: a.metrics.clone(),
        missing: a.missing.into(),
    }
}

fn source(w: &WorldArgs) -> Result<Source, CliError> {
    match (&w.scores, &w.metric) {
        (Some(path), Some(metric)) => Ok(Source::Scores {
            data: DataConfig {
                format: w.format.map(Into::into).unwrap_or_else(|| Format::from_path(path)),
                scores: path.clone(),
                truth: w.truth.clone(),
                metrics: vec![metric.clone()],
                missing: w.missing.into(),
            },
            metric: metric.clone(),
        }),
        (None, None) => {
            if !(0.0..=1.0).contains(&w.lambda) {
                return Err(CliError::Usage(format!("--lambda must be in [0, 1], got {}", w.lambda)));
            }
            Ok(Source::World(SyntheticWorld {
                n_systems: w.systems,
                n_inputs: w.inputs,
                system_sd: w.system_sd,
                input_sd: w.input_sd,
                noise_sd: w.noise_sd,
                lambda: w.lambda,
                seed: w.world_seed,
            }))
        }
        _ => Err(CliError::Usage("--scores and --metric must be given together".into())),
    }
}

impl Config {
    pub fn from_args(command: &args::Command) -> Result<Config, CliError> {
        use args::Command::*;
        Ok(match command {
            Corr(a) => Config::Corr(CorrConfig {
                data: data_config(&a.data),
                levels: levels(a.level),
                coefficients: match a.coef {
                    Some(c) => vec![c.into()],
                    None => Coefficient::ALL.to_vec(),
                },
                undefined: a.undefined.into(),
            }),
            Ci(a) => {
                check_alpha(a.resample.alpha)?;
                if a.ci_method != CiMethodArg::Fisher {
                    check_resamples(a.resample.resamples)?;
                }
                Config::Ci(CiConfig {
                    data: data_config(&a.data),
                    levels: levels(a.level),
                    coefficient: a.coef.into(),
                    method: a.ci_method.into(),
                    alpha: a.resample.alpha,
                    resamples: a.resample.resamples,
                    seed: a.resample.seed,
                })
            }
            Test(a) => {
                let method: TestMethod = a.test.into();
                check_alpha(a.resample.alpha)?;
                if method.is_randomized() {
                    check_resamples(a.resample.resamples)?;
                }
                Config::Test(TestConfig {
                    data: data_config(&a.data),
                    x: a.x.clone(),
                    y: a.y.clone(),
                    level: a.level.into(),
                    coefficient: a.coef.into(),
                    method,
                    tie_policy: a.tie_policy.into(),
                    alpha: a.resample.alpha,
                    resamples: a.resample.resamples,
                    seed: a.resample.seed,
                })
            }
            Compare(a) => {
                let method: TestMethod = a.test.into();
                check_alpha(a.resample.alpha)?;
                if method.is_randomized() {
                    check_resamples(a.resample.resamples)?;
                }
                Config::Compare(CompareConfig {
                    data: data_config(&a.data),
                    level: a.level.into(),
                    coefficient: a.coef.into(),
                    method,
                    tie_policy: a.tie_policy.into(),
                    correct_by: match a.correct_by {
                        args::GroupingArg::Metric => Grouping::Metric,
                        args::GroupingArg::DatasetLevel => Grouping::DatasetLevel,
                    },
                    alpha: a.resample.alpha,
                    resamples: a.resample.resamples,
                    seed: a.resample.seed,
                })
            }
            SimCoverage(a) => {
                check_alpha(a.resample.alpha)?;
                check_trials(a.trials)?;
                let methods: Vec<CiMethodArg> = if a.ci_method.is_empty() {
                    CiMethodArg::ALL.to_vec()
                } else {
                    a.ci_method.clone()
                };
                if methods.iter().any(|&m| m != CiMethodArg::Fisher) {
                    check_resamples(a.resample.resamples)?;
                }
                Config::SimCoverage(CoverageConfig {
                    source: source(&a.world)?,
                    levels: levels(a.level),
                    coefficient: a.coef.into(),
                    methods: methods.into_iter().map(Into::into).collect(),
                    trials: a.trials,
                    records: a.records,
                    alpha: a.resample.alpha,
                    resamples: a.resample.resamples,
                    seed: a.resample.seed,
                })
            }
            SimPower(a) => {
                check_alpha(a.resample.alpha)?;
                check_trials(a.trials)?;
                let mut methods: Vec<TestMethod> = Vec::new();
                for t in &a.tests {
                    let m = TestMethod::from(*t);
                    if !methods.contains(&m) {
                        methods.push(m);
                    }
                }
                if methods.iter().any(|m| m.is_randomized()) {
                    check_resamples(a.resample.resamples)?;
                }
                if a.levels.is_empty() || a.levels.iter().any(|l| !(0.0..=100.0).contains(l)) {
                    return Err(CliError::Usage("--levels must be percentages in [0, 100]".into()));
                }
                Config::SimPower(PowerRunConfig {
                    source: source(&a.world)?,
                    level: a.level.into(),
                    coefficient: a.coef.into(),
                    methods,
                    degradation: a.levels.clone(),
                    trials: a.trials,
                    tie_policy: a.tie_policy.into(),
                    alpha: a.resample.alpha,
                    resamples: a.resample.resamples,
                    seed: a.resample.seed,
                })
            }
            Replay(_) | Plot(_) => unreachable!("not an analysis command"),
        })
    }
}

impl DataConfig {
    /// Reads the score file, fills in the metric list and aligns the
    /// metrics with the ground truth.
    pub fn load(&mut self) -> anyhow::Result<ScoreSet> {
        let file = File::open(&self.scores).with_context(|| format!("cannot open {}", self.scores.display()))?;
        let records = parse_scores(BufReader::new(file), self.format)
            .with_context(|| format!("cannot parse {}", self.scores.display()))?;
        let present: BTreeSet<&str> = records.iter().map(|r| r.metric_name.as_str()).collect();
        if !present.contains(self.truth.as_str()) {
            anyhow::bail!("ground-truth metric {:?} not found in {}", self.truth, self.scores.display());
        }
        if self.metrics.is_empty() {
            self.metrics = present
                .iter()
                .filter(|m| **m != self.truth)
                .map(|m| m.to_string())
                .collect();
            if self.metrics.is_empty() {
                anyhow::bail!("{} holds no metric besides the ground truth", self.scores.display());
            }
        }
        let mut wanted = self.metrics.clone();
        if !wanted.contains(&self.truth) {
            wanted.push(self.truth.clone());
        }
        Ok(build_score_set(&records, &wanted, self.missing)?)
    }
}

impl Source {
    /// The evaluated metric and the ground truth.
    pub fn matrices(&mut self) -> anyhow::Result<(ScoreMatrix, ScoreMatrix)> {
        match self {
            Source::Scores { data, metric } => {
                let set = data.load()?;
                Ok((set.get(metric)?.clone(), set.get(&data.truth)?.clone()))
            }
            Source::World(w) => Ok(metricconf::sim::generate_world(w)?),
        }
    }
}
