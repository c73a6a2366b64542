use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use metricconf::ci::CiMethod;
use metricconf::correl::{Coefficient, Level, UndefinedPolicy};
use metricconf::hypo::{TestMethod, TiePolicy};
use metricconf::scores::{Format, MissingPolicy};

#[derive(Parser, Debug)]
#[command(
    name = "metricconf",
    version,
    about = "Confidence intervals and significance tests for correlations between evaluation metrics and human judgments",
    after_help = "\
Examples:
  metricconf corr --scores scores.jsonl --truth responsiveness
  metricconf ci --scores scores.jsonl --truth responsiveness --ci-method boot-both --seed 42 --out report/
  metricconf compare --scores scores.jsonl --truth responsiveness --test perm-both --correct-by metric
  metricconf sim-power --levels 0,25,50,75,100 --trials 500 --out power/
  metricconf replay report/report.json --out rerun/"
)]
pub struct Cli {
    /// Worker threads for resampling; results do not depend on it
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Correlation of every metric with the ground truth at both levels and all coefficients
    Corr(CorrArgs),
    /// Confidence interval of each metric's correlation with the ground truth
    Ci(CiArgs),
    /// Test whether metric X correlates better with the ground truth than metric Y
    Test(TestArgs),
    /// Pairwise tests over all metrics with Bonferroni correction
    Compare(CompareArgs),
    /// Held-out coverage of confidence intervals
    SimCoverage(CoverageArgs),
    /// Power of the tests against degraded copies of a metric
    SimPower(PowerArgs),
    /// Re-run the analysis embedded in a report
    Replay(ReplayArgs),
    /// Write plot data from a saved report
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Score file (JSONL or CSV with header metric,system_id,input_id,score)
    #[arg(long)]
    pub scores: PathBuf,

    /// File format; inferred from the extension when omitted
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,

    /// Metric holding the ground-truth judgments
    #[arg(long, default_value = "truth")]
    pub truth: String,

    /// Metrics to analyse (comma-separated); all non-truth metrics when omitted
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,

    /// Handling of systems/inputs missing a score
    #[arg(long, value_enum, default_value_t = MissingArg::Strict)]
    pub missing: MissingArg,
}

#[derive(Args, Debug)]
pub struct OutArgs {
    /// Directory for report.json and plot data; the report is printed otherwise
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ResampleArgs {
    /// Significance level
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Bootstrap or permutation resamples
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,

    /// Seed for all random draws
    #[arg(long, env = "METRICCONF_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct CorrArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Restrict to one level
    #[arg(long, value_enum)]
    pub level: Option<LevelArg>,

    /// Restrict to one coefficient
    #[arg(long, value_enum)]
    pub coef: Option<CoefArg>,

    /// Summary-level handling of inputs with an undefined correlation
    #[arg(long, value_enum, default_value_t = UndefinedArg::Skip)]
    pub undefined: UndefinedArg,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct CiArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Restrict to one level
    #[arg(long, value_enum)]
    pub level: Option<LevelArg>,

    #[arg(long, value_enum, default_value_t = CoefArg::Pearson)]
    pub coef: CoefArg,

    #[arg(long, value_enum, default_value_t = CiMethodArg::BootBoth)]
    pub ci_method: CiMethodArg,

    #[command(flatten)]
    pub resample: ResampleArgs,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Metric hypothesised to correlate better
    #[arg(long)]
    pub x: String,

    /// Metric it is compared against
    #[arg(long)]
    pub y: String,

    #[arg(long, value_enum, default_value_t = LevelArg::Sum)]
    pub level: LevelArg,

    #[arg(long, value_enum, default_value_t = CoefArg::Pearson)]
    pub coef: CoefArg,

    #[arg(long = "test", value_enum, default_value_t = TestArg::PermBoth)]
    pub test: TestArg,

    #[arg(long, value_enum, default_value_t = TieArg::Strict)]
    pub tie_policy: TieArg,

    #[command(flatten)]
    pub resample: ResampleArgs,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, value_enum, default_value_t = LevelArg::Sum)]
    pub level: LevelArg,

    #[arg(long, value_enum, default_value_t = CoefArg::Pearson)]
    pub coef: CoefArg,

    #[arg(long = "test", value_enum, default_value_t = TestArg::PermBoth)]
    pub test: TestArg,

    #[arg(long, value_enum, default_value_t = TieArg::Strict)]
    pub tie_policy: TieArg,

    /// Bonferroni family: each row metric separately, or all tests of the run together
    #[arg(long, value_enum, default_value_t = GroupingArg::Metric)]
    pub correct_by: GroupingArg,

    #[command(flatten)]
    pub resample: ResampleArgs,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct WorldArgs {
    /// Score file to take the metric and ground truth from instead of a synthetic world
    #[arg(long, requires = "metric")]
    pub scores: Option<PathBuf>,

    #[arg(long, value_enum, requires = "scores")]
    pub format: Option<FormatArg>,

    #[arg(long, default_value = "truth", requires = "scores")]
    pub truth: String,

    /// Metric to evaluate from the score file
    #[arg(long, requires = "scores")]
    pub metric: Option<String>,

    #[arg(long, value_enum, default_value_t = MissingArg::Strict, requires = "scores")]
    pub missing: MissingArg,

    /// Systems in the synthetic world
    #[arg(long, default_value_t = 20, conflicts_with = "scores")]
    pub systems: usize,

    /// Inputs in the synthetic world
    #[arg(long, default_value_t = 20, conflicts_with = "scores")]
    pub inputs: usize,

    #[arg(long, default_value_t = 1.0, conflicts_with = "scores")]
    pub system_sd: f64,

    #[arg(long, default_value_t = 1.0, conflicts_with = "scores")]
    pub input_sd: f64,

    #[arg(long, default_value_t = 1.0, conflicts_with = "scores")]
    pub noise_sd: f64,

    /// Weight of the ground truth in the synthetic metric
    #[arg(long, default_value_t = 0.5, conflicts_with = "scores")]
    pub lambda: f64,

    /// Seed of the synthetic world
    #[arg(long, default_value_t = 1, conflicts_with = "scores")]
    pub world_seed: u64,
}

#[derive(Args, Debug)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub world: WorldArgs,

    /// Restrict to one level
    #[arg(long, value_enum)]
    pub level: Option<LevelArg>,

    #[arg(long, value_enum, default_value_t = CoefArg::Pearson)]
    pub coef: CoefArg,

    /// Interval methods (comma-separated); all when omitted
    #[arg(long, value_enum, value_delimiter = ',')]
    pub ci_method: Vec<CiMethodArg>,

    #[arg(long, default_value_t = 1000)]
    pub trials: usize,

    /// Include every trial's interval in the report
    #[arg(long)]
    pub records: bool,

    #[command(flatten)]
    pub resample: ResampleArgs,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct PowerArgs {
    #[command(flatten)]
    pub world: WorldArgs,

    #[arg(long, value_enum, default_value_t = LevelArg::Sum)]
    pub level: LevelArg,

    #[arg(long, value_enum, default_value_t = CoefArg::Pearson)]
    pub coef: CoefArg,

    /// Tests (comma-separated)
    #[arg(long = "test", value_enum, value_delimiter = ',', default_values_t = [TestArg::PermBoth, TestArg::PairedBoot, TestArg::Williams])]
    pub tests: Vec<TestArg>,

    /// Degradation levels in percent (comma-separated)
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 25.0, 50.0, 75.0, 100.0])]
    pub levels: Vec<f64>,

    #[arg(long, default_value_t = 1000)]
    pub trials: usize,

    #[arg(long, value_enum, default_value_t = TieArg::Inclusive)]
    pub tie_policy: TieArg,

    #[command(flatten)]
    pub resample: ResampleArgs,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    /// A report.json written by any analysis command
    pub report: PathBuf,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// A report.json written by any analysis command
    pub report: PathBuf,

    #[arg(long, value_enum)]
    pub kind: PlotKind,

    /// Output file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => Format::Jsonl,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MissingArg {
    Strict,
    DropIncomplete,
}

impl From<MissingArg> for MissingPolicy {
    fn from(m: MissingArg) -> Self {
        match m {
            MissingArg::Strict => MissingPolicy::Strict,
            MissingArg::DropIncomplete => MissingPolicy::DropIncomplete,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LevelArg {
    Sys,
    Sum,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::Sys => Level::System,
            LevelArg::Sum => Level::Summary,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CoefArg {
    Pearson,
    Spearman,
    Kendall,
}

impl From<CoefArg> for Coefficient {
    fn from(c: CoefArg) -> Self {
        match c {
            CoefArg::Pearson => Coefficient::Pearson,
            CoefArg::Spearman => Coefficient::Spearman,
            CoefArg::Kendall => Coefficient::Kendall,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum UndefinedArg {
    Skip,
    Propagate,
}

impl From<UndefinedArg> for UndefinedPolicy {
    fn from(u: UndefinedArg) -> Self {
        match u {
            UndefinedArg::Skip => UndefinedPolicy::Skip,
            UndefinedArg::Propagate => UndefinedPolicy::Propagate,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CiMethodArg {
    Fisher,
    BootSystems,
    BootInputs,
    BootBoth,
}

impl CiMethodArg {
    pub const ALL: [CiMethodArg; 4] = [
        CiMethodArg::Fisher,
        CiMethodArg::BootSystems,
        CiMethodArg::BootInputs,
        CiMethodArg::BootBoth,
    ];
}

impl From<CiMethodArg> for CiMethod {
    fn from(m: CiMethodArg) -> Self {
        match m {
            CiMethodArg::Fisher => CiMethod::Fisher,
            CiMethodArg::BootSystems => CiMethod::BootSystems,
            CiMethodArg::BootInputs => CiMethod::BootInputs,
            CiMethodArg::BootBoth => CiMethod::BootBoth,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TestArg {
    Williams,
    PermSystems,
    PermInputs,
    PermBoth,
    /// Same as paired-boot-both
    PairedBoot,
    PairedBootSystems,
    PairedBootInputs,
    PairedBootBoth,
}

impl From<TestArg> for TestMethod {
    fn from(t: TestArg) -> Self {
        match t {
            TestArg::Williams => TestMethod::Williams,
            TestArg::PermSystems => TestMethod::PermSystems,
            TestArg::PermInputs => TestMethod::PermInputs,
            TestArg::PermBoth => TestMethod::PermBoth,
            TestArg::PairedBoot | TestArg::PairedBootBoth => TestMethod::PairedBootBoth,
            TestArg::PairedBootSystems => TestMethod::PairedBootSystems,
            TestArg::PairedBootInputs => TestMethod::PairedBootInputs,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TieArg {
    Strict,
    Inclusive,
}

impl From<TieArg> for TiePolicy {
    fn from(t: TieArg) -> Self {
        match t {
            TieArg::Strict => TiePolicy::Strict,
            TieArg::Inclusive => TiePolicy::Inclusive,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GroupingArg {
    /// One family per row metric (m = number of metrics - 1)
    Metric,
    /// One family for every test of the run (one dataset and level)
    DatasetLevel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// metric,level,point,lower,upper
    Forest,
    /// Static SVG of the forest data
    ForestSvg,
    /// Square matrix of p-values
    Pairwise,
    /// Square matrix of significance flags
    PairwiseFlags,
    /// k_percent,method,power
    PowerCurve,
}
