use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use metricconf::ci::ConfidenceInterval;
use metricconf::correl::{Coefficient, Level};
use metricconf::hypo::{TestMethod, TestResult};
use metricconf::sim::{CoverageTrial, PowerCurve};
use serde::{Deserialize, Serialize};

use crate::args::PlotKind;
use crate::config::{Config, Grouping};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub config: Config,
    pub warnings: Vec<String>,
    pub results: Results,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Results {
    Corr(Vec<CorrRow>),
    Ci(Vec<CiRow>),
    Test(TestRow),
    Compare(PairwiseMatrix),
    SimCoverage(CoverageResults),
    SimPower(Vec<PowerCurve>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrRow {
    pub metric: String,
    pub level: Level,
    pub coefficient: Coefficient,
    pub value: Option<f64>,
    pub skipped_inputs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiRow {
    pub metric: String,
    pub level: Level,
    pub coefficient: Coefficient,
    pub interval: ConfidenceInterval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub x: String,
    pub y: String,
    pub r_xz: f64,
    pub r_yz: f64,
    pub result: TestResult,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCell {
    pub result: TestResult,
    pub raw_significant: bool,
    pub corrected_significant: bool,
    pub threshold: f64,
}

/// Row metric X against column metric Y; the diagonal is `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub metrics: Vec<String>,
    pub method: TestMethod,
    pub correct_by: Grouping,
    pub cells: Vec<Vec<Option<PairCell>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub level: Level,
    pub method: metricconf::ci::CiMethod,
    pub trials: usize,
    pub contained: usize,
    pub proportion: f64,
    pub retries: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<CoverageTrial>>,
}

/// One-tailed test that `better` covers more often than `worse`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageComparison {
    pub level: Level,
    pub better: metricconf::ci::CiMethod,
    pub worse: metricconf::ci::CiMethod,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageResults {
    pub rows: Vec<CoverageRow>,
    pub comparisons: Vec<CoverageComparison>,
}

impl Report {
    pub fn new(config: Config, warnings: Vec<String>, results: Results) -> Self {
        Report {
            tool: "metricconf".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config,
            warnings,
            results,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Report> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("{} is not a metricconf report", path.display()))
    }

    /// Plot kinds this report can produce, with their default file names.
    pub fn plot_kinds(&self) -> &'static [(PlotKind, &'static str)] {
        match self.results {
            Results::Ci(_) => &[(PlotKind::Forest, "forest.csv"), (PlotKind::ForestSvg, "forest.svg")],
            Results::Compare(_) => &[
                (PlotKind::Pairwise, "pairwise.csv"),
                (PlotKind::PairwiseFlags, "pairwise_flags.csv"),
            ],
            Results::SimPower(_) => &[(PlotKind::PowerCurve, "power.csv")],
            _ => &[],
        }
    }

    pub fn plot(&self, kind: PlotKind) -> Result<String> {
        match (kind, &self.results) {
            (PlotKind::Forest, Results::Ci(rows)) => forest_csv(rows),
            (PlotKind::ForestSvg, Results::Ci(rows)) => Ok(forest_svg(rows)),
            (PlotKind::Pairwise, Results::Compare(m)) => pairwise_csv(m, |c| num(c.result.p_value)),
            (PlotKind::PairwiseFlags, Results::Compare(m)) => pairwise_csv(m, |c| {
                if c.corrected_significant {
                    "corrected".into()
                } else if c.raw_significant {
                    "raw".into()
                } else {
                    "ns".into()
                }
            }),
            (PlotKind::PowerCurve, Results::SimPower(curves)) => power_csv(curves),
            (kind, _) => bail!(
                "report has no data for plot kind {}",
                kind.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
            ),
        }
    }

    /// Writes report.json and every plot file the report supports.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<String>> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let mut written = Vec::new();
        let path = dir.join("report.json");
        fs::write(&path, self.to_json()?).with_context(|| format!("cannot write {}", path.display()))?;
        written.push(path.display().to_string());
        for &(kind, name) in self.plot_kinds() {
            let path = dir.join(name);
            fs::write(&path, self.plot(kind)?).with_context(|| format!("cannot write {}", path.display()))?;
            written.push(path.display().to_string());
        }
        Ok(written)
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)?)
}

fn forest_csv(rows: &[CiRow]) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(["metric", "level", "point", "lower", "upper"])?;
    for r in rows {
        let level = r.level.to_string();
        let (p, lo, hi) = (num(r.interval.point), num(r.interval.lower), num(r.interval.upper));
        w.write_record([r.metric.as_str(), level.as_str(), &p, &lo, &hi])?;
    }
    finish(w)
}

fn pairwise_csv(m: &PairwiseMatrix, cell: impl Fn(&PairCell) -> String) -> Result<String> {
    let mut w = csv_writer();
    let mut header = vec![String::new()];
    header.extend(m.metrics.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in m.metrics.iter().zip(&m.cells) {
        let mut record = vec![name.clone()];
        record.extend(row.iter().map(|c| c.as_ref().map(&cell).unwrap_or_default()));
        w.write_record(&record)?;
    }
    finish(w)
}

fn power_csv(curves: &[PowerCurve]) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(["k_percent", "method", "power"])?;
    for c in curves {
        let method = c.method.to_string();
        for (k, p) in c.levels.iter().zip(&c.power) {
            w.write_record([num(*k).as_str(), method.as_str(), num(*p).as_str()])?;
        }
    }
    finish(w)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Intervals on a fixed [-1, 1] axis, one row per metric and level.
fn forest_svg(rows: &[CiRow]) -> String {
    const LEFT: f64 = 220.0;
    const RIGHT: f64 = 620.0;
    const ROW: f64 = 24.0;
    const TOP: f64 = 20.0;
    let x = |r: f64| LEFT + (r.clamp(-1.0, 1.0) + 1.0) / 2.0 * (RIGHT - LEFT);
    let height = TOP * 2.0 + ROW * rows.len() as f64 + 30.0;
    let axis_y = TOP + ROW * rows.len() as f64 + 10.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="660" height="{height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r##"<line x1="{0:.2}" y1="{TOP:.2}" x2="{0:.2}" y2="{axis_y:.2}" stroke="#bbb" stroke-dasharray="4 3"/>"##,
        x(0.0)
    );
    for (i, r) in rows.iter().enumerate() {
        let y = TOP + ROW * (i as f64 + 0.5);
        let ci = &r.interval;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{} ({})</text>"#,
            LEFT - 10.0,
            y + 4.0,
            escape(&r.metric),
            r.level
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black" stroke-width="2"/>"#,
            x(ci.lower),
            x(ci.upper)
        );
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{y:.2}" r="4" fill="black"/>"#, x(ci.point));
    }
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.2}" y1="{axis_y:.2}" x2="{RIGHT:.2}" y2="{axis_y:.2}" stroke="black"/>"#
    );
    for tick in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let tx = x(tick);
        let _ = writeln!(
            s,
            r#"<line x1="{tx:.2}" y1="{axis_y:.2}" x2="{tx:.2}" y2="{:.2}" stroke="black"/><text x="{tx:.2}" y="{:.2}" text-anchor="middle">{tick}</text>"#,
            axis_y + 5.0,
            axis_y + 18.0
        );
    }
    s.push_str("</svg>\n");
    s
}
