use anyhow::Result;
use metricconf::ci::confidence_interval;
use metricconf::correl::{correlate, CorrelationSpec, Level};
use metricconf::hypo::{bonferroni_reject, run_test, TestMethod, TestResult, TiePolicy};
use metricconf::scores::ScoreMatrix;
use metricconf::sim::{coverage_simulation, power_simulation, proportions_z_test, PowerConfig};

use crate::config::{CiConfig, CompareConfig, Config, CorrConfig, CoverageConfig, Grouping, PowerRunConfig, TestConfig};
use crate::report::{
    CiRow, CorrRow, CoverageComparison, CoverageResults, CoverageRow, PairCell, PairwiseMatrix, Report, Results,
    TestRow,
};

/// Runs an analysis. The returned report embeds the config with every
/// default and the metric list filled in.
pub fn execute(mut config: Config) -> Result<Report> {
    let mut warnings = Vec::new();
    let results = match &mut config {
        Config::Corr(c) => corr(c)?,
        Config::Ci(c) => ci(c)?,
        Config::Test(c) => test(c, &mut warnings)?,
        Config::Compare(c) => compare(c, &mut warnings)?,
        Config::SimCoverage(c) => coverage(c)?,
        Config::SimPower(c) => power(c)?,
    };
    Ok(Report::new(config, warnings, results))
}

fn corr(c: &mut CorrConfig) -> Result<Results> {
    let set = c.data.load()?;
    let truth = set.get(&c.data.truth)?;
    let mut rows = Vec::new();
    for metric in &c.data.metrics {
        let x = set.get(metric)?;
        for &level in &c.levels {
            for &coefficient in &c.coefficients {
                let spec = CorrelationSpec {
                    level,
                    coefficient,
                    undefined: c.undefined,
                };
                let r = correlate(x, truth, spec)?;
                rows.push(CorrRow {
                    metric: metric.clone(),
                    level,
                    coefficient,
                    value: r.value,
                    skipped_inputs: r.skipped_inputs,
                });
            }
        }
    }
    Ok(Results::Corr(rows))
}

fn ci(c: &mut CiConfig) -> Result<Results> {
    let set = c.data.load()?;
    let truth = set.get(&c.data.truth)?;
    let mut rows = Vec::new();
    for metric in &c.data.metrics {
        let x = set.get(metric)?;
        for &level in &c.levels {
            let spec = CorrelationSpec::new(level, c.coefficient);
            let interval = confidence_interval(x, truth, c.method, spec, c.resamples, c.alpha, c.seed)?;
            rows.push(CiRow {
                metric: metric.clone(),
                level,
                coefficient: c.coefficient,
                interval,
            });
        }
    }
    Ok(Results::Ci(rows))
}

fn tie_warning(x: &str, y: &str, result: &TestResult) -> Option<String> {
    (result.method.perm_method().is_some() && result.delta == 0.0).then(|| {
        format!(
            "{x} vs {y}: observed difference is exactly 0, so every permutation ties it; \
             the p-value reflects the {} tie policy rather than evidence",
            match result.tie_policy.unwrap_or_default() {
                TiePolicy::Strict => "strict",
                TiePolicy::Inclusive => "inclusive",
            }
        )
    })
}

fn experimental_warning(level: Level, method: TestMethod) -> Option<String> {
    (method == TestMethod::Williams && level == Level::Summary)
        .then(|| "Williams' test on summary-level correlations is experimental".to_string())
}

fn test(c: &mut TestConfig, warnings: &mut Vec<String>) -> Result<Results> {
    if c.data.metrics.is_empty() {
        c.data.metrics = if c.x == c.y { vec![c.x.clone()] } else { vec![c.x.clone(), c.y.clone()] };
    }
    let set = c.data.load()?;
    let (x, y, z) = (set.get(&c.x)?, set.get(&c.y)?, set.get(&c.data.truth)?);
    let spec = CorrelationSpec::new(c.level, c.coefficient);
    let result = run_test(x, y, z, c.method, spec, c.resamples, c.seed, c.tie_policy)?;
    warnings.extend(experimental_warning(c.level, c.method));
    warnings.extend(tie_warning(&c.x, &c.y, &result));
    Ok(Results::Test(TestRow {
        x: c.x.clone(),
        y: c.y.clone(),
        r_xz: correlate(x, z, spec)?.require()?,
        r_yz: correlate(y, z, spec)?.require()?,
        significant: result.significant(c.alpha),
        result,
    }))
}

fn compare(c: &mut CompareConfig, warnings: &mut Vec<String>) -> Result<Results> {
    let set = c.data.load()?;
    let z = set.get(&c.data.truth)?;
    let metrics = c.data.metrics.clone();
    let n = metrics.len();
    if n < 2 {
        anyhow::bail!("compare needs at least two metrics, got {n}");
    }
    let matrices: Vec<&ScoreMatrix> = metrics.iter().map(|m| set.get(m)).collect::<Result<_, _>>()?;
    let spec = CorrelationSpec::new(c.level, c.coefficient);
    warnings.extend(experimental_warning(c.level, c.method));

    let mut results: Vec<(usize, usize, TestResult)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let r = run_test(matrices[i], matrices[j], z, c.method, spec, c.resamples, c.seed, c.tie_policy)?;
                warnings.extend(tie_warning(&metrics[i], &metrics[j], &r));
                results.push((i, j, r));
            }
        }
    }
    let p: Vec<f64> = results.iter().map(|(_, _, r)| r.p_value).collect();
    let groups: Vec<Vec<usize>> = match c.correct_by {
        Grouping::Metric => (0..n)
            .map(|i| (0..results.len()).filter(|&t| results[t].0 == i).collect())
            .collect(),
        Grouping::DatasetLevel => vec![(0..results.len()).collect()],
    };
    let decisions = bonferroni_reject(&p, c.alpha, &groups)?;
    let mut cells: Vec<Vec<Option<PairCell>>> = vec![vec![None; n]; n];
    for ((i, j, result), d) in results.into_iter().zip(decisions) {
        cells[i][j] = Some(PairCell {
            result,
            raw_significant: d.raw_significant,
            corrected_significant: d.corrected_significant,
            threshold: d.threshold,
        });
    }
    Ok(Results::Compare(PairwiseMatrix {
        metrics,
        method: c.method,
        correct_by: c.correct_by,
        cells,
    }))
}

fn coverage(c: &mut CoverageConfig) -> Result<Results> {
    let (x, z) = c.source.matrices()?;
    let mut rows = Vec::new();
    let mut comparisons = Vec::new();
    for &level in &c.levels {
        let spec = CorrelationSpec::new(level, c.coefficient);
        let first = rows.len();
        for &method in &c.methods {
            let r = coverage_simulation(&x, &z, method, spec, c.trials, c.alpha, c.resamples, c.seed)?;
            rows.push(CoverageRow {
                level,
                method: r.records.first().map_or(method, |t| t.interval.method),
                trials: r.trials,
                contained: r.contained,
                proportion: r.proportion,
                retries: r.retries,
                records: c.records.then_some(r.records),
            });
        }
        let level_rows = &rows[first..];
        for a in level_rows {
            for b in level_rows {
                if a.method != b.method {
                    comparisons.push(CoverageComparison {
                        level,
                        better: a.method,
                        worse: b.method,
                        p_value: proportions_z_test(a.contained, a.trials, b.contained, b.trials)?,
                    });
                }
            }
        }
    }
    Ok(Results::SimCoverage(CoverageResults { rows, comparisons }))
}

fn power(c: &mut PowerRunConfig) -> Result<Results> {
    let (x, z) = c.source.matrices()?;
    let cfg = PowerConfig {
        levels: c.degradation.clone(),
        methods: c.methods.clone(),
        spec: CorrelationSpec::new(c.level, c.coefficient),
        trials: c.trials,
        alpha: c.alpha,
        resamples: c.resamples,
        seed: c.seed,
        tie_policy: c.tie_policy,
    };
    Ok(Results::SimPower(power_simulation(&x, &z, &cfg)?))
}
