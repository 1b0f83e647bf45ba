//! CSV emission for grid results, the indicator grid, per-replication means,
//! timeline quantiles, and rule-base dumps.
//!
//! All CSVs are UTF-8 with LF line endings, '.' decimal separator, and floats
//! printed with six significant digits. Every writer emits a header row.

use std::fmt::Write as _;
use std::io::{self, Write};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytic::{first_best, optimal_gammas, second_best, AnalyticError};
use crate::fuzzy::{rule_labels, MembershipPartition, RuleBase};
use crate::model::Division;
use crate::runner::{CellResult, GridResults, SpecError, SummaryStats};
use crate::scenario::{CellKey, ScenarioGrid};
use crate::stats::{indicators, Indicators, StatsError};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cell {index} ({key}) failed: {source}")]
    CellFailed { index: usize, key: String, source: SpecError },
    #[error("grid and results are misaligned: {keys} keys vs {cells} cells")]
    Misaligned { keys: usize, cells: usize },
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Outcome of the two baseline hypothesis tests for one cell.
///
/// Green: both tests reject at 5%. Yellow: only the t-test fails to reject.
/// Blue: only the rank-sum test fails to reject. White: neither rejects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignificanceClass {
    Green,
    Yellow,
    Blue,
    White,
}

impl SignificanceClass {
    pub fn from_p_values(p_welch: f64, p_wilcoxon: f64) -> Self {
        match (p_welch < 0.05, p_wilcoxon < 0.05) {
            (true, true) => SignificanceClass::Green,
            (false, true) => SignificanceClass::Yellow,
            (true, false) => SignificanceClass::Blue,
            (false, false) => SignificanceClass::White,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SignificanceClass::Green => "green",
            SignificanceClass::Yellow => "yellow",
            SignificanceClass::Blue => "blue",
            SignificanceClass::White => "white",
        }
    }
}

/// One row of the indicator grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorRow {
    pub key: CellKey,
    pub sd: f64,
    pub skewness: f64,
    pub indicators: Indicators,
    pub class: SignificanceClass,
}

/// Format with six significant digits (decimal notation).
pub fn fmt_sig(x: f64) -> String {
    format_sig(x, 6)
}

fn format_sig(x: f64, sig: i32) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let decimals = (sig - 1 - x.abs().log10().floor() as i32).clamp(0, 17) as usize;
    format!("{x:.decimals$}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn key_prefix(key: &CellKey) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "{},{},{},{},{},{},{},{}",
        csv_field(&key.scenario),
        fmt_sig(key.lambda_1),
        fmt_sig(key.lambda_2),
        fmt_sig(key.gamma_1),
        fmt_sig(key.gamma_2),
        fmt_sig(key.discount),
        fmt_sig(key.sigma),
        key.policy,
    );
    out
}

const KEY_HEADER: &str = "scenario,lambda_1,lambda_2,gamma_1,gamma_2,discount,sigma,policy";

fn cells_checked<'a>(
    grid: &'a ScenarioGrid,
    results: &'a GridResults,
) -> Result<Vec<(&'a CellKey, &'a CellResult)>, ReportError> {
    if grid.keys.len() != results.cells.len() {
        return Err(ReportError::Misaligned { keys: grid.keys.len(), cells: results.cells.len() });
    }
    grid.keys
        .iter()
        .zip(&results.cells)
        .enumerate()
        .map(|(index, (key, cell))| match cell {
            Ok(cell) => Ok((key, cell)),
            Err(source) => Err(ReportError::CellFailed {
                index,
                key: key_prefix(key),
                source: source.clone(),
            }),
        })
        .collect()
}

/// Per-cell summary of the evaluation-window means, one row per tracked
/// quantity.
pub fn write_summary_csv<W: Write>(
    mut w: W,
    grid: &ScenarioGrid,
    results: &GridResults,
) -> Result<(), ReportError> {
    writeln!(
        w,
        "{KEY_HEADER},quantity,n_runs,mean,sd,skewness,min,p25,median,p75,max,whisker_lo,whisker_hi"
    )?;
    for (key, cell) in cells_checked(grid, results)? {
        let prefix = key_prefix(key);
        for (quantity, stats) in quantity_stats(cell) {
            writeln!(w, "{prefix},{quantity},{}", summary_fields(&stats))?;
        }
    }
    Ok(())
}

fn quantity_stats(cell: &CellResult) -> [(&'static str, SummaryStats); 4] {
    [("i_s", cell.i_s), ("i_1", cell.i_1), ("i_2", cell.i_2), ("pi_hq", cell.pi_hq)]
}

fn summary_fields(s: &SummaryStats) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        s.n,
        fmt_sig(s.mean),
        fmt_sig(s.sd),
        fmt_sig(s.skewness),
        fmt_sig(s.min),
        fmt_sig(s.p25),
        fmt_sig(s.median),
        fmt_sig(s.p75),
        fmt_sig(s.max),
        format!("{},{}", fmt_sig(s.whisker_lo), fmt_sig(s.whisker_hi)),
    )
}

/// Per-step quantile series across replications (modified-boxplot data).
pub fn write_timeline_csv<W: Write>(
    mut w: W,
    grid: &ScenarioGrid,
    results: &GridResults,
) -> Result<(), ReportError> {
    writeln!(w, "{KEY_HEADER},quantity,t,mean,sd,p25,median,p75,whisker_lo,whisker_hi")?;
    for (key, cell) in cells_checked(grid, results)? {
        let prefix = key_prefix(key);
        for point in &cell.timeline {
            for (quantity, stats) in
                [("i_s", point.i_s), ("i_1", point.i_1), ("i_2", point.i_2), ("pi_hq", point.pi_hq)]
            {
                writeln!(
                    w,
                    "{prefix},{quantity},{},{},{},{},{},{},{},{}",
                    point.t,
                    fmt_sig(stats.mean),
                    fmt_sig(stats.sd),
                    fmt_sig(stats.p25),
                    fmt_sig(stats.median),
                    fmt_sig(stats.p75),
                    fmt_sig(stats.whisker_lo),
                    fmt_sig(stats.whisker_hi),
                )?;
            }
        }
    }
    Ok(())
}

/// Per-replication evaluation means.
pub fn write_per_run_csv<W: Write>(
    mut w: W,
    grid: &ScenarioGrid,
    results: &GridResults,
) -> Result<(), ReportError> {
    writeln!(w, "{KEY_HEADER},run,i_s,i_1,i_2,pi_hq")?;
    for (key, cell) in cells_checked(grid, results)? {
        let prefix = key_prefix(key);
        for (run, eval) in cell.eval.iter().enumerate() {
            writeln!(
                w,
                "{prefix},{run},{},{},{},{}",
                fmt_sig(eval.i_s),
                fmt_sig(eval.i_1),
                fmt_sig(eval.i_2),
                fmt_sig(eval.pi_hq),
            )?;
        }
    }
    Ok(())
}

/// Compute the indicator grid: every cell is compared against the baseline
/// cell sharing its (lambda pair, sigma, policy, discount) coordinates whose
/// sharing rule lies closest to the closed-form optimum.
pub fn indicator_rows(grid: &ScenarioGrid, results: &GridResults) -> Result<Vec<IndicatorRow>, ReportError> {
    let cells = cells_checked(grid, results)?;
    let mut rows = Vec::with_capacity(cells.len());
    for (index, (key, cell)) in cells.iter().enumerate() {
        let spec = &grid.specs[index];
        let optimum = optimal_gammas(&spec.params)?;

        // Baseline: same group coordinates, sharing rule nearest the optimum.
        let group = |k: &CellKey| {
            (k.scenario == key.scenario)
                && k.lambda_1 == key.lambda_1
                && k.lambda_2 == key.lambda_2
                && k.discount == key.discount
                && k.sigma == key.sigma
                && k.policy == key.policy
        };
        let distance = |k: &CellKey| {
            let d1 = k.gamma_1 - optimum.gamma_1();
            let d2 = k.gamma_2 - optimum.gamma_2();
            d1 * d1 + d2 * d2
        };
        let (_, baseline) = cells
            .iter()
            .filter(|(k, _)| group(k))
            .min_by(|(a, _), (b, _)| distance(a).total_cmp(&distance(b)))
            .expect("group contains at least the cell itself");

        let pi_fb = first_best(&spec.params).pi_hq;
        let pi_sb = second_best(&spec.params, &spec.rule)?.pi_hq;
        let cell_profits: Vec<f64> = cell.eval.iter().map(|e| e.pi_hq).collect();
        let baseline_profits: Vec<f64> = baseline.eval.iter().map(|e| e.pi_hq).collect();
        let ind = indicators(&cell_profits, pi_fb, pi_sb, &baseline_profits)?;
        rows.push(IndicatorRow {
            key: (*key).clone(),
            sd: cell.pi_hq.sd,
            skewness: cell.pi_hq.skewness,
            indicators: ind,
            class: SignificanceClass::from_p_values(ind.p_welch, ind.p_wilcoxon),
        });
    }
    Ok(rows)
}

/// The indicator grid as CSV.
pub fn write_indicator_csv<W: Write>(mut w: W, rows: &[IndicatorRow]) -> Result<(), ReportError> {
    writeln!(
        w,
        "lambda_1,lambda_2,gamma_1,gamma_2,discount,sigma,policy,\
         mean_pi_hq,sd,skewness,fbi,sbi,bpi,p_welch,p_wilcoxon,significance_class"
    )?;
    for row in rows {
        let k = &row.key;
        let i = &row.indicators;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_sig(k.lambda_1),
            fmt_sig(k.lambda_2),
            fmt_sig(k.gamma_1),
            fmt_sig(k.gamma_2),
            fmt_sig(k.discount),
            fmt_sig(k.sigma),
            k.policy,
            fmt_sig(i.mean),
            fmt_sig(row.sd),
            fmt_sig(row.skewness),
            fmt_sig(i.fbi),
            fmt_sig(i.sbi),
            fmt_sig(i.bpi),
            fmt_sig(i.p_welch),
            fmt_sig(i.p_wilcoxon),
            row.class.label(),
        )?;
    }
    Ok(())
}

/// Dump one agent's rule base for debugging: one row per (rule, action).
pub fn write_rulebase_csv<W: Write>(
    mut w: W,
    division: Division,
    rb: &RuleBase,
    partition: &MembershipPartition,
) -> Result<(), ReportError> {
    writeln!(w, "division,rule,label_s,label_1,label_2,action,q,count")?;
    for rule in 0..rb.n_rules() {
        let (ls, l1, l2) = rule_labels(rule, partition.len());
        for k in 0..rb.n_actions() {
            writeln!(
                w,
                "{},{rule},{ls},{l1},{l2},{},{},{}",
                division.label(),
                fmt_sig(rb.action(rule, k)),
                fmt_sig(rb.q(rule, k)),
                rb.count(rule, k),
            )?;
        }
    }
    Ok(())
}

/// Hex SHA-256 of a configuration text, recorded in run manifests.
pub fn config_digest(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenarios;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(176.32041), "176.320");
        assert_eq!(fmt_sig(5.0), "5.00000");
        assert_eq!(fmt_sig(-0.010795454), "-0.0107955");
        assert_eq!(fmt_sig(123456.78), "123457");
        assert_eq!(fmt_sig(1.0e-7), "0.000000100000");
    }

    #[test]
    fn significance_classes() {
        assert_eq!(SignificanceClass::from_p_values(0.01, 0.01), SignificanceClass::Green);
        assert_eq!(SignificanceClass::from_p_values(0.30, 0.01), SignificanceClass::Yellow);
        assert_eq!(SignificanceClass::from_p_values(0.01, 0.30), SignificanceClass::Blue);
        assert_eq!(SignificanceClass::from_p_values(0.30, 0.30), SignificanceClass::White);
    }

    #[test]
    fn csv_fields_are_quoted_when_needed() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn config_digest_is_stable() {
        let d = config_digest("x = 1\n");
        assert_eq!(d.len(), 64);
        assert_eq!(d, config_digest("x = 1\n"));
        assert_ne!(d, config_digest("x = 2\n"));
    }

    fn tiny_grid() -> (crate::scenario::ScenarioGrid, GridResults) {
        let text = r#"
            [[scenario]]
            name = "tiny"
            lambda_1 = [0.5]
            lambda_2 = [0.5]
            gamma_1 = [0.5, 0.4]
            gamma_2 = [0.5, 0.4]
            discount = [0.0]
            n_runs = 8
            t_learn = 40
            t_eval = 5
            seed = 3
        "#;
        let defs = parse_scenarios(text).unwrap();
        let grid = defs[0].expand().unwrap();
        let results = crate::runner::run_grid(&grid.specs);
        (grid, results)
    }

    #[test]
    fn baseline_cell_has_zero_bpi_and_is_not_significant() {
        let (grid, results) = tiny_grid();
        let rows = indicator_rows(&grid, &results).unwrap();
        assert_eq!(rows.len(), 2);
        // Gamma 0.5 is the closed-form optimum for these parameters.
        let base_row = rows.iter().find(|r| r.key.gamma_1 == 0.5).unwrap();
        assert_eq!(base_row.indicators.bpi, 0.0);
        assert!(!base_row.indicators.significant);
    }

    #[test]
    fn csv_writers_emit_headers_and_rows() {
        let (grid, results) = tiny_grid();

        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &grid, &results).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("scenario,lambda_1"));
        assert_eq!(text.lines().count(), 1 + 2 * 4);
        assert!(!text.contains('\r'));

        let mut buf = Vec::new();
        let rows = indicator_rows(&grid, &results).unwrap();
        write_indicator_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lambda_1,lambda_2"));
        assert_eq!(text.lines().count(), 3);

        let mut buf = Vec::new();
        write_per_run_csv(&mut buf, &grid, &results).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 2 * 8);

        let mut buf = Vec::new();
        write_timeline_csv(&mut buf, &grid, &results).unwrap();
        let text = String::from_utf8(buf).unwrap();
        // 4 decimated learning steps + 5 evaluation steps, 4 quantities, 2 cells.
        assert_eq!(text.lines().count(), 1 + 2 * 9 * 4);
    }

    #[test]
    fn rulebase_dump_covers_every_cell() {
        let rb = RuleBase::paper_default();
        let partition = MembershipPartition::paper_default();
        let mut buf = Vec::new();
        write_rulebase_csv(&mut buf, Division::Seller, &rb, &partition).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 125 * 11);
        assert!(text.lines().nth(1).unwrap().starts_with("seller,0,0,0,0,0"));
    }
}
