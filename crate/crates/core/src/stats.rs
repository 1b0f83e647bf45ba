//! Performance indicators and hypothesis tests.
//!
//! Headquarters profits from a grid cell are compared against the first-best
//! profit, the second-best profit, and the simulated baseline cell (the one
//! using the closed-form optimal sharing rule). Mean superiority over the
//! baseline is tested one-tailed with a hypothesized mean difference `d_H`
//! (one percent of the baseline mean), by both a Welch t-test and a Wilcoxon
//! rank-sum test; a cell counts as significant only if both reject at 5%.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("{test} needs at least {min} observations per sample, got {got}")]
    TooFewSamples { test: &'static str, min: usize, got: usize },
    #[error("samples must be finite")]
    NonFinite,
    #[error("benchmark profit {name} must be positive, got {value}")]
    NonPositiveBenchmark { name: &'static str, value: f64 },
    #[error("baseline sample must not be empty")]
    EmptyBaseline,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchOutcome {
    pub t_stat: f64,
    pub df: f64,
    pub p_value: f64,
}

/// One-tailed Welch t-test of `H0: mean(x) - mean(y) <= d_h` against
/// `H1: mean(x) - mean(y) > d_h`, with Welch-Satterthwaite degrees of
/// freedom. Returns the upper-tail p-value.
///
/// Two identical-constant samples fall back to p in {0, 0.5, 1} by the sign
/// of the observed shift.
pub fn welch_one_tailed(x: &[f64], y: &[f64], d_h: f64) -> Result<WelchOutcome, StatsError> {
    for sample in [x, y] {
        if sample.len() < 2 {
            return Err(StatsError::TooFewSamples { test: "Welch t-test", min: 2, got: sample.len() });
        }
        check_finite(sample)?;
    }
    if !d_h.is_finite() {
        return Err(StatsError::NonFinite);
    }
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (mx, my) = (mean(x), mean(y));
    let (vx, vy) = (sample_variance(x, mx), sample_variance(y, my));
    let shift = mx - my - d_h;
    let se2 = vx / nx + vy / ny;
    if se2 == 0.0 {
        let (t_stat, p_value) = match shift.partial_cmp(&0.0).unwrap() {
            std::cmp::Ordering::Greater => (f64::INFINITY, 0.0),
            std::cmp::Ordering::Less => (f64::NEG_INFINITY, 1.0),
            std::cmp::Ordering::Equal => (0.0, 0.5),
        };
        return Ok(WelchOutcome { t_stat, df: f64::INFINITY, p_value });
    }
    let df = se2 * se2 / ((vx / nx).powi(2) / (nx - 1.0) + (vy / ny).powi(2) / (ny - 1.0));
    let t_stat = shift / se2.sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    Ok(WelchOutcome { t_stat, df, p_value: 1.0 - dist.cdf(t_stat) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSumOutcome {
    pub u_stat: f64,
    pub z: f64,
    pub p_value: f64,
}

/// One-tailed Wilcoxon rank-sum test of `x` located above `y + d_h`.
///
/// Pooled midranks with tie correction, normal approximation with continuity
/// correction; requires at least 8 observations per sample. An all-tied pool
/// returns p = 0.5 by convention.
pub fn wilcoxon_rank_sum(x: &[f64], y: &[f64], d_h: f64) -> Result<RankSumOutcome, StatsError> {
    for sample in [x, y] {
        if sample.len() < 8 {
            return Err(StatsError::TooFewSamples { test: "Wilcoxon rank-sum", min: 8, got: sample.len() });
        }
        check_finite(sample)?;
    }
    if !d_h.is_finite() {
        return Err(StatsError::NonFinite);
    }
    let nx = x.len();
    let ny = y.len();
    let n = nx + ny;

    let mut pool: Vec<(f64, bool)> = Vec::with_capacity(n);
    pool.extend(x.iter().map(|&v| (v, true)));
    pool.extend(y.iter().map(|&v| (v + d_h, false)));
    pool.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Midranks over runs of equal values; accumulate the tie correction.
    let mut rank_sum_x = 0.0;
    let mut tie_term = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && pool[end].0 == pool[start].0 {
            end += 1;
        }
        let run = (end - start) as f64;
        // Ranks are 1-based: positions start+1 ..= end share the midrank.
        let midrank = (start + 1 + end) as f64 / 2.0;
        for item in &pool[start..end] {
            if item.1 {
                rank_sum_x += midrank;
            }
        }
        tie_term += run * run * run - run;
        start = end;
    }

    let u_stat = rank_sum_x - (nx * (nx + 1)) as f64 / 2.0;
    let mu = (nx * ny) as f64 / 2.0;
    let nf = n as f64;
    let var = (nx * ny) as f64 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if var <= 0.0 {
        return Ok(RankSumOutcome { u_stat, z: 0.0, p_value: 0.5 });
    }
    let z = (u_stat - mu - 0.5) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    Ok(RankSumOutcome { u_stat, z, p_value: 1.0 - normal.cdf(z) })
}

/// Adjusted Fisher-Pearson standardized third moment,
/// `g1 sqrt(n (n-1)) / (n-2)`. Zero by convention for degenerate samples
/// (fewer than three points or zero variance).
pub fn sample_skewness(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 3 {
        return 0.0;
    }
    let m = mean(xs);
    let nf = n as f64;
    let m2 = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / nf;
    if m2 == 0.0 {
        return 0.0;
    }
    let m3 = xs.iter().map(|x| (x - m) * (x - m) * (x - m)).sum::<f64>() / nf;
    let g1 = m3 / m2.powf(1.5);
    g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0)
}

/// Indicator bundle for one grid cell against its baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Indicators {
    /// Mean simulated headquarters profit of the cell.
    pub mean: f64,
    /// Mean profit normalized by the first-best profit.
    pub fbi: f64,
    /// Relative change of the mean profit over the second-best profit.
    pub sbi: f64,
    /// Relative change of the mean profit over the baseline-cell mean.
    pub bpi: f64,
    /// Hypothesized mean difference: one percent of the baseline mean.
    pub d_h: f64,
    pub p_welch: f64,
    pub p_wilcoxon: f64,
    /// Both tests reject at the 5% level.
    pub significant: bool,
}

/// Compute the three performance indicators and both hypothesis tests for a
/// cell's per-replication profits against the baseline cell's.
pub fn indicators(
    cell_profits: &[f64],
    pi_first_best: f64,
    pi_second_best: f64,
    baseline_profits: &[f64],
) -> Result<Indicators, StatsError> {
    if pi_first_best <= 0.0 {
        return Err(StatsError::NonPositiveBenchmark { name: "first-best", value: pi_first_best });
    }
    if pi_second_best <= 0.0 {
        return Err(StatsError::NonPositiveBenchmark { name: "second-best", value: pi_second_best });
    }
    if baseline_profits.is_empty() {
        return Err(StatsError::EmptyBaseline);
    }
    check_finite(cell_profits)?;
    check_finite(baseline_profits)?;

    let mean_cell = mean(cell_profits);
    let mean_base = mean(baseline_profits);
    let d_h = mean_base / 100.0;
    let welch = welch_one_tailed(cell_profits, baseline_profits, d_h)?;
    let rank = wilcoxon_rank_sum(cell_profits, baseline_profits, d_h)?;
    Ok(Indicators {
        mean: mean_cell,
        fbi: mean_cell / pi_first_best,
        sbi: (mean_cell - pi_second_best) / pi_second_best,
        bpi: (mean_cell - mean_base) / mean_base,
        d_h,
        p_welch: welch.p_value,
        p_wilcoxon: rank.p_value,
        significant: welch.p_value < 0.05 && rank.p_value < 0.05,
    })
}

/// Weighted arithmetic mean of the sharing parameter over significant cells,
/// weighted by their baseline performance indicator. `None` when no cell
/// qualifies (distinct from an estimate of zero).
pub fn weighted_gamma_mean(cells: &[(f64, Indicators)]) -> Option<f64> {
    let mut weight_sum = 0.0;
    let mut gamma_sum = 0.0;
    for (gamma, ind) in cells {
        if ind.significant && ind.bpi > 0.0 {
            weight_sum += ind.bpi;
            gamma_sum += gamma * ind.bpi;
        }
    }
    (weight_sum > 0.0).then(|| gamma_sum / weight_sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn welch_identical_samples_give_half() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let out = welch_one_tailed(&x, &x, 0.0).unwrap();
        assert_eq!(out.t_stat, 0.0);
        assert_abs_diff_eq!(out.p_value, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn welch_null_boundary() {
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let x: Vec<f64> = y.iter().map(|v| v + 0.7).collect();
        let out = welch_one_tailed(&x, &y, 0.7).unwrap();
        assert_abs_diff_eq!(out.p_value, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn welch_constant_samples_fall_back() {
        let x = [2.0, 2.0, 2.0];
        let y = [1.0, 1.0, 1.0];
        assert_eq!(welch_one_tailed(&x, &y, 0.5).unwrap().p_value, 0.0);
        assert_eq!(welch_one_tailed(&y, &x, 0.5).unwrap().p_value, 1.0);
        assert_eq!(welch_one_tailed(&x, &y, 1.0).unwrap().p_value, 0.5);
    }

    #[test]
    fn welch_rejects_degenerate_input() {
        assert!(matches!(
            welch_one_tailed(&[1.0], &[1.0, 2.0], 0.0),
            Err(StatsError::TooFewSamples { .. })
        ));
        assert!(matches!(
            welch_one_tailed(&[1.0, f64::NAN], &[1.0, 2.0], 0.0),
            Err(StatsError::NonFinite)
        ));
    }

    #[test]
    fn welch_p_value_monotone_in_hypothesized_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..60).map(|_| 10.0 + rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..50).map(|_| 9.5 + rng.random::<f64>()).collect();
        let mut last = 0.0;
        for step in 0..10 {
            let p = welch_one_tailed(&x, &y, 0.1 * step as f64).unwrap().p_value;
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn both_tests_are_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x: Vec<f64> = (0..40).map(|_| 170.0 + 4.0 * rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..40).map(|_| 169.0 + 4.0 * rng.random::<f64>()).collect();
        let d_h = 1.69;
        let c = 37.5;
        let xs: Vec<f64> = x.iter().map(|v| v * c).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();

        let w = welch_one_tailed(&x, &y, d_h).unwrap();
        let ws = welch_one_tailed(&xs, &ys, d_h * c).unwrap();
        assert_abs_diff_eq!(w.p_value, ws.p_value, epsilon = 1e-12);

        let r = wilcoxon_rank_sum(&x, &y, d_h).unwrap();
        let rs = wilcoxon_rank_sum(&xs, &ys, d_h * c).unwrap();
        assert_eq!(r.u_stat, rs.u_stat);
        assert_abs_diff_eq!(r.p_value, rs.p_value, epsilon = 1e-12);
    }

    #[test]
    fn rank_sum_symmetric_null() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let out = wilcoxon_rank_sum(&x, &x, 0.0).unwrap();
        assert_abs_diff_eq!(out.p_value, 0.5, epsilon = 0.02);
    }

    #[test]
    fn rank_sum_complete_separation() {
        let x: Vec<f64> = (100..130).map(f64::from).collect();
        let y: Vec<f64> = (0..30).map(f64::from).collect();
        let out = wilcoxon_rank_sum(&x, &y, 10.0).unwrap();
        assert_eq!(out.u_stat, 900.0);
        assert!(out.p_value < 1e-6);
    }

    #[test]
    fn rank_sum_all_tied_pool() {
        let x = [5.0; 10];
        let y = [4.0; 10];
        let out = wilcoxon_rank_sum(&x, &y, 1.0).unwrap();
        assert_eq!(out.p_value, 0.5);
    }

    #[test]
    fn rank_sum_brute_force_fixture() {
        // Independent pairwise-count route to U.
        let x = [12.0, 3.5, 8.0, 8.0, 1.0, 15.0, 7.25, 9.0];
        let y = [2.0, 8.0, 4.0, 11.0, 6.5, 8.0, 3.5, 10.0];
        let d_h = 0.5;
        let mut u = 0.0;
        for &xi in &x {
            for &yj in &y {
                let shifted = yj + d_h;
                if xi > shifted {
                    u += 1.0;
                } else if xi == shifted {
                    u += 0.5;
                }
            }
        }
        let out = wilcoxon_rank_sum(&x, &y, d_h).unwrap();
        assert_abs_diff_eq!(out.u_stat, u, epsilon = 1e-9);
    }

    #[test]
    fn rank_sum_rejects_small_samples() {
        let x = [1.0; 7];
        let y = [1.0; 10];
        assert!(matches!(
            wilcoxon_rank_sum(&x, &y, 0.0),
            Err(StatsError::TooFewSamples { min: 8, .. })
        ));
    }

    #[test]
    fn skewness_cases() {
        assert_eq!(sample_skewness(&[-2.0, -1.0, 0.0, 1.0, 2.0]), 0.0);
        assert!(sample_skewness(&[0.0, 0.0, 0.0, 1.0]) > 0.0);
        assert_eq!(sample_skewness(&[7.0; 9]), 0.0);
        assert_eq!(sample_skewness(&[1.0, 2.0]), 0.0);

        // Two-pass moment oracle.
        let xs = [1.0, 4.0, 4.5, 2.0, 9.0, 3.0, 2.5, 2.5];
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
        let expected = m3 / m2.powf(1.5) * (n * (n - 1.0)).sqrt() / (n - 2.0);
        assert_abs_diff_eq!(sample_skewness(&xs), expected, epsilon = 1e-12);
    }

    #[test]
    fn indicators_baseline_against_itself() {
        let base: Vec<f64> = (0..50).map(|k| 170.0 + (k % 7) as f64).collect();
        let ind = indicators(&base, 200.0, 176.0, &base).unwrap();
        assert_eq!(ind.bpi, 0.0);
        assert!(!ind.significant);
        assert!(ind.p_welch > 0.5);
    }

    #[test]
    fn indicators_first_best_normalization() {
        let cell = [200.0, 199.0, 201.0, 200.5, 199.5, 200.0, 200.2, 199.8];
        let base = [180.0, 181.0, 179.0, 180.5, 179.5, 180.0, 180.2, 179.8];
        let ind = indicators(&cell, 200.0, 176.0, &base).unwrap();
        assert_abs_diff_eq!(ind.fbi, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(ind.d_h, 1.8, epsilon = 1e-9);
    }

    #[test]
    fn indicators_second_best_fixture() {
        // Mean 177.9 against the 176 benchmark.
        let cell: Vec<f64> = (0..100).map(|k| 177.9 + ((k % 9) as f64 - 4.0) * 0.1).collect();
        let base: Vec<f64> = (0..100).map(|k| 176.0 + ((k % 9) as f64 - 4.0) * 0.1).collect();
        let ind = indicators(&cell, 200.0, 176.0, &base).unwrap();
        assert_abs_diff_eq!(ind.sbi, (ind.mean - 176.0) / 176.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ind.sbi, 0.0108, epsilon = 2e-4);
    }

    #[test]
    fn indicators_reject_bad_benchmarks() {
        let cell = [1.0; 8];
        assert!(matches!(
            indicators(&cell, 0.0, 176.0, &cell),
            Err(StatsError::NonPositiveBenchmark { name: "first-best", .. })
        ));
        assert!(matches!(
            indicators(&cell, 200.0, -1.0, &cell),
            Err(StatsError::NonPositiveBenchmark { name: "second-best", .. })
        ));
        assert!(matches!(indicators(&cell, 200.0, 176.0, &[]), Err(StatsError::EmptyBaseline)));
    }

    #[test]
    fn weighted_gamma_mean_cases() {
        let sig = |bpi: f64| Indicators {
            mean: 0.0,
            fbi: 0.0,
            sbi: 0.0,
            bpi,
            d_h: 0.0,
            p_welch: 0.01,
            p_wilcoxon: 0.01,
            significant: true,
        };
        let insig = Indicators { significant: false, ..sig(0.5) };

        assert_eq!(weighted_gamma_mean(&[(0.4, sig(0.02))]), Some(0.4));
        let two = [(0.3, sig(0.01)), (0.5, sig(0.03))];
        assert_abs_diff_eq!(weighted_gamma_mean(&two).unwrap(), 0.45, epsilon = 1e-12);
        assert_eq!(weighted_gamma_mean(&[(0.3, insig)]), None);
        assert_eq!(weighted_gamma_mean(&[]), None);
    }
}
