//! Replication and scenario-grid orchestration.
//!
//! One replication runs the full inner time loop: three fresh agents start
//! from zero q-values and the all-zero state, select per-rule actions through
//! the exploration policy, invest, trade, and update on their own profits.
//! Replications are embarrassingly parallel; every RNG stream is derived from
//! `(base_seed, run_index)` alone, so results are bit-identical regardless of
//! thread count or execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::environment::env_step;
use crate::exploration::{select_actions, PolicyConfig};
use crate::fuzzy::{activations, infer, td_update, MembershipPartition, RuleBase, StateVector};
use crate::model::{Division, FirmParams, InvestmentVector, SharingRule};
use crate::stats::sample_skewness;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("discount factor must lie in [0, 1), got {0}")]
    BadDiscount(f64),
    #[error("learning rate must lie in (0, 1], got {0}")]
    BadLearningRate(f64),
    #[error("learning horizon must be at least 2 steps, got {0}")]
    BadLearningHorizon(u32),
    #[error("evaluation window must be at least 1 step, got {0}")]
    BadEvalWindow(u32),
    #[error("replication count must be at least 1")]
    NoRuns,
    #[error("epsilon schedule horizon {schedule} does not match the learning horizon {spec}")]
    EpsilonHorizonMismatch { schedule: u32, spec: u32 },
    #[error("Boltzmann schedule must stay positive over the whole horizon")]
    BadBoltzmannSchedule,
    #[error("UCB exploration constant must be non-negative")]
    BadUcbConstant,
}

/// Which per-step samples a replication retains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceMode {
    /// Only the evaluation window.
    EvalOnly,
    /// The evaluation window plus every 10th learning step.
    Decimated,
    /// Every step.
    Full,
}

impl TraceMode {
    fn retains(self, t: u32, t_learn: u32) -> bool {
        match self {
            TraceMode::EvalOnly => t > t_learn,
            TraceMode::Decimated => t > t_learn || t % 10 == 0,
            TraceMode::Full => true,
        }
    }
}

/// One cell of the scenario grid: environment, sharing rule, learning
/// constants, horizons, replication count, and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub params: FirmParams,
    pub rule: SharingRule,
    pub discount: f64,
    pub learning_rate: f64,
    pub policy: PolicyConfig,
    pub t_learn: u32,
    pub t_eval: u32,
    pub n_runs: u32,
    pub base_seed: u64,
    /// Stop q-value updates during the evaluation window.
    pub freeze_eval: bool,
    /// Force greedy selection during the evaluation window.
    pub greedy_eval: bool,
    pub trace: TraceMode,
}

impl ScenarioSpec {
    /// Spec with the standard learning constants: 2000 learning steps, 100
    /// evaluation steps, learning rate 0.5, 10,000 replications.
    pub fn new(params: FirmParams, rule: SharingRule, discount: f64, policy: PolicyConfig) -> Self {
        Self {
            params,
            rule,
            discount,
            learning_rate: 0.5,
            policy,
            t_learn: 2000,
            t_eval: 100,
            n_runs: 10_000,
            base_seed: 0,
            freeze_eval: false,
            greedy_eval: false,
            trace: TraceMode::Decimated,
        }
    }

    pub fn t_total(&self) -> u32 {
        self.t_learn + self.t_eval
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(SpecError::BadDiscount(self.discount));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(SpecError::BadLearningRate(self.learning_rate));
        }
        if self.t_learn < 2 {
            return Err(SpecError::BadLearningHorizon(self.t_learn));
        }
        if self.t_eval < 1 {
            return Err(SpecError::BadEvalWindow(self.t_eval));
        }
        if self.n_runs < 1 {
            return Err(SpecError::NoRuns);
        }
        match &self.policy {
            PolicyConfig::Boltzmann(s) => {
                for decay in [s.seller, s.first_buyer, s.second_buyer] {
                    if decay.scale <= 0.0 || decay.offset + 1.0 <= 0.0 {
                        return Err(SpecError::BadBoltzmannSchedule);
                    }
                }
            }
            PolicyConfig::EpsilonGreedy(s) => {
                if s.t_learn != self.t_learn {
                    return Err(SpecError::EpsilonHorizonMismatch { schedule: s.t_learn, spec: self.t_learn });
                }
            }
            PolicyConfig::Ucb(c) => {
                if c.seller < 0.0 || c.first_buyer < 0.0 || c.second_buyer < 0.0 {
                    return Err(SpecError::BadUcbConstant);
                }
            }
        }
        Ok(())
    }
}

/// One retained step of a replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSample {
    pub t: u32,
    pub i_s: f64,
    pub i_1: f64,
    pub i_2: f64,
    pub pi_hq: f64,
}

/// Means over the evaluation window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMeans {
    pub i_s: f64,
    pub i_1: f64,
    pub i_2: f64,
    pub pi_hq: f64,
}

/// Output of a single replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub samples: Vec<StepSample>,
    pub eval: EvalMeans,
}

// RNG lanes per replication: one per agent plus one for the market draws.
const LANES: u64 = 4;

fn lane_rng(base_seed: u64, run_index: u32, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream((run_index as u64) * LANES + lane);
    rng
}

/// Run one replication. Fully determined by `(spec, run_index)`.
pub fn run_replication(spec: &ScenarioSpec, run_index: u32) -> Result<RunRecord, SpecError> {
    run_replication_detailed(spec, run_index).map(|(record, _)| record)
}

/// Like [`run_replication`], additionally returning the three agents' final
/// rule bases (seller, first buyer, second buyer) for inspection.
pub fn run_replication_detailed(
    spec: &ScenarioSpec,
    run_index: u32,
) -> Result<(RunRecord, [RuleBase; 3]), SpecError> {
    spec.validate()?;
    let partition = MembershipPartition::paper_default();
    let template = RuleBase::paper_default();
    let mut agents = [template.clone(), template.clone(), template];
    let mut agent_rngs = [
        lane_rng(spec.base_seed, run_index, 0),
        lane_rng(spec.base_seed, run_index, 1),
        lane_rng(spec.base_seed, run_index, 2),
    ];
    let mut market_rng = lane_rng(spec.base_seed, run_index, 3);

    let mut act = activations(&partition, &StateVector { s_s: 0.0, s_1: 0.0, s_2: 0.0 });
    let mut samples = Vec::new();
    let mut eval_sums = [0.0f64; 4];

    for t in 1..=spec.t_total() {
        let in_eval = t > spec.t_learn;
        let force_greedy = spec.greedy_eval && in_eval;

        let mut chosen: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut invested = [0.0f64; 3];
        for division in Division::ALL {
            let k = division.index();
            let picks = select_actions(
                &spec.policy,
                division,
                &mut agents[k],
                &act,
                t,
                force_greedy,
                &mut agent_rngs[k],
            );
            let (action, _) = infer(&agents[k], &act, &picks);
            chosen[k] = picks;
            invested[k] = action;
        }

        let actions = InvestmentVector { i_s: invested[0], i_1: invested[1], i_2: invested[2] };
        let step = env_step(actions, &spec.params, &spec.rule, &mut market_rng);
        let act_next = activations(&partition, &step.next_state);

        if !(spec.freeze_eval && in_eval) {
            for division in Division::ALL {
                let k = division.index();
                td_update(
                    &mut agents[k],
                    &act,
                    &chosen[k],
                    step.profits.division(division),
                    &act_next,
                    spec.learning_rate,
                    spec.discount,
                );
            }
        }

        if spec.trace.retains(t, spec.t_learn) {
            samples.push(StepSample {
                t,
                i_s: actions.i_s,
                i_1: actions.i_1,
                i_2: actions.i_2,
                pi_hq: step.profits.pi_hq,
            });
        }
        if in_eval {
            eval_sums[0] += actions.i_s;
            eval_sums[1] += actions.i_1;
            eval_sums[2] += actions.i_2;
            eval_sums[3] += step.profits.pi_hq;
        }

        act = act_next;
    }

    let n = spec.t_eval as f64;
    let record = RunRecord {
        samples,
        eval: EvalMeans {
            i_s: eval_sums[0] / n,
            i_1: eval_sums[1] / n,
            i_2: eval_sums[2] / n,
            pi_hq: eval_sums[3] / n,
        },
    };
    Ok((record, agents))
}

/// Quantile summary with 1.5 IQR whiskers (modified-boxplot convention).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
}

/// Linear-interpolation quantile on a sorted slice.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Mean, dispersion, skewness, quartiles, and whiskers of a nonempty sample.
pub fn summarize(values: &[f64]) -> SummaryStats {
    assert!(!values.is_empty(), "summarize requires a nonempty sample");
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (sorted.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let p25 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let p75 = quantile_sorted(&sorted, 0.75);
    let iqr = p75 - p25;
    let lo_fence = p25 - 1.5 * iqr;
    let hi_fence = p75 + 1.5 * iqr;
    let whisker_lo = sorted.iter().copied().find(|&x| x >= lo_fence).unwrap_or(sorted[0]);
    let whisker_hi = sorted.iter().rev().copied().find(|&x| x <= hi_fence).unwrap_or(sorted[n - 1]);
    SummaryStats {
        n,
        mean,
        sd,
        skewness: sample_skewness(values),
        min: sorted[0],
        p25,
        median,
        p75,
        max: sorted[n - 1],
        whisker_lo,
        whisker_hi,
    }
}

/// Per-quantity summaries for one retained time step, across replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelinePoint {
    pub t: u32,
    pub i_s: SummaryStats,
    pub i_1: SummaryStats,
    pub i_2: SummaryStats,
    pub pi_hq: SummaryStats,
}

/// Aggregated output of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    /// Per-replication evaluation-window means, indexed by run.
    pub eval: Vec<EvalMeans>,
    pub i_s: SummaryStats,
    pub i_1: SummaryStats,
    pub i_2: SummaryStats,
    pub pi_hq: SummaryStats,
    pub timeline: Vec<TimelinePoint>,
}

/// Results for every cell of a grid, positionally aligned with the specs.
#[derive(Debug, Clone, PartialEq)]
pub struct GridResults {
    pub cells: Vec<Result<CellResult, SpecError>>,
}

/// Run all replications of one cell in parallel and aggregate.
pub fn run_cell(spec: &ScenarioSpec) -> Result<CellResult, SpecError> {
    spec.validate()?;
    let records: Vec<RunRecord> = (0..spec.n_runs)
        .into_par_iter()
        .map(|run_index| run_replication(spec, run_index))
        .collect::<Result<_, _>>()?;

    let eval: Vec<EvalMeans> = records.iter().map(|r| r.eval).collect();
    let series = |f: fn(&EvalMeans) -> f64| eval.iter().map(f).collect::<Vec<f64>>();

    let n_samples = records[0].samples.len();
    debug_assert!(records.iter().all(|r| r.samples.len() == n_samples));
    let mut timeline = Vec::with_capacity(n_samples);
    let mut buf = vec![0.0f64; records.len()];
    for j in 0..n_samples {
        let t = records[0].samples[j].t;
        let collect = |f: fn(&StepSample) -> f64, buf: &mut Vec<f64>| {
            for (r, record) in records.iter().enumerate() {
                buf[r] = f(&record.samples[j]);
            }
        };
        collect(|s| s.i_s, &mut buf);
        let i_s = summarize(&buf);
        collect(|s| s.i_1, &mut buf);
        let i_1 = summarize(&buf);
        collect(|s| s.i_2, &mut buf);
        let i_2 = summarize(&buf);
        collect(|s| s.pi_hq, &mut buf);
        let pi_hq = summarize(&buf);
        timeline.push(TimelinePoint { t, i_s, i_1, i_2, pi_hq });
    }

    Ok(CellResult {
        i_s: summarize(&series(|e| e.i_s)),
        i_1: summarize(&series(|e| e.i_1)),
        i_2: summarize(&series(|e| e.i_2)),
        pi_hq: summarize(&series(|e| e.pi_hq)),
        eval,
        timeline,
    })
}

/// Run every cell of a grid. Per-cell failures are surfaced in place without
/// aborting the remaining cells.
pub fn run_grid(specs: &[ScenarioSpec]) -> GridResults {
    GridResults { cells: specs.iter().map(run_cell).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exploration::{BoltzmannSchedules, EpsilonSchedule, UcbConstants};
    use approx::assert_abs_diff_eq;

    fn small_spec() -> ScenarioSpec {
        let params = FirmParams::benchmark(0.5, 0.5).unwrap();
        let mut spec = ScenarioSpec::new(
            params,
            SharingRule::even(),
            0.0,
            PolicyConfig::Boltzmann(BoltzmannSchedules::paper_default()),
        );
        spec.t_learn = 60;
        spec.t_eval = 10;
        spec.n_runs = 4;
        spec.base_seed = 99;
        spec
    }

    #[test]
    fn replication_is_deterministic() {
        let spec = small_spec();
        let a = run_replication(&spec, 3).unwrap();
        let b = run_replication(&spec, 3).unwrap();
        assert_eq!(a, b);
        let c = run_replication(&spec, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn replication_respects_bounds_and_phases() {
        let mut spec = small_spec();
        spec.trace = TraceMode::Full;
        let record = run_replication(&spec, 0).unwrap();
        assert_eq!(record.samples.len(), spec.t_total() as usize);
        for s in &record.samples {
            for v in [s.i_s, s.i_1, s.i_2] {
                assert!((0.0..=50.0).contains(&v), "investment {v} out of range at t={}", s.t);
            }
        }
        // Evaluation means recompute from the last t_eval samples exactly.
        let eval_samples = &record.samples[spec.t_learn as usize..];
        assert_eq!(eval_samples.len(), spec.t_eval as usize);
        let mean_is = eval_samples.iter().map(|s| s.i_s).sum::<f64>() / spec.t_eval as f64;
        assert_abs_diff_eq!(mean_is, record.eval.i_s, epsilon = 1e-12);
    }

    #[test]
    fn trace_modes_retain_expected_steps() {
        let mut spec = small_spec();
        spec.trace = TraceMode::EvalOnly;
        let r = run_replication(&spec, 0).unwrap();
        assert_eq!(r.samples.len(), 10);
        assert!(r.samples.iter().all(|s| s.t > 60));

        spec.trace = TraceMode::Decimated;
        let r = run_replication(&spec, 0).unwrap();
        assert_eq!(r.samples.len(), 6 + 10);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = small_spec();
        spec.discount = 1.0;
        assert_eq!(spec.validate(), Err(SpecError::BadDiscount(1.0)));

        let mut spec = small_spec();
        spec.learning_rate = 0.0;
        assert!(matches!(spec.validate(), Err(SpecError::BadLearningRate(_))));

        let mut spec = small_spec();
        spec.n_runs = 0;
        assert_eq!(spec.validate(), Err(SpecError::NoRuns));

        let mut spec = small_spec();
        spec.policy = PolicyConfig::EpsilonGreedy(EpsilonSchedule { t_learn: 2000 });
        assert!(matches!(spec.validate(), Err(SpecError::EpsilonHorizonMismatch { .. })));

        let mut spec = small_spec();
        spec.policy = PolicyConfig::Ucb(UcbConstants { seller: -1.0, ..UcbConstants::paper_default() });
        assert_eq!(spec.validate(), Err(SpecError::BadUcbConstant));
    }

    #[test]
    fn one_cell_grid_equals_repeated_replications() {
        let spec = small_spec();
        let grid = run_grid(std::slice::from_ref(&spec));
        let cell = grid.cells[0].as_ref().unwrap();
        for run_index in 0..spec.n_runs {
            let record = run_replication(&spec, run_index).unwrap();
            assert_eq!(cell.eval[run_index as usize], record.eval);
        }
    }

    #[test]
    fn grid_results_identical_across_thread_counts() {
        let mut spec = small_spec();
        spec.n_runs = 6;
        let specs = vec![spec.clone(), { spec.discount = 0.9; spec }];
        let pool_a = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool_b = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool_a.install(|| run_grid(&specs));
        let b = pool_b.install(|| run_grid(&specs));
        assert_eq!(a, b);
    }

    #[test]
    fn all_policies_run_end_to_end() {
        for policy in [
            PolicyConfig::Boltzmann(BoltzmannSchedules::paper_default()),
            PolicyConfig::EpsilonGreedy(EpsilonSchedule { t_learn: 60 }),
            PolicyConfig::Ucb(UcbConstants::paper_default()),
        ] {
            let mut spec = small_spec();
            spec.policy = policy;
            let record = run_replication(&spec, 1).unwrap();
            assert!(record.eval.pi_hq.is_finite());
        }
    }

    #[test]
    fn freeze_and_greedy_eval_flags_change_the_window() {
        let mut default = small_spec();
        default.trace = TraceMode::EvalOnly;
        let mut frozen = default.clone();
        frozen.freeze_eval = true;
        frozen.greedy_eval = true;
        let loose = run_replication(&default, 0).unwrap();
        let strict = run_replication(&frozen, 0).unwrap();
        assert_ne!(loose.samples, strict.samples, "flags had no observable effect");

        // Frozen greedy evaluation is a deterministic autonomous map on the
        // investment triple: once two consecutive samples coincide, every
        // later sample must equal them.
        let samples = &strict.samples;
        if let Some(j) = (1..samples.len()).find(|&j| {
            let (a, b) = (&samples[j - 1], &samples[j]);
            (a.i_s, a.i_1, a.i_2) == (b.i_s, b.i_1, b.i_2)
        }) {
            for s in &samples[j..] {
                assert_eq!((s.i_s, s.i_1, s.i_2), (samples[j].i_s, samples[j].i_1, samples[j].i_2));
            }
        }
    }

    #[test]
    fn summarize_constant_sample() {
        let s = summarize(&[3.0; 12]);
        assert_eq!(s.sd, 0.0);
        assert_eq!(s.skewness, 0.0);
        assert_eq!((s.p25, s.median, s.p75), (3.0, 3.0, 3.0));
        assert_eq!((s.whisker_lo, s.whisker_hi), (3.0, 3.0));
    }

    #[test]
    fn summarize_hundred_integers() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = summarize(&xs);
        assert_abs_diff_eq!(s.median, 50.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.p25, 25.75, epsilon = 1e-12);
        assert_abs_diff_eq!(s.p75, 75.25, epsilon = 1e-12);
        assert_eq!((s.min, s.max), (1.0, 100.0));
        assert_eq!((s.whisker_lo, s.whisker_hi), (1.0, 100.0));
    }

    #[test]
    fn summarize_whiskers_exclude_outliers() {
        let mut xs: Vec<f64> = (1..=99).map(f64::from).collect();
        xs.push(1000.0);
        let s = summarize(&xs);
        assert_eq!(s.max, 1000.0);
        assert!(s.whisker_hi <= 99.0);
    }
}
