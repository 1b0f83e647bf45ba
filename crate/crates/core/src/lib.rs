//! Simulation engine and analytic benchmark for a three-division negotiated
//! transfer-pricing firm with relationship-specific investments.
//!
//! One supplying division trades a specialized intermediate product with two
//! buying divisions; all three can make upfront investments that raise the
//! value of internal trade but are expropriated in the later negotiation
//! (the hold-up problem). The crate provides:
//!
//! - closed-form first-best and second-best solutions and the
//!   profit-maximizing surplus-sharing rule ([`analytic`]);
//! - fuzzy Q-learning agents over a Takagi-Sugeno rule base ([`fuzzy`]) with
//!   Boltzmann, epsilon-greedy, and UCB exploration ([`exploration`]);
//! - a deterministic, parallel Monte-Carlo scenario runner ([`runner`]) over
//!   the agentized market ([`environment`]);
//! - performance indicators, Welch and rank-sum hypothesis tests, and CSV
//!   reporting ([`stats`], [`report`]);
//! - scenario configuration files ([`scenario`]) and a self-check suite
//!   ([`validate`]).

pub mod analytic;
pub mod environment;
pub mod exploration;
pub mod fuzzy;
pub mod model;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod stats;
pub mod validate;

pub use analytic::{
    expected_hq_profit_at, first_best, first_best_at, optimal_gammas, optimal_hq_profit_closed_form,
    second_best, AnalyticError, FirstBestSolution, SecondBestSolution,
};
pub use environment::{draw_thetas, env_step, negotiated_quantities, EnvStep};
pub use exploration::{
    BoltzmannSchedules, EpsilonSchedule, PolicyConfig, RationalDecay, UcbConstants,
};
pub use fuzzy::{
    activations, greedy_value, infer, td_update, MembershipPartition, RuleActivation, RuleBase,
    StateVector,
};
pub use model::{
    division_profits, Division, FirmParams, InvestmentVector, MarketDraw, ModelError,
    ProfitBreakdown, SharingRule,
};
pub use runner::{
    run_cell, run_grid, run_replication, run_replication_detailed, summarize, CellResult,
    EvalMeans, GridResults, RunRecord, ScenarioSpec, SpecError, StepSample, SummaryStats,
    TimelinePoint, TraceMode,
};
pub use scenario::{CellKey, ScenarioDef, ScenarioGrid};
pub use stats::{
    indicators, sample_skewness, weighted_gamma_mean, welch_one_tailed, wilcoxon_rank_sum,
    Indicators, StatsError,
};
