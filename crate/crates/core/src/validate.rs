//! Built-in self checks: reference-solution reproduction, stationarity of the
//! closed forms, the independent profit cross-check, partition-of-unity
//! sweeps, schedule boundary values, and update locality.
//!
//! Exposed through the `validate` CLI subcommand and reused by the
//! acceptance test suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analytic::{expected_hq_profit_at, first_best_at, optimal_gammas, optimal_hq_profit_closed_form, second_best};
use crate::exploration::{boltzmann_probabilities, BoltzmannSchedules, EpsilonSchedule};
use crate::fuzzy::{activations, td_update, MembershipPartition, RuleBase, StateVector};
use crate::model::{division_profits, Division, FirmParams, InvestmentVector, MarketDraw, SharingRule};

/// Reference closed-form solutions for the standard benchmark environment
/// (`b = 12`, `E[theta_S] = 60`, `E[theta_B] = 100`, `lambda_S = 1`), at the
/// profit-maximizing sharing rule of each cost configuration. The printed
/// `gamma` columns are the optima rounded to grid precision.
pub mod reference {
    /// One benchmark row: sharing rule, cost parameters, investments,
    /// quantities, and the four profits, all to two-decimal precision.
    #[derive(Debug, Clone, Copy)]
    pub struct ReferenceRow {
        pub gamma_1: f64,
        pub gamma_2: f64,
        pub lambda_1: f64,
        pub lambda_2: f64,
        pub i_s: f64,
        pub i_1: f64,
        pub i_2: f64,
        pub q_1: f64,
        pub q_2: f64,
        pub pi_s: f64,
        pub pi_1: f64,
        pub pi_2: f64,
        pub pi_hq: f64,
    }

    const fn row(values: [f64; 13]) -> ReferenceRow {
        ReferenceRow {
            gamma_1: values[0],
            gamma_2: values[1],
            lambda_1: values[2],
            lambda_2: values[3],
            i_s: values[4],
            i_1: values[5],
            i_2: values[6],
            q_1: values[7],
            q_2: values[8],
            pi_s: values[9],
            pi_1: values[10],
            pi_2: values[11],
            pi_hq: values[12],
        }
    }

    pub const FIRST_BEST: [ReferenceRow; 12] = [
        // Symmetric cost configurations.
        row([0.50, 0.50, 0.500, 0.500, 10.00, 10.00, 10.00, 5.00, 5.00, 100.00, 50.00, 50.00, 200.00]),
        row([0.45, 0.45, 0.424, 0.424, 10.47, 12.35, 12.35, 5.23, 5.23, 93.10, 58.14, 58.14, 209.38]),
        row([0.40, 0.40, 0.361, 0.361, 11.07, 15.33, 15.33, 5.53, 5.53, 85.67, 67.82, 67.82, 221.30]),
        row([0.35, 0.35, 0.307, 0.307, 11.86, 19.32, 19.32, 5.93, 5.93, 77.13, 80.08, 80.08, 237.29]),
        row([0.30, 0.30, 0.262, 0.262, 12.94, 24.69, 24.69, 6.47, 6.47, 67.02, 95.87, 95.87, 258.77]),
        row([0.25, 0.25, 0.222, 0.222, 14.56, 32.79, 32.79, 7.28, 7.28, 52.79, 119.18, 119.18, 291.15]),
        // Non-symmetric cost configurations.
        row([0.50, 0.50, 0.500, 0.500, 10.00, 10.00, 10.00, 5.00, 5.00, 100.00, 50.00, 50.00, 200.00]),
        row([0.55, 0.45, 0.534, 0.463, 10.02, 9.25, 10.98, 4.94, 5.08, 100.02, 42.96, 57.48, 200.46]),
        row([0.60, 0.40, 0.564, 0.425, 10.09, 8.68, 12.22, 4.90, 5.19, 100.12, 36.32, 65.36, 201.80]),
        row([0.65, 0.35, 0.590, 0.385, 10.21, 8.26, 13.87, 4.87, 5.34, 100.32, 29.73, 74.21, 204.26]),
        row([0.70, 0.30, 0.609, 0.343, 10.42, 7.99, 16.18, 4.87, 5.55, 100.56, 23.18, 84.61, 208.35]),
        row([0.75, 0.25, 0.621, 0.301, 10.73, 7.86, 19.42, 4.88, 5.85, 101.05, 16.36, 97.16, 214.57]),
    ];

    pub const SECOND_BEST: [ReferenceRow; 12] = [
        // Symmetric cost configurations.
        row([0.50, 0.50, 0.500, 0.500, 4.00, 4.00, 4.00, 4.00, 4.00, 88.00, 44.00, 44.00, 176.00]),
        row([0.45, 0.45, 0.424, 0.424, 3.67, 5.29, 5.29, 4.08, 4.08, 83.14, 49.02, 49.02, 181.18]),
        row([0.40, 0.40, 0.361, 0.361, 3.35, 6.97, 6.97, 4.19, 4.19, 78.78, 54.55, 54.55, 187.89]),
        row([0.35, 0.35, 0.307, 0.307, 3.04, 9.23, 9.23, 4.36, 4.36, 74.92, 61.01, 61.01, 196.93]),
        row([0.30, 0.30, 0.262, 0.262, 2.75, 12.24, 12.24, 4.58, 4.58, 71.85, 68.56, 68.56, 208.97]),
        row([0.25, 0.25, 0.222, 0.222, 2.46, 16.65, 16.65, 4.93, 4.93, 69.67, 78.46, 78.46, 226.59]),
        // Non-symmetric cost configurations.
        row([0.50, 0.50, 0.500, 0.500, 4.00, 4.00, 4.00, 4.00, 4.00, 88.00, 44.00, 44.00, 176.00]),
        row([0.55, 0.45, 0.534, 0.463, 4.00, 3.32, 4.84, 3.94, 4.07, 88.02, 39.00, 49.31, 176.32]),
        row([0.60, 0.40, 0.564, 0.425, 4.00, 2.76, 5.87, 3.90, 4.16, 88.10, 34.30, 54.86, 177.26]),
        row([0.65, 0.35, 0.590, 0.385, 4.00, 2.29, 7.21, 3.86, 4.27, 88.26, 29.70, 61.03, 178.99]),
        row([0.70, 0.30, 0.609, 0.343, 4.00, 1.88, 9.03, 3.82, 4.42, 88.47, 25.23, 68.13, 181.82]),
        row([0.75, 0.25, 0.621, 0.301, 4.00, 1.52, 11.55, 3.79, 4.63, 88.92, 20.75, 76.46, 186.13]),
    ];

    /// The distinct `(lambda_1, lambda_2)` configurations of the benchmark.
    pub const LAMBDA_CONFIGS: [(f64, f64); 11] = [
        (0.500, 0.500),
        (0.424, 0.424),
        (0.361, 0.361),
        (0.307, 0.307),
        (0.262, 0.262),
        (0.222, 0.222),
        (0.534, 0.463),
        (0.564, 0.425),
        (0.590, 0.385),
        (0.609, 0.343),
        (0.621, 0.301),
    ];
}

/// Print precision of the reference table.
pub const TABLE_TOLERANCE: f64 = 0.01;
/// Finite-difference stationarity threshold.
pub const GRADIENT_TOLERANCE: f64 = 1e-4;
/// Central-difference step for the stationarity checks.
pub const GRADIENT_STEP: f64 = 1e-5;

/// One self-check outcome.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn from_worst(name: &'static str, worst: f64, limit: f64, what: &str) -> Self {
        Check { name, passed: worst <= limit, detail: format!("max {what} {worst:.3e} (limit {limit:.0e})") }
    }
}

/// Expected headquarters profit at the expected states for given investments,
/// with quantities set to their ex-post efficient response. Used as the
/// objective for the investment stationarity check.
fn hq_profit_of_investments(params: &FirmParams, inv: &InvestmentVector) -> f64 {
    let draw = MarketDraw {
        theta_s: params.e_theta_s(),
        theta_1: params.e_theta_1(),
        theta_2: params.e_theta_2(),
    };
    let (q_1, q_2) = crate::environment::negotiated_quantities(&draw, inv, params.b());
    division_profits(&draw, inv, q_1, q_2, &SharingRule::even(), params).pi_hq
}

fn benchmark(lambda_1: f64, lambda_2: f64) -> FirmParams {
    FirmParams::benchmark(lambda_1, lambda_2).expect("benchmark parameters are valid")
}

fn check_reference_first_best() -> Check {
    let mut worst = 0.0f64;
    for row in &reference::FIRST_BEST {
        let params = benchmark(row.lambda_1, row.lambda_2);
        let rule = optimal_gammas(&params).expect("optimum exists");
        let fb = first_best_at(&params, &rule);
        for (got, want) in [
            (rule.gamma_1(), row.gamma_1),
            (rule.gamma_2(), row.gamma_2),
            (fb.i_s, row.i_s),
            (fb.i_1, row.i_1),
            (fb.i_2, row.i_2),
            (fb.q_1, row.q_1),
            (fb.q_2, row.q_2),
            (fb.pi_s, row.pi_s),
            (fb.pi_1, row.pi_1),
            (fb.pi_2, row.pi_2),
            (fb.pi_hq, row.pi_hq),
        ] {
            worst = worst.max((got - want).abs());
        }
    }
    Check::from_worst("first-best reference rows", worst, TABLE_TOLERANCE, "deviation")
}

fn check_reference_second_best() -> Check {
    let mut worst = 0.0f64;
    for row in &reference::SECOND_BEST {
        let params = benchmark(row.lambda_1, row.lambda_2);
        let rule = optimal_gammas(&params).expect("optimum exists");
        let sb = second_best(&params, &rule).expect("interior solution");
        for (got, want) in [
            (rule.gamma_1(), row.gamma_1),
            (rule.gamma_2(), row.gamma_2),
            (sb.i_s, row.i_s),
            (sb.i_1, row.i_1),
            (sb.i_2, row.i_2),
            (sb.q_1, row.q_1),
            (sb.q_2, row.q_2),
            (sb.pi_s, row.pi_s),
            (sb.pi_1, row.pi_1),
            (sb.pi_2, row.pi_2),
            (sb.pi_hq, row.pi_hq),
        ] {
            worst = worst.max((got - want).abs());
        }
    }
    Check::from_worst("second-best reference rows", worst, TABLE_TOLERANCE, "deviation")
}

fn check_gamma_stationarity() -> Check {
    let mut worst = 0.0f64;
    for &(l1, l2) in &reference::LAMBDA_CONFIGS {
        let params = benchmark(l1, l2);
        let rule = optimal_gammas(&params).expect("optimum exists");
        let f = |g1: f64, g2: f64| {
            expected_hq_profit_at(&params, &SharingRule::new(g1, g2).unwrap()).unwrap()
        };
        let h = GRADIENT_STEP;
        let (g1, g2) = (rule.gamma_1(), rule.gamma_2());
        let d1 = (f(g1 + h, g2) - f(g1 - h, g2)) / (2.0 * h);
        let d2 = (f(g1, g2 + h) - f(g1, g2 - h)) / (2.0 * h);
        worst = worst.max(d1.abs()).max(d2.abs());
    }
    Check::from_worst("sharing-rule stationarity", worst, GRADIENT_TOLERANCE, "|dPi/dGamma|")
}

fn check_investment_stationarity() -> Check {
    let mut worst = 0.0f64;
    for &(l1, l2) in &reference::LAMBDA_CONFIGS {
        let params = benchmark(l1, l2);
        let fb = first_best_at(&params, &SharingRule::even());
        let at = InvestmentVector { i_s: fb.i_s, i_1: fb.i_1, i_2: fb.i_2 };
        let h = GRADIENT_STEP;
        for pick in 0..3 {
            let perturb = |delta: f64| {
                let mut inv = at;
                match pick {
                    0 => inv.i_s += delta,
                    1 => inv.i_1 += delta,
                    _ => inv.i_2 += delta,
                }
                hq_profit_of_investments(&params, &inv)
            };
            let d = (perturb(h) - perturb(-h)) / (2.0 * h);
            worst = worst.max(d.abs());
        }
    }
    Check::from_worst("first-best investment stationarity", worst, GRADIENT_TOLERANCE, "|dPi/dI|")
}

fn check_profit_cross_check() -> Check {
    let mut worst = 0.0f64;
    for &(l1, l2) in &reference::LAMBDA_CONFIGS {
        let params = benchmark(l1, l2);
        let rule = optimal_gammas(&params).expect("optimum exists");
        let composed = expected_hq_profit_at(&params, &rule).expect("interior solution");
        let closed = optimal_hq_profit_closed_form(&params);
        worst = worst.max(((composed - closed) / closed).abs());
    }
    Check::from_worst("closed-form profit cross-check", worst, 1e-6, "relative gap")
}

fn check_partition_of_unity() -> Check {
    let partition = MembershipPartition::paper_default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    let mut max_active = 0usize;
    for _ in 0..1000 {
        let state = StateVector {
            s_s: rng.random::<f64>() * 50.0,
            s_1: rng.random::<f64>() * 50.0,
            s_2: rng.random::<f64>() * 50.0,
        };
        let act = activations(&partition, &state);
        let total: f64 = act.active().iter().map(|(_, w)| w).sum();
        worst = worst.max((total - 1.0).abs());
        max_active = max_active.max(act.active().len());
    }
    let mut check = Check::from_worst("partition of unity", worst, 1e-9, "|sum(alpha) - 1|");
    if max_active > 8 {
        check.passed = false;
        check.detail.push_str(&format!("; {max_active} active rules (limit 8)"));
    }
    check
}

fn check_softmax_normalization() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb01);
    let mut worst = 0.0f64;
    let mut monotone = true;
    for _ in 0..200 {
        let row: Vec<f64> = (0..11).map(|_| (rng.random::<f64>() - 0.5) * 200.0).collect();
        let beta = 0.5 + rng.random::<f64>() * 99.5;
        let probs = boltzmann_probabilities(&row, beta);
        worst = worst.max((probs.iter().sum::<f64>() - 1.0).abs());
        let mut bumped = row.clone();
        bumped[4] += 1.0;
        monotone &= boltzmann_probabilities(&bumped, beta)[4] > probs[4];
    }
    let mut check = Check::from_worst("softmax normalization", worst, 1e-12, "|sum(p) - 1|");
    if !monotone {
        check.passed = false;
        check.detail.push_str("; probability not increasing in the q-value");
    }
    check
}

fn check_schedule_boundaries() -> Check {
    let betas = BoltzmannSchedules::paper_default();
    let eps = EpsilonSchedule { t_learn: 2000 };
    let exact = [
        (betas.beta(Division::Seller, 1), 100.0),
        (betas.beta(Division::Seller, 2000), 20.0),
        (betas.beta(Division::FirstBuyer, 1), 50.0),
        (betas.beta(Division::FirstBuyer, 2000), 10.0),
        (betas.beta(Division::SecondBuyer, 1), 50.0),
        (betas.beta(Division::SecondBuyer, 2000), 10.0),
        (eps.epsilon(1), 1.0),
        (eps.epsilon(2000), 0.0),
    ];
    let passed = exact.iter().all(|(got, want)| got == want);
    Check {
        name: "exploration schedule boundaries",
        passed,
        detail: if passed {
            "all boundary values exact".to_string()
        } else {
            format!("boundary values {exact:?}")
        },
    }
}

fn check_update_locality() -> Check {
    let partition = MembershipPartition::paper_default();
    let mut rb = RuleBase::paper_default();
    let act = activations(&partition, &StateVector { s_s: 10.0, s_1: 20.0, s_2: 35.0 });
    let next = activations(&partition, &StateVector { s_s: 5.0, s_1: 5.0, s_2: 5.0 });
    let chosen = vec![4usize; rb.n_rules()];
    let before = rb.clone();
    td_update(&mut rb, &act, &chosen, 10.0, &next, 0.5, 0.9);
    let active: Vec<usize> = act.active().iter().map(|&(r, _)| r).collect();
    let mut passed = true;
    for rule in 0..rb.n_rules() {
        for k in 0..rb.n_actions() {
            let changed = rb.q(rule, k) != before.q(rule, k);
            let should_change = active.contains(&rule) && k == 4;
            passed &= changed == should_change;
        }
    }
    Check {
        name: "temporal-difference update locality",
        passed,
        detail: format!("{} active rules touched, all other cells bit-identical", active.len()),
    }
}

fn check_dominance() -> Check {
    let mut passed = true;
    let mut detail = String::from("second-best never exceeds first-best");
    'outer: for &(l1, l2) in &reference::LAMBDA_CONFIGS {
        let params = benchmark(l1, l2);
        let fb = first_best_at(&params, &SharingRule::even());
        for step in 0..=10 {
            let g = 0.25 + 0.05 * step as f64;
            let Ok(rule) = SharingRule::new(g, 1.0 - g) else { continue };
            let sb = second_best(&params, &rule).expect("interior solution");
            let ok = sb.pi_hq <= fb.pi_hq + 1e-9
                && sb.i_s <= fb.i_s + 1e-9
                && sb.i_1 <= fb.i_1 + 1e-9
                && sb.i_2 <= fb.i_2 + 1e-9;
            if !ok {
                passed = false;
                detail = format!("violated at lambda ({l1}, {l2}), gamma {g}");
                break 'outer;
            }
        }
    }
    Check { name: "underinvestment dominance", passed, detail }
}

/// Run every self check.
pub fn run_all() -> Vec<Check> {
    vec![
        check_reference_first_best(),
        check_reference_second_best(),
        check_gamma_stationarity(),
        check_investment_stationarity(),
        check_profit_cross_check(),
        check_partition_of_unity(),
        check_softmax_normalization(),
        check_schedule_boundaries(),
        check_update_locality(),
        check_dominance(),
    ]
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}
