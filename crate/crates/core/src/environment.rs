//! The agentized transfer-pricing world: state draws, ex-post efficient
//! quantities, reward computation, and the state transition.
//!
//! Within one period the divisions first commit their investments (the
//! agents' inferred actions), then the state variables are realized, then the
//! negotiation sets each traded quantity to its ex-post efficient level. The
//! incentive scheme makes truthful information sharing optimal, so the
//! negotiation outcome is imposed in this reduced form. The next observed
//! state is the investment triple itself.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::fuzzy::StateVector;
use crate::model::{division_profits, FirmParams, InvestmentVector, MarketDraw, ProfitBreakdown, SharingRule};

/// Outcome of one simulated period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvStep {
    pub draw: MarketDraw,
    pub investments: InvestmentVector,
    pub quantities: (f64, f64),
    pub profits: ProfitBreakdown,
    pub next_state: StateVector,
}

/// Draw the three independent state variables.
///
/// Draws are untruncated normals (truncation would bias the means away from
/// the closed-form benchmarks); `sigma = 0` returns the means exactly without
/// consuming randomness. Draw order is seller, first buyer, second buyer.
pub fn draw_thetas<R: Rng>(params: &FirmParams, rng: &mut R) -> MarketDraw {
    let sigma = params.sigma();
    if sigma == 0.0 {
        return MarketDraw {
            theta_s: params.e_theta_s(),
            theta_1: params.e_theta_1(),
            theta_2: params.e_theta_2(),
        };
    }
    let mut draw = |mean: f64| Normal::new(mean, sigma).unwrap().sample(rng);
    MarketDraw { theta_s: draw(params.e_theta_s()), theta_1: draw(params.e_theta_1()), theta_2: draw(params.e_theta_2()) }
}

/// Ex-post efficient traded quantities `max(0, (theta_j - theta_S + I_S + I_j) / b)`.
pub fn negotiated_quantities(draw: &MarketDraw, inv: &InvestmentVector, b: f64) -> (f64, f64) {
    debug_assert!(b > 0.0);
    let q_1 = ((draw.theta_1 - draw.theta_s + (inv.i_s + inv.i_1)) / b).max(0.0);
    let q_2 = ((draw.theta_2 - draw.theta_s + (inv.i_s + inv.i_2)) / b).max(0.0);
    (q_1, q_2)
}

/// Run one period: realize the state, negotiate quantities, split profits.
/// Each agent's reward is its divisional profit.
pub fn env_step<R: Rng>(
    actions: InvestmentVector,
    params: &FirmParams,
    rule: &SharingRule,
    rng: &mut R,
) -> EnvStep {
    let draw = draw_thetas(params, rng);
    let (q_1, q_2) = negotiated_quantities(&draw, &actions, params.b());
    let profits = division_profits(&draw, &actions, q_1, q_2, rule, params);
    debug_assert!(
        ((profits.pi_s + profits.pi_1 + profits.pi_2) - profits.pi_hq).abs()
            <= 1e-9 * profits.pi_hq.abs().max(1.0),
        "profit adding-up identity violated"
    );
    EnvStep { draw, investments: actions, quantities: (q_1, q_2), profits, next_state: actions.into() }
}
