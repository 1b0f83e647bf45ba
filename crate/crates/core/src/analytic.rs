//! Closed-form benchmark solver: first-best (centralized) and second-best
//! (subgame perfect) investments, quantities, and profits, plus the
//! profit-maximizing surplus-sharing rule.
//!
//! Quantities and profits reported here are deterministic equivalents
//! evaluated at the expected state variables. Every buyer-indexed formula is
//! evaluated through a single side-symmetric helper, so swapping the two
//! buyers swaps the outputs bit-exactly.

use thiserror::Error;

use crate::model::{
    division_profits, FirmParams, InvestmentVector, MarketDraw, ModelError, ProfitBreakdown,
    SharingRule,
};

/// Denominator magnitudes below this are treated as degenerate.
const DEGENERACY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("degenerate denominator {value:.6e} in {context}")]
    DegenerateDenominator { context: &'static str, value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Centralized full-commitment solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstBestSolution {
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

/// Subgame perfect solution under a given sharing rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondBestSolution {
    pub gamma_1: f64,
    pub gamma_2: f64,
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

/// One buyer's view of the parameters; `own` is that buyer, `other` the
/// competing buyer. Both buyers are computed through identical code paths.
#[derive(Clone, Copy)]
struct BuyerView {
    d_own: f64,
    d_other: f64,
    theta_diff: f64, // E[theta_own - theta_other]
    l_own: f64,
    l_other: f64,
    g_own: f64,
    g_other: f64,
}

fn views(params: &FirmParams, rule: &SharingRule) -> (BuyerView, BuyerView) {
    let (d1, d2) = params.expected_deltas();
    let first = BuyerView {
        d_own: d1,
        d_other: d2,
        theta_diff: params.e_theta_1() - params.e_theta_2(),
        l_own: params.lambda_1(),
        l_other: params.lambda_2(),
        g_own: rule.gamma_1(),
        g_other: rule.gamma_2(),
    };
    let second = BuyerView {
        d_own: d2,
        d_other: d1,
        theta_diff: params.e_theta_2() - params.e_theta_1(),
        l_own: params.lambda_2(),
        l_other: params.lambda_1(),
        g_own: rule.gamma_2(),
        g_other: rule.gamma_1(),
    };
    (first, second)
}

/// First-best solution with divisional profits reported at the even split.
pub fn first_best(params: &FirmParams) -> FirstBestSolution {
    first_best_at(params, &SharingRule::even())
}

/// First-best investments, expected quantities, and expected headquarters
/// profit. The profit split across divisions depends on a sharing rule even
/// in the first-best case; `reporting` only affects the divisional fields.
pub fn first_best_at(params: &FirmParams, reporting: &SharingRule) -> FirstBestSolution {
    let b = params.b();
    let (ls, l1, l2) = (params.lambda_s(), params.lambda_1(), params.lambda_2());
    let l12 = l1 * l2;
    let lam_sum = (l1 + l2) + ls;
    let den = params.interior_denominator();
    let (v1, v2) = views(params, reporting);

    let seller_num = |v: BuyerView| v.d_own * (b * l12 - v.l_own);
    let i_s = (seller_num(v1) + seller_num(v2)) / den;

    let buyer_inv =
        |v: BuyerView| (v.d_own * (b * v.l_other * ls - (v.l_other + ls)) + v.d_other * v.l_other) / den;
    let i_1 = buyer_inv(v1);
    let i_2 = buyer_inv(v2);

    let quantity = |v: BuyerView| {
        v.d_own / b
            + (v.d_own * ((b * l12 + b * v.l_other * ls) - lam_sum) + v.d_other * b * l12) / (b * den)
    };
    let q_1 = quantity(v1);
    let q_2 = quantity(v2);

    let profit_num = |v: BuyerView| v.d_own * v.d_own * (b * l12 * ls - v.l_own * ls);
    let theta_gap = params.e_theta_1() - params.e_theta_2();
    let pi_hq = ((profit_num(v1) + profit_num(v2)) - theta_gap * theta_gap * l12) / (2.0 * den);

    let split = expected_profits(params, reporting, i_s, i_1, i_2, q_1, q_2);
    FirstBestSolution {
        i_s,
        i_1,
        i_2,
        q_1,
        q_2,
        pi_s: split.pi_s,
        pi_1: split.pi_1,
        pi_2: split.pi_2,
        pi_hq,
    }
}

/// Shared denominator of the second-best closed forms.
fn second_best_denominator(params: &FirmParams, rule: &SharingRule) -> f64 {
    let b = params.b();
    let (ls, l1, l2) = (params.lambda_s(), params.lambda_1(), params.lambda_2());
    let l12 = l1 * l2;
    let (g1, g2) = (rule.gamma_1(), rule.gamma_2());
    let gg = (1.0 - g1) * (1.0 - g2);
    b * b * l12 * ls - b * (((1.0 - g1) * l2 * ls + (1.0 - g2) * l1 * ls) + (g1 + g2) * l12)
        + (gg * ls + (g1 * (1.0 - g2) * l1 + (1.0 - g1) * g2 * l2))
}

/// Second-best investments and expected quantities under `rule`, with profits
/// obtained by evaluating the profit split at the solution.
pub fn second_best(params: &FirmParams, rule: &SharingRule) -> Result<SecondBestSolution, AnalyticError> {
    let b = params.b();
    let (ls, l1, l2) = (params.lambda_s(), params.lambda_1(), params.lambda_2());
    let l12 = l1 * l2;
    let (g1, g2) = (rule.gamma_1(), rule.gamma_2());
    let gg = (1.0 - g1) * (1.0 - g2);
    let den = second_best_denominator(params, rule);
    if den <= DEGENERACY_EPS {
        return Err(AnalyticError::DegenerateDenominator { context: "second-best response system", value: den });
    }
    let (v1, v2) = views(params, rule);

    let seller_term = |v: BuyerView| v.d_own * v.g_own * (1.0 - v.g_other) * v.l_own;
    let i_s = ((v1.g_own * v1.d_own + v2.g_own * v2.d_own) * b * l12 - (seller_term(v1) + seller_term(v2)))
        / den;

    let buyer_inv = |v: BuyerView| {
        (v.d_own * (1.0 - v.g_own) * b * v.l_other * ls
            - v.d_own * gg * ls
            - v.theta_diff * (1.0 - v.g_own) * v.g_other * v.l_other)
            / den
    };
    let i_1 = buyer_inv(v1);
    let i_2 = buyer_inv(v2);

    let quantity = |v: BuyerView| {
        let own_coeff = b * v.l_other * ((1.0 - v.g_own) * ls + v.g_own * v.l_own)
            - v.g_own * (1.0 - v.g_other) * v.l_own
            - (1.0 - v.g_own) * v.g_other * v.l_other
            - gg * ls;
        v.d_own / b + (v.d_own * own_coeff + v.d_other * v.g_other * b * l12) / (b * den)
    };
    let q_1 = quantity(v1);
    let q_2 = quantity(v2);

    let split = expected_profits(params, rule, i_s, i_1, i_2, q_1, q_2);
    Ok(SecondBestSolution {
        gamma_1: g1,
        gamma_2: g2,
        i_s,
        i_1,
        i_2,
        q_1,
        q_2,
        pi_s: split.pi_s,
        pi_1: split.pi_1,
        pi_2: split.pi_2,
        pi_hq: split.pi_hq,
    })
}

/// The sharing rule maximizing expected headquarters profit over the
/// second-best responses.
pub fn optimal_gammas(params: &FirmParams) -> Result<SharingRule, AnalyticError> {
    let b = params.b();
    let (ls, l1, l2) = (params.lambda_s(), params.lambda_1(), params.lambda_2());
    let l12 = l1 * l2;
    let lam_sum = (l1 + l2) + ls;
    let (v1, v2) = views(params, &SharingRule::even());

    let gamma = |v: BuyerView| -> Result<f64, AnalyticError> {
        let num = v.d_own * ls * (b * v.l_own * ((l1 + l2) - b * l12) - v.l_own)
            + v.d_other * ls * (b * l12 * (2.0 - b * v.l_own) - v.l_other);
        let den = v.d_own * v.l_own * ls * (b * ((v.l_own + 4.0 * v.l_other) + ls) - b * b * v.l_other * lam_sum - 3.0)
            + v.d_other * v.l_other * ls * (b * v.l_own - 1.0)
            + v.theta_diff * l12 * ((b * l1 + b * l2) - 2.0);
        if den.abs() <= DEGENERACY_EPS {
            return Err(AnalyticError::DegenerateDenominator { context: "sharing-rule first-order condition", value: den });
        }
        Ok(num / den)
    };
    Ok(SharingRule::new(gamma(v1)?, gamma(v2)?)?)
}

/// Expected headquarters profit when divisions respond second-best to `rule`.
pub fn expected_hq_profit_at(params: &FirmParams, rule: &SharingRule) -> Result<f64, AnalyticError> {
    Ok(second_best(params, rule)?.pi_hq)
}

/// Closed-form expected headquarters profit at the optimal sharing rule.
///
/// Only valid at [`optimal_gammas`]; kept as an independent transcription to
/// cross-validate the composed route `expected_hq_profit_at(params,
/// optimal_gammas(params))`.
pub fn optimal_hq_profit_closed_form(params: &FirmParams) -> f64 {
    let b = params.b();
    let (ls, l1, l2) = (params.lambda_s(), params.lambda_1(), params.lambda_2());
    let l12 = l1 * l2;
    let lam_sum = (l1 + l2) + ls;
    let triple = l12 * ls * lam_sum; // l1 l2 ls^2 + l1 l2^2 ls + l1^2 l2 ls
    let (d1, d2) = params.expected_deltas();
    let theta_gap = params.e_theta_1() - params.e_theta_2();

    let coeff = |l_own: f64| {
        b * b * triple - b * ((l_own * ls * ls + 3.0 * l12 * ls) + l_own * l_own * ls) + 2.0 * l_own * ls
    };
    let num = (d1 * d1 * coeff(l1) + d2 * d2 * coeff(l2))
        - theta_gap * theta_gap * (b * l12 * (l1 + l2) - 2.0 * l12);
    let den = 2.0
        * (b * b * b * triple - b * b * lam_sum * ((l1 * ls + l2 * ls) + 2.0 * l12)
            + b * ((lam_sum * lam_sum + 4.0 * l12) + (l1 * ls + l2 * ls))
            - 2.0 * lam_sum);
    num / den
}

/// Profit split at the expected state variables for given investments and
/// quantities.
fn expected_profits(
    params: &FirmParams,
    rule: &SharingRule,
    i_s: f64,
    i_1: f64,
    i_2: f64,
    q_1: f64,
    q_2: f64,
) -> ProfitBreakdown {
    let draw = MarketDraw {
        theta_s: params.e_theta_s(),
        theta_1: params.e_theta_1(),
        theta_2: params.e_theta_2(),
    };
    let inv = InvestmentVector { i_s, i_1, i_2 };
    division_profits(&draw, &inv, q_1, q_2, rule, params)
}
