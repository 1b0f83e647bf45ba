//! Firm arithmetic: manufacturing cost, net revenue, contribution margins,
//! and the divisional / headquarters profit split.
//!
//! Everything here is a pure function of its inputs. One supplying division
//! sells an intermediate product to two buying divisions; profits are split
//! by a linear surplus-sharing scheme over the per-buyer contribution margins.

use thiserror::Error;

/// Validation failures for the economic primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("demand slope b must be positive, got {0}")]
    NonPositiveSlope(f64),
    #[error("marginal investment-cost parameter lambda_{division} must be positive, got {value}")]
    NonPositiveLambda { division: &'static str, value: f64 },
    #[error("state standard deviation sigma must be non-negative, got {0}")]
    NegativeSigma(f64),
    #[error("parameter value must be finite")]
    NonFinite,
    #[error(
        "interior-optimum denominator is {0} but must be positive; \
         the closed-form solutions do not apply to these parameters"
    )]
    NonPositiveDenominator(f64),
    #[error("surplus sharing parameter gamma_{index} must lie in [0, 1], got {value}")]
    GammaOutOfRange { index: u8, value: f64 },
}

/// The three profit centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Division {
    Seller,
    FirstBuyer,
    SecondBuyer,
}

impl Division {
    pub const ALL: [Division; 3] = [Division::Seller, Division::FirstBuyer, Division::SecondBuyer];

    pub fn index(self) -> usize {
        match self {
            Division::Seller => 0,
            Division::FirstBuyer => 1,
            Division::SecondBuyer => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Division::Seller => "seller",
            Division::FirstBuyer => "buyer1",
            Division::SecondBuyer => "buyer2",
        }
    }
}

/// The economic environment: demand slope, expected state variables, state
/// volatility, and marginal investment-cost parameters.
///
/// Construction validates `b > 0`, `lambda > 0`, `sigma >= 0`, and that the
/// interior-optimum denominator
/// `b^2 l1 l2 lS - b (l1 lS + l2 lS + 2 l1 l2) + l1 + l2 + lS`
/// is positive, which guarantees interior closed-form optima.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirmParams {
    b: f64,
    e_theta_s: f64,
    e_theta_1: f64,
    e_theta_2: f64,
    sigma: f64,
    lambda_s: f64,
    lambda_1: f64,
    lambda_2: f64,
}

impl FirmParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        b: f64,
        e_theta_s: f64,
        e_theta_1: f64,
        e_theta_2: f64,
        sigma: f64,
        lambda_s: f64,
        lambda_1: f64,
        lambda_2: f64,
    ) -> Result<Self, ModelError> {
        for v in [b, e_theta_s, e_theta_1, e_theta_2, sigma, lambda_s, lambda_1, lambda_2] {
            if !v.is_finite() {
                return Err(ModelError::NonFinite);
            }
        }
        if b <= 0.0 {
            return Err(ModelError::NonPositiveSlope(b));
        }
        for (name, value) in [("s", lambda_s), ("1", lambda_1), ("2", lambda_2)] {
            if value <= 0.0 {
                return Err(ModelError::NonPositiveLambda { division: name, value });
            }
        }
        if sigma < 0.0 {
            return Err(ModelError::NegativeSigma(sigma));
        }
        let params = Self { b, e_theta_s, e_theta_1, e_theta_2, sigma, lambda_s, lambda_1, lambda_2 };
        let denom = params.interior_denominator();
        if denom <= 0.0 {
            return Err(ModelError::NonPositiveDenominator(denom));
        }
        Ok(params)
    }

    /// Standard benchmark environment (`b = 12`, `E[theta_S] = 60`,
    /// `E[theta_1] = E[theta_2] = 100`, `sigma = 0`, `lambda_S = 1`) with the
    /// given buyer-side marginal cost parameters.
    pub fn benchmark(lambda_1: f64, lambda_2: f64) -> Result<Self, ModelError> {
        Self::new(12.0, 60.0, 100.0, 100.0, 0.0, 1.0, lambda_1, lambda_2)
    }

    /// Same parameters with a different state standard deviation.
    pub fn with_sigma(mut self, sigma: f64) -> Result<Self, ModelError> {
        if !sigma.is_finite() {
            return Err(ModelError::NonFinite);
        }
        if sigma < 0.0 {
            return Err(ModelError::NegativeSigma(sigma));
        }
        self.sigma = sigma;
        Ok(self)
    }

    /// `b^2 l1 l2 lS - b (l1 lS + l2 lS + 2 l1 l2) + l1 + l2 + lS`, the shared
    /// denominator of the first-best closed forms. Positive by construction.
    pub fn interior_denominator(&self) -> f64 {
        let (b, ls, l1, l2) = (self.b, self.lambda_s, self.lambda_1, self.lambda_2);
        // Grouped so that swapping the two buyers is bit-exact.
        let l12 = l1 * l2;
        b * b * l12 * ls - b * ((l1 * ls + l2 * ls) + 2.0 * l12) + ((l1 + l2) + ls)
    }

    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn e_theta_s(&self) -> f64 {
        self.e_theta_s
    }
    pub fn e_theta_1(&self) -> f64 {
        self.e_theta_1
    }
    pub fn e_theta_2(&self) -> f64 {
        self.e_theta_2
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn lambda_s(&self) -> f64 {
        self.lambda_s
    }
    pub fn lambda_1(&self) -> f64 {
        self.lambda_1
    }
    pub fn lambda_2(&self) -> f64 {
        self.lambda_2
    }

    pub fn lambda(&self, division: Division) -> f64 {
        match division {
            Division::Seller => self.lambda_s,
            Division::FirstBuyer => self.lambda_1,
            Division::SecondBuyer => self.lambda_2,
        }
    }

    /// Expected surplus margins `E[theta_j - theta_S]` for the two buyers.
    pub fn expected_deltas(&self) -> (f64, f64) {
        (self.e_theta_1 - self.e_theta_s, self.e_theta_2 - self.e_theta_s)
    }
}

/// The pair `(gamma_1, gamma_2)` splitting each contribution margin between
/// the seller and the respective buyer. `gamma_j` is the seller's share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharingRule {
    gamma_1: f64,
    gamma_2: f64,
}

impl SharingRule {
    pub fn new(gamma_1: f64, gamma_2: f64) -> Result<Self, ModelError> {
        for (index, value) in [(1u8, gamma_1), (2u8, gamma_2)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ModelError::GammaOutOfRange { index, value });
            }
        }
        Ok(Self { gamma_1, gamma_2 })
    }

    /// The fifty-fifty split.
    pub fn even() -> Self {
        Self { gamma_1: 0.5, gamma_2: 0.5 }
    }

    pub fn gamma_1(&self) -> f64 {
        self.gamma_1
    }
    pub fn gamma_2(&self) -> f64 {
        self.gamma_2
    }
}

/// One realization of the three state variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketDraw {
    pub theta_s: f64,
    pub theta_1: f64,
    pub theta_2: f64,
}

/// Specific investment levels of the three divisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvestmentVector {
    pub i_s: f64,
    pub i_1: f64,
    pub i_2: f64,
}

impl InvestmentVector {
    pub fn get(&self, division: Division) -> f64 {
        match division {
            Division::Seller => self.i_s,
            Division::FirstBuyer => self.i_1,
            Division::SecondBuyer => self.i_2,
        }
    }
}

/// Divisional and headquarters profits plus the intermediate quantities they
/// were computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfitBreakdown {
    pub pi_s: f64,
    pub pi_1: f64,
    pub pi_2: f64,
    pub pi_hq: f64,
    pub m_1: f64,
    pub m_2: f64,
    pub q_1: f64,
    pub q_2: f64,
}

impl ProfitBreakdown {
    /// The profit credited to one division (its learning reward).
    pub fn division(&self, division: Division) -> f64 {
        match division {
            Division::Seller => self.pi_s,
            Division::FirstBuyer => self.pi_1,
            Division::SecondBuyer => self.pi_2,
        }
    }
}

/// Manufacturing cost of the supplying division: `(theta_S - I_S) (q_1 + q_2)`.
///
/// A negative effective marginal cost (`I_S > theta_S`) is allowed and
/// meaningful.
pub fn supplying_cost(theta_s: f64, i_s: f64, q_1: f64, q_2: f64) -> f64 {
    debug_assert!(q_1 >= 0.0 && q_2 >= 0.0);
    (theta_s - i_s) * (q_1 + q_2)
}

/// Net revenue of buying division j: `(theta_j - b q_j / 2 + I_j) q_j`.
pub fn net_revenue(theta_j: f64, i_j: f64, q_j: f64, b: f64) -> f64 {
    debug_assert!(q_j >= 0.0);
    (theta_j - 0.5 * b * q_j + i_j) * q_j
}

/// Quadratic divisional investment cost: `lambda_j I_j^2 / 2`.
pub fn investment_cost(lambda_j: f64, i_j: f64) -> f64 {
    0.5 * lambda_j * i_j * i_j
}

/// Headquarters contribution margin of the trade with buyer j:
/// net revenue minus the seller's production cost for that quantity.
pub fn contribution_margin(theta_j: f64, theta_s: f64, i_j: f64, i_s: f64, q_j: f64, b: f64) -> f64 {
    net_revenue(theta_j, i_j, q_j, b) - (theta_s - i_s) * q_j
}

/// Full profit split for one realized period.
///
/// The seller is credited `gamma_j` of each margin, buyer j the remainder;
/// every division bears its own investment cost. The headquarters profit is
/// computed from revenues and costs directly, so the adding-up identity
/// `pi_s + pi_1 + pi_2 = pi_hq` is a genuine cross-check rather than a
/// definition.
pub fn division_profits(
    draw: &MarketDraw,
    inv: &InvestmentVector,
    q_1: f64,
    q_2: f64,
    rule: &SharingRule,
    params: &FirmParams,
) -> ProfitBreakdown {
    let b = params.b();
    let m_1 = contribution_margin(draw.theta_1, draw.theta_s, inv.i_1, inv.i_s, q_1, b);
    let m_2 = contribution_margin(draw.theta_2, draw.theta_s, inv.i_2, inv.i_s, q_2, b);
    let w_s = investment_cost(params.lambda_s(), inv.i_s);
    let w_1 = investment_cost(params.lambda_1(), inv.i_1);
    let w_2 = investment_cost(params.lambda_2(), inv.i_2);

    let pi_s = rule.gamma_1() * m_1 + rule.gamma_2() * m_2 - w_s;
    let pi_1 = (1.0 - rule.gamma_1()) * m_1 - w_1;
    let pi_2 = (1.0 - rule.gamma_2()) * m_2 - w_2;
    let pi_hq = net_revenue(draw.theta_1, inv.i_1, q_1, b) + net_revenue(draw.theta_2, inv.i_2, q_2, b)
        - supplying_cost(draw.theta_s, inv.i_s, q_1, q_2)
        - (w_s + (w_1 + w_2));

    ProfitBreakdown { pi_s, pi_1, pi_2, pi_hq, m_1, m_2, q_1, q_2 }
}
