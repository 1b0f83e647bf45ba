//! Action-index selection policies and their time schedules.
//!
//! Three policies pick one stored-action index per active fuzzy rule each
//! step: Boltzmann (softmax over the rule's q-values with a decaying
//! temperature), epsilon-greedy (linearly decaying exploration probability),
//! and UCB (optimism bonus from per-cell selection counts).

use rand::Rng;

use crate::fuzzy::{RuleActivation, RuleBase};
use crate::model::Division;

/// Rational decay `value(t) = scale / (offset + t)`: fast early decay that
/// never reaches zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RationalDecay {
    pub scale: f64,
    pub offset: f64,
}

impl RationalDecay {
    pub fn value(&self, t: u32) -> f64 {
        self.scale / (self.offset + t as f64)
    }
}

/// Per-division Boltzmann temperature schedules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoltzmannSchedules {
    pub seller: RationalDecay,
    pub first_buyer: RationalDecay,
    pub second_buyer: RationalDecay,
}

impl BoltzmannSchedules {
    /// Seller cools from 100 to 20 over 2000 steps, buyers from 50 to 10.
    pub fn paper_default() -> Self {
        let buyer = RationalDecay { scale: 24_987.5, offset: 498.75 };
        Self {
            seller: RationalDecay { scale: 49_975.0, offset: 498.75 },
            first_buyer: buyer,
            second_buyer: buyer,
        }
    }

    pub fn beta(&self, division: Division, t: u32) -> f64 {
        match division {
            Division::Seller => self.seller.value(t),
            Division::FirstBuyer => self.first_buyer.value(t),
            Division::SecondBuyer => self.second_buyer.value(t),
        }
    }
}

/// Linear epsilon decay pinned to the boundary conditions `eps(1) = 1` and
/// `eps(t_learn) = 0`; zero after the learning horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub t_learn: u32,
}

impl EpsilonSchedule {
    pub fn epsilon(&self, t: u32) -> f64 {
        if self.t_learn <= 1 || t >= self.t_learn {
            return 0.0;
        }
        ((self.t_learn - t) as f64 / (self.t_learn - 1) as f64).clamp(0.0, 1.0)
    }
}

/// Per-division UCB exploration constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcbConstants {
    pub seller: f64,
    pub first_buyer: f64,
    pub second_buyer: f64,
}

impl UcbConstants {
    pub fn paper_default() -> Self {
        Self { seller: 60.0, first_buyer: 30.0, second_buyer: 30.0 }
    }

    pub fn c(&self, division: Division) -> f64 {
        match division {
            Division::Seller => self.seller,
            Division::FirstBuyer => self.first_buyer,
            Division::SecondBuyer => self.second_buyer,
        }
    }
}

/// Which exploration policy drives the agents, with its schedule constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyConfig {
    Boltzmann(BoltzmannSchedules),
    EpsilonGreedy(EpsilonSchedule),
    Ucb(UcbConstants),
}

impl PolicyConfig {
    pub fn label(&self) -> &'static str {
        match self {
            PolicyConfig::Boltzmann(_) => "boltzmann",
            PolicyConfig::EpsilonGreedy(_) => "egreedy",
            PolicyConfig::Ucb(_) => "ucb",
        }
    }
}

/// Index of the largest value; ties break to the lowest index.
pub fn greedy_index(q_row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in q_row.iter().enumerate().skip(1) {
        if v > q_row[best] {
            best = k;
        }
    }
    best
}

/// Softmax probabilities `exp(q_k / beta) / sum_l exp(q_l / beta)`, computed
/// with max-subtraction so large `q / beta` ratios stay finite.
pub fn boltzmann_probabilities(q_row: &[f64], beta: f64) -> Vec<f64> {
    debug_assert!(beta > 0.0);
    let m = q_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = q_row.iter().map(|&q| ((q - m) / beta).exp()).collect();
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    probs
}

/// Sample an index from the Boltzmann distribution over `q_row`.
pub fn boltzmann_select<R: Rng>(q_row: &[f64], beta: f64, rng: &mut R) -> usize {
    debug_assert!(beta > 0.0);
    let m = q_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights = Vec::with_capacity(q_row.len());
    let mut z = 0.0;
    for &q in q_row {
        let w = ((q - m) / beta).exp();
        z += w;
        weights.push(w);
    }
    let target = rng.random::<f64>() * z;
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return k;
        }
    }
    q_row.len() - 1
}

/// Greedy with probability `1 - epsilon`, uniform otherwise.
pub fn egreedy_select<R: Rng>(q_row: &[f64], epsilon: f64, rng: &mut R) -> usize {
    debug_assert!((0.0..=1.0).contains(&epsilon));
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..q_row.len())
    } else {
        greedy_index(q_row)
    }
}

/// Upper-confidence-bound selection: if any cell is untried, pick uniformly
/// among the untried ones; otherwise maximize `q_k + c sqrt(ln t / N_k)`.
/// Count bookkeeping is left to the caller.
pub fn ucb_select<R: Rng>(q_row: &[f64], counts_row: &[u32], c: f64, t: u32, rng: &mut R) -> usize {
    debug_assert_eq!(q_row.len(), counts_row.len());
    debug_assert!(t >= 1);
    let untried = counts_row.iter().filter(|&&n| n == 0).count();
    if untried > 0 {
        let pick = rng.random_range(0..untried);
        return counts_row
            .iter()
            .enumerate()
            .filter(|(_, &n)| n == 0)
            .nth(pick)
            .map(|(k, _)| k)
            .unwrap();
    }
    let log_t = (t as f64).ln();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (k, (&q, &n)) in q_row.iter().zip(counts_row).enumerate() {
        let score = q + c * (log_t / n as f64).sqrt();
        if score > best_score {
            best_score = score;
            best = k;
        }
    }
    best
}

/// Select one action index for every rule of the base.
///
/// Only rules active under `act` draw from the policy (and, under UCB, have
/// their selection counts bumped); the returned entries for inactive rules
/// are placeholders that no inference or update ever reads.
pub fn select_actions<R: Rng>(
    policy: &PolicyConfig,
    division: Division,
    rb: &mut RuleBase,
    act: &RuleActivation,
    t: u32,
    force_greedy: bool,
    rng: &mut R,
) -> Vec<usize> {
    let mut chosen = vec![0usize; rb.n_rules()];
    for &(rule, _) in act.active() {
        let k = if force_greedy {
            greedy_index(rb.q_row(rule))
        } else {
            match policy {
                PolicyConfig::Boltzmann(schedules) => {
                    boltzmann_select(rb.q_row(rule), schedules.beta(division, t), rng)
                }
                PolicyConfig::EpsilonGreedy(schedule) => {
                    egreedy_select(rb.q_row(rule), schedule.epsilon(t), rng)
                }
                PolicyConfig::Ucb(constants) => {
                    ucb_select(rb.q_row(rule), rb.counts_row(rule), constants.c(division), t, rng)
                }
            }
        };
        chosen[rule] = k;
        if matches!(policy, PolicyConfig::Ucb(_)) {
            rb.record_selection(rule, k);
        }
    }
    chosen
}
