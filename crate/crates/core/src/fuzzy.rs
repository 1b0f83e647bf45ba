//! Zero-order Takagi-Sugeno fuzzy rule base with Q-learning.
//!
//! The state space is covered by triangular membership functions forming a
//! strong fuzzy partition (grades on each dimension sum to one). A rule is a
//! triple of labels, one per state dimension; its activation is the T-norm
//! product of the three grades. Each rule stores the discrete action set and
//! one q-value per action; inferred actions and q-values are the
//! activation-weighted sums over the per-rule choices, and temporal-difference
//! updates write back into exactly the active rules.

use thiserror::Error;

use crate::model::InvestmentVector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuzzyError {
    #[error("membership partition needs at least two strictly increasing finite peaks")]
    InvalidPartition,
    #[error("rule base needs at least one stored action")]
    NoActions,
}

/// Peak positions of the triangular membership functions on one state
/// dimension. Neighboring peaks are each other's shoulders, so grades at any
/// point sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipPartition {
    peaks: Vec<f64>,
}

impl MembershipPartition {
    pub fn new(peaks: Vec<f64>) -> Result<Self, FuzzyError> {
        if peaks.len() < 2 || peaks.iter().any(|p| !p.is_finite()) {
            return Err(FuzzyError::InvalidPartition);
        }
        if peaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FuzzyError::InvalidPartition);
        }
        Ok(Self { peaks })
    }

    /// Five labels at `{0, 12.5, 25, 37.5, 50}`.
    pub fn paper_default() -> Self {
        Self::new(vec![0.0, 12.5, 25.0, 37.5, 50.0]).unwrap()
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        false // at least two peaks by construction
    }

    pub fn peaks(&self) -> &[f64] {
        &self.peaks
    }

    pub fn lower(&self) -> f64 {
        self.peaks[0]
    }

    pub fn upper(&self) -> f64 {
        *self.peaks.last().unwrap()
    }

    /// The at-most-two labels with nonzero grade at `s` (clamped to the hull),
    /// as `(label, grade)` pairs. The two grades sum to one exactly.
    pub fn grades(&self, s: f64) -> [(usize, f64); 2] {
        let s = s.clamp(self.lower(), self.upper());
        // Number of peaks strictly below s, giving the right end of the segment.
        let hi = self.peaks.partition_point(|&p| p < s).clamp(1, self.peaks.len() - 1);
        let lo = hi - 1;
        let left = (self.peaks[hi] - s) / (self.peaks[hi] - self.peaks[lo]);
        [(lo, left), (hi, 1.0 - left)]
    }

    /// Dense membership grades over all labels; sums to one.
    pub fn membership(&self, s: f64) -> Vec<f64> {
        let mut grades = vec![0.0; self.peaks.len()];
        for (label, grade) in self.grades(s) {
            grades[label] += grade;
        }
        grades
    }
}

/// Observed state: the previous period's investment triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    pub s_s: f64,
    pub s_1: f64,
    pub s_2: f64,
}

impl From<InvestmentVector> for StateVector {
    fn from(inv: InvestmentVector) -> Self {
        Self { s_s: inv.i_s, s_1: inv.i_1, s_2: inv.i_2 }
    }
}

/// Rule activation weights for one state: the nonzero entries of the T-norm
/// product over the three dimensions. At most `2^3 = 8` rules are active and
/// the weights form a convex combination.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleActivation {
    n_rules: usize,
    active: Vec<(usize, f64)>,
}

impl RuleActivation {
    pub fn n_rules(&self) -> usize {
        self.n_rules
    }

    /// `(rule index, weight)` pairs with weight > 0, ascending by rule index.
    pub fn active(&self) -> &[(usize, f64)] {
        &self.active
    }

    pub fn weight(&self, rule: usize) -> f64 {
        self.active
            .iter()
            .find(|(i, _)| *i == rule)
            .map(|(_, w)| *w)
            .unwrap_or(0.0)
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut weights = vec![0.0; self.n_rules];
        for &(i, w) in &self.active {
            weights[i] = w;
        }
        weights
    }
}

/// Rule index of a label triple, `(seller, buyer1, buyer2)` dimensions.
pub fn rule_index(labels: (usize, usize, usize), partition_size: usize) -> usize {
    (labels.0 * partition_size + labels.1) * partition_size + labels.2
}

/// Label triple of a rule index.
pub fn rule_labels(rule: usize, partition_size: usize) -> (usize, usize, usize) {
    let l2 = rule % partition_size;
    let l1 = (rule / partition_size) % partition_size;
    let ls = rule / (partition_size * partition_size);
    (ls, l1, l2)
}

/// T-norm product activation of every rule at `state`.
pub fn activations(partition: &MembershipPartition, state: &StateVector) -> RuleActivation {
    let p = partition.len();
    let gs = partition.grades(state.s_s);
    let g1 = partition.grades(state.s_1);
    let g2 = partition.grades(state.s_2);
    let mut active = Vec::with_capacity(8);
    for &(ls, ws) in &gs {
        if ws == 0.0 {
            continue;
        }
        for &(l1, w1) in &g1 {
            if w1 == 0.0 {
                continue;
            }
            for &(l2, w2) in &g2 {
                if w2 == 0.0 {
                    continue;
                }
                active.push((rule_index((ls, l1, l2), p), ws * w1 * w2));
            }
        }
    }
    RuleActivation { n_rules: p * p * p, active }
}

/// The paper's discrete action grid `{0, 5, ..., 50}`.
pub fn paper_action_grid() -> Vec<f64> {
    (0..=10).map(|k| 5.0 * k as f64).collect()
}

/// Per-agent fuzzy Q-learning state: stored actions, q-values, and UCB
/// selection counts, each indexed by `(rule, action)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleBase {
    n_rules: usize,
    n_actions: usize,
    actions: Vec<f64>,
    q: Vec<f64>,
    counts: Vec<u32>,
    action_min: f64,
    action_max: f64,
}

impl RuleBase {
    /// All q-values start at zero (agents have no prior knowledge).
    pub fn new(n_rules: usize, stored_actions: &[f64]) -> Result<Self, FuzzyError> {
        if stored_actions.is_empty() {
            return Err(FuzzyError::NoActions);
        }
        let n_actions = stored_actions.len();
        let mut actions = Vec::with_capacity(n_rules * n_actions);
        for _ in 0..n_rules {
            actions.extend_from_slice(stored_actions);
        }
        let action_min = stored_actions.iter().copied().fold(f64::INFINITY, f64::min);
        let action_max = stored_actions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            n_rules,
            n_actions,
            actions,
            q: vec![0.0; n_rules * n_actions],
            counts: vec![0; n_rules * n_actions],
            action_min,
            action_max,
        })
    }

    /// 125 rules over the default partition with the `{0, 5, ..., 50}` grid.
    pub fn paper_default() -> Self {
        Self::new(125, &paper_action_grid()).unwrap()
    }

    pub fn n_rules(&self) -> usize {
        self.n_rules
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn cell(&self, rule: usize, k: usize) -> usize {
        debug_assert!(rule < self.n_rules && k < self.n_actions);
        rule * self.n_actions + k
    }

    pub fn action(&self, rule: usize, k: usize) -> f64 {
        self.actions[self.cell(rule, k)]
    }

    pub fn q(&self, rule: usize, k: usize) -> f64 {
        self.q[self.cell(rule, k)]
    }

    pub fn set_q(&mut self, rule: usize, k: usize, value: f64) {
        let cell = self.cell(rule, k);
        self.q[cell] = value;
    }

    pub fn q_row(&self, rule: usize) -> &[f64] {
        &self.q[rule * self.n_actions..(rule + 1) * self.n_actions]
    }

    pub fn counts_row(&self, rule: usize) -> &[u32] {
        &self.counts[rule * self.n_actions..(rule + 1) * self.n_actions]
    }

    pub fn count(&self, rule: usize, k: usize) -> u32 {
        self.counts[self.cell(rule, k)]
    }

    /// Bump the selection count of `(rule, k)` by one.
    pub fn record_selection(&mut self, rule: usize, k: usize) {
        let cell = self.cell(rule, k);
        self.counts[cell] += 1;
    }

    pub fn max_q(&self, rule: usize) -> f64 {
        self.q_row(rule).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Activation-weighted inferred action and q-value for the chosen per-rule
/// action indices. Only entries of `chosen` at active rules are read.
///
/// The inferred action is a convex combination of stored actions; it is
/// clamped to the stored-action range so that roundoff in the weights cannot
/// push it outside. Panics if a read index is out of range.
pub fn infer(rb: &RuleBase, act: &RuleActivation, chosen: &[usize]) -> (f64, f64) {
    let mut action = 0.0;
    let mut q = 0.0;
    for &(rule, weight) in act.active() {
        let k = chosen[rule];
        action += weight * rb.action(rule, k);
        q += weight * rb.q(rule, k);
    }
    (action.clamp(rb.action_min, rb.action_max), q)
}

/// Activation-weighted best attainable q-value, `sum_i alpha_i max_k q[i,k]`.
pub fn greedy_value(rb: &RuleBase, act: &RuleActivation) -> f64 {
    act.active().iter().map(|&(rule, weight)| weight * rb.max_q(rule)).sum()
}

/// One temporal-difference update.
///
/// The error is `alpha (r + gamma * greedy_value(next) - Q(s_t, a_t))`; each
/// active rule's chosen cell moves by its activation weight times the error.
/// Returns the error. Cells of inactive rules are untouched.
pub fn td_update(
    rb: &mut RuleBase,
    act_t: &RuleActivation,
    chosen: &[usize],
    reward: f64,
    act_next: &RuleActivation,
    learning_rate: f64,
    discount: f64,
) -> f64 {
    debug_assert!(learning_rate > 0.0 && learning_rate <= 1.0);
    debug_assert!((0.0..1.0).contains(&discount));
    let (_, q_now) = infer(rb, act_t, chosen);
    let target = reward + discount * greedy_value(rb, act_next);
    let error = learning_rate * (target - q_now);
    for &(rule, weight) in act_t.active() {
        let cell = rule * rb.n_actions + chosen[rule];
        rb.q[cell] += weight * error;
    }
    error
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn corner_state() -> StateVector {
        StateVector { s_s: 0.0, s_1: 0.0, s_2: 0.0 }
    }

    #[test]
    fn membership_examples() {
        let p = MembershipPartition::paper_default();
        let m = p.membership(10.0);
        assert_abs_diff_eq!(m[0], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(m[1], 0.8, epsilon = 1e-12);
        assert_eq!(&m[2..], &[0.0, 0.0, 0.0]);

        assert_eq!(p.membership(0.0), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.membership(25.0), vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(p.membership(50.0), vec![0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn membership_clamps_outside_hull() {
        let p = MembershipPartition::paper_default();
        assert_eq!(p.membership(-3.0), p.membership(0.0));
        assert_eq!(p.membership(61.0), p.membership(50.0));
    }

    #[test]
    fn activations_corner_state_is_one_hot() {
        let p = MembershipPartition::paper_default();
        let act = activations(&p, &corner_state());
        assert_eq!(act.active(), &[(0, 1.0)]);
    }

    #[test]
    fn activations_two_rule_example() {
        let p = MembershipPartition::paper_default();
        let act = activations(&p, &StateVector { s_s: 10.0, s_1: 0.0, s_2: 0.0 });
        let idx_low = rule_index((0, 0, 0), 5);
        let idx_high = rule_index((1, 0, 0), 5);
        assert_eq!(act.active().len(), 2);
        assert_abs_diff_eq!(act.weight(idx_low), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(act.weight(idx_high), 0.8, epsilon = 1e-12);
    }

    #[test]
    fn rule_index_roundtrip() {
        for rule in 0..125 {
            assert_eq!(rule_index(rule_labels(rule, 5), 5), rule);
        }
    }

    #[test]
    fn infer_zero_table_and_one_hot() {
        let p = MembershipPartition::paper_default();
        let rb = RuleBase::paper_default();
        let chosen = vec![3usize; rb.n_rules()];

        let act = activations(&p, &StateVector { s_s: 17.0, s_1: 42.0, s_2: 8.0 });
        let (_, q) = infer(&rb, &act, &chosen);
        assert_eq!(q, 0.0);

        let corner = activations(&p, &corner_state());
        let (a, q) = infer(&rb, &corner, &chosen);
        assert_eq!(a, rb.action(0, 3));
        assert_eq!(q, rb.q(0, 3));
    }

    #[test]
    fn infer_convex_combination_of_equal_values() {
        let p = MembershipPartition::paper_default();
        let rb = RuleBase::paper_default();
        let act = activations(&p, &StateVector { s_s: 10.0, s_1: 0.0, s_2: 0.0 });
        // Index 2 stores the value 10 in every rule.
        let chosen = vec![2usize; rb.n_rules()];
        let (a, _) = infer(&rb, &act, &chosen);
        assert_abs_diff_eq!(a, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn greedy_value_cases() {
        let p = MembershipPartition::paper_default();
        let mut rb = RuleBase::paper_default();
        let act = activations(&p, &StateVector { s_s: 10.0, s_1: 0.0, s_2: 0.0 });
        assert_eq!(greedy_value(&rb, &act), 0.0);

        let low = rule_index((0, 0, 0), 5);
        let high = rule_index((1, 0, 0), 5);
        rb.set_q(low, 4, 7.0);
        rb.set_q(low, 9, -3.0);
        rb.set_q(high, 1, 2.5);
        // Brute-force maxima per rule.
        let expect = 0.2 * 7.0 + 0.8 * 2.5;
        assert_abs_diff_eq!(greedy_value(&rb, &act), expect, epsilon = 1e-12);

        let corner = activations(&p, &corner_state());
        assert_abs_diff_eq!(greedy_value(&rb, &corner), 7.0, epsilon = 1e-12);
    }

    #[test]
    fn td_update_zero_error_is_stationary() {
        let p = MembershipPartition::paper_default();
        let mut rb = RuleBase::paper_default();
        let act = activations(&p, &corner_state());
        let chosen = vec![0usize; rb.n_rules()];
        // gamma = 0 and reward equal to the current Q leaves the table fixed.
        let before = rb.clone();
        let err = td_update(&mut rb, &act, &chosen, 0.0, &act.clone(), 0.5, 0.0);
        assert_eq!(err, 0.0);
        assert_eq!(rb, before);
    }

    #[test]
    fn td_update_single_step_arithmetic() {
        let p = MembershipPartition::paper_default();
        let mut rb = RuleBase::paper_default();
        let act = activations(&p, &corner_state());
        let chosen = vec![5usize; rb.n_rules()];
        td_update(&mut rb, &act, &chosen, 10.0, &act.clone(), 0.5, 0.0);
        assert_abs_diff_eq!(rb.q(0, 5), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn td_update_two_rule_hand_case() {
        let p = MembershipPartition::paper_default();
        let mut rb = RuleBase::paper_default();
        let state = StateVector { s_s: 10.0, s_1: 0.0, s_2: 0.0 };
        let act = activations(&p, &state);
        // One-hot on rule (2, 2, 2), disjoint from the active rules.
        let next = activations(&p, &StateVector { s_s: 25.0, s_1: 25.0, s_2: 25.0 });
        let low = rule_index((0, 0, 0), 5);
        let high = rule_index((1, 0, 0), 5);
        let next_rule = rule_index((2, 2, 2), 5);
        rb.set_q(low, 2, 4.0);
        rb.set_q(high, 2, 1.0);
        rb.set_q(next_rule, 7, 3.0); // feeds the greedy value of the next state

        let mut chosen = vec![0usize; rb.n_rules()];
        chosen[low] = 2;
        chosen[high] = 2;
        // Hand computation: Q = 0.2*4 + 0.8*1 = 1.6; greedy(next) = 3;
        // error = 0.5 * (2 + 0.9*3 - 1.6) = 1.55.
        let err = td_update(&mut rb, &act, &chosen, 2.0, &next, 0.5, 0.9);
        assert_abs_diff_eq!(err, 1.55, epsilon = 1e-12);
        assert_abs_diff_eq!(rb.q(low, 2), 4.0 + 0.2 * 1.55, epsilon = 1e-12);
        assert_abs_diff_eq!(rb.q(high, 2), 1.0 + 0.8 * 1.55, epsilon = 1e-12);
    }

    #[test]
    fn td_update_touches_only_active_cells() {
        let p = MembershipPartition::paper_default();
        let mut rb = RuleBase::paper_default();
        for rule in 0..rb.n_rules() {
            for k in 0..rb.n_actions() {
                rb.set_q(rule, k, (rule * 11 + k) as f64 * 0.01);
            }
        }
        let act = activations(&p, &StateVector { s_s: 10.0, s_1: 30.0, s_2: 45.0 });
        let next = activations(&p, &StateVector { s_s: 5.0, s_1: 5.0, s_2: 5.0 });
        let chosen = vec![6usize; rb.n_rules()];
        let before = rb.clone();
        td_update(&mut rb, &act, &chosen, 42.0, &next, 0.5, 0.9);

        let touched: Vec<usize> = act.active().iter().map(|&(rule, _)| rule).collect();
        assert_eq!(touched.len(), 8);
        for rule in 0..rb.n_rules() {
            for k in 0..rb.n_actions() {
                let same = rb.q(rule, k).to_bits() == before.q(rule, k).to_bits();
                if touched.contains(&rule) && k == 6 {
                    assert!(!same, "active cell ({rule}, {k}) should have moved");
                } else {
                    assert!(same, "inactive cell ({rule}, {k}) changed");
                }
            }
        }
    }

    proptest! {
        // Strong partition: activation weights sum to one over the hull.
        #[test]
        fn partition_of_unity(
            s_s in 0.0..=50.0f64,
            s_1 in 0.0..=50.0f64,
            s_2 in 0.0..=50.0f64,
        ) {
            let p = MembershipPartition::paper_default();
            let act = activations(&p, &StateVector { s_s, s_1, s_2 });
            let total: f64 = act.active().iter().map(|(_, w)| w).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(act.active().len() <= 8);
            prop_assert!(act.active().iter().all(|&(_, w)| w > 0.0));
        }

        // Inferred actions stay inside the stored action range.
        #[test]
        fn inferred_action_bounds(
            s_s in 0.0..=50.0f64,
            s_1 in 0.0..=50.0f64,
            s_2 in 0.0..=50.0f64,
            k in 0usize..11,
        ) {
            let p = MembershipPartition::paper_default();
            let rb = RuleBase::paper_default();
            let act = activations(&p, &StateVector { s_s, s_1, s_2 });
            let chosen = vec![k; rb.n_rules()];
            let (a, _) = infer(&rb, &act, &chosen);
            prop_assert!((0.0..=50.0).contains(&a));
        }
    }
}
