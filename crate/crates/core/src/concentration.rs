//! Hoeffding error terms and per-objective union-bound budgets.
//!
//! Every empirical probability the collective estimates carries a penalty
//! R_δ(k) = √(ln(1/δ) / 2k). A guarantee that unions several such estimates
//! splits its failure budget δ across the participating concentration
//! events; the split depends on the objective.

use crate::error::{Error, Result};

/// R_δ(k) = √(ln(1/δ) / (2k)). Natural logarithm; any other base would
/// break the 1-δ coverage of Hoeffding's inequality.
pub fn hoeffding_term(delta_tilde: f64, k: u64) -> Result<f64> {
    if !(delta_tilde > 0.0 && delta_tilde <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "delta_tilde must be in (0,1], got {delta_tilde}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParams("sample count k must be positive".into()));
    }
    Ok(((1.0 / delta_tilde).ln() / (2.0 * k as f64)).sqrt())
}

/// Which guarantee the budget is split for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetObjective {
    PlantingFeatureLabel,
    PlantingFeatureOnly,
    Unplanting,
    Erasing,
}

/// Failure budget δ together with the cardinalities that determine how many
/// concentration events the guarantee unions over.
#[derive(Debug, Clone)]
pub struct ConfidenceBudget {
    pub delta: f64,
    pub objective: BudgetObjective,
    /// #X̃ — signal set cardinality.
    pub card_signal: u128,
    /// #Y — label count.
    pub card_labels: u128,
    /// #X — full feature space cardinality (erasing only).
    pub card_features: u128,
}

impl ConfidenceBudget {
    pub fn new(
        delta: f64,
        objective: BudgetObjective,
        card_signal: u128,
        card_labels: u128,
        card_features: u128,
    ) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidParams(format!("delta must be in (0,1], got {delta}")));
        }
        if card_signal == 0 || card_labels == 0 || card_features == 0 {
            return Err(Error::InvalidParams("cardinalities must be at least 1".into()));
        }
        Ok(Self { delta, objective, card_signal, card_labels, card_features })
    }

    /// Number of concentration events the objective unions over.
    pub fn event_count(&self) -> u128 {
        let s = self.card_signal;
        let y = self.card_labels;
        let x = self.card_features;
        match self.objective {
            // planting: 2 + 2#X̃ + 2#X̃#Y (identical for both strategies)
            BudgetObjective::PlantingFeatureLabel | BudgetObjective::PlantingFeatureOnly => {
                2 + 2 * s + 2 * s * y
            }
            // unplanting: 2 + 6#X̃
            BudgetObjective::Unplanting => 2 + 6 * s,
            // erasing: 2 + #X̃#Y + 2#X + 2#X#Y
            BudgetObjective::Erasing => 2 + s * y + 2 * x + 2 * x * y,
        }
    }
}

/// δ̃ = δ / event_count.
pub fn union_delta(budget: &ConfidenceBudget) -> f64 {
    budget.delta / budget.event_count() as f64
}

/// Inclusive range of collective sizes for which the erasure label
/// estimates are guaranteed correct. May be empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleWindow {
    pub n_min: u64,
    /// Signed: the upper edge can fall below zero when the slack exceeds N.
    pub n_max: i64,
}

impl SampleWindow {
    pub fn is_empty(&self) -> bool {
        self.n_max < self.n_min as i64
    }

    pub fn contains(&self, n: u64) -> bool {
        n >= self.n_min && n as i64 <= self.n_max
    }
}

/// Admissible collective sizes for the erasure guarantee:
/// 2 ln(1/δ̃)/η² ≤ n ≤ N − 2 ln(1/δ̃)/η², rounded inward since n is integral.
pub fn erasure_sample_window(delta_tilde: f64, eta: f64, n_consumers: u64) -> Result<SampleWindow> {
    if eta <= 0.0 {
        return Err(Error::InvalidParams(format!("eta must be positive, got {eta}")));
    }
    if !(delta_tilde > 0.0 && delta_tilde < 1.0) {
        return Err(Error::InvalidParams(format!(
            "delta_tilde must be in (0,1), got {delta_tilde}"
        )));
    }
    let slack = 2.0 * (1.0 / delta_tilde).ln() / (eta * eta);
    let n_min = (slack.ceil() as u64).max(1);
    let n_max = (n_consumers as f64 - slack).floor() as i64;
    Ok(SampleWindow { n_min, n_max })
}
