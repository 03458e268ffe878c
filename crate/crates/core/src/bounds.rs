//! Finite-sample lower bounds on the collective's success, their
//! infinite-data-regime limits, and the comparison against the earlier
//! population-level bound.
//!
//! Each finite-sample bound has the same shape: an empirical outer measure
//! over features, a per-feature indicator whose argument trades the
//! collective's planted mass against the base population's resistance plus
//! estimation penalties, and two global penalties subtracted at the end. A
//! feature whose indicator argument is strictly positive is "cracked" and
//! contributes its outer mass to the bound.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::Serialize;

use crate::concentration::{
    erasure_sample_window, hoeffding_term, union_delta, BudgetObjective, ConfidenceBudget,
};
use crate::error::{Error, Result};
use crate::strategies::{estimate_erasure_labels, estimate_unplant_labels, EscapeSelector,
    Transformation};
use crate::tabular::{empirical_joint, Cat, Dataset, JointCounts, LabelId, Role, Universe};

/// Experiment-level sizes and tolerances shared by the bound computations.
#[derive(Debug, Clone, Copy)]
pub struct BoundParams {
    /// N — total consumers whose data the platform trains on.
    pub n_consumers: u64,
    /// N_test — size of the held-out test set.
    pub n_test: u64,
    /// n — collective size.
    pub n_collective: u64,
    /// n_e — estimation split size (unplanting only).
    pub n_estimation: Option<u64>,
    /// Overall failure probability δ.
    pub delta: f64,
    /// Platform suboptimality ε in [0, 1).
    pub epsilon: f64,
    /// A1 margin η (erasing only).
    pub eta: Option<f64>,
}

impl BoundParams {
    fn validate(&self) -> Result<()> {
        if self.n_collective == 0 || self.n_collective >= self.n_consumers {
            return Err(Error::InvalidParams(format!(
                "need 0 < n < N, got n={} N={}",
                self.n_collective, self.n_consumers
            )));
        }
        if self.n_test == 0 {
            return Err(Error::InvalidParams("N_test must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidParams(format!("delta must be in (0,1], got {}", self.delta)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParams(format!(
                "epsilon must be in [0,1), got {}",
                self.epsilon
            )));
        }
        if let Some(ne) = self.n_estimation {
            if ne == 0 || ne >= self.n_collective {
                return Err(Error::InvalidParams(format!(
                    "need 0 < n_e < n, got n_e={ne} n={}",
                    self.n_collective
                )));
            }
        }
        Ok(())
    }

    fn epsilon_term(&self) -> f64 {
        self.epsilon / (1.0 - self.epsilon)
    }
}

/// One feature's verdict under the outer empirical measure.
#[derive(Debug, Clone, Serialize)]
pub struct FeatureVerdict {
    /// The feature tuple (category indices).
    pub feature: Vec<Cat>,
    /// Outer-measure mass of this feature.
    pub weight: f64,
    /// The indicator argument; the feature is cracked iff this is > 0.
    pub indicator: f64,
    pub cracked: bool,
}

/// The computed lower bound plus every intermediate quantity.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// Raw value; may be negative (a vacuously true bound).
    pub bound: f64,
    /// max(bound, 0) — what the success is actually compared against.
    pub bound_clamped: f64,
    /// Per-event budget; absent in the infinite data regime.
    pub delta_tilde: Option<f64>,
    /// Named estimation penalties; empty in the infinite data regime.
    pub r_terms: BTreeMap<String, f64>,
    /// Per-feature verdicts in canonical feature order.
    pub per_feature: Vec<FeatureVerdict>,
    /// ε / (1 − ε).
    pub epsilon_term: f64,
    /// Degenerate inputs worth flagging (population argmax ties, ...).
    pub warnings: Vec<String>,
}

impl BoundReport {
    pub fn cracked_count(&self) -> usize {
        self.per_feature.iter().filter(|f| f.cracked).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Header for the one-line CSV form used in sweep output.
    pub fn csv_header() -> &'static str {
        "n,bound,bound_clamped,delta_tilde,R_n,R_Nmn,R_Ntest,n_cracked"
    }

    /// One CSV row; floats carry 17 significant digits so they round-trip.
    pub fn csv_row(&self, n: u64) -> String {
        let r = |key: &str| self.r_terms.get(key).copied().unwrap_or(0.0);
        format!(
            "{n},{},{},{},{},{},{},{}",
            fmt_f64(self.bound),
            fmt_f64(self.bound_clamped),
            fmt_f64(self.delta_tilde.unwrap_or(f64::NAN)),
            fmt_f64(r("R(n)")),
            fmt_f64(r("R(N-n)")),
            fmt_f64(r("R(N_test)")),
            self.cracked_count()
        )
    }
}

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct GroupedRow {
    key: Box<[Cat]>,
    count: u64,
    /// First-term probability inside the indicator.
    first: f64,
    /// Empirical resistance Δ of this feature.
    delta_hat: f64,
}

/// Shared tail of all four finite-sample bounds.
fn finish_report(
    mut rows: Vec<GroupedRow>,
    params: &BoundParams,
    delta_tilde: f64,
    r_terms: BTreeMap<String, f64>,
    mid_penalty: f64,
) -> BoundReport {
    rows.sort_unstable_by(|a, b| a.key.cmp(&b.key));
    let n = params.n_collective as f64;
    let big_n = params.n_consumers as f64;
    let share = n / big_n;
    let rest_share = (params.n_consumers - params.n_collective) as f64 / big_n;
    let r_n = r_terms["R(n)"];
    let eps = params.epsilon_term();

    let mut per_feature = Vec::with_capacity(rows.len());
    let mut cracked_mass = 0.0;
    for row in &rows {
        let weight = row.count as f64 / n;
        let indicator =
            share * (row.first - 2.0 * r_n) - rest_share * (row.delta_hat + mid_penalty) - eps;
        let cracked = indicator > 0.0;
        if cracked {
            cracked_mass += weight;
        }
        per_feature.push(FeatureVerdict {
            feature: row.key.to_vec(),
            weight,
            indicator,
            cracked,
        });
    }
    let bound = cracked_mass - r_n - r_terms["R(N_test)"];
    BoundReport {
        bound,
        bound_clamped: bound.max(0.0),
        delta_tilde: Some(delta_tilde),
        r_terms,
        per_feature,
        epsilon_term: eps,
        warnings: Vec::new(),
    }
}

fn base_r_terms(delta_tilde: f64, params: &BoundParams) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    map.insert("R(n)".into(), hoeffding_term(delta_tilde, params.n_collective)?);
    map.insert(
        "R(N-n)".into(),
        hoeffding_term(delta_tilde, params.n_consumers - params.n_collective)?,
    );
    map.insert("R(N_test)".into(), hoeffding_term(delta_tilde, params.n_test)?);
    Ok(map)
}

fn check_collective(d: &Dataset, params: &BoundParams) -> Result<()> {
    if d.role() != Role::Collective {
        return Err(Error::InvalidParams(format!(
            "expected a collective-role dataset, got {:?}",
            d.role()
        )));
    }
    if d.len() as u64 != params.n_collective {
        return Err(Error::InvalidParams(format!(
            "dataset has {} samples but params say n={}",
            d.len(),
            params.n_collective
        )));
    }
    Ok(())
}

fn check_label(universe: &Universe, y_star: LabelId) -> Result<()> {
    if y_star as usize >= universe.num_labels() {
        return Err(Error::InvalidParams(format!("target label {y_star} out of range")));
    }
    Ok(())
}

/// Resistance of x̃ against planting y*: max over y' ≠ y* of
/// P̂(x̃, y') − P̂(x̃, y*), all under `counts`.
fn planting_resistance(
    counts: &JointCounts,
    x: &[Cat],
    y_star: LabelId,
    n_labels: LabelId,
) -> f64 {
    let p_star = counts.pair_prob(x, y_star);
    (0..n_labels)
        .filter(|&y| y != y_star)
        .map(|y| counts.pair_prob(x, y) - p_star)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Success lower bound for feature-label planting.
pub fn planting_bound_fl(
    d_collective: &Dataset,
    g: &Transformation,
    y_star: LabelId,
    params: &BoundParams,
) -> Result<BoundReport> {
    params.validate()?;
    check_collective(d_collective, params)?;
    let universe = d_collective.universe();
    check_label(universe, y_star)?;
    let n_labels = universe.num_labels() as LabelId;

    let budget = ConfidenceBudget::new(
        params.delta,
        BudgetObjective::PlantingFeatureLabel,
        g.signal_cardinality(universe),
        n_labels as u128,
        universe.feature_cardinality(),
    )?;
    let delta_tilde = union_delta(&budget);
    let r_terms = base_r_terms(delta_tilde, params)?;
    let mid = 2.0 * r_terms["R(n)"] + 2.0 * r_terms["R(N-n)"];

    let counts = empirical_joint(d_collective)?;
    let n = params.n_collective as f64;
    let mut groups: HashMap<Box<[Cat]>, u64> = HashMap::new();
    for (x, _) in d_collective.iter() {
        *groups.entry(Box::from(g.apply(x).as_slice())).or_insert(0) += 1;
    }
    let rows = groups
        .into_iter()
        .map(|(key, count)| {
            let delta_hat = planting_resistance(&counts, &key, y_star, n_labels);
            GroupedRow { first: count as f64 / n, key, count, delta_hat }
        })
        .collect();
    Ok(finish_report(rows, params, delta_tilde, r_terms, mid))
}

/// Success lower bound for feature-only planting. The escape selector does
/// not enter the numbers — any valid relocation leaves the signal set — but
/// it must exist for the strategy to be playable.
pub fn planting_bound_fo(
    d_collective: &Dataset,
    g: &Transformation,
    y_star: LabelId,
    escape: &EscapeSelector,
    params: &BoundParams,
) -> Result<BoundReport> {
    params.validate()?;
    check_collective(d_collective, params)?;
    let universe = d_collective.universe();
    check_label(universe, y_star)?;
    escape.validate(g, universe)?;
    let n_labels = universe.num_labels() as LabelId;

    let budget = ConfidenceBudget::new(
        params.delta,
        BudgetObjective::PlantingFeatureOnly,
        g.signal_cardinality(universe),
        n_labels as u128,
        universe.feature_cardinality(),
    )?;
    let delta_tilde = union_delta(&budget);
    let r_terms = base_r_terms(delta_tilde, params)?;
    let mid = 2.0 * r_terms["R(n)"] + 2.0 * r_terms["R(N-n)"];

    let counts = empirical_joint(d_collective)?;
    let n = params.n_collective as f64;
    // per signal feature: total pushed mass and the part that keeps y*
    let mut groups: HashMap<Box<[Cat]>, (u64, u64)> = HashMap::new();
    for (x, y) in d_collective.iter() {
        let e = groups.entry(Box::from(g.apply(x).as_slice())).or_insert((0, 0));
        e.0 += 1;
        if y == y_star {
            e.1 += 1;
        }
    }
    let rows = groups
        .into_iter()
        .map(|(key, (count, kept))| {
            let delta_hat = planting_resistance(&counts, &key, y_star, n_labels);
            GroupedRow { first: kept as f64 / n, key, count, delta_hat }
        })
        .collect();
    Ok(finish_report(rows, params, delta_tilde, r_terms, mid))
}

fn unplanting_bound_inner(
    d_estimation: &Dataset,
    d_rest: &Dataset,
    g: &Transformation,
    y_star: LabelId,
    params: &BoundParams,
    sharp: bool,
) -> Result<BoundReport> {
    params.validate()?;
    let n_e = params
        .n_estimation
        .ok_or_else(|| Error::InvalidParams("unplanting needs n_e".into()))?;
    if d_estimation.len() as u64 != n_e
        || d_rest.len() as u64 != params.n_collective - n_e
    {
        return Err(Error::InvalidParams(format!(
            "split sizes ({}, {}) inconsistent with n={} n_e={}",
            d_estimation.len(),
            d_rest.len(),
            params.n_collective,
            n_e
        )));
    }
    if !Arc::ptr_eq(d_estimation.universe(), d_rest.universe()) {
        return Err(Error::UniverseMismatch);
    }
    let universe = d_estimation.universe();
    check_label(universe, y_star)?;
    let n_labels = universe.num_labels() as LabelId;

    let budget = ConfidenceBudget::new(
        params.delta,
        BudgetObjective::Unplanting,
        g.signal_cardinality(universe),
        n_labels as u128,
        universe.feature_cardinality(),
    )?;
    let delta_tilde = union_delta(&budget);
    let mut r_terms = base_r_terms(delta_tilde, params)?;
    let r_rest_split = hoeffding_term(delta_tilde, params.n_collective - n_e)?;
    r_terms.insert("R(n-n_e)".into(), r_rest_split);
    let mid = if sharp {
        r_terms["R(n)"] + r_rest_split + 2.0 * r_terms["R(N-n)"]
    } else {
        2.0 * r_rest_split + 2.0 * r_terms["R(N-n)"]
    };

    let table = estimate_unplant_labels(d_estimation, g, y_star)?;
    let rest_counts = empirical_joint(d_rest)?;
    // only used by the sharp variant, where the y* term is estimated on the
    // full collective data
    let full_counts;
    let star_counts = if sharp {
        full_counts = empirical_joint(&d_estimation.concat(d_rest, Role::Collective)?)?;
        &full_counts
    } else {
        &rest_counts
    };

    let n = params.n_collective as f64;
    let mut groups: HashMap<Box<[Cat]>, u64> = HashMap::new();
    for (x, _) in d_estimation.iter().chain(d_rest.iter()) {
        *groups.entry(Box::from(g.apply(x).as_slice())).or_insert(0) += 1;
    }
    let rows = groups
        .into_iter()
        .map(|(key, count)| {
            let y_hat = table.lookup(&key).expect("table has a default").0;
            let delta_hat =
                star_counts.pair_prob(&key, y_star) - rest_counts.pair_prob(&key, y_hat);
            GroupedRow { first: count as f64 / n, key, count, delta_hat }
        })
        .collect();
    Ok(finish_report(rows, params, delta_tilde, r_terms, mid))
}

/// Success lower bound for adaptive unplanting: labels are estimated on the
/// estimation split, resistances on the remainder.
pub fn unplanting_bound(
    d_estimation: &Dataset,
    d_rest: &Dataset,
    g: &Transformation,
    y_star: LabelId,
    params: &BoundParams,
) -> Result<BoundReport> {
    unplanting_bound_inner(d_estimation, d_rest, g, y_star, params, false)
}

/// Variant that estimates the y* term on the full collective data instead
/// of the remainder, trading one R(n−n_e) penalty for an R(n). Slightly
/// tighter; kept separate because the default matches the reported curves.
pub fn unplanting_bound_sharp(
    d_estimation: &Dataset,
    d_rest: &Dataset,
    g: &Transformation,
    y_star: LabelId,
    params: &BoundParams,
) -> Result<BoundReport> {
    unplanting_bound_inner(d_estimation, d_rest, g, y_star, params, true)
}

/// Naive unplanting: plant some fixed y' ≠ y* instead. Runs the
/// feature-label planting bound once per candidate and returns the best;
/// ties go to the lowest label index.
pub fn naive_unplanting_bound(
    d_collective: &Dataset,
    g: &Transformation,
    y_star: LabelId,
    params: &BoundParams,
) -> Result<(LabelId, BoundReport)> {
    let universe = d_collective.universe();
    check_label(universe, y_star)?;
    let n_labels = universe.num_labels() as LabelId;
    let mut best: Option<(LabelId, BoundReport)> = None;
    for y in (0..n_labels).filter(|&y| y != y_star) {
        let report = planting_bound_fl(d_collective, g, y, params)?;
        match &best {
            Some((_, b)) if report.bound <= b.bound => {}
            _ => best = Some((y, report)),
        }
    }
    best.ok_or_else(|| Error::InvalidParams("no label other than the target exists".into()))
}

/// Success lower bound for signal erasing. Requires n inside the admissible
/// window for the declared margin η.
pub fn erasing_bound(
    d_collective: &Dataset,
    g: &Transformation,
    params: &BoundParams,
) -> Result<BoundReport> {
    params.validate()?;
    check_collective(d_collective, params)?;
    let eta = params
        .eta
        .ok_or_else(|| Error::InvalidParams("erasing needs the margin eta".into()))?;
    let universe = d_collective.universe();
    let n_labels = universe.num_labels() as LabelId;

    let budget = ConfidenceBudget::new(
        params.delta,
        BudgetObjective::Erasing,
        g.signal_cardinality(universe),
        n_labels as u128,
        universe.feature_cardinality(),
    )?;
    let delta_tilde = union_delta(&budget);
    let window = erasure_sample_window(delta_tilde, eta, params.n_consumers)?;
    if !window.contains(params.n_collective) {
        return Err(Error::ErasureWindow {
            n: params.n_collective,
            n_min: window.n_min,
            n_max: window.n_max.max(0) as u64,
        });
    }
    let r_terms = base_r_terms(delta_tilde, params)?;
    let mid = 2.0 * r_terms["R(n)"] + 2.0 * r_terms["R(N-n)"];

    let table = estimate_erasure_labels(d_collective, g)?;
    let counts = empirical_joint(d_collective)?;
    let n = params.n_collective as f64;
    let mut groups: HashMap<Box<[Cat]>, u64> = HashMap::new();
    for (x, _) in d_collective.iter() {
        *groups.entry(Box::from(x)).or_insert(0) += 1;
    }
    let rows = groups
        .into_iter()
        .map(|(key, count)| {
            let y_best = table.lookup(&g.apply(&key)).expect("table covers g(x)").0;
            let delta_hat = planting_resistance(&counts, &key, y_best, n_labels);
            GroupedRow { first: count as f64 / n, key, count, delta_hat }
        })
        .collect();
    Ok(finish_report(rows, params, delta_tilde, r_terms, mid))
}

// ---------------------------------------------------------------------------
// Infinite data regime
// ---------------------------------------------------------------------------

/// A population joint distribution over the universe, stored sparsely.
#[derive(Debug, Clone)]
pub struct PopulationDistribution {
    universe: Arc<Universe>,
    cells: HashMap<(Box<[Cat]>, LabelId), f64>,
    feature_marginals: HashMap<Box<[Cat]>, f64>,
}

impl PopulationDistribution {
    pub fn new(
        universe: Arc<Universe>,
        cells: impl IntoIterator<Item = (Vec<Cat>, LabelId, f64)>,
    ) -> Result<Self> {
        let mut map: HashMap<(Box<[Cat]>, LabelId), f64> = HashMap::new();
        let mut marginals: HashMap<Box<[Cat]>, f64> = HashMap::new();
        let mut total = 0.0;
        for (x, y, p) in cells {
            universe.validate_sample(&x, y)?;
            if !(p >= 0.0) {
                return Err(Error::InvalidDistribution(format!(
                    "negative or NaN probability {p}"
                )));
            }
            if p == 0.0 {
                continue;
            }
            total += p;
            *map.entry((Box::from(x.as_slice()), y)).or_insert(0.0) += p;
            *marginals.entry(Box::from(x.as_slice())).or_insert(0.0) += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { universe, cells: map, feature_marginals: marginals })
    }

    /// Treat an empirical distribution as the population.
    pub fn from_counts(counts: &JointCounts) -> Self {
        let total = counts.total() as f64;
        let mut cells = HashMap::new();
        let mut marginals = HashMap::new();
        for (x, y, c) in counts.cells() {
            cells.insert((Box::from(x), y), c as f64 / total);
        }
        for x in counts.sorted_features() {
            marginals.insert(Box::from(x), counts.feature_count(x) as f64 / total);
        }
        Self { universe: counts.universe().clone(), cells, feature_marginals: marginals }
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn pair_prob(&self, x: &[Cat], y: LabelId) -> f64 {
        self.cells.get(&(Box::from(x), y)).copied().unwrap_or(0.0)
    }

    pub fn feature_prob(&self, x: &[Cat]) -> f64 {
        self.feature_marginals.get(x).copied().unwrap_or(0.0)
    }

    fn sorted_support(&self) -> Vec<&[Cat]> {
        let mut v: Vec<&[Cat]> = self.feature_marginals.keys().map(|k| k.as_ref()).collect();
        v.sort_unstable();
        v
    }
}

/// Objective for the infinite-data-regime bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdrObjective {
    PlantFeatureLabel { y_star: LabelId },
    PlantFeatureOnly { y_star: LabelId },
    Unplant { y_star: LabelId },
    Erase,
}

struct IdrRow {
    key: Box<[Cat]>,
    weight: f64,
    first: f64,
    delta: f64,
}

/// Population argmax of the joint at x over all labels. Flags ties.
fn population_argmax(
    dist: &PopulationDistribution,
    x: &[Cat],
    skip: Option<LabelId>,
) -> (LabelId, bool) {
    let n_labels = dist.universe.num_labels() as LabelId;
    let mut best: Option<(LabelId, f64)> = None;
    let mut tied = false;
    for y in (0..n_labels).filter(|&y| Some(y) != skip) {
        let p = dist.pair_prob(x, y);
        match best {
            Some((_, bp)) if p > bp => {
                best = Some((y, p));
                tied = false;
            }
            Some((_, bp)) if p == bp => tied = true,
            None => best = Some((y, p)),
            _ => {}
        }
    }
    (best.expect("labels >= 2").0, tied)
}

fn idr_precompute(
    dist: &PopulationDistribution,
    g: &Transformation,
    objective: IdrObjective,
) -> Result<(Vec<IdrRow>, Vec<String>)> {
    let universe = &dist.universe;
    let n_labels = universe.num_labels() as LabelId;
    let mut warnings = Vec::new();

    let rows = match objective {
        IdrObjective::PlantFeatureLabel { y_star }
        | IdrObjective::PlantFeatureOnly { y_star }
        | IdrObjective::Unplant { y_star } => {
            check_label(universe, y_star)?;
            // push the feature marginal (and for feature-only, the y* slice)
            // through g
            let mut push: BTreeMap<Box<[Cat]>, (f64, f64)> = BTreeMap::new();
            for x in dist.sorted_support() {
                let key = Box::from(g.apply(x).as_slice());
                let e = push.entry(key).or_insert((0.0, 0.0));
                e.0 += dist.feature_prob(x);
                e.1 += dist.pair_prob(x, y_star);
            }
            push.into_iter()
                .map(|(key, (mass, star_mass))| {
                    let (first, delta) = match objective {
                        IdrObjective::PlantFeatureLabel { .. } => (
                            mass,
                            (0..n_labels)
                                .filter(|&y| y != y_star)
                                .map(|y| dist.pair_prob(&key, y) - dist.pair_prob(&key, y_star))
                                .fold(f64::NEG_INFINITY, f64::max),
                        ),
                        IdrObjective::PlantFeatureOnly { .. } => (
                            star_mass,
                            (0..n_labels)
                                .filter(|&y| y != y_star)
                                .map(|y| dist.pair_prob(&key, y) - dist.pair_prob(&key, y_star))
                                .fold(f64::NEG_INFINITY, f64::max),
                        ),
                        IdrObjective::Unplant { .. } => {
                            let (y_hat, tied) = population_argmax(dist, &key, Some(y_star));
                            if tied {
                                warnings.push(format!(
                                    "degenerate margin: tied argmax at {}",
                                    universe.display_features(&key).join("/")
                                ));
                            }
                            (
                                mass,
                                dist.pair_prob(&key, y_star) - dist.pair_prob(&key, y_hat),
                            )
                        }
                        IdrObjective::Erase => unreachable!(),
                    };
                    IdrRow { key, weight: mass, first, delta }
                })
                .collect()
        }
        IdrObjective::Erase => {
            // the best label per signal feature, from the population itself
            let mut best_labels: HashMap<Box<[Cat]>, LabelId> = HashMap::new();
            let mut out = Vec::new();
            for x in dist.sorted_support() {
                let gx = g.apply(x);
                let y_best = *best_labels.entry(Box::from(gx.as_slice())).or_insert_with(|| {
                    let (y, tied) = population_argmax(dist, &gx, None);
                    if tied {
                        warnings.push(format!(
                            "degenerate margin: tied argmax at {}",
                            universe.display_features(&gx).join("/")
                        ));
                    }
                    y
                });
                let mass = dist.feature_prob(x);
                let delta = (0..n_labels)
                    .filter(|&y| y != y_best)
                    .map(|y| dist.pair_prob(x, y) - dist.pair_prob(x, y_best))
                    .fold(f64::NEG_INFINITY, f64::max);
                out.push(IdrRow { key: Box::from(x), weight: mass, first: mass, delta });
            }
            out
        }
    };
    Ok((rows, warnings))
}

fn idr_assemble(
    rows: &[IdrRow],
    warnings: &[String],
    alpha: f64,
    epsilon: f64,
) -> Result<BoundReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParams(format!("alpha must be in (0,1), got {alpha}")));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidParams(format!("epsilon must be in [0,1), got {epsilon}")));
    }
    let eps = epsilon / (1.0 - epsilon);
    let mut per_feature = Vec::with_capacity(rows.len());
    let mut bound = 0.0;
    for row in rows {
        let indicator = alpha * row.first - (1.0 - alpha) * row.delta - eps;
        let cracked = indicator > 0.0;
        if cracked {
            bound += row.weight;
        }
        per_feature.push(FeatureVerdict {
            feature: row.key.to_vec(),
            weight: row.weight,
            indicator,
            cracked,
        });
    }
    Ok(BoundReport {
        bound,
        bound_clamped: bound.max(0.0),
        delta_tilde: None,
        r_terms: BTreeMap::new(),
        per_feature,
        epsilon_term: eps,
        warnings: warnings.to_vec(),
    })
}

/// Success lower bound in the infinite data regime: no estimation
/// penalties, exact population quantities.
pub fn idr_bound(
    dist: &PopulationDistribution,
    g: &Transformation,
    objective: IdrObjective,
    alpha: f64,
    epsilon: f64,
) -> Result<BoundReport> {
    let (rows, warnings) = idr_precompute(dist, g, objective)?;
    idr_assemble(&rows, &warnings, alpha, epsilon)
}

/// The same bound over a grid of collective shares; the per-feature
/// quantities are computed once.
pub fn idr_curve(
    dist: &PopulationDistribution,
    g: &Transformation,
    objective: IdrObjective,
    epsilon: f64,
    alphas: &[f64],
) -> Result<Vec<BoundReport>> {
    let (rows, warnings) = idr_precompute(dist, g, objective)?;
    alphas.iter().map(|&a| idr_assemble(&rows, &warnings, a, epsilon)).collect()
}

/// The earlier population-level planting bound:
/// 1 − ((1−α)/α)·P(X̃)·max_{x̃} max_y (P(y|x̃) − P(y*|x̃)).
/// Conditionals are evaluated only on positive-mass signal features; with
/// no such feature the max term is vacuous and the bound is 1. The result
/// may be negative (vacuous); it never exceeds 1.
pub fn prior_bound_planting(
    dist: &PopulationDistribution,
    g: &Transformation,
    y_star: LabelId,
    alpha: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParams(format!("alpha must be in (0,1), got {alpha}")));
    }
    let universe = &dist.universe;
    check_label(universe, y_star)?;
    let n_labels = universe.num_labels() as LabelId;
    let mut signal_mass = 0.0;
    let mut max_term = f64::NEG_INFINITY;
    for x in dist.sorted_support() {
        if !g.in_signal_set(x) {
            continue;
        }
        let mass = dist.feature_prob(x);
        if mass <= 0.0 {
            continue;
        }
        signal_mass += mass;
        let p_star = dist.pair_prob(x, y_star) / mass;
        for y in 0..n_labels {
            max_term = max_term.max(dist.pair_prob(x, y) / mass - p_star);
        }
    }
    if max_term == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    let bound = 1.0 - (1.0 - alpha) / alpha * signal_mass * max_term;
    Ok(bound.min(1.0))
}
