//! Feature transformations, signal sets, and the data-modification
//! strategies a coordinated collective can play.
//!
//! A transformation g fixes a subset of features to forced categories and
//! passes the rest through. Its image is the signal set X̃. Feature-fixing
//! maps are idempotent by construction, which the erasure guarantee relies
//! on.

use std::collections::{BTreeMap, HashMap};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::tabular::{empirical_joint, Cat, Dataset, JointCounts, LabelId, Role, Universe};

/// A feature-fixing map g: X -> X.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transformation {
    /// feature index -> forced category, sorted by feature index.
    fixed: BTreeMap<usize, Cat>,
}

impl Transformation {
    pub fn new(universe: &Universe, fixed: &[(usize, Cat)]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for &(idx, cat) in fixed {
            if idx >= universe.num_features() {
                return Err(Error::InvalidParams(format!("feature index {idx} out of range")));
            }
            if cat as usize >= universe.feature(idx).cardinality() {
                return Err(Error::InvalidParams(format!(
                    "category {cat} out of range for feature {}",
                    universe.feature(idx).name
                )));
            }
            if map.insert(idx, cat).is_some() {
                return Err(Error::InvalidParams(format!("feature index {idx} fixed twice")));
            }
        }
        Ok(Self { fixed: map })
    }

    /// The identity map (fixes nothing).
    pub fn identity() -> Self {
        Self { fixed: BTreeMap::new() }
    }

    pub fn fixed_features(&self) -> impl Iterator<Item = (usize, Cat)> + '_ {
        self.fixed.iter().map(|(&i, &c)| (i, c))
    }

    pub fn num_fixed(&self) -> usize {
        self.fixed.len()
    }

    pub fn apply_in_place(&self, x: &mut [Cat]) {
        for (&idx, &cat) in &self.fixed {
            x[idx] = cat;
        }
    }

    pub fn apply(&self, x: &[Cat]) -> Vec<Cat> {
        let mut out = x.to_vec();
        self.apply_in_place(&mut out);
        out
    }

    /// Whether x lies in the signal set, i.e. g(x) = x.
    pub fn in_signal_set(&self, x: &[Cat]) -> bool {
        self.fixed.iter().all(|(&idx, &cat)| x[idx] == cat)
    }

    /// #X̃ = product of category counts of the unfixed features.
    pub fn signal_cardinality(&self, universe: &Universe) -> u128 {
        (0..universe.num_features())
            .filter(|i| !self.fixed.contains_key(i))
            .fold(1u128, |acc, i| {
                acc.saturating_mul(universe.feature(i).cardinality() as u128)
            })
    }

    /// Enumerate X̃ in canonical order (unfixed features count up like an
    /// odometer, last feature fastest). Only call when #X̃ is small.
    pub fn signal_set(&self, universe: &Universe) -> SignalSetIter {
        let mut base = vec![0 as Cat; universe.num_features()];
        self.apply_in_place(&mut base);
        let free: Vec<(usize, usize)> = (0..universe.num_features())
            .filter(|i| !self.fixed.contains_key(i))
            .map(|i| (i, universe.feature(i).cardinality()))
            .collect();
        SignalSetIter { current: base, free, done: false }
    }

    /// Serialize as `{"fix": {"feature-name": "category-name", ...}}`.
    pub fn to_json(&self, universe: &Universe) -> Value {
        let mut fix = serde_json::Map::new();
        for (&idx, &cat) in &self.fixed {
            let f = universe.feature(idx);
            fix.insert(f.name.clone(), Value::String(f.categories[cat as usize].clone()));
        }
        json!({ "fix": fix })
    }

    pub fn from_json(value: &Value, universe: &Universe) -> Result<Self> {
        let fix = value
            .get("fix")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::InvalidParams("expected {\"fix\": {...}}".into()))?;
        let mut pairs = Vec::with_capacity(fix.len());
        for (name, cat_name) in fix {
            let idx = universe
                .feature_index(name)
                .ok_or_else(|| Error::UnknownCategory(name.clone()))?;
            let cat_name = cat_name
                .as_str()
                .ok_or_else(|| Error::InvalidParams(format!("category for {name} not a string")))?;
            let cat = universe
                .feature(idx)
                .category_id(cat_name)
                .ok_or_else(|| Error::UnknownCategory(format!("{name}={cat_name}")))?;
            pairs.push((idx, cat));
        }
        Transformation::new(universe, &pairs)
    }
}

/// Iterator over the signal set of a transformation.
pub struct SignalSetIter {
    current: Vec<Cat>,
    free: Vec<(usize, usize)>,
    done: bool,
}

impl SignalSetIter {
    fn advance(&mut self) {
        for &(idx, card) in self.free.iter().rev() {
            let next = self.current[idx] as usize + 1;
            if next < card {
                self.current[idx] = next as Cat;
                return;
            }
            self.current[idx] = 0;
        }
        self.done = true;
    }
}

impl Iterator for SignalSetIter {
    type Item = Vec<Cat>;

    fn next(&mut self) -> Option<Vec<Cat>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        self.advance();
        Some(out)
    }
}

/// How the feature-only strategy relocates samples whose label must stay.
#[derive(Debug, Clone)]
pub enum EscapeSelector {
    /// Flip the first fixed feature of g(x) to the smallest category that
    /// differs from the forced one. Deterministic, varies with x.
    FlipFixed,
    /// One constant vector outside the signal set, used for every sample.
    Constant(Vec<Cat>),
}

impl EscapeSelector {
    /// Validate that an escape exists and, for the constant mode, that the
    /// chosen vector is actually outside the signal set.
    pub fn validate(&self, g: &Transformation, universe: &Universe) -> Result<()> {
        match self {
            EscapeSelector::FlipFixed => {
                if g.num_fixed() == 0 {
                    return Err(Error::NoEscapeFeature);
                }
                Ok(())
            }
            EscapeSelector::Constant(x0) => {
                universe.validate_features(x0)?;
                if g.in_signal_set(x0) {
                    return Err(Error::NoEscapeFeature);
                }
                Ok(())
            }
        }
    }

    pub fn escape(&self, g: &Transformation, x: &[Cat]) -> Vec<Cat> {
        match self {
            EscapeSelector::FlipFixed => {
                let mut out = g.apply(x);
                let (idx, forced) =
                    g.fixed_features().next().expect("validated: at least one fixed feature");
                out[idx] = if forced == 0 { 1 } else { 0 };
                debug_assert!(!g.in_signal_set(&out));
                out
            }
            EscapeSelector::Constant(x0) => x0.clone(),
        }
    }
}

/// Whether a table label came from data or from the documented default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coverage {
    Estimated,
    Defaulted,
}

/// Per-signal-feature label assignments produced by the estimators.
#[derive(Debug, Clone)]
pub struct LabelTable {
    entries: HashMap<Box<[Cat]>, (LabelId, Coverage)>,
    default: Option<LabelId>,
}

impl LabelTable {
    pub fn lookup(&self, x: &[Cat]) -> Option<(LabelId, Coverage)> {
        self.entries
            .get(x)
            .copied()
            .or(self.default.map(|y| (y, Coverage::Defaulted)))
    }

    pub fn entry(&self, x: &[Cat]) -> Option<(LabelId, Coverage)> {
        self.entries.get(x).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[Cat], LabelId, Coverage)> + '_ {
        self.entries.iter().map(|(x, &(y, c))| (x.as_ref(), y, c))
    }
}

fn check_roles(dataset: &Dataset, allowed: &[Role]) -> Result<()> {
    if allowed.contains(&dataset.role()) {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "dataset role {:?} not usable here (expected one of {allowed:?})",
            dataset.role()
        )))
    }
}

/// Feature-label planting: h(x, y) = (g(x), y*).
pub fn apply_feature_label(
    dataset: &Dataset,
    g: &Transformation,
    y_star: LabelId,
) -> Result<Dataset> {
    check_roles(dataset, &[Role::Collective])?;
    let universe = dataset.universe();
    if y_star as usize >= universe.num_labels() {
        return Err(Error::InvalidParams(format!("target label {y_star} out of range")));
    }
    let mut out =
        Dataset::with_capacity(universe.clone(), Role::CollectiveModified, dataset.len());
    let mut buf = vec![0 as Cat; universe.num_features()];
    for (x, _) in dataset.iter() {
        buf.copy_from_slice(x);
        g.apply_in_place(&mut buf);
        out.push_unchecked(&buf, y_star);
    }
    Ok(out)
}

/// Feature-only planting: labels are immutable, so samples with y = y* move
/// into the signal set and every other sample is relocated outside it.
pub fn apply_feature_only(
    dataset: &Dataset,
    g: &Transformation,
    y_star: LabelId,
    escape: &EscapeSelector,
) -> Result<Dataset> {
    check_roles(dataset, &[Role::Collective])?;
    let universe = dataset.universe();
    if y_star as usize >= universe.num_labels() {
        return Err(Error::InvalidParams(format!("target label {y_star} out of range")));
    }
    escape.validate(g, universe)?;
    let mut out =
        Dataset::with_capacity(universe.clone(), Role::CollectiveModified, dataset.len());
    let mut buf = vec![0 as Cat; universe.num_features()];
    for (x, y) in dataset.iter() {
        if y == y_star {
            buf.copy_from_slice(x);
            g.apply_in_place(&mut buf);
            out.push_unchecked(&buf, y_star);
        } else {
            out.push_unchecked(&escape.escape(g, x), y);
        }
    }
    Ok(out)
}

/// argmax over the given labels of the joint count at x̃; ties break to the
/// lowest label index. Returns the winning count as well.
fn argmax_label(
    counts: &JointCounts,
    x: &[Cat],
    labels: impl Iterator<Item = LabelId>,
) -> Option<(LabelId, u64)> {
    let mut best: Option<(LabelId, u64)> = None;
    for y in labels {
        let c = counts.count(x, y);
        match best {
            Some((_, bc)) if c <= bc => {}
            _ => best = Some((y, c)),
        }
    }
    best
}

/// Estimate, per observed signal feature, the most frequent label other
/// than y* in the estimation split. Unseen signal features fall back to the
/// first non-y* label, flagged as defaulted.
pub fn estimate_unplant_labels(
    d_estimation: &Dataset,
    g: &Transformation,
    y_star: LabelId,
) -> Result<LabelTable> {
    check_roles(d_estimation, &[Role::EstimationSplit])?;
    let universe = d_estimation.universe();
    let n_labels = universe.num_labels() as LabelId;
    if y_star >= n_labels {
        return Err(Error::InvalidParams(format!("target label {y_star} out of range")));
    }
    let default = (0..n_labels).find(|&y| y != y_star);
    if default.is_none() {
        return Err(Error::InvalidParams("no label other than the target exists".into()));
    }
    let counts = empirical_joint(d_estimation)?;
    let mut entries = HashMap::new();
    for x in counts.sorted_features() {
        if !g.in_signal_set(x) {
            continue;
        }
        let (y, c) =
            argmax_label(&counts, x, (0..n_labels).filter(|&y| y != y_star)).expect("labels >= 2");
        let coverage = if c > 0 { Coverage::Estimated } else { Coverage::Defaulted };
        entries.insert(Box::from(x), (y, coverage));
    }
    Ok(LabelTable { entries, default })
}

/// Unplanting: h(x, y) = (g(x), ŷ_{g(x)}).
pub fn apply_unplanting(
    dataset: &Dataset,
    g: &Transformation,
    table: &LabelTable,
) -> Result<Dataset> {
    check_roles(dataset, &[Role::Collective])?;
    let universe = dataset.universe();
    let mut out =
        Dataset::with_capacity(universe.clone(), Role::CollectiveModified, dataset.len());
    let mut buf = vec![0 as Cat; universe.num_features()];
    for (x, _) in dataset.iter() {
        buf.copy_from_slice(x);
        g.apply_in_place(&mut buf);
        let (y, _) = table.lookup(&buf).ok_or_else(|| {
            Error::MissingTableEntry(universe.display_features(&buf).join("/"))
        })?;
        out.push_unchecked(&buf, y);
    }
    Ok(out)
}

/// Estimate, per signal feature reachable from the collective's data, the
/// unrestricted most frequent label. Used by the erasure strategy.
pub fn estimate_erasure_labels(d_collective: &Dataset, g: &Transformation) -> Result<LabelTable> {
    check_roles(d_collective, &[Role::Collective])?;
    let universe = d_collective.universe();
    let n_labels = universe.num_labels() as LabelId;
    let counts = empirical_joint(d_collective)?;
    let mut entries: HashMap<Box<[Cat]>, (LabelId, Coverage)> = HashMap::new();
    let mut buf = vec![0 as Cat; universe.num_features()];
    for (x, _) in d_collective.iter() {
        buf.copy_from_slice(x);
        g.apply_in_place(&mut buf);
        if entries.contains_key(buf.as_slice()) {
            continue;
        }
        let (y, c) = argmax_label(&counts, &buf, 0..n_labels).expect("labels >= 2");
        let coverage = if c > 0 { Coverage::Estimated } else { Coverage::Defaulted };
        entries.insert(Box::from(buf.as_slice()), (y, coverage));
    }
    Ok(LabelTable { entries, default: None })
}

/// Erasure: h(x, y) = (x, y*_{g(x)}). Features are untouched, so the
/// feature marginal of the output equals that of the input exactly.
pub fn apply_erasure(dataset: &Dataset, g: &Transformation, table: &LabelTable) -> Result<Dataset> {
    check_roles(dataset, &[Role::Collective])?;
    let universe = dataset.universe();
    let mut out =
        Dataset::with_capacity(universe.clone(), Role::CollectiveModified, dataset.len());
    let mut buf = vec![0 as Cat; universe.num_features()];
    for (x, _) in dataset.iter() {
        buf.copy_from_slice(x);
        g.apply_in_place(&mut buf);
        let (y, _) = table.lookup(&buf).ok_or_else(|| {
            Error::MissingTableEntry(universe.display_features(&buf).join("/"))
        })?;
        out.push_unchecked(x, y);
    }
    Ok(out)
}
