//! Categorical data model: universes, datasets, and exact empirical counts.
//!
//! Everything downstream (strategies, bounds, the platform simulator) queries
//! this module. Counts are kept as exact integers; probabilities are derived
//! lazily at query time so that count identities hold exactly.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Category index within one feature.
pub type Cat = u16;
/// Label index.
pub type LabelId = u16;

/// One categorical feature: a name and its ordered category list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub categories: Vec<String>,
}

impl Feature {
    pub fn cardinality(&self) -> usize {
        self.categories.len()
    }

    pub fn category_id(&self, name: &str) -> Option<Cat> {
        self.categories.iter().position(|c| c == name).map(|i| i as Cat)
    }
}

/// The finite universe: an ordered feature schema and an ordered label set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawUniverse")]
pub struct Universe {
    features: Vec<Feature>,
    labels: Vec<String>,
}

/// Deserialization shadow so schema files go through the same validation
/// as programmatic construction.
#[derive(Deserialize)]
struct RawUniverse {
    features: Vec<Feature>,
    labels: Vec<String>,
}

impl TryFrom<RawUniverse> for Universe {
    type Error = Error;

    fn try_from(raw: RawUniverse) -> Result<Self> {
        Universe::new(
            raw.features.into_iter().map(|f| (f.name, f.categories)).collect(),
            raw.labels,
        )
    }
}

impl Universe {
    /// Build a universe, validating the schema invariants: at least two
    /// categories per feature, at least two labels, no duplicate names.
    pub fn new(features: Vec<(String, Vec<String>)>, labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidUniverse("need at least two labels".into()));
        }
        if has_duplicates(&labels) {
            return Err(Error::InvalidUniverse("duplicate label names".into()));
        }
        let names: Vec<&String> = features.iter().map(|(n, _)| n).collect();
        if names.iter().collect::<std::collections::HashSet<_>>().len() != names.len() {
            return Err(Error::InvalidUniverse("duplicate feature names".into()));
        }
        let mut fs = Vec::with_capacity(features.len());
        for (name, categories) in features {
            if categories.len() < 2 {
                return Err(Error::InvalidUniverse(format!(
                    "feature {name:?} needs at least two categories"
                )));
            }
            if categories.len() > Cat::MAX as usize {
                return Err(Error::InvalidUniverse(format!(
                    "feature {name:?} has too many categories"
                )));
            }
            if has_duplicates(&categories) {
                return Err(Error::InvalidUniverse(format!(
                    "duplicate categories in feature {name:?}"
                )));
            }
            fs.push(Feature { name, categories });
        }
        if fs.is_empty() {
            return Err(Error::InvalidUniverse("need at least one feature".into()));
        }
        Ok(Self { features: fs, labels })
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, idx: usize) -> &Feature {
        &self.features[idx]
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn label_name(&self, y: LabelId) -> &str {
        &self.labels[y as usize]
    }

    pub fn label_id(&self, name: &str) -> Result<LabelId> {
        self.labels
            .iter()
            .position(|l| l == name)
            .map(|i| i as LabelId)
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    /// #X: product of per-feature category counts.
    pub fn feature_cardinality(&self) -> u128 {
        self.features
            .iter()
            .fold(1u128, |acc, f| acc.saturating_mul(f.cardinality() as u128))
    }

    pub fn validate_features(&self, x: &[Cat]) -> Result<()> {
        if x.len() != self.features.len() {
            return Err(Error::InvalidSample(format!(
                "expected {} features, got {}",
                self.features.len(),
                x.len()
            )));
        }
        for (i, (&c, f)) in x.iter().zip(&self.features).enumerate() {
            if c as usize >= f.cardinality() {
                return Err(Error::InvalidSample(format!(
                    "category index {c} out of range for feature {i} ({})",
                    f.name
                )));
            }
        }
        Ok(())
    }

    pub fn validate_sample(&self, x: &[Cat], y: LabelId) -> Result<()> {
        self.validate_features(x)?;
        if y as usize >= self.labels.len() {
            return Err(Error::InvalidSample(format!("label index {y} out of range")));
        }
        Ok(())
    }

    /// Render a feature vector as its category names.
    pub fn display_features(&self, x: &[Cat]) -> Vec<String> {
        x.iter()
            .zip(&self.features)
            .map(|(&c, f)| f.categories[c as usize].clone())
            .collect()
    }
}

fn has_duplicates(names: &[String]) -> bool {
    let set: std::collections::HashSet<&String> = names.iter().collect();
    set.len() != names.len()
}

/// Provenance of a dataset within an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Base,
    Collective,
    NonCollective,
    Test,
    EstimationSplit,
    CollectiveModified,
}

/// An ordered multiset of samples over one universe.
///
/// Rows are stored flat (row-major) to keep millions of samples compact.
/// Insertion order is preserved; nothing downstream depends on it, but it
/// makes splits and reruns reproducible.
#[derive(Debug, Clone)]
pub struct Dataset {
    universe: Arc<Universe>,
    xs: Vec<Cat>,
    ys: Vec<LabelId>,
    role: Role,
}

impl Dataset {
    pub fn new(universe: Arc<Universe>, role: Role) -> Self {
        Self { universe, xs: Vec::new(), ys: Vec::new(), role }
    }

    pub fn with_capacity(universe: Arc<Universe>, role: Role, rows: usize) -> Self {
        let width = universe.num_features();
        Self {
            universe,
            xs: Vec::with_capacity(rows * width),
            ys: Vec::with_capacity(rows),
            role,
        }
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn set_role(&mut self, role: Role) {
        self.role = role;
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn push(&mut self, x: &[Cat], y: LabelId) -> Result<()> {
        self.universe.validate_sample(x, y)?;
        self.xs.extend_from_slice(x);
        self.ys.push(y);
        Ok(())
    }

    /// Push without re-validating; caller guarantees validity.
    pub(crate) fn push_unchecked(&mut self, x: &[Cat], y: LabelId) {
        debug_assert!(self.universe.validate_sample(x, y).is_ok());
        self.xs.extend_from_slice(x);
        self.ys.push(y);
    }

    pub fn features_of(&self, row: usize) -> &[Cat] {
        let w = self.universe.num_features();
        &self.xs[row * w..(row + 1) * w]
    }

    pub fn label_of(&self, row: usize) -> LabelId {
        self.ys[row]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[Cat], LabelId)> + '_ {
        let w = self.universe.num_features();
        self.xs.chunks_exact(w).zip(self.ys.iter().copied())
    }

    /// Deterministically split off `k` samples.
    ///
    /// The first part is tagged as the estimation split, the remainder keeps
    /// the collective role; together they partition the input multiset.
    pub fn split(&self, k: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        let n = self.len();
        if k == 0 || k >= n {
            return Err(Error::SplitOutOfRange { requested: k as u64, available: n as u64 });
        }
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // partial_shuffle fills the tail with the uniform sample
        let (chosen, _) = order.partial_shuffle(&mut rng, k);
        let mut taken = vec![false; n];
        let mut first = Dataset::with_capacity(self.universe.clone(), Role::EstimationSplit, k);
        for &i in chosen.iter() {
            taken[i as usize] = true;
            first.push_unchecked(self.features_of(i as usize), self.ys[i as usize]);
        }
        let mut second =
            Dataset::with_capacity(self.universe.clone(), Role::Collective, n - k);
        for (i, &t) in taken.iter().enumerate() {
            if !t {
                second.push_unchecked(self.features_of(i), self.ys[i]);
            }
        }
        Ok((first, second))
    }

    /// Concatenate two datasets over the same universe, in order.
    pub fn concat(&self, other: &Dataset, role: Role) -> Result<Dataset> {
        if !Arc::ptr_eq(&self.universe, &other.universe) {
            return Err(Error::UniverseMismatch);
        }
        let mut out =
            Dataset::with_capacity(self.universe.clone(), role, self.len() + other.len());
        out.xs.extend_from_slice(&self.xs);
        out.ys.extend_from_slice(&self.ys);
        out.xs.extend_from_slice(&other.xs);
        out.ys.extend_from_slice(&other.ys);
        Ok(out)
    }

    /// Gather the listed rows into a new dataset (duplicates allowed).
    pub fn gather(&self, rows: &[u32], role: Role) -> Dataset {
        let mut out = Dataset::with_capacity(self.universe.clone(), role, rows.len());
        for &i in rows {
            out.push_unchecked(self.features_of(i as usize), self.ys[i as usize]);
        }
        out
    }

    /// Uniform without-replacement draw of `count` rows, deterministic per
    /// seed.
    pub fn sample_without_replacement(
        &self,
        count: usize,
        seed: u64,
        role: Role,
    ) -> Result<Dataset> {
        let mut parts = self.draw_disjoint(&[count], seed)?;
        let mut out = parts.pop().unwrap();
        out.set_role(role);
        Ok(out)
    }

    /// Draw several pairwise-disjoint without-replacement samples in one
    /// pass. The sizes must fit the pool together.
    pub fn draw_disjoint(&self, counts: &[usize], seed: u64) -> Result<Vec<Dataset>> {
        let want: usize = counts.iter().sum();
        if want == 0 || want > self.len() {
            return Err(Error::SplitOutOfRange {
                requested: want as u64,
                available: self.len() as u64,
            });
        }
        let mut order: Vec<u32> = (0..self.len() as u32).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // partial_shuffle fills the tail with the uniform sample
        let (chosen, _) = order.partial_shuffle(&mut rng, want);
        let mut out = Vec::with_capacity(counts.len());
        let mut offset = 0;
        for &c in counts {
            out.push(self.gather(&chosen[offset..offset + c], self.role));
            offset += c;
        }
        Ok(out)
    }
}

/// Exact integer co-occurrence counts over observed (x, y) cells.
#[derive(Debug, Clone)]
pub struct JointCounts {
    universe: Arc<Universe>,
    total: u64,
    cells: HashMap<(Box<[Cat]>, LabelId), u64>,
    feature_totals: HashMap<Box<[Cat]>, u64>,
}

impl JointCounts {
    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, x: &[Cat], y: LabelId) -> u64 {
        self.cells.get(&(Box::from(x), y)).copied().unwrap_or(0)
    }

    pub fn feature_count(&self, x: &[Cat]) -> u64 {
        self.feature_totals.get(x).copied().unwrap_or(0)
    }

    /// P̂(x, y) = count / total.
    pub fn pair_prob(&self, x: &[Cat], y: LabelId) -> f64 {
        self.count(x, y) as f64 / self.total as f64
    }

    /// P̂(x) = Σ_y count(x, y) / total.
    pub fn marginal_feature_prob(&self, x: &[Cat]) -> f64 {
        self.feature_count(x) as f64 / self.total as f64
    }

    pub fn cells(&self) -> impl Iterator<Item = (&[Cat], LabelId, u64)> + '_ {
        self.cells.iter().map(|((x, y), &c)| (x.as_ref(), *y, c))
    }

    /// Observed cells in canonical (feature tuple, label) order.
    pub fn sorted_cells(&self) -> Vec<(&[Cat], LabelId, u64)> {
        let mut v: Vec<_> = self.cells().collect();
        v.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        v
    }

    /// Observed distinct feature vectors in canonical order.
    pub fn sorted_features(&self) -> Vec<&[Cat]> {
        let mut v: Vec<&[Cat]> = self.feature_totals.keys().map(|k| k.as_ref()).collect();
        v.sort_unstable();
        v
    }

    pub fn merge(&self, other: &JointCounts) -> Result<JointCounts> {
        if !Arc::ptr_eq(&self.universe, &other.universe) {
            return Err(Error::UniverseMismatch);
        }
        let mut out = self.clone();
        out.total += other.total;
        for ((x, y), c) in &other.cells {
            *out.cells.entry((x.clone(), *y)).or_insert(0) += c;
        }
        for (x, c) in &other.feature_totals {
            *out.feature_totals.entry(x.clone()).or_insert(0) += c;
        }
        Ok(out)
    }
}

/// Tally a dataset into exact joint counts.
pub fn empirical_joint(dataset: &Dataset) -> Result<JointCounts> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut cells: HashMap<(Box<[Cat]>, LabelId), u64> = HashMap::new();
    let mut feature_totals: HashMap<Box<[Cat]>, u64> = HashMap::new();
    for (x, y) in dataset.iter() {
        *cells.entry((Box::from(x), y)).or_insert(0) += 1;
        *feature_totals.entry(Box::from(x)).or_insert(0) += 1;
    }
    Ok(JointCounts {
        universe: dataset.universe.clone(),
        total: dataset.len() as u64,
        cells,
        feature_totals,
    })
}

/// Read a dataset from CSV: header = feature names then `label`; one row per
/// sample with category names as strings.
pub fn read_csv<R: Read>(reader: R, universe: &Arc<Universe>, role: Role) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = universe.num_features() + 1;
    if headers.len() != expected {
        return Err(Error::CsvFormat(format!(
            "expected {expected} columns, found {}",
            headers.len()
        )));
    }
    for (i, f) in universe.features().iter().enumerate() {
        if headers.get(i) != Some(f.name.as_str()) {
            return Err(Error::CsvFormat(format!(
                "column {i} is {:?}, expected feature {:?}",
                headers.get(i).unwrap_or(""),
                f.name
            )));
        }
    }
    if headers.get(expected - 1) != Some("label") {
        return Err(Error::CsvFormat("last column must be \"label\"".into()));
    }
    let mut ds = Dataset::new(universe.clone(), role);
    let mut x = vec![0 as Cat; universe.num_features()];
    for record in rdr.records() {
        let record = record?;
        if record.len() != expected {
            return Err(Error::CsvFormat(format!("row has {} columns", record.len())));
        }
        for (i, f) in universe.features().iter().enumerate() {
            let cell = record.get(i).unwrap();
            x[i] = f
                .category_id(cell)
                .ok_or_else(|| Error::UnknownCategory(format!("{}={cell}", f.name)))?;
        }
        let y = universe.label_id(record.get(expected - 1).unwrap())?;
        ds.push_unchecked(&x, y);
    }
    Ok(ds)
}

/// Write a dataset in the CSV format accepted by [`read_csv`].
pub fn write_csv<W: Write>(writer: W, dataset: &Dataset) -> Result<()> {
    let universe = dataset.universe();
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = universe.features().iter().map(|f| f.name.as_str()).collect();
    header.push("label");
    wtr.write_record(&header)?;
    for (x, y) in dataset.iter() {
        let mut row: Vec<&str> = Vec::with_capacity(x.len() + 1);
        for (i, &c) in x.iter().enumerate() {
            row.push(&universe.feature(i).categories[c as usize]);
        }
        row.push(universe.label_name(y));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv_path(path: &Path, universe: &Arc<Universe>, role: Role) -> Result<Dataset> {
    read_csv(std::fs::File::open(path)?, universe, role)
}

pub fn write_csv_path(path: &Path, dataset: &Dataset) -> Result<()> {
    write_csv(std::fs::File::create(path)?, dataset)
}
