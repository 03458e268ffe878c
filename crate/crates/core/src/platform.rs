//! The platform's side of the interaction: assemble the observed training
//! mixture, fit the empirical argmax classifier, and measure the true
//! test-time success for each objective.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::strategies::Transformation;
use crate::tabular::{empirical_joint, Cat, Dataset, JointCounts, LabelId, Universe};

/// Joint counts over the concatenation of the modified collective data and
/// the base consumers, with the component sizes kept.
#[derive(Debug, Clone)]
pub struct MixtureCounts {
    counts: JointCounts,
    n_collective: u64,
    n_rest: u64,
}

impl MixtureCounts {
    pub fn counts(&self) -> &JointCounts {
        &self.counts
    }

    pub fn n_collective(&self) -> u64 {
        self.n_collective
    }

    pub fn n_rest(&self) -> u64 {
        self.n_rest
    }

    pub fn total(&self) -> u64 {
        self.counts.total()
    }
}

/// Concatenate the modified collective data with the base consumers.
/// The base part may be empty (a platform whose every consumer colludes).
pub fn assemble_training(d_modified: &Dataset, d_rest: &Dataset) -> Result<MixtureCounts> {
    if d_modified.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !Arc::ptr_eq(d_modified.universe(), d_rest.universe()) {
        return Err(Error::UniverseMismatch);
    }
    let counts = if d_rest.is_empty() {
        empirical_joint(d_modified)?
    } else {
        empirical_joint(d_modified)?.merge(&empirical_joint(d_rest)?)?
    };
    Ok(MixtureCounts {
        counts,
        n_collective: d_modified.len() as u64,
        n_rest: d_rest.len() as u64,
    })
}

/// How the classifier breaks ties among equally frequent labels.
#[derive(Debug, Clone, Copy, Default)]
pub enum TiePolicy {
    /// Lowest label index wins.
    #[default]
    LowestIndex,
}

/// Label for feature vectors never seen in training.
#[derive(Debug, Clone, Copy, Default)]
pub enum FallbackPolicy {
    /// The most frequent label of the whole training mixture.
    #[default]
    GlobalMajority,
    /// A fixed label.
    Constant(LabelId),
}

/// The empirical argmax classifier: for every observed x, a label
/// maximizing the mixture count; unseen x fall back to a fixed policy.
#[derive(Debug, Clone)]
pub struct Classifier {
    universe: Arc<Universe>,
    table: HashMap<Box<[Cat]>, LabelId>,
    fallback: LabelId,
}

impl Classifier {
    pub fn predict(&self, x: &[Cat]) -> LabelId {
        self.table.get(x).copied().unwrap_or(self.fallback)
    }

    pub fn fallback_label(&self) -> LabelId {
        self.fallback
    }

    pub fn table_len(&self) -> usize {
        self.table.len()
    }

    /// Export the fitted table as CSV (feature names, then the label), in
    /// canonical feature order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> =
            self.universe.features().iter().map(|f| f.name.as_str()).collect();
        header.push("label");
        wtr.write_record(&header)?;
        let mut keys: Vec<&Box<[Cat]>> = self.table.keys().collect();
        keys.sort_unstable();
        for key in keys {
            let mut row: Vec<&str> = Vec::with_capacity(key.len() + 1);
            for (i, &c) in key.iter().enumerate() {
                row.push(&self.universe.feature(i).categories[c as usize]);
            }
            row.push(self.universe.label_name(self.table[key]));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Fit the argmax classifier on a training mixture.
pub fn fit_argmax_classifier(
    mix: &MixtureCounts,
    _tie: TiePolicy,
    fallback: FallbackPolicy,
) -> Classifier {
    let universe = mix.counts.universe().clone();
    let n_labels = universe.num_labels() as LabelId;
    let mut table: HashMap<Box<[Cat]>, LabelId> = HashMap::new();
    let mut global: Vec<u64> = vec![0; n_labels as usize];
    for (x, y, c) in mix.counts.cells() {
        global[y as usize] += c;
        let entry = table.entry(Box::from(x)).or_insert(LabelId::MAX);
        if *entry == LabelId::MAX {
            // resolve the argmax for this feature once, scanning labels in
            // ascending order so ties land on the lowest index
            let mut best = 0 as LabelId;
            let mut best_count = mix.counts.count(x, 0);
            for cand in 1..n_labels {
                let cc = mix.counts.count(x, cand);
                if cc > best_count {
                    best = cand;
                    best_count = cc;
                }
            }
            *entry = best;
        }
    }
    let fallback = match fallback {
        FallbackPolicy::GlobalMajority => {
            let mut best = 0 as LabelId;
            for cand in 1..n_labels {
                if global[cand as usize] > global[best as usize] {
                    best = cand;
                }
            }
            best
        }
        FallbackPolicy::Constant(y) => y,
    };
    Classifier { universe, table, fallback }
}

/// What the collective counts as success at test time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuccessMetric {
    /// f(g(x)) = y*
    Planting,
    /// f(g(x)) ≠ y*
    Unplanting,
    /// f(g(x)) = f(x)
    Erasing,
}

/// Exact empirical success rate of the classifier over the test set.
pub fn evaluate_success(
    classifier: &Classifier,
    d_test: &Dataset,
    g: &Transformation,
    metric: SuccessMetric,
    y_star: Option<LabelId>,
) -> Result<f64> {
    if d_test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let y_star = match metric {
        SuccessMetric::Erasing => None,
        _ => Some(y_star.ok_or_else(|| {
            Error::InvalidParams("planting/unplanting success needs the target label".into())
        })?),
    };
    let mut hits = 0u64;
    let mut buf = vec![0 as Cat; d_test.universe().num_features()];
    for (x, _) in d_test.iter() {
        buf.copy_from_slice(x);
        g.apply_in_place(&mut buf);
        let pred = classifier.predict(&buf);
        let hit = match metric {
            SuccessMetric::Planting => pred == y_star.unwrap(),
            SuccessMetric::Unplanting => pred != y_star.unwrap(),
            SuccessMetric::Erasing => pred == classifier.predict(x),
        };
        if hit {
            hits += 1;
        }
    }
    Ok(hits as f64 / d_test.len() as f64)
}
