//! Synthetic vehicle-evaluation dataset: an 18-feature categorical schema,
//! a four-class quality label, and the transformation that targets a
//! specific diesel-SUV profile.
//!
//! The label comes from an integer scoring rubric (safety, fuel, warranty,
//! infotainment, sound, plus a per-country adjustment) with a seeded grade
//! jitter, thresholded into Poor / Average / Good / Excellent. The sampler
//! is heavily skewed towards the targeted profile so the signal set carries
//! a realistic share of the data, and the country mix inside the profile is
//! non-uniform. Every knob lives in [`GeneratorConfig`] and can be loaded
//! from JSON.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strategies::Transformation;
use crate::tabular::{Cat, Dataset, LabelId, Role, Universe};

const MODEL: usize = 0;
const FUEL: usize = 1;
const TRANSMISSION: usize = 2;
const DRIVE: usize = 3;
const SAFETY: usize = 4;
const INTERIOR: usize = 5;
const INFOTAINMENT: usize = 6;
const COUNTRY: usize = 7;
const WARRANTY: usize = 8;
const DOORS: usize = 9;
const SEATS: usize = 10;
const AC: usize = 11;
const NAVIGATION: usize = 12;
const TIRE: usize = 13;
const SUNROOF: usize = 14;
const SOUND: usize = 15;
const CRUISE: usize = 16;
const BLUETOOTH: usize = 17;

/// The 18-feature vehicle schema with the four evaluation labels.
pub fn car_universe() -> Arc<Universe> {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    Arc::new(
        Universe::new(
            vec![
                ("Model Type".into(),
                 s(&["Sedan", "SUV", "Coupe", "Hatchback", "Convertible", "Wagon", "Minivan",
                     "Truck"])),
                ("Fuel Type".into(), s(&["Gasoline", "Diesel", "Electric", "Hybrid"])),
                ("Transmission Type".into(), s(&["Manual", "Automatic", "CVT"])),
                ("Drive Type".into(), s(&["FWD", "RWD", "AWD"])),
                ("Safety Rating".into(),
                 s(&["1 star", "2 stars", "3 stars", "4 stars", "5 stars"])),
                ("Interior Material".into(), s(&["Cloth", "Leather", "Synthetic"])),
                ("Infotainment System".into(), s(&["Basic", "Advanced", "Premium", "None"])),
                ("Country of Manufacture".into(), s(&["C1", "C2", "C3", "C4", "C5"])),
                ("Warranty Length".into(), s(&["3 years", "5 years", "7 years", "10 years"])),
                ("Number of Doors".into(), s(&["2", "4", "5"])),
                ("Number of Seats".into(), s(&["2", "4", "5", "7"])),
                ("Air Conditioning".into(), s(&["Yes", "No"])),
                ("Navigation System".into(), s(&["None", "Basic", "Advanced"])),
                ("Tire Type".into(), s(&["All-Season", "Summer", "Winter"])),
                ("Sunroof".into(), s(&["Yes", "No"])),
                ("Sound System".into(), s(&["Standard", "Premium", "High-end", "None"])),
                ("Cruise Control".into(), s(&["Yes", "No"])),
                ("Bluetooth Connectivity".into(), s(&["Yes", "No"])),
            ],
            s(&["Excellent", "Good", "Average", "Poor"]),
        )
        .expect("static schema is valid"),
    )
}

/// The 17 (feature, forced category) pairs of the targeted profile;
/// Country of Manufacture stays free.
fn profile_pairs() -> [(usize, Cat); 17] {
    [
        (MODEL, 1),        // SUV
        (FUEL, 1),         // Diesel
        (TRANSMISSION, 0), // Manual
        (DRIVE, 1),        // RWD
        (SAFETY, 3),       // 4 stars
        (INTERIOR, 2),     // Synthetic
        (INFOTAINMENT, 2), // Premium
        (WARRANTY, 3),     // 10 years
        (DOORS, 2),        // 5
        (SEATS, 2),        // 5
        (AC, 0),           // Yes
        (NAVIGATION, 2),   // Advanced
        (TIRE, 0),         // All-Season
        (SUNROOF, 0),      // Yes
        (SOUND, 1),        // Premium
        (CRUISE, 0),       // Yes
        (BLUETOOTH, 0),    // Yes
    ]
}

/// The transformation used throughout the vehicle experiments: fix every
/// feature except Country of Manufacture. #X̃ = 5.
pub fn signal_transformation(universe: &Universe) -> Transformation {
    Transformation::new(universe, &profile_pairs()).expect("profile fits the schema")
}

/// A constant vector outside the signal set, for the feature-only strategy:
/// an automatic one-star sedan. Its country is immaterial (the model type
/// alone breaks signal membership); C1 is used.
pub fn escape_vector() -> Vec<Cat> {
    let mut x = vec![0 as Cat; 18];
    x[MODEL] = 0; // Sedan
    x[FUEL] = 1; // Diesel
    x[TRANSMISSION] = 1; // Automatic
    x[DRIVE] = 1; // RWD
    x[SAFETY] = 0; // 1 star
    x[INTERIOR] = 2; // Synthetic
    x[INFOTAINMENT] = 2; // Premium
    x[COUNTRY] = 0; // C1
    x[WARRANTY] = 2; // 7 years
    x[DOORS] = 2; // 5
    x[SEATS] = 2; // 5
    x[AC] = 0; // Yes
    x[NAVIGATION] = 2; // Advanced
    x[TIRE] = 0; // All-Season
    x[SUNROOF] = 1; // No
    x[SOUND] = 1; // Premium
    x[CRUISE] = 1; // No
    x[BLUETOOTH] = 1; // No
    x
}

/// Integer scoring rubric. Point vectors are indexed by category in schema
/// order; the grade jitter makes label draws stochastic per sample (seeded),
/// which is what produces a label *distribution* at each fixed profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoringRubric {
    pub safety_points: Vec<i32>,
    pub fuel_points: Vec<i32>,
    pub warranty_points: Vec<i32>,
    pub infotainment_points: Vec<i32>,
    pub sound_points: Vec<i32>,
    pub country_adjust: Vec<i32>,
    /// Ascending cut points: below the first is Poor, then Average, then
    /// Good, and at or above the last Excellent.
    pub thresholds: [i32; 3],
    /// (offset, weight) pairs; weights are normalized internally.
    pub grade_noise: Vec<(i32, f64)>,
}

impl Default for ScoringRubric {
    fn default() -> Self {
        Self {
            safety_points: vec![0, 5, 10, 15, 20],
            fuel_points: vec![2, 4, 8, 6],
            warranty_points: vec![0, 2, 4, 6],
            infotainment_points: vec![2, 4, 6, 0],
            sound_points: vec![2, 4, 6, 0],
            // C4 sits lower: its jitter lands in the Average band where the
            // other countries land in Good
            country_adjust: vec![0, 0, 0, -5, 0],
            thresholds: [20, 30, 40],
            grade_noise: vec![(10, 0.63), (-2, 0.315), (-45, 0.055)],
        }
    }
}

impl ScoringRubric {
    fn validate(&self, universe: &Universe) -> Result<()> {
        let checks = [
            (SAFETY, self.safety_points.len()),
            (FUEL, self.fuel_points.len()),
            (WARRANTY, self.warranty_points.len()),
            (INFOTAINMENT, self.infotainment_points.len()),
            (SOUND, self.sound_points.len()),
            (COUNTRY, self.country_adjust.len()),
        ];
        for (idx, len) in checks {
            if len != universe.feature(idx).cardinality() {
                return Err(Error::InvalidParams(format!(
                    "rubric points for {:?} need {} entries, got {len}",
                    universe.feature(idx).name,
                    universe.feature(idx).cardinality()
                )));
            }
        }
        if !(self.thresholds[0] < self.thresholds[1] && self.thresholds[1] < self.thresholds[2]) {
            return Err(Error::InvalidParams("thresholds must be strictly ascending".into()));
        }
        if self.grade_noise.is_empty() || self.grade_noise.iter().any(|&(_, w)| !(w > 0.0)) {
            return Err(Error::InvalidParams("grade noise needs positive weights".into()));
        }
        Ok(())
    }

    fn base_score(&self, x: &[Cat]) -> i32 {
        self.safety_points[x[SAFETY] as usize]
            + self.fuel_points[x[FUEL] as usize]
            + self.warranty_points[x[WARRANTY] as usize]
            + self.infotainment_points[x[INFOTAINMENT] as usize]
            + self.sound_points[x[SOUND] as usize]
            + self.country_adjust[x[COUNTRY] as usize]
    }

    fn grade(&self, score: i32) -> LabelId {
        if score >= self.thresholds[2] {
            0 // Excellent
        } else if score >= self.thresholds[1] {
            1 // Good
        } else if score >= self.thresholds[0] {
            2 // Average
        } else {
            3 // Poor
        }
    }
}

/// Sampler and rubric parameters, loadable from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Probability weight of each profile feature taking its forced value;
    /// the remaining categories share the rest uniformly.
    pub profile_affinity: f64,
    /// Country weights for diesel SUVs (normalized internally). Defaults to
    /// a mix where the third country carries about 44% of profile mass.
    pub country_profile_weights: Vec<f64>,
    /// Country weights for everything else.
    pub country_default_weights: Vec<f64>,
    pub rubric: ScoringRubric,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            profile_affinity: 0.855,
            country_profile_weights: vec![29109.0, 29179.0, 91872.0, 29348.0, 29363.0],
            country_default_weights: vec![1.0, 1.0, 1.0, 1.0, 1.0],
            rubric: ScoringRubric::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Cumulative-weight categorical sampler.
struct Cdf(Vec<f64>);

impl Cdf {
    fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidParams("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParams("weights must not all be zero".into()));
        }
        let mut acc = 0.0;
        let cum = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(Cdf(cum))
    }

    fn draw(&self, rng: &mut impl Rng) -> Cat {
        let u: f64 = rng.random();
        for (i, &c) in self.0.iter().enumerate() {
            if u < c {
                return i as Cat;
            }
        }
        (self.0.len() - 1) as Cat
    }
}

struct Sampler {
    feature_cdfs: Vec<Cdf>,
    country_profile: Cdf,
    country_default: Cdf,
    noise_offsets: Vec<i32>,
    noise_cdf: Cdf,
    rubric: ScoringRubric,
}

impl Sampler {
    fn new(universe: &Universe, config: &GeneratorConfig) -> Result<Self> {
        config.rubric.validate(universe)?;
        let p = config.profile_affinity;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParams(format!(
                "profile affinity must be in (0,1), got {p}"
            )));
        }
        let forced: BTreeMap<usize, Cat> = profile_pairs().into_iter().collect();
        let mut feature_cdfs = Vec::with_capacity(universe.num_features());
        for (idx, feature) in universe.features().iter().enumerate() {
            let k = feature.cardinality();
            let weights = match forced.get(&idx) {
                Some(&f) => (0..k)
                    .map(|c| if c as Cat == f { p } else { (1.0 - p) / (k - 1) as f64 })
                    .collect::<Vec<_>>(),
                None => vec![1.0; k],
            };
            feature_cdfs.push(Cdf::new(&weights)?);
        }
        let expect_cats = universe.feature(COUNTRY).cardinality();
        if config.country_profile_weights.len() != expect_cats
            || config.country_default_weights.len() != expect_cats
        {
            return Err(Error::InvalidParams(format!(
                "country weight vectors need {expect_cats} entries"
            )));
        }
        let offsets: Vec<i32> = config.rubric.grade_noise.iter().map(|&(o, _)| o).collect();
        let noise_weights: Vec<f64> = config.rubric.grade_noise.iter().map(|&(_, w)| w).collect();
        Ok(Self {
            feature_cdfs,
            country_profile: Cdf::new(&config.country_profile_weights)?,
            country_default: Cdf::new(&config.country_default_weights)?,
            noise_offsets: offsets,
            noise_cdf: Cdf::new(&noise_weights)?,
            rubric: config.rubric.clone(),
        })
    }

    fn draw_row(&self, rng: &mut impl Rng, x: &mut [Cat]) -> LabelId {
        for (idx, cdf) in self.feature_cdfs.iter().enumerate() {
            if idx == COUNTRY {
                // the country mix is conditioned on the diesel-SUV profile
                let cdf = if x[MODEL] == 1 && x[FUEL] == 1 {
                    &self.country_profile
                } else {
                    &self.country_default
                };
                x[idx] = cdf.draw(rng);
            } else {
                x[idx] = cdf.draw(rng);
            }
        }
        let noise = self.noise_offsets[self.noise_cdf.draw(rng) as usize];
        self.rubric.grade(self.rubric.base_score(x) + noise)
    }
}

const GEN_CHUNK: u64 = 65_536;

/// Draw `rows` i.i.d. vehicles. Generation is chunked with per-chunk
/// derived seeds, so the output is identical regardless of thread count.
pub fn generate_base_dataset(
    rows: u64,
    seed: u64,
    config: &GeneratorConfig,
) -> Result<Dataset> {
    if rows == 0 {
        return Err(Error::InvalidParams("rows must be positive".into()));
    }
    let universe = car_universe();
    let sampler = Sampler::new(&universe, config)?;
    let width = universe.num_features();
    let n_chunks = rows.div_ceil(GEN_CHUNK);
    let chunks: Vec<(Vec<Cat>, Vec<LabelId>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(crate::mix_seed(seed, c));
            let count = (rows - c * GEN_CHUNK).min(GEN_CHUNK) as usize;
            let mut xs = vec![0 as Cat; count * width];
            let mut ys = vec![0 as LabelId; count];
            for i in 0..count {
                ys[i] = sampler.draw_row(&mut rng, &mut xs[i * width..(i + 1) * width]);
            }
            (xs, ys)
        })
        .collect();
    let mut out = Dataset::with_capacity(universe, Role::Base, rows as usize);
    for (xs, ys) in &chunks {
        for (x, &y) in xs.chunks_exact(width).zip(ys) {
            out.push_unchecked(x, y);
        }
    }
    Ok(out)
}

/// Uniform without-replacement draw of consumers from the base pool.
pub fn sample_consumers(base: &Dataset, count: usize, seed: u64) -> Result<Dataset> {
    base.sample_without_replacement(count, seed, Role::Base)
}

/// Per-signal-element label tallies (signal element -> counts per label),
/// the shape a dataset description prints.
pub fn signal_label_tally(
    dataset: &Dataset,
    g: &Transformation,
) -> BTreeMap<Vec<Cat>, Vec<u64>> {
    let n_labels = dataset.universe().num_labels();
    let mut tally: BTreeMap<Vec<Cat>, Vec<u64>> = BTreeMap::new();
    for (x, y) in dataset.iter() {
        if g.in_signal_set(x) {
            tally.entry(x.to_vec()).or_insert_with(|| vec![0; n_labels])[y as usize] += 1;
        }
    }
    tally
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_cardinality_is_exact() {
        let u = car_universe();
        assert_eq!(u.num_features(), 18);
        assert_eq!(u.feature_cardinality(), 2_388_787_200);
        assert_eq!(u.num_labels(), 4);
    }

    #[test]
    fn transformation_fixes_everything_but_country() {
        let u = car_universe();
        let g = signal_transformation(&u);
        assert_eq!(g.num_fixed(), 17);
        assert_eq!(g.signal_cardinality(&u), 5);
        let elems: Vec<Vec<Cat>> = g.signal_set(&u).collect();
        assert_eq!(elems.len(), 5);
        for (i, e) in elems.iter().enumerate() {
            assert_eq!(e[COUNTRY] as usize, i);
            assert!(g.in_signal_set(e));
        }
    }

    #[test]
    fn transformation_image_and_idempotence_on_random_vectors() {
        let u = car_universe();
        let g = signal_transformation(&u);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1_000 {
            let x: Vec<Cat> = (0..u.num_features())
                .map(|i| rng.random_range(0..u.feature(i).cardinality()) as Cat)
                .collect();
            let gx = g.apply(&x);
            assert!(g.in_signal_set(&gx));
            assert_eq!(g.apply(&gx), gx);
        }
    }

    #[test]
    fn escape_vector_is_outside_the_signal_set() {
        let u = car_universe();
        let g = signal_transformation(&u);
        let x0 = escape_vector();
        u.validate_features(&x0).unwrap();
        assert!(!g.in_signal_set(&x0));
    }

    #[test]
    fn single_row_and_determinism() {
        let cfg = GeneratorConfig::default();
        let one = generate_base_dataset(1, 9, &cfg).unwrap();
        assert_eq!(one.len(), 1);

        let a = generate_base_dataset(70_000, 42, &cfg).unwrap();
        let b = generate_base_dataset(70_000, 42, &cfg).unwrap();
        assert_eq!(a.len(), 70_000);
        for ((xa, ya), (xb, yb)) in a.iter().zip(b.iter()) {
            assert_eq!(xa, xb);
            assert_eq!(ya, yb);
        }
        let c = generate_base_dataset(70_000, 43, &cfg).unwrap();
        let differs = a.iter().zip(c.iter()).any(|((xa, _), (xc, _))| xa != xc);
        assert!(differs);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = GeneratorConfig::default();
        let text = cfg.to_json().unwrap();
        let back = GeneratorConfig::from_json(&text).unwrap();
        assert_eq!(back.profile_affinity, cfg.profile_affinity);
        assert_eq!(back.rubric.thresholds, cfg.rubric.thresholds);
    }

    #[test]
    fn rubric_bands_inside_the_profile() {
        // base score inside the signal set is 35; the jitter must land the
        // non-C4 countries in {Excellent, Good, Poor} and C4 in
        // {Excellent, Average, Poor}
        let r = ScoringRubric::default();
        let u = car_universe();
        let g = signal_transformation(&u);
        for x in g.signal_set(&u) {
            let base = r.base_score(&x);
            let labels: Vec<LabelId> =
                r.grade_noise.iter().map(|&(o, _)| r.grade(base + o)).collect();
            if x[COUNTRY] == 3 {
                assert_eq!(labels, vec![0, 2, 3], "C4 bands");
            } else {
                assert_eq!(labels, vec![0, 1, 3], "non-C4 bands");
            }
        }
    }

    #[test]
    fn generated_label_pattern_matches_structure() {
        let cfg = GeneratorConfig::default();
        let d = generate_base_dataset(150_000, 7, &cfg).unwrap();
        let u = d.universe();
        let g = signal_transformation(u);
        let tally = signal_label_tally(&d, &g);
        assert_eq!(tally.len(), 5);
        let mut signal_rows = 0u64;
        for (x, counts) in &tally {
            signal_rows += counts.iter().sum::<u64>();
            // Excellent strictly most frequent
            assert!(counts[0] > counts[1] && counts[0] > counts[2] && counts[0] > counts[3]);
            if x[COUNTRY] == 3 {
                assert_eq!(counts[1], 0, "no Good for C4");
                assert!(counts[2] > 0, "Average present for C4");
            } else {
                assert_eq!(counts[2], 0, "no Average outside C4");
                assert!(counts[1] > 0);
            }
        }
        let share = signal_rows as f64 / d.len() as f64;
        assert!((0.05..=0.09).contains(&share), "signal share {share}");
        // the third country dominates the signal set
        let c3: u64 = tally[&g.signal_set(u).nth(2).unwrap()].iter().sum();
        let c3_share = c3 as f64 / signal_rows as f64;
        assert!((0.38..=0.50).contains(&c3_share), "C3 share {c3_share}");
    }

    #[test]
    fn consumer_draws_partition_and_preserve_frequencies() {
        let cfg = GeneratorConfig::default();
        let base = generate_base_dataset(30_000, 3, &cfg).unwrap();
        let whole = sample_consumers(&base, 30_000, 5).unwrap();
        assert_eq!(whole.len(), base.len());
        // a full draw is a permutation: same multiset of rows
        let key = |d: &Dataset| {
            let mut v: Vec<(Vec<Cat>, LabelId)> =
                d.iter().map(|(x, y)| (x.to_vec(), y)).collect();
            v.sort_unstable();
            v
        };
        assert_eq!(key(&base), key(&whole));

        // label frequencies of a 1/3 draw stay within 3R of the base
        let draw = sample_consumers(&base, 10_000, 6).unwrap();
        let r = crate::concentration::hoeffding_term(0.01, 10_000).unwrap();
        for y in 0..4u16 {
            let fb = base.iter().filter(|&(_, yy)| yy == y).count() as f64 / 30_000.0;
            let fd = draw.iter().filter(|&(_, yy)| yy == y).count() as f64 / 10_000.0;
            assert!((fb - fd).abs() <= 3.0 * r, "label {y}: {fb} vs {fd}");
        }
        assert!(sample_consumers(&base, 30_001, 1).is_err());
    }
}
