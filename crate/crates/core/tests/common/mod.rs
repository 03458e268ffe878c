//! Brute-force transcriptions of the four lower-bound computations, written
//! directly from their step-by-step definitions with plain loops over raw
//! sample lists. Deliberately independent of the library code path: no
//! joint-count tables, no transformation type, no shared helpers.
//!
//! Also hosts the random-instance generator used by the equivalence suites.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RawSample = (Vec<u16>, u16);

/// A tiny random problem instance over a small universe.
pub struct Instance {
    /// Category counts per feature; the product stays small.
    pub cards: Vec<usize>,
    pub n_labels: u16,
    /// (feature index, forced category) pairs of the map.
    pub fixed: Vec<(usize, u16)>,
    pub samples: Vec<RawSample>,
    pub n_consumers: u64,
    pub n_test: u64,
    pub delta: f64,
    pub epsilon: f64,
    pub y_star: u16,
}

pub fn random_instance(seed: u64, need_fixed: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes: [&[usize]; 6] = [&[2, 2, 3], &[4, 3], &[12], &[2, 5], &[6, 2], &[3, 2, 2]];
    let cards = shapes[rng.random_range(0..shapes.len())].to_vec();
    let n_labels = rng.random_range(2..=3) as u16;
    let mut fixed = Vec::new();
    for (i, &c) in cards.iter().enumerate() {
        if rng.random_bool(0.5) {
            fixed.push((i, rng.random_range(0..c) as u16));
        }
    }
    if need_fixed && fixed.is_empty() {
        fixed.push((0, rng.random_range(0..cards[0]) as u16));
    }
    let n = rng.random_range(5..=50usize);
    let samples = (0..n)
        .map(|_| {
            let x: Vec<u16> = cards.iter().map(|&c| rng.random_range(0..c) as u16).collect();
            (x, rng.random_range(0..n_labels))
        })
        .collect();
    Instance {
        cards,
        n_labels,
        fixed,
        samples,
        n_consumers: n as u64 + rng.random_range(10..=500),
        n_test: rng.random_range(5..=200),
        delta: [0.05, 0.2][rng.random_range(0..2)],
        epsilon: [0.0, 0.1, 0.3][rng.random_range(0..3)],
        y_star: rng.random_range(0..n_labels),
    }
}

fn r_term(delta: f64, k: u64) -> f64 {
    ((1.0 / delta).ln() / (2.0 * k as f64)).sqrt()
}

fn map_g(fixed: &[(usize, u16)], x: &[u16]) -> Vec<u16> {
    let mut out = x.to_vec();
    for &(i, c) in fixed {
        out[i] = c;
    }
    out
}

fn signal_card(cards: &[usize], fixed: &[(usize, u16)]) -> u128 {
    cards
        .iter()
        .enumerate()
        .filter(|(i, _)| !fixed.iter().any(|&(fi, _)| fi == *i))
        .map(|(_, &c)| c as u128)
        .product()
}

fn full_card(cards: &[usize]) -> u128 {
    cards.iter().map(|&c| c as u128).product()
}

fn count_pair(samples: &[RawSample], x: &[u16], y: u16) -> usize {
    samples.iter().filter(|(sx, sy)| sx == x && *sy == y).count()
}

fn count_feature(samples: &[RawSample], x: &[u16]) -> usize {
    samples.iter().filter(|(sx, _)| sx == x).count()
}

/// Feature-label planting lower bound, computed step by step.
pub fn oracle_plant_fl(inst: &Instance) -> f64 {
    let n = inst.samples.len();
    let s = signal_card(&inst.cards, &inst.fixed);
    let y = inst.n_labels as u128;
    let delta_tilde = inst.delta / (2 + 2 * s + 2 * s * y) as f64;
    let r_n = r_term(delta_tilde, n as u64);
    let r_rest = r_term(delta_tilde, inst.n_consumers - n as u64);
    let r_test = r_term(delta_tilde, inst.n_test);
    let eps = inst.epsilon / (1.0 - inst.epsilon);
    let share = n as f64 / inst.n_consumers as f64;
    let rest_share = (inst.n_consumers - n as u64) as f64 / inst.n_consumers as f64;

    let mapped: Vec<Vec<u16>> =
        inst.samples.iter().map(|(x, _)| map_g(&inst.fixed, x)).collect();
    let mut outer = 0.0;
    for xt in &mapped {
        let p_tilde = mapped.iter().filter(|m| m == &xt).count() as f64 / n as f64;
        let p_star = count_pair(&inst.samples, xt, inst.y_star) as f64 / n as f64;
        let mut resistance = f64::NEG_INFINITY;
        for yp in 0..inst.n_labels {
            if yp != inst.y_star {
                let p = count_pair(&inst.samples, xt, yp) as f64 / n as f64;
                resistance = resistance.max(p - p_star);
            }
        }
        let arg = share * (p_tilde - 2.0 * r_n)
            - rest_share * (resistance + 2.0 * r_n + 2.0 * r_rest)
            - eps;
        if arg > 0.0 {
            outer += 1.0 / n as f64;
        }
    }
    outer - r_n - r_test
}

/// Feature-only planting lower bound. The modified dataset is materialized
/// literally, escaping non-target samples by flipping the first fixed
/// feature of g(x).
pub fn oracle_plant_fo(inst: &Instance) -> f64 {
    let n = inst.samples.len();
    let s = signal_card(&inst.cards, &inst.fixed);
    let y = inst.n_labels as u128;
    let delta_tilde = inst.delta / (2 + 2 * s + 2 * s * y) as f64;
    let r_n = r_term(delta_tilde, n as u64);
    let r_rest = r_term(delta_tilde, inst.n_consumers - n as u64);
    let r_test = r_term(delta_tilde, inst.n_test);
    let eps = inst.epsilon / (1.0 - inst.epsilon);
    let share = n as f64 / inst.n_consumers as f64;
    let rest_share = (inst.n_consumers - n as u64) as f64 / inst.n_consumers as f64;

    let (first_idx, forced) = inst.fixed[0];
    let modified: Vec<RawSample> = inst
        .samples
        .iter()
        .map(|(x, yy)| {
            if *yy == inst.y_star {
                (map_g(&inst.fixed, x), *yy)
            } else {
                let mut e = map_g(&inst.fixed, x);
                e[first_idx] = if forced == 0 { 1 } else { 0 };
                (e, *yy)
            }
        })
        .collect();

    let mut outer = 0.0;
    for (x, _) in &inst.samples {
        let gx = map_g(&inst.fixed, x);
        let first = count_pair(&modified, &gx, inst.y_star) as f64 / n as f64;
        let p_star = count_pair(&inst.samples, &gx, inst.y_star) as f64 / n as f64;
        let mut resistance = f64::NEG_INFINITY;
        for yp in 0..inst.n_labels {
            if yp != inst.y_star {
                let p = count_pair(&inst.samples, &gx, yp) as f64 / n as f64;
                resistance = resistance.max(p - p_star);
            }
        }
        let arg = share * (first - 2.0 * r_n)
            - rest_share * (resistance + 2.0 * r_n + 2.0 * r_rest)
            - eps;
        if arg > 0.0 {
            outer += 1.0 / n as f64;
        }
    }
    outer - r_n - r_test
}

/// Adaptive unplanting lower bound from an (estimation, rest) split.
pub fn oracle_unplant(inst: &Instance, est: &[RawSample], rest: &[RawSample]) -> f64 {
    let n = est.len() + rest.len();
    let n_rest = rest.len();
    let s = signal_card(&inst.cards, &inst.fixed);
    let delta_tilde = inst.delta / (2 + 6 * s) as f64;
    let r_n = r_term(delta_tilde, n as u64);
    let r_split = r_term(delta_tilde, n_rest as u64);
    let r_base = r_term(delta_tilde, inst.n_consumers - n as u64);
    let r_test = r_term(delta_tilde, inst.n_test);
    let eps = inst.epsilon / (1.0 - inst.epsilon);
    let share = n as f64 / inst.n_consumers as f64;
    let rest_share = (inst.n_consumers - n as u64) as f64 / inst.n_consumers as f64;

    let estimated_label = |xt: &[u16]| -> u16 {
        let mut best = u16::MAX;
        let mut best_count = 0usize;
        for yp in 0..inst.n_labels {
            if yp == inst.y_star {
                continue;
            }
            let c = count_pair(est, xt, yp);
            if best == u16::MAX || c > best_count {
                best = yp;
                best_count = c;
            }
        }
        best
    };

    let all: Vec<RawSample> = est.iter().chain(rest.iter()).cloned().collect();
    let mapped: Vec<Vec<u16>> = all.iter().map(|(x, _)| map_g(&inst.fixed, x)).collect();
    let mut outer = 0.0;
    for xt in &mapped {
        let p_tilde = mapped.iter().filter(|m| m == &xt).count() as f64 / n as f64;
        let y_hat = estimated_label(xt);
        let resistance = count_pair(rest, xt, inst.y_star) as f64 / n_rest as f64
            - count_pair(rest, xt, y_hat) as f64 / n_rest as f64;
        let arg = share * (p_tilde - 2.0 * r_n)
            - rest_share * (resistance + 2.0 * r_split + 2.0 * r_base)
            - eps;
        if arg > 0.0 {
            outer += 1.0 / n as f64;
        }
    }
    outer - r_n - r_test
}

/// Signal erasing lower bound.
pub fn oracle_erase(inst: &Instance) -> f64 {
    let n = inst.samples.len();
    let s = signal_card(&inst.cards, &inst.fixed);
    let x_card = full_card(&inst.cards);
    let y = inst.n_labels as u128;
    let delta_tilde = inst.delta / (2 + s * y + 2 * x_card + 2 * x_card * y) as f64;
    let r_n = r_term(delta_tilde, n as u64);
    let r_rest = r_term(delta_tilde, inst.n_consumers - n as u64);
    let r_test = r_term(delta_tilde, inst.n_test);
    let eps = inst.epsilon / (1.0 - inst.epsilon);
    let share = n as f64 / inst.n_consumers as f64;
    let rest_share = (inst.n_consumers - n as u64) as f64 / inst.n_consumers as f64;

    let best_label = |xt: &[u16]| -> u16 {
        let mut best = 0u16;
        let mut best_count = count_pair(&inst.samples, xt, 0);
        for yp in 1..inst.n_labels {
            let c = count_pair(&inst.samples, xt, yp);
            if c > best_count {
                best = yp;
                best_count = c;
            }
        }
        best
    };

    let mut outer = 0.0;
    for (x, _) in &inst.samples {
        let p_x = count_feature(&inst.samples, x) as f64 / n as f64;
        let y_best = best_label(&map_g(&inst.fixed, x));
        let p_best = count_pair(&inst.samples, x, y_best) as f64 / n as f64;
        let mut resistance = f64::NEG_INFINITY;
        for yp in 0..inst.n_labels {
            if yp != y_best {
                let p = count_pair(&inst.samples, x, yp) as f64 / n as f64;
                resistance = resistance.max(p - p_best);
            }
        }
        let arg = share * (p_x - 2.0 * r_n)
            - rest_share * (resistance + 2.0 * r_n + 2.0 * r_rest)
            - eps;
        if arg > 0.0 {
            outer += 1.0 / n as f64;
        }
    }
    outer - r_n - r_test
}
