//! Seeded random instances shared by the integration suites.
#![allow(dead_code)]

use monoapprox::order::order_from_family;
use monoapprox::{FinitePreorder, FunctionFamily, GridFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Trial {
    pub seed: u64,
    pub order: FinitePreorder,
    pub family: FunctionFamily,
    pub target: GridFunction,
}

fn value(rng: &mut ChaCha8Rng, quantized: bool) -> f64 {
    if quantized {
        rng.random_range(0..5) as f64 / 4.0
    } else {
        rng.random_range(0.0..2.0)
    }
}

/// A space of 2..=64 points ordered by a family of 1..=8 non-negative
/// functions, with an isotone target vanishing on the common zeros.
pub fn trial(seed: u64) -> Trial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = rng.random_range(2..=64);
    let count = rng.random_range(1..=8);
    let quantized = rng.random_bool(0.5);
    let zeros: Vec<bool> = if rng.random_bool(0.3) {
        (0..size).map(|_| rng.random_bool(0.2)).collect()
    } else {
        vec![false; size]
    };
    let generators: Vec<Vec<f64>> = (0..count)
        .map(|_| {
            (0..size)
                .map(|x| if zeros[x] { 0.0 } else { value(&mut rng, quantized) })
                .collect()
        })
        .collect();
    let family = FunctionFamily::from_vecs(generators).unwrap();
    let order = order_from_family(size, &family).unwrap();
    let zero_set = monoapprox::order::common_zero_set(&family);

    // f(x) = max of r over the points below x
    let spread = if rng.random_bool(0.3) { rng.random_range(1.0..3.0) } else { 1.0 };
    let quantize_target = rng.random_bool(0.3);
    let raw: Vec<f64> = (0..size)
        .map(|x| {
            if zero_set.contains(&x) {
                return 0.0;
            }
            let r: f64 = rng.random_range(0.0..1.0) * spread;
            if quantize_target {
                (r * 16.0).floor() / 16.0
            } else {
                r
            }
        })
        .collect();
    let target: Vec<f64> = (0..size)
        .map(|x| {
            (0..size)
                .filter(|&y| order.leq(y, x))
                .map(|y| raw[y])
                .fold(0.0, f64::max)
        })
        .collect();
    Trial {
        seed,
        order,
        family,
        target: GridFunction::new(target).unwrap(),
    }
}
