#![allow(dead_code)]

use ergoflow_core::StochasticMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Row-normalized matrix from raw nonnegative weights; some entries are zeroed.
pub fn from_weights(m: usize, raw: &[f64]) -> StochasticMatrix {
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let mut row: Vec<f64> = raw[i * m..(i + 1) * m].to_vec();
        let s: f64 = row.iter().sum();
        if s == 0.0 {
            row[i] = 1.0;
        } else {
            for v in &mut row {
                *v /= s;
            }
        }
        rows.push(row);
    }
    StochasticMatrix::validate(&rows, 1e-12).unwrap()
}

pub fn stochastic(m: usize) -> impl Strategy<Value = StochasticMatrix> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.0f64..1.0], m * m).prop_map(move |raw| from_weights(m, &raw))
}

pub fn sized_stochastic(max: usize) -> impl Strategy<Value = StochasticMatrix> {
    (1..=max).prop_flat_map(stochastic)
}

pub fn random_matrix(m: usize, rng: &mut ChaCha8Rng) -> StochasticMatrix {
    let raw: Vec<f64> = (0..m * m)
        .map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random::<f64>() })
        .collect();
    from_weights(m, &raw)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
