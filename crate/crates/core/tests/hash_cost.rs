//! Timing of one sparse table step; kept in its own binary so no other test
//! competes for the CPU while it runs.

use std::time::Instant;

use diner::{DenseMatrix, HashInit, HashTable};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BATCH: usize = 512;
const WIDTH: usize = 2;

/// Fastest scatter-and-update step over `repeats`, allocation excluded.
fn step_time(len: usize, repeats: usize) -> f64 {
    let mut table = HashTable::<f64>::init(len, WIDTH, HashInit::Zeros, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(len as u64);
    let indices = sample(&mut rng, len, BATCH).into_vec();
    let grad = DenseMatrix::from_fn(WIDTH, BATCH, |_, _| rng.gen_range(-1e-3..1e-3));
    (0..repeats)
        .map(|_| {
            let t = Instant::now();
            let g = table.scatter_grad(&indices, &grad).unwrap();
            table.apply_sparse(&g).unwrap();
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn step_cost_does_not_grow_with_table_length() {
    let times: Vec<f64> = [1_000, 100_000, 10_000_000].iter().map(|&n| step_time(n, 30)).collect();
    let fastest = times.iter().cloned().fold(f64::INFINITY, f64::min);
    let slowest = times.iter().cloned().fold(0.0, f64::max);
    assert!(slowest / fastest <= 2.0, "step times {times:?}");
}
