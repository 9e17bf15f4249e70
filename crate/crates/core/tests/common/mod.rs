#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ulam_stability::prelude::*;

/// Seeded random sub-Markov matrix with a planted structure, in a random
/// state order: up to two closed classes (stochastic rows supported inside
/// the class), transient stochastic rows that only point forward in a
/// hidden order or into closed classes, and leaky rows keeping at most 2% of
/// their mass and pointing anywhere. Every cycle outside the closed classes
/// passes through a leaky row, so transient matrices satisfy
/// `‖P⁸‖∞ ≤ 0.02` and `P⁶⁴` is a reliable brute-force oracle.
pub fn random_sub_markov(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    // class[k] = Some(c) for states in closed class c, by hidden position k
    let n_closed = [0, 0, 1, 2][rng.gen_range(0..4)];
    let mut class = vec![None; n];
    let mut next = 0;
    let mut ranges = Vec::new();
    for c in 0..n_closed {
        let size = rng.gen_range(1..=3);
        ranges.push(next..next + size);
        for k in next..next + size {
            class[k] = Some(c);
        }
        next += size;
    }
    let mut a = vec![vec![0.0; n]; n];
    let fill = |rng: &mut ChaCha8Rng, targets: &[usize], total: f64| -> Vec<(usize, f64)> {
        let mut row = Vec::new();
        for &t in targets {
            if rng.gen::<f64>() < 0.5 {
                row.push((t, rng.gen::<f64>() + 1e-3));
            }
        }
        if row.is_empty() && !targets.is_empty() {
            row.push((targets[rng.gen_range(0..targets.len())], 1.0));
        }
        let s: f64 = row.iter().map(|e| e.1).sum();
        row.iter_mut().for_each(|e| e.1 *= total / s);
        row
    };
    for k in 0..n {
        let row = match class[k] {
            Some(c) => {
                let members: Vec<usize> = ranges[c].clone().collect();
                fill(&mut rng, &members, 1.0)
            }
            None if rng.gen::<f64>() < 0.5 => {
                // forward-only stochastic row; the last state has nowhere to go
                let targets: Vec<usize> = (0..n).filter(|&t| t > k || class[t].is_some()).collect();
                if targets.is_empty() {
                    Vec::new()
                } else {
                    fill(&mut rng, &targets, 1.0)
                }
            }
            None => {
                let all: Vec<usize> = (0..n).collect();
                let leak_keep = rng.gen_range(0.0..0.02);
                fill(&mut rng, &all, leak_keep)
            }
        };
        for (t, v) in row {
            a[order[k]][order[t]] += v;
        }
    }
    a
}

/// Unstructured seeded sub-Markov matrix: random pattern, each row either
/// stochastic or keeping a uniform fraction of its mass.
pub fn random_sub_markov_unstructured(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..n)
                .map(|_| if rng.gen::<f64>() < 0.3 { rng.gen::<f64>() } else { 0.0 })
                .collect();
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                let target = if rng.gen::<f64>() < 0.6 { 1.0 } else { rng.gen::<f64>() };
                row.iter_mut().for_each(|v| *v *= target / s);
            }
            row
        })
        .collect()
}

pub fn dense_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for k in 0..b.len() {
            if a[i][k] != 0.0 {
                for j in 0..m {
                    out[i][j] += a[i][k] * b[k][j];
                }
            }
        }
    }
    out
}

pub fn dense_power(a: &[Vec<f64>], k: u32) -> Vec<Vec<f64>> {
    let mut acc = a.to_vec();
    for _ in 1..k {
        acc = dense_mul(&acc, a);
    }
    acc
}

pub fn pendulum_partition(n: usize) -> Partition {
    Partition::new(Domain::symmetric_box(&[PI, PI], &[true, true]).unwrap(), vec![n, n]).unwrap()
}

pub fn rantzer_partition(n: usize) -> Partition {
    Partition::new(Domain::symmetric_box(&[4.0, 4.0], &[true, false]).unwrap(), vec![n, n]).unwrap()
}

/// `x ↦ (0.5 + ξ) x` on `[-1, 1]`.
pub fn contraction(alpha: f64, q: usize) -> StochasticMap {
    let noise = quantize_uniform_noise(alpha, q).unwrap();
    StochasticMap::new("contraction", 1, noise, vec![0.0], |x, w, out| out[0] = (0.5 + w[0]) * x[0])
        .unwrap()
}

pub fn contraction_partition(cells: usize) -> Partition {
    Partition::new(Domain::new(vec![-1.0], vec![1.0], vec![false]).unwrap(), vec![cells]).unwrap()
}

/// Sink-free cell matrix of a small dense sub-Markov matrix.
pub fn csr(a: &[Vec<f64>]) -> CsrMatrix {
    CsrMatrix::from_dense(a)
}
