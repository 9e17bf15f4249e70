mod common;

use proptest::prelude::*;

use ulam_stability::expr::Expr;
use ulam_stability::io::{fmt_f64, matrix_market_string, read_matrix_market, write_matrix_market};
use ulam_stability::prelude::*;

use common::*;

fn linear_map(a: [f64; 4], spread: f64) -> StochasticMap {
    let noise = quantize_uniform_noise(spread, 3).unwrap();
    StochasticMap::new("linear", 2, noise, vec![0.0, 0.0], move |x, w, out| {
        out[0] = (a[0] * x[0] + a[1] * x[1]) * (1.0 + w[0]);
        out[1] = (a[2] * x[0] + a[3] * x[1]) * (1.0 - w[0]);
    })
    .unwrap()
}

fn dense_strategy(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        prop::collection::vec(prop_oneof![3 => Just(0.0), 2 => -5.0..5.0f64], cols),
        rows,
    )
}

fn dense_t(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

fn near(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rows_are_stochastic_for_linear_maps(
        a in prop::array::uniform4(-2.0..2.0f64),
        spread in 0.0..0.6f64,
        wrap in any::<(bool, bool)>(),
        seed in any::<u64>(),
    ) {
        let map = linear_map(a, spread);
        let domain = Domain::symmetric_box(&[1.0, 1.0], &[wrap.0, wrap.1]).unwrap();
        let part = Partition::new(domain, vec![7, 5]).unwrap();
        let sink = TransferMatrix::build(&map, &part, 20, seed, SinkPolicy::SinkUnstable).unwrap();
        let clamp = TransferMatrix::build(&map, &part, 20, seed, SinkPolicy::Clamp).unwrap();
        let discard = TransferMatrix::build(&map, &part, 20, seed, SinkPolicy::Discard).unwrap();
        for tm in [&sink, &clamp, &discard] {
            for m in tm.per_atom().iter().chain([tm.combined()]) {
                for s in m.row_sums() {
                    prop_assert!((s - 1.0).abs() <= 1e-12);
                }
            }
        }
        prop_assert_eq!(discard.combined(), sink.combined());
        for i in 0..part.len() {
            prop_assert_eq!(clamp.combined().get(i, clamp.sink()), 0.0);
        }
    }

    #[test]
    fn csr_operations_match_dense(a in dense_strategy(5, 4), b in dense_strategy(4, 3), v in prop::collection::vec(-3.0..3.0f64, 5), u in prop::collection::vec(-3.0..3.0f64, 4)) {
        let m = CsrMatrix::from_dense(&a);
        prop_assert_eq!(m.to_dense(), a.clone());
        prop_assert_eq!(m.transpose().to_dense(), dense_t(&a));
        let mv = m.mul_vec(&u).unwrap();
        let want: Vec<f64> = a.iter().map(|r| r.iter().zip(&u).map(|(x, y)| x * y).sum()).collect();
        prop_assert!(near(&mv, &want));
        let vm = m.vec_mul(&v).unwrap();
        let want: Vec<f64> = (0..4).map(|j| (0..5).map(|i| v[i] * a[i][j]).sum()).collect();
        prop_assert!(near(&vm, &want));
        let prod = m.matmul(&CsrMatrix::from_dense(&b)).unwrap().to_dense();
        let want = dense_mul(&a, &b);
        for (p, w) in prod.iter().zip(&want) {
            prop_assert!(near(p, w));
        }
        let rows = [4, 1];
        let cols = [Some(1), None, Some(0), None];
        let sel = m.select(&rows, &cols, 2).to_dense();
        for (k, &i) in rows.iter().enumerate() {
            prop_assert_eq!(sel[k][0], a[i][2]);
            prop_assert_eq!(sel[k][1], a[i][0]);
        }
    }

    #[test]
    fn fmt_f64_round_trips(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        prop_assume!(v.is_finite());
        let back: f64 = fmt_f64(v).parse().unwrap();
        prop_assert_eq!(back.to_bits(), v.to_bits());
    }

    #[test]
    fn matrix_market_round_trips(a in dense_strategy(6, 7)) {
        let m = CsrMatrix::from_dense(&a);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mtx");
        write_matrix_market(&path, &m, &["note".to_string()]).unwrap();
        let back = read_matrix_market(&path).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(matrix_market_string(&back, &[]), matrix_market_string(&m, &[]));
    }

    #[test]
    fn cell_indexing_is_a_bijection(n0 in 1usize..9, n1 in 1usize..9, n2 in 1usize..5) {
        let domain = Domain::new(vec![-1.0, 0.0, 2.0], vec![1.0, 3.0, 2.5], vec![true, false, false]).unwrap();
        let part = Partition::new(domain, vec![n0, n1, n2]).unwrap();
        prop_assert_eq!(part.len(), n0 * n1 * n2);
        for cell in 0..part.len() {
            prop_assert_eq!(part.flat_index(&part.multi_index(cell)), cell);
            let c = part.cell_center(cell);
            prop_assert_eq!(part.locate(&c).unwrap().cell(), Some(cell));
            let (lo, hi) = part.cell_bounds(cell);
            for i in 0..3 {
                prop_assert!(lo[i] < c[i] && c[i] < hi[i]);
            }
        }
    }

    #[test]
    fn wrapped_points_locate_like_their_images(x in -50.0..50.0f64, y in -0.9..0.9f64, k in -5i32..5) {
        let domain = Domain::symmetric_box(&[1.0, 1.0], &[true, false]).unwrap();
        let part = Partition::new(domain.clone(), vec![10, 10]).unwrap();
        let mut p = [x, y];
        domain.wrap_point(&mut p);
        prop_assert!((-1.0..1.0).contains(&p[0]));
        prop_assert_eq!(p[1], y);
        let cell = part.locate(&p).unwrap().cell();
        prop_assert!(cell.is_some());
        let shifted = [p[0] + 2.0 * k as f64, y];
        let mut again = shifted;
        domain.wrap_point(&mut again);
        prop_assert!((again[0] - p[0]).abs() < 1e-12 || (again[0] - p[0]).abs() > 2.0 - 1e-12);
        prop_assert_eq!(part.locate(&[y, 1.5]).unwrap().cell(), None);
    }

    #[test]
    fn closed_classes_follow_state_permutations(seed in 0u64..5000, perm_seed in any::<u64>()) {
        use rand::{SeedableRng, seq::SliceRandom};
        let a = random_sub_markov(8, seed);
        let mut perm: Vec<usize> = (0..8).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
        // state i of the original becomes state perm[i]
        let mut b = vec![vec![0.0; 8]; 8];
        for i in 0..8 {
            for j in 0..8 {
                b[perm[i]][perm[j]] = a[i][j];
            }
        }
        let mut original: Vec<Vec<usize>> = find_closed_subpartitions(&csr(&a))
            .iter()
            .map(|c| {
                let mut v: Vec<usize> = c.iter().map(|i| perm[i]).collect();
                v.sort();
                v
            })
            .collect();
        let mut permuted: Vec<Vec<usize>> = find_closed_subpartitions(&csr(&b))
            .iter()
            .map(|c| c.as_slice().to_vec())
            .collect();
        original.sort();
        permuted.sort();
        prop_assert_eq!(original, permuted);
    }

    #[test]
    fn scalar_series_certificate_is_valid(c in 0.0..0.95f64, alpha in 1.0..1.05f64, m in 0.1..10.0f64) {
        let p = CsrMatrix::from_dense(&[vec![c]]);
        let cert = lyapunov_measure_series(&p, &MeasureVector::raw(vec![m]), alpha, 1e-14, 1_000_000)
            .unwrap()
            .into_certificate()
            .unwrap();
        prop_assert!(cert.is_valid());
        prop_assert!((cert.mu_bar.values[0] - m / (1.0 - alpha * c)).abs() <= 1e-9 * cert.mu_bar.values[0]);
        prop_assert!(verify_certificate(&p, &cert.mu_bar.values, cert.gamma).unwrap().0);
    }

    #[test]
    fn expressions_evaluate_like_rust(a in -10.0..10.0f64, b in -10.0..10.0f64, x in -3.0..3.0f64, y in 0.1..3.0f64) {
        let src = format!("{} * x + ({}) - y^2 / 2 + sin(x) * exp(-y) + cos(pi * x)", fmt_f64(a), fmt_f64(b));
        let e = Expr::parse(&src, &["x", "y"]).unwrap();
        let want = a * x + b - y.powi(2) / 2.0 + x.sin() * (-y).exp() + (std::f64::consts::PI * x).cos();
        prop_assert!((e.eval(&[x, y]) - want).abs() <= 1e-12 * (1.0 + want.abs()));
        let neg = Expr::parse("-x^2", &["x"]).unwrap();
        prop_assert_eq!(neg.eval(&[x]), -(x * x));
    }
}
