use gglt::eagbt::{detect_edge_map, eagbt_graph, eagbt_transform, edge_map_rate, kt_code_length, EagbtParams, EdgeMap};
use gglt::matrix::Mat;
use proptest::prelude::*;

/// Sequential estimator probability in closed form: it depends only on the counts.
fn kt_oracle(zeros: usize, ones: usize) -> f64 {
    let mut log_p = 0.0;
    for i in 0..zeros {
        log_p += (i as f64 + 0.5).log2();
    }
    for j in 0..ones {
        log_p += (j as f64 + 0.5).log2();
    }
    for t in 0..zeros + ones {
        log_p -= (t as f64 + 1.0).log2();
    }
    -log_p
}

fn block_strategy(max_n: usize) -> impl Strategy<Value = Mat> {
    (2usize..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(-255i32..=255, n * n)
            .prop_map(move |v| Mat::from_fn(n, n, |i, j| v[i * n + j] as f64))
    })
}

proptest! {
    #[test]
    fn kt_length_matches_count_formula(bits in proptest::collection::vec(any::<bool>(), 0..200)) {
        let ones = bits.iter().filter(|b| **b).count();
        let got = kt_code_length(bits.iter().copied());
        prop_assert!((got - kt_oracle(bits.len() - ones, ones)).abs() < 1e-9);
    }

    #[test]
    fn edge_map_ignores_a_constant_offset(b in block_strategy(8), offset in -100i32..100) {
        let p = EagbtParams::default();
        let shifted = Mat::from_fn(b.rows(), b.cols(), |i, j| b[(i, j)] + offset as f64);
        prop_assert_eq!(detect_edge_map(&b, &p).unwrap(), detect_edge_map(&shifted, &p).unwrap());
    }

    #[test]
    fn edge_map_commutes_with_transpose_and_negation(b in block_strategy(8)) {
        let p = EagbtParams::default();
        let m = detect_edge_map(&b, &p).unwrap();
        let t = detect_edge_map(&b.transpose(), &p).unwrap();
        let n = b.rows();
        for i in 0..n {
            for j in 0..n - 1 {
                prop_assert_eq!(m.is_h_cut(i, j), t.is_v_cut(j, i));
            }
        }
        prop_assert_eq!(detect_edge_map(&b.scale(-1.0), &p).unwrap(), m);
    }

    #[test]
    fn larger_threshold_cuts_fewer_edges(b in block_strategy(6), t in 0.0f64..50.0) {
        let low = detect_edge_map(&b, &EagbtParams { t_edge: t, ..Default::default() }).unwrap();
        let high = detect_edge_map(&b, &EagbtParams { t_edge: t + 10.0, ..Default::default() }).unwrap();
        for (h, l) in high.symbols().zip(low.symbols()) {
            prop_assert!(!h || l);
        }
    }

    #[test]
    fn eagbt_is_orthonormal_with_a_flat_first_vector(b in block_strategy(5)) {
        let (map, t) = eagbt_transform(&b, &EagbtParams::default()).unwrap();
        let n2 = b.rows() * b.rows();
        let gram = t.basis().t_matmul(t.basis()).unwrap();
        prop_assert!(gram.max_abs_diff(&Mat::identity(n2)) < 1e-10);
        // CGL: the constant vector has eigenvalue zero.
        let dc = 1.0 / (n2 as f64).sqrt();
        prop_assert!(t.basis().column(0).iter().all(|v| (v.abs() - dc).abs() < 1e-8));
        prop_assert!(edge_map_rate(&map) > 0.0);
    }
}

#[test]
fn cut_edges_get_the_reduced_weight() {
    let p = EagbtParams { t_edge: 10.0, s_edge: 4.0, w_c: 2.0 };
    let mut v = vec![false; 12];
    v[5] = true;
    let map = EdgeMap::from_cuts(4, vec![false; 12], v).unwrap();
    let l = eagbt_graph(&map, &p).unwrap();
    // v index 5 is the edge (1, 1)-(2, 1).
    assert_eq!(l.edge_weight(5, 9), 0.5);
    assert_eq!(l.edge_weight(4, 8), 2.0);
    assert!(l.self_loops().iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn edge_map_rate_grows_with_cuts() {
    let empty = EdgeMap::empty(4);
    let mut h = vec![false; 12];
    h[0] = true;
    h[7] = true;
    let two = EdgeMap::from_cuts(4, h, vec![false; 12]).unwrap();
    assert!(edge_map_rate(&two) > edge_map_rate(&empty));
    assert!((edge_map_rate(&empty) - kt_oracle(24, 0)).abs() < 1e-12);
}
