use gglt::analysis::variance_map;
use gglt::gmrf::{build_inter_model, build_intra_model, generate_residual_dataset, sample_gmrf};
use gglt::graph::{ggl_from_graph, laplacian_quadratic, WeightedGraph};
use gglt::learn::covariance_from_samples;
use gglt::matrix::{inv_spd, Mat};
use proptest::prelude::*;

#[test]
fn residual_covariance_inverts_the_block_precision() {
    for model in [build_intra_model(3, 1.0, 2.0, 0.05).unwrap(), build_inter_model(3, 1.0, 4.0, 0.05).unwrap()] {
        let theta_x = model.residual_precision();
        theta_x.validate_nonnegative_loops().unwrap();
        let r = model.sample_residuals(50_000, 17).unwrap();
        let s = covariance_from_samples(model.n(), r.iter().map(Vec::as_slice)).unwrap();
        let expected = inv_spd(theta_x.matrix()).unwrap();
        let rel = s.as_mat().sub(expected.as_mat()).unwrap().frobenius() / expected.frobenius();
        assert!(rel < 0.03, "relative error {rel}");
    }
}

#[test]
fn intra_variance_grows_towards_the_bottom_right() {
    let model = build_intra_model(8, 1.0, 1.0, 0.01).unwrap();
    let d = generate_residual_dataset(&model, 3000, 8.0, 5, 0).unwrap();
    let v = variance_map(&d).unwrap();
    let mean = |r: std::ops::Range<usize>, c: std::ops::Range<usize>| {
        let cells: Vec<f64> = r.flat_map(|i| c.clone().map(move |j| (i, j))).map(|(i, j)| v[(i, j)]).collect();
        cells.iter().sum::<f64>() / cells.len() as f64
    };
    assert!(mean(4..8, 4..8) > mean(0..4, 0..4));
}

#[test]
fn samples_do_not_depend_on_thread_count() {
    let l = build_intra_model(4, 1.0, 1.0, 0.01).unwrap().residual_precision();
    let run = |t| {
        rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap().install(|| sample_gmrf(&l, 64, 99).unwrap())
    };
    assert_eq!(run(1), run(3));
}

fn graph_strategy() -> impl Strategy<Value = (WeightedGraph, Vec<f64>)> {
    (1usize..10).prop_flat_map(|n| {
        (
            proptest::collection::vec(prop_oneof![Just(0.0), 0.01f64..5.0], n * n),
            proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..3.0], n),
            proptest::collection::vec(-20.0f64..20.0, n),
        )
            .prop_map(move |(w, loops, r)| {
                let w = Mat::from_fn(n, n, |i, j| if i == j { 0.0 } else { w[i.min(j) * n + i.max(j)] });
                (WeightedGraph::new(w, loops).unwrap(), r)
            })
    })
}

proptest! {
    #[test]
    fn quadratic_form_splits_into_loops_and_edges((g, r) in graph_strategy()) {
        let l = ggl_from_graph(&g);
        let direct = l.matrix().quadratic_form(&r).unwrap();
        let split = laplacian_quadratic(&l, &r).unwrap();
        prop_assert!((direct - split).abs() <= 1e-12 * direct.abs().max(1e-300) + 1e-300);
    }

    #[test]
    fn quadratic_form_is_nonnegative((g, r) in graph_strategy()) {
        prop_assert!(laplacian_quadratic(&ggl_from_graph(&g), &r).unwrap() >= 0.0);
    }
}
