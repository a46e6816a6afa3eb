use std::collections::BTreeMap;

use gglt::coding::{
    coeff_rate, encode_block, eg0_bits, evaluate_dataset, lambda_rd, quantize, rdot_select, tu_bits, Candidate,
    NamedCandidate, QuantSpec, Scheme, TransformSet,
};
use gglt::dataset::{BlockDataset, ResidualBlock};
use gglt::eagbt::EagbtParams;
use gglt::matrix::Mat;
use gglt::transforms::{closed_form_dct_dst, SeparablePair, TransformKind};
use gglt::Error;
use proptest::prelude::*;

/// Builds the signed Exp-Golomb codeword as a string of bits.
fn eg0_codeword(q: i64) -> String {
    let v: u64 = if q > 0 { 2 * q as u64 - 1 } else { 2 * q.unsigned_abs() };
    let body = format!("{:b}", v + 1);
    "0".repeat(body.len() - 1) + &body
}

fn set_of_four(n: usize) -> TransformSet {
    let dst7 = closed_form_dct_dst(TransformKind::Dst7, n).unwrap();
    let dct = closed_form_dct_dst(TransformKind::Dct2, n).unwrap();
    let mixed = SeparablePair::new(dst7.clone(), dct).unwrap();
    TransformSet::new(vec![
        NamedCandidate { name: "dct".into(), candidate: Candidate::dct(n).unwrap() },
        NamedCandidate { name: "dst7".into(), candidate: Candidate::Separable(SeparablePair::new(dst7.clone(), dst7).unwrap()) },
        NamedCandidate { name: "mixed".into(), candidate: Candidate::Nonseparable(mixed.to_nonseparable()) },
        NamedCandidate { name: "eagbt".into(), candidate: Candidate::EdgeAdaptive(EagbtParams::default()) },
    ])
    .unwrap()
}

fn block_strategy() -> impl Strategy<Value = Mat> {
    (2usize..=6, 1i32..=200).prop_flat_map(|(n, amp)| {
        proptest::collection::vec(-amp..=amp, n * n).prop_map(move |v| Mat::from_fn(n, n, |i, j| v[i * n + j] as f64))
    })
}

proptest! {
    #[test]
    fn eg0_length_matches_codeword(q in -100_000i64..100_000) {
        prop_assert_eq!(eg0_bits(q) as usize, eg0_codeword(q).len());
    }

    #[test]
    fn coefficient_bits_do_not_grow_with_qp(b in block_strategy()) {
        let set = set_of_four(b.rows());
        for c in set.candidates() {
            let bits: Vec<f64> = [22, 27, 32, 37, 42]
                .iter()
                .map(|&qp| encode_block(&b, &c.candidate, &QuantSpec::new(qp)).unwrap().coeff_bits)
                .collect();
            prop_assert!(bits.windows(2).all(|w| w[1] <= w[0]), "{}: {:?}", c.name, bits);
        }
    }

    #[test]
    fn error_is_the_same_in_both_domains(b in block_strategy(), qp in 0i32..51) {
        let q = QuantSpec::new(qp);
        for c in set_of_four(b.rows()).candidates() {
            let r = encode_block(&b, &c.candidate, &q).unwrap();
            prop_assert!((r.distortion_sse - r.coeff_sse).abs() <= 1e-9 * r.distortion_sse.max(1.0));
            prop_assert_eq!(r.rate_bits, r.coeff_bits + r.side_bits);
        }
    }

    #[test]
    fn rdot_picks_the_cheapest_candidate(b in block_strategy(), qp in 20i32..45) {
        let q = QuantSpec::new(qp);
        let set = set_of_four(b.rows());
        let best = rdot_select(&b, &set, &q).unwrap();
        let costs: Vec<f64> = set
            .candidates()
            .iter()
            .enumerate()
            .map(|(i, c)| encode_block(&b, &c.candidate, &q).unwrap().cost + lambda_rd(qp) * tu_bits(i, set.len()))
            .collect();
        let min = costs.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!((best.cost - min).abs() <= 1e-9 * min.max(1.0));
        prop_assert!((costs[best.chosen_index] - min).abs() <= 1e-9 * min.max(1.0));
        prop_assert_eq!(best.index_bits, tu_bits(best.chosen_index, set.len()));
    }
}

#[test]
fn quantization_and_rate_examples() {
    let q = QuantSpec::new(22);
    assert_eq!(q.step, 8.0);
    assert_eq!(quantize(&[3.9, 4.0, -4.0, -12.1, 100.0], &q), vec![0, 1, -1, -2, 13]);
    assert_eq!(coeff_rate(&[0, 1, -1, 2]), 1.0 + 3.0 + 3.0 + 5.0);
    assert_eq!(tu_bits(0, 1), 0.0);
    assert_eq!((0..4).map(|i| tu_bits(i, 4)).collect::<Vec<_>>(), vec![1.0, 2.0, 3.0, 3.0]);
}

fn two_class_dataset() -> BlockDataset {
    let blocks = (0..40)
        .map(|k| ResidualBlock {
            class_id: (k % 2) as u16,
            values: (0..16).map(|i| (((k * 7 + i * 13) % 41) as i16 - 20) * 3).collect(),
        })
        .collect();
    BlockDataset::from_blocks(4, blocks, "pattern").unwrap()
}

#[test]
fn mdt_requires_a_trained_transform_for_every_class() {
    let d = two_class_dataset();
    let mut sets = BTreeMap::new();
    sets.insert(0u16, set_of_four(4));
    let err = evaluate_dataset(&d, Scheme::Mdt, &sets, &[22]).unwrap_err();
    assert!(matches!(err, Error::MissingTransform { class_id: 1 }));
    let single = TransformSet::new(vec![NamedCandidate { name: "dct".into(), candidate: Candidate::dct(4).unwrap() }]).unwrap();
    sets.insert(1, single);
    assert!(matches!(evaluate_dataset(&d, Scheme::Mdt, &sets, &[22]), Err(Error::MissingTransform { class_id: 1 })));
    assert!(evaluate_dataset(&d, Scheme::Rdot, &sets, &[22]).is_ok());
    assert!(evaluate_dataset(&d, Scheme::DctOnly, &BTreeMap::new(), &[22]).is_ok());
}

#[test]
fn rdot_is_never_worse_than_dct_in_mean_cost() {
    let d = two_class_dataset();
    let sets: BTreeMap<u16, TransformSet> = [(0u16, set_of_four(4)), (1, set_of_four(4))].into_iter().collect();
    let qps = [22, 27, 32, 37];
    let dct = evaluate_dataset(&d, Scheme::DctOnly, &sets, &qps).unwrap();
    let rdot = evaluate_dataset(&d, Scheme::Rdot, &sets, &qps).unwrap();
    for a in dct.curve.points() {
        let b = rdot.curve.points().iter().find(|p| p.qp == a.qp).unwrap();
        // DCT alone pays one index bit inside RDOT.
        assert!(b.mean_cost <= a.mean_cost + lambda_rd(a.qp) + 1e-9);
    }
    let total: f64 = rdot.selection[0].1.iter().sum();
    assert!((total - 100.0).abs() < 1e-9);
}
