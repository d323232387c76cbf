use proptest::prelude::*;
use tegnas::netgen::{compile, random_arch, Architecture, Op, SearchSpace};
use tegnas::numkit::{sym_eig, Matrix, Rng};

fn batch(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = Rng::new(seed);
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.standard_normal()).collect(),
    )
    .unwrap()
}

#[test]
fn all_none_jacobian_is_classifier_bias_only() {
    let space = SearchSpace::cell201();
    let net = compile(
        &Architecture::uniform_cell(&space, Op::None).unwrap(),
        &space,
        &mut Rng::new(1),
    )
    .unwrap();
    let j = net.jacobian(&batch(4, 192, 2)).unwrap();
    let bias = net.group("classifier.bias").unwrap();
    for i in 0..4 {
        for (p, &v) in j.row(i).iter().enumerate() {
            let expected = if bias.contains(&p) { 1.0 } else { 0.0 };
            assert_eq!(v, expected, "row {i} param {p}");
        }
    }
}

#[test]
fn zero_input_sets_no_bits() {
    let space = SearchSpace::cell201();
    let net = compile(
        &Architecture::uniform_cell(&space, Op::Conv3x3).unwrap(),
        &space,
        &mut Rng::new(3),
    )
    .unwrap();
    let (_, bits) = net.forward(&Matrix::zeros(2, 192)).unwrap();
    assert!(bits.bit_count > 0);
    assert!(bits.rows.iter().all(|r| r.iter().all(|&w| w == 0)));
}

#[test]
fn feature_gram_is_psd() {
    let space = SearchSpace::cell201();
    let mut rng = Rng::new(4);
    for _ in 0..5 {
        let a = random_arch(&space, &mut rng).unwrap();
        let net = compile(&a, &space, &mut rng).unwrap();
        let f = net
            .last_layer_features(&batch(12, 192, rng.next_u64()))
            .unwrap();
        assert_eq!(f.cols(), net.feature_dim());
        let eig = sym_eig(&f.gram()).unwrap();
        assert!(eig.min() >= -1e-10 * eig.max().max(1e-300));
    }
}

#[test]
fn doubling_classifier_weights() {
    let space = SearchSpace::cell201();
    let a = Architecture::parse(
        "|nor_conv_3x3~0|+|skip_connect~0|nor_conv_1x1~1|+|avg_pool_3x3~0|nor_conv_3x3~1|skip_connect~2|",
        &space,
    )
    .unwrap();
    let net = compile(&a, &space, &mut Rng::new(5)).unwrap();
    let mut doubled = net.clone();
    let w = net.group("classifier.weight").unwrap();
    doubled.params_mut()[w.clone()]
        .iter_mut()
        .for_each(|p| *p *= 2.0);
    let x = batch(3, 192, 6);
    let j1 = net.jacobian(&x).unwrap();
    let j2 = doubled.jacobian(&x).unwrap();
    let bias = net.group("classifier.bias").unwrap();
    for i in 0..3 {
        for p in 0..net.param_count() {
            let (a, b) = (j1[(i, p)], j2[(i, p)]);
            if w.contains(&p) || bias.contains(&p) {
                // the classifier block is the feature vector itself
                assert_eq!(a, b);
            } else {
                assert!((b - 2.0 * a).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}

#[test]
fn compile_is_deterministic() {
    let space = SearchSpace::graph101();
    let mut rng = Rng::new(7);
    let a = random_arch(&space, &mut rng).unwrap();
    let n1 = compile(&a, &space, &mut Rng::new(8)).unwrap();
    let n2 = compile(&a, &space, &mut Rng::new(8)).unwrap();
    assert_eq!(n1.params(), n2.params());
}

#[test]
fn single_sample_feature_shape() {
    let space = SearchSpace::toy();
    let net = compile(
        &Architecture::uniform_cell(&space, Op::Conv3x3).unwrap(),
        &space,
        &mut Rng::new(9),
    )
    .unwrap();
    let f = net.last_layer_features(&batch(1, 192, 10)).unwrap();
    assert_eq!(f.shape(), (1, space.macro_cfg.stem_channels));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn skip_to_conv_never_shrinks(seed in any::<u64>(), edge in 0usize..6) {
        let space = SearchSpace::cell201();
        let mut rng = Rng::new(seed);
        let mut a = random_arch(&space, &mut rng).unwrap();
        let skip = space.op_index("skip_connect").unwrap();
        let conv = space.op_index("nor_conv_3x3").unwrap();
        if let Architecture::Cell { ops } = &mut a {
            ops[edge] = skip;
        }
        let before = compile(&a, &space, &mut Rng::new(0)).unwrap().param_count();
        if let Architecture::Cell { ops } = &mut a {
            ops[edge] = conv;
        }
        let after = compile(&a, &space, &mut Rng::new(0)).unwrap().param_count();
        prop_assert!(after >= before);
    }

    #[test]
    fn graph_validity_closed_under_mutation(seed in any::<u64>()) {
        let space = SearchSpace::graph101();
        let mut rng = Rng::new(seed);
        let mut a = random_arch(&space, &mut rng).unwrap();
        for _ in 0..20 {
            a = tegnas::netgen::mutate(&a, &space, &mut rng).unwrap();
            prop_assert!(a.validate(&space).is_ok());
        }
    }

    #[test]
    fn cell_strings_round_trip(seed in any::<u64>()) {
        let space = SearchSpace::cell201();
        let a = random_arch(&space, &mut Rng::new(seed)).unwrap();
        prop_assert_eq!(Architecture::parse(&a.to_string(&space), &space).unwrap(), a);
    }
}
