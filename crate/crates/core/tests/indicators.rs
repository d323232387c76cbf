use tegnas::data::{Batch, BlobConfig, BlobDataset, DataSource};
use tegnas::indicators::*;
use tegnas::netgen::{compile, random_arch, Architecture, Op, SearchSpace};
use tegnas::numkit::{sym_eig, Matrix, Rng};

fn data() -> BlobDataset {
    BlobDataset::new(BlobConfig::default()).unwrap()
}

fn cfg(repeats: usize) -> IndicatorConfig {
    IndicatorConfig {
        repeats,
        ..IndicatorConfig::default()
    }
}

#[test]
fn orthonormal_jacobian_rows_give_unit_kappa() {
    let mut rng = Rng::new(1);
    // rows of a random orthogonal matrix via Gram–Schmidt
    let n = 5;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        for r in &rows {
            let d: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        rows.push(v.into_iter().map(|a| a / norm).collect());
    }
    let j = Matrix::from_rows(&rows).unwrap();
    let (k, capped) = condition_number(&j.gram(), 1e12).unwrap();
    assert!(!capped);
    assert!((k - 1.0).abs() < 1e-10);
}

#[test]
fn all_none_hits_the_cap() {
    let space = SearchSpace::cell201();
    let a = Architecture::uniform_cell(&space, Op::None).unwrap();
    let r = evaluate(&a, &space, &data(), &cfg(2)).unwrap();
    assert_eq!(r.kappa, 1e12);
    assert!(r.per_repeat.iter().all(|v| v.kappa_capped));
}

#[test]
fn all_none_prediction_is_data_independent() {
    let space = SearchSpace::cell201();
    let a = Architecture::uniform_cell(&space, Op::None).unwrap();
    let net = compile(&a, &space, &mut Rng::new(0)).unwrap();
    let d = data();
    let f = net
        .last_layer_features(&d.test_batch(16, &mut Rng::new(1)).unwrap().x)
        .unwrap();
    assert!(f.data().iter().all(|&v| v == 0.0));
    let r = evaluate(&a, &space, &d, &cfg(2)).unwrap();
    // a constant prediction of one-hot labels cannot do better than ~0.9
    assert!(r.mse > 0.9, "{}", r.mse);
}

#[test]
fn affine_network_has_one_region() {
    let space = SearchSpace::cell201();
    let a = Architecture::uniform_cell(&space, Op::Skip).unwrap();
    let r = evaluate(&a, &space, &data(), &cfg(2)).unwrap();
    assert_eq!(r.regions, 1.0);
}

#[test]
fn regions_bounded_by_batch() {
    let space = SearchSpace::cell201();
    let c = IndicatorConfig {
        region_batch: 32,
        ..cfg(1)
    };
    let mut rng = Rng::new(3);
    for _ in 0..4 {
        let a = random_arch(&space, &mut rng).unwrap();
        let r = regions(&a, &space, &data(), &c).unwrap();
        assert!((1.0..=32.0).contains(&r));
    }
}

#[test]
fn regression_reproduces_training_labels() {
    let space = SearchSpace::cell201();
    let d = data();
    let mut rng = Rng::new(4);
    for _ in 0..5 {
        let a = Architecture::uniform_cell(&space, Op::Conv3x3).unwrap();
        let net = compile(&a, &space, &mut rng).unwrap();
        // 8 features + bias: a batch of 8 keeps the Gram invertible
        let train = d.train_batch(8, &mut rng).unwrap();
        let mse = reg_mse_on(&net, &train, &train, 0.0, MseNorm::L2).unwrap();
        assert!(mse < 1e-7, "{mse}");
    }
}

#[test]
fn two_sample_closed_form() {
    // G = I + 11ᵀ = [[2,1],[1,2]]; ŷ = k·G⁻¹ with k = f_test·F_trainᵀ + 1
    let f_train = Matrix::identity(2);
    let y_train = Matrix::identity(2);
    let f_test = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
    let y_test = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    // first: ŷ = [1, 0], error √2; second: ŷ = [0.5, 0.5], error √0.5
    let expected = (2f64.sqrt() + 0.5f64.sqrt()) / 2.0;
    let got =
        kernel_regression_error(&f_train, &y_train, &f_test, &y_test, 0.0, MseNorm::L2).unwrap();
    assert!((got - expected).abs() < 1e-12);
    let sq = kernel_regression_error(&f_train, &y_train, &f_test, &y_test, 0.0, MseNorm::Squared)
        .unwrap();
    assert!((sq - 1.25).abs() < 1e-12);
}

#[test]
fn single_repeat_aggregate_is_the_raw_triple() {
    let space = SearchSpace::toy();
    let a = Architecture::uniform_cell(&space, Op::Conv3x3).unwrap();
    let r = evaluate(&a, &space, &data(), &cfg(1)).unwrap();
    let raw = &r.per_repeat[0];
    assert_eq!(
        (r.kappa, r.regions, r.mse),
        (raw.kappa, raw.regions as f64, raw.mse)
    );
    assert_eq!(r.seeds, vec![0]);
}

#[test]
fn evaluation_is_deterministic() {
    let space = SearchSpace::cell201();
    let a = random_arch(&space, &mut Rng::new(5)).unwrap();
    let d = data();
    assert_eq!(
        evaluate(&a, &space, &d, &cfg(2)).unwrap(),
        evaluate(&a, &space, &d, &cfg(2)).unwrap()
    );
}

#[test]
fn aggregates_agree_with_single_indicator_calls() {
    let space = SearchSpace::toy();
    let a =
        Architecture::parse("|nor_conv_3x3~0|+|skip_connect~0|nor_conv_3x3~1|", &space).unwrap();
    let d = data();
    let c = cfg(2);
    let r = evaluate(&a, &space, &d, &c).unwrap();
    assert_eq!(r.kappa, kappa(&a, &space, &d, &c).unwrap());
    assert_eq!(r.regions, regions(&a, &space, &d, &c).unwrap());
    assert_eq!(r.mse, reg_mse(&a, &space, &d, &c).unwrap());
}

#[test]
fn conv_on_live_edge_adds_regions() {
    let space = SearchSpace::cell201();
    let none = Architecture::parse(
        "|skip_connect~0|+|none~0|skip_connect~1|+|none~0|none~1|skip_connect~2|",
        &space,
    )
    .unwrap();
    let conv = Architecture::parse(
        "|skip_connect~0|+|none~0|skip_connect~1|+|nor_conv_1x1~0|none~1|skip_connect~2|",
        &space,
    )
    .unwrap();
    let d = data();
    let wins = (0..10)
        .filter(|&s| {
            let c = IndicatorConfig {
                base_seed: s,
                region_batch: 64,
                ..cfg(1)
            };
            regions(&conv, &space, &d, &c).unwrap() >= regions(&none, &space, &d, &c).unwrap()
        })
        .count();
    assert!(wins >= 9);
}

#[test]
fn ntk_is_symmetric_psd_and_scale_free() {
    let space = SearchSpace::cell201();
    let d = data();
    let mut rng = Rng::new(6);
    for _ in 0..3 {
        let a = random_arch(&space, &mut rng).unwrap();
        let net = compile(&a, &space, &mut rng).unwrap();
        let j = net
            .jacobian(&d.train_batch(16, &mut rng).unwrap().x)
            .unwrap();
        let theta = j.gram();
        assert!(theta.asymmetry() <= 1e-8 * theta.max_abs());
        let eig = sym_eig(&theta).unwrap();
        assert!(eig.min() >= -1e-10 * eig.max());
        let (k1, c1) = condition_number(&theta, 1e12).unwrap();
        let (k2, c2) = condition_number(&j.scale(3.5).gram(), 1e12).unwrap();
        assert_eq!(c1, c2);
        if !c1 {
            assert!((k1 - k2).abs() <= 1e-9 * k1);
        }
    }
}

#[test]
fn region_count_is_scale_invariant_and_monotone() {
    let space = SearchSpace::cell201();
    let a = Architecture::uniform_cell(&space, Op::Conv1x1).unwrap();
    let net = compile(&a, &space, &mut Rng::new(7)).unwrap();
    let b: Batch = data().train_batch(128, &mut Rng::new(8)).unwrap();
    assert_eq!(
        count_regions(&net, &b.x).unwrap(),
        count_regions(&net, &b.x.scale(0.25)).unwrap()
    );
    let mut last = 0;
    for n in [2, 8, 32, 128] {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| b.x.row(i).to_vec()).collect();
        let c = count_regions(&net, &Matrix::from_rows(&rows).unwrap()).unwrap();
        assert!(c >= last);
        last = c;
    }
}

#[test]
fn report_json_fields() {
    let space = SearchSpace::toy();
    let a = Architecture::uniform_cell(&space, Op::Skip).unwrap();
    let r = evaluate(&a, &space, &data(), &cfg(1)).unwrap();
    let v: serde_json::Value = serde_json::to_value(&r).unwrap();
    for k in ["arch", "kappa", "regions", "mse", "per_repeat", "seeds"] {
        assert!(v.get(k).is_some(), "{k}");
    }
}

#[test]
fn config_validation() {
    assert!(IndicatorConfig {
        repeats: 0,
        ..IndicatorConfig::default()
    }
    .validate()
    .is_err());
    assert!(IndicatorConfig {
        batch_train: 1,
        ..IndicatorConfig::default()
    }
    .validate()
    .is_err());
    assert!(IndicatorConfig {
        ridge_rel: -1.0,
        ..IndicatorConfig::default()
    }
    .validate()
    .is_err());
}
