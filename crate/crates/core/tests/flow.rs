mod common;

use common::{log_abs_det, numerical_jacobian};
use proptest::prelude::*;
use transflow::data::{make_two_moons, Dataset};
use transflow::flow::{
    self, checkpoint, ActNorm, CouplingBlock, DataTransform, FlowModel, OptimizerKind, TrainConfig,
};
use transflow::rng::standard_normal_rows;

fn identity_model(d: usize) -> FlowModel<f64> {
    FlowModel::new(d, 4, DataTransform::Identity, 0).unwrap()
}

/// One block whose normalization halves its input: x = f(z) = 2z.
fn doubling_model() -> FlowModel<f64> {
    let mut m = FlowModel::new(1, 1, DataTransform::Identity, 0).unwrap();
    m.blocks_mut()[0].norm.log_scale.data_mut()[0] = -(2.0f64.ln());
    m
}

fn random_model(d: usize, blocks: usize, seed: u64) -> FlowModel<f64> {
    FlowModel::random(d, blocks, 16, DataTransform::Identity, seed, 0.5).unwrap()
}

#[test]
fn identity_model_forward_and_inverse() {
    let m = identity_model(2);
    assert_eq!(m.forward(&[0.3, -1.2]).unwrap(), vec![0.3, -1.2]);
    assert_eq!(m.inverse(&[0.3, -1.2]).unwrap(), vec![0.3, -1.2]);
}

#[test]
fn doubling_model_forward_inverse_logdet() {
    let m = doubling_model();
    let (x, ld) = m.forward_with_logdet(&[1.5]).unwrap();
    assert!((x[0] - 3.0).abs() < 1e-15);
    assert!((ld - 2.0f64.ln()).abs() < 1e-15);
    assert!((m.inverse(&[3.0]).unwrap()[0] - 1.5).abs() < 1e-15);
}

#[test]
fn log_prob_closed_form_cases() {
    let m = identity_model(2);
    assert!((m.log_prob(&[0.0, 0.0]).unwrap() - (-1.837877066409345)).abs() < 1e-12);
    // log N(0; 0, 1) - log 2
    let m = doubling_model();
    assert!((m.log_prob(&[0.0]).unwrap() - (-1.612085713764618)).abs() < 1e-12);
}

#[test]
fn dimension_and_finiteness_errors() {
    let m = identity_model(2);
    assert!(m.forward(&[1.0]).is_err());
    assert!(m.inverse(&[1.0, 2.0, 3.0]).is_err());
    assert!(m.forward(&[f64::NAN, 0.0]).is_err());
    assert!(m.log_prob(&[1.0]).is_err());
    assert!(m.sample(0, 1).is_err());
}

#[test]
fn random_model_round_trip() {
    let m = random_model(2, 4, 11);
    for z in standard_normal_rows::<f64>(5, 50, 2) {
        let x = m.forward(&z).unwrap();
        let back = m.inverse(&x).unwrap();
        for (a, b) in z.iter().zip(&back) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn analytic_logdet_matches_numerical_jacobian() {
    for (d, blocks) in [(2, 2), (2, 4), (4, 2), (4, 4)] {
        let m = random_model(d, blocks, 100 + d as u64);
        for x in standard_normal_rows::<f64>(7, 10, d) {
            let (_, ld) = m.inverse_with_logdet(&x).unwrap();
            let jac = numerical_jacobian(|v| m.inverse(v).unwrap(), &x, 1e-5);
            let num = log_abs_det(jac);
            assert!(
                (ld - num).abs() < 1e-4,
                "d={d}: analytic {ld} vs numerical {num}"
            );
        }
    }
}

#[test]
fn logdet_consistency_between_directions() {
    let m = random_model(4, 4, 3);
    for z in standard_normal_rows::<f64>(8, 20, 4) {
        let (x, ld_f) = m.forward_with_logdet(&z).unwrap();
        let (_, ld_i) = m.inverse_with_logdet(&x).unwrap();
        assert!((ld_f + ld_i).abs() < 1e-8);
    }
}

#[test]
fn one_dimensional_density_integrates_to_one() {
    let m = FlowModel::random(1, 3, 16, DataTransform::Identity, 21, 0.5).unwrap();
    let h = 1e-3;
    let n = 100_000;
    let mut total = 0.0;
    for i in 0..=n {
        let x = -50.0 + i as f64 * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        total += w * m.log_prob(&[x]).unwrap().exp();
    }
    total *= h;
    assert!((total - 1.0).abs() < 1e-3, "integral {total}");
}

#[test]
fn fresh_model_density_is_base_plus_preprocessing() {
    let logit: FlowModel<f64> = FlowModel::new(4, 3, DataTransform::logit_pixels(), 9).unwrap();
    let x: [f64; 4] = [0.0, 17.0, 128.5, 250.0];
    let (xt, ld) = logit.transform().apply(&x);
    let expected = transflow::scalar::std_normal_log_density(&xt) + ld;
    assert!((logit.log_prob(&x).unwrap() - expected).abs() < 1e-12);
}

/// Relative error of an analytic gradient against a central difference.
/// Magnitudes below 1e-6 are compared absolutely.
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

#[test]
fn every_parameter_gradient_matches_central_differences() {
    let mut model = FlowModel::random(2, 2, 64, DataTransform::Identity, 4, 0.5).unwrap();
    let batch = standard_normal_rows::<f64>(12, 8, 2);
    let (_, grads) = model.nll_gradient(&batch).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let n_tensors = model.parameters().len();
    for t in 0..n_tensors {
        let len = model.parameters()[t].len();
        for i in 0..len {
            let orig = model.parameters()[t].data()[i];
            model.parameters_mut()[t].data_mut()[i] = orig + h;
            let fp = model.mean_nll(&batch).unwrap();
            model.parameters_mut()[t].data_mut()[i] = orig - h;
            let fm = model.mean_nll(&batch).unwrap();
            model.parameters_mut()[t].data_mut()[i] = orig;
            let num = (fp - fm) / (2.0 * h);
            let e = rel_err(grads[t][i], num);
            assert!(
                e < 1e-4,
                "tensor {t} entry {i}: analytic {} vs numerical {num}",
                grads[t][i]
            );
            worst = worst.max(e);
        }
    }
    assert!(model.parameter_count() > 8000);
    eprintln!("worst relative gradient error {worst:e}");
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let model = random_model(2, 2, 5);
    let data = Dataset::new(vec![vec![0.4, -0.2]], None, "single").unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        epochs: 1,
        ..TrainConfig::default()
    };
    let out = flow::train(&model, &data, &cfg).unwrap();
    assert_eq!(out.model, model);
    assert_eq!(out.history.len(), 1);
}

#[test]
fn training_rejects_bad_inputs() {
    let model = identity_model(2);
    let wrong = Dataset::new(vec![vec![1.0, 2.0, 3.0]], None, "d3").unwrap();
    assert!(flow::train(&model, &wrong, &TrainConfig::default()).is_err());
    let data = Dataset::new(vec![vec![1.0, 2.0]], None, "d2").unwrap();
    let bad = TrainConfig {
        batch_size: 0,
        ..TrainConfig::default()
    };
    assert!(flow::train(&model, &data, &bad).is_err());
}

#[test]
fn non_finite_loss_names_the_batch() {
    // absurd learning rate with plain SGD and no clipping blows up
    let model = random_model(2, 2, 6);
    let data: Dataset<f64> = make_two_moons(64, 0.1, 1).unwrap();
    let cfg = TrainConfig {
        learning_rate: 1e12,
        optimizer: OptimizerKind::Sgd,
        grad_clip: f64::INFINITY,
        batch_size: 8,
        epochs: 5,
        ..TrainConfig::default()
    };
    match flow::train(&model, &data, &cfg) {
        Err(transflow::Error::NonFiniteLoss { .. }) => {}
        other => panic!("expected non-finite loss, got {other:?}"),
    }
}

#[test]
fn training_lowers_nll_and_is_deterministic() {
    let data: Dataset<f64> = make_two_moons(400, 0.1, 2).unwrap();
    let transform = DataTransform::standardize_from(data.points()).unwrap();
    let model = FlowModel::with_hidden(2, 4, 32, transform, 1).unwrap();
    let cfg = TrainConfig {
        epochs: 15,
        learning_rate: 3e-3,
        seed: 7,
        ..TrainConfig::default()
    };
    let a = flow::train(&model, &data, &cfg).unwrap();
    let b = flow::train(&model, &data, &cfg).unwrap();
    assert_eq!(a.model, b.model);
    let before = model.mean_nll(data.points()).unwrap();
    let after = a.model.mean_nll(data.points()).unwrap();
    assert!(after < before, "{after} !< {before}");
    let h = &a.history;
    assert!(h.last().unwrap().mean_nll < h[0].mean_nll);
}

#[test]
fn identity_model_samples_are_raw_gaussian_draws() {
    let m = identity_model(3);
    assert_eq!(
        m.sample(5, 42).unwrap(),
        standard_normal_rows::<f64>(42, 5, 3)
    );
}

#[test]
fn data_initialization_whitens_first_block_input() {
    let data: Dataset<f64> = make_two_moons(200, 0.05, 3).unwrap();
    let mut m = FlowModel::new(2, 2, DataTransform::Identity, 0).unwrap();
    m.initialize_from_data(data.points()).unwrap();
    let zs: Vec<Vec<f64>> = data
        .points()
        .iter()
        .map(|x| m.inverse(x).unwrap())
        .collect();
    for j in 0..2 {
        let mean: f64 = zs.iter().map(|z| z[j]).sum::<f64>() / zs.len() as f64;
        let var: f64 = zs.iter().map(|z| (z[j] - mean).powi(2)).sum::<f64>() / zs.len() as f64;
        assert!(mean.abs() < 1e-10 && (var - 1.0).abs() < 1e-6);
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let data: Dataset<f64> = make_two_moons(20, 0.1, 3).unwrap();
    let transform = DataTransform::standardize_from(data.points()).unwrap();
    let m = FlowModel::random(2, 3, 16, transform, 8, 0.5).unwrap();
    let bytes = checkpoint::encode(&m);
    let back: FlowModel<f64> = checkpoint::decode(&bytes, "mem").unwrap();
    assert_eq!(back, m);
    assert_eq!(checkpoint::encode(&back), bytes);

    let logit = FlowModel::random(4, 2, 8, DataTransform::logit_pixels(), 8, 0.5).unwrap();
    let back: FlowModel<f64> = checkpoint::decode(&checkpoint::encode(&logit), "mem").unwrap();
    assert_eq!(back, logit);
}

#[test]
fn checkpoint_rejects_malformed_bytes() {
    let m = random_model(2, 2, 1);
    let bytes = checkpoint::encode(&m);
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(checkpoint::decode::<f64>(&bad, "mem").is_err());
    assert!(checkpoint::decode::<f64>(&bytes[..bytes.len() - 3], "mem").is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(checkpoint::decode::<f64>(&extra, "mem").is_err());
    let mut version = bytes;
    version[4] = 9;
    assert!(checkpoint::decode::<f64>(&version, "mem").is_err());
}

#[test]
fn from_parts_rejects_inconsistent_blocks() {
    let mut rng = transflow::rng::seeded(0);
    let blk: CouplingBlock<f64> = CouplingBlock::new(vec![true, false], 8, 0.0, &mut rng);
    assert!(FlowModel::from_parts(3, DataTransform::Identity, vec![blk.clone()]).is_err());
    let bad_norm = ActNorm::identity(3);
    assert!(CouplingBlock::from_parts(vec![true, false], bad_norm, blk.net.clone()).is_err());
}

#[test]
fn single_precision_model_round_trips() {
    let m: FlowModel<f32> = FlowModel::random(4, 4, 16, DataTransform::Identity, 2, 0.5).unwrap();
    for z in standard_normal_rows::<f32>(3, 20, 4) {
        let x = m.forward(&z).unwrap();
        let back = m.inverse(&x).unwrap();
        for (a, b) in z.iter().zip(&back) {
            assert!((a - b).abs() < 1e-4);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn round_trip_within_tolerance(z in proptest::collection::vec(-10.0f64..10.0, 4)) {
        let m = random_model(4, 4, 77);
        let x = m.forward(&z).unwrap();
        let back = m.inverse(&x).unwrap();
        for (a, b) in z.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }
}
