mod common;

use common::{add, invert, matmul, matvec, random_spd, scale};
use proptest::prelude::*;
use rand::Rng;
use transflow::flow::{DataTransform, FlowModel};
use transflow::inference::{
    conditioned_sample, dense_covariance, encode_evidence, file, interpolate, kl_to_prior,
    posterior_general, posterior_isotropic, posterior_predictive, prior_logprob, sample_latent,
    Covariance, Evidence, GaussianSpec, LambdaPolicy, LikelihoodConfig, Representation,
};
use transflow::rng::seeded;
use transflow::Matrix;

fn evidence(rows: &[&[f64]]) -> Evidence<f64> {
    Evidence::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
}

fn random_evidence(rng: &mut impl Rng, d: usize, m: usize) -> Evidence<f64> {
    Evidence::new(
        (0..m)
            .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect(),
    )
    .unwrap()
}

fn dense_rows(g: &GaussianSpec<f64>) -> Vec<Vec<f64>> {
    let c = dense_covariance(g);
    (0..c.rows()).map(|i| c.row(i).to_vec()).collect()
}

/// Information-form posterior by explicit matrix inversion:
/// Σp = (Σ0⁻¹ + mΣ⁻¹)⁻¹, μp = Σp (Σ0⁻¹μ0 + mΣ⁻¹ζ̄).
fn oracle(
    mu0: &[f64],
    s0: &[Vec<f64>],
    sl: &[Vec<f64>],
    zbar: &[f64],
    m: usize,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p0 = invert(s0);
    let pl = scale(&invert(sl), m as f64);
    let sp = invert(&add(&p0, &pl));
    let rhs: Vec<f64> = matvec(&p0, mu0)
        .iter()
        .zip(matvec(&pl, zbar))
        .map(|(a, b)| a + b)
        .collect();
    (matvec(&sp, &rhs), sp)
}

fn to_rows(c: &Covariance<f64>, d: usize) -> Vec<Vec<f64>> {
    let m = c.to_dense(d);
    (0..d).map(|i| m.row(i).to_vec()).collect()
}

fn random_cov(rng: &mut impl Rng, d: usize, kind: usize) -> Covariance<f64> {
    match kind {
        0 => Covariance::Isotropic(rng.random_range(0.2..3.0)),
        1 => Covariance::Diagonal((0..d).map(|_| rng.random_range(0.2..3.0)).collect()),
        _ => Covariance::Dense(Matrix::from_rows(&random_spd(rng, d, 0.5)).unwrap()),
    }
}

#[test]
fn lambda_equal_to_m_gives_half_weight() {
    let ev = evidence(&[&[1.0, 3.0], &[3.0, -1.0]]);
    let g = posterior_isotropic(&ev, 2.0).unwrap();
    assert_eq!(g.mean(), &[1.0, 0.5]);
    assert_eq!(g.cov(), &Covariance::Isotropic(0.5));
}

#[test]
fn worked_posterior_case() {
    // m = 4, λ = 2, ζ̄ = (3, -3)  →  mean (2, -2), σ² = 1/3
    let ev = evidence(&[&[3.0, -3.0], &[3.0, -3.0], &[3.0, -3.0], &[3.0, -3.0]]);
    let g = posterior_isotropic(&ev, 2.0).unwrap();
    assert!((g.mean()[0] - 2.0).abs() < 1e-15 && (g.mean()[1] + 2.0).abs() < 1e-15);
    match g.cov() {
        Covariance::Isotropic(v) => assert!((v - 1.0 / 3.0).abs() < 1e-15),
        c => panic!("unexpected {c:?}"),
    }
}

#[test]
fn huge_lambda_returns_prior() {
    let ev = evidence(&[&[4.0, -2.0, 1.0]]);
    let g = posterior_isotropic(&ev, 1e12).unwrap();
    assert!(g.mean().iter().all(|v| v.abs() < 1e-9));
    match g.cov() {
        Covariance::Isotropic(v) => assert!((v - 1.0).abs() < 1e-9),
        c => panic!("unexpected {c:?}"),
    }
}

#[test]
fn invalid_lambda_and_evidence_are_rejected() {
    let ev = evidence(&[&[1.0]]);
    for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(posterior_isotropic(&ev, bad).is_err());
    }
    assert!(Evidence::<f64>::new(vec![]).is_err());
    assert!(Evidence::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    assert!(Evidence::new(vec![vec![f64::NAN]]).is_err());
}

#[test]
fn general_form_matches_inversion_oracle_for_every_representation() {
    let mut rng = seeded(2024);
    for case in 0..90 {
        let d = 1 + case % 8;
        let m = 1 + rng.random_range(0..12);
        let ev = random_evidence(&mut rng, d, m);
        let prior_cov = random_cov(&mut rng, d, case % 3);
        let lik_cov = random_cov(&mut rng, d, (case / 3) % 3);
        let mu0: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let prior = GaussianSpec::new(mu0.clone(), prior_cov.clone()).unwrap();
        let lik = LikelihoodConfig::from_covariance(lik_cov.clone(), d).unwrap();
        let g = posterior_general(&ev, &prior, &lik).unwrap();
        assert_eq!(
            g.representation(),
            prior_cov.representation().max(lik_cov.representation())
        );
        let (mu, sp) = oracle(
            &mu0,
            &to_rows(&prior_cov, d),
            &to_rows(&lik_cov, d),
            ev.mean(),
            m,
        );
        for i in 0..d {
            assert!((g.mean()[i] - mu[i]).abs() < 1e-9, "case {case}");
        }
        let got = dense_rows(&g);
        for i in 0..d {
            for j in 0..d {
                assert!((got[i][j] - sp[i][j]).abs() < 1e-9, "case {case}");
            }
        }
    }
}

#[test]
fn general_form_reduces_to_closed_form_under_standard_prior() {
    let mut rng = seeded(7);
    for case in 0..50 {
        let d = 1 + case % 16;
        let m = 1 + case % 20;
        let lambda = rng.random_range(0.05..40.0);
        let ev = random_evidence(&mut rng, d, m);
        let fast = posterior_isotropic(&ev, lambda).unwrap();
        let dense_prior =
            GaussianSpec::new(vec![0.0; d], Covariance::Dense(Matrix::identity(d))).unwrap();
        let lik = LikelihoodConfig::isotropic(lambda).unwrap();
        let slow = posterior_general(&ev, &dense_prior, &lik).unwrap();
        let (a, b) = (dense_rows(&fast), dense_rows(&slow));
        for i in 0..d {
            assert!((fast.mean()[i] - slow.mean()[i]).abs() < 1e-9);
            for j in 0..d {
                assert!((a[i][j] - b[i][j]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn non_positive_definite_inputs_are_rejected() {
    let bad = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
    assert!(GaussianSpec::new(vec![0.0, 0.0], Covariance::Dense(bad.clone())).is_err());
    assert!(LikelihoodConfig::from_covariance(Covariance::Dense(bad), 2).is_err());
    let asym = Matrix::from_rows(&[vec![1.0, 0.1], vec![0.0, 1.0]]).unwrap();
    assert!(GaussianSpec::new(vec![0.0, 0.0], Covariance::Dense(asym)).is_err());
    assert!(GaussianSpec::new(vec![0.0], Covariance::Diagonal(vec![0.0])).is_err());
    assert!(GaussianSpec::new(vec![0.0], Covariance::Isotropic(-1.0)).is_err());
    assert!(GaussianSpec::new(vec![0.0, 1.0], Covariance::Diagonal(vec![1.0])).is_err());
}

#[test]
fn predictive_worked_case() {
    let ev = evidence(&[&[1.0, 1.0], &[1.0, 1.0]]);
    let post = posterior_isotropic(&ev, 2.0).unwrap();
    let pp = posterior_predictive(&post, &LikelihoodConfig::isotropic(2.0).unwrap()).unwrap();
    assert_eq!(pp.mean(), &[0.5, 0.5]);
    assert_eq!(pp.cov(), &Covariance::Isotropic(2.5));

    let post = posterior_isotropic(&ev, 1e9).unwrap();
    let pp = posterior_predictive(&post, &LikelihoodConfig::isotropic(1e9).unwrap()).unwrap();
    match pp.cov() {
        Covariance::Isotropic(v) => assert!((v / (1.0 + 1e9) - 1.0).abs() < 1e-12),
        c => panic!("unexpected {c:?}"),
    }
}

#[test]
fn predictive_adds_likelihood_covariance_across_representations() {
    let mut rng = seeded(5);
    for case in 0..27 {
        let d = 3;
        let pc = random_cov(&mut rng, d, case % 3);
        let lc = random_cov(&mut rng, d, (case / 3) % 3);
        let post = GaussianSpec::new(vec![0.3, -0.1, 2.0], pc.clone()).unwrap();
        let lik = LikelihoodConfig::from_covariance(lc.clone(), d).unwrap();
        let pp = posterior_predictive(&post, &lik).unwrap();
        assert_eq!(pp.mean(), post.mean());
        assert_eq!(
            pp.representation(),
            pc.representation().max(lc.representation())
        );
        let (p, l, s) = (to_rows(&pc, d), to_rows(&lc, d), dense_rows(&pp));
        for i in 0..d {
            for j in 0..d {
                assert_eq!(s[i][j].to_bits(), (p[i][j] + l[i][j]).to_bits());
            }
        }
    }
}

#[test]
fn kl_closed_form_values() {
    assert_eq!(kl_to_prior(&GaussianSpec::<f64>::standard(5)), 0.0);
    // ½(0.5 − 1 − ln 0.5) per dimension for N(0, 0.5 I) in d = 2
    let g = GaussianSpec::new(vec![0.0, 0.0], Covariance::Isotropic(0.5)).unwrap();
    assert!((kl_to_prior(&g) - (0.5 * (0.5 - 1.0 - 0.5f64.ln()) * 2.0)).abs() < 1e-15);
    assert!((kl_to_prior(&g) - 0.193147180559945).abs() < 1e-12);
    let shifted: GaussianSpec<f64> =
        GaussianSpec::new(vec![3.0, 4.0], Covariance::Isotropic(1.0)).unwrap();
    assert!((kl_to_prior(&shifted) - 12.5).abs() < 1e-15);
    // dense and isotropic forms agree
    let dense = GaussianSpec::new(
        vec![0.0, 0.0],
        Covariance::Dense(Matrix::from_diagonal(&[0.5, 0.5])),
    )
    .unwrap();
    assert!((kl_to_prior(&dense) - kl_to_prior(&g)).abs() < 1e-15);
}

#[test]
fn kl_tracks_a_numerical_oracle_for_dense_covariance() {
    let mut rng = seeded(9);
    for _ in 0..10 {
        let d = 4;
        let s = random_spd(&mut rng, d, 0.3);
        let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = GaussianSpec::new(
            mu.clone(),
            Covariance::Dense(Matrix::from_rows(&s).unwrap()),
        )
        .unwrap();
        let tr: f64 = (0..d).map(|i| s[i][i]).sum();
        let mm: f64 = mu.iter().map(|x| x * x).sum();
        let expected = 0.5 * (tr + mm - d as f64 - common::log_abs_det(s));
        assert!((kl_to_prior(&g) - expected).abs() < 1e-10);
    }
}

#[test]
fn prior_logprob_at_origin() {
    assert!((prior_logprob(&[0.0f64, 0.0]) + 1.8378770664093453).abs() < 1e-15);
}

#[test]
fn interpolation_endpoints_and_midpoint() {
    let a = GaussianSpec::new(vec![0.0, 1.0], Covariance::Isotropic(0.5)).unwrap();
    let b = GaussianSpec::new(vec![2.0, -1.0], Covariance::Diagonal(vec![0.3, 1.0])).unwrap();
    let at0 = interpolate(&a, &b, 0.0).unwrap();
    let at1 = interpolate(&a, &b, 1.0).unwrap();
    assert_eq!(at0.mean(), a.mean());
    assert_eq!(dense_rows(&at0), dense_rows(&a));
    assert_eq!(at1.mean(), b.mean());
    assert_eq!(dense_rows(&at1), dense_rows(&b));
    let mid = interpolate(&a, &b, 0.5).unwrap();
    assert_eq!(mid.mean(), &[1.0, 0.0]);
    assert_eq!(mid.cov(), &Covariance::Diagonal(vec![0.4, 0.75]));
    assert!(interpolate(&a, &b, 1.5).is_err());
    assert!(interpolate(&a, &b, -0.1).is_err());
    assert!(interpolate(&a, &GaussianSpec::standard(3), 0.5).is_err());
}

#[test]
fn identical_seeds_give_identical_samples() {
    let g = GaussianSpec::new(vec![1.0, 2.0], Covariance::Diagonal(vec![0.5, 2.0])).unwrap();
    assert_eq!(
        sample_latent(&g, 10, 3).unwrap(),
        sample_latent(&g, 10, 3).unwrap()
    );
    assert_ne!(
        sample_latent(&g, 10, 3).unwrap(),
        sample_latent(&g, 10, 4).unwrap()
    );
    assert!(sample_latent(&g, 0, 3).is_err());
}

#[test]
fn sample_moments_match_dense_covariance() {
    let cov = vec![
        vec![2.0, 0.6, 0.0],
        vec![0.6, 1.0, -0.3],
        vec![0.0, -0.3, 0.5],
    ];
    let mu = vec![1.0, -2.0, 0.5];
    let g = GaussianSpec::new(
        mu.clone(),
        Covariance::Dense(Matrix::from_rows(&cov).unwrap()),
    )
    .unwrap();
    let n = 40_000;
    let xs = sample_latent(&g, n, 11).unwrap();
    let mean: Vec<f64> = (0..3)
        .map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n as f64)
        .collect();
    for j in 0..3 {
        // 6 standard errors
        assert!((mean[j] - mu[j]).abs() < 6.0 * (cov[j][j] / n as f64).sqrt());
    }
    for i in 0..3 {
        for j in 0..3 {
            let c = xs
                .iter()
                .map(|x| (x[i] - mean[i]) * (x[j] - mean[j]))
                .sum::<f64>()
                / (n - 1) as f64;
            assert!((c - cov[i][j]).abs() < 0.05 * (cov[i][i] * cov[j][j]).sqrt());
        }
    }
}

#[test]
fn conditioned_samples_are_flow_images_of_latent_draws() {
    let model = FlowModel::random(2, 2, 8, DataTransform::Identity, 4, 0.5).unwrap();
    let ev = encode_evidence(&model, &[vec![0.5, 0.5], vec![1.0, -0.5]]).unwrap();
    assert_eq!(ev.m(), 2);
    let g = posterior_isotropic(&ev, 1.0).unwrap();
    let zs = sample_latent(&g, 4, 8).unwrap();
    let xs = conditioned_sample(&model, &g, 4, 8).unwrap();
    for (z, x) in zs.iter().zip(&xs) {
        assert_eq!(&model.forward(z).unwrap(), x);
    }
    assert!(conditioned_sample(&model, &GaussianSpec::standard(3), 1, 0).is_err());
}

#[test]
fn lambda_policy_resolution() {
    assert_eq!(LambdaPolicy::default().resolve(10).unwrap(), 5.0);
    assert_eq!(LambdaPolicy::Absolute(3.0).resolve(10).unwrap(), 3.0);
    assert!(LambdaPolicy::FractionOfM(0.0).resolve(10).is_err());
    assert!(LambdaPolicy::Absolute(-1.0).resolve(1).is_err());
}

#[test]
fn posterior_files_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = seeded(3);
    for kind in 0..3 {
        let d = 5;
        let mean: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0) / 3.0).collect();
        let g = GaussianSpec::new(mean, random_cov(&mut rng, d, kind)).unwrap();
        let prov = file::Provenance::conditioned("posterior", 0.7, 3, Some("ab".repeat(32)));
        let path = dir.path().join(format!("g{kind}.json"));
        file::save_posterior(&g, prov.clone(), &path).unwrap();
        let (back, p2): (GaussianSpec<f64>, _) = file::load_posterior(&path).unwrap();
        assert_eq!(back, g);
        assert_eq!(p2, prov);
    }
    assert!(file::from_json::<f64>("{\"format\":\"nope\"}").is_err());
}

#[test]
fn representation_ordering() {
    assert!(Representation::Isotropic < Representation::Diagonal);
    assert!(Representation::Diagonal < Representation::Dense);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fixed_point_at_lambda_equal_m(
        d in 1usize..16,
        m in 1usize..20,
        seed in any::<u64>(),
    ) {
        let mut rng = seeded(seed);
        let ev = random_evidence(&mut rng, d, m);
        let g = posterior_isotropic(&ev, m as f64).unwrap();
        for (mu, z) in g.mean().iter().zip(ev.mean()) {
            prop_assert!((mu - 0.5 * z).abs() < 1e-12);
        }
        prop_assert_eq!(g.cov(), &Covariance::Isotropic(0.5));
    }

    #[test]
    fn shrinkage_and_monotone_diagnostics(
        d in 1usize..10,
        m in 1usize..20,
        seed in any::<u64>(),
    ) {
        let mut rng = seeded(seed);
        let ev = random_evidence(&mut rng, d, m);
        let zn: f64 = ev.mean().iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(zn > 1e-6);
        let mut last: Option<(f64, f64, f64)> = None;
        for frac in [0.1, 0.3, 0.5, 0.7, 1.0, 2.0, 10.0] {
            let g = posterior_isotropic(&ev, frac * m as f64).unwrap();
            let kl = kl_to_prior(&g);
            let mn: f64 = g.mean().iter().map(|v| v * v).sum::<f64>().sqrt();
            let var = match g.cov() { Covariance::Isotropic(v) => *v, _ => unreachable!() };
            prop_assert!(mn <= zn && var > 0.0 && var < 1.0);
            if let Some((k0, n0, v0)) = last {
                prop_assert!(kl < k0 && mn < n0 && var > v0);
            }
            last = Some((kl, mn, var));
        }
    }

    #[test]
    fn interpolants_stay_positive_definite(seed in any::<u64>(), t in 0.0f64..=1.0) {
        let mut rng = seeded(seed);
        let d = 4;
        let a = GaussianSpec::new(vec![0.0; d], random_cov(&mut rng, d, 2)).unwrap();
        let b = GaussianSpec::new(vec![1.0; d], random_cov(&mut rng, d, 1)).unwrap();
        let g = interpolate(&a, &b, t).unwrap();
        prop_assert_eq!(g.representation(), Representation::Dense);
        prop_assert!(GaussianSpec::new(g.mean().to_vec(), g.cov().clone()).is_ok());
    }

    #[test]
    fn predictive_mean_is_posterior_mean(seed in any::<u64>(), lambda in 0.01f64..100.0) {
        let mut rng = seeded(seed);
        let ev = random_evidence(&mut rng, 3, 4);
        let post = posterior_isotropic(&ev, lambda).unwrap();
        let pp = posterior_predictive(&post, &LikelihoodConfig::isotropic(lambda).unwrap()).unwrap();
        prop_assert_eq!(pp.mean(), post.mean());
        let (Covariance::Isotropic(a), Covariance::Isotropic(b)) = (post.cov(), pp.cov()) else { unreachable!() };
        prop_assert_eq!(*b, a + lambda);
    }
}

#[test]
fn oracle_self_check() {
    let a = vec![vec![4.0, 1.0], vec![1.0, 3.0]];
    let inv = invert(&a);
    let id = matmul(&a, &inv);
    for i in 0..2 {
        for j in 0..2 {
            assert!((id[i][j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
        }
    }
}
