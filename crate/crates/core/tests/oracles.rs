mod common;

use adacomp::model::{
    evaluate_policy, evaluate_sequence, posterior_update, simulate_measurements, CompressorChoice,
    GaussianSignalModel,
};
use adacomp::oracle::{exhaustive_optimal, grid_search_scalar_m2, FiniteActionSet};
use adacomp::scalar_greedy::ScalarSensingState;
use adacomp::waterfill::{construct_gtilde, recover_compressors, WaterFillSolution};
use common::*;
use nalgebra::{DMatrix, DVector};

fn correlated_example() -> GaussianSignalModel {
    GaussianSignalModel::scalar(
        DMatrix::identity(2, 2),
        DMatrix::from_row_slice(2, 2, &[3.0, 2.0, 2.0, 3.0]),
        0.0,
        1.0,
        2,
    )
    .unwrap()
}

#[test]
fn sample_covariance_matches_closed_form() {
    let mut rng = rng(7);
    let (n, k, l) = (2, 3, 2);
    let model = random_model(n, k, l, &mut rng);
    let a = gaussian(l, k, &mut rng);
    let choice = vec![CompressorChoice::Matrix(a.clone())];
    let expected = &a
        * (model.h() * model.prior_cov() * model.h().transpose() + model.channel_noise())
        * a.transpose()
        + model.measurement_noise();

    let samples = 100_000;
    let mean_y = a.clone() * model.h() * model.mean();
    let mut acc = DMatrix::<f64>::zeros(l, l);
    for seed in 0..samples {
        let y = &simulate_measurements(&model, &choice, seed).unwrap()[0] - &mean_y;
        acc += &y * y.transpose();
    }
    let sample = acc / samples as f64;
    for i in 0..l {
        for j in 0..l {
            let e = expected[(i, j)];
            let scale = (expected[(i, i)] * expected[(j, j)]).sqrt();
            assert!(
                (sample[(i, j)] - e).abs() < 0.05 * scale,
                "entry ({i},{j}): sample {} vs {e}",
                sample[(i, j)]
            );
        }
    }
}

#[test]
fn noiseless_measurements_return_the_signal() {
    let mut rng = rng(3);
    let p0 = random_spd(3, 0.5, &mut rng);
    let model = GaussianSignalModel::with_semidefinite_measurement_noise(
        DMatrix::identity(3, 3),
        DVector::from_vec(vec![1.0, -2.0, 0.5]),
        p0,
        DMatrix::zeros(3, 3),
        DMatrix::zeros(3, 3),
        4,
    )
    .unwrap();
    let choices = vec![CompressorChoice::Matrix(DMatrix::identity(3, 3)); 4];
    let ys = simulate_measurements(&model, &choices, 11).unwrap();
    for y in &ys[1..] {
        assert_eq!(y, &ys[0]);
    }
    assert_eq!(ys, simulate_measurements(&model, &choices, 11).unwrap());
    assert_ne!(ys, simulate_measurements(&model, &choices, 12).unwrap());
}

#[test]
fn correlated_example_closed_form_compressor() {
    let model = correlated_example();
    let r21 = 21f64.sqrt();
    let a1 = DVector::from_vec(vec![((5.0 - r21) / 10.0).sqrt(), ((r21 + 5.0) / 10.0).sqrt()]);
    let prior = model.prior().unwrap();
    let p1 = posterior_update(&prior, &a1.clone().into(), &model).unwrap();
    // the second stage is greedy: top eigenvector of P_1
    let eig = adacomp::linalg::symmetric_eigen(&p1.cov).unwrap();
    let a2: DVector<f64> = eig.vectors.column(0).into_owned();
    let trace = evaluate_sequence(&model, &[a1.clone().into(), a2.into()]).unwrap();
    assert!((trace.net_gain - 0.5 * 12.8_f64.ln()).abs() < 1e-12);
    assert!((a1[0] * a1[1] - 0.2).abs() < 1e-15);

    let grid = grid_search_scalar_m2(&model, 10_000).unwrap();
    let found = match &grid.best_trace.choices[0] {
        CompressorChoice::Vector(v) => v.clone(),
        _ => unreachable!(),
    };
    // the optimal first compressor is unique up to sign and swapping components
    let candidates = [
        a1.clone(),
        DVector::from_vec(vec![a1[1], a1[0]]),
        DVector::from_vec(vec![a1[0], -a1[1]]),
        DVector::from_vec(vec![a1[1], -a1[0]]),
    ];
    let closest = candidates
        .iter()
        .flat_map(|c| [(&found - c).norm(), (&found + c).norm()])
        .fold(f64::INFINITY, f64::min);
    assert!(closest < 1e-3, "grid optimum {found} far from closed form");
}

#[test]
fn correlated_example_greedy_gap() {
    let model = correlated_example();
    let hg = ScalarSensingState::init(&model).unwrap().greedy_run(2).unwrap().net_gain;
    let ho = grid_search_scalar_m2(&model, 10_000).unwrap().net_gain();
    assert!((ho - hg - 0.5 * (12.8_f64 / 12.0).ln()).abs() < 1e-4);
}

#[test]
fn correlated_example_recovered_compressors_attain_relaxed_value() {
    let model = correlated_example();
    let s = ScalarSensingState::init(&model).unwrap();
    let lambdas = s.sorted_lambdas();
    let sol = WaterFillSolution::solve(&lambdas, 2, s.sigma2).unwrap();
    let g = construct_gtilde(&sol, &lambdas, &DMatrix::identity(2, 2), None).unwrap();
    let a = recover_compressors(&g, &s.basis, 2, s.sigma_n2, s.sigma_w2).unwrap();
    // sigma_w = 1 and m = 2: a_k = sqrt(2 p_k) v_k
    assert!((a[0].norm() - (2.0 * 0.7_f64).sqrt()).abs() < 1e-12);
    assert!((a[1].norm() - (2.0 * 0.3_f64).sqrt()).abs() < 1e-12);
    let choices: Vec<CompressorChoice> = a.into_iter().map(Into::into).collect();
    let trace = evaluate_policy(&model, &choices).unwrap();
    assert!((trace.net_gain - 0.5 * 12.8_f64.ln()).abs() < 1e-9);
}

fn diagonal_scalar(d1: f64, d2: f64, sw: f64) -> GaussianSignalModel {
    GaussianSignalModel::scalar(
        DMatrix::identity(2, 2),
        DMatrix::from_diagonal(&DVector::from_vec(vec![d1, d2])),
        0.0,
        sw,
        2,
    )
    .unwrap()
}

fn eigenvector_search(model: &GaussianSignalModel) -> f64 {
    let e = |i: usize| CompressorChoice::Vector(DVector::from_fn(2, |j, _| (i == j) as u8 as f64));
    let set = FiniteActionSet::unlabeled(vec![e(0), e(1)]).unwrap();
    exhaustive_optimal(model, &set, 2).unwrap().net_gain()
}

#[test]
fn diagonal_prior_grid_optimum_is_an_eigenvector_pair_when_greedy_is_flat() {
    // each instance satisfies the integer-gap condition, so eigenvectors suffice
    for (d1, d2, sw) in [(9.0, 0.5, 2.0), (1.0, 1.0, 1.0), (3.0, 3.0, 0.5), (2.0, 0.1, 1.0)] {
        let model = diagonal_scalar(d1, d2, sw);
        let m = 2;
        assert!(adacomp::blockfill::check_theorem5(&[d1, d2], sw, m).unwrap().holds);
        let grid = grid_search_scalar_m2(&model, 2_000).unwrap().net_gain();
        let eigen = eigenvector_search(&model);
        assert!(
            (grid - eigen).abs() < 1e-6,
            "diag({d1},{d2}): grid {grid} vs eigenvector search {eigen}"
        );
    }
}

#[test]
fn diagonal_prior_can_need_a_non_eigenvector_pair() {
    // Diag(5, 1) is the correlated two-stage instance rotated into its eigenbasis
    let model = diagonal_scalar(5.0, 1.0, 1.0);
    let grid = grid_search_scalar_m2(&model, 10_000).unwrap().net_gain();
    assert!((eigenvector_search(&model) - 0.5 * 12.0_f64.ln()).abs() < 1e-12);
    assert!((grid - 0.5 * 12.8_f64.ln()).abs() < 1e-6);
}

#[test]
fn alternating_pair_updates_by_hand() {
    let (model, actions) = adacomp::oracle::alpha_family_model(1.0 / 16.0, 2).unwrap();
    let prior = model.prior().unwrap();
    let p1 = posterior_update(&prior, &actions.actions()[0], &model).unwrap();
    let want = DMatrix::from_diagonal(&DVector::from_vec(vec![16.0 / 17.0, 16.0]));
    assert!(rel_frobenius(&p1.cov, &want) < 1e-14);
    let p2 = posterior_update(&p1, &actions.actions()[1], &model).unwrap();
    assert!(rel_frobenius(&p2.cov, &(DMatrix::identity(2, 2) * (16.0 / 17.0))) < 1e-14);
    let half = posterior_update(&prior, &actions.actions()[2], &model).unwrap();
    assert!(rel_frobenius(&half.cov, &(DMatrix::identity(2, 2) * (16.0 / 5.0))) < 1e-14);
}
