use itsforge_core::kernel::{kernel_matrix, KernelParams};
use itsforge_core::msvr::{irwls_solve, objective, targets_matrix, train, MsvrHyper, Scaler, TrainOptions};
use itsforge_testkit::{oracle, synth};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn hyper() -> MsvrHyper {
    MsvrHyper::new(10.0, 0.1, 1.0).unwrap()
}

#[test]
fn irwls_matches_gradient_descent_oracle() {
    for seed in 0..10u64 {
        let n = 10 + (seed as usize * 3) % 16;
        let data = synth::regression(n, 4, 2, seed);
        let (_, report) = train(&data, hyper(), TrainOptions::default()).unwrap();
        let irwls = *report.objective_trace.last().unwrap();

        let z = oracle::standardize(&data.inputs);
        let k = oracle::gram(&z, 1.0);
        let gd = oracle::msvr_gradient_descent(&k, &data.targets, 10.0, 0.1, 50_000);
        let rel = (irwls - gd.objective).abs() / gd.objective;
        assert!(rel < 1e-4, "seed {seed}: irwls {irwls} oracle {} rel {rel}", gd.objective);
    }
}

#[test]
fn objective_matches_direct_formula() {
    let data = synth::regression(15, 3, 2, 4);
    let (model, _) = train(&data, hyper(), TrainOptions::default()).unwrap();
    let z = oracle::standardize(&data.inputs);
    let k = oracle::gram(&z, 1.0);
    let beta: Vec<Vec<f64>> = model.beta.row_iter().map(|r| r.iter().copied().collect()).collect();
    let bias: Vec<f64> = model.bias.iter().copied().collect();
    let direct = oracle::msvr_objective(&k, &data.targets, &beta, &bias, 10.0, 0.1);
    let kk = kernel_matrix(&model.train_inputs, KernelParams::new(1.0).unwrap()).unwrap();
    let ours = objective(&model.beta, &model.bias, &targets_matrix(&data), &kk, &hyper()).unwrap();
    assert!((direct - ours).abs() <= 1e-10 * direct.abs());
}

#[test]
fn cholesky_step_matches_bordered_gauss_elimination() {
    for seed in 0..8u64 {
        let data = synth::regression(18, 3, 2, 100 + seed);
        let z: Vec<Vec<f64>> = {
            let s = Scaler::fit(&data.inputs);
            data.inputs.iter().map(|x| s.transform(x)).collect()
        };
        let k = kernel_matrix(&z, KernelParams::new(0.8).unwrap()).unwrap();
        let weights: Vec<f64> = (0..18).map(|i| if (i + seed as usize).is_multiple_of(4) { 0.0 } else { 0.5 + i as f64 }).collect();
        let y = targets_matrix(&data);
        let (beta, bias) = irwls_solve(&k, &weights, &y).unwrap();
        let kv: Vec<Vec<f64>> = k.row_iter().map(|r| r.iter().copied().collect()).collect();
        let (ob, obias) = oracle::bordered_step(&kv, &weights, &data.targets).unwrap();
        for i in 0..18 {
            for j in 0..2 {
                assert!((beta[(i, j)] - ob[i][j]).abs() < 1e-8, "beta {i},{j}");
            }
        }
        for j in 0..2 {
            assert!((bias[j] - obias[j]).abs() < 1e-8);
        }
    }
}

#[test]
fn support_is_shared_by_both_outputs() {
    for seed in 0..10u64 {
        let data = synth::regression(20, 4, 2, seed);
        let (model, report) = train(&data, hyper(), TrainOptions::default()).unwrap();
        assert_eq!(model.support(0), model.support(1));
        assert!(model.support(0).iter().all(|i| report.active_set.contains(i)) || report.iterations == 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_trace_never_increases(
        seed in any::<u64>(),
        n in 5usize..30,
        log_c in -3.0f64..5.0,
        log_eps in -5.0f64..0.0,
        log_sigma in -2.0f64..3.0,
    ) {
        let data = synth::regression(n, 3, 2, seed);
        let h = MsvrHyper::new(log_c.exp2(), log_eps.exp2(), log_sigma.exp2()).unwrap();
        if let Ok((_, report)) = train(&data, h, TrainOptions::default()) {
            for w in report.objective_trace.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }
    }

    #[test]
    fn standardisation_makes_training_shift_invariant(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let data = synth::regression(12, 2, 2, seed);
        let mut moved = data.clone();
        for x in &mut moved.inputs {
            for v in x.iter_mut() {
                *v += shift;
            }
        }
        let (a, _) = train(&data, hyper(), TrainOptions::default()).unwrap();
        let (b, _) = train(&moved, hyper(), TrainOptions::default()).unwrap();
        let diff: DMatrix<f64> = &a.beta - &b.beta;
        prop_assert!(diff.amax() < 1e-6);
    }
}
