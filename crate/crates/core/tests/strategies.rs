use feddg_core::data::{make_environments, make_glyph_bank, AugmentationSpec, Environment};
use feddg_core::nn::{irm_terms, loss_and_grad, ModelSpec, OptimizerKind, OptimizerState};
use feddg_core::rng::RngStream;
use feddg_core::strategies::{
    aggregate_fedavg, client_stream, initial_theta, local_train, run_federation, sample_batch, FederationRun,
    StrategyConfig, StrategyKind,
};

const SIDE: usize = 8;

/// Three equally sized training clients plus the held-out environment.
fn toy() -> (Vec<Environment>, Environment, ModelSpec) {
    let bank = make_glyph_bank(3, SIDE, 20, 0.15, &mut RngStream::new(4, 0)).unwrap();
    let mut envs = make_environments(&bank, &[0.0, 20.0, 40.0], 60.0, &mut RngStream::new(4, 1)).unwrap();
    let ood = envs.pop().unwrap();
    assert!(envs.iter().all(|e| e.len() == envs[0].len()));
    (envs, ood, ModelSpec::new(SIDE * SIDE, vec![8], 3).unwrap())
}

fn config(kind: StrategyKind) -> StrategyConfig {
    StrategyConfig {
        kind,
        rounds: 5,
        local_steps: 3,
        batch_size: 8,
        lr_theta: 0.05,
        lr_lambda: 0.5,
        ..StrategyConfig::default()
    }
}

fn run(clients: &[Environment], spec: &ModelSpec, cfg: &StrategyConfig, aug: &AugmentationSpec) -> FederationRun {
    run_federation(clients, spec, cfg, aug, &RngStream::new(77, 0), &mut []).unwrap()
}

fn rotation() -> AugmentationSpec {
    AugmentationSpec::RandomRotation { alpha_deg: 20.0 }
}

fn trajectory_distance(a: &FederationRun, b: &FederationRun) -> f64 {
    a.final_theta.max_abs_diff(&b.final_theta).unwrap()
}

#[test]
fn proximal_and_penalty_weights_off_reduce_to_fedavg() {
    let (clients, _, spec) = toy();
    let aug = rotation();
    let mut sgd = config(StrategyKind::Fedavg);
    sgd.optimizer = OptimizerKind::Sgd;
    let fedavg_sgd = run(&clients, &spec, &sgd, &aug);
    let prox = run(
        &clients,
        &spec,
        &StrategyConfig {
            kind: StrategyKind::Fedprox,
            mu: 0.0,
            ..sgd.clone()
        },
        &aug,
    );
    assert_eq!(prox.final_theta, fedavg_sgd.final_theta);
    assert_eq!(prox.records, fedavg_sgd.records);

    let fedavg = run(&clients, &spec, &config(StrategyKind::Fedavg), &aug);
    let irm = run(
        &clients,
        &spec,
        &StrategyConfig {
            beta: 0.0,
            ..config(StrategyKind::FedIrm)
        },
        &aug,
    );
    assert_eq!(irm.final_theta, fedavg.final_theta);
    assert_eq!(irm.records, fedavg.records);
}

#[test]
fn vm_without_variance_term_matches_fedavg() {
    let (clients, _, spec) = toy();
    let aug = rotation();
    let fedavg = run(&clients, &spec, &config(StrategyKind::Fedavg), &aug);
    let vm = run(
        &clients,
        &spec,
        &StrategyConfig {
            beta: 0.0,
            ..config(StrategyKind::Vm)
        },
        &aug,
    );
    assert!(trajectory_distance(&vm, &fedavg) <= 1e-10);
    // With the variance term on, the trajectories separate.
    let vm_on = run(
        &clients,
        &spec,
        &StrategyConfig {
            beta: 10.0,
            ..config(StrategyKind::Vm)
        },
        &aug,
    );
    assert!(trajectory_distance(&vm_on, &fedavg) > 1e-6);
}

#[test]
fn gen_afl_with_zero_floor_is_afl() {
    let (clients, _, spec) = toy();
    let aug = rotation();
    let afl = run(&clients, &spec, &config(StrategyKind::Afl), &aug);
    let gen = run(
        &clients,
        &spec,
        &StrategyConfig {
            lambda_min: 0.0,
            ..config(StrategyKind::GenAfl)
        },
        &aug,
    );
    assert_eq!(afl.final_theta, gen.final_theta);
    assert_eq!(afl.records, gen.records);
    // λ actually moved, so the comparison is not vacuous.
    assert!(afl
        .records
        .iter()
        .any(|r| r.lambda.as_slice().iter().any(|l| (l - 1.0 / 3.0).abs() > 1e-3)));
}

#[test]
fn gen_afl_with_floor_near_uniform_tracks_fedavg() {
    let (clients, _, spec) = toy();
    let aug = rotation();
    let fedavg = run(&clients, &spec, &config(StrategyKind::Fedavg), &aug);
    let cfg = StrategyConfig {
        lambda_min: 1.0 / 3.0 - 1e-12,
        ..config(StrategyKind::GenAfl)
    };
    let gen = run(&clients, &spec, &cfg, &aug);
    assert!(trajectory_distance(&gen, &fedavg) <= 1e-10);
    for r in &gen.records {
        assert!(r.lambda.as_slice().iter().all(|l| (l - 1.0 / 3.0).abs() <= 1e-11));
    }
}

#[test]
fn lambda_stays_feasible() {
    let (clients, _, spec) = toy();
    for (kind, floor) in [
        (StrategyKind::Afl, 0.0),
        (StrategyKind::GenAfl, -1.0),
        (StrategyKind::GenAfl, 0.2),
    ] {
        let cfg = StrategyConfig {
            lambda_min: floor,
            lr_lambda: 2.0,
            ..config(kind)
        };
        let out = run(&clients, &spec, &cfg, &AugmentationSpec::None {});
        for r in &out.records {
            assert!(r.lambda.is_feasible(floor, 1e-12), "{kind:?} {:?}", r.lambda);
        }
    }
}

#[test]
fn single_step_fedavg_is_a_step_on_the_mean_loss() {
    let (clients, _, spec) = toy();
    let aug = rotation();
    let root = RngStream::new(77, 0);
    let lr = 0.1;
    let cfg = StrategyConfig {
        rounds: 1,
        local_steps: 1,
        lr_theta: lr,
        optimizer: OptimizerKind::Sgd,
        ..config(StrategyKind::Fedavg)
    };
    let out = run_federation(&clients, &spec, &cfg, &aug, &root, &mut []).unwrap();

    // Same batches, drawn from the same per-client streams.
    let theta0 = initial_theta(&spec, &root).unwrap();
    let mut mean_grad = vec![0.0; theta0.len()];
    for (i, client) in clients.iter().enumerate() {
        let mut rng = client_stream(&root, 0, i);
        let idx = sample_batch(client.len(), cfg.batch_size, &mut rng);
        let batch = client.batch(&idx, &aug, &mut rng).unwrap();
        let (_, g) = loss_and_grad(&spec, &theta0, &batch).unwrap();
        for (m, v) in mean_grad.iter_mut().zip(g.as_slice()) {
            *m += v / clients.len() as f64;
        }
    }
    let expected: Vec<f64> = theta0
        .as_slice()
        .iter()
        .zip(&mean_grad)
        .map(|(t, g)| t - lr * g)
        .collect();
    let expected = theta0.with_values(expected).unwrap();
    assert!(out.final_theta.max_abs_diff(&expected).unwrap() <= 1e-10);
}

#[test]
fn one_client_one_step_is_plain_sgd() {
    let (clients, _, spec) = toy();
    let root = RngStream::new(5, 5);
    let cfg = StrategyConfig {
        rounds: 1,
        local_steps: 1,
        lr_theta: 0.2,
        optimizer: OptimizerKind::Sgd,
        ..config(StrategyKind::Fedavg)
    };
    let aug = AugmentationSpec::None {};
    let out = run_federation(&clients[..1], &spec, &cfg, &aug, &root, &mut []).unwrap();

    let mut theta = initial_theta(&spec, &root).unwrap();
    let mut rng = client_stream(&root, 0, 0);
    let idx = sample_batch(clients[0].len(), cfg.batch_size, &mut rng);
    let batch = clients[0].batch(&idx, &aug, &mut rng).unwrap();
    let (_, g) = loss_and_grad(&spec, &theta, &batch).unwrap();
    OptimizerState::sgd(0.2, theta.len()).step(&mut theta, &g).unwrap();
    assert_eq!(out.final_theta, theta);
}

#[test]
fn single_step_fed_irm_is_a_penalised_sgd_step() {
    let (clients, _, spec) = toy();
    let root = RngStream::new(6, 0);
    let (lr, beta) = (0.05, 3.0);
    let cfg = StrategyConfig {
        rounds: 1,
        local_steps: 1,
        lr_theta: lr,
        beta,
        optimizer: OptimizerKind::Sgd,
        ..config(StrategyKind::FedIrm)
    };
    let aug = AugmentationSpec::None {};
    let out = run_federation(&clients[..1], &spec, &cfg, &aug, &root, &mut []).unwrap();

    let theta0 = initial_theta(&spec, &root).unwrap();
    let mut rng = client_stream(&root, 0, 0);
    let idx = sample_batch(clients[0].len(), cfg.batch_size, &mut rng);
    let batch = clients[0].batch(&idx, &aug, &mut rng).unwrap();
    let t = irm_terms(&spec, &theta0, &batch).unwrap();
    let expected: Vec<f64> = (0..theta0.len())
        .map(|k| theta0.as_slice()[k] - lr * (t.loss_grad.as_slice()[k] + beta * t.penalty_grad.as_slice()[k]))
        .collect();
    assert!(
        out.final_theta
            .max_abs_diff(&theta0.with_values(expected).unwrap())
            .unwrap()
            <= 1e-8
    );
}

#[test]
fn identical_clients_on_identical_streams_reach_consensus() {
    let (clients, _, spec) = toy();
    let cfg = config(StrategyKind::Fedavg);
    let aug = rotation();
    let mut theta = initial_theta(&spec, &RngStream::new(1, 0)).unwrap();
    for round in 0..3 {
        let stream = RngStream::new(1, 100 + round);
        let updates: Vec<_> = (0..3)
            .map(|_| local_train(0, &clients[0], &theta, &spec, &cfg, &aug, &mut stream.clone()).unwrap())
            .collect();
        let global = aggregate_fedavg(&updates, &[0.25, 0.25, 0.5]).unwrap();
        assert!(global.max_abs_diff(&updates[0].theta_after).unwrap() <= 1e-15);
        theta = global;
    }
}

#[test]
fn zero_learning_rate_freezes_the_model() {
    let (clients, _, spec) = toy();
    let cfg = StrategyConfig {
        lr_theta: 0.0,
        ..config(StrategyKind::Fedavg)
    };
    let theta = initial_theta(&spec, &RngStream::new(2, 0)).unwrap();
    let u = local_train(
        0,
        &clients[0],
        &theta,
        &spec,
        &cfg,
        &rotation(),
        &mut RngStream::new(2, 1),
    )
    .unwrap();
    assert_eq!(u.theta_after, theta);
    assert!(u.pseudo_gradient.as_slice().iter().all(|v| *v == 0.0));
}

#[test]
fn pseudo_gradient_is_exact_difference() {
    let (clients, _, spec) = toy();
    let theta = initial_theta(&spec, &RngStream::new(3, 0)).unwrap();
    let u = local_train(
        0,
        &clients[1],
        &theta,
        &spec,
        &config(StrategyKind::Fedavg),
        &rotation(),
        &mut RngStream::new(3, 1),
    )
    .unwrap();
    assert_eq!(u.pseudo_gradient, theta.sub(&u.theta_after).unwrap());
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (clients, _, spec) = toy();
    let go = |threads: usize, kind: StrategyKind| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run(&clients, &spec, &config(kind), &rotation()))
    };
    for kind in [
        StrategyKind::Fedavg,
        StrategyKind::GenAfl,
        StrategyKind::Vm,
        StrategyKind::FedIrm,
    ] {
        let (a, b) = (go(1, kind), go(3, kind));
        assert_eq!(a, b, "{kind:?}");
    }
}

#[test]
fn centralized_baseline_spends_the_same_step_budget() {
    let (clients, _, spec) = toy();
    let fed = run(&clients, &spec, &config(StrategyKind::Fedavg), &rotation());
    let cen = run(&clients, &spec, &config(StrategyKind::Centralized), &rotation());
    assert_eq!(cen.records.len(), fed.records.len());
    assert_eq!(
        cen.records.last().unwrap().gradient_steps,
        fed.records.last().unwrap().gradient_steps
    );
    assert_eq!(cen.records[0].per_client_loss.len(), 1);
    // Optimizer state carries across rounds, so it is not five independent restarts.
    let restarted = run(
        &[Environment::merge(0, &clients).unwrap()],
        &spec,
        &config(StrategyKind::Fedavg),
        &rotation(),
    );
    assert_ne!(cen.final_theta, restarted.final_theta);
}

#[test]
fn invalid_configs_are_rejected_before_training() {
    let (clients, _, spec) = toy();
    let bad = StrategyConfig {
        lambda_min: 0.5,
        ..config(StrategyKind::GenAfl)
    };
    assert!(run_federation(&clients, &spec, &bad, &rotation(), &RngStream::new(0, 0), &mut []).is_err());
    let prox_adam = StrategyConfig {
        mu: 0.1,
        ..config(StrategyKind::Fedprox)
    };
    assert!(run_federation(&clients, &spec, &prox_adam, &rotation(), &RngStream::new(0, 0), &mut []).is_err());
    let wrong_dim = ModelSpec::new(10, vec![4], 3).unwrap();
    assert!(run_federation(
        &clients,
        &wrong_dim,
        &config(StrategyKind::Fedavg),
        &rotation(),
        &RngStream::new(0, 0),
        &mut []
    )
    .is_err());
}

#[test]
fn theta_values_are_finite_after_training() {
    let (clients, _, spec) = toy();
    for kind in [StrategyKind::Afl, StrategyKind::FedIrm, StrategyKind::Vm] {
        let out = run(&clients, &spec, &config(kind), &rotation());
        assert!(out.final_theta.as_slice().iter().all(|v| v.is_finite()));
    }
}
