mod common;

use common::{ConstantEnv, RunawayEnv};
use mfac_core::checkpoint::Checkpoint;
use mfac_core::config::Problem;
use mfac_core::env::{LqConfig, LqEnv, MfcgConfig, MfcgEnv};
use mfac_core::trainer::{
    run_ih_mf_ac, run_ih_mfcg_ac, MeanTargets, MetricRow, Mode, Phase, StepObserver, TrainConfig,
    Trainer,
};

fn small(mode: Mode) -> TrainConfig {
    let mut c = TrainConfig::benchmark(mode);
    c.n_steps = 400;
    c.n_particles = 16;
    c.langevin_iters = 4;
    c.log_interval = 50;
    c.truncation_steps = 80;
    c
}

fn bits(rows: &[MetricRow]) -> Vec<Vec<u64>> {
    rows.iter()
        .map(|r| {
            let mut v = vec![
                r.step,
                r.sample_mean.to_bits(),
                r.sample_var.to_bits(),
                r.td_err_avg.to_bits(),
            ];
            v.push(r.score_loss_avg.to_bits());
            v.push(r.abs_mean_error.to_bits());
            v.extend(r.control.iter().chain(&r.value).map(|x| x.to_bits()));
            if let Some(l) = &r.local {
                v.extend(
                    [
                        l.sample_mean,
                        l.sample_var,
                        l.abs_mean_error,
                        l.score_loss_avg,
                    ]
                    .map(f64::to_bits),
                );
            }
            v
        })
        .collect()
}

#[test]
fn same_seed_gives_bitwise_identical_traces() {
    let env = LqEnv::new(LqConfig::SET_1).unwrap();
    let cfg = small(Mode::Mfg);
    let targets = MeanTargets {
        global: Some(0.8),
        local: None,
    };
    let a = run_ih_mf_ac(&env, &cfg, targets, &mut ()).unwrap();
    let b = run_ih_mf_ac(&env, &cfg, targets, &mut ()).unwrap();
    assert_eq!(bits(&a.metrics), bits(&b.metrics));
    assert_eq!(a.state, b.state);

    let other = TrainConfig { seed: 1, ..cfg };
    let c = run_ih_mf_ac(&env, &other, targets, &mut ()).unwrap();
    assert_ne!(bits(&a.metrics), bits(&c.metrics));
}

#[test]
fn resume_from_checkpoint_matches_an_uninterrupted_run() {
    for mode in [Mode::Mfg, Mode::Mfc, Mode::Mfcg] {
        let problem = if mode.is_mfcg() {
            Problem::Mfcg(MfcgConfig::BENCHMARK)
        } else {
            Problem::Lq(LqConfig::SET_1)
        };
        let env = problem.env().unwrap();
        let cfg = small(mode);
        let targets = problem.targets(mode).unwrap();

        let straight = Trainer::new(env.as_ref(), cfg.clone(), targets)
            .unwrap()
            .finish(&mut ())
            .unwrap();

        let mut first = Trainer::new(env.as_ref(), cfg.clone(), targets).unwrap();
        let mut rows = first.run_until(170, &mut ()).unwrap();
        let text = Checkpoint::new(&problem, &cfg, targets, first.state.clone())
            .unwrap()
            .to_json()
            .unwrap();
        drop(first);
        let ck = Checkpoint::from_json(&text).unwrap();
        let mut second = ck.into_trainer(env.as_ref()).unwrap();
        rows.extend(second.run_until(cfg.n_steps, &mut ()).unwrap());

        assert_eq!(bits(&rows), bits(&straight.metrics), "{mode}");
        assert_eq!(second.state, straight.state, "{mode}");
    }
}

#[derive(Default)]
struct Recorder {
    phases: Vec<(u64, Phase)>,
    states: Vec<(u64, f64)>,
}

impl StepObserver for Recorder {
    fn on_phase(&mut self, step: u64, phase: Phase) {
        self.phases.push((step, phase));
    }

    fn on_state(&mut self, step: u64, x: f64) {
        self.states.push((step, x));
    }
}

#[test]
fn each_step_follows_the_algorithm_order() {
    use Phase::*;
    let single = [
        ScoreUpdate,
        Sampling,
        Action,
        Reward,
        Transition,
        TdError,
        CriticUpdate,
        ActorUpdate,
    ];
    let game = [
        ScoreUpdate,
        LocalScoreUpdate,
        Sampling,
        LocalSampling,
        Action,
        Reward,
        Transition,
        TdError,
        CriticUpdate,
        ActorUpdate,
    ];
    let mut cfg = small(Mode::Mfg);
    cfg.n_steps = 3;
    let mut rec = Recorder::default();
    run_ih_mf_ac(
        &LqEnv::new(LqConfig::SET_1).unwrap(),
        &cfg,
        MeanTargets::default(),
        &mut rec,
    )
    .unwrap();
    let expected: Vec<_> = (0..3)
        .flat_map(|n| single.iter().map(move |&p| (n, p)))
        .collect();
    assert_eq!(rec.phases, expected);

    let mut cfg = small(Mode::Mfcg);
    cfg.n_steps = 3;
    let mut rec = Recorder::default();
    run_ih_mfcg_ac(
        &MfcgEnv::new(MfcgConfig::BENCHMARK).unwrap(),
        &cfg,
        MeanTargets::default(),
        &mut rec,
    )
    .unwrap();
    let expected: Vec<_> = (0..3)
        .flat_map(|n| game.iter().map(move |&p| (n, p)))
        .collect();
    assert_eq!(rec.phases, expected);
}

#[test]
fn states_are_clamped_only_during_warm_up() {
    let mut cfg = small(Mode::Mfg);
    cfg.n_steps = 120;
    cfg.truncation_steps = 60;
    let mut rec = Recorder::default();
    run_ih_mf_ac(
        &RunawayEnv { push: 0.5 },
        &cfg,
        MeanTargets::default(),
        &mut rec,
    )
    .unwrap();
    for &(n, x) in &rec.states {
        if n < 60 {
            assert!(x.abs() <= cfg.truncation_bound, "step {n}: {x}");
        }
    }
    let (_, last) = rec.states[119];
    assert!(last > cfg.truncation_bound + 20.0, "{last}");
    // After warm-up the stored state grows by exactly the push each step.
    for w in rec.states[60..].windows(2) {
        assert_eq!(w[1].1, w[0].1 + 0.5);
    }
}

#[test]
fn timescale_gate_blocks_training() {
    let env = LqEnv::new(LqConfig::SET_1).unwrap();
    let mut bad = small(Mode::Mfg);
    bad.lr_score = 1e-3;
    let err = Trainer::new(&env, bad.clone(), MeanTargets::default())
        .err()
        .unwrap();
    assert!(
        err.to_string()
            .contains("lr_score < min(lr_actor, lr_critic)"),
        "{err}"
    );
    assert!(run_ih_mf_ac(&env, &bad, MeanTargets::default(), &mut ()).is_err());

    let mut bad = small(Mode::Mfc);
    bad.lr_score = 1e-6;
    let err = Trainer::new(&env, bad, MeanTargets::default())
        .err()
        .unwrap();
    assert!(
        err.to_string()
            .contains("lr_score > max(lr_actor, lr_critic)"),
        "{err}"
    );

    let game = MfcgEnv::new(MfcgConfig::BENCHMARK).unwrap();
    let mut bad = small(Mode::Mfcg);
    bad.lr_local_score = Some(1e-6);
    let err = Trainer::new(&game, bad, MeanTargets::default())
        .err()
        .unwrap();
    assert!(err.to_string().contains("< lr_local_score"), "{err}");
}

#[test]
fn warm_started_samples_move_slowly() {
    // Regression trace: max and mean W1 distance between consecutive sample
    // sets over the first 300 steps of a fixed small run.
    const MAX_W1: f64 = 0.47686111191997094;
    const MEAN_W1: f64 = 0.28637588228335475;
    let env = LqEnv::new(LqConfig::SET_1).unwrap();
    let mut cfg = small(Mode::Mfg);
    cfg.n_steps = 300;
    let mut t = Trainer::new(&env, cfg.clone(), MeanTargets::default()).unwrap();
    let mut prev = t.state.samples.clone();
    let mut w = Vec::new();
    for n in 1..=cfg.n_steps {
        t.run_until(n, &mut ()).unwrap();
        w.push(prev.wasserstein1(&t.state.samples).unwrap());
        prev = t.state.samples.clone();
    }
    let max = w.iter().copied().fold(0.0, f64::max);
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    // One Langevin sweep moves a particle by about sqrt(eps * iters).
    assert!(max < 2.0 * (cfg.langevin_eps * cfg.langevin_iters as f64).sqrt());
    assert!((max - MAX_W1).abs() < 1e-9, "max W1 {max:?}");
    assert!((mean - MEAN_W1).abs() < 1e-9, "mean W1 {mean:?}");
}

#[test]
fn critic_learns_a_constant_reward_stream() {
    // r = c and x' = x: the value of every state is c / (1 - gamma).
    let env = ConstantEnv {
        reward: -0.01,
        beta: 1.0,
        dt: 0.01,
    };
    let gamma = (-0.01f64).exp();
    let truth = -0.01 / (1.0 - gamma);
    let mut worst = 0.0f64;
    for (i, x0) in (0..10).map(|i| (i, -2.0 + 0.45 * i as f64)) {
        let mut cfg = small(Mode::Mfg);
        cfg.n_steps = 20_000;
        cfg.lr_critic = 1e-3;
        cfg.lr_actor = 1e-4;
        cfg.lr_score = 1e-6;
        cfg.n_particles = 1;
        cfg.langevin_iters = 1;
        cfg.log_interval = 20_000;
        cfg.initial_state_mean = x0;
        cfg.initial_state_std = 1e-12;
        cfg.seed = i;
        let res = run_ih_mf_ac(&env, &cfg, MeanTargets::default(), &mut ()).unwrap();
        let v = res.state.critic.value(res.state.state).unwrap();
        worst = worst.max((v - truth).abs() / truth.abs());
    }
    assert!(worst < 0.05, "worst relative error {worst}");
}
