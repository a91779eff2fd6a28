#![allow(dead_code)]

use mfac_core::actor::GaussianPolicy;
use mfac_core::critic::{td_error, CriticNet};
use mfac_core::diffnet::{self, AdamState, NetSpec, Network, ParamVector};
use mfac_core::env::{euler_step, MeanField, MeanFieldEnv};
use mfac_core::score::{SampleSet, ScoreNet};
use rand::RngCore;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

/// LQ dynamics with every cost coefficient set to zero: `r = -a^2 dt / 2`.
pub struct ZeroCostEnv {
    pub sigma: f64,
    pub beta: f64,
    pub dt: f64,
}

impl MeanFieldEnv for ZeroCostEnv {
    fn reward(&self, _x: f64, a: f64, _field: &MeanField<'_>) -> f64 {
        -0.5 * a * a * self.dt
    }

    fn next_state(&self, x: f64, a: f64, _global: &SampleSet, rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        euler_step(x, a, self.sigma, self.dt, z)
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn discount_rate(&self) -> f64 {
        self.beta
    }
}

/// Constant reward and a frozen state; still consumes one normal per step.
pub struct ConstantEnv {
    pub reward: f64,
    pub beta: f64,
    pub dt: f64,
}

impl MeanFieldEnv for ConstantEnv {
    fn reward(&self, _x: f64, _a: f64, _field: &MeanField<'_>) -> f64 {
        self.reward
    }

    fn next_state(&self, x: f64, _a: f64, _global: &SampleSet, rng: &mut dyn RngCore) -> f64 {
        let _: f64 = StandardNormal.sample(rng);
        x
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn discount_rate(&self) -> f64 {
        self.beta
    }
}

/// Pushes the state outward by a fixed amount every step.
pub struct RunawayEnv {
    pub push: f64,
}

impl MeanFieldEnv for RunawayEnv {
    fn reward(&self, _x: f64, _a: f64, _field: &MeanField<'_>) -> f64 {
        0.0
    }

    fn next_state(&self, x: f64, _a: f64, _global: &SampleSet, rng: &mut dyn RngCore) -> f64 {
        let _: f64 = StandardNormal.sample(rng);
        x + self.push
    }

    fn dt(&self) -> f64 {
        0.01
    }

    fn discount_rate(&self) -> f64 {
        1.0
    }
}

/// Central-difference gradient of `f` at `p`.
pub fn fd_gradient(p: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = q[i];
            q[i] = orig + h;
            let up = f(&q);
            q[i] = orig - h;
            let down = f(&q);
            q[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|)` in the Euclidean norm, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub const SET_ONE_MEAN: f64 = 0.8;
pub const SET_ONE_VAR: f64 = 0.05468626966596885;

/// Offline score matching on i.i.d. draws; returns the worst deviation from
/// the true score on the two-sigma interval relative to the largest true
/// score magnitude there.
pub fn offline_score_error(steps: usize, lr: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut score = ScoreNet::init(&mut rng);
    let mut adam = AdamState::new(score.net.params.len());
    let target = Normal::new(SET_ONE_MEAN, SET_ONE_VAR.sqrt()).unwrap();
    for _ in 0..steps {
        score.step(&mut adam, target.sample(&mut rng), lr).unwrap();
    }
    let half = 2.0 * SET_ONE_VAR.sqrt();
    let grid: Vec<f64> = (0..=40)
        .map(|i| SET_ONE_MEAN - half + 2.0 * half * i as f64 / 40.0)
        .collect();
    let truth = |x: f64| -(x - SET_ONE_MEAN) / SET_ONE_VAR;
    let scale = truth(SET_ONE_MEAN - half).abs();
    grid.iter()
        .map(|&x| (score.score(x).unwrap() - truth(x)).abs() / scale)
        .fold(0.0, f64::max)
}

pub const FD_H: f64 = 1e-5;

fn perturbed(net: &Network, rng: &mut ChaCha8Rng) -> Network {
    // Push weights off the default init so instances differ in scale as well.
    let scale = rng.random_range(0.5..2.0);
    let params = net
        .params
        .as_slice()
        .iter()
        .map(|p| p * scale + rng.random_range(-0.1..0.1))
        .collect();
    Network::new(net.spec.clone(), ParamVector(params)).unwrap()
}

pub fn with_params(net: &Network, p: &[f64]) -> Network {
    Network::new(net.spec.clone(), ParamVector(p.to_vec())).unwrap()
}

/// Random network of `spec` with perturbed default weights.
pub fn random_net(spec: NetSpec, rng: &mut ChaCha8Rng) -> Network {
    let net = Network::init(spec, rng);
    perturbed(&net, rng)
}

/// Worst relative error of the critic semi-gradient against finite
/// differences of `(y - V(x))^2` with `y` fixed.
pub fn critic_gradient_error(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..instances)
        .map(|_| {
            let critic = CriticNet {
                net: random_net(diffnet::critic_spec(), &mut rng),
            };
            let x = rng.random_range(-3.0..3.0);
            let y = rng.random_range(-2.0..2.0);
            let delta = td_error(y, critic.value(x).unwrap());
            let g = critic.critic_loss_grad(x, delta).unwrap();
            let fd = fd_gradient(critic.net.params.as_slice(), FD_H, |p| {
                let v = with_params(&critic.net, p).forward(&[x]).unwrap()[0];
                (y - v) * (y - v)
            });
            rel_err(g.as_slice(), &fd)
        })
        .fold(0.0, f64::max)
}

/// Worst relative error of the policy-gradient term `-delta log pi(a|x)`.
pub fn actor_gradient_error(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..instances)
        .map(|_| {
            let base = GaussianPolicy::init(&mut rng);
            let policy = GaussianPolicy {
                net: perturbed(&base.net, &mut rng),
                ..base
            };
            let x = rng.random_range(-3.0..3.0);
            let (mu, sigma) = policy.policy_params(x).unwrap();
            let a = mu + sigma * rng.random_range(-2.0..2.0);
            let delta = rng.random_range(-1.0..1.0);
            let g = policy.actor_loss_grad(x, a, delta).unwrap();
            let fd = fd_gradient(policy.net.params.as_slice(), FD_H, |p| {
                let pol = GaussianPolicy {
                    net: with_params(&policy.net, p),
                    ..policy.clone()
                };
                -delta * pol.log_prob(x, a).unwrap()
            });
            rel_err(g.as_slice(), &fd)
        })
        .fold(0.0, f64::max)
}

/// Worst relative error of the score-matching gradient (trace term included).
pub fn score_gradient_error(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..instances)
        .map(|_| {
            let score = ScoreNet {
                net: random_net(diffnet::score_spec(), &mut rng),
            };
            let x = rng.random_range(-3.0..3.0);
            let (_, g) = score
                .net
                .spec
                .score_loss_grad(&score.net.params, &[x])
                .unwrap();
            let fd = fd_gradient(score.net.params.as_slice(), FD_H, |p| {
                ScoreNet {
                    net: with_params(&score.net, p),
                }
                .loss(x)
                .unwrap()
            });
            rel_err(g.as_slice(), &fd)
        })
        .fold(0.0, f64::max)
}
