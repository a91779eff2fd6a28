//! Score-function representation of the population distribution.
//!
//! The network `S(x) ~ d/dx log p(x)` is fit online with the score-matching
//! loss `tr(dS/dx) + |S(x)|^2 / 2` evaluated at the current state, and the
//! distribution is read back by running unadjusted Langevin chains
//! `x <- x + (eps / 2) S(x) + sqrt(eps) z`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffnet::{self, AdamState, BatchWorkspace, Network};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreNet {
    pub net: Network,
}

impl ScoreNet {
    pub fn new(net: Network) -> Result<Self> {
        if net.spec.input_dim != net.spec.output_dim {
            return Err(Error::Config("score network must map R^d to R^d".into()));
        }
        Ok(ScoreNet { net })
    }

    /// Default 1 -> 128 tanh -> 1 score network.
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        ScoreNet {
            net: Network::init(diffnet::score_spec(), rng),
        }
    }

    pub fn score(&self, x: f64) -> Result<f64> {
        Ok(self.net.forward(&[x])?[0])
    }

    /// Score-matching loss at `x` without updating.
    pub fn loss(&self, x: f64) -> Result<f64> {
        Ok(self.net.spec.score_loss_grad(&self.net.params, &[x])?.0)
    }

    /// One Adam step on the score-matching loss at `x`; returns the loss
    /// evaluated before the update.
    pub fn step(&mut self, adam: &mut AdamState, x: f64, lr: f64) -> Result<f64> {
        let (loss, grad) = self.net.spec.score_loss_grad(&self.net.params, &[x])?;
        adam.apply(&mut self.net.params, &grad, lr)?;
        Ok(loss)
    }
}

/// Pure form of [`ScoreNet::step`].
pub fn score_step(
    score: &ScoreNet,
    x: f64,
    lr: f64,
    adam: &AdamState,
) -> Result<(ScoreNet, AdamState, f64)> {
    let mut s = score.clone();
    let mut a = adam.clone();
    let loss = s.step(&mut a, x, lr)?;
    Ok((s, a, loss))
}

/// Mean-field particles; the empirical measure stands in for the population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleSet {
    particles: Vec<f64>,
}

impl SampleSet {
    pub fn new(particles: Vec<f64>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::Config(
                "a sample set needs at least one particle".into(),
            ));
        }
        if particles.iter().any(|p| !p.is_finite()) {
            return Err(Error::non_finite("mean field particles"));
        }
        Ok(SampleSet { particles })
    }

    /// `k` draws from N(mean, std^2).
    pub fn from_normal<R: Rng + ?Sized>(
        k: usize,
        mean: f64,
        std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let normal = Normal::new(mean, std)
            .map_err(|e| Error::Config(format!("initial distribution: {e}")))?;
        SampleSet::new((0..k).map(|_| normal.sample(rng)).collect())
    }

    pub fn particles(&self) -> &[f64] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn empirical_mean(&self) -> f64 {
        self.particles.iter().sum::<f64>() / self.particles.len() as f64
    }

    /// Second central moment (1/k normalization).
    pub fn empirical_variance(&self) -> f64 {
        let m = self.empirical_mean();
        self.particles
            .iter()
            .map(|p| (p - m) * (p - m))
            .sum::<f64>()
            / self.particles.len() as f64
    }

    /// Wasserstein-1 distance between equal-size sets: mean absolute
    /// difference of the sorted particles.
    pub fn wasserstein1(&self, other: &SampleSet) -> Result<f64> {
        crate::error::check_dim("wasserstein sample sizes", self.len(), other.len())?;
        let mut a = self.particles.clone();
        let mut b = other.particles.clone();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
    }
}

/// Arithmetic mean of the particles.
pub fn empirical_mean(samples: &SampleSet) -> f64 {
    samples.empirical_mean()
}

/// Runs `n_iter` Langevin steps on every particle of `warm_start`.
///
/// One key is drawn from `rng`; particle `i` then uses its own ChaCha stream
/// `i` under that key, so the result does not depend on the order in which
/// particles are advanced.
pub fn langevin_sample<R: RngCore + ?Sized>(
    score: &ScoreNet,
    warm_start: &SampleSet,
    eps: f64,
    n_iter: usize,
    rng: &mut R,
) -> Result<SampleSet> {
    let key = rng.next_u64();
    langevin_with_key(score, warm_start, eps, n_iter, key)
}

/// [`langevin_sample`] with an explicit stream key.
pub fn langevin_with_key(
    score: &ScoreNet,
    warm_start: &SampleSet,
    eps: f64,
    n_iter: usize,
    key: u64,
) -> Result<SampleSet> {
    langevin_general(
        |xs, out, ws| score.net.spec.forward_batch(&score.net.params, xs, out, ws),
        warm_start,
        eps,
        n_iter,
        key,
    )
}

/// Langevin chains driven by an arbitrary batched score function (used with
/// closed-form scores in tests).
pub fn langevin_general<F>(
    mut score_batch: F,
    warm_start: &SampleSet,
    eps: f64,
    n_iter: usize,
    key: u64,
) -> Result<SampleSet>
where
    F: FnMut(&[f64], &mut Vec<f64>, &mut BatchWorkspace) -> Result<()>,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!(
            "Langevin step size must be positive, got {eps}"
        )));
    }
    let mut xs = warm_start.particles.clone();
    if n_iter == 0 {
        return Ok(SampleSet { particles: xs });
    }
    let mut streams: Vec<ChaCha8Rng> = (0..xs.len())
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(key);
            r.set_stream(i as u64);
            r
        })
        .collect();
    let half = 0.5 * eps;
    let root = eps.sqrt();
    let mut s = Vec::with_capacity(xs.len());
    let mut ws = BatchWorkspace::new();
    for _ in 0..n_iter {
        score_batch(&xs, &mut s, &mut ws)?;
        for ((x, &si), r) in xs.iter_mut().zip(&s).zip(streams.iter_mut()) {
            let z: f64 = r.sample(StandardNormal);
            *x += half * si + root * z;
        }
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::non_finite("Langevin particles"));
    }
    Ok(SampleSet { particles: xs })
}
