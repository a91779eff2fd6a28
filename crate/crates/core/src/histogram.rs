//! Binned particle counts for distribution plots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub centers: Vec<f64>,
    pub counts: Vec<u64>,
    /// Particles outside `[lo, hi]`.
    pub out_of_range: u64,
    pub n_particles: u64,
    /// Reference density at each center, if one was supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Vec<f64>>,
}

impl Histogram {
    /// `bins` equal-width bins over `[lo, hi]`; the upper edge belongs to the
    /// last bin.
    pub fn new(particles: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::Config("histogram needs at least one bin".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!(
                "histogram range [{lo}, {hi}] is empty"
            )));
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        let mut out_of_range = 0;
        for &p in particles {
            if !(lo..=hi).contains(&p) {
                out_of_range += 1;
                continue;
            }
            let i = (((p - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Ok(Histogram {
            lo,
            hi,
            centers: (0..bins).map(|i| lo + (i as f64 + 0.5) * width).collect(),
            counts,
            out_of_range,
            n_particles: particles.len() as u64,
            density: None,
        })
    }

    pub fn with_density(mut self, f: impl Fn(f64) -> f64) -> Self {
        self.density = Some(self.centers.iter().map(|&c| f(c)).collect());
        self
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    /// Center of the fullest bin (first one on ties).
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        self.centers[best]
    }
}
