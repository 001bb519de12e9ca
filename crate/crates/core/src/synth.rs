//! Seeded generators of synthetic daily demand, used by the test suites and
//! the demo configuration.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, SalesSeries};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Frequent demand of stable size with weekly seasonality.
    Smooth,
    /// Frequent demand of highly variable size.
    Erratic,
    /// Sparse demand of stable size.
    Intermittent,
    /// Sparse demand of highly variable size.
    Lumpy,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Smooth, Regime::Erratic, Regime::Intermittent, Regime::Lumpy];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Smooth => "smooth",
            Regime::Erratic => "erratic",
            Regime::Intermittent => "intermittent",
            Regime::Lumpy => "lumpy",
        }
    }
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng)
}

/// One daily series of `n` observations from `regime`. Series-level
/// parameters are drawn from `rng` as well, so repeated calls vary.
pub fn series(rng: &mut ChaCha8Rng, regime: Regime, n: usize) -> Vec<f64> {
    let amplitude = rng.random_range(0.0..0.5);
    let phase = rng.random_range(0..7) as f64;
    let season = |t: usize| {
        1.0 + amplitude * (2.0 * std::f64::consts::PI * (t as f64 + phase) / 7.0).sin()
    };
    match regime {
        Regime::Smooth => {
            let level = rng.random_range(4.0..30.0);
            let trend = rng.random_range(-0.3..0.3) / n as f64;
            (0..n)
                .map(|t| poisson(rng, level * season(t) * (1.0 + trend * t as f64)))
                .collect()
        }
        Regime::Erratic => {
            let mu = rng.random_range(0.5..2.5);
            let sizes = LogNormal::<f64>::new(mu, rng.random_range(0.9..1.4)).expect("valid");
            let p = rng.random_range(0.85..0.99);
            (0..n)
                .map(|t| {
                    if rng.random::<f64>() < p * season(t).min(1.0 / p) {
                        sizes.sample(rng).ceil()
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        Regime::Intermittent => {
            let p = rng.random_range(0.08..0.5);
            let size = rng.random_range(0.5..4.0);
            (0..n)
                .map(|t| {
                    if rng.random::<f64>() < (p * season(t)).min(1.0) {
                        1.0 + poisson(rng, size * 0.3)
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        Regime::Lumpy => {
            let p = rng.random_range(0.03..0.3);
            let sizes = LogNormal::<f64>::new(rng.random_range(0.0..2.0), rng.random_range(1.0..1.6)).expect("valid");
            (0..n)
                .map(|t| {
                    if rng.random::<f64>() < (p * season(t)).min(1.0) {
                        sizes.sample(rng).ceil()
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    }
}

/// Mixture of regimes with fixed weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub weights: Vec<(Regime, f64)>,
    pub length: usize,
}

impl Generator {
    pub fn single(regime: Regime, length: usize) -> Self {
        Generator {
            weights: vec![(regime, 1.0)],
            length,
        }
    }

    /// Retail-like mix dominated by intermittent items.
    pub fn retail(length: usize) -> Self {
        Generator {
            weights: vec![
                (Regime::Smooth, 0.2),
                (Regime::Erratic, 0.1),
                (Regime::Intermittent, 0.5),
                (Regime::Lumpy, 0.2),
            ],
            length,
        }
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> Regime {
        let total: f64 = self.weights.iter().map(|w| w.1).sum();
        let mut u = rng.random::<f64>() * total;
        for (r, w) in &self.weights {
            if u < *w {
                return *r;
            }
            u -= w;
        }
        self.weights.last().expect("nonempty mixture").0
    }

    /// `n` series with ids `{prefix}{i}`, labelled by generating regime under
    /// the task `regime`. Series without at least two nonzero values are
    /// redrawn so every series is classifiable.
    pub fn dataset(&self, prefix: &str, n: usize, seed: u64) -> Result<LabeledDataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let regime = self.pick(&mut rng);
            let values = loop {
                let v = series(&mut rng, regime, self.length);
                if v.iter().filter(|x| **x > 0.0).count() >= 2 {
                    break v;
                }
            };
            out.push(SalesSeries::undated(format!("{prefix}{i}"), values)?);
            labels.push(regime.name().to_string());
        }
        let mut tasks = BTreeMap::new();
        if labels.iter().any(|l| *l != labels[0]) {
            tasks.insert("regime".to_string(), labels);
        }
        LabeledDataset::new(out, tasks, crate::dataset::Level::Daily)
    }
}
