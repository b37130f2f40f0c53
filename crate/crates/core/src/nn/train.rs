//! Synthetic classification tasks and a deterministic gradient-descent
//! loop, enough to train desk-scale invariant classifiers.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid;
use crate::group::{SemidirectElement, StabilizerGroup};

use super::transform::transform_input;
use super::{Boundary, FeatureMap, FiberType, Network};

/// Motif-placement task: a sample of class `c` is motif `c` placed at a
/// uniformly random group transform on a cyclic window, plus uniform
/// noise in `[-noise, noise]`.
#[derive(Clone)]
pub struct SyntheticTask {
    pub group: Arc<StabilizerGroup>,
    pub window: usize,
    pub n_classes: usize,
    pub noise: f64,
}

impl SyntheticTask {
    pub fn new(group: Arc<StabilizerGroup>, window: usize, n_classes: usize) -> Result<Self> {
        grid::check_window(window)?;
        if !(2..=4).contains(&n_classes) {
            return Err(Error::Parse(format!("unsupported class count {n_classes}")));
        }
        Ok(SyntheticTask {
            group,
            window,
            n_classes,
            noise: 0.1,
        })
    }

    /// Class motifs are distinguished by how much invariant mass they
    /// carry, so an invariant classifier can separate them.
    pub fn motif(&self, class: usize) -> Result<FeatureMap> {
        let fiber = FiberType::input(self.group.clone(), 1);
        let mut f = FeatureMap::zeros(self.window, fiber, Boundary::Cyclic)?;
        let n = self.group.n;
        let on = |f: &mut FeatureMap, p: &[i64]| {
            let idx = grid::cell_index(p, f.window);
            f.set(0, idx, 1.0);
        };
        match class {
            // single dot
            0 => on(&mut f, &vec![0; n]),
            // axis-aligned plus sign
            1 => {
                on(&mut f, &vec![0; n]);
                for axis in 0..n {
                    for s in [-1i64, 1] {
                        let mut p = vec![0i64; n];
                        p[axis] = s;
                        on(&mut f, &p);
                    }
                }
            }
            // full diagonal of the 3-window
            2 => {
                for d in -1..=1i64 {
                    on(&mut f, &vec![d; n]);
                }
            }
            // hollow square in the leading plane
            3 => {
                for a in -1..=1i64 {
                    for b in -1..=1i64 {
                        if a == 0 && b == 0 {
                            continue;
                        }
                        let mut p = vec![0i64; n];
                        p[0] = a;
                        p[n - 1] = b;
                        on(&mut f, &p);
                    }
                }
            }
            _ => return Err(Error::Parse(format!("no motif for class {class}"))),
        }
        Ok(f)
    }

    pub fn sample(&self, class: usize, rng: &mut impl Rng) -> Result<FeatureMap> {
        let motif = self.motif(class)?;
        let c = (self.window as i64 - 1) / 2;
        let t: Vec<i64> = (0..self.group.n)
            .map(|_| rng.random_range(-c..=c))
            .collect();
        let h = rng.random_range(0..self.group.order);
        let g = SemidirectElement::new(t, h);
        let mut f = transform_input(&motif, &g)?;
        for v in f.data_mut() {
            *v += (rng.random::<f64>() * 2.0 - 1.0) * self.noise;
        }
        Ok(f)
    }

    pub fn generate(&self, count: usize, rng: &mut impl Rng) -> Result<Vec<(FeatureMap, usize)>> {
        (0..count)
            .map(|i| {
                let class = i % self.n_classes;
                Ok((self.sample(class, rng)?, class))
            })
            .collect()
    }
}

/// Softmax cross entropy: returns the loss and the score gradient.
pub fn softmax_cross_entropy(scores: &[f64], label: usize) -> (f64, Vec<f64>) {
    let m = scores.iter().cloned().fold(f64::MIN, f64::max);
    let exp: Vec<f64> = scores.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = exp.iter().sum();
    let loss = -(scores[label] - m - z.ln());
    let mut grad: Vec<f64> = exp.iter().map(|e| e / z).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

#[derive(Clone, Copy, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 16,
            learning_rate: 0.05,
        }
    }
}

/// Mini-batch gradient descent on softmax cross-entropy. Single-threaded
/// and deterministic given the RNG state; epoch losses are returned. A
/// non-finite loss aborts with a diagnostic.
pub fn train(
    net: &mut Network,
    data: &[(FeatureMap, usize)],
    cfg: TrainConfig,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        // Fisher-Yates with the caller's RNG keeps runs reproducible
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut accum: Option<Vec<f64>> = None;
            let mut batch_loss = 0.0;
            for &idx in batch {
                let (f, label) = &data[idx];
                let trace = net.forward(f)?;
                let (loss, dscores) = softmax_cross_entropy(&trace.scores, *label);
                if !loss.is_finite() {
                    return Err(Error::Diverged(format!(
                        "non-finite loss at epoch {epoch}, sample {idx}"
                    )));
                }
                batch_loss += loss;
                let grads = net.backward(&trace, &dscores)?;
                let gv = net.grads_vec(&grads);
                match &mut accum {
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&gv) {
                            *a += g;
                        }
                    }
                    None => accum = Some(gv),
                }
            }
            if let Some(mut acc) = accum {
                let scale = cfg.learning_rate / batch.len() as f64;
                let mut params = net.params_vec();
                for (p, g) in params.iter_mut().zip(acc.iter_mut()) {
                    *p -= scale * *g;
                }
                net.set_params(&params)?;
            }
            epoch_loss += batch_loss;
        }
        epoch_losses.push(epoch_loss / data.len() as f64);
    }
    Ok(epoch_losses)
}

/// Fraction of samples whose arg-max score matches the label.
pub fn accuracy(net: &Network, data: &[(FeatureMap, usize)]) -> Result<f64> {
    let mut correct = 0usize;
    for (f, label) in data {
        let scores = net.scores(f)?;
        let pred = argmax(&scores);
        if pred == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
