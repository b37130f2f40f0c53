//! Numerical equivariance verification: sweeps group transforms against
//! every layer operation of a network and reports worst-case residuals.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::group::SemidirectElement;
use crate::nn::nonlin::apply_nonlinearity;
use crate::nn::pool::{fiber_max_pool, quotient_pool};
use crate::nn::transform::transform_induced;
use crate::nn::{convolve, relative_residual, Boundary, FeatureMap, Network, PoolKind};

pub const LAYER_TOL: f64 = 1e-9;
pub const SCORE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub wall_ms: u128,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn push(&mut self, name: impl Into<String>, residual: f64, tolerance: f64) {
        let name = name.into();
        self.checks.push(CheckResult {
            name,
            residual,
            tolerance,
            pass: residual <= tolerance,
        });
    }
}

/// The transforms swept per layer: the full stabilizer times either every
/// translation (small windows) or 16 pseudo-random ones.
fn sweep(net: &Network, rng: &mut ChaCha8Rng) -> Vec<SemidirectElement> {
    let group = net.input_fiber.group().clone();
    let w = net.spec.map_window;
    let c = (w as i64 - 1) / 2;
    let translations: Vec<Vec<i64>> = if w <= 7 {
        crate::grid::window_cells(w, group.n)
    } else {
        (0..16)
            .map(|_| (0..group.n).map(|_| rng.random_range(-c..=c)).collect())
            .collect()
    };
    let mut out = Vec::with_capacity(translations.len() * group.order);
    for h in 0..group.order {
        for t in &translations {
            out.push(SemidirectElement::new(t.clone(), h));
        }
    }
    out
}

/// Runs the layer-by-layer equivariance suite plus a whole-network score
/// invariance check. Deterministic for a fixed seed.
pub fn verify_network(net: &Network, seed: u64) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport {
        seed,
        checks: Vec::new(),
        wall_ms: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transforms = sweep(net, &mut rng);

    for (l, layer) in net.layers.iter().enumerate() {
        let mut input = FeatureMap::zeros(
            net.spec.map_window,
            layer.spec.in_fiber.clone(),
            Boundary::Cyclic,
        )?;
        input.fill_random(&mut rng);
        let kernel = layer.kernel()?;

        // convolution
        let base_conv = convolve(&input, &kernel, layer.spec.out_fiber.clone())?;
        let mut worst = 0.0f64;
        for g in &transforms {
            let lhs = convolve(
                &transform_induced(&input, g)?,
                &kernel,
                layer.spec.out_fiber.clone(),
            )?;
            let rhs = transform_induced(&base_conv, g)?;
            worst = worst.max(relative_residual(&lhs, &rhs));
        }
        report.push(format!("layer{l}.conv"), worst, LAYER_TOL);

        // nonlinearity
        let post_nonlin = if let Some(kind) = layer.spec.nonlin {
            let base = apply_nonlinearity(&base_conv, kind, &layer.norm_biases)?;
            let mut worst = 0.0f64;
            for g in &transforms {
                let lhs = apply_nonlinearity(
                    &transform_induced(&base_conv, g)?,
                    kind,
                    &layer.norm_biases,
                )?;
                let rhs = transform_induced(&base, g)?;
                worst = worst.max(relative_residual(&lhs, &rhs));
            }
            report.push(format!("layer{l}.{}", kind.name()), worst, LAYER_TOL);
            base
        } else {
            base_conv
        };

        // pooling
        if let Some(pool) = &layer.spec.pool {
            let (name, base) = match pool {
                PoolKind::FiberMax => ("fiber_pool", fiber_max_pool(&post_nonlin, None)?),
                PoolKind::Quotient(sub) => ("quotient_pool", quotient_pool(&post_nonlin, sub)?),
            };
            let mut worst = 0.0f64;
            for g in &transforms {
                let tin = transform_induced(&post_nonlin, g)?;
                let lhs = match pool {
                    PoolKind::FiberMax => fiber_max_pool(&tin, None)?,
                    PoolKind::Quotient(sub) => quotient_pool(&tin, sub)?,
                };
                let rhs = transform_induced(&base, g)?;
                worst = worst.max(relative_residual(&lhs, &rhs));
            }
            report.push(format!("layer{l}.{name}"), worst, LAYER_TOL);
        }
    }

    // whole-network invariance of the class scores
    if !net.layers.is_empty() {
        let mut input = FeatureMap::zeros(
            net.spec.map_window,
            net.input_fiber.clone(),
            Boundary::Cyclic,
        )?;
        input.fill_random(&mut rng);
        let base = net.scores(&input)?;
        let scale = base.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-30);
        let mut worst = 0.0f64;
        for g in &transforms {
            let scores = net.scores(&crate::nn::transform::transform_input(&input, g)?)?;
            for (a, b) in scores.iter().zip(&base) {
                worst = worst.max((a - b).abs() / scale);
            }
        }
        report.push("network.invariance", worst, SCORE_TOL);
    }

    report.wall_ms = start.elapsed().as_millis();
    Ok(report)
}
