//! Declarative network specs, layer synthesis from intertwiner bases, and
//! the forward/backward passes.
//!
//! A network is a chain of conv -> nonlinearity -> pooling layers over a
//! fixed window, closed by an invariant head: fiber max pooling to
//! trivial capsules, a global spatial sum, and an affine map to class
//! scores. On cyclic windows the scores are invariant to every group
//! transform of the input.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hom::{
    assemble, intertwiner_basis, AssembledFilterBank, BankLayout, FiberLayoutEntry,
    FilterBankParams, IntertwinerBasis, PlanarKernel,
};
use crate::linalg::Mat;
use crate::rep::Representation;

use super::conv::{convolve, convolve_backward_input, convolve_backward_kernel};
use super::nonlin::{apply_nonlinearity, nonlin_backward, post_fiber, NonlinKind};
use super::pool::{
    fiber_max_pool, fiber_max_pool_backward, fiber_pool_fiber, quotient_pool,
    quotient_pool_backward, quotient_pool_fiber,
};
use super::{Boundary, FeatureMap, FiberType};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PoolKind {
    FiberMax,
    /// Quotient pooling over the cosets of the given subgroup.
    Quotient(Vec<usize>),
}

/// One layer: convolution to `out_fiber`, then optional nonlinearity and
/// pooling.
#[derive(Clone)]
pub struct LayerSpec {
    pub window: usize,
    pub in_fiber: FiberType,
    pub out_fiber: FiberType,
    pub nonlin: Option<NonlinKind>,
    pub pool: Option<PoolKind>,
}

#[derive(Clone)]
pub struct NetworkSpec {
    pub map_window: usize,
    pub boundary: Boundary,
    pub layers: Vec<LayerSpec>,
    pub n_classes: usize,
}

impl NetworkSpec {
    /// Fiber type entering the head, after validating the whole chain.
    pub fn validate(&self, input_fiber: &FiberType) -> Result<FiberType> {
        crate::grid::check_window(self.map_window)?;
        let mut fiber = input_fiber.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let chain_err = |reason: String| Error::SpecChain { layer: l, reason };
            if !layer.in_fiber.same_shape(&fiber) {
                return Err(chain_err(format!(
                    "expected input fiber {}, got {}",
                    fiber.describe(),
                    layer.in_fiber.describe()
                )));
            }
            if layer.window > self.map_window {
                return Err(Error::WindowSize(layer.window));
            }
            if !layer.in_fiber.group().same_context(layer.out_fiber.group())
                || !layer.in_fiber.group().same_context(fiber.group())
            {
                return Err(chain_err("layer mixes groups".into()));
            }
            fiber = layer.out_fiber.clone();
            if let Some(kind) = layer.nonlin {
                fiber = post_fiber(&fiber, kind)?;
            }
            match &layer.pool {
                Some(PoolKind::FiberMax) => fiber = fiber_pool_fiber(&fiber, None)?,
                Some(PoolKind::Quotient(sub)) => fiber = quotient_pool_fiber(&fiber, sub)?,
                None => {}
            }
        }
        if !fiber.all_permutation() {
            return Err(Error::SpecChain {
                layer: self.layers.len(),
                reason: "head requires permutation-realized capsules".into(),
            });
        }
        Ok(fiber)
    }
}

/// A synthesized layer: bases, parameters, and the fiber types after each
/// stage.
pub struct LayerSynth {
    pub spec: LayerSpec,
    pub bases: Vec<Vec<IntertwinerBasis>>,
    /// Parameter matrices, one per capsule pair, `dim Hom x (m_i * n_j)`.
    pub phi: Vec<Vec<Mat>>,
    /// One learned bias per output capsule copy (NormRelu only).
    pub norm_biases: Vec<f64>,
    /// Raw kernel override; set by verification fixtures, never trained.
    pub raw_kernel: Option<PlanarKernel>,
    pub post_nonlin_fiber: FiberType,
    pub post_pool_fiber: FiberType,
}

impl LayerSynth {
    fn layout(&self) -> BankLayout {
        BankLayout {
            window: self.spec.window,
            spatial_dim: self.spec.in_fiber.group().n,
            input: self
                .spec
                .in_fiber
                .entries
                .iter()
                .map(|(c, m)| FiberLayoutEntry {
                    dim: c.dim(),
                    mult: *m,
                })
                .collect(),
            output: self
                .spec
                .out_fiber
                .entries
                .iter()
                .map(|(c, m)| FiberLayoutEntry {
                    dim: c.dim(),
                    mult: *m,
                })
                .collect(),
        }
    }

    /// The kernel in effect: the raw override when present, otherwise the
    /// bank assembled from the current parameters.
    pub fn kernel(&self) -> Result<PlanarKernel> {
        if let Some(k) = &self.raw_kernel {
            return Ok(k.clone());
        }
        let bank: AssembledFilterBank = assemble(
            &self.layout(),
            &self.bases,
            &FilterBankParams {
                blocks: self.phi.clone(),
            },
            0,
        )?;
        Ok(bank.kernel)
    }

    /// Projects a kernel gradient onto the parameter coordinates.
    fn kernel_grad_to_phi(&self, dk: &PlanarKernel) -> Vec<Vec<Mat>> {
        let cells = dk.cells();
        let mut out = Vec::with_capacity(self.bases.len());
        let in_offsets = self.spec.in_fiber.entry_offsets();
        let out_offsets = self.spec.out_fiber.entry_offsets();
        for (i, (ic, im)) in self.spec.in_fiber.entries.iter().enumerate() {
            let mut row = Vec::with_capacity(self.bases[i].len());
            let d_i = ic.dim();
            for (j, (oc, om)) in self.spec.out_fiber.entries.iter().enumerate() {
                let basis = &self.bases[i][j];
                let e_j = oc.dim();
                let mut dphi = Mat::zeros(basis.dim(), im * om);
                for a in 0..*im {
                    for b in 0..*om {
                        let col = a * om + b;
                        for (p, bmat) in basis.basis.iter().enumerate() {
                            let mut acc = 0.0;
                            for cj in 0..e_j {
                                for cell in 0..cells {
                                    for ci in 0..d_i {
                                        acc += bmat.at(cj, cell * d_i + ci)
                                            * dk.at(
                                                out_offsets[j] + b * e_j + cj,
                                                in_offsets[i] + a * d_i + ci,
                                                cell,
                                            );
                                    }
                                }
                            }
                            dphi.set(p, col, acc);
                        }
                    }
                }
                row.push(dphi);
            }
            out.push(row);
        }
        out
    }
}

/// Affine head mapping pooled capsule sums to class scores.
pub struct Head {
    pub weights: Mat,
    pub bias: Vec<f64>,
}

pub struct Network {
    pub spec: NetworkSpec,
    pub input_fiber: FiberType,
    pub layers: Vec<LayerSynth>,
    pub head: Head,
    /// Fiber entering the head pooling stage.
    pub head_in_fiber: FiberType,
}

/// Intermediate activations retained for the backward pass.
pub struct Trace {
    pub layer_inputs: Vec<FeatureMap>,
    pub post_conv: Vec<FeatureMap>,
    pub post_nonlin: Vec<Option<FeatureMap>>,
    pub post_pool: Vec<Option<FeatureMap>>,
    pub head_input: FeatureMap,
    pub head_pooled_map: FeatureMap,
    pub pooled: Vec<f64>,
    pub scores: Vec<f64>,
}

pub struct LayerGrads {
    pub phi: Vec<Vec<Mat>>,
    pub norm_biases: Vec<f64>,
}

pub struct Gradients {
    pub layers: Vec<LayerGrads>,
    pub head_weights: Mat,
    pub head_bias: Vec<f64>,
}

impl Network {
    /// Builds every intertwiner basis and draws initial parameters:
    /// `Phi ~ U[-a, a]` with `a = sqrt(3 / (dim Hom * input copies))`,
    /// norm biases at 0.1, head weights `U[-sqrt(3/C), sqrt(3/C)]`.
    pub fn synthesize(spec: NetworkSpec, input_fiber: FiberType, seed: u64) -> Result<Network> {
        let head_in_fiber = spec.validate(&input_fiber)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(spec.layers.len());
        for layer in &spec.layers {
            let mut bases = Vec::new();
            for (ic, _) in &layer.in_fiber.entries {
                let pi = Representation::filter_space(layer.window, &ic.rep)?;
                let mut row = Vec::new();
                for (oc, _) in &layer.out_fiber.entries {
                    row.push(intertwiner_basis(&pi, &oc.rep)?);
                }
                bases.push(row);
            }
            let mut phi = Vec::new();
            for (i, (_, im)) in layer.in_fiber.entries.iter().enumerate() {
                let mut row = Vec::new();
                for (j, (_, om)) in layer.out_fiber.entries.iter().enumerate() {
                    let hom_dim = bases[i][j].dim();
                    let fan_in = (hom_dim * im).max(1);
                    let a = (3.0 / fan_in as f64).sqrt();
                    row.push(Mat::from_fn(hom_dim, im * om, |_, _| {
                        rng.random::<f64>() * 2.0 * a - a
                    }));
                }
                phi.push(row);
            }
            let mut post_nonlin_fiber = layer.out_fiber.clone();
            let mut norm_biases = Vec::new();
            if let Some(kind) = layer.nonlin {
                post_nonlin_fiber = post_fiber(&layer.out_fiber, kind)?;
                if kind == NonlinKind::NormRelu {
                    norm_biases = vec![0.1; layer.out_fiber.copies()];
                }
            }
            let post_pool_fiber = match &layer.pool {
                Some(PoolKind::FiberMax) => fiber_pool_fiber(&post_nonlin_fiber, None)?,
                Some(PoolKind::Quotient(sub)) => quotient_pool_fiber(&post_nonlin_fiber, sub)?,
                None => post_nonlin_fiber.clone(),
            };
            layers.push(LayerSynth {
                spec: layer.clone(),
                bases,
                phi,
                norm_biases,
                raw_kernel: None,
                post_nonlin_fiber,
                post_pool_fiber,
            });
        }
        let pooled_dim = head_in_fiber.copies();
        let a = (3.0 / pooled_dim as f64).sqrt();
        let head = Head {
            weights: Mat::from_fn(spec.n_classes, pooled_dim, |_, _| {
                rng.random::<f64>() * 2.0 * a - a
            }),
            bias: vec![0.0; spec.n_classes],
        };
        Ok(Network {
            spec,
            input_fiber,
            layers,
            head,
            head_in_fiber,
        })
    }

    pub fn forward(&self, input: &FeatureMap) -> Result<Trace> {
        if !input.fiber.same_shape(&self.input_fiber) {
            return Err(Error::SpecChain {
                layer: 0,
                reason: format!(
                    "input fiber {} does not match spec {}",
                    input.fiber.describe(),
                    self.input_fiber.describe()
                ),
            });
        }
        if input.window != self.spec.map_window {
            return Err(Error::WindowSize(input.window));
        }
        let mut layer_inputs = Vec::new();
        let mut post_conv = Vec::new();
        let mut post_nonlin = Vec::new();
        let mut post_pool = Vec::new();
        let mut cur = input.clone();
        for layer in &self.layers {
            layer_inputs.push(cur.clone());
            let kernel = layer.kernel()?;
            let z = convolve(&cur, &kernel, layer.spec.out_fiber.clone())?;
            post_conv.push(z.clone());
            let a = match layer.spec.nonlin {
                Some(kind) => {
                    let a = apply_nonlinearity(&z, kind, &layer.norm_biases)?;
                    post_nonlin.push(Some(a.clone()));
                    a
                }
                None => {
                    post_nonlin.push(None);
                    z.clone()
                }
            };
            let p = match &layer.spec.pool {
                Some(PoolKind::FiberMax) => {
                    let p = fiber_max_pool(&a, None)?;
                    post_pool.push(Some(p.clone()));
                    p
                }
                Some(PoolKind::Quotient(sub)) => {
                    let p = quotient_pool(&a, sub)?;
                    post_pool.push(Some(p.clone()));
                    p
                }
                None => {
                    post_pool.push(None);
                    a
                }
            };
            cur = p;
        }
        // invariant head: fiber pool to trivial, global sum, affine map
        let head_input = cur;
        let pooled_map = fiber_max_pool(&head_input, None)?;
        let cells = pooled_map.cells();
        let mut pooled = vec![0.0; pooled_map.channels()];
        for (c, p) in pooled.iter_mut().enumerate() {
            *p = (0..cells).map(|x| pooled_map.at(c, x)).sum();
        }
        let mut scores = self.head.weights.mul_vec(&pooled);
        for (s, b) in scores.iter_mut().zip(&self.head.bias) {
            *s += b;
        }
        Ok(Trace {
            layer_inputs,
            post_conv,
            post_nonlin,
            post_pool,
            head_input,
            head_pooled_map: pooled_map,
            pooled,
            scores,
        })
    }

    pub fn scores(&self, input: &FeatureMap) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.scores)
    }

    /// Exact reverse-mode gradients for every parameter, given the
    /// gradient of the loss with respect to the scores.
    pub fn backward(&self, trace: &Trace, dscores: &[f64]) -> Result<Gradients> {
        let pooled_dim = trace.pooled.len();
        let mut head_weights = Mat::zeros(self.spec.n_classes, pooled_dim);
        for r in 0..self.spec.n_classes {
            for c in 0..pooled_dim {
                head_weights.set(r, c, dscores[r] * trace.pooled[c]);
            }
        }
        let head_bias = dscores.to_vec();
        let mut dpooled = vec![0.0; pooled_dim];
        for c in 0..pooled_dim {
            dpooled[c] = (0..self.spec.n_classes)
                .map(|r| self.head.weights.at(r, c) * dscores[r])
                .sum();
        }
        // broadcast the global-sum gradient over cells, then route the
        // head pooling
        let mut dpooled_map = FeatureMap::zeros(
            trace.head_pooled_map.window,
            trace.head_pooled_map.fiber.clone(),
            trace.head_pooled_map.boundary,
        )?;
        let cells = dpooled_map.cells();
        for c in 0..pooled_dim {
            for x in 0..cells {
                dpooled_map.set(c, x, dpooled[c]);
            }
        }
        let mut dcur = fiber_max_pool_backward(&trace.head_input, &dpooled_map, None)?;

        let mut layer_grads: Vec<LayerGrads> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let da = match &layer.spec.pool {
                Some(PoolKind::FiberMax) => {
                    let a = pre_pool_map(trace, l);
                    fiber_max_pool_backward(a, &dcur, None)?
                }
                Some(PoolKind::Quotient(sub)) => {
                    let a = pre_pool_map(trace, l);
                    quotient_pool_backward(a, &dcur, sub)?
                }
                None => dcur,
            };
            let (dz, dbias) = match layer.spec.nonlin {
                Some(kind) => {
                    let z = &trace.post_conv[l];
                    nonlin_backward(z, &da, kind, &layer.norm_biases)?
                }
                None => (da, Vec::new()),
            };
            let input = &trace.layer_inputs[l];
            let dk = convolve_backward_kernel(input, &dz, layer.spec.window)?;
            let dphi = layer.kernel_grad_to_phi(&dk);
            let kernel = layer.kernel()?;
            dcur = convolve_backward_input(&kernel, &dz, layer.spec.in_fiber.clone())?;
            layer_grads.push(LayerGrads {
                phi: dphi,
                norm_biases: dbias,
            });
        }
        layer_grads.reverse();
        Ok(Gradients {
            layers: layer_grads,
            head_weights,
            head_bias,
        })
    }

    // -- flat parameter access (training, finite differences) -------------

    pub fn num_params(&self) -> usize {
        let mut n = 0;
        for layer in &self.layers {
            for row in &layer.phi {
                for m in row {
                    n += m.rows() * m.cols();
                }
            }
            n += layer.norm_biases.len();
        }
        n += self.head.weights.rows() * self.head.weights.cols() + self.head.bias.len();
        n
    }

    pub fn params_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            for row in &layer.phi {
                for m in row {
                    out.extend_from_slice(m.data());
                }
            }
            out.extend_from_slice(&layer.norm_biases);
        }
        out.extend_from_slice(self.head.weights.data());
        out.extend_from_slice(&self.head.bias);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters supplied, network has {}",
                params.len(),
                self.num_params()
            )));
        }
        let mut it = params.iter();
        for layer in &mut self.layers {
            for row in &mut layer.phi {
                for m in row {
                    let (rows, cols) = (m.rows(), m.cols());
                    for r in 0..rows {
                        for c in 0..cols {
                            m.set(r, c, *it.next().unwrap());
                        }
                    }
                }
            }
            for b in &mut layer.norm_biases {
                *b = *it.next().unwrap();
            }
        }
        let (rows, cols) = (self.head.weights.rows(), self.head.weights.cols());
        for r in 0..rows {
            for c in 0..cols {
                self.head.weights.set(r, c, *it.next().unwrap());
            }
        }
        for b in &mut self.head.bias {
            *b = *it.next().unwrap();
        }
        Ok(())
    }

    pub fn grads_vec(&self, grads: &Gradients) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for lg in &grads.layers {
            for row in &lg.phi {
                for m in row {
                    out.extend_from_slice(m.data());
                }
            }
            out.extend_from_slice(&lg.norm_biases);
        }
        out.extend_from_slice(grads.head_weights.data());
        out.extend_from_slice(&grads.head_bias);
        out
    }

    /// Plain gradient-descent step.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        let mut params = self.params_vec();
        let gv = self.grads_vec(grads);
        for (p, g) in params.iter_mut().zip(&gv) {
            *p -= lr * g;
        }
        self.set_params(&params).expect("shape preserved");
    }
}

fn pre_pool_map(trace: &Trace, l: usize) -> &FeatureMap {
    trace.post_nonlin[l].as_ref().unwrap_or(&trace.post_conv[l])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid;
    use crate::group::StabilizerGroup;
    use crate::nn::{Capsule, FiberType};
    use rand::SeedableRng;

    fn d4_two_layer() -> (Network, FeatureMap) {
        let d4 = StabilizerGroup::build("D4").unwrap();
        let input_fiber = FiberType::input(d4.clone(), 1);
        let reg_fiber = FiberType::new(vec![(Capsule::regular(d4.clone()), 1)]).unwrap();
        let spec = NetworkSpec {
            map_window: 5,
            boundary: Boundary::Cyclic,
            layers: vec![
                LayerSpec {
                    window: 3,
                    in_fiber: input_fiber.clone(),
                    out_fiber: reg_fiber.clone(),
                    nonlin: Some(NonlinKind::Relu),
                    pool: None,
                },
                LayerSpec {
                    window: 3,
                    in_fiber: reg_fiber.clone(),
                    out_fiber: reg_fiber,
                    nonlin: Some(NonlinKind::Relu),
                    pool: Some(PoolKind::FiberMax),
                },
            ],
            n_classes: 2,
        };
        let net = Network::synthesize(spec, input_fiber.clone(), 11).unwrap();
        let mut f = FeatureMap::zeros(5, input_fiber, Boundary::Cyclic).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        f.fill_random(&mut rng);
        (net, f)
    }

    #[test]
    fn zero_input_gives_zero_prehead_activations() {
        let (net, f) = d4_two_layer();
        let zero = FeatureMap::zeros(5, f.fiber.clone(), Boundary::Cyclic).unwrap();
        let trace = net.forward(&zero).unwrap();
        assert!(trace.pooled.iter().all(|&v| v == 0.0));
        // head bias starts at zero, so scores vanish too
        assert!(trace.scores.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_kernel_layer_gives_spatial_sum() {
        // single trivial-capsule layer whose 1x1 kernel is identity: the
        // head sees the plain spatial sum of the input
        let s2 = StabilizerGroup::build("S2").unwrap();
        let fiber = FiberType::input(s2.clone(), 1);
        let spec = NetworkSpec {
            map_window: 5,
            boundary: Boundary::Cyclic,
            layers: vec![LayerSpec {
                window: 1,
                in_fiber: fiber.clone(),
                out_fiber: fiber.clone(),
                nonlin: None,
                pool: None,
            }],
            n_classes: 2,
        };
        let mut net = Network::synthesize(spec, fiber.clone(), 3).unwrap();
        // the only parameter is the 1x1x1 kernel coefficient
        let nparams = net.num_params();
        let mut params = vec![0.0; nparams];
        params[0] = 1.0; // kernel
        net.set_params(&params).unwrap();

        let mut f = FeatureMap::zeros(5, fiber, Boundary::Cyclic).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        f.fill_random(&mut rng);
        let trace = net.forward(&f).unwrap();
        let total: f64 = f.data().iter().sum();
        assert!((trace.pooled[0] - total).abs() < 1e-12);
    }

    #[test]
    fn chain_mismatch_is_rejected() {
        let d4 = StabilizerGroup::build("D4").unwrap();
        let input_fiber = FiberType::input(d4.clone(), 1);
        let reg_fiber = FiberType::new(vec![(Capsule::regular(d4.clone()), 1)]).unwrap();
        let spec = NetworkSpec {
            map_window: 5,
            boundary: Boundary::Cyclic,
            layers: vec![
                LayerSpec {
                    window: 3,
                    in_fiber: input_fiber.clone(),
                    out_fiber: reg_fiber.clone(),
                    nonlin: Some(NonlinKind::CRelu),
                    pool: None,
                },
                LayerSpec {
                    // wrong: previous layer produced doubled crelu capsules
                    window: 3,
                    in_fiber: reg_fiber.clone(),
                    out_fiber: reg_fiber,
                    nonlin: None,
                    pool: None,
                },
            ],
            n_classes: 2,
        };
        assert!(matches!(
            Network::synthesize(spec, input_fiber, 0),
            Err(Error::SpecChain { layer: 1, .. })
        ));
    }

    #[test]
    fn scores_are_invariant_under_group_transforms() {
        let (net, f) = d4_two_layer();
        let base = net.scores(&f).unwrap();
        let d4 = f.group().clone();
        for h in 0..8 {
            for t in [[0i64, 0], [1, 3], [-2, 2]] {
                let g = crate::group::SemidirectElement::new(t.to_vec(), h);
                let tf = crate::nn::transform::transform_input(&f, &g).unwrap();
                let scores = net.scores(&tf).unwrap();
                for (a, b) in scores.iter().zip(&base) {
                    let rel = (a - b).abs() / b.abs().max(1e-30);
                    assert!(rel < 1e-8, "h={h} t={t:?}");
                }
            }
        }
        let _ = d4;
    }

    #[test]
    fn zero_loss_gradient_gives_zero_parameter_gradients() {
        let (net, f) = d4_two_layer();
        let trace = net.forward(&f).unwrap();
        let grads = net.backward(&trace, &[0.0, 0.0]).unwrap();
        assert!(net.grads_vec(&grads).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let (mut net, f) = d4_two_layer();
        let loss_of = |net: &Network, f: &FeatureMap| -> f64 {
            let s = net.scores(f).unwrap();
            // softmax cross entropy against class 0
            let m = s.iter().cloned().fold(f64::MIN, f64::max);
            let z: f64 = s.iter().map(|v| (v - m).exp()).sum();
            -(s[0] - m - z.ln())
        };
        let trace = net.forward(&f).unwrap();
        let s = &trace.scores;
        let m = s.iter().cloned().fold(f64::MIN, f64::max);
        let z: f64 = s.iter().map(|v| (v - m).exp()).sum();
        let probs: Vec<f64> = s.iter().map(|v| (v - m).exp() / z).collect();
        let mut dscores = probs.clone();
        dscores[0] -= 1.0;
        let grads = net.backward(&trace, &dscores).unwrap();
        let gv = net.grads_vec(&grads);

        let params = net.params_vec();
        let h = 1e-5;
        // spot-check a spread of parameters
        let idxs: Vec<usize> = (0..params.len()).step_by(params.len() / 17 + 1).collect();
        for &i in &idxs {
            let mut p = params.clone();
            p[i] += h;
            net.set_params(&p).unwrap();
            let up = loss_of(&net, &f);
            p[i] -= 2.0 * h;
            net.set_params(&p).unwrap();
            let down = loss_of(&net, &f);
            let fd = (up - down) / (2.0 * h);
            let denom = fd.abs().max(gv[i].abs()).max(1e-8);
            assert!(
                (fd - gv[i]).abs() / denom < 1e-4,
                "param {i}: fd={fd} analytic={}",
                gv[i]
            );
        }
        net.set_params(&params).unwrap();
    }

    #[test]
    fn empty_network_head_pools_the_input() {
        let s2 = StabilizerGroup::build("S2").unwrap();
        let fiber = FiberType::input(s2.clone(), 2);
        let spec = NetworkSpec {
            map_window: 3,
            boundary: Boundary::Cyclic,
            layers: vec![],
            n_classes: 2,
        };
        let net = Network::synthesize(spec, fiber.clone(), 1).unwrap();
        let mut f = FeatureMap::zeros(3, fiber, Boundary::Cyclic).unwrap();
        for (i, v) in f.data_mut().iter_mut().enumerate() {
            *v = i as f64;
        }
        let trace = net.forward(&f).unwrap();
        assert_eq!(trace.pooled.len(), 2);
        let s0: f64 = (0..9).map(|x| f.at(0, x)).sum();
        assert_eq!(trace.pooled[0], s0);
        let _ = grid::window_cells(3, 2);
    }

    #[test]
    fn forward_rejects_mismatched_inputs() {
        let (net, _) = d4_two_layer();
        let d4 = StabilizerGroup::build("D4").unwrap();
        // wrong channel count
        let bad_fiber = FiberType::input(d4.clone(), 2);
        let f = FeatureMap::zeros(5, bad_fiber, Boundary::Cyclic).unwrap();
        assert!(matches!(net.forward(&f), Err(Error::SpecChain { .. })));
        // wrong map window
        let good_fiber = FiberType::input(d4, 1);
        let f = FeatureMap::zeros(7, good_fiber, Boundary::Cyclic).unwrap();
        assert!(matches!(net.forward(&f), Err(Error::WindowSize(7))));
    }
}
