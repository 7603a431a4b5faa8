use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdfError};
use crate::geometry::Point3;
use crate::rng;

/// Shape of the auto-decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub latent_dim: usize,
    pub hidden_width: usize,
    /// Hidden layers at full size.
    pub max_depth: usize,
    /// Zero-based hidden layer whose output is concatenated with the input.
    pub skip_layer: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            latent_dim: 64,
            hidden_width: 128,
            max_depth: 8,
            skip_layer: 3,
        }
    }
}

impl NetworkConfig {
    pub fn input_dim(&self) -> usize {
        self.latent_dim + 3
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim < 1 || self.hidden_width < 1 {
            return Err(SdfError::invalid("latent_dim and hidden_width must be at least 1"));
        }
        if self.max_depth < 1 {
            return Err(SdfError::invalid("max_depth must be at least 1"));
        }
        if self.skip_layer < self.max_depth && self.hidden_width <= self.input_dim() {
            return Err(SdfError::invalid(format!(
                "hidden_width {} must exceed latent_dim + 3 = {} to make room for the skip input",
                self.hidden_width,
                self.input_dim()
            )));
        }
        Ok(())
    }
}

/// Progressive-growth state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthState {
    pub active_depth: usize,
    pub alpha: f64,
    pub fading: bool,
}

/// Dense layer `y = W x + b` with `W` stored row-major (`out × in`).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn random(in_dim: usize, out_dim: usize, bound: f64, rng: &mut rng::Rng) -> Layer {
        let weight = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Layer {
            in_dim,
            out_dim,
            weight,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn zeros_like(&self) -> Layer {
        Layer {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.bias.len()],
        }
    }

    /// `out[b, :] = inp[b, :] · Wᵀ + bias` for a batch of `rows`.
    fn apply(&self, inp: &[f64], rows: usize, out: &mut [f64]) {
        for r in 0..rows {
            out[r * self.out_dim..(r + 1) * self.out_dim].copy_from_slice(&self.bias);
        }
        unsafe {
            matrixmultiply::dgemm(
                rows,
                self.in_dim,
                self.out_dim,
                1.0,
                inp.as_ptr(),
                self.in_dim as isize,
                1,
                self.weight.as_ptr(),
                1,
                self.in_dim as isize,
                1.0,
                out.as_mut_ptr(),
                self.out_dim as isize,
                1,
            );
        }
    }
}

/// Gradients mirroring [`MlpNetwork`]'s parameters plus per-row input
/// gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    /// One entry per hidden layer; empty when parameter gradients were not
    /// requested.
    pub hidden: Vec<Layer>,
    pub output: Option<Layer>,
    /// `rows × latent_dim` gradients with respect to the latent inputs.
    pub latent: Vec<f64>,
    pub latent_dim: usize,
}

impl GradientBundle {
    pub fn latent_row(&self, row: usize) -> &[f64] {
        &self.latent[row * self.latent_dim..(row + 1) * self.latent_dim]
    }

    /// Flattened parameter gradients in [`MlpNetwork::parameters`] order.
    pub fn flat_parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in self.hidden.iter().chain(self.output.iter()) {
            out.extend_from_slice(&l.weight);
            out.extend_from_slice(&l.bias);
        }
        out
    }
}

/// Which gradients [`MlpNetwork::backward`] computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientScope {
    /// Weights, biases and latent inputs.
    Full,
    /// Latent inputs only (frozen network).
    LatentOnly,
}

/// Activations recorded by a batched forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    revision: u64,
    rows: usize,
    /// `hs[0]` is the input; `hs[k + 1]` is the output of hidden layer `k`
    /// (after blending and concatenation).
    hs: Vec<Vec<f64>>,
    /// Pre-activations of hidden layers.
    pre: Vec<Vec<f64>>,
    alpha: f64,
    outputs: Vec<f64>,
}

impl Tape {
    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// ReLU on/off pattern of every hidden unit, layer by layer.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.pre.iter().flatten().map(|&a| a > 0.0).collect()
    }
}

/// Auto-decoder `f(z, x)`: ReLU hidden layers, skip concatenation of the
/// input after `skip_layer`, tanh output, and optional residual fade-in of
/// the newest hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    config: NetworkConfig,
    hidden: Vec<Layer>,
    output: Layer,
    growth: GrowthState,
    revision: u64,
}

impl MlpNetwork {
    pub fn new(config: NetworkConfig, initial_depth: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if initial_depth < 2 {
            return Err(SdfError::invalid("initial depth must be at least 2"));
        }
        if initial_depth > config.max_depth {
            return Err(SdfError::invalid(format!(
                "initial depth {initial_depth} exceeds max depth {}",
                config.max_depth
            )));
        }
        let mut rng = rng::stream(seed, 0);
        let mut hidden = Vec::with_capacity(config.max_depth);
        for k in 0..initial_depth {
            let (i, o) = Self::layer_dims(&config, k);
            hidden.push(Layer::random(i, o, (6.0 / i as f64).sqrt(), &mut rng));
        }
        let h = config.hidden_width;
        let output = Layer::random(h, 1, 1.0 / (h as f64).sqrt(), &mut rng);
        Ok(MlpNetwork {
            config,
            hidden,
            output,
            growth: GrowthState {
                active_depth: initial_depth,
                alpha: 1.0,
                fading: false,
            },
            revision: 0,
        })
    }

    /// `(in, out)` widths of hidden layer `k`.
    fn layer_dims(config: &NetworkConfig, k: usize) -> (usize, usize) {
        let h = config.hidden_width;
        let input = if k == 0 { config.input_dim() } else { h };
        let out = if k == config.skip_layer { h - config.input_dim() } else { h };
        (input, out)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn growth(&self) -> GrowthState {
        self.growth
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn hidden_layers(&self) -> &[Layer] {
        &self.hidden
    }

    pub fn output_layer(&self) -> &Layer {
        &self.output
    }

    /// Mutable access to all layers (hidden, then output). Invalidates tapes.
    pub fn layers_mut(&mut self) -> (&mut [Layer], &mut Layer) {
        self.revision += 1;
        (&mut self.hidden, &mut self.output)
    }

    pub fn parameter_count(&self) -> usize {
        self.hidden
            .iter()
            .chain(std::iter::once(&self.output))
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Flattened parameters: for each hidden layer then the output layer,
    /// weights followed by biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in self.hidden.iter().chain(std::iter::once(&self.output)) {
            out.extend_from_slice(&l.weight);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(SdfError::DimensionMismatch {
                expected: self.parameter_count(),
                actual: flat.len(),
            });
        }
        let (hidden, output) = self.layers_mut();
        let mut at = 0;
        for l in hidden.iter_mut().chain(std::iter::once(output)) {
            let (w, b) = (l.weight.len(), l.bias.len());
            l.weight.copy_from_slice(&flat[at..at + w]);
            l.bias.copy_from_slice(&flat[at + w..at + w + b]);
            at += w + b;
        }
        Ok(())
    }

    /// Appends a randomly initialised hidden layer right before the output
    /// layer, blended in as a residual branch starting at `alpha = 0`.
    pub fn grow(&mut self, seed: u64) -> Result<()> {
        let depth = self.growth.active_depth;
        if depth >= self.config.max_depth {
            return Err(SdfError::Growth(format!("already at max depth {depth}")));
        }
        if self.growth.fading {
            return Err(SdfError::Growth("previous layer is still fading in".into()));
        }
        if depth <= self.config.skip_layer {
            return Err(SdfError::Growth(format!(
                "cannot grow below the skip connection (depth {depth}, skip layer {})",
                self.config.skip_layer
            )));
        }
        let (i, o) = Self::layer_dims(&self.config, depth);
        debug_assert_eq!(i, o);
        let mut rng = rng::stream(seed, 1 + depth as u64);
        self.hidden.push(Layer::random(i, o, (6.0 / i as f64).sqrt(), &mut rng));
        self.growth = GrowthState {
            active_depth: depth + 1,
            alpha: 0.0,
            fading: true,
        };
        self.revision += 1;
        Ok(())
    }

    /// Sets the fade-in weight. Reaching 1 fuses the layer (no more bypass).
    pub fn set_alpha(&mut self, alpha: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(SdfError::invalid(format!("alpha {alpha} outside [0, 1]")));
        }
        if !self.growth.fading {
            if alpha == 1.0 {
                return Ok(());
            }
            return Err(SdfError::Growth("no layer is fading in".into()));
        }
        self.growth.alpha = alpha;
        if alpha == 1.0 {
            self.growth.fading = false;
        }
        self.revision += 1;
        Ok(())
    }

    /// Row-major `rows × (latent_dim + 3)` input matrix.
    pub fn assemble_inputs(&self, codes: &[&[f64]], points: &[Point3]) -> Result<Vec<f64>> {
        let l = self.config.latent_dim;
        if codes.len() != points.len() {
            return Err(SdfError::DimensionMismatch {
                expected: points.len(),
                actual: codes.len(),
            });
        }
        let mut x = Vec::with_capacity(points.len() * (l + 3));
        for (z, p) in codes.iter().zip(points) {
            if z.len() != l {
                return Err(SdfError::DimensionMismatch {
                    expected: l,
                    actual: z.len(),
                });
            }
            x.extend_from_slice(z);
            x.extend_from_slice(&[p.x, p.y, p.z]);
        }
        Ok(x)
    }

    pub fn forward(&self, z: &[f64], x: &Point3) -> Result<(f64, Tape)> {
        let inputs = self.assemble_inputs(&[z], std::slice::from_ref(x))?;
        let tape = self.forward_batch(inputs)?;
        Ok((tape.outputs[0], tape))
    }

    /// Forward pass over a batch of assembled inputs, recording a tape.
    pub fn forward_batch(&self, inputs: Vec<f64>) -> Result<Tape> {
        let d_in = self.config.input_dim();
        if !inputs.len().is_multiple_of(d_in) {
            return Err(SdfError::DimensionMismatch {
                expected: d_in,
                actual: inputs.len() % d_in,
            });
        }
        let rows = inputs.len() / d_in;
        let mut hs = Vec::with_capacity(self.hidden.len() + 1);
        let mut pre = Vec::with_capacity(self.hidden.len());
        hs.push(inputs);
        for k in 0..self.hidden.len() {
            let (a, h) = self.hidden_step(k, &hs[k], &hs[0], rows);
            pre.push(a);
            hs.push(h);
        }
        let outputs = self.output_step(hs.last().unwrap(), rows);
        Ok(Tape {
            revision: self.revision,
            rows,
            hs,
            pre,
            alpha: self.growth.alpha,
            outputs,
        })
    }

    /// Forward pass without a tape, for evaluation.
    pub fn evaluate(&self, z: &[f64], points: &[Point3]) -> Result<Vec<f64>> {
        const CHUNK: usize = 4096;
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(CHUNK) {
            let codes = vec![z; chunk.len()];
            let input = self.assemble_inputs(&codes, chunk)?;
            let rows = chunk.len();
            let mut h = input.clone();
            for k in 0..self.hidden.len() {
                h = self.hidden_step(k, &h, &input, rows).1;
            }
            out.extend(self.output_step(&h, rows));
        }
        Ok(out)
    }

    /// Returns (pre-activation, layer output).
    fn hidden_step(&self, k: usize, inp: &[f64], input0: &[f64], rows: usize) -> (Vec<f64>, Vec<f64>) {
        let layer = &self.hidden[k];
        let mut a = vec![0.0; rows * layer.out_dim];
        layer.apply(inp, rows, &mut a);
        let relu = a.iter().map(|&v| if v > 0.0 { v } else { 0.0 });
        let mut h: Vec<f64> = if self.growth.fading && k + 1 == self.hidden.len() {
            let alpha = self.growth.alpha;
            relu.zip(inp).map(|(r, &x)| alpha * r + (1.0 - alpha) * x).collect()
        } else {
            relu.collect()
        };
        if k == self.config.skip_layer {
            let d_in = self.config.input_dim();
            let w = layer.out_dim;
            let mut cat = Vec::with_capacity(rows * (w + d_in));
            for r in 0..rows {
                cat.extend_from_slice(&h[r * w..(r + 1) * w]);
                cat.extend_from_slice(&input0[r * d_in..(r + 1) * d_in]);
            }
            h = cat;
        }
        (a, h)
    }

    fn output_step(&self, h: &[f64], rows: usize) -> Vec<f64> {
        let mut o = vec![0.0; rows];
        self.output.apply(h, rows, &mut o);
        o.iter().map(|v| v.tanh()).collect()
    }

    /// Back-propagates `upstream[r] = ∂loss/∂f_r` through a tape produced by
    /// this network at its current revision.
    pub fn backward(&self, tape: &Tape, upstream: &[f64], scope: GradientScope) -> Result<GradientBundle> {
        if tape.revision != self.revision {
            return Err(SdfError::StaleTape {
                tape: tape.revision,
                network: self.revision,
            });
        }
        let rows = tape.rows;
        if upstream.len() != rows {
            return Err(SdfError::DimensionMismatch {
                expected: rows,
                actual: upstream.len(),
            });
        }
        let full = scope == GradientScope::Full;
        let d_in = self.config.input_dim();
        let depth = self.hidden.len();

        // Output layer: f = tanh(o).
        let d_o: Vec<f64> = upstream
            .iter()
            .zip(&tape.outputs)
            .map(|(&g, &f)| g * (1.0 - f * f))
            .collect();
        let output_grad = full.then(|| weight_grad(&self.output, &d_o, &tape.hs[depth], rows));
        let mut dh = input_grad(&self.output, &d_o, rows);

        let mut hidden_grads: Vec<Layer> = Vec::with_capacity(if full { depth } else { 0 });
        let mut d_input_skip = vec![0.0; rows * d_in];
        for k in (0..depth).rev() {
            let layer = &self.hidden[k];
            let w = layer.out_dim;
            // Undo the skip concatenation.
            let mut d_r = if k == self.config.skip_layer {
                let width = w + d_in;
                let mut d_r = Vec::with_capacity(rows * w);
                for r in 0..rows {
                    let row = &dh[r * width..(r + 1) * width];
                    d_r.extend_from_slice(&row[..w]);
                    for (acc, &g) in d_input_skip[r * d_in..(r + 1) * d_in].iter_mut().zip(&row[w..]) {
                        *acc += g;
                    }
                }
                d_r
            } else {
                dh
            };
            let mut bypass = None;
            if self.growth.fading && k + 1 == depth {
                let alpha = tape.alpha;
                bypass = Some(d_r.iter().map(|&g| (1.0 - alpha) * g).collect::<Vec<f64>>());
                for g in d_r.iter_mut() {
                    *g *= alpha;
                }
            }
            // ReLU.
            for (g, &a) in d_r.iter_mut().zip(&tape.pre[k]) {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }
            if full {
                hidden_grads.push(weight_grad(layer, &d_r, &tape.hs[k], rows));
            }
            dh = input_grad(layer, &d_r, rows);
            if let Some(b) = bypass {
                for (g, v) in dh.iter_mut().zip(b) {
                    *g += v;
                }
            }
        }
        hidden_grads.reverse();
        for (g, v) in dh.iter_mut().zip(&d_input_skip) {
            *g += v;
        }
        let l = self.config.latent_dim;
        let mut latent = Vec::with_capacity(rows * l);
        for r in 0..rows {
            latent.extend_from_slice(&dh[r * d_in..r * d_in + l]);
        }
        Ok(GradientBundle {
            hidden: hidden_grads,
            output: output_grad,
            latent,
            latent_dim: l,
        })
    }

    pub(crate) fn from_parts(config: NetworkConfig, hidden: Vec<Layer>, output: Layer, growth: GrowthState) -> Result<Self> {
        config.validate()?;
        if hidden.len() != growth.active_depth || growth.active_depth > config.max_depth {
            return Err(SdfError::invalid("layer count disagrees with growth state"));
        }
        for (k, l) in hidden.iter().enumerate() {
            let (i, o) = Self::layer_dims(&config, k);
            if (l.in_dim, l.out_dim) != (i, o) || l.weight.len() != i * o || l.bias.len() != o {
                return Err(SdfError::invalid(format!("hidden layer {k} has wrong shape")));
            }
        }
        if (output.in_dim, output.out_dim) != (config.hidden_width, 1) {
            return Err(SdfError::invalid("output layer has wrong shape"));
        }
        Ok(MlpNetwork {
            config,
            hidden,
            output,
            growth,
            revision: 0,
        })
    }
}

/// `dW = dAᵀ · H`, `db = Σ_rows dA`.
fn weight_grad(layer: &Layer, d_a: &[f64], h: &[f64], rows: usize) -> Layer {
    let mut g = layer.zeros_like();
    unsafe {
        matrixmultiply::dgemm(
            layer.out_dim,
            rows,
            layer.in_dim,
            1.0,
            d_a.as_ptr(),
            1,
            layer.out_dim as isize,
            h.as_ptr(),
            layer.in_dim as isize,
            1,
            0.0,
            g.weight.as_mut_ptr(),
            layer.in_dim as isize,
            1,
        );
    }
    for r in 0..rows {
        for (b, &d) in g.bias.iter_mut().zip(&d_a[r * layer.out_dim..(r + 1) * layer.out_dim]) {
            *b += d;
        }
    }
    g
}

/// `dH = dA · W`.
fn input_grad(layer: &Layer, d_a: &[f64], rows: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * layer.in_dim];
    unsafe {
        matrixmultiply::dgemm(
            rows,
            layer.out_dim,
            layer.in_dim,
            1.0,
            d_a.as_ptr(),
            layer.out_dim as isize,
            1,
            layer.weight.as_ptr(),
            layer.in_dim as isize,
            1,
            0.0,
            out.as_mut_ptr(),
            layer.in_dim as isize,
            1,
        );
    }
    out
}
